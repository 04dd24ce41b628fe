use std::collections::BTreeMap;

use anyhow::Context;
use pdd_core::analysis::write_speaker_meta;
use pdd_core::corpus::{
    corpus_stats, read_raw_records, split_corpus, CommandSegmenter, Corpus, RawRecord, RuleSegmenter, Segmenter,
    Source,
};
use pdd_core::jsonl::to_jsonl;
use pdd_core::synthetic::{generate, SyntheticConfig};
use serde_json::json;

use super::{load_annotations, load_corpus, read_records, write_output};
use crate::args::{IngestArgs, SegmentArgs, SplitArgs, StatsArgs, SynthArgs};
use crate::config::Config;
use crate::manifest::RunRecord;
use crate::UsageError;

pub fn synth(a: &SynthArgs, config: &Config, record: &mut RunRecord) -> anyhow::Result<()> {
    let defaults = SyntheticConfig::default();
    let cfg = SyntheticConfig {
        n_sentences: a.sentences.or(config.synth.sentences).unwrap_or(defaults.n_sentences),
        n_speakers: a.speakers.or(config.synth.speakers).unwrap_or(defaults.n_speakers),
        seed: a.seed.or(config.seed).unwrap_or(defaults.seed),
        ..defaults
    };
    let data = generate(&cfg).map_err(|e| UsageError(e.to_string()))?;
    record.output(&a.out);
    record.seed = Some(cfg.seed);
    for source in Source::ALL {
        let raw = data.raw_records(source);
        write_output(&a.out.join(format!("raw_{source}.jsonl")), to_jsonl(&raw)?, record)?;
    }
    write_output(&a.out.join("sentences.jsonl"), to_jsonl(&data.records)?, record)?;
    write_output(&a.out.join("gold.jsonl"), to_jsonl(&data.gold)?, record)?;
    let mut csv = Vec::new();
    write_speaker_meta(&mut csv, &data.speakers)?;
    write_output(&a.out.join("speakers.csv"), csv, record)?;
    write_output(&a.out.join("events.json"), serde_json::to_string_pretty(&data.events)? + "\n", record)?;
    println!(
        "wrote {} sentences ({} positive) from {} speakers to {}",
        data.records.len(),
        data.gold.iter().filter(|g| g.delegit).count(),
        data.speakers.len(),
        a.out.display()
    );
    Ok(())
}

pub fn ingest(a: &IngestArgs, record: &mut RunRecord) -> anyhow::Result<()> {
    let mut corpus = Corpus::new();
    for spec in &a.inputs {
        let (source, path) = spec
            .split_once('=')
            .ok_or_else(|| UsageError(format!("`{spec}` is not SOURCE=PATH")))?;
        let source: Source = source.parse().map_err(|e: pdd_core::Error| UsageError(e.to_string()))?;
        record.input(path);
        let raw = read_raw_records(path).with_context(|| format!("reading {path}"))?;
        let n = corpus.ingest(raw, source).with_context(|| format!("ingesting {path}"))?;
        eprintln!("{path}: {n} {source} records");
    }
    write_output(&a.out, to_jsonl(corpus.records())?, record)?;
    let hist: BTreeMap<String, usize> = corpus.source_histogram().into_iter().map(|(s, n)| (s.to_string(), n)).collect();
    println!("{} sentences: {}", corpus.len(), serde_json::to_string(&hist)?);
    record.details = json!({ "sources": hist });
    Ok(())
}

pub fn segment(a: &SegmentArgs, record: &mut RunRecord) -> anyhow::Result<()> {
    let docs: Vec<RawRecord> = read_records(&a.input, record)?;
    let segmenter: Box<dyn Segmenter> = match &a.command {
        Some(cmd) => {
            let mut parts = cmd.split_whitespace().map(String::from);
            let program = parts.next().ok_or_else(|| UsageError("empty --command".into()))?;
            Box::new(CommandSegmenter { program, args: parts.collect() })
        }
        None => Box::new(RuleSegmenter::default().with_abbreviations(a.abbreviations.iter().cloned())),
    };
    let mut out = Vec::new();
    for doc in &docs {
        let text = doc.text.as_deref().ok_or_else(|| pdd_core::Error::MissingText(doc.id.clone()))?;
        for (k, sentence) in segmenter.segment(text)?.into_iter().enumerate() {
            out.push(RawRecord {
                id: format!("{}-{:03}", doc.id, k + 1),
                text: Some(sentence),
                date: doc.date.clone(),
                speaker_id: doc.speaker_id.clone(),
                doc_id: Some(doc.doc_id.clone().unwrap_or_else(|| doc.id.clone())),
            });
        }
    }
    write_output(&a.out, to_jsonl(&out)?, record)?;
    println!("{} documents -> {} sentences", docs.len(), out.len());
    Ok(())
}

pub fn split(a: &SplitArgs, config: &Config, record: &mut RunRecord) -> anyhow::Result<()> {
    let corpus = load_corpus(&a.corpus, record)?;
    let ratios = match &a.ratios {
        Some(r) => <[f64; 3]>::try_from(r.as_slice())
            .map_err(|_| UsageError(format!("--ratios takes three values, got {}", r.len())))?,
        None => config.split.ratios.unwrap_or([0.7, 0.15, 0.15]),
    };
    let seed = a.seed.or(config.seed).unwrap_or(42);
    record.seed = Some(seed);
    let split = split_corpus(corpus.ids(), ratios, seed).map_err(|e| UsageError(e.to_string()))?;
    write_output(&a.out, to_jsonl(&split.to_records())?, record)?;
    let [tr, va, te] = split.sizes();
    println!("train {tr} / validation {va} / test {te}");
    record.details = json!({ "sizes": [tr, va, te] });
    Ok(())
}

pub fn stats(a: &StatsArgs, record: &mut RunRecord) -> anyhow::Result<()> {
    let corpus = load_corpus(&a.corpus, record)?;
    let annotations = match &a.annotations {
        Some(p) => load_annotations(p, record)?,
        None => Vec::new(),
    };
    let stats = corpus_stats(&corpus, &annotations);
    print!("{}", stats.render_tables());
    if stats.unmatched_annotations > 0 {
        eprintln!("warning: {} annotations reference unknown sentences", stats.unmatched_annotations);
    }
    if let Some(path) = &a.csv {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["section", "label", "count", "rate"])?;
        for row in stats.csv_rows() {
            w.write_record(&row)?;
        }
        write_output(path, w.into_inner()?, record)?;
    }
    if let Some(path) = &a.json {
        write_output(path, serde_json::to_string_pretty(&stats)? + "\n", record)?;
    }
    Ok(())
}
