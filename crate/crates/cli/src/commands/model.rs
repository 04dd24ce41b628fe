use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::sync::Arc;

use anyhow::{bail, Context};
use pdd_core::baseline::{
    train_linear, train_multitask, Featurizer, LossConfig, ModelBody, ModelFile, ModelHeader, SpanLexicon,
    TrainConfig, DEFAULT_DIM,
};
use pdd_core::corpus::{Corpus, PddAnnotation, Span};
use pdd_core::evaluation::{evaluate as evaluate_predictions, EvaluationReport};
use pdd_core::jsonl::to_jsonl;
use pdd_core::pipeline::{
    experiment_manifest, export_training_file, run_pipeline, InputSentence, PipelineConfig, PredictionRecord, Stages,
    TaskKind,
};
use serde_json::json;

use super::{load_annotations, load_corpus, load_label_map, read_records, selected_ids, write_output};
use crate::args::{
    EvaluateArgs, ExportTrainArgs, LossKind, PredictArgs, ReportArgs, ServeMockBackendArgs, Task, TrainBaselineArgs,
};
use crate::backends::{build_backend, BackendContext};
use crate::config::Config;
use crate::manifest::RunRecord;
use crate::server::serve_until_ctrl_c;
use crate::wire_server::infer_router;
use crate::UsageError;

pub(crate) fn task_kind(t: Task) -> TaskKind {
    match t {
        Task::Binary => TaskKind::Binary,
        Task::Characteristics => TaskKind::Characteristics,
        Task::Span => TaskKind::Span,
    }
}

/// Gold labels keyed by sentence; a later line for the same sentence wins.
fn gold_by_id(gold: Vec<PddAnnotation>) -> HashMap<String, PddAnnotation> {
    gold.into_iter().map(|g| (g.sentence_id.clone(), g)).collect()
}

pub fn export_train(a: &ExportTrainArgs, config: &Config, record: &mut RunRecord) -> anyhow::Result<()> {
    let corpus = load_corpus(&a.corpus, record)?;
    let gold = gold_by_id(load_annotations(&a.gold, record)?);
    let ids = selected_ids(&a.selection, &corpus, record)?;
    let map = load_label_map(a.label_map.as_deref(), config, record)?;
    let export = export_training_file(&ids, &corpus, &gold, task_kind(a.task), &map);
    write_output(&a.out, &export.text, record)?;
    for w in export.warnings.iter().take(20) {
        eprintln!("warning: {w}");
    }
    if export.warnings.len() > 20 {
        eprintln!("warning: {} more skipped sentences", export.warnings.len() - 20);
    }
    if let Some(path) = &a.experiment_manifest {
        write_output(path, serde_json::to_string_pretty(&experiment_manifest(&map))? + "\n", record)?;
    }
    println!("{} examples written to {}", export.examples, a.out.display());
    record.details = json!({ "examples": export.examples, "skipped": export.warnings.len() });
    Ok(())
}

fn loss_config(a: &TrainBaselineArgs, config: &Config) -> anyhow::Result<LossConfig> {
    let kind = match a.loss {
        Some(LossKind::Default) => "default".to_string(),
        Some(LossKind::ClassWeights) => "class_weights".to_string(),
        Some(LossKind::Focal) => "focal".to_string(),
        None => config.train.loss.clone().unwrap_or_else(|| "default".into()),
    };
    let mut loss = LossConfig::parse(&kind).map_err(|e| UsageError(e.to_string()))?;
    if let LossConfig::Focal { gamma, alpha } = &mut loss {
        if let Some(g) = a.gamma.or(config.train.gamma) {
            *gamma = g;
        }
        if let Some(al) = a.alpha.or(config.train.alpha) {
            *alpha = al;
        }
    } else if a.gamma.is_some() || a.alpha.is_some() {
        bail!(UsageError("--gamma/--alpha apply only to --loss focal".into()));
    }
    loss.validate().map_err(|e| UsageError(e.to_string()))?;
    Ok(loss)
}

pub fn train_baseline(a: &TrainBaselineArgs, config: &Config, record: &mut RunRecord) -> anyhow::Result<()> {
    let corpus = load_corpus(&a.corpus, record)?;
    let gold = gold_by_id(load_annotations(&a.gold, record)?);
    let ids = selected_ids(&a.selection, &corpus, record)?;
    let t = &config.train;
    let defaults = TrainConfig::default();
    let cfg = TrainConfig {
        loss: loss_config(a, config)?,
        epochs: a.epochs.or(t.epochs).unwrap_or(defaults.epochs),
        learning_rate: a.learning_rate.or(t.learning_rate).unwrap_or(defaults.learning_rate),
        seed: a.seed.or(config.seed).unwrap_or(defaults.seed),
        l2: a.l2.or(t.l2).unwrap_or(defaults.l2),
        batch_size: a.batch_size.or(t.batch_size),
    };
    record.seed = Some(cfg.seed);
    let dim = a.dim.or(t.dim).unwrap_or(DEFAULT_DIM);
    let featurizer = Featurizer::new(dim).map_err(|e| UsageError(e.to_string()))?;
    let labelled: Vec<(&str, &PddAnnotation)> = ids
        .iter()
        .filter_map(|id| Some((corpus.get(id)?.text.as_str(), gold.get(id)?)))
        .collect();
    if labelled.len() < ids.len() {
        eprintln!("warning: {} selected sentences lack text or gold labels", ids.len() - labelled.len());
    }
    let task = task_kind(a.task);
    let (file, details) = match task {
        TaskKind::Binary => {
            let xs: Vec<_> = labelled.iter().map(|(t, _)| featurizer.featurize(t)).collect();
            let ys: Vec<bool> = labelled.iter().map(|(_, g)| g.delegit).collect();
            let trained = train_linear(&xs, &ys, &cfg)?;
            let correct = xs
                .iter()
                .zip(&ys)
                .filter(|(x, y)| (trained.model.predict_proba(x) >= 0.5) == **y)
                .count();
            let details = json!({
                "examples": xs.len(),
                "final_loss": trained.loss_history.last(),
                "train_accuracy": correct as f64 / xs.len() as f64,
            });
            let header = ModelHeader::new(task, dim, &cfg, Some(trained.loss));
            (ModelFile { header, body: ModelBody::Binary(trained.model) }, details)
        }
        TaskKind::Characteristics => {
            let rich: Vec<(&str, &PddAnnotation)> =
                labelled.into_iter().filter(|(_, g)| g.delegit && g.has_characteristics()).collect();
            if rich.is_empty() {
                bail!("no positive sentences with characteristics in the selection");
            }
            let xs: Vec<_> = rich.iter().map(|(t, _)| featurizer.featurize(t)).collect();
            let cs = rich.iter().map(|(_, g)| g.characteristics()).collect::<Result<Vec<_>, _>>()?;
            let trained = train_multitask(&xs, &cs, &cfg)?;
            let details = json!({ "examples": xs.len(), "final_loss": trained.loss_history.last() });
            let header = ModelHeader::new(task, dim, &cfg, None);
            (ModelFile { header, body: ModelBody::Characteristics(trained.model) }, details)
        }
        TaskKind::Span => {
            let examples: Vec<(&str, &[Span])> = labelled
                .iter()
                .filter(|(_, g)| g.delegit)
                .map(|(t, g)| (*t, g.target_spans.as_slice()))
                .collect();
            let lexicon = SpanLexicon::train(examples.iter().copied(), a.max_terms.or(t.max_terms).unwrap_or(500));
            let details = json!({ "examples": examples.len(), "terms": lexicon.terms.len() });
            let header = ModelHeader::new(task, dim, &cfg, None);
            (ModelFile { header, body: ModelBody::Span(lexicon) }, details)
        }
    };
    write_output(&a.out, serde_json::to_string(&file)?, record)?;
    println!("{} model written to {}: {details}", task.as_str(), a.out.display());
    record.details = details;
    Ok(())
}

pub fn predict(a: &PredictArgs, config: &Config, record: &mut RunRecord) -> anyhow::Result<()> {
    let corpus = load_corpus(&a.corpus, record)?;
    let ids = selected_ids(&a.selection, &corpus, record)?;
    let map = load_label_map(a.label_map.as_deref(), config, record)?;
    for spec in [&a.stage1, &a.characteristics, &a.spans] {
        for scheme in ["fixture:", "gold:", "baseline:"] {
            if let Some(path) = spec.strip_prefix(scheme) {
                record.input(path);
            }
        }
    }
    let ctx = BackendContext { map: &map, corpus: Some(&corpus), wire: &config.wire };
    let stage1 = build_backend(&a.stage1, TaskKind::Binary, &ctx)?;
    let characteristics = build_backend(&a.characteristics, TaskKind::Characteristics, &ctx)?;
    let spans = build_backend(&a.spans, TaskKind::Span, &ctx)?;
    let inputs: Vec<InputSentence> = ids
        .iter()
        .map(|id| corpus.get(id).map(InputSentence::from).ok_or_else(|| pdd_core::Error::UnknownSentence(id.clone())))
        .collect::<Result<_, _>>()?;
    let defaults = PipelineConfig::default();
    let threshold = a.threshold.or(config.predict.threshold).unwrap_or(defaults.threshold);
    if !(0.0..=1.0).contains(&threshold) {
        bail!(UsageError(format!("threshold {threshold} outside [0, 1]")));
    }
    let cfg = PipelineConfig {
        threshold,
        batch_size: a.batch_size.or(config.predict.batch_size).unwrap_or(defaults.batch_size),
        label_map: map.clone(),
        model_id: a.model_id.clone(),
    };
    let stages = Stages { stage1: stage1.as_ref(), characteristics: characteristics.as_ref(), spans: spans.as_ref() };
    let output = run_pipeline(&stages, &inputs, &cfg)?;
    write_output(&a.out, to_jsonl(&output.records)?, record)?;
    let s = &output.summary;
    println!(
        "{} sentences, {} positive, stage-2 calls {}, stage-1 failures {}, stage-2 failures {}",
        s.sentences, s.positives, s.stage2_invocations, s.stage1_failures, s.stage2_failures
    );
    record.details = json!({ "summary": s });
    Ok(())
}

pub fn evaluate(a: &EvaluateArgs, record: &mut RunRecord) -> anyhow::Result<()> {
    let preds: Vec<PredictionRecord> = read_records(&a.pred, record)?;
    let gold = load_annotations(&a.gold, record)?;
    let corpus: Option<Corpus> = a.corpus.as_ref().map(|p| load_corpus(p, record)).transpose()?;
    let predicted: HashSet<&str> = preds.iter().map(|p| p.sentence_id.as_str()).collect();
    let total_gold = gold.len();
    let gold: Vec<PddAnnotation> = gold.into_iter().filter(|g| predicted.contains(g.sentence_id.as_str())).collect();
    if gold.len() < total_gold {
        eprintln!("note: {} gold sentences without predictions were skipped", total_gold - gold.len());
    }
    let report = evaluate_predictions(&preds, &gold, corpus.as_ref())?;
    print!("{}", render_report(&report.rounded()));
    if let Some(path) = &a.out {
        write_output(path, serde_json::to_string_pretty(&report)? + "\n", record)?;
    }
    if let Some(path) = &a.csv {
        write_output(path, report.to_csv()?, record)?;
    }
    Ok(())
}

fn render_report(r: &EvaluationReport) -> String {
    let mut s = String::new();
    let b = &r.binary;
    let _ = writeln!(s, "model {}  n={}", r.model_id, r.n_sentences);
    let _ = writeln!(
        s,
        "binary      acc {:.3}  P {:.3}  R {:.3}  F1 {:.3}  (tp {} fp {} fn {} tn {})",
        b.accuracy, b.precision, b.recall, b.f1, b.tp, b.fp, b.fn_, b.tn
    );
    if let Some(c) = &r.characteristics {
        let v = c.values();
        let _ = writeln!(
            s,
            "characteristics  intensity {:.3}  incivility {:.3}  group {:.3}  person {:.3}  outgroup {:.3}  common-good {:.3}  institute {:.3}  avg {:.3}",
            v[0], v[1], v[2], v[3], v[4], v[5], v[6], c.avg_f1
        );
    }
    for (label, m) in [("spans exact", &r.spans), ("spans overlap", &r.spans_overlap)] {
        if let Some(m) = m {
            let _ = writeln!(s, "{label:<13} P {:.3}  R {:.3}  F1 {:.3}  #TP {}", m.precision, m.recall, m.f1, m.tp_count);
        }
    }
    s
}

pub fn report(a: &ReportArgs, record: &mut RunRecord) -> anyhow::Result<()> {
    let mut reports = Vec::new();
    for path in &a.evals {
        record.input(path);
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let r: EvaluationReport =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        reports.push(r.rounded());
    }
    let mut md = String::from("# Evaluation summary\n\n## Binary PDD detection\n\n");
    md.push_str("| Model | Acc. | P | R | F1 |\n|---|---|---|---|---|\n");
    for r in &reports {
        let b = &r.binary;
        let _ = writeln!(md, "| {} | {:.3} | {:.3} | {:.3} | {:.3} |", r.model_id, b.accuracy, b.precision, b.recall, b.f1);
    }
    if reports.iter().any(|r| r.characteristics.is_some()) {
        md.push_str("\n## Characteristics (F1)\n\n");
        md.push_str("| Model | Intensity | Incivility | Group | Person | Outgroup | Common-good | Institute | Avg. |\n");
        md.push_str("|---|---|---|---|---|---|---|---|---|\n");
        for r in &reports {
            if let Some(c) = &r.characteristics {
                let cells: Vec<String> = c.values().iter().chain([&c.avg_f1]).map(|v| format!("{v:.3}")).collect();
                let _ = writeln!(md, "| {} | {} |", r.model_id, cells.join(" | "));
            }
        }
    }
    if reports.iter().any(|r| r.spans.is_some()) {
        md.push_str("\n## Target spans (exact match)\n\n| Model | P | R | F1 | #TP |\n|---|---|---|---|---|\n");
        for r in &reports {
            if let Some(m) = &r.spans {
                let _ = writeln!(md, "| {} | {:.3} | {:.3} | {:.3} | {} |", r.model_id, m.precision, m.recall, m.f1, m.tp_count);
            }
        }
    }
    write_output(&a.out, &md, record)?;
    print!("{md}");
    Ok(())
}

pub fn serve_mock_backend(a: &ServeMockBackendArgs, config: &Config, record: &mut RunRecord) -> anyhow::Result<()> {
    if a.backend.starts_with("wire:") {
        bail!(UsageError("a mock server cannot forward to another wire backend".into()));
    }
    let map = load_label_map(a.label_map.as_deref(), config, record)?;
    let corpus = a.corpus.as_ref().map(|p| load_corpus(p, record)).transpose()?;
    let ctx = BackendContext { map: &map, corpus: corpus.as_ref(), wire: &config.wire };
    let backend: Arc<dyn pdd_core::pipeline::Backend> = Arc::from(build_backend(&a.backend, task_kind(a.task), &ctx)?);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(a.addr).await.with_context(|| format!("binding {}", a.addr))?;
        eprintln!("{} backend listening on http://{}/infer", a.backend, listener.local_addr()?);
        serve_until_ctrl_c(listener, infer_router(backend)).await?;
        anyhow::Ok(())
    })
}
