//! Two-stage detection: a binary stage-1 backend decides whether a sentence
//! is delegitimizing; only positives are sent to the stage-2 backends for
//! characteristics and target spans.

mod backend;
mod codec;
mod export;
mod label_map;
mod wire;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use backend::{
    Backend, BackendDescriptor, CallLog, ConstantBackend, EchoBackend, FixtureBackend, FnBackend, ItemOutput,
    TaskKind, Transport,
};
pub use codec::{
    decode_span_output, decode_stage1_output, decode_stage2_output, encode_stage1_target, encode_stage2_target,
    Stage2Decoded,
};
pub use export::{
    experiment_manifest, export_training_file, training_examples, ExperimentManifest, TrainingExample, TrainingExport,
    ANSWER_SEPARATOR,
};
pub use label_map::{Field, KeyEntry, LabelMap};
pub use wire::{InferRequest, InferResponse, ProtocolError, WireBackend, WireConfig, PROTOCOL_VERSION};

use crate::corpus::{Characteristics, SentenceRecord, Span};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub sentence_id: String,
    pub delegit: bool,
    pub stage1_score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub characteristics: Option<Characteristics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_spans: Option<Vec<Span>>,
    pub model_id: String,
    pub stage2_parse_ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl PredictionRecord {
    /// Characteristics are present exactly on positive records.
    pub fn is_gated(&self) -> bool {
        self.delegit == self.characteristics.is_some() && self.delegit == self.target_spans.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputSentence {
    pub id: String,
    pub text: String,
}

impl InputSentence {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        InputSentence { id: id.into(), text: text.into() }
    }
}

impl From<&SentenceRecord> for InputSentence {
    fn from(r: &SentenceRecord) -> Self {
        InputSentence::new(&r.id, &r.text)
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Stage-1 scores at or above this value are positive.
    pub threshold: f64,
    pub batch_size: usize,
    pub label_map: LabelMap,
    /// Overrides the default `stage1+stage2c+stage2s` model id.
    pub model_id: Option<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig { threshold: 0.5, batch_size: 64, label_map: LabelMap::default(), model_id: None }
    }
}

pub struct Stages<'a> {
    pub stage1: &'a dyn Backend,
    pub characteristics: &'a dyn Backend,
    pub spans: &'a dyn Backend,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub sentences: usize,
    pub positives: usize,
    pub stage1_failures: usize,
    pub stage2_invocations: usize,
    pub stage2_failures: usize,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub records: Vec<PredictionRecord>,
    pub summary: RunSummary,
}

/// Runs `texts` through `backend` in batches (in parallel), returning one
/// outcome per text in input order.
fn run_batched(backend: &dyn Backend, texts: &[String], batch_size: usize) -> (Vec<ItemOutput>, usize) {
    let batches: Vec<std::result::Result<Vec<ItemOutput>, String>> = texts
        .par_chunks(batch_size.max(1))
        .map(|chunk| match backend.infer(chunk) {
            Ok(out) if out.len() == chunk.len() => Ok(out),
            Ok(out) => Err(format!("backend returned {} outputs for {} inputs", out.len(), chunk.len())),
            Err(e) => Err(e.to_string()),
        })
        .collect();
    let failed = batches.iter().filter(|b| b.is_err()).count();
    let mut flat = Vec::with_capacity(texts.len());
    for (batch, chunk) in batches.into_iter().zip(texts.chunks(batch_size.max(1))) {
        match batch {
            Ok(out) => flat.extend(out),
            Err(e) => flat.extend(chunk.iter().map(|_| Err(e.clone()))),
        }
    }
    (flat, failed)
}

fn check_kind(b: &dyn Backend, kind: TaskKind) -> Result<()> {
    let got = b.descriptor().kind;
    if got != kind {
        return Err(Error::invalid(
            "backend",
            format!("`{}` is a {} backend, expected {}", b.descriptor().id, got.as_str(), kind.as_str()),
        ));
    }
    Ok(())
}

pub fn run_pipeline(stages: &Stages<'_>, sentences: &[InputSentence], config: &PipelineConfig) -> Result<PipelineOutput> {
    check_kind(stages.stage1, TaskKind::Binary)?;
    check_kind(stages.characteristics, TaskKind::Characteristics)?;
    check_kind(stages.spans, TaskKind::Span)?;
    if !(0.0..=1.0).contains(&config.threshold) {
        return Err(Error::invalid("threshold", "must lie in [0, 1]"));
    }
    let model_id = config.model_id.clone().unwrap_or_else(|| {
        format!(
            "{}+{}+{}",
            stages.stage1.descriptor().id,
            stages.characteristics.descriptor().id,
            stages.spans.descriptor().id
        )
    });
    let map = &config.label_map;

    let texts: Vec<String> = sentences.iter().map(|s| s.text.clone()).collect();
    let (stage1, failed_batches) = run_batched(stages.stage1, &texts, config.batch_size);
    let n_batches = texts.len().div_ceil(config.batch_size.max(1));
    if n_batches > 0 && failed_batches == n_batches {
        let reason = stage1
            .iter()
            .find_map(|o| o.as_ref().err().cloned())
            .unwrap_or_default();
        return Err(Error::Transport(format!("every stage-1 batch failed: {reason}")));
    }

    let mut records: Vec<PredictionRecord> = sentences
        .iter()
        .zip(stage1)
        .map(|(s, out)| {
            let scored = out.and_then(|raw| decode_stage1_output(&raw, map).map_err(|e| e.to_string()));
            let (score, error) = match scored {
                Ok(p) => (p, None),
                Err(e) => (0.0, Some(format!("stage 1: {e}"))),
            };
            PredictionRecord {
                sentence_id: s.id.clone(),
                delegit: error.is_none() && score >= config.threshold,
                stage1_score: score,
                characteristics: None,
                target_spans: None,
                model_id: model_id.clone(),
                stage2_parse_ok: true,
                error,
            }
        })
        .collect();

    let positives: Vec<usize> = (0..records.len()).filter(|&i| records[i].delegit).collect();
    let pos_texts: Vec<String> = positives.iter().map(|&i| texts[i].clone()).collect();
    let (chars, _) = run_batched(stages.characteristics, &pos_texts, config.batch_size);
    let (spans, _) = run_batched(stages.spans, &pos_texts, config.batch_size);

    let mut summary = RunSummary {
        sentences: records.len(),
        positives: positives.len(),
        stage1_failures: records.iter().filter(|r| r.error.is_some()).count(),
        stage2_invocations: positives.len(),
        stage2_failures: 0,
    };
    for ((&i, c_out), s_out) in positives.iter().zip(chars).zip(spans) {
        let rec = &mut records[i];
        let mut issues = Vec::new();
        let c = match c_out.and_then(|raw| decode_stage2_output(&raw, map).map_err(|e| e.to_string())) {
            Ok(d) => {
                issues.extend(d.issues);
                d.characteristics
            }
            Err(e) => {
                issues.push(e);
                Characteristics::default()
            }
        };
        let sp = match s_out.and_then(|raw| decode_span_output(&raw, &texts[i]).map_err(|e| e.to_string())) {
            Ok(v) => v,
            Err(e) => {
                issues.push(format!("spans: {e}"));
                Vec::new()
            }
        };
        rec.characteristics = Some(c);
        rec.target_spans = Some(sp);
        if !issues.is_empty() {
            rec.stage2_parse_ok = false;
            rec.error = Some(format!("stage 2: {}", issues.join("; ")));
            summary.stage2_failures += 1;
        }
    }
    Ok(PipelineOutput { records, summary })
}
