//! Decoder training files and the hyperparameter manifest for external trainers.
//!
//! A training file is UTF-8 text. Each example is the input sentence, a
//! newline, `### Answer: ` and the target; examples are separated by one
//! blank line and the file ends with a newline (an empty export is an empty
//! file). Line breaks inside sentences are replaced by spaces.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::backend::TaskKind;
use super::codec::{encode_stage1_target, encode_stage2_target};
use super::label_map::LabelMap;
use crate::corpus::{render_span_markup, Corpus, PddAnnotation};
use crate::error::Result;

pub const ANSWER_SEPARATOR: &str = "### Answer: ";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub input_text: String,
    pub target_text: String,
    pub task: TaskKind,
}

impl TrainingExample {
    pub fn render(&self) -> String {
        format!("{}\n{ANSWER_SEPARATOR}{}", self.input_text, self.target_text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingExport {
    pub text: String,
    pub examples: usize,
    pub warnings: Vec<String>,
}

fn one_line(s: &str) -> String {
    s.chars().map(|c| if c == '\n' || c == '\r' { ' ' } else { c }).collect()
}

/// Builds examples for `ids` in the given order. Stage-1 uses every gold
/// annotation; the stage-2 tasks use gold positives carrying complete
/// characteristics. Examples whose labels cannot be rendered are skipped
/// and reported in the returned warnings.
pub fn training_examples(
    ids: &[String],
    corpus: &Corpus,
    gold: &HashMap<String, PddAnnotation>,
    task: TaskKind,
    map: &LabelMap,
) -> (Vec<TrainingExample>, Vec<String>) {
    let mut examples = Vec::new();
    let mut warnings = Vec::new();
    for id in ids {
        let Some(record) = corpus.get(id) else {
            warnings.push(format!("{id}: not in corpus"));
            continue;
        };
        let Some(ann) = gold.get(id) else {
            warnings.push(format!("{id}: no gold annotation"));
            continue;
        };
        let target: Result<String> = match task {
            TaskKind::Binary => Ok(encode_stage1_target(ann.delegit, map)),
            _ if !ann.delegit || !ann.has_characteristics() => continue,
            TaskKind::Characteristics => ann
                .characteristics()
                .and_then(|c| encode_stage2_target(&c, map)),
            TaskKind::Span => render_span_markup(&record.text, &ann.target_spans),
        };
        match target {
            Ok(t) => examples.push(TrainingExample {
                input_text: one_line(&record.text),
                target_text: one_line(&t),
                task,
            }),
            Err(e) => warnings.push(format!("{id}: {e}")),
        }
    }
    (examples, warnings)
}

pub fn export_training_file(
    ids: &[String],
    corpus: &Corpus,
    gold: &HashMap<String, PddAnnotation>,
    task: TaskKind,
    map: &LabelMap,
) -> TrainingExport {
    let (examples, warnings) = training_examples(ids, corpus, gold, task, map);
    let mut text = examples.iter().map(TrainingExample::render).collect::<Vec<_>>().join("\n\n");
    if !text.is_empty() {
        text.push('\n');
    }
    TrainingExport { text, examples: examples.len(), warnings }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderGrid {
    pub learning_rates: Vec<f64>,
    pub max_epochs: u32,
    pub losses: Vec<String>,
    pub checkpoint_selection: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterSettings {
    pub method: String,
    pub quantization_bits: u8,
    pub rank: u32,
    pub alpha: u32,
    pub target_modules: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderGrid {
    pub learning_rates: Vec<f64>,
    pub max_epochs: u32,
    pub adapter: AdapterSettings,
    pub answer_separator: String,
    pub mask_prompt_tokens: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub label_map_id: String,
    pub optimizer: String,
    pub scheduler: String,
    pub runs_per_configuration: u32,
    pub encoder: EncoderGrid,
    pub decoder: DecoderGrid,
    pub tasks: Vec<TaskKind>,
}

pub fn experiment_manifest(map: &LabelMap) -> ExperimentManifest {
    ExperimentManifest {
        label_map_id: map.id.clone(),
        optimizer: "adamw".into(),
        scheduler: "linear".into(),
        runs_per_configuration: 1,
        encoder: EncoderGrid {
            learning_rates: vec![1e-5, 3e-5, 5e-5],
            max_epochs: 10,
            losses: vec!["default".into(), "class_weights".into(), "focal".into()],
            checkpoint_selection: "best_validation".into(),
        },
        decoder: DecoderGrid {
            learning_rates: vec![1e-5, 1e-4],
            max_epochs: 6,
            adapter: AdapterSettings {
                method: "qlora".into(),
                quantization_bits: 4,
                rank: 256,
                alpha: 512,
                target_modules: "all-linear".into(),
            },
            answer_separator: ANSWER_SEPARATOR.trim_end().into(),
            mask_prompt_tokens: true,
        },
        tasks: vec![TaskKind::Binary, TaskKind::Characteristics, TaskKind::Span],
    }
}
