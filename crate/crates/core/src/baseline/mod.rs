//! In-repo classifier: hashed bag-of-words features with logistic heads,
//! trained under cross-entropy, class-weighted or focal loss, plus a
//! lexicon tagger for target spans. Trained models load as in-process
//! pipeline backends.

mod features;
mod lexicon;
mod linear;
mod loss;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use features::{featurize, tokenize, FeatureVector, Featurizer, DEFAULT_DIM};
pub use lexicon::{LexiconMatcher, SpanLexicon};
pub use linear::{
    grad_check, grad_check_multitask, linear_gradient, train_linear, train_multitask, LinearModel,
    MultiTaskModel, TrainConfig, TrainedLinear, TrainedMultiTask,
};
pub use loss::{
    cross_entropy, focal_loss, multitask_loss, sigmoid, softplus, weighted_ce, HeadProbabilities, LossConfig,
    PROB_EPSILON,
};

use crate::error::{Error, Result};
use crate::pipeline::{encode_stage2_target, Backend, BackendDescriptor, ItemOutput, LabelMap, TaskKind};

pub const MODEL_FORMAT: &str = "pdd-baseline";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub format: String,
    pub version: u32,
    pub task: TaskKind,
    pub dim: u32,
    pub classes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<LossConfig>,
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl ModelHeader {
    pub fn new(task: TaskKind, dim: u32, cfg: &TrainConfig, loss: Option<LossConfig>) -> Self {
        let classes = match task {
            TaskKind::Binary => vec!["negative".into(), "positive".into()],
            TaskKind::Characteristics => crate::pipeline::Field::ALL
                .iter()
                .map(|f| serde_json::to_value(f).expect("serializable").as_str().unwrap_or_default().to_string())
                .collect(),
            TaskKind::Span => vec!["target".into()],
        };
        ModelHeader {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            task,
            dim,
            classes,
            loss,
            seed: cfg.seed,
            epochs: cfg.epochs,
            learning_rate: cfg.learning_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelBody {
    Binary(LinearModel),
    Characteristics(MultiTaskModel),
    Span(SpanLexicon),
}

/// Text weight dump: a JSON document with a header and the model body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub header: ModelHeader,
    pub body: ModelBody,
}

impl ModelFile {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if file.header.format != MODEL_FORMAT || file.header.version != MODEL_VERSION {
            return Err(Error::invalid(
                "model",
                format!("unsupported model file {} v{}", file.header.format, file.header.version),
            ));
        }
        let body_task = match file.body {
            ModelBody::Binary(_) => TaskKind::Binary,
            ModelBody::Characteristics(_) => TaskKind::Characteristics,
            ModelBody::Span(_) => TaskKind::Span,
        };
        if body_task != file.header.task {
            return Err(Error::invalid("model", "header task does not match model body"));
        }
        Ok(file)
    }
}

enum Runner {
    Binary(LinearModel, Featurizer),
    Characteristics(MultiTaskModel, Featurizer, LabelMap),
    Span(LexiconMatcher),
}

/// A trained baseline model served as a pipeline backend.
pub struct BaselineBackend {
    desc: BackendDescriptor,
    runner: Runner,
}

impl BaselineBackend {
    pub fn new(id: impl Into<String>, file: ModelFile, map: &LabelMap) -> Result<Self> {
        let desc = BackendDescriptor::in_process(id, file.header.task, &map.id);
        let runner = match file.body {
            ModelBody::Binary(m) => Runner::Binary(m, Featurizer::new(file.header.dim)?),
            ModelBody::Characteristics(m) => {
                Runner::Characteristics(m, Featurizer::new(file.header.dim)?, map.clone())
            }
            ModelBody::Span(lex) => Runner::Span(lex.matcher()),
        };
        Ok(BaselineBackend { desc, runner })
    }

    pub fn load(id: impl Into<String>, path: impl AsRef<Path>, map: &LabelMap) -> Result<Self> {
        Self::new(id, ModelFile::load(path)?, map)
    }
}

impl Backend for BaselineBackend {
    fn descriptor(&self) -> &BackendDescriptor {
        &self.desc
    }

    fn infer(&self, sentences: &[String]) -> Result<Vec<ItemOutput>> {
        Ok(sentences
            .iter()
            .map(|s| match &self.runner {
                Runner::Binary(m, f) => Ok(m.predict_proba(&f.featurize(s)).to_string()),
                Runner::Characteristics(m, f, map) => {
                    encode_stage2_target(&m.predict(&f.featurize(s)).to_characteristics(), map).map_err(|e| e.to_string())
                }
                Runner::Span(matcher) => Ok(matcher.mark(s)),
            })
            .collect())
    }
}

#[cfg(test)]
mod tests;
