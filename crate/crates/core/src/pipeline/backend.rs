use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Binary,
    Characteristics,
    Span,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Binary => "binary",
            TaskKind::Characteristics => "characteristics",
            TaskKind::Span => "span",
        }
    }
}

impl std::str::FromStr for TaskKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" | "stage1" => Ok(TaskKind::Binary),
            "characteristics" | "stage2" => Ok(TaskKind::Characteristics),
            "span" | "spans" => Ok(TaskKind::Span),
            _ => Err(crate::Error::invalid("task", format!("unknown task kind `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transport {
    InProcess,
    Wire,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub id: String,
    pub kind: TaskKind,
    pub transport: Transport,
    pub label_map_id: String,
}

impl BackendDescriptor {
    pub fn in_process(id: impl Into<String>, kind: TaskKind, label_map_id: impl Into<String>) -> Self {
        BackendDescriptor {
            id: id.into(),
            kind,
            transport: Transport::InProcess,
            label_map_id: label_map_id.into(),
        }
    }
}

/// Outcome for a single sentence: raw model text or a failure message.
pub type ItemOutput = std::result::Result<String, String>;

/// A classifier producing raw text per sentence. An `Err` from `infer`
/// means the whole batch failed (transport level); per-sentence failures are
/// reported inside the returned vector, which must align with the input.
pub trait Backend: Send + Sync {
    fn descriptor(&self) -> &BackendDescriptor;
    fn infer(&self, sentences: &[String]) -> Result<Vec<ItemOutput>>;
}

/// Call accounting shared by the mock backends.
#[derive(Debug, Default)]
pub struct CallLog {
    batches: AtomicUsize,
    seen: Mutex<Vec<String>>,
}

impl CallLog {
    fn record(&self, sentences: &[String]) {
        self.batches.fetch_add(1, Ordering::SeqCst);
        self.seen.lock().expect("lock poisoned").extend(sentences.iter().cloned());
    }

    pub fn batches(&self) -> usize {
        self.batches.load(Ordering::SeqCst)
    }

    /// Number of sentences passed to the backend over all calls.
    pub fn sentences(&self) -> usize {
        self.seen.lock().expect("lock poisoned").len()
    }

    pub fn seen(&self) -> Vec<String> {
        self.seen.lock().expect("lock poisoned").clone()
    }
}

/// Returns the same output for every sentence.
pub struct ConstantBackend {
    desc: BackendDescriptor,
    output: String,
    pub calls: CallLog,
}

impl ConstantBackend {
    pub fn new(desc: BackendDescriptor, output: impl Into<String>) -> Self {
        ConstantBackend { desc, output: output.into(), calls: CallLog::default() }
    }
}

impl Backend for ConstantBackend {
    fn descriptor(&self) -> &BackendDescriptor {
        &self.desc
    }

    fn infer(&self, sentences: &[String]) -> Result<Vec<ItemOutput>> {
        self.calls.record(sentences);
        Ok(sentences.iter().map(|_| Ok(self.output.clone())).collect())
    }
}

/// Returns its input unchanged.
pub struct EchoBackend {
    desc: BackendDescriptor,
    pub calls: CallLog,
}

impl EchoBackend {
    pub fn new(desc: BackendDescriptor) -> Self {
        EchoBackend { desc, calls: CallLog::default() }
    }
}

impl Backend for EchoBackend {
    fn descriptor(&self) -> &BackendDescriptor {
        &self.desc
    }

    fn infer(&self, sentences: &[String]) -> Result<Vec<ItemOutput>> {
        self.calls.record(sentences);
        Ok(sentences.iter().map(|s| Ok(s.clone())).collect())
    }
}

/// Looks each sentence up in a text-to-output map; unknown sentences get
/// `fallback` or fail.
pub struct FixtureBackend {
    desc: BackendDescriptor,
    outputs: HashMap<String, String>,
    fallback: Option<String>,
    pub calls: CallLog,
}

impl FixtureBackend {
    pub fn new(desc: BackendDescriptor, outputs: HashMap<String, String>, fallback: Option<String>) -> Self {
        FixtureBackend { desc, outputs, fallback, calls: CallLog::default() }
    }

    pub fn load(desc: BackendDescriptor, path: impl AsRef<std::path::Path>, fallback: Option<String>) -> Result<Self> {
        let outputs = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Ok(Self::new(desc, outputs, fallback))
    }
}

impl Backend for FixtureBackend {
    fn descriptor(&self) -> &BackendDescriptor {
        &self.desc
    }

    fn infer(&self, sentences: &[String]) -> Result<Vec<ItemOutput>> {
        self.calls.record(sentences);
        Ok(sentences
            .iter()
            .map(|s| {
                self.outputs
                    .get(s)
                    .or(self.fallback.as_ref())
                    .cloned()
                    .ok_or_else(|| format!("no scripted output for `{s}`"))
            })
            .collect())
    }
}

/// Computes outputs with a closure; handy for tests and in-process models.
pub struct FnBackend<F> {
    desc: BackendDescriptor,
    f: F,
    pub calls: CallLog,
}

impl<F> FnBackend<F>
where
    F: Fn(&str) -> ItemOutput + Send + Sync,
{
    pub fn new(desc: BackendDescriptor, f: F) -> Self {
        FnBackend { desc, f, calls: CallLog::default() }
    }
}

impl<F> Backend for FnBackend<F>
where
    F: Fn(&str) -> ItemOutput + Send + Sync,
{
    fn descriptor(&self) -> &BackendDescriptor {
        &self.desc
    }

    fn infer(&self, sentences: &[String]) -> Result<Vec<ItemOutput>> {
        self.calls.record(sentences);
        Ok(sentences.iter().map(|s| (self.f)(s)).collect())
    }
}
