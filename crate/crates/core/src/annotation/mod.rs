//! Multi-annotator workflow: task assignment, versioned submissions,
//! adjudication into gold records, and agreement statistics.
//!
//! The service is an in-memory store behind a lock, optionally mirrored to
//! an append-only JSON-lines event log that is replayed on startup.

mod agreement;

use std::collections::{BTreeMap, HashMap};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use agreement::{
    agreement_report, cohen_kappa, pairwise_correlation, AgreementReport, AttributeAgreement, PairAgreement,
};

use crate::corpus::{Corpus, PddAnnotation};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskStatus {
    Pending,
    Submitted,
    Adjudicated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationTask {
    pub sentence_id: String,
    pub assigned_to: String,
    pub status: TaskStatus,
    /// Text of the sentence, for convenience of clients.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    /// Whether the sentence belongs to the shared reliability sample.
    #[serde(default)]
    pub shared: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Acknowledgment {
    pub sentence_id: String,
    pub annotator_id: String,
    pub version: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Unanimous,
    Majority,
    Adjudicated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub sentence_id: String,
    pub annotation: PddAnnotation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjudicator_id: Option<String>,
    pub provenance: Provenance,
    pub decided_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub version: u32,
    pub annotation: PddAnnotation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueItem {
    pub sentence_id: String,
    pub submissions: Vec<PddAnnotation>,
}

/// Entries of the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ServiceEvent {
    Submitted { annotation: PddAnnotation },
    Gold { record: GoldRecord },
}

/// Which sentences go to whom.
#[derive(Debug, Clone, Default)]
pub struct AssignmentPlan {
    pub annotators: Vec<String>,
    /// Labelled by every annotator before any unshared work.
    pub shared: Vec<String>,
    /// Per-annotator unshared sentences in order.
    pub unshared: HashMap<String, Vec<String>>,
}

impl AssignmentPlan {
    /// Shares `shared` with everyone and deals the remaining corpus
    /// sentences round-robin in corpus order.
    pub fn round_robin(corpus: &Corpus, annotators: &[String], shared: &[String]) -> Self {
        let shared_set: std::collections::HashSet<&str> = shared.iter().map(String::as_str).collect();
        let mut unshared: HashMap<String, Vec<String>> =
            annotators.iter().map(|a| (a.clone(), Vec::new())).collect();
        if !annotators.is_empty() {
            for (i, id) in corpus.ids().filter(|id| !shared_set.contains(id)).enumerate() {
                unshared
                    .get_mut(&annotators[i % annotators.len()])
                    .expect("annotator present")
                    .push(id.to_string());
            }
        }
        AssignmentPlan { annotators: annotators.to_vec(), shared: shared.to_vec(), unshared }
    }

    /// The first `size` corpus sentences (after a stable shuffle by `seed`) form the shared sample.
    pub fn with_shared_sample(corpus: &Corpus, annotators: &[String], size: usize, seed: u64) -> Self {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut ids: Vec<String> = corpus.ids().map(String::from).collect();
        ids.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        ids.truncate(size);
        let order: HashMap<&str, usize> = corpus.ids().enumerate().map(|(i, id)| (id, i)).collect();
        ids.sort_by_key(|id| order[id.as_str()]);
        Self::round_robin(corpus, annotators, &ids)
    }
}

#[derive(Debug, Default)]
struct State {
    texts: HashMap<String, String>,
    annotators: Vec<String>,
    shared: Vec<String>,
    queues: HashMap<String, Vec<String>>,
    submissions: BTreeMap<String, BTreeMap<String, Vec<Submission>>>,
    gold: BTreeMap<String, Vec<GoldRecord>>,
}

impl State {
    fn status(&self, annotator: &str, sentence: &str) -> TaskStatus {
        if self.gold.contains_key(sentence) {
            TaskStatus::Adjudicated
        } else if self
            .submissions
            .get(sentence)
            .is_some_and(|m| m.contains_key(annotator))
        {
            TaskStatus::Submitted
        } else {
            TaskStatus::Pending
        }
    }

    fn latest(&self, sentence: &str) -> Vec<&PddAnnotation> {
        self.submissions
            .get(sentence)
            .map(|m| m.values().filter_map(|v| v.last()).map(|s| &s.annotation).collect())
            .unwrap_or_default()
    }

    fn apply_submission(&mut self, mut annotation: PddAnnotation) -> Result<Acknowledgment> {
        if !self.annotators.contains(&annotation.annotator_id) {
            return Err(Error::UnknownAnnotator(annotation.annotator_id));
        }
        let text = self
            .texts
            .get(&annotation.sentence_id)
            .ok_or_else(|| Error::UnknownSentence(annotation.sentence_id.clone()))?;
        annotation.validate(Some(text.chars().count()))?;
        if annotation.timestamp == DateTime::<Utc>::default() {
            annotation.timestamp = Utc::now();
        }
        let history = self
            .submissions
            .entry(annotation.sentence_id.clone())
            .or_default()
            .entry(annotation.annotator_id.clone())
            .or_default();
        let version = history.len() as u32 + 1;
        let ack = Acknowledgment {
            sentence_id: annotation.sentence_id.clone(),
            annotator_id: annotation.annotator_id.clone(),
            version,
        };
        history.push(Submission { version, annotation });
        Ok(ack)
    }

    fn apply_gold(&mut self, record: GoldRecord) {
        self.gold.entry(record.sentence_id.clone()).or_default().push(record);
    }

    /// Gold candidate from the current submissions, if they permit one.
    fn consensus(&self, sentence: &str, allow_majority: bool) -> Option<(PddAnnotation, Provenance)> {
        let latest = self.latest(sentence);
        let first = *latest.first()?;
        if latest.iter().all(|a| a.same_labels(first)) {
            return Some((first.clone(), Provenance::Unanimous));
        }
        let n = latest.len();
        if allow_majority && n >= 3 && n % 2 == 1 {
            for cand in &latest {
                let votes = latest.iter().filter(|a| a.same_labels(cand)).count();
                if votes * 2 > n {
                    return Some(((*cand).clone(), Provenance::Majority));
                }
            }
        }
        None
    }
}

pub struct AnnotationService {
    state: RwLock<State>,
    log_path: Option<PathBuf>,
}

impl AnnotationService {
    pub fn new(corpus: &Corpus, plan: AssignmentPlan) -> Self {
        let mut queues = HashMap::new();
        for a in &plan.annotators {
            let mut q = plan.shared.clone();
            q.extend(plan.unshared.get(a).cloned().unwrap_or_default());
            queues.insert(a.clone(), q);
        }
        AnnotationService {
            state: RwLock::new(State {
                texts: corpus.iter().map(|r| (r.id.clone(), r.text.clone())).collect(),
                annotators: plan.annotators,
                shared: plan.shared,
                queues,
                ..State::default()
            }),
            log_path: None,
        }
    }

    /// Replays an existing event log (if present) and appends every later
    /// mutation to it.
    pub fn with_event_log(self, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        if path.exists() {
            let events: Vec<ServiceEvent> = crate::jsonl::read_jsonl(&path)?;
            let mut st = self.state.write().expect("lock poisoned");
            for e in events {
                match e {
                    ServiceEvent::Submitted { annotation } => {
                        st.apply_submission(annotation)?;
                    }
                    ServiceEvent::Gold { record } => st.apply_gold(record),
                }
            }
        }
        Ok(AnnotationService { log_path: Some(path), ..self })
    }

    fn log(&self, event: &ServiceEvent) -> Result<()> {
        if let Some(path) = &self.log_path {
            let mut f = OpenOptions::new().create(true).append(true).open(path)?;
            writeln!(f, "{}", serde_json::to_string(event)?)?;
        }
        Ok(())
    }

    pub fn annotators(&self) -> Vec<String> {
        self.state.read().expect("lock poisoned").annotators.clone()
    }

    pub fn shared_sample(&self) -> Vec<String> {
        self.state.read().expect("lock poisoned").shared.clone()
    }

    /// The first task in the annotator's queue that is still pending. Calling
    /// again before submitting returns the same task.
    pub fn next_task(&self, annotator_id: &str) -> Result<Option<AnnotationTask>> {
        let st = self.state.read().expect("lock poisoned");
        let queue = st
            .queues
            .get(annotator_id)
            .ok_or_else(|| Error::UnknownAnnotator(annotator_id.to_string()))?;
        Ok(queue
            .iter()
            .find(|s| st.status(annotator_id, s) == TaskStatus::Pending)
            .map(|s| AnnotationTask {
                sentence_id: s.clone(),
                assigned_to: annotator_id.to_string(),
                status: TaskStatus::Pending,
                text: st.texts.get(s).cloned(),
                shared: st.shared.contains(s),
            }))
    }

    pub fn task_status(&self, annotator_id: &str, sentence_id: &str) -> TaskStatus {
        self.state.read().expect("lock poisoned").status(annotator_id, sentence_id)
    }

    /// Stores a validated annotation. Resubmission bumps the version and keeps
    /// the earlier values in history.
    pub fn submit_annotation(&self, annotation: PddAnnotation) -> Result<Acknowledgment> {
        let mut st = self.state.write().expect("lock poisoned");
        let ack = st.apply_submission(annotation)?;
        let stored = st.submissions[&ack.sentence_id][&ack.annotator_id]
            .last()
            .expect("just pushed")
            .annotation
            .clone();
        self.log(&ServiceEvent::Submitted { annotation: stored })?;
        Ok(ack)
    }

    pub fn history(&self, annotator_id: &str, sentence_id: &str) -> Vec<Submission> {
        let st = self.state.read().expect("lock poisoned");
        st.submissions
            .get(sentence_id)
            .and_then(|m| m.get(annotator_id))
            .cloned()
            .unwrap_or_default()
    }

    /// Latest submission of every annotator, in sentence order.
    pub fn latest_annotations(&self) -> Vec<PddAnnotation> {
        let st = self.state.read().expect("lock poisoned");
        st.submissions
            .keys()
            .flat_map(|s| st.latest(s).into_iter().cloned())
            .collect()
    }

    /// Agreement over the shared reliability sample.
    pub fn agreement(&self) -> Result<AgreementReport> {
        let st = self.state.read().expect("lock poisoned");
        let anns: Vec<PddAnnotation> = st
            .shared
            .iter()
            .flat_map(|s| st.latest(s).into_iter().cloned())
            .collect();
        agreement_report(&anns)
    }

    /// Submitted sentences without gold whose submissions are not unanimous.
    pub fn adjudication_queue(&self) -> Vec<QueueItem> {
        let st = self.state.read().expect("lock poisoned");
        st.submissions
            .keys()
            .filter(|s| !st.gold.contains_key(*s))
            .filter(|s| st.consensus(s, false).is_none())
            .map(|s| QueueItem {
                sentence_id: s.clone(),
                submissions: st.latest(s).into_iter().cloned().collect(),
            })
            .collect()
    }

    /// Promotes sentences without gold whose latest submissions agree.
    /// Unanimity needs at least `min_submissions`; with `allow_majority`, an
    /// odd number (≥3) of submissions with a strict majority is promoted as
    /// well. Even splits always wait for adjudication.
    pub fn auto_promote(&self, min_submissions: usize, allow_majority: bool) -> Result<Vec<GoldRecord>> {
        let mut st = self.state.write().expect("lock poisoned");
        let candidates: Vec<String> = st
            .submissions
            .keys()
            .filter(|s| !st.gold.contains_key(*s))
            .cloned()
            .collect();
        let mut promoted = Vec::new();
        for s in candidates {
            if st.latest(&s).len() < min_submissions.max(1) {
                continue;
            }
            if let Some((annotation, provenance)) = st.consensus(&s, allow_majority) {
                let record = GoldRecord {
                    sentence_id: s.clone(),
                    annotation,
                    adjudicator_id: None,
                    provenance,
                    decided_at: Utc::now(),
                };
                st.apply_gold(record.clone());
                self.log(&ServiceEvent::Gold { record: record.clone() })?;
                promoted.push(record);
            }
        }
        Ok(promoted)
    }

    /// Records the adjudicator's decision as gold, replacing any earlier gold
    /// (which stays in history).
    pub fn adjudicate(&self, sentence_id: &str, mut decision: PddAnnotation, adjudicator_id: &str) -> Result<GoldRecord> {
        let mut st = self.state.write().expect("lock poisoned");
        let text = st
            .texts
            .get(sentence_id)
            .ok_or_else(|| Error::UnknownSentence(sentence_id.to_string()))?;
        if st.latest(sentence_id).is_empty() {
            return Err(Error::NotSubmitted(sentence_id.to_string()));
        }
        decision.sentence_id = sentence_id.to_string();
        decision.validate(Some(text.chars().count()))?;
        let record = GoldRecord {
            sentence_id: sentence_id.to_string(),
            annotation: decision,
            adjudicator_id: Some(adjudicator_id.to_string()),
            provenance: Provenance::Adjudicated,
            decided_at: Utc::now(),
        };
        st.apply_gold(record.clone());
        self.log(&ServiceEvent::Gold { record: record.clone() })?;
        Ok(record)
    }

    /// Current gold record per sentence.
    pub fn gold(&self) -> Vec<GoldRecord> {
        let st = self.state.read().expect("lock poisoned");
        st.gold.values().filter_map(|v| v.last().cloned()).collect()
    }

    pub fn gold_history(&self, sentence_id: &str) -> Vec<GoldRecord> {
        let st = self.state.read().expect("lock poisoned");
        st.gold.get(sentence_id).cloned().unwrap_or_default()
    }
}
