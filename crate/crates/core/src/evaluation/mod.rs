//! Detection metrics: stage-1 accuracy/precision/recall/F1, per-attribute
//! F1 over gold positives, and span-level matching.

mod spans;

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

pub use spans::{match_count, span_metrics, trim_span, SpanItem};

use crate::corpus::{Attribute, Characteristics, Corpus, PddAnnotation};
use crate::error::{Error, Result};
use crate::pipeline::PredictionRecord;

/// Round half to even at `decimals` places, treating values within 1e-9 of
/// a decimal tie as ties.
pub fn round_half_even(x: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    let s = x * scale;
    let fl = s.floor();
    let r = if ((s - fl) - 0.5).abs() < 1e-9 {
        if fl % 2.0 == 0.0 {
            fl
        } else {
            fl + 1.0
        }
    } else {
        s.round()
    };
    r / scale
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Precision, recall and F1 from match counts. With no positives on either
/// side all three are 1 (nothing to find, nothing wrongly found).
pub fn prf(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    if tp + fp + fn_ == 0 {
        return (1.0, 1.0, 1.0);
    }
    let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let r = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    (p, r, f1_score(p, r))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl BinaryMetrics {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        let (precision, recall, f1) = prf(tp, fp, fn_);
        let n = tp + fp + fn_ + tn;
        let accuracy = if n == 0 { 0.0 } else { (tp + tn) as f64 / n as f64 };
        BinaryMetrics { accuracy, precision, recall, f1, tp, fp, fn_, tn }
    }

    pub fn from_labels(pred: &[bool], gold: &[bool]) -> Result<Self> {
        if pred.len() != gold.len() {
            return Err(Error::LengthMismatch { left: pred.len(), right: gold.len() });
        }
        let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
        for (p, g) in pred.iter().zip(gold) {
            match (p, g) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => tn += 1,
            }
        }
        Ok(Self::from_counts(tp, fp, fn_, tn))
    }

    pub fn rounded(&self) -> Self {
        BinaryMetrics {
            accuracy: round_half_even(self.accuracy, 3),
            precision: round_half_even(self.precision, 3),
            recall: round_half_even(self.recall, 3),
            f1: round_half_even(self.f1, 3),
            ..*self
        }
    }
}

/// Pairs each gold annotation with the prediction for the same sentence.
/// Both sides must cover exactly the same sentence ids.
pub fn align<'a>(
    predictions: &'a [PredictionRecord],
    gold: &'a [PddAnnotation],
) -> Result<Vec<(&'a PredictionRecord, &'a PddAnnotation)>> {
    let mut by_id: HashMap<&str, &PredictionRecord> = HashMap::with_capacity(predictions.len());
    for p in predictions {
        if by_id.insert(p.sentence_id.as_str(), p).is_some() {
            return Err(Error::IdMismatch(format!("duplicate prediction for `{}`", p.sentence_id)));
        }
    }
    let mut seen = BTreeSet::new();
    let mut pairs = Vec::with_capacity(gold.len());
    for g in gold {
        if !seen.insert(g.sentence_id.as_str()) {
            return Err(Error::IdMismatch(format!("duplicate gold annotation for `{}`", g.sentence_id)));
        }
        let p = by_id
            .get(g.sentence_id.as_str())
            .ok_or_else(|| Error::IdMismatch(format!("no prediction for `{}`", g.sentence_id)))?;
        pairs.push((*p, g));
    }
    if let Some(extra) = predictions.iter().find(|p| !seen.contains(p.sentence_id.as_str())) {
        return Err(Error::IdMismatch(format!("prediction for `{}` has no gold label", extra.sentence_id)));
    }
    Ok(pairs)
}

pub fn binary_metrics(predictions: &[PredictionRecord], gold: &[PddAnnotation]) -> Result<BinaryMetrics> {
    let pairs = align(predictions, gold)?;
    if pairs.is_empty() {
        return Err(Error::Degenerate("empty evaluation set".into()));
    }
    let (p, g): (Vec<bool>, Vec<bool>) = pairs.iter().map(|(p, g)| (p.delegit, g.delegit)).unzip();
    BinaryMetrics::from_labels(&p, &g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicMetrics {
    pub intensity: f64,
    pub incivility: f64,
    pub group: f64,
    pub person: f64,
    pub outgroup: f64,
    pub common_good: f64,
    pub institute: f64,
    pub avg_f1: f64,
    /// Gold-positive sentences evaluated.
    pub n: usize,
}

impl CharacteristicMetrics {
    /// Builds the record from the seven F1 values; `avg_f1` is their mean.
    pub fn from_scores(intensity: f64, attrs: [(Attribute, f64); 6], n: usize) -> Self {
        let mut m = CharacteristicMetrics {
            intensity,
            incivility: 0.0,
            group: 0.0,
            person: 0.0,
            outgroup: 0.0,
            common_good: 0.0,
            institute: 0.0,
            avg_f1: 0.0,
            n,
        };
        for (a, f) in attrs {
            *m.attribute_mut(a) = f;
        }
        m.avg_f1 = m.values().iter().sum::<f64>() / 7.0;
        m
    }

    fn attribute_mut(&mut self, a: Attribute) -> &mut f64 {
        match a {
            Attribute::Incivility => &mut self.incivility,
            Attribute::Outgroup => &mut self.outgroup,
            Attribute::CommonGood => &mut self.common_good,
            Attribute::Group => &mut self.group,
            Attribute::Person => &mut self.person,
            Attribute::Institute => &mut self.institute,
        }
    }

    /// The seven F1 values in published column order: intensity,
    /// incivility, group, person, outgroup, common good, institute.
    pub fn values(&self) -> [f64; 7] {
        [
            self.intensity,
            self.incivility,
            self.group,
            self.person,
            self.outgroup,
            self.common_good,
            self.institute,
        ]
    }

    pub fn rounded(&self) -> Self {
        let r = |x| round_half_even(x, 3);
        CharacteristicMetrics {
            intensity: r(self.intensity),
            incivility: r(self.incivility),
            group: r(self.group),
            person: r(self.person),
            outgroup: r(self.outgroup),
            common_good: r(self.common_good),
            institute: r(self.institute),
            avg_f1: r(self.avg_f1),
            n: self.n,
        }
    }
}

/// Macro F1 over the classes occurring in either label sequence.
pub fn macro_f1(pred: &[u8], gold: &[u8]) -> f64 {
    let classes: BTreeSet<u8> = pred.iter().chain(gold).copied().collect();
    if classes.is_empty() {
        return 1.0;
    }
    let total: f64 = classes
        .iter()
        .map(|&c| {
            let mut tp = 0;
            let mut fp = 0;
            let mut fn_ = 0;
            for (p, g) in pred.iter().zip(gold) {
                match (*p == c, *g == c) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    _ => {}
                }
            }
            prf(tp, fp, fn_).2
        })
        .sum();
    total / classes.len() as f64
}

/// Characteristics the prediction is scored with: none, or an unparsed
/// stage-2 output, count as all zero.
fn scored_characteristics(p: &PredictionRecord) -> Characteristics {
    match p.characteristics {
        Some(c) if p.stage2_parse_ok => c,
        _ => Characteristics::default(),
    }
}

/// Gold positives that carry complete characteristics, in gold order.
pub fn stage2_population<'a>(
    pairs: &[(&'a PredictionRecord, &'a PddAnnotation)],
) -> Vec<(&'a PredictionRecord, &'a PddAnnotation, Characteristics)> {
    pairs
        .iter()
        .filter(|(_, g)| g.delegit)
        .filter_map(|(p, g)| g.characteristics().ok().map(|c| (*p, *g, c)))
        .collect()
}

pub fn characteristic_metrics(predictions: &[PredictionRecord], gold: &[PddAnnotation]) -> Result<CharacteristicMetrics> {
    let pairs = align(predictions, gold)?;
    let pop = stage2_population(&pairs);
    if pop.is_empty() {
        return Err(Error::Degenerate("no gold positives with characteristics".into()));
    }
    let pred: Vec<Characteristics> = pop.iter().map(|(p, _, _)| scored_characteristics(p)).collect();
    let gold: Vec<Characteristics> = pop.iter().map(|(_, _, c)| *c).collect();
    let intensity = macro_f1(
        &pred.iter().map(|c| c.intensity).collect::<Vec<_>>(),
        &gold.iter().map(|c| c.intensity).collect::<Vec<_>>(),
    );
    let attrs = Attribute::ALL.map(|a| {
        let p: Vec<bool> = pred.iter().map(|c| c.get(a)).collect();
        let g: Vec<bool> = gold.iter().map(|c| c.get(a)).collect();
        (a, BinaryMetrics::from_labels(&p, &g).expect("equal lengths").f1)
    });
    Ok(CharacteristicMetrics::from_scores(intensity, attrs, pop.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanMode {
    Exact,
    /// Pairs with character Jaccard ≥ 0.5, matched one to one.
    Overlap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpanMetrics {
    pub mode: SpanMode,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Matched spans (not sentences).
    pub tp_count: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl SpanMetrics {
    pub fn rounded(&self) -> Self {
        SpanMetrics {
            precision: round_half_even(self.precision, 3),
            recall: round_half_even(self.recall, 3),
            f1: round_half_even(self.f1, 3),
            ..*self
        }
    }
}

/// Span items for the stage-2 population: predictions that are negative or
/// failed to parse contribute no spans.
pub fn span_items(predictions: &[PredictionRecord], gold: &[PddAnnotation], corpus: &Corpus) -> Result<Vec<SpanItem>> {
    let pairs = align(predictions, gold)?;
    stage2_population(&pairs)
        .into_iter()
        .map(|(p, g, _)| {
            let text = corpus
                .get(&g.sentence_id)
                .ok_or_else(|| Error::UnknownSentence(g.sentence_id.clone()))?
                .text
                .clone();
            let predicted = match (&p.target_spans, p.stage2_parse_ok) {
                (Some(s), true) => s.clone(),
                _ => Vec::new(),
            };
            Ok(SpanItem { text, gold: g.target_spans.clone(), predicted })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model_id: String,
    pub n_sentences: usize,
    pub binary: BinaryMetrics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub characteristics: Option<CharacteristicMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spans: Option<SpanMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spans_overlap: Option<SpanMetrics>,
}

/// Full report; stage-2 sections are omitted when the gold set has no
/// richly annotated positives. Span metrics need the corpus texts.
pub fn evaluate(predictions: &[PredictionRecord], gold: &[PddAnnotation], corpus: Option<&Corpus>) -> Result<EvaluationReport> {
    let binary = binary_metrics(predictions, gold)?;
    let characteristics = match characteristic_metrics(predictions, gold) {
        Ok(m) => Some(m),
        Err(Error::Degenerate(_)) => None,
        Err(e) => return Err(e),
    };
    let (spans, spans_overlap) = match (corpus, characteristics.is_some()) {
        (Some(c), true) => {
            let items = span_items(predictions, gold, c)?;
            (Some(span_metrics(&items, SpanMode::Exact)), Some(span_metrics(&items, SpanMode::Overlap)))
        }
        _ => (None, None),
    };
    let mut ids: Vec<&str> = predictions.iter().map(|p| p.model_id.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    Ok(EvaluationReport {
        model_id: ids.join(","),
        n_sentences: gold.len(),
        binary,
        characteristics,
        spans,
        spans_overlap,
    })
}

impl EvaluationReport {
    pub fn rounded(&self) -> Self {
        EvaluationReport {
            binary: self.binary.rounded(),
            characteristics: self.characteristics.map(|c| c.rounded()),
            spans: self.spans.map(|s| s.rounded()),
            spans_overlap: self.spans_overlap.map(|s| s.rounded()),
            ..self.clone()
        }
    }

    pub const CSV_HEADER: [&'static str; 17] = [
        "model",
        "accuracy",
        "precision",
        "recall",
        "f1",
        "intensity_f1",
        "incivility_f1",
        "group_f1",
        "person_f1",
        "outgroup_f1",
        "common_good_f1",
        "institute_f1",
        "avg_f1",
        "span_precision",
        "span_recall",
        "span_f1",
        "span_tp",
    ];

    /// One flat row in the order of [`Self::CSV_HEADER`], values rounded to
    /// three decimals; missing sections are empty cells.
    pub fn csv_row(&self) -> Vec<String> {
        let r = self.rounded();
        let f = |x: f64| format!("{x:.3}");
        let mut row = vec![r.model_id.clone(), f(r.binary.accuracy), f(r.binary.precision), f(r.binary.recall), f(r.binary.f1)];
        match r.characteristics {
            Some(c) => row.extend(c.values().iter().map(|v| f(*v)).chain([f(c.avg_f1)])),
            None => row.extend(std::iter::repeat_n(String::new(), 8)),
        }
        match r.spans {
            Some(s) => row.extend([f(s.precision), f(s.recall), f(s.f1), s.tp_count.to_string()]),
            None => row.extend(std::iter::repeat_n(String::new(), 4)),
        }
        row
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(Self::CSV_HEADER)?;
        w.write_record(self.csv_row())?;
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

#[cfg(test)]
mod tests;
