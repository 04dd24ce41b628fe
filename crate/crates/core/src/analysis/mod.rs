//! Speaker-level statistics over pipeline predictions: shares per speaker
//! and period, temporal series, group contrasts, characteristic profiles,
//! before/after event tables and distinctive target terms.
//!
//! Every mean here is taken over speakers, never over sentences, so a
//! prolific speaker counts once.

mod logodds;
mod meta;
pub mod plot;
mod stats;
mod temporal;

use std::collections::{BTreeMap, HashMap};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::corpus::{Attribute, Corpus, SentenceRecord, Source};
use crate::error::{Error, Result};
use crate::pipeline::PredictionRecord;

pub use logodds::{log_odds_pair, normalize_term, weighted_log_odds, LogOddsEntry, TermCounts};
pub use meta::{
    format_intervals, parse_intervals, parse_speaker_meta, read_events, read_speaker_meta, write_speaker_meta, Bloc,
    DateRange, Event, EventKind, Gender, SpeakerMeta,
};
pub use stats::{density_estimate, mean, quantile_sorted, variance, welch_t_test, Density, WelchResult, DENSITY_GRID};
pub use temporal::{period_range, Binning, Period};

/// Restricts which sentences enter an analysis. Date bounds are inclusive.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceFilter {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<Source>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<NaiveDate>,
}

impl SentenceFilter {
    pub fn matches(&self, record: &SentenceRecord) -> bool {
        self.source.is_none_or(|s| s == record.source)
            && self.from.is_none_or(|d| record.date >= d)
            && self.to.is_none_or(|d| record.date <= d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerShare {
    pub speaker_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<Period>,
    pub n_sentences: usize,
    pub n_positive: usize,
    pub pdd_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregation {
    /// Sorted by speaker, then period.
    pub shares: Vec<SpeakerShare>,
    /// Matching sentences dropped for lack of a speaker.
    pub speakerless: usize,
}

fn joined<'a>(
    preds: &'a [PredictionRecord],
    corpus: &'a Corpus,
    filter: &SentenceFilter,
) -> Result<Vec<(&'a PredictionRecord, &'a SentenceRecord)>> {
    let mut out = Vec::with_capacity(preds.len());
    for p in preds {
        let record = corpus.get(&p.sentence_id).ok_or_else(|| Error::UnknownSentence(p.sentence_id.clone()))?;
        if filter.matches(record) {
            out.push((p, record));
        }
    }
    Ok(out)
}

/// Per-(speaker, period) PDD shares. Without a binning there is one share
/// per speaker.
pub fn speaker_aggregate(
    preds: &[PredictionRecord],
    corpus: &Corpus,
    binning: Option<Binning>,
    filter: &SentenceFilter,
) -> Result<Aggregation> {
    let mut cells: BTreeMap<(String, Option<Period>), (usize, usize)> = BTreeMap::new();
    let mut speakerless = 0;
    for (p, record) in joined(preds, corpus, filter)? {
        let Some(speaker) = &record.speaker_id else {
            speakerless += 1;
            continue;
        };
        let cell = cells.entry((speaker.clone(), binning.map(|b| b.bin(record.date)))).or_default();
        cell.0 += 1;
        cell.1 += usize::from(p.delegit);
    }
    if cells.is_empty() {
        return Err(Error::Degenerate("no predictions joined to a speaker".into()));
    }
    let shares = cells
        .into_iter()
        .map(|((speaker_id, period), (n, pos))| SpeakerShare {
            speaker_id,
            period,
            n_sentences: n,
            n_positive: pos,
            pdd_share: pos as f64 / n as f64,
        })
        .collect();
    Ok(Aggregation { shares, speakerless })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub period: Period,
    pub value: Option<f64>,
    pub n_speakers: usize,
}

/// Mean share over speakers per bin, with empty bins between the first and
/// last populated one emitted as `None`. Unbinned shares are ignored.
pub fn temporal_series(shares: &[SpeakerShare]) -> Vec<SeriesPoint> {
    let mut bins: BTreeMap<Period, Vec<f64>> = BTreeMap::new();
    for s in shares {
        if let Some(p) = s.period {
            bins.entry(p).or_default().push(s.pdd_share);
        }
    }
    let (Some(first), Some(last)) = (bins.keys().next().copied(), bins.keys().next_back().copied()) else {
        return Vec::new();
    };
    let mut periods = period_range(first, last);
    periods.extend(bins.keys().copied());
    periods.sort();
    periods.dedup();
    periods
        .into_iter()
        .map(|period| {
            let values = bins.get(&period).map(Vec::as_slice).unwrap_or(&[]);
            SeriesPoint { period, value: mean(values), n_speakers: values.len() }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: String,
    pub n_speakers: usize,
    pub mean: f64,
    pub sd: f64,
    pub shares: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTest {
    pub group_a: String,
    pub group_b: String,
    pub result: Option<WelchResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub groups: Vec<GroupSummary>,
    pub tests: Vec<PairwiseTest>,
    pub warnings: Vec<String>,
}

/// Groups speaker shares by `key` (speakers mapped to `None` are left out),
/// drops groups with fewer than two speakers and runs a Welch test on every
/// remaining pair. Each share is one sample unit, so pass unbinned shares.
pub fn compare_groups(shares: &[SpeakerShare], key: impl Fn(&str) -> Option<String>) -> Result<GroupComparison> {
    let mut by_group: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut warnings = Vec::new();
    let mut unkeyed = 0;
    for s in shares {
        match key(&s.speaker_id) {
            Some(g) => by_group.entry(g).or_default().push(s.pdd_share),
            None => unkeyed += 1,
        }
    }
    if unkeyed > 0 {
        warnings.push(format!("{unkeyed} speaker share(s) without a group were excluded"));
    }
    let mut groups = Vec::new();
    for (group, values) in by_group {
        if values.len() < 2 {
            warnings.push(format!("group `{group}` has {} speaker(s) and was excluded", values.len()));
            continue;
        }
        groups.push(GroupSummary {
            n_speakers: values.len(),
            mean: mean(&values).expect("non-empty"),
            sd: variance(&values).expect("n ≥ 2").sqrt(),
            group,
            shares: values,
        });
    }
    if groups.len() < 2 {
        return Err(Error::Degenerate(format!("{} group(s) with at least two speakers; need two", groups.len())));
    }
    let mut tests = Vec::new();
    for (i, a) in groups.iter().enumerate() {
        for b in &groups[i + 1..] {
            let result = match welch_t_test(&a.shares, &b.shares) {
                Ok(r) => Some(r),
                Err(e) => {
                    warnings.push(format!("{} vs {}: {e}", a.group, b.group));
                    None
                }
            };
            tests.push(PairwiseTest { group_a: a.group.clone(), group_b: b.group.clone(), result });
        }
    }
    Ok(GroupComparison { groups, tests, warnings })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeRate {
    pub attribute: Attribute,
    /// Percentage in [0, 100].
    pub percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicsProfile {
    pub n_speakers: usize,
    pub n_sentences: usize,
    pub n_positive: usize,
    /// Mean PDD share over speakers.
    pub pdd_share: Option<f64>,
    /// Speakers with at least one positive sentence.
    pub n_positive_speakers: usize,
    pub mean_intensity: Option<f64>,
    pub attributes: Vec<AttributeRate>,
    pub speakerless: usize,
}

/// Share of PDD and the make-up of positive sentences. Each speaker's
/// positives yield a flag percentage and an intensity mean, which are then
/// averaged over speakers with positives.
pub fn characteristics_profile(
    preds: &[PredictionRecord],
    corpus: &Corpus,
    filter: &SentenceFilter,
) -> Result<CharacteristicsProfile> {
    #[derive(Default)]
    struct Acc {
        n: usize,
        pos: usize,
        intensity: f64,
        flags: [usize; 6],
    }
    let mut speakers: BTreeMap<&str, Acc> = BTreeMap::new();
    let mut speakerless = 0;
    for (p, record) in joined(preds, corpus, filter)? {
        let Some(speaker) = record.speaker_id.as_deref() else {
            speakerless += 1;
            continue;
        };
        let acc = speakers.entry(speaker).or_default();
        acc.n += 1;
        if p.delegit {
            acc.pos += 1;
            let c = p.characteristics.unwrap_or_default();
            acc.intensity += f64::from(c.intensity);
            for (k, attr) in Attribute::ALL.iter().enumerate() {
                acc.flags[k] += usize::from(c.get(*attr));
            }
        }
    }
    let shares: Vec<f64> = speakers.values().map(|a| a.pos as f64 / a.n as f64).collect();
    let positive: Vec<&Acc> = speakers.values().filter(|a| a.pos > 0).collect();
    let intensities: Vec<f64> = positive.iter().map(|a| a.intensity / a.pos as f64).collect();
    let attributes = Attribute::ALL
        .iter()
        .enumerate()
        .map(|(k, attr)| {
            let rates: Vec<f64> = positive.iter().map(|a| 100.0 * a.flags[k] as f64 / a.pos as f64).collect();
            AttributeRate { attribute: *attr, percent: mean(&rates) }
        })
        .collect();
    Ok(CharacteristicsProfile {
        n_speakers: speakers.len(),
        n_sentences: speakers.values().map(|a| a.n).sum(),
        n_positive: speakers.values().map(|a| a.pos).sum(),
        pdd_share: mean(&shares),
        n_positive_speakers: positive.len(),
        mean_intensity: mean(&intensities),
        attributes,
        speakerless,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeforeAfterRow {
    pub cohort: String,
    pub before: Option<f64>,
    pub after: Option<f64>,
    pub n_before: usize,
    pub n_after: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeforeAfter {
    pub event_date: NaiveDate,
    pub rows: Vec<BeforeAfterRow>,
    pub warnings: Vec<String>,
}

/// Speaker-mean share per cohort on each side of `event_date` (the date
/// itself falls after). Shares should come from [`Binning::Event`] with the
/// same date.
pub fn before_after(
    shares: &[SpeakerShare],
    event_date: NaiveDate,
    cohort: impl Fn(&str) -> Option<String>,
) -> Result<BeforeAfter> {
    let mut cells: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for s in shares {
        let side = match s.period {
            Some(Period::Before) => false,
            Some(Period::After) => true,
            other => {
                return Err(Error::invalid(
                    "shares",
                    format!("before/after needs event-binned shares, got {other:?}"),
                ))
            }
        };
        if let Some(c) = cohort(&s.speaker_id) {
            let cell = cells.entry(c).or_default();
            if side { &mut cell.1 } else { &mut cell.0 }.push(s.pdd_share);
        }
    }
    let mut warnings = Vec::new();
    let rows = cells
        .into_iter()
        .map(|(cohort, (b, a))| {
            for (side, v) in [("before", &b), ("after", &a)] {
                if v.is_empty() {
                    warnings.push(format!("cohort `{cohort}` has no speakers {side} the event"));
                }
            }
            BeforeAfterRow { before: mean(&b), after: mean(&a), n_before: b.len(), n_after: a.len(), cohort }
        })
        .collect();
    Ok(BeforeAfter { event_date, rows, warnings })
}

/// `coalition` / `opposition` at `date`, or `None` for speakers without
/// metadata.
pub fn coalition_cohort<'a>(
    meta: &'a BTreeMap<String, SpeakerMeta>,
    date: NaiveDate,
) -> impl Fn(&str) -> Option<String> + 'a {
    move |speaker| {
        meta.get(speaker)
            .map(|m| if m.in_coalition(date) { "coalition" } else { "opposition" }.to_string())
    }
}

/// Gender of a speaker, `None` when unknown or missing.
pub fn gender_key(meta: &BTreeMap<String, SpeakerMeta>) -> impl Fn(&str) -> Option<String> + '_ {
    move |speaker| match meta.get(speaker)?.gender {
        Gender::Unknown => None,
        g => Some(g.as_str().to_string()),
    }
}

/// Bloc of a speaker, `None` when unknown or missing.
pub fn bloc_key(meta: &BTreeMap<String, SpeakerMeta>) -> impl Fn(&str) -> Option<String> + '_ {
    move |speaker| match meta.get(speaker)?.bloc {
        Bloc::Unknown => None,
        b => Some(b.as_str().to_string()),
    }
}

/// Normalized target-span strings of positive predictions, counted per
/// speaker group. Groups that receive no terms are absent.
pub fn span_term_counts(
    preds: &[PredictionRecord],
    corpus: &Corpus,
    filter: &SentenceFilter,
    group: impl Fn(&str) -> Option<String>,
) -> Result<BTreeMap<String, TermCounts>> {
    let mut cache: HashMap<&str, Option<String>> = HashMap::new();
    let mut out: BTreeMap<String, TermCounts> = BTreeMap::new();
    for (p, record) in joined(preds, corpus, filter)? {
        let (true, Some(spans), Some(speaker)) = (p.delegit, &p.target_spans, record.speaker_id.as_deref()) else {
            continue;
        };
        let Some(g) = cache.entry(speaker).or_insert_with(|| group(speaker)).clone() else {
            continue;
        };
        let counts = out.entry(g).or_default();
        for span in spans {
            if span.end > record.char_len() || span.is_empty() {
                continue;
            }
            let term = normalize_term(span.slice(&record.text));
            if !term.is_empty() {
                *counts.entry(term).or_default() += 1.0;
            }
        }
    }
    out.retain(|_, c| !c.is_empty());
    Ok(out)
}
