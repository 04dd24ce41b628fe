//! Sentence corpus: data model, ingestion, segmentation, splitting,
//! descriptive statistics and the `%%%` target-span markup codec.

mod markup;
mod segment;
mod split;
mod stats;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use markup::{parse_span_markup, render_span_markup, MARKER};
pub use segment::{segment_text, CommandSegmenter, RuleSegmenter, Segmenter, DEFAULT_ABBREVIATIONS};
pub use split::{split_corpus, CorpusSplit, SplitName, SplitRecord};
pub use stats::{corpus_stats, format_pct, CorpusStats, SourceCount};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Facebook,
    Knesset,
    News,
}

impl Source {
    pub const ALL: [Source; 3] = [Source::Facebook, Source::Knesset, Source::News];

    pub fn as_str(self) -> &'static str {
        match self {
            Source::Facebook => "facebook",
            Source::Knesset => "knesset",
            Source::News => "news",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "facebook" | "fb" => Ok(Source::Facebook),
            "knesset" => Ok(Source::Knesset),
            "news" | "news media" => Ok(Source::News),
            other => Err(Error::invalid("source", format!("unknown source `{other}`"))),
        }
    }
}

/// One segmented sentence, the unit of annotation, prediction and analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub id: String,
    pub text: String,
    pub source: Source,
    pub date: NaiveDate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speaker_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_id: Option<String>,
}

impl SentenceRecord {
    /// Length in Unicode scalar values; span offsets are measured in the same unit.
    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }
}

/// Half-open character range `[start, end)` into a clean sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(usize, usize)", into = "(usize, usize)")]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    /// Extracts the covered characters from `text`.
    pub fn slice<'a>(&self, text: &'a str) -> &'a str {
        let mut indices = text.char_indices().map(|(i, _)| i).chain(std::iter::once(text.len()));
        let begin = indices.nth(self.start).unwrap_or(text.len());
        let end = if self.end > self.start {
            indices.nth(self.end - self.start - 1).unwrap_or(text.len())
        } else {
            begin
        };
        &text[begin..end]
    }
}

impl From<(usize, usize)> for Span {
    fn from((start, end): (usize, usize)) -> Self {
        Span { start, end }
    }
}

impl From<Span> for (usize, usize) {
    fn from(s: Span) -> Self {
        (s.start, s.end)
    }
}

/// Checks that spans are non-empty, sorted, pairwise disjoint and inside `text_len`.
pub fn validate_spans(spans: &[Span], text_len: Option<usize>) -> Result<()> {
    for (i, s) in spans.iter().enumerate() {
        if s.start >= s.end {
            return Err(Error::InvalidSpan(format!("empty or reversed span {:?}", (s.start, s.end))));
        }
        if let Some(len) = text_len {
            if s.end > len {
                return Err(Error::InvalidSpan(format!(
                    "span {:?} exceeds text length {len}",
                    (s.start, s.end)
                )));
            }
        }
        if i > 0 {
            let prev = spans[i - 1];
            if prev.start > s.start {
                return Err(Error::InvalidSpan("spans not sorted by start".into()));
            }
            if prev.overlaps(s) {
                return Err(Error::InvalidSpan(format!(
                    "spans {:?} and {:?} overlap",
                    (prev.start, prev.end),
                    (s.start, s.end)
                )));
            }
        }
    }
    Ok(())
}

/// The six binary attributes that accompany a positive label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Incivility,
    Outgroup,
    CommonGood,
    Group,
    Person,
    Institute,
}

impl Attribute {
    pub const ALL: [Attribute; 6] = [
        Attribute::Incivility,
        Attribute::Outgroup,
        Attribute::CommonGood,
        Attribute::Group,
        Attribute::Person,
        Attribute::Institute,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Attribute::Incivility => "incivility",
            Attribute::Outgroup => "outgroup",
            Attribute::CommonGood => "common_good",
            Attribute::Group => "group",
            Attribute::Person => "person",
            Attribute::Institute => "institute",
        }
    }
}

/// Complete characteristic labels of a positive sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Characteristics {
    pub intensity: u8,
    pub incivility: bool,
    pub outgroup: bool,
    pub common_good: bool,
    pub group: bool,
    pub person: bool,
    pub institute: bool,
}

impl Characteristics {
    pub fn get(&self, attr: Attribute) -> bool {
        match attr {
            Attribute::Incivility => self.incivility,
            Attribute::Outgroup => self.outgroup,
            Attribute::CommonGood => self.common_good,
            Attribute::Group => self.group,
            Attribute::Person => self.person,
            Attribute::Institute => self.institute,
        }
    }

    pub fn set(&mut self, attr: Attribute, value: bool) {
        match attr {
            Attribute::Incivility => self.incivility = value,
            Attribute::Outgroup => self.outgroup = value,
            Attribute::CommonGood => self.common_good = value,
            Attribute::Group => self.group = value,
            Attribute::Person => self.person = value,
            Attribute::Institute => self.institute = value,
        }
    }
}

/// One annotator's labels for one sentence.
///
/// Attribute fields and target spans exist only on positive annotations;
/// when serialized, absent fields are omitted rather than written as null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PddAnnotation {
    pub sentence_id: String,
    pub annotator_id: String,
    pub delegit: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensity: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub incivility: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outgroup: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub common_good: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub person: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub institute: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub target_spans: Vec<Span>,
    #[serde(default)]
    pub timestamp: DateTime<Utc>,
}

impl PddAnnotation {
    pub fn negative(sentence_id: impl Into<String>, annotator_id: impl Into<String>) -> Self {
        PddAnnotation {
            sentence_id: sentence_id.into(),
            annotator_id: annotator_id.into(),
            delegit: false,
            intensity: None,
            incivility: None,
            outgroup: None,
            common_good: None,
            group: None,
            person: None,
            institute: None,
            target_spans: Vec::new(),
            timestamp: DateTime::<Utc>::default(),
        }
    }

    /// Positive label without characteristics (outside the richly annotated subset).
    pub fn positive(sentence_id: impl Into<String>, annotator_id: impl Into<String>) -> Self {
        PddAnnotation {
            delegit: true,
            ..Self::negative(sentence_id, annotator_id)
        }
    }

    pub fn with_characteristics(mut self, c: &Characteristics) -> Self {
        self.intensity = Some(c.intensity);
        for attr in Attribute::ALL {
            *self.attribute_mut(attr) = Some(c.get(attr));
        }
        self
    }

    pub fn with_spans(mut self, spans: Vec<Span>) -> Self {
        self.target_spans = spans;
        self
    }

    pub fn attribute(&self, attr: Attribute) -> Option<bool> {
        match attr {
            Attribute::Incivility => self.incivility,
            Attribute::Outgroup => self.outgroup,
            Attribute::CommonGood => self.common_good,
            Attribute::Group => self.group,
            Attribute::Person => self.person,
            Attribute::Institute => self.institute,
        }
    }

    fn attribute_mut(&mut self, attr: Attribute) -> &mut Option<bool> {
        match attr {
            Attribute::Incivility => &mut self.incivility,
            Attribute::Outgroup => &mut self.outgroup,
            Attribute::CommonGood => &mut self.common_good,
            Attribute::Group => &mut self.group,
            Attribute::Person => &mut self.person,
            Attribute::Institute => &mut self.institute,
        }
    }

    /// True when any characteristic field was annotated.
    pub fn has_characteristics(&self) -> bool {
        self.intensity.is_some() || Attribute::ALL.iter().any(|a| self.attribute(*a).is_some())
    }

    /// Complete characteristics, or `MissingField` naming the first absent one.
    pub fn characteristics(&self) -> Result<Characteristics> {
        let mut c = Characteristics {
            intensity: self.intensity.ok_or_else(|| Error::MissingField("intensity".into()))?,
            ..Characteristics::default()
        };
        for attr in Attribute::ALL {
            let v = self
                .attribute(attr)
                .ok_or_else(|| Error::MissingField(attr.as_str().into()))?;
            c.set(attr, v);
        }
        Ok(c)
    }

    /// Enforces the conditional-field rule, the intensity scale and span validity.
    pub fn validate(&self, text_len: Option<usize>) -> Result<()> {
        if !self.delegit {
            if self.has_characteristics() {
                return Err(Error::Schema(format!(
                    "sentence `{}`: attribute fields present on a negative annotation",
                    self.sentence_id
                )));
            }
            if !self.target_spans.is_empty() {
                return Err(Error::Schema(format!(
                    "sentence `{}`: target spans present on a negative annotation",
                    self.sentence_id
                )));
            }
        }
        if let Some(i) = self.intensity {
            if i > 2 {
                return Err(Error::Schema(format!("intensity {i} outside 0..=2")));
            }
        }
        validate_spans(&self.target_spans, text_len).map_err(|e| Error::Schema(e.to_string()))
    }

    /// Label content without annotator identity or timestamp, for unanimity checks.
    pub fn same_labels(&self, other: &PddAnnotation) -> bool {
        self.delegit == other.delegit
            && self.intensity == other.intensity
            && Attribute::ALL.iter().all(|a| self.attribute(*a) == other.attribute(*a))
            && self.target_spans == other.target_spans
    }
}

/// Input row for ingestion; the source is supplied per batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub id: String,
    #[serde(default)]
    pub text: Option<String>,
    pub date: String,
    #[serde(default)]
    pub speaker_id: Option<String>,
    #[serde(default)]
    pub doc_id: Option<String>,
}

/// Parses `YYYY-MM-DD`, tolerating a trailing time component.
pub fn parse_date(s: &str) -> Result<NaiveDate> {
    let s = s.trim();
    let head = s.get(..10).unwrap_or(s);
    NaiveDate::parse_from_str(head, "%Y-%m-%d")
        .map_err(|e| Error::invalid("date", format!("`{s}`: {e}")))
}

/// Sentence container keyed by unique id, in insertion order.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    records: Vec<SentenceRecord>,
    index: HashMap<String, usize>,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(records: impl IntoIterator<Item = SentenceRecord>) -> Result<Self> {
        let mut c = Corpus::new();
        for r in records {
            c.insert(r)?;
        }
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_records(crate::jsonl::read_jsonl::<SentenceRecord>(path)?)
    }

    pub fn insert(&mut self, record: SentenceRecord) -> Result<()> {
        if record.text.trim().is_empty() {
            return Err(Error::MissingText(record.id));
        }
        if self.index.contains_key(&record.id) {
            return Err(Error::DuplicateId(record.id));
        }
        self.index.insert(record.id.clone(), self.records.len());
        self.records.push(record);
        Ok(())
    }

    /// Adds raw records tagged with `source`. The batch is validated as a
    /// whole before anything is inserted.
    pub fn ingest(&mut self, records: impl IntoIterator<Item = RawRecord>, source: Source) -> Result<usize> {
        let mut staged = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for raw in records {
            let text = match raw.text {
                Some(t) if !t.trim().is_empty() => t,
                _ => return Err(Error::MissingText(raw.id)),
            };
            if self.index.contains_key(&raw.id) || !seen.insert(raw.id.clone()) {
                return Err(Error::DuplicateId(raw.id));
            }
            staged.push(SentenceRecord {
                date: parse_date(&raw.date)?,
                id: raw.id,
                text,
                source,
                speaker_id: raw.speaker_id.filter(|s| !s.is_empty()),
                doc_id: raw.doc_id.filter(|s| !s.is_empty()),
            });
        }
        let n = staged.len();
        for r in staged {
            self.index.insert(r.id.clone(), self.records.len());
            self.records.push(r);
        }
        Ok(n)
    }

    pub fn get(&self, id: &str) -> Option<&SentenceRecord> {
        self.index.get(id).map(|&i| &self.records[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[SentenceRecord] {
        &self.records
    }

    pub fn iter(&self) -> impl Iterator<Item = &SentenceRecord> {
        self.records.iter()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.id.as_str())
    }

    pub fn source_histogram(&self) -> BTreeMap<Source, usize> {
        let mut h = BTreeMap::new();
        for r in &self.records {
            *h.entry(r.source).or_insert(0) += 1;
        }
        h
    }
}

/// Reads raw records from `.jsonl`/`.json` or `.csv` (by extension).
pub fn read_raw_records(path: impl AsRef<Path>) -> Result<Vec<RawRecord>> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => {
            let mut rdr = csv::Reader::from_path(path)?;
            rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
        }
        _ => crate::jsonl::read_jsonl(path),
    }
}
