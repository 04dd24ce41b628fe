use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bloc {
    Right,
    Center,
    Left,
    Unknown,
}

impl FromStr for Gender {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "male" | "m" => Ok(Gender::Male),
            "female" | "f" => Ok(Gender::Female),
            "" | "unknown" => Ok(Gender::Unknown),
            other => Err(Error::invalid("gender", format!("unknown value `{other}`"))),
        }
    }
}

impl FromStr for Bloc {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "right" => Ok(Bloc::Right),
            "center" | "centre" => Ok(Bloc::Center),
            "left" => Ok(Bloc::Left),
            "" | "unknown" => Ok(Bloc::Unknown),
            other => Err(Error::invalid("bloc", format!("unknown value `{other}`"))),
        }
    }
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
            Gender::Unknown => "unknown",
        }
    }
}

impl Bloc {
    pub fn as_str(self) -> &'static str {
        match self {
            Bloc::Right => "right",
            Bloc::Center => "center",
            Bloc::Left => "left",
            Bloc::Unknown => "unknown",
        }
    }
}

/// Inclusive date range; an open end extends indefinitely.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: Option<NaiveDate>,
}

impl DateRange {
    pub fn contains(&self, d: NaiveDate) -> bool {
        d >= self.start && self.end.is_none_or(|e| d <= e)
    }
}

/// Parses `2015-05-14..2019-12-31;2020-05-17..` style interval lists.
pub fn parse_intervals(s: &str) -> Result<Vec<DateRange>> {
    let mut out: Vec<DateRange> = Vec::new();
    for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (a, b) = part
            .split_once("..")
            .ok_or_else(|| Error::invalid("coalition_intervals", format!("`{part}` is not START..END")))?;
        let start = parse_day(a)?;
        let end = if b.trim().is_empty() { None } else { Some(parse_day(b)?) };
        if end.is_some_and(|e| e < start) {
            return Err(Error::invalid("coalition_intervals", format!("`{part}` ends before it starts")));
        }
        out.push(DateRange { start, end });
    }
    out.sort_by_key(|r| r.start);
    for w in out.windows(2) {
        if w[0].end.is_none_or(|e| e >= w[1].start) {
            return Err(Error::invalid("coalition_intervals", "intervals overlap"));
        }
    }
    Ok(out)
}

/// Inverse of [`parse_intervals`].
pub fn format_intervals(ranges: &[DateRange]) -> String {
    ranges
        .iter()
        .map(|r| format!("{}..{}", r.start, r.end.map(|e| e.to_string()).unwrap_or_default()))
        .collect::<Vec<_>>()
        .join(";")
}

fn parse_day(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
        .map_err(|e| Error::invalid("date", format!("`{}`: {e}", s.trim())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerMeta {
    pub speaker_id: String,
    pub name: String,
    pub gender: Gender,
    pub bloc: Bloc,
    pub party: String,
    pub coalition_intervals: Vec<DateRange>,
}

impl SpeakerMeta {
    pub fn in_coalition(&self, date: NaiveDate) -> bool {
        self.coalition_intervals.iter().any(|r| r.contains(date))
    }
}

#[derive(Debug, Deserialize)]
struct MetaRow {
    speaker_id: String,
    #[serde(default)]
    name: String,
    #[serde(default)]
    gender: String,
    #[serde(default)]
    bloc: String,
    #[serde(default)]
    party: String,
    #[serde(default)]
    coalition_intervals: String,
}

/// Speaker metadata keyed by id, from CSV with columns `speaker_id`, `name`,
/// `gender`, `bloc`, `party`, `coalition_intervals`.
pub fn read_speaker_meta(path: impl AsRef<Path>) -> Result<BTreeMap<String, SpeakerMeta>> {
    parse_speaker_meta(std::fs::File::open(path)?)
}

pub fn parse_speaker_meta(reader: impl std::io::Read) -> Result<BTreeMap<String, SpeakerMeta>> {
    let mut out = BTreeMap::new();
    for row in csv::Reader::from_reader(reader).deserialize::<MetaRow>() {
        let row = row?;
        let meta = SpeakerMeta {
            gender: row.gender.parse()?,
            bloc: row.bloc.parse()?,
            coalition_intervals: parse_intervals(&row.coalition_intervals)?,
            speaker_id: row.speaker_id.clone(),
            name: row.name,
            party: row.party,
        };
        if out.insert(row.speaker_id.clone(), meta).is_some() {
            return Err(Error::DuplicateId(row.speaker_id));
        }
    }
    Ok(out)
}

/// Writes the CSV layout read by [`parse_speaker_meta`].
pub fn write_speaker_meta<'a>(
    writer: impl std::io::Write,
    speakers: impl IntoIterator<Item = &'a SpeakerMeta>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["speaker_id", "name", "gender", "bloc", "party", "coalition_intervals"])?;
    for s in speakers {
        w.write_record([
            s.speaker_id.as_str(),
            &s.name,
            s.gender.as_str(),
            s.bloc.as_str(),
            &s.party,
            &format_intervals(&s.coalition_intervals),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Election,
    Government,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub name: String,
    pub date: NaiveDate,
    pub kind: EventKind,
}

pub fn read_events(path: impl AsRef<Path>) -> Result<Vec<Event>> {
    let mut events: Vec<Event> = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    events.sort_by_key(|e| e.date);
    Ok(events)
}
