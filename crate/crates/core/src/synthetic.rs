//! Seeded synthetic corpora with gold labels and speaker metadata, for
//! smoke runs, benchmarks and tests. Positive sentences carry a cue phrase
//! that never occurs in negatives, so the binary task is linearly separable.

use chrono::{Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{Bloc, DateRange, Event, EventKind, Gender, SpeakerMeta};
use crate::corpus::{Characteristics, Corpus, PddAnnotation, RawRecord, SentenceRecord, Source, Span};
use crate::error::{Error, Result};

/// Target phrase with its (group, person, institute) flags.
const TARGETS: [(&str, bool, bool, bool); 8] = [
    ("the left", true, false, false),
    ("the settlers", true, false, false),
    ("the prime minister", false, true, false),
    ("the finance minister", false, true, false),
    ("the supreme court", false, false, true),
    ("the media", false, false, true),
    ("the opposition", true, false, false),
    ("the attorney general", false, true, true),
];

/// Cue phrase with (intensity, incivility, outgroup, common_good).
const CUES: [(&str, u8, bool, bool, bool); 6] = [
    ("are illegitimate usurpers", 1, false, false, false),
    ("are traitors selling out the state", 2, false, false, true),
    ("are a circus of clowns", 1, true, false, false),
    ("are agents of hostile enemies", 2, false, true, false),
    ("are wrecking the country deliberately", 2, false, false, true),
    ("are nothing but lying thugs", 0, true, false, false),
];

const NEUTRAL: [&str; 8] = [
    "presented the annual budget",
    "discussed the housing plan",
    "met with the committee",
    "proposed an amendment on transport",
    "answered questions about education",
    "visited the northern region",
    "voted on the water bill",
    "published a statement on health policy",
];

const TAILS: [&str; 6] = ["today", "this week", "again", "in the plenum", "yesterday", "during the session"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_sentences: usize,
    pub n_speakers: usize,
    pub seed: u64,
    pub start: NaiveDate,
    pub end: NaiveDate,
    /// Date of the government change that moves the center bloc into the coalition.
    pub event: NaiveDate,
    /// Mean PDD rate across speakers before bloc and coalition adjustments.
    pub base_rate: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_sentences: 1000,
            n_speakers: 40,
            seed: 7,
            start: NaiveDate::from_ymd_opt(2018, 1, 1).expect("valid date"),
            end: NaiveDate::from_ymd_opt(2021, 12, 31).expect("valid date"),
            event: NaiveDate::from_ymd_opt(2020, 4, 20).expect("valid date"),
            base_rate: 0.18,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub records: Vec<SentenceRecord>,
    pub gold: Vec<PddAnnotation>,
    pub speakers: Vec<SpeakerMeta>,
    pub events: Vec<Event>,
}

impl SyntheticCorpus {
    pub fn corpus(&self) -> Corpus {
        Corpus::from_records(self.records.iter().cloned()).expect("generated ids are unique")
    }

    /// Ingestion rows for one source.
    pub fn raw_records(&self, source: Source) -> Vec<RawRecord> {
        self.records
            .iter()
            .filter(|r| r.source == source)
            .map(|r| RawRecord {
                id: r.id.clone(),
                text: Some(r.text.clone()),
                date: r.date.to_string(),
                speaker_id: r.speaker_id.clone(),
                doc_id: r.doc_id.clone(),
            })
            .collect()
    }
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T]) -> &'a T {
    &items[rng.random_range(0..items.len())]
}

fn speakers(cfg: &SyntheticConfig, rng: &mut ChaCha8Rng) -> Vec<SpeakerMeta> {
    (0..cfg.n_speakers)
        .map(|k| {
            let bloc = [Bloc::Right, Bloc::Center, Bloc::Left][k % 3];
            let coalition_intervals = match bloc {
                Bloc::Right => vec![DateRange { start: cfg.start, end: None }],
                Bloc::Center => vec![DateRange { start: cfg.event, end: None }],
                _ => Vec::new(),
            };
            SpeakerMeta {
                speaker_id: format!("sp{k:03}"),
                name: format!("Speaker {k}"),
                gender: if rng.random_bool(0.35) { Gender::Female } else { Gender::Male },
                bloc,
                party: format!("{}-{}", bloc.as_str(), k % 2),
                coalition_intervals,
            }
        })
        .collect()
}

fn positive_rate(cfg: &SyntheticConfig, speaker: &SpeakerMeta, personal: f64, date: NaiveDate) -> f64 {
    let bloc = match speaker.bloc {
        Bloc::Right => 1.2,
        Bloc::Left => 1.0,
        _ => 0.7,
    };
    let coalition = if speaker.in_coalition(date) && date >= cfg.event { 0.6 } else { 1.0 };
    (cfg.base_rate * personal * bloc * coalition).clamp(0.0, 0.95)
}

/// Generates a corpus deterministically from `cfg.seed`. Facebook and
/// Knesset sentences have speakers; news sentences do not.
pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticCorpus> {
    if cfg.n_speakers == 0 {
        return Err(Error::invalid("n_speakers", "at least one speaker is required"));
    }
    if cfg.end < cfg.start {
        return Err(Error::invalid("end", "end date precedes start date"));
    }
    if !(0.0..=1.0).contains(&cfg.base_rate) {
        return Err(Error::invalid("base_rate", "must lie in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let speakers = speakers(cfg, &mut rng);
    let personal: Vec<f64> = speakers.iter().map(|_| rng.random_range(0.4..1.6)).collect();
    let days = (cfg.end - cfg.start).num_days();
    let mut records = Vec::with_capacity(cfg.n_sentences);
    let mut gold = Vec::with_capacity(cfg.n_sentences);
    for i in 0..cfg.n_sentences {
        let roll: f64 = rng.random();
        let source = if roll < 0.6427 {
            Source::Facebook
        } else if roll < 0.6427 + 0.2406 {
            Source::Knesset
        } else {
            Source::News
        };
        let date = cfg.start + Duration::days(rng.random_range(0..=days));
        let speaker_idx = rng.random_range(0..speakers.len());
        let rate = positive_rate(cfg, &speakers[speaker_idx], personal[speaker_idx], date);
        let delegit = rng.random_bool(rate);
        let (target, group, person, institute) = *pick(&mut rng, &TARGETS);
        let tail = pick(&mut rng, &TAILS);
        let id = format!("syn-{i:06}");
        let annotation;
        let text = if delegit {
            let (cue, intensity, incivility, outgroup, common_good) = *pick(&mut rng, &CUES);
            let c = Characteristics { intensity, incivility, outgroup, common_good, group, person, institute };
            annotation = PddAnnotation::positive(&id, "gold")
                .with_characteristics(&c)
                .with_spans(vec![Span::new(0, target.chars().count())]);
            format!("{target} {cue} {tail}")
        } else {
            annotation = PddAnnotation::negative(&id, "gold");
            format!("{target} {} {tail}", pick(&mut rng, &NEUTRAL))
        };
        let speaker_id = (source != Source::News).then(|| speakers[speaker_idx].speaker_id.clone());
        records.push(SentenceRecord {
            doc_id: Some(format!("doc-{}", i / 5)),
            id,
            text,
            source,
            date,
            speaker_id,
        });
        gold.push(annotation);
    }
    let events = vec![Event { name: "government change".into(), date: cfg.event, kind: EventKind::Government }];
    Ok(SyntheticCorpus { records, gold, speakers, events })
}
