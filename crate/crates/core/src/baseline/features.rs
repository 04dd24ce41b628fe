use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_DIM: u32 = 1 << 18;

/// Sparse feature counts, sorted by index with no duplicates.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureVector {
    pub dim: u32,
    pub entries: Vec<(u32, f64)>,
}

impl FeatureVector {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v).sum()
    }
}

fn word_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\w+").expect("valid regex"))
}

pub fn tokenize(text: &str) -> Vec<String> {
    word_re().find_iter(text).map(|m| m.as_str().to_lowercase()).collect()
}

fn fnv1a(parts: &[&[u8]]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for &b in *part {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// Hashes unigrams and adjacent-token bigrams into `[0, dim)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Featurizer {
    dim: u32,
}

impl Featurizer {
    /// `dim` must be a power of two.
    pub fn new(dim: u32) -> Result<Self> {
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::invalid("dim", format!("{dim} is not a power of two ≥ 2")));
        }
        Ok(Featurizer { dim })
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    /// Raw hashed indices, one per unigram then one per bigram.
    pub fn hashed_indices(&self, text: &str) -> Vec<u32> {
        let tokens = tokenize(text);
        let mask = (self.dim - 1) as u64;
        let uni = tokens.iter().map(|t| (fnv1a(&[b"u\x1f", t.as_bytes()]) & mask) as u32);
        let bi = tokens
            .windows(2)
            .map(|w| (fnv1a(&[b"b\x1f", w[0].as_bytes(), b"\x1f", w[1].as_bytes()]) & mask) as u32);
        uni.chain(bi).collect()
    }

    pub fn featurize(&self, text: &str) -> FeatureVector {
        let mut idx = self.hashed_indices(text);
        idx.sort_unstable();
        let mut entries: Vec<(u32, f64)> = Vec::new();
        for i in idx {
            match entries.last_mut() {
                Some((j, c)) if *j == i => *c += 1.0,
                _ => entries.push((i, 1.0)),
            }
        }
        FeatureVector { dim: self.dim, entries }
    }
}

pub fn featurize(text: &str, dim: u32) -> Result<FeatureVector> {
    Ok(Featurizer::new(dim)?.featurize(text))
}
