//! Seeded train/validation/test partitioning with largest-remainder sizing.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Validation,
    Test,
}

impl SplitName {
    pub const ALL: [SplitName; 3] = [SplitName::Train, SplitName::Validation, SplitName::Test];
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitName::Train => "train",
            SplitName::Validation => "validation",
            SplitName::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSplit {
    pub seed: u64,
    pub ratios: [f64; 3],
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

/// One line of a split file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SplitRecord {
    Header { seed: u64, ratios: [f64; 3] },
    Assignment { id: String, split: SplitName },
}

impl CorpusSplit {
    pub fn ids(&self, which: SplitName) -> &[String] {
        match which {
            SplitName::Train => &self.train,
            SplitName::Validation => &self.validation,
            SplitName::Test => &self.test,
        }
    }

    pub fn sizes(&self) -> [usize; 3] {
        [self.train.len(), self.validation.len(), self.test.len()]
    }

    /// Header first, then assignments grouped by split.
    pub fn to_records(&self) -> Vec<SplitRecord> {
        let mut out = vec![SplitRecord::Header { seed: self.seed, ratios: self.ratios }];
        for name in SplitName::ALL {
            out.extend(self.ids(name).iter().map(|id| SplitRecord::Assignment {
                id: id.clone(),
                split: name,
            }));
        }
        out
    }

    pub fn from_records(records: impl IntoIterator<Item = SplitRecord>) -> Result<Self> {
        let mut split: Option<CorpusSplit> = None;
        let mut pending = Vec::new();
        for r in records {
            match r {
                SplitRecord::Header { seed, ratios } => {
                    if split.is_some() {
                        return Err(Error::invalid("split file", "more than one header record"));
                    }
                    split = Some(CorpusSplit {
                        seed,
                        ratios,
                        train: vec![],
                        validation: vec![],
                        test: vec![],
                    })
                }
                SplitRecord::Assignment { id, split } => pending.push((id, split)),
            }
        }
        let mut split = split.ok_or_else(|| Error::invalid("split file", "missing header record"))?;
        for (id, name) in pending {
            match name {
                SplitName::Train => split.train.push(id),
                SplitName::Validation => split.validation.push(id),
                SplitName::Test => split.test.push(id),
            }
        }
        Ok(split)
    }
}

/// Sizes proportional to `ratios` summing exactly to `n`. Leftover units go
/// to the largest fractional remainders, earlier splits winning ties.
pub(crate) fn largest_remainder(n: usize, ratios: &[f64; 3]) -> [usize; 3] {
    const EPS: f64 = 1e-9;
    let quotas: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut sizes = [0usize; 3];
    for (s, q) in sizes.iter_mut().zip(&quotas) {
        *s = (q + EPS).floor() as usize;
    }
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..3).collect();
    let rem = |i: usize| quotas[i] - sizes[i] as f64;
    order.sort_by(|&a, &b| {
        rem(b)
            .partial_cmp(&rem(a))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        sizes[i] += 1;
    }
    sizes
}

/// Shuffles the ids with a seeded ChaCha8 generator and cuts them into
/// train/validation/test. Ids are sorted before shuffling so the result does
/// not depend on input order; each part is returned sorted.
pub fn split_corpus<'a>(
    ids: impl IntoIterator<Item = &'a str>,
    ratios: [f64; 3],
    seed: u64,
) -> Result<CorpusSplit> {
    if ratios.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(Error::InvalidRatios(format!("negative or non-finite ratio in {ratios:?}")));
    }
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidRatios(format!("ratios sum to {sum}, expected 1")));
    }
    let mut ids: Vec<String> = ids.into_iter().map(String::from).collect();
    ids.sort();
    ids.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);

    let [n_train, n_val, _] = largest_remainder(ids.len(), &ratios);
    let mut test = ids.split_off(n_train + n_val);
    let mut validation = ids.split_off(n_train);
    let mut train = ids;
    train.sort();
    validation.sort();
    test.sort();
    Ok(CorpusSplit { seed, ratios, train, validation, test })
}
