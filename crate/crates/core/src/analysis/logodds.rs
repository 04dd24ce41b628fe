//! Weighted log-odds with an informative Dirichlet prior for
//! group-distinctive terms.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type TermCounts = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogOddsEntry {
    pub term: String,
    pub group: String,
    /// Count in the group.
    pub y_i: f64,
    /// Count in the comparison set.
    pub y_j: f64,
    pub alpha_w: f64,
    pub delta: f64,
    pub variance: f64,
    pub z: f64,
}

/// Whitespace-collapsed, trimmed and lowercased (cased scripts only).
pub fn normalize_term(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Scores every term of `i` against `j` with prior `alpha_w = alpha0 ·
/// prior[w] / Σ prior`. Terms absent from the prior get no entry.
pub fn log_odds_pair(
    group: &str,
    i: &TermCounts,
    j: &TermCounts,
    prior: &TermCounts,
    alpha0: f64,
) -> Result<Vec<LogOddsEntry>> {
    if alpha0.is_nan() || alpha0 <= 0.0 {
        return Err(Error::invalid("alpha0", "prior strength must be positive"));
    }
    let n_i: f64 = i.values().sum();
    let n_j: f64 = j.values().sum();
    let prior_total: f64 = prior.values().sum();
    if n_i <= 0.0 || n_j <= 0.0 || prior_total <= 0.0 {
        return Err(Error::Degenerate("log-odds comparison with an empty group".into()));
    }
    let entries = prior
        .iter()
        .filter(|(_, c)| **c > 0.0)
        .map(|(term, c)| {
            let a = alpha0 * c / prior_total;
            let yi = i.get(term).copied().unwrap_or(0.0);
            let yj = j.get(term).copied().unwrap_or(0.0);
            let delta = ((yi + a) / (n_i + alpha0 - yi - a)).ln() - ((yj + a) / (n_j + alpha0 - yj - a)).ln();
            let variance = 1.0 / (yi + a) + 1.0 / (yj + a);
            LogOddsEntry {
                term: term.clone(),
                group: group.to_string(),
                y_i: yi,
                y_j: yj,
                alpha_w: a,
                delta,
                variance,
                z: delta / variance.sqrt(),
            }
        })
        .collect();
    Ok(entries)
}

fn rank(entries: &mut [LogOddsEntry]) {
    entries.sort_by(|a, b| b.z.total_cmp(&a.z).then_with(|| a.term.cmp(&b.term)));
}

/// One-vs-rest ranking per group with the pooled counts as prior. Returns
/// the top `k` entries per group by descending z.
pub fn weighted_log_odds(
    groups: &BTreeMap<String, TermCounts>,
    alpha0: f64,
    k: usize,
) -> Result<BTreeMap<String, Vec<LogOddsEntry>>> {
    if groups.len() < 2 {
        return Err(Error::Degenerate("log-odds needs at least two groups".into()));
    }
    let mut pooled = TermCounts::new();
    for counts in groups.values() {
        for (t, c) in counts {
            *pooled.entry(t.clone()).or_default() += c;
        }
    }
    let mut out = BTreeMap::new();
    for (name, counts) in groups {
        if counts.values().sum::<f64>() <= 0.0 {
            return Err(Error::Degenerate(format!("group `{name}` has no terms")));
        }
        let mut rest = TermCounts::new();
        for (_, oc) in groups.iter().filter(|(o, _)| *o != name) {
            for (t, c) in oc {
                *rest.entry(t.clone()).or_default() += c;
            }
        }
        let mut entries = log_odds_pair(name, counts, &rest, &pooled, alpha0)?;
        rank(&mut entries);
        entries.truncate(k);
        out.insert(name.clone(), entries);
    }
    Ok(out)
}
