use serde::{Deserialize, Serialize};

use super::{prf, SpanMetrics, SpanMode};
use crate::corpus::Span;

/// Gold and predicted target spans of one sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanItem {
    pub text: String,
    pub gold: Vec<Span>,
    pub predicted: Vec<Span>,
}

/// Shrinks `span` past leading and trailing whitespace of `chars`.
pub fn trim_span(chars: &[char], span: Span) -> Span {
    let mut end = span.end.min(chars.len());
    let mut start = span.start.min(end);
    while start < end && chars[start].is_whitespace() {
        start += 1;
    }
    while end > start && chars[end - 1].is_whitespace() {
        end -= 1;
    }
    Span::new(start, end)
}

fn jaccard(a: Span, b: Span) -> f64 {
    let inter = a.end.min(b.end).saturating_sub(a.start.max(b.start));
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

fn compatible(p: Span, g: Span, mode: SpanMode) -> bool {
    match mode {
        SpanMode::Exact => p == g,
        SpanMode::Overlap => jaccard(p, g) >= 0.5,
    }
}

fn augment(p: usize, adj: &[Vec<usize>], owner: &mut [Option<usize>], visited: &mut [bool]) -> bool {
    for &g in &adj[p] {
        if visited[g] {
            continue;
        }
        visited[g] = true;
        if owner[g].is_none_or(|q| augment(q, adj, owner, visited)) {
            owner[g] = Some(p);
            return true;
        }
    }
    false
}

/// Size of a maximum one-to-one matching between predicted and gold spans.
pub fn match_count(pred: &[Span], gold: &[Span], mode: SpanMode) -> usize {
    let adj: Vec<Vec<usize>> = pred
        .iter()
        .map(|p| (0..gold.len()).filter(|&j| compatible(*p, gold[j], mode)).collect())
        .collect();
    let mut owner = vec![None; gold.len()];
    (0..pred.len())
        .filter(|&p| augment(p, &adj, &mut owner, &mut vec![false; gold.len()]))
        .count()
}

pub fn span_metrics(items: &[SpanItem], mode: SpanMode) -> SpanMetrics {
    let (mut tp, mut n_pred, mut n_gold) = (0, 0, 0);
    for item in items {
        let chars: Vec<char> = item.text.chars().collect();
        let pred: Vec<Span> = item.predicted.iter().map(|s| trim_span(&chars, *s)).collect();
        let gold: Vec<Span> = item.gold.iter().map(|s| trim_span(&chars, *s)).collect();
        tp += match_count(&pred, &gold, mode);
        n_pred += pred.len();
        n_gold += gold.len();
    }
    let (fp, fn_) = (n_pred - tp, n_gold - tp);
    let (precision, recall, f1) = prf(tp, fp, fn_);
    SpanMetrics { mode, precision, recall, f1, tp_count: tp, fp, fn_ }
}
