//! Descriptive statistics over a corpus and its gold annotations.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Attribute, Corpus, PddAnnotation, Source};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceCount {
    pub source: Source,
    pub count: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeCount {
    pub attribute: Attribute,
    pub count: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total: usize,
    pub sources: Vec<SourceCount>,
    pub annotated: usize,
    pub delegit_count: usize,
    pub delegit_rate: f64,
    /// Positives carrying characteristic annotations; denominator of the rows below.
    pub characteristics_n: usize,
    pub attributes: Vec<AttributeCount>,
    pub intensity_mean: Option<f64>,
    /// Sample standard deviation (n - 1).
    pub intensity_sd: Option<f64>,
    pub span_total: usize,
    pub with_span_count: usize,
    pub with_span_share: f64,
    /// Annotations whose sentence id is not in the corpus.
    pub unmatched_annotations: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Renders a rate as a percentage with two decimals.
pub fn format_pct(rate: f64) -> String {
    format!("{:.2}%", rate * 100.0)
}

/// Computes source, label, characteristic and span statistics. When a
/// sentence has several annotations the last one wins.
pub fn corpus_stats(corpus: &Corpus, annotations: &[PddAnnotation]) -> CorpusStats {
    let total = corpus.len();
    let hist = corpus.source_histogram();
    let sources = Source::ALL
        .iter()
        .map(|&s| {
            let count = hist.get(&s).copied().unwrap_or(0);
            SourceCount { source: s, count, rate: ratio(count, total) }
        })
        .collect();

    let mut gold: HashMap<&str, &PddAnnotation> = HashMap::new();
    let mut unmatched = 0;
    for a in annotations {
        if corpus.contains(&a.sentence_id) {
            gold.insert(a.sentence_id.as_str(), a);
        } else {
            unmatched += 1;
        }
    }

    let positives: Vec<&PddAnnotation> = corpus
        .ids()
        .filter_map(|id| gold.get(id).copied())
        .filter(|a| a.delegit)
        .collect();
    let subset: Vec<&PddAnnotation> = positives.iter().copied().filter(|a| a.has_characteristics()).collect();
    let n = subset.len();

    let attributes = Attribute::ALL
        .iter()
        .map(|&attr| {
            let count = subset.iter().filter(|a| a.attribute(attr) == Some(true)).count();
            AttributeCount { attribute: attr, count, rate: ratio(count, n) }
        })
        .collect();

    let intensities: Vec<f64> = subset.iter().filter_map(|a| a.intensity).map(f64::from).collect();
    let (intensity_mean, intensity_sd) = if intensities.is_empty() {
        (None, None)
    } else {
        let m = intensities.iter().sum::<f64>() / intensities.len() as f64;
        let sd = if intensities.len() > 1 {
            let ss: f64 = intensities.iter().map(|x| (x - m).powi(2)).sum();
            Some((ss / (intensities.len() - 1) as f64).sqrt())
        } else {
            None
        };
        (Some(m), sd)
    };

    let span_total = positives.iter().map(|a| a.target_spans.len()).sum();
    let with_span_count = subset.iter().filter(|a| !a.target_spans.is_empty()).count();

    CorpusStats {
        total,
        sources,
        annotated: gold.len(),
        delegit_count: positives.len(),
        delegit_rate: ratio(positives.len(), total),
        characteristics_n: n,
        attributes,
        intensity_mean,
        intensity_sd,
        span_total,
        with_span_count,
        with_span_share: ratio(with_span_count, n),
        unmatched_annotations: unmatched,
    }
}

impl CorpusStats {
    pub fn source_count(&self, source: Source) -> usize {
        self.sources.iter().find(|s| s.source == source).map_or(0, |s| s.count)
    }

    /// Source breakdown followed by label, characteristic and span rows.
    pub fn render_tables(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "Source\tCount\tPercentage");
        for sc in &self.sources {
            let _ = writeln!(s, "{}\t{}\t{}", sc.source, sc.count, format_pct(sc.rate));
        }
        let _ = writeln!(s, "Total\t{}\t{}", self.total, format_pct(if self.total > 0 { 1.0 } else { 0.0 }));
        let _ = writeln!(s);
        let _ = writeln!(s, "Feature\tCount\tPercent");
        let _ = writeln!(s, "Delegitimization\t{}\t{}", self.delegit_count, format_pct(self.delegit_rate));
        let _ = writeln!(s, "Subset with characteristics\tN={}", self.characteristics_n);
        for a in &self.attributes {
            let _ = writeln!(s, "{}\t{}\t{}", a.attribute.as_str(), a.count, format_pct(a.rate));
        }
        let fmt_opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
        let _ = writeln!(s, "Intensity\tmean {}\tsd {}", fmt_opt(self.intensity_mean), fmt_opt(self.intensity_sd));
        let _ = writeln!(
            s,
            "Target spans\t{}\t{} with target span",
            self.span_total,
            format_pct(self.with_span_share)
        );
        s
    }

    /// `section,label,count,rate` rows.
    pub fn csv_rows(&self) -> Vec<[String; 4]> {
        let mut rows = vec![];
        for sc in &self.sources {
            rows.push(["source".into(), sc.source.to_string(), sc.count.to_string(), format!("{:.4}", sc.rate)]);
        }
        rows.push(["source".into(), "total".into(), self.total.to_string(), "1.0000".into()]);
        rows.push([
            "label".into(),
            "delegit".into(),
            self.delegit_count.to_string(),
            format!("{:.4}", self.delegit_rate),
        ]);
        for a in &self.attributes {
            rows.push([
                "characteristic".into(),
                a.attribute.as_str().into(),
                a.count.to_string(),
                format!("{:.4}", a.rate),
            ]);
        }
        rows.push([
            "spans".into(),
            "with_target_span".into(),
            self.with_span_count.to_string(),
            format!("{:.4}", self.with_span_share),
        ]);
        rows
    }
}
