//! Inter-annotator agreement on binary labels.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{Attribute, PddAnnotation};
use crate::error::{Error, Result};

/// Cohen's kappa for two aligned binary label sequences.
///
/// `kappa = (p_o - p_e) / (1 - p_e)`, with chance agreement `p_e` from the two
/// marginals. When both annotators are constant and agree, `p_e = 1` and the
/// result is defined as 1.
pub fn cohen_kappa(labels_a: &[bool], labels_b: &[bool]) -> Result<f64> {
    if labels_a.len() != labels_b.len() {
        return Err(Error::LengthMismatch { left: labels_a.len(), right: labels_b.len() });
    }
    if labels_a.is_empty() {
        return Err(Error::invalid("labels", "need at least one item"));
    }
    let n = labels_a.len() as f64;
    let agree = labels_a.iter().zip(labels_b).filter(|(a, b)| a == b).count() as f64;
    let pa = labels_a.iter().filter(|&&x| x).count() as f64 / n;
    let pb = labels_b.iter().filter(|&&x| x).count() as f64 / n;
    let p_o = agree / n;
    let p_e = pa * pb + (1.0 - pa) * (1.0 - pb);
    if (1.0 - p_e).abs() < f64::EPSILON {
        return Ok(if p_o >= 1.0 { 1.0 } else { 0.0 });
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Pearson correlation of two 0/1 vectors (the phi coefficient).
pub fn pairwise_correlation(labels_a: &[bool], labels_b: &[bool]) -> Result<f64> {
    if labels_a.len() != labels_b.len() {
        return Err(Error::LengthMismatch { left: labels_a.len(), right: labels_b.len() });
    }
    if labels_a.len() < 2 {
        return Err(Error::UndefinedCorrelation("need at least two items".into()));
    }
    let to_f = |v: &[bool]| v.iter().map(|&x| if x { 1.0 } else { 0.0 }).collect::<Vec<f64>>();
    let (xa, xb) = (to_f(labels_a), to_f(labels_b));
    let n = xa.len() as f64;
    let ma = xa.iter().sum::<f64>() / n;
    let mb = xb.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (a, b) in xa.iter().zip(&xb) {
        cov += (a - ma) * (b - mb);
        va += (a - ma).powi(2);
        vb += (b - mb).powi(2);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::UndefinedCorrelation("constant label vector".into()));
    }
    Ok((cov / (va * vb).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAgreement {
    pub annotator_a: String,
    pub annotator_b: String,
    pub n_shared: usize,
    pub kappa: f64,
    /// `None` when either annotator's labels are constant on the shared items.
    pub correlation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeAgreement {
    pub attribute: Attribute,
    pub n_pairs: usize,
    pub mean_kappa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub annotators: Vec<String>,
    pub pairs: Vec<PairAgreement>,
    /// Unweighted mean of pairwise kappa.
    pub mean_kappa: f64,
    /// Unweighted mean over pairs where the correlation is defined.
    pub mean_correlation: Option<f64>,
    /// Items labelled by every annotator.
    pub n_shared: usize,
    /// Items labelled by at least two annotators whose delegit labels differ.
    pub disagreements: Vec<String>,
    /// Per-attribute kappa, informational only; not part of the headline mean.
    pub attributes: Vec<AttributeAgreement>,
}

/// Pairwise kappa and correlation over the binary label, computed per pair
/// on the items both annotators labelled and then averaged over pairs.
pub fn agreement_report(annotations: &[PddAnnotation]) -> Result<AgreementReport> {
    // sentence -> annotator -> annotation (later entries replace earlier ones)
    let mut table: BTreeMap<&str, BTreeMap<&str, &PddAnnotation>> = BTreeMap::new();
    for a in annotations {
        table
            .entry(a.sentence_id.as_str())
            .or_default()
            .insert(a.annotator_id.as_str(), a);
    }
    let annotators: BTreeSet<&str> = table.values().flat_map(|m| m.keys().copied()).collect();
    let annotators: Vec<&str> = annotators.into_iter().collect();

    let mut pairs = Vec::new();
    let mut attr_kappas: BTreeMap<Attribute, Vec<f64>> = BTreeMap::new();
    for (i, a) in annotators.iter().enumerate() {
        for b in &annotators[i + 1..] {
            let shared: Vec<(&PddAnnotation, &PddAnnotation)> = table
                .values()
                .filter_map(|m| Some((*m.get(a)?, *m.get(b)?)))
                .collect();
            if shared.is_empty() {
                continue;
            }
            let la: Vec<bool> = shared.iter().map(|(x, _)| x.delegit).collect();
            let lb: Vec<bool> = shared.iter().map(|(_, y)| y.delegit).collect();
            pairs.push(PairAgreement {
                annotator_a: a.to_string(),
                annotator_b: b.to_string(),
                n_shared: shared.len(),
                kappa: cohen_kappa(&la, &lb)?,
                correlation: pairwise_correlation(&la, &lb).ok(),
            });
            for attr in Attribute::ALL {
                let (xa, xb): (Vec<bool>, Vec<bool>) = shared
                    .iter()
                    .filter_map(|(x, y)| Some((x.attribute(attr)?, y.attribute(attr)?)))
                    .unzip();
                if !xa.is_empty() {
                    attr_kappas.entry(attr).or_default().push(cohen_kappa(&xa, &xb)?);
                }
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::NoSharedItems);
    }

    let mean_kappa = pairs.iter().map(|p| p.kappa).sum::<f64>() / pairs.len() as f64;
    let corrs: Vec<f64> = pairs.iter().filter_map(|p| p.correlation).collect();
    let mean_correlation = (!corrs.is_empty()).then(|| corrs.iter().sum::<f64>() / corrs.len() as f64);
    let n_shared = table.values().filter(|m| m.len() == annotators.len()).count();
    let disagreements = table
        .iter()
        .filter(|(_, m)| m.len() >= 2)
        .filter(|(_, m)| {
            let mut labels = m.values().map(|a| a.delegit);
            let first = labels.next();
            labels.any(|l| Some(l) != first)
        })
        .map(|(id, _)| id.to_string())
        .collect();
    let attributes = Attribute::ALL
        .iter()
        .map(|&attribute| {
            let ks = attr_kappas.get(&attribute).cloned().unwrap_or_default();
            AttributeAgreement {
                attribute,
                n_pairs: ks.len(),
                mean_kappa: (!ks.is_empty()).then(|| ks.iter().sum::<f64>() / ks.len() as f64),
            }
        })
        .collect();

    Ok(AgreementReport {
        annotators: annotators.iter().map(|s| s.to_string()).collect(),
        pairs,
        mean_kappa,
        mean_correlation,
        n_shared,
        disagreements,
        attributes,
    })
}
