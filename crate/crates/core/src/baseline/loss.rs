//! Pointwise losses. Arguments named `p` are the probability the model
//! assigns to the gold class.

use serde::{Deserialize, Serialize};

use crate::corpus::{Attribute, Characteristics};
use crate::error::{Error, Result};

/// Lower clamp applied by callers that turn logits into probabilities.
pub const PROB_EPSILON: f64 = 1e-12;

fn check_prob(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("probability {p} outside (0, 1]")))
    }
}

pub fn cross_entropy(p: f64) -> Result<f64> {
    check_prob(p)?;
    Ok(-p.ln())
}

pub fn weighted_ce(p: f64, weight: f64) -> Result<f64> {
    check_prob(p)?;
    if weight.is_nan() || weight <= 0.0 {
        return Err(Error::Domain(format!("class weight {weight} must be positive")));
    }
    Ok(-weight * p.ln())
}

/// `-alpha * (1 - p)^gamma * ln p`.
pub fn focal_loss(p: f64, gamma: f64, alpha: f64) -> Result<f64> {
    check_prob(p)?;
    if gamma.is_nan() || gamma < 0.0 {
        return Err(Error::Domain(format!("focal gamma {gamma} must be non-negative")));
    }
    if alpha.is_nan() || alpha <= 0.0 || alpha > 1.0 {
        return Err(Error::Domain(format!("focal alpha {alpha} outside (0, 1]")));
    }
    if p == 1.0 {
        return Ok(0.0);
    }
    Ok(-alpha * (1.0 - p).powf(gamma) * p.ln())
}

/// Loss regime for binary training.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossConfig {
    #[default]
    Default,
    /// `weights[c]` scales examples of class `c` (0 = negative, 1 = positive).
    /// `None` means inverse class frequency of the training labels.
    ClassWeights { weights: Option<[f64; 2]> },
    Focal { gamma: f64, alpha: f64 },
}

impl LossConfig {
    pub fn focal() -> Self {
        LossConfig::Focal { gamma: 2.0, alpha: 1.0 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossConfig::Default => "default",
            LossConfig::ClassWeights { .. } => "class_weights",
            LossConfig::Focal { .. } => "focal",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "default" | "ce" => Ok(LossConfig::Default),
            "class_weights" | "class-weights" | "weighted" => Ok(LossConfig::ClassWeights { weights: None }),
            "focal" => Ok(LossConfig::focal()),
            _ => Err(Error::invalid("loss", format!("unknown loss `{name}`"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LossConfig::Default => Ok(()),
            LossConfig::ClassWeights { weights: None } => Ok(()),
            LossConfig::ClassWeights { weights: Some(w) } => {
                if w.iter().all(|x| x.is_finite() && *x > 0.0) {
                    Ok(())
                } else {
                    Err(Error::invalid("class_weights", "weights must be positive and finite"))
                }
            }
            LossConfig::Focal { gamma, alpha } => focal_loss(0.5, gamma, alpha).map(|_| ()),
        }
    }

    /// Fills in inverse-frequency weights, `n / (2 n_c)`, when none were given.
    pub fn resolve(&self, labels: &[bool]) -> Result<LossConfig> {
        self.validate()?;
        match self {
            LossConfig::ClassWeights { weights: None } => {
                let n = labels.len() as f64;
                let pos = labels.iter().filter(|y| **y).count() as f64;
                let neg = n - pos;
                if pos == 0.0 || neg == 0.0 {
                    return Err(Error::Degenerate("class weights need both classes".into()));
                }
                Ok(LossConfig::ClassWeights { weights: Some([n / (2.0 * neg), n / (2.0 * pos)]) })
            }
            other => Ok(*other),
        }
    }

    /// Loss and its derivative with respect to the logit `z` for label `y`.
    pub fn value_and_dz(&self, z: f64, y: bool) -> (f64, f64) {
        let s = if y { 1.0 } else { -1.0 };
        let sz = s * z;
        let log_pt = -softplus(-sz);
        let pt = sigmoid(sz);
        let q = sigmoid(-sz);
        match *self {
            LossConfig::Default => (-log_pt, -s * q),
            LossConfig::ClassWeights { weights } => {
                let w = weights.map_or(1.0, |w| w[y as usize]);
                (-w * log_pt, -w * s * q)
            }
            LossConfig::Focal { gamma, alpha } => {
                let qg = if gamma == 0.0 { 1.0 } else { q.powf(gamma) };
                let loss = -alpha * qg * log_pt;
                let dz = -alpha * s * (q * qg - gamma * pt * qg * log_pt);
                (loss, dz)
            }
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Probabilities from the seven stage-2 heads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadProbabilities {
    /// Probability of `true` for each attribute, in [`Attribute::ALL`] order.
    pub binary: Vec<f64>,
    /// Distribution over intensity 0, 1, 2.
    pub intensity: Vec<f64>,
}

impl HeadProbabilities {
    pub fn to_characteristics(&self) -> Characteristics {
        let mut c = Characteristics::default();
        for (a, p) in Attribute::ALL.iter().zip(&self.binary) {
            c.set(*a, *p >= 0.5);
        }
        c.intensity = self
            .intensity
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &p)| if p > best.1 { (i, p) } else { best })
            .0 as u8;
        c
    }
}

/// Unweighted mean of the six binary cross-entropies and the three-class
/// intensity cross-entropy.
pub fn multitask_loss(probs: &HeadProbabilities, gold: &Characteristics) -> Result<f64> {
    if probs.binary.len() != 6 {
        return Err(Error::MissingField(format!("expected 6 binary heads, got {}", probs.binary.len())));
    }
    if probs.intensity.len() != 3 {
        return Err(Error::MissingField(format!("expected 3 intensity classes, got {}", probs.intensity.len())));
    }
    let mut total = 0.0;
    for (a, &p) in Attribute::ALL.iter().zip(&probs.binary) {
        total += cross_entropy(if gold.get(*a) { p } else { 1.0 - p })?;
    }
    let k = gold.intensity as usize;
    if k > 2 {
        return Err(Error::Domain(format!("gold intensity {k} outside 0..=2")));
    }
    total += cross_entropy(probs.intensity[k])?;
    Ok(total / 7.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn focal_examples() {
        assert!(close(focal_loss(0.8, 0.0, 1.0).unwrap(), 0.22314, 5e-6));
        assert!(close(focal_loss(0.9, 2.0, 1.0).unwrap(), 0.0010536, 5e-8));
        for g in [0.0, 0.5, 2.0, 5.0] {
            assert_eq!(focal_loss(1.0, g, 1.0).unwrap(), 0.0);
        }
        assert!(focal_loss(0.0, 2.0, 1.0).is_err());
        assert!(focal_loss(-0.1, 2.0, 1.0).is_err());
        assert!(focal_loss(0.5, -1.0, 1.0).is_err());
        assert!(focal_loss(0.5, 2.0, 0.0).is_err());
    }

    #[test]
    fn weighted_examples() {
        assert!(close(weighted_ce(0.5, 2.0).unwrap(), 1.38629, 5e-6));
        assert_eq!(weighted_ce(0.3, 1.0).unwrap(), cross_entropy(0.3).unwrap());
        assert!(weighted_ce(0.5, 0.0).is_err());
    }

    #[test]
    fn focal_gamma_zero_is_ce_on_random_points() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let p: f64 = rng.random_range(1e-9..=1.0);
            let d = (focal_loss(p, 0.0, 1.0).unwrap() - cross_entropy(p).unwrap()).abs();
            assert!(d <= 1e-12, "p={p} d={d}");
        }
    }

    #[test]
    fn multitask_examples() {
        let gold = Characteristics { intensity: 1, group: true, ..Default::default() };
        let perfect = HeadProbabilities {
            binary: Attribute::ALL.iter().map(|a| if gold.get(*a) { 1.0 } else { 0.0 }).collect(),
            intensity: vec![0.0, 1.0, 0.0],
        };
        assert_eq!(multitask_loss(&perfect, &gold).unwrap(), 0.0);
        assert_eq!(perfect.to_characteristics(), gold);

        let uniform = HeadProbabilities { binary: vec![0.5; 6], intensity: vec![1.0 / 3.0; 3] };
        let l = multitask_loss(&uniform, &gold).unwrap();
        assert!(close(l, (6.0 * 2f64.ln() + 3f64.ln()) / 7.0, 1e-12));
        assert!(close(l, 0.75107, 5e-6));

        let missing = HeadProbabilities { binary: vec![0.5; 5], intensity: vec![1.0 / 3.0; 3] };
        assert!(multitask_loss(&missing, &gold).is_err());
    }

    #[test]
    fn resolve_inverse_frequency() {
        let labels = [true, false, false, false];
        let r = LossConfig::ClassWeights { weights: None }.resolve(&labels).unwrap();
        assert_eq!(r, LossConfig::ClassWeights { weights: Some([4.0 / 6.0, 2.0]) });
        assert!(LossConfig::ClassWeights { weights: None }.resolve(&[true, true]).is_err());
    }

    #[test]
    fn dz_matches_pointwise_losses() {
        for &(z, y) in &[(0.3, true), (-1.2, false), (2.5, false), (-0.1, true)] {
            let p = sigmoid(z);
            let pt = if y { p } else { 1.0 - p };
            let (l, _) = LossConfig::Default.value_and_dz(z, y);
            assert!(close(l, cross_entropy(pt).unwrap(), 1e-12));
            let (l, _) = LossConfig::Focal { gamma: 2.0, alpha: 0.25 }.value_and_dz(z, y);
            assert!(close(l, focal_loss(pt, 2.0, 0.25).unwrap(), 1e-12));
            let w = LossConfig::ClassWeights { weights: Some([0.7, 3.0]) };
            let (l, _) = w.value_and_dz(z, y);
            assert!(close(l, weighted_ce(pt, if y { 3.0 } else { 0.7 }).unwrap(), 1e-12));
        }
    }

    proptest! {
        #[test]
        fn focal_monotone_in_p(a in 0.001f64..1.0, b in 0.001f64..1.0, g in 0.0f64..5.0, alpha in 0.01f64..=1.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(focal_loss(hi, g, alpha).unwrap() <= focal_loss(lo, g, alpha).unwrap() + 1e-15);
        }

        #[test]
        fn focal_monotone_in_gamma_above_half(p in 0.5001f64..1.0, g1 in 0.0f64..5.0, g2 in 0.0f64..5.0) {
            let (lo, hi) = if g1 < g2 { (g1, g2) } else { (g2, g1) };
            prop_assert!(focal_loss(p, hi, 1.0).unwrap() <= focal_loss(p, lo, 1.0).unwrap() + 1e-15);
        }

        #[test]
        fn weights_scale_linearly(p in 0.001f64..=1.0, w in 0.01f64..10.0, k in 0.01f64..10.0) {
            let a = weighted_ce(p, w * k).unwrap();
            let b = k * weighted_ce(p, w).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }

        #[test]
        fn multitask_symmetric_under_binary_head_permutation(
            probs in proptest::collection::vec(0.01f64..0.99, 6),
            labels in proptest::array::uniform6(any::<bool>()),
            rot in 0usize..6,
        ) {
            let gold = Characteristics {
                intensity: 2,
                incivility: labels[0], outgroup: labels[1], common_good: labels[2],
                group: labels[3], person: labels[4], institute: labels[5],
            };
            let base = multitask_loss(&HeadProbabilities { binary: probs.clone(), intensity: vec![0.2, 0.3, 0.5] }, &gold).unwrap();
            let mut p2 = probs.clone();
            p2.rotate_left(rot);
            let mut l2 = labels;
            l2.rotate_left(rot);
            let gold2 = Characteristics {
                intensity: 2,
                incivility: l2[0], outgroup: l2[1], common_good: l2[2],
                group: l2[3], person: l2[4], institute: l2[5],
            };
            let perm = multitask_loss(&HeadProbabilities { binary: p2, intensity: vec![0.2, 0.3, 0.5] }, &gold2).unwrap();
            prop_assert!((base - perm).abs() < 1e-12);
        }
    }
}
