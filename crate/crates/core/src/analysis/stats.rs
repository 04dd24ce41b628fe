use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Sample variance (n − 1 denominator).
pub fn variance(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    (xs.len() >= 2).then(|| xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64)
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub mean_a: f64,
    pub mean_b: f64,
    pub n_a: usize,
    pub n_b: usize,
}

/// Two-sided Welch t-test (unequal variances).
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Degenerate(format!(
            "Welch test needs at least two values per sample (got {} and {})",
            a.len(),
            b.len()
        )));
    }
    let (ma, mb) = (mean(a).expect("non-empty"), mean(b).expect("non-empty"));
    let (va, vb) = (variance(a).expect("n ≥ 2"), variance(b).expect("n ≥ 2"));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    let base = WelchResult { t: 0.0, df: na + nb - 2.0, p: 1.0, mean_a: ma, mean_b: mb, n_a: a.len(), n_b: b.len() };
    if se2 == 0.0 {
        return if ma == mb {
            Ok(base)
        } else {
            Err(Error::Degenerate("both samples are constant with different means".into()))
        };
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let p = if t == 0.0 { 1.0 } else { beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0) };
    Ok(WelchResult { t, df, p, ..base })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Density {
    pub bandwidth: f64,
    /// `(x, density)` on a uniform grid.
    pub points: Vec<(f64, f64)>,
}

impl Density {
    pub fn integral(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
            .sum()
    }
}

pub const DENSITY_GRID: usize = 256;

/// Gaussian kernel density with Silverman's bandwidth
/// `0.9 · min(sd, IQR / 1.34) · n^(−1/5)` (falling back to whichever spread
/// is non-zero), on a 256-point grid over `[min − 3h, max + 3h]`, scaled so
/// the trapezoidal integral is 1.
pub fn density_estimate(sample: &[f64]) -> Result<Density> {
    if sample.len() < 2 {
        return Err(Error::Degenerate("density needs at least two values".into()));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let sd = variance(sample).expect("n ≥ 2").sqrt();
    let iqr = (quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25)) / 1.34;
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr),
        (true, false) => sd,
        (false, true) => iqr,
        (false, false) => return Err(Error::Degenerate("constant sample has zero bandwidth".into())),
    };
    let n = sample.len() as f64;
    let h = 0.9 * spread * n.powf(-0.2);
    let (lo, hi) = (sorted[0] - 3.0 * h, sorted[sorted.len() - 1] + 3.0 * h);
    let step = (hi - lo) / (DENSITY_GRID - 1) as f64;
    let norm = 1.0 / (n * h * (2.0 * std::f64::consts::PI).sqrt());
    let mut points: Vec<(f64, f64)> = (0..DENSITY_GRID)
        .map(|k| {
            let x = if k == DENSITY_GRID - 1 { hi } else { lo + k as f64 * step };
            let d = sample.iter().map(|xi| (-0.5 * ((x - xi) / h).powi(2)).exp()).sum::<f64>() * norm;
            (x, d)
        })
        .collect();
    let area = Density { bandwidth: h, points: points.clone() }.integral();
    for p in &mut points {
        p.1 /= area;
    }
    Ok(Density { bandwidth: h, points })
}
