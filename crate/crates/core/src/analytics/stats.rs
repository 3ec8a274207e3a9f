//! Mann-Whitney U with rank-biserial effect size, and Welch's t-test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

/// Largest `n1 * n2` for which the exact null distribution is used.
pub const EXACT_LIMIT: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectLabel {
    Negligible,
    Small,
    Medium,
    Large,
}

impl EffectLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            EffectLabel::Negligible => "negligible",
            EffectLabel::Small => "small",
            EffectLabel::Medium => "medium",
            EffectLabel::Large => "large",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub n1: usize,
    pub n2: usize,
    /// Number of (a, b) pairs with a > b, ties counting one half.
    pub u: f64,
    pub z: f64,
    /// Two-sided p-value; exact when `method` is `Exact`.
    pub p: f64,
    /// Tie-corrected normal approximation with continuity correction.
    pub p_normal: f64,
    pub r: f64,
    pub label: EffectLabel,
    pub method: PValueMethod,
}

/// Midranks (1-based) of `values`.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

pub fn rank_biserial(u: f64, n1: usize, n2: usize) -> (f64, EffectLabel) {
    let r = 1.0 - 2.0 * u / (n1 * n2) as f64;
    let mag = r.abs();
    let label = if mag < 0.1 {
        EffectLabel::Negligible
    } else if mag < 0.3 {
        EffectLabel::Small
    } else if mag < 0.5 {
        EffectLabel::Medium
    } else {
        EffectLabel::Large
    };
    (r, label)
}

/// Number of arrangements of the null distribution of U, indexed by U.
fn u_counts(n1: usize, n2: usize) -> Vec<f64> {
    // f[i][j][u] = f[i-1][j][u-j] + f[i][j-1][u]
    let max_u = n1 * n2;
    let mut table = vec![vec![Vec::new(); n2 + 1]; n1 + 1];
    for i in 0..=n1 {
        for j in 0..=n2 {
            let mut f = vec![0.0; i * j + 1];
            if i == 0 || j == 0 {
                f[0] = 1.0;
            } else {
                for (u, slot) in f.iter_mut().enumerate() {
                    let mut v = 0.0;
                    if u >= j {
                        v += table[i - 1][j].get(u - j).copied().unwrap_or(0.0);
                    }
                    v += table[i][j - 1].get(u).copied().unwrap_or(0.0);
                    *slot = v;
                }
            }
            table[i][j] = f;
        }
    }
    let counts = std::mem::take(&mut table[n1][n2]);
    debug_assert_eq!(counts.len(), max_u + 1);
    counts
}

fn exact_p(u: f64, n1: usize, n2: usize) -> f64 {
    let counts = u_counts(n1, n2);
    let total: f64 = counts.iter().sum();
    let u = u.round() as usize;
    let lower: f64 = counts[..=u].iter().sum::<f64>() / total;
    let upper: f64 = counts[u..].iter().sum::<f64>() / total;
    (2.0 * lower.min(upper)).min(1.0)
}

pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("Mann-Whitney sample"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("Mann-Whitney sample contains non-finite values".into()));
    }
    let (n1, n2) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let rank_sum_a: f64 = ranks[..n1].iter().sum();
    let u = rank_sum_a - (n1 * (n1 + 1)) as f64 / 2.0;

    let n = (n1 + n2) as f64;
    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut has_ties = false;
    for group in sorted.chunk_by(|x, y| x == y) {
        let t = group.len() as f64;
        if group.len() > 1 {
            has_ties = true;
        }
        tie_term += t * t * t - t;
    }
    let mean = (n1 * n2) as f64 / 2.0;
    let var = (n1 * n2) as f64 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)).max(1.0));
    let (z, p_normal) = if var <= 0.0 {
        (0.0, 1.0)
    } else {
        let sd = var.sqrt();
        let diff = u - mean;
        let corrected = (diff.abs() - 0.5).max(0.0);
        let z = corrected.copysign(diff) / sd;
        let std = Normal::standard();
        (z, (2.0 * (1.0 - std.cdf(z.abs()))).clamp(0.0, 1.0))
    };
    let (p, method) = if !has_ties && n1 * n2 <= EXACT_LIMIT {
        (exact_p(u, n1, n2), PValueMethod::Exact)
    } else {
        (p_normal, PValueMethod::Normal)
    };
    let (r, label) = rank_biserial(u, n1, n2);
    Ok(TestResult {
        n1,
        n2,
        u,
        z,
        p,
        p_normal,
        r,
        label,
        method,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub mean_diff: f64,
}

/// Welch's unequal-variance two-sample t-test, two-sided.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<WelchResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Empty("Welch t-test needs two observations per sample"));
    }
    let moments = |x: &[f64]| {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
        (n, m, v)
    };
    let (na, ma, va) = moments(a);
    let (nb, mb, vb) = moments(b);
    let se2 = va / na + vb / nb;
    let mean_diff = ma - mb;
    if se2 == 0.0 {
        let p = if mean_diff == 0.0 { 1.0 } else { 0.0 };
        return Ok(WelchResult {
            t: if mean_diff == 0.0 { 0.0 } else { f64::INFINITY.copysign(mean_diff) },
            df: na + nb - 2.0,
            p,
            mean_diff,
        });
    }
    let t = mean_diff / se2.sqrt();
    let df = se2 * se2
        / ((va / na).powi(2) / (na - 1.0) + (vb / nb).powi(2) / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Numerical(e.to_string()))?;
    let p = (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0);
    Ok(WelchResult { t, df, p, mean_diff })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midranks_average_ties() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn constant_samples() {
        let t = mann_whitney_u(&[2.0; 5], &[2.0; 4]).unwrap();
        assert_eq!(t.u, 10.0);
        assert_eq!(t.p, 1.0);
        assert_eq!(t.label, EffectLabel::Negligible);
    }

    #[test]
    fn full_separation() {
        let a: Vec<f64> = (10..20).map(f64::from).collect();
        let b: Vec<f64> = (0..10).map(f64::from).collect();
        let t = mann_whitney_u(&a, &b).unwrap();
        assert_eq!(t.u, 100.0);
        assert!(t.p < 1e-4 && t.p_normal < 1e-3);
        assert_eq!((t.r, t.label), (-1.0, EffectLabel::Large));
        assert_eq!(t.method, PValueMethod::Exact);
        // two orderings out of C(20, 10) reach this extreme
        assert!((t.p - 2.0 / 184_756.0).abs() < 1e-15);
    }

    #[test]
    fn effect_size_examples() {
        assert_eq!(rank_biserial(12.0, 4, 6), (0.0, EffectLabel::Negligible));
        assert_eq!(rank_biserial(0.0, 4, 6), (1.0, EffectLabel::Large));
        let (r, l) = rank_biserial(0.8 * 24.0, 4, 6);
        assert!((r + 0.6).abs() < 1e-12 && l == EffectLabel::Large);
    }

    #[test]
    fn null_counts_are_binomial_totals() {
        // sum over U equals C(n1 + n2, n1)
        assert_eq!(u_counts(3, 4).iter().sum::<f64>(), 35.0);
        assert_eq!(u_counts(8, 8).iter().sum::<f64>(), 12_870.0);
        let c = u_counts(2, 2);
        assert_eq!(c, vec![1.0, 1.0, 2.0, 1.0, 1.0]);
    }

    #[test]
    fn welch_examples() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [1.0, 2.0, 3.0, 4.0, 5.0];
        let w = welch_t(&a, &b).unwrap();
        assert_eq!(w.t, 0.0);
        assert!((w.p - 1.0).abs() < 1e-12);
        let c = [11.0, 12.0, 13.0, 14.0, 15.0];
        let w = welch_t(&c, &a).unwrap();
        // t = 10 / sqrt(2.5/5 + 2.5/5) = 10, df = 8
        assert!((w.t - 10.0).abs() < 1e-12 && (w.df - 8.0).abs() < 1e-12);
        assert!(w.p < 1e-4);
        assert!(welch_t(&[1.0], &a).is_err());
    }
}
