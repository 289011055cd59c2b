use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Significance level.
pub const ALPHA: f64 = 0.05;

/// Largest pooled sample size handled by exact enumeration.
pub const EXACT_LIMIT: usize = 12;

const TIE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    /// Unpaired two-sample rank-sum test.
    #[default]
    RankSum,
    /// Paired signed-rank test on per-segment differences.
    SignedRank,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PMethod {
    Exact,
    Normal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    /// Rank sum of the first sample, or W+ for the signed-rank test.
    pub statistic: f64,
    /// Two-sided.
    pub p_value: f64,
    pub method: PMethod,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub model_a: String,
    pub model_b: String,
    pub test: TestKind,
    pub statistic: f64,
    pub p_value: f64,
    pub method: PMethod,
    pub significant: bool,
}

/// Run `test` on two prediction vectors and label the outcome.
pub fn compare(model_a: &str, a: &[f64], model_b: &str, b: &[f64], test: TestKind) -> Result<SignificanceResult> {
    let o = match test {
        TestKind::RankSum => wilcoxon_rank_sum(a, b)?,
        TestKind::SignedRank => wilcoxon_signed_rank(a, b)?,
    };
    Ok(SignificanceResult {
        model_a: model_a.to_string(),
        model_b: model_b.to_string(),
        test,
        statistic: o.statistic,
        p_value: o.p_value,
        method: o.method,
        significant: o.p_value < ALPHA,
    })
}

/// 1-based ranks with ties sharing their mean rank.
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
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Σ (t³ − t) over tie groups.
fn tie_term(ranks: &[f64]) -> f64 {
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut total = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        total += t * t * t - t;
        i = j + 1;
    }
    total
}

fn normal_two_sided(deviation: f64, variance: f64) -> f64 {
    if variance <= 0.0 {
        return 1.0;
    }
    let z = ((deviation.abs() - 0.5).max(0.0)) / variance.sqrt();
    let phi = Normal::new(0.0, 1.0).expect("unit normal").cdf(z);
    (2.0 * (1.0 - phi)).clamp(0.0, 1.0)
}

/// Two-sided rank-sum test. Exact by enumeration when `m + n ≤ 12`,
/// otherwise the tie-corrected normal approximation with continuity
/// correction.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<TestOutcome> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty { what: "Wilcoxon sample" });
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Domain("Wilcoxon samples must be finite".into()));
    }
    let (m, n) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let w: f64 = ranks[..m].iter().sum();
    let total = (m + n) as f64;
    let expected = m as f64 * (total + 1.0) / 2.0;

    if m + n <= EXACT_LIMIT {
        let observed = (w - expected).abs();
        let (mut hits, mut count) = (0u64, 0u64);
        for mask in 0u32..(1 << (m + n)) {
            if mask.count_ones() as usize != m {
                continue;
            }
            let s: f64 = (0..m + n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            count += 1;
            if (s - expected).abs() >= observed - TIE_TOL {
                hits += 1;
            }
        }
        return Ok(TestOutcome {
            statistic: w,
            p_value: hits as f64 / count as f64,
            method: PMethod::Exact,
        });
    }

    let (mf, nf) = (m as f64, n as f64);
    let variance = mf * nf / 12.0 * ((total + 1.0) - tie_term(&ranks) / (total * (total - 1.0)));
    Ok(TestOutcome {
        statistic: w,
        p_value: normal_two_sided(w - expected, variance),
        method: PMethod::Normal,
    })
}

/// Two-sided paired signed-rank test on `a − b`. Zero differences are
/// dropped; exact when at most 12 non-zero differences remain.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<TestOutcome> {
    if a.len() != b.len() {
        return Err(Error::dim("wilcoxon_signed_rank", &[a.len()], &[b.len()]));
    }
    if a.is_empty() {
        return Err(Error::Empty { what: "Wilcoxon sample" });
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|v| *v != 0.0).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("Wilcoxon samples must be finite".into()));
    }
    if d.is_empty() {
        return Ok(TestOutcome {
            statistic: 0.0,
            p_value: 1.0,
            method: PMethod::Exact,
        });
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = midranks(&abs);
    let w_plus: f64 = ranks.iter().zip(&d).filter(|(_, v)| **v > 0.0).map(|(r, _)| r).sum();
    let nz = d.len();
    let nf = nz as f64;
    let expected = nf * (nf + 1.0) / 4.0;

    if nz <= EXACT_LIMIT {
        let observed = (w_plus - expected).abs();
        let mut hits = 0u64;
        for mask in 0u32..(1 << nz) {
            let s: f64 = (0..nz).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            if (s - expected).abs() >= observed - TIE_TOL {
                hits += 1;
            }
        }
        return Ok(TestOutcome {
            statistic: w_plus,
            p_value: hits as f64 / (1u64 << nz) as f64,
            method: PMethod::Exact,
        });
    }
    let variance = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term(&ranks) / 48.0;
    Ok(TestOutcome {
        statistic: w_plus,
        p_value: normal_two_sided(w_plus - expected, variance),
        method: PMethod::Normal,
    })
}
