use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{check_finite, mean, midranks, normal_tails, variance, TestResult};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TMode {
    Welch,
    Pooled,
    Paired,
}

const EXACT_RANK_SUM_MAX: usize = 20;
const EXACT_SIGNED_RANK_MAX: usize = 15;

fn t_tails(t: f64, df: f64) -> (f64, f64) {
    if t.is_nan() {
        return (1.0, 1.0);
    }
    if t.is_infinite() {
        return if t > 0.0 { (1.0, 0.0) } else { (0.0, 1.0) };
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    // evaluate the smaller tail directly to keep relative accuracy
    if t >= 0.0 {
        let g = dist.sf(t);
        (1.0 - g, g)
    } else {
        let l = dist.cdf(t);
        (l, 1.0 - l)
    }
}

/// Student t test. Paired mode tests the mean of `x - y`.
pub fn t_test(x: &[f64], y: &[f64], mode: TMode) -> Result<TestResult> {
    check_finite(x)?;
    check_finite(y)?;
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::DegenerateSample("t test needs at least two observations per sample".into()));
    }
    let (diff, se, df) = match mode {
        TMode::Paired => {
            if x.len() != y.len() {
                return Err(Error::LengthMismatch(x.len(), y.len()));
            }
            let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
            let n = d.len() as f64;
            (mean(&d), (variance(&d) / n).sqrt(), n - 1.0)
        }
        TMode::Pooled => {
            let (m, n) = (x.len() as f64, y.len() as f64);
            let sp = ((m - 1.0) * variance(x) + (n - 1.0) * variance(y)) / (m + n - 2.0);
            (mean(x) - mean(y), (sp * (1.0 / m + 1.0 / n)).sqrt(), m + n - 2.0)
        }
        TMode::Welch => {
            let (m, n) = (x.len() as f64, y.len() as f64);
            let (a, b) = (variance(x) / m, variance(y) / n);
            let df = (a + b).powi(2) / (a * a / (m - 1.0) + b * b / (n - 1.0));
            (mean(x) - mean(y), (a + b).sqrt(), df)
        }
    };
    let method = match mode {
        TMode::Welch => "Welch two-sample t test",
        TMode::Pooled => "pooled-variance two-sample t test",
        TMode::Paired => "paired t test",
    };
    let n = if mode == TMode::Paired { vec![x.len()] } else { vec![x.len(), y.len()] };
    if se == 0.0 {
        if diff == 0.0 {
            return Ok(TestResult { statistic: 0.0, p_two_sided: 1.0, p_less: 1.0, p_greater: 1.0, method: method.into(), n });
        }
        let t = diff.signum() * f64::INFINITY;
        let (l, g) = t_tails(t, 1.0);
        return Ok(TestResult::from_tails(t, l, g, method, n));
    }
    let t = diff / se;
    let (l, g) = t_tails(t, if df.is_finite() { df } else { 1e12 });
    Ok(TestResult::from_tails(t, l, g, method, n))
}

/// Null distribution of the rank sum of `m` items among `m + n` distinct
/// ranks: `pmf[w]` for rank sums `w = 0 ..= max`.
pub fn rank_sum_distribution(m: usize, n: usize) -> Vec<f64> {
    let total = m + n;
    let max = (total * (total + 1)) / 2;
    // counts[k][s]: subsets of size k with rank sum s
    let mut counts = vec![vec![0.0f64; max + 1]; m + 1];
    counts[0][0] = 1.0;
    for r in 1..=total {
        for k in (1..=m.min(r)).rev() {
            for s in (r..=max).rev() {
                let c = counts[k - 1][s - r];
                if c != 0.0 {
                    counts[k][s] += c;
                }
            }
        }
    }
    let all: f64 = counts[m].iter().sum();
    counts[m].iter().map(|c| c / all).collect()
}

/// Wilcoxon rank-sum test; the statistic is the sum of the midranks of `x`
/// in the pooled sample.
pub fn wilcoxon_rank_sum(x: &[f64], y: &[f64]) -> Result<TestResult> {
    check_finite(x)?;
    check_finite(y)?;
    if x.is_empty() || y.is_empty() {
        return Err(Error::DegenerateSample("rank-sum test needs both samples non-empty".into()));
    }
    let (m, n) = (x.len(), y.len());
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let w: f64 = ranks[..m].iter().sum();
    let sizes = vec![m, n];
    if m + n <= EXACT_RANK_SUM_MAX && ties.is_empty() {
        let pmf = rank_sum_distribution(m, n);
        let w = w.round() as usize;
        let p_less: f64 = pmf[..=w].iter().sum();
        let p_greater: f64 = pmf[w..].iter().sum();
        return Ok(TestResult::from_tails(w as f64, p_less, p_greater, "Wilcoxon rank-sum test (exact)", sizes));
    }
    let (mf, nf) = (m as f64, n as f64);
    let big_n = mf + nf;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (big_n * (big_n - 1.0));
    let var = mf * nf / 12.0 * ((big_n + 1.0) - tie_term);
    let mu = mf * (big_n + 1.0) / 2.0;
    let (l, g, two) = normal_tails(w, mu, var.max(0.0).sqrt(), 0.5);
    Ok(TestResult {
        statistic: w,
        p_two_sided: two,
        p_less: l,
        p_greater: g,
        method: "Wilcoxon rank-sum test (normal approximation, continuity and tie corrected)".into(),
        n: sizes,
    })
}

/// Null distribution of the sum of a random subset of `weights`, each item
/// included independently with probability 1/2: `pmf[s]`.
pub fn signed_rank_distribution(weights: &[usize]) -> Vec<f64> {
    let max: usize = weights.iter().sum();
    let mut pmf = vec![0.0f64; max + 1];
    pmf[0] = 1.0;
    let mut reach = 0;
    for &w in weights {
        for s in (0..=reach).rev() {
            let p = pmf[s];
            if p != 0.0 {
                pmf[s] = 0.5 * p;
                pmf[s + w] += 0.5 * p;
            }
        }
        reach += w;
    }
    pmf
}

/// Wilcoxon signed-rank test on paired differences. Zero differences are
/// dropped; the statistic is the sum of ranks of positive differences.
pub fn wilcoxon_signed_rank(d: &[f64]) -> Result<TestResult> {
    check_finite(d)?;
    let nz: Vec<f64> = d.iter().copied().filter(|&v| v != 0.0).collect();
    if nz.is_empty() {
        return Err(Error::DegenerateSample("all paired differences are zero".into()));
    }
    let abs: Vec<f64> = nz.iter().map(|v| v.abs()).collect();
    let (ranks, ties) = midranks(&abs);
    let v: f64 = nz.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let n = nz.len();
    let sizes = vec![n];
    if n <= EXACT_SIGNED_RANK_MAX {
        // midranks are multiples of 1/2, so doubled ranks are integers
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let pmf = signed_rank_distribution(&doubled);
        let v2 = (2.0 * v).round() as usize;
        let p_less: f64 = pmf[..=v2].iter().sum();
        let p_greater: f64 = pmf[v2..].iter().sum();
        return Ok(TestResult::from_tails(v, p_less, p_greater, "Wilcoxon signed-rank test (exact, zeros dropped)", sizes));
    }
    let nf = n as f64;
    let mu = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let (l, g, two) = normal_tails(v, mu, var.max(0.0).sqrt(), 0.5);
    Ok(TestResult {
        statistic: v,
        p_two_sided: two,
        p_less: l,
        p_greater: g,
        method: "Wilcoxon signed-rank test (normal approximation, zeros dropped)".into(),
        n: sizes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_paired_samples() {
        let x = [1.0, 2.5, 3.0, 4.2];
        let r = t_test(&x, &x, TMode::Paired).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_two_sided, 1.0);
        let r = t_test(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 4.0], TMode::Pooled).unwrap();
        assert_eq!(r.statistic, 0.0);
    }

    #[test]
    fn paired_length_mismatch() {
        assert_eq!(t_test(&[1.0, 2.0], &[1.0, 2.0, 3.0], TMode::Paired), Err(Error::LengthMismatch(2, 3)));
    }

    #[test]
    fn constant_samples() {
        let r = t_test(&[2.0, 2.0], &[2.0, 2.0, 2.0], TMode::Welch).unwrap();
        assert_eq!(r.p_two_sided, 1.0);
        let r = t_test(&[1.0, 1.0], &[2.0, 2.0], TMode::Pooled).unwrap();
        assert_eq!(r.p_two_sided, 0.0);
        assert_eq!(r.p_greater, 1.0);
    }

    #[test]
    fn extreme_rank_sum() {
        let r = wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0, 7.0]).unwrap();
        assert!((r.p_less - 1.0 / 35.0).abs() < 1e-15);
        assert_eq!(r.statistic, 6.0);
    }

    #[test]
    fn tied_equal_samples_are_central() {
        let x = [1.0, 2.0, 2.0, 3.0, 5.0];
        let r = wilcoxon_rank_sum(&x, &x).unwrap();
        assert!(r.p_two_sided >= 0.9);
    }

    #[test]
    fn all_positive_differences() {
        let r = wilcoxon_signed_rank(&[0.5, 1.0, 2.0, 3.0, 4.0, 7.0]).unwrap();
        assert!((r.p_greater - 1.0 / 64.0).abs() < 1e-15);
        let r = wilcoxon_signed_rank(&[-1.0, 1.0, -3.0, 3.0]).unwrap();
        assert_eq!(r.statistic, 5.0);
        assert!(r.p_two_sided >= 0.9);
        assert!(matches!(wilcoxon_signed_rank(&[0.0, 0.0]), Err(Error::DegenerateSample(_))));
    }

    #[test]
    fn large_sample_uses_normal_approximation() {
        let x: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let y: Vec<f64> = (0..30).map(|i| i as f64 + 0.5).collect();
        let r = wilcoxon_rank_sum(&x, &y).unwrap();
        assert!(r.method.contains("normal"));
        assert!(r.p_two_sided > 0.5);
    }
}
