use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_finite, replicate_rng, sorted, TestResult};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsStatistics {
    /// `sup |F_x - F_y|`
    pub d: f64,
    /// `sup (F_x - F_y)`
    pub d_plus: f64,
    /// `sup (F_y - F_x)`
    pub d_minus: f64,
}

/// Empirical CDF differences evaluated at every distinct pooled value.
pub fn ks_statistics(x: &[f64], y: &[f64]) -> Result<KsStatistics> {
    check_finite(x)?;
    check_finite(y)?;
    if x.is_empty() || y.is_empty() {
        return Err(Error::DegenerateSample("K-S test needs both samples non-empty".into()));
    }
    let (xs, ys) = (sorted(x), sorted(y));
    let (m, n) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0, 0);
    let (mut dp, mut dm) = (0.0f64, 0.0f64);
    while i < xs.len() || j < ys.len() {
        let z = match (xs.get(i), ys.get(j)) {
            (Some(a), Some(b)) => a.min(*b),
            (Some(a), None) => *a,
            (None, Some(b)) => *b,
            (None, None) => unreachable!(),
        };
        while i < xs.len() && xs[i] == z {
            i += 1;
        }
        while j < ys.len() && ys[j] == z {
            j += 1;
        }
        let diff = i as f64 / m - j as f64 / n;
        dp = dp.max(diff);
        dm = dm.max(-diff);
    }
    Ok(KsStatistics { d: dp.max(dm), d_plus: dp, d_minus: dm })
}

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let mut cdf = 0.0;
        for k in 1..=20 {
            let j = (2 * k - 1) as f64;
            cdf += (-j * j * pi2 / (8.0 * lambda * lambda)).exp();
        }
        (1.0 - cdf * (2.0 * std::f64::consts::PI).sqrt() / lambda).clamp(0.0, 1.0)
    } else {
        let mut sf = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            sf += if k % 2 == 1 { term } else { -term };
            if term < 1e-300 {
                break;
            }
        }
        (2.0 * sf).clamp(0.0, 1.0)
    }
}

/// Two-sample Kolmogorov–Smirnov test with asymptotic p-values. `p_greater`
/// refers to the alternative that the CDF of `x` lies above that of `y`
/// (statistic `d_plus`), `p_less` to the reverse.
pub fn ks_two_sample(x: &[f64], y: &[f64]) -> Result<TestResult> {
    let s = ks_statistics(x, y)?;
    let (m, n) = (x.len() as f64, y.len() as f64);
    let en = m * n / (m + n);
    Ok(TestResult {
        statistic: s.d,
        p_two_sided: kolmogorov_sf(en.sqrt() * s.d),
        p_less: (-2.0 * en * s.d_minus * s.d_minus).exp(),
        p_greater: (-2.0 * en * s.d_plus * s.d_plus).exp(),
        method: "two-sample Kolmogorov-Smirnov test (asymptotic)".into(),
        n: vec![x.len(), y.len()],
    })
}

fn kernel_mean(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for u in a {
        for v in b {
            s += (u - v).abs();
        }
    }
    s / 2.0
}

/// Baringhaus–Franz statistic with kernel `phi(z) = sqrt(z) / 2` on squared
/// distances.
pub fn cramer_statistic(x: &[f64], y: &[f64]) -> f64 {
    let (m, n) = (x.len() as f64, y.len() as f64);
    m * n / (m + n) * (2.0 / (m * n) * kernel_mean(x, y) - kernel_mean(x, x) / (m * m) - kernel_mean(y, y) / (n * n))
}

fn count_tails(reps: &[f64], t: f64, scale: f64) -> (f64, f64) {
    // ties within rounding of the observed statistic count on both sides
    let tol = 1e-12 * (t.abs() + scale);
    let b = reps.len() as f64;
    let ge = reps.iter().filter(|&&s| s >= t - tol).count() as f64;
    let le = reps.iter().filter(|&&s| s <= t + tol).count() as f64;
    (le / b, ge / b)
}

fn check_two(x: &[f64], y: &[f64], replicates: usize) -> Result<()> {
    check_finite(x)?;
    check_finite(y)?;
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::DegenerateSample("test needs n >= 2 per sample".into()));
    }
    if replicates == 0 {
        return Err(Error::InvalidParameter("need at least one resampling replicate".into()));
    }
    Ok(())
}

/// Cramér two-sample test; the p-value is the fraction of ordinary bootstrap
/// replicates of the pooled sample with `T* >= T`.
pub fn cramer_test(x: &[f64], y: &[f64], replicates: usize, seed: u64) -> Result<TestResult> {
    check_two(x, y, replicates)?;
    let (xs, ys) = (sorted(x), sorted(y));
    let t = cramer_statistic(&xs, &ys);
    let pooled: Vec<f64> = xs.iter().chain(&ys).copied().collect();
    let m = xs.len();
    let reps: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(seed, r);
            let draw: Vec<f64> = (0..pooled.len()).map(|_| pooled[rng.random_range(0..pooled.len())]).collect();
            cramer_statistic(&draw[..m], &draw[m..])
        })
        .collect();
    let scale = kernel_mean(&pooled, &pooled) / (pooled.len() * pooled.len()) as f64;
    let (le, ge) = count_tails(&reps, t, scale);
    Ok(TestResult {
        statistic: t,
        p_two_sided: ge,
        p_less: le,
        p_greater: ge,
        method: format!("Cramer test, phi(z) = sqrt(z)/2 ({replicates} bootstrap replicates)"),
        n: vec![x.len(), y.len()],
    })
}

/// Two-sample Cramér–von Mises statistic. Without ties the pooled-rank form
/// is used; with ties the defining sum over pooled observations.
pub fn cvm_statistic(x: &[f64], y: &[f64]) -> f64 {
    let (xs, ys) = (sorted(x), sorted(y));
    let (m, n) = (xs.len(), ys.len());
    let (mf, nf) = (m as f64, n as f64);
    let pooled = sorted(&xs.iter().chain(&ys).copied().collect::<Vec<_>>());
    let has_ties = pooled.windows(2).any(|w| w[0] == w[1]);
    if !has_ties {
        let mut u = 0.0;
        let (mut i, mut j) = (0usize, 0usize);
        for (k, z) in pooled.iter().enumerate() {
            let rank = (k + 1) as f64;
            if i < m && xs[i] == *z {
                i += 1;
                u += mf * (rank - i as f64).powi(2);
            } else {
                j += 1;
                u += nf * (rank - j as f64).powi(2);
            }
        }
        let big_n = mf + nf;
        return u / (mf * nf * big_n) - (4.0 * mf * nf - 1.0) / (6.0 * big_n);
    }
    let big_n = pooled.len() as f64;
    let mut total = 0.0;
    let (mut i, mut j) = (0usize, 0usize);
    let mut k = 0;
    while k < pooled.len() {
        let z = pooled[k];
        let mut mult = 0;
        while k < pooled.len() && pooled[k] == z {
            k += 1;
            mult += 1;
        }
        while i < m && xs[i] <= z {
            i += 1;
        }
        while j < n && ys[j] <= z {
            j += 1;
        }
        total += mult as f64 * (i as f64 / mf - j as f64 / nf).powi(2);
    }
    mf * nf / (big_n * big_n) * total
}

/// Cramér–von Mises two-sample test with a seeded permutation p-value.
pub fn cvm_two_sample(x: &[f64], y: &[f64], replicates: usize, seed: u64) -> Result<TestResult> {
    check_two(x, y, replicates)?;
    let t = cvm_statistic(x, y);
    let pooled: Vec<f64> = sorted(x).into_iter().chain(sorted(y)).collect();
    let m = x.len();
    let reps: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(seed, r);
            let mut perm = pooled.clone();
            perm.shuffle(&mut rng);
            cvm_statistic(&perm[..m], &perm[m..])
        })
        .collect();
    let (le, ge) = count_tails(&reps, t, 1.0);
    Ok(TestResult {
        statistic: t,
        p_two_sided: ge,
        p_less: le,
        p_greater: ge,
        method: format!("two-sample Cramer-von Mises test ({replicates} permutations)"),
        n: vec![x.len(), y.len()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_edge_cases() {
        let x = [1.0, 2.0, 2.0, 5.0];
        let r = ks_two_sample(&x, &[5.0, 2.0, 1.0, 2.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_two_sided, 1.0);
        let s = ks_statistics(&[1.0, 2.0], &[3.0, 4.0, 5.0]).unwrap();
        assert_eq!((s.d, s.d_plus, s.d_minus), (1.0, 1.0, 0.0));
    }

    #[test]
    fn kolmogorov_branches_agree() {
        // both series are valid near the switch point
        let lam: f64 = 1.18;
        let mut alt = 0.0;
        for k in 1..50 {
            let kf = k as f64;
            alt += 2.0 * if k % 2 == 1 { 1.0 } else { -1.0 } * (-2.0 * kf * kf * lam * lam).exp();
        }
        assert!((kolmogorov_sf(lam - 1e-12) - alt).abs() < 1e-10);
        assert!((kolmogorov_sf(0.5) - 0.9639452436648751).abs() < 1e-12);
    }

    #[test]
    fn identical_samples() {
        let x = [0.3, 1.0, 2.5, 2.5, 4.0];
        assert_eq!(cramer_statistic(&sorted(&x), &sorted(&x)), 0.0);
        let r = cramer_test(&x, &x, 200, 1).unwrap();
        assert_eq!(r.p_greater, 1.0);
        assert_eq!(cvm_statistic(&x, &x), 0.0);
    }

    #[test]
    fn rank_form_minimum_without_ties() {
        // perfectly interleaved samples attain the minimum
        let x = [1.0, 3.0, 5.0];
        let y = [2.0, 4.0, 6.0];
        let t = cvm_statistic(&x, &y);
        assert!(t >= 0.0 && t < 0.1);
    }
}
