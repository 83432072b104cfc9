//! Univariate test battery: location, normality, variance homogeneity,
//! correlation and two-sample distribution comparisons.
//!
//! Every test reports all three p-values; pick one with [`TestResult::p`].

mod correlation;
mod distribution;
mod location;
mod spread;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use correlation::{correlation, CorrelationMethod};
pub use distribution::{cramer_statistic, cramer_test, cvm_statistic, cvm_two_sample, kolmogorov_sf, ks_statistics, ks_two_sample, KsStatistics};
pub use location::{rank_sum_distribution, signed_rank_distribution, t_test, wilcoxon_rank_sum, wilcoxon_signed_rank, TMode};
pub use spread::{brown_forsythe, brown_forsythe_groups, lilliefors, lilliefors_statistic, LillieforsNull};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    TwoSided,
    Less,
    Greater,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_two_sided: f64,
    pub p_less: f64,
    pub p_greater: f64,
    pub method: String,
    pub n: Vec<usize>,
}

impl TestResult {
    pub fn p(&self, alternative: Alternative) -> f64 {
        match alternative {
            Alternative::TwoSided => self.p_two_sided,
            Alternative::Less => self.p_less,
            Alternative::Greater => self.p_greater,
        }
    }

    pub(crate) fn from_tails(statistic: f64, p_less: f64, p_greater: f64, method: impl Into<String>, n: Vec<usize>) -> Self {
        let p_less = p_less.clamp(0.0, 1.0);
        let p_greater = p_greater.clamp(0.0, 1.0);
        Self {
            statistic,
            p_two_sided: (2.0 * p_less.min(p_greater)).min(1.0),
            p_less,
            p_greater,
            method: method.into(),
            n,
        }
    }
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance with divisor `n - 1`.
pub(crate) fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

pub(crate) fn median(x: &[f64]) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Midranks (1-based) and the sizes of tied groups with more than one member.
pub(crate) fn midranks(x: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        if j > i {
            ties.push(j - i + 1);
        }
        i = j + 1;
    }
    (ranks, ties)
}

pub(crate) fn check_finite(x: &[f64]) -> crate::Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(crate::Error::Numerical("non-finite observation".into()));
    }
    Ok(())
}

pub(crate) fn sorted(x: &[f64]) -> Vec<f64> {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Generator for replicate `r` of a resampling run seeded with `seed`.
pub(crate) fn replicate_rng(seed: u64, r: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r as u64);
    rng
}

/// Standard normal distribution function.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal survival function.
pub fn norm_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// Normal approximation with continuity correction `cc` for a statistic with
/// mean `mu` and standard deviation `sd`. Returns (p_less, p_greater, p_two).
pub(crate) fn normal_tails(stat: f64, mu: f64, sd: f64, cc: f64) -> (f64, f64, f64) {
    if !(sd > 0.0) {
        return (1.0, 1.0, 1.0);
    }
    let dev = stat - mu;
    let p_less = norm_cdf((dev + cc) / sd);
    let p_greater = norm_sf((dev - cc) / sd);
    let z = (dev - dev.signum() * cc) / sd;
    let p_two = (2.0 * norm_cdf(z).min(norm_sf(z))).min(1.0);
    (p_less.min(1.0), p_greater.min(1.0), p_two)
}
