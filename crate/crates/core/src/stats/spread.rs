use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use super::{check_finite, mean, median, norm_cdf, replicate_rng, sorted, variance, TestResult};
use crate::error::{Error, Result};

/// Kolmogorov distance between the empirical distribution of `x` and the
/// normal distribution with the sample mean and standard deviation.
pub fn lilliefors_statistic(x: &[f64]) -> Result<f64> {
    check_finite(x)?;
    if x.len() < 4 {
        return Err(Error::DegenerateSample("Lilliefors test needs n >= 4".into()));
    }
    let m = mean(x);
    let sd = variance(x).sqrt();
    if !(sd > 0.0) {
        return Err(Error::DegenerateSample("zero sample variance".into()));
    }
    let s = sorted(x);
    let n = s.len() as f64;
    let mut d = 0.0f64;
    for (i, v) in s.iter().enumerate() {
        let f = norm_cdf((v - m) / sd);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

/// Monte Carlo null distribution of the Lilliefors statistic for one sample
/// size, reusable across many tests.
#[derive(Clone, Debug)]
pub struct LillieforsNull {
    pub n: usize,
    /// Sorted simulated statistics.
    stats: Vec<f64>,
}

impl LillieforsNull {
    pub fn simulate(n: usize, replicates: usize, seed: u64) -> Result<Self> {
        if n < 4 || replicates == 0 {
            return Err(Error::InvalidParameter("Lilliefors null needs n >= 4 and at least one replicate".into()));
        }
        let mut stats: Vec<f64> = (0..replicates)
            .into_par_iter()
            .map(|r| {
                let mut rng = replicate_rng(seed, r);
                let sample: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                lilliefors_statistic(&sample).expect("normal draws have positive variance")
            })
            .collect();
        stats.sort_by(f64::total_cmp);
        Ok(Self { n, stats })
    }

    pub fn replicates(&self) -> usize {
        self.stats.len()
    }

    /// Fraction of simulated statistics `>= d`.
    pub fn upper_tail(&self, d: f64) -> f64 {
        let below = self.stats.partition_point(|&s| s < d);
        (self.stats.len() - below) as f64 / self.stats.len() as f64
    }

    /// Fraction of simulated statistics `<= d`.
    pub fn lower_tail(&self, d: f64) -> f64 {
        self.stats.partition_point(|&s| s <= d) as f64 / self.stats.len() as f64
    }

    pub fn test(&self, x: &[f64]) -> Result<TestResult> {
        if x.len() != self.n {
            return Err(Error::LengthMismatch(x.len(), self.n));
        }
        let d = lilliefors_statistic(x)?;
        let upper = self.upper_tail(d);
        Ok(TestResult {
            statistic: d,
            p_two_sided: upper,
            p_less: self.lower_tail(d),
            p_greater: upper,
            method: format!("Lilliefors normality test (Monte Carlo, {} replicates)", self.stats.len()),
            n: vec![x.len()],
        })
    }
}

/// Lilliefors test with a freshly simulated null of `replicates` samples.
pub fn lilliefors(x: &[f64], replicates: usize, seed: u64) -> Result<TestResult> {
    lilliefors_statistic(x)?;
    LillieforsNull::simulate(x.len(), replicates, seed)?.test(x)
}

/// Brown–Forsythe test for equal spread across any number of groups: one-way
/// ANOVA on absolute deviations from the group medians.
pub fn brown_forsythe_groups(groups: &[&[f64]]) -> Result<TestResult> {
    if groups.len() < 2 {
        return Err(Error::InvalidParameter("Brown-Forsythe test needs at least two groups".into()));
    }
    for g in groups {
        check_finite(g)?;
        if g.len() < 2 {
            return Err(Error::DegenerateSample("Brown-Forsythe test needs n >= 2 per group".into()));
        }
    }
    let z: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| {
            let med = median(g);
            g.iter().map(|v| (v - med).abs()).collect()
        })
        .collect();
    let k = z.len() as f64;
    let total: usize = z.iter().map(Vec::len).sum();
    let grand = z.iter().flatten().sum::<f64>() / total as f64;
    let means: Vec<f64> = z.iter().map(|g| mean(g)).collect();
    let between: f64 = z.iter().zip(&means).map(|(g, m)| g.len() as f64 * (m - grand).powi(2)).sum();
    let within: f64 = z.iter().zip(&means).map(|(g, m)| g.iter().map(|v| (v - m).powi(2)).sum::<f64>()).sum();
    let (df1, df2) = (k - 1.0, total as f64 - k);
    let n = groups.iter().map(|g| g.len()).collect();
    let method = "Brown-Forsythe test (absolute deviations from medians)";
    let f = if within == 0.0 {
        if between == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (between / df1) / (within / df2)
    };
    let p = if f == 0.0 {
        1.0
    } else if f.is_infinite() {
        0.0
    } else {
        FisherSnedecor::new(df1, df2).expect("positive df").sf(f)
    };
    Ok(TestResult { statistic: f, p_two_sided: p, p_less: 1.0 - p, p_greater: p, method: method.into(), n })
}

pub fn brown_forsythe(x: &[f64], y: &[f64]) -> Result<TestResult> {
    brown_forsythe_groups(&[x, y])
}
