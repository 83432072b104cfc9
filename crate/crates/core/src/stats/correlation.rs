use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{check_finite, mean, midranks, norm_cdf, norm_sf, TestResult};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationMethod {
    Pearson,
    Spearman,
    Kendall,
}

fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateSample("zero variance in a correlation argument".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Tails of `r` through `t = r sqrt((n-2)/(1-r^2))` on `n - 2` df.
fn t_transform_tails(r: f64, n: usize) -> (f64, f64) {
    if r.abs() == 1.0 {
        return if r > 0.0 { (1.0, 0.0) } else { (0.0, 1.0) };
    }
    let df = n as f64 - 2.0;
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("n >= 3");
    (dist.cdf(t), dist.sf(t))
}

/// Kendall's tau-b and the tie-corrected variance of the S statistic.
fn kendall(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let n = x.len();
    let mut s = 0.0;
    let (mut tied_x, mut tied_y) = (0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let a = (x[i] - x[j]).signum() * (x[i] != x[j]) as u8 as f64;
            let b = (y[i] - y[j]).signum() * (y[i] != y[j]) as u8 as f64;
            s += a * b;
            tied_x += (a == 0.0) as u8 as f64;
            tied_y += (b == 0.0) as u8 as f64;
        }
    }
    let n0 = (n * (n - 1) / 2) as f64;
    let denom = ((n0 - tied_x) * (n0 - tied_y)).sqrt();
    if denom == 0.0 {
        return Err(Error::DegenerateSample("all pairs tied in a correlation argument".into()));
    }
    let tau = s / denom;
    let (_, tx) = midranks(x);
    let (_, ty) = midranks(y);
    let nf = n as f64;
    let sum = |t: &[usize], f: &dyn Fn(f64) -> f64| t.iter().map(|&k| f(k as f64)).sum::<f64>();
    let v0 = nf * (nf - 1.0) * (2.0 * nf + 5.0);
    let vt = sum(&tx, &|t| t * (t - 1.0) * (2.0 * t + 5.0));
    let vu = sum(&ty, &|u| u * (u - 1.0) * (2.0 * u + 5.0));
    let v1 = sum(&tx, &|t| t * (t - 1.0)) * sum(&ty, &|u| u * (u - 1.0));
    let v2 = sum(&tx, &|t| t * (t - 1.0) * (t - 2.0)) * sum(&ty, &|u| u * (u - 1.0) * (u - 2.0));
    let var = (v0 - vt - vu) / 18.0 + v1 / (2.0 * nf * (nf - 1.0)) + v2 / (9.0 * nf * (nf - 1.0) * (nf - 2.0));
    Ok((tau, s, var))
}

/// Correlation coefficient with its test of zero association. The
/// statistic is the coefficient itself.
pub fn correlation(x: &[f64], y: &[f64], method: CorrelationMethod) -> Result<TestResult> {
    check_finite(x)?;
    check_finite(y)?;
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::DegenerateSample("correlation needs n >= 3".into()));
    }
    match method {
        CorrelationMethod::Pearson => {
            let r = pearson_r(x, y)?;
            let (l, g) = t_transform_tails(r, n);
            Ok(TestResult::from_tails(r, l, g, "Pearson product-moment correlation", vec![n]))
        }
        CorrelationMethod::Spearman => {
            let r = pearson_r(&midranks(x).0, &midranks(y).0)?;
            let (l, g) = t_transform_tails(r, n);
            Ok(TestResult::from_tails(r, l, g, "Spearman rank correlation (t approximation)", vec![n]))
        }
        CorrelationMethod::Kendall => {
            let (tau, s, var) = kendall(x, y)?;
            let (l, g) = if var > 0.0 {
                let z = s / var.sqrt();
                (norm_cdf(z), norm_sf(z))
            } else {
                (1.0, 1.0)
            };
            Ok(TestResult::from_tails(tau, l, g, "Kendall tau-b (normal approximation, tie corrected)", vec![n]))
        }
    }
}
