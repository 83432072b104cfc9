use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::norm_sf;

/// Cap on the coefficient norm, measured as the root-mean-square of the
/// linear predictor `X beta`, beyond which the fit is treated as separated.
pub const NORM_CAP: f64 = 30.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogisticFit {
    /// Intercept first.
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
    pub z: Vec<f64>,
    pub p: Vec<f64>,
    pub log_lik: f64,
    pub deviance: f64,
    /// `deviance + 2 * beta.len()`.
    pub aic: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Coefficients diverged and were capped; estimates are not an MLE.
    pub separation: bool,
    /// Infinity norm of the score vector at `beta`.
    pub gradient_norm: f64,
}

/// Maximum-likelihood logistic regression of `y` on an intercept plus the
/// columns of `x` (one inner vector per observation).
pub fn fit_logistic(x: &[Vec<f64>], y: &[bool]) -> Result<LogisticFit> {
    fit_from(x, y, None)
}

pub(crate) fn fit_from(x: &[Vec<f64>], y: &[bool], start: Option<&[f64]>) -> Result<LogisticFit> {
    let n = y.len();
    if x.len() != n {
        return Err(Error::LengthMismatch(x.len(), n));
    }
    if n == 0 {
        return Err(Error::EmptyTable);
    }
    let k = x.first().map_or(0, Vec::len);
    if let Some(r) = x.iter().find(|r| r.len() != k) {
        return Err(Error::LengthMismatch(r.len(), k));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite predictor value".into()));
    }
    let positives = y.iter().filter(|&&b| b).count();
    if positives == 0 || positives == n {
        return Err(Error::DegenerateLabels(format!("all {n} labels belong to one class")));
    }
    let p = k + 1;
    let mut scale = vec![1.0; p];
    for j in 0..k {
        let first = x[0][j];
        if x.iter().all(|r| r[j] == first) {
            return Err(Error::DegenerateColumn(format!("predictor column {j} is constant")));
        }
        scale[j + 1] = (x.iter().map(|r| r[j] * r[j]).sum::<f64>() / n as f64).sqrt();
    }
    let xs = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] / scale[j] });
    let yv = DVector::from_iterator(n, y.iter().map(|&b| if b { 1.0 } else { 0.0 }));
    // Iterate in an orthonormal basis of the column space; powers of one
    // predictor are too collinear for normal equations.
    let qr = xs.clone().qr();
    let (q, r) = (qr.q(), qr.r());
    let rmax = r.diagonal().amax();
    if r.diagonal().iter().any(|d| d.abs() <= 1e-10 * rmax) {
        return Err(Error::Numerical("design columns are linearly dependent".into()));
    }

    let mut gamma = match start {
        Some(s) if s.len() == p => &r * DVector::from_fn(p, |j, _| s[j] * scale[j]),
        _ => DVector::zeros(p),
    };
    let unscaled = |g: &DVector<f64>| (r.transpose() * g).iter().zip(&scale).map(|(g, s)| (g / s).abs()).fold(0.0, f64::max);
    let mut state = evaluate(&q, &yv, &gamma);
    let mut converged = false;
    let mut separation = false;
    let mut iterations = 0;
    for it in 1..=200 {
        iterations = it;
        if unscaled(&state.grad) <= 1e-11 {
            converged = true;
            break;
        }
        let step = match state.hess.clone().cholesky() {
            Some(c) => c.solve(&state.grad),
            None => {
                separation = true;
                break;
            }
        };
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand = &gamma + &step * t;
            let s = evaluate(&q, &yv, &cand);
            if s.ll >= state.ll - 1e-12 * state.ll.abs() {
                accepted = Some((cand, s));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, s)) = accepted else {
            break;
        };
        let size = cand.norm() / (n as f64).sqrt();
        if size > NORM_CAP {
            gamma = &cand * (NORM_CAP / size);
            state = evaluate(&q, &yv, &gamma);
            separation = true;
            break;
        }
        let tiny = (&cand - &gamma).amax() < 1e-15 * (1.0 + gamma.amax());
        gamma = cand;
        state = s;
        if tiny {
            converged = true;
            break;
        }
    }

    let r_inv = r.clone().try_inverse().ok_or_else(|| Error::Numerical("singular design".into()))?;
    let beta = &r_inv * &gamma;
    let cov = match state.hess.clone().try_inverse() {
        Some(h) => &r_inv * h * r_inv.transpose(),
        None => DMatrix::from_element(p, p, f64::NAN),
    };
    let b: Vec<f64> = (0..p).map(|j| beta[j] / scale[j]).collect();
    let se: Vec<f64> = (0..p).map(|j| cov[(j, j)].max(0.0).sqrt() / scale[j]).collect();
    let z: Vec<f64> = b.iter().zip(&se).map(|(b, s)| b / s).collect();
    let pv: Vec<f64> = z.iter().map(|z| if z.is_finite() { (2.0 * norm_sf(z.abs())).min(1.0) } else { f64::NAN }).collect();
    let gradient_norm = unscaled(&state.grad);
    let deviance = -2.0 * state.ll;
    Ok(LogisticFit {
        aic: deviance + 2.0 * p as f64,
        beta: b,
        se,
        z,
        p: pv,
        log_lik: state.ll,
        deviance,
        iterations,
        converged: converged && !separation,
        separation,
        gradient_norm,
    })
}

struct State {
    ll: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

fn evaluate(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>) -> State {
    let eta = x * beta;
    let (n, p) = x.shape();
    let mut ll = 0.0;
    let mut resid = DVector::zeros(n);
    let mut w = DVector::zeros(n);
    for i in 0..n {
        let e = eta[i];
        // log(1 + exp(e)) without overflow
        let softplus = if e > 0.0 { e + (-e).exp().ln_1p() } else { e.exp().ln_1p() };
        ll += y[i] * e - softplus;
        let pi = 1.0 / (1.0 + (-e).exp());
        resid[i] = y[i] - pi;
        w[i] = pi * (1.0 - pi);
    }
    let grad = x.transpose() * &resid;
    let mut hess = DMatrix::zeros(p, p);
    for i in 0..n {
        let row = x.row(i);
        for a in 0..p {
            let ra = row[a] * w[i];
            for b in 0..=a {
                hess[(a, b)] += ra * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            hess[(b, a)] = hess[(a, b)];
        }
    }
    State { ll, grad, hess }
}

/// Fitted probability for one predictor row.
pub fn predict_row(beta: &[f64], row: &[f64]) -> f64 {
    let eta = beta[0] + beta[1..].iter().zip(row).map(|(b, x)| b * x).sum::<f64>();
    1.0 / (1.0 + (-eta).exp())
}
