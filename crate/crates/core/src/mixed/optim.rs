//! Derivative-free minimisation used for covariance parameters.

use nalgebra::{DMatrix, DVector};

pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Nelder–Mead simplex search. Stops when the relative spread of objective
/// values over the simplex falls below `ftol` or after `max_iter` iterations.
pub(crate) fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], step: f64, ftol: f64, max_iter: usize) -> Minimum {
    let n = x0.len();
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| f(p)).collect();
    let mut it = 0;
    let mut converged = false;
    while it < max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        let (best, worst) = (vals[0], vals[n]);
        let width = pts.iter().skip(1).flat_map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs())).fold(0.0, f64::max);
        if (worst - best).abs() <= ftol * (best.abs() + ftol) && width < 1e-6 {
            converged = true;
            break;
        }
        it += 1;
        let centroid: Vec<f64> = (0..n).map(|j| pts[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&pts[n]).map(|(c, w)| c + t * (w - c)).collect() };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
        } else {
            let (xc, fc) = if fr < vals[n] {
                let x = along(-0.5);
                let v = f(&x);
                (x, v)
            } else {
                let x = along(0.5);
                let v = f(&x);
                (x, v)
            };
            if fc < vals[n].min(fr) {
                pts[n] = xc;
                vals[n] = fc;
            } else {
                for i in 1..=n {
                    pts[i] = pts[i].iter().zip(&pts[0]).map(|(p, b)| b + 0.5 * (p - b)).collect();
                    vals[i] = f(&pts[i]);
                }
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    Minimum { x: pts[best].clone(), f: vals[best], iterations: it, converged }
}

/// Newton iterations with central-difference derivatives, accepting only
/// steps that decrease `f`.
pub(crate) fn newton_polish(f: &dyn Fn(&[f64]) -> f64, start: Minimum, max_iter: usize) -> Minimum {
    let n = start.x.len();
    let mut x = start.x;
    let mut fx = start.f;
    let mut iterations = start.iterations;
    for _ in 0..max_iter {
        let (g, h) = derivatives(f, &x, fx);
        if g.iter().any(|v| !v.is_finite()) || h.iter().any(|v| !v.is_finite()) {
            break;
        }
        iterations += 1;
        let mut lambda = 0.0;
        let mut improved = false;
        for _ in 0..12 {
            let mut hh = h.clone();
            for i in 0..n {
                hh[(i, i)] += lambda * (1.0 + h[(i, i)].abs());
            }
            if let Some(ch) = hh.cholesky() {
                let d = ch.solve(&(-&g));
                let xn: Vec<f64> = x.iter().zip(d.iter()).map(|(a, b)| a + b).collect();
                let fnew = f(&xn);
                if fnew < fx {
                    let small = d.amax() < 1e-10;
                    x = xn;
                    fx = fnew;
                    improved = true;
                    if small {
                        return Minimum { x, f: fx, iterations, converged: true };
                    }
                    break;
                }
            }
            lambda = if lambda == 0.0 { 1e-4 } else { lambda * 10.0 };
        }
        if !improved {
            break;
        }
    }
    Minimum { x, f: fx, iterations, converged: start.converged }
}

fn derivatives(f: &dyn Fn(&[f64]) -> f64, x: &[f64], fx: f64) -> (DVector<f64>, DMatrix<f64>) {
    let n = x.len();
    let hg = 1e-5;
    let hh = 1e-3;
    let at = |d: &[(usize, f64)]| {
        let mut y = x.to_vec();
        for &(i, s) in d {
            y[i] += s;
        }
        f(&y)
    };
    let g = DVector::from_fn(n, |i, _| (at(&[(i, hg)]) - at(&[(i, -hg)])) / (2.0 * hg));
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = (at(&[(i, hh)]) - 2.0 * fx + at(&[(i, -hh)])) / (hh * hh);
        for j in 0..i {
            let v = (at(&[(i, hh), (j, hh)]) - at(&[(i, hh), (j, -hh)]) - at(&[(i, -hh), (j, hh)]) + at(&[(i, -hh), (j, -hh)])) / (4.0 * hh * hh);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    (g, h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimises_rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = nelder_mead(&f, &[-1.2, 1.0], 0.5, 1e-12, 5000);
        let m = newton_polish(&f, m, 50);
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6, "{:?}", m.x);
    }
}
