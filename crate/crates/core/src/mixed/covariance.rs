use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CovKind {
    CS,
    UN,
    AR1,
    ARH1,
}

impl CovKind {
    pub const ALL: [CovKind; 4] = [CovKind::CS, CovKind::UN, CovKind::AR1, CovKind::ARH1];

    pub fn label(self) -> &'static str {
        match self {
            CovKind::CS => "CS",
            CovKind::UN => "UN",
            CovKind::AR1 => "AR1",
            CovKind::ARH1 => "ARH1",
        }
    }

    /// Number of covariance parameters for `q` repeated measures.
    pub fn n_params(self, q: usize) -> usize {
        match self {
            CovKind::CS | CovKind::AR1 => 2,
            CovKind::UN => q * (q + 1) / 2,
            CovKind::ARH1 => q + 1,
        }
    }

    /// Whether every matrix of kind `self` is also of kind `other`.
    pub fn nested_in(self, other: CovKind) -> bool {
        use CovKind::*;
        self == other || matches!((self, other), (CS, UN) | (AR1, ARH1) | (AR1, UN) | (ARH1, UN))
    }
}

impl std::str::FromStr for CovKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "CS" => Ok(CovKind::CS),
            "UN" | "US" => Ok(CovKind::UN),
            "AR1" | "AR" => Ok(CovKind::AR1),
            "ARH1" | "ARH" => Ok(CovKind::ARH1),
            _ => Err(Error::InvalidParameter(format!("unknown covariance structure `{s}`"))),
        }
    }
}

/// A residual covariance structure over `dim` ordered repeated measures.
///
/// Parameters:
/// CS `(σ², σ₁)` with variance σ² and common covariance σ₁;
/// UN the `dim` variances then the covariances σ21, σ31, σ32, σ41, ...;
/// AR1 `(σ², ρ)`; ARH1 `(σ₁², …, σ_q², ρ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovStructure {
    pub kind: CovKind,
    pub dim: usize,
    pub params: Vec<f64>,
}

impl CovStructure {
    pub fn new(kind: CovKind, dim: usize, params: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("covariance dimension must be positive".into()));
        }
        if params.len() != kind.n_params(dim) {
            return Err(Error::LengthMismatch(params.len(), kind.n_params(dim)));
        }
        let c = Self { kind, dim, params };
        if !c.is_positive_definite() {
            return Err(Error::InvalidParameter(format!("{} parameters {:?} are not positive definite", kind.label(), c.params)));
        }
        Ok(c)
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let q = self.dim;
        let p = &self.params;
        match self.kind {
            CovKind::CS => DMatrix::from_fn(q, q, |i, j| if i == j { p[0] } else { p[1] }),
            CovKind::AR1 => DMatrix::from_fn(q, q, |i, j| p[0] * p[1].powi(i.abs_diff(j) as i32)),
            CovKind::ARH1 => DMatrix::from_fn(q, q, |i, j| (p[i] * p[j]).sqrt() * p[q].powi(i.abs_diff(j) as i32)),
            CovKind::UN => {
                let mut m = DMatrix::zeros(q, q);
                for i in 0..q {
                    m[(i, i)] = p[i];
                }
                let mut k = q;
                for i in 1..q {
                    for j in 0..i {
                        m[(i, j)] = p[k];
                        m[(j, i)] = p[k];
                        k += 1;
                    }
                }
                m
            }
        }
    }

    pub fn is_positive_definite(&self) -> bool {
        self.params.iter().all(|v| v.is_finite())
            && !matches!(self.kind, CovKind::AR1 | CovKind::ARH1 if self.params.last().unwrap().abs() >= 1.0)
            && self.matrix().cholesky().is_some()
    }

    /// Structure of this kind nearest (by simple moments) to `s`.
    pub(crate) fn from_moments(kind: CovKind, s: &DMatrix<f64>) -> Self {
        let q = s.nrows();
        let diag: Vec<f64> = (0..q).map(|i| s[(i, i)].max(1e-12)).collect();
        let mean_var = diag.iter().sum::<f64>() / q as f64;
        let lag1 = if q > 1 {
            let r: f64 = (1..q).map(|i| s[(i, i - 1)] / (diag[i] * diag[i - 1]).sqrt()).sum::<f64>() / (q - 1) as f64;
            r.clamp(-0.9, 0.9)
        } else {
            0.0
        };
        let params = match kind {
            CovKind::CS => {
                let off = if q > 1 {
                    let mut t = 0.0;
                    for i in 0..q {
                        for j in 0..i {
                            t += s[(i, j)];
                        }
                    }
                    t / (q * (q - 1) / 2) as f64
                } else {
                    0.0
                };
                let lo = if q > 1 { -1.0 / (q - 1) as f64 } else { -1.0 };
                let r = (off / mean_var).clamp(0.9 * lo, 0.9);
                vec![mean_var, r * mean_var]
            }
            CovKind::AR1 => vec![mean_var, lag1],
            CovKind::ARH1 => diag.iter().copied().chain([lag1]).collect(),
            CovKind::UN => {
                let mut m = s.clone();
                for i in 0..q {
                    m[(i, i)] += 1e-10 * mean_var;
                }
                return Self::un_from_matrix(&m);
            }
        };
        Self { kind, dim: q, params }
    }

    pub(crate) fn un_from_matrix(m: &DMatrix<f64>) -> Self {
        let q = m.nrows();
        let mut params: Vec<f64> = (0..q).map(|i| m[(i, i)]).collect();
        for i in 1..q {
            for j in 0..i {
                params.push(0.5 * (m[(i, j)] + m[(j, i)]));
            }
        }
        Self { kind: CovKind::UN, dim: q, params }
    }

    /// Unconstrained coordinates. Every real vector maps to a positive
    /// definite structure through [`CovStructure::from_theta`].
    pub(crate) fn theta(&self) -> Vec<f64> {
        let q = self.dim;
        let p = &self.params;
        match self.kind {
            CovKind::CS => {
                let (lo, hi) = cs_bounds(q);
                let u = ((p[1] / p[0] - lo) / (hi - lo)).clamp(1e-12, 1.0 - 1e-12);
                vec![p[0].ln(), (u / (1.0 - u)).ln()]
            }
            CovKind::AR1 => vec![p[0].ln(), p[1].atanh()],
            CovKind::ARH1 => p[..q].iter().map(|v| v.ln()).chain([p[q].atanh()]).collect(),
            CovKind::UN => {
                let l = self.matrix().cholesky().expect("UN start must be positive definite").l();
                let mut t: Vec<f64> = (0..q).map(|i| l[(i, i)].ln()).collect();
                for i in 1..q {
                    for j in 0..i {
                        t.push(l[(i, j)]);
                    }
                }
                t
            }
        }
    }

    pub(crate) fn from_theta(kind: CovKind, q: usize, t: &[f64]) -> Self {
        let params = match kind {
            CovKind::CS => {
                let (lo, hi) = cs_bounds(q);
                let s2 = t[0].exp();
                let u = 1.0 / (1.0 + (-t[1]).exp());
                vec![s2, s2 * (lo + (hi - lo) * u)]
            }
            CovKind::AR1 => vec![t[0].exp(), t[1].tanh()],
            CovKind::ARH1 => t[..q].iter().map(|v| v.exp()).chain([t[q].tanh()]).collect(),
            CovKind::UN => {
                let mut l = DMatrix::zeros(q, q);
                for i in 0..q {
                    l[(i, i)] = t[i].exp();
                }
                let mut k = q;
                for i in 1..q {
                    for j in 0..i {
                        l[(i, j)] = t[k];
                        k += 1;
                    }
                }
                return Self::un_from_matrix(&(&l * l.transpose()));
            }
        };
        Self { kind, dim: q, params }
    }
}

/// Admissible range of the CS correlation σ₁/σ².
fn cs_bounds(q: usize) -> (f64, f64) {
    if q > 1 {
        (-1.0 / (q - 1) as f64, 1.0)
    } else {
        (-1.0, 1.0)
    }
}
