//! Discrete inexact-matching energy and its gradient in the V metric.
//!
//! `E(v) = sum_i w_i ||v_i||_V^2 + (1/sigma^2) ||I0 ∘ phi_1^{-1} - I1||^2`, with
//! trapezoidal time weights `w_i`. The gradient has the familiar form
//! `2 v_t - K(b_t)`; the matching force `b_t` is obtained by back-propagating the
//! end-point residual through the semi-Lagrangian steps, which is the exact
//! derivative of the discrete energy. [`continuum_force`] evaluates the
//! textbook expression `(2/sigma^2) |D phi_{t,1}| grad J0_t (J0_t - J1_t)` with
//! central differences for comparison.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::{VectorField, VelocityField};
use super::flow::{jacobian_determinant, mid_velocity, to_index, voxel_position, warp, DiffeoFlow};
use super::spectral::SpectralOperator;
use super::LddmmParams;
use crate::error::{Error, Result};
use crate::sampling::{scatter, trilinear_grad};
use crate::volume::Volume3D;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Energy {
    pub matching: f64,
    pub regularization: f64,
}

impl Energy {
    pub fn total(&self) -> f64 {
        self.matching + self.regularization
    }
}

/// Template/target pair bound to a grid and operator.
pub struct MatchingProblem {
    pub(crate) template: Vec<f64>,
    pub(crate) target: Vec<f64>,
    pub(crate) dims: [usize; 3],
    pub(crate) spacing: [f64; 3],
    pub(crate) params: LddmmParams,
    pub(crate) op: SpectralOperator,
}

impl MatchingProblem {
    pub fn new(template: &Volume3D, target: &Volume3D, params: &LddmmParams) -> Result<Self> {
        params.validate()?;
        if !template.same_grid(target) {
            return Err(Error::DimensionMismatch(format!(
                "template {:?}@{:?} vs target {:?}@{:?}",
                template.dims(),
                template.spacing(),
                target.dims(),
                target.spacing()
            )));
        }
        let t = template.to_f64();
        let s = target.to_f64();
        if t.iter().chain(&s).any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite image values".into()));
        }
        Ok(Self {
            op: SpectralOperator::new(template.dims(), template.spacing(), params),
            template: t,
            target: s,
            dims: template.dims(),
            spacing: template.spacing(),
            params: params.clone(),
        })
    }

    pub fn operator(&self) -> &SpectralOperator {
        &self.op
    }

    fn voxel_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub(crate) fn check_velocity(&self, v: &VelocityField) -> Result<()> {
        v.validate()?;
        if v.dims() != self.dims || v.spacing() != self.spacing {
            return Err(Error::DimensionMismatch("velocity grid differs from image grid".into()));
        }
        Ok(())
    }

    pub fn regularization(&self, v: &VelocityField) -> Result<f64> {
        let w = v.time_weights();
        let norms: Result<Vec<f64>> = v.steps.par_iter().map(|f| self.op.v_norm_sq(f)).collect();
        Ok(norms?.iter().zip(&w).map(|(n, w)| n * w).sum())
    }

    /// Template deformed by `phi_1^{-1}`.
    pub fn warped_template(&self, inverse_map: &VectorField) -> Vec<f64> {
        warp(&self.template, inverse_map)
    }

    pub fn matching(&self, inverse_map: &VectorField) -> f64 {
        let w = self.warped_template(inverse_map);
        let ss: f64 = w.iter().zip(&self.target).map(|(a, b)| (a - b) * (a - b)).sum();
        ss * self.voxel_volume() / (self.params.sigma * self.params.sigma)
    }

    pub fn energy(&self, v: &VelocityField) -> Result<Energy> {
        self.check_velocity(v)?;
        let maps = super::flow::integrate_to_source(v);
        Ok(Energy { matching: self.matching(maps.last().unwrap()), regularization: self.regularization(v)? })
    }

    /// Derivative of the matching term with respect to each `v_i`, in plain
    /// (unweighted) coordinates.
    pub(crate) fn matching_derivative(&self, v: &VelocityField, to_source: &[VectorField]) -> Vec<VectorField> {
        let t = v.timesteps();
        let dims = self.dims;
        let h = self.spacing;
        let n = dims[0] * dims[1] * dims[2];
        let dt = v.dt();
        let coef = 2.0 / (self.params.sigma * self.params.sigma) * self.voxel_volume();
        let last = &to_source[t - 1];

        let lam: Vec<[f64; 3]> = (0..n)
            .into_par_iter()
            .map(|j| {
                let x = voxel_position(dims, h, j);
                let d = last.at(j);
                let q = to_index([x[0] + d[0], x[1] + d[1], x[2] + d[2]], h);
                let (val, g) = trilinear_grad(&self.template, dims, q);
                let r = coef * (val - self.target[j]);
                [r * g[0] / h[0], r * g[1] / h[1], r * g[2] / h[2]]
            })
            .collect();
        let mut lam = lam;
        let mut grads = vec![VectorField::zeros(dims, h); t];
        for i in (0..t - 1).rev() {
            let prev = &to_source[i];
            let pulled: Vec<([f64; 3], [f64; 3])> = (0..n)
                .into_par_iter()
                .map(|j| {
                    let x = voxel_position(dims, h, j);
                    let w = mid_velocity(v, i, j);
                    let u = [x[0] - dt * w[0], x[1] - dt * w[1], x[2] - dt * w[2]];
                    let q = to_index(u, h);
                    let mut jac = [[0.0f64; 3]; 3];
                    for r in 0..3 {
                        let (_, g) = trilinear_grad(&prev.comps[r], dims, q);
                        for c in 0..3 {
                            jac[r][c] = g[c] / h[c] + if r == c { 1.0 } else { 0.0 };
                        }
                    }
                    let l = lam[j];
                    let a = [
                        jac[0][0] * l[0] + jac[1][0] * l[1] + jac[2][0] * l[2],
                        jac[0][1] * l[0] + jac[1][1] * l[1] + jac[2][1] * l[2],
                        jac[0][2] * l[0] + jac[1][2] * l[1] + jac[2][2] * l[2],
                    ];
                    (a, q)
                })
                .collect();
            let mut next = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
            for (j, (a, q)) in pulled.iter().enumerate() {
                for c in 0..3 {
                    let s = -0.5 * dt * a[c];
                    grads[i].comps[c][j] += s;
                    grads[i + 1].comps[c][j] += s;
                }
                if i > 0 {
                    let l = lam[j];
                    for c in 0..3 {
                        scatter(&mut next[c], dims, *q, l[c]);
                    }
                }
            }
            if i > 0 {
                lam = (0..n).map(|j| [next[0][j], next[1][j], next[2][j]]).collect();
            }
        }
        grads
    }

    /// V-metric gradient of the energy given the flow of `v`.
    pub fn gradient_with_flow(&self, v: &VelocityField, to_source: &[VectorField]) -> Result<VelocityField> {
        self.check_velocity(v)?;
        if to_source.len() != v.timesteps() || to_source.iter().any(|m| m.dims != self.dims) {
            return Err(Error::DimensionMismatch("flow does not match velocity".into()));
        }
        let raw = self.matching_derivative(v, to_source);
        let w = v.time_weights();
        let vox = self.voxel_volume();
        let steps: Result<Vec<VectorField>> = raw
            .par_iter()
            .zip(&v.steps)
            .zip(w.par_iter())
            .map(|((g, vi), &wi)| {
                let mut out = self.op.apply_k(g)?;
                out.scale(1.0 / (wi * vox));
                out.axpy(2.0, vi);
                Ok(out)
            })
            .collect();
        Ok(VelocityField { steps: steps? })
    }

    /// Weighted V inner product on time-indexed fields, `sum_i w_i <a_i, b_i>_V`.
    pub fn inner(&self, a: &VelocityField, b: &VelocityField) -> Result<f64> {
        let w = a.time_weights();
        let mut acc = 0.0;
        for ((x, y), wi) in a.steps.iter().zip(&b.steps).zip(w) {
            acc += wi * self.op.v_inner(x, y)?;
        }
        Ok(acc)
    }

    /// `(2/sigma^2) |D phi_{t,1}| grad J0_t (J0_t - J1_t)` at every time sample,
    /// with `J0_t = I0 ∘ phi_{t,0}` and `J1_t = I1 ∘ phi_{t,1}`.
    pub fn continuum_force(&self, flow: &DiffeoFlow) -> Vec<VectorField> {
        let s2 = self.params.sigma * self.params.sigma;
        flow.to_source
            .iter()
            .zip(&flow.to_target)
            .map(|(src, tgt)| {
                let j0 = warp(&self.template, src);
                let j1 = warp(&self.target, tgt);
                let det = jacobian_determinant(tgt);
                let grad = central_gradient(&j0, self.dims, self.spacing);
                let mut out = VectorField::zeros(self.dims, self.spacing);
                for j in 0..j0.len() {
                    let s = 2.0 / s2 * det[j] * (j0[j] - j1[j]);
                    for c in 0..3 {
                        out.comps[c][j] = s * grad[c][j];
                    }
                }
                out
            })
            .collect()
    }
}

/// Central-difference gradient in mm units, one-sided on the boundary.
pub fn central_gradient(img: &[f64], dims: [usize; 3], h: [f64; 3]) -> [Vec<f64>; 3] {
    let strides = [1, dims[0], dims[0] * dims[1]];
    let n = img.len();
    let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for j in 0..n {
        let pos = [j % dims[0], (j / dims[0]) % dims[1], j / (dims[0] * dims[1])];
        for d in 0..3 {
            if dims[d] == 1 {
                continue;
            }
            let (lo, hi) = if pos[d] == 0 {
                (j, j + strides[d])
            } else if pos[d] + 1 == dims[d] {
                (j - strides[d], j)
            } else {
                (j - strides[d], j + strides[d])
            };
            out[d][j] = (img[hi] - img[lo]) / (((hi - lo) / strides[d]) as f64 * h[d]);
        }
    }
    out
}

/// V-metric gradient of the matching energy for velocity `v` with flow `flow`.
pub fn gradient(
    v: &VelocityField,
    template: &Volume3D,
    target: &Volume3D,
    flow: &DiffeoFlow,
    params: &LddmmParams,
) -> Result<VelocityField> {
    let problem = MatchingProblem::new(template, target, params)?;
    problem.gradient_with_flow(v, &flow.to_source)
}
