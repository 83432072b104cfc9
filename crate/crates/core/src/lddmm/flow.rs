//! Semi-Lagrangian integration of the flow `d/dt phi_t = v_t(phi_t)`.
//!
//! Maps are stored as displacement fields in mm: `phi(x) = x + u(x)`.
//! Each step uses the time-averaged velocity of its two end samples.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::{VectorField, VelocityField};
use crate::error::Result;
use crate::sampling::trilinear;

/// Forward and backward maps at every time sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffeoFlow {
    /// `phi_{t_i, 0}`: carries a point at time `t_i` back to time 0 (`phi_{t_i}^{-1}`).
    pub to_source: Vec<VectorField>,
    /// `phi_{t_i, 1}`: carries a point at time `t_i` forward to time 1.
    pub to_target: Vec<VectorField>,
}

impl DiffeoFlow {
    /// `phi_1^{-1}`, the map used to deform the template onto the target.
    pub fn inverse_map(&self) -> &VectorField {
        self.to_source.last().expect("flow has at least two samples")
    }

    /// `phi_1`, the forward map of the template grid.
    pub fn forward_map(&self) -> &VectorField {
        &self.to_target[0]
    }
}

#[inline]
pub(crate) fn voxel_position(dims: [usize; 3], spacing: [f64; 3], i: usize) -> [f64; 3] {
    let x = i % dims[0];
    let y = (i / dims[0]) % dims[1];
    let z = i / (dims[0] * dims[1]);
    [x as f64 * spacing[0], y as f64 * spacing[1], z as f64 * spacing[2]]
}

#[inline]
pub(crate) fn to_index(p: [f64; 3], spacing: [f64; 3]) -> [f64; 3] {
    [p[0] / spacing[0], p[1] / spacing[1], p[2] / spacing[2]]
}

/// Evaluates a displacement field at a physical point.
#[inline]
pub fn sample_displacement(disp: &VectorField, p: [f64; 3]) -> [f64; 3] {
    let q = to_index(p, disp.spacing);
    [
        trilinear(&disp.comps[0], disp.dims, q),
        trilinear(&disp.comps[1], disp.dims, q),
        trilinear(&disp.comps[2], disp.dims, q),
    ]
}

/// Averaged velocity `(v_i + v_{i+1}) / 2` at voxel `j`.
#[inline]
pub(crate) fn mid_velocity(v: &VelocityField, i: usize, j: usize) -> [f64; 3] {
    let a = v.steps[i].at(j);
    let b = v.steps[i + 1].at(j);
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])]
}

fn step_map(prev: &VectorField, v: &VelocityField, i: usize, sign: f64) -> VectorField {
    let dims = prev.dims;
    let spacing = prev.spacing;
    let dt = v.dt();
    let n = prev.len();
    let vals: Vec<[f64; 3]> = (0..n)
        .into_par_iter()
        .map(|j| {
            let x = voxel_position(dims, spacing, j);
            let w = mid_velocity(v, i, j);
            let step = [sign * dt * w[0], sign * dt * w[1], sign * dt * w[2]];
            let p = [x[0] + step[0], x[1] + step[1], x[2] + step[2]];
            let d = sample_displacement(prev, p);
            [step[0] + d[0], step[1] + d[1], step[2] + d[2]]
        })
        .collect();
    let mut out = VectorField::zeros(dims, spacing);
    for (j, d) in vals.into_iter().enumerate() {
        for c in 0..3 {
            out.comps[c][j] = d[c];
        }
    }
    out
}

/// `phi_{t_i,0}` for every time sample, `phi_{0,0} = id`.
pub(crate) fn integrate_to_source(v: &VelocityField) -> Vec<VectorField> {
    let t = v.timesteps();
    let mut maps = Vec::with_capacity(t);
    maps.push(VectorField::zeros(v.dims(), v.spacing()));
    for i in 0..t - 1 {
        let next = step_map(&maps[i], v, i, -1.0);
        maps.push(next);
    }
    maps
}

/// `phi_{t_i,1}` for every time sample, `phi_{1,1} = id`.
pub(crate) fn integrate_to_target(v: &VelocityField) -> Vec<VectorField> {
    let t = v.timesteps();
    let mut maps = vec![VectorField::zeros(v.dims(), v.spacing()); t];
    for i in (0..t - 1).rev() {
        maps[i] = step_map(&maps[i + 1], v, i, 1.0);
    }
    maps
}

/// Integrates both families of maps for a time-indexed velocity.
pub fn integrate_flow(v: &VelocityField) -> Result<DiffeoFlow> {
    v.validate()?;
    let (to_source, to_target) = rayon::join(|| integrate_to_source(v), || integrate_to_target(v));
    Ok(DiffeoFlow { to_source, to_target })
}

/// Displacement of `outer ∘ inner`.
pub fn compose(outer: &VectorField, inner: &VectorField) -> VectorField {
    let dims = inner.dims;
    let spacing = inner.spacing;
    let mut out = VectorField::zeros(dims, spacing);
    for j in 0..inner.len() {
        let x = voxel_position(dims, spacing, j);
        let d = inner.at(j);
        let p = [x[0] + d[0], x[1] + d[1], x[2] + d[2]];
        let e = sample_displacement(outer, p);
        for c in 0..3 {
            out.comps[c][j] = d[c] + e[c];
        }
    }
    out
}

/// Samples an image (x-fastest, `f64`) at `x + disp(x)` for every voxel.
pub fn warp(image: &[f64], disp: &VectorField) -> Vec<f64> {
    let dims = disp.dims;
    let spacing = disp.spacing;
    (0..disp.len())
        .into_par_iter()
        .map(|j| {
            let x = voxel_position(dims, spacing, j);
            let d = disp.at(j);
            trilinear(image, dims, to_index([x[0] + d[0], x[1] + d[1], x[2] + d[2]], spacing))
        })
        .collect()
}

/// Jacobian determinant of `x + disp(x)` by central differences
/// (one-sided on the grid boundary).
pub fn jacobian_determinant(disp: &VectorField) -> Vec<f64> {
    let dims = disp.dims;
    let h = disp.spacing;
    let n = disp.len();
    let strides = [1, dims[0], dims[0] * dims[1]];
    (0..n)
        .map(|j| {
            let pos = [j % dims[0], (j / dims[0]) % dims[1], j / (dims[0] * dims[1])];
            let mut jac = [[0.0f64; 3]; 3];
            for d in 0..3 {
                if dims[d] == 1 {
                    jac[d][d] = 1.0;
                    continue;
                }
                let (lo, hi) = if pos[d] == 0 {
                    (j, j + strides[d])
                } else if pos[d] + 1 == dims[d] {
                    (j - strides[d], j)
                } else {
                    (j - strides[d], j + strides[d])
                };
                let span = ((hi - lo) / strides[d]) as f64 * h[d];
                for c in 0..3 {
                    let deriv = (disp.comps[c][hi] - disp.comps[c][lo]) / span;
                    jac[c][d] = deriv + if c == d { 1.0 } else { 0.0 };
                }
            }
            det3(&jac)
        })
        .collect()
}

#[inline]
pub(crate) fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_velocity_gives_identity_maps() {
        let v = VelocityField::zeros(4, [5, 5, 5], [1.0; 3]);
        let flow = integrate_flow(&v).unwrap();
        assert!(flow.to_source.iter().chain(&flow.to_target).all(|m| m.max_abs() == 0.0));
    }

    #[test]
    fn constant_velocity_translates() {
        let u = [0.6, -0.3, 0.2];
        let f = VectorField::from_fn([12, 12, 12], [1.0; 3], |_, _, _| u);
        let v = VelocityField::constant_in_time(6, f);
        let flow = integrate_flow(&v).unwrap();
        // interior voxels: phi_1^{-1}(x) = x - u exactly
        let inv = flow.inverse_map();
        let j = 6 + 12 * (6 + 12 * 6);
        let d = inv.at(j);
        for c in 0..3 {
            assert!((d[c] + u[c]).abs() < 1e-12);
        }
        let det = jacobian_determinant(inv);
        assert!((det[j] - 1.0).abs() < 1e-12);
    }
}
