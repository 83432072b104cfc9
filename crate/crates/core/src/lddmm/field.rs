use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A 3-component vector field on a regular grid, components stored x-fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorField {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub comps: [Vec<f64>; 3],
}

impl VectorField {
    pub fn zeros(dims: [usize; 3], spacing: [f64; 3]) -> Self {
        let n = dims[0] * dims[1] * dims[2];
        Self { dims, spacing, comps: [vec![0.0; n], vec![0.0; n], vec![0.0; n]] }
    }

    pub fn from_fn(dims: [usize; 3], spacing: [f64; 3], mut f: impl FnMut(usize, usize, usize) -> [f64; 3]) -> Self {
        let mut out = Self::zeros(dims, spacing);
        let mut i = 0;
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    let v = f(x, y, z);
                    for c in 0..3 {
                        out.comps[c][i] = v[c];
                    }
                    i += 1;
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.comps[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn at(&self, i: usize) -> [f64; 3] {
        [self.comps[0][i], self.comps[1][i], self.comps[2][i]]
    }

    pub fn voxel_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(|c| c.iter().all(|v| v.is_finite()))
    }

    pub fn same_grid(&self, other: &VectorField) -> bool {
        self.dims == other.dims && self.spacing == other.spacing
    }

    pub fn scale(&mut self, s: f64) {
        self.comps.iter_mut().for_each(|c| c.iter_mut().for_each(|v| *v *= s));
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &VectorField) {
        for c in 0..3 {
            for (a, b) in self.comps[c].iter_mut().zip(&other.comps[c]) {
                *a += s * b;
            }
        }
    }

    /// Plain Euclidean dot product over all components and voxels.
    pub fn dot(&self, other: &VectorField) -> f64 {
        (0..3).map(|c| self.comps[c].iter().zip(&other.comps[c]).map(|(a, b)| a * b).sum::<f64>()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().flat_map(|c| c.iter()).fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Largest vector magnitude over the grid.
    pub fn max_norm(&self) -> f64 {
        (0..self.len())
            .map(|i| {
                let v = self.at(i);
                (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
            })
            .fold(0.0, f64::max)
    }
}

/// Time-indexed velocity fields `v_t` sampled at `t_i = i / (T - 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VelocityField {
    pub steps: Vec<VectorField>,
}

impl VelocityField {
    pub fn zeros(timesteps: usize, dims: [usize; 3], spacing: [f64; 3]) -> Self {
        Self { steps: vec![VectorField::zeros(dims, spacing); timesteps] }
    }

    /// The same field at every time sample.
    pub fn constant_in_time(timesteps: usize, field: VectorField) -> Self {
        Self { steps: vec![field; timesteps] }
    }

    pub fn timesteps(&self) -> usize {
        self.steps.len()
    }

    pub fn dims(&self) -> [usize; 3] {
        self.steps[0].dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.steps[0].spacing
    }

    pub fn dt(&self) -> f64 {
        1.0 / (self.steps.len() - 1) as f64
    }

    /// Trapezoidal quadrature weights over `t ∈ [0, 1]`.
    pub fn time_weights(&self) -> Vec<f64> {
        trapezoid_weights(self.steps.len())
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps.len() < 2 {
            return Err(Error::InvalidParameter("velocity needs at least 2 timesteps".into()));
        }
        let first = &self.steps[0];
        for s in &self.steps {
            if !s.same_grid(first) {
                return Err(Error::DimensionMismatch("velocity timesteps differ in grid".into()));
            }
            if !s.is_finite() {
                return Err(Error::Numerical("non-finite velocity".into()));
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        self.steps.iter_mut().for_each(|f| f.scale(s));
    }

    pub fn axpy(&mut self, s: f64, other: &VelocityField) {
        for (a, b) in self.steps.iter_mut().zip(&other.steps) {
            a.axpy(s, b);
        }
    }

    pub fn max_norm(&self) -> f64 {
        self.steps.iter().map(VectorField::max_norm).fold(0.0, f64::max)
    }
}

pub(crate) fn trapezoid_weights(timesteps: usize) -> Vec<f64> {
    let dt = 1.0 / (timesteps - 1) as f64;
    (0..timesteps)
        .map(|i| if i == 0 || i + 1 == timesteps { 0.5 * dt } else { dt })
        .collect()
}
