//! Large-deformation diffeomorphic matching of volumes by gradient descent on
//! time-indexed velocity fields, and the geodesic distance `∫ ||v_t||_V dt`.

mod energy;
mod field;
mod flow;
mod spectral;

use serde::{Deserialize, Serialize};

pub use energy::{central_gradient, gradient, Energy, MatchingProblem};
pub use field::{VectorField, VelocityField};
pub use flow::{compose, integrate_flow, jacobian_determinant, sample_displacement, warp, DiffeoFlow};
pub use spectral::SpectralOperator;

use crate::error::{Error, Result};
use crate::volume::Volume3D;

/// Operator, matching and optimizer settings.
///
/// `alpha` and `exponent` are the coefficient and the power in
/// `L = (-alpha * Lap + gamma)^exponent`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LddmmParams {
    pub alpha: f64,
    pub gamma: f64,
    pub exponent: f64,
    pub sigma: f64,
    pub timesteps: usize,
    pub step_size: f64,
    pub max_iters: usize,
    pub energy_tol: f64,
}

impl Default for LddmmParams {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            gamma: 1.0,
            exponent: 2.0,
            sigma: 1.0,
            timesteps: 10,
            step_size: 0.1,
            max_iters: 200,
            energy_tol: 1e-5,
        }
    }
}

impl LddmmParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha", self.alpha),
            ("gamma", self.gamma),
            ("sigma", self.sigma),
            ("step_size", self.step_size),
            ("energy_tol", self.energy_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.exponent > 1.5) || !self.exponent.is_finite() {
            return Err(Error::InvalidParameter(format!("exponent must exceed 1.5, got {}", self.exponent)));
        }
        if self.timesteps < 2 {
            return Err(Error::InvalidParameter(format!("timesteps must be >= 2, got {}", self.timesteps)));
        }
        Ok(())
    }
}

/// One accepted optimizer iterate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub iteration: usize,
    pub matching: f64,
    pub regularization: f64,
}

impl EnergyRecord {
    pub fn total(&self) -> f64 {
        self.matching + self.regularization
    }
}

#[derive(Clone, Debug)]
pub struct RegistrationResult {
    pub velocity: VelocityField,
    pub flow: DiffeoFlow,
    pub energy_trace: Vec<EnergyRecord>,
    pub metric_distance: f64,
    /// Template deformed onto the target grid, `I0 ∘ phi_1^{-1}`.
    pub warped_template: Volume3D,
    pub converged: bool,
}

/// `K f` for the operator described by `params`.
pub fn apply_k(field: &VectorField, params: &LddmmParams) -> Result<VectorField> {
    SpectralOperator::new(field.dims, field.spacing, params).apply_k(field)
}

/// `L^T L f` for the operator described by `params`.
pub fn apply_ldagl(field: &VectorField, params: &LddmmParams) -> Result<VectorField> {
    SpectralOperator::new(field.dims, field.spacing, params).apply_ldagl(field)
}

/// Trapezoidal quadrature of `||v_t||_V` over `t ∈ [0, 1]`.
pub fn metric_distance(v: &VelocityField, params: &LddmmParams) -> Result<f64> {
    v.validate()?;
    let op = SpectralOperator::new(v.dims(), v.spacing(), params);
    let w = v.time_weights();
    let mut d = 0.0;
    for (f, wi) in v.steps.iter().zip(w) {
        d += wi * op.v_norm(f)?;
    }
    Ok(d)
}

const MIN_STEP: f64 = 1e-12;
const STEP_GROWTH: f64 = 1.25;

/// Minimizes the matching energy from a zero velocity by gradient descent
/// with step halving on energy increase.
pub fn register(template: &Volume3D, target: &Volume3D, params: &LddmmParams) -> Result<RegistrationResult> {
    let problem = MatchingProblem::new(template, target, params)?;
    let mut v = VelocityField::zeros(params.timesteps, template.dims(), template.spacing());
    let mut maps = flow::integrate_to_source(&v);
    let mut energy = Energy { matching: problem.matching(maps.last().unwrap()), regularization: 0.0 };
    let mut trace = vec![EnergyRecord { iteration: 0, matching: energy.matching, regularization: 0.0 }];
    let mut step = params.step_size;
    let mut converged = energy.total() == 0.0;

    for iteration in 1..=params.max_iters {
        if converged {
            break;
        }
        let grad = problem.gradient_with_flow(&v, &maps)?;
        if grad.max_norm() == 0.0 {
            converged = true;
            break;
        }
        let (cand, cand_maps, cand_energy) = loop {
            let mut cand = v.clone();
            cand.axpy(-step, &grad);
            let cand_maps = flow::integrate_to_source(&cand);
            let e = Energy { matching: problem.matching(cand_maps.last().unwrap()), regularization: problem.regularization(&cand)? };
            if e.total().is_finite() && e.total() <= energy.total() {
                break (cand, cand_maps, e);
            }
            step *= 0.5;
            if step < MIN_STEP {
                return Err(Error::NoDescent(MIN_STEP));
            }
        };
        let rel = (energy.total() - cand_energy.total()) / energy.total();
        v = cand;
        maps = cand_maps;
        energy = cand_energy;
        trace.push(EnergyRecord { iteration, matching: energy.matching, regularization: energy.regularization });
        step *= STEP_GROWTH;
        if rel < params.energy_tol {
            converged = true;
        }
    }

    let flow = integrate_flow(&v)?;
    let metric_distance = metric_distance(&v, params)?;
    let warped = problem.warped_template(flow.inverse_map());
    let warped_template =
        Volume3D::new(template.dims(), template.spacing(), warped.into_iter().map(|x| x as f32).collect())?;
    Ok(RegistrationResult { velocity: v, flow, energy_trace: trace, metric_distance, warped_template, converged })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_are_validated() {
        assert!(LddmmParams::default().validate().is_ok());
        let bad = LddmmParams { exponent: 1.5, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = LddmmParams { timesteps: 1, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn distance_of_zero_velocity_is_zero() {
        let v = VelocityField::zeros(5, [4, 4, 4], [1.0; 3]);
        assert_eq!(metric_distance(&v, &LddmmParams::default()).unwrap(), 0.0);
    }

    #[test]
    fn distance_is_homogeneous() {
        let f = VectorField::from_fn([6, 6, 6], [1.0; 3], |x, y, z| [(x as f64).sin(), (y * z) as f64 * 0.1, 0.3]);
        let mut v = VelocityField::constant_in_time(4, f);
        let p = LddmmParams::default();
        let d = metric_distance(&v, &p).unwrap();
        v.scale(2.5);
        let d2 = metric_distance(&v, &p).unwrap();
        assert!((d2 - 2.5 * d).abs() < 1e-12 * d2);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = Volume3D::zeros([4, 4, 4], [1.0; 3]).unwrap();
        let b = Volume3D::zeros([4, 4, 5], [1.0; 3]).unwrap();
        assert!(matches!(register(&a, &b, &LddmmParams::default()), Err(Error::DimensionMismatch(_))));
    }
}
