//! Periodic spectral representation of the smoothing operator
//! `L = (-alpha * Lap + gamma)^a` and its Green's operator `K = (L^T L)^-1`.
//!
//! The Laplacian symbol is the 7-point stencil one, `sum_d (2 - 2 cos w_d) / h_d^2`,
//! so spectral and finite-difference evaluations of `L` agree exactly.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::field::VectorField;
use super::LddmmParams;
use crate::error::{Error, Result};

pub struct SpectralOperator {
    dims: [usize; 3],
    spacing: [f64; 3],
    /// `m(w)` per frequency, x-fastest.
    symbol: Vec<f64>,
    exponent: f64,
    forward: [Arc<dyn Fft<f64>>; 3],
    inverse: [Arc<dyn Fft<f64>>; 3],
}

impl std::fmt::Debug for SpectralOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralOperator").field("dims", &self.dims).field("exponent", &self.exponent).finish()
    }
}

impl SpectralOperator {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], params: &LddmmParams) -> Self {
        let mut planner = FftPlanner::new();
        let forward = [0, 1, 2].map(|d| planner.plan_fft_forward(dims[d]));
        let inverse = [0, 1, 2].map(|d| planner.plan_fft_inverse(dims[d]));
        let lap1d = |d: usize| -> Vec<f64> {
            (0..dims[d])
                .map(|k| {
                    let w = 2.0 * std::f64::consts::PI * k as f64 / dims[d] as f64;
                    (2.0 - 2.0 * w.cos()) / (spacing[d] * spacing[d])
                })
                .collect()
        };
        let (lx, ly, lz) = (lap1d(0), lap1d(1), lap1d(2));
        let mut symbol = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    symbol.push(params.gamma + params.alpha * (lx[x] + ly[y] + lz[z]));
                }
            }
        }
        Self { dims, spacing, symbol, exponent: params.exponent, forward, inverse }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    fn fft3(&self, buf: &mut [Complex64], inverse: bool) {
        let plans = if inverse { &self.inverse } else { &self.forward };
        let [nx, ny, nz] = self.dims;
        for row in buf.chunks_exact_mut(nx) {
            plans[0].process(row);
        }
        let mut line = vec![Complex64::default(); ny.max(nz)];
        if ny > 1 {
            for z in 0..nz {
                for x in 0..nx {
                    for y in 0..ny {
                        line[y] = buf[x + nx * (y + ny * z)];
                    }
                    plans[1].process(&mut line[..ny]);
                    for y in 0..ny {
                        buf[x + nx * (y + ny * z)] = line[y];
                    }
                }
            }
        }
        if nz > 1 {
            for y in 0..ny {
                for x in 0..nx {
                    for z in 0..nz {
                        line[z] = buf[x + nx * (y + ny * z)];
                    }
                    plans[2].process(&mut line[..nz]);
                    for z in 0..nz {
                        buf[x + nx * (y + ny * z)] = line[z];
                    }
                }
            }
        }
    }

    fn check(&self, f: &VectorField) -> Result<()> {
        if f.dims != self.dims {
            return Err(Error::DimensionMismatch(format!("field {:?} vs operator {:?}", f.dims, self.dims)));
        }
        if !f.is_finite() {
            return Err(Error::Numerical("non-finite field".into()));
        }
        Ok(())
    }

    /// Multiplies every component by `m(w)^power` in the Fourier domain.
    fn apply_power(&self, f: &VectorField, power: f64) -> Result<VectorField> {
        self.check(f)?;
        let n = f.len();
        let mult: Vec<f64> = self.symbol.iter().map(|m| m.powf(power) / n as f64).collect();
        let mut out = VectorField::zeros(self.dims, f.spacing);
        let mut buf = vec![Complex64::default(); n];
        for c in 0..3 {
            for (b, &v) in buf.iter_mut().zip(&f.comps[c]) {
                *b = Complex64::new(v, 0.0);
            }
            self.fft3(&mut buf, false);
            for (b, &m) in buf.iter_mut().zip(&mult) {
                *b *= m;
            }
            self.fft3(&mut buf, true);
            for (o, b) in out.comps[c].iter_mut().zip(&buf) {
                *o = b.re;
            }
        }
        Ok(out)
    }

    /// `K f`: Fourier multiplier `m(w)^(-2a)`.
    pub fn apply_k(&self, f: &VectorField) -> Result<VectorField> {
        self.apply_power(f, -2.0 * self.exponent)
    }

    /// `L^T L f`: Fourier multiplier `m(w)^(2a)`.
    pub fn apply_ldagl(&self, f: &VectorField) -> Result<VectorField> {
        self.apply_power(f, 2.0 * self.exponent)
    }

    /// `L f`: Fourier multiplier `m(w)^a`.
    pub fn apply_l(&self, f: &VectorField) -> Result<VectorField> {
        self.apply_power(f, self.exponent)
    }

    /// `<f, g>_V = <L f, L g>_{L2}`, with the L2 product weighted by voxel volume.
    pub fn v_inner(&self, f: &VectorField, g: &VectorField) -> Result<f64> {
        self.check(f)?;
        self.check(g)?;
        let n = f.len();
        let weight: Vec<f64> = self.symbol.iter().map(|m| m.powf(2.0 * self.exponent)).collect();
        let mut a = vec![Complex64::default(); n];
        let mut b = vec![Complex64::default(); n];
        let mut acc = 0.0;
        for c in 0..3 {
            for i in 0..n {
                a[i] = Complex64::new(f.comps[c][i], 0.0);
                b[i] = Complex64::new(g.comps[c][i], 0.0);
            }
            self.fft3(&mut a, false);
            self.fft3(&mut b, false);
            acc += a.iter().zip(&b).zip(&weight).map(|((x, y), w)| w * (x * y.conj()).re).sum::<f64>();
        }
        let voxel: f64 = self.spacing.iter().product();
        Ok(acc / n as f64 * voxel)
    }

    pub fn v_norm_sq(&self, f: &VectorField) -> Result<f64> {
        self.v_inner(f, f)
    }

    pub fn v_norm(&self, f: &VectorField) -> Result<f64> {
        Ok(self.v_norm_sq(f)?.max(0.0).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> LddmmParams {
        LddmmParams { alpha: 0.3, gamma: 1.5, exponent: 2.0, ..LddmmParams::default() }
    }

    #[test]
    fn zero_field_maps_to_zero() {
        let op = SpectralOperator::new([4, 5, 6], [1.0, 0.5, 2.0], &params());
        let z = VectorField::zeros([4, 5, 6], [1.0, 0.5, 2.0]);
        assert_eq!(op.apply_k(&z).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn constant_field_scales_by_gamma_power() {
        let p = params();
        let op = SpectralOperator::new([4, 4, 4], [1.0; 3], &p);
        let f = VectorField::from_fn([4, 4, 4], [1.0; 3], |_, _, _| [1.0, -2.0, 0.5]);
        let k = op.apply_k(&f).unwrap();
        let s = p.gamma.powf(-2.0 * p.exponent);
        for i in 0..64 {
            let v = k.at(i);
            assert!((v[0] - s).abs() < 1e-12 && (v[1] + 2.0 * s).abs() < 1e-12 && (v[2] - 0.5 * s).abs() < 1e-12);
        }
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let op = SpectralOperator::new([2, 2, 2], [1.0; 3], &params());
        let mut f = VectorField::zeros([2, 2, 2], [1.0; 3]);
        f.comps[1][3] = f64::NAN;
        assert!(matches!(op.apply_k(&f), Err(Error::Numerical(_))));
    }
}
