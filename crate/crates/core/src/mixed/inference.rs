use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor};

use super::{fit_design, CovKind, Design, Estimation, MixedModelFit, ModelSpec, RepeatedObs};
use crate::error::{Error, Result};

pub fn aic(log_lik: f64, k: usize) -> f64 {
    -2.0 * log_lik + 2.0 * k as f64
}

/// `n` is the number of observations (long rows).
pub fn bic(log_lik: f64, k: usize, n: usize) -> f64 {
    if k == 0 {
        return -2.0 * log_lik;
    }
    -2.0 * log_lik + k as f64 * (n as f64).ln()
}

pub fn information_criteria(fit: &MixedModelFit, n_obs: usize) -> (f64, f64) {
    (aic(fit.log_lik, fit.k), bic(fit.log_lik, fit.k, n_obs))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Lrt {
    pub statistic: f64,
    pub df: usize,
    pub p: f64,
}

/// Likelihood-ratio test from log-likelihoods and parameter counts.
pub fn lrt_from_loglik(ll_nested: f64, k_nested: usize, ll_full: f64, k_full: usize) -> Lrt {
    let statistic = 2.0 * (ll_full - ll_nested);
    let df = k_full.saturating_sub(k_nested);
    let p = if df == 0 {
        if statistic <= 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        ChiSquared::new(df as f64).expect("positive df").sf(statistic.max(0.0))
    };
    Lrt { statistic, df, p }
}

pub fn lrt(nested: &MixedModelFit, full: &MixedModelFit) -> Result<Lrt> {
    if !nested.cov.kind.nested_in(full.cov.kind) {
        return Err(Error::NotNested(format!("{} is not a restriction of {}", nested.cov.kind.label(), full.cov.kind.label())));
    }
    if nested.terms != full.terms || nested.n_obs != full.n_obs || nested.method != full.method || !Arc::ptr_eq(&nested.design, &full.design) && !same_data(&nested.design, &full.design) {
        return Err(Error::NotNested("fits differ in fixed effects, data or estimation method".into()));
    }
    Ok(lrt_from_loglik(nested.log_lik, nested.k, full.log_lik, full.k))
}

fn same_data(a: &Design, b: &Design) -> bool {
    a.subjects.len() == b.subjects.len() && a.subjects.iter().zip(&b.subjects).all(|(s, t)| s.0 == t.0 && s.1 == t.1)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FTest {
    pub term: String,
    pub f: f64,
    pub num_df: usize,
    pub den_df: usize,
    pub p: f64,
    pub between_subjects: bool,
}

/// Wald F test for every non-intercept column, computed on the REML fit of
/// the same model and covariance structure. Denominator df follow the
/// containment rule.
pub fn f_tests(fit: &MixedModelFit) -> Result<Vec<FTest>> {
    let reml;
    let base = if fit.method == Estimation::Reml {
        fit
    } else {
        reml = fit_design(fit.design.clone(), fit.cov.kind, Estimation::Reml)?;
        &reml
    };
    let d = &base.design;
    let n_between = d.between.iter().filter(|&&b| b).count();
    let n_within = d.between.len() - n_between;
    let den_between = d.n_subjects().saturating_sub(n_between);
    let den_within = d.n_obs.saturating_sub(d.n_subjects() + n_within);
    let p = base.beta.len();
    let cov = DMatrix::from_fn(p, p, |i, j| base.beta_cov[i][j]);
    Ok((1..p)
        .map(|c| {
            let den_df = if d.between[c] { den_between } else { den_within };
            let f = if base.degenerate {
                f64::NAN
            } else {
                base.beta[c] * base.beta[c] / cov[(c, c)]
            };
            let pval = if f.is_finite() && den_df > 0 {
                FisherSnedecor::new(1.0, den_df as f64).expect("positive df").sf(f)
            } else {
                f64::NAN
            };
            FTest { term: base.terms[c].clone(), f, num_df: 1, den_df, p: pval, between_subjects: d.between[c] }
        })
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonRow {
    pub structure: CovKind,
    pub k: usize,
    pub log_lik: f64,
    pub aic: f64,
    pub bic: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct LrtRow {
    pub nested: CovKind,
    pub full: CovKind,
    #[serde(flatten)]
    pub test: Lrt,
}

#[derive(Clone, Debug, Serialize)]
pub struct ModelComparison {
    pub response: String,
    pub n_obs: usize,
    pub n_subjects: usize,
    /// What `n` in `k ln n` counts.
    pub bic_n: &'static str,
    pub rows: Vec<ComparisonRow>,
    pub lrt: Vec<LrtRow>,
    pub best_aic: CovKind,
    pub best_bic: CovKind,
    #[serde(skip)]
    pub fits: Vec<MixedModelFit>,
}

/// Fits `spec` under each structure in `kinds` (concurrently) and tabulates
/// information criteria plus likelihood-ratio tests for every nested pair.
pub fn compare_structures(data: &[RepeatedObs], spec: &ModelSpec, kinds: &[CovKind]) -> Result<ModelComparison> {
    let design = Arc::new(Design::build(data, spec)?);
    let fits: Vec<MixedModelFit> = kinds.par_iter().map(|&k| fit_design(design.clone(), k, Estimation::Ml)).collect::<Result<_>>()?;
    let rows: Vec<ComparisonRow> = fits
        .iter()
        .map(|f| ComparisonRow { structure: f.cov.kind, k: f.k, log_lik: f.log_lik, aic: f.aic, bic: f.bic, converged: f.converged })
        .collect();
    let mut tests = Vec::new();
    for a in &fits {
        for b in &fits {
            if a.cov.kind != b.cov.kind && a.cov.kind.nested_in(b.cov.kind) {
                tests.push(LrtRow { nested: a.cov.kind, full: b.cov.kind, test: lrt(a, b)? });
            }
        }
    }
    let pick = |key: fn(&ComparisonRow) -> f64| rows.iter().min_by(|a, b| key(a).total_cmp(&key(b)).then(a.structure.cmp(&b.structure))).map(|r| r.structure);
    Ok(ModelComparison {
        response: spec.response.clone(),
        n_obs: design.n_obs,
        n_subjects: design.n_subjects(),
        bic_n: "observations",
        best_aic: pick(|r| r.aic).ok_or(Error::EmptyTable)?,
        best_bic: pick(|r| r.bic).ok_or(Error::EmptyTable)?,
        rows,
        lrt: tests,
        fits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn criteria_arithmetic() {
        assert!((aic(-171.4, 10) - 362.8).abs() < 1e-9);
        assert!((aic(-163.6, 10) - 347.2).abs() < 1e-9);
        assert!((aic(-158.4, 18) - 352.8).abs() < 1e-9);
        assert_eq!((aic(0.0, 0), bic(0.0, 0, 176)), (0.0, 0.0));
    }

    #[test]
    fn lrt_arithmetic() {
        let t = lrt_from_loglik(-171.4, 10, -158.4, 18);
        assert!((t.statistic - 26.0).abs() < 1e-9);
        assert_eq!(t.df, 8);
        let same = lrt_from_loglik(-10.0, 10, -10.0, 10);
        assert_eq!((same.statistic, same.p), (0.0, 1.0));
    }
}
