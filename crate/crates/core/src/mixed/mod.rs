//! Repeated-measures linear models with structured residual covariance,
//! fitted by maximum likelihood.

mod covariance;
mod inference;
mod optim;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::longitudinal::{cell_index, ApcRecord, Group, LongRow, Measure, Side, Timepoint};

pub use covariance::{CovKind, CovStructure};
pub use inference::{aic, bic, compare_structures, f_tests, information_criteria, lrt, lrt_from_loglik, ComparisonRow, FTest, Lrt, LrtRow, ModelComparison};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Factor {
    Diagnosis,
    Side,
    Timepoint,
}

impl Factor {
    pub fn label(self) -> &'static str {
        match self {
            Factor::Diagnosis => "D",
            Factor::Side => "S",
            Factor::Timepoint => "T",
        }
    }
}

/// A main effect or interaction of two-level factors.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Term(Vec<Factor>);

impl Term {
    pub fn new(factors: &[Factor]) -> Result<Self> {
        let mut f = factors.to_vec();
        f.sort();
        f.dedup();
        if f.is_empty() || f.len() != factors.len() {
            return Err(Error::Design(format!("bad term {factors:?}")));
        }
        Ok(Term(f))
    }

    pub fn factors(&self) -> &[Factor] {
        &self.0
    }

    pub fn label(&self) -> String {
        self.0.iter().map(|f| f.label()).collect::<Vec<_>>().join(":")
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Fixed-effect part of a model: an intercept, the listed terms and any
/// numeric covariates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub response: String,
    pub terms: Vec<Term>,
    pub covariates: Vec<String>,
}

impl ModelSpec {
    /// Rejects models where an interaction appears without all of its
    /// lower-order terms.
    pub fn new(response: impl Into<String>, terms: Vec<Term>) -> Result<Self> {
        for t in &terms {
            let f = t.factors();
            for mask in 1..(1u32 << f.len()) - 1 {
                let sub: Vec<Factor> = f.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &x)| x).collect();
                let sub = Term(sub);
                if !terms.contains(&sub) {
                    return Err(Error::Design(format!("term {t} requires {sub}")));
                }
            }
        }
        let mut seen = terms.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != terms.len() {
            return Err(Error::Design("duplicate term".into()));
        }
        Ok(Self { response: response.into(), terms, covariates: Vec::new() })
    }

    /// All main effects and interactions of `factors`, ordered by degree.
    pub fn factorial(response: impl Into<String>, factors: &[Factor]) -> Result<Self> {
        let mut terms = Vec::new();
        for degree in 1..=factors.len() {
            for mask in 1u32..(1 << factors.len()) {
                if mask.count_ones() as usize == degree {
                    let sub: Vec<Factor> = factors.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &x)| x).collect();
                    terms.push(Term::new(&sub)?);
                }
            }
        }
        Self::new(response, terms)
    }

    pub fn with_covariates(mut self, names: &[&str]) -> Self {
        self.covariates = names.iter().map(|s| s.to_string()).collect();
        self
    }

    /// Column labels of the design matrix.
    pub fn column_labels(&self) -> Vec<String> {
        std::iter::once("(Intercept)".to_string())
            .chain(self.terms.iter().map(Term::label))
            .chain(self.covariates.iter().cloned())
            .collect()
    }
}

/// One repeated observation of one subject.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatedObs {
    pub subject: String,
    pub group: Group,
    pub side: Option<Side>,
    pub timepoint: Option<Timepoint>,
    pub y: f64,
    pub covariates: Vec<f64>,
}

impl From<&LongRow> for RepeatedObs {
    fn from(r: &LongRow) -> Self {
        Self { subject: r.subject_id.clone(), group: r.group, side: Some(r.side), timepoint: Some(r.timepoint), y: r.value, covariates: Vec::new() }
    }
}

impl RepeatedObs {
    pub fn from_apc(r: &ApcRecord, measure: Measure) -> Self {
        let y = match measure {
            Measure::Volume => r.v_apc,
            Measure::Distance => r.d_apc,
        };
        Self { subject: r.subject_id.clone(), group: r.group, side: Some(r.side), timepoint: None, y, covariates: Vec::new() }
    }

    fn position(&self) -> usize {
        match (self.side, self.timepoint) {
            (Some(s), Some(t)) => cell_index(s, t),
            (Some(s), None) => s as usize,
            (None, Some(t)) => t as usize,
            (None, None) => 0,
        }
    }

    fn code(&self, f: Factor) -> Option<f64> {
        let pm = |hi: bool| if hi { 1.0 } else { -1.0 };
        match f {
            Factor::Diagnosis => Some(pm(self.group == Group::Cdr05)),
            Factor::Side => self.side.map(|s| pm(s == Side::R)),
            Factor::Timepoint => self.timepoint.map(|t| pm(t == Timepoint::F)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimation {
    Ml,
    Reml,
}

#[derive(Debug)]
pub(crate) struct Pattern {
    x: DMatrix<f64>,
    n: f64,
    mean: DVector<f64>,
    /// Within-pattern scatter about `mean`.
    scatter: DMatrix<f64>,
}

#[derive(Debug)]
pub(crate) struct Design {
    q: usize,
    labels: Vec<String>,
    between: Vec<bool>,
    subjects: Vec<(DMatrix<f64>, DVector<f64>, Vec<usize>)>,
    patterns: Vec<Pattern>,
    n_obs: usize,
    spec: ModelSpec,
}

impl Design {
    fn build(data: &[RepeatedObs], spec: &ModelSpec) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyTable);
        }
        let mut order: Vec<String> = Vec::new();
        let mut rows: Vec<Vec<usize>> = Vec::new();
        for (i, o) in data.iter().enumerate() {
            if !o.y.is_finite() || o.covariates.iter().any(|v| !v.is_finite()) {
                return Err(Error::MissingData(format!("non-finite value for subject {}", o.subject)));
            }
            if o.covariates.len() != spec.covariates.len() {
                return Err(Error::LengthMismatch(o.covariates.len(), spec.covariates.len()));
            }
            match order.iter().position(|s| *s == o.subject) {
                Some(k) => rows[k].push(i),
                None => {
                    order.push(o.subject.clone());
                    rows.push(vec![i]);
                }
            }
        }
        for r in &mut rows {
            r.sort_by_key(|&i| data[i].position());
        }
        let layout: Vec<(Option<Side>, Option<Timepoint>)> = rows[0].iter().map(|&i| (data[i].side, data[i].timepoint)).collect();
        let q = layout.len();
        let mut subjects = Vec::with_capacity(rows.len());
        let labels = spec.column_labels();
        let p = labels.len();
        for (id, r) in order.iter().zip(&rows) {
            let l: Vec<_> = r.iter().map(|&i| (data[i].side, data[i].timepoint)).collect();
            if l != layout {
                return Err(Error::Design(format!("subject {id} does not have the same repeated measures as the first subject")));
            }
            if r.iter().any(|&i| data[i].group != data[r[0]].group) {
                return Err(Error::Design(format!("subject {id} changes diagnosis group")));
            }
            let mut x = DMatrix::zeros(q, p);
            for (a, &i) in r.iter().enumerate() {
                let o = &data[i];
                x[(a, 0)] = 1.0;
                for (c, t) in spec.terms.iter().enumerate() {
                    let mut v = 1.0;
                    for &f in t.factors() {
                        v *= o.code(f).ok_or_else(|| Error::Design(format!("term {t} needs a factor the data does not carry")))?;
                    }
                    x[(a, 1 + c)] = v;
                }
                for (c, &v) in o.covariates.iter().enumerate() {
                    x[(a, 1 + spec.terms.len() + c)] = v;
                }
            }
            let y = DVector::from_iterator(q, r.iter().map(|&i| data[i].y));
            subjects.push((x, y, r.clone()));
        }
        let n_obs = data.len();
        let xtx = subjects.iter().fold(DMatrix::zeros(p, p), |acc, (x, _, _)| acc + x.transpose() * x);
        let eig = xtx.clone().symmetric_eigen();
        let top = eig.eigenvalues.amax();
        if eig.eigenvalues.min() <= 1e-10 * top {
            return Err(Error::Design("design matrix is rank deficient".into()));
        }
        let between = (0..p).map(|c| subjects.iter().all(|(x, _, _)| (1..q).all(|a| x[(a, c)] == x[(0, c)]))).collect();

        let mut patterns: Vec<(DMatrix<f64>, Vec<usize>)> = Vec::new();
        for (s, (x, _, _)) in subjects.iter().enumerate() {
            match patterns.iter_mut().find(|(px, _)| px == x) {
                Some(entry) => entry.1.push(s),
                None => patterns.push((x.clone(), vec![s])),
            }
        }
        let patterns = patterns
            .into_iter()
            .map(|(x, members)| {
                let n = members.len() as f64;
                let mean = members.iter().fold(DVector::zeros(q), |acc, &s| acc + &subjects[s].1) / n;
                let scatter = members.iter().fold(DMatrix::zeros(q, q), |acc, &s| {
                    let d = &subjects[s].1 - &mean;
                    acc + &d * d.transpose()
                });
                Pattern { x, n, mean, scatter }
            })
            .collect();
        Ok(Self { q, labels, between, subjects, patterns, n_obs, spec: spec.clone() })
    }

    fn n_subjects(&self) -> usize {
        self.subjects.len()
    }

    fn p(&self) -> usize {
        self.labels.len()
    }

    fn ols(&self) -> DVector<f64> {
        let p = self.p();
        let (a, b) = self.subjects.iter().fold((DMatrix::zeros(p, p), DVector::zeros(p)), |(a, b), (x, y, _)| (a + x.transpose() * x, b + x.transpose() * y));
        a.cholesky().expect("full-rank design").solve(&b)
    }

    /// ML cross-product of subject residual vectors at `beta`.
    fn residual_covariance(&self, beta: &DVector<f64>) -> DMatrix<f64> {
        let q = self.q;
        let s = self.patterns.iter().fold(DMatrix::zeros(q, q), |acc, pt| {
            let r = &pt.mean - &pt.x * beta;
            acc + &pt.scatter + &r * r.transpose() * pt.n
        });
        s / self.n_subjects() as f64
    }

    fn profile(&self, sigma: &DMatrix<f64>, method: Estimation) -> Option<Profile> {
        let chol = sigma.clone().cholesky()?;
        let logdet: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let sinv = chol.inverse();
        let p = self.p();
        let mut a = DMatrix::zeros(p, p);
        let mut b = DVector::zeros(p);
        for pt in &self.patterns {
            let xs = pt.x.transpose() * &sinv;
            a += &xs * &pt.x * pt.n;
            b += &xs * &pt.mean * pt.n;
        }
        let achol = a.clone().cholesky()?;
        let beta = achol.solve(&b);
        let mut rss = 0.0;
        for pt in &self.patterns {
            let r = &pt.mean - &pt.x * &beta;
            rss += (&sinv * &pt.scatter).trace() + pt.n * (r.transpose() * &sinv * &r)[(0, 0)];
        }
        let n = self.n_subjects() as f64;
        let nobs = self.n_obs as f64;
        let ll = match method {
            Estimation::Ml => -0.5 * (nobs * (2.0 * PI).ln() + n * logdet + rss),
            Estimation::Reml => {
                let logdet_a: f64 = 2.0 * achol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
                -0.5 * ((nobs - p as f64) * (2.0 * PI).ln() + n * logdet + logdet_a + rss)
            }
        };
        ll.is_finite().then(|| Profile { ll, beta, a_inv: achol.inverse() })
    }
}

struct Profile {
    ll: f64,
    beta: DVector<f64>,
    a_inv: DMatrix<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MixedModelFit {
    pub spec: ModelSpec,
    pub method: Estimation,
    /// Design column labels, intercept first.
    pub terms: Vec<String>,
    pub beta: Vec<f64>,
    /// Model-based covariance of `beta`.
    pub beta_cov: Vec<Vec<f64>>,
    pub cov: CovStructure,
    pub log_lik: f64,
    /// Fixed-effect plus covariance parameter count.
    pub k: usize,
    pub aic: f64,
    pub bic: f64,
    pub n_obs: usize,
    pub n_subjects: usize,
    /// In input row order.
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// The response has no residual variation; covariance parameters are zero.
    pub degenerate: bool,
    #[serde(skip)]
    pub(crate) design: Arc<Design>,
}

impl MixedModelFit {
    pub fn coefficient(&self, label: &str) -> Option<f64> {
        self.terms.iter().position(|t| t == label).map(|i| self.beta[i])
    }

    pub fn n_cov_params(&self) -> usize {
        self.cov.params.len()
    }
}

/// Maximum-likelihood fit of `spec` with residual covariance `kind`.
pub fn fit(data: &[RepeatedObs], spec: &ModelSpec, kind: CovKind) -> Result<MixedModelFit> {
    fit_with(data, spec, kind, Estimation::Ml)
}

pub fn fit_with(data: &[RepeatedObs], spec: &ModelSpec, kind: CovKind, method: Estimation) -> Result<MixedModelFit> {
    let design = Arc::new(Design::build(data, spec)?);
    fit_design(design, kind, method)
}

const NM_FTOL: f64 = 1e-8;
const NM_MAX_ITER: usize = 2000;

pub(crate) fn fit_design(design: Arc<Design>, kind: CovKind, method: Estimation) -> Result<MixedModelFit> {
    let q = design.q;
    let ols = design.ols();
    let s0 = design.residual_covariance(&ols);
    let scale = design.subjects.iter().flat_map(|(_, y, _)| y.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    if s0.trace() <= 1e-24 * (scale * scale).max(f64::MIN_POSITIVE) * q as f64 {
        return Ok(degenerate_fit(&design, kind, method, ols));
    }

    let objective = |t: &[f64]| -> f64 {
        let c = CovStructure::from_theta(kind, q, t);
        design.profile(&c.matrix(), method).map_or(f64::INFINITY, |p| -p.ll)
    };

    let (cov, iterations, converged) = if kind == CovKind::UN && method == Estimation::Ml {
        flip_flop(&design, s0)?
    } else {
        let mut starts = vec![CovStructure::from_moments(kind, &s0)];
        if kind == CovKind::UN {
            let ml = flip_flop(&design, s0.clone())?.0;
            starts.push(ml);
        }
        if kind == CovKind::ARH1 {
            let ar = fit_design(design.clone(), CovKind::AR1, method)?;
            if !ar.degenerate {
                let (s2, rho) = (ar.cov.params[0], ar.cov.params[1]);
                starts.push(CovStructure { kind, dim: q, params: std::iter::repeat(s2).take(q).chain([rho]).collect() });
            }
        }
        let mut best: Option<optim::Minimum> = None;
        for s in starts {
            let m = optim::nelder_mead(&objective, &s.theta(), 0.3, NM_FTOL, NM_MAX_ITER);
            let m = optim::nelder_mead(&objective, &m.x.clone(), 0.05, NM_FTOL, NM_MAX_ITER).merge_iterations(m);
            let m = optim::newton_polish(&objective, m, 50);
            if best.as_ref().map_or(true, |b| m.f < b.f) {
                best = Some(m);
            }
        }
        let best = best.expect("at least one start");
        (CovStructure::from_theta(kind, q, &best.x), best.iterations, best.converged)
    };
    let profile = design
        .profile(&cov.matrix(), method)
        .ok_or_else(|| Error::Numerical("covariance estimate is not positive definite".into()))?;
    Ok(assemble(design, kind, method, cov, profile, iterations, converged))
}

impl optim::Minimum {
    fn merge_iterations(mut self, earlier: optim::Minimum) -> Self {
        self.iterations += earlier.iterations;
        self.converged &= earlier.converged || self.f <= earlier.f;
        self
    }
}

/// Alternating GLS and residual cross-product updates, the ML fixed point
/// for an unstructured covariance.
fn flip_flop(design: &Design, start: DMatrix<f64>) -> Result<(CovStructure, usize, bool)> {
    let mut sigma = start;
    for it in 1..=1000 {
        let prof = design
            .profile(&sigma, Estimation::Ml)
            .ok_or_else(|| Error::Numerical("residual covariance is singular".into()))?;
        let next = design.residual_covariance(&prof.beta);
        let change = (&next - &sigma).amax();
        sigma = next;
        if change <= 1e-14 * sigma.trace() {
            return Ok((CovStructure::un_from_matrix(&sigma), it, true));
        }
    }
    Ok((CovStructure::un_from_matrix(&sigma), 1000, false))
}

fn assemble(design: Arc<Design>, kind: CovKind, method: Estimation, cov: CovStructure, prof: Profile, iterations: usize, converged: bool) -> MixedModelFit {
    let p = design.p();
    let (fitted, residuals) = fitted_values(&design, &prof.beta);
    let k = p + kind.n_params(design.q);
    let ll = prof.ll;
    MixedModelFit {
        spec: design.spec.clone(),
        method,
        terms: design.labels.clone(),
        beta: prof.beta.iter().copied().collect(),
        beta_cov: (0..p).map(|i| (0..p).map(|j| prof.a_inv[(i, j)]).collect()).collect(),
        cov,
        log_lik: ll,
        k,
        aic: aic(ll, k),
        bic: bic(ll, k, design.n_obs),
        n_obs: design.n_obs,
        n_subjects: design.n_subjects(),
        fitted,
        residuals,
        iterations,
        converged,
        degenerate: false,
        design,
    }
}

fn fitted_values(design: &Design, beta: &DVector<f64>) -> (Vec<f64>, Vec<f64>) {
    let mut fitted = vec![0.0; design.n_obs];
    let mut residuals = vec![0.0; design.n_obs];
    for (x, y, rows) in &design.subjects {
        let f = x * beta;
        for (a, &i) in rows.iter().enumerate() {
            fitted[i] = f[a];
            residuals[i] = y[a] - f[a];
        }
    }
    (fitted, residuals)
}

fn degenerate_fit(design: &Arc<Design>, kind: CovKind, method: Estimation, mut beta: DVector<f64>) -> MixedModelFit {
    let ys: Vec<f64> = design.subjects.iter().flat_map(|(_, y, _)| y.iter().copied()).collect();
    if ys.iter().all(|&v| v == ys[0]) {
        beta.fill(0.0);
        beta[0] = ys[0];
    }
    let p = design.p();
    let (fitted, residuals) = fitted_values(design, &beta);
    let k = p + kind.n_params(design.q);
    let ll = f64::INFINITY;
    MixedModelFit {
        spec: design.spec.clone(),
        method,
        terms: design.labels.clone(),
        beta: beta.iter().copied().collect(),
        beta_cov: vec![vec![0.0; p]; p],
        cov: CovStructure { kind, dim: design.q, params: vec![0.0; kind.n_params(design.q)] },
        log_lik: ll,
        k,
        aic: aic(ll, k),
        bic: bic(ll, k, design.n_obs),
        n_obs: design.n_obs,
        n_subjects: design.n_subjects(),
        fitted,
        residuals,
        iterations: 0,
        converged: true,
        degenerate: true,
        design: design.clone(),
    }
}

/// Draws a balanced data set: `n0` CDR0 and `n05` CDR0.5 subjects, each with
/// the four cells LB, LF, RB, RF, mean `X beta` for `spec` and residual
/// covariance `cov`.
pub fn simulate(spec: &ModelSpec, beta: &[f64], cov: &CovStructure, n0: usize, n05: usize, seed: u64) -> Result<Vec<RepeatedObs>> {
    if cov.dim != 4 {
        return Err(Error::DimensionMismatch(format!("simulation uses 4 repeated cells, covariance has {}", cov.dim)));
    }
    if beta.len() != spec.column_labels().len() || !spec.covariates.is_empty() {
        return Err(Error::LengthMismatch(beta.len(), spec.column_labels().len()));
    }
    let l = cov
        .matrix()
        .cholesky()
        .ok_or_else(|| Error::InvalidParameter("covariance is not positive definite".into()))?
        .l();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(4 * (n0 + n05));
    for s in 0..n0 + n05 {
        let group = if s < n0 { Group::Cdr0 } else { Group::Cdr05 };
        let z = DVector::from_fn(4, |_, _| StandardNormal.sample(&mut rng));
        let e = &l * z;
        for (c, &(side, t)) in crate::longitudinal::CELLS.iter().enumerate() {
            let mut o = RepeatedObs { subject: format!("sim{s:04}"), group, side: Some(side), timepoint: Some(t), y: 0.0, covariates: Vec::new() };
            let mut mean = beta[0];
            for (k, term) in spec.terms.iter().enumerate() {
                let code: f64 = term.factors().iter().map(|&f| o.code(f).unwrap_or(0.0)).product();
                mean += beta[1 + k] * code;
            }
            o.y = mean + e[c];
            out.push(o);
        }
    }
    Ok(out)
}
