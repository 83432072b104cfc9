//! Logistic discrimination of CDR0.5 from CDR0: model fitting and
//! selection, thresholded classification, confusion rates, cost-optimal
//! thresholds and leave-one-subject-out validation.

mod logistic;
mod rules;
mod select;

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::longitudinal::Group;

pub use logistic::{fit_logistic, predict_row, LogisticFit, NORM_CAP};
pub use rules::{aggregate_subject, classify, confusion, optimize_threshold, threshold_scan, Aggregation, ConfusionSummary, Cost, ThresholdInterval, ThresholdOptimum};
pub use select::{candidate_terms, stepwise_select, StepwiseOptions, StepwiseTrace};

/// A product of integer powers of named predictors, e.g. `d^2` or `side:d`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LogisticTerm(Vec<(String, u32)>);

impl LogisticTerm {
    pub fn power(var: &str, power: u32) -> Self {
        LogisticTerm(vec![(var.to_string(), power.max(1))])
    }

    pub fn linear(var: &str) -> Self {
        Self::power(var, 1)
    }

    pub fn interaction(a: &LogisticTerm, b: &LogisticTerm) -> Self {
        let mut f: Vec<(String, u32)> = a.0.iter().chain(&b.0).cloned().collect();
        f.sort();
        LogisticTerm(f)
    }

    pub fn factors(&self) -> &[(String, u32)] {
        &self.0
    }

    pub fn is_interaction(&self) -> bool {
        self.0.len() > 1
    }

    /// Single-variable terms an interaction cannot be present without.
    pub fn parents(&self) -> Vec<LogisticTerm> {
        if !self.is_interaction() {
            return Vec::new();
        }
        self.0.iter().map(|(v, p)| LogisticTerm(vec![(v.clone(), *p)])).collect()
    }

    pub fn label(&self) -> String {
        self.0
            .iter()
            .map(|(v, p)| if *p == 1 { v.clone() } else { format!("{v}^{p}") })
            .collect::<Vec<_>>()
            .join(":")
    }

    pub fn column(&self, data: &LogisticData) -> Result<Vec<f64>> {
        let mut col = vec![1.0; data.len()];
        for (v, p) in &self.0 {
            let x = data.variables.get(v).ok_or_else(|| Error::Schema(v.clone()))?;
            for (c, &xi) in col.iter_mut().zip(x) {
                *c *= xi.powi(*p as i32);
            }
        }
        Ok(col)
    }
}

impl fmt::Display for LogisticTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Observations for discrimination: one row per classified unit (a
/// hippocampus scan or a subject), with the subject it belongs to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticData {
    pub subjects: Vec<String>,
    pub truth: Vec<Group>,
    pub variables: BTreeMap<String, Vec<f64>>,
}

impl LogisticData {
    pub fn new(subjects: Vec<String>, truth: Vec<Group>, variables: BTreeMap<String, Vec<f64>>) -> Result<Self> {
        if subjects.len() != truth.len() {
            return Err(Error::LengthMismatch(subjects.len(), truth.len()));
        }
        if let Some(v) = variables.values().find(|v| v.len() != truth.len()) {
            return Err(Error::LengthMismatch(v.len(), truth.len()));
        }
        Ok(Self { subjects, truth, variables })
    }

    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty()
    }

    pub fn labels(&self) -> Vec<bool> {
        self.truth.iter().map(|&g| g == Group::Cdr05).collect()
    }

    pub fn design(&self, terms: &[LogisticTerm]) -> Result<Vec<Vec<f64>>> {
        let cols: Vec<Vec<f64>> = terms.iter().map(|t| t.column(self)).collect::<Result<_>>()?;
        Ok((0..self.len()).map(|i| cols.iter().map(|c| c[i]).collect()).collect())
    }

    /// Rows whose subject satisfies `keep`.
    pub fn filter_subjects(&self, keep: impl Fn(&str) -> bool) -> Self {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(&self.subjects[i])).collect();
        Self {
            subjects: idx.iter().map(|&i| self.subjects[i].clone()).collect(),
            truth: idx.iter().map(|&i| self.truth[i]).collect(),
            variables: self.variables.iter().map(|(k, v)| (k.clone(), idx.iter().map(|&i| v[i]).collect())).collect(),
        }
    }

    /// Distinct subjects in first-seen order.
    pub fn subject_order(&self) -> Vec<String> {
        let mut seen = std::collections::HashSet::new();
        self.subjects.iter().filter(|s| seen.insert(s.as_str())).cloned().collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogisticModel {
    pub terms: Vec<LogisticTerm>,
    pub fit: LogisticFit,
}

impl LogisticModel {
    pub fn fit(data: &LogisticData, terms: &[LogisticTerm]) -> Result<Self> {
        let mut seen = terms.to_vec();
        seen.sort();
        seen.dedup();
        if seen.len() != terms.len() {
            return Err(Error::InvalidParameter("duplicate logistic term".into()));
        }
        let fit = fit_logistic(&data.design(terms)?, &data.labels())?;
        Ok(Self { terms: terms.to_vec(), fit })
    }

    pub fn labels(&self) -> Vec<String> {
        std::iter::once("(Intercept)".to_string()).chain(self.terms.iter().map(LogisticTerm::label)).collect()
    }

    pub fn coefficients(&self) -> BTreeMap<String, f64> {
        self.labels().into_iter().zip(self.fit.beta.iter().copied()).collect()
    }

    pub fn predict(&self, data: &LogisticData) -> Result<Vec<f64>> {
        Ok(data.design(&self.terms)?.iter().map(|row| predict_row(&self.fit.beta, row)).collect())
    }
}

/// Classifies the rows of `data` with threshold `p_o` and tabulates them,
/// either per row or per subject under the any-positive rule.
pub fn evaluate_classifier(probabilities: &[f64], data: &LogisticData, p_o: f64, aggregation: Aggregation) -> Result<ConfusionSummary> {
    let labels = classify(probabilities, p_o);
    match aggregation {
        Aggregation::PerHippocampus => confusion(&labels, &data.truth),
        Aggregation::AnyPositiveSubject => {
            let (pred, truth) = subject_labels(&labels, data)?;
            confusion(&pred, &truth)
        }
    }
}

/// Subject-level (predicted, true) labels under the any-positive rule.
pub fn subject_labels(labels: &[Group], data: &LogisticData) -> Result<(Vec<Group>, Vec<Group>)> {
    let mut pred = Vec::new();
    let mut truth = Vec::new();
    for s in data.subject_order() {
        let rows: Vec<usize> = (0..data.len()).filter(|&i| data.subjects[i] == s).collect();
        pred.push(aggregate_subject(&rows.iter().map(|&i| labels[i]).collect::<Vec<_>>())?);
        truth.push(data.truth[rows[0]]);
    }
    Ok((pred, truth))
}

/// Subject-level scores for threshold scans under the any-positive rule: a
/// subject is CDR0.5 at `p_o` exactly when its largest row probability
/// exceeds `p_o`.
pub fn subject_scores(probabilities: &[f64], data: &LogisticData) -> (Vec<f64>, Vec<Group>) {
    let order = data.subject_order();
    let mut scores = Vec::with_capacity(order.len());
    let mut truth = Vec::with_capacity(order.len());
    for s in order {
        let rows: Vec<usize> = (0..data.len()).filter(|&i| data.subjects[i] == s).collect();
        scores.push(rows.iter().map(|&i| probabilities[i]).fold(f64::NEG_INFINITY, f64::max));
        truth.push(data.truth[rows[0]]);
    }
    (scores, truth)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LoocvFold {
    pub subject: String,
    pub beta: Vec<f64>,
    pub separation: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LoocvResult {
    pub confusion: ConfusionSummary,
    /// Held-out probability for every row of the input.
    pub probabilities: Vec<f64>,
    pub folds: Vec<LoocvFold>,
}

/// Leave-one-subject-out validation of the model with `terms`: every row of
/// a subject is held out together, the model is refitted on the rest and
/// the held-out rows are scored.
pub fn loocv(data: &LogisticData, terms: &[LogisticTerm], p_o: f64, aggregation: Aggregation) -> Result<LoocvResult> {
    let subjects = data.subject_order();
    if subjects.len() < 3 {
        return Err(Error::DegenerateSample(format!("leave-one-out needs at least 3 subjects, got {}", subjects.len())));
    }
    let full = LogisticModel::fit(data, terms)?;
    let folds: Vec<(LoocvFold, Vec<(usize, f64)>)> = subjects
        .par_iter()
        .map(|s| {
            let train = data.filter_subjects(|t| t != s);
            let fit = logistic::fit_from(&train.design(terms)?, &train.labels(), Some(&full.fit.beta))?;
            let held: Vec<usize> = (0..data.len()).filter(|&i| data.subjects[i] == *s).collect();
            let rows = data.design(terms)?;
            let preds = held.iter().map(|&i| (i, predict_row(&fit.beta, &rows[i]))).collect();
            Ok((LoocvFold { subject: s.clone(), beta: fit.beta, separation: fit.separation }, preds))
        })
        .collect::<Result<_>>()?;
    let mut probabilities = vec![f64::NAN; data.len()];
    let mut out = Vec::with_capacity(folds.len());
    for (fold, preds) in folds {
        for (i, p) in preds {
            probabilities[i] = p;
        }
        out.push(fold);
    }
    let confusion = evaluate_classifier(&probabilities, data, p_o, aggregation)?;
    Ok(LoocvResult { confusion, probabilities, folds: out })
}
