use serde::Serialize;

use super::{LogisticData, LogisticModel, LogisticTerm};
use crate::error::{Error, Result};

/// Categorical main effects, powers `1..=max_power` of each continuous
/// predictor and, optionally, pairwise products of the linear terms.
pub fn candidate_terms(continuous: &[&str], categorical: &[&str], max_power: u32, interactions: bool) -> Vec<LogisticTerm> {
    let mut out: Vec<LogisticTerm> = categorical.iter().map(|v| LogisticTerm::linear(v)).collect();
    for v in continuous {
        for p in 1..=max_power.max(1) {
            out.push(LogisticTerm::power(v, p));
        }
    }
    if interactions {
        let linear: Vec<LogisticTerm> = categorical.iter().chain(continuous).map(|v| LogisticTerm::linear(v)).collect();
        for i in 0..linear.len() {
            for j in i + 1..linear.len() {
                out.push(LogisticTerm::interaction(&linear[i], &linear[j]));
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepwiseOptions {
    /// Significance level for backward elimination.
    pub alpha: f64,
    pub max_steps: usize,
}

impl Default for StepwiseOptions {
    fn default() -> Self {
        Self { alpha: 0.05, max_steps: 500 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct StepwiseTrace {
    pub start: Vec<String>,
    /// AIC moves as ("+term" | "-term", AIC after the move).
    pub aic_moves: Vec<(String, f64)>,
    /// Terms removed by backward elimination with their Wald p-value.
    pub eliminated: Vec<(String, f64)>,
    pub warnings: Vec<String>,
}

/// Bidirectional stepwise search minimising AIC over `candidates`, started
/// from the model with every first-power term and interaction (or from the
/// intercept-only model when that cannot be estimated), followed by backward elimination of the least
/// significant term until every Wald p-value is at most `alpha`. Interactions
/// are only present together with their constituent terms. Ties go to the
/// lexicographically smaller term label.
pub fn stepwise_select(candidates: &[LogisticTerm], data: &LogisticData, opts: &StepwiseOptions) -> Result<(LogisticModel, StepwiseTrace)> {
    let mut sorted = candidates.to_vec();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != candidates.len() {
        return Err(Error::InvalidParameter("duplicate candidate term".into()));
    }
    for t in candidates {
        if let Some(p) = t.parents().into_iter().find(|p| !candidates.contains(p)) {
            return Err(Error::InvalidParameter(format!("interaction {t} needs candidate {p}")));
        }
    }
    let canonical = |terms: &[LogisticTerm]| -> Vec<LogisticTerm> { candidates.iter().filter(|c| terms.contains(c)).cloned().collect() };
    let usable = |terms: &[LogisticTerm]| LogisticModel::fit(data, terms).ok().filter(|m| !m.fit.separation);

    let mut trace = StepwiseTrace::default();
    let full: Vec<LogisticTerm> = candidates.iter().filter(|t| t.factors().iter().all(|(_, p)| *p == 1)).cloned().collect();
    let (mut current, mut model) = match usable(&full) {
        Some(m) => (full, m),
        None => {
            trace.warnings.push("full linear model is not estimable; starting from the intercept-only model".into());
            (Vec::new(), LogisticModel::fit(data, &[])?)
        }
    };
    trace.start = current.iter().map(LogisticTerm::label).collect();

    for _ in 0..opts.max_steps {
        let mut moves: Vec<(f64, String, Vec<LogisticTerm>)> = Vec::new();
        for t in &current {
            if current.iter().any(|o| o.parents().contains(t)) {
                continue;
            }
            let next: Vec<LogisticTerm> = current.iter().filter(|o| *o != t).cloned().collect();
            moves.push((f64::NAN, format!("-{t}"), next));
        }
        for c in candidates {
            if current.contains(c) || c.parents().iter().any(|p| !current.contains(p)) {
                continue;
            }
            let mut next = current.clone();
            next.push(c.clone());
            moves.push((f64::NAN, format!("+{c}"), canonical(&next)));
        }
        let mut best: Option<(f64, String, LogisticModel)> = None;
        for (_, label, terms) in moves {
            let Some(m) = usable(&terms) else { continue };
            let better = match &best {
                None => true,
                Some((a, l, _)) => m.fit.aic < *a || (m.fit.aic == *a && label[1..] < l[1..]),
            };
            if better {
                best = Some((m.fit.aic, label, m));
            }
        }
        match best {
            Some((aic, label, m)) if aic < model.fit.aic - 1e-9 => {
                trace.aic_moves.push((label, aic));
                current = m.terms.clone();
                model = m;
            }
            _ => break,
        }
    }

    loop {
        let removable: Vec<usize> = (0..current.len()).filter(|&i| !current.iter().any(|o| o.parents().contains(&current[i]))).collect();
        let worst = removable
            .iter()
            .map(|&i| (model.fit.p[i + 1], i))
            .filter(|(p, _)| !(*p <= opts.alpha))
            .max_by(|a, b| {
                let pa = if a.0.is_nan() { f64::INFINITY } else { a.0 };
                let pb = if b.0.is_nan() { f64::INFINITY } else { b.0 };
                pa.total_cmp(&pb).then_with(|| current[b.1].label().cmp(&current[a.1].label()))
            });
        let Some((p, i)) = worst else { break };
        trace.eliminated.push((current[i].label(), p));
        current.remove(i);
        model = LogisticModel::fit(data, &current)?;
        if model.fit.separation {
            trace.warnings.push(format!("model after removing a term is separated ({})", current.iter().map(LogisticTerm::label).collect::<Vec<_>>().join(", ")));
        }
    }
    if current.is_empty() {
        trace.warnings.push("no term survived selection; intercept-only model".into());
    }
    Ok((model, trace))
}
