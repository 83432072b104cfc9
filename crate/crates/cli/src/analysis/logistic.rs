use std::collections::BTreeMap;

use morphkit::discrimination::{
    candidate_terms, evaluate_classifier, loocv, optimize_threshold, stepwise_select, subject_scores, Aggregation, ConfusionSummary, Cost, LogisticData,
    LogisticModel, StepwiseOptions, StepwiseTrace,
};
use morphkit::longitudinal::{Side, Timepoint};
use morphkit::{Measure, MorphTable, SubjectRecord};
use serde_json::{json, Value};

use super::{cell_label, cells, degenerate, AnalysisRequest, MeasureSet};
use crate::error::{CliError, Result};

pub(super) const COSTS: [Cost; 4] =
    [Cost::C1 { w1: 1, w2: 1 }, Cost::C1 { w1: 1, w2: 3 }, Cost::C2 { eta1: 0.5, eta2: 0.5 }, Cost::C2 { eta1: 0.3, eta2: 0.7 }];

/// Predictor sets examined for a measure selection, keyed by report name.
pub(super) fn predictor_sets(set: MeasureSet, distance: &'static str, volume: &'static str) -> Vec<(String, Vec<&'static str>)> {
    match set {
        MeasureSet::Distance => vec![("distance".into(), vec![distance])],
        MeasureSet::Volume => vec![("volume".into(), vec![volume])],
        MeasureSet::Both => {
            vec![("distance".into(), vec![distance]), ("volume".into(), vec![volume]), ("volume_distance".into(), vec![volume, distance])]
        }
    }
}

fn value_of(r: &SubjectRecord, var: &str, side: Side, time: Timepoint) -> f64 {
    match var {
        "d" => r.measure(Measure::Distance).get(side, time),
        "v" => r.measure(Measure::Volume).get(side, time),
        "side" => (side == Side::R) as u8 as f64,
        "time" => (time == Timepoint::F) as u8 as f64,
        _ => unreachable!("unknown predictor {var}"),
    }
}

/// One row per subject and selected cell, carrying `vars`.
fn rows(table: &MorphTable, vars: &[&str], keep: impl Fn(Side, Timepoint) -> bool) -> Result<LogisticData> {
    let mut subjects = Vec::new();
    let mut truth = Vec::new();
    let mut cols: BTreeMap<String, Vec<f64>> = vars.iter().map(|v| (v.to_string(), Vec::new())).collect();
    for r in &table.records {
        for (side, time) in cells().filter(|&(s, t)| keep(s, t)) {
            subjects.push(r.subject_id.clone());
            truth.push(r.group);
            for v in vars {
                cols.get_mut(*v).expect("declared").push(value_of(r, v, side, time));
            }
        }
    }
    Ok(LogisticData::new(subjects, truth, cols)?)
}

fn confusion_json(c: &ConfusionSummary) -> Value {
    let (ccr, sens, spec) = c.rounded();
    json!({
        "counts": c,
        "matrix": c.matrix(),
        "percent": {"ccr": ccr, "sensitivity": sens, "specificity": spec},
    })
}

fn describe_model(m: &LogisticModel) -> Value {
    let f = &m.fit;
    let coefs: Vec<Value> = m
        .labels()
        .into_iter()
        .enumerate()
        .map(|(i, t)| json!({"term": t, "estimate": f.beta[i], "se": f.se[i], "z": f.z[i], "p": f.p[i]}))
        .collect();
    json!({
        "terms": m.terms.iter().map(|t| t.label()).collect::<Vec<_>>(),
        "coefficients": coefs,
        "log_lik": f.log_lik,
        "aic": f.aic,
        "converged": f.converged,
        "separation": f.separation,
    })
}

/// Fit summary, rates at the default and prior thresholds, cost-optimal
/// thresholds on subject scores, and leave-one-subject-out rates.
pub(super) fn evaluate(model: &LogisticModel, data: &LogisticData, prior: f64) -> Result<Value> {
    let probs = model.predict(data)?;
    let mut rates = Vec::new();
    for (name, p_o) in [("1/2", 0.5), ("prior", prior)] {
        for aggregation in [Aggregation::PerHippocampus, Aggregation::AnyPositiveSubject] {
            let c = evaluate_classifier(&probs, data, p_o, aggregation)?;
            rates.push(json!({"threshold": name, "p_o": p_o, "aggregation": aggregation, "confusion": confusion_json(&c)}));
        }
    }
    let (scores, truth) = subject_scores(&probs, data);
    let mut optima = Vec::new();
    for cost in COSTS {
        let o = optimize_threshold(&scores, &truth, cost)?;
        optima.push(json!({
            "cost": o.cost,
            "value": o.value,
            "intervals": o.intervals,
            "p_opt": o.p_opt,
            "confusion": confusion_json(&o.confusion),
        }));
    }
    let cv = match loocv(data, &model.terms, 0.5, Aggregation::AnyPositiveSubject) {
        Ok(cv) => json!({
            "p_o": 0.5,
            "aggregation": Aggregation::AnyPositiveSubject,
            "confusion": confusion_json(&cv.confusion),
            "separated_folds": cv.folds.iter().filter(|f| f.separation).count(),
        }),
        Err(e) if degenerate(&e) => json!({"note": e.to_string()}),
        Err(e) => return Err(e.into()),
    };
    Ok(json!({"model": describe_model(model), "rates": rates, "thresholds": optima, "loocv": cv}))
}

/// Turns an error that only says "not estimable here" into a note.
pub(super) fn guarded(r: Result<Value>) -> Result<Value> {
    match r {
        Err(CliError::Engine(e)) if degenerate(&e) => Ok(json!({"note": e.to_string()})),
        other => other,
    }
}

pub(super) fn stepwise(cont: &[&str], cat: &[&str], data: &LogisticData, req: &AnalysisRequest) -> Result<(LogisticModel, StepwiseTrace)> {
    let cands = candidate_terms(cont, cat, req.max_power, true);
    Ok(stepwise_select(&cands, data, &StepwiseOptions { alpha: req.alpha, ..Default::default() })?)
}

/// Proportion of CDR0.5 subjects.
pub(super) fn prior(table: &MorphTable) -> f64 {
    let (n0, n05) = table.group_counts();
    n05 as f64 / (n0 + n05) as f64
}

/// Stepwise models on each subset, the lowest-AIC one evaluated.
fn best_of(subsets: Vec<(String, LogisticData)>, cont: &[&str], cat: &[&str], req: &AnalysisRequest, prior: f64) -> Result<Value> {
    let mut candidates = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    let mut fitted = Vec::new();
    for (label, data) in subsets {
        match stepwise(cont, cat, &data, req) {
            Ok((model, trace)) => {
                let aic = model.fit.aic;
                if !model.fit.separation && best.is_none_or(|(_, a)| aic < a) {
                    best = Some((fitted.len(), aic));
                }
                candidates.push(json!({"subset": label, "model": describe_model(&model), "stepwise": trace}));
                fitted.push((label, model, data));
            }
            Err(CliError::Engine(e)) if degenerate(&e) => candidates.push(json!({"subset": label, "note": e.to_string()})),
            Err(e) => return Err(e),
        }
    }
    let Some((i, _)) = best else {
        return Ok(json!({"candidates": candidates, "note": "no subset gave an estimable model"}));
    };
    let (label, model, data) = &fitted[i];
    Ok(json!({"candidates": candidates, "selected": label, "evaluation": guarded(evaluate(model, data, prior))?}))
}

pub(super) fn run(table: &MorphTable, req: &AnalysisRequest) -> Result<Value> {
    let prior = prior(table);
    let mut out = serde_json::Map::new();
    for (key, cont) in predictor_sets(req.measure, "d", "v") {
        let all = rows(table, &[&["side", "time"][..], &cont].concat(), |_, _| true)?;
        let full_terms = candidate_terms(&cont, &["side", "time"], 1, true);
        let m1 = guarded(LogisticModel::fit(&all, &full_terms).map_err(CliError::from).and_then(|m| evaluate(&m, &all, prior)));
        let m2 = guarded(stepwise(&cont, &["side", "time"], &all, req).and_then(|(m, trace)| {
            let mut v = evaluate(&m, &all, prior)?;
            v["stepwise"] = serde_json::to_value(trace)?;
            Ok(v)
        }));
        let by_time = [Timepoint::B, Timepoint::F]
            .into_iter()
            .map(|t| Ok((format!("{t:?}"), rows(table, &[&["side"][..], &cont].concat(), |_, tt| tt == t)?)))
            .collect::<Result<Vec<_>>>()?;
        let m3 = best_of(by_time, &cont, &["side"], req, prior)?;
        let by_cell = cells()
            .map(|(s, t)| Ok((cell_label(s, t), rows(table, &cont, |ss, tt| ss == s && tt == t)?)))
            .collect::<Result<Vec<_>>>()?;
        let m4 = best_of(by_cell, &cont, &[], req, prior)?;
        out.insert(key, json!({"M_I": m1?, "M_II": m2?, "M_III": m3, "M_IV": m4}));
    }
    Ok(json!({"prior": prior, "costs": COSTS, "models": out}))
}
