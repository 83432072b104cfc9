use morphkit::longitudinal::{to_long, Side, Timepoint};
use morphkit::mixed::{compare_structures, f_tests, fit, CovKind, Factor, MixedModelFit, ModelSpec, RepeatedObs};
use morphkit::{Group, Measure, MorphTable};
use serde_json::{json, Value};

use super::{cell_values, measure_name, sd, AnalysisRequest, PlotData};
use crate::error::Result;

/// Fixed effects, covariance estimate and F tests of one fit.
pub(super) fn describe_fit(f: &MixedModelFit) -> Result<Value> {
    let tests = f_tests(f)?;
    let effects: Vec<Value> = f
        .terms
        .iter()
        .enumerate()
        .map(|(i, t)| json!({"term": t, "estimate": f.beta[i], "se": f.beta_cov[i][i].max(0.0).sqrt()}))
        .collect();
    Ok(json!({
        "structure": f.cov.kind.label(),
        "covariance_params": f.cov.params,
        "covariance": matrix_of(f),
        "log_lik": f.log_lik,
        "k": f.k,
        "aic": f.aic,
        "bic": f.bic,
        "n_obs": f.n_obs,
        "n_subjects": f.n_subjects,
        "converged": f.converged,
        "fixed_effects": effects,
        "f_tests": tests,
    }))
}

fn matrix_of(f: &MixedModelFit) -> Vec<Vec<f64>> {
    let m = f.cov.matrix();
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn means_plot(table: &MorphTable, m: Measure) -> PlotData {
    let mut rows = Vec::new();
    for time in [Timepoint::B, Timepoint::F] {
        for g in [Group::Cdr0, Group::Cdr05] {
            let x: Vec<f64> = [Side::L, Side::R].iter().flat_map(|&s| cell_values(table, m, s, time, Some(g))).collect();
            rows.push(vec!["group".into(), g.label().into(), format!("{time:?}"), fmt17(super::mean(&x)), fmt17(sd(&x)), x.len().to_string()]);
        }
        for s in [Side::L, Side::R] {
            let x = cell_values(table, m, s, time, None);
            rows.push(vec!["side".into(), format!("{s:?}"), format!("{time:?}"), fmt17(super::mean(&x)), fmt17(sd(&x)), x.len().to_string()]);
        }
    }
    PlotData {
        file_name: format!("interaction_{}.csv", measure_name(m)),
        header: ["factor", "level", "timepoint", "mean", "sd", "n"].map(String::from).to_vec(),
        rows,
    }
}

pub(crate) fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        String::new()
    }
}

pub(super) fn run(table: &MorphTable, req: &AnalysisRequest) -> Result<(Value, Vec<PlotData>)> {
    let mut out = serde_json::Map::new();
    let mut plots = Vec::new();
    for m in req.measure.measures() {
        let name = measure_name(m);
        let data: Vec<RepeatedObs> = to_long(table, m).iter().map(RepeatedObs::from).collect();
        let group_time = fit(&data, &ModelSpec::factorial(name, &[Factor::Diagnosis, Factor::Timepoint])?, CovKind::CS)?;
        let side_time = fit(&data, &ModelSpec::factorial(name, &[Factor::Side, Factor::Timepoint])?, CovKind::CS)?;
        let full = ModelSpec::factorial(name, &[Factor::Side, Factor::Diagnosis, Factor::Timepoint])?;
        let comparison = compare_structures(&data, &full, &CovKind::ALL)?;
        let pick = |k: CovKind| comparison.fits.iter().find(|f| f.cov.kind == k).expect("every kind was fitted");
        let mut cell_means = Vec::new();
        for (side, time) in super::cells() {
            for g in [Group::Cdr0, Group::Cdr05] {
                let x = cell_values(table, m, side, time, Some(g));
                cell_means.push(json!({"cell": super::cell_label(side, time), "group": g, "mean": super::mean(&x), "sd": sd(&x), "n": x.len()}));
            }
        }
        out.insert(
            name.to_string(),
            json!({
                "group_by_time": describe_fit(&group_time)?,
                "side_by_time": describe_fit(&side_time)?,
                "structures": comparison,
                "selected": describe_fit(pick(comparison.best_aic))?,
                "unstructured_covariance": matrix_of(pick(CovKind::UN)),
                "cell_means": cell_means,
            }),
        );
        plots.push(means_plot(table, m));
    }
    Ok((Value::Object(out), plots))
}
