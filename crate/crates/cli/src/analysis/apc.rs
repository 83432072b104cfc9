use std::collections::BTreeMap;

use morphkit::discrimination::{candidate_terms, LogisticData, LogisticModel};
use morphkit::longitudinal::{apc_records, ApcRecord, Side};
use morphkit::mixed::{fit, CovKind, Factor, ModelSpec, RepeatedObs};
use morphkit::stats::{t_test, wilcoxon_rank_sum, TMode};
use morphkit::{Alternative, Group, Measure, MorphTable};
use serde_json::{json, Value};

use super::logistic::{evaluate, guarded, predictor_sets, prior, stepwise};
use super::repeated::describe_fit;
use super::{measure_name, AnalysisRequest, TestRow};
use crate::error::{CliError, Result};

fn apc_of(r: &ApcRecord, m: Measure) -> f64 {
    match m {
        Measure::Volume => r.v_apc,
        Measure::Distance => r.d_apc,
    }
}

fn logistic_data(records: &[ApcRecord], vars: &[&str]) -> Result<LogisticData> {
    let mut cols: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for v in vars {
        let col = records
            .iter()
            .map(|r| match *v {
                "side" => (r.side == Side::R) as u8 as f64,
                "v_apc" => r.v_apc,
                "d_apc" => r.d_apc,
                _ => unreachable!("unknown predictor {v}"),
            })
            .collect();
        cols.insert(v.to_string(), col);
    }
    Ok(LogisticData::new(records.iter().map(|r| r.subject_id.clone()).collect(), records.iter().map(|r| r.group).collect(), cols)?)
}

pub(super) fn run(table: &MorphTable, req: &AnalysisRequest) -> Result<Value> {
    let records = apc_records(table)?;
    let mut measures = serde_json::Map::new();
    for m in req.measure.measures() {
        let name = format!("{}_apc", measure_name(m));
        let obs: Vec<RepeatedObs> = records.iter().map(|r| RepeatedObs::from_apc(r, m)).collect();
        let model = fit(&obs, &ModelSpec::factorial(&name, &[Factor::Diagnosis, Factor::Side])?, CovKind::CS)?;
        let of = |g: Group| records.iter().filter(|r| r.group == g).map(|r| apc_of(r, m)).collect::<Vec<f64>>();
        let (x, y) = (of(Group::Cdr05), of(Group::Cdr0));
        let label = format!("{name} CDR0.5 vs CDR0");
        let two = Alternative::TwoSided;
        measures.insert(
            name,
            json!({
                "mixed_model": describe_fit(&model)?,
                "t_welch": TestRow::new(&label, "t (Welch)", t_test(&x, &y, TMode::Welch), two, req.alpha)?,
                "rank_sum": TestRow::new(&label, "Wilcoxon rank-sum", wilcoxon_rank_sum(&x, &y), two, req.alpha)?,
            }),
        );
    }
    let prior = prior(table);
    let mut logistic = serde_json::Map::new();
    for (key, cont) in predictor_sets(req.measure, "d_apc", "v_apc") {
        let data = logistic_data(&records, &[&["side"][..], &cont].concat())?;
        let full_terms = candidate_terms(&cont, &["side"], 1, true);
        let m1 = guarded(LogisticModel::fit(&data, &full_terms).map_err(CliError::from).and_then(|m| evaluate(&m, &data, prior)))?;
        let m2 = guarded(stepwise(&cont, &["side"], &data, req).and_then(|(m, trace)| {
            let mut v = evaluate(&m, &data, prior)?;
            v["stepwise"] = serde_json::to_value(trace)?;
            Ok(v)
        }))?;
        logistic.insert(format!("{key}_apc"), json!({"M_I": m1, "M_II": m2}));
    }
    Ok(json!({"records": records, "measures": measures, "logistic": logistic}))
}
