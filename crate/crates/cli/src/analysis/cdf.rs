use morphkit::stats::{cramer_test, cvm_two_sample, ks_two_sample};
use morphkit::{Alternative, Group, Measure, MorphTable};
use serde_json::{json, Value};

use super::repeated::fmt17;
use super::{cell_label, cell_values, cells, measure_name, AnalysisRequest, PlotData, TestRow};
use crate::error::Result;

/// Step points of the empirical CDF, one per distinct value.
fn ecdf(x: &[f64]) -> Vec<(f64, f64)> {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, v) in s.iter().enumerate() {
        let f = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == *v => last.1 = f,
            _ => out.push((*v, f)),
        }
    }
    out
}

fn plot(table: &MorphTable, m: Measure) -> PlotData {
    let mut rows = Vec::new();
    for (side, time) in cells() {
        for g in [Group::Cdr0, Group::Cdr05] {
            for (x, f) in ecdf(&cell_values(table, m, side, time, Some(g))) {
                rows.push(vec![cell_label(side, time), g.label().to_string(), fmt17(x), fmt17(f)]);
            }
        }
    }
    PlotData { file_name: format!("ecdf_{}.csv", measure_name(m)), header: ["cell", "group", "x", "F"].map(String::from).to_vec(), rows }
}

pub(super) fn run(table: &MorphTable, req: &AnalysisRequest) -> Result<(Value, Vec<PlotData>)> {
    let mut out = serde_json::Map::new();
    let mut plots = Vec::new();
    let two = Alternative::TwoSided;
    for m in req.measure.measures() {
        let name = measure_name(m);
        let mut tests = Vec::new();
        for (side, time) in cells() {
            let cl = cell_label(side, time);
            let label = format!("{cl}-CDR0.5 vs {cl}-CDR0");
            let (x, y) = (cell_values(table, m, side, time, Some(Group::Cdr05)), cell_values(table, m, side, time, Some(Group::Cdr0)));
            let boot = req.seed_for(&format!("cdf/{name}/{cl}/cramer"));
            let perm = req.seed_for(&format!("cdf/{name}/{cl}/cvm"));
            tests.push(json!({
                "cell": cl,
                "ks": TestRow::new(&label, "Kolmogorov-Smirnov", ks_two_sample(&x, &y), two, req.alpha)?,
                "cramer": TestRow::new(&label, "Cramer", cramer_test(&x, &y, req.bootstrap, boot), two, req.alpha)?,
                "cvm": TestRow::new(&label, "Cramer-von Mises", cvm_two_sample(&x, &y, req.permutations, perm), two, req.alpha)?,
            }));
        }
        out.insert(name.to_string(), Value::Array(tests));
        plots.push(plot(table, m));
    }
    Ok((Value::Object(out), plots))
}
