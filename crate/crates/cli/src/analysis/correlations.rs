use morphkit::longitudinal::{Side, Timepoint};
use morphkit::stats::{correlation, CorrelationMethod};
use morphkit::{Alternative, Group, MorphTable};
use serde_json::{json, Value};

use super::{cell_label, cell_values, measure_name, AnalysisRequest, TestRow};
use crate::error::Result;

const METHODS: [(CorrelationMethod, &str); 3] =
    [(CorrelationMethod::Pearson, "Pearson"), (CorrelationMethod::Spearman, "Spearman"), (CorrelationMethod::Kendall, "Kendall")];

/// All three coefficients for one pair, tested for positive association.
fn rows(label: &str, x: &[f64], y: &[f64], alpha: f64) -> Result<Vec<TestRow>> {
    METHODS.iter().map(|&(m, name)| TestRow::new(label, name, correlation(x, y, m), Alternative::Greater, alpha)).collect()
}

fn group_suffix(g: Option<Group>) -> String {
    g.map_or_else(String::new, |g| format!(" ({g})"))
}

pub(super) fn run(table: &MorphTable, req: &AnalysisRequest) -> Result<Value> {
    let mut out = serde_json::Map::new();
    let a = req.alpha;
    let subsets = [None, Some(Group::Cdr0), Some(Group::Cdr05)];
    for m in req.measure.measures() {
        let both_sides = |time: Timepoint, g: Option<Group>| -> Vec<f64> {
            [Side::L, Side::R].iter().flat_map(|&s| cell_values(table, m, s, time, g)).collect()
        };
        let mut over_time = Vec::new();
        for g in subsets {
            let label = format!("B vs F{}", group_suffix(g));
            over_time.extend(rows(&label, &both_sides(Timepoint::B, g), &both_sides(Timepoint::F, g), a)?);
        }
        for side in [Side::L, Side::R] {
            for g in [Group::Cdr0, Group::Cdr05] {
                let label = format!("{} vs {}{}", cell_label(side, Timepoint::B), cell_label(side, Timepoint::F), group_suffix(Some(g)));
                let (x, y) = (cell_values(table, m, side, Timepoint::B, Some(g)), cell_values(table, m, side, Timepoint::F, Some(g)));
                over_time.extend(rows(&label, &x, &y, a)?);
            }
        }
        let mut sides = Vec::new();
        for time in [Timepoint::B, Timepoint::F] {
            for g in subsets {
                let label = format!("{} vs {}{}", cell_label(Side::L, time), cell_label(Side::R, time), group_suffix(g));
                let (x, y) = (cell_values(table, m, Side::L, time, g), cell_values(table, m, Side::R, time, g));
                sides.extend(rows(&label, &x, &y, a)?);
            }
        }
        out.insert(measure_name(m).to_string(), json!({"baseline_followup": over_time, "left_right": sides}));
    }
    Ok(Value::Object(out))
}
