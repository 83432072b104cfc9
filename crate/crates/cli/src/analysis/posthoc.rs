use morphkit::longitudinal::{Side, Timepoint};
use morphkit::stats::{brown_forsythe, lilliefors, t_test, wilcoxon_rank_sum, wilcoxon_signed_rank, TMode};
use morphkit::{Alternative, Group, Measure, MorphTable};
use serde_json::{json, Value};

use super::{cell_label, cell_values, cells, measure_name, AnalysisRequest, TestRow};
use crate::error::Result;

const TWO: Alternative = Alternative::TwoSided;

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

struct Ctx<'a> {
    table: &'a MorphTable,
    req: &'a AnalysisRequest,
    m: Measure,
}

impl Ctx<'_> {
    fn normality(&self, label: &str, x: &[f64]) -> Result<TestRow> {
        let seed = self.req.seed_for(&format!("posthoc/{}/{label}", measure_name(self.m)));
        TestRow::new(label, "Lilliefors", lilliefors(x, self.req.lilliefors_replicates, seed), TWO, self.req.alpha)
    }

    /// Two-sample block for `x` vs `y`, with the test the variance check
    /// points to.
    fn independent(&self, label: &str, x: &[f64], y: &[f64], normal: Vec<TestRow>) -> Result<Value> {
        let a = self.req.alpha;
        let bf = TestRow::new(label, "Brown-Forsythe", brown_forsythe(x, y), TWO, a)?;
        let equal_var = bf.p_two_sided.is_none_or(|p| p >= a);
        Ok(json!({
            "comparison": label,
            "lilliefors": normal,
            "brown_forsythe": bf,
            "t_pooled": TestRow::new(label, "t (pooled)", t_test(x, y, TMode::Pooled), TWO, a)?,
            "t_welch": TestRow::new(label, "t (Welch)", t_test(x, y, TMode::Welch), TWO, a)?,
            "rank_sum": TestRow::new(label, "Wilcoxon rank-sum", wilcoxon_rank_sum(x, y), TWO, a)?,
            "recommended": if equal_var { "t_pooled" } else { "rank_sum" },
        }))
    }

    /// Paired block for `x` vs `y` (same subjects).
    fn paired(&self, label: &str, x: &[f64], y: &[f64]) -> Result<Value> {
        let a = self.req.alpha;
        let d = diff(x, y);
        Ok(json!({
            "comparison": label,
            "lilliefors_difference": self.normality(&format!("{label} (difference)"), &d)?,
            "t_paired": TestRow::new(label, "t (paired)", t_test(x, y, TMode::Paired), TWO, a)?,
            "signed_rank": TestRow::new(label, "Wilcoxon signed-rank", wilcoxon_signed_rank(&d), TWO, a)?,
        }))
    }

    fn cell(&self, side: Side, time: Timepoint, g: Group) -> Vec<f64> {
        cell_values(self.table, self.m, side, time, Some(g))
    }

    /// Baseline minus follow-up per subject of `g`.
    fn change(&self, side: Side, g: Group) -> Vec<f64> {
        diff(&self.cell(side, Timepoint::B, g), &self.cell(side, Timepoint::F, g))
    }
}

pub(super) fn run(table: &MorphTable, req: &AnalysisRequest) -> Result<Value> {
    let mut out = serde_json::Map::new();
    let groups = [Group::Cdr0, Group::Cdr05];
    for m in req.measure.measures() {
        let c = Ctx { table, req, m };
        let mut between = Vec::new();
        for (side, time) in cells() {
            let cl = cell_label(side, time);
            let (x, y) = (c.cell(side, time, Group::Cdr05), c.cell(side, time, Group::Cdr0));
            let normal = vec![c.normality(&format!("{cl}-CDR0.5"), &x)?, c.normality(&format!("{cl}-CDR0"), &y)?];
            between.push(c.independent(&format!("{cl}-CDR0.5 vs {cl}-CDR0"), &x, &y, normal)?);
        }
        let mut over_time = Vec::new();
        let mut sides = Vec::new();
        let mut change_sides = Vec::new();
        for g in groups {
            for side in [Side::L, Side::R] {
                let label = format!("{}-{g} vs {}-{g}", cell_label(side, Timepoint::B), cell_label(side, Timepoint::F));
                over_time.push(c.paired(&label, &c.cell(side, Timepoint::B, g), &c.cell(side, Timepoint::F, g))?);
            }
            for time in [Timepoint::B, Timepoint::F] {
                let label = format!("{}-{g} vs {}-{g}", cell_label(Side::L, time), cell_label(Side::R, time));
                sides.push(c.paired(&label, &c.cell(Side::L, time, g), &c.cell(Side::R, time, g))?);
            }
            change_sides.push(c.paired(&format!("(LB-LF)-{g} vs (RB-RF)-{g}"), &c.change(Side::L, g), &c.change(Side::R, g))?);
        }
        let mut change_groups = Vec::new();
        for side in [Side::L, Side::R] {
            let (x, y) = (c.change(side, Group::Cdr05), c.change(side, Group::Cdr0));
            let s = format!("{side:?}");
            let label = format!("({s}B-{s}F)-CDR0.5 vs ({s}B-{s}F)-CDR0");
            let normal = vec![c.normality(&format!("({s}B-{s}F)-CDR0.5"), &x)?, c.normality(&format!("({s}B-{s}F)-CDR0"), &y)?];
            change_groups.push(c.independent(&label, &x, &y, normal)?);
        }
        out.insert(
            measure_name(m).to_string(),
            json!({
                "groups": between,
                "baseline_followup": over_time,
                "left_right": sides,
                "change_left_right": change_sides,
                "change_between_groups": change_groups,
            }),
        );
    }
    Ok(Value::Object(out))
}
