use morphkit::longitudinal::Gender;
use morphkit::stats::{lilliefors, wilcoxon_rank_sum};
use morphkit::{Alternative, Group, Measure, MorphTable, SubjectRecord};
use serde::Serialize;
use serde_json::{json, Value};

use super::{cell_label, cells, measure_name, quantile, sd, AnalysisRequest, TestRow};
use crate::error::Result;

#[derive(Debug, Serialize)]
struct Describe {
    n: usize,
    mean: f64,
    sd: f64,
    min: f64,
    q1: f64,
    median: f64,
    q3: f64,
    max: f64,
}

fn describe(x: &[f64]) -> Describe {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    Describe {
        n: s.len(),
        mean: super::mean(&s),
        sd: sd(&s),
        min: s[0],
        q1: quantile(&s, 0.25),
        median: quantile(&s, 0.5),
        q3: quantile(&s, 0.75),
        max: s[s.len() - 1],
    }
}

type Getter = Box<dyn Fn(&SubjectRecord) -> f64>;

fn variables(req: &AnalysisRequest) -> Vec<(String, Getter)> {
    let mut v: Vec<(String, Getter)> = vec![
        ("age_years".into(), Box::new(|r| r.age_years)),
        ("education_years".into(), Box::new(|r| r.education_years)),
        ("scan_interval_years".into(), Box::new(|r| r.scan_interval_years)),
        ("bv_base".into(), Box::new(|r| r.brain_volume.0)),
        ("bv_follow".into(), Box::new(|r| r.brain_volume.1)),
        ("icv_base".into(), Box::new(|r| r.icv.0)),
        ("icv_follow".into(), Box::new(|r| r.icv.1)),
    ];
    for m in req.measure.measures() {
        let prefix = match m {
            Measure::Volume => "hv",
            Measure::Distance => "d",
        };
        for (side, time) in cells() {
            let name = format!("{prefix}_{}", cell_label(side, time).to_ascii_lowercase());
            v.push((name, Box::new(move |r: &SubjectRecord| r.measure(m).get(side, time))));
        }
    }
    v
}

pub(super) fn run(table: &MorphTable, req: &AnalysisRequest) -> Result<Value> {
    let groups = [Group::Cdr0, Group::Cdr05];
    let mut rows = Vec::new();
    for (name, get) in variables(req) {
        let all: Vec<f64> = table.records.iter().map(&get).collect();
        let by: Vec<Vec<f64>> = groups.iter().map(|&g| table.records.iter().filter(|r| r.group == g).map(&get).collect()).collect();
        let mut normality = serde_json::Map::new();
        for (g, x) in groups.iter().zip(&by) {
            let seed = req.seed_for(&format!("summary/lilliefors/{name}/{g}"));
            let t = TestRow::new(format!("{name} {g}"), "Lilliefors", lilliefors(x, req.lilliefors_replicates, seed), Alternative::TwoSided, req.alpha)?;
            normality.insert(g.label().to_string(), serde_json::to_value(t)?);
        }
        let rank_sum = TestRow::new(format!("{name} CDR0.5 vs CDR0"), "Wilcoxon rank-sum", wilcoxon_rank_sum(&by[1], &by[0]), Alternative::TwoSided, req.alpha)?;
        rows.push(json!({
            "variable": name,
            "overall": describe(&all),
            "CDR0": describe(&by[0]),
            "CDR0.5": describe(&by[1]),
            "lilliefors": normality,
            "rank_sum": rank_sum,
        }));
    }
    let gender = |g: Group, s: Gender| table.records.iter().filter(|r| r.group == g && r.gender == s).count();
    let (n0, n05) = table.group_counts();
    Ok(json!({
        "groups": {"CDR0": n0, "CDR0.5": n05},
        "gender": {
            "CDR0": {"F": gender(Group::Cdr0, Gender::F), "M": gender(Group::Cdr0, Gender::M)},
            "CDR0.5": {"F": gender(Group::Cdr05, Gender::F), "M": gender(Group::Cdr05, Gender::M)},
        },
        "measures": req.measure.measures().into_iter().map(measure_name).collect::<Vec<_>>(),
        "variables": rows,
    }))
}
