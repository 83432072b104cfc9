//! Named analyses over a subject table, each producing one JSON block.

mod apc;
mod cdf;
mod correlations;
mod logistic;
mod pca;
mod posthoc;
mod repeated;
mod summary;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use morphkit::longitudinal::{Side, Timepoint, CELLS};
use morphkit::{Error, Group, Measure, MorphTable, TestResult};
use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Analysis {
    Summary,
    Repeated,
    Posthoc,
    Correlations,
    Cdf,
    Pca,
    Logistic,
    Apc,
    Full,
}

impl Analysis {
    pub const ALL: [Analysis; 8] =
        [Analysis::Summary, Analysis::Repeated, Analysis::Posthoc, Analysis::Correlations, Analysis::Cdf, Analysis::Pca, Analysis::Logistic, Analysis::Apc];

    pub fn name(self) -> &'static str {
        match self {
            Analysis::Summary => "summary",
            Analysis::Repeated => "repeated",
            Analysis::Posthoc => "posthoc",
            Analysis::Correlations => "correlations",
            Analysis::Cdf => "cdf",
            Analysis::Pca => "pca",
            Analysis::Logistic => "logistic",
            Analysis::Apc => "apc",
            Analysis::Full => "full",
        }
    }

    /// Whether the analysis draws random numbers.
    pub fn is_stochastic(self) -> bool {
        matches!(self, Analysis::Summary | Analysis::Posthoc | Analysis::Cdf | Analysis::Full)
    }
}

impl FromStr for Analysis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Analysis::ALL
            .iter()
            .chain(&[Analysis::Full])
            .copied()
            .find(|a| a.name() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown analysis `{s}`"))
    }
}

impl fmt::Display for Analysis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureSet {
    Distance,
    Volume,
    Both,
}

impl MeasureSet {
    pub fn measures(self) -> Vec<Measure> {
        match self {
            MeasureSet::Distance => vec![Measure::Distance],
            MeasureSet::Volume => vec![Measure::Volume],
            MeasureSet::Both => vec![Measure::Distance, Measure::Volume],
        }
    }
}

impl FromStr for MeasureSet {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "distance" => Ok(MeasureSet::Distance),
            "volume" => Ok(MeasureSet::Volume),
            "both" => Ok(MeasureSet::Both),
            _ => Err(format!("unknown measure `{s}` (distance, volume or both)")),
        }
    }
}

/// Everything that determines a stats report besides the table itself.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalysisRequest {
    pub analyses: Vec<Analysis>,
    pub measure: MeasureSet,
    pub seed: Option<u64>,
    /// Cramér bootstrap replicates.
    pub bootstrap: usize,
    /// Cramér-von Mises permutation replicates.
    pub permutations: usize,
    /// Monte Carlo replicates for the Lilliefors null distribution.
    pub lilliefors_replicates: usize,
    /// Highest power of a continuous predictor offered to stepwise selection.
    pub max_power: u32,
    pub alpha: f64,
}

impl Default for AnalysisRequest {
    fn default() -> Self {
        Self {
            analyses: vec![Analysis::Full],
            measure: MeasureSet::Both,
            seed: None,
            bootstrap: 10_000,
            permutations: 10_000,
            lilliefors_replicates: 10_000,
            max_power: 9,
            alpha: 0.05,
        }
    }
}

impl AnalysisRequest {
    /// Requested analyses with `full` expanded, in canonical order.
    pub fn expanded(&self) -> Vec<Analysis> {
        if self.analyses.contains(&Analysis::Full) {
            return Analysis::ALL.to_vec();
        }
        let mut a = self.analyses.clone();
        a.sort();
        a.dedup();
        a
    }

    pub fn validate(&self) -> Result<()> {
        if self.analyses.is_empty() {
            return Err(CliError::Usage("no analysis requested".into()));
        }
        if self.seed.is_none() {
            if let Some(a) = self.expanded().into_iter().find(|a| a.is_stochastic()) {
                return Err(CliError::Usage(format!("analysis `{a}` is randomized; pass --seed or set MORPHKIT_SEED")));
            }
        }
        if self.bootstrap == 0 || self.permutations == 0 || self.lilliefors_replicates == 0 {
            return Err(CliError::Usage("replicate counts must be positive".into()));
        }
        if !(1..=9).contains(&self.max_power) {
            return Err(CliError::Usage(format!("--max-power must be in 1..=9, got {}", self.max_power)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::Usage(format!("--alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }

    /// Seed for the randomized procedure named `label`. Distinct labels get
    /// unrelated streams, so adding an analysis never shifts another's draws.
    pub(crate) fn seed_for(&self, label: &str) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in label.bytes() {
            h = (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3);
        }
        splitmix(self.seed.unwrap_or(0) ^ h)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A plot-ready CSV produced alongside the report.
#[derive(Clone, Debug, PartialEq)]
pub struct PlotData {
    pub file_name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl PlotData {
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| CliError::Usage(e.to_string()))
    }
}

pub struct Outcome {
    pub blocks: BTreeMap<String, Value>,
    pub plots: Vec<PlotData>,
}

/// Runs every requested analysis; any failure aborts the whole set.
pub fn run(table: &MorphTable, req: &AnalysisRequest) -> Result<Outcome> {
    req.validate()?;
    let (n0, n05) = table.group_counts();
    if n0 == 0 || n05 == 0 {
        return Err(CliError::Engine(Error::DegenerateLabels(format!("table has {n0} CDR0 and {n05} CDR0.5 subjects; both groups are required"))));
    }
    let mut blocks = BTreeMap::new();
    let mut plots = Vec::new();
    for a in req.expanded() {
        let value = match a {
            Analysis::Summary => summary::run(table, req)?,
            Analysis::Repeated => {
                let (v, p) = repeated::run(table, req)?;
                plots.extend(p);
                v
            }
            Analysis::Posthoc => posthoc::run(table, req)?,
            Analysis::Correlations => correlations::run(table, req)?,
            Analysis::Cdf => {
                let (v, p) = cdf::run(table, req)?;
                plots.extend(p);
                v
            }
            Analysis::Pca => pca::run(table)?,
            Analysis::Logistic => logistic::run(table, req)?,
            Analysis::Apc => apc::run(table, req)?,
            Analysis::Full => unreachable!("expanded"),
        };
        blocks.insert(a.name().to_string(), value);
    }
    Ok(Outcome { blocks, plots })
}

pub(crate) fn measure_name(m: Measure) -> &'static str {
    match m {
        Measure::Distance => "distance",
        Measure::Volume => "volume",
    }
}

pub(crate) fn cell_label(side: Side, time: Timepoint) -> String {
    format!("{side:?}{time:?}")
}

/// Values of one repeated cell for the subjects in `group` (all when `None`).
pub(crate) fn cell_values(table: &MorphTable, m: Measure, side: Side, time: Timepoint, group: Option<Group>) -> Vec<f64> {
    table.records.iter().filter(|r| group.is_none_or(|g| r.group == g)).map(|r| r.measure(m).get(side, time)).collect()
}

pub(crate) fn cells() -> impl Iterator<Item = (Side, Timepoint)> {
    CELLS.iter().copied()
}

/// One comparison row in the shared report layout.
#[derive(Clone, Debug, Serialize)]
pub(crate) struct TestRow {
    pub comparison: String,
    pub method: String,
    pub statistic: Option<f64>,
    pub p_two_sided: Option<f64>,
    pub p_less: Option<f64>,
    pub p_greater: Option<f64>,
    pub n: Vec<usize>,
    pub significant: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl TestRow {
    /// `significant` is judged on the `tail` p-value at level `alpha`.
    pub fn new(comparison: impl Into<String>, method: &str, r: morphkit::Result<TestResult>, tail: morphkit::Alternative, alpha: f64) -> Result<Self> {
        let comparison = comparison.into();
        match r {
            Ok(t) => Ok(Self {
                comparison,
                method: t.method.clone(),
                statistic: Some(t.statistic),
                p_two_sided: Some(t.p_two_sided),
                p_less: Some(t.p_less),
                p_greater: Some(t.p_greater),
                n: t.n.clone(),
                significant: Some(t.p(tail) < alpha),
                note: None,
            }),
            Err(e) if degenerate(&e) => Ok(Self {
                comparison,
                method: method.to_string(),
                statistic: None,
                p_two_sided: None,
                p_less: None,
                p_greater: None,
                n: Vec::new(),
                significant: None,
                note: Some(e.to_string()),
            }),
            Err(e) => Err(e.into()),
        }
    }
}

/// Errors that mean "this test is undefined for these data" rather than a
/// broken input.
pub(crate) fn degenerate(e: &Error) -> bool {
    matches!(e, Error::DegenerateSample(_) | Error::DegenerateColumn(_) | Error::DegenerateLabels(_) | Error::Numerical(_))
}

/// Linear-interpolation sample quantile (type 7).
pub(crate) fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub(crate) fn sd(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return f64::NAN;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}
