use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::longitudinal::Group;

/// CDR0.5 when the probability strictly exceeds `p_o`, CDR0 otherwise.
pub fn classify(probabilities: &[f64], p_o: f64) -> Vec<Group> {
    probabilities.iter().map(|&p| if p > p_o { Group::Cdr05 } else { Group::Cdr0 }).collect()
}

/// CDR0.5 if any of the subject's labels is CDR0.5.
pub fn aggregate_subject(labels: &[Group]) -> Result<Group> {
    if labels.is_empty() {
        return Err(Error::MissingData("subject has no classified hippocampi".into()));
    }
    Ok(if labels.contains(&Group::Cdr05) { Group::Cdr05 } else { Group::Cdr0 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    PerHippocampus,
    AnyPositiveSubject,
}

/// Counts follow the paper's naming: `f_cdr0` is CDR0.5 cases predicted as
/// CDR0, `f_cdr05` is CDR0 cases predicted as CDR0.5.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusionSummary {
    pub t_cdr0: usize,
    pub f_cdr0: usize,
    pub t_cdr05: usize,
    pub f_cdr05: usize,
    pub ccr: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

impl ConfusionSummary {
    pub fn from_counts(t_cdr0: usize, f_cdr05: usize, f_cdr0: usize, t_cdr05: usize) -> Self {
        let n0 = t_cdr0 + f_cdr05;
        let n05 = f_cdr0 + t_cdr05;
        let pct = |a: usize, b: usize| if b == 0 { f64::NAN } else { 100.0 * a as f64 / b as f64 };
        Self {
            t_cdr0,
            f_cdr0,
            t_cdr05,
            f_cdr05,
            ccr: pct(t_cdr0 + t_cdr05, n0 + n05),
            sensitivity: pct(t_cdr05, n05),
            specificity: pct(t_cdr0, n0),
        }
    }

    /// True CDR0 count.
    pub fn n_cdr0(&self) -> usize {
        self.t_cdr0 + self.f_cdr05
    }

    /// True CDR0.5 count.
    pub fn n_cdr05(&self) -> usize {
        self.f_cdr0 + self.t_cdr05
    }

    pub fn total(&self) -> usize {
        self.n_cdr0() + self.n_cdr05()
    }

    /// (CCR, sensitivity, specificity) rounded to whole percent, halves away
    /// from zero.
    pub fn rounded(&self) -> (i64, i64, i64) {
        let r = |v: f64| v.round() as i64;
        (r(self.ccr), r(self.sensitivity), r(self.specificity))
    }

    /// Rows are predictions (CDR0, CDR0.5), columns the truth (CDR0, CDR0.5).
    pub fn matrix(&self) -> [[usize; 2]; 2] {
        [[self.t_cdr0, self.f_cdr0], [self.f_cdr05, self.t_cdr05]]
    }
}

pub fn confusion(predicted: &[Group], truth: &[Group]) -> Result<ConfusionSummary> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch(predicted.len(), truth.len()));
    }
    let mut c = [0usize; 4];
    for (p, t) in predicted.iter().zip(truth) {
        let k = match (t, p) {
            (Group::Cdr0, Group::Cdr0) => 0,
            (Group::Cdr0, Group::Cdr05) => 1,
            (Group::Cdr05, Group::Cdr0) => 2,
            (Group::Cdr05, Group::Cdr05) => 3,
        };
        c[k] += 1;
    }
    Ok(ConfusionSummary::from_counts(c[0], c[1], c[2], c[3]))
}

/// Threshold-selection objectives (smaller is better).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Cost {
    /// `-(T0 - F0.5)^w1 (T0.5 - F0)^w2`, each difference taken within a true class.
    C1 { w1: u32, w2: u32 },
    /// `-[eta1 (T0 - F0.5)/N0 + eta2 (T0.5 - F0)/N0.5]`.
    C2 { eta1: f64, eta2: f64 },
}

impl Cost {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Cost::C1 { w1, w2 } => {
                if w1 == 0 || w1 % 2 == 0 || w2 % 2 == 0 || w1 > w2 {
                    return Err(Error::InvalidParameter(format!("C1 weights must be positive odd integers with w1 <= w2, got ({w1}, {w2})")));
                }
            }
            Cost::C2 { eta1, eta2 } => {
                if !(eta1 >= 0.0 && eta2 >= 0.0 && ((eta1 + eta2) - 1.0).abs() < 1e-12) {
                    return Err(Error::InvalidParameter(format!("C2 weights must be non-negative and sum to 1, got ({eta1}, {eta2})")));
                }
            }
        }
        Ok(())
    }

    pub fn evaluate(&self, c: &ConfusionSummary) -> f64 {
        let spec_margin = c.t_cdr0 as f64 - c.f_cdr05 as f64;
        let sens_margin = c.t_cdr05 as f64 - c.f_cdr0 as f64;
        match *self {
            Cost::C1 { w1, w2 } => -(spec_margin.powi(w1 as i32) * sens_margin.powi(w2 as i32)),
            Cost::C2 { eta1, eta2 } => {
                let term = |w: f64, m: f64, n: usize| if w == 0.0 { 0.0 } else { w * m / n as f64 };
                -(term(eta1, spec_margin, c.n_cdr0()) + term(eta2, sens_margin, c.n_cdr05()))
            }
        }
    }
}

/// A run of thresholds sharing one classification; contains `lo`, and
/// contains `hi` only when `hi_closed`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdInterval {
    pub lo: f64,
    pub hi: f64,
    pub hi_closed: bool,
}

impl ThresholdInterval {
    pub fn contains(&self, p: f64) -> bool {
        p >= self.lo && (p < self.hi || (self.hi_closed && p == self.hi))
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdOptimum {
    pub cost: Cost,
    pub value: f64,
    /// Every maximal interval of optimal `p_o` in [0, 1].
    pub intervals: Vec<ThresholdInterval>,
    /// Midpoint of the first optimal interval.
    pub p_opt: f64,
    pub confusion: ConfusionSummary,
}

/// One entry per run of `p_o` in [0, 1] over which the classification is
/// constant, in increasing order.
pub fn threshold_scan(scores: &[f64], truth: &[Group]) -> Result<Vec<(ThresholdInterval, ConfusionSummary)>> {
    if scores.len() != truth.len() {
        return Err(Error::LengthMismatch(scores.len(), truth.len()));
    }
    if scores.iter().any(|s| !(0.0..=1.0).contains(s)) {
        return Err(Error::InvalidParameter("scores must lie in [0, 1]".into()));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let n05 = truth.iter().filter(|&&g| g == Group::Cdr05).count();
    let n0 = truth.len() - n05;
    // Below the smallest score everything is CDR0.5.
    let (mut t0, mut t05) = (0usize, n05);
    let counts = |t0: usize, t05: usize| ConfusionSummary::from_counts(t0, n0 - t0, n05 - t05, t05);
    let mut out = Vec::new();
    let mut lo = 0.0;
    let mut k = 0;
    while k < idx.len() {
        let v = scores[idx[k]];
        if v > lo {
            out.push((ThresholdInterval { lo, hi: v, hi_closed: false }, counts(t0, t05)));
        }
        // From p_o = v on, every score equal to v is CDR0.
        while k < idx.len() && scores[idx[k]] == v {
            match truth[idx[k]] {
                Group::Cdr0 => t0 += 1,
                Group::Cdr05 => t05 -= 1,
            }
            k += 1;
        }
        lo = v;
    }
    out.push((ThresholdInterval { lo, hi: 1.0, hi_closed: true }, counts(t0, t05)));
    Ok(out)
}

/// Exhaustive search over the decision-relevant thresholds.
pub fn optimize_threshold(scores: &[f64], truth: &[Group], cost: Cost) -> Result<ThresholdOptimum> {
    cost.validate()?;
    let scan = threshold_scan(scores, truth)?;
    let values: Vec<f64> = scan.iter().map(|(_, c)| cost.evaluate(c)).collect();
    let best = values.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * best.abs().max(1.0);
    let mut intervals: Vec<ThresholdInterval> = Vec::new();
    let mut first = None;
    for ((iv, c), v) in scan.iter().zip(&values) {
        if *v > best + tol {
            continue;
        }
        first.get_or_insert(*c);
        match intervals.last_mut() {
            Some(last) if last.hi == iv.lo && !last.hi_closed => {
                last.hi = iv.hi;
                last.hi_closed = iv.hi_closed;
            }
            _ => intervals.push(*iv),
        }
    }
    let p_opt = intervals[0].midpoint();
    Ok(ThresholdOptimum { cost, value: best, p_opt, intervals, confusion: first.expect("scan is non-empty") })
}
