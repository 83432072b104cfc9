use std::collections::BTreeMap;

use morphkit::discrimination::{
    aggregate_subject, candidate_terms, classify, confusion, fit_logistic, loocv, optimize_threshold, predict_row, stepwise_select, threshold_scan, Aggregation,
    ConfusionSummary, Cost, LogisticData, LogisticModel, LogisticTerm, StepwiseOptions,
};
use morphkit::longitudinal::Group::{self, Cdr0 as N, Cdr05 as D};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn bernoulli_logit(rng: &mut ChaCha8Rng, eta: f64) -> bool {
    rng.random::<f64>() < 1.0 / (1.0 + (-eta).exp())
}

fn data_with(vars: Vec<(&str, Vec<f64>)>, y: &[bool]) -> LogisticData {
    let n = y.len();
    LogisticData::new(
        (0..n).map(|i| format!("s{i}")).collect(),
        y.iter().map(|&b| if b { D } else { N }).collect(),
        vars.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
    )
    .unwrap()
}

#[test]
fn two_by_two_slope_is_log_odds_ratio() {
    // a: x=1,y=1  b: x=1,y=0  c: x=0,y=1  d: x=0,y=0
    let (a, b, c, d) = (12, 5, 7, 15);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (xv, yv, k) in [(1.0, true, a), (1.0, false, b), (0.0, true, c), (0.0, false, d)] {
        for _ in 0..k {
            x.push(vec![xv]);
            y.push(yv);
        }
    }
    let f = fit_logistic(&x, &y).unwrap();
    let oracle = ((a * d) as f64 / (b * c) as f64).ln();
    assert!((f.beta[1] - oracle).abs() < 1e-8, "{} vs {oracle}", f.beta[1]);
    assert!((f.beta[0] - (c as f64 / d as f64).ln()).abs() < 1e-8);
}

#[test]
fn intercept_only_matches_group_sizes() {
    let y: Vec<bool> = (0..44).map(|i| i % 44 < 18).collect();
    let f = fit_logistic(&vec![vec![]; 44], &y).unwrap();
    assert!((f.beta[0] - (18.0f64 / 26.0).ln()).abs() < 1e-8);
    assert_eq!(f.aic, f.deviance + 2.0);
}

#[test]
fn score_equations_hold_at_the_estimate() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 300;
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let u: f64 = StandardNormal.sample(&mut rng);
            vec![2.0 + 0.4 * u, (2.0 + 0.4 * u).powi(2), (2.0 + 0.4 * u).powi(5), rng.random::<f64>()]
        })
        .collect();
    let y: Vec<bool> = x.iter().map(|r| bernoulli_logit(&mut rng, -6.0 + 3.0 * r[0] - 0.2 * r[1])).collect();
    let f = fit_logistic(&x, &y).unwrap();
    assert!(f.converged && !f.separation);
    // Score vector computed independently of the solver.
    let mut score = vec![0.0; 5];
    for (r, &yi) in x.iter().zip(&y) {
        let p = predict_row(&f.beta, r);
        let resid = if yi { 1.0 } else { 0.0 } - p;
        score[0] += resid;
        for j in 0..4 {
            score[j + 1] += resid * r[j];
        }
    }
    let inf = score.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(inf <= 1e-8, "{score:?}");
    assert!(f.gradient_norm <= 1e-8);
}

#[test]
fn null_slopes_are_not_significant() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 2000;
    let x: Vec<Vec<f64>> = (0..n).map(|_| vec![StandardNormal.sample(&mut rng)]).collect();
    let mut y: Vec<bool> = x.iter().map(|r| r[0] > 0.3).collect();
    // Labels permuted away from the predictor.
    for i in (1..n).rev() {
        y.swap(i, rng.random_range(0..=i));
    }
    let f = fit_logistic(&x, &y).unwrap();
    assert!(f.p[1] > 0.2, "{}", f.p[1]);

    let mut small = 0;
    for rep in 0..400 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + rep);
        let x: Vec<Vec<f64>> = (0..200).map(|_| vec![StandardNormal.sample(&mut rng)]).collect();
        let y: Vec<bool> = (0..200).map(|_| rng.random::<f64>() < 0.4).collect();
        small += (fit_logistic(&x, &y).unwrap().p[1] < 0.05) as usize;
    }
    assert!((8..=36).contains(&small), "{small}/400");
}

#[test]
fn stepwise_recovers_quadratic_signal() {
    let candidates = candidate_terms(&["x"], &[], 9, false);
    let mut hits = 0;
    for rep in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(20_000 + rep);
        let x: Vec<f64> = (0..500).map(|_| StandardNormal.sample(&mut rng)).collect();
        let y: Vec<bool> = x.iter().map(|&v| bernoulli_logit(&mut rng, -0.5 + 1.0 * v + 0.8 * v * v)).collect();
        let data = data_with(vec![("x", x)], &y);
        let (model, _) = stepwise_select(&candidates, &data, &StepwiseOptions::default()).unwrap();
        hits += (model.terms == vec![LogisticTerm::power("x", 1), LogisticTerm::power("x", 2)]) as usize;
    }
    assert!(hits >= 90, "{hits}/100");
}

#[test]
fn stepwise_on_noise_keeps_intercept_only() {
    let candidates = candidate_terms(&["u", "v"], &[], 1, false);
    let mut hits = 0;
    for rep in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(30_000 + rep);
        let u: Vec<f64> = (0..200).map(|_| StandardNormal.sample(&mut rng)).collect();
        let v: Vec<f64> = (0..200).map(|_| rng.random::<f64>()).collect();
        let y: Vec<bool> = (0..200).map(|_| rng.random::<f64>() < 18.0 / 44.0).collect();
        let data = data_with(vec![("u", u), ("v", v)], &y);
        let (model, trace) = stepwise_select(&candidates, &data, &StepwiseOptions::default()).unwrap();
        if model.terms.is_empty() {
            hits += 1;
            assert!(trace.warnings.iter().any(|w| w.contains("intercept-only")));
        }
    }
    assert!(hits >= 90, "{hits}/100");
}

#[test]
fn single_significant_candidate_is_selected() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x: Vec<f64> = (0..150).map(|_| StandardNormal.sample(&mut rng)).collect();
    let y: Vec<bool> = x.iter().map(|&v| bernoulli_logit(&mut rng, 1.5 * v)).collect();
    let data = data_with(vec![("d", x)], &y);
    let (model, _) = stepwise_select(&[LogisticTerm::linear("d")], &data, &StepwiseOptions::default()).unwrap();
    assert_eq!(model.terms, vec![LogisticTerm::linear("d")]);
}

fn from_matrix(t0: usize, f0: usize, f05: usize, t05: usize) -> (Vec<Group>, Vec<Group>) {
    // Predicted rows (CDR0, CDR0.5) against true columns (CDR0, CDR0.5).
    let mut pred = Vec::new();
    let mut truth = Vec::new();
    for (p, t, k) in [(N, N, t0), (N, D, f0), (D, N, f05), (D, D, t05)] {
        pred.extend(std::iter::repeat(p).take(k));
        truth.extend(std::iter::repeat(t).take(k));
    }
    (pred, truth)
}

#[test]
fn printed_classification_matrices() {
    let cases = [((95, 52, 9, 20), 176, (65, 28, 91)), ((18, 8, 8, 10), 44, (64, 56, 69)), ((22, 8, 4, 10), 44, (73, 56, 85)), ((22, 10, 4, 8), 44, (68, 44, 85))];
    for ((t0, f0, f05, t05), n, rates) in cases {
        let (pred, truth) = from_matrix(t0, f0, f05, t05);
        let c = confusion(&pred, &truth).unwrap();
        assert_eq!(c.total(), n);
        assert_eq!(c.matrix(), [[t0, f0], [f05, t05]]);
        assert_eq!(c.rounded(), rates);
    }
    let c = confusion(&[N, D, D], &[N, D, D]).unwrap();
    assert_eq!(c.rounded(), (100, 100, 100));
    assert!(confusion(&[N], &[N, D]).is_err());
}

fn twelve() -> (Vec<f64>, Vec<Group>) {
    (
        vec![0.08, 0.17, 0.23, 0.31, 0.36, 0.42, 0.47, 0.55, 0.61, 0.68, 0.79, 0.91],
        vec![N, N, D, N, N, D, N, D, N, D, D, D],
    )
}

fn grid_costs(scores: &[f64], truth: &[Group], cost: Cost) -> Vec<(f64, f64)> {
    (0..=1000)
        .map(|i| {
            let p = i as f64 / 1000.0;
            let labels: Vec<Group> = scores.iter().map(|&s| if s > p { D } else { N }).collect();
            let mut c = [0usize; 4];
            for (l, t) in labels.iter().zip(truth) {
                c[match (t, l) {
                    (N, N) => 0,
                    (N, D) => 1,
                    (D, N) => 2,
                    (D, D) => 3,
                }] += 1;
            }
            let (t0, f05, f0, t05) = (c[0] as f64, c[1] as f64, c[2] as f64, c[3] as f64);
            let v = match cost {
                Cost::C1 { w1, w2 } => -((t0 - f05).powi(w1 as i32) * (t05 - f0).powi(w2 as i32)),
                Cost::C2 { eta1, eta2 } => -(eta1 * (t0 - f05) / (t0 + f05) + eta2 * (t05 - f0) / (t05 + f0)),
            };
            (p, v)
        })
        .collect()
}

#[test]
fn interval_scan_matches_dense_grid() {
    let instances = [
        twelve(),
        (vec![0.12, 0.25, 0.33, 0.49, 0.52, 0.58, 0.74, 0.86, 0.93, 0.97], vec![N, D, N, N, D, N, D, D, N, D]),
        (vec![0.05, 0.15, 0.35, 0.45, 0.65, 0.75], vec![D, N, D, N, D, N]),
    ];
    let costs = [Cost::C1 { w1: 1, w2: 1 }, Cost::C1 { w1: 1, w2: 3 }, Cost::C2 { eta1: 0.5, eta2: 0.5 }, Cost::C2 { eta1: 0.3, eta2: 0.7 }];
    for (scores, truth) in &instances {
        for cost in costs {
            let opt = optimize_threshold(scores, truth, cost).unwrap();
            let grid = grid_costs(scores, truth, cost);
            let best = grid.iter().map(|g| g.1).fold(f64::INFINITY, f64::min);
            assert!((opt.value - best).abs() < 1e-12, "{cost:?}: {} vs {best}", opt.value);
            for (p, v) in grid {
                let inside = opt.intervals.iter().any(|iv| iv.contains(p));
                assert_eq!(inside, (v - best).abs() < 1e-12, "{cost:?} at {p}");
            }
        }
    }
}

#[test]
fn threshold_degenerate_cases() {
    let scores = [0.1, 0.2, 0.3, 0.7, 0.8, 0.9];
    let truth = [N, N, N, D, D, D];
    let opt = optimize_threshold(&scores, &truth, Cost::C1 { w1: 1, w2: 1 }).unwrap();
    assert_eq!(opt.intervals.len(), 1);
    assert_eq!((opt.intervals[0].lo, opt.intervals[0].hi), (0.3, 0.7));
    assert_eq!(opt.confusion.rounded(), (100, 100, 100));
    assert_eq!(opt.value, -9.0);

    let spec_only = optimize_threshold(&twelve().0, &twelve().1, Cost::C2 { eta1: 1.0, eta2: 0.0 }).unwrap();
    assert!(spec_only.intervals.iter().any(|iv| iv.contains(1.0)));
    assert_eq!(spec_only.confusion.specificity, 100.0);
    assert!(optimize_threshold(&scores, &truth, Cost::C1 { w1: 2, w2: 3 }).is_err());
}

#[test]
fn rates_are_monotone_in_threshold() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20 {
        let n = rng.random_range(5..60);
        let scores: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() * 20.0).round() / 20.0).collect();
        let truth: Vec<Group> = (0..n).map(|i| if i % 3 == 0 || rng.random::<bool>() { D } else { N }).collect();
        let scan = threshold_scan(&scores, &truth).unwrap();
        for w in scan.windows(2) {
            assert!(w[1].1.sensitivity <= w[0].1.sensitivity);
            assert!(w[1].1.specificity >= w[0].1.specificity);
            assert_eq!(w[0].0.hi, w[1].0.lo);
        }
        assert_eq!(scan[0].0.lo, 0.0);
        assert!(scan.last().unwrap().0.hi_closed);
    }
}

proptest! {
    #[test]
    fn classification_changes_only_at_scores(scores in prop::collection::vec(0.0f64..1.0, 1..20), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let crosses = scores.iter().any(|&s| s >= lo && s < hi);
        if !crosses {
            prop_assert_eq!(classify(&scores, lo), classify(&scores, hi));
        }
    }

    #[test]
    fn aggregation_is_monotone(bits in prop::collection::vec(any::<bool>(), 1..5), flip in 0usize..4) {
        let labels: Vec<Group> = bits.iter().map(|&b| if b { D } else { N }).collect();
        let before = aggregate_subject(&labels).unwrap();
        let mut after = labels.clone();
        let k = flip % after.len();
        after[k] = D;
        let now = aggregate_subject(&after).unwrap();
        prop_assert!(!(before == D && now == N));
        prop_assert_eq!(now, D);
    }
}

fn subjects_data(n_subj: usize, rows_per: usize, seed: u64, separation: f64) -> LogisticData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut subjects = Vec::new();
    let mut truth = Vec::new();
    let mut d = Vec::new();
    for s in 0..n_subj {
        let g = if s % 2 == 0 { D } else { N };
        for _ in 0..rows_per {
            subjects.push(format!("sub{s}"));
            truth.push(g);
            let z: f64 = StandardNormal.sample(&mut rng);
            d.push(if g == D { separation } else { 0.0 } + z);
        }
    }
    LogisticData::new(subjects, truth, BTreeMap::from([("d".to_string(), d)])).unwrap()
}

#[test]
fn loocv_folds_match_naive_refits() {
    let data = subjects_data(6, 4, 12, 0.8);
    let terms = [LogisticTerm::linear("d")];
    let res = loocv(&data, &terms, 0.5, Aggregation::PerHippocampus).unwrap();
    assert_eq!(res.folds.len(), 6);
    for fold in &res.folds {
        let train = data.filter_subjects(|s| s != fold.subject);
        let oracle = LogisticModel::fit(&train, &terms).unwrap();
        for (a, b) in fold.beta.iter().zip(&oracle.fit.beta) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
        for i in (0..data.len()).filter(|&i| data.subjects[i] == fold.subject) {
            assert!((res.probabilities[i] - predict_row(&oracle.fit.beta, &[data.variables["d"][i]])).abs() < 1e-10);
        }
    }
}

#[test]
fn loocv_constant_model_equals_training() {
    let data = subjects_data(20, 4, 3, 0.5);
    let model = LogisticModel::fit(&data, &[]).unwrap();
    let train = morphkit::discrimination::evaluate_classifier(&model.predict(&data).unwrap(), &data, 0.6, Aggregation::AnyPositiveSubject).unwrap();
    let cv = loocv(&data, &[], 0.6, Aggregation::AnyPositiveSubject).unwrap();
    assert_eq!(cv.confusion, train);
}

#[test]
fn loocv_on_separated_groups() {
    let data = subjects_data(30, 2, 21, 4.0);
    let cv = loocv(&data, &[LogisticTerm::linear("d")], 0.5, Aggregation::PerHippocampus).unwrap();
    assert!(cv.confusion.ccr >= 90.0, "{:?}", cv.confusion);
    let s: ConfusionSummary = cv.confusion;
    assert_eq!(s.total(), 60);
}
