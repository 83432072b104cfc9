use std::collections::BTreeMap;

use criterion::{criterion_group, criterion_main, Criterion};
use morphkit::discrimination::{candidate_terms, optimize_threshold, stepwise_select, Cost, LogisticData, StepwiseOptions};
use morphkit::stats::{correlation, cvm_two_sample, lilliefors, wilcoxon_rank_sum, CorrelationMethod};
use morphkit::Group;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sample(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>() + shift).collect()
}

fn tests(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = sample(&mut rng, 36, 0.2);
    let y = sample(&mut rng, 52, 0.0);
    let mut g = c.benchmark_group("stats");
    g.bench_function("rank_sum_exact_36x52", |b| b.iter(|| wilcoxon_rank_sum(&x, &y).unwrap()));
    g.bench_function("cvm_1000_permutations", |b| b.iter(|| cvm_two_sample(&x, &y, 1000, 5).unwrap()));
    g.bench_function("lilliefors_1000_replicates", |b| b.iter(|| lilliefors(&x, 1000, 5).unwrap()));
    g.bench_function("kendall_88", |b| {
        let z: Vec<f64> = x.iter().chain(&y).copied().collect();
        let w: Vec<f64> = z.iter().map(|v| v * v + 0.1 * v.sin()).collect();
        b.iter(|| correlation(&z, &w, CorrelationMethod::Kendall).unwrap())
    });
    g.finish();
}

fn discrimination(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 176;
    let d: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
    let truth: Vec<Group> =
        d.iter().map(|&v| if rng.random::<f64>() < 1.0 / (1.0 + (-(v + 0.5 * v * v - 0.5)).exp()) { Group::Cdr05 } else { Group::Cdr0 }).collect();
    let subjects = (0..n).map(|i| format!("s{}", i / 4)).collect();
    let data = LogisticData::new(subjects, truth.clone(), BTreeMap::from([("d".to_string(), d.clone())])).unwrap();
    let cands = candidate_terms(&["d"], &[], 9, false);
    let mut g = c.benchmark_group("discrimination");
    g.sample_size(20);
    g.bench_function("stepwise_d^1..9", |b| b.iter(|| stepwise_select(&cands, &data, &StepwiseOptions::default()).unwrap()));
    let scores: Vec<f64> = d.iter().map(|v| 1.0 / (1.0 + (-v).exp())).collect();
    g.bench_function("optimize_threshold_c1", |b| b.iter(|| optimize_threshold(&scores, &truth, Cost::C1 { w1: 1, w2: 3 }).unwrap()));
    g.finish();
}

criterion_group!(benches, tests, discrimination);
criterion_main!(benches);
