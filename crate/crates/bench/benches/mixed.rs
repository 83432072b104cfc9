use criterion::{criterion_group, criterion_main, Criterion};
use morphkit::mixed::{compare_structures, fit, simulate, CovKind, CovStructure, Factor, ModelSpec};

fn mixed(c: &mut Criterion) {
    let spec = ModelSpec::factorial("y", &[Factor::Side, Factor::Diagnosis, Factor::Timepoint]).unwrap();
    let beta = [1.0, 0.1, 0.4, -0.2, 0.05, 0.0, 0.1, 0.0];
    let cov = CovStructure::new(CovKind::AR1, 4, vec![1.0, 0.6]).unwrap();
    let data = simulate(&spec, &beta, &cov, 26, 18, 1).unwrap();
    let mut g = c.benchmark_group("mixed");
    for kind in CovKind::ALL {
        g.bench_function(format!("fit_{}", kind.label()), |b| b.iter(|| fit(&data, &spec, kind).unwrap()));
    }
    g.bench_function("compare_structures", |b| b.iter(|| compare_structures(&data, &spec, &CovKind::ALL).unwrap()));
    g.finish();
}

criterion_group!(benches, mixed);
criterion_main!(benches);
