use criterion::{criterion_group, criterion_main, Criterion};
use morphkit::{register, LddmmParams};
use morphkit_bench::sphere;

fn registration(c: &mut Criterion) {
    let mut g = c.benchmark_group("lddmm");
    g.sample_size(10);
    for n in [16, 24] {
        let c0 = n as f64 / 2.0;
        let template = sphere(n, [c0, c0, c0], n as f64 / 5.0);
        let target = sphere(n, [c0 + 1.5, c0, c0], n as f64 / 5.0);
        let params = LddmmParams { max_iters: 20, ..Default::default() };
        g.bench_function(format!("register_{n}^3_20_iters"), |b| b.iter(|| register(&template, &target, &params).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, registration);
criterion_main!(benches);
