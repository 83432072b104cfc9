use morphkit::pca::{pca, PcaMode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn fixed() -> Vec<Vec<f64>> {
    vec![
        vec![3.0, 7.0, 1.0, 12.0],
        vec![5.0, 6.0, 2.0, 10.0],
        vec![2.0, 9.0, 4.0, 15.0],
        vec![8.0, 4.0, 3.0, 11.0],
        vec![6.0, 5.0, 6.0, 9.0],
        vec![4.0, 8.0, 5.0, 14.0],
    ]
}

/// Characteristic polynomial coefficients c[0..=n] of `a` (monic, c[n] = 1)
/// by the Faddeev–LeVerrier recursion.
fn char_poly(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let matmul = |x: &[Vec<f64>], y: &[Vec<f64>]| -> Vec<Vec<f64>> {
        (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| x[i][k] * y[k][j]).sum()).collect()).collect()
    };
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    let mut m = vec![vec![0.0; n]; n];
    for k in 1..=n {
        let mut next = matmul(a, &m);
        for i in 0..n {
            next[i][i] += c[n - k + 1];
        }
        m = next;
        let am = matmul(a, &m);
        let tr: f64 = (0..n).map(|i| am[i][i]).sum();
        c[n - k] = -tr / k as f64;
    }
    c
}

fn roots_by_bisection(c: &[f64], hi: f64) -> Vec<f64> {
    let f = |x: f64| c.iter().rev().fold(0.0, |acc, &k| acc * x + k);
    let steps = 200_000;
    let mut roots = Vec::new();
    let mut prev = -1e-9;
    for s in 1..=steps {
        let x = -1e-9 + (hi + 2e-9) * s as f64 / steps as f64;
        if f(prev).signum() != f(x).signum() {
            let (mut a, mut b) = (prev, x);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if f(a).signum() == f(mid).signum() {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            roots.push(0.5 * (a + b));
        }
        prev = x;
    }
    roots.sort_by(|a, b| b.total_cmp(a));
    roots
}

#[test]
fn eigenvalues_match_characteristic_polynomial() {
    for mode in [PcaMode::Covariance, PcaMode::Correlation] {
        let r = pca(&fixed(), mode).unwrap();
        let trace: f64 = (0..4).map(|i| r.matrix[i][i]).sum();
        let roots = roots_by_bisection(&char_poly(&r.matrix), trace);
        assert_eq!(roots.len(), 4);
        for (e, root) in r.eigenvalues.iter().zip(&roots) {
            assert!((e - root).abs() < 1e-8, "{e} vs {root}");
        }
    }
}

#[test]
fn reconstruction_reproduces_matrix() {
    let r = pca(&fixed(), PcaMode::Covariance).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            let v: f64 = (0..4).map(|c| r.loadings[i][c] * r.eigenvalues[c] * r.loadings[j][c]).sum();
            assert!((v - r.matrix[i][j]).abs() < 1e-8);
        }
    }
}

#[test]
fn sign_convention_and_scale_invariance() {
    let r = pca(&fixed(), PcaMode::Covariance).unwrap();
    for c in 0..4 {
        let comp = r.component(c);
        let lead = comp.iter().copied().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
        assert!(lead > 0.0);
    }
    let scaled: Vec<Vec<f64>> = fixed().iter().map(|row| row.iter().map(|v| 3.0 * v).collect()).collect();
    let s = pca(&scaled, PcaMode::Covariance).unwrap();
    for c in 0..4 {
        assert!((s.eigenvalues[c] - 9.0 * r.eigenvalues[c]).abs() < 1e-9 * s.eigenvalues[c].max(1.0));
        for v in 0..4 {
            assert!((s.loadings[v][c] - r.loadings[v][c]).abs() < 1e-9);
        }
    }
}

#[test]
fn dominant_and_isotropic_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n01 = Normal::new(0.0, 1.0).unwrap();
    let dominant: Vec<Vec<f64>> = (0..200)
        .map(|_| {
            let x = 10.0 * n01.sample(&mut rng);
            vec![x, 2.0 * x, n01.sample(&mut rng), n01.sample(&mut rng)]
        })
        .collect();
    assert!(pca(&dominant, PcaMode::Covariance).unwrap().prop_var[0] > 0.95);

    let iso: Vec<Vec<f64>> = (0..20_000).map(|_| (0..4).map(|_| n01.sample(&mut rng)).collect()).collect();
    let r = pca(&iso, PcaMode::Correlation).unwrap();
    for p in &r.prop_var {
        assert!((p - 0.25).abs() < 0.02, "{:?}", r.prop_var);
    }
}
