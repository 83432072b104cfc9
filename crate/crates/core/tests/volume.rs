use std::collections::VecDeque;

use morphkit::volume::{fill_interior, gaussian_kernel, gaussian_smooth, resample, Interpolation, Volume3D};
use proptest::prelude::*;

fn hollow_sphere(n: usize, radius: f64) -> Volume3D {
    let c = (n as f64 - 1.0) / 2.0;
    Volume3D::from_fn([n, n, n], [1.0; 3], |x, y, z| {
        let d = ((x as f64 - c).powi(2) + (y as f64 - c).powi(2) + (z as f64 - c).powi(2)).sqrt();
        ((d - radius).abs() <= 0.87) as u8 as f32
    })
    .unwrap()
}

/// Counts voxels not reachable from (0,0,0) through zero voxels, with a
/// recursive-free DFS on explicit coordinates.
fn bfs_fill_count(v: &Volume3D) -> usize {
    let [nx, ny, nz] = v.dims();
    let mut seen = vec![vec![vec![false; nz]; ny]; nx];
    let mut stack = VecDeque::from([(0i64, 0i64, 0i64)]);
    seen[0][0][0] = true;
    let mut reached = 1;
    while let Some((x, y, z)) = stack.pop_back() {
        for (dx, dy, dz) in [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)] {
            let (a, b, c) = (x + dx, y + dy, z + dz);
            if a < 0 || b < 0 || c < 0 || a >= nx as i64 || b >= ny as i64 || c >= nz as i64 {
                continue;
            }
            let (a, b, c) = (a as usize, b as usize, c as usize);
            if !seen[a][b][c] && v.get(a, b, c) == 0.0 {
                seen[a][b][c] = true;
                reached += 1;
                stack.push_back((a as i64, b as i64, c as i64));
            }
        }
    }
    nx * ny * nz - reached
}

#[test]
fn sphere_fill_matches_independent_search() {
    let shell = hollow_sphere(16, 6.0);
    let solid = fill_interior(&shell).unwrap();
    assert!(solid.is_binary());
    assert_eq!(solid.sum() as usize, bfs_fill_count(&shell));
    let centre = solid.get(8, 8, 8);
    assert_eq!(centre, 1.0);
}

#[test]
fn solid_input_is_unchanged() {
    let solid = Volume3D::from_fn([7, 7, 7], [1.0; 3], |x, y, z| {
        ((1..6).contains(&x) && (1..6).contains(&y) && (1..6).contains(&z)) as u8 as f32
    })
    .unwrap();
    assert_eq!(fill_interior(&solid).unwrap(), solid);
}

#[test]
fn impulse_response_is_product_kernel() {
    let mut v = Volume3D::zeros([9, 9, 9], [1.0; 3]).unwrap();
    let mut data = v.clone().into_data();
    data[v.index(4, 4, 4)] = 1.0;
    v = Volume3D::new([9, 9, 9], [1.0; 3], data).unwrap();
    let out = gaussian_smooth(&v, 9, 1.0).unwrap();
    // unnormalized taps, normalized by their own sum
    let raw: Vec<f64> = (-4..=4).map(|i: i32| (-(i * i) as f64 / 2.0).exp()).collect();
    let s: f64 = raw.iter().sum();
    for z in 0..9 {
        for y in 0..9 {
            for x in 0..9 {
                let expect = raw[x] * raw[y] * raw[z] / (s * s * s);
                assert!((out.get(x, y, z) as f64 - expect).abs() < 1e-7);
            }
        }
    }
}

fn brute_force_smooth(v: &Volume3D, window: usize, sigma: f64) -> Vec<f64> {
    let k = gaussian_kernel(window, sigma).unwrap();
    let r = (window / 2) as i64;
    let [nx, ny, nz] = v.dims();
    let clamp = |i: i64, n: usize| i.clamp(0, n as i64 - 1) as usize;
    let mut out = Vec::with_capacity(v.len());
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let mut acc = 0.0;
                for c in -r..=r {
                    for b in -r..=r {
                        for a in -r..=r {
                            let w = k[(a + r) as usize] * k[(b + r) as usize] * k[(c + r) as usize];
                            let val = v.get(clamp(x as i64 + a, nx), clamp(y as i64 + b, ny), clamp(z as i64 + c, nz));
                            acc += w * val as f64;
                        }
                    }
                }
                out.push(acc);
            }
        }
    }
    out
}

#[test]
fn smoothing_matches_direct_convolution() {
    let shell = Volume3D::from_fn([12, 12, 12], [1.0; 3], |x, y, z| {
        let inside = |i: usize| (3..=8).contains(&i);
        let face = |i: usize| i == 3 || i == 8;
        (inside(x) && inside(y) && inside(z) && (face(x) || face(y) || face(z))) as u8 as f32
    })
    .unwrap();
    let fast = gaussian_smooth(&shell, 9, 1.0).unwrap();
    let slow = brute_force_smooth(&shell, 9, 1.0);
    for (a, b) in fast.data().iter().zip(&slow) {
        assert!((*a as f64 - b).abs() < 1e-6);
    }
    assert!(fast.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    let mass: f64 = slow.iter().sum();
    assert!((fast.sum() - mass).abs() <= 0.005 * mass);
}

#[test]
fn ramp_resamples_to_analytic_values() {
    let v = Volume3D::from_fn([6, 5, 4], [1.0, 1.0, 1.0], |x, _, _| x as f32).unwrap();
    let up = resample(&v, [2.0, 2.0, 2.0], Interpolation::Trilinear).unwrap();
    assert_eq!(up.dims(), [12, 10, 8]);
    assert_eq!(up.spacing(), [0.5, 0.5, 0.5]);
    for x in 0..12 {
        // centre of output voxel x in input index units
        let u = (x as f64 + 0.5) / 2.0 - 0.5;
        let expect = u.clamp(0.0, 5.0);
        for (y, z) in [(0, 0), (4, 3), (9, 7)] {
            assert!((up.get(x, y, z) as f64 - expect).abs() < 1e-6, "x={x}");
        }
    }
}

#[test]
fn non_integer_output_is_rejected() {
    let v = Volume3D::zeros([5, 4, 4], [1.0; 3]).unwrap();
    assert!(resample(&v, [0.5, 1.0, 1.0], Interpolation::Nearest).is_err());
}

fn binary_volume() -> impl Strategy<Value = Volume3D> {
    (1usize..6, 1usize..6, 1usize..6).prop_flat_map(|(nx, ny, nz)| {
        prop::collection::vec(any::<bool>(), nx * ny * nz).prop_map(move |bits| {
            Volume3D::new([nx, ny, nz], [1.0; 3], bits.into_iter().map(|b| b as u8 as f32).collect()).unwrap()
        })
    })
}

fn padded(v: &Volume3D) -> Volume3D {
    let [nx, ny, nz] = v.dims();
    Volume3D::from_fn([nx + 2, ny + 2, nz + 2], [1.0; 3], |x, y, z| {
        if x == 0 || y == 0 || z == 0 || x > nx || y > ny || z > nz {
            0.0
        } else {
            v.get(x - 1, y - 1, z - 1)
        }
    })
    .unwrap()
}

proptest! {
    #[test]
    fn fill_is_idempotent(v in binary_volume()) {
        let shell = padded(&v);
        let once = fill_interior(&shell).unwrap();
        let twice = fill_interior(&once).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert!(once.data().iter().zip(shell.data()).all(|(a, b)| a >= b));
    }

    #[test]
    fn nearest_resample_round_trips(v in binary_volume(), f in 1usize..4) {
        let f = f as f64;
        let up = resample(&v, [f, f, f], Interpolation::Nearest).unwrap();
        let back = resample(&up, [1.0 / f, 1.0 / f, 1.0 / f], Interpolation::Nearest).unwrap();
        prop_assert_eq!(back.data(), v.data());
        prop_assert_eq!(back.dims(), v.dims());
    }

    #[test]
    fn mvol_round_trips(v in binary_volume(), sx in 0.1f64..3.0) {
        let v = Volume3D::new(v.dims(), [sx, 0.5, 2.0], v.into_data()).unwrap();
        let mut buf = Vec::new();
        v.write_mvol(&mut buf).unwrap();
        prop_assert_eq!(buf.len(), 41 + 4 * v.len());
        prop_assert_eq!(Volume3D::from_mvol_bytes(&buf).unwrap(), v);
    }
}
