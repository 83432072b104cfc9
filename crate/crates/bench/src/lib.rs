//! Shared inputs for the benchmarks.

use morphkit::volume::gaussian_smooth;
use morphkit::Volume3D;

/// Smoothed binary ball on an `n`-cube.
pub fn sphere(n: usize, centre: [f64; 3], radius: f64) -> Volume3D {
    let shell = Volume3D::from_fn([n, n, n], [1.0; 3], |x, y, z| {
        let d2 = (x as f64 - centre[0]).powi(2) + (y as f64 - centre[1]).powi(2) + (z as f64 - centre[2]).powi(2);
        (d2 <= radius * radius) as u8 as f32
    })
    .expect("positive dims");
    gaussian_smooth(&shell, 9, 1.0).expect("valid kernel")
}
