//! Trilinear sampling on x-fastest voxel arrays, in continuous index
//! coordinates, with clamp-to-edge outside the grid.
//!
//! The derivative helpers return the exact derivative of the interpolant.
//! On a cell face (integer coordinate strictly inside the grid) the
//! interpolant has a kink; there the mean of the one-sided derivatives is
//! returned, which is the central difference when the point is a voxel centre.

#[inline]
pub fn linear_index(dims: [usize; 3], x: usize, y: usize, z: usize) -> usize {
    x + dims[0] * (y + dims[1] * z)
}

#[derive(Clone, Copy, Debug)]
struct AxisCell {
    lo: usize,
    frac: f64,
    clamped: bool,
    n: usize,
}

#[inline]
fn axis_cell(p: f64, n: usize) -> AxisCell {
    if n == 1 {
        return AxisCell { lo: 0, frac: 0.0, clamped: true, n };
    }
    let max = (n - 1) as f64;
    let q = p.clamp(0.0, max);
    let clamped = q != p;
    let lo = (q.floor() as usize).min(n - 2);
    AxisCell { lo, frac: q - lo as f64, clamped, n }
}

#[inline]
fn corners(c: &AxisCell) -> ([usize; 2], [f64; 2]) {
    if c.n == 1 {
        ([0, 0], [1.0, 0.0])
    } else {
        ([c.lo, c.lo + 1], [1.0 - c.frac, c.frac])
    }
}

#[inline]
fn weighted_sum(data: &[f64], dims: [usize; 3], idx: [[usize; 2]; 3], w: [[f64; 2]; 3]) -> f64 {
    let mut acc = 0.0;
    for (c, &wz) in w[2].iter().enumerate() {
        if wz == 0.0 {
            continue;
        }
        for (b, &wy) in w[1].iter().enumerate() {
            if wy == 0.0 {
                continue;
            }
            let row = dims[0] * (idx[1][b] + dims[1] * idx[2][c]);
            let wyz = wy * wz;
            acc += wyz * (w[0][0] * data[row + idx[0][0]] + w[0][1] * data[row + idx[0][1]]);
        }
    }
    acc
}

/// Trilinear sample at continuous index coordinate `p`.
pub fn trilinear(data: &[f64], dims: [usize; 3], p: [f64; 3]) -> f64 {
    let cells = [axis_cell(p[0], dims[0]), axis_cell(p[1], dims[1]), axis_cell(p[2], dims[2])];
    let (i0, w0) = corners(&cells[0]);
    let (i1, w1) = corners(&cells[1]);
    let (i2, w2) = corners(&cells[2]);
    weighted_sum(data, dims, [i0, i1, i2], [w0, w1, w2])
}

/// Trilinear sample and its gradient with respect to the index coordinate.
pub fn trilinear_grad(data: &[f64], dims: [usize; 3], p: [f64; 3]) -> (f64, [f64; 3]) {
    let cells = [axis_cell(p[0], dims[0]), axis_cell(p[1], dims[1]), axis_cell(p[2], dims[2])];
    let mut idx = [[0usize; 2]; 3];
    let mut w = [[0.0f64; 2]; 3];
    for d in 0..3 {
        let (i, ww) = corners(&cells[d]);
        idx[d] = i;
        w[d] = ww;
    }
    let value = weighted_sum(data, dims, idx, w);
    let mut grad = [0.0; 3];
    for d in 0..3 {
        let c = cells[d];
        if c.clamped {
            continue;
        }
        let slab = |j: usize| {
            let mut ii = idx;
            let mut ww = w;
            ii[d] = [j, j];
            ww[d] = [1.0, 0.0];
            weighted_sum(data, dims, ii, ww)
        };
        grad[d] = if c.frac == 0.0 && c.lo >= 1 {
            0.5 * (slab(c.lo + 1) - slab(c.lo - 1))
        } else {
            slab(c.lo + 1) - slab(c.lo)
        };
    }
    (value, grad)
}

/// Adjoint of [`trilinear`]: adds `value` into `acc` with the interpolation weights at `p`.
pub fn scatter(acc: &mut [f64], dims: [usize; 3], p: [f64; 3], value: f64) {
    let cells = [axis_cell(p[0], dims[0]), axis_cell(p[1], dims[1]), axis_cell(p[2], dims[2])];
    let (i0, w0) = corners(&cells[0]);
    let (i1, w1) = corners(&cells[1]);
    let (i2, w2) = corners(&cells[2]);
    for c in 0..2 {
        for b in 0..2 {
            let wyz = w1[b] * w2[c];
            if wyz == 0.0 {
                continue;
            }
            let row = dims[0] * (i1[b] + dims[1] * i2[c]);
            for a in 0..2 {
                let wt = w0[a] * wyz;
                if wt != 0.0 {
                    acc[row + i0[a]] += wt * value;
                }
            }
        }
    }
}
