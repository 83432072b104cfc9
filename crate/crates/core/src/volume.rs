//! Regular 3D scalar volumes and the preprocessing applied before registration:
//! interior filling of closed shells, truncated Gaussian smoothing, resampling,
//! and the `MVOL1` binary file format.

use std::collections::VecDeque;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{linear_index, trilinear};

/// Magic bytes that open every `MVOL1` file.
pub const MVOL_MAGIC: &[u8; 5] = b"MVOL1";

/// A regular grid of `f32` samples stored x-fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Volume3D {
    dims: [usize; 3],
    spacing: [f64; 3],
    data: Vec<f32>,
}

impl Volume3D {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], data: Vec<f32>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidVolume(format!("dims must be positive, got {dims:?}")));
        }
        if spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidVolume(format!("spacing must be positive, got {spacing:?}")));
        }
        let n = dims[0] * dims[1] * dims[2];
        if data.len() != n {
            return Err(Error::InvalidVolume(format!("expected {n} values, got {}", data.len())));
        }
        Ok(Self { dims, spacing, data })
    }

    pub fn zeros(dims: [usize; 3], spacing: [f64; 3]) -> Result<Self> {
        Self::new(dims, spacing, vec![0.0; dims[0] * dims[1] * dims[2]])
    }

    /// Builds a volume by evaluating `f(x, y, z)` at every voxel index.
    pub fn from_fn(dims: [usize; 3], spacing: [f64; 3], mut f: impl FnMut(usize, usize, usize) -> f32) -> Result<Self> {
        let mut data = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    data.push(f(x, y, z));
                }
            }
        }
        Self::new(dims, spacing, data)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Volume of one voxel in mm³.
    pub fn voxel_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        linear_index(self.dims, x, y, z)
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f32 {
        self.data[self.index(x, y, z)]
    }

    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum()
    }

    pub fn same_grid(&self, other: &Volume3D) -> bool {
        self.dims == other.dims && self.spacing == other.spacing
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }

    /// Writes the volume in `MVOL1` layout.
    pub fn write_mvol<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MVOL_MAGIC)?;
        for d in self.dims {
            let d = u32::try_from(d).map_err(|_| Error::InvalidVolume("dimension exceeds u32".into()))?;
            w.write_all(&d.to_le_bytes())?;
        }
        for s in self.spacing {
            w.write_all(&s.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.data.len() * 4);
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_mvol<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_mvol_bytes(&bytes)
    }

    pub fn from_mvol_bytes(bytes: &[u8]) -> Result<Self> {
        const HEADER: usize = 5 + 12 + 24;
        if bytes.len() < 5 {
            return Err(Error::Format { offset: bytes.len() as u64, message: "truncated magic".into() });
        }
        if let Some(pos) = (0..5).find(|&i| bytes[i] != MVOL_MAGIC[i]) {
            return Err(Error::Format { offset: pos as u64, message: "bad magic, expected MVOL1".into() });
        }
        if bytes.len() < HEADER {
            return Err(Error::Format { offset: bytes.len() as u64, message: "truncated header".into() });
        }
        let mut dims = [0usize; 3];
        for (i, d) in dims.iter_mut().enumerate() {
            let o = 5 + 4 * i;
            *d = u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
            if *d == 0 {
                return Err(Error::Format { offset: o as u64, message: "zero dimension".into() });
            }
        }
        let mut spacing = [0.0f64; 3];
        for (i, s) in spacing.iter_mut().enumerate() {
            let o = 17 + 8 * i;
            *s = f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
            if !(*s > 0.0) || !s.is_finite() {
                return Err(Error::Format { offset: o as u64, message: "non-positive spacing".into() });
            }
        }
        let n = dims[0]
            .checked_mul(dims[1])
            .and_then(|v| v.checked_mul(dims[2]))
            .ok_or(Error::Format { offset: 5, message: "dimensions overflow".into() })?;
        let expected = HEADER + 4 * n;
        if bytes.len() != expected {
            return Err(Error::Format {
                offset: bytes.len().min(expected) as u64,
                message: format!("expected {expected} bytes, found {}", bytes.len()),
            });
        }
        let data = bytes[HEADER..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(dims, spacing, data)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::from_mvol_bytes(&bytes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_mvol(std::io::BufWriter::new(f))
    }
}

/// Fills the interior of a closed binary shell.
///
/// The exterior is the 6-connected component of background voxels reachable
/// from the grid corners; everything else becomes foreground.
pub fn fill_interior(shell: &Volume3D) -> Result<Volume3D> {
    if !shell.is_binary() {
        return Err(Error::InvalidVolume("fill_interior needs a binary volume".into()));
    }
    let [nx, ny, nz] = shell.dims;
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let on_boundary = x == 0 || y == 0 || z == 0 || x + 1 == nx || y + 1 == ny || z + 1 == nz;
                if on_boundary && shell.get(x, y, z) != 0.0 {
                    return Err(Error::OpenShell(x, y, z));
                }
            }
        }
    }
    let mut exterior = vec![false; shell.len()];
    let mut queue = VecDeque::new();
    for &(x, y, z) in &[
        (0, 0, 0),
        (nx - 1, 0, 0),
        (0, ny - 1, 0),
        (0, 0, nz - 1),
        (nx - 1, ny - 1, 0),
        (nx - 1, 0, nz - 1),
        (0, ny - 1, nz - 1),
        (nx - 1, ny - 1, nz - 1),
    ] {
        let i = shell.index(x, y, z);
        if !exterior[i] {
            exterior[i] = true;
            queue.push_back((x, y, z));
        }
    }
    while let Some((x, y, z)) = queue.pop_front() {
        let mut visit = |x: usize, y: usize, z: usize| {
            let i = shell.index(x, y, z);
            if !exterior[i] && shell.data[i] == 0.0 {
                exterior[i] = true;
                queue.push_back((x, y, z));
            }
        };
        if x > 0 {
            visit(x - 1, y, z);
        }
        if x + 1 < nx {
            visit(x + 1, y, z);
        }
        if y > 0 {
            visit(x, y - 1, z);
        }
        if y + 1 < ny {
            visit(x, y + 1, z);
        }
        if z > 0 {
            visit(x, y, z - 1);
        }
        if z + 1 < nz {
            visit(x, y, z + 1);
        }
    }
    let data = exterior.iter().map(|&e| if e { 0.0 } else { 1.0 }).collect();
    Volume3D::new(shell.dims, shell.spacing, data)
}

/// Normalized truncated Gaussian kernel with `window` taps.
pub fn gaussian_kernel(window: usize, sigma: f64) -> Result<Vec<f64>> {
    if window == 0 || window % 2 == 0 {
        return Err(Error::InvalidParameter(format!("window must be odd and >= 1, got {window}")));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    let r = (window / 2) as i64;
    let mut k: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    Ok(k)
}

fn convolve_axis(src: &[f64], dims: [usize; 3], axis: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let n = dims[axis] as isize;
    let stride = match axis {
        0 => 1,
        1 => dims[0],
        _ => dims[0] * dims[1],
    };
    let mut out = vec![0.0; src.len()];
    // Every output voxel depends only on its own scan line, so chunks by z-slab are independent.
    let slab = dims[0] * dims[1];
    out.par_chunks_mut(slab).enumerate().for_each(|(z, plane)| {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let pos = [x, y, z][axis] as isize;
                let base = linear_index(dims, x, y, z) as isize - pos * stride as isize;
                let mut acc = 0.0;
                for (t, &w) in kernel.iter().enumerate() {
                    let j = (pos + t as isize - r).clamp(0, n - 1);
                    acc += w * src[(base + j * stride as isize) as usize];
                }
                plane[x + dims[0] * y] = acc;
            }
        }
    });
    out
}

/// Separable truncated-Gaussian smoothing with clamp-to-edge boundaries.
pub fn gaussian_smooth(vol: &Volume3D, window: usize, sigma: f64) -> Result<Volume3D> {
    let kernel = gaussian_kernel(window, sigma)?;
    let mut buf = vol.to_f64();
    for axis in 0..3 {
        buf = convolve_axis(&buf, vol.dims, axis, &kernel);
    }
    Volume3D::new(vol.dims, vol.spacing, buf.into_iter().map(|v| v as f32).collect())
}

/// Interpolation mode for [`resample`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Interpolation {
    Nearest,
    Trilinear,
}

/// Resamples by a per-axis scale factor; output spacing is `spacing / factor`.
///
/// Voxel centres are aligned, so output voxel `j` samples input index
/// `(j + 0.5) / factor - 0.5`, clamped to the grid.
pub fn resample(vol: &Volume3D, factor: [f64; 3], mode: Interpolation) -> Result<Volume3D> {
    let mut out_dims = [0usize; 3];
    for d in 0..3 {
        let f = factor[d];
        if !(f > 0.0) || !f.is_finite() {
            return Err(Error::InvalidParameter(format!("factor must be positive, got {f}")));
        }
        let n = vol.dims[d] as f64 * f;
        let r = n.round();
        if (n - r).abs() > 1e-9 * n.max(1.0) || r < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "factor {f} gives non-integer size {n} on axis {d}"
            )));
        }
        out_dims[d] = r as usize;
    }
    let spacing = [vol.spacing[0] / factor[0], vol.spacing[1] / factor[1], vol.spacing[2] / factor[2]];
    let src = vol.to_f64();
    let dims = vol.dims;
    let out = Volume3D::from_fn(out_dims, spacing, |x, y, z| {
        let q = [x, y, z];
        let mut p = [0.0; 3];
        for d in 0..3 {
            p[d] = (q[d] as f64 + 0.5) / factor[d] - 0.5;
        }
        match mode {
            Interpolation::Trilinear => trilinear(&src, dims, p) as f32,
            Interpolation::Nearest => {
                let i = |d: usize| (p[d].round().max(0.0) as usize).min(dims[d] - 1);
                src[linear_index(dims, i(0), i(1), i(2))] as f32
            }
        }
    })?;
    Ok(out)
}

/// Dice overlap of the super-level sets `{a > level}` and `{b > level}`.
pub fn dice(a: &Volume3D, b: &Volume3D, level: f32) -> Result<f64> {
    if a.dims != b.dims {
        return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", a.dims, b.dims)));
    }
    let (mut both, mut na, mut nb) = (0usize, 0usize, 0usize);
    for (&u, &v) in a.data.iter().zip(&b.data) {
        let (iu, iv) = (u > level, v > level);
        na += iu as usize;
        nb += iv as usize;
        both += (iu && iv) as usize;
    }
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * both as f64 / (na + nb) as f64)
}
