//! Order-1 kernel evaluation as an inner product.
//!
//! For a conic `(a, b, c)` and mean `(μx, μy)` the quadric expands to
//!
//! ```text
//! Q = a px² + 2b px py + c py² − 2(aμx + bμy) px − 2(bμx + cμy) py
//!     + (aμx² + 2bμxμy + cμy²)
//! ```
//!
//! which is `u · q` with the pixel vector `u = (px², px py, py², px, py, 1)`.
//! Opacity is positive, so `o·max(c0 + c1 Q, 0) = max(u · s, 0)` with
//! `s = o c1 q + (0, 0, 0, 0, 0, o c0)`. A block of pixels against a block
//! of splats is then a matrix product followed by a ReLU.

use thiserror::Error;

use crate::kernel_math::{KernelKind, KernelSpec};
use crate::projection::ProjectedSplat;

/// Block edge used by [`batch_eval`], matching 16×16 matrix units.
pub const BLOCK: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NpuError {
    #[error("dot-product form supports order-1 polynomial kernels only (got order {0})")]
    WrongOrder(usize),
    #[error("conic is not positive definite")]
    NotPositiveDefinite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelVector(pub [f64; 6]);

impl PixelVector {
    pub fn new(px: f64, py: f64) -> Self {
        Self([px * px, px * py, py * py, px, py, 1.0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplatVector(pub [f64; 6]);

#[inline]
fn dot(u: &[f64; 6], s: &[f64; 6]) -> f64 {
    u[0] * s[0] + u[1] * s[1] + u[2] * s[2] + u[3] * s[3] + u[4] * s[4] + u[5] * s[5]
}

impl SplatVector {
    #[inline]
    pub fn eval(&self, u: &PixelVector) -> f64 {
        dot(&u.0, &self.0).max(0.0)
    }
}

pub fn build_splat_vector(
    p: &ProjectedSplat,
    kernel: &KernelSpec,
) -> Result<SplatVector, NpuError> {
    if kernel.kind() == KernelKind::Exponential || kernel.order() != 1 {
        return Err(NpuError::WrongOrder(kernel.order()));
    }
    if !p.conic.is_positive_definite() {
        return Err(NpuError::NotPositiveDefinite);
    }
    let (a, b, c) = (p.conic.a, p.conic.b, p.conic.c);
    let (mx, my) = (p.mean2d[0], p.mean2d[1]);
    let quadric = [
        a,
        2.0 * b,
        c,
        -2.0 * (a * mx + b * my),
        -2.0 * (b * mx + c * my),
        a * mx * mx + 2.0 * b * mx * my + c * my * my,
    ];
    let o = p.opacity_eff;
    let (c0, c1) = (kernel.coeffs()[0], kernel.coeffs()[1]);
    let mut s = quadric.map(|q| o * c1 * q);
    s[5] += o * c0;
    Ok(SplatVector(s))
}

/// `out[i][j] = max(u_i · s_j, 0)`, computed block by block.
pub fn batch_eval(pixels: &[PixelVector], splats: &[SplatVector]) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; splats.len()]; pixels.len()];
    for pi in (0..pixels.len()).step_by(BLOCK) {
        let pend = (pi + BLOCK).min(pixels.len());
        for sj in (0..splats.len()).step_by(BLOCK) {
            let send = (sj + BLOCK).min(splats.len());
            for i in pi..pend {
                let row = &mut out[i];
                for j in sj..send {
                    row[j] = splats[j].eval(&pixels[i]);
                }
            }
        }
    }
    out
}

/// Components of the order-`N` vectors: `binom(2(N + 1), 2)`.
pub fn vector_dimension(order: usize) -> usize {
    let n = 2 * (order + 1);
    n * (n - 1) / 2
}
