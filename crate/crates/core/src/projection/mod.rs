//! Screen-space projection of 3D splats.
//!
//! The 3D covariance `R S Sᵀ Rᵀ` is pushed through the camera rotation and
//! the local affine approximation of the perspective divide. Anti-aliasing
//! adds a variance `v` to the diagonal of the resulting 2D covariance and
//! scales opacity by `sqrt(det Σ' / det(Σ' + vI))`. That ratio is the same
//! for every radially symmetric kernel, since the integral of
//! `k((x−μ)ᵀΣ⁻¹(x−μ))` over the plane is `sqrt(det Σ)` times a
//! kernel-only constant (see [`normalization_integral`]).

mod normalization;
mod sh;

use nalgebra::{Matrix2x3, Matrix3, UnitQuaternion, Vector3};
use thiserror::Error;

pub use normalization::normalization_integral;
pub use sh::{coefficient_count, eval_sh_color, sh_basis, SH_C0};

/// Splats closer than this to the camera plane are dropped.
pub const NEAR_PLANE: f64 = 0.2;

/// Default anti-aliasing variance in px².
pub const DEFAULT_DILATION: f64 = 0.3;

/// Guard band for the early off-screen test, in standard deviations. This is
/// the exponential support at full opacity and the default cutoff, the
/// widest bound any built-in culling mode produces.
const GUARD_SIGMA: f64 = 3.329_1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjectionError {
    #[error("projected covariance is degenerate (det {0:e})")]
    DegenerateCovariance(f64),
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
}

/// Symmetric 2×2 matrix `[[a, b], [b, c]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sym2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Sym2 {
    pub const IDENTITY: Sym2 = Sym2 {
        a: 1.0,
        b: 0.0,
        c: 1.0,
    };

    pub fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    pub fn det(&self) -> f64 {
        self.a * self.c - self.b * self.b
    }

    pub fn add_diagonal(&self, v: f64) -> Self {
        Self::new(self.a + v, self.b, self.c + v)
    }

    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let inv = 1.0 / det;
        Some(Self::new(self.c * inv, -self.b * inv, self.a * inv))
    }

    pub fn is_positive_definite(&self) -> bool {
        self.a > 0.0 && self.det() > 0.0
    }

    /// `dᵀ M d` for `d = (dx, dy)`.
    #[inline]
    pub fn quadratic_form(&self, dx: f64, dy: f64) -> f64 {
        self.a * dx * dx + 2.0 * self.b * dx * dy + self.c * dy * dy
    }
}

/// A 3D Gaussian with activated parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Splat3D {
    pub mean: Vector3<f64>,
    /// Per-axis standard deviations (linear, not log).
    pub scale: Vector3<f64>,
    pub rotation: UnitQuaternion<f64>,
    /// In `[0, 1]` (already passed through the sigmoid).
    pub opacity: f64,
    /// `sh[k][channel]`; band 0 at `k = 0`.
    pub sh: [[f64; 3]; 16],
}

impl Splat3D {
    /// Splat with a constant (band-0) color.
    pub fn with_color(
        mean: Vector3<f64>,
        scale: Vector3<f64>,
        rotation: UnitQuaternion<f64>,
        opacity: f64,
        rgb: [f64; 3],
    ) -> Self {
        let mut sh = [[0.0; 3]; 16];
        sh[0] = rgb.map(|c| (c - 0.5) / SH_C0);
        Self {
            mean,
            scale,
            rotation,
            opacity,
            sh,
        }
    }

    pub fn covariance(&self) -> Matrix3<f64> {
        build_covariance3d(&self.scale, &self.rotation)
    }
}

/// Pinhole camera; `rotation`/`translation` map world points into camera
/// space (x right, y down, z forward).
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Camera {
    /// Deviation of `rotation` from a proper rotation: `max |RᵀR − I|` plus
    /// `|det R − 1|`.
    pub fn rotation_error(rotation: &Matrix3<f64>) -> f64 {
        let gram = rotation.transpose() * rotation - Matrix3::identity();
        gram.abs().max() + (rotation.determinant() - 1.0).abs()
    }

    pub fn validate(&self, tolerance: f64) -> Result<(), ProjectionError> {
        if self.width == 0 || self.height == 0 {
            return Err(ProjectionError::InvalidCamera(format!(
                "image size {}x{}",
                self.width, self.height
            )));
        }
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(ProjectionError::InvalidCamera(format!(
                "focal lengths ({}, {})",
                self.fx, self.fy
            )));
        }
        let err = Self::rotation_error(&self.rotation);
        if !(err <= tolerance) {
            return Err(ProjectionError::InvalidCamera(format!(
                "rotation is not orthonormal (error {err:e})"
            )));
        }
        Ok(())
    }

    /// Camera at `eye` looking at `target`, with `-y` as world up.
    pub fn look_at(
        width: u32,
        height: u32,
        focal: f64,
        eye: Vector3<f64>,
        target: Vector3<f64>,
    ) -> Self {
        let forward = (target - eye).normalize();
        let up = Vector3::new(0.0, -1.0, 0.0);
        let right = forward.cross(&up).normalize();
        let down = forward.cross(&right);
        let rotation =
            Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let translation = -(rotation * eye);
        Self {
            width,
            height,
            fx: focal,
            fy: focal,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            rotation,
            translation,
        }
    }

    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }
}

/// A splat in screen space, ready for binning and blending.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedSplat {
    /// Pixel coordinates; pixel `(i, j)` has its center at `(i + 0.5, j + 0.5)`.
    pub mean2d: [f64; 2],
    /// Anti-aliased 2D covariance `Σ' + vI`.
    pub cov2d: Sym2,
    /// `(Σ' + vI)⁻¹`.
    pub conic: Sym2,
    pub depth: f64,
    pub opacity: f64,
    /// Opacity after the anti-aliasing normalization ratio.
    pub opacity_eff: f64,
    /// Unclamped RGB.
    pub color: [f64; 3],
}

impl ProjectedSplat {
    /// The quadric `Q(v)` at pixel position `(px, py)`.
    #[inline]
    pub fn quadric(&self, px: f64, py: f64) -> f64 {
        self.conic
            .quadratic_form(px - self.mean2d[0], py - self.mean2d[1])
    }
}

pub fn build_covariance3d(scale: &Vector3<f64>, rotation: &UnitQuaternion<f64>) -> Matrix3<f64> {
    let m = rotation.to_rotation_matrix().into_inner() * Matrix3::from_diagonal(scale);
    m * m.transpose()
}

/// Local affine approximation of the projection at camera-space point `p`.
pub fn projection_jacobian(cam: &Camera, p: &Vector3<f64>) -> Matrix2x3<f64> {
    let (x, y, z) = (p.x, p.y, p.z);
    let z2 = z * z;
    Matrix2x3::new(
        cam.fx / z,
        0.0,
        -cam.fx * x / z2,
        0.0,
        cam.fy / z,
        -cam.fy * y / z2,
    )
}

/// Projected covariance `J W Σ Wᵀ Jᵀ` before anti-aliasing.
pub fn project_covariance(cam: &Camera, cov3: &Matrix3<f64>, p_cam: &Vector3<f64>) -> Sym2 {
    let t = projection_jacobian(cam, p_cam) * cam.rotation;
    let s = t * cov3 * t.transpose();
    Sym2::new(s[(0, 0)], 0.5 * (s[(0, 1)] + s[(1, 0)]), s[(1, 1)])
}

/// Projects one splat. `Ok(None)` means culled: behind the near plane or
/// entirely off screen.
pub fn project_splat(
    s: &Splat3D,
    cam: &Camera,
    v_dilation: f64,
    sh_degree: usize,
) -> Result<Option<ProjectedSplat>, ProjectionError> {
    let p_cam = cam.to_camera(&s.mean);
    if p_cam.z <= NEAR_PLANE {
        return Ok(None);
    }
    let mean2d = [
        cam.fx * p_cam.x / p_cam.z + cam.cx,
        cam.fy * p_cam.y / p_cam.z + cam.cy,
    ];
    let cov = project_covariance(cam, &s.covariance(), &p_cam);
    let dilated = cov.add_diagonal(v_dilation);
    let det_aa = dilated.det();
    if !(det_aa > 1e-12) {
        return Err(ProjectionError::DegenerateCovariance(det_aa));
    }

    let hx = GUARD_SIGMA * dilated.a.sqrt();
    let hy = GUARD_SIGMA * dilated.c.sqrt();
    if mean2d[0] + hx < 0.0
        || mean2d[0] - hx > cam.width as f64
        || mean2d[1] + hy < 0.0
        || mean2d[1] - hy > cam.height as f64
    {
        return Ok(None);
    }

    let ratio = (cov.det().max(0.0) / det_aa).sqrt();
    let conic = dilated
        .inverse()
        .ok_or(ProjectionError::DegenerateCovariance(det_aa))?;
    let view = (s.mean - cam.center()).normalize();
    let color = eval_sh_color(&s.sh, [view.x, view.y, view.z], sh_degree);
    Ok(Some(ProjectedSplat {
        mean2d,
        cov2d: dilated,
        conic,
        depth: p_cam.z,
        opacity: s.opacity,
        opacity_eff: s.opacity * ratio,
        color,
    }))
}
