//! Splat kernels as functions of the quadric `x = (v − μ')ᵀ Σ'⁻¹ (v − μ')`.
//!
//! The reference kernel is `g(x) = exp(−x/2)`. Its replacements are ReLU
//! polynomials `max(Σ c_i x^i, 0)` of order one to three, fitted to `g` on
//! the range of quadric values that survive the `1/255` cutoff. Because the
//! polynomials reach zero at a finite root, every kernel has a closed-form
//! culling radius, optionally tightened by the splat's opacity.

mod file;
mod fit;
mod roots;

use std::sync::OnceLock;

use thiserror::Error;

pub use file::{KernelFile, KernelFileError};
pub use fit::{fit_polynomial, fit_sequence, FitConfig, FitError, FitResult};
pub use roots::{first_positive_root, horner};

/// The cutoff below which a fragment is considered invisible.
pub const DEFAULT_EPSILON: f64 = 1.0 / 255.0;

/// Tolerance for the cached root of a polynomial kernel.
const ROOT_RESIDUAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("unsupported polynomial order {0} (expected 1..=3)")]
    UnsupportedOrder(usize),
    #[error("polynomial coefficients must be finite")]
    NonFiniteCoefficients,
    #[error("polynomial must be positive at the splat center, got {0}")]
    NonPositiveAtCenter(f64),
    #[error("order-1 kernel must decay (slope {0} is not negative)")]
    NonDecayingLinear(f64),
    #[error("polynomial has no positive root")]
    NoPositiveRoot,
    #[error("splat contributes less than the cutoff everywhere")]
    FullyCulled,
    #[error("the exponential kernel has unbounded support for a zero cutoff")]
    EpsilonZeroUnbounded,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    Exponential,
    /// `max(p(x), 0)` everywhere.
    PolynomialRelu,
    /// `p(x)` before the first positive root, zero afterwards.
    PolynomialPiecewise,
}

/// A kernel function together with its cached first positive root.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    kind: KernelKind,
    coeffs: Vec<f64>,
    first_root: f64,
}

impl KernelSpec {
    pub fn exponential() -> Self {
        Self {
            kind: KernelKind::Exponential,
            coeffs: Vec::new(),
            first_root: f64::INFINITY,
        }
    }

    /// Builds a ReLU polynomial kernel; `coeffs[i]` multiplies `x^i`.
    pub fn polynomial_relu(coeffs: Vec<f64>) -> Result<Self, KernelError> {
        Self::polynomial(KernelKind::PolynomialRelu, coeffs)
    }

    /// Builds a kernel that follows the polynomial up to its first root and
    /// is zero from there on.
    pub fn polynomial_piecewise(coeffs: Vec<f64>) -> Result<Self, KernelError> {
        Self::polynomial(KernelKind::PolynomialPiecewise, coeffs)
    }

    pub fn polynomial(kind: KernelKind, coeffs: Vec<f64>) -> Result<Self, KernelError> {
        if kind == KernelKind::Exponential {
            return Err(KernelError::InvalidArgument(
                "exponential kernel takes no coefficients".into(),
            ));
        }
        let order = coeffs.len().saturating_sub(1);
        if !(1..=3).contains(&order) {
            return Err(KernelError::UnsupportedOrder(order));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(KernelError::NonFiniteCoefficients);
        }
        if coeffs[0] <= 0.0 {
            return Err(KernelError::NonPositiveAtCenter(coeffs[0]));
        }
        if order == 1 && coeffs[1] >= 0.0 {
            return Err(KernelError::NonDecayingLinear(coeffs[1]));
        }
        let first_root = first_positive_root(&coeffs)?;
        let residual = horner(&coeffs, first_root).abs();
        if residual >= ROOT_RESIDUAL_TOLERANCE {
            return Err(KernelError::InvalidArgument(format!(
                "root {first_root} leaves residual {residual:e}"
            )));
        }
        Ok(Self {
            kind,
            coeffs,
            first_root,
        })
    }

    /// Same coefficients, truncated at the first root.
    pub fn to_piecewise(&self) -> Self {
        match self.kind {
            KernelKind::Exponential => self.clone(),
            _ => Self {
                kind: KernelKind::PolynomialPiecewise,
                ..self.clone()
            },
        }
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    /// Polynomial order; zero for the exponential kernel.
    pub fn order(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// First positive root of the polynomial, `+∞` for the exponential.
    pub fn first_root(&self) -> f64 {
        self.first_root
    }

    pub fn is_polynomial(&self) -> bool {
        self.kind != KernelKind::Exponential
    }

    /// Kernel value at the splat center.
    pub fn peak(&self) -> f64 {
        match self.kind {
            KernelKind::Exponential => 1.0,
            _ => self.coeffs[0],
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        eval_kernel(self, x)
    }
}

/// Evaluates the kernel at quadric value `x ≥ 0`.
#[inline]
pub fn eval_kernel(spec: &KernelSpec, x: f64) -> f64 {
    match spec.kind {
        KernelKind::Exponential => (-0.5 * x).exp(),
        KernelKind::PolynomialRelu => horner(&spec.coeffs, x).max(0.0),
        KernelKind::PolynomialPiecewise => {
            if x < spec.first_root {
                horner(&spec.coeffs, x)
            } else {
                0.0
            }
        }
    }
}

/// A support radius in standard deviations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CullingBound {
    pub radius_sigma: f64,
    /// `radius_sigma²`, the matching bound on the quadric.
    pub quadric_root: f64,
    pub opacity_aware: bool,
}

impl CullingBound {
    fn from_quadric(x: f64, opacity_aware: bool) -> Self {
        let radius_sigma = x.max(0.0).sqrt();
        Self {
            radius_sigma,
            quadric_root: radius_sigma * radius_sigma,
            opacity_aware,
        }
    }
}

/// Radius `t` at which `opacity · k(t²) = epsilon`.
///
/// For polynomial kernels the cutoff is folded into the constant term,
/// `c0 − ε/o`, and the first positive root of the shifted polynomial is the
/// quadric bound. `epsilon = 0` gives the opacity-independent zero crossing.
/// The exponential kernel uses `sqrt(2 ln(o/ε))`.
pub fn culling_radius(
    spec: &KernelSpec,
    opacity: f64,
    epsilon: f64,
) -> Result<CullingBound, KernelError> {
    if !(opacity > 0.0 && opacity <= 1.0) {
        return Err(KernelError::InvalidArgument(format!(
            "opacity {opacity} outside (0, 1]"
        )));
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(KernelError::InvalidArgument(format!(
            "epsilon {epsilon} outside [0, 1)"
        )));
    }
    let opacity_aware = epsilon > 0.0;
    match spec.kind {
        KernelKind::Exponential => {
            if epsilon == 0.0 {
                return Err(KernelError::EpsilonZeroUnbounded);
            }
            if opacity <= epsilon {
                return Err(KernelError::FullyCulled);
            }
            Ok(CullingBound::from_quadric(
                2.0 * (opacity / epsilon).ln(),
                opacity_aware,
            ))
        }
        KernelKind::PolynomialRelu | KernelKind::PolynomialPiecewise => {
            if opacity * spec.coeffs[0] <= epsilon {
                return Err(KernelError::FullyCulled);
            }
            let mut shifted = spec.coeffs.clone();
            shifted[0] -= epsilon / opacity;
            let x = first_positive_root(&shifted)?;
            Ok(CullingBound::from_quadric(x, opacity_aware))
        }
    }
}

/// Upper end of the quadric range seen by a tile rasterizer: a splat with
/// smallest scale `s_min` that barely touches a tile of `tile_size_px`
/// pixels is still evaluated at the far corner of that tile.
pub fn extended_fit_range_xmax(tile_size_px: f64, s_min: f64, epsilon: f64) -> f64 {
    let base = (-2.0 * epsilon.ln()).sqrt();
    (std::f64::consts::SQRT_2 * tile_size_px / s_min + base).powi(2)
}

/// The kernels compared throughout the toolkit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StandardKernel {
    Exponential,
    Linear,
    Quadratic,
    QuadraticPiecewise,
    Cubic,
}

impl StandardKernel {
    pub const ALL: [StandardKernel; 5] = [
        StandardKernel::Exponential,
        StandardKernel::Linear,
        StandardKernel::Quadratic,
        StandardKernel::QuadraticPiecewise,
        StandardKernel::Cubic,
    ];

    /// Short label used by the CLI and reports (`exp`, `f1`, `f2`, `f2p`, `f3`).
    pub fn label(self) -> &'static str {
        match self {
            StandardKernel::Exponential => "exp",
            StandardKernel::Linear => "f1",
            StandardKernel::Quadratic => "f2",
            StandardKernel::QuadraticPiecewise => "f2p",
            StandardKernel::Cubic => "f3",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.label() == label)
    }

    /// The kernel fitted with the default configuration. Fits run once per
    /// process and are cached.
    pub fn spec(self) -> KernelSpec {
        static FITS: OnceLock<Vec<FitResult>> = OnceLock::new();
        let fits = FITS.get_or_init(|| {
            fit_sequence(&FitConfig::with_order(3)).expect("default fit configuration is valid")
        });
        match self {
            StandardKernel::Exponential => KernelSpec::exponential(),
            StandardKernel::Linear => fits[0].kernel.clone(),
            StandardKernel::Quadratic => fits[1].kernel.clone(),
            StandardKernel::QuadraticPiecewise => fits[1].kernel.to_piecewise(),
            StandardKernel::Cubic => fits[2].kernel.clone(),
        }
    }
}
