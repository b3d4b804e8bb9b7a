use std::f64::consts::PI;

use super::Sym2;
use crate::kernel_math::{eval_kernel, KernelKind, KernelSpec};

const RADIAL_NODES: usize = 48;
const ANGULAR_NODES: usize = 64;

/// Quadric extent used for the exponential kernel; `exp(−x/2)` is below
/// `1e-7` past it.
fn exponential_extent() -> f64 {
    -2.0 * 1e-7f64.ln()
}

/// `∫ k((x − μ)ᵀ Σ⁻¹ (x − μ)) dx` over the plane, by quadrature.
///
/// The integration points are laid out on a polar grid in the whitened
/// frame `y` and mapped back with `x = L y` (`Σ = L Lᵀ`); the kernel is then
/// evaluated on the quadric computed from `Σ⁻¹` in the original frame and
/// weighted by the Jacobian `|det L|`. The radial coordinate is integrated
/// in `u = |y|²` with Gauss–Legendre nodes up to the kernel's first root.
pub fn normalization_integral(spec: &KernelSpec, cov2d: &Sym2) -> f64 {
    assert!(
        cov2d.is_positive_definite(),
        "covariance must be positive definite"
    );
    let extent = match spec.kind() {
        KernelKind::Exponential => exponential_extent(),
        _ => spec.first_root(),
    };

    let l11 = cov2d.a.sqrt();
    let l21 = cov2d.b / l11;
    let l22 = (cov2d.c - l21 * l21).sqrt();
    let jacobian = l11 * l22;
    let precision = cov2d.inverse().expect("positive definite");

    let (nodes, weights) = gauss_legendre(RADIAL_NODES);
    let dtheta = 2.0 * PI / ANGULAR_NODES as f64;
    let mut total = 0.0;
    for k in 0..ANGULAR_NODES {
        let theta = (k as f64 + 0.5) * dtheta;
        let (sin, cos) = theta.sin_cos();
        for (&t, &w) in nodes.iter().zip(&weights) {
            let u = 0.5 * extent * (t + 1.0);
            let rho = u.sqrt();
            let (y1, y2) = (rho * cos, rho * sin);
            let x1 = l11 * y1;
            let x2 = l21 * y1 + l22 * y2;
            let q = precision.quadratic_form(x1, x2);
            // dy = ρ dρ dθ = ½ du dθ, and du = extent/2 · dt.
            total += w * 0.25 * extent * dtheta * eval_kernel(spec, q);
        }
    }
    total * jacobian
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(RADIAL_NODES);
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(6)).sum();
        assert!((integral - 2.0 / 7.0).abs() < 1e-13);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn gaussian_integral_is_two_pi() {
        let v = normalization_integral(&KernelSpec::exponential(), &Sym2::IDENTITY);
        assert!((v - 2.0 * PI).abs() < 1e-5, "{v}");
    }

    #[test]
    fn linear_kernel_closed_form() {
        let f = KernelSpec::polynomial_relu(vec![0.773, -0.176]).unwrap();
        let r2 = f.first_root();
        let exact = 2.0 * PI * (-0.176 * r2 * r2 / 4.0 + 0.773 * r2 / 2.0);
        let v = normalization_integral(&f, &Sym2::IDENTITY);
        assert!((v - exact).abs() < 1e-10);
        assert!((v - 5.333).abs() < 0.01);
    }

    #[test]
    fn scales_with_sqrt_det() {
        let f = KernelSpec::exponential();
        let cov = Sym2::new(4.0, 1.0, 2.0);
        let v = normalization_integral(&f, &cov);
        assert!((v / cov.det().sqrt() - 2.0 * PI).abs() < 1e-5);
    }
}
