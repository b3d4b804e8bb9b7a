//! Closed-form first-positive-root solvers for polynomials up to order three.

use super::KernelError;

/// Leading coefficients smaller than this are treated as zero and the
/// polynomial is solved at the next lower order.
const DEGENERATE_LEADING: f64 = 1e-12;

/// Evaluates `coeffs[0] + coeffs[1] x + ...` with Horner's scheme.
#[inline]
pub fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

#[inline]
fn horner_derivative(coeffs: &[f64], x: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (i, &c)| acc * x + i as f64 * c)
}

/// Smallest `x > 0` with `p(x) = 0`, where `coeffs[i]` multiplies `x^i`.
///
/// Orders one and two use the linear and (cancellation-free) quadratic
/// formulas. Order three follows the discriminant form
/// `Δ0 = c2² − 3c3c1`, `Δ1 = 2c2³ − 9c3c2c1 + 27c3²c0`,
/// `C = cbrt((Δ1 + sqrt(Δ1² − 4Δ0³)) / 2)` and switches to the
/// trigonometric form when `Δ1² − 4Δ0³ < 0` (three real roots). The chosen
/// root is polished with a couple of guarded Newton steps.
pub fn first_positive_root(coeffs: &[f64]) -> Result<f64, KernelError> {
    if coeffs.len() < 2 || coeffs.len() > 4 {
        return Err(KernelError::UnsupportedOrder(
            coeffs.len().saturating_sub(1),
        ));
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(KernelError::NonFiniteCoefficients);
    }
    if coeffs[0] <= 0.0 {
        return Err(KernelError::NonPositiveAtCenter(coeffs[0]));
    }

    let mut order = coeffs.len() - 1;
    while order > 1 && coeffs[order].abs() < DEGENERATE_LEADING {
        order -= 1;
    }

    let roots = match order {
        1 => linear_roots(coeffs[0], coeffs[1]),
        2 => quadratic_roots(coeffs[0], coeffs[1], coeffs[2]),
        _ => cubic_roots(coeffs[0], coeffs[1], coeffs[2], coeffs[3]),
    };

    let root = roots
        .into_iter()
        .filter(|r| r.is_finite() && *r > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !root.is_finite() {
        return Err(KernelError::NoPositiveRoot);
    }
    Ok(polish(&coeffs[..=order], root))
}

fn linear_roots(c0: f64, c1: f64) -> Vec<f64> {
    if c1 == 0.0 {
        return Vec::new();
    }
    vec![-c0 / c1]
}

fn quadratic_roots(c0: f64, c1: f64, c2: f64) -> Vec<f64> {
    let disc = c1 * c1 - 4.0 * c2 * c0;
    if disc < 0.0 {
        return Vec::new();
    }
    let q = -0.5 * (c1 + disc.sqrt().copysign(c1));
    if q == 0.0 {
        // c1 = 0 and c0 = 0; excluded by the positivity precondition.
        return Vec::new();
    }
    vec![q / c2, c0 / q]
}

fn cubic_roots(c0: f64, c1: f64, c2: f64, c3: f64) -> Vec<f64> {
    let delta0 = c2 * c2 - 3.0 * c3 * c1;
    let delta1 = 2.0 * c2 * c2 * c2 - 9.0 * c3 * c2 * c1 + 27.0 * c3 * c3 * c0;
    let disc = delta1 * delta1 - 4.0 * delta0 * delta0 * delta0;
    let scale = -1.0 / (3.0 * c3);

    if disc >= 0.0 {
        // Taking the square root with the sign of Δ1 keeps C away from zero.
        let inner = 0.5 * (delta1 + disc.sqrt().copysign(delta1));
        let big_c = inner.cbrt();
        if big_c == 0.0 {
            // Δ0 = Δ1 = 0: triple root.
            return vec![scale * c2];
        }
        vec![scale * (c2 + big_c + delta0 / big_c)]
    } else {
        // Three distinct real roots; Δ0 > 0 here.
        let sqrt_d0 = delta0.sqrt();
        let cos_arg = (delta1 / (2.0 * delta0 * sqrt_d0)).clamp(-1.0, 1.0);
        let theta = cos_arg.acos();
        (0..3)
            .map(|k| {
                let phi = (theta + 2.0 * std::f64::consts::PI * k as f64) / 3.0;
                scale * (c2 + 2.0 * sqrt_d0 * phi.cos())
            })
            .collect()
    }
}

fn polish(coeffs: &[f64], mut x: f64) -> f64 {
    let mut residual = horner(coeffs, x).abs();
    for _ in 0..3 {
        let d = horner_derivative(coeffs, x);
        if d == 0.0 || residual == 0.0 {
            break;
        }
        let candidate = x - horner(coeffs, x) / d;
        let r = horner(coeffs, candidate).abs();
        if candidate > 0.0 && r < residual {
            x = candidate;
            residual = r;
        } else {
            break;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_root_by_hand() {
        let r = first_positive_root(&[0.773, -0.176]).unwrap();
        assert!((r - 4.392_045_454_545_454).abs() < 1e-12);
    }

    #[test]
    fn unit_cubic() {
        let r = first_positive_root(&[1.0, 0.0, 0.0, -1.0]).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn three_real_roots_takes_smallest_positive() {
        // (1 - x)(2 - x)(3 - x) = 6 - 11x + 6x² - x³
        let r = first_positive_root(&[6.0, -11.0, 6.0, -1.0]).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        // (x + 1)(2 - x)(5 - x) = 10 + 3x - 6x² + x³
        let r = first_positive_root(&[10.0, 3.0, -6.0, 1.0]).unwrap();
        assert!((r - 2.0).abs() < 1e-12);
    }

    #[test]
    fn quadratic_picks_first_crossing() {
        // (2 - x)(4 - x) = 8 - 6x + x²
        let r = first_positive_root(&[8.0, -6.0, 1.0]).unwrap();
        assert!((r - 2.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_quadratic_falls_back_to_linear() {
        let r = first_positive_root(&[1.0, -0.5, 1e-14]).unwrap();
        assert!((r - 2.0).abs() < 1e-9);
    }

    #[test]
    fn no_positive_root() {
        assert!(matches!(
            first_positive_root(&[1.0, 0.5]),
            Err(KernelError::NoPositiveRoot)
        ));
        assert!(matches!(
            first_positive_root(&[1.0, 0.0, 1.0]),
            Err(KernelError::NoPositiveRoot)
        ));
    }

    #[test]
    fn rejects_nonpositive_center() {
        assert!(matches!(
            first_positive_root(&[-1.0, 1.0]),
            Err(KernelError::NonPositiveAtCenter(_))
        ));
    }
}
