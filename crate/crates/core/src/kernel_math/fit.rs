//! L1 fitting of ReLU polynomials to `exp(−x/2)`.
//!
//! The loss is the mean absolute error on a fixed uniform grid over
//! `[0, range]`. A uniform grid in the quadric is uniform in screen-space
//! area, which is how splats are actually sampled. Optimization runs on
//! Legendre coefficients over the normalized range and is converted to
//! monomial coefficients at the end; the two parametrizations describe the
//! same polynomial, the Legendre one is just far better conditioned.

use thiserror::Error;

use super::{first_positive_root, horner, KernelError, KernelSpec, DEFAULT_EPSILON};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-12;
const STEP_GROWTH: f64 = 1.1;
const STEP_SHRINK: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("invalid fit configuration: {0}")]
    InvalidConfig(String),
    #[error("fit diverged: loss went from {initial} to {last}")]
    Diverged { initial: f64, last: f64 },
    #[error("fitted polynomial has no positive root within {limit}")]
    NoPositiveRoot { limit: f64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub order: usize,
    pub epsilon: f64,
    pub sample_count: usize,
    pub iterations: usize,
    pub step_size: f64,
    /// Recorded with the configuration; the grid and the descent are both
    /// deterministic, so it does not change the result.
    pub seed: u64,
    /// Fit on `[0, x_max_override]` instead of `[0, −2 ln ε]`.
    pub x_max_override: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            order: 1,
            epsilon: DEFAULT_EPSILON,
            sample_count: 4096,
            iterations: 2000,
            step_size: 0.01,
            seed: 0,
            x_max_override: None,
        }
    }
}

impl FitConfig {
    pub fn with_order(order: usize) -> Self {
        Self {
            order,
            ..Self::default()
        }
    }

    /// Upper end of the fitted quadric range.
    pub fn range(&self) -> f64 {
        self.x_max_override
            .unwrap_or_else(|| -2.0 * self.epsilon.ln())
    }

    pub fn validate(&self) -> Result<(), FitError> {
        let bad = |m: String| Err(FitError::InvalidConfig(m));
        if !(1..=3).contains(&self.order) {
            return bad(format!("order {} not in 1..=3", self.order));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon {} not in (0, 1)", self.epsilon));
        }
        if self.sample_count < 2 {
            return bad(format!("sample_count {} < 2", self.sample_count));
        }
        if self.iterations == 0 {
            return bad("iterations must be positive".into());
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return bad(format!("step_size {} not positive", self.step_size));
        }
        if let Some(x) = self.x_max_override {
            if !(x > 0.0 && x.is_finite()) {
                return bad(format!("x_max_override {x} not positive"));
            }
        }
        let range = self.range();
        if !(range > 0.0 && range.is_finite()) {
            return bad(format!("empty fit range [0, {range}]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub kernel: KernelSpec,
    pub final_l1_loss: f64,
    /// Loss before the first step followed by the loss after every step.
    pub loss_history: Vec<f64>,
    pub range: f64,
}

/// Fits a polynomial of order `cfg.order`.
pub fn fit_polynomial(cfg: &FitConfig) -> Result<FitResult, FitError> {
    let mut stages = fit_sequence(cfg)?;
    Ok(stages.pop().expect("at least one stage"))
}

/// Fits orders `1..=cfg.order` in turn. Each order starts from the previous
/// fit with a zero leading coefficient, and steps are only accepted when the
/// loss does not increase, so losses are nonincreasing in the order.
pub fn fit_sequence(cfg: &FitConfig) -> Result<Vec<FitResult>, FitError> {
    cfg.validate()?;
    let problem = Problem::new(cfg);

    let mut legendre = problem.least_squares_line(cfg.sample_count);
    let mut stages = Vec::with_capacity(cfg.order);
    for order in 1..=cfg.order {
        legendre.resize(order + 1, 0.0);
        let history = problem.descend(&mut legendre, cfg);
        let initial = history[0];
        let last = *history.last().expect("nonempty history");
        if !last.is_finite() || last > initial {
            return Err(FitError::Diverged { initial, last });
        }

        let coeffs = problem.to_monomial(&legendre);
        let limit = 4.0 * problem.range;
        let root = match first_positive_root(&coeffs) {
            Ok(r) if r <= limit => r,
            Ok(_) | Err(KernelError::NoPositiveRoot) => {
                return Err(FitError::NoPositiveRoot { limit })
            }
            Err(e) => return Err(e.into()),
        };
        debug_assert!(root > 0.0);
        let kernel = KernelSpec::polynomial_relu(coeffs)?;
        let final_l1_loss = problem.monomial_loss(kernel.coeffs());
        stages.push(FitResult {
            kernel,
            final_l1_loss,
            loss_history: history,
            range: problem.range,
        });
    }
    Ok(stages)
}

/// Mean `|ReLU(p(x)) − exp(−x/2)|` on `samples` uniform points of `[0, range]`.
pub(crate) fn l1_loss(coeffs: &[f64], range: f64, samples: usize) -> f64 {
    let step = range / (samples - 1) as f64;
    (0..samples)
        .map(|i| {
            let x = i as f64 * step;
            (horner(coeffs, x).max(0.0) - (-0.5 * x).exp()).abs()
        })
        .sum::<f64>()
        / samples as f64
}

struct Problem {
    range: f64,
    /// Basis variable is `s = 2x/scale − 1`. The scale is the ε support, so
    /// the basis stays well conditioned where the kernel is nonzero even when
    /// the range extends far into the zero tail.
    scale: f64,
    /// Legendre values `P_k(s_j)` for `k ≤ 3`, row per sample.
    basis: Vec<[f64; 4]>,
    target: Vec<f64>,
}

impl Problem {
    fn new(cfg: &FitConfig) -> Self {
        let range = cfg.range();
        let scale = range.min(-2.0 * cfg.epsilon.ln());
        let n = cfg.sample_count;
        let mut basis = Vec::with_capacity(n);
        let mut target = Vec::with_capacity(n);
        for j in 0..n {
            let t = j as f64 / (n - 1) as f64;
            let s = 2.0 * t * range / scale - 1.0;
            let p2 = 1.5 * s * s - 0.5;
            let p3 = (5.0 * s * p2 - 2.0 * s) / 3.0;
            basis.push([1.0, s, p2, p3]);
            target.push((-0.5 * t * range).exp());
        }
        Self {
            range,
            scale,
            basis,
            target,
        }
    }

    /// Least-squares line through the target on `[0, scale]`, which keeps
    /// the start positive at the center when the range is mostly zero tail.
    fn least_squares_line(&self, samples: usize) -> Vec<f64> {
        let (mut s00, mut s01, mut s11, mut b0, mut b1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for j in 0..samples {
            let t = j as f64 / (samples - 1) as f64;
            let u = 2.0 * t - 1.0;
            let g = (-0.5 * t * self.scale).exp();
            s00 += 1.0;
            s01 += u;
            s11 += u * u;
            b0 += g;
            b1 += u * g;
        }
        let det = s00 * s11 - s01 * s01;
        vec![(b0 * s11 - b1 * s01) / det, (s00 * b1 - s01 * b0) / det]
    }

    fn loss_and_subgradient(&self, d: &[f64], grad: &mut [f64]) -> f64 {
        let k = d.len();
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        for (row, &g) in self.basis.iter().zip(&self.target) {
            let p: f64 = (0..k).map(|i| d[i] * row[i]).sum();
            let r = p.max(0.0) - g;
            loss += r.abs();
            // Subgradient is zero where the ReLU clamps.
            if p > 0.0 && r != 0.0 {
                let sign = r.signum();
                for i in 0..k {
                    grad[i] += sign * row[i];
                }
            }
        }
        let n = self.target.len() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        loss / n
    }

    /// Adam steps with accept-if-not-worse: rejected steps halve the step
    /// size, accepted ones grow it slightly.
    fn descend(&self, d: &mut [f64], cfg: &FitConfig) -> Vec<f64> {
        let k = d.len();
        let mut grad = vec![0.0; k];
        let mut trial_grad = vec![0.0; k];
        let mut m = vec![0.0; k];
        let mut v = vec![0.0; k];
        let mut trial = vec![0.0; k];
        let mut lr = cfg.step_size;

        let mut loss = self.loss_and_subgradient(d, &mut grad);
        let mut history = Vec::with_capacity(cfg.iterations + 1);
        history.push(loss);
        for it in 1..=cfg.iterations {
            let bc1 = 1.0 - ADAM_BETA1.powi(it as i32);
            let bc2 = 1.0 - ADAM_BETA2.powi(it as i32);
            for i in 0..k {
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * grad[i];
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * grad[i] * grad[i];
                let step = lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + ADAM_EPS);
                trial[i] = d[i] - step;
            }
            let trial_loss = self.loss_and_subgradient(&trial, &mut trial_grad);
            if trial_loss <= loss {
                d.copy_from_slice(&trial);
                std::mem::swap(&mut grad, &mut trial_grad);
                loss = trial_loss;
                lr *= STEP_GROWTH;
            } else {
                lr *= STEP_SHRINK;
            }
            history.push(loss);
        }
        history
    }

    /// Converts Legendre coefficients in `s = 2x/scale − 1` to monomials in `x`.
    fn to_monomial(&self, legendre: &[f64]) -> Vec<f64> {
        let n = legendre.len();
        // Monomial coefficients (in s) of P_0..P_{n-1} via the three-term recurrence.
        let mut polys: Vec<Vec<f64>> = vec![vec![1.0], vec![0.0, 1.0]];
        for deg in 1..n.saturating_sub(1) {
            let d = deg as f64;
            let mut next = vec![0.0; deg + 2];
            for (i, &c) in polys[deg].iter().enumerate() {
                next[i + 1] += (2.0 * d + 1.0) * c / (d + 1.0);
            }
            for (i, &c) in polys[deg - 1].iter().enumerate() {
                next[i] -= d * c / (d + 1.0);
            }
            polys.push(next);
        }
        let mut in_s = vec![0.0; n];
        for (k, &a) in legendre.iter().enumerate() {
            for (i, &c) in polys[k].iter().enumerate() {
                in_s[i] += a * c;
            }
        }
        // Substitute s = αx + β by Horner composition.
        let alpha = 2.0 / self.scale;
        let beta = -1.0;
        let mut out = vec![0.0; n];
        for &c in in_s.iter().rev() {
            // out ← out · (αx + β) + c
            let mut next = vec![0.0; n];
            for (i, &o) in out.iter().enumerate() {
                next[i] += o * beta;
                if i + 1 < n {
                    next[i + 1] += o * alpha;
                }
            }
            next[0] += c;
            out = next;
        }
        out
    }

    fn monomial_loss(&self, coeffs: &[f64]) -> f64 {
        l1_loss(coeffs, self.range, self.target.len())
    }
}
