//! Plain-text kernel documents.
//!
//! ```text
//! kind = polynomial-relu
//! order = 1
//! coefficients = 7.6966949116345468e-1 -1.7507388289281406e-1
//! first_root = 4.3962237447591218e0
//! epsilon = 3.9215686274509803e-3
//! fit_range = 1.1082527109123214e1
//! ```
//!
//! Lines starting with `#` and blank lines are ignored. Reals are written
//! with 17 significant digits so they parse back bit-exactly.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use super::{KernelError, KernelKind, KernelSpec, DEFAULT_EPSILON};

#[derive(Debug, Error)]
pub enum KernelFileError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing key `{0}`")]
    MissingKey(&'static str),
    #[error("inconsistent kernel file: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelFile {
    pub kernel: KernelSpec,
    pub epsilon: f64,
    pub fit_range: f64,
}

fn kind_name(kind: KernelKind) -> &'static str {
    match kind {
        KernelKind::Exponential => "exponential",
        KernelKind::PolynomialRelu => "polynomial-relu",
        KernelKind::PolynomialPiecewise => "polynomial-piecewise",
    }
}

fn sci(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

impl KernelFile {
    pub fn new(kernel: KernelSpec, epsilon: f64, fit_range: f64) -> Self {
        Self {
            kernel,
            epsilon,
            fit_range,
        }
    }

    pub fn exponential() -> Self {
        Self::new(
            KernelSpec::exponential(),
            DEFAULT_EPSILON,
            -2.0 * DEFAULT_EPSILON.ln(),
        )
    }

    pub fn to_text(&self) -> String {
        let k = &self.kernel;
        let mut out = String::new();
        let coeffs: Vec<String> = k.coeffs().iter().map(|&c| sci(c)).collect();
        let _ = writeln!(out, "kind = {}", kind_name(k.kind()));
        let _ = writeln!(out, "order = {}", k.order());
        let _ = writeln!(out, "coefficients = {}", coeffs.join(" "));
        let _ = writeln!(out, "first_root = {}", sci(k.first_root()));
        let _ = writeln!(out, "epsilon = {}", sci(self.epsilon));
        let _ = writeln!(out, "fit_range = {}", sci(self.fit_range));
        out
    }

    pub fn parse(text: &str) -> Result<Self, KernelFileError> {
        let mut kind = None;
        let mut order = None;
        let mut coeffs = None;
        let mut epsilon = None;
        let mut fit_range = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let err = |message: String| KernelFileError::Parse { line, message };
            let (key, value) = trimmed
                .split_once('=')
                .ok_or_else(|| err("expected `key = value`".into()))?;
            let value = value.trim();
            let real = |v: &str| {
                v.parse::<f64>()
                    .map_err(|e| err(format!("bad number `{v}`: {e}")))
            };
            match key.trim() {
                "kind" => {
                    kind = Some(match value {
                        "exponential" => KernelKind::Exponential,
                        "polynomial-relu" => KernelKind::PolynomialRelu,
                        "polynomial-piecewise" => KernelKind::PolynomialPiecewise,
                        other => return Err(err(format!("unknown kind `{other}`"))),
                    })
                }
                "order" => {
                    order = Some(
                        value
                            .parse::<usize>()
                            .map_err(|e| err(format!("bad order: {e}")))?,
                    )
                }
                "coefficients" => {
                    coeffs = Some(
                        value
                            .split_whitespace()
                            .map(real)
                            .collect::<Result<Vec<_>, _>>()?,
                    )
                }
                "epsilon" => epsilon = Some(real(value)?),
                "fit_range" => fit_range = Some(real(value)?),
                // Derived from the coefficients; recomputed on load.
                "first_root" => {
                    real(value)?;
                }
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }

        let kind = kind.ok_or(KernelFileError::MissingKey("kind"))?;
        let epsilon = epsilon.unwrap_or(DEFAULT_EPSILON);
        let fit_range = fit_range.unwrap_or(-2.0 * epsilon.ln());
        let kernel = match kind {
            KernelKind::Exponential => KernelSpec::exponential(),
            _ => {
                let coeffs = coeffs.ok_or(KernelFileError::MissingKey("coefficients"))?;
                if let Some(order) = order {
                    if order + 1 != coeffs.len() {
                        return Err(KernelFileError::Inconsistent(format!(
                            "order {order} with {} coefficients",
                            coeffs.len()
                        )));
                    }
                }
                KernelSpec::polynomial(kind, coeffs)?
            }
        };
        Ok(Self {
            kernel,
            epsilon,
            fit_range,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, KernelFileError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), KernelFileError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}
