//! Reference computation of the OpenMP-weighted token cross-entropy.

use ndarray::{Array2, Array3};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("probabilities at ({b}, {t}) sum to {sum}, expected 1")]
    NotNormalized { b: usize, t: usize, sum: f64 },
    #[error("labels at ({b}, {t}) are not one-hot")]
    NotOneHot { b: usize, t: usize },
    #[error("{name} at ({b}, {t}) must be 0 or 1")]
    NotBinary { name: &'static str, b: usize, t: usize },
    #[error("no unpadded positions")]
    Empty,
    #[error("lambda must be finite and positive, got {0}")]
    Lambda(f64),
    #[error("true-class probability is 0 at ({b}, {t}); loss is infinite")]
    ZeroProbability { b: usize, t: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossInputs {
    /// `[batch, time, class]` predicted probabilities.
    pub probs: Array3<f64>,
    /// `[batch, time, class]` one-hot targets.
    pub labels: Array3<f64>,
    /// `[batch, time]`, 1 where the target token belongs to OpenMP syntax.
    pub omp_flags: Array2<u8>,
    /// `[batch, time]`, 0 at padding.
    pub mask: Array2<u8>,
    pub lambda: f64,
}

pub const DEFAULT_LAMBDA: f64 = 5.0;

impl LossInputs {
    pub fn new(probs: Array3<f64>, labels: Array3<f64>, omp_flags: Array2<u8>, mask: Array2<u8>) -> Self {
        LossInputs {
            probs,
            labels,
            omp_flags,
            mask,
            lambda: DEFAULT_LAMBDA,
        }
    }

    pub fn validate(&self) -> Result<(), LossError> {
        let (b, t, c) = self.probs.dim();
        if self.labels.dim() != (b, t, c) {
            return Err(LossError::Shape(format!(
                "labels {:?} vs probabilities {:?}",
                self.labels.dim(),
                (b, t, c)
            )));
        }
        for (name, a) in [("omp_flags", &self.omp_flags), ("mask", &self.mask)] {
            if a.dim() != (b, t) {
                return Err(LossError::Shape(format!("{name} {:?} vs ({b}, {t})", a.dim())));
            }
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(LossError::Lambda(self.lambda));
        }
        for ((bi, ti), &m) in self.mask.indexed_iter() {
            if m > 1 {
                return Err(LossError::NotBinary {
                    name: "mask",
                    b: bi,
                    t: ti,
                });
            }
            if self.omp_flags[(bi, ti)] > 1 {
                return Err(LossError::NotBinary {
                    name: "omp_flags",
                    b: bi,
                    t: ti,
                });
            }
            if m == 0 {
                continue;
            }
            let sum: f64 = (0..c).map(|ci| self.probs[(bi, ti, ci)]).sum();
            if (sum - 1.0).abs() > 1e-6 || (0..c).any(|ci| self.probs[(bi, ti, ci)] < 0.0) {
                return Err(LossError::NotNormalized { b: bi, t: ti, sum });
            }
            let hot = (0..c).filter(|&ci| self.labels[(bi, ti, ci)] == 1.0).count();
            let zero = (0..c).filter(|&ci| self.labels[(bi, ti, ci)] == 0.0).count();
            if hot != 1 || hot + zero != c {
                return Err(LossError::NotOneHot { b: bi, t: ti });
            }
        }
        if self.mask.iter().all(|&m| m == 0) {
            return Err(LossError::Empty);
        }
        Ok(())
    }
}

/// `-(1/N) Σ_b Σ_t m·w·Σ_c y·log p`, with `w = λ` on OpenMP tokens and 1 elsewhere.
pub fn weighted_token_cross_entropy(inputs: &LossInputs) -> Result<f64, LossError> {
    inputs.validate()?;
    let (_, _, c) = inputs.probs.dim();
    let mut total = 0.0;
    let mut n = 0usize;
    for ((b, t), &m) in inputs.mask.indexed_iter() {
        if m == 0 {
            continue;
        }
        n += 1;
        let w = if inputs.omp_flags[(b, t)] == 1 {
            inputs.lambda
        } else {
            1.0
        };
        for ci in 0..c {
            let y = inputs.labels[(b, t, ci)];
            if y == 0.0 {
                continue;
            }
            let p = inputs.probs[(b, t, ci)];
            if p == 0.0 {
                return Err(LossError::ZeroProbability { b, t });
            }
            total += w * y * p.ln();
        }
    }
    Ok((-total / n as f64).max(0.0))
}
