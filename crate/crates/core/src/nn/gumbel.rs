//! Binary-concrete relaxation of Bernoulli edge sampling.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GistError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GumbelConfig {
    temperature: f64,
    epsilon: f64,
    pub rng_seed: u64,
}

impl GumbelConfig {
    pub fn new(temperature: f64, epsilon: f64, rng_seed: u64) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(GistError::Input(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        if !(epsilon > 0.0 && epsilon <= 1e-6) {
            return Err(GistError::Input(format!(
                "epsilon must lie in (0, 1e-6], got {epsilon}"
            )));
        }
        Ok(Self {
            temperature,
            epsilon,
            rng_seed,
        })
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl Default for GumbelConfig {
    fn default() -> Self {
        Self {
            temperature: 1.0,
            epsilon: 1e-7,
            rng_seed: 0,
        }
    }
}

fn standard_gumbel(rng: &mut impl Rng) -> f64 {
    // gen::<f64>() lies in [0,1); shift away from 0 so the logs stay finite.
    let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    -(-u.ln()).ln()
}

/// One logistic draw, as the difference of two standard Gumbel draws.
pub fn logistic_noise(rng: &mut impl Rng) -> f64 {
    standard_gumbel(rng) - standard_gumbel(rng)
}

/// Symmetric n×n matrix of logistic noise with a zero diagonal.
pub fn logistic_noise_matrix(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let g = logistic_noise(rng);
            m[(i, j)] = g;
            m[(j, i)] = g;
        }
    }
    m
}

/// Scalar form of the relaxation: `σ((ln(p+ε) − ln(1−p+ε) + Γ)/T)`.
pub fn gumbel_sigmoid(p: f64, noise: f64, cfg: &GumbelConfig) -> f64 {
    let eps = cfg.epsilon;
    let logit = (p + eps).ln() - (1.0 - p + eps).ln();
    crate::autodiff::open_sigmoid((logit + noise) / cfg.temperature)
}
