use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_MAX_ORDER: u32 = 32;

/// Distribution of one scalar noise coordinate, with raw moments up to `max_order`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian { sigma: f64 },
    Uniform { lo: f64, hi: f64 },
    /// Finite support with probabilities summing to one.
    Discrete { values: Vec<f64>, probs: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    #[serde(flatten)]
    pub kind: NoiseKind,
    #[serde(default = "default_order")]
    pub max_order: u32,
}

fn default_order() -> u32 {
    DEFAULT_MAX_ORDER
}

fn double_factorial(k: u32) -> f64 {
    let mut out = 1.0;
    let mut j = k as i64;
    while j > 1 {
        out *= j as f64;
        j -= 2;
    }
    out
}

impl NoiseModel {
    pub fn gaussian(sigma: f64) -> Self {
        NoiseModel { kind: NoiseKind::Gaussian { sigma }, max_order: DEFAULT_MAX_ORDER }
    }

    pub fn uniform(lo: f64, hi: f64) -> Self {
        NoiseModel { kind: NoiseKind::Uniform { lo, hi }, max_order: DEFAULT_MAX_ORDER }
    }

    pub fn discrete(values: Vec<f64>, probs: Vec<f64>) -> Self {
        NoiseModel { kind: NoiseKind::Discrete { values, probs }, max_order: DEFAULT_MAX_ORDER }
    }

    pub fn with_max_order(mut self, k: u32) -> Self {
        self.max_order = k;
        self
    }

    /// Raw moment E[s^k].
    pub fn moment(&self, k: u32) -> Result<f64> {
        if k > self.max_order {
            return Err(Error::MomentOrder { required: k, available: self.max_order });
        }
        Ok(match &self.kind {
            NoiseKind::Gaussian { sigma } => {
                if k % 2 == 1 {
                    0.0
                } else {
                    sigma.powi(k as i32) * double_factorial(k.saturating_sub(1))
                }
            }
            NoiseKind::Uniform { lo, hi } => {
                if hi == lo {
                    lo.powi(k as i32)
                } else {
                    (hi.powi(k as i32 + 1) - lo.powi(k as i32 + 1)) / ((k as f64 + 1.0) * (hi - lo))
                }
            }
            NoiseKind::Discrete { values, probs } => values
                .iter()
                .zip(probs)
                .map(|(v, p)| p * v.powi(k as i32))
                .sum(),
        })
    }

    pub fn moments(&self) -> Vec<f64> {
        (0..=self.max_order).map(|k| self.moment(k).unwrap()).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            NoiseKind::Gaussian { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            }
            NoiseKind::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            NoiseKind::Discrete { values, probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                *values.last().expect("discrete noise needs at least one value")
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            NoiseKind::Gaussian { sigma } if *sigma < 0.0 || !sigma.is_finite() => {
                Err(Error::Model(format!("gaussian sigma must be finite and >= 0, got {sigma}")))
            }
            NoiseKind::Uniform { lo, hi } if !(lo <= hi) => {
                Err(Error::Model(format!("uniform noise needs lo <= hi, got [{lo}, {hi}]")))
            }
            NoiseKind::Discrete { values, probs } => {
                let s: f64 = probs.iter().sum();
                if values.is_empty() || values.len() != probs.len() || (s - 1.0).abs() > 1e-9 {
                    Err(Error::Model("discrete noise needs matching values/probs summing to 1".into()))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}
