//! Inverse temperature and Boltzmann sums shared by the exact oracles and the
//! low-rank ensembles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inverse temperature, with the zero-temperature limit as its own variant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Beta {
    Finite(f64),
    Infinite,
}

impl Beta {
    /// `beta > 0`; `+inf` maps to [`Beta::Infinite`].
    pub fn new(beta: f64) -> Result<Self> {
        if beta == f64::INFINITY {
            Ok(Beta::Infinite)
        } else if beta.is_finite() && beta > 0.0 {
            Ok(Beta::Finite(beta))
        } else {
            Err(Error::usage(format!("inverse temperature must be positive, got {beta}")))
        }
    }

    /// `T = 0` maps to [`Beta::Infinite`].
    pub fn from_temperature(t: f64) -> Result<Self> {
        if t == 0.0 {
            Ok(Beta::Infinite)
        } else if t.is_finite() && t > 0.0 {
            Ok(Beta::Finite(1.0 / t))
        } else {
            Err(Error::usage(format!("temperature must be nonnegative and finite, got {t}")))
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Beta::Finite(b) => b,
            Beta::Infinite => f64::INFINITY,
        }
    }

    pub fn temperature(self) -> f64 {
        match self {
            Beta::Finite(b) => 1.0 / b,
            Beta::Infinite => 0.0,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Beta::Infinite)
    }
}

/// Boltzmann weights of a level list, shifted by the lowest level.
#[derive(Clone, Debug)]
pub struct BoltzmannSum {
    pub e_min: f64,
    /// `ln Σ exp(-β (E_n - e_min))`
    pub log_z_shifted: f64,
    /// Normalized probabilities, same order as the input.
    pub weights: Vec<f64>,
}

impl BoltzmannSum {
    pub fn new(levels: &[f64], beta: Beta) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::usage("Boltzmann sum over an empty level list"));
        }
        if let Some(index) = levels.iter().position(|e| !e.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let e_min = levels.iter().copied().fold(f64::INFINITY, f64::min);
        let weights: Vec<f64> = match beta {
            Beta::Finite(b) => levels.iter().map(|e| (-b * (e - e_min)).exp()).collect(),
            Beta::Infinite => {
                // uniform over the exactly degenerate ground manifold
                levels.iter().map(|&e| if e == e_min { 1.0 } else { 0.0 }).collect()
            }
        };
        let z: f64 = weights.iter().sum();
        let weights = weights.into_iter().map(|w| w / z).collect();
        Ok(Self { e_min, log_z_shifted: z.ln(), weights })
    }

    /// `F = e_min - T ln Z_shifted`; `e_min` at β = ∞.
    pub fn free_energy(&self, beta: Beta) -> f64 {
        match beta {
            Beta::Finite(b) => self.e_min - self.log_z_shifted / b,
            Beta::Infinite => self.e_min,
        }
    }

    /// `⟨E⟩`
    pub fn mean(&self, levels: &[f64]) -> f64 {
        self.weights.iter().zip(levels).map(|(w, e)| w * e).sum()
    }

    /// Shannon entropy of the weights.
    pub fn entropy(&self) -> f64 {
        -self.weights.iter().filter(|&&w| w > 0.0).map(|w| w * w.ln()).sum::<f64>()
    }
}
