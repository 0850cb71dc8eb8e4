//! Channel-state distribution shared by the deterministic and Gaussian models.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-12;

/// Distribution `delta_0..delta_s` of the per-receiver channel state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct StateProfile {
    deltas: Vec<f64>,
}

impl StateProfile {
    pub fn new(deltas: Vec<f64>) -> Result<Self> {
        if deltas.is_empty() {
            return Err(Error::InvalidDistribution("no states".into()));
        }
        if let Some(d) = deltas.iter().find(|d| !d.is_finite() || **d < 0.0) {
            return Err(Error::InvalidDistribution(format!("probability {d} is negative or not finite")));
        }
        let total: f64 = deltas.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
        }
        Ok(Self { deltas })
    }

    /// `s + 1` equally likely states.
    pub fn uniform(states: usize) -> Result<Self> {
        if states == 0 {
            return Err(Error::InvalidDistribution("no states".into()));
        }
        let p = 1.0 / states as f64;
        let mut deltas = vec![p; states];
        // Put the rounding residue on the last state so the sum check is exact.
        let head: f64 = deltas[..states - 1].iter().sum();
        deltas[states - 1] = 1.0 - head;
        Self::new(deltas)
    }

    /// Highest state index `s`.
    pub fn top_state(&self) -> usize {
        self.deltas.len() - 1
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    /// `theta_i = P(S < i)` for `i = 0..=s`.
    pub fn theta(&self, i: usize) -> f64 {
        self.deltas[..i].iter().sum()
    }

    pub fn thetas(&self) -> Vec<f64> {
        (0..=self.top_state()).map(|i| self.theta(i)).collect()
    }

    /// `Delta_i = theta_i (1 - theta_i)`, the probability weight of layer `i` in the key rate.
    pub fn layer_weight(&self, i: usize) -> f64 {
        let t = self.theta(i);
        t * (1.0 - t)
    }

    /// Samples a state from a uniform draw `u` in `[0, 1)`.
    pub fn sample(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, &d) in self.deltas.iter().enumerate() {
            acc += d;
            if u < acc {
                return i;
            }
        }
        // Floating-point residue: fall back to the last state with positive mass.
        self.deltas.iter().rposition(|&d| d > 0.0).unwrap_or(self.top_state())
    }
}

impl TryFrom<Vec<f64>> for StateProfile {
    type Error = Error;

    fn try_from(deltas: Vec<f64>) -> Result<Self> {
        Self::new(deltas)
    }
}

impl From<StateProfile> for Vec<f64> {
    fn from(p: StateProfile) -> Self {
        p.deltas
    }
}
