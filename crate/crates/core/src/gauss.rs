//! Layered wiretap rates, the achievable key rate and the upper bound for the
//! state-dependent Gaussian broadcast channel. All rates are for a real channel, in
//! bits per channel use; gains are linear power gains.

use serde::{Deserialize, Serialize};

pub use crate::state::StateProfile;
use crate::{Error, Result};

/// Relative tolerance for `sum P_i <= P_max`.
const BUDGET_TOLERANCE: f64 = 1e-12;

fn half_log2_ratio(num: f64, den: f64) -> f64 {
    0.5 * (num / den).log2()
}

/// `0.5 log2(1 + x)` with full precision for small `x`.
fn half_log2_1p(x: f64) -> f64 {
    0.5 * x.ln_1p() / std::f64::consts::LN_2
}

/// Channel gains `h_0 < .. < h_s`, power budget and block length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainProfile {
    gains: Vec<f64>,
    p_max: f64,
    block_len: usize,
}

impl GainProfile {
    pub fn new(gains: Vec<f64>, p_max: f64, block_len: usize) -> Result<Self> {
        if gains.is_empty() {
            return Err(Error::InvalidGains("no gains".into()));
        }
        if gains.iter().any(|h| !h.is_finite() || *h <= 0.0) {
            return Err(Error::InvalidGains("gains must be positive and finite".into()));
        }
        if gains.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGains("gains must be strictly increasing".into()));
        }
        if !p_max.is_finite() || p_max <= 0.0 {
            return Err(Error::InvalidParameter(format!("power budget {p_max} must be positive")));
        }
        if block_len == 0 {
            return Err(Error::InvalidParameter("block length must be positive".into()));
        }
        Ok(Self { gains, p_max, block_len })
    }

    /// Gains `h_i = 10^(dB_i / 10)`.
    pub fn from_db(gains_db: &[f64], p_max: f64, block_len: usize) -> Result<Self> {
        Self::new(gains_db.iter().map(|&g| db_to_linear(g)).collect(), p_max, block_len)
    }

    /// Gains `h_i = Q^gamma_i`.
    pub fn from_exponents(q: f64, gammas: &[f64], p_max: f64, block_len: usize) -> Result<Self> {
        Self::new(gammas.iter().map(|&g| q.powf(g)).collect(), p_max, block_len)
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn gain(&self, i: usize) -> f64 {
        self.gains[i]
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn top_state(&self) -> usize {
        self.gains.len() - 1
    }

    pub fn with_p_max(&self, p_max: f64) -> Result<Self> {
        Self::new(self.gains.clone(), p_max, self.block_len)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Powers `P_1..P_s` of the superposed layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    powers: Vec<f64>,
}

impl PowerAllocation {
    pub fn new(powers: Vec<f64>) -> Result<Self> {
        if powers.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidParameter("powers must be non-negative and finite".into()));
        }
        Ok(Self { powers })
    }

    /// Inverse of [`interference`](Self::interference): `P_i = I_{i-1} - I_i`.
    pub fn from_interference(interference: &[f64]) -> Result<Self> {
        if interference.len() < 2 || *interference.last().unwrap() != 0.0 {
            return Err(Error::InvalidParameter("interference vector must end with I_s = 0".into()));
        }
        if interference.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidParameter("interference must be non-increasing".into()));
        }
        Self::new(interference.windows(2).map(|w| w[0] - w[1]).collect())
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn total(&self) -> f64 {
        self.powers.iter().sum()
    }

    /// `I_0..I_s` with `I_k = sum_{j>k} P_j`; `I_0` is the total power.
    pub fn interference(&self) -> Vec<f64> {
        let s = self.powers.len();
        let mut out = vec![0.0; s + 1];
        for k in (0..s).rev() {
            out[k] = out[k + 1] + self.powers[k];
        }
        out
    }

    /// Checks the layer count and the budget.
    pub fn check(&self, gains: &GainProfile) -> Result<()> {
        if self.powers.len() != gains.top_state() {
            return Err(Error::DimensionMismatch(format!(
                "{} layer powers for {} layers",
                self.powers.len(),
                gains.top_state()
            )));
        }
        if self.total() > gains.p_max() * (1.0 + BUDGET_TOLERANCE) {
            return Err(Error::InvalidParameter(format!(
                "allocation uses {} > P_max = {}",
                self.total(),
                gains.p_max()
            )));
        }
        Ok(())
    }
}

/// Secure rate of every layer from powers and interference,
/// `R_i = 0.5 [log(1 + h_i P_i / (1 + h_i I_i)) - log(1 + h_{i-1} P_i / (1 + h_{i-1} I_i))]`.
pub fn layer_rates(alloc: &PowerAllocation, gains: &GainProfile) -> Result<Vec<f64>> {
    alloc.check(gains)?;
    let interference = alloc.interference();
    let h = gains.gains();
    Ok((1..=gains.top_state())
        .map(|i| {
            let (p, int) = (alloc.powers[i - 1], interference[i]);
            let legit = half_log2_1p(h[i] * p / (1.0 + h[i] * int));
            let eve = half_log2_1p(h[i - 1] * p / (1.0 + h[i - 1] * int));
            (legit - eve).max(0.0)
        })
        .collect())
}

/// Same rates written through the interference levels alone,
/// `R_i = 0.5 log((1 + h_i I_{i-1}) / (1 + h_i I_i) * (1 + h_{i-1} I_i) / (1 + h_{i-1} I_{i-1}))`.
pub fn layer_rates_from_interference(interference: &[f64], gains: &GainProfile) -> Result<Vec<f64>> {
    let s = gains.top_state();
    if interference.len() != s + 1 {
        return Err(Error::DimensionMismatch(format!(
            "{} interference levels for {s} layers",
            interference.len()
        )));
    }
    let h = gains.gains();
    Ok((1..=s)
        .map(|i| {
            let (hi, lo) = (interference[i - 1], interference[i]);
            half_log2_ratio((1.0 + h[i] * hi) * (1.0 + h[i - 1] * lo), (1.0 + h[i] * lo) * (1.0 + h[i - 1] * hi))
        })
        .collect())
}

fn check_states(gains: &GainProfile, profile: &StateProfile) -> Result<()> {
    if gains.top_state() != profile.top_state() {
        return Err(Error::DimensionMismatch(format!(
            "{} gains for {} state probabilities",
            gains.top_state() + 1,
            profile.deltas().len()
        )));
    }
    Ok(())
}

/// `L sum_i Delta_i R_i`.
pub fn achievable_rate(alloc: &PowerAllocation, gains: &GainProfile, profile: &StateProfile) -> Result<f64> {
    check_states(gains, profile)?;
    let rates = layer_rates(alloc, gains)?;
    Ok(gains.block_len() as f64 * weighted(&rates, profile))
}

/// Objective evaluated on interference levels `I_0..I_s`.
pub fn achievable_rate_from_interference(interference: &[f64], gains: &GainProfile, profile: &StateProfile) -> Result<f64> {
    check_states(gains, profile)?;
    let rates = layer_rates_from_interference(interference, gains)?;
    Ok(gains.block_len() as f64 * weighted(&rates, profile))
}

fn weighted(rates: &[f64], profile: &StateProfile) -> f64 {
    rates.iter().enumerate().map(|(k, r)| profile.layer_weight(k + 1) * r).sum()
}

/// `0.5 L sum_{i,j} delta_i delta_j log(1 + h_i P_max / (1 + h_j P_max))`.
pub fn gauss_upper_bound(gains: &GainProfile, profile: &StateProfile) -> Result<f64> {
    check_states(gains, profile)?;
    let d = profile.deltas();
    let h = gains.gains();
    let p = gains.p_max();
    let mut total = 0.0;
    for i in 0..d.len() {
        for j in 0..d.len() {
            total += d[i] * d[j] * half_log2_1p(h[i] * p / (1.0 + h[j] * p));
        }
    }
    Ok(gains.block_len() as f64 * total)
}

fn check_exponents(profile: &StateProfile, gammas: &[f64]) -> Result<()> {
    if gammas.len() != profile.deltas().len() {
        return Err(Error::DimensionMismatch(format!(
            "{} exponents for {} states",
            gammas.len(),
            profile.deltas().len()
        )));
    }
    if gammas.iter().any(|g| !g.is_finite() || *g < 0.0) || gammas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidGains("exponents must be non-negative and strictly increasing".into()));
    }
    Ok(())
}

/// Degrees of freedom `L sum_i (gamma_i - gamma_{i-1}) Delta_i`.
pub fn dof(profile: &StateProfile, gammas: &[f64], block_len: usize) -> Result<f64> {
    check_exponents(profile, gammas)?;
    Ok(block_len as f64
        * (1..gammas.len())
            .map(|i| (gammas[i] - gammas[i - 1]) * profile.layer_weight(i))
            .sum::<f64>())
}

/// High-SNR limit of the upper bound, `L sum_{i>j} delta_i delta_j (gamma_i - gamma_j)`.
pub fn dof_upper(profile: &StateProfile, gammas: &[f64], block_len: usize) -> Result<f64> {
    check_exponents(profile, gammas)?;
    let d = profile.deltas();
    let mut total = 0.0;
    for i in 0..d.len() {
        for j in 0..i {
            total += d[i] * d[j] * (gammas[i] - gammas[j]);
        }
    }
    Ok(block_len as f64 * total)
}
