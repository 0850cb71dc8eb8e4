//! Exact power allocation for the layered Gaussian scheme by enumerating every point
//! that satisfies the KKT conditions of the (non-convex) rate maximization.
//!
//! Variables are the interference levels `I_1..I_{s-1}`, with `I_0 = P_max` and
//! `I_s = 0`. The objective `-sum_i Delta_i R_i` is separable, so the derivative with
//! respect to a run of merged variables `I_l = .. = I_u = x` is
//! `F(x) = [beta_l / ((1 + h_{l-1} x)(1 + h_l x)) - alpha_u / ((1 + h_u x)(1 + h_{u+1} x))] / (2 ln 2)`,
//! whose numerator is linear for a single variable and quadratic for a longer run.

mod oracle;
mod solver;

pub use oracle::{certify, grid_oracle, two_layer_closed_form, Certificate, GridOptimum, TwoLayerCase};
pub use solver::{best_candidate, finite_difference_check, optimize, solve_kkt, KktCandidate, KktNode, KktOptions, PickOrder, RESIDUAL_TOLERANCE};

use crate::gauss::{GainProfile, StateProfile};
use crate::{Error, Result};

const TWO_LN2: f64 = 2.0 * std::f64::consts::LN_2;

/// Gains, layer weights and budget of one allocation problem.
#[derive(Debug, Clone, PartialEq)]
pub struct KktProblem {
    gains: Vec<f64>,
    weights: Vec<f64>,
    p_max: f64,
    block_len: usize,
}

impl KktProblem {
    pub fn new(gains: &GainProfile, profile: &StateProfile) -> Result<Self> {
        if gains.top_state() != profile.top_state() {
            return Err(Error::DimensionMismatch(format!(
                "{} gains for {} state probabilities",
                gains.top_state() + 1,
                profile.deltas().len()
            )));
        }
        if gains.top_state() == 0 {
            return Err(Error::InvalidParameter("power allocation needs at least two states".into()));
        }
        Ok(Self {
            gains: gains.gains().to_vec(),
            weights: (0..=profile.top_state()).map(|i| profile.layer_weight(i)).collect(),
            p_max: gains.p_max(),
            block_len: gains.block_len(),
        })
    }

    pub fn top_state(&self) -> usize {
        self.gains.len() - 1
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn gain(&self, i: usize) -> f64 {
        self.gains[i]
    }

    /// `Delta_i`.
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// `alpha_k = (h_{k+1} - h_k) Delta_{k+1}`.
    pub fn alpha(&self, k: usize) -> f64 {
        (self.gains[k + 1] - self.gains[k]) * self.weights[k + 1]
    }

    /// `beta_k = (h_k - h_{k-1}) Delta_k`.
    pub fn beta(&self, k: usize) -> f64 {
        (self.gains[k] - self.gains[k - 1]) * self.weights[k]
    }

    /// Rate `L sum_i Delta_i R_i` at interference levels `I_0..I_s`.
    pub fn rate(&self, interference: &[f64]) -> f64 {
        let h = &self.gains;
        let per_use: f64 = (1..=self.top_state())
            .map(|i| {
                let (hi, lo) = (interference[i - 1], interference[i]);
                let r = ((1.0 + h[i] * hi) * (1.0 + h[i - 1] * lo) / ((1.0 + h[i] * lo) * (1.0 + h[i - 1] * hi))).log2();
                self.weights[i] * 0.5 * r
            })
            .sum();
        self.block_len as f64 * per_use
    }

    fn check_interior(&self, k: usize) -> Result<()> {
        if k == 0 || k >= self.top_state() {
            return Err(Error::IndexOutOfRange {
                index: k,
                range: format!("[1, {}]", self.top_state().saturating_sub(1)),
            });
        }
        Ok(())
    }

    /// Derivative of `-sum_i Delta_i R_i` along the run `I_l = .. = I_u = x`, as the
    /// two terms whose difference it is.
    fn run_terms(&self, l: usize, u: usize, x: f64) -> (f64, f64) {
        let h = &self.gains;
        let push = self.beta(l) / ((1.0 + h[l - 1] * x) * (1.0 + h[l] * x) * TWO_LN2);
        let pull = self.alpha(u) / ((1.0 + h[u] * x) * (1.0 + h[u + 1] * x) * TWO_LN2);
        (push, pull)
    }

    /// `F` for the run `l..=u` at `x`.
    pub fn run_derivative(&self, l: usize, u: usize, x: f64) -> f64 {
        let (push, pull) = self.run_terms(l, u, x);
        push - pull
    }
}

/// Numerator of `F^(1)_k`: `slope * x - offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearCoeffs {
    pub alpha: f64,
    pub beta: f64,
    /// `h_{k+1} beta_k - h_{k-1} alpha_k`.
    pub slope: f64,
    /// `alpha_k - beta_k`.
    pub offset: f64,
}

impl LinearCoeffs {
    pub fn numerator(&self, x: f64) -> f64 {
        self.slope * x - self.offset
    }
}

pub fn f1_coeffs(problem: &KktProblem, k: usize) -> Result<LinearCoeffs> {
    problem.check_interior(k)?;
    let (alpha, beta) = (problem.alpha(k), problem.beta(k));
    Ok(LinearCoeffs {
        alpha,
        beta,
        slope: problem.gain(k + 1) * beta - problem.gain(k - 1) * alpha,
        offset: alpha - beta,
    })
}

/// `F^(1)_k(x)` including the `1 / (2 ln 2)` factor of the real-channel rates.
pub fn f1(problem: &KktProblem, k: usize, x: f64) -> Result<f64> {
    problem.check_interior(k)?;
    Ok(problem.run_derivative(k, k, x))
}

/// Root of the numerator of `F^(1)_k`; `P_max` for `k = 0`, `0` for `k = s`, and
/// `None` when the numerator is constant.
pub fn f1_root(problem: &KktProblem, k: usize) -> Result<Option<f64>> {
    let s = problem.top_state();
    if k == 0 {
        return Ok(Some(problem.p_max));
    }
    if k == s {
        return Ok(Some(0.0));
    }
    let c = f1_coeffs(problem, k)?;
    Ok((c.slope != 0.0).then(|| c.offset / c.slope))
}

/// Numerator `c2 x^2 + c1 x + c0` of `F^(2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticCoeffs {
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
}

impl QuadraticCoeffs {
    pub fn eval(&self, x: f64) -> f64 {
        (self.c2 * x + self.c1) * x + self.c0
    }

    /// Real roots in increasing order. A discriminant within `1e-14` of the squared
    /// coefficient scale is a double root.
    pub fn real_roots(&self) -> Vec<f64> {
        let QuadraticCoeffs { c2: a, c1: b, c0: c } = *self;
        let scale = a.abs().max(b.abs()).max(c.abs());
        if scale == 0.0 {
            return Vec::new();
        }
        if a.abs() <= 1e-14 * scale {
            return if b.abs() <= 1e-14 * scale { Vec::new() } else { vec![-c / b] };
        }
        let disc = b * b - 4.0 * a * c;
        if disc.abs() <= 1e-14 * (b * b).max((4.0 * a * c).abs()) {
            return vec![-b / (2.0 * a)];
        }
        if disc < 0.0 {
            return Vec::new();
        }
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        let mut roots = vec![q / a, c / q];
        roots.sort_by(f64::total_cmp);
        roots
    }

    fn is_zero(&self) -> bool {
        self.c2 == 0.0 && self.c1 == 0.0 && self.c0 == 0.0
    }
}

/// Numerator of `F^(2)_k` for the run `I_k = .. = I_{k+l}`:
/// `Delta_k (h_k - h_{k-1}) (1 + h_{k+l} x)(1 + h_{k+l+1} x) - Delta_{k+l+1} (h_{k+l+1} - h_{k+l}) (1 + h_{k-1} x)(1 + h_k x)`.
pub fn f2_coeffs(problem: &KktProblem, k: usize, l: usize) -> Result<QuadraticCoeffs> {
    let s = problem.top_state();
    if k == 0 || k + l + 1 > s {
        return Err(Error::IndexOutOfRange {
            index: k + l,
            range: format!("run must lie inside [1, {}]", s.saturating_sub(1)),
        });
    }
    let h = |i: usize| problem.gain(i);
    let (a, b) = (k + l, k + l + 1);
    let push = problem.beta(k);
    let pull = problem.alpha(k + l);
    Ok(QuadraticCoeffs {
        c2: push * h(a) * h(b) - pull * h(k - 1) * h(k),
        c1: push * (h(a) + h(b)) - pull * (h(k - 1) + h(k)),
        c0: push - pull,
    })
}
