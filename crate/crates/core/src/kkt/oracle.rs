//! Independent checks on the KKT solver: exhaustive grid search over the budget
//! simplex and the closed-form two-layer solution.

use serde::Serialize;

use super::solver::{best_of, solve_problem, KktCandidate, KktOptions};
use super::KktProblem;
use crate::gauss::{GainProfile, StateProfile};
use crate::{Error, Result};

/// Largest `s` the grid search accepts.
pub const GRID_MAX_STATES: usize = 4;
/// Relative margin inside which a closed-form case comparison counts as a tie.
pub const TIE_MARGIN: f64 = 1e-9;

/// Best point of the grid `P_i = n_i P_max / steps`, `sum_i n_i = steps`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridOptimum {
    pub powers: Vec<f64>,
    pub rate: f64,
}

/// Grid search over the full-budget simplex.
pub fn grid_oracle(gains: &GainProfile, profile: &StateProfile, steps: usize) -> Result<GridOptimum> {
    if steps == 0 {
        return Err(Error::InvalidParameter("grid needs at least one step".into()));
    }
    let s = gains.top_state();
    if s > GRID_MAX_STATES {
        return Err(Error::InvalidParameter(format!("grid search supports s <= {GRID_MAX_STATES}, got {s}")));
    }
    if s == 0 {
        return Err(Error::InvalidParameter("power allocation needs at least two states".into()));
    }
    let problem = KktProblem::new(gains, profile)?;
    let unit = problem.p_max() / steps as f64;
    // Walk I_1 >= .. >= I_{s-1} on the grid; I_0 and I_s are pinned.
    let mut levels = vec![steps; s + 1];
    levels[s] = 0;
    let mut interference = vec![0.0; s + 1];
    interference[0] = problem.p_max();
    let mut best = GridOptimum {
        powers: Vec::new(),
        rate: f64::NEG_INFINITY,
    };
    walk(&problem, 1, unit, &mut levels, &mut interference, &mut best);
    Ok(best)
}

fn walk(problem: &KktProblem, k: usize, unit: f64, levels: &mut [usize], interference: &mut [f64], best: &mut GridOptimum) {
    let s = problem.top_state();
    if k == s {
        let rate = problem.rate(interference);
        if rate > best.rate {
            best.rate = rate;
            best.powers = levels.windows(2).map(|w| (w[0] - w[1]) as f64 * unit).collect();
        }
        return;
    }
    for n in 0..=levels[k - 1] {
        levels[k] = n;
        interference[k] = n as f64 * unit;
        walk(problem, k + 1, unit, levels, interference, best);
    }
}

/// KKT optimum together with the grid optimum that certifies it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub optimum: KktCandidate,
    pub grid: GridOptimum,
    /// `grid.rate - optimum.rate`; positive means the grid found a better point.
    pub gap: f64,
}

/// Runs both the solver and the grid; fails when the grid beats the solver by more than
/// `tolerance * (1 + rate)`.
pub fn certify(gains: &GainProfile, profile: &StateProfile, steps: usize, tolerance: f64) -> Result<Certificate> {
    let problem = KktProblem::new(gains, profile)?;
    let optimum = best_of(solve_problem(&problem, KktOptions::default()))?;
    let grid = grid_oracle(gains, profile, steps)?;
    let gap = grid.rate - optimum.rate;
    let allowed = tolerance * (1.0 + optimum.rate.abs());
    if gap > allowed {
        return Err(Error::OracleDisagreement { gap, tolerance: allowed });
    }
    Ok(Certificate { optimum, grid, gap })
}

/// Which regime the two-layer closed form falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TwoLayerCase {
    /// `alpha_1 < beta_1`: all power on the lower layer.
    LowerLayerOnly,
    /// `h_2 beta_1 < h_0 alpha_1`: all power on the upper layer.
    UpperLayerOnly,
    /// Otherwise the upper layer gets `min(r_1, P_max)`.
    Split,
}

/// Closed-form optimum for `s = 2`; returns `(P_1, P_2)` and the case. Comparisons
/// within `TIE_MARGIN` are reported as `BoundaryTie` so the caller can fall back to
/// the general solver.
pub fn two_layer_closed_form(gains: &GainProfile, profile: &StateProfile) -> Result<([f64; 2], TwoLayerCase)> {
    if gains.top_state() != 2 || profile.top_state() != 2 {
        return Err(Error::InvalidParameter("closed form needs exactly three states".into()));
    }
    let problem = KktProblem::new(gains, profile)?;
    let (alpha, beta) = (problem.alpha(1), problem.beta(1));
    let (h0, h2) = (problem.gain(0), problem.gain(2));
    let p_max = problem.p_max();
    let tie = |a: f64, b: f64| (a - b).abs() <= TIE_MARGIN * a.abs().max(b.abs());
    if tie(alpha, beta) {
        return Err(Error::BoundaryTie(format!("alpha_1 = {alpha:e}, beta_1 = {beta:e}")));
    }
    if alpha < beta {
        return Ok(([p_max, 0.0], TwoLayerCase::LowerLayerOnly));
    }
    let (lhs, rhs) = (h2 * beta, h0 * alpha);
    if tie(lhs, rhs) {
        return Err(Error::BoundaryTie(format!("h_2 beta_1 = {lhs:e}, h_0 alpha_1 = {rhs:e}")));
    }
    if lhs < rhs {
        return Ok(([0.0, p_max], TwoLayerCase::UpperLayerOnly));
    }
    let root = (alpha - beta) / (lhs - rhs);
    let upper = root.min(p_max);
    Ok(([p_max - upper, upper], TwoLayerCase::Split))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kkt::optimize;

    fn setup(gains: &[f64], deltas: &[f64], p_max: f64) -> (GainProfile, StateProfile) {
        (
            GainProfile::new(gains.to_vec(), p_max, 1).unwrap(),
            StateProfile::new(deltas.to_vec()).unwrap(),
        )
    }

    fn thirds() -> Vec<f64> {
        vec![1.0 / 3.0, 1.0 / 3.0, 1.0 - 2.0 / 3.0]
    }

    #[test]
    fn single_layer_grid() {
        let (g, p) = setup(&[0.5, 2.0], &[0.5, 0.5], 3.0);
        let best = grid_oracle(&g, &p, 10).unwrap();
        assert_eq!(best.powers, vec![3.0]);
    }

    #[test]
    fn grid_agrees_on_three_state_example() {
        let (g, p) = setup(&[0.1, 1.0, 10.0], &thirds(), 10.0);
        let cert = certify(&g, &p, 2000, 1e-3).unwrap();
        assert!(cert.gap.abs() <= 1e-3 * cert.optimum.rate);
        assert!((cert.grid.powers[1] - 1.0).abs() < 10.0 / 2000.0 + 1e-12);
    }

    #[test]
    fn grid_rejects_large_problems() {
        let (g, p) = setup(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[1.0 / 6.0; 6], 1.0);
        assert!(grid_oracle(&g, &p, 10).is_err());
        let (g, p) = setup(&[1.0, 2.0], &[0.5, 0.5], 1.0);
        assert!(grid_oracle(&g, &p, 0).is_err());
    }

    #[test]
    fn closed_form_cases() {
        let (g, p) = setup(&[0.1, 1.0, 10.0], &thirds(), 10.0);
        let (powers, case) = two_layer_closed_form(&g, &p).unwrap();
        assert_eq!(case, TwoLayerCase::Split);
        assert!((powers[1] - 1.0).abs() < 1e-12);

        let (g, p) = setup(&[0.1, 1.0, 10.0], &[0.5, 0.49, 0.01], 10.0);
        let (powers, case) = two_layer_closed_form(&g, &p).unwrap();
        assert_eq!(case, TwoLayerCase::LowerLayerOnly);
        assert_eq!(powers, [10.0, 0.0]);
        let best = optimize(&g, &p, KktOptions::default()).unwrap();
        assert!((best.powers[0] - 10.0).abs() < 1e-9);

        // Nearly flat gains with mass on the top state: h_2 beta_1 < h_0 alpha_1.
        let (g, p) = setup(&[1.0, 1.05, 1.1], &[0.05, 0.05, 0.9], 10.0);
        let (powers, case) = two_layer_closed_form(&g, &p).unwrap();
        assert_eq!(case, TwoLayerCase::UpperLayerOnly);
        assert_eq!(powers, [0.0, 10.0]);
        let best = optimize(&g, &p, KktOptions::default()).unwrap();
        assert!((best.powers[1] - 10.0).abs() < 1e-9);
    }

    #[test]
    fn closed_form_reports_ties() {
        let (g, p) = setup(&[1.0, 2.0, 3.0], &[0.25, 0.25, 0.5], 1.0);
        // theta = (0, 0.25, 0.5): beta_1 = 0.1875, alpha_1 = 0.25.
        assert!(two_layer_closed_form(&g, &p).is_ok());
        let (g, p) = setup(&[1.0, 2.0, 3.0], &[0.5, 0.0, 0.5], 1.0);
        // theta_1 = theta_2 = 0.5 makes alpha_1 = beta_1.
        assert!(matches!(two_layer_closed_form(&g, &p), Err(Error::BoundaryTie(_))));
    }
}
