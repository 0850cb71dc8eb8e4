//! The three Gaussian evaluation setups: a three-state sweep over the middle gain, a
//! four-state surface over the two middle gains, and the 36-state power profile.

use serde::Serialize;

use crate::gauss::{gauss_upper_bound, GainProfile, StateProfile};
use crate::kkt::{optimize, solve_kkt, KktCandidate, KktOptions};
use crate::Result;

/// Lowest and highest gain of every setup, in dB.
pub const LOW_DB: f64 = -5.0;
pub const HIGH_DB: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub h1_db: f64,
    pub achievable: f64,
    pub upper_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceRow {
    pub g1_db: f64,
    pub g2_db: f64,
    pub achievable: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerProfileResult {
    pub p_max: f64,
    pub gains_db: Vec<f64>,
    pub optimum: KktCandidate,
    /// Every KKT point found; kept for residual audits.
    pub candidates: Vec<KktCandidate>,
}

impl PowerProfileResult {
    pub fn fractions(&self) -> Vec<f64> {
        self.optimum.power_fractions()
    }
}

/// Midpoints of `points` equal cells covering `(LOW_DB, HIGH_DB)`, shifted by `phase`
/// cells (`0.5` centres them).
fn open_grid(points: usize, phase: f64) -> Vec<f64> {
    let width = (HIGH_DB - LOW_DB) / points as f64;
    (0..points).map(|k| LOW_DB + width * (k as f64 + phase)).collect()
}

fn rates(gains_db: &[f64], p_max: f64) -> Result<(f64, f64)> {
    let gains = GainProfile::from_db(gains_db, p_max, 1)?;
    let profile = StateProfile::uniform(gains_db.len())?;
    let best = optimize(&gains, &profile, KktOptions::default())?;
    Ok((best.rate, gauss_upper_bound(&gains, &profile)?))
}

/// Three equiprobable states, `h_0 = -5 dB`, `h_2 = 30 dB`, `h_1` swept over `points`
/// values strictly between them.
pub fn gain_sweep(p_max: f64, points: usize) -> Result<Vec<SweepRow>> {
    open_grid(points, 0.5)
        .into_iter()
        .map(|h1_db| {
            let (achievable, upper_bound) = rates(&[LOW_DB, h1_db, HIGH_DB], p_max)?;
            Ok(SweepRow {
                h1_db,
                achievable,
                upper_bound,
            })
        })
        .collect()
}

/// Four equiprobable states with `h_1 = min(g_1, g_2)`, `h_2 = max(g_1, g_2)`. The two
/// axes use grids offset by a third of a cell so `g_1 != g_2` at every point.
pub fn gain_surface(p_max: f64, points: usize) -> Result<Vec<SurfaceRow>> {
    let (axis1, axis2) = (open_grid(points, 1.0 / 3.0), open_grid(points, 2.0 / 3.0));
    let mut rows = Vec::with_capacity(points * points);
    for &g1_db in &axis1 {
        for &g2_db in &axis2 {
            let (achievable, upper) = rates(&[LOW_DB, g1_db.min(g2_db), g1_db.max(g2_db), HIGH_DB], p_max)?;
            rows.push(SurfaceRow {
                g1_db,
                g2_db,
                achievable,
                upper,
            });
        }
    }
    Ok(rows)
}

/// `states` equiprobable states with gains `(-5 + i) dB`.
pub fn power_profile(p_max: f64, states: usize) -> Result<PowerProfileResult> {
    let gains_db: Vec<f64> = (0..states).map(|i| LOW_DB + i as f64).collect();
    let gains = GainProfile::from_db(&gains_db, p_max, 1)?;
    let profile = StateProfile::uniform(states)?;
    let candidates = solve_kkt(&gains, &profile, KktOptions::default())?;
    let optimum = crate::kkt::best_candidate(&candidates)?;
    Ok(PowerProfileResult {
        p_max,
        gains_db,
        optimum,
        candidates,
    })
}

/// State count of the power-profile setup.
pub const PROFILE_STATES: usize = 36;
