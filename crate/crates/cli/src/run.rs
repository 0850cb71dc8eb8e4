//! Execution of each experiment kind.

use rayon::prelude::*;
use serde_json::json;
use skg_core::det::{
    decompose_layers, det_capacity, det_upper_bound, layered_rate, run_layered_protocol, DetChannelFamily, LayeredConfig,
};
use skg_core::erasure::{erasure_capacity, run_protocol, ErasureConfig, SecureCountPolicy};
use skg_core::gauss::{
    achievable_rate, dof, dof_upper, gauss_upper_bound, layer_rates, GainProfile, PowerAllocation, StateProfile,
};
use skg_core::kkt::{best_candidate, certify, solve_kkt, KktOptions};
use skg_core::rng::{stream, Phase};
use skg_core::scenarios::{gain_surface, gain_sweep, power_profile, PROFILE_STATES};

use crate::config::{Basis, ExperimentConfig, Kind, Params};
use crate::error::CliError;
use crate::output::{Artifact, Cell};

const ORACLE_TOLERANCE: f64 = 1e-3;
const IDENTITY_TOLERANCE: f64 = 1e-9;

pub fn execute(config: &ExperimentConfig) -> Result<Artifact, CliError> {
    let p = &config.parameters;
    match config.kind {
        Kind::ErasureSim => erasure_sim(p),
        Kind::DetSim => det_sim(p),
        Kind::DetCapacity => det_capacity_table(p),
        Kind::GaussOptimize => gauss_optimize(p),
        Kind::GaussBounds => gauss_bounds(p),
        Kind::Dof => dof_table(p),
        Kind::Example1 => example1(p),
        Kind::Example2 => example2(p),
        Kind::Example3 => example3(p),
    }
}

/// `1` for real channels, `2` once the 1/2 factor is dropped.
fn rate_scale(p: &Params) -> f64 {
    if p.complex {
        2.0
    } else {
        1.0
    }
}

fn seed(p: &Params) -> u64 {
    p.seed.unwrap_or(0)
}

fn profile_for(p: &Params, states: usize) -> Result<StateProfile, CliError> {
    Ok(match &p.deltas {
        Some(d) => StateProfile::new(d.clone())?,
        None => StateProfile::uniform(states)?,
    })
}

fn policy(p: &Params) -> SecureCountPolicy {
    p.policy.map(Into::into).unwrap_or_default()
}

fn erasure_sim(p: &Params) -> Result<Artifact, CliError> {
    let base = ErasureConfig {
        terminals: p.terminals.unwrap_or(3),
        broadcasts: p.broadcasts.unwrap_or(1000),
        packet_len: p.packet_len.unwrap_or(16),
        field_order: p.field_order.unwrap_or(256),
        delta: p.delta.unwrap_or(0.5),
        delta_eve: p.delta_eve.unwrap_or(0.5),
        seed: seed(p),
        policy: policy(p),
    };
    base.validate()?;
    let capacity = erasure_capacity(base.delta, base.delta_eve, base.packet_len, base.field_order);
    let trials = p.trials.unwrap_or(1) as u64;
    let outcomes: Vec<_> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let config = ErasureConfig {
                seed: base.seed.wrapping_add(t),
                ..base.clone()
            };
            run_protocol(&config).map(|o| (config.seed, o))
        })
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    let mut mean = 0.0;
    for (s, o) in &outcomes {
        if base.policy == SecureCountPolicy::Realized && o.leakage_bits != 0.0 {
            return Err(CliError::Verification(format!("seed {s}: {} bits leaked", o.leakage_bits)));
        }
        if !o.keys_agree() {
            return Err(CliError::Verification(format!("seed {s}: honest keys differ")));
        }
        mean += o.key_rate() / trials as f64;
        rows.push(vec![
            Cell::Int(*s),
            Cell::Int(o.counts.key_len as u64),
            Cell::Num(o.key_bits()),
            Cell::Num(o.key_rate()),
            Cell::Num(capacity),
            Cell::Num(o.leakage_bits),
            Cell::Bool(o.keys_agree()),
        ]);
    }
    Ok(Artifact {
        header: vec!["seed", "key_packets", "key_bits", "rate", "capacity", "leakage_bits", "keys_agree"],
        rows,
        summary: json!({"mean_rate": mean, "capacity": capacity}),
    })
}

fn family(p: &Params) -> Result<DetChannelFamily, CliError> {
    let ranks = p.ranks.clone().unwrap_or_default();
    let packet_len = *ranks.last().unwrap_or(&0);
    let q = p.field_order.unwrap_or(16);
    Ok(match p.basis.unwrap_or_default() {
        Basis::Shift => DetChannelFamily::shift(packet_len, q, &ranks)?,
        Basis::Random => DetChannelFamily::random_basis(packet_len, q, &ranks, &mut stream(seed(p), Phase::Basis, 0))?,
    })
}

fn det_sim(p: &Params) -> Result<Artifact, CliError> {
    let family = family(p)?;
    let layers = decompose_layers(&family)?;
    let profile = profile_for(p, family.top_state() + 1)?;
    let capacity = det_capacity(&family, &profile)?;
    let base = LayeredConfig {
        terminals: p.terminals.unwrap_or(3),
        broadcasts: p.broadcasts.unwrap_or(1000),
        seed: seed(p),
        policy: policy(p),
    };
    let trials = p.trials.unwrap_or(1) as u64;
    let outcomes: Vec<_> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let config = LayeredConfig {
                seed: base.seed.wrapping_add(t),
                ..base.clone()
            };
            run_layered_protocol(&family, &layers, &profile, &config).map(|o| (config.seed, o))
        })
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    let mut mean = 0.0;
    for (s, o) in &outcomes {
        if base.policy == SecureCountPolicy::Realized && o.leakage_bits() != 0.0 {
            return Err(CliError::Verification(format!("seed {s}: {} bits leaked", o.leakage_bits())));
        }
        if !o.keys_agree() {
            return Err(CliError::Verification(format!("seed {s}: honest keys differ")));
        }
        mean += o.key_rate() / trials as f64;
        rows.push(vec![
            Cell::Int(*s),
            Cell::Num(o.key_bits()),
            Cell::Num(o.key_rate()),
            Cell::Num(capacity),
            Cell::Num(o.leakage_bits()),
            Cell::Bool(o.keys_agree()),
        ]);
    }
    Ok(Artifact {
        header: vec!["seed", "key_bits", "rate", "capacity", "leakage_bits", "keys_agree"],
        rows,
        summary: json!({"mean_rate": mean, "capacity": capacity, "layer_dims": layers.dims()}),
    })
}

fn det_capacity_table(p: &Params) -> Result<Artifact, CliError> {
    let family = family(p)?;
    let layers = decompose_layers(&family)?;
    let profile = profile_for(p, family.top_state() + 1)?;
    let capacity = det_capacity(&family, &profile)?;
    let converse = det_upper_bound(&family, &profile)?;
    let layer_sum = layered_rate(&layers, &family, &profile)?;
    if (converse - capacity).abs() > IDENTITY_TOLERANCE * (1.0 + capacity)
        || (layer_sum - capacity).abs() > IDENTITY_TOLERANCE * (1.0 + capacity)
    {
        return Err(CliError::Verification(format!(
            "capacity formulas disagree: {capacity} / {converse} / {layer_sum}"
        )));
    }
    Ok(Artifact {
        header: vec!["capacity", "converse", "layer_sum"],
        rows: vec![vec![Cell::Num(capacity), Cell::Num(converse), Cell::Num(layer_sum)]],
        summary: json!({"layer_dims": layers.dims()}),
    })
}

fn gains(p: &Params) -> Result<GainProfile, CliError> {
    let db = p.gains_db.clone().unwrap_or_default();
    Ok(GainProfile::from_db(&db, p.p_max.unwrap_or(10.0), p.block_len.unwrap_or(1))?)
}

fn gauss_optimize(p: &Params) -> Result<Artifact, CliError> {
    let gains = gains(p)?;
    let profile = profile_for(p, gains.top_state() + 1)?;
    let candidates = solve_kkt(&gains, &profile, KktOptions::default())?;
    let best = best_candidate(&candidates)?;
    let grid_rate = match p.grid {
        Some(steps) => Some(certify(&gains, &profile, steps, ORACLE_TOLERANCE)?.grid.rate),
        None => None,
    };
    let alloc = PowerAllocation::new(best.powers.clone())?;
    let per_layer = layer_rates(&alloc, &gains)?;
    let scale = rate_scale(p);
    let db = p.gains_db.clone().unwrap_or_default();
    let rows = (0..best.powers.len())
        .map(|k| {
            vec![
                Cell::Int(k as u64 + 1),
                Cell::Num(db[k + 1]),
                Cell::Num(best.powers[k]),
                Cell::Num(best.powers[k] / gains.p_max()),
                Cell::Num(scale * per_layer[k]),
            ]
        })
        .collect();
    Ok(Artifact {
        header: vec!["layer", "gain_db", "power", "fraction", "layer_rate"],
        rows,
        summary: json!({
            "rate": scale * best.rate,
            "candidates": candidates.len(),
            "interference": best.interference,
            "grid_rate": grid_rate.map(|r| scale * r),
        }),
    })
}

fn gauss_bounds(p: &Params) -> Result<Artifact, CliError> {
    let gains = gains(p)?;
    let profile = profile_for(p, gains.top_state() + 1)?;
    let (achievable, source) = match &p.powers {
        Some(powers) => {
            let alloc = PowerAllocation::new(powers.clone())?;
            (achievable_rate(&alloc, &gains, &profile)?, "given")
        }
        None => {
            let best = best_candidate(&solve_kkt(&gains, &profile, KktOptions::default())?)?;
            (best.rate, "optimized")
        }
    };
    let upper = gauss_upper_bound(&gains, &profile)?;
    if achievable > upper * (1.0 + 1e-12) {
        return Err(CliError::Verification(format!("achievable rate {achievable} exceeds upper bound {upper}")));
    }
    let scale = rate_scale(p);
    Ok(Artifact {
        header: vec!["achievable", "upper_bound"],
        rows: vec![vec![Cell::Num(scale * achievable), Cell::Num(scale * upper)]],
        summary: json!({"allocation": source}),
    })
}

fn dof_table(p: &Params) -> Result<Artifact, CliError> {
    let gammas = p.gammas.clone().unwrap_or_default();
    let profile = profile_for(p, gammas.len())?;
    let block_len = p.block_len.unwrap_or(1);
    let lower = dof(&profile, &gammas, block_len)?;
    let upper = dof_upper(&profile, &gammas, block_len)?;
    if (lower - upper).abs() > 1e-12 * (1.0 + upper) {
        return Err(CliError::Verification(format!("degrees of freedom {lower} and {upper} differ")));
    }
    let scale = rate_scale(p);
    Ok(Artifact {
        header: vec!["dof", "dof_upper"],
        rows: vec![vec![Cell::Num(scale * lower), Cell::Num(scale * upper)]],
        summary: json!({}),
    })
}

fn example1(p: &Params) -> Result<Artifact, CliError> {
    let scale = rate_scale(p);
    let rows = gain_sweep(p.p_max.unwrap_or(10.0), p.grid.unwrap_or(200))?;
    if let Some(r) = rows.iter().find(|r| r.achievable > r.upper_bound) {
        return Err(CliError::Verification(format!("achievable above upper bound at h1 = {} dB", r.h1_db)));
    }
    Ok(Artifact {
        header: vec!["h1_db", "achievable", "upper_bound"],
        rows: rows
            .iter()
            .map(|r| vec![Cell::Num(r.h1_db), Cell::Num(scale * r.achievable), Cell::Num(scale * r.upper_bound)])
            .collect(),
        summary: json!({"points": rows.len()}),
    })
}

fn example2(p: &Params) -> Result<Artifact, CliError> {
    let scale = rate_scale(p);
    let rows = gain_surface(p.p_max.unwrap_or(10.0), p.grid.unwrap_or(40))?;
    if let Some(r) = rows.iter().find(|r| r.achievable > r.upper) {
        return Err(CliError::Verification(format!(
            "achievable above upper bound at ({}, {}) dB",
            r.g1_db, r.g2_db
        )));
    }
    Ok(Artifact {
        header: vec!["g1_db", "g2_db", "achievable", "upper"],
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    Cell::Num(r.g1_db),
                    Cell::Num(r.g2_db),
                    Cell::Num(scale * r.achievable),
                    Cell::Num(scale * r.upper),
                ]
            })
            .collect(),
        summary: json!({"points": rows.len()}),
    })
}

fn example3(p: &Params) -> Result<Artifact, CliError> {
    let budgets = p.p_max_values.clone().unwrap_or_else(|| vec![0.1, 1.0, 10.0, 100.0]);
    let states = p.states.unwrap_or(PROFILE_STATES);
    let results: Vec<_> = budgets
        .par_iter()
        .map(|&pm| power_profile(pm, states))
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    let mut rates = Vec::new();
    for r in &results {
        let fractions = r.fractions();
        let sum: f64 = fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CliError::Verification(format!("fractions at p_max = {} sum to {sum}", r.p_max)));
        }
        rates.push(rate_scale(p) * r.optimum.rate);
        for (k, f) in fractions.iter().enumerate() {
            rows.push(vec![Cell::Num(r.p_max), Cell::Int(k as u64 + 1), Cell::Num(r.gains_db[k + 1]), Cell::Num(*f)]);
        }
    }
    Ok(Artifact {
        header: vec!["p_max", "layer", "gain_db", "fraction"],
        rows,
        summary: json!({"p_max": budgets, "rate": rates}),
    })
}
