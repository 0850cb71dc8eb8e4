//! Experiment configuration: a JSON document and/or inline flags, merged and checked
//! against the schema of each experiment kind.

use std::fmt;
use std::path::Path;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use skg_core::erasure::{SecureCountPolicy, MAX_RECEIVERS};
use skg_core::gf::{prime_power, MAX_ORDER};

use crate::error::CliError;

const SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    ErasureSim,
    DetSim,
    DetCapacity,
    GaussOptimize,
    GaussBounds,
    Dof,
    Example1,
    Example2,
    Example3,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = self.to_possible_value().expect("no skipped variants");
        f.write_str(name.get_name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    /// Shift matrices: layers are coordinate blocks.
    #[default]
    Shift,
    /// Shift matrices under a random change of basis.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyArg {
    Realized,
    Expected,
}

impl From<PolicyArg> for SecureCountPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Realized => SecureCountPolicy::Realized,
            PolicyArg::Expected => SecureCountPolicy::Expected,
        }
    }
}

/// Every parameter any kind accepts. Inline flags share these names.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Honest terminals including the sender (m).
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terminals: Option<usize>,
    /// Broadcast packets (n).
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub broadcasts: Option<usize>,
    /// Symbols per packet (L).
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub packet_len: Option<usize>,
    /// Field order q.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field_order: Option<u32>,
    /// Honest erasure probability.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Eavesdropper erasure probability.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_eve: Option<f64>,
    /// Secure key length from realized or expected erasures.
    #[arg(long, global = true, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy: Option<PolicyArg>,
    /// State probabilities delta_0..delta_s, comma separated.
    #[arg(long, global = true, value_delimiter = ',', num_args = 1..)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    /// Channel ranks r_0..r_s, comma separated.
    #[arg(long, global = true, value_delimiter = ',', num_args = 1..)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ranks: Option<Vec<usize>>,
    #[arg(long, global = true, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub basis: Option<Basis>,
    /// Channel gains in dB, comma separated.
    #[arg(long, global = true, value_delimiter = ',', num_args = 1.., allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gains_db: Option<Vec<f64>>,
    /// Gain exponents gamma_0..gamma_s.
    #[arg(long, global = true, value_delimiter = ',', num_args = 1..)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gammas: Option<Vec<f64>>,
    /// Layer powers P_1..P_s.
    #[arg(long, global = true, value_delimiter = ',', num_args = 1..)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub powers: Option<Vec<f64>>,
    /// Total power budget.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_max: Option<f64>,
    /// Budgets of the power-profile example.
    #[arg(long, global = true, value_delimiter = ',', num_args = 1..)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_max_values: Option<Vec<f64>>,
    /// State count of the power-profile example.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub states: Option<usize>,
    /// Channel uses per block (L) in Gaussian rates and DoF.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub block_len: Option<usize>,
    /// Base RNG seed; trial t uses seed + t.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Monte-Carlo repetitions.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    /// Sweep points per axis, or grid-oracle steps for gauss-optimize.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    /// Complex channels: drops the 1/2 factor of every Gaussian rate.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub complex: bool,
}

impl Params {
    /// `self` with every field set in `over` replaced.
    pub fn overridden_by(mut self, over: &Params) -> Self {
        macro_rules! take {
            ($($f:ident),*) => {$(
                if over.$f.is_some() {
                    self.$f = over.$f.clone();
                }
            )*};
        }
        take!(
            terminals, broadcasts, packet_len, field_order, delta, delta_eve, policy, deltas, ranks, basis, gains_db,
            gammas, powers, p_max, p_max_values, states, block_len, seed, trials, grid
        );
        self.complex |= over.complex;
        self
    }

    fn set_fields(&self) -> Vec<String> {
        match serde_json::to_value(self) {
            Ok(serde_json::Value::Object(map)) => map.keys().cloned().collect(),
            _ => Vec::new(),
        }
    }
}

/// Document form: `{"kind": ..., "parameters": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default)]
    pub parameters: Params,
}

/// Partial document: the kind may come from the subcommand instead.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    kind: Option<Kind>,
    #[serde(default)]
    parameters: Params,
}

/// Reads the file (if any), checks its kind against the requested one and applies
/// the inline overrides.
pub fn resolve(path: Option<&Path>, kind: Option<Kind>, inline: &Params) -> Result<ExperimentConfig, CliError> {
    let file = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(vec![format!("{}: {e}", p.display())]))?;
            serde_json::from_str::<ConfigFile>(&text)
                .map_err(|e| CliError::Config(vec![format!("{}: {e}", p.display())]))?
        }
        None => ConfigFile {
            kind: None,
            parameters: Params::default(),
        },
    };
    let kind = match (kind, file.kind) {
        (Some(a), Some(b)) if a != b => {
            return Err(CliError::Config(vec![format!("config file is for {b}, but {a} was requested")]))
        }
        (Some(k), _) | (None, Some(k)) => k,
        (None, None) => return Err(CliError::Config(vec!["no experiment kind given".into()])),
    };
    Ok(ExperimentConfig {
        kind,
        parameters: file.parameters.overridden_by(inline),
    })
}

fn allowed(kind: Kind) -> &'static [&'static str] {
    match kind {
        Kind::ErasureSim => &[
            "terminals", "broadcasts", "packet_len", "field_order", "delta", "delta_eve", "policy", "seed", "trials",
        ],
        Kind::DetSim => &[
            "terminals", "broadcasts", "field_order", "deltas", "ranks", "basis", "policy", "seed", "trials",
        ],
        Kind::DetCapacity => &["field_order", "deltas", "ranks", "basis", "seed"],
        Kind::GaussOptimize => &["gains_db", "deltas", "p_max", "block_len", "grid", "complex", "seed"],
        Kind::GaussBounds => &["gains_db", "deltas", "p_max", "block_len", "powers", "complex", "seed"],
        Kind::Dof => &["gammas", "deltas", "block_len", "complex", "seed"],
        Kind::Example1 | Kind::Example2 => &["p_max", "grid", "complex", "seed"],
        Kind::Example3 => &["p_max_values", "states", "complex", "seed"],
    }
}

fn required(kind: Kind) -> &'static [&'static str] {
    match kind {
        Kind::DetSim | Kind::DetCapacity => &["ranks"],
        Kind::GaussOptimize | Kind::GaussBounds => &["gains_db"],
        Kind::Dof => &["gammas"],
        _ => &[],
    }
}

/// Schema violations; empty when the configuration can run.
pub fn validate(config: &ExperimentConfig) -> Vec<String> {
    let p = &config.parameters;
    let kind = config.kind;
    let mut out = Vec::new();
    let set = p.set_fields();
    for f in &set {
        if !allowed(kind).contains(&f.as_str()) {
            out.push(format!("parameter `{f}` does not apply to {kind}"));
        }
    }
    for f in required(kind) {
        if !set.iter().any(|s| s == f) {
            out.push(format!("parameter `{f}` is required for {kind}"));
        }
    }

    if let Some(m) = p.terminals {
        if !(2..=MAX_RECEIVERS + 1).contains(&m) {
            out.push(format!("terminals must be in [2, {}]", MAX_RECEIVERS + 1));
        }
    }
    for (name, v) in [("broadcasts", p.broadcasts), ("packet_len", p.packet_len), ("trials", p.trials), ("grid", p.grid), ("block_len", p.block_len)] {
        if v == Some(0) {
            out.push(format!("{name} must be positive"));
        }
    }
    if let Some(q) = p.field_order {
        if prime_power(q).is_none() || q > MAX_ORDER {
            out.push(format!("field_order {q} is not a prime power in [2, {MAX_ORDER}]"));
        }
    }
    for (name, v) in [("delta", p.delta), ("delta_eve", p.delta_eve)] {
        if let Some(v) = v {
            if !(0.0..=1.0).contains(&v) {
                out.push(format!("{name} must be in [0, 1]"));
            }
        }
    }
    if let Some(d) = &p.deltas {
        if d.is_empty() {
            out.push("deltas must not be empty".into());
        } else if d.iter().any(|x| !x.is_finite() || *x < 0.0) {
            out.push("deltas must be non-negative".into());
        } else {
            let sum: f64 = d.iter().sum();
            if (sum - 1.0).abs() > SUM_TOLERANCE {
                out.push(format!("deltas must sum to 1 within 1e-12 (sum = {sum})"));
            }
        }
    }
    if let Some(r) = &p.ranks {
        if r.len() < 2 || r[0] != 0 || r.windows(2).any(|w| w[1] < w[0]) {
            out.push("ranks must start at 0, be non-decreasing and have at least two entries".into());
        } else if r[r.len() - 1] == 0 {
            out.push("the top rank must be positive".into());
        }
    }
    if let Some(g) = &p.gains_db {
        if g.is_empty() {
            out.push("gains_db must not be empty".into());
        } else if g.iter().any(|x| !x.is_finite()) {
            out.push("gains_db must be finite".into());
        } else if g.windows(2).any(|w| w[1] <= w[0]) {
            out.push("gains must be strictly increasing".into());
        } else if matches!(kind, Kind::GaussOptimize | Kind::GaussBounds) && g.len() < 2 {
            out.push("power allocation needs at least two gains".into());
        }
    }
    if let Some(g) = &p.gammas {
        if g.is_empty() || g.iter().any(|x| !x.is_finite() || *x < 0.0) || g.windows(2).any(|w| w[1] <= w[0]) {
            out.push("gammas must be non-negative and strictly increasing".into());
        }
    }
    if let Some(pw) = &p.powers {
        if pw.iter().any(|x| !x.is_finite() || *x < 0.0) {
            out.push("powers must be non-negative".into());
        }
    }
    if let Some(pm) = p.p_max {
        if !pm.is_finite() || pm <= 0.0 {
            out.push("p_max must be positive".into());
        }
    }
    if let Some(v) = &p.p_max_values {
        if v.is_empty() || v.iter().any(|x| !x.is_finite() || *x <= 0.0) {
            out.push("p_max_values must be a non-empty list of positive budgets".into());
        }
    }
    if p.states.is_some_and(|s| s < 2) {
        out.push("states must be at least 2".into());
    }

    // Cross-field state counts.
    let states = match kind {
        Kind::DetSim | Kind::DetCapacity => p.ranks.as_ref().map(Vec::len),
        Kind::GaussOptimize | Kind::GaussBounds => p.gains_db.as_ref().map(Vec::len),
        Kind::Dof => p.gammas.as_ref().map(Vec::len),
        _ => None,
    };
    if let (Some(n), Some(d)) = (states, &p.deltas) {
        if d.len() != n {
            out.push(format!("deltas has {} entries for {n} states", d.len()));
        }
    }
    if let (Some(pw), Some(g)) = (&p.powers, &p.gains_db) {
        if pw.len() + 1 != g.len() {
            out.push(format!("powers has {} entries for {} layers", pw.len(), g.len().saturating_sub(1)));
        }
        if let Some(pm) = p.p_max {
            let total: f64 = pw.iter().sum();
            if total > pm * (1.0 + 1e-12) {
                out.push(format!("powers sum to {total}, above p_max = {pm}"));
            }
        }
    }
    out
}
