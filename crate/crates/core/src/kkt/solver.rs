//! Recursive enumeration of KKT points.
//!
//! The state is a chain of nodes, each a run `I_l = .. = I_u` with bounds
//! `[min, max]` on the common value. An undetermined run is resolved by splitting its
//! interval at the roots of its derivative: where the derivative is negative the run
//! must join the previous one, where it is positive the next one, and at a root its
//! value is fixed. Every branch whose bounds stay consistent is explored; completed
//! chains are checked against the full KKT system before they are reported.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{f1_coeffs, f2_coeffs, KktProblem};
use crate::gauss::{GainProfile, StateProfile};
use crate::{Error, Result};

/// Normalized stationarity residual accepted for a reported candidate.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;
/// Multipliers below this (relative) are rounding noise and clipped to zero.
const MULTIPLIER_CLIP: f64 = 1e-12;
/// Multipliers below `-MULTIPLIER_REJECT` (relative) violate dual feasibility.
const MULTIPLIER_REJECT: f64 = 1e-9;
/// Relative tolerance when comparing interference vectors.
const DEDUP_TOLERANCE: f64 = 1e-9;

/// Run `I_l = .. = I_u` whose common value lies in `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KktNode {
    pub l: usize,
    pub u: usize,
    pub min: f64,
    pub max: f64,
    pub determined: bool,
}

/// Which undetermined run the recursion resolves next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PickOrder {
    /// The run with the fewest branches; keeps the search tree narrow.
    #[default]
    FewestBranches,
    Lowest,
    Highest,
    Random(u64),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct KktOptions {
    pub order: PickOrder,
}

/// A point satisfying the KKT conditions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktCandidate {
    /// `I_0..I_s`.
    #[serde(rename = "I")]
    pub interference: Vec<f64>,
    /// `P_1..P_s`.
    #[serde(rename = "P")]
    pub powers: Vec<f64>,
    /// `lambda_1..lambda_s`, scaled per unit block length.
    #[serde(rename = "lambda")]
    pub multipliers: Vec<f64>,
    pub rate: f64,
    /// Runs of equal interference, as `(l, u)` index pairs.
    pub runs: Vec<(usize, usize)>,
    /// Largest normalized stationarity residual over the interior runs.
    pub max_residual: f64,
}

impl KktCandidate {
    /// Fraction of the budget in each layer.
    pub fn power_fractions(&self) -> Vec<f64> {
        let total = self.interference[0];
        self.powers.iter().map(|p| p / total).collect()
    }
}

#[derive(Debug, Clone, Copy)]
enum Branch {
    JoinPrevious { lo: f64, hi: f64 },
    JoinNext { lo: f64, hi: f64 },
    Fix(f64),
}

struct Search<'a> {
    problem: &'a KktProblem,
    tol: f64,
    order: PickOrder,
    rng: ChaCha8Rng,
    found: Vec<KktCandidate>,
}

impl Search<'_> {
    /// Sign pieces and roots of the run derivative over the node's interval.
    fn branches(&self, node: &KktNode) -> Vec<Branch> {
        let (lo, hi) = (node.min, node.max);
        let (numerator, roots): (Box<dyn Fn(f64) -> f64>, Vec<f64>) = if node.l == node.u {
            let c = f1_coeffs(self.problem, node.l).expect("undetermined runs are interior");
            let roots = if c.slope != 0.0 { vec![c.offset / c.slope] } else { Vec::new() };
            if c.slope == 0.0 && c.offset == 0.0 {
                return self.flat(lo, hi);
            }
            (Box::new(move |x| c.numerator(x)), roots)
        } else {
            let c = f2_coeffs(self.problem, node.l, node.u - node.l).expect("undetermined runs are interior");
            if c.is_zero() {
                return self.flat(lo, hi);
            }
            (Box::new(move |x| c.eval(x)), c.real_roots())
        };

        let mut inside: Vec<f64> = roots
            .into_iter()
            .filter(|r| *r >= lo - self.tol && *r <= hi + self.tol)
            .map(|r| r.clamp(lo, hi))
            .collect();
        inside.dedup_by(|a, b| (*a - *b).abs() <= self.tol);

        let mut out: Vec<Branch> = inside.iter().map(|&r| Branch::Fix(r)).collect();
        let mut points = vec![lo];
        points.extend(inside.iter().copied());
        points.push(hi);
        points.dedup_by(|a, b| (*a - *b).abs() <= self.tol);
        if points.len() == 1 {
            // Degenerate interval without a root: one sign decides.
            if inside.is_empty() {
                out.extend(self.piece(&*numerator, lo, hi));
            }
            return out;
        }
        for w in points.windows(2) {
            out.extend(self.piece(&*numerator, w[0], w[1]));
        }
        out
    }

    fn piece(&self, numerator: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> Option<Branch> {
        let v = numerator(0.5 * (lo + hi));
        if v < 0.0 {
            Some(Branch::JoinPrevious { lo, hi })
        } else if v > 0.0 {
            Some(Branch::JoinNext { lo, hi })
        } else {
            Some(Branch::Fix(0.5 * (lo + hi)))
        }
    }

    /// Derivative identically zero: any value works, so keep the joins and one representative.
    fn flat(&self, lo: f64, hi: f64) -> Vec<Branch> {
        vec![Branch::JoinPrevious { lo, hi }, Branch::JoinNext { lo, hi }, Branch::Fix(lo)]
    }

    fn pick(&mut self, nodes: &[KktNode]) -> Option<(usize, Vec<Branch>)> {
        let open: Vec<usize> = (0..nodes.len()).filter(|&j| !nodes[j].determined).collect();
        let j = match self.order {
            PickOrder::Lowest => *open.first()?,
            PickOrder::Highest => *open.last()?,
            PickOrder::Random(_) => {
                if open.is_empty() {
                    return None;
                }
                open[self.rng.random_range(0..open.len())]
            }
            PickOrder::FewestBranches => {
                let mut best: Option<(usize, Vec<Branch>)> = None;
                for &j in &open {
                    let b = self.branches(&nodes[j]);
                    if best.as_ref().is_none_or(|(_, bb)| b.len() < bb.len()) {
                        let done = b.len() <= 1;
                        best = Some((j, b));
                        if done {
                            break;
                        }
                    }
                }
                return best;
            }
        };
        Some((j, self.branches(&nodes[j])))
    }

    fn recurse(&mut self, nodes: Vec<KktNode>) {
        let Some((j, branches)) = self.pick(&nodes) else {
            self.finish(&nodes);
            return;
        };
        for b in branches {
            if let Some(next) = self.apply(&nodes, j, b) {
                self.recurse(next);
            }
        }
    }

    fn apply(&self, nodes: &[KktNode], j: usize, branch: Branch) -> Option<Vec<KktNode>> {
        let mut out = nodes.to_vec();
        let node = nodes[j];
        match branch {
            Branch::Fix(x) => {
                out[j] = KktNode {
                    min: x,
                    max: x,
                    determined: true,
                    ..node
                };
            }
            Branch::JoinPrevious { lo, hi } | Branch::JoinNext { lo, hi } => {
                let other = if matches!(branch, Branch::JoinPrevious { .. }) { j - 1 } else { j + 1 };
                let nb = nodes[other];
                let merged = KktNode {
                    l: node.l.min(nb.l),
                    u: node.u.max(nb.u),
                    min: nb.min.max(node.min).max(lo),
                    max: nb.max.min(node.max).min(hi),
                    determined: nb.determined,
                };
                if merged.min > merged.max + self.tol {
                    return None;
                }
                let merged = if nb.determined {
                    // A fixed value stays exactly as it was determined.
                    KktNode {
                        min: nb.min,
                        max: nb.max,
                        ..merged
                    }
                } else {
                    merged
                };
                let first = j.min(other);
                out[first] = merged;
                out.remove(first + 1);
            }
        }
        self.propagate(&mut out).then_some(out)
    }

    /// Chain ordering `I_u <= I_{u-1}` pushed through the bounds. False on contradiction.
    fn propagate(&self, nodes: &mut [KktNode]) -> bool {
        for i in 1..nodes.len() {
            let cap = nodes[i - 1].max;
            if nodes[i].determined {
                if nodes[i].min > cap + self.tol {
                    return false;
                }
            } else {
                nodes[i].max = nodes[i].max.min(cap);
            }
        }
        for i in (0..nodes.len() - 1).rev() {
            let floor = nodes[i + 1].min;
            if nodes[i].determined {
                if nodes[i].max + self.tol < floor {
                    return false;
                }
            } else {
                nodes[i].min = nodes[i].min.max(floor);
            }
        }
        for n in nodes.iter_mut().filter(|n| !n.determined) {
            if n.min > n.max + self.tol {
                return false;
            }
            if n.min > n.max {
                n.min = n.max;
            }
        }
        true
    }

    fn finish(&mut self, nodes: &[KktNode]) {
        if let Some(c) = verify_runs(self.problem, nodes) {
            let dup = self.found.iter().any(|f| same_point(&f.interference, &c.interference, self.problem.p_max()));
            if !dup {
                self.found.push(c);
            }
        }
    }
}

fn same_point(a: &[f64], b: &[f64], p_max: f64) -> bool {
    a.iter()
        .zip(b)
        .all(|(x, y)| (x - y).abs() <= DEDUP_TOLERANCE * x.abs().max(y.abs()) + 1e-15 * p_max)
}

/// Full KKT check of a completed chain; recovers the multipliers run by run.
fn verify_runs(problem: &KktProblem, nodes: &[KktNode]) -> Option<KktCandidate> {
    let s = problem.top_state();
    let mut interference = vec![0.0; s + 1];
    for n in nodes {
        for value in &mut interference[n.l..=n.u] {
            *value = n.min;
        }
    }
    interference[0] = problem.p_max();
    interference[s] = 0.0;
    if interference.windows(2).any(|w| w[1] > w[0]) {
        return None;
    }

    // lambda[k] for k = 1..=s; index 0 unused. Zero at every boundary between runs.
    let mut lambda = vec![0.0; s + 2];
    let mut max_residual: f64 = 0.0;
    for n in nodes {
        let x = interference[n.l];
        let mut scale = 1.0;
        if n.l == 0 {
            if n.u == s {
                return None;
            }
            for k in (1..=n.u).rev() {
                lambda[k] = lambda[k + 1] - problem.run_derivative(k, k, x);
                let (a, b) = problem.run_terms(k, k, x);
                scale += a.abs() + b.abs();
            }
        } else {
            // Forward from lambda_l = 0 through every variable of the run.
            for k in n.l..=n.u.min(s - 1) {
                let (a, b) = problem.run_terms(k, k, x);
                scale += a.abs() + b.abs();
                if k < n.u {
                    lambda[k + 1] = lambda[k] + (a - b);
                }
            }
            if n.u < s {
                let (push, pull) = problem.run_terms(n.l, n.u, x);
                let residual = (push - pull).abs() / (1.0 + push.abs() + pull.abs());
                if residual > RESIDUAL_TOLERANCE {
                    return None;
                }
                max_residual = max_residual.max(residual);
            }
        }
        for lam in &mut lambda[n.l.max(1)..=n.u.min(s)] {
            if lam.abs() < MULTIPLIER_CLIP * scale {
                *lam = 0.0;
            }
            if *lam < -MULTIPLIER_REJECT * scale {
                return None;
            }
        }
    }
    let powers: Vec<f64> = interference.windows(2).map(|w| w[0] - w[1]).collect();
    Some(KktCandidate {
        rate: problem.rate(&interference),
        interference,
        powers,
        multipliers: lambda[1..=s].to_vec(),
        runs: nodes.iter().map(|n| (n.l, n.u)).collect(),
        max_residual,
    })
}

fn initial_nodes(problem: &KktProblem) -> Vec<KktNode> {
    let s = problem.top_state();
    let p = problem.p_max();
    (0..=s)
        .map(|i| {
            let (min, max, determined) = match i {
                0 => (p, p, true),
                _ if i == s => (0.0, 0.0, true),
                _ => (0.0, p, false),
            };
            KktNode {
                l: i,
                u: i,
                min,
                max,
                determined,
            }
        })
        .collect()
}

/// Every KKT point of the allocation problem, sorted by interference vector.
pub fn solve_kkt(gains: &GainProfile, profile: &StateProfile, options: KktOptions) -> Result<Vec<KktCandidate>> {
    let problem = KktProblem::new(gains, profile)?;
    Ok(solve_problem(&problem, options))
}

pub(crate) fn solve_problem(problem: &KktProblem, options: KktOptions) -> Vec<KktCandidate> {
    let seed = match options.order {
        PickOrder::Random(seed) => seed,
        _ => 0,
    };
    let mut search = Search {
        problem,
        tol: 1e-12 * problem.p_max(),
        order: options.order,
        rng: ChaCha8Rng::seed_from_u64(seed),
        found: Vec::new(),
    };
    search.recurse(initial_nodes(problem));
    let mut found = search.found;
    found.sort_by(|a, b| {
        a.interference
            .iter()
            .zip(&b.interference)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    found
}

/// The KKT point with the highest rate.
pub fn optimize(gains: &GainProfile, profile: &StateProfile, options: KktOptions) -> Result<KktCandidate> {
    let candidates = solve_kkt(gains, profile, options)?;
    best_of(candidates)
}

pub(crate) fn best_of(candidates: Vec<KktCandidate>) -> Result<KktCandidate> {
    best_candidate(&candidates)
}

/// Highest-rate entry of a candidate set.
pub fn best_candidate(candidates: &[KktCandidate]) -> Result<KktCandidate> {
    candidates
        .iter()
        .reduce(|best, c| if c.rate > best.rate { c } else { best })
        .cloned()
        .ok_or_else(|| Error::Verification("no point satisfies the KKT conditions".into()))
}

/// Central-difference cross-check of the stationarity equations. For every interior
/// `k`, the numeric derivative `d` of `-sum_i Delta_i R_i` in `I_k` must match the
/// analytic one, and `d + lambda_k - lambda_{k+1}` must vanish. Returns the largest
/// mismatch relative to `1 + |push| + |pull|`, the size of the two cancelling terms
/// of `F_k`; near an optimum `F_k` itself is close to zero.
pub fn finite_difference_check(gains: &GainProfile, profile: &StateProfile, candidate: &KktCandidate) -> Result<f64> {
    let problem = KktProblem::new(gains, profile)?;
    let s = problem.top_state();
    if candidate.interference.len() != s + 1 || candidate.multipliers.len() != s {
        return Err(Error::DimensionMismatch("candidate does not match the problem size".into()));
    }
    let objective = |i: &[f64]| -problem.rate(i) / problem.block_len as f64;
    let mut worst: f64 = 0.0;
    for k in 1..s {
        let x = candidate.interference[k];
        // Curvature of the terms lives on the scale 1 / h, so the step follows it.
        let step = 1e-6 * (x.abs() + 1.0 / problem.gain(k + 1));
        let mut up = candidate.interference.clone();
        let mut down = candidate.interference.clone();
        up[k] = x + step;
        down[k] = x - step;
        let numeric = (objective(&up) - objective(&down)) / (2.0 * step);
        let (push, pull) = problem.run_terms(k, k, x);
        let analytic = push - pull;
        let lagrangian = numeric + candidate.multipliers[k - 1] - candidate.multipliers[k];
        let scale = 1.0 + push.abs() + pull.abs();
        worst = worst.max((numeric - analytic).abs() / scale).max(lagrangian.abs() / scale);
    }
    Ok(worst)
}
