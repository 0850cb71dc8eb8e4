//! State-dependent deterministic broadcast channel with nested transfer matrices.
//!
//! In state `i` a receiver observes `F_i x` for `x` in `GF(q)^L`. The kernels are
//! nested, `ker F_s = {0} ⊂ ... ⊂ ker F_0 = GF(q)^L`, so the input splits into layers
//! `Pi_1..Pi_s` and layer `i` reaches exactly the receivers in state `>= i`.

use std::sync::Arc;

use rand::Rng;

use crate::erasure::{run_on_receptions, DiscussionSettings, ProtocolOutcome, ReceptionTable, SecureCountPolicy, SubsetMask};
use crate::gf::{stack_rank, Elem, FieldMatrix, GaloisField};
use crate::rng::{derive_seed, stream, Phase};
use crate::state::StateProfile;
use crate::{Error, Result};

/// Transfer matrices `F_0..F_s` of a nested deterministic channel.
#[derive(Debug, Clone)]
pub struct DetChannelFamily {
    field: Arc<GaloisField>,
    ranks: Vec<usize>,
    matrices: Vec<FieldMatrix>,
}

fn check_ranks(ranks: &[usize]) -> Result<usize> {
    let (Some(&first), Some(&last)) = (ranks.first(), ranks.last()) else {
        return Err(Error::InvalidRankSequence("empty".into()));
    };
    if ranks.len() < 2 {
        return Err(Error::InvalidRankSequence("need at least two states".into()));
    }
    if first != 0 {
        return Err(Error::InvalidRankSequence(format!("r_0 = {first}, expected 0")));
    }
    if last == 0 {
        return Err(Error::InvalidRankSequence("r_s must equal L >= 1".into()));
    }
    if ranks.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidRankSequence(format!("{ranks:?} is not non-decreasing")));
    }
    Ok(last)
}

/// `F_i` selecting the first `r_i` coordinates.
fn selector(field: &Arc<GaloisField>, len: usize, rank: usize) -> FieldMatrix {
    FieldMatrix::from_fn(field, len, len, |r, c| Elem::from(r == c && r < rank))
}

impl DetChannelFamily {
    /// Shift-matrix family: `F_i = diag(1, .., 1, 0, .., 0)` with `r_i` ones.
    pub fn shift(packet_len: usize, q: u32, ranks: &[usize]) -> Result<Self> {
        let field = GaloisField::shared(q)?;
        let last = check_ranks(ranks)?;
        if last != packet_len {
            return Err(Error::InvalidRankSequence(format!("r_s = {last}, expected L = {packet_len}")));
        }
        let matrices = ranks.iter().map(|&r| selector(&field, packet_len, r)).collect();
        Ok(Self {
            field,
            ranks: ranks.to_vec(),
            matrices,
        })
    }

    /// `F_i = T D_i T^-1` for a random invertible `T`, where `D_i` are the shift matrices.
    pub fn random_basis<R: Rng + ?Sized>(packet_len: usize, q: u32, ranks: &[usize], rng: &mut R) -> Result<Self> {
        let shift = Self::shift(packet_len, q, ranks)?;
        let field = shift.field.clone();
        let (t, t_inv) = loop {
            let t = FieldMatrix::random(&field, packet_len, packet_len, rng);
            if let Some(inv) = t.inverse()? {
                break (t, inv);
            }
        };
        let matrices = shift
            .matrices
            .iter()
            .map(|d| t.mul(d)?.mul(&t_inv))
            .collect::<Result<Vec<_>>>()?;
        let family = Self {
            field,
            ranks: ranks.to_vec(),
            matrices,
        };
        family.verify()?;
        Ok(family)
    }

    /// Family from explicit matrices; checked against the nesting invariants.
    pub fn from_matrices(matrices: Vec<FieldMatrix>) -> Result<Self> {
        let first = matrices
            .first()
            .ok_or_else(|| Error::InvalidRankSequence("no transfer matrices".into()))?;
        let field = first.field().clone();
        let len = first.cols();
        for f in &matrices {
            if f.rows() != len || f.cols() != len {
                return Err(Error::DimensionMismatch(format!("transfer matrix is {}x{}, expected {len}x{len}", f.rows(), f.cols())));
            }
        }
        let ranks: Vec<usize> = matrices.iter().map(FieldMatrix::rank).collect();
        check_ranks(&ranks)?;
        let family = Self { field, ranks, matrices };
        family.verify()?;
        Ok(family)
    }

    pub fn field(&self) -> &Arc<GaloisField> {
        &self.field
    }

    pub fn packet_len(&self) -> usize {
        self.matrices[0].cols()
    }

    pub fn top_state(&self) -> usize {
        self.ranks.len() - 1
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn matrix(&self, state: usize) -> &FieldMatrix {
        &self.matrices[state]
    }

    /// Checks `F_0 = 0`, `F_s = I`, kernel nesting and rank additivity of differences.
    pub fn verify(&self) -> Result<()> {
        let len = self.packet_len();
        let s = self.top_state();
        if !self.matrices[0].is_zero() {
            return Err(Error::Verification("F_0 is not zero".into()));
        }
        if self.matrices[s] != FieldMatrix::identity(&self.field, len) {
            return Err(Error::Verification("F_s is not the identity".into()));
        }
        for i in 1..=s {
            let (cur, prev) = (&self.matrices[i], &self.matrices[i - 1]);
            let r = cur.rank();
            if r != self.ranks[i] {
                return Err(Error::Verification(format!("rank F_{i} = {r}, recorded {}", self.ranks[i])));
            }
            // ker F_i ⊆ ker F_{i-1} iff the row space of F_{i-1} lies in that of F_i.
            if stack_rank(cur, prev)? != r {
                return Err(Error::Verification(format!("ker F_{i} is not inside ker F_{}", i - 1)));
            }
            let diff = cur.sub(prev)?.rank();
            if diff != r - self.ranks[i - 1] {
                return Err(Error::Verification(format!(
                    "rank(F_{i} - F_{}) = {diff}, expected {}",
                    i - 1,
                    r - self.ranks[i - 1]
                )));
            }
        }
        Ok(())
    }

    /// Output of a receiver in `state` for input `x`.
    pub fn observe(&self, state: usize, x: &[Elem]) -> Vec<Elem> {
        let f = &*self.field;
        let m = &self.matrices[state];
        (0..m.rows())
            .map(|r| m.row(r).iter().zip(x).fold(0, |acc, (&a, &b)| f.add(acc, f.mul(a, b))))
            .collect()
    }
}

/// Subspaces `Pi_1..Pi_s` with `Pi_i ⊕ ker F_i = ker F_{i-1}`.
#[derive(Debug, Clone)]
pub struct LayerDecomposition {
    /// Basis vectors of `Pi_i` as rows; index 0 is `Pi_1`.
    layers: Vec<FieldMatrix>,
    /// `L x L` matrix whose columns are the basis vectors of all layers in order.
    basis: FieldMatrix,
    offsets: Vec<usize>,
}

impl LayerDecomposition {
    pub fn layer(&self, i: usize) -> &FieldMatrix {
        &self.layers[i - 1]
    }

    pub fn dims(&self) -> Vec<usize> {
        self.layers.iter().map(FieldMatrix::rows).collect()
    }

    /// Input vector `sum_i coords_i * Pi_i`.
    pub fn compose(&self, coords: &[&[Elem]]) -> Vec<Elem> {
        let f = self.basis.field();
        let mut x = vec![0; self.basis.rows()];
        for (layer, c) in self.layers.iter().zip(coords) {
            for (r, &a) in c.iter().enumerate() {
                for (xv, &b) in x.iter_mut().zip(layer.row(r)) {
                    *xv = f.add(*xv, f.mul(a, b));
                }
            }
        }
        x
    }

    /// Recovers the coordinates of layers `1..=state` from a receiver's output.
    pub fn decode(&self, family: &DetChannelFamily, state: usize, output: &[Elem]) -> Result<Vec<Vec<Elem>>> {
        let field = family.field();
        let visible = self.offsets[state];
        // F_state applied to the visible basis vectors has full column rank.
        let cols: Vec<usize> = (0..visible).collect();
        let image = family.matrix(state).mul(&self.basis.select_cols(&cols))?;
        let rhs = FieldMatrix::from_fn(field, output.len(), 1, |r, _| output[r]);
        let sol = image
            .solve_unique(&rhs)?
            .ok_or_else(|| Error::Verification(format!("state {state} output does not determine its layers")))?;
        Ok((1..=state)
            .map(|i| (self.offsets[i - 1]..self.offsets[i]).map(|k| sol.get(k, 0)).collect())
            .collect())
    }

    /// Rank certificates: dimensions, and `Pi_i ⊕ .. ⊕ Pi_1 ⊕ ker F_i` spans the space for every `i`.
    pub fn verify(&self, family: &DetChannelFamily) -> Result<()> {
        let len = family.packet_len();
        let mut prefix = FieldMatrix::zeros(family.field(), 0, len);
        for i in 1..=family.top_state() {
            let layer = self.layer(i);
            let want = family.ranks[i] - family.ranks[i - 1];
            if layer.rows() != want {
                return Err(Error::Verification(format!("dim Pi_{i} = {}, expected {want}", layer.rows())));
            }
            prefix = prefix.vstack(layer)?;
            let kernel = family.matrix(i).nullspace();
            let total = prefix.rows() + kernel.rows();
            if total != len || stack_rank(&prefix, &kernel)? != len {
                return Err(Error::Verification(format!("prefix sum up to Pi_{i} with ker F_{i} is not direct and spanning")));
            }
        }
        Ok(())
    }
}

/// Builds the layers by completing a basis of `ker F_i` inside `ker F_{i-1}`.
pub fn decompose_layers(family: &DetChannelFamily) -> Result<LayerDecomposition> {
    let field = family.field();
    let len = family.packet_len();
    let mut layers = Vec::with_capacity(family.top_state());
    let mut outer = FieldMatrix::identity(field, len);
    for i in 1..=family.top_state() {
        let inner = family.matrix(i).nullspace();
        let mut span = inner.clone();
        let mut chosen = Vec::new();
        for r in 0..outer.rows() {
            let candidate = outer.select_rows(&[r]);
            let grown = span.vstack(&candidate)?;
            if grown.rank() > span.rows() {
                span = grown;
                chosen.push(r);
            }
        }
        layers.push(outer.select_rows(&chosen));
        outer = inner;
    }
    let mut offsets = vec![0];
    for l in &layers {
        offsets.push(offsets.last().unwrap() + l.rows());
    }
    let stacked = layers
        .iter()
        .try_fold(FieldMatrix::zeros(field, 0, len), |acc, l| acc.vstack(l))?;
    let decomposition = LayerDecomposition {
        layers,
        basis: stacked.transpose(),
        offsets,
    };
    decomposition.verify(family)?;
    Ok(decomposition)
}

fn check_profile(family: &DetChannelFamily, profile: &StateProfile) -> Result<()> {
    if profile.top_state() != family.top_state() {
        return Err(Error::InvalidDistribution(format!(
            "{} state probabilities for {} channel states",
            profile.deltas().len(),
            family.top_state() + 1
        )));
    }
    Ok(())
}

/// Key capacity in bits per channel use: `sum_i (r_i - r_{i-1}) theta_i (1 - theta_i) log2 q`.
pub fn det_capacity(family: &DetChannelFamily, profile: &StateProfile) -> Result<f64> {
    check_profile(family, profile)?;
    let bits = family.field.bits_per_symbol();
    Ok((1..=family.top_state())
        .map(|i| (family.ranks[i] - family.ranks[i - 1]) as f64 * profile.layer_weight(i) * bits)
        .sum())
}

/// Converse expression `sum_j rank(F_j - F_{j-1}) sum_{i<j} rho_i log2 q`, with
/// `rho_i = delta_i - kappa_i` and `kappa_i = 2 delta_i theta_i + delta_i^2`.
pub fn det_upper_bound(family: &DetChannelFamily, profile: &StateProfile) -> Result<f64> {
    check_profile(family, profile)?;
    let d = profile.deltas();
    let rho: Vec<f64> = (0..d.len())
        .map(|i| {
            let kappa = 2.0 * d[i] * profile.theta(i) + d[i] * d[i];
            d[i] - kappa
        })
        .collect();
    let bits = family.field.bits_per_symbol();
    let mut total = 0.0;
    for j in 1..=family.top_state() {
        let diff = family.matrices[j].sub(&family.matrices[j - 1])?.rank();
        total += diff as f64 * rho[..j].iter().sum::<f64>() * bits;
    }
    Ok(total)
}

/// Achievable rate of the layered scheme, `sum_i theta_i (1 - theta_i) dim Pi_i log2 q`.
pub fn layered_rate(layers: &LayerDecomposition, family: &DetChannelFamily, profile: &StateProfile) -> Result<f64> {
    check_profile(family, profile)?;
    let bits = family.field.bits_per_symbol();
    Ok(layers
        .dims()
        .iter()
        .enumerate()
        .map(|(k, &dim)| dim as f64 * profile.layer_weight(k + 1) * bits)
        .sum())
}

#[derive(Debug, Clone)]
pub struct LayeredConfig {
    pub terminals: usize,
    pub broadcasts: usize,
    pub seed: u64,
    pub policy: SecureCountPolicy,
}

/// Result of one layered run. Layers of dimension zero carry no protocol.
#[derive(Debug, Clone)]
pub struct LayeredOutcome {
    pub broadcasts: usize,
    /// `(layer index, outcome)` for every non-empty layer.
    pub layers: Vec<(usize, ProtocolOutcome)>,
    /// `states[t][r]`: state of honest receiver `r` at time `t`.
    pub states: Vec<Vec<usize>>,
    pub eve_states: Vec<usize>,
}

impl LayeredOutcome {
    pub fn keys_agree(&self) -> bool {
        self.layers.iter().all(|(_, o)| o.keys_agree())
    }

    pub fn key_bits(&self) -> f64 {
        self.layers.iter().map(|(_, o)| o.key_bits()).sum()
    }

    pub fn key_rate(&self) -> f64 {
        self.key_bits() / self.broadcasts as f64
    }

    /// Sum of the per-layer leakages.
    pub fn leakage_bits(&self) -> f64 {
        self.layers.iter().map(|(_, o)| o.leakage_bits).sum()
    }

    /// Fraction of (time, receiver) pairs that missed layer `i`.
    pub fn layer_erasure_rate(&self, i: usize) -> f64 {
        let total: usize = self.states.iter().map(Vec::len).sum();
        let missed = self.states.iter().flatten().filter(|&&s| s < i).count();
        missed as f64 / total as f64
    }
}

/// Draws one state per receiver and time, then runs the erasure protocol on each layer.
pub fn run_layered_protocol(
    family: &DetChannelFamily,
    layers: &LayerDecomposition,
    profile: &StateProfile,
    config: &LayeredConfig,
) -> Result<LayeredOutcome> {
    check_profile(family, profile)?;
    if config.broadcasts == 0 {
        return Err(Error::InvalidParameter("broadcast count must be positive".into()));
    }
    if config.terminals < 2 || config.terminals - 1 > crate::erasure::MAX_RECEIVERS {
        return Err(Error::InvalidParameter(format!("terminal count {} out of range", config.terminals)));
    }
    let receivers = config.terminals - 1;
    let n = config.broadcasts;
    let mut rng = stream(config.seed, Phase::States, 0);
    let mut states = Vec::with_capacity(n);
    let mut eve_states = Vec::with_capacity(n);
    for _ in 0..n {
        states.push((0..receivers).map(|_| profile.sample(rng.random())).collect::<Vec<_>>());
        eve_states.push(profile.sample(rng.random()));
    }

    let field = family.field();
    let mut outcomes = Vec::new();
    for (k, &dim) in layers.dims().iter().enumerate() {
        let i = k + 1;
        if dim == 0 {
            continue;
        }
        let received_by: Vec<SubsetMask> = states
            .iter()
            .map(|row| SubsetMask::from_receivers((0..receivers).filter(|&r| row[r] >= i)))
            .collect();
        let eve: Vec<bool> = eve_states.iter().map(|&s| s >= i).collect();
        let table = ReceptionTable::new(receivers, received_by, eve)?;
        let layer_seed = derive_seed(config.seed, i as u64);
        let mut packet_rng = stream(layer_seed, Phase::Packets, 0);
        let coords = FieldMatrix::random(field, n, dim, &mut packet_rng);
        let outcome = run_on_receptions(
            field,
            &table,
            &coords,
            DiscussionSettings {
                delta_eve: profile.theta(i),
                policy: config.policy,
                seed: layer_seed,
            },
        )?;
        outcomes.push((i, outcome));
    }
    Ok(LayeredOutcome {
        broadcasts: n,
        layers: outcomes,
        states,
        eve_states,
    })
}

/// Leakage of the concatenated key computed on the original channel inputs.
///
/// Variables are the `n L` input symbols in layer coordinates. The eavesdropper sees
/// `F_{S_E[t]} x[t]` at every time plus all public messages; the leakage is
/// `rank(K) + rank(V) - rank([K; V])` symbols. Dense, so intended for small `n`.
pub fn joint_leakage_bits(family: &DetChannelFamily, layers: &LayerDecomposition, outcome: &LayeredOutcome) -> Result<f64> {
    let field = family.field();
    let len = family.packet_len();
    let n = outcome.broadcasts;
    let width = n * len;
    let var = |t: usize, layer: usize, a: usize| t * len + layers.offsets[layer - 1] + a;

    let mut view_rows: Vec<Vec<Elem>> = Vec::new();
    for (t, &s) in outcome.eve_states.iter().enumerate() {
        let image = family.matrix(s).mul(&layers.basis)?;
        for r in 0..len {
            let mut row = vec![0; width];
            row[t * len..(t + 1) * len].copy_from_slice(image.row(r));
            if row.iter().any(|&v| v != 0) {
                view_rows.push(row);
            }
        }
    }
    let mut key_rows: Vec<Vec<Elem>> = Vec::new();
    for (i, o) in &outcome.layers {
        let (a, heard) = o.y_map();
        let dim = o.packet_len();
        let push = |coeffs: &FieldMatrix, dst: &mut Vec<Vec<Elem>>| -> Result<()> {
            if coeffs.rows() == 0 || heard.is_empty() {
                return Ok(());
            }
            let over_x = coeffs.mul(&a)?;
            for r in 0..over_x.rows() {
                for sym in 0..dim {
                    let mut row = vec![0; width];
                    for (c, &t) in heard.iter().enumerate() {
                        row[var(t, *i, sym)] = over_x.get(r, c);
                    }
                    dst.push(row);
                }
            }
            Ok(())
        };
        push(&o.eve_view.reconciliation, &mut view_rows)?;
        push(&o.eve_view.key_coeffs, &mut key_rows)?;
    }
    let to_matrix = |rows: Vec<Vec<Elem>>| FieldMatrix::from_elems(field, rows.len(), width, rows.concat());
    let key = to_matrix(key_rows);
    let view = to_matrix(view_rows);
    let symbols = key.rank() + view.rank() - stack_rank(&key, &view)?;
    Ok(symbols as f64 * field.bits_per_symbol())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn shift_family_examples() {
        let fam = DetChannelFamily::shift(3, 2, &[0, 1, 3]).unwrap();
        let f1 = fam.matrix(1);
        assert_eq!(f1, &FieldMatrix::from_rows(fam.field(), &[vec![1, 0, 0], vec![0, 0, 0], vec![0, 0, 0]]).unwrap());
        fam.verify().unwrap();
        let erasure = DetChannelFamily::shift(4, 5, &[0, 4]).unwrap();
        assert!(erasure.matrix(0).is_zero());
        assert_eq!(erasure.matrix(1), &FieldMatrix::identity(erasure.field(), 4));
    }

    #[test]
    fn invalid_rank_sequences() {
        for ranks in [&[][..], &[0], &[1, 3], &[0, 2, 1, 3], &[0, 2], &[0, 0]] {
            assert!(
                matches!(DetChannelFamily::shift(3, 2, ranks), Err(Error::InvalidRankSequence(_))),
                "{ranks:?}"
            );
        }
    }

    #[test]
    fn non_nested_matrices_rejected() {
        let f = GaloisField::shared(2).unwrap();
        let zero = FieldMatrix::zeros(&f, 2, 2);
        let e1 = FieldMatrix::from_rows(&f, &[vec![1, 0], vec![0, 0]]).unwrap();
        let e2 = FieldMatrix::from_rows(&f, &[vec![0, 0], vec![0, 1]]).unwrap();
        let id = FieldMatrix::identity(&f, 2);
        assert!(DetChannelFamily::from_matrices(vec![zero.clone(), e1.clone(), id.clone()]).is_ok());
        // Ranks 0,1,1,2 but ker e2 is not inside ker e1.
        assert!(matches!(
            DetChannelFamily::from_matrices(vec![zero, e1, e2, id]),
            Err(Error::Verification(_))
        ));
    }

    #[test]
    fn shift_layers_are_coordinate_blocks() {
        let fam = DetChannelFamily::shift(3, 2, &[0, 1, 3]).unwrap();
        let d = decompose_layers(&fam).unwrap();
        assert_eq!(d.layer(1), &FieldMatrix::unit_rows(fam.field(), 3, &[0]));
        assert_eq!(d.layer(2), &FieldMatrix::unit_rows(fam.field(), 3, &[1, 2]));
        let single = DetChannelFamily::shift(3, 2, &[0, 3]).unwrap();
        assert_eq!(decompose_layers(&single).unwrap().dims(), vec![3]);
    }

    #[test]
    fn general_families_decompose() {
        let mut r = rng(5);
        for (q, ranks) in [(2, vec![0, 1, 3, 3, 5]), (9, vec![0, 2, 2, 4]), (256, vec![0, 1, 2, 3, 4, 6])] {
            let len = *ranks.last().unwrap();
            let fam = DetChannelFamily::random_basis(len, q, &ranks, &mut r).unwrap();
            let d = decompose_layers(&fam).unwrap();
            assert_eq!(d.dims().iter().sum::<usize>(), len);
            d.verify(&fam).unwrap();
        }
    }

    #[test]
    fn outputs_decode_to_visible_layers() {
        let mut r = rng(8);
        let fam = DetChannelFamily::random_basis(5, 7, &[0, 2, 3, 5], &mut r).unwrap();
        let d = decompose_layers(&fam).unwrap();
        let coords: Vec<Vec<Elem>> = d.dims().iter().map(|&k| (0..k).map(|_| r.random_range(0..7)).collect()).collect();
        let refs: Vec<&[Elem]> = coords.iter().map(Vec::as_slice).collect();
        let x = d.compose(&refs);
        for state in 0..=3 {
            let got = d.decode(&fam, state, &fam.observe(state, &x)).unwrap();
            assert_eq!(got, coords[..state].to_vec());
        }
    }

    #[test]
    fn capacity_examples() {
        let erasure = DetChannelFamily::shift(1, 2, &[0, 1]).unwrap();
        let half = StateProfile::new(vec![0.5, 0.5]).unwrap();
        assert!((det_capacity(&erasure, &half).unwrap() - 0.25).abs() < 1e-15);
        let fam = DetChannelFamily::shift(3, 2, &[0, 1, 3]).unwrap();
        let thirds = StateProfile::uniform(3).unwrap();
        assert!((det_capacity(&fam, &thirds).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!(det_capacity(&fam, &half).is_err());
    }

    #[test]
    fn capacity_formulas_agree() {
        let mut r = rng(11);
        for _ in 0..20 {
            let s = r.random_range(1..5);
            let len = r.random_range(1..6);
            let mut ranks: Vec<usize> = (0..s - 1).map(|_| r.random_range(0..=len)).collect();
            ranks.sort_unstable();
            ranks.insert(0, 0);
            ranks.push(len);
            let fam = DetChannelFamily::random_basis(len, 16, &ranks, &mut r).unwrap();
            let d = decompose_layers(&fam).unwrap();
            let w: Vec<f64> = (0..=s).map(|_| r.random::<f64>()).collect();
            let total: f64 = w.iter().sum();
            let mut deltas: Vec<f64> = w.iter().map(|x| x / total).collect();
            let head: f64 = deltas[..s].iter().sum();
            deltas[s] = 1.0 - head;
            let p = StateProfile::new(deltas).unwrap();
            let c = det_capacity(&fam, &p).unwrap();
            assert!((det_upper_bound(&fam, &p).unwrap() - c).abs() < 1e-12);
            assert!((layered_rate(&d, &fam, &p).unwrap() - c).abs() < 1e-12);
        }
    }

    fn cfg(terminals: usize, broadcasts: usize, seed: u64) -> LayeredConfig {
        LayeredConfig {
            terminals,
            broadcasts,
            seed,
            policy: SecureCountPolicy::Realized,
        }
    }

    #[test]
    fn layered_run_agrees_and_does_not_leak() {
        let mut r = rng(3);
        let fam = DetChannelFamily::random_basis(3, 16, &[0, 1, 3], &mut r).unwrap();
        let d = decompose_layers(&fam).unwrap();
        let p = StateProfile::uniform(3).unwrap();
        for seed in 0..5 {
            let out = run_layered_protocol(&fam, &d, &p, &cfg(3, 40, seed)).unwrap();
            assert!(out.keys_agree());
            assert_eq!(out.leakage_bits(), 0.0);
            assert_eq!(joint_leakage_bits(&fam, &d, &out).unwrap(), 0.0);
            assert!(out.key_bits() > 0.0);
        }
    }

    #[test]
    fn joint_leakage_detects_expected_policy_leaks() {
        let fam = DetChannelFamily::shift(2, 2, &[0, 1, 2]).unwrap();
        let d = decompose_layers(&fam).unwrap();
        let p = StateProfile::uniform(3).unwrap();
        let mut leaked = false;
        for seed in 0..30 {
            let mut c = cfg(2, 24, seed);
            c.policy = SecureCountPolicy::Expected;
            let out = run_layered_protocol(&fam, &d, &p, &c).unwrap();
            let joint = joint_leakage_bits(&fam, &d, &out).unwrap();
            assert!((joint - out.leakage_bits()).abs() < 1e-12);
            leaked |= joint > 0.0;
        }
        assert!(leaked);
    }

    #[test]
    fn all_mass_on_top_state_gives_no_key() {
        let fam = DetChannelFamily::shift(2, 16, &[0, 1, 2]).unwrap();
        let d = decompose_layers(&fam).unwrap();
        let p = StateProfile::new(vec![0.0, 0.0, 1.0]).unwrap();
        let out = run_layered_protocol(&fam, &d, &p, &cfg(3, 50, 1)).unwrap();
        assert_eq!(out.key_bits(), 0.0);
        assert!(out.keys_agree());
    }

    #[test]
    fn single_layer_matches_erasure_protocol() {
        use crate::erasure::{run_protocol, ErasureConfig};
        let fam = DetChannelFamily::shift(2, 256, &[0, 2]).unwrap();
        let d = decompose_layers(&fam).unwrap();
        let p = StateProfile::new(vec![0.4, 0.6]).unwrap();
        let seeds = 0..6u64;
        let layered: f64 = seeds
            .clone()
            .map(|seed| run_layered_protocol(&fam, &d, &p, &cfg(3, 2000, seed)).unwrap().key_rate())
            .sum::<f64>();
        let reference: f64 = seeds
            .map(|seed| {
                run_protocol(&ErasureConfig {
                    terminals: 3,
                    broadcasts: 2000,
                    packet_len: 2,
                    field_order: 256,
                    delta: 0.4,
                    delta_eve: 0.4,
                    seed,
                    policy: SecureCountPolicy::Realized,
                })
                .unwrap()
                .key_rate()
            })
            .sum::<f64>();
        assert!((layered - reference).abs() < 0.05 * reference, "{layered} vs {reference}");
    }

    #[test]
    fn layer_marginals_match_thetas() {
        let fam = DetChannelFamily::shift(3, 16, &[0, 1, 2, 3]).unwrap();
        let d = decompose_layers(&fam).unwrap();
        let p = StateProfile::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let out = run_layered_protocol(&fam, &d, &p, &cfg(4, 3000, 2)).unwrap();
        for i in 1..=3 {
            assert!((out.layer_erasure_rate(i) - p.theta(i)).abs() < 0.02, "layer {i}");
        }
    }
}
