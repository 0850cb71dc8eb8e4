//! Group key agreement over a symmetric packet-erasure broadcast channel.
//!
//! Alice broadcasts `n` uniformly random packets. Each of the `m - 1` receivers and
//! the eavesdropper independently lose each packet. Public discussion then runs in
//! three steps: per receiver-subset secure combinations (`y`-packets), reconciliation
//! combinations (`z`-packets) that let every receiver recover all `y`-packets, and
//! key coefficients completing the reconciliation rows to a basis.
//!
//! Receivers are numbered from 0 in code; receiver `t` is bit `t` of a [`SubsetMask`].

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf::{Elem, FieldMatrix, GaloisField};
use crate::rng::{stream, Phase};
use crate::secure_coding::{
    design_reconciliation, extract_key, is_secure_against, mds_secure_generator, random_secure_generator,
    SecureCombinationSpec, DESIGN_ATTEMPTS,
};

/// Largest receiver count representable in a [`SubsetMask`].
pub const MAX_RECEIVERS: usize = 64;

/// A set of receivers as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct SubsetMask(pub u64);

impl SubsetMask {
    pub fn from_receivers(receivers: impl IntoIterator<Item = usize>) -> Self {
        Self(receivers.into_iter().fold(0, |m, t| m | 1 << t))
    }

    pub fn contains(self, receiver: usize) -> bool {
        self.0 >> receiver & 1 == 1
    }

    pub fn insert(&mut self, receiver: usize) {
        self.0 |= 1 << receiver;
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn receivers(self) -> impl Iterator<Item = usize> {
        (0..MAX_RECEIVERS).filter(move |&t| self.contains(t))
    }
}

impl fmt::Debug for SubsetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.receivers()).finish()
    }
}

/// How many secure combinations Alice draws from each commonly received block.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecureCountPolicy {
    /// Packets of the block that the eavesdropper missed. Gives exactly zero leakage.
    #[default]
    Realized,
    /// `floor(delta_eve * block_size)`, the expected number she missed. Can leak
    /// whenever she happens to hear more than average.
    Expected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErasureConfig {
    /// Honest terminals including Alice (`m`).
    pub terminals: usize,
    /// Broadcast packets (`n`).
    pub broadcasts: usize,
    /// Symbols per packet (`L`).
    pub packet_len: usize,
    pub field_order: u32,
    /// Erasure probability towards each honest receiver.
    pub delta: f64,
    /// Erasure probability towards the eavesdropper.
    pub delta_eve: f64,
    pub seed: u64,
    #[serde(default)]
    pub policy: SecureCountPolicy,
}

impl ErasureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.terminals < 2 || self.terminals - 1 > MAX_RECEIVERS {
            return Err(Error::InvalidParameter(format!(
                "terminal count must be in [2, {}], got {}",
                MAX_RECEIVERS + 1,
                self.terminals
            )));
        }
        if self.broadcasts == 0 || self.packet_len == 0 {
            return Err(Error::InvalidParameter("broadcast count and packet length must be positive".into()));
        }
        check_probability("delta", self.delta)?;
        check_probability("delta_eve", self.delta_eve)?;
        if crate::gf::prime_power(self.field_order).is_none() || self.field_order > crate::gf::MAX_ORDER {
            return Err(Error::UnsupportedFieldOrder(self.field_order));
        }
        Ok(())
    }

    pub fn receivers(&self) -> usize {
        self.terminals - 1
    }
}

pub(crate) fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {p} is not a probability")))
    }
}

/// Who received which broadcast packet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReceptionTable {
    receivers: usize,
    received_by: Vec<SubsetMask>,
    eve: Vec<bool>,
}

impl ReceptionTable {
    pub fn new(receivers: usize, received_by: Vec<SubsetMask>, eve: Vec<bool>) -> Result<Self> {
        if received_by.len() != eve.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} honest reception entries, {} eavesdropper entries",
                received_by.len(),
                eve.len()
            )));
        }
        if receivers > MAX_RECEIVERS || received_by.iter().any(|m| receivers < 64 && m.0 >> receivers != 0) {
            return Err(Error::InvalidParameter("reception mask names an unknown receiver".into()));
        }
        Ok(Self {
            receivers,
            received_by,
            eve,
        })
    }

    pub fn broadcasts(&self) -> usize {
        self.eve.len()
    }

    pub fn receivers(&self) -> usize {
        self.receivers
    }

    pub fn received_by(&self, packet: usize) -> SubsetMask {
        self.received_by[packet]
    }

    pub fn eve_received(&self, packet: usize) -> bool {
        self.eve[packet]
    }

    /// Index set `I_t` for each receiver.
    pub fn honest_sets(&self) -> Vec<Vec<usize>> {
        (0..self.receivers)
            .map(|t| (0..self.broadcasts()).filter(|&j| self.received_by[j].contains(t)).collect())
            .collect()
    }

    pub fn eve_set(&self) -> Vec<usize> {
        (0..self.broadcasts()).filter(|&j| self.eve[j]).collect()
    }

    /// Packets heard by at least one honest receiver.
    pub fn commonly_heard(&self) -> Vec<usize> {
        (0..self.broadcasts()).filter(|&j| !self.received_by[j].is_empty()).collect()
    }
}

/// Draws i.i.d. erasures for every (packet, receiver) pair and for the eavesdropper.
pub fn simulate_channel(config: &ErasureConfig) -> Result<ReceptionTable> {
    config.validate()?;
    let mut rng = stream(config.seed, Phase::Channel, 0);
    let receivers = config.receivers();
    let mut received_by = Vec::with_capacity(config.broadcasts);
    let mut eve = Vec::with_capacity(config.broadcasts);
    for _ in 0..config.broadcasts {
        let mut mask = SubsetMask::default();
        for t in 0..receivers {
            if rng.random::<f64>() >= config.delta {
                mask.insert(t);
            }
        }
        received_by.push(mask);
        eve.push(rng.random::<f64>() >= config.delta_eve);
    }
    ReceptionTable::new(receivers, received_by, eve)
}

/// Splits the commonly heard packets by the exact set of receivers that heard them.
pub fn partition_commonly_received(honest_sets: &[Vec<usize>], n: usize) -> Result<BTreeMap<SubsetMask, Vec<usize>>> {
    if honest_sets.len() > MAX_RECEIVERS {
        return Err(Error::InvalidParameter(format!("at most {MAX_RECEIVERS} receivers")));
    }
    let mut masks = vec![SubsetMask::default(); n];
    for (t, set) in honest_sets.iter().enumerate() {
        for &j in set {
            if j >= n {
                return Err(Error::IndexOutOfRange {
                    index: j,
                    range: format!("[0, {n})"),
                });
            }
            masks[j].insert(t);
        }
    }
    let mut out: BTreeMap<SubsetMask, Vec<usize>> = BTreeMap::new();
    for (j, mask) in masks.into_iter().enumerate() {
        if !mask.is_empty() {
            out.entry(mask).or_default().push(j);
        }
    }
    Ok(out)
}

/// How a block's secure combinations were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorPath {
    Mds,
    RandomVerified { attempts: usize },
}

/// Secure combinations drawn from the packets heard by exactly `subset`.
#[derive(Debug, Clone)]
pub struct SubsetBlock {
    pub subset: SubsetMask,
    /// Broadcast indices in the block, increasing.
    pub packets: Vec<usize>,
    /// `k x packets.len()` coefficients, published.
    pub coeffs: FieldMatrix,
    /// Position of the block's first `y`-packet in the global `y` ordering.
    pub offset: usize,
    pub path: GeneratorPath,
}

/// Everything the eavesdropper observes.
#[derive(Debug, Clone)]
pub struct EveView {
    /// Broadcast indices she received.
    pub received: Vec<usize>,
    /// Reception feedback is public, so she knows every block and its coefficients.
    pub blocks: Vec<SubsetBlock>,
    /// Reconciliation coefficients (`(h - l) x h`).
    pub reconciliation: FieldMatrix,
    /// Reconciliation packet contents (`(h - l) x L`).
    pub z_packets: FieldMatrix,
    /// Key coefficients (`l x h`).
    pub key_coeffs: FieldMatrix,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolCounts {
    pub broadcasts: usize,
    /// Packets heard by some honest receiver (`n*`).
    pub commonly_heard: usize,
    /// Total secure combinations (`h`).
    pub secure_total: usize,
    /// Secure combinations each receiver can form itself (`h_t`).
    pub per_receiver: Vec<usize>,
    /// Key packets (`l`).
    pub key_len: usize,
    pub eve_received: usize,
}

#[derive(Debug, Clone)]
pub struct ProtocolOutcome {
    field: Arc<GaloisField>,
    packet_len: usize,
    pub counts: ProtocolCounts,
    /// Alice's key first, then each receiver's, each `l x L`.
    pub keys: Vec<FieldMatrix>,
    pub eve_view: EveView,
    /// Exact leakage from the `y`-space rank identity.
    pub leakage_bits: f64,
}

impl ProtocolOutcome {
    pub fn field(&self) -> &Arc<GaloisField> {
        &self.field
    }

    pub fn packet_len(&self) -> usize {
        self.packet_len
    }

    pub fn keys_agree(&self) -> bool {
        self.keys.windows(2).all(|w| w[0] == w[1])
    }

    pub fn key_bits(&self) -> f64 {
        self.counts.key_len as f64 * self.packet_len as f64 * self.field.bits_per_symbol()
    }

    /// Key bits per channel use (one packet per use).
    pub fn key_rate(&self) -> f64 {
        self.key_bits() / self.counts.broadcasts as f64
    }

    /// `h x n*` map from commonly heard packets to `y`-packets, with the column order
    /// of [`ReceptionTable::commonly_heard`].
    pub fn y_map(&self) -> (FieldMatrix, Vec<usize>) {
        let mut heard: Vec<usize> = self.eve_view.blocks.iter().flat_map(|b| b.packets.iter().copied()).collect();
        heard.sort_unstable();
        let mut position = BTreeMap::new();
        for (c, &j) in heard.iter().enumerate() {
            position.insert(j, c);
        }
        let mut a = FieldMatrix::zeros(&self.field, self.counts.secure_total, heard.len());
        for b in &self.eve_view.blocks {
            for r in 0..b.coeffs.rows() {
                for (c, &j) in b.packets.iter().enumerate() {
                    a.set(b.offset + r, position[&j], b.coeffs.get(r, c));
                }
            }
        }
        (a, heard)
    }
}

/// Per-run settings of the public-discussion part.
#[derive(Debug, Clone, Copy)]
pub struct DiscussionSettings {
    pub delta_eve: f64,
    pub policy: SecureCountPolicy,
    pub seed: u64,
}

/// Simulates the channel, draws packets and runs the full protocol.
pub fn run_protocol(config: &ErasureConfig) -> Result<ProtocolOutcome> {
    config.validate()?;
    let field = GaloisField::shared(config.field_order)?;
    let table = simulate_channel(config)?;
    let mut rng = stream(config.seed, Phase::Packets, 0);
    let x = FieldMatrix::random(&field, config.broadcasts, config.packet_len, &mut rng);
    run_on_receptions(
        &field,
        &table,
        &x,
        DiscussionSettings {
            delta_eve: config.delta_eve,
            policy: config.policy,
            seed: config.seed,
        },
    )
}

fn secure_count(policy: SecureCountPolicy, block_size: usize, eve_in_block: usize, delta_eve: f64) -> usize {
    match policy {
        SecureCountPolicy::Realized => block_size - eve_in_block,
        // The small offset keeps products like 0.29 * 100 from flooring to 28.
        SecureCountPolicy::Expected => ((delta_eve * block_size as f64 + 1e-9).floor() as usize).min(block_size),
    }
}

/// Runs public discussion on a given reception pattern and broadcast contents
/// (`x_packets` is `n x L`).
pub fn run_on_receptions(
    field: &Arc<GaloisField>,
    table: &ReceptionTable,
    x_packets: &FieldMatrix,
    settings: DiscussionSettings,
) -> Result<ProtocolOutcome> {
    let n = table.broadcasts();
    if x_packets.rows() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} packets for {n} broadcasts",
            x_packets.rows()
        )));
    }
    check_probability("delta_eve", settings.delta_eve)?;
    let packet_len = x_packets.cols();
    let receivers = table.receivers();
    let honest = table.honest_sets();
    let partition = partition_commonly_received(&honest, n)?;

    // Secure combinations per block.
    let mut blocks = Vec::with_capacity(partition.len());
    let mut y_blocks = Vec::with_capacity(partition.len());
    let mut offset = 0;
    for (&subset, packets) in &partition {
        let eve_local: Vec<usize> = (0..packets.len()).filter(|&c| table.eve_received(packets[c])).collect();
        let k = secure_count(settings.policy, packets.len(), eve_local.len(), settings.delta_eve);
        let spec = SecureCombinationSpec::new(field, packets.len(), packets.len() - k)?;
        let (coeffs, path) = if spec.supports_mds() {
            (mds_secure_generator(&spec)?, GeneratorPath::Mds)
        } else {
            let mut rng = stream(settings.seed, Phase::Generator, subset.0);
            let mut found = None;
            for attempt in 1..=DESIGN_ATTEMPTS {
                let g = random_secure_generator(&spec, &mut rng);
                let ok = match settings.policy {
                    SecureCountPolicy::Realized => is_secure_against(&g, &eve_local),
                    SecureCountPolicy::Expected => g.rank() == k,
                };
                if ok {
                    found = Some((g, GeneratorPath::RandomVerified { attempts: attempt }));
                    break;
                }
            }
            found.ok_or(Error::GeneratorFailed {
                subset: subset.0,
                attempts: DESIGN_ATTEMPTS,
            })?
        };
        y_blocks.push(coeffs.mul(&x_packets.select_rows(packets))?);
        blocks.push(SubsetBlock {
            subset,
            packets: packets.clone(),
            coeffs,
            offset,
            path,
        });
        offset += k;
    }
    let h = offset;
    let y = stack_all(field, &y_blocks, packet_len);

    // Which y-packets each receiver can compute from what it heard.
    let held: Vec<Vec<usize>> = (0..receivers)
        .map(|t| {
            blocks
                .iter()
                .filter(|b| b.subset.contains(t))
                .flat_map(|b| b.offset..b.offset + b.coeffs.rows())
                .collect()
        })
        .collect();

    let mut rng = stream(settings.seed, Phase::Reconciliation, 0);
    let plan = design_reconciliation(field, &held, h, &mut rng)?;
    let b = plan.combinations().clone();
    let z = b.mul(&y)?;
    let (key_coeffs, alice_key) = extract_key(&b, &y)?;
    let key_len = key_coeffs.rows();

    let mut keys = Vec::with_capacity(receivers + 1);
    keys.push(alice_key);
    for t in 0..receivers {
        let y_t = receiver_reconstruct(field, t, &blocks, x_packets, table, &b, &z, &held[t], h)?;
        keys.push(key_coeffs.mul(&y_t)?);
    }

    let leak_dims = key_len + reconciliation_rank_with_hidden_constraints(field, &blocks, table, &b, h) - h;
    let leakage_bits = leak_dims as f64 * packet_len as f64 * field.bits_per_symbol();

    let counts = ProtocolCounts {
        broadcasts: n,
        commonly_heard: partition.values().map(Vec::len).sum(),
        secure_total: h,
        per_receiver: held.iter().map(Vec::len).collect(),
        key_len,
        eve_received: table.eve_set().len(),
    };
    Ok(ProtocolOutcome {
        field: Arc::clone(field),
        packet_len,
        counts,
        keys,
        eve_view: EveView {
            received: table.eve_set(),
            blocks,
            reconciliation: b,
            z_packets: z,
            key_coeffs,
        },
        leakage_bits,
    })
}

fn stack_all(field: &Arc<GaloisField>, parts: &[FieldMatrix], cols: usize) -> FieldMatrix {
    let rows = parts.iter().map(FieldMatrix::rows).sum();
    let mut data: Vec<Elem> = Vec::with_capacity(rows * cols);
    for p in parts {
        data.extend_from_slice(p.as_slice());
    }
    FieldMatrix::from_elems(field, rows, cols, data)
}

/// What receiver `t` does: recompute its own `y`-packets from the packets it heard,
/// then solve the reconciliation equations for the rest.
#[allow(clippy::too_many_arguments)]
fn receiver_reconstruct(
    field: &Arc<GaloisField>,
    t: usize,
    blocks: &[SubsetBlock],
    x_packets: &FieldMatrix,
    table: &ReceptionTable,
    b: &FieldMatrix,
    z: &FieldMatrix,
    held: &[usize],
    h: usize,
) -> Result<FieldMatrix> {
    let packet_len = x_packets.cols();
    let mut y_t = FieldMatrix::zeros(field, h, packet_len);
    for blk in blocks.iter().filter(|blk| blk.subset.contains(t)) {
        debug_assert!(blk.packets.iter().all(|&j| table.received_by(j).contains(t)));
        let own = blk.coeffs.mul(&x_packets.select_rows(&blk.packets))?;
        for r in 0..own.rows() {
            y_t.row_mut(blk.offset + r).copy_from_slice(own.row(r));
        }
    }
    let mut is_held = vec![false; h];
    for &j in held {
        is_held[j] = true;
    }
    let unknown: Vec<usize> = (0..h).filter(|&j| !is_held[j]).collect();
    if unknown.is_empty() {
        return Ok(y_t);
    }
    // b[:, unknown] * y_unknown = z - b[:, held] * y_held
    let known_part = b.select_cols(held).mul(&y_t.select_rows(held))?;
    let rhs = z.sub(&known_part)?;
    let solved = b
        .select_cols(&unknown)
        .solve_unique(&rhs)?
        .ok_or_else(|| Error::Verification(format!("receiver {t} cannot decode the reconciliation packets")))?;
    for (r, &j) in unknown.iter().enumerate() {
        y_t.row_mut(j).copy_from_slice(solved.row(r));
    }
    Ok(y_t)
}

/// `rank [B; N]`, where `N` spans the linear constraints that the eavesdropper's
/// packets leave on the `y`-packets. `N` is block diagonal: for each block, the left
/// kernel of its coefficients restricted to the packets she missed.
fn reconciliation_rank_with_hidden_constraints(
    field: &Arc<GaloisField>,
    blocks: &[SubsetBlock],
    table: &ReceptionTable,
    b: &FieldMatrix,
    h: usize,
) -> usize {
    let mut constraint_rows: Vec<Vec<Elem>> = Vec::new();
    for blk in blocks {
        let eve_count = blk.packets.iter().filter(|&&j| table.eve_received(j)).count();
        if blk.path == GeneratorPath::Mds && blk.packets.len() - eve_count >= blk.coeffs.rows() {
            // Any `rows` columns of a Vandermonde generator are independent: empty kernel.
            continue;
        }
        let hidden: Vec<usize> = (0..blk.packets.len())
            .filter(|&c| !table.eve_received(blk.packets[c]))
            .collect();
        let left_kernel = blk.coeffs.select_cols(&hidden).transpose().nullspace();
        for r in 0..left_kernel.rows() {
            let mut row = vec![0; h];
            row[blk.offset..blk.offset + blk.coeffs.rows()].copy_from_slice(left_kernel.row(r));
            constraint_rows.push(row);
        }
    }
    if constraint_rows.is_empty() {
        // Full row rank was certified when the reconciliation was designed.
        return b.rows();
    }
    let n_rows = constraint_rows.len();
    let data = constraint_rows.concat();
    let constraints = FieldMatrix::from_elems(field, n_rows, h, data);
    constraints.vstack(b).map(|m| m.rank()).unwrap_or(0)
}

/// Leakage straight from the definition: the key map and the eavesdropper's map are
/// both written over the commonly heard broadcast packets, her map being her own
/// packets stacked on the reconciliation rows composed with the `y` map.
/// Returns `(rank K + rank Eve - rank joint) * L * log2 q`.
pub fn leakage_bits(outcome: &ProtocolOutcome) -> Result<f64> {
    let (y_map, heard) = outcome.y_map();
    let field = outcome.field();
    let mut position = vec![usize::MAX; outcome.counts.broadcasts];
    for (c, &j) in heard.iter().enumerate() {
        position[j] = c;
    }
    let eve_cols: Vec<usize> = outcome
        .eve_view
        .received
        .iter()
        .filter(|&&j| position[j] != usize::MAX)
        .map(|&j| position[j])
        .collect();
    let eve_select = FieldMatrix::unit_rows(field, heard.len(), &eve_cols);
    let key_map = outcome.eve_view.key_coeffs.mul(&y_map)?;
    let public_map = outcome.eve_view.reconciliation.mul(&y_map)?;
    let eve_map = eve_select.vstack(&public_map)?;
    let joint = key_map.vstack(&eve_map)?;
    let dims = key_map.rank() + eve_map.rank() - joint.rank();
    Ok(dims as f64 * outcome.packet_len() as f64 * field.bits_per_symbol())
}

/// Secret-key capacity of the erasure broadcast channel, bits per channel use:
/// `(1 - delta) * delta_eve * L * log2 q`. Independent of the terminal count.
pub fn erasure_capacity(delta: f64, delta_eve: f64, packet_len: usize, q: u32) -> f64 {
    (1.0 - delta) * delta_eve * packet_len as f64 * (q as f64).log2()
}

/// Bound on `P(l/n <= mu - gamma)` for `m` terminals: `m exp(-gamma^2 n / (2 mu))`.
pub fn key_shortfall_bound(terminals: usize, broadcasts: usize, mu: f64, gamma: f64) -> f64 {
    (terminals as f64 * (-gamma * gamma * broadcasts as f64 / (2.0 * mu)).exp()).min(1.0)
}
