//! Linear code constructions used by the key-agreement protocol: combinations that
//! hide nothing from an eavesdropper's erasure pattern, reconciliation combinations,
//! and key extraction by basis completion.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::gf::{complete_basis, stack_rank, Elem, FieldMatrix, GaloisField};

/// Retry budget for randomized designs before giving up.
pub const DESIGN_ATTEMPTS: usize = 16;

/// `n` packets of which the eavesdropper holds `n_eve`; asks for `n - n_eve`
/// combinations independent of whatever she holds.
#[derive(Debug, Clone)]
pub struct SecureCombinationSpec {
    field: Arc<GaloisField>,
    n: usize,
    n_eve: usize,
}

impl SecureCombinationSpec {
    pub fn new(field: &Arc<GaloisField>, n: usize, n_eve: usize) -> Result<Self> {
        if n_eve > n {
            return Err(Error::InvalidParameter(format!(
                "eavesdropper count {n_eve} exceeds packet count {n}"
            )));
        }
        Ok(Self {
            field: Arc::clone(field),
            n,
            n_eve,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_eve(&self) -> usize {
        self.n_eve
    }

    pub fn q(&self) -> u32 {
        self.field.order()
    }

    pub fn field(&self) -> &Arc<GaloisField> {
        &self.field
    }

    /// Number of secure combinations, `n - n_eve`.
    pub fn secure_rows(&self) -> usize {
        self.n - self.n_eve
    }

    /// Whether the Vandermonde construction is available (`q >= n + 1`).
    pub fn supports_mds(&self) -> bool {
        self.field.order() as usize > self.n
    }
}

/// Vandermonde generator of an `[n, n - n_eve]` Reed-Solomon code on the points
/// `1..=n`. Any `n - n_eve` of its columns are independent, so the rows stay
/// independent of every set of `n_eve` packets.
pub fn mds_secure_generator(spec: &SecureCombinationSpec) -> Result<FieldMatrix> {
    if !spec.supports_mds() {
        return Err(Error::FieldTooSmall {
            q: spec.q(),
            n: spec.n,
        });
    }
    let f = &spec.field;
    let points: Vec<Elem> = (1..=spec.n as u64).map(|i| f.from_integer(i)).collect();
    Ok(FieldMatrix::from_fn(f, spec.secure_rows(), spec.n, |i, j| f.pow(points[j], i as u64)))
}

/// Uniformly random `(n - n_eve) x n` matrix. Secure against a given erasure
/// pattern only with probability `1 - O(1/q)`; check with [`is_secure_against`].
pub fn random_secure_generator<R: Rng + ?Sized>(spec: &SecureCombinationSpec, rng: &mut R) -> FieldMatrix {
    FieldMatrix::random(&spec.field, spec.secure_rows(), spec.n, rng)
}

/// Dimension shared by the row spaces of `a` and `b`: `rank a + rank b - rank [a; b]`.
/// Times `L log q` this is the mutual information between `a X` and `b X` for uniform `X`.
pub fn shared_dimension(a: &FieldMatrix, b: &FieldMatrix) -> Result<usize> {
    let joint = stack_rank(a, b)?;
    Ok(a.rank() + b.rank() - joint)
}

/// True when the rows of `generator` reveal nothing beyond the packets at `eve_cols`,
/// i.e. `generator` keeps its full rank after deleting those columns.
pub fn is_secure_against(generator: &FieldMatrix, eve_cols: &[usize]) -> bool {
    let mut seen = vec![false; generator.cols()];
    for &c in eve_cols {
        seen[c] = true;
    }
    let hidden: Vec<usize> = (0..generator.cols()).filter(|&c| !seen[c]).collect();
    generator.select_cols(&hidden).rank() == generator.rows()
}

/// Public combinations of `total` packets letting every terminal fill in the packets
/// it is missing.
#[derive(Debug, Clone)]
pub struct ReconciliationPlan {
    total: usize,
    received_sets: Vec<Vec<usize>>,
    combinations: FieldMatrix,
}

impl ReconciliationPlan {
    pub fn total(&self) -> usize {
        self.total
    }

    pub fn received_sets(&self) -> &[Vec<usize>] {
        &self.received_sets
    }

    pub fn combinations(&self) -> &FieldMatrix {
        &self.combinations
    }

    /// Packet indices terminal `terminal` does not hold.
    pub fn missing(&self, terminal: usize) -> Vec<usize> {
        missing(&self.received_sets[terminal], self.total)
    }

    /// Rank certificate: received unit rows stacked on the combinations span everything.
    pub fn certifies(&self, terminal: usize) -> bool {
        let held = FieldMatrix::unit_rows(self.combinations.field(), self.total, &self.received_sets[terminal]);
        stack_rank(&held, &self.combinations).is_ok_and(|r| r == self.total)
    }
}

fn missing(held: &[usize], total: usize) -> Vec<usize> {
    let mut have = vec![false; total];
    for &j in held {
        have[j] = true;
    }
    (0..total).filter(|&j| !have[j]).collect()
}

/// Designs `total - min_i |received_i|` random combinations (entries drawn from the
/// nonzero elements) and keeps the first draw that every terminal can decode with.
///
/// The terminal holding the fewest packets is missing exactly as many as there are
/// combinations, so its check also certifies full row rank.
pub fn design_reconciliation<R: Rng + ?Sized>(
    field: &Arc<GaloisField>,
    received_sets: &[Vec<usize>],
    total: usize,
    rng: &mut R,
) -> Result<ReconciliationPlan> {
    if received_sets.is_empty() {
        return Err(Error::InvalidParameter("no terminals to reconcile".into()));
    }
    let mut sets = Vec::with_capacity(received_sets.len());
    for s in received_sets {
        let mut s = s.clone();
        s.sort_unstable();
        s.dedup();
        if let Some(&bad) = s.iter().find(|&&j| j >= total) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                range: format!("[0, {total})"),
            });
        }
        sets.push(s);
    }
    let key_len = sets.iter().map(Vec::len).min().unwrap_or(0);
    let rows = total - key_len;
    let missing_sets: Vec<Vec<usize>> = sets.iter().map(|s| missing(s, total)).collect();
    let q = field.order();

    for _ in 0..DESIGN_ATTEMPTS {
        let data = (0..rows * total).map(|_| rng.random_range(1..q) as Elem).collect();
        let combinations = FieldMatrix::from_elems(field, rows, total, data);
        let decodable = missing_sets
            .iter()
            .all(|m| combinations.select_cols(m).rank() == m.len());
        if decodable {
            return Ok(ReconciliationPlan {
                total,
                received_sets: sets,
                combinations,
            });
        }
    }
    Err(Error::ReconciliationFailed {
        attempts: DESIGN_ATTEMPTS,
    })
}

/// Key coefficients complete `a_z` to a basis; key packets are those coefficients
/// applied to `y_packets`. The completion is independent of `a_z`, so the key
/// leaks nothing through `a_z * y_packets`.
pub fn extract_key(a_z: &FieldMatrix, y_packets: &FieldMatrix) -> Result<(FieldMatrix, FieldMatrix)> {
    if a_z.cols() != y_packets.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} reconciliation columns for {} packets",
            a_z.cols(),
            y_packets.rows()
        )));
    }
    let key_coeffs = complete_basis(a_z)?;
    let key_packets = key_coeffs.mul(y_packets)?;
    Ok((key_coeffs, key_packets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf::next_prime;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gf(q: u32) -> Arc<GaloisField> {
        GaloisField::shared(q).unwrap()
    }

    fn all_subsets(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
        (0u32..1 << n)
            .filter(move |m| m.count_ones() as usize == k)
            .map(move |m| (0..n).filter(|&i| m >> i & 1 == 1).collect())
    }

    #[test]
    fn mds_edges() {
        let f = gf(7);
        let full = mds_secure_generator(&SecureCombinationSpec::new(&f, 5, 0).unwrap()).unwrap();
        assert_eq!(full.rank(), 5);
        let none = mds_secure_generator(&SecureCombinationSpec::new(&f, 5, 5).unwrap()).unwrap();
        assert_eq!(none.rows(), 0);
        assert!(matches!(
            mds_secure_generator(&SecureCombinationSpec::new(&f, 7, 1).unwrap()),
            Err(Error::FieldTooSmall { q: 7, n: 7 })
        ));
        assert!(SecureCombinationSpec::new(&f, 2, 3).is_err());
    }

    #[test]
    fn mds_n3_ne1_gf4() {
        let f = gf(4);
        let a = mds_secure_generator(&SecureCombinationSpec::new(&f, 3, 1).unwrap()).unwrap();
        assert_eq!((a.rows(), a.cols()), (2, 3));
        for i in 0..3 {
            let e = FieldMatrix::unit_rows(&f, 3, &[i]);
            assert_eq!(stack_rank(&a, &e).unwrap(), 3);
        }
    }

    #[test]
    fn mds_exhaustive_small() {
        for n in 1..=6 {
            let f = gf(next_prime(n as u32 + 1));
            for n_eve in 0..=n {
                let a = mds_secure_generator(&SecureCombinationSpec::new(&f, n, n_eve).unwrap()).unwrap();
                for sel in all_subsets(n, n_eve) {
                    let e = FieldMatrix::unit_rows(&f, n, &sel);
                    assert_eq!(stack_rank(&a, &e).unwrap(), n, "n={n} n_eve={n_eve} sel={sel:?}");
                    assert!(is_secure_against(&a, &sel));
                    assert_eq!(shared_dimension(&a, &e).unwrap(), 0);
                }
            }
        }
    }

    #[test]
    fn random_generator_large_field_rarely_fails() {
        let f = gf(1 << 16);
        let spec = SecureCombinationSpec::new(&f, 10, 4).unwrap();
        let mut failures = 0;
        for seed in 0..1000 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_secure_generator(&spec, &mut rng);
            let mut cols: Vec<usize> = (0..10).collect();
            rand::seq::SliceRandom::shuffle(cols.as_mut_slice(), &mut rng);
            if !is_secure_against(&a, &cols[..4]) {
                failures += 1;
            }
        }
        assert!(failures <= 10, "{failures} failures");
    }

    #[test]
    fn random_generator_binary_field_fails_sometimes() {
        let f = gf(2);
        let spec = SecureCombinationSpec::new(&f, 4, 2).unwrap();
        let mut failures = 0;
        for seed in 0..200 {
            let a = random_secure_generator(&spec, &mut ChaCha8Rng::seed_from_u64(seed));
            assert_eq!((a.rows(), a.cols()), (2, 4));
            if all_subsets(4, 2).any(|sel| !is_secure_against(&a, &sel)) {
                failures += 1;
            }
        }
        assert!(failures > 0);
        let empty = random_secure_generator(&SecureCombinationSpec::new(&f, 4, 4).unwrap(), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(empty.rows(), 0);
    }

    #[test]
    fn secure_check_agrees_with_stack_rank() {
        let f = gf(3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let a = FieldMatrix::random(&f, 2, 4, &mut rng);
            if a.rank() < 2 {
                continue;
            }
            for sel in all_subsets(4, 2) {
                let e = FieldMatrix::unit_rows(&f, 4, &sel);
                assert_eq!(is_secure_against(&a, &sel), stack_rank(&a, &e).unwrap() == 4);
            }
        }
    }

    #[test]
    fn reconciliation_trivial_cases() {
        let f = gf(2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let plan = design_reconciliation(&f, &[vec![0, 1, 2]], 3, &mut rng).unwrap();
        assert_eq!(plan.combinations().rows(), 0);
        let plan = design_reconciliation(&f, &[vec![0], vec![1]], 2, &mut rng).unwrap();
        assert_eq!(plan.combinations(), &FieldMatrix::from_rows(&f, &[vec![1, 1]]).unwrap());
    }

    #[test]
    fn reconciliation_random_sets() {
        let f = gf(256);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let sets: Vec<Vec<usize>> = (0..3)
                .map(|_| (0..8).filter(|_| rng.random_bool(0.6)).collect())
                .collect();
            let plan = design_reconciliation(&f, &sets, 8, &mut rng).unwrap();
            let l = sets.iter().map(Vec::len).min().unwrap();
            assert_eq!(plan.combinations().rows(), 8 - l);
            for t in 0..3 {
                assert!(plan.certifies(t));
            }
        }
    }

    #[test]
    fn reconciliation_rejects_bad_indices() {
        let f = gf(16);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(design_reconciliation(&f, &[vec![5]], 3, &mut rng).is_err());
        assert!(design_reconciliation(&f, &[], 3, &mut rng).is_err());
    }

    #[test]
    fn reconciliation_gf2_pathology_reported() {
        // Two missing packets at q = 2 force identical all-ones rows.
        let f = gf(2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = design_reconciliation(&f, &[vec![0], vec![1], vec![2]], 3, &mut rng).unwrap_err();
        assert_eq!(err, Error::ReconciliationFailed { attempts: DESIGN_ATTEMPTS });
    }

    #[test]
    fn key_extraction() {
        let f = gf(256);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let y = FieldMatrix::random(&f, 4, 3, &mut rng);

        let (coeffs, key) = extract_key(&FieldMatrix::zeros(&f, 0, 4), &y).unwrap();
        assert_eq!(coeffs, FieldMatrix::identity(&f, 4));
        assert_eq!(key, y);

        let a_z = FieldMatrix::random(&f, 4, 4, &mut rng);
        if a_z.rank() == 4 {
            let (coeffs, key) = extract_key(&a_z, &y).unwrap();
            assert_eq!((coeffs.rows(), key.rows()), (0, 0));
        }

        let a_z = FieldMatrix::random(&f, 2, 4, &mut rng);
        let (coeffs, key) = extract_key(&a_z, &y).unwrap();
        assert_eq!(stack_rank(&coeffs, &a_z).unwrap(), 4);
        assert_eq!(coeffs.rank() + a_z.rank() - stack_rank(&coeffs, &a_z).unwrap(), 0);
        assert_eq!(key, coeffs.mul(&y).unwrap());

        let dependent = FieldMatrix::from_rows(&f, &[vec![1, 2, 3, 4], vec![1, 2, 3, 4]]).unwrap();
        assert!(extract_key(&dependent, &y).is_err());
    }
}
