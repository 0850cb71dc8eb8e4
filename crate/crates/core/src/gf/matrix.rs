use std::fmt;
use std::sync::Arc;

use rand::Rng;

use super::{Elem, GaloisField};
use crate::error::{Error, Result};

/// Dense row-major matrix over a finite field.
#[derive(Clone)]
pub struct FieldMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Elem>,
    field: Arc<GaloisField>,
}

impl PartialEq for FieldMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && *self.field == *other.field
            && self.data == other.data
    }
}

impl Eq for FieldMatrix {}

impl fmt::Debug for FieldMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "FieldMatrix {}x{} over GF({})", self.rows, self.cols, self.field.order())?;
        for r in 0..self.rows.min(16) {
            writeln!(f, "  {:?}", &self.row(r)[..self.cols.min(16)])?;
        }
        Ok(())
    }
}

fn same_field(a: &Arc<GaloisField>, b: &Arc<GaloisField>) -> Result<()> {
    if Arc::ptr_eq(a, b) || **a == **b {
        Ok(())
    } else {
        Err(Error::FieldMismatch {
            left: a.order(),
            right: b.order(),
        })
    }
}

impl FieldMatrix {
    pub fn zeros(field: &Arc<GaloisField>, rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0; rows * cols],
            field: Arc::clone(field),
        }
    }

    pub fn identity(field: &Arc<GaloisField>, n: usize) -> Self {
        let mut m = Self::zeros(field, n, n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    /// Builds a matrix from row-major raw values, checking each against the field order.
    pub fn from_vec(field: &Arc<GaloisField>, rows: usize, cols: usize, data: Vec<u32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        let data = data
            .into_iter()
            .map(|v| field.check(v))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            rows,
            cols,
            data,
            field: Arc::clone(field),
        })
    }

    pub fn from_rows(field: &Arc<GaloisField>, rows: &[Vec<u32>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Self::from_vec(field, rows.len(), cols, rows.concat())
    }

    pub(crate) fn from_elems(field: &Arc<GaloisField>, rows: usize, cols: usize, data: Vec<Elem>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self {
            rows,
            cols,
            data,
            field: Arc::clone(field),
        }
    }

    pub fn from_fn(
        field: &Arc<GaloisField>,
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> Elem,
    ) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::from_elems(field, rows, cols, data)
    }

    /// Uniformly random entries.
    pub fn random<R: Rng + ?Sized>(field: &Arc<GaloisField>, rows: usize, cols: usize, rng: &mut R) -> Self {
        let q = field.order();
        let data = (0..rows * cols).map(|_| rng.random_range(0..q) as Elem).collect();
        Self::from_elems(field, rows, cols, data)
    }

    /// Rows are the unit vectors `e_j` for each `j` in `indices`.
    pub fn unit_rows(field: &Arc<GaloisField>, cols: usize, indices: &[usize]) -> Self {
        let mut m = Self::zeros(field, indices.len(), cols);
        for (r, &j) in indices.iter().enumerate() {
            m.data[r * cols + j] = 1;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn field(&self) -> &Arc<GaloisField> {
        &self.field
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn get(&self, r: usize, c: usize) -> Elem {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Elem) {
        debug_assert!((v as u32) < self.field.order());
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[Elem] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [Elem] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[Elem] {
        &self.data
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(&self.field, self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn mul(&self, rhs: &Self) -> Result<Self> {
        same_field(&self.field, &rhs.field)?;
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let f = &*self.field;
        let mut out = vec![0; self.rows * rhs.cols];
        // Prepare rhs rows once as (index, log) lists.
        let prepared: Vec<_> = (0..rhs.rows).map(|k| SparseRow::new(f, rhs.row(k))).collect();
        for i in 0..self.rows {
            let dst = &mut out[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a != 0 {
                    f.axpy_sparse(dst, a, &prepared[k].idx, &prepared[k].logs);
                }
            }
        }
        Ok(Self::from_elems(&self.field, self.rows, rhs.cols, out))
    }

    /// Vertical concatenation `[self; other]`.
    pub fn vstack(&self, other: &Self) -> Result<Self> {
        same_field(&self.field, &other.field)?;
        if self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "stacking {} columns on {} columns",
                self.cols, other.cols
            )));
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(Self::from_elems(&self.field, self.rows + other.rows, self.cols, data))
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &r in indices {
            data.extend_from_slice(self.row(r));
        }
        Self::from_elems(&self.field, indices.len(), self.cols, data)
    }

    pub fn select_cols(&self, indices: &[usize]) -> Self {
        Self::from_fn(&self.field, self.rows, indices.len(), |i, j| self.get(i, indices[j]))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |f, a, b| f.add(a, b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |f, a, b| f.sub(a, b))
    }

    fn zip_with(&self, other: &Self, op: impl Fn(&GaloisField, Elem, Elem) -> Elem) -> Result<Self> {
        same_field(&self.field, &other.field)?;
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let f = &*self.field;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| op(f, a, b)).collect();
        Ok(Self::from_elems(&self.field, self.rows, self.cols, data))
    }

    /// Row rank by exact elimination.
    pub fn rank(&self) -> usize {
        let mut order: Vec<usize> = (0..self.rows).collect();
        // Sparse rows first keeps the basis sparse, which makes later reductions cheap.
        order.sort_by_key(|&r| self.row(r).iter().filter(|&&v| v != 0).count());
        let mut ech = Echelon::new(&self.field, self.cols, self.cols);
        for r in order {
            if ech.rank() == self.cols {
                break;
            }
            ech.insert(self.row(r).to_vec()).ok();
        }
        ech.rank()
    }

    /// Basis (as rows) of the right kernel `{x : self * x = 0}`.
    pub fn nullspace(&self) -> Self {
        let mut ech = Echelon::new(&self.field, self.cols, self.cols);
        for r in 0..self.rows {
            ech.insert(self.row(r).to_vec()).ok();
        }
        let f = &*self.field;
        let mut is_pivot = vec![false; self.cols];
        for &p in &ech.pivots {
            is_pivot[p] = true;
        }
        let free: Vec<usize> = (0..self.cols).filter(|&c| !is_pivot[c]).collect();
        let mut out = Self::zeros(&self.field, free.len(), self.cols);
        for (k, &fc) in free.iter().enumerate() {
            let v = out.row_mut(k);
            v[fc] = 1;
            for b in (0..ech.rank()).rev() {
                let row = &ech.rows[b];
                let mut acc = row[fc];
                for later in b + 1..ech.rank() {
                    let p = ech.pivots[later];
                    acc = f.add(acc, f.mul(row[p], v[p]));
                }
                v[ech.pivots[b]] = f.neg(acc);
            }
        }
        out
    }

    /// Some `X` with `self * X = rhs`, or `None` when the system is inconsistent.
    pub fn solve(&self, rhs: &Self) -> Result<Option<Self>> {
        Ok(self.solve_with_rank(rhs)?.map(|(x, _)| x))
    }

    /// The unique `X` with `self * X = rhs`; `None` if inconsistent or underdetermined.
    pub fn solve_unique(&self, rhs: &Self) -> Result<Option<Self>> {
        Ok(self
            .solve_with_rank(rhs)?
            .and_then(|(x, rank)| (rank == self.cols).then_some(x)))
    }

    fn solve_with_rank(&self, rhs: &Self) -> Result<Option<(Self, usize)>> {
        same_field(&self.field, &rhs.field)?;
        if self.rows != rhs.rows {
            return Err(Error::DimensionMismatch(format!(
                "{} equations but {} right-hand rows",
                self.rows, rhs.rows
            )));
        }
        let (n, t) = (self.cols, rhs.cols);
        let mut ech = Echelon::new(&self.field, n + t, n);
        for r in 0..self.rows {
            let mut row = Vec::with_capacity(n + t);
            row.extend_from_slice(self.row(r));
            row.extend_from_slice(rhs.row(r));
            if let Err(rem) = ech.insert(row) {
                if rem[n..].iter().any(|&v| v != 0) {
                    return Ok(None);
                }
            }
        }
        let f = &*self.field;
        let mut x = Self::zeros(&self.field, n, t);
        // Row b is zero at the pivots of earlier rows, so walking backwards each
        // pivot variable depends only on ones already fixed; free variables are 0.
        for b in (0..ech.rank()).rev() {
            let row = &ech.rows[b];
            let mut acc = row[n..].to_vec();
            for k in b + 1..ech.rank() {
                let c = row[ech.pivots[k]];
                if c != 0 {
                    let pk = ech.pivots[k];
                    for (a, &v) in acc.iter_mut().zip(x.row(pk)) {
                        *a = f.sub(*a, f.mul(c, v));
                    }
                }
            }
            x.row_mut(ech.pivots[b]).copy_from_slice(&acc);
        }
        Ok(Some((x, ech.rank())))
    }

    /// Inverse of a square matrix, `None` if singular.
    pub fn inverse(&self) -> Result<Option<Self>> {
        if self.rows != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "inverse of non-square {}x{}",
                self.rows, self.cols
            )));
        }
        if self.rank() < self.rows {
            return Ok(None);
        }
        self.solve(&Self::identity(&self.field, self.rows))
    }

    /// Column indices of a pivot set for the rows in their given order, or an error
    /// if some row is dependent on the earlier ones.
    fn independent_pivots(&self) -> Result<Vec<usize>> {
        let mut ech = Echelon::new(&self.field, self.cols, self.cols);
        for r in 0..self.rows {
            ech.insert(self.row(r).to_vec()).ok();
        }
        if ech.rank() < self.rows {
            return Err(Error::NotFullRowRank {
                rank: ech.rank(),
                rows: self.rows,
            });
        }
        Ok(ech.pivots)
    }
}

/// Rank of the vertical stack `[a; b]`.
pub fn stack_rank(a: &FieldMatrix, b: &FieldMatrix) -> Result<usize> {
    Ok(a.vstack(b)?.rank())
}

/// Coefficients `c` with `c * basis = target`, or `None` when `target` is outside the row span.
pub fn solve_in_rowspan(basis: &FieldMatrix, target: &[Elem]) -> Result<Option<Vec<Elem>>> {
    if basis.cols != target.len() {
        return Err(Error::DimensionMismatch(format!(
            "target of length {} against {} columns",
            target.len(),
            basis.cols
        )));
    }
    let rhs = FieldMatrix::from_elems(&basis.field, target.len(), 1, target.to_vec());
    Ok(basis.transpose().solve(&rhs)?.map(|c| c.data))
}

/// Rows completing `a_z` to a basis of the whole space.
///
/// The completion takes unit vectors at the columns left without a pivot after
/// row-reducing `a_z`, so `[result; a_z]` is square and invertible.
pub fn complete_basis(a_z: &FieldMatrix) -> Result<FieldMatrix> {
    if a_z.rows > a_z.cols {
        return Err(Error::NotFullRowRank {
            rank: a_z.rank(),
            rows: a_z.rows,
        });
    }
    let pivots = a_z.independent_pivots()?;
    let mut is_pivot = vec![false; a_z.cols];
    for p in pivots {
        is_pivot[p] = true;
    }
    let free: Vec<usize> = (0..a_z.cols).filter(|&c| !is_pivot[c]).collect();
    Ok(FieldMatrix::unit_rows(&a_z.field, a_z.cols, &free))
}

struct SparseRow {
    idx: Vec<u32>,
    logs: Vec<u32>,
}

impl SparseRow {
    fn new(f: &GaloisField, row: &[Elem]) -> Self {
        let mut idx = Vec::new();
        let mut logs = Vec::new();
        for (j, &v) in row.iter().enumerate() {
            if v != 0 {
                idx.push(j as u32);
                logs.push(f.log_of(v));
            }
        }
        Self { idx, logs }
    }
}

/// Incremental semi-echelon basis. Every stored row is zero at the pivots of the rows
/// inserted before it and has a 1 at its own pivot. Pivots are restricted to the first
/// `key_width` columns, so trailing columns can carry right-hand sides.
pub(crate) struct Echelon<'a> {
    field: &'a GaloisField,
    key_width: usize,
    rows: Vec<Vec<Elem>>,
    sparse: Vec<SparseRow>,
    pivots: Vec<usize>,
}

impl<'a> Echelon<'a> {
    pub(crate) fn new(field: &'a GaloisField, width: usize, key_width: usize) -> Self {
        debug_assert!(key_width <= width);
        Self {
            field,
            key_width,
            rows: Vec::new(),
            sparse: Vec::new(),
            pivots: Vec::new(),
        }
    }

    pub(crate) fn rank(&self) -> usize {
        self.rows.len()
    }

    fn reduce(&self, row: &mut [Elem]) {
        let f = self.field;
        for (b, &p) in self.pivots.iter().enumerate() {
            let c = row[p];
            if c != 0 {
                let sr = &self.sparse[b];
                f.axpy_sparse(row, f.neg(c), &sr.idx, &sr.logs);
            }
        }
    }

    /// Reduces `row` and keeps it if it adds a new pivot. On failure returns the
    /// reduced remainder, whose key part is zero.
    pub(crate) fn insert(&mut self, mut row: Vec<Elem>) -> std::result::Result<usize, Vec<Elem>> {
        self.reduce(&mut row);
        let Some(p) = row[..self.key_width].iter().position(|&v| v != 0) else {
            return Err(row);
        };
        let f = self.field;
        let inv = f.inv(row[p]).expect("pivot is nonzero");
        if inv != 1 {
            for v in row.iter_mut() {
                *v = f.mul(*v, inv);
            }
        }
        self.sparse.push(SparseRow::new(f, &row));
        self.rows.push(row);
        self.pivots.push(p);
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gf(q: u32) -> Arc<GaloisField> {
        GaloisField::new(q).unwrap()
    }

    /// Determinant by cofactor expansion; exponential but independent of elimination.
    fn det(f: &GaloisField, m: &[Vec<Elem>]) -> Elem {
        let n = m.len();
        if n == 0 {
            return 1;
        }
        let mut acc = 0;
        for j in 0..n {
            let minor: Vec<Vec<Elem>> = m[1..]
                .iter()
                .map(|r| r.iter().enumerate().filter(|&(c, _)| c != j).map(|(_, &v)| v).collect())
                .collect();
            let term = f.mul(m[0][j], det(f, &minor));
            acc = if j % 2 == 0 { f.add(acc, term) } else { f.sub(acc, term) };
        }
        acc
    }

    fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
        (0u32..1 << n)
            .filter(|m| m.count_ones() as usize == k)
            .map(|m| (0..n).filter(|&i| m >> i & 1 == 1).collect())
            .collect()
    }

    /// Largest k with a nonzero k x k minor.
    fn minor_rank(m: &FieldMatrix) -> usize {
        let f = m.field();
        for k in (1..=m.rows().min(m.cols())).rev() {
            for rs in subsets(m.rows(), k) {
                for cs in subsets(m.cols(), k) {
                    let sub: Vec<Vec<Elem>> =
                        rs.iter().map(|&r| cs.iter().map(|&c| m.get(r, c)).collect()).collect();
                    if det(f, &sub) != 0 {
                        return k;
                    }
                }
            }
        }
        0
    }

    #[test]
    fn rank_trivial() {
        assert_eq!(FieldMatrix::zeros(&gf(2), 3, 3).rank(), 0);
        assert_eq!(FieldMatrix::identity(&gf(5), 4).rank(), 4);
    }

    #[test]
    fn rank_matches_minor_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for q in [2, 3, 7, 9, 16] {
            let f = gf(q);
            for _ in 0..40 {
                let (r, c) = (rng.random_range(1..=5), rng.random_range(1..=5));
                let mut m = FieldMatrix::random(&f, r, c, &mut rng);
                // Make low rank likely by duplicating a scaled row.
                if r > 1 && rng.random_bool(0.5) {
                    let s = rng.random_range(0..q) as Elem;
                    for j in 0..c {
                        let v = f.mul(s, m.get(0, j));
                        m.set(r - 1, j, v);
                    }
                }
                assert_eq!(m.rank(), minor_rank(&m), "{m:?}");
                assert_eq!(m.rank(), m.transpose().rank());
            }
        }
    }

    #[test]
    fn rank_5x3_gf7() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = FieldMatrix::random(&gf(7), 5, 3, &mut rng);
        assert_eq!(m.rank(), minor_rank(&m));
    }

    #[test]
    fn stack_rank_examples() {
        let f = gf(2);
        let a = FieldMatrix::from_rows(&f, &[vec![1, 0]]).unwrap();
        let b = FieldMatrix::from_rows(&f, &[vec![0, 1]]).unwrap();
        assert_eq!(stack_rank(&a, &b).unwrap(), 2);
        let c = FieldMatrix::from_rows(&f, &[vec![1, 1]]).unwrap();
        assert_eq!(stack_rank(&c, &c).unwrap(), 1);

        let f16 = gf(16);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = FieldMatrix::random(&f16, 2, 4, &mut rng);
        let b = FieldMatrix::random(&f16, 3, 4, &mut rng);
        let mut rows: Vec<Vec<u32>> = Vec::new();
        for m in [&a, &b] {
            for r in 0..m.rows() {
                rows.push(m.row(r).iter().map(|&v| v as u32).collect());
            }
        }
        let concat = FieldMatrix::from_rows(&f16, &rows).unwrap();
        assert_eq!(stack_rank(&a, &b).unwrap(), minor_rank(&concat));
    }

    #[test]
    fn stack_rank_rejects_mismatch() {
        let f = gf(2);
        let a = FieldMatrix::zeros(&f, 1, 2);
        let b = FieldMatrix::zeros(&f, 1, 3);
        assert!(matches!(stack_rank(&a, &b), Err(Error::DimensionMismatch(_))));
        let c = FieldMatrix::zeros(&gf(3), 1, 2);
        assert!(matches!(stack_rank(&a, &c), Err(Error::FieldMismatch { .. })));
    }

    #[test]
    fn rowspan_identity_and_unsolvable() {
        let f = gf(5);
        let id = FieldMatrix::identity(&f, 3);
        assert_eq!(solve_in_rowspan(&id, &[0, 1, 0]).unwrap(), Some(vec![0, 1, 0]));
        let r1 = FieldMatrix::from_rows(&f, &[vec![1, 2, 3], vec![2, 4, 1]]).unwrap();
        // Second row is twice the first mod 5.
        assert_eq!(r1.rank(), 1);
        assert_eq!(solve_in_rowspan(&r1, &[0, 0, 1]).unwrap(), None);
        assert!(solve_in_rowspan(&r1, &[1, 2]).is_err());
    }

    #[test]
    fn rowspan_random_gf256() {
        let f = gf(256);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let basis = FieldMatrix::random(&f, 4, 9, &mut rng);
            let c = FieldMatrix::random(&f, 1, 4, &mut rng);
            let target = c.mul(&basis).unwrap();
            let got = solve_in_rowspan(&basis, target.row(0)).unwrap().unwrap();
            let back = FieldMatrix::from_elems(&f, 1, 4, got).mul(&basis).unwrap();
            assert_eq!(back, target);
        }
    }

    #[test]
    fn complete_basis_edges() {
        let f = gf(7);
        let empty = FieldMatrix::zeros(&f, 0, 4);
        assert_eq!(complete_basis(&empty).unwrap(), FieldMatrix::identity(&f, 4));
        let id = FieldMatrix::identity(&f, 4);
        assert_eq!(complete_basis(&id).unwrap().rows(), 0);
        let dep = FieldMatrix::from_rows(&f, &[vec![1, 1], vec![2, 2]]).unwrap();
        assert!(matches!(complete_basis(&dep), Err(Error::NotFullRowRank { rank: 1, rows: 2 })));
    }

    #[test]
    fn complete_basis_gf2_exhaustive() {
        let f = gf(2);
        let a_z = FieldMatrix::from_rows(&f, &[vec![1, 1, 0], vec![0, 1, 1]]).unwrap();
        let valid: Vec<u32> = (1u32..8)
            .filter(|&v| {
                let cand = FieldMatrix::from_rows(&f, &[vec![v & 1, v >> 1 & 1, v >> 2 & 1]]).unwrap();
                stack_rank(&cand, &a_z).unwrap() == 3
            })
            .collect();
        let a_k = complete_basis(&a_z).unwrap();
        assert_eq!(a_k.rows(), 1);
        let code = a_k.row(0).iter().enumerate().map(|(j, &b)| (b as u32) << j).sum::<u32>();
        assert!(valid.contains(&code));
        assert_eq!(stack_rank(&a_k, &a_z).unwrap(), 3);
    }

    #[test]
    fn nullspace_and_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for q in [2, 3, 4, 251, 65536] {
            let f = gf(q);
            for _ in 0..20 {
                let m = FieldMatrix::random(&f, 3, 6, &mut rng);
                let ns = m.nullspace();
                assert_eq!(ns.rows() + m.rank(), 6);
                assert!(m.mul(&ns.transpose()).unwrap().is_zero());
                assert_eq!(ns.rank(), ns.rows());

                let sq = FieldMatrix::random(&f, 4, 4, &mut rng);
                match sq.inverse().unwrap() {
                    Some(inv) => assert_eq!(sq.mul(&inv).unwrap(), FieldMatrix::identity(&f, 4)),
                    None => assert!(sq.rank() < 4),
                }
            }
        }
    }

    #[test]
    fn solve_consistency() {
        let f = gf(13);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..30 {
            let a = FieldMatrix::random(&f, 5, 3, &mut rng);
            let x = FieldMatrix::random(&f, 3, 2, &mut rng);
            let b = a.mul(&x).unwrap();
            let got = a.solve(&b).unwrap().unwrap();
            assert_eq!(a.mul(&got).unwrap(), b);
        }
        let wide = FieldMatrix::random(&f, 2, 4, &mut rng);
        let rhs = FieldMatrix::random(&f, 2, 1, &mut rng);
        assert_eq!(wide.solve_unique(&rhs).unwrap(), None);
        // Overdetermined inconsistent system.
        let a = FieldMatrix::from_rows(&f, &[vec![1], vec![1]]).unwrap();
        let b = FieldMatrix::from_rows(&f, &[vec![1], vec![2]]).unwrap();
        assert_eq!(a.solve(&b).unwrap(), None);
    }
}
