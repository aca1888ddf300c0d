//! Compressed sparse row matrices over `f64` and `Complex64`.

use std::fmt::Debug;
use std::io::{self, Write};
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Field operations shared by the real and complex matrix types.
pub trait Scalar:
    Copy
    + Default
    + Debug
    + PartialEq
    + Send
    + Sync
    + Add<Output = Self>
    + AddAssign
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    fn from_re(x: f64) -> Self;
    fn conj(self) -> Self;
    fn abs2(self) -> f64;
    fn re(self) -> f64;
    fn im(self) -> f64;
    fn finite(self) -> bool;
    fn inv(self) -> Self;
    fn to_complex(self) -> Complex64 {
        Complex64::new(self.re(), self.im())
    }
    /// Keeps the real part for real scalars.
    fn from_complex(z: Complex64) -> Self;
}

impl Scalar for f64 {
    fn from_re(x: f64) -> Self {
        x
    }
    fn from_complex(z: Complex64) -> Self {
        z.re
    }
    fn conj(self) -> Self {
        self
    }
    fn abs2(self) -> f64 {
        self * self
    }
    fn re(self) -> f64 {
        self
    }
    fn im(self) -> f64 {
        0.0
    }
    fn finite(self) -> bool {
        f64::is_finite(self)
    }
    fn inv(self) -> Self {
        1.0 / self
    }
}

impl Scalar for Complex64 {
    fn from_re(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn from_complex(z: Complex64) -> Self {
        z
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn abs2(self) -> f64 {
        self.norm_sqr()
    }
    fn re(self) -> f64 {
        self.re
    }
    fn im(self) -> f64 {
        self.im
    }
    fn finite(self) -> bool {
        Complex64::is_finite(self)
    }
    fn inv(self) -> Self {
        Complex64::inv(&self)
    }
}

pub type ComplexSparseMatrix = CsrMatrix<Complex64>;
pub type RealSparseMatrix = CsrMatrix<f64>;

/// CSR matrix with sorted, duplicate-free column indices in every row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

/// Row-wise sparsity pattern accumulated from index blocks.
#[derive(Debug, Clone)]
pub struct PatternBuilder {
    nrows: usize,
    ncols: usize,
    rows: Vec<Vec<usize>>,
}

impl PatternBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, rows: vec![Vec::new(); nrows] }
    }

    /// Adds the dense block `rows × cols`.
    pub fn add_block(&mut self, rows: &[usize], cols: &[usize]) {
        for &r in rows {
            self.rows[r].extend_from_slice(cols);
        }
    }

    pub fn add_entry(&mut self, r: usize, c: usize) {
        self.rows[r].push(c);
    }

    pub fn build<T: Scalar>(self) -> CsrMatrix<T> {
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        for mut row in self.rows {
            row.sort_unstable();
            row.dedup();
            debug_assert!(row.last().is_none_or(|&c| c < self.ncols));
            indices.extend_from_slice(&row);
            indptr.push(indices.len());
        }
        let values = vec![T::default(); indices.len()];
        CsrMatrix { nrows: self.nrows, ncols: self.ncols, indptr, indices, values }
    }
}

impl<T: Scalar> CsrMatrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, indptr: vec![0; nrows + 1], indices: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![T::from_re(1.0); n])
    }

    pub fn from_diagonal(d: &[T]) -> Self {
        let n = d.len();
        Self { nrows: n, ncols: n, indptr: (0..=n).collect(), indices: (0..n).collect(), values: d.to_vec() }
    }

    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed
    /// in input order.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut pb = PatternBuilder::new(nrows, ncols);
        for &(r, c, _) in triplets {
            pb.add_entry(r, c);
        }
        let mut m: Self = pb.build();
        for &(r, c, v) in triplets {
            m.add_to(r, c, v);
        }
        m
    }

    pub fn from_dense(d: &DMatrix<T>) -> Self {
        let mut trip = Vec::new();
        for r in 0..d.nrows() {
            for c in 0..d.ncols() {
                let v = d[(r, c)];
                if v != T::default() {
                    trip.push((r, c, v));
                }
            }
        }
        Self::from_triplets(d.nrows(), d.ncols(), &trip)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn row(&self, r: usize) -> (&[usize], &[T]) {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    fn position(&self, r: usize, c: usize) -> Option<usize> {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        self.indices[a..b].binary_search(&c).ok().map(|k| a + k)
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.position(r, c).map_or(T::default(), |k| self.values[k])
    }

    /// Adds `v` to an entry of the pattern.
    ///
    /// # Panics
    /// If `(r, c)` is not part of the sparsity pattern.
    pub fn add_to(&mut self, r: usize, c: usize, v: T) {
        let k = self.position(r, c).unwrap_or_else(|| panic!("entry ({r}, {c}) outside the pattern"));
        self.values[k] += v;
    }

    /// Adds a dense row-major block.
    pub fn add_block(&mut self, rows: &[usize], cols: &[usize], block: &[T]) {
        debug_assert_eq!(block.len(), rows.len() * cols.len());
        for (i, &r) in rows.iter().enumerate() {
            let (a, b) = (self.indptr[r], self.indptr[r + 1]);
            let idx = &self.indices[a..b];
            let brow = &block[i * cols.len()..(i + 1) * cols.len()];
            for (&c, &v) in cols.iter().zip(brow) {
                let k = idx.binary_search(&c).unwrap_or_else(|_| panic!("entry ({r}, {c}) outside the pattern"));
                self.values[a + k] += v;
            }
        }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::default(); self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.ncols, "matvec: vector length");
        for (r, yr) in y.iter_mut().enumerate() {
            let mut s = T::default();
            for k in self.indptr[r]..self.indptr[r + 1] {
                s += self.values[k] * x[self.indices[k]];
            }
            *yr = s;
        }
    }

    pub fn transpose(&self) -> Self {
        self.transpose_map(|v| v)
    }

    pub fn conj_transpose(&self) -> Self {
        self.transpose_map(Scalar::conj)
    }

    fn transpose_map(&self, f: impl Fn(T) -> T) -> Self {
        let mut count = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            count[c + 1] += 1;
        }
        for i in 0..self.ncols {
            count[i + 1] += count[i];
        }
        let indptr = count.clone();
        let mut next = count;
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![T::default(); self.nnz()];
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let c = self.indices[k];
                let dst = next[c];
                indices[dst] = r;
                values[dst] = f(self.values[k]);
                next[c] += 1;
            }
        }
        Self { nrows: self.ncols, ncols: self.nrows, indptr, indices, values }
    }

    pub fn scale(&mut self, s: T) {
        for v in &mut self.values {
            *v = *v * s;
        }
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> CsrMatrix<U> {
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `self + s·other` on the union of both patterns.
    pub fn add_scaled(&self, other: &Self, s: T) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols), "add_scaled: shape");
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        indptr.push(0);
        let mut indices = Vec::with_capacity(self.nnz().max(other.nnz()));
        let mut values = Vec::with_capacity(indices.capacity());
        for r in 0..self.nrows {
            let (ia, va) = self.row(r);
            let (ib, vb) = other.row(r);
            let (mut i, mut j) = (0, 0);
            while i < ia.len() || j < ib.len() {
                let ca = ia.get(i).copied().unwrap_or(usize::MAX);
                let cb = ib.get(j).copied().unwrap_or(usize::MAX);
                if ca < cb {
                    indices.push(ca);
                    values.push(va[i]);
                    i += 1;
                } else if cb < ca {
                    indices.push(cb);
                    values.push(s * vb[j]);
                    j += 1;
                } else {
                    indices.push(ca);
                    values.push(va[i] + s * vb[j]);
                    i += 1;
                    j += 1;
                }
            }
            indptr.push(indices.len());
        }
        Self { nrows: self.nrows, ncols: self.ncols, indptr, indices, values }
    }

    /// Keeps the rows in `rows` and the columns in `cols`, renumbered in the
    /// given order.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut colmap = vec![usize::MAX; self.ncols];
        for (new, &old) in cols.iter().enumerate() {
            colmap[old] = new;
        }
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        let mut buf: Vec<(usize, T)> = Vec::new();
        for &r in rows {
            buf.clear();
            let (idx, val) = self.row(r);
            for (&c, &v) in idx.iter().zip(val) {
                if colmap[c] != usize::MAX {
                    buf.push((colmap[c], v));
                }
            }
            buf.sort_unstable_by_key(|e| e.0);
            for &(c, v) in &buf {
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Self { nrows: rows.len(), ncols: cols.len(), indptr, indices, values }
    }

    /// Assembles a 2×2 block matrix `[[a, b], [c, d]]`; `None` blocks are zero.
    pub fn block(blocks: [[Option<&Self>; 2]; 2]) -> Self {
        let rows: [usize; 2] =
            [0, 1].map(|i| blocks[i].iter().flatten().map(|m| m.nrows).next().expect("empty block row"));
        let cols: [usize; 2] =
            [0, 1].map(|j| (0..2).filter_map(|i| blocks[i][j]).map(|m| m.ncols).next().expect("empty block column"));
        Self::block_general(&blocks.map(|r| r.to_vec()), &rows, &cols)
    }

    /// General block assembly with explicit block sizes.
    pub fn block_general(blocks: &[Vec<Option<&Self>>], rows: &[usize], cols: &[usize]) -> Self {
        let col_off: Vec<usize> = cols.iter().scan(0, |s, &c| Some(std::mem::replace(s, *s + c))).collect();
        let nrows: usize = rows.iter().sum();
        let ncols: usize = cols.iter().sum();
        let mut indptr = Vec::with_capacity(nrows + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (bi, &nr) in rows.iter().enumerate() {
            for r in 0..nr {
                for (bj, blk) in blocks[bi].iter().enumerate() {
                    if let Some(m) = blk {
                        assert_eq!((m.nrows, m.ncols), (nr, cols[bj]), "block ({bi}, {bj}) has the wrong shape");
                        let (idx, val) = m.row(r);
                        indices.extend(idx.iter().map(|&c| c + col_off[bj]));
                        values.extend_from_slice(val);
                    }
                }
                indptr.push(indices.len());
            }
        }
        Self { nrows, ncols, indptr, indices, values }
    }

    /// Appends dense border rows and columns: `[[self, colsᵀ], [rows, corner]]`.
    /// `cols[j]` is the j-th new column, `rows[i]` the i-th new row.
    pub fn bordered(&self, cols: &[Vec<T>], rows: &[Vec<T>], corner: &[Vec<T>]) -> Self {
        let nb = rows.len();
        assert_eq!(cols.len(), nb);
        let n = self.nrows;
        let mut trip = Vec::with_capacity(self.nnz() + 2 * nb * n);
        for r in 0..n {
            let (idx, val) = self.row(r);
            for (&c, &v) in idx.iter().zip(val) {
                trip.push((r, c, v));
            }
            for (j, col) in cols.iter().enumerate() {
                if col[r] != T::default() {
                    trip.push((r, self.ncols + j, col[r]));
                }
            }
        }
        for (i, row) in rows.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                if v != T::default() {
                    trip.push((n + i, c, v));
                }
            }
            for (j, &v) in corner[i].iter().enumerate() {
                trip.push((n + i, self.ncols + j, v));
            }
        }
        Self::from_triplets(n + nb, self.ncols + nb, &trip)
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        let mut d = DMatrix::from_element(self.nrows, self.ncols, T::default());
        for r in 0..self.nrows {
            let (idx, val) = self.row(r);
            for (&c, &v) in idx.iter().zip(val) {
                d[(r, c)] += v;
            }
        }
        d
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs2().sqrt()).fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.finite())
    }

    /// `yᴴ A x` with `y` conjugated.
    pub fn form(&self, y: &[T], x: &[T]) -> T {
        let ax = self.matvec(x);
        y.iter().zip(&ax).fold(T::default(), |s, (&a, &b)| s + a.conj() * b)
    }

    /// Writes one `row col re im` line per stored entry.
    pub fn write_coo<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "% {} {} {}", self.nrows, self.ncols, self.nnz())?;
        for r in 0..self.nrows {
            let (idx, val) = self.row(r);
            for (&c, &v) in idx.iter().zip(val) {
                writeln!(w, "{} {} {:.17e} {:.17e}", r, c, v.re(), v.im())?;
            }
        }
        Ok(())
    }
}

pub fn dot<T: Scalar>(y: &[T], x: &[T]) -> T {
    y.iter().zip(x).fold(T::default(), |s, (&a, &b)| s + a.conj() * b)
}

pub fn norm2<T: Scalar>(x: &[T]) -> f64 {
    x.iter().map(|v| v.abs2()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, 3, &[(0, 2, 1.0), (0, 0, 2.0), (0, 2, 3.0), (1, 1, -1.0)]);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(0, 2), 4.0);
        assert_eq!(m.get(1, 0), 0.0);
        assert_eq!(m.matvec(&[1.0, 2.0, 3.0]), vec![14.0, -2.0]);
    }

    #[test]
    fn transpose_and_dense_agree() {
        let m = CsrMatrix::from_triplets(2, 3, &[(0, 1, c(1.0, 2.0)), (1, 2, c(0.0, -1.0)), (1, 0, c(3.0, 0.0))]);
        let d = m.to_dense();
        assert_eq!(m.transpose().to_dense(), d.transpose());
        assert_eq!(m.conj_transpose().to_dense(), d.adjoint());
    }

    #[test]
    fn add_scaled_merges_patterns() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, 2.0)]);
        let b = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 1, 1.0)]);
        let s = a.add_scaled(&b, -2.0);
        assert_eq!(s.to_dense(), DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 0.0, 0.0]));
    }

    #[test]
    fn blocks_and_borders() {
        let a = CsrMatrix::<f64>::identity(2);
        let b = CsrMatrix::from_triplets(2, 1, &[(1, 0, 5.0)]);
        let bt = b.transpose();
        let m = CsrMatrix::block([[Some(&a), Some(&b)], [Some(&bt), None]]);
        let d = m.to_dense();
        assert_eq!(d, DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 5.0, 0.0, 5.0, 0.0]));
        let e = a.bordered(&[vec![1.0, 1.0]], &[vec![2.0, 3.0]], &[vec![0.0]]);
        assert_eq!(e.to_dense(), DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 2.0, 3.0, 0.0]));
    }

    #[test]
    fn submatrix_renumbers() {
        let m = CsrMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (1, 2, 2.0), (2, 1, 3.0), (2, 2, 4.0)]);
        let s = m.submatrix(&[2, 1], &[2, 1]);
        assert_eq!(s.to_dense(), DMatrix::from_row_slice(2, 2, &[4.0, 3.0, 2.0, 0.0]));
    }

    #[test]
    fn coo_export() {
        let m = CsrMatrix::from_triplets(1, 2, &[(0, 1, c(1.5, -2.0))]);
        let mut out = Vec::new();
        m.write_coo(&mut out).unwrap();
        let s = String::from_utf8(out).unwrap();
        assert!(s.lines().nth(1).unwrap().starts_with("0 1 1.5"));
    }
}
