//! Sparse direct solves with an iterative fallback.

use std::marker::PhantomData;

use num_complex::Complex64;

use crate::error::LinalgError;
use crate::linalg::sparse::{norm2, CsrMatrix, Scalar};
use crate::linalg::umfpack::{self, ComplexLu};

/// Scalars with a sparse direct factorization.
pub trait FactorScalar: Scalar + Send + Sync {}
impl FactorScalar for f64 {}
impl FactorScalar for Complex64 {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    SparseLu,
    Gmres,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    /// `‖Ax − b‖₂ / ‖b‖₂`, recomputed after the solve.
    pub residual: f64,
    /// Krylov iterations; refinement steps for the direct method.
    pub iterations: usize,
    pub method: SolveMethod,
}

/// Multifrontal sparse LU (UMFPACK) with threshold partial pivoting and a
/// fill-reducing ordering.
pub struct SparseLu<T: FactorScalar> {
    lu: ComplexLu,
    n: usize,
    _scalar: PhantomData<T>,
}

impl<T: FactorScalar> SparseLu<T> {
    pub fn new(a: &CsrMatrix<T>) -> Result<Self, LinalgError> {
        if a.nrows() != a.ncols() {
            return Err(LinalgError::DimensionMismatch(format!("matrix is {}x{}", a.nrows(), a.ncols())));
        }
        let n = a.nrows();
        if n == 0 {
            return Err(LinalgError::DimensionMismatch("empty matrix".into()));
        }
        // the CSR arrays of Aᵀ are the CSC arrays of A
        let t = a.transpose();
        let ap = t.indptr().iter().map(|&v| v as i64).collect();
        let ai = t.indices().iter().map(|&v| v as i64).collect();
        let ax = t.values().iter().map(|v| v.to_complex()).collect();
        drop(t);
        let lu = ComplexLu::new(n, ap, ai, ax).map_err(|st| match st {
            umfpack::STATUS_SINGULAR => LinalgError::Singular { residual: f64::INFINITY },
            umfpack::STATUS_OUT_OF_MEMORY => LinalgError::Factorization("out of memory".into()),
            _ => LinalgError::Factorization(format!("UMFPACK status {st}")),
        })?;
        Ok(Self { lu, n, _scalar: PhantomData })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn run(&self, sys: i64, b: &[T]) -> Vec<T> {
        assert_eq!(b.len(), self.n);
        let bc: Vec<Complex64> = b.iter().map(|v| v.to_complex()).collect();
        self.lu.solve(sys, &bc).into_iter().map(T::from_complex).collect()
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        self.run(umfpack::SYS_A, b)
    }

    pub fn solve_in_place(&self, x: &mut [T]) {
        let y = self.solve(x);
        x.copy_from_slice(&y);
    }

    /// Solves `Aᴴ x = b`.
    pub fn solve_adjoint(&self, b: &[T]) -> Vec<T> {
        self.run(umfpack::SYS_AH, b)
    }
}

pub fn relative_residual<T: Scalar>(a: &CsrMatrix<T>, x: &[T], b: &[T]) -> f64 {
    let ax = a.matvec(x);
    let r: Vec<T> = ax.iter().zip(b).map(|(&p, &q)| p - q).collect();
    let nb = norm2(b);
    if nb == 0.0 {
        norm2(&r)
    } else {
        norm2(&r) / nb
    }
}

fn check_inputs<T: Scalar>(a: &CsrMatrix<T>, b: &[T], tol: f64) -> Result<(), LinalgError> {
    if !(tol > 0.0 && tol <= 1e-2) {
        return Err(LinalgError::InvalidTolerance(tol));
    }
    if a.nrows() != a.ncols() || b.len() != a.nrows() {
        return Err(LinalgError::DimensionMismatch(format!(
            "matrix {}x{}, right-hand side {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    Ok(())
}

const REFINEMENT_STEPS: usize = 3;

/// Solves `A x = b` to relative residual `tol ∈ (0, 1e-2]`.
///
/// Sparse LU first, with a few steps of iterative refinement; restarted
/// GMRES with ILU(0) if the factorization fails or stays above `tol`.
pub fn sparse_solve<T: FactorScalar>(
    a: &CsrMatrix<T>,
    b: &[T],
    tol: f64,
) -> Result<(Vec<T>, SolveReport), LinalgError> {
    check_inputs(a, b, tol)?;
    if norm2(b) == 0.0 {
        return Ok((
            vec![T::default(); b.len()],
            SolveReport { residual: 0.0, iterations: 0, method: SolveMethod::SparseLu },
        ));
    }
    let mut guess = None;
    if let Ok(lu) = SparseLu::new(a) {
        let mut x = lu.solve(b);
        let mut res = relative_residual(a, &x, b);
        let mut steps = 0;
        while res.is_finite() && res > tol * 1e-3 && steps < REFINEMENT_STEPS {
            let ax = a.matvec(&x);
            let r: Vec<T> = b.iter().zip(&ax).map(|(&p, &q)| p - q).collect();
            let dx = lu.solve(&r);
            let cand: Vec<T> = x.iter().zip(&dx).map(|(&p, &q)| p + q).collect();
            let cres = relative_residual(a, &cand, b);
            if !(cres < res) {
                break;
            }
            x = cand;
            res = cres;
            steps += 1;
        }
        if res <= tol {
            return Ok((x, SolveReport { residual: res, iterations: steps, method: SolveMethod::SparseLu }));
        }
        if x.iter().all(|v| v.finite()) {
            guess = Some(x);
        }
    }
    let (x, report) = gmres_ilu(a, b, guess, tol, GMRES_RESTART, GMRES_MAX_ITER)?;
    Ok((x, report))
}

const GMRES_RESTART: usize = 150;
const GMRES_MAX_ITER: usize = 6000;

/// Incomplete LU with the sparsity pattern of `A`.
pub struct Ilu0<T> {
    lu: CsrMatrix<T>,
    diag: Vec<usize>,
}

impl<T: Scalar> Ilu0<T> {
    pub fn new(a: &CsrMatrix<T>) -> Result<Self, LinalgError> {
        let n = a.nrows();
        let mut lu = a.clone();
        let mut diag = vec![usize::MAX; n];
        for (r, d) in diag.iter_mut().enumerate() {
            let (idx, _) = lu.row(r);
            if let Ok(k) = idx.binary_search(&r) {
                *d = lu.indptr()[r] + k;
            } else {
                return Err(LinalgError::Singular { residual: f64::INFINITY });
            }
        }
        let indptr = lu.indptr().to_vec();
        let indices = lu.indices().to_vec();
        let vals = lu.values_mut();
        for i in 0..n {
            for kk in indptr[i]..diag[i] {
                let k = indices[kk];
                let pivot = vals[diag[k]];
                if pivot.abs2() == 0.0 {
                    return Err(LinalgError::Singular { residual: f64::INFINITY });
                }
                let lik = vals[kk] * pivot.inv();
                vals[kk] = lik;
                // row i -= lik * row k on the shared pattern
                let mut p = kk + 1;
                for q in diag[k] + 1..indptr[k + 1] {
                    let col = indices[q];
                    while p < indptr[i + 1] && indices[p] < col {
                        p += 1;
                    }
                    if p < indptr[i + 1] && indices[p] == col {
                        let upd = lik * vals[q];
                        vals[p] = vals[p] - upd;
                    }
                }
            }
            if vals[diag[i]].abs2() == 0.0 {
                return Err(LinalgError::Singular { residual: f64::INFINITY });
            }
        }
        Ok(Self { lu, diag })
    }

    pub fn apply(&self, b: &[T]) -> Vec<T> {
        let n = b.len();
        let mut y = b.to_vec();
        for i in 0..n {
            let (idx, val) = self.lu.row(i);
            let mut s = y[i];
            for (&c, &v) in idx.iter().zip(val) {
                if c >= i {
                    break;
                }
                s = s - v * y[c];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let (idx, val) = self.lu.row(i);
            let mut s = y[i];
            for (&c, &v) in idx.iter().zip(val) {
                if c > i {
                    s = s - v * y[c];
                }
            }
            y[i] = s * self.lu.values()[self.diag[i]].inv();
        }
        y
    }
}

/// Givens rotation zeroing `b` against `a`: returns `(c, s)` with real `c`.
fn givens<T: Scalar>(a: T, b: T) -> (f64, T) {
    let na = a.abs2().sqrt();
    let nb = b.abs2().sqrt();
    if nb == 0.0 {
        return (1.0, T::default());
    }
    if na == 0.0 {
        return (0.0, T::from_re(1.0));
    }
    let r = (na * na + nb * nb).sqrt();
    (na / r, a * T::from_re(1.0 / na) * b.conj() * T::from_re(1.0 / r))
}

/// Right-preconditioned restarted GMRES with ILU(0).
pub fn gmres_ilu<T: Scalar>(
    a: &CsrMatrix<T>,
    b: &[T],
    x0: Option<Vec<T>>,
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<(Vec<T>, SolveReport), LinalgError> {
    let n = b.len();
    let pre = Ilu0::new(a)?;
    let nb = norm2(b);
    let mut x = x0.unwrap_or_else(|| vec![T::default(); n]);
    let mut total = 0;
    let m = restart.max(1);
    loop {
        let ax = a.matvec(&x);
        let r: Vec<T> = b.iter().zip(&ax).map(|(&p, &q)| p - q).collect();
        let beta = norm2(&r);
        if beta / nb <= tol {
            break;
        }
        if total >= max_iter {
            return Err(LinalgError::NotConverged { iterations: total, residual: beta / nb });
        }
        let mut v: Vec<Vec<T>> = vec![r.iter().map(|&q| q * T::from_re(1.0 / beta)).collect()];
        let mut h: Vec<Vec<T>> = Vec::new();
        let mut cs: Vec<(f64, T)> = Vec::new();
        let mut g = vec![T::default(); m + 1];
        g[0] = T::from_re(beta);
        let mut j = 0;
        while j < m && total < max_iter {
            let z = pre.apply(&v[j]);
            let mut w = a.matvec(&z);
            let mut col = vec![T::default(); j + 2];
            // modified Gram–Schmidt
            for (i, vi) in v.iter().enumerate() {
                let hij = vi.iter().zip(&w).fold(T::default(), |s, (&p, &q)| s + p.conj() * q);
                col[i] = hij;
                for (wk, &vk) in w.iter_mut().zip(vi) {
                    *wk = *wk - hij * vk;
                }
            }
            let hn = norm2(&w);
            col[j + 1] = T::from_re(hn);
            for (i, &(c, s)) in cs.iter().enumerate() {
                let (p, q) = (col[i], col[i + 1]);
                col[i] = T::from_re(c) * p + s * q;
                col[i + 1] = -(s.conj()) * p + T::from_re(c) * q;
            }
            let (c, s) = givens(col[j], col[j + 1]);
            col[j] = T::from_re(c) * col[j] + s * col[j + 1];
            col[j + 1] = T::default();
            let gj = g[j];
            g[j] = T::from_re(c) * gj;
            g[j + 1] = -(s.conj()) * gj;
            cs.push((c, s));
            h.push(col);
            total += 1;
            j += 1;
            if g[j].abs2().sqrt() / nb <= tol * 0.5 || hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|&q| q * T::from_re(1.0 / hn)).collect());
        }
        // back substitution on the triangular Hessenberg factor
        let mut y = vec![T::default(); j];
        for i in (0..j).rev() {
            let mut s = g[i];
            for k in i + 1..j {
                s = s - h[k][i] * y[k];
            }
            y[i] = s * h[i][i].inv();
        }
        let mut upd = vec![T::default(); n];
        for (yi, vi) in y.iter().zip(&v) {
            for (u, &q) in upd.iter_mut().zip(vi) {
                *u += *yi * q;
            }
        }
        let z = pre.apply(&upd);
        for (xi, zi) in x.iter_mut().zip(z) {
            *xi += zi;
        }
        if !x.iter().all(|v| v.finite()) {
            return Err(LinalgError::Singular { residual: f64::INFINITY });
        }
    }
    let res = relative_residual(a, &x, b);
    Ok((x, SolveReport { residual: res, iterations: total, method: SolveMethod::Gmres }))
}
