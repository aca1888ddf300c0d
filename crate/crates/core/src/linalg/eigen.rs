//! Smallest eigenvalues of Hermitian definite pencils by shift-invert
//! subspace iteration with Rayleigh–Ritz.

use nalgebra::{ComplexField, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::LinalgError;
use crate::linalg::solve::{FactorScalar, SparseLu};
use crate::linalg::sparse::{dot, CsrMatrix, Scalar};

/// Scalars with dense Hermitian eigensolvers.
pub trait EigenScalar: FactorScalar + ComplexField<RealField = f64> {}
impl EigenScalar for f64 {}
impl EigenScalar for num_complex::Complex64 {}

/// A pencil `K x = θ M x` given through `M` and the action of `K⁻¹`.
///
/// `K` must be Hermitian positive definite on the complement of `deflate`
/// (taken `M`-orthogonally).
pub struct ShiftInvertPencil<'a, T> {
    pub dim: usize,
    pub apply_m: &'a (dyn Fn(&[T]) -> Vec<T> + Sync),
    pub solve_k: &'a (dyn Fn(&[T]) -> Result<Vec<T>, LinalgError> + Sync),
    pub deflate: Vec<Vec<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenResult {
    /// Smallest eigenvalue of `K` relative to `M`.
    pub value: f64,
    pub iterations: usize,
    pub residual: f64,
}

const BLOCK: usize = 6;
const MAX_ITER: usize = 3000;

struct Deflation<T> {
    vecs: Vec<Vec<T>>,
    mvecs: Vec<Vec<T>>,
    gram_inv: DMatrix<T>,
}

impl<T: EigenScalar> Deflation<T> {
    fn new(vecs: Vec<Vec<T>>, apply_m: &dyn Fn(&[T]) -> Vec<T>) -> Result<Self, LinalgError> {
        let mvecs: Vec<Vec<T>> = vecs.iter().map(|v| apply_m(v)).collect();
        let k = vecs.len();
        let g = DMatrix::from_fn(k, k, |i, j| dot(&vecs[i], &mvecs[j]));
        let gram_inv = g
            .try_inverse()
            .ok_or_else(|| LinalgError::DimensionMismatch("deflation vectors are linearly dependent".into()))?;
        Ok(Self { vecs, mvecs, gram_inv })
    }

    fn project(&self, x: &mut [T]) {
        if self.vecs.is_empty() {
            return;
        }
        let c: Vec<T> = self.mvecs.iter().map(|mv| dot(mv, x)).collect();
        for (i, v) in self.vecs.iter().enumerate() {
            let mut a = T::default();
            for (j, &cj) in c.iter().enumerate() {
                a += self.gram_inv[(i, j)] * cj;
            }
            for (xk, &vk) in x.iter_mut().zip(v) {
                *xk = *xk - a * vk;
            }
        }
    }
}

/// Solves the projected generalized problem `H c = θ G c`, `G` HPD.
/// Returns ascending eigenvalues and `G`-orthonormal eigenvectors.
fn dense_generalized<T: EigenScalar>(h: &DMatrix<T>, g: &DMatrix<T>) -> Result<(Vec<f64>, DMatrix<T>), LinalgError> {
    let gs = (g + g.adjoint()) * T::from_re(0.5);
    let hs = (h + h.adjoint()) * T::from_re(0.5);
    let chol = gs
        .cholesky()
        .ok_or_else(|| LinalgError::Factorization("projected mass matrix is not positive definite".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| LinalgError::Factorization("singular projected mass".into()))?;
    let c = &linv * hs * linv.adjoint();
    let c = (&c + c.adjoint()) * T::from_re(0.5);
    let eig = c.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let lt_inv = linv.adjoint();
    let vecs = DMatrix::from_fn(h.nrows(), order.len(), |r, k| {
        let col = order[k];
        let mut s = T::default();
        for m in 0..h.nrows() {
            s += lt_inv[(r, m)] * eig.eigenvectors[(m, col)];
        }
        s
    });
    Ok((vals, vecs))
}

fn combine<T: Scalar>(basis: &[Vec<T>], coeffs: &DMatrix<T>, col: usize) -> Vec<T> {
    let n = basis[0].len();
    let mut out = vec![T::default(); n];
    for (k, b) in basis.iter().enumerate() {
        let c = coeffs[(k, col)];
        for (o, &v) in out.iter_mut().zip(b) {
            *o += c * v;
        }
    }
    out
}

/// Smallest eigenvalue of `K x = θ M x` to relative residual `tol`.
pub fn smallest_eigenvalue<T: EigenScalar>(
    pencil: &ShiftInvertPencil<'_, T>,
    tol: f64,
    seed: u64,
) -> Result<EigenResult, LinalgError> {
    let n = pencil.dim;
    let defl = Deflation::new(pencil.deflate.clone(), pencil.apply_m)?;
    let p = BLOCK.min(n.saturating_sub(pencil.deflate.len())).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<Vec<T>> = (0..p)
        .map(|_| {
            let mut v: Vec<T> = (0..n).map(|_| T::from_re(rng.random::<f64>() - 0.5)).collect();
            defl.project(&mut v);
            v
        })
        .collect();
    let mut last = f64::NAN;
    let mut residual = f64::INFINITY;
    for it in 1..=MAX_ITER {
        let mx: Vec<Vec<T>> = x.iter().map(|v| (pencil.apply_m)(v)).collect();
        let mut y = Vec::with_capacity(p);
        for m in &mx {
            let mut v = (pencil.solve_k)(m)?;
            defl.project(&mut v);
            y.push(v);
        }
        let my: Vec<Vec<T>> = y.iter().map(|v| (pencil.apply_m)(v)).collect();
        // Yᴴ K Y = Yᴴ M X because K Y = M X
        let hk = DMatrix::from_fn(p, p, |i, j| dot(&y[i], &mx[j]));
        let gm = DMatrix::from_fn(p, p, |i, j| dot(&y[i], &my[j]));
        let (theta, c) = dense_generalized(&hk, &gm)?;
        let t0 = theta[0];
        let kz = combine(&mx, &c, 0);
        let mz = combine(&my, &c, 0);
        let r: Vec<T> = kz.iter().zip(&mz).map(|(&a, &b)| a - b * T::from_re(t0)).collect();
        let rn = r.iter().map(|v| v.abs2()).sum::<f64>().sqrt();
        let scale = mz.iter().map(|v| v.abs2()).sum::<f64>().sqrt() * t0.abs().max(f64::MIN_POSITIVE);
        residual = rn / scale;
        x = (0..p).map(|k| combine(&y, &c, k)).collect();
        if !t0.is_finite() {
            return Err(LinalgError::NotConverged { iterations: it, residual });
        }
        let change = ((t0 - last) / t0).abs();
        if residual <= tol || (change <= tol * tol && residual <= tol.sqrt()) {
            return Ok(EigenResult { value: t0, iterations: it, residual });
        }
        last = t0;
    }
    Err(LinalgError::NotConverged { iterations: MAX_ITER, residual })
}

/// Smallest eigenvalue of `S x = λ M x` for sparse symmetric positive
/// semidefinite `S` and SPD `M`.
pub fn smallest_generalized_eigenvalue(
    s: &CsrMatrix<f64>,
    m: &CsrMatrix<f64>,
    tol: f64,
) -> Result<f64, LinalgError> {
    if s.nrows() != s.ncols() || m.nrows() != m.ncols() || s.nrows() != m.nrows() {
        return Err(LinalgError::DimensionMismatch("pencil matrices must be square and of equal size".into()));
    }
    // a small positive shift keeps S + δM definite when S is singular
    let dm = m.values().iter().map(|v| v.abs()).fold(0.0, f64::max);
    let ds = s.values().iter().map(|v| v.abs()).fold(0.0, f64::max);
    let delta = 1e-3 * ds.max(dm) / dm.max(f64::MIN_POSITIVE);
    let k = s.add_scaled(m, delta);
    let lu = SparseLu::new(&k)?;
    let apply_m = |v: &[f64]| m.matvec(v);
    let solve_k = |v: &[f64]| Ok(lu.solve(v));
    let pencil = ShiftInvertPencil { dim: s.nrows(), apply_m: &apply_m, solve_k: &solve_k, deflate: Vec::new() };
    let r = smallest_eigenvalue(&pencil, tol, 0)?;
    Ok(r.value - delta)
}
