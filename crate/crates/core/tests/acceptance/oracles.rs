//! Independent reference computations used by the acceptance checks.

use galbrun_core::assembly::{assemble_div_coupling, assemble_gram, Norm};
use galbrun_core::coefficients::CoefficientSet;
use galbrun_core::fem::{eval_fe, triangle_quadrature, ElementMap, FESpace, FeEval};
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Galbrun integrand `a(u, v)` at one point, written out term by term.
fn integrand(c: &CoefficientSet, x: galbrun_core::Point2, u: &FeEval, v: &FeEval) -> Complex64 {
    let cv = c.eval(x);
    let i = Complex64::new(0.0, 1.0);
    let rho = cv.rho.v;
    let b = [cv.b[0].v, cv.b[1].v];
    let l = |f: &FeEval| {
        let val = f.value();
        let db = |k: usize| f.components[k].g[0] * b[0] + f.components[k].g[1] * b[1];
        [
            val[0] * c.omega + i * db(0) - i * c.rotation * val[1],
            val[1] * c.omega + i * db(1) + i * c.rotation * val[0],
        ]
    };
    let (lu, lv) = (l(u), l(v));
    let (uu, vv) = (u.value(), v.value());
    let (du, dv) = (u.divergence(), v.divergence());
    let gp = cv.p.g;
    let hp = cv.p.hessian();
    let hf = cv.phi.hessian();
    let mut pot = Complex64::default();
    for r in 0..2 {
        for s in 0..2 {
            pot += (hp[r][s] - rho * hf[r][s]) * uu[s] * vv[r].conj();
        }
    }
    let gpu = uu[0] * gp[0] + uu[1] * gp[1];
    let gpv = vv[0] * gp[0] + vv[1] * gp[1];
    du * dv.conj() * (cv.cs2.v * rho) - (lu[0] * lv[0].conj() + lu[1] * lv[1].conj()) * rho
        + du * gpv.conj()
        + gpu * dv.conj()
        + pot
        - i * c.omega * cv.gamma.v * rho * (uu[0] * vv[0].conj() + uu[1] * vv[1].conj())
}

/// Dense Galbrun matrix by a plain loop over elements, points and DOF pairs.
pub fn galbrun_dense(space: &FESpace, c: &CoefficientSet, degree: usize) -> DMatrix<Complex64> {
    let n = space.num_dofs();
    let rule = triangle_quadrature(degree).unwrap();
    let unit = |j: usize| {
        let mut e = vec![Complex64::default(); n];
        e[j] = Complex64::new(1.0, 0.0);
        e
    };
    let mut out = DMatrix::zeros(n, n);
    for t in 0..space.mesh().num_triangles() {
        let map = ElementMap::new(space.mesh(), t);
        for (r, w) in rule.points.iter().zip(&rule.weights) {
            let x = map.map(*r);
            let evals: Vec<FeEval> = (0..n).map(|j| eval_fe(space, &unit(j), t, *r).unwrap()).collect();
            for i in 0..n {
                for j in 0..n {
                    out[(i, j)] += integrand(c, x, &evals[j], &evals[i]) * (w * map.det.abs());
                }
            }
        }
    }
    out
}

/// `β_h` as the smallest singular value of `M^{-1/2} B A^{-1/2}` on
/// zero-mean pressures, with dense factorizations.
pub fn dense_inf_sup(x: &FESpace, q: &FESpace) -> f64 {
    let free = x.free_dofs();
    let a = assemble_gram(x, Norm::H1Semi).unwrap().submatrix(&free, &free).to_dense();
    let all: Vec<usize> = (0..q.num_dofs()).collect();
    let b = assemble_div_coupling(x, q).unwrap().submatrix(&all, &free).to_dense();
    let m = assemble_gram(q, Norm::L2).unwrap().to_dense();
    let nq = q.num_dofs();
    let mean = &m * DMatrix::from_element(nq, 1, 1.0);
    let j = mean.column(0).iamax();
    let mut z = DMatrix::zeros(nq, nq - 1);
    for (col, i) in (0..nq).filter(|&i| i != j).enumerate() {
        z[(i, col)] = 1.0;
        z[(j, col)] = -mean[i] / mean[j];
    }
    if nq - 1 > free.len() {
        return 0.0;
    }
    let lai = a.cholesky().unwrap().l().try_inverse().unwrap();
    let lmi = (z.transpose() * &m * &z).cholesky().unwrap().l().try_inverse().unwrap();
    (lmi * z.transpose() * b * lai.transpose()).singular_values().min()
}
