//! Diagnostics of discrete solutions: X-norm errors, consistency errors,
//! convergence rates, discrete inf-sup constants, Mach admissibility
//! bounds, the discrete Helmholtz splitting and stability constants.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::assembly::{
    assemble_div_coupling, assemble_gram, default_form_degree, default_source_degree, for_each_point, Norm,
    Tabulation,
};
use crate::coefficients::{grid_points, mach_number_sq, CoefficientSet, VectorField};
use crate::error::{AnalysisError, LinalgError};
use crate::fem::{build_space, eval_fe, BasisEval, BcMode, FESpace, Family};
use crate::jet::ComplexJet;
use crate::linalg::{
    smallest_eigenvalue, ComplexSparseMatrix, CsrMatrix, RealSparseMatrix, ShiftInvertPencil, SparseLu,
};
use crate::mesh::{Mesh, Point2};
use crate::solver::{strong_parts, Boundary, ExactField, Solution, Variant};

/// Tolerance of the eigenvalue solves.
const EIGEN_TOL: f64 = 1e-10;
/// Shift keeping the pressure Schur complement definite when it is singular.
const SCHUR_SHIFT: f64 = 1e-8;
/// Inf-sup constants below this count as zero.
pub const UNSTABLE_BETA: f64 = 1e-6;
/// Radius of the disk around the source excluded from the consistency error.
pub const EXCLUSION_RADIUS: f64 = 1.5;

/// One point of a convergence study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRecord {
    pub h: f64,
    pub order: usize,
    pub error: f64,
    /// NaN for `k = 1`, where broken second derivatives vanish.
    pub conserror: f64,
    pub variant: Variant,
    pub bc: Boundary,
}

/// Value and first/second derivatives of both components of `u` on
/// triangle `t` from physical basis data.
fn field_jets(space: &FESpace, u: &[Complex64], t: usize, phys: &BasisEval) -> [ComplexJet; 2] {
    let mut out = [ComplexJet::default(); 2];
    for (i, &node) in space.element_nodes(t).iter().enumerate() {
        let (v, g, h) = (phys.values[i], phys.grads[i], phys.hessians[i]);
        for (c, jet) in out.iter_mut().enumerate() {
            let a = u[2 * node + c];
            jet.v += a * v;
            jet.g[0] += a * g[0];
            jet.g[1] += a * g[1];
            jet.h[0] += a * h[0];
            jet.h[1] += a * h[1];
            jet.h[2] += a * h[2];
        }
    }
    out
}

fn check_vector_field(space: &FESpace, u: &[Complex64]) -> Result<(), AnalysisError> {
    if !space.family().is_vector() {
        return Err(AnalysisError::Domain("expected a vector velocity space".into()));
    }
    if u.len() != space.num_dofs() {
        return Err(crate::error::FemError::LengthMismatch { expected: space.num_dofs(), got: u.len() }.into());
    }
    Ok(())
}

/// `√Σ w(|div e|² + |b·∇e|² + |e|²)` over the quadrature points of `space`
/// with `e = u − reference(x)`. `reference` gets a per-element location hint.
fn x_norm_against<F>(space: &FESpace, u: &[Complex64], b: &VectorField, reference: F) -> Result<f64, AnalysisError>
where
    F: Fn(Point2, &mut Option<usize>) -> Result<[ComplexJet; 2], AnalysisError> + Sync,
{
    check_vector_field(space, u)?;
    let tab = Tabulation::new(space, default_source_degree(space.degree()))?;
    let parts = (0..space.mesh().num_triangles())
        .into_par_iter()
        .map(|t| {
            let mut hint = None;
            let mut acc = 0.0;
            let mut status = Ok(());
            for_each_point(space, &tab, t, |qp| {
                if status.is_err() {
                    return;
                }
                let r = match reference(qp.x, &mut hint) {
                    Ok(r) => r,
                    Err(e) => {
                        status = Err(e);
                        return;
                    }
                };
                let uh = field_jets(space, u, t, qp.phys);
                let e = [uh[0] - r[0], uh[1] - r[1]];
                let bj = b(qp.x);
                let bv = [bj[0].v, bj[1].v];
                let div = e[0].g[0] + e[1].g[1];
                let mut s = div.norm_sqr();
                for ec in &e {
                    s += (ec.g[0] * bv[0] + ec.g[1] * bv[1]).norm_sqr() + ec.v.norm_sqr();
                }
                acc += s * qp.w;
            });
            status.map(|_| acc)
        })
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(parts.iter().sum::<f64>().sqrt())
}

/// X-norm distance between two solutions of the same problem, evaluated at
/// the quadrature points of the coarse mesh. The reference is located on
/// its own mesh point by point.
pub fn x_norm_error(coarse: &Solution, reference: &Solution) -> Result<f64, AnalysisError> {
    let (a, b) = (&coarse.config, &reference.config);
    if a.alpha != b.alpha || a.flow != b.flow || a.omega != b.omega || a.gamma != b.gamma {
        return Err(AnalysisError::Domain("solutions belong to different coefficient sets".into()));
    }
    x_norm_difference(&coarse.space, &coarse.velocity, &coarse.coefficients.b, &reference.space, &reference.velocity)
}

/// X-norm of `u − v` for fields on possibly different meshes; the norm is
/// integrated on the mesh of `u`.
pub fn x_norm_difference(
    space: &FESpace,
    u: &[Complex64],
    b: &VectorField,
    ref_space: &FESpace,
    v: &[Complex64],
) -> Result<f64, AnalysisError> {
    check_vector_field(ref_space, v)?;
    let mesh = ref_space.mesh();
    x_norm_against(space, u, b, |x, hint| {
        let loc = mesh.locate_point_from(x, hint.unwrap_or(0))?;
        *hint = Some(loc.triangle);
        let bary = loc.barycentric;
        Ok(eval_fe(ref_space, v, loc.triangle, [bary[1], bary[2]])?.components)
    })
}

/// X-norm distance between a discrete field and a closed-form one.
pub fn x_norm_error_exact(
    space: &FESpace,
    u: &[Complex64],
    b: &VectorField,
    exact: &ExactField,
) -> Result<f64, AnalysisError> {
    x_norm_against(space, u, b, |x, _| Ok(exact(x)))
}

/// `‖S₁ − S₂‖/‖S₁‖` over the elements with no vertex in the disk of radius
/// [`EXCLUSION_RADIUS`], with elementwise second derivatives of `u`.
pub fn consistency_error(space: &FESpace, u: &[Complex64], c: &CoefficientSet) -> Result<f64, AnalysisError> {
    check_vector_field(space, u)?;
    if space.degree() < 2 {
        return Err(AnalysisError::Domain("the consistency error needs k >= 2".into()));
    }
    let mesh = space.mesh();
    let kept: Vec<usize> = (0..mesh.num_triangles())
        .filter(|&t| mesh.triangle_points(t).iter().all(|p| p.x.hypot(p.y) > EXCLUSION_RADIUS))
        .collect();
    let tab = Tabulation::new(space, default_form_degree(space.degree()))?;
    let parts: Vec<(f64, f64)> = kept
        .par_iter()
        .map(|&t| {
            let (mut num, mut den) = (0.0, 0.0);
            for_each_point(space, &tab, t, |qp| {
                let jets = field_jets(space, u, t, qp.phys);
                let (s1, s2) = strong_parts(c, &jets, qp.x);
                num += ((s1[0] - s2[0]).norm_sqr() + (s1[1] - s2[1]).norm_sqr()) * qp.w;
                den += (s1[0].norm_sqr() + s1[1].norm_sqr()) * qp.w;
            });
            (num, den)
        })
        .collect();
    let (num, den) = parts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    if den <= 0.0 || !den.is_finite() {
        return Err(AnalysisError::Domain("‖S₁‖ vanishes outside the excluded disk".into()));
    }
    Ok((num / den).sqrt())
}

/// Rates `log(e_i/e_{i+1}) / log(h_i/h_{i+1})` between consecutive records.
pub fn eoc(records: &[ConvergenceRecord]) -> Result<Vec<f64>, AnalysisError> {
    if records.len() < 2 {
        return Err(AnalysisError::Domain(format!("need at least 2 records, got {}", records.len())));
    }
    if records.iter().any(|r| r.order != records[0].order) {
        return Err(AnalysisError::Domain("records mix polynomial orders".into()));
    }
    records
        .windows(2)
        .map(|w| {
            let (a, b) = (&w[0], &w[1]);
            if a.h == b.h {
                return Err(AnalysisError::Domain(format!("repeated mesh size h = {}", a.h)));
            }
            Ok((a.error / b.error).ln() / (a.h / b.h).ln())
        })
        .collect()
}

/// Velocity/pressure blocks of a Stokes-type pair on the free velocity DOFs.
struct StokesBlocks {
    free: Vec<usize>,
    num_velocity: usize,
    /// Vector H¹-seminorm Gram on the free DOFs.
    a: RealSparseMatrix,
    /// `⟨div u, q⟩`, pressure rows by free velocity columns.
    b: RealSparseMatrix,
    /// Pressure mass matrix.
    m: RealSparseMatrix,
    /// `M·1`, the functional `q ↦ ∫q`.
    mean: Vec<f64>,
}

impl StokesBlocks {
    fn new(x: &FESpace, q: &FESpace) -> Result<Self, AnalysisError> {
        if !matches!(x.bc_mode(), BcMode::StrongNormal | BcMode::FullDirichlet) {
            return Err(AnalysisError::Domain(format!(
                "velocity space must use strong_normal or full_dirichlet, got {:?}",
                x.bc_mode()
            )));
        }
        if !matches!(q.family(), Family::ScalarContinuousZeroMean | Family::ScalarDiscontinuousZeroMean) {
            return Err(AnalysisError::Domain("pressure space must be scalar".into()));
        }
        let free = x.free_dofs();
        let all_q: Vec<usize> = (0..q.num_dofs()).collect();
        let a = assemble_gram(x, Norm::H1Semi)?.submatrix(&free, &free);
        let b = assemble_div_coupling(x, q)?.submatrix(&all_q, &free);
        let m = assemble_gram(q, Norm::L2)?;
        let mean = m.matvec(&vec![1.0; q.num_dofs()]);
        Ok(Self { free, num_velocity: x.num_dofs(), a, b, m, mean })
    }

    /// `[[A, s·Bᵀ, 0], [B, εM, m], [0, mᵀ, 0]]`.
    fn saddle(&self, s: f64, eps: f64) -> RealSparseMatrix {
        let (nf, nq) = (self.free.len(), self.m.nrows());
        let mut bt = self.b.transpose();
        bt.scale(s);
        let mut em = self.m.clone();
        em.scale(eps);
        let core = CsrMatrix::block_general(
            &[vec![Some(&self.a), Some(&bt)], vec![Some(&self.b), Some(&em)]],
            &[nf, nq],
            &[nf, nq],
        );
        let mut border = vec![0.0; nf + nq];
        border[nf..].copy_from_slice(&self.mean);
        core.bordered(std::slice::from_ref(&border), std::slice::from_ref(&border), &[vec![0.0]])
    }
}

/// `β_h = √λ_min` of `B A⁻¹ Bᵀ x = λ M x` on zero-mean pressures.
fn beta_of(blocks: &StokesBlocks) -> Result<f64, AnalysisError> {
    let (nf, nq) = (blocks.free.len(), blocks.m.nrows());
    // (B A⁻¹ Bᵀ + εM) p = r ⇔ A u = Bᵀ p, B u + εM p = r
    let lu = SparseLu::new(&blocks.saddle(-1.0, SCHUR_SHIFT))?;
    let solve_k = |r: &[f64]| -> Result<Vec<f64>, LinalgError> {
        let mut rhs = vec![0.0; nf + nq + 1];
        rhs[nf..nf + nq].copy_from_slice(r);
        let x = lu.solve(&rhs);
        Ok(x[nf..nf + nq].to_vec())
    };
    let apply_m = |v: &[f64]| blocks.m.matvec(v);
    let pencil = ShiftInvertPencil { dim: nq, apply_m: &apply_m, solve_k: &solve_k, deflate: vec![vec![1.0; nq]] };
    let theta = smallest_eigenvalue(&pencil, EIGEN_TOL, 0)?.value;
    Ok((theta - SCHUR_SHIFT).max(0.0).sqrt())
}

/// Discrete inf-sup constant of continuous `P_k` velocities with the given
/// boundary condition against `P_{k-1}` pressures of `pressure` family.
pub fn inf_sup_constant(
    mesh: Arc<Mesh>,
    k: usize,
    velocity_bc: BcMode,
    pressure: Family,
) -> Result<f64, AnalysisError> {
    if k == 0 {
        return Err(AnalysisError::Domain("velocity degree must be at least 1".into()));
    }
    let x = build_space(mesh.clone(), Family::VectorContinuous, k, velocity_bc)?;
    let q = build_space(mesh, pressure, k - 1, BcMode::None)?;
    inf_sup_of_spaces(&x, &q)
}

/// As [`inf_sup_constant`] for prebuilt spaces.
pub fn inf_sup_of_spaces(x: &FESpace, q: &FESpace) -> Result<f64, AnalysisError> {
    beta_of(&StokesBlocks::new(x, q)?)
}

/// Mach-number admissibility summary.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MachReport {
    pub mach_sq: f64,
    pub c_m: f64,
    pub theta: f64,
    pub bound_homogeneous: f64,
    pub bound_heterogeneous: f64,
    pub admissible: bool,
}

/// Smallest eigenvalue of a symmetric 2×2 matrix.
fn min_eig_2x2(m: [[f64; 2]; 2]) -> f64 {
    let mean = 0.5 * (m[0][0] + m[1][1]);
    let half = 0.5 * (m[0][0] - m[1][1]);
    let off = 0.5 * (m[0][1] + m[1][0]);
    mean - half.hypot(off)
}

/// Compares `‖c_s⁻¹b‖²_∞` with `β_h²(c̲_s²ρ̲)/(c̄_s²ρ̄)·cos²θ`, all suprema
/// taken on a `grid × grid` sample. Stated coefficient bounds are used when
/// the set carries them.
pub fn mach_report(c: &CoefficientSet, beta_h: f64, grid: usize) -> Result<MachReport, AnalysisError> {
    if !(beta_h > 0.0 && beta_h <= 1.0) {
        return Err(AnalysisError::Domain(format!("beta_h = {beta_h} outside (0, 1]")));
    }
    let mut c_m: f64 = 0.0;
    let (mut rho, mut cs2) = ([f64::INFINITY, f64::NEG_INFINITY], [f64::INFINITY, f64::NEG_INFINITY]);
    for p in grid_points(grid.max(crate::coefficients::MIN_GRID)) {
        let v = c.eval(p);
        let g = v.gamma.v;
        let lm = min_eig_2x2(v.m_matrix());
        if lm < 0.0 {
            c_m = c_m.max(if g > 0.0 { -lm / g } else { f64::INFINITY });
        }
        rho = [rho[0].min(v.rho.v), rho[1].max(v.rho.v)];
        cs2 = [cs2[0].min(v.cs2.v), cs2[1].max(v.cs2.v)];
    }
    if let Some(b) = c.bounds {
        rho = b.rho;
        cs2 = b.cs2;
    }
    let theta = (c_m / c.omega.abs()).atan();
    let bound_homogeneous = beta_h * beta_h * (cs2[0] * rho[0]) / (cs2[1] * rho[1]);
    let bound_heterogeneous = bound_homogeneous * theta.cos().powi(2);
    let mach_sq = mach_number_sq(c, grid);
    Ok(MachReport { mach_sq, c_m, theta, bound_homogeneous, bound_heterogeneous, admissible: mach_sq < bound_heterogeneous })
}

/// Discrete Helmholtz splitting `u = v + w` on a Stokes pair: `v` has the
/// smallest H¹ seminorm among fields with the discrete divergence of `u`,
/// and `w` is discretely divergence free.
pub struct HelmholtzProjector {
    blocks: StokesBlocks,
    lu: SparseLu<f64>,
    beta: f64,
}

impl HelmholtzProjector {
    /// Factors the saddle system; rejects pairs with `β_h` below
    /// [`UNSTABLE_BETA`].
    pub fn new(x: &FESpace, q: &FESpace) -> Result<Self, AnalysisError> {
        let blocks = StokesBlocks::new(x, q)?;
        let beta = beta_of(&blocks)?;
        if beta < UNSTABLE_BETA {
            return Err(AnalysisError::UnstablePair(beta));
        }
        let lu = SparseLu::new(&blocks.saddle(1.0, 0.0))?;
        Ok(Self { blocks, lu, beta })
    }

    pub fn inf_sup(&self) -> f64 {
        self.beta
    }

    fn check(&self, u: &[Complex64]) -> Result<(), AnalysisError> {
        if u.len() != self.blocks.num_velocity {
            return Err(
                crate::error::FemError::LengthMismatch { expected: self.blocks.num_velocity, got: u.len() }.into()
            );
        }
        Ok(())
    }

    /// Returns `(v, w)`. Constrained entries of `u` are ignored.
    pub fn project(&self, u: &[Complex64]) -> Result<(Vec<Complex64>, Vec<Complex64>), AnalysisError> {
        self.check(u)?;
        let bl = &self.blocks;
        let (nf, nq) = (bl.free.len(), bl.m.nrows());
        let mut v = vec![Complex64::default(); u.len()];
        for part in 0..2 {
            let uf: Vec<f64> = bl.free.iter().map(|&i| if part == 0 { u[i].re } else { u[i].im }).collect();
            let mut rhs = vec![0.0; nf + nq + 1];
            rhs[nf..nf + nq].copy_from_slice(&bl.b.matvec(&uf));
            let sol = self.lu.solve(&rhs);
            for (&i, &s) in bl.free.iter().zip(&sol[..nf]) {
                if part == 0 {
                    v[i].re = s;
                } else {
                    v[i].im = s;
                }
            }
        }
        let mut w: Vec<Complex64> = u.iter().zip(&v).map(|(a, b)| a - b).collect();
        for (i, c) in w.iter_mut().enumerate() {
            if self.is_constrained(i) {
                *c = Complex64::default();
            }
        }
        Ok((v, w))
    }

    fn is_constrained(&self, i: usize) -> bool {
        self.blocks.free.binary_search(&i).is_err()
    }

    /// `T_n u = v − w`.
    pub fn apply_tn(&self, u: &[Complex64]) -> Result<Vec<Complex64>, AnalysisError> {
        let (v, w) = self.project(u)?;
        Ok(v.iter().zip(&w).map(|(a, b)| a - b).collect())
    }
}

/// One-shot [`HelmholtzProjector::project`].
pub fn helmholtz_project(
    x: &FESpace,
    q: &FESpace,
    u: &[Complex64],
) -> Result<(Vec<Complex64>, Vec<Complex64>), AnalysisError> {
    HelmholtzProjector::new(x, q)?.project(u)
}

/// One-shot [`HelmholtzProjector::apply_tn`].
pub fn apply_tn(x: &FESpace, q: &FESpace, u: &[Complex64]) -> Result<Vec<Complex64>, AnalysisError> {
    HelmholtzProjector::new(x, q)?.apply_tn(u)
}

/// `‖A⁻¹‖` in the norm induced by the SPD Gram matrix `G`, i.e. `1/σ_min`
/// of the pencil `AᴴG⁻¹A x = σ² G x`.
pub fn stability_constant(a: &ComplexSparseMatrix, g: &RealSparseMatrix) -> Result<f64, AnalysisError> {
    let n = a.nrows();
    if a.ncols() != n || g.nrows() != n || g.ncols() != n {
        return Err(LinalgError::DimensionMismatch("A and G must be square of equal size".into()).into());
    }
    let lu = SparseLu::new(a)?;
    let gc = g.map(|v| Complex64::new(v, 0.0));
    // (AᴴG⁻¹A)⁻¹ = A⁻¹ G A⁻ᴴ
    let solve_k = |r: &[Complex64]| -> Result<Vec<Complex64>, LinalgError> {
        let y = lu.solve_adjoint(r);
        Ok(lu.solve(&gc.matvec(&y)))
    };
    let apply_m = |v: &[Complex64]| gc.matvec(v);
    let pencil = ShiftInvertPencil { dim: n, apply_m: &apply_m, solve_k: &solve_k, deflate: Vec::new() };
    let s2 = smallest_eigenvalue(&pencil, EIGEN_TOL, 0)?.value;
    if s2 <= 0.0 {
        return Err(AnalysisError::Domain("operator is singular".into()));
    }
    Ok(1.0 / s2.sqrt())
}

#[cfg(test)]
mod tests {
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::assembly::assemble_galbrun;
    use crate::coefficients::{test_medium, Flow};
    use crate::fem::ElementMap;
    use crate::mesh::{barycentric_refine, generate_square_mesh};
    use crate::solver::{solve_galbrun, ProblemConfig, Rhs};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn bary_mesh(h: f64) -> Arc<Mesh> {
        Arc::new(barycentric_refine(&generate_square_mesh(h, 3, false).unwrap()))
    }

    fn plain_mesh(h: f64) -> Arc<Mesh> {
        Arc::new(generate_square_mesh(h, 3, false).unwrap())
    }

    fn random_field(n: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        (0..n).map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect()
    }

    fn record(h: f64, error: f64) -> ConvergenceRecord {
        ConvergenceRecord {
            h,
            order: 2,
            error,
            conserror: f64::NAN,
            variant: Variant::ScottVogelius,
            bc: Boundary::Periodic,
        }
    }

    #[test]
    fn eoc_examples() {
        let r = eoc(&[record(0.5, 0.1), record(0.25, 0.025)]).unwrap();
        assert!((r[0] - 2.0).abs() < 1e-12);
        assert_eq!(eoc(&[record(0.5, 0.3), record(0.25, 0.3)]).unwrap(), vec![0.0]);
        let hs = [1.0, 0.5, 0.25, 0.125];
        let recs: Vec<_> = hs.iter().map(|&h| record(h, 7.0 * h * h * h)).collect();
        assert!(eoc(&recs).unwrap().iter().all(|r| (r - 3.0).abs() < 1e-12));
        assert!(eoc(&[record(0.5, 0.1)]).is_err());
        assert!(eoc(&[record(0.5, 0.1), record(0.5, 0.2)]).is_err());
        let mut other = record(0.25, 0.1);
        other.order = 3;
        assert!(eoc(&[record(0.5, 0.1), other]).is_err());
    }

    #[test]
    fn x_norm_trivial_cases() {
        let cfg = ProblemConfig { h: 1.0, ..Default::default() };
        let s = solve_galbrun(&cfg, &Rhs::GaussianSource).unwrap();
        assert!(x_norm_error(&s, &s).unwrap() < 1e-12);

        let mut zero = s.clone();
        zero.velocity.iter_mut().for_each(|v| *v = c(0.0, 0.0));
        let mut one = s.clone();
        one.velocity = s.space.interpolate(|_| [c(1.0, 0.0), c(0.0, 0.0)]);
        assert!((x_norm_error(&zero, &one).unwrap() - 8.0).abs() < 1e-10);

        let other = ProblemConfig { alpha: 0.5, ..cfg };
        let s2 = solve_galbrun(&other, &Rhs::GaussianSource).unwrap();
        assert!(x_norm_error(&s, &s2).is_err());
    }

    #[test]
    fn x_norm_transfer_between_meshes() {
        // a quadratic field is reproduced exactly on both meshes
        let set = test_medium(0.4, Flow::Periodic);
        let f = |p: Point2| [c(p.x * p.y, 1.0), c(0.5 * p.y * p.y, -p.x)];
        let coarse = build_space(plain_mesh(2.0), Family::VectorContinuous, 2, BcMode::None).unwrap();
        let fine = build_space(bary_mesh(1.0), Family::VectorContinuous, 3, BcMode::None).unwrap();
        let (u, v) = (coarse.interpolate(f), fine.interpolate(f));
        assert!(x_norm_difference(&coarse, &u, &set.b, &fine, &v).unwrap() < 1e-10);
    }

    #[test]
    fn interpolation_error_rate_in_x_norm() {
        let set = test_medium(0.2, Flow::Periodic);
        let f = |p: Point2| {
            let s = (0.5 * p.x).sin() * (0.3 * p.y).cos();
            [c(s, 0.2 * s), c(-s, p.x.cos() * 0.1)]
        };
        let exact: ExactField = Arc::new(move |p: Point2| {
            let (sx, cx) = ((0.5 * p.x).sin(), (0.5 * p.x).cos());
            let (sy, cy) = ((0.3 * p.y).sin(), (0.3 * p.y).cos());
            let s = ComplexJet::new(
                c(sx * cy, 0.0),
                [c(0.5 * cx * cy, 0.0), c(-0.3 * sx * sy, 0.0)],
                [c(-0.25 * sx * cy, 0.0), c(-0.15 * cx * sy, 0.0), c(-0.09 * sx * cy, 0.0)],
            );
            let q = ComplexJet::new(
                c(0.0, 0.1 * p.x.cos()),
                [c(0.0, -0.1 * p.x.sin()), c(0.0, 0.0)],
                [c(0.0, -0.1 * p.x.cos()), c(0.0, 0.0), c(0.0, 0.0)],
            );
            [s + s.scale_c(c(0.0, 0.2)), q - s]
        });
        for k in [1, 2] {
            let errs: Vec<f64> = [2.0, 1.0, 0.5]
                .iter()
                .map(|&h| {
                    let sp = build_space(plain_mesh(h), Family::VectorContinuous, k, BcMode::None).unwrap();
                    x_norm_error_exact(&sp, &sp.interpolate(f), &set.b, &exact).unwrap()
                })
                .collect();
            let rate = (errs[1] / errs[2]).log2();
            assert!(rate > k as f64 - 0.3, "k = {k}: errors {errs:?}");
        }
    }

    #[test]
    fn consistency_error_domain_checks() {
        let set = test_medium(0.2, Flow::Periodic);
        let sp = build_space(plain_mesh(2.0), Family::VectorContinuous, 2, BcMode::None).unwrap();
        let zero = vec![c(0.0, 0.0); sp.num_dofs()];
        assert!(matches!(consistency_error(&sp, &zero, &set), Err(AnalysisError::Domain(_))));
        let p1 = build_space(plain_mesh(2.0), Family::VectorContinuous, 1, BcMode::None).unwrap();
        let u = p1.interpolate(|_| [c(1.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(consistency_error(&p1, &u, &set), Err(AnalysisError::Domain(_))));
    }

    fn smooth_exact() -> ExactField {
        Arc::new(|p: Point2| {
            let (sx, cx) = ((0.5 * p.x).sin(), (0.5 * p.x).cos());
            let (sy, cy) = ((0.3 * p.y).sin(), (0.3 * p.y).cos());
            let s = ComplexJet::new(
                c(sx * cy, 0.0),
                [c(0.5 * cx * cy, 0.0), c(-0.3 * sx * sy, 0.0)],
                [c(-0.25 * sx * cy, 0.0), c(-0.15 * cx * sy, 0.0), c(-0.09 * sx * cy, 0.0)],
            );
            [s.scale_c(c(1.0, 0.5)), s.scale_c(c(0.0, -0.7))]
        })
    }

    /// The consistency error of interpolants tends to the value obtained
    /// with the exact jets at the same quadrature points.
    #[test]
    fn consistency_error_of_interpolants_converges() {
        let set = test_medium(0.2, Flow::Periodic);
        let exact = smooth_exact();
        let ex = exact.clone();
        let mut gaps = Vec::new();
        for h in [1.0, 0.5] {
            let sp = build_space(plain_mesh(h), Family::VectorContinuous, 4, BcMode::None).unwrap();
            let u = sp.interpolate(|p| ex(p).map(|j| j.v));
            let discrete = consistency_error(&sp, &u, &set).unwrap();
            let tab = Tabulation::new(&sp, default_form_degree(4)).unwrap();
            let (mut num, mut den) = (0.0, 0.0);
            for t in 0..sp.mesh().num_triangles() {
                if sp.mesh().triangle_points(t).iter().any(|p| p.x.hypot(p.y) <= EXCLUSION_RADIUS) {
                    continue;
                }
                for_each_point(&sp, &tab, t, |qp| {
                    let (s1, s2) = strong_parts(&set, &exact(qp.x), qp.x);
                    num += ((s1[0] - s2[0]).norm_sqr() + (s1[1] - s2[1]).norm_sqr()) * qp.w;
                    den += (s1[0].norm_sqr() + s1[1].norm_sqr()) * qp.w;
                });
            }
            let reference = (num / den).sqrt();
            gaps.push((discrete - reference).abs() / reference);
        }
        assert!(gaps[1] < 1e-3 && gaps[1] < gaps[0] / 2.0, "{gaps:?}");
    }

    /// `β_h` from a dense SVD of `M^{-1/2} B A^{-1/2}` on zero-mean
    /// pressures.
    fn dense_beta(x: &FESpace, q: &FESpace) -> f64 {
        let free = x.free_dofs();
        let a = assemble_gram(x, Norm::H1Semi).unwrap().submatrix(&free, &free).to_dense();
        let all: Vec<usize> = (0..q.num_dofs()).collect();
        let b = assemble_div_coupling(x, q).unwrap().submatrix(&all, &free).to_dense();
        let m = assemble_gram(q, Norm::L2).unwrap().to_dense();
        let nq = q.num_dofs();
        let mean = &m * DMatrix::from_element(nq, 1, 1.0);
        let j = mean.column(0).iamax();
        // columns e_i − (mean_i/mean_j) e_j span the zero-mean pressures
        let mut z = DMatrix::zeros(nq, nq - 1);
        for (col, i) in (0..nq).filter(|&i| i != j).enumerate() {
            z[(i, col)] = 1.0;
            z[(j, col)] = -mean[i] / mean[j];
        }
        if nq - 1 > free.len() {
            return 0.0;
        }
        let la = a.cholesky().unwrap().l();
        let lm = (z.transpose() * &m * &z).cholesky().unwrap().l();
        let lai = la.try_inverse().unwrap();
        let lmi = lm.try_inverse().unwrap();
        let cmat = lmi * z.transpose() * b * lai.transpose();
        cmat.singular_values().min()
    }

    #[test]
    fn inf_sup_matches_dense_oracle() {
        for (mesh, k, bc, fam) in [
            (bary_mesh(2.0), 2, BcMode::FullDirichlet, Family::ScalarDiscontinuousZeroMean),
            (bary_mesh(2.0), 2, BcMode::StrongNormal, Family::ScalarDiscontinuousZeroMean),
            (plain_mesh(2.0), 2, BcMode::FullDirichlet, Family::ScalarContinuousZeroMean),
            (plain_mesh(2.0), 3, BcMode::StrongNormal, Family::ScalarDiscontinuousZeroMean),
        ] {
            let x = build_space(mesh.clone(), Family::VectorContinuous, k, bc).unwrap();
            let q = build_space(mesh, fam, k - 1, BcMode::None).unwrap();
            let beta = inf_sup_of_spaces(&x, &q).unwrap();
            let oracle = dense_beta(&x, &q);
            assert!(beta > 0.05, "{bc:?} {fam:?}: {beta}");
            assert!((beta - oracle).abs() <= 1e-8, "{bc:?} {fam:?} k={k}: {beta} vs {oracle}");
        }
    }

    #[test]
    fn p1_p0_locks_on_plain_meshes() {
        for bc in [BcMode::FullDirichlet, BcMode::StrongNormal] {
            let beta = inf_sup_constant(plain_mesh(2.0), 1, bc, Family::ScalarDiscontinuousZeroMean).unwrap();
            assert!(beta <= 1e-8, "{bc:?}: {beta}");
        }
    }

    #[test]
    fn inf_sup_rejects_bad_spaces() {
        assert!(inf_sup_constant(plain_mesh(2.0), 2, BcMode::None, Family::ScalarDiscontinuousZeroMean).is_err());
        assert!(inf_sup_constant(plain_mesh(2.0), 1, BcMode::FullDirichlet, Family::ScalarContinuousZeroMean).is_err());
    }

    #[test]
    fn mach_report_test_medium() {
        let set = test_medium(0.2, Flow::Periodic);
        let r = mach_report(&set, 0.5, 512).unwrap();
        assert!((r.bound_heterogeneous - 0.06).abs() <= 0.15 * 0.06, "{r:?}");
        assert!((0.0..std::f64::consts::FRAC_PI_2).contains(&r.theta));
        assert!((r.bound_heterogeneous - r.bound_homogeneous * r.theta.cos().powi(2)).abs() < 1e-15);
        assert!((r.bound_heterogeneous - r.bound_homogeneous / (1.0 + r.theta.tan().powi(2))).abs() < 1e-14);
        assert_eq!(r.admissible, r.mach_sq < r.bound_heterogeneous);
        assert!(r.admissible);
        let fast = mach_report(&test_medium(1.5, Flow::Periodic), 0.5, 512).unwrap();
        assert!((fast.mach_sq - 0.115).abs() < 0.0115 && !fast.admissible);
        let still = mach_report(&test_medium(0.0, Flow::Periodic), 0.5, 128).unwrap();
        assert!(still.mach_sq == 0.0 && still.admissible);
    }

    #[test]
    fn mach_report_homogeneous_medium() {
        let set = CoefficientSet::constant(1.2, 2.0, 3.0, 0.1, [0.3, 0.0]);
        let r = mach_report(&set, 0.8, 64).unwrap();
        assert_eq!((r.c_m, r.theta), (0.0, 0.0));
        assert_eq!(r.bound_heterogeneous, r.bound_homogeneous);
        assert!((r.bound_homogeneous - 0.64).abs() < 1e-15);
        assert!((r.mach_sq - 0.045).abs() < 1e-15);
        assert!(mach_report(&set, 0.0, 64).is_err());
        assert!(mach_report(&set, 1.5, 64).is_err());
    }

    #[test]
    fn m_matrix_eigenvalue() {
        assert!((min_eig_2x2([[2.0, 0.0], [0.0, -1.0]]) + 1.0).abs() < 1e-15);
        assert!((min_eig_2x2([[1.0, 2.0], [2.0, 1.0]]) + 1.0).abs() < 1e-15);
    }

    fn sv_pair(h: f64, bc: BcMode) -> (FESpace, FESpace) {
        let m = bary_mesh(h);
        let x = build_space(m.clone(), Family::VectorContinuous, 2, bc).unwrap();
        let q = build_space(m, Family::ScalarDiscontinuousZeroMean, 1, BcMode::None).unwrap();
        (x, q)
    }

    fn constrained_random(x: &FESpace, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        let mut u = random_field(x.num_dofs(), rng);
        x.apply_constraints(&mut u);
        u
    }

    fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn projector_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for bc in [BcMode::FullDirichlet, BcMode::StrongNormal] {
            let (x, q) = sv_pair(2.0, bc);
            let p = HelmholtzProjector::new(&x, &q).unwrap();
            for _ in 0..3 {
                let u = constrained_random(&x, &mut rng);
                let (v, w) = p.project(&u).unwrap();
                let sum: Vec<Complex64> = v.iter().zip(&w).map(|(a, b)| a + b).collect();
                assert!(max_diff(&sum, &u) < 1e-13);
                let (vv, vw) = p.project(&v).unwrap();
                assert!(max_diff(&vv, &v) < 1e-10 && vw.iter().all(|z| z.norm() < 1e-10));
                let (wv, _) = p.project(&w).unwrap();
                assert!(wv.iter().all(|z| z.norm() < 1e-10));
                let t = p.apply_tn(&u).unwrap();
                assert!(max_diff(&p.apply_tn(&t).unwrap(), &u) < 1e-9);
                assert!(max_diff(&p.apply_tn(&v).unwrap(), &v) < 1e-10);
            }
        }
    }

    /// Divergence of `v` matches that of `u` at quadrature points, since the
    /// divergence of a continuous `P_k` field lies in discontinuous `P_{k-1}`.
    #[test]
    fn scott_vogelius_projection_keeps_divergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (x, q) = sv_pair(2.0, BcMode::StrongNormal);
        let p = HelmholtzProjector::new(&x, &q).unwrap();
        let tab = Tabulation::new(&x, 6).unwrap();
        for _ in 0..3 {
            let u = constrained_random(&x, &mut rng);
            let (v, _) = p.project(&u).unwrap();
            for t in 0..x.mesh().num_triangles() {
                for_each_point(&x, &tab, t, |qp| {
                    let (ju, jv) = (field_jets(&x, &u, t, qp.phys), field_jets(&x, &v, t, qp.phys));
                    let du = ju[0].g[0] + ju[1].g[1];
                    let dv = jv[0].g[0] + jv[1].g[1];
                    assert!((du - dv).norm() <= 1e-10 * (1.0 + du.norm()), "{du} vs {dv}");
                });
            }
        }
    }

    #[test]
    fn projection_is_gradient_orthogonal_to_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (x, q) = sv_pair(2.0, BcMode::FullDirichlet);
        let p = HelmholtzProjector::new(&x, &q).unwrap();
        let free = x.free_dofs();
        let all: Vec<usize> = (0..q.num_dofs()).collect();
        let b = assemble_div_coupling(&x, &q).unwrap().submatrix(&all, &free).to_dense();
        let a = assemble_gram(&x, Norm::H1Semi).unwrap();
        // kernel of B from the eigenvectors of BᵀB with zero eigenvalue
        let eig = (b.transpose() * &b).symmetric_eigen();
        let top = eig.eigenvalues.max();
        let mut kernel = Vec::new();
        for (r, &lam) in eig.eigenvalues.iter().enumerate() {
            if lam.abs() < 1e-12 * top && kernel.len() < 8 {
                let mut w = vec![c(0.0, 0.0); x.num_dofs()];
                for (j, &i) in free.iter().enumerate() {
                    w[i] = c(eig.eigenvectors[(j, r)], 0.0);
                }
                kernel.push(w);
            }
        }
        assert!(!kernel.is_empty());
        for _ in 0..3 {
            let u = constrained_random(&x, &mut rng);
            let (v, _) = p.project(&u).unwrap();
            let av = a.map(|z| c(z, 0.0)).matvec(&v);
            for w in &kernel {
                let s: Complex64 = w.iter().zip(&av).map(|(a, b)| a.conj() * b).sum();
                assert!(s.norm() < 1e-9, "{s}");
            }
        }
    }

    #[test]
    fn tn_bounded_in_x_norm() {
        let set = test_medium(0.2, Flow::Periodic);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for h in [2.0, 1.0] {
            let (x, q) = sv_pair(h, BcMode::StrongNormal);
            let g = assemble_gram(&x, Norm::X(&set.b)).unwrap().map(|z| c(z, 0.0));
            let p = HelmholtzProjector::new(&x, &q).unwrap();
            for _ in 0..20 {
                let u = constrained_random(&x, &mut rng);
                let t = p.apply_tn(&u).unwrap();
                let ratio = (g.form(&t, &t).re / g.form(&u, &u).re).sqrt();
                assert!(ratio <= 10.0, "h = {h}: ratio {ratio}");
            }
        }
    }

    #[test]
    fn unstable_pair_is_rejected() {
        let m = plain_mesh(2.0);
        let x = build_space(m.clone(), Family::VectorContinuous, 1, BcMode::FullDirichlet).unwrap();
        let q = build_space(m, Family::ScalarDiscontinuousZeroMean, 0, BcMode::None).unwrap();
        assert!(matches!(HelmholtzProjector::new(&x, &q), Err(AnalysisError::UnstablePair(_))));
    }

    #[test]
    fn stability_constant_of_gram_multiples() {
        let sp = build_space(plain_mesh(2.0), Family::VectorContinuous, 2, BcMode::None).unwrap();
        let set = test_medium(0.2, Flow::Periodic);
        let g = assemble_gram(&sp, Norm::X(&set.b)).unwrap();
        let a = g.map(|z| c(z, 0.0));
        assert!((stability_constant(&a, &g).unwrap() - 1.0).abs() < 1e-8);
        let a2 = g.map(|z| c(2.0 * z, 0.0));
        assert!((stability_constant(&a2, &g).unwrap() - 0.5).abs() < 1e-8);
    }

    #[test]
    fn stability_constant_matches_dense_norm() {
        let mesh = Arc::new(generate_square_mesh(2.0, 1, true).unwrap());
        let sp = build_space(mesh, Family::VectorContinuous, 2, BcMode::Periodic).unwrap();
        let set = test_medium(0.2, Flow::Periodic);
        let a = assemble_galbrun(&sp, &set).unwrap();
        let g = assemble_gram(&sp, Norm::X(&set.b)).unwrap();
        let est = stability_constant(&a, &g).unwrap();
        // with G = LLᴴ the dual-to-primal norm of A⁻¹ is ‖Lᴴ A⁻¹ L‖₂
        let gd = g.to_dense().map(|z| c(z, 0.0));
        let l = gd.clone().cholesky().unwrap().l();
        let ainv = a.to_dense().try_inverse().unwrap();
        let op = l.adjoint() * ainv * &l;
        let oracle = op.singular_values().max();
        assert!((est - oracle).abs() <= 1e-6 * oracle, "{est} vs {oracle}");
    }

    #[test]
    fn element_map_reference_points_round_trip() {
        let m = plain_mesh(1.0);
        let map = ElementMap::new(&m, 7);
        let x = map.map([0.2, 0.3]);
        let loc = m.locate_point_from(x, 0).unwrap();
        assert_eq!(loc.triangle, 7);
        assert!((loc.barycentric[1] - 0.2).abs() < 1e-12 && (loc.barycentric[2] - 0.3).abs() < 1e-12);
    }
}
