//! Single Galbrun solves: mesh and space construction, variant and boundary
//! dispatch, assembly, constraint handling and the linear solve.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::assembly::{
    assemble_galbrun, assemble_nitsche, assemble_rhs, assemble_taylor_hood, ThWeighting, NITSCHE_LAMBDA,
};
use crate::coefficients::{gaussian, gaussian_source, test_medium, CoefficientSet, Flow, SourceField};
use crate::error::SolveError;
use crate::fem::{build_space, BcMode, FESpace, Family};
use crate::jet::{ComplexJet, RealJet};
use crate::linalg::{sparse_solve, ComplexSparseMatrix, SolveReport};
use crate::mesh::{barycentric_refine, generate_square_mesh, Mesh, Point2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshFamily {
    Unstructured,
    Barycentric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    ScottVogelius,
    TaylorHood,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    Nitsche,
    StrongNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowChoice {
    PeriodicFlow,
    NormalFlow,
}

impl From<FlowChoice> for Flow {
    fn from(f: FlowChoice) -> Self {
        match f {
            FlowChoice::PeriodicFlow => Flow::Periodic,
            FlowChoice::NormalFlow => Flow::Normal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Weighted,
    Unweighted,
}

/// Parameters of one solve. Defaults follow the numerical experiments:
/// `ω = 0.78·2π`, `γ = 0.1`, `λ = 2¹⁵`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemConfig {
    pub h: f64,
    pub k: usize,
    pub seed: u64,
    pub mesh: MeshFamily,
    pub variant: Variant,
    pub bc: Boundary,
    pub lambda: f64,
    pub alpha: f64,
    pub flow: FlowChoice,
    pub omega: f64,
    pub gamma: f64,
    pub tol: f64,
    pub projection: Weighting,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            h: 0.5,
            k: 2,
            seed: 0,
            mesh: MeshFamily::Barycentric,
            variant: Variant::ScottVogelius,
            bc: Boundary::Periodic,
            lambda: NITSCHE_LAMBDA,
            alpha: 0.2,
            flow: FlowChoice::PeriodicFlow,
            omega: 0.78 * 2.0 * PI,
            gamma: 0.1,
            tol: 1e-8,
            projection: Weighting::Weighted,
        }
    }
}

impl ProblemConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |m: String| Err(SolveError::InvalidConfig(m));
        if !(self.h > 0.0 && self.h <= 4.0) {
            return bad(format!("h = {} outside (0, 4]", self.h));
        }
        if !(1..=5).contains(&self.k) {
            return bad(format!("k = {} outside 1..=5", self.k));
        }
        if self.variant == Variant::TaylorHood && self.k < 2 {
            return bad("taylor_hood needs k >= 2".into());
        }
        if self.bc == Boundary::Nitsche && !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("nitsche lambda = {} must be positive", self.lambda));
        }
        if !(self.omega != 0.0 && self.omega.is_finite()) {
            return bad("omega must be finite and nonzero".into());
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma = {} must be finite and nonnegative", self.gamma));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha = {} must be finite and nonnegative", self.alpha));
        }
        if !(self.tol > 0.0 && self.tol <= 1e-2) {
            return bad(format!("tol = {} outside (0, 1e-2]", self.tol));
        }
        Ok(())
    }

    pub fn coefficients(&self) -> CoefficientSet {
        let mut c = test_medium(self.alpha, self.flow.into());
        c.omega = self.omega;
        let g = self.gamma;
        c.gamma = Arc::new(move |_| RealJet::constant(g));
        c
    }

    fn bc_mode(&self) -> BcMode {
        match self.bc {
            Boundary::Periodic => BcMode::Periodic,
            Boundary::Nitsche => BcMode::Nitsche,
            Boundary::StrongNormal => BcMode::StrongNormal,
        }
    }
}

/// Generates the mesh of a configuration (periodic matching for periodic
/// problems, one barycentric refinement for the barycentric family).
pub fn build_mesh(cfg: &ProblemConfig) -> Result<Mesh, SolveError> {
    let base = generate_square_mesh(cfg.h, cfg.seed, cfg.bc == Boundary::Periodic)?;
    Ok(match cfg.mesh {
        MeshFamily::Unstructured => base,
        MeshFamily::Barycentric => barycentric_refine(&base),
    })
}

/// Right-hand side of a solve.
#[derive(Clone)]
pub enum Rhs {
    GaussianSource,
    Manufactured,
    Custom(SourceField),
}

/// A discrete solution with everything needed to post-process it.
#[derive(Debug, Clone)]
pub struct Solution {
    pub space: FESpace,
    pub coefficients: CoefficientSet,
    pub velocity: Vec<Complex64>,
    /// Pseudo-pressure blocks `(σ, τ)` of the Taylor-Hood variant.
    pub pressure: Option<Vec<Complex64>>,
    pub config: ProblemConfig,
    pub report: SolveReport,
}

/// Solves the discrete Galbrun problem described by `cfg`.
pub fn solve_galbrun(cfg: &ProblemConfig, rhs: &Rhs) -> Result<Solution, SolveError> {
    cfg.validate()?;
    let mesh = Arc::new(build_mesh(cfg)?);
    solve_on_mesh(cfg, mesh, rhs)
}

/// As [`solve_galbrun`] on a given mesh; `cfg.h`, `cfg.seed` and `cfg.mesh`
/// are only recorded.
pub fn solve_on_mesh(cfg: &ProblemConfig, mesh: Arc<Mesh>, rhs: &Rhs) -> Result<Solution, SolveError> {
    cfg.validate()?;
    let c = cfg.coefficients();
    let space = build_space(mesh.clone(), Family::VectorContinuous, cfg.k, cfg.bc_mode())?;
    let source = match rhs {
        Rhs::GaussianSource => gaussian_source(&c),
        Rhs::Manufactured => manufactured_solution(&c).source,
        Rhs::Custom(s) => s.clone(),
    };
    let f = assemble_rhs(&space, &source)?;
    let mut a = match cfg.variant {
        Variant::ScottVogelius => assemble_galbrun(&space, &c)?,
        Variant::TaylorHood => {
            let q = build_space(mesh, Family::ScalarContinuousZeroMean, cfg.k - 1, BcMode::None)?;
            let w = match cfg.projection {
                Weighting::Weighted => ThWeighting::Weighted,
                Weighting::Unweighted => ThWeighting::Unweighted,
            };
            assemble_taylor_hood(&space, &q, &c, w)?.matrix
        }
    };
    let nu = space.num_dofs();
    if cfg.bc == Boundary::Nitsche {
        let nit = assemble_nitsche(&space, &c, cfg.lambda)?;
        a = add_leading_block(&a, &nit);
    }
    let n = a.nrows();
    let mut b = vec![Complex64::default(); n];
    b[..nu].copy_from_slice(&f);
    let constrained = space.constrained();
    let free: Vec<usize> = (0..n).filter(|&i| i >= nu || !constrained[i]).collect();
    let (x, report) = if free.len() == n {
        sparse_solve(&a, &b, cfg.tol)?
    } else {
        let af = a.submatrix(&free, &free);
        let bf: Vec<Complex64> = free.iter().map(|&i| b[i]).collect();
        let (xf, report) = sparse_solve(&af, &bf, cfg.tol)?;
        let mut x = vec![Complex64::default(); n];
        for (&i, v) in free.iter().zip(xf) {
            x[i] = v;
        }
        (x, report)
    };
    let pressure = (n > nu).then(|| x[nu..].to_vec());
    let mut velocity = x;
    velocity.truncate(nu);
    Ok(Solution { space, coefficients: c, velocity, pressure, config: cfg.clone(), report })
}

/// `a` with `block` added to its leading square block.
fn add_leading_block(a: &ComplexSparseMatrix, block: &ComplexSparseMatrix) -> ComplexSparseMatrix {
    if a.nrows() == block.nrows() {
        return a.add_scaled(block, Complex64::new(1.0, 0.0));
    }
    let rest = a.nrows() - block.nrows();
    let pad = ComplexSparseMatrix::zeros(rest, rest);
    let big = ComplexSparseMatrix::block([[Some(block), None], [None, Some(&pad)]]);
    a.add_scaled(&big, Complex64::new(1.0, 0.0))
}

/// Closed-form field with value, gradient and Hessian per component.
pub type ExactField = Arc<dyn Fn(Point2) -> [ComplexJet; 2] + Send + Sync>;

pub struct Manufactured {
    pub exact: ExactField,
    pub source: SourceField,
}

/// `(1/ρ)((1+i)g, −(1+i)g)` and the source obtained by applying the strong
/// operator to it.
pub fn manufactured_solution(c: &CoefficientSet) -> Manufactured {
    let rho = c.rho.clone();
    let exact: ExactField = Arc::new(move |p| {
        let s = (gaussian(p) / rho(p)).to_complex().scale_c(Complex64::new(1.0, 1.0));
        [s, -s]
    });
    let cc = c.clone();
    let ex = exact.clone();
    let source: SourceField = Arc::new(move |p| {
        let u = ex(p);
        strong_operator(&cc, &u, p)
    });
    Manufactured { exact, source }
}

/// The two parts `S₁ = −ρ(ω+i∂_b+iΩ×)²u − iωγρu` and
/// `S₂ = ∇(ρc_s² div u) − (div u)∇p + ∇(∇p·u) − (Hess p − ρ Hess φ)u`
/// of the strong operator `S₁ − S₂` at `x`, from second-order jets of `u`.
pub fn strong_parts(c: &CoefficientSet, u: &[ComplexJet; 2], x: Point2) -> ([Complex64; 2], [Complex64; 2]) {
    let cv = c.eval(x);
    let i = Complex64::new(0.0, 1.0);
    let om = c.omega;
    let rot = c.rotation;
    let rho = cv.rho.v;
    let b = cv.b_value();
    // ∂_b u and ∂_b ∂_b u
    let db = |j: &ComplexJet| j.g[0] * b[0] + j.g[1] * b[1];
    let ddb = |j: &ComplexJet| {
        let h = j.hessian();
        let mut s = Complex64::default();
        for m in 0..2 {
            for n in 0..2 {
                // b_m ∂_m (b_n ∂_n u) = b_m (∂_m b_n) ∂_n u + b_m b_n ∂_mn u
                s += j.g[n] * (b[m] * cv.b[n].g[m]) + h[m][n] * (b[m] * b[n]);
            }
        }
        s
    };
    let val = [u[0].v, u[1].v];
    let d1 = [db(&u[0]), db(&u[1])];
    let d2 = [ddb(&u[0]), ddb(&u[1])];
    // L v = ωv + i∂_b v + iΩ(−v₂, v₁)
    let lu = [val[0] * om + i * d1[0] - i * rot * val[1], val[1] * om + i * d1[1] + i * rot * val[0]];
    let l_d1 = [d1[0] * om + i * d2[0] - i * rot * d1[1], d1[1] * om + i * d2[1] + i * rot * d1[0]];
    // L(Lu) = ω Lu + i∂_b(Lu) + iΩ×(Lu); ∂_b(Lu) = L(∂_b u) since ω, Ω constant
    let llu = [lu[0] * om + i * l_d1[0] - i * rot * lu[1], lu[1] * om + i * l_d1[1] + i * rot * lu[0]];
    let damp = i * om * cv.gamma.v * rho;
    let s1 = [-llu[0] * rho - damp * val[0], -llu[1] * rho - damp * val[1]];

    let bulk = cv.rho * cv.cs2;
    let hu = [u[0].hessian(), u[1].hessian()];
    let div = u[0].g[0] + u[1].g[1];
    // ∂_m div u
    let grad_div = [hu[0][0][0] + hu[1][1][0], hu[0][0][1] + hu[1][1][1]];
    let hp = cv.p.hessian();
    let gp = cv.p.g;
    let pot = cv.potential_hessian();
    let mut s2 = [Complex64::default(); 2];
    for m in 0..2 {
        let grad_bulk_div = grad_div[m] * bulk.v + div * bulk.g[m];
        // ∂_m(∇p·u) = Σ_n (∂_mn p) u_n + ∂_n p ∂_m u_n
        let grad_pu: Complex64 = (0..2).map(|n| val[n] * hp[m][n] + u[n].g[m] * gp[n]).sum();
        let pot_u: Complex64 = (0..2).map(|n| val[n] * pot[m][n]).sum();
        s2[m] = grad_bulk_div - div * gp[m] + grad_pu - pot_u;
    }
    (s1, s2)
}

/// Strong operator `S₁ − S₂` applied to `u` at `x`.
pub fn strong_operator(c: &CoefficientSet, u: &[ComplexJet; 2], x: Point2) -> [Complex64; 2] {
    let (s1, s2) = strong_parts(c, u, x);
    [s1[0] - s2[0], s1[1] - s2[1]]
}
