//! Global sparse operators: the Galbrun form, Nitsche boundary terms, the
//! Taylor-Hood saddle system, Gram and coupling matrices, load vectors.
//!
//! Test functions carry the conjugation: entry `(i, j)` of a matrix is
//! `a(φ_j, φ_i)`, so `vᴴ A u = a(u, v)`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::coefficients::{CoefficientSet, CoefficientValues, SourceField, VectorField};
use crate::error::FemError;
use crate::fem::basis::{BasisEval, EDGE_VERTICES};
use crate::fem::quadrature::{edge_quadrature, triangle_quadrature, QuadRule, MAX_DEGREE};
use crate::fem::space::{BcMode, FESpace, Family};
use crate::fem::ElementMap;
use crate::linalg::{CsrMatrix, PatternBuilder, Scalar};
use crate::mesh::{Point2, Side};

pub use crate::linalg::{ComplexSparseMatrix, RealSparseMatrix};

pub type ComplexVector = Vec<Complex64>;

/// Default Nitsche penalty parameter `λ`.
pub const NITSCHE_LAMBDA: f64 = 32768.0;

const CHUNK: usize = 512;

fn i_unit() -> Complex64 {
    Complex64::new(0.0, 1.0)
}

/// Quadrature degree used for bilinear forms with smooth coefficients.
pub fn default_form_degree(k: usize) -> usize {
    (2 * k + 4).min(MAX_DEGREE)
}

/// Quadrature degree used for the sharply peaked source terms.
pub fn default_source_degree(k: usize) -> usize {
    (2 * k + 6).min(MAX_DEGREE)
}

/// Reference basis tabulated at the points of a rule.
pub struct Tabulation {
    pub rule: QuadRule,
    pub reference: Vec<BasisEval>,
}

impl Tabulation {
    pub fn new(space: &FESpace, degree: usize) -> Result<Self, FemError> {
        let rule = triangle_quadrature(degree)?;
        let reference = rule.points.iter().map(|&r| space.basis().eval(r)).collect();
        Ok(Self { rule, reference })
    }
}

/// Physical data of one quadrature point.
pub struct QuadPoint<'a> {
    pub x: Point2,
    /// Quadrature weight times `|det J|`.
    pub w: f64,
    pub phys: &'a BasisEval,
}

/// Calls `f` for every quadrature point of triangle `t`.
pub fn for_each_point(space: &FESpace, tab: &Tabulation, t: usize, mut f: impl FnMut(&QuadPoint<'_>)) {
    let map = ElementMap::new(space.mesh(), t);
    let jac = map.det.abs();
    let mut phys = BasisEval::default();
    for (q, &r) in tab.rule.points.iter().enumerate() {
        map.push_forward(&tab.reference[q], &mut phys);
        f(&QuadPoint { x: map.map(r), w: tab.rule.weights[q] * jac, phys: &phys });
    }
}

fn same_mesh(a: &FESpace, b: &FESpace) -> Result<(), FemError> {
    if std::sync::Arc::ptr_eq(a.mesh_arc(), b.mesh_arc())
        || (a.mesh().num_triangles() == b.mesh().num_triangles() && a.mesh().vertices() == b.mesh().vertices())
    {
        Ok(())
    } else {
        Err(FemError::IncompatibleSpace("spaces live on different meshes".into()))
    }
}

fn require_vector(space: &FESpace, what: &str) -> Result<(), FemError> {
    if space.family().is_vector() {
        Ok(())
    } else {
        Err(FemError::IncompatibleSpace(format!("{what} needs a vector velocity space")))
    }
}

/// Element loop: `local(t, out)` fills the row-major block of triangle `t`
/// (rows = `rows(t)`, cols = `cols(t)`). Blocks are computed in parallel and
/// summed in the order given by `order`, so the result does not depend on
/// the number of worker threads.
fn assemble_with<T, R, C, L>(nrows: usize, ncols: usize, order: &[usize], rows: R, cols: C, local: L) -> CsrMatrix<T>
where
    T: Scalar,
    R: Fn(usize) -> Vec<usize> + Sync,
    C: Fn(usize) -> Vec<usize> + Sync,
    L: Fn(usize, &mut [T]) + Sync,
{
    let mut pb = PatternBuilder::new(nrows, ncols);
    for &t in order {
        pb.add_block(&rows(t), &cols(t));
    }
    let mut m: CsrMatrix<T> = pb.build();
    for chunk in order.chunks(CHUNK) {
        let blocks: Vec<(Vec<usize>, Vec<usize>, Vec<T>)> = chunk
            .par_iter()
            .map(|&t| {
                let (r, c) = (rows(t), cols(t));
                let mut buf = vec![T::default(); r.len() * c.len()];
                local(t, &mut buf);
                (r, c, buf)
            })
            .collect();
        for (r, c, b) in &blocks {
            m.add_block(r, c, b);
        }
    }
    m
}

fn all_elements(space: &FESpace) -> Vec<usize> {
    (0..space.mesh().num_triangles()).collect()
}

/// Per-DOF data of the vector basis at one point. Local DOF `2a + c` is
/// `φ_a e_c`.
struct VectorBasisPoint {
    val: Vec<[f64; 2]>,
    div: Vec<f64>,
    /// `(ω + i∂_b + iΩ×) φ`.
    lop: Vec<[Complex64; 2]>,
    /// `∇p · φ`.
    gp: Vec<f64>,
}

impl VectorBasisPoint {
    fn new(phys: &BasisEval, c: &CoefficientValues, omega: f64, rotation: f64) -> Self {
        let nb = phys.values.len();
        let b = c.b_value();
        let mut out = Self {
            val: Vec::with_capacity(2 * nb),
            div: Vec::with_capacity(2 * nb),
            lop: Vec::with_capacity(2 * nb),
            gp: Vec::with_capacity(2 * nb),
        };
        for a in 0..nb {
            let v = phys.values[a];
            let g = phys.grads[a];
            let conv = b[0] * g[0] + b[1] * g[1];
            let own = Complex64::new(omega * v, conv);
            let rot = i_unit() * (rotation * v);
            out.val.push([v, 0.0]);
            out.div.push(g[0]);
            out.lop.push([own, rot]);
            out.gp.push(c.p.g[0] * v);
            out.val.push([0.0, v]);
            out.div.push(g[1]);
            out.lop.push([-rot, own]);
            out.gp.push(c.p.g[1] * v);
        }
        out
    }
}

/// Which groups of Galbrun terms to include.
#[derive(Debug, Clone, Copy)]
struct GalbrunTerms {
    /// `⟨c_s²ρ div u, div u′⟩ + ⟨div u, ∇p·u′⟩ + ⟨∇p·u, div u′⟩`.
    divergence: bool,
}

fn galbrun_local(
    space: &FESpace,
    c: &CoefficientSet,
    tab: &Tabulation,
    terms: GalbrunTerms,
    t: usize,
    out: &mut [Complex64],
) {
    let n = space.dofs_per_element();
    let omega = c.omega;
    for_each_point(space, tab, t, |qp| {
        let cv = c.eval(qp.x);
        let d = VectorBasisPoint::new(qp.phys, &cv, omega, c.rotation);
        let rho = cv.rho.v;
        let bulk = cv.bulk();
        let hess = cv.potential_hessian();
        let damp = Complex64::new(0.0, -omega * cv.gamma.v * rho);
        for i in 0..n {
            let (ci, li) = (i % 2, [d.lop[i][0].conj(), d.lop[i][1].conj()]);
            let vi = d.val[i][ci];
            let row = &mut out[i * n..(i + 1) * n];
            for (j, e) in row.iter_mut().enumerate() {
                let cj = j % 2;
                let vj = d.val[j][cj];
                let mut real = hess[ci][cj] * vj * vi;
                if terms.divergence {
                    real += bulk * d.div[j] * d.div[i] + d.div[j] * d.gp[i] + d.gp[j] * d.div[i];
                }
                let conv = d.lop[j][0] * li[0] + d.lop[j][1] * li[1];
                let mut v = Complex64::new(real, 0.0) - conv * rho;
                if ci == cj {
                    v += damp * (vj * vi);
                }
                *e += v * qp.w;
            }
        }
    });
}

fn galbrun_matrix(
    space: &FESpace,
    c: &CoefficientSet,
    degree: usize,
    terms: GalbrunTerms,
    order: &[usize],
) -> Result<ComplexSparseMatrix, FemError> {
    require_vector(space, "the Galbrun form")?;
    if degree < 2 * space.degree() + 2 {
        return Err(FemError::UnsupportedQuadratureDegree(degree));
    }
    let tab = Tabulation::new(space, degree)?;
    let n = space.num_dofs();
    Ok(assemble_with(
        n,
        n,
        order,
        |t| space.element_dofs(t),
        |t| space.element_dofs(t),
        |t, out| galbrun_local(space, c, &tab, terms, t, out),
    ))
}

/// The Galbrun sesquilinear form on a vector space, all terms.
pub fn assemble_galbrun(space: &FESpace, c: &CoefficientSet) -> Result<ComplexSparseMatrix, FemError> {
    assemble_galbrun_with_degree(space, c, default_form_degree(space.degree()))
}

pub fn assemble_galbrun_with_degree(
    space: &FESpace,
    c: &CoefficientSet,
    degree: usize,
) -> Result<ComplexSparseMatrix, FemError> {
    galbrun_matrix(space, c, degree, GalbrunTerms { divergence: true }, &all_elements(space))
}

/// Element boundary facets: `(triangle, local vertex opposite, side)`.
fn boundary_facets(space: &FESpace) -> Vec<(usize, usize, Side)> {
    let mesh = space.mesh();
    let mut out = Vec::new();
    for t in 0..mesh.num_triangles() {
        let p = mesh.triangle_points(t);
        for i in 0..3 {
            if mesh.neighbor(t, i).is_none() {
                if let Some(side) = Side::of_segment(p[(i + 1) % 3], p[(i + 2) % 3]) {
                    out.push((t, i, side));
                }
            }
        }
    }
    out
}

/// Reference endpoints of the edge opposite local vertex `i`.
fn opposite_edge(i: usize) -> ([f64; 2], [f64; 2]) {
    let corners = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let [a, b] = EDGE_VERTICES[(i + 1) % 3];
    (corners[a], corners[b])
}

/// Nitsche terms for `u·ν = 0`:
/// `−⟨w u·ν, div u′⟩ − ⟨w div u, u′·ν⟩ + (λk²/h_e)⟨w u·ν, u′·ν⟩` on `∂Ω`,
/// `w = c_s²ρ`, `h_e` the facet length.
pub fn assemble_nitsche(space: &FESpace, c: &CoefficientSet, lambda: f64) -> Result<ComplexSparseMatrix, FemError> {
    require_vector(space, "Nitsche terms")?;
    if space.bc_mode() == BcMode::Periodic {
        return Err(FemError::IncompatibleSpace("Nitsche terms on a periodic space".into()));
    }
    let k = space.degree();
    let rule = edge_quadrature((2 * k + 2).min(MAX_DEGREE))?;
    let facets = boundary_facets(space);
    let n = space.num_dofs();
    let nl = space.dofs_per_element();
    let order: Vec<usize> = (0..facets.len()).collect();
    let m = assemble_with(
        n,
        n,
        &order,
        |f| space.element_dofs(facets[f].0),
        |f| space.element_dofs(facets[f].0),
        |f, out: &mut [Complex64]| {
            let (t, i, side) = facets[f];
            let map = ElementMap::new(space.mesh(), t);
            let (ra, rb) = opposite_edge(i);
            let len = map.map(ra).dist(map.map(rb));
            let pen = lambda * (k * k) as f64 / len;
            let nu = side.normal();
            let mut phys = BasisEval::default();
            for (&s, &wq) in rule.points.iter().zip(&rule.weights) {
                let r = [ra[0] + s * (rb[0] - ra[0]), ra[1] + s * (rb[1] - ra[1])];
                map.push_forward(&space.basis().eval(r), &mut phys);
                let x = map.map(r);
                let bulk = (c.cs2)(x).v * (c.rho)(x).v;
                let w = wq * len * bulk;
                let nb = phys.values.len();
                let mut un = vec![0.0; 2 * nb];
                let mut dv = vec![0.0; 2 * nb];
                for a in 0..nb {
                    for comp in 0..2 {
                        un[2 * a + comp] = phys.values[a] * nu[comp];
                        dv[2 * a + comp] = phys.grads[a][comp];
                    }
                }
                for ii in 0..nl {
                    for jj in 0..nl {
                        let v = -un[jj] * dv[ii] - dv[jj] * un[ii] + pen * un[jj] * un[ii];
                        out[ii * nl + jj] += Complex64::new(v * w, 0.0);
                    }
                }
            }
        },
    );
    Ok(m)
}

/// Load vector `⟨s, φ_i⟩`.
pub fn assemble_rhs(space: &FESpace, s: &SourceField) -> Result<ComplexVector, FemError> {
    assemble_rhs_with_degree(space, s, default_source_degree(space.degree()))
}

pub fn assemble_rhs_with_degree(space: &FESpace, s: &SourceField, degree: usize) -> Result<ComplexVector, FemError> {
    let tab = Tabulation::new(space, degree)?;
    let nc = space.components();
    let ne = space.mesh().num_triangles();
    let locals: Vec<Vec<Complex64>> = (0..ne)
        .into_par_iter()
        .map(|t| {
            let mut loc = vec![Complex64::default(); space.dofs_per_element()];
            for_each_point(space, &tab, t, |qp| {
                let sv = s(qp.x);
                for (a, &v) in qp.phys.values.iter().enumerate() {
                    for comp in 0..nc {
                        loc[nc * a + comp] += sv[comp] * (v * qp.w);
                    }
                }
            });
            loc
        })
        .collect();
    let mut out = vec![Complex64::default(); space.num_dofs()];
    for (t, loc) in locals.iter().enumerate() {
        for (d, v) in space.element_dofs(t).into_iter().zip(loc) {
            out[d] += *v;
        }
    }
    Ok(out)
}

/// Inner products for Gram matrices.
#[derive(Clone)]
pub enum Norm<'a> {
    L2,
    H1Semi,
    /// `‖div u‖² + ‖b·∇u‖² + ‖u‖²`.
    X(&'a VectorField),
}

/// Gram matrix of the requested inner product.
pub fn assemble_gram(space: &FESpace, norm: Norm<'_>) -> Result<RealSparseMatrix, FemError> {
    if matches!(norm, Norm::X(_)) {
        require_vector(space, "the X-norm")?;
    }
    let k = space.degree().max(1);
    let tab = Tabulation::new(space, default_form_degree(k))?;
    let n = space.num_dofs();
    let nc = space.components();
    let nl = space.dofs_per_element();
    Ok(assemble_with(
        n,
        n,
        &all_elements(space),
        |t| space.element_dofs(t),
        |t| space.element_dofs(t),
        |t, out: &mut [f64]| {
            for_each_point(space, &tab, t, |qp| {
                let ph = qp.phys;
                let b = match &norm {
                    Norm::X(bf) => {
                        let j = bf(qp.x);
                        [j[0].v, j[1].v]
                    }
                    _ => [0.0; 2],
                };
                for i in 0..nl {
                    let (a, ci) = (i / nc, i % nc);
                    for j in 0..nl {
                        let (bb, cj) = (j / nc, j % nc);
                        let same = ci == cj;
                        let v = match norm {
                            Norm::L2 => {
                                if same {
                                    ph.values[a] * ph.values[bb]
                                } else {
                                    0.0
                                }
                            }
                            Norm::H1Semi => {
                                if same {
                                    ph.grads[a][0] * ph.grads[bb][0] + ph.grads[a][1] * ph.grads[bb][1]
                                } else {
                                    0.0
                                }
                            }
                            Norm::X(_) => {
                                let div = ph.grads[a][ci] * ph.grads[bb][cj];
                                let rest = if same {
                                    let da = b[0] * ph.grads[a][0] + b[1] * ph.grads[a][1];
                                    let db = b[0] * ph.grads[bb][0] + b[1] * ph.grads[bb][1];
                                    da * db + ph.values[a] * ph.values[bb]
                                } else {
                                    0.0
                                };
                                div + rest
                            }
                        };
                        out[i * nl + j] += v * qp.w;
                    }
                }
            });
        },
    ))
}

/// Mass matrix weighted by a coefficient expression.
pub fn assemble_weighted_mass(
    space: &FESpace,
    c: &CoefficientSet,
    weight: impl Fn(&CoefficientValues) -> f64 + Sync,
) -> Result<RealSparseMatrix, FemError> {
    let tab = Tabulation::new(space, default_form_degree(space.degree().max(1)))?;
    let n = space.num_dofs();
    let nc = space.components();
    let nl = space.dofs_per_element();
    Ok(assemble_with(
        n,
        n,
        &all_elements(space),
        |t| space.element_dofs(t),
        |t| space.element_dofs(t),
        |t, out: &mut [f64]| {
            for_each_point(space, &tab, t, |qp| {
                let w = weight(&c.eval(qp.x)) * qp.w;
                for i in 0..nl {
                    for j in 0..nl {
                        if i % nc == j % nc {
                            out[i * nl + j] += qp.phys.values[i / nc] * qp.phys.values[j / nc] * w;
                        }
                    }
                }
            });
        },
    ))
}

/// `C[i, j] = ⟨ρ b·∇φ_j, φ_i⟩`; skew-symmetric in the limit when
/// `div(ρb) = 0` and `b·ν = 0`.
pub fn assemble_convection(space: &FESpace, c: &CoefficientSet) -> Result<RealSparseMatrix, FemError> {
    let tab = Tabulation::new(space, default_form_degree(space.degree()))?;
    let n = space.num_dofs();
    let nc = space.components();
    let nl = space.dofs_per_element();
    Ok(assemble_with(
        n,
        n,
        &all_elements(space),
        |t| space.element_dofs(t),
        |t| space.element_dofs(t),
        |t, out: &mut [f64]| {
            for_each_point(space, &tab, t, |qp| {
                let cv = c.eval(qp.x);
                let b = cv.b_value();
                let w = cv.rho.v * qp.w;
                let ph = qp.phys;
                for i in 0..nl {
                    for j in 0..nl {
                        if i % nc == j % nc {
                            let g = ph.grads[j / nc];
                            out[i * nl + j] += (b[0] * g[0] + b[1] * g[1]) * ph.values[i / nc] * w;
                        }
                    }
                }
            });
        },
    ))
}

/// Weights of a velocity/scalar coupling `⟨α div u + β·u, q⟩`.
fn coupling<A>(x: &FESpace, q: &FESpace, c: Option<&CoefficientSet>, weights: A) -> Result<RealSparseMatrix, FemError>
where
    A: Fn(Option<&CoefficientValues>) -> (f64, [f64; 2]) + Sync,
{
    require_vector(x, "a divergence coupling")?;
    if q.family().is_vector() {
        return Err(FemError::IncompatibleSpace("coupling needs a scalar test space".into()));
    }
    same_mesh(x, q)?;
    let tx = Tabulation::new(x, default_form_degree(x.degree()))?;
    let tq = Tabulation::new(q, default_form_degree(x.degree()))?;
    let (nlx, nlq) = (x.dofs_per_element(), q.dofs_per_element());
    Ok(assemble_with(
        q.num_dofs(),
        x.num_dofs(),
        &all_elements(x),
        |t| q.element_dofs(t),
        |t| x.element_dofs(t),
        |t, out: &mut [f64]| {
            let mapq = ElementMap::new(q.mesh(), t);
            let mut qphys = BasisEval::default();
            let mut qi = 0;
            for_each_point(x, &tx, t, |qp| {
                mapq.push_forward(&tq.reference[qi], &mut qphys);
                qi += 1;
                let cv = c.map(|c| c.eval(qp.x));
                let (alpha, beta) = weights(cv.as_ref());
                for i in 0..nlq {
                    let psi = qphys.values[i] * qp.w;
                    for j in 0..nlx {
                        let (a, comp) = (j / 2, j % 2);
                        let v = alpha * qp.phys.grads[a][comp] + beta[comp] * qp.phys.values[a];
                        out[i * nlx + j] += v * psi;
                    }
                }
            });
        },
    ))
}

/// `B[q, u] = ⟨div u, q⟩`.
pub fn assemble_div_coupling(x: &FESpace, q: &FESpace) -> Result<RealSparseMatrix, FemError> {
    coupling(x, q, None, |_| (1.0, [0.0; 2]))
}

/// Projection weighting of the Taylor-Hood pseudo-pressure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThWeighting {
    /// `c_s²ρ`-weighted L² projection; the elimination reproduces the
    /// projected form exactly.
    Weighted,
    /// Plain L² projection of `√(c_s²ρ)(div + q·)u`.
    Unweighted,
}

/// Saddle system over `(u, σ, τ)` for the Taylor-Hood variant.
#[derive(Debug, Clone)]
pub struct TaylorHoodSystem {
    pub matrix: ComplexSparseMatrix,
    pub num_velocity: usize,
    pub num_pressure: usize,
}

/// Builds
/// `[[A₀, (B_d+B_p)ᵀ, −B_pᵀ], [B_d+B_p, −W, 0], [−B_p, 0, W]]`
/// where `A₀` is the Galbrun form without its divergence terms. Eliminating
/// `σ, τ` gives `A₀ + (B_d+B_p)ᵀW⁻¹(B_d+B_p) − B_pᵀW⁻¹B_p`, the form with
/// `(div + q·)u` and `q·u` replaced by their projections onto `Q`.
pub fn assemble_taylor_hood(
    x: &FESpace,
    q: &FESpace,
    c: &CoefficientSet,
    weighting: ThWeighting,
) -> Result<TaylorHoodSystem, FemError> {
    require_vector(x, "the Taylor-Hood system")?;
    if q.family() != Family::ScalarContinuousZeroMean || q.degree() + 1 != x.degree() || x.degree() < 2 {
        return Err(FemError::IncompatibleSpace(format!(
            "Taylor-Hood needs continuous P{} pseudo-pressures for P{} velocities (k >= 2)",
            x.degree().saturating_sub(1),
            x.degree()
        )));
    }
    same_mesh(x, q)?;
    let a0 = galbrun_matrix(
        x,
        c,
        default_form_degree(x.degree()),
        GalbrunTerms { divergence: false },
        &all_elements(x),
    )?;
    let (bd, bp, w) = match weighting {
        ThWeighting::Weighted => (
            coupling(x, q, Some(c), |v| (v.expect("coefficients").bulk(), [0.0; 2]))?,
            coupling(x, q, Some(c), |v| {
                let v = v.expect("coefficients");
                (0.0, v.p.g)
            })?,
            assemble_weighted_mass(q, c, |v| v.bulk())?,
        ),
        ThWeighting::Unweighted => (
            coupling(x, q, Some(c), |v| (v.expect("coefficients").bulk().sqrt(), [0.0; 2]))?,
            coupling(x, q, Some(c), |v| {
                let v = v.expect("coefficients");
                let s = v.bulk().sqrt();
                (0.0, [v.p.g[0] / s, v.p.g[1] / s])
            })?,
            assemble_weighted_mass(q, c, |_| 1.0)?,
        ),
    };
    let to_c = |m: &RealSparseMatrix| m.map(|v| Complex64::new(v, 0.0));
    let bsum = to_c(&bd.add_scaled(&bp, 1.0));
    let bpc = to_c(&bp);
    let wc = to_c(&w);
    let bsum_t = bsum.transpose();
    let neg_bp_t = bpc.transpose().map(|v| -v);
    let neg_bp = bpc.map(|v| -v);
    let neg_w = wc.map(|v| -v);
    let (nu, nq) = (x.num_dofs(), q.num_dofs());
    let matrix = CsrMatrix::block_general(
        &[
            vec![Some(&a0), Some(&bsum_t), Some(&neg_bp_t)],
            vec![Some(&bsum), Some(&neg_w), None],
            vec![Some(&neg_bp), None, Some(&wc)],
        ],
        &[nu, nq, nq],
        &[nu, nq, nq],
    );
    Ok(TaylorHoodSystem { matrix, num_velocity: nu, num_pressure: nq })
}

#[cfg(test)]
pub(crate) fn assemble_galbrun_in_order(
    space: &FESpace,
    c: &CoefficientSet,
    order: &[usize],
) -> Result<ComplexSparseMatrix, FemError> {
    galbrun_matrix(space, c, default_form_degree(space.degree()), GalbrunTerms { divergence: true }, order)
}
