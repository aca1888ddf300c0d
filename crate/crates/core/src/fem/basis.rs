//! Nodal Lagrange bases on the reference triangle.
//!
//! Local node order: the three vertices, then `k-1` nodes on each edge
//! (edges `0→1`, `1→2`, `2→0`, ordered from the first vertex), then the
//! interior nodes of the barycentric lattice.

use nalgebra::DMatrix;

use crate::error::FemError;

pub const MAX_BASIS_DEGREE: usize = 5;

/// Local vertex pairs of the reference edges.
pub const EDGE_VERTICES: [[usize; 2]; 3] = [[0, 1], [1, 2], [2, 0]];

#[derive(Debug, Clone)]
pub struct ReferenceBasis {
    degree: usize,
    nodes: Vec<[f64; 2]>,
    exponents: Vec<(i32, i32)>,
    /// `coeffs[i * n + m]`: coefficient of monomial `m` in basis function `i`.
    coeffs: Vec<f64>,
}

/// Values, reference gradients and reference Hessians of all basis
/// functions at one point.
#[derive(Debug, Clone, Default)]
pub struct BasisEval {
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 2]>,
    pub hessians: Vec<[f64; 3]>,
}

fn reference_vertex(i: usize) -> [f64; 2] {
    [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]][i]
}

/// Builds the nodal basis of degree `k`. Degree 0 is the constant on the
/// centroid, used for piecewise-constant pressures.
pub fn lagrange_basis(k: usize) -> Result<ReferenceBasis, FemError> {
    if k > MAX_BASIS_DEGREE {
        return Err(FemError::UnsupportedBasisDegree(k));
    }
    let nodes = reference_nodes(k);
    let exponents: Vec<(i32, i32)> =
        (0..=k as i32).flat_map(|d| (0..=d).map(move |b| (d - b, b))).collect();
    let n = nodes.len();
    debug_assert_eq!(n, exponents.len());
    let vander = DMatrix::from_fn(n, n, |j, m| {
        let (a, b) = exponents[m];
        nodes[j][0].powi(a) * nodes[j][1].powi(b)
    });
    let inv = vander.try_inverse().ok_or(FemError::UnsupportedBasisDegree(k))?;
    // vander * C = I, column i of C holds basis function i
    let mut coeffs = vec![0.0; n * n];
    for i in 0..n {
        for m in 0..n {
            coeffs[i * n + m] = inv[(m, i)];
        }
    }
    Ok(ReferenceBasis { degree: k, nodes, exponents, coeffs })
}

fn reference_nodes(k: usize) -> Vec<[f64; 2]> {
    if k == 0 {
        return vec![[1.0 / 3.0, 1.0 / 3.0]];
    }
    let kf = k as f64;
    let mut nodes: Vec<[f64; 2]> = (0..3).map(reference_vertex).collect();
    for [a, b] in EDGE_VERTICES {
        let (pa, pb) = (reference_vertex(a), reference_vertex(b));
        for j in 1..k {
            let t = j as f64 / kf;
            nodes.push([pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]);
        }
    }
    for j in 1..k {
        for i in 1..k - j {
            nodes.push([i as f64 / kf, j as f64 / kf]);
        }
    }
    nodes
}

impl ReferenceBasis {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    /// Number of nodes strictly inside each edge.
    pub fn nodes_per_edge(&self) -> usize {
        self.degree.saturating_sub(1)
    }

    pub fn num_interior(&self) -> usize {
        if self.degree == 0 {
            1
        } else {
            self.len() - 3 - 3 * self.nodes_per_edge()
        }
    }

    /// Evaluates all basis functions with first and second derivatives.
    pub fn eval(&self, p: [f64; 2]) -> BasisEval {
        let mut out = BasisEval::default();
        self.eval_into(p, &mut out);
        out
    }

    pub fn eval_into(&self, p: [f64; 2], out: &mut BasisEval) {
        let n = self.len();
        let (x, y) = (p[0], p[1]);
        let pw = |v: f64, e: i32| if e < 0 { 0.0 } else { v.powi(e) };
        let mut mv = Vec::with_capacity(n);
        let mut mg = Vec::with_capacity(n);
        let mut mh = Vec::with_capacity(n);
        for &(a, b) in &self.exponents {
            let (af, bf) = (a as f64, b as f64);
            mv.push(pw(x, a) * pw(y, b));
            mg.push([af * pw(x, a - 1) * pw(y, b), bf * pw(x, a) * pw(y, b - 1)]);
            mh.push([
                af * (af - 1.0) * pw(x, a - 2) * pw(y, b),
                af * bf * pw(x, a - 1) * pw(y, b - 1),
                bf * (bf - 1.0) * pw(x, a) * pw(y, b - 2),
            ]);
        }
        out.values.clear();
        out.grads.clear();
        out.hessians.clear();
        for i in 0..n {
            let c = &self.coeffs[i * n..(i + 1) * n];
            let mut v = 0.0;
            let mut g = [0.0; 2];
            let mut h = [0.0; 3];
            for m in 0..n {
                v += c[m] * mv[m];
                g[0] += c[m] * mg[m][0];
                g[1] += c[m] * mg[m][1];
                h[0] += c[m] * mh[m][0];
                h[1] += c[m] * mh[m][1];
                h[2] += c[m] * mh[m][2];
            }
            out.values.push(v);
            out.grads.push(g);
            out.hessians.push(h);
        }
    }
}
