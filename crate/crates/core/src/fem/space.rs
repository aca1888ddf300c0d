use std::collections::HashMap;
use std::sync::Arc;

use crate::error::FemError;
use crate::fem::basis::{lagrange_basis, ReferenceBasis, EDGE_VERTICES};
use crate::mesh::{Mesh, Point2, DOMAIN_MAX, DOMAIN_MIN, DOMAIN_WIDTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Continuous vector-valued `P_k`.
    VectorContinuous,
    /// Discontinuous scalar `P_{k-1}` with zero mean.
    ScalarDiscontinuousZeroMean,
    /// Continuous scalar `P_{k-1}` with zero mean.
    ScalarContinuousZeroMean,
}

impl Family {
    pub fn is_vector(self) -> bool {
        matches!(self, Family::VectorContinuous)
    }

    pub fn is_continuous(self) -> bool {
        !matches!(self, Family::ScalarDiscontinuousZeroMean)
    }

    pub fn components(self) -> usize {
        if self.is_vector() {
            2
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BcMode {
    Periodic,
    Nitsche,
    StrongNormal,
    FullDirichlet,
    None,
}

/// Degrees of freedom of a Lagrange space on a mesh.
///
/// Vector spaces interleave components: DOF `2·node + c`. Constrained DOFs
/// keep their index and are flagged; callers drop them at solve time.
#[derive(Debug, Clone)]
pub struct FESpace {
    mesh: Arc<Mesh>,
    family: Family,
    degree: usize,
    bc_mode: BcMode,
    basis: ReferenceBasis,
    num_nodes: usize,
    /// `elem_nodes[t * nb + i]`: global node of local node `i` of triangle `t`.
    elem_nodes: Vec<usize>,
    node_coords: Vec<Point2>,
    constrained: Vec<bool>,
}

impl FESpace {
    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn bc_mode(&self) -> BcMode {
        self.bc_mode
    }

    pub fn basis(&self) -> &ReferenceBasis {
        &self.basis
    }

    pub fn components(&self) -> usize {
        self.family.components()
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_dofs(&self) -> usize {
        self.num_nodes * self.components()
    }

    /// Local basis functions per element (per component).
    pub fn nodes_per_element(&self) -> usize {
        self.basis.len()
    }

    pub fn dofs_per_element(&self) -> usize {
        self.basis.len() * self.components()
    }

    pub fn element_nodes(&self, t: usize) -> &[usize] {
        let nb = self.basis.len();
        &self.elem_nodes[t * nb..(t + 1) * nb]
    }

    /// Global DOFs of triangle `t`; vector spaces interleave as `2·i + c`.
    pub fn element_dofs(&self, t: usize) -> Vec<usize> {
        let nodes = self.element_nodes(t);
        match self.components() {
            1 => nodes.to_vec(),
            _ => nodes.iter().flat_map(|&n| [2 * n, 2 * n + 1]).collect(),
        }
    }

    pub fn node_coords(&self) -> &[Point2] {
        &self.node_coords
    }

    pub fn constrained(&self) -> &[bool] {
        &self.constrained
    }

    pub fn num_constrained(&self) -> usize {
        self.constrained.iter().filter(|&&c| c).count()
    }

    /// Indices of unconstrained DOFs, ascending.
    pub fn free_dofs(&self) -> Vec<usize> {
        (0..self.num_dofs()).filter(|&d| !self.constrained[d]).collect()
    }

    /// Zero-mean families carry one mean constraint realized at solve time.
    pub fn has_mean_constraint(&self) -> bool {
        !self.family.is_vector()
    }

    /// Nodal interpolation of a scalar or vector function given by its
    /// component values.
    pub fn interpolate<T: Copy + Default>(&self, f: impl Fn(Point2) -> [T; 2]) -> Vec<T> {
        let nc = self.components();
        let mut out = vec![T::default(); self.num_dofs()];
        for (n, &p) in self.node_coords.iter().enumerate() {
            let v = f(p);
            for c in 0..nc {
                out[nc * n + c] = v[c];
            }
        }
        out
    }

    /// Zeroes the constrained entries of a coefficient vector.
    pub fn apply_constraints<T: Copy + Default>(&self, v: &mut [T]) {
        for (x, &c) in v.iter_mut().zip(&self.constrained) {
            if c {
                *x = T::default();
            }
        }
    }
}

/// Builds a Lagrange space. `degree` is the polynomial degree of the space
/// itself (`k` for velocities, `k-1` for pressures).
pub fn build_space(mesh: Arc<Mesh>, family: Family, degree: usize, bc_mode: BcMode) -> Result<FESpace, FemError> {
    match family {
        Family::VectorContinuous if degree == 0 => {
            return Err(FemError::IncompatibleSpace("continuous velocity space needs degree >= 1".into()))
        }
        Family::ScalarContinuousZeroMean if degree == 0 => {
            return Err(FemError::IncompatibleSpace(
                "continuous pressure needs degree k-1 >= 1, i.e. velocity degree k >= 2".into(),
            ))
        }
        _ => {}
    }
    if !family.is_vector() && matches!(bc_mode, BcMode::StrongNormal | BcMode::FullDirichlet) {
        return Err(FemError::IncompatibleSpace(format!("{bc_mode:?} applies to velocity spaces only")));
    }
    if bc_mode == BcMode::Periodic && mesh.periodic_pairs().is_none() {
        return Err(FemError::IncompatibleSpace("periodic mode needs a mesh with periodic vertex pairs".into()));
    }
    let basis = lagrange_basis(degree)?;
    let (mut elem_nodes, mut node_coords) = if family.is_continuous() {
        continuous_numbering(&mesh, &basis)
    } else {
        discontinuous_numbering(&mesh, &basis)
    };
    if bc_mode == BcMode::Periodic && family.is_continuous() {
        identify_periodic(&mut elem_nodes, &mut node_coords);
    }
    let num_nodes = node_coords.len();
    let nc = family.components();
    let mut constrained = vec![false; num_nodes * nc];
    if family.is_vector() && matches!(bc_mode, BcMode::StrongNormal | BcMode::FullDirichlet) {
        let on = |v: f64, c: f64| (v - c).abs() <= 1e-12 * DOMAIN_WIDTH;
        for (n, p) in node_coords.iter().enumerate() {
            let vertical = on(p.x, DOMAIN_MIN) || on(p.x, DOMAIN_MAX);
            let horizontal = on(p.y, DOMAIN_MIN) || on(p.y, DOMAIN_MAX);
            match bc_mode {
                BcMode::StrongNormal => {
                    constrained[2 * n] |= vertical;
                    constrained[2 * n + 1] |= horizontal;
                }
                _ => {
                    constrained[2 * n] |= vertical || horizontal;
                    constrained[2 * n + 1] |= vertical || horizontal;
                }
            }
        }
    }
    Ok(FESpace { mesh, family, degree, bc_mode, basis, num_nodes, elem_nodes, node_coords, constrained })
}

fn discontinuous_numbering(mesh: &Mesh, basis: &ReferenceBasis) -> (Vec<usize>, Vec<Point2>) {
    let nb = basis.len();
    let mut coords = Vec::with_capacity(mesh.num_triangles() * nb);
    for t in 0..mesh.num_triangles() {
        for node in basis.nodes() {
            coords.push(map_ref(mesh, t, *node));
        }
    }
    ((0..coords.len()).collect(), coords)
}

fn map_ref(mesh: &Mesh, t: usize, r: [f64; 2]) -> Point2 {
    mesh.map_barycentric(t, [1.0 - r[0] - r[1], r[0], r[1]])
}

fn continuous_numbering(mesh: &Mesh, basis: &ReferenceBasis) -> (Vec<usize>, Vec<Point2>) {
    let k = basis.degree();
    let nb = basis.len();
    let per_edge = basis.nodes_per_edge();
    let per_interior = basis.num_interior();
    let mut coords: Vec<Point2> = mesh.vertices().to_vec();
    let mut edge_start: HashMap<(usize, usize), usize> = HashMap::new();
    let mut elem_nodes = vec![0usize; mesh.num_triangles() * nb];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let local = &mut elem_nodes[t * nb..(t + 1) * nb];
        local[..3].copy_from_slice(tri);
        for (e, [la, lb]) in EDGE_VERTICES.iter().enumerate() {
            let (ga, gb) = (tri[*la], tri[*lb]);
            let key = (ga.min(gb), ga.max(gb));
            let start = *edge_start.entry(key).or_insert_with(|| {
                let s = coords.len();
                let (pa, pb) = (mesh.vertices()[key.0], mesh.vertices()[key.1]);
                for j in 1..k {
                    let t = j as f64 / k as f64;
                    coords.push(Point2::new(pa.x + t * (pb.x - pa.x), pa.y + t * (pb.y - pa.y)));
                }
                s
            });
            for j in 0..per_edge {
                let idx = if ga < gb { j } else { per_edge - 1 - j };
                local[3 + e * per_edge + j] = start + idx;
            }
        }
        let first_interior = 3 + 3 * per_edge;
        for j in 0..per_interior {
            local[first_interior + j] = coords.len();
            coords.push(map_ref(mesh, t, basis.nodes()[first_interior + j]));
        }
    }
    (elem_nodes, coords)
}

/// Merges nodes on the right/top sides into their left/bottom partners and
/// renumbers compactly, preserving the relative order of surviving nodes.
fn identify_periodic(elem_nodes: &mut [usize], coords: &mut Vec<Point2>) {
    let tol = 1e-12 * DOMAIN_WIDTH;
    let snap = |v: f64| if (v - DOMAIN_MAX).abs() <= tol { DOMAIN_MIN } else { v };
    let on_boundary =
        |p: Point2| [p.x, p.y].iter().any(|&v| (v - DOMAIN_MIN).abs() <= tol || (v - DOMAIN_MAX).abs() <= tol);
    let key = |p: Point2| ((p.x * 1e9).round() as i64, (p.y * 1e9).round() as i64);
    let mut canonical: HashMap<(i64, i64), usize> = HashMap::new();
    for (n, &p) in coords.iter().enumerate() {
        if on_boundary(p) && snap(p.x) == p.x && snap(p.y) == p.y {
            canonical.insert(key(p), n);
        }
    }
    let mut master: Vec<usize> = (0..coords.len()).collect();
    for (n, &p) in coords.iter().enumerate() {
        if on_boundary(p) {
            let c = Point2::new(snap(p.x), snap(p.y));
            if c != p {
                if let Some(&m) = canonical.get(&key(c)) {
                    master[n] = m;
                }
            }
        }
    }
    let mut new_index = vec![usize::MAX; coords.len()];
    let mut new_coords = Vec::with_capacity(coords.len());
    for n in 0..coords.len() {
        if master[n] == n {
            new_index[n] = new_coords.len();
            new_coords.push(coords[n]);
        }
    }
    for e in elem_nodes.iter_mut() {
        *e = new_index[master[*e]];
    }
    *coords = new_coords;
}
