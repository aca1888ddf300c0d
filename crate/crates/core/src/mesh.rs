//! Triangulations of the square `(-4, 4)²`.
//!
//! Meshes are produced by a seeded Bowyer–Watson Delaunay insertion over a
//! jittered grid with unjittered, uniformly spaced boundary points. The same
//! `(h, seed)` always yields the same mesh, bit for bit.

use std::collections::HashMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::MeshError;

/// Lower corner coordinate of the square domain.
pub const DOMAIN_MIN: f64 = -4.0;
/// Upper corner coordinate of the square domain.
pub const DOMAIN_MAX: f64 = 4.0;
/// Side length of the square domain.
pub const DOMAIN_WIDTH: f64 = DOMAIN_MAX - DOMAIN_MIN;
/// Area of the square domain.
pub const DOMAIN_AREA: f64 = DOMAIN_WIDTH * DOMAIN_WIDTH;

/// Relative jitter radius of interior grid points (as a fraction of the grid spacing).
pub const JITTER: f64 = 0.15;

const ON_BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl fmt::Display for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Side of the square a boundary edge lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    /// Outward unit normal.
    pub fn normal(self) -> [f64; 2] {
        match self {
            Side::Left => [-1.0, 0.0],
            Side::Right => [1.0, 0.0],
            Side::Bottom => [0.0, -1.0],
            Side::Top => [0.0, 1.0],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
            Side::Bottom => "bottom",
            Side::Top => "top",
        }
    }

    pub fn from_name(name: &str) -> Option<Side> {
        Side::ALL.into_iter().find(|s| s.name() == name)
    }

    /// Side that contains both points, if any.
    pub fn of_segment(a: Point2, b: Point2) -> Option<Side> {
        let on = |v: f64, c: f64| (v - c).abs() <= ON_BOUNDARY_TOL * DOMAIN_WIDTH;
        if on(a.x, DOMAIN_MIN) && on(b.x, DOMAIN_MIN) {
            Some(Side::Left)
        } else if on(a.x, DOMAIN_MAX) && on(b.x, DOMAIN_MAX) {
            Some(Side::Right)
        } else if on(a.y, DOMAIN_MIN) && on(b.y, DOMAIN_MIN) {
            Some(Side::Bottom)
        } else if on(a.y, DOMAIN_MAX) && on(b.y, DOMAIN_MAX) {
            Some(Side::Top)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub side: Side,
}

/// A conforming triangulation of the square domain.
///
/// Triangles are stored counterclockwise. `periodic_pairs` maps every vertex
/// on the right or top side (and every corner other than `(-4,-4)`) to its
/// canonical partner on the left/bottom sides.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point2>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    periodic_pairs: Option<Vec<(usize, usize)>>,
    h_max: f64,
    neighbors: Vec<[Option<usize>; 3]>,
}

/// Result of [`Mesh::locate_point`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    pub triangle: usize,
    pub barycentric: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Orientation { triangle: usize, signed_area: f64 },
    Conformity { edge: [usize; 2], count: usize },
    AreaSum { area: f64 },
    PeriodicMismatch { vertex: usize, partner: usize },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

fn signed_area(a: Point2, b: Point2, c: Point2) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x))
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Mesh {
    /// Builds a mesh from raw vertices and triangles, deriving boundary edges
    /// from edges with a single incident triangle that lie on the square.
    pub fn from_parts(vertices: Vec<Point2>, triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(MeshError::InvalidMesh(format!("triangle {t} references a missing vertex")));
            }
        }
        let mut counts: HashMap<(usize, usize), usize> = HashMap::new();
        let mut order = Vec::new();
        for tri in &triangles {
            for i in 0..3 {
                let key = edge_key(tri[i], tri[(i + 1) % 3]);
                let c = counts.entry(key).or_insert(0);
                if *c == 0 {
                    order.push((tri[i], tri[(i + 1) % 3]));
                }
                *c += 1;
            }
        }
        let boundary_edges = order
            .into_iter()
            .filter(|&(a, b)| counts[&edge_key(a, b)] == 1)
            .filter_map(|(a, b)| {
                Side::of_segment(vertices[a], vertices[b]).map(|side| BoundaryEdge { vertices: [a, b], side })
            })
            .collect();
        Ok(Self::assemble(vertices, triangles, boundary_edges, None))
    }

    /// Builds a mesh from fully specified parts (used by importers).
    pub fn from_parts_with_boundary(
        vertices: Vec<Point2>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<BoundaryEdge>,
    ) -> Result<Self, MeshError> {
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(MeshError::InvalidMesh(format!("triangle {t} references a missing vertex")));
            }
        }
        if boundary_edges.iter().any(|e| e.vertices.iter().any(|&v| v >= vertices.len())) {
            return Err(MeshError::InvalidMesh("boundary edge references a missing vertex".into()));
        }
        Ok(Self::assemble(vertices, triangles, boundary_edges, None))
    }

    fn assemble(
        vertices: Vec<Point2>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<BoundaryEdge>,
        periodic_pairs: Option<Vec<(usize, usize)>>,
    ) -> Self {
        let h_max = triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|v| vertices[v]);
                a.dist(b).max(b.dist(c)).max(c.dist(a))
            })
            .fold(0.0, f64::max);
        let neighbors = compute_neighbors(&triangles);
        Self { vertices, triangles, boundary_edges, periodic_pairs, h_max, neighbors }
    }

    /// Attaches periodic vertex pairs by matching boundary vertices across
    /// opposite sides. Fails if some boundary vertex has no partner.
    pub fn with_periodic_pairs(mut self) -> Result<Self, MeshError> {
        let canonical = |p: Point2| {
            let snap = |v: f64| if (v - DOMAIN_MAX).abs() <= ON_BOUNDARY_TOL * DOMAIN_WIDTH { DOMAIN_MIN } else { v };
            Point2::new(snap(p.x), snap(p.y))
        };
        let key = |p: Point2| ((p.x * 1e9).round() as i64, (p.y * 1e9).round() as i64);
        let mut on_boundary = vec![false; self.vertices.len()];
        for e in &self.boundary_edges {
            on_boundary[e.vertices[0]] = true;
            on_boundary[e.vertices[1]] = true;
        }
        let mut masters: HashMap<(i64, i64), usize> = HashMap::new();
        for (v, p) in self.vertices.iter().enumerate() {
            if on_boundary[v] && canonical(*p) == *p {
                masters.insert(key(*p), v);
            }
        }
        let mut pairs = Vec::new();
        for (v, p) in self.vertices.iter().enumerate() {
            if !on_boundary[v] {
                continue;
            }
            let c = canonical(*p);
            if c == *p {
                continue;
            }
            match masters.get(&key(c)) {
                Some(&m) => pairs.push((v, m)),
                None => {
                    return Err(MeshError::InvalidMesh(format!("boundary vertex {v} at {p} has no periodic partner")))
                }
            }
        }
        self.periodic_pairs = Some(pairs);
        Ok(self)
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn periodic_pairs(&self) -> Option<&[(usize, usize)]> {
        self.periodic_pairs.as_deref()
    }

    /// Largest triangle diameter.
    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Neighbor across the edge opposite local vertex `i` of triangle `t`.
    pub fn neighbor(&self, t: usize, i: usize) -> Option<usize> {
        self.neighbors[t][i]
    }

    pub fn triangle_points(&self, t: usize) -> [Point2; 3] {
        self.triangles[t].map(|v| self.vertices[v])
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        // Kahan summation keeps the 1e-12 area check meaningful on fine meshes.
        let mut sum = 0.0;
        let mut comp = 0.0;
        for t in 0..self.triangles.len() {
            let y = self.signed_area(t) - comp;
            let s = sum + y;
            comp = (s - sum) - y;
            sum = s;
        }
        sum
    }

    pub fn centroid(&self, t: usize) -> Point2 {
        let [a, b, c] = self.triangle_points(t);
        Point2::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0)
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_degrees(&self) -> f64 {
        (0..self.triangles.len()).map(|t| triangle_min_angle(self.triangle_points(t))).fold(180.0, f64::min)
    }

    /// Maps barycentric coordinates of triangle `t` to the physical point.
    pub fn map_barycentric(&self, t: usize, bary: [f64; 3]) -> Point2 {
        let [a, b, c] = self.triangle_points(t);
        Point2::new(
            bary[0] * a.x + bary[1] * b.x + bary[2] * c.x,
            bary[0] * a.y + bary[1] * b.y + bary[2] * c.y,
        )
    }

    pub fn barycentric(&self, t: usize, p: Point2) -> [f64; 3] {
        let [a, b, c] = self.triangle_points(t);
        let area = signed_area(a, b, c);
        let l0 = signed_area(p, b, c) / area;
        let l1 = signed_area(a, p, c) / area;
        [l0, l1, 1.0 - l0 - l1]
    }

    /// Finds a triangle containing `p`, starting the walk at triangle 0.
    pub fn locate_point(&self, p: Point2) -> Result<Location, MeshError> {
        self.locate_point_from(p, 0)
    }

    /// Straight walk from `hint` towards `p`, falling back to an exhaustive
    /// scan when the walk leaves the mesh or cycles.
    pub fn locate_point_from(&self, p: Point2, hint: usize) -> Result<Location, MeshError> {
        const TOL: f64 = 1e-10;
        let slack = 1e-10 * DOMAIN_WIDTH;
        if !(p.x.is_finite() && p.y.is_finite())
            || p.x < DOMAIN_MIN - slack
            || p.x > DOMAIN_MAX + slack
            || p.y < DOMAIN_MIN - slack
            || p.y > DOMAIN_MAX + slack
        {
            return Err(MeshError::PointOutsideDomain { x: p.x, y: p.y });
        }
        if self.triangles.is_empty() {
            return Err(MeshError::InvalidMesh("mesh has no triangles".into()));
        }
        let mut t = hint.min(self.triangles.len() - 1);
        for _ in 0..self.triangles.len() {
            let bary = self.barycentric(t, p);
            let (imin, &lmin) = bary
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .expect("three coordinates");
            if lmin >= -TOL {
                return Ok(Location { triangle: t, barycentric: clamp_bary(bary) });
            }
            match self.neighbors[t][imin] {
                Some(n) => t = n,
                None => break,
            }
        }
        let (best, bary) = (0..self.triangles.len())
            .map(|t| (t, self.barycentric(t, p)))
            .max_by(|a, b| min3(a.1).total_cmp(&min3(b.1)))
            .expect("non-empty mesh");
        if min3(bary) < -1e-8 {
            return Err(MeshError::PointOutsideDomain { x: p.x, y: p.y });
        }
        Ok(Location { triangle: best, barycentric: clamp_bary(bary) })
    }

    /// Checks orientation, edge conformity, total area and periodic matching.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        for t in 0..self.triangles.len() {
            let a = self.signed_area(t);
            if !(a > 0.0) {
                violations.push(Violation::Orientation { triangle: t, signed_area: a });
            }
        }
        let mut counts: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for i in 0..3 {
                *counts.entry(edge_key(tri[i], tri[(i + 1) % 3])).or_insert(0) += 1;
            }
        }
        let mut bad: Vec<_> = counts
            .iter()
            .filter(|(&(a, b), &c)| {
                let on_boundary = Side::of_segment(self.vertices[a], self.vertices[b]).is_some();
                if on_boundary {
                    c != 1
                } else {
                    c != 2
                }
            })
            .map(|(&(a, b), &c)| Violation::Conformity { edge: [a, b], count: c })
            .collect();
        bad.sort_by_key(|v| match v {
            Violation::Conformity { edge, .. } => *edge,
            _ => [0, 0],
        });
        violations.extend(bad);
        let area = self.total_area();
        if ((area - DOMAIN_AREA) / DOMAIN_AREA).abs() > 1e-12 {
            violations.push(Violation::AreaSum { area });
        }
        if let Some(pairs) = &self.periodic_pairs {
            for &(v, m) in pairs {
                let d = Point2::new(self.vertices[v].x - self.vertices[m].x, self.vertices[v].y - self.vertices[m].y);
                let ok = [(DOMAIN_WIDTH, 0.0), (0.0, DOMAIN_WIDTH), (DOMAIN_WIDTH, DOMAIN_WIDTH)]
                    .iter()
                    .any(|&(dx, dy)| (d.x - dx).abs() <= 1e-12 && (d.y - dy).abs() <= 1e-12);
                if !ok {
                    violations.push(Violation::PeriodicMismatch { vertex: v, partner: m });
                }
            }
        }
        ValidationReport { violations }
    }
}

fn min3(b: [f64; 3]) -> f64 {
    b[0].min(b[1]).min(b[2])
}

fn clamp_bary(b: [f64; 3]) -> [f64; 3] {
    b.map(|l| l.clamp(-1e-10, 1.0 + 1e-10))
}

fn triangle_min_angle(p: [Point2; 3]) -> f64 {
    let mut min = 180.0_f64;
    for i in 0..3 {
        let a = p[i];
        let b = p[(i + 1) % 3];
        let c = p[(i + 2) % 3];
        let (ux, uy) = (b.x - a.x, b.y - a.y);
        let (vx, vy) = (c.x - a.x, c.y - a.y);
        let ang = (ux * vy - uy * vx).abs().atan2(ux * vx + uy * vy).to_degrees();
        min = min.min(ang);
    }
    min
}

fn compute_neighbors(triangles: &[[usize; 3]]) -> Vec<[Option<usize>; 3]> {
    let mut owner: HashMap<(usize, usize), (usize, usize)> = HashMap::with_capacity(triangles.len() * 2);
    let mut neighbors = vec![[None; 3]; triangles.len()];
    for (t, tri) in triangles.iter().enumerate() {
        for i in 0..3 {
            let key = edge_key(tri[(i + 1) % 3], tri[(i + 2) % 3]);
            if let Some(&(s, j)) = owner.get(&key) {
                neighbors[t][i] = Some(s);
                neighbors[s][j] = Some(t);
            } else {
                owner.insert(key, (t, i));
            }
        }
    }
    neighbors
}

/// Generates a Delaunay mesh of `(-4,4)²` with target mesh size `h`.
///
/// Boundary vertices are spaced uniformly at `s = 8 / ceil(8 / h)` on each
/// side; interior vertices sit on a grid of spacing `s` whose odd rows are
/// staggered by `s/2`, each displaced by a seeded random offset of length at
/// most `JITTER · s`.
pub fn generate_square_mesh(h: f64, seed: u64, periodic_matching: bool) -> Result<Mesh, MeshError> {
    generate_with_jitter(h, seed, periodic_matching, JITTER)
}

pub(crate) fn generate_with_jitter(h: f64, seed: u64, periodic_matching: bool, jitter: f64) -> Result<Mesh, MeshError> {
    if !(h > 0.0 && h <= 4.0) {
        return Err(MeshError::InvalidMeshSize(h));
    }
    let n = (DOMAIN_WIDTH / h - 1e-9).ceil().max(2.0) as usize;
    let s = DOMAIN_WIDTH / n as f64;
    let coord = |i: usize| if i == n { DOMAIN_MAX } else { DOMAIN_MIN + i as f64 * s };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity((n + 1) * (n + 1));
    let jittered = |p: Point2, rng: &mut ChaCha8Rng| {
        let r: f64 = rng.random::<f64>().sqrt() * jitter * s;
        let phi: f64 = rng.random::<f64>() * std::f64::consts::TAU;
        Point2::new(p.x + r * phi.cos(), p.y + r * phi.sin())
    };
    for j in 0..=n {
        let y = coord(j);
        if j == 0 || j == n {
            points.extend((0..=n).map(|i| Point2::new(coord(i), y)));
            continue;
        }
        points.push(Point2::new(DOMAIN_MIN, y));
        if j % 2 == 1 {
            // odd rows are staggered by half a spacing
            for i in 0..n {
                let p = jittered(Point2::new(DOMAIN_MIN + (i as f64 + 0.5) * s, y), &mut rng);
                points.push(p);
            }
        } else {
            for i in 1..n {
                let p = jittered(Point2::new(coord(i), y), &mut rng);
                points.push(p);
            }
        }
        points.push(Point2::new(DOMAIN_MAX, y));
    }
    let triangles = delaunay(&points)?;
    let mesh = Mesh::from_parts(points, triangles)?;
    if periodic_matching {
        mesh.with_periodic_pairs()
    } else {
        Ok(mesh)
    }
}

/// Splits every triangle into three by inserting its centroid.
///
/// Existing vertices keep their indices; centroids are appended in triangle
/// order.
pub fn barycentric_refine(m: &Mesh) -> Mesh {
    let nv = m.vertices.len();
    let mut vertices = m.vertices.clone();
    vertices.extend((0..m.triangles.len()).map(|t| m.centroid(t)));
    let mut triangles = Vec::with_capacity(3 * m.triangles.len());
    for (t, &[a, b, c]) in m.triangles.iter().enumerate() {
        let g = nv + t;
        triangles.push([a, b, g]);
        triangles.push([b, c, g]);
        triangles.push([c, a, g]);
    }
    Mesh::assemble(vertices, triangles, m.boundary_edges.clone(), m.periodic_pairs.clone())
}

// ---------------------------------------------------------------------------
// Bowyer–Watson

struct Triangulation {
    pts: Vec<Point2>,
    tris: Vec<[usize; 3]>,
    nbr: Vec<[Option<usize>; 3]>,
    alive: Vec<bool>,
    last: usize,
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn in_circumcircle(a: Point2, b: Point2, c: Point2, p: Point2) -> bool {
    let (adx, ady) = (a.x - p.x, a.y - p.y);
    let (bdx, bdy) = (b.x - p.x, b.y - p.y);
    let (cdx, cdy) = (c.x - p.x, c.y - p.y);
    let ad = adx * adx + ady * ady;
    let bd = bdx * bdx + bdy * bdy;
    let cd = cdx * cdx + cdy * cdy;
    let det = adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx);
    det > 1e-12 * (ad + bd + cd).powi(2).max(f64::MIN_POSITIVE)
}

impl Triangulation {
    fn locate(&self, p: Point2) -> Option<usize> {
        let mut t = self.last;
        if !self.alive[t] {
            t = self.alive.iter().rposition(|&a| a)?;
        }
        for _ in 0..self.tris.len() {
            let tri = self.tris[t];
            let mut moved = false;
            for i in 0..3 {
                let a = self.pts[tri[(i + 1) % 3]];
                let b = self.pts[tri[(i + 2) % 3]];
                if orient(a, b, p) < 0.0 {
                    if let Some(n) = self.nbr[t][i] {
                        t = n;
                        moved = true;
                        break;
                    }
                }
            }
            if !moved {
                return Some(t);
            }
        }
        (0..self.tris.len()).find(|&t| {
            self.alive[t] && {
                let tri = self.tris[t];
                (0..3).all(|i| orient(self.pts[tri[(i + 1) % 3]], self.pts[tri[(i + 2) % 3]], p) >= 0.0)
            }
        })
    }

    fn insert(&mut self, pi: usize) -> Result<(), MeshError> {
        let p = self.pts[pi];
        let start = self
            .locate(p)
            .ok_or_else(|| MeshError::InvalidMesh(format!("failed to locate point {p} during triangulation")))?;
        let mut in_cavity = HashMap::new();
        in_cavity.insert(start, true);
        let mut cavity = vec![start];
        let mut stack = vec![start];
        while let Some(t) = stack.pop() {
            for i in 0..3 {
                if let Some(n) = self.nbr[t][i] {
                    if in_cavity.contains_key(&n) {
                        continue;
                    }
                    let [a, b, c] = self.tris[n].map(|v| self.pts[v]);
                    let inside = in_circumcircle(a, b, c, p);
                    in_cavity.insert(n, inside);
                    if inside {
                        cavity.push(n);
                        stack.push(n);
                    }
                }
            }
        }
        // Shrink the cavity until every boundary edge is strictly visible from p.
        loop {
            let mut removed = false;
            for idx in 0..cavity.len() {
                let t = cavity[idx];
                if t == start {
                    continue;
                }
                let tri = self.tris[t];
                let bad = (0..3).any(|i| {
                    let outside = match self.nbr[t][i] {
                        Some(n) => !in_cavity[&n],
                        None => true,
                    };
                    outside && orient(self.pts[tri[(i + 1) % 3]], self.pts[tri[(i + 2) % 3]], p) <= 0.0
                });
                if bad {
                    in_cavity.insert(t, false);
                    cavity.remove(idx);
                    removed = true;
                    break;
                }
            }
            if !removed {
                break;
            }
        }
        let mut boundary = Vec::new();
        for &t in &cavity {
            let tri = self.tris[t];
            for i in 0..3 {
                let outside = match self.nbr[t][i] {
                    Some(n) => !in_cavity[&n],
                    None => true,
                };
                if outside {
                    boundary.push((tri[(i + 1) % 3], tri[(i + 2) % 3], self.nbr[t][i], t));
                }
            }
        }
        for &t in &cavity {
            self.alive[t] = false;
        }
        let mut by_start: HashMap<usize, usize> = HashMap::new();
        let mut by_end: HashMap<usize, usize> = HashMap::new();
        let mut created = Vec::with_capacity(boundary.len());
        for &(a, b, outer, old) in &boundary {
            let nt = self.tris.len();
            self.tris.push([a, b, pi]);
            self.nbr.push([None, None, outer]);
            self.alive.push(true);
            if let Some(o) = outer {
                for j in 0..3 {
                    if self.nbr[o][j] == Some(old) {
                        self.nbr[o][j] = Some(nt);
                    }
                }
            }
            by_start.insert(a, nt);
            by_end.insert(b, nt);
            created.push(nt);
        }
        for &nt in &created {
            let [a, b, _] = self.tris[nt];
            // edge (b, p) is opposite vertex a; shared with the triangle starting at b
            self.nbr[nt][0] = by_start.get(&b).copied();
            // edge (p, a) is opposite vertex b; shared with the triangle ending at a
            self.nbr[nt][1] = by_end.get(&a).copied();
        }
        self.last = *created.last().expect("cavity has a boundary");
        Ok(())
    }
}

fn delaunay(points: &[Point2]) -> Result<Vec<[usize; 3]>, MeshError> {
    let n = points.len();
    let big = 100.0 * DOMAIN_WIDTH;
    let mut pts = points.to_vec();
    pts.push(Point2::new(-big, -big));
    pts.push(Point2::new(big, -big));
    pts.push(Point2::new(0.0, big));
    let mut tri = Triangulation {
        pts,
        tris: vec![[n, n + 1, n + 2]],
        nbr: vec![[None; 3]],
        alive: vec![true],
        last: 0,
    };
    for i in 0..n {
        tri.insert(i)?;
    }
    Ok(tri
        .tris
        .iter()
        .zip(&tri.alive)
        .filter(|(t, &alive)| alive && t.iter().all(|&v| v < n))
        .map(|(t, _)| *t)
        .collect())
}
