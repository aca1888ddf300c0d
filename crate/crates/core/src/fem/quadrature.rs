//! Quadrature on the reference triangle `{(0,0), (1,0), (0,1)}` and the
//! reference edge `[0, 1]`.
//!
//! Degrees 0–2 use small symmetric rules; higher degrees use a collapsed
//! (Duffy) tensor product of Gauss–Legendre rules.

use crate::error::FemError;

pub const MAX_DEGREE: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    /// Cartesian points on the reference triangle.
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub exact_degree: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRule {
    /// Points on `[0, 1]`.
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub exact_degree: usize,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

impl EdgeRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = 0.5 * (1.0 - z);
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[i] = 0.5 * wi;
        w[n - 1 - i] = 0.5 * wi;
    }
    (x, w)
}

/// Legendre polynomial `P_n(z)` and its derivative.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Quadrature rule on the reference triangle exact for polynomials of total
/// degree `degree`.
pub fn triangle_quadrature(degree: usize) -> Result<QuadRule, FemError> {
    if degree > MAX_DEGREE {
        return Err(FemError::UnsupportedQuadratureDegree(degree));
    }
    let rule = match degree {
        0 | 1 => QuadRule { points: vec![[1.0 / 3.0, 1.0 / 3.0]], weights: vec![0.5], exact_degree: 1 },
        2 => QuadRule {
            points: vec![[1.0 / 6.0, 1.0 / 6.0], [2.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 2.0 / 3.0]],
            weights: vec![1.0 / 6.0; 3],
            exact_degree: 2,
        },
        d => {
            let n = (d + 2).div_ceil(2);
            let (gx, gw) = gauss_legendre(n);
            let mut points = Vec::with_capacity(n * n);
            let mut weights = Vec::with_capacity(n * n);
            for (&v, &wv) in gx.iter().zip(&gw) {
                for (&u, &wu) in gx.iter().zip(&gw) {
                    points.push([u * (1.0 - v), v]);
                    weights.push(wu * wv * (1.0 - v));
                }
            }
            QuadRule { points, weights, exact_degree: 2 * n - 2 }
        }
    };
    Ok(rule)
}

/// Gauss–Legendre rule on `[0, 1]` exact for polynomials of degree `degree`.
pub fn edge_quadrature(degree: usize) -> Result<EdgeRule, FemError> {
    if degree > MAX_DEGREE {
        return Err(FemError::UnsupportedQuadratureDegree(degree));
    }
    let n = (degree + 2) / 2;
    let (points, weights) = gauss_legendre(n);
    Ok(EdgeRule { points, weights, exact_degree: 2 * n - 1 })
}
