use num_complex::Complex64;

use crate::error::FemError;
use crate::fem::basis::BasisEval;
use crate::fem::space::FESpace;
use crate::jet::ComplexJet;
use crate::mesh::{Mesh, Point2};

/// Affine map from the reference triangle onto a mesh triangle.
#[derive(Debug, Clone, Copy)]
pub struct ElementMap {
    pub origin: Point2,
    /// Columns are the images of the reference axes.
    pub jac: [[f64; 2]; 2],
    /// Transposed inverse Jacobian.
    pub inv_t: [[f64; 2]; 2],
    pub det: f64,
}

impl ElementMap {
    pub fn new(mesh: &Mesh, t: usize) -> Self {
        let [a, b, c] = mesh.triangle_points(t);
        let jac = [[b.x - a.x, c.x - a.x], [b.y - a.y, c.y - a.y]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv_t = [[jac[1][1] / det, -jac[1][0] / det], [-jac[0][1] / det, jac[0][0] / det]];
        Self { origin: a, jac, inv_t, det }
    }

    pub fn map(&self, r: [f64; 2]) -> Point2 {
        Point2::new(
            self.origin.x + self.jac[0][0] * r[0] + self.jac[0][1] * r[1],
            self.origin.y + self.jac[1][0] * r[0] + self.jac[1][1] * r[1],
        )
    }

    pub fn grad(&self, g: [f64; 2]) -> [f64; 2] {
        let m = &self.inv_t;
        [m[0][0] * g[0] + m[0][1] * g[1], m[1][0] * g[0] + m[1][1] * g[1]]
    }

    /// `J^{-T} H J^{-1}` in packed `[xx, xy, yy]` form.
    pub fn hessian(&self, h: [f64; 3]) -> [f64; 3] {
        let m = &self.inv_t;
        let full = [[h[0], h[1]], [h[1], h[2]]];
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, o) in row.iter_mut().enumerate() {
                let mut s = 0.0;
                for a in 0..2 {
                    for b in 0..2 {
                        s += m[i][a] * full[a][b] * m[j][b];
                    }
                }
                *o = s;
            }
        }
        [out[0][0], out[0][1], out[1][1]]
    }

    /// Physical gradients and Hessians of a tabulated reference basis.
    pub fn push_forward(&self, reference: &BasisEval, out: &mut BasisEval) {
        out.values.clone_from(&reference.values);
        out.grads.clear();
        out.grads.extend(reference.grads.iter().map(|&g| self.grad(g)));
        out.hessians.clear();
        out.hessians.extend(reference.hessians.iter().map(|&h| self.hessian(h)));
    }
}

/// Value, gradient and (element-wise) Hessian of each component of an FE
/// function at one point. Scalar spaces fill component 0 only.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FeEval {
    pub point: Point2,
    pub components: [ComplexJet; 2],
}

impl FeEval {
    pub fn value(&self) -> [Complex64; 2] {
        [self.components[0].v, self.components[1].v]
    }

    pub fn divergence(&self) -> Complex64 {
        self.components[0].g[0] + self.components[1].g[1]
    }
}

/// Evaluates the FE function with coefficients `coeffs` on triangle `tri`
/// at reference point `r`.
pub fn eval_fe(space: &FESpace, coeffs: &[Complex64], tri: usize, r: [f64; 2]) -> Result<FeEval, FemError> {
    if coeffs.len() != space.num_dofs() {
        return Err(FemError::LengthMismatch { expected: space.num_dofs(), got: coeffs.len() });
    }
    if tri >= space.mesh().num_triangles() {
        return Err(FemError::TriangleOutOfRange(tri));
    }
    let map = ElementMap::new(space.mesh(), tri);
    let reference = space.basis().eval(r);
    let mut phys = BasisEval::default();
    map.push_forward(&reference, &mut phys);
    Ok(combine(space, coeffs, tri, &map, &phys, r))
}

/// Combines pre-tabulated physical basis data with coefficients.
pub(crate) fn combine(
    space: &FESpace,
    coeffs: &[Complex64],
    tri: usize,
    map: &ElementMap,
    phys: &BasisEval,
    r: [f64; 2],
) -> FeEval {
    let nc = space.components();
    let mut out = FeEval { point: map.map(r), ..Default::default() };
    for (i, &node) in space.element_nodes(tri).iter().enumerate() {
        let (v, g, h) = (phys.values[i], phys.grads[i], phys.hessians[i]);
        for c in 0..nc {
            let a = coeffs[nc * node + c];
            let jet = &mut out.components[c];
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

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::fem::space::{build_space, BcMode, Family};
    use crate::mesh::generate_square_mesh;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn space(k: usize) -> FESpace {
        let m = Arc::new(generate_square_mesh(1.0, 4, false).unwrap());
        build_space(m, Family::VectorContinuous, k, BcMode::None).unwrap()
    }

    #[test]
    fn constant_is_reproduced() {
        let s = space(2);
        let u = s.interpolate(|_| [c(1.0, 2.0), c(0.0, 0.0)]);
        for t in [0, 5, 17] {
            let e = eval_fe(&s, &u, t, [0.2, 0.3]).unwrap();
            assert!((e.value()[0] - c(1.0, 2.0)).norm() < 1e-13);
            assert!(e.components[0].g.iter().all(|g| g.norm() < 1e-12));
        }
    }

    #[test]
    fn linear_field_has_divergence_two() {
        for k in 1..=3 {
            let s = space(k);
            let u = s.interpolate(|p| [c(p.x, 0.0), c(p.y, 0.0)]);
            for t in 0..s.mesh().num_triangles() {
                let e = eval_fe(&s, &u, t, [0.1, 0.6]).unwrap();
                assert!((e.divergence() - c(2.0, 0.0)).norm() < 1e-11);
            }
        }
    }

    #[test]
    fn quadratic_second_derivative() {
        let s = space(2);
        let u = s.interpolate(|p| [c(p.x * p.x, 0.0), c(0.0, 0.0)]);
        for t in 0..s.mesh().num_triangles() {
            let e = eval_fe(&s, &u, t, [0.3, 0.3]).unwrap();
            assert!((e.components[0].h[0] - c(2.0, 0.0)).norm() < 1e-10);
            assert!(e.components[0].h[1].norm() < 1e-10);
        }
    }

    #[test]
    fn length_and_index_errors() {
        let s = space(1);
        assert!(matches!(eval_fe(&s, &[], 0, [0.0, 0.0]), Err(FemError::LengthMismatch { .. })));
        let u = vec![Complex64::default(); s.num_dofs()];
        assert!(matches!(eval_fe(&s, &u, 10_000, [0.0, 0.0]), Err(FemError::TriangleOutOfRange(_))));
    }
}
