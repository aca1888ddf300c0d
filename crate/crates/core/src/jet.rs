//! Second-order forward-mode jets: value, gradient and Hessian of a function
//! of `(x, y)` carried through arithmetic.
//!
//! Coefficients, the source Gaussian and the manufactured field are all built
//! from these, so their derivatives are exact up to rounding.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::mesh::Point2;

/// Value, gradient `[∂x, ∂y]` and Hessian `[∂xx, ∂xy, ∂yy]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet<T> {
    pub v: T,
    pub g: [T; 2],
    pub h: [T; 3],
}

pub type RealJet = Jet<f64>;
pub type ComplexJet = Jet<Complex64>;

impl<T: Copy> Jet<T> {
    pub const fn new(v: T, g: [T; 2], h: [T; 3]) -> Self {
        Self { v, g, h }
    }

    /// Hessian as a full symmetric 2×2 array.
    pub fn hessian(&self) -> [[T; 2]; 2] {
        [[self.h[0], self.h[1]], [self.h[1], self.h[2]]]
    }
}

impl RealJet {
    pub fn constant(c: f64) -> Self {
        Self { v: c, g: [0.0; 2], h: [0.0; 3] }
    }

    pub fn x(p: Point2) -> Self {
        Self { v: p.x, g: [1.0, 0.0], h: [0.0; 3] }
    }

    pub fn y(p: Point2) -> Self {
        Self { v: p.y, g: [0.0, 1.0], h: [0.0; 3] }
    }

    /// Applies a scalar function given its value and first two derivatives
    /// at `self.v`.
    pub fn chain(self, f: f64, df: f64, d2f: f64) -> Self {
        let [gx, gy] = self.g;
        Self {
            v: f,
            g: [df * gx, df * gy],
            h: [
                d2f * gx * gx + df * self.h[0],
                d2f * gx * gy + df * self.h[1],
                d2f * gy * gy + df * self.h[2],
            ],
        }
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn recip(self) -> Self {
        let r = 1.0 / self.v;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }

    pub fn to_complex(self) -> ComplexJet {
        Jet {
            v: Complex64::new(self.v, 0.0),
            g: self.g.map(|x| Complex64::new(x, 0.0)),
            h: self.h.map(|x| Complex64::new(x, 0.0)),
        }
    }
}

impl<T> Jet<T>
where
    T: Copy + Mul<f64, Output = T>,
{
    pub fn scale(self, s: f64) -> Self {
        Self { v: self.v * s, g: self.g.map(|x| x * s), h: self.h.map(|x| x * s) }
    }
}

impl ComplexJet {
    pub fn scale_c(self, s: Complex64) -> Self {
        Self { v: self.v * s, g: self.g.map(|x| x * s), h: self.h.map(|x| x * s) }
    }
}

impl<T: Copy + Add<Output = T>> Add for Jet<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            v: self.v + o.v,
            g: [self.g[0] + o.g[0], self.g[1] + o.g[1]],
            h: [self.h[0] + o.h[0], self.h[1] + o.h[1], self.h[2] + o.h[2]],
        }
    }
}

impl<T: Copy + Add<Output = T>> AddAssign for Jet<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Copy + Sub<Output = T>> Sub for Jet<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self {
            v: self.v - o.v,
            g: [self.g[0] - o.g[0], self.g[1] - o.g[1]],
            h: [self.h[0] - o.h[0], self.h[1] - o.h[1], self.h[2] - o.h[2]],
        }
    }
}

impl<T: Copy + Neg<Output = T>> Neg for Jet<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self { v: -self.v, g: self.g.map(|x| -x), h: self.h.map(|x| -x) }
    }
}

impl<T: Copy + Add<Output = T> + Mul<Output = T>> Mul for Jet<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let (a, b) = (self, o);
        Self {
            v: a.v * b.v,
            g: [a.g[0] * b.v + a.v * b.g[0], a.g[1] * b.v + a.v * b.g[1]],
            h: [
                a.h[0] * b.v + a.g[0] * b.g[0] + a.g[0] * b.g[0] + a.v * b.h[0],
                a.h[1] * b.v + a.g[0] * b.g[1] + a.g[1] * b.g[0] + a.v * b.h[1],
                a.h[2] * b.v + a.g[1] * b.g[1] + a.g[1] * b.g[1] + a.v * b.h[2],
            ],
        }
    }
}

impl Div for RealJet {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        self * o.recip()
    }
}

impl Add<f64> for RealJet {
    type Output = Self;
    fn add(mut self, c: f64) -> Self {
        self.v += c;
        self
    }
}

impl Mul<f64> for RealJet {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        self.scale(s)
    }
}
