//! Analytic coefficient fields, background flows and the Gaussian source.
//!
//! Every field is a closure returning a [`RealJet`], so gradients and
//! Hessians come out of forward-mode differentiation rather than being
//! typed in by hand.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::jet::RealJet;
use crate::mesh::{Point2, DOMAIN_MAX, DOMAIN_MIN};

pub type ScalarField = Arc<dyn Fn(Point2) -> RealJet + Send + Sync>;
pub type VectorField = Arc<dyn Fn(Point2) -> [RealJet; 2] + Send + Sync>;
pub type SourceField = Arc<dyn Fn(Point2) -> [Complex64; 2] + Send + Sync>;

/// Default sample grid for L∞ norms.
pub const DEFAULT_GRID: usize = 512;
pub const MIN_GRID: usize = 64;

/// Exponent of the Gaussian, chosen so that `g = 1e-6·g(0)` on the unit circle.
pub fn gaussian_exponent() -> f64 {
    1e6f64.ln()
}

/// Background flows of the test medium.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    /// Positive, slowly varying flow for periodic problems.
    Periodic,
    /// Cellular flow tangential to the boundary of the square.
    Normal,
}

impl Flow {
    pub fn name(self) -> &'static str {
        match self {
            Flow::Periodic => "periodic_flow",
            Flow::Normal => "normal_flow",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "periodic_flow" | "periodic" => Some(Flow::Periodic),
            "normal_flow" | "normal" => Some(Flow::Normal),
            _ => None,
        }
    }
}

/// Physical coefficients of the Galbrun operator.
#[derive(Clone)]
pub struct CoefficientSet {
    pub rho: ScalarField,
    pub cs2: ScalarField,
    pub p: ScalarField,
    pub phi: ScalarField,
    pub gamma: ScalarField,
    pub b: VectorField,
    pub omega: f64,
    /// Rotation rate; `Ω×u = Ω(−u₂, u₁)`.
    pub rotation: f64,
    /// Stated bounds of `ρ` and `c_s²`, if known in closed form. Grid
    /// sampling is used otherwise.
    pub bounds: Option<MediumBounds>,
}

/// Lower and upper bounds `[lo, hi]` of the density and squared sound speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MediumBounds {
    pub rho: [f64; 2],
    pub cs2: [f64; 2],
}

impl fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.eval(Point2::new(0.0, 0.0));
        f.debug_struct("CoefficientSet")
            .field("rho(0)", &c.rho.v)
            .field("cs2(0)", &c.cs2.v)
            .field("b(0)", &[c.b[0].v, c.b[1].v])
            .field("omega", &self.omega)
            .field("rotation", &self.rotation)
            .finish()
    }
}

/// All coefficients evaluated at one point.
#[derive(Debug, Clone, Copy)]
pub struct CoefficientValues {
    pub rho: RealJet,
    pub cs2: RealJet,
    pub p: RealJet,
    pub phi: RealJet,
    pub gamma: RealJet,
    pub b: [RealJet; 2],
}

impl CoefficientValues {
    /// `c_s² ρ`, the weight of the divergence terms.
    pub fn bulk(&self) -> f64 {
        self.cs2.v * self.rho.v
    }

    /// `Hess p − ρ Hess φ`.
    pub fn potential_hessian(&self) -> [[f64; 2]; 2] {
        let hp = self.p.hessian();
        let hf = self.phi.hessian();
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = hp[i][j] - self.rho.v * hf[i][j];
            }
        }
        out
    }

    /// `m = −ρ⁻¹ Hess p + Hess φ`.
    pub fn m_matrix(&self) -> [[f64; 2]; 2] {
        let h = self.potential_hessian();
        h.map(|row| row.map(|x| -x / self.rho.v))
    }

    pub fn b_value(&self) -> [f64; 2] {
        [self.b[0].v, self.b[1].v]
    }
}

fn constant_field(c: f64) -> ScalarField {
    Arc::new(move |_| RealJet::constant(c))
}

fn medium_rho(p: Point2) -> RealJet {
    let x = RealJet::x(p);
    let y = RealJet::y(p);
    (x * (PI / 4.0)).cos() * (y * (PI / 2.0)).sin() * 0.2 + 1.5
}

impl CoefficientSet {
    pub fn eval(&self, p: Point2) -> CoefficientValues {
        CoefficientValues {
            rho: (self.rho)(p),
            cs2: (self.cs2)(p),
            p: (self.p)(p),
            phi: (self.phi)(p),
            gamma: (self.gamma)(p),
            b: (self.b)(p),
        }
    }

    /// Homogeneous medium with constant pressure and a uniform flow.
    pub fn constant(rho: f64, cs2: f64, omega: f64, gamma: f64, b: [f64; 2]) -> Self {
        Self {
            rho: constant_field(rho),
            cs2: constant_field(cs2),
            p: constant_field(1.0),
            phi: constant_field(0.0),
            gamma: constant_field(gamma),
            b: Arc::new(move |_| b.map(RealJet::constant)),
            omega,
            rotation: 0.0,
            bounds: Some(MediumBounds { rho: [rho; 2], cs2: [cs2; 2] }),
        }
    }

    /// Replaces the background flow.
    pub fn with_flow(mut self, b: VectorField) -> Self {
        self.b = b;
        self
    }
}

/// The stratified test medium with flow amplitude `alpha`.
///
/// `φ` is zero; `Ω` is zero.
pub fn test_medium(alpha: f64, flow: Flow) -> CoefficientSet {
    let cs2: ScalarField = Arc::new(|p| medium_rho(p) * 0.16 + 1.44);
    let pressure: ScalarField = Arc::new(|p| {
        let r = medium_rho(p);
        r * 1.44 + r * r * 0.08
    });
    let b: VectorField = match flow {
        Flow::Periodic => Arc::new(move |p| {
            let x = RealJet::x(p);
            let y = RealJet::y(p);
            let s = medium_rho(p).recip() * alpha;
            let b1 = (y * (PI / 4.0)).cos() * 0.1 + 0.3;
            let b2 = (x * (PI / 4.0)).sin() * 0.08 + 0.2;
            [s * b1, s * b2]
        }),
        Flow::Normal => Arc::new(move |p| {
            let x = RealJet::x(p);
            let y = RealJet::y(p);
            let s = medium_rho(p).recip() * alpha;
            let (xs, ys) = (x * PI, y * PI);
            [s * xs.sin() * ys.cos(), -(s * xs.cos() * ys.sin())]
        }),
    };
    CoefficientSet {
        rho: Arc::new(medium_rho),
        cs2,
        p: pressure,
        phi: constant_field(0.0),
        gamma: constant_field(0.1),
        b,
        omega: 0.78 * 2.0 * PI,
        rotation: 0.0,
        // ρ = 1.5 ± 0.2 and c_s² = 1.44 + 0.16ρ with its constant part as
        // the lower bound
        bounds: Some(MediumBounds { rho: [1.3, 1.7], cs2: [1.44, 1.44 + 0.16 * 1.7] }),
    }
}

/// `g = √(a/π)·exp(−a(x²+y²))` with `a = ln 10⁶`.
pub fn gaussian(p: Point2) -> RealJet {
    let a = gaussian_exponent();
    let x = RealJet::x(p);
    let y = RealJet::y(p);
    ((x * x + y * y) * (-a)).exp() * (a / PI).sqrt()
}

/// `s = (−iω g + b·∇g, 0)`.
pub fn gaussian_source(set: &CoefficientSet) -> SourceField {
    let set = set.clone();
    Arc::new(move |p| {
        let g = gaussian(p);
        let b = (set.b)(p);
        let conv = b[0].v * g.g[0] + b[1].v * g.g[1];
        [Complex64::new(conv, -set.omega * g.v), Complex64::new(0.0, 0.0)]
    })
}

/// `n × n` uniform grid over the closed square, endpoints included.
pub fn grid_points(n: usize) -> impl Iterator<Item = Point2> {
    let n = n.max(2);
    let step = (DOMAIN_MAX - DOMAIN_MIN) / (n - 1) as f64;
    (0..n).flat_map(move |j| {
        (0..n).map(move |i| Point2::new(DOMAIN_MIN + i as f64 * step, DOMAIN_MIN + j as f64 * step))
    })
}

/// `‖c_s⁻¹ b‖²_∞` as a grid maximum. The pointwise vector norm is the max
/// norm over components. Resolutions below [`MIN_GRID`] are raised to it.
pub fn mach_number_sq(set: &CoefficientSet, resolution: usize) -> f64 {
    grid_points(resolution.max(MIN_GRID))
        .map(|p| {
            let b = (set.b)(p);
            let bmax = b[0].v.abs().max(b[1].v.abs());
            bmax * bmax / (set.cs2)(p).v
        })
        .fold(0.0, f64::max)
}

/// Largest deviation between the analytic first/second derivatives of every
/// field and central finite differences, relative to `1 + |exact|`.
pub fn check_derivatives(set: &CoefficientSet, samples: usize, seed: u64) -> f64 {
    const STEP: f64 = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fields: Vec<Box<dyn Fn(Point2) -> RealJet + '_>> = vec![
        Box::new(|p| (set.rho)(p)),
        Box::new(|p| (set.cs2)(p)),
        Box::new(|p| (set.p)(p)),
        Box::new(|p| (set.phi)(p)),
        Box::new(|p| (set.gamma)(p)),
        Box::new(|p| (set.b)(p)[0]),
        Box::new(|p| (set.b)(p)[1]),
    ];
    let margin = 2.0 * STEP;
    let mut worst: f64 = 0.0;
    for _ in 0..samples.max(1) {
        let p = Point2::new(
            rng.random_range(DOMAIN_MIN + margin..DOMAIN_MAX - margin),
            rng.random_range(DOMAIN_MIN + margin..DOMAIN_MAX - margin),
        );
        for f in &fields {
            let j = f(p);
            let xp = f(Point2::new(p.x + STEP, p.y));
            let xm = f(Point2::new(p.x - STEP, p.y));
            let yp = f(Point2::new(p.x, p.y + STEP));
            let ym = f(Point2::new(p.x, p.y - STEP));
            let d = 2.0 * STEP;
            let pairs = [
                ((xp.v - xm.v) / d, j.g[0]),
                ((yp.v - ym.v) / d, j.g[1]),
                ((xp.g[0] - xm.g[0]) / d, j.h[0]),
                ((yp.g[0] - ym.g[0]) / d, j.h[1]),
                ((xp.g[1] - xm.g[1]) / d, j.h[1]),
                ((yp.g[1] - ym.g[1]) / d, j.h[2]),
            ];
            for (fd, exact) in pairs {
                worst = worst.max((fd - exact).abs() / (1.0 + exact.abs()));
            }
        }
    }
    worst
}
