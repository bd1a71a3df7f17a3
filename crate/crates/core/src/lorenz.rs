//! The Lorenz vector field: parameters, Jacobian, fixed points and their
//! spectra, exact higher time derivatives, and the (x, y, z) -> (-x, -y, z)
//! symmetry.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub, SubAssign};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the Lorenz phase space.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl State3 {
    pub const ZERO: State3 = State3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: State3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: State3) -> State3 {
        State3::new(self.y * o.z - self.z * o.y, self.z * o.x - self.x * o.z, self.x * o.y - self.y * o.x)
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dist(self, o: State3) -> f64 {
        (self - o).norm()
    }

    pub fn max_abs(self) -> f64 {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Scalar triple product `[self, b, c]`.
    pub fn triple(self, b: State3, c: State3) -> f64 {
        self.dot(b.cross(c))
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        State3::new(v[0], v[1], v[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for State3 {
    fn from(a: [f64; 3]) -> Self {
        State3::new(a[0], a[1], a[2])
    }
}

impl Index<usize> for State3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("State3 index {i} out of range"),
        }
    }
}

impl Add for State3 {
    type Output = State3;
    fn add(self, o: State3) -> State3 {
        State3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for State3 {
    fn add_assign(&mut self, o: State3) {
        *self = *self + o;
    }
}

impl Sub for State3 {
    type Output = State3;
    fn sub(self, o: State3) -> State3 {
        State3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for State3 {
    fn sub_assign(&mut self, o: State3) {
        *self = *self - o;
    }
}

impl Mul<f64> for State3 {
    type Output = State3;
    fn mul(self, k: f64) -> State3 {
        State3::new(self.x * k, self.y * k, self.z * k)
    }
}

impl Mul<State3> for f64 {
    type Output = State3;
    fn mul(self, s: State3) -> State3 {
        s * self
    }
}

impl Div<f64> for State3 {
    type Output = State3;
    fn div(self, k: f64) -> State3 {
        State3::new(self.x / k, self.y / k, self.z / k)
    }
}

impl Neg for State3 {
    type Output = State3;
    fn neg(self) -> State3 {
        State3::new(-self.x, -self.y, -self.z)
    }
}

impl fmt::Display for State3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// Matrix-vector product for the small fixed-size matrices used throughout.
pub fn mat_vec(m: &Matrix3<f64>, v: State3) -> State3 {
    State3::new(
        m[(0, 0)] * v.x + m[(0, 1)] * v.y + m[(0, 2)] * v.z,
        m[(1, 0)] * v.x + m[(1, 1)] * v.y + m[(1, 2)] * v.z,
        m[(2, 0)] * v.x + m[(2, 1)] * v.y + m[(2, 2)] * v.z,
    )
}

/// An autonomous vector field on R^3 whose second derivative is available in
/// closed form. Closure and verification are written against this interface.
pub trait VectorField: Sync {
    fn eval(&self, s: State3) -> State3;

    fn jacobian(&self, s: State3) -> Matrix3<f64>;

    /// The symmetric bilinear form `D²f(s)[u, v]`.
    fn second_derivative(&self, s: State3, u: State3, v: State3) -> State3;

    fn divergence(&self, s: State3) -> f64 {
        self.jacobian(s).trace()
    }
}

/// Lorenz parameters `(sigma, eta, r)`.
///
/// `eta` defaults to `8.0 / 3.0`, which is not exactly representable; the
/// stored value is the nearest double.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorenzParams {
    pub sigma: f64,
    pub eta: f64,
    pub r: f64,
}

impl Default for LorenzParams {
    fn default() -> Self {
        Self { sigma: 10.0, eta: 8.0 / 3.0, r: 28.0 }
    }
}

impl LorenzParams {
    pub fn new(sigma: f64, eta: f64, r: f64) -> Result<Self> {
        let p = Self { sigma, eta, r };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("sigma", self.sigma), ("eta", self.eta), ("r", self.r)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!("parameter {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// The Lorenz right-hand side `(σ(y−x), rx − y − xz, xy − ηz)`.
    pub fn rhs(&self, s: State3) -> State3 {
        State3::new(self.sigma * (s.y - s.x), self.r * s.x - s.y - s.x * s.z, s.x * s.y - self.eta * s.z)
    }

    pub fn jacobian(&self, s: State3) -> Matrix3<f64> {
        Matrix3::new(-self.sigma, self.sigma, 0.0, self.r - s.z, -1.0, -s.x, s.y, s.x, -self.eta)
    }

    /// Constant divergence `-(σ + 1 + η)` of the field.
    pub fn divergence(&self) -> f64 {
        -(self.sigma + 1.0 + self.eta)
    }

    /// Height of the two wing equilibria, `r − 1`.
    pub fn wing_height(&self) -> f64 {
        self.r - 1.0
    }
}

impl VectorField for LorenzParams {
    fn eval(&self, s: State3) -> State3 {
        self.rhs(s)
    }

    fn jacobian(&self, s: State3) -> Matrix3<f64> {
        LorenzParams::jacobian(self, s)
    }

    fn second_derivative(&self, _s: State3, u: State3, v: State3) -> State3 {
        // Only the xz and xy cross terms are nonlinear.
        State3::new(0.0, -(u.x * v.z + u.z * v.x), u.x * v.y + u.y * v.x)
    }

    fn divergence(&self, _s: State3) -> f64 {
        LorenzParams::divergence(self)
    }
}

pub fn rhs(s: State3, p: &LorenzParams) -> State3 {
    p.rhs(s)
}

pub fn jacobian(s: State3, p: &LorenzParams) -> Matrix3<f64> {
    p.jacobian(s)
}

/// The equivariance `(x, y, z) -> (−x, −y, z)`.
pub fn symmetry(s: State3) -> State3 {
    State3::new(-s.x, -s.y, s.z)
}

/// `[z_t, z_tt, z_ttt]` along the trajectory through `s`, truncated to `order`
/// entries (1..=3).
pub fn time_derivatives<F: VectorField + ?Sized>(s: State3, field: &F, order: usize) -> Result<Vec<State3>> {
    if !(1..=3).contains(&order) {
        return Err(Error::InvalidInput(format!("derivative order must be 1..=3, got {order}")));
    }
    let [d1, d2, d3] = derivatives3(s, field);
    Ok([d1, d2, d3][..order].to_vec())
}

/// All three derivatives at once, without allocation.
pub fn derivatives3<F: VectorField + ?Sized>(s: State3, field: &F) -> [State3; 3] {
    let j = field.jacobian(s);
    let d1 = field.eval(s);
    let d2 = mat_vec(&j, d1);
    let d3 = mat_vec(&j, d2) + field.second_derivative(s, d1, d1);
    [d1, d2, d3]
}

/// A complex eigenvalue stored as `(re, im)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

impl Eigenvalue {
    pub fn real(re: f64) -> Self {
        Self { re, im: 0.0 }
    }
}

impl fmt::Display for Eigenvalue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im == 0.0 {
            write!(f, "{:.4}", self.re)
        } else {
            write!(f, "{:.4}{:+.4}i", self.re, self.im)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FixedPointKind {
    Origin,
    Wing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport {
    pub location: State3,
    pub eigenvalues: Vec<Eigenvalue>,
    pub classification: FixedPointKind,
}

/// The origin and, for `r > 1`, the symmetric wing pair
/// `(±√(η(r−1)), ±√(η(r−1)), r−1)`.
pub fn fixed_points(p: &LorenzParams) -> Vec<FixedPointReport> {
    let mut out = Vec::with_capacity(3);
    let mut push = |location: State3, classification| {
        out.push(FixedPointReport {
            location,
            eigenvalues: eigenvalues3(&p.jacobian(location)),
            classification,
        });
    };
    push(State3::ZERO, FixedPointKind::Origin);
    if p.r > 1.0 {
        let a = (p.eta * (p.r - 1.0)).sqrt();
        push(State3::new(a, a, p.r - 1.0), FixedPointKind::Wing);
        push(State3::new(-a, -a, p.r - 1.0), FixedPointKind::Wing);
    }
    out
}

/// Period `2π/ω` of the spiral around an equilibrium with a complex pair
/// `μ ± iω`. `None` when the spectrum is real.
pub fn spiral_period(report: &FixedPointReport) -> Option<f64> {
    report.eigenvalues.iter().find(|e| e.im > 0.0).map(|e| 2.0 * std::f64::consts::PI / e.im)
}

/// Spectrum of a real 3×3 matrix by closed-form factorisation of the
/// characteristic cubic: one real root from Cardano (or the trigonometric form
/// when all roots are real), polished by Newton, then the deflated quadratic.
/// Sorted by descending real part, then descending imaginary part.
pub fn eigenvalues3(m: &Matrix3<f64>) -> Vec<Eigenvalue> {
    // λ³ + a λ² + b λ + c
    let a = -m.trace();
    let b = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)] + m[(0, 0)] * m[(2, 2)] - m[(0, 2)] * m[(2, 0)]
        + m[(1, 1)] * m[(2, 2)]
        - m[(1, 2)] * m[(2, 1)];
    let c = -m.determinant();

    let cubic = |x: f64| ((x + a) * x + b) * x + c;
    let dcubic = |x: f64| (3.0 * x + 2.0 * a) * x + b;
    let polish = |mut x: f64| {
        for _ in 0..8 {
            let d = dcubic(x);
            if d == 0.0 {
                break;
            }
            let step = cubic(x) / d;
            x -= step;
            if step.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        x
    };

    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    let shift = -a / 3.0;

    let mut out = if disc > 0.0 {
        let sq = disc.sqrt();
        let t = (-q / 2.0 + sq).cbrt() + (-q / 2.0 - sq).cbrt();
        let root = polish(t + shift);
        // Deflate: λ² + (a + root) λ + (b + (a + root) root)
        let bb = a + root;
        let cc = b + bb * root;
        let d = bb * bb / 4.0 - cc;
        let mut v = vec![Eigenvalue::real(root)];
        if d >= 0.0 {
            let s = d.sqrt();
            v.push(Eigenvalue::real(-bb / 2.0 + s));
            v.push(Eigenvalue::real(-bb / 2.0 - s));
        } else {
            let s = (-d).sqrt();
            v.push(Eigenvalue { re: -bb / 2.0, im: s });
            v.push(Eigenvalue { re: -bb / 2.0, im: -s });
        }
        v
    } else {
        let r = (-p / 3.0).max(0.0).sqrt();
        let arg = if r == 0.0 { 0.0 } else { (-q / (2.0 * r * r * r)).clamp(-1.0, 1.0) };
        let phi = arg.acos() / 3.0;
        (0..3)
            .map(|k| {
                let t = 2.0 * r * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos();
                Eigenvalue::real(polish(t + shift))
            })
            .collect()
    };
    out.sort_by(|u, v| {
        v.re.partial_cmp(&u.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(v.im.partial_cmp(&u.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    out
}
