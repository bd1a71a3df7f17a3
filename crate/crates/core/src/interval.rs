//! Closed real intervals with outward-rounded arithmetic.
//!
//! Two rounding policies implement [`Rounding`]. [`NudgeUlp`] widens every
//! rounded-to-nearest endpoint by one ulp. [`Directed`] recovers the exact
//! rounding error of each primitive operation (TwoSum, fused multiply-add
//! residuals) and moves an endpoint one ulp only when the rounded value lies
//! on the wrong side, which is what a directed hardware rounding mode yields.
//! The `directed-rounding` feature selects [`Directed`] as [`Active`];
//! otherwise [`NudgeUlp`] is used. Every operation is also available with an
//! explicit policy (`add_with::<R>` and friends).

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this magnitude products and quotients may be subnormal, where the
/// FMA residual is no longer exact; both policies then nudge.
const TINY: f64 = 1e-290;

pub trait Rounding {
    /// Lower and upper bounds of the exact value `r + err`, where `r` is the
    /// round-to-nearest result and `err` the rounding error (only its sign
    /// is used by exact policies).
    fn bounds(r: f64, err: f64) -> (f64, f64);
}

/// One ulp outward on every endpoint.
#[derive(Debug, Clone, Copy)]
pub struct NudgeUlp;

/// Exact directed rounding via error-free transformations.
#[derive(Debug, Clone, Copy)]
pub struct Directed;

impl Rounding for NudgeUlp {
    #[inline]
    fn bounds(r: f64, _err: f64) -> (f64, f64) {
        (r.next_down(), r.next_up())
    }
}

impl Rounding for Directed {
    #[inline]
    fn bounds(r: f64, err: f64) -> (f64, f64) {
        if err > 0.0 {
            (r, r.next_up())
        } else if err < 0.0 {
            (r.next_down(), r)
        } else if err == 0.0 {
            (r, r)
        } else {
            (r.next_down(), r.next_up())
        }
    }
}

#[cfg(feature = "directed-rounding")]
pub type Active = Directed;
#[cfg(not(feature = "directed-rounding"))]
pub type Active = NudgeUlp;

/// Name of the active rounding policy.
pub const fn rounding_mode() -> &'static str {
    if cfg!(feature = "directed-rounding") {
        "directed"
    } else {
        "nudge-ulp"
    }
}

#[inline]
fn finite_or_wide(lo: f64, hi: f64, r: f64) -> (f64, f64) {
    if r.is_finite() {
        (lo, hi)
    } else if r == f64::INFINITY {
        (f64::MAX, f64::INFINITY)
    } else if r == f64::NEG_INFINITY {
        (f64::NEG_INFINITY, -f64::MAX)
    } else {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
}

#[inline]
fn add_b<R: Rounding>(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    // TwoSum: s + e == a + b exactly.
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    let (lo, hi) = R::bounds(s, e);
    finite_or_wide(lo, hi, s)
}

#[inline]
fn mul_b<R: Rounding>(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    if p != 0.0 && p.abs() < TINY || (p == 0.0 && a != 0.0 && b != 0.0) {
        return NudgeUlp::bounds(p, f64::NAN);
    }
    let e = a.mul_add(b, -p);
    let (lo, hi) = R::bounds(p, e);
    finite_or_wide(lo, hi, p)
}

#[inline]
fn div_b<R: Rounding>(a: f64, b: f64) -> (f64, f64) {
    let q = a / b;
    if q != 0.0 && q.abs() < TINY || (q == 0.0 && a != 0.0) {
        return NudgeUlp::bounds(q, f64::NAN);
    }
    // a − q b is exact; a/b − q has its sign times sign(b).
    let r = (-q).mul_add(b, a);
    let (lo, hi) = R::bounds(q, r * b.signum());
    finite_or_wide(lo, hi, q)
}

#[inline]
fn sqrt_b<R: Rounding>(a: f64) -> (f64, f64) {
    let s = a.sqrt();
    if s == 0.0 {
        return (0.0, 0.0);
    }
    if a < TINY {
        let (lo, hi) = NudgeUlp::bounds(s, f64::NAN);
        return (lo.max(0.0), hi);
    }
    // a − s² is exact; sqrt(a) > s iff it is positive.
    let r = (-s).mul_add(s, a);
    let (lo, hi) = R::bounds(s, r);
    (lo.max(0.0), finite_or_wide(lo, hi, s).1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };
    pub const ONE: Interval = Interval { lo: 1.0, hi: 1.0 };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::InvalidInput(format!("invalid interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    /// Hull of two numbers in either order.
    pub fn hull_of(a: f64, b: f64) -> Self {
        Self { lo: a.min(b), hi: a.max(b) }
    }

    pub const fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    /// `[c − r, c + r]` rounded outward.
    pub fn centered(c: f64, r: f64) -> Self {
        let r = r.abs();
        Self { lo: add_b::<Active>(c, -r).0, hi: add_b::<Active>(c, r).1 }
    }

    /// `[−r, r]`.
    pub fn symmetric(r: f64) -> Self {
        Self { lo: -r.abs(), hi: r.abs() }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn mid(&self) -> f64 {
        if self.lo == f64::NEG_INFINITY || self.hi == f64::INFINITY {
            return 0.5 * self.lo + 0.5 * self.hi;
        }
        let m = 0.5 * (self.lo + self.hi);
        if m.is_finite() {
            m
        } else {
            0.5 * self.lo + 0.5 * self.hi
        }
    }

    /// Upper bound of `hi − lo`.
    pub fn width(&self) -> f64 {
        add_b::<Active>(self.hi, -self.lo).1
    }

    /// Upper bound of the radius about [`mid`](Self::mid).
    pub fn rad(&self) -> f64 {
        let m = self.mid();
        add_b::<Active>(m, -self.lo).1.max(add_b::<Active>(self.hi, -m).1)
    }

    /// `max |x|` over the interval.
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    /// `min |x|` over the interval.
    pub fn mig(&self) -> f64 {
        if self.contains(0.0) {
            0.0
        } else {
            self.lo.abs().min(self.hi.abs())
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn subset_of(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    /// Strict containment in the interior of `other`.
    pub fn interior_of(&self, other: &Interval) -> bool {
        other.lo < self.lo && self.hi < other.hi
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval { lo: self.lo.min(other.lo), hi: self.hi.max(other.hi) }
    }

    /// Widens both ends by `r ≥ 0`.
    pub fn inflate(&self, r: f64) -> Interval {
        self.add(Interval::symmetric(r))
    }

    pub fn add_with<R: Rounding>(self, o: Interval) -> Interval {
        Interval { lo: add_b::<R>(self.lo, o.lo).0, hi: add_b::<R>(self.hi, o.hi).1 }
    }

    pub fn sub_with<R: Rounding>(self, o: Interval) -> Interval {
        self.add_with::<R>(-o)
    }

    pub fn mul_with<R: Rounding>(self, o: Interval) -> Interval {
        if self.is_point() && self.lo == 0.0 || o.is_point() && o.lo == 0.0 {
            return Interval::ZERO;
        }
        let c = [
            mul_b::<R>(self.lo, o.lo),
            mul_b::<R>(self.lo, o.hi),
            mul_b::<R>(self.hi, o.lo),
            mul_b::<R>(self.hi, o.hi),
        ];
        let lo = c.iter().map(|b| b.0).fold(f64::INFINITY, f64::min);
        let hi = c.iter().map(|b| b.1).fold(f64::NEG_INFINITY, f64::max);
        Interval { lo, hi }
    }

    pub fn div_with<R: Rounding>(self, o: Interval) -> Result<Interval> {
        if o.contains_zero() {
            return Err(Error::DivisionByZeroInterval);
        }
        let c = [
            div_b::<R>(self.lo, o.lo),
            div_b::<R>(self.lo, o.hi),
            div_b::<R>(self.hi, o.lo),
            div_b::<R>(self.hi, o.hi),
        ];
        let lo = c.iter().map(|b| b.0).fold(f64::INFINITY, f64::min);
        let hi = c.iter().map(|b| b.1).fold(f64::NEG_INFINITY, f64::max);
        Ok(Interval { lo, hi })
    }

    /// Square with the dependency handled: `[−1, 2]² = [0, 4]`.
    pub fn sqr_with<R: Rounding>(self) -> Interval {
        let a = mul_b::<R>(self.lo, self.lo);
        let b = mul_b::<R>(self.hi, self.hi);
        if self.contains_zero() {
            Interval { lo: 0.0, hi: a.1.max(b.1) }
        } else {
            Interval { lo: a.0.min(b.0).max(0.0), hi: a.1.max(b.1) }
        }
    }

    pub fn sqrt_with<R: Rounding>(self) -> Result<Interval> {
        if self.hi < 0.0 {
            return Err(Error::InvalidInput(format!("sqrt of negative interval {self}")));
        }
        let lo = if self.lo <= 0.0 { 0.0 } else { sqrt_b::<R>(self.lo).0 };
        Ok(Interval { lo, hi: sqrt_b::<R>(self.hi).1 })
    }

    // Fallible, so not `std::ops::Div`.
    #[allow(clippy::should_implement_trait)]
    pub fn div(self, o: Interval) -> Result<Interval> {
        self.div_with::<Active>(o)
    }

    pub fn sqr(self) -> Interval {
        self.sqr_with::<Active>()
    }

    pub fn sqrt(self) -> Result<Interval> {
        self.sqrt_with::<Active>()
    }

    pub fn abs(self) -> Interval {
        Interval { lo: self.mig(), hi: self.mag() }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:e}, {:e}]", self.lo, self.hi)
    }
}

impl From<f64> for Interval {
    fn from(x: f64) -> Self {
        Interval::point(x)
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval { lo: -self.hi, hi: -self.lo }
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, o: Interval) -> Interval {
        self.add_with::<Active>(o)
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, o: Interval) -> Interval {
        self.sub_with::<Active>(o)
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, o: Interval) -> Interval {
        self.mul_with::<Active>(o)
    }
}

impl Add<f64> for Interval {
    type Output = Interval;
    fn add(self, o: f64) -> Interval {
        self + Interval::point(o)
    }
}

impl Sub<f64> for Interval {
    type Output = Interval;
    fn sub(self, o: f64) -> Interval {
        self - Interval::point(o)
    }
}

impl Mul<f64> for Interval {
    type Output = Interval;
    fn mul(self, o: f64) -> Interval {
        self * Interval::point(o)
    }
}

impl Mul<Interval> for f64 {
    type Output = Interval;
    fn mul(self, o: Interval) -> Interval {
        Interval::point(self) * o
    }
}

impl std::iter::Sum for Interval {
    fn sum<I: Iterator<Item = Interval>>(iter: I) -> Interval {
        iter.fold(Interval::ZERO, |a, b| a + b)
    }
}

/// A box: one interval per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalVector {
    pub components: Vec<Interval>,
}

impl IntervalVector {
    pub fn new(components: Vec<Interval>) -> Self {
        Self { components }
    }

    pub fn from_points(x: &[f64]) -> Self {
        Self::new(x.iter().map(|&v| Interval::point(v)).collect())
    }

    /// `x ± r` componentwise, rounded outward.
    pub fn centered(x: &[f64], r: f64) -> Self {
        Self::new(x.iter().map(|&v| Interval::centered(v, r)).collect())
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![Interval::ZERO; n])
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn mid(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.mid()).collect()
    }

    pub fn max_width(&self) -> f64 {
        self.components.iter().map(|c| c.width()).fold(0.0, f64::max)
    }

    pub fn max_mag(&self) -> f64 {
        self.components.iter().map(|c| c.mag()).fold(0.0, f64::max)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.len() && self.components.iter().zip(x).all(|(c, &v)| c.contains(v))
    }

    pub fn subset_of(&self, o: &IntervalVector) -> bool {
        self.len() == o.len() && self.components.iter().zip(&o.components).all(|(a, b)| a.subset_of(b))
    }

    pub fn interior_of(&self, o: &IntervalVector) -> bool {
        self.len() == o.len() && self.components.iter().zip(&o.components).all(|(a, b)| a.interior_of(b))
    }

    pub fn intersect(&self, o: &IntervalVector) -> Option<IntervalVector> {
        if self.len() != o.len() {
            return None;
        }
        self.components
            .iter()
            .zip(&o.components)
            .map(|(a, b)| a.intersect(b))
            .collect::<Option<Vec<_>>>()
            .map(IntervalVector::new)
    }

    pub fn hull(&self, o: &IntervalVector) -> IntervalVector {
        IntervalVector::new(self.components.iter().zip(&o.components).map(|(a, b)| a.hull(b)).collect())
    }

    pub fn add(&self, o: &IntervalVector) -> IntervalVector {
        IntervalVector::new(self.components.iter().zip(&o.components).map(|(&a, &b)| a + b).collect())
    }

    pub fn sub(&self, o: &IntervalVector) -> IntervalVector {
        IntervalVector::new(self.components.iter().zip(&o.components).map(|(&a, &b)| a - b).collect())
    }

    pub fn sub_points(&self, x: &[f64]) -> IntervalVector {
        IntervalVector::new(self.components.iter().zip(x).map(|(&a, &b)| a - b).collect())
    }
}

impl std::ops::Index<usize> for IntervalVector {
    type Output = Interval;
    fn index(&self, i: usize) -> &Interval {
        &self.components[i]
    }
}

/// Dense row-major interval matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalMatrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<Interval>,
}

impl IntervalMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Interval::ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Interval::ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> Interval) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_points(m: &nalgebra::DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| Interval::point(m[(i, j)]))
    }

    pub fn mid(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)].mid())
    }

    pub fn max_width(&self) -> f64 {
        self.data.iter().map(|c| c.width()).fold(0.0, f64::max)
    }

    pub fn mul_vec(&self, v: &IntervalVector) -> IntervalVector {
        assert_eq!(self.cols, v.len(), "dimension mismatch");
        IntervalVector::new(
            (0..self.rows).map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum()).collect(),
        )
    }

    pub fn mul_mat(&self, o: &IntervalMatrix) -> IntervalMatrix {
        assert_eq!(self.cols, o.rows, "dimension mismatch");
        Self::from_fn(self.rows, o.cols, |i, j| (0..self.cols).map(|k| self[(i, k)] * o[(k, j)]).sum())
    }

    pub fn sub(&self, o: &IntervalMatrix) -> IntervalMatrix {
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] - o[(i, j)])
    }

    pub fn add(&self, o: &IntervalMatrix) -> IntervalMatrix {
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] + o[(i, j)])
    }
}

impl std::ops::Index<(usize, usize)> for IntervalMatrix {
    type Output = Interval;
    fn index(&self, (i, j): (usize, usize)) -> &Interval {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for IntervalMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Interval {
        &mut self.data[i * self.cols + j]
    }
}
