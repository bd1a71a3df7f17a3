//! Euclidean and similarity differential invariants of space curves, and the
//! similarity signature curve `(κ̃, κ̃_s̃, τ̃)` of a sampled trajectory.
//!
//! Two routes are provided. The analytic route uses exact time derivatives of
//! the flow (`z_t`, `z_tt`, `z_ttt`) and the moving-frame formulas
//!
//! ```text
//! κ  = |z_t ∧ z_tt| / |z_t|³
//! τ  = [z_t, z_tt, z_ttt] / |z_t ∧ z_tt|²
//! κ̃  = ((z_t ∧ z_ttt)·(z_t ∧ z_tt) |z_t|² − 3 (z_t·z_tt) |z_t ∧ z_tt|²) / |z_t ∧ z_tt|³
//! τ̃  = τ / κ,   κₛ = κ̃ κ²,   ds̃ = κ |z_t| dt
//! ```
//!
//! The discrete route uses only four consecutive samples (circumscribed-circle
//! curvature, chord-difference κₛ and tetrahedron-height torsion), so it is
//! Sim(3)-invariant by construction.

use std::io::{Read, Write};

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{fmt17, parse_row, Trajectory};
use crate::lorenz::{derivatives3, mat_vec, State3, VectorField};
use crate::par;

/// `|z_t ∧ z_tt| / |z_t|²` below this is treated as a straight segment.
pub const ANALYTIC_DEGENERACY: f64 = 1e-10;
/// Triangle area below this is treated as collinear.
pub const DISCRETE_AREA_DEGENERACY: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EuclideanInvariants {
    pub kappa: f64,
    pub kappa_s: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignaturePoint {
    pub kappa_tilde: f64,
    pub kappa_tilde_s: f64,
    pub tau_tilde: f64,
    pub s_tilde: f64,
}

impl SignaturePoint {
    /// The point's coordinates in signature space.
    pub fn coords(&self) -> [f64; 3] {
        [self.kappa_tilde, self.kappa_tilde_s, self.tau_tilde]
    }

    pub fn dist(&self, o: &SignaturePoint) -> f64 {
        let a = self.coords();
        let b = o.coords();
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Analytic,
    Discrete,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(Method::Analytic),
            "discrete" => Ok(Method::Discrete),
            other => Err(Error::InvalidInput(format!("unknown signature method {other:?}"))),
        }
    }
}

/// Signature points tied back to trajectory samples through `indices`.
/// Boundary samples (and any degenerate sample) have no point; they are listed
/// in `gaps`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureCurve {
    pub indices: Vec<usize>,
    pub points: Vec<SignaturePoint>,
    pub gaps: Vec<usize>,
}

impl SignatureCurve {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Trajectory index of the first signature point.
    pub fn offset(&self) -> usize {
        self.indices.first().copied().unwrap_or(0)
    }

    /// Position in `points` of trajectory sample `idx`, if it has one.
    pub fn position_of(&self, idx: usize) -> Option<usize> {
        self.indices.binary_search(&idx).ok()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["idx", "s_tilde", "kappa_tilde", "kappa_tilde_s", "tau_tilde"])?;
        for (i, p) in self.indices.iter().zip(&self.points) {
            wr.write_record([
                i.to_string(),
                fmt17(p.s_tilde),
                fmt17(p.kappa_tilde),
                fmt17(p.kappa_tilde_s),
                fmt17(p.tau_tilde),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads the CSV written by [`SignatureCurve::write_csv`]. Gaps are
    /// reconstructed only between the first and last index.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        if headers.iter().collect::<Vec<_>>()
            != ["idx", "s_tilde", "kappa_tilde", "kappa_tilde_s", "tau_tilde"]
        {
            return Err(Error::Parse(format!("unexpected signature header {headers:?}")));
        }
        let mut indices = Vec::new();
        let mut points = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let v = parse_row::<5>(&rec)?;
            if v[0] < 0.0 || v[0].fract() != 0.0 {
                return Err(Error::Parse(format!("bad index {}", v[0])));
            }
            indices.push(v[0] as usize);
            points.push(SignaturePoint {
                s_tilde: v[1],
                kappa_tilde: v[2],
                kappa_tilde_s: v[3],
                tau_tilde: v[4],
            });
        }
        let mut gaps = Vec::new();
        for w in indices.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Parse("signature indices must increase".into()));
            }
            gaps.extend(w[0] + 1..w[1]);
        }
        Ok(Self { indices, points, gaps })
    }
}

/// Euclidean curvature, its arc-length derivative and torsion from exact
/// time derivatives.
pub fn analytic_euclidean(z_t: State3, z_tt: State3, z_ttt: State3) -> Result<EuclideanInvariants> {
    let speed2 = z_t.dot(z_t);
    let w = z_t.cross(z_tt);
    let wn = w.norm();
    if speed2 == 0.0 || !(wn / speed2 > ANALYTIC_DEGENERACY) {
        return Err(Error::DegenerateCurvature);
    }
    let speed = speed2.sqrt();
    let kappa = wn / (speed2 * speed);
    let tau = z_t.triple(z_tt, z_ttt) / (wn * wn);
    let kappa_tilde = (z_t.cross(z_ttt).dot(w) * speed2 - 3.0 * z_t.dot(z_tt) * wn * wn) / (wn * wn * wn);
    Ok(EuclideanInvariants { kappa, kappa_s: kappa_tilde * kappa * kappa, tau })
}

/// `(κ̃, τ̃) = (κₛ/κ², τ/κ)`.
pub fn similarity_from_euclidean(e: &EuclideanInvariants) -> Result<(f64, f64)> {
    if !(e.kappa > 0.0) || !e.kappa.is_finite() {
        return Err(Error::DegenerateCurvature);
    }
    Ok((e.kappa_s / (e.kappa * e.kappa), e.tau / e.kappa))
}

/// Twice the area of triangle `(a, b, c)` and the three side lengths
/// `|ab|, |bc|, |ac|`.
fn triangle(a: State3, b: State3, c: State3) -> (f64, [f64; 3]) {
    let area2 = (b - a).cross(c - a).norm();
    (area2, [a.dist(b), b.dist(c), a.dist(c)])
}

fn circle_curvature(a: State3, b: State3, c: State3) -> Result<f64> {
    let (area2, [ab, bc, ac]) = triangle(a, b, c);
    if !(0.5 * area2 > DISCRETE_AREA_DEGENERACY) {
        return Err(Error::DegenerateCurvature);
    }
    // 4Δ/(abc) with Δ = area2/2
    Ok(2.0 * area2 / (ab * bc * ac))
}

/// Four-point invariants at `p_i` from `(p_{i−1}, p_i, p_{i+1}, p_{i+2})`.
///
/// With `a = |p_{i−1}p_i|`, `b = |p_i p_{i+1}|`, `c = |p_{i−1}p_{i+1}|`,
/// `d = |p_{i+1}p_{i+2}|`, `e = |p_i p_{i+2}|`, `f = |p_{i−1}p_{i+2}|`:
///
/// * `κ(p_i) = 4Δ/(abc)` for the circle through the first three points;
/// * `κₛ(p_i) = 3(κ(p_{i+1}) − κ(p_i)) / (a + b + d)`;
/// * `τ(p_i) = 6H/(def·κ(p_i))`, `H` the height of the tetrahedron over the
///   first triangle, signed by `[p_i−p_{i−1}, p_{i+1}−p_i, p_{i+2}−p_{i+1}]`.
///
/// The κₛ denominator sums three consecutive chords (≈ 3 steps), so the
/// estimate converges to κₛ; a denominator of `a + b + c` would converge to
/// `0.75 κₛ`. Area and volume come from cross and triple products, which agree
/// with Heron and Cayley–Menger but keep precision on nearly flat stencils.
pub fn discrete_euclidean(
    p_prev: State3,
    p_i: State3,
    p_next: State3,
    p_next2: State3,
) -> Result<EuclideanInvariants> {
    let (area2, [a, b, _c]) = triangle(p_prev, p_i, p_next);
    if !(0.5 * area2 > DISCRETE_AREA_DEGENERACY) {
        return Err(Error::DegenerateCurvature);
    }
    let kappa = circle_curvature(p_prev, p_i, p_next)?;
    let kappa_next = circle_curvature(p_i, p_next, p_next2)?;
    let d = p_next.dist(p_next2);
    let e = p_i.dist(p_next2);
    let f = p_prev.dist(p_next2);
    if d == 0.0 || e == 0.0 || f == 0.0 {
        return Err(Error::DegenerateTorsion);
    }
    let kappa_s = 3.0 * (kappa_next - kappa) / (a + b + d);
    let triple = (p_i - p_prev).triple(p_next - p_i, p_next2 - p_next);
    // H = 3V/Δ with V = |triple|/6 and Δ = area2/2, signed by the triple product.
    let height = triple / area2;
    let tau = 6.0 * height / (d * e * f * kappa);
    Ok(EuclideanInvariants { kappa, kappa_s, tau })
}

/// Per-sample raw invariants before κ̃_s̃ is differenced: `(κ̃, τ̃, ds̃/dλ)`
/// where the last entry is the similarity-length density used for s̃.
struct RawPoint {
    idx: usize,
    kappa_tilde: f64,
    tau_tilde: f64,
    density: f64,
}

/// The similarity signature curve of a trajectory.
///
/// Analytic: invariants at every sample from exact derivatives of `field`.
/// Discrete: invariants at samples `1..n−2` from four-point stencils.
/// s̃ accumulates by the trapezoidal rule; κ̃_s̃ is the centred difference of
/// κ̃ against s̃ (one-sided at the ends).
pub fn signature_curve<F: VectorField + ?Sized>(
    traj: &Trajectory,
    field: &F,
    method: Method,
) -> Result<SignatureCurve> {
    let n = traj.len();
    if n < 5 {
        return Err(Error::InvalidInput(format!("signature needs at least 5 samples, got {n}")));
    }
    let s = &traj.samples;
    let raw: Vec<Option<RawPoint>> = match method {
        Method::Analytic => par::map_range(0..n, |i| {
            let [d1, d2, d3] = derivatives3(s[i], field);
            let e = analytic_euclidean(d1, d2, d3).ok()?;
            let (kt, tt) = similarity_from_euclidean(&e).ok()?;
            Some(RawPoint { idx: i, kappa_tilde: kt, tau_tilde: tt, density: e.kappa * d1.norm() })
        }),
        Method::Discrete => par::map_range(1..n - 2, |i| {
            let e = discrete_euclidean(s[i - 1], s[i], s[i + 1], s[i + 2]).ok()?;
            let (kt, tt) = similarity_from_euclidean(&e).ok()?;
            Some(RawPoint { idx: i, kappa_tilde: kt, tau_tilde: tt, density: e.kappa })
        }),
    };
    let mut gaps = Vec::new();
    let mut kept = Vec::with_capacity(raw.len());
    let first = if method == Method::Discrete { 1 } else { 0 };
    for (k, r) in raw.into_iter().enumerate() {
        match r {
            Some(p) => kept.push(p),
            None => gaps.push(first + k),
        }
    }
    Ok(assemble(kept, gaps, |i, j| match method {
        Method::Analytic => (j - i) as f64 * traj.dt,
        Method::Discrete => s[i].dist(s[j]),
    }))
}

/// Signature curve from derivatives supplied by the caller, one triple per
/// sample. Used for curves that are not trajectories of a vector field.
pub fn signature_from_derivatives(derivs: &[[State3; 3]], dt: f64) -> Result<SignatureCurve> {
    if derivs.len() < 5 {
        return Err(Error::InvalidInput("signature needs at least 5 samples".into()));
    }
    let mut kept = Vec::new();
    let mut gaps = Vec::new();
    for (i, d) in derivs.iter().enumerate() {
        match analytic_euclidean(d[0], d[1], d[2]).and_then(|e| similarity_from_euclidean(&e).map(|s| (e, s)))
        {
            Ok((e, (kt, tt))) => {
                kept.push(RawPoint { idx: i, kappa_tilde: kt, tau_tilde: tt, density: e.kappa * d[0].norm() })
            }
            Err(_) => gaps.push(i),
        }
    }
    Ok(assemble(kept, gaps, |i, j| (j - i) as f64 * dt))
}

/// Accumulates s̃ and differences κ̃. `step(i, j)` is the parameter length
/// between samples `i < j` (time for the analytic route, chord length for the
/// discrete one); multiplied by the mean density it gives Δs̃.
fn assemble(kept: Vec<RawPoint>, gaps: Vec<usize>, step: impl Fn(usize, usize) -> f64) -> SignatureCurve {
    let m = kept.len();
    let mut s_tilde = vec![0.0; m];
    for k in 1..m {
        let (a, b) = (&kept[k - 1], &kept[k]);
        s_tilde[k] = s_tilde[k - 1] + 0.5 * (a.density + b.density) * step(a.idx, b.idx);
    }
    let mut points = Vec::with_capacity(m);
    for k in 0..m {
        let (lo, hi) = match (k, m) {
            (_, 1) => (0, 0),
            (0, _) => (0, 1),
            (k, m) if k == m - 1 => (k - 1, k),
            (k, _) => (k - 1, k + 1),
        };
        let ds = s_tilde[hi] - s_tilde[lo];
        let kts = if hi > lo && ds > 0.0 { (kept[hi].kappa_tilde - kept[lo].kappa_tilde) / ds } else { 0.0 };
        points.push(SignaturePoint {
            kappa_tilde: kept[k].kappa_tilde,
            kappa_tilde_s: kts,
            tau_tilde: kept[k].tau_tilde,
            s_tilde: s_tilde[k],
        });
    }
    SignatureCurve { indices: kept.iter().map(|p| p.idx).collect(), points, gaps }
}

/// Maps every sample to `scale · rotation · z + translation`.
pub fn apply_similarity(
    traj: &Trajectory,
    scale: f64,
    rotation: &Matrix3<f64>,
    translation: State3,
) -> Result<Trajectory> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidInput(format!("scale must be positive, got {scale}")));
    }
    let deviation = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
    if !(deviation <= 1e-12) {
        return Err(Error::NonOrthogonal { deviation });
    }
    let samples = traj.samples.iter().map(|&z| mat_vec(rotation, z) * scale + translation).collect();
    Trajectory::new(traj.t0, traj.dt, samples)
}

/// The vector field `λ A f(A⁻¹(z − b)/λ)` whose trajectories are the images of
/// trajectories of `inner` under `z ↦ λ A z + b` (time is not rescaled).
pub struct TransformedField<'a, F: ?Sized> {
    pub inner: &'a F,
    pub scale: f64,
    pub rotation: Matrix3<f64>,
    pub translation: State3,
}

impl<F: VectorField + ?Sized> TransformedField<'_, F> {
    fn pull_back(&self, z: State3) -> State3 {
        mat_vec(&self.rotation.transpose(), z - self.translation) / self.scale
    }
}

impl<F: VectorField + ?Sized> VectorField for TransformedField<'_, F> {
    fn eval(&self, z: State3) -> State3 {
        mat_vec(&self.rotation, self.inner.eval(self.pull_back(z))) * self.scale
    }

    fn jacobian(&self, z: State3) -> Matrix3<f64> {
        self.rotation * self.inner.jacobian(self.pull_back(z)) * self.rotation.transpose()
    }

    fn second_derivative(&self, z: State3, u: State3, v: State3) -> State3 {
        let at = self.rotation.transpose();
        let h = self.inner.second_derivative(self.pull_back(z), mat_vec(&at, u), mat_vec(&at, v));
        mat_vec(&self.rotation, h) / self.scale
    }
}
