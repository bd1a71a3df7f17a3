//! Interval enclosures of the flow and the Krawczyk existence test.
//!
//! The flow is enclosed with a first-order Lohner scheme around the RK4 map:
//! the set at step `k` is `c + B r` (point centre, orthogonal frame, interval
//! coordinates) and the flow derivative is `V̂ + B R`. Each step takes the
//! interval Jacobian of the RK4 map over the hull of the set, adds a
//! truncation remainder of `REMAINDER_FACTOR · C · h⁵ · |f|` with `C`
//! measured on the attractor, and re-orthogonalises the frame by QR. The remainder is a
//! calibrated estimate rather than a proven bound, so verdicts hold within
//! this enclosure model.
//!
//! The final approach to the section uses a Picard a priori enclosure over a
//! short time window, inside which the crossing time is solved by interval
//! division.

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};

use crate::closure::{
    newton_close, poincare_map, shooting_residual, ClosureConfig, PeriodicOrbit, ShootingState,
};
use crate::error::{Error, Result};
use crate::interval::{Interval, IntervalMatrix, IntervalVector};
use crate::lorenz::{LorenzParams, State3};
use crate::symbolic::SectionConfig;

/// Measured sup of `|Ψ_h(x) − φ_h(x)|∞ / (h⁵ |f(x)|∞)` for the RK4 map on
/// the attractor. Every term of the local error carries a factor of `f`, so
/// the bound vanishes at equilibria.
pub const RK4_STATE_CONSTANT: f64 = 2.0e3;
/// Same for the variational block, per unit `‖V‖∞`.
pub const RK4_VARIATIONAL_CONSTANT: f64 = 9.4e4;
/// Safety factor applied to both constants.
pub const REMAINDER_FACTOR: f64 = 10.0;
/// Any enclosure component wider than this aborts with `EnclosureBlowup`.
pub const BLOWUP_WIDTH: f64 = 1.0;
/// Condition number of `F′(ẑ)` above which `M` is not formed.
pub const MAX_CONDITION: f64 = 1e12;

type V3 = [Interval; 3];
type M3 = [[Interval; 3]; 3];

const IZ: Interval = Interval::ZERO;

fn v3_add(a: &V3, b: &V3) -> V3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn v3_scale(k: Interval, a: &V3) -> V3 {
    [k * a[0], k * a[1], k * a[2]]
}

fn v3_mid(a: &V3) -> [f64; 3] {
    [a[0].mid(), a[1].mid(), a[2].mid()]
}

fn v3_sub_point(a: &V3, c: &[f64; 3]) -> V3 {
    [a[0] - c[0], a[1] - c[1], a[2] - c[2]]
}

fn v3_width(a: &V3) -> f64 {
    a.iter().map(|c| c.width()).fold(0.0, f64::max)
}

fn m3_identity() -> M3 {
    let mut m = [[IZ; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = Interval::ONE;
    }
    m
}

fn m3_point(m: &Matrix3<f64>) -> M3 {
    let mut out = [[IZ; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, e) in row.iter_mut().enumerate() {
            *e = Interval::point(m[(i, j)]);
        }
    }
    out
}

fn m3_mid(m: &M3) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| m[i][j].mid())
}

fn m3_mul(a: &M3, b: &M3) -> M3 {
    let mut out = [[IZ; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, e) in row.iter_mut().enumerate() {
            *e = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

fn m3_add(a: &M3, b: &M3) -> M3 {
    let mut out = *a;
    for (i, row) in out.iter_mut().enumerate() {
        for (j, e) in row.iter_mut().enumerate() {
            *e = *e + b[i][j];
        }
    }
    out
}

fn m3_sub_point(a: &M3, b: &Matrix3<f64>) -> M3 {
    let mut out = *a;
    for (i, row) in out.iter_mut().enumerate() {
        for (j, e) in row.iter_mut().enumerate() {
            *e = *e - b[(i, j)];
        }
    }
    out
}

fn m3_scale(k: Interval, a: &M3) -> M3 {
    let mut out = *a;
    for row in out.iter_mut() {
        for e in row.iter_mut() {
            *e = k * *e;
        }
    }
    out
}

fn m3_vec(a: &M3, v: &V3) -> V3 {
    [
        a[0][0] * v[0] + a[0][1] * v[1] + a[0][2] * v[2],
        a[1][0] * v[0] + a[1][1] * v[1] + a[1][2] * v[2],
        a[2][0] * v[0] + a[2][1] * v[1] + a[2][2] * v[2],
    ]
}

fn m3_width(a: &M3) -> f64 {
    a.iter().flatten().map(|c| c.width()).fold(0.0, f64::max)
}

fn m3_norm_inf(a: &M3) -> f64 {
    a.iter()
        .map(|row| row.iter().map(|c| Interval::point(c.mag())).sum::<Interval>().hi())
        .fold(0.0, f64::max)
}

/// Interval extension of the Lorenz field.
fn field_iv(p: &LorenzParams, x: &V3) -> V3 {
    let (s, r, e) = (Interval::point(p.sigma), Interval::point(p.r), Interval::point(p.eta));
    [s * (x[1] - x[0]), x[0] * (r - x[2]) - x[1], x[0] * x[1] - e * x[2]]
}

fn jacobian_iv(p: &LorenzParams, x: &V3) -> M3 {
    let (s, r, e) = (Interval::point(p.sigma), Interval::point(p.r), Interval::point(p.eta));
    [[-s, s, IZ], [r - x[2], -Interval::ONE, -x[0]], [x[1], x[0], -e]]
}

fn rk4_iv(p: &LorenzParams, x: &V3, h: f64) -> V3 {
    let hh = Interval::point(h);
    let half = hh * 0.5;
    let k1 = field_iv(p, x);
    let k2 = field_iv(p, &v3_add(x, &v3_scale(half, &k1)));
    let k3 = field_iv(p, &v3_add(x, &v3_scale(half, &k2)));
    let k4 = field_iv(p, &v3_add(x, &v3_scale(hh, &k3)));
    let two = Interval::point(2.0);
    let sum = v3_add(&v3_add(&k1, &v3_scale(two, &k2)), &v3_add(&v3_scale(two, &k3), &k4));
    let sixth = hh.div(Interval::point(6.0)).expect("6 is nonzero");
    v3_add(x, &v3_scale(sixth, &sum))
}

/// Interval Jacobian of the RK4 map over the box `y`.
fn rk4_jacobian_iv(p: &LorenzParams, y: &V3, h: f64) -> M3 {
    let hh = Interval::point(h);
    let half = hh * 0.5;
    let id = m3_identity();
    let k1 = field_iv(p, y);
    let y2 = v3_add(y, &v3_scale(half, &k1));
    let k2 = field_iv(p, &y2);
    let y3 = v3_add(y, &v3_scale(half, &k2));
    let k3 = field_iv(p, &y3);
    let y4 = v3_add(y, &v3_scale(hh, &k3));
    let j1 = jacobian_iv(p, y);
    let j2 = m3_mul(&jacobian_iv(p, &y2), &m3_add(&id, &m3_scale(half, &j1)));
    let j3 = m3_mul(&jacobian_iv(p, &y3), &m3_add(&id, &m3_scale(half, &j2)));
    let j4 = m3_mul(&jacobian_iv(p, &y4), &m3_add(&id, &m3_scale(hh, &j3)));
    let two = Interval::point(2.0);
    let sum = m3_add(&m3_add(&j1, &m3_scale(two, &j2)), &m3_add(&m3_scale(two, &j3), &j4));
    let sixth = hh.div(Interval::point(6.0)).expect("6 is nonzero");
    m3_add(&id, &m3_scale(sixth, &sum))
}

/// Enclosure of `Q⁻¹` for a nearly orthogonal `Q`: `Qᵀ` plus a Neumann
/// series bound on `(QᵀQ)⁻¹ − I`.
fn inverse_orthogonal(q: &Matrix3<f64>) -> Result<M3> {
    let qt = m3_point(&q.transpose());
    let e = m3_sub_point(&m3_mul(&qt, &m3_point(q)), &Matrix3::identity());
    let en = m3_norm_inf(&e);
    if en >= 0.5 {
        return Err(Error::NonOrthogonal { deviation: en });
    }
    let factor =
        Interval::point(en).div(Interval::ONE - Interval::point(en))? * Interval::point(m3_norm_inf(&qt));
    let d = Interval::symmetric(factor.hi());
    let mut out = qt;
    for row in out.iter_mut() {
        for c in row.iter_mut() {
            *c = *c + d;
        }
    }
    Ok(out)
}

/// Lohner state: set `c + B r`, derivative `V̂ + B R`.
#[derive(Debug, Clone)]
struct Lohner {
    c: [f64; 3],
    b: Matrix3<f64>,
    r: V3,
    vhat: Matrix3<f64>,
    rv: M3,
}

impl Lohner {
    fn from_box(x: &V3) -> Self {
        let c = v3_mid(x);
        Self {
            c,
            b: Matrix3::identity(),
            r: v3_sub_point(x, &c),
            vhat: Matrix3::identity(),
            rv: [[IZ; 3]; 3],
        }
    }

    fn hull(&self) -> V3 {
        let c = [Interval::point(self.c[0]), Interval::point(self.c[1]), Interval::point(self.c[2])];
        v3_add(&c, &m3_vec(&m3_point(&self.b), &self.r))
    }

    fn derivative(&self) -> M3 {
        m3_add(&m3_point(&self.vhat), &m3_mul(&m3_point(&self.b), &self.rv))
    }

    fn step(&mut self, p: &LorenzParams, h: f64) -> Result<()> {
        let y = self.hull();
        let c_iv = [Interval::point(self.c[0]), Interval::point(self.c[1]), Interval::point(self.c[2])];
        let fmag = field_iv(p, &y).iter().map(|c| c.mag()).fold(0.0, f64::max);
        let e_state = Interval::symmetric(REMAINDER_FACTOR * RK4_STATE_CONSTANT * h.powi(5) * fmag);
        let psi_c = rk4_iv(p, &c_iv, h);
        let s = [psi_c[0] + e_state, psi_c[1] + e_state, psi_c[2] + e_state];
        let a = rk4_jacobian_iv(p, &y, h);
        let bi = m3_point(&self.b);
        let ab = m3_mul(&a, &bi);

        // New frame: QR of mid(A)·B with the most stretched (scaled) columns first.
        let mb = m3_mid(&a) * self.b;
        let mut order = [0usize, 1, 2];
        let score = |j: usize| mb.column(j).norm() * self.r[j].mag().max(f64::MIN_POSITIVE);
        order.sort_by(|&i, &j| score(j).total_cmp(&score(i)));
        let permuted =
            Matrix3::from_columns(&[mb.column(order[0]), mb.column(order[1]), mb.column(order[2])]);
        let q = permuted.qr().q();
        let q_inv = inverse_orthogonal(&q)?;

        let qab = m3_mul(&q_inv, &ab);
        let c_new = v3_mid(&s);
        let r_new = v3_add(&m3_vec(&qab, &self.r), &m3_vec(&q_inv, &v3_sub_point(&s, &c_new)));

        let vmag =
            self.vhat.amax() + self.b.amax() * self.rv.iter().flatten().map(|c| c.mag()).fold(0.0, f64::max);
        let e_var = Interval::symmetric(REMAINDER_FACTOR * RK4_VARIATIONAL_CONSTANT * h.powi(5) * 3.0 * vmag);
        let mut w = m3_mul(&a, &m3_point(&self.vhat));
        for row in w.iter_mut() {
            for c in row.iter_mut() {
                *c = *c + e_var;
            }
        }
        let vhat_new = m3_mid(&w);
        // Q⁻¹AB is formed before multiplying: it is near-triangular and does
        // not wrap, unlike the two separate products.
        let rv_new = m3_add(&m3_mul(&qab, &self.rv), &m3_mul(&q_inv, &m3_sub_point(&w, &vhat_new)));

        self.c = c_new;
        self.b = q;
        self.r = r_new;
        self.vhat = vhat_new;
        self.rv = rv_new;
        let width = v3_width(&self.hull()).max(m3_width(&self.derivative()));
        if !(width <= BLOWUP_WIDTH) {
            return Err(Error::EnclosureBlowup { width });
        }
        Ok(())
    }
}

fn to_v3(b: &IntervalVector) -> Result<V3> {
    if b.len() != 3 {
        return Err(Error::InvalidInput(format!("expected a 3-box, got {} components", b.len())));
    }
    Ok([b[0], b[1], b[2]])
}

fn to_matrix(m: &M3) -> IntervalMatrix {
    IntervalMatrix::from_fn(3, 3, |i, j| m[i][j])
}

/// Enclosure of the time-`t` image of `bx` and of the flow derivative over
/// it, integrated with step `dt`.
pub fn interval_flow(
    bx: &IntervalVector,
    p: &LorenzParams,
    t: f64,
    dt: f64,
) -> Result<(IntervalVector, IntervalMatrix)> {
    let x = to_v3(bx)?;
    if !(t >= 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("invalid flow time {t} or step {dt}")));
    }
    let mut lo = Lohner::from_box(&x);
    let (n, rem) = crate::integrate::split_duration(t, dt);
    for _ in 0..n {
        lo.step(p, dt)?;
    }
    if rem > 0.0 {
        lo.step(p, rem)?;
    }
    Ok((IntervalVector::new(lo.hull().to_vec()), to_matrix(&lo.derivative())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub section: SectionConfig,
    /// Step of the enclosure integrator.
    pub dt: f64,
    /// Newton settings used to re-centre the box at the enclosure step.
    pub closure: ClosureConfig,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        let closure = ClosureConfig { dt: 1e-4, ..ClosureConfig::default() };
        Self { section: closure.section, dt: 1e-4, closure }
    }
}

/// Enclosure of one application of the return map over an in-plane box.
#[derive(Debug, Clone)]
pub struct IntervalReturn {
    pub image: IntervalVector,
    pub time: Interval,
    pub derivative: IntervalMatrix,
}

/// Oriented height and its rate, as intervals.
fn oriented(cfg: &SectionConfig, z: Interval) -> Interval {
    (z - cfg.plane_z) * (-(cfg.direction as f64))
}

/// Picard a priori enclosure of `φ_s(x)` for `x ∈ x0`, `s ∈ [0, h]`.
fn a_priori(p: &LorenzParams, x0: &V3, h: f64) -> Option<V3> {
    let span = Interval::new(0.0, h).ok()?;
    let mut guess = v3_add(x0, &v3_scale(span, &field_iv(p, x0)));
    for k in 0..12 {
        let eps = (v3_width(&guess) * 0.1).max(1e-12) * (1 << k) as f64;
        let inflated = [guess[0].inflate(eps), guess[1].inflate(eps), guess[2].inflate(eps)];
        let next = v3_add(x0, &v3_scale(span, &field_iv(p, &inflated)));
        if next.iter().zip(&inflated).all(|(a, b)| a.subset_of(b)) {
            return Some(next);
        }
        guess = next;
    }
    None
}

/// True when no accepted crossing can occur within a step whose a priori
/// enclosure is `y` and whose start has oriented height `start`.
fn step_has_no_crossing(p: &LorenzParams, cfg: &SectionConfig, start: Interval, y: &V3) -> bool {
    let o = oriented(cfg, y[2]);
    let rate = oriented_rate(p, cfg, y);
    o.lo() > 0.0 || o.hi() <= 0.0 || rate.lo() >= 0.0 || (start.hi() <= 0.0 && rate.hi() <= 0.0)
}

fn oriented_rate(p: &LorenzParams, cfg: &SectionConfig, y: &V3) -> Interval {
    field_iv(p, y)[2] * (-(cfg.direction as f64))
}

fn try_interval_poincare(
    bx: &IntervalVector,
    p: &LorenzParams,
    cfg: &VerifyConfig,
    t_mid: f64,
    delta: f64,
) -> Result<IntervalReturn> {
    let sec = &cfg.section;
    let x = [bx[0], bx[1], Interval::point(sec.plane_z)];
    let mut lo = Lohner::from_box(&x);
    let t_a = t_mid - delta;
    let (n, rem) = crate::integrate::split_duration(t_a, cfg.dt);
    let steps = std::iter::repeat_n(cfg.dt, n).chain((rem > 0.0).then_some(rem));
    let mut first = true;
    for h in steps {
        let x0 = lo.hull();
        let y = a_priori(p, &x0, h).ok_or(Error::CrossingNotIsolated)?;
        // The input set lies exactly on the plane; its rounded hull does not.
        let start = if first { Interval::ZERO } else { oriented(sec, x0[2]) };
        first = false;
        if !step_has_no_crossing(p, sec, start, &y) {
            return Err(Error::CrossingNotIsolated);
        }
        lo.step(p, h)?;
    }
    let xa = lo.hull();
    let oa = oriented(sec, xa[2]);
    if !(oa.lo() > 0.0) {
        return Err(Error::CrossingNotIsolated);
    }
    // Window [0, span] after t_a that must contain every crossing.
    let mut span = 4.0 * delta;
    for _ in 0..6 {
        if let Some(y) = a_priori(p, &xa, span) {
            let rate = oriented_rate(p, sec, &y);
            if rate.hi() < 0.0 && (oa + Interval::point(span) * rate).hi() < 0.0 {
                let tau = oa.div(-rate)?;
                let tau = tau.intersect(&Interval::new(0.0, span)?).ok_or(Error::CrossingNotIsolated)?;
                let fy = field_iv(p, &y);
                let img = v3_add(&xa, &v3_scale(tau, &fy));
                // Derivative of the remaining flow: I + τ J(Y) W with W ⊇ Dφ_s.
                let jy = jacobian_iv(p, &y);
                let lip = m3_norm_inf(&jy);
                let grow = (Interval::point(lip) * span).hi().exp() - 1.0;
                let mut wb = m3_identity();
                for row in wb.iter_mut() {
                    for c in row.iter_mut() {
                        *c = *c + Interval::symmetric(grow * 1.0000001 + 1e-300);
                    }
                }
                let tail = m3_add(&m3_identity(), &m3_scale(tau, &m3_mul(&jy, &wb)));
                let d = m3_mul(&tail, &lo.derivative());
                let img_box = [img[0], img[1], Interval::point(sec.plane_z)];
                let f = field_iv(p, &img_box);
                if f[2].contains_zero() {
                    return Err(Error::CrossingNotIsolated);
                }
                let mut deriv = IntervalMatrix::zeros(2, 2);
                for i in 0..2 {
                    let ratio = f[i].div(f[2])?;
                    for j in 0..2 {
                        deriv[(i, j)] = d[i][j] - ratio * d[2][j];
                    }
                }
                let time = Interval::point(t_a) + tau;
                return Ok(IntervalReturn {
                    image: IntervalVector::new(vec![img[0], img[1]]),
                    time,
                    derivative: deriv,
                });
            }
        }
        span *= 2.0;
    }
    Err(Error::CrossingNotIsolated)
}

/// Enclosure of the return map over an in-plane box.
pub fn interval_poincare(
    bx: &IntervalVector,
    p: &LorenzParams,
    cfg: &VerifyConfig,
) -> Result<IntervalReturn> {
    if bx.len() != 2 {
        return Err(Error::InvalidInput(format!("expected an in-plane 2-box, got {}", bx.len())));
    }
    let mid = bx.mid();
    let rm = poincare_map([mid[0], mid[1]], p, &cfg.section, cfg.dt)?;
    // Spread of return times over the box, from the linearisation.
    let f = p.rhs(State3::new(rm.point[0], rm.point[1], cfg.section.plane_z));
    let rad = bx.components.iter().map(|c| c.rad()).fold(0.0, f64::max);
    let dz = (rm.monodromy[(2, 0)].abs() + rm.monodromy[(2, 1)].abs()) * rad;
    let mut delta = (4.0 * dz / f.z.abs()).max(1e-7);
    let mut last = Error::CrossingNotIsolated;
    for _ in 0..5 {
        match try_interval_poincare(bx, p, cfg, rm.time, delta) {
            Ok(r) => return Ok(r),
            Err(e @ (Error::CrossingNotIsolated | Error::DivisionByZeroInterval)) => last = e,
            Err(e) => return Err(e),
        }
        delta *= 8.0;
        if delta > 0.1 {
            break;
        }
    }
    Err(last)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Existence,
    NoOrbit,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrawczykVerdict {
    pub status: Status,
    pub k_box: IntervalVector,
    pub input_box: IntervalVector,
}

impl KrawczykVerdict {
    pub fn k_width_max(&self) -> f64 {
        self.k_box.max_width()
    }
}

/// `K = ẑ − M F(ẑ) − (M F′(z) − I)(z − ẑ)` and its classification.
pub fn krawczyk_operator(
    center: &[f64],
    input_box: &IntervalVector,
    f_center: &IntervalVector,
    jac_box: &IntervalMatrix,
    m: &DMatrix<f64>,
) -> KrawczykVerdict {
    let n = center.len();
    let mi = IntervalMatrix::from_points(m);
    let mf = mi.mul_vec(f_center);
    let c = mi.mul_mat(jac_box).sub(&IntervalMatrix::identity(n));
    let dz = input_box.sub_points(center);
    let cdz = c.mul_vec(&dz);
    let k = IntervalVector::new((0..n).map(|i| Interval::point(center[i]) - mf[i] - cdz[i]).collect());
    let status = if k.interior_of(input_box) {
        Status::Existence
    } else if k.intersect(input_box).is_none() {
        Status::NoOrbit
    } else {
        Status::Inconclusive
    };
    KrawczykVerdict { status, k_box: k, input_box: input_box.clone() }
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Krawczyk test on the box `ẑ ± radius` around the shooting state.
pub fn krawczyk(
    s: &ShootingState,
    radius: f64,
    p: &LorenzParams,
    cfg: &VerifyConfig,
) -> Result<KrawczykVerdict> {
    if !(radius > 0.0) {
        return Err(Error::InvalidInput(format!("radius must be positive, got {radius}")));
    }
    let np = s.period();
    let center: Vec<f64> = s.to_vector().iter().copied().collect();
    let closure_cfg = ClosureConfig { dt: cfg.dt, section: cfg.section, ..cfg.closure };
    let jac = shooting_residual(s, p, &closure_cfg)?.jacobian;
    let cond = condition_number(&jac);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::SingularM { condition: cond });
    }
    let m = jac.clone().try_inverse().ok_or(Error::SingularM { condition: cond })?;
    let input_box = IntervalVector::centered(&center, radius);

    let per_point: Vec<Result<(IntervalReturn, IntervalReturn)>> = crate::par::map_range(0..np, |k| {
        let pt = IntervalVector::from_points(&center[2 * k..2 * k + 2]);
        let bx = IntervalVector::new(input_box.components[2 * k..2 * k + 2].to_vec());
        Ok((interval_poincare(&pt, p, cfg)?, interval_poincare(&bx, p, cfg)?))
    });
    let mut f_center = Vec::with_capacity(2 * np);
    let mut jac_box = IntervalMatrix::zeros(2 * np, 2 * np);
    let returns: Vec<(IntervalReturn, IntervalReturn)> = per_point.into_iter().collect::<Result<_>>()?;
    for k in 0..np {
        let next = (k + 1) % np;
        let (at_center, over_box) = &returns[k];
        for i in 0..2 {
            f_center.push(Interval::point(center[2 * next + i]) - at_center.image[i]);
            for j in 0..2 {
                jac_box[(2 * k + i, 2 * k + j)] =
                    jac_box[(2 * k + i, 2 * k + j)] - over_box.derivative[(i, j)];
            }
            jac_box[(2 * k + i, 2 * next + i)] = jac_box[(2 * k + i, 2 * next + i)] + Interval::ONE;
        }
    }
    Ok(krawczyk_operator(&center, &input_box, &IntervalVector::new(f_center), &jac_box, &m))
}

/// Verdict record attached to an orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub status: Status,
    pub radius: f64,
    #[serde(rename = "K_width_max")]
    pub k_width_max: Option<f64>,
    pub retries: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Re-centres at the enclosure step, runs Krawczyk, and retries once at
/// `radius / 10` unless the first verdict is decisive.
pub fn verify_orbit(orbit: &PeriodicOrbit, radius: f64, p: &LorenzParams, cfg: &VerifyConfig) -> Verdict {
    let closure_cfg = ClosureConfig { dt: cfg.dt, section: cfg.section, ..cfg.closure };
    let center = newton_close(&orbit.shooting, p, &closure_cfg, Some(&orbit.sequence))
        .map(|o| o.shooting)
        .unwrap_or_else(|_| orbit.shooting.clone());
    let attempt = |r: f64| match krawczyk(&center, r, p, cfg) {
        Ok(v) => (v.status, Some(v.k_width_max()), None),
        Err(e) => (Status::Inconclusive, None, Some(e.to_string())),
    };
    let (status, width, detail) = attempt(radius);
    if status != Status::Inconclusive {
        return Verdict { status, radius, k_width_max: width, retries: 0, detail };
    }
    let r2 = radius / 10.0;
    let (status, width, detail) = attempt(r2);
    Verdict { status, radius: r2, k_width_max: width, retries: 1, detail }
}

/// Verdicts for every orbit, computed in parallel.
pub fn verify_census(
    orbits: &[PeriodicOrbit],
    radius: f64,
    p: &LorenzParams,
    cfg: &VerifyConfig,
) -> Vec<Verdict> {
    crate::par::map(orbits, |o| verify_orbit(o, radius, p, cfg))
}
