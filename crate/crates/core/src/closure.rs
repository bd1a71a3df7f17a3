//! Newton multiple shooting on the Poincaré section.
//!
//! Unknowns are the in-plane coordinates `(x, y)` of the `p` section points of
//! a period-`p` orbit. The residual is block cyclic,
//! `F_k = x^{(k+1) mod p} − Ω(x^k)`, with Jacobian blocks `−DΩ(x^k)` on the
//! diagonal and the identity on the cyclic super-diagonal.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{rk4_step, rk4_step_variational, DEFAULT_DT, DIVERGENCE_LIMIT};
use crate::lorenz::{symmetry, State3, VectorField};
use crate::symbolic::{
    canonicalize, crossing_in_step, mirror, ApexTracker, Crossing, SectionConfig, Symbol, SymbolSequence,
};

/// Returns that take longer than this are reported as `NoReturn`.
pub const MAX_RETURN_SEARCH: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosureConfig {
    pub section: SectionConfig,
    pub dt: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Open bracket every per-crossing return time must fall in.
    pub min_return: f64,
    pub max_return: f64,
}

impl Default for ClosureConfig {
    fn default() -> Self {
        Self {
            section: SectionConfig::default(),
            dt: DEFAULT_DT,
            tol: 1e-11,
            max_iter: 50,
            max_halvings: 8,
            min_return: 0.2,
            max_return: 1.5,
        }
    }
}

/// One application of the first-return map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnMap {
    pub point: [f64; 2],
    pub time: f64,
    pub derivative: Matrix2<f64>,
    /// Flow derivative `DΦ_time` at the start point (full 3×3).
    pub monodromy: Matrix3<f64>,
    /// Label of the return crossing.
    pub label: Symbol,
}

fn lift(pt: [f64; 2], cfg: &SectionConfig) -> State3 {
    State3::new(pt[0], pt[1], cfg.plane_z)
}

/// Projects the flow derivative onto the section:
/// `DΩ = Pr ∘ (I − f e_zᵀ / f_z) ∘ DΦ`, restricted to in-plane coordinates.
pub fn section_derivative(monodromy: &Matrix3<f64>, f: State3) -> Matrix2<f64> {
    let mut d = Matrix2::zeros();
    for i in 0..2 {
        for j in 0..2 {
            d[(i, j)] = monodromy[(i, j)] - f[i] / f.z * monodromy[(2, j)];
        }
    }
    d
}

/// First return of `pt` to the section after at least `min_time`.
pub fn poincare_map_with<F: VectorField + ?Sized>(
    pt: [f64; 2],
    field: &F,
    cfg: &SectionConfig,
    dt: f64,
    min_time: f64,
) -> Result<ReturnMap> {
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    let mut s = lift(pt, cfg);
    if !s.is_finite() {
        return Err(Error::InvalidInput("non-finite section point".into()));
    }
    let mut m = Matrix3::identity();
    let mut t = 0.0;
    let mut apex = ApexTracker::default();
    let max_steps = (MAX_RETURN_SEARCH / dt).ceil() as usize;
    for step in 0..max_steps {
        let (s1, m1) = rk4_step_variational(field, s, &m, dt);
        if !(s1.is_finite() && s1.max_abs() <= DIVERGENCE_LIMIT) {
            return Err(Error::Divergence { step: step + 1 });
        }
        apex.observe(s, cfg);
        if t + dt > min_time {
            if let Some(c) = crossing_in_step(field, s, s1, t, dt, cfg, &mut apex) {
                let c = c?;
                let h = c.t - t;
                let (_, mh) = rk4_step_variational(field, s, &m, h);
                let f = field.eval(c.point);
                return Ok(ReturnMap {
                    point: [c.point.x, c.point.y],
                    time: c.t,
                    derivative: section_derivative(&mh, f),
                    monodromy: mh,
                    label: c.label,
                });
            }
        }
        s = s1;
        m = m1;
        t += dt;
    }
    Err(Error::NoReturn { max_time: MAX_RETURN_SEARCH })
}

/// Poincaré map with the default skip of very short returns.
pub fn poincare_map<F: VectorField + ?Sized>(
    pt: [f64; 2],
    field: &F,
    cfg: &SectionConfig,
    dt: f64,
) -> Result<ReturnMap> {
    poincare_map_with(pt, field, cfg, dt, 0.05)
}

/// Section points and return-time guesses of a period-`p` orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootingState {
    pub points: Vec<[f64; 2]>,
    pub return_times: Vec<f64>,
}

impl ShootingState {
    pub fn new(points: Vec<[f64; 2]>, return_times: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != return_times.len() {
            return Err(Error::InvalidInput(format!(
                "shooting state needs matching non-empty point/time lists ({} vs {})",
                points.len(),
                return_times.len()
            )));
        }
        Ok(Self { points, return_times })
    }

    pub fn period(&self) -> usize {
        self.points.len()
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(2 * self.period(), self.points.iter().flat_map(|p| [p[0], p[1]]))
    }

    fn with_vector(&self, v: &DVector<f64>) -> Self {
        Self {
            points: (0..self.period()).map(|k| [v[2 * k], v[2 * k + 1]]).collect(),
            return_times: self.return_times.clone(),
        }
    }

    /// The image under `(x, y) -> (−x, −y)`.
    pub fn mirrored(&self) -> Self {
        Self {
            points: self.points.iter().map(|p| [-p[0], -p[1]]).collect(),
            return_times: self.return_times.clone(),
        }
    }
}

/// Residual `F(z)`, its Jacobian, and the per-point return maps.
#[derive(Debug, Clone)]
pub struct ShootingResidual {
    pub residual: DVector<f64>,
    pub jacobian: DMatrix<f64>,
    pub returns: Vec<ReturnMap>,
}

impl ShootingResidual {
    pub fn max_norm(&self) -> f64 {
        self.residual.amax()
    }
}

pub fn shooting_residual<F: VectorField + ?Sized>(
    s: &ShootingState,
    field: &F,
    cfg: &ClosureConfig,
) -> Result<ShootingResidual> {
    let p = s.period();
    let returns: Vec<ReturnMap> = crate::par::map(&s.points, |pt| {
        poincare_map_with(*pt, field, &cfg.section, cfg.dt, 0.5 * cfg.min_return)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    for r in &returns {
        if !(r.time > cfg.min_return && r.time < cfg.max_return) {
            return Err(Error::ReturnTimeOutOfRange { t: r.time });
        }
    }
    let mut residual = DVector::zeros(2 * p);
    let mut jacobian = DMatrix::zeros(2 * p, 2 * p);
    for k in 0..p {
        let next = (k + 1) % p;
        for i in 0..2 {
            residual[2 * k + i] = s.points[next][i] - returns[k].point[i];
            for j in 0..2 {
                jacobian[(2 * k + i, 2 * k + j)] -= returns[k].derivative[(i, j)];
                jacobian[(2 * k + i, 2 * next + j)] += if i == j { 1.0 } else { 0.0 };
            }
        }
    }
    Ok(ShootingResidual { residual, jacobian, returns })
}

/// A closed orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub sequence: SymbolSequence,
    pub shooting: ShootingState,
    /// Total flow time, the sum of the return times.
    pub period: f64,
    pub residual: f64,
    pub iterations: usize,
}

impl PeriodicOrbit {
    pub fn p(&self) -> usize {
        self.shooting.period()
    }

    /// Section points lifted to phase space.
    pub fn section_states(&self, cfg: &SectionConfig) -> Vec<State3> {
        self.shooting.points.iter().map(|&pt| lift(pt, cfg)).collect()
    }
}

fn finish(
    state: ShootingState,
    res: &ShootingResidual,
    iterations: usize,
    expected: Option<&SymbolSequence>,
) -> Result<PeriodicOrbit> {
    // Return k closes the loop that ends at point k + 1.
    let p = state.period();
    let labels: Vec<Symbol> = (0..p).map(|k| res.returns[(k + p - 1) % p].label).collect();
    let sequence = canonicalize(&labels)?;
    if let Some(want) = expected {
        if *want != sequence {
            return Err(Error::LabelMismatch { expected: want.to_string(), found: sequence.to_string() });
        }
    }
    let return_times: Vec<f64> = res.returns.iter().map(|r| r.time).collect();
    Ok(PeriodicOrbit {
        sequence,
        period: return_times.iter().sum(),
        shooting: ShootingState { points: state.points, return_times },
        residual: res.max_norm(),
        iterations,
    })
}

/// Damped Newton on the shooting residual. The closed orbit's symbol
/// sequence must equal `expected` when given.
pub fn newton_close<F: VectorField + ?Sized>(
    initial: &ShootingState,
    field: &F,
    cfg: &ClosureConfig,
    expected: Option<&SymbolSequence>,
) -> Result<PeriodicOrbit> {
    let mut state = initial.clone();
    let mut res = shooting_residual(&state, field, cfg)?;
    let mut norm = res.max_norm();
    for iter in 0..cfg.max_iter {
        if norm < cfg.tol {
            return finish(state, &res, iter, expected);
        }
        let step = res
            .jacobian
            .clone()
            .lu()
            .solve(&(-&res.residual))
            .ok_or(Error::NoConvergence { iterations: iter, residual: norm })?;
        let z = state.to_vector();
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let trial = state.with_vector(&(&z + &step * lambda));
            if let Ok(r) = shooting_residual(&trial, field, cfg) {
                if r.max_norm() < norm {
                    accepted = Some((trial, r));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((s, r)) => {
                state = s;
                norm = r.max_norm();
                res = r;
            }
            // No decrease even at the smallest step: at the noise floor or stuck.
            None => {
                return Err(Error::NoConvergence { iterations: iter, residual: norm });
            }
        }
    }
    if norm < cfg.tol {
        return finish(state, &res, cfg.max_iter, expected);
    }
    Err(Error::NoConvergence { iterations: cfg.max_iter, residual: norm })
}

/// Integrates from `s0` past `transient`, then records `n` section crossings.
pub fn attractor_crossings<F: VectorField + ?Sized>(
    field: &F,
    s0: State3,
    transient: f64,
    n: usize,
    dt: f64,
    cfg: &SectionConfig,
) -> Result<Vec<Crossing>> {
    let mut s = s0;
    let mut t = 0.0;
    let mut step = 0usize;
    let mut out = Vec::with_capacity(n);
    let mut apex = ApexTracker::default();
    let max_steps = ((transient + 10.0 * (n as f64 + 1.0)) / dt).ceil() as usize;
    while out.len() < n {
        let s1 = rk4_step(field, s, dt);
        step += 1;
        if !(s1.is_finite() && s1.max_abs() <= DIVERGENCE_LIMIT) {
            return Err(Error::Divergence { step });
        }
        apex.observe(s, cfg);
        if let Some(c) = crossing_in_step(field, s, s1, t, dt, cfg, &mut apex) {
            let c = c?;
            if t >= transient {
                out.push(c);
            }
        }
        s = s1;
        t += dt;
        if step > max_steps {
            return Err(Error::NoReturn { max_time: t });
        }
    }
    Ok(out)
}

fn state_from_crossings(cs: &[Crossing], start: usize, p: usize) -> ShootingState {
    let points = (0..p).map(|k| [cs[start + k].point.x, cs[start + k].point.y]).collect();
    let return_times = (0..p).map(|k| cs[start + k + 1].t - cs[start + k].t).collect();
    ShootingState { points, return_times }
}

/// Seeds a shooting state for `seq`.
///
/// A library orbit with the same sequence is used as is. Otherwise the
/// crossings are scanned for `p` consecutive labels equal to a rotation of
/// `seq` whose neighbours continue the cyclic pattern; of those, the window
/// whose first and `(p+1)`-th crossings are closest wins. If no such window
/// exists, each position is filled greedily with a crossing whose
/// (previous, own, next) labels match, nearest to the successor of the
/// previous pick.
pub fn seed_from_sequence(
    seq: &SymbolSequence,
    library: &[PeriodicOrbit],
    crossings: &[Crossing],
) -> Result<ShootingState> {
    if let Some(o) = library.iter().find(|o| o.sequence == *seq) {
        return Ok(o.shooting.clone());
    }
    let p = seq.period();
    let w = seq.word();
    let labels: Vec<Symbol> = crossings.iter().map(|c| c.label).collect();
    let n = labels.len();
    let mut best: Option<(f64, usize)> = None;
    if n >= p + 2 {
        for start in 1..n - p - 1 {
            for rot in 0..p {
                let sym = |k: isize| w[(rot as isize + k).rem_euclid(p as isize) as usize];
                let matches = (-1..=p as isize).all(|k| labels[(start as isize + k) as usize] == sym(k));
                if matches {
                    let gap = crossings[start].point.dist(crossings[start + p].point);
                    if best.is_none_or(|(g, _)| gap < g) {
                        best = Some((gap, start));
                    }
                    break;
                }
            }
        }
    }
    if let Some((_, start)) = best {
        return Ok(state_from_crossings(crossings, start, p));
    }
    greedy_seed(seq, crossings)
}

fn greedy_seed(seq: &SymbolSequence, cs: &[Crossing]) -> Result<ShootingState> {
    let p = seq.period();
    let w = seq.word();
    let n = cs.len();
    let context = |k: usize| (w[(k + p - 1) % p], w[k], w[(k + 1) % p]);
    let candidates = |k: usize| {
        let ctx = context(k);
        (1..n.saturating_sub(1)).filter(move |&i| (cs[i - 1].label, cs[i].label, cs[i + 1].label) == ctx)
    };
    let mut picks: Vec<usize> = Vec::with_capacity(p);
    for k in 0..p {
        let pick = match picks.last() {
            None => candidates(k).next(),
            Some(&prev) => {
                let target = cs[prev + 1].point;
                candidates(k).min_by(|&a, &b| cs[a].point.dist(target).total_cmp(&cs[b].point.dist(target)))
            }
        };
        picks.push(pick.ok_or_else(|| Error::SeedUnavailable(seq.to_string()))?);
    }
    let points = picks.iter().map(|&i| [cs[i].point.x, cs[i].point.y]).collect();
    let return_times = picks.iter().map(|&i| cs[i + 1].t - cs[i].t).collect();
    Ok(ShootingState { points, return_times })
}

/// Seeds from `seq` and closes, checking the label sequence.
pub fn close_sequence<F: VectorField + ?Sized>(
    seq: &SymbolSequence,
    library: &[PeriodicOrbit],
    crossings: &[Crossing],
    field: &F,
    cfg: &ClosureConfig,
) -> Result<PeriodicOrbit> {
    let seed = seed_from_sequence(seq, library, crossings)?;
    newton_close(&seed, field, cfg, Some(seq))
}

/// Newton from the mirrored section points of `orbit`.
pub fn close_mirror<F: VectorField + ?Sized>(
    orbit: &PeriodicOrbit,
    field: &F,
    cfg: &ClosureConfig,
) -> Result<PeriodicOrbit> {
    newton_close(&orbit.shooting.mirrored(), field, cfg, Some(&mirror(&orbit.sequence)))
}

/// Largest distance from a lifted section point to the flow of it over the
/// whole period.
pub fn closure_defect<F: VectorField + ?Sized>(
    orbit: &PeriodicOrbit,
    field: &F,
    cfg: &ClosureConfig,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for s in orbit.section_states(&cfg.section) {
        let end = crate::integrate::flow_field(s, field, orbit.period, cfg.dt)?;
        worst = worst.max(end.dist(s));
    }
    Ok(worst)
}

/// Dense samples of the orbit over one period.
pub fn orbit_samples<F: VectorField + ?Sized>(
    orbit: &PeriodicOrbit,
    field: &F,
    cfg: &ClosureConfig,
) -> Result<Vec<State3>> {
    let mut out = Vec::new();
    for (k, s) in orbit.section_states(&cfg.section).into_iter().enumerate() {
        let t = orbit.shooting.return_times[k];
        let (n, rem) = crate::integrate::split_duration(t, cfg.dt);
        let mut x = s;
        out.push(x);
        for _ in 0..n {
            x = rk4_step(field, x, cfg.dt);
            out.push(x);
        }
        if rem > 0.0 {
            out.push(rk4_step(field, x, rem));
        }
    }
    Ok(out)
}

/// One-sided Hausdorff-style check: every sample of `a`, mapped through the
/// symmetry, lies within the returned distance of the polyline `b`.
pub fn symmetric_defect(a: &[State3], b: &[State3]) -> f64 {
    let seg_dist = |p: State3, u: State3, v: State3| {
        let d = v - u;
        let len2 = d.dot(d);
        let t = if len2 > 0.0 { ((p - u).dot(d) / len2).clamp(0.0, 1.0) } else { 0.0 };
        p.dist(u + d * t)
    };
    a.iter()
        .map(|&p| {
            let q = symmetry(p);
            b.windows(2).map(|w| seg_dist(q, w[0], w[1])).fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}
