//! Sliding-window segmentation of a trajectory on its similarity signature
//! curve.
//!
//! Starting from an initial point, each window of `W` signature points is
//! searched for the point closest to the window's first point, skipping the
//! first `refractory` samples (otherwise the first point wins with distance
//! zero). That point opens the next window. Segmentation points moving in one
//! `z` direction are kept, and every pair of kept points whose states nearly
//! coincide bounds a quasi-periodic arc.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{fmt17, integrate_field, rk4_step, Trajectory, DIVERGENCE_LIMIT};
use crate::lorenz::{State3, VectorField};
use crate::signature::{signature_curve, Method, SignatureCurve, SignaturePoint};
use crate::symbolic::{
    crossing_in_step, crossings, word_to_string, ApexTracker, Crossing, SectionConfig, Symbol,
};

/// Default window: about two wing rotations at `dt = 5e-4`.
pub const DEFAULT_WINDOW: usize = 2500;
/// Default refractory span: about 0.3 time units at `dt = 5e-4`.
pub const DEFAULT_REFRACTORY: usize = 600;
/// Largest endpoint distance accepted for a quasi-periodic arc.
pub const DEFAULT_GAP_TOL: f64 = 0.005;
/// Arcs with more section crossings than this are not reported.
pub const MAX_ARC_CROSSINGS: usize = 10;

/// Space in which window distances are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceSpace {
    /// `(κ̃, κ̃_s̃, τ̃)` coordinates.
    #[default]
    Signature,
    /// `(x, y, z)` of the underlying trajectory samples.
    Phase,
}

impl std::str::FromStr for DistanceSpace {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "signature" => Ok(DistanceSpace::Signature),
            "phase" => Ok(DistanceSpace::Phase),
            other => Err(Error::InvalidInput(format!("unknown distance space {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub window_size: usize,
    pub refractory: usize,
    pub dt: f64,
    #[serde(default)]
    pub distance: DistanceSpace,
    /// Refine each segmentation point between samples.
    #[serde(default = "yes")]
    pub refine: bool,
}

fn yes() -> bool {
    true
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            window_size: DEFAULT_WINDOW,
            refractory: DEFAULT_REFRACTORY,
            dt: crate::integrate::DEFAULT_DT,
            distance: DistanceSpace::Signature,
            refine: true,
        }
    }
}

impl WindowConfig {
    pub fn new(window_size: usize, refractory: usize, dt: f64) -> Result<Self> {
        let cfg = Self { window_size, refractory, dt, ..Self::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_distance(self, distance: DistanceSpace) -> Self {
        Self { distance, ..self }
    }

    pub fn with_refine(self, refine: bool) -> Self {
        Self { refine, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0 < self.refractory && self.refractory < self.window_size) {
            return Err(Error::InvalidInput(format!(
                "need 0 < refractory ({}) < window_size ({})",
                self.refractory, self.window_size
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidInput(format!("dt must be positive, got {}", self.dt)));
        }
        Ok(())
    }

    /// Window length in time units.
    pub fn duration(&self) -> f64 {
        self.window_size as f64 * self.dt
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentPoint {
    /// Trajectory sample index at or just before the point.
    pub idx: usize,
    /// Position past `idx` in units of `dt`, in `[0, 1)`.
    pub frac: f64,
    pub t: f64,
    pub state: State3,
    pub signature: SignaturePoint,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SegmentationResult {
    pub points: Vec<SegmentPoint>,
    pub filtered_points: Vec<SegmentPoint>,
    /// Phase-space distance between consecutive filtered points.
    pub endpoint_gaps: Vec<f64>,
}

impl SegmentationResult {
    fn with_gaps(points: Vec<SegmentPoint>, filtered_points: Vec<SegmentPoint>) -> Self {
        let endpoint_gaps = filtered_points.windows(2).map(|w| w[0].state.dist(w[1].state)).collect();
        Self { points, filtered_points, endpoint_gaps }
    }
}

/// A trajectory arc between two kept segmentation points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiOrbit {
    pub start_idx: usize,
    pub end_idx: usize,
    pub start_t: f64,
    pub end_t: f64,
    pub start_state: State3,
    pub gap: f64,
    /// Section crossings inside the arc: the provisional period.
    pub crossings: usize,
    /// Labels of those crossings, in time order.
    pub word: Vec<Symbol>,
}

impl QuasiOrbit {
    pub fn word_string(&self) -> String {
        word_to_string(&self.word)
    }
}

fn check_aligned(curve: &SignatureCurve, traj: &Trajectory) -> Result<()> {
    match curve.indices.last() {
        Some(&last) if last < traj.len() => Ok(()),
        Some(&last) => Err(Error::InvalidInput(format!(
            "signature index {last} beyond trajectory of {} samples",
            traj.len()
        ))),
        None => Err(Error::InvalidInput("empty signature curve".into())),
    }
}

/// Trajectory index of the starting point: among the local extrema of `τ̃` in
/// the first window, the one whose state is nearest the initial state.
pub fn initial_point(curve: &SignatureCurve, traj: &Trajectory, window: usize) -> Result<usize> {
    check_aligned(curve, traj)?;
    let n = curve.len().min(window.max(3));
    let tau = |k: usize| curve.points[k].tau_tilde;
    let origin = traj.samples[0];
    let mut best: Option<(f64, usize)> = None;
    for k in 1..n.saturating_sub(1) {
        let (a, b) = (tau(k) - tau(k - 1), tau(k + 1) - tau(k));
        let extremum = (a > 0.0 && b <= 0.0) || (a < 0.0 && b >= 0.0);
        if !extremum {
            continue;
        }
        let idx = curve.indices[k];
        let d = traj.samples[idx].dist(origin);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, idx));
        }
    }
    best.map(|(_, idx)| idx).ok_or(Error::NoExtremum)
}

/// Window state carried from one window to the next: the curve position of
/// the last segmentation point's base sample and the point's coordinates in
/// the distance space.
#[derive(Debug, Clone, Copy)]
struct Cursor {
    pos: usize,
    reference: [f64; 3],
}

/// Curve `curve` of trajectory `traj`, whose first sample has global index
/// `offset`.
struct Frame<'a, F: ?Sized> {
    curve: &'a SignatureCurve,
    traj: &'a Trajectory,
    field: &'a F,
    offset: usize,
}

impl<F: VectorField + ?Sized> Frame<'_, F> {
    fn coords(&self, k: usize, cfg: &WindowConfig) -> [f64; 3] {
        match cfg.distance {
            DistanceSpace::Signature => self.curve.points[k].coords(),
            DistanceSpace::Phase => self.traj.samples[self.curve.indices[k]].to_array(),
        }
    }

    fn sample_point(&self, k: usize) -> SegmentPoint {
        let i = self.curve.indices[k];
        SegmentPoint {
            idx: self.offset + i,
            frac: 0.0,
            t: self.traj.time(i),
            state: self.traj.samples[i],
            signature: self.curve.points[k],
        }
    }

    fn start(&self, k: usize, cfg: &WindowConfig) -> (Cursor, SegmentPoint) {
        (Cursor { pos: k, reference: self.coords(k, cfg) }, self.sample_point(k))
    }

    /// Slides windows while at least `window_size + margin` curve points
    /// remain past the cursor.
    fn run(&self, cfg: &WindowConfig, cursor: &mut Cursor, margin: usize, out: &mut Vec<SegmentPoint>) {
        let curve = self.curve;
        let w = cfg.window_size;
        while cursor.pos + w + margin <= curve.len() {
            let mut best = (f64::INFINITY, cfg.refractory);
            for j in cfg.refractory..w {
                let d = dist3(cursor.reference, self.coords(cursor.pos + j, cfg));
                if d < best.0 {
                    best = (d, j);
                }
            }
            let pos = cursor.pos + best.1;
            let (mut base, mut theta) = (pos, 0.0);
            if cfg.refine {
                let mut closest = best.0;
                // Stepping back is only allowed while it keeps the refractory gap.
                let back = if best.1 > cfg.refractory { pos - 1 } else { pos };
                for a in [back, pos] {
                    let b = a + 1;
                    if b >= curve.len() || curve.indices[b] != curve.indices[a] + 1 {
                        continue;
                    }
                    let (t, d) = project(cursor.reference, self.coords(a, cfg), self.coords(b, cfg));
                    if d < closest {
                        (closest, base, theta) = (d, a, t);
                    }
                }
            }
            if theta > 0.0 {
                let i = curve.indices[base];
                let dt = self.traj.dt;
                cursor.reference = lerp3(self.coords(base, cfg), self.coords(base + 1, cfg), theta);
                out.push(SegmentPoint {
                    idx: self.offset + i,
                    frac: theta,
                    t: self.traj.time(i) + theta * dt,
                    state: rk4_step(self.field, self.traj.samples[i], theta * dt),
                    signature: interpolate(&curve.points[base], &curve.points[base + 1], theta),
                });
            } else {
                cursor.reference = self.coords(base, cfg);
                out.push(self.sample_point(base));
            }
            cursor.pos = base;
        }
    }
}

/// Runs the sliding window from trajectory sample `start`. The loop ends
/// when fewer than `window_size` signature points remain. `filtered_points`
/// is left equal to `points`.
///
/// With `cfg.refine`, the winning sample is replaced by the closest point on
/// the two signature segments around it, and the state is advanced to that
/// point with one RK4 substep. The refined point is the reference for the
/// next window. Without it, segmentation points snap to samples and endpoint
/// gaps cannot fall much below the distance travelled in one step.
pub fn slide<F: VectorField + ?Sized>(
    curve: &SignatureCurve,
    traj: &Trajectory,
    field: &F,
    cfg: &WindowConfig,
    start: usize,
) -> Result<SegmentationResult> {
    cfg.validate()?;
    check_aligned(curve, traj)?;
    let pos = curve
        .position_of(start)
        .ok_or_else(|| Error::InvalidInput(format!("sample {start} has no signature point")))?;
    let frame = Frame { curve, traj, field, offset: 0 };
    let (mut cursor, first) = frame.start(pos, cfg);
    let mut points = vec![first];
    frame.run(cfg, &mut cursor, 0, &mut points);
    Ok(SegmentationResult::with_gaps(points.clone(), points))
}

/// A long on-attractor run segmented chunk by chunk, so memory stays
/// proportional to `chunk` rather than to the run length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LongRun {
    pub seed: State3,
    /// Discarded before sampling starts.
    pub transient: f64,
    /// Sampled duration after the transient.
    pub duration: f64,
    pub method: Method,
    /// Samples integrated per chunk.
    pub chunk: usize,
}

impl Default for LongRun {
    fn default() -> Self {
        Self {
            seed: State3::new(1.0, 1.0, 1.0),
            transient: 10.0,
            duration: 100.0,
            method: Method::Analytic,
            chunk: 1 << 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LongRunOutput {
    /// Unfiltered segmentation points. Indices and times count from the
    /// seed, transient included.
    pub result: SegmentationResult,
    pub crossings: Vec<Crossing>,
    pub samples: usize,
}

/// Samples kept before the cursor when a chunk is rebased, so the
/// signature there is computed from interior stencils in both chunks.
const CHUNK_OVERLAP: usize = 3;

/// Segmentation and section crossings of a long run. Chunks overlap by a
/// few samples; the window loop and the crossing scan carry their state
/// across chunk boundaries.
pub fn segment_long_run<F: VectorField + ?Sized>(
    field: &F,
    run: &LongRun,
    cfg: &WindowConfig,
    section: &SectionConfig,
) -> Result<LongRunOutput> {
    cfg.validate()?;
    let dt = cfg.dt;
    if !(run.duration > 0.0 && run.transient >= 0.0) {
        return Err(Error::InvalidInput("duration must be positive and transient non-negative".into()));
    }
    let n_transient = (run.transient / dt).round() as usize;
    let mut state = run.seed;
    for step in 1..=n_transient {
        state = rk4_step(field, state, dt);
        if !state.is_finite() || state.max_abs() > DIVERGENCE_LIMIT {
            return Err(Error::Divergence { step });
        }
    }
    let total = (run.duration / dt).round() as usize + 1;
    let chunk = run.chunk.max(4 * cfg.window_size);
    let mut buf = integrate_field(state, field, dt, chunk.min(total).max(2) - 1)?;
    buf.t0 = n_transient as f64 * dt;
    let mut produced = buf.len();
    let mut offset = n_transient;

    let mut points = Vec::new();
    let mut crossings = Vec::new();
    let mut apex = ApexTracker::default();
    let mut next_step = offset;
    let mut carried: Option<(usize, [f64; 3])> = None;
    loop {
        let curve = signature_curve(&buf, field, run.method)?;
        let last = produced >= total;
        let end = offset + buf.len() - 1;
        for i in next_step..end {
            let k = i - offset;
            let (s, next) = (buf.samples[k], buf.samples[k + 1]);
            apex.observe(s, section);
            if let Some(c) = crossing_in_step(field, s, next, buf.time(k), dt, section, &mut apex) {
                crossings.push(c?);
            }
        }
        next_step = end;

        let frame = Frame { curve: &curve, traj: &buf, field, offset };
        let mut cursor = match carried {
            None => {
                let start = initial_point(&curve, &buf, cfg.window_size)?;
                let pos = curve.position_of(start).ok_or(Error::NoExtremum)?;
                let (cursor, first) = frame.start(pos, cfg);
                points.push(first);
                cursor
            }
            Some((global, reference)) => {
                let pos = curve.position_of(global - offset).ok_or_else(|| {
                    Error::InvalidInput(format!("sample {global} lost its signature point"))
                })?;
                Cursor { pos, reference }
            }
        };
        frame.run(cfg, &mut cursor, if last { 0 } else { CHUNK_OVERLAP }, &mut points);
        if last {
            break;
        }

        let keep = curve.indices[cursor.pos].saturating_sub(CHUNK_OVERLAP);
        carried = Some((offset + curve.indices[cursor.pos], cursor.reference));
        let more = chunk.min(total - produced);
        let ext = integrate_field(buf.last(), field, dt, more)?;
        let mut samples = buf.samples.split_off(keep);
        samples.extend_from_slice(&ext.samples[1..]);
        buf = Trajectory::new(buf.time(keep), dt, samples)?;
        offset += keep;
        produced += more;
    }
    Ok(LongRunOutput {
        result: SegmentationResult::with_gaps(points.clone(), points),
        crossings,
        samples: total,
    })
}

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn lerp3(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])]
}

/// Parameter in `[0, 1]` of the point of segment `ab` closest to `p`, and
/// the distance to it.
fn project(p: [f64; 3], a: [f64; 3], b: [f64; 3]) -> (f64, f64) {
    let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1] + (p[2] - a[2]) * ab[2]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (t, dist3(p, lerp3(a, b, t)))
}

fn interpolate(a: &SignaturePoint, b: &SignaturePoint, t: f64) -> SignaturePoint {
    let l = |x: f64, y: f64| x + t * (y - x);
    SignaturePoint {
        kappa_tilde: l(a.kappa_tilde, b.kappa_tilde),
        kappa_tilde_s: l(a.kappa_tilde_s, b.kappa_tilde_s),
        tau_tilde: l(a.tau_tilde, b.tau_tilde),
        s_tilde: l(a.s_tilde, b.s_tilde),
    }
}

fn zdot_sign<F: VectorField + ?Sized>(field: &F, s: State3) -> i8 {
    let zd = field.eval(s).z;
    if zd > 0.0 {
        1
    } else if zd < 0.0 {
        -1
    } else {
        0
    }
}

/// Keeps the points whose `ż` has the reference sign: the sign shared by
/// most points, or the first point's sign on a tie. The first few points of
/// a run can sit on the other side while the window locks on, so the
/// majority is the more stable reference.
pub fn filter_z_direction<F: VectorField + ?Sized>(
    result: &SegmentationResult,
    field: &F,
) -> SegmentationResult {
    let signs: Vec<i8> = result.points.iter().map(|p| zdot_sign(field, p.state)).collect();
    let balance: i64 = signs.iter().map(|&s| s as i64).sum();
    let sign = match balance.signum() {
        0 => signs.iter().copied().find(|&s| s != 0).unwrap_or(0),
        b => b as i8,
    };
    if sign == 0 {
        return SegmentationResult::with_gaps(result.points.clone(), Vec::new());
    }
    let kept = result.points.iter().zip(&signs).filter(|(_, &s)| s == sign).map(|(p, _)| *p).collect();
    SegmentationResult::with_gaps(result.points.clone(), kept)
}

/// Every pair of filtered points, in order, whose states lie within
/// `gap_tol` of each other and whose arc crosses the section between one
/// and [`MAX_ARC_CROSSINGS`] times. `crossings` must share the points' time
/// axis.
pub fn quasi_orbits(result: &SegmentationResult, crossings: &[Crossing], gap_tol: f64) -> Vec<QuasiOrbit> {
    let pts = &result.filtered_points;
    crate::par::flat_map_range(0..pts.len(), |i| {
        let mut out = Vec::new();
        for j in i + 1..pts.len() {
            let word = arc_word(crossings, pts[i].t, pts[j].t);
            if word.len() > MAX_ARC_CROSSINGS {
                break;
            }
            let gap = pts[i].state.dist(pts[j].state);
            if gap <= gap_tol && !word.is_empty() {
                out.push(QuasiOrbit {
                    start_idx: pts[i].idx,
                    end_idx: pts[j].idx,
                    start_t: pts[i].t,
                    end_t: pts[j].t,
                    start_state: pts[i].state,
                    gap,
                    crossings: word.len(),
                    word,
                });
            }
        }
        out
    })
}

/// Labels of crossings with `t0 < t ≤ t1`.
fn arc_word(cs: &[Crossing], t0: f64, t1: f64) -> Vec<Symbol> {
    let a = cs.partition_point(|c| c.t <= t0);
    let b = cs.partition_point(|c| c.t <= t1);
    cs[a..b].iter().map(|c| c.label).collect()
}

/// Full segmentation of an on-attractor trajectory: initial point, sliding
/// window, `z`-direction filter and quasi-orbit scan.
pub fn segment_trajectory<F: VectorField + ?Sized>(
    curve: &SignatureCurve,
    traj: &Trajectory,
    field: &F,
    cfg: &WindowConfig,
    section: &SectionConfig,
    gap_tol: f64,
) -> Result<(SegmentationResult, Vec<QuasiOrbit>)> {
    let start = initial_point(curve, traj, cfg.window_size)?;
    let raw = slide(curve, traj, field, cfg, start)?;
    let filtered = filter_z_direction(&raw, field);
    let cs = crossings(traj, field, section)?;
    let arcs = quasi_orbits(&filtered, &cs, gap_tol);
    Ok((filtered, arcs))
}

/// One row of the segmentation CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentRow {
    pub idx: usize,
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub kappa_tilde: f64,
    pub kappa_tilde_s: f64,
    pub tau_tilde: f64,
    pub zdot_sign: i8,
    pub kept: bool,
}

const SEGMENT_HEADER: [&str; 10] =
    ["idx", "t", "x", "y", "z", "kappa_tilde", "kappa_tilde_s", "tau_tilde", "zdot_sign", "kept"];

/// Writes every segmentation point; `kept` marks the filtered ones.
pub fn write_segmentation_csv<F: VectorField + ?Sized, W: Write>(
    result: &SegmentationResult,
    field: &F,
    w: W,
) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(SEGMENT_HEADER)?;
    for p in &result.points {
        let kept = result.filtered_points.iter().any(|q| q.idx == p.idx);
        wr.write_record([
            p.idx.to_string(),
            fmt17(p.t),
            fmt17(p.state.x),
            fmt17(p.state.y),
            fmt17(p.state.z),
            fmt17(p.signature.kappa_tilde),
            fmt17(p.signature.kappa_tilde_s),
            fmt17(p.signature.tau_tilde),
            zdot_sign(field, p.state).to_string(),
            kept.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_segmentation_csv<R: Read>(r: R) -> Result<Vec<SegmentRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let headers = rd.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != SEGMENT_HEADER {
        return Err(Error::Parse(format!("unexpected segmentation header {headers:?}")));
    }
    rd.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Row of the quasi-orbit CSV `start_idx,end_idx,gap,crossings`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiOrbitRow {
    pub start_idx: usize,
    pub end_idx: usize,
    pub gap: f64,
    pub crossings: usize,
}

pub fn write_quasi_orbits_csv<W: Write>(arcs: &[QuasiOrbit], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["start_idx", "end_idx", "gap", "crossings"])?;
    for a in arcs {
        wr.write_record([
            a.start_idx.to_string(),
            a.end_idx.to_string(),
            fmt17(a.gap),
            a.crossings.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_quasi_orbits_csv<R: Read>(r: R) -> Result<Vec<QuasiOrbitRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let headers = rd.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["start_idx", "end_idx", "gap", "crossings"] {
        return Err(Error::Parse(format!("unexpected quasi-orbit header {headers:?}")));
    }
    rd.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::integrate;
    use crate::lorenz::LorenzParams;

    fn sig(kappa_tilde: f64, kappa_tilde_s: f64, tau_tilde: f64) -> SignaturePoint {
        SignaturePoint { kappa_tilde, kappa_tilde_s, tau_tilde, s_tilde: 0.0 }
    }

    fn synthetic(points: Vec<SignaturePoint>) -> (SignatureCurve, Trajectory) {
        let n = points.len();
        let curve = SignatureCurve { indices: (0..n).collect(), points, gaps: Vec::new() };
        let samples = (0..n).map(|i| State3::new(i as f64, 0.0, 0.0)).collect();
        (curve, Trajectory::new(0.0, 1e-3, samples).unwrap())
    }

    fn periodic(n: usize, period: usize) -> (SignatureCurve, Trajectory) {
        synthetic(
            (0..n)
                .map(|i| {
                    let ph = std::f64::consts::TAU * (i % period) as f64 / period as f64;
                    sig(ph.cos(), ph.sin(), (2.0 * ph).sin())
                })
                .collect(),
        )
    }

    #[test]
    fn window_config_invariants() {
        assert!(WindowConfig::new(2500, 600, 5e-4).is_ok());
        assert!(WindowConfig::new(100, 0, 5e-4).is_err());
        assert!(WindowConfig::new(100, 100, 5e-4).is_err());
        assert!(WindowConfig::new(100, 10, 0.0).is_err());
        assert!((WindowConfig::default().duration() - 1.25).abs() < 1e-12);
    }

    #[test]
    fn single_peak_is_initial_point() {
        let (curve, traj) =
            synthetic((0..100).map(|i| sig(0.0, 0.0, -((i as f64 - 40.0).powi(2)))).collect());
        assert_eq!(initial_point(&curve, &traj, 100).unwrap(), 40);
    }

    #[test]
    fn tie_in_tau_broken_by_phase_distance() {
        let (mut curve, mut traj) =
            synthetic((0..60).map(|i| sig(0.0, 0.0, -((i as f64 - 15.0).abs()))).collect());
        for (i, p) in curve.points.iter_mut().enumerate() {
            p.tau_tilde = -((i as f64 - 15.0).abs()).min((i as f64 - 45.0).abs());
        }
        traj.samples = vec![State3::new(0.0, 0.0, 0.0); 60];
        traj.samples[15] = State3::new(1.0, 0.0, 0.0);
        traj.samples[45] = State3::new(0.0, 0.5, 0.0);
        // Index 30 is a minimum between the peaks; push it away.
        traj.samples[30] = State3::new(0.0, 0.0, 9.0);
        assert_eq!(initial_point(&curve, &traj, 60).unwrap(), 45);
    }

    #[test]
    fn monotone_tau_has_no_extremum() {
        let (curve, traj) = synthetic((0..50).map(|i| sig(0.0, 0.0, i as f64)).collect());
        assert_eq!(initial_point(&curve, &traj, 50), Err(Error::NoExtremum));
    }

    #[test]
    fn periodic_signature_recovers_period_exactly() {
        let (curve, traj) = periodic(5000, 300);
        let cfg = WindowConfig::new(700, 150, 1e-3).unwrap();
        for refine in [true, false] {
            let r = slide(&curve, &traj, &LorenzParams::default(), &cfg.with_refine(refine), 0).unwrap();
            assert!(r.points.len() > 10);
            for w in r.points.windows(2) {
                assert_eq!(w[1].idx - w[0].idx, 300);
                assert_eq!(w[1].frac, 0.0);
            }
            assert!(r.points.last().unwrap().idx + 700 > 5000);
        }
    }

    #[test]
    fn receding_signature_advances_by_refractory() {
        let (curve, traj) = synthetic((0..3000).map(|i| sig(i as f64, 0.0, 0.0)).collect());
        let cfg = WindowConfig::new(500, 120, 1e-3).unwrap();
        let r = slide(&curve, &traj, &LorenzParams::default(), &cfg, 0).unwrap();
        for w in r.points.windows(2) {
            assert_eq!(w[1].idx - w[0].idx, 120);
        }
    }

    #[test]
    fn refinement_lands_between_samples() {
        // Period of 300.4 samples: the best match falls between samples.
        let (curve, traj) = synthetic(
            (0..4000)
                .map(|i| {
                    let ph = std::f64::consts::TAU * i as f64 / 300.4;
                    sig(ph.cos(), ph.sin(), 0.0)
                })
                .collect(),
        );
        let cfg = WindowConfig::new(500, 150, 1e-3).unwrap();
        let p = LorenzParams::default();
        let r = slide(&curve, &traj, &p, &cfg, 0).unwrap();
        let t1 = r.points[1].idx as f64 + r.points[1].frac;
        assert!((t1 - 300.4).abs() < 1e-3, "{t1}");
        let plain = slide(&curve, &traj, &p, &cfg.with_refine(false), 0).unwrap();
        assert_eq!(plain.points[1].idx, 300);
    }

    #[test]
    fn z_direction_filter() {
        // zdot = xy - eta z: (1, 1, 0) rises, (1, -1, 0) falls.
        let up = State3::new(1.0, 1.0, 0.0);
        let down = State3::new(1.0, -1.0, 0.0);
        let mk = |states: &[State3]| SegmentationResult {
            points: states
                .iter()
                .enumerate()
                .map(|(i, &s)| SegmentPoint {
                    idx: i,
                    frac: 0.0,
                    t: i as f64,
                    state: s,
                    signature: sig(0.0, 0.0, 0.0),
                })
                .collect(),
            ..Default::default()
        };
        let p = LorenzParams::default();
        let kept = |r: SegmentationResult| {
            filter_z_direction(&r, &p).filtered_points.iter().map(|q| q.idx).collect::<Vec<_>>()
        };
        assert_eq!(kept(mk(&[up, down, up, up])), [0, 2, 3]);
        assert_eq!(kept(mk(&[up, up, up])), [0, 1, 2]);
        assert_eq!(kept(mk(&[down, up])), [0]);
        assert_eq!(kept(mk(&[down, up, up])), [1, 2]);
    }

    fn crossing(t: f64, label: Symbol) -> Crossing {
        Crossing { t, point: State3::new(0.0, 0.0, 27.0), label }
    }

    fn at(i: usize, s: State3) -> SegmentPoint {
        SegmentPoint { idx: i, frac: 0.0, t: i as f64, state: s, signature: sig(0.0, 0.0, 0.0) }
    }

    #[test]
    fn quasi_orbit_scan() {
        let a = State3::new(1.0, 2.0, 3.0);
        let b = State3::new(5.0, 5.0, 5.0);
        let pts = vec![at(0, a), at(10, b), at(20, a)];
        let r = SegmentationResult::with_gaps(pts.clone(), pts);
        let cs = [crossing(5.0, Symbol::L), crossing(15.0, Symbol::R)];
        let arcs = quasi_orbits(&r, &cs, 0.0);
        assert_eq!(arcs.len(), 1);
        assert_eq!((arcs[0].start_idx, arcs[0].end_idx), (0, 20));
        assert_eq!(arcs[0].gap, 0.0);
        assert_eq!(arcs[0].crossings, 2);
        assert_eq!(arcs[0].word_string(), "LR");
        // No crossings inside the arc: nothing to label.
        assert!(quasi_orbits(&r, &[], 0.0).is_empty());
        // Too many crossings.
        let many: Vec<Crossing> = (0..12).map(|k| crossing(1.0 + k as f64, Symbol::L)).collect();
        assert!(quasi_orbits(&r, &many, 0.0).is_empty());
    }

    fn lorenz_run(seconds: f64) -> (Trajectory, SignatureCurve) {
        let p = LorenzParams::default();
        let dt = 5e-4;
        let full = integrate(State3::new(1.0, 1.0, 1.0), &p, dt, ((seconds + 10.0) / dt) as usize).unwrap();
        let traj = full.tail_from((10.0 / dt) as usize);
        let curve = signature_curve(&traj, &p, Method::Analytic).unwrap();
        (traj, curve)
    }

    #[test]
    fn lorenz_segmentation_properties() {
        let p = LorenzParams::default();
        let (traj, curve) = lorenz_run(60.0);
        let cfg = WindowConfig::default();
        let start = initial_point(&curve, &traj, cfg.window_size).unwrap();
        let k = curve.position_of(start).unwrap();
        let tau = |i: usize| curve.points[i].tau_tilde;
        assert!((tau(k) - tau(k - 1)) * (tau(k + 1) - tau(k)) <= 0.0);

        let r = slide(&curve, &traj, &p, &cfg, start).unwrap();
        assert!(r.points.len() > 30);
        for w in r.points.windows(2) {
            let step = (w[1].idx as f64 + w[1].frac) - (w[0].idx as f64 + w[0].frac);
            assert!(step >= cfg.refractory as f64, "{step}");
            assert!(w[1].idx > w[0].idx);
        }
        let again = slide(&curve, &traj, &p, &cfg, start).unwrap();
        assert_eq!(r, again);

        let section = SectionConfig::for_params(&p);
        let (f, arcs) = segment_trajectory(&curve, &traj, &p, &cfg, &section, 1.0).unwrap();
        assert!(f.filtered_points.iter().all(|q| r.points.contains(q)));
        assert!(arcs.iter().all(|a| a.gap <= 1.0 && a.crossings <= MAX_ARC_CROSSINGS));
        assert_eq!(f.endpoint_gaps.len(), f.filtered_points.len() - 1);
        let (_, none) = segment_trajectory(&curve, &traj, &p, &cfg, &section, 0.0).unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn chunked_run_matches_in_memory() {
        let p = LorenzParams::default();
        let (traj, curve) = lorenz_run(60.0);
        let cfg = WindowConfig::default();
        let section = SectionConfig::for_params(&p);
        let start = initial_point(&curve, &traj, cfg.window_size).unwrap();
        let whole = slide(&curve, &traj, &p, &cfg, start).unwrap();
        let run = LongRun { duration: 60.0, chunk: 10_000, ..Default::default() };
        let chunked = segment_long_run(&p, &run, &cfg, &section).unwrap();
        let pts = &chunked.result.points;
        assert_eq!(pts.len(), whole.points.len());
        for (a, b) in pts.iter().zip(&whole.points) {
            assert_eq!(a.idx, b.idx + 20_000);
            assert!((a.frac - b.frac).abs() < 1e-6);
            assert!(a.state.dist(b.state) < 1e-9);
        }
        let cs = crossings(&traj, &p, &section).unwrap();
        assert_eq!(chunked.crossings.len(), cs.len());
        for (a, b) in chunked.crossings.iter().zip(&cs) {
            assert_eq!(a.label, b.label);
            assert!((a.t - b.t).abs() < 1e-9);
        }
    }

    #[test]
    fn csv_round_trips() {
        let p = LorenzParams::default();
        let (traj, curve) = lorenz_run(20.0);
        let cfg = WindowConfig::default();
        let section = SectionConfig::for_params(&p);
        let (r, _) = segment_trajectory(&curve, &traj, &p, &cfg, &section, 0.0).unwrap();
        let mut buf = Vec::new();
        write_segmentation_csv(&r, &p, &mut buf).unwrap();
        let rows = read_segmentation_csv(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), r.points.len());
        for (row, q) in rows.iter().zip(&r.points) {
            assert_eq!(row.idx, q.idx);
            assert_eq!(row.x, q.state.x);
            assert_eq!(row.tau_tilde, q.signature.tau_tilde);
        }
        assert_eq!(rows.iter().filter(|r| r.kept).count(), r.filtered_points.len());

        let arcs = vec![QuasiOrbit {
            start_idx: 3,
            end_idx: 9,
            start_t: 0.0,
            end_t: 1.0,
            start_state: State3::new(0.0, 0.0, 0.0),
            gap: 0.0025,
            crossings: 2,
            word: vec![Symbol::L, Symbol::R],
        }];
        let mut buf = Vec::new();
        write_quasi_orbits_csv(&arcs, &mut buf).unwrap();
        let back = read_quasi_orbits_csv(buf.as_slice()).unwrap();
        assert_eq!(back, [QuasiOrbitRow { start_idx: 3, end_idx: 9, gap: 0.0025, crossings: 2 }]);
        assert!(read_quasi_orbits_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}
