//! Poincaré section `z = plane_z` and L/R symbolic dynamics.
//!
//! By default a crossing is labelled by the wing of the loop it closes: `L`
//! when the apex of the arc since the previous crossing (its highest point,
//! for downward sections) has `x < 0`, `R` otherwise. Labelling by the sign
//! of `x` at the crossing itself is available as [`LabelRule::CrossingSign`];
//! it mislabels the returns that pass close to `x = 0` after a wing switch.
//! Either way the symmetry `(x, y, z) -> (−x, −y, z)` exchanges the labels.
//! Cyclic words are reduced to their primitive root and then to the
//! lexicographically least rotation (`L < R`).

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{fmt17, rk4_step, Trajectory};
use crate::lorenz::{LorenzParams, State3, VectorField};

/// Crossings with `|ż|` below this are rejected as tangential.
pub const TANGENCY_THRESHOLD: f64 = 1e-8;
/// Target accuracy of `|z − plane_z|` at a refined crossing.
pub const CROSSING_TOL: f64 = 1e-12;

/// How a crossing gets its L/R label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelRule {
    /// Sign of `x` at the apex of the loop that ends at the crossing.
    #[default]
    Apex,
    /// Sign of `x` at the crossing point.
    CrossingSign,
}

impl FromStr for LabelRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "apex" => Ok(LabelRule::Apex),
            "crossing-sign" => Ok(LabelRule::CrossingSign),
            _ => Err(Error::InvalidInput(format!("unknown label rule {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionConfig {
    pub plane_z: f64,
    /// Sign of `ż` at accepted crossings, `+1` or `−1`.
    pub direction: i8,
    #[serde(default)]
    pub label_rule: LabelRule,
}

impl SectionConfig {
    pub fn new(plane_z: f64, direction: i8) -> Result<Self> {
        if direction != 1 && direction != -1 {
            return Err(Error::InvalidInput(format!("section direction must be +1 or -1, got {direction}")));
        }
        Ok(Self { plane_z, direction, label_rule: LabelRule::default() })
    }

    /// The plane through both wing equilibria, crossed downwards.
    pub fn for_params(p: &LorenzParams) -> Self {
        Self { plane_z: p.wing_height(), direction: -1, label_rule: LabelRule::default() }
    }

    pub fn with_label_rule(self, label_rule: LabelRule) -> Self {
        Self { label_rule, ..self }
    }

    /// Signed height above the plane, oriented so that an accepted crossing
    /// goes from positive to non-positive.
    #[inline]
    pub(crate) fn oriented(&self, z: f64) -> f64 {
        -(self.direction as f64) * (z - self.plane_z)
    }
}

impl Default for SectionConfig {
    fn default() -> Self {
        Self::for_params(&LorenzParams::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Symbol {
    L,
    R,
}

impl Symbol {
    pub fn of_x(x: f64) -> Symbol {
        if x < 0.0 {
            Symbol::L
        } else {
            Symbol::R
        }
    }

    pub fn flip(self) -> Symbol {
        match self {
            Symbol::L => Symbol::R,
            Symbol::R => Symbol::L,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Symbol::L => 'L',
            Symbol::R => 'R',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub t: f64,
    pub point: State3,
    pub label: Symbol,
}

/// A canonical primitive cyclic word.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymbolSequence {
    word: Vec<Symbol>,
}

impl SymbolSequence {
    pub fn word(&self) -> &[Symbol] {
        &self.word
    }

    pub fn period(&self) -> usize {
        self.word.len()
    }

    pub fn count(&self, s: Symbol) -> usize {
        self.word.iter().filter(|&&w| w == s).count()
    }

    /// True when the sequence equals its own mirror image.
    pub fn is_self_symmetric(&self) -> bool {
        mirror(self) == *self
    }
}

impl fmt::Display for SymbolSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.word {
            write!(f, "{}", s.as_char())?;
        }
        Ok(())
    }
}

/// Parses a raw word of `L`/`R` characters.
pub fn parse_word(s: &str) -> Result<Vec<Symbol>> {
    s.chars()
        .map(|c| match c {
            'L' => Ok(Symbol::L),
            'R' => Ok(Symbol::R),
            other => Err(Error::InvalidSymbol(other)),
        })
        .collect()
}

impl FromStr for SymbolSequence {
    type Err = Error;
    /// Parses and canonicalises.
    fn from_str(s: &str) -> Result<Self> {
        canonicalize(&parse_word(s)?)
    }
}

impl Serialize for SymbolSequence {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SymbolSequence {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn word_string(w: &[Symbol]) -> String {
    w.iter().map(|s| s.as_char()).collect()
}

/// Length of the shortest `root` with `word = root^k`.
pub fn primitive_period(word: &[Symbol]) -> usize {
    let n = word.len();
    (1..=n).find(|&d| n.is_multiple_of(d) && (d..n).all(|i| word[i] == word[i - d])).unwrap_or(n)
}

fn least_rotation(word: &[Symbol]) -> Vec<Symbol> {
    let n = word.len();
    (0..n).map(|k| word[k..].iter().chain(&word[..k]).copied().collect::<Vec<_>>()).min().unwrap_or_default()
}

/// Primitive root of `word`, rotated to its lexicographic minimum.
pub fn canonicalize(word: &[Symbol]) -> Result<SymbolSequence> {
    if word.is_empty() {
        return Err(Error::NotPeriodicRepetition { word: String::new() });
    }
    let d = primitive_period(word);
    Ok(SymbolSequence { word: least_rotation(&word[..d]) })
}

/// Like [`canonicalize`] but requires `word` to be an exact power of a word
/// of length `period`.
pub fn canonicalize_with_period(word: &[Symbol], period: usize) -> Result<SymbolSequence> {
    let n = word.len();
    if period == 0 || n == 0 || !n.is_multiple_of(period) || (period..n).any(|i| word[i] != word[i - period])
    {
        return Err(Error::NotPeriodicRepetition { word: word_string(word) });
    }
    canonicalize(word)
}

/// L↔R swap, then canonicalise.
pub fn mirror(seq: &SymbolSequence) -> SymbolSequence {
    let flipped: Vec<Symbol> = seq.word.iter().map(|s| s.flip()).collect();
    SymbolSequence { word: least_rotation(&flipped) }
}

/// Representative of the `{seq, mirror(seq)}` pair: more `L`s first, then
/// lexicographically smallest.
pub fn class_representative(seq: &SymbolSequence) -> SymbolSequence {
    let m = mirror(seq);
    let key = |s: &SymbolSequence| (std::cmp::Reverse(s.count(Symbol::L)), s.word.clone());
    if key(&m) < key(seq) {
        m
    } else {
        seq.clone()
    }
}

/// One representative of every primitive cyclic word of length `2..=p_max`
/// up to rotation and mirror symmetry, sorted by period then word.
pub fn enumerate_candidates(p_max: usize) -> Result<Vec<SymbolSequence>> {
    if p_max < 2 {
        return Err(Error::InvalidInput(format!("p_max must be at least 2, got {p_max}")));
    }
    if p_max > 24 {
        return Err(Error::InvalidInput(format!("p_max {p_max} is too large to enumerate")));
    }
    let mut out = Vec::new();
    for n in 2..=p_max {
        for bits in 0u32..(1u32 << n) {
            let word: Vec<Symbol> =
                (0..n).map(|k| if bits >> (n - 1 - k) & 1 == 0 { Symbol::L } else { Symbol::R }).collect();
            if primitive_period(&word) != n || least_rotation(&word) != word {
                continue;
            }
            let seq = SymbolSequence { word };
            if class_representative(&seq) == seq {
                out.push(seq);
            }
        }
    }
    out.sort_by(|a, b| a.period().cmp(&b.period()).then_with(|| a.word.cmp(&b.word)));
    Ok(out)
}

/// Step size `h ∈ (0, dt]` such that one RK4 step of size `h` from `s` lands
/// on the plane. `g(0) > 0 >= g(dt)` in oriented height.
fn refine_in_step<F: VectorField + ?Sized>(
    field: &F,
    s: State3,
    dt: f64,
    cfg: &SectionConfig,
) -> (f64, State3) {
    let g = |h: f64| {
        let p = rk4_step(field, s, h);
        (cfg.oriented(p.z), p)
    };
    let (mut lo, mut hi) = (0.0, dt);
    let g_lo = cfg.oriented(s.z);
    let (g_hi, p_hi) = g(dt);
    if g_hi == 0.0 {
        return (dt, p_hi);
    }
    // Secant start, then Newton on the step size with bisection safeguard.
    let mut h = dt * g_lo / (g_lo - g_hi);
    let mut best = (h, rk4_step(field, s, h));
    for _ in 0..100 {
        let (gh, p) = g(h);
        best = (h, p);
        if (p.z - cfg.plane_z).abs() < CROSSING_TOL {
            break;
        }
        if gh > 0.0 {
            lo = h;
        } else {
            hi = h;
        }
        // d/dh of the oriented height is ≈ the oriented ż at the step end.
        let slope = -(cfg.direction as f64) * field.eval(p).z;
        let newton = if slope != 0.0 { h - gh / slope } else { f64::NAN };
        h = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo < 1e-18 {
            break;
        }
    }
    best
}

/// Running apex (point of greatest oriented height) of the current arc.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct ApexTracker {
    best: Option<(f64, f64)>,
}

impl ApexTracker {
    #[inline]
    pub(crate) fn observe(&mut self, s: State3, cfg: &SectionConfig) {
        let h = cfg.oriented(s.z);
        if self.best.is_none_or(|(b, _)| h > b) {
            self.best = Some((h, s.x));
        }
    }

    pub(crate) fn apex_x(&self) -> Option<f64> {
        self.best.map(|(_, x)| x)
    }

    pub(crate) fn reset(&mut self) {
        self.best = None;
    }
}

/// Refined crossing of the plane inside the step starting at sample
/// `s` at time `t`, or `None` if the step does not bracket one. `apex` must
/// already have observed `s`; it is reset when a crossing is returned.
pub(crate) fn crossing_in_step<F: VectorField + ?Sized>(
    field: &F,
    s: State3,
    next: State3,
    t: f64,
    dt: f64,
    cfg: &SectionConfig,
    apex: &mut ApexTracker,
) -> Option<Result<Crossing>> {
    if !(cfg.oriented(s.z) > 0.0 && cfg.oriented(next.z) <= 0.0) {
        return None;
    }
    let (h, p) = refine_in_step(field, s, dt, cfg);
    let zdot = field.eval(p).z;
    if zdot.abs() < TANGENCY_THRESHOLD {
        return Some(Err(Error::TangentialCrossing { t: t + h, zdot }));
    }
    let point = State3::new(p.x, p.y, cfg.plane_z);
    let label = match (cfg.label_rule, apex.apex_x()) {
        (LabelRule::Apex, Some(x)) => Symbol::of_x(x),
        _ => Symbol::of_x(point.x),
    };
    apex.reset();
    Some(Ok(Crossing { t: t + h, point, label }))
}

/// All accepted crossings of a trajectory, in time order.
pub fn crossings<F: VectorField + ?Sized>(
    traj: &Trajectory,
    field: &F,
    cfg: &SectionConfig,
) -> Result<Vec<Crossing>> {
    crossings_between(traj, field, cfg, 0, traj.len().saturating_sub(1))
}

/// Crossings within samples `start..=end`. The first crossing's apex is
/// taken over the samples from `start` on.
pub fn crossings_between<F: VectorField + ?Sized>(
    traj: &Trajectory,
    field: &F,
    cfg: &SectionConfig,
    start: usize,
    end: usize,
) -> Result<Vec<Crossing>> {
    let s = &traj.samples;
    let end = end.min(s.len().saturating_sub(1));
    let mut out = Vec::new();
    let mut apex = ApexTracker::default();
    for i in start..end {
        apex.observe(s[i], cfg);
        if let Some(c) = crossing_in_step(field, s[i], s[i + 1], traj.time(i), traj.dt, cfg, &mut apex) {
            out.push(c?);
        }
    }
    Ok(out)
}

/// Labels of the crossings between samples `start` and `end`, in time order.
pub fn label_arc<F: VectorField + ?Sized>(
    traj: &Trajectory,
    field: &F,
    start: usize,
    end: usize,
    cfg: &SectionConfig,
) -> Result<Vec<Symbol>> {
    let cs = crossings_between(traj, field, cfg, start, end)?;
    if cs.is_empty() {
        return Err(Error::NoCrossings);
    }
    Ok(cs.iter().map(|c| c.label).collect())
}

pub fn word_to_string(w: &[Symbol]) -> String {
    word_string(w)
}

pub fn write_crossings_csv<W: Write>(cs: &[Crossing], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["t", "x", "y", "label"])?;
    for c in cs {
        wr.write_record([fmt17(c.t), fmt17(c.point.x), fmt17(c.point.y), c.label.as_char().to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads a crossing table; `plane_z` restores the dropped coordinate.
pub fn read_crossings_csv<R: Read>(r: R, plane_z: f64) -> Result<Vec<Crossing>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        if rec.len() != 4 {
            return Err(Error::Parse(format!("expected 4 columns, got {}", rec.len())));
        }
        let num = |i: usize| -> Result<f64> {
            rec[i].trim().parse().map_err(|_| Error::Parse(format!("not a number: {:?}", &rec[i])))
        };
        let label = match rec[3].trim() {
            "L" => Symbol::L,
            "R" => Symbol::R,
            other => return Err(Error::Parse(format!("bad label {other:?}"))),
        };
        out.push(Crossing { t: num(0)?, point: State3::new(num(1)?, num(2)?, plane_z), label });
    }
    Ok(out)
}
