//! Census driver: enumerate candidate sequences, seed, close, and record.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::closure::{attractor_crossings, close_sequence, ClosureConfig, PeriodicOrbit, ShootingState};
use crate::error::{Error, Result};
use crate::lorenz::{State3, VectorField};
use crate::symbolic::{enumerate_candidates, Crossing, SymbolSequence};
use crate::verify::Verdict;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CensusConfig {
    pub p_max: usize,
    pub closure: ClosureConfig,
    pub seed_state: State3,
    pub transient: f64,
    /// Attractor crossings recorded for seeding.
    pub crossings: usize,
}

impl Default for CensusConfig {
    fn default() -> Self {
        Self {
            p_max: 8,
            closure: ClosureConfig::default(),
            seed_state: State3::new(1.0, 1.0, 1.0),
            transient: 10.0,
            crossings: 20_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Census {
    pub orbits: Vec<PeriodicOrbit>,
    pub failures: Vec<(SymbolSequence, Error)>,
}

/// Closes every candidate of period `2..=p_max`, in parallel over
/// candidates. `library` orbits are reused as seeds when they match.
pub fn run_census<F: VectorField + ?Sized>(
    field: &F,
    cfg: &CensusConfig,
    library: &[PeriodicOrbit],
) -> Result<Census> {
    let candidates = enumerate_candidates(cfg.p_max)?;
    let crossings = attractor_crossings(
        field,
        cfg.seed_state,
        cfg.transient,
        cfg.crossings,
        cfg.closure.dt,
        &cfg.closure.section,
    )?;
    Ok(close_all(&candidates, library, &crossings, field, &cfg.closure))
}

pub fn close_all<F: VectorField + ?Sized>(
    candidates: &[SymbolSequence],
    library: &[PeriodicOrbit],
    crossings: &[Crossing],
    field: &F,
    cfg: &ClosureConfig,
) -> Census {
    let results =
        crate::par::map(candidates, |seq| (seq.clone(), close_sequence(seq, library, crossings, field, cfg)));
    let mut orbits = Vec::new();
    let mut failures = Vec::new();
    for (seq, r) in results {
        match r {
            Ok(o) => orbits.push(o),
            Err(e) => failures.push((seq, e)),
        }
    }
    Census { orbits, failures }
}

/// Row of the census table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusRow {
    pub p: usize,
    #[serde(rename = "T")]
    pub t: f64,
    pub s: String,
}

impl From<&PeriodicOrbit> for CensusRow {
    fn from(o: &PeriodicOrbit) -> Self {
        Self { p: o.p(), t: o.period, s: o.sequence.to_string() }
    }
}

/// Census CSV `p,T,s` with `T` to five decimals.
pub fn write_census_csv<W: Write>(orbits: &[PeriodicOrbit], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["p", "T", "s"])?;
    for o in orbits {
        wr.write_record([o.p().to_string(), format!("{:.5}", o.period), o.sequence.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_census_csv<R: Read>(r: R) -> Result<Vec<CensusRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let headers = rd.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["p", "T", "s"] {
        return Err(Error::Parse(format!("unexpected census header {headers:?}")));
    }
    rd.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Orbit record as written to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub sequence: SymbolSequence,
    pub p: usize,
    #[serde(rename = "T")]
    pub t: f64,
    pub points: Vec<[f64; 2]>,
    pub return_times: Vec<f64>,
    pub residual: f64,
    pub verified: Option<Verdict>,
}

impl OrbitRecord {
    pub fn new(o: &PeriodicOrbit, verified: Option<Verdict>) -> Self {
        Self {
            sequence: o.sequence.clone(),
            p: o.p(),
            t: o.period,
            points: o.shooting.points.clone(),
            return_times: o.shooting.return_times.clone(),
            residual: o.residual,
            verified,
        }
    }

    pub fn to_orbit(&self) -> Result<PeriodicOrbit> {
        if self.p != self.points.len() || self.p != self.sequence.period() {
            return Err(Error::Parse(format!("orbit record {} has inconsistent period", self.sequence)));
        }
        Ok(PeriodicOrbit {
            sequence: self.sequence.clone(),
            shooting: ShootingState::new(self.points.clone(), self.return_times.clone())?,
            period: self.t,
            residual: self.residual,
            iterations: 0,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
