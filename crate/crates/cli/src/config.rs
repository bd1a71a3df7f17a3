//! Run configuration: one flat TOML file, every key optional, command-line
//! flags applied on top.

use std::path::{Path, PathBuf};

use orbitforge::closure::ClosureConfig;
use orbitforge::segment::{DistanceSpace, WindowConfig};
use orbitforge::signature::Method;
use orbitforge::symbolic::{LabelRule, SectionConfig};
use orbitforge::verify::VerifyConfig;
use orbitforge::{LorenzParams, State3};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub sigma: f64,
    pub eta: f64,
    pub r: f64,
    pub seed: [f64; 3],
    pub dt: f64,
    /// Time discarded before signature, segmentation and seeding work.
    pub transient: f64,
    /// Total integration time, transient included.
    pub sim_time: f64,
    pub method: Method,
    pub window_size: usize,
    pub refractory: usize,
    pub distance: DistanceSpace,
    pub refine: bool,
    /// Section height; defaults to the wing equilibria's `r − 1`.
    pub plane_z: Option<f64>,
    pub direction: i8,
    pub label_rule: LabelRule,
    pub gap_tol: f64,
    pub newton_tol: f64,
    pub max_iter: usize,
    pub p_max: usize,
    /// Attractor crossings recorded for seeding Newton.
    pub seed_crossings: usize,
    pub krawczyk_radius: f64,
    pub verify_dt: f64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = LorenzParams::default();
        Self {
            sigma: p.sigma,
            eta: p.eta,
            r: p.r,
            seed: [1.0, 1.0, 1.0],
            dt: orbitforge::DEFAULT_DT,
            transient: 10.0,
            sim_time: 100.0,
            method: Method::Analytic,
            window_size: orbitforge::segment::DEFAULT_WINDOW,
            refractory: orbitforge::segment::DEFAULT_REFRACTORY,
            distance: DistanceSpace::Signature,
            refine: true,
            plane_z: None,
            direction: -1,
            label_rule: LabelRule::Apex,
            gap_tol: orbitforge::segment::DEFAULT_GAP_TOL,
            newton_tol: 1e-11,
            max_iter: 50,
            p_max: 8,
            seed_crossings: 20_000,
            krawczyk_radius: 1e-6,
            verify_dt: 1e-4,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    #[cfg(test)]
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        self.params()?;
        for (name, v) in [
            ("dt", self.dt),
            ("gap_tol", self.gap_tol),
            ("newton_tol", self.newton_tol),
            ("krawczyk_radius", self.krawczyk_radius),
            ("verify_dt", self.verify_dt),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.transient >= 0.0) {
            return bad(format!("transient must be non-negative, got {}", self.transient));
        }
        if !(self.sim_time > self.transient) {
            return bad(format!("sim_time ({}) must exceed transient ({})", self.sim_time, self.transient));
        }
        if self.seed.iter().any(|v| !v.is_finite()) {
            return bad("seed must be finite".into());
        }
        if self.p_max < 2 {
            return bad(format!("p_max must be at least 2, got {}", self.p_max));
        }
        self.window()?;
        self.section()?;
        Ok(())
    }

    pub fn params(&self) -> Result<LorenzParams, CliError> {
        LorenzParams::new(self.sigma, self.eta, self.r).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn seed_state(&self) -> State3 {
        State3::from(self.seed)
    }

    pub fn section(&self) -> Result<SectionConfig, CliError> {
        let plane = self.plane_z.unwrap_or(self.r - 1.0);
        SectionConfig::new(plane, self.direction)
            .map(|s| s.with_label_rule(self.label_rule))
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn window(&self) -> Result<WindowConfig, CliError> {
        WindowConfig::new(self.window_size, self.refractory, self.dt)
            .map(|w| w.with_distance(self.distance).with_refine(self.refine))
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn closure(&self) -> Result<ClosureConfig, CliError> {
        Ok(ClosureConfig {
            section: self.section()?,
            dt: self.dt,
            tol: self.newton_tol,
            max_iter: self.max_iter,
            ..ClosureConfig::default()
        })
    }

    pub fn verify(&self) -> Result<VerifyConfig, CliError> {
        let section = self.section()?;
        let closure = ClosureConfig { dt: self.verify_dt, ..self.closure()? };
        Ok(VerifyConfig { section, dt: self.verify_dt, closure })
    }

    /// Number of RK4 steps covering `sim_time`.
    pub fn steps(&self) -> usize {
        (self.sim_time / self.dt).round() as usize
    }

    /// Number of steps covering the transient.
    pub fn transient_steps(&self) -> usize {
        (self.transient / self.dt).round() as usize
    }
}
