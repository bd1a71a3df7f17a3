//! Fixed-step classical RK4 integration of the flow and of its variational
//! equations.
//!
//! The default step `DEFAULT_DT = 0.0005` fixes the sampling grid: a
//! 2500-sample segmentation window spans 1.25 time units.

use std::io::{Read, Write};

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::lorenz::{mat_vec, LorenzParams, State3, VectorField};

pub const DEFAULT_DT: f64 = 0.0005;

/// Any component beyond this magnitude aborts integration.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Uniformly sampled trajectory; `samples[i]` sits at `t0 + i * dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t0: f64,
    pub dt: f64,
    pub samples: Vec<State3>,
}

impl Trajectory {
    pub fn new(t0: f64, dt: f64, samples: Vec<State3>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
        }
        if samples.is_empty() {
            return Err(Error::InvalidInput("trajectory needs at least one sample".into()));
        }
        Ok(Self { t0, dt, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn duration(&self) -> f64 {
        (self.len() - 1) as f64 * self.dt
    }

    pub fn last(&self) -> State3 {
        *self.samples.last().expect("non-empty by construction")
    }

    /// Samples from `start` onwards, re-based in time.
    pub fn tail_from(&self, start: usize) -> Trajectory {
        Trajectory { t0: self.time(start), dt: self.dt, samples: self.samples[start..].to_vec() }
    }

    /// Writes `t,x,y,z` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "x", "y", "z"])?;
        for (i, s) in self.samples.iter().enumerate() {
            wr.write_record([fmt17(self.time(i)), fmt17(s.x), fmt17(s.y), fmt17(s.z)])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads a `t,x,y,z` table; the step is taken from the first two rows and
    /// must be uniform.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t", "x", "y", "z"] {
            return Err(Error::Parse(format!("unexpected trajectory header {headers:?}")));
        }
        let mut times = Vec::new();
        let mut samples = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let v = parse_row::<4>(&rec)?;
            times.push(v[0]);
            samples.push(State3::new(v[1], v[2], v[3]));
        }
        if samples.is_empty() {
            return Err(Error::Parse("empty trajectory file".into()));
        }
        let dt = if times.len() > 1 { times[1] - times[0] } else { DEFAULT_DT };
        for (i, t) in times.iter().enumerate() {
            let expected = times[0] + i as f64 * dt;
            if (t - expected).abs() > 1e-9 * (1.0 + expected.abs()) {
                return Err(Error::Parse(format!("non-uniform sampling at row {i}")));
            }
        }
        Trajectory::new(times[0], dt, samples)
    }
}

pub(crate) fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn parse_row<const N: usize>(rec: &csv::StringRecord) -> Result<[f64; N]> {
    if rec.len() != N {
        return Err(Error::Parse(format!("expected {N} columns, got {}", rec.len())));
    }
    let mut out = [0.0; N];
    for (o, field) in out.iter_mut().zip(rec.iter()) {
        *o = field.trim().parse().map_err(|_| Error::Parse(format!("not a number: {field:?}")))?;
    }
    Ok(out)
}

/// Flow endpoint plus the derivative of the flow map at the initial state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowResult {
    pub final_state: State3,
    pub monodromy: Matrix3<f64>,
    pub elapsed: f64,
}

#[inline]
pub fn rk4_step<F: VectorField + ?Sized>(field: &F, s: State3, h: f64) -> State3 {
    let k1 = field.eval(s);
    let k2 = field.eval(s + k1 * (0.5 * h));
    let k3 = field.eval(s + k2 * (0.5 * h));
    let k4 = field.eval(s + k3 * h);
    s + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// One RK4 step of the augmented system `(x, M)` with `M' = J(x) M`.
#[inline]
pub fn rk4_step_variational<F: VectorField + ?Sized>(
    field: &F,
    s: State3,
    m: &Matrix3<f64>,
    h: f64,
) -> (State3, Matrix3<f64>) {
    let k1 = field.eval(s);
    let l1 = field.jacobian(s) * m;
    let s2 = s + k1 * (0.5 * h);
    let k2 = field.eval(s2);
    let l2 = field.jacobian(s2) * (m + l1 * (0.5 * h));
    let s3 = s + k2 * (0.5 * h);
    let k3 = field.eval(s3);
    let l3 = field.jacobian(s3) * (m + l2 * (0.5 * h));
    let s4 = s + k3 * h;
    let k4 = field.eval(s4);
    let l4 = field.jacobian(s4) * (m + l3 * h);
    (s + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0), m + (l1 + l2 * 2.0 + l3 * 2.0 + l4) * (h / 6.0))
}

fn guard(s: State3, step: usize) -> Result<State3> {
    if s.is_finite() && s.max_abs() <= DIVERGENCE_LIMIT {
        Ok(s)
    } else {
        Err(Error::Divergence { step })
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("dt must be positive, got {dt}")))
    }
}

/// `n_steps` RK4 steps from `s0`, keeping every sample.
pub fn integrate(s0: State3, p: &LorenzParams, dt: f64, n_steps: usize) -> Result<Trajectory> {
    integrate_field(s0, p, dt, n_steps)
}

pub fn integrate_field<F: VectorField + ?Sized>(
    s0: State3,
    field: &F,
    dt: f64,
    n_steps: usize,
) -> Result<Trajectory> {
    check_dt(dt)?;
    if n_steps == 0 {
        return Err(Error::InvalidInput("n_steps must be at least 1".into()));
    }
    let mut samples = Vec::with_capacity(n_steps + 1);
    let mut s = guard(s0, 0)?;
    samples.push(s);
    for step in 1..=n_steps {
        s = guard(rk4_step(field, s, dt), step)?;
        samples.push(s);
    }
    Trajectory::new(0.0, dt, samples)
}

/// Splits `t` into whole steps of `dt` plus a shortened final step.
pub(crate) fn split_duration(t: f64, dt: f64) -> (usize, f64) {
    let ratio = t / dt;
    let n = (ratio + 1e-9).floor().max(0.0);
    let rem = t - n * dt;
    let rem = if rem.abs() <= 1e-12 * dt.max(t.abs()) { 0.0 } else { rem.max(0.0) };
    (n as usize, rem)
}

/// Endpoint of the RK4 flow over duration `t`; the last step is shortened to
/// land exactly on `t`.
pub fn flow(s0: State3, p: &LorenzParams, t: f64, dt: f64) -> Result<State3> {
    flow_field(s0, p, t, dt)
}

pub fn flow_field<F: VectorField + ?Sized>(s0: State3, field: &F, t: f64, dt: f64) -> Result<State3> {
    check_dt(dt)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("flow time must be >= 0, got {t}")));
    }
    let (n, rem) = split_duration(t, dt);
    let mut s = guard(s0, 0)?;
    for step in 1..=n {
        s = guard(rk4_step(field, s, dt), step)?;
    }
    if rem > 0.0 {
        s = guard(rk4_step(field, s, rem), n + 1)?;
    }
    Ok(s)
}

/// Flow endpoint together with the monodromy `DΦ_t(s0)`, from the variational
/// equations integrated jointly with the state using identical RK4 steps.
pub fn flow_with_variational(s0: State3, p: &LorenzParams, t: f64, dt: f64) -> Result<FlowResult> {
    flow_with_variational_field(s0, p, t, dt)
}

pub fn flow_with_variational_field<F: VectorField + ?Sized>(
    s0: State3,
    field: &F,
    t: f64,
    dt: f64,
) -> Result<FlowResult> {
    check_dt(dt)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("flow time must be >= 0, got {t}")));
    }
    let (n, rem) = split_duration(t, dt);
    let mut s = guard(s0, 0)?;
    let mut m = Matrix3::identity();
    for step in 1..=n {
        let (s1, m1) = rk4_step_variational(field, s, &m, dt);
        s = guard(s1, step)?;
        m = m1;
    }
    if rem > 0.0 {
        let (s1, m1) = rk4_step_variational(field, s, &m, rem);
        s = guard(s1, n + 1)?;
        m = m1;
    }
    Ok(FlowResult { final_state: s, monodromy: m, elapsed: t })
}

/// Tangent-linear propagation of a single vector along `s0`.
pub fn propagate_tangent<F: VectorField + ?Sized>(
    field: &F,
    s0: State3,
    v0: State3,
    t: f64,
    dt: f64,
) -> Result<(State3, State3)> {
    let fr = flow_with_variational_field(s0, field, t, dt)?;
    Ok((fr.final_state, mat_vec(&fr.monodromy, v0)))
}
