//! Subcommand bodies. Every file is written from the calling thread; the
//! library parallelizes the numerical work inside each call.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use orbitforge::census::{run_census, write_census_csv, CensusConfig, OrbitRecord};
use orbitforge::closure::{orbit_samples, PeriodicOrbit};
use orbitforge::integrate::integrate;
use orbitforge::segment::{
    filter_z_direction, quasi_orbits, segment_long_run, write_quasi_orbits_csv, write_segmentation_csv,
    LongRun,
};
use orbitforge::signature::{signature_curve, Method, SignaturePoint};
use orbitforge::verify::{verify_census, Status, Verdict};
use orbitforge::Trajectory;

use crate::config::RunConfig;
use crate::plots;
use crate::CliError;

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Writes `path` through `body`, flushing before returning.
fn write_with<T>(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> Result<T, CliError>,
) -> Result<T, CliError> {
    let mut w = create(path)?;
    let out = body(&mut w)?;
    w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(out)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Analytic => "analytic",
        Method::Discrete => "discrete",
    }
}

fn trajectory(cfg: &RunConfig) -> Result<Trajectory, CliError> {
    Ok(integrate(cfg.seed_state(), &cfg.params()?, cfg.dt, cfg.steps())?)
}

pub fn simulate(cfg: &RunConfig, gnuplot: bool) -> Result<(), CliError> {
    let traj = trajectory(cfg)?;
    let path = cfg.output_dir.join("trajectory.csv");
    write_with(&path, |w| Ok(traj.write_csv(w)?))?;
    println!("wrote {} ({} samples)", path.display(), traj.len());
    if gnuplot {
        write_text(&cfg.output_dir.join("trajectory.gp"), &plots::trajectory("trajectory.csv"))?;
    }
    Ok(())
}

type Projection = fn(&SignaturePoint) -> [f64; 2];

pub fn signature(cfg: &RunConfig, gnuplot: bool, projections: bool) -> Result<(), CliError> {
    let p = cfg.params()?;
    let skip = cfg.transient_steps();
    let tail = trajectory(cfg)?.tail_from(skip);
    let mut curve = signature_curve(&tail, &p, cfg.method)?;
    // Index rows by trajectory sample, transient included.
    curve.indices.iter_mut().chain(curve.gaps.iter_mut()).for_each(|i| *i += skip);
    let name = method_name(cfg.method);
    let file = format!("signature_{name}.csv");
    let path = cfg.output_dir.join(&file);
    write_with(&path, |w| Ok(curve.write_csv(w)?))?;
    println!("wrote {} ({} points, {} gaps)", path.display(), curve.len(), curve.gaps.len());
    if projections {
        let planes: [(&str, [&str; 2], Projection); 3] = [
            ("kappa_kappas", ["kappa_tilde", "kappa_tilde_s"], |q| [q.kappa_tilde, q.kappa_tilde_s]),
            ("kappa_tau", ["kappa_tilde", "tau_tilde"], |q| [q.kappa_tilde, q.tau_tilde]),
            ("kappas_tau", ["kappa_tilde_s", "tau_tilde"], |q| [q.kappa_tilde_s, q.tau_tilde]),
        ];
        for (suffix, header, pick) in planes {
            let path = cfg.output_dir.join(format!("signature_{name}_{suffix}.csv"));
            write_with(&path, |w| {
                writeln!(w, "{},{}", header[0], header[1])?;
                for q in &curve.points {
                    let [a, b] = pick(q);
                    writeln!(w, "{a:e},{b:e}")?;
                }
                Ok(())
            })?;
        }
    }
    if gnuplot {
        write_text(&cfg.output_dir.join(format!("signature_{name}.gp")), &plots::signature(&file))?;
    }
    Ok(())
}

pub fn segment(cfg: &RunConfig, gnuplot: bool) -> Result<(), CliError> {
    let p = cfg.params()?;
    let run = LongRun {
        seed: cfg.seed_state(),
        transient: cfg.transient,
        duration: cfg.sim_time - cfg.transient,
        method: cfg.method,
        ..LongRun::default()
    };
    let out = segment_long_run(&p, &run, &cfg.window()?, &cfg.section()?)?;
    let filtered = filter_z_direction(&out.result, &p);
    let arcs = quasi_orbits(&filtered, &out.crossings, cfg.gap_tol);

    let seg_path = cfg.output_dir.join("segmentation.csv");
    write_with(&seg_path, |w| Ok(write_segmentation_csv(&filtered, &p, w)?))?;
    let arc_path = cfg.output_dir.join("quasi_orbits.csv");
    write_with(&arc_path, |w| Ok(write_quasi_orbits_csv(&arcs, w)?))?;
    println!(
        "wrote {} ({} points, {} kept) and {} ({} arcs)",
        seg_path.display(),
        filtered.points.len(),
        filtered.filtered_points.len(),
        arc_path.display(),
        arcs.len()
    );
    for a in &arcs {
        println!(
            "  {:<10} gap {:.6}  start ({:.4}, {:.4}, {:.4})  t {:.3}",
            a.word_string(),
            a.gap,
            a.start_state.x,
            a.start_state.y,
            a.start_state.z,
            a.start_t
        );
    }
    if gnuplot {
        write_text(&cfg.output_dir.join("segmentation.gp"), &plots::segmentation("segmentation.csv"))?;
    }
    Ok(())
}

fn orbit_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.output_dir.join("orbits");
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

/// Closes the census and writes `census.csv`, one JSON record and one path
/// CSV per orbit. Sequences that fail to close are reported and turn the
/// result into a numerical failure after everything else is written.
fn close_and_write(
    cfg: &RunConfig,
    gnuplot: bool,
) -> Result<(Vec<PeriodicOrbit>, Option<CliError>), CliError> {
    let p = cfg.params()?;
    let closure = cfg.closure()?;
    let census_cfg = CensusConfig {
        p_max: cfg.p_max,
        closure,
        seed_state: cfg.seed_state(),
        transient: cfg.transient,
        crossings: cfg.seed_crossings,
    };
    let census = run_census(&p, &census_cfg, &[])?;
    let path = cfg.output_dir.join("census.csv");
    write_with(&path, |w| Ok(write_census_csv(&census.orbits, w)?))?;
    println!("wrote {} ({} orbits)", path.display(), census.orbits.len());

    let dir = orbit_dir(cfg)?;
    let paths = orbitforge::par::map(&census.orbits, |o| orbit_samples(o, &p, &closure));
    let mut names = Vec::new();
    for (o, samples) in census.orbits.iter().zip(paths) {
        let name = o.sequence.to_string();
        write_text(&dir.join(format!("{name}.json")), &OrbitRecord::new(o, None).to_json()?)?;
        let traj = Trajectory::new(0.0, closure.dt, samples?)?;
        write_with(&dir.join(format!("{name}.csv")), |w| Ok(traj.write_csv(w)?))?;
        println!("  p={} T={:.5} {}", o.p(), o.period, name);
        names.push(name);
    }
    if gnuplot {
        write_text(&cfg.output_dir.join("orbits.gp"), &plots::orbits(&names))?;
    }
    let failure = if census.failures.is_empty() {
        None
    } else {
        for (seq, e) in &census.failures {
            eprintln!("  {seq}: {e}");
        }
        Some(CliError::Numerical(format!(
            "{} of {} sequences did not close",
            census.failures.len(),
            census.failures.len() + census.orbits.len()
        )))
    };
    Ok((census.orbits, failure))
}

pub fn find_orbits(cfg: &RunConfig, gnuplot: bool) -> Result<Vec<PeriodicOrbit>, CliError> {
    let (orbits, failure) = close_and_write(cfg, gnuplot)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(orbits),
    }
}

fn report(name: &str, v: &Verdict) {
    let width = v.k_width_max.map_or_else(|| "-".to_string(), |w| format!("{w:.3e}"));
    println!(
        "  {name:<10} {:?} radius {:e} K width {width} retries {}{}",
        v.status,
        v.radius,
        v.retries,
        v.detail.as_deref().map(|d| format!(" ({d})")).unwrap_or_default()
    );
}

pub fn verify(cfg: &RunConfig, files: &[PathBuf]) -> Result<(), CliError> {
    let p = cfg.params()?;
    let mut records = Vec::new();
    for f in files {
        let text = std::fs::read_to_string(f).map_err(|e| CliError::Io(format!("{}: {e}", f.display())))?;
        let rec = OrbitRecord::from_json(&text).map_err(|e| CliError::Io(format!("{}: {e}", f.display())))?;
        records.push((f, rec.to_orbit()?, rec));
    }
    let orbits: Vec<PeriodicOrbit> = records.iter().map(|(_, o, _)| o.clone()).collect();
    let verdicts = verify_census(&orbits, cfg.krawczyk_radius, &p, &cfg.verify()?);
    for ((f, _, mut rec), v) in records.into_iter().zip(verdicts) {
        let name = f.file_name().map(PathBuf::from).unwrap_or_else(|| PathBuf::from("orbit.json"));
        let out = cfg.output_dir.join(name);
        report(&rec.sequence.to_string(), &v);
        rec.verified = Some(v);
        write_text(&out, &rec.to_json()?)?;
    }
    Ok(())
}

pub fn census(cfg: &RunConfig, gnuplot: bool) -> Result<(), CliError> {
    let (orbits, failure) = close_and_write(cfg, gnuplot)?;
    let p = cfg.params()?;
    let verdicts = verify_census(&orbits, cfg.krawczyk_radius, &p, &cfg.verify()?);
    let dir = orbit_dir(cfg)?;
    let path = cfg.output_dir.join("verification.csv");
    write_with(&path, |w| {
        writeln!(w, "s,status,radius,K_width_max,retries")?;
        for (o, v) in orbits.iter().zip(&verdicts) {
            let width = v.k_width_max.map(|x| format!("{x:e}")).unwrap_or_default();
            writeln!(w, "{},{:?},{:e},{width},{}", o.sequence, v.status, v.radius, v.retries)?;
        }
        Ok(())
    })?;
    let proved = verdicts.iter().filter(|v| v.status == Status::Existence).count();
    for (o, v) in orbits.iter().zip(verdicts) {
        let name = o.sequence.to_string();
        report(&name, &v);
        write_text(&dir.join(format!("{name}.json")), &OrbitRecord::new(o, Some(v)).to_json()?)?;
    }
    println!("wrote {} ({proved} of {} proved)", path.display(), orbits.len());
    failure.map_or(Ok(()), Err)
}
