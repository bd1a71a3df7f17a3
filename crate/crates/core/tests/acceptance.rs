//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs without the libtest harness so every line is shown.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, Matrix3, UnitQuaternion, Vector3};
use orbitforge::census::{run_census, CensusConfig};
use orbitforge::closure::{
    close_mirror, closure_defect, orbit_samples, symmetric_defect, PeriodicOrbit, ShootingState,
};
use orbitforge::integrate::integrate;
use orbitforge::interval::{Directed, Interval, IntervalMatrix, IntervalVector, NudgeUlp, Rounding};
use orbitforge::lorenz::{derivatives3, fixed_points, FixedPointKind};
use orbitforge::segment::{filter_z_direction, quasi_orbits, segment_long_run, LongRun, WindowConfig};
use orbitforge::signature::{
    analytic_euclidean, apply_similarity, signature_curve, Method, SignatureCurve, TransformedField,
};
use orbitforge::symbolic::{mirror, SectionConfig, Symbol};
use orbitforge::verify::{krawczyk, krawczyk_operator, verify_orbit, Status, VerifyConfig};
use orbitforge::{LorenzParams, State3, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Published short periodic orbits: sequence and flow time.
const TABLE: [(&str, f64); 37] = [
    ("LR", 1.55865),
    ("LLR", 2.30591),
    ("LLLR", 3.02358),
    ("LLRR", 3.08428),
    ("LLLLR", 3.72564),
    ("LLLRR", 3.82025),
    ("LLRLR", 3.86953),
    ("LLLLLR", 4.41776),
    ("LLLLRR", 4.53410),
    ("LLLRRR", 4.56631),
    ("LLLRLR", 4.59381),
    ("LLRLRR", 4.63714),
    ("LLLLLLR", 5.10303),
    ("LLLLLRR", 5.23419),
    ("LLLLRRR", 5.28634),
    ("LLLLRLR", 5.30120),
    ("LLLRLLR", 5.33091),
    ("LLLRLRR", 5.36988),
    ("LLLRRLR", 5.37052),
    ("LLRLLRR", 5.39421),
    ("LLRLRLR", 5.42912),
    ("LLLLLLLR", 5.78341),
    ("LLLLLLRR", 5.92499),
    ("LLLLLRRR", 5.99044),
    ("LLLLLRLR", 5.99732),
    ("LLLLRRRR", 6.01003),
    ("LLLLRLLR", 6.03523),
    ("LLLLRLRR", 6.08235),
    ("LLLLRRLR", 6.08382),
    ("LLLRLRRR", 6.10805),
    ("LLLRLLRR", 6.12145),
    ("LLLRRLLR", 6.12233),
    ("LLLRRLRR", 6.13512),
    ("LLLRLRLR", 6.15472),
    ("LLRLLRLR", 6.17587),
    ("LLRLRRLR", 6.18751),
    ("LLRLRLRR", 6.19460),
];

/// Published LR segmentation point.
const LR_POINT: State3 = State3::new(-9.7279, -16.3990, 17.2922);

type Outcome = Result<String, String>;
type Criterion<'a> = Box<dyn Fn() -> Outcome + 'a>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Looks a census orbit up by a word in either mirror orientation.
fn lookup<'a>(orbits: &'a [PeriodicOrbit], word: &str) -> Option<&'a PeriodicOrbit> {
    orbits.iter().find(|o| {
        let s = o.sequence.to_string();
        s == word || mirror(&o.sequence).to_string() == word
    })
}

fn c1_spectrum() -> Outcome {
    let reports = fixed_points(&LorenzParams::default());
    let close = |a: f64, b: f64| (a - b).abs() <= 0.005;
    let origin = reports.iter().find(|r| r.classification == FixedPointKind::Origin).unwrap();
    let ev: Vec<f64> = origin.eigenvalues.iter().map(|e| e.re).collect();
    let origin_ok = origin.eigenvalues.iter().all(|e| e.im == 0.0)
        && ev.len() == 3
        && close(ev[0], 11.83)
        && close(ev[1], -2.67)
        && close(ev[2], -22.83);
    let mut wing_ok = true;
    let mut wing_desc = String::new();
    for w in reports.iter().filter(|r| r.classification == FixedPointKind::Wing) {
        let e = &w.eigenvalues;
        wing_ok &= e.len() == 3
            && close(e[0].re, 0.094)
            && close(e[0].im.abs(), 10.19)
            && close(e[1].re, 0.094)
            && close(e[1].im, -e[0].im)
            && close(e[2].re, -13.85)
            && e[2].im == 0.0;
        wing_desc = format!("{}, {}, {}", e[0], e[1], e[2]);
    }
    check(
        origin_ok && wing_ok,
        format!("origin ({:.4}, {:.4}, {:.4}); wings ({wing_desc})", ev[0], ev[1], ev[2]),
    )
}

fn c2_short_periods(orbits: &[PeriodicOrbit]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut missing = Vec::new();
    for &(word, t) in TABLE.iter().filter(|(w, _)| w.len() <= 5) {
        match lookup(orbits, word) {
            Some(o) => worst = worst.max((o.period - t).abs()),
            None => missing.push(word),
        }
    }
    check(
        missing.is_empty() && worst <= 1e-3,
        format!("7 orbits, max |dT| = {worst:.2e}, missing {missing:?}"),
    )
}

fn c3_census(orbits: &[PeriodicOrbit], failures: usize) -> Outcome {
    let mut found: Vec<String> = orbits
        .iter()
        .map(|o| {
            let s = o.sequence.to_string();
            let m = mirror(&o.sequence).to_string();
            // Reference rows list the representative with more L than R.
            let l = |w: &str| w.chars().filter(|&c| c == 'L').count();
            if l(&m) > l(&s) {
                m
            } else {
                s
            }
        })
        .collect();
    found.sort();
    found.dedup();
    let mut expected: Vec<String> = TABLE.iter().map(|(w, _)| w.to_string()).collect();
    expected.sort();
    let mut worst: f64 = 0.0;
    for &(word, t) in &TABLE {
        if let Some(o) = lookup(orbits, word) {
            worst = worst.max((o.period - t).abs());
        }
    }
    check(
        failures == 0 && orbits.len() == 37 && found == expected && worst <= 5e-3,
        format!(
            "{} orbits, {failures} failures, symbol list matches: {}, max |dT| = {worst:.2e}",
            orbits.len(),
            found == expected
        ),
    )
}

fn c4_segmentation() -> Outcome {
    let p = LorenzParams::default();
    let run = LongRun { duration: 20_000.0, ..LongRun::default() };
    let out = segment_long_run(&p, &run, &WindowConfig::default(), &SectionConfig::default())
        .map_err(|e| e.to_string())?;
    let filtered = filter_z_direction(&out.result, &p);
    let arcs = quasi_orbits(&filtered, &out.crossings, 0.005);
    let short: Vec<_> = arcs.iter().filter(|a| a.crossings <= 5).collect();
    let max_gap = short.iter().map(|a| a.gap).fold(0.0, f64::max);
    let lr: Vec<f64> = short
        .iter()
        .filter(|a| a.word.len() == 2 && a.word.contains(&Symbol::L) && a.word.contains(&Symbol::R))
        .map(|a| a.start_state.dist(LR_POINT))
        .collect();
    let nearest = lr.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut words: Vec<String> = short.iter().map(|a| a.word_string()).collect();
    words.sort();
    words.dedup();
    check(
        !short.is_empty() && max_gap <= 0.005 && nearest <= 0.5,
        format!(
            "{} arcs with p <= 5 ({}), max gap {max_gap:.5}, LR distances {:?}",
            short.len(),
            words.join(" "),
            lr.iter().map(|d| format!("{d:.3}")).collect::<Vec<_>>()
        ),
    )
}

fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    let axis =
        Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let angle = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    UnitQuaternion::from_scaled_axis(axis.normalize() * angle).to_rotation_matrix().into_inner()
}

/// Largest relative difference between matching coordinates of two curves.
fn curve_deviation(a: &SignatureCurve, b: &SignatureCurve) -> f64 {
    if a.indices != b.indices {
        return f64::INFINITY;
    }
    a.points
        .iter()
        .zip(&b.points)
        .flat_map(|(x, y)| {
            x.coords().into_iter().zip(y.coords()).map(|(u, v)| (u - v).abs() / u.abs().max(1.0))
        })
        .fold(0.0, f64::max)
}

fn c5_invariance() -> Outcome {
    let p = LorenzParams::default();
    let warm = integrate(State3::new(1.0, 1.0, 1.0), &p, 5e-4, 20_000).map_err(|e| e.to_string())?;
    let traj = integrate(warm.last(), &p, 5e-4, 2_000).map_err(|e| e.to_string())?;
    let base_a = signature_curve(&traj, &p, Method::Analytic).map_err(|e| e.to_string())?;
    let base_d = signature_curve(&traj, &p, Method::Discrete).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst_a, mut worst_d): (f64, f64) = (0.0, 0.0);
    for _ in 0..20 {
        let scale = rng.random_range(0.1..10.0);
        let rotation = random_rotation(&mut rng);
        let translation = State3::new(
            rng.random_range(-50.0..50.0),
            rng.random_range(-50.0..50.0),
            rng.random_range(-50.0..50.0),
        );
        let field = TransformedField { inner: &p, scale, rotation, translation };
        let moved = apply_similarity(&traj, scale, &rotation, translation).map_err(|e| e.to_string())?;
        let a = signature_curve(&moved, &field, Method::Analytic).map_err(|e| e.to_string())?;
        let d = signature_curve(&moved, &field, Method::Discrete).map_err(|e| e.to_string())?;
        worst_a = worst_a.max(curve_deviation(&base_a, &a));
        worst_d = worst_d.max(curve_deviation(&base_d, &d));
    }
    // Euclidean invariants scale as κ/λ, κₛ/λ², τ/λ.
    let mut worst_e: f64 = 0.0;
    for &i in &[100usize, 700, 1500] {
        let [d1, d2, d3] = derivatives3(traj.samples[i], &p);
        let e = analytic_euclidean(d1, d2, d3).map_err(|e| e.to_string())?;
        for lambda in [0.25, 3.0, 17.0] {
            let s = analytic_euclidean(d1 * lambda, d2 * lambda, d3 * lambda).map_err(|e| e.to_string())?;
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
            worst_e = worst_e
                .max(rel(s.kappa, e.kappa / lambda))
                .max(rel(s.kappa_s, e.kappa_s / (lambda * lambda)))
                .max(rel(s.tau, e.tau / lambda));
        }
    }
    check(
        worst_a <= 1e-9 && worst_d <= 1e-3 && worst_e <= 1e-9,
        format!("analytic {worst_a:.2e}, discrete {worst_d:.2e}, Euclidean scaling {worst_e:.2e}"),
    )
}

fn c6_convergence() -> Outcome {
    let p = LorenzParams::default();
    let start = integrate(State3::new(1.0, 1.0, 1.0), &p, 5e-4, 20_000).map_err(|e| e.to_string())?.last();
    let arc = 1.0;
    let mut errors = Vec::new();
    for dt in [2e-3, 1e-3, 5e-4] {
        let traj: Trajectory =
            integrate(start, &p, dt, (arc / dt).round() as usize).map_err(|e| e.to_string())?;
        let a = signature_curve(&traj, &p, Method::Analytic).map_err(|e| e.to_string())?;
        let d = signature_curve(&traj, &p, Method::Discrete).map_err(|e| e.to_string())?;
        let mut worst: f64 = 0.0;
        for (k, &idx) in d.indices.iter().enumerate() {
            if let Some(j) = a.position_of(idx) {
                worst = worst.max((d.points[k].kappa_tilde - a.points[j].kappa_tilde).abs());
            }
        }
        errors.push(worst);
    }
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    check(
        orders.iter().all(|&o| o >= 1.0),
        format!(
            "max |dk| {:?}, observed orders {:?}",
            errors.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>(),
            orders.iter().map(|o| format!("{o:.2}")).collect::<Vec<_>>()
        ),
    )
}

fn c7_krawczyk(orbits: &[PeriodicOrbit]) -> Outcome {
    // F(x) = x² − 2 on [1.3, 1.5] around 1.4 with M = 1/2.8.
    let x = Interval::new(1.3, 1.5).unwrap();
    let fc = Interval::point(1.4).sqr() - 2.0;
    let jac = IntervalMatrix::from_fn(1, 1, |_, _| x * 2.0);
    let m = DMatrix::from_element(1, 1, 1.0 / 2.8);
    let v =
        krawczyk_operator(&[1.4], &IntervalVector::new(vec![x]), &IntervalVector::new(vec![fc]), &jac, &m);
    let k = v.k_box[0];
    let (lo, hi) = (1.4 + 0.04 / 2.8 - 0.02 / 2.8, 1.4 + 0.04 / 2.8 + 0.02 / 2.8);
    let scalar_ok = v.status == Status::Existence
        && k.contains(lo)
        && k.contains(hi)
        && (k.lo() - lo).abs() < 1e-12
        && (k.hi() - hi).abs() < 1e-12;

    let p = LorenzParams::default();
    let cfg = VerifyConfig::default();
    let lr = lookup(orbits, "LR").ok_or("LR missing from census")?;
    let verdict = verify_orbit(lr, 1e-6, &p, &cfg);
    let lr_ok = verdict.status == Status::Existence;

    let mut displaced_ok = true;
    let mut displaced = Vec::new();
    let mut shifted = lr.shooting.clone();
    shifted.points.iter_mut().for_each(|pt| pt[0] += 0.05);
    let far = ShootingState::new(vec![[50.0, 50.0]], vec![0.8]).map_err(|e| e.to_string())?;
    for (name, s, r) in [("shifted LR", &shifted, 1e-3), ("(50, 50)", &far, 1e-3)] {
        let outcome = krawczyk(s, r, &p, &cfg);
        displaced_ok &= !matches!(&outcome, Ok(v) if v.status == Status::Existence);
        displaced.push(match outcome {
            Ok(v) => format!("{name}: {:?}", v.status),
            Err(e) => format!("{name}: {e}"),
        });
    }
    check(
        scalar_ok && lr_ok && displaced_ok,
        format!(
            "scalar K = [{:.7}, {:.7}] {:?}; LR {:?} at radius {:e} (K width {:?}); {}",
            k.lo(),
            k.hi(),
            v.status,
            verdict.status,
            verdict.radius,
            verdict.k_width_max,
            displaced.join(", ")
        ),
    )
}

fn c8_symmetry(orbits: &[PeriodicOrbit], cfg: &CensusConfig) -> Outcome {
    let p = LorenzParams::default();
    let mirrors = orbitforge::par::map(orbits, |o| close_mirror(o, &p, &cfg.closure));
    let mut worst_t: f64 = 0.0;
    let mut errors = Vec::new();
    for (o, m) in orbits.iter().zip(mirrors) {
        match m {
            Ok(m) if m.sequence == mirror(&o.sequence) => worst_t = worst_t.max((m.period - o.period).abs()),
            Ok(m) => errors.push(format!("{} mirrored to {}", o.sequence, m.sequence)),
            Err(e) => errors.push(format!("{}: {e}", o.sequence)),
        }
    }
    let mut worst_s: f64 = 0.0;
    let mut symmetric = 0;
    for o in orbits.iter().filter(|o| o.sequence.is_self_symmetric()) {
        let samples = orbit_samples(o, &p, &cfg.closure).map_err(|e| e.to_string())?;
        worst_s = worst_s.max(symmetric_defect(&samples, &samples));
        symmetric += 1;
    }
    check(
        errors.is_empty() && worst_t <= 1e-6 && worst_s <= 1e-6,
        format!(
            "max |T - T_mirror| = {worst_t:.2e}; {symmetric} self-symmetric orbits, max defect {worst_s:.2e}{}",
            if errors.is_empty() { String::new() } else { format!("; {}", errors.join(", ")) }
        ),
    )
}

fn c9_closure(orbits: &[PeriodicOrbit], cfg: &CensusConfig) -> Outcome {
    let p = LorenzParams::default();
    let defects = orbitforge::par::map(orbits, |o| closure_defect(o, &p, &cfg.closure));
    let mut worst: f64 = 0.0;
    let mut worst_name = String::new();
    for (o, d) in orbits.iter().zip(defects) {
        let d = d.map_err(|e| format!("{}: {e}", o.sequence))?;
        if d > worst {
            worst = d;
            worst_name = o.sequence.to_string();
        }
    }
    check(worst <= 1e-7, format!("max defect {worst:.2e} ({worst_name}) over {} orbits", orbits.len()))
}

/// Random expression tree over point leaves, evaluated both in floating
/// point and in interval arithmetic with the same operation order.
#[derive(Debug)]
enum Expr {
    Leaf(f64),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Sqr(Box<Expr>),
    Sqrt(Box<Expr>),
}

fn random_expr(rng: &mut ChaCha8Rng, depth: usize) -> Expr {
    if depth == 0 || rng.random_bool(0.25) {
        return Expr::Leaf(rng.random_range(-4.0..4.0));
    }
    let op = rng.random_range(0..6);
    let mut sub = || Box::new(random_expr(rng, depth - 1));
    match op {
        0 => Expr::Add(sub(), sub()),
        1 => Expr::Sub(sub(), sub()),
        2 => Expr::Mul(sub(), sub()),
        3 => Expr::Div(sub(), sub()),
        4 => Expr::Sqr(sub()),
        _ => Expr::Sqrt(sub()),
    }
}

impl Expr {
    fn float(&self) -> Option<f64> {
        Some(match self {
            Expr::Leaf(v) => *v,
            Expr::Add(a, b) => a.float()? + b.float()?,
            Expr::Sub(a, b) => a.float()? - b.float()?,
            Expr::Mul(a, b) => a.float()? * b.float()?,
            Expr::Div(a, b) => a.float()? / b.float()?,
            Expr::Sqr(a) => a.float()?.powi(2),
            Expr::Sqrt(a) => a.float()?.abs().sqrt(),
        })
    }

    /// Leaves are widened by `pad`, so evaluations with growing `pad` are
    /// over nested boxes.
    fn interval<R: Rounding>(&self, pad: f64) -> Option<Interval> {
        Some(match self {
            Expr::Leaf(v) if pad == 0.0 => Interval::point(*v),
            Expr::Leaf(v) => Interval::centered(*v, pad),
            Expr::Add(a, b) => a.interval::<R>(pad)?.add_with::<R>(b.interval::<R>(pad)?),
            Expr::Sub(a, b) => a.interval::<R>(pad)?.sub_with::<R>(b.interval::<R>(pad)?),
            Expr::Mul(a, b) => a.interval::<R>(pad)?.mul_with::<R>(b.interval::<R>(pad)?),
            Expr::Div(a, b) => a.interval::<R>(pad)?.div_with::<R>(b.interval::<R>(pad)?).ok()?,
            Expr::Sqr(a) => a.interval::<R>(pad)?.sqr_with::<R>(),
            Expr::Sqrt(a) => a.interval::<R>(pad)?.abs().sqrt_with::<R>().ok()?,
        })
    }
}

/// Returns (containment cases checked, isotonicity cases checked, failures).
fn fuzz<R: Rounding>(seed: u64) -> (usize, usize, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut contained, mut nested, mut failures) = (0, 0, Vec::new());
    while contained < 1000 {
        let e = random_expr(&mut rng, 5);
        let Some(v) = e.float().filter(|v| v.is_finite()) else { continue };
        let Some(point) = e.interval::<R>(0.0) else { continue };
        contained += 1;
        if !point.contains(v) {
            failures.push(format!("{v} not in {point} for {e:?}"));
        }
        let small = e.interval::<R>(1e-3);
        let large = e.interval::<R>(1e-2);
        if let (Some(s), Some(l)) = (small, large) {
            nested += 1;
            if !point.subset_of(&s) || !s.subset_of(&l) {
                failures.push(format!("{point} ⊄ {s} ⊄ {l} for {e:?}"));
            }
        }
    }
    (contained, nested, failures)
}

fn c10_intervals() -> Outcome {
    let (cn, nn, fn_) = fuzz::<NudgeUlp>(10);
    let (cd, nd, fd) = fuzz::<Directed>(10);
    let first = fn_.iter().chain(&fd).next().cloned().unwrap_or_default();
    check(
        fn_.is_empty() && fd.is_empty(),
        format!(
            "nudge-ulp: {cn} containment, {nn} nested; directed: {cd} containment, {nd} nested; {} failures {first}",
            fn_.len() + fd.len()
        ),
    )
}

fn main() -> ExitCode {
    let p = LorenzParams::default();
    let cfg = CensusConfig::default();
    let started = Instant::now();
    let census = run_census(&p, &cfg, &[]);
    let census_time = started.elapsed().as_secs_f64();
    let (orbits, failures) = match &census {
        Ok(c) => (c.orbits.clone(), c.failures.len()),
        Err(_) => (Vec::new(), usize::MAX),
    };

    let criteria: Vec<(&str, Criterion)> = vec![
        ("fixed-point spectrum", Box::new(c1_spectrum)),
        ("orbit flow times, p <= 5", Box::new(|| c2_short_periods(&orbits))),
        ("full census", Box::new(|| c3_census(&orbits, failures))),
        ("segmentation quality", Box::new(c4_segmentation)),
        ("similarity invariance", Box::new(c5_invariance)),
        ("discrete-vs-analytic convergence", Box::new(c6_convergence)),
        ("Krawczyk verification", Box::new(|| c7_krawczyk(&orbits))),
        ("symmetry", Box::new(|| c8_symmetry(&orbits, &cfg))),
        ("closure independence", Box::new(|| c9_closure(&orbits, &cfg))),
        ("interval soundness", Box::new(c10_intervals)),
    ];
    println!("census closed in {census_time:.1} s");
    let mut failed = 0;
    for (n, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = run();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS {:>2} {name}: {d} [{secs:.1} s]", n + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {d} [{secs:.1} s]", n + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
