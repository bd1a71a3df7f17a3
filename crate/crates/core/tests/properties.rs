//! Cross-module properties on the public API.

use std::sync::OnceLock;

use approx::assert_relative_eq;
use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use orbitforge::census::{run_census, CensusConfig};
use orbitforge::closure::PeriodicOrbit;
use orbitforge::integrate::integrate;
use orbitforge::lorenz::{fixed_points, symmetry};
use orbitforge::signature::{apply_similarity, signature_curve, Method, SignatureCurve, TransformedField};
use orbitforge::symbolic::{canonicalize, crossings, enumerate_candidates, mirror, SectionConfig, Symbol};
use orbitforge::verify::{verify_orbit, Status, VerifyConfig};
use orbitforge::{LorenzParams, State3, Trajectory, VectorField};
use proptest::prelude::*;

fn lorenz() -> LorenzParams {
    LorenzParams::default()
}

fn short_census() -> &'static [PeriodicOrbit] {
    static ORBITS: OnceLock<Vec<PeriodicOrbit>> = OnceLock::new();
    ORBITS.get_or_init(|| {
        let cfg = CensusConfig { p_max: 5, ..CensusConfig::default() };
        let census = run_census(&lorenz(), &cfg, &[]).unwrap();
        assert!(census.failures.is_empty());
        census.orbits
    })
}

fn orbit(word: &str) -> &'static PeriodicOrbit {
    short_census().iter().find(|o| o.sequence.to_string() == word).unwrap()
}

/// One period of `o` sampled uniformly, starting on the section.
fn one_period(o: &PeriodicOrbit, target_dt: f64) -> Trajectory {
    let cfg = SectionConfig::default();
    let start = o.section_states(&cfg)[0];
    let n = (o.period / target_dt).round() as usize;
    integrate(start, &lorenz(), o.period / n as f64, n).unwrap()
}

fn state() -> impl Strategy<Value = State3> {
    (-30.0..30.0f64, -40.0..40.0f64, 0.0..60.0f64).prop_map(|(x, y, z)| State3::new(x, y, z))
}

fn word() -> impl Strategy<Value = Vec<Symbol>> {
    prop::collection::vec(prop_oneof![Just(Symbol::L), Just(Symbol::R)], 1..12)
}

proptest! {
    #[test]
    fn jacobian_matches_central_differences(s in state()) {
        let p = lorenz();
        let j = p.jacobian(s);
        let h = 1e-6;
        for k in 0..3 {
            let mut e = [0.0; 3];
            e[k] = h;
            let e = State3::from(e);
            let col = (p.eval(s + e) - p.eval(s - e)) / (2.0 * h);
            for (i, c) in col.to_array().into_iter().enumerate() {
                prop_assert!((j[(i, k)] - c).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn field_is_equivariant(s in state()) {
        let p = lorenz();
        prop_assert_eq!(p.eval(symmetry(s)), symmetry(p.eval(s)));
    }

    #[test]
    fn canonical_form_is_rotation_invariant(w in word(), k in 0usize..12) {
        let c = canonicalize(&w).unwrap();
        let k = k % w.len();
        let rotated: Vec<Symbol> = w[k..].iter().chain(&w[..k]).copied().collect();
        prop_assert_eq!(&canonicalize(&rotated).unwrap(), &c);
        prop_assert_eq!(&canonicalize(c.word()).unwrap(), &c);
    }

    #[test]
    fn mirror_is_an_involution(w in word()) {
        let c = canonicalize(&w).unwrap();
        prop_assert_eq!(mirror(&mirror(&c)), c);
    }
}

#[test]
fn fixed_points_are_exact_zeros() {
    let p = lorenz();
    for f in fixed_points(&p) {
        assert!(p.eval(f.location).max_abs() < 1e-12);
    }
}

#[test]
fn candidate_counts_per_period() {
    let all = enumerate_candidates(8).unwrap();
    let counts: Vec<usize> = (2..=8).map(|n| all.iter().filter(|s| s.period() == n).count()).collect();
    assert_eq!(counts, [1, 1, 2, 3, 5, 9, 16]);
}

#[test]
fn attractor_stays_in_its_box_and_runs_reproduce() {
    let p = lorenz();
    let warm = integrate(State3::new(1.0, 1.0, 1.0), &p, 5e-4, 20_000).unwrap().last();
    let a = integrate(warm, &p, 5e-4, 200_000).unwrap();
    let b = integrate(warm, &p, 5e-4, 200_000).unwrap();
    assert_eq!(a.samples, b.samples);
    for s in &a.samples {
        assert!(s.x.abs() <= 25.0 && s.y.abs() <= 35.0 && (0.0..=55.0).contains(&s.z), "{s:?}");
    }
}

fn rotation(axis: [f64; 3], angle: f64) -> Matrix3<f64> {
    UnitQuaternion::from_scaled_axis(Vector3::from(axis).normalize() * angle)
        .to_rotation_matrix()
        .into_inner()
}

fn arc() -> Trajectory {
    let p = lorenz();
    let warm = integrate(State3::new(1.0, 1.0, 1.0), &p, 5e-4, 20_000).unwrap().last();
    integrate(warm, &p, 5e-4, 2_000).unwrap()
}

#[test]
fn euclidean_motion_keeps_signature_and_scaling_keeps_arc_length() {
    let p = lorenz();
    let traj = arc();
    let base = signature_curve(&traj, &p, Method::Analytic).unwrap();
    for (scale, rot, shift) in [
        (1.0, rotation([1.0, 2.0, -0.5], 2.1), State3::new(3.0, -7.0, 11.0)),
        (1.0, rotation([0.0, 0.0, 1.0], -0.4), State3::ZERO),
        (6.5, Matrix3::identity(), State3::ZERO),
        (0.2, rotation([-1.0, 1.0, 1.0], 0.9), State3::new(-20.0, 0.0, 5.0)),
    ] {
        let field = TransformedField { inner: &p, scale, rotation: rot, translation: shift };
        let moved = apply_similarity(&traj, scale, &rot, shift).unwrap();
        let c = signature_curve(&moved, &field, Method::Analytic).unwrap();
        assert_eq!(c.indices, base.indices);
        for (a, b) in base.points.iter().zip(&c.points) {
            assert_relative_eq!(a.s_tilde, b.s_tilde, max_relative = 1e-9, epsilon = 1e-12);
            assert_relative_eq!(a.kappa_tilde, b.kappa_tilde, max_relative = 1e-9, epsilon = 1e-12);
            assert_relative_eq!(a.tau_tilde, b.tau_tilde, max_relative = 1e-9, epsilon = 1e-12);
        }
    }
}

/// Signature curve resampled at `n` equally spaced values of s̃.
fn resample(c: &SignatureCurve, n: usize) -> Vec<[f64; 3]> {
    let total = c.points.last().unwrap().s_tilde;
    let mut k = 0;
    (0..n)
        .map(|i| {
            let s = total * i as f64 / (n - 1) as f64;
            while k + 2 < c.points.len() && c.points[k + 1].s_tilde < s {
                k += 1;
            }
            let (a, b) = (&c.points[k], &c.points[k + 1]);
            let w = ((s - a.s_tilde) / (b.s_tilde - a.s_tilde)).clamp(0.0, 1.0);
            let (u, v) = (a.coords(), b.coords());
            [0, 1, 2].map(|j| u[j] + w * (v[j] - u[j]))
        })
        .collect()
}

fn hausdorff(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    let d = |p: &[f64; 3], q: &[f64; 3]| (0..3).map(|j| (p[j] - q[j]).powi(2)).sum::<f64>().sqrt();
    let one_sided = |a: &[[f64; 3]], b: &[[f64; 3]]| {
        a.iter().map(|p| b.iter().map(|q| d(p, q)).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
    };
    one_sided(a, b).max(one_sided(b, a))
}

#[test]
fn lr_and_llr_signatures_are_distinct() {
    let p = lorenz();
    let n = 2_000;
    let curve = |o: &PeriodicOrbit, dt: f64| {
        resample(&signature_curve(&one_period(o, dt), &p, Method::Analytic).unwrap(), n)
    };
    let lr = curve(orbit("LR"), 5e-4);
    let llr = curve(orbit("LLR"), 5e-4);
    let noise = hausdorff(&lr, &curve(orbit("LR"), 2.5e-4));
    let gap = hausdorff(&lr, &llr);
    assert!(gap > 10.0 * noise, "distance {gap:e} against noise floor {noise:e}");
}

#[test]
fn closed_orbits_cross_the_section_p_times_per_period() {
    let section = SectionConfig::default();
    for o in short_census() {
        // Start just past the section so the start point is not a crossing.
        let traj = one_period(o, 5e-4);
        let shifted = integrate(traj.samples[10], &lorenz(), traj.dt, traj.len() - 1).unwrap();
        let cs = crossings(&shifted, &lorenz(), &section).unwrap();
        assert_eq!(cs.len(), o.p(), "{}", o.sequence);
        let word: Vec<Symbol> = cs.iter().map(|c| c.label).collect();
        assert_eq!(canonicalize(&word).unwrap(), o.sequence);
    }
}

#[test]
fn lorenz_verdict_does_not_flip_to_no_orbit_when_halved() {
    let p = lorenz();
    let cfg = VerifyConfig::default();
    let lr = orbit("LR");
    let v = verify_orbit(lr, 1e-6, &p, &cfg);
    assert_eq!(v.status, Status::Existence);
    let half = verify_orbit(lr, 5e-7, &p, &cfg);
    assert_ne!(half.status, Status::NoOrbit);
}
