use fastresp::oracles::{ensemble_response, fd_response, ulam_response, FdOptions, UlamOptions};
use fastresp::orbit::generate_orbit_with;
use fastresp::response::{linear_response_multi, ResponseOptions};
use fastresp::stats::batch_means;
use fastresp::{
    generate_orbit, linear_response, make_builtin, Engine, OrbitData, OrbitStart, RunSpec,
    ScalarField, SystemDef, TrigTerm, VectorField,
};
use std::collections::BTreeMap;

fn sawtooth(a: f64) -> SystemDef {
    let mut p = BTreeMap::new();
    p.insert("a".to_string(), a);
    make_builtin("sawtooth", &p).unwrap()
}

fn spec(n: usize, replicas: usize, w: usize, seed: u64) -> RunSpec {
    let mut s = RunSpec::new(n, seed);
    s.replicas = replicas;
    s.options.w = Some(w);
    s
}

/// The built-in sawtooth observable is even and the map odd, so its response
/// vanishes; an odd observable gives a genuinely nonzero triangle.
#[test]
fn sawtooth_odd_observable_triangle() {
    let sys = sawtooth(0.1).with_observable(ScalarField::new(vec![TrigTerm::sin(1.0, &[1.0])]));
    let fast = linear_response(&sys, &spec(200_000, 4, 16, 1))
        .unwrap()
        .total;
    let ulam = ulam_response(
        &sys,
        &UlamOptions {
            n_bins: 8192,
            ..Default::default()
        },
    )
    .unwrap()
    .value;
    let fd = fd_response(
        &sys,
        &FdOptions {
            delta: 0.01,
            n_steps: 400_000,
            pairs: 8,
            seed: 5,
            ..Default::default()
        },
    )
    .unwrap()
    .estimate;
    assert!(ulam.abs() > 0.1, "{ulam}");
    assert!(
        (fast.value - ulam).abs() <= 3.0 * fast.stderr + 5e-3,
        "fast {fast:?} ulam {ulam}"
    );
    assert!(
        (fd.value - ulam).abs() <= 3.0 * fd.stderr + 5e-3,
        "fd {fd:?} ulam {ulam}"
    );
}

#[test]
fn zero_perturbation_gives_zero() {
    let sys = make_builtin("solenoid", &BTreeMap::new())
        .unwrap()
        .with_perturbation(VectorField::zero(3));
    let r = linear_response(&sys, &spec(20_000, 2, 8, 3)).unwrap();
    assert_eq!(r.total.value, 0.0);
    assert_eq!(r.sc.value, 0.0);
}

#[test]
fn response_is_linear_in_the_perturbation() {
    let sys = make_builtin("catmap", &BTreeMap::new()).unwrap();
    let x = sys.perturbation().clone();
    let y = VectorField::new(vec![
        ScalarField::new(vec![TrigTerm::cos(0.3, &[0.0, 1.0])]),
        ScalarField::new(vec![TrigTerm::sin(0.7, &[1.0, 1.0])]),
    ]);
    let xy = x.combine(2.0, &y, -1.0);
    let reps = linear_response_multi(&sys, &spec(50_000, 1, 8, 4), &[x, y, xy]).unwrap();
    let want = 2.0 * reps[0].total.value - reps[1].total.value;
    assert!((reps[2].total.value - want).abs() < 1e-10);
    let want_sc = 2.0 * reps[0].sc.value - reps[1].sc.value;
    assert!((reps[2].sc.value - want_sc).abs() < 1e-10);
}

#[test]
fn multi_matches_single_runs() {
    let sys = make_builtin("solenoid", &BTreeMap::new()).unwrap();
    let s = spec(30_000, 2, 8, 9);
    let single = linear_response(&sys, &s).unwrap();
    let multi = linear_response_multi(
        &sys,
        &s,
        &[sys.perturbation().clone(), VectorField::zero(3)],
    )
    .unwrap();
    assert_eq!(single.total, multi[0].total);
    assert_eq!(single.w_sweep, multi[0].w_sweep);
    assert_eq!(multi[1].total.value, 0.0);
}

#[test]
fn plateau_selection_stays_in_range() {
    let sys = make_builtin("catmap", &BTreeMap::new()).unwrap();
    let mut s = RunSpec::new(50_000, 2);
    s.options.w_max = 20;
    let r = linear_response(&sys, &s).unwrap();
    assert_eq!(r.w_selected_by, "plateau");
    assert!(r.w <= 20);
    assert_eq!(r.w_sweep.len(), 21);
}

/// Early ensemble terms are still resolvable on the cat map and their sum
/// heads toward the fast answer before the variance explodes.
#[test]
fn ensemble_first_terms_track_fast_total() {
    let sys = make_builtin("catmap", &BTreeMap::new()).unwrap();
    let orbit = generate_orbit(&sys, OrbitStart::Seed(12), 1000, 400_000).unwrap();
    let ens = ensemble_response(&sys, &orbit, 10).unwrap();
    let fast = linear_response(&sys, &spec(400_000, 1, 16, 12))
        .unwrap()
        .total;
    let s = ens.partial_sums[9];
    let se = ens
        .terms
        .iter()
        .map(|t| t.stderr * t.stderr)
        .sum::<f64>()
        .sqrt();
    assert!(
        (s - fast.value).abs() <= 3.0 * (se + fast.stderr) + 0.05,
        "{s} ± {se} vs {fast:?}"
    );
    assert!(ens.rms[9] / ens.rms[8] > 2.0);
}

#[test]
fn orbit_round_trips_through_a_file() {
    let sys = sawtooth(0.05);
    let o = generate_orbit_with(&sys, &spec(1000, 1, 4, 7).orbit_spec(0)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("orbit.bin");
    o.write_to(std::fs::File::create(&path).unwrap()).unwrap();
    let back = OrbitData::read_from(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(o, back);
}

fn engine(sys: &SystemDef, n: usize, seed: u64) -> Engine {
    let orbit = generate_orbit(sys, OrbitStart::Seed(seed), 1000, n).unwrap();
    Engine::new(sys, orbit, ResponseOptions::default()).unwrap()
}

#[test]
fn sweep_matches_direct_products() {
    let e = engine(
        &make_builtin("catmap", &BTreeMap::new()).unwrap(),
        20_000,
        21,
    );
    let delta = e.density_ratio_series(e.system().perturbation());
    let sweep = e.uc_sweep(&delta, 12, true);
    for w in [0, 1, 5, 12] {
        let phi_w = e.phi_w(w, true);
        let prods: Vec<f64> = phi_w.iter().zip(&delta).map(|(p, d)| p * d).collect();
        let direct = batch_means(&prods);
        assert!((sweep[w].value - direct.value).abs() < 1e-9, "W={w}");
        assert!((sweep[w].stderr - direct.stderr).abs() < 1e-9, "W={w}");
    }
}

/// `ρ(δL^uσ/σ) = 0`, so the centering constant only adds a term that vanishes
/// with the sample size.
#[test]
fn centering_does_not_change_the_limit() {
    let phi = ScalarField::new(vec![
        TrigTerm::constant(1.5),
        TrigTerm::cos(1.0, &[1.0, 0.0]),
    ]);
    let sys = make_builtin("catmap", &BTreeMap::new())
        .unwrap()
        .with_observable(phi);
    let e = engine(&sys, 200_000, 22);
    assert!((e.phi_mean() - 1.5).abs() < 0.05);
    let delta = e.density_ratio_series(e.system().perturbation());
    let c = e.uc_sweep(&delta, 20, true)[20];
    let u = e.uc_sweep(&delta, 20, false)[20];
    assert!(
        (c.value - u.value).abs() <= 3.0 * c.combined_stderr(&u),
        "{c:?} {u:?}"
    );
}
