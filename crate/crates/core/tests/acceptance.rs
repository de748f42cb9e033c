//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if
//! any criterion fails. Runs without the libtest harness so the lines are
//! always shown.

use fastresp::divergence::{div_v_fstar, div_v_x};
use fastresp::frames::lyapunov_exponents;
use fastresp::oracles::{
    continuity_check, decay_check, expanded_divergence, fd_response, ulam_error_scaling,
    ulam_response, FdOptions, UlamOptions,
};
use fastresp::orbit::generate_orbit_with;
use fastresp::response::linear_response_multi;
use fastresp::shadowing::{forward_residual, forward_shadow, DEFAULT_MARGIN};
use fastresp::{
    generate_orbit, linear_response, make_builtin, Engine, Estimate, FrameOptions, OrbitStart,
    ResponseOptions, RunSpec, ScalarField, Series, SeriesLabel, SystemDef, TrigTerm, VectorField,
};
use std::collections::BTreeMap;
use std::time::{Duration, Instant};

type Outcome = Result<(bool, String), String>;

fn params(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
    kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn system(name: &str, kv: &[(&str, f64)]) -> SystemDef {
    make_builtin(name, &params(kv)).expect("built-in system")
}

fn builtins() -> Vec<SystemDef> {
    vec![
        system("sawtooth", &[("a", 0.1)]),
        system("catmap", &[]),
        system("solenoid", &[]),
        system("coupledcat", &[("k", 2.0), ("mu", 0.1)]),
    ]
}

fn engine(sys: &SystemDef, seed: u64, n: usize, opts: ResponseOptions) -> Engine {
    let orbit = generate_orbit(sys, OrbitStart::Seed(seed), 1000, n).expect("orbit");
    Engine::new(sys, orbit, opts).expect("engine")
}

fn run_spec(n: usize, replicas: usize, w: usize, seed: u64) -> RunSpec {
    let mut spec = RunSpec::new(n, seed);
    spec.replicas = replicas;
    spec.options.w = Some(w);
    spec
}

/// A second smooth field per system, to test more than the built-in `X`.
fn extra_field(m: usize) -> VectorField {
    VectorField::new(
        (0..m)
            .map(|i| {
                let mut f = vec![0.0; m];
                f[i] = 1.0;
                let mut g = vec![0.0; m];
                g[0] = 1.0;
                g[m - 1] += 1.0;
                ScalarField::new(vec![TrigTerm::cos(0.5, &f), TrigTerm::sin(0.3, &g)])
            })
            .collect(),
    )
}

fn fd(sys: &SystemDef, delta: f64, n: usize, pairs: usize, seed: u64) -> Result<Estimate, String> {
    let opts = FdOptions {
        delta,
        n_steps: n,
        pairs,
        seed,
        ..Default::default()
    };
    fd_response(sys, &opts)
        .map(|r| r.estimate)
        .map_err(|e| e.to_string())
}

fn agree(name: &str, a: Estimate, b: Estimate) -> (bool, String) {
    let s = a.combined_stderr(&b);
    let d = (a.value - b.value).abs();
    (
        d <= 3.0 * s,
        format!(
            "{name}: fast {:.5}±{:.5}, fd {:.5}±{:.5}, |Δ| {:.2e} ≤ 3σ {:.2e}",
            a.value,
            a.stderr,
            b.value,
            b.stderr,
            d,
            3.0 * s
        ),
    )
}

fn c1_sawtooth_oracles() -> Outcome {
    let sys = system("sawtooth", &[("a", 0.1)]);
    let t = Instant::now();
    let rep = linear_response(&sys, &run_spec(1_000_000, 8, 16, 1)).map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    let d = fd(&sys, 0.01, 1_000_000, 8, 101)?;
    let (ok, mut msg) = agree("sawtooth", rep.total, d);
    let ulam = ulam_response(&sys, &UlamOptions::default()).map_err(|e| e.to_string())?;
    let coarse = ulam_response(
        &sys,
        &UlamOptions {
            n_bins: UlamOptions::default().n_bins / 2,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let grid = (ulam.value - coarse.value).abs();
    let nonzero = ulam.value.abs() > grid.max(3.0 * rep.total.stderr);
    let rel_ok = if nonzero {
        let rel = (rep.total.value - d.value).abs() / ulam.value.abs();
        msg += &format!(", relative {rel:.3}");
        rel <= 0.05
    } else {
        msg += &format!(
            ", ulam {:.1e} (zero response, relative test not applicable)",
            ulam.value
        );
        true
    };
    let fast_ok = elapsed < Duration::from_secs(60);
    msg += &format!(", fast runtime {:.1}s", elapsed.as_secs_f64());
    Ok((ok && rel_ok && fast_ok, msg))
}

fn c2_exact_zero() -> Outcome {
    let sys = system("sawtooth", &[("a", 0.0)]);
    let rep = linear_response(&sys, &run_spec(1_000_000, 32, 16, 2)).map_err(|e| e.to_string())?;
    let t = rep.total;
    Ok((
        t.value.abs() <= 3.0 * t.stderr && t.stderr <= 1e-3,
        format!(
            "total {:.2e}±{:.2e} (32 replicas of N=1e6), UC {:.1e}",
            t.value, t.stderr, rep.uc.value
        ),
    ))
}

fn c3_catmap() -> Outcome {
    let sys = system("catmap", &[]);
    let rep = linear_response(&sys, &run_spec(1_000_000, 8, 16, 3)).map_err(|e| e.to_string())?;
    let d = fd(&sys, 0.02, 1_000_000, 8, 103)?;
    let (ok, msg) = agree("catmap", rep.total, d);

    // Affine base map: ν vanishes and δ = −⟨e, DX e⟩ with the constant
    // orthonormal unstable eigenvector.
    let eng = engine(&sys, 3, 100_000, ResponseOptions::default());
    let nu_zero = eng.nu().max_norm() == 0.0;
    let l = (3.0 + 5f64.sqrt()) / 2.0;
    let norm = (1.0 + (l - 2.0) * (l - 2.0)).sqrt();
    let e = [1.0 / norm, (l - 2.0) / norm];
    let mut xbuf = [0.0; 2];
    let mut dx = [0.0; 2];
    let mut worst = 0.0f64;
    for n in eng.sample() {
        let x = eng.orbit().point(n);
        sys.perturbation().derivative_into(x, &e, &mut dx);
        let closed = -(e[0] * dx[0] + e[1] * dx[1]);
        worst = worst.max((eng.density_ratio(sys.perturbation(), n, &mut xbuf) - closed).abs());
    }
    Ok((
        ok && nu_zero && worst < 1e-8,
        format!("{msg}; ν ≡ 0: {nu_zero}; closed-form density ratio defect {worst:.1e}"),
    ))
}

fn c4_solenoid() -> Outcome {
    let sys = system("solenoid", &[]);
    let rep = linear_response(&sys, &run_spec(1_000_000, 8, 16, 4)).map_err(|e| e.to_string())?;
    let d = fd(&sys, 0.02, 1_000_000, 8, 104)?;
    Ok(agree("solenoid", rep.total, d))
}

fn c5_equivalence() -> Outcome {
    let mut pass = true;
    let mut parts = vec![];
    for (sys, w) in [
        (system("sawtooth", &[("a", 0.1)]), 16),
        (system("catmap", &[]), 8),
    ] {
        let eng = engine(&sys, 5, 200_000, ResponseOptions::default());
        let eq = fastresp::response::equivalence_check(&eng, sys.perturbation(), w)
            .map_err(|e| e.to_string())?;
        pass &= eq.passes(3.0);
        parts.push(format!(
            "{} W={w}: |tan − adj| {:.1e} vs 3σ {:.1e}",
            sys.name(),
            eq.defect,
            3.0 * eq.combined_stderr
        ));
    }
    Ok((pass, parts.join("; ")))
}

fn c6_expanded() -> Outcome {
    let mut worst = 0.0f64;
    let mut parts = vec![];
    for sys in [system("sawtooth", &[("a", 0.1)]), system("catmap", &[])] {
        let eng = engine(&sys, 6, 20_000, ResponseOptions::default());
        let s = eng.sample().start;
        let pts = s..s + 2000;
        let exp = expanded_divergence(&sys, eng.orbit(), eng.frames(), 30, pts.clone())
            .map_err(|e| e.to_string())?;
        let mut xbuf = vec![0.0; sys.dim()];
        let d = pts
            .zip(&exp)
            .map(|(n, v)| (eng.density_ratio(sys.perturbation(), n, &mut xbuf) - v).abs())
            .fold(0.0, f64::max);
        parts.push(format!("{} {d:.1e}", sys.name()));
        worst = worst.max(d);
    }
    Ok((
        worst <= 1e-7,
        format!("max pointwise defect: {}", parts.join(", ")),
    ))
}

fn c7_zero_mean() -> Outcome {
    let mut pass = true;
    let mut parts = vec![];
    for sys in builtins() {
        let eng = engine(&sys, 7, 100_000, ResponseOptions::default());
        for (label, x) in [
            ("X", sys.perturbation().clone()),
            ("X'", extra_field(sys.dim())),
        ] {
            let z = eng.evaluate(&x).zero_mean;
            let ok = z.value.abs() <= 3.0 * z.stderr;
            pass &= ok;
            parts.push(format!(
                "{}/{label} {:.1}σ",
                sys.name(),
                z.value.abs() / z.stderr
            ));
        }
    }
    Ok((pass, parts.join(", ")))
}

fn c8_residuals() -> Outcome {
    let mut worst = 0.0f64;
    for sys in builtins() {
        let eng = engine(&sys, 8, 20_000, ResponseOptions::default());
        worst = worst.max(eng.residual());
        let win = eng.frames().window();
        let range = win.start..win.end - 1;
        let m = sys.dim();
        let mut y = Series::from_fn(SeriesLabel::Custom, m, range, |n, out| {
            sys.pert(eng.orbit().point(n), out);
        });
        y.label = SeriesLabel::Custom;
        let v = forward_shadow(&sys, eng.orbit(), eng.frames(), &y, DEFAULT_MARGIN)
            .map_err(|e| e.to_string())?;
        worst = worst.max(forward_residual(&sys, eng.orbit(), &y, &v.series));
    }
    Ok((
        worst < 1e-8,
        format!("max adjoint/forward residual {worst:.1e}"),
    ))
}

fn c9_coordinate_independence() -> Outcome {
    let mut pass = true;
    let mut parts = vec![];
    for sys in [
        system("solenoid", &[]),
        system("coupledcat", &[("k", 2.0), ("mu", 0.1)]),
    ] {
        let orbit = generate_orbit_with(&sys, &run_spec(100_000, 1, 8, 9).orbit_spec(0))
            .map_err(|e| e.to_string())?;
        let mk = |seed: u64| {
            let opts = ResponseOptions {
                w: Some(8),
                frames: FrameOptions::seeded(seed),
                ..Default::default()
            };
            Engine::new(&sys, orbit.clone(), opts).map_err(|e| e.to_string())
        };
        let (a, b) = (mk(1)?, mk(2)?);
        let m = sys.dim();
        let (mut wa, mut wb) = (vec![0.0; m], vec![0.0; m]);
        let (mut dx, mut dw) = (0.0f64, 0.0f64);
        for n in a.sample() {
            dx = dx.max(
                (div_v_x(&sys, &orbit, a.frames(), n) - div_v_x(&sys, &orbit, b.frames(), n)).abs(),
            );
            div_v_fstar(&sys, &orbit, a.frames(), n, &mut wa);
            div_v_fstar(&sys, &orbit, b.frames(), n, &mut wb);
            dw = wa
                .iter()
                .zip(&wb)
                .fold(dw, |acc, (p, q)| acc.max((p - q).abs()));
        }
        let (ea, eb) = (
            a.evaluate(sys.perturbation()),
            b.evaluate(sys.perturbation()),
        );
        let sc_ok = (ea.sc.value - eb.sc.value).abs() <= 3.0 * ea.sc.stderr;
        let uc_ok = (ea.sweep[8].value - eb.sweep[8].value).abs() <= 3.0 * ea.sweep[8].stderr;
        pass &= dx < 1e-8 && dw < 1e-8 && sc_ok && uc_ok;
        parts.push(format!(
            "{}: div^vX {dx:.1e}, div^vf_* {dw:.1e}, SC Δ {:.1e}, UC Δ {:.1e}",
            sys.name(),
            (ea.sc.value - eb.sc.value).abs(),
            (ea.sweep[8].value - eb.sweep[8].value).abs()
        ));
    }
    Ok((pass, parts.join("; ")))
}

fn c10_decay() -> Outcome {
    let sys = system("catmap", &[]);
    let eng = engine(&sys, 10, 5_000, ResponseOptions::default());
    let rep =
        decay_check(&sys, eng.orbit(), eng.frames(), 20, 12, 10).map_err(|e| e.to_string())?;
    let want = 2.0 * ((3.0 - 5f64.sqrt()) / 2.0).ln();
    Ok((
        (rep.slope - want).abs() <= 0.2 * want.abs(),
        format!("slope {:.4} vs {want:.4}", rep.slope),
    ))
}

fn c11_continuity() -> Outcome {
    let bins: Vec<usize> = (7..=12).map(|k| 1 << k).collect();
    let cases = [
        (
            "h=1, X=sin",
            ScalarField::new(vec![TrigTerm::constant(1.0)]),
            ScalarField::new(vec![TrigTerm::sin(1.0, &[1.0])]),
        ),
        (
            "h=1+sin/2, X=1",
            ScalarField::new(vec![TrigTerm::constant(1.0), TrigTerm::sin(0.5, &[1.0])]),
            ScalarField::new(vec![TrigTerm::constant(1.0)]),
        ),
    ];
    let mut pass = true;
    let mut parts = vec![];
    for (label, h, x) in cases {
        let r = continuity_check(&h, &x, &bins, 0.25).map_err(|e| e.to_string())?;
        pass &= r.monotone && r.order >= 0.9;
        parts.push(format!(
            "{label}: order {:.2}, monotone {}, finest defect {:.1e}",
            r.order,
            r.monotone,
            r.rows.last().map_or(f64::NAN, |row| row.defect)
        ));
    }
    Ok((pass, parts.join("; ")))
}

fn c12_scaling() -> Outcome {
    let widths: Vec<f64> = (2..=8).map(|k| 0.5f64.powi(k)).collect();
    let mut pass = true;
    let mut parts = vec![];
    for (a, m) in [(1, 2), (1, 3), (0, 2)] {
        let r = ulam_error_scaling(a, m, &widths, |x: &[f64]| x.iter().map(|v| v * v).sum())
            .map_err(|e| e.to_string())?;
        pass &= (r.slope - 2.0).abs() <= 0.05;
        parts.push(format!("a={a},M={m}: slope {:.4}", r.slope));
    }
    Ok((pass, parts.join(", ")))
}

fn c13_lyapunov() -> Outcome {
    let sys = system("catmap", &[]);
    let eng = engine(&sys, 13, 100_000, ResponseOptions::default());
    let le = lyapunov_exponents(&eng.frames().tangent)[0];
    let want = ((3.0 + 5f64.sqrt()) / 2.0).ln();
    Ok((
        (le - want).abs() <= 1e-3,
        format!("λ_u {le:.6} vs {want:.6}"),
    ))
}

/// Full single-perturbation run versus the extra evaluation a second
/// perturbation costs on the shared orbit, frames and adjoint shadows.
fn economy(sys: &SystemDef, x2: &VectorField, n: usize) -> Result<(f64, f64, f64), String> {
    let spec = run_spec(n, 1, 16, 14);
    let one = [sys.perturbation().clone()];
    let two = [sys.perturbation().clone(), x2.clone()];
    let best = |f: &dyn Fn() -> Result<(), String>| -> Result<f64, String> {
        // Best of five damps scheduler noise.
        let mut t = f64::INFINITY;
        for _ in 0..5 {
            let s = Instant::now();
            f()?;
            t = t.min(s.elapsed().as_secs_f64());
        }
        Ok(t)
    };
    let multi = |p: &[VectorField]| {
        linear_response_multi(sys, &spec, p)
            .map(|_| ())
            .map_err(|e| e.to_string())
    };
    let t1 = best(&|| multi(&one))?;
    let t2 = best(&|| multi(&two))?;
    let orbit = generate_orbit_with(sys, &spec.orbit_spec(0)).map_err(|e| e.to_string())?;
    let eng = Engine::new(sys, orbit, spec.options.clone()).map_err(|e| e.to_string())?;
    let marginal = best(&|| {
        std::hint::black_box(eng.evaluate(x2));
        Ok(())
    })?;
    Ok((t1, marginal, t2))
}

fn c14_economy() -> Outcome {
    // Second perturbations with the same number of trigonometric terms as
    // the built-in ones; the X-dependent work grows with that count, the
    // shared work with M·u.
    let cc = system("coupledcat", &[("k", 2.0), ("mu", 0.1)]);
    let cc_x2 = VectorField::new(
        (0..4)
            .map(|i| {
                let mut f = vec![0.0; 4];
                f[i ^ 1] = 1.0;
                if i % 2 == 0 {
                    ScalarField::new(vec![TrigTerm::cos(0.5, &f)])
                } else {
                    ScalarField::zero()
                }
            })
            .collect(),
    );
    let (t1, m1, t2) = economy(&cc, &cc_x2, 200_000)?;
    let sol = system("solenoid", &[]);
    let sol_x2 = VectorField::new(vec![
        ScalarField::new(vec![TrigTerm::cos(0.5, &[1.0, 0.0, 0.0])]),
        ScalarField::new(vec![TrigTerm::constant(0.1)]),
        ScalarField::zero(),
    ]);
    let (s1, sm, _) = economy(&sol, &sol_x2, 200_000)?;
    Ok((
        m1 <= 0.1 * t1,
        format!(
            "coupledcat k=2: full run {t1:.3}s, marginal evaluation {m1:.3}s ({:.1}%), two-perturbation run {t2:.3}s; \
             solenoid (cheapest base map, informational): {:.1}%",
            100.0 * m1 / t1,
            100.0 * sm / s1
        ),
    ))
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("oracle agreement, 1D sawtooth", c1_sawtooth_oracles),
        ("exact-zero control, doubling map", c2_exact_zero),
        (
            "oracle agreement, cat map (+ affine closed form)",
            c3_catmap,
        ),
        ("oracle agreement, solenoid", c4_solenoid),
        ("tangent-adjoint equivalence", c5_equivalence),
        ("expanded-formula equivalence", c6_expanded),
        ("zero-mean invariant", c7_zero_mean),
        ("shadowing residuals", c8_residuals),
        ("coordinate independence", c9_coordinate_independence),
        ("cube decay rate", c10_decay),
        ("mass continuity grid check", c11_continuity),
        ("finite-element error scaling", c12_scaling),
        ("Lyapunov sanity", c13_lyapunov),
        ("multi-parameter economy", c14_economy),
    ];
    let mut failed = 0;
    for (i, (title, f)) in criteria.into_iter().enumerate() {
        let t = Instant::now();
        let (ok, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "[{}] {:>2}. {title} — {detail} ({:.1}s)",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", 14 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
