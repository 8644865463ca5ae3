//! Acceptance suite: one pass/fail line per criterion.
//!
//! Runs without the libtest harness so the report is always printed; exits
//! non-zero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use sbwave::cnoidal::{build_wave, minimal_period, period, solve_beta2, wave_params};
use sbwave::continuation::{continue_branch, cnoidal_seed, ContinuationConfig};
use sbwave::elliptic::{complete_elliptic, jacobi, EllipticModulus};
use sbwave::estimate_probe::{counterexample_slope, lemma31_constant, lemma32_sup, lemma33_sup, CounterexampleCase};
use sbwave::evolution::{evolve, SBState, SolverConfig};
use sbwave::functionals::{beta2_closed_form, d_second, h_closed_form, integral, resolved_wave};
use sbwave::hill_spectra::{kernel_candidate, kernel_check_of, spectrum_of, OperatorKind, Parity, Potential};
use sbwave::orbital::{random_perturbation, stability_experiment, transform, wave_state, ExperimentConfig};
use sbwave::quadrature::adaptive_gauss_kronrod;
use sbwave::spectral_grid::SpectralField;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn budget(start: Instant, limit: Duration) -> Result<(), String> {
    let e = start.elapsed();
    check(e <= limit, || format!("runtime {e:.1?} exceeds {limit:?}"))
}

fn e<T: std::fmt::Display>(x: T) -> String {
    x.to_string()
}

fn c1_elliptic() -> Outcome {
    let start = Instant::now();
    let mut worst_id = 0.0_f64;
    let mut worst_legendre = 0.0_f64;
    let mut worst_int = 0.0_f64;
    for j in 1..=19 {
        let k = 0.05 * j as f64;
        let m = EllipticModulus::new(k).map_err(e)?;
        let p = complete_elliptic(m);
        let q = complete_elliptic(m.complement());
        worst_legendre = worst_legendre.max((p.E * q.K + q.E * p.K - p.K * q.K - PI / 2.0).abs());
        for i in 0..=40 {
            let x = -3.0 * p.K + 6.0 * p.K * i as f64 / 40.0;
            let (sn, cn, dn) = jacobi(x, m).map_err(e)?;
            worst_id = worst_id.max((sn * sn + cn * cn - 1.0).abs()).max((dn * dn + k * k * sn * sn - 1.0).abs());
        }
        let int = adaptive_gauss_kronrod(|u| jacobi(u, m).map(|(_, c, _)| c * c).unwrap_or(f64::NAN), 0.0, p.K, 1e-14);
        worst_int = worst_int.max((int - (p.E - (1.0 - k * k) * p.K) / (k * k)).abs());
    }
    check(worst_legendre <= 1e-12, || format!("Legendre residual {worst_legendre:.2e}"))?;
    check(worst_id <= 1e-12, || format!("Jacobi identity residual {worst_id:.2e}"))?;
    check(worst_int <= 1e-10, || format!("∫cn² residual {worst_int:.2e}"))?;
    budget(start, Duration::from_secs(1))?;
    Ok(format!("Legendre {worst_legendre:.1e}, identities {worst_id:.1e}, ∫cn² {worst_int:.1e}"))
}

fn c2_cnoidal() -> Outcome {
    let start = Instant::now();
    let mut points = 0;
    let mut worst_period = 0.0_f64;
    let mut worst_res = 0.0_f64;
    for l in [9.0, 11.0, 13.0, 16.0, 20.0] {
        for w0 in [0.3, 0.5, 0.8, 1.0] {
            check(l > minimal_period(w0), || format!("grid point L={l}, ω₀={w0} not admissible"))?;
            let b2 = solve_beta2(l, w0).map_err(e)?;
            worst_period = worst_period.max((period(b2, w0).map_err(e)? - l).abs() / l);
            let wave = build_wave(2.0 * w0, l, 256).map_err(e)?;
            worst_res = worst_res.max(wave.residual_sup().map_err(e)?);
            points += 1;
        }
    }
    check(points >= 20, || format!("only {points} grid points"))?;
    check(worst_period <= 1e-10, || format!("period mismatch {worst_period:.2e}·L"))?;
    check(worst_res <= 1e-8, || format!("ODE residual {worst_res:.2e}"))?;
    let mut worst_limit = 0.0_f64;
    for w0 in [0.3, 0.5, 1.0, 2.0] {
        let t = period(2.0 * w0 - 1e-8, w0).map_err(e)?;
        worst_limit = worst_limit.max((t - minimal_period(w0)).abs());
        let ts: Vec<f64> = (1..=1000).map(|j| period(2.0 * w0 * j as f64 / 1001.0, w0)).collect::<Result<_, _>>().map_err(e)?;
        check(ts.windows(2).all(|p| p[1] < p[0]), || format!("period not decreasing in β₂ at ω₀={w0}"))?;
    }
    check(worst_limit <= 1e-6, || format!("small-amplitude limit off by {worst_limit:.2e}"))?;
    budget(start, Duration::from_secs(10))?;
    Ok(format!("{points} points, period {worst_period:.1e}·L, residual {worst_res:.1e}, limit {worst_limit:.1e}"))
}

fn c3_spectra() -> Outcome {
    let start = Instant::now();
    let wave = build_wave(1.0, 13.0, 256).map_err(e)?;
    let fine = build_wave(1.0, 13.0, 512).map_err(e)?;
    let pot = Potential::from_wave(&wave);
    let pot_fine = Potential::from_wave(&fine);
    let expected = [(OperatorKind::L1, 1, 1), (OperatorKind::L2, 0, 1), (OperatorKind::AR, 1, 1), (OperatorKind::AI, 0, 1)];
    let mut notes = Vec::new();
    for (kind, neg, zero) in expected {
        let s = spectrum_of(kind, &pot, 5, Parity::Full).map_err(e)?;
        check(s.n_negative == neg && s.n_zero == zero, || {
            format!("{kind}: inertia ({}, {}) instead of ({neg}, {zero})", s.n_negative, s.n_zero)
        })?;
        let kr = kernel_check_of(kind, &pot).map_err(e)?;
        check(kr.residual <= 1e-7, || format!("{kind}: kernel residual {:.2e}", kr.residual))?;
        let cand = kernel_candidate(kind, &pot).map_err(e)?;
        let cos = s.cosine_similarity(s.n_negative, &cand);
        if matches!(kind, OperatorKind::AR | OperatorKind::AI) {
            check(cos > 0.999, || format!("{kind}: zero eigenvector cosine {cos}"))?;
        }
        let sf = spectrum_of(kind, &pot_fine, 5, Parity::Full).map_err(e)?;
        let drift = s.eigenvalues.iter().zip(&sf.eigenvalues).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        check(drift <= 1e-8, || format!("{kind}: eigenvalues move {drift:.2e} under N→512"))?;
        notes.push(format!("{kind} ({},{}) cos {cos:.6} drift {drift:.0e}", s.n_negative, s.n_zero));
    }
    budget(start, Duration::from_secs(30))?;
    Ok(notes.join("; "))
}

fn c4_convexity() -> Outcome {
    let start = Instant::now();
    let l = 13.0;
    let mut worst_fd = 0.0_f64;
    let mut min_d2 = f64::INFINITY;
    let mut worst_beta2 = 0.0_f64;
    let mut worst_h = 0.0_f64;
    for j in 0..10 {
        let omega = 0.8 + 0.7 * j as f64 / 9.0;
        let idx = d_second(omega, l).map_err(e)?;
        min_d2 = min_d2.min(idx.d_second);
        worst_fd = worst_fd.max((idx.d_second - idx.d_second_fd).abs() / idx.d_second.abs());
        let p = wave_params(omega, l).map_err(e)?;
        worst_beta2 = worst_beta2.max((beta2_closed_form(p.k, l) - p.beta2).abs());
        let w = resolved_wave(omega, l).map_err(e)?;
        worst_h = worst_h.max((h_closed_form(p.k, l) - integral(&w.field)).abs());
    }
    check(min_d2 > 0.0, || format!("d″ not positive (min {min_d2})"))?;
    check(worst_fd <= 1e-4, || format!("analytic vs finite difference {worst_fd:.2e}"))?;
    check(worst_beta2 <= 1e-9, || format!("β₂ closed form off by {worst_beta2:.2e}"))?;
    check(worst_h <= 1e-9, || format!("H(k) closed form off by {worst_h:.2e}"))?;
    budget(start, Duration::from_secs(20))?;
    Ok(format!("min d″ {min_d2:.4}, FD {worst_fd:.1e}, β₂ {worst_beta2:.1e}, H {worst_h:.1e}"))
}

fn h1_dist(a: &SpectralField, b: &SpectralField) -> Result<f64, String> {
    Ok(a.sub(b).map_err(e)?.sobolev_norm(1.0))
}

fn perturbed_wave(n: usize, eps: f64, seed: u64) -> Result<SBState, String> {
    let w = build_wave(1.0, 13.0, n).map_err(e)?;
    let mut st = wave_state(&w);
    let d = random_perturbation(w.grid(), seed);
    for (x, y) in [(&mut st.u_hat, &d.u_hat), (&mut st.v_hat, &d.v_hat), (&mut st.w_hat, &d.w_hat)] {
        for (a, b) in x.iter_mut().zip(y) {
            *a += eps * b;
        }
    }
    Ok(st)
}

fn c5_evolution() -> Outcome {
    let start = Instant::now();
    let cfg = SolverConfig { dt: 1e-3, ..Default::default() };

    let w = build_wave(1.0, 13.0, 256).map_err(e)?;
    let st = wave_state(&w);
    let tr = evolve(&st, 2.0 * PI, &SolverConfig { monitor_stride: 1000, ..cfg }).map_err(e)?;
    let fin = tr.final_state();
    let round_trip = h1_dist(&fin.u(), &w.field)?.max(h1_dist(&fin.v(), &w.field)?);
    check(round_trip <= 1e-6, || format!("standing-wave round trip H¹ error {round_trip:.2e}"))?;

    let t_long = 50.0;
    let st = perturbed_wave(256, 1e-2, 7)?;
    let tr = evolve(&st, t_long, &SolverConfig { monitor_stride: 1000, ..cfg }).map_err(e)?;
    check(tr.mass_drift <= 1e-10 * t_long, || format!("mass drift {:.2e}", tr.mass_drift))?;
    check(tr.energy_drift <= 1e-8 * t_long, || format!("energy drift {:.2e}", tr.energy_drift))?;

    // Richardson: successive differences shrink by 2^p. Steps start where h·ξ²
    // at the perturbation cutoff is moderate; coarser steps are pre-asymptotic.
    let st = perturbed_wave(128, 0.1, 3)?;
    let run = |dt: f64| evolve(&st, 1.0, &SolverConfig { dt, monitor_stride: 1_000_000, mass_tol: f64::INFINITY, ..cfg }).map(|t| t.final_state().clone());
    let sols: Vec<SBState> = [0.01, 0.005, 0.0025].iter().map(|&dt| run(dt)).collect::<Result<_, _>>().map_err(e)?;
    let diff = |a: &SBState, b: &SBState| -> Result<f64, String> {
        Ok(h1_dist(&a.u(), &b.u())?.max(h1_dist(&a.v(), &b.v())?))
    };
    let order = (diff(&sols[0], &sols[1])? / diff(&sols[1], &sols[2])?).log2();
    check((3.7..=4.3).contains(&order), || format!("observed order {order:.3}"))?;

    // Evolving a translated, rotated datum equals translating the evolved one.
    let st = perturbed_wave(128, 0.05, 11)?;
    let (phase, shift) = (0.9, 2.3);
    let short = SolverConfig { dt: 1e-2, monitor_stride: 1000, ..cfg };
    let a = evolve(&transform(&st, phase, shift), 2.0, &short).map_err(e)?;
    let b = evolve(&st, 2.0, &short).map_err(e)?;
    let b = transform(b.final_state(), phase, shift);
    let a = a.final_state();
    let sym = h1_dist(&a.u(), &b.u())?.max(h1_dist(&a.v(), &b.v())?).max(h1_dist(&a.w(), &b.w())?);
    check(sym <= 1e-9, || format!("equivariance defect {sym:.2e}"))?;

    budget(start, Duration::from_secs(300))?;
    Ok(format!(
        "round trip {round_trip:.1e}, mass {:.1e}, energy {:.1e}, order {order:.3}, equivariance {sym:.1e}",
        tr.mass_drift, tr.energy_drift
    ))
}

fn c6_orbital() -> Outcome {
    let start = Instant::now();
    let epss = [1e-3, 5e-4, 2.5e-4];
    let mut worst_ratio = 0.0_f64;
    let mut worst_spread = 1.0_f64;
    for seed in 0..5u64 {
        let mut scaled = Vec::new();
        for &eps in &epss {
            let r = stability_experiment(&ExperimentConfig { eps, seed, ..Default::default() }).map_err(e)?;
            check(r.max_distance <= 20.0 * eps, || format!("seed {seed}, eps {eps}: max distance {:.3e}", r.max_distance))?;
            scaled.push(r.max_distance / eps);
            worst_ratio = worst_ratio.max(r.max_distance / eps);
        }
        let spread = scaled.iter().copied().fold(0.0, f64::max) / scaled.iter().copied().fold(f64::INFINITY, f64::min);
        check(spread <= 1.5, || format!("seed {seed}: max distance not linear in eps (spread {spread:.3})"))?;
        worst_spread = worst_spread.max(spread);
    }
    budget(start, Duration::from_secs(1800))?;
    Ok(format!("max distance/eps ≤ {worst_ratio:.3}, linearity spread {worst_spread:.4}"))
}

fn c7_continuation() -> Outcome {
    let start = Instant::now();
    let br = continue_branch(&ContinuationConfig { omega_min: 0.9, omega_max: 1.1, step: 0.01, ..Default::default() }).map_err(e)?;
    check(br.aborts.is_empty(), || format!("branch aborted: {:?}", br.aborts))?;
    check(br.pairs.len() == 21, || format!("{} pairs instead of 21", br.pairs.len()))?;
    let worst = br.pairs.iter().map(|p| p.residual_norm).fold(0.0, f64::max);
    check(worst <= 1e-10, || format!("residual {worst:.2e}"))?;
    let one = br.pairs.iter().find(|p| (p.omega - 1.0).abs() < 1e-12).ok_or("no pair at ω = 1")?;
    let seed = cnoidal_seed(one.psi.grid().period(), one.psi.grid().len()).map_err(e)?;
    let dev = one.psi.sub(&seed.psi).map_err(e)?.sup_norm().max(one.phi.sub(&seed.psi).map_err(e)?.sup_norm());
    check(dev <= 1e-10, || format!("pair at ω = 1 differs from the cnoidal wave by {dev:.2e}"))?;
    check(br.sigma_min_at_one > 1e-6, || format!("σ_min = {:.2e}", br.sigma_min_at_one))?;
    budget(start, Duration::from_secs(60))?;
    Ok(format!("21 pairs, residual ≤ {worst:.1e}, ω=1 deviation {dev:.1e}, σ_min {:.4}", br.sigma_min_at_one))
}

fn c8_probes() -> Outcome {
    let start = Instant::now();
    let ns = [8, 16, 32, 64, 128];
    let cases = [
        (CounterexampleCase::I, [(1.0, 0.0), (0.5, 1.0), (2.0, 0.5)]),
        (CounterexampleCase::II, [(-1.0, 0.0), (-0.5, -0.5), (0.5, 0.0)]),
        (CounterexampleCase::III, [(0.0, 1.0), (1.0, 1.0), (1.0, 0.0)]),
    ];
    let mut worst_slope = 0.0_f64;
    for (case, ks) in cases {
        for (k, s) in ks {
            let r = counterexample_slope(case, k, s, 0.3, 0.6, &ns).map_err(e)?;
            let d = (r.slope - r.expected_slope).abs();
            check(d <= 0.2, || format!("case {case:?}, k={k}, s={s}: slope {:.3} vs {}", r.slope, r.expected_slope))?;
            worst_slope = worst_slope.max(d);
        }
    }
    let (sup, inf) = lemma33_sup(100.0, 100.0, 2001).map_err(e)?;
    check(sup <= 1.5 && inf >= 2.0 / 3.0, || format!("modulation ratio range [{inf}, {sup}]"))?;
    let mut sats = Vec::new();
    for (gamma, n1) in [(0.6, 1_i64 << 21), (1.0, 1 << 14)] {
        let r = lemma32_sup(gamma, 4, 8, n1).map_err(e)?;
        check(r.saturated(), || format!("γ = {gamma}: tail growth {:.3}%", 100.0 * r.saturation))?;
        sats.push(format!("γ={gamma}: {:.3} ({:.2}%)", r.sup, 100.0 * r.saturation));
    }
    let mut plateaus = Vec::new();
    for (p, q) in [(2.0, 0.6), (1.5, 1.5), (3.0, 1.0)] {
        let cs: Vec<f64> = [1.0, 10.0, 100.0, 1000.0].iter().map(|&d| lemma31_constant(p, q, 0.0, d)).collect::<Result<_, _>>().map_err(e)?;
        let change = (cs[3] / cs[2] - 1.0).abs();
        check(change <= 0.1, || format!("convolution integral (p={p}, q={q}) constant still moving {:.1}% over the last decade", 100.0 * change))?;
        plateaus.push(format!("({p},{q}) {:.3}", cs[3]));
    }
    budget(start, Duration::from_secs(120))?;
    Ok(format!(
        "slopes within {worst_slope:.3}; modulation ratio [{inf:.4}, {sup:.4}]; lattice sums {}; convolution constants {}",
        sats.join(", "),
        plateaus.join(", ")
    ))
}

const C_MAX: f64 = 2.0;

fn c9_envelope() -> Outcome {
    let start = Instant::now();
    let grid = sbwave::spectral_grid::FourierGrid::new(13.0, 128).map_err(e)?;
    let mut cs = Vec::new();
    for seed in 0..5u64 {
        let d = random_perturbation(&grid, 100 + seed);
        let amp = Complex64::new(0.2, 0.0);
        let st = SBState::new(0.0, &d.u().scale(amp), &d.v().scale(amp), &d.w().scale(amp)).map_err(e)?;
        let tr = evolve(&st, 20.0, &SolverConfig { dt: 1e-3, monitor_stride: 50, ..Default::default() }).map_err(e)?;
        let c = tr.envelope.c_observed;
        check(c.is_finite() && c <= C_MAX, || format!("seed {seed}: observed constant {c:.4} exceeds {C_MAX}"))?;
        cs.push(c);
    }
    budget(start, Duration::from_secs(600))?;
    Ok(format!("C per run {:?}", cs.iter().map(|c| format!("{c:.4}")).collect::<Vec<_>>()))
}

fn c10_determinism() -> Outcome {
    let start = Instant::now();
    let exe = env!("CARGO_BIN_EXE_sbwave");
    let dir = tempfile::tempdir().map_err(e)?;
    let runs: [&[&str]; 4] = [
        &["orbital", "T=5", "eps=1e-3", "seed=4"],
        &["probe", "probe=bilinear", "trials=20", "seed=9"],
        &["evolve", "init=random", "T=2", "seed=5"],
        &["spectrum", "kind=AR", "L=13", "N=128", "m=5"],
    ];
    let mut files = 0;
    for (i, args) in runs.iter().enumerate() {
        let mut outs = Vec::new();
        for rep in 0..2 {
            let out = dir.path().join(format!("run{i}_{rep}"));
            let status = std::process::Command::new(exe)
                .args(*args)
                .arg(format!("out={}", out.display()))
                .output()
                .map_err(e)?;
            check(status.status.success(), || format!("{args:?} failed: {}", String::from_utf8_lossy(&status.stderr)))?;
            outs.push(out);
        }
        for entry in std::fs::read_dir(&outs[0]).map_err(e)? {
            let name = entry.map_err(e)?.file_name();
            let a = std::fs::read(outs[0].join(&name)).map_err(e)?;
            let b = std::fs::read(outs[1].join(&name)).map_err(e)?;
            let (a, b) = if name == "manifest.json" { (strip_time(&a)?, strip_time(&b)?) } else { (a, b) };
            check(a == b, || format!("{args:?}: {} differs between runs", name.to_string_lossy()))?;
            files += 1;
        }
    }
    budget(start, Duration::from_secs(120))?;
    Ok(format!("{files} files byte-identical across repeated runs"))
}

fn strip_time(bytes: &[u8]) -> Result<Vec<u8>, String> {
    let mut v: serde_json::Value = serde_json::from_slice(bytes).map_err(e)?;
    v.as_object_mut().ok_or("manifest is not an object")?.remove("wall_time_s");
    serde_json::to_vec(&v).map_err(e)
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        ("elliptic kernel", c1_elliptic),
        ("cnoidal construction", c2_cnoidal),
        ("spectral hypotheses", c3_spectra),
        ("convexity of d", c4_convexity),
        ("evolution fidelity", c5_evolution),
        ("orbital stability", c6_orbital),
        ("continuation", c7_continuation),
        ("counterexamples and estimates", c8_probes),
        ("conservation envelope", c9_envelope),
        ("determinism", c10_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !filter.is_empty() && !filter.iter().any(|x| x == &id.to_string()) {
            continue;
        }
        let t = Instant::now();
        let outcome = f();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("criterion {id:>2} {name}: PASS ({secs:.1}s) {msg}"),
            Err(msg) => {
                failed += 1;
                println!("criterion {id:>2} {name}: FAIL ({secs:.1}s) {msg}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
