//! Batch front end: `sbwave <command> key=value ...`.
//!
//! Parameters come from the command line and an optional INI file
//! (`config=path`); command-line values win. Every run validates all
//! parameters before computing, builds its artifacts in memory, and writes
//! them together with a `manifest.json` only on success.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::cnoidal::{build_wave, minimal_period, WaveParams};
use crate::continuation::{continue_to, ContinuationConfig};
use crate::estimate_probe::{
    bilinear_ratio_sample, counterexample_slope, lemma31_constant, lemma32_sup, lemma33_sup, CounterexampleCase,
};
use crate::evolution::{evolve, SBState, SolverConfig};
use crate::functionals::d_second;
use crate::hill_spectra::{kernel_check_of, spectrum_of, OperatorKind, Parity, Potential};
use crate::orbital::{random_perturbation, stability_experiment, wave_state, ExperimentConfig, Perturbation};
use crate::output::{config_hash, csv_artifact, json_artifact, write_all, Artifact, Manifest};
use crate::{Error, Result};

pub const OUT_ENV: &str = "SBWAVE_OUT";
pub const DEFAULT_OUT: &str = "sbwave-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Wave,
    Branch,
    Spectrum,
    Index,
    Evolve,
    Orbital,
    Continue,
    Probe,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Wave,
        Command::Branch,
        Command::Spectrum,
        Command::Index,
        Command::Evolve,
        Command::Orbital,
        Command::Continue,
        Command::Probe,
    ];

    fn keys(self) -> &'static [&'static str] {
        match self {
            Command::Wave => &["L", "omega", "N"],
            Command::Branch => &["L", "N", "omegas", "omega_min", "omega_max", "count"],
            Command::Spectrum => &["kind", "L", "omega", "N", "m", "parity"],
            Command::Index => &["L", "omega", "omegas"],
            Command::Evolve => &[
                "L", "N", "omega", "init", "eps", "amp", "seed", "T", "dt", "alpha", "beta", "stride", "s", "mass_tol",
                "dealias",
            ],
            Command::Orbital => &["L", "N", "eps", "T", "snapshots", "seed", "dt", "perturbation"],
            Command::Continue => &["L", "N", "omega_min", "omega_max", "step", "min_step", "profiles"],
            Command::Probe => &[
                "probe", "case", "k", "s", "a", "b", "N_list", "gamma", "n_grid", "tau_samples", "N1_max", "p", "q",
                "distances", "x_max", "y_max", "n_points", "trials", "seed", "h",
            ],
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Command::Wave => "wave",
            Command::Branch => "branch",
            Command::Spectrum => "spectrum",
            Command::Index => "index",
            Command::Evolve => "evolve",
            Command::Orbital => "orbital",
            Command::Continue => "continue",
            Command::Probe => "probe",
        };
        f.write_str(s)
    }
}

impl FromStr for Command {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.to_string() == s)
            .ok_or_else(|| Error::Usage(format!("unknown command {s:?}; expected one of wave, branch, spectrum, index, evolve, orbital, continue, probe")))
    }
}

/// A parsed invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    /// Effective parameters (file merged with flags), excluding `out`, `config` and `sweep`.
    pub params: BTreeMap<String, String>,
    pub out: Option<PathBuf>,
    /// `key:v1,v2,...`
    pub sweep: Option<(String, Vec<String>)>,
}

fn read_ini(path: &Path, command: Command) -> Result<BTreeMap<String, String>> {
    let ini = ini::Ini::load_from_file(path)
        .map_err(|e| Error::Usage(format!("cannot read config file {}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for section in [None, Some(command.to_string())] {
        if let Some(props) = ini.section(section.as_deref()) {
            for (k, v) in props.iter() {
                out.insert(k.to_string(), v.to_string());
            }
        }
    }
    Ok(out)
}

impl RunConfig {
    /// Parses `command key=value ...`.
    pub fn from_args<S: AsRef<str>>(args: &[S]) -> Result<Self> {
        let (first, rest) = args.split_first().ok_or_else(|| Error::Usage(usage()))?;
        let command: Command = first.as_ref().parse()?;
        let mut flags = BTreeMap::new();
        for a in rest {
            let a = a.as_ref();
            let (k, v) = a
                .split_once('=')
                .ok_or_else(|| Error::Usage(format!("argument {a:?} is not of the form key=value")))?;
            if k.is_empty() {
                return Err(Error::Usage(format!("empty key in {a:?}")));
            }
            if flags.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::Usage(format!("key {k:?} given twice")));
            }
        }
        let mut params = match flags.remove("config") {
            Some(p) => read_ini(Path::new(&p), command)?,
            None => BTreeMap::new(),
        };
        let file_out = params.remove("out");
        let file_sweep = params.remove("sweep");
        let out = flags.remove("out").or(file_out).map(PathBuf::from);
        let sweep_raw = flags.remove("sweep").or(file_sweep);
        params.extend(flags);
        for k in params.keys() {
            if !command.keys().contains(&k.as_str()) {
                return Err(Error::Usage(format!("unknown key {k:?} for command {command}; allowed: {}", command.keys().join(", "))));
            }
        }
        let sweep = match sweep_raw {
            None => None,
            Some(s) => {
                let (k, vs) = s
                    .split_once(':')
                    .ok_or_else(|| Error::Usage(format!("sweep {s:?} must look like key:v1,v2,...")))?;
                if !command.keys().contains(&k) {
                    return Err(Error::Usage(format!("cannot sweep unknown key {k:?}")));
                }
                let values: Vec<String> = vs.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
                if values.is_empty() {
                    return Err(Error::Usage("sweep has no values".into()));
                }
                Some((k.to_string(), values))
            }
        };
        Ok(Self { command, params, out, sweep })
    }

    pub fn hash(&self) -> String {
        config_hash(&self.command.to_string(), &self.params)
    }
}

pub fn usage() -> String {
    "usage: sbwave <wave|branch|spectrum|index|evolve|orbital|continue|probe> key=value ... [config=file.ini] [out=dir] [sweep=key:v1,v2]".into()
}

struct Params<'a> {
    command: Command,
    map: &'a BTreeMap<String, String>,
}

impl Params<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn parse<T: FromStr>(&self, key: &str, default: Option<T>) -> Result<T> {
        match self.raw(key) {
            Some(v) => v.parse().map_err(|_| Error::Usage(format!("cannot parse {key}={v:?}"))),
            None => default.ok_or_else(|| Error::Usage(format!("missing required key {key:?} for command {}", self.command))),
        }
    }

    fn f64(&self, key: &str, default: Option<f64>) -> Result<f64> {
        let v: f64 = self.parse(key, default)?;
        if !v.is_finite() {
            return Err(Error::Usage(format!("{key} must be finite")));
        }
        Ok(v)
    }

    fn positive(&self, key: &str, default: Option<f64>) -> Result<f64> {
        let v = self.f64(key, default)?;
        if v <= 0.0 {
            return Err(Error::Domain(format!("{key} = {v} must be positive")));
        }
        Ok(v)
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(|x| x.trim().parse().map_err(|_| Error::Usage(format!("cannot parse {key} entry {x:?}"))))
                    .collect()
            })
            .transpose()
    }

    fn modes(&self, default: usize) -> Result<usize> {
        let n: usize = self.parse("N", Some(default))?;
        if n < 32 || !n.is_power_of_two() {
            return Err(Error::Domain(format!("N = {n} must be a power of two ≥ 32")));
        }
        Ok(n)
    }

    fn wave_point(&self, l: f64, omega: f64) -> Result<()> {
        if !(omega > 0.0) || l <= minimal_period(omega) {
            return Err(Error::Domain(format!(
                "no cnoidal wave with L = {l} at ω = {omega}: need L > √2·π/√ω = {}",
                minimal_period(omega)
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Probe {
    Counterexample { case: CounterexampleCase, k: f64, s: f64, a: f64, b: f64, n_list: Vec<i64> },
    Lemma31 { p: f64, q: f64, distances: Vec<f64> },
    Lemma32 { gamma: f64, n_grid: i64, tau_samples: i64, n1_max: i64 },
    Lemma33 { x_max: f64, y_max: f64, n_points: usize },
    Bilinear { s: f64, a: f64, b: f64, trials: usize, seed: u64, h: f64 },
}

#[derive(Debug, Clone)]
enum Job {
    Wave { l: f64, omega: f64, n: usize },
    Branch { l: f64, n: usize, omegas: Vec<f64> },
    Spectrum { kind: OperatorKind, l: f64, omega: f64, n: usize, m: usize, parity: Parity },
    Index { l: f64, omegas: Vec<f64> },
    Evolve { l: f64, n: usize, omega: f64, init: String, eps: f64, amp: f64, seed: u64, t: f64, solver: SolverConfig },
    Orbital(ExperimentConfig),
    Continue { cfg: ContinuationConfig, profiles: bool },
    Probe(Probe),
}

fn omega_list(p: &Params) -> Result<Vec<f64>> {
    if let Some(v) = p.list::<f64>("omegas")? {
        if v.is_empty() {
            return Err(Error::Usage("omegas is empty".into()));
        }
        return Ok(v);
    }
    let lo = p.positive("omega_min", None)?;
    let hi = p.positive("omega_max", None)?;
    let count: usize = p.parse("count", Some(11))?;
    if hi < lo || count < 1 {
        return Err(Error::Domain("need omega_min ≤ omega_max and count ≥ 1".into()));
    }
    Ok((0..count).map(|j| if count == 1 { lo } else { lo + (hi - lo) * j as f64 / (count - 1) as f64 }).collect())
}

/// Validates parameters into a typed job without computing anything.
fn validate(command: Command, map: &BTreeMap<String, String>) -> Result<Job> {
    let p = Params { command, map };
    Ok(match command {
        Command::Wave => {
            let l = p.positive("L", None)?;
            let omega = p.positive("omega", None)?;
            p.wave_point(l, omega)?;
            Job::Wave { l, omega, n: p.modes(256)? }
        }
        Command::Branch => {
            let l = p.positive("L", None)?;
            let omegas = omega_list(&p)?;
            for &w in &omegas {
                p.wave_point(l, w)?;
            }
            Job::Branch { l, n: p.modes(256)?, omegas }
        }
        Command::Spectrum => {
            let kind: OperatorKind = p.parse("kind", None)?;
            let l = p.positive("L", Some(13.0))?;
            let omega = p.positive("omega", Some(1.0))?;
            p.wave_point(l, omega)?;
            let parity = match p.raw("parity").unwrap_or("full") {
                "full" => Parity::Full,
                "even" => Parity::Even,
                "odd" => Parity::Odd,
                other => return Err(Error::Usage(format!("parity {other:?} must be full, even or odd"))),
            };
            Job::Spectrum { kind, l, omega, n: p.modes(256)?, m: p.parse("m", Some(5))?, parity }
        }
        Command::Index => {
            let l = p.positive("L", Some(13.0))?;
            let omegas = match p.list::<f64>("omegas")? {
                Some(v) => v,
                None => vec![p.positive("omega", Some(1.0))?],
            };
            for &w in &omegas {
                p.wave_point(l, w)?;
            }
            Job::Index { l, omegas }
        }
        Command::Evolve => {
            let l = p.positive("L", Some(13.0))?;
            let omega = p.positive("omega", Some(1.0))?;
            let init = p.raw("init").unwrap_or("wave").to_string();
            match init.as_str() {
                "wave" => p.wave_point(l, omega)?,
                "random" => {}
                other => return Err(Error::Usage(format!("init {other:?} must be wave or random"))),
            }
            let solver = SolverConfig {
                dt: p.positive("dt", Some(1e-3))?,
                alpha: p.f64("alpha", Some(-1.0))?,
                beta: p.f64("beta", Some(-1.0))?,
                dealias: p.parse("dealias", Some(true))?,
                monitor_stride: p.parse("stride", Some(100))?,
                s_index: p.f64("s", Some(0.0))?,
                mass_tol: p.positive("mass_tol", Some(1e-10))?,
            };
            solver.validate()?;
            let eps = p.f64("eps", Some(0.0))?;
            let amp = p.f64("amp", Some(0.1))?;
            if eps < 0.0 || amp < 0.0 {
                return Err(Error::Domain("eps and amp must be non-negative".into()));
            }
            Job::Evolve {
                l,
                n: p.modes(128)?,
                omega,
                init,
                eps,
                amp,
                seed: p.parse("seed", Some(0))?,
                t: p.positive("T", Some(10.0))?,
                solver,
            }
        }
        Command::Orbital => {
            let d = ExperimentConfig::default();
            let perturbation = match p.raw("perturbation").unwrap_or("random") {
                "random" => Perturbation::Random,
                "tangent" => Perturbation::BranchTangent,
                other => return Err(Error::Usage(format!("perturbation {other:?} must be random or tangent"))),
            };
            let l = p.positive("L", Some(d.period))?;
            p.wave_point(l, 1.0)?;
            let cfg = ExperimentConfig {
                period: l,
                n_modes: p.modes(d.n_modes)?,
                eps: p.f64("eps", Some(d.eps))?,
                t_final: p.positive("T", Some(d.t_final))?,
                n_snapshots: p.parse("snapshots", Some(d.n_snapshots))?,
                seed: p.parse("seed", Some(d.seed))?,
                perturbation,
                solver: SolverConfig { dt: p.positive("dt", Some(d.solver.dt))?, ..d.solver },
            };
            if cfg.eps < 0.0 || cfg.n_snapshots < 2 {
                return Err(Error::Domain("need eps ≥ 0 and snapshots ≥ 2".into()));
            }
            Job::Orbital(cfg)
        }
        Command::Continue => {
            let d = ContinuationConfig::default();
            let cfg = ContinuationConfig {
                period: p.positive("L", Some(d.period))?,
                n_modes: p.modes(d.n_modes)?,
                omega_min: p.positive("omega_min", Some(d.omega_min))?,
                omega_max: p.positive("omega_max", Some(d.omega_max))?,
                step: p.positive("step", Some(d.step))?,
                min_step: p.positive("min_step", Some(d.min_step))?,
            };
            if cfg.omega_max < cfg.omega_min || cfg.min_step > cfg.step {
                return Err(Error::Domain("need omega_min ≤ omega_max and min_step ≤ step".into()));
            }
            p.wave_point(cfg.period, 1.0)?;
            Job::Continue { cfg, profiles: p.parse("profiles", Some(true))? }
        }
        Command::Probe => {
            let which = p.raw("probe").ok_or_else(|| Error::Usage("missing required key \"probe\" for command probe".into()))?;
            let a = p.f64("a", Some(0.3))?;
            let b = p.f64("b", Some(0.6))?;
            let ab_ok = a > 0.25 && a < 0.5 && b > 0.5;
            Job::Probe(match which {
                "counterexample" => {
                    if !ab_ok {
                        return Err(Error::Domain(format!("need 1/4 < a < 1/2 < b (a={a}, b={b})")));
                    }
                    let n_list = p.list::<i64>("N_list")?.unwrap_or_else(|| vec![8, 16, 32, 64, 128]);
                    if n_list.len() < 4 || n_list[0] < 1 || n_list.windows(2).any(|w| w[1] <= w[0]) {
                        return Err(Error::Domain("N_list must be increasing, positive, with ≥ 4 values".into()));
                    }
                    Probe::Counterexample {
                        case: p.parse("case", None)?,
                        k: p.f64("k", None)?,
                        s: p.f64("s", None)?,
                        a,
                        b,
                        n_list,
                    }
                }
                "lemma31" => {
                    let pp = p.positive("p", None)?;
                    let q = p.positive("q", None)?;
                    if pp + q <= 1.0 {
                        return Err(Error::Domain(format!("need p + q > 1 (p={pp}, q={q})")));
                    }
                    let distances = p.list::<f64>("distances")?.unwrap_or_else(|| vec![0.0, 1.0, 10.0, 100.0, 1000.0]);
                    Probe::Lemma31 { p: pp, q, distances }
                }
                "lemma32" => {
                    let gamma = p.f64("gamma", None)?;
                    if gamma <= 0.5 {
                        return Err(Error::Domain(format!("γ = {gamma} must exceed 1/2")));
                    }
                    Probe::Lemma32 {
                        gamma,
                        n_grid: p.parse("n_grid", Some(4))?,
                        tau_samples: p.parse("tau_samples", Some(8))?,
                        n1_max: p.parse("N1_max", Some(1 << 14))?,
                    }
                }
                "lemma33" => Probe::Lemma33 {
                    x_max: p.positive("x_max", Some(100.0))?,
                    y_max: p.positive("y_max", Some(100.0))?,
                    n_points: p.parse("n_points", Some(2001))?,
                },
                "bilinear" => {
                    let s = p.f64("s", Some(0.0))?;
                    if !ab_ok || s < 0.0 {
                        return Err(Error::Domain(format!("need s ≥ 0 and 1/4 < a < 1/2 < b (s={s}, a={a}, b={b})")));
                    }
                    Probe::Bilinear {
                        s,
                        a,
                        b,
                        trials: p.parse("trials", Some(200))?,
                        seed: p.parse("seed", Some(0))?,
                        h: p.positive("h", Some(crate::estimate_probe::DEFAULT_H))?,
                    }
                }
                other => {
                    return Err(Error::Usage(format!(
                        "probe {other:?} must be counterexample, lemma31, lemma32, lemma33 or bilinear"
                    )))
                }
            })
        }
    })
}

fn profile_rows(xs: &[f64], cols: &[Vec<f64>]) -> Vec<Vec<f64>> {
    xs.iter().enumerate().map(|(j, &x)| std::iter::once(x).chain(cols.iter().map(|c| c[j])).collect()).collect()
}

#[derive(Serialize)]
struct WaveRecord {
    params: WaveParams,
    #[serde(rename = "N")]
    n: usize,
    residual_sup: f64,
    spectral_tail: f64,
}

fn execute(job: &Job, hash: &str) -> Result<Vec<Artifact>> {
    let mut out = Vec::new();
    match job {
        Job::Wave { l, omega, n } => {
            let w = build_wave(*omega, *l, *n)?;
            let rec = WaveRecord { params: w.params, n: *n, residual_sup: w.residual_sup()?, spectral_tail: w.field.spectral_tail() };
            out.push(csv_artifact("wave_profile.csv", hash, &["x", "psi"], &profile_rows(&w.grid().xs(), &[w.field.real_values()]))?);
            out.push(json_artifact("wave_params.json", hash, &rec)?);
        }
        Job::Branch { l, n, omegas } => {
            let recs = omegas
                .par_iter()
                .map(|&w| {
                    let wave = build_wave(w, *l, *n)?;
                    Ok(WaveRecord { params: wave.params, n: *n, residual_sup: wave.residual_sup()?, spectral_tail: wave.field.spectral_tail() })
                })
                .collect::<Result<Vec<_>>>()?;
            let rows: Vec<Vec<f64>> = recs
                .iter()
                .map(|r| {
                    let p = &r.params;
                    vec![p.omega, p.k.k(), p.beta1, p.beta2, p.beta3, p.rho, r.residual_sup]
                })
                .collect();
            out.push(csv_artifact("branch.csv", hash, &["omega", "k", "beta1", "beta2", "beta3", "rho", "residual"], &rows)?);
            out.push(json_artifact("branch.json", hash, &recs)?);
        }
        Job::Spectrum { kind, l, omega, n, m, parity } => {
            let w = build_wave(*omega, *l, *n)?;
            let pot = Potential::from_wave(&w);
            let spec = spectrum_of(*kind, &pot, *m, *parity)?;
            let kernel = kernel_check_of(*kind, &pot)?;
            let rows: Vec<Vec<f64>> = spec.eigenvalues.iter().enumerate().map(|(j, v)| vec![j as f64, *v]).collect();
            out.push(csv_artifact("eigenvalues.csv", hash, &["j", "lambda"], &rows)?);
            out.push(json_artifact(
                "spectrum.json",
                hash,
                &serde_json::json!({ "L": l, "omega": omega, "N": n, "spectrum": spec, "kernel": kernel }),
            )?);
        }
        Job::Index { l, omegas } => {
            let idx = omegas.par_iter().map(|&w| d_second(w, *l)).collect::<Result<Vec<_>>>()?;
            let rows: Vec<Vec<f64>> =
                idx.iter().map(|s| vec![s.omega, s.k, s.d_prime, s.d_second, s.d_second_fd, s.g, s.h]).collect();
            out.push(csv_artifact("index.csv", hash, &["omega", "k", "d_prime", "d_second", "d_second_fd", "G", "H"], &rows)?);
            out.push(json_artifact("index.json", hash, &idx)?);
        }
        Job::Evolve { l, n, omega, init, eps, amp, seed, t, solver } => {
            let state = if init == "wave" {
                let w = build_wave(*omega, *l, *n)?;
                let base = wave_state(&w);
                let d = random_perturbation(w.grid(), *seed);
                add_scaled(&base, &d, *eps)
            } else {
                let grid = crate::spectral_grid::FourierGrid::new(*l, *n)?;
                let d = random_perturbation(&grid, *seed);
                add_scaled(&SBState::new(0.0, &zero(&grid), &zero(&grid), &zero(&grid))?, &d, *amp)
            };
            let traj = evolve(&state, *t, solver)?;
            let rows: Vec<Vec<f64>> = traj.reports.iter().map(|r| vec![r.time, r.mass, r.energy, r.b_norm]).collect();
            out.push(csv_artifact("conserved.csv", hash, &["time", "mass", "energy", "b_norm"], &rows)?);
            let fin = traj.final_state();
            let u = fin.u();
            let cols = vec![
                u.values().iter().map(|z| z.re).collect(),
                u.values().iter().map(|z| z.im).collect(),
                fin.v().real_values(),
                fin.w().real_values(),
            ];
            out.push(csv_artifact("final_state.csv", hash, &["x", "re_u", "im_u", "v", "w"], &profile_rows(&fin.grid().xs(), &cols))?);
            out.push(json_artifact(
                "evolve.json",
                hash,
                &serde_json::json!({
                    "L": l, "N": n, "T": t, "init": init, "solver": solver,
                    "mass_drift": traj.mass_drift, "energy_drift": traj.energy_drift,
                    "envelope": traj.envelope, "final_time": fin.t,
                }),
            )?);
        }
        Job::Orbital(cfg) => {
            let r = stability_experiment(cfg)?;
            let rows: Vec<Vec<f64>> =
                r.times.iter().zip(&r.distances).map(|(t, d)| vec![*t, d.distance, d.best_phase, d.best_shift]).collect();
            out.push(csv_artifact("orbital.csv", hash, &["time", "distance", "phase", "shift"], &rows)?);
            out.push(json_artifact(
                "orbital.json",
                hash,
                &serde_json::json!({
                    "config": cfg, "max_distance": r.max_distance, "initial_distance": r.initial_distance,
                    "ratio_to_eps": if cfg.eps > 0.0 { r.max_distance / cfg.eps } else { f64::NAN },
                }),
            )?);
        }
        Job::Continue { cfg, profiles } => {
            let br = continue_to(cfg)?;
            let ext = |f: &crate::spectral_grid::SpectralField| {
                let v = f.real_values();
                (v.iter().copied().fold(f64::INFINITY, f64::min), v.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            };
            let rows: Vec<Vec<f64>> = br
                .pairs
                .iter()
                .map(|p| {
                    let (a, b) = ext(&p.psi);
                    let (c, d) = ext(&p.phi);
                    vec![p.omega, a, b, c, d, p.residual_norm]
                })
                .collect();
            out.push(csv_artifact("continuation.csv", hash, &["omega", "psi_min", "psi_max", "phi_min", "phi_max", "residual"], &rows)?);
            if *profiles {
                for (j, p) in br.pairs.iter().enumerate() {
                    let cols = vec![p.psi.real_values(), p.phi.real_values()];
                    out.push(csv_artifact(&format!("profiles/profile_{j:03}.csv"), hash, &["x", "psi", "phi"], &profile_rows(&p.grid().xs(), &cols))?);
                }
            }
            out.push(json_artifact(
                "continuation.json",
                hash,
                &serde_json::json!({
                    "config": cfg, "sigma_min_at_one": br.sigma_min_at_one, "aborts": br.aborts,
                    "omegas": br.pairs.iter().map(|p| p.omega).collect::<Vec<_>>(),
                }),
            )?);
        }
        Job::Probe(pr) => match pr {
            Probe::Counterexample { case, k, s, a, b, n_list } => {
                let rep = counterexample_slope(*case, *k, *s, *a, *b, n_list)?;
                let rows: Vec<Vec<f64>> = rep.n_list.iter().zip(&rep.ratios).map(|(n, r)| vec![*n as f64, *r]).collect();
                out.push(csv_artifact("probe.csv", hash, &["N", "ratio"], &rows)?);
                out.push(json_artifact("probe.json", hash, &rep)?);
            }
            Probe::Lemma31 { p, q, distances } => {
                let consts = distances.iter().map(|&d| lemma31_constant(*p, *q, 0.0, d)).collect::<Result<Vec<_>>>()?;
                let rows: Vec<Vec<f64>> = distances.iter().zip(&consts).map(|(d, c)| vec![*d, *c]).collect();
                out.push(csv_artifact("probe.csv", hash, &["distance", "constant"], &rows)?);
                out.push(json_artifact(
                    "probe.json",
                    hash,
                    &serde_json::json!({
                        "probe": "lemma31", "p": p, "q": q, "r": p.min(*q).min(p + q - 1.0),
                        "distances": distances, "constants": consts,
                        "max_constant": consts.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    }),
                )?);
            }
            Probe::Lemma32 { gamma, n_grid, tau_samples, n1_max } => {
                let rep = lemma32_sup(*gamma, *n_grid, *tau_samples, *n1_max)?;
                out.push(json_artifact("probe.json", hash, &serde_json::json!({ "probe": "lemma32", "report": rep, "saturated": rep.saturated() }))?);
            }
            Probe::Lemma33 { x_max, y_max, n_points } => {
                let (sup, inf) = lemma33_sup(*x_max, *y_max, *n_points)?;
                out.push(json_artifact(
                    "probe.json",
                    hash,
                    &serde_json::json!({ "probe": "lemma33", "x_max": x_max, "y_max": y_max, "n_points": n_points, "sup_ratio": sup, "inf_ratio": inf }),
                )?);
            }
            Probe::Bilinear { s, a, b, trials, seed, h } => {
                let rep = bilinear_ratio_sample(*s, *a, *b, *trials, *seed, *h)?;
                out.push(json_artifact("probe.json", hash, &rep)?);
            }
        },
    }
    Ok(out)
}

fn zero(grid: &std::sync::Arc<crate::spectral_grid::FourierGrid>) -> crate::spectral_grid::SpectralField {
    crate::spectral_grid::SpectralField::zeros(grid)
}

fn add_scaled(base: &SBState, d: &SBState, eps: f64) -> SBState {
    let mut s = base.clone();
    for (x, y) in [(&mut s.u_hat, &d.u_hat), (&mut s.v_hat, &d.v_hat), (&mut s.w_hat, &d.w_hat)] {
        for (a, b) in x.iter_mut().zip(y) {
            *a += eps * b;
        }
    }
    s
}

/// Result of a successful run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
}

/// Output directory: `out=` beats `$SBWAVE_OUT` beats the default.
pub fn resolve_out(cfg: &RunConfig, env_out: Option<&str>) -> PathBuf {
    cfg.out
        .clone()
        .or_else(|| env_out.filter(|s| !s.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn manifest(command: Command, params: &BTreeMap<String, String>, hash: &str, outputs: &[Artifact], start: Instant) -> Result<Artifact> {
    let m = Manifest {
        command: command.to_string(),
        config: params.clone(),
        config_hash: hash.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        outputs: outputs.iter().map(|a| a.name.clone()).collect(),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    json_artifact("manifest.json", hash, &m)
}

/// Validates, computes and writes one invocation (or a sweep of them).
pub fn run(cfg: &RunConfig, env_out: Option<&str>) -> Result<RunSummary> {
    let start = Instant::now();
    let out_dir = resolve_out(cfg, env_out);
    let runs: Vec<(String, BTreeMap<String, String>)> = match &cfg.sweep {
        None => vec![(String::new(), cfg.params.clone())],
        Some((k, vs)) => vs
            .iter()
            .map(|v| {
                let mut p = cfg.params.clone();
                p.insert(k.clone(), v.clone());
                (format!("{k}={v}/"), p)
            })
            .collect(),
    };
    let jobs = runs.iter().map(|(_, p)| validate(cfg.command, p)).collect::<Result<Vec<_>>>()?;
    let results = runs
        .par_iter()
        .zip(jobs.par_iter())
        .map(|((prefix, params), job)| {
            let hash = config_hash(&cfg.command.to_string(), params);
            let mut arts = execute(job, &hash)?;
            arts.push(manifest(cfg.command, params, &hash, &arts, start)?);
            for a in arts.iter_mut() {
                a.name = format!("{prefix}{}", a.name);
            }
            Ok(arts)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut all: Vec<Artifact> = results.into_iter().flatten().collect();
    if cfg.sweep.is_some() {
        let mut top = cfg.params.clone();
        if let Some((k, vs)) = &cfg.sweep {
            top.insert("sweep".into(), format!("{k}:{}", vs.join(",")));
        }
        let m = manifest(cfg.command, &top, &config_hash(&cfg.command.to_string(), &top), &all, start)?;
        all.push(m);
    }
    let files = write_all(&out_dir, &all)?;
    Ok(RunSummary { out_dir, files })
}

/// Exit status for an error: 3 numeric, 2 validation, 1 I/O.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numeric() {
        3
    } else if matches!(e, Error::Io(_) | Error::Json(_)) {
        1
    } else {
        2
    }
}

/// Machine-readable error record.
pub fn error_record(e: &Error) -> String {
    serde_json::json!({ "error": e.kind(), "message": e.to_string(), "exit_code": exit_code(e) }).to_string()
}

/// Entry point used by the binary; returns the process exit status.
pub fn main_with_args<S: AsRef<str>>(args: &[S]) -> i32 {
    let env_out = std::env::var(OUT_ENV).ok();
    match RunConfig::from_args(args).and_then(|cfg| run(&cfg, env_out.as_deref())) {
        Ok(summary) => {
            for f in &summary.files {
                println!("{}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("{}", error_record(&e));
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(args: &[&str]) -> Result<RunConfig> {
        RunConfig::from_args(args)
    }

    #[test]
    fn parses_key_values() {
        let c = cfg(&["wave", "L=13", "omega=1", "N=64", "out=/tmp/x"]).unwrap();
        assert_eq!(c.command, Command::Wave);
        assert_eq!(c.params.get("L").map(String::as_str), Some("13"));
        assert_eq!(c.out, Some(PathBuf::from("/tmp/x")));
        assert!(!c.params.contains_key("out"));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(cfg(&["nope"]), Err(Error::Usage(_))));
        assert!(matches!(cfg(&["wave", "L"]), Err(Error::Usage(_))));
        assert!(matches!(cfg(&["wave", "bogus=1"]), Err(Error::Usage(_))));
        assert!(matches!(cfg(&["wave", "L=1", "L=2"]), Err(Error::Usage(_))));
        let c = cfg(&["wave", "L=13"]).unwrap();
        assert!(matches!(validate(c.command, &c.params), Err(Error::Usage(_))));
        let c = cfg(&["wave", "L=3", "omega=1"]).unwrap();
        assert!(matches!(validate(c.command, &c.params), Err(Error::Domain(_))));
    }

    #[test]
    fn out_precedence() {
        let with = cfg(&["wave", "out=a"]).unwrap();
        let without = cfg(&["wave"]).unwrap();
        assert_eq!(resolve_out(&with, Some("b")), PathBuf::from("a"));
        assert_eq!(resolve_out(&without, Some("b")), PathBuf::from("b"));
        assert_eq!(resolve_out(&without, None), PathBuf::from(DEFAULT_OUT));
    }

    #[test]
    fn ini_file_is_overridden_by_flags() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.ini");
        std::fs::write(&p, "L = 13\nomega = 2\n[wave]\nN = 64\n").unwrap();
        let c = cfg(&["wave", &format!("config={}", p.display()), "omega=1"]).unwrap();
        assert_eq!(c.params["omega"], "1");
        assert_eq!(c.params["N"], "64");
        assert_eq!(c.params["L"], "13");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Usage("x".into())), 2);
        assert_eq!(exit_code(&Error::Divergence { omega: 1.0, history: vec![] }), 3);
        let rec: serde_json::Value = serde_json::from_str(&error_record(&Error::Domain("d".into()))).unwrap();
        assert_eq!(rec["exit_code"], 2);
        assert_eq!(rec["error"], "domain");
    }
}
