//! Distance to the symmetry orbit of a standing wave in `X = H¹ × H¹ × L²`
//! and perturbation experiments around `(e^{it}ψ₁, ψ₁)`.
//!
//! The orbit of a state `(u, v, v_t)` is `{(e^{is}u(·+y), v(·+y), v_t(·+y))}`.
//! For a fixed shift the optimal phase is explicit, so only a one-dimensional
//! search over `y` remains.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::cnoidal::{build_wave, WaveProfile};
use crate::evolution::{SBState, SolverConfig, Stepper};
use crate::spectral_grid::{bracket, FourierGrid, SpectralField};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrbitalDistanceResult {
    pub distance: f64,
    /// In `[0, 2π)`.
    pub best_phase: f64,
    /// In `[0, L)`.
    pub best_shift: f64,
    /// Distance without any symmetry applied.
    pub raw_distance: f64,
}

/// Weighted correlation data for one pair of states.
struct Correlation {
    xi: Vec<f64>,
    /// `⟨n⟩² û conj(û_ref)`.
    a: Vec<Complex64>,
    /// `⟨n⟩² v̂ conj(v̂_ref) + v̂_t conj(v̂_t,ref)`.
    b: Vec<Complex64>,
}

impl Correlation {
    /// `(c, c′, c″, d, d′, d″)` at shift `y`, where `c = Σ a e^{−iξy}` and `d = Σ b e^{−iξy}`.
    fn eval(&self, y: f64) -> [Complex64; 6] {
        let mut out = [Complex64::new(0.0, 0.0); 6];
        for ((&xi, a), b) in self.xi.iter().zip(&self.a).zip(&self.b) {
            let e = Complex64::from_polar(1.0, -xi * y);
            let d1 = Complex64::new(0.0, -xi);
            let d2 = -xi * xi;
            out[0] += a * e;
            out[1] += a * e * d1;
            out[2] += a * e * d2;
            out[3] += b * e;
            out[4] += b * e * d1;
            out[5] += b * e * d2;
        }
        out
    }

    /// Objective to maximize: `2|c(y)| + 2 Re d(y)`, with first and second derivatives.
    fn gain(&self, y: f64) -> (f64, f64, f64) {
        let [c, c1, c2, d, d1, d2] = self.eval(y);
        let m = c.norm();
        if m == 0.0 {
            return (2.0 * d.re, 2.0 * d1.re, 2.0 * d2.re);
        }
        let p = (c.conj() * c1).re;
        let m1 = p / m;
        let m2 = (c1.norm_sqr() + (c.conj() * c2).re) / m - p * p / (m * m * m);
        (2.0 * (m + d.re), 2.0 * (m1 + d1.re), 2.0 * (m2 + d2.re))
    }
}

fn odd_wavenumbers(grid: &FourierGrid) -> Vec<f64> {
    let nyq = grid.nyquist_slot();
    (0..grid.len()).map(|j| if j == nyq { 0.0 } else { grid.wavenumber(j) }).collect()
}

fn weights(grid: &FourierGrid, s: f64) -> Vec<f64> {
    (0..grid.len()).map(|j| bracket(grid.index(j) as f64).powf(2.0 * s)).collect()
}

fn v_t_coeffs(state: &SBState, xi: &[f64]) -> Vec<Complex64> {
    state.w_hat.iter().zip(xi).map(|(w, &x)| Complex64::new(0.0, x) * w).collect()
}

/// `‖(u − e^{is}u_ref(·+y), v − v_ref(·+y), v_t − v_t,ref(·+y))‖_X`, computed directly.
fn direct_distance(state: &SBState, reference: &SBState, s: f64, y: f64) -> f64 {
    let grid = state.grid();
    let xi = odd_wavenumbers(grid);
    let w1 = weights(grid, 1.0);
    let vt = v_t_coeffs(state, &xi);
    let vt_ref = v_t_coeffs(reference, &xi);
    let phase = Complex64::from_polar(1.0, s);
    let mut total = 0.0;
    for j in 0..grid.len() {
        let e = Complex64::from_polar(1.0, xi[j] * y);
        total += w1[j] * (state.u_hat[j] - phase * e * reference.u_hat[j]).norm_sqr();
        total += w1[j] * (state.v_hat[j] - e * reference.v_hat[j]).norm_sqr();
        total += (vt[j] - e * vt_ref[j]).norm_sqr();
    }
    total.sqrt()
}

/// `‖(u, v, v_t)‖_X`.
pub fn x_norm(state: &SBState) -> f64 {
    let grid = state.grid();
    let xi = odd_wavenumbers(grid);
    let w1 = weights(grid, 1.0);
    let vt = v_t_coeffs(state, &xi);
    (0..grid.len())
        .map(|j| w1[j] * (state.u_hat[j].norm_sqr() + state.v_hat[j].norm_sqr()) + vt[j].norm_sqr())
        .sum::<f64>()
        .sqrt()
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Distance from `state` to the symmetry orbit of `reference`.
pub fn orbit_distance(state: &SBState, reference: &SBState) -> Result<OrbitalDistanceResult> {
    let grid = state.grid().clone();
    if **reference.grid() != *grid {
        return Err(Error::Usage("state and reference live on different grids".into()));
    }
    let n = grid.len();
    let l = grid.period();
    let xi = odd_wavenumbers(&grid);
    let w1 = weights(&grid, 1.0);
    let vt = v_t_coeffs(state, &xi);
    let vt_ref = v_t_coeffs(reference, &xi);
    let corr = Correlation {
        a: (0..n).map(|j| w1[j] * state.u_hat[j] * reference.u_hat[j].conj()).collect(),
        b: (0..n).map(|j| w1[j] * state.v_hat[j] * reference.v_hat[j].conj() + vt[j] * vt_ref[j].conj()).collect(),
        xi,
    };

    // Coarse scan: c and d on the N grid shifts by one FFT each.
    let scale = n as f64;
    let c_grid = grid.forward(&corr.a);
    let d_grid = grid.forward(&corr.b);
    let coarse = |j: usize| 2.0 * scale * (c_grid[j].norm() + d_grid[j].re);
    let j_best = (0..n).max_by(|&i, &j| coarse(i).total_cmp(&coarse(j))).unwrap_or(0);
    let dx = grid.spacing();
    let y0 = j_best as f64 * dx;

    // Golden-section on the bracketing cell pair.
    let (mut lo, mut hi) = (y0 - dx, y0 + dx);
    let f = |y: f64| corr.gain(y).0;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-8 * l.max(1.0) {
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    let mut y = 0.5 * (lo + hi);
    // Newton on the stationarity condition removes the √ε floor of golden-section.
    for _ in 0..4 {
        let (_, g1, g2) = corr.gain(y);
        if g2 >= 0.0 || !g1.is_finite() {
            break;
        }
        let next = y - g1 / g2;
        if (next - y).abs() > dx || f(next) < f(y) - 1e-14 * f(y).abs() {
            break;
        }
        y = next;
    }
    let y_best = y.rem_euclid(l);
    let c = corr.eval(y_best)[0];
    let s_best = if c.norm() > 0.0 { c.arg().rem_euclid(2.0 * PI) } else { 0.0 };
    let mut distance = direct_distance(state, reference, s_best, y_best);
    let raw_distance = direct_distance(state, reference, 0.0, 0.0);
    let mut best_shift = y_best;
    let mut best_phase = s_best;
    if raw_distance < distance {
        distance = raw_distance;
        best_shift = 0.0;
        best_phase = 0.0;
    }
    Ok(OrbitalDistanceResult { distance, best_phase, best_shift, raw_distance })
}

/// Reference state `(ψ_ω, ψ_ω, 0)` of a cnoidal wave.
pub fn wave_state(wave: &WaveProfile) -> SBState {
    let zero = SpectralField::zeros(wave.grid());
    SBState::new(0.0, &wave.field, &wave.field, &zero).expect("cnoidal wave is a valid state")
}

/// Orbital distance of `state` from the wave `(ψ_ω, ψ_ω, 0)`.
pub fn x_distance(state: &SBState, wave: &WaveProfile) -> Result<OrbitalDistanceResult> {
    orbit_distance(state, &wave_state(wave))
}

/// Applies the symmetry `(e^{is}u(·+y), v(·+y), w(·+y))`.
pub fn transform(state: &SBState, phase: f64, shift: f64) -> SBState {
    let grid = state.grid();
    let xi = odd_wavenumbers(grid);
    let mut out = state.clone();
    let p = Complex64::from_polar(1.0, phase);
    for j in 0..grid.len() {
        let e = Complex64::from_polar(1.0, xi[j] * shift);
        out.u_hat[j] = p * e * state.u_hat[j];
        out.v_hat[j] = e * state.v_hat[j];
        out.w_hat[j] = e * state.w_hat[j];
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Perturbation {
    /// Seeded Gaussian trigonometric polynomial on `|n| ≤ N/4`.
    Random,
    /// `∂_ω(ψ_ω, ψ_ω, 0)` at `ω = 1`.
    BranchTangent,
}

/// Random perturbation `(δu, δv, δw)` scaled to X-norm one.
pub fn random_perturbation(grid: &Arc<FourierGrid>, seed: u64) -> SBState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.len();
    let cutoff = (n / 4) as i64;
    let mut draw = |real: bool, zero_mean: bool| {
        let mut c = vec![Complex64::new(0.0, 0.0); n];
        for k in -cutoff..=cutoff {
            if zero_mean && k == 0 {
                continue;
            }
            let w = 1.0 / bracket(k as f64).powi(2);
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            c[grid.slot(k).unwrap()] = Complex64::new(w * re, w * im);
        }
        SpectralField::from_coeffs(grid, c, real).unwrap()
    };
    let du = draw(false, false);
    let dv = draw(true, false);
    let dw = draw(true, true);
    normalized(SBState::new(0.0, &du, &dv, &dw).unwrap())
}

fn normalized(mut p: SBState) -> SBState {
    let norm = x_norm(&p);
    for c in p.u_hat.iter_mut().chain(p.v_hat.iter_mut()).chain(p.w_hat.iter_mut()) {
        *c /= norm;
    }
    p
}

/// Branch tangent `∂_ω(ψ_ω, ψ_ω, 0)` at `ω = 1` scaled to X-norm one.
pub fn branch_tangent(period_l: f64, n_modes: usize) -> Result<SBState> {
    let h = 1e-4;
    let plus = build_wave(1.0 + h, period_l, n_modes)?;
    let minus = build_wave(1.0 - h, period_l, n_modes)?;
    let d = plus.field.sub(&minus.field)?.scale(Complex64::new(0.5 / h, 0.0));
    let zero = SpectralField::zeros(plus.grid());
    Ok(normalized(SBState::new(0.0, &d, &d, &zero)?))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExperimentConfig {
    #[serde(rename = "L")]
    pub period: f64,
    #[serde(rename = "N")]
    pub n_modes: usize,
    pub eps: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub n_snapshots: usize,
    pub seed: u64,
    pub perturbation: Perturbation,
    pub solver: SolverConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            period: 13.0,
            n_modes: 128,
            eps: 1e-3,
            t_final: 50.0,
            n_snapshots: 101,
            seed: 0,
            perturbation: Perturbation::Random,
            solver: SolverConfig { dt: 2e-3, ..Default::default() },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub times: Vec<f64>,
    pub distances: Vec<OrbitalDistanceResult>,
    pub max_distance: f64,
    /// Orbital distance of the initial datum.
    pub initial_distance: f64,
}

/// Evolves `(ψ₁, ψ₁, 0) + eps·p` and records its distance to the orbit of the wave.
pub fn stability_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    if !(cfg.eps.is_finite() && cfg.eps >= 0.0) {
        return Err(Error::Domain(format!("eps = {} must be non-negative", cfg.eps)));
    }
    if cfg.n_snapshots < 2 {
        return Err(Error::Domain("n_snapshots must be ≥ 2".into()));
    }
    if !(cfg.t_final.is_finite() && cfg.t_final > 0.0) {
        return Err(Error::Domain(format!("T = {} must be positive", cfg.t_final)));
    }
    if cfg.solver.alpha != -1.0 || cfg.solver.beta != -1.0 {
        return Err(Error::Domain("the standing wave (e^{it}ψ, ψ) requires α = β = −1".into()));
    }
    let wave = build_wave(1.0, cfg.period, cfg.n_modes)?;
    let reference = wave_state(&wave);
    let dir = match cfg.perturbation {
        Perturbation::Random => random_perturbation(wave.grid(), cfg.seed),
        Perturbation::BranchTangent => branch_tangent(cfg.period, cfg.n_modes)?,
    };
    let mut state = reference.clone();
    for (x, d) in [(&mut state.u_hat, &dir.u_hat), (&mut state.v_hat, &dir.v_hat), (&mut state.w_hat, &dir.w_hat)] {
        for (a, b) in x.iter_mut().zip(d) {
            *a += cfg.eps * b;
        }
    }

    let segments = cfg.n_snapshots - 1;
    let seg_len = cfg.t_final / segments as f64;
    let per = (seg_len / cfg.solver.dt - 1e-9).ceil().max(1.0) as usize;
    let stepper = Stepper::new(wave.grid(), cfg.solver, seg_len / per as f64)?;
    let mut times = vec![0.0];
    let mut distances = vec![x_distance(&state, &wave)?];
    for seg in 1..=segments {
        for _ in 0..per {
            state = stepper.step(&state)?;
        }
        state.t = seg as f64 * seg_len;
        times.push(state.t);
        distances.push(x_distance(&state, &wave)?);
    }
    let max_distance = distances.iter().map(|d| d.distance).fold(0.0, f64::max);
    Ok(ExperimentResult { config: *cfg, initial_distance: distances[0].distance, times, distances, max_distance })
}

/// Runs independent experiments concurrently.
pub fn stability_sweep(configs: &[ExperimentConfig]) -> Result<Vec<ExperimentResult>> {
    configs.par_iter().map(stability_experiment).collect()
}
