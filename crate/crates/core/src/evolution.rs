//! Lawson–RK4 pseudospectral integrator for
//!
//! ```text
//! i u_t + u_xx = α v u,
//! v_t = w_x,   w_t = v_x − v_xxx + β (|u|²)_x,
//! ```
//!
//! the first-order form of `v_tt − v_xx + v_xxxx = β(|u|²)_xx`. The linear
//! part is integrated exactly mode by mode; only the quadratic terms go
//! through the Runge–Kutta stages.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::functionals::{b_norm_coeffs, energy, mass_coeffs, ConservedReport};
use crate::spectral_grid::{FourierGrid, SpectralField};
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const BLOWUP_LIMIT: f64 = 1e150;

/// `(u, v, w)` in Fourier space at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SBState {
    pub t: f64,
    grid: Arc<FourierGrid>,
    pub u_hat: Vec<Complex64>,
    pub v_hat: Vec<Complex64>,
    pub w_hat: Vec<Complex64>,
}

fn hermitian(c: &mut [Complex64]) {
    let n = c.len();
    for j in 0..=n / 2 {
        let m = (n - j) % n;
        let avg = 0.5 * (c[j] + c[m].conj());
        c[j] = avg;
        c[m] = avg.conj();
    }
}

impl SBState {
    /// State from fields; `w` must have zero mean.
    pub fn new(t: f64, u: &SpectralField, v: &SpectralField, w: &SpectralField) -> Result<Self> {
        let grid = u.grid().clone();
        if **v.grid() != *grid || **w.grid() != *grid {
            return Err(Error::Usage("u, v, w must share one grid".into()));
        }
        let scale = w.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
        if w.mean().norm() > 1e-12 * (1.0 + scale) {
            return Err(Error::Usage(format!("w must have zero mean, got {}", w.mean())));
        }
        let mut s = Self {
            t,
            grid,
            u_hat: u.coeffs().to_vec(),
            v_hat: v.coeffs().to_vec(),
            w_hat: w.coeffs().to_vec(),
        };
        s.w_hat[0] = ZERO;
        hermitian(&mut s.v_hat);
        hermitian(&mut s.w_hat);
        Ok(s)
    }

    /// Initial data `(u₀, v₀, v₁)` with `v_t(0) = v₁`: `w(0)` is `v₁` minus its mean.
    pub fn from_data(u0: &SpectralField, v0: &SpectralField, v1: &SpectralField) -> Result<Self> {
        let mut c = v1.coeffs().to_vec();
        c[0] = ZERO;
        let w = SpectralField::from_coeffs(v1.grid(), c, true)?;
        Self::new(0.0, u0, v0, &w)
    }

    pub fn grid(&self) -> &Arc<FourierGrid> {
        &self.grid
    }

    pub fn u(&self) -> SpectralField {
        SpectralField::from_coeffs(&self.grid, self.u_hat.clone(), false).unwrap()
    }

    pub fn v(&self) -> SpectralField {
        SpectralField::from_coeffs(&self.grid, self.v_hat.clone(), true).unwrap()
    }

    pub fn w(&self) -> SpectralField {
        SpectralField::from_coeffs(&self.grid, self.w_hat.clone(), true).unwrap()
    }

    /// `v_t = ∂ₓw`.
    pub fn v_t(&self) -> SpectralField {
        self.w().derivative_unchecked(1)
    }

    fn is_finite(&self) -> bool {
        let ok = |c: &[Complex64]| c.iter().all(|z| z.re.is_finite() && z.im.is_finite() && z.norm() < BLOWUP_LIMIT);
        ok(&self.u_hat) && ok(&self.v_hat) && ok(&self.w_hat)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub alpha: f64,
    pub beta: f64,
    pub dealias: bool,
    /// Steps between conserved-quantity reports.
    pub monitor_stride: usize,
    /// Sobolev index of the 𝔅-norm monitor.
    pub s_index: f64,
    /// Allowed mass drift per unit time; `evolve` fails beyond it.
    pub mass_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { dt: 1e-3, alpha: -1.0, beta: -1.0, dealias: true, monitor_stride: 100, s_index: 0.0, mass_tol: 1e-10 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Domain(format!("dt = {} must be positive", self.dt)));
        }
        if self.monitor_stride == 0 {
            return Err(Error::Domain("monitor_stride must be ≥ 1".into()));
        }
        if !(self.alpha.is_finite() && self.beta.is_finite()) {
            return Err(Error::Domain("α and β must be finite".into()));
        }
        Ok(())
    }
}

/// Per-mode data of the linear flow.
#[derive(Debug, Clone)]
pub struct LinearSymbols {
    /// `ξ_n` with the Nyquist mode set to zero (odd-order symbol).
    pub xi_odd: Vec<f64>,
    /// Schrödinger phase rate `−ξ_n²`.
    pub schrodinger: Vec<f64>,
    /// Boussinesq frequency `μ_n = |ξ_n|·√(1 + ξ_n²)`.
    pub mu: Vec<f64>,
}

pub fn linear_symbols(grid: &FourierGrid) -> LinearSymbols {
    let nyq = grid.nyquist_slot();
    let xi = grid.wavenumbers();
    let xi_odd: Vec<f64> = xi.iter().enumerate().map(|(j, &x)| if j == nyq { 0.0 } else { x }).collect();
    LinearSymbols {
        schrodinger: xi.iter().map(|x| -x * x).collect(),
        mu: xi_odd.iter().map(|x| x.abs() * (1.0 + x * x).sqrt()).collect(),
        xi_odd,
    }
}

/// Exact linear flow over a fixed time `h`.
#[derive(Debug, Clone)]
struct Propagator {
    u: Vec<Complex64>,
    vv: Vec<f64>,
    vw: Vec<Complex64>,
    wv: Vec<Complex64>,
}

impl Propagator {
    fn new(sym: &LinearSymbols, h: f64) -> Self {
        let n = sym.mu.len();
        let mut vw = vec![ZERO; n];
        let mut wv = vec![ZERO; n];
        let mut vv = vec![1.0; n];
        for j in 0..n {
            let mu = sym.mu[j];
            if mu > 0.0 {
                let xi = sym.xi_odd[j];
                let (s, c) = (mu * h).sin_cos();
                vv[j] = c;
                vw[j] = Complex64::new(0.0, xi * s / mu);
                wv[j] = Complex64::new(0.0, xi * (1.0 + xi * xi) * s / mu);
            }
        }
        Self { u: sym.schrodinger.iter().map(|&p| Complex64::from_polar(1.0, p * h)).collect(), vv, vw, wv }
    }

    fn apply(&self, y: &Triple) -> Triple {
        let n = y.0.len();
        let mut out = Triple(vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]);
        for j in 0..n {
            out.0[j] = self.u[j] * y.0[j];
            out.1[j] = self.vv[j] * y.1[j] + self.vw[j] * y.2[j];
            out.2[j] = self.wv[j] * y.1[j] + self.vv[j] * y.2[j];
        }
        out
    }
}

#[derive(Debug, Clone)]
struct Triple(Vec<Complex64>, Vec<Complex64>, Vec<Complex64>);

impl Triple {
    fn axpy(&self, a: f64, x: &Triple) -> Triple {
        let f = |p: &[Complex64], q: &[Complex64]| p.iter().zip(q).map(|(p, q)| p + a * q).collect();
        Triple(f(&self.0, &x.0), f(&self.1, &x.1), f(&self.2, &x.2))
    }
}

/// Reusable stepper with cached propagators for a fixed step size.
#[derive(Debug, Clone)]
pub struct Stepper {
    grid: Arc<FourierGrid>,
    sym: LinearSymbols,
    cfg: SolverConfig,
    h: f64,
    full: Propagator,
    half: Propagator,
    mask: Vec<bool>,
}

impl Stepper {
    pub fn new(grid: &Arc<FourierGrid>, cfg: SolverConfig, h: f64) -> Result<Self> {
        cfg.validate()?;
        let sym = linear_symbols(grid);
        Ok(Self {
            grid: grid.clone(),
            full: Propagator::new(&sym, h),
            half: Propagator::new(&sym, 0.5 * h),
            mask: (0..grid.len()).map(|j| !cfg.dealias || grid.dealias_mask(j)).collect(),
            sym,
            cfg,
            h,
        })
    }

    fn nonlinear(&self, y: &Triple) -> Triple {
        let n = self.grid.len();
        let u = self.grid.inverse(&y.0);
        let v = self.grid.inverse(&y.1);
        let vu: Vec<Complex64> = u.iter().zip(&v).map(|(a, b)| a * b.re).collect();
        let uu: Vec<Complex64> = u.iter().map(|a| Complex64::new(a.norm_sqr(), 0.0)).collect();
        let vu_hat = self.grid.forward(&vu);
        let uu_hat = self.grid.forward(&uu);
        let mut out = Triple(vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]);
        let ia = Complex64::new(0.0, -self.cfg.alpha);
        for j in 0..n {
            if self.mask[j] {
                out.0[j] = ia * vu_hat[j];
                out.2[j] = Complex64::new(0.0, self.sym.xi_odd[j] * self.cfg.beta) * uu_hat[j];
            }
        }
        out
    }

    /// One Lawson–RK4 step of size `h`.
    pub fn step(&self, state: &SBState) -> Result<SBState> {
        let h = self.h;
        let y = Triple(state.u_hat.clone(), state.v_hat.clone(), state.w_hat.clone());
        let k1 = self.nonlinear(&y);
        let k2 = self.nonlinear(&self.half.apply(&y.axpy(0.5 * h, &k1)));
        let ey_half = self.half.apply(&y);
        let k3 = self.nonlinear(&ey_half.axpy(0.5 * h, &k2));
        let k4 = self.nonlinear(&self.full.apply(&y).axpy(h, &self.half.apply(&k3)));
        let mid = self.half.apply(&k2.axpy(1.0, &k3));
        let out = self.full.apply(&y).axpy(h / 6.0, &self.full.apply(&k1)).axpy(h / 3.0, &mid).axpy(h / 6.0, &k4);
        let mut next = SBState { t: state.t + h, grid: self.grid.clone(), u_hat: out.0, v_hat: out.1, w_hat: out.2 };
        hermitian(&mut next.v_hat);
        hermitian(&mut next.w_hat);
        next.w_hat[0] = ZERO;
        if !next.is_finite() {
            return Err(Error::BlowUp {
                t: next.t,
                reason: "non-finite or overflowing Fourier coefficients".into(),
                last_finite: Box::new(state.clone()),
            });
        }
        Ok(next)
    }
}

/// One step of size `cfg.dt`.
pub fn step(state: &SBState, cfg: &SolverConfig) -> Result<SBState> {
    Stepper::new(state.grid(), *cfg, cfg.dt)?.step(state)
}

/// Monitored growth of the 𝔅-norm against the exponential envelope
/// `e^{(ln 2)‖u₀‖²t}·max{‖v₀,v₁‖_𝔅, ‖u₀‖}`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnvelopeReport {
    pub u0_norm: f64,
    pub data_norm: f64,
    /// `max_t ‖v(t)‖_𝔅 / envelope(t)`, the smallest constant that works.
    pub c_observed: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// States at the monitor times (including the start and the end).
    pub snapshots: Vec<SBState>,
    pub reports: Vec<ConservedReport>,
    pub mass_drift: f64,
    pub energy_drift: f64,
    pub envelope: EnvelopeReport,
}

impl Trajectory {
    pub fn final_state(&self) -> &SBState {
        self.snapshots.last().expect("trajectory holds the initial state")
    }
}

fn report(state: &SBState, cfg: &SolverConfig) -> ConservedReport {
    ConservedReport {
        time: state.t,
        mass: mass_coeffs(&state.u_hat, state.grid()),
        energy: energy(state),
        b_norm: b_norm_coeffs(&state.v_hat, &state.w_hat, state.grid(), cfg.s_index),
    }
}

/// Integrates to `state.t + T` with steps no larger than `cfg.dt`.
pub fn evolve(state: &SBState, t_final: f64, cfg: &SolverConfig) -> Result<Trajectory> {
    if !(t_final.is_finite() && t_final > 0.0) {
        return Err(Error::Domain(format!("evolution time T = {t_final} must be positive")));
    }
    cfg.validate()?;
    let steps = (t_final / cfg.dt - 1e-9).ceil().max(1.0) as usize;
    let h = t_final / steps as f64;
    let stepper = Stepper::new(state.grid(), *cfg, h)?;
    let grid = state.grid().clone();

    let u0 = state.u();
    let u0_norm = u0.sobolev_norm(cfg.s_index);
    let data_norm = data_b_norm(state, cfg.s_index);
    let base = data_norm.max(u0_norm);
    let growth = std::f64::consts::LN_2 * u0_norm * u0_norm;
    let t0 = state.t;
    let ratio = |r: &ConservedReport| if base > 0.0 { r.b_norm / (base * (growth * (r.time - t0)).exp()) } else { 0.0 };

    let mut current = state.clone();
    let first = report(&current, cfg);
    let mut c_observed = ratio(&first);
    let mut reports = vec![first];
    let mut snapshots = vec![current.clone()];
    for i in 1..=steps {
        current = stepper.step(&current)?;
        if i % cfg.monitor_stride == 0 || i == steps {
            if i == steps {
                current.t = t0 + t_final;
            }
            let r = report(&current, cfg);
            c_observed = c_observed.max(ratio(&r));
            reports.push(r);
            snapshots.push(current.clone());
        }
    }
    let m0 = reports[0].mass;
    let e0 = reports[0].energy;
    let mass_drift = reports.iter().map(|r| (r.mass - m0).abs()).fold(0.0, f64::max);
    let energy_drift = reports.iter().map(|r| (r.energy - e0).abs()).fold(0.0, f64::max);
    if mass_drift > cfg.mass_tol * t_final {
        return Err(Error::Conservation(format!(
            "mass drift {mass_drift:.3e} exceeds {:.1e}·T over T = {t_final} (N = {}, dt = {h})",
            cfg.mass_tol,
            grid.len()
        )));
    }
    Ok(Trajectory {
        snapshots,
        reports,
        mass_drift,
        energy_drift,
        envelope: EnvelopeReport { u0_norm, data_norm, c_observed },
    })
}

/// `‖v₀, v₁‖_𝔅 = (‖v₀‖²_{H^s} + ‖v₁‖²_{H^{s−1}})^{1/2}` with `v₁ = w₀`.
pub fn data_b_norm(state: &SBState, s: f64) -> f64 {
    state.v().sobolev_norm(s).hypot(state.w().sobolev_norm(s - 1.0))
}
