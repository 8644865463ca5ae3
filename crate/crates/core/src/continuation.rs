//! Even periodic solutions of the coupled profile system
//!
//! ```text
//! Φ(ω, ψ, φ) = (−ψ″ + ωψ − ψφ, −φ″ + φ − ψ²) = 0
//! ```
//!
//! near `(1, ψ₁, ψ₁)`, by Newton's method in the cosine-coefficient space and
//! natural-parameter continuation in `ω`. Restricting to even functions
//! removes the translation kernel `ψ₁′`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::cnoidal::build_wave;
use crate::spectral_grid::{FourierGrid, SpectralField};
use crate::{Error, Result};

const NEWTON_TOL: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 20;

#[derive(Debug, Clone)]
pub struct SolutionPair {
    pub omega: f64,
    pub psi: SpectralField,
    pub phi: SpectralField,
    /// Sup norm of the residual.
    pub residual_norm: f64,
    pub iterations: usize,
}

impl SolutionPair {
    /// Pair with its residual evaluated.
    pub fn new(omega: f64, psi: SpectralField, phi: SpectralField) -> Result<Self> {
        let (r1, r2) = residual(omega, &psi, &phi)?;
        let residual_norm = r1.sup_norm().max(r2.sup_norm());
        Ok(Self { omega, psi, phi, residual_norm, iterations: 0 })
    }

    pub fn grid(&self) -> &Arc<FourierGrid> {
        self.psi.grid()
    }
}

/// Half-spectrum size: cosine modes `0..N/2` (Nyquist excluded).
fn half(grid: &FourierGrid) -> usize {
    grid.len() / 2
}

fn check_even(f: &SpectralField, name: &str) -> Result<()> {
    let peak = f.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
    let g = f.grid();
    let mut worst = 0.0_f64;
    for n in 1..(g.len() / 2) as i64 {
        worst = worst.max((f.coeff(n) - f.coeff(-n)).norm());
    }
    for c in f.coeffs() {
        worst = worst.max(c.im.abs());
    }
    if worst > 1e-10 * peak.max(1e-300) {
        return Err(Error::Domain(format!("{name} is not even about x = 0 (defect {worst:.3e})")));
    }
    Ok(())
}

fn cosine_coeffs(f: &SpectralField) -> Vec<f64> {
    (0..half(f.grid()) as i64).map(|n| f.coeff(n).re).collect()
}

fn from_cosine(grid: &Arc<FourierGrid>, c: &[f64]) -> SpectralField {
    let n = grid.len();
    let mut full = vec![Complex64::new(0.0, 0.0); n];
    for (k, &v) in c.iter().enumerate() {
        full[k] = Complex64::new(v, 0.0);
        if k > 0 {
            full[n - k] = Complex64::new(v, 0.0);
        }
    }
    SpectralField::from_coeffs(grid, full, true).unwrap()
}

fn residual_coeffs(omega: f64, grid: &Arc<FourierGrid>, c: &[f64], d: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let psi = from_cosine(grid, c);
    let phi = from_cosine(grid, d);
    let pf = psi.mul(&phi)?;
    let pp = psi.mul(&psi)?;
    let m = c.len();
    let mut r1 = vec![0.0; m];
    let mut r2 = vec![0.0; m];
    for k in 0..m {
        let xi2 = grid.wavenumber(k).powi(2);
        r1[k] = (xi2 + omega) * c[k] - pf.coeff(k as i64).re;
        r2[k] = (xi2 + 1.0) * d[k] - pp.coeff(k as i64).re;
    }
    Ok((r1, r2))
}

/// `Φ(ω, ψ, φ)` as two fields.
pub fn residual(omega: f64, psi: &SpectralField, phi: &SpectralField) -> Result<(SpectralField, SpectralField)> {
    if **psi.grid() != **phi.grid() {
        return Err(Error::Usage("ψ and φ live on different grids".into()));
    }
    let d2p = psi.derivative_unchecked(2);
    let d2f = phi.derivative_unchecked(2);
    let pf = psi.mul(phi)?;
    let pp = psi.mul(psi)?;
    let g = psi.grid();
    let w = Complex64::new(omega, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let r1 = d2p.scale(-one).add(&psi.scale(w))?.sub(&pf)?;
    let r2 = d2f.scale(-one).add(phi)?.sub(&pp)?;
    debug_assert_eq!(**r1.grid(), **g);
    Ok((r1, r2))
}

/// Multiplication by `q` on cosine coefficients.
fn multiplication(q: &SpectralField, m: usize) -> DMatrix<f64> {
    let qc = |k: i64| if k.unsigned_abs() < (q.grid().len() / 2) as u64 { q.coeff(k).re } else { 0.0 };
    DMatrix::from_fn(m, m, |n, k| {
        let (n, k) = (n as i64, k as i64);
        if k == 0 {
            qc(n)
        } else {
            qc(n - k) + qc(n + k)
        }
    })
}

/// Jacobian `[[−∂² + ω − φ, −ψ], [−2ψ, −∂² + 1]]` on even functions.
pub fn even_jacobian(omega: f64, psi: &SpectralField, phi: &SpectralField) -> DMatrix<f64> {
    let g = psi.grid();
    let m = half(g);
    let mp = multiplication(psi, m);
    let mf = multiplication(phi, m);
    let mut j = DMatrix::zeros(2 * m, 2 * m);
    for r in 0..m {
        let xi2 = g.wavenumber(r).powi(2);
        for c in 0..m {
            j[(r, c)] = -mf[(r, c)];
            j[(r, m + c)] = -mp[(r, c)];
            j[(m + r, c)] = -2.0 * mp[(r, c)];
        }
        j[(r, r)] += xi2 + omega;
        j[(m + r, m + r)] = xi2 + 1.0;
    }
    j
}

/// Smallest singular value of the even Jacobian in the `L²`-orthonormal cosine basis.
pub fn even_jacobian_sigma_min(omega: f64, psi: &SpectralField, phi: &SpectralField) -> f64 {
    let j = even_jacobian(omega, psi, phi);
    let m = j.nrows() / 2;
    let scale = |i: usize| if i.is_multiple_of(m) { 1.0 } else { std::f64::consts::SQRT_2 };
    let jn = DMatrix::from_fn(j.nrows(), j.ncols(), |r, c| j[(r, c)] * scale(r) / scale(c));
    jn.singular_values().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Newton iteration from `guess` to a solution at frequency `omega`.
pub fn newton_solve(omega: f64, guess: &SolutionPair) -> Result<SolutionPair> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::Domain(format!("ω = {omega} must be positive")));
    }
    check_even(&guess.psi, "ψ")?;
    check_even(&guess.phi, "φ")?;
    let grid = guess.grid().clone();
    let m = half(&grid);
    let mut c = cosine_coeffs(&guess.psi);
    let mut d = cosine_coeffs(&guess.phi);
    let mut history = Vec::new();
    for iter in 0..=NEWTON_MAX_ITER {
        let psi = from_cosine(&grid, &c);
        let phi = from_cosine(&grid, &d);
        let (r1, r2) = residual(omega, &psi, &phi)?;
        let res = r1.sup_norm().max(r2.sup_norm());
        history.push(res);
        if !res.is_finite() {
            return Err(Error::Divergence { omega, history });
        }
        if res <= NEWTON_TOL {
            return Ok(SolutionPair { omega, psi, phi, residual_norm: res, iterations: iter });
        }
        if iter == NEWTON_MAX_ITER || (history.len() >= 4 && history[history.len() - 3..].windows(2).all(|w| w[1] > w[0])) {
            return Err(Error::Divergence { omega, history });
        }
        let (rc, rd) = residual_coeffs(omega, &grid, &c, &d)?;
        let jac = even_jacobian(omega, &psi, &phi);
        let lu = jac.lu();
        let u = lu.u();
        let diag = u.diagonal();
        let max_piv = diag.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
        let min_piv = diag.iter().fold(f64::INFINITY, |a, x| a.min(x.abs()));
        let pivot_ratio = min_piv / max_piv;
        if !(pivot_ratio > 1e-14) {
            return Err(Error::Degenerate { omega, pivot_ratio });
        }
        let rhs = DVector::from_iterator(2 * m, rc.iter().chain(&rd).copied());
        let delta = lu.solve(&rhs).ok_or(Error::Degenerate { omega, pivot_ratio })?;
        for k in 0..m {
            c[k] -= delta[k];
            d[k] -= delta[m + k];
        }
    }
    unreachable!("loop returns on its last iteration")
}

/// `(ψ₁, ψ₁)` from the explicit cnoidal wave at `ω = 1`.
pub fn cnoidal_seed(period_l: f64, n_modes: usize) -> Result<SolutionPair> {
    let w = build_wave(1.0, period_l, n_modes)?;
    SolutionPair::new(1.0, w.field.clone(), w.field)
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchAbort {
    /// Last frequency reached in the failing direction.
    pub last_good_omega: f64,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Branch {
    /// Converged pairs at the requested grid points, ascending in `ω`.
    pub pairs: Vec<SolutionPair>,
    pub aborts: Vec<BranchAbort>,
    /// Smallest singular value of the even Jacobian at `(1, ψ₁, ψ₁)`.
    pub sigma_min_at_one: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ContinuationConfig {
    #[serde(rename = "L")]
    pub period: f64,
    #[serde(rename = "N")]
    pub n_modes: usize,
    pub omega_min: f64,
    pub omega_max: f64,
    pub step: f64,
    /// Smallest sub-step allowed after halving.
    pub min_step: f64,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        Self { period: 13.0, n_modes: 128, omega_min: 0.9, omega_max: 1.1, step: 0.01, min_step: 1e-5 }
    }
}

fn lincomb(a: &SpectralField, b: &SpectralField, t: f64) -> SpectralField {
    // a + t·(a − b)
    a.add(&a.sub(b).unwrap().scale(Complex64::new(t, 0.0))).unwrap()
}

/// Walks from `start` to `target` recording solutions at every `step` multiple.
fn walk(start: &SolutionPair, target: f64, cfg: &ContinuationConfig) -> (Vec<SolutionPair>, Option<BranchAbort>) {
    let dir = (target - start.omega).signum();
    let n_points = ((target - start.omega).abs() / cfg.step + 1e-9).floor() as usize;
    let mut out = Vec::new();
    let mut prev: Option<SolutionPair> = None;
    let mut cur = start.clone();
    let mut h = cfg.step;
    for j in 1..=n_points {
        let goal = start.omega + dir * j as f64 * cfg.step;
        while (goal - cur.omega).abs() > 1e-12 {
            let dw = h.min((goal - cur.omega).abs());
            let next_omega = if (goal - cur.omega).abs() - dw < 1e-12 { goal } else { cur.omega + dir * dw };
            let guess = match &prev {
                Some(p) => {
                    let t = (next_omega - cur.omega) / (cur.omega - p.omega);
                    SolutionPair {
                        omega: next_omega,
                        psi: lincomb(&cur.psi, &p.psi, t),
                        phi: lincomb(&cur.phi, &p.phi, t),
                        residual_norm: f64::NAN,
                        iterations: 0,
                    }
                }
                None => cur.clone(),
            };
            match newton_solve(next_omega, &guess) {
                Ok(sol) => {
                    prev = Some(std::mem::replace(&mut cur, sol));
                    h = (2.0 * h).min(cfg.step);
                }
                Err(e) => {
                    h *= 0.5;
                    if h < cfg.min_step {
                        return (out, Some(BranchAbort { last_good_omega: cur.omega, reason: e.to_string() }));
                    }
                }
            }
        }
        out.push(cur.clone());
    }
    (out, None)
}

/// Natural-parameter continuation over `[omega_min, omega_max] ∋ 1`.
pub fn continue_branch(cfg: &ContinuationConfig) -> Result<Branch> {
    if !(cfg.omega_min <= 1.0 && 1.0 <= cfg.omega_max) {
        return Err(Error::Domain(format!("range [{}, {}] must contain ω = 1", cfg.omega_min, cfg.omega_max)));
    }
    if !(cfg.step > 0.0 && cfg.min_step > 0.0 && cfg.min_step <= cfg.step) {
        return Err(Error::Domain("need 0 < min_step ≤ step".into()));
    }
    let seed = cnoidal_seed(cfg.period, cfg.n_modes)?;
    let one = newton_solve(1.0, &seed)?;
    let sigma_min_at_one = even_jacobian_sigma_min(1.0, &one.psi, &one.phi);
    let (down, abort_down) = walk(&one, cfg.omega_min, cfg);
    let (up, abort_up) = walk(&one, cfg.omega_max, cfg);
    let mut pairs: Vec<SolutionPair> = down.into_iter().rev().collect();
    pairs.push(one);
    pairs.extend(up);
    Ok(Branch { pairs, aborts: abort_down.into_iter().chain(abort_up).collect(), sigma_min_at_one })
}

/// Continuation started from an arbitrary target range, e.g. far from `ω = 1`.
pub fn continue_to(cfg: &ContinuationConfig) -> Result<Branch> {
    let lo = cfg.omega_min.min(1.0);
    let hi = cfg.omega_max.max(1.0);
    let mut full = continue_branch(&ContinuationConfig { omega_min: lo, omega_max: hi, ..*cfg })?;
    full.pairs.retain(|p| p.omega >= cfg.omega_min - 1e-12 && p.omega <= cfg.omega_max + 1e-12);
    Ok(full)
}
