//! Conserved quantities, the 𝔅-norm and the convexity index
//! `d(ω) = ℰ(Ψ_ω) + ω ℱ(Ψ_ω)` along the cnoidal branch.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::cnoidal::{build_wave, wave_params, WaveProfile};
use crate::elliptic::{complete_elliptic, EllipticModulus};
use crate::evolution::SBState;
use crate::spectral_grid::{bracket, FourierGrid, SpectralField};
use crate::{Error, Result};

/// Monitor record emitted during evolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConservedReport {
    pub time: f64,
    pub mass: f64,
    pub energy: f64,
    pub b_norm: f64,
}

/// `ℱ(u) = ∫|u|² = L·Σ|û(n)|²`.
pub fn mass(u: &SpectralField) -> f64 {
    mass_coeffs(u.coeffs(), u.grid())
}

pub(crate) fn mass_coeffs(c: &[Complex64], grid: &FourierGrid) -> f64 {
    grid.period() * c.iter().map(|z| z.norm_sqr()).sum::<f64>()
}

/// `ℰ = ∫ |u_x|² + v_x²/2 + v²/2 + w²/2 − v|u|²`.
pub fn energy(state: &SBState) -> f64 {
    let grid = state.grid();
    let l = grid.period();
    let nyq = grid.nyquist_slot();
    let mut quad = 0.0;
    for j in 0..grid.len() {
        let xi2 = if j == nyq { 0.0 } else { grid.wavenumber(j).powi(2) };
        quad += xi2 * state.u_hat[j].norm_sqr()
            + 0.5 * (1.0 + xi2) * state.v_hat[j].norm_sqr()
            + 0.5 * state.w_hat[j].norm_sqr();
    }
    let u = grid.inverse(&state.u_hat);
    let v = grid.inverse(&state.v_hat);
    let cubic: f64 = u.iter().zip(&v).map(|(a, b)| b.re * a.norm_sqr()).sum::<f64>() / grid.len() as f64;
    l * (quad - cubic)
}

/// `(‖v‖²_{H^s} + ‖(−Δ)^{−1/2}∂ₓw‖²_{H^{s−1}})^{1/2}`.
pub fn b_norm(v: &SpectralField, w: &SpectralField, s: f64) -> Result<f64> {
    if **v.grid() != **w.grid() {
        return Err(Error::Usage("v and w live on different grids".into()));
    }
    let scale = w.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
    if w.mean().norm() > 1e-12 * (1.0 + scale) {
        return Err(Error::Usage(format!("w must have zero mean for the 𝔅-norm, got {}", w.mean())));
    }
    Ok(b_norm_coeffs(v.coeffs(), w.coeffs(), v.grid(), s))
}

pub(crate) fn b_norm_coeffs(v: &[Complex64], w: &[Complex64], grid: &Arc<FourierGrid>, s: f64) -> f64 {
    let k = 2.0 * std::f64::consts::PI / grid.period();
    let nyq = grid.nyquist_slot();
    let mut total = 0.0;
    for j in 0..grid.len() {
        let n = grid.index(j) as f64;
        total += bracket(n).powf(2.0 * s) * v[j].norm_sqr();
        if j != 0 && j != nyq {
            total += bracket(n).powf(2.0 * (s - 1.0)) * k * k * w[j].norm_sqr();
        }
    }
    total.sqrt()
}

const TAIL_TARGET: f64 = 1e-13;

/// Smallest power-of-two grid on which the wave's spectrum falls below `1e−13`.
pub fn resolved_wave(omega: f64, period_l: f64) -> Result<WaveProfile> {
    let mut n = 64;
    loop {
        match build_wave(omega, period_l, n) {
            Ok(w) if w.field.spectral_tail() < TAIL_TARGET => return Ok(w),
            Ok(_) | Err(Error::Resolution { .. }) if n < 1 << 16 => n *= 2,
            Ok(w) => {
                return Err(Error::Resolution { tail: w.field.spectral_tail(), limit: TAIL_TARGET });
            }
            Err(e) => return Err(e),
        }
    }
}

/// `∫ψ` by the spectral trapezoid rule.
pub fn integral(f: &SpectralField) -> f64 {
    f.grid().period() * f.mean().re
}

/// `d′(ω) = ℱ(Ψ_ω) = ∫ψ_ω²`.
pub fn d_prime(omega: f64, period_l: f64) -> Result<f64> {
    Ok(mass(&resolved_wave(omega, period_l)?.field))
}

/// `d(ω) = ℰ(ψ_ω, ψ_ω, 0) + ω ∫ψ_ω²` with `ℰ(ψ, ψ, 0) = ∫ (3/2)ψ_x² + ψ²/2 − ψ³`.
pub fn d_function(omega: f64, period_l: f64) -> Result<f64> {
    let w = resolved_wave(omega, period_l)?;
    let zero = SpectralField::zeros(w.grid());
    let state = SBState::new(0.0, &w.field, &w.field, &zero)?;
    Ok(energy(&state) + omega * mass(&w.field))
}

fn k_shape(k: EllipticModulus) -> (f64, f64, f64) {
    let p = complete_elliptic(k);
    let k2 = k.k2();
    (p.K, p.E, (k2 * k2 - k2 + 1.0).sqrt())
}

/// `β₂ = (8K²/L²)[√(k⁴ − k² + 1) + 1 − 2k²]`.
pub fn beta2_closed_form(k: EllipticModulus, period_l: f64) -> f64 {
    let (kk, _, root) = k_shape(k);
    8.0 * kk * kk / (period_l * period_l) * (root + 1.0 - 2.0 * k.k2())
}

/// `H(k) = (8K²/L)[√(k⁴ − k² + 1) − 2 + k²] + 24KE/L`, equal to `∫ψ_ω`.
pub fn h_closed_form(k: EllipticModulus, period_l: f64) -> f64 {
    let (kk, ee, root) = k_shape(k);
    8.0 * kk * kk / period_l * (root - 2.0 + k.k2()) + 24.0 * kk * ee / period_l
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct StabilityIndex {
    pub omega: f64,
    pub period: f64,
    pub k: f64,
    pub d_prime: f64,
    /// Chain rule through `H(k)` with `dk/dω` from the branch.
    pub d_second: f64,
    /// Central difference of `G(ω) = ω∫ψ_ω`.
    pub d_second_fd: f64,
    #[serde(rename = "G")]
    pub g: f64,
    #[serde(rename = "H")]
    pub h: f64,
    /// `β₂ / ((8K²/L)[√(k⁴ − k² + 1) + 1 − 2k²])`; equals `1/L`.
    pub beta2_scale: f64,
}

const BRANCH_STEP: f64 = 1e-5;
const FD_STEP: f64 = 1e-4;

fn k_of(omega: f64, period_l: f64) -> Result<EllipticModulus> {
    Ok(wave_params(omega, period_l)?.k)
}

/// `d″(ω) = dG/dω` computed analytically and by finite differences.
pub fn d_second(omega: f64, period_l: f64) -> Result<StabilityIndex> {
    let params = wave_params(omega, period_l)?;
    let k = params.k;
    let h = h_closed_form(k, period_l);

    let kp = k_of(omega + BRANCH_STEP, period_l)?.k();
    let km = k_of(omega - BRANCH_STEP, period_l)?.k();
    let dk_domega = (kp - km) / (2.0 * BRANCH_STEP);
    let dh = 1e-5 * k.kc2().sqrt().min(k.k());
    let h_at = |kk: f64| EllipticModulus::new(kk).map(|m| h_closed_form(m, period_l));
    let dh_dk = (h_at(k.k() + dh)? - h_at(k.k() - dh)?) / (2.0 * dh);
    let d_second = h + omega * dh_dk * dk_domega;

    let wave = resolved_wave(omega, period_l)?;
    let int_psi = integral(&wave.field);
    let g_at = |w: f64| resolved_wave(w, period_l).map(|p| w * integral(&p.field));
    let d_second_fd = (g_at(omega + FD_STEP)? - g_at(omega - FD_STEP)?) / (2.0 * FD_STEP);

    let (kk, _, root) = k_shape(k);
    let single_power_form = 8.0 * kk * kk / period_l * (root + 1.0 - 2.0 * k.k2());
    Ok(StabilityIndex {
        omega,
        period: period_l,
        k: k.k(),
        d_prime: mass(&wave.field),
        d_second,
        d_second_fd,
        g: omega * int_psi,
        h,
        beta2_scale: params.beta2 / single_power_form,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnoidal::build_wave;
    use crate::quadrature::adaptive_gauss_kronrod;
    use crate::elliptic::jacobi;
    use std::f64::consts::PI;

    #[test]
    fn mass_examples() {
        let g = FourierGrid::new(13.0, 64).unwrap();
        let c = SpectralField::from_fn(&g, |_| 1.5);
        assert!((mass(&c) - 13.0 * 2.25).abs() < 1e-12);
        let w = build_wave(1.0, 13.0, 256).unwrap();
        let trap: f64 = w.field.real_values().iter().map(|p| p * p).sum::<f64>() * 13.0 / 256.0;
        assert!((mass(&w.field) - trap).abs() < 1e-12 * trap);
        let rotated = w.field.scale(Complex64::from_polar(1.0, 0.8));
        assert!((mass(&rotated) - mass(&w.field)).abs() < 1e-12 * trap);
    }

    #[test]
    fn energy_examples() {
        let w = build_wave(1.0, 13.0, 256).unwrap();
        let zero = SpectralField::zeros(w.grid());
        assert_eq!(energy(&SBState::new(0.0, &zero, &zero, &zero).unwrap()), 0.0);
        let st = SBState::new(0.0, &w.field, &w.field, &zero).unwrap();
        // Closed-form integrand evaluated pointwise and integrated adaptively.
        let p = w.params;
        let lam = (p.rho / 6.0).sqrt();
        let integrand = |x: f64| {
            let (sn, cn, dn) = jacobi(lam * x, p.k).unwrap();
            let psi = p.beta2 + (p.beta3 - p.beta2) * cn * cn;
            let dpsi = -2.0 * (p.beta3 - p.beta2) * lam * cn * sn * dn;
            1.5 * dpsi * dpsi + 0.5 * psi * psi - psi.powi(3)
        };
        let oracle = adaptive_gauss_kronrod(integrand, 0.0, 13.0, 1e-13);
        assert!((energy(&st) - oracle).abs() < 1e-10 * oracle.abs());
        let rot = SBState::new(0.0, &w.field.scale(Complex64::from_polar(1.0, 2.1)), &w.field, &zero).unwrap();
        assert!((energy(&rot) - energy(&st)).abs() < 1e-11);
    }

    #[test]
    fn b_norm_examples() {
        let l = 9.0;
        let g = FourierGrid::new(l, 64).unwrap();
        let zero = SpectralField::zeros(&g);
        assert_eq!(b_norm(&zero, &zero, 1.0).unwrap(), 0.0);
        let e = SpectralField::from_fn(&g, |x| (2.0 * PI * x / l).cos());
        // ‖cos‖²_{L²} in the normalized convention is ½.
        assert!((b_norm(&e, &zero, 0.0).unwrap() - 0.5_f64.sqrt()).abs() < 1e-14);
        let one = SpectralField::from_fn(&g, |_| 1.0);
        assert!(b_norm(&zero, &one, 0.0).is_err());

        let v = SpectralField::from_fn(&g, |x| (2.0 * PI * x / l).sin().exp() - 1.0);
        let w = SpectralField::from_fn(&g, |x| (2.0 * PI * 3.0 * x / l).sin() + 0.4 * (2.0 * PI * x / l).cos());
        let s = 1.3;
        let mut direct = 0.0;
        for n in -31..32_i64 {
            let b = 1.0 + n.abs() as f64;
            direct += b.powf(2.0 * s) * v.coeff(n).norm_sqr();
            if n != 0 {
                let r = (2.0 * PI * n as f64 / l).abs() / n.abs() as f64;
                direct += b.powf(2.0 * (s - 1.0)) * r * r * w.coeff(n).norm_sqr();
            }
        }
        assert!((b_norm(&v, &w, s).unwrap() - direct.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn d_prime_identity_and_growth() {
        for &omega in &[0.8, 1.0, 1.3] {
            let w = resolved_wave(omega, 13.0).unwrap();
            let dp = mass(&w.field);
            assert!((dp - omega * integral(&w.field)).abs() < 1e-9 * dp);
        }
        assert!(d_prime(1.2, 13.0).unwrap() > d_prime(1.0, 13.0).unwrap());
    }

    #[test]
    fn d_prime_matches_finite_difference_at_unit_frequency() {
        let h = 1e-4;
        let fd = (d_function(1.0 + h, 13.0).unwrap() - d_function(1.0 - h, 13.0).unwrap()) / (2.0 * h);
        let dp = d_prime(1.0, 13.0).unwrap();
        assert!((fd - dp).abs() < 1e-6 * dp, "{fd} vs {dp}");
    }

    #[test]
    fn closed_forms_hold_on_branch() {
        for &omega in &[0.8, 1.0, 1.5] {
            let p = wave_params(omega, 13.0).unwrap();
            assert!((beta2_closed_form(p.k, 13.0) - p.beta2).abs() < 1e-9 * p.beta2.max(1e-3));
            let w = resolved_wave(omega, 13.0).unwrap();
            let int = integral(&w.field);
            assert!((h_closed_form(p.k, 13.0) - int).abs() < 1e-9 * int);
        }
    }

    #[test]
    fn convexity_at_unit_frequency() {
        let idx = d_second(1.0, 13.0).unwrap();
        assert!(idx.d_second > 0.0 && idx.d_second_fd > 0.0);
        assert!((idx.d_second - idx.d_second_fd).abs() <= 1e-4 * idx.d_second_fd);
        assert!((idx.d_prime - idx.g).abs() < 1e-9 * idx.g);
        assert!((idx.beta2_scale - 1.0 / 13.0).abs() < 1e-9);
    }
}
