//! Cnoidal solutions of `ψ″ − ωψ + ψ² = 0` with prescribed period `L`,
//!
//! ```text
//! ψ(x) = β₂ + (β₃ − β₂) cn²(√(ρ/6)·x; k),   ρ = β₃ − β₁,   k² = (β₃ − β₂)/ρ,
//! ```
//!
//! where `β₁ < 0 < β₂ < β₃` are the roots of the cubic in the first integral
//! `½ψ′² − ½ωψ² + ψ³/3 = A_ψ`. With `ω₀ = ω/2` they satisfy
//! `β₁ + β₂ + β₃ = 3ω₀` and `β₁β₂ + β₁β₃ + β₂β₃ = 0`, so everything is fixed by
//! `β₂`, which is tuned until the period `2√6·K(k)/√ρ` equals `L`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use crate::elliptic::{complete_elliptic, jacobi, EllipticModulus};
use crate::spectral_grid::{FourierGrid, SpectralField, RESOLUTION_LIMIT};
use crate::{Error, Result};

/// Remaining roots and shape constants for a given `β₂`.
#[derive(Debug, Clone, Copy)]
pub struct Roots {
    pub beta1: f64,
    pub beta3: f64,
    pub rho: f64,
    pub k: EllipticModulus,
}

/// Full parametrization of one cnoidal wave.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WaveParams {
    pub omega: f64,
    pub omega0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    #[serde(serialize_with = "serialize_modulus")]
    pub k: EllipticModulus,
    pub rho: f64,
    #[serde(rename = "L")]
    pub period: f64,
    /// First-integral constant `β₁β₂β₃/3`.
    pub a_psi: f64,
}

fn serialize_modulus<S: serde::Serializer>(k: &EllipticModulus, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(k.k())
}

impl WaveParams {
    /// Closed-form profile value at `x`.
    pub fn profile_at(&self, x: f64) -> Result<f64> {
        let (_, cn, _) = jacobi((self.rho / 6.0).sqrt() * x, self.k)?;
        Ok(self.beta2 + (self.beta3 - self.beta2) * cn * cn)
    }

    /// Closed-form ρ of the period relation, `√(9ω₀² − 3β₂² + 6ω₀β₂)`.
    pub fn rho_closed_form(&self) -> f64 {
        rho_closed_form(self.beta2, self.omega0)
    }
}

pub fn rho_closed_form(beta2: f64, omega0: f64) -> f64 {
    (9.0 * omega0 * omega0 - 3.0 * beta2 * beta2 + 6.0 * omega0 * beta2).sqrt()
}

fn check_beta2(beta2: f64, omega0: f64) -> Result<()> {
    if !(omega0.is_finite() && omega0 > 0.0) {
        return Err(Error::Domain(format!("ω₀ = {omega0} must be positive")));
    }
    if !(beta2 > 0.0 && beta2 < 2.0 * omega0) {
        return Err(Error::Domain(format!("β₂ = {beta2} outside (0, 2ω₀) = (0, {})", 2.0 * omega0)));
    }
    Ok(())
}

/// `β₁, β₃` from the Vieta relations, `ρ = β₃ − β₁` and the modulus.
pub fn roots_from_beta2(beta2: f64, omega0: f64) -> Result<Roots> {
    check_beta2(beta2, omega0)?;
    let s = 3.0 * omega0 - beta2;
    let rho = (s * s + 4.0 * beta2 * s).sqrt();
    let beta3 = 0.5 * (s + rho);
    let beta1 = -beta2 * s / beta3;
    let k2 = 0.5 + 1.5 * (omega0 - beta2) / rho;
    let k = if k2 <= 0.5 {
        EllipticModulus::from_k2(k2)?
    } else {
        // k'² = (β₂ − β₁)/ρ keeps full precision as k → 1.
        EllipticModulus::from_complement((beta2 - beta1) / rho)?
    };
    Ok(Roots { beta1, beta3, rho, k })
}

/// Fundamental period `T(β₂; ω₀) = 2√6·K(k)/√ρ`.
pub fn period(beta2: f64, omega0: f64) -> Result<f64> {
    let r = roots_from_beta2(beta2, omega0)?;
    Ok(2.0 * 6.0_f64.sqrt() * complete_elliptic(r.k).K / r.rho.sqrt())
}

/// Infimum of the period map, `√2·π/√ω₀`, approached as `β₂ → 2ω₀`.
pub fn minimal_period(omega0: f64) -> f64 {
    2.0_f64.sqrt() * PI / omega0.sqrt()
}

const BETA2_FLOOR: f64 = 1e-300;

/// Unique `β₂ ∈ (0, 2ω₀)` with `T(β₂; ω₀) = L`.
///
/// Bisection runs in `ln β₂` because long waves need `β₂` many orders of
/// magnitude below one; the bracket is then polished by Newton steps.
pub fn solve_beta2(period_l: f64, omega0: f64) -> Result<f64> {
    if !(period_l.is_finite() && period_l > 0.0 && omega0.is_finite() && omega0 > 0.0) {
        return Err(Error::Domain(format!("need L > 0 and ω₀ > 0, got L = {period_l}, ω₀ = {omega0}")));
    }
    if period_l <= minimal_period(omega0) {
        return Err(Error::NoSolution(format!(
            "ω₀ = {omega0} ≤ 2π²/L² = {}: no cnoidal wave of period {period_l}",
            2.0 * PI * PI / (period_l * period_l)
        )));
    }
    let mismatch = |b: f64| period(b, omega0).map(|t| t - period_l);
    let mut lo = BETA2_FLOOR.ln();
    let mut hi = (2.0 * omega0).ln();
    if mismatch(BETA2_FLOOR)? < 0.0 {
        return Err(Error::NoSolution(format!("period L = {period_l} exceeds the double-precision range of the branch")));
    }
    // T decreases in β₂: positive mismatch means β₂ is too small.
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        let b = mid.exp();
        if b >= 2.0 * omega0 {
            hi = mid;
            continue;
        }
        if mismatch(b)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut beta2 = (0.5 * (lo + hi)).exp();
    for _ in 0..2 {
        let h = 1e-6 * beta2.min(2.0 * omega0 - beta2);
        if h <= 0.0 {
            break;
        }
        let slope = (mismatch(beta2 + h)? - mismatch(beta2 - h)?) / (2.0 * h);
        let f = mismatch(beta2)?;
        if f == 0.0 || !slope.is_finite() || slope == 0.0 {
            break;
        }
        let next = beta2 - f / slope;
        if next > 0.0 && next < 2.0 * omega0 && mismatch(next)?.abs() < f.abs() {
            beta2 = next;
        } else {
            break;
        }
    }
    Ok(beta2)
}

/// Parameters of the period-`L` wave at frequency `ω`.
pub fn wave_params(omega: f64, period_l: f64) -> Result<WaveParams> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::Domain(format!("ω = {omega} must be positive")));
    }
    let omega0 = 0.5 * omega;
    let beta2 = solve_beta2(period_l, omega0)?;
    let r = roots_from_beta2(beta2, omega0)?;
    Ok(WaveParams {
        omega,
        omega0,
        beta1: r.beta1,
        beta2,
        beta3: r.beta3,
        k: r.k,
        rho: r.rho,
        period: period_l,
        a_psi: r.beta1 * beta2 * r.beta3 / 3.0,
    })
}

/// A cnoidal wave sampled on a Fourier grid, crest at `x = 0`.
#[derive(Debug, Clone)]
pub struct WaveProfile {
    pub params: WaveParams,
    pub field: SpectralField,
}

impl WaveProfile {
    pub fn grid(&self) -> &Arc<FourierGrid> {
        self.field.grid()
    }

    pub fn omega(&self) -> f64 {
        self.params.omega
    }

    /// `ψ″ − ωψ + ψ²`.
    pub fn residual(&self) -> Result<SpectralField> {
        let d2 = self.field.derivative(2)?;
        let sq = self.field.mul(&self.field)?;
        let omega = self.params.omega;
        let vals: Vec<f64> = d2
            .real_values()
            .iter()
            .zip(self.field.real_values())
            .zip(sq.real_values())
            .map(|((a, p), q)| a - omega * p + q)
            .collect();
        SpectralField::from_real(self.grid(), &vals)
    }

    pub fn residual_sup(&self) -> Result<f64> {
        Ok(self.residual()?.sup_norm())
    }

    /// `ψ′` on the grid.
    pub fn derivative(&self) -> Result<SpectralField> {
        self.field.derivative(1)
    }
}

/// Samples the closed form on an `n_modes`-point grid of period `L`.
pub fn build_wave(omega: f64, period_l: f64, n_modes: usize) -> Result<WaveProfile> {
    if n_modes < 32 || !n_modes.is_power_of_two() {
        return Err(Error::Domain(format!("n_modes = {n_modes} must be a power of two ≥ 32")));
    }
    if omega <= 4.0 * PI * PI / (period_l * period_l) {
        return Err(Error::NoSolution(format!(
            "ω = {omega} ≤ 4π²/L² = {}: outside the cnoidal branch",
            4.0 * PI * PI / (period_l * period_l)
        )));
    }
    let params = wave_params(omega, period_l)?;
    let grid = FourierGrid::new(period_l, n_modes)?;
    let vals = grid.xs().iter().map(|&x| params.profile_at(x)).collect::<Result<Vec<f64>>>()?;
    let field = SpectralField::from_real(&grid, &vals)?;
    field.check_resolved(RESOLUTION_LIMIT)?;
    Ok(WaveProfile { params, field })
}

/// Waves along the branch `ω ↦ ψ_ω` at fixed period.
pub fn branch_sample(period_l: f64, omegas: &[f64], n_modes: usize) -> Result<Vec<WaveProfile>> {
    omegas.iter().map(|&w| build_wave(w, period_l, n_modes)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    // Time for ψ″ = ωψ − ψ² to travel from the crest β₃ to the trough, by RK4
    // shooting with a linearly interpolated stopping point.
    fn shooting_half_period(omega: f64, beta3: f64) -> f64 {
        let f = |y: [f64; 2]| [y[1], omega * y[0] - y[0] * y[0]];
        let h = 1e-4;
        let mut y = [beta3, 0.0];
        let mut t = 0.0;
        // ψ′ becomes negative immediately; stop when it returns to zero.
        loop {
            let k1 = f(y);
            let k2 = f([y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
            let k3 = f([y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
            let k4 = f([y[0] + h * k3[0], y[1] + h * k3[1]]);
            let next = [
                y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
                y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
            ];
            if t > 0.0 && next[1] >= 0.0 {
                // Quadratic interpolation of ψ′ through the last step.
                let a = y[1];
                let b = next[1];
                let slope0 = omega * y[0] - y[0] * y[0];
                let slope1 = omega * next[0] - next[0] * next[0];
                let mut s = a / (a - b);
                for _ in 0..20 {
                    // Cubic Hermite interpolant of ψ′ on the step.
                    let h00 = 2.0 * s.powi(3) - 3.0 * s * s + 1.0;
                    let h10 = s.powi(3) - 2.0 * s * s + s;
                    let h01 = -2.0 * s.powi(3) + 3.0 * s * s;
                    let h11 = s.powi(3) - s * s;
                    let p = h00 * a + h10 * h * slope0 + h01 * b + h11 * h * slope1;
                    let dp = (6.0 * s * s - 6.0 * s) * a + (3.0 * s * s - 4.0 * s + 1.0) * h * slope0
                        + (-6.0 * s * s + 6.0 * s) * b
                        + (3.0 * s * s - 2.0 * s) * h * slope1;
                    s -= p / dp;
                }
                return t + s * h;
            }
            y = next;
            t += h;
        }
    }

    #[test]
    fn roots_at_unit_parameters() {
        let r = roots_from_beta2(1.0, 1.0).unwrap();
        let s3 = 3.0_f64.sqrt();
        assert!((r.beta1 - (1.0 - s3)).abs() < 1e-14);
        assert!((r.beta3 - (1.0 + s3)).abs() < 1e-14);
        assert!((r.rho - 2.0 * s3).abs() < 1e-14);
        assert!((r.rho - rho_closed_form(1.0, 1.0)).abs() < 1e-14);
        assert!((r.k.k2() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn modulus_limits() {
        let near_top = roots_from_beta2(2.0 - 1e-6, 1.0).unwrap();
        assert!(near_top.k.k2() < 1e-6);
        let near_zero = roots_from_beta2(1e-12, 1.0).unwrap();
        assert!(near_zero.k.kc2() < 1e-11);
        assert!(roots_from_beta2(0.0, 1.0).is_err());
        assert!(roots_from_beta2(2.0, 1.0).is_err());
    }

    #[test]
    fn period_limits() {
        let tmin = minimal_period(1.0);
        assert!((period(2.0 - 1e-8, 1.0).unwrap() - tmin).abs() < 1e-6);
        assert!(period(1e-100, 1.0).unwrap() > 100.0);
        assert!(period(1.0, 1.0).unwrap() > tmin);
    }

    #[test]
    fn period_matches_shooting() {
        let r = roots_from_beta2(1.0, 1.0).unwrap();
        let t = period(1.0, 1.0).unwrap();
        let half = shooting_half_period(2.0, r.beta3);
        assert!((2.0 * half - t).abs() < 1e-8, "{} vs {}", 2.0 * half, t);
    }

    #[test]
    fn solve_examples() {
        let b = solve_beta2(13.0, 1.0).unwrap();
        assert!(b > 0.0 && b < 2.0);
        assert!((period(b, 1.0).unwrap() - 13.0).abs() <= 1e-10);
        let w0 = 2.0 * PI * PI / 169.0 * (1.0 + 1e-3);
        let b = solve_beta2(13.0, w0).unwrap();
        assert!(b > 1.9 * w0);
        assert!(matches!(solve_beta2(2.0 * PI, 0.5), Err(Error::NoSolution(_))));
    }

    #[test]
    fn period_is_decreasing() {
        let mut prev = f64::INFINITY;
        for i in 1..1000 {
            let t = period(2.0 * i as f64 / 1000.0, 1.0).unwrap();
            assert!(t < prev);
            prev = t;
        }
    }

    #[test]
    fn wave_solves_profile_equation() {
        let w = build_wave(1.0, 13.0, 256).unwrap();
        assert!(w.residual_sup().unwrap() <= 1e-8);
        let p = &w.params;
        assert!(p.beta1 < 0.0 && p.beta2 > 0.0 && p.beta2 < p.omega && p.omega < p.beta3 && p.beta3 < 1.5 * p.omega);
        assert!((p.beta1 + p.beta2 + p.beta3 - 1.5 * p.omega).abs() < 1e-13);
        assert!((p.beta1 * p.beta2 + p.beta1 * p.beta3 + p.beta2 * p.beta3).abs() < 1e-13);
        assert!((p.rho - p.rho_closed_form()).abs() < 1e-12);
        // First integral.
        let psi = w.field.real_values();
        let dpsi = w.derivative().unwrap().real_values();
        for (a, b) in psi.iter().zip(&dpsi) {
            let first = 0.5 * b * b - 0.5 * p.omega * a * a + a.powi(3) / 3.0;
            assert!((first - p.a_psi).abs() < 1e-10);
        }
    }

    #[test]
    fn wave_is_positive_with_trough_at_half_period() {
        let w = build_wave(2.0, 13.0, 256).unwrap();
        let vals = w.field.real_values();
        assert!(vals.iter().all(|&v| v > 0.0));
        let mid = vals[128];
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(mid, min);
        assert!((mid - w.params.beta2).abs() < 1e-12);
        // Evenness about the crest.
        for j in 1..128 {
            assert!((vals[j] - vals[256 - j]).abs() < 1e-12);
        }
    }

    #[test]
    fn long_wave_approaches_soliton() {
        let w = build_wave(1.0, 200.0, 2048).unwrap();
        assert!(w.params.beta2 < 1e-20);
        for &x in &[0.0_f64, 0.5, 1.0, 2.0, 5.0] {
            let exact = 1.5 / (0.5 * x).cosh().powi(2);
            assert!((w.params.profile_at(x).unwrap() - exact).abs() < 1e-4);
        }
    }

    #[test]
    fn under_resolved_grid_is_rejected() {
        assert!(matches!(build_wave(1.0, 200.0, 64), Err(Error::Resolution { .. })));
        assert!(build_wave(1.0, 13.0, 48).is_err());
    }

    #[test]
    fn branch_modulus_increases() {
        let b = branch_sample(13.0, &[0.8, 1.0, 1.2], 256).unwrap();
        assert!(b[0].params.k.k() < b[1].params.k.k());
        assert!(b[1].params.k.k() < b[2].params.k.k());
        let single = branch_sample(13.0, &[1.0], 256).unwrap();
        assert_eq!(single[0].field.real_values(), b[1].field.real_values());
    }

    #[test]
    fn branch_is_continuous() {
        let dist = |dw: f64| {
            let b = branch_sample(13.0, &[1.0, 1.0 + dw], 256).unwrap();
            b[0].field.sub(&b[1].field).unwrap().sup_norm()
        };
        let d1 = dist(1e-4);
        let d2 = dist(5e-5);
        assert!(d1 <= 1e-2);
        assert!((d1 / d2 - 2.0).abs() < 0.05);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]
        #[test]
        fn solved_period_matches(l in 6.0f64..60.0, w0 in 0.3f64..3.0) {
            proptest::prop_assume!(l > minimal_period(w0) * 1.001);
            let b = solve_beta2(l, w0).unwrap();
            proptest::prop_assert!((period(b, w0).unwrap() - l).abs() <= 1e-10 * l);
            let r = roots_from_beta2(b, w0).unwrap();
            proptest::prop_assert!((r.rho - rho_closed_form(b, w0)).abs() <= 1e-12 * r.rho);
            proptest::prop_assert!((r.beta3 - r.beta1 - r.rho).abs() <= 1e-12 * r.rho);
        }
    }
}
