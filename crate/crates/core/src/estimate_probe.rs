//! Bourgain-space norms on a discrete `(n, τ)` lattice, the elementary
//! calculus inequalities behind the bilinear estimates, and the growth rates
//! of the sharpness counterexamples.
//!
//! Frequencies `n` are integers; `τ` lives on the grid `τ_j = j·h`. Products
//! in physical space become an exact sum over `n₁` and a Riemann-sum
//! convolution in `τ`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::quadrature::{adaptive_gauss_kronrod, semi_infinite};
use crate::{Error, Result};

pub const DEFAULT_H: f64 = 0.05;
const TRUNCATION_LIMIT: f64 = 1e-10;
/// Direct `τ`-convolution below this many multiply-adds, FFT above.
const DIRECT_CONV_LIMIT: usize = 1 << 14;

fn bracket(x: f64) -> f64 {
    1.0 + x.abs()
}

/// One frequency row: values at `τ = (start + j)·h`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeRow {
    pub start: i64,
    pub values: Vec<Complex64>,
}

#[derive(Debug, Clone)]
pub struct LatticeFunction {
    h: f64,
    n_max: i64,
    t_max: f64,
    rows: BTreeMap<i64, LatticeRow>,
}

impl LatticeFunction {
    pub fn new(h: f64, n_max: i64, t_max: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite() && n_max >= 0 && t_max >= 0.0) {
            return Err(Error::Domain(format!("bad lattice h={h}, n_max={n_max}, t_max={t_max}")));
        }
        Ok(Self { h, n_max, t_max, rows: BTreeMap::new() })
    }

    /// Samples `f` on the full window.
    pub fn from_fn<F: Fn(i64, f64) -> Complex64>(h: f64, n_max: i64, t_max: f64, f: F) -> Result<Self> {
        let mut out = Self::new(h, n_max, t_max)?;
        let jmax = (t_max / h + 1e-9).floor() as i64;
        for n in -n_max..=n_max {
            let values: Vec<_> = (-jmax..=jmax).map(|j| f(n, j as f64 * h)).collect();
            if values.iter().any(|v| *v != Complex64::new(0.0, 0.0)) {
                out.set_row(n, -jmax, values)?;
            }
        }
        Ok(out)
    }

    /// `δ_{n,n0}·δ_{τ,τ0}` with unit value.
    pub fn delta(h: f64, n0: i64, tau0: f64) -> Result<Self> {
        let j = (tau0 / h).round() as i64;
        let mut out = Self::new(h, n0.abs() + 1, (j.abs() + 1) as f64 * h)?;
        out.set_row(n0, j, vec![Complex64::new(1.0, 0.0)])?;
        Ok(out)
    }

    pub fn set_row(&mut self, n: i64, start: i64, values: Vec<Complex64>) -> Result<()> {
        let jmax = (self.t_max / self.h + 1e-9).floor() as i64;
        let end = start + values.len() as i64 - 1;
        if n.abs() > self.n_max || start < -jmax || end > jmax {
            return Err(Error::Truncation(format!(
                "row n={n}, τ-index [{start}, {end}] outside the lattice window |n| ≤ {}, |j| ≤ {jmax}",
                self.n_max
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value in row {n}")));
        }
        self.rows.insert(n, LatticeRow { start, values });
        Ok(())
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_max(&self) -> i64 {
        self.n_max
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn rows(&self) -> impl Iterator<Item = (i64, &LatticeRow)> {
        self.rows.iter().map(|(n, r)| (*n, r))
    }

    pub fn get(&self, n: i64, j: i64) -> Complex64 {
        self.rows
            .get(&n)
            .and_then(|r| usize::try_from(j - r.start).ok().and_then(|k| r.values.get(k).copied()))
            .unwrap_or_default()
    }

    /// Discrete `ℓ²_n L²_τ` norm.
    pub fn l2_norm(&self) -> f64 {
        (self.h * self.rows.values().flat_map(|r| &r.values).map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// Pointwise reweighting `f(n, τ)·w(n, τ)`.
    pub fn map_weight<W: Fn(i64, f64) -> f64>(&self, w: W) -> Self {
        let mut out = self.clone();
        for (n, row) in out.rows.iter_mut() {
            for (k, v) in row.values.iter_mut().enumerate() {
                *v *= w(*n, (row.start + k as i64) as f64 * self.h);
            }
        }
        out
    }

    /// Transform of the conjugate: `conj f(−n, −τ)`.
    pub fn conj_reflect(&self) -> Self {
        let rows = self
            .rows
            .iter()
            .map(|(n, r)| {
                let values: Vec<_> = r.values.iter().rev().map(|v| v.conj()).collect();
                let start = -(r.start + r.values.len() as i64 - 1);
                (-n, LatticeRow { start, values })
            })
            .collect();
        Self { rows, ..*self }
    }

    /// Fraction of `|f|²` on the outermost row or column of the window.
    pub fn boundary_fraction(&self) -> f64 {
        let jmax = (self.t_max / self.h + 1e-9).floor() as i64;
        let mut edge = 0.0;
        let mut total = 0.0;
        for (n, r) in &self.rows {
            for (k, v) in r.values.iter().enumerate() {
                let m = v.norm_sqr();
                total += m;
                let j = r.start + k as i64;
                if n.abs() == self.n_max || j.abs() == jmax {
                    edge += m;
                }
            }
        }
        if total > 0.0 {
            edge / total
        } else {
            0.0
        }
    }

    fn check_support(&self) -> Result<()> {
        let frac = self.boundary_fraction();
        if frac > TRUNCATION_LIMIT {
            return Err(Error::Truncation(format!("boundary mass fraction {frac:.3e} exceeds {TRUNCATION_LIMIT:e}")));
        }
        Ok(())
    }
}

fn direct_convolution(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Transform of the product: `(f ⋆ g)(n, τ) = Σ_{n₁} ∫ f(n₁, τ₁) g(n − n₁, τ − τ₁) dτ₁`.
pub fn convolve(f: &LatticeFunction, g: &LatticeFunction) -> Result<LatticeFunction> {
    if (f.h - g.h).abs() > 1e-15 * f.h {
        return Err(Error::Usage("lattices with different τ steps".into()));
    }
    let h = f.h;
    let mut out = LatticeFunction::new(h, f.n_max + g.n_max, f.t_max + g.t_max + h)?;
    let lf = f.rows.values().map(|r| r.values.len()).max().unwrap_or(0);
    let lg = g.rows.values().map(|r| r.values.len()).max().unwrap_or(0);
    if lf == 0 || lg == 0 {
        return Ok(out);
    }
    let mut acc: BTreeMap<(i64, i64), Vec<Complex64>> = BTreeMap::new();
    if lf * lg <= DIRECT_CONV_LIMIT {
        for (n1, r1) in &f.rows {
            for (n2, r2) in &g.rows {
                let c = direct_convolution(&r1.values, &r2.values);
                let slot = acc.entry((n1 + n2, r1.start + r2.start)).or_insert_with(|| vec![Complex64::default(); lf + lg - 1]);
                for (s, v) in slot.iter_mut().zip(c) {
                    *s += v;
                }
            }
        }
    } else {
        // Accumulate in frequency space; one inverse transform per output row.
        let len = (lf + lg - 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(len);
        let inv = planner.plan_fft_inverse(len);
        let spectrum = |r: &LatticeRow| {
            let mut buf = r.values.clone();
            buf.resize(len, Complex64::default());
            fwd.process(&mut buf);
            buf
        };
        let fs: Vec<_> = f.rows.iter().map(|(n, r)| (*n, r.start, spectrum(r))).collect();
        let gs: Vec<_> = g.rows.iter().map(|(n, r)| (*n, r.start, spectrum(r))).collect();
        for (n1, s1, a) in &fs {
            for (n2, s2, b) in &gs {
                let slot = acc.entry((n1 + n2, s1 + s2)).or_insert_with(|| vec![Complex64::default(); len]);
                for ((s, x), y) in slot.iter_mut().zip(a).zip(b) {
                    *s += x * y;
                }
            }
        }
        let scale = 1.0 / len as f64;
        for buf in acc.values_mut() {
            inv.process(buf);
            buf.truncate(lf + lg - 1);
            for v in buf.iter_mut() {
                *v *= scale;
            }
        }
    }
    // Merge pieces landing on the same output row.
    let mut merged: BTreeMap<i64, (i64, Vec<Complex64>)> = BTreeMap::new();
    for ((n, start), vals) in acc {
        let entry = merged.entry(n).or_insert_with(|| (start, Vec::new()));
        let lo = entry.0.min(start);
        let hi = (entry.0 + entry.1.len() as i64).max(start + vals.len() as i64);
        let mut buf = vec![Complex64::default(); (hi - lo) as usize];
        for (k, v) in entry.1.iter().enumerate() {
            buf[(entry.0 - lo) as usize + k] += v;
        }
        for (k, v) in vals.iter().enumerate() {
            buf[(start - lo) as usize + k] += v * h;
        }
        *entry = (lo, buf);
    }
    for (n, (start, vals)) in merged {
        out.set_row(n, start, vals)?;
    }
    Ok(out)
}

/// Distance of `(n, τ)` to a characteristic surface, with `κ = 2π/L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Modulation {
    /// `τ + (κn)²`
    Schrodinger,
    /// `τ − (κn)²`, the conjugate parabola.
    SchrodingerConj,
    /// `|τ| − γ(n)`, `γ(n) = κ²√(n² + n⁴)`
    Boussinesq,
    /// `|τ| − (κn)²`
    BoussinesqSquare,
}

impl Modulation {
    pub fn eval(self, n: i64, tau: f64, kappa: f64) -> f64 {
        let n = n as f64;
        match self {
            Modulation::Schrodinger => tau + (kappa * n).powi(2),
            Modulation::SchrodingerConj => tau - (kappa * n).powi(2),
            Modulation::Boussinesq => tau.abs() - gamma(n, kappa),
            Modulation::BoussinesqSquare => tau.abs() - (kappa * n).powi(2),
        }
    }
}

pub fn gamma(n: f64, kappa: f64) -> f64 {
    kappa * kappa * (n * n + n.powi(4)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Space {
    S,
    B,
}

impl std::str::FromStr for Space {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "S" | "s" => Ok(Space::S),
            "B" | "b" => Ok(Space::B),
            _ => Err(Error::Usage(format!("unknown space {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ModulationWeights {
    pub s: f64,
    pub b: f64,
    pub modulation: Modulation,
    #[serde(rename = "L")]
    pub period: f64,
}

impl ModulationWeights {
    pub fn new(space: Space, s: f64, b: f64, period: f64) -> Self {
        let modulation = match space {
            Space::S => Modulation::Schrodinger,
            Space::B => Modulation::Boussinesq,
        };
        Self { s, b, modulation, period }
    }

    pub fn weight(&self, n: i64, tau: f64) -> f64 {
        let kappa = 2.0 * std::f64::consts::PI / self.period;
        bracket(self.modulation.eval(n, tau, kappa)).powf(self.b) * bracket(n as f64).powf(self.s)
    }
}

/// `√(h Σ ⟨modulation⟩^{2b} ⟨n⟩^{2s} |f|²)`.
pub fn weighted_norm(f: &LatticeFunction, w: &ModulationWeights) -> Result<f64> {
    f.check_support()?;
    Ok(f.map_weight(|n, t| w.weight(n, t)).l2_norm())
}

/// `X^S_{s,b}` or `X^B_{s,b}` norm with period `L = 2π`.
pub fn x_norm(f: &LatticeFunction, space: Space, s: f64, b: f64) -> Result<f64> {
    weighted_norm(f, &ModulationWeights::new(space, s, b, 2.0 * std::f64::consts::PI))
}

/// `(1 + |x − y|)/(1 + |x − √(y² + y)|)`.
pub fn lemma33_ratio(x: f64, y: f64) -> f64 {
    (1.0 + (x - y).abs()) / (1.0 + (x - (y * y + y).sqrt()).abs())
}

/// Extrema of [`lemma33_ratio`] over `[0, x_max] × [0, y_max]` with `n_points` per axis.
pub fn lemma33_sup(x_max: f64, y_max: f64, n_points: usize) -> Result<(f64, f64)> {
    if !(x_max > 0.0 && y_max > 0.0 && n_points >= 2) {
        return Err(Error::Domain("lemma33_sup needs positive ranges and ≥ 2 points".into()));
    }
    let step = |m: f64, i: usize| m * i as f64 / (n_points - 1) as f64;
    let (sup, inf) = (0..n_points)
        .into_par_iter()
        .map(|i| {
            let x = step(x_max, i);
            (0..n_points).fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), j| {
                let r = lemma33_ratio(x, step(y_max, j));
                (hi.max(r), lo.min(r))
            })
        })
        .reduce(|| (f64::NEG_INFINITY, f64::INFINITY), |a, b| (a.0.max(b.0), a.1.min(b.1)));
    Ok((sup, inf))
}

/// `Σ_{|n₁| ≤ N₁} (1 + |τ + sign·n₁(n − n₁)|)^{−γ}` without checking `γ`.
pub fn lemma32_partial_sum(gamma: f64, n: i64, tau: f64, sign: f64, n1_max: i64) -> f64 {
    (-n1_max..=n1_max)
        .map(|n1| {
            let q = (n1 as f64) * ((n - n1) as f64);
            (1.0 + (tau + sign * q).abs()).powf(-gamma)
        })
        .sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct Lemma32Report {
    pub gamma: f64,
    pub sup: f64,
    pub sup_half: f64,
    /// Relative growth from `N1_max/2` to `N1_max` at the maximizer.
    pub saturation: f64,
    pub argmax_n: i64,
    pub argmax_tau: f64,
    pub argmax_sign: f64,
    pub n1_max: i64,
}

impl Lemma32Report {
    pub fn saturated(&self) -> bool {
        self.saturation < 0.01
    }
}

/// Sup of the truncated sums over `|n| ≤ n_grid`, integer `|τ| ≤ tau_samples`, both signs.
///
/// All samples are screened at a moderate truncation; the three largest are
/// then evaluated at `N1_max/2` and `N1_max`.
pub fn lemma32_sup(gamma: f64, n_grid: i64, tau_samples: i64, n1_max: i64) -> Result<Lemma32Report> {
    if !(gamma > 0.5) {
        return Err(Error::Domain(format!("γ = {gamma} must exceed 1/2")));
    }
    if n_grid < 0 || tau_samples < 0 || n1_max < 2 {
        return Err(Error::Domain("lemma32_sup needs n_grid, tau_samples ≥ 0 and N1_max ≥ 2".into()));
    }
    let coarse = n1_max.min(4096);
    let mut samples: Vec<(f64, i64, f64, f64)> = (-n_grid..=n_grid)
        .flat_map(|n| (-tau_samples..=tau_samples).flat_map(move |t| [1.0, -1.0].map(|sg| (n, t as f64, sg))))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(n, t, sg)| (lemma32_partial_sum(gamma, n, t, sg, coarse), n, t, sg))
        .collect();
    samples.sort_by(|a, b| b.0.total_cmp(&a.0));
    let best = samples
        .iter()
        .take(3)
        .map(|&(_, n, t, sg)| {
            let full = lemma32_partial_sum(gamma, n, t, sg, n1_max);
            let half = lemma32_partial_sum(gamma, n, t, sg, n1_max / 2);
            (full, half, n, t, sg)
        })
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .expect("at least one sample");
    let (sup, sup_half, n, t, sg) = best;
    Ok(Lemma32Report {
        gamma,
        sup,
        sup_half,
        saturation: (sup - sup_half) / sup,
        argmax_n: n,
        argmax_tau: t,
        argmax_sign: sg,
        n1_max,
    })
}

/// `∫ dx / (⟨x − α⟩^p ⟨x − β⟩^q)` over the real line.
pub fn lemma31_integral(p: f64, q: f64, alpha: f64, beta: f64) -> Result<f64> {
    if !(p > 0.0 && q > 0.0 && p + q > 1.0) {
        return Err(Error::Domain(format!("need p, q > 0 and p + q > 1 (p={p}, q={q})")));
    }
    let f = |x: f64| 1.0 / (bracket(x - alpha).powf(p) * bracket(x - beta).powf(q));
    let (lo, hi) = (alpha.min(beta), alpha.max(beta));
    let tol = 1e-13;
    let mid = if hi > lo {
        // Split at the midpoint so each kink sits at an interval end.
        let m = 0.5 * (lo + hi);
        adaptive_gauss_kronrod(f, lo, m, tol) + adaptive_gauss_kronrod(f, m, hi, tol)
    } else {
        0.0
    };
    let right = semi_infinite(f, hi, p + q, tol);
    let left = semi_infinite(|x| f(-x), -lo, p + q, tol);
    Ok(left + mid + right)
}

/// `LHS·⟨α − β⟩^r` at one pair.
pub fn lemma31_constant(p: f64, q: f64, alpha: f64, beta: f64) -> Result<f64> {
    let r = p.min(q).min(p + q - 1.0);
    Ok(lemma31_integral(p, q, alpha, beta)? * bracket(alpha - beta).powf(r))
}

/// Max of [`lemma31_constant`] over all `(α, β)` pairs.
pub fn lemma31_check(p: f64, q: f64, alphas: &[f64], betas: &[f64]) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for &a in alphas {
        for &b in betas {
            best = best.max(lemma31_constant(p, q, a, b)?);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CounterexampleCase {
    /// `‖uv‖_{X^S_{k,−a}} ≲ ‖u‖_{X^S_{k,b}} ‖v‖_{X^B_{s,b}}`, growth `N^{k−s}`.
    I,
    /// Same estimate, growth `N^{−(k+s)}`.
    II,
    /// `‖u₁ū₂‖_{X^B_{s,−a}} ≲ ‖u₁‖_{X^S_{k,b}} ‖u₂‖_{X^S_{k,b}}`, growth `N^{s−k}`.
    III,
}

impl CounterexampleCase {
    pub fn expected_slope(self, k: f64, s: f64) -> f64 {
        match self {
            CounterexampleCase::I => k - s,
            CounterexampleCase::II => -(k + s),
            CounterexampleCase::III => s - k,
        }
    }
}

impl std::str::FromStr for CounterexampleCase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "i" | "1" | "I" => Ok(Self::I),
            "ii" | "2" | "II" => Ok(Self::II),
            "iii" | "3" | "III" => Ok(Self::III),
            _ => Err(Error::Usage(format!("unknown counterexample case {s:?}"))),
        }
    }
}

/// One factor of a bilinear form: profile `f` and the weights of its space.
#[derive(Debug, Clone)]
pub struct Factor {
    pub profile: LatticeFunction,
    pub index: f64,
    pub modulation: Modulation,
}

/// `‖⟨n⟩^{k_out}⟨σ⟩^{−a} (F ⋆ G)‖ / (‖f‖‖g‖)` with `F = f/(⟨n⟩^{idx}⟨σ⟩^b)` (`L = 2π`).
pub fn dual_ratio(f: &Factor, g: &Factor, out_index: f64, out_modulation: Modulation, a: f64, b: f64) -> Result<f64> {
    let unweight = |x: &Factor| {
        let w = ModulationWeights { s: x.index, b, modulation: x.modulation, period: 2.0 * std::f64::consts::PI };
        x.profile.map_weight(|n, t| 1.0 / w.weight(n, t))
    };
    let prod = convolve(&unweight(f), &unweight(g))?;
    let w_out = ModulationWeights { s: out_index, b: -a, modulation: out_modulation, period: 2.0 * std::f64::consts::PI };
    let num = weighted_norm(&prod, &w_out)?;
    let den = f.profile.l2_norm() * g.profile.l2_norm();
    if den == 0.0 {
        return Err(Error::Domain("zero factor in bilinear ratio".into()));
    }
    Ok(num / den)
}

/// `χ((τ − c)/2)` on row `n`, padded by `pad` grid points on each side.
fn chi_row(h: f64, n: i64, centre: f64, t_max: f64, f: &mut LatticeFunction) -> Result<()> {
    let _ = t_max;
    let lo = ((centre - 2.0) / h - 1e-9).ceil() as i64;
    let hi = ((centre + 2.0) / h + 1e-9).floor() as i64;
    f.set_row(n, lo, vec![Complex64::new(1.0, 0.0); (hi - lo + 1) as usize])
}

/// The sequences `f_N`, `g_N` for one case, as dual-form factors.
pub fn counterexample_factors(case: CounterexampleCase, big_n: i64, k: f64, s: f64, h: f64) -> Result<(Factor, Factor, f64, Modulation)> {
    let nn = (big_n * big_n) as f64;
    let t_max = nn + 4.0;
    let n_max = big_n + 1;
    let mut f = LatticeFunction::new(h, n_max, t_max)?;
    let mut g = LatticeFunction::new(h, n_max, t_max)?;
    let (fi, gi, out_i, f_mod, g_mod, out_mod) = match case {
        CounterexampleCase::I => {
            chi_row(h, 0, 0.0, t_max, &mut f)?;
            chi_row(h, big_n, -nn, t_max, &mut g)?;
            (k, s, k, Modulation::Schrodinger, Modulation::BoussinesqSquare, Modulation::Schrodinger)
        }
        CounterexampleCase::II => {
            chi_row(h, -big_n, -nn, t_max, &mut f)?;
            chi_row(h, big_n, nn, t_max, &mut g)?;
            (k, s, k, Modulation::Schrodinger, Modulation::BoussinesqSquare, Modulation::Schrodinger)
        }
        CounterexampleCase::III => {
            chi_row(h, big_n, -nn, t_max, &mut f)?;
            chi_row(h, 0, 0.0, t_max, &mut g)?;
            (k, k, s, Modulation::Schrodinger, Modulation::SchrodingerConj, Modulation::BoussinesqSquare)
        }
    };
    Ok((
        Factor { profile: f, index: fi, modulation: f_mod },
        Factor { profile: g, index: gi, modulation: g_mod },
        out_i,
        out_mod,
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct CounterexampleReport {
    pub case: CounterexampleCase,
    pub k: f64,
    pub s: f64,
    pub a: f64,
    pub b: f64,
    #[serde(rename = "N_list")]
    pub n_list: Vec<i64>,
    pub ratios: Vec<f64>,
    pub slope: f64,
    pub expected_slope: f64,
    pub r2: f64,
}

/// Least-squares line through `(x, y)`: `(slope, r²)`.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, r2)
}

pub fn counterexample_slope(case: CounterexampleCase, k: f64, s: f64, a: f64, b: f64, n_list: &[i64]) -> Result<CounterexampleReport> {
    if n_list.len() < 4 || n_list.windows(2).any(|w| w[1] <= w[0]) || n_list[0] < 1 {
        return Err(Error::Domain("N_list must be increasing, positive, with ≥ 4 values".into()));
    }
    if !(a > 0.25 && a < 0.5 && b > 0.5) {
        return Err(Error::Domain(format!("need 1/4 < a < 1/2 < b (a={a}, b={b})")));
    }
    let ratios = n_list
        .par_iter()
        .map(|&nn| {
            let (f, g, out_i, out_mod) = counterexample_factors(case, nn, k, s, DEFAULT_H)?;
            dual_ratio(&f, &g, out_i, out_mod, a, b)
        })
        .collect::<Result<Vec<_>>>()?;
    let lx: Vec<f64> = n_list.iter().map(|&n| (n as f64).ln()).collect();
    let ly: Vec<f64> = ratios.iter().map(|r| r.ln()).collect();
    let (slope, r2) = fit_line(&lx, &ly);
    Ok(CounterexampleReport {
        case,
        k,
        s,
        a,
        b,
        n_list: n_list.to_vec(),
        ratios,
        slope,
        expected_slope: case.expected_slope(k, s),
        r2,
    })
}

/// `C^∞` bump supported on `(−1, 1)`.
fn bump(x: f64) -> f64 {
    if x.abs() < 1.0 {
        (-1.0 / (1.0 - x * x)).exp()
    } else {
        0.0
    }
}

const TRIAL_N: i64 = 8;
const TRIAL_T: i64 = 8;

/// Random smooth profile: Gaussian weights on integer `τ` nodes times a bump,
/// so refining `h` samples the same function.
pub fn random_profile(rng: &mut ChaCha8Rng, h: f64) -> Result<LatticeFunction> {
    let nodes = 2 * (TRIAL_T - 1) + 1;
    let coeffs: Vec<Vec<Complex64>> = (0..2 * TRIAL_N + 1)
        .map(|_| {
            (0..nodes)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    Complex64::new(re, im)
                })
                .collect()
        })
        .collect();
    LatticeFunction::from_fn(h, TRIAL_N + 1, (TRIAL_T + 1) as f64, |n, tau| {
        if n.abs() > TRIAL_N {
            return Complex64::default();
        }
        let row = &coeffs[(n + TRIAL_N) as usize];
        let centre = tau.round() as i64;
        (centre - 1..=centre + 1)
            .filter(|j| j.abs() < TRIAL_T)
            .map(|j| row[(j + TRIAL_T - 1) as usize] * bump(tau - j as f64))
            .sum()
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BilinearReport {
    pub s: f64,
    pub a: f64,
    pub b: f64,
    pub h: f64,
    pub n_trials: usize,
    pub seed: u64,
    /// Max of `‖uv‖_{X^S_{s,−a}} / (‖u‖_{X^S_{s,b}} ‖v‖_{X^B_{s,b}})`.
    pub max_ratio_i: f64,
    /// Max of `‖u₁ū₂‖_{X^B_{s,−a}} / (‖u₁‖_{X^S_{s,b}} ‖u₂‖_{X^S_{s,b}})`.
    pub max_ratio_ii: f64,
}

/// Ratios for one pair of transforms `ũ`, `ṽ`.
pub fn bilinear_ratios(u: &LatticeFunction, v: &LatticeFunction, s: f64, a: f64, b: f64) -> Result<(f64, f64)> {
    let uv = convolve(u, v)?;
    let r1 = x_norm(&uv, Space::S, s, -a)? / (x_norm(u, Space::S, s, b)? * x_norm(v, Space::B, s, b)?);
    let uv_bar = convolve(u, &v.conj_reflect())?;
    let r2 = x_norm(&uv_bar, Space::B, s, -a)? / (x_norm(u, Space::S, s, b)? * x_norm(v, Space::S, s, b)?);
    Ok((r1, r2))
}

pub fn bilinear_ratio_sample(s: f64, a: f64, b: f64, n_trials: usize, seed: u64, h: f64) -> Result<BilinearReport> {
    if !(s >= 0.0 && a > 0.25 && a < 0.5 && b > 0.5) {
        return Err(Error::Domain(format!("need s ≥ 0 and 1/4 < a < 1/2 < b (s={s}, a={a}, b={b})")));
    }
    let ratios = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t as u64));
            let u = random_profile(&mut rng, h)?;
            let v = random_profile(&mut rng, h)?;
            bilinear_ratios(&u, &v, s, a, b)
        })
        .collect::<Result<Vec<_>>>()?;
    let max_ratio_i = ratios.iter().map(|r| r.0).fold(0.0, f64::max);
    let max_ratio_ii = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(BilinearReport { s, a, b, h, n_trials, seed, max_ratio_i, max_ratio_ii })
}
