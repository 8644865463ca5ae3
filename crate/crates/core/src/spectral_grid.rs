//! Equispaced periodic grid, discrete Fourier transforms with the `1/L`
//! forward normalization, spectral differentiation and 2/3-rule dealiasing.
//!
//! Coefficient arrays are stored in FFT order: slot `j` holds wavenumber
//! index `n = j` for `j < N/2` and `n = j − N` otherwise, so slot `N/2` is the
//! Nyquist mode `n = −N/2`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::{Error, Result};

/// Default spectral-tail limit for a field to count as resolved.
pub const RESOLUTION_LIMIT: f64 = 1e-10;

/// Periodic grid of `N` points on `[0, L)` with cached FFT plans.
#[derive(Clone)]
pub struct FourierGrid {
    period: f64,
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for FourierGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FourierGrid").field("period", &self.period).field("n", &self.n).finish()
    }
}

impl PartialEq for FourierGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.period == other.period
    }
}

impl FourierGrid {
    pub fn new(period: f64, n: usize) -> Result<Arc<Self>> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::Domain(format!("grid period L = {period} must be positive")));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::Domain(format!("grid size N = {n} must be a power of two ≥ 4")));
        }
        let mut planner = FftPlanner::new();
        Ok(Arc::new(Self {
            period,
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }))
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn spacing(&self) -> f64 {
        self.period / self.n as f64
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n).map(|j| j as f64 * self.spacing()).collect()
    }

    /// Integer wavenumber index of FFT slot `j`.
    pub fn index(&self, j: usize) -> i64 {
        if j < self.n / 2 {
            j as i64
        } else {
            j as i64 - self.n as i64
        }
    }

    /// FFT slot of wavenumber index `n`, if it is on the grid.
    pub fn slot(&self, n: i64) -> Option<usize> {
        let half = (self.n / 2) as i64;
        if n >= -half && n < half {
            Some(if n >= 0 { n as usize } else { (n + self.n as i64) as usize })
        } else {
            None
        }
    }

    pub fn nyquist_slot(&self) -> usize {
        self.n / 2
    }

    /// Physical wavenumber `ξ_n = 2πn/L` of slot `j`.
    pub fn wavenumber(&self, j: usize) -> f64 {
        2.0 * PI * self.index(j) as f64 / self.period
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.wavenumber(j)).collect()
    }

    /// `f̂(n) = (1/N) Σ_j f(x_j) e^{−2πi jn/N}`, the discrete form of `(1/L)∫ f e^{−iξx}`.
    pub fn forward(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut buf = values.to_vec();
        self.forward.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        buf
    }

    /// `f(x_j) = Σ_n f̂(n) e^{iξ_n x_j}`.
    pub fn inverse(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let mut buf = coeffs.to_vec();
        self.inverse.process(&mut buf);
        buf
    }

    /// Two-thirds rule: keeps `|n| ≤ N/3`.
    pub fn dealias_mask(&self, j: usize) -> bool {
        3 * self.index(j).unsigned_abs() as usize <= self.n
    }
}

/// An `L`-periodic function held as grid samples together with its Fourier
/// coefficients.
#[derive(Debug, Clone)]
pub struct SpectralField {
    grid: Arc<FourierGrid>,
    values: Vec<Complex64>,
    coeffs: Vec<Complex64>,
    is_real: bool,
}

impl SpectralField {
    pub fn from_values(grid: &Arc<FourierGrid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Usage(format!("{} samples for a grid of {}", values.len(), grid.len())));
        }
        let coeffs = grid.forward(&values);
        Ok(Self { grid: grid.clone(), values, coeffs, is_real: false })
    }

    pub fn from_real(grid: &Arc<FourierGrid>, values: &[f64]) -> Result<Self> {
        let cv = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut f = Self::from_values(grid, cv)?;
        f.is_real = true;
        f.symmetrize();
        Ok(f)
    }

    pub fn from_coeffs(grid: &Arc<FourierGrid>, coeffs: Vec<Complex64>, is_real: bool) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::Usage(format!("{} coefficients for a grid of {}", coeffs.len(), grid.len())));
        }
        let mut f = Self { grid: grid.clone(), values: Vec::new(), coeffs, is_real };
        if is_real {
            f.symmetrize();
        } else {
            f.values = f.grid.inverse(&f.coeffs);
        }
        Ok(f)
    }

    pub fn from_fn<F: Fn(f64) -> f64>(grid: &Arc<FourierGrid>, f: F) -> Self {
        let vals: Vec<f64> = grid.xs().into_iter().map(f).collect();
        Self::from_real(grid, &vals).expect("sample count matches grid")
    }

    pub fn from_complex_fn<F: Fn(f64) -> Complex64>(grid: &Arc<FourierGrid>, f: F) -> Self {
        let vals = grid.xs().into_iter().map(f).collect();
        Self::from_values(grid, vals).expect("sample count matches grid")
    }

    pub fn zeros(grid: &Arc<FourierGrid>) -> Self {
        Self::from_coeffs(grid, vec![Complex64::new(0.0, 0.0); grid.len()], true).unwrap()
    }

    /// Enforces Hermitian coefficient symmetry and real samples.
    fn symmetrize(&mut self) {
        let n = self.grid.len();
        let mut sym = self.coeffs.clone();
        for j in 0..n {
            let mirror = (n - j) % n;
            sym[j] = 0.5 * (self.coeffs[j] + self.coeffs[mirror].conj());
        }
        self.coeffs = sym;
        self.values = self.grid.inverse(&self.coeffs).into_iter().map(|c| Complex64::new(c.re, 0.0)).collect();
    }

    pub fn grid(&self) -> &Arc<FourierGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn is_real(&self) -> bool {
        self.is_real
    }

    pub fn real_values(&self) -> Vec<f64> {
        self.values.iter().map(|c| c.re).collect()
    }

    /// Coefficient at integer index `n` (zero off the grid).
    pub fn coeff(&self, n: i64) -> Complex64 {
        self.grid.slot(n).map(|j| self.coeffs[j]).unwrap_or_default()
    }

    fn check_grid(&self, other: &Self) -> Result<()> {
        if *self.grid != *other.grid {
            return Err(Error::Usage(format!(
                "grid mismatch: (L={}, N={}) vs (L={}, N={})",
                self.grid.period,
                self.grid.n,
                other.grid.period,
                other.grid.n
            )));
        }
        Ok(())
    }

    /// Relative size of the coefficients above the dealiasing cutoff `N/3`.
    pub fn spectral_tail(&self) -> f64 {
        let peak = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if peak == 0.0 {
            return 0.0;
        }
        let tail = (0..self.grid.len())
            .filter(|&j| !self.grid.dealias_mask(j))
            .map(|j| self.coeffs[j].norm())
            .fold(0.0, f64::max);
        tail / peak
    }

    pub fn check_resolved(&self, limit: f64) -> Result<()> {
        let tail = self.spectral_tail();
        if tail > limit {
            return Err(Error::Resolution { tail, limit });
        }
        Ok(())
    }

    /// `∂ₓ^order f`; the Nyquist mode is dropped for odd orders.
    pub fn derivative(&self, order: u32) -> Result<Self> {
        if !(1..=4).contains(&order) {
            return Err(Error::Usage(format!("derivative order {order} not in 1..=4")));
        }
        self.check_resolved(RESOLUTION_LIMIT)?;
        Ok(self.derivative_unchecked(order))
    }

    pub(crate) fn derivative_unchecked(&self, order: u32) -> Self {
        let nyq = self.grid.nyquist_slot();
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(j, &c)| {
                if order % 2 == 1 && j == nyq {
                    return Complex64::new(0.0, 0.0);
                }
                c * Complex64::new(0.0, self.grid.wavenumber(j)).powu(order)
            })
            .collect();
        Self::from_coeffs(&self.grid, coeffs, self.is_real).unwrap()
    }

    /// Zeroes every mode with `|n| > N/3`.
    pub fn dealias(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(j, &c)| if self.grid.dealias_mask(j) { c } else { Complex64::new(0.0, 0.0) })
            .collect();
        Self::from_coeffs(&self.grid, coeffs, self.is_real).unwrap()
    }

    /// Pointwise product on the grid.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_grid(other)?;
        let vals = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        let mut f = Self::from_values(&self.grid, vals)?;
        if self.is_real && other.is_real {
            f.is_real = true;
            f.symmetrize();
        }
        Ok(f)
    }

    pub fn scale(&self, a: Complex64) -> Self {
        let coeffs = self.coeffs.iter().map(|c| c * a).collect();
        Self::from_coeffs(&self.grid, coeffs, self.is_real && a.im == 0.0).unwrap()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_grid(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Self::from_coeffs(&self.grid, coeffs, self.is_real && other.is_real)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_grid(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        Self::from_coeffs(&self.grid, coeffs, self.is_real && other.is_real)
    }

    /// Translate: `g(x) = f(x + y)`, exact in Fourier space.
    pub fn shift(&self, y: f64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(j, &c)| {
                let xi = if j == self.grid.nyquist_slot() { 0.0 } else { self.grid.wavenumber(j) };
                c * Complex64::from_polar(1.0, xi * y)
            })
            .collect();
        Self::from_coeffs(&self.grid, coeffs, self.is_real).unwrap()
    }

    /// `∫₀^L f dx / L`, i.e. the zero mode.
    pub fn mean(&self) -> Complex64 {
        self.coeffs[0]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `‖f‖²_{H^s} = Σ ⟨n⟩^{2s} |f̂(n)|²` with `⟨n⟩ = 1 + |n|`.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        inner_products(self, self, s).expect("same grid").sqrt()
    }
}

/// `⟨n⟩ = 1 + |n|`.
pub fn bracket(n: f64) -> f64 {
    1.0 + n.abs()
}

/// `Re Σ_n ⟨n⟩^{2s} f̂(n) conj(ĝ(n))`.
pub fn inner_products(f: &SpectralField, g: &SpectralField, s: f64) -> Result<f64> {
    f.check_grid(g)?;
    let grid = f.grid();
    Ok((0..grid.len())
        .map(|j| {
            let w = bracket(grid.index(j) as f64).powf(2.0 * s);
            w * (f.coeffs[j] * g.coeffs[j].conj()).re
        })
        .sum())
}
