//! Fourier-truncated Hill operators linearized about a wave and their
//! low-lying spectra.
//!
//! With potential data `(ω, ψ, φ)`:
//!
//! ```text
//! L1 = −∂² + ω − 2ψ          L2 = −∂² + ω − ψ
//! AR = [[2(−∂² + ω − φ), −2ψ], [−2ψ, −∂² + 1]]
//! AI = [[2(−∂² + ω − φ),   0], [  0,       I ]]
//! ```
//!
//! For the cnoidal wave `ψ = φ = ψ_ω` and at `ω = 1` these are the operators
//! of the stability analysis. The basis is `e^{iξ_n x}`, `|n| ≤ N/2 − 1`; an
//! even potential makes every matrix real symmetric.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::Serialize;

use crate::cnoidal::WaveProfile;
use crate::linalg::{symmetric_eigen, DenseMatrix};
use crate::spectral_grid::{SpectralField, RESOLUTION_LIMIT};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum OperatorKind {
    L1,
    L2,
    AR,
    AI,
}

impl OperatorKind {
    pub const ALL: [OperatorKind; 4] = [OperatorKind::L1, OperatorKind::L2, OperatorKind::AR, OperatorKind::AI];

    pub fn blocks(self) -> usize {
        match self {
            OperatorKind::L1 | OperatorKind::L2 => 1,
            OperatorKind::AR | OperatorKind::AI => 2,
        }
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            OperatorKind::L1 => "L1",
            OperatorKind::L2 => "L2",
            OperatorKind::AR => "AR",
            OperatorKind::AI => "AI",
        };
        f.write_str(s)
    }
}

impl FromStr for OperatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "L1" => Ok(OperatorKind::L1),
            "L2" => Ok(OperatorKind::L2),
            "AR" => Ok(OperatorKind::AR),
            "AI" => Ok(OperatorKind::AI),
            _ => Err(Error::Usage(format!("unknown operator kind '{s}' (expected L1, L2, AR or AI)"))),
        }
    }
}

/// Restriction to even or odd functions, applied blockwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Parity {
    #[default]
    Full,
    Even,
    Odd,
}

/// Potential data `(ω, ψ, φ)` defining the operators.
#[derive(Debug, Clone)]
pub struct Potential {
    pub omega: f64,
    pub psi: SpectralField,
    pub phi: SpectralField,
}

impl Potential {
    pub fn new(omega: f64, psi: SpectralField, phi: SpectralField) -> Result<Self> {
        if **psi.grid() != **phi.grid() {
            return Err(Error::Usage("ψ and φ live on different grids".into()));
        }
        Ok(Self { omega, psi, phi })
    }

    /// `(ω, ψ_ω, ψ_ω)` for a cnoidal wave.
    pub fn from_wave(wave: &WaveProfile) -> Self {
        Self { omega: wave.omega(), psi: wave.field.clone(), phi: wave.field.clone() }
    }

    fn n(&self) -> usize {
        self.psi.grid().len()
    }

    /// Largest retained wavenumber index `M = N/2 − 1`.
    pub fn max_mode(&self) -> i64 {
        (self.n() / 2) as i64 - 1
    }

    pub fn modes(&self) -> Vec<i64> {
        let m = self.max_mode();
        (-m..=m).collect()
    }
}

/// Real even-potential Fourier coefficient; modes at or beyond Nyquist are dropped.
fn real_coeffs(f: &SpectralField) -> Result<Vec<f64>> {
    f.check_resolved(RESOLUTION_LIMIT)?;
    let n = f.grid().len() as i64;
    let peak = f.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let worst_im = f.coeffs().iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    if worst_im > 1e-10 * peak {
        return Err(Error::Domain(format!("potential is not even: max |Im f̂| = {worst_im:.3e}")));
    }
    // Index j ↔ |n| = j.
    Ok((0..n).map(|j| if j < n / 2 { f.coeff(j).re } else { 0.0 }).collect())
}

fn add_block(
    a: &mut DenseMatrix,
    offset: (usize, usize),
    modes: &[i64],
    xi2: Option<f64>,
    shift: f64,
    pot: Option<(&[f64], f64)>,
    xi_scale: f64,
) {
    let d = modes.len();
    for (i, &ni) in modes.iter().enumerate() {
        if let Some(c) = xi2 {
            let xi = xi_scale * ni as f64;
            a[(offset.0 + i, offset.1 + i)] += c * xi * xi;
        }
        a[(offset.0 + i, offset.1 + i)] += shift;
        if let Some((q, coef)) = pot {
            for (j, &nj) in modes.iter().enumerate().take(d) {
                let idx = (ni - nj).unsigned_abs() as usize;
                if idx < q.len() {
                    a[(offset.0 + i, offset.1 + j)] += coef * q[idx];
                }
            }
        }
    }
}

/// Dense matrix of `kind` in the exponential Fourier basis, blocks stacked.
pub fn assemble(kind: OperatorKind, pot: &Potential) -> Result<DenseMatrix> {
    let psi = real_coeffs(&pot.psi)?;
    let phi = real_coeffs(&pot.phi)?;
    let modes = pot.modes();
    let d = modes.len();
    let xs = 2.0 * std::f64::consts::PI / pot.psi.grid().period();
    let w = pot.omega;
    let mut a = DenseMatrix::zeros(kind.blocks() * d);
    match kind {
        OperatorKind::L1 => add_block(&mut a, (0, 0), &modes, Some(1.0), w, Some((&psi, -2.0)), xs),
        OperatorKind::L2 => add_block(&mut a, (0, 0), &modes, Some(1.0), w, Some((&psi, -1.0)), xs),
        OperatorKind::AR => {
            add_block(&mut a, (0, 0), &modes, Some(2.0), 2.0 * w, Some((&phi, -2.0)), xs);
            add_block(&mut a, (0, d), &modes, None, 0.0, Some((&psi, -2.0)), xs);
            add_block(&mut a, (d, 0), &modes, None, 0.0, Some((&psi, -2.0)), xs);
            add_block(&mut a, (d, d), &modes, Some(1.0), 1.0, None, xs);
        }
        OperatorKind::AI => {
            add_block(&mut a, (0, 0), &modes, Some(2.0), 2.0 * w, Some((&phi, -2.0)), xs);
            add_block(&mut a, (d, d), &modes, None, 1.0, None, xs);
        }
    }
    Ok(a)
}

/// Orthonormal columns spanning the requested parity subspace.
fn parity_basis(modes: &[i64], blocks: usize, parity: Parity) -> Vec<Vec<f64>> {
    let d = modes.len();
    let m = (d as i64 - 1) / 2;
    let idx = |n: i64| (n + m) as usize;
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut cols = Vec::new();
    for b in 0..blocks {
        let off = b * d;
        match parity {
            Parity::Full => {
                for i in 0..d {
                    let mut c = vec![0.0; blocks * d];
                    c[off + i] = 1.0;
                    cols.push(c);
                }
            }
            Parity::Even => {
                let mut c = vec![0.0; blocks * d];
                c[off + idx(0)] = 1.0;
                cols.push(c);
                for n in 1..=m {
                    let mut c = vec![0.0; blocks * d];
                    c[off + idx(n)] = r;
                    c[off + idx(-n)] = r;
                    cols.push(c);
                }
            }
            Parity::Odd => {
                for n in 1..=m {
                    let mut c = vec![0.0; blocks * d];
                    c[off + idx(n)] = r;
                    c[off + idx(-n)] = -r;
                    cols.push(c);
                }
            }
        }
    }
    cols
}

/// Lowest eigenpairs together with inertia counts over the whole spectrum.
#[derive(Debug, Clone, Serialize)]
pub struct Spectrum {
    pub kind: OperatorKind,
    pub parity: Parity,
    /// Ascending, the `m` lowest.
    pub eigenvalues: Vec<f64>,
    /// Coefficient vectors in the exponential basis, blocks stacked.
    #[serde(skip)]
    pub eigenvectors: Vec<Vec<f64>>,
    pub n_negative: usize,
    pub n_zero: usize,
    pub zero_tol: f64,
    pub lambda_max: f64,
    #[serde(skip)]
    pub modes: Vec<i64>,
}

impl Spectrum {
    pub fn blocks(&self) -> usize {
        self.kind.blocks()
    }

    /// Grid samples of eigenvector `j`, one complex vector per block.
    pub fn sample_eigenvector(&self, j: usize, grid: &std::sync::Arc<crate::spectral_grid::FourierGrid>) -> Vec<Vec<Complex64>> {
        let d = self.modes.len();
        (0..self.blocks())
            .map(|b| {
                let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.len()];
                for (i, &n) in self.modes.iter().enumerate() {
                    if let Some(slot) = grid.slot(n) {
                        coeffs[slot] = Complex64::new(self.eigenvectors[j][b * d + i], 0.0);
                    }
                }
                grid.inverse(&coeffs)
            })
            .collect()
    }

    /// `|⟨v_j, c⟩| / (‖v_j‖‖c‖)` against a coefficient vector.
    pub fn cosine_similarity(&self, j: usize, candidate: &[Complex64]) -> f64 {
        let v = &self.eigenvectors[j];
        let dot: Complex64 = v.iter().zip(candidate).map(|(a, c)| *a * c.conj()).sum();
        let nv: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nc: f64 = candidate.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        dot.norm() / (nv * nc)
    }
}

/// `m` lowest eigenpairs of `kind` about the cnoidal wave.
pub fn spectrum(kind: OperatorKind, wave: &WaveProfile, m: usize) -> Result<Spectrum> {
    spectrum_of(kind, &Potential::from_wave(wave), m, Parity::Full)
}

pub fn spectrum_of(kind: OperatorKind, pot: &Potential, m: usize, parity: Parity) -> Result<Spectrum> {
    let a = assemble(kind, pot)?;
    let modes = pot.modes();
    let basis = parity_basis(&modes, kind.blocks(), parity);
    if m > basis.len() {
        return Err(Error::Usage(format!("requested {m} eigenvalues of a {}-dimensional operator", basis.len())));
    }
    let (eig, lift) = match parity {
        Parity::Full => (symmetric_eigen(&a)?, None),
        _ => (symmetric_eigen(&a.project(&basis))?, Some(&basis)),
    };
    let lambda_max = eig.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let zero_tol = 1e-7 * (1.0 + lambda_max);
    let n_negative = eig.values.iter().filter(|&&v| v < -zero_tol).count();
    let n_zero = eig.values.iter().filter(|&&v| v.abs() <= zero_tol).count();
    let eigenvectors = eig.vectors[..m]
        .iter()
        .map(|y| match lift {
            None => y.clone(),
            Some(cols) => {
                let mut out = vec![0.0; a.dim()];
                for (coef, col) in y.iter().zip(cols.iter()) {
                    for (o, c) in out.iter_mut().zip(col) {
                        *o += coef * c;
                    }
                }
                out
            }
        })
        .collect();
    Ok(Spectrum {
        kind,
        parity,
        eigenvalues: eig.values[..m].to_vec(),
        eigenvectors,
        n_negative,
        n_zero,
        zero_tol,
        lambda_max,
        modes,
    })
}

/// Coefficients of `f` on the retained modes.
pub fn coefficient_vector(f: &SpectralField, modes: &[i64]) -> Vec<Complex64> {
    modes.iter().map(|&n| f.coeff(n)).collect()
}

/// `A·c` for a complex coefficient vector.
pub fn apply(a: &DenseMatrix, c: &[Complex64]) -> Vec<Complex64> {
    let re: Vec<f64> = c.iter().map(|z| z.re).collect();
    let im: Vec<f64> = c.iter().map(|z| z.im).collect();
    a.matvec(&re).into_iter().zip(a.matvec(&im)).map(|(r, i)| Complex64::new(r, i)).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelReport {
    pub kind: OperatorKind,
    /// `‖A·v‖/‖v‖` for the analytic kernel candidate `v`.
    pub residual: f64,
    pub candidate_norm: f64,
}

/// Analytic kernel candidate: `ψ′` (L1), `ψ` (L2), `(ψ′, ψ′)` (AR), `(ψ, 0)` (AI).
pub fn kernel_candidate(kind: OperatorKind, pot: &Potential) -> Result<Vec<Complex64>> {
    let modes = pot.modes();
    let psi = coefficient_vector(&pot.psi, &modes);
    let dpsi = coefficient_vector(&pot.psi.derivative(1)?, &modes);
    let zeros = vec![Complex64::new(0.0, 0.0); modes.len()];
    Ok(match kind {
        OperatorKind::L1 => dpsi,
        OperatorKind::L2 => psi,
        OperatorKind::AR => [dpsi.clone(), dpsi].concat(),
        OperatorKind::AI => [psi, zeros].concat(),
    })
}

pub fn kernel_check(kind: OperatorKind, wave: &WaveProfile) -> Result<KernelReport> {
    kernel_check_of(kind, &Potential::from_wave(wave))
}

pub fn kernel_check_of(kind: OperatorKind, pot: &Potential) -> Result<KernelReport> {
    let a = assemble(kind, pot)?;
    let v = kernel_candidate(kind, pot)?;
    let av = apply(&a, &v);
    let norm = |x: &[Complex64]| x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let candidate_norm = norm(&v);
    Ok(KernelReport { kind, residual: norm(&av) / candidate_norm, candidate_norm })
}
