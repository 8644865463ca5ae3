//! Numerical laboratory for the periodic Schrödinger–Boussinesq system
//!
//! ```text
//! i u_t + u_xx = α v u,
//! v_tt − v_xx + v_xxxx = β (|u|²)_xx,      x ∈ [0, L) periodic.
//! ```
//!
//! The crate builds the explicit cnoidal standing waves and their branch in ω,
//! checks the spectral (inertia) and convexity conditions behind their orbital
//! stability, integrates the full system with a Lawson–RK4 pseudospectral
//! scheme, follows the non-explicit solution branch of the coupled profile
//! system by Newton continuation, and probes the discrete Bourgain-space
//! bilinear estimates and their counterexamples on an (n, τ) lattice.

pub mod cli;
pub mod cnoidal;
pub mod continuation;
pub mod elliptic;
pub mod error;
pub mod estimate_probe;
pub mod evolution;
pub mod functionals;
pub mod hill_spectra;
pub mod linalg;
pub mod orbital;
pub mod output;
pub mod quadrature;
pub mod spectral_grid;

pub use error::{Error, Result};

pub use num_complex::Complex64;
