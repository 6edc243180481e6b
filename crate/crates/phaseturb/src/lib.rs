//! Pseudo-spectral simulation and verification toolkit for phase turbulence
//! in the one-dimensional periodic complex Ginzburg–Landau equation.
//!
//! The crate is organised bottom-up:
//!
//! * [`grid`] owns the periodic grid, the Fourier transform convention
//!   `f_n = (1/N) Σ_j e^{-iqn x_j} f(x_j)` and all spectral plumbing.
//! * [`symbols`] holds the closed-form Fourier multipliers of the derived
//!   phase/amplitude system and the dispersion relation.
//! * [`norms`] implements the δ-weighted Fourier norm family and the
//!   initial-data class test.
//! * [`nonlinear`] evaluates every nonlinear map of the derived system.
//! * [`etd`] provides fourth-order exponential time differencing for diagonal
//!   and 2×2 block linear parts.
//! * [`cgl`], [`phase`] integrate the Ginzburg–Landau equation, the
//!   Kuramoto–Sivashinsky equation and the coupled amplitude/phase system.
//! * [`coercive`] builds the comparison function φ and checks the coercivity
//!   estimates it is designed for.
//! * [`experiments`] chains everything into the scaling studies.
//! * [`config`] and [`io`] handle configuration files and run artefacts.
//!
//! Data-parallel work (Monte Carlo trials, parameter sweeps, double sums) goes
//! through [`exec::Execution`]. With the `parallel` feature disabled every
//! path runs sequentially and produces identical results.

pub mod cgl;
pub mod coercive;
pub mod config;
pub mod error;
pub mod etd;
pub mod exec;
pub mod experiments;
pub mod grid;
pub mod io;
pub mod nonlinear;
pub mod norms;
pub mod phase;
pub mod random;
pub mod symbols;

pub use error::{Error, Result};
pub use exec::Execution;
pub use grid::{Grid, Parity, RealField, SpectralField};
pub use num_complex::Complex64;

/// Crate version recorded in every run manifest.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
