//! Structured random test fields.
//!
//! Coefficients are drawn as `|f_n| = A·ξ_n·(1 + (qn/δ)²)^{-(σ+1)/2}` with
//! `ξ_n` uniform on `[1/2, 3/2]` and a random phase compatible with the
//! requested parity. This keeps `‖f‖_σ` finite with a nontrivial tail, so
//! norm inequalities are tested away from the trivially resolved regime.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{Grid, Parity, SpectralField};

/// Deterministic random number generator used by every stochastic routine.
pub type SimRng = ChaCha8Rng;

/// Generator seeded from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream number `stream` derived from a base seed, used to give
/// each Monte Carlo trial its own generator regardless of scheduling.
pub fn trial_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Shape of a structured random field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSpec {
    /// Decay exponent `σ` of the coefficient envelope.
    pub sigma: f64,
    /// Frequency scale `δ` of the envelope.
    pub delta: f64,
    /// Overall coefficient scale `A`.
    pub amplitude: f64,
    /// Parity of the generated real field.
    pub parity: Parity,
    /// Largest `|n|` with a nonzero coefficient; `None` uses every mode below
    /// the Nyquist mode.
    pub max_mode: Option<usize>,
    /// Force `f_0 = 0`.
    pub zero_mean: bool,
}

impl FieldSpec {
    /// Envelope of exponent `σ` at scale `δ` with unit amplitude, no parity,
    /// full band.
    pub fn new(sigma: f64, delta: f64) -> FieldSpec {
        FieldSpec {
            sigma,
            delta,
            amplitude: 1.0,
            parity: Parity::None,
            max_mode: None,
            zero_mean: false,
        }
    }

    pub fn amplitude(mut self, a: f64) -> FieldSpec {
        self.amplitude = a;
        self
    }

    pub fn parity(mut self, p: Parity) -> FieldSpec {
        self.parity = p;
        self
    }

    pub fn max_mode(mut self, m: usize) -> FieldSpec {
        self.max_mode = Some(m);
        self
    }

    pub fn zero_mean(mut self, z: bool) -> FieldSpec {
        self.zero_mean = z;
        self
    }
}

/// Draw a real structured random field on `grid`.
pub fn structured_field<R: Rng>(grid: &Arc<Grid>, spec: &FieldSpec, rng: &mut R) -> SpectralField {
    let n = grid.n();
    let top = spec.max_mode.unwrap_or(n / 2 - 1).min(n / 2 - 1);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
    let q = grid.q();
    for m in 0..=top {
        if m == 0 && (spec.zero_mean || spec.parity == Parity::Odd) {
            continue;
        }
        let k = q * m as f64 / spec.delta;
        let mag = spec.amplitude * rng.random_range(0.5..1.5) * (1.0 + k * k).powf(-(spec.sigma + 1.0) / 2.0);
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let c = if m == 0 {
            Complex64::new(sign * mag, 0.0)
        } else {
            match spec.parity {
                Parity::Even => Complex64::new(sign * mag, 0.0),
                Parity::Odd => Complex64::new(0.0, sign * mag),
                Parity::None => Complex64::from_polar(mag, rng.random_range(0.0..std::f64::consts::TAU)),
            }
        };
        coeffs[m] = c;
        if m > 0 {
            coeffs[n - m] = c.conj();
        }
    }
    SpectralField::from_coeffs(grid.clone(), coeffs, spec.parity)
}
