//! Periodic grid, Fourier transform contract, spectral derivatives,
//! frequency projectors, parity enforcement and dealiasing.
//!
//! Conventions:
//!
//! * Collocation points `x_j = -L/2 + jL/N`, `j = 0..N-1`, so that `x = 0`
//!   is the sample `j = N/2` and the grid is symmetric under `x -> -x`.
//! * Coefficients `f_n = (1/N) Σ_j e^{-iqn x_j} f(x_j)` with `q = 2π/L`, the
//!   discrete form of `(1/L) ∫ e^{-iqnx} f(x) dx`. The inverse is
//!   `f(x_j) = Σ_n e^{iqn x_j} f_n`.
//! * Coefficients are stored in FFT order (`n = 0, 1, .., N/2-1, -N/2, .., -1`)
//!   and exposed through [`SpectralField::coeff`] with signed mode numbers.
//!
//! The only place where the FFT library's scaling and the `x_0 = -L/2`
//! phase shift appear is the private adapter [`Grid::fft_forward`] /
//! [`Grid::fft_inverse`]. Nonlinear products are evaluated on a grid padded
//! by a factor two and truncated with the 2/3 rule.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parity tag of a field under `x -> -x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    /// `f(-x) = f(x)`, equivalently `f_{-n} = f_n`.
    Even,
    /// `f(-x) = -f(x)`, equivalently `f_{-n} = -f_n`.
    Odd,
    /// No symmetry is asserted.
    #[default]
    None,
}

impl Parity {
    /// Parity of a product of two fields with these parities.
    pub fn product(self, other: Parity) -> Parity {
        match (self, other) {
            (Parity::None, _) | (_, Parity::None) => Parity::None,
            (a, b) if a == b => Parity::Even,
            _ => Parity::Odd,
        }
    }

    /// Parity after `m` derivatives.
    pub fn derivative(self, m: u32) -> Parity {
        if m.is_multiple_of(2) {
            self
        } else {
            match self {
                Parity::Even => Parity::Odd,
                Parity::Odd => Parity::Even,
                Parity::None => Parity::None,
            }
        }
    }

    /// Parity of a sum.
    pub fn sum(self, other: Parity) -> Parity {
        if self == other {
            self
        } else {
            Parity::None
        }
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
            Parity::None => "none",
        };
        f.write_str(s)
    }
}

/// Uniform periodic grid of length `L` with `N` points and cached FFT plans.
pub struct Grid {
    l: f64,
    n: usize,
    q: f64,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    fwd_pad: Arc<dyn Fft<f64>>,
    inv_pad: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("L", &self.l)
            .field("N", &self.n)
            .field("q", &self.q)
            .finish()
    }
}

impl Grid {
    /// Build a grid. `N` must be even and at least 16.
    pub fn new(l: f64, n: usize) -> Result<Arc<Grid>> {
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::Grid(format!("length L = {l} must be positive and finite")));
        }
        if n < 16 || !n.is_multiple_of(2) {
            return Err(Error::Grid(format!("N = {n} must be even and at least 16")));
        }
        let mut planner = FftPlanner::new();
        Ok(Arc::new(Grid {
            l,
            n,
            q: 2.0 * std::f64::consts::PI / l,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            fwd_pad: planner.plan_fft_forward(2 * n),
            inv_pad: planner.plan_fft_inverse(2 * n),
        }))
    }

    /// Period `L`.
    pub fn length(&self) -> f64 {
        self.l
    }

    /// Number of collocation points `N`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Fundamental wavenumber `q = 2π/L`.
    pub fn q(&self) -> f64 {
        self.q
    }

    /// Collocation point `x_j = -L/2 + jL/N`.
    pub fn x(&self, j: usize) -> f64 {
        -0.5 * self.l + (j as f64) * self.l / (self.n as f64)
    }

    /// All collocation points.
    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Index of the sample at `x = 0`.
    pub fn origin_index(&self) -> usize {
        self.n / 2
    }

    /// Signed mode number stored at FFT-order index `i`.
    pub fn mode(&self, i: usize) -> i64 {
        mode_of(i, self.n)
    }

    /// FFT-order index of mode `n`, if it is stored.
    pub fn index_of(&self, n: i64) -> Option<usize> {
        let half = (self.n / 2) as i64;
        if n >= -half && n < half {
            Some(if n >= 0 { n as usize } else { (n + self.n as i64) as usize })
        } else {
            None
        }
    }

    /// Wavenumber `k = qn` at FFT-order index `i`.
    pub fn wavenumber(&self, i: usize) -> f64 {
        self.q * self.mode(i) as f64
    }

    /// All wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.wavenumber(i)).collect()
    }

    /// Largest mode kept by the 2/3 dealiasing rule.
    pub fn dealias_cutoff(&self) -> i64 {
        (self.n / 3) as i64
    }

    /// True when both grids describe the same points.
    pub fn same_as(&self, other: &Grid) -> bool {
        self.n == other.n && (self.l - other.l).abs() <= 1e-14 * self.l.abs().max(other.l.abs())
    }

    /// Check that two grids agree.
    pub fn ensure_same(&self, other: &Grid, context: &str) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{context}: (L={}, N={}) vs (L={}, N={})",
                self.l, self.n, other.l, other.n
            )))
        }
    }

    /// Samples to coefficients in the project normalization, `f_n = (-1)^n FFT(f)/N`.
    fn fft_forward(&self, buf: &mut [Complex64], padded: bool) {
        let len = buf.len();
        if padded {
            self.fwd_pad.process(buf);
        } else {
            self.fwd.process(buf);
        }
        let scale = 1.0 / len as f64;
        for (i, c) in buf.iter_mut().enumerate() {
            // e^{-iqn x_0} = e^{iπn} = (-1)^n and (-1)^n = (-1)^i for even lengths.
            let sign = if i % 2 == 0 { scale } else { -scale };
            *c *= sign;
        }
    }

    /// Coefficients to samples; inverse of `fft_forward`.
    fn fft_inverse(&self, buf: &mut [Complex64], padded: bool) {
        for (i, c) in buf.iter_mut().enumerate() {
            if i % 2 == 1 {
                *c = -*c;
            }
        }
        if padded {
            self.inv_pad.process(buf);
        } else {
            self.inv.process(buf);
        }
    }

    /// Complex samples on the padded grid (`2N` points) of a field.
    pub fn to_padded_complex(&self, f: &SpectralField) -> Vec<Complex64> {
        let m = 2 * self.n;
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        let half = (self.n / 2) as i64;
        for (i, &c) in f.coeffs.iter().enumerate() {
            let n = mode_of(i, self.n);
            if n == -half {
                continue;
            }
            let j = if n >= 0 { n as usize } else { (n + m as i64) as usize };
            buf[j] = c;
        }
        self.fft_inverse(&mut buf, true);
        buf
    }

    /// Real samples on the padded grid of a real field.
    pub fn to_padded(&self, f: &SpectralField) -> Vec<f64> {
        self.to_padded_complex(f).into_iter().map(|c| c.re).collect()
    }

    /// Real samples of two real fields on the padded grid, computed with one
    /// complex transform.
    pub fn to_padded_pair(&self, a: &SpectralField, b: &SpectralField) -> (Vec<f64>, Vec<f64>) {
        let m = 2 * self.n;
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        let half = (self.n / 2) as i64;
        let i_unit = Complex64::new(0.0, 1.0);
        for i in 0..self.n {
            let n = mode_of(i, self.n);
            if n == -half {
                continue;
            }
            let j = if n >= 0 { n as usize } else { (n + m as i64) as usize };
            buf[j] = a.coeffs[i] + i_unit * b.coeffs[i];
        }
        self.fft_inverse(&mut buf, true);
        buf.into_iter().map(|c| (c.re, c.im)).unzip()
    }

    /// Coefficients of padded complex samples, truncated to the stored modes
    /// and dealiased by the 2/3 rule.
    pub fn from_padded_complex(self: &Arc<Self>, samples: &[Complex64]) -> SpectralField {
        let m = 2 * self.n;
        assert_eq!(samples.len(), m, "padded sample length");
        let mut buf = samples.to_vec();
        self.fft_forward(&mut buf, true);
        let cut = self.dealias_cutoff();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); self.n];
        for n in -cut..=cut {
            let j = if n >= 0 { n as usize } else { (n + m as i64) as usize };
            coeffs[self.index_of(n).expect("mode within range")] = buf[j];
        }
        SpectralField::from_coeffs(self.clone(), coeffs, Parity::None)
    }

    /// Coefficients of padded real samples, truncated and dealiased.
    pub fn from_padded(self: &Arc<Self>, samples: &[f64]) -> SpectralField {
        let c: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let mut f = self.from_padded_complex(&c);
        f.make_real();
        f
    }

    /// Coefficients of two real padded sample arrays with one transform.
    pub fn from_padded_pair(
        self: &Arc<Self>,
        a: &[f64],
        b: &[f64],
    ) -> (SpectralField, SpectralField) {
        let m = 2 * self.n;
        let mut buf: Vec<Complex64> =
            a.iter().zip(b).map(|(&x, &y)| Complex64::new(x, y)).collect();
        assert_eq!(buf.len(), m, "padded sample length");
        self.fft_forward(&mut buf, true);
        let cut = self.dealias_cutoff();
        let mut ca = vec![Complex64::new(0.0, 0.0); self.n];
        let mut cb = vec![Complex64::new(0.0, 0.0); self.n];
        for n in -cut..=cut {
            let j = if n >= 0 { n as usize } else { (n + m as i64) as usize };
            let jm = if n > 0 { m - n as usize } else { (-n) as usize };
            let z = buf[j];
            let zc = buf[jm].conj();
            let idx = self.index_of(n).expect("mode within range");
            ca[idx] = 0.5 * (z + zc);
            cb[idx] = Complex64::new(0.0, -0.5) * (z - zc);
        }
        (
            SpectralField::from_coeffs(self.clone(), ca, Parity::None),
            SpectralField::from_coeffs(self.clone(), cb, Parity::None),
        )
    }
}

fn mode_of(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Real samples on a grid.
#[derive(Debug, Clone)]
pub struct RealField {
    grid: Arc<Grid>,
    samples: Vec<f64>,
}

impl RealField {
    /// Wrap samples; the length must equal `N`.
    pub fn new(grid: Arc<Grid>, samples: Vec<f64>) -> Result<RealField> {
        if samples.len() != grid.n() {
            return Err(Error::Grid(format!(
                "{} samples supplied for a grid with N = {}",
                samples.len(),
                grid.n()
            )));
        }
        Ok(RealField { grid, samples })
    }

    /// Sample a function at the collocation points.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> RealField {
        let samples = (0..grid.n()).map(|j| f(grid.x(j))).collect();
        RealField { grid, samples }
    }

    /// The grid.
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Sample values.
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Consume into the sample vector.
    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// Transform to coefficients.
    pub fn forward(&self) -> SpectralField {
        forward(self)
    }
}

/// Fourier coefficients of a (real or complex) function on a grid.
#[derive(Debug, Clone)]
pub struct SpectralField {
    grid: Arc<Grid>,
    coeffs: Vec<Complex64>,
    parity: Parity,
}

/// Forward transform of real samples.
pub fn forward(f: &RealField) -> SpectralField {
    let mut buf: Vec<Complex64> = f.samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    f.grid.fft_forward(&mut buf, false);
    let mut out = SpectralField::from_coeffs(f.grid.clone(), buf, Parity::None);
    out.make_real();
    out
}

/// Forward transform of complex samples.
pub fn forward_complex(grid: &Arc<Grid>, samples: &[Complex64]) -> Result<SpectralField> {
    if samples.len() != grid.n() {
        return Err(Error::Grid(format!(
            "{} samples supplied for a grid with N = {}",
            samples.len(),
            grid.n()
        )));
    }
    let mut buf = samples.to_vec();
    grid.fft_forward(&mut buf, false);
    Ok(SpectralField::from_coeffs(grid.clone(), buf, Parity::None))
}

/// Inverse transform to real samples, checking the reality constraint.
pub fn inverse(f: &SpectralField) -> Result<RealField> {
    let tol = 1e-8 * f.norm_l2_coeffs();
    let violation = f.reality_defect();
    if violation > tol {
        return Err(Error::Reality { violation, tolerance: tol });
    }
    let samples = f.to_complex_samples().into_iter().map(|c| c.re).collect();
    Ok(RealField { grid: f.grid.clone(), samples })
}

impl SpectralField {
    /// Field from coefficients in FFT order.
    pub fn from_coeffs(grid: Arc<Grid>, coeffs: Vec<Complex64>, parity: Parity) -> SpectralField {
        assert_eq!(coeffs.len(), grid.n(), "coefficient count must equal N");
        SpectralField { grid, coeffs, parity }
    }

    /// The zero field.
    pub fn zeros(grid: &Arc<Grid>) -> SpectralField {
        SpectralField {
            grid: grid.clone(),
            coeffs: vec![Complex64::new(0.0, 0.0); grid.n()],
            parity: Parity::None,
        }
    }

    /// Field with the listed `(mode, coefficient)` pairs and zeros elsewhere.
    pub fn from_modes(grid: &Arc<Grid>, modes: &[(i64, Complex64)]) -> Result<SpectralField> {
        let mut f = SpectralField::zeros(grid);
        for &(n, c) in modes {
            let i = grid
                .index_of(n)
                .ok_or_else(|| Error::Parameter(format!("mode {n} not stored on N = {}", grid.n())))?;
            f.coeffs[i] += c;
        }
        Ok(f)
    }

    /// Sample a real function and transform it.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64) -> f64) -> SpectralField {
        forward(&RealField::from_fn(grid.clone(), f))
    }

    /// The grid.
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Coefficients in FFT order.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Mutable coefficients in FFT order. Clears the parity tag.
    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        self.parity = Parity::None;
        &mut self.coeffs
    }

    /// Coefficient of mode `n` (zero if not stored).
    pub fn coeff(&self, n: i64) -> Complex64 {
        self.grid
            .index_of(n)
            .map(|i| self.coeffs[i])
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    /// Parity tag.
    pub fn parity(&self) -> Parity {
        self.parity
    }

    /// Replace the parity tag without changing coefficients.
    pub fn with_parity(mut self, parity: Parity) -> SpectralField {
        self.parity = parity;
        self
    }

    /// `max_n |f_n - conj(f_{-n})|` over the modes with a stored partner.
    pub fn reality_defect(&self) -> f64 {
        let n = self.grid.n();
        let mut worst: f64 = self.coeffs[0].im.abs() * 2.0;
        for i in 1..n / 2 {
            let d = (self.coeffs[i] - self.coeffs[n - i].conj()).norm();
            worst = worst.max(d);
        }
        worst.max(2.0 * self.coeffs[n / 2].im.abs())
    }

    /// Project onto the real-function subspace `f_{-n} = conj(f_n)`.
    pub fn make_real(&mut self) {
        let n = self.grid.n();
        self.coeffs[0].im = 0.0;
        self.coeffs[n / 2].im = 0.0;
        for i in 1..n / 2 {
            let a = 0.5 * (self.coeffs[i] + self.coeffs[n - i].conj());
            self.coeffs[i] = a;
            self.coeffs[n - i] = a.conj();
        }
    }

    /// Relative defect of the requested parity, `‖f - P f‖_{l²}/‖f‖_{l²}`.
    pub fn parity_defect(&self, p: Parity) -> f64 {
        let norm = self.norm_l2_coeffs();
        if norm == 0.0 || p == Parity::None {
            return 0.0;
        }
        let projected = self.enforce_parity(p);
        (self - &projected).norm_l2_coeffs() / norm
    }

    /// Fail when the field's parity defect exceeds `1e-8`.
    pub fn check_parity(&self, p: Parity, context: &str) -> Result<()> {
        let defect = self.parity_defect(p);
        if defect > 1e-8 {
            Err(Error::Parity { context: context.to_string(), defect })
        } else {
            Ok(())
        }
    }

    /// `(Σ_n |f_n|²)^{1/2}`.
    pub fn norm_l2_coeffs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Complex samples at the collocation points.
    pub fn to_complex_samples(&self) -> Vec<Complex64> {
        let mut buf = self.coeffs.clone();
        self.grid.fft_inverse(&mut buf, false);
        buf
    }

    /// Real samples; fails if the coefficients are not those of a real function.
    pub fn to_real(&self) -> Result<RealField> {
        inverse(self)
    }

    /// Real parts of the samples, without the reality check.
    pub fn real_samples(&self) -> Vec<f64> {
        self.to_complex_samples().into_iter().map(|c| c.re).collect()
    }

    /// Sample at the origin `x = 0`.
    pub fn value_at_origin(&self) -> Complex64 {
        // e^{iqn·0} = 1 so the value is the coefficient sum.
        self.coeffs.iter().sum()
    }

    /// `m`-th derivative: multiply mode `n` by `(iqn)^m`. The Nyquist mode is
    /// dropped for odd `m`.
    pub fn derivative(&self, m: u32) -> SpectralField {
        let half = (self.grid.n() / 2) as i64;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let n = self.grid.mode(i);
                if m == 0 {
                    return c;
                }
                if n == -half && m % 2 == 1 {
                    return Complex64::new(0.0, 0.0);
                }
                let ik = Complex64::new(0.0, self.grid.q() * n as f64);
                c * ik.powu(m)
            })
            .collect();
        SpectralField {
            grid: self.grid.clone(),
            coeffs,
            parity: self.parity.derivative(m),
        }
    }

    /// Low-frequency projector `P_<`: keep `|n| ≤ δ/q`.
    pub fn project_low(&self, delta: f64) -> SpectralField {
        let cut = delta / self.grid.q();
        self.filter(|n| (n.abs() as f64) <= cut)
    }

    /// High-frequency projector `P_> = 1 - P_<`.
    pub fn project_high(&self, delta: f64) -> SpectralField {
        let cut = delta / self.grid.q();
        self.filter(|n| (n.abs() as f64) > cut)
    }

    /// Zero every mode with `|n| > N/3`.
    pub fn dealias(&self) -> SpectralField {
        let cut = self.grid.dealias_cutoff();
        self.filter(|n| n.abs() <= cut)
    }

    fn filter(&self, keep: impl Fn(i64) -> bool) -> SpectralField {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| if keep(self.grid.mode(i)) { c } else { Complex64::new(0.0, 0.0) })
            .collect();
        SpectralField { grid: self.grid.clone(), coeffs, parity: self.parity }
    }

    /// Symmetric (`Even`) or antisymmetric (`Odd`) part. `None` returns a copy.
    pub fn enforce_parity(&self, p: Parity) -> SpectralField {
        let n = self.grid.n();
        let sign = match p {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
            Parity::None => return self.clone(),
        };
        let mut coeffs = self.coeffs.clone();
        for i in 1..n / 2 {
            let a = 0.5 * (self.coeffs[i] + sign * self.coeffs[n - i]);
            coeffs[i] = a;
            coeffs[n - i] = sign * a;
        }
        if p == Parity::Odd {
            coeffs[0] = Complex64::new(0.0, 0.0);
            coeffs[n / 2] = Complex64::new(0.0, 0.0);
        }
        SpectralField { grid: self.grid.clone(), coeffs, parity: p }
    }

    /// Multiply mode-by-mode by a symbol table in FFT order.
    pub fn apply_table(&self, table: &[f64]) -> SpectralField {
        assert_eq!(table.len(), self.coeffs.len(), "symbol table length");
        let coeffs = self.coeffs.iter().zip(table).map(|(&c, &s)| c * s).collect();
        SpectralField { grid: self.grid.clone(), coeffs, parity: self.parity }
    }

    /// Multiply mode-by-mode by `symbol(k)` with `k = qn`. Symbols are even in
    /// `k`, so the parity tag is kept.
    pub fn apply_symbol(&self, symbol: impl Fn(f64) -> f64) -> SpectralField {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| c * symbol(self.grid.wavenumber(i)))
            .collect();
        SpectralField { grid: self.grid.clone(), coeffs, parity: self.parity }
    }

    /// `a·self`.
    pub fn scale(&self, a: f64) -> SpectralField {
        SpectralField {
            grid: self.grid.clone(),
            coeffs: self.coeffs.iter().map(|&c| c * a).collect(),
            parity: self.parity,
        }
    }

    /// `self + a·x` in place.
    pub fn axpy(&mut self, a: f64, x: &SpectralField) {
        assert!(self.grid.same_as(&x.grid), "axpy on mismatched grids");
        for (c, &d) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *c += d * a;
        }
        self.parity = self.parity.sum(x.parity);
    }

    /// Pointwise product of two real fields, evaluated on the padded grid and
    /// dealiased.
    pub fn mul(&self, other: &SpectralField) -> SpectralField {
        let (a, b) = self.grid.to_padded_pair(self, other);
        let prod: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        self.grid.from_padded(&prod).with_parity(self.parity.product(other.parity))
    }

    /// Square of a real field.
    pub fn square(&self) -> SpectralField {
        let a = self.grid.to_padded(self);
        let prod: Vec<f64> = a.iter().map(|x| x * x).collect();
        self.grid.from_padded(&prod).with_parity(self.parity.product(self.parity))
    }

    /// Plain-text serialization: header `L=<v> N=<v>`, a parity comment and
    /// one `n real imag` line per mode from `-N/2` to `N/2-1`, 17 significant
    /// digits.
    pub fn to_text(&self) -> String {
        let mut out = format!("L={:.16e} N={}\n# parity={}\n", self.grid.length(), self.grid.n(), self.parity);
        let half = (self.grid.n() / 2) as i64;
        for n in -half..half {
            let c = self.coeff(n);
            out.push_str(&format!("{} {:.16e} {:.16e}\n", n, c.re, c.im));
        }
        out
    }

    /// Parse the format written by [`SpectralField::to_text`].
    pub fn from_text(text: &str) -> Result<SpectralField> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .find(|(_, l)| !l.trim().is_empty())
            .ok_or_else(|| Error::Parse("empty field file".into()))?;
        let mut l = None;
        let mut n = None;
        for tok in header.split_whitespace() {
            if let Some(v) = tok.strip_prefix("L=") {
                l = Some(v.parse::<f64>().map_err(|e| Error::Parse(format!("header L: {e}")))?);
            } else if let Some(v) = tok.strip_prefix("N=") {
                n = Some(v.parse::<usize>().map_err(|e| Error::Parse(format!("header N: {e}")))?);
            }
        }
        let (l, n) = match (l, n) {
            (Some(l), Some(n)) => (l, n),
            _ => return Err(Error::Parse(format!("bad header `{header}`"))),
        };
        let grid = Grid::new(l, n)?;
        let mut f = SpectralField::zeros(&grid);
        let mut parity = Parity::None;
        for (lineno, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('#') {
                if let Some(p) = c.trim().strip_prefix("parity=") {
                    parity = match p.trim() {
                        "even" => Parity::Even,
                        "odd" => Parity::Odd,
                        _ => Parity::None,
                    };
                }
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(Error::Parse(format!("line {}: expected `n real imag`", lineno + 1)));
            }
            let err = |e: &dyn fmt::Display| Error::Parse(format!("line {}: {e}", lineno + 1));
            let m: i64 = parts[0].parse().map_err(|e| err(&e))?;
            let re: f64 = parts[1].parse().map_err(|e| err(&e))?;
            let im: f64 = parts[2].parse().map_err(|e| err(&e))?;
            let i = grid
                .index_of(m)
                .ok_or_else(|| Error::Parse(format!("line {}: mode {m} out of range", lineno + 1)))?;
            f.coeffs[i] = Complex64::new(re, im);
        }
        f.parity = parity;
        Ok(f)
    }
}

impl<'a> std::ops::Add<&'a SpectralField> for &'a SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &'a SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl<'a> std::ops::Sub<&'a SpectralField> for &'a SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &'a SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl std::ops::Neg for &SpectralField {
    type Output = SpectralField;
    fn neg(self) -> SpectralField {
        self.scale(-1.0)
    }
}

/// `m`-th spectral derivative.
pub fn derivative(f: &SpectralField, m: u32) -> SpectralField {
    f.derivative(m)
}

/// Low-frequency projector.
pub fn project_low(f: &SpectralField, delta: f64) -> SpectralField {
    f.project_low(delta)
}

/// High-frequency projector.
pub fn project_high(f: &SpectralField, delta: f64) -> SpectralField {
    f.project_high(delta)
}

/// Symmetric or antisymmetric part.
pub fn enforce_parity(f: &SpectralField, p: Parity) -> SpectralField {
    f.enforce_parity(p)
}

/// 2/3-rule truncation.
pub fn dealias(f: &SpectralField) -> SpectralField {
    f.dealias()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn constant_and_cosine_coefficients() {
        let g = Grid::new(2.0 * PI * 3.0, 32).unwrap();
        let one = SpectralField::from_fn(&g, |_| 1.0);
        assert!((one.coeff(0) - c(1.0, 0.0)).norm() < 1e-15);
        assert!(one.coeffs().iter().skip(1).all(|z| z.norm() < 1e-15));
        let q = g.q();
        let cs = SpectralField::from_fn(&g, |x| (q * x).cos());
        assert!((cs.coeff(1) - c(0.5, 0.0)).norm() < 1e-15);
        assert!((cs.coeff(-1) - c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn sine_from_coefficients() {
        let g = Grid::new(10.0, 64).unwrap();
        let f = SpectralField::from_modes(&g, &[(1, c(0.0, -0.5)), (-1, c(0.0, 0.5))]).unwrap();
        let r = f.to_real().unwrap();
        for (j, v) in r.samples().iter().enumerate() {
            assert!((v - (g.q() * g.x(j)).sin()).abs() < 1e-14);
        }
    }

    #[test]
    fn derivative_of_sin2_fourth_order() {
        let g = Grid::new(7.0, 64).unwrap();
        let q = g.q();
        let f = SpectralField::from_fn(&g, |x| (2.0 * q * x).sin());
        let d4 = f.derivative(4).to_real().unwrap();
        let k4 = (2.0 * q).powi(4);
        for (j, v) in d4.samples().iter().enumerate() {
            assert!((v - k4 * (2.0 * q * g.x(j)).sin()).abs() < 1e-11 * k4);
        }
    }

    #[test]
    fn reality_violation_is_reported() {
        let g = Grid::new(10.0, 32).unwrap();
        let f = SpectralField::from_modes(&g, &[(1, c(1.0, 0.0))]).unwrap();
        assert!(matches!(f.to_real(), Err(Error::Reality { .. })));
    }

    #[test]
    fn dealiased_product_matches_convolution() {
        let g = Grid::new(13.0, 48).unwrap();
        let cut = g.dealias_cutoff();
        let mk = |seed: f64| {
            let mut modes = Vec::new();
            for n in 1..=cut {
                let z = c((seed * n as f64).sin(), (seed * 1.7 * n as f64).cos()) / (n as f64);
                modes.push((n, z));
                modes.push((-n, z.conj()));
            }
            modes.push((0, c(seed, 0.0)));
            SpectralField::from_modes(&g, &modes).unwrap()
        };
        let a = mk(0.3);
        let b = mk(1.1);
        let p = a.mul(&b);
        for n in -cut..=cut {
            let mut s = c(0.0, 0.0);
            for m in -cut..=cut {
                let r = n - m;
                if r.abs() <= cut {
                    s += a.coeff(m) * b.coeff(r);
                }
            }
            assert!((p.coeff(n) - s).norm() < 1e-13, "mode {n}");
        }
    }

    #[test]
    fn padded_pair_roundtrip() {
        let g = Grid::new(9.0, 32).unwrap();
        let a = SpectralField::from_fn(&g, |x| (0.7 * x).sin().exp() - 1.0).dealias();
        let b = SpectralField::from_fn(&g, |x| (1.4 * x).cos()).dealias();
        let (pa, pb) = g.to_padded_pair(&a, &b);
        let (ra, rb) = g.from_padded_pair(&pa, &pb);
        assert!((&ra - &a).norm_l2_coeffs() < 1e-14);
        assert!((&rb - &b).norm_l2_coeffs() < 1e-14);
    }

    #[test]
    fn text_roundtrip_is_exact() {
        let g = Grid::new(12.5, 32).unwrap();
        let f = SpectralField::from_fn(&g, |x| (x * 0.3).sin() + 0.1).with_parity(Parity::None);
        let back = SpectralField::from_text(&f.to_text()).unwrap();
        assert_eq!(back.grid().n(), 32);
        for (a, b) in f.coeffs().iter().zip(back.coeffs()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn origin_is_sample_n_over_2() {
        let g = Grid::new(5.0, 16).unwrap();
        assert_eq!(g.x(g.origin_index()), 0.0);
        let f = SpectralField::from_fn(&g, |x| (x - 0.2).powi(2).sin());
        let v = f.value_at_origin().re;
        let direct = f.to_real().unwrap().samples()[g.origin_index()];
        assert!((v - direct).abs() < 1e-13);
    }
}
