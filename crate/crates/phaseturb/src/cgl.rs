//! Direct pseudo-spectral integration of the complex Ginzburg–Landau equation
//! `∂_t u = (1+iα)u″ + u - (1+iβ)u|u|²`, phase/amplitude extraction and the
//! hat-variable scalings.
//!
//! Two frames are available:
//!
//! * [`Frame::CoMoving`] (default) writes `u = (1 + w)e^{iφ₀ - iβt}` and
//!   integrates `w = a + ib` as a pair of real fields. The linearisation about
//!   the uniform state is integrated exactly with one 2×2 block per mode:
//!   `a' = a″ - αb″ - 2a`, `b' = αa″ + b″ - 2βa`. The remainder
//!   `-(1+iβ)(2a·w + (1+w)|w|²)` is treated explicitly.
//! * [`Frame::Lab`] integrates `u = a + ib` itself with the diagonal linear
//!   part `1 - (1+iα)k²` and the explicit term `-(1+iβ)u|u|²`. The global
//!   rotation `e^{-iβt}` then lives in the explicit term, which limits the
//!   step size to `|β|dt ≲ 1`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::etd::{EtdState, Etdrk4, Mat2};
use crate::grid::{forward, forward_complex, Grid, Parity, RealField, SpectralField};
use crate::norms::slaved_amplitude;
use crate::symbols::SymbolParams;

/// Amplitude threshold below which a global phase is not defined.
pub const PHASE_SLIP_THRESHOLD: f64 = 0.1;
/// Largest `|α|` rejected by the extraction.
pub const ALPHA_FLOOR: f64 = 1e-3;
/// Blow-up threshold on `‖u‖_{L∞}`.
pub const BLOW_UP: f64 = 100.0;

/// Parameters of the Ginzburg–Landau equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CglParams {
    pub alpha: f64,
    pub beta: f64,
    /// Physical period `L₀`.
    pub l0: f64,
    /// Global phase `φ₀`.
    pub phi0: f64,
}

impl CglParams {
    /// Parameters with `β = -(2 + (1+α²)ε̂²)/(2α)`, so that `1 + αβ = -ε²`.
    pub fn from_eps_hat(alpha: f64, eps_hat: f64, l0: f64, phi0: f64) -> Result<CglParams> {
        if alpha == 0.0 {
            return Err(Error::AlphaDegenerate(0.0));
        }
        if !(l0 > 0.0) {
            return Err(Error::Parameter(format!("L0 = {l0} must be positive")));
        }
        let beta = -(2.0 + (1.0 + alpha * alpha) * eps_hat * eps_hat) / (2.0 * alpha);
        Ok(CglParams { alpha, beta, l0, phi0 })
    }

    /// Parameters with an explicit `β`.
    pub fn with_beta(alpha: f64, beta: f64, l0: f64, phi0: f64) -> CglParams {
        CglParams { alpha, beta, l0, phi0 }
    }

    /// `χ = 4/(1+α²)`.
    pub fn chi(&self) -> f64 {
        4.0 / (1.0 + self.alpha * self.alpha)
    }

    /// `ε̂² = -2(1+αβ)/(1+α²)`; negative in the Benjamin–Feir stable range.
    pub fn eps_hat_sq(&self) -> f64 {
        -2.0 * (1.0 + self.alpha * self.beta) / (1.0 + self.alpha * self.alpha)
    }

    /// `ε̂`, or an error when `1 + αβ > 0`.
    pub fn eps_hat(&self) -> Result<f64> {
        let e2 = self.eps_hat_sq();
        if e2 < 0.0 {
            return Err(Error::Parameter(format!("1 + alpha*beta = {} > 0: no eps_hat", 1.0 + self.alpha * self.beta)));
        }
        Ok(e2.sqrt())
    }

    /// Unscaled `ε = ε̂√(2/χ)`, with `ε² = -(1+αβ)`.
    pub fn eps(&self) -> Result<f64> {
        Ok(self.eps_hat()? * (2.0 / self.chi()).sqrt())
    }

    /// Scaled period `L = ε̂L₀`.
    pub fn l_scaled(&self) -> Result<f64> {
        Ok(self.eps_hat()? * self.l0)
    }

    /// Scaled time `t̂ = (2/χ)ε̂⁴t`.
    pub fn t_hat(&self, t: f64) -> Result<f64> {
        Ok(2.0 / self.chi() * self.eps_hat()?.powi(4) * t)
    }

    /// Unscaled time of a scaled time.
    pub fn t_of_hat(&self, t_hat: f64) -> Result<f64> {
        Ok(t_hat * self.chi() / (2.0 * self.eps_hat()?.powi(4)))
    }

    /// Symbol parameters `(ε̂, α)` of the scaled system.
    pub fn symbol_params(&self) -> Result<SymbolParams> {
        Ok(SymbolParams { eps: self.eps_hat()?, alpha: self.alpha })
    }
}

/// Representation used by the integrator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    /// `u = (1 + a + ib)e^{iφ₀ - iβt}`.
    #[default]
    CoMoving,
    /// `u = a + ib`.
    Lab,
}

/// Complex field `u` and time.
#[derive(Debug, Clone)]
pub struct ComplexState {
    /// Complex coefficients of `u`.
    pub u: SpectralField,
    pub t: f64,
}

/// Integrator state: two real fields `a`, `b` interpreted according to
/// `frame`.
#[derive(Debug, Clone)]
pub struct CglState {
    pub a: SpectralField,
    pub b: SpectralField,
    pub t: f64,
    pub frame: Frame,
}

impl CglState {
    /// The uniform state `u = e^{iφ₀}` at `t = 0`.
    pub fn uniform(grid: &Arc<Grid>, frame: Frame, params: &CglParams) -> CglState {
        let (a, b) = match frame {
            Frame::CoMoving => (SpectralField::zeros(grid), SpectralField::zeros(grid)),
            Frame::Lab => (
                SpectralField::from_fn(grid, |_| params.phi0.cos()),
                SpectralField::from_fn(grid, |_| params.phi0.sin()),
            ),
        };
        CglState { a: a.with_parity(Parity::Even), b: b.with_parity(Parity::Even), t: 0.0, frame }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.a.grid()
    }

    /// Samples of `w = u e^{-iφ₀ + iβt} - 1`.
    pub fn perturbation_samples(&self, params: &CglParams) -> Vec<Complex64> {
        let a = self.a.real_samples();
        let b = self.b.real_samples();
        match self.frame {
            Frame::CoMoving => a.iter().zip(&b).map(|(&x, &y)| Complex64::new(x, y)).collect(),
            Frame::Lab => {
                let rot = Complex64::from_polar(1.0, params.beta * self.t - params.phi0);
                a.iter().zip(&b).map(|(&x, &y)| Complex64::new(x, y) * rot - 1.0).collect()
            }
        }
    }

    /// Samples of `u`.
    pub fn u_samples(&self, params: &CglParams) -> Vec<Complex64> {
        let a = self.a.real_samples();
        let b = self.b.real_samples();
        match self.frame {
            Frame::Lab => a.iter().zip(&b).map(|(&x, &y)| Complex64::new(x, y)).collect(),
            Frame::CoMoving => {
                let rot = Complex64::from_polar(1.0, params.phi0 - params.beta * self.t);
                a.iter().zip(&b).map(|(&x, &y)| (1.0 + Complex64::new(x, y)) * rot).collect()
            }
        }
    }

    /// Complex view of the state.
    pub fn to_complex(&self, params: &CglParams) -> Result<ComplexState> {
        Ok(ComplexState { u: forward_complex(self.grid(), &self.u_samples(params))?, t: self.t })
    }

    /// State in `frame` from a complex field.
    pub fn from_complex(cs: &ComplexState, params: &CglParams, frame: Frame) -> Result<CglState> {
        let g = cs.u.grid();
        let u = cs.u.to_complex_samples();
        let samples: Vec<Complex64> = match frame {
            Frame::Lab => u,
            Frame::CoMoving => {
                let rot = Complex64::from_polar(1.0, params.beta * cs.t - params.phi0);
                u.iter().map(|&z| z * rot - 1.0).collect()
            }
        };
        let (a, b) = split(g, &samples)?;
        Ok(CglState { a, b, t: cs.t, frame })
    }
}

fn split(grid: &Arc<Grid>, samples: &[Complex64]) -> Result<(SpectralField, SpectralField)> {
    let a = RealField::new(grid.clone(), samples.iter().map(|z| z.re).collect())?;
    let b = RealField::new(grid.clone(), samples.iter().map(|z| z.im).collect())?;
    Ok((forward(&a), forward(&b)))
}

/// ETDRK4 integrator for the Ginzburg–Landau equation.
#[derive(Debug, Clone)]
pub struct CglSolver {
    grid: Arc<Grid>,
    params: CglParams,
    frame: Frame,
    etd: Etdrk4,
    symmetric: bool,
}

impl CglSolver {
    /// Stepper with step `dt` on `grid`.
    pub fn new(grid: &Arc<Grid>, params: CglParams, frame: Frame, dt: f64) -> Result<CglSolver> {
        if !(dt > 0.0) {
            return Err(Error::Parameter(format!("dt = {dt} must be positive")));
        }
        let (alpha, beta) = (params.alpha, params.beta);
        let blocks: Vec<Mat2> = grid
            .wavenumbers()
            .iter()
            .map(|&k| {
                let k2 = k * k;
                let c = |x: f64| Complex64::new(x, 0.0);
                match frame {
                    Frame::CoMoving => Mat2::new(c(-(k2 + 2.0)), c(alpha * k2), c(-(alpha * k2 + 2.0 * beta)), c(-k2)),
                    Frame::Lab => Mat2::new(c(1.0 - k2), c(alpha * k2), c(-alpha * k2), c(1.0 - k2)),
                }
            })
            .collect();
        Ok(CglSolver { grid: grid.clone(), params, frame, etd: Etdrk4::block(&blocks, dt), symmetric: false })
    }

    /// Re-impose even symmetry of `a` and `b` after every step.
    pub fn symmetric(mut self, on: bool) -> CglSolver {
        self.symmetric = on;
        self
    }

    pub fn dt(&self) -> f64 {
        self.etd.h()
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn params(&self) -> &CglParams {
        &self.params
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    fn nonlinear(&self, v: &EtdState) -> Result<EtdState> {
        let g = &self.grid;
        let a = SpectralField::from_coeffs(g.clone(), v[0].clone(), Parity::None);
        let b = SpectralField::from_coeffs(g.clone(), v[1].clone(), Parity::None);
        let (sa, sb) = g.to_padded_pair(&a, &b);
        let beta = self.params.beta;
        let (mut na, mut nb) = (vec![0.0; sa.len()], vec![0.0; sa.len()]);
        for j in 0..sa.len() {
            let (x, y) = (sa[j], sb[j]);
            let m2 = x * x + y * y;
            let (pr, pi) = match self.frame {
                Frame::CoMoving => (2.0 * x * x + (1.0 + x) * m2, 2.0 * x * y + y * m2),
                Frame::Lab => (x * m2, y * m2),
            };
            na[j] = -(pr - beta * pi);
            nb[j] = -(pi + beta * pr);
        }
        let (fa, fb) = g.from_padded_pair(&na, &nb);
        Ok(vec![fa.coeffs().to_vec(), fb.coeffs().to_vec()])
    }

    /// One ETDRK4 step.
    pub fn step(&self, st: &CglState) -> Result<CglState> {
        if st.frame != self.frame {
            return Err(Error::Parameter("state frame differs from solver frame".into()));
        }
        self.grid.ensure_same(st.grid(), "CglSolver::step")?;
        let v = vec![st.a.coeffs().to_vec(), st.b.coeffs().to_vec()];
        let out = self.etd.step(&v, |x| self.nonlinear(x))?;
        let mut it = out.into_iter();
        let mut a = SpectralField::from_coeffs(self.grid.clone(), it.next().expect("two components"), Parity::None);
        let mut b = SpectralField::from_coeffs(self.grid.clone(), it.next().expect("two components"), Parity::None);
        a.make_real();
        b.make_real();
        if self.symmetric {
            a = a.enforce_parity(Parity::Even);
            b = b.enforce_parity(Parity::Even);
        }
        let next = CglState { a, b, t: st.t + self.dt(), frame: self.frame };
        self.check_bounded(&next)?;
        Ok(next)
    }

    fn check_bounded(&self, st: &CglState) -> Result<()> {
        let l1: f64 = st.a.coeffs().iter().chain(st.b.coeffs()).map(|c| c.norm()).sum();
        let offset = if self.frame == Frame::CoMoving { 1.0 } else { 0.0 };
        if !l1.is_finite() {
            return Err(Error::BlowUp { t: st.t, quantity: "sup |u|".into(), value: f64::INFINITY });
        }
        if l1 + offset <= BLOW_UP {
            return Ok(());
        }
        let sup = st.u_samples(&self.params).iter().fold(0.0f64, |m, z| m.max(z.norm()));
        if sup > BLOW_UP {
            return Err(Error::BlowUp { t: st.t, quantity: "sup |u|".into(), value: sup });
        }
        Ok(())
    }

    /// Step until `t ≥ t_end - dt/2`.
    pub fn advance(&self, st: &CglState, t_end: f64) -> Result<CglState> {
        let mut cur = st.clone();
        while cur.t < t_end - 0.5 * self.dt() {
            cur = self.step(&cur)?;
        }
        Ok(cur)
    }
}

/// One step of size `dt` in the co-moving frame. Builds a fresh solver; use
/// [`CglSolver`] for repeated steps.
pub fn step_cgl(state: &CglState, dt: f64, params: &CglParams) -> Result<CglState> {
    CglSolver::new(state.grid(), *params, state.frame, dt)?.step(state)
}

/// Amplitude `s`, phase `η` and phase derivative `μ = η′`, in original or
/// scaled variables.
#[derive(Debug, Clone)]
pub struct PhaseAmplitudeState {
    pub s: SpectralField,
    pub eta: SpectralField,
    pub mu: SpectralField,
    pub t: f64,
    pub scaled: bool,
}

/// Options of the phase extraction.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExtractOptions {
    /// Subtract `η(0)` so that the phase vanishes at the origin.
    pub pin: bool,
    /// Value of `αη(0)` at the previous snapshot; selects the branch of the
    /// phase at the origin.
    pub previous_origin_phase: Option<f64>,
}

/// Extract `(s, η, μ)` from a state via `u = (1 + α²s)e^{iφ₀ - iβt}e^{iαη}`.
pub fn extract_phase_amplitude(st: &CglState, params: &CglParams, opts: ExtractOptions) -> Result<PhaseAmplitudeState> {
    let alpha = params.alpha;
    if alpha.abs() < ALPHA_FLOOR {
        return Err(Error::AlphaDegenerate(alpha));
    }
    let g = st.grid().clone();
    let w = st.perturbation_samples(params);
    let mut min_amp = f64::INFINITY;
    let mut s = Vec::with_capacity(w.len());
    let mut theta = Vec::with_capacity(w.len());
    for z in &w {
        let one_w = 1.0 + z;
        let amp = one_w.norm();
        min_amp = min_amp.min(amp);
        // |1+w| - 1 without cancellation.
        s.push((2.0 * z.re + z.norm_sqr()) / (amp + 1.0) / (alpha * alpha));
        theta.push(one_w.im.atan2(one_w.re));
    }
    if min_amp <= PHASE_SLIP_THRESHOLD {
        return Err(Error::PhaseSlip(min_amp));
    }
    let theta = unwrap_from_origin(&theta, g.origin_index(), opts.previous_origin_phase)?;
    let shift = if opts.pin { theta[g.origin_index()] } else { 0.0 };
    let eta: Vec<f64> = theta.iter().map(|t| (t - shift) / alpha).collect();
    let s = forward(&RealField::new(g.clone(), s)?);
    let eta = forward(&RealField::new(g.clone(), eta)?);
    let mu = eta.derivative(1);
    Ok(PhaseAmplitudeState { s, eta, mu, t: st.t, scaled: false })
}

/// Unwrap a periodic phase starting at `origin`, choosing the branch there
/// nearest to `anchor`. Errors when the phase winds around the period.
pub fn unwrap_from_origin(theta: &[f64], origin: usize, anchor: Option<f64>) -> Result<Vec<f64>> {
    use std::f64::consts::{PI, TAU};
    let n = theta.len();
    let mut out = theta.to_vec();
    if let Some(a) = anchor {
        out[origin] += TAU * ((a - out[origin]) / TAU).round();
    }
    let fix = |prev: f64, raw: f64| raw + TAU * ((prev - raw) / TAU).round();
    for j in origin + 1..n {
        out[j] = fix(out[j - 1], theta[j]);
    }
    for j in (0..origin).rev() {
        out[j] = fix(out[j + 1], theta[j]);
    }
    let closure = out[0] - out[n - 1];
    if closure.abs() > PI {
        return Err(Error::Parameter(format!("phase winds by {:.3} rad over the period", closure)));
    }
    Ok(out)
}

fn rescale(f: &SpectralField, grid: &Arc<Grid>, factor: f64) -> SpectralField {
    let coeffs = f.coeffs().iter().map(|c| c * factor).collect();
    SpectralField::from_coeffs(grid.clone(), coeffs, f.parity())
}

/// Original to scaled variables: `η = (ε̂²/4)η̂`, `s = ε̂⁴ŝ`, `μ = (ε̂³/4)μ̂`,
/// `x̂ = ε̂x`, `t̂ = (2/χ)ε̂⁴t`. The scaled grid has period `ε̂L₀`.
pub fn to_scaled(pa: &PhaseAmplitudeState, eps_hat: f64, chi: f64) -> Result<PhaseAmplitudeState> {
    if pa.scaled {
        return Err(Error::Parameter("state is already scaled".into()));
    }
    let g = pa.s.grid();
    let sg = Grid::new(eps_hat * g.length(), g.n())?;
    Ok(PhaseAmplitudeState {
        s: rescale(&pa.s, &sg, eps_hat.powi(-4)),
        eta: rescale(&pa.eta, &sg, 4.0 / (eps_hat * eps_hat)),
        mu: rescale(&pa.mu, &sg, 4.0 / eps_hat.powi(3)),
        t: 2.0 / chi * eps_hat.powi(4) * pa.t,
        scaled: true,
    })
}

/// Scaled to original variables; inverse of [`to_scaled`].
pub fn from_scaled(pa: &PhaseAmplitudeState, eps_hat: f64, chi: f64) -> Result<PhaseAmplitudeState> {
    if !pa.scaled {
        return Err(Error::Parameter("state is not scaled".into()));
    }
    let g = pa.s.grid();
    let og = Grid::new(g.length() / eps_hat, g.n())?;
    Ok(PhaseAmplitudeState {
        s: rescale(&pa.s, &og, eps_hat.powi(4)),
        eta: rescale(&pa.eta, &og, eps_hat * eps_hat / 4.0),
        mu: rescale(&pa.mu, &og, eps_hat.powi(3) / 4.0),
        t: pa.t * chi / (2.0 * eps_hat.powi(4)),
        scaled: false,
    })
}

/// How the initial amplitude is chosen.
#[derive(Debug, Clone)]
pub enum InitialAmplitude {
    /// `ŝ₀ = -(1/8)Ĝη̂₀″ - (ε̂²/32)Ĝ(η̂₀′)²`.
    Slaved,
    /// A supplied `ŝ₀` on the scaled grid.
    Custom(SpectralField),
}

/// Scaled initial pair `(η̂₀, ŝ₀)` and the co-moving CGL state it defines.
#[derive(Debug, Clone)]
pub struct InitialData {
    pub eta0_hat: SpectralField,
    pub s0_hat: SpectralField,
    pub state: CglState,
}

/// Assemble `u₀ = (1 + α²s₀)e^{iφ₀}e^{iαη₀}` from scaled data on the grid of
/// period `L = ε̂L₀`. The returned state lives on the physical grid of period
/// `L₀` in the co-moving frame.
pub fn build_initial_data(eta0_hat: &SpectralField, params: &CglParams, mode: InitialAmplitude) -> Result<InitialData> {
    let eps_hat = params.eps_hat()?;
    let g = eta0_hat.grid();
    let l = params.l_scaled()?;
    if (g.length() - l).abs() > 1e-9 * l {
        return Err(Error::GridMismatch(format!("eta0_hat has period {} but eps_hat*L0 = {l}", g.length())));
    }
    eta0_hat.check_parity(Parity::Even, "build_initial_data: eta0_hat")?;
    let origin = eta0_hat.value_at_origin().re;
    if origin.abs() > 1e-10 * eta0_hat.norm_l2_coeffs().max(1.0) {
        return Err(Error::Parameter(format!("eta0_hat(0) = {origin:.3e} must vanish")));
    }
    let eta0_hat = eta0_hat.enforce_parity(Parity::Even);
    let sym = SymbolParams { eps: eps_hat, alpha: params.alpha };
    let s0_hat = match mode {
        InitialAmplitude::Slaved => slaved_amplitude(&eta0_hat, &sym),
        InitialAmplitude::Custom(s) => {
            g.ensure_same(s.grid(), "build_initial_data: s0_hat")?;
            s.check_parity(Parity::Even, "build_initial_data: s0_hat")?;
            s.enforce_parity(Parity::Even)
        }
    };
    let pg = Grid::new(params.l0, g.n())?;
    let a2 = params.alpha * params.alpha;
    let eta = eta0_hat.real_samples();
    let s = s0_hat.real_samples();
    let e2 = eps_hat * eps_hat;
    let mut re = Vec::with_capacity(eta.len());
    let mut im = Vec::with_capacity(eta.len());
    for (&eh, &sh) in eta.iter().zip(&s) {
        let amp = 1.0 + a2 * e2 * e2 * sh;
        let ph = params.alpha * e2 / 4.0 * eh;
        let half = (0.5 * ph).sin();
        // (1+α²s)e^{iαη} - 1 with cos(αη) - 1 = -2 sin²(αη/2).
        re.push(-2.0 * amp * half * half + a2 * e2 * e2 * sh);
        im.push(amp * ph.sin());
    }
    let a = forward(&RealField::new(pg.clone(), re)?).enforce_parity(Parity::Even);
    let b = forward(&RealField::new(pg.clone(), im)?).enforce_parity(Parity::Even);
    Ok(InitialData { eta0_hat, s0_hat, state: CglState { a, b, t: 0.0, frame: Frame::CoMoving } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{rng_from_seed, structured_field, FieldSpec};

    fn params() -> CglParams {
        CglParams::from_eps_hat(0.1, 0.05, 800.0, 0.3).unwrap()
    }

    #[test]
    fn beta_reconstructs_eps() {
        for &(a, e) in &[(0.1, 0.05), (0.5, 0.3), (-0.3, 0.1)] {
            let p = CglParams::from_eps_hat(a, e, 100.0, 0.0).unwrap();
            let eps2 = 2.0 * e * e / p.chi();
            assert!((1.0 + p.alpha * p.beta + eps2).abs() < 1e-12);
            assert!((p.eps_hat().unwrap() - e).abs() < 1e-12);
        }
    }

    #[test]
    fn plane_wave_is_exact_in_comoving_frame() {
        let p = params();
        let g = Grid::new(p.l0, 64).unwrap();
        let solver = CglSolver::new(&g, p, Frame::CoMoving, 0.5).unwrap();
        let st = solver.advance(&CglState::uniform(&g, Frame::CoMoving, &p), 10.0).unwrap();
        assert_eq!(st.a.norm_l2_coeffs() + st.b.norm_l2_coeffs(), 0.0);
    }

    #[test]
    fn plane_wave_phase_in_lab_frame() {
        let p = params();
        let g = Grid::new(p.l0, 16).unwrap();
        let solver = CglSolver::new(&g, p, Frame::Lab, 1e-3).unwrap();
        let st = solver.advance(&CglState::uniform(&g, Frame::Lab, &p), 1.0).unwrap();
        let u = st.u_samples(&p)[0];
        let exact = Complex64::from_polar(1.0, p.phi0 - p.beta * st.t);
        assert!((u - exact).norm() < 1e-8, "{}", (u - exact).norm());
    }

    #[test]
    fn travelling_wave_frequency() {
        let (alpha, beta) = (0.5, 0.5);
        let p = CglParams::with_beta(alpha, beta, 20.0, 0.0);
        let g = Grid::new(p.l0, 32).unwrap();
        let m = 2;
        let k = g.q() * m as f64;
        let c = (1.0 - k * k).sqrt();
        let u0: Vec<Complex64> = g.points().iter().map(|&x| Complex64::from_polar(c, k * x)).collect();
        let cs = ComplexState { u: forward_complex(&g, &u0).unwrap(), t: 0.0 };
        let st = CglState::from_complex(&cs, &p, Frame::Lab).unwrap();
        let solver = CglSolver::new(&g, p, Frame::Lab, 1e-3).unwrap();
        let end = solver.advance(&st, 1.0).unwrap();
        let u = end.to_complex(&p).unwrap().u;
        let omega = alpha * k * k + beta * (1.0 - k * k);
        let expect = Complex64::from_polar(c, -omega * end.t);
        assert!((u.coeff(m) - expect).norm() < 1e-6 * c);
    }

    #[test]
    fn extraction_of_constructed_fields() {
        let p = params();
        let g = Grid::new(p.l0, 128).unwrap();
        let st = CglState::uniform(&g, Frame::CoMoving, &p);
        let pa = extract_phase_amplitude(&st, &p, ExtractOptions::default()).unwrap();
        assert_eq!(pa.s.norm_l2_coeffs() + pa.eta.norm_l2_coeffs(), 0.0);

        let a2 = p.alpha * p.alpha;
        let q = g.q();
        let a = SpectralField::from_fn(&g, |x| a2 * 0.01 * (q * x).cos());
        let st = CglState { a, b: SpectralField::zeros(&g), t: 3.0, frame: Frame::CoMoving };
        let pa = extract_phase_amplitude(&st, &p, ExtractOptions::default()).unwrap();
        let expect = SpectralField::from_fn(&g, |x| 0.01 * (q * x).cos());
        assert!((&pa.s - &expect).norm_l2_coeffs() < 1e-12);
        assert!(pa.eta.norm_l2_coeffs() < 1e-12);
    }

    #[test]
    fn extraction_round_trip() {
        let p = params();
        let g = Grid::new(p.l0, 128).unwrap();
        let mut rng = rng_from_seed(4);
        let s = structured_field(&g, &FieldSpec::new(3.0, 2.0).amplitude(0.5).max_mode(20).parity(Parity::Even), &mut rng);
        let eta = structured_field(&g, &FieldSpec::new(3.0, 2.0).amplitude(0.5).max_mode(20).parity(Parity::Even), &mut rng);
        let eta = &eta - &SpectralField::from_fn(&g, |_| eta.value_at_origin().re);
        let (ss, es) = (s.real_samples(), eta.real_samples());
        let a2 = p.alpha * p.alpha;
        let w: Vec<Complex64> = ss
            .iter()
            .zip(&es)
            .map(|(&s, &e)| (1.0 + a2 * s) * Complex64::from_polar(1.0, p.alpha * e) - 1.0)
            .collect();
        let (a, b) = split(&g, &w).unwrap();
        let st = CglState { a, b, t: 0.0, frame: Frame::CoMoving };
        let pa = extract_phase_amplitude(&st, &p, ExtractOptions { pin: true, previous_origin_phase: None }).unwrap();
        let es2 = pa.eta.real_samples();
        let ss2 = pa.s.real_samples();
        let err = es.iter().zip(&es2).chain(ss.iter().zip(&ss2)).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn extraction_guards() {
        let p = CglParams::with_beta(1e-4, 1.0, 20.0, 0.0);
        let g = Grid::new(20.0, 16).unwrap();
        let st = CglState::uniform(&g, Frame::CoMoving, &p);
        assert!(matches!(extract_phase_amplitude(&st, &p, ExtractOptions::default()), Err(Error::AlphaDegenerate(_))));
        let p = params();
        let a = SpectralField::from_fn(&g, |_| -0.95);
        let st = CglState { a, b: SpectralField::zeros(&g), t: 0.0, frame: Frame::CoMoving };
        assert!(matches!(extract_phase_amplitude(&st, &p, ExtractOptions::default()), Err(Error::PhaseSlip(_))));
    }

    #[test]
    fn scaling_round_trip() {
        let p = params();
        let e = p.eps_hat().unwrap();
        let g = Grid::new(p.l0, 64).unwrap();
        let q = g.q();
        let eta = SpectralField::from_fn(&g, |x| e * e / 4.0 * (q * x).cos());
        let pa = PhaseAmplitudeState { s: eta.scale(3.0), mu: eta.derivative(1), eta, t: 7.0, scaled: false };
        let sc = to_scaled(&pa, e, p.chi()).unwrap();
        let qh = sc.eta.grid().q();
        let expect = SpectralField::from_fn(sc.eta.grid(), |x| (qh * x).cos());
        assert!((&sc.eta - &expect).norm_l2_coeffs() < 1e-12);
        assert!((&sc.eta.derivative(1) - &sc.mu).norm_l2_coeffs() < 1e-10 * sc.mu.norm_l2_coeffs());
        let back = from_scaled(&sc, e, p.chi()).unwrap();
        assert!((back.t - 7.0).abs() < 1e-12);
        assert!((back.s.coeff(1) - pa.s.coeff(1)).norm() < 1e-15);
    }

    #[test]
    fn zero_phase_gives_uniform_state() {
        let p = params();
        let l = p.l_scaled().unwrap();
        let g = Grid::new(l, 64).unwrap();
        let init = build_initial_data(&SpectralField::zeros(&g).with_parity(Parity::Even), &p, InitialAmplitude::Slaved).unwrap();
        let u = init.state.u_samples(&p);
        assert!(u.iter().all(|z| (z - Complex64::from_polar(1.0, p.phi0)).norm() < 1e-15));
    }

    #[test]
    fn initial_data_extracts_back() {
        let p = params();
        let e = p.eps_hat().unwrap();
        let g = Grid::new(p.l_scaled().unwrap(), 128).unwrap();
        let q = g.q();
        let eta = SpectralField::from_fn(&g, |x| (q * x).cos() - 1.0).with_parity(Parity::Even);
        let init = build_initial_data(&eta, &p, InitialAmplitude::Slaved).unwrap();
        let pa = extract_phase_amplitude(&init.state, &p, ExtractOptions::default()).unwrap();
        let sc = to_scaled(&pa, e, p.chi()).unwrap();
        let rel = (sc.eta.coeffs()[1] - eta.coeffs()[1]).norm() / eta.coeffs()[1].norm();
        assert!(rel < 1e-9);
        let rel = (&sc.s - &init.s0_hat).norm_l2_coeffs() / init.s0_hat.norm_l2_coeffs();
        assert!(rel < 1e-6, "{rel}");
    }
}
