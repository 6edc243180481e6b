//! Solvers for the scaled phase dynamics.
//!
//! * Kuramoto–Sivashinsky in derivative form `∂_t μ = -μ″″ - μ″ - μμ′` and in
//!   phase form `∂_t η = -η″″ - η″ - (η′)²/2`.
//! * The coupled amplitude/phase system
//!   `∂_t s = -(χ/ε⁴)𝓛_s s + (χ/ε⁴)r₁(μ) + F₄ + F₃`,
//!   `∂_t μ = -𝓛_μ μ - μμ′ + ε²F₀′ + ε²χ𝓛_{μ,r}r₂′`, with
//!   `r₂ = (𝓛_s s - r₁(μ))/ε⁴`.
//! * The auxiliary equation
//!   `∂_t r₂ = -(χ/ε⁴)G𝓛_r r₂ + (χ/16)μ𝓛_{μ,r}r₂′ + F₆/ε⁴`.
//!
//! All stiff linear parts, including `χ/ε⁴`, are integrated exactly by ETD.
//! The coupled system can be stepped in two equivalent coordinates:
//! [`Formulation::AmplitudePhase`] evolves `(s, μ)` and
//! [`Formulation::SlavedR2`] evolves `(μ, r₂)` with the matrix symbol `𝓛_M`
//! and reconstructs `s = G(r₁ + ε⁴r₂)`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::etd::{phi, EtdState, Etdrk4, Mat2};
use crate::grid::{Grid, Parity, SpectralField};
use crate::nonlinear::{Nonlinear, StateSM};
use crate::symbols::SymbolParams;

/// Blow-up threshold on the coefficient `l²` norm of an evolved field.
pub const FIELD_BLOW_UP: f64 = 1e8;

fn check_finite(f: &SpectralField, t: f64, what: &str) -> Result<()> {
    let n = f.norm_l2_coeffs();
    if !n.is_finite() || n > FIELD_BLOW_UP {
        return Err(Error::BlowUp { t, quantity: format!("||{what}||"), value: n });
    }
    Ok(())
}

fn field(grid: &Arc<Grid>, coeffs: Vec<Complex64>, parity: Parity) -> SpectralField {
    let mut f = SpectralField::from_coeffs(grid.clone(), coeffs, Parity::None);
    f.make_real();
    f.with_parity(parity)
}

/// Which variable a KS state holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KsForm {
    /// `μ = η′`, odd and zero-mean for antisymmetric runs.
    Derivative,
    /// The phase `η` itself.
    Phase,
}

/// Kuramoto–Sivashinsky state in scaled time.
#[derive(Debug, Clone)]
pub struct KsState {
    pub field: SpectralField,
    pub t: f64,
    pub form: KsForm,
}

impl KsState {
    /// Derivative-form state.
    pub fn derivative(mu: SpectralField) -> KsState {
        KsState { field: mu, t: 0.0, form: KsForm::Derivative }
    }

    /// Phase-form state.
    pub fn phase(eta: SpectralField) -> KsState {
        KsState { field: eta, t: 0.0, form: KsForm::Phase }
    }

    /// `μ` of the state; the derivative of `η` in phase form.
    pub fn mu(&self) -> SpectralField {
        match self.form {
            KsForm::Derivative => self.field.clone(),
            KsForm::Phase => self.field.derivative(1),
        }
    }
}

fn project(f: SpectralField, on: bool) -> SpectralField {
    match f.parity() {
        Parity::None => f,
        p if on => f.enforce_parity(p),
        _ => f,
    }
}

/// ETDRK4 stepper for the Kuramoto–Sivashinsky equation.
#[derive(Debug, Clone)]
pub struct KsSolver {
    grid: Arc<Grid>,
    form: KsForm,
    etd: Etdrk4,
    pin: bool,
    symmetric: bool,
}

impl KsSolver {
    /// Stepper with linear symbol `k² - k⁴` and step `dt`.
    pub fn new(grid: &Arc<Grid>, form: KsForm, dt: f64) -> Result<KsSolver> {
        if !(dt > 0.0) {
            return Err(Error::Parameter(format!("dt = {dt} must be positive")));
        }
        let sym: Vec<Complex64> = grid.wavenumbers().iter().map(|&k| Complex64::new(k * k - k.powi(4), 0.0)).collect();
        Ok(KsSolver { grid: grid.clone(), form, etd: Etdrk4::diagonal(&[sym], dt), pin: false, symmetric: false })
    }

    /// In phase form, subtract `η(0)` after every step.
    pub fn pinned(mut self, pin: bool) -> KsSolver {
        self.pin = pin;
        self
    }

    /// Project every step onto the parity of the state, keeping symmetric
    /// runs inside their invariant subspace despite roundoff.
    pub fn symmetric(mut self, on: bool) -> KsSolver {
        self.symmetric = on;
        self
    }

    pub fn dt(&self) -> f64 {
        self.etd.h()
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    fn nonlinear(&self, v: &EtdState) -> EtdState {
        let g = &self.grid;
        let f = SpectralField::from_coeffs(g.clone(), v[0].clone(), Parity::None);
        let out = match self.form {
            KsForm::Derivative => {
                let s = g.to_padded(&f);
                let sq: Vec<f64> = s.iter().map(|x| -0.5 * x * x).collect();
                g.from_padded(&sq).derivative(1)
            }
            KsForm::Phase => {
                let s = g.to_padded(&f.derivative(1));
                let sq: Vec<f64> = s.iter().map(|x| -0.5 * x * x).collect();
                g.from_padded(&sq)
            }
        };
        vec![out.coeffs().to_vec()]
    }

    /// One step.
    pub fn step(&self, st: &KsState) -> Result<KsState> {
        if st.form != self.form {
            return Err(Error::Parameter("KS state form differs from solver form".into()));
        }
        self.grid.ensure_same(st.field.grid(), "KsSolver::step")?;
        let out = self.etd.step(&vec![st.field.coeffs().to_vec()], |v| Ok(self.nonlinear(v)))?;
        let mut f = project(field(&self.grid, out.into_iter().next().expect("one component"), st.field.parity()), self.symmetric);
        if self.form == KsForm::Phase && self.pin {
            let c = f.value_at_origin().re;
            f.coeffs_mut()[0] -= c;
        }
        let t = st.t + self.dt();
        check_finite(&f, t, "mu")?;
        Ok(KsState { field: f, t, form: self.form })
    }

    /// Step until `t ≥ t_end - dt/2`.
    pub fn advance(&self, st: &KsState, t_end: f64) -> Result<KsState> {
        let mut cur = st.clone();
        while cur.t < t_end - 0.5 * self.dt() {
            cur = self.step(&cur)?;
        }
        Ok(cur)
    }
}

/// One KS step of size `dt`. Builds a fresh stepper; use [`KsSolver`] for
/// repeated steps.
pub fn step_ks(state: &KsState, dt: f64) -> Result<KsState> {
    KsSolver::new(state.field.grid(), state.form, dt)?.step(state)
}

/// Coordinates used to step the coupled system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    /// Evolve `(s, μ)`.
    #[default]
    AmplitudePhase,
    /// Evolve `(μ, r₂)` and reconstruct `s`.
    SlavedR2,
}

/// State of the coupled system in scaled variables.
#[derive(Debug, Clone)]
pub struct CoupledState {
    pub s: SpectralField,
    pub mu: SpectralField,
    /// Independently evolved `r₂`, present when the cross-check is enabled.
    pub r2: Option<SpectralField>,
    pub t: f64,
}

impl CoupledState {
    /// State at `t = 0` without an evolved `r₂`.
    pub fn new(s: SpectralField, mu: SpectralField) -> Result<CoupledState> {
        let st = StateSM::new(s, mu)?;
        Ok(CoupledState { s: st.s, mu: st.mu, r2: None, t: 0.0 })
    }

    /// Zero state.
    pub fn zeros(grid: &Arc<Grid>) -> CoupledState {
        let z = StateSM::zeros(grid);
        CoupledState { s: z.s, mu: z.mu, r2: None, t: 0.0 }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.s.grid()
    }

    fn sm(&self) -> StateSM {
        StateSM { s: self.s.clone(), mu: self.mu.clone() }
    }
}

/// ETDRK4 stepper for the coupled system.
#[derive(Debug, Clone)]
pub struct CoupledSolver {
    nl: Nonlinear,
    formulation: Formulation,
    etd: Etdrk4,
    r2_evolver: Option<R2Evolver>,
    symmetric: bool,
}

impl CoupledSolver {
    /// Stepper for `params = (ε̂, α)` with step `dt`. At `ε̂ = 0` the phase
    /// equation is pure Kuramoto–Sivashinsky and `s = -(1/8)μ′`.
    pub fn new(grid: &Arc<Grid>, params: SymbolParams, formulation: Formulation, dt: f64) -> Result<CoupledSolver> {
        if !(dt > 0.0) {
            return Err(Error::Parameter(format!("dt = {dt} must be positive")));
        }
        let nl = Nonlinear::new(grid, params);
        let e2 = params.eps * params.eps;
        let e4 = e2 * e2;
        let chi = params.chi();
        let ks = grid.wavenumbers();
        let etd = if e2 == 0.0 {
            let sym: Vec<Complex64> = ks.iter().map(|&k| Complex64::new(-params.lmu(k), 0.0)).collect();
            Etdrk4::diagonal(&[sym], dt)
        } else {
            let blocks: Vec<Mat2> = ks
                .iter()
                .map(|&k| {
                    let ik = Complex64::new(0.0, k);
                    let re = |x: f64| Complex64::new(x, 0.0);
                    match formulation {
                        Formulation::SlavedR2 => params.matrix_lm(k),
                        Formulation::AmplitudePhase => {
                            let (ls, lmur) = (params.ls(k), params.lmur(k));
                            Mat2::new(
                                re(-chi / e4 * ls),
                                ik * (-chi / (8.0 * e4)),
                                ik * (chi / e2 * lmur * ls),
                                re(-params.lmu(k) - chi / (8.0 * e2) * lmur * k * k),
                            )
                        }
                    }
                })
                .collect();
            Etdrk4::block(&blocks, dt)
        };
        Ok(CoupledSolver { nl, formulation, etd, r2_evolver: None, symmetric: false })
    }

    /// Also evolve `r₂` by its own equation as a cross-check.
    pub fn with_r2_evolution(mut self, on: bool) -> Result<CoupledSolver> {
        self.r2_evolver = if on { Some(R2Evolver::new(self.grid(), *self.params(), self.dt())?) } else { None };
        Ok(self)
    }

    /// Project every step onto the parities of the state.
    pub fn symmetric(mut self, on: bool) -> CoupledSolver {
        self.symmetric = on;
        self
    }

    pub fn dt(&self) -> f64 {
        self.etd.h()
    }

    pub fn params(&self) -> &SymbolParams {
        self.nl.params()
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.nl.grid()
    }

    pub fn nonlinear_maps(&self) -> &Nonlinear {
        &self.nl
    }

    pub fn formulation(&self) -> Formulation {
        self.formulation
    }

    fn eps_zero(&self) -> bool {
        self.params().eps == 0.0
    }

    /// `-(μ²/2)′ + ε²F₀′`, the part of the phase forcing shared by both
    /// formulations.
    fn phase_forcing(&self, st: &StateSM) -> Result<SpectralField> {
        let e2 = self.params().eps * self.params().eps;
        let mut out = st.mu.square().derivative(1).scale(-0.5);
        if e2 != 0.0 {
            out.axpy(e2, &self.nl.f0(st)?.derivative(1));
        }
        Ok(out)
    }

    fn nonlinear(&self, v: &EtdState) -> Result<EtdState> {
        let g = self.grid();
        let p = *self.params();
        let e2 = p.eps * p.eps;
        let chi = p.chi();
        match self.formulation {
            _ if self.eps_zero() => {
                let mu = field(g, v[0].clone(), Parity::None);
                Ok(vec![mu.square().derivative(1).scale(-0.5).coeffs().to_vec()])
            }
            Formulation::AmplitudePhase => {
                let st = StateSM { s: field(g, v[0].clone(), Parity::None), mu: field(g, v[1].clone(), Parity::None) };
                let mu2 = st.mu.square();
                let mut ns = &self.nl.f3(&st) + &self.nl.f4(&st);
                ns.axpy(-chi / (32.0 * e2), &mu2);
                let mut nm = self.phase_forcing(&st)?;
                nm.axpy(chi / 32.0, &self.nl.lmur(&mu2.derivative(1)));
                Ok(vec![ns.coeffs().to_vec(), nm.coeffs().to_vec()])
            }
            Formulation::SlavedR2 => {
                let mu = field(g, v[0].clone(), Parity::None);
                let r2 = field(g, v[1].clone(), Parity::None);
                let s = self.nl.s_from_r2(&mu, &r2).with_parity(Parity::None);
                let st = StateSM { s, mu };
                let nm = self.phase_forcing(&st)?;
                let nr = r2_forcing(&self.nl, &st, &r2, true)?;
                Ok(vec![nm.coeffs().to_vec(), nr.coeffs().to_vec()])
            }
        }
    }

    /// One step.
    pub fn step(&self, st: &CoupledState) -> Result<CoupledState> {
        self.grid().ensure_same(st.grid(), "CoupledSolver::step")?;
        let g = self.grid().clone();
        let t = st.t + self.dt();
        let (s, mu) = if self.eps_zero() {
            let out = self.etd.step(&vec![st.mu.coeffs().to_vec()], |v| self.nonlinear(v))?;
            let mu = field(&g, out.into_iter().next().expect("one component"), st.mu.parity());
            (self.nl.slaved_s(&mu).with_parity(st.s.parity()), mu)
        } else {
            let v = match self.formulation {
                Formulation::AmplitudePhase => vec![st.s.coeffs().to_vec(), st.mu.coeffs().to_vec()],
                Formulation::SlavedR2 => {
                    let r2 = self.nl.r2_from_state(&st.sm())?;
                    vec![st.mu.coeffs().to_vec(), r2.coeffs().to_vec()]
                }
            };
            let mut out = self.etd.step(&v, |x| self.nonlinear(x))?.into_iter();
            let (a, b) = (out.next().expect("two components"), out.next().expect("two components"));
            match self.formulation {
                Formulation::AmplitudePhase => (field(&g, a, st.s.parity()), field(&g, b, st.mu.parity())),
                Formulation::SlavedR2 => {
                    let mu = field(&g, a, st.mu.parity());
                    let r2 = field(&g, b, Parity::None);
                    (self.nl.s_from_r2(&mu, &r2).with_parity(st.s.parity()), mu)
                }
            }
        };
        let (s, mu) = (project(s, self.symmetric), project(mu, self.symmetric));
        check_finite(&s, t, "s")?;
        check_finite(&mu, t, "mu")?;
        let r2 = match (&self.r2_evolver, &st.r2) {
            (Some(ev), Some(r2)) => {
                let end = StateSM { s: s.clone(), mu: mu.clone() };
                let next = ev.step(r2, &st.sm(), &end)?;
                check_finite(&next, t, "r2")?;
                Some(next)
            }
            (Some(_), None) => Some(self.nl.r2_from_state(&st.sm())?),
            _ => None,
        };
        Ok(CoupledState { s, mu, r2, t })
    }

    /// Step until `t ≥ t_end - dt/2`.
    pub fn advance(&self, st: &CoupledState, t_end: f64) -> Result<CoupledState> {
        let mut cur = st.clone();
        while cur.t < t_end - 0.5 * self.dt() {
            cur = self.step(&cur)?;
        }
        Ok(cur)
    }

    /// Relax `s` for a time `t` with `μ` held fixed, integrating
    /// `∂_t s = -(χ/ε⁴)𝓛_s s + (χ/ε⁴)r₁(μ) + F₄ + F₃` in steps of `dt`.
    pub fn relax_amplitude(&self, s0: &SpectralField, mu: &SpectralField, t: f64) -> Result<SpectralField> {
        let p = *self.params();
        if p.eps == 0.0 {
            return Err(Error::Parameter("amplitude relaxation needs eps > 0".into()));
        }
        let e4 = p.eps.powi(4);
        let chi = p.chi();
        let sym: Vec<Complex64> = self.grid().wavenumbers().iter().map(|&k| Complex64::new(-chi / e4 * p.ls(k), 0.0)).collect();
        let etd = Etdrk4::diagonal(&[sym], self.dt());
        let forcing = self.nl.r1(mu).scale(chi / e4);
        let g = self.grid().clone();
        let mut s = s0.clone();
        let mut elapsed = 0.0;
        while elapsed < t - 0.5 * self.dt() {
            let out = etd.step(&vec![s.coeffs().to_vec()], |v| {
                let st = StateSM { s: field(&g, v[0].clone(), Parity::None), mu: mu.clone() };
                let n = &(&self.nl.f3(&st) + &self.nl.f4(&st)) + &forcing;
                Ok(vec![n.coeffs().to_vec()])
            })?;
            s = field(&g, out.into_iter().next().expect("one component"), s0.parity());
            elapsed += self.dt();
        }
        Ok(s)
    }
}

/// One coupled step of size `dt`. Builds a fresh stepper; use
/// [`CoupledSolver`] for repeated steps.
pub fn step_coupled(state: &CoupledState, dt: f64, params: &SymbolParams) -> Result<CoupledState> {
    CoupledSolver::new(state.grid(), *params, Formulation::default(), dt)?.step(state)
}

/// Nonlinear part of the `r₂` equation,
/// `(χ/16)μ𝓛_{μ,r}r₂′ + (𝓛_s(F₃ + F₄) + F₇ + F₈)/ε⁴`. With `split_linear`
/// the term `-(1/8)(𝓛_μ μ)′/ε⁴` of `F₈` is left out, for use with `𝓛_M`.
fn r2_forcing(nl: &Nonlinear, st: &StateSM, r2: &SpectralField, split_linear: bool) -> Result<SpectralField> {
    let p = nl.params();
    let e4 = p.eps.powi(4);
    let chi = p.chi();
    let g = nl.grid();
    let (ms, rs) = g.to_padded_pair(&st.mu, &nl.lmur(&r2.derivative(1)));
    let prod: Vec<f64> = ms.iter().zip(&rs).map(|(m, r)| chi / 16.0 * m * r).collect();
    let mut out = g.from_padded(&prod);
    let f8 = if split_linear { nl.f8_nonlinear(&st.mu) } else { nl.f8(&st.mu) };
    let f34 = &nl.f3(st) + &nl.f4(st);
    let mut rest = &nl.ls(&f34) + &nl.f7(st)?;
    rest = &rest + &f8;
    out.axpy(1.0 / e4, &rest);
    Ok(out)
}

/// Stepper for the auxiliary `r₂` equation driven by a given `(s, μ)`
/// trajectory. The forcing is interpolated linearly over each step
/// (second-order exponential Runge–Kutta).
#[derive(Debug, Clone)]
pub struct R2Evolver {
    nl: Nonlinear,
    dt: f64,
    e: Vec<f64>,
    p1: Vec<f64>,
    p2: Vec<f64>,
}

impl R2Evolver {
    /// Stepper with linear symbol `-(χ/ε⁴)G𝓛_r`.
    pub fn new(grid: &Arc<Grid>, params: SymbolParams, dt: f64) -> Result<R2Evolver> {
        if params.eps == 0.0 {
            return Err(Error::Parameter("r2 is undefined at eps = 0".into()));
        }
        if !(dt > 0.0) {
            return Err(Error::Parameter(format!("dt = {dt} must be positive")));
        }
        let e4 = params.eps.powi(4);
        let chi = params.chi();
        let mut e = Vec::with_capacity(grid.n());
        let mut p1 = Vec::with_capacity(grid.n());
        let mut p2 = Vec::with_capacity(grid.n());
        for k in grid.wavenumbers() {
            let z = Complex64::new(-dt * chi / e4 * params.g(k) * params.lr(k), 0.0);
            e.push(z.exp().re);
            p1.push(dt * phi(z, 1).re);
            p2.push(dt * phi(z, 2).re);
        }
        Ok(R2Evolver { nl: Nonlinear::new(grid, params), dt, e, p1, p2 })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advance `r₂` by one step while `(s, μ)` moves from `start` to `end`.
    pub fn step(&self, r2: &SpectralField, start: &StateSM, end: &StateSM) -> Result<SpectralField> {
        let f0 = r2_forcing(&self.nl, start, r2, false)?;
        let n = r2.coeffs().len();
        let base: Vec<Complex64> = (0..n).map(|i| self.e[i] * r2.coeffs()[i] + self.p1[i] * f0.coeffs()[i]).collect();
        let pred = field(self.nl.grid(), base.clone(), Parity::None);
        let f1 = r2_forcing(&self.nl, end, &pred, false)?;
        let out: Vec<Complex64> = (0..n).map(|i| base[i] + self.p2[i] * (f1.coeffs()[i] - f0.coeffs()[i])).collect();
        Ok(field(self.nl.grid(), out, Parity::None))
    }
}

/// One `r₂` step with `(s, μ)` frozen at `state`.
pub fn evolve_r2(state: &CoupledState, dt: f64, params: &SymbolParams) -> Result<SpectralField> {
    let ev = R2Evolver::new(state.grid(), *params, dt)?;
    let sm = state.sm();
    let r2 = match &state.r2 {
        Some(r) => r.clone(),
        None => ev.nl.r2_from_state(&sm)?,
    };
    ev.step(&r2, &sm, &sm)
}

/// Structural invariants of one snapshot.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Conservation {
    /// `|μ₀|`, the mean of `μ`.
    pub mean_mu: f64,
    /// `|∫μ²μ′| / ∫|μ²μ′|` on the padded grid.
    pub trilinear: f64,
    /// `|∫(s²μ)′|` relative to `∫|s²μ|`.
    pub total_derivative: f64,
    /// Relative odd-parity defect of `μ`.
    pub parity_mu: f64,
    /// Relative even-parity defect of `s`.
    pub parity_s: f64,
}

impl Conservation {
    /// Componentwise maximum.
    pub fn max(self, o: Conservation) -> Conservation {
        Conservation {
            mean_mu: self.mean_mu.max(o.mean_mu),
            trilinear: self.trilinear.max(o.trilinear),
            total_derivative: self.total_derivative.max(o.total_derivative),
            parity_mu: self.parity_mu.max(o.parity_mu),
            parity_s: self.parity_s.max(o.parity_s),
        }
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

/// Invariants of `μ` and, when given, `s`.
pub fn conservation(mu: &SpectralField, s: Option<&SpectralField>) -> Conservation {
    let g = mu.grid();
    let (m, m1) = g.to_padded_pair(mu, &mu.derivative(1));
    let (num, den) = m.iter().zip(&m1).fold((0.0, 0.0), |(a, b), (x, y)| (a + x * x * y, b + (x * x * y).abs()));
    let mut c = Conservation {
        mean_mu: mu.coeff(0).norm(),
        trilinear: ratio(num.abs(), den),
        parity_mu: mu.parity_defect(Parity::Odd),
        ..Default::default()
    };
    if let Some(s) = s {
        let ss = g.to_padded(s);
        let prod: Vec<f64> = ss.iter().zip(&m).map(|(a, b)| a * a * b).collect();
        let den = prod.iter().map(|x| x.abs()).sum::<f64>() / prod.len() as f64;
        let d = g.from_padded(&prod).derivative(1);
        c.total_derivative = ratio(d.coeff(0).norm(), den);
        c.parity_s = s.parity_defect(Parity::Even);
    }
    c
}

/// Summary of a `‖μ(·, t)‖_{L²}` time series.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct AttractorSummary {
    pub sup_l2: f64,
    pub time_of_sup: f64,
    /// Mean over the second half of the run.
    pub tail_mean: f64,
    /// Supremum over the second half of the run.
    pub sup_second_half: f64,
    /// Least-squares slope over the second half times its duration, relative
    /// to `tail_mean`.
    pub tail_trend: f64,
}

/// Statistics of a trajectory given as `(t, ‖μ‖_{L²})` pairs.
pub fn attractor_diagnostic(trajectory: &[(f64, f64)]) -> AttractorSummary {
    if trajectory.is_empty() {
        return AttractorSummary::default();
    }
    let (mut sup, mut tsup) = (f64::NEG_INFINITY, 0.0);
    for &(t, v) in trajectory {
        if v > sup {
            sup = v;
            tsup = t;
        }
    }
    let t0 = trajectory[0].0;
    let t1 = trajectory[trajectory.len() - 1].0;
    let mid = 0.5 * (t0 + t1);
    let tail: Vec<(f64, f64)> = trajectory.iter().copied().filter(|&(t, _)| t >= mid).collect();
    let n = tail.len() as f64;
    let mean = tail.iter().map(|p| p.1).sum::<f64>() / n;
    let tm = tail.iter().map(|p| p.0).sum::<f64>() / n;
    let sxx: f64 = tail.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sxy: f64 = tail.iter().map(|p| (p.0 - tm) * (p.1 - mean)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    AttractorSummary {
        sup_l2: sup,
        time_of_sup: tsup,
        tail_mean: mean,
        sup_second_half: tail.iter().fold(f64::NEG_INFINITY, |m, p| m.max(p.1)),
        tail_trend: ratio(slope * (t1 - mid), mean),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{rng_from_seed, structured_field, FieldSpec};

    fn odd_field(g: &Arc<Grid>, amp: f64, seed: u64, top: usize) -> SpectralField {
        structured_field(g, &FieldSpec::new(3.0, 2.0).amplitude(amp).parity(Parity::Odd).max_mode(top), &mut rng_from_seed(seed))
    }

    #[test]
    fn ks_zero_stays_zero() {
        let g = Grid::new(50.0, 64).unwrap();
        let s = KsSolver::new(&g, KsForm::Derivative, 0.1).unwrap();
        let end = s.advance(&KsState::derivative(SpectralField::zeros(&g)), 5.0).unwrap();
        assert_eq!(end.field.norm_l2_coeffs(), 0.0);
    }

    #[test]
    fn ks_linear_growth_rate() {
        let g = Grid::new(50.0, 64).unwrap();
        let m = 5;
        let k = g.q() * m as f64;
        let a = 1e-10;
        let mu = SpectralField::from_fn(&g, |x| a * (k * x).sin());
        let s = KsSolver::new(&g, KsForm::Derivative, 0.05).unwrap();
        let end = s.advance(&KsState::derivative(mu.clone()), 2.0).unwrap();
        let rate = (end.field.coeff(m).norm() / mu.coeff(m).norm()).ln() / end.t;
        let exact = k * k - k.powi(4);
        assert!((rate - exact).abs() < 0.01 * exact.abs(), "{rate} vs {exact}");
    }

    #[test]
    fn ks_forms_agree() {
        let g = Grid::new(30.0, 64).unwrap();
        let mut eta = structured_field(&g, &FieldSpec::new(3.0, 2.0).parity(Parity::Even).max_mode(8), &mut rng_from_seed(2));
        let c = eta.value_at_origin().re;
        eta.coeffs_mut()[0] -= c;
        let dt = 0.01;
        let pf = KsSolver::new(&g, KsForm::Phase, dt).unwrap().pinned(true);
        let df = KsSolver::new(&g, KsForm::Derivative, dt).unwrap();
        let e = pf.advance(&KsState::phase(eta.clone()), 10.0).unwrap();
        let m = df.advance(&KsState::derivative(eta.derivative(1)), 10.0).unwrap();
        let diff = (&e.mu() - &m.field).norm_l2_coeffs() / m.field.norm_l2_coeffs();
        assert!(diff < 1e-6, "{diff}");
        assert!(e.field.value_at_origin().re.abs() < 1e-12);
    }

    #[test]
    fn ks_conserves_mean_and_parity() {
        let g = Grid::new(50.0, 128).unwrap();
        let s = KsSolver::new(&g, KsForm::Derivative, 0.05).unwrap();
        let mut st = KsState::derivative(odd_field(&g, 1.0, 3, 20));
        let mut worst = Conservation::default();
        for _ in 0..200 {
            st = s.step(&st).unwrap();
            worst = worst.max(conservation(&st.field, None));
        }
        assert!(worst.mean_mu < 1e-13);
        assert!(worst.trilinear < 1e-12, "{}", worst.trilinear);
        assert!(worst.parity_mu < 1e-13);
    }

    #[test]
    fn coupled_zero_stays_zero() {
        let g = Grid::new(40.0, 64).unwrap();
        let p = SymbolParams::new(0.1, 0.1).unwrap();
        let st = CoupledState::zeros(&g);
        let end = step_coupled(&st, 0.01, &p).unwrap();
        assert_eq!(end.s.norm_l2_coeffs() + end.mu.norm_l2_coeffs(), 0.0);
    }

    #[test]
    fn coupled_at_eps_zero_is_ks() {
        let g = Grid::new(40.0, 128).unwrap();
        let p = SymbolParams::new(0.0, 0.1).unwrap();
        let mu = odd_field(&g, 0.5, 5, 20);
        let nl = Nonlinear::new(&g, p);
        let st = CoupledState::new(nl.slaved_s(&mu), mu.clone()).unwrap();
        let c = CoupledSolver::new(&g, p, Formulation::default(), 0.02).unwrap().advance(&st, 2.0).unwrap();
        let k = KsSolver::new(&g, KsForm::Derivative, 0.02).unwrap().advance(&KsState::derivative(mu), 2.0).unwrap();
        assert!((&c.mu - &k.field).norm_l2_coeffs() < 1e-12 * k.field.norm_l2_coeffs());
    }

    #[test]
    fn amplitude_relaxes_to_slaved_value() {
        let g = Grid::new(40.0, 64).unwrap();
        let p = SymbolParams::new(0.1, 0.1).unwrap();
        let mu = odd_field(&g, 1e-4, 6, 10);
        let solver = CoupledSolver::new(&g, p, Formulation::default(), 1e-5).unwrap();
        let t = 2e-5;
        let s = solver.relax_amplitude(&SpectralField::zeros(&g).with_parity(Parity::Even), &mu, t).unwrap();
        let nl = solver.nonlinear_maps();
        let target = nl.slaved_s(&mu);
        let e4 = p.eps.powi(4);
        for m in 1..10i64 {
            let k = g.q() * m as f64;
            let rate = p.chi() / e4 * p.ls(k);
            let expect = target.coeff(m) * (1.0 - (-rate * t).exp());
            assert!((s.coeff(m) - expect).norm() < 1e-4 * target.coeff(m).norm().max(1e-30));
        }
    }

    #[test]
    fn formulations_agree() {
        let g = Grid::new(40.0, 128).unwrap();
        let p = SymbolParams::new(0.1, 0.1).unwrap();
        let mu = odd_field(&g, 0.5, 7, 20);
        let nl = Nonlinear::new(&g, p);
        let st = CoupledState::new(nl.slaved_s(&mu), mu).unwrap();
        let dt = 0.005;
        let a = CoupledSolver::new(&g, p, Formulation::AmplitudePhase, dt).unwrap().advance(&st, 1.0).unwrap();
        let b = CoupledSolver::new(&g, p, Formulation::SlavedR2, dt).unwrap().advance(&st, 1.0).unwrap();
        let dmu = (&a.mu - &b.mu).norm_l2_coeffs() / a.mu.norm_l2_coeffs();
        let ds = (&a.s - &b.s).norm_l2_coeffs() / a.s.norm_l2_coeffs();
        assert!(dmu < 1e-6 && ds < 1e-6, "{dmu} {ds}");
    }

    #[test]
    fn r2_linear_decay() {
        let g = Grid::new(40.0, 32).unwrap();
        let p = SymbolParams::new(0.5, 0.1).unwrap();
        let r2 = SpectralField::from_fn(&g, |x| (g.q() * 2.0 * x).cos());
        let ev = R2Evolver::new(&g, p, 0.01).unwrap();
        let z = StateSM::zeros(&g);
        let out = ev.step(&r2, &z, &z).unwrap();
        let k = 2.0 * g.q();
        let rate = p.chi() / p.eps.powi(4) * p.g(k) * p.lr(k);
        assert!((out.coeff(2).re - 0.5 * (-rate * 0.01).exp()).abs() < 1e-14);
    }

    #[test]
    fn evolved_r2_matches_algebraic() {
        let g = Grid::new(40.0, 128).unwrap();
        let p = SymbolParams::new(0.1, 0.1).unwrap();
        let mu = odd_field(&g, 0.5, 8, 20);
        let nl = Nonlinear::new(&g, p);
        let st = CoupledState::new(nl.slaved_s(&mu), mu).unwrap();
        let solver = CoupledSolver::new(&g, p, Formulation::default(), 0.002).unwrap().with_r2_evolution(true).unwrap();
        let end = solver.advance(&st, 0.5).unwrap();
        let alg = nl.r2_from_state(&StateSM { s: end.s.clone(), mu: end.mu.clone() }).unwrap();
        let rel = (&alg - end.r2.as_ref().unwrap()).norm_l2_coeffs() / alg.norm_l2_coeffs();
        assert!(rel < 1e-4, "{rel}");
    }

    #[test]
    fn attractor_summary() {
        let zero: Vec<(f64, f64)> = (0..100).map(|i| (i as f64, 0.0)).collect();
        let z = attractor_diagnostic(&zero);
        assert_eq!((z.sup_l2, z.tail_mean, z.tail_trend), (0.0, 0.0, 0.0));
        let ramp: Vec<(f64, f64)> = (0..101).map(|i| (i as f64, 1.0 + 0.01 * i as f64)).collect();
        let r = attractor_diagnostic(&ramp);
        assert!(r.sup_second_half <= r.sup_l2);
        assert!((r.tail_trend - 0.5 / 1.75).abs() < 1e-12);
    }
}
