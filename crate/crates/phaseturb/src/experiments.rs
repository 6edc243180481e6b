//! End-to-end studies built from the solvers: the long coupled-system run
//! with its diagnostics, ε̂-sweeps of the slaving residual and of the
//! Kuramoto–Sivashinsky approximation error, attractor-size scaling of the
//! Kuramoto–Sivashinsky equation, formulation cross-checks against direct
//! Ginzburg–Landau integration, and the linear dispersion study.
//!
//! Every pipeline is deterministic for a given configuration and seed. Sweep
//! members run through [`Execution`]; each member is single-threaded and the
//! results are aggregated in input order.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cgl::{
    build_initial_data, extract_phase_amplitude, from_scaled, to_scaled, CglParams, CglSolver, CglState, ExtractOptions, Frame,
    InitialAmplitude, PhaseAmplitudeState,
};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::grid::{Grid, Parity, SpectralField};
use crate::nonlinear::StateSM;
use crate::norms::{check_class_c, norm_l2, norm_linf, norm_sigma, slaved_amplitude, ClassCParams, MembershipReport, NormParams};
use crate::phase::{
    attractor_diagnostic, conservation, AttractorSummary, Conservation, CoupledSolver, CoupledState, Formulation, KsForm,
    KsSolver, KsState,
};
use crate::random::{rng_from_seed, structured_field, FieldSpec};
use crate::symbols::{cgl_linear_rate, critical_wavenumber, dispersion_lambda, SymbolParams};

/// Largest admissible mean of `μ`.
pub const MEAN_TOLERANCE: f64 = 1e-13;
/// Largest admissible relative value of the discrete trilinear and
/// total-derivative integrals.
pub const INTEGRAL_TOLERANCE: f64 = 1e-12;
/// Largest admissible relative parity defect.
pub const PARITY_TOLERANCE: f64 = 1e-12;
/// Scaled period of the primary run; fixes the default window constant.
pub const PRIMARY_L: f64 = 40.0;

// ---------------------------------------------------------------------------
// Fits and gates
// ---------------------------------------------------------------------------

/// Least-squares line `y = slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination; 1 when the data have no spread.
    pub r2: f64,
}

/// Ordinary least squares on at least two points with distinct abscissae.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Parameter(format!("linear fit needs two or more paired points, got {} and {}", xs.len(), ys.len())));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Parameter("linear fit data must be finite".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Parameter("linear fit abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(LinearFit { slope, intercept, r2 })
}

/// Fit `y = C x^p` by a line through `(ln x, ln y)`; `slope` is `p`.
pub fn power_law_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.iter().chain(ys).any(|&v| !(v > 0.0)) {
        return Err(Error::Parameter("power-law fit needs positive data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    linear_fit(&lx, &ly)
}

/// A named pass/fail check on one number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    pub value: f64,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub pass: bool,
}

impl Gate {
    /// Pass when `min ≤ value ≤ max`, with absent bounds ignored.
    pub fn within(name: &str, value: f64, min: Option<f64>, max: Option<f64>) -> Gate {
        let pass = value.is_finite() && min.is_none_or(|m| value >= m) && max.is_none_or(|m| value <= m);
        Gate { name: name.to_string(), value, min, max, pass }
    }

    pub fn at_most(name: &str, value: f64, max: f64) -> Gate {
        Gate::within(name, value, None, Some(max))
    }

    pub fn at_least(name: &str, value: f64, min: f64) -> Gate {
        Gate::within(name, value, Some(min), None)
    }

    /// Boolean gate; `value` is 1 for true.
    pub fn flag(name: &str, ok: bool) -> Gate {
        Gate { name: name.to_string(), value: if ok { 1.0 } else { 0.0 }, min: Some(1.0), max: None, pass: ok }
    }
}

/// Gates on a componentwise-maximum [`Conservation`] record.
pub fn conservation_gates(prefix: &str, c: &Conservation, with_s: bool) -> Vec<Gate> {
    let mut g = vec![
        Gate::at_most(&format!("{prefix}mean_mu"), c.mean_mu, MEAN_TOLERANCE),
        Gate::at_most(&format!("{prefix}trilinear"), c.trilinear, INTEGRAL_TOLERANCE),
        Gate::at_most(&format!("{prefix}parity_mu"), c.parity_mu, PARITY_TOLERANCE),
    ];
    if with_s {
        g.push(Gate::at_most(&format!("{prefix}total_derivative"), c.total_derivative, INTEGRAL_TOLERANCE));
        g.push(Gate::at_most(&format!("{prefix}parity_s"), c.parity_s, PARITY_TOLERANCE));
    }
    g
}

// ---------------------------------------------------------------------------
// Initial data
// ---------------------------------------------------------------------------

/// Shape of the random initial phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialSpec {
    pub seed: u64,
    /// Coefficient scale of `η̂₀`.
    pub amplitude: f64,
    /// Largest excited mode of `η̂₀`.
    pub max_mode: usize,
    /// Decay exponent of the coefficient envelope.
    pub decay: f64,
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec { seed: 1, amplitude: 1.0, max_mode: 12, decay: 3.0 }
    }
}

/// Even random phase with `η̂₀(0) = 0`.
pub fn initial_phase(grid: &Arc<Grid>, spec: &InitialSpec) -> SpectralField {
    let fs = FieldSpec::new(spec.decay, 1.0).amplitude(spec.amplitude).parity(Parity::Even).max_mode(spec.max_mode);
    let mut eta = structured_field(grid, &fs, &mut rng_from_seed(spec.seed));
    let c = eta.value_at_origin().re;
    eta.coeffs_mut()[0] -= c;
    eta.with_parity(Parity::Even)
}

/// Phase `η` with `η′ = μ` and `η(0) = 0`. `μ` must have zero mean.
pub fn phase_from_derivative(mu: &SpectralField) -> Result<SpectralField> {
    let g = mu.grid();
    let scale = mu.norm_l2_coeffs().max(1.0);
    if mu.coeff(0).norm() > 1e-12 * scale {
        return Err(Error::Parameter(format!("mean of mu is {:.3e}; no periodic antiderivative", mu.coeff(0).norm())));
    }
    let n = g.n();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
    for (i, c) in mu.coeffs().iter().enumerate() {
        let k = g.wavenumber(i);
        if k != 0.0 && g.mode(i).unsigned_abs() as usize != n / 2 {
            coeffs[i] = c / Complex64::new(0.0, k);
        }
    }
    let parity = mu.parity().derivative(1);
    let mut eta = SpectralField::from_coeffs(g.clone(), coeffs, parity);
    let c = eta.value_at_origin().re;
    eta.coeffs_mut()[0] -= c;
    Ok(eta.with_parity(parity))
}

// ---------------------------------------------------------------------------
// Long coupled run
// ---------------------------------------------------------------------------

/// Parameters of a coupled-system run in scaled variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub alpha: f64,
    pub eps_hat: f64,
    /// Scaled period `L = ε̂L₀`.
    pub l: f64,
    pub n: usize,
    pub dt: f64,
    pub t_end: f64,
    /// Spacing of diagnostic rows.
    pub diagnostic_interval: f64,
    /// Spacing of stored snapshots.
    pub snapshot_interval: f64,
    /// Requested Kuramoto–Sivashinsky comparison window `t̂₁`.
    pub window: f64,
    /// Window constant `c_t` in `t̂₁ = min(window, c_t ρ⁻⁴)`; `None` picks the
    /// value giving `t̂₁ = 1` at `L = 40`.
    pub c_t: Option<f64>,
    /// Initial period excluded from time averages.
    pub transient: f64,
    pub formulation: Formulation,
    /// Project every step onto the even/odd subspace.
    pub symmetric: bool,
    pub init: InitialSpec,
    pub sigma: f64,
    pub delta: f64,
    pub constants: TheoremConstants,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            alpha: 0.1,
            eps_hat: 0.05,
            l: PRIMARY_L,
            n: 512,
            dt: 0.01,
            t_end: 200.0,
            diagnostic_interval: 0.1,
            snapshot_interval: 1.0,
            window: 1.0,
            c_t: None,
            transient: 20.0,
            formulation: Formulation::AmplitudePhase,
            symmetric: true,
            init: InitialSpec::default(),
            sigma: 6.0,
            delta: 2.0,
            constants: TheoremConstants::default(),
        }
    }
}

/// Number of steps of size `dt` in `interval`; errors unless the two are
/// commensurate.
pub fn steps_for(interval: f64, dt: f64, what: &str) -> Result<usize> {
    let r = interval / dt;
    let m = r.round();
    if !(m >= 1.0) || (r - m).abs() > 1e-9 * r {
        return Err(Error::Parameter(format!("{what} = {interval} is not a positive multiple of dt = {dt}")));
    }
    Ok(m as usize)
}

impl RunConfig {
    pub fn symbol_params(&self) -> Result<SymbolParams> {
        SymbolParams::new(self.eps_hat, self.alpha)
    }

    pub fn norm_params(&self) -> Result<NormParams> {
        NormParams::new(self.sigma, self.delta)
    }

    /// `ρ = K L^{8/5}`.
    pub fn rho(&self) -> f64 {
        self.constants.k * self.l.powf(1.6)
    }

    /// Window `t̂₁ = min(window, c_t ρ⁻⁴)`.
    pub fn window_length(&self) -> f64 {
        let c_t = self.c_t.unwrap_or_else(|| (self.constants.k * PRIMARY_L.powf(1.6)).powi(4));
        self.window.min(c_t * self.rho().powi(-4))
    }

    /// Check positivity and step commensurability.
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.t_end > 0.0 && self.l > 0.0) {
            return Err(Error::Parameter("dt, t_end and L must be positive".into()));
        }
        if !self.n.is_power_of_two() {
            return Err(Error::Parameter(format!("N = {} must be a power of two", self.n)));
        }
        steps_for(self.diagnostic_interval, self.dt, "diagnostic_interval")?;
        steps_for(self.snapshot_interval, self.dt, "snapshot_interval")?;
        steps_for(self.window_length(), self.dt, "window")?;
        steps_for(self.t_end, self.dt, "t_end")?;
        self.symbol_params()?;
        self.norm_params()?;
        Ok(())
    }
}

/// Time series of a coupled run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticSeries {
    pub t: Vec<f64>,
    /// `‖η̂′‖_{L²}`.
    pub norm_mu_prime: Vec<f64>,
    /// `‖ŝ‖_{L²}`.
    pub norm_s: Vec<f64>,
    /// `‖ŝ + (1/8)Ĝη̂″ + (ε̂²/32)Ĝ(η̂′)²‖_{L²}`.
    pub slaving_residual: Vec<f64>,
    /// `‖η̂′ − η̂_c′‖_{L²}` against the restarted Kuramoto–Sivashinsky run.
    pub ks_error: Vec<f64>,
    /// `ks_error / ‖η̂′‖_{L²}`.
    pub ks_error_rel: Vec<f64>,
    /// `‖η̂′‖_σ`.
    pub norm_mu_sigma: Vec<f64>,
    /// `‖ŝ‖_{σ−1}`.
    pub norm_s_sigma_m1: Vec<f64>,
}

impl DiagnosticSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Times strictly increase and every entry is finite and nonnegative.
    pub fn validate(&self) -> Result<()> {
        let n = self.t.len();
        let cols = self.columns();
        if cols.iter().any(|(_, c)| c.len() != n) {
            return Err(Error::Parameter("diagnostic columns differ in length".into()));
        }
        if self.t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Parameter("diagnostic times are not strictly increasing".into()));
        }
        for (name, c) in cols {
            if let Some(v) = c.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return Err(Error::Parameter(format!("diagnostic column {name} holds {v}")));
            }
        }
        Ok(())
    }

    /// Columns in output order, `t` first.
    pub fn columns(&self) -> Vec<(&'static str, &[f64])> {
        vec![
            ("t", &self.t),
            ("norm_mu_L2", &self.norm_mu_prime),
            ("norm_s_L2", &self.norm_s),
            ("slaving_residual_L2", &self.slaving_residual),
            ("ks_error_L2", &self.ks_error),
            ("ks_error_rel", &self.ks_error_rel),
            ("norm_mu_sigma", &self.norm_mu_sigma),
            ("norm_s_sigma_m1", &self.norm_s_sigma_m1),
        ]
    }

    /// Mean of a column over rows with `t ≥ t0`.
    pub fn mean_after(column: &[f64], t: &[f64], t0: f64) -> f64 {
        let v: Vec<f64> = t.iter().zip(column).filter(|(ti, _)| **ti >= t0).map(|(_, c)| *c).collect();
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    }
}

/// Kuramoto–Sivashinsky comparison over one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSummary {
    pub t_start: f64,
    pub sup_error: f64,
    pub sup_error_rel: f64,
}

/// Output of [`run_coupled`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoupledRun {
    pub config: RunConfig,
    pub series: DiagnosticSeries,
    /// Scaled `(ŝ, η̂, μ̂)` at every snapshot time, starting at `t̂ = 0`.
    #[serde(skip)]
    pub snapshots: Vec<PhaseAmplitudeState>,
    /// Componentwise maximum over all diagnostic rows.
    pub conservation: Conservation,
    pub window: f64,
    pub windows: Vec<WindowSummary>,
    /// Rows after the transient where `‖η̂′‖ ≥ ‖ŝ‖ ≥ ε̂⁻⁴·residual` fails.
    pub ordering_violations: usize,
    pub ordering_rows: usize,
}

impl CoupledRun {
    /// Time-averaged slaving residual after the transient.
    pub fn mean_residual(&self) -> f64 {
        DiagnosticSeries::mean_after(&self.series.slaving_residual, &self.series.t, self.config.transient)
    }

    /// Largest per-window relative Kuramoto–Sivashinsky error among windows
    /// that start after the transient.
    pub fn ks_window_sup(&self) -> f64 {
        self.windows.iter().filter(|w| w.t_start >= self.config.transient).map(|w| w.sup_error_rel).fold(0.0, f64::max)
    }

    /// Mean of the per-window relative errors after the transient.
    pub fn ks_window_mean(&self) -> f64 {
        let v: Vec<f64> = self.windows.iter().filter(|w| w.t_start >= self.config.transient).map(|w| w.sup_error_rel).collect();
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    }
}

/// Scaled snapshot of a coupled state.
fn snapshot(st: &CoupledState) -> Result<PhaseAmplitudeState> {
    Ok(PhaseAmplitudeState { s: st.s.clone(), eta: phase_from_derivative(&st.mu)?, mu: st.mu.clone(), t: st.t, scaled: true })
}

/// Slaved initial state `(ŝ₀, μ̂₀)` for the run.
pub fn initial_state(cfg: &RunConfig, grid: &Arc<Grid>) -> Result<CoupledState> {
    let eta = initial_phase(grid, &cfg.init);
    let s0 = slaved_amplitude(&eta, &cfg.symbol_params()?);
    CoupledState::new(s0, eta.derivative(1))
}

/// Integrate the coupled system and record the diagnostic series, restarting
/// the Kuramoto–Sivashinsky comparison from `μ̂(t̂₀)` at every window start.
pub fn run_coupled(cfg: &RunConfig) -> Result<CoupledRun> {
    cfg.validate()?;
    let grid = Grid::new(cfg.l, cfg.n)?;
    let sym = cfg.symbol_params()?;
    let np = cfg.norm_params()?;
    let np1 = np.shifted(-1.0);
    let solver = CoupledSolver::new(&grid, sym, cfg.formulation, cfg.dt)?.symmetric(cfg.symmetric);
    let ks = KsSolver::new(&grid, KsForm::Derivative, cfg.dt)?.symmetric(cfg.symmetric);
    let nl = solver.nonlinear_maps().clone();

    let total = steps_for(cfg.t_end, cfg.dt, "t_end")?;
    let every = steps_for(cfg.diagnostic_interval, cfg.dt, "diagnostic_interval")?;
    let snap_every = steps_for(cfg.snapshot_interval, cfg.dt, "snapshot_interval")?;
    let window = cfg.window_length();
    let win_steps = steps_for(window, cfg.dt, "window")?;
    let e4 = cfg.eps_hat.powi(4);

    let mut st = initial_state(cfg, &grid)?;
    let mut ksst = KsState::derivative(st.mu.clone());
    let mut series = DiagnosticSeries::default();
    let mut snapshots = Vec::new();
    let mut cons = Conservation::default();
    let mut windows: Vec<WindowSummary> = Vec::new();
    let (mut violations, mut rows) = (0, 0);

    for step in 0..=total {
        let t = step as f64 * cfg.dt;
        if step % win_steps == 0 && step < total {
            ksst = KsState::derivative(st.mu.clone());
            windows.push(WindowSummary { t_start: t, sup_error: 0.0, sup_error_rel: 0.0 });
        }
        if step % every == 0 {
            let nm = norm_l2(&st.mu);
            let ns = norm_l2(&st.s);
            let res = norm_l2(&(&st.s - &nl.slaved_s(&st.mu)));
            let ke = norm_l2(&(&st.mu - &ksst.field));
            let kr = if nm > 0.0 { ke / nm } else { 0.0 };
            series.t.push(t);
            series.norm_mu_prime.push(nm);
            series.norm_s.push(ns);
            series.slaving_residual.push(res);
            series.ks_error.push(ke);
            series.ks_error_rel.push(kr);
            series.norm_mu_sigma.push(norm_sigma(&st.mu, &np));
            series.norm_s_sigma_m1.push(norm_sigma(&st.s, &np1));
            cons = cons.max(conservation(&st.mu, Some(&st.s)));
            if let Some(w) = windows.last_mut() {
                w.sup_error = w.sup_error.max(ke);
                w.sup_error_rel = w.sup_error_rel.max(kr);
            }
            if t >= cfg.transient && e4 > 0.0 {
                rows += 1;
                if !(nm >= ns && ns >= res / e4) {
                    violations += 1;
                }
            }
        }
        if step % snap_every == 0 {
            snapshots.push(snapshot(&st)?);
        }
        if step < total {
            st = solver.step(&st)?;
            ksst = ks.step(&ksst)?;
            st.t = (step + 1) as f64 * cfg.dt;
            ksst.t = st.t;
        }
    }
    series.validate()?;
    Ok(CoupledRun {
        config: cfg.clone(),
        series,
        snapshots,
        conservation: cons,
        window,
        windows,
        ordering_violations: violations,
        ordering_rows: rows,
    })
}

/// Result of repeating a short run at half the step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinementReport {
    pub dt: f64,
    pub t_probe: f64,
    /// `‖μ̂_dt − μ̂_{dt/2}‖ / ‖μ̂_{dt/2}‖` at `t_probe`.
    pub rel_mu: f64,
    pub rel_s: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Integrate to `t_probe` with `dt` and `dt/2` and compare.
pub fn dt_refinement_check(cfg: &RunConfig, t_probe: f64, tolerance: f64) -> Result<RefinementReport> {
    let grid = Grid::new(cfg.l, cfg.n)?;
    let sym = cfg.symbol_params()?;
    let st = initial_state(cfg, &grid)?;
    let run = |dt: f64| -> Result<CoupledState> {
        let n = steps_for(t_probe, dt, "t_probe")?;
        let s = CoupledSolver::new(&grid, sym, cfg.formulation, dt)?.symmetric(cfg.symmetric);
        let mut cur = st.clone();
        for _ in 0..n {
            cur = s.step(&cur)?;
        }
        Ok(cur)
    };
    let coarse = run(cfg.dt)?;
    let fine = run(0.5 * cfg.dt)?;
    let rel = |a: &SpectralField, b: &SpectralField| {
        let d = b.norm_l2_coeffs();
        let e = (a - b).norm_l2_coeffs();
        if d > 0.0 {
            e / d
        } else {
            e
        }
    };
    let rel_mu = rel(&coarse.mu, &fine.mu);
    let rel_s = rel(&coarse.s, &fine.s);
    Ok(RefinementReport { dt: cfg.dt, t_probe, rel_mu, rel_s, tolerance, pass: rel_mu.max(rel_s) <= tolerance })
}

// ---------------------------------------------------------------------------
// Bound monitors
// ---------------------------------------------------------------------------

/// User-supplied constants of the uniform bounds. None of them has a known
/// value; the monitors report the empirical ratios beside them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremConstants {
    /// `K` in `ρ = K L^{8/5}`.
    pub k: f64,
    pub c_eta: f64,
    pub c_s: f64,
    pub c_mu: f64,
    /// Reference `ε̂₀` for the residual envelope.
    pub eps_hat0: f64,
}

impl Default for TheoremConstants {
    fn default() -> Self {
        TheoremConstants { k: 1.0, c_eta: 1.0, c_s: 1.0, c_mu: 1.0, eps_hat0: 1.0 }
    }
}

/// Ratios of the uniform bounds along one trajectory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ApproximationBoundReport {
    pub rho: f64,
    pub eps_hat: f64,
    /// `‖η̂′‖_σ/ρ` per row.
    pub mu_ratio: Vec<f64>,
    /// `‖ŝ‖_{σ−1}/ρ³` per row.
    pub s_ratio: Vec<f64>,
    /// `residual / ((ε̂/ε̂₀)² c_η ρ)` per row.
    pub residual_ratio: Vec<f64>,
    pub sup_mu_ratio: f64,
    pub sup_s_ratio: f64,
    pub sup_residual_ratio: f64,
    /// Empirical `c_η`, `c_s`: the smallest constants the run is consistent
    /// with.
    pub fitted_c_eta: f64,
    pub fitted_c_s: f64,
    pub mu_below: bool,
    pub s_below: bool,
    pub residual_below: bool,
}

/// Evaluate the uniform-bound ratios on a diagnostic series.
pub fn approximation_bound_monitor(series: &DiagnosticSeries, l: f64, eps_hat: f64, c: &TheoremConstants) -> ApproximationBoundReport {
    let rho = c.k * l.powf(1.6);
    let env = (eps_hat / c.eps_hat0).powi(2) * c.c_eta * rho;
    let mu_ratio: Vec<f64> = series.norm_mu_sigma.iter().map(|v| v / rho).collect();
    let s_ratio: Vec<f64> = series.norm_s_sigma_m1.iter().map(|v| v / rho.powi(3)).collect();
    let residual_ratio: Vec<f64> =
        series.slaving_residual.iter().map(|v| if env > 0.0 { v / env } else if *v == 0.0 { 0.0 } else { f64::INFINITY }).collect();
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(*x));
    let (sm, ss, sr) = (sup(&mu_ratio), sup(&s_ratio), sup(&residual_ratio));
    ApproximationBoundReport {
        rho,
        eps_hat,
        sup_mu_ratio: sm,
        sup_s_ratio: ss,
        sup_residual_ratio: sr,
        fitted_c_eta: sm,
        fitted_c_s: ss,
        mu_below: sm <= c.c_eta,
        s_below: ss <= c.c_s,
        residual_below: sr <= 1.0,
        mu_ratio,
        s_ratio,
        residual_ratio,
    }
}

/// Restatement of the residual bound, `residual/(c_μρ) ≤ (ε̂/ε̂₀)²`, with `ε̂₀`
/// fitted from a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualEnvelope {
    /// Largest `ε̂₀` for which every sweep member satisfies the bound.
    pub eps_hat0: f64,
    /// `(residual/(c_μρ)) / (ε̂/ε̂₀)²` per member; at most 1 by construction.
    pub ratios: Vec<f64>,
    pub pass: bool,
}

/// Fit `ε̂₀` from `(ε̂, sup residual)` pairs.
pub fn fit_residual_envelope(pairs: &[(f64, f64)], c_mu: f64, rho: f64) -> ResidualEnvelope {
    let eps_hat0 = pairs
        .iter()
        .filter(|p| p.1 > 0.0)
        .map(|&(e, r)| e * (c_mu * rho / r).sqrt())
        .fold(f64::INFINITY, f64::min);
    let ratios: Vec<f64> = pairs.iter().map(|&(e, r)| r / (c_mu * rho) / (e / eps_hat0).powi(2)).collect();
    let pass = ratios.iter().all(|r| *r <= 1.0 + 1e-12);
    ResidualEnvelope { eps_hat0, ratios, pass }
}

/// Suprema over a trajectory of the unscaled norms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UnscaledNormRow {
    pub eps_hat: f64,
    /// Unscaled `ε`.
    pub eps: f64,
    pub eta_l2: f64,
    pub eta_prime_l2: f64,
    pub s_l2: f64,
    pub eta_linf: f64,
    pub s_linf: f64,
}

/// Unscaled norms over a trajectory of scaled snapshots, taking the supremum
/// in time of each norm on the period `[−L₀/2, L₀/2]`.
pub fn unscaled_norm_monitor(snapshots: &[PhaseAmplitudeState], eps_hat: f64, alpha: f64) -> Result<UnscaledNormRow> {
    let sym = SymbolParams::new(eps_hat, alpha)?;
    let mut row = UnscaledNormRow { eps_hat, eps: sym.eps_unscaled(), ..Default::default() };
    for snap in snapshots {
        let u = from_scaled(snap, eps_hat, sym.chi())?;
        row.eta_l2 = row.eta_l2.max(norm_l2(&u.eta));
        row.eta_prime_l2 = row.eta_prime_l2.max(norm_l2(&u.mu));
        row.s_l2 = row.s_l2.max(norm_l2(&u.s));
        row.eta_linf = row.eta_linf.max(norm_linf(&u.eta));
        row.s_linf = row.s_linf.max(norm_linf(&u.s));
    }
    Ok(row)
}

/// Fitted ε-exponents of the unscaled norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnscaledNormFit {
    pub eta_l2: LinearFit,
    pub eta_prime_l2: LinearFit,
    pub s_l2: LinearFit,
    pub eta_linf: LinearFit,
    pub s_linf: LinearFit,
}

/// Reference exponents `(5/2 − 1/m, 7/2 − 3/m, 2 − 13/(8m), 4 − 4/m)` for the
/// `L²` norm of `η′`, the `L²` norm of `s` and the `L^∞` norms of `η` and `s`.
pub fn unscaled_norm_exponents(m: f64) -> [f64; 4] {
    [2.5 - 1.0 / m, 3.5 - 3.0 / m, 2.0 - 13.0 / (8.0 * m), 4.0 - 4.0 / m]
}

/// Log-log slopes against the unscaled `ε`.
pub fn fit_unscaled_norms(rows: &[UnscaledNormRow]) -> Result<UnscaledNormFit> {
    let e: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let f = |g: fn(&UnscaledNormRow) -> f64| power_law_fit(&e, &rows.iter().map(g).collect::<Vec<_>>());
    Ok(UnscaledNormFit {
        eta_l2: f(|r| r.eta_l2)?,
        eta_prime_l2: f(|r| r.eta_prime_l2)?,
        s_l2: f(|r| r.s_l2)?,
        eta_linf: f(|r| r.eta_linf)?,
        s_linf: f(|r| r.s_linf)?,
    })
}

// ---------------------------------------------------------------------------
// ε̂-sweep
// ---------------------------------------------------------------------------

/// Summary of one sweep member.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepMember {
    pub eps_hat: f64,
    pub mean_residual: f64,
    pub sup_residual: f64,
    pub ks_window_sup: f64,
    pub ks_window_mean: f64,
    pub conservation: Conservation,
    pub unscaled_norms: UnscaledNormRow,
    pub approximation_bound: ApproximationBoundReport,
    pub ordering_violations: usize,
    pub ordering_rows: usize,
}

/// Sweep outcome with gates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub members: Vec<SweepMember>,
    /// `mean_residual[i] / mean_residual[i+1]` for decreasing `ε̂`.
    pub residual_ratios: Vec<f64>,
    pub residual_fit: Option<LinearFit>,
    pub ks_monotone: bool,
    pub unscaled_fit: Option<UnscaledNormFit>,
    pub envelope: ResidualEnvelope,
    pub gates: Vec<Gate>,
}

impl SweepReport {
    pub fn pass(&self) -> bool {
        self.gates.iter().all(|g| g.pass)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.gates.iter().filter(|g| !g.pass).map(|g| g.name.as_str()).collect()
    }
}

/// Smallest residual ratio accepted between successive `ε̂` levels.
pub const RESIDUAL_RATIO_MIN: f64 = 3.0;
/// Accepted slope range of the unscaled `‖s‖_{L^∞}`.
pub const S_LINF_SLOPE: (f64, f64) = (3.5, 4.5);
/// Accepted slope range of the unscaled `‖η‖_{L^∞}`.
pub const ETA_LINF_SLOPE: (f64, f64) = (1.6, 2.2);

/// Run `base` at every `ε̂` (sorted decreasing) and evaluate the scaling gates.
/// Members also come back in full for output.
pub fn run_sweep(base: &RunConfig, eps_hats: &[f64], exec: Execution) -> Result<(SweepReport, Vec<CoupledRun>)> {
    let mut eps: Vec<f64> = eps_hats.to_vec();
    eps.sort_by(|a, b| b.partial_cmp(a).expect("finite eps_hat"));
    eps.dedup();
    if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Parameter("sweep needs positive eps_hat values".into()));
    }
    let runs = exec.map_slice(&eps, |&e| run_coupled(&RunConfig { eps_hat: e, ..base.clone() }));
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let members = runs
        .iter()
        .map(|r| {
            let c = &r.config;
            Ok(SweepMember {
                eps_hat: c.eps_hat,
                mean_residual: r.mean_residual(),
                sup_residual: r.series.slaving_residual.iter().fold(0.0f64, |m, x| m.max(*x)),
                ks_window_sup: r.ks_window_sup(),
                ks_window_mean: r.ks_window_mean(),
                conservation: r.conservation,
                unscaled_norms: unscaled_norm_monitor(&r.snapshots, c.eps_hat, c.alpha)?,
                approximation_bound: approximation_bound_monitor(&r.series, c.l, c.eps_hat, &c.constants),
                ordering_violations: r.ordering_violations,
                ordering_rows: r.ordering_rows,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((sweep_report(base, members)?, runs))
}

/// Gates of a sweep from its member summaries, ordered by decreasing `ε̂`.
pub fn sweep_report(base: &RunConfig, members: Vec<SweepMember>) -> Result<SweepReport> {
    let residual_ratios: Vec<f64> = members.windows(2).map(|w| w[0].mean_residual / w[1].mean_residual).collect();
    let ks_monotone = members.windows(2).all(|w| w[1].ks_window_sup < w[0].ks_window_sup);
    let multi = members.len() >= 2;
    let residual_fit = if multi {
        Some(power_law_fit(
            &members.iter().map(|m| m.eps_hat).collect::<Vec<_>>(),
            &members.iter().map(|m| m.mean_residual).collect::<Vec<_>>(),
        )?)
    } else {
        None
    };
    let unscaled_fit =
        if multi { Some(fit_unscaled_norms(&members.iter().map(|m| m.unscaled_norms).collect::<Vec<_>>())?) } else { None };
    let rho = base.rho();
    let envelope = fit_residual_envelope(
        &members.iter().map(|m| (m.eps_hat, m.sup_residual)).collect::<Vec<_>>(),
        base.constants.c_mu,
        rho,
    );

    let mut gates = Vec::new();
    for (i, r) in residual_ratios.iter().enumerate() {
        let name = format!("slaving_ratio_{}_{}", members[i].eps_hat, members[i + 1].eps_hat);
        gates.push(Gate::at_least(&name, *r, RESIDUAL_RATIO_MIN));
    }
    if multi {
        gates.push(Gate::flag("ks_error_monotone", ks_monotone));
    }
    if let Some(f) = &unscaled_fit {
        gates.push(Gate::within("s_linf_slope", f.s_linf.slope, Some(S_LINF_SLOPE.0), Some(S_LINF_SLOPE.1)));
        gates.push(Gate::within("eta_linf_slope", f.eta_linf.slope, Some(ETA_LINF_SLOPE.0), Some(ETA_LINF_SLOPE.1)));
    }
    for m in &members {
        gates.extend(conservation_gates(&format!("eps_{}_", m.eps_hat), &m.conservation, true));
    }
    Ok(SweepReport { members, residual_ratios, residual_fit, ks_monotone, unscaled_fit, envelope, gates })
}

// ---------------------------------------------------------------------------
// Kuramoto–Sivashinsky attractor scaling
// ---------------------------------------------------------------------------

/// Parameters of the attractor-size study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsAttractorConfig {
    pub ls: Vec<f64>,
    /// Grid points per unit length, rounded up to a power of two per `L`.
    pub points_per_length: f64,
    pub dt: f64,
    pub t_end: f64,
    pub sample_interval: f64,
    /// First seed; members use `seed, seed + 1, …`.
    pub seed: u64,
    /// Initial conditions per period. Small odd-symmetric periods have
    /// several coexisting steady attractors, so the tail mean is averaged
    /// over an ensemble.
    pub ensemble: usize,
    pub amplitude: f64,
}

impl Default for KsAttractorConfig {
    fn default() -> Self {
        KsAttractorConfig {
            ls: vec![25.0, 50.0, 100.0],
            points_per_length: 2.5,
            dt: 0.05,
            t_end: 500.0,
            sample_interval: 0.5,
            seed: 1,
            ensemble: 8,
            amplitude: 0.1,
        }
    }
}

/// One period of the attractor study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KsAttractorRow {
    pub l: f64,
    pub n: usize,
    /// Per-member statistics in seed order.
    pub members: Vec<AttractorSummary>,
    /// Ensemble mean of the members' tail means.
    pub tail_mean: f64,
    /// Largest member `|tail_trend|`.
    pub max_tail_trend: f64,
    pub sup_l2: f64,
    pub conservation: Conservation,
}

/// Attractor study outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KsAttractorReport {
    pub rows: Vec<KsAttractorRow>,
    /// Power law of the ensemble tail mean in `L`.
    pub fit: Option<LinearFit>,
    /// Empirical attractor constant `max_L sup_t ‖μ‖_{L²}/L^{8/5}`.
    pub k_estimate: f64,
    pub gates: Vec<Gate>,
}

/// Largest admissible relative drift of `‖μ‖` over the second half.
pub const TAIL_TREND_MAX: f64 = 0.25;
/// Accepted exponent range of the tail mean against `L`.
pub const ATTRACTOR_EXPONENT: (f64, f64) = (0.4, 1.7);

/// One odd Kuramoto–Sivashinsky run; returns its `(t, ‖μ‖_{L²})` statistics.
pub fn ks_attractor_run(cfg: &KsAttractorConfig, l: f64, seed: u64) -> Result<(usize, AttractorSummary, Conservation)> {
    let every = steps_for(cfg.sample_interval, cfg.dt, "sample_interval")?;
    let total = steps_for(cfg.t_end, cfg.dt, "t_end")?;
    let n = ((cfg.points_per_length * l).ceil() as usize).next_power_of_two().max(64);
    let g = Grid::new(l, n)?;
    let top = ((l / std::f64::consts::TAU).floor() as usize).max(1);
    let fs = FieldSpec::new(3.0, 2.0).amplitude(cfg.amplitude).parity(Parity::Odd).max_mode(top);
    let mu = structured_field(&g, &fs, &mut rng_from_seed(seed));
    let solver = KsSolver::new(&g, KsForm::Derivative, cfg.dt)?.symmetric(true);
    let mut st = KsState::derivative(mu);
    let mut traj = Vec::new();
    let mut cons = Conservation::default();
    for step in 0..=total {
        if step % every == 0 {
            traj.push((step as f64 * cfg.dt, norm_l2(&st.field)));
            cons = cons.max(conservation(&st.field, None));
        }
        if step < total {
            st = solver.step(&st)?;
        }
    }
    Ok((n, attractor_diagnostic(&traj), cons))
}

/// Odd Kuramoto–Sivashinsky ensembles at every `L`.
pub fn ks_attractor_experiment(cfg: &KsAttractorConfig, exec: Execution) -> Result<KsAttractorReport> {
    let m = cfg.ensemble.max(1);
    let jobs: Vec<(f64, u64)> = cfg.ls.iter().flat_map(|&l| (0..m as u64).map(move |i| (l, cfg.seed + i))).collect();
    let out = exec.map_slice(&jobs, |&(l, seed)| ks_attractor_run(cfg, l, seed));
    let out = out.into_iter().collect::<Result<Vec<_>>>()?;
    let rows: Vec<KsAttractorRow> = cfg
        .ls
        .iter()
        .zip(out.chunks(m))
        .map(|(&l, chunk)| {
            let members: Vec<AttractorSummary> = chunk.iter().map(|c| c.1).collect();
            KsAttractorRow {
                l,
                n: chunk[0].0,
                tail_mean: members.iter().map(|s| s.tail_mean).sum::<f64>() / m as f64,
                max_tail_trend: members.iter().map(|s| s.tail_trend.abs()).fold(0.0, f64::max),
                sup_l2: members.iter().map(|s| s.sup_l2).fold(0.0, f64::max),
                conservation: chunk.iter().fold(Conservation::default(), |a, c| a.max(c.2)),
                members,
            }
        })
        .collect();
    let fit = if rows.len() >= 2 {
        Some(power_law_fit(&rows.iter().map(|r| r.l).collect::<Vec<_>>(), &rows.iter().map(|r| r.tail_mean).collect::<Vec<_>>())?)
    } else {
        None
    };
    let mut gates = Vec::new();
    for r in &rows {
        gates.push(Gate::at_most(&format!("L_{}_tail_trend", r.l), r.max_tail_trend, TAIL_TREND_MAX));
        gates.extend(conservation_gates(&format!("L_{}_", r.l), &r.conservation, false));
    }
    if let Some(f) = &fit {
        gates.push(Gate::within("attractor_exponent", f.slope, Some(ATTRACTOR_EXPONENT.0), Some(ATTRACTOR_EXPONENT.1)));
    }
    let k_estimate = rows.iter().map(|r| r.sup_l2 / r.l.powf(1.6)).fold(0.0, f64::max);
    Ok(KsAttractorReport { rows, fit, k_estimate, gates })
}

// ---------------------------------------------------------------------------
// Formulation equivalence
// ---------------------------------------------------------------------------

/// Parameters of the direct-versus-coupled comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormulationConfig {
    pub alpha: f64,
    pub eps_hat: f64,
    pub l: f64,
    pub n: usize,
    /// Step of the direct integration in original time units.
    pub dt_cgl: f64,
    /// Step of the coupled integration in scaled time units.
    pub dt_hat: f64,
    pub t_end: f64,
    pub samples: usize,
    /// Transient of the `r₂` comparison in multiples of `ε̂⁴/χ`.
    pub r2_transient_factor: f64,
    pub init: InitialSpec,
    pub sigma: f64,
    pub delta: f64,
    pub constants: TheoremConstants,
}

impl Default for FormulationConfig {
    fn default() -> Self {
        FormulationConfig {
            alpha: 0.1,
            eps_hat: 0.05,
            l: PRIMARY_L,
            n: 256,
            dt_cgl: 20.0,
            dt_hat: 1e-3,
            t_end: 1.0,
            samples: 8,
            r2_transient_factor: 10.0,
            init: InitialSpec::default(),
            sigma: 6.0,
            delta: 2.0,
            constants: TheoremConstants::default(),
        }
    }
}

/// Outcome of the formulation comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FormulationReport {
    pub membership: MembershipReport,
    pub times: Vec<f64>,
    pub rel_mu: Vec<f64>,
    pub rel_s: Vec<f64>,
    pub max_rel_mu: f64,
    pub max_rel_s: f64,
    pub r2_transient: f64,
    /// Largest `‖r₂,evolved − r₂,algebraic‖/‖r₂,algebraic‖` after the
    /// transient.
    pub r2_rel_max: f64,
    pub conservation: Conservation,
    pub gates: Vec<Gate>,
}

/// Accepted relative disagreement between direct and coupled integration.
pub const FORMULATION_TOLERANCE: f64 = 1e-3;
/// Accepted relative disagreement of the two `r₂` values.
pub const R2_TOLERANCE: f64 = 1e-4;

fn relative(a: &SpectralField, b: &SpectralField) -> f64 {
    let d = b.norm_l2_coeffs();
    let e = (a - b).norm_l2_coeffs();
    if d > 0.0 {
        e / d
    } else {
        e
    }
}

/// Integrate the same initial data directly and through the coupled system,
/// and check the evolved `r₂` against the algebraic one.
pub fn formulation_experiment(cfg: &FormulationConfig) -> Result<FormulationReport> {
    let grid = Grid::new(cfg.l, cfg.n)?;
    let params = CglParams::from_eps_hat(cfg.alpha, cfg.eps_hat, cfg.l / cfg.eps_hat, 0.0)?;
    let sym = params.symbol_params()?;
    let eta0 = initial_phase(&grid, &cfg.init);
    let init = build_initial_data(&eta0, &params, InitialAmplitude::Slaved)?;
    let class = ClassCParams {
        k: cfg.constants.k,
        l: cfg.l,
        alpha: cfg.alpha,
        eps_hat: cfg.eps_hat,
        eps_hat0: cfg.constants.eps_hat0,
        c_s0: cfg.constants.c_s,
        c_eta0: cfg.constants.c_eta,
        sigma: cfg.sigma,
        delta: cfg.delta,
    };
    let membership = check_class_c(&init.eta0_hat, &init.s0_hat, &class)?;

    let coupled = CoupledSolver::new(&grid, sym, Formulation::AmplitudePhase, cfg.dt_hat)?.with_r2_evolution(true)?;
    let direct = CglSolver::new(init.state.grid(), params, Frame::CoMoving, cfg.dt_cgl)?;
    let mut c = CoupledState::new(init.s0_hat.clone(), init.eta0_hat.derivative(1))?;
    c.r2 = Some(coupled.nonlinear_maps().r2_from_state(&StateSM { s: c.s.clone(), mu: c.mu.clone() })?);
    let mut u: CglState = init.state.clone();
    let r2_transient = cfg.r2_transient_factor * cfg.eps_hat.powi(4) / sym.chi();

    let (mut times, mut rel_mu, mut rel_s) = (Vec::new(), Vec::new(), Vec::new());
    let mut r2_rel_max: f64 = 0.0;
    let mut cons = conservation(&c.mu, Some(&c.s));
    let mut anchor = None;
    for j in 1..=cfg.samples.max(1) {
        let th = cfg.t_end * j as f64 / cfg.samples.max(1) as f64;
        while c.t < th - 0.5 * cfg.dt_hat {
            c = coupled.step(&c)?;
            if c.t >= r2_transient {
                let alg = coupled.nonlinear_maps().r2_from_state(&StateSM { s: c.s.clone(), mu: c.mu.clone() })?;
                let ev = c.r2.as_ref().expect("r2 evolution enabled");
                r2_rel_max = r2_rel_max.max(relative(ev, &alg));
            }
        }
        cons = cons.max(conservation(&c.mu, Some(&c.s)));
        u = direct.advance(&u, params.t_of_hat(th)?)?;
        let pa = extract_phase_amplitude(&u, &params, ExtractOptions { pin: false, previous_origin_phase: anchor })?;
        anchor = Some(params.alpha * pa.eta.value_at_origin().re);
        let sc = to_scaled(&pa, cfg.eps_hat, sym.chi())?;
        let mu = SpectralField::from_coeffs(grid.clone(), sc.mu.coeffs().to_vec(), Parity::None);
        let s = SpectralField::from_coeffs(grid.clone(), sc.s.coeffs().to_vec(), Parity::None);
        times.push(th);
        rel_mu.push(relative(&mu, &c.mu));
        rel_s.push(relative(&s, &c.s));
    }
    let max_rel_mu = rel_mu.iter().fold(0.0f64, |m, x| m.max(*x));
    let max_rel_s = rel_s.iter().fold(0.0f64, |m, x| m.max(*x));
    let mut gates = vec![
        Gate::flag("class_c_member", membership.member),
        Gate::at_most("direct_vs_coupled_mu", max_rel_mu, FORMULATION_TOLERANCE),
        Gate::at_most("direct_vs_coupled_s", max_rel_s, FORMULATION_TOLERANCE),
        Gate::at_most("r2_evolved_vs_algebraic", r2_rel_max, R2_TOLERANCE),
    ];
    gates.extend(conservation_gates("coupled_", &cons, true));
    Ok(FormulationReport {
        membership,
        times,
        rel_mu,
        rel_s,
        max_rel_mu,
        max_rel_s,
        r2_transient,
        r2_rel_max,
        conservation: cons,
        gates,
    })
}

// ---------------------------------------------------------------------------
// Dispersion
// ---------------------------------------------------------------------------

/// Parameters of the linear growth-rate study, in original variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionConfig {
    /// Unscaled `ε`.
    pub eps: f64,
    pub alpha: f64,
    /// Wavenumbers as multiples of `k_c`.
    pub k_factors: Vec<f64>,
    pub amplitude: f64,
    /// Grid points of the direct integration.
    pub n: usize,
    /// Direct step in units of `1/(1+k²)`.
    pub dt_factor: f64,
    /// Time before fitting, in units of `1/(1+k²)`.
    pub settle: f64,
    /// Fit duration in units of `1/|λ(k)|`, capped by `max_fit_time`.
    pub fit_span: f64,
    pub max_fit_time: f64,
    pub samples: usize,
    pub tolerance: f64,
    pub min_r2: f64,
}

impl Default for DispersionConfig {
    fn default() -> Self {
        DispersionConfig {
            eps: 0.1,
            alpha: 0.1,
            k_factors: vec![0.25, 0.5, 0.75, 1.25, 1.5, 2.0],
            amplitude: 1e-6,
            n: 16,
            dt_factor: 0.5,
            settle: 20.0,
            fit_span: 2.0,
            max_fit_time: 1e5,
            samples: 40,
            tolerance: 0.01,
            min_r2: 0.999,
        }
    }
}

/// One row of the dispersion table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionRow {
    pub k: f64,
    pub k_over_kc: f64,
    /// Printed slaved relation `λ(k)`.
    pub lambda: f64,
    /// Slow eigenvalue of the linearised equation.
    pub exact: f64,
    pub direct: f64,
    pub direct_r2: f64,
    pub coupled: f64,
    pub coupled_r2: f64,
    pub direct_vs_lambda: f64,
    pub direct_vs_exact: f64,
    pub coupled_vs_direct: f64,
}

/// Dispersion table with gates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DispersionReport {
    pub k_c: f64,
    pub rows: Vec<DispersionRow>,
    /// Rate measured for a uniform phase shift.
    pub zero_mode_rate: f64,
    pub gates: Vec<Gate>,
}

fn rel_gap(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        ((a - b) / b).abs()
    }
}

/// Slope of `ln ‖mode‖` against time with its fit quality.
fn growth_fit(times: &[f64], norms: &[f64], context: &str, min_r2: f64) -> Result<(f64, f64)> {
    let f = linear_fit(times, &norms.iter().map(|v| v.ln()).collect::<Vec<_>>())?;
    if f.r2 < min_r2 {
        return Err(Error::FitQuality { context: context.to_string(), r2: f.r2 });
    }
    Ok((f.slope, f.r2))
}

fn slow_eigenvector(m: &crate::etd::Mat2) -> (Complex64, Complex64, Complex64) {
    let (l1, l2) = m.eigenvalues();
    let lam = if l1.re >= l2.re { l1 } else { l2 };
    let (x, y) = if m.b.norm() > 0.0 { (m.b, lam - m.a) } else { (lam - m.d, m.c) };
    let s = (x.norm_sqr() + y.norm_sqr()).sqrt();
    (lam, x / s, y / s)
}

/// Measure linear growth rates by direct integration of the equation and of
/// the coupled system, one wavenumber at a time.
pub fn dispersion_experiment(cfg: &DispersionConfig, exec: Execution) -> Result<DispersionReport> {
    let k_c = critical_wavenumber(cfg.eps, cfg.alpha);
    let chi = 4.0 / (1.0 + cfg.alpha * cfg.alpha);
    let eps_hat = cfg.eps * (chi / 2.0).sqrt();
    let beta = -(1.0 + cfg.eps * cfg.eps) / cfg.alpha;
    let rows = exec.map_slice(&cfg.k_factors, |&fac| -> Result<DispersionRow> {
        let k = fac * k_c;
        let lambda = dispersion_lambda(k, cfg.eps, cfg.alpha);
        let exact = cgl_linear_rate(k, cfg.eps, cfg.alpha);
        let unit = 1.0 / (1.0 + k * k);
        let fit_time = (cfg.fit_span / lambda.abs().max(1e-300)).min(cfg.max_fit_time);

        // Direct integration on one period 2π/k.
        let params = CglParams::with_beta(cfg.alpha, beta, std::f64::consts::TAU / k, 0.0);
        let g = Grid::new(params.l0, cfg.n)?;
        let blk = crate::etd::Mat2::new(
            Complex64::new(-(k * k + 2.0), 0.0),
            Complex64::new(cfg.alpha * k * k, 0.0),
            Complex64::new(-(cfg.alpha * k * k + 2.0 * beta), 0.0),
            Complex64::new(-k * k, 0.0),
        );
        let (_, va, vb) = slow_eigenvector(&blk);
        let a = SpectralField::from_fn(&g, |x| cfg.amplitude * va.re * (k * x).cos());
        let b = SpectralField::from_fn(&g, |x| cfg.amplitude * vb.re * (k * x).cos());
        let dt = cfg.dt_factor * unit;
        let solver = CglSolver::new(&g, params, Frame::CoMoving, dt)?;
        let mut st = CglState { a, b, t: 0.0, frame: Frame::CoMoving };
        st = solver.advance(&st, cfg.settle * unit)?;
        let t0 = st.t;
        let (mut ts, mut ns) = (Vec::new(), Vec::new());
        for j in 0..=cfg.samples {
            st = solver.advance(&st, t0 + fit_time * j as f64 / cfg.samples as f64)?;
            ts.push(st.t);
            ns.push(st.a.coeff(1).norm().hypot(st.b.coeff(1).norm()));
        }
        let (direct, direct_r2) = growth_fit(&ts, &ns, &format!("direct growth at k = {k:.4}"), cfg.min_r2)?;

        // Coupled system on the scaled period ε̂·2π/k.
        let sg = Grid::new(eps_hat * params.l0, cfg.n)?;
        let sym = SymbolParams::new(eps_hat, cfg.alpha)?;
        let kh = sg.q();
        let lam_hat = exact * chi / (2.0 * eps_hat.powi(4));
        let unit_hat = unit * 2.0 / chi * eps_hat.powi(4);
        let ap = crate::etd::Mat2::new(
            Complex64::new(-chi / eps_hat.powi(4) * sym.ls(kh), 0.0),
            Complex64::new(0.0, -chi / (8.0 * eps_hat.powi(4)) * kh),
            Complex64::new(0.0, chi / (eps_hat * eps_hat) * sym.lmur(kh) * sym.ls(kh) * kh),
            Complex64::new(-sym.lmu(kh) - chi / (8.0 * eps_hat * eps_hat) * sym.lmur(kh) * kh * kh, 0.0),
        );
        let (_, vs, vm) = slow_eigenvector(&ap);
        // s = Re(v_s e^{ikx}) and μ = Re(v_μ e^{ikx}) up to scale.
        let amp_hat = cfg.amplitude;
        let s0 = SpectralField::from_modes(&sg, &[(1, vs * (0.5 * amp_hat)), (-1, (vs * (0.5 * amp_hat)).conj())])?;
        let m0 = SpectralField::from_modes(&sg, &[(1, vm * (0.5 * amp_hat)), (-1, (vm * (0.5 * amp_hat)).conj())])?;
        let dt_hat = cfg.dt_factor * unit_hat;
        let cs = CoupledSolver::new(&sg, sym, Formulation::AmplitudePhase, dt_hat)?;
        let mut c = CoupledState::new(s0, m0)?;
        c = cs.advance(&c, cfg.settle * unit_hat)?;
        let t0 = c.t;
        let fit_hat = (cfg.fit_span / lam_hat.abs().max(1e-300)).min(cfg.max_fit_time * 2.0 / chi * eps_hat.powi(4));
        let (mut ts, mut ns) = (Vec::new(), Vec::new());
        for j in 0..=cfg.samples {
            c = cs.advance(&c, t0 + fit_hat * j as f64 / cfg.samples as f64)?;
            ts.push(c.t * chi / (2.0 * eps_hat.powi(4)));
            ns.push(c.s.coeff(1).norm().hypot(c.mu.coeff(1).norm()));
        }
        let (coupled, coupled_r2) = growth_fit(&ts, &ns, &format!("coupled growth at k = {k:.4}"), cfg.min_r2)?;
        Ok(DispersionRow {
            k,
            k_over_kc: fac,
            lambda,
            exact,
            direct,
            direct_r2,
            coupled,
            coupled_r2,
            direct_vs_lambda: rel_gap(direct, lambda),
            direct_vs_exact: rel_gap(direct, exact),
            coupled_vs_direct: rel_gap(coupled, direct),
        })
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;

    // Uniform phase rotation on the first period.
    let zero_mode_rate = {
        let l0 = std::f64::consts::TAU / (cfg.k_factors.first().copied().unwrap_or(1.0) * k_c);
        let params = CglParams::with_beta(cfg.alpha, beta, l0, 0.0);
        let g = Grid::new(l0, cfg.n)?;
        let th: f64 = cfg.amplitude;
        let a = SpectralField::from_fn(&g, |_| th.cos() - 1.0);
        let b = SpectralField::from_fn(&g, |_| th.sin());
        let solver = CglSolver::new(&g, params, Frame::CoMoving, cfg.dt_factor)?;
        let st0 = CglState { a, b, t: 0.0, frame: Frame::CoMoving };
        let st = solver.advance(&st0, 100.0)?;
        let n0 = st0.a.coeff(0).norm().hypot(st0.b.coeff(0).norm());
        let n1 = st.a.coeff(0).norm().hypot(st.b.coeff(0).norm());
        (n1 / n0).ln() / st.t
    };

    let mut gates = Vec::new();
    for r in &rows {
        let tag = format!("k_{:.2}kc", r.k_over_kc);
        gates.push(Gate::at_most(&format!("{tag}_direct_vs_lambda"), r.direct_vs_lambda, cfg.tolerance));
        gates.push(Gate::at_most(&format!("{tag}_direct_vs_exact"), r.direct_vs_exact, cfg.tolerance));
        gates.push(Gate::at_most(&format!("{tag}_coupled_vs_direct"), r.coupled_vs_direct, cfg.tolerance));
    }
    gates.push(Gate::at_most("k_0_rate", zero_mode_rate.abs(), 1e-9));
    Ok(DispersionReport { k_c, rows, zero_mode_rate, gates })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_fit_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 1.0).collect();
        let f = linear_fit(&xs, &ys).unwrap();
        assert!((f.slope - 2.5).abs() < 1e-14 && (f.intercept + 1.0).abs() < 1e-14);
        assert!((f.r2 - 1.0).abs() < 1e-14);
        let p = power_law_fit(&[1.0, 2.0, 4.0], &[3.0, 12.0, 48.0]).unwrap();
        assert!((p.slope - 2.0).abs() < 1e-12);
        assert!(linear_fit(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn gates() {
        assert!(Gate::within("a", 1.0, Some(0.5), Some(2.0)).pass);
        assert!(!Gate::at_most("b", 3.0, 2.0).pass);
        assert!(!Gate::at_least("c", f64::NAN, 0.0).pass);
        assert!(!Gate::flag("d", false).pass);
    }

    #[test]
    fn antiderivative_inverts_derivative() {
        let g = Grid::new(40.0, 64).unwrap();
        let eta = initial_phase(&g, &InitialSpec::default());
        assert_eq!(eta.parity(), Parity::Even);
        assert_eq!(eta.derivative(1).parity(), Parity::Odd);
        assert!(eta.value_at_origin().re.abs() < 1e-14);
        let back = phase_from_derivative(&eta.derivative(1)).unwrap();
        assert!((&back - &eta).norm_l2_coeffs() < 1e-13 * eta.norm_l2_coeffs());
    }

    #[test]
    fn window_length_defaults_to_one_at_primary_period() {
        let c = RunConfig::default();
        assert!((c.window_length() - 1.0).abs() < 1e-12);
        let wide = RunConfig { l: 80.0, ..RunConfig::default() };
        assert!((wide.window_length() - 2f64.powf(-6.4)).abs() < 1e-12);
    }

    fn small(eps_hat: f64) -> RunConfig {
        RunConfig { eps_hat, n: 64, dt: 0.02, t_end: 4.0, transient: 1.0, diagnostic_interval: 0.1, ..RunConfig::default() }
    }

    #[test]
    fn eps_zero_reduces_to_ks() {
        let run = run_coupled(&small(0.0)).unwrap();
        let sup = run.series.ks_error.iter().fold(0.0f64, |m, x| m.max(*x));
        assert!(sup < 1e-8, "ks error {sup}");
        assert!(run.series.slaving_residual.iter().all(|r| *r < 1e-12));
    }

    #[test]
    fn restart_protocol_zeroes_error_at_window_starts() {
        let run = run_coupled(&small(0.1)).unwrap();
        assert_eq!(run.windows.len(), 4);
        for w in &run.windows {
            let i = run.series.t.iter().position(|t| (t - w.t_start).abs() < 1e-9).unwrap();
            assert_eq!(run.series.ks_error[i], 0.0);
        }
        assert!(run.series.ks_error.iter().any(|e| *e > 0.0));
        run.series.validate().unwrap();
        assert_eq!(run.snapshots.len(), 5);
    }

    #[test]
    fn runs_are_deterministic() {
        let a = run_coupled(&small(0.1)).unwrap();
        let b = run_coupled(&small(0.1)).unwrap();
        assert_eq!(a.series, b.series);
    }

    #[test]
    fn approximation_bound_monitor_zero_and_bounded() {
        let z = DiagnosticSeries {
            t: vec![0.0, 1.0],
            norm_mu_prime: vec![0.0; 2],
            norm_s: vec![0.0; 2],
            slaving_residual: vec![0.0; 2],
            ks_error: vec![0.0; 2],
            ks_error_rel: vec![0.0; 2],
            norm_mu_sigma: vec![0.0; 2],
            norm_s_sigma_m1: vec![0.0; 2],
        };
        let r = approximation_bound_monitor(&z, 40.0, 0.05, &TheoremConstants::default());
        assert_eq!((r.sup_mu_ratio, r.sup_s_ratio, r.sup_residual_ratio), (0.0, 0.0, 0.0));
        let run = run_coupled(&small(0.1)).unwrap();
        let r = approximation_bound_monitor(&run.series, 40.0, 0.1, &TheoremConstants::default());
        assert!(r.sup_mu_ratio.is_finite() && r.sup_mu_ratio > 0.0);
        assert!(r.sup_s_ratio.is_finite() && r.sup_residual_ratio.is_finite());
    }

    #[test]
    fn residual_envelope_is_tight() {
        let env = fit_residual_envelope(&[(0.1, 1e-4), (0.05, 1e-5)], 1.0, 100.0);
        assert!(env.pass);
        assert!(env.ratios.iter().any(|r| (r - 1.0).abs() < 1e-12));
    }

    #[test]
    fn unscaled_norm_scalings_match_from_scaled() {
        let g = Grid::new(40.0, 64).unwrap();
        let zero = PhaseAmplitudeState {
            s: SpectralField::zeros(&g),
            eta: SpectralField::zeros(&g),
            mu: SpectralField::zeros(&g),
            t: 0.0,
            scaled: true,
        };
        let r = unscaled_norm_monitor(&[zero], 0.05, 0.1).unwrap();
        assert_eq!(r.eta_l2 + r.s_l2 + r.eta_linf + r.s_linf + r.eta_prime_l2, 0.0);

        let eta = initial_phase(&g, &InitialSpec::default());
        let mu = eta.derivative(1);
        let s = slaved_amplitude(&eta, &SymbolParams::new(0.05, 0.1).unwrap());
        let snap = PhaseAmplitudeState { s: s.clone(), eta: eta.clone(), mu: mu.clone(), t: 0.0, scaled: true };
        for e in [0.1, 0.05] {
            let r = unscaled_norm_monitor(std::slice::from_ref(&snap), e, 0.1).unwrap();
            // Hand scalings: η = (ε̂²/4)η̂ and s = ε̂⁴ŝ pointwise; x = x̂/ε̂.
            assert!((r.eta_linf - e * e / 4.0 * norm_linf(&eta)).abs() < 1e-12 * r.eta_linf);
            assert!((r.s_linf - e.powi(4) * norm_linf(&s)).abs() < 1e-12 * r.s_linf);
            assert!((r.s_l2 - e.powi(4) * e.powf(-0.5) * norm_l2(&s)).abs() < 1e-10 * r.s_l2);
            assert!((r.eta_prime_l2 - e.powi(3) / 4.0 * e.powf(-0.5) * norm_l2(&mu)).abs() < 1e-10 * r.eta_prime_l2);
        }
    }

    #[test]
    fn ks_attractor_small_ensemble() {
        let cfg = KsAttractorConfig { ls: vec![20.0, 40.0], t_end: 20.0, ensemble: 2, ..KsAttractorConfig::default() };
        let a = ks_attractor_experiment(&cfg, Execution::Sequential).unwrap();
        let b = ks_attractor_experiment(&cfg, Execution::Parallel).unwrap();
        assert_eq!(a.rows.len(), 2);
        assert_eq!(a.rows[0].members.len(), 2);
        assert_eq!(a.fit.unwrap().slope, b.fit.unwrap().slope);
        assert!(a.rows.iter().all(|r| r.tail_mean > 0.0 && r.conservation.mean_mu == 0.0));
    }

    #[test]
    fn unscaled_norm_exponent_table() {
        let e = unscaled_norm_exponents(4.0);
        assert_eq!(e, [2.25, 2.75, 2.0 - 13.0 / 32.0, 3.0]);
    }

    #[test]
    fn dt_refinement_small_run() {
        let r = dt_refinement_check(&small(0.1), 0.4, 1e-6).unwrap();
        assert!(r.pass, "{r:?}");
    }
}
