//! Implementation of the subcommands.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use phaseturb::cgl::{
    build_initial_data, extract_phase_amplitude, to_scaled, CglParams, CglSolver, ExtractOptions, Frame, InitialAmplitude,
};
use phaseturb::coercive::{coercivity_check, eps_bounds, gamma_hs_norm, phi_sizes, CoercivityReport, HsReport, PhiSizes};
use phaseturb::config::{parse_config_str, SimConfig};
use phaseturb::experiments::{
    unscaled_norm_monitor, conservation_gates, initial_phase, phase_from_derivative, run_coupled, run_sweep, steps_for,
    approximation_bound_monitor, UnscaledNormRow, Gate, SweepReport, ApproximationBoundReport, WindowSummary,
};
use phaseturb::io::{
    diagnostics_csv, diagnostics_dat, read_field, write_json, write_manifest, write_snapshots, write_table, Manifest,
    SnapshotWriter, DIAGNOSTICS, REPORT,
};
use phaseturb::nonlinear::Nonlinear;
use phaseturb::norms::{self, norm_l2, norm_report, norm_sigma, slaved_amplitude, NormParams};
use phaseturb::phase::{attractor_diagnostic, conservation, AttractorSummary, Conservation, KsForm, KsSolver, KsState};
use phaseturb::symbols::{evaluate_symbol_bounds, SymbolParams};
use phaseturb::{Error, Execution, Grid, Parity, SpectralField};

/// Why a subcommand did not succeed.
#[derive(Debug)]
pub enum Failure {
    /// Named verification gates failed.
    Gates(Vec<String>),
    /// The computation left the regime the checks are defined for.
    Numerical(Error),
    /// Bad arguments, configuration or input files.
    Usage(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Gates(_) | Failure::Numerical(_) => 1,
            Failure::Usage(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Gates(names) => write!(f, "gate failed: {}", names.join(", ")),
            Failure::Numerical(e) => write!(f, "error: {e}"),
            Failure::Usage(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        match e {
            Error::BlowUp { .. }
            | Error::Denominator(_)
            | Error::PhaseSlip(_)
            | Error::BoundViolation { .. }
            | Error::Coercivity(_)
            | Error::FitQuality { .. }
            | Error::Truncation(_) => Failure::Numerical(e),
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure::Usage(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Failure {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

/// Exit status from a list of gates.
fn gate_outcome(gates: &[Gate]) -> Outcome {
    let failed: Vec<String> = gates.iter().filter(|g| !g.pass).map(|g| g.name.clone()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Gates(failed))
    }
}

fn print_json<T: Serialize>(value: &T) -> Outcome {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

/// Read a configuration file or the manifest of an earlier run.
pub fn load_config(path: &Path) -> Result<SimConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let cfg = if text.trim_start().starts_with('{') {
        let m: Manifest = serde_json::from_str(&text)?;
        m.resolved_config()?
    } else {
        parse_config_str(&text)?
    };
    for w in &cfg.warnings {
        eprintln!("warning: {w}");
    }
    Ok(cfg)
}

fn load_run_config(path: &Path, out: Option<PathBuf>, snapshot_every: Option<f64>) -> Result<SimConfig, Failure> {
    let mut cfg = load_config(path)?;
    if let Some(dir) = out {
        cfg.output_dir = dir;
    }
    if let Some(dt) = snapshot_every {
        if !(dt > 0.0) {
            return Err(Failure::Usage(format!("--snapshot-every = {dt} must be positive")));
        }
        cfg.snapshot_interval = dt;
    }
    Ok(cfg)
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(*x))
}

// ---------------------------------------------------------------------------
// simulate-coupled
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct CoupledReport<'a> {
    command: &'static str,
    eps_hat: f64,
    l: f64,
    rows: usize,
    mean_residual: f64,
    window: f64,
    ks_window_sup: f64,
    ks_window_mean: f64,
    windows: &'a [WindowSummary],
    ordering_violations: usize,
    ordering_rows: usize,
    conservation: Conservation,
    approximation_bound: ApproximationBoundReport,
    unscaled_norms: Option<UnscaledNormRow>,
    gates: Vec<Gate>,
}

pub fn simulate_coupled(config: &Path, out: Option<PathBuf>, snapshot_every: Option<f64>, gnuplot: bool) -> Outcome {
    let cfg = load_run_config(config, out, snapshot_every)?;
    let dir = cfg.output_dir.clone();
    let rc = cfg.run_config();
    let run = run_coupled(&rc)?;
    write_manifest(&dir, &Manifest::new("simulate-coupled", &cfg))?;
    fs::write(dir.join(DIAGNOSTICS), diagnostics_csv(&run.series, cfg.eps_hat, cfg.l))?;
    if gnuplot || cfg.gnuplot {
        fs::write(dir.join("diagnostics.dat"), diagnostics_dat(&run.series, cfg.eps_hat, cfg.l))?;
    }
    write_snapshots(&dir, &run.snapshots)?;
    let gates = conservation_gates("", &run.conservation, true);
    let report = CoupledReport {
        command: "simulate-coupled",
        eps_hat: cfg.eps_hat,
        l: cfg.l,
        rows: run.series.len(),
        mean_residual: run.mean_residual(),
        window: run.window,
        ks_window_sup: run.ks_window_sup(),
        ks_window_mean: run.ks_window_mean(),
        windows: &run.windows,
        ordering_violations: run.ordering_violations,
        ordering_rows: run.ordering_rows,
        conservation: run.conservation,
        approximation_bound: approximation_bound_monitor(&run.series, cfg.l, cfg.eps_hat, &cfg.constants),
        unscaled_norms: unscaled_norm_monitor(&run.snapshots, cfg.eps_hat, cfg.alpha).ok(),
        gates,
    };
    write_json(&dir.join(REPORT), &report)?;
    println!(
        "simulate-coupled: {} rows, mean slaving residual {:.3e}, KS window sup {:.3e}, output in {}",
        report.rows,
        report.mean_residual,
        report.ks_window_sup,
        dir.display()
    );
    gate_outcome(&report.gates)
}

// ---------------------------------------------------------------------------
// simulate-ks
// ---------------------------------------------------------------------------

const KS_NOTES: &[(&str, &str)] = &[
    ("t", "scaled time"),
    ("norm_mu_L2", "L2 norm of mu"),
    ("norm_mu_sigma", "weighted sigma-norm of mu"),
    ("mean_mu", "modulus of the mean of mu"),
    ("trilinear", "relative |integral of mu^2 mu'|"),
    ("parity_mu", "relative odd-parity defect of mu"),
];

#[derive(Debug, Serialize)]
struct KsReport {
    command: &'static str,
    l: f64,
    n: usize,
    rows: usize,
    attractor: AttractorSummary,
    conservation: Conservation,
    gates: Vec<Gate>,
}

pub fn simulate_ks(config: &Path, out: Option<PathBuf>, snapshot_every: Option<f64>, gnuplot: bool) -> Outcome {
    let cfg = load_run_config(config, out, snapshot_every)?;
    let dir = cfg.output_dir.clone();
    let grid = Grid::new(cfg.l, cfg.n)?;
    let np = NormParams::new(cfg.sigma, cfg.delta)?;
    let total = steps_for(cfg.t_end_hat, cfg.dt, "t_end_hat")?;
    let every = steps_for(cfg.diagnostic_interval, cfg.dt, "diagnostic_interval")?;
    let snap_every = steps_for(cfg.snapshot_interval, cfg.dt, "snapshot_interval")?;
    let solver = KsSolver::new(&grid, KsForm::Derivative, cfg.dt)?.symmetric(cfg.symmetric);
    let mut st = KsState::derivative(initial_phase(&grid, &cfg.init).derivative(1));

    write_manifest(&dir, &Manifest::new("simulate-ks", &cfg))?;
    let mut snaps = SnapshotWriter::new(&dir, cfg.l, cfg.n, true)?;
    let mut cols: [Vec<f64>; 6] = Default::default();
    let mut cons = Conservation::default();
    for step in 0..=total {
        let t = step as f64 * cfg.dt;
        if step % every == 0 {
            let c = conservation(&st.field, None);
            cons = cons.max(c);
            for (col, v) in cols.iter_mut().zip([t, norm_l2(&st.field), norm_sigma(&st.field, &np), c.mean_mu, c.trilinear, c.parity_mu]) {
                col.push(v);
            }
        }
        if step % snap_every == 0 {
            let eta = phase_from_derivative(&st.field)?;
            snaps.push(t, &[("eta", &eta), ("mu", &st.field)])?;
        }
        if step < total {
            st = solver.step(&st)?;
        }
    }
    snaps.finish()?;
    let named: Vec<(&str, &[f64])> = KS_NOTES.iter().map(|n| n.0).zip(cols.iter().map(|c| c.as_slice())).collect();
    let title = format!("Kuramoto-Sivashinsky run, L = {:?}, N = {}", cfg.l, cfg.n);
    fs::write(dir.join(DIAGNOSTICS), write_table(&title, KS_NOTES, &named, ",", true))?;
    if gnuplot || cfg.gnuplot {
        fs::write(dir.join("diagnostics.dat"), write_table(&title, KS_NOTES, &named, " ", false))?;
    }
    let trajectory: Vec<(f64, f64)> = cols[0].iter().copied().zip(cols[1].iter().copied()).collect();
    let report = KsReport {
        command: "simulate-ks",
        l: cfg.l,
        n: cfg.n,
        rows: cols[0].len(),
        attractor: attractor_diagnostic(&trajectory),
        conservation: cons,
        gates: conservation_gates("", &cons, false),
    };
    write_json(&dir.join(REPORT), &report)?;
    println!(
        "simulate-ks: {} rows, tail mean |mu| {:.4}, output in {}",
        report.rows,
        report.attractor.tail_mean,
        dir.display()
    );
    gate_outcome(&report.gates)
}

// ---------------------------------------------------------------------------
// simulate-cgl
// ---------------------------------------------------------------------------

const CGL_NOTES: &[(&str, &str)] = &[
    ("t", "scaled time"),
    ("t_original", "time of the Ginzburg-Landau equation"),
    ("norm_mu_L2", "L2 norm of the scaled phase derivative"),
    ("norm_s_L2", "L2 norm of the scaled amplitude"),
    ("slaving_residual_L2", "L2 norm of s + (1/8)G eta'' + (eps_hat^2/32)G (eta')^2"),
    ("mean_mu", "modulus of the mean of mu"),
    ("parity_mu", "relative odd-parity defect of mu"),
    ("parity_s", "relative even-parity defect of s"),
];

#[derive(Debug, Serialize)]
struct CglReport {
    command: &'static str,
    eps_hat: f64,
    l: f64,
    l0: f64,
    beta: f64,
    dt_cgl: f64,
    snapshots: usize,
    max_slaving_residual: f64,
    conservation: Conservation,
}

pub fn simulate_cgl(config: &Path, out: Option<PathBuf>, snapshot_every: Option<f64>, gnuplot: bool) -> Outcome {
    let cfg = load_run_config(config, out, snapshot_every)?;
    let dir = cfg.output_dir.clone();
    let l0 = cfg.l0.ok_or_else(|| Failure::Usage("simulate-cgl needs eps_hat > 0".into()))?;
    let params = CglParams::from_eps_hat(cfg.alpha, cfg.eps_hat, l0, cfg.phi0)?;
    let sym = params.symbol_params()?;
    let grid = Grid::new(cfg.l, cfg.n)?;
    let nl = Nonlinear::new(&grid, sym);
    let init = build_initial_data(&initial_phase(&grid, &cfg.init), &params, InitialAmplitude::Slaved)?;
    let solver = CglSolver::new(init.state.grid(), params, Frame::CoMoving, cfg.dt_cgl)?.symmetric(cfg.symmetric);
    let count = steps_for(cfg.t_end_hat, cfg.snapshot_interval, "t_end_hat over snapshot_interval")?;

    write_manifest(&dir, &Manifest::new("simulate-cgl", &cfg))?;
    let mut snaps = SnapshotWriter::new(&dir, cfg.l, cfg.n, true)?;
    let mut cols: [Vec<f64>; 8] = Default::default();
    let mut cons = Conservation::default();
    let mut u = init.state;
    let mut anchor = None;
    for j in 0..=count {
        let th = j as f64 * cfg.snapshot_interval;
        let t = params.t_of_hat(th)?;
        u = solver.advance(&u, t)?;
        let pa = extract_phase_amplitude(&u, &params, ExtractOptions { pin: false, previous_origin_phase: anchor })?;
        anchor = Some(params.alpha * pa.eta.value_at_origin().re);
        let sc = to_scaled(&pa, cfg.eps_hat, sym.chi())?;
        let on_grid = |f: &SpectralField| SpectralField::from_coeffs(grid.clone(), f.coeffs().to_vec(), Parity::None);
        let (s, eta, mu) = (on_grid(&sc.s), on_grid(&sc.eta), on_grid(&sc.mu));
        let c = conservation(&mu, Some(&s));
        cons = cons.max(c);
        let residual = norm_l2(&(&s - &nl.slaved_s(&mu)));
        let row = [th, u.t, norm_l2(&mu), norm_l2(&s), residual, c.mean_mu, c.parity_mu, c.parity_s];
        for (col, v) in cols.iter_mut().zip(row) {
            col.push(v);
        }
        snaps.push(th, &[("s", &s), ("eta", &eta), ("mu", &mu)])?;
    }
    snaps.finish()?;
    let named: Vec<(&str, &[f64])> = CGL_NOTES.iter().map(|n| n.0).zip(cols.iter().map(|c| c.as_slice())).collect();
    let title = format!("direct Ginzburg-Landau run, eps_hat = {:?}, L = {:?}", cfg.eps_hat, cfg.l);
    fs::write(dir.join(DIAGNOSTICS), write_table(&title, CGL_NOTES, &named, ",", true))?;
    if gnuplot || cfg.gnuplot {
        fs::write(dir.join("diagnostics.dat"), write_table(&title, CGL_NOTES, &named, " ", false))?;
    }
    let report = CglReport {
        command: "simulate-cgl",
        eps_hat: cfg.eps_hat,
        l: cfg.l,
        l0,
        beta: params.beta,
        dt_cgl: cfg.dt_cgl,
        snapshots: count + 1,
        max_slaving_residual: max_of(&cols[4]),
        conservation: cons,
    };
    write_json(&dir.join(REPORT), &report)?;
    println!("simulate-cgl: {} snapshots, output in {}", report.snapshots, dir.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

/// Constants the sweep is consistent with.
#[derive(Debug, Serialize)]
struct FittedConstants {
    /// Largest `sup ‖η̂′‖_σ/ρ` over the members.
    c_eta: f64,
    /// Largest `sup ‖ŝ‖_{σ−1}/ρ³` over the members.
    c_s: f64,
    /// Largest `ε̂₀` compatible with the residual envelope.
    eps_hat0: f64,
    /// Log-log slope of the mean slaving residual against `ε̂`.
    residual_exponent: Option<f64>,
}

#[derive(Debug, Serialize)]
struct CompareReport {
    command: &'static str,
    primary_eps_hat: f64,
    l: f64,
    fitted: FittedConstants,
    sweep: SweepReport,
    pass: bool,
    failed: Vec<String>,
}

pub fn compare(config: &Path, out: Option<PathBuf>, snapshot_every: Option<f64>, gnuplot: bool) -> Outcome {
    let cfg = load_run_config(config, out, snapshot_every)?;
    let dir = cfg.output_dir.clone();
    let (sweep, runs) = run_sweep(&cfg.run_config(), &cfg.eps_hat_list, cfg.execution())?;
    write_manifest(&dir, &Manifest::new("compare", &cfg))?;
    let primary = runs.iter().find(|r| r.config.eps_hat == cfg.eps_hat).unwrap_or(&runs[0]);
    let dat = gnuplot || cfg.gnuplot;
    fs::write(dir.join(DIAGNOSTICS), diagnostics_csv(&primary.series, primary.config.eps_hat, cfg.l))?;
    for r in &runs {
        let e = r.config.eps_hat;
        fs::write(dir.join(format!("diagnostics_eps_{e}.csv")), diagnostics_csv(&r.series, e, cfg.l))?;
        if dat {
            fs::write(dir.join(format!("diagnostics_eps_{e}.dat")), diagnostics_dat(&r.series, e, cfg.l))?;
        }
    }
    let fitted = FittedConstants {
        c_eta: sweep.members.iter().map(|m| m.approximation_bound.fitted_c_eta).fold(0.0, f64::max),
        c_s: sweep.members.iter().map(|m| m.approximation_bound.fitted_c_s).fold(0.0, f64::max),
        eps_hat0: sweep.envelope.eps_hat0,
        residual_exponent: sweep.residual_fit.map(|f| f.slope),
    };
    let failed: Vec<String> = sweep.failed().into_iter().map(String::from).collect();
    let report = CompareReport {
        command: "compare",
        primary_eps_hat: primary.config.eps_hat,
        l: cfg.l,
        fitted,
        pass: failed.is_empty(),
        failed,
        sweep,
    };
    write_json(&dir.join(REPORT), &report)?;
    for m in &report.sweep.members {
        println!(
            "eps_hat {:<8} mean residual {:.3e}  KS window sup {:.3e}",
            m.eps_hat, m.mean_residual, m.ks_window_sup
        );
    }
    println!("compare: {} gates, {} failed, output in {}", report.sweep.gates.len(), report.failed.len(), dir.display());
    gate_outcome(&report.sweep.gates)
}

// ---------------------------------------------------------------------------
// verify-symbols, verify-coercive, norms, check-class-c
// ---------------------------------------------------------------------------

pub fn verify_symbols(eps: f64, alpha: f64, l: f64, n: usize) -> Outcome {
    if alpha * alpha >= 0.5 {
        return Err(Failure::Usage(format!("the symbol bounds need alpha^2 < 1/2, found alpha = {alpha}")));
    }
    if !(0.0..=1.0).contains(&eps) {
        return Err(Failure::Usage(format!("the symbol bounds need 0 <= eps <= 1, found eps = {eps}")));
    }
    let grid = Grid::new(l, n)?;
    let report = evaluate_symbol_bounds(&grid, &SymbolParams::new(eps, alpha)?);
    print_json(&report.bounds)?;
    let gates: Vec<Gate> = report.bounds.iter().map(|(k, b)| Gate::at_most(k, b.max_ratio, 1.0 + 1e-12)).collect();
    gate_outcome(&gates)
}

#[derive(Debug, Serialize)]
#[allow(non_snake_case)]
struct CoerciveReport {
    l: f64,
    eps: f64,
    eps_binding: String,
    phi_norm_sq: f64,
    phi_norm_sq_bound: f64,
    phi_phi_phi: f64,
    hs_norm_sq: f64,
    hs_tail_bound: f64,
    hs_envelope: f64,
    coercivity_min_slack: f64,
    K_empirical: f64,
    sizes: PhiSizes,
    hs: HsReport,
    coercivity: Vec<CoercivityReport>,
    gates: Vec<Gate>,
}

pub fn verify_coercive(l: f64, eps: Option<f64>, trials: usize, seed: u64, sequential: bool) -> Outcome {
    let exec = if sequential { Execution::Sequential } else { Execution::Parallel };
    let bounds = eps_bounds(l);
    let eps = eps.unwrap_or(bounds.binding);
    let sizes = phi_sizes(l, eps)?;
    let hs = gamma_hs_norm(l, eps, exec)?;
    let coercivity = [0.25, 1.0]
        .iter()
        .map(|&g| coercivity_check(trials, l, Some(eps), g, seed, exec))
        .collect::<phaseturb::Result<Vec<_>>>()?;
    let mut gates = vec![
        Gate::at_most("phi_norm_sq", sizes.phi_norm_sq, sizes.phi_norm_sq_bound),
        Gate::flag("hs_below_one_sixteenth", hs.below_sixteenth),
        Gate::flag("hs_below_envelope", hs.below_envelope),
    ];
    for c in &coercivity {
        gates.push(Gate::flag(&format!("coercivity_gamma_{}", c.gamma), c.pass()));
    }
    let report = CoerciveReport {
        l,
        eps,
        eps_binding: bounds.binding_name.clone(),
        phi_norm_sq: sizes.phi_norm_sq,
        phi_norm_sq_bound: sizes.phi_norm_sq_bound,
        phi_phi_phi: sizes.phi_phi_phi,
        hs_norm_sq: hs.sum,
        hs_tail_bound: hs.tail_bound,
        hs_envelope: hs.envelope,
        coercivity_min_slack: coercivity.iter().map(|c| c.min_lower_slack).fold(f64::INFINITY, f64::min),
        K_empirical: sizes.k_ratio,
        sizes,
        hs,
        coercivity,
        gates,
    };
    print_json(&report)?;
    gate_outcome(&report.gates)
}

pub fn norms(field: &Path, sigma: f64, delta: f64) -> Outcome {
    let f = read_field(field).map_err(|e| Failure::Usage(format!("{}: {e}", field.display())))?;
    print_json(&norm_report(&f, &NormParams::new(sigma, delta)?))
}

pub fn check_class_c(config: &Path, eta: Option<&Path>, s: Option<&Path>) -> Outcome {
    let cfg = load_config(config)?;
    let grid = Grid::new(cfg.l, cfg.n)?;
    let read = |p: &Path| read_field(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())));
    let eta0 = match eta {
        Some(p) => read(p)?,
        None => initial_phase(&grid, &cfg.init),
    };
    let s0 = match s {
        Some(p) => read(p)?,
        None => slaved_amplitude(&eta0, &SymbolParams::new(cfg.eps_hat, cfg.alpha)?),
    };
    let report = norms::check_class_c(&eta0, &s0, &cfg.class_c_params())?;
    print_json(&report)?;
    gate_outcome(&report.conditions.iter().map(|c| Gate::flag(&c.name, c.pass)).collect::<Vec<_>>())
}
