//! Plain-text run configuration.
//!
//! The format is one `key = value` pair per line. `[section]` headers group
//! keys and `#` starts a comment. Keys may also appear before the first
//! header. A key inside a section must belong to that section. Lists are
//! comma separated. Errors carry the offending key and line number.
//!
//! ```text
//! [physics]
//! alpha = 0.1
//! eps_hat = 0.05
//! L = 40          # or L0 = 800, never both
//! [grid]
//! N = 512
//! [time]
//! dt = 0.01
//! t_end_hat = 200
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{
    DispersionConfig, FormulationConfig, InitialSpec, KsAttractorConfig, RunConfig, TheoremConstants,
};
use crate::phase::Formulation;
use crate::norms::ClassCParams;

/// Known keys by section.
const SECTIONS: &[(&str, &[&str])] = &[
    ("physics", &["alpha", "eps_hat", "L", "L0", "phi0"]),
    ("grid", &["N", "dealias"]),
    ("time", &["dt", "t_end_hat", "diagnostic_interval", "snapshot_interval", "transient", "window", "c_t"]),
    ("integrator", &["formulation", "symmetric", "dt_cgl", "dt_hat_cross", "samples"]),
    ("initial", &["seed", "amplitude", "max_mode", "decay"]),
    ("norms", &["sigma", "delta"]),
    ("constants", &["K", "c_eta", "c_s", "c_mu", "eps_hat0"]),
    ("sweep", &["eps_hat_list", "L_list", "ensemble", "t_end_attractor", "dt_attractor"]),
    ("output", &["dir", "gnuplot"]),
    ("run", &["parallel"]),
];

fn section_of(key: &str) -> Option<&'static str> {
    SECTIONS.iter().find(|(_, keys)| keys.contains(&key)).map(|(s, _)| *s)
}

/// Validated configuration with every derived quantity materialised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub alpha: f64,
    /// Scaled `ε̂`.
    pub eps_hat: f64,
    /// Scaled period `L = ε̂L₀`.
    pub l: f64,
    /// Original period `L₀`; absent when `ε̂ = 0`.
    pub l0: Option<f64>,
    pub phi0: f64,
    pub n: usize,
    /// Products are always formed on the padded grid with the 2/3 rule.
    pub dealias: bool,
    pub dt: f64,
    pub t_end_hat: f64,
    pub diagnostic_interval: f64,
    pub snapshot_interval: f64,
    pub transient: f64,
    pub window: f64,
    pub c_t: Option<f64>,
    pub formulation: Formulation,
    pub symmetric: bool,
    /// Step of direct Ginzburg–Landau integration, original time units.
    pub dt_cgl: f64,
    /// Step of the coupled run in the formulation cross-check.
    pub dt_hat_cross: f64,
    pub samples: usize,
    pub init: InitialSpec,
    pub sigma: f64,
    pub delta: f64,
    pub constants: TheoremConstants,
    pub eps_hat_list: Vec<f64>,
    pub l_list: Vec<f64>,
    pub ensemble: usize,
    pub t_end_attractor: f64,
    pub dt_attractor: f64,
    pub output_dir: PathBuf,
    pub gnuplot: bool,
    pub parallel: bool,
    pub derived: Derived,
    pub warnings: Vec<String>,
}

/// Quantities computed from the primary parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    /// Scaled fundamental wavenumber `2π/L`.
    pub q: f64,
    /// `χ = 4/(1+α²)`.
    pub chi: f64,
    /// Unscaled `ε = ε̂√(2/χ)`.
    pub eps: f64,
    /// `β` with `1 + αβ + ε² = 0`; absent when `α = 0`.
    pub beta: Option<f64>,
}

/// Warning recorded for `α² ≥ 1/2`.
pub const ALPHA_WARNING: &str = "outside theorem validity α² < 1/2";

struct Entry {
    value: String,
    line: usize,
}

fn cfg_err(line: usize, key: &str, message: impl Into<String>) -> Error {
    Error::Config { line, key: key.to_string(), message: message.into() }
}

struct Entries(BTreeMap<String, Entry>);

impl Entries {
    fn raw(&self, key: &str) -> Option<&Entry> {
        self.0.get(key)
    }

    fn line(&self, key: &str) -> usize {
        self.0.get(key).map_or(0, |e| e.line)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, kind: &str) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(Some)
                .map_err(|_| cfg_err(e.line, key, format!("expected {kind}, found `{}`", e.value))),
        }
    }

    fn f64(&self, key: &str) -> Result<Option<f64>> {
        let v: Option<f64> = self.parse(key, "a number")?;
        if let Some(x) = v {
            if !x.is_finite() {
                return Err(cfg_err(self.line(key), key, "must be finite"));
            }
        }
        Ok(v)
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.parse(key, "a nonnegative integer")?.unwrap_or(default))
    }

    fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        Ok(self.parse(key, "true or false")?.unwrap_or(default))
    }

    fn list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.0.get(key) {
            None => Ok(default.to_vec()),
            Some(e) => e
                .value
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| cfg_err(e.line, key, format!("expected a comma-separated list of numbers, found `{}`", e.value)))
                })
                .collect(),
        }
    }

    fn positive(&self, key: &str, v: f64) -> Result<f64> {
        if v > 0.0 {
            Ok(v)
        } else {
            Err(cfg_err(self.line(key), key, format!("must be positive, found {v}")))
        }
    }
}

fn tokenize(text: &str) -> Result<Entries> {
    let mut map: BTreeMap<String, Entry> = BTreeMap::new();
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| cfg_err(line, content, "section header must end with `]`"))?
                .trim();
            if !SECTIONS.iter().any(|(s, _)| *s == name) {
                return Err(cfg_err(line, name, "unknown section"));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| cfg_err(line, content, "expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        let home = section_of(key).ok_or_else(|| cfg_err(line, key, "unknown key"))?;
        if let Some(s) = &section {
            if s != home {
                return Err(cfg_err(line, key, format!("belongs to section [{home}], not [{s}]")));
            }
        }
        if value.is_empty() {
            return Err(cfg_err(line, key, "missing value"));
        }
        if let Some(prev) = map.get(key) {
            return Err(cfg_err(line, key, format!("duplicate key, first set on line {}", prev.line)));
        }
        map.insert(key.to_string(), Entry { value: value.to_string(), line });
    }
    Ok(Entries(map))
}

/// Parse configuration text.
pub fn parse_config_str(text: &str) -> Result<SimConfig> {
    let e = tokenize(text)?;
    let need = |key: &str| -> Result<f64> { e.f64(key)?.ok_or_else(|| cfg_err(0, key, "required key is missing")) };

    let alpha = need("alpha")?;
    let eps_hat = need("eps_hat")?;
    if !(0.0..=1.0).contains(&eps_hat) {
        return Err(cfg_err(e.line("eps_hat"), "eps_hat", format!("must lie in [0, 1], found {eps_hat}")));
    }
    let (l, l0) = match (e.f64("L")?, e.f64("L0")?) {
        (Some(_), Some(_)) => {
            let line = e.line("L").max(e.line("L0"));
            return Err(cfg_err(line, "L, L0", "set exactly one of L and L0, not both"));
        }
        (None, None) => return Err(cfg_err(0, "L, L0", "one of L and L0 is required")),
        (Some(l), None) => {
            let l = e.positive("L", l)?;
            (l, if eps_hat > 0.0 { Some(l / eps_hat) } else { None })
        }
        (None, Some(l0)) => {
            let l0 = e.positive("L0", l0)?;
            if eps_hat == 0.0 {
                return Err(cfg_err(e.line("L0"), "L0", "eps_hat = 0 needs L, since L = eps_hat * L0 would vanish"));
            }
            (eps_hat * l0, Some(l0))
        }
    };
    let n = e.usize_or("N", 0)?;
    if e.raw("N").is_none() {
        return Err(cfg_err(0, "N", "required key is missing"));
    }
    if !n.is_power_of_two() || n < 16 {
        return Err(cfg_err(e.line("N"), "N", format!("must be a power of two of at least 16, found {n}")));
    }
    let dealias = e.bool_or("dealias", true)?;
    if !dealias {
        return Err(cfg_err(e.line("dealias"), "dealias", "only dealiased products are implemented"));
    }
    let dt = e.positive("dt", need("dt")?)?;
    let t_end_hat = e.positive("t_end_hat", need("t_end_hat")?)?;
    let formulation = match e.raw("formulation").map(|x| x.value.as_str()) {
        None | Some("amplitude_phase") => Formulation::AmplitudePhase,
        Some("slaved_r2") => Formulation::SlavedR2,
        Some(other) => {
            return Err(cfg_err(
                e.line("formulation"),
                "formulation",
                format!("expected amplitude_phase or slaved_r2, found `{other}`"),
            ))
        }
    };
    let base = RunConfig::default();
    let c_t = match e.f64("c_t")? {
        Some(v) => Some(e.positive("c_t", v)?),
        None => None,
    };
    let sigma = e.f64_or("sigma", base.sigma)?;
    let delta = e.f64_or("delta", base.delta)?;
    if sigma < 0.0 {
        return Err(cfg_err(e.line("sigma"), "sigma", "must be nonnegative"));
    }
    if delta < 2.0 {
        return Err(cfg_err(e.line("delta"), "delta", "must be at least 2"));
    }
    let dc = TheoremConstants::default();
    let constants = TheoremConstants {
        k: e.positive("K", e.f64_or("K", dc.k)?)?,
        c_eta: e.positive("c_eta", e.f64_or("c_eta", dc.c_eta)?)?,
        c_s: e.positive("c_s", e.f64_or("c_s", dc.c_s)?)?,
        c_mu: e.positive("c_mu", e.f64_or("c_mu", dc.c_mu)?)?,
        eps_hat0: e.positive("eps_hat0", e.f64_or("eps_hat0", dc.eps_hat0)?)?,
    };
    let di = InitialSpec::default();
    let init = InitialSpec {
        seed: e.parse("seed", "a nonnegative integer")?.unwrap_or(di.seed),
        amplitude: e.f64_or("amplitude", di.amplitude)?,
        max_mode: e.usize_or("max_mode", di.max_mode)?,
        decay: e.f64_or("decay", di.decay)?,
    };
    if init.max_mode == 0 || init.max_mode >= n / 3 {
        return Err(cfg_err(e.line("max_mode"), "max_mode", format!("must lie in 1..{} for N = {n}", n / 3)));
    }
    let eps_hat_list = e.list_or("eps_hat_list", &[0.1, 0.05, 0.025])?;
    if let Some(bad) = eps_hat_list.iter().find(|x| !(**x > 0.0 && **x <= 1.0)) {
        return Err(cfg_err(e.line("eps_hat_list"), "eps_hat_list", format!("entries must lie in (0, 1], found {bad}")));
    }
    let l_list = e.list_or("L_list", &KsAttractorConfig::default().ls)?;
    if let Some(bad) = l_list.iter().find(|x| !(**x > 0.0)) {
        return Err(cfg_err(e.line("L_list"), "L_list", format!("entries must be positive, found {bad}")));
    }
    let fc = FormulationConfig::default();
    let ka = KsAttractorConfig::default();

    let chi = 4.0 / (1.0 + alpha * alpha);
    let eps = eps_hat * (2.0 / chi).sqrt();
    let beta = if alpha != 0.0 { Some(-(2.0 + (1.0 + alpha * alpha) * eps_hat * eps_hat) / (2.0 * alpha)) } else { None };
    let mut warnings = Vec::new();
    if alpha * alpha >= 0.5 {
        warnings.push(format!("alpha = {alpha}: {ALPHA_WARNING}"));
    }

    let cfg = SimConfig {
        alpha,
        eps_hat,
        l,
        l0,
        phi0: e.f64_or("phi0", 0.0)?,
        n,
        dealias,
        dt,
        t_end_hat,
        diagnostic_interval: e.positive("diagnostic_interval", e.f64_or("diagnostic_interval", base.diagnostic_interval)?)?,
        snapshot_interval: e.positive("snapshot_interval", e.f64_or("snapshot_interval", base.snapshot_interval)?)?,
        transient: e.f64_or("transient", base.transient.min(0.1 * t_end_hat))?,
        window: e.positive("window", e.f64_or("window", base.window)?)?,
        c_t,
        formulation,
        symmetric: e.bool_or("symmetric", true)?,
        dt_cgl: e.positive("dt_cgl", e.f64_or("dt_cgl", fc.dt_cgl)?)?,
        dt_hat_cross: e.positive("dt_hat_cross", e.f64_or("dt_hat_cross", fc.dt_hat)?)?,
        samples: e.usize_or("samples", fc.samples)?.max(1),
        init,
        sigma,
        delta,
        constants,
        eps_hat_list,
        l_list,
        ensemble: e.usize_or("ensemble", ka.ensemble)?.max(1),
        t_end_attractor: e.positive("t_end_attractor", e.f64_or("t_end_attractor", ka.t_end)?)?,
        dt_attractor: e.positive("dt_attractor", e.f64_or("dt_attractor", ka.dt)?)?,
        output_dir: PathBuf::from(e.raw("dir").map_or("run", |x| x.value.as_str())),
        gnuplot: e.bool_or("gnuplot", false)?,
        parallel: e.bool_or("parallel", true)?,
        derived: Derived { q: 2.0 * std::f64::consts::PI / l, chi, eps, beta },
        warnings,
    };
    cfg.run_config().validate().map_err(|err| cfg_err(e.line("dt"), "dt", err.to_string()))?;
    Ok(cfg)
}

/// Read and parse a configuration file.
pub fn parse_config(path: &Path) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

impl SimConfig {
    /// Parameters of the long coupled run.
    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            alpha: self.alpha,
            eps_hat: self.eps_hat,
            l: self.l,
            n: self.n,
            dt: self.dt,
            t_end: self.t_end_hat,
            diagnostic_interval: self.diagnostic_interval,
            snapshot_interval: self.snapshot_interval,
            window: self.window,
            c_t: self.c_t,
            transient: self.transient,
            formulation: self.formulation,
            symmetric: self.symmetric,
            init: self.init,
            sigma: self.sigma,
            delta: self.delta,
            constants: self.constants,
        }
    }

    /// Parameters of the direct-versus-coupled comparison.
    pub fn formulation_config(&self) -> FormulationConfig {
        FormulationConfig {
            alpha: self.alpha,
            eps_hat: self.eps_hat,
            l: self.l,
            n: self.n,
            dt_cgl: self.dt_cgl,
            dt_hat: self.dt_hat_cross,
            t_end: self.t_end_hat,
            samples: self.samples,
            init: self.init,
            sigma: self.sigma,
            delta: self.delta,
            constants: self.constants,
            ..FormulationConfig::default()
        }
    }

    /// Parameters of the attractor study.
    pub fn attractor_config(&self) -> KsAttractorConfig {
        KsAttractorConfig {
            ls: self.l_list.clone(),
            dt: self.dt_attractor,
            t_end: self.t_end_attractor,
            seed: self.init.seed,
            ensemble: self.ensemble,
            ..KsAttractorConfig::default()
        }
    }

    /// Parameters of the dispersion study at the unscaled `ε` of this run.
    pub fn dispersion_config(&self) -> DispersionConfig {
        DispersionConfig { eps: self.derived.eps, alpha: self.alpha, ..DispersionConfig::default() }
    }

    /// Constants of the initial-data class at this run's parameters.
    pub fn class_c_params(&self) -> ClassCParams {
        ClassCParams {
            k: self.constants.k,
            l: self.l,
            alpha: self.alpha,
            eps_hat: self.eps_hat,
            eps_hat0: self.constants.eps_hat0,
            c_s0: self.constants.c_s,
            c_eta0: self.constants.c_eta,
            sigma: self.sigma,
            delta: self.delta,
        }
    }

    /// Execution mode selected by the `parallel` key.
    pub fn execution(&self) -> crate::exec::Execution {
        if self.parallel {
            crate::exec::Execution::Parallel
        } else {
            crate::exec::Execution::Sequential
        }
    }

    /// Configuration text that parses back to this configuration.
    pub fn to_text(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        put("[physics]\nalpha", format!("{:?}", self.alpha));
        put("eps_hat", format!("{:?}", self.eps_hat));
        put("L", format!("{:?}", self.l));
        put("phi0", format!("{:?}", self.phi0));
        put("[grid]\nN", self.n.to_string());
        put("dealias", self.dealias.to_string());
        put("[time]\ndt", format!("{:?}", self.dt));
        put("t_end_hat", format!("{:?}", self.t_end_hat));
        put("diagnostic_interval", format!("{:?}", self.diagnostic_interval));
        put("snapshot_interval", format!("{:?}", self.snapshot_interval));
        put("transient", format!("{:?}", self.transient));
        put("window", format!("{:?}", self.window));
        if let Some(c) = self.c_t {
            put("c_t", format!("{c:?}"));
        }
        let form = match self.formulation {
            Formulation::AmplitudePhase => "amplitude_phase",
            Formulation::SlavedR2 => "slaved_r2",
        };
        put("[integrator]\nformulation", form.to_string());
        put("symmetric", self.symmetric.to_string());
        put("dt_cgl", format!("{:?}", self.dt_cgl));
        put("dt_hat_cross", format!("{:?}", self.dt_hat_cross));
        put("samples", self.samples.to_string());
        put("[initial]\nseed", self.init.seed.to_string());
        put("amplitude", format!("{:?}", self.init.amplitude));
        put("max_mode", self.init.max_mode.to_string());
        put("decay", format!("{:?}", self.init.decay));
        put("[norms]\nsigma", format!("{:?}", self.sigma));
        put("delta", format!("{:?}", self.delta));
        put("[constants]\nK", format!("{:?}", self.constants.k));
        put("c_eta", format!("{:?}", self.constants.c_eta));
        put("c_s", format!("{:?}", self.constants.c_s));
        put("c_mu", format!("{:?}", self.constants.c_mu));
        put("eps_hat0", format!("{:?}", self.constants.eps_hat0));
        put("[sweep]\neps_hat_list", list(&self.eps_hat_list));
        put("L_list", list(&self.l_list));
        put("ensemble", self.ensemble.to_string());
        put("t_end_attractor", format!("{:?}", self.t_end_attractor));
        put("dt_attractor", format!("{:?}", self.dt_attractor));
        put("[output]\ndir", self.output_dir.display().to_string());
        put("gnuplot", self.gnuplot.to_string());
        put("[run]\nparallel", self.parallel.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "alpha=0.1\neps_hat=0.05\nL=40\nN=512\ndt=0.01\nt_end_hat=10\n";

    fn key_of(err: Error) -> (usize, String) {
        match err {
            Error::Config { line, key, .. } => (line, key),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn minimal_config_is_valid() {
        let c = parse_config_str(MINIMAL).unwrap();
        assert_eq!(c.n, 512);
        assert!((c.l0.unwrap() - 800.0).abs() < 1e-9);
        assert!((c.derived.chi - 4.0 / 1.01).abs() < 1e-15);
        assert!((1.0 + c.alpha * c.derived.beta.unwrap() + c.derived.eps.powi(2)).abs() < 1e-12);
        assert!((c.derived.q - std::f64::consts::TAU / 40.0).abs() < 1e-15);
        assert!(c.warnings.is_empty());
    }

    #[test]
    fn sections_and_comments() {
        let text = "# run\n[physics]\nalpha = 0.1 # dispersion\neps_hat = 0.05\nL0 = 800\n[grid]\nN = 256\n[time]\ndt = 0.02\nt_end_hat = 4\n";
        let c = parse_config_str(text).unwrap();
        assert!((c.l - 40.0).abs() < 1e-12);
        let bad = "[grid]\nalpha = 0.1\n";
        assert_eq!(key_of(parse_config_str(bad).unwrap_err()), (2, "alpha".into()));
    }

    #[test]
    fn both_periods_rejected() {
        let text = format!("{MINIMAL}L0=800\n");
        let (line, key) = key_of(parse_config_str(&text).unwrap_err());
        assert_eq!(line, 7);
        assert!(key.contains("L") && key.contains("L0"));
    }

    #[test]
    fn errors_name_key_and_line() {
        let (line, key) = key_of(parse_config_str(&MINIMAL.replace("N=512", "N=500")).unwrap_err());
        assert_eq!((line, key.as_str()), (4, "N"));
        let (line, key) = key_of(parse_config_str(&format!("{MINIMAL}bogus=1\n")).unwrap_err());
        assert_eq!((line, key.as_str()), (7, "bogus"));
        let (line, key) = key_of(parse_config_str(&MINIMAL.replace("dt=0.01", "dt=fast")).unwrap_err());
        assert_eq!((line, key.as_str()), (5, "dt"));
        let (_, key) = key_of(parse_config_str(&MINIMAL.replace("dt=0.01", "dt=-1")).unwrap_err());
        assert_eq!(key, "dt");
        let (_, key) = key_of(parse_config_str(&MINIMAL.replace("alpha=0.1\n", "")).unwrap_err());
        assert_eq!(key, "alpha");
    }

    #[test]
    fn large_alpha_warns() {
        let c = parse_config_str(&MINIMAL.replace("alpha=0.1", "alpha=0.8")).unwrap();
        assert_eq!(c.warnings.len(), 1);
        assert!(c.warnings[0].contains(ALPHA_WARNING));
    }

    #[test]
    fn text_round_trip() {
        let c = parse_config_str(MINIMAL).unwrap();
        let back = parse_config_str(&c.to_text()).unwrap();
        assert_eq!(c, back);
    }
}
