//! Run artefacts: the manifest, diagnostic CSV files, JSON reports, field
//! snapshots and gnuplot tables.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a file
//! read back reproduces the in-memory values exactly and identical runs
//! produce identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cgl::PhaseAmplitudeState;
use crate::config::{parse_config_str, SimConfig};
use crate::error::{Error, Result};
use crate::experiments::DiagnosticSeries;
use crate::grid::SpectralField;

/// Name of the manifest in every run directory.
pub const MANIFEST: &str = "manifest.json";
/// Name of the diagnostic time series.
pub const DIAGNOSTICS: &str = "diagnostics.csv";
/// Name of the machine-readable report.
pub const REPORT: &str = "report.json";

/// Reproducibility record of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    /// Whether the parallel feature was compiled in.
    pub parallel_feature: bool,
    /// Fully resolved configuration, derived quantities included.
    pub config: SimConfig,
    /// Configuration text that reproduces the run.
    pub config_text: String,
}

impl Manifest {
    pub fn new(command: &str, config: &SimConfig) -> Manifest {
        Manifest {
            tool: "phaseturb".into(),
            version: crate::VERSION.into(),
            command: command.into(),
            seed: config.init.seed,
            parallel_feature: cfg!(feature = "parallel"),
            config: config.clone(),
            config_text: config.to_text(),
        }
    }

    /// Configuration re-parsed from the stored text.
    pub fn resolved_config(&self) -> Result<SimConfig> {
        parse_config_str(&self.config_text)
    }
}

/// Create `dir` and write the manifest into it.
pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(MANIFEST);
    fs::write(&path, serde_json::to_string_pretty(manifest)?)?;
    Ok(path)
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Write any serialisable report as pretty JSON.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(p) = path.parent() {
        fs::create_dir_all(p)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

/// Column descriptions written into the CSV header comment.
const COLUMN_NOTES: &[(&str, &str)] = &[
    ("t", "scaled time"),
    ("norm_mu_L2", "L2 norm of the phase derivative"),
    ("norm_s_L2", "L2 norm of the amplitude"),
    ("slaving_residual_L2", "L2 norm of s + (1/8)G eta'' + (eps_hat^2/32)G (eta')^2"),
    ("ks_error_L2", "L2 distance of eta' to the restarted Kuramoto-Sivashinsky solution"),
    ("ks_error_rel", "ks_error_L2 / norm_mu_L2"),
    ("norm_mu_sigma", "weighted sigma-norm of eta'"),
    ("norm_s_sigma_m1", "weighted (sigma-1)-norm of s"),
    ("norm_mu_L2_per_sqrtL", "norm_mu_L2 / sqrt(eps_hat L0)"),
    ("norm_s_L2_per_sqrtL", "norm_s_L2 / sqrt(eps_hat L0)"),
    ("scaled_residual", "slaving_residual_L2 / eps_hat^4"),
];

fn derived_columns(series: &DiagnosticSeries, eps_hat: f64, l: f64) -> [Vec<f64>; 3] {
    let r = l.sqrt();
    let e2 = eps_hat * eps_hat;
    let e4 = e2 * e2;
    [
        series.norm_mu_prime.iter().map(|v| v / r).collect(),
        series.norm_s.iter().map(|v| v / r).collect(),
        series.slaving_residual.iter().map(|v| if e4 > 0.0 { v / e4 } else { 0.0 }).collect(),
    ]
}

fn table(series: &DiagnosticSeries, eps_hat: f64, l: f64, sep: &str, header: bool) -> String {
    let derived = derived_columns(series, eps_hat, l);
    let mut cols: Vec<(&str, &[f64])> = series.columns();
    cols.push(("norm_mu_L2_per_sqrtL", &derived[0]));
    cols.push(("norm_s_L2_per_sqrtL", &derived[1]));
    cols.push(("scaled_residual", &derived[2]));
    let title = format!("diagnostics of a coupled run, eps_hat = {eps_hat:?}, L = {l:?}");
    write_table(&title, COLUMN_NOTES, &cols, sep, header)
}

/// Render columns as text. Every line of the preamble starts with `#`; the
/// column names form a header row when `header` is set and a comment
/// otherwise.
pub fn write_table(title: &str, notes: &[(&str, &str)], cols: &[(&str, &[f64])], sep: &str, header: bool) -> String {
    let mut out = String::new();
    out.push_str(&format!("# {title}\n"));
    for (name, note) in notes {
        out.push_str(&format!("# {name}: {note}\n"));
    }
    let names: Vec<&str> = cols.iter().map(|c| c.0).collect();
    if !header {
        out.push_str("# ");
    }
    out.push_str(&names.join(sep));
    out.push('\n');
    let rows = cols.iter().map(|c| c.1.len()).min().unwrap_or(0);
    for i in 0..rows {
        let row: Vec<String> = cols.iter().map(|c| format!("{:?}", c.1[i])).collect();
        out.push_str(&row.join(sep));
        out.push('\n');
    }
    out
}

/// CSV text with a `#` header comment describing each column, then a header
/// row `t,norm_mu_L2,norm_s_L2,...`.
pub fn diagnostics_csv(series: &DiagnosticSeries, eps_hat: f64, l: f64) -> String {
    table(series, eps_hat, l, ",", true)
}

/// Whitespace-separated table for gnuplot; the column names sit in a comment.
pub fn diagnostics_dat(series: &DiagnosticSeries, eps_hat: f64, l: f64) -> String {
    table(series, eps_hat, l, " ", false)
}

/// Columns of a CSV written by [`diagnostics_csv`].
pub fn read_csv(text: &str) -> Result<Vec<(String, Vec<f64>)>> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("CSV has no header row".into()))?;
    let mut cols: Vec<(String, Vec<f64>)> = header.split(',').map(|h| (h.trim().to_string(), Vec::new())).collect();
    for (i, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != cols.len() {
            return Err(Error::Parse(format!("CSV row {} has {} cells, expected {}", i + 1, cells.len(), cols.len())));
        }
        for (c, cell) in cols.iter_mut().zip(cells) {
            c.1.push(cell.trim().parse().map_err(|_| Error::Parse(format!("bad number `{cell}` in CSV row {}", i + 1)))?);
        }
    }
    Ok(cols)
}

/// One entry of `snapshots/index.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub index: usize,
    pub t: f64,
    pub files: Vec<String>,
}

/// Contents of `snapshots/index.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotIndex {
    /// Period of the grid the fields live on.
    pub l: f64,
    pub n: usize,
    /// True for scaled variables.
    pub scaled: bool,
    pub entries: Vec<SnapshotEntry>,
}

/// Accumulates snapshot files under `<dir>/snapshots`.
#[derive(Debug)]
pub struct SnapshotWriter {
    dir: PathBuf,
    index: SnapshotIndex,
}

impl SnapshotWriter {
    pub fn new(dir: &Path, l: f64, n: usize, scaled: bool) -> Result<SnapshotWriter> {
        let dir = dir.join("snapshots");
        fs::create_dir_all(&dir)?;
        Ok(SnapshotWriter { dir, index: SnapshotIndex { l, n, scaled, entries: Vec::new() } })
    }

    /// Write `t_<index>_<name>.txt` for each named field.
    pub fn push(&mut self, t: f64, fields: &[(&str, &SpectralField)]) -> Result<()> {
        let i = self.index.entries.len();
        let mut files = Vec::new();
        for (name, f) in fields {
            let file = format!("t_{i:05}_{name}.txt");
            fs::write(self.dir.join(&file), format!("# t = {t:?}\n{}", f.to_text()))?;
            files.push(file);
        }
        self.index.entries.push(SnapshotEntry { index: i, t, files });
        Ok(())
    }

    /// Write `index.json` and return the index.
    pub fn finish(self) -> Result<SnapshotIndex> {
        write_json(&self.dir.join("index.json"), &self.index)?;
        Ok(self.index)
    }
}

/// Write every phase/amplitude snapshot as `t_<index>_{s,eta,mu}.txt` plus
/// `index.json`.
pub fn write_snapshots(dir: &Path, snapshots: &[PhaseAmplitudeState]) -> Result<SnapshotIndex> {
    let (l, n) = snapshots.first().map_or((0.0, 0), |s| (s.s.grid().length(), s.s.grid().n()));
    let scaled = snapshots.first().is_none_or(|s| s.scaled);
    let mut w = SnapshotWriter::new(dir, l, n, scaled)?;
    for s in snapshots {
        w.push(s.t, &[("s", &s.s), ("eta", &s.eta), ("mu", &s.mu)])?;
    }
    w.finish()
}

/// Read a field written by [`SnapshotWriter`] or [`SpectralField::to_text`].
pub fn read_field(path: &Path) -> Result<SpectralField> {
    let text = fs::read_to_string(path)?;
    let body: String = text.lines().filter(|l| !l.starts_with("# t =")).collect::<Vec<_>>().join("\n");
    SpectralField::from_text(&body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_str;

    fn series() -> DiagnosticSeries {
        DiagnosticSeries {
            t: vec![0.0, 0.5],
            norm_mu_prime: vec![1.0, 2.0],
            norm_s: vec![0.1, 0.2],
            slaving_residual: vec![0.0, 1e-7],
            ks_error: vec![0.0, 1e-3],
            ks_error_rel: vec![0.0, 5e-4],
            norm_mu_sigma: vec![3.0, 4.0],
            norm_s_sigma_m1: vec![0.3, 0.4],
        }
    }

    #[test]
    fn csv_round_trip_and_header() {
        let text = diagnostics_csv(&series(), 0.05, 40.0);
        assert!(text.starts_with('#'));
        let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
        assert!(header.starts_with("t,norm_mu_L2,norm_s_L2,"));
        let cols = read_csv(&text).unwrap();
        assert_eq!(cols.len(), 11);
        assert_eq!(cols[1].1, vec![1.0, 2.0]);
        let e2 = 0.05f64 * 0.05;
        assert_eq!(cols[10].1[1], 1e-7 / (e2 * e2));
        let names: Vec<&str> = cols.iter().map(|c| c.0.as_str()).collect();
        for (n, _) in COLUMN_NOTES {
            assert!(names.contains(n));
        }
    }

    #[test]
    fn manifest_round_trip() {
        let cfg = parse_config_str("alpha=0.1\neps_hat=0.05\nL=40\nN=64\ndt=0.02\nt_end_hat=1\nseed=9\n").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let m = Manifest::new("simulate-coupled", &cfg);
        let p = write_manifest(dir.path(), &m).unwrap();
        let back = read_manifest(&p).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.seed, 9);
        assert_eq!(back.resolved_config().unwrap(), cfg);
    }
}
