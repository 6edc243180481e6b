//! Closed-form Fourier multipliers of the scaled phase/amplitude system,
//! the linear dispersion relation and the 2×2 matrix symbol `𝓛_M`.
//!
//! All symbols are functions of the wavenumber `k = qn` and of
//! [`SymbolParams`], which carries the scaled `ε̂` and `α`. Every symbol is even
//! in `k`.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::etd::Mat2;
use crate::grid::{Grid, SpectralField};

/// Parameters of the scaled symbols.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymbolParams {
    /// Scaled small parameter `ε̂`. Zero is accepted for the limiting symbols.
    pub eps: f64,
    /// Dispersion parameter `α`.
    pub alpha: f64,
}

impl SymbolParams {
    /// Parameters; `eps` must lie in `[0, 1]`.
    pub fn new(eps: f64, alpha: f64) -> Result<SymbolParams> {
        if !(0.0..=1.0).contains(&eps) || !alpha.is_finite() {
            return Err(Error::Parameter(format!("eps = {eps} must lie in [0, 1], alpha = {alpha} finite")));
        }
        Ok(SymbolParams { eps, alpha })
    }

    /// `χ = 4/(1+α²)`.
    pub fn chi(&self) -> f64 {
        4.0 / (1.0 + self.alpha * self.alpha)
    }

    /// Unscaled `ε = ε̂ √(2/χ)`.
    pub fn eps_unscaled(&self) -> f64 {
        self.eps * (2.0 / self.chi()).sqrt()
    }

    /// True when `α² < 1/2`, the range covered by the theorems.
    pub fn within_theorem_range(&self) -> bool {
        self.alpha * self.alpha < 0.5
    }

    fn e2(&self) -> f64 {
        self.eps * self.eps
    }

    fn a2(&self) -> f64 {
        self.alpha * self.alpha
    }

    /// `G(k) = 1/(1 + ε²k²/2)`.
    pub fn g(&self, k: f64) -> f64 {
        1.0 / (1.0 + 0.5 * self.e2() * k * k)
    }

    /// `𝓛_s(k) = 1 + ε²k²/2`, the symbol of `1 - (ε²/2)∂²`.
    pub fn ls(&self, k: f64) -> f64 {
        1.0 + 0.5 * self.e2() * k * k
    }

    /// `𝓛_{μ,c}(k) = k⁴ - k²`, the symbol of `∂⁴ + ∂²`.
    pub fn lmuc(&self, k: f64) -> f64 {
        lmuc(k)
    }

    /// `𝓛_μ(k) = (k⁴ - k²)/(1 + ε²k²/2)`.
    pub fn lmu(&self, k: f64) -> f64 {
        self.g(k) * lmuc(k)
    }

    /// `𝓛_{μ,r}(k) = 2(2 + ε²(1+α²) - α²ε²k²)/(1 + ε²k²/2)`.
    pub fn lmur(&self, k: f64) -> f64 {
        let e2 = self.e2();
        let a2 = self.a2();
        2.0 * (2.0 + e2 * (1.0 + a2) - a2 * e2 * k * k) * self.g(k)
    }

    /// `𝓛_r(k) = 1 + (3/2 + ε²(1+α²)/4)ε²k² + ((1-α²)/4)ε⁴k⁴`.
    pub fn lr(&self, k: f64) -> f64 {
        let e2 = self.e2();
        let a2 = self.a2();
        let k2 = k * k;
        1.0 + (1.5 + 0.25 * e2 * (1.0 + a2)) * e2 * k2 + 0.25 * (1.0 - a2) * e2 * e2 * k2 * k2
    }

    /// `𝓛_v(k) = ((1/3)(1 + k⁴)/(1 + ε²k²/2))^{1/2}`.
    pub fn lv(&self, k: f64) -> f64 {
        ((1.0 + k.powi(4)) * self.g(k) / 3.0).sqrt()
    }

    /// The matrix symbol `𝓛_M(k)` acting on `(μ, r₂)`.
    pub fn matrix_lm(&self, k: f64) -> Mat2 {
        let e2 = self.e2();
        let e4 = e2 * e2;
        let chi = self.chi();
        let ik = Complex64::new(0.0, k);
        let lmu = self.lmu(k);
        Mat2::new(
            Complex64::new(-lmu, 0.0),
            ik * (e2 * chi * self.lmur(k)),
            -ik * (lmu / (8.0 * e4)),
            Complex64::new(-(chi / e4) * self.g(k) * self.lr(k), 0.0),
        )
    }

    /// Eigenvalues of `𝓛_M(k)`; at `k = 0` the diagonal entries.
    pub fn matrix_lm_eigenvalues(&self, k: f64) -> (Complex64, Complex64) {
        let m = self.matrix_lm(k);
        if k == 0.0 {
            return (m.a, m.d);
        }
        m.eigenvalues()
    }

    /// Value of a named symbol.
    pub fn eval(&self, kind: SymbolKind, k: f64) -> f64 {
        match kind {
            SymbolKind::G => self.g(k),
            SymbolKind::Ls => self.ls(k),
            SymbolKind::Lmu => self.lmu(k),
            SymbolKind::Lmuc => lmuc(k),
            SymbolKind::Lmur => self.lmur(k),
            SymbolKind::Lr => self.lr(k),
            SymbolKind::Lv => self.lv(k),
        }
    }
}

/// `k⁴ - k²`.
pub fn lmuc(k: f64) -> f64 {
    let k2 = k * k;
    k2 * k2 - k2
}

/// Dispersion relation `λ(k) = (ε²k² - k⁴(1+α²)/2)/(1 + k²/2)` in unscaled
/// variables.
pub fn dispersion_lambda(k: f64, eps_unscaled: f64, alpha: f64) -> f64 {
    let k2 = k * k;
    (eps_unscaled * eps_unscaled * k2 - 0.5 * k2 * k2 * (1.0 + alpha * alpha)) / (1.0 + 0.5 * k2)
}

/// Band edge `k_c = ε √(2/(1+α²))` of the dispersion relation.
pub fn critical_wavenumber(eps_unscaled: f64, alpha: f64) -> f64 {
    eps_unscaled * (2.0 / (1.0 + alpha * alpha)).sqrt()
}

/// Growth rate of the slow eigenmode of the CGL equation linearised about the
/// uniform state `e^{-iβt}`, with `1 + αβ = -ε²`.
///
/// For a perturbation `(a, b)` of amplitude and phase at wavenumber `k` the
/// linear system is `a' = -(k²+2)a + αk²b`, `b' = -(αk² + 2β)a - k²b`. Its
/// trace is `-2(1+k²)` and its determinant `(1+α²)k⁴ - 2ε²k²`.
pub fn cgl_linear_rate(k: f64, eps_unscaled: f64, alpha: f64) -> f64 {
    let k2 = k * k;
    let det = (1.0 + alpha * alpha) * k2 * k2 - 2.0 * eps_unscaled * eps_unscaled * k2;
    let half_tr = 1.0 + k2;
    // Larger root of λ² + 2(1+k²)λ + det = 0, written without cancellation.
    let disc = (half_tr * half_tr - det).sqrt();
    -det / (half_tr + disc)
}

/// Names of the tabulated symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SymbolKind {
    G,
    Ls,
    Lmu,
    Lmuc,
    Lmur,
    Lr,
    Lv,
}

impl SymbolKind {
    /// All tabulated symbols.
    pub const ALL: [SymbolKind; 7] = [
        SymbolKind::G,
        SymbolKind::Ls,
        SymbolKind::Lmu,
        SymbolKind::Lmuc,
        SymbolKind::Lmur,
        SymbolKind::Lr,
        SymbolKind::Lv,
    ];
}

/// A symbol sampled at every stored wavenumber of a grid (FFT order).
#[derive(Debug, Clone)]
pub struct SymbolTable {
    pub kind: SymbolKind,
    pub values: Vec<f64>,
}

impl SymbolTable {
    /// Sample `kind` on `grid`.
    pub fn new(grid: &Grid, params: &SymbolParams, kind: SymbolKind) -> SymbolTable {
        let values = (0..grid.n()).map(|i| params.eval(kind, grid.wavenumber(i))).collect();
        SymbolTable { kind, values }
    }

    /// Reciprocal table; zero where the symbol vanishes.
    pub fn reciprocal(&self) -> Vec<f64> {
        self.values.iter().map(|&v| if v == 0.0 { 0.0 } else { 1.0 / v }).collect()
    }
}

/// All symbol tables of one `(Grid, SymbolParams)` pair.
#[derive(Debug, Clone)]
pub struct SymbolSet {
    pub grid: Arc<Grid>,
    pub params: SymbolParams,
    pub g: Vec<f64>,
    pub ls: Vec<f64>,
    pub lmu: Vec<f64>,
    pub lmuc: Vec<f64>,
    pub lmur: Vec<f64>,
    pub lr: Vec<f64>,
    pub lv: Vec<f64>,
}

impl SymbolSet {
    /// Sample every symbol once.
    pub fn new(grid: &Arc<Grid>, params: SymbolParams) -> SymbolSet {
        let t = |kind| SymbolTable::new(grid, &params, kind).values;
        SymbolSet {
            grid: grid.clone(),
            params,
            g: t(SymbolKind::G),
            ls: t(SymbolKind::Ls),
            lmu: t(SymbolKind::Lmu),
            lmuc: t(SymbolKind::Lmuc),
            lmur: t(SymbolKind::Lmur),
            lr: t(SymbolKind::Lr),
            lv: t(SymbolKind::Lv),
        }
    }

    /// Table for a symbol.
    pub fn table(&self, kind: SymbolKind) -> &[f64] {
        match kind {
            SymbolKind::G => &self.g,
            SymbolKind::Ls => &self.ls,
            SymbolKind::Lmu => &self.lmu,
            SymbolKind::Lmuc => &self.lmuc,
            SymbolKind::Lmur => &self.lmur,
            SymbolKind::Lr => &self.lr,
            SymbolKind::Lv => &self.lv,
        }
    }

    /// Apply a symbol to a field.
    pub fn apply(&self, kind: SymbolKind, f: &SpectralField) -> SpectralField {
        f.apply_table(self.table(kind))
    }
}

/// Result of one symbol bound over a grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundEntry {
    /// `max_k |lhs(k)|/rhs`; the bound holds when this is at most one.
    pub max_ratio: f64,
    /// Wavenumber attaining `max_ratio`.
    pub argmax_k: f64,
    /// `max_ratio ≤ 1`.
    pub pass: bool,
}

/// Report of all symbol bounds for one parameter pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub eps: f64,
    pub alpha: f64,
    pub bounds: BTreeMap<String, BoundEntry>,
}

impl BoundReport {
    /// True when every bound holds.
    pub fn all_pass(&self) -> bool {
        self.bounds.values().all(|b| b.pass)
    }
}

/// Names of the symbol bounds, in report order.
pub const BOUND_NAMES: [&str; 4] = [
    "abs_Lmur_le_8",
    "abs_k_over_Lv_le_2",
    "Lv_over_1_plus_k2_le_1",
    "eps2k2_Lmur_over_8GLr_le_max",
];

fn bound_ratios(params: &SymbolParams, k: f64) -> [f64; 4] {
    let a2 = params.alpha * params.alpha;
    let cap = (1.0f64 / 3.0).max(a2 / (1.0 - a2));
    let e2k2 = params.eps * params.eps * k * k;
    [
        params.lmur(k).abs() / 8.0,
        (k / params.lv(k)).abs() / 2.0,
        (params.lv(k) / (1.0 + k * k)).abs(),
        (e2k2 / 8.0) * (params.lmur(k) / (params.g(k) * params.lr(k))).abs() / cap,
    ]
}

/// Evaluate the symbol inequalities at every stored wavenumber of `grid`.
pub fn evaluate_symbol_bounds(grid: &Grid, params: &SymbolParams) -> BoundReport {
    let mut best = [(f64::NEG_INFINITY, 0.0); 4];
    for i in 0..grid.n() {
        let k = grid.wavenumber(i);
        for (slot, r) in best.iter_mut().zip(bound_ratios(params, k)) {
            if r > slot.0 {
                *slot = (r, k);
            }
        }
    }
    let bounds = BOUND_NAMES
        .iter()
        .zip(best)
        .map(|(name, (r, k))| {
            (
                name.to_string(),
                BoundEntry { max_ratio: r, argmax_k: k, pass: r <= 1.0 + 1e-12 },
            )
        })
        .collect();
    BoundReport { eps: params.eps, alpha: params.alpha, bounds }
}

/// Verify the symbol inequalities; errors list the offending wavenumbers of the first
/// failing bound. Requires `ε² ≤ 1` and `α² < 1/2`.
pub fn verify_symbol_bounds(grid: &Grid, params: &SymbolParams) -> Result<BoundReport> {
    if params.eps > 1.0 || params.alpha * params.alpha >= 0.5 {
        return Err(Error::Parameter(format!(
            "symbol bounds need eps <= 1 and alpha^2 < 1/2 (eps = {}, alpha = {})",
            params.eps, params.alpha
        )));
    }
    let report = evaluate_symbol_bounds(grid, params);
    for (idx, name) in BOUND_NAMES.iter().enumerate() {
        if !report.bounds[*name].pass {
            let k: Vec<f64> = (0..grid.n())
                .map(|i| grid.wavenumber(i))
                .filter(|&k| bound_ratios(params, k)[idx] > 1.0 + 1e-12)
                .collect();
            return Err(Error::BoundViolation { name: name.to_string(), k });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(eps: f64, alpha: f64) -> SymbolParams {
        SymbolParams::new(eps, alpha).unwrap()
    }

    #[test]
    fn hand_values() {
        assert_eq!(p(0.3, 0.2).g(0.0), 1.0);
        assert!((p(1.0, 0.0).g(2f64.sqrt()) - 0.5).abs() < 1e-15);
        assert_eq!(p(0.0, 0.0).lmu(2.0), 12.0);
        assert_eq!(p(0.4, 0.1).lmu(1.0), 0.0);
        assert!((p(0.0, 0.3).lmur(0.0) - 4.0).abs() < 1e-15);
        assert!((p(0.5, 0.3).lmur(0.0) - 2.0 * (2.0 + 0.25 * 1.09)).abs() < 1e-14);
        assert!((p(0.5, 0.3).lv(0.0) - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(p(0.5, 0.3).ls(0.0), 1.0);
        assert_eq!(p(0.5, 0.3).lr(0.0), 1.0);
    }

    #[test]
    fn g_asymptote() {
        let pr = p(0.2, 0.1);
        let k = 100.0 / pr.eps;
        assert!((pr.g(k) * k * k / (2.0 / (pr.eps * pr.eps)) - 1.0).abs() < 0.01);
    }

    #[test]
    fn lmuc_minimum() {
        let k = 1.0 / 2f64.sqrt();
        assert!((lmuc(k) + 0.25).abs() < 1e-15);
        assert!(lmuc(k * 1.01) > -0.25 && lmuc(k * 0.99) > -0.25);
    }

    #[test]
    fn lmu_at_delta_two() {
        for &eps in &[0.1, 0.5, 1.0] {
            let pr = p(eps, 0.3);
            let mut k = 2.0;
            while k < 50.0 {
                assert!(pr.lmu(k) >= 4.0 - 1e-12);
                k += 0.01;
            }
        }
    }

    #[test]
    fn dispersion_roots_and_growth() {
        assert_eq!(dispersion_lambda(0.0, 0.1, 0.1), 0.0);
        let kc = critical_wavenumber(0.1, 0.1);
        assert!(dispersion_lambda(kc, 0.1, 0.1).abs() < 1e-16);
        for &eps in &[0.1, 0.05] {
            let max = (1..20_000)
                .map(|i| dispersion_lambda(i as f64 * 1e-5, eps, 0.1))
                .fold(f64::MIN, f64::max);
            let ratio = max / eps.powi(4);
            assert!(ratio > 0.1 && ratio < 1.0, "max λ / ε⁴ = {ratio}");
        }
    }

    #[test]
    fn cgl_rate_matches_dispersion_at_long_waves() {
        let (eps, alpha) = (0.1, 0.1);
        let kc = critical_wavenumber(eps, alpha);
        let k = 0.5 * kc;
        let rel = cgl_linear_rate(k, eps, alpha) / dispersion_lambda(k, eps, alpha) - 1.0;
        assert!(rel.abs() < k * k);
        // Exact linear rate at k = 2 differs from the long-wave formula.
        assert!((cgl_linear_rate(2.0, eps, alpha) + 2.0134).abs() < 1e-3);
    }

    #[test]
    fn trace_identity() {
        for &(eps, alpha) in &[(0.1, 0.1), (0.5, 0.5), (1.0, 0.0)] {
            let pr = p(eps, alpha);
            for &k in &[0.3, 1.0, 7.0, 55.0] {
                let (l1, l2) = pr.matrix_lm_eigenvalues(k);
                let tr = -pr.lmu(k) - pr.chi() / eps.powi(4) * pr.g(k) * pr.lr(k);
                assert!(((l1 + l2).re - tr).abs() <= 1e-10 * tr.abs());
                assert!((l1 + l2).im.abs() <= 1e-10 * tr.abs());
            }
        }
    }

    #[test]
    fn matrix_asymptote_in_scaled_eps() {
        // In scaled ε̂ the limit carries the factor χ/2.
        for &alpha in &[0.1, 0.5] {
            let pr = p(0.1, alpha);
            let k = 200.0 / pr.eps;
            let (l1, l2) = pr.matrix_lm_eigenvalues(k);
            let scale = pr.eps * pr.eps / (k * k);
            let target = 0.5 * pr.chi();
            for l in [l1, l2] {
                let z = l * scale;
                assert!((z.re + target).abs() < 0.01 * target);
                assert!((z.im.abs() - target * alpha).abs() < 0.01 * target);
            }
        }
    }

    #[test]
    fn alpha_zero_large_k_real() {
        let pr = p(0.3, 0.0);
        let (l1, l2) = pr.matrix_lm_eigenvalues(300.0);
        assert!(l1.im.abs() < 1e-9 * l1.norm() && l2.im.abs() < 1e-9 * l2.norm());
    }

    #[test]
    fn symbols_even_and_factorised() {
        let pr = p(0.37, 0.2);
        for &k in &[0.1, 0.9, 3.3, 40.0] {
            for kind in SymbolKind::ALL {
                assert_eq!(pr.eval(kind, k), pr.eval(kind, -k));
            }
            assert!((pr.lmu(k) - pr.g(k) * lmuc(k)).abs() <= 1e-14 * lmuc(k).abs().max(1.0));
            // G𝓛_r = 𝓛_s + (ε²k²/8)𝓛_{μ,r}
            let lhs = pr.g(k) * pr.lr(k);
            let rhs = pr.ls(k) + pr.eps * pr.eps * k * k / 8.0 * pr.lmur(k);
            assert!((lhs - rhs).abs() < 1e-12 * lhs.abs());
        }
    }

    #[test]
    fn f1_bounds_on_example_grid() {
        let g = Grid::new(2.0 * std::f64::consts::PI * 10.0, 256).unwrap();
        assert!(verify_symbol_bounds(&g, &p(0.5, 0.3)).unwrap().all_pass());
        assert!(verify_symbol_bounds(&g, &p(1.0, 0.7)).unwrap().all_pass());
        let r = evaluate_symbol_bounds(&g, &p(0.5, 0.3));
        let at_zero = (2.0 + 0.25 * 1.09) / 4.0;
        assert!(r.bounds["abs_Lmur_le_8"].max_ratio >= at_zero - 1e-15);
    }

    #[test]
    fn reciprocal_roundtrip() {
        let g = Grid::new(30.0, 64).unwrap();
        let t = SymbolTable::new(&g, &p(0.3, 0.2), SymbolKind::Lr);
        let f = SpectralField::from_fn(&g, |x| (0.4 * x).sin() + 0.2);
        let back = f.apply_table(&t.values).apply_table(&t.reciprocal());
        assert!((&back - &f).norm_l2_coeffs() < 1e-12 * f.norm_l2_coeffs());
    }
}
