//! Nonlinear maps of the scaled amplitude/phase system.
//!
//! For an even amplitude `s` and an odd phase derivative `μ` with zero mean:
//!
//! * `r₁(μ) = -(1/32)(4μ′ + ε²μ²)`
//! * `r₂ = (𝓛_s s - r₁(μ))/ε⁴`
//! * `F₀(s, μ) = α²χ((2 + ε²(1+α²))s² + s′μ/(1 + ε⁴α²s) - 2ε²α² s s″/(1 + ε⁴α²s)) - (1/4)Gμ² - (1/4)G(μ²)″`
//! * `F₁(s, μ) = α²χ((2 + ε²(1+α²))s² - α²ε⁴ s s′ μ/(1 + ε⁴α²s) - 2α²ε² s s″/(1 + ε⁴α²s))`
//! * `F₂(s, r, μ) = -(1/4)μ² - (1/4)(μ²)″ + (α²χ/2)(2μr′ + 4μ′r - 4μ′s - ε²μ″s′)` with `r = 𝓛_s s`
//! * `F₃(s, μ) = -α²χ((3/2)s² + (ε²/32)sμ² + (α²/2)ε⁴s³)`
//! * `F₄(s, μ) = -(α²χ/8)(2s′μ + sμ′)`
//! * `F₇(s, μ) = (ε²/8)(∂ + ε²μ/2)F₀′`
//! * `F₈(μ) = -(1/8)(∂ + ε²μ/2)(𝓛_μ μ + μμ′)`
//! * `F₆ = 𝓛_s(F₃ + F₄) + F₇ + F₈`
//!
//! The identity `F₀ = F₁ + G F₂` follows from `s′μ = G(μr′ + 2μ′r - 2μ′s - (ε²/2)μ″s′)`.
//!
//! Products are formed on the padded grid and truncated to `|n| ≤ N/3`. The
//! quotient by `1 + ε⁴α²s` is taken pointwise on the padded samples.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, Parity, SpectralField};
use crate::symbols::{SymbolParams, SymbolSet};

/// Smallest admissible `min_x |1 + ε⁴α²s(x)|`.
pub const DENOMINATOR_FLOOR: f64 = 1e-6;

/// An amplitude/phase pair `(s, μ)`.
#[derive(Debug, Clone)]
pub struct StateSM {
    pub s: SpectralField,
    pub mu: SpectralField,
}

impl StateSM {
    /// Pair on a common grid. `μ` must have zero mean.
    pub fn new(s: SpectralField, mu: SpectralField) -> Result<StateSM> {
        s.grid().ensure_same(mu.grid(), "StateSM")?;
        let mean = mu.coeff(0).norm();
        if mean > 1e-12 * mu.norm_l2_coeffs().max(1e-300) && mean > 1e-300 {
            return Err(Error::Parameter(format!("mu must have zero mean (|mu_0| = {mean:.3e})")));
        }
        Ok(StateSM { s, mu })
    }

    /// Zero state on `grid`.
    pub fn zeros(grid: &Arc<Grid>) -> StateSM {
        StateSM {
            s: SpectralField::zeros(grid).with_parity(Parity::Even),
            mu: SpectralField::zeros(grid).with_parity(Parity::Odd),
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.s.grid()
    }
}

/// Every nonlinear map, bound to one grid and parameter pair.
#[derive(Debug, Clone)]
pub struct Nonlinear {
    pub symbols: SymbolSet,
}

fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

fn out_parity(s: &SpectralField, mu: &SpectralField) -> Parity {
    if s.parity() != Parity::Odd && mu.parity() == Parity::Odd {
        Parity::Even
    } else {
        Parity::None
    }
}

impl Nonlinear {
    /// Sample all symbols for `grid` and `params`.
    pub fn new(grid: &Arc<Grid>, params: SymbolParams) -> Nonlinear {
        Nonlinear { symbols: SymbolSet::new(grid, params) }
    }

    pub fn params(&self) -> &SymbolParams {
        &self.symbols.params
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.symbols.grid
    }

    fn e2(&self) -> f64 {
        self.params().eps * self.params().eps
    }

    fn a2(&self) -> f64 {
        self.params().alpha * self.params().alpha
    }

    fn chi(&self) -> f64 {
        self.params().chi()
    }

    fn padded(&self, f: &SpectralField) -> Vec<f64> {
        self.grid().to_padded(f)
    }

    fn padded2(&self, a: &SpectralField, b: &SpectralField) -> (Vec<f64>, Vec<f64>) {
        self.grid().to_padded_pair(a, b)
    }

    fn field(&self, v: &[f64], parity: Parity) -> SpectralField {
        self.grid().from_padded(v).with_parity(parity)
    }

    /// `G f`.
    pub fn g(&self, f: &SpectralField) -> SpectralField {
        f.apply_table(&self.symbols.g)
    }

    /// `𝓛_s f`.
    pub fn ls(&self, f: &SpectralField) -> SpectralField {
        f.apply_table(&self.symbols.ls)
    }

    /// `𝓛_μ f`.
    pub fn lmu(&self, f: &SpectralField) -> SpectralField {
        f.apply_table(&self.symbols.lmu)
    }

    /// `𝓛_{μ,r} f`.
    pub fn lmur(&self, f: &SpectralField) -> SpectralField {
        f.apply_table(&self.symbols.lmur)
    }

    /// `r₁(μ) = -(1/32)(4μ′ + ε²μ²)`.
    pub fn r1(&self, mu: &SpectralField) -> SpectralField {
        let mut r = mu.derivative(1).scale(-0.125);
        r.axpy(-self.e2() / 32.0, &mu.square());
        r.with_parity(mu.parity().derivative(1))
    }

    /// Slaved amplitude `G r₁(μ)`, the zero of `r₂`.
    pub fn slaved_s(&self, mu: &SpectralField) -> SpectralField {
        self.g(&self.r1(mu))
    }

    /// `r = 𝓛_s s`.
    pub fn r(&self, s: &SpectralField) -> SpectralField {
        self.ls(s)
    }

    /// `r₂ = (𝓛_s s - r₁(μ))/ε⁴`. Requires `ε > 0`.
    pub fn r2_from_state(&self, st: &StateSM) -> Result<SpectralField> {
        let e2 = self.e2();
        if e2 == 0.0 {
            return Err(Error::Parameter("r2 is undefined at eps = 0".into()));
        }
        let d = &self.ls(&st.s) - &self.r1(&st.mu);
        Ok(d.scale(1.0 / (e2 * e2)))
    }

    /// Amplitude reconstructed from `(μ, r₂)`: `s = G(r₁(μ) + ε⁴r₂)`.
    pub fn s_from_r2(&self, mu: &SpectralField, r2: &SpectralField) -> SpectralField {
        let e4 = self.e2() * self.e2();
        let mut r = self.r1(mu);
        r.axpy(e4, r2);
        self.g(&r).with_parity(Parity::Even)
    }

    fn denominator(&self, s_samples: &[f64]) -> Result<Vec<f64>> {
        let a = self.e2() * self.e2() * self.a2();
        let den: Vec<f64> = s_samples.iter().map(|&x| 1.0 + a * x).collect();
        let min = den.iter().fold(f64::INFINITY, |m, d| m.min(d.abs()));
        if min < DENOMINATOR_FLOOR {
            return Err(Error::Denominator(min));
        }
        Ok(den)
    }

    /// `-(1/4)G(μ² + (μ²)″)`.
    fn g_mu2_terms(&self, mu2: &SpectralField) -> SpectralField {
        let g = &self.symbols.g;
        let k2: Vec<f64> = self.grid().wavenumbers().iter().map(|k| k * k).collect();
        let table: Vec<f64> = g.iter().zip(&k2).map(|(g, k2)| -0.25 * g * (1.0 - k2)).collect();
        mu2.apply_table(&table)
    }

    /// `F₀(s, μ)`.
    pub fn f0(&self, st: &StateSM) -> Result<SpectralField> {
        let (s, mu) = (&st.s, &st.mu);
        let (e2, a2, chi) = (self.e2(), self.a2(), self.chi());
        let (ss, ms) = self.padded2(s, mu);
        let (s1, s2) = self.padded2(&s.derivative(1), &s.derivative(2));
        let den = self.denominator(&ss)?;
        let c2 = 2.0 + e2 * (1.0 + a2);
        let poly: Vec<f64> = (0..ss.len())
            .map(|j| {
                let (s, m) = (ss[j], ms[j]);
                a2 * chi * (c2 * s * s + (s1[j] * m - 2.0 * e2 * a2 * s * s2[j]) / den[j])
            })
            .collect();
        let mu2 = self.field(&zip_map(&ms, &ms, |x, y| x * y), Parity::Even);
        let mut out = self.field(&poly, Parity::None);
        out = &out + &self.g_mu2_terms(&mu2);
        Ok(out.with_parity(out_parity(s, mu)))
    }

    /// `F₁(s, μ)`.
    pub fn f1(&self, st: &StateSM) -> Result<SpectralField> {
        let (s, mu) = (&st.s, &st.mu);
        let (e2, a2, chi) = (self.e2(), self.a2(), self.chi());
        let (ss, ms) = self.padded2(s, mu);
        let (s1, s2) = self.padded2(&s.derivative(1), &s.derivative(2));
        let den = self.denominator(&ss)?;
        let c2 = 2.0 + e2 * (1.0 + a2);
        let e4 = e2 * e2;
        let v: Vec<f64> = (0..ss.len())
            .map(|j| {
                let s = ss[j];
                chi * a2 * (c2 * s * s - (a2 * e4 * s1[j] * s * ms[j] + 2.0 * a2 * e2 * s * s2[j]) / den[j])
            })
            .collect();
        Ok(self.field(&v, out_parity(s, mu)))
    }

    /// `F₂(s, r, μ)` with `r = 𝓛_s s`.
    pub fn f2(&self, st: &StateSM) -> SpectralField {
        let (s, mu) = (&st.s, &st.mu);
        let (e2, a2, chi) = (self.e2(), self.a2(), self.chi());
        let r = self.r(s);
        let (ms, m1) = self.padded2(mu, &mu.derivative(1));
        let (m2, ss) = self.padded2(&mu.derivative(2), s);
        let (rs, r1) = self.padded2(&r, &r.derivative(1));
        let s1 = self.padded(&s.derivative(1));
        let v: Vec<f64> = (0..ms.len())
            .map(|j| 0.5 * chi * a2 * (2.0 * ms[j] * r1[j] + 4.0 * m1[j] * rs[j] - 4.0 * m1[j] * ss[j] - e2 * m2[j] * s1[j]))
            .collect();
        let mu2 = self.field(&zip_map(&ms, &ms, |x, y| x * y), Parity::Even);
        let table: Vec<f64> = self.grid().wavenumbers().iter().map(|k| -0.25 * (1.0 - k * k)).collect();
        let out = &self.field(&v, Parity::None) + &mu2.apply_table(&table);
        out.with_parity(out_parity(s, mu))
    }

    /// `F₃(s, μ)`.
    pub fn f3(&self, st: &StateSM) -> SpectralField {
        let (e2, a2, chi) = (self.e2(), self.a2(), self.chi());
        let (ss, ms) = self.padded2(&st.s, &st.mu);
        let v: Vec<f64> = ss
            .iter()
            .zip(&ms)
            .map(|(&s, &m)| -a2 * chi * (1.5 * s * s + e2 / 32.0 * s * m * m + 0.5 * a2 * e2 * e2 * s * s * s))
            .collect();
        self.field(&v, out_parity(&st.s, &st.mu))
    }

    /// `F₄(s, μ)`.
    pub fn f4(&self, st: &StateSM) -> SpectralField {
        let c = -self.a2() * self.chi() / 8.0;
        let (ss, ms) = self.padded2(&st.s, &st.mu);
        let (s1, m1) = self.padded2(&st.s.derivative(1), &st.mu.derivative(1));
        let v: Vec<f64> = (0..ss.len()).map(|j| c * (2.0 * s1[j] * ms[j] + ss[j] * m1[j])).collect();
        self.field(&v, out_parity(&st.s, &st.mu))
    }

    /// `(∂ + ε²μ/2) g` for a field `g`.
    fn transport(&self, mu: &SpectralField, g: &SpectralField) -> SpectralField {
        let (ms, gs) = self.padded2(mu, g);
        let half = 0.5 * self.e2();
        let prod = self.field(&zip_map(&ms, &gs, |m, g| half * m * g), Parity::None);
        let out = &g.derivative(1) + &prod;
        out.with_parity(mu.parity().product(g.parity()))
    }

    /// `F₇(s, μ) = (ε²/8)(∂ + ε²μ/2)F₀′`.
    pub fn f7(&self, st: &StateSM) -> Result<SpectralField> {
        let f0p = self.f0(st)?.derivative(1);
        Ok(self.transport(&st.mu, &f0p).scale(self.e2() / 8.0).with_parity(out_parity(&st.s, &st.mu)))
    }

    /// `𝓛_μ μ + μμ′`.
    fn ks_rhs_core(&self, mu: &SpectralField) -> SpectralField {
        let mm = mu.square().derivative(1).scale(0.5);
        (&self.lmu(mu) + &mm).with_parity(mu.parity())
    }

    /// `F₈(μ) = -(1/8)(∂ + ε²μ/2)(𝓛_μ μ + μμ′)`.
    pub fn f8(&self, mu: &SpectralField) -> SpectralField {
        let p = self.ks_rhs_core(mu);
        self.transport(mu, &p).scale(-0.125).with_parity(mu.parity().product(mu.parity()))
    }

    /// Nonlinear part of `F₈`: `F₈ + (1/8)(𝓛_μ μ)′`.
    pub fn f8_nonlinear(&self, mu: &SpectralField) -> SpectralField {
        let mut out = self.f8(mu);
        out.axpy(0.125, &self.lmu(mu).derivative(1));
        out
    }

    /// `F₆ = 𝓛_s(F₃ + F₄) + F₇ + F₈`.
    pub fn f6(&self, st: &StateSM) -> Result<SpectralField> {
        let f34 = &self.f3(st) + &self.f4(st);
        let mut out = self.ls(&f34);
        out = &out + &self.f7(st)?;
        out = &out + &self.f8(&st.mu);
        Ok(out.with_parity(out_parity(&st.s, &st.mu)))
    }

    /// Full phase forcing `F = F₀ + χ𝓛_{μ,r} r₂`.
    pub fn f_total(&self, st: &StateSM) -> Result<SpectralField> {
        let r2 = self.r2_from_state(st)?;
        let out = &self.f0(st)? + &self.lmur(&r2).scale(self.chi());
        Ok(out.with_parity(out_parity(&st.s, &st.mu)))
    }

    /// Relative residual `‖F₀ - F₁ - G F₂‖/(‖F₁‖ + ‖F₂‖)` of the
    /// decomposition identity, in coefficient `l²`.
    pub fn decomposition_residual(&self, st: &StateSM) -> Result<DecompositionResidual> {
        let f0 = self.f0(st)?;
        let f1 = self.f1(st)?;
        let f2 = self.f2(st);
        let diff = &(&f0 - &f1) - &self.g(&f2);
        let scale = f1.norm_l2_coeffs() + f2.norm_l2_coeffs();
        let abs = diff.norm_l2_coeffs();
        Ok(DecompositionResidual { absolute: abs, relative: if scale > 0.0 { abs / scale } else { abs } })
    }
}

/// Residual of `F₀ = F₁ + G F₂`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DecompositionResidual {
    pub absolute: f64,
    pub relative: f64,
}

/// Unscaled slaved amplitude `s₁(μ) = -(1/2)G₁(μ′ + μ²)` with
/// `G₁(k) = 1/(1 + k²/2)`.
pub fn s1_unscaled(mu: &SpectralField) -> SpectralField {
    let mut f = mu.derivative(1);
    f = &f + &mu.square();
    f.apply_symbol(|k| -0.5 / (1.0 + 0.5 * k * k)).with_parity(mu.parity().derivative(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{rng_from_seed, structured_field, FieldSpec};

    fn setup(eps: f64, alpha: f64, l: f64, n: usize) -> Nonlinear {
        let g = Grid::new(l, n).unwrap();
        Nonlinear::new(&g, SymbolParams { eps, alpha })
    }

    fn random_state(nl: &Nonlinear, seed: u64, amp: f64) -> StateSM {
        let g = nl.grid();
        let top = g.n() / 6;
        let mut rng = rng_from_seed(seed);
        let s = structured_field(g, &FieldSpec::new(3.0, 2.0).amplitude(amp).parity(Parity::Even).max_mode(top), &mut rng);
        let mu = structured_field(g, &FieldSpec::new(3.0, 2.0).amplitude(amp).parity(Parity::Odd).max_mode(top), &mut rng);
        StateSM::new(s, mu).unwrap()
    }

    fn close(a: &SpectralField, b: &SpectralField, tol: f64) {
        let d = (a - b).norm_l2_coeffs();
        assert!(d <= tol * b.norm_l2_coeffs().max(1e-300), "difference {d:.3e}");
    }

    #[test]
    fn zero_state_gives_zero() {
        let nl = setup(0.5, 0.3, 20.0, 64);
        let z = StateSM::zeros(nl.grid());
        for f in [nl.f0(&z).unwrap(), nl.f1(&z).unwrap(), nl.f2(&z), nl.f3(&z), nl.f4(&z), nl.f6(&z).unwrap(), nl.r1(&z.mu)] {
            assert_eq!(f.norm_l2_coeffs(), 0.0);
        }
    }

    #[test]
    fn r1_single_mode() {
        let nl = setup(1.0, 0.0, 20.0, 64);
        let q = nl.grid().q();
        let mu = SpectralField::from_fn(nl.grid(), |x| (q * x).sin());
        let expect = SpectralField::from_fn(nl.grid(), |x| -q / 8.0 * (q * x).cos() - (0.5 - 0.5 * (2.0 * q * x).cos()) / 32.0);
        close(&nl.r1(&mu), &expect, 1e-13);
        let nl0 = setup(0.0, 0.0, 20.0, 64);
        let expect0 = SpectralField::from_fn(nl.grid(), |x| -q / 8.0 * (q * x).cos());
        close(&nl0.r1(&mu), &expect0, 1e-13);
    }

    #[test]
    fn s1_on_unit_mode() {
        let g = Grid::new(2.0 * std::f64::consts::PI, 64).unwrap();
        let mu = SpectralField::from_fn(&g, |x| 1e-6 * x.sin());
        let s = s1_unscaled(&mu);
        assert!((s.coeff(1).re - (-1e-6 / 3.0) * 0.5).abs() < 1e-15);
    }

    #[test]
    fn decomposition_identity_holds() {
        for &(eps, alpha) in &[(0.1, 0.0), (0.5, 0.3), (1.0, 0.7)] {
            let nl = setup(eps, alpha, 30.0, 128);
            for seed in 0..5 {
                let st = random_state(&nl, seed, 0.3);
                let r = nl.decomposition_residual(&st).unwrap();
                assert!(r.relative < 1e-12, "eps {eps} alpha {alpha}: {r:?}");
            }
        }
    }

    #[test]
    fn alpha_zero_kills_alpha_terms() {
        let nl = setup(0.4, 0.0, 30.0, 128);
        let st = random_state(&nl, 3, 0.3);
        assert_eq!(nl.f3(&st).norm_l2_coeffs(), 0.0);
        assert_eq!(nl.f4(&st).norm_l2_coeffs(), 0.0);
        assert_eq!(nl.f1(&st).unwrap().norm_l2_coeffs(), 0.0);
        let mu2 = st.mu.square();
        let expect = &nl.g(&mu2).scale(-0.25) - &nl.g(&mu2.derivative(2)).scale(0.25);
        close(&nl.f0(&st).unwrap(), &expect, 1e-13);
    }

    #[test]
    fn f3_hand_value() {
        let nl = setup(0.0, 0.5, 20.0, 64);
        let q = nl.grid().q();
        let s = SpectralField::from_fn(nl.grid(), |x| (q * x).cos()).with_parity(Parity::Even);
        let mu = SpectralField::from_fn(nl.grid(), |x| (q * x).sin()).with_parity(Parity::Odd);
        let st = StateSM::new(s, mu).unwrap();
        let expect = SpectralField::from_fn(nl.grid(), |x| -0.25 * 3.2 * 1.5 * (q * x).cos().powi(2));
        close(&nl.f3(&st), &expect, 1e-13);
    }

    #[test]
    fn f6_single_mode_at_eps_zero() {
        let nl = setup(0.0, 0.0, 20.0, 64);
        let q = nl.grid().q();
        let mu = SpectralField::from_fn(nl.grid(), |x| (q * x).sin()).with_parity(Parity::Odd);
        let st = StateSM::new(SpectralField::zeros(nl.grid()), mu).unwrap();
        let lq = q.powi(4) - q * q;
        let expect = SpectralField::from_fn(nl.grid(), |x| -0.125 * (lq * q * (q * x).cos() + q * q * (2.0 * q * x).cos()));
        close(&nl.f6(&st).unwrap(), &expect, 1e-10);
    }

    #[test]
    fn f6_linear_part() {
        let nl = setup(0.3, 0.2, 30.0, 128);
        let st = random_state(&nl, 11, 1e-5);
        let lin = nl.lmu(&st.mu).derivative(1).scale(-0.125);
        close(&nl.f6(&st).unwrap(), &lin, 0.01);
    }

    #[test]
    fn outputs_even_for_even_odd_state() {
        let nl = setup(0.5, 0.3, 30.0, 128);
        let st = random_state(&nl, 5, 0.3);
        for f in [nl.f0(&st).unwrap(), nl.f1(&st).unwrap(), nl.f2(&st), nl.f3(&st), nl.f4(&st), nl.f6(&st).unwrap(), nl.f7(&st).unwrap(), nl.f8(&st.mu)] {
            assert!(f.parity_defect(Parity::Even) < 1e-12);
            assert!(f.reality_defect() < 1e-14 * f.norm_l2_coeffs().max(1.0));
        }
    }

    #[test]
    fn r2_vanishes_on_slaved_state_and_total_forcing() {
        let nl = setup(0.5, 0.3, 30.0, 128);
        let st = random_state(&nl, 8, 0.3);
        let slaved = StateSM::new(nl.slaved_s(&st.mu), st.mu.clone()).unwrap();
        assert!(nl.r2_from_state(&slaved).unwrap().norm_l2_coeffs() < 1e-13);
        close(&nl.f_total(&slaved).unwrap(), &nl.f0(&slaved).unwrap(), 1e-12);
        let r2 = nl.r2_from_state(&st).unwrap();
        let diff = &nl.f_total(&st).unwrap() - &nl.f0(&st).unwrap();
        close(&diff, &nl.lmur(&r2).scale(nl.params().chi()), 1e-10);
        close(&nl.s_from_r2(&st.mu, &r2), &st.s, 1e-12);
    }

    #[test]
    fn denominator_guard() {
        let nl = setup(1.0, 0.7, 20.0, 64);
        let s = SpectralField::from_fn(nl.grid(), |_| -1.0 / 0.49);
        let st = StateSM::new(s, SpectralField::zeros(nl.grid())).unwrap();
        assert!(matches!(nl.f0(&st), Err(Error::Denominator(_))));
    }
}
