//! The antisymmetric comparison function φ and the coercivity estimates of
//! the quadratic form `(v, v)_{γφ} = ∫ v(𝓛_μ + γφ′)v`.
//!
//! φ has coefficients `φ₀ = 0`, `φ_n = 4i/(qn)` for `1 ≤ |n| ≤ 2M` and
//! `φ_n = 4i f(|n|/(2M) - 1)/(qn)` beyond, where `M` is the smallest integer
//! strictly larger than `L^{7/5}/2` and `f(k) = exp(-k²)`. With
//! `ψ_n = -iqnφ_n`, `τ(k)² = (1/2)(1+k⁴)/(1+ε²k²/2)` and
//! `τ₁(k)² = (1/2)k⁴/(1+ε²k²/2)`, the operator `Γ` has Hilbert–Schmidt norm
//! `‖Γ‖²_HS = Σ_{0<m<k} ((ψ_{k+m} - ψ_{k-m})/(τ_k τ_m))²`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::grid::{Grid, Parity, SpectralField};
use crate::norms::norm_linf;
use crate::random::{trial_rng, structured_field, FieldSpec};
use crate::symbols::SymbolParams;

/// Largest admissible contribution of the modes beyond the grid to `(φ, φ)`.
pub const PHI_TAIL_TOLERANCE: f64 = 1e-10;
/// Largest truncation index tried by [`gamma_hs_norm`].
pub const HS_MAX_TRUNCATION: usize = 1 << 16;

/// Cutoff profile `f(k) = exp(-k²)`.
pub fn profile(k: f64) -> f64 {
    (-k * k).exp()
}

/// Derivative of the cutoff profile.
pub fn profile_derivative(k: f64) -> f64 {
    -2.0 * k * (-k * k).exp()
}

/// Smallest integer strictly larger than `L^{7/5}/2`.
pub fn phi_m(l: f64) -> usize {
    let h = 0.5 * l.powf(1.4);
    (h.floor() as usize) + 1
}

/// `ψ_n / 4`: one up to `2M`, the profile beyond.
fn psi_profile(n: usize, m: usize) -> f64 {
    if n <= 2 * m {
        1.0
    } else {
        profile(n as f64 / (2 * m) as f64 - 1.0)
    }
}

/// The comparison function on a grid.
#[derive(Debug, Clone)]
pub struct PhiFunction {
    pub phi: SpectralField,
    pub m: usize,
    pub l: f64,
    /// Name of the cutoff profile.
    pub profile: &'static str,
    /// Contribution of the modes beyond the grid to `(φ, φ)`.
    pub tail: f64,
}

impl PhiFunction {
    pub fn grid(&self) -> &Arc<Grid> {
        self.phi.grid()
    }

    /// `ψ_n = -iqnφ_n` for `n ≥ 0`.
    pub fn psi(&self, n: usize) -> f64 {
        if n == 0 {
            0.0
        } else {
            4.0 * psi_profile(n, self.m)
        }
    }

    /// `(φ, φ)` from the coefficients on the grid.
    pub fn norm_sq(&self) -> f64 {
        inner(&self.phi, &self.phi)
    }

    /// `(φ, 𝓛_μ φ)` at the given `ε`.
    pub fn lmu_energy(&self, eps: f64) -> f64 {
        lmu_form(&self.phi, &self.phi, eps)
    }

    /// `‖φ′‖_{L∞}`.
    pub fn phi_prime_sup(&self) -> f64 {
        norm_linf(&self.phi.derivative(1))
    }
}

/// `Σ_{|n| ≥ N/2} |φ_n|²·L` computed from the analytic coefficients.
fn phi_tail(l: f64, n: usize, m: usize) -> f64 {
    let q = 2.0 * PI / l;
    let mut acc = 0.0;
    let mut j = n / 2;
    loop {
        let c = 4.0 * psi_profile(j, m) / (q * j as f64);
        let term = 2.0 * l * c * c;
        acc += term;
        if term < 1e-30 * acc.max(1e-300) || j > 1 << 40 {
            break;
        }
        j += 1;
    }
    acc
}

/// Build φ for period `L` on an `N`-point grid.
pub fn build_phi(l: f64, n: usize) -> Result<PhiFunction> {
    if l < 2.0 * PI - 1e-12 {
        return Err(Error::Parameter(format!("L = {l} must be at least 2*pi")));
    }
    let grid = Grid::new(l, n)?;
    let m = phi_m(l);
    let tail = phi_tail(l, n, m);
    if tail >= PHI_TAIL_TOLERANCE {
        return Err(Error::Resolution(format!(
            "N = {n} leaves {tail:.3e} of (phi, phi) beyond the grid at L = {l} (M = {m})"
        )));
    }
    let q = grid.q();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
    for j in 1..n / 2 {
        let c = Complex64::new(0.0, 4.0 * psi_profile(j, m) / (q * j as f64));
        coeffs[j] = c;
        coeffs[n - j] = c.conj();
    }
    Ok(PhiFunction { phi: SpectralField::from_coeffs(grid, coeffs, Parity::Odd), m, l, profile: "exp(-k^2)", tail })
}

/// φ on the smallest power-of-two grid meeting the tail criterion.
pub fn build_phi_auto(l: f64) -> Result<PhiFunction> {
    let m = phi_m(l);
    let mut n = 64;
    while phi_tail(l, n, m) >= PHI_TAIL_TOLERANCE {
        n *= 2;
        if n > 1 << 24 {
            return Err(Error::Resolution(format!("no grid resolves phi at L = {l}")));
        }
    }
    build_phi(l, n)
}

/// `(v, w) = ∫ v w` by Parseval.
pub fn inner(v: &SpectralField, w: &SpectralField) -> f64 {
    let l = v.grid().length();
    l * v.coeffs().iter().zip(w.coeffs()).map(|(a, b)| (a * b.conj()).re).sum::<f64>()
}

/// `∫ v 𝓛_μ w` by Parseval.
pub fn lmu_form(v: &SpectralField, w: &SpectralField, eps: f64) -> f64 {
    let sym = SymbolParams { eps, alpha: 0.0 };
    let g = v.grid();
    g.length()
        * (0..g.n())
            .map(|i| sym.lmu(g.wavenumber(i)) * (v.coeffs()[i] * w.coeffs()[i].conj()).re)
            .sum::<f64>()
}

/// `(𝓛_v v, 𝓛_v v)` with `𝓛_v(k)² = (1/3)(1+k⁴)/(1+ε²k²/2)`.
pub fn lv_energy(v: &SpectralField, eps: f64) -> f64 {
    let sym = SymbolParams { eps, alpha: 0.0 };
    let g = v.grid();
    g.length() * (0..g.n()).map(|i| sym.lv(g.wavenumber(i)).powi(2) * v.coeffs()[i].norm_sqr()).sum::<f64>()
}

/// `(v, w)_{γφ} = ∫ v 𝓛_μ w + γ∫φ′ v w`. The second integral is evaluated on
/// the padded grid, which is exact for fields on the grid of φ.
pub fn inner_gamma_phi(v: &SpectralField, w: &SpectralField, gamma: f64, eps: f64, phi: &PhiFunction) -> Result<f64> {
    let g = phi.grid();
    g.ensure_same(v.grid(), "inner_gamma_phi: v")?;
    g.ensure_same(w.grid(), "inner_gamma_phi: w")?;
    let dphi = g.to_padded(&phi.phi.derivative(1));
    let (vs, ws) = g.to_padded_pair(v, w);
    let dx = g.length() / dphi.len() as f64;
    let pot: f64 = dphi.iter().zip(vs.iter().zip(&ws)).map(|(p, (a, b))| p * a * b).sum::<f64>() * dx;
    Ok(lmu_form(v, w, eps) + gamma * pot)
}

/// `c_v² = (4/3)(√(ε⁴+4) - 2)/ε⁴`, the minimum of `𝓛_v(k)²` over `k`.
pub fn c_v_sq(eps: f64) -> f64 {
    let e4 = eps.powi(4);
    if e4 < 1e-6 {
        // Series of the closed form; avoids cancellation.
        return (1.0 - e4 / 16.0 + e4 * e4 / 256.0) / 3.0;
    }
    4.0 / 3.0 * ((e4 + 4.0).sqrt() - 2.0) / e4
}

/// Truncated Hilbert–Schmidt sum with a rigorous bound on its tail.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HsReport {
    pub l: f64,
    pub eps: f64,
    pub m: usize,
    pub q: f64,
    /// Truncation index: the sum runs over `0 < m < k ≤ k_trunc`.
    pub k_trunc: usize,
    pub sum: f64,
    pub tail_bound: f64,
    /// `(80π/3)/(q⁷M⁵) + (440/9)/(q⁸M⁶)`.
    pub envelope: f64,
    /// `sum + tail_bound < 1/16`.
    pub below_sixteenth: bool,
    /// `sum + tail_bound ≤ envelope`.
    pub below_envelope: bool,
}

/// `(80π/3)/(q⁷M⁵) + (440/9)/(q⁸M⁶)`.
pub fn hs_envelope(q: f64, m: usize) -> f64 {
    let m = m as f64;
    80.0 * PI / 3.0 / (q.powi(7) * m.powi(5)) + 440.0 / 9.0 / (q.powi(8) * m.powi(6))
}

fn inv_tau_sq(k: f64, eps: f64) -> f64 {
    2.0 * (1.0 + 0.5 * eps * eps * k * k) / (1.0 + k.powi(4))
}

/// `∫_x^∞ dk/τ₁(qk)²`.
fn tau1_tail(x: f64, q: f64, eps: f64) -> f64 {
    2.0 / (3.0 * q.powi(4) * x.powi(3)) + eps * eps / (q * q * x)
}

/// `Σ_{0<m<k≤K}` of the summand and the bound on the pairs with `k > K`.
pub fn gamma_hs_sum(l: f64, eps: f64, k_trunc: usize, exec: Execution) -> (f64, f64) {
    let q = 2.0 * PI / l;
    let m0 = phi_m(l);
    let it: Vec<f64> = (0..=k_trunc).map(|k| inv_tau_sq(q * k as f64, eps)).collect();
    let psi = |n: usize| 4.0 * psi_profile(n, m0);
    let rows = exec.map(k_trunc + 1, |k| {
        if k < 2 {
            return 0.0;
        }
        let start = if k + 1 > 2 * m0 { 1 } else { 2 * m0 + 1 - k };
        let mut acc = 0.0;
        for (m, w) in it.iter().enumerate().take(k).skip(start) {
            let d = psi(k + m) - psi(k - m);
            acc += d * d * w;
        }
        acc * it[k]
    });
    let sum: f64 = rows.into_iter().sum();
    let kf = k_trunc as f64;
    let e2 = eps * eps;
    // Pairs with K < m < k, bounded by the double integral.
    let far = 16.0
        * (2.0 / (9.0 * q.powi(8) * kf.powi(6))
            + 2.0 * e2 / (3.0 * q.powi(6) * kf.powi(4))
            + e2 * e2 / (2.0 * q.powi(4) * kf * kf));
    // Pairs with m ≤ K < k using |ψ_{k+m} - ψ_{k-m}| ≤ 4 min(1, m/M).
    let weights: f64 = (1..=k_trunc)
        .map(|m| {
            let w = (m as f64 / m0 as f64).min(1.0);
            w * w * it[m]
        })
        .sum();
    let crude = 16.0 * weights * tau1_tail(kf, q, eps) + far;
    // Split at m = K/2. Below it, k - m > K/2 + 1 > 2M puts both ψ values in
    // [0, 4f((K/2 + 1)/(2M) - 1)]. Above it, |ψ_{k+m} - ψ_{k-m}| ≤ 4 and both
    // sums are bounded by integrals.
    let half = k_trunc / 2;
    let refined = if half + 1 > 2 * m0 {
        let f = profile((half + 1) as f64 / (2 * m0) as f64 - 1.0);
        let low: f64 = it[1..=half].iter().sum();
        16.0 * (f * f * low + tau1_tail(half as f64, q, eps)) * tau1_tail(kf, q, eps)
    } else {
        f64::INFINITY
    };
    (sum, crude.min(refined))
}

/// `‖Γ‖²_HS` with the truncation doubled until the tail bound is below 1% of
/// the computed sum.
pub fn gamma_hs_norm(l: f64, eps: f64, exec: Execution) -> Result<HsReport> {
    let q = 2.0 * PI / l;
    let m = phi_m(l);
    let mut k = (8 * m).max(256).next_power_of_two();
    loop {
        let (sum, tail) = gamma_hs_sum(l, eps, k, exec);
        if tail < 0.01 * sum {
            let envelope = hs_envelope(q, m);
            return Ok(HsReport {
                l,
                eps,
                m,
                q,
                k_trunc: k,
                sum,
                tail_bound: tail,
                envelope,
                below_sixteenth: sum + tail < 1.0 / 16.0,
                below_envelope: sum + tail <= envelope,
            });
        }
        if k >= HS_MAX_TRUNCATION {
            return Err(Error::Truncation(format!(
                "HS tail bound {tail:.3e} not below 1% of {sum:.3e} at k = {k} (L = {l}, eps = {eps})"
            )));
        }
        k *= 2;
    }
}

/// The three stated upper limits on `ε` and the smallest of them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpsBounds {
    /// `L^{-2/5}`.
    pub power: f64,
    /// `(πL^{2/5})^{-1}`.
    pub pi_power: f64,
    /// `1/(Mq)`.
    pub inverse_mq: f64,
    pub binding: f64,
    pub binding_name: String,
}

/// Limits on `ε` for period `L`.
pub fn eps_bounds(l: f64) -> EpsBounds {
    let q = 2.0 * PI / l;
    let power = l.powf(-0.4);
    let pi_power = 1.0 / (PI * l.powf(0.4));
    let inverse_mq = 1.0 / (phi_m(l) as f64 * q);
    let mut c: [(&'static str, f64); 3] = [("L^(-2/5)", power), ("(pi L^(2/5))^(-1)", pi_power), ("1/(Mq)", inverse_mq)];
    c.sort_by(|a, b| a.1.total_cmp(&b.1));
    EpsBounds { power, pi_power, inverse_mq, binding: c[0].1, binding_name: c[0].0.to_string() }
}

/// Result of the randomized coercivity test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoercivityReport {
    pub l: f64,
    pub eps: f64,
    pub gamma: f64,
    pub trials: usize,
    pub bounds: EpsBounds,
    /// `min (v,v)_{γφ}/((3/4)(𝓛_v v, 𝓛_v v)) - 1` over trials.
    pub min_lower_slack: f64,
    /// `min 1 - (v,v)_{γφ}/(‖φ′‖_∞(v,v) + (v″,v″))` over trials.
    pub min_upper_slack: f64,
    /// `min (𝓛_v v, 𝓛_v v)/(c_v²(v,v)) - 1` over trials.
    pub min_cv_slack: f64,
    pub lower_violations: usize,
    pub upper_violations: usize,
    pub cv_violations: usize,
    /// Both inequalities for `v = φ`.
    pub phi_itself_ok: bool,
}

impl CoercivityReport {
    pub fn pass(&self) -> bool {
        self.lower_violations == 0 && self.upper_violations == 0 && self.cv_violations == 0 && self.phi_itself_ok
    }
}

struct Slacks {
    lower: f64,
    upper: f64,
    cv: f64,
}

fn slacks(v: &SpectralField, gamma: f64, eps: f64, phi: &PhiFunction, sup: f64) -> Result<Slacks> {
    let form = inner_gamma_phi(v, v, gamma, eps, phi)?;
    let lv = lv_energy(v, eps);
    let vv = inner(v, v);
    let v2 = v.derivative(2);
    let upper = sup * vv + inner(&v2, &v2);
    Ok(Slacks { lower: form / (0.75 * lv) - 1.0, upper: 1.0 - form / upper, cv: lv / (c_v_sq(eps) * vv) - 1.0 })
}

/// Random antisymmetric test field number `i`. Three families alternate:
/// modes below `k = 1.5`, a broad spectrum, and a spectrum centred on the
/// cutoff region of φ.
fn test_field(phi: &PhiFunction, seed: u64, i: usize) -> SpectralField {
    let g = phi.grid();
    let q = g.q();
    let third = g.n() / 3;
    let mut rng = trial_rng(seed, i as u64);
    let spec = match i % 3 {
        0 => FieldSpec::new(1.0, 1.0).max_mode(((1.5 / q).floor() as usize).clamp(1, third)),
        1 => FieldSpec::new(2.0, 2.0).max_mode(third),
        _ => FieldSpec::new(3.0, 2.0 * phi.m as f64 * q).max_mode((6 * phi.m).min(third)),
    };
    structured_field(g, &spec.parity(Parity::Odd), &mut rng)
}

/// Check `(3/4)(𝓛_v v, 𝓛_v v) ≤ (v, v)_{γφ} ≤ ‖φ′‖_∞(v, v) + (v″, v″)` and
/// `(𝓛_v v, 𝓛_v v) ≥ c_v²(v, v)` on `trials` random antisymmetric fields.
/// `eps = None` selects the binding limit on `ε`.
pub fn coercivity_check(
    trials: usize,
    l: f64,
    eps: Option<f64>,
    gamma: f64,
    seed: u64,
    exec: Execution,
) -> Result<CoercivityReport> {
    if !(0.25..=1.0).contains(&gamma) {
        return Err(Error::Parameter(format!("gamma = {gamma} must lie in [1/4, 1]")));
    }
    let bounds = eps_bounds(l);
    let eps = eps.unwrap_or(bounds.binding);
    if eps > bounds.binding * (1.0 + 1e-12) {
        return Err(Error::Parameter(format!(
            "eps = {eps} exceeds the binding limit {} = {}",
            bounds.binding_name, bounds.binding
        )));
    }
    let phi = build_phi_auto(l)?;
    let sup = phi.phi_prime_sup();
    let own = slacks(&phi.phi, gamma, eps, &phi, sup)?;
    let results = exec.map(trials, |i| slacks(&test_field(&phi, seed, i), gamma, eps, &phi, sup));
    let mut rep = CoercivityReport {
        l,
        eps,
        gamma,
        trials,
        bounds,
        min_lower_slack: f64::INFINITY,
        min_upper_slack: f64::INFINITY,
        min_cv_slack: f64::INFINITY,
        lower_violations: 0,
        upper_violations: 0,
        cv_violations: 0,
        phi_itself_ok: own.lower >= 0.0 && own.upper >= 0.0,
    };
    for r in results {
        let r = r?;
        rep.min_lower_slack = rep.min_lower_slack.min(r.lower);
        rep.min_upper_slack = rep.min_upper_slack.min(r.upper);
        rep.min_cv_slack = rep.min_cv_slack.min(r.cv);
        rep.lower_violations += usize::from(r.lower < 0.0);
        rep.upper_violations += usize::from(r.upper < 0.0);
        rep.cv_violations += usize::from(r.cv < -1e-12);
    }
    Ok(rep)
}

/// Size of φ at one period.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PhiSizes {
    pub l: f64,
    pub m: usize,
    pub n: usize,
    pub phi_norm_sq: f64,
    /// `(4/3)L³`.
    pub phi_norm_sq_bound: f64,
    /// `(φ, φ)_{γφ} = (φ, 𝓛_μ φ)`.
    pub phi_phi_phi: f64,
    /// `(φ, φ)_{γφ}/L^{16/5}`.
    pub k_ratio: f64,
    pub phi_prime_sup: f64,
    /// `‖φ′‖_∞/L^{7/5}`.
    pub phi_prime_ratio: f64,
}

/// Sizes of φ at period `L` and the given `ε`.
pub fn phi_sizes(l: f64, eps: f64) -> Result<PhiSizes> {
    let phi = build_phi_auto(l)?;
    let pp = phi.lmu_energy(eps);
    let sup = phi.phi_prime_sup();
    Ok(PhiSizes {
        l,
        m: phi.m,
        n: phi.grid().n(),
        phi_norm_sq: phi.norm_sq(),
        phi_norm_sq_bound: 4.0 / 3.0 * l.powi(3),
        phi_phi_phi: pp,
        k_ratio: pp / l.powf(3.2),
        phi_prime_sup: sup,
        phi_prime_ratio: sup / l.powf(1.4),
    })
}

/// Empirical constants over a sweep of periods, each at its binding `ε`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KSweep {
    pub sizes: Vec<PhiSizes>,
    /// `max (φ, φ)_{γφ}/L^{16/5}`.
    pub k_empirical: f64,
    /// `max ‖φ′‖_∞/L^{7/5}`.
    pub phi_prime_constant: f64,
}

/// Sweep `L` and report the empirical constants.
pub fn k_sweep(ls: &[f64], exec: Execution) -> Result<KSweep> {
    let sizes: Vec<PhiSizes> = exec.map_slice(ls, |&l| phi_sizes(l, eps_bounds(l).binding)).into_iter().collect::<Result<_>>()?;
    let k_empirical = sizes.iter().fold(0.0f64, |m, s| m.max(s.k_ratio));
    let phi_prime_constant = sizes.iter().fold(0.0f64, |m, s| m.max(s.phi_prime_ratio));
    Ok(KSweep { sizes, k_empirical, phi_prime_constant })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_constraints() {
        assert_eq!(profile(0.0), 1.0);
        assert_eq!(profile_derivative(0.0), 0.0);
        let ks: Vec<f64> = (0..4000).map(|i| i as f64 * 0.005).collect();
        assert!(ks.windows(2).all(|w| profile(w[1]) <= profile(w[0])));
        let sup = ks.iter().fold(0.0f64, |m, &k| m.max(profile_derivative(k).abs()));
        assert!((sup - (2.0 / std::f64::consts::E).sqrt()).abs() < 1e-4 && sup < 1.0);
        let integral: f64 = ks.iter().map(|&k| (1.0 + k).powi(2) * profile(k).powi(2) * 0.005).sum();
        assert!(integral.is_finite() && integral < 2.0);
    }

    #[test]
    fn m_is_strictly_above_half_power() {
        for &l in &[2.0 * PI, 10.0, 50.0] {
            let m = phi_m(l) as f64;
            assert!(m > 0.5 * l.powf(1.4) && m - 1.0 <= 0.5 * l.powf(1.4));
        }
    }

    #[test]
    fn phi_is_odd_and_bounded() {
        for &l in &[2.0 * PI, 10.0, 50.0] {
            let phi = build_phi_auto(l).unwrap();
            assert!(phi.phi.parity_defect(Parity::Odd) < 1e-12);
            assert!(phi.norm_sq() <= 4.0 / 3.0 * l.powi(3));
            let q = phi.grid().q();
            assert!((phi.phi.coeff(1) - Complex64::new(0.0, 4.0 / q)).norm() < 1e-14);
        }
    }

    #[test]
    fn insufficient_grid_is_rejected() {
        assert!(matches!(build_phi(50.0, 256), Err(Error::Resolution(_))));
    }

    #[test]
    fn gamma_form_identities() {
        let phi = build_phi_auto(10.0).unwrap();
        let eps = 0.1;
        let z = SpectralField::zeros(phi.grid());
        assert_eq!(inner_gamma_phi(&z, &z, 0.5, eps, &phi).unwrap(), 0.0);
        let v = test_field(&phi, 1, 1);
        let g = phi.grid();
        let sym = SymbolParams { eps, alpha: 0.0 };
        let direct: f64 = (1..g.n() / 2).map(|n| sym.lmu(g.q() * n as f64) * v.coeff(n as i64).norm_sqr()).sum::<f64>() * 2.0 * g.length();
        let form = inner_gamma_phi(&v, &v, 0.0, eps, &phi).unwrap();
        assert!((form - direct).abs() < 1e-10 * direct.abs());
        let pp = phi.lmu_energy(eps);
        for gamma in [0.25, 1.0] {
            let f = inner_gamma_phi(&phi.phi, &phi.phi, gamma, eps, &phi).unwrap();
            assert!((f - pp).abs() < 1e-10 * pp, "{f} vs {pp}");
        }
    }

    #[test]
    fn hs_support_is_above_two_m() {
        let l = 10.0;
        let m = phi_m(l);
        for (k, mm) in [(m + 1, m - 1), (2 * m - 1, 1), (m + 3, m - 3)] {
            assert_eq!(psi_profile(k + mm, m) - psi_profile(k - mm, m), 0.0);
        }
    }

    #[test]
    fn hs_norm_small_pi() {
        let r = gamma_hs_norm(4.0 * PI, 0.0, Execution::Sequential).unwrap();
        assert!(r.below_sixteenth && r.below_envelope, "{r:?}");
        let b = eps_bounds(4.0 * PI);
        let r = gamma_hs_norm(4.0 * PI, b.binding, Execution::Parallel).unwrap();
        assert!(r.below_sixteenth && r.below_envelope, "{r:?}");
        assert_eq!(b.binding_name, "1/(Mq)");
    }

    #[test]
    fn cv_limit() {
        assert!((c_v_sq(1e-3) - 1.0 / 3.0).abs() < 1e-12);
        let e: f64 = 0.05;
        let e4 = e.powi(4);
        assert!((c_v_sq(e) - 4.0 / 3.0 * ((e4 + 4.0).sqrt() - 2.0) / e4).abs() < 1e-9);
        let sym = SymbolParams { eps: 0.7, alpha: 0.0 };
        let min = (1..20000).map(|i| sym.lv(i as f64 * 1e-3).powi(2)).fold(f64::INFINITY, f64::min);
        assert!((min - c_v_sq(0.7)).abs() < 1e-6);
    }

    #[test]
    fn coercivity_holds_at_ten() {
        let r = coercivity_check(60, 10.0, None, 0.25, 5, Execution::Parallel).unwrap();
        assert!(r.pass(), "{r:?}");
    }
}
