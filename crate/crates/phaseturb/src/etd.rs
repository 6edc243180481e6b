//! Fourth-order exponential time differencing (ETDRK4, Cox–Matthews with the
//! Kassam–Trefethen coefficient evaluation).
//!
//! For `∂_t v = A v + N(v)` with `A` a Fourier multiplier, one step of size `h`
//! needs the functions `e^{Z}`, `e^{Z/2}`, `φ₁(Z/2)` and three combinations of
//! `φ₁, φ₂, φ₃` at `Z = hA`. Two shapes of `A` are supported:
//!
//! * diagonal: one complex symbol per mode and component;
//! * 2×2 blocks: one complex matrix per mode coupling two components.
//!
//! Scalar φ-functions near `z = 0` are evaluated as a 32-point mean over the
//! circle `|w - z| = 1`, which removes the cancellation in the closed forms.
//! Functions of a 2×2 block use the Newton form
//! `g(Z) = g(λ₁) I + g[λ₁, λ₂] (Z - λ₁ I)`, which is valid for defective
//! blocks as well. The divided difference is taken by a contour mean when the
//! eigenvalues are close.

use num_complex::Complex64;

use crate::error::Result;

type C = Complex64;

const CONTOUR_POINTS: usize = 32;
const BLOCK_CONTOUR_POINTS: usize = 64;

/// Dense 2×2 complex matrix `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub a: C,
    pub b: C,
    pub c: C,
    pub d: C,
}

impl Mat2 {
    /// Matrix from entries.
    pub fn new(a: C, b: C, c: C, d: C) -> Mat2 {
        Mat2 { a, b, c, d }
    }

    /// Identity matrix scaled by `s`.
    pub fn scalar(s: C) -> Mat2 {
        let z = C::new(0.0, 0.0);
        Mat2 { a: s, b: z, c: z, d: s }
    }

    /// Trace.
    pub fn trace(&self) -> C {
        self.a + self.d
    }

    /// Determinant.
    pub fn det(&self) -> C {
        self.a * self.d - self.b * self.c
    }

    /// Entry-wise scaling.
    pub fn scale(&self, s: C) -> Mat2 {
        Mat2 { a: self.a * s, b: self.b * s, c: self.c * s, d: self.d * s }
    }

    /// Matrix-vector product.
    pub fn apply(&self, x: C, y: C) -> (C, C) {
        (self.a * x + self.b * y, self.c * x + self.d * y)
    }

    /// Eigenvalues, the one of larger magnitude first. The smaller one is
    /// obtained from the determinant so that widely separated eigenvalues
    /// keep full relative accuracy.
    pub fn eigenvalues(&self) -> (C, C) {
        let tr = self.trace();
        let det = self.det();
        let disc = (tr * tr - 4.0 * det).sqrt();
        let plus = tr + disc;
        let minus = tr - disc;
        let big = if plus.norm() >= minus.norm() { plus } else { minus } * 0.5;
        if big.norm() == 0.0 {
            return (C::new(0.0, 0.0), C::new(0.0, 0.0));
        }
        let small = det / big;
        (big, small)
    }

    /// `g(self)` for an entire function `g`, given its scalar evaluator.
    pub fn func(&self, g: &dyn Fn(C) -> C) -> Mat2 {
        let (l1, l2) = self.eigenvalues();
        let g1 = g(l1);
        let dd = divided_difference(g, l1, l2);
        let shifted = Mat2 { a: self.a - l1, b: self.b, c: self.c, d: self.d - l1 };
        let mut out = shifted.scale(dd);
        out.a += g1;
        out.d += g1;
        out
    }
}

/// First divided difference `g[λ₁, λ₂]`, equal to `g'(λ)` when they coincide.
fn divided_difference(g: &dyn Fn(C) -> C, l1: C, l2: C) -> C {
    let gap = (l1 - l2).norm();
    if gap > 0.5 {
        return (g(l1) - g(l2)) / (l1 - l2);
    }
    // (1/2πi)∮ g(w)/((w-λ₁)(w-λ₂)) dw on |w - c| = 1 with c the midpoint.
    let c = 0.5 * (l1 + l2);
    let mut acc = C::new(0.0, 0.0);
    for j in 0..BLOCK_CONTOUR_POINTS {
        let theta = std::f64::consts::PI * (2.0 * j as f64 + 1.0) / BLOCK_CONTOUR_POINTS as f64;
        let r = C::from_polar(1.0, theta);
        let w = c + r;
        acc += g(w) * r / ((w - l1) * (w - l2));
    }
    acc / BLOCK_CONTOUR_POINTS as f64
}

/// `φ_k(w)` by Taylor series (small `|w|`) or closed form, `k ∈ {0,1,2,3}`.
fn phi_kernel(w: C, k: u32) -> C {
    if k == 0 {
        return w.exp();
    }
    if w.norm() < 0.5 {
        // φ_k(w) = Σ_j w^j/(j+k)!
        let mut term = C::new(1.0, 0.0);
        let mut fact = 1.0;
        for i in 1..=k {
            fact *= i as f64;
        }
        term /= fact;
        let mut sum = term;
        for j in 1..30 {
            term = term * w / ((j + k) as f64);
            sum += term;
        }
        return sum;
    }
    let e = w.exp();
    match k {
        1 => (e - 1.0) / w,
        2 => (e - 1.0 - w) / (w * w),
        3 => (e - 1.0 - w - 0.5 * w * w) / (w * w * w),
        _ => unreachable!("phi index"),
    }
}

/// `φ_k(z)`. Inside the unit disc the value is the mean of the kernel over the
/// 32-point circle `|w - z| = 1`.
pub fn phi(z: C, k: u32) -> C {
    if k == 0 {
        return z.exp();
    }
    if z.norm() >= 1.0 {
        return phi_kernel(z, k);
    }
    let mut acc = C::new(0.0, 0.0);
    for j in 0..CONTOUR_POINTS {
        let theta = std::f64::consts::PI * (2.0 * j as f64 + 1.0) / CONTOUR_POINTS as f64;
        acc += phi_kernel(z + C::from_polar(1.0, theta), k);
    }
    acc / CONTOUR_POINTS as f64
}

/// The six ETDRK4 weights for one scalar `z = hλ` (already multiplied by `h`).
#[derive(Debug, Clone, Copy)]
pub struct Weights<T> {
    pub e: T,
    pub e2: T,
    pub q: T,
    pub f1: T,
    pub f2: T,
    pub f3: T,
}

/// ETDRK4 weights for a scalar linear rate `lambda` and step `h`.
pub fn scalar_weights(lambda: C, h: f64) -> Weights<C> {
    let z = lambda * h;
    let p1 = phi(z, 1);
    let p2 = phi(z, 2);
    let p3 = phi(z, 3);
    Weights {
        e: z.exp(),
        e2: (0.5 * z).exp(),
        q: 0.5 * h * phi(0.5 * z, 1),
        f1: h * (p1 - 3.0 * p2 + 4.0 * p3),
        f2: h * (p2 - 2.0 * p3),
        f3: h * (-p2 + 4.0 * p3),
    }
}

/// ETDRK4 weights for a 2×2 linear block `a` and step `h`.
pub fn block_weights(a: &Mat2, h: f64) -> Weights<Mat2> {
    let z = a.scale(C::new(h, 0.0));
    let zh = a.scale(C::new(0.5 * h, 0.0));
    Weights {
        e: z.func(&|w| w.exp()),
        e2: zh.func(&|w| w.exp()),
        q: zh.func(&|w| phi(w, 1)).scale(C::new(0.5 * h, 0.0)),
        f1: z
            .func(&|w| phi(w, 1) - 3.0 * phi(w, 2) + 4.0 * phi(w, 3))
            .scale(C::new(h, 0.0)),
        f2: z.func(&|w| phi(w, 2) - 2.0 * phi(w, 3)).scale(C::new(h, 0.0)),
        f3: z.func(&|w| -phi(w, 2) + 4.0 * phi(w, 3)).scale(C::new(h, 0.0)),
    }
}

/// State of an ETD integration: `components × modes` complex coefficients.
pub type EtdState = Vec<Vec<C>>;

#[derive(Debug, Clone)]
enum Linear {
    Diagonal(Vec<Vec<Weights<C>>>),
    Block(Vec<Weights<Mat2>>),
}

/// Precomputed ETDRK4 stepper for a fixed linear part and step size.
#[derive(Debug, Clone)]
pub struct Etdrk4 {
    h: f64,
    linear: Linear,
}

#[derive(Clone, Copy)]
enum Which {
    E,
    E2,
    Q,
    F1,
    F2,
    F3,
}

fn pick<T: Copy>(w: &Weights<T>, which: Which) -> T {
    match which {
        Which::E => w.e,
        Which::E2 => w.e2,
        Which::Q => w.q,
        Which::F1 => w.f1,
        Which::F2 => w.f2,
        Which::F3 => w.f3,
    }
}

impl Etdrk4 {
    /// Stepper for independent components with diagonal symbols
    /// `symbols[component][mode]`.
    pub fn diagonal(symbols: &[Vec<C>], h: f64) -> Etdrk4 {
        let linear = symbols
            .iter()
            .map(|row| row.iter().map(|&l| scalar_weights(l, h)).collect())
            .collect();
        Etdrk4 { h, linear: Linear::Diagonal(linear) }
    }

    /// Stepper for two components coupled by one 2×2 block per mode.
    pub fn block(blocks: &[Mat2], h: f64) -> Etdrk4 {
        let linear = blocks.iter().map(|b| block_weights(b, h)).collect();
        Etdrk4 { h, linear: Linear::Block(linear) }
    }

    /// Step size.
    pub fn h(&self) -> f64 {
        self.h
    }

    fn apply(&self, which: Which, x: &EtdState) -> EtdState {
        match &self.linear {
            Linear::Diagonal(w) => w
                .iter()
                .zip(x)
                .map(|(wr, xr)| wr.iter().zip(xr).map(|(wi, &xi)| pick(wi, which) * xi).collect())
                .collect(),
            Linear::Block(w) => {
                let n = w.len();
                let mut out = vec![vec![C::new(0.0, 0.0); n]; 2];
                for (i, wi) in w.iter().enumerate() {
                    let (u, v) = pick(wi, which).apply(x[0][i], x[1][i]);
                    out[0][i] = u;
                    out[1][i] = v;
                }
                out
            }
        }
    }

    /// One ETDRK4 step of `∂_t v = A v + N(v)`.
    pub fn step<F>(&self, v: &EtdState, mut nonlinear: F) -> Result<EtdState>
    where
        F: FnMut(&EtdState) -> Result<EtdState>,
    {
        let nv = nonlinear(v)?;
        let e2v = self.apply(Which::E2, v);
        let a = add(&e2v, &self.apply(Which::Q, &nv));
        let na = nonlinear(&a)?;
        let b = add(&e2v, &self.apply(Which::Q, &na));
        let nb = nonlinear(&b)?;
        let two_nb_minus_nv = lin2(2.0, &nb, -1.0, &nv);
        let c = add(&self.apply(Which::E2, &a), &self.apply(Which::Q, &two_nb_minus_nv));
        let nc = nonlinear(&c)?;
        let mut out = self.apply(Which::E, v);
        let parts = [
            self.apply(Which::F1, &nv),
            self.apply(Which::F2, &lin2(2.0, &na, 2.0, &nb)),
            self.apply(Which::F3, &nc),
        ];
        for p in &parts {
            for (o, pr) in out.iter_mut().zip(p) {
                for (oi, &pi) in o.iter_mut().zip(pr) {
                    *oi += pi;
                }
            }
        }
        Ok(out)
    }
}

fn add(x: &EtdState, y: &EtdState) -> EtdState {
    lin2(1.0, x, 1.0, y)
}

fn lin2(a: f64, x: &EtdState, b: f64, y: &EtdState) -> EtdState {
    x.iter()
        .zip(y)
        .map(|(xr, yr)| xr.iter().zip(yr).map(|(&xi, &yi)| xi * a + yi * b).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn phi_matches_closed_form_away_from_zero() {
        for &z in &[c(-3.0, 0.0), c(2.0, 1.0), c(-40.0, 5.0)] {
            let e = z.exp();
            assert!((phi(z, 1) - (e - 1.0) / z).norm() < 1e-13);
            assert!((phi(z, 2) - (e - 1.0 - z) / (z * z)).norm() < 1e-13);
        }
    }

    #[test]
    fn phi_limits_at_zero() {
        assert!((phi(c(0.0, 0.0), 1) - 1.0).norm() < 1e-15);
        assert!((phi(c(0.0, 0.0), 2) - 0.5).norm() < 1e-15);
        assert!((phi(c(0.0, 0.0), 3) - 1.0 / 6.0).norm() < 1e-15);
        // Continuity across the contour switch at |z| = 1.
        let inside = phi(c(-0.999_999, 0.0), 3);
        let outside = phi(c(-1.000_001, 0.0), 3);
        assert!((inside - outside).norm() < 1e-6);
    }

    #[test]
    fn block_function_of_diagonal_matches_scalar() {
        let m = Mat2::new(c(-2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-500.0, 0.0));
        let w = block_weights(&m, 0.1);
        let s1 = scalar_weights(c(-2.0, 0.0), 0.1);
        let s2 = scalar_weights(c(-500.0, 0.0), 0.1);
        assert!((w.f1.a - s1.f1).norm() < 1e-15);
        assert!((w.f1.d - s2.f1).norm() < 1e-15);
        assert!(w.f1.b.norm() < 1e-15 && w.f1.c.norm() < 1e-15);
    }

    #[test]
    fn block_exponential_of_jordan_block() {
        // exp([[l, 1], [0, l]]) = e^l [[1, 1], [0, 1]].
        let l = c(-0.7, 0.2);
        let m = Mat2::new(l, c(1.0, 0.0), c(0.0, 0.0), l);
        let e = m.func(&|w| w.exp());
        assert!((e.a - l.exp()).norm() < 1e-12);
        assert!((e.b - l.exp()).norm() < 1e-12);
        assert!(e.c.norm() < 1e-14);
    }

    #[test]
    fn block_exponential_of_rotation() {
        // exp(t [[0, -1], [1, 0]]) is a rotation by t.
        let t = 0.9;
        let m = Mat2::new(c(0.0, 0.0), c(-t, 0.0), c(t, 0.0), c(0.0, 0.0));
        let e = m.func(&|w| w.exp());
        assert!((e.a - t.cos()).norm() < 1e-13);
        assert!((e.b + t.sin()).norm() < 1e-13);
        assert!((e.c - t.sin()).norm() < 1e-13);
    }

    #[test]
    fn scalar_step_is_fourth_order() {
        // u' = -u + sin(u)... use u' = λu + u², exact solution known.
        let lambda = -1.0;
        let u0 = 0.5;
        let exact = |t: f64| {
            // Bernoulli equation: u = λ u0 e^{λt}/(λ + u0(1 - e^{λt})).
            let e = (lambda * t).exp();
            lambda * u0 * e / (lambda + u0 * (1.0 - e))
        };
        let err = |h: f64| {
            let st = Etdrk4::diagonal(&[vec![c(lambda, 0.0)]], h);
            let mut v = vec![vec![c(u0, 0.0)]];
            let steps = (1.0 / h).round() as usize;
            for _ in 0..steps {
                v = st.step(&v, |x| Ok(vec![vec![x[0][0] * x[0][0]]])).unwrap();
            }
            (v[0][0].re - exact(1.0)).abs()
        };
        let e1 = err(0.1);
        let e2 = err(0.05);
        let order = (e1 / e2).log2();
        assert!(order > 3.7, "observed order {order}");
    }
}
