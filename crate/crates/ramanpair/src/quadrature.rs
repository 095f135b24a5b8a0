//! Quadrature rules: Gauss–Legendre, uniform trapezoid axes, Lorentzian
//! product weights and Filon's rule for cosine-weighted integrals.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::fields::Lineshape;

/// Gauss–Legendre nodes and weights on [−1, 1] (Newton on P_n, Tricomi start).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss–Legendre needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut t = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, t);
            dp = d;
            let dt = p / d;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(n, t);
        if d != 0.0 {
            dp = d;
        }
        let wt = 2.0 / ((1.0 - t * t) * dp * dp);
        x[i] = -t;
        x[n - 1 - i] = t;
        w[i] = wt;
        w[n - 1 - i] = wt;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_and_derivative(n: usize, t: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, t);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (t * p - p0) / (t * t - 1.0);
    (p, d)
}

/// Gauss–Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    (
        x.into_iter().map(|t| m + h * t).collect(),
        w.into_iter().map(|v| h * v).collect(),
    )
}

/// A sampled axis with quadrature weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Axis {
    /// n ≥ 2 equispaced points on [−half_width, half_width], trapezoid weights.
    pub fn trapezoid(n: usize, half_width: f64) -> Axis {
        assert!(n >= 2, "a trapezoid axis needs two points");
        let h = 2.0 * half_width / (n - 1) as f64;
        let values = (0..n).map(|i| -half_width + h * i as f64).collect();
        let mut weights = vec![h; n];
        weights[0] = 0.5 * h;
        weights[n - 1] = 0.5 * h;
        Axis { values, weights }
    }

    /// Single node at 0 carrying the whole interval length.
    pub fn point(width: f64) -> Axis {
        Axis {
            values: vec![0.0],
            weights: vec![width],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        if self.values.len() < 2 {
            0.0
        } else {
            self.values[1] - self.values[0]
        }
    }
}

/// How the Lorentzian |g(δ)|² enters the δ-integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LineWeighting {
    /// Trapezoid with |g|² sampled at the nodes; spectrally accurate once h ≤ Γ/4.
    Trapezoid,
    /// ∫|g|²·hat_j exactly: piecewise-linear product integration for lines
    /// narrower than the grid spacing.
    LorentzianProduct,
}

/// δ-axis weights with the lineshape folded in: W_j ≈ ∫|g(δ)|² φ_j(δ) dδ.
pub fn lineshape_weights(axis: &Axis, ls: &Lineshape, rule: LineWeighting) -> Vec<f64> {
    match rule {
        LineWeighting::Trapezoid => axis
            .values
            .iter()
            .zip(&axis.weights)
            .map(|(&d, &w)| w * ls.intensity_at_detuning(d))
            .collect(),
        LineWeighting::LorentzianProduct => {
            let n = axis.len();
            if n == 1 {
                return vec![1.0];
            }
            let x = &axis.values;
            let mut out = vec![0.0; n];
            for k in 0..n - 1 {
                let (a, b) = (x[k], x[k + 1]);
                let (m_rise, m_fall) = hat_moments(ls, a, b);
                out[k] += m_fall;
                out[k + 1] += m_rise;
            }
            out
        }
    }
}

/// On [a,b]: (∫L·(x−a)/h, ∫L·(b−x)/h) for the normalized Lorentzian L = |g|².
fn hat_moments(ls: &Lineshape, a: f64, b: f64) -> (f64, f64) {
    let h = b - a;
    let g = 0.5 * ls.gamma;
    let mass = ls.mass_between(a, b);
    // ∫ x L dx = (Γ/4π)·ln(x² + γ²)
    let first = ls.gamma / (4.0 * PI) * ((b * b + g * g) / (a * a + g * g)).ln();
    let rise = ((first - a * mass) / h).max(0.0);
    let fall = (mass - rise).max(0.0);
    (rise, fall)
}

/// Filon–Simpson: ∫_a^b f(z)·cos(t z) dz from 2n+1 equispaced samples of f.
pub fn filon_cos(f: &[f64], a: f64, b: f64, t: f64) -> f64 {
    let m = f.len();
    assert!(
        m >= 3 && m % 2 == 1,
        "Filon needs an odd number (≥3) of samples"
    );
    let h = (b - a) / (m - 1) as f64;
    let th = t * h;
    let (alpha, beta, gamma) = filon_coefficients(th);
    let x = |i: usize| a + h * i as f64;
    let mut c_even = 0.0;
    let mut c_odd = 0.0;
    for (i, &fi) in f.iter().enumerate() {
        let c = (t * x(i)).cos();
        if i % 2 == 0 {
            c_even += if i == 0 || i == m - 1 {
                0.5 * fi * c
            } else {
                fi * c
            };
        } else {
            c_odd += fi * c;
        }
    }
    let s_end = f[m - 1] * (t * b).sin() - f[0] * (t * a).sin();
    h * (alpha * s_end + beta * c_even + gamma * c_odd)
}

fn filon_coefficients(th: f64) -> (f64, f64, f64) {
    if th.abs() < 1e-2 {
        let t2 = th * th;
        let t3 = t2 * th;
        let t4 = t2 * t2;
        let t5 = t4 * th;
        let t6 = t4 * t2;
        let t7 = t6 * th;
        let alpha = 2.0 * t3 / 45.0 - 2.0 * t5 / 315.0 + 2.0 * t7 / 4725.0;
        let beta = 2.0 / 3.0 + 2.0 * t2 / 15.0 - 4.0 * t4 / 105.0 + 2.0 * t6 / 567.0;
        let gamma = 4.0 / 3.0 - 2.0 * t2 / 15.0 + t4 / 210.0 - t6 / 11340.0;
        (alpha, beta, gamma)
    } else {
        let (s, c) = th.sin_cos();
        let t2 = th * th;
        let t3 = t2 * th;
        let alpha = (t2 + th * s * c - 2.0 * s * s) / t3;
        let beta = 2.0 * (th * (1.0 + c * c) - 2.0 * s * c) / t3;
        let gamma = 4.0 * (s - th * c) / t3;
        (alpha, beta, gamma)
    }
}

/// sin(x)/x with sinc(0) = 1.
#[inline]
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::wavenumber_to_angular;
    use proptest::prelude::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [1usize, 2, 5, 16, 48, 101] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            for deg in 0..(2 * n) {
                let num: f64 = x
                    .iter()
                    .zip(&w)
                    .map(|(&t, &wt)| wt * t.powi(deg as i32))
                    .sum();
                let exact = if deg % 2 == 1 {
                    0.0
                } else {
                    2.0 / (deg as f64 + 1.0)
                };
                assert!((num - exact).abs() < 1e-12, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn gauss_legendre_nodes_sorted_and_symmetric() {
        let (x, w) = gauss_legendre(33);
        for i in 0..33 {
            assert!((x[i] + x[32 - i]).abs() < 1e-15);
            assert_eq!(w[i], w[32 - i]);
            if i > 0 {
                assert!(x[i] > x[i - 1]);
            }
        }
    }

    #[test]
    fn filon_matches_closed_forms() {
        // ∫_0^1 cos(t z) dz = sin t / t, and ∫_0^1 z² cos(tz) dz
        let n = 401;
        let zs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let ones = vec![1.0; n];
        let sq: Vec<f64> = zs.iter().map(|z| z * z).collect();
        for t in [0.0f64, 1e-3, 0.7, 25.0, 400.0, 3000.0] {
            let exact = if t == 0.0 { 1.0 } else { t.sin() / t };
            assert!(
                (filon_cos(&ones, 0.0, 1.0, t) - exact).abs() < 1e-13,
                "t={t}"
            );
            let exact2 = if t < 0.1 {
                1.0 / 3.0 - t * t / 10.0 + t.powi(4) / 168.0
            } else {
                ((t * t - 2.0) * t.sin() + 2.0 * t * t.cos()) / t.powi(3)
            };
            let got = filon_cos(&sq, 0.0, 1.0, t);
            assert!((got - exact2).abs() < 1e-12, "t={t}: {got} vs {exact2}");
        }
        // smooth non-polynomial: ∫_0^1 e^{-z} cos(tz) dz
        let ex: Vec<f64> = zs.iter().map(|z| (-z).exp()).collect();
        for t in [3.0f64, 300.0] {
            let e1 = (-1.0f64).exp();
            let exact = (1.0 - e1 * t.cos() + t * e1 * t.sin()) / (1.0 + t * t);
            let got = filon_cos(&ex, 0.0, 1.0, t);
            assert!((got - exact).abs() < 1e-11, "t={t}: {got} vs {exact}");
        }
    }

    #[test]
    fn lorentzian_product_weights_carry_the_line_mass() {
        let ls = Lineshape::new(0.0, wavenumber_to_angular(11.0) / 1000.0);
        let axis = Axis::trapezoid(256, 1e13);
        let w = lineshape_weights(&axis, &ls, LineWeighting::LorentzianProduct);
        let total: f64 = w.iter().sum();
        let exact = ls.mass_between(-1e13, 1e13);
        assert!((total - exact).abs() < 1e-12);
        assert!(w.iter().all(|&v| v >= 0.0));
        // a product rule integrates linear functions exactly
        let lin: f64 = w
            .iter()
            .zip(&axis.values)
            .map(|(a, x)| a * (1.0 + x / 1e13))
            .sum();
        assert!((lin - exact).abs() < 1e-10);
    }

    #[test]
    fn trapezoid_axis_weights() {
        let a = Axis::trapezoid(11, 5.0);
        assert_eq!(a.values[0], -5.0);
        assert_eq!(a.values[10], 5.0);
        assert!((a.weights.iter().sum::<f64>() - 10.0).abs() < 1e-14);
        assert_eq!(a.spacing(), 1.0);
    }

    proptest! {
        #[test]
        fn sinc_is_even_and_bounded(x in -1e4f64..1e4) {
            prop_assert_eq!(sinc(x), sinc(-x));
            prop_assert!(sinc(x).abs() <= 1.0);
        }
    }
}
