//! One-dimensional quadrature: Gauss-Legendre rules and adaptive
//! Gauss-Kronrod integration for real and complex integrands.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Values that can be integrated: real numbers and complex numbers.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1], computed by Newton iteration
/// on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                let (_, d) = legendre_with_derivative(n, x);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule mapped to [a, b].
pub fn gauss_legendre_interval(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    (
        x.iter().map(|t| mid + half * t).collect(),
        w.iter().map(|v| v * half).collect(),
    )
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod15<T: QuadValue, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> (T, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let f1 = f(c - x);
        let f2 = f(c + x);
        let s = f1 + f2;
        kronrod = kronrod + s * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + s * WG[j / 2];
        }
    }
    let kronrod = kronrod * h;
    let gauss = gauss * h;
    let err = (kronrod - gauss).magnitude();
    (kronrod, err)
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral<T> {
    pub value: T,
    pub error: f64,
}

/// Globally adaptive Gauss-Kronrod (7/15) integration on [a, b].
///
/// Bisects the interval with the largest error estimate until the summed
/// estimate falls below `max(abs_tol, rel_tol * |value|)`.
pub fn integrate<T: QuadValue, F: FnMut(f64) -> T>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Integral<T>> {
    if a == b {
        return Ok(Integral {
            value: T::zero(),
            error: 0.0,
        });
    }
    const MAX_INTERVALS: usize = 4000;
    let (v, e) = kronrod15(&mut f, a, b);
    let mut pieces: Vec<(f64, f64, T, f64)> = vec![(a, b, v, e)];
    loop {
        let mut total = T::zero();
        let mut err = 0.0;
        let mut worst = 0;
        for (i, p) in pieces.iter().enumerate() {
            total = total + p.2;
            err += p.3;
            if p.3 > pieces[worst].3 {
                worst = i;
            }
        }
        let target = abs_tol.max(rel_tol * total.magnitude());
        if err <= target {
            return Ok(Integral { value: total, error: err });
        }
        let (lo, hi, _, werr) = pieces[worst];
        let mid = 0.5 * (lo + hi);
        if pieces.len() >= MAX_INTERVALS || mid <= lo || mid >= hi || werr == 0.0 {
            return Err(Error::Quadrature {
                requested: target,
                achieved: err,
            });
        }
        let (v1, e1) = kronrod15(&mut f, lo, mid);
        let (v2, e2) = kronrod15(&mut f, mid, hi);
        pieces[worst] = (lo, mid, v1, e1);
        pieces.push((mid, hi, v2, e2));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(6);
        // degree 10 polynomial is integrated exactly by 6 nodes
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert_relative_eq!(s, 2.0 / 11.0, epsilon = 1e-14);
        let total: f64 = w.iter().sum();
        assert_relative_eq!(total, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn large_rules_are_accurate() {
        let (x, w) = gauss_legendre_interval(200, 0.0, std::f64::consts::PI);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.sin()).sum();
        assert_relative_eq!(s, 2.0, epsilon = 1e-13);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let r = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, 1e-10, 0.0).unwrap();
        assert_relative_eq!(r.value, 2.0, epsilon = 1e-8);
    }

    #[test]
    fn adaptive_complex_oscillatory() {
        let w = 50.0;
        let r = integrate(
            |x: f64| Complex64::new(0.0, w * x).exp(),
            0.0,
            1.0,
            1e-12,
            0.0,
        )
        .unwrap();
        let exact = (Complex64::new(0.0, w).exp() - 1.0) / Complex64::new(0.0, w);
        assert!((r.value - exact).norm() < 1e-11);
    }
}
