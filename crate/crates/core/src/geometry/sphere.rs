use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::surface::SurfaceQuadrature;
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre_interval;

/// Node counts of a surface rule: trapezoid nodes in d = 2, and
/// (Gauss-Legendre polar, trapezoid azimuth) nodes in d = 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolution {
    Circle(usize),
    Sphere(usize, usize),
}

impl Resolution {
    pub fn default_for(dim: usize) -> Self {
        if dim == 2 {
            Resolution::Circle(512)
        } else {
            Resolution::Sphere(64, 128)
        }
    }

    /// Resolution with `n` nodes per angular direction scale (d = 3 uses
    /// `n/2 × n`).
    pub fn with_nodes(dim: usize, n: usize) -> Self {
        if dim == 2 {
            Resolution::Circle(n)
        } else {
            Resolution::Sphere((n / 2).max(2), n.max(4))
        }
    }

    pub fn doubled(self) -> Self {
        match self {
            Resolution::Circle(n) => Resolution::Circle(2 * n),
            Resolution::Sphere(a, b) => Resolution::Sphere(2 * a, 2 * b),
        }
    }

    pub fn node_count(self) -> usize {
        match self {
            Resolution::Circle(n) => n,
            Resolution::Sphere(a, b) => a * b,
        }
    }
}

/// `M = T·S^{d-1}`, boundary of the domain `T(open unit ball)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineSphere {
    t: DMatrix<f64>,
    t_inv_transpose: DMatrix<f64>,
    det: f64,
}

impl AffineSphere {
    pub fn new(t: DMatrix<f64>) -> Result<Self> {
        let d = t.nrows();
        if t.ncols() != d || !(2..=3).contains(&d) {
            return Err(Error::InvalidParameter(format!(
                "T must be a square 2x2 or 3x3 matrix, got {}x{}",
                t.nrows(),
                t.ncols()
            )));
        }
        let det = t.determinant();
        if !det.is_finite() || det.abs() < 1e-12 {
            return Err(Error::InvalidParameter(format!("T is singular (det = {det})")));
        }
        let inv = t
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidParameter("T is not invertible".into()))?;
        Ok(Self {
            t_inv_transpose: inv.transpose(),
            t,
            det,
        })
    }

    /// The unit sphere `S^{d-1}`.
    pub fn unit(dim: usize) -> Self {
        Self::new(DMatrix::identity(dim, dim)).expect("identity is invertible")
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_row_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.t
    }

    pub fn determinant(&self) -> f64 {
        self.det
    }

    /// `h_M(n) = sup{n·p : p ∈ M} = ‖T'n‖`. Positively homogeneous in `n`.
    pub fn support_function(&self, n: &[f64]) -> f64 {
        let d = self.dim();
        let mut s = 0.0;
        for col in 0..d {
            let mut v = 0.0;
            for row in 0..d {
                v += self.t[(row, col)] * n[row];
            }
            s += v * v;
        }
        s.sqrt()
    }

    /// `υ(n) = T'n / ‖T'n‖`.
    pub fn upsilon(&self, n: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut v: Vec<f64> = (0..d).map(|col| (0..d).map(|row| self.t[(row, col)] * n[row]).sum()).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        v
    }

    /// Image `Tω` of a point of the unit sphere.
    pub fn map(&self, omega: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d).map(|row| (0..d).map(|c| self.t[(row, c)] * omega[c]).sum()).collect()
    }

    /// Outward unit normal of `M` at `Tω`, and the surface Jacobian
    /// `|det T|·‖T^{-T}ω‖` of `ω ↦ Tω`.
    pub fn normal_and_jacobian(&self, omega: &[f64]) -> (Vec<f64>, f64) {
        let d = self.dim();
        let mut n: Vec<f64> = (0..d)
            .map(|row| (0..d).map(|c| self.t_inv_transpose[(row, c)] * omega[c]).sum())
            .collect();
        let norm = n.iter().map(|x| x * x).sum::<f64>().sqrt();
        n.iter_mut().for_each(|x| *x /= norm);
        (n, self.det.abs() * norm)
    }

    /// `Leb(𝔇)` for `𝔇 = T(unit ball)`.
    pub fn domain_volume(&self) -> f64 {
        let unit = if self.dim() == 2 { PI } else { 4.0 * PI / 3.0 };
        self.det.abs() * unit
    }

    /// `H^{d-1}(T(D_1 ∩ υ(n)^⊥))`, the measure of the central section
    /// orthogonal to `n`: a segment length in d = 2, an ellipse area in d = 3.
    pub fn central_section_measure(&self, n: &[f64]) -> f64 {
        let v = self.upsilon(n);
        match self.dim() {
            2 => {
                let w = [-v[1], v[0]];
                let tw = self.map(&w);
                2.0 * (tw[0] * tw[0] + tw[1] * tw[1]).sqrt()
            }
            _ => {
                let (a, b) = orthonormal_complement(&v);
                let ta = self.map(&a);
                let tb = self.map(&b);
                let c = cross(&ta, &tb);
                PI * (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()
            }
        }
    }

    /// `H^{d-1}(𝔇 ∩ {y : y·n = h_M(n)ρ}) = (1-ρ²)^{(d-1)/2}·H^{d-1}(T(D_1 ∩ υ^⊥))`.
    pub fn hyperplane_section_measure(&self, n: &[f64], rho: f64) -> f64 {
        if rho.abs() >= 1.0 {
            return 0.0;
        }
        section_profile(self.dim(), rho) * self.central_section_measure(n)
    }

    /// Surface rule on the whole of `M`.
    pub fn quadrature(&self, res: Resolution) -> SurfaceQuadrature {
        let d = self.dim();
        let mut points = Vec::new();
        let mut normals = Vec::new();
        let mut weights = Vec::new();
        match (d, res) {
            (2, Resolution::Circle(n)) => {
                let h = 2.0 * PI / n as f64;
                for k in 0..n {
                    let th = (k as f64 + 0.5) * h;
                    let omega = [th.cos(), th.sin()];
                    let (nrm, jac) = self.normal_and_jacobian(&omega);
                    points.extend(self.map(&omega));
                    normals.extend(nrm);
                    weights.push(h * jac);
                }
            }
            (3, Resolution::Sphere(np, na)) => {
                let (xs, ws) = gauss_legendre_interval(np, -1.0, 1.0);
                let h = 2.0 * PI / na as f64;
                for (x, w) in xs.iter().zip(&ws) {
                    let s = (1.0 - x * x).sqrt();
                    for k in 0..na {
                        let ph = (k as f64 + 0.5) * h;
                        let omega = [s * ph.cos(), s * ph.sin(), *x];
                        let (nrm, jac) = self.normal_and_jacobian(&omega);
                        points.extend(self.map(&omega));
                        normals.extend(nrm);
                        weights.push(w * h * jac);
                    }
                }
            }
            _ => panic!("resolution {res:?} does not match dimension {d}"),
        }
        SurfaceQuadrature::from_parts(d, points, normals, weights)
    }

    /// Rule restricted to the cap `{y ∈ M : y·n ≥ h_M(n)ρ}`, with nodes
    /// adapted to the cap so that no indicator is evaluated at nodes.
    pub fn cap_quadrature(&self, n: &[f64], rho: f64, order: usize) -> SurfaceQuadrature {
        let d = self.dim();
        let mut points = Vec::new();
        let mut normals = Vec::new();
        let mut weights = Vec::new();
        if rho < 1.0 {
            let rho = rho.max(-1.0);
            let v = self.upsilon(n);
            match d {
                2 => {
                    let half = rho.acos();
                    let center = v[1].atan2(v[0]);
                    let (ths, ws) = gauss_legendre_interval(order, center - half, center + half);
                    for (th, w) in ths.iter().zip(&ws) {
                        let omega = [th.cos(), th.sin()];
                        let (nrm, jac) = self.normal_and_jacobian(&omega);
                        points.extend(self.map(&omega));
                        normals.extend(nrm);
                        weights.push(w * jac);
                    }
                }
                _ => {
                    let (a, b) = orthonormal_complement(&v);
                    let np = (order / 2).max(4);
                    let na = order.max(8);
                    let (xs, ws) = gauss_legendre_interval(np, rho, 1.0);
                    let h = 2.0 * PI / na as f64;
                    for (x, w) in xs.iter().zip(&ws) {
                        let s = (1.0 - x * x).max(0.0).sqrt();
                        for k in 0..na {
                            let ph = (k as f64 + 0.5) * h;
                            let (c, sn) = (ph.cos(), ph.sin());
                            let omega: Vec<f64> = (0..3).map(|i| x * v[i] + s * (c * a[i] + sn * b[i])).collect();
                            let (nrm, jac) = self.normal_and_jacobian(&omega);
                            points.extend(self.map(&omega));
                            normals.extend(nrm);
                            weights.push(w * h * jac);
                        }
                    }
                }
            }
        }
        SurfaceQuadrature::from_parts(d, points, normals, weights)
    }

    /// Extremum over `y ∈ M` of a smooth function of `y`, by dense sampling of
    /// the parametrization followed by local refinement.
    pub(crate) fn extremize<F: Fn(&[f64]) -> f64>(&self, f: F, maximize: bool) -> f64 {
        let sign = if maximize { 1.0 } else { -1.0 };
        let g = |omega: &[f64]| sign * f(&self.map(omega));
        let best = match self.dim() {
            2 => {
                let n = 256;
                let h = 2.0 * PI / n as f64;
                let mut best_k = 0;
                let mut best_v = f64::NEG_INFINITY;
                for k in 0..n {
                    let th = k as f64 * h;
                    let v = g(&[th.cos(), th.sin()]);
                    if v > best_v {
                        best_v = v;
                        best_k = k;
                    }
                }
                let center = best_k as f64 * h;
                golden_max(|th| g(&[th.cos(), th.sin()]), center - h, center + h).max(best_v)
            }
            _ => {
                let (np, na) = (48, 96);
                let mut best = (0.0, 0.0, f64::NEG_INFINITY);
                for i in 0..=np {
                    let th = PI * i as f64 / np as f64;
                    for k in 0..na {
                        let ph = 2.0 * PI * k as f64 / na as f64;
                        let v = g(&spherical(th, ph));
                        if v > best.2 {
                            best = (th, ph, v);
                        }
                    }
                }
                let (mut th, mut ph, mut val) = best;
                let mut step = PI / np as f64;
                while step > 1e-10 {
                    let mut improved = false;
                    for (dt, dp) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
                        let v = g(&spherical(th + dt, ph + dp));
                        if v > val {
                            val = v;
                            th += dt;
                            ph += dp;
                            improved = true;
                        }
                    }
                    if !improved {
                        step *= 0.5;
                    }
                }
                val
            }
        };
        sign * best
    }
}

/// `φ(ρ) = (1-ρ²)^{(d-1)/2}`.
pub fn section_profile(dim: usize, rho: f64) -> f64 {
    let q = (1.0 - rho * rho).max(0.0);
    if dim == 2 {
        q.sqrt()
    } else {
        q.powf((dim as f64 - 1.0) / 2.0)
    }
}

fn spherical(th: f64, ph: f64) -> [f64; 3] {
    [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() < 1e-13 {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    fc.max(fd)
}

pub(crate) fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Orthonormal basis of the plane orthogonal to the unit vector `v` (d = 3).
pub(crate) fn orthonormal_complement(v: &[f64]) -> ([f64; 3], [f64; 3]) {
    let pick = if v[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let a = cross(v, &pick);
    let na = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    let a = [a[0] / na, a[1] / na, a[2] / na];
    let b = cross(v, &a);
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn support_function_examples() {
        let m = AffineSphere::unit(2);
        assert_relative_eq!(m.support_function(&[0.6, 0.8]), 1.0, epsilon = 1e-15);
        let e = AffineSphere::diagonal(&[2.0, 1.0]).unwrap();
        assert_relative_eq!(e.support_function(&[1.0, 0.0]), 2.0, epsilon = 1e-15);
        let s = 0.5f64.sqrt();
        assert_relative_eq!(e.support_function(&[s, s]), 2.5f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn support_function_matches_brute_force_sup() {
        let t = DMatrix::from_row_slice(2, 2, &[1.5, 0.4, -0.3, 0.8]);
        let m = AffineSphere::new(t).unwrap();
        for k in 0..12 {
            let a = 0.37 + k as f64 * 0.5;
            let n = [a.cos(), a.sin()];
            let brute = (0..20000)
                .map(|i| {
                    let th = 2.0 * PI * i as f64 / 20000.0;
                    let y = m.map(&[th.cos(), th.sin()]);
                    y[0] * n[0] + y[1] * n[1]
                })
                .fold(f64::NEG_INFINITY, f64::max);
            assert_relative_eq!(m.support_function(&n), brute, epsilon = 1e-6);
            // positive homogeneity
            assert_relative_eq!(m.support_function(&[3.0 * n[0], 3.0 * n[1]]), 3.0 * brute, epsilon = 2e-6);
        }
    }

    #[test]
    fn section_measures() {
        let m = AffineSphere::unit(2);
        assert_relative_eq!(m.hyperplane_section_measure(&[1.0, 0.0], 0.0), 2.0, epsilon = 1e-15);
        assert_relative_eq!(m.hyperplane_section_measure(&[0.0, 1.0], 0.5), 2.0 * 0.75f64.sqrt(), epsilon = 1e-14);
        let s = AffineSphere::unit(3);
        assert_relative_eq!(s.hyperplane_section_measure(&[0.0, 0.0, 1.0], 0.6), PI * 0.64, epsilon = 1e-14);
        for n in [[1.0, 0.0], [0.6, -0.8]] {
            assert_eq!(m.hyperplane_section_measure(&n, 1.0), 0.0);
            assert_eq!(m.hyperplane_section_measure(&n, -1.0), 0.0);
        }
    }

    #[test]
    fn circle_and_sphere_measures() {
        let q = AffineSphere::unit(2).quadrature(Resolution::Circle(256));
        assert!((q.total_measure() - 2.0 * PI).abs() < 1e-10);
        let q = AffineSphere::unit(3).quadrature(Resolution::default_for(3));
        assert!((q.total_measure() - 4.0 * PI).abs() < 1e-8);
    }

    #[test]
    fn ellipse_perimeter_against_fine_arclength() {
        let e = AffineSphere::diagonal(&[2.0, 1.0]).unwrap();
        let q = e.quadrature(Resolution::Circle(512));
        // independent oracle: polygonal arclength with 2·10^6 chords
        let n = 2_000_000;
        let mut perim = 0.0;
        let mut prev = [2.0, 0.0];
        for k in 1..=n {
            let th = 2.0 * PI * k as f64 / n as f64;
            let p = [2.0 * th.cos(), th.sin()];
            perim += ((p[0] - prev[0]).powi(2) + (p[1] - prev[1]).powi(2)).sqrt();
            prev = p;
        }
        assert!((q.total_measure() - perim).abs() < 1e-6, "{} vs {perim}", q.total_measure());
        assert!((perim - 9.6884).abs() < 1e-4);
    }

    #[test]
    fn cap_quadrature_total_matches_full_surface() {
        let e = AffineSphere::new(DMatrix::from_row_slice(3, 3, &[1.2, 0.1, 0.0, 0.0, 0.9, 0.2, 0.1, 0.0, 1.1])).unwrap();
        let full = e.quadrature(Resolution::Sphere(64, 128)).total_measure();
        let cap = e.cap_quadrature(&[0.0, 0.0, 1.0], -1.0, 128).total_measure();
        assert_relative_eq!(full, cap, max_relative = 1e-8);
    }

    #[test]
    fn extremize_distance_to_ellipse() {
        let e = AffineSphere::diagonal(&[2.0, 1.0]).unwrap();
        let max = e.extremize(|y| y[0] * y[0] + y[1] * y[1], true);
        let min = e.extremize(|y| y[0] * y[0] + y[1] * y[1], false);
        assert_relative_eq!(max, 4.0, epsilon = 1e-12);
        assert_relative_eq!(min, 1.0, epsilon = 1e-12);
    }
}
