use std::f64::consts::PI;

use super::region::BoxRegion;
use super::sphere::{AffineSphere, Resolution};
use super::surface::SurfaceQuadrature;
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre_interval;

/// Compact gentle set `A`: a closed ball or an axis-aligned box, d ∈ {2, 3}.
#[derive(Debug, Clone, PartialEq)]
pub enum AmbitSet {
    Ball { center: Vec<f64>, radius: f64 },
    Box(BoxRegion),
}

/// Where a point lies relative to `A + p` as `p` ranges over a ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    AlwaysIn,
    AlwaysOut,
    Mixed,
}

/// Output of [`AmbitSet::erosion_volume_asymptote`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErosionAsymptote {
    pub volume: f64,
    pub slope_estimate: f64,
    pub predicted_slope: f64,
}

impl AmbitSet {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(2..=3).contains(&center.len()) {
            return Err(Error::InvalidParameter(format!("ambit set dimension must be 2 or 3, got {}", center.len())));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("ball radius must be positive, got {radius}")));
        }
        Ok(AmbitSet::Ball { center, radius })
    }

    pub fn unit_ball(dim: usize) -> Self {
        AmbitSet::Ball {
            center: vec![0.0; dim],
            radius: 1.0,
        }
    }

    pub fn cuboid(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        if !(2..=3).contains(&min.len()) {
            return Err(Error::InvalidParameter(format!("ambit set dimension must be 2 or 3, got {}", min.len())));
        }
        Ok(AmbitSet::Box(BoxRegion::new(min, max)?))
    }

    pub fn dim(&self) -> usize {
        match self {
            AmbitSet::Ball { center, .. } => center.len(),
            AmbitSet::Box(b) => b.dim(),
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            AmbitSet::Ball { center, radius } => ball_volume(center.len(), *radius),
            AmbitSet::Box(b) => b.volume(),
        }
    }

    pub fn contains(&self, q: &[f64]) -> bool {
        match self {
            AmbitSet::Ball { center, radius } => dist2(q, center) <= radius * radius,
            AmbitSet::Box(b) => b.contains(q),
        }
    }

    /// `q ∈ A + p`.
    pub fn contains_shifted(&self, q: &[f64], p: &[f64]) -> bool {
        match self {
            AmbitSet::Ball { center, radius } => {
                let mut s = 0.0;
                for k in 0..q.len() {
                    let v = q[k] - p[k] - center[k];
                    s += v * v;
                }
                s <= radius * radius
            }
            AmbitSet::Box(b) => (0..q.len()).all(|k| {
                let v = q[k] - p[k];
                v >= b.min[k] && v <= b.max[k]
            }),
        }
    }

    /// Smallest axis-aligned box containing `A`.
    pub fn bounding_box(&self) -> BoxRegion {
        match self {
            AmbitSet::Ball { center, radius } => BoxRegion::centered(center, *radius).expect("positive radius"),
            AmbitSet::Box(b) => b.clone(),
        }
    }

    /// Radius of a ball about the origin containing `A`.
    pub fn outer_radius(&self) -> f64 {
        match self {
            AmbitSet::Ball { center, radius } => norm(center) + radius,
            AmbitSet::Box(b) => {
                let s: f64 = b.min.iter().zip(&b.max).map(|(a, c)| a.abs().max(c.abs()).powi(2)).sum();
                s.sqrt()
            }
        }
    }

    /// Classifies `q` against `A + p` for all `p` with `‖p − p0‖ ≤ rho`.
    pub fn classify(&self, q: &[f64], p0: &[f64], rho: f64) -> Membership {
        match self {
            AmbitSet::Ball { center, radius } => {
                let mut s = 0.0;
                for k in 0..q.len() {
                    let v = q[k] - p0[k] - center[k];
                    s += v * v;
                }
                let d = s.sqrt();
                if d + rho <= *radius {
                    Membership::AlwaysIn
                } else if d - rho > *radius {
                    Membership::AlwaysOut
                } else {
                    Membership::Mixed
                }
            }
            AmbitSet::Box(b) => {
                let mut inside = true;
                let mut out2 = 0.0;
                for k in 0..q.len() {
                    let v = q[k] - p0[k];
                    if v - rho < b.min[k] || v + rho > b.max[k] {
                        inside = false;
                    }
                    let e = (b.min[k] - v).max(v - b.max[k]).max(0.0);
                    out2 += e * e;
                }
                if inside {
                    Membership::AlwaysIn
                } else if out2 > rho * rho {
                    Membership::AlwaysOut
                } else {
                    Membership::Mixed
                }
            }
        }
    }

    /// Outward unit normal `n_A(x)` at a boundary point.
    pub fn boundary_normal(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            AmbitSet::Ball { center, radius } => {
                let v: Vec<f64> = x.iter().zip(center).map(|(a, c)| a - c).collect();
                let n = norm(&v);
                if (n - radius).abs() > 1e-9 * radius.max(1.0) {
                    return Err(Error::InvalidParameter(format!("{x:?} is not on the boundary of the ball")));
                }
                Ok(v.iter().map(|a| a / n).collect())
            }
            AmbitSet::Box(b) => {
                let tol = 1e-12 * (1.0 + b.max.iter().chain(&b.min).fold(0.0f64, |m, v| m.max(v.abs())));
                if x.iter().enumerate().any(|(k, v)| *v < b.min[k] - tol || *v > b.max[k] + tol) {
                    return Err(Error::InvalidParameter(format!("{x:?} lies outside the box")));
                }
                let mut normal = vec![0.0; x.len()];
                let mut faces = 0;
                for k in 0..x.len() {
                    if (x[k] - b.min[k]).abs() <= tol {
                        normal[k] = -1.0;
                        faces += 1;
                    } else if (x[k] - b.max[k]).abs() <= tol {
                        normal[k] = 1.0;
                        faces += 1;
                    }
                }
                match faces {
                    1 => Ok(normal),
                    0 => Err(Error::InvalidParameter(format!("{x:?} is not on the boundary of the box"))),
                    _ => Err(Error::UndefinedNormal { point: x.to_vec() }),
                }
            }
        }
    }

    /// Surface rule on `∂A` with `n` nodes per unit of angular or face
    /// resolution. Box nodes are Gauss-Legendre points, strictly inside faces.
    pub fn boundary_quadrature(&self, n: usize) -> SurfaceQuadrature {
        let d = self.dim();
        match self {
            AmbitSet::Ball { center, radius } => AffineSphere::unit(d)
                .quadrature(Resolution::with_nodes(d, n))
                .scaled(*radius, center),
            AmbitSet::Box(b) => {
                let mut points = Vec::new();
                let mut normals = Vec::new();
                let mut weights = Vec::new();
                let per_face = if d == 2 { n.max(2) / 4 + 1 } else { ((n as f64).sqrt() as usize).max(4) };
                for axis in 0..d {
                    for (side, level) in [(-1.0, b.min[axis]), (1.0, b.max[axis])] {
                        let others: Vec<usize> = (0..d).filter(|&k| k != axis).collect();
                        let rules: Vec<(Vec<f64>, Vec<f64>)> = others
                            .iter()
                            .map(|&k| gauss_legendre_interval(per_face, b.min[k], b.max[k]))
                            .collect();
                        let count = per_face.pow(others.len() as u32);
                        for idx in 0..count {
                            let mut p = vec![0.0; d];
                            let mut w = 1.0;
                            let mut rem = idx;
                            for (o, &k) in others.iter().enumerate() {
                                let i = rem % per_face;
                                rem /= per_face;
                                p[k] = rules[o].0[i];
                                w *= rules[o].1[i];
                            }
                            p[axis] = level;
                            let mut nrm = vec![0.0; d];
                            nrm[axis] = side;
                            points.extend(p);
                            normals.extend(nrm);
                            weights.push(w);
                        }
                    }
                }
                SurfaceQuadrature::from_parts(d, points, normals, weights)
            }
        }
    }

    /// Product Gauss rule on `A` (polar for balls, tensor for boxes) with
    /// `n` nodes per direction; points are returned relative to the origin.
    pub fn volume_quadrature(&self, n: usize) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let mut points = Vec::new();
        let mut weights = Vec::new();
        match self {
            AmbitSet::Ball { center, radius } => {
                let (rs, rw) = gauss_legendre_interval(n, 0.0, *radius);
                let sphere = AffineSphere::unit(d).quadrature(Resolution::with_nodes(d, 2 * n));
                for (rho, w) in rs.iter().zip(&rw) {
                    let jac = rho.powi(d as i32 - 1);
                    for j in 0..sphere.len() {
                        let omega = sphere.point(j);
                        points.extend((0..d).map(|k| center[k] + rho * omega[k]));
                        weights.push(w * jac * sphere.weight(j));
                    }
                }
            }
            AmbitSet::Box(b) => {
                let rules: Vec<(Vec<f64>, Vec<f64>)> =
                    (0..d).map(|k| gauss_legendre_interval(n, b.min[k], b.max[k])).collect();
                for idx in 0..n.pow(d as u32) {
                    let mut rem = idx;
                    let mut w = 1.0;
                    for rule in &rules {
                        let i = rem % n;
                        rem /= n;
                        points.push(rule.0[i]);
                        w *= rule.1[i];
                    }
                    weights.push(w);
                }
            }
        }
        (points, weights)
    }

    /// `H^{d-1}(∂A)`.
    pub fn boundary_measure(&self) -> f64 {
        match self {
            AmbitSet::Ball { center, radius } => {
                if center.len() == 2 {
                    2.0 * PI * radius
                } else {
                    4.0 * PI * radius * radius
                }
            }
            AmbitSet::Box(b) => {
                let l: Vec<f64> = b.min.iter().zip(&b.max).map(|(a, c)| c - a).collect();
                if l.len() == 2 {
                    2.0 * (l[0] + l[1])
                } else {
                    2.0 * (l[0] * l[1] + l[1] * l[2] + l[0] * l[2])
                }
            }
        }
    }

    /// `Leb(A ∩ (A + delta))`.
    pub fn overlap_volume(&self, delta: &[f64]) -> f64 {
        match self {
            AmbitSet::Ball { center, radius } => {
                let r = *radius;
                let s = norm(delta);
                if s >= 2.0 * r {
                    return 0.0;
                }
                if center.len() == 2 {
                    2.0 * r * r * (s / (2.0 * r)).acos() - 0.5 * s * (4.0 * r * r - s * s).sqrt()
                } else {
                    PI * (4.0 * r + s) * (2.0 * r - s).powi(2) / 12.0
                }
            }
            AmbitSet::Box(b) => b
                .min
                .iter()
                .zip(&b.max)
                .zip(delta)
                .map(|((a, c), t)| (c - a - t.abs()).max(0.0))
                .product(),
        }
    }

    /// Membership of `q` in the erosion `A ⊖ rM` and the dilation `A ⊕ rM`.
    pub fn erosion_membership(&self, m: &AffineSphere, r: f64, q: &[f64]) -> (bool, bool) {
        if r == 0.0 {
            let inside = self.contains(q);
            return (inside, inside);
        }
        match self {
            AmbitSet::Ball { center, radius } => {
                let v: Vec<f64> = q.iter().zip(center).map(|(a, c)| a - c).collect();
                if is_identity(m) {
                    let dist = norm(&v);
                    (dist + r <= *radius, (dist - r).abs() <= *radius)
                } else {
                    let far = m.extremize(|y| dist2_scaled(&v, y, r), true).sqrt();
                    let near = m.extremize(|y| dist2_scaled(&v, y, r), false).max(0.0).sqrt();
                    (far <= *radius, near <= *radius)
                }
            }
            AmbitSet::Box(b) => {
                let d = q.len();
                let h: Vec<f64> = (0..d).map(|k| m.support_function(&unit(d, k))).collect();
                let eroded = (0..d).all(|k| q[k] >= b.min[k] + r * h[k] && q[k] <= b.max[k] - r * h[k]);
                (eroded, box_dilation_contains(b, m, r, q))
            }
        }
    }

    /// `Leb(A ⊖ rM)`.
    pub fn erosion_volume(&self, m: &AffineSphere, r: f64) -> Result<f64> {
        let d = self.dim();
        match self {
            AmbitSet::Ball { radius, .. } => {
                let op = operator_norm(m);
                if r * op >= *radius {
                    return Err(Error::EmptyErosion { radius: r });
                }
                if is_identity(m) {
                    return Ok(ball_volume(d, radius - r));
                }
                if d != 2 {
                    return Err(Error::Unsupported(
                        "erosion volume of a ball by a non-spherical M is implemented for d = 2 only".into(),
                    ));
                }
                Ok(eroded_ball_area(*radius, m, r))
            }
            AmbitSet::Box(b) => {
                let mut vol = 1.0;
                for k in 0..d {
                    let l = b.max[k] - b.min[k] - 2.0 * r * m.support_function(&unit(d, k));
                    if l <= 0.0 {
                        return Err(Error::EmptyErosion { radius: r });
                    }
                    vol *= l;
                }
                Ok(vol)
            }
        }
    }

    /// `∫_{∂A} h_M(−n_A(x))⁺ H^{d−1}(dx)`.
    pub fn predicted_erosion_slope(&self, m: &AffineSphere) -> Result<f64> {
        match self {
            AmbitSet::Box(b) => {
                let d = b.dim();
                let mut total = 0.0;
                for axis in 0..d {
                    let face: f64 = (0..d).filter(|&k| k != axis).map(|k| b.max[k] - b.min[k]).product();
                    let e = unit(d, axis);
                    let minus: Vec<f64> = e.iter().map(|v| -v).collect();
                    total += face * (m.support_function(&e).max(0.0) + m.support_function(&minus).max(0.0));
                }
                Ok(total)
            }
            AmbitSet::Ball { .. } => {
                let d = self.dim();
                let mut n = if d == 2 { 512 } else { 128 };
                let mut prev = f64::NAN;
                for _ in 0..6 {
                    let q = self.boundary_quadrature(n);
                    let v = q.integrate_scalar(|_, nrm| {
                        let minus: Vec<f64> = nrm.iter().map(|v| -v).collect();
                        m.support_function(&minus).max(0.0)
                    })?;
                    if (v - prev).abs() <= 1e-8 * v.abs() {
                        return Ok(v);
                    }
                    prev = v;
                    n *= 2;
                }
                Ok(prev)
            }
        }
    }

    /// Erosion volume `Leb(A \ A⊖rM)`, its first-order slope `volume/r`, and
    /// the predicted limit of that slope.
    pub fn erosion_volume_asymptote(&self, m: &AffineSphere, r: f64) -> Result<ErosionAsymptote> {
        if !(r > 0.0) {
            return Err(Error::InvalidParameter(format!("erosion radius must be positive, got {r}")));
        }
        let volume = self.volume() - self.erosion_volume(m, r)?;
        Ok(ErosionAsymptote {
            volume,
            slope_estimate: volume / r,
            predicted_slope: self.predicted_erosion_slope(m)?,
        })
    }
}

fn ball_volume(dim: usize, r: f64) -> f64 {
    if dim == 2 {
        PI * r * r
    } else {
        4.0 / 3.0 * PI * r.powi(3)
    }
}

fn is_identity(m: &AffineSphere) -> bool {
    let t = m.matrix();
    (0..t.nrows()).all(|i| (0..t.ncols()).all(|j| t[(i, j)] == if i == j { 1.0 } else { 0.0 }))
}

fn operator_norm(m: &AffineSphere) -> f64 {
    m.matrix().clone().svd(false, false).singular_values.max()
}

fn unit(d: usize, k: usize) -> Vec<f64> {
    let mut e = vec![0.0; d];
    e[k] = 1.0;
    e
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `‖v − r·y‖²`.
fn dist2_scaled(v: &[f64], y: &[f64], r: f64) -> f64 {
    v.iter().zip(y).map(|(a, b)| (a - r * b).powi(2)).sum()
}

/// Exact test of `q ∈ B ⊕ rM` for a box `B`. The domain `𝔇` is convex, so
/// `q − r𝔇̄` meets `B` iff the `𝔇`-gauge distance from `q` to `B` is at most
/// `r`; the sphere `q − rM` then meets `B` unless `B` sits inside the open
/// domain `q − r𝔇`, which for convex sets is decided at the vertices.
fn box_dilation_contains(b: &BoxRegion, m: &AffineSphere, r: f64, q: &[f64]) -> bool {
    let d = q.len();
    let tinv = m.matrix().clone().try_inverse().expect("T is invertible");
    let gauge = |x: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..d {
            let v: f64 = (0..d).map(|j| tinv[(i, j)] * x[j]).sum();
            s += v * v;
        }
        s.sqrt()
    };
    // minimize ‖T^{-1}(q − p)‖ over p ∈ B by exact coordinate descent
    let ata = tinv.transpose() * &tinv;
    let mut p: Vec<f64> = (0..d).map(|k| q[k].clamp(b.min[k], b.max[k])).collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for k in 0..d {
            // quadratic in p_k: (p − q)' A (p − q)
            let mut lin = 0.0;
            for j in 0..d {
                if j != k {
                    lin += ata[(k, j)] * (p[j] - q[j]);
                }
            }
            let target = (q[k] - lin / ata[(k, k)]).clamp(b.min[k], b.max[k]);
            moved = moved.max((target - p[k]).abs());
            p[k] = target;
        }
        if moved < 1e-15 {
            break;
        }
    }
    let diff: Vec<f64> = q.iter().zip(&p).map(|(a, c)| a - c).collect();
    if gauge(&diff) > r * (1.0 + 1e-12) {
        return false;
    }
    let vertices = 1usize << d;
    let all_inside = (0..vertices).all(|mask| {
        let v: Vec<f64> = (0..d)
            .map(|k| q[k] - if mask >> k & 1 == 1 { b.max[k] } else { b.min[k] })
            .collect();
        gauge(&v) < r
    });
    !all_inside
}

/// Area of `B(0,R) ⊖ rM` in d = 2 by its radial function: the erosion is
/// convex and centrally symmetric, so its boundary radius is found by
/// bisection along each direction.
fn eroded_ball_area(radius: f64, m: &AffineSphere, r: f64) -> f64 {
    let n = 720;
    let h = 2.0 * PI / n as f64;
    let mut area = 0.0;
    for k in 0..n {
        let th = (k as f64 + 0.5) * h;
        let dir = [th.cos(), th.sin()];
        let (mut lo, mut hi) = (0.0, radius);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let v = [mid * dir[0], mid * dir[1]];
            let far = m.extremize(|y| dist2_scaled(&v, y, r), true).sqrt();
            if far <= radius {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        area += 0.5 * lo * lo * h;
    }
    area
}
