//! Local limit fields: the boundary control measures `μ±`, the kernel `G`
//! with its semi-closed form, the path derivative `g`, and cell-partition
//! samplers for `Y^α`.

mod control;
mod sampler;

pub use control::{control_mass, BoundaryControlMeasure, ControlCell, Sign};
pub use sampler::{DEGENERATE_SCALE, 
    check_resolution, default_boundary_nodes, refinement_distance, LimitSampler, ScalarLaw, RESOLUTION_KS_THRESHOLD,
};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::field::Kernel;
use crate::flux::SurfaceWeight;
use crate::geometry::{AffineSphere, AmbitSet};
use crate::levy::StableSpec;
use crate::quadrature::integrate;

/// Default number of time slices of a control-measure partition.
pub const DEFAULT_SLICES: usize = 200;
/// Default boundary resolution of a control-measure partition.
pub const DEFAULT_PATCHES: usize = 256;
/// Cap-quadrature order for stand-alone kernel evaluations.
pub const CAP_ORDER: usize = 2048;
/// Cap-quadrature order used when filling sampler coefficients.
pub const SAMPLER_CAP_ORDER: usize = 64;
/// Contract for the absolute-continuity residual.
pub const AC_TOLERANCE: f64 = 1e-8;

/// Everything the limit field `Y^α` depends on: the seed law of `Λ±`, the
/// ambit set `A`, the surface `M = T·S^{d−1}`, the kernel and `p0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitFieldSpec {
    seed: StableSpec,
    shape: AmbitSet,
    sphere: AffineSphere,
    kernel: Kernel,
    p0: Vec<f64>,
}

impl LimitFieldSpec {
    pub fn new(seed: StableSpec, shape: AmbitSet, sphere: AffineSphere, kernel: Kernel, p0: Vec<f64>) -> Result<Self> {
        let d = shape.dim();
        if !(d == 2 || d == 3) {
            return Err(Error::Unsupported(format!("dimension {d}; only d ∈ {{2, 3}} is supported")));
        }
        if sphere.dim() != d || kernel.dim() != d || p0.len() != d {
            return Err(Error::InvalidParameter(format!(
                "dimension mismatch: A is {d}-dimensional, M {}, kernel {}, p0 {}",
                sphere.dim(),
                kernel.dim(),
                p0.len()
            )));
        }
        if kernel.mark_dim() != seed.dim() {
            return Err(Error::InvalidParameter(format!(
                "kernel expects marks of dimension {}, the seed law has {}",
                kernel.mark_dim(),
                seed.dim()
            )));
        }
        Ok(Self {
            seed,
            shape,
            sphere,
            kernel,
            p0,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.seed.alpha()
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    pub fn mark_dim(&self) -> usize {
        self.seed.dim()
    }

    pub fn seed(&self) -> &StableSpec {
        &self.seed
    }

    pub fn shape(&self) -> &AmbitSet {
        &self.shape
    }

    pub fn sphere(&self) -> &AffineSphere {
        &self.sphere
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn p0(&self) -> &[f64] {
        &self.p0
    }

    /// `F(p0, p0 + x)` as a `d×m` matrix, for `x` on `∂A`.
    pub fn kernel_value(&self, x: &[f64]) -> DMatrix<f64> {
        let q: Vec<f64> = self.p0.iter().zip(x).map(|(a, b)| a + b).collect();
        self.kernel.matrix() * self.kernel.scalar(&self.p0, &q)
    }

    /// `G(t, f, s, x, n)`, a row of length `m`. Uses the semi-closed form
    /// when `f` is linear in `u_M`, cap quadrature otherwise.
    pub fn kernel_g(&self, t: f64, f: &SurfaceWeight, s: f64, x: &[f64], n: &[f64]) -> Result<Vec<f64>> {
        match self.kernel_g_semiclosed(t, f, s, x, n)? {
            Some(g) => Ok(g),
            None => self.kernel_g_cap(t, f, s, x, n, CAP_ORDER),
        }
    }

    /// As [`Self::kernel_g`] with the cap rule at [`SAMPLER_CAP_ORDER`], for
    /// use inside outer quadratures.
    fn kernel_g_quick(&self, t: f64, f: &SurfaceWeight, s: f64, x: &[f64], n: &[f64]) -> Result<Vec<f64>> {
        match self.kernel_g_semiclosed(t, f, s, x, n)? {
            Some(g) => Ok(g),
            None => self.kernel_g_cap(t, f, s, x, n, SAMPLER_CAP_ORDER),
        }
    }

    /// `[∫_M f(y)′ 1{t·y·n ≥ h_M(n)s} dH^{d−1}(dy)]·F(p0, x)` by a rule on
    /// the cap `{y·n ≥ h_M(n)s/t}`.
    pub fn kernel_g_cap(
        &self,
        t: f64,
        f: &SurfaceWeight,
        s: f64,
        x: &[f64],
        n: &[f64],
        order: usize,
    ) -> Result<Vec<f64>> {
        let m = self.mark_dim();
        if !(t > 0.0) || s >= t {
            return Ok(vec![0.0; m]);
        }
        let d = self.dim();
        let quad = self.sphere.cap_quadrature(n, s / t, order);
        let vals = f.values(&quad)?;
        let mut v = vec![0.0; d];
        for j in 0..quad.len() {
            for c in 0..d {
                v[c] += quad.weight(j) * vals[j * d + c];
            }
        }
        Ok(row_times(&v, &self.kernel_value(x)))
    }

    /// For `f = B·u_M`: `G = H^{d−1}(𝔇 ∩ 𝔥(h_M(n)s/t, n))·(Bn)′F(p0, x)`.
    /// `None` when `f` is not linear in the normal.
    pub fn kernel_g_semiclosed(
        &self,
        t: f64,
        f: &SurfaceWeight,
        s: f64,
        x: &[f64],
        n: &[f64],
    ) -> Result<Option<Vec<f64>>> {
        let d = self.dim();
        let Some(b) = f.normal_matrix(d) else {
            return Ok(None);
        };
        let m = self.mark_dim();
        if !(t > 0.0) || s >= t {
            return Ok(Some(vec![0.0; m]));
        }
        let section = self.sphere.hyperplane_section_measure(n, s / t);
        let bn = mat_vec(&b, n);
        let v: Vec<f64> = bn.iter().map(|c| c * section).collect();
        Ok(Some(row_times(&v, &self.kernel_value(x))))
    }

    /// `g(t, s, x, n) = ∂_tφ(s/t)·H^{d−1}(T(D_1 ∩ υ(n)^⊥))·(Bn)′F(p0, x)`
    /// for `f = B·u_M`, with `φ(ρ) = (1−ρ²)^{(d−1)/2}`; zero for `s ≥ t`.
    pub fn kernel_g_derivative_weight(&self, t: f64, f: &SurfaceWeight, s: f64, x: &[f64], n: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        let b = f
            .normal_matrix(d)
            .ok_or_else(|| Error::Unsupported("the path derivative needs a weight linear in the normal".into()))?;
        let m = self.mark_dim();
        if !(t > 0.0 && s > 0.0) || s >= t {
            return Ok(vec![0.0; m]);
        }
        let factor = profile_time_derivative(s, t, profile_exponent(d)) * self.sphere.central_section_measure(n);
        let v: Vec<f64> = mat_vec(&b, n).iter().map(|c| c * factor).collect();
        Ok(row_times(&v, &self.kernel_value(x)))
    }

    /// `g` for `f = e_j ⊗ e_i·u_M`: `∂_tφ(s/t)·(n·e_i)·e_j′F(p0, x)·H^{d−1}(T(D_1 ∩ υ(n)^⊥))`.
    pub fn kernel_g_derivative(&self, t: f64, s: f64, x: &[f64], n: &[f64], i: usize, j: usize) -> Result<Vec<f64>> {
        self.check_indices(i, j)?;
        self.kernel_g_derivative_weight(t, &SurfaceWeight::normal_component(i, j), s, x, n)
    }

    /// `|∫_s^t g(r, s, x, n) dr − G(t, e_j ⊗ e_i·u_M, s, x, n)|` (max over
    /// the `m` entries).
    pub fn verify_ac_identity(&self, s: f64, x: &[f64], n: &[f64], t: f64, i: usize, j: usize) -> Result<f64> {
        self.ac_residual(s, x, n, t, i, j, profile_exponent(self.dim()))
    }

    /// As [`Self::verify_ac_identity`] with `g` built from the profile
    /// `(1−ρ²)^e`. The true exponent is `(d−1)/2`; any other value must
    /// produce a residual (fault injection).
    #[allow(clippy::too_many_arguments)]
    pub fn ac_residual(&self, s: f64, x: &[f64], n: &[f64], t: f64, i: usize, j: usize, exponent: f64) -> Result<f64> {
        self.check_indices(i, j)?;
        let m = self.mark_dim();
        let g_closed = self
            .kernel_g_semiclosed(t, &SurfaceWeight::normal_component(i, j), s, x, n)?
            .expect("normal components are linear in u_M");
        if s >= t {
            return Ok(g_closed.iter().fold(0.0, |a, v| a.max(v.abs())));
        }
        // r = s/cosθ turns ∫_s^t ∂_rφ(s/r) dr into ∫_0^{acos(s/t)} 2e·cosθ·sin^{2e−1}θ dθ,
        // which is smooth at the endpoint r = s for e ≥ 1/2.
        let upper = (s / t).acos();
        let e = exponent;
        let integral = integrate(|th: f64| 2.0 * e * th.cos() * th.sin().powf(2.0 * e - 1.0), 0.0, upper, 1e-14, 1e-13)?;
        let scale = n[i] * self.sphere.central_section_measure(n);
        let f = self.kernel_value(x);
        Ok((0..m)
            .map(|k| (integral.value * scale * f[(j, k)] - g_closed[k]).abs())
            .fold(0.0, f64::max))
    }

    fn check_indices(&self, i: usize, j: usize) -> Result<()> {
        let d = self.dim();
        if i >= d || j >= d {
            return Err(Error::InvalidParameter(format!("indices ({i}, {j}) must be below {d}")));
        }
        Ok(())
    }

    /// `Var Y²(t, f) = Σ_± ∫ G Σ G′ dμ±`, computed by adaptive quadrature in
    /// `s` over a fixed rule on `∂A`.
    pub fn gaussian_variance(&self, t: f64, f: &SurfaceWeight, boundary_nodes: usize) -> Result<f64> {
        if self.alpha() != 2.0 {
            return Err(Error::InvalidParameter("the variance exists only for α = 2".into()));
        }
        let sigma = self.seed.sigma();
        let quad = self.shape.boundary_quadrature(boundary_nodes);
        let mut total = 0.0;
        for sign in [Sign::Plus, Sign::Minus] {
            for jx in 0..quad.len() {
                let x = quad.point(jx);
                let n: Vec<f64> = quad.normal(jx).iter().map(|v| sign.factor() * v).collect();
                let h = self.sphere.support_function(&n).max(0.0);
                if h == 0.0 {
                    continue;
                }
                let mut err = None;
                let inner = integrate(
                    |s| match self.kernel_g_quick(t, f, s, x, &n) {
                        Ok(g) => quad_form(sigma, &g),
                        Err(e) => {
                            err = Some(e);
                            0.0
                        }
                    },
                    0.0,
                    t,
                    1e-12,
                    1e-10,
                )?;
                if let Some(e) = err {
                    return Err(e);
                }
                total += quad.weight(jx) * h * inner.value;
            }
        }
        Ok(total)
    }

    /// Drift-only check of the boundary representation. The left entry is
    /// `Σ_± ±∫ G(t, f, s, x, ±n_A)·γ₀ dμ±`, by quadrature over `(0, t) × ∂A`.
    /// The right entry is `t·∫_M f(y)′ D y dH^{d−1}` with
    /// `D_ik = Σ_j ∫_A ∂_{k+d}F^{(i,j)}(p0, p0+q) γ₀^{(j)} dq`, by volume quadrature.
    pub fn fv_limit_field_check(&self, gamma0: &[f64], f: &SurfaceWeight, t: f64) -> Result<(f64, f64)> {
        let d = self.dim();
        let m = self.mark_dim();
        if gamma0.len() != m {
            return Err(Error::InvalidParameter(format!("γ₀ must have length {m}")));
        }
        let quad = self.shape.boundary_quadrature(256);
        let mut left = 0.0;
        for sign in [Sign::Plus, Sign::Minus] {
            for jx in 0..quad.len() {
                let x = quad.point(jx);
                let n: Vec<f64> = quad.normal(jx).iter().map(|v| sign.factor() * v).collect();
                let h = self.sphere.support_function(&n).max(0.0);
                if h == 0.0 {
                    continue;
                }
                let mut err = None;
                let inner = integrate(
                    |s| match self.kernel_g_quick(t, f, s, x, &n) {
                        Ok(g) => g.iter().zip(gamma0).map(|(a, b)| a * b).sum(),
                        Err(e) => {
                            err = Some(e);
                            0.0
                        }
                    },
                    0.0,
                    t,
                    1e-13,
                    1e-11,
                )?;
                if let Some(e) = err {
                    return Err(e);
                }
                left += sign.factor() * quad.weight(jx) * h * inner.value;
            }
        }

        let c_gamma = mat_vec(self.kernel.matrix(), gamma0);
        let (points, weights) = self.shape.volume_quadrature(48);
        let mut a = vec![0.0; d];
        for (q, w) in points.chunks(d).zip(&weights) {
            let qa: Vec<f64> = self.p0.iter().zip(q).map(|(p, v)| p + v).collect();
            for (k, ak) in a.iter_mut().enumerate() {
                *ak += w * self.kernel.d_q(&self.p0, &qa, k);
            }
        }
        let mq = self.sphere.quadrature(crate::geometry::Resolution::default_for(d));
        let fv = f.values(&mq)?;
        let mut right = 0.0;
        for j in 0..mq.len() {
            let y = mq.point(j);
            let ay: f64 = a.iter().zip(y).map(|(u, v)| u * v).sum();
            let fc: f64 = (0..d).map(|i| fv[j * d + i] * c_gamma[i]).sum();
            right += mq.weight(j) * fc * ay;
        }
        Ok((left, t * right))
    }
}

/// `(d−1)/2`, the exponent of the section profile `φ(ρ) = (1−ρ²)^{(d−1)/2}`.
pub fn profile_exponent(d: usize) -> f64 {
    (d as f64 - 1.0) / 2.0
}

/// `∂_t (1−(s/t)²)^e = 2e·ρ³(1−ρ²)^{e−1}/s` with `ρ = s/t`.
pub fn profile_time_derivative(s: f64, t: f64, e: f64) -> f64 {
    let rho = s / t;
    if rho >= 1.0 {
        return 0.0;
    }
    2.0 * e * rho.powi(3) * (1.0 - rho * rho).powf(e - 1.0) / s
}

fn mat_vec(a: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)] * x[j]).sum()).collect()
}

/// `v′F` for `F` of shape `d×m`.
fn row_times(v: &[f64], f: &DMatrix<f64>) -> Vec<f64> {
    (0..f.ncols()).map(|k| (0..f.nrows()).map(|i| v[i] * f[(i, k)]).sum()).collect()
}

fn quad_form(sigma: &DMatrix<f64>, g: &[f64]) -> f64 {
    let m = g.len();
    let mut acc = 0.0;
    for a in 0..m {
        for b in 0..m {
            acc += g[a] * sigma[(a, b)] * g[b];
        }
    }
    acc
}
