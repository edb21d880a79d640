//! Ambit fields `X(p) = ∫_{A+p} F(p, q) L(dq)` driven by a homogeneous Lévy basis.
//!
//! A [`FieldSpec`] fixes the ambit set, the kernel and the basis. A
//! [`FieldRealization`] freezes the Poisson jumps over a bounding box and the
//! key of its Gaussian stream. An [`EvaluationPlan`] fixes a set of points; it
//! holds the deterministic drift values and the factorized Gaussian covariance
//! and is shared by all replications evaluated on those points.

mod gaussian;
mod kernel;

use std::sync::Arc;

use nalgebra::DMatrix;

pub use gaussian::{radical_inverse, GaussianFactor, QMC_NODES};
pub use kernel::{Kernel, Profile};

use crate::error::{Error, Result};
use crate::geometry::{AmbitSet, BoxRegion, Membership, SurfaceQuadrature};
use crate::levy::{
    psd_factor, sample_poisson_jumps, stable_kappa, JumpConfiguration, LevyMeasureSpec, LevyTriplet, PolarComponent,
    RadialLaw, StableSpec, DEFAULT_FV_TRUNCATION,
};
use crate::rng::{Domain, StreamKey};

/// Jump truncation used for infinite-variation bases: jumps of norm at most
/// this level are replaced by a Gaussian with the same covariance.
pub const DEFAULT_IV_TRUNCATION: f64 = 1e-2;

/// Gauss nodes per direction of the volume rule for drift integrals.
const VOLUME_NODES: usize = 48;

/// The Lévy basis driving a field.
#[derive(Debug, Clone)]
pub enum Basis {
    Triplet(LevyTriplet),
    Stable(StableSpec),
}

impl Basis {
    pub fn dim(&self) -> usize {
        match self {
            Basis::Triplet(t) => t.dim(),
            Basis::Stable(s) => s.dim(),
        }
    }
}

/// Index convention for the drift factor in the `∂_{k+d}` term of `DX`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DxConvention {
    /// `Σ_j ∂_{k+d}F^{(i,j)} γ₀^{(j)}`, consistent with the drift of `X`.
    #[default]
    Consistent,
    /// `Σ_j ∂_{k+d}F^{(i,j)} γ₀^{(i)}`, the index as printed in the source.
    PrintedIndex,
    /// The consistent form with the `∂_{k+d}` term negated. Deliberately
    /// wrong; a fault-injection canary for the index convention.
    FlippedSign,
}

/// Simulation form of the basis: jumps above `eps`, a deterministic drift
/// per unit volume and a Gaussian part.
#[derive(Debug, Clone)]
struct Driver {
    nu: LevyMeasureSpec,
    eps: f64,
    drift: Vec<f64>,
    gamma: Vec<f64>,
    gamma0: Option<Vec<f64>>,
    gauss: Option<DMatrix<f64>>,
    finite_variation: bool,
}

impl Driver {
    fn from_basis(basis: &Basis, eps: Option<f64>) -> Result<Self> {
        match basis {
            Basis::Triplet(t) => Self::from_triplet(t.gamma().to_vec(), t.sigma().clone(), t.nu().clone(), eps),
            Basis::Stable(s) if s.alpha() == 2.0 => {
                let m = s.dim();
                Self::from_triplet(vec![0.0; m], s.sigma().clone(), LevyMeasureSpec::zero(m), eps)
            }
            Basis::Stable(s) => {
                // Lévy density λ(du)s^{−1−α}ds with λ = λ̄/κ_α on all of (0, ∞)
                let kappa = stable_kappa(s.alpha());
                let comps = s
                    .atoms()
                    .iter()
                    .map(|(u, w)| PolarComponent {
                        direction: u.clone(),
                        weight: w / kappa,
                        radial: RadialLaw::PowerTail {
                            alpha: s.alpha(),
                            c: 1.0,
                            cutoff: f64::INFINITY,
                        },
                    })
                    .collect();
                let nu = LevyMeasureSpec::new(s.dim(), comps)?;
                Self::from_triplet(s.triplet_drift(), s.sigma().clone(), nu, eps)
            }
        }
    }

    fn from_triplet(gamma: Vec<f64>, sigma: DMatrix<f64>, nu: LevyMeasureSpec, eps: Option<f64>) -> Result<Self> {
        let m = gamma.len();
        let has_sigma = sigma.iter().any(|v| *v != 0.0);
        if nu.is_finite_variation() {
            let eps = if nu.is_finite_activity() {
                0.0
            } else {
                eps.unwrap_or(DEFAULT_FV_TRUNCATION)
            };
            let small1 = nu.small_mean(1.0);
            let gamma0: Vec<f64> = gamma.iter().zip(&small1).map(|(a, b)| a - b).collect();
            let below = nu.small_mean(eps);
            let drift = gamma0.iter().zip(&below).map(|(a, b)| a + b).collect();
            let gauss = if has_sigma { Some(psd_factor(&sigma)?) } else { None };
            Ok(Self {
                nu,
                eps,
                drift,
                gamma,
                gamma0: Some(gamma0),
                gauss,
                finite_variation: !has_sigma,
            })
        } else {
            let eps = eps.unwrap_or(DEFAULT_IV_TRUNCATION);
            if !(eps > 0.0 && eps < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "infinite-variation bases need a jump truncation in (0, 1), got {eps}"
                )));
            }
            let mid = nu.mid_mean(eps);
            let drift = gamma.iter().zip(&mid).map(|(a, b)| a - b).collect();
            let second = nu.small_second_moment(eps);
            let cov = DMatrix::from_fn(m, m, |i, j| sigma[(i, j)] + second[i * m + j]);
            Ok(Self {
                nu,
                eps,
                drift,
                gamma,
                gamma0: None,
                gauss: Some(psd_factor(&cov)?),
                finite_variation: false,
            })
        }
    }
}

/// Shape, kernel and basis of an ambit field.
#[derive(Debug, Clone)]
pub struct FieldSpec {
    shape: AmbitSet,
    kernel: Kernel,
    basis: Basis,
    driver: Driver,
    volume_points: Vec<f64>,
    volume_weights: Vec<f64>,
}

impl FieldSpec {
    pub fn new(shape: AmbitSet, kernel: Kernel, basis: Basis) -> Result<Self> {
        Self::build(shape, kernel, basis, None)
    }

    /// As [`Self::new`] with an explicit jump truncation level `eps`.
    pub fn with_truncation(shape: AmbitSet, kernel: Kernel, basis: Basis, eps: f64) -> Result<Self> {
        Self::build(shape, kernel, basis, Some(eps))
    }

    fn build(shape: AmbitSet, kernel: Kernel, basis: Basis, eps: Option<f64>) -> Result<Self> {
        if kernel.dim() != shape.dim() {
            return Err(Error::InvalidParameter(format!(
                "kernel output dimension {} differs from the space dimension {}",
                kernel.dim(),
                shape.dim()
            )));
        }
        if kernel.mark_dim() != basis.dim() {
            return Err(Error::InvalidParameter(format!(
                "kernel mark dimension {} differs from the basis dimension {}",
                kernel.mark_dim(),
                basis.dim()
            )));
        }
        let driver = Driver::from_basis(&basis, eps)?;
        let (volume_points, volume_weights) = shape.volume_quadrature(VOLUME_NODES);
        Ok(Self {
            shape,
            kernel,
            basis,
            driver,
            volume_points,
            volume_weights,
        })
    }

    pub fn shape(&self) -> &AmbitSet {
        &self.shape
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    /// Jump truncation level (0 when every jump is simulated).
    pub fn truncation(&self) -> f64 {
        self.driver.eps
    }

    /// Deterministic drift per unit volume after truncation.
    pub fn effective_drift(&self) -> &[f64] {
        &self.driver.drift
    }

    /// The drift `γ` of the basis in the cutoff convention.
    pub fn gamma(&self) -> &[f64] {
        &self.driver.gamma
    }

    /// `γ₀`, defined when the Lévy measure has finite variation.
    pub fn gamma0(&self) -> Option<&[f64]> {
        self.driver.gamma0.as_deref()
    }

    /// `Σ = 0` and finite-variation `ν`.
    pub fn is_finite_variation(&self) -> bool {
        self.driver.finite_variation
    }

    pub fn has_gaussian_part(&self) -> bool {
        self.driver.gauss.is_some()
    }

    /// Box containing `A + p` for every `p` within `reach` of `p0`.
    pub fn bounding_region(&self, p0: &[f64], reach: f64) -> BoxRegion {
        let bb = self.shape.bounding_box();
        let min = bb.min.iter().zip(p0).map(|(a, p)| a + p - reach).collect();
        let max = bb.max.iter().zip(p0).map(|(a, p)| a + p + reach).collect();
        BoxRegion { min, max }
    }

    /// `∫_{A+p} s(p, q) dq`.
    pub fn kernel_mass(&self, p: &[f64]) -> f64 {
        if self.kernel.is_constant() {
            return self.shape.volume();
        }
        let d = self.dim();
        let mut q = vec![0.0; d];
        let mut total = 0.0;
        for (j, w) in self.volume_weights.iter().enumerate() {
            for c in 0..d {
                q[c] = p[c] + self.volume_points[j * d + c];
            }
            total += w * self.kernel.scalar(p, &q);
        }
        total
    }

    /// Plan for evaluating the field at `points` (flat, `n×d`); the first
    /// point is the reference for increments.
    pub fn plan(&self, points: Vec<f64>) -> Result<EvaluationPlan> {
        let d = self.dim();
        if points.is_empty() || points.len() % d != 0 {
            return Err(Error::InvalidParameter(format!(
                "evaluation points must be a nonempty multiple of d = {d}"
            )));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("evaluation points must be finite".into()));
        }
        let n = points.len() / d;
        let p0 = points[..d].to_vec();
        let rho = (1..n)
            .map(|i| (0..d).map(|c| (points[i * d + c] - p0[c]).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        let mut cg = vec![0.0; d];
        self.kernel.matrix_apply_add(1.0, &self.driver.drift, &mut cg);
        let mass0 = self.kernel_mass(&p0);
        let drift0: Vec<f64> = cg.iter().map(|v| v * mass0).collect();
        let mut drift_diff = vec![0.0; n * d];
        if !self.kernel.is_constant() {
            for i in 1..n {
                let dm = self.kernel_mass(&points[i * d..(i + 1) * d]) - mass0;
                for c in 0..d {
                    drift_diff[i * d + c] = cg[c] * dm;
                }
            }
        }
        let gaussian = match &self.driver.gauss {
            Some(l) => {
                let out = self.kernel.matrix() * l;
                Some(GaussianFactor::assemble(&self.shape, &self.kernel, &points, out)?)
            }
            None => None,
        };
        let mut lo = p0.clone();
        let mut hi = p0.clone();
        for i in 1..n {
            for c in 0..d {
                lo[c] = lo[c].min(points[i * d + c]);
                hi[c] = hi[c].max(points[i * d + c]);
            }
        }
        Ok(EvaluationPlan {
            d,
            n,
            points,
            rho,
            lo,
            hi,
            drift0,
            drift_diff,
            gaussian,
        })
    }

    /// Plan for the points `p0 + r·t_l·y_j`, laid out as `p0` followed by
    /// one block of quadrature nodes per time.
    pub fn increment_plan(&self, p0: &[f64], r: f64, times: &[f64], quad: &SurfaceQuadrature) -> Result<EvaluationPlan> {
        let d = self.dim();
        if !(r >= 0.0 && r.is_finite()) || times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(Error::InvalidParameter(format!("radius and times must be finite and nonnegative, got r = {r}")));
        }
        if quad.dim() != d || p0.len() != d {
            return Err(Error::InvalidParameter("quadrature, reference point and field dimensions differ".into()));
        }
        let mut points = p0.to_vec();
        for t in times {
            for j in 0..quad.len() {
                let y = quad.point(j);
                points.extend((0..d).map(|c| p0[c] + r * t * y[c]));
            }
        }
        self.plan(points)
    }

    /// Frozen realization over `region`, keyed by `key`.
    pub fn realize(self: &Arc<Self>, region: BoxRegion, key: StreamKey) -> Result<FieldRealization> {
        if region.dim() != self.dim() {
            return Err(Error::InvalidParameter("bounding region has the wrong dimension".into()));
        }
        let mut rng = key.child(Domain::Field).stream();
        let jumps = if self.driver.nu.is_zero() {
            JumpConfiguration::empty(region, self.driver.nu.dim())
        } else {
            sample_poisson_jumps(&region, &self.driver.nu, self.driver.eps, &mut rng)?
        };
        Ok(FieldRealization {
            spec: Arc::clone(self),
            jumps,
            gaussian_key: key.child(Domain::Gaussian),
        })
    }

    /// Realization with explicitly given jumps (and the Gaussian stream of `key`).
    pub fn realize_with_jumps(self: &Arc<Self>, jumps: JumpConfiguration, key: StreamKey) -> Result<FieldRealization> {
        if jumps.region().dim() != self.dim() || (!jumps.is_empty() && jumps.mark_dim() != self.kernel.mark_dim()) {
            return Err(Error::InvalidParameter("jump configuration does not match the field dimensions".into()));
        }
        Ok(FieldRealization {
            spec: Arc::clone(self),
            jumps,
            gaussian_key: key.child(Domain::Gaussian),
        })
    }
}

/// Points of evaluation together with their deterministic drift values and
/// the factorized joint Gaussian covariance.
#[derive(Debug, Clone)]
pub struct EvaluationPlan {
    d: usize,
    n: usize,
    points: Vec<f64>,
    rho: f64,
    lo: Vec<f64>,
    hi: Vec<f64>,
    drift0: Vec<f64>,
    drift_diff: Vec<f64>,
    gaussian: Option<GaussianFactor>,
}

impl EvaluationPlan {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    /// Largest distance of a point from the reference point.
    pub fn reach(&self) -> f64 {
        self.rho
    }

    pub fn gaussian(&self) -> Option<&GaussianFactor> {
        self.gaussian.as_ref()
    }
}

/// Field values on a plan: `X(p_0)` and the increments `X(p_i) − X(p_0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanValues {
    d: usize,
    base: Vec<f64>,
    diff: Vec<f64>,
}

impl PlanValues {
    /// `X(p_0)`.
    pub fn base(&self) -> &[f64] {
        &self.base
    }

    /// `X(p_i) − X(p_0)` (zero for `i = 0`).
    pub fn increment(&self, i: usize) -> &[f64] {
        &self.diff[i * self.d..(i + 1) * self.d]
    }

    /// `X(p_i)`.
    pub fn value(&self, i: usize) -> Vec<f64> {
        self.base.iter().zip(self.increment(i)).map(|(a, b)| a + b).collect()
    }

    pub fn len(&self) -> usize {
        self.diff.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.diff.is_empty()
    }
}

/// One frozen realization of the basis.
#[derive(Debug, Clone)]
pub struct FieldRealization {
    spec: Arc<FieldSpec>,
    jumps: JumpConfiguration,
    gaussian_key: StreamKey,
}

impl FieldRealization {
    pub fn spec(&self) -> &FieldSpec {
        &self.spec
    }

    pub fn jumps(&self) -> &JumpConfiguration {
        &self.jumps
    }

    /// `X(p)` from a one-point plan.
    pub fn evaluate(&self, p: &[f64]) -> Result<Vec<f64>> {
        let plan = self.spec.plan(p.to_vec())?;
        Ok(self.evaluate_plan(&plan)?.base)
    }

    /// Coupled values on all points of `plan`.
    pub fn evaluate_plan(&self, plan: &EvaluationPlan) -> Result<PlanValues> {
        let spec = &*self.spec;
        let d = plan.d;
        self.check_region(plan)?;
        let mut base = plan.drift0.clone();
        let mut diff = plan.drift_diff.clone();
        let kernel = &spec.kernel;
        let constant = kernel.is_constant();
        let p0 = plan.point(0);
        let mut cx = vec![0.0; d];
        for k in 0..self.jumps.len() {
            let q = self.jumps.location(k);
            let class = spec.shape.classify(q, p0, plan.rho);
            if class == Membership::AlwaysOut {
                continue;
            }
            cx.iter_mut().for_each(|v| *v = 0.0);
            kernel.matrix_apply_add(1.0, self.jumps.mark(k), &mut cx);
            let inside0 = class == Membership::AlwaysIn || spec.shape.contains_shifted(q, p0);
            let s0 = if inside0 { kernel.scalar(p0, q) } else { 0.0 };
            for c in 0..d {
                base[c] += s0 * cx[c];
            }
            if class == Membership::AlwaysIn && constant {
                continue;
            }
            for i in 1..plan.n {
                let p = plan.point(i);
                let inside = class == Membership::AlwaysIn || spec.shape.contains_shifted(q, p);
                let si = if inside { kernel.scalar(p, q) } else { 0.0 };
                if si != s0 {
                    let delta = si - s0;
                    for c in 0..d {
                        diff[i * d + c] += delta * cx[c];
                    }
                }
            }
        }
        if let Some(g) = &plan.gaussian {
            let mut rng = self.gaussian_key.stream();
            g.sample_split(&mut rng, &mut base, &mut diff);
        }
        Ok(PlanValues { d, base, diff })
    }

    /// Increments `X(p0 + r·t_l·y_j) − X(p0)`, indexed `[l][j]`.
    pub fn evaluate_increments(
        &self,
        p0: &[f64],
        r: f64,
        times: &[f64],
        quad: &SurfaceQuadrature,
    ) -> Result<Vec<Vec<Vec<f64>>>> {
        let plan = self.spec.increment_plan(p0, r, times, quad)?;
        let values = self.evaluate_plan(&plan)?;
        let nq = quad.len();
        Ok((0..times.len())
            .map(|l| (0..nq).map(|j| values.increment(1 + l * nq + j).to_vec()).collect())
            .collect())
    }

    /// `DX(p0)`, a `d×d` matrix with entries `(i, k)`.
    pub fn gradient_dx(&self, p0: &[f64], convention: DxConvention) -> Result<DMatrix<f64>> {
        let spec = &*self.spec;
        if !spec.driver.finite_variation {
            return Err(Error::InfiniteVariation(
                "the basis has a Gaussian part or an infinite-variation Levy measure".into(),
            ));
        }
        let d = spec.dim();
        let bb = spec.shape.bounding_box();
        let needed = BoxRegion {
            min: bb.min.iter().zip(p0).map(|(a, p)| a + p).collect(),
            max: bb.max.iter().zip(p0).map(|(a, p)| a + p).collect(),
        };
        if !self.jumps.region().contains_box(&needed) {
            return Err(Error::OutsideBoundingRegion { offset: p0.to_vec() });
        }
        let kernel = &spec.kernel;
        let gamma = &spec.driver.drift;
        let mut cg = vec![0.0; d];
        kernel.matrix_apply_add(1.0, gamma, &mut cg);
        let mut dx = DMatrix::zeros(d, d);
        if !kernel.is_constant() {
            // ∫_{A+p0} ∂_k s and ∫_{A+p0} ∂_{k+d} s
            let mut a = vec![0.0; d];
            let mut b = vec![0.0; d];
            let mut sum = vec![0.0; d];
            let mut q = vec![0.0; d];
            for (j, w) in spec.volume_weights.iter().enumerate() {
                for c in 0..d {
                    q[c] = p0[c] + spec.volume_points[j * d + c];
                }
                for k in 0..d {
                    let dp = kernel.d_p(p0, &q, k);
                    let dq = kernel.d_q(p0, &q, k);
                    a[k] += w * dp;
                    b[k] += w * dq;
                    sum[k] += w * (dp + dq);
                }
            }
            match convention {
                DxConvention::Consistent => {
                    for i in 0..d {
                        for k in 0..d {
                            dx[(i, k)] = cg[i] * sum[k];
                        }
                    }
                }
                DxConvention::FlippedSign => {
                    for i in 0..d {
                        for k in 0..d {
                            dx[(i, k)] = cg[i] * (a[k] - b[k]);
                        }
                    }
                }
                DxConvention::PrintedIndex => {
                    if gamma.len() != d {
                        return Err(Error::InvalidParameter(
                            "the printed index convention needs mark dimension equal to d".into(),
                        ));
                    }
                    let c = kernel.matrix();
                    for i in 0..d {
                        let row: f64 = (0..c.ncols()).map(|j| c[(i, j)]).sum();
                        for k in 0..d {
                            dx[(i, k)] = cg[i] * a[k] + row * gamma[i] * b[k];
                        }
                    }
                }
            }
            let mut cx = vec![0.0; d];
            for k in 0..self.jumps.len() {
                let q = self.jumps.location(k);
                if !spec.shape.contains_shifted(q, p0) {
                    continue;
                }
                cx.iter_mut().for_each(|v| *v = 0.0);
                kernel.matrix_apply_add(1.0, self.jumps.mark(k), &mut cx);
                for kk in 0..d {
                    let g = kernel.d_p(p0, q, kk);
                    for i in 0..d {
                        dx[(i, kk)] += g * cx[i];
                    }
                }
            }
        }
        Ok(dx)
    }

    fn check_region(&self, plan: &EvaluationPlan) -> Result<()> {
        let bb = self.spec.shape.bounding_box();
        let needed = BoxRegion {
            min: bb.min.iter().zip(&plan.lo).map(|(a, p)| a + p).collect(),
            max: bb.max.iter().zip(&plan.hi).map(|(a, p)| a + p).collect(),
        };
        if self.jumps.region().contains_box(&needed) {
            return Ok(());
        }
        // name the first offending point
        for i in 0..plan.n {
            let p = plan.point(i);
            let b = BoxRegion {
                min: bb.min.iter().zip(p).map(|(a, x)| a + x).collect(),
                max: bb.max.iter().zip(p).map(|(a, x)| a + x).collect(),
            };
            if !self.jumps.region().contains_box(&b) {
                return Err(Error::OutsideBoundingRegion { offset: p.to_vec() });
            }
        }
        Err(Error::OutsideBoundingRegion { offset: plan.hi.clone() })
    }
}

#[cfg(test)]
mod tests;
