//! Test functions, the surface functional `Z^{φ,r}(t, f)`, the energy flux
//! and the first-order limit value in the finite-variation case.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::field::{DxConvention, EvaluationPlan, FieldRealization, FieldSpec, PlanValues};
use crate::geometry::SurfaceQuadrature;

/// `φ: R^d → R^d` with analytic Jacobian.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    Identity,
    /// `‖x‖²x`, the kinetic energy flow rate.
    Kinetic,
    /// `Bx + c`.
    Affine { b: DMatrix<f64>, c: Vec<f64> },
}

impl TestFunction {
    /// Polynomial growth order `β`.
    pub fn growth_order(&self) -> f64 {
        match self {
            TestFunction::Identity | TestFunction::Affine { .. } => 1.0,
            TestFunction::Kinetic => 3.0,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            TestFunction::Identity => x.to_vec(),
            TestFunction::Kinetic => {
                let n2: f64 = x.iter().map(|v| v * v).sum();
                x.iter().map(|v| n2 * v).collect()
            }
            TestFunction::Affine { b, c } => {
                let mut out = c.clone();
                mat_vec_add(b, x, &mut out);
                out
            }
        }
    }

    /// `Dφ(x)`.
    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let d = x.len();
        match self {
            TestFunction::Identity => DMatrix::identity(d, d),
            TestFunction::Kinetic => {
                let n2: f64 = x.iter().map(|v| v * v).sum();
                DMatrix::from_fn(d, d, |i, j| 2.0 * x[i] * x[j] + if i == j { n2 } else { 0.0 })
            }
            TestFunction::Affine { b, .. } => b.clone(),
        }
    }

    /// `φ(x + δ) − φ(x)`, written without cancellation of `φ(x)`.
    pub fn difference(&self, x: &[f64], delta: &[f64]) -> Vec<f64> {
        match self {
            TestFunction::Identity => delta.to_vec(),
            TestFunction::Kinetic => {
                // (2x·δ + ‖δ‖²)(x + δ) + ‖x‖²δ
                let xd: f64 = x.iter().zip(delta).map(|(a, b)| a * b).sum();
                let dd: f64 = delta.iter().map(|v| v * v).sum();
                let xx: f64 = x.iter().map(|v| v * v).sum();
                let s = 2.0 * xd + dd;
                x.iter().zip(delta).map(|(a, b)| s * (a + b) + xx * b).collect()
            }
            TestFunction::Affine { b, .. } => {
                let mut out = vec![0.0; b.nrows()];
                mat_vec_add(b, delta, &mut out);
                out
            }
        }
    }

    fn check(&self, d: usize) -> Result<()> {
        if let TestFunction::Affine { b, c } = self {
            if b.nrows() != d || b.ncols() != d || c.len() != d {
                return Err(Error::InvalidParameter(format!("affine test function must be {d}×{d} with offset of length {d}")));
            }
        }
        Ok(())
    }
}

/// Weight `f: M → R^d` on the surface.
#[derive(Debug, Clone, PartialEq)]
pub enum SurfaceWeight {
    /// The outward unit normal `u_M`.
    Normal,
    Constant(Vec<f64>),
    /// `g^{(from)}·e_to` for an inner weight `g`.
    Component { inner: Box<SurfaceWeight>, from: usize, to: usize },
    /// `Σ a_k g_k`.
    Combination(Vec<(f64, SurfaceWeight)>),
}

impl SurfaceWeight {
    /// `(e_j ⊗ e_i)·u_M = u_M^{(i)} e_j`.
    pub fn normal_component(i: usize, j: usize) -> Self {
        SurfaceWeight::Component {
            inner: Box::new(SurfaceWeight::Normal),
            from: i,
            to: j,
        }
    }

    /// Values at the quadrature nodes (`n×d`, row-major).
    pub fn values(&self, quad: &SurfaceQuadrature) -> Result<Vec<f64>> {
        let d = quad.dim();
        let n = quad.len();
        let mut out = vec![0.0; n * d];
        match self {
            SurfaceWeight::Normal => {
                for j in 0..n {
                    out[j * d..(j + 1) * d].copy_from_slice(quad.normal(j));
                }
            }
            SurfaceWeight::Constant(v) => {
                if v.len() != d {
                    return Err(Error::InvalidParameter(format!("constant weight must have length {d}")));
                }
                for j in 0..n {
                    out[j * d..(j + 1) * d].copy_from_slice(v);
                }
            }
            SurfaceWeight::Component { inner, from, to } => {
                if *from >= d || *to >= d {
                    return Err(Error::InvalidParameter(format!("component indices must be below {d}")));
                }
                let g = inner.values(quad)?;
                for j in 0..n {
                    out[j * d + to] = g[j * d + from];
                }
            }
            SurfaceWeight::Combination(terms) => {
                for (a, g) in terms {
                    let v = g.values(quad)?;
                    for (o, x) in out.iter_mut().zip(&v) {
                        *o += a * x;
                    }
                }
            }
        }
        Ok(out)
    }

    /// The matrix `B` with `f(y) = B·u_M(y)`, when the weight is linear in the
    /// normal; `None` otherwise.
    pub fn normal_matrix(&self, d: usize) -> Option<DMatrix<f64>> {
        match self {
            SurfaceWeight::Normal => Some(DMatrix::identity(d, d)),
            SurfaceWeight::Constant(_) => None,
            SurfaceWeight::Component { inner, from, to } => {
                let b = inner.normal_matrix(d)?;
                if *from >= d || *to >= d {
                    return None;
                }
                let mut out = DMatrix::zeros(d, d);
                out.set_row(*to, &b.row(*from));
                Some(out)
            }
            SurfaceWeight::Combination(terms) => {
                let mut out = DMatrix::zeros(d, d);
                for (a, g) in terms {
                    out += g.normal_matrix(d)? * *a;
                }
                Some(out)
            }
        }
    }

    /// `Σ_j w_j ‖f(y_j)‖²`.
    pub fn squared_norm(&self, quad: &SurfaceQuadrature) -> Result<f64> {
        let d = quad.dim();
        let v = self.values(quad)?;
        Ok((0..quad.len()).map(|j| quad.weight(j) * v[j * d..(j + 1) * d].iter().map(|x| x * x).sum::<f64>()).sum())
    }
}

/// Evaluation points `p0 + r·t_l·y_j` for a list of times, shared by all
/// replications.
#[derive(Debug, Clone)]
pub struct FluxPlan {
    p0: Vec<f64>,
    r: f64,
    times: Vec<f64>,
    quad: SurfaceQuadrature,
    plan: EvaluationPlan,
}

impl FluxPlan {
    pub fn new(spec: &FieldSpec, p0: &[f64], r: f64, times: &[f64], quad: &SurfaceQuadrature) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::InvalidParameter(format!("radius must be positive, got {r}")));
        }
        let plan = spec.increment_plan(p0, r, times, quad)?;
        Ok(Self {
            p0: p0.to_vec(),
            r,
            times: times.to_vec(),
            quad: quad.clone(),
            plan,
        })
    }

    pub fn radius(&self) -> f64 {
        self.r
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn quadrature(&self) -> &SurfaceQuadrature {
        &self.quad
    }

    pub fn reference(&self) -> &[f64] {
        &self.p0
    }

    /// Largest distance of an evaluation point from `p0`.
    pub fn reach(&self) -> f64 {
        self.plan.reach()
    }

    pub fn evaluation_plan(&self) -> &EvaluationPlan {
        &self.plan
    }

    /// Evaluates one realization on all points of the plan.
    pub fn sample(&self, real: &FieldRealization) -> Result<FluxSample<'_>> {
        let values = real.evaluate_plan(&self.plan)?;
        Ok(FluxSample { plan: self, values })
    }
}

/// Field values of one realization on a [`FluxPlan`].
#[derive(Debug, Clone)]
pub struct FluxSample<'a> {
    plan: &'a FluxPlan,
    values: PlanValues,
}

impl FluxSample<'_> {
    /// `X(p0)`.
    pub fn x0(&self) -> &[f64] {
        self.values.base()
    }

    fn increments<'s>(&'s self, l: usize) -> impl Fn(usize) -> &'s [f64] + 's {
        let nq = self.plan.quad.len();
        move |j| self.values.increment(1 + l * nq + j)
    }

    /// `Z^{φ,r}(t_l, f)`.
    pub fn z(&self, l: usize, phi: &TestFunction, f: &SurfaceWeight) -> Result<f64> {
        z_from_increments(self.x0(), self.increments(l), phi, f, &self.plan.quad)
    }

    /// `𝓔_{r t_l} = (r t_l)^{d−1}·Z^{φ,r}(t_l, u_M)`: the flux through `r t_l M + p0`.
    pub fn energy_flux(&self, l: usize, phi: &TestFunction) -> Result<f64> {
        let d = self.plan.quad.dim() as i32;
        let scale = self.plan.r * self.plan.times[l];
        Ok(scale.powi(d - 1) * self.z(l, phi, &SurfaceWeight::Normal)?)
    }

    /// `|Z^{φ,r}(t_l, f) − Σ_{i,j} Dφ(X(p0))^{(i,j)} Z^{id,r}(t_l, f^{(i)} e_j)|`.
    pub fn taylor_residual(&self, l: usize, phi: &TestFunction, f: &SurfaceWeight) -> Result<f64> {
        taylor_from_increments(self.x0(), self.increments(l), phi, f, &self.plan.quad)
    }
}

/// `Σ_j w_j [φ(x0 + Δ_j) − φ(x0)]·f(y_j)`.
pub fn z_from_increments<'a>(
    x0: &[f64],
    increments: impl Fn(usize) -> &'a [f64],
    phi: &TestFunction,
    f: &SurfaceWeight,
    quad: &SurfaceQuadrature,
) -> Result<f64> {
    let d = quad.dim();
    phi.check(d)?;
    let fv = f.values(quad)?;
    let mut total = 0.0;
    for j in 0..quad.len() {
        let delta = increments(j);
        let diff = phi.difference(x0, delta);
        let dot: f64 = diff.iter().zip(&fv[j * d..(j + 1) * d]).map(|(a, b)| a * b).sum();
        total += quad.weight(j) * dot;
    }
    Ok(total)
}

fn taylor_from_increments<'a>(
    x0: &[f64],
    increments: impl Fn(usize) -> &'a [f64],
    phi: &TestFunction,
    f: &SurfaceWeight,
    quad: &SurfaceQuadrature,
) -> Result<f64> {
    let d = quad.dim();
    phi.check(d)?;
    let fv = f.values(quad)?;
    let jac = phi.jacobian(x0);
    let mut total = 0.0;
    let mut lin = vec![0.0; d];
    for j in 0..quad.len() {
        let delta = increments(j);
        let diff = phi.difference(x0, delta);
        lin.iter_mut().for_each(|v| *v = 0.0);
        mat_vec_add(&jac, delta, &mut lin);
        let dot: f64 = (0..d).map(|c| (diff[c] - lin[c]) * fv[j * d + c]).sum();
        total += quad.weight(j) * dot;
    }
    Ok(total.abs())
}

/// `Z^{φ,r}(t, f)` for one realization (builds a one-time plan).
pub fn z_functional(
    real: &FieldRealization,
    p0: &[f64],
    r: f64,
    t: f64,
    phi: &TestFunction,
    f: &SurfaceWeight,
    quad: &SurfaceQuadrature,
) -> Result<f64> {
    let plan = FluxPlan::new(real.spec(), p0, r, &[t], quad)?;
    plan.sample(real)?.z(0, phi, f)
}

/// `𝓔_r = r^{d−1} Z^{φ,r}(1, u_M)`.
pub fn energy_flux(real: &FieldRealization, p0: &[f64], r: f64, phi: &TestFunction, quad: &SurfaceQuadrature) -> Result<f64> {
    let plan = FluxPlan::new(real.spec(), p0, r, &[1.0], quad)?;
    plan.sample(real)?.energy_flux(0, phi)
}

/// Taylor residual of `Z^{φ,r}(t, f)` for one realization.
pub fn taylor_residual(
    real: &FieldRealization,
    p0: &[f64],
    r: f64,
    t: f64,
    phi: &TestFunction,
    f: &SurfaceWeight,
    quad: &SurfaceQuadrature,
) -> Result<f64> {
    let plan = FluxPlan::new(real.spec(), p0, r, &[t], quad)?;
    plan.sample(real)?.taylor_residual(0, phi, f)
}

/// `Z^{φ,r}(t, f)` with a deterministic vector field `v` in place of `X`.
pub fn z_deterministic(
    v: impl Fn(&[f64]) -> Vec<f64>,
    p0: &[f64],
    r: f64,
    t: f64,
    phi: &TestFunction,
    f: &SurfaceWeight,
    quad: &SurfaceQuadrature,
) -> Result<f64> {
    let d = quad.dim();
    let x0 = v(p0);
    let incr: Vec<f64> = (0..quad.len())
        .flat_map(|j| {
            let y = quad.point(j);
            let p: Vec<f64> = (0..d).map(|c| p0[c] + r * t * y[c]).collect();
            let x = v(&p);
            (0..d).map(|c| x[c] - x0[c]).collect::<Vec<_>>()
        })
        .collect();
    z_from_increments(&x0, |j| &incr[j * d..(j + 1) * d], phi, f, quad)
}

/// `𝓔_r` of a deterministic vector field.
pub fn energy_flux_deterministic(
    v: impl Fn(&[f64]) -> Vec<f64>,
    p0: &[f64],
    r: f64,
    phi: &TestFunction,
    quad: &SurfaceQuadrature,
) -> Result<f64> {
    let d = quad.dim() as i32;
    Ok(r.powi(d - 1) * z_deterministic(v, p0, r, 1.0, phi, &SurfaceWeight::Normal, quad)?)
}

/// `Σ_{i,j} Dφ^{(i,j)} ∫_M f(y)′(e_i ⊗ e_j) DX y dH^{d−1}(dy) = ∫_M f(y)′ Dφ DX y`.
pub fn fv_limit_from(dphi: &DMatrix<f64>, dx: &DMatrix<f64>, f: &SurfaceWeight, quad: &SurfaceQuadrature) -> Result<f64> {
    let d = quad.dim();
    if dphi.shape() != (d, d) || dx.shape() != (d, d) {
        return Err(Error::InvalidParameter(format!("Dφ and DX must be {d}×{d}")));
    }
    let fv = f.values(quad)?;
    let a = dphi * dx;
    let mut total = 0.0;
    let mut ay = vec![0.0; d];
    for j in 0..quad.len() {
        ay.iter_mut().for_each(|v| *v = 0.0);
        mat_vec_add(&a, quad.point(j), &mut ay);
        let dot: f64 = ay.iter().zip(&fv[j * d..(j + 1) * d]).map(|(x, y)| x * y).sum();
        total += quad.weight(j) * dot;
    }
    Ok(total)
}

/// First-order limit of `Z^{φ,r}(t, f)/r`, per unit `t`, in the
/// finite-variation case.
pub fn fv_limit_value(
    real: &FieldRealization,
    p0: &[f64],
    phi: &TestFunction,
    f: &SurfaceWeight,
    quad: &SurfaceQuadrature,
    convention: DxConvention,
) -> Result<f64> {
    let dx = real.gradient_dx(p0, convention)?;
    let x0 = real.evaluate(p0)?;
    fv_limit_from(&phi.jacobian(&x0), &dx, f, quad)
}

/// As [`fv_limit_value`] with `X(p0)` taken from an existing sample.
pub fn fv_limit_for_sample(
    real: &FieldRealization,
    sample: &FluxSample<'_>,
    phi: &TestFunction,
    f: &SurfaceWeight,
    convention: DxConvention,
) -> Result<f64> {
    let dx = real.gradient_dx(sample.plan.reference(), convention)?;
    fv_limit_from(&phi.jacobian(sample.x0()), &dx, f, &sample.plan.quad)
}

fn mat_vec_add(m: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o += (0..m.ncols()).map(|j| m[(i, j)] * x[j]).sum::<f64>();
    }
}
