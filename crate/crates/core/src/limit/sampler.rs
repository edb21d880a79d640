use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::control::{BoundaryControlMeasure, Sign};
use super::{profile_exponent, profile_time_derivative, LimitFieldSpec, DEFAULT_PATCHES, DEFAULT_SLICES, SAMPLER_CAP_ORDER};
use crate::error::{Error, Result};
use crate::flux::SurfaceWeight;
use crate::geometry::{section_profile, AmbitSet};
use crate::levy::{standard_stable, StableSpec};
use crate::rng::{stream, Domain};
use crate::stats::ks_distance_values;

/// Largest KS distance tolerated between a partition and its refinement.
pub const RESOLUTION_KS_THRESHOLD: f64 = 0.01;

/// Scale below which a collapsed law counts as a point mass.
pub const DEGENERATE_SCALE: f64 = 1e-12;

/// Exact law of one real linear functional of the discretized limit field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarLaw {
    Gaussian { variance: f64 },
    /// `E e^{iθX} = exp(−scale^α|θ|^α(1 − i·skew·sign θ·tan(πα/2)))`.
    Stable { alpha: f64, scale: f64, skew: f64 },
}

impl ScalarLaw {
    /// True when the law is a point mass at zero up to quadrature roundoff
    /// (scale at most [`DEGENERATE_SCALE`]).
    pub fn is_degenerate(&self) -> bool {
        self.scale() <= DEGENERATE_SCALE
    }

    /// Standard deviation for the Gaussian law, scale parameter otherwise.
    pub fn scale(&self) -> f64 {
        match *self {
            ScalarLaw::Gaussian { variance } => variance.sqrt(),
            ScalarLaw::Stable { scale, .. } => scale,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ScalarLaw::Gaussian { variance } => variance.sqrt() * rng.sample::<f64, _>(StandardNormal),
            ScalarLaw::Stable { alpha, scale, skew } => {
                if scale == 0.0 {
                    0.0
                } else {
                    scale * standard_stable(alpha, skew.clamp(-1.0, 1.0), rng)
                }
            }
        }
    }

    /// `n` draws, draw `i` from stream `(seed, LimitField, offset + i)`.
    pub fn samples(&self, n: usize, seed: u64, offset: u64) -> Vec<f64> {
        (0..n)
            .into_par_iter()
            .map(|i| self.sample(&mut stream(seed, Domain::LimitField, offset + i as u64)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Coefficient {
    Value,
    Derivative,
}

/// Cell-partition sampler of `(Y^α(t_l, f))_l`:
/// `Σ_cells G(t_l, f, s_c, x_c, ±n_c)·(±ξ_c)` with independent strictly stable
/// `ξ_c` of exponent `μ±(cell)·ψ_α`.
#[derive(Debug, Clone)]
pub struct LimitSampler {
    seed: StableSpec,
    m: usize,
    times: Vec<f64>,
    slices: usize,
    patches: usize,
    masses: Vec<f64>,
    /// `[time][cell][mark]`, with the sign of `μ−` folded in.
    coeffs: Vec<f64>,
}

impl LimitSampler {
    /// Sampler on `N_s = slices` slices of `(0, max t]` and the boundary rule
    /// of resolution `boundary_nodes`.
    pub fn new(spec: &LimitFieldSpec, f: &SurfaceWeight, times: &[f64], slices: usize, boundary_nodes: usize) -> Result<Self> {
        Self::build(spec, f, times, slices, boundary_nodes, Coefficient::Value)
    }

    /// Default partition: 200 slices and [`default_boundary_nodes`].
    pub fn with_default_partition(spec: &LimitFieldSpec, f: &SurfaceWeight, times: &[f64]) -> Result<Self> {
        Self::new(spec, f, times, DEFAULT_SLICES, default_boundary_nodes(spec.shape()))
    }

    /// Default partition, accepted only if [`check_resolution`] passes with
    /// `reps` draws per sample set.
    pub fn resolved(spec: &LimitFieldSpec, f: &SurfaceWeight, times: &[f64], reps: usize, seed: u64) -> Result<Self> {
        let nodes = default_boundary_nodes(spec.shape());
        check_resolution(spec, f, times, DEFAULT_SLICES, nodes, reps, seed)?;
        Self::new(spec, f, times, DEFAULT_SLICES, nodes)
    }

    /// Sampler of the path derivative `∂_tY^α(t, f) = ∫ g(t, s, x, n) d(Λ⁺ − Λ⁻)`
    /// for `f` linear in `u_M`. Refuses `α = 2, d = 2`, where `∫‖g‖² dμ±`
    /// diverges at `s → t`.
    pub fn derivative(spec: &LimitFieldSpec, f: &SurfaceWeight, t: f64, slices: usize, boundary_nodes: usize) -> Result<Self> {
        if spec.alpha() == 2.0 && spec.dim() == 2 {
            return Err(Error::FubiniCondition(
                "for α = 2 and d = 2 the squared path derivative (1−(s/t)²)^{−1} is not integrable at s = t, \
                 so the Fubini condition fails; use the direct sampler"
                    .into(),
            ));
        }
        if f.normal_matrix(spec.dim()).is_none() {
            return Err(Error::Unsupported("the path derivative needs a weight linear in the normal".into()));
        }
        Self::build(spec, f, &[t], slices, boundary_nodes, Coefficient::Derivative)
    }

    fn build(
        spec: &LimitFieldSpec,
        f: &SurfaceWeight,
        times: &[f64],
        slices: usize,
        boundary_nodes: usize,
        kind: Coefficient,
    ) -> Result<Self> {
        if times.is_empty() || times.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::InvalidParameter("times must be nonempty, positive and finite".into()));
        }
        let d = spec.dim();
        let m = spec.mark_dim();
        let t_max = times.iter().cloned().fold(0.0, f64::max);
        let measures = [Sign::Plus, Sign::Minus]
            .map(|sign| BoundaryControlMeasure::new(spec.shape(), spec.sphere(), sign, t_max, slices, boundary_nodes));
        let [plus, minus] = measures;
        let (plus, minus) = (plus?, minus?);
        let patches = plus.patches();
        let normal_matrix = f.normal_matrix(d);
        let ncells = 2 * slices * patches;
        let mut coeffs = vec![0.0; times.len() * ncells * m];
        let mut masses = Vec::with_capacity(ncells);
        let mut c = 0;
        for measure in [&plus, &minus] {
            let sign = measure.sign().factor();
            // per patch: central section measure times (Bn)′F(p0, x)
            let bases: Vec<Option<Vec<f64>>> = (0..patches)
                .map(|j| {
                    let cell = &measure.cells()[j];
                    normal_matrix.as_ref().map(|b| {
                        let bn: Vec<f64> =
                            (0..d).map(|i| (0..d).map(|k| b[(i, k)] * cell.normal[k]).sum()).collect();
                        let central = spec.sphere().central_section_measure(&cell.normal);
                        let fx = spec.kernel_value(&cell.x);
                        (0..m).map(|k| central * (0..d).map(|i| bn[i] * fx[(i, k)]).sum::<f64>()).collect()
                    })
                })
                .collect();
            for cell in measure.cells() {
                masses.push(cell.mass);
                for (l, &t) in times.iter().enumerate() {
                    let row: Vec<f64> = match (&bases[cell.patch], kind) {
                        (Some(base), Coefficient::Value) => {
                            let factor = if cell.s < t { section_profile(d, cell.s / t) } else { 0.0 };
                            base.iter().map(|v| v * factor).collect()
                        }
                        (Some(base), Coefficient::Derivative) => {
                            let factor = profile_time_derivative(cell.s, t, profile_exponent(d));
                            base.iter().map(|v| v * factor).collect()
                        }
                        (None, _) => spec.kernel_g_cap(t, f, cell.s, &cell.x, &cell.normal, SAMPLER_CAP_ORDER)?,
                    };
                    let off = (l * ncells + c) * m;
                    for k in 0..m {
                        coeffs[off + k] = sign * row[k];
                    }
                }
                c += 1;
            }
        }
        Ok(Self {
            seed: spec.seed().clone(),
            m,
            times: times.to_vec(),
            slices,
            patches,
            masses,
            coeffs,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// `(N_s, boundary patches)` of the partition.
    pub fn partition(&self) -> (usize, usize) {
        (self.slices, self.patches)
    }

    pub fn cell_count(&self) -> usize {
        self.masses.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// One draw of all cell variables `ξ_c` (`cells × m`, row-major).
    pub fn draw_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let m = self.m;
        let mut noise = vec![0.0; self.masses.len() * m];
        for (c, mass) in self.masses.iter().enumerate() {
            self.seed.sample_into(*mass, rng, &mut noise[c * m..(c + 1) * m]);
        }
        noise
    }

    /// `(Y(t_l))_l` for given cell variables.
    pub fn evaluate(&self, noise: &[f64]) -> Vec<f64> {
        let block = self.masses.len() * self.m;
        (0..self.times.len())
            .map(|l| self.coeffs[l * block..(l + 1) * block].iter().zip(noise).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Joint draw of `(Y(t_l))_l`.
    pub fn sample_joint<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.evaluate(&self.draw_noise(rng))
    }

    /// `n` joint draws, draw `i` from stream `(seed, LimitField, i)`.
    pub fn joint_samples(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        (0..n)
            .into_par_iter()
            .map(|i| self.sample_joint(&mut stream(seed, Domain::LimitField, i as u64)))
            .collect()
    }

    /// Exact law of `Σ_l a_l Y(t_l)` under the partition. A sum of
    /// independent strictly stable variables is strictly stable, so the
    /// cells collapse into one scalar variable.
    pub fn functional_law(&self, weights: &[f64]) -> Result<ScalarLaw> {
        if weights.len() != self.times.len() {
            return Err(Error::InvalidParameter(format!("expected {} weights", self.times.len())));
        }
        let block = self.masses.len() * self.m;
        Ok(self.collapse(|c, i| weights.iter().enumerate().map(|(l, a)| a * self.coeffs[l * block + c * self.m + i]).sum()))
    }

    /// Exact law of `Σ_k a_k Y_k(t_l)` for samplers built on the same
    /// partition and times, driven by the same cell variables. This is the
    /// law of a contraction `Σ_{i,j} D^{(i,j)} Y(t, e_j⊗e_i f)` when the
    /// samplers carry the component weights.
    pub fn contracted_law(parts: &[(f64, &LimitSampler)], l: usize) -> Result<ScalarLaw> {
        let first = parts.first().ok_or_else(|| Error::InvalidParameter("no samplers to contract".into()))?.1;
        if l >= first.times.len() {
            return Err(Error::InvalidParameter(format!("no time index {l}")));
        }
        if parts
            .iter()
            .any(|(_, s)| s.times != first.times || s.masses != first.masses || s.m != first.m || s.seed != first.seed)
        {
            return Err(Error::InvalidParameter("contracted samplers must share partition, times and seed law".into()));
        }
        let m = first.m;
        let block = first.masses.len() * m;
        Ok(first.collapse(|c, i| parts.iter().map(|(a, s)| a * s.coeffs[l * block + c * m + i]).sum()))
    }

    /// Collapses `Σ_c k_c·ξ_c` with `k_c^{(i)} = coeff(c, i)`.
    fn collapse(&self, coeff: impl Fn(usize, usize) -> f64) -> ScalarLaw {
        let m = self.m;
        let mut k = vec![0.0; m];
        let alpha = self.seed.alpha();
        let (mut s_total, mut b_total) = (0.0, 0.0);
        for (c, mass) in self.masses.iter().enumerate() {
            if *mass == 0.0 {
                continue;
            }
            for (i, kc) in k.iter_mut().enumerate() {
                *kc = coeff(c, i);
            }
            if alpha == 2.0 {
                let sigma = self.seed.sigma();
                let mut q = 0.0;
                for a in 0..m {
                    for b in 0..m {
                        q += k[a] * sigma[(a, b)] * k[b];
                    }
                }
                s_total += mass * q;
            } else {
                for (u, w) in self.seed.atoms() {
                    let v: f64 = k.iter().zip(u).map(|(a, b)| a * b).sum();
                    let p = mass * w * v.abs().powf(alpha);
                    s_total += p;
                    b_total += p * v.signum();
                }
            }
        }
        if alpha == 2.0 {
            ScalarLaw::Gaussian { variance: s_total }
        } else {
            ScalarLaw::Stable {
                alpha,
                scale: s_total.powf(1.0 / alpha),
                skew: if s_total > 0.0 { b_total / s_total } else { 0.0 },
            }
        }
    }

    /// Law of `Y(t_l)`.
    pub fn marginal(&self, l: usize) -> Result<ScalarLaw> {
        let mut w = vec![0.0; self.times.len()];
        *w.get_mut(l).ok_or_else(|| Error::InvalidParameter(format!("no time index {l}")))? = 1.0;
        self.functional_law(&w)
    }
}

/// Default boundary resolution: 256 nodes on a circle, `16 × 32` on a
/// sphere, `8 × 8` per box face in d = 3.
pub fn default_boundary_nodes(shape: &AmbitSet) -> usize {
    match (shape.dim(), shape) {
        (2, _) => DEFAULT_PATCHES,
        (_, AmbitSet::Ball { .. }) => 32,
        _ => 64,
    }
}

/// KS distance, maximized over the times, between sample sets of `Y(t_l)`
/// on a partition and on its refinement `(2N_s, 2·nodes)`. Each marginal is
/// drawn from its exact collapsed law, and both sets reuse the same random
/// numbers draw by draw, so the distance isolates the discretization effect
/// instead of Monte Carlo noise.
pub fn refinement_distance(
    spec: &LimitFieldSpec,
    f: &SurfaceWeight,
    times: &[f64],
    slices: usize,
    boundary_nodes: usize,
    reps: usize,
    seed: u64,
) -> Result<f64> {
    let coarse = LimitSampler::new(spec, f, times, slices, boundary_nodes)?;
    let fine = LimitSampler::new(spec, f, times, 2 * slices, 2 * boundary_nodes)?;
    let mut worst: f64 = 0.0;
    for l in 0..times.len() {
        let a = coarse.marginal(l)?.samples(reps, seed, 0);
        let b = fine.marginal(l)?.samples(reps, seed, 0);
        worst = worst.max(ks_distance_values(&a, &b)?.statistic);
    }
    Ok(worst)
}

/// [`refinement_distance`] as a gate: `UnresolvedPartition` above
/// [`RESOLUTION_KS_THRESHOLD`].
pub fn check_resolution(
    spec: &LimitFieldSpec,
    f: &SurfaceWeight,
    times: &[f64],
    slices: usize,
    boundary_nodes: usize,
    reps: usize,
    seed: u64,
) -> Result<f64> {
    let distance = refinement_distance(spec, f, times, slices, boundary_nodes, reps, seed)?;
    if distance > RESOLUTION_KS_THRESHOLD {
        return Err(Error::UnresolvedPartition {
            distance,
            threshold: RESOLUTION_KS_THRESHOLD,
        });
    }
    Ok(distance)
}
