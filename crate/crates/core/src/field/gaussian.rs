use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::kernel::Kernel;
use crate::error::{Error, Result};
use crate::geometry::AmbitSet;

/// Number of quasi-random nodes used for overlap integrals of non-constant kernels.
pub const QMC_NODES: usize = 200_000;

/// Joint law of the Gaussian part `(X_G(p_0), …, X_G(p_{n−1}))`.
///
/// The covariance is `K ⊗ (CΣC′)` with `K_ij = ∫ s(p_i,q)s(p_j,q)1_{A+p_i}(q)1_{A+p_j}(q) dq`.
/// It is factorized in difference coordinates `X(p_0), X(p_i) − X(p_0)`,
/// which keeps small increments accurate when the points are close.
#[derive(Debug, Clone)]
pub struct GaussianFactor {
    n: usize,
    d: usize,
    active: Vec<usize>,
    lower: DMatrix<f64>,
    out_factor: DMatrix<f64>,
    jitter: f64,
}

impl GaussianFactor {
    /// `points` holds `n` points of dimension `d` (flat); `cov` is `CΣC′`'s
    /// factor `d×k`.
    pub fn assemble(shape: &AmbitSet, kernel: &Kernel, points: &[f64], out_factor: DMatrix<f64>) -> Result<Self> {
        let d = shape.dim();
        let n = points.len() / d;
        let m = if kernel.is_constant() {
            constant_difference_covariance(shape, points, d)
        } else {
            qmc_difference_covariance(shape, kernel, points, d, QMC_NODES)
        };
        let active: Vec<usize> = (0..n).filter(|&i| m[(i, i)] > 0.0).collect();
        let sub = DMatrix::from_fn(active.len(), active.len(), |a, b| m[(active[a], active[b])]);
        let (lower, jitter) = factorize(sub)?;
        Ok(Self {
            n,
            d,
            active,
            lower,
            out_factor,
            jitter,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Jitter that was needed for the factorization (0 if none).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Adds one joint draw of the Gaussian part to `out` (`n×d`, row-major).
    pub fn sample_add<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let mut base = vec![0.0; self.d];
        let mut diff = vec![0.0; self.n * self.d];
        self.sample_split(rng, &mut base, &mut diff);
        for i in 0..self.n {
            for c in 0..self.d {
                out[i * self.d + c] += base[c] + diff[i * self.d + c];
            }
        }
    }

    /// Adds one joint draw split into `X(p_0)` (added to `base`) and the
    /// increments `X(p_i) − X(p_0)` (added to rows `i ≥ 1` of `diff`).
    pub fn sample_split<R: Rng + ?Sized>(&self, rng: &mut R, base: &mut [f64], diff: &mut [f64]) {
        let na = self.active.len();
        if na == 0 {
            return;
        }
        let k = self.out_factor.ncols();
        let z = DMatrix::from_fn(na, k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = (&self.lower * z) * self.out_factor.transpose();
        for (a, &i) in self.active.iter().enumerate() {
            let target = if i == 0 { &mut base[..] } else { &mut diff[i * self.d..(i + 1) * self.d] };
            for c in 0..self.d {
                target[c] += y[(a, c)];
            }
        }
    }
}

fn constant_difference_covariance(shape: &AmbitSet, points: &[f64], d: usize) -> DMatrix<f64> {
    let n = points.len() / d;
    let k = |i: usize, j: usize| -> f64 {
        let delta: Vec<f64> = (0..d).map(|c| points[j * d + c] - points[i * d + c]).collect();
        shape.overlap_volume(&delta)
    };
    let k00 = shape.volume();
    let k0: Vec<f64> = (0..n).map(|i| k(0, i)).collect();
    let mut m = DMatrix::zeros(n, n);
    m[(0, 0)] = k00;
    for i in 1..n {
        m[(0, i)] = k0[i] - k00;
        m[(i, 0)] = m[(0, i)];
        for j in i..n {
            let v = k(i, j) - k0[i] - k0[j] + k00;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    // exact zeros for coincident points avoid spurious round-off
    for i in 1..n {
        let same = (0..d).all(|c| points[i * d + c] == points[c]);
        if same {
            for j in 0..n {
                if j != 0 || i != 0 {
                    m[(i, j)] = 0.0;
                    m[(j, i)] = 0.0;
                }
            }
            m[(0, 0)] = k00;
        }
    }
    m
}

fn qmc_difference_covariance(shape: &AmbitSet, kernel: &Kernel, points: &[f64], d: usize, nodes: usize) -> DMatrix<f64> {
    let n = points.len() / d;
    let bb = shape.bounding_box();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for i in 0..n {
        for c in 0..d {
            lo[c] = lo[c].min(bb.min[c] + points[i * d + c]);
            hi[c] = hi[c].max(bb.max[c] + points[i * d + c]);
        }
    }
    let vol: f64 = (0..d).map(|c| hi[c] - lo[c]).product();
    let chunk = 4096;
    let mut m = DMatrix::zeros(n, n);
    let mut q = vec![0.0; d];
    let mut start = 0;
    while start < nodes {
        let len = chunk.min(nodes - start);
        let mut psi = DMatrix::zeros(n, len);
        for col in 0..len {
            let idx = (start + col + 1) as u64;
            for c in 0..d {
                q[c] = lo[c] + (hi[c] - lo[c]) * radical_inverse(idx, PRIMES[c]);
            }
            let phi0 = eval_phi(shape, kernel, &points[..d], &q);
            psi[(0, col)] = phi0;
            for i in 1..n {
                psi[(i, col)] = eval_phi(shape, kernel, &points[i * d..(i + 1) * d], &q) - phi0;
            }
        }
        m += &psi * psi.transpose();
        start += len;
    }
    m * (vol / nodes as f64)
}

fn eval_phi(shape: &AmbitSet, kernel: &Kernel, p: &[f64], q: &[f64]) -> f64 {
    if shape.contains_shifted(q, p) {
        kernel.scalar(p, q)
    } else {
        0.0
    }
}

const PRIMES: [u64; 3] = [2, 3, 5];

/// Van der Corput radical inverse of `i` in base `b` (Halton coordinate).
pub fn radical_inverse(mut i: u64, b: u64) -> f64 {
    let inv = 1.0 / b as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % b) as f64;
        i /= b;
        f *= inv;
    }
    r
}

/// Cholesky factor, retrying once with a diagonal jitter of `1e-12` scaled
/// by the largest diagonal entry.
pub(crate) fn factorize(m: DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    if m.nrows() == 0 {
        return Ok((m, 0.0));
    }
    if let Some(c) = m.clone().cholesky() {
        return Ok((c.l(), 0.0));
    }
    let scale = (0..m.nrows()).map(|i| m[(i, i)]).fold(0.0f64, f64::max).max(1.0);
    let jitter = 1e-12 * scale;
    let mut j = m;
    for i in 0..j.nrows() {
        j[(i, i)] += jitter;
    }
    j.cholesky().map(|c| (c.l(), jitter)).ok_or(Error::Factorization { jitter })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::kernel::Profile;
    use crate::rng::{stream, Domain};
    use approx::assert_relative_eq;

    #[test]
    fn halton_is_low_discrepancy() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert_relative_eq!(radical_inverse(5, 3), 7.0 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn qmc_covariance_agrees_with_closed_form_for_constant_kernel() {
        let a = AmbitSet::unit_ball(2);
        let k = Kernel::identity(2);
        let pts = [0.0, 0.0, 0.3, 0.1, -0.2, 0.4];
        let exact = constant_difference_covariance(&a, &pts, 2);
        let qmc = qmc_difference_covariance(&a, &k, &pts, 2, QMC_NODES);
        for i in 0..3 {
            for j in 0..3 {
                assert!((exact[(i, j)] - qmc[(i, j)]).abs() < 2e-3 * exact[(0, 0)], "{i},{j}");
            }
        }
    }

    #[test]
    fn qmc_gaussian_bump_variance() {
        // K_00 = ∫_{unit disk} e^{−2|v|²} dv = π(1 − e^{−2})/2
        let a = AmbitSet::unit_ball(2);
        let k = Kernel::new(Profile::GaussianBump, DMatrix::identity(2, 2)).unwrap();
        let m = qmc_difference_covariance(&a, &k, &[0.4, -0.1], 2, QMC_NODES);
        let exact = std::f64::consts::PI * (1.0 - (-2.0f64).exp()) / 2.0;
        assert!((m[(0, 0)] - exact).abs() < 1e-4 * exact * 10.0, "{} vs {exact}", m[(0, 0)]);
    }

    #[test]
    fn coincident_points_give_equal_values() {
        let a = AmbitSet::unit_ball(2);
        let pts = [0.1, 0.2, 0.1, 0.2, 0.5, 0.2];
        let g = GaussianFactor::assemble(&a, &Kernel::identity(2), &pts, DMatrix::identity(2, 2)).unwrap();
        let mut rng = stream(1, Domain::Test, 0);
        let mut out = vec![0.0; 6];
        g.sample_add(&mut rng, &mut out);
        assert_eq!(out[0], out[2]);
        assert_eq!(out[1], out[3]);
        assert_ne!(out[0], out[4]);
    }

    #[test]
    fn sampled_covariance_matches_overlap() {
        let a = AmbitSet::unit_ball(2);
        let pts = [0.0, 0.0, 0.5, 0.0];
        let g = GaussianFactor::assemble(&a, &Kernel::identity(2), &pts, DMatrix::identity(2, 2)).unwrap();
        let n = 40_000;
        let (mut s00, mut s01, mut s11) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let mut rng = stream(2, Domain::Test, i);
            let mut out = vec![0.0; 4];
            g.sample_add(&mut rng, &mut out);
            s00 += out[0] * out[0];
            s01 += out[0] * out[2];
            s11 += out[2] * out[2];
        }
        let nf = n as f64;
        let pi = std::f64::consts::PI;
        assert!((s00 / nf - pi).abs() < 0.05 * pi);
        assert!((s11 / nf - pi).abs() < 0.05 * pi);
        let lens = a.overlap_volume(&[0.5, 0.0]);
        assert!((s01 / nf - lens).abs() < 0.05 * pi);
    }
}
