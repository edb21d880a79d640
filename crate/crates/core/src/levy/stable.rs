use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{Error, Result};

/// Strictly α-stable law, `1 < α ≤ 2`.
///
/// For `α < 2` the exponent is `ψ_α(z) = −Σ_a w_a |z·u_a|^α (1 − i sign(z·u_a) tan(πα/2))`
/// over the atoms `(u_a, w_a)` of `λ̄`; for `α = 2` it is `−½ z′Σz`.
#[derive(Debug, Clone, PartialEq)]
pub struct StableSpec {
    alpha: f64,
    atoms: Vec<(Vec<f64>, f64)>,
    sigma: DMatrix<f64>,
    /// Atom groups sampled together: symmetric pairs share one draw.
    groups: Vec<AtomGroup>,
    sigma_chol: Option<DMatrix<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
enum AtomGroup {
    Skewed { atom: usize },
    Symmetric { atom: usize },
}

impl StableSpec {
    pub fn new(alpha: f64, atoms: Vec<(Vec<f64>, f64)>, sigma: DMatrix<f64>) -> Result<Self> {
        if !(alpha > 1.0 && alpha <= 2.0) {
            return Err(Error::Unsupported(format!(
                "stable index must lie in (1, 2]; alpha = {alpha} is outside the supported range"
            )));
        }
        let m = sigma.nrows();
        if sigma.ncols() != m {
            return Err(Error::InvalidParameter("stable covariance must be square".into()));
        }
        let mut groups = Vec::new();
        let mut sigma_chol = None;
        if alpha == 2.0 {
            if sigma.iter().all(|v| *v == 0.0) {
                return Err(Error::InvalidParameter("alpha = 2 needs a nonzero covariance".into()));
            }
            sigma_chol = Some(psd_factor(&sigma)?);
        } else {
            if sigma.iter().any(|v| *v != 0.0) {
                return Err(Error::InvalidParameter("alpha < 2 requires a zero Gaussian covariance".into()));
            }
            if atoms.is_empty() {
                return Err(Error::InvalidParameter("alpha < 2 needs at least one spectral atom".into()));
            }
            for (u, w) in &atoms {
                let n: f64 = u.iter().map(|v| v * v).sum::<f64>().sqrt();
                if u.len() != m || (n - 1.0).abs() > 1e-9 || !(*w >= 0.0 && w.is_finite()) {
                    return Err(Error::InvalidParameter(format!("bad spectral atom ({u:?}, {w})")));
                }
            }
            let mut used = vec![false; atoms.len()];
            for a in 0..atoms.len() {
                if used[a] {
                    continue;
                }
                used[a] = true;
                let partner = (a + 1..atoms.len()).find(|&b| {
                    !used[b]
                        && (atoms[a].1 - atoms[b].1).abs() <= 1e-14 * atoms[a].1.abs()
                        && atoms[a].0.iter().zip(&atoms[b].0).all(|(x, y)| (x + y).abs() < 1e-12)
                });
                match partner {
                    Some(b) => {
                        used[b] = true;
                        groups.push(AtomGroup::Symmetric { atom: a });
                    }
                    None => groups.push(AtomGroup::Skewed { atom: a }),
                }
            }
        }
        Ok(Self {
            alpha,
            atoms,
            sigma,
            groups,
            sigma_chol,
        })
    }

    pub fn gaussian(sigma: DMatrix<f64>) -> Result<Self> {
        Self::new(2.0, Vec::new(), sigma)
    }

    /// `λ̄ = w/2·(δ_{+e_k} + δ_{−e_k})` summed over the coordinate axes.
    pub fn symmetric_axes(alpha: f64, m: usize, w: f64) -> Result<Self> {
        let mut atoms = Vec::new();
        for k in 0..m {
            for s in [1.0, -1.0] {
                let mut u = vec![0.0; m];
                u[k] = s;
                atoms.push((u, w / 2.0));
            }
        }
        Self::new(alpha, atoms, DMatrix::zeros(m, m))
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn atoms(&self) -> &[(Vec<f64>, f64)] {
        &self.atoms
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// Drift of the equivalent triplet in the cutoff convention,
    /// `∫u λ(du)/(1 − α)`, where `λ` is the spectral measure of the Lévy
    /// density `s^{−1−α}ds λ(du)` (so `λ = λ̄/κ_α`). Zero for symmetric `λ̄`.
    pub fn triplet_drift(&self) -> Vec<f64> {
        let m = self.dim();
        let mut g = vec![0.0; m];
        if self.alpha == 2.0 {
            return g;
        }
        let kappa = super::measure::stable_kappa(self.alpha);
        for (u, w) in &self.atoms {
            for k in 0..m {
                g[k] += w / kappa * u[k] / (1.0 - self.alpha);
            }
        }
        g
    }

    /// `ψ_α(z)`.
    pub fn exponent(&self, z: &[f64]) -> Complex64 {
        if self.alpha == 2.0 {
            let m = self.dim();
            let mut q = 0.0;
            for i in 0..m {
                for j in 0..m {
                    q += z[i] * self.sigma[(i, j)] * z[j];
                }
            }
            return Complex64::new(-0.5 * q, 0.0);
        }
        let tan = (PI * self.alpha / 2.0).tan();
        let mut total = Complex64::new(0.0, 0.0);
        for (u, w) in &self.atoms {
            let p: f64 = z.iter().zip(u).map(|(a, b)| a * b).sum();
            if p != 0.0 {
                total -= Complex64::new(1.0, -p.signum() * tan) * (w * p.abs().powf(self.alpha));
            }
        }
        total
    }

    /// Draw with exponent `scale·ψ_α`, written into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, scale: f64, rng: &mut R, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        if scale == 0.0 {
            return;
        }
        if let Some(chol) = &self.sigma_chol {
            let m = self.dim();
            let s = scale.sqrt();
            let z: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
            for i in 0..m {
                out[i] = s * (0..=i).map(|j| chol[(i, j)] * z[j]).sum::<f64>();
            }
            return;
        }
        for g in &self.groups {
            match g {
                AtomGroup::Skewed { atom } => {
                    let (u, w) = &self.atoms[*atom];
                    if *w == 0.0 {
                        continue;
                    }
                    let x = (scale * w).powf(1.0 / self.alpha) * standard_stable(self.alpha, 1.0, rng);
                    for (o, d) in out.iter_mut().zip(u) {
                        *o += x * d;
                    }
                }
                AtomGroup::Symmetric { atom } => {
                    let (u, w) = &self.atoms[*atom];
                    if *w == 0.0 {
                        continue;
                    }
                    let x = (2.0 * scale * w).powf(1.0 / self.alpha) * standard_stable(self.alpha, 0.0, rng);
                    for (o, d) in out.iter_mut().zip(u) {
                        *o += x * d;
                    }
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, scale: f64, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.sample_into(scale, rng, &mut out);
        out
    }
}

/// Standard stable variate with `E e^{iθX} = exp(−|θ|^α(1 − iβ sign θ tan(πα/2)))`,
/// `α ≠ 1`, by the Chambers-Mallows-Stuck transformation.
pub fn standard_stable<R: Rng + ?Sized>(alpha: f64, beta: f64, rng: &mut R) -> f64 {
    let v = PI * (rng.random::<f64>() - 0.5);
    let w: f64 = rng.sample(Exp1);
    if beta == 0.0 {
        let num = (alpha * v).sin() / v.cos().powf(1.0 / alpha);
        return num * (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha);
    }
    let t = beta * (PI * alpha / 2.0).tan();
    let b = t.atan() / alpha;
    let s = (1.0 + t * t).powf(1.0 / (2.0 * alpha));
    let num = s * (alpha * (v + b)).sin() / v.cos().powf(1.0 / alpha);
    let x = num * ((v - alpha * (v + b)).cos() / w).powf((1.0 - alpha) / alpha);
    debug_assert!(v.abs() <= FRAC_PI_2);
    x
}

/// Lower-triangular factor of a symmetric positive-semidefinite matrix,
/// with a small diagonal jitter for singular inputs.
pub(crate) fn psd_factor(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(c) = sigma.clone().cholesky() {
        return Ok(c.l());
    }
    let eig = sigma.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|v| *v < -1e-10 * sigma.norm().max(1.0)) {
        return Err(Error::InvalidParameter("covariance is not positive semidefinite".into()));
    }
    // Q·sqrt(Λ) is a valid (non-triangular) factor; make it triangular via QR.
    let m = sigma.nrows();
    let root = &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
    let qr = root.transpose().qr();
    let mut l = qr.r().transpose();
    for j in 0..m {
        if l[(j, j)] < 0.0 {
            for i in 0..m {
                l[(i, j)] = -l[(i, j)];
            }
        }
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Domain};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn symmetric_1d(alpha: f64) -> StableSpec {
        StableSpec::new(alpha, vec![(vec![1.0], 0.5), (vec![-1.0], 0.5)], DMatrix::zeros(1, 1)).unwrap()
    }

    #[test]
    fn exponent_examples() {
        let s = symmetric_1d(1.5);
        let v = s.exponent(&[2.0]);
        assert_relative_eq!(v.re, -(2.0f64.powf(1.5)), epsilon = 1e-12);
        assert!(v.im.abs() < 1e-12);
        assert_eq!(s.exponent(&[0.0]), Complex64::new(0.0, 0.0));
        assert!((s.exponent(&[4.0]) - s.exponent(&[2.0]) * 2.0f64.powf(1.5)).norm() < 1e-12);
        let g = StableSpec::gaussian(DMatrix::from_element(1, 1, 1.0)).unwrap();
        assert_eq!(g.exponent(&[2.0]), Complex64::new(-2.0, 0.0));
    }

    #[test]
    fn rejects_alpha_at_most_one() {
        assert!(matches!(StableSpec::symmetric_axes(1.0, 1, 1.0), Err(Error::Unsupported(_))));
        assert!(matches!(StableSpec::symmetric_axes(0.7, 1, 1.0), Err(Error::Unsupported(_))));
    }

    proptest! {
        #[test]
        fn strict_stability_scaling(alpha in 1.05f64..2.0, z0 in -3.0f64..3.0, z1 in -3.0f64..3.0, w in 0.1f64..2.0) {
            let spec = StableSpec::new(
                alpha,
                vec![(vec![1.0, 0.0], w), (vec![0.6, 0.8], 0.3), (vec![0.0, -1.0], 0.7)],
                DMatrix::zeros(2, 2),
            ).unwrap();
            for c in [0.5, 2.0, 7.0] {
                let lhs = spec.exponent(&[c * z0, c * z1]);
                let rhs = spec.exponent(&[z0, z1]) * c.powf(alpha);
                prop_assert!((lhs - rhs).norm() <= 1e-10 * (1.0 + rhs.norm()));
            }
            let psi = spec.exponent(&[z0, z1]);
            prop_assert!(psi.re <= 0.0);
            prop_assert!((spec.exponent(&[-z0, -z1]) - psi.conj()).norm() < 1e-12 * (1.0 + psi.norm()));
        }
    }

    #[test]
    fn zero_scale_gives_zero() {
        let mut rng = stream(3, Domain::Test, 0);
        assert_eq!(symmetric_1d(1.5).sample(0.0, &mut rng), vec![0.0]);
    }

    #[test]
    fn gaussian_sampler_ks() {
        let g = StableSpec::gaussian(DMatrix::from_element(1, 1, 1.0)).unwrap();
        let mut rng = stream(5, Domain::Test, 0);
        let mut xs: Vec<f64> = (0..10_000).map(|_| g.sample(1.0, &mut rng)[0]).collect();
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let normal = statrs::distribution::Normal::new(0.0, 1.0).unwrap();
        use statrs::distribution::ContinuousCDF;
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let f = normal.cdf(*x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(d < 0.02, "KS {d}");
    }

    fn ecf_check(spec: &StableSpec, zs: &[Vec<f64>], seed: u64) {
        let n = 100_000;
        let mut rng = stream(seed, Domain::Test, 0);
        let draws: Vec<Vec<f64>> = (0..n).map(|_| spec.sample(1.0, &mut rng)).collect();
        for z in zs {
            let mut acc = Complex64::new(0.0, 0.0);
            for x in &draws {
                let p: f64 = z.iter().zip(x).map(|(a, b)| a * b).sum();
                acc += Complex64::new(0.0, p).exp();
            }
            acc /= n as f64;
            let target = spec.exponent(z).exp();
            assert!((acc - target).norm() < 3.0 / (n as f64).sqrt(), "z={z:?}: {acc} vs {target}");
        }
    }

    #[test]
    fn symmetric_sampler_ecf() {
        ecf_check(&symmetric_1d(1.5), &[vec![0.5], vec![1.0], vec![2.0]], 11);
    }

    #[test]
    fn skewed_sampler_ecf() {
        let spec = StableSpec::new(1.5, vec![(vec![1.0], 0.8)], DMatrix::zeros(1, 1)).unwrap();
        ecf_check(&spec, &[vec![0.5], vec![1.0], vec![-2.0]], 12);
        let spec2 = StableSpec::new(
            1.7,
            vec![(vec![1.0, 0.0], 0.4), (vec![-0.6, 0.8], 0.9)],
            DMatrix::zeros(2, 2),
        )
        .unwrap();
        ecf_check(&spec2, &[vec![0.5, 0.2], vec![-1.0, 1.0], vec![0.3, -1.5]], 13);
    }

    #[test]
    fn singular_covariance_factor() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let l = psd_factor(&s).unwrap();
        assert!((&l * l.transpose() - &s).norm() < 1e-12);
    }
}
