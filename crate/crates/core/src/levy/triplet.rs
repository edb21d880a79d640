use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use super::measure::{stable_kappa, LevyMeasureSpec, RadialLaw};
use super::stable::{psd_factor, StableSpec};
use crate::error::{Error, Result};

/// Default truncation level for infinite-activity finite-variation measures.
pub const DEFAULT_FV_TRUNCATION: f64 = 1e-4;

/// Characteristic triplet `(γ, Σ, ν)` of a homogeneous Lévy seed, with
/// drift in the convention compensating jumps of size at most one.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyTriplet {
    gamma: Vec<f64>,
    sigma: DMatrix<f64>,
    nu: LevyMeasureSpec,
    sigma_factor: Option<DMatrix<f64>>,
}

impl LevyTriplet {
    pub fn new(gamma: Vec<f64>, sigma: DMatrix<f64>, nu: LevyMeasureSpec) -> Result<Self> {
        let m = gamma.len();
        if m == 0 || sigma.nrows() != m || sigma.ncols() != m || (nu.dim() != m && !nu.components().is_empty()) {
            return Err(Error::InvalidParameter(format!(
                "triplet dimensions disagree: gamma {m}, sigma {}x{}, nu {}",
                sigma.nrows(),
                sigma.ncols(),
                nu.dim()
            )));
        }
        if gamma.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("drift must be finite".into()));
        }
        if (&sigma - sigma.transpose()).norm() > 1e-12 * sigma.norm().max(1.0) {
            return Err(Error::InvalidParameter("Gaussian covariance must be symmetric".into()));
        }
        let sigma_factor = if sigma.iter().all(|v| *v == 0.0) {
            None
        } else {
            Some(psd_factor(&sigma)?)
        };
        let nu = if nu.components().is_empty() { LevyMeasureSpec::zero(m) } else { nu };
        Ok(Self {
            gamma,
            sigma,
            nu,
            sigma_factor,
        })
    }

    pub fn gaussian(sigma: DMatrix<f64>) -> Result<Self> {
        let m = sigma.nrows();
        Self::new(vec![0.0; m], sigma, LevyMeasureSpec::zero(m))
    }

    pub fn drift_only(gamma: Vec<f64>) -> Result<Self> {
        let m = gamma.len();
        Self::new(gamma, DMatrix::zeros(m, m), LevyMeasureSpec::zero(m))
    }

    /// Finite-variation triplet specified through `γ₀` instead of `γ`.
    pub fn from_gamma0(gamma0: Vec<f64>, nu: LevyMeasureSpec) -> Result<Self> {
        let m = gamma0.len();
        if !nu.is_finite_variation() {
            return Err(Error::InvalidParameter("gamma0 is only defined for finite-variation measures".into()));
        }
        let small = nu.small_mean(1.0);
        let gamma = gamma0.iter().zip(&small).map(|(a, b)| a + b).collect();
        Self::new(gamma, DMatrix::zeros(m, m), nu)
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn nu(&self) -> &LevyMeasureSpec {
        &self.nu
    }

    pub fn has_gaussian_part(&self) -> bool {
        self.sigma_factor.is_some()
    }

    /// `Σ = 0` and `∫(1 ∧ ‖x‖)ν(dx) < ∞`.
    pub fn is_finite_variation(&self) -> bool {
        self.sigma_factor.is_none() && self.nu.is_finite_variation()
    }

    /// `γ₀ = γ − ∫_{‖x‖≤1} x ν(dx)`, defined in the finite-variation case.
    pub fn gamma0(&self) -> Result<Vec<f64>> {
        if !self.nu.is_finite_variation() {
            return Err(Error::InfiniteVariation("gamma0 needs a finite-variation Levy measure".into()));
        }
        let small = self.nu.small_mean(1.0);
        Ok(self.gamma.iter().zip(&small).map(|(a, b)| a - b).collect())
    }

    /// `ψ(z) = iγ·z − ½z·Σz + ∫(e^{iz·x} − 1 − iz·x 1_{‖x‖≤1})ν(dx)`.
    pub fn char_exponent(&self, z: &[f64]) -> Result<Complex64> {
        let m = self.dim();
        let lin: f64 = self.gamma.iter().zip(z).map(|(a, b)| a * b).sum();
        let mut quad = 0.0;
        for i in 0..m {
            for j in 0..m {
                quad += z[i] * self.sigma[(i, j)] * z[j];
            }
        }
        Ok(Complex64::new(-0.5 * quad, lin) + self.nu.exponent_integral(z)?)
    }

    /// `r·ψ(r^{−1/α} w)`.
    pub fn rescaled_exponent(&self, alpha: f64, w: &[f64], r: f64) -> Result<Complex64> {
        if !(r > 0.0) {
            return Err(Error::InvalidParameter(format!("rescaling radius must be positive, got {r}")));
        }
        let f = r.powf(-1.0 / alpha);
        let z: Vec<f64> = w.iter().map(|v| v * f).collect();
        Ok(self.char_exponent(&z)? * r)
    }

    /// The strictly stable law whose exponent `r·ψ(r^{−1/α}·)` converges to.
    ///
    /// `α = 2` needs `ν = 0` and returns the Gaussian part. For `1 < α < 2`
    /// every component must be a power tail of index `α`; a tail
    /// `c·s^{−1−α}` has `s^α ρ(s, ∞) → K = c/α`, and the limit Lévy density
    /// `c·s^{−1−α}` carries exponent weight `K·Γ(1 − α)cos(πα/2)·λ = c·κ_α·λ`.
    pub fn stable_limit(&self, alpha: f64) -> Result<StableSpec> {
        if alpha == 2.0 {
            if !self.nu.is_zero() {
                return Err(Error::Unsupported("alpha = 2 limits are implemented for Gaussian triplets".into()));
            }
            return StableSpec::gaussian(self.sigma.clone());
        }
        if self.sigma_factor.is_some() {
            return Err(Error::InvalidParameter("alpha < 2 attraction requires sigma = 0".into()));
        }
        let kappa = stable_kappa(alpha);
        let mut atoms = Vec::new();
        for comp in self.nu.components() {
            if comp.weight == 0.0 {
                continue;
            }
            match &comp.radial {
                RadialLaw::PowerTail { alpha: a, c, .. } if (*a - alpha).abs() < 1e-12 => {
                    atoms.push((comp.direction.clone(), comp.weight * c * kappa));
                }
                RadialLaw::PowerTail { .. } | RadialLaw::Exponential { .. } | RadialLaw::Atoms(_) => {
                    // components with lighter small-jump tails do not contribute
                    if comp.radial.is_finite_variation() || matches!(comp.radial, RadialLaw::PowerTail { alpha: a, .. } if a < alpha)
                    {
                        continue;
                    }
                    return Err(Error::Unsupported(format!(
                        "component {:?} is not in the domain of attraction of index {alpha}",
                        comp.radial
                    )));
                }
            }
        }
        StableSpec::new(alpha, atoms, DMatrix::zeros(self.dim(), self.dim()))
    }

    /// Drift that makes the triplet strictly stable in the small-scale limit:
    /// for power tails `c·s^{−1−α}` on `(0, 1]`, `γ = Σ λ_u c u/(1 − α)`.
    /// With this drift the error of [`Self::rescaled_exponent`] is `O(r)`;
    /// with any other drift it decays only like `r^{1−1/α}`.
    pub fn matched_stable_drift(nu: &LevyMeasureSpec, alpha: f64) -> Vec<f64> {
        let mut g = vec![0.0; nu.dim()];
        for comp in nu.components() {
            if let RadialLaw::PowerTail { alpha: a, c, cutoff } = &comp.radial {
                if (*a - alpha).abs() < 1e-12 && *cutoff == 1.0 {
                    for (k, u) in comp.direction.iter().enumerate() {
                        g[k] += comp.weight * c * u / (1.0 - alpha);
                    }
                }
            }
        }
        g
    }

    /// Draw of `L(B)` for a cell of Lebesgue measure `volume`, using the
    /// default truncation for infinite-activity finite-variation measures.
    pub fn sample_increment<R: Rng + ?Sized>(&self, volume: f64, rng: &mut R) -> Result<Vec<f64>> {
        self.sample_increment_truncated(volume, DEFAULT_FV_TRUNCATION, rng)
    }

    /// As [`Self::sample_increment`], discarding jumps of norm at most `eps`
    /// and replacing them by their mean.
    pub fn sample_increment_truncated<R: Rng + ?Sized>(&self, volume: f64, eps: f64, rng: &mut R) -> Result<Vec<f64>> {
        let m = self.dim();
        let mut out = vec![0.0; m];
        if volume <= 0.0 {
            return Ok(out);
        }
        if !self.nu.is_finite_variation() {
            return Err(Error::Unsupported(
                "increments of infinite-variation measures outside the stable catalog; use the stable sampler".into(),
            ));
        }
        let eps = if self.nu.is_finite_activity() { 0.0 } else { eps };
        // jumps above 1 are not compensated; jumps in (eps, 1] are, and the
        // discarded jumps below eps contribute their mean
        let comp_small = self.nu.small_mean(1.0);
        let below = self.nu.small_mean(eps);
        for k in 0..m {
            out[k] = volume * (self.gamma[k] - comp_small[k] + below[k]);
        }
        if let Some(l) = &self.sigma_factor {
            let z: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
            let s = volume.sqrt();
            for i in 0..m {
                out[i] += s * (0..=i).map(|j| l[(i, j)] * z[j]).sum::<f64>();
            }
        }
        let masses = self.nu.component_masses(eps);
        let total: f64 = masses.iter().sum();
        if !total.is_finite() {
            return Err(Error::InfiniteMass { epsilon: eps });
        }
        if total > 0.0 {
            let count = Poisson::new(total * volume)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?
                .sample(rng) as u64;
            let mut mark = vec![0.0; m];
            for _ in 0..count {
                self.nu.sample_mark(eps, &masses, total, rng, &mut mark);
                for k in 0..m {
                    out[k] += mark[k];
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::super::measure::PolarComponent;
    use super::*;
    use crate::rng::{stream, Domain};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn power_tail_triplet(alpha: f64, c: f64, matched: bool) -> LevyTriplet {
        let nu = LevyMeasureSpec::new(
            1,
            vec![PolarComponent {
                direction: vec![1.0],
                weight: 1.0,
                radial: RadialLaw::power_tail(alpha, c),
            }],
        )
        .unwrap();
        let g = if matched { LevyTriplet::matched_stable_drift(&nu, alpha) } else { vec![0.0] };
        LevyTriplet::new(g, DMatrix::zeros(1, 1), nu).unwrap()
    }

    fn catalog() -> Vec<LevyTriplet> {
        let two_d = LevyMeasureSpec::new(
            2,
            vec![
                PolarComponent {
                    direction: vec![1.0, 0.0],
                    weight: 0.7,
                    radial: RadialLaw::power_tail(1.5, 1.0),
                },
                PolarComponent {
                    direction: vec![0.6, -0.8],
                    weight: 1.3,
                    radial: RadialLaw::Exponential { c: 1.0, beta: 2.0 },
                },
                PolarComponent {
                    direction: vec![0.0, 1.0],
                    weight: 0.5,
                    radial: RadialLaw::Atoms(vec![(0.5, 1.0), (2.0, 0.3)]),
                },
            ],
        )
        .unwrap();
        vec![
            LevyTriplet::gaussian(DMatrix::from_element(1, 1, 1.0)).unwrap(),
            LevyTriplet::new(vec![0.0], DMatrix::zeros(1, 1), LevyMeasureSpec::point_masses(&[(vec![1.0], 1.0)]).unwrap())
                .unwrap(),
            power_tail_triplet(1.5, 1.0, true),
            power_tail_triplet(0.6, 2.0, false),
            LevyTriplet::new(vec![0.3, -0.1], DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.5]), two_d).unwrap(),
        ]
    }

    #[test]
    fn exponent_examples() {
        let g = LevyTriplet::gaussian(DMatrix::from_element(1, 1, 1.0)).unwrap();
        assert_eq!(g.char_exponent(&[2.0]).unwrap(), Complex64::new(-2.0, 0.0));
        let cp = &catalog()[1];
        let v = cp.char_exponent(&[std::f64::consts::PI]).unwrap();
        assert!((v - Complex64::new(-2.0, -std::f64::consts::PI)).norm() < 1e-14);
        for t in catalog() {
            let z = vec![0.0; t.dim()];
            assert_eq!(t.char_exponent(&z).unwrap(), Complex64::new(0.0, 0.0));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn exponent_invariants(z0 in -20.0f64..20.0, z1 in -20.0f64..20.0) {
            for t in catalog() {
                let z: Vec<f64> = [z0, z1][..t.dim()].to_vec();
                let minus: Vec<f64> = z.iter().map(|v| -v).collect();
                let psi = t.char_exponent(&z).unwrap();
                prop_assert!(psi.re <= 1e-9 * (1.0 + psi.norm()));
                let conj = t.char_exponent(&minus).unwrap();
                prop_assert!((conj - psi.conj()).norm() <= 1e-8 * (1.0 + psi.norm()));
            }
        }
    }

    #[test]
    fn gaussian_rescaling_is_exact() {
        let g = LevyTriplet::gaussian(DMatrix::from_element(1, 1, 1.0)).unwrap();
        for r in [0.5, 1e-3, 1e-7] {
            assert_relative_eq!(g.rescaled_exponent(2.0, &[2.0], r).unwrap().re, -2.0, epsilon = 1e-12);
        }
    }

    /// Independent oracle: the stable exponent of the limit Lévy density
    /// `c·s^{−1−α}` on `(0, ∞)`, computed by numerical integration of the
    /// fully compensated integral in test code.
    fn oracle_stable_exponent(alpha: f64, c: f64, w: f64) -> Complex64 {
        use crate::quadrature::integrate;
        let f = |s: f64| {
            let x = w * s;
            let core = if x.abs() < 1e-4 {
                Complex64::new(-x * x / 2.0, -x.powi(3) / 6.0)
            } else {
                Complex64::new(x.cos() - 1.0, x.sin() - x)
            };
            core * (c * s.powf(-1.0 - alpha))
        };
        let period = 2.0 * std::f64::consts::PI / w.abs();
        let mut total = Complex64::new(0.0, 0.0);
        let mut a = 0.0;
        for k in 1..=20_000 {
            let b = k as f64 * period;
            total += integrate(f, a, b, 1e-13, 1e-10).unwrap().value;
            a = b;
        }
        // tail beyond a: the −iws term dominates, −i w c a^{1−α}/(α−1), plus −c a^{−α}/α
        total + Complex64::new(-c * a.powf(-alpha) / alpha, -w * c * a.powf(1.0 - alpha) / (alpha - 1.0))
    }

    #[test]
    fn domain_of_attraction_limit_power_tail() {
        let t = power_tail_triplet(1.5, 1.0, true);
        let spec = t.stable_limit(1.5).unwrap();
        for w in [0.5, 1.0, 2.0] {
            let target = spec.exponent(&[w]);
            let oracle = oracle_stable_exponent(1.5, 1.0, w);
            assert!((target - oracle).norm() < 1e-5 * oracle.norm(), "{target} vs {oracle}");
            let approx = t.rescaled_exponent(1.5, &[w], 1e-4).unwrap();
            assert!((approx - target).norm() / target.norm() < 0.01);
        }
    }

    #[test]
    fn rescaled_error_is_monotone() {
        let t = power_tail_triplet(1.5, 1.0, true);
        let spec = t.stable_limit(1.5).unwrap();
        for w in [0.5, 1.0, 2.0] {
            let errs: Vec<f64> = [1e-1, 1e-2, 1e-3, 1e-4]
                .iter()
                .map(|r| (t.rescaled_exponent(1.5, &[w], *r).unwrap() - spec.exponent(&[w])).norm())
                .collect();
            assert!(errs.windows(2).all(|p| p[1] < p[0]), "{errs:?}");
        }
    }

    #[test]
    fn fv_rescaled_limit() {
        let t = &catalog()[1];
        let g0 = t.gamma0().unwrap();
        assert_eq!(g0, vec![-1.0]);
        let v = t.rescaled_exponent(1.0, &[1.0], 1e-4).unwrap();
        let target = Complex64::new(0.0, g0[0]);
        assert!((v - target).norm() < 0.01);
    }

    #[test]
    fn increment_moments() {
        let g = LevyTriplet::gaussian(DMatrix::from_element(1, 1, 1.0)).unwrap();
        let mut rng = stream(21, Domain::Test, 0);
        assert_eq!(g.sample_increment(0.0, &mut rng).unwrap(), vec![0.0]);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| g.sample_increment(4.0, &mut rng).unwrap()[0]).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 3.0 * 2.0 / (n as f64).sqrt());
        assert!((var - 4.0).abs() < 0.05 * 4.0);

        // unit jumps with drift cancelling the compensator: the increment is the jump count
        let cp = LevyTriplet::new(vec![1.0], DMatrix::zeros(1, 1), LevyMeasureSpec::point_masses(&[(vec![1.0], 1.0)]).unwrap())
            .unwrap();
        let n = 20_000;
        let counts: Vec<f64> = (0..n).map(|_| cp.sample_increment(2.0, &mut rng).unwrap()[0]).collect();
        assert!(counts.iter().all(|c| c.fract() == 0.0));
        let mean = counts.iter().sum::<f64>() / n as f64;
        assert!((mean - 2.0).abs() < 3.0 * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn additivity_of_cell_increments() {
        // sum of k independent cell increments ~ exp(Leb(box)ψ)
        let nu = LevyMeasureSpec::new(
            2,
            vec![
                PolarComponent {
                    direction: vec![1.0, 0.0],
                    weight: 0.7,
                    radial: RadialLaw::power_tail(0.6, 1.0),
                },
                PolarComponent {
                    direction: vec![0.6, -0.8],
                    weight: 1.3,
                    radial: RadialLaw::Exponential { c: 1.0, beta: 2.0 },
                },
                PolarComponent {
                    direction: vec![0.0, 1.0],
                    weight: 0.5,
                    radial: RadialLaw::Atoms(vec![(0.5, 1.0), (2.0, 0.3)]),
                },
            ],
        )
        .unwrap();
        let t = &LevyTriplet::new(vec![0.3, -0.1], DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.5]), nu).unwrap();
        let cells = [0.3, 0.5, 0.2, 1.0];
        let vol: f64 = cells.iter().sum();
        let n = 40_000;
        let mut rng = stream(22, Domain::Test, 0);
        let zs = [[0.3, 0.1], [-0.5, 0.4], [1.0, 0.0], [0.0, 0.8], [0.7, -0.7]];
        let mut acc = vec![Complex64::new(0.0, 0.0); zs.len()];
        for _ in 0..n {
            let mut s = [0.0, 0.0];
            for v in cells {
                let x = t.sample_increment_truncated(v, 1e-6, &mut rng).unwrap();
                s[0] += x[0];
                s[1] += x[1];
            }
            for (a, z) in acc.iter_mut().zip(&zs) {
                *a += Complex64::new(0.0, z[0] * s[0] + z[1] * s[1]).exp();
            }
        }
        for (a, z) in acc.iter().zip(&zs) {
            let emp = a / n as f64;
            let target = (t.char_exponent(z).unwrap() * vol).exp();
            assert!((emp - target).norm() < 3.0 / (n as f64).sqrt() + 1e-4, "{z:?}: {emp} vs {target}");
        }
    }

    #[test]
    fn infinite_variation_increments_are_refused() {
        let t = power_tail_triplet(1.5, 1.0, false);
        let mut rng = stream(1, Domain::Test, 0);
        assert!(matches!(t.sample_increment(1.0, &mut rng), Err(Error::Unsupported(_))));
    }
}
