use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::quadrature::integrate;

/// Radial Lévy measure `ρ_u` on `(0, ∞)`.
#[derive(Debug, Clone, PartialEq)]
pub enum RadialLaw {
    /// `c·s^{−1−α} ds` on `(0, cutoff]`. The catalog default has cutoff 1;
    /// an infinite cutoff (only for `1 < α < 2`) gives the radial part of a
    /// stable law.
    PowerTail { alpha: f64, c: f64, cutoff: f64 },
    /// Tempered `c·e^{−βs}/s ds` on `(0, ∞)`: infinite activity, finite variation.
    Exponential { c: f64, beta: f64 },
    /// Finitely many atoms `(size, mass)`.
    Atoms(Vec<(f64, f64)>),
}

impl RadialLaw {
    /// Power tail on `(0, 1]`.
    pub fn power_tail(alpha: f64, c: f64) -> Self {
        RadialLaw::PowerTail { alpha, c, cutoff: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RadialLaw::PowerTail { alpha, c, cutoff } => {
                if !(*alpha > 0.0 && *alpha < 2.0) {
                    return Err(Error::InvalidParameter(format!(
                        "power-tail index must lie in (0, 2) for a Levy measure, got {alpha}"
                    )));
                }
                if !(*c >= 0.0 && c.is_finite()) || !(*cutoff > 0.0) {
                    return Err(Error::InvalidParameter(format!("invalid power tail c = {c}, cutoff = {cutoff}")));
                }
                if cutoff.is_infinite() && *alpha <= 1.0 {
                    return Err(Error::Unsupported("untruncated power tails need 1 < alpha < 2".into()));
                }
            }
            RadialLaw::Exponential { c, beta } => {
                if !(*c >= 0.0 && *beta > 0.0 && c.is_finite() && beta.is_finite()) {
                    return Err(Error::InvalidParameter(format!("invalid exponential law c = {c}, beta = {beta}")));
                }
            }
            RadialLaw::Atoms(atoms) => {
                if atoms.iter().any(|(s, w)| !(*s > 0.0 && s.is_finite()) || !(*w >= 0.0 && w.is_finite())) {
                    return Err(Error::InvalidParameter("atoms need positive sizes and nonnegative masses".into()));
                }
            }
        }
        Ok(())
    }

    pub fn is_finite_variation(&self) -> bool {
        match self {
            RadialLaw::PowerTail { alpha, c, .. } => *alpha < 1.0 || *c == 0.0,
            _ => true,
        }
    }

    pub fn is_finite_activity(&self) -> bool {
        match self {
            RadialLaw::PowerTail { c, .. } => *c == 0.0,
            RadialLaw::Exponential { c, .. } => *c == 0.0,
            RadialLaw::Atoms(_) => true,
        }
    }

    /// `ρ((ε, ∞))`, infinite when `ε = 0` for infinite-activity laws.
    pub fn mass_above(&self, eps: f64) -> f64 {
        match self {
            RadialLaw::PowerTail { alpha, c, cutoff } => {
                if *c == 0.0 || eps >= *cutoff {
                    0.0
                } else if eps <= 0.0 {
                    f64::INFINITY
                } else {
                    c * (eps.powf(-alpha) - cutoff.powf(-alpha)) / alpha
                }
            }
            RadialLaw::Exponential { c, beta } => {
                if *c == 0.0 {
                    0.0
                } else if eps <= 0.0 {
                    f64::INFINITY
                } else {
                    c * exp_integral_e1(beta * eps)
                }
            }
            RadialLaw::Atoms(atoms) => atoms.iter().filter(|(s, _)| *s > eps).map(|(_, w)| w).sum(),
        }
    }

    /// `∫_{(0, ε]} s^k ρ(ds)` for `k ∈ {1, 2}`.
    pub fn small_moment(&self, eps: f64, k: i32) -> f64 {
        match self {
            RadialLaw::PowerTail { alpha, c, cutoff } => {
                let e = eps.min(*cutoff);
                let p = k as f64 - alpha;
                if p <= 0.0 {
                    f64::INFINITY
                } else {
                    c * e.powf(p) / p
                }
            }
            RadialLaw::Exponential { c, beta } => {
                // ∫_0^ε s^{k−1} e^{−βs} ds
                let b = *beta;
                if k == 1 {
                    c * (1.0 - (-b * eps).exp()) / b
                } else {
                    c * (1.0 - (-b * eps).exp() * (1.0 + b * eps)) / (b * b)
                }
            }
            RadialLaw::Atoms(atoms) => atoms.iter().filter(|(s, _)| *s <= eps).map(|(s, w)| w * s.powi(k)).sum(),
        }
    }

    /// `∫_{(ε, 1]} s ρ(ds)`, finite for every `ε > 0`.
    pub fn mid_moment(&self, eps: f64) -> f64 {
        if eps >= 1.0 {
            return 0.0;
        }
        match self {
            RadialLaw::PowerTail { alpha, c, cutoff } => {
                let hi = cutoff.min(1.0);
                if eps >= hi {
                    return 0.0;
                }
                if (*alpha - 1.0).abs() < 1e-15 {
                    c * (hi / eps).ln()
                } else {
                    c * (eps.powf(1.0 - alpha) - hi.powf(1.0 - alpha)) / (alpha - 1.0)
                }
            }
            RadialLaw::Exponential { .. } | RadialLaw::Atoms(_) => self.small_moment(1.0, 1) - self.small_moment(eps, 1),
        }
    }

    /// `∫_0^∞ (e^{iθs} − 1 − iθs·1_{s≤1}) ρ(ds)`.
    pub fn exponent_integral(&self, theta: f64) -> Result<Complex64> {
        if theta == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        match self {
            RadialLaw::Atoms(atoms) => Ok(atoms
                .iter()
                .map(|(s, w)| {
                    let comp = if *s <= 1.0 { theta * s } else { 0.0 };
                    (Complex64::new(0.0, theta * s).exp() - 1.0 - Complex64::new(0.0, comp)) * *w
                })
                .sum()),
            RadialLaw::Exponential { c, beta } => {
                // Frullani: ∫(e^{iθs} − 1)e^{−βs}/s ds = −log(1 − iθ/β)
                let frullani = -(Complex64::new(1.0, -theta / beta)).ln();
                let comp = theta * (1.0 - (-beta).exp()) / beta;
                Ok((frullani - Complex64::new(0.0, comp)) * *c)
            }
            RadialLaw::PowerTail { alpha, c, cutoff } => {
                if *c == 0.0 {
                    return Ok(Complex64::new(0.0, 0.0));
                }
                if cutoff.is_infinite() {
                    // fully compensated stable integral plus the large-jump mean
                    let stable = -Complex64::new(1.0, -theta.signum() * (PI * alpha / 2.0).tan())
                        * (c * stable_kappa(*alpha) * theta.abs().powf(*alpha));
                    return Ok(stable + Complex64::new(0.0, theta * c / (alpha - 1.0)));
                }
                power_tail_integral(*alpha, *c, *cutoff, theta)
            }
        }
    }

    /// Jump size drawn from `ρ` restricted to `(ε, ∞)` and normalized.
    pub fn sample_above<R: Rng + ?Sized>(&self, eps: f64, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        match self {
            RadialLaw::PowerTail { alpha, cutoff, .. } => {
                let lo = eps.powf(-alpha);
                let hi = if cutoff.is_infinite() { 0.0 } else { cutoff.powf(-alpha) };
                (lo - u * (lo - hi)).powf(-1.0 / alpha)
            }
            RadialLaw::Exponential { beta, .. } => {
                // invert the tail E1(βs) = (1 − u)·E1(βε) in log s by bisection
                let target = (1.0 - u) * exp_integral_e1(beta * eps);
                let (mut lo, mut hi) = (eps.ln(), (eps.max(1.0 / beta) * 1e3).ln());
                while exp_integral_e1(beta * hi.exp()) > target {
                    hi += 5.0;
                }
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if exp_integral_e1(beta * mid.exp()) > target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                (0.5 * (lo + hi)).exp()
            }
            RadialLaw::Atoms(atoms) => {
                let total: f64 = atoms.iter().filter(|(s, _)| *s > eps).map(|(_, w)| w).sum();
                let mut acc = 0.0;
                let mut last = atoms[0].0;
                for (s, w) in atoms.iter().filter(|(s, _)| *s > eps) {
                    acc += w;
                    last = *s;
                    if u * total < acc {
                        return *s;
                    }
                }
                last
            }
        }
    }
}

/// `κ_α = −Γ(−α)·cos(πα/2)`: the constant turning the Lévy density
/// `c·s^{−1−α}` into the exponent weight `c·κ_α`.
pub fn stable_kappa(alpha: f64) -> f64 {
    -statrs::function::gamma::gamma(-alpha) * (PI * alpha / 2.0).cos()
}

/// Numerical radial integral for the truncated power tail, split into
/// pieces of one oscillation period so that large `θ` stays well resolved.
fn power_tail_integral(alpha: f64, c: f64, cutoff: f64, theta: f64) -> Result<Complex64> {
    let integrand = |s: f64| -> Complex64 {
        let x = theta * s;
        let core = if x.abs() < 1e-3 {
            Complex64::new(-x * x / 2.0 + x.powi(4) / 24.0, -x.powi(3) / 6.0 + x.powi(5) / 120.0)
        } else {
            Complex64::new(x.cos() - 1.0, x.sin() - x)
        };
        let comp = if s > 1.0 { Complex64::new(0.0, x) } else { Complex64::new(0.0, 0.0) };
        (core + comp) * (c * s.powf(-1.0 - alpha))
    };
    let period = 2.0 * PI / theta.abs();
    let mut breaks = vec![0.0];
    let mut b = period.min(cutoff);
    let max_pieces = 20_000;
    while b < cutoff && breaks.len() < max_pieces {
        if 1.0 > *breaks.last().unwrap() && 1.0 < b {
            breaks.push(1.0);
        }
        breaks.push(b);
        b += period;
    }
    if 1.0 > *breaks.last().unwrap() && 1.0 < cutoff {
        breaks.push(1.0);
    }
    breaks.push(cutoff);
    let mut total = Complex64::new(0.0, 0.0);
    for w in breaks.windows(2) {
        let piece = integrate(integrand, w[0], w[1], 1e-12, 1e-11)?;
        total += piece.value;
    }
    Ok(total)
}

/// Exponential integral `E1(x) = ∫_x^∞ e^{−t}/t dt` for `x > 0`.
pub fn exp_integral_e1(x: f64) -> f64 {
    if x <= 0.0 {
        return f64::INFINITY;
    }
    if x <= 1.0 {
        let euler = 0.577_215_664_901_532_9;
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..100 {
            term *= -x / k as f64;
            let add = -term / k as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        -euler - x.ln() + sum
    } else {
        // modified Lentz for the continued fraction
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut cf = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..200 {
            let a = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (a * d + b);
            cf = b + a / cf;
            let del = cf * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}

/// One atom of the spectral measure `λ`: direction, weight and radial law.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarComponent {
    pub direction: Vec<f64>,
    pub weight: f64,
    pub radial: RadialLaw,
}

/// Lévy measure in polar form `ν(B) = ∫∫ 1_B(su) ρ_u(ds) λ(du)` with an
/// atomic `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyMeasureSpec {
    dim: usize,
    components: Vec<PolarComponent>,
}

impl LevyMeasureSpec {
    pub fn new(dim: usize, components: Vec<PolarComponent>) -> Result<Self> {
        for comp in &components {
            if comp.direction.len() != dim {
                return Err(Error::InvalidParameter(format!(
                    "spectral direction {:?} does not have dimension {dim}",
                    comp.direction
                )));
            }
            let n: f64 = comp.direction.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (n - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!("spectral direction {:?} is not a unit vector", comp.direction)));
            }
            if !(comp.weight >= 0.0 && comp.weight.is_finite()) {
                return Err(Error::InvalidParameter(format!("spectral weight must be finite and nonnegative, got {}", comp.weight)));
            }
            comp.radial.validate()?;
        }
        Ok(Self { dim, components })
    }

    pub fn zero(dim: usize) -> Self {
        Self { dim, components: Vec::new() }
    }

    /// Point masses `δ_x` with the given rates.
    pub fn point_masses(points: &[(Vec<f64>, f64)]) -> Result<Self> {
        let dim = points.first().map(|(x, _)| x.len()).unwrap_or(1);
        let comps = points
            .iter()
            .map(|(x, rate)| {
                let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                PolarComponent {
                    direction: x.iter().map(|v| v / n).collect(),
                    weight: *rate,
                    radial: RadialLaw::Atoms(vec![(n, 1.0)]),
                }
            })
            .collect();
        Self::new(dim, comps)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[PolarComponent] {
        &self.components
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| c.weight == 0.0 || c.radial.mass_above(0.0) == 0.0)
    }

    /// `∫(1 ∧ ‖x‖)ν(dx) < ∞`.
    pub fn is_finite_variation(&self) -> bool {
        self.components.iter().all(|c| c.weight == 0.0 || c.radial.is_finite_variation())
    }

    pub fn is_finite_activity(&self) -> bool {
        self.components.iter().all(|c| c.weight == 0.0 || c.radial.is_finite_activity())
    }

    /// `ν({‖x‖ > ε})`.
    pub fn mass_above(&self, eps: f64) -> f64 {
        self.components
            .iter()
            .filter(|c| c.weight > 0.0)
            .map(|c| c.weight * c.radial.mass_above(eps))
            .sum()
    }

    /// `∫_{‖x‖≤ε} x ν(dx)`.
    pub fn small_mean(&self, eps: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for c in self.components.iter().filter(|c| c.weight > 0.0) {
            let m = c.weight * c.radial.small_moment(eps, 1);
            for (o, u) in out.iter_mut().zip(&c.direction) {
                *o += m * u;
            }
        }
        out
    }

    /// `∫_{ε<‖x‖≤1} x ν(dx)`.
    pub fn mid_mean(&self, eps: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for c in self.components.iter().filter(|c| c.weight > 0.0) {
            let m = c.weight * c.radial.mid_moment(eps);
            for (o, u) in out.iter_mut().zip(&c.direction) {
                *o += m * u;
            }
        }
        out
    }

    /// `∫_{‖x‖≤ε} ‖x‖ ν(dx)`, the ε-truncation bias per unit volume.
    pub fn small_abs_mean(&self, eps: f64) -> f64 {
        self.components
            .iter()
            .filter(|c| c.weight > 0.0)
            .map(|c| c.weight * c.radial.small_moment(eps, 1))
            .sum()
    }

    /// `∫_{‖x‖≤ε} x x′ ν(dx)` as a row-major `m×m` matrix.
    pub fn small_second_moment(&self, eps: f64) -> Vec<f64> {
        let m = self.dim;
        let mut out = vec![0.0; m * m];
        for c in self.components.iter().filter(|c| c.weight > 0.0) {
            let s2 = c.weight * c.radial.small_moment(eps, 2);
            for i in 0..m {
                for j in 0..m {
                    out[i * m + j] += s2 * c.direction[i] * c.direction[j];
                }
            }
        }
        out
    }

    /// `∫ (e^{iz·x} − 1 − iz·x 1_{‖x‖≤1}) ν(dx)`.
    pub fn exponent_integral(&self, z: &[f64]) -> Result<Complex64> {
        let mut total = Complex64::new(0.0, 0.0);
        for c in self.components.iter().filter(|c| c.weight > 0.0) {
            let theta: f64 = z.iter().zip(&c.direction).map(|(a, b)| a * b).sum();
            total += c.radial.exponent_integral(theta)? * c.weight;
        }
        Ok(total)
    }

    /// One mark of `ν` restricted to `{‖x‖ > ε}` and normalized; `masses`
    /// are the per-component masses above `ε` and `total` their sum.
    pub(crate) fn sample_mark<R: Rng + ?Sized>(&self, eps: f64, masses: &[f64], total: f64, rng: &mut R, out: &mut [f64]) {
        let u: f64 = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = masses.len() - 1;
        for (k, m) in masses.iter().enumerate() {
            acc += m;
            if u < acc {
                pick = k;
                break;
            }
        }
        let comp = &self.components[pick];
        let size = comp.radial.sample_above(eps, rng);
        for (o, d) in out.iter_mut().zip(&comp.direction) {
            *o = size * d;
        }
    }

    pub(crate) fn component_masses(&self, eps: f64) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| if c.weight > 0.0 { c.weight * c.radial.mass_above(eps) } else { 0.0 })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Domain};
    use approx::assert_relative_eq;

    #[test]
    fn e1_reference_values() {
        // tabulated values of the exponential integral
        assert_relative_eq!(exp_integral_e1(0.1), 1.822_923_958_419_390_7, max_relative = 1e-13);
        assert_relative_eq!(exp_integral_e1(1.0), 0.219_383_934_395_520_27, max_relative = 1e-13);
        assert_relative_eq!(exp_integral_e1(5.0), 0.001_148_295_591_275_325_7, max_relative = 1e-12);
    }

    #[test]
    fn kappa_matches_numerical_integral() {
        // −∫_0^∞ (cos s − 1) s^{−1−α} ds equals κ_α (real part of the unit exponent)
        let alpha = 1.5;
        let f = |s: f64| if s < 1e-4 { -s * s / 2.0 } else { s.cos() - 1.0 } * s.powf(-1.0 - alpha);
        let mut total = 0.0;
        let mut a = 0.0;
        for k in 1..=4000 {
            let b = k as f64 * 2.0 * PI;
            total += integrate(f, a, b, 1e-13, 1e-10).unwrap().value;
            a = b;
        }
        // analytic tail beyond a: ∫(cos s − 1)s^{−1−α} ≈ −a^{−α}/α
        total -= a.powf(-alpha) / alpha;
        assert_relative_eq!(-total, stable_kappa(alpha), max_relative = 1e-6);
        assert_relative_eq!(stable_kappa(1.5), 1.671_085_516_420_774, max_relative = 1e-9);
    }

    #[test]
    fn exponential_exponent_against_quadrature() {
        let law = RadialLaw::Exponential { c: 0.7, beta: 2.0 };
        for theta in [0.3, -1.7, 5.0] {
            let f = |s: f64| {
                let comp = if s <= 1.0 { theta * s } else { 0.0 };
                (Complex64::new(0.0, theta * s).exp() - 1.0 - Complex64::new(0.0, comp)) * (0.7 * (-2.0 * s).exp() / s)
            };
            let num = integrate(f, 0.0, 1.0, 1e-13, 0.0).unwrap().value + integrate(f, 1.0, 40.0, 1e-13, 0.0).unwrap().value;
            let closed = law.exponent_integral(theta).unwrap();
            assert!((num - closed).norm() < 1e-10, "{num} vs {closed}");
        }
    }

    #[test]
    fn power_tail_exponent_small_theta_series() {
        // for |θ| ≪ 1 the integral is ≈ −θ²/2·∫s²ρ(ds) = −θ²c/(2(2−α))
        let law = RadialLaw::power_tail(1.5, 1.0);
        let theta = 1e-3;
        let v = law.exponent_integral(theta).unwrap();
        assert_relative_eq!(v.re, -theta * theta / (2.0 * 0.5), max_relative = 1e-5);
    }

    #[test]
    fn masses_and_sampling() {
        let law = RadialLaw::power_tail(1.5, 2.0);
        assert_relative_eq!(law.mass_above(0.5), 2.0 * (0.5f64.powf(-1.5) - 1.0) / 1.5, epsilon = 1e-14);
        let mut rng = stream(1, Domain::Test, 0);
        let n = 20000;
        let mut above = 0;
        for _ in 0..n {
            let s = law.sample_above(0.1, &mut rng);
            assert!(s > 0.1 && s <= 1.0);
            if s > 0.5 {
                above += 1;
            }
        }
        let p = law.mass_above(0.5) / law.mass_above(0.1);
        assert!((above as f64 / n as f64 - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt());

        let exp_law = RadialLaw::Exponential { c: 1.0, beta: 3.0 };
        let mut above = 0;
        for _ in 0..n {
            if exp_law.sample_above(0.01, &mut rng) > 0.2 {
                above += 1;
            }
        }
        let p = exp_law.mass_above(0.2) / exp_law.mass_above(0.01);
        assert!((above as f64 / n as f64 - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt());
    }
}
