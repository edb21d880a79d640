use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::measure::LevyMeasureSpec;
use crate::error::{Error, Result};
use crate::geometry::BoxRegion;

/// Finite list of Poisson jumps `(q_k, x_k)` in a bounding box, with the
/// truncation level below which jumps were discarded.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpConfiguration {
    region: BoxRegion,
    mark_dim: usize,
    locations: Vec<f64>,
    marks: Vec<f64>,
    truncation: f64,
}

impl JumpConfiguration {
    pub fn empty(region: BoxRegion, mark_dim: usize) -> Self {
        Self {
            region,
            mark_dim,
            locations: Vec::new(),
            marks: Vec::new(),
            truncation: 0.0,
        }
    }

    /// Configuration from explicit jumps; every location must lie in `region`.
    pub fn from_jumps(region: BoxRegion, jumps: &[(Vec<f64>, Vec<f64>)], truncation: f64) -> Result<Self> {
        let mark_dim = jumps.first().map(|(_, x)| x.len()).unwrap_or(0);
        let mut cfg = Self::empty(region, mark_dim);
        cfg.truncation = truncation;
        for (q, x) in jumps {
            if !cfg.region.contains(q) {
                return Err(Error::InvalidParameter(format!("jump location {q:?} lies outside the region")));
            }
            cfg.locations.extend_from_slice(q);
            cfg.marks.extend_from_slice(x);
        }
        Ok(cfg)
    }

    pub fn len(&self) -> usize {
        if self.mark_dim == 0 {
            0
        } else {
            self.marks.len() / self.mark_dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn region(&self) -> &BoxRegion {
        &self.region
    }

    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    pub fn mark_dim(&self) -> usize {
        self.mark_dim
    }

    pub fn location(&self, k: usize) -> &[f64] {
        let d = self.region.dim();
        &self.locations[k * d..(k + 1) * d]
    }

    pub fn mark(&self, k: usize) -> &[f64] {
        &self.marks[k * self.mark_dim..(k + 1) * self.mark_dim]
    }

    /// Number of jumps with location in the sub-box `b`.
    pub fn count_in(&self, b: &BoxRegion) -> usize {
        (0..self.len()).filter(|&k| b.contains(self.location(k))).count()
    }
}

/// Poisson random measure restricted to `region × {‖x‖ > ε}`.
pub fn sample_poisson_jumps<R: Rng + ?Sized>(
    region: &BoxRegion,
    nu: &LevyMeasureSpec,
    eps: f64,
    rng: &mut R,
) -> Result<JumpConfiguration> {
    let masses = nu.component_masses(eps);
    let total: f64 = masses.iter().sum();
    if !total.is_finite() {
        return Err(Error::InfiniteMass { epsilon: eps });
    }
    let m = nu.dim();
    let d = region.dim();
    let mut cfg = JumpConfiguration::empty(region.clone(), m);
    cfg.truncation = eps;
    if total == 0.0 {
        return Ok(cfg);
    }
    let count = Poisson::new(total * region.volume())
        .map_err(|e| Error::InvalidParameter(e.to_string()))?
        .sample(rng) as usize;
    cfg.locations = vec![0.0; count * d];
    cfg.marks = vec![0.0; count * m];
    for k in 0..count {
        region.sample_into(rng, &mut cfg.locations[k * d..(k + 1) * d]);
        nu.sample_mark(eps, &masses, total, rng, &mut cfg.marks[k * m..(k + 1) * m]);
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{PolarComponent, RadialLaw};
    use crate::rng::{stream, Domain};

    #[test]
    fn zero_measure_is_empty() {
        let region = BoxRegion::new(vec![0.0, 0.0], vec![1.0, 3.0]).unwrap();
        let mut rng = stream(1, Domain::Test, 0);
        assert!(sample_poisson_jumps(&region, &LevyMeasureSpec::zero(1), 0.0, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn poisson_mean_and_disjoint_independence() {
        let region = BoxRegion::new(vec![0.0, 0.0], vec![1.0, 3.0]).unwrap();
        let (left, right) = region.split(1);
        let nu = LevyMeasureSpec::point_masses(&[(vec![1.0], 1.0)]).unwrap();
        let n = 20_000;
        let mut total = 0.0;
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        for i in 0..n {
            let mut rng = stream(7, Domain::Test, i as u64);
            let cfg = sample_poisson_jumps(&region, &nu, 0.0, &mut rng).unwrap();
            total += cfg.len() as f64;
            a.push(cfg.count_in(&left) as f64);
            b.push(cfg.count_in(&right) as f64);
            assert!((0..cfg.len()).all(|k| region.contains(cfg.location(k))));
        }
        let mean = total / n as f64;
        assert!((mean - 3.0).abs() < 3.0 * (3.0 / n as f64).sqrt(), "{mean}");
        let ma = a.iter().sum::<f64>() / n as f64;
        let mb = b.iter().sum::<f64>() / n as f64;
        let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n as f64;
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() / n as f64;
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum::<f64>() / n as f64;
        let corr = cov / (va * vb).sqrt();
        assert!(corr.abs() < 3.0 / (n as f64).sqrt(), "{corr}");
    }

    #[test]
    fn infinite_mass_needs_truncation() {
        let region = BoxRegion::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let nu = LevyMeasureSpec::new(
            1,
            vec![PolarComponent {
                direction: vec![1.0],
                weight: 1.0,
                radial: RadialLaw::power_tail(1.5, 1.0),
            }],
        )
        .unwrap();
        let mut rng = stream(1, Domain::Test, 0);
        assert!(matches!(sample_poisson_jumps(&region, &nu, 0.0, &mut rng), Err(Error::InfiniteMass { .. })));
        let cfg = sample_poisson_jumps(&region, &nu, 0.1, &mut rng).unwrap();
        assert!((0..cfg.len()).all(|k| cfg.mark(k)[0] > 0.1));
        assert_eq!(cfg.truncation(), 0.1);
    }
}
