use rand::Rng;

use crate::error::{Error, Result};

/// Axis-aligned box `[min, max]`, used as the simulation window of a Levy basis.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxRegion {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl BoxRegion {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        if min.len() != max.len() || min.is_empty() {
            return Err(Error::InvalidParameter("box corners must share a positive dimension".into()));
        }
        if min.iter().zip(&max).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::InvalidParameter(format!("degenerate box {min:?}..{max:?}")));
        }
        Ok(Self { min, max })
    }

    /// Cube of half-width `half` centred at `center`.
    pub fn centered(center: &[f64], half: f64) -> Result<Self> {
        Self::new(
            center.iter().map(|c| c - half).collect(),
            center.iter().map(|c| c + half).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn volume(&self) -> f64 {
        self.min.iter().zip(&self.max).map(|(a, b)| b - a).product()
    }

    pub fn contains(&self, q: &[f64]) -> bool {
        q.iter()
            .zip(self.min.iter().zip(&self.max))
            .all(|(x, (a, b))| *x >= *a && *x <= *b)
    }

    /// Whether the closed box `other` lies inside this one.
    pub fn contains_box(&self, other: &BoxRegion) -> bool {
        self.contains(&other.min) && self.contains(&other.max)
    }

    /// Uniform point, written into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            let u: f64 = rng.random();
            *o = self.min[k] + u * (self.max[k] - self.min[k]);
        }
    }

    /// Split along axis `axis` at the midpoint.
    pub fn split(&self, axis: usize) -> (BoxRegion, BoxRegion) {
        let mid = 0.5 * (self.min[axis] + self.max[axis]);
        let mut left = self.clone();
        let mut right = self.clone();
        left.max[axis] = mid;
        right.min[axis] = mid;
        (left, right)
    }
}
