use crate::error::{Error, Result};

/// Nodes, weights and outward unit normals realizing `∫ … dH^{d-1}` over a
/// closed hypersurface (or a patch of one).
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceQuadrature {
    dim: usize,
    points: Vec<f64>,
    normals: Vec<f64>,
    weights: Vec<f64>,
}

impl SurfaceQuadrature {
    pub(crate) fn from_parts(dim: usize, points: Vec<f64>, normals: Vec<f64>, weights: Vec<f64>) -> Self {
        debug_assert_eq!(points.len(), dim * weights.len());
        debug_assert_eq!(normals.len(), dim * weights.len());
        Self {
            dim,
            points,
            normals,
            weights,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j * self.dim..(j + 1) * self.dim]
    }

    pub fn normal(&self, j: usize) -> &[f64] {
        &self.normals[j * self.dim..(j + 1) * self.dim]
    }

    pub fn weight(&self, j: usize) -> f64 {
        self.weights[j]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Largest node norm, `max_j ‖y_j‖`.
    pub fn max_norm(&self) -> f64 {
        (0..self.len())
            .map(|j| self.point(j).iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Quadrature of a scalar integrand `f(point, normal)`.
    pub fn integrate_scalar<F: FnMut(&[f64], &[f64]) -> f64>(&self, mut f: F) -> Result<f64> {
        let mut acc = 0.0;
        for j in 0..self.len() {
            let v = f(self.point(j), self.normal(j));
            if !v.is_finite() {
                return Err(Error::NonFiniteIntegrand { index: j });
            }
            acc += self.weights[j] * v;
        }
        Ok(acc)
    }

    /// Quadrature of a vector integrand, written component-wise.
    pub fn integrate_vector<F: FnMut(&[f64], &[f64], &mut [f64])>(&self, width: usize, mut f: F) -> Result<Vec<f64>> {
        let mut acc = vec![0.0; width];
        let mut buf = vec![0.0; width];
        for j in 0..self.len() {
            f(self.point(j), self.normal(j), &mut buf);
            for (a, b) in acc.iter_mut().zip(&buf) {
                if !b.is_finite() {
                    return Err(Error::NonFiniteIntegrand { index: j });
                }
                *a += self.weights[j] * b;
            }
        }
        Ok(acc)
    }

    /// The rule for `r·M + p0`: nodes are mapped and weights scaled by `r^{d-1}`.
    pub fn scaled(&self, r: f64, p0: &[f64]) -> SurfaceQuadrature {
        let scale = r.powi(self.dim as i32 - 1);
        let points = self
            .points
            .chunks(self.dim)
            .flat_map(|y| y.iter().zip(p0).map(|(a, b)| r * a + b).collect::<Vec<_>>())
            .collect();
        SurfaceQuadrature {
            dim: self.dim,
            points,
            normals: self.normals.clone(),
            weights: self.weights.iter().map(|w| w * scale).collect(),
        }
    }
}
