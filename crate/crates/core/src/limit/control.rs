use crate::error::{Error, Result};
use crate::geometry::{AffineSphere, AmbitSet};

/// Which of the two boundary control measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// One cell `(s_k ± Δs/2) × patch_j` of a control measure.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlCell {
    /// Midpoint of the time slice.
    pub s: f64,
    pub slice: usize,
    pub patch: usize,
    /// Boundary point of `A` relative to `p0`.
    pub x: Vec<f64>,
    /// `±n_A(x)`.
    pub normal: Vec<f64>,
    pub mass: f64,
}

/// `μ±` with density `h_M(±n_A(x))⁺` against `ds × H^{d−1}(dx)`, discretized
/// into `N_s` uniform time slices of `(0, t_max]` times the boundary patches of
/// a surface rule on `∂A`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryControlMeasure {
    sign: Sign,
    t_max: f64,
    slices: usize,
    patches: usize,
    cells: Vec<ControlCell>,
}

impl BoundaryControlMeasure {
    /// `boundary_nodes` is the resolution passed to [`AmbitSet::boundary_quadrature`].
    pub fn new(
        shape: &AmbitSet,
        sphere: &AffineSphere,
        sign: Sign,
        t_max: f64,
        slices: usize,
        boundary_nodes: usize,
    ) -> Result<Self> {
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(Error::InvalidParameter(format!("time horizon must be positive, got {t_max}")));
        }
        if slices == 0 || boundary_nodes == 0 {
            return Err(Error::InvalidParameter("partition needs at least one slice and one patch".into()));
        }
        if shape.dim() != sphere.dim() {
            return Err(Error::InvalidParameter("A and M must have the same dimension".into()));
        }
        let quad = shape.boundary_quadrature(boundary_nodes);
        let patches = quad.len();
        let ds = t_max / slices as f64;
        let mut cells = Vec::with_capacity(slices * patches);
        let patch_data: Vec<(Vec<f64>, f64)> = (0..patches)
            .map(|j| {
                let n: Vec<f64> = quad.normal(j).iter().map(|v| sign.factor() * v).collect();
                let density = sphere.support_function(&n).max(0.0);
                (n, density * quad.weight(j))
            })
            .collect();
        for k in 0..slices {
            let s = (k as f64 + 0.5) * ds;
            for (j, (n, w)) in patch_data.iter().enumerate() {
                cells.push(ControlCell {
                    s,
                    slice: k,
                    patch: j,
                    x: quad.point(j).to_vec(),
                    normal: n.clone(),
                    mass: w * ds,
                });
            }
        }
        Ok(Self {
            sign,
            t_max,
            slices,
            patches,
            cells,
        })
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn slices(&self) -> usize {
        self.slices
    }

    pub fn patches(&self) -> usize {
        self.patches
    }

    pub fn cells(&self) -> &[ControlCell] {
        &self.cells
    }

    pub fn total_mass(&self) -> f64 {
        self.cells.iter().map(|c| c.mass).sum()
    }
}

/// `t·∫_{∂A} h_M(±n_A(x))⁺ dH^{d−1}(dx)` on a surface rule with the given
/// resolution.
pub fn control_mass(shape: &AmbitSet, sphere: &AffineSphere, sign: Sign, t: f64, boundary_nodes: usize) -> f64 {
    let quad = shape.boundary_quadrature(boundary_nodes);
    let integral: f64 = (0..quad.len())
        .map(|j| {
            let n: Vec<f64> = quad.normal(j).iter().map(|v| sign.factor() * v).collect();
            quad.weight(j) * sphere.support_function(&n).max(0.0)
        })
        .sum();
    t * integral
}
