use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Scalar profile `s(p, q)` of a kernel `F(p, q) = s(p, q)·C`.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    /// `s ≡ 1`.
    Constant,
    /// `s = exp(−‖q − p‖²)`.
    GaussianBump,
    /// `s = 1 − ‖p − q‖²`, vanishing on the unit sphere around `p`.
    BoundaryVanishing,
    /// `s = (1 + b·p)·exp(−‖q − p‖²)`: not translation invariant, so the
    /// drift part of `DX` does not cancel.
    Modulated { b: Vec<f64> },
}

/// C¹ kernel `F(p, q) = s(p, q)·C` with `C` a `d×m` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    profile: Profile,
    c: DMatrix<f64>,
}

impl Kernel {
    pub fn new(profile: Profile, c: DMatrix<f64>) -> Result<Self> {
        if let Profile::Modulated { b } = &profile {
            if b.len() != c.nrows() {
                return Err(Error::InvalidParameter(format!(
                    "modulation vector has length {}, expected d = {}",
                    b.len(),
                    c.nrows()
                )));
            }
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("kernel matrix must be finite".into()));
        }
        Ok(Self { profile, c })
    }

    /// `F ≡ I_d`.
    pub fn identity(d: usize) -> Self {
        Self {
            profile: Profile::Constant,
            c: DMatrix::identity(d, d),
        }
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// Output dimension `d`.
    pub fn dim(&self) -> usize {
        self.c.nrows()
    }

    /// Mark dimension `m`.
    pub fn mark_dim(&self) -> usize {
        self.c.ncols()
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.profile, Profile::Constant)
    }

    /// `F(p, q) = F₀(q − p)`.
    pub fn is_translation_invariant(&self) -> bool {
        !matches!(self.profile, Profile::Modulated { .. })
    }

    pub fn scalar(&self, p: &[f64], q: &[f64]) -> f64 {
        match &self.profile {
            Profile::Constant => 1.0,
            Profile::GaussianBump => (-dist2(p, q)).exp(),
            Profile::BoundaryVanishing => 1.0 - dist2(p, q),
            Profile::Modulated { b } => (1.0 + dot(b, p)) * (-dist2(p, q)).exp(),
        }
    }

    /// `∂s/∂p_k`.
    pub fn d_p(&self, p: &[f64], q: &[f64], k: usize) -> f64 {
        match &self.profile {
            Profile::Constant => 0.0,
            Profile::GaussianBump => 2.0 * (q[k] - p[k]) * (-dist2(p, q)).exp(),
            Profile::BoundaryVanishing => 2.0 * (q[k] - p[k]),
            Profile::Modulated { b } => {
                let e = (-dist2(p, q)).exp();
                b[k] * e + (1.0 + dot(b, p)) * 2.0 * (q[k] - p[k]) * e
            }
        }
    }

    /// `∂s/∂q_k`, the derivative in coordinate `k + d`.
    pub fn d_q(&self, p: &[f64], q: &[f64], k: usize) -> f64 {
        match &self.profile {
            Profile::Constant => 0.0,
            Profile::GaussianBump => -2.0 * (q[k] - p[k]) * (-dist2(p, q)).exp(),
            Profile::BoundaryVanishing => -2.0 * (q[k] - p[k]),
            Profile::Modulated { b } => -(1.0 + dot(b, p)) * 2.0 * (q[k] - p[k]) * (-dist2(p, q)).exp(),
        }
    }

    /// `F(p, q)·x`, accumulated into `out`.
    pub fn apply_add(&self, p: &[f64], q: &[f64], x: &[f64], out: &mut [f64]) {
        let s = self.scalar(p, q);
        self.matrix_apply_add(s, x, out);
    }

    /// `s·C·x`, accumulated into `out`.
    pub fn matrix_apply_add(&self, s: f64, x: &[f64], out: &mut [f64]) {
        if s == 0.0 {
            return;
        }
        for (i, o) in out.iter_mut().enumerate() {
            let mut v = 0.0;
            for (j, xj) in x.iter().enumerate() {
                v += self.c[(i, j)] * xj;
            }
            *o += s * v;
        }
    }
}

fn dist2(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn catalog() -> Vec<Kernel> {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.3, 2.0]);
        vec![
            Kernel::new(Profile::Constant, c.clone()).unwrap(),
            Kernel::new(Profile::GaussianBump, c.clone()).unwrap(),
            Kernel::new(Profile::BoundaryVanishing, c.clone()).unwrap(),
            Kernel::new(Profile::Modulated { b: vec![0.5, -0.3] }, c).unwrap(),
        ]
    }

    proptest! {
        #[test]
        fn derivatives_match_central_differences(
            p0 in -1.0f64..1.0, p1 in -1.0f64..1.0, q0 in -1.0f64..1.0, q1 in -1.0f64..1.0
        ) {
            let p = [p0, p1];
            let q = [q0, q1];
            let h = 1e-5;
            for ker in catalog() {
                for k in 0..2 {
                    let mut pp = p; pp[k] += h;
                    let mut pm = p; pm[k] -= h;
                    let fd = (ker.scalar(&pp, &q) - ker.scalar(&pm, &q)) / (2.0 * h);
                    let an = ker.d_p(&p, &q, k);
                    prop_assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "{:?} d_p: {} vs {}", ker.profile(), fd, an);
                    let mut qp = q; qp[k] += h;
                    let mut qm = q; qm[k] -= h;
                    let fd = (ker.scalar(&p, &qp) - ker.scalar(&p, &qm)) / (2.0 * h);
                    let an = ker.d_q(&p, &q, k);
                    prop_assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "{:?} d_q: {} vs {}", ker.profile(), fd, an);
                }
            }
        }
    }

    #[test]
    fn translation_invariant_profiles_have_cancelling_derivatives() {
        let p = [0.3, -0.2];
        let q = [0.1, 0.7];
        for ker in catalog().into_iter().filter(|k| k.is_translation_invariant()) {
            for k in 0..2 {
                assert!((ker.d_p(&p, &q, k) + ker.d_q(&p, &q, k)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rejects_bad_modulation() {
        assert!(Kernel::new(Profile::Modulated { b: vec![1.0] }, DMatrix::identity(2, 2)).is_err());
    }
}
