//! Ambit sets, affine spheres and the surface quadrature built on them.

mod ambit;
mod region;
mod sphere;
mod surface;

pub use ambit::{AmbitSet, ErosionAsymptote, Membership};
pub use region::BoxRegion;
pub use sphere::{section_profile, AffineSphere, Resolution};
pub use surface::SurfaceQuadrature;


/// Surface rule on `M` whose total integral of `f` is stable under node
/// doubling: the resolution is doubled from `start` until two successive
/// values differ by less than `rel_tol` relatively (at most `max_doublings`).
pub fn adaptive_surface_integral<F>(
    m: &AffineSphere,
    start: Resolution,
    rel_tol: f64,
    max_doublings: usize,
    mut f: F,
) -> crate::Result<(f64, Resolution)>
where
    F: FnMut(&[f64], &[f64]) -> f64,
{
    let mut res = start;
    let mut prev = m.quadrature(res).integrate_scalar(&mut f)?;
    for _ in 0..max_doublings {
        let next_res = res.doubled();
        let next = m.quadrature(next_res).integrate_scalar(&mut f)?;
        if (next - prev).abs() <= rel_tol * next.abs().max(f64::MIN_POSITIVE) || next == prev {
            return Ok((next, next_res));
        }
        prev = next;
        res = next_res;
    }
    Err(crate::Error::Quadrature {
        requested: rel_tol,
        achieved: f64::NAN,
    })
}
