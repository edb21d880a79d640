//! Infinitely divisible laws: characteristic triplets, strictly stable
//! laws, and samplers for cell increments and Poisson jump configurations.

mod jumps;
mod measure;
mod stable;
mod triplet;

pub use jumps::{sample_poisson_jumps, JumpConfiguration};
pub use measure::{exp_integral_e1, stable_kappa, LevyMeasureSpec, PolarComponent, RadialLaw};
pub use stable::{standard_stable, StableSpec};
pub use triplet::{LevyTriplet, DEFAULT_FV_TRUNCATION};

pub(crate) use stable::psd_factor;
