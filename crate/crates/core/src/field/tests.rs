use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::*;
use crate::geometry::{AffineSphere, Resolution};
use crate::levy::{LevyMeasureSpec, LevyTriplet, PolarComponent, RadialLaw, StableSpec};
use crate::rng::{Domain, StreamKey};

fn key(seed: u64, i: u64) -> StreamKey {
    StreamKey::new(seed, Domain::Test, i)
}

fn disk() -> AmbitSet {
    AmbitSet::unit_ball(2)
}

fn spec(kernel: Kernel, basis: Basis) -> Arc<FieldSpec> {
    Arc::new(FieldSpec::new(disk(), kernel, basis).unwrap())
}

fn compound_poisson() -> LevyTriplet {
    let nu = LevyMeasureSpec::point_masses(&[(vec![1.0, 0.0], 1.0), (vec![-0.5, 0.5], 0.7)]).unwrap();
    LevyTriplet::from_gamma0(vec![0.2, -0.1], nu).unwrap()
}

/// Two-sample Kolmogorov-Smirnov distance, by merging sorted samples.
fn ks(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut dmax) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        dmax = dmax.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    dmax
}

#[test]
fn drift_only_field_is_constant() {
    let c = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, -1.0]);
    let s = spec(Kernel::new(Profile::Constant, c).unwrap(), Basis::Triplet(LevyTriplet::drift_only(vec![0.3, 0.4]).unwrap()));
    let real = s.realize(s.bounding_region(&[0.0, 0.0], 2.0), key(1, 0)).unwrap();
    assert!(real.jumps().is_empty());
    // Cγ₀·Leb(A) = (1.1, −0.4)·π
    for p in [[0.0, 0.0], [0.7, -1.2], [1.5, 1.5]] {
        let x = real.evaluate(&p).unwrap();
        assert!((x[0] - 1.1 * PI).abs() < 1e-12 && (x[1] + 0.4 * PI).abs() < 1e-12);
    }
    let quad = AffineSphere::unit(2).quadrature(Resolution::Circle(16));
    let inc = real.evaluate_increments(&[0.0, 0.0], 0.3, &[0.5, 1.0], &quad).unwrap();
    assert!(inc.iter().flatten().flatten().all(|v| *v == 0.0));
}

#[test]
fn single_jump_follows_the_indicator() {
    let s = spec(Kernel::identity(2), Basis::Triplet(LevyTriplet::drift_only(vec![0.0, 0.0]).unwrap()));
    let region = s.bounding_region(&[0.0, 0.0], 2.0);
    let jumps = JumpConfiguration::from_jumps(region, &[(vec![0.5, 0.5], vec![2.0, -3.0])], 0.0).unwrap();
    let real = s.realize_with_jumps(jumps, key(1, 0)).unwrap();
    assert_eq!(real.evaluate(&[0.0, 0.0]).unwrap(), vec![2.0, -3.0]);
    assert_eq!(real.evaluate(&[1.0, 1.0]).unwrap(), vec![2.0, -3.0]);
    assert_eq!(real.evaluate(&[-0.5, -0.5]).unwrap(), vec![0.0, 0.0]);
}

#[test]
fn crossing_radius_of_a_single_jump() {
    // jump at (0.9, 0), distance 0.1 from the unit circle; the node (−1, 0)
    // crosses at r = 0.1 and the nodes (0, ±1) at r = √0.19
    let s = spec(Kernel::identity(2), Basis::Triplet(LevyTriplet::drift_only(vec![0.0, 0.0]).unwrap()));
    let region = s.bounding_region(&[0.0, 0.0], 2.0);
    let jumps = JumpConfiguration::from_jumps(region, &[(vec![0.9, 0.0], vec![1.0, 2.0])], 0.0).unwrap();
    let real = s.realize_with_jumps(jumps, key(1, 0)).unwrap();
    let quad = SurfaceQuadrature::from_parts(
        2,
        vec![-1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, -1.0],
        vec![-1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, -1.0],
        vec![1.0; 4],
    );
    let at = |r: f64| real.evaluate_increments(&[0.0, 0.0], r, &[1.0], &quad).unwrap().remove(0);
    assert!(at(0.1 - 1e-12).iter().flatten().all(|v| *v == 0.0));
    let after = at(0.1 + 1e-12);
    assert_eq!(after[0], vec![-1.0, -2.0]);
    assert!(after[1..].iter().flatten().all(|v| *v == 0.0));
    let side = 0.19f64.sqrt();
    let before = at(side - 1e-9);
    assert!(before[2..].iter().flatten().all(|v| *v == 0.0));
    let past = at(side + 1e-9);
    assert_eq!(past[2], vec![-1.0, -2.0]);
    assert_eq!(past[3], vec![-1.0, -2.0]);
    assert!(at(0.0).iter().flatten().all(|v| *v == 0.0));
}

#[test]
fn compound_poisson_jump_count_is_poisson() {
    let nu = LevyMeasureSpec::point_masses(&[(vec![1.0, 0.0], 1.0)]).unwrap();
    let s = spec(Kernel::identity(2), Basis::Triplet(LevyTriplet::from_gamma0(vec![0.0, 0.0], nu).unwrap()));
    let region = s.bounding_region(&[0.0, 0.0], 0.5);
    let v = region.volume();
    let n = 2000;
    let mean = (0..n).map(|i| s.realize(region.clone(), key(3, i)).unwrap().jumps().len() as f64).sum::<f64>() / n as f64;
    assert!((mean - v).abs() < 3.0 * (v / n as f64).sqrt(), "{mean} vs {v}");
}

#[test]
fn realizations_are_deterministic() {
    let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]);
    let t = compound_poisson();
    let full = LevyTriplet::new(t.gamma().to_vec(), sigma, t.nu().clone()).unwrap();
    let s = spec(Kernel::identity(2), Basis::Triplet(full));
    let region = s.bounding_region(&[0.0, 0.0], 1.0);
    let quad = AffineSphere::unit(2).quadrature(Resolution::Circle(32));
    let plan = s.increment_plan(&[0.0, 0.0], 0.1, &[0.5, 1.0], &quad).unwrap();
    let a = s.realize(region.clone(), key(9, 4)).unwrap().evaluate_plan(&plan).unwrap();
    let b = s.realize(region.clone(), key(9, 4)).unwrap().evaluate_plan(&plan).unwrap();
    assert_eq!(a, b);
    let c = s.realize(region, key(9, 5)).unwrap().evaluate_plan(&plan).unwrap();
    assert_ne!(a, c);
}

#[test]
fn gaussian_variance_is_the_ambit_volume() {
    let s = spec(Kernel::identity(2), Basis::Triplet(LevyTriplet::gaussian(DMatrix::identity(2, 2)).unwrap()));
    let region = s.bounding_region(&[0.0, 0.0], 0.0);
    let plan = s.plan(vec![0.0, 0.0]).unwrap();
    let n = 10_000;
    let (mut s0, mut s1) = (0.0, 0.0);
    for i in 0..n {
        let x = s.realize(region.clone(), key(5, i)).unwrap().evaluate_plan(&plan).unwrap();
        s0 += x.base()[0].powi(2);
        s1 += x.base()[1].powi(2);
    }
    for v in [s0 / n as f64, s1 / n as f64] {
        assert!((v - PI).abs() < 0.05 * PI, "{v}");
    }
}

#[test]
fn stationarity_for_translation_invariant_kernel() {
    let kernel = Kernel::new(Profile::GaussianBump, DMatrix::identity(2, 2)).unwrap();
    let sigma = DMatrix::identity(2, 2) * 0.5;
    let t = compound_poisson();
    let basis = Basis::Triplet(LevyTriplet::new(t.gamma().to_vec(), sigma, t.nu().clone()).unwrap());
    let s = spec(kernel, basis);
    let n = 10_000;
    let draws = |p: [f64; 2], seed: u64| -> Vec<f64> {
        let region = s.bounding_region(&p, 0.0);
        let plan = s.plan(p.to_vec()).unwrap();
        (0..n).map(|i| s.realize(region.clone(), key(seed, i)).unwrap().evaluate_plan(&plan).unwrap().base()[0]).collect()
    };
    let a = draws([0.0, 0.0], 11);
    let b = draws([5.0, 3.0], 12);
    let crit = 1.628 * (2.0 / n as f64).sqrt();
    assert!(ks(a, b) < crit);
}

fn ecf_check(s: &Arc<FieldSpec>, exponent: impl Fn(&[f64]) -> Complex64, n: u64, seed: u64) {
    let region = s.bounding_region(&[0.0, 0.0], 0.0);
    let plan = s.plan(vec![0.0, 0.0]).unwrap();
    let xs: Vec<Vec<f64>> =
        (0..n).map(|i| s.realize(region.clone(), key(seed, i)).unwrap().evaluate_plan(&plan).unwrap().base().to_vec()).collect();
    let c = s.kernel().matrix().clone();
    for z in [[0.3, 0.0], [0.0, -0.5], [0.4, 0.4], [-0.8, 0.2], [1.0, 1.0]] {
        let emp: Complex64 = xs.iter().map(|x| Complex64::new(0.0, z[0] * x[0] + z[1] * x[1]).exp()).sum::<Complex64>() / n as f64;
        // exp(Leb(A)·ψ(C′z))
        let ctz = [c[(0, 0)] * z[0] + c[(1, 0)] * z[1], c[(0, 1)] * z[0] + c[(1, 1)] * z[1]];
        let exact = (exponent(&ctz) * PI).exp();
        assert!((emp - exact).norm() < 3.0 / (n as f64).sqrt(), "z = {z:?}: {emp} vs {exact}");
    }
}

#[test]
fn characteristic_function_of_compound_poisson_gaussian_field() {
    let t = compound_poisson();
    let sigma = DMatrix::from_row_slice(2, 2, &[0.2, 0.05, 0.05, 0.1]);
    let full = LevyTriplet::new(t.gamma().to_vec(), sigma, t.nu().clone()).unwrap();
    let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.3, 0.8]);
    let s = spec(Kernel::new(Profile::Constant, c).unwrap(), Basis::Triplet(full.clone()));
    ecf_check(&s, |z| full.char_exponent(z).unwrap(), 10_000, 21);
}

#[test]
fn characteristic_function_of_stable_field() {
    let stable = StableSpec::new(1.5, vec![(vec![1.0, 0.0], 0.3), (vec![0.0, -1.0], 0.2)], DMatrix::zeros(2, 2)).unwrap();
    let s = spec(Kernel::identity(2), Basis::Stable(stable.clone()));
    assert!(s.truncation() > 0.0);
    ecf_check(&s, |z| stable.exponent(z), 4000, 22);
}

#[test]
fn characteristic_function_of_infinite_variation_triplet() {
    let nu = LevyMeasureSpec::new(
        2,
        vec![PolarComponent {
            direction: vec![0.6, 0.8],
            weight: 0.4,
            radial: RadialLaw::power_tail(1.5, 1.0),
        }],
    )
    .unwrap();
    let t = LevyTriplet::new(vec![0.1, 0.0], DMatrix::zeros(2, 2), nu).unwrap();
    let s = spec(Kernel::identity(2), Basis::Triplet(t.clone()));
    ecf_check(&s, |z| t.char_exponent(z).unwrap(), 4000, 23);
}

#[test]
fn moments_are_stable_under_doubling() {
    let bases = [
        Basis::Triplet(LevyTriplet::gaussian(DMatrix::identity(2, 2)).unwrap()),
        Basis::Triplet(compound_poisson()),
    ];
    for basis in bases {
        let s = spec(Kernel::identity(2), basis);
        let region = s.bounding_region(&[0.0, 0.0], 0.0);
        let plan = s.plan(vec![0.0, 0.0]).unwrap();
        let norms: Vec<f64> = (0..8000)
            .map(|i| {
                let x = s.realize(region.clone(), key(31, i)).unwrap().evaluate_plan(&plan).unwrap();
                x.base().iter().map(|v| v * v).sum::<f64>().sqrt()
            })
            .collect();
        for beta in [1.0, 2.0, 3.0] {
            let m = |k: usize| norms[..k].iter().map(|v| v.powf(beta)).sum::<f64>() / k as f64;
            let (half, all) = (m(4000), m(8000));
            assert!(all.is_finite() && (half - all).abs() < 0.1 * all, "beta {beta}: {half} vs {all}");
        }
    }
}

#[test]
fn increments_agree_with_separate_evaluations() {
    let kernel = Kernel::new(Profile::BoundaryVanishing, DMatrix::identity(2, 2)).unwrap();
    let s = spec(kernel, Basis::Triplet(compound_poisson()));
    let region = s.bounding_region(&[0.1, 0.2], 1.0);
    let real = s.realize(region, key(41, 0)).unwrap();
    let quad = AffineSphere::unit(2).quadrature(Resolution::Circle(8));
    let inc = real.evaluate_increments(&[0.1, 0.2], 0.5, &[1.0], &quad).unwrap();
    let x0 = real.evaluate(&[0.1, 0.2]).unwrap();
    for (j, row) in inc[0].iter().enumerate() {
        let y = quad.point(j);
        let x = real.evaluate(&[0.1 + 0.5 * y[0], 0.2 + 0.5 * y[1]]).unwrap();
        for c in 0..2 {
            assert!((x[c] - x0[c] - row[c]).abs() < 1e-12);
        }
    }
}

#[test]
fn evaluation_outside_the_region_names_the_offset() {
    let s = spec(Kernel::identity(2), Basis::Triplet(compound_poisson()));
    let real = s.realize(s.bounding_region(&[0.0, 0.0], 0.1), key(1, 0)).unwrap();
    match real.evaluate(&[0.5, 0.0]) {
        Err(Error::OutsideBoundingRegion { offset }) => assert_eq!(offset, vec![0.5, 0.0]),
        other => panic!("expected a region error, got {other:?}"),
    }
}

#[test]
fn dx_vanishes_for_translation_invariant_drift() {
    let kernel = Kernel::new(Profile::GaussianBump, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.5, -1.0])).unwrap();
    let s = spec(kernel, Basis::Triplet(LevyTriplet::drift_only(vec![0.3, -0.7]).unwrap()));
    let real = s.realize(s.bounding_region(&[0.2, 0.1], 0.0), key(1, 0)).unwrap();
    let dx = real.gradient_dx(&[0.2, 0.1], DxConvention::Consistent).unwrap();
    assert!(dx.iter().all(|v| *v == 0.0));
}

fn fd_gradient(real: &FieldRealization, p0: &[f64]) -> DMatrix<f64> {
    let h = 1e-5;
    let mut g = DMatrix::zeros(2, 2);
    for k in 0..2 {
        let mut pp = p0.to_vec();
        let mut pm = p0.to_vec();
        pp[k] += h;
        pm[k] -= h;
        let xp = real.evaluate(&pp).unwrap();
        let xm = real.evaluate(&pm).unwrap();
        for i in 0..2 {
            g[(i, k)] = (xp[i] - xm[i]) / (2.0 * h);
        }
    }
    g
}

#[test]
fn dx_matches_finite_differences_for_modulated_kernel() {
    let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, -0.2, 0.9]);
    let kernel = Kernel::new(Profile::Modulated { b: vec![0.7, -0.4] }, c).unwrap();
    // off-centre ball: on a centred one the ∂_q integral is odd and vanishes
    let shape = AmbitSet::ball(vec![0.4, 0.2], 1.0).unwrap();
    let basis = Basis::Triplet(LevyTriplet::drift_only(vec![0.5, 1.5]).unwrap());
    let s = Arc::new(FieldSpec::new(shape, kernel, basis).unwrap());
    let p0 = [0.3, -0.2];
    let real = s.realize(s.bounding_region(&p0, 0.01), key(1, 0)).unwrap();
    let dx = real.gradient_dx(&p0, DxConvention::Consistent).unwrap();
    let fd = fd_gradient(&real, &p0);
    let scale = fd.amax();
    assert!(scale > 0.1);
    for (a, b) in dx.iter().zip(fd.iter()) {
        assert!((a - b).abs() < 1e-4 * scale, "{dx} vs {fd}");
    }
    let printed = real.gradient_dx(&p0, DxConvention::PrintedIndex).unwrap();
    assert!((printed - &dx).amax() > 1e-3, "conventions should differ for a non-diagonal C");
}

#[test]
fn dx_with_jumps_matches_finite_differences() {
    let kernel = Kernel::new(Profile::Modulated { b: vec![0.3, 0.2] }, DMatrix::identity(2, 2)).unwrap();
    let s = spec(kernel.clone(), Basis::Triplet(compound_poisson()));
    let p0 = [0.0, 0.0];
    let region = s.bounding_region(&p0, 0.01);
    // jumps well inside or outside A + p0 so the indicators are locally constant
    let jumps = JumpConfiguration::from_jumps(
        region,
        &[(vec![0.2, 0.3], vec![1.0, 0.0]), (vec![-0.5, 0.1], vec![-0.5, 0.5]), (vec![0.95, 0.95], vec![1.0, 0.0])],
        0.0,
    )
    .unwrap();
    let real = s.realize_with_jumps(jumps, key(1, 0)).unwrap();
    let dx = real.gradient_dx(&p0, DxConvention::Consistent).unwrap();
    let fd = fd_gradient(&real, &p0);
    let scale = fd.amax();
    for (a, b) in dx.iter().zip(fd.iter()) {
        assert!((a - b).abs() < 1e-4 * scale, "{dx} vs {fd}");
    }
}

#[test]
fn dx_jump_term_is_the_kernel_derivative() {
    let kernel = Kernel::new(Profile::GaussianBump, DMatrix::identity(2, 2)).unwrap();
    let s = spec(kernel.clone(), Basis::Triplet(LevyTriplet::drift_only(vec![0.0, 0.0]).unwrap()));
    let region = s.bounding_region(&[0.0, 0.0], 0.0);
    let q0 = [0.3, -0.4];
    let x0 = [2.0, 1.0];
    let jumps = JumpConfiguration::from_jumps(region, &[(q0.to_vec(), x0.to_vec())], 0.0).unwrap();
    let real = s.realize_with_jumps(jumps, key(1, 0)).unwrap();
    let dx = real.gradient_dx(&[0.0, 0.0], DxConvention::Consistent).unwrap();
    // ∂_k e^{−‖q−p‖²} at p = 0 is 2 q_k e^{−‖q‖²}
    let e = (-0.25f64).exp();
    for i in 0..2 {
        for k in 0..2 {
            assert!((dx[(i, k)] - 2.0 * q0[k] * e * x0[i]).abs() < 1e-15);
        }
    }
}

#[test]
fn dx_refuses_infinite_variation() {
    let s = spec(Kernel::identity(2), Basis::Triplet(LevyTriplet::gaussian(DMatrix::identity(2, 2)).unwrap()));
    let real = s.realize(s.bounding_region(&[0.0, 0.0], 0.0), key(1, 0)).unwrap();
    assert!(matches!(real.gradient_dx(&[0.0, 0.0], DxConvention::Consistent), Err(Error::InfiniteVariation(_))));
}

#[test]
fn kernel_mass_matches_closed_form() {
    // ∫_{unit disk} e^{−|v|²} dv = π(1 − e^{−1})
    let kernel = Kernel::new(Profile::GaussianBump, DMatrix::identity(2, 2)).unwrap();
    let s = spec(kernel, Basis::Triplet(LevyTriplet::drift_only(vec![1.0, 0.0]).unwrap()));
    let exact = PI * (1.0 - (-1.0f64).exp());
    assert!((s.kernel_mass(&[0.4, 0.9]) - exact).abs() < 1e-10);
}
