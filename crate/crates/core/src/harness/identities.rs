//! Deterministic identity checks.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use super::{replicate, report, ExperimentConfig, ExperimentOutput, Rows, Table, Verdict};
use crate::error::Result;
use crate::field::Kernel;
use crate::flux::{energy_flux_deterministic, SurfaceWeight, TestFunction};
use crate::geometry::{AffineSphere, AmbitSet, Resolution};
use crate::levy::{LevyMeasureSpec, LevyTriplet, PolarComponent, RadialLaw, StableSpec};
use crate::limit::{profile_exponent, BoundaryControlMeasure, LimitFieldSpec, Sign, AC_TOLERANCE, CAP_ORDER};
use crate::rng::{stream, Domain};

/// Largest relative gap between cap quadrature and the semi-closed form.
pub const SECTION_TOLERANCE: f64 = 1e-3;
/// Absolute tolerance of the control-mass identity.
pub const MASS_TOLERANCE: f64 = 1e-8;
/// Relative tolerance of the finite-radius divergence identity.
pub const DIVERGENCE_TOLERANCE: f64 = 1e-6;
/// Relative tolerance of the first-order erosion slope at [`EROSION_RADIUS`].
pub const EROSION_TOLERANCE: f64 = 0.01;
pub const EROSION_RADIUS: f64 = 0.01;
/// Relative tolerance of `rψ(r^{−1/α}w)` against its limit at [`ATTRACTION_RADIUS`].
pub const ATTRACTION_TOLERANCE: f64 = 0.01;
pub const ATTRACTION_RADIUS: f64 = 1e-4;

const SECTION_CASES: usize = 100;

fn spheres() -> [AffineSphere; 2] {
    [AffineSphere::unit(2), AffineSphere::diagonal(&[2.0, 1.0]).expect("positive diagonal")]
}

fn disk_spec(sphere: AffineSphere) -> Result<LimitFieldSpec> {
    LimitFieldSpec::new(
        StableSpec::gaussian(DMatrix::identity(2, 2))?,
        AmbitSet::unit_ball(2),
        sphere,
        Kernel::identity(2),
        vec![0.0, 0.0],
    )
}

/// Names of the identity checks, in run order.
pub const IDENTITY_CHECKS: [&str; 6] =
    ["ac_identity", "section_vs_cap", "mass_identity", "divergence", "erosion_slope", "domain_of_attraction"];

pub fn run_identity_suite(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let mut rows = Rows::new(cfg);
    let mut tables = Vec::new();
    let mut verdicts = Vec::new();
    for name in IDENTITY_CHECKS {
        if !cfg.identity_checks.is_empty() && !cfg.identity_checks.iter().any(|c| c == name) {
            continue;
        }
        let v = match name {
            "ac_identity" => ac_identity(cfg, &mut rows),
            "section_vs_cap" => section_vs_cap(cfg, &mut rows),
            "mass_identity" => mass_identity(&mut rows),
            "divergence" => divergence(cfg, &mut rows),
            "erosion_slope" => erosion_slope(&mut rows, &mut tables),
            _ => attraction(&mut rows, &mut tables),
        };
        verdicts.push(v.unwrap_or_else(|e| Verdict::errored(name, &e)));
    }
    Ok(ExperimentOutput {
        report: report(cfg, verdicts, tables),
        rows: rows.rows,
        plots: Vec::new(),
    })
}

/// `∫_s^t g dr = G` over random `(s, x, n, t)`, alternating `T = I` and
/// `T = diag(2, 1)`.
fn ac_identity(cfg: &ExperimentConfig, rows: &mut Rows) -> Result<Verdict> {
    let specs = [disk_spec(spheres()[0].clone())?, disk_spec(spheres()[1].clone())?];
    let exponent = cfg.tamper_exponent.unwrap_or(profile_exponent(2));
    let mut rng = stream(cfg.seed, Domain::Calibration, 0);
    let cases: Vec<(usize, [f64; 2], [f64; 2], f64, f64, usize, usize)> = (0..cfg.identity_cases)
        .map(|k| {
            let th: f64 = rng.random::<f64>() * 2.0 * PI;
            let x = [th.cos(), th.sin()];
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let t = 0.1 + 2.0 * rng.random::<f64>();
            let s = t * rng.random::<f64>();
            (k % 2, x, [sign * x[0], sign * x[1]], s, t, rng.random_range(0..2), rng.random_range(0..2))
        })
        .collect();
    let residuals = replicate(cases.len(), |k| {
        let (which, x, n, s, t, i, j) = cases[k as usize];
        specs[which].ac_residual(s, &x, &n, t, i, j, exponent)
    })?;
    for ((_, _, _, _, t, _, _), r) in cases.iter().zip(&residuals) {
        rows.push(None, Some(*t), *r, "ac_residual");
    }
    let worst = residuals.iter().copied().fold(0.0, f64::max);
    rows.push(None, None, worst, "ac_residual_max");
    Ok(Verdict::new(
        "ac_identity",
        worst < AC_TOLERANCE,
        format!("max residual {worst:.3e} over {} cases (< {AC_TOLERANCE:e}), profile exponent {exponent}", residuals.len()),
    ))
}

/// Cap quadrature of `G` against the hyperplane-section form.
fn section_vs_cap(cfg: &ExperimentConfig, rows: &mut Rows) -> Result<Verdict> {
    let specs = [disk_spec(spheres()[0].clone())?, disk_spec(spheres()[1].clone())?];
    let mut rng = stream(cfg.seed, Domain::Calibration, 1);
    let cases: Vec<(usize, [f64; 2], f64)> = (0..SECTION_CASES)
        .map(|k| {
            let th: f64 = rng.random::<f64>() * 2.0 * PI;
            (k % 2, [th.cos(), th.sin()], rng.random::<f64>() * 0.98)
        })
        .collect();
    let weights = [SurfaceWeight::Normal, SurfaceWeight::normal_component(0, 1), SurfaceWeight::normal_component(1, 1)];
    let gaps = replicate(cases.len(), |k| {
        let (which, n, rho) = cases[k as usize];
        let spec = &specs[which];
        let mut worst: f64 = 0.0;
        for f in &weights {
            let closed = spec.kernel_g_semiclosed(1.0, f, rho, &n, &n)?.expect("weights are linear in the normal");
            let cap = spec.kernel_g_cap(1.0, f, rho, &n, &n, CAP_ORDER)?;
            let scale = closed.iter().map(|v| v.abs()).fold(0.0, f64::max);
            if scale > 1e-3 {
                for (a, b) in closed.iter().zip(&cap) {
                    worst = worst.max((a - b).abs() / scale);
                }
            }
        }
        Ok(worst)
    })?;
    for g in &gaps {
        rows.push(None, Some(1.0), *g, "section_gap");
    }
    let worst = gaps.iter().copied().fold(0.0, f64::max);
    Ok(Verdict::new(
        "section_vs_cap",
        worst < SECTION_TOLERANCE,
        format!("max relative gap {worst:.3e} over {SECTION_CASES} cases at order {CAP_ORDER} (< {SECTION_TOLERANCE:e})"),
    ))
}

/// `μ±((0, 1] × N(A)) = 2π` for the unit disk and `T = I`.
fn mass_identity(rows: &mut Rows) -> Result<Verdict> {
    let mut worst: f64 = 0.0;
    for sign in [Sign::Plus, Sign::Minus] {
        let mu = BoundaryControlMeasure::new(&AmbitSet::unit_ball(2), &AffineSphere::unit(2), sign, 1.0, 200, 256)?;
        let mass = mu.total_mass();
        rows.push(None, Some(1.0), mass, "control_mass");
        worst = worst.max((mass - 2.0 * PI).abs());
    }
    Ok(Verdict::new(
        "mass_identity",
        worst < MASS_TOLERANCE,
        format!("|mass − 2π| = {worst:.3e} for both signs (< {MASS_TOLERANCE:e})"),
    ))
}

/// For `v(p) = Bp` and affine `φ(x) = Ax + c`, the flux through `rM + p0`
/// equals `tr(AB)·r^d·Leb(D_T)`.
fn divergence(cfg: &ExperimentConfig, rows: &mut Rows) -> Result<Verdict> {
    let mut rng = stream(cfg.seed, Domain::Calibration, 2);
    let mut worst: f64 = 0.0;
    for sphere in spheres() {
        let quad = sphere.quadrature(Resolution::default_for(2));
        for _ in 0..10 {
            let b = DMatrix::from_fn(2, 2, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let a = DMatrix::from_fn(2, 2, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let c = vec![rng.random::<f64>(), rng.random::<f64>()];
            let p0 = [rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5];
            let r = 0.05 + rng.random::<f64>();
            let v = |p: &[f64]| (0..2).map(|i| b[(i, 0)] * p[0] + b[(i, 1)] * p[1]).collect::<Vec<f64>>();
            for (phi, trace) in [(TestFunction::Identity, b.trace()), (TestFunction::Affine { b: a.clone(), c: c.clone() }, (&a * &b).trace())] {
                let flux = energy_flux_deterministic(v, &p0, r, &phi, &quad)?;
                let exact = trace * r * r * sphere.domain_volume();
                let gap = (flux - exact).abs() / exact.abs().max(1e-12);
                rows.push(Some(r), Some(1.0), gap, "divergence_gap");
                worst = worst.max(gap);
            }
        }
    }
    Ok(Verdict::new(
        "divergence",
        worst < DIVERGENCE_TOLERANCE,
        format!("max relative gap {worst:.3e} over 40 linear fields (< {DIVERGENCE_TOLERANCE:e})"),
    ))
}

/// `Leb(A \ A⊖rM)/r` against `∫_{∂A} h_M(−n_A)⁺ dH^{d−1}`.
fn erosion_slope(rows: &mut Rows, tables: &mut Vec<Table>) -> Result<Verdict> {
    let mut table = Table::new("erosion", &["case", "volume", "slope_estimate", "predicted_slope", "relative_error"]);
    let cases: [(AmbitSet, AffineSphere); 3] = [
        (AmbitSet::unit_ball(2), AffineSphere::unit(2)),
        (AmbitSet::unit_ball(2), spheres()[1].clone()),
        (AmbitSet::cuboid(vec![-1.0, -0.5], vec![1.0, 0.5])?, AffineSphere::unit(2)),
    ];
    let mut worst: f64 = 0.0;
    for (k, (a, m)) in cases.iter().enumerate() {
        let e = a.erosion_volume_asymptote(m, EROSION_RADIUS)?;
        let rel = (e.slope_estimate - e.predicted_slope).abs() / e.predicted_slope;
        table.push(vec![k as f64, e.volume, e.slope_estimate, e.predicted_slope, rel]);
        rows.push(Some(EROSION_RADIUS), None, e.slope_estimate, "erosion_slope");
        worst = worst.max(rel);
    }
    let disk = table.rows[0][2];
    tables.push(table);
    Ok(Verdict::new(
        "erosion_slope",
        worst < EROSION_TOLERANCE,
        format!("max relative error {worst:.3e} at r = {EROSION_RADIUS} (< {EROSION_TOLERANCE}); unit disk slope {disk:.5} vs 2π"),
    ))
}

/// `rψ(r^{−1/α}w) → ψ_α(w)` for a power-tail triplet, and `rψ(w/r) → iγ₀w`
/// for a finite-variation one.
fn attraction(rows: &mut Rows, tables: &mut Vec<Table>) -> Result<Verdict> {
    let alpha = 1.5;
    let nu = LevyMeasureSpec::new(
        1,
        vec![PolarComponent {
            direction: vec![1.0],
            weight: 1.0,
            radial: RadialLaw::power_tail(alpha, 1.0),
        }],
    )?;
    let stable = LevyTriplet::new(LevyTriplet::matched_stable_drift(&nu, alpha), DMatrix::zeros(1, 1), nu)?;
    let limit = stable.stable_limit(alpha)?;
    let fv = LevyTriplet::from_gamma0(vec![-1.0], LevyMeasureSpec::point_masses(&[(vec![1.0], 2.0), (vec![-0.5], 1.0)])?)?;
    let gamma0 = fv.gamma0()?[0];
    let mut table = Table::new("attraction", &["alpha", "w", "relative_error"]);
    let mut worst: f64 = 0.0;
    for w in [0.5, 1.0, 2.0] {
        let target = limit.exponent(&[w]);
        let got = stable.rescaled_exponent(alpha, &[w], ATTRACTION_RADIUS)?;
        let rel = (got - target).norm() / target.norm();
        table.push(vec![alpha, w, rel]);
        rows.push(Some(ATTRACTION_RADIUS), None, rel, "attraction_error");
        worst = worst.max(rel);
        let target = Complex64::new(0.0, gamma0 * w);
        let got = fv.rescaled_exponent(1.0, &[w], ATTRACTION_RADIUS)?;
        let rel = (got - target).norm() / target.norm();
        table.push(vec![1.0, w, rel]);
        rows.push(Some(ATTRACTION_RADIUS), None, rel, "fv_attraction_error");
        worst = worst.max(rel);
    }
    tables.push(table);
    Ok(Verdict::new(
        "domain_of_attraction",
        worst < ATTRACTION_TOLERANCE,
        format!("max relative error {worst:.3e} at r = {ATTRACTION_RADIUS:e} for w in {{0.5, 1, 2}}, stable and finite-variation (< {ATTRACTION_TOLERANCE})"),
    ))
}
