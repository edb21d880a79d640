//! First-order limit of `Z^{φ,r}(t, f)/r` for finite-variation bases.

use std::sync::Arc;

use super::{replicate, report, ExperimentConfig, ExperimentOutput, Plot, Rows, Table, Verdict};
use crate::error::Result;
use crate::flux::{fv_limit_for_sample, FluxPlan};
use crate::rng::{Domain, StreamKey};
use crate::stats::{convergence_in_probability_trend, quantile, TREND_FINAL_FRACTION};

/// Floor of `δ` when the pilot limit vanishes (deviations are then pure
/// quadrature noise).
pub const DELTA_FLOOR: f64 = 1e-9;

/// Per replication `Z/r − t·limit` at every radius, fed to the
/// convergence-in-probability trend with `δ = fv.delta_factor × scale`,
/// where the scale is the median `|t·limit|` of a pilot run.
pub fn run_fv_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let spec = Arc::new(cfg.field_spec()?);
    let quad = cfg.quadrature();
    let t = cfg.times[0];
    let plans: Vec<FluxPlan> = cfg.radii.iter().map(|r| FluxPlan::new(&spec, &cfg.p0, *r, &[t], &quad)).collect::<Result<_>>()?;
    let reach = plans.iter().map(FluxPlan::reach).fold(0.0, f64::max);
    let region = spec.bounding_region(&cfg.p0, reach);
    let phi = cfg.phi.test_function();
    let f = &cfg.f;

    let pilot = replicate(cfg.pilot, |i| {
        let real = spec.realize(region.clone(), StreamKey::new(cfg.seed, Domain::Pilot, i))?;
        let sample = plans[0].sample(&real)?;
        Ok(t * fv_limit_for_sample(&real, &sample, &phi, f, cfg.convention)?)
    })?;
    let scale = quantile(&pilot.iter().map(|v| v.abs()).collect::<Vec<_>>(), 0.5)?;
    let delta = (cfg.delta_factor * scale).max(DELTA_FLOOR);

    // per replication: (t·limit, deviation per radius)
    let draws = replicate(cfg.replications, |i| {
        let real = spec.realize(region.clone(), StreamKey::new(cfg.seed, Domain::Field, i))?;
        let mut limit = None;
        let mut devs = Vec::with_capacity(plans.len());
        for plan in &plans {
            let sample = plan.sample(&real)?;
            let lim = match limit {
                Some(l) => l,
                None => {
                    let l = t * fv_limit_for_sample(&real, &sample, &phi, f, cfg.convention)?;
                    limit = Some(l);
                    l
                }
            };
            devs.push(sample.z(0, &phi, f)? / plan.radius() - lim);
        }
        Ok((limit.unwrap_or(0.0), devs))
    })?;

    let mut rows = Rows::new(cfg);
    for v in &pilot {
        rows.push(None, Some(t), *v, "pilot_limit");
    }
    rows.push(None, Some(t), delta, "delta");
    for (lim, devs) in &draws {
        rows.push(None, Some(t), *lim, "limit");
        for (r, d) in cfg.radii.iter().zip(devs) {
            rows.push(Some(*r), Some(t), *d, "deviation");
        }
    }
    let per_radius: Vec<Vec<f64>> = (0..plans.len()).map(|k| draws.iter().map(|(_, d)| d[k]).collect()).collect();
    let mut table = Table::new("fv_trend", &["r", "fraction_exceeding", "median_abs_deviation"]);
    let verdict = match convergence_in_probability_trend(&per_radius, delta) {
        Ok(trend) => {
            for ((r, frac), devs) in cfg.radii.iter().zip(&trend.fractions).zip(&per_radius) {
                let med = quantile(&devs.iter().map(|v| v.abs()).collect::<Vec<_>>(), 0.5)?;
                table.push(vec![*r, *frac, med]);
                rows.push(Some(*r), Some(t), *frac, "fraction_exceeding");
            }
            Verdict::new(
                "fv_trend",
                trend.pass,
                format!(
                    "fractions {:?} with δ = {delta:.4e} ({} × pilot scale {scale:.4e}); final must be < {TREND_FINAL_FRACTION}",
                    trend.fractions.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>(),
                    cfg.delta_factor
                ),
            )
        }
        Err(e) => Verdict::errored("fv_trend", &e),
    };
    let plots = vec![(
        "deviations".to_string(),
        Plot::Ecdf {
            title: "|Z/r − t·limit| per radius".into(),
            series: cfg
                .radii
                .iter()
                .zip(&per_radius)
                .map(|(r, d)| (format!("r = {r}"), d.iter().map(|v| v.abs()).collect()))
                .collect(),
        },
    )];
    Ok(ExperimentOutput {
        report: report(cfg, vec![verdict], vec![table]),
        rows: rows.rows,
        plots,
    })
}
