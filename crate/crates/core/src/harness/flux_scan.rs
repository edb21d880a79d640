//! Scaling exponent of the energy flux.

use std::sync::Arc;

use super::{replicate, report, ExperimentConfig, ExperimentOutput, Plot, Rows, Table, Verdict};
use crate::error::Result;
use crate::flux::FluxPlan;
use crate::rng::{Domain, StreamKey};
use crate::stats::{iqr, predicted_flux_exponent, scaling_exponent};

/// Allowed distance between fitted and predicted slope.
pub const SLOPE_TOLERANCE: f64 = 0.1;

/// `𝓔_r` per replication and radius, IQR per radius, and the log-log slope
/// against `d − (α−1)/α` (or `d` for finite-variation bases).
pub fn run_scaling_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let spec = Arc::new(cfg.field_spec()?);
    let quad = cfg.quadrature();
    let plans: Vec<FluxPlan> = cfg.radii.iter().map(|r| FluxPlan::new(&spec, &cfg.p0, *r, &[1.0], &quad)).collect::<Result<_>>()?;
    let reach = plans.iter().map(FluxPlan::reach).fold(0.0, f64::max);
    let region = spec.bounding_region(&cfg.p0, reach);
    let phi = cfg.phi.test_function();
    let fluxes = replicate(cfg.replications, |i| {
        let real = spec.realize(region.clone(), StreamKey::new(cfg.seed, Domain::Field, i))?;
        plans.iter().map(|p| p.sample(&real)?.energy_flux(0, &phi)).collect::<Result<Vec<f64>>>()
    })?;

    let mut rows = Rows::new(cfg);
    for per_rep in &fluxes {
        for (r, e) in cfg.radii.iter().zip(per_rep) {
            rows.push(Some(*r), Some(1.0), *e, "energy_flux");
        }
    }
    let spreads: Vec<f64> = (0..cfg.radii.len())
        .map(|k| iqr(&fluxes.iter().map(|v| v[k]).collect::<Vec<_>>()))
        .collect::<Result<_>>()?;
    for (r, s) in cfg.radii.iter().zip(&spreads) {
        rows.push(Some(*r), Some(1.0), *s, "iqr");
    }
    let predicted = match cfg.alpha() {
        Some(alpha) => predicted_flux_exponent(cfg.dim, alpha),
        None => cfg.dim as f64,
    };
    let mut table = Table::new("scaling", &["r", "iqr", "residual"]);
    let mut plots = Vec::new();
    let verdict = match scaling_exponent(&cfg.radii, &spreads) {
        Ok(fit) => {
            let fit = fit.with_prediction(predicted);
            for ((r, s), res) in cfg.radii.iter().zip(&spreads).zip(&fit.residuals) {
                table.push(vec![*r, *s, *res]);
            }
            rows.push(None, None, fit.slope, "slope");
            plots.push((
                "scaling".to_string(),
                Plot::LogLogFit {
                    title: "IQR of the energy flux".into(),
                    x: cfg.radii.clone(),
                    y: spreads.clone(),
                    slope: fit.slope,
                    intercept: fit.intercept,
                    predicted,
                },
            ));
            Verdict::new(
                "scaling_slope",
                fit.within(SLOPE_TOLERANCE),
                format!("fitted IQR slope {:.4}, predicted {predicted:.4} (tolerance {SLOPE_TOLERANCE})", fit.slope),
            )
        }
        Err(e) => Verdict::errored("scaling_slope", &e),
    };
    Ok(ExperimentOutput {
        report: report(cfg, vec![verdict], vec![table]),
        rows: rows.rows,
        plots,
    })
}
