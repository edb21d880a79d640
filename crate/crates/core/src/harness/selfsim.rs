//! Self-similarity and path regularity of the limit field `Y^α(·, f)`.

use super::{report, ExperimentConfig, ExperimentOutput, Plot, Rows, Table, Verdict};
use crate::error::{Error, Result};
use crate::limit::{check_resolution, default_boundary_nodes, LimitSampler, RESOLUTION_KS_THRESHOLD};
use crate::stats::{ks_distance_values, quantile, scaling_exponent};

/// Allowed distance of the increment slope from 1.
pub const REGULARITY_TOLERANCE: f64 = 0.15;

/// KS between `Y(ct)` and `c^{1/α}Y(t)`, the log-log slope of the median
/// absolute increment `|Y(t+h) − Y(t)|` against `h`, and the gate of the
/// path-derivative sampler.
pub fn run_selfsim_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let alpha = cfg.alpha().ok_or_else(|| Error::Config("y-selfsim needs a Gaussian or stable basis".into()))?;
    let lspec = cfg.limit_spec()?;
    let f = &cfg.f;
    let t = cfg.times[0];
    let c = cfg.selfsim_c;
    let n = cfg.replications;
    let nodes = cfg.patches.unwrap_or_else(|| default_boundary_nodes(&cfg.shape));
    let mut rows = Rows::new(cfg);
    let mut verdicts = Vec::new();
    let mut tables = Vec::new();
    let mut plots = Vec::new();

    let times = [t, c * t];
    verdicts.push(match check_resolution(&lspec, f, &times, cfg.slices, nodes, cfg.resolution_reps, cfg.seed) {
        Ok(dist) => {
            rows.push(None, None, dist, "refinement_ks");
            Verdict::new(
                "partition_resolved",
                true,
                format!("refinement KS {dist:.4} ≤ {RESOLUTION_KS_THRESHOLD} at {} slices × {nodes} boundary nodes", cfg.slices),
            )
        }
        Err(e) => Verdict::errored("partition_resolved", &e),
    });

    let sampler = LimitSampler::new(&lspec, f, &times, cfg.slices, nodes)?;
    let late = sampler.marginal(1)?.samples(n, cfg.seed, 0);
    let factor = c.powf(1.0 / alpha);
    let early: Vec<f64> = sampler.marginal(0)?.samples(n, cfg.seed, n as u64).iter().map(|v| factor * v).collect();
    for v in &late {
        rows.push(None, Some(c * t), *v, "y_late");
    }
    for v in &early {
        rows.push(None, Some(t), *v, "y_early_scaled");
    }
    let ks = ks_distance_values(&late, &early)?;
    rows.push(None, None, ks.statistic, "ks");
    verdicts.push(Verdict::new(
        "self_similarity",
        ks.below_01(),
        format!(
            "KS(Y({c}t), {c}^(1/α) Y(t)) = {:.4} against the 1% critical value {:.4} (N = {n}, α = {alpha})",
            ks.statistic, ks.critical_01
        ),
    ));
    plots.push((
        "selfsim_ecdf".to_string(),
        Plot::Ecdf {
            title: format!("Y({c}t) vs {c}^(1/α) Y(t)"),
            series: vec![("Y(ct)".into(), late), ("c^(1/α) Y(t)".into(), early)],
        },
    ));

    // all increments share the draws, so the slope carries no sampling noise
    // beyond the common factor
    let mut inc_times = vec![t];
    inc_times.extend(cfg.steps.iter().map(|h| t + h));
    let paths = LimitSampler::new(&lspec, f, &inc_times, cfg.slices, nodes)?;
    let mut medians = Vec::with_capacity(cfg.steps.len());
    let mut table = Table::new("increments", &["h", "median_abs_increment"]);
    for (k, h) in cfg.steps.iter().enumerate() {
        let mut w = vec![0.0; inc_times.len()];
        w[0] = -1.0;
        w[k + 1] = 1.0;
        let inc = paths.functional_law(&w)?.samples(n, cfg.seed, 2 * n as u64);
        let med = quantile(&inc.iter().map(|v| v.abs()).collect::<Vec<_>>(), 0.5)?;
        rows.push(None, Some(t + h), med, "median_abs_increment");
        table.push(vec![*h, med]);
        medians.push(med);
    }
    tables.push(table);
    verdicts.push(match scaling_exponent(&cfg.steps, &medians) {
        Ok(fit) => {
            let fit = fit.with_prediction(1.0);
            rows.push(None, None, fit.slope, "increment_slope");
            plots.push((
                "increments".to_string(),
                Plot::LogLogFit {
                    title: "median |Y(t+h) − Y(t)|".into(),
                    x: cfg.steps.clone(),
                    y: medians.clone(),
                    slope: fit.slope,
                    intercept: fit.intercept,
                    predicted: 1.0,
                },
            ));
            Verdict::new(
                "path_regularity",
                fit.within(REGULARITY_TOLERANCE),
                format!("increment slope {:.4}, expected 1 (tolerance {REGULARITY_TOLERANCE}); 1/α = {:.4}", fit.slope, 1.0 / alpha),
            )
        }
        Err(e) => Verdict::errored("path_regularity", &e),
    });

    let must_refuse = alpha == 2.0 && cfg.dim == 2;
    match LimitSampler::derivative(&lspec, f, t, cfg.slices, nodes) {
        Err(Error::FubiniCondition(msg)) => verdicts.push(Verdict::new("derivative_gate", must_refuse, format!("refused: {msg}"))),
        // weights not linear in the normal have no derivative sampler
        Err(Error::Unsupported(_)) => {}
        Err(e) => verdicts.push(Verdict::errored("derivative_gate", &e)),
        Ok(_) => verdicts.push(Verdict::new(
            "derivative_gate",
            !must_refuse,
            if must_refuse {
                "derivative sampler accepted α = 2, d = 2".to_string()
            } else {
                "derivative sampler built".to_string()
            },
        )),
    }

    Ok(ExperimentOutput {
        report: report(cfg, verdicts, tables),
        rows: rows.rows,
        plots,
    })
}
