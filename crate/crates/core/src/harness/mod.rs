//! Experiment orchestration: configs, runners producing verdicts, and the
//! CSV/SVG/JSON outputs.
//!
//! Replication `i` of every experiment draws from the stream
//! `(run.seed, domain, i)` and results are collected in replication order,
//! so outputs do not depend on the number of worker threads.

pub mod config;
mod flux_scan;
mod fv;
mod identities;
mod limit_law;
pub mod output;
mod selfsim;

use rayon::prelude::*;

pub use config::{parse_list, parse_matrix, BasisConfig, Experiment, ExperimentConfig, PhiName, RawConfig, DEFAULT_SEED};
pub use identities::IDENTITY_CHECKS;
pub use output::{read_csv, read_reports, render_svg, write_csv, ExperimentOutput, ExperimentReport, Plot, Provenance, SampleRow, Table, Verdict};

use crate::error::{Error, Result};

/// Runs the experiment of `cfg`, on a dedicated pool of `threads` workers
/// when given.
pub fn run(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<ExperimentOutput> {
    match threads {
        None => dispatch(cfg),
        Some(0) => Err(Error::Config("--threads must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| dispatch(cfg)),
    }
}

fn dispatch(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    match cfg.experiment {
        Experiment::VerifyIdentities => identities::run_identity_suite(cfg),
        Experiment::FluxScan => flux_scan::run_scaling_experiment(cfg),
        Experiment::FvLimit => fv::run_fv_experiment(cfg),
        Experiment::LimitLaw => limit_law::run_limit_law_experiment(cfg),
        Experiment::YSelfsim => selfsim::run_selfsim_experiment(cfg),
    }
}

fn provenance(cfg: &ExperimentConfig) -> Provenance {
    Provenance {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.raw().canonical(),
    }
}

fn report(cfg: &ExperimentConfig, verdicts: Vec<Verdict>, tables: Vec<Table>) -> ExperimentReport {
    ExperimentReport {
        experiment: cfg.experiment.name().to_string(),
        verdicts,
        tables,
        provenance: provenance(cfg),
    }
}

/// `f(0), …, f(n−1)` in parallel, collected in index order.
fn replicate<T: Send>(n: usize, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..n as u64).into_par_iter().map(f).collect()
}

/// Row builder bound to one experiment and seed.
struct Rows {
    experiment: String,
    seed: u64,
    rows: Vec<SampleRow>,
}

impl Rows {
    fn new(cfg: &ExperimentConfig) -> Self {
        Self {
            experiment: cfg.experiment.name().to_string(),
            seed: cfg.seed,
            rows: Vec::new(),
        }
    }

    fn push(&mut self, r: Option<f64>, t: Option<f64>, value: f64, kind: &str) {
        self.rows.push(SampleRow {
            experiment: self.experiment.clone(),
            seed: self.seed,
            r,
            t,
            value,
            statistic_kind: kind.to_string(),
        });
    }
}

#[cfg(test)]
mod tests;
