use super::*;

fn load(experiment: Experiment, overrides: &[&str]) -> ExperimentConfig {
    let overrides: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    ExperimentConfig::load(experiment, "", &overrides).unwrap()
}

#[test]
fn identity_suite_passes_and_catches_a_tampered_profile() {
    let cfg = load(Experiment::VerifyIdentities, &["identity.cases=40"]);
    let report = run(&cfg, None).unwrap().report;
    assert!(report.passed(), "{}", report.summary());

    let cfg = load(Experiment::VerifyIdentities, &["identity.cases=40", "identity.tamper_exponent=0.6"]);
    let report = run(&cfg, None).unwrap().report;
    assert!(!report.verdict("ac_identity").unwrap().pass, "{}", report.summary());
    assert!(report.verdict("mass_identity").unwrap().pass);
}

#[test]
fn drift_only_flux_matches_its_limit_exactly() {
    let cfg = load(
        Experiment::FvLimit,
        &["basis.kind=drift-only", "run.replications=20", "fv.pilot=5", "flux.nodes=32"],
    );
    let report = run(&cfg, None).unwrap().report;
    assert!(report.passed(), "{}", report.summary());
}

#[test]
fn fv_limit_passes_with_the_consistent_convention_and_fails_with_a_flipped_sign() {
    let base = ["run.replications=300", "fv.pilot=60", "flux.nodes=32"];
    let cfg = load(Experiment::FvLimit, &base);
    let report = run(&cfg, None).unwrap().report;
    assert!(report.passed(), "{}", report.summary());

    let mut flipped = base.to_vec();
    flipped.push("fv.convention=flipped-sign");
    let report = run(&load(Experiment::FvLimit, &flipped), None).unwrap().report;
    assert!(!report.passed(), "{}", report.summary());
}

#[test]
fn outputs_do_not_depend_on_the_thread_count() {
    let cfg = load(Experiment::FluxScan, &["run.replications=200", "flux.nodes=16"]);
    let one = run(&cfg, Some(1)).unwrap();
    let three = run(&cfg, Some(3)).unwrap();
    assert_eq!(one.rows, three.rows);
    assert_eq!(one.report, three.report);
    assert!(run(&cfg, Some(0)).is_err());
}

#[test]
fn rows_carry_experiment_and_seed() {
    let cfg = load(Experiment::FluxScan, &["run.replications=50", "flux.nodes=16", "run.seed=9"]);
    let out = run(&cfg, None).unwrap();
    assert!(out.rows.iter().all(|r| r.experiment == "flux-scan" && r.seed == 9));
    assert_eq!(out.rows.iter().filter(|r| r.statistic_kind == "energy_flux").count(), 50 * 4);
    assert_eq!(out.report.provenance.seed, 9);
    assert_eq!(out.report.provenance.config_hash, cfg.hash());
}

#[test]
fn seed_changes_samples_and_hash() {
    let a = load(Experiment::FluxScan, &["run.replications=30", "flux.nodes=16", "run.seed=1"]);
    let b = load(Experiment::FluxScan, &["run.replications=30", "flux.nodes=16", "run.seed=2"]);
    assert_ne!(a.hash(), b.hash());
    assert_ne!(run(&a, None).unwrap().rows, run(&b, None).unwrap().rows);
}

#[test]
fn selfsim_refuses_the_gaussian_planar_derivative() {
    let cfg = load(
        Experiment::YSelfsim,
        &["basis.alpha=2", "run.replications=2000", "limit.slices=60", "limit.patches=64", "limit.resolution_reps=2000"],
    );
    let report = run(&cfg, None).unwrap().report;
    let gate = report.verdict("derivative_gate").unwrap();
    assert!(gate.pass && gate.detail.contains("Fubini"), "{gate:?}");
    assert!(report.verdict("self_similarity").unwrap().pass, "{}", report.summary());
}

#[test]
fn limit_law_reports_a_degenerate_kernel_route() {
    let cfg = load(
        Experiment::LimitLaw,
        &[
            "basis.kind=gaussian",
            "field.kernel=boundary-vanishing",
            "run.replications=300",
            "flux.nodes=16",
            "flux.radii=0.01",
            "limit.slices=40",
            "limit.patches=32",
            "limit.resolution_reps=1000",
        ],
    );
    let report = run(&cfg, None).unwrap().report;
    assert!(report.verdict("degenerate_limit").is_some(), "{}", report.summary());
    assert!(report.verdict("ks").is_none());
}
