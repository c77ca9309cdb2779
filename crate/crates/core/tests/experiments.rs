use robust_sysid::*;
use robust_sysid::experiments::row_errors;

fn small_linear_model() -> SystemModel {
    let a = Mat::from_rows(&[vec![0.9, 0.2], vec![-0.1, 0.8]]).unwrap();
    SystemModel::new(a, BasisLibrary::linear(2)).unwrap()
}

fn short_benchmark_sweep(spec: DisturbanceSpec) -> SweepConfig {
    SweepConfig {
        t_grid: vec![100, 200, 400],
        seeds: 4,
        ..SweepConfig::benchmark(spec)
    }
}

#[test]
fn noiseless_single_cell_sweep() {
    let cfg = SweepConfig {
        model: small_linear_model(),
        spec: DisturbanceSpec::none(),
        x0: vec![1.0, -1.0],
        t_grid: vec![10],
        seeds: 1,
        methods: vec![EstimatorConfig::ls()],
        master_seed: 0,
    };
    let report = run_sweep(&cfg).unwrap();
    assert_eq!(report.rows.len(), 1);
    let row = &report.rows[0];
    assert!(row.is_valid());
    assert!(row.frob_error.unwrap() < 1e-8);
    assert_eq!(row.row_errors.len(), 2);
}

#[test]
fn sweep_csv_is_byte_identical_across_runs_and_thread_counts() {
    let cfg = short_benchmark_sweep(DisturbanceSpec::uniform(0.2).unwrap());
    let a = run_sweep(&cfg).unwrap().to_csv(false);
    let b = run_sweep(&cfg).unwrap().to_csv(false);
    assert_eq!(a, b);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let c = pool.install(|| run_sweep(&cfg).unwrap().to_csv(false));
    assert_eq!(a, c);
    assert_eq!(a.lines().count(), 1 + 3 * 4 * 3);
}

#[test]
fn prefix_reuse_matches_fresh_simulation() {
    let cfg = short_benchmark_sweep(DisturbanceSpec::state_attack(0.4, 0.2, 1.0).unwrap());
    let report = run_sweep(&cfg).unwrap();
    for row in report.rows.iter().filter(|r| r.t == 200 && r.is_valid()) {
        let traj = simulate(&cfg.model, &cfg.spec, &cfg.x0, 200, &mut derive_stream(0, row.seed as u64)).unwrap();
        let data = RegressionData::from_trajectory(&traj, cfg.model.basis()).unwrap();
        let method = cfg.methods.iter().find(|m| m.method == row.method).unwrap();
        let f = fit(&data, method).unwrap();
        assert_eq!(row.row_errors, row_errors(cfg.model.a_bar(), &f.a_hat), "seed {}", row.seed);
    }
}

#[test]
fn rows_come_in_canonical_order() {
    let cfg = short_benchmark_sweep(DisturbanceSpec::uniform(0.2).unwrap());
    let report = run_sweep(&cfg).unwrap();
    let keys: Vec<(usize, usize)> = report.rows.iter().map(|r| (r.t, r.seed)).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    let tags: Vec<String> = report.rows[..3].iter().map(|r| r.method.to_string()).collect();
    assert_eq!(tags, ["ls", "l1", "huber(0.1)"]);
}

#[test]
fn diverged_seeds_are_flagged_and_excluded() {
    // Seed 6 of master seed 0 crosses the divergence cutoff at t = 2028.
    let cfg = SweepConfig {
        t_grid: vec![40, 2500],
        seeds: 8,
        ..SweepConfig::benchmark(DisturbanceSpec::state_attack(0.4, 0.2, 1.0).unwrap())
    };
    let report = run_sweep(&cfg).unwrap();
    let failed: Vec<&SweepRow> = report.rows.iter().filter(|r| r.t == 2500 && !r.is_valid()).collect();
    assert_eq!(failed.len(), 3);
    assert!(failed.iter().all(|r| r.seed == 6));
    for r in &failed {
        assert!(r.frob_error.is_none());
        assert!(r.failure.as_deref().unwrap().contains("diverged"));
    }
    let csv = report.to_csv(false);
    assert!(csv.lines().any(|l| l.starts_with("2500,") && l.contains(",,")));
    let valid = report.rows.iter().filter(|r| r.t == 2500 && r.method == Method::Ls && r.is_valid()).count();
    let mean = report.mean_errors(Method::Ls, 2500);
    assert_eq!(mean.len(), 1);
    let expect: f64 = report
        .rows
        .iter()
        .filter(|r| r.t == 2500 && r.method == Method::Ls && r.is_valid())
        .map(|r| r.frob_error.unwrap())
        .sum::<f64>()
        / valid as f64;
    assert!((mean[0].1 - expect).abs() < 1e-15);
}

#[test]
fn zero_disturbance_rollouts_track_the_truth() {
    let model = benchmark_system();
    let methods = [EstimatorConfig::ls(), EstimatorConfig::l1(), EstimatorConfig::huber(0.1)];
    let report = stability_study(&model, &DisturbanceSpec::none(), &BENCHMARK_X0, 2500, &methods, &mut derive_stream(0, 0)).unwrap();
    assert!(!report.truth.diverged);
    for m in &report.estimates {
        assert!(!m.summary.diverged, "{}", m.method);
        assert!(m.summary.max_deviation.unwrap() < 1e-6, "{}: {:?}", m.method, m.summary.max_deviation);
    }
}

#[test]
fn slope_needs_enough_lengths() {
    let cfg = short_benchmark_sweep(DisturbanceSpec::uniform(0.2).unwrap());
    let report = run_sweep(&cfg).unwrap();
    assert!(fit_slope(&report, Method::Ls, 100).is_err());
}
