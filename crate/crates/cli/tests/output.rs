use preftree::benchmarks::{run_benchmark_experiment_with, BenchmarkFunction};
use preftree::sushi::UserCurve;
use preftree::{Execution, RunConfig, Strategy};
use preftree_cli::*;

fn row(run: usize, iteration: usize, regret: f64, cum_seconds: f64) -> RegretRow {
    RegretRow {
        run,
        iteration,
        regret,
        cum_seconds,
    }
}

#[test]
fn regret_csv_round_trips() {
    let f = BenchmarkFunction::by_name("branin").unwrap();
    let cfg = RunConfig {
        initial_pairs: 4,
        iterations: 3,
        ..RunConfig::default()
    };
    let report = run_benchmark_experiment_with(&f, 2, &cfg, Strategy::Qeubo, Execution::Sequential).unwrap();
    let rows = regret_rows(&report);
    assert_eq!(rows.len(), 2 * cfg.budget());
    assert!(rows.iter().all(|r| r.regret >= 0.0 && r.cum_seconds >= 0.0));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("branin.csv");
    write_regret_csv(&path, &rows).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("run,iteration,regret,cum_seconds\n"));
    assert_eq!(read_regret_csv(&path).unwrap(), rows);
}

#[test]
fn mean_curve_averages_over_runs() {
    let rows = vec![
        row(0, 0, 4.0, 0.1),
        row(0, 1, 2.0, 0.3),
        row(1, 0, 2.0, 0.3),
        row(1, 1, 2.0, 0.5),
    ];
    let regret = mean_curve(&rows, Metric::Regret);
    assert_eq!(regret.len(), 2);
    assert_eq!(regret[0].0, 0);
    assert!((regret[0].1 - 3.0).abs() < 1e-12);
    assert!((regret[0].2 - 2f64.sqrt()).abs() < 1e-12);
    assert_eq!(regret[1], (1, 2.0, 0.0));

    let seconds = mean_curve(&rows, Metric::Seconds);
    assert!((seconds[1].1 - 0.4).abs() < 1e-12);

    let single = mean_curve(&rows[..1], Metric::Regret);
    assert_eq!(single, vec![(0, 4.0, 0.0)]);
}

#[test]
fn plot_writes_an_svg_with_every_label() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plot.svg");
    let series = vec![
        ("qeubo".to_string(), vec![(0, 3.0, 1.0), (1, 2.0, 0.5), (2, 1.0, 0.2)]),
        ("random".to_string(), vec![(0, 3.0, 1.0), (1, 2.8, 0.9), (2, 2.5, 0.7)]),
    ];
    plot_curves(&path, "branin", "regret", &series).unwrap();
    let svg = std::fs::read_to_string(&path).unwrap();
    assert!(svg.starts_with("<svg"));
    for label in ["qeubo", "random", "branin", "iteration"] {
        assert!(svg.contains(label), "missing {label}");
    }
}

#[test]
fn plot_rejects_empty_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.svg");
    assert!(plot_curves(&path, "t", "y", &[("a".into(), vec![])]).is_err());
}

#[test]
fn sushi_rows_keep_query_order_and_missing_tau() {
    let curves = vec![UserCurve {
        user_id: 7,
        rho_regret: vec![4.0, 2.5, 0.0],
        kendall_tau: vec![None, Some(0.2), Some(0.9)],
        answered: vec![(1, 2), (3, 4)],
    }];
    let rows = sushi_rows("warm", &curves);
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.mode == "warm" && r.user == 7));
    assert_eq!(rows.iter().map(|r| r.query).collect::<Vec<_>>(), vec![0, 1, 2]);
    assert_eq!(rows[0].kendall_tau, None);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sushi.csv");
    write_sushi_csv(&path, &rows).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "mode,user,query,rho_regret,kendall_tau");
    assert_eq!(lines[1], "warm,7,0,4.0,");
    assert_eq!(lines[3], "warm,7,2,0.0,0.9");
}
