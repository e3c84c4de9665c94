use std::path::PathBuf;

use mbf::complexity::counter;
use mbf::harness::*;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("mbf-harness-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn small_ssm1(filters: &str, particles: &str, runs: usize) -> ExperimentConfig {
    ExperimentConfig::parse(&format!(
        "[experiment]\nscenario = \"ssm1\"\nfilters = [{filters}]\nparticles = [{particles}]\nruns = {runs}\nseed = 11\ntiming = false\n\n[ssm1]\nhorizon = 60\n"
    ))
    .unwrap()
}

fn csv_bytes(records: &[RunRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    write_csv(records, &mut out).unwrap();
    out
}

fn record(filter: FilterKind, n_p: usize, rmse_l: Option<f64>, diverged: bool) -> RunRecord {
    RunRecord {
        scenario: "ssm1".into(),
        filter,
        n_p,
        n_i: None,
        seed: 0,
        rmse_l,
        rmse_n: rmse_l.map(|v| 2.0 * v),
        diverged,
        flops: Some(570.0),
        wall_ms: None,
        estimates: Vec::new(),
    }
}

#[test]
fn seeded_rerun_gives_identical_csv() {
    let cfg = small_ssm1("\"ekf\", \"rbpf\", \"dbf\"", "20", 3);
    let a = csv_bytes(&run_experiment(&cfg).unwrap());
    let b = csv_bytes(&run_experiment(&cfg).unwrap());
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("scenario,filter,Np,ni,seed,rmse_l,rmse_n,diverged,flops,wall_ms\n"));
    assert_eq!(text.lines().count(), 1 + 3 * 3);
}

#[test]
fn worker_count_does_not_change_records() {
    let mut cfg = small_ssm1("\"rbpf\", \"dbf\"", "15", 2);
    cfg.experiment.workers = Some(1);
    let serial = csv_bytes(&run_experiment(&cfg).unwrap());
    cfg.experiment.workers = Some(3);
    assert_eq!(serial, csv_bytes(&run_experiment(&cfg).unwrap()));
}

#[test]
fn csv_round_trips() {
    let cfg = small_ssm1("\"ekf\", \"sdbf\"", "10", 2);
    let records = run_experiment(&cfg).unwrap();
    let bytes = csv_bytes(&records);
    let back = read_csv(bytes.as_slice()).unwrap();
    assert_eq!(back, records);
}

#[test]
fn summary_ignores_record_order() {
    let records: Vec<RunRecord> = (0..7)
        .map(|i| record(if i % 2 == 0 { FilterKind::Ekf } else { FilterKind::Dbf }, 100, Some(0.1 + 0.013 * i as f64), false))
        .collect();
    let mut shuffled = records.clone();
    shuffled.reverse();
    shuffled.swap(1, 4);
    assert_eq!(summarize(&records), summarize(&shuffled));
}

#[test]
fn diverged_runs_count_only_towards_divergence() {
    let records = vec![
        record(FilterKind::Rbpf, 50, Some(1.0), false),
        record(FilterKind::Rbpf, 50, Some(3.0), false),
        record(FilterKind::Rbpf, 50, None, true),
        record(FilterKind::Rbpf, 50, None, true),
    ];
    let rows = summarize(&records);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].runs, 4);
    assert_eq!(rows[0].rmse_l, Some(2.0));
    assert_eq!(rows[0].rmse_n, Some(4.0));
    assert_eq!(rows[0].p_fd, 0.5);

    let all_lost = summarize(&[record(FilterKind::Ekf, 1, None, true)]);
    assert_eq!(all_lost[0].rmse_l, None);
    assert_eq!(all_lost[0].p_fd, 1.0);
}

#[test]
fn empty_csv_gives_header_only() {
    let dir = scratch("empty");
    let csv = dir.join("empty.csv");
    write_csv(&[], std::fs::File::create(&csv).unwrap()).unwrap();
    let out = dir.join("figs");
    let files = emit_plot_data(&csv, &out).unwrap();
    assert_eq!(files.len(), 1);
    let text = std::fs::read_to_string(&files[0]).unwrap();
    assert_eq!(text.lines().count(), 1);
}

fn particle_sweep_records() -> Vec<RunRecord> {
    let mut out = Vec::new();
    let mut x = 0.37_f64;
    for filter in [FilterKind::Ekf, FilterKind::Rbpf, FilterKind::Dbf, FilterKind::Sdbf] {
        for n_p in [10, 25, 50, 100, 150] {
            for run in 0..5 {
                x = (x * 7.3 + 0.123).fract();
                let diverged = run == 4 && n_p == 10;
                out.push(record(filter, n_p, (!diverged).then_some(0.01 + x / 3.0), diverged));
            }
        }
    }
    out
}

#[test]
fn particle_sweep_gives_eight_series() {
    let dir = scratch("sweep");
    let records = particle_sweep_records();
    let csv = dir.join("results.csv");
    write_csv(&records, std::fs::File::create(&csv).unwrap()).unwrap();
    let files = emit_plot_data(&csv, &dir.join("figs")).unwrap();
    let series: Vec<_> = files.iter().filter(|p| !p.ends_with("summary.dat")).collect();
    assert_eq!(series.len(), 8);
    assert!(files.iter().any(|p| p.ends_with("summary.dat")));

    // Every series point matches a mean recomputed straight from the records.
    for path in series {
        let name = path.file_stem().unwrap().to_str().unwrap();
        let filter: FilterKind = name.rsplit('_').next().unwrap().parse().unwrap();
        let metric_n = name.contains("rmse_n");
        let text = std::fs::read_to_string(path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("Np value"));
        let mut points = 0;
        for line in lines {
            let mut cols = line.split_whitespace();
            let n_p: usize = cols.next().unwrap().parse().unwrap();
            let value: f64 = cols.next().unwrap().parse().unwrap();
            let kept: Vec<f64> = records
                .iter()
                .filter(|r| r.filter == filter && r.n_p == n_p)
                .filter_map(|r| if metric_n { r.rmse_n } else { r.rmse_l })
                .collect();
            let expected = kept.iter().sum::<f64>() / kept.len() as f64;
            assert!((value - expected).abs() <= 1e-12, "{name} Np={n_p}: {value} vs {expected}");
            points += 1;
        }
        assert_eq!(points, 5);
    }
}

#[test]
fn ssm2_series_carry_target_count() {
    let cfg = ExperimentConfig::parse(
        "[experiment]\nscenario = \"ssm2\"\nfilters = [\"ekf\"]\nparticles = [10]\ntargets = [1, 2]\nruns = 2\ntiming = false\n\n[ssm2]\nhorizon = 15\n",
    )
    .unwrap();
    let records = run_experiment(&cfg).unwrap();
    assert_eq!(records.len(), 4);
    let dir = scratch("ssm2");
    let csv = dir.join("ssm2.csv");
    write_csv(&records, std::fs::File::create(&csv).unwrap()).unwrap();
    emit_plot_data(&csv, &dir.join("figs")).unwrap();
    let text = std::fs::read_to_string(dir.join("figs/ssm2_p_fd_ekf.dat")).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "N Np value");
    assert!(rows[1].starts_with("1 10 ") && rows[2].starts_with("2 10 "));
}

#[test]
fn config_errors_point_at_the_line() {
    let err = ExperimentConfig::parse("[experiment]\nruns = 3\n\n[ssm1]\nhorizon = 10\nbogus = 1\n").unwrap_err();
    match err {
        mbf::Error::Config { line, .. } => assert_eq!(line, 6),
        other => panic!("unexpected {other:?}"),
    }
}

fn measured_flops(kind: FilterKind, n_p: usize) -> f64 {
    let cfg = small_ssm1("\"ekf\"", "10", 1);
    let sim = simulate_scenario(&cfg, ScenarioKind::Ssm1, 1, 5).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(9);
    let mut filter = build_filter(kind, &sim.scenario, &cfg, n_p, &mut rng).unwrap();
    attach_counter(filter.as_mut(), &sim.truth, &mut rng).unwrap()
}

#[test]
fn measured_flops_follow_the_closed_forms() {
    let ekf = measured_flops(FilterKind::Ekf, 1);
    assert!((570.0 / 2.0..=570.0 * 2.0).contains(&ekf), "EKF measured {ekf}");

    let ratio = measured_flops(FilterKind::Dbf, 100) / measured_flops(FilterKind::Rbpf, 100);
    assert!((ratio - 0.71).abs() <= 0.1, "DBF/RBPF measured ratio {ratio}");
}

#[test]
fn counter_is_silent_outside_a_scope() {
    let cfg = small_ssm1("\"dbf\"", "10", 1);
    let sim = simulate_scenario(&cfg, ScenarioKind::Ssm1, 1, 5).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(9);
    let mut filter = build_filter(FilterKind::Dbf, &sim.scenario, &cfg, 10, &mut rng).unwrap();
    run_filter(filter.as_mut(), &sim.truth, &mut rng).unwrap();
    assert!(!counter::is_enabled());
    assert_eq!(counter::current(), 0.0);
}
