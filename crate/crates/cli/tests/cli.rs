use irsolve_cli::args::{Method, PowerSource};
use irsolve_cli::run::{execute, RunConfig};
use irsolve_core::matgen::{gen_covariance, CovarianceSpec};
use irsolve_core::power::integrate_energy;
use irsolve_core::refinement::{SolveReport, TolMode};
use irsolve_core::{EnergyReport, PowerSample, PrecisionTier};
use std::collections::HashMap;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;
use tempfile::TempDir;

fn irsolve(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irsolve")).args(args).output().expect("spawn irsolve")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn csv_records(text: &str) -> Vec<HashMap<String, String>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    rdr.records()
        .map(|r| headers.iter().map(String::from).zip(r.unwrap().iter().map(String::from)).collect())
        .collect()
}

fn read_report(dir: &Path) -> SolveReport {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn solve_cg_with_simulated_power() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("run");
    let out = irsolve(&[
        "solve", "--method", "cg-ir", "--n", "500", "--d", "4", "--tol", "1e-5", "--power", "sim",
        "--out", dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_report(&dir);
    assert!(report.converged);
    assert_eq!(report.method, "cg-ir");
    for file in ["phases.csv", "trace.csv", "energy.json", "metrics.json"] {
        assert!(dir.join(file).is_file(), "{file} missing");
    }
    let metrics: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(metrics[0]["avg_power_w"].as_f64().unwrap() > 140.0);
}

#[test]
fn banded_solve_uses_default_band() {
    let tmp = TempDir::new().unwrap();
    let out = irsolve(&["solve", "--method", "banded-cg-ir", "--n", "100", "--d", "4", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(read_report(tmp.path()).converged);
}

#[test]
fn usage_errors_exit_64() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().to_str().unwrap();
    let cases: [&[&str]; 6] = [
        &["solve", "--method", "banded-cg-ir", "--n", "10", "--band-k", "20", "--out", dir],
        &["solve", "--method", "cg-ir", "--band-k", "4", "--out", dir],
        &["solve", "--method", "gauss", "--out", dir],
        &["bench", "--methods", ""],
        &["sweep-perturb", "--gamma", "-1,abc"],
        &["idle-report", "--window", "0"],
    ];
    for args in cases {
        let out = irsolve(args);
        assert_eq!(code(&out), 64, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
    assert_eq!(code(&irsolve(&["--help"])), 0);
}

#[test]
fn exhausted_budget_exits_2() {
    let tmp = TempDir::new().unwrap();
    let out = irsolve(&["solve", "--n", "200", "--max-outer", "1", "--tol", "1e-14", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!read_report(tmp.path()).converged);
}

#[test]
fn bench_ranks_banded_low_decay_slowest() {
    let out = irsolve(&["bench", "--n", "2000", "--d", "1,4", "--methods", "cg-ir,banded-cg-ir", "--m", "1", "--format", "csv"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_records(&stdout(&out));
    assert_eq!(rows.len(), 4);
    let iters = |r: &HashMap<String, String>| r["iters_low"].parse::<u64>().unwrap();
    let top = rows.iter().max_by_key(|r| iters(r)).unwrap();
    assert_eq!((top["method"].as_str(), top["d"].as_str()), ("banded-cg-ir", "1.0"));
    assert_eq!(rows.iter().filter(|r| iters(r) == iters(top)).count(), 1);
}

#[test]
fn single_cell_bench_matches_solve() {
    let tmp = TempDir::new().unwrap();
    let common = ["--n", "300", "--d", "2", "--m", "2", "--power", "sim", "--fixed-clock", "--format", "csv", "--seed", "11"];
    let mut bench_args = vec!["bench", "--methods", "cg-ir"];
    bench_args.extend(common);
    let bench = irsolve(&bench_args);
    let mut solve_args = vec!["solve", "--method", "cg-ir", "--out", tmp.path().to_str().unwrap()];
    solve_args.extend(common);
    let solve = irsolve(&solve_args);
    assert_eq!((code(&bench), code(&solve)), (0, 0));

    let b = &csv_records(&stdout(&bench))[0];
    let s = &csv_records(&stdout(&solve))[0];
    for (key, value) in s {
        assert_eq!(&b[key], value, "column {key}");
    }
}

#[test]
fn sweep_examples() {
    let out = irsolve(&["sweep-perturb", "--gamma", "-1,-3.25,-5.5,-7.75,-10", "--n", "500,1000", "--d", "2"]);
    assert_eq!(code(&out), 0);
    let rows = csv_records(&stdout(&out));
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().all(|r| r["converged"] == "true"));

    let out = irsolve(&["sweep-perturb", "--gamma=-10", "--n", "500,1000", "--format", "json"]);
    assert_eq!(code(&out), 0);
    let rows: Vec<serde_json::Value> = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r["outer_iters"].as_u64().unwrap() <= 2));
}

#[test]
fn idle_report_bundled_and_errors() {
    let out = irsolve(&["idle-report"]);
    assert_eq!(code(&out), 0);
    let rows = csv_records(&stdout(&out));
    let total = rows.iter().find(|r| r["sensor"] == "total").unwrap();
    assert!((total["mean_w"].parse::<f64>().unwrap() - 142.1).abs() <= 0.2);

    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("nope.csv");
    assert_eq!(code(&irsolve(&["idle-report", "--trace", missing.to_str().unwrap()])), 74);
    assert_eq!(code(&irsolve(&["idle-report", "--window", "400"])), 65);

    let garbled = tmp.path().join("bad.csv");
    std::fs::write(&garbled, "t_s,sensor,watts\n0.0,total,abc\n").unwrap();
    assert_eq!(code(&irsolve(&["idle-report", "--trace", garbled.to_str().unwrap()])), 65);
}

#[test]
fn plot_data_labels_and_energy_round_trip() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("run");
    let out = irsolve(&[
        "solve", "--method", "chol-ir", "--n", "400", "--power", "sim", "--fixed-clock", "--out", dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let report = read_report(&dir);
    let out = irsolve(&["plot-data", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_records(&stdout(&out));
    assert!(!rows.is_empty());
    let labels: Vec<&str> = report.phases.iter().map(|p| p.label.as_str()).collect();
    assert!(rows.iter().all(|r| labels.contains(&r["phase_label"].as_str()) || r["phase_label"] == "unphased"));
    assert!(rows.iter().any(|r| r["phase_label"] == "factorize"));

    // the plot rows carry everything needed to recompute the energy report
    let samples: Vec<PowerSample> = rows
        .iter()
        .map(|r| PowerSample {
            t: r["t_s"].parse().unwrap(),
            sensor: r["sensor"].clone(),
            watts: r["watts"].parse().unwrap(),
        })
        .collect();
    let again = integrate_energy(&samples, &report.phases).unwrap();
    let saved: EnergyReport = serde_json::from_str(&std::fs::read_to_string(dir.join("energy.json")).unwrap()).unwrap();
    for (p, q) in again.phases.iter().zip(&saved.phases) {
        assert_eq!((&p.phase, &p.sensor), (&q.phase, &q.sensor));
        assert!((p.energy_j - q.energy_j).abs() <= 1e-9 * q.energy_j.abs().max(1e-300));
    }
    let (e1, e2) = (again.system_total().unwrap().energy_j, saved.system_total().unwrap().energy_j);
    assert!((e1 - e2).abs() <= 1e-9 * e2);
}

#[test]
fn plot_data_without_phases_is_unphased() {
    let tmp = TempDir::new().unwrap();
    let report = SolveReport {
        method: "chol-ir".into(),
        rhs: 1,
        converged: true,
        outer_iters: 0,
        inner_iters: 1,
        residual_history: vec![0.0],
        flops: Default::default(),
        phases: vec![],
        wall_time_s: 1.0,
    };
    std::fs::write(tmp.path().join("report.json"), serde_json::to_string(&report).unwrap()).unwrap();
    std::fs::write(tmp.path().join("trace.csv"), "t_s,sensor,watts\n0.0,total,150.0\n0.5,total,150.0\n1.0,total,150.0\n").unwrap();
    let out = irsolve(&["plot-data", tmp.path().join("report.json").to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let rows = csv_records(&stdout(&out));
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r["phase_label"] == "unphased"));

    std::fs::write(tmp.path().join("report.json"), "{ not json").unwrap();
    assert_eq!(code(&irsolve(&["plot-data", tmp.path().to_str().unwrap()])), 65);
}

#[test]
fn live_sampler_overhead_is_small() {
    let n = 1500;
    let a = gen_covariance(CovarianceSpec { n, decay: 2.0 }, PrecisionTier::High).unwrap();
    let cfg = |power| RunConfig {
        method: Method::CholIr,
        n,
        d: 2.0,
        m: 1,
        tol: 1e-5,
        tol_mode: TolMode::Absolute,
        band_k: 16,
        gamma: None,
        inner_tier: PrecisionTier::Low,
        max_outer: 50,
        seed: 42,
        power,
        fixed_clock: false,
    };
    let median_time = |power: PowerSource| {
        let c = cfg(power);
        let mut times: Vec<f64> = (0..7)
            .map(|_| {
                let start = Instant::now();
                execute(&c, &a).unwrap();
                start.elapsed().as_secs_f64()
            })
            .collect();
        times.sort_by(f64::total_cmp);
        times[times.len() / 2]
    };
    median_time(PowerSource::None);
    let plain = median_time(PowerSource::None);
    let sampled = median_time(PowerSource::Sim);
    let change = (sampled - plain) / plain;
    assert!(change < 0.05, "sampler changed wall time by {:.1}% ({plain:.4}s -> {sampled:.4}s)", 100.0 * change);
}
