use optswitch_cli::run::auto_checkpoints;
use optswitch_cli::{oracle_table, run, CliError, RunConfig, RunOptions};
use std::path::{Path, PathBuf};
use std::process::Command;

const SMALL_POWER: &str = r#"
problem = "power"

[grid]
horizon = 1.0
steps = 52
decision_every = 26

[solver]
paths = 300
cells = 4

[simulation]
paths = 300
"#;

const SMALL_OU: &str = r#"
problem = "ou-test"

[grid]
horizon = 1.0
steps = 10

[solver]
paths = 2000
cells = 8
epsilon = 0.001

[simulation]
paths = 2000

[oracle]
nodes = 31
"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_optswitch"));
    c.env_remove(optswitch_cli::RNG_KEY_ENV);
    c
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("optswitch-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn config_error(text: &str) -> (String, String) {
    match RunConfig::from_toml_str(text) {
        Err(CliError::Config { path, message }) => (path, message),
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn unknown_key_is_rejected_with_its_path() {
    let (path, message) = config_error(&SMALL_OU.replace("cells = 8", "cells = 8\ncels = 9"));
    assert_eq!(path, "solver.cels");
    assert!(message.contains("cels"), "{message}");

    let dir = tmp("unknown");
    let cfg = write_config(&dir, &SMALL_OU.replace("[oracle]", "[oracle]\nwidth = 3"));
    let out = bin().arg("validate").arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error: ") && err.contains("width"), "{err}");
}

#[test]
fn grid_and_solver_consistency_errors() {
    let mismatch = SMALL_OU.replace("steps = 10", "steps = 10\nstep_size = 0.2");
    assert_eq!(config_error(&mismatch).0, "grid.step_size");
    let not_multiple = SMALL_OU.replace("steps = 10", "step_size = 0.3");
    assert_eq!(config_error(&not_multiple).0, "grid.step_size");
    let few_paths = SMALL_OU.replace("paths = 2000\ncells = 8", "paths = 7\ncells = 8");
    assert_eq!(config_error(&few_paths).0, "solver.paths");
    let bad_eps = SMALL_OU.replace("epsilon = 0.001", "epsilon = 1.5");
    assert_eq!(config_error(&bad_eps).0, "solver.epsilon");
    let power_only = format!("{SMALL_OU}\n[power]\nrho = 0.05\n");
    assert!(RunConfig::from_toml_str(&power_only).is_err());
    let bad_power = format!("{SMALL_POWER}\n[market]\n")
        .replace("[market]", "[power.market]\nprice_cap = -1.0");
    assert!(config_error(&bad_power).0.starts_with("power."));
    let bad_keyword = SMALL_OU.replace("steps = 10", "steps = 10\ncheckpoints = \"many\"");
    assert_eq!(config_error(&bad_keyword).0, "grid.checkpoints");
}

#[test]
fn step_size_alone_defines_the_grid() {
    let cfg =
        RunConfig::from_toml_str(&SMALL_OU.replace("steps = 10", "step_size = 0.125")).unwrap();
    assert_eq!(cfg.steps(), 8);
    assert_eq!(cfg.step_size(), 0.125);
}

#[test]
fn shipped_configs_validate() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in [
        "power-desk",
        "power-new-capacity",
        "ou-test",
        "brownian-test",
    ] {
        let out = bin()
            .arg("validate")
            .arg(root.join(format!("{name}.toml")))
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{name}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

/// Largest segment whose inverse-step amplification `(1 − αh)^{-L}` stays
/// within 10⁶, found by walking the product.
fn longest_segment(step_size: f64, alpha: f64) -> usize {
    let (mut gain, mut len) = (1.0f64, 0usize);
    loop {
        gain /= 1.0 - alpha * step_size;
        if gain > 1e6 {
            return len.max(1);
        }
        len += 1;
    }
}

#[test]
fn auto_checkpoints_bound_segment_growth() {
    assert_eq!(auto_checkpoints(1040, 1.0 / 104.0, 0.0), 4);
    assert_eq!(auto_checkpoints(10, 0.1, 1.0), 4);
    for &(n, h, alpha) in &[
        (1040, 1.0 / 104.0, 20.0),
        (4000, 0.0025, 4.0),
        (20_000, 0.0005, 30.0),
    ] {
        let segment = longest_segment(h, alpha);
        let expected = (n as usize).div_ceil(segment) - 1;
        assert_eq!(
            auto_checkpoints(n, h, alpha),
            expected.max(4),
            "N = {n}, α = {alpha}"
        );
    }
    assert_eq!(auto_checkpoints(1040, 1.0 / 104.0, 20.0), 16);
}

#[test]
fn oracle_verb_prints_the_lattice_table() {
    let dir = tmp("oracle");
    let cfg_path = write_config(&dir, SMALL_OU);
    let out = bin().arg("oracle").arg(&cfg_path).output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,value_regime_0,value_regime_1");
    assert_eq!(lines.len(), 1 + 31 + 1);
    let last: Vec<f64> = lines[32]
        .strip_prefix("x0,")
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    let direct = oracle_table(&RunConfig::from_toml_str(SMALL_OU).unwrap()).unwrap();
    assert_eq!(last, direct.values);
    // Starting long can always mimic starting flat plus an entry.
    assert!(last[0] > 0.0 && last[1] >= last[0]);
}

#[test]
fn toy_run_writes_a_consistent_report() {
    let dir = tmp("toy");
    let cfg = RunConfig::from_toml_str(SMALL_OU).unwrap();
    let opts = RunOptions {
        workers: Some(1),
        out: Some(dir.clone()),
        assert_invariants: true,
    };
    let outcome = run(&cfg, &opts).unwrap();
    let r = &outcome.report;
    assert_eq!(r.problem, "ou-test");
    assert_eq!(r.strategies.len(), 3);
    assert_eq!(r.solver.values_t0.len(), 2);
    assert_eq!(r.storage.full_storage_values, 11 * 2000);
    assert!(r.storage.peak_path_values <= (1 + r.storage.snapshots) * 2000);
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["solver"]["paths"], 2000);
    assert!(json.get("timings").is_none());
    assert!(dir.join("timings.json").exists());
    let truth = oracle_table(&cfg).unwrap().values;
    let rel = (r.solver.values_t0[0] - truth[0]).abs() / truth[0];
    assert!(
        rel < 0.1,
        "solver {:?} vs lattice {truth:?}",
        r.solver.values_t0
    );
}

#[test]
fn power_run_densities_and_determinism() {
    let dir = tmp("power");
    let cfg_path = write_config(&dir, SMALL_POWER);
    let mut reports = Vec::new();
    for workers in ["1", "3"] {
        let out = dir.join(format!("w{workers}"));
        let run = bin()
            .args(["run", "--assert-invariants", "--workers", workers, "--out"])
            .arg(&out)
            .arg(&cfg_path)
            .output()
            .unwrap();
        assert!(
            run.status.success(),
            "{}",
            String::from_utf8_lossy(&run.stderr)
        );
        reports.push(std::fs::read(out.join("report.json")).unwrap());
    }
    assert!(
        reports[0] == reports[1],
        "report.json depends on the worker count"
    );

    let mut rdr = csv::Reader::from_path(dir.join("w1/price_density.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(&headers[6], "mass");
    let mut totals = std::collections::BTreeMap::<(String, String), (f64, u64)>::new();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let e = totals
            .entry((rec[0].to_string(), rec[1].to_string()))
            .or_default();
        e.0 += rec[6].parse::<f64>().unwrap();
        e.1 += rec[5].parse::<u64>().unwrap();
    }
    assert_eq!(totals.len(), 3, "one year for each of three strategies");
    for ((strategy, year), (mass, count)) in &totals {
        assert!(
            (mass - 1.0).abs() <= 1e-12,
            "{strategy} year {year}: mass {mass}"
        );
        // Every path contributes one price per step of the year.
        assert_eq!(*count, 300 * 52, "{strategy} year {year}");
    }

    let json: serde_json::Value = serde_json::from_slice(&reports[0]).unwrap();
    let market = &json["market"];
    assert_eq!(market["price_bound_violations"], 0);
    assert_eq!(market["coverage_violations"], 0);
    assert_eq!(market["fleet_decreases"], 0);
    assert_eq!(json["value_unit"], "EUR");
    for table in [
        "strategy_fleet.csv",
        "terminal_fleet.csv",
        "fleet_vs_peak_fuel.csv",
    ] {
        assert!(dir.join("w1").join(table).exists(), "{table}");
    }
}

#[test]
fn rng_key_changes_results_and_is_echoed() {
    let key = "00112233445566778899aabbccddeeff00112233445566778899aabbccddeeff";
    let dir = tmp("key");
    let keyed = RunConfig::from_toml_str(&format!("rng_key = \"{key}\"\n{SMALL_OU}")).unwrap();
    let plain = RunConfig::from_toml_str(SMALL_OU).unwrap();
    let a = run(
        &keyed,
        &RunOptions {
            workers: None,
            out: Some(dir.join("a")),
            assert_invariants: false,
        },
    )
    .unwrap();
    let b = run(
        &plain,
        &RunOptions {
            workers: None,
            out: Some(dir.join("b")),
            assert_invariants: false,
        },
    )
    .unwrap();
    assert_eq!(a.report.rng_key, key);
    assert_ne!(a.report.solver.values_t0, b.report.solver.values_t0);
    assert!(RunConfig::from_toml_str(&format!("rng_key = \"xyz\"\n{SMALL_OU}")).is_err());
}
