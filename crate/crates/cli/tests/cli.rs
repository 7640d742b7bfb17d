use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_modelmarket"));
    cmd.env_remove("MARKETGAME_OUT");
    cmd
}

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    bin()
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn rps_run_cycles_without_equilibria() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"instance": {"builtin": "c1_rps"}}"#);
    let out = run(&["run"], &cfg, &tmp.path().join("o"));
    assert_ok(&out);
    let s = json(tmp.path().join("o/summary.json"));
    assert_eq!(s["outcome"], "cycle");
    assert_eq!(s["pne_count"], 0);
    assert!(s["cycle"].as_array().unwrap().len() >= 2);
}

#[test]
fn fig2_a_reaches_a_differentiated_equilibrium() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"instance": {"builtin": "fig2_a"}, "dynamics": {"start": ["g1", "g1"]}}"#,
    );
    assert_ok(&run(&["run"], &cfg, &tmp.path().join("o")));
    let s = json(tmp.path().join("o/summary.json"));
    assert_eq!(s["outcome"], "equilibrium");
    let eq: Vec<&str> = s["equilibrium"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(eq == ["g1", "g2"] || eq == ["g2", "g1"], "{eq:?}");
    assert_eq!(s["welfare"].as_f64().unwrap(), 0.85);
}

#[test]
fn zero_max_steps_is_rejected_before_running() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        "{\n  \"instance\": {\"builtin\": \"c1_rps\"},\n  \"dynamics\": {\"max_steps\": 0}\n}\n",
    );
    let out = run(&["run"], &cfg, &tmp.path().join("o"));
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("c.json:3:") && err.contains("max_steps"), "{err}");
    assert!(!tmp.path().join("o/summary.json").exists());
}

#[test]
fn syntax_errors_name_the_line() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", "{\n  \"instance\": {\"builtin\": \"c1_rps\"},\n  oops\n}\n");
    let out = run(&["run"], &cfg, &tmp.path().join("o"));
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("c.json:3:"));
}

#[test]
fn builtin_fixtures_verify() {
    let out = bin().arg("verify-fixtures").output().unwrap();
    assert_ok(&out);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("0 unexpected mismatches"), "{text}");
    let strict = bin().args(["verify-fixtures", "--strict"]).output().unwrap();
    assert_eq!(strict.status.code(), Some(1));
}

#[test]
fn corrupted_fixture_fails_verification() {
    let tmp = TempDir::new().unwrap();
    let source = fs::read_to_string(repo().join("crates/core/data/fixtures/fig2_a.json")).unwrap();
    let mut fixture: Value = serde_json::from_str(&source).unwrap();
    fixture["instance"]["scores"][0][0] = Value::from(0.5);
    fs::write(tmp.path().join("fig2_a.json"), serde_json::to_string_pretty(&fixture).unwrap()).unwrap();
    let out = bin().args(["verify-fixtures", "--dir"]).arg(tmp.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("[MISMATCH] fig2_a"), "{text}");
}

#[test]
fn unknown_fixture_name_is_a_configuration_error() {
    let out = bin().args(["verify-fixtures", "--name", "no_such_fixture"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_fixture"));
}

#[test]
fn list_shows_every_builtin() {
    let out = bin().arg("list-fixtures").output().unwrap();
    assert_ok(&out);
    let text = String::from_utf8_lossy(&out.stdout);
    for name in ["c1_rps", "fig2_a", "fig3_b", "c8_players_3", "llm_pool3", "simu_appendix_d"] {
        assert!(text.contains(name), "{name}");
    }
}

fn sweep_files(dir: &Path) -> Vec<Vec<u8>> {
    ["sweep_long.csv", "sweep_summary.csv", "sweep_summary.json"]
        .iter()
        .map(|f| fs::read(dir.join(f)).unwrap())
        .collect()
}

#[test]
fn sweeps_are_byte_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"instance": {"builtin": "c8_players_2"}, "sweep": {"axis": "platforms", "values": [2, 3], "repetitions": 3}}"#,
    );
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_ok(&run(&["sweep", "--seed", "4", "--jobs", "1"], &cfg, &a));
    assert_ok(&run(&["sweep", "--seed", "4", "--jobs", "4"], &cfg, &b));
    assert_eq!(sweep_files(&a), sweep_files(&b));

    let s = json(a.join("sweep_summary.json"));
    let cells = s["cells"].as_array().unwrap();
    let starts: std::collections::HashSet<String> =
        cells.iter().filter(|c| c["sweep_value"] == "3").map(|c| c["start"].to_string()).collect();
    assert_eq!(starts.len(), 3);
    let steps: u64 = cells.iter().map(|c| c["steps"].as_u64().unwrap()).sum();
    let long = fs::read_to_string(a.join("sweep_long.csv")).unwrap();
    assert_eq!(long.lines().count() as u64, steps + 1);
}

#[test]
fn single_platform_welfare_is_the_best_average() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"instance": {"builtin": "fig3_b"}, "sweep": {"axis": "platforms", "values": [1, 2, 3], "repetitions": 2}}"#,
    );
    assert_ok(&run(&["sweep"], &cfg, &tmp.path().join("o")));
    let s = json(tmp.path().join("o/sweep_summary.json"));
    for c in s["cells"].as_array().unwrap() {
        if c["sweep_value"] == "1" {
            // averages are 0.625, 0.825 and 0.84
            assert!((c["welfare"].as_f64().unwrap() - 0.84).abs() < 1e-9);
        }
        assert!(c["welfare"].as_f64().unwrap() <= c["social_optimum"].as_f64().unwrap() + 1e-12);
    }
}

#[test]
fn adding_g3_lowers_welfare() {
    let tmp = TempDir::new().unwrap();
    let out = run(&["sweep"], &repo().join("configs/sweep_models_fig3.json"), &tmp.path().join("o"));
    assert_ok(&out);
    let s = json(tmp.path().join("o/sweep_summary.json"));
    for c in s["cells"].as_array().unwrap() {
        let expected = if c["sweep_value"] == "2" { 0.85 } else { 0.84 };
        assert_eq!(c["welfare"].as_f64().unwrap(), expected);
    }
}

#[test]
fn output_directory_from_environment() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"instance": {"builtin": "fig2_b"}}"#);
    let env_dir = tmp.path().join("from_env");
    let out = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .env("MARKETGAME_OUT", &env_dir)
        .output()
        .unwrap();
    assert_ok(&out);
    assert!(env_dir.join("summary.json").exists());
    assert!(env_dir.join("steps.csv").exists());
}

#[test]
fn entry_on_the_toy_market_adopts_the_direct_entrant() {
    let tmp = TempDir::new().unwrap();
    let out = run(&["entry"], &repo().join("configs/entry_toy.json"), &tmp.path().join("o"));
    assert_ok(&out);
    let s = json(tmp.path().join("o/entry_summary.json"));
    let methods = s["methods"].as_array().unwrap();
    let direct = methods.iter().find(|m| m["method"] == "direct").unwrap();
    assert_eq!(direct["entrant_adopted_in_pne"], true);
    assert!(direct["final_objective"].as_f64().unwrap() > direct["initial_objective"].as_f64().unwrap());
    let trace = fs::read_to_string(tmp.path().join("o/trace_direct.csv")).unwrap();
    assert!(trace.starts_with("epoch,cross_entropy,objective,loss,learning_rate,score_A"));
    assert!(tmp.path().join("o/trace_resampling.csv").exists());
}

#[test]
fn entry_without_competitive_pressure_keeps_the_base_scores() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"training": {"methods": ["direct"], "settings": {"lambda": 0.0, "epochs": 5}}}"#,
    );
    assert_ok(&run(&["entry"], &cfg, &tmp.path().join("o")));
    let s = json(tmp.path().join("o/entry_summary.json"));
    let base = s["base_scores"].as_array().unwrap();
    let after = s["methods"][0]["final_scores"].as_array().unwrap();
    for (a, b) in base.iter().zip(after) {
        assert!((a.as_f64().unwrap() - b.as_f64().unwrap()).abs() < 1e-6);
    }
}

#[test]
fn resampling_without_updates_duplicates_the_base_row() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"training": {"methods": ["resampling"], "settings": {"outer_rounds": 1, "inner_epochs": 0}}}"#,
    );
    assert_ok(&run(&["entry"], &cfg, &tmp.path().join("o")));
    let s = json(tmp.path().join("o/entry_summary.json"));
    let m = &s["methods"][0];
    assert_eq!(m["final_scores"], s["base_scores"]);
    let before: Vec<&Value> = s["before"]["models"].as_array().unwrap().iter().collect();
    let after: Vec<&Value> = m["after"]["models"].as_array().unwrap().iter().collect();
    assert_eq!(&after[..before.len()], &before[..]);
    assert_eq!(after.len(), before.len() + 1);
}

#[test]
fn entry_runs_are_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = repo().join("configs/entry_toy.json");
    assert_ok(&run(&["entry"], &cfg, &tmp.path().join("a")));
    assert_ok(&run(&["entry"], &cfg, &tmp.path().join("b")));
    for f in ["entry_summary.json", "trace_direct.csv", "trace_resampling.csv"] {
        assert_eq!(fs::read(tmp.path().join("a").join(f)).unwrap(), fs::read(tmp.path().join("b").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn every_example_config_runs() {
    let tmp = TempDir::new().unwrap();
    let mut entries: Vec<_> = fs::read_dir(repo().join("configs")).unwrap().map(|e| e.unwrap().path()).collect();
    entries.sort();
    assert!(!entries.is_empty());
    for path in entries {
        let name = path.file_stem().unwrap().to_string_lossy().into_owned();
        let command = name.split('_').next().unwrap();
        let out = run(&[command], &path, &tmp.path().join(&name));
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
}
