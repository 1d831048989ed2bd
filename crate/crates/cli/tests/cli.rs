use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rdsnet_core::data::CSV_COLUMNS;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_rdsnet"));
    c.env_remove("RDSNET_OUT_DIR");
    c
}

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic_2024.csv")
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out-dir").arg(out).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn body(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n")
}

fn header_value(path: &Path, key: &str) -> String {
    let text = fs::read_to_string(path).unwrap();
    let prefix = format!("# {key}: ");
    text.lines().find_map(|l| l.strip_prefix(&prefix)).unwrap().to_string()
}

/// Survey CSV from `rows`, each a list of (column, value) pairs.
fn survey(dir: &Path, name: &str, rows: &[&[(&str, &str)]]) -> PathBuf {
    let mut text = CSV_COLUMNS.join(",") + "\n";
    for row in rows {
        let cells: Vec<&str> = CSV_COLUMNS
            .iter()
            .map(|c| row.iter().find(|(k, _)| k == c).map_or("", |(_, v)| *v))
            .collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn validate_accepts_the_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["validate", fixture().to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("0 violations"));
    let report = body(&dir.path().join("validate_report.csv"));
    assert_eq!(report, "severity,kind,rows,message");
}

#[test]
fn validate_rejects_a_duplicated_coupon() {
    let dir = tempfile::tempdir().unwrap();
    let path = survey(
        dir.path(),
        "dup.csv",
        &[
            &[("respondent_id", "A"), ("coupon1", "c1")],
            &[("respondent_id", "B"), ("coupon1", "c2")],
            &[("respondent_id", "C"), ("coupon1", "c1")],
        ],
    );
    let o = run(&["validate", path.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("rows 1,3"), "{}", stdout(&o));
    let report = body(&dir.path().join("validate_report.csv"));
    assert!(report.contains("error,duplicate_coupon,1 3,"), "{report}");
}

#[test]
fn orphan_policy_decides_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let rows: &[&[(&str, &str)]] = &[
        &[("respondent_id", "A"), ("coupon1", "c1")],
        &[("respondent_id", "B"), ("recruiter_coupon", "c1")],
        &[("respondent_id", "C"), ("recruiter_coupon", "zz")],
    ];
    let path = survey(dir.path(), "orphan.csv", rows);
    let o = run(&["validate", path.to_str().unwrap(), "--orphan-policy", "seed"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("0 violations, 1 warnings"), "{}", stdout(&o));
    let o = run(&["validate", path.to_str().unwrap(), "--orphan-policy", "reject"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn invalid_input_to_other_commands_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = survey(
        dir.path(),
        "dup.csv",
        &[&[("respondent_id", "A"), ("coupon1", "c1")], &[("respondent_id", "A")]],
    );
    let o = run(&["mixing", path.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["validate", "/nonexistent/file.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["power", "--n", "50", "--theta", "-2", "--estimand", "nonsense=1", "--rng-seed", "1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    // missing required setting
    let o = run(&["ergm-fit", "--n", "20"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn empty_forest_gives_an_empty_census() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("forest.csv");
    fs::write(&path, "respondent_id,parent_id,wave\n").unwrap();
    let o = run(&["trees", path.to_str().unwrap()], dir.path());
    assert!(o.status.success());
    assert_eq!(body(&dir.path().join("trees_census.csv")), "rank,code,multiplicity,size,depth");
    assert_eq!(body(&dir.path().join("trees_waves.csv")), "wave,respondents");
}

#[test]
fn fixture_reproduces_the_published_tables() {
    let dir = tempfile::tempdir().unwrap();
    let ds = fixture();
    let ds = ds.to_str().unwrap();

    let o = run(&["estimate", ds, "--rng-seed", "3", "--bootstrap", "200", "--by", "gender"], dir.path());
    assert!(o.status.success());
    let all = body(&dir.path().join("estimate_with_seeds_all.csv"));
    let friends: Vec<&str> = all.lines().find(|l| l.starts_with("Close Friendship,")).unwrap().split(',').collect();
    let est: f64 = friends[1].parse().unwrap();
    assert!((2.31..=2.69).contains(&est), "close friendship {est}");
    assert!(dir.path().join("estimate_without_seeds_gender.csv").exists());

    let o = run(&["mixing", ds, "--drop", "other"], dir.path());
    assert!(o.status.success());
    let mixing = body(&dir.path().join("mixing.csv"));
    let rate = |from: &str, to: &str| -> f64 {
        let prefix = format!("{from},{to},");
        mixing.lines().find(|l| l.starts_with(&prefix)).unwrap().rsplit(',').next().unwrap().parse().unwrap()
    };
    assert!((rate("male", "male") - 0.79).abs() < 0.02);
    assert!((rate("female", "male") - 0.60).abs() < 0.02);
    assert!((rate("male", "male") + rate("male", "female") - 1.0).abs() < 1e-12);

    let o = run(&["trees", ds], dir.path());
    assert!(o.status.success());
    let waves = body(&dir.path().join("trees_waves.csv"));
    assert_eq!(waves.lines().count(), 22, "waves 0..=20 plus header");

    let o = run(&["fit", ds, "--rng-seed", "1"], dir.path());
    assert!(o.status.success());
    let sel = body(&dir.path().join("fit_selection.csv"));
    let order: Vec<&str> = sel.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(order.first(), Some(&"zinb"), "{sel}");
    assert_eq!(order.last(), Some(&"poisson"), "{sel}");
    assert!(dir.path().join("fit_result.json").exists());
    let table = fs::read_to_string(dir.path().join("fit_model.txt")).unwrap();
    assert!(table.contains("Conditional model") && table.contains("Zero-inflation model"));
}

#[test]
fn intercept_only_fit_has_an_empty_trace() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["fit", fixture().to_str().unwrap(), "--rng-seed", "1", "--families", "poisson,negbin"], dir.path());
    assert!(o.status.success());
    assert_eq!(body(&dir.path().join("fit_trace.csv")), "step,component,term,aicc,converged,accepted");
}

#[test]
fn outputs_carry_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--n", "300", "--target-sample", "50", "--rng-seed", "12"], dir.path());
    assert!(o.status.success());
    for name in ["simulate_sample.csv", "simulate_forest.csv", "simulate_summary.csv", "simulate_trajectory.csv"] {
        let path = dir.path().join(name);
        assert_eq!(header_value(&path, "command"), "simulate");
        assert_eq!(header_value(&path, "rng_seed"), "12");
        assert_eq!(header_value(&path, "config_sha256").len(), 64);
        assert!(header_value(&path, "tool").starts_with("rdsnet "));
    }
    // the recorded config re-runs to the same bytes
    let config: serde_json::Value =
        serde_json::from_str(&header_value(&dir.path().join("simulate_sample.csv"), "config")).unwrap();
    assert_eq!(config["target_sample"], 50);
    let again = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--n", "300", "--target-sample", "50", "--rng-seed", "12"], again.path());
    assert!(o.status.success());
    assert_eq!(
        fs::read(dir.path().join("simulate_sample.csv")).unwrap(),
        fs::read(again.path().join("simulate_sample.csv")).unwrap()
    );
}

#[test]
fn generated_seed_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--n", "200", "--target-sample", "30"], dir.path());
    assert!(o.status.success());
    let path = dir.path().join("simulate_forest.csv");
    let seed: u64 = header_value(&path, "rng_seed").parse().unwrap();
    let again = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--n", "200", "--target-sample", "30", "--rng-seed", &seed.to_string()], again.path());
    assert!(o.status.success());
    assert_eq!(body(&path), body(&again.path().join("simulate_forest.csv")));
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("from_config");
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        format!(
            "[global]\nout_dir = {:?}\nformat = \"json\"\n\n[simulate]\nn = 250\ntarget_sample = 40\nrng_seed = 5\n",
            out.to_str().unwrap()
        ),
    )
    .unwrap();
    let o = bin().args(["--config", cfg.to_str().unwrap(), "simulate", "--rng-seed", "6"]).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("simulate_summary.json")).unwrap()).unwrap();
    assert_eq!(doc["metadata"]["rng_seed"], 6);
    assert_eq!(doc["metadata"]["config"]["n"], 250);
    let nodes = doc["records"].as_array().unwrap().iter().find(|r| r["metric"] == "population_nodes").unwrap();
    assert_eq!(nodes["value"], 250);

    // unknown keys are rejected
    fs::write(&cfg, "[simulate]\nnodes = 3\n").unwrap();
    let o = bin().args(["--config", cfg.to_str().unwrap(), "simulate"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn out_dir_defaults_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .env("RDSNET_OUT_DIR", dir.path())
        .args(["validate", fixture().to_str().unwrap()])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("validate_zero_skip.csv").exists());
}

#[test]
fn json_sample_round_trips_through_validate() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--n", "300", "--target-sample", "60", "--rng-seed", "2", "--format", "json"], dir.path());
    assert!(o.status.success());
    let sample = dir.path().join("simulate_sample.json");
    let o = run(&["validate", sample.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("60 respondents"));
}

#[test]
fn ergm_fit_writes_fit_and_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["ergm-fit", "--n", "60", "--targets", "354", "--rng-seed", "4"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fit = body(&dir.path().join("ergm_fit.csv"));
    let theta: f64 = fit.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    // 354 of 1770 dyads is density 0.2
    assert!((theta - (0.2f64 / 0.8).ln()).abs() < 0.1, "theta {theta}");
    assert!(body(&dir.path().join("ergm_trajectory.csv")).lines().count() > 1);
}
