//! End-to-end tests of the command-line interface: scenario validation,
//! output formats, and exit codes.

use std::io::Write;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_quasidual"));
    c.env_remove("QUASIDUAL_SEED");
    c
}

fn write_scenario(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.path().join(name);
    let mut f = std::fs::File::create(&path).unwrap();
    f.write_all(body.as_bytes()).unwrap();
    path
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

const ENTROPIC_FIXTURE: &str = "crates/cli/tests/fixtures/entropic.toml";

fn fixture() -> std::path::PathBuf {
    // tests run from the crate directory; the fixture lives next to them
    let here = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    here.join("tests/fixtures/entropic.toml")
}

#[test]
fn eval_prints_the_primal_value() {
    let out = bin().arg("eval").arg(fixture()).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let s = stdout(&out);
    assert!(s.starts_with("schema_version,atom,value\n"));
    assert!(s.contains("1,u+d,0.693147180560"), "{s}");
}

#[test]
fn gap_exit_code_tracks_tolerance() {
    let out = bin().arg("gap").arg(fixture()).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let s = stdout(&out);
    assert!(s.starts_with("schema_version,atom,primal,dual,gap,argmax_weights,iterations\n"));
    assert!(s.contains("0.693147180560"), "{s}");

    let out = bin()
        .args(["gap", "--tol", "1e-15"])
        .arg(fixture())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn h_reports_vertex_argmax_for_worst_case() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(
        &dir,
        "wc.toml",
        r#"
[space]
labels = ["a", "b"]
probs = [0.5, 0.5]
[g]
atoms = [["a", "b"]]
[map]
family = "worst_case"
[x.values]
a = 1.0
b = 3.0
"#,
    );
    let out = bin().arg("h").arg(&path).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let s = stdout(&out);
    assert!(s.contains(",3.000000000000,"), "{s}");
    assert!(s.contains("\"0.000000000000,1.000000000000\""), "{s}");
}

#[test]
fn k_requires_a_density_section() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(
        &dir,
        "noq.toml",
        r#"
[space]
labels = ["a", "b"]
probs = [0.5, 0.5]
[g]
atoms = [["a", "b"]]
[map]
family = "worst_case"
[x.values]
a = 1.0
b = 3.0
"#,
    );
    let out = bin().arg("k").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("[q]"));
}

#[test]
fn bad_probabilities_are_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(
        &dir,
        "bad.toml",
        r#"
[space]
labels = ["a", "b"]
probs = [0.5, 0.4]
[g]
atoms = [["a", "b"]]
[map]
family = "worst_case"
[x.values]
a = 1.0
b = 3.0
"#,
    );
    let out = bin().arg("eval").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).to_lowercase().contains("sum"), "{}", stderr(&out));
}

#[test]
fn unknown_family_lists_the_supported_ones() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(
        &dir,
        "fam.toml",
        r#"
[space]
labels = ["a"]
probs = [1.0]
[g]
atoms = [["a"]]
[map]
family = "unheard_of"
[x.values]
a = 0.0
"#,
    );
    let out = bin().arg("eval").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("entropic") && err.contains("worst_case"), "{err}");
}

#[test]
fn log_utility_rejects_nonpositive_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(
        &dir,
        "cce.toml",
        r#"
[space]
labels = ["a", "b"]
probs = [0.5, 0.5]
[g]
atoms = [["a", "b"]]
[map]
family = "cce"
utility = "log"
[x.values]
a = -1.0
b = 2.0
"#,
    );
    let out = bin().arg("eval").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).to_lowercase().contains("domain"), "{}", stderr(&out));
}

#[test]
fn numeric_csv_fields_round_trip() {
    let out = bin().arg("gap").arg(fixture()).output().unwrap();
    assert!(out.status.success());
    let s = stdout(&out);
    let data_line = s.lines().nth(1).unwrap();
    // split, honoring the quoted weights field
    let mut fields: Vec<String> = Vec::new();
    let mut in_quotes = false;
    let mut cur = String::new();
    for ch in data_line.chars() {
        match ch {
            '"' => in_quotes = !in_quotes,
            ',' if !in_quotes => {
                fields.push(std::mem::take(&mut cur));
            }
            _ => cur.push(ch),
        }
    }
    fields.push(cur);
    // primal, dual, gap and each weight reparse to the printed value
    for field in fields[2..5]
        .iter()
        .map(|s| s.as_str())
        .chain(fields[5].split(','))
    {
        let v: f64 = field.parse().expect("numeric field parses");
        assert_eq!(format!("{v:.12}"), *field.trim());
    }
}

#[test]
fn props_is_deterministic_and_reports_failures_in_exit_code() {
    let a = bin().args(["props", "--seed", "7", "--cases", "2"]).output().unwrap();
    let b = bin().args(["props", "--seed", "7", "--cases", "2"]).output().unwrap();
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let s = stdout(&a);
    assert!(s.starts_with("schema_version,check,cases,failures,max_deviation\n"));
    assert!(s.contains("suite: PASS"));
}

#[test]
fn seed_env_var_is_honored_as_default() {
    let with_flag = bin().args(["props", "--seed", "9", "--cases", "1"]).output().unwrap();
    let mut env_cmd = Command::new(env!("CARGO_BIN_EXE_quasidual"));
    let with_env = env_cmd
        .env("QUASIDUAL_SEED", "9")
        .args(["props", "--cases", "1"])
        .output()
        .unwrap();
    assert_eq!(with_flag.stdout, with_env.stdout);
}

#[test]
fn oracle_agrees_with_the_engine_on_the_fixture() {
    let out = bin()
        .args(["oracle", "--step", "0.05", "--box", "5"])
        .arg(fixture())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let s = stdout(&out);
    let line = s.lines().nth(1).unwrap();
    let cols: Vec<&str> = line.split(',').collect();
    let grid: f64 = cols[2].parse().unwrap();
    let engine: f64 = cols[4].parse().unwrap();
    let bound: f64 = cols[5].parse().unwrap();
    let step: f64 = cols[6].parse().unwrap();
    assert!(grid >= engine - 1e-6);
    assert!(grid - engine <= bound * step + 1e-6);
}

#[test]
fn coarsen_sweep_respects_an_explicit_gamma() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(
        &dir,
        "coarse.toml",
        r#"
[space]
labels = ["a", "b", "c", "d"]
probs = [0.25, 0.25, 0.25, 0.25]
[g]
atoms = [["a"], ["b"], ["c", "d"]]
[gamma]
atoms = [["a", "b"], ["c", "d"]]
[map]
family = "worst_case"
[x.values]
a = 1.0
b = 3.0
c = 5.0
d = 7.0
"#,
    );
    let out = bin().arg("coarsen-sweep").arg(&path).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let s = stdout(&out);
    assert_eq!(s.lines().count(), 3, "{s}"); // header + one row per block
    assert!(s.contains("1,a+b;c+d,a+b,3.000000000000"), "{s}");
    assert!(s.contains("7.000000000000"), "{s}");
}

#[test]
fn unused_fixture_path_constant_matches_layout() {
    // keep the workspace-relative path documented and valid
    assert!(std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(ENTROPIC_FIXTURE)
        .exists());
}
