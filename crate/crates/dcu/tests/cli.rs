use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dcu::{compare, parse_scenario, Manifest, RunError};

fn dcu(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dcu"))
        .args(args)
        .env_remove("DCU_THREADS")
        .output()
        .unwrap()
}

fn scenario(tag: &str, steps: usize, paths: usize, seed: u64, checks: &str) -> String {
    format!(
        r#"name = "t"
[model]
kind = "brownian"
[endowment]
expr = "x"
[core]
tag = "{tag}"
[solver]
steps = {steps}
paths = {paths}
seed = {seed}
[checks]
list = [{checks}]
controls = 5
samples = 500
draws = 1
"#
    )
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run_to(config: &Path, out: &Path, threads: &str) {
    let o = dcu(&["--threads", threads, "--out", out.to_str().unwrap(), "run", config.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn minimal_run_writes_one_row_per_grid_node() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", &scenario("entropic", 64, 2000, 1, ""));
    let out = dir.path().join("out");
    run_to(&cfg, &out, "1");
    let text = fs::read_to_string(out.join("solution.csv")).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "step,t,Y0_regression_value,Z0,R2,clip_count");
    assert_eq!(lines.len() - 1, 65);
    assert!(out.join("manifest.json").exists());
    assert!(!out.join("duality_gaps.csv").exists());
}

#[test]
fn identical_configs_give_identical_bytes_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.toml",
        &scenario("drift_band", 16, 6000, 5, r#""duality", "axioms", "inequalities", "admissibility""#),
    );
    let outs: Vec<PathBuf> = ["1", "4", "8", "1"]
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let o = dir.path().join(format!("o{i}"));
            run_to(&cfg, &o, t);
            o
        })
        .collect();
    for name in ["solution.csv", "duality_gaps.csv", "axioms.csv", "inequalities.csv", "admissibility.csv", "manifest.json"] {
        let first = fs::read(outs[0].join(name)).unwrap();
        for o in &outs[1..] {
            assert_eq!(first, fs::read(o.join(name)).unwrap(), "{name}");
        }
    }
}

#[test]
fn unknown_tag_exits_two_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", &scenario("no_such_core", 4, 10, 1, ""));
    let o = dcu(&["run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("no_such_core"), "{err}");
    assert!(err.contains("s.toml:7"), "{err}");
}

#[test]
fn validation_errors_are_line_anchored() {
    let p = Path::new("x.toml");
    let base = scenario("entropic", 4, 10, 1, "");
    let cases = [
        (base.replace("seed = 1\n", ""), None),
        (base.replace("steps = 4", "steps = 0"), Some(9)),
        (base.replace("expr = \"x\"", "expr = \"x + y\""), Some(5)),
        (base.replace("list = []", "list = [\"duality\", \"plots\"]"), Some(13)),
        (base.replace("kind = \"brownian\"", "kind = \"levy\""), Some(3)),
        (base.replace("[core]", "[core]\nbogus = 1"), Some(7)),
    ];
    for (text, line) in cases {
        match parse_scenario(&text, p, None) {
            Err(RunError::Config { line: l, message, .. }) => {
                if let Some(line) = line {
                    assert_eq!(l, line, "{message}");
                }
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }
}

#[test]
fn missing_table_is_reported_before_compute() {
    let text = scenario("entropic", 4, 10, 1, "").replace("tag = \"entropic\"", "table = \"nope.csv\"\nclass = \"A1\"");
    let err = parse_scenario(&text, Path::new("/tmp/x.toml"), None).unwrap_err();
    assert!(err.to_string().contains("nope.csv"), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn compare_reports_seed_and_refinement() {
    let dir = tempfile::tempdir().unwrap();
    let mk = |name: &str, steps, seed| {
        let cfg = write(dir.path(), &format!("{name}.toml"), &scenario("entropic", steps, 3000, seed, ""));
        let out = dir.path().join(name);
        run_to(&cfg, &out, "1");
        Manifest::read(&out.join("manifest.json")).unwrap()
    };
    let a = mk("a", 8, 1);
    let a2 = mk("a2", 8, 1);
    let b = mk("b", 8, 2);
    let c = mk("c", 16, 1);
    assert!(compare(&a, &a2).is_empty());

    let d = compare(&a, &b);
    assert!(d.config.iter().any(|f| f.key == "solver.seed"));
    let y0 = d.results.iter().find(|f| f.key == "y0").unwrap();
    assert!((y0.delta.unwrap() - (b.results.y0 - a.results.y0)).abs() < 1e-15);
    assert!(d.refinement.is_none());

    let r = compare(&a, &c).refinement.unwrap();
    assert_eq!(r.steps, (8, 16));
    assert!((r.abs_delta_y0 - (c.results.y0 - a.results.y0).abs()).abs() < 1e-15);

    let o = dcu(&[
        "compare",
        dir.path().join("a/manifest.json").to_str().unwrap(),
        dir.path().join("b/manifest.json").to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("solver.seed"));
}

#[test]
fn tabulated_core_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut table = String::from("q,f\n");
    for i in 0..=800 {
        let q = -4.0 + 0.01 * i as f64;
        table.push_str(&format!("{q},{}\n", 0.5 * q * q));
    }
    write(dir.path(), "f.csv", &table);
    let text = scenario("entropic", 8, 3000, 1, "\"duality\"")
        .replace("tag = \"entropic\"", "table = \"f.csv\"\nclass = \"A1\"\nz_min = -3.0\nz_max = 3.0\nz_points = 601");
    let cfg = write(dir.path(), "s.toml", &text);
    let out = dir.path().join("out");
    run_to(&cfg, &out, "1");
    let m = Manifest::read(&out.join("manifest.json")).unwrap();
    assert!((m.results.y0 + 0.5).abs() < 0.1, "{}", m.results.y0);
}

#[test]
fn thread_count_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", &scenario("entropic", 4, 500, 1, ""));
    let o = Command::new(env!("CARGO_BIN_EXE_dcu"))
        .args(["--out", dir.path().join("o").to_str().unwrap(), "run", cfg.to_str().unwrap()])
        .env("DCU_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success());
    let bad = Command::new(env!("CARGO_BIN_EXE_dcu"))
        .args(["run", cfg.to_str().unwrap()])
        .env("DCU_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
