use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use annihilation_kinetics::dsmc::derive_seed;
use annihilation_kinetics::Trajectory;
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_annihilation-kinetics");

const SMALL: &str = "\
# small annihilating run
dim = 3
alpha = 0.05
particle_count = 8000
seed = 42
min_particles = 1500
pair_samples = 5000
";

fn ak(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_cfg(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn simulate(cfg: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["simulate", "--config", cfg, "--out-dir", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    ak(&args)
}

fn reports(path: &Path) -> Vec<Value> {
    serde_json::from_str::<Value>(&fs::read_to_string(path).unwrap())
        .unwrap()
        .as_array()
        .unwrap()
        .clone()
}

fn all_pass(rs: &[Value]) -> bool {
    rs.iter().all(|r| r["status"] == "pass")
}

#[test]
fn simulate_writes_outputs_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "run.cfg", SMALL);
    let out = tmp.path().join("run");
    let o = simulate(&cfg, &out, &["--svg"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = stdout(&o);
    for key in ["termination   min_particles", "n ", "T ", "tau", "collisions", "annihilations"] {
        assert!(s.contains(key), "{s}");
    }
    for f in [
        "run.cfg",
        "checkpoint.bin",
        "moments.csv",
        "coefficients.csv",
        "snapshots.csv",
        "histograms.csv",
        "trajectory.json",
        "profile.csv",
        "moments.svg",
        "profile.svg",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let t = Trajectory::read_dir(&out).unwrap();
    assert!(t.samples.last().unwrap().count < 1500);
}

#[test]
fn reruns_are_bit_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "run.cfg", SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        assert_eq!(code(&simulate(&cfg, dir, &["--shards", "2"])), 0);
    }
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 8);
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{n:?} differs");
    }
}

#[test]
fn seed_flag_changes_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "run.cfg", SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    simulate(&cfg, &a, &[]);
    simulate(&cfg, &b, &["--seed", "7"]);
    assert_ne!(fs::read(a.join("checkpoint.bin")).unwrap(), fs::read(b.join("checkpoint.bin")).unwrap());
    assert!(fs::read_to_string(b.join("run.cfg")).unwrap().contains("seed = 7"));
}

#[test]
fn invalid_alpha_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "bad.cfg", "dim = 3\nalpha = 1.0\n");
    let o = simulate(&cfg, &tmp.path().join("x"), &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("field `alpha`"), "{}", stderr(&o));

    let cfg = write_cfg(tmp.path(), "typo.cfg", "dim = 3\nparticle_count = lots\n");
    let o = simulate(&cfg, &tmp.path().join("y"), &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn resume_continues_an_uninterrupted_run() {
    let tmp = tempfile::tempdir().unwrap();
    let early = write_cfg(tmp.path(), "early.cfg", &SMALL.replace("min_particles = 1500", "min_particles = 4000"));
    let full_cfg = write_cfg(tmp.path(), "full.cfg", SMALL);
    let (part, full) = (tmp.path().join("part"), tmp.path().join("full"));
    assert_eq!(code(&simulate(&early, &part, &[])), 0);
    assert_eq!(code(&simulate(&full_cfg, &full, &[])), 0);
    let o = ak(&["resume", "--out-dir", part.to_str().unwrap(), "--config", &full_cfg]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(
        fs::read(part.join("checkpoint.bin")).unwrap(),
        fs::read(full.join("checkpoint.bin")).unwrap()
    );
    // The stop at the break adds its own final records; everything else matches.
    let (p, f) = (Trajectory::read_dir(&part).unwrap(), Trajectory::read_dir(&full).unwrap());
    assert!(f.samples.iter().all(|s| p.samples.contains(s)));
    assert!(f.snapshots.iter().all(|s| p.snapshots.contains(s)));
    assert_eq!(p.termination.as_deref(), Some("min_particles"));
}

#[test]
fn resume_refuses_a_different_alpha() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "run.cfg", SMALL);
    let other = write_cfg(tmp.path(), "other.cfg", &SMALL.replace("alpha = 0.05", "alpha = 0.02"));
    let out = tmp.path().join("run");
    simulate(&cfg, &out, &[]);
    let o = ak(&["resume", "--out-dir", out.to_str().unwrap(), "--config", &other]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn analysis_commands_emit_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "run.cfg", SMALL);
    let out = tmp.path().join("run");
    simulate(&cfg, &out, &[]);
    let dir = out.to_str().unwrap();

    let o = ak(&["diagnose", "--out-dir", dir]);
    let rs = reports(&out.join("diagnostics.json"));
    let names: Vec<&str> = rs.iter().map(|r| r["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["product_bound", "m1_bound", "entropy_balance", "lower_bound", "exp_moment"]);
    for r in &rs {
        for key in ["name", "status", "margin", "tolerance", "details"] {
            assert!(r.get(key).is_some(), "{r}");
        }
    }
    assert_eq!(code(&o) == 0, all_pass(&rs));

    let o = ak(&["rates", "--out-dir", dir]);
    let rs = reports(&out.join("rates.json"));
    assert_eq!(rs.len(), 2);
    assert_eq!(code(&o) == 0, all_pass(&rs), "{}", stdout(&o));
    assert!(stdout(&o).contains("-0.9231"));

    fs::remove_file(out.join("profile.csv")).unwrap();
    let o = ak(&["profile", "--out-dir", dir, "--svg", "--burn-in", "4"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("tau >= 4"));
    let csv = fs::read_to_string(out.join("profile.csv")).unwrap();
    assert!(csv.starts_with("r_mid,density,stderr\n"));
    assert!(out.join("profile.svg").exists());
}

#[test]
fn rates_fail_on_a_run_without_tail() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "run.cfg", &format!("{SMALL}max_steps = 5\n"));
    let out = tmp.path().join("run");
    simulate(&cfg, &out, &[]);
    let o = ak(&["rates", "--out-dir", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("insufficient data"), "{}", stderr(&o));
}

#[test]
fn sweep_runs_each_alpha_with_derived_seeds() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        "sweep.cfg",
        "particle_count = 6000\ninitial = uniform_ball\nmax_steps = 150\nsnapshot_interval = 1\n\
         pair_samples = 4000\nmin_particles = 100\nseed = 3\n",
    );
    let out = tmp.path().join("sweep");
    let o = ak(&["sweep", "--alphas", "0,0.05", "--config", &cfg, "--out-dir", out.to_str().unwrap()]);
    let rs = reports(&out.join("sweep.json"));
    assert_eq!(rs[0]["name"], "rate_alpha_independence");
    assert_eq!(code(&o) == 0, all_pass(&rs), "{}", stdout(&o));
    for (i, a) in ["0", "0.05"].iter().enumerate() {
        let text = fs::read_to_string(out.join(format!("alpha_{a}")).join("run.cfg")).unwrap();
        assert!(text.contains(&format!("seed = {}", derive_seed(3, i as u64))), "{text}");
    }
}

#[test]
fn sweep_needs_two_alphas() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ak(&["sweep", "--alphas", "0.05", "--out-dir", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("at least two"), "{}", stderr(&o));
}

#[test]
fn verify_constants_table() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ak(&["verify-constants", "--dims", "2,3", "--out-dir", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    let row3 = s.lines().find(|l| l.trim_start().starts_with("3 ")).unwrap();
    assert!(row3.contains("0.1428571429") && row3.contains("1.5957691216") && row3.contains("0.9230769231"));
    let row2 = s.lines().find(|l| l.trim_start().starts_with("2 ")).unwrap();
    assert!(row2.contains("0.8888888889"));
    let rs = reports(&tmp.path().join("constants.json"));
    assert!(rs.iter().all(|r| r["margin"].as_f64().unwrap() < 1e-10));
    assert_eq!(code(&ak(&["verify-constants", "--dims", "1"])), 2);
}

#[test]
fn help_config_lists_every_key() {
    let o = ak(&["--help-config"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    for key in annihilation_kinetics::SimConfig::default().to_text().lines() {
        let k = key.split(" = ").next().unwrap();
        assert!(s.contains(k), "{k}");
    }
}

#[test]
fn thread_cap_is_validated() {
    let o = Command::new(BIN)
        .args(["verify-constants", "--dims", "3"])
        .env("ANNIHILATION_KINETICS_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    let o = Command::new(BIN)
        .args(["verify-constants", "--dims", "3"])
        .env("ANNIHILATION_KINETICS_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
}
