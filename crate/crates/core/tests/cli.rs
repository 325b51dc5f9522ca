//! End-to-end runs of the `crowdlab` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL_PANIC: &str = "[run]\nscenario = \"panic\"\n[solver]\nt_end = 0.1\n";

fn crowdlab(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_crowdlab"));
    cmd.args(args).env_remove("CROWDLAB_OUT");
    if let Some(p) = env_out {
        cmd.env("CROWDLAB_OUT", p);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn run_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "panic.toml", SMALL_PANIC);
    let out = tmp.path().join("out");
    let o = crowdlab(&["run", &cfg, "--out", out.to_str().unwrap(), "--frames"], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dir = out.join("panic");
    let metrics = fs::read_to_string(dir.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("t,pop,mass,linf,tv,support_ok,evac_frac\n"));
    assert!(dir.join("final_0.txt").exists());
    assert!(dir.join("frames").join("frame_0_0.pgm").exists());
    let manifest: toml::Table = fs::read_to_string(dir.join("run.toml")).unwrap().parse().unwrap();
    let consts = manifest["constants"].as_table().unwrap();
    for key in ["linf_growth", "lip_v_0", "lip_eta_0", "sup_nu_0", "mass", "kernel_norm_0"] {
        assert!(consts.contains_key(key), "missing constant {key}");
    }
    let bound = &manifest["bound"].as_array().unwrap()[0];
    for key in bound["constants"].as_array().unwrap() {
        assert!(consts.contains_key(key.as_str().unwrap()));
    }
    assert_eq!(manifest["config"]["run"]["scenario"].as_str(), Some("panic"));
}

#[test]
fn same_seed_gives_identical_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "panic.toml", SMALL_PANIC);
    let read = |sub: &str| {
        let out = tmp.path().join(sub);
        assert_eq!(code(&crowdlab(&["run", &cfg, "--out", out.to_str().unwrap()], None)), 0);
        fs::read(out.join("panic").join("metrics.csv")).unwrap()
    };
    assert_eq!(read("a"), read("b"));
}

#[test]
fn output_root_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "panic.toml", SMALL_PANIC);
    let root = tmp.path().join("env_root");
    assert_eq!(code(&crowdlab(&["run", &cfg, "--until", "0.05"], Some(&root))), 0);
    let metrics = fs::read_to_string(root.join("panic").join("metrics.csv")).unwrap();
    let last_t: f64 = metrics.lines().last().unwrap().split(',').next().unwrap().parse().unwrap();
    assert!((last_t - 0.05).abs() < 1e-12);
}

#[test]
fn empty_crowd_runs_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "zero.toml", "[run]\nscenario = \"panic\"\ndensity_scale = 0.0\n[solver]\nt_end = 0.1\n");
    let out = tmp.path().join("out");
    let o = crowdlab(&["run", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let metrics = fs::read_to_string(out.join("panic").join("metrics.csv")).unwrap();
    for row in metrics.lines().skip(1) {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f[2].parse::<f64>().unwrap(), 0.0);
        assert_eq!(f[3].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn invalid_input_exits_with_validation_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        "[run]\nscenario = \"panic\"\n[solver]\ncfl = 0.9\n",
        "[run]\nscenario = \"panic\"\n[solver]\nunknown_key = 1\n",
        "[run]\nscenario = \"nowhere\"\n",
    ];
    for (k, text) in cases.iter().enumerate() {
        let cfg = write_config(tmp.path(), &format!("bad{k}.toml"), text);
        let o = crowdlab(&["run", &cfg, "--out", tmp.path().to_str().unwrap()], None);
        assert_eq!(code(&o), 2, "case {k}");
    }
    let missing = tmp.path().join("absent.toml");
    assert_eq!(code(&crowdlab(&["run", missing.to_str().unwrap()], Some(tmp.path()))), 2);
    assert_eq!(code(&crowdlab(&["verify", "everything"], None)), 2);
}

#[test]
fn compare_identical_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "panic.toml", SMALL_PANIC);
    let out = tmp.path().join("out");
    assert_eq!(code(&crowdlab(&["run", &cfg, "--out", out.to_str().unwrap()], None)), 0);
    let dir = out.join("panic");
    let d = dir.to_str().unwrap();
    for metric in ["l1", "w1"] {
        let o = crowdlab(&["compare", d, d, "--metric", metric], None);
        assert_eq!(code(&o), 0);
        let v: f64 = String::from_utf8_lossy(&o.stdout).trim().parse().unwrap();
        assert!(v.abs() < 1e-12, "{metric}: {v}");
    }
    let o = crowdlab(&["compare", d, tmp.path().to_str().unwrap(), "--metric", "l1"], None);
    assert_eq!(code(&o), 2);
}

#[test]
fn verify_reports_one_line() {
    let o = crowdlab(&["verify", "7"], None);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("criterion  7 PASS"));
}
