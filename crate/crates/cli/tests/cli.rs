use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn gibbs(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gibbs"))
        .args(args)
        .env("GIBBS_OUTPUT_ROOT", root)
        .env("GIBBS_THREADS", "1")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].parse().unwrap()).collect()
}

const SMALL_RUN: &str = r#"
[model]
kind = "tfi"
L = 8
g = 1.0

[ansatz]
D = 4

[thermal]
chi = 16
t_min = 0.1
t_max = 1.5
points = 12

[tasks]
run = ["thermal", "negativity", "magnetization", "spectrum"]

[output]
dir = "out"
reuse_snapshots = false
"#;

#[test]
fn oracle_two_site_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[model]\nkind = \"tfi\"\nL = 2\ng = 1.0\n[tasks]\nrun = [\"oracle\"]\n");
    let out = gibbs(dir.path(), &["oracle", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let e = column(&dir.path().join("gibbs-out/oracle_spectrum.csv"), "energy");
    let s5 = 5f64.sqrt();
    for (got, want) in e.iter().zip([-s5, -1.0, 1.0, s5]) {
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
    assert_eq!(e.len(), 4);
}

#[test]
fn runs_are_byte_identical_and_manifest_checksums_match() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let cfg = write_config(d.path(), SMALL_RUN);
        let out = gibbs(d.path(), &["run", cfg.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(a.path().join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["complete"], true);
    let files = manifest["files"].as_array().unwrap();
    assert_eq!(files.len(), 5);
    for f in files {
        let name = f["path"].as_str().unwrap();
        let bytes_a = std::fs::read(a.path().join("out").join(name)).unwrap();
        let bytes_b = std::fs::read(b.path().join("out").join(name)).unwrap();
        assert_eq!(bytes_a, bytes_b, "{name} differs between runs");
        let digest: String = Sha256::digest(&bytes_a).iter().map(|x| format!("{x:02x}")).collect();
        assert_eq!(f["sha256"].as_str().unwrap(), digest);
        assert!(!bytes_a.contains(&b'\r'));
    }
    let f = column(&a.path().join("out/thermal.csv"), "F");
    let fe = column(&a.path().join("out/thermal.csv"), "F_exact");
    for (x, y) in f.iter().zip(&fe) {
        assert!(x >= &(y - 1e-10), "variational free energy below exact");
    }
}

#[test]
fn schema_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[model]\nkind = \"tfi\"\nL = 8\nfield = 1\n[tasks]\nrun = [\"oracle\"]\n");
    assert_eq!(gibbs(dir.path(), &["run", cfg.to_str().unwrap()]).status.code(), Some(2));

    let cfg = write_config(
        dir.path(),
        "[model]\nkind = \"tfi\"\nL = 8\n[thermal]\nchi = 4\ntemperatures = [0.5, 0.1]\n[tasks]\nrun = [\"thermal\"]\n",
    );
    let out = gibbs(dir.path(), &["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("thermal.temperatures"));

    assert_eq!(gibbs(dir.path(), &["run"]).status.code(), Some(2));
}

#[test]
fn missing_files_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.toml");
    assert_eq!(gibbs(dir.path(), &["run", missing.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn fit_of_an_empty_table_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("neg.csv");
    std::fs::write(&table, "T,epsilon,epsilon_s,L,D,chi\n").unwrap();
    let out = gibbs(dir.path(), &["fit", table.to_str().unwrap(), "--kind", "cft", "--l", "16"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fit_recovers_a_synthetic_curve() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("neg.csv");
    let l = 16usize;
    let mut text = String::from("T,epsilon_s\n");
    for i in 1..=60 {
        let t = 0.005 * i as f64;
        let lam = std::f64::consts::PI * l as f64 * t;
        let eps = 0.25 * ((1.0 - (-2.0 * lam).exp()) / (2.0 * lam)).ln() + 0.1;
        text.push_str(&format!("{t:.16e},{eps:.16e}\n"));
    }
    std::fs::write(&table, text).unwrap();
    let out = gibbs(dir.path(), &["fit", table.to_str().unwrap(), "--kind", "cft", "--l", "16"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let c_line = stdout.lines().find(|l| l.starts_with("c,")).unwrap();
    let c: f64 = c_line.split(',').nth(1).unwrap().parse().unwrap();
    assert!((c - 0.5).abs() < 1e-8, "{c}");
}

#[test]
fn tmax_subcommand_reads_two_tables() {
    let dir = tempfile::tempdir().unwrap();
    let method = dir.path().join("m.csv");
    let exact = dir.path().join("e.csv");
    std::fs::write(&method, "T,F\n0.1,-1.0\n0.2,-1.0\n0.3,-1.5\n").unwrap();
    std::fs::write(&exact, "T,F\n0.1,-1.0\n0.2,-1.001\n0.3,-2.0\n").unwrap();
    let out = gibbs(dir.path(), &["tmax", method.to_str().unwrap(), exact.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let t_max: f64 = stdout.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(t_max, 0.2);
}
