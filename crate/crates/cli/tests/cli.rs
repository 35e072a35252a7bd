use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn qfluct(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qfluct"))
        .args(args)
        .env("CF_OUT_DIR", out)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run_dir(stdout: &[u8]) -> PathBuf {
    let s = String::from_utf8_lossy(stdout);
    let line = s.lines().find(|l| l.starts_with("run directory: ")).expect("run directory line");
    PathBuf::from(line.trim_start_matches("run directory: "))
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

const SMALL_ORACLE: &str = r#"{"scenario": {"m_modes": 3, "n": 2, "n_max": 6, "t_final": 0.1}, "sample_every": 5}"#;

#[test]
fn zero_potential_scattering_is_all_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", r#"{"potential": {"v0": 0.0}, "n_list": [100, 1000], "mesh_points": 2000}"#);
    let o = qfluct(&["scattering-study", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(run_dir(&o.stdout).join("scattering.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        for v in &cols[1..7] {
            assert_eq!(v.parse::<f64>().unwrap(), 0.0, "{line}");
        }
    }
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    // config error with a field path
    let bad = write(d, "bad.json", r#"{"grid": {"m": 100}}"#);
    let o = qfluct(&["hartree-run", "--config", bad.to_str().unwrap()], d);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("grid:"), "{}", String::from_utf8_lossy(&o.stderr));
    let typo = write(d, "typo.json", r#"{"scenario": {"n_modes": 3}}"#);
    let o = qfluct(&["oracle-compare", "--config", typo.to_str().unwrap()], d);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("scenario"));
    // a failing check
    let strict = write(d, "strict.json", r#"{"n_list": [100, 1000], "checks": {"lambda_error_max": 1e-9}}"#);
    let o = qfluct(&["scattering-study", "--config", strict.to_str().unwrap()], d);
    assert_eq!(o.status.code(), Some(1));
    let m = manifest(&run_dir(&o.stdout));
    assert!(m["checks"].as_array().unwrap().iter().any(|c| c["pass"] == false));
    // numerical failure: the pair state cannot fit under a cutoff at N
    let leak = write(
        d,
        "leak.json",
        r#"{"scenario": {"m_modes": 3, "n": 2, "n_max": 2, "xi": {"kind": "pair", "amplitude": 0.8}, "max_leak": 1e-12}}"#,
    );
    let o = qfluct(&["oracle-compare", "--config", leak.to_str().unwrap()], d);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    // validate only, list checks
    let ok = write(d, "ok.json", SMALL_ORACLE);
    let o = qfluct(&["oracle-compare", "--check", "--config", ok.to_str().unwrap()], d);
    assert_eq!(o.status.code(), Some(0));
    assert!(!d.join("oracle-compare").exists());
    let o = qfluct(&["sweep", "--list-checks"], d);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("gap_monotone"));
}

#[test]
fn identical_config_gives_identical_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "o.json", SMALL_ORACLE);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let oa = qfluct(&["oracle-compare", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()], tmp.path());
    let ob = qfluct(&["oracle-compare", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()], tmp.path());
    assert_eq!(oa.status.code(), Some(0));
    let (da, db) = (run_dir(&oa.stdout), run_dir(&ob.stdout));
    assert_eq!(da.file_name(), db.file_name());
    let (ma, mb) = (manifest(&da), manifest(&db));
    assert_eq!(ma["run_id"], mb["run_id"]);
    assert_eq!(ma["outputs"], mb["outputs"]);
    for f in ["gaps.csv", "hypothesis.csv"] {
        assert_eq!(std::fs::read(da.join(f)).unwrap(), std::fs::read(db.join(f)).unwrap());
    }
    // replaying the manifest reproduces the run
    let c = tmp.path().join("c");
    let mpath = da.join("manifest.json");
    let oc = qfluct(&["oracle-compare", "--config", mpath.to_str().unwrap(), "--out", c.to_str().unwrap()], tmp.path());
    assert_eq!(manifest(&run_dir(&oc.stdout))["outputs"], ma["outputs"]);
    // a manifest cannot be replayed under another command
    let od = qfluct(&["sweep", "--config", mpath.to_str().unwrap()], tmp.path());
    assert_eq!(od.status.code(), Some(2));
}

#[test]
fn sweep_concatenates_single_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let sweep = r#"{"base": {"scenario": {"m_modes": 3, "t_final": 0.1}, "sample_every": 5},
                    "n_list": [2, 3], "n_max_offset": 4, "workers": 1,
                    "checks": {"gap_monotone": null, "phase_beats_ablation": false,
                               "hypothesis_spread_max": null, "round_trip_max": null}}"#;
    let cfg = write(d, "s.json", sweep);
    let o1 = qfluct(&["sweep", "--config", cfg.to_str().unwrap(), "--out", d.join("w1").to_str().unwrap()], d);
    assert_eq!(o1.status.code(), Some(0), "{}", String::from_utf8_lossy(&o1.stderr));
    let o3 = qfluct(
        &["sweep", "--config", cfg.to_str().unwrap(), "--out", d.join("w3").to_str().unwrap(), "--workers", "3"],
        d,
    );
    let (r1, r3) = (run_dir(&o1.stdout), run_dir(&o3.stdout));
    assert_eq!(std::fs::read(r1.join("trend.csv")).unwrap(), std::fs::read(r3.join("trend.csv")).unwrap());

    let single = write(d, "n3.json", r#"{"scenario": {"m_modes": 3, "n": 3, "n_max": 7, "t_final": 0.1}, "sample_every": 5}"#);
    let os = qfluct(&["oracle-compare", "--config", single.to_str().unwrap()], d);
    let rs = run_dir(&os.stdout);
    assert_eq!(std::fs::read(rs.join("gaps.csv")).unwrap(), std::fs::read(r1.join("n3/gaps.csv")).unwrap());
    let trend = std::fs::read_to_string(r1.join("trend.csv")).unwrap();
    assert_eq!(trend.lines().count(), 3);
    let gaps = std::fs::read_to_string(rs.join("gaps.csv")).unwrap();
    let last_gap = gaps.lines().last().unwrap().split(',').nth(1).unwrap();
    assert_eq!(trend.lines().nth(2).unwrap().split(',').nth(2).unwrap(), last_gap);
}
