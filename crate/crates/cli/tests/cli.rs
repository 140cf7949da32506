use std::path::Path;
use std::process::{Command, Output};

const GEN: &str = r#"{"n_users":4,"days_per_user":20,"user_baseline_sd":6.0,"within_user_sd":3.0,
"ar_coefficient":0.5,"d_noise":2,"d_id":2,"d_signal":1,"signal_gain":1.0,"identity_gain":3.0,
"report_every_k_days":1,"target_name":"mood","target_range":[10,50],"seed":3}"#;

fn leakbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_leakbench")).args(args).output().expect("binary runs")
}

fn generated(dir: &Path) -> String {
    let cfg = dir.join("gen.json");
    std::fs::write(&cfg, GEN).unwrap();
    let data = dir.join("data");
    let out = leakbench(&["generate", "--config", cfg.to_str().unwrap(), "--out", data.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    data.to_str().unwrap().to_string()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn generate_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let data = generated(dir.path());
    for f in ["raw_features.csv", "reports.csv", "gen_config.json"] {
        assert!(Path::new(&data).join(f).exists(), "{f} missing");
    }
}

#[test]
fn audit_prints_one_row_per_split() {
    let dir = tempfile::tempdir().unwrap();
    let data = generated(dir.path());
    let out = leakbench(&["audit", "--data", &data, "--protocol", "louocv", "--window", "3"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "protocol,fold,user_overlap,max_window_overlap,target_leak");
    assert_eq!(lines.len(), 5);
    assert!(lines[1..].iter().all(|l| l.starts_with("LOUOCV,") && l.ends_with(",0,0,false")));

    let out = leakbench(&["audit", "--data", &data, "--protocol", "mixed", "--window", "1", "--folds", "4"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 5);
}

#[test]
fn run_is_reproducible_and_seed_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let data = generated(dir.path());
    let cfg = write(dir.path(), "p3c.json", r#"{"seed":1,"protocols":["MIXED","LOUOCV"]}"#);
    let report = |name: &str, extra: &[&str]| -> Vec<u8> {
        let out_path = dir.path().join(name);
        let mut args = vec!["run", "--experiment", "p3c", "--data", &data, "--config", &cfg];
        let out_str = out_path.to_str().unwrap().to_string();
        args.extend(["--out", &out_str]);
        args.extend(extra);
        let out = leakbench(&args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(out_path).unwrap()
    };
    let a = report("a.csv", &[]);
    assert_eq!(a, report("b.csv", &[]));
    let c = report("c.csv", &["--seed", "2"]);
    assert!(String::from_utf8(c).unwrap().contains("# seed: 2"));
    let md = String::from_utf8(report("d.md", &["--format", "markdown"])).unwrap();
    assert!(md.contains("| experiment | setting |"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = generated(dir.path());
    let out = dir.path().join("r.csv");
    let out = out.to_str().unwrap();
    let run = |exp: &str, cfg: &str| {
        leakbench(&["run", "--experiment", exp, "--data", &data, "--config", cfg, "--out", out])
    };

    let unknown_key = write(dir.path(), "bad.json", r#"{"seed":1,"colour":"red"}"#);
    assert_eq!(run("p3r", &unknown_key).status.code(), Some(2));
    let no_seed = write(dir.path(), "noseed.json", r#"{"target":"mood"}"#);
    assert_eq!(run("p3r", &no_seed).status.code(), Some(2));
    let ok = write(dir.path(), "ok.json", r#"{"seed":1}"#);
    assert_eq!(run("p7", &ok).status.code(), Some(2));

    let bad_data = dir.path().join("broken");
    std::fs::create_dir(&bad_data).unwrap();
    std::fs::write(bad_data.join("ranges.json"), r#"{"mood":[10,50]}"#).unwrap();
    std::fs::write(bad_data.join("raw_features.csv"), "user_id,day,f0\nu0,0,1.0\n").unwrap();
    std::fs::write(bad_data.join("reports.csv"), "user_id,day,mood\nu0,0,99\n").unwrap();
    let o =
        leakbench(&["audit", "--data", bad_data.to_str().unwrap(), "--protocol", "loiocv", "--window", "1"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));

    // P2 needs 15 reports per user; every generated user has 20
    let long =
        write(dir.path(), "p2.json", r#"{"seed":1,"min_series_len":50,"t_hist":[1],"rand_t_hist":[]}"#);
    assert_eq!(run("p2", &long).status.code(), Some(4));
}
