use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"{ "d_model": 8, "N": 3, "T": 2, "T_I": 10, "T_prime": 2, "samples_per_vehicle": 40,
  "test_samples": 100, "reference_iters": 300, "scheme": "fix6" }"#;

fn vecfl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vecfl")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("cfg.json");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn header(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn single_run_writes_three_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out = dir.path().join("out");
    let o = vecfl(&["--config", &cfg, "--seed", "3", "--scheme", "dqn-gradq", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(header(&out.join("learning_curve.csv")), "episode,mean_reward,mean_loss");
    assert_eq!(
        header(&out.join("rounds.csv")),
        "round,vehicle,q,T_comp,T_upload,T_fed,R_lambda,T_total,QE,F_global,F_best,converged"
    );
    assert_eq!(header(&out.join("summary.csv")), "scheme,w1,K,avg_total_time,avg_QE,G_pi,rounds_to_converge,test_acc");
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.lines().nth(1).unwrap().starts_with("dqn-gradq,0.5,"));
    let curve = std::fs::read_to_string(out.join("learning_curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 3);
}

#[test]
fn episodes_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out = dir.path().join("out");
    let o = vecfl(&["--config", &cfg, "--scheme", "dqn-gradq", "--episodes", "4", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let curve = std::fs::read_to_string(out.join("learning_curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 5);
}

#[test]
fn weight_sweep_writes_one_directory_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out = dir.path().join("sweep");
    let o = vecfl(&["--config", &cfg, "--sweep-w1", "0.1,0.3,0.5,0.7,0.9", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for w in ["0.1", "0.3", "0.5", "0.7", "0.9"] {
        assert!(out.join(format!("w1_{w}")).join("summary.csv").is_file(), "{w}");
    }
    let table = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 6);
    assert!(table.starts_with("scheme,w1,K,avg_total_time,avg_QE,G_pi,rounds_to_converge,test_acc,avg_q\n"));
}

#[test]
fn participant_sweep_writes_one_directory_per_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &TINY.replace(r#""N": 3"#, r#""N": 8"#));
    let out = dir.path().join("k");
    let o = vecfl(&["--config", &cfg, "--participants", "2,4,6,8", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(out.join("participants.csv")).unwrap();
    let ks: Vec<&str> = table.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(ks, ["2", "4", "6", "8"]);
    assert!(out.join("K_8").join("rounds.csv").is_file());
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        assert!(vecfl(&["--config", &cfg, "--scheme", "random", "--out", out.to_str().unwrap()]).status.success());
    }
    for name in ["learning_curve.csv", "rounds.csv", "summary.csv"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn unknown_flag_fails() {
    let o = vecfl(&["--no-such-flag"]);
    assert!(!o.status.success());
}

#[test]
fn unknown_scheme_fails() {
    let o = vecfl(&["--scheme", "fix7"]);
    assert!(!o.status.success());
}

#[test]
fn invalid_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{ "lr": -1.0 }"#);
    let o = vecfl(&["--config", &cfg]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("lr"));

    let cfg = write_config(dir.path(), r#"{ "lr": 0.1, "bogus": 1 }"#);
    let o = vecfl(&["--config", &cfg]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));
}

#[test]
fn missing_config_file_fails() {
    let o = vecfl(&["--config", "/nonexistent/vecfl.json"]);
    assert!(!o.status.success());
    assert!(!o.stderr.is_empty());
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            vecfl::harness::load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 5);
}
