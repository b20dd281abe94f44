use std::path::PathBuf;
use std::process::Command;

fn pslab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pslab"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("pslab-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn list_names_every_experiment() {
    let out = pslab().arg("list").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["bilinear_scaling", "kernel_decay", "profiles", "lens"] {
        assert!(text.contains(name), "{name} missing");
    }
}

#[test]
fn run_from_config_file_writes_records() {
    let dir = scratch("run");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("galilei.json");
    let text = pslab().args(["config", "galilei"]).output().unwrap().stdout;
    std::fs::write(&cfg, &text).unwrap();
    let out_dir = dir.join("out");
    for _ in 0..2 {
        let st = pslab()
            .args(["run", "galilei", "--seed", "3", "--threads", "1", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out_dir)
            .status()
            .unwrap();
        assert!(st.success());
    }
    let lines: Vec<serde_json::Value> = std::fs::read_to_string(out_dir.join("results.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["measurements"], lines[1]["measurements"]);
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["passed"], 2);
    assert!(out_dir.join("curves.csv").exists());
}

#[test]
fn mismatched_config_is_an_error() {
    let dir = scratch("mismatch");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("fbi.json");
    std::fs::write(&cfg, pslab().args(["config", "fbi"]).output().unwrap().stdout).unwrap();
    let st = pslab().args(["run", "lens", "--config"]).arg(&cfg).status().unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn invariant_suite_passes() {
    let out = pslab().args(["verify", "--suite", "invariants"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
}
