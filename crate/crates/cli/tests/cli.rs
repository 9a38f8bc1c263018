use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
n_samples = 300
horizon = 8
context_len = 4
n_trajectories = 20
knn_k = 5
diffusion_steps = 10
den_hidden = 16
den_blocks = 1
den_time_dim = 8
den_batch = 8
den_steps = 20
proxy_hidden = 16
proxy_layers = 1
proxy_steps = 20
proxy_batch = 16
n_generated = 3
q = 6
seeds = [3]
"#;

fn gtg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gtg"))
        .current_dir(dir)
        .env_remove("GTG_SEED")
        .args(args)
        .output()
        .unwrap()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    dir
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn stage_commands_chain_and_report_exit_codes() {
    let dir = setup();
    fn with(cmd: &str) -> Vec<&str> {
        vec!["--config", "tiny.toml", "--out", "run", cmd]
    }

    // Later stages before earlier ones are runtime failures.
    let o = gtg(dir.path(), &with("sample"));
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "runtime");

    for cmd in ["gen-data", "build-trajs", "train", "sample", "select", "evaluate"] {
        let o = gtg(dir.path(), &with(cmd));
        assert_eq!(code(&o), 0, "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert!(dir.path().join("run/seed-3/report.json").exists());

    // Overwriting needs --force.
    assert_eq!(code(&gtg(dir.path(), &with("gen-data"))), 2);
    let mut forced = with("gen-data");
    forced.push("--force");
    assert_eq!(code(&gtg(dir.path(), &forced)), 0);

    let o = gtg(dir.path(), &with("stats"));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stats = dir.path().join("run/seed-3/stats");
    for name in ["hist_dataset.csv", "hist_trajectories.csv", "hist_candidates.csv"] {
        let text = std::fs::read_to_string(stats.join(name)).unwrap();
        let total: usize = text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap()).sum();
        let expect = match name {
            "hist_dataset.csv" => 270,
            "hist_trajectories.csv" => 20 * 8,
            _ => 6,
        };
        assert_eq!(total, expect, "{name}");
        assert_eq!(text.lines().count(), 21);
    }
    let contour = std::fs::read_to_string(stats.join("contour.csv")).unwrap();
    assert_eq!(contour.lines().count(), 1 + 101 * 101);
    assert!(stats.join("score_shift.json").exists());
    assert!(stats.join("generated_polyline.csv").exists());
}

#[test]
fn missing_config_is_a_config_error_and_creates_nothing() {
    let dir = setup();
    let o = gtg(dir.path(), &["--config", "nope.toml", "--out", "run", "run"]);
    assert_eq!(code(&o), 2);
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "config");
    assert!(!dir.path().join("run").exists());

    std::fs::write(dir.path().join("bad.toml"), "horizon = 4\ncontext_len = 4").unwrap();
    assert_eq!(code(&gtg(dir.path(), &["--config", "bad.toml", "--out", "run", "run"])), 2);
    assert_eq!(code(&gtg(dir.path(), &["--config", "tiny.toml", "--out", "run", "ablate", "--axis", "zz", "--values", "1"])), 2);
    assert!(!dir.path().join("run").exists());
}

#[test]
fn run_is_deterministic_and_guarded() {
    let dir = setup();
    let o = gtg(dir.path(), &["--config", "tiny.toml", "--out", "a", "run"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("best: "));
    assert_eq!(code(&gtg(dir.path(), &["--config", "tiny.toml", "--out", "b", "run"])), 0);
    let read = |p: &str| std::fs::read(dir.path().join(p)).unwrap();
    assert_eq!(read("a/report.json"), read("b/report.json"));
    assert_eq!(read("a/seed-3/candidates.json"), read("b/seed-3/candidates.json"));

    assert_eq!(code(&gtg(dir.path(), &["--config", "tiny.toml", "--out", "a", "run"])), 2);
    assert_eq!(code(&gtg(dir.path(), &["--config", "tiny.toml", "--out", "a", "--resume", "run"])), 0);
    assert_eq!(read("a/report.json"), read("b/report.json"));
    assert_eq!(code(&gtg(dir.path(), &["--config", "tiny.toml", "--out", "a", "--force", "run"])), 0);
}

#[test]
fn seed_precedence() {
    let dir = setup();
    let run = |extra: &[&str], env: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_gtg"));
        c.current_dir(dir.path()).env_remove("GTG_SEED");
        if let Some(v) = env {
            c.env("GTG_SEED", v);
        }
        let mut args = vec!["--config", "tiny.toml", "--force", "--out"];
        args.extend_from_slice(extra);
        c.args(args).output().unwrap()
    };
    assert_eq!(code(&run(&["env", "gen-data"], Some("11"))), 0);
    assert!(dir.path().join("env/seed-11/dataset.csv").exists());
    assert_eq!(code(&run(&["flag", "--seed", "12", "gen-data"], Some("11"))), 0);
    assert!(dir.path().join("flag/seed-12/dataset.csv").exists());
    assert!(!dir.path().join("flag/seed-11").exists());
    assert_eq!(code(&run(&["cfg", "gen-data"], None)), 0);
    assert!(dir.path().join("cfg/seed-3/dataset.csv").exists());
    assert_eq!(code(&run(&["bad", "gen-data"], Some("x"))), 2);
}
