use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const MAP: &str = "S..\n.#.\n..G\n";

fn write_config(dir: &Path) -> PathBuf {
    fs::write(dir.join("tiny.txt"), MAP).unwrap();
    let path = dir.join("tiny.json");
    fs::write(
        &path,
        r#"{
  "grid": "tiny.txt",
  "obs_dim": 12,
  "horizon": 3,
  "tasks": 4,
  "pretrain_n": [150],
  "n_sweep": [5, 40],
  "rank": 16,
  "noise_std": 0.3,
  "p_eval": 0.05,
  "seeds": [1, 2],
  "episodes": 100,
  "task_distribution": {"max_fires": 1, "deviation_range": [0.0, 0.1], "keep_destination": true}
}
"#,
    )
    .unwrap();
    path
}

fn mtrl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mtrl"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn strip_wall_time(csv: &str) -> String {
    csv.lines()
        .map(|l| l.rsplit_once(',').unwrap().0)
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn train_transfer_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("out");
    let stdout = ok(&mtrl(&[
        "train",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
        "--seed",
        "4",
    ]));
    let bundle = PathBuf::from(stdout.trim());
    assert!(bundle.file_name().unwrap().to_str().unwrap().starts_with("rep_"));
    for f in ["header.json", "representation.json", "b_hat_level_1.csv"] {
        assert!(bundle.join(f).is_file(), "{f}");
    }
    ok(&mtrl(&[
        "transfer",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
        "--rep",
        s(&bundle),
        "--n",
        "40",
    ]));
    let transfer: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("transfer.json")).unwrap()).unwrap();
    assert_eq!(transfer["levels"].as_array().unwrap().len(), 3);
    ok(&mtrl(&[
        "eval",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
        "--policy",
        s(&out.join("transfer.json")),
    ]));
    let eval: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("eval.json")).unwrap()).unwrap();
    assert_eq!(eval["episodes"], 100);
    assert!(eval["mean_return"].as_f64().unwrap().is_finite());
}

#[test]
fn oracle_evaluation_matches_the_optimal_value_in_expectation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("oracle");
    ok(&mtrl(&[
        "eval",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
        "--oracle",
    ]));
    let eval: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("eval.json")).unwrap()).unwrap();
    let gap = eval["suboptimality_start"].as_f64().unwrap().abs();
    assert!(gap <= 3.0 * eval["stderr"].as_f64().unwrap() + 1e-9);
}

#[test]
fn efficiency_output_is_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let run = |workers: &str| {
        let out = dir.path().join(format!("eff{workers}"));
        ok(&mtrl(&[
            "efficiency",
            "--config",
            s(&cfg),
            "--out",
            s(&out),
            "--workers",
            workers,
        ]));
        fs::read_to_string(out.join("results.csv")).unwrap()
    };
    let a = run("1");
    let b = run("3");
    assert_eq!(
        a.lines().next().unwrap(),
        "run_id,study,method,pretrain_N,n,seed,level,mean_return,stderr,kappa,alignment_aggregate,wall_time_s"
    );
    assert_eq!(strip_wall_time(&a), strip_wall_time(&b));
    // Two methods, two sweep points, two seeds, plus the header.
    assert_eq!(a.lines().count(), 1 + 2 * 2 * 2);
    let out = dir.path().join("eff1");
    assert!(out.join("manifest.json").is_file());
    assert!(out.join("summary.json").is_file());
    assert_eq!(
        fs::read_dir(&out)
            .unwrap()
            .filter(|e| {
                e.as_ref()
                    .unwrap()
                    .file_name()
                    .to_string_lossy()
                    .starts_with("rep_")
            })
            .count(),
        2
    );
}

#[test]
fn seed_flag_replaces_the_seed_list() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("kappa");
    ok(&mtrl(&[
        "kappa",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
        "--seed",
        "9",
    ]));
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(5) == Some("9")));
    assert_eq!(csv.lines().count(), 1 + 2 * 2);
}

#[test]
fn alignment_with_a_bad_level_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("align");
    let res = mtrl(&["alignment", "--config", s(&cfg), "--out", s(&out), "--level", "4"]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("level 4"));
    assert!(!out.exists());
    let res = mtrl(&[
        "alignment",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
        "--rep",
        s(&dir.path().join("nope")),
    ]);
    assert!(!res.status.success());
    assert!(!out.exists());
    ok(&mtrl(&[
        "alignment",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
        "--level",
        "2",
    ]));
    assert!(out.join("alignment.csv").is_file());
}

#[test]
fn bad_inputs_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let res = mtrl(&[
        "kappa",
        "--config",
        s(&dir.path().join("missing.json")),
        "--out",
        s(&out),
    ]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).starts_with("error:"));
    let cfg = write_config(dir.path());
    let res = mtrl(&["eval", "--config", s(&cfg), "--out", s(&out)]);
    assert!(!res.status.success());
    let res = mtrl(&["train", "--config", s(&cfg)]);
    assert!(!res.status.success());
}
