use std::path::Path;
use std::process::{Command, Output};

fn affordsim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_affordsim"))
        .args(args)
        .current_dir(dir)
        .env("AFFORDSIM_OUT_DIR", dir.join("out"))
        .output()
        .expect("spawn affordsim")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = affordsim(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn gen_dataset_writes_records_and_images() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "gen-dataset",
            "--categories",
            "drawer",
            "--per-category",
            "3",
            "--seed",
            "2",
            "--resolution",
            "64x64",
            "--out",
            "d/data.jsonl",
        ],
    );
    let text = std::fs::read_to_string(dir.path().join("d/data.jsonl")).unwrap();
    let records: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(!records.is_empty());
    assert_eq!(records.len() % 4, 0);
    for r in &records {
        let image = r["image"].as_str().unwrap();
        assert!(dir.path().join("d").join(image).exists(), "{image}");
    }
}

#[test]
fn run_eval_formats() {
    let dir = tempfile::tempdir().unwrap();
    let base = [
        "run-eval",
        "--policy",
        "oracle",
        "--categories",
        "drawer,door",
        "--episodes",
        "2",
        "--seed",
        "4",
    ];
    for (format, check) in [
        ("json", "\"avg_initial_rate\""),
        ("csv", "category,episodes,initial_rate,long_rate"),
        ("markdown", "| AVG"),
    ] {
        let name = format!("r.{format}");
        let mut args = base.to_vec();
        args.extend(["--format", format, "--out", &name]);
        ok(dir.path(), &args);
        let body = std::fs::read_to_string(dir.path().join(&name)).unwrap();
        assert!(body.contains(check), "{format}: {body}");
    }
}

#[test]
fn traces_replay() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "run-eval",
            "--policy",
            "affordance",
            "--categories",
            "drawer",
            "--episodes",
            "2",
            "--traces",
            "t",
            "--out",
            "r.json",
        ],
    );
    let traces: Vec<_> = std::fs::read_dir(dir.path().join("t")).unwrap().collect();
    assert!(!traces.is_empty());
    for t in traces {
        let path = t.unwrap().path();
        let stdout = ok(dir.path(), &["replay", "--trace", path.to_str().unwrap()]);
        assert!(stdout.contains("matches"), "{stdout}");
    }
}

#[test]
fn render_affordance_outputs() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "render-affordance",
            "--category",
            "door",
            "--seed",
            "3",
            "--resolution",
            "64x64",
            "--out",
            "img/door",
        ],
    );
    for suffix in ["-affordance.png", "-affordance.pgm", "-depth.pgm"] {
        assert!(
            dir.path().join(format!("img/door{suffix}")).exists(),
            "{suffix}"
        );
    }
}

#[test]
fn run_tta_persists_scorer() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.toml"),
        "[tta]\nresolution = [64, 64]\nwindow = 2\n",
    )
    .unwrap();
    ok(
        dir.path(),
        &[
            "run-tta",
            "--config",
            "c.toml",
            "--episodes",
            "4",
            "--scorer",
            "s.json",
            "--out",
            "tta.json",
        ],
    );
    let scorer: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("s.json")).unwrap()).unwrap();
    assert_eq!(scorer["update_count"], 4);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("tta.json")).unwrap())
            .unwrap();
    assert_eq!(report["window_rates"].as_array().unwrap().len(), 2);
}

#[test]
fn export_scene_and_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "export-scene",
            "--category",
            "laptop",
            "--seed",
            "1",
            "--out",
            "s.json",
        ],
    );
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("s.json")).unwrap()).unwrap();
    assert!(doc["parts"].as_array().is_some_and(|p| p.len() >= 2));

    assert!(
        !affordsim(dir.path(), &["run-eval", "--categories", "toaster"])
            .status
            .success()
    );
    assert!(
        !affordsim(dir.path(), &["gen-dataset", "--resolution", "0x10"])
            .status
            .success()
    );
}
