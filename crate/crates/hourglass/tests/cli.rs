use std::path::Path;
use std::process::{Command, Output};

fn hourglass(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hourglass"))
        .args(args)
        .current_dir(dir)
        .env_remove("HG_SEED")
        .output()
        .unwrap()
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push((
                    p.strip_prefix(dir).unwrap().display().to_string(),
                    std::fs::read(&p).unwrap(),
                ));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn synth_is_deterministic_and_counts_files() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = hourglass(
            &[
                "synth", "--count", "16", "--size", "64", "--seed", "1", "--out", out,
            ],
            dir.path(),
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = tree(&dir.path().join("a"));
    assert_eq!(a, tree(&dir.path().join("b")));
    assert_eq!(a.iter().filter(|(n, _)| n.ends_with(".png")).count(), 16);
    assert!(a.iter().any(|(n, _)| n == "annotations.jsonl"));
}

#[test]
fn seed_defaults_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_hourglass"))
        .args(["synth", "--count", "2", "--out", "env"])
        .current_dir(dir.path())
        .env("HG_SEED", "7")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(hourglass(
        &["synth", "--count", "2", "--seed", "7", "--out", "flag"],
        dir.path()
    )
    .status
    .success());
    assert!(
        hourglass(&["synth", "--count", "2", "--out", "default"], dir.path())
            .status
            .success()
    );
    let env = tree(&dir.path().join("env"));
    assert_eq!(env, tree(&dir.path().join("flag")));
    assert_ne!(env, tree(&dir.path().join("default")));
}

#[test]
fn bad_arguments_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["synth", "--count", "0", "--out", "x"][..],
        &["synth", "--count", "two", "--out", "x"],
        &["frobnicate"],
        &["eval", "--checkpoint", "missing.hgnet", "--data", "missing"],
        &[
            "predict",
            "--checkpoint",
            "missing.hgnet",
            "--image",
            "x.png",
            "--center",
            "1,2",
            "--scale",
            "1",
        ],
    ] {
        let o = hourglass(args, dir.path());
        assert!(!o.status.success(), "{args:?} succeeded");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn gradcheck_passes_and_detects_a_fault() {
    let dir = tempfile::tempdir().unwrap();
    let ok = hourglass(&["gradcheck"], dir.path());
    let text = String::from_utf8_lossy(&ok.stdout);
    assert!(ok.status.success(), "{text}");
    for op in [
        "conv2d",
        "maxpool2x2",
        "upsample_nearest2x",
        "batchnorm",
        "relu",
        "add",
        "mse_loss",
        "miniature",
    ] {
        assert!(
            text.lines()
                .any(|l| l.starts_with(op) && l.contains("pass")),
            "{op} missing from\n{text}"
        );
    }
    assert!(text.contains("max rel error"));
    let bad = hourglass(&["gradcheck", "--inject-fault"], dir.path());
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stdout)
        .lines()
        .any(|l| l.starts_with("relu") && l.contains("FAIL")));
}

#[test]
fn train_eval_and_predict_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(hourglass(
        &["synth", "--count", "6", "--seed", "3", "--out", "data"],
        d
    )
    .status
    .success());
    std::fs::write(
        d.join("exp.toml"),
        "seed = 2\noutput_dir = \"run\"\n[model]\nnum_features = 16\ninput_resolution = 32\noutput_resolution = 8\n\
         [train]\nbatch_size = 3\nmax_iterations = 4\neval_interval = 2\n[data]\ntrain = \"data\"\n",
    )
    .unwrap();
    let o = hourglass(&["train", "--config", "exp.toml"], d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let log = std::fs::read_to_string(d.join("run/log.csv")).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(
        lines[0],
        "iteration,lr,train_loss,val_pck_stack1,val_pck_stack2"
    );
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("2,0.00025,"));
    assert!(d.join("run/curves.svg").exists());

    let o = hourglass(
        &[
            "eval",
            "--checkpoint",
            "run/checkpoint.hgnet",
            "--data",
            "data",
            "--flip",
            "--svg",
            "--out",
            "ev",
        ],
        d,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = String::from_utf8_lossy(&o.stdout);
    assert!(summary.contains("Head") && summary.contains("Ankle") && summary.contains("Total"));
    for f in [
        "report.csv",
        "presence.csv",
        "presence_auc.csv",
        "summary.txt",
        "pck.svg",
    ] {
        assert!(d.join("ev").join(f).exists(), "{f}");
    }
    let report = std::fs::read_to_string(d.join("ev/report.csv")).unwrap();
    assert!(report.starts_with("joint,stratum,threshold,pck,correct,counted"));

    let o = hourglass(
        &[
            "predict",
            "--checkpoint",
            "run/checkpoint.hgnet",
            "--image",
            "data/images/000000.png",
            "--center",
            "32,32",
            "--scale",
            "0.3",
            "--heatmaps",
            "hm.json",
        ],
        d,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let joints = json["joints"].as_array().unwrap();
    assert_eq!(joints.len(), 14);
    assert_eq!(joints[13]["name"], "head_top");
    for key in ["x", "y", "max_activation", "mean_activation"] {
        assert!(joints[0][key].is_number());
    }
    let dump: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.join("hm.json")).unwrap()).unwrap();
    assert_eq!(dump["shape"], serde_json::json!([14, 8, 8]));
    assert_eq!(dump["data"].as_array().unwrap().len(), 14 * 64);

    let mut mismatch = std::fs::read_to_string(d.join("data/annotations.jsonl")).unwrap();
    mismatch = mismatch.replacen("\"num_joints\":14", "\"num_joints\":13", 1);
    std::fs::write(d.join("data/bad.jsonl"), mismatch).unwrap();
    let o = hourglass(
        &[
            "eval",
            "--checkpoint",
            "run/checkpoint.hgnet",
            "--data",
            "data/bad.jsonl",
        ],
        d,
    );
    assert!(!o.status.success());
}

#[test]
fn ablate_reports_equal_capacity_at_paper_scale() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("paper.toml"),
        "output_dir = \"abl\"\n[model]\nnum_features = 256\nhourglass_depth = 4\ninput_resolution = 256\noutput_resolution = 64\nnum_joints = 16\n",
    )
    .unwrap();
    let o = hourglass(
        &[
            "ablate",
            "--config",
            "paper.toml",
            "--variants",
            "8x1,4x2,2x4",
            "--params-only",
        ],
        d,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(!stdout.contains("warning"));
    let csv = std::fs::read_to_string(d.join("abl/ablation.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert!(header.contains(&"midpoint_pck"));
    let col = header.iter().position(|&h| h == "parameters").unwrap();
    let params: Vec<f64> = lines
        .map(|l| l.split(',').nth(col).unwrap().parse().unwrap())
        .collect();
    assert_eq!(params.len(), 3);
    let (lo, hi) = params
        .iter()
        .fold((f64::MAX, 0.0f64), |(lo, hi), &p| (lo.min(p), hi.max(p)));
    assert!(hi / lo <= 1.05, "{params:?}");
}
