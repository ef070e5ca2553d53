use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ctxmatch::eval::EvalReport;
use ctxmatch::io;
use ctxmatch::synth::Manifest;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ctxmatch"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "{:?} failed: {}",
        cmd,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn synth_pair(dir: &Path, seed: u64, scene: &str) -> PathBuf {
    run(bin().args(["synth", "--scene", scene, "--inliers", "80", "--outliers", "60", "--seed"])
        .arg(seed.to_string())
        .arg("--out")
        .arg(dir));
    dir.join("pair.json")
}

#[test]
fn synth_output_is_byte_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    synth_pair(&a, 9, "two_view");
    synth_pair(&b, 9, "two_view");
    let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 6);
    for name in names {
        assert_eq!(
            std::fs::read(a.join(&name)).unwrap(),
            std::fs::read(b.join(&name)).unwrap(),
            "{name:?} differs"
        );
    }
}

#[test]
fn stage_commands_reproduce_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let pair = synth_pair(&tmp.path().join("p"), 21, "planar");
    let cfg = configs().join("best_1sac.json");
    let d = tmp.path();

    run(bin().arg("--config").arg(&cfg).arg("pipeline").arg("--pair").arg(&pair).arg("--out").arg(d.join("run")));

    run(bin().arg("--config").arg(&cfg).args(["match", "--pair"]).arg(&pair).arg("--out").arg(d.join("blob.csv")));
    run(bin()
        .arg("--config")
        .arg(&cfg)
        .args(["filter", "--pair"])
        .arg(&pair)
        .arg("--matches")
        .arg(d.join("blob.csv"))
        .arg("--out")
        .arg(d.join("filtered.csv")));
    run(bin()
        .arg("--config")
        .arg(&cfg)
        .args(["fit", "--pair"])
        .arg(&pair)
        .arg("--matches")
        .arg(d.join("filtered.csv"))
        .arg("--out")
        .arg(d.join("fitted.csv")));
    run(bin()
        .arg("--config")
        .arg(&cfg)
        .args(["eval", "--pair"])
        .arg(&pair)
        .arg("--matches")
        .arg(d.join("fitted.csv"))
        .arg("--universe")
        .arg(d.join("blob.csv"))
        .arg("--out")
        .arg(d.join("metrics.json")));

    let run_dir = d.join("run").join("p");
    for (stage, piped) in [("blob.csv", "blob.csv"), ("filtered.csv", "filtered.csv"), ("matches.csv", "fitted.csv")] {
        assert_eq!(
            io::read_matches(&run_dir.join(stage)).unwrap(),
            io::read_matches(&d.join(piped)).unwrap(),
            "{stage}"
        );
    }
    let a: EvalReport = io::read_json(&run_dir.join("metrics.json")).unwrap();
    let b: EvalReport = io::read_json(&d.join("metrics.json")).unwrap();
    assert_eq!(a, b);
    assert!(d.join("run").join("summary.json").exists());
}

#[test]
fn metrics_agree_with_planted_labels() {
    let tmp = tempfile::tempdir().unwrap();
    let pair = synth_pair(&tmp.path().join("p"), 4, "planar");
    let out = tmp.path().join("run");
    run(bin()
        .arg("--config")
        .arg(configs().join("baseline.json"))
        .arg("pipeline")
        .arg("--pair")
        .arg(&pair)
        .arg("--out")
        .arg(&out));
    let manifest: Manifest = io::read_json(&tmp.path().join("p/manifest.json")).unwrap();
    let correct: HashSet<_> = manifest.correct_pairs().collect();
    let output = io::read_matches(&out.join("p/matches.csv")).unwrap();
    let report: EvalReport = io::read_json(&out.join("p/metrics.json")).unwrap();
    let expected: Vec<bool> = output.iter().map(|m| correct.contains(&(m.i, m.j))).collect();
    assert_eq!(report.labels, expected);
    let hits = expected.iter().filter(|&&b| b).count();
    assert_eq!(report.raw_correct_count, hits);
    assert_eq!(report.precision, Some(hits as f64 / output.len() as f64));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let code = |cmd: &mut Command| cmd.output().unwrap().status.code();

    assert_eq!(code(bin().arg("frobnicate")), Some(2));
    assert_eq!(
        code(bin().args(["match", "--pair"]).arg(tmp.path().join("none.json")).arg("--out").arg(tmp.path().join("o.csv"))),
        Some(3)
    );

    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(
        code(bin().args(["match", "--pair"]).arg(&bad).arg("--out").arg(tmp.path().join("o.csv"))),
        Some(4)
    );

    // invalid settings inside a config file are reported against that file
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"workers": 0}"#).unwrap();
    let pair = synth_pair(&tmp.path().join("p"), 1, "planar");
    assert_eq!(
        code(bin().arg("--config").arg(&cfg).args(["match", "--pair"]).arg(&pair).arg("--out").arg(tmp.path().join("o.csv"))),
        Some(4)
    );
    assert_eq!(
        code(bin().args(["--workers", "0", "match", "--pair"]).arg(&pair).arg("--out").arg(tmp.path().join("o.csv"))),
        Some(1)
    );
}
