use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use saliency_fairness::io::{self, RoiFile};
use saliency_fairness::{RelevanceMap, Roi};

fn salfair(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_salfair")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn metrics_on_golden_fixture_succeeds() {
    let g = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden");
    let out = tempfile::tempdir().unwrap();
    let o = salfair(&[
        "metrics",
        "--vanilla",
        s(&g.join("vanilla")),
        "--debiased",
        s(&g.join("debiased")),
        "--roi",
        s(&g.join("roi.json")),
        "--out",
        s(out.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.path().join("report.json").exists());
    assert!(out.path().join("report.csv").exists());
}

#[test]
fn validation_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    fs::write(&cfg, r#"{"phi_list": [2.0]}"#).unwrap();
    let o = salfair(&["run", "--config", s(&cfg), "--out", s(&tmp.path().join("run"))]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("phi 2"));

    assert_eq!(code(&salfair(&["run"])), 1);
    assert_eq!(code(&salfair(&["frobnicate"])), 1);

    let bad_map = tmp.path().join("maps");
    fs::create_dir_all(&bad_map).unwrap();
    fs::write(bad_map.join("x.sfmap"), b"not a map").unwrap();
    let roi = tmp.path().join("roi.json");
    io::write_roi_file(&RoiFile::new(Roi::new(0, 0, 1, 1)), &roi).unwrap();
    let o = salfair(&[
        "metrics", "--vanilla", s(&bad_map), "--debiased", s(&bad_map), "--roi", s(&roi), "--out", s(tmp.path()),
    ]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("x.sfmap"));
}

#[test]
fn compute_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let maps = tmp.path().join("maps");
    fs::create_dir_all(&maps).unwrap();
    for name in ["a", "b"] {
        io::write_map(&RelevanceMap::zeros(2, 2).unwrap(), maps.join(format!("{name}.sfmap"))).unwrap();
    }
    let roi = tmp.path().join("roi.json");
    io::write_roi_file(&RoiFile::new(Roi::new(0, 0, 1, 1)), &roi).unwrap();
    let o = salfair(&[
        "metrics", "--vanilla", s(&maps), "--debiased", s(&maps), "--roi", s(&roi), "--out", s(tmp.path()),
    ]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn generate_rebalance_run_attribute_plotdata() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let spec = root.join("spec.json");
    fs::write(&spec, r#"{"n_samples": 400}"#).unwrap();
    let data = root.join("data");
    let o = salfair(&["generate", "--config", s(&spec), "--seed", "3", "--out", s(&data)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(io::read_dataset(&data).unwrap().len(), 400);

    let o = salfair(&["rebalance", "--input", s(&data), "--phi", "-0.4", "--seed", "1", "--out", s(&root.join("reb"))]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let subset = io::read_dataset(root.join("reb")).unwrap();
    let phi = saliency_fairness::data::empirical_phi(&subset).unwrap();
    assert!((phi + 0.4).abs() <= 0.01, "{phi}");

    let cfg = root.join("cfg.json");
    fs::write(
        &cfg,
        format!(
            r#"{{"dataset": {{"path": {:?}}}, "roi": {:?}, "phi_list": [0.5], "methods": ["vanilla", "cav_project"], "ig_steps": 8}}"#,
            s(&data),
            s(&data.join("roi.json"))
        ),
    )
    .unwrap();
    let run = root.join("run");
    let o = salfair(&["run", "--config", s(&cfg), "--seed", "5", "--out", s(&run)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let o = salfair(&[
        "attribute",
        "--checkpoint",
        s(&run.join("checkpoints/phi_0.5/cav_project.sfnet")),
        "--dataset",
        s(&root.join("reb")),
        "--method",
        "lrp",
        "--out",
        s(&root.join("attr")),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(io::list_maps(root.join("attr/maps")).unwrap().len(), subset.len());

    let o = salfair(&["plotdata", "--run", s(&run), "--out", s(&root.join("plots"))]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read_dir(root.join("plots")).unwrap().count(), 6);
}
