mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use common::data_dir;
use vfmprobe_core::encoder::{EncoderConfig, FeatureFile};
use vfmprobe_core::report::{AlignmentReport, ScoreDetail};
use vfmprobe_core::runner::{
    self, dump_stimuli, rescore_options, score_report, RunConfig, RunSummary,
};
use vfmprobe_core::{
    display_encode, load_curve, AlignmentError, DisplayModel, GroundTruthCurve, Renderer,
    SuiteOptions, TestId, XAxis, YAxis,
};

fn config(out: &Path, tests: Vec<TestId>) -> RunConfig {
    RunConfig {
        encoders: vec![EncoderConfig::BuiltinRaw { id: "raw".into() }],
        tests,
        data_dir: Some(data_dir()),
        output_dir: out.to_path_buf(),
        density: 8,
        ..RunConfig::default()
    }
}

struct Shared {
    dir: tempfile::TempDir,
    summary: RunSummary,
}

fn shared() -> &'static Shared {
    static RUN: OnceLock<Shared> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let summary = runner::run(&config(
            dir.path(),
            vec![TestId::GaborAch, TestId::Matching],
        ))
        .unwrap();
        Shared { dir, summary }
    })
}

fn report(test: TestId) -> AlignmentReport {
    let text =
        std::fs::read_to_string(shared().dir.path().join("raw").join(format!("{test}.json")))
            .unwrap();
    AlignmentReport::from_json(&text).unwrap()
}

fn files(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                if p.file_name().unwrap() != ".cache" {
                    stack.push(p);
                }
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn small_run_writes_every_artifact() {
    let s = shared();
    assert!(s.summary.failures.is_empty(), "{:?}", s.summary.failures);
    let root = s.dir.path();
    for f in [
        "raw/gabor-ach.json",
        "raw/gabor-ach.samples.csv",
        "raw/gabor-ach.grid.csv",
        "raw/matching.json",
        "aggregate.csv",
        "manifest.json",
    ] {
        assert!(root.join(f).is_file(), "missing {f}");
    }
    let agg = std::fs::read_to_string(root.join("aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 2);
    assert!(agg.starts_with("encoder,"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(root.join("manifest.json")).unwrap())
            .unwrap();
    let listed: Vec<&str> = manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["path"].as_str().unwrap())
        .collect();
    assert!(listed.iter().all(|p| !p.starts_with(".cache")));
    assert!(listed.contains(&"raw/gabor-ach.grid.csv"));

    let g = report(TestId::GaborAch);
    assert_eq!(g.metric, "spearman");
    assert_eq!(g.seeds.len(), 0);
    let grid = g.grid.as_ref().unwrap();
    assert_eq!((grid.x.len(), grid.contrast.len()), (8, 8));
    let m = report(TestId::Matching);
    assert_eq!(m.metric, "log10-rmse");
    assert_eq!(m.curves.len(), 8);
    assert!(matches!(m.detail, Some(ScoreDetail::Matching(_))));
}

#[test]
fn rescoring_with_the_same_curve_is_bit_exact() {
    for test in [TestId::GaborAch, TestId::Matching] {
        let r = report(test);
        let curves: Vec<GroundTruthCurve> = r
            .curves
            .iter()
            .map(|c| load_curve(data_dir().join(&c.path)).unwrap())
            .collect();
        let s = score_report(&r, &curves, &rescore_options(&r)).unwrap();
        assert_eq!(s.score.to_bits(), r.score.unwrap().to_bits(), "{test}");
    }
}

#[test]
fn rescoring_with_another_curve_uses_the_grid() {
    let r = report(TestId::GaborAch);
    // a CSF peaking at high frequency, thresholds well inside the grid
    let points: Vec<(f64, f64)> = [0.5f64, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0]
        .iter()
        .map(|&x| (x, 10.0 + 10.0 * x))
        .collect();
    let other = GroundTruthCurve::new(
        "gabor-ach",
        XAxis::Cpd,
        YAxis::Sensitivity,
        "synthetic",
        points,
    )
    .unwrap();
    let s = score_report(&r, &[other], &rescore_options(&r)).unwrap();
    assert_eq!(s.method, "grid-interpolation");
    assert!(s.score.is_finite());
    assert_ne!(s.score.to_bits(), r.score.unwrap().to_bits());
    assert_eq!(s.encoder, "raw");

    let flat = GroundTruthCurve::new(
        "gabor-ach",
        XAxis::Cpd,
        YAxis::Sensitivity,
        "synthetic",
        vec![(0.5, 0.5), (32.0, 0.5)],
    )
    .unwrap();
    let err = score_report(&r, &[flat], &rescore_options(&r)).unwrap_err();
    match err {
        AlignmentError::Domain(msg) => assert!(msg.contains("sampled contrast range"), "{msg}"),
        other => panic!("{other}"),
    }
}

#[test]
fn resumed_run_is_identical_and_uses_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), vec![TestId::GaborAch]);
    runner::run(&cfg).unwrap();
    let first = files(dir.path());
    let cache = std::fs::read_to_string(dir.path().join(".cache/sac.jsonl")).unwrap();
    assert!(cache.lines().count() > 0);
    runner::run(&cfg).unwrap();
    assert_eq!(first, files(dir.path()));
    let again = std::fs::read_to_string(dir.path().join(".cache/sac.jsonl")).unwrap();
    assert_eq!(cache.lines().count(), again.lines().count());
}

#[test]
fn failing_encoder_is_reported_and_the_run_continues() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), vec![TestId::Area]);
    cfg.encoders.push(
        serde_json::from_str(
            r#"{"kind":"subprocess","id":"missing","command":["/nonexistent/adapter"]}"#,
        )
        .unwrap(),
    );
    let s = runner::run(&cfg).unwrap();
    assert!(!s.all_failed());
    assert_eq!(s.failures.len(), 1);
    assert_eq!(s.failures[0].0, "missing");
    let agg = std::fs::read_to_string(dir.path().join("aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 3);
}

#[test]
fn config_paths_are_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let text =
        r#"{"encoders":[{"kind":"builtin-raw","id":"raw"}],"tests":["area"],"output_dir":"out"}"#;
    let cfg = RunConfig::from_json(text, dir.path()).unwrap();
    assert_eq!(cfg.output_dir, dir.path().join("out"));
    assert!(RunConfig::from_json(r#"{"bogus":1}"#, dir.path()).is_err());
    let no_curve = r#"{"encoders":[{"kind":"builtin-raw","id":"raw"}],"tests":["gabor-rg"]}"#;
    assert!(RunConfig::from_json(no_curve, dir.path())
        .unwrap()
        .validate()
        .is_err());
}

#[test]
fn dumped_stimuli_rerender_bit_identically() {
    let dir = tempfile::tempdir().unwrap();
    let renderer = Renderer::new(DisplayModel::default()).unwrap();
    let opts = SuiteOptions {
        density: 4,
        ..SuiteOptions::default()
    };
    let m = dump_stimuli(TestId::GaborAch, &renderer, &opts, dir.path()).unwrap();
    assert_eq!((m.images.len(), m.references.len()), (16, 1));
    let text = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    let back: runner::StimulusManifest = serde_json::from_str(&text).unwrap();
    assert_eq!(back, m);
    for img in &back.images {
        let stored = FeatureFile::read(dir.path().join(&img.file)).unwrap();
        let again =
            display_encode(&renderer.render(&img.stimulus).unwrap(), &back.display).unwrap();
        assert_eq!(stored.dims, vec![224, 224, 3]);
        assert!(stored
            .data
            .iter()
            .zip(again.data())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
        assert!(dir.path().join(&img.preview).is_file());
    }

    let noisy = tempfile::tempdir().unwrap();
    let m = dump_stimuli(TestId::NoiseAch, &renderer, &opts, noisy.path()).unwrap();
    assert_eq!(m.images.len() + m.skipped.len(), 16);
}
