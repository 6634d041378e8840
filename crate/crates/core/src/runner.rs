//! Run orchestration: configuration, end-to-end runs, re-scoring and stimulus dumps.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::alignment::{
    contour_grid, detection_alignment, masking_alignment, matching_alignment, score_samples,
    AlignmentError, AlignmentOptions, Evaluator, MatchOptions, MatchPoint,
};
use crate::alignment::{human_points, matching_rmse};
use crate::cache::SacCache;
use crate::colorimetry::{display_encode, DisplayModel};
use crate::encoder::{EncoderConfig, FeatureFile, ImageEncoder, Rendered};
use crate::reference::{default_curve_files, load_curve, GroundTruthCurve, StandInCsf, YAxis};
use crate::report::{aggregate_csv, AlignmentReport, CurveRef, ScoreDetail};
use crate::stimuli::{Renderer, Stimulus};
use crate::suite::{build_test_suite, derive_seed, log_space, SuiteOptions, TestId, TestKind};

/// Failures that stop a run before any encoder is called.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Read { path: String, message: String },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Alignment(#[from] AlignmentError),
    #[error("{0}")]
    Other(String),
}

impl RunError {
    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        RunError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub encoders: Vec<EncoderConfig>,
    pub tests: Vec<TestId>,
    pub display: DisplayModel,
    /// Per-test curve files, overriding those found under `data_dir`.
    pub curves: BTreeMap<TestId, Vec<PathBuf>>,
    pub data_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Worker threads; 0 uses every core.
    pub parallelism: usize,
    pub seed_base: u64,
    pub normalized_matching: bool,
    pub density: usize,
    pub noise_seeds: usize,
    pub n_multipliers: usize,
    /// Skip the dense S_ac grid and only compute scores.
    pub scores_only: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            encoders: vec![],
            tests: TestId::ALL.to_vec(),
            display: DisplayModel::default(),
            curves: BTreeMap::new(),
            data_dir: None,
            output_dir: PathBuf::from("runs"),
            parallelism: 0,
            seed_base: 0,
            normalized_matching: false,
            density: 20,
            noise_seeds: 5,
            n_multipliers: 10,
            scores_only: false,
        }
    }
}

impl RunConfig {
    /// Parses a config; relative paths are resolved against `base`.
    pub fn from_json(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(d) = cfg.data_dir.as_mut() {
            fix(d);
        }
        fix(&mut cfg.output_dir);
        for files in cfg.curves.values_mut() {
            files.iter_mut().for_each(fix);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.encoders.is_empty() {
            return bad("at least one encoder is required".into());
        }
        if self.tests.is_empty() {
            return bad("at least one test is required".into());
        }
        let mut ids: Vec<&str> = self.encoders.iter().map(|e| e.id()).collect();
        ids.sort();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return bad(format!("duplicate encoder id '{}'", w[0]));
        }
        if ids.iter().any(|id| id.is_empty()) {
            return bad("encoder ids must be non-empty".into());
        }
        self.display
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.density < 2 {
            return bad(format!("density must be at least 2, got {}", self.density));
        }
        if self.noise_seeds < 1 {
            return bad("noise_seeds must be at least 1".into());
        }
        if self.n_multipliers < 2 {
            return bad(format!(
                "n_multipliers must be at least 2, got {}",
                self.n_multipliers
            ));
        }
        if let Some(d) = &self.data_dir {
            if !d.is_dir() {
                return bad(format!("data_dir {} does not exist", d.display()));
            }
        }
        for (test, files) in &self.curves {
            if files.is_empty() {
                return bad(format!("empty curve list for {test}"));
            }
            if let Some(f) = files.iter().find(|f| !f.is_file()) {
                return bad(format!(
                    "curve file {} for {test} does not exist",
                    f.display()
                ));
            }
        }
        for &test in &self.tests {
            self.curve_source(test)?;
        }
        Ok(())
    }

    fn suite_options(&self) -> SuiteOptions {
        SuiteOptions {
            density: self.density,
            noise_seeds: self.noise_seeds,
            seed_base: self.seed_base,
        }
    }

    pub fn alignment_options(&self) -> AlignmentOptions {
        AlignmentOptions {
            n_conditions: self.density,
            n_multipliers: self.n_multipliers,
            suite: self.suite_options(),
            ..AlignmentOptions::default()
        }
    }

    pub fn match_options(&self) -> MatchOptions {
        MatchOptions {
            normalized: self.normalized_matching,
            ..MatchOptions::default()
        }
    }

    fn curve_source(&self, test: TestId) -> Result<CurveSource, ConfigError> {
        if let Some(files) = self.curves.get(&test) {
            return Ok(CurveSource::Files(files.clone()));
        }
        if let Some(d) = &self.data_dir {
            if let Ok(files) = default_curve_files(d, test) {
                if !files.is_empty() && files.iter().all(|f| f.is_file()) {
                    return Ok(CurveSource::Files(files));
                }
            }
        }
        if stand_in_curve(test, &self.display).is_some() {
            return Ok(CurveSource::StandIn);
        }
        Err(ConfigError::Invalid(format!(
            "{test} needs curve files (set data_dir or curves.{test})"
        )))
    }
}

enum CurveSource {
    Files(Vec<PathBuf>),
    StandIn,
}

/// Stand-in CSF sampled over an achromatic detection test's range.
/// Gabor area is taken as πR²; noise covers the whole field.
pub fn stand_in_curve(test: TestId, dm: &DisplayModel) -> Option<GroundTruthCurve> {
    let csf = StandInCsf::default();
    let field = dm.width_deg() * dm.height_deg();
    let gabor_area = |r: f64| std::f64::consts::PI * r * r;
    let s = |x: f64| -> f64 {
        let r = match test {
            TestId::GaborAch => csf.sensitivity(x, 100.0, gabor_area(1.0)),
            TestId::NoiseAch => csf.sensitivity(x, 100.0, field),
            TestId::Luminance => csf.sensitivity(2.0, x, gabor_area(1.0)),
            _ => csf.sensitivity(8.0, 100.0, gabor_area(x)),
        };
        r.expect("stand-in parameters are valid")
    };
    if !matches!(
        test,
        TestId::GaborAch | TestId::NoiseAch | TestId::Luminance | TestId::Area
    ) {
        return None;
    }
    let (lo, hi) = test.x_range();
    let points = log_space(lo, hi, 25)
        .into_iter()
        .map(|x| (x, s(x)))
        .collect();
    let mut c = GroundTruthCurve::new(
        test.as_str(),
        test.x_axis(),
        YAxis::Sensitivity,
        "stand-in CSF (built in)",
        points,
    )
    .expect("stand-in curve is well formed");
    c.metadata.insert("stand_in".into(), "true".into());
    Some(c)
}

fn load_curves(
    cfg: &RunConfig,
    test: TestId,
) -> Result<Vec<(CurveRef, GroundTruthCurve)>, RunError> {
    let refs = match cfg.curve_source(test)? {
        CurveSource::StandIn => {
            let c = stand_in_curve(test, &cfg.display).expect("checked by curve_source");
            vec![("stand-in".to_string(), c)]
        }
        CurveSource::Files(files) => files
            .iter()
            .map(|f| {
                Ok((
                    display_path(cfg, f),
                    load_curve(f).map_err(AlignmentError::from)?,
                ))
            })
            .collect::<Result<_, RunError>>()?,
    };
    Ok(refs
        .into_iter()
        .map(|(path, c)| {
            (
                CurveRef {
                    path,
                    digest: c.digest(),
                    source: c.source.clone(),
                },
                c,
            )
        })
        .collect())
}

/// Curve paths in reports are relative to `data_dir` where possible, so
/// reports do not depend on where the repository is checked out.
fn display_path(cfg: &RunConfig, f: &Path) -> String {
    cfg.data_dir
        .as_ref()
        .and_then(|d| f.strip_prefix(d).ok())
        .unwrap_or(f)
        .to_string_lossy()
        .replace('\\', "/")
}

/// Encoder ids as directory names.
pub fn sanitize_id(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "._-".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn noise_seeds(cfg: &RunConfig, test: TestId, n_conditions: usize) -> Vec<Vec<u64>> {
    if !test.uses_noise() {
        return vec![];
    }
    (0..n_conditions)
        .map(|ix| {
            (0..cfg.noise_seeds)
                .map(|k| derive_seed(cfg.seed_base, test, ix, k))
                .collect()
        })
        .collect()
}

/// Runs one test for one encoder. Scoring failures are recorded in the report.
pub fn run_pair(
    cfg: &RunConfig,
    eval: &Evaluator,
    description: &str,
    test: TestId,
) -> Result<AlignmentReport, RunError> {
    let curves = load_curves(cfg, test)?;
    let renderer = eval.renderer();
    let grid = if cfg.scores_only {
        None
    } else {
        let suite = build_test_suite(test, renderer, &cfg.suite_options());
        Some(contour_grid(eval, &suite))
    };
    let opts = cfg.alignment_options();
    let scored: Result<ScoreDetail, AlignmentError> = match test.kind() {
        TestKind::Detection => {
            detection_alignment(eval, test, &curves[0].1, &opts).map(ScoreDetail::Alignment)
        }
        TestKind::Masking => {
            masking_alignment(eval, test, &curves[0].1, &opts).map(ScoreDetail::Alignment)
        }
        TestKind::Matching => {
            let cs: Vec<GroundTruthCurve> = curves.iter().map(|c| c.1.clone()).collect();
            matching_alignment(eval, &cs, &cfg.match_options()).map(ScoreDetail::Matching)
        }
    };
    let n_cond = match &scored {
        Ok(ScoreDetail::Alignment(a)) => a.samples.iter().map(|s| s.j + 1).max().unwrap_or(0),
        _ => 0,
    };
    let (score, reliable, error, detail) = match scored {
        Ok(ScoreDetail::Alignment(a)) => (
            Some(a.r_s),
            Some(a.reliable),
            None,
            Some(ScoreDetail::Alignment(a)),
        ),
        Ok(ScoreDetail::Matching(m)) => (
            Some(m.rmse),
            Some(true),
            None,
            Some(ScoreDetail::Matching(m)),
        ),
        Err(e) => {
            log::warn!("{}/{test}: {e}", eval.encoder_id());
            (None, None, Some(e.to_string()), None)
        }
    };
    Ok(AlignmentReport {
        encoder: eval.encoder_id().to_string(),
        encoder_description: description.to_string(),
        test_id: test,
        metric: AlignmentReport::metric_for(test).to_string(),
        score,
        reliable,
        error,
        display: cfg.display,
        seed_base: cfg.seed_base,
        seeds: noise_seeds(cfg, test, n_cond),
        curves: curves.into_iter().map(|c| c.0).collect(),
        detail,
        grid,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub reports: Vec<AlignmentReport>,
    /// (encoder, test, message) for pairs that produced no score.
    pub failures: Vec<(String, String, String)>,
    pub manifest: Vec<ManifestEntry>,
}

impl RunSummary {
    pub fn all_failed(&self) -> bool {
        self.reports.iter().all(|r| r.score.is_none())
    }
}

/// Writes files below a root and remembers their digests.
struct Sink {
    root: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl Sink {
    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), RunError> {
        let path = self.root.join(rel);
        if let Some(d) = path.parent() {
            std::fs::create_dir_all(d).map_err(|e| RunError::io(d, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| RunError::io(&path, e))?;
        self.entries.push(ManifestEntry {
            path: rel.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    fn finish(mut self) -> Result<Vec<ManifestEntry>, RunError> {
        self.entries.sort_by(|a, b| a.path.cmp(&b.path));
        let json = serde_json::to_string_pretty(&serde_json::json!({ "files": &self.entries }))
            .expect("manifest serialises");
        let path = self.root.join("manifest.json");
        std::fs::write(&path, json + "\n").map_err(|e| RunError::io(&path, e))?;
        Ok(self.entries)
    }
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, RunError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| RunError::Other(e.to_string()))?;
    Ok(pool.install(f))
}

/// Runs every (encoder, test) pair of the configuration.
///
/// Per-pair failures are recorded and the run continues. S_ac values are
/// cached under `<output_dir>/.cache/`, so an interrupted run resumes where
/// it stopped.
pub fn run(cfg: &RunConfig) -> Result<RunSummary, RunError> {
    cfg.validate()?;
    let out = cfg.output_dir.clone();
    std::fs::create_dir_all(&out).map_err(|e| RunError::io(&out, e))?;
    let cache_path = out.join(".cache").join("sac.jsonl");
    let cache = SacCache::open(&cache_path).map_err(|e| RunError::io(&cache_path, e))?;
    let renderer = Renderer::new(cfg.display).map_err(|e| RunError::Other(e.to_string()))?;
    with_pool(cfg.parallelism, || run_inner(cfg, &renderer, &cache))?
}

fn run_inner(
    cfg: &RunConfig,
    renderer: &Renderer,
    cache: &SacCache,
) -> Result<RunSummary, RunError> {
    let mut sink = Sink {
        root: cfg.output_dir.clone(),
        entries: vec![],
    };
    let mut summary = RunSummary::default();
    for enc_cfg in &cfg.encoders {
        let encoder: Box<dyn ImageEncoder> = match enc_cfg.build() {
            Ok(e) => e,
            Err(e) => {
                log::error!("encoder {} failed to start: {e}", enc_cfg.id());
                for &t in &cfg.tests {
                    summary
                        .failures
                        .push((enc_cfg.id().to_string(), t.to_string(), e.to_string()));
                    summary
                        .reports
                        .push(failed_report(cfg, enc_cfg.id(), t, &e.to_string()));
                }
                continue;
            }
        };
        let description = encoder.describe();
        let stim = Rendered::new(encoder);
        let eval = Evaluator::new(&stim, renderer).with_cache(cache);
        for &test in &cfg.tests {
            log::info!("{} / {test}", enc_cfg.id());
            let report = run_pair(cfg, &eval, &description, test)?;
            if let Some(e) = &report.error {
                summary
                    .failures
                    .push((report.encoder.clone(), test.to_string(), e.clone()));
            }
            let dir = sanitize_id(&report.encoder);
            sink.write(&format!("{dir}/{test}.json"), report.to_json().as_bytes())?;
            sink.write(
                &format!("{dir}/{test}.samples.csv"),
                report.samples_csv().as_bytes(),
            )?;
            if let Some(g) = &report.grid {
                sink.write(&format!("{dir}/{test}.grid.csv"), g.to_csv().as_bytes())?;
            }
            summary.reports.push(report);
        }
    }
    sink.write("aggregate.csv", aggregate_csv(&summary.reports).as_bytes())?;
    summary.manifest = sink.finish()?;
    Ok(summary)
}

fn failed_report(cfg: &RunConfig, encoder: &str, test: TestId, error: &str) -> AlignmentReport {
    AlignmentReport {
        encoder: encoder.to_string(),
        encoder_description: String::new(),
        test_id: test,
        metric: AlignmentReport::metric_for(test).to_string(),
        score: None,
        reliable: None,
        error: Some(error.to_string()),
        display: cfg.display,
        seed_base: cfg.seed_base,
        seeds: vec![],
        curves: vec![],
        detail: None,
        grid: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rescore {
    pub encoder: String,
    pub test_id: TestId,
    pub score: f64,
    pub reliable: bool,
    /// `stored-samples`, `grid-interpolation` or `stored-matches`.
    pub method: String,
    pub curve_digests: Vec<String>,
}

/// Re-scores a stored report against (possibly different) curves without
/// calling the encoder.
///
/// When the curve is the one the report was scored with, the stored samples
/// are re-ranked, which reproduces the original score bit for bit. Other
/// detection or masking curves are scored by interpolating the S_ac grid.
/// Matching reports are re-scored from their solved contrasts, which requires
/// the new curves to cover the same points.
pub fn score_report(
    report: &AlignmentReport,
    curves: &[GroundTruthCurve],
    opts: &AlignmentOptions,
) -> Result<Rescore, AlignmentError> {
    let test = report.test_id;
    let digests: Vec<String> = curves.iter().map(|c| c.digest()).collect();
    let done = |score: f64, reliable: bool, method: &str| Rescore {
        encoder: report.encoder.clone(),
        test_id: test,
        score,
        reliable,
        method: method.to_string(),
        curve_digests: digests.clone(),
    };
    match (&report.detail, test.kind()) {
        (Some(ScoreDetail::Matching(m)), TestKind::Matching) => {
            let human = human_points(curves)?;
            let model: Vec<MatchPoint> = m
                .results
                .iter()
                .map(|r| MatchPoint {
                    rho_t: r.rho_t,
                    c_r: r.c_r,
                    c_t: r.c_t,
                })
                .collect();
            Ok(done(matching_rmse(&model, &human)?, true, "stored-matches"))
        }
        (_, TestKind::Matching) => Err(AlignmentError::Domain(
            "report has no matching results".into(),
        )),
        (detail, _) => {
            let [curve] = curves else {
                return Err(AlignmentError::InvalidArgument(format!(
                    "{test} is scored against exactly one curve, got {}",
                    curves.len()
                )));
            };
            if let Some(ScoreDetail::Alignment(a)) = detail {
                if a.curve_digest == curve.digest() {
                    let s = score_samples(
                        test,
                        a.samples.clone(),
                        a.curve_digest.clone(),
                        opts.unreliable_fraction,
                    )?;
                    return Ok(done(s.r_s, s.reliable, "stored-samples"));
                }
            }
            let grid = report.grid.as_ref().ok_or_else(|| {
                AlignmentError::Domain("report has no S_ac grid to interpolate".into())
            })?;
            let s = grid.score(curve, opts)?;
            Ok(done(s.r_s, s.reliable, "grid-interpolation"))
        }
    }
}

/// Sampling options a stored report was produced with.
pub fn rescore_options(report: &AlignmentReport) -> AlignmentOptions {
    let mut opts = AlignmentOptions::default();
    if let Some(ScoreDetail::Alignment(a)) = &report.detail {
        if let Some(j) = a.samples.iter().map(|s| s.j).max() {
            opts.n_conditions = j + 1;
        }
        if let Some(i) = a.samples.iter().map(|s| s.i).max() {
            opts.n_multipliers = i + 1;
        }
    }
    opts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpedImage {
    pub file: String,
    pub preview: String,
    pub ix: usize,
    pub ic: usize,
    pub x: f64,
    pub c: f64,
    pub stimulus: Stimulus,
    pub reference: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpedReference {
    pub file: String,
    pub preview: String,
    pub stimulus: Stimulus,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusManifest {
    pub test_id: TestId,
    pub display: DisplayModel,
    pub suite: SuiteOptions,
    /// Images are display-encoded f32 `[H, W, 3]` in the feature file format.
    pub format: String,
    pub images: Vec<DumpedImage>,
    pub references: Vec<DumpedReference>,
    pub skipped: Vec<crate::suite::SkipRecord>,
}

fn write_image(
    renderer: &Renderer,
    stimulus: &Stimulus,
    dir: &Path,
    stem: &str,
) -> Result<(String, String, String), RunError> {
    let dm = renderer.display();
    let lum = renderer
        .render(stimulus)
        .map_err(|e| RunError::Other(e.to_string()))?;
    let img = display_encode(&lum, dm).map_err(|e| RunError::Other(e.to_string()))?;
    let file = format!("{stem}.vfmf");
    let preview = format!("{stem}.preview.png");
    let bytes = FeatureFile::new(
        vec![dm.height as u32, dm.width as u32, 3],
        img.data().to_vec(),
    )
    .map_err(|e| RunError::Other(e.to_string()))?
    .to_bytes();
    let path = dir.join(&file);
    std::fs::write(&path, &bytes).map_err(|e| RunError::io(&path, e))?;
    let rgb: Vec<u8> = img
        .data()
        .iter()
        .map(|&v| (v * 255.0).round() as u8)
        .collect();
    let png = image::RgbImage::from_raw(dm.width as u32, dm.height as u32, rgb)
        .expect("buffer size matches");
    let ppath = dir.join(&preview);
    png.save(&ppath).map_err(|e| RunError::io(&ppath, e))?;
    Ok((file, preview, hex::encode(Sha256::digest(&bytes))))
}

/// Writes the stimulus lattice of one test: float images, PNG previews and a
/// manifest with the parameters of every image. Noise tests dump the first
/// seed only; references shared by several images are written once.
pub fn dump_stimuli(
    test: TestId,
    renderer: &Renderer,
    opts: &SuiteOptions,
    out: &Path,
) -> Result<StimulusManifest, RunError> {
    std::fs::create_dir_all(out).map_err(|e| RunError::io(out, e))?;
    let suite = build_test_suite(test, renderer, opts);
    let mut references: Vec<DumpedReference> = Vec::new();
    let mut ref_index: BTreeMap<String, usize> = BTreeMap::new();
    for p in &suite.points {
        let key = p.pairs[0].reference.canonical_json();
        if let Entry::Vacant(slot) = ref_index.entry(key) {
            let stem = format!("ref_{:03}", references.len());
            let (file, preview, sha256) = write_image(renderer, &p.pairs[0].reference, out, &stem)?;
            slot.insert(references.len());
            references.push(DumpedReference {
                file,
                preview,
                stimulus: p.pairs[0].reference,
                sha256,
            });
        }
    }
    let images: Vec<DumpedImage> = suite
        .points
        .par_iter()
        .map(|p| {
            let pair = &p.pairs[0];
            let stem = format!("test_c{:02}_x{:02}", p.ic, p.ix);
            let (file, preview, sha256) = write_image(renderer, &pair.test, out, &stem)?;
            let r = ref_index[&pair.reference.canonical_json()];
            Ok(DumpedImage {
                file,
                preview,
                ix: p.ix,
                ic: p.ic,
                x: p.x,
                c: p.c,
                stimulus: pair.test,
                reference: references[r].file.clone(),
                sha256,
            })
        })
        .collect::<Result<_, RunError>>()?;
    let manifest = StimulusManifest {
        test_id: test,
        display: *renderer.display(),
        suite: *opts,
        format: "vfmf f32 [H, W, 3] display-encoded sRGB".into(),
        images,
        references,
        skipped: suite.skipped,
    };
    let path = out.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serialises") + "\n";
    std::fs::write(&path, json).map_err(|e| RunError::io(&path, e))?;
    Ok(manifest)
}

/// Aggregate table over every report found below `dir`.
pub fn report_dir(dir: &Path) -> Result<String, RunError> {
    let reports = crate::report::collect_reports(dir).map_err(|e| RunError::io(dir, e))?;
    if reports.is_empty() {
        return Err(RunError::Other(format!(
            "no reports found below {}",
            dir.display()
        )));
    }
    Ok(aggregate_csv(&reports))
}
