use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{multipliers, spearman, AlignmentError, Evaluator};
use crate::reference::GroundTruthCurve;
use crate::suite::{log_space, SuiteOptions, TestId, TestKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignmentOptions {
    /// Detection conditions N; masking uses the curve's own points.
    pub n_conditions: usize,
    pub n_multipliers: usize,
    pub suite: SuiteOptions,
    /// Scores with a larger skipped fraction are flagged unreliable.
    pub unreliable_fraction: f64,
}

impl Default for AlignmentOptions {
    fn default() -> Self {
        Self {
            n_conditions: 20,
            n_multipliers: 10,
            suite: SuiteOptions::default(),
            unreliable_fraction: 0.2,
        }
    }
}

/// One (condition, multiplier) sample of the alignment grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentSample {
    pub j: usize,
    pub i: usize,
    /// Condition X_j.
    pub x: f64,
    /// Human threshold Y_j.
    pub y: f64,
    pub m: f64,
    /// Stimulus contrast m·Y_j.
    pub c: f64,
    pub s: Option<f64>,
    /// Per-seed S_ac for noise tests.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_seed: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skip: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentScore {
    pub test_id: TestId,
    pub r_s: f64,
    pub reliable: bool,
    pub n_samples: usize,
    pub n_skipped: usize,
    pub curve_digest: String,
    pub samples: Vec<AlignmentSample>,
}

/// Spearman correlation between multipliers and S_ac over the non-skipped samples.
pub fn score_samples(
    test_id: TestId,
    samples: Vec<AlignmentSample>,
    curve_digest: String,
    unreliable_fraction: f64,
) -> Result<AlignmentScore, AlignmentError> {
    let (m, s): (Vec<f64>, Vec<f64>) = samples.iter().filter_map(|p| p.s.map(|s| (p.m, s))).unzip();
    let n_skipped = samples.len() - s.len();
    let r_s = spearman(&m, &s)?;
    let reliable = (n_skipped as f64) <= unreliable_fraction * samples.len() as f64;
    if !reliable {
        log::warn!(
            "{test_id}: {n_skipped}/{} samples skipped, score unreliable",
            samples.len()
        );
    }
    Ok(AlignmentScore {
        test_id,
        r_s,
        reliable,
        n_samples: samples.len(),
        n_skipped,
        curve_digest,
        samples,
    })
}

fn check_axis(test: TestId, curve: &GroundTruthCurve) -> Result<(), AlignmentError> {
    if curve.x_axis != test.x_axis() {
        return Err(AlignmentError::Domain(format!(
            "{test} expects x in {}, curve has {}",
            test.x_axis(),
            curve.x_axis
        )));
    }
    Ok(())
}

/// The conditions and thresholds a test is sampled at.
pub(crate) fn conditions(
    test: TestId,
    curve: &GroundTruthCurve,
    n: usize,
) -> Result<Vec<(f64, f64)>, AlignmentError> {
    check_axis(test, curve)?;
    let xs = match test.kind() {
        TestKind::Detection => {
            if n < 2 {
                return Err(AlignmentError::InvalidArgument(format!(
                    "need at least 2 conditions, got {n}"
                )));
            }
            let (lo, hi) = test.x_range();
            log_space(lo, hi, n)
        }
        TestKind::Masking => {
            let (lo, hi) = test.x_range();
            let xs = curve.xs();
            if let Some(&x) = xs
                .iter()
                .find(|&&x| x < lo * (1.0 - 1e-9) || x > hi * (1.0 + 1e-9))
            {
                return Err(AlignmentError::Domain(format!(
                    "curve point x={x} lies outside the {test} mask range [{lo}, {hi}]"
                )));
            }
            xs
        }
        TestKind::Matching => {
            return Err(AlignmentError::WrongTestKind {
                test: test.to_string(),
                expected: "detection or masking",
            })
        }
    };
    xs.into_iter()
        .map(|x| Ok((x, curve.threshold_contrast_at(x)?)))
        .collect()
}

/// The N×M sample lattice with contrasts above the test's range pre-marked as skipped.
pub(crate) fn sample_lattice(
    test: TestId,
    conds: &[(f64, f64)],
    n_multipliers: usize,
) -> Result<Vec<AlignmentSample>, AlignmentError> {
    let ms = multipliers(n_multipliers)?;
    let c_max = test.contrast_range().1;
    let mut out = Vec::with_capacity(conds.len() * ms.len());
    for (j, &(x, y)) in conds.iter().enumerate() {
        for (i, &m) in ms.iter().enumerate() {
            let c = m * y;
            out.push(AlignmentSample {
                j,
                i,
                x,
                y,
                m,
                c,
                s: None,
                per_seed: vec![],
                skip: (c > c_max)
                    .then(|| format!("contrast {c} above the test range maximum {c_max}")),
            });
        }
    }
    Ok(out)
}

fn run(
    eval: &Evaluator,
    test: TestId,
    curve: &GroundTruthCurve,
    opts: &AlignmentOptions,
) -> Result<AlignmentScore, AlignmentError> {
    let conds = conditions(test, curve, opts.n_conditions)?;
    let mut samples = sample_lattice(test, &conds, opts.n_multipliers)?;
    let suite = SuiteOptions {
        noise_seeds: opts.suite.seeds_for(test),
        ..opts.suite
    };
    let dm = *eval.renderer().display();
    samples
        .par_iter_mut()
        .filter(|p| p.skip.is_none())
        .for_each(|p| {
            let pairs = test.pairs(p.x, p.c, p.j, &suite, &dm);
            match eval.sac_mean(&pairs) {
                Ok((mean, per)) => {
                    p.s = Some(mean);
                    if pairs.len() > 1 {
                        p.per_seed = per;
                    }
                }
                Err(e) => {
                    log::info!("{test}: skipping x={} c={}: {e}", p.x, p.c);
                    p.skip = Some(e.to_string());
                }
            }
        });
    score_samples(test, samples, curve.digest(), opts.unreliable_fraction)
}

/// Multiplier-sampled alignment for the six detection tests.
pub fn detection_alignment(
    eval: &Evaluator,
    test: TestId,
    curve: &GroundTruthCurve,
    opts: &AlignmentOptions,
) -> Result<AlignmentScore, AlignmentError> {
    if test.kind() != TestKind::Detection {
        return Err(AlignmentError::WrongTestKind {
            test: test.to_string(),
            expected: "detection",
        });
    }
    run(eval, test, curve, opts)
}

/// As [`detection_alignment`], with one condition per human data point.
pub fn masking_alignment(
    eval: &Evaluator,
    test: TestId,
    curve: &GroundTruthCurve,
    opts: &AlignmentOptions,
) -> Result<AlignmentScore, AlignmentError> {
    if test.kind() != TestKind::Masking {
        return Err(AlignmentError::WrongTestKind {
            test: test.to_string(),
            expected: "masking",
        });
    }
    run(eval, test, curve, opts)
}
