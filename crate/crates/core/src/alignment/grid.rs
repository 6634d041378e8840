use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::detection::{conditions, sample_lattice, score_samples};
use super::{AlignmentError, AlignmentOptions, AlignmentScore, Evaluator};
use crate::reference::GroundTruthCurve;
use crate::suite::{SkipRecord, TestId, TestKind, TestSuite};

/// Dense S_ac over a test's contrast × condition lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourGrid {
    pub test_id: TestId,
    pub encoder: String,
    pub x: Vec<f64>,
    pub contrast: Vec<f64>,
    /// `sac[ic][ix]`; `None` where the point was skipped.
    pub sac: Vec<Vec<Option<f64>>>,
    pub skipped: Vec<SkipRecord>,
}

/// Evaluates every renderable point of `suite`.
pub fn contour_grid(eval: &Evaluator, suite: &TestSuite) -> ContourGrid {
    let mut sac = vec![vec![None; suite.x.len()]; suite.contrast.len()];
    let mut skipped = suite.skipped.clone();
    let values: Vec<_> = suite
        .points
        .par_iter()
        .map(|p| (p, eval.sac_mean(&p.pairs)))
        .collect();
    for (p, v) in values {
        match v {
            Ok((mean, _)) => sac[p.ic][p.ix] = Some(mean),
            Err(e) => skipped.push(SkipRecord {
                ix: p.ix,
                ic: p.ic,
                x: p.x,
                c: p.c,
                reason: e.to_string(),
            }),
        }
    }
    skipped.sort_by_key(|s| (s.ic, s.ix));
    ContourGrid {
        test_id: suite.test_id,
        encoder: eval.encoder_id().to_string(),
        x: suite.x.clone(),
        contrast: suite.contrast.clone(),
        sac,
        skipped,
    }
}

fn bracket(axis: &[f64], v: f64, name: &str) -> Result<(usize, f64), AlignmentError> {
    let (lo, hi) = (axis[0], axis[axis.len() - 1]);
    if !(v >= lo && v <= hi) {
        return Err(AlignmentError::Domain(format!(
            "{name} {v} outside the sampled range [{lo}, {hi}]"
        )));
    }
    if axis.len() == 1 {
        return Ok((0, 0.0));
    }
    let k = axis.partition_point(|&a| a <= v).clamp(1, axis.len() - 1) - 1;
    let t = (v.ln() - axis[k].ln()) / (axis[k + 1].ln() - axis[k].ln());
    Ok((k, t))
}

impl ContourGrid {
    /// Bilinear interpolation in (log x, log c).
    pub fn interpolate(&self, x: f64, c: f64) -> Result<f64, AlignmentError> {
        let (kx, tx) = bracket(&self.x, x, "condition")?;
        let (kc, tc) = bracket(&self.contrast, c, "contrast")?;
        let at = |ic: usize, ix: usize| -> Result<f64, AlignmentError> {
            let ic = ic.min(self.contrast.len() - 1);
            let ix = ix.min(self.x.len() - 1);
            self.sac[ic][ix].ok_or_else(|| {
                AlignmentError::Domain(format!(
                    "grid value missing at x={} c={}",
                    self.x[ix], self.contrast[ic]
                ))
            })
        };
        let mut acc = 0.0;
        for (dc, wc) in [(0, 1.0 - tc), (1, tc)] {
            for (dx, wx) in [(0, 1.0 - tx), (1, tx)] {
                let w = wc * wx;
                if w != 0.0 {
                    acc += w * at(kc + dc, kx + dx)?;
                }
            }
        }
        Ok(acc)
    }

    /// Flat CSV, one row per lattice point. Detection tests also carry
    /// sensitivity = 1/contrast.
    pub fn to_csv(&self) -> String {
        let detection = self.test_id.kind() == TestKind::Detection;
        let mut s = String::from("ix,ic,x,contrast,sensitivity,sac\n");
        for (ic, row) in self.sac.iter().enumerate() {
            for (ix, v) in row.iter().enumerate() {
                let c = self.contrast[ic];
                let sens = if detection {
                    format!("{}", 1.0 / c)
                } else {
                    String::new()
                };
                let v = v.map(|v| format!("{v}")).unwrap_or_default();
                s.push_str(&format!("{ix},{ic},{},{c},{sens},{v}\n", self.x[ix]));
            }
        }
        s
    }

    /// Re-scores the grid against a curve without running the encoder.
    ///
    /// Samples above the grid's contrast range are skipped as in a live run;
    /// a human threshold outside the sampled range is a domain error.
    pub fn score(
        &self,
        curve: &GroundTruthCurve,
        opts: &AlignmentOptions,
    ) -> Result<AlignmentScore, AlignmentError> {
        let conds = conditions(self.test_id, curve, opts.n_conditions)?;
        let (c_lo, c_hi) = (self.contrast[0], self.contrast[self.contrast.len() - 1]);
        if let Some(&(x, y)) = conds.iter().find(|&&(_, y)| y < c_lo || y > c_hi) {
            return Err(AlignmentError::Domain(format!(
                "human threshold {y} at x={x} outside the sampled contrast range [{c_lo}, {c_hi}]"
            )));
        }
        let mut samples = sample_lattice(self.test_id, &conds, opts.n_multipliers)?;
        for p in samples.iter_mut().filter(|p| p.skip.is_none()) {
            if p.c < c_lo {
                p.skip = Some(format!(
                    "contrast {} below the sampled range [{c_lo}, {c_hi}]",
                    p.c
                ));
                continue;
            }
            match self.interpolate(p.x, p.c) {
                Ok(v) => p.s = Some(v),
                Err(e) => p.skip = Some(e.to_string()),
            }
        }
        score_samples(
            self.test_id,
            samples,
            curve.digest(),
            opts.unreliable_fraction,
        )
    }
}
