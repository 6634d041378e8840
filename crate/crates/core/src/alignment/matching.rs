use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AlignmentError, Evaluator};
use crate::reference::{GroundTruthCurve, YAxis};
use crate::stimuli::{GratingSpec, Stimulus, StimulusPair};
use crate::suite::{log_space, TestId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchOptions {
    pub rho_r: f64,
    pub l_b: f64,
    pub c_lo: f64,
    pub c_hi: f64,
    pub grid_points: usize,
    /// Relative width at which golden-section refinement stops.
    pub rel_tol: f64,
    /// Divide S_ac by its value at `c_hi` for the same frequency before matching.
    pub normalized: bool,
}

impl Default for MatchOptions {
    fn default() -> Self {
        Self {
            rho_r: 5.0,
            l_b: 10.0,
            c_lo: 1e-4,
            c_hi: 1.0,
            grid_points: 32,
            rel_tol: 1e-3,
            normalized: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchStatus {
    Converged,
    Boundary,
    NonMonotoneFallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub rho_t: f64,
    pub c_r: f64,
    pub c_t: f64,
    pub status: MatchStatus,
    /// S_ac of the reference grating.
    pub target: f64,
    /// S_ac of the test grating at `c_t`.
    pub achieved: f64,
    pub evaluations: usize,
}

/// A matched contrast at one (test frequency, reference contrast) point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchPoint {
    pub rho_t: f64,
    pub c_r: f64,
    pub c_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingScore {
    pub rmse: f64,
    pub n_boundary: usize,
    pub n_fallback: usize,
    pub curve_digests: Vec<String>,
    pub human: Vec<MatchPoint>,
    pub results: Vec<MatchResult>,
}

fn sac_at(eval: &Evaluator, rho: f64, c: f64, opts: &MatchOptions) -> Result<f64, AlignmentError> {
    let pair = StimulusPair {
        test: Stimulus::Grating(GratingSpec::new(opts.l_b, c, rho)),
        reference: Stimulus::Uniform { l_b: opts.l_b },
    };
    eval.sac(&pair)
        .map_err(|e| AlignmentError::Encoder(e.to_string()))
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the minimum of `f` over `[a, b]` in log contrast.
/// Returns the best point evaluated, including the bracket ends.
fn golden(
    mut f: impl FnMut(f64) -> Result<f64, AlignmentError>,
    (a, fa): (f64, f64),
    (b, fb): (f64, f64),
    rel_tol: f64,
) -> Result<(f64, f64), AlignmentError> {
    let stop = (1.0 + rel_tol).ln();
    let (mut lo, mut hi) = (a.ln(), b.ln());
    let mut best = if fa <= fb { (a, fa) } else { (b, fb) };
    let keep = |c: f64, v: f64, best: &mut (f64, f64)| {
        if v < best.1 || (v == best.1 && c < best.0) {
            *best = (c, v);
        }
    };
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1.exp())?;
    let mut f2 = f(x2.exp())?;
    keep(x1.exp(), f1, &mut best);
    keep(x2.exp(), f2, &mut best);
    while hi - lo > stop {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1.exp())?;
            keep(x1.exp(), f1, &mut best);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2.exp())?;
            keep(x2.exp(), f2, &mut best);
        }
    }
    Ok(best)
}

/// Finds the test contrast whose S_ac against a uniform field equals that of
/// the reference grating at `c_r`.
///
/// The objective `(S(ρ_t, c_t) − S(ρ_r, c_r))²` is sampled on a log grid; every
/// local minimum is refined by golden-section search, so non-monotone encoders
/// are handled. When several refined minima are equally good the smallest
/// contrast wins and the result is flagged.
pub fn contrast_match(
    eval: &Evaluator,
    rho_t: f64,
    c_r: f64,
    opts: &MatchOptions,
) -> Result<MatchResult, AlignmentError> {
    if !(c_r > 0.0 && c_r <= opts.c_hi) {
        return Err(AlignmentError::InvalidArgument(format!(
            "reference contrast {c_r} outside (0, {}]",
            opts.c_hi
        )));
    }
    if !(rho_t > 0.0 && rho_t.is_finite()) {
        return Err(AlignmentError::InvalidArgument(format!(
            "test frequency {rho_t} must be positive"
        )));
    }
    if opts.grid_points < 3 || !(opts.c_lo > 0.0 && opts.c_lo < opts.c_hi) || !(opts.rel_tol > 0.0)
    {
        return Err(AlignmentError::InvalidArgument(
            "bad matching solver options".into(),
        ));
    }
    let mut evaluations = 0usize;
    let (norm_t, norm_r) = if opts.normalized {
        evaluations += 2;
        (
            sac_at(eval, rho_t, opts.c_hi, opts)?,
            sac_at(eval, opts.rho_r, opts.c_hi, opts)?,
        )
    } else {
        (1.0, 1.0)
    };
    let target = sac_at(eval, opts.rho_r, c_r, opts)? / norm_r;
    evaluations += 1;
    let response =
        |c: f64| -> Result<f64, AlignmentError> { Ok(sac_at(eval, rho_t, c, opts)? / norm_t) };

    let grid = log_space(opts.c_lo, opts.c_hi, opts.grid_points);
    let values: Vec<f64> = grid
        .iter()
        .map(|&c| response(c).map(|s| (s - target) * (s - target)))
        .collect::<Result<_, _>>()?;
    evaluations += grid.len();

    let n = grid.len();
    let minima: Vec<usize> = (0..n)
        .filter(|&k| {
            (k == 0 || values[k] <= values[k - 1]) && (k == n - 1 || values[k] <= values[k + 1])
        })
        .collect();
    // a plateau of equal values yields adjacent minima; keep the first of each run
    let minima: Vec<usize> = minima
        .iter()
        .enumerate()
        .filter(|&(q, &k)| q == 0 || minima[q - 1] + 1 != k)
        .map(|(_, &k)| k)
        .collect();

    let mut refined = Vec::with_capacity(minima.len());
    for &k in &minima {
        let a = k.saturating_sub(1);
        let b = (k + 1).min(n - 1);
        let obj = |c: f64| {
            evaluations += 1;
            response(c).map(|s| (s - target) * (s - target))
        };
        refined.push(golden(
            obj,
            (grid[a], values[a]),
            (grid[b], values[b]),
            opts.rel_tol,
        )?);
    }
    // minima whose residual |S − T| is within the solver resolution of the best tie
    let best = refined
        .iter()
        .map(|r| r.1.sqrt())
        .fold(f64::INFINITY, f64::min);
    let tie = best + opts.rel_tol * target.abs();
    let ties: Vec<(f64, f64)> = refined.into_iter().filter(|r| r.1.sqrt() <= tie).collect();
    let (c_t, _) = ties
        .iter()
        .copied()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("at least one minimum");
    let at_edge =
        c_t <= opts.c_lo * (1.0 + opts.rel_tol) || c_t >= opts.c_hi / (1.0 + opts.rel_tol);
    let status = if ties.len() > 1 {
        MatchStatus::NonMonotoneFallback
    } else if at_edge {
        MatchStatus::Boundary
    } else {
        MatchStatus::Converged
    };
    let achieved = response(c_t)?;
    evaluations += 1;
    Ok(MatchResult {
        rho_t,
        c_r,
        c_t,
        status,
        target,
        achieved,
        evaluations,
    })
}

fn point_key(rho_t: f64, c_r: f64) -> String {
    format!("rho_t={rho_t:.9e} c_r={c_r:.9e}")
}

/// RMSE of log10 matched contrast over points shared by both sides.
pub fn matching_rmse(model: &[MatchPoint], human: &[MatchPoint]) -> Result<f64, AlignmentError> {
    let index = |pts: &[MatchPoint]| -> Result<BTreeMap<String, f64>, AlignmentError> {
        let mut m = BTreeMap::new();
        for p in pts {
            if !(p.c_t > 0.0 && p.c_t.is_finite()) {
                return Err(AlignmentError::InvalidArgument(format!(
                    "matched contrast {} at {} is not positive",
                    p.c_t,
                    point_key(p.rho_t, p.c_r)
                )));
            }
            m.insert(point_key(p.rho_t, p.c_r), p.c_t);
        }
        Ok(m)
    };
    let (a, b) = (index(model)?, index(human)?);
    let missing: Vec<String> = a
        .keys()
        .filter(|k| !b.contains_key(*k))
        .chain(b.keys().filter(|k| !a.contains_key(*k)))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(AlignmentError::MissingPoints(missing));
    }
    if a.is_empty() {
        return Err(AlignmentError::TooShort(0));
    }
    let sum: f64 = a
        .iter()
        .map(|(k, &c)| {
            let d = c.log10() - b[k].log10();
            d * d
        })
        .sum();
    Ok((sum / a.len() as f64).sqrt())
}

/// Human matching points from curves carrying a `reference_contrast`.
pub fn human_points(curves: &[GroundTruthCurve]) -> Result<Vec<MatchPoint>, AlignmentError> {
    let mut out = Vec::new();
    for curve in curves {
        if curve.y_axis != YAxis::MatchedContrast || curve.x_axis != TestId::Matching.x_axis() {
            return Err(AlignmentError::Domain(format!(
                "matching curves need x in {} and y in {}, got {} and {}",
                TestId::Matching.x_axis(),
                YAxis::MatchedContrast,
                curve.x_axis,
                curve.y_axis
            )));
        }
        let c_r = curve.reference_contrast().ok_or_else(|| {
            AlignmentError::Domain("matching curve lacks reference_contrast".into())
        })?;
        let (lo, hi) = TestId::Matching.x_range();
        for &(rho_t, c_t) in &curve.points {
            if rho_t < lo * (1.0 - 1e-9) || rho_t > hi * (1.0 + 1e-9) {
                return Err(AlignmentError::Domain(format!(
                    "test frequency {rho_t} outside the matching range [{lo}, {hi}]"
                )));
            }
            out.push(MatchPoint { rho_t, c_r, c_t });
        }
    }
    Ok(out)
}

/// Solves every human data point and scores the model by log-contrast RMSE.
pub fn matching_alignment(
    eval: &Evaluator,
    curves: &[GroundTruthCurve],
    opts: &MatchOptions,
) -> Result<MatchingScore, AlignmentError> {
    let human = human_points(curves)?;
    let results: Vec<MatchResult> = human
        .par_iter()
        .map(|p| contrast_match(eval, p.rho_t, p.c_r, opts))
        .collect::<Result<_, _>>()?;
    score_matches(human, results, curves.iter().map(|c| c.digest()).collect())
}

pub fn score_matches(
    human: Vec<MatchPoint>,
    results: Vec<MatchResult>,
    curve_digests: Vec<String>,
) -> Result<MatchingScore, AlignmentError> {
    let model: Vec<MatchPoint> = results
        .iter()
        .map(|r| MatchPoint {
            rho_t: r.rho_t,
            c_r: r.c_r,
            c_t: r.c_t,
        })
        .collect();
    let rmse = matching_rmse(&model, &human)?;
    Ok(MatchingScore {
        rmse,
        n_boundary: results
            .iter()
            .filter(|r| r.status == MatchStatus::Boundary)
            .count(),
        n_fallback: results
            .iter()
            .filter(|r| r.status == MatchStatus::NonMonotoneFallback)
            .count(),
        curve_digests,
        human,
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64, f64)]) -> Vec<MatchPoint> {
        v.iter()
            .map(|&(rho_t, c_r, c_t)| MatchPoint { rho_t, c_r, c_t })
            .collect()
    }

    #[test]
    fn rmse_identities() {
        let h = pts(&[(1.0, 0.1, 0.12), (2.0, 0.1, 0.09), (10.0, 0.3, 0.4)]);
        assert_eq!(matching_rmse(&h, &h).unwrap(), 0.0);
        let shifted: Vec<MatchPoint> = h
            .iter()
            .map(|p| MatchPoint {
                c_t: p.c_t * 10.0,
                ..*p
            })
            .collect();
        assert!((matching_rmse(&shifted, &h).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(
            matching_rmse(&shifted, &h).unwrap(),
            matching_rmse(&h, &shifted).unwrap()
        );
    }

    #[test]
    fn rmse_lists_missing_points() {
        let a = pts(&[(1.0, 0.1, 0.1), (2.0, 0.1, 0.1)]);
        let b = pts(&[(1.0, 0.1, 0.1), (3.0, 0.1, 0.1)]);
        match matching_rmse(&a, &b) {
            Err(AlignmentError::MissingPoints(m)) => assert_eq!(m.len(), 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn golden_finds_parabola_minimum() {
        let f = |c: f64| Ok((c.ln() - 0.3f64.ln()).powi(2));
        let (c, _) = golden(f, (0.1, f(0.1).unwrap()), (1.0, f(1.0).unwrap()), 1e-3).unwrap();
        assert!((c / 0.3 - 1.0).abs() < 1e-3);
    }
}
