//! Feature-space distances.

use thiserror::Error;

use crate::encoder::FeatureVector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("feature lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("{which} feature vector has zero norm; the angle is undefined")]
    ZeroNorm { which: &'static str },
}

/// Cosine-angle dissimilarity `arccos(cos θ)/π` between two feature vectors.
pub fn s_ac(test: &FeatureVector, reference: &FeatureVector) -> Result<f64, MetricError> {
    s_ac_slices(test.values(), reference.values())
}

/// [`s_ac`] on raw slices; accumulation is always in f64.
pub fn s_ac_slices<T: Copy + Into<f64>>(a: &[T], b: &[T]) -> Result<f64, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch(a.len(), b.len()));
    }
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y): (f64, f64) = (x.into(), y.into());
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 {
        return Err(MetricError::ZeroNorm { which: "test" });
    }
    if nb == 0.0 {
        return Err(MetricError::ZeroNorm { which: "reference" });
    }
    // sqrt(na·nb) is exact when na == nb, so a == ±b gives cos = ±1 exactly
    let prod = na * nb;
    let denom = if prod.is_finite() && prod > 0.0 {
        prod.sqrt()
    } else {
        na.sqrt() * nb.sqrt()
    };
    let cos = dot / denom;
    Ok(cos.clamp(-1.0, 1.0).acos() / std::f64::consts::PI)
}

pub fn l1_distance(a: &FeatureVector, b: &FeatureVector) -> Result<f64, MetricError> {
    let (a, b) = (a.values(), b.values());
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch(a.len(), b.len()));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(&x, &y)| (x as f64 - y as f64).abs())
        .sum())
}

pub fn l2_distance(a: &FeatureVector, b: &FeatureVector) -> Result<f64, MetricError> {
    let (a, b) = (a.values(), b.values());
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch(a.len(), b.len()));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt())
}
