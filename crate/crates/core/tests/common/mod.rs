#![allow(dead_code)]

use std::path::PathBuf;

use vfmprobe_core::encoder::stimulus_digest;
use vfmprobe_core::{
    EncoderError, FeatureVector, GroundTruthCurve, Provenance, Renderer, Stimulus, StimulusEncoder,
    TestId,
};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn features(
    v: Vec<f32>,
    id: &str,
    s: &Stimulus,
    r: &Renderer,
) -> Result<FeatureVector, EncoderError> {
    FeatureVector::new(
        v,
        Provenance {
            encoder: id.to_string(),
            input_digest: stimulus_digest(s, r.display()),
        },
    )
}

/// Condition value a stimulus was generated for.
pub fn condition_of(test: TestId, s: &Stimulus) -> Option<f64> {
    match (test, s) {
        (TestId::GaborAch | TestId::GaborRg | TestId::GaborYv, Stimulus::Gabor(g)) => Some(g.rho),
        (TestId::Luminance, Stimulus::Gabor(g)) => Some(g.l_b),
        (TestId::Area, Stimulus::Gabor(g)) => Some(g.radius),
        (TestId::NoiseAch, Stimulus::Noise(n)) => Some(n.f_lo * std::f64::consts::SQRT_2),
        (TestId::MaskingCoherent | TestId::MaskingIncoherent, Stimulus::Masked(m)) => {
            Some(m.mask.contrast())
        }
        _ => None,
    }
}

/// Responds to test contrast relative to the human threshold at the
/// stimulus' condition: features `[1, c/Y(x)]` against `[1, 0]` for
/// references, so S_ac = atan(c/Y)/π rises strictly with contrast.
pub struct ThresholdNormalized {
    pub test: TestId,
    pub curve: GroundTruthCurve,
}

impl StimulusEncoder for ThresholdNormalized {
    fn id(&self) -> &str {
        "threshold-normalized"
    }

    fn encode_stimulus(&self, s: &Stimulus, r: &Renderer) -> Result<FeatureVector, EncoderError> {
        let v = match condition_of(self.test, s) {
            Some(x) => {
                let y = self
                    .curve
                    .threshold_contrast_at(x)
                    .map_err(|e| EncoderError::InvalidInput(e.to_string()))?;
                vec![1.0, (s.contrast() / y) as f32]
            }
            None => vec![1.0, 0.0],
        };
        features(v, self.id(), s, r)
    }
}

/// Features `[cos πc, sin πc]`, so S_ac against a uniform field equals `c`.
pub struct ContrastReadout;

impl StimulusEncoder for ContrastReadout {
    fn id(&self) -> &str {
        "contrast-readout"
    }

    fn encode_stimulus(&self, s: &Stimulus, r: &Renderer) -> Result<FeatureVector, EncoderError> {
        let a = std::f64::consts::PI * s.contrast();
        features(vec![a.cos() as f32, a.sin() as f32], self.id(), s, r)
    }
}

/// Same vector for every input.
pub struct Constant;

impl StimulusEncoder for Constant {
    fn id(&self) -> &str {
        "constant"
    }

    fn encode_stimulus(&self, s: &Stimulus, r: &Renderer) -> Result<FeatureVector, EncoderError> {
        features(vec![1.0, 2.0, 3.0], self.id(), s, r)
    }
}
