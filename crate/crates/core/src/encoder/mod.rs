//! Encoder abstraction: the raw-pixel baseline, the feature file format and
//! out-of-process adapters.

pub mod feature_file;
pub mod subprocess;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::colorimetry::{display_encode, ColorimetryError, DisplayImage, DisplayModel};
use crate::stimuli::{Renderer, Stimulus, StimulusError};

pub use feature_file::{FeatureFile, FeatureFileError};
pub use subprocess::{AdapterConfig, AdapterPool};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncoderError {
    #[error("encoder returned an empty feature vector")]
    Empty,
    #[error("non-finite feature value {value} at index {index}")]
    NonFinite { index: usize, value: f32 },
    #[error(transparent)]
    Stimulus(#[from] StimulusError),
    #[error(transparent)]
    Colorimetry(#[from] ColorimetryError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("adapter failed to start: {0}")]
    Spawn(String),
    #[error("adapter handshake failed: {0}")]
    Handshake(String),
    #[error("adapter exited: {0}")]
    Crashed(String),
    #[error("adapter did not answer within {ms} ms")]
    Timeout { ms: u64 },
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("adapter reported an error: {0}")]
    Adapter(String),
    #[error("bad feature file: {0}")]
    FeatureFile(#[from] FeatureFileError),
    #[error("adapter pool exhausted: {0}")]
    PoolExhausted(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl EncoderError {
    /// Failures that mean the adapter process can no longer be trusted.
    pub fn poisons_adapter(&self) -> bool {
        matches!(
            self,
            EncoderError::Crashed(_)
                | EncoderError::Timeout { .. }
                | EncoderError::Protocol(_)
                | EncoderError::Io(_)
        )
    }
}

/// Where a feature vector came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub encoder: String,
    pub input_digest: String,
}

/// Finite, non-empty f32 features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f32>,
    provenance: Provenance,
}

impl FeatureVector {
    pub fn new(values: Vec<f32>, provenance: Provenance) -> Result<Self, EncoderError> {
        if values.is_empty() {
            return Err(EncoderError::Empty);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(EncoderError::NonFinite {
                index,
                value: values[index],
            });
        }
        Ok(Self { values, provenance })
    }

    /// Builds a vector with a digest of the values themselves as provenance.
    pub fn from_values(values: Vec<f32>, encoder: &str) -> Result<Self, EncoderError> {
        let mut h = Sha256::new();
        for v in &values {
            h.update(v.to_le_bytes());
        }
        let provenance = Provenance {
            encoder: encoder.to_string(),
            input_digest: hex::encode(h.finalize()),
        };
        Self::new(values, provenance)
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }
}

/// SHA-256 over the dims and f32 payload of a display image.
pub fn image_digest(img: &DisplayImage) -> String {
    let mut h = Sha256::new();
    h.update((img.width() as u64).to_le_bytes());
    h.update((img.height() as u64).to_le_bytes());
    for v in img.data() {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// SHA-256 of a stimulus description together with the display it is shown on.
pub fn stimulus_digest(stimulus: &Stimulus, dm: &DisplayModel) -> String {
    let json = serde_json::to_string(&(stimulus, dm)).expect("serialisable");
    hex::encode(Sha256::digest(json.as_bytes()))
}

/// An encoder that consumes display-encoded images.
pub trait ImageEncoder: Send + Sync {
    fn id(&self) -> &str;

    /// Flattened features for one image.
    fn encode_values(&self, img: &DisplayImage) -> Result<Vec<f32>, EncoderError>;

    fn encode(&self, img: &DisplayImage) -> Result<FeatureVector, EncoderError> {
        let values = self.encode_values(img)?;
        FeatureVector::new(
            values,
            Provenance {
                encoder: self.id().to_string(),
                input_digest: image_digest(img),
            },
        )
    }

    /// Free-form description recorded in reports (adapter name, extraction point).
    fn describe(&self) -> String {
        self.id().to_string()
    }
}

impl<E: ImageEncoder + ?Sized> ImageEncoder for Box<E> {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn encode_values(&self, img: &DisplayImage) -> Result<Vec<f32>, EncoderError> {
        (**self).encode_values(img)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

/// The "no encoder" baseline: the display-encoded pixels themselves.
pub fn raw_features(img: &DisplayImage) -> FeatureVector {
    RawEncoder::default()
        .encode(img)
        .expect("display images are finite and non-empty")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawEncoder {
    id: String,
}

impl RawEncoder {
    pub fn new(id: impl Into<String>) -> Self {
        Self { id: id.into() }
    }
}

impl Default for RawEncoder {
    fn default() -> Self {
        Self::new("no-encoder")
    }
}

impl ImageEncoder for RawEncoder {
    fn id(&self) -> &str {
        &self.id
    }

    fn encode_values(&self, img: &DisplayImage) -> Result<Vec<f32>, EncoderError> {
        Ok(img.data().to_vec())
    }

    fn describe(&self) -> String {
        "builtin-raw: flattened display-encoded pixels (H×W×3, channel fastest)".into()
    }
}

/// An encoder that sees stimulus descriptions. Image encoders become one via
/// [`Rendered`]; synthetic encoders can read the parameters directly.
pub trait StimulusEncoder: Send + Sync {
    fn id(&self) -> &str;

    fn encode_stimulus(
        &self,
        stimulus: &Stimulus,
        renderer: &Renderer,
    ) -> Result<FeatureVector, EncoderError>;

    fn describe(&self) -> String {
        self.id().to_string()
    }
}

/// Renders, display-encodes and forwards to an image encoder.
#[derive(Debug, Clone)]
pub struct Rendered<E> {
    inner: E,
}

impl<E: ImageEncoder> Rendered<E> {
    pub fn new(inner: E) -> Self {
        Self { inner }
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }
}

impl<E: ImageEncoder> StimulusEncoder for Rendered<E> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn encode_stimulus(
        &self,
        stimulus: &Stimulus,
        renderer: &Renderer,
    ) -> Result<FeatureVector, EncoderError> {
        let img = renderer.render(stimulus)?;
        let display = display_encode(&img, renderer.display())?;
        let values = self.inner.encode_values(&display)?;
        FeatureVector::new(
            values,
            Provenance {
                encoder: self.inner.id().to_string(),
                input_digest: stimulus_digest(stimulus, renderer.display()),
            },
        )
    }

    fn describe(&self) -> String {
        self.inner.describe()
    }
}

/// How to construct an encoder, as written in a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EncoderConfig {
    BuiltinRaw { id: String },
    Subprocess(AdapterConfig),
}

impl EncoderConfig {
    pub fn id(&self) -> &str {
        match self {
            EncoderConfig::BuiltinRaw { id } => id,
            EncoderConfig::Subprocess(a) => &a.id,
        }
    }

    pub fn build(&self) -> Result<Box<dyn ImageEncoder>, EncoderError> {
        Ok(match self {
            EncoderConfig::BuiltinRaw { id } => Box::new(RawEncoder::new(id.clone())),
            EncoderConfig::Subprocess(a) => Box::new(AdapterPool::start(a.clone())?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colorimetry::LuminanceImage;

    #[test]
    fn raw_length_and_uniform_value() {
        let dm = DisplayModel::default();
        let img = display_encode(&LuminanceImage::uniform(224, 224, 200.0), &dm).unwrap();
        let f = raw_features(&img);
        assert_eq!(f.len(), 150_528);
        let expected = crate::colorimetry::srgb_oetf(0.5) as f32;
        assert!(f.values().iter().all(|&v| v == expected));
        assert_eq!(crate::metrics::s_ac(&f, &f).unwrap(), 0.0);
    }

    #[test]
    fn raw_is_deterministic_and_rendered_delegates() {
        let dm = DisplayModel::default();
        let r = Renderer::new(dm).unwrap();
        let s = Stimulus::Gabor(crate::stimuli::GaborSpec::achromatic(100.0, 0.3, 4.0, 1.0));
        let img = display_encode(&r.render(&s).unwrap(), &dm).unwrap();
        let direct = RawEncoder::default().encode(&img).unwrap();
        let via = Rendered::new(RawEncoder::default())
            .encode_stimulus(&s, &r)
            .unwrap();
        assert_eq!(direct.values(), via.values());
        assert_eq!(via.provenance().input_digest, stimulus_digest(&s, &dm));
        assert_eq!(direct, RawEncoder::default().encode(&img).unwrap());
    }

    #[test]
    fn feature_vectors_reject_bad_values() {
        assert_eq!(
            FeatureVector::from_values(vec![], "x"),
            Err(EncoderError::Empty)
        );
        assert!(matches!(
            FeatureVector::from_values(vec![1.0, f32::NAN], "x"),
            Err(EncoderError::NonFinite { index: 1, .. })
        ));
        assert!(FeatureVector::from_values(vec![f32::INFINITY], "x").is_err());
    }

    #[test]
    fn encoder_config_json() {
        let c: EncoderConfig =
            serde_json::from_str(r#"{"kind":"builtin-raw","id":"raw"}"#).unwrap();
        assert_eq!(c.id(), "raw");
        let c: EncoderConfig =
            serde_json::from_str(r#"{"kind":"subprocess","id":"m","command":["python3","a.py"]}"#)
                .unwrap();
        let EncoderConfig::Subprocess(a) = c else {
            panic!()
        };
        assert_eq!(a.instances, 1);
    }
}
