use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::cache::{sac_key, SacCache};
use crate::colorimetry::ColorimetryError;
use crate::encoder::{EncoderError, FeatureVector, StimulusEncoder};
use crate::metrics::s_ac;
use crate::stimuli::{Renderer, Stimulus, StimulusError, StimulusPair};

/// Why a single grid sample has no S_ac value.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SampleError {
    #[error("out of gamut: {0}")]
    Gamut(String),
    #[error("encoder: {0}")]
    Encoder(String),
    #[error("metric: {0}")]
    Metric(String),
}

impl From<EncoderError> for SampleError {
    fn from(e: EncoderError) -> Self {
        let gamut = match &e {
            EncoderError::Stimulus(s) => s.is_gamut(),
            EncoderError::Colorimetry(c) => matches!(
                c,
                ColorimetryError::OutOfGamut { .. } | ColorimetryError::NegativeLuminance { .. }
            ),
            _ => false,
        };
        if gamut {
            SampleError::Gamut(e.to_string())
        } else {
            SampleError::Encoder(e.to_string())
        }
    }
}

impl From<StimulusError> for SampleError {
    fn from(e: StimulusError) -> Self {
        EncoderError::from(e).into()
    }
}

/// Computes S_ac for stimulus pairs with one encoder.
///
/// Reference features are memoised, since every test stimulus at a condition
/// shares the same reference. S_ac values go through the optional cache.
pub struct Evaluator<'a> {
    encoder: &'a dyn StimulusEncoder,
    renderer: &'a Renderer,
    cache: Option<&'a SacCache>,
    refs: Mutex<HashMap<String, Arc<FeatureVector>>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(encoder: &'a dyn StimulusEncoder, renderer: &'a Renderer) -> Self {
        Self {
            encoder,
            renderer,
            cache: None,
            refs: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_cache(mut self, cache: &'a SacCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn encoder_id(&self) -> &str {
        self.encoder.id()
    }

    pub fn encoder(&self) -> &dyn StimulusEncoder {
        self.encoder
    }

    pub fn renderer(&self) -> &Renderer {
        self.renderer
    }

    pub fn features(&self, stimulus: &Stimulus) -> Result<FeatureVector, SampleError> {
        Ok(self.encoder.encode_stimulus(stimulus, self.renderer)?)
    }

    fn reference_features(&self, stimulus: &Stimulus) -> Result<Arc<FeatureVector>, SampleError> {
        let key = stimulus.canonical_json();
        if let Some(f) = self.refs.lock().unwrap().get(&key) {
            return Ok(Arc::clone(f));
        }
        let f = Arc::new(self.features(stimulus)?);
        self.refs.lock().unwrap().insert(key, Arc::clone(&f));
        Ok(f)
    }

    pub fn sac(&self, pair: &StimulusPair) -> Result<f64, SampleError> {
        let key = self
            .cache
            .map(|_| sac_key(self.encoder.id(), self.renderer.display(), pair));
        if let (Some(cache), Some(k)) = (self.cache, &key) {
            if let Some(v) = cache.get(k) {
                return Ok(v);
            }
        }
        let reference = self.reference_features(&pair.reference)?;
        let test = self.features(&pair.test)?;
        let v = s_ac(&test, &reference).map_err(|e| SampleError::Metric(e.to_string()))?;
        if let (Some(cache), Some(k)) = (self.cache, key) {
            if let Err(e) = cache.insert(k, v) {
                log::warn!("could not persist cache entry: {e}");
            }
        }
        Ok(v)
    }

    /// Mean S_ac over pairs that differ only in their noise seed, with the
    /// per-pair values. Any failing pair fails the whole sample.
    pub fn sac_mean(&self, pairs: &[StimulusPair]) -> Result<(f64, Vec<f64>), SampleError> {
        let per: Vec<f64> = pairs
            .iter()
            .map(|p| self.sac(p))
            .collect::<Result<_, _>>()?;
        if per.is_empty() {
            return Err(SampleError::Encoder("no stimulus pairs".into()));
        }
        let mean = per.iter().sum::<f64>() / per.len() as f64;
        Ok((mean, per))
    }
}
