//! Psychophysical probes for image encoders.
//!
//! Stimuli are synthesised in physical luminance units, display-encoded to
//! sRGB, passed through an encoder, and compared with the cosine-angle
//! distance [`metrics::s_ac`]. The [`alignment`] module turns those distances
//! into rank-correlation scores against human contrast detection and masking
//! data, and into log-contrast errors for supra-threshold contrast matching.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alignment;
pub mod cache;
pub mod colorimetry;
pub mod encoder;
pub mod metrics;
pub mod reference;
pub mod report;
pub mod runner;
pub mod stimuli;
pub mod suite;

pub use alignment::{
    contour_grid, contrast_match, detection_alignment, masking_alignment, matching_alignment,
    matching_rmse, multipliers, spearman, AlignmentError, AlignmentOptions, ContourGrid, Evaluator,
    MatchOptions, MatchResult, MatchStatus,
};
pub use colorimetry::{
    chromatic_to_rgb_luminance, display_encode, ChromaticAxis, ChromaticDirection,
    ColorimetryError, DisplayImage, DisplayModel, LuminanceImage,
};
pub use encoder::{
    raw_features, EncoderError, FeatureVector, ImageEncoder, Provenance, RawEncoder, Rendered,
    StimulusEncoder,
};
pub use metrics::{l1_distance, l2_distance, s_ac, MetricError};
pub use reference::{
    load_curve, threshold_at, GroundTruthCurve, ReferenceError, StandInCsf, XAxis, YAxis,
};
pub use stimuli::{
    band_limited_noise, gabor, grating, masked_stimulus, GaborSpec, GratingSpec, MaskSpec,
    MaskedStimulusSpec, NoiseSpec, Renderer, Stimulus, StimulusError, StimulusPair,
};
pub use suite::{build_test_suite, SuiteOptions, TestId, TestKind, TestSuite};
