//! Scoring encoders against human data.
//!
//! Detection and masking use multiplier sampling: stimuli are generated at
//! `m·Y_j`, where `Y_j` is the human threshold at condition `X_j` and
//! `m ∈ [0.5, 2]`, and the score is the Spearman correlation between the
//! replicated multipliers and the encoder's S_ac. Contrast matching finds,
//! for each test frequency, the contrast whose S_ac equals that of the
//! reference grating and reports the log-contrast RMSE against human matches.

mod detection;
mod eval;
mod grid;
mod matching;
mod stats;

use thiserror::Error;

use crate::reference::ReferenceError;

pub use detection::{
    detection_alignment, masking_alignment, score_samples, AlignmentOptions, AlignmentSample,
    AlignmentScore,
};
pub use eval::{Evaluator, SampleError};
pub use grid::{contour_grid, ContourGrid};
pub use matching::{
    contrast_match, human_points, matching_alignment, matching_rmse, score_matches, MatchOptions,
    MatchPoint, MatchResult, MatchStatus, MatchingScore,
};
pub use stats::{average_ranks, multipliers, pearson, spearman};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlignmentError {
    #[error("need at least 2 multipliers, got {0}")]
    TooFewMultipliers(usize),
    #[error("inputs have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 samples, got {0}")]
    TooShort(usize),
    #[error("correlation undefined: {0}")]
    Degenerate(String),
    #[error("domain mismatch: {0}")]
    Domain(String),
    #[error("{test} is not a {expected} test")]
    WrongTestKind {
        test: String,
        expected: &'static str,
    },
    #[error(transparent)]
    Curve(#[from] ReferenceError),
    #[error("points missing from one side: {0:?}")]
    MissingPoints(Vec<String>),
    #[error("encoder failure: {0}")]
    Encoder(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
