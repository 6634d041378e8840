//! Human ground-truth curves and the fallback stand-in CSF.

mod curve;
mod standin;

pub use curve::{
    load_curve, parse_curve, threshold_at, GroundTruthCurve, ReferenceError, XAxis, YAxis,
};
pub use standin::StandInCsf;

use std::path::{Path, PathBuf};

use crate::suite::TestId;

/// Curve files shipped under `data/` for a test, relative to the data directory.
pub fn default_curve_files(data_dir: &Path, test: TestId) -> Result<Vec<PathBuf>, ReferenceError> {
    let rel = match test {
        TestId::MaskingCoherent => "masking/coherent.csv".to_string(),
        TestId::MaskingIncoherent => "masking/incoherent.csv".to_string(),
        TestId::Matching => {
            let dir = data_dir.join("matching");
            let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
                .map_err(|e| ReferenceError::Io {
                    path: dir.display().to_string(),
                    message: e.to_string(),
                })?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .collect();
            files.sort();
            return Ok(files);
        }
        other => format!("detection/{}.csv", other.as_str()),
    };
    Ok(vec![data_dir.join(rel)])
}
