//! Serialised run outputs: per-pair reports, flat CSVs and the aggregate table.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::alignment::{AlignmentScore, ContourGrid, MatchingScore};
use crate::colorimetry::DisplayModel;
use crate::suite::TestId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRef {
    pub path: String,
    pub digest: String,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScoreDetail {
    Alignment(AlignmentScore),
    Matching(MatchingScore),
}

/// Everything produced for one (encoder, test) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub encoder: String,
    pub encoder_description: String,
    pub test_id: TestId,
    /// `spearman` for detection and masking, `log10-rmse` for matching.
    pub metric: String,
    pub score: Option<f64>,
    pub reliable: Option<bool>,
    pub error: Option<String>,
    pub display: DisplayModel,
    pub seed_base: u64,
    /// Noise seeds per condition index, for tests that use noise.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<Vec<u64>>,
    pub curves: Vec<CurveRef>,
    pub detail: Option<ScoreDetail>,
    pub grid: Option<ContourGrid>,
}

impl AlignmentReport {
    pub fn metric_for(test: TestId) -> &'static str {
        if test == TestId::Matching {
            "log10-rmse"
        } else {
            "spearman"
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Flat CSV of the scored samples or match results.
    pub fn samples_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        match &self.detail {
            Some(ScoreDetail::Alignment(a)) => {
                let mut s = String::from("j,i,x,threshold,multiplier,contrast,sac,skip\n");
                for p in &a.samples {
                    s.push_str(&format!(
                        "{},{},{},{},{},{},{},{}\n",
                        p.j,
                        p.i,
                        p.x,
                        p.y,
                        p.m,
                        p.c,
                        opt(p.s),
                        csv_field(p.skip.as_deref().unwrap_or(""))
                    ));
                }
                s
            }
            Some(ScoreDetail::Matching(m)) => {
                let mut s = String::from("rho_t,c_r,c_t_model,c_t_human,status,target,achieved\n");
                for (r, h) in m.results.iter().zip(&m.human) {
                    let status = serde_json::to_value(r.status).expect("status serialises");
                    s.push_str(&format!(
                        "{},{},{},{},{},{},{}\n",
                        r.rho_t,
                        r.c_r,
                        r.c_t,
                        h.c_t,
                        status.as_str().unwrap_or_default(),
                        r.target,
                        r.achieved
                    ));
                }
                s
            }
            None => String::new(),
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Encoders × tests score table, columns in the fixed test order.
pub fn aggregate_csv(reports: &[AlignmentReport]) -> String {
    let mut rows: BTreeMap<&str, BTreeMap<TestId, Option<f64>>> = BTreeMap::new();
    for r in reports {
        rows.entry(&r.encoder)
            .or_default()
            .insert(r.test_id, r.score);
    }
    let mut s = String::from("encoder");
    for t in TestId::ALL {
        s.push(',');
        s.push_str(t.as_str());
    }
    s.push('\n');
    for (enc, scores) in rows {
        s.push_str(&csv_field(enc));
        for t in TestId::ALL {
            s.push(',');
            if let Some(Some(v)) = scores.get(&t) {
                s.push_str(&format!("{v:.4}"));
            }
        }
        s.push('\n');
    }
    s
}

/// Loads every report JSON below `dir`, recursively, sorted by path.
/// Other JSON files (manifests, configs) are ignored.
pub fn collect_reports(dir: &Path) -> std::io::Result<Vec<AlignmentReport>> {
    let mut paths = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d)? {
            let p = entry?.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|e| e == "json") {
                paths.push(p);
            }
        }
    }
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        let text = std::fs::read_to_string(&p)?;
        match AlignmentReport::from_json(&text) {
            Ok(r) => out.push(r),
            Err(e) => log::debug!("{} is not a report: {e}", p.display()),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stub(encoder: &str, test: TestId, score: Option<f64>) -> AlignmentReport {
        AlignmentReport {
            encoder: encoder.into(),
            encoder_description: String::new(),
            test_id: test,
            metric: AlignmentReport::metric_for(test).into(),
            score,
            reliable: None,
            error: None,
            display: DisplayModel::default(),
            seed_base: 0,
            seeds: vec![],
            curves: vec![],
            detail: None,
            grid: None,
        }
    }

    #[test]
    fn aggregate_columns_follow_table_order() {
        let csv = aggregate_csv(&[
            stub("b", TestId::Matching, Some(0.25)),
            stub("a", TestId::Area, Some(0.9)),
            stub("a", TestId::GaborAch, None),
        ]);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "encoder,gabor-ach,noise-ach,gabor-rg,gabor-yv,luminance,area,masking-coherent,masking-incoherent,matching"
        );
        assert_eq!(lines.next().unwrap(), "a,,,,,,0.9000,,,");
        assert_eq!(lines.next().unwrap(), "b,,,,,,,,,0.2500");
    }

    #[test]
    fn report_json_round_trip() {
        let r = stub("raw", TestId::GaborAch, Some(0.5));
        assert_eq!(AlignmentReport::from_json(&r.to_json()).unwrap(), r);
    }
}
