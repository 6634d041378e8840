use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReferenceError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {message}")]
    Invariant { line: usize, message: String },
    #[error("missing metadata '# {0}=' line")]
    MissingMetadata(&'static str),
    #[error("x = {x} is outside the curve domain [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },
    #[error("invalid stand-in CSF argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum XAxis {
    #[serde(rename = "cpd")]
    Cpd,
    #[serde(rename = "cd/m2")]
    Luminance,
    #[serde(rename = "degrees")]
    Degrees,
    #[serde(rename = "mask_contrast")]
    MaskContrast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YAxis {
    Sensitivity,
    ThresholdContrast,
    MatchedContrast,
}

impl XAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            XAxis::Cpd => "cpd",
            XAxis::Luminance => "cd/m2",
            XAxis::Degrees => "degrees",
            XAxis::MaskContrast => "mask_contrast",
        }
    }
}

impl FromStr for XAxis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "cpd" => Ok(XAxis::Cpd),
            "cd/m2" | "cd/m²" => Ok(XAxis::Luminance),
            "degrees" | "deg" => Ok(XAxis::Degrees),
            "mask_contrast" => Ok(XAxis::MaskContrast),
            other => Err(format!("unknown x_axis '{other}'")),
        }
    }
}

impl YAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            YAxis::Sensitivity => "sensitivity",
            YAxis::ThresholdContrast => "threshold_contrast",
            YAxis::MatchedContrast => "matched_contrast",
        }
    }
}

impl FromStr for YAxis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sensitivity" => Ok(YAxis::Sensitivity),
            "threshold_contrast" => Ok(YAxis::ThresholdContrast),
            "matched_contrast" => Ok(YAxis::MatchedContrast),
            other => Err(format!("unknown y_axis '{other}'")),
        }
    }
}

impl fmt::Display for XAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for YAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ordered human data with declared axes. `x` is strictly increasing and `y > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthCurve {
    pub test_id: String,
    pub x_axis: XAxis,
    pub y_axis: YAxis,
    pub source: String,
    /// Extra `# key=value` lines, e.g. `reference_contrast` on matching curves.
    pub metadata: BTreeMap<String, String>,
    pub points: Vec<(f64, f64)>,
}

impl GroundTruthCurve {
    pub fn new(
        test_id: impl Into<String>,
        x_axis: XAxis,
        y_axis: YAxis,
        source: impl Into<String>,
        points: Vec<(f64, f64)>,
    ) -> Result<Self, ReferenceError> {
        validate_points(&points, &vec![0; points.len()])?;
        Ok(Self {
            test_id: test_id.into(),
            x_axis,
            y_axis,
            source: source.into(),
            metadata: BTreeMap::new(),
            points,
        })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.points[0].0, self.points[self.points.len() - 1].0)
    }

    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.0).collect()
    }

    /// Threshold contrast at `x`; sensitivity curves are inverted.
    pub fn threshold_contrast_at(&self, x: f64) -> Result<f64, ReferenceError> {
        let y = threshold_at(self, x)?;
        Ok(match self.y_axis {
            YAxis::Sensitivity => 1.0 / y,
            _ => y,
        })
    }

    /// Reference contrast declared by a matching curve.
    pub fn reference_contrast(&self) -> Option<f64> {
        self.metadata.get("reference_contrast")?.parse().ok()
    }

    /// Content digest of the curve data, independent of file formatting.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("curve serialises");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// CSV text in the on-disk format.
    pub fn to_csv(&self) -> String {
        let mut s = format!(
            "# test_id={}\n# x_axis={}\n# y_axis={}\n# source={}\n",
            self.test_id, self.x_axis, self.y_axis, self.source
        );
        for (k, v) in &self.metadata {
            s.push_str(&format!("# {k}={v}\n"));
        }
        s.push_str("x,y\n");
        for (x, y) in &self.points {
            s.push_str(&format!("{x},{y}\n"));
        }
        s
    }
}

fn validate_points(points: &[(f64, f64)], lines: &[usize]) -> Result<(), ReferenceError> {
    if points.is_empty() {
        return Err(ReferenceError::Invariant {
            line: 0,
            message: "curve has no data points".into(),
        });
    }
    for (i, &(x, y)) in points.iter().enumerate() {
        if !x.is_finite() || !y.is_finite() {
            return Err(ReferenceError::Invariant {
                line: lines[i],
                message: format!("non-finite value ({x}, {y})"),
            });
        }
        if y <= 0.0 {
            return Err(ReferenceError::Invariant {
                line: lines[i],
                message: format!("y must be positive, got {y}"),
            });
        }
        if x <= 0.0 {
            return Err(ReferenceError::Invariant {
                line: lines[i],
                message: format!("x must be positive for log interpolation, got {x}"),
            });
        }
        if i > 0 && x <= points[i - 1].0 {
            return Err(ReferenceError::Invariant {
                line: lines[i],
                message: format!(
                    "x must be strictly increasing ({} then {x})",
                    points[i - 1].0
                ),
            });
        }
    }
    Ok(())
}

/// Parses curve CSV text. Line numbers in errors are 1-based.
pub fn parse_curve(text: &str) -> Result<GroundTruthCurve, ReferenceError> {
    let mut meta: BTreeMap<String, String> = BTreeMap::new();
    let mut body_start = None;
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(rest) = t.strip_prefix('#') {
            let Some((k, v)) = rest.split_once('=') else {
                return Err(ReferenceError::Parse {
                    line: i + 1,
                    message: format!("metadata line must be '# key=value': {t}"),
                });
            };
            meta.insert(k.trim().to_string(), v.trim().to_string());
            continue;
        }
        if t.replace(' ', "") != "x,y" {
            return Err(ReferenceError::Parse {
                line: i + 1,
                message: format!("expected header 'x,y', found '{t}'"),
            });
        }
        body_start = Some(i + 1);
        break;
    }
    let start = body_start.ok_or(ReferenceError::Parse {
        line: text.lines().count().max(1),
        message: "missing 'x,y' header".into(),
    })?;
    let mut take = |key: &'static str| meta.remove(key).ok_or(ReferenceError::MissingMetadata(key));
    let test_id = take("test_id")?;
    let x_axis: XAxis = take("x_axis")?.parse().map_err(|m| ReferenceError::Parse {
        line: 0,
        message: m,
    })?;
    let y_axis: YAxis = take("y_axis")?.parse().map_err(|m| ReferenceError::Parse {
        line: 0,
        message: m,
    })?;
    let source = take("source")?;
    if source.is_empty() {
        return Err(ReferenceError::MissingMetadata("source"));
    }

    let body: String = text.lines().skip(start).collect::<Vec<_>>().join("\n");
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let mut points = Vec::new();
    let mut lines = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| ReferenceError::Parse {
            line: start + e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = start + rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 2 {
            return Err(ReferenceError::Parse {
                line,
                message: format!("expected 2 fields, found {}", rec.len()),
            });
        }
        let num = |s: &str| {
            s.parse::<f64>().map_err(|_| ReferenceError::Parse {
                line,
                message: format!("not a number: '{s}'"),
            })
        };
        points.push((num(&rec[0])?, num(&rec[1])?));
        lines.push(line);
    }
    validate_points(&points, &lines)?;
    Ok(GroundTruthCurve {
        test_id,
        x_axis,
        y_axis,
        source,
        metadata: meta,
        points,
    })
}

pub fn load_curve(path: impl AsRef<Path>) -> Result<GroundTruthCurve, ReferenceError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ReferenceError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_curve(&text).map_err(|e| match e {
        ReferenceError::Parse { line, message } => ReferenceError::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        ReferenceError::Invariant { line, message } => ReferenceError::Invariant {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

/// Log-log linear interpolation of `y` at `x`.
pub fn threshold_at(curve: &GroundTruthCurve, x: f64) -> Result<f64, ReferenceError> {
    let (lo, hi) = curve.domain();
    if !(x >= lo && x <= hi) {
        return Err(ReferenceError::OutOfDomain { x, lo, hi });
    }
    let pts = &curve.points;
    let k = pts.partition_point(|p| p.0 < x);
    if pts[k].0 == x {
        return Ok(pts[k].1);
    }
    let (x0, y0) = pts[k - 1];
    let (x1, y1) = pts[k];
    let t = (x.ln() - x0.ln()) / (x1.ln() - x0.ln());
    Ok((y0.ln() + t * (y1.ln() - y0.ln())).exp())
}
