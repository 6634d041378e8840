//! Display model and colour conversions.
//!
//! Stimuli are authored as [`LuminanceImage`]s holding the physical light
//! emitted by each display primary in cd/m². [`display_encode`] maps them to
//! the non-linear sRGB values an encoder expects, without any 8-bit
//! quantization.
//!
//! Chromatic modulations are expressed in a DKL opponent space built on the
//! Stockman–Sharpe (CIE 2006) 2° cone fundamentals. The matrices below are the
//! single source of truth for that pipeline:
//!
//! * `RGB_TO_LMS` = `XYZ_TO_LMS2006 · SRGB_TO_XYZ`, where `SRGB_TO_XYZ` is the
//!   IEC 61966-2-1 D65 matrix and `XYZ_TO_LMS2006` the CIE 2006 LMS transform.
//! * `LMS_TO_DKL` has rows `L+M`, `L − (L_w/M_w)·M` and
//!   `S·(L_w+M_w)/S_w − (L+M)`, with `(L_w, M_w, S_w)` the cone response to
//!   equal-energy display white. Both opponent rows vanish at the white point,
//!   and chromatic contrast is the opponent excursion divided by white's `L+M`.
//!
//! Because the background is always an equal-primary grey, the opponent
//! normalisation does not depend on its luminance.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Linear sRGB primaries (per-primary luminance units) to CIE 2006 LMS.
pub const RGB_TO_LMS: [[f64; 3]; 3] = [
    [0.2013146844621979, 0.4824197957318124, 0.05101087535932076],
    [
        0.031886526282599664,
        0.2464109933173289,
        0.03798499398132554,
    ],
    [
        0.00036052525992799975,
        0.0020122005456341048,
        0.01844731264712381,
    ],
];

/// Inverse of [`RGB_TO_LMS`].
pub const LMS_TO_RGB: [[f64; 3]; 3] = [
    [7.193382111524337, -14.158739654301735, 9.263079426125172],
    [-0.9247288331937298, 5.94781061366986, -9.69010102070173],
    [
        -0.03971614222719611,
        -0.37206527581159266,
        55.08438393609062,
    ],
];

/// LMS to DKL (achromatic, red–green, yellow–violet), normalised at display white.
pub const LMS_TO_DKL: [[f64; 3]; 3] = [
    [1.0, 1.0, 0.0],
    [1.0, -2.3230666382211247, 0.0],
    [-1.0, -1.0, 50.48155273694972],
];

/// Inverse of [`LMS_TO_DKL`].
pub const DKL_TO_LMS: [[f64; 3]; 3] = [
    [0.6990731427115433, 0.3009268572884567, 0.0],
    [0.3009268572884567, -0.3009268572884567, 0.0],
    [0.019809216352967982, 0.0, 0.019809216352967982],
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ColorimetryError {
    #[error("invalid display model: {0}")]
    InvalidDisplay(String),
    #[error("image is {got_w}x{got_h} but the display model expects {want_w}x{want_h}")]
    DimensionMismatch {
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
    #[error("negative luminance {value} cd/m² at sample {index}")]
    NegativeLuminance { index: usize, value: f64 },
    #[error("out of gamut: {channel} primary reaches {value:.4} cd/m² at the {extreme} of the modulation (allowed 0..={peak})")]
    OutOfGamut {
        channel: &'static str,
        extreme: &'static str,
        value: f64,
        peak: f64,
    },
    #[error("buffer of {got} values does not hold a {width}x{height}x3 image")]
    BadBuffer {
        got: usize,
        width: usize,
        height: usize,
    },
}

/// Physical viewing conditions shared by every stimulus in a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DisplayModel {
    /// cd/m² of a full-drive primary.
    pub peak_luminance: f64,
    /// Pixels per visual degree.
    pub ppd: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for DisplayModel {
    fn default() -> Self {
        Self {
            peak_luminance: 400.0,
            ppd: 60.0,
            width: 224,
            height: 224,
        }
    }
}

impl DisplayModel {
    pub fn validate(&self) -> Result<(), ColorimetryError> {
        if !(self.peak_luminance > 0.0 && self.peak_luminance.is_finite()) {
            return Err(ColorimetryError::InvalidDisplay(format!(
                "peak_luminance must be positive, got {}",
                self.peak_luminance
            )));
        }
        if !(self.ppd > 0.0 && self.ppd.is_finite()) {
            return Err(ColorimetryError::InvalidDisplay(format!(
                "ppd must be positive, got {}",
                self.ppd
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(ColorimetryError::InvalidDisplay(
                "width and height must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Horizontal extent of the image in visual degrees.
    pub fn width_deg(&self) -> f64 {
        self.width as f64 / self.ppd
    }

    pub fn height_deg(&self) -> f64 {
        self.height as f64 / self.ppd
    }

    pub fn nyquist(&self) -> f64 {
        self.ppd / 2.0
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

/// H×W×3 map of per-primary luminance in cd/m². Row-major, channel fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct LuminanceImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl LuminanceImage {
    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self, ColorimetryError> {
        if data.len() != width * height * 3 {
            return Err(ColorimetryError::BadBuffer {
                got: data.len(),
                width,
                height,
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Uniform field with every primary at `luminance`.
    pub fn uniform(width: usize, height: usize, luminance: f64) -> Self {
        Self {
            width,
            height,
            data: vec![luminance; width * height * 3],
        }
    }

    /// Replicates a single-channel luminance map across the three primaries.
    pub fn from_achromatic(
        width: usize,
        height: usize,
        plane: &[f64],
    ) -> Result<Self, ColorimetryError> {
        if plane.len() != width * height {
            return Err(ColorimetryError::BadBuffer {
                got: plane.len() * 3,
                width,
                height,
            });
        }
        let data = plane.iter().flat_map(|&v| [v, v, v]).collect();
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// First sample below zero, if any.
    pub fn check_non_negative(&self) -> Result<(), ColorimetryError> {
        match self.data.iter().position(|&v| v < 0.0 || v.is_nan()) {
            Some(index) => Err(ColorimetryError::NegativeLuminance {
                index,
                value: self.data[index],
            }),
            None => Ok(()),
        }
    }
}

/// Display-encoded sRGB image with values in [0, 1], stored as f32.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplayImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl DisplayImage {
    /// Wraps already-encoded values, e.g. read back from a feature file.
    /// Values are clamped to [0, 1].
    pub fn from_encoded(
        width: usize,
        height: usize,
        mut data: Vec<f32>,
    ) -> Result<Self, ColorimetryError> {
        if data.len() != width * height * 3 {
            return Err(ColorimetryError::BadBuffer {
                got: data.len(),
                width,
                height,
            });
        }
        for v in &mut data {
            *v = v.clamp(0.0, 1.0);
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }
}

/// IEC 61966-2-1 encoding of a relative linear value.
pub fn srgb_oetf(x: f64) -> f64 {
    if x <= 0.003_130_8 {
        12.92 * x
    } else {
        1.055 * x.powf(1.0 / 2.4) - 0.055
    }
}

/// Exact inverse of [`srgb_oetf`]. The break point is the image of 0.0031308.
pub fn srgb_eotf(v: f64) -> f64 {
    if v <= 12.92 * 0.003_130_8 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

/// Maps physical luminance to display-encoded sRGB: clamp(L/peak, 0, 1) then the sRGB OETF.
pub fn display_encode(
    img: &LuminanceImage,
    dm: &DisplayModel,
) -> Result<DisplayImage, ColorimetryError> {
    if img.width != dm.width || img.height != dm.height {
        return Err(ColorimetryError::DimensionMismatch {
            got_w: img.width,
            got_h: img.height,
            want_w: dm.width,
            want_h: dm.height,
        });
    }
    img.check_non_negative()?;
    let inv_peak = 1.0 / dm.peak_luminance;
    let data = img
        .data
        .iter()
        .map(|&l| srgb_oetf((l * inv_peak).clamp(0.0, 1.0)) as f32)
        .collect();
    Ok(DisplayImage {
        width: img.width,
        height: img.height,
        data,
    })
}

pub fn mat_vec(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub fn rgb_to_lms(rgb: [f64; 3]) -> [f64; 3] {
    mat_vec(&RGB_TO_LMS, rgb)
}

pub fn lms_to_rgb(lms: [f64; 3]) -> [f64; 3] {
    mat_vec(&LMS_TO_RGB, lms)
}

pub fn lms_to_dkl(lms: [f64; 3]) -> [f64; 3] {
    mat_vec(&LMS_TO_DKL, lms)
}

pub fn dkl_to_lms(dkl: [f64; 3]) -> [f64; 3] {
    mat_vec(&DKL_TO_LMS, dkl)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChromaticAxis {
    /// Isoluminant red–green (L−M) modulation.
    Rg,
    /// Tritan yellow–violet (S) modulation.
    Yv,
}

/// A colour direction in DKL space and what it does to the display primaries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChromaticDirection {
    pub axis: ChromaticAxis,
    pub dkl_axis: [f64; 3],
}

impl ChromaticDirection {
    pub fn new(axis: ChromaticAxis) -> Self {
        let dkl_axis = match axis {
            ChromaticAxis::Rg => [0.0, 1.0, 0.0],
            ChromaticAxis::Yv => [0.0, 0.0, 1.0],
        };
        Self { axis, dkl_axis }
    }

    /// RGB excursion (per unit background luminance) produced by unit DKL contrast.
    ///
    /// The modulation is `dkl_axis` scaled by the achromatic coordinate of
    /// the white point, pushed through DKL→LMS→RGB. The pipeline is linear, so
    /// a pixel with modulation `c·base` emits `L_b·(1 + c·base·d)` per primary.
    pub fn rgb_modulation(&self) -> [f64; 3] {
        let white_lms = rgb_to_lms([1.0, 1.0, 1.0]);
        let white_dkl = lms_to_dkl(white_lms);
        let delta_dkl = self.dkl_axis.map(|a| a * white_dkl[0]);
        lms_to_rgb(dkl_to_lms(delta_dkl))
    }

    /// Largest |c·base| that keeps every primary within [0, peak] on a grey of `l_b`.
    pub fn max_modulation(&self, l_b: f64, peak: f64) -> f64 {
        let d = self.rgb_modulation();
        d.iter()
            .map(|&di| {
                if di == 0.0 {
                    f64::INFINITY
                } else {
                    // both signs of the modulation occur
                    let up = (peak / l_b - 1.0) / di.abs();
                    let down = 1.0 / di.abs();
                    up.min(down)
                }
            })
            .fold(f64::INFINITY, f64::min)
    }
}

const CHANNELS: [&str; 3] = ["red", "green", "blue"];

/// Renders a chromatic modulation `c·base` around an equal-primary grey of `l_b`.
///
/// `base` is a W×H scalar field in [−1, 1]. Any primary outside `[0, peak]`
/// is rejected rather than clipped.
pub fn chromatic_to_rgb_luminance(
    base: &[f64],
    direction: &ChromaticDirection,
    l_b: f64,
    c: f64,
    dm: &DisplayModel,
) -> Result<LuminanceImage, ColorimetryError> {
    if base.len() != dm.pixel_count() {
        return Err(ColorimetryError::BadBuffer {
            got: base.len() * 3,
            width: dm.width,
            height: dm.height,
        });
    }
    let d = direction.rgb_modulation();
    let scaled = d.map(|di| l_b * di);
    let mut data = Vec::with_capacity(base.len() * 3);
    for &b in base {
        let k = c * b;
        data.extend(scaled.iter().map(|s| l_b + k * s));
    }
    // report the worst offender with the sign of the modulation that caused it
    let mut worst: Option<(usize, f64, f64)> = None;
    for (i, &v) in data.iter().enumerate() {
        let excess = if v < 0.0 {
            -v
        } else if v > dm.peak_luminance {
            v - dm.peak_luminance
        } else {
            continue;
        };
        if worst.is_none_or(|(_, _, e)| excess > e) {
            worst = Some((i, v, excess));
        }
    }
    if let Some((i, value, _)) = worst {
        let ch = i % 3;
        let modulation = c * base[i / 3] * d[ch];
        let extreme = if modulation >= 0.0 {
            "positive extreme"
        } else {
            "negative extreme"
        };
        return Err(ColorimetryError::OutOfGamut {
            channel: CHANNELS[ch],
            extreme,
            value,
            peak: dm.peak_luminance,
        });
    }
    Ok(LuminanceImage {
        width: dm.width,
        height: dm.height,
        data,
    })
}
