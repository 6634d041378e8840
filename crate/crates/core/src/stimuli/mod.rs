//! Stimulus synthesis in physical luminance units.
//!
//! Every generator builds a unit-amplitude modulation pattern and scales it
//! about the background: `L_b·(1 + c·pattern)`. Patterns are cached by the
//! [`Renderer`], so sweeping contrast at a fixed condition costs one
//! multiply-add per pixel.

mod noise;

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::colorimetry::{
    chromatic_to_rgb_luminance, ChromaticAxis, ChromaticDirection, ColorimetryError, DisplayModel,
    LuminanceImage,
};

pub use noise::{bin_frequency, fft2, noise_pattern, radial_frequencies};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StimulusError {
    #[error("invalid stimulus: {0}")]
    InvalidSpec(String),
    #[error("noise band [{f_lo}, {f_hi}] cpd contains no frequency bins")]
    EmptyBand { f_lo: f64, f_hi: f64 },
    #[error("negative luminance: modulation reaches {min:.6} cd/m²")]
    NegativeLuminance { min: f64 },
    #[error(transparent)]
    Colorimetry(#[from] ColorimetryError),
}

impl StimulusError {
    /// Gamut and negative-luminance failures; grid points hitting these are skipped.
    pub fn is_gamut(&self) -> bool {
        matches!(
            self,
            StimulusError::NegativeLuminance { .. }
                | StimulusError::Colorimetry(ColorimetryError::OutOfGamut { .. })
                | StimulusError::Colorimetry(ColorimetryError::NegativeLuminance { .. })
        )
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), StimulusError> {
    if cond {
        Ok(())
    } else {
        Err(StimulusError::InvalidSpec(msg()))
    }
}

fn positive(name: &str, v: f64) -> Result<(), StimulusError> {
    check(v > 0.0 && v.is_finite(), || {
        format!("{name} must be positive, got {v}")
    })
}

fn non_negative(name: &str, v: f64) -> Result<(), StimulusError> {
    check(v >= 0.0 && v.is_finite(), || {
        format!("{name} must be non-negative, got {v}")
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaborSpec {
    pub l_b: f64,
    pub c: f64,
    pub rho: f64,
    pub radius: f64,
    #[serde(default)]
    pub phase: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chromatic: Option<ChromaticAxis>,
}

impl GaborSpec {
    pub fn achromatic(l_b: f64, c: f64, rho: f64, radius: f64) -> Self {
        Self {
            l_b,
            c,
            rho,
            radius,
            phase: 0.0,
            chromatic: None,
        }
    }

    pub fn validate(&self) -> Result<(), StimulusError> {
        positive("l_b", self.l_b)?;
        non_negative("c", self.c)?;
        positive("rho", self.rho)?;
        positive("radius", self.radius)?;
        check(self.phase.is_finite(), || "phase must be finite".into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GratingSpec {
    pub l_b: f64,
    pub c: f64,
    pub rho: f64,
    #[serde(default)]
    pub phase: f64,
}

impl GratingSpec {
    pub fn new(l_b: f64, c: f64, rho: f64) -> Self {
        Self {
            l_b,
            c,
            rho,
            phase: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), StimulusError> {
        positive("l_b", self.l_b)?;
        non_negative("c", self.c)?;
        positive("rho", self.rho)?;
        check(self.phase.is_finite(), || "phase must be finite".into())
    }
}

/// Band-limited noise; `c` is the RMS contrast after filtering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub l_b: f64,
    pub c: f64,
    pub f_lo: f64,
    pub f_hi: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self, dm: &DisplayModel) -> Result<(), StimulusError> {
        positive("l_b", self.l_b)?;
        non_negative("c", self.c)?;
        check(
            self.f_lo >= 0.0 && self.f_lo < self.f_hi && self.f_hi <= dm.nyquist(),
            || {
                format!(
                    "noise band [{}, {}] must satisfy 0 <= f_lo < f_hi <= {}",
                    self.f_lo,
                    self.f_hi,
                    dm.nyquist()
                )
            },
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MaskSpec {
    Grating(GratingSpec),
    Noise(NoiseSpec),
}

impl MaskSpec {
    pub fn l_b(&self) -> f64 {
        match self {
            MaskSpec::Grating(g) => g.l_b,
            MaskSpec::Noise(n) => n.l_b,
        }
    }

    pub fn contrast(&self) -> f64 {
        match self {
            MaskSpec::Grating(g) => g.c,
            MaskSpec::Noise(n) => n.c,
        }
    }

    pub fn to_stimulus(&self) -> Stimulus {
        match *self {
            MaskSpec::Grating(g) => Stimulus::Grating(g),
            MaskSpec::Noise(n) => Stimulus::Noise(n),
        }
    }
}

/// A mask with a Gabor test added in contrast: `L_b(1 + c_mask·mask + c_test·gabor)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskedStimulusSpec {
    pub mask: MaskSpec,
    pub test: GaborSpec,
}

impl MaskedStimulusSpec {
    pub fn validate(&self, dm: &DisplayModel) -> Result<(), StimulusError> {
        self.test.validate()?;
        match &self.mask {
            MaskSpec::Grating(g) => {
                g.validate()?;
                check(g.rho == self.test.rho && g.phase == self.test.phase, || {
                    "a grating mask must share the test's frequency and phase".into()
                })?;
            }
            MaskSpec::Noise(n) => n.validate(dm)?,
        }
        check(self.mask.l_b() == self.test.l_b, || {
            format!(
                "mask and test must share L_b ({} vs {})",
                self.mask.l_b(),
                self.test.l_b
            )
        })?;
        check(self.test.chromatic.is_none(), || {
            "masked tests are achromatic".into()
        })
    }

    /// The mask on its own, which serves as the reference image.
    pub fn reference(&self) -> Stimulus {
        self.mask.to_stimulus()
    }
}

/// Any renderable image description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Stimulus {
    Uniform { l_b: f64 },
    Gabor(GaborSpec),
    Grating(GratingSpec),
    Noise(NoiseSpec),
    Masked(MaskedStimulusSpec),
}

impl Stimulus {
    pub fn l_b(&self) -> f64 {
        match self {
            Stimulus::Uniform { l_b } => *l_b,
            Stimulus::Gabor(g) => g.l_b,
            Stimulus::Grating(g) => g.l_b,
            Stimulus::Noise(n) => n.l_b,
            Stimulus::Masked(m) => m.test.l_b,
        }
    }

    /// Contrast of the varying component (the test, for masked stimuli).
    pub fn contrast(&self) -> f64 {
        match self {
            Stimulus::Uniform { .. } => 0.0,
            Stimulus::Gabor(g) => g.c,
            Stimulus::Grating(g) => g.c,
            Stimulus::Noise(n) => n.c,
            Stimulus::Masked(m) => m.test.c,
        }
    }

    pub fn validate(&self, dm: &DisplayModel) -> Result<(), StimulusError> {
        match self {
            Stimulus::Uniform { l_b } => non_negative("l_b", *l_b),
            Stimulus::Gabor(g) => g.validate(),
            Stimulus::Grating(g) => g.validate(),
            Stimulus::Noise(n) => n.validate(dm),
            Stimulus::Masked(m) => m.validate(dm),
        }
    }

    /// Canonical JSON form, used for digests and manifests.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("stimulus serialises")
    }
}

/// A test image and the reference it is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StimulusPair {
    pub test: Stimulus,
    pub reference: Stimulus,
}

/// Pixel offsets from the image centre: `-(n/2) .. n - n/2`.
fn offsets(n: usize) -> impl Iterator<Item = f64> {
    let half = (n / 2) as f64;
    (0..n).map(move |i| i as f64 - half)
}

/// `sin(2πρx/ppd + phase)·exp(−(x²+y²)/(2·ppd²·R²))` over the pixel grid.
pub fn gabor_pattern(rho: f64, radius: f64, phase: f64, dm: &DisplayModel) -> Vec<f64> {
    let two_s2 = 2.0 * dm.ppd * dm.ppd * radius * radius;
    let carrier: Vec<f64> = offsets(dm.width)
        .map(|x| (2.0 * PI * rho * x / dm.ppd + phase).sin())
        .collect();
    let xs: Vec<f64> = offsets(dm.width).collect();
    let mut out = Vec::with_capacity(dm.pixel_count());
    for y in offsets(dm.height) {
        let y2 = y * y;
        for (x, s) in xs.iter().zip(&carrier) {
            out.push(s * (-(x * x + y2) / two_s2).exp());
        }
    }
    out
}

/// The Gabor carrier without an envelope.
pub fn grating_pattern(rho: f64, phase: f64, dm: &DisplayModel) -> Vec<f64> {
    let row: Vec<f64> = offsets(dm.width)
        .map(|x| (2.0 * PI * rho * x / dm.ppd + phase).sin())
        .collect();
    let mut out = Vec::with_capacity(dm.pixel_count());
    for _ in 0..dm.height {
        out.extend_from_slice(&row);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum PatternKey {
    Gabor { rho: u64, radius: u64, phase: u64 },
    Grating { rho: u64, phase: u64 },
    Noise { f_lo: u64, f_hi: u64, seed: u64 },
}

/// Renders stimuli for one display, caching modulation patterns.
#[derive(Debug)]
pub struct Renderer {
    dm: DisplayModel,
    cache: Mutex<HashMap<PatternKey, Arc<Vec<f64>>>>,
    capacity: usize,
}

impl Renderer {
    pub fn new(dm: DisplayModel) -> Result<Self, ColorimetryError> {
        dm.validate()?;
        Ok(Self {
            dm,
            cache: Mutex::new(HashMap::new()),
            capacity: 256,
        })
    }

    pub fn display(&self) -> &DisplayModel {
        &self.dm
    }

    fn cached(
        &self,
        key: PatternKey,
        make: impl FnOnce() -> Result<Vec<f64>, StimulusError>,
    ) -> Result<Arc<Vec<f64>>, StimulusError> {
        if let Some(p) = self.cache.lock().unwrap().get(&key) {
            return Ok(Arc::clone(p));
        }
        let p = Arc::new(make()?);
        let mut cache = self.cache.lock().unwrap();
        if cache.len() >= self.capacity {
            cache.clear();
        }
        cache.insert(key, Arc::clone(&p));
        Ok(p)
    }

    pub fn gabor_pattern(&self, g: &GaborSpec) -> Arc<Vec<f64>> {
        let key = PatternKey::Gabor {
            rho: g.rho.to_bits(),
            radius: g.radius.to_bits(),
            phase: g.phase.to_bits(),
        };
        self.cached(key, || {
            Ok(gabor_pattern(g.rho, g.radius, g.phase, &self.dm))
        })
        .expect("gabor patterns are infallible")
    }

    pub fn grating_pattern(&self, g: &GratingSpec) -> Arc<Vec<f64>> {
        let key = PatternKey::Grating {
            rho: g.rho.to_bits(),
            phase: g.phase.to_bits(),
        };
        self.cached(key, || Ok(grating_pattern(g.rho, g.phase, &self.dm)))
            .expect("grating patterns are infallible")
    }

    pub fn noise_pattern(&self, n: &NoiseSpec) -> Result<Arc<Vec<f64>>, StimulusError> {
        let key = PatternKey::Noise {
            f_lo: n.f_lo.to_bits(),
            f_hi: n.f_hi.to_bits(),
            seed: n.seed,
        };
        self.cached(key, || noise_pattern(n.f_lo, n.f_hi, n.seed, &self.dm))
    }

    fn mask_pattern(&self, m: &MaskSpec) -> Result<Arc<Vec<f64>>, StimulusError> {
        match m {
            MaskSpec::Grating(g) => Ok(self.grating_pattern(g)),
            MaskSpec::Noise(n) => self.noise_pattern(n),
        }
    }

    pub fn render(&self, stimulus: &Stimulus) -> Result<LuminanceImage, StimulusError> {
        stimulus.validate(&self.dm)?;
        let (w, h) = (self.dm.width, self.dm.height);
        match stimulus {
            Stimulus::Uniform { l_b } => Ok(LuminanceImage::uniform(w, h, *l_b)),
            Stimulus::Gabor(g) => {
                let p = self.gabor_pattern(g);
                match g.chromatic {
                    Some(axis) => Ok(chromatic_to_rgb_luminance(
                        &p,
                        &ChromaticDirection::new(axis),
                        g.l_b,
                        g.c,
                        &self.dm,
                    )?),
                    None => achromatic(w, h, modulate(g.l_b, g.c, &p)),
                }
            }
            Stimulus::Grating(g) => {
                achromatic(w, h, modulate(g.l_b, g.c, &self.grating_pattern(g)))
            }
            Stimulus::Noise(n) => achromatic(w, h, modulate(n.l_b, n.c, &self.noise_pattern(n)?)),
            Stimulus::Masked(m) => {
                let (test, _) = self.render_masked(m, false)?;
                Ok(test)
            }
        }
    }

    /// Renders a masked stimulus together with its mask-only reference.
    pub fn render_masked(
        &self,
        spec: &MaskedStimulusSpec,
        with_reference: bool,
    ) -> Result<(LuminanceImage, Option<LuminanceImage>), StimulusError> {
        spec.validate(&self.dm)?;
        let (w, h) = (self.dm.width, self.dm.height);
        let mp = self.mask_pattern(&spec.mask)?;
        let gp = self.gabor_pattern(&spec.test);
        let (l_b, cm, ct) = (spec.test.l_b, spec.mask.contrast(), spec.test.c);
        // identical expression order for both images keeps c_test = 0 bit-exact
        let test: Vec<f64> = mp
            .iter()
            .zip(gp.iter())
            .map(|(&m, &g)| l_b * ((1.0 + cm * m) + ct * g))
            .collect();
        let test = achromatic(w, h, test)?;
        let reference = if with_reference {
            Some(achromatic(w, h, modulate(l_b, cm, &mp))?)
        } else {
            None
        };
        Ok((test, reference))
    }
}

fn modulate(l_b: f64, c: f64, pattern: &[f64]) -> Vec<f64> {
    pattern.iter().map(|&p| l_b * (1.0 + c * p)).collect()
}

fn achromatic(w: usize, h: usize, plane: Vec<f64>) -> Result<LuminanceImage, StimulusError> {
    let min = plane.iter().copied().fold(f64::INFINITY, f64::min);
    if min < 0.0 {
        return Err(StimulusError::NegativeLuminance { min });
    }
    Ok(LuminanceImage::from_achromatic(w, h, &plane)?)
}

pub fn gabor(spec: &GaborSpec, dm: &DisplayModel) -> Result<LuminanceImage, StimulusError> {
    Renderer::new(*dm)?.render(&Stimulus::Gabor(*spec))
}

pub fn grating(spec: &GratingSpec, dm: &DisplayModel) -> Result<LuminanceImage, StimulusError> {
    Renderer::new(*dm)?.render(&Stimulus::Grating(*spec))
}

pub fn band_limited_noise(
    spec: &NoiseSpec,
    dm: &DisplayModel,
) -> Result<LuminanceImage, StimulusError> {
    Renderer::new(*dm)?.render(&Stimulus::Noise(*spec))
}

/// Returns `(test, reference)`, the reference being the mask alone.
pub fn masked_stimulus(
    spec: &MaskedStimulusSpec,
    dm: &DisplayModel,
) -> Result<(LuminanceImage, LuminanceImage), StimulusError> {
    let (test, reference) = Renderer::new(*dm)?.render_masked(spec, true)?;
    Ok((test, reference.expect("reference requested")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dm() -> DisplayModel {
        DisplayModel::default()
    }

    fn plane(img: &LuminanceImage) -> Vec<f64> {
        img.data().chunks(3).map(|p| p[0]).collect()
    }

    #[test]
    fn zero_contrast_gabor_is_uniform() {
        let img = gabor(&GaborSpec::achromatic(100.0, 0.0, 4.0, 1.0), &dm()).unwrap();
        assert_eq!(img, LuminanceImage::uniform(224, 224, 100.0));
    }

    #[test]
    fn centre_column_is_background() {
        let img = gabor(&GaborSpec::achromatic(100.0, 0.7, 3.3, 0.4), &dm()).unwrap();
        for y in 0..224 {
            assert_eq!(img.pixel(112, y), [100.0; 3]);
        }
    }

    #[test]
    fn gabor_extremes_brute_force() {
        let spec = GaborSpec::achromatic(100.0, 1.0, 2.0, 1.0);
        let p = plane(&gabor(&spec, &dm()).unwrap());
        let (min, max) = p
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                (a.min(v), b.max(v))
            });
        assert!(min >= 0.0 && max <= 200.0);
        // quarter cycle sits 7.5 px from the centre
        let delta = 7.5f64.powi(2) / (2.0 * 60.0f64.powi(2));
        let peak = 100.0 * (1.0 + (-delta).exp());
        let trough = 100.0 * (1.0 - (-delta).exp());
        assert!((max - peak).abs() / peak < 0.01);
        assert!((min - trough).abs() < 0.01 * 100.0);
    }

    #[test]
    fn gabor_rejects_overdriven_contrast() {
        let err = gabor(&GaborSpec::achromatic(100.0, 1.5, 2.0, 1.0), &dm()).unwrap_err();
        assert!(matches!(err, StimulusError::NegativeLuminance { .. }));
        assert!(err.is_gamut());
        assert!(gabor(&GaborSpec::achromatic(100.0, 0.5, -1.0, 1.0), &dm()).is_err());
    }

    #[test]
    fn grating_extremes_follow_contrast() {
        let p = plane(&grating(&GratingSpec::new(10.0, 0.629, 5.0), &dm()).unwrap());
        let min = p.iter().copied().fold(f64::INFINITY, f64::min);
        let max = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!((min - 3.71).abs() < 1e-9, "{min}");
        assert!((max - 16.29).abs() < 1e-9, "{max}");
    }

    #[test]
    fn grating_mean_over_whole_cycles() {
        // 224 px at 60 ppd holds exactly 7 cycles at 7·60/224 cpd
        let rho = 7.0 * 60.0 / 224.0;
        let img = grating(&GratingSpec::new(50.0, 0.8, rho), &dm()).unwrap();
        assert!((img.mean() - 50.0).abs() < 1e-9);
    }

    #[test]
    fn chromatic_gabor_routes_through_dkl() {
        let spec = GaborSpec {
            chromatic: Some(ChromaticAxis::Rg),
            ..GaborSpec::achromatic(100.0, 0.12, 2.0, 1.0)
        };
        let img = gabor(&spec, &dm()).unwrap();
        let [r, g, b] = img.pixel(112 + 7, 112);
        assert!(r != g || g != b);
        let too_strong = GaborSpec { c: 0.5, ..spec };
        assert!(gabor(&too_strong, &dm()).unwrap_err().is_gamut());
    }

    #[test]
    fn noise_statistics_and_band() {
        let spec = NoiseSpec {
            l_b: 37.0,
            c: 0.2,
            f_lo: 0.0,
            f_hi: 12.0,
            seed: 9,
        };
        let d = dm();
        let img = band_limited_noise(&spec, &d).unwrap();
        let p = plane(&img);
        let n = p.len() as f64;
        let mean = p.iter().sum::<f64>() / n;
        let sd = (p.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((sd - 0.2 * 37.0).abs() < 1e-6);
        let mut spectrum: Vec<_> = p
            .iter()
            .map(|v| rustfft::num_complex::Complex::new(v - 37.0, 0.0))
            .collect();
        fft2(&mut spectrum, 224, 224, false);
        let rho = radial_frequencies(&d);
        let total: f64 = spectrum.iter().map(|c| c.norm_sqr()).sum();
        let outside: f64 = spectrum
            .iter()
            .zip(&rho)
            .filter(|(_, &r)| r > 12.0)
            .map(|(c, _)| c.norm_sqr())
            .sum();
        assert!(outside / total < 1e-18, "{}", outside / total);
    }

    #[test]
    fn masked_with_zero_test_equals_reference() {
        let spec = MaskedStimulusSpec {
            mask: MaskSpec::Noise(NoiseSpec {
                l_b: 37.0,
                c: 0.15,
                f_lo: 0.0,
                f_hi: 12.0,
                seed: 3,
            }),
            test: GaborSpec::achromatic(37.0, 0.0, 1.2, 0.8),
        };
        let (t, r) = masked_stimulus(&spec, &dm()).unwrap();
        assert_eq!(t, r);
        let coherent = MaskedStimulusSpec {
            mask: MaskSpec::Grating(GratingSpec::new(32.0, 0.3, 2.0)),
            test: GaborSpec::achromatic(32.0, 0.0, 2.0, 0.5),
        };
        let (t, r) = masked_stimulus(&coherent, &dm()).unwrap();
        assert_eq!(t, r);
    }

    #[test]
    fn masked_composition_is_additive_in_contrast() {
        let d = dm();
        let spec = MaskedStimulusSpec {
            mask: MaskSpec::Grating(GratingSpec::new(32.0, 0.3, 2.0)),
            test: GaborSpec::achromatic(32.0, 0.1, 2.0, 0.5),
        };
        let (t, _) = masked_stimulus(&spec, &d).unwrap();
        let mp = grating_pattern(2.0, 0.0, &d);
        let gp = gabor_pattern(2.0, 0.5, 0.0, &d);
        for (i, v) in plane(&t).iter().enumerate() {
            assert!((v - 32.0 * (1.0 + 0.3 * mp[i] + 0.1 * gp[i])).abs() < 1e-12);
        }
        let bad = MaskedStimulusSpec {
            mask: MaskSpec::Grating(GratingSpec::new(32.0, 0.8, 2.0)),
            test: GaborSpec::achromatic(32.0, 0.5, 2.0, 0.5),
        };
        assert!(masked_stimulus(&bad, &d).unwrap_err().is_gamut());
        let mismatched = MaskedStimulusSpec {
            mask: MaskSpec::Grating(GratingSpec::new(30.0, 0.1, 2.0)),
            ..spec
        };
        assert!(matches!(
            masked_stimulus(&mismatched, &d),
            Err(StimulusError::InvalidSpec(_))
        ));
    }

    #[test]
    fn stimulus_json_round_trip() {
        let s = Stimulus::Masked(MaskedStimulusSpec {
            mask: MaskSpec::Noise(NoiseSpec {
                l_b: 37.0,
                c: 0.1,
                f_lo: 0.0,
                f_hi: 12.0,
                seed: u64::MAX,
            }),
            test: GaborSpec::achromatic(37.0, 0.02, 1.2, 0.8),
        });
        let back: Stimulus = serde_json::from_str(&s.canonical_json()).unwrap();
        assert_eq!(back, s);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn gabor_is_odd_about_the_centre(c in 0.0f64..1.0, rho in 0.5f64..32.0, radius in 0.1f64..1.5) {
            let small = DisplayModel { width: 64, height: 48, ..dm() };
            let img = gabor(&GaborSpec::achromatic(80.0, c, rho, radius), &small).unwrap();
            for y in 0..48 {
                for dx in 1..32 {
                    let a = img.pixel(32 + dx, y)[0] - 80.0;
                    let b = img.pixel(32 - dx, y)[0] - 80.0;
                    prop_assert!((a + b).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn periodic_mean_is_background(cycles in 2usize..40, c in 0.0f64..1.0) {
            let rho = cycles as f64 * 60.0 / 224.0;
            let img = grating(&GratingSpec::new(20.0, c, rho), &dm()).unwrap();
            prop_assert!((img.mean() - 20.0).abs() <= 0.005 * 20.0);
        }
    }
}
