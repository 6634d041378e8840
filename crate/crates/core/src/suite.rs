//! The nine tests and their stimulus lattices.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::colorimetry::{ChromaticAxis, DisplayModel};
use crate::reference::XAxis;
use crate::stimuli::{
    GaborSpec, GratingSpec, MaskSpec, MaskedStimulusSpec, NoiseSpec, Renderer, Stimulus,
    StimulusPair,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestId {
    GaborAch,
    NoiseAch,
    GaborRg,
    GaborYv,
    Luminance,
    Area,
    MaskingCoherent,
    MaskingIncoherent,
    Matching,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    Detection,
    Masking,
    Matching,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown test id '{0}' (expected one of: {ids})", ids = TestId::ALL.map(|t| t.as_str()).join(", "))]
pub struct UnknownTest(pub String);

impl TestId {
    /// Canonical column order of the aggregate table.
    pub const ALL: [TestId; 9] = [
        TestId::GaborAch,
        TestId::NoiseAch,
        TestId::GaborRg,
        TestId::GaborYv,
        TestId::Luminance,
        TestId::Area,
        TestId::MaskingCoherent,
        TestId::MaskingIncoherent,
        TestId::Matching,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TestId::GaborAch => "gabor-ach",
            TestId::NoiseAch => "noise-ach",
            TestId::GaborRg => "gabor-rg",
            TestId::GaborYv => "gabor-yv",
            TestId::Luminance => "luminance",
            TestId::Area => "area",
            TestId::MaskingCoherent => "masking-coherent",
            TestId::MaskingIncoherent => "masking-incoherent",
            TestId::Matching => "matching",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TestId::GaborAch => "Spatial Frequency - Gabor Achromatic",
            TestId::NoiseAch => "Spatial Frequency - Noise Achromatic",
            TestId::GaborRg => "Spatial Frequency - Gabor RG",
            TestId::GaborYv => "Spatial Frequency - Gabor YV",
            TestId::Luminance => "Luminance - Gabor Achromatic",
            TestId::Area => "Area - Gabor Achromatic",
            TestId::MaskingCoherent => "Phase-Coherent Masking",
            TestId::MaskingIncoherent => "Phase-Incoherent Masking",
            TestId::Matching => "Contrast Matching",
        }
    }

    pub fn kind(self) -> TestKind {
        match self {
            TestId::MaskingCoherent | TestId::MaskingIncoherent => TestKind::Masking,
            TestId::Matching => TestKind::Matching,
            _ => TestKind::Detection,
        }
    }

    /// Range of the condition axis.
    pub fn x_range(self) -> (f64, f64) {
        match self {
            TestId::GaborAch | TestId::NoiseAch | TestId::GaborRg | TestId::GaborYv => (0.5, 32.0),
            TestId::Luminance => (0.1, 200.0),
            TestId::Area => (0.1, 1.0),
            TestId::MaskingCoherent | TestId::MaskingIncoherent => (0.005, 0.5),
            TestId::Matching => (0.25, 25.0),
        }
    }

    pub fn x_axis(self) -> XAxis {
        match self {
            TestId::Luminance => XAxis::Luminance,
            TestId::Area => XAxis::Degrees,
            TestId::MaskingCoherent | TestId::MaskingIncoherent => XAxis::MaskContrast,
            _ => XAxis::Cpd,
        }
    }

    /// Range of test contrast. For matching this is the reference contrast range.
    pub fn contrast_range(self) -> (f64, f64) {
        match self {
            TestId::GaborRg => (0.001, 0.12),
            TestId::GaborYv => (0.001, 0.8),
            TestId::MaskingCoherent | TestId::MaskingIncoherent => (0.01, 0.5),
            TestId::Matching => (0.005, 0.629),
            _ => (0.001, 1.0),
        }
    }

    /// Whether each lattice point is averaged over several noise realisations.
    pub fn uses_noise(self) -> bool {
        matches!(self, TestId::NoiseAch | TestId::MaskingIncoherent)
    }

    /// Background luminance at condition `x`.
    pub fn background(self, x: f64) -> f64 {
        match self {
            TestId::Luminance => x,
            TestId::MaskingCoherent => 32.0,
            TestId::MaskingIncoherent => 37.0,
            TestId::Matching => 10.0,
            _ => 100.0,
        }
    }

    /// Stimulus pairs at condition `x` (index `ix`) and test contrast `c`.
    /// Noise tests yield one pair per seed.
    pub fn pairs(
        self,
        x: f64,
        c: f64,
        ix: usize,
        opts: &SuiteOptions,
        dm: &DisplayModel,
    ) -> Vec<StimulusPair> {
        let seeds = || (0..opts.noise_seeds).map(move |k| derive_seed(opts.seed_base, self, ix, k));
        let uniform = Stimulus::Uniform {
            l_b: self.background(x),
        };
        let detect = |g: GaborSpec| {
            vec![StimulusPair {
                test: Stimulus::Gabor(g),
                reference: uniform,
            }]
        };
        match self {
            TestId::GaborAch => detect(GaborSpec::achromatic(100.0, c, x, 1.0)),
            TestId::GaborRg | TestId::GaborYv => {
                let axis = if self == TestId::GaborRg {
                    ChromaticAxis::Rg
                } else {
                    ChromaticAxis::Yv
                };
                detect(GaborSpec {
                    chromatic: Some(axis),
                    ..GaborSpec::achromatic(100.0, c, x, 1.0)
                })
            }
            TestId::Luminance => detect(GaborSpec::achromatic(x, c, 2.0, 1.0)),
            TestId::Area => detect(GaborSpec::achromatic(100.0, c, 8.0, x)),
            TestId::NoiseAch => {
                let (f_lo, f_hi) = noise_detection_band(x, dm);
                seeds()
                    .map(|seed| StimulusPair {
                        test: Stimulus::Noise(NoiseSpec {
                            l_b: 100.0,
                            c,
                            f_lo,
                            f_hi,
                            seed,
                        }),
                        reference: uniform,
                    })
                    .collect()
            }
            TestId::MaskingCoherent => {
                let spec = MaskedStimulusSpec {
                    mask: MaskSpec::Grating(GratingSpec::new(32.0, x, 2.0)),
                    test: GaborSpec::achromatic(32.0, c, 2.0, 0.5),
                };
                vec![StimulusPair {
                    test: Stimulus::Masked(spec),
                    reference: spec.reference(),
                }]
            }
            TestId::MaskingIncoherent => seeds()
                .map(|seed| {
                    let spec = MaskedStimulusSpec {
                        mask: MaskSpec::Noise(NoiseSpec {
                            l_b: 37.0,
                            c: x,
                            f_lo: 0.0,
                            f_hi: 12.0,
                            seed,
                        }),
                        test: GaborSpec::achromatic(37.0, c, 1.2, 0.8),
                    };
                    StimulusPair {
                        test: Stimulus::Masked(spec),
                        reference: spec.reference(),
                    }
                })
                .collect(),
            TestId::Matching => vec![StimulusPair {
                test: Stimulus::Grating(GratingSpec::new(10.0, c, x)),
                reference: uniform,
            }],
        }
    }
}

impl fmt::Display for TestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TestId {
    type Err = UnknownTest;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TestId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| UnknownTest(s.to_string()))
    }
}

/// One-octave band centred on `rho`, with the upper edge held at Nyquist.
pub fn noise_detection_band(rho: f64, dm: &DisplayModel) -> (f64, f64) {
    let s = std::f64::consts::SQRT_2;
    (rho / s, (rho * s).min(dm.nyquist()))
}

/// Noise seed for realisation `k` at condition index `ix`.
pub fn derive_seed(seed_base: u64, test: TestId, ix: usize, k: usize) -> u64 {
    let digest = Sha256::digest(format!("{seed_base}/{}/{ix}/{k}", test.as_str()));
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// `n` log-uniform samples from `lo` to `hi`, endpoints exact.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            let mut v: Vec<f64> = (0..n)
                .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                .collect();
            v[0] = lo;
            v[n - 1] = hi;
            v
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteOptions {
    /// Lattice points per axis.
    pub density: usize,
    /// Noise realisations averaged per point.
    pub noise_seeds: usize,
    pub seed_base: u64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            density: 20,
            noise_seeds: 5,
            seed_base: 0,
        }
    }
}

impl SuiteOptions {
    pub fn seeds_for(&self, test: TestId) -> usize {
        if test.uses_noise() {
            self.noise_seeds
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub ix: usize,
    pub ic: usize,
    pub x: f64,
    pub c: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuitePoint {
    pub ix: usize,
    pub ic: usize,
    pub x: f64,
    pub c: f64,
    pub pairs: Vec<StimulusPair>,
}

/// The full lattice for one test; unrenderable points are listed in `skipped`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSuite {
    pub test_id: TestId,
    pub x: Vec<f64>,
    pub contrast: Vec<f64>,
    pub points: Vec<SuitePoint>,
    pub skipped: Vec<SkipRecord>,
}

/// Builds the contrast × condition lattice, dropping points outside the display gamut.
pub fn build_test_suite(test: TestId, renderer: &Renderer, opts: &SuiteOptions) -> TestSuite {
    let (xl, xh) = test.x_range();
    let (cl, ch) = test.contrast_range();
    let x = log_space(xl, xh, opts.density);
    let contrast = log_space(cl, ch, opts.density);
    let dm = *renderer.display();
    let opts = SuiteOptions {
        noise_seeds: opts.seeds_for(test),
        ..*opts
    };
    let lattice: Vec<(usize, usize)> = (0..contrast.len())
        .flat_map(|ic| (0..x.len()).map(move |ix| (ix, ic)))
        .collect();
    let built: Vec<Result<SuitePoint, SkipRecord>> = lattice
        .par_iter()
        .map(|&(ix, ic)| {
            let (xv, cv) = (x[ix], contrast[ic]);
            let pairs = test.pairs(xv, cv, ix, &opts, &dm);
            for p in &pairs {
                if let Err(e) = renderer
                    .render(&p.test)
                    .and_then(|_| renderer.render(&p.reference))
                {
                    return Err(SkipRecord {
                        ix,
                        ic,
                        x: xv,
                        c: cv,
                        reason: e.to_string(),
                    });
                }
            }
            Ok(SuitePoint {
                ix,
                ic,
                x: xv,
                c: cv,
                pairs,
            })
        })
        .collect();
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for b in built {
        match b {
            Ok(p) => points.push(p),
            Err(s) => {
                log::info!(
                    "{test}: skipping lattice point x={} c={}: {}",
                    s.x,
                    s.c,
                    s.reason
                );
                skipped.push(s);
            }
        }
    }
    TestSuite {
        test_id: test,
        x,
        contrast,
        points,
        skipped,
    }
}
