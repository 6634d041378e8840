//! Band-limited Gaussian noise by FFT filtering.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::StimulusError;
use crate::colorimetry::DisplayModel;

/// Signed frequency of DFT bin `u` in cycles per degree for an axis of `n` samples.
pub fn bin_frequency(u: usize, n: usize, ppd: f64) -> f64 {
    let nyquist = ppd / 2.0;
    2.0 * nyquist * ((0.5 + u as f64 / n as f64).rem_euclid(1.0) - 0.5)
}

/// Radial frequency of every bin, row-major `[v][u]`.
pub fn radial_frequencies(dm: &DisplayModel) -> Vec<f64> {
    let ku: Vec<f64> = (0..dm.width)
        .map(|u| bin_frequency(u, dm.width, dm.ppd))
        .collect();
    let mut out = Vec::with_capacity(dm.pixel_count());
    for v in 0..dm.height {
        let kv = bin_frequency(v, dm.height, dm.ppd);
        out.extend(ku.iter().map(|&k| (k * k + kv * kv).sqrt()));
    }
    out
}

/// In-place 2-D DFT of a row-major `w`×`h` buffer. The inverse is unnormalised.
pub fn fft2(data: &mut [Complex<f64>], w: usize, h: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let (row, col) = if inverse {
        (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h))
    } else {
        (planner.plan_fft_forward(w), planner.plan_fft_forward(h))
    };
    row.process(data);
    let mut column = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            column[y] = data[y * w + x];
        }
        col.process(&mut column);
        for y in 0..h {
            data[y * w + x] = column[y];
        }
    }
}

/// Unit-variance noise pattern whose spectrum is confined to `[f_lo, f_hi]` cpd.
///
/// White Gaussian noise from a ChaCha8 stream seeded with `seed` is filtered
/// in the frequency domain, transformed back and divided by its population
/// standard deviation.
pub fn noise_pattern(
    f_lo: f64,
    f_hi: f64,
    seed: u64,
    dm: &DisplayModel,
) -> Result<Vec<f64>, StimulusError> {
    let nyquist = dm.nyquist();
    if !(f_lo >= 0.0 && f_lo < f_hi && f_hi <= nyquist) {
        return Err(StimulusError::InvalidSpec(format!(
            "noise band [{f_lo}, {f_hi}] must satisfy 0 <= f_lo < f_hi <= {nyquist}"
        )));
    }
    let (w, h) = (dm.width, dm.height);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf: Vec<Complex<f64>> = (0..w * h)
        .map(|_| Complex::new(StandardNormal.sample(&mut rng), 0.0))
        .collect();
    fft2(&mut buf, w, h, false);
    let rho = radial_frequencies(dm);
    let mut kept = 0usize;
    for (c, &r) in buf.iter_mut().zip(&rho) {
        if r < f_lo || r > f_hi {
            *c = Complex::new(0.0, 0.0);
        } else if r > 0.0 {
            kept += 1;
        }
    }
    if kept == 0 {
        return Err(StimulusError::EmptyBand { f_lo, f_hi });
    }
    fft2(&mut buf, w, h, true);
    let scale = 1.0 / (w * h) as f64;
    let real: Vec<f64> = buf.iter().map(|c| c.re * scale).collect();
    let n = real.len() as f64;
    let mean = real.iter().sum::<f64>() / n;
    let var = real.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    if !(sd > 0.0) {
        return Err(StimulusError::EmptyBand { f_lo, f_hi });
    }
    Ok(real.into_iter().map(|v| v / sd).collect())
}
