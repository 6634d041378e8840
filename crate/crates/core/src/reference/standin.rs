use serde::{Deserialize, Serialize};

use super::ReferenceError;

/// Separable parametric CSF used when no curve file is available.
///
/// `S = S_max · exp(−log2(ρ/ρ_peak)²/(2σ²)) · √(L/(L+L_0)) · √(A/(A+a_0))`
/// with `A` the stimulus area in deg². Achromatic only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandInCsf {
    pub rho_peak: f64,
    /// Bandwidth σ in octaves.
    pub sigma: f64,
    pub s_max: f64,
    pub l0: f64,
    pub a0: f64,
}

impl Default for StandInCsf {
    fn default() -> Self {
        Self {
            rho_peak: 3.0,
            sigma: 1.1,
            s_max: 400.0,
            l0: 20.0,
            a0: 0.1,
        }
    }
}

impl StandInCsf {
    pub fn validate(&self) -> Result<(), ReferenceError> {
        for (name, v) in [
            ("rho_peak", self.rho_peak),
            ("sigma", self.sigma),
            ("s_max", self.s_max),
            ("l0", self.l0),
            ("a0", self.a0),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ReferenceError::InvalidArgument(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn frequency_factor(&self, rho: f64) -> f64 {
        let o = (rho / self.rho_peak).log2();
        (-(o * o) / (2.0 * self.sigma * self.sigma)).exp()
    }

    pub fn luminance_factor(&self, l: f64) -> f64 {
        (l / (l + self.l0)).sqrt()
    }

    pub fn area_factor(&self, area: f64) -> f64 {
        (area / (area + self.a0)).sqrt()
    }

    pub fn sensitivity(&self, rho: f64, l: f64, area: f64) -> Result<f64, ReferenceError> {
        for (name, v) in [("rho", rho), ("L", l), ("area", area)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ReferenceError::InvalidArgument(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(self.s_max
            * self.frequency_factor(rho)
            * self.luminance_factor(l)
            * self.area_factor(area))
    }
}
