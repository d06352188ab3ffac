//! Optical parameters of the source.
//!
//! The phase-expansion coefficients are a parametric first-order model of the
//! crystal dispersion. Their defaults are calibrations: `beta L d / (gamma D)`
//! is pinned to the -0.05 rad/pixel compensation slope, `alpha L sigma_p`,
//! `phi0` and `residual_dephasing` reproduce the measured visibility ladder.
//! They are not first-principles predictions.

use alloc::format;

use crate::error::{Error, Result};
use crate::slm::LinearParams;

/// Shape of `|f(omega_s, theta)|^2` over the admissible wedge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectralProfile {
    Uniform,
    /// Gaussian in `omega_s` with the given standard deviation (rad/s).
    Gaussian { sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConfig {
    /// L, mm.
    pub crystal_length_mm: f64,
    /// D, crystal to modulator, mm.
    pub slm_distance_mm: f64,
    /// d, mm.
    pub pixel_width_mm: f64,
    pub pixel_count: usize,
    /// Full angular acceptance, rad.
    pub acceptance_rad: f64,
    /// d theta' / d omega_s, rad s.
    pub gamma: f64,
    /// Delay coefficient, rad / (mm rad/s).
    pub alpha: f64,
    /// rad / (mm rad/s).
    pub beta: f64,
    /// rad / (mm rad).
    pub delta: f64,
    /// Zero-order H/V phase, rad.
    pub phi0: f64,
    /// Gaussian pump standard deviation, rad/s.
    pub pump_bandwidth: f64,
    pub delay_compensated: bool,
    /// Standard deviation of a residual random H/V phase, rad.
    pub residual_dephasing: f64,
    /// x_c1.
    pub idler_center_pixel: usize,
    /// x_c2.
    pub signal_center_pixel: usize,
    pub spectral_profile: SpectralProfile,
    /// Coherence between momentum sectors, in [0, 1].
    pub momentum_coherence: f64,
    /// Accidental plus dark coincidences, counts/s.
    pub background_rate: f64,
}

/// Angular acceptance set by the 4 mm slits, rad.
pub const DEFAULT_ACCEPTANCE: f64 = 6.5e-3;
/// Compensation slope a1 = -a2 in rad per pixel.
pub const COMPENSATION_SLOPE: f64 = -0.05;
/// gamma such that the acceptance spans a 100 nm band around 810 nm.
pub const DEFAULT_GAMMA: f64 = 2.262_467_093_522_838_4e-17;
pub const DEFAULT_PUMP_BANDWIDTH: f64 = 1.0e13;

// The three values below were solved on the default 64/64/32 grid so the
// 45-degree fringe visibilities come out at 0.423 (uncompensated), 0.616
// (delay compensated, flat mask) and 0.886 (linear mask).

/// alpha L sigma_p: `exp(-s^2/2) = 0.423/0.616`.
pub const CALIBRATED_DELAY_SPREAD: f64 = 0.867_034_929_500_815_2;
/// phi0, left in place by a flat mask.
pub const CALIBRATED_PHI0: f64 = 0.514_458_146_218_905_2;
/// Residual random H/V phase, rad.
pub const CALIBRATED_RESIDUAL_DEPHASING: f64 = 0.491_599_199_510_862_3;

impl Default for PhysicalConfig {
    fn default() -> Self {
        let crystal_length_mm = 1.0;
        let slm_distance_mm = 500.0;
        let pixel_width_mm = 0.1;
        let gamma = DEFAULT_GAMMA;
        let beta = COMPENSATION_SLOPE * slm_distance_mm * gamma / (crystal_length_mm * pixel_width_mm);
        PhysicalConfig {
            crystal_length_mm,
            slm_distance_mm,
            pixel_width_mm,
            pixel_count: 640,
            acceptance_rad: DEFAULT_ACCEPTANCE,
            gamma,
            alpha: CALIBRATED_DELAY_SPREAD / (crystal_length_mm * DEFAULT_PUMP_BANDWIDTH),
            beta,
            delta: 2.0 * beta / gamma,
            phi0: CALIBRATED_PHI0,
            pump_bandwidth: DEFAULT_PUMP_BANDWIDTH,
            delay_compensated: true,
            residual_dephasing: CALIBRATED_RESIDUAL_DEPHASING,
            idler_center_pixel: 160,
            signal_center_pixel: 480,
            spectral_profile: SpectralProfile::Uniform,
            momentum_coherence: 1.0,
            background_rate: 0.0,
        }
    }
}

impl PhysicalConfig {
    /// Noise-free limit: no residual dephasing, delay compensated.
    pub fn ideal() -> Self {
        PhysicalConfig { residual_dephasing: 0.0, delay_compensated: true, ..Default::default() }
    }

    /// D/d, pixels per radian.
    pub fn pixels_per_radian(&self) -> f64 {
        self.slm_distance_mm / self.pixel_width_mm
    }

    /// The delta that makes linear masks cancel every angular term.
    pub fn matched_delta(&self) -> f64 {
        2.0 * self.beta / self.gamma
    }

    /// Rescale `delta` to the compensable value after editing beta or gamma.
    pub fn with_matched_delta(mut self) -> Self {
        self.delta = self.matched_delta();
        self
    }

    /// beta L d / (gamma D), rad per pixel.
    pub fn compensation_slope(&self) -> f64 {
        self.beta * self.crystal_length_mm * self.pixel_width_mm / (self.gamma * self.slm_distance_mm)
    }

    /// Analytic optimum `a1 = -a2 = beta L d/(gamma D)`, `b1 = phi0`, `b2 = 0`.
    pub fn optimal_mask_params(&self) -> LinearParams {
        let a = self.compensation_slope();
        LinearParams { a1: a, b1: self.phi0, a2: -a, b2: 0.0 }
    }

    /// `alpha L sigma_p`, the delay phase spread across the pump spectrum.
    pub fn delay_spread(&self) -> f64 {
        self.alpha * self.crystal_length_mm * self.pump_bandwidth
    }

    /// Half-width of the acceptance window in pixels.
    pub fn acceptance_half_width_pixels(&self) -> f64 {
        self.pixels_per_radian() * self.acceptance_rad / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("crystal_length_mm", self.crystal_length_mm),
            ("slm_distance_mm", self.slm_distance_mm),
            ("pixel_width_mm", self.pixel_width_mm),
            ("acceptance_rad", self.acceptance_rad),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        let finite = [
            ("gamma", self.gamma),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("delta", self.delta),
            ("phi0", self.phi0),
            ("pump_bandwidth", self.pump_bandwidth),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::config(format!("{name} must be finite, got {v}")));
            }
        }
        if self.pump_bandwidth < 0.0 {
            return Err(Error::config("pump_bandwidth must be >= 0"));
        }
        if !(self.residual_dephasing.is_finite() && self.residual_dephasing >= 0.0) {
            return Err(Error::config("residual_dephasing must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.momentum_coherence) {
            return Err(Error::config("momentum_coherence must lie in [0, 1]"));
        }
        if !(self.background_rate.is_finite() && self.background_rate >= 0.0) {
            return Err(Error::config("background_rate must be >= 0"));
        }
        if let SpectralProfile::Gaussian { sigma } = self.spectral_profile {
            if !(sigma.is_finite() && sigma > 0.0) {
                return Err(Error::config("gaussian spectral sigma must be positive"));
            }
        }
        if self.pixel_count == 0 {
            return Err(Error::config("pixel_count must be positive"));
        }
        let span = self.pixels_per_radian() * self.acceptance_rad;
        if span > self.pixel_count as f64 {
            return Err(Error::config(format!(
                "acceptance spans {span:.1} pixels, more than the {} on the mask",
                self.pixel_count
            )));
        }
        let half = self.acceptance_half_width_pixels();
        for (name, c) in [("idler", self.idler_center_pixel), ("signal", self.signal_center_pixel)] {
            let lo = c as f64 - half;
            let hi = c as f64 + half;
            if lo < -0.5 || hi > self.pixel_count as f64 - 0.5 {
                return Err(Error::config(format!(
                    "{name} acceptance window [{lo:.1}, {hi:.1}] does not fit on the {}-pixel mask",
                    self.pixel_count
                )));
            }
        }
        Ok(())
    }
}
