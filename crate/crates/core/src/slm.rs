//! The pixelated one-dimensional modulator.
//!
//! Both arms share one device: the idler window is centred on
//! `idler_center_pixel`, the signal window on `signal_center_pixel`. A pixel
//! `x` sees the angle `(x - x_c) d / D` of its own arm. Phases act on the H
//! component only.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use crate::config::PhysicalConfig;
use crate::error::{Error, Result};
use crate::numeric::wrap_phase;
use crate::spdc::SectorConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arm {
    Signal,
    Idler,
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arm::Signal => "signal",
            Arm::Idler => "idler",
        })
    }
}

fn center(cfg: &PhysicalConfig, arm: Arm) -> usize {
    match arm {
        Arm::Signal => cfg.signal_center_pixel,
        Arm::Idler => cfg.idler_center_pixel,
    }
}

/// Linear purification profile: idler `a1 (x - x_c1) + b1`, signal
/// `a2 (x - x_c2) + b2`. Slopes in rad/pixel, offsets in rad.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LinearParams {
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
}

impl LinearParams {
    pub fn flat() -> Self {
        LinearParams::default()
    }

    /// `a1 = a`, `a2 = -a`, keeping the offsets.
    pub fn with_slope_pair(self, a: f64) -> Self {
        LinearParams { a1: a, a2: -a, ..self }
    }
}

/// Pixel under the given arm angle: `round(x_c + (D/d) angle)`, ties away
/// from the centre pixel.
pub fn pixel_of(cfg: &PhysicalConfig, arm: Arm, angle: f64) -> Result<usize> {
    let offset = libm::round(cfg.pixels_per_radian() * angle);
    let pixel = center(cfg, arm) as f64 + offset;
    if !pixel.is_finite() || pixel < 0.0 || pixel >= cfg.pixel_count as f64 {
        return Err(Error::OutOfMask { arm, angle, pixel: pixel as i64 });
    }
    Ok(pixel as usize)
}

/// Arm angle at the centre of pixel `x`.
pub fn pixel_angle(cfg: &PhysicalConfig, arm: Arm, pixel: usize) -> f64 {
    (pixel as f64 - center(cfg, arm) as f64) / cfg.pixels_per_radian()
}

/// Anything that assigns an H-polarization phase to an arm angle.
pub trait ArmPhases {
    fn arm_phase(&self, cfg: &PhysicalConfig, arm: Arm, angle: f64) -> Result<f64>;
}

/// Per-pixel phase tables, wrapped to `(-pi, pi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMask {
    signal: Vec<f64>,
    idler: Vec<f64>,
}

impl PhaseMask {
    pub fn zeros(pixel_count: usize) -> Self {
        PhaseMask { signal: alloc::vec![0.0; pixel_count], idler: alloc::vec![0.0; pixel_count] }
    }

    pub fn from_tables(signal: Vec<f64>, idler: Vec<f64>) -> Result<Self> {
        if signal.len() != idler.len() || signal.is_empty() {
            return Err(Error::usage(format!(
                "mask tables must have equal non-zero length (signal {}, idler {})",
                signal.len(),
                idler.len()
            )));
        }
        if signal.iter().chain(&idler).any(|p| !p.is_finite()) {
            return Err(Error::usage("mask phases must be finite"));
        }
        Ok(PhaseMask {
            signal: signal.into_iter().map(wrap_phase).collect(),
            idler: idler.into_iter().map(wrap_phase).collect(),
        })
    }

    pub fn pixel_count(&self) -> usize {
        self.signal.len()
    }

    pub fn signal_phases(&self) -> &[f64] {
        &self.signal
    }

    pub fn idler_phases(&self) -> &[f64] {
        &self.idler
    }

    pub fn table(&self, arm: Arm) -> &[f64] {
        match arm {
            Arm::Signal => &self.signal,
            Arm::Idler => &self.idler,
        }
    }

    /// Adds a constant to both tables.
    pub fn shifted(&self, constant: f64) -> Self {
        PhaseMask {
            signal: self.signal.iter().map(|p| wrap_phase(p + constant)).collect(),
            idler: self.idler.iter().map(|p| wrap_phase(p + constant)).collect(),
        }
    }
}

impl ArmPhases for PhaseMask {
    fn arm_phase(&self, cfg: &PhysicalConfig, arm: Arm, angle: f64) -> Result<f64> {
        if self.pixel_count() != cfg.pixel_count {
            return Err(Error::usage(format!(
                "mask has {} pixels, configuration expects {}",
                self.pixel_count(),
                cfg.pixel_count
            )));
        }
        Ok(self.table(arm)[pixel_of(cfg, arm, angle)?])
    }
}

/// Unpixelated linear profile, evaluated at the exact angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousMask(pub LinearParams);

impl ArmPhases for ContinuousMask {
    fn arm_phase(&self, cfg: &PhysicalConfig, arm: Arm, angle: f64) -> Result<f64> {
        let x = cfg.pixels_per_radian() * angle;
        Ok(match arm {
            Arm::Signal => self.0.a2 * x + self.0.b2,
            Arm::Idler => self.0.a1 * x + self.0.b1,
        })
    }
}

/// Populate both tables from the linear profile.
pub fn linear_mask(cfg: &PhysicalConfig, p: LinearParams) -> PhaseMask {
    let n = cfg.pixel_count;
    let xs = cfg.signal_center_pixel as f64;
    let xi = cfg.idler_center_pixel as f64;
    PhaseMask {
        signal: (0..n).map(|x| wrap_phase(p.a2 * (x as f64 - xs) + p.b2)).collect(),
        idler: (0..n).map(|x| wrap_phase(p.a1 * (x as f64 - xi) + p.b1)).collect(),
    }
}

/// Add each sector's constant phase to the pixels whose centre angle falls
/// inside that sector; pixels outside every sector are left alone.
pub fn with_sector_offsets(mask: &PhaseMask, cfg: &PhysicalConfig, sectors: &SectorConfig) -> Result<PhaseMask> {
    sectors.validate(cfg)?;
    if mask.pixel_count() != cfg.pixel_count {
        return Err(Error::usage("mask size does not match configuration"));
    }
    let mut out = mask.clone();
    for arm in [Arm::Signal, Arm::Idler] {
        let table = match arm {
            Arm::Signal => &mut out.signal,
            Arm::Idler => &mut out.idler,
        };
        for (x, phase) in table.iter_mut().enumerate() {
            let angle = pixel_angle(cfg, arm, x);
            if let Some(s) = sectors.sector_of(arm, angle) {
                *phase = wrap_phase(*phase + sectors.phase(arm, s));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;
    use proptest::prelude::*;

    fn same_phase(a: f64, b: f64) -> bool {
        wrap_phase(a - b).abs() < 1e-12
    }

    #[test]
    fn central_and_unit_steps() {
        let cfg = PhysicalConfig::default();
        assert_eq!(pixel_of(&cfg, Arm::Signal, 0.0).unwrap(), cfg.signal_center_pixel);
        assert_eq!(pixel_of(&cfg, Arm::Idler, 0.0).unwrap(), cfg.idler_center_pixel);
        let step = cfg.pixel_width_mm / cfg.slm_distance_mm;
        assert_eq!(pixel_of(&cfg, Arm::Signal, step).unwrap(), cfg.signal_center_pixel + 1);
    }

    #[test]
    fn acceptance_edge_pixel() {
        // (500 / 0.1) * 3.25e-3 = 16.25 -> 16
        let cfg = PhysicalConfig::default();
        assert_eq!(pixel_of(&cfg, Arm::Signal, 6.5e-3 / 2.0).unwrap(), cfg.signal_center_pixel + 16);
        assert_eq!(pixel_of(&cfg, Arm::Signal, -6.5e-3 / 2.0).unwrap(), cfg.signal_center_pixel - 16);
    }

    #[test]
    fn ties_round_away_from_centre() {
        let cfg = PhysicalConfig::default();
        let half = 0.5 / cfg.pixels_per_radian();
        assert_eq!(pixel_of(&cfg, Arm::Idler, half).unwrap(), cfg.idler_center_pixel + 1);
        assert_eq!(pixel_of(&cfg, Arm::Idler, -half).unwrap(), cfg.idler_center_pixel - 1);
    }

    #[test]
    fn off_device_is_an_error() {
        let cfg = PhysicalConfig::default();
        match pixel_of(&cfg, Arm::Idler, -0.05) {
            Err(Error::OutOfMask { arm, .. }) => assert_eq!(arm, Arm::Idler),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn flat_and_constant_masks() {
        let cfg = PhysicalConfig::default();
        let m = linear_mask(&cfg, LinearParams::flat());
        assert!(m.signal_phases().iter().chain(m.idler_phases()).all(|&p| p == 0.0));
        let m = linear_mask(&cfg, LinearParams { b1: PI, ..Default::default() });
        assert!(m.idler_phases().iter().all(|&p| p == PI));
        assert!(m.signal_phases().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn optimal_mask_has_compensation_slope() {
        let cfg = PhysicalConfig::default();
        let p = cfg.optimal_mask_params();
        assert!((p.a1 + 0.05).abs() < 1e-15 && (p.a2 - 0.05).abs() < 1e-15);
        let m = linear_mask(&cfg, p);
        let x = cfg.idler_center_pixel + 10;
        assert!(same_phase(m.idler_phases()[x], -0.5 + cfg.phi0));
    }

    #[test]
    fn sector_offsets_on_signal_half() {
        let cfg = PhysicalConfig::default();
        let sectors = SectorConfig::uniform(&cfg, 2, 1).unwrap().with_signal_phases(&[0.0, PI]).unwrap();
        let base = linear_mask(&cfg, LinearParams::flat());
        let m = with_sector_offsets(&base, &cfg, &sectors).unwrap();
        let xs = cfg.signal_center_pixel;
        assert_eq!(m.signal_phases()[xs - 5], 0.0);
        assert_eq!(m.signal_phases()[xs + 5], PI);
        assert_eq!(m.signal_phases()[xs], PI); // centre pixel sits at theta = 0, sector 1
        assert_eq!(m.signal_phases()[xs + 40], 0.0); // outside the acceptance
        assert_eq!(m.idler_phases(), base.idler_phases());
    }

    #[test]
    fn zero_offsets_are_identity() {
        let cfg = PhysicalConfig::default();
        let sectors = SectorConfig::uniform(&cfg, 2, 2).unwrap();
        let base = linear_mask(&cfg, cfg.optimal_mask_params());
        assert_eq!(with_sector_offsets(&base, &cfg, &sectors).unwrap(), base);
    }

    #[test]
    fn xi4_pattern_has_four_plateaus() {
        let cfg = PhysicalConfig::default();
        let (phi0i, phi1s) = (0.3, 0.4);
        let sectors = SectorConfig::uniform(&cfg, 2, 2)
            .unwrap()
            .with_signal_phases(&[-phi0i, phi1s])
            .unwrap()
            .with_idler_phases(&[phi0i, PI - phi1s])
            .unwrap();
        let m = with_sector_offsets(&PhaseMask::zeros(cfg.pixel_count), &cfg, &sectors).unwrap();
        // Oracle: each pixel inside the acceptance carries its sector's phase.
        let half = cfg.acceptance_half_width_pixels();
        for (arm, xc, phases) in [
            (Arm::Signal, cfg.signal_center_pixel, [-phi0i, phi1s]),
            (Arm::Idler, cfg.idler_center_pixel, [phi0i, PI - phi1s]),
        ] {
            for x in 0..cfg.pixel_count {
                let u = x as f64 - xc as f64;
                let expect = if u.abs() > half {
                    0.0
                } else if u < 0.0 {
                    phases[0]
                } else {
                    phases[1]
                };
                assert!(same_phase(m.table(arm)[x], expect), "{arm} pixel {x}");
            }
        }
    }

    proptest! {
        #[test]
        fn pixel_of_is_monotone(a in -3.0e-3f64..3.0e-3, b in -3.0e-3f64..3.0e-3) {
            let cfg = PhysicalConfig::default();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            for arm in [Arm::Signal, Arm::Idler] {
                prop_assert!(pixel_of(&cfg, arm, lo).unwrap() <= pixel_of(&cfg, arm, hi).unwrap());
            }
        }

        #[test]
        fn linear_mask_reproduces_profile(a1 in -0.2f64..0.2, b1 in -7.0f64..7.0, a2 in -0.2f64..0.2, b2 in -7.0f64..7.0) {
            let cfg = PhysicalConfig::default();
            let p = LinearParams { a1, b1, a2, b2 };
            let m = linear_mask(&cfg, p);
            for x in [0usize, 100, 160, 300, 480, 639] {
                let s = a2 * (x as f64 - cfg.signal_center_pixel as f64) + b2;
                let i = a1 * (x as f64 - cfg.idler_center_pixel as f64) + b1;
                prop_assert!(same_phase(m.signal_phases()[x], s));
                prop_assert!(same_phase(m.idler_phases()[x], i));
            }
        }

        #[test]
        fn offsets_commute_with_global_constant(k in -4.0f64..4.0, p0 in -3.0f64..3.0, p1 in -3.0f64..3.0) {
            let cfg = PhysicalConfig::default();
            let sectors = SectorConfig::uniform(&cfg, 2, 1).unwrap().with_signal_phases(&[p0, p1]).unwrap();
            let base = linear_mask(&cfg, cfg.optimal_mask_params());
            let a = with_sector_offsets(&base.shifted(k), &cfg, &sectors).unwrap();
            let b = with_sector_offsets(&base, &cfg, &sectors).unwrap().shifted(k);
            for x in 0..cfg.pixel_count {
                prop_assert!(same_phase(a.signal_phases()[x], b.signal_phases()[x]));
                prop_assert!(same_phase(a.idler_phases()[x], b.idler_phases()[x]));
            }
        }

        #[test]
        fn pixel_centre_round_trip(theta in -3.25e-3f64..3.25e-3) {
            let cfg = PhysicalConfig::default();
            let x = pixel_of(&cfg, Arm::Signal, theta).unwrap();
            let back = pixel_angle(&cfg, Arm::Signal, x);
            prop_assert!((back - theta).abs() <= cfg.pixel_width_mm / (2.0 * cfg.slm_distance_mm) + 1e-15);
        }
    }
}
