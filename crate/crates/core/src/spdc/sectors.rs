use alloc::format;
use alloc::vec::Vec;

use crate::config::PhysicalConfig;
use crate::error::{Error, Result};
use crate::slm::Arm;

/// One contiguous angular slice of an arm carrying a constant H phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sector {
    /// Inclusive lower angle, rad.
    pub lo: f64,
    /// Exclusive upper angle, rad (inclusive for the last sector).
    pub hi: f64,
    pub phase: f64,
}

/// Partition of each arm's acceptance into momentum sectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorConfig {
    signal: Vec<Sector>,
    idler: Vec<Sector>,
}

fn equal_split(width: f64, count: usize) -> Vec<Sector> {
    let h = width / count as f64;
    (0..count)
        .map(|k| Sector {
            lo: -width / 2.0 + k as f64 * h,
            hi: if k + 1 == count { width / 2.0 } else { -width / 2.0 + (k + 1) as f64 * h },
            phase: 0.0,
        })
        .collect()
}

impl SectorConfig {
    /// `n` equal signal sectors and `m` equal idler sectors, zero phases.
    pub fn uniform(cfg: &PhysicalConfig, n: usize, m: usize) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::config("sector counts must be at least 1"));
        }
        let s = SectorConfig { signal: equal_split(cfg.acceptance_rad, n), idler: equal_split(cfg.acceptance_rad, m) };
        s.validate(cfg)?;
        Ok(s)
    }

    pub fn single(cfg: &PhysicalConfig) -> Self {
        SectorConfig::uniform(cfg, 1, 1).expect("one sector always fits")
    }

    pub fn from_sectors(signal: Vec<Sector>, idler: Vec<Sector>) -> Self {
        SectorConfig { signal, idler }
    }

    fn set_phases(sectors: &mut [Sector], phases: &[f64], arm: Arm) -> Result<()> {
        if phases.len() != sectors.len() {
            return Err(Error::config(format!(
                "{arm}: {} phases given for {} sectors",
                phases.len(),
                sectors.len()
            )));
        }
        for (s, &p) in sectors.iter_mut().zip(phases) {
            s.phase = p;
        }
        Ok(())
    }

    pub fn with_signal_phases(mut self, phases: &[f64]) -> Result<Self> {
        Self::set_phases(&mut self.signal, phases, Arm::Signal)?;
        Ok(self)
    }

    pub fn with_idler_phases(mut self, phases: &[f64]) -> Result<Self> {
        Self::set_phases(&mut self.idler, phases, Arm::Idler)?;
        Ok(self)
    }

    pub fn signal_count(&self) -> usize {
        self.signal.len()
    }

    pub fn idler_count(&self) -> usize {
        self.idler.len()
    }

    pub fn sectors(&self, arm: Arm) -> &[Sector] {
        match arm {
            Arm::Signal => &self.signal,
            Arm::Idler => &self.idler,
        }
    }

    pub fn phase(&self, arm: Arm, index: usize) -> f64 {
        self.sectors(arm)[index].phase
    }

    pub fn sector_of(&self, arm: Arm, angle: f64) -> Option<usize> {
        let s = self.sectors(arm);
        for (k, sec) in s.iter().enumerate() {
            let below_hi = angle < sec.hi || (k + 1 == s.len() && angle <= sec.hi);
            if angle >= sec.lo && below_hi {
                return Some(k);
            }
        }
        None
    }

    /// Hilbert-space dimension `4 N M`.
    pub fn joint_dim(&self) -> usize {
        4 * self.signal.len() * self.idler.len()
    }

    pub fn validate(&self, cfg: &PhysicalConfig) -> Result<()> {
        let half = cfg.acceptance_rad / 2.0;
        let tol = 1e-12 * cfg.acceptance_rad.max(1e-300);
        for arm in [Arm::Signal, Arm::Idler] {
            let s = self.sectors(arm);
            if s.is_empty() {
                return Err(Error::config(format!("{arm}: at least one sector required")));
            }
            for (k, sec) in s.iter().enumerate() {
                if !(sec.lo < sec.hi) || !sec.phase.is_finite() {
                    return Err(Error::config(format!("{arm} sector {k}: empty or non-finite")));
                }
            }
            for (k, w) in s.windows(2).enumerate() {
                if w[1].lo < w[0].hi - tol {
                    return Err(Error::config(format!("{arm} sectors {k} and {} overlap", k + 1)));
                }
                if w[1].lo > w[0].hi + tol {
                    return Err(Error::config(format!("{arm} sectors {k} and {} leave a gap", k + 1)));
                }
            }
            if (s[0].lo + half).abs() > tol || (s[s.len() - 1].hi - half).abs() > tol {
                return Err(Error::config(format!("{arm} sectors must span the acceptance window exactly")));
            }
        }
        Ok(())
    }
}
