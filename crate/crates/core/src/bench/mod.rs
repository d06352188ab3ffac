//! The coincidence bench: analyzers, rates, Poisson counts, calibration scans
//! and the mask search.
//!
//! Waveplates are `R(t) diag(1, e^{i G}) R(-t)` with the fast axis at `t`
//! from horizontal, `G = pi/2` for a quarter-wave and `pi` for a half-wave
//! plate. Light crosses the quarter-wave plate, then the half-wave plate, then
//! the polarizer, so the analyzed state is `(W_h W_q)^dagger |pol>`.

mod optimize;

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::config::PhysicalConfig;
use crate::error::{Error, Result};
use crate::numeric::{cis, derive_seed};
use crate::qmath::{CMatrix, Ket, Operator, Tensor};
use crate::slm::{linear_mask, LinearParams, PhaseMask};
use crate::spdc::{JointState, Resolution, SectorConfig, Source};

pub use optimize::{optimize_mask, Objective, Optimized, SearchSpec};

/// Default coincidence rate of a fully transmitting setting, counts/s.
pub const DEFAULT_RATE_SCALE: f64 = 100.0;
/// Acquisition window for calibration scans, s.
pub const SCAN_WINDOW_S: f64 = 30.0;
/// Acquisition window per tomography setting, s.
pub const TOMO_WINDOW_S: f64 = 60.0;
/// Idler polarizer step of the visibility fringe, degrees.
pub const FRINGE_STEP_DEG: f64 = 5.0;

/// Quarter-wave plate, half-wave plate and polarizer of one arm, degrees.
/// A missing plate is simply not in the beam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmAnalyzer {
    pub qwp_deg: Option<f64>,
    pub hwp_deg: Option<f64>,
    pub polarizer_deg: f64,
}

impl ArmAnalyzer {
    pub fn polarizer(deg: f64) -> Self {
        ArmAnalyzer { qwp_deg: None, hwp_deg: None, polarizer_deg: deg }
    }

    /// Analyzer for one of the tomography basis labels `H`, `V`, `D`, `A`,
    /// `R`, `L`.
    pub fn from_label(label: char) -> Result<Self> {
        Ok(match label {
            'H' => Self::polarizer(0.0),
            'V' => Self::polarizer(90.0),
            'D' => Self::polarizer(45.0),
            'A' => Self::polarizer(-45.0),
            'R' => ArmAnalyzer { qwp_deg: Some(45.0), hwp_deg: None, polarizer_deg: 0.0 },
            'L' => ArmAnalyzer { qwp_deg: Some(-45.0), hwp_deg: None, polarizer_deg: 0.0 },
            other => return Err(Error::usage(format!("unknown analyzer label '{other}'"))),
        })
    }

    fn validate(&self) -> Result<()> {
        let finite = self.polarizer_deg.is_finite()
            && self.qwp_deg.is_none_or(f64::is_finite)
            && self.hwp_deg.is_none_or(f64::is_finite);
        if finite {
            Ok(())
        } else {
            Err(Error::usage("analyzer angles must be finite"))
        }
    }

    /// Single-photon state that this analyzer transmits.
    pub fn analyzed_state(&self) -> Vector2<Complex64> {
        let p = self.polarizer_deg.to_radians();
        let pol = Vector2::new(Complex64::new(libm::cos(p), 0.0), Complex64::new(libm::sin(p), 0.0));
        let mut w = Matrix2::identity();
        if let Some(q) = self.qwp_deg {
            w = waveplate(q.to_radians(), FRAC_PI_2) * w;
        }
        if let Some(h) = self.hwp_deg {
            w = waveplate(h.to_radians(), PI) * w;
        }
        w.adjoint() * pol
    }
}

/// Jones matrix of a retarder with fast axis at `theta` and retardance `gamma`.
pub fn waveplate(theta: f64, gamma: f64) -> Matrix2<Complex64> {
    let (s, c) = (libm::sin(theta), libm::cos(theta));
    let r = |s: f64| Matrix2::new(Complex64::new(c, 0.0), Complex64::new(-s, 0.0), Complex64::new(s, 0.0), Complex64::new(c, 0.0));
    r(s) * Matrix2::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), cis(gamma)) * r(-s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementSetting {
    pub signal: ArmAnalyzer,
    pub idler: ArmAnalyzer,
    /// Slit position on the signal arm; `None` passes every sector.
    pub signal_sector: Option<usize>,
    pub idler_sector: Option<usize>,
    pub window_s: f64,
    pub rate_scale: f64,
    /// Accidental plus dark coincidences, counts/s.
    pub background_rate: f64,
}

impl MeasurementSetting {
    pub fn new(signal: ArmAnalyzer, idler: ArmAnalyzer) -> Self {
        MeasurementSetting {
            signal,
            idler,
            signal_sector: None,
            idler_sector: None,
            window_s: SCAN_WINDOW_S,
            rate_scale: DEFAULT_RATE_SCALE,
            background_rate: 0.0,
        }
    }

    /// The purification probe, signal at 45 degrees and idler at -45.
    pub fn anti_diagonal() -> Self {
        Self::new(ArmAnalyzer::polarizer(45.0), ArmAnalyzer::polarizer(-45.0))
    }

    pub fn with_window(mut self, window_s: f64) -> Self {
        self.window_s = window_s;
        self
    }

    pub fn with_rate_scale(mut self, rate_scale: f64) -> Self {
        self.rate_scale = rate_scale;
        self
    }

    pub fn with_signal_sector(mut self, sector: Option<usize>) -> Self {
        self.signal_sector = sector;
        self
    }

    pub fn with_idler_sector(mut self, sector: Option<usize>) -> Self {
        self.idler_sector = sector;
        self
    }

    pub fn with_background(mut self, rate: f64) -> Self {
        self.background_rate = rate;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.signal.validate()?;
        self.idler.validate()?;
        if !(self.window_s.is_finite() && self.window_s > 0.0) {
            return Err(Error::usage(format!("acquisition window must be positive, got {}", self.window_s)));
        }
        if !(self.rate_scale.is_finite() && self.rate_scale > 0.0) {
            return Err(Error::usage(format!("rate scale must be positive, got {}", self.rate_scale)));
        }
        if !(self.background_rate.is_finite() && self.background_rate >= 0.0) {
            return Err(Error::usage("background rate must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountRecord {
    pub setting: MeasurementSetting,
    pub counts: u64,
    /// Noise-free rate, counts/s.
    pub expected_rate: f64,
}

fn arm_ket(v: Vector2<Complex64>) -> Ket {
    Ket::new(alloc::vec![v[0], v[1]]).expect("two amplitudes")
}

/// Two-qubit polarization projector of a setting.
pub fn projector(setting: &MeasurementSetting) -> Operator {
    let k = arm_ket(setting.signal.analyzed_state()).tensor(&arm_ket(setting.idler.analyzed_state()));
    k.projector()
}

fn selector(count: usize, sector: Option<usize>) -> Result<CMatrix> {
    match sector {
        None => Ok(CMatrix::identity(count, count)),
        Some(s) if s < count => {
            let mut m = CMatrix::zeros(count, count);
            m[(s, s)] = Complex64::new(1.0, 0.0);
            Ok(m)
        }
        Some(s) => Err(Error::usage(format!("sector {s} selected but only {count} exist"))),
    }
}

/// `rate_scale Tr[rho (P (x) Pi_sector)] + background`, clamped at zero.
pub fn coincidence_rate(state: &JointState, setting: &MeasurementSetting) -> Result<f64> {
    setting.validate()?;
    let mut op = projector(setting).into_matrix();
    if state.signal_sectors > 1 {
        op = op.kronecker(&selector(state.signal_sectors, setting.signal_sector)?);
    } else if setting.signal_sector.is_some_and(|s| s > 0) {
        return Err(Error::usage("signal sector selected on a single-sector state"));
    }
    if state.idler_sectors > 1 {
        op = op.kronecker(&selector(state.idler_sectors, setting.idler_sector)?);
    } else if setting.idler_sector.is_some_and(|s| s > 0) {
        return Err(Error::usage("idler sector selected on a single-sector state"));
    }
    if op.nrows() != state.rho.dim() {
        return Err(Error::usage("setting does not match the state dimension"));
    }
    let p = crate::qmath::trace_product(state.rho.matrix(), &op).re;
    Ok((setting.rate_scale * p).max(0.0) + setting.background_rate)
}

/// Poisson counts with mean `rate * window`, drawn from a ChaCha8 stream
/// seeded by `seed`.
pub fn sample_counts(rate: f64, window_s: f64, seed: u64) -> Result<u64> {
    let mean = rate * window_s;
    if !(mean.is_finite() && mean >= 0.0) {
        return Err(Error::usage(format!("count mean must be finite and non-negative, got {mean}")));
    }
    if mean == 0.0 {
        return Ok(0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = Poisson::new(mean).map_err(|e| Error::Numerical(format!("{e}")))?;
    Ok(d.sample(&mut rng) as u64)
}

/// Noise-free rate plus one Poisson draw for a setting.
pub fn record(state: &JointState, setting: &MeasurementSetting, seed: u64) -> Result<CountRecord> {
    let expected_rate = coincidence_rate(state, setting)?;
    let counts = sample_counts(expected_rate, setting.window_s, seed)?;
    Ok(CountRecord { setting: *setting, counts, expected_rate })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanParameter {
    B1,
    B2,
    /// `a1 = -a2 = value`.
    APair,
}

impl ScanParameter {
    pub fn apply(self, base: LinearParams, value: f64) -> LinearParams {
        match self {
            ScanParameter::B1 => LinearParams { b1: value, ..base },
            ScanParameter::B2 => LinearParams { b2: value, ..base },
            ScanParameter::APair => base.with_slope_pair(value),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPoint {
    pub value: f64,
    pub rate: f64,
    pub counts: u64,
    pub window_s: f64,
}

/// Everything a scan needs besides the swept parameter.
#[derive(Debug, Clone)]
pub struct ScanSpec {
    pub parameter: ScanParameter,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
    pub base: LinearParams,
    pub setting: MeasurementSetting,
    pub seed: u64,
}

impl ScanSpec {
    pub fn values(&self) -> Vec<f64> {
        let h = (self.stop - self.start) / (self.steps - 1) as f64;
        (0..self.steps).map(|k| self.start + k as f64 * h).collect()
    }
}

/// Largest slope a pixelated mask can represent without aliasing.
pub fn check_mask_params(p: &LinearParams) -> Result<()> {
    for (name, v) in [("a1", p.a1), ("a2", p.a2), ("b1", p.b1), ("b2", p.b2)] {
        if !v.is_finite() {
            return Err(Error::usage(format!("{name} is not finite")));
        }
    }
    if p.a1.abs() >= PI || p.a2.abs() >= PI {
        return Err(Error::usage(format!(
            "slope pair ({}, {}) rad/pixel aliases on the pixel grid",
            p.a1, p.a2
        )));
    }
    Ok(())
}

/// State produced by the linear mask `p` on a single-sector layout.
pub fn purified_state(source: &Source, p: &LinearParams) -> Result<JointState> {
    check_mask_params(p)?;
    let cfg = source.config();
    source.synthesize(&linear_mask(cfg, *p), &SectorConfig::single(cfg))
}

/// Sweep one mask parameter, synthesizing the state at every value.
pub fn scan(source: &Source, spec: &ScanSpec) -> Result<Vec<ScanPoint>> {
    if spec.steps < 3 {
        return Err(Error::usage("a scan needs at least 3 steps"));
    }
    if !(spec.start.is_finite() && spec.stop.is_finite()) || spec.start == spec.stop {
        return Err(Error::usage("scan range must be finite and non-empty"));
    }
    spec.setting.validate()?;
    spec.values()
        .into_iter()
        .enumerate()
        .map(|(k, value)| {
            let p = spec.parameter.apply(spec.base, value);
            let state = purified_state(source, &p)?;
            let rate = coincidence_rate(&state, &spec.setting)?;
            let counts = sample_counts(rate, spec.setting.window_s, derive_seed(spec.seed, k as u64))?;
            Ok(ScanPoint { value, rate, counts, window_s: spec.setting.window_s })
        })
        .collect()
}

/// Region selection for fringe and visibility measurements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Selection {
    pub signal_sector: Option<usize>,
    pub idler_sector: Option<usize>,
}

/// Idler polarizer angles of the fringe, 0 to 180 degrees inclusive.
pub fn fringe_angles() -> Vec<f64> {
    let n = (180.0 / FRINGE_STEP_DEG) as usize;
    (0..=n).map(|k| k as f64 * FRINGE_STEP_DEG).collect()
}

fn fringe_setting(angle: f64, sel: Selection) -> MeasurementSetting {
    MeasurementSetting::new(ArmAnalyzer::polarizer(45.0), ArmAnalyzer::polarizer(angle))
        .with_signal_sector(sel.signal_sector)
        .with_idler_sector(sel.idler_sector)
}

/// Noise-free fringe: signal polarizer at 45 degrees, idler polarizer swept.
pub fn fringe(state: &JointState, sel: Selection) -> Result<Vec<(f64, f64)>> {
    fringe_angles()
        .into_iter()
        .map(|a| Ok((a, coincidence_rate(state, &fringe_setting(a, sel))?)))
        .collect()
}

/// Poisson-sampled fringe, one independent stream per angle.
pub fn sampled_fringe(state: &JointState, sel: Selection, window_s: f64, seed: u64) -> Result<Vec<CountRecord>> {
    fringe_angles()
        .into_iter()
        .enumerate()
        .map(|(k, a)| record(state, &fringe_setting(a, sel).with_window(window_s), derive_seed(seed, k as u64)))
        .collect()
}

/// `(C_max - C_min) / (C_max + C_min)`.
pub fn contrast(values: impl IntoIterator<Item = f64>) -> Result<f64> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !(hi > 0.0) {
        return Err(Error::usage("all fringe rates are zero"));
    }
    Ok((hi - lo) / (hi + lo))
}

/// Fringe contrast of the (selected part of the) state, noise-free.
pub fn visibility_measurement(state: &JointState, sel: Selection) -> Result<f64> {
    contrast(fringe(state, sel)?.into_iter().map(|(_, r)| r))
}

/// Visibilities at the three purification stages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisibilityLadder {
    /// Flat mask, pump delay uncompensated.
    pub uncompensated: f64,
    /// Flat mask, delay compensated.
    pub delay_compensated: f64,
    /// Delay compensated plus the linear mask.
    pub slm: f64,
}

impl VisibilityLadder {
    pub fn is_strictly_increasing(&self) -> bool {
        self.uncompensated < self.delay_compensated && self.delay_compensated < self.slm
    }
}

/// States at the three purification stages, in ladder order.
pub fn ladder_states(cfg: &PhysicalConfig, res: Resolution, mask: &LinearParams) -> Result<[JointState; 3]> {
    check_mask_params(mask)?;
    let flat = PhaseMask::zeros(cfg.pixel_count);
    let single = SectorConfig::single(cfg);
    let stage = |compensated: bool, m: &PhaseMask| -> Result<JointState> {
        Source::new(PhysicalConfig { delay_compensated: compensated, ..*cfg }, res)?.synthesize(m, &single)
    };
    Ok([stage(false, &flat)?, stage(true, &flat)?, stage(true, &linear_mask(cfg, *mask))?])
}

pub fn visibility_ladder(cfg: &PhysicalConfig, res: Resolution, mask: &LinearParams) -> Result<VisibilityLadder> {
    let [s0, s1, s2] = ladder_states(cfg, res, mask)?;
    let v = |s: &JointState| visibility_measurement(s, Selection::default());
    Ok(VisibilityLadder { uncompensated: v(&s0)?, delay_compensated: v(&s1)?, slm: v(&s2)? })
}
