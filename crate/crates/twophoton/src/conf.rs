//! `key = value` run configuration.
//!
//! One assignment per line, `#` starts a comment, keys may appear once.
//! Angles accept `pi` factors such as `pi/2`, `-3*pi/4` or `0.5pi`. Lists are
//! comma separated, except target lists which use `;` because target names
//! carry their own parentheses.
//!
//! Geometry-dependent defaults are derived after parsing: unless given
//! explicitly, `beta` follows from `compensation_slope`, `alpha` from
//! `delay_spread` and `delta` is the matched `2 beta / gamma`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use twophoton_core::bench::{ScanParameter, SearchSpec, DEFAULT_RATE_SCALE, SCAN_WINDOW_S, TOMO_WINDOW_S};
use twophoton_core::config::{
    CALIBRATED_DELAY_SPREAD, COMPENSATION_SLOPE, DEFAULT_PUMP_BANDWIDTH,
};
use twophoton_core::qmath::TargetState;
use twophoton_core::slm::LinearParams;
use twophoton_core::spdc::{Resolution, SectorConfig};
use twophoton_core::tomo::{MleOptions, TomoProtocol};
use twophoton_core::{PhysicalConfig, SpectralProfile};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    NoiseFree,
    Sampled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanOptions {
    pub parameter: ScanParameter,
    /// `None` picks the parameter's natural range.
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub b_steps: usize,
    pub a_steps: usize,
    pub a_range: (f64, f64),
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions { parameter: ScanParameter::B1, start: None, stop: None, b_steps: 37, a_steps: 21, a_range: (-0.1, 0.0) }
    }
}

impl ScanOptions {
    pub fn range(&self, p: ScanParameter) -> (f64, f64, usize) {
        let (lo, hi, n) = match p {
            ScanParameter::APair => (self.a_range.0, self.a_range.1, self.a_steps),
            _ => (-PI, PI, self.b_steps),
        };
        if p == self.parameter {
            (self.start.unwrap_or(lo), self.stop.unwrap_or(hi), n)
        } else {
            (lo, hi, n)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectorOptions {
    pub signal: usize,
    pub idler: usize,
    pub signal_phases: Option<Vec<f64>>,
    pub idler_phases: Option<Vec<f64>>,
}

impl Default for SectorOptions {
    fn default() -> Self {
        SectorOptions { signal: 2, idler: 1, signal_phases: None, idler_phases: None }
    }
}

impl SectorOptions {
    /// Phases actually applied. Without explicit phases, a two-sector arm
    /// gets `[0, pi]` (the three-qubit cluster pattern) and a 2x2 layout the
    /// four-qubit pattern at zero branch phase.
    pub fn phases(&self) -> (Vec<f64>, Vec<f64>) {
        let default = |count: usize, layout: (usize, usize), arm_is_signal: bool| -> Vec<f64> {
            match (layout, arm_is_signal) {
                ((2, 2), true) => vec![0.0, 0.0],
                ((2, 2), false) => vec![0.0, PI],
                (_, _) if count == 2 => vec![0.0, PI],
                _ => vec![0.0; count],
            }
        };
        let layout = (self.signal, self.idler);
        (
            self.signal_phases.clone().unwrap_or_else(|| default(self.signal, layout, true)),
            self.idler_phases.clone().unwrap_or_else(|| default(self.idler, layout, false)),
        )
    }

    pub fn build(&self, cfg: &PhysicalConfig) -> Result<SectorConfig, CliError> {
        if 4 * self.signal * self.idler > 16 {
            return Err(CliError::Config(format!(
                "{}x{} sectors exceed the 16-dimensional state limit",
                self.signal, self.idler
            )));
        }
        let (s, i) = self.phases();
        Ok(SectorConfig::uniform(cfg, self.signal, self.idler)?.with_signal_phases(&s)?.with_idler_phases(&i)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TomoOptions {
    pub settings: Vec<String>,
    pub targets: Vec<TargetState>,
    pub resamples: usize,
    pub mle: MleOptions,
    pub counts_file: Option<PathBuf>,
}

impl Default for TomoOptions {
    fn default() -> Self {
        TomoOptions {
            settings: TomoProtocol::canonical().labels().to_vec(),
            targets: vec![TargetState::BellPhiPlus],
            resamples: 100,
            mle: MleOptions::default(),
            counts_file: None,
        }
    }
}

impl TomoOptions {
    pub fn protocol(&self) -> Result<TomoProtocol, CliError> {
        let refs: Vec<&str> = self.settings.iter().map(String::as_str).collect();
        Ok(TomoProtocol::from_labels(&refs)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub physical: PhysicalConfig,
    pub resolution: Resolution,
    pub rate_scale: f64,
    pub scan_window_s: f64,
    pub tomo_window_s: f64,
    /// Base mask for `scan` and `tomo`; `None` means the analytic optimum.
    pub mask: Option<LinearParams>,
    pub scan: ScanOptions,
    pub search: SearchSpec,
    pub objective: ObjectiveKind,
    pub sectors: SectorOptions,
    pub tomo: TomoOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            physical: PhysicalConfig::default(),
            resolution: Resolution::default(),
            rate_scale: DEFAULT_RATE_SCALE,
            scan_window_s: SCAN_WINDOW_S,
            tomo_window_s: TOMO_WINDOW_S,
            mask: None,
            scan: ScanOptions::default(),
            search: SearchSpec::default(),
            objective: ObjectiveKind::Sampled,
            sectors: SectorOptions::default(),
            tomo: TomoOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        // Relative count files resolve against the config's directory.
        if let Some(f) = cfg.tomo.counts_file.take() {
            let base = path.parent().unwrap_or(Path::new("."));
            cfg.tomo.counts_file = Some(if f.is_relative() { base.join(f) } else { f });
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line_no = k + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| line_err(line_no, format!("expected 'key = value', got '{line}'")))?;
            let key = key.trim().to_ascii_lowercase();
            if key.is_empty() {
                return Err(line_err(line_no, "missing key"));
            }
            if let Some((first, _)) = entries.get(&key) {
                return Err(line_err(line_no, format!("'{key}' already set on line {first}")));
            }
            entries.insert(key, (line_no, value.trim().to_string()));
        }
        let mut b = Builder { entries, cfg: RunConfig::default() };
        b.apply()?;
        b.cfg.physical.validate()?;
        Ok(b.cfg)
    }

    /// Applies a `--windows` override: one number for every acquisition, or
    /// `scan=S,tomo=T`.
    pub fn apply_windows(&mut self, spec: &str) -> Result<(), CliError> {
        let bad = || CliError::Config(format!("--windows: expected seconds or scan=S,tomo=T, got '{spec}'"));
        let positive = |s: &str| -> Result<f64, CliError> {
            let v: f64 = s.trim().parse().map_err(|_| bad())?;
            if v.is_finite() && v > 0.0 {
                Ok(v)
            } else {
                Err(bad())
            }
        };
        if let Ok(v) = positive(spec) {
            self.scan_window_s = v;
            self.tomo_window_s = v;
            return Ok(());
        }
        for part in spec.split(',') {
            let (k, v) = part.split_once('=').ok_or_else(bad)?;
            match k.trim() {
                "scan" => self.scan_window_s = positive(v)?,
                "tomo" => self.tomo_window_s = positive(v)?,
                _ => return Err(bad()),
            }
        }
        Ok(())
    }

    /// Applies a `--sectors` override, `NxM`, e.g. `2x1`.
    pub fn apply_sectors(&mut self, spec: &str) -> Result<(), CliError> {
        let bad = || CliError::Config(format!("--sectors: expected NxM, got '{spec}'"));
        let (n, m) = spec.split_once(['x', 'X']).ok_or_else(bad)?;
        let n: usize = n.trim().parse().map_err(|_| bad())?;
        let m: usize = m.trim().parse().map_err(|_| bad())?;
        if n == 0 || m == 0 {
            return Err(bad());
        }
        if (n, m) != (self.sectors.signal, self.sectors.idler) {
            self.sectors = SectorOptions { signal: n, idler: m, signal_phases: None, idler_phases: None };
        }
        Ok(())
    }

    pub fn apply_steps(&mut self, steps: usize) -> Result<(), CliError> {
        if steps < 3 {
            return Err(CliError::Config("--steps must be at least 3".into()));
        }
        self.scan.b_steps = steps;
        self.scan.a_steps = steps;
        Ok(())
    }

    /// The mask used when none is optimised: configured or analytic.
    pub fn base_mask(&self) -> LinearParams {
        self.mask.unwrap_or_else(|| self.physical.optimal_mask_params())
    }
}

fn line_err(line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("line {line}: {msg}"))
}

/// Number, `pi`, or a product/quotient of the two.
pub fn parse_angle(s: &str) -> Option<f64> {
    let s = s.trim();
    let (sign, body) = match s.strip_prefix('-') {
        Some(rest) => (-1.0, rest.trim()),
        None => (1.0, s.strip_prefix('+').unwrap_or(s).trim()),
    };
    if body.is_empty() {
        return None;
    }
    let factor = |f: &str| -> Option<f64> {
        let f = f.trim();
        match f {
            "pi" => Some(PI),
            _ => match f.strip_suffix("pi") {
                Some(num) if !num.is_empty() => num.trim().parse::<f64>().ok().map(|v| v * PI),
                _ => f.parse::<f64>().ok(),
            },
        }
    };
    let mut parts = body.split('/');
    let mut v = 1.0;
    for (k, num) in parts.by_ref().enumerate() {
        let mut prod = 1.0;
        for f in num.split('*') {
            prod *= factor(f)?;
        }
        if k == 0 {
            v = prod;
        } else {
            if prod == 0.0 {
                return None;
            }
            v /= prod;
        }
    }
    let out = sign * v;
    out.is_finite().then_some(out)
}

struct Builder {
    entries: BTreeMap<String, (usize, String)>,
    cfg: RunConfig,
}

impl Builder {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.remove(key)
    }

    fn float(&mut self, key: &str) -> Result<Option<f64>, CliError> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => {
                parse_angle(&v).map(Some).ok_or_else(|| line_err(line, format!("'{key}': '{v}' is not a number")))
            }
        }
    }

    fn set_float(&mut self, key: &str, slot: &mut f64) -> Result<(), CliError> {
        if let Some(v) = self.float(key)? {
            *slot = v;
        }
        Ok(())
    }

    fn uint(&mut self, key: &str) -> Result<Option<usize>, CliError> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse::<usize>()
                .map(Some)
                .map_err(|_| line_err(line, format!("'{key}': '{v}' is not a non-negative integer"))),
        }
    }

    fn boolean(&mut self, key: &str) -> Result<Option<bool>, CliError> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => match v.to_ascii_lowercase().as_str() {
                "true" | "yes" | "on" | "1" => Ok(Some(true)),
                "false" | "no" | "off" | "0" => Ok(Some(false)),
                _ => Err(line_err(line, format!("'{key}': '{v}' is not a boolean"))),
            },
        }
    }

    fn list(&mut self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => v
                .split(',')
                .map(|x| parse_angle(x).ok_or_else(|| line_err(line, format!("'{key}': bad entry '{}'", x.trim()))))
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
        }
    }

    fn range(&mut self, key: &str) -> Result<Option<(f64, f64)>, CliError> {
        let line = self.entries.get(key).map(|e| e.0);
        match self.list(key)? {
            None => Ok(None),
            Some(v) if v.len() == 2 && v[0] < v[1] => Ok(Some((v[0], v[1]))),
            Some(_) => Err(line_err(line.unwrap_or(0), format!("'{key}' needs two increasing values"))),
        }
    }

    fn apply(&mut self) -> Result<(), CliError> {
        let mut p = self.cfg.physical;
        self.set_float("crystal_length_mm", &mut p.crystal_length_mm)?;
        self.set_float("slm_distance_mm", &mut p.slm_distance_mm)?;
        self.set_float("pixel_width_mm", &mut p.pixel_width_mm)?;
        if let Some(n) = self.uint("pixel_count")? {
            p.pixel_count = n;
        }
        self.set_float("acceptance_rad", &mut p.acceptance_rad)?;
        self.set_float("gamma", &mut p.gamma)?;
        self.set_float("phi0", &mut p.phi0)?;
        self.set_float("pump_bandwidth", &mut p.pump_bandwidth)?;
        if let Some(b) = self.boolean("delay_compensated")? {
            p.delay_compensated = b;
        }
        self.set_float("residual_dephasing", &mut p.residual_dephasing)?;
        if let Some(n) = self.uint("idler_center_pixel")? {
            p.idler_center_pixel = n;
        }
        if let Some(n) = self.uint("signal_center_pixel")? {
            p.signal_center_pixel = n;
        }
        self.set_float("momentum_coherence", &mut p.momentum_coherence)?;
        self.set_float("background_rate", &mut p.background_rate)?;

        let sigma_line = self.entries.get("spectral_sigma").map(|e| e.0);
        let sigma = self.float("spectral_sigma")?;
        match self.take("spectral_profile") {
            None => {
                if let Some(line) = sigma_line {
                    return Err(line_err(line, "'spectral_sigma' requires spectral_profile = gaussian"));
                }
            }
            Some((line, v)) => {
                p.spectral_profile = match v.to_ascii_lowercase().as_str() {
                    "uniform" => SpectralProfile::Uniform,
                    "gaussian" => SpectralProfile::Gaussian {
                        sigma: sigma.ok_or_else(|| line_err(line, "gaussian profile needs spectral_sigma"))?,
                    },
                    _ => return Err(line_err(line, format!("unknown spectral_profile '{v}'"))),
                };
            }
        }

        let beta = self.exclusive("beta", "compensation_slope")?;
        p.beta = match beta {
            Some(("beta", v)) => v,
            Some((_, slope)) => slope * p.slm_distance_mm * p.gamma / (p.crystal_length_mm * p.pixel_width_mm),
            None => COMPENSATION_SLOPE * p.slm_distance_mm * p.gamma / (p.crystal_length_mm * p.pixel_width_mm),
        };
        let alpha = self.exclusive("alpha", "delay_spread")?;
        let sigma_ref = if p.pump_bandwidth > 0.0 { p.pump_bandwidth } else { DEFAULT_PUMP_BANDWIDTH };
        p.alpha = match alpha {
            Some(("alpha", v)) => v,
            Some((_, spread)) => spread / (p.crystal_length_mm * sigma_ref),
            None => CALIBRATED_DELAY_SPREAD / (p.crystal_length_mm * sigma_ref),
        };
        p.delta = match self.float("delta")? {
            Some(v) => v,
            None if p.gamma != 0.0 => 2.0 * p.beta / p.gamma,
            None => 0.0,
        };
        self.cfg.physical = p;

        let mut r = self.cfg.resolution;
        for (key, slot) in [("grid_theta", &mut r.n_theta), ("grid_omega_s", &mut r.n_omega_s), ("grid_omega_p", &mut r.n_omega_p)] {
            if let Some(n) = self.uint(key)? {
                *slot = n;
            }
        }
        if r.n_theta < 8 || r.n_omega_s < 8 || r.n_omega_p < 8 {
            return Err(CliError::Config("grid resolution must be at least 8 per axis".into()));
        }
        self.cfg.resolution = r;

        for (key, which) in [("rate_scale", 0), ("scan_window_s", 1), ("tomo_window_s", 2)] {
            let line = self.entries.get(key).map(|e| e.0);
            if let Some(v) = self.float(key)? {
                if !(v.is_finite() && v > 0.0) {
                    return Err(line_err(line.unwrap_or(0), format!("'{key}' must be positive")));
                }
                match which {
                    0 => self.cfg.rate_scale = v,
                    1 => self.cfg.scan_window_s = v,
                    _ => self.cfg.tomo_window_s = v,
                }
            }
        }

        let mask_keys = ["mask_a1", "mask_b1", "mask_a2", "mask_b2"];
        if mask_keys.iter().any(|k| self.entries.contains_key(*k)) {
            let mut m = self.cfg.physical.optimal_mask_params();
            self.set_float("mask_a1", &mut m.a1)?;
            self.set_float("mask_b1", &mut m.b1)?;
            self.set_float("mask_a2", &mut m.a2)?;
            self.set_float("mask_b2", &mut m.b2)?;
            self.cfg.mask = Some(m);
        }

        if let Some((line, v)) = self.take("scan_parameter") {
            self.cfg.scan.parameter =
                parse_scan_parameter(&v).ok_or_else(|| line_err(line, format!("unknown scan_parameter '{v}'")))?;
        }
        self.cfg.scan.start = self.float("scan_start")?;
        self.cfg.scan.stop = self.float("scan_stop")?;
        if let Some(n) = self.uint("scan_b_steps")? {
            self.cfg.scan.b_steps = n;
        }
        if let Some(n) = self.uint("scan_a_steps")? {
            self.cfg.scan.a_steps = n;
        }
        if let Some(r) = self.range("scan_a_range")? {
            self.cfg.scan.a_range = r;
        }
        if self.cfg.scan.b_steps < 3 || self.cfg.scan.a_steps < 3 {
            return Err(CliError::Config("scans need at least 3 steps".into()));
        }

        if let Some(r) = self.range("search_b_range")? {
            self.cfg.search.b_range = r;
        }
        if let Some(r) = self.range("search_a_range")? {
            self.cfg.search.a_range = r;
        }
        if let Some(n) = self.uint("search_steps")? {
            self.cfg.search.steps = n;
        }
        if let Some(n) = self.uint("search_max_iterations")? {
            self.cfg.search.max_iterations = n;
        }
        if let Some(v) = self.float("search_tolerance")? {
            self.cfg.search.tolerance = v;
        }
        if let Some((line, v)) = self.take("objective") {
            self.cfg.objective = match v.as_str() {
                "noise_free" => ObjectiveKind::NoiseFree,
                "sampled" => ObjectiveKind::Sampled,
                _ => return Err(line_err(line, format!("objective must be noise_free or sampled, got '{v}'"))),
            };
        }

        if let Some(n) = self.uint("signal_sectors")? {
            self.cfg.sectors.signal = n;
        }
        if let Some(n) = self.uint("idler_sectors")? {
            self.cfg.sectors.idler = n;
        }
        self.cfg.sectors.signal_phases = self.list("signal_phases")?;
        self.cfg.sectors.idler_phases = self.list("idler_phases")?;
        if self.cfg.sectors.signal == 0 || self.cfg.sectors.idler == 0 {
            return Err(CliError::Config("sector counts must be at least 1".into()));
        }

        if let Some((line, v)) = self.take("tomo_settings") {
            let labels: Vec<String> = v.split(',').map(|s| s.trim().to_string()).collect();
            let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
            TomoProtocol::from_labels(&refs).map_err(|e| line_err(line, e))?;
            self.cfg.tomo.settings = labels;
        }
        if let Some((line, v)) = self.take("tomo_targets") {
            self.cfg.tomo.targets = v
                .split(';')
                .map(|t| t.trim().parse::<TargetState>().map_err(|e| line_err(line, e)))
                .collect::<Result<_, _>>()?;
        }
        if let Some(n) = self.uint("bootstrap_resamples")? {
            self.cfg.tomo.resamples = n;
        }
        if let Some(n) = self.uint("mle_max_iterations")? {
            self.cfg.tomo.mle.max_iterations = n;
        }
        if let Some(v) = self.float("mle_tolerance")? {
            self.cfg.tomo.mle.tolerance = v;
        }
        if let Some((_, v)) = self.take("counts_file") {
            self.cfg.tomo.counts_file = Some(PathBuf::from(v));
        }

        if let Some((key, (line, _))) = self.entries.iter().next() {
            return Err(line_err(*line, format!("unknown key '{key}'")));
        }
        Ok(())
    }

    /// At most one of two alternative keys; returns which one and its value.
    fn exclusive(&mut self, a: &'static str, b: &'static str) -> Result<Option<(&'static str, f64)>, CliError> {
        if let (Some(_), Some((line, _))) = (self.entries.get(a), self.entries.get(b)) {
            return Err(line_err(*line, format!("'{a}' and '{b}' are alternatives; give one")));
        }
        if let Some(v) = self.float(a)? {
            return Ok(Some((a, v)));
        }
        Ok(self.float(b)?.map(|v| (b, v)))
    }
}

pub fn parse_scan_parameter(s: &str) -> Option<ScanParameter> {
    match s.trim().to_ascii_lowercase().as_str() {
        "b1" => Some(ScanParameter::B1),
        "b2" => Some(ScanParameter::B2),
        "a_pair" | "a" => Some(ScanParameter::APair),
        _ => None,
    }
}

pub fn scan_parameter_name(p: ScanParameter) -> &'static str {
    match p {
        ScanParameter::B1 => "b1",
        ScanParameter::B2 => "b2",
        ScanParameter::APair => "a_pair",
    }
}
