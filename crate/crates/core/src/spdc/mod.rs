//! Discretised biphoton state behind the modulator.
//!
//! The angular domain is the wedge `theta in [-dtheta/2, dtheta/2]`,
//! `omega_s in [(theta - dtheta/2)/gamma, (theta + dtheta/2)/gamma]`, which is
//! the square `theta, theta' in [-dtheta/2, dtheta/2]` with
//! `theta' = -theta + gamma omega_s`. The pump axis is a Gaussian of width
//! `sigma_p`, truncated at eight standard deviations. All quadrature is the
//! midpoint rule.
//!
//! The relative H/V phase is
//!
//! `phi = phi0 + alpha L omega_p + beta L omega_s - delta L theta - phi_s(theta) - phi_i(theta')`
//!
//! with the delay term dropped when the pump-side compensation is in place.

mod sectors;
mod state;

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::config::{PhysicalConfig, SpectralProfile};
use crate::error::{Error, Result};
use crate::numeric::{cis, CompensatedSum, ComplexSum};
use crate::slm::{Arm, ArmPhases};

pub use sectors::{Sector, SectorConfig};
pub use state::{JointState, POL_DIM};

const PUMP_SPAN_SIGMAS: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resolution {
    pub n_theta: usize,
    pub n_omega_s: usize,
    pub n_omega_p: usize,
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution { n_theta: 64, n_omega_s: 64, n_omega_p: 32 }
    }
}

impl Resolution {
    pub fn new(n_theta: usize, n_omega_s: usize, n_omega_p: usize) -> Self {
        Resolution { n_theta, n_omega_s, n_omega_p }
    }

    pub fn square(n: usize) -> Self {
        Resolution { n_theta: n, n_omega_s: n, n_omega_p: 32 }
    }
}

/// Tensor midpoint grid over `(theta, omega_s, omega_p)`.
///
/// The joint density factorises into an angular part and a pump part; each
/// is normalised so its weighted sum is one.
#[derive(Debug, Clone)]
pub struct BiphotonGrid {
    theta: Vec<f64>,
    theta_idler: Vec<f64>,
    omega_s: Vec<f64>,
    angular_weight: f64,
    angular_density: Vec<f64>,
    omega_p: Vec<f64>,
    pump_weight: f64,
    pump_density: Vec<f64>,
}

impl BiphotonGrid {
    pub fn build(cfg: &PhysicalConfig, res: Resolution) -> Result<Self> {
        if res.n_theta < 8 || res.n_omega_s < 8 || res.n_omega_p < 8 {
            return Err(Error::usage(format!("grid resolution {res:?} below the minimum of 8 per axis")));
        }
        if cfg.gamma == 0.0 || !cfg.gamma.is_finite() {
            return Err(Error::config("gamma = 0 gives a zero-measure spectral domain"));
        }
        if !(cfg.acceptance_rad > 0.0) {
            return Err(Error::config("acceptance must be positive"));
        }
        let width = cfg.acceptance_rad;
        let h_theta = width / res.n_theta as f64;
        let h_idler = width / res.n_omega_s as f64;
        let theta: Vec<f64> = (0..res.n_theta).map(|i| -width / 2.0 + (i as f64 + 0.5) * h_theta).collect();
        let theta_idler: Vec<f64> = (0..res.n_omega_s).map(|j| -width / 2.0 + (j as f64 + 0.5) * h_idler).collect();
        let mut omega_s = Vec::with_capacity(res.n_theta * res.n_omega_s);
        for &t in &theta {
            for &tp in &theta_idler {
                omega_s.push((t + tp) / cfg.gamma);
            }
        }
        let angular_weight = h_theta * h_idler / cfg.gamma.abs();
        let raw: Vec<f64> = match cfg.spectral_profile {
            SpectralProfile::Uniform => alloc::vec![1.0; omega_s.len()],
            SpectralProfile::Gaussian { sigma } => {
                omega_s.iter().map(|w| libm::exp(-w * w / (2.0 * sigma * sigma))).collect()
            }
        };
        let z = raw.iter().map(|d| d * angular_weight).collect::<CompensatedSum>().value();
        if !(z > 0.0) {
            return Err(Error::config("angular density integrates to zero"));
        }
        let angular_density = raw.into_iter().map(|d| d / z).collect();

        let sigma = cfg.pump_bandwidth;
        let (omega_p, pump_weight, pump_raw): (Vec<f64>, f64, Vec<f64>) = if sigma > 0.0 {
            let span = 2.0 * PUMP_SPAN_SIGMAS * sigma;
            let h = span / res.n_omega_p as f64;
            let nodes: Vec<f64> = (0..res.n_omega_p).map(|k| -span / 2.0 + (k as f64 + 0.5) * h).collect();
            let g = nodes.iter().map(|w| libm::exp(-w * w / (2.0 * sigma * sigma))).collect();
            (nodes, h, g)
        } else {
            (alloc::vec![0.0; res.n_omega_p], 1.0, alloc::vec![1.0; res.n_omega_p])
        };
        let zp = pump_raw.iter().map(|g| g * pump_weight).collect::<CompensatedSum>().value();
        let pump_density = pump_raw.into_iter().map(|g| g / zp).collect();

        Ok(BiphotonGrid {
            theta,
            theta_idler,
            omega_s,
            angular_weight,
            angular_density,
            omega_p,
            pump_weight,
            pump_density,
        })
    }

    pub fn n_theta(&self) -> usize {
        self.theta.len()
    }

    pub fn n_omega_s(&self) -> usize {
        self.theta_idler.len()
    }

    pub fn n_omega_p(&self) -> usize {
        self.omega_p.len()
    }

    pub fn theta_nodes(&self) -> &[f64] {
        &self.theta
    }

    /// Idler angles `theta'` shared by every `theta` row.
    pub fn idler_nodes(&self) -> &[f64] {
        &self.theta_idler
    }

    pub fn omega_p_nodes(&self) -> &[f64] {
        &self.omega_p
    }

    pub fn omega_s(&self, i: usize, j: usize) -> f64 {
        self.omega_s[i * self.n_omega_s() + j]
    }

    /// Quadrature weight of node `(i, j, k)`.
    pub fn weight(&self, _i: usize, _j: usize, _k: usize) -> f64 {
        self.angular_weight * self.pump_weight
    }

    pub fn density(&self, i: usize, j: usize, k: usize) -> f64 {
        self.angular_density[i * self.n_omega_s() + j] * self.pump_density[k]
    }

    /// Probability mass of angular node `(i, j)` after integrating the pump.
    pub fn angular_mass(&self, i: usize, j: usize) -> f64 {
        self.angular_weight * self.angular_density[i * self.n_omega_s() + j]
    }

    pub fn pump_mass(&self, k: usize) -> f64 {
        self.pump_weight * self.pump_density[k]
    }

    /// `sum w * rho` over the full grid.
    pub fn normalization(&self) -> f64 {
        let ang = (0..self.n_theta())
            .flat_map(|i| (0..self.n_omega_s()).map(move |j| (i, j)))
            .map(|(i, j)| self.angular_mass(i, j))
            .collect::<CompensatedSum>()
            .value();
        let pump = (0..self.n_omega_p()).map(|k| self.pump_mass(k)).collect::<CompensatedSum>().value();
        ang * pump
    }
}

/// Full relative phase of the `|VV>` branch with respect to `|HH>` at one
/// grid point.
pub fn phase_at(cfg: &PhysicalConfig, mask: &impl ArmPhases, theta: f64, omega_s: f64, omega_p: f64) -> Result<f64> {
    let delay = if cfg.delay_compensated { 0.0 } else { cfg.alpha * cfg.crystal_length_mm * omega_p };
    Ok(angular_phase(cfg, mask, theta, omega_s)? + delay)
}

/// [`phase_at`] without the pump-frequency term.
pub fn angular_phase(cfg: &PhysicalConfig, mask: &impl ArmPhases, theta: f64, omega_s: f64) -> Result<f64> {
    let l = cfg.crystal_length_mm;
    let theta_idler = -theta + cfg.gamma * omega_s;
    let signal = mask.arm_phase(cfg, Arm::Signal, theta)?;
    let idler = mask.arm_phase(cfg, Arm::Idler, theta_idler)?;
    Ok(cfg.phi0 + cfg.beta * l * omega_s - cfg.delta * l * theta - signal - idler)
}

/// Density-weighted `<e^{i phi}>` over one sector pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coherence {
    pub value: Complex64,
    /// Probability mass of the region.
    pub weight: f64,
}

impl Coherence {
    pub fn is_empty(&self) -> bool {
        self.weight == 0.0
    }

    /// Fringe visibility of the region, `|<e^{i phi}>|`.
    pub fn visibility(&self) -> f64 {
        self.value.norm()
    }
}

/// Configuration plus its grid; the entry point for phase averages and state
/// synthesis.
#[derive(Debug, Clone)]
pub struct Source {
    cfg: PhysicalConfig,
    grid: BiphotonGrid,
}

impl Source {
    pub fn new(cfg: PhysicalConfig, res: Resolution) -> Result<Self> {
        cfg.validate()?;
        let grid = BiphotonGrid::build(&cfg, res)?;
        Ok(Source { cfg, grid })
    }

    pub fn config(&self) -> &PhysicalConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &BiphotonGrid {
        &self.grid
    }

    /// `<e^{i alpha L omega_p}>` over the pump, or 1 when compensated.
    pub fn pump_coherence(&self) -> Complex64 {
        if self.cfg.delay_compensated {
            return Complex64::new(1.0, 0.0);
        }
        let k_l = self.cfg.alpha * self.cfg.crystal_length_mm;
        let mut acc = ComplexSum::default();
        for (k, &w) in self.grid.omega_p.iter().enumerate() {
            acc.add(cis(k_l * w) * self.grid.pump_mass(k));
        }
        acc.value()
    }

    /// `exp(-sigma^2 / 2)` for the residual random phase.
    pub fn residual_factor(&self) -> f64 {
        let r = self.cfg.residual_dephasing;
        libm::exp(-r * r / 2.0)
    }

    /// Angular relative phase table, row-major over `(theta, theta')`.
    pub(crate) fn angular_phases(&self, mask: &impl ArmPhases) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.grid.omega_s.len());
        for (i, &t) in self.grid.theta.iter().enumerate() {
            for j in 0..self.grid.n_omega_s() {
                out.push(angular_phase(&self.cfg, mask, t, self.grid.omega_s(i, j))?);
            }
        }
        Ok(out)
    }

    /// Sector index of every theta row and every theta' column.
    pub(crate) fn node_sectors(&self, sectors: &SectorConfig) -> Result<(Vec<usize>, Vec<usize>)> {
        sectors.validate(&self.cfg)?;
        let find = |arm: Arm, nodes: &[f64]| -> Result<Vec<usize>> {
            nodes
                .iter()
                .map(|&a| {
                    sectors
                        .sector_of(arm, a)
                        .ok_or_else(|| Error::config(format!("{arm} node {a:e} rad lies in no sector")))
                })
                .collect()
        };
        Ok((find(Arm::Signal, &self.grid.theta)?, find(Arm::Idler, &self.grid.theta_idler)?))
    }

    /// Probability mass of each region `(n, m)`, row-major `n * M + m`.
    pub fn region_weights(&self, sectors: &SectorConfig) -> Result<Vec<f64>> {
        let (sig, idl) = self.node_sectors(sectors)?;
        let m_count = sectors.idler_count();
        let mut acc = alloc::vec![CompensatedSum::default(); sectors.signal_count() * m_count];
        for (i, &n) in sig.iter().enumerate() {
            for (j, &m) in idl.iter().enumerate() {
                acc[n * m_count + m].add(self.grid.angular_mass(i, j));
            }
        }
        Ok(acc.iter().map(CompensatedSum::value).collect())
    }

    /// `<e^{i phi}>` over the region where the signal lies in sector `n` and
    /// the idler in sector `m`, times the residual dephasing factor.
    pub fn dephasing_factor(
        &self,
        mask: &impl ArmPhases,
        sectors: &SectorConfig,
        n: usize,
        m: usize,
    ) -> Result<Coherence> {
        if n >= sectors.signal_count() || m >= sectors.idler_count() {
            return Err(Error::usage(format!(
                "region ({n}, {m}) outside a {}x{} sector layout",
                sectors.signal_count(),
                sectors.idler_count()
            )));
        }
        let (sig, idl) = self.node_sectors(sectors)?;
        let phases = self.angular_phases(mask)?;
        let nj = self.grid.n_omega_s();
        let mut num = ComplexSum::default();
        let mut den = CompensatedSum::default();
        for (i, &si) in sig.iter().enumerate() {
            if si != n {
                continue;
            }
            for (j, &mj) in idl.iter().enumerate() {
                if mj != m {
                    continue;
                }
                let w = self.grid.angular_mass(i, j);
                num.add(cis(phases[i * nj + j]) * w);
                den.add(w);
            }
        }
        let weight = den.value();
        if weight == 0.0 {
            return Ok(Coherence { value: Complex64::new(0.0, 0.0), weight: 0.0 });
        }
        let value = num.value() / weight * self.pump_coherence() * self.residual_factor();
        Ok(Coherence { value, weight })
    }

    /// Whole-acceptance coherence (single sector).
    pub fn coherence(&self, mask: &impl ArmPhases) -> Result<Coherence> {
        self.dephasing_factor(mask, &SectorConfig::single(&self.cfg), 0, 0)
    }
}
