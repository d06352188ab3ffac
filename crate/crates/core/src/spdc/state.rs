use alloc::vec::Vec;

use num_complex::Complex64;

use super::{SectorConfig, Source};
use crate::error::{Error, Result};
use crate::numeric::cis;
use crate::qmath::{condition_on, partial_trace, CMatrix, DensityMatrix};
use crate::slm::{Arm, ArmPhases};

/// Dimension of the two-photon polarization space.
pub const POL_DIM: usize = 4;

/// Reduced state over polarization and the momentum-sector labels.
///
/// Subsystem order is `pol_s, pol_i, mom_s, mom_i`, where a momentum
/// subsystem is omitted when its arm has a single sector.
#[derive(Debug, Clone)]
pub struct JointState {
    pub rho: DensityMatrix,
    pub signal_sectors: usize,
    pub idler_sectors: usize,
    /// Probability of each region `(n, m)`, row-major `n * M + m`.
    pub region_weights: Vec<f64>,
}

impl JointState {
    pub fn dims(&self) -> Vec<usize> {
        let mut d = alloc::vec![2, 2];
        if self.signal_sectors > 1 {
            d.push(self.signal_sectors);
        }
        if self.idler_sectors > 1 {
            d.push(self.idler_sectors);
        }
        d
    }

    /// Polarization-only state, momentum traced out.
    pub fn polarization(&self) -> Result<DensityMatrix> {
        partial_trace(&self.rho, &self.dims(), &[0, 1])
    }

    /// Polarization state post-selected on region `(n, m)`, with its
    /// probability.
    pub fn conditional(&self, n: usize, m: usize) -> Result<(f64, DensityMatrix)> {
        if n >= self.signal_sectors || m >= self.idler_sectors {
            return Err(Error::usage("region index out of range"));
        }
        let dims = self.dims();
        let mut rho = self.rho.clone();
        let mut p = 1.0;
        let mut sub_dims = dims.clone();
        // Condition on the idler label first so the signal index stays put.
        if self.idler_sectors > 1 {
            let sub = sub_dims.len() - 1;
            let (q, r) = condition_on(&rho, &sub_dims, sub, m)?;
            p *= q;
            rho = r;
            sub_dims.pop();
        }
        if self.signal_sectors > 1 {
            let (q, r) = condition_on(&rho, &sub_dims, 2, n)?;
            p *= q;
            rho = r;
        }
        Ok((p, rho))
    }
}

/// Ordinal of every node within its own sector.
fn ordinals(sector_of_node: &[usize], count: usize) -> (Vec<usize>, Vec<Vec<usize>>) {
    let mut members = alloc::vec![Vec::new(); count];
    let mut ord = Vec::with_capacity(sector_of_node.len());
    for (idx, &s) in sector_of_node.iter().enumerate() {
        ord.push(members[s].len());
        members[s].push(idx);
    }
    (ord, members)
}

impl Source {
    /// Build the reduced state for a mask and a sector layout.
    ///
    /// Each angular node contributes `sqrt(w/2) (e^{i Theta_nm}|HH> +
    /// e^{i phi}|VV>)|n m>`, where `Theta_nm` is the sector phase sum carried
    /// by H and `phi` the angular relative phase under `mask`. Nodes sharing
    /// an in-sector position add coherently across sectors; `momentum_coherence`
    /// scales all cross-region blocks. Pump and residual phase noise reduce
    /// the HH/VV coherences.
    pub fn synthesize(&self, mask: &impl ArmPhases, sectors: &SectorConfig) -> Result<JointState> {
        let (sig, idl) = self.node_sectors(sectors)?;
        let n_count = sectors.signal_count();
        let m_count = sectors.idler_count();
        let dim = POL_DIM * n_count * m_count;
        let index = |ps: usize, pi: usize, n: usize, m: usize| ((ps * 2 + pi) * n_count + n) * m_count + m;
        let phases = self.angular_phases(mask)?;
        let nj = self.grid.n_omega_s();

        let (_, sig_members) = ordinals(&sig, n_count);
        let (_, idl_members) = ordinals(&idl, m_count);
        let max_s = sig_members.iter().map(Vec::len).max().unwrap_or(0);
        let max_i = idl_members.iter().map(Vec::len).max().unwrap_or(0);

        let mut rho = CMatrix::zeros(dim, dim);
        let mut psi = alloc::vec![Complex64::new(0.0, 0.0); dim];
        let mut support = Vec::with_capacity(2 * n_count * m_count);
        for os in 0..max_s {
            for oi in 0..max_i {
                support.clear();
                for n in 0..n_count {
                    let Some(&i) = sig_members[n].get(os) else { continue };
                    for m in 0..m_count {
                        let Some(&j) = idl_members[m].get(oi) else { continue };
                        let amp = libm::sqrt(self.grid.angular_mass(i, j) / 2.0);
                        let theta_r = sectors.phase(Arm::Signal, n) + sectors.phase(Arm::Idler, m);
                        let hh = index(0, 0, n, m);
                        let vv = index(1, 1, n, m);
                        psi[hh] = cis(theta_r) * amp;
                        psi[vv] = cis(phases[i * nj + j]) * amp;
                        support.push(hh);
                        support.push(vv);
                    }
                }
                for &a in &support {
                    for &b in &support {
                        rho[(a, b)] += psi[a] * psi[b].conj();
                    }
                }
                for &a in &support {
                    psi[a] = Complex64::new(0.0, 0.0);
                }
            }
        }

        let z = self.pump_coherence() * self.residual_factor();
        let kappa = self.cfg.momentum_coherence;
        let region = |idx: usize| idx % (n_count * m_count);
        let pol = |idx: usize| idx / (n_count * m_count);
        for a in 0..dim {
            for b in 0..dim {
                let mut f = Complex64::new(1.0, 0.0);
                if region(a) != region(b) {
                    f *= kappa;
                }
                match (pol(a), pol(b)) {
                    (0, 3) => f *= z.conj(),
                    (3, 0) => f *= z,
                    _ => {}
                }
                rho[(a, b)] *= f;
            }
        }
        let rho = DensityMatrix::new((&rho + rho.adjoint()) * Complex64::new(0.5, 0.0))?;
        Ok(JointState {
            rho,
            signal_sectors: n_count,
            idler_sectors: m_count,
            region_weights: self.region_weights(sectors)?,
        })
    }
}
