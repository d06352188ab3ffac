use alloc::vec::Vec;

use num_complex::Complex64;

use super::{frequencies, linear_invert, TomoData, TomoProtocol};
use crate::error::{Error, Result};
use crate::qmath::{CMatrix, DensityMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    pub max_iterations: usize,
    /// Stop once one iteration gains less log-likelihood than this.
    pub tolerance: f64,
    /// Weight of `I/4` mixed into the seed so no probability starts at zero.
    pub seed_mixing: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions { max_iterations: 5000, tolerance: 1e-10, seed_mixing: 1e-6 }
    }
}

#[derive(Debug, Clone)]
pub struct TomoResult {
    /// Linear-inversion estimate, possibly with negative eigenvalues.
    pub rho_linear: CMatrix,
    pub rho_mle: DensityMatrix,
    pub log_likelihood: f64,
    /// Log-likelihood after every accepted iteration, starting with the seed.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Clip negative eigenvalues to zero and renormalise.
pub fn psd_projection(m: &CMatrix) -> Result<DensityMatrix> {
    let h = (m + m.adjoint()).scale(0.5);
    let eig = h.symmetric_eigen();
    let mut out = CMatrix::zeros(m.nrows(), m.ncols());
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        if l > 0.0 {
            let v = eig.eigenvectors.column(k);
            out += (v * v.adjoint()) * Complex64::new(l, 0.0);
        }
    }
    let tr = out.trace().re;
    if !(tr > 0.0) {
        return Err(Error::Numerical("linear estimate has no positive part".into()));
    }
    DensityMatrix::new(normalized(out.unscale(tr)))
}

fn normalized(m: CMatrix) -> CMatrix {
    let h = (&m + m.adjoint()).scale(0.5);
    let tr = h.trace().re;
    h.unscale(tr)
}

/// Exposure-weighted probabilities `t_mu Tr[rho P_mu]`.
fn expected(protocol: &TomoProtocol, data: &TomoData, rho: &CMatrix) -> Vec<f64> {
    protocol.probabilities(rho).into_iter().zip(&data.windows).map(|(p, t)| p * t).collect()
}

/// `sum n ln q - n_tot ln sum q`, the Poisson likelihood with the unknown
/// source brightness profiled out.
fn log_likelihood(counts: &[u64], q: &[f64]) -> f64 {
    let total: f64 = q.iter().sum();
    let n_tot: u64 = counts.iter().sum();
    let mut acc = 0.0;
    for (&n, &qi) in counts.iter().zip(q) {
        if n > 0 {
            if !(qi > 0.0) {
                return f64::NEG_INFINITY;
            }
            acc += n as f64 * libm::log(qi);
        }
    }
    acc - n_tot as f64 * libm::log(total)
}

/// Maximum-likelihood estimate by the iterated `R rho R` map.
///
/// With exposures the map generalises to `T = G^{-1} R`, where
/// `R = sum (n_mu / q_mu) t_mu P_mu` and `G = (n_tot / sum q) sum t_mu P_mu`;
/// a fixed point of `rho -> T rho T^dagger` is a stationary point of the
/// likelihood. Each step is diluted, `T = I + e (G^{-1} R - I)`, with `e`
/// halved until the likelihood does not drop, so the recorded history is
/// monotone.
pub fn mle_reconstruct(protocol: &TomoProtocol, data: &TomoData, opts: &MleOptions) -> Result<TomoResult> {
    if data.total() == 0 {
        return Err(Error::usage("tomography needs at least one recorded count"));
    }
    let freqs = frequencies(protocol, data)?;
    let rho_linear = linear_invert(protocol, &freqs)?;
    let seed = psd_projection(&rho_linear)?;
    let mut rho = normalized(
        seed.matrix().scale(1.0 - opts.seed_mixing) + CMatrix::identity(4, 4).scale(opts.seed_mixing / 4.0),
    );

    let mut s = CMatrix::zeros(4, 4);
    for (p, &t) in protocol.projectors().iter().zip(&data.windows) {
        s += p.matrix() * Complex64::new(t, 0.0);
    }
    let s_inv = s.try_inverse().ok_or_else(|| Error::Numerical("exposure operator is singular".into()))?;
    let n_tot = data.total() as f64;

    let mut q = expected(protocol, data, &rho);
    let mut ll = log_likelihood(&data.counts, &q);
    if !ll.is_finite() {
        return Err(Error::Numerical("seed state assigns zero probability to observed counts".into()));
    }
    let mut history = alloc::vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    let identity = CMatrix::identity(4, 4);

    while iterations < opts.max_iterations {
        iterations += 1;
        let mut r = CMatrix::zeros(4, 4);
        for ((p, &n), (&qi, &t)) in protocol.projectors().iter().zip(&data.counts).zip(q.iter().zip(&data.windows)) {
            if n > 0 {
                r += p.matrix() * Complex64::new(n as f64 * t / qi, 0.0);
            }
        }
        let total_q: f64 = q.iter().sum();
        let step = (&s_inv * r).scale(total_q / n_tot) - &identity;

        let mut eps = 1.0;
        let mut accepted = None;
        while eps > 1e-12 {
            let t = &identity + step.scale(eps);
            let cand = normalized(&t * &rho * t.adjoint());
            let cq = expected(protocol, data, &cand);
            let cll = log_likelihood(&data.counts, &cq);
            if cll >= ll {
                accepted = Some((cand, cq, cll));
                break;
            }
            eps *= 0.5;
        }
        let Some((cand, cq, cll)) = accepted else {
            converged = true;
            break;
        };
        let gain = cll - ll;
        if gain < 0.0 {
            return Err(Error::Numerical("likelihood decreased".into()));
        }
        rho = cand;
        q = cq;
        ll = cll;
        history.push(ll);
        if gain < opts.tolerance {
            converged = true;
            break;
        }
    }

    let rho_mle = DensityMatrix::new(rho)?;
    Ok(TomoResult { rho_linear, rho_mle, log_likelihood: ll, history, iterations, converged })
}
