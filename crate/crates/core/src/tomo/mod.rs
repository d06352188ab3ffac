//! Two-qubit polarization tomography: an informationally complete set of
//! product projectors, its dual basis, linear inversion and a
//! maximum-likelihood refinement.

mod mle;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::bench::{self, ArmAnalyzer, CountRecord, MeasurementSetting, Selection};
use crate::error::{Error, Result};
use crate::numeric::derive_seed;
use crate::qmath::{fidelity, trace_product, CMatrix, DensityMatrix, Ket, Operator};
use crate::spdc::JointState;

pub use mle::{mle_reconstruct, psd_projection, MleOptions, TomoResult};

const ORTHOGONAL_PAIRS: [(char, char); 3] = [('H', 'V'), ('D', 'A'), ('R', 'L')];

/// Settings, their projectors and the dual basis `Tr[P_mu G_nu] = delta`.
#[derive(Debug, Clone)]
pub struct TomoProtocol {
    labels: Vec<String>,
    settings: Vec<MeasurementSetting>,
    projectors: Vec<Operator>,
    dual: Vec<CMatrix>,
    /// Indices of four settings forming one complete product basis.
    norm_group: [usize; 4],
}

impl TomoProtocol {
    /// `{H, V, D, R}` on each arm, signal label first: `HH, HV, HD, HR, VH, ...`.
    pub fn canonical() -> Self {
        let b = ['H', 'V', 'D', 'R'];
        let labels: Vec<String> = b.iter().flat_map(|&s| b.iter().map(move |&i| format!("{s}{i}"))).collect();
        let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
        Self::from_labels(&refs).expect("canonical set is informationally complete")
    }

    /// Protocol from two-letter labels over `H V D A R L`.
    pub fn from_labels(labels: &[&str]) -> Result<Self> {
        if labels.len() != 16 {
            return Err(Error::usage(format!("two-qubit tomography needs 16 settings, got {}", labels.len())));
        }
        let mut settings = Vec::with_capacity(16);
        for l in labels {
            let mut ch = l.chars();
            let (Some(s), Some(i), None) = (ch.next(), ch.next(), ch.next()) else {
                return Err(Error::usage(format!("setting label '{l}' must be two letters")));
            };
            settings.push(MeasurementSetting::new(ArmAnalyzer::from_label(s)?, ArmAnalyzer::from_label(i)?));
        }
        let projectors: Vec<Operator> = settings.iter().map(bench::projector).collect();

        let mut gram = nalgebra::DMatrix::<f64>::zeros(16, 16);
        for (m, pm) in projectors.iter().enumerate() {
            for (n, pn) in projectors.iter().enumerate() {
                gram[(m, n)] = pm.trace_product(pn).re;
            }
        }
        let sv = gram.clone().singular_values();
        let (smax, smin) = (sv.max(), sv.min());
        if !(smin > 1e-10 * smax) {
            return Err(Error::Numerical("projector set is not informationally complete".into()));
        }
        let inv = gram.try_inverse().ok_or_else(|| Error::Numerical("singular Gram matrix".into()))?;
        let dual = (0..16)
            .map(|n| {
                let mut g = CMatrix::zeros(4, 4);
                for (m, pm) in projectors.iter().enumerate() {
                    g += pm.matrix() * Complex64::new(inv[(n, m)], 0.0);
                }
                g
            })
            .collect();

        let labels: Vec<String> = labels.iter().map(|s| String::from(*s)).collect();
        let norm_group = find_norm_group(&labels)
            .ok_or_else(|| Error::usage("settings contain no complete product basis for normalization"))?;
        Ok(TomoProtocol { labels, settings, projectors, dual, norm_group })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn settings(&self) -> &[MeasurementSetting] {
        &self.settings
    }

    pub fn projectors(&self) -> &[Operator] {
        &self.projectors
    }

    pub fn dual_basis(&self) -> &[CMatrix] {
        &self.dual
    }

    /// Settings whose counts set the per-run normalization.
    pub fn normalization_group(&self) -> [usize; 4] {
        self.norm_group
    }

    /// `p_mu = Tr[rho P_mu]`.
    pub fn probabilities(&self, rho: &CMatrix) -> Vec<f64> {
        self.projectors.iter().map(|p| trace_product(rho, p.matrix()).re).collect()
    }
}

fn find_norm_group(labels: &[String]) -> Option<[usize; 4]> {
    let find = |a: char, b: char| labels.iter().position(|l| l.chars().eq([a, b]));
    for (s0, s1) in ORTHOGONAL_PAIRS {
        for (i0, i1) in ORTHOGONAL_PAIRS {
            if let (Some(a), Some(b), Some(c), Some(d)) = (find(s0, i0), find(s0, i1), find(s1, i0), find(s1, i1)) {
                return Some([a, b, c, d]);
            }
        }
    }
    None
}

/// Counts per protocol setting with their acquisition windows.
#[derive(Debug, Clone, PartialEq)]
pub struct TomoData {
    pub counts: Vec<u64>,
    pub windows: Vec<f64>,
}

impl TomoData {
    pub fn new(counts: Vec<u64>, windows: Vec<f64>) -> Result<Self> {
        let d = TomoData { counts, windows };
        d.validate()?;
        Ok(d)
    }

    pub fn uniform(counts: Vec<u64>, window_s: f64) -> Result<Self> {
        let n = counts.len();
        Self::new(counts, alloc::vec![window_s; n])
    }

    pub fn from_records(records: &[CountRecord]) -> Result<Self> {
        Self::new(records.iter().map(|r| r.counts).collect(), records.iter().map(|r| r.setting.window_s).collect())
    }

    fn validate(&self) -> Result<()> {
        if self.counts.len() != self.windows.len() {
            return Err(Error::usage("counts and windows differ in length"));
        }
        if self.windows.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::usage("acquisition windows must be positive"));
        }
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Rates normalised by the complete-basis subset: `f_mu = r_mu / N`.
pub fn frequencies(protocol: &TomoProtocol, data: &TomoData) -> Result<Vec<f64>> {
    if data.counts.len() != protocol.len() {
        return Err(Error::usage(format!("{} count entries for {} settings", data.counts.len(), protocol.len())));
    }
    let rates: Vec<f64> = data.counts.iter().zip(&data.windows).map(|(&n, &t)| n as f64 / t).collect();
    let norm: f64 = protocol.norm_group.iter().map(|&k| rates[k]).sum();
    if !(norm > 0.0) {
        return Err(Error::usage("normalization settings recorded no counts"));
    }
    Ok(rates.into_iter().map(|r| r / norm).collect())
}

/// `sum f_mu G_mu`, Hermitised. Not necessarily positive.
pub fn linear_invert(protocol: &TomoProtocol, freqs: &[f64]) -> Result<CMatrix> {
    if freqs.len() != protocol.len() {
        return Err(Error::usage("one frequency per setting required"));
    }
    let mut m = CMatrix::zeros(4, 4);
    for (f, g) in freqs.iter().zip(&protocol.dual) {
        m += g * Complex64::new(*f, 0.0);
    }
    Ok((&m + m.adjoint()).scale(0.5))
}

/// Simulated acquisition of every protocol setting on the polarization of
/// `state`, restricted to `sel`.
pub fn simulate_counts(
    protocol: &TomoProtocol,
    state: &JointState,
    sel: Selection,
    template: &MeasurementSetting,
    seed: u64,
) -> Result<Vec<CountRecord>> {
    protocol
        .settings
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let set = MeasurementSetting {
                signal: s.signal,
                idler: s.idler,
                signal_sector: sel.signal_sector,
                idler_sector: sel.idler_sector,
                ..*template
            };
            bench::record(state, &set, derive_seed(seed, k as u64))
        })
        .collect()
}

/// Mean and sample standard deviation of one bootstrapped fidelity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spread {
    pub mean: f64,
    pub std: f64,
}

/// Fidelities of one Poisson resample of `data`, re-reconstructed.
pub fn bootstrap_replicate(
    protocol: &TomoProtocol,
    data: &TomoData,
    targets: &[Ket],
    opts: &MleOptions,
    seed: u64,
    index: u64,
) -> Result<Vec<f64>> {
    let s = derive_seed(seed, index);
    let counts = data
        .counts
        .iter()
        .enumerate()
        .map(|(k, &n)| bench::sample_counts(n as f64, 1.0, derive_seed(s, k as u64)))
        .collect::<Result<Vec<_>>>()?;
    let res = mle_reconstruct(protocol, &TomoData { counts, windows: data.windows.clone() }, opts)?;
    targets.iter().map(|t| fidelity(&res.rho_mle, t)).collect()
}

/// Reduce replicate outcomes; at least 90% must have succeeded.
pub fn summarize_bootstrap(outcomes: &[Result<Vec<f64>>], n_targets: usize) -> Result<Vec<Spread>> {
    let ok: Vec<&Vec<f64>> = outcomes.iter().filter_map(|r| r.as_ref().ok()).collect();
    if outcomes.is_empty() || (ok.len() as f64) < 0.9 * outcomes.len() as f64 {
        return Err(Error::Numerical(format!(
            "only {} of {} bootstrap resamples reconstructed",
            ok.len(),
            outcomes.len()
        )));
    }
    let n = ok.len() as f64;
    Ok((0..n_targets)
        .map(|t| {
            let mean = ok.iter().map(|v| v[t]).sum::<f64>() / n;
            let var = if ok.len() > 1 { ok.iter().map(|v| (v[t] - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
            Spread { mean, std: libm::sqrt(var) }
        })
        .collect())
}

/// Bootstrap error bars for the fidelity to each target, sequentially.
pub fn bootstrap_errors(
    protocol: &TomoProtocol,
    data: &TomoData,
    targets: &[Ket],
    resamples: usize,
    opts: &MleOptions,
    seed: u64,
) -> Result<Vec<Spread>> {
    if resamples == 0 {
        return Err(Error::usage("at least one bootstrap resample required"));
    }
    let outcomes: Vec<_> =
        (0..resamples as u64).map(|r| bootstrap_replicate(protocol, data, targets, opts, seed, r)).collect();
    summarize_bootstrap(&outcomes, targets.len())
}

/// Fidelity of `rho` to each target.
pub fn fidelities(rho: &DensityMatrix, targets: &[Ket]) -> Result<Vec<f64>> {
    targets.iter().map(|t| fidelity(rho, t)).collect()
}
