//! Two-stage coordinate descent over the linear mask: fit the offset `b1`,
//! then search the slope pair `a1 = -a2`, and repeat until both settle.

use alloc::vec::Vec;
use core::f64::consts::PI;

use super::{check_mask_params, coincidence_rate, purified_state, sample_counts, MeasurementSetting};
use crate::error::{Error, Result};
use crate::numeric::{derive_seed, wrap_phase};
use crate::slm::LinearParams;
use crate::spdc::Source;

/// How the search reads the 45/-45 coincidence signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    /// Exact rates.
    NoiseFree,
    /// Poisson counts in windows of the probe setting. Each grid point keeps
    /// its stream across iterations, so the search is a deterministic map.
    Sampled { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchSpec {
    pub b_range: (f64, f64),
    pub a_range: (f64, f64),
    pub steps: usize,
    pub max_iterations: usize,
    /// Convergence threshold on the parameter change per iteration.
    pub tolerance: f64,
    pub probe: MeasurementSetting,
}

impl Default for SearchSpec {
    fn default() -> Self {
        SearchSpec {
            b_range: (-PI, PI),
            a_range: (-0.1, 0.1),
            steps: 41,
            max_iterations: 20,
            tolerance: 1e-6,
            probe: MeasurementSetting::anti_diagonal(),
        }
    }
}

impl SearchSpec {
    fn validate(&self) -> Result<()> {
        let ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo < hi;
        if !ok(self.b_range) || !ok(self.a_range) {
            return Err(Error::usage("search intervals must be finite and increasing"));
        }
        if self.steps < 5 || self.max_iterations == 0 || !(self.tolerance > 0.0) {
            return Err(Error::usage("search needs at least 5 steps, one iteration and a positive tolerance"));
        }
        self.probe.validate()
    }

    fn grid((lo, hi): (f64, f64), steps: usize) -> Vec<f64> {
        (0..steps).map(|k| lo + (hi - lo) * k as f64 / (steps - 1) as f64).collect()
    }

    pub fn a_step(&self) -> f64 {
        (self.a_range.1 - self.a_range.0) / (self.steps - 1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Optimized {
    pub params: LinearParams,
    /// Objective value at `params` (rate, or counts per second when sampled).
    pub rate: f64,
    pub iterations: usize,
}

struct Evaluator<'a> {
    source: &'a Source,
    probe: MeasurementSetting,
    objective: Objective,
}

// Stream tags keep the b grid, the a grid, refinements and the init
// comparison on disjoint seeds.
const TAG_B: u64 = 1 << 40;
const TAG_A: u64 = 2 << 40;
const TAG_REFINE: u64 = 3 << 40;
const TAG_FINAL: u64 = 4 << 40;

impl Evaluator<'_> {
    fn eval(&self, p: &LinearParams, stream: u64) -> Result<f64> {
        let rate = coincidence_rate(&purified_state(self.source, p)?, &self.probe)?;
        match self.objective {
            Objective::NoiseFree => Ok(rate),
            Objective::Sampled { seed } => {
                let n = sample_counts(rate, self.probe.window_s, derive_seed(seed, stream))?;
                Ok(n as f64 / self.probe.window_s)
            }
        }
    }
}

/// Least-squares `r = c0 + c1 cos b + c2 sin b`; returns the minimising `b`,
/// or `None` when the fit has no modulation.
fn sinusoid_minimum(bs: &[f64], rs: &[f64]) -> Option<f64> {
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut atr = nalgebra::Vector3::<f64>::zeros();
    for (&b, &r) in bs.iter().zip(rs) {
        let row = nalgebra::Vector3::new(1.0, libm::cos(b), libm::sin(b));
        ata += row * row.transpose();
        atr += row * r;
    }
    let c = ata.lu().solve(&atr)?;
    let amp = libm::hypot(c[1], c[2]);
    let scale = rs.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    if !(amp > 1e-12 * scale.max(1e-300)) {
        return None;
    }
    Some(libm::atan2(-c[2], -c[1]))
}

/// Vertex of the parabola through three equally spaced samples, as an offset
/// in steps from the middle one.
fn parabolic_offset(left: f64, mid: f64, right: f64) -> Option<f64> {
    let curv = left - 2.0 * mid + right;
    if curv > 0.0 {
        Some(0.5 * (left - right) / curv)
    } else {
        None
    }
}

/// Minimise the probe coincidence rate over `(b1, a1 = -a2)`.
///
/// The result is never worse than `init` under the same objective. Failing
/// to settle within `max_iterations` yields [`Error::NotConverged`] carrying
/// the best parameters seen.
pub fn optimize_mask(source: &Source, init: LinearParams, spec: &SearchSpec, objective: Objective) -> Result<Optimized> {
    spec.validate()?;
    check_mask_params(&init)?;
    let ev = Evaluator { source, probe: spec.probe, objective };
    let b_grid = SearchSpec::grid(spec.b_range, spec.steps);
    let a_grid = SearchSpec::grid(spec.a_range, spec.steps);
    let h = spec.a_step();
    let mut cur = init;
    let mut converged = None;

    for it in 1..=spec.max_iterations {
        let prev = cur;

        let rs = b_grid.iter().enumerate().map(|(k, &b)| ev.eval(&LinearParams { b1: b, ..cur }, TAG_B + k as u64));
        let rs: Vec<f64> = rs.collect::<Result<_>>()?;
        if let Some(b) = sinusoid_minimum(&b_grid, &rs) {
            cur.b1 = b;
        }

        let rs = a_grid.iter().enumerate().map(|(k, &a)| ev.eval(&cur.with_slope_pair(a), TAG_A + k as u64));
        let rs: Vec<f64> = rs.collect::<Result<_>>()?;
        let (kmin, &rmin) = rs
            .iter()
            .enumerate()
            .min_by(|x, y| x.1.total_cmp(y.1))
            .expect("non-empty grid");
        cur = cur.with_slope_pair(a_grid[kmin]);
        if kmin > 0 && kmin + 1 < rs.len() {
            if let Some(off) = parabolic_offset(rs[kmin - 1], rmin, rs[kmin + 1]) {
                let cand = cur.with_slope_pair(a_grid[kmin] + off * h);
                if ev.eval(&cand, TAG_REFINE)? <= ev.eval(&cur, TAG_REFINE)? {
                    cur = cand;
                }
            }
        }

        let moved = (wrap_phase(cur.b1 - prev.b1)).abs().max((cur.a1 - prev.a1).abs());
        if moved < spec.tolerance {
            converged = Some(it);
            break;
        }
    }

    let r_cur = ev.eval(&cur, TAG_FINAL)?;
    let r_init = ev.eval(&init, TAG_FINAL)?;
    let (params, rate) = if r_cur <= r_init { (cur, r_cur) } else { (init, r_init) };
    match converged {
        Some(iterations) => Ok(Optimized { params, rate, iterations }),
        None => Err(Error::NotConverged { iterations: spec.max_iterations, best: params }),
    }
}
