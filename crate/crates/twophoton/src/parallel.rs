//! Bootstrap fan-out. Replicates draw from per-index seeds, so the parallel
//! and sequential paths give identical results.

use twophoton_core::qmath::Ket;
use twophoton_core::tomo::{bootstrap_replicate, summarize_bootstrap, MleOptions, Spread, TomoData, TomoProtocol};

use crate::error::CliError;

pub fn bootstrap(
    protocol: &TomoProtocol,
    data: &TomoData,
    targets: &[Ket],
    resamples: usize,
    opts: &MleOptions,
    seed: u64,
) -> Result<Vec<Spread>, CliError> {
    let one = |r: u64| bootstrap_replicate(protocol, data, targets, opts, seed, r);
    #[cfg(feature = "parallel")]
    let outcomes: Vec<_> = {
        use rayon::prelude::*;
        (0..resamples as u64).into_par_iter().map(one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<_> = (0..resamples as u64).map(one).collect();
    Ok(summarize_bootstrap(&outcomes, targets.len())?)
}
