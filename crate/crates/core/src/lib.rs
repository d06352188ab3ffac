//! Simulation core for a two-photon multipartite entanglement source built
//! from crossed type-I down-conversion crystals and a one-dimensional spatial
//! light modulator.
//!
//! The crate is `no_std` (with `alloc`). It covers the Hilbert-space toolkit
//! ([`qmath`]), the discretised biphoton state ([`spdc`]), the pixelated
//! modulator ([`slm`]), the coincidence bench ([`bench`]) and two-qubit
//! tomography ([`tomo`]). File formats and the command line live in the
//! `twophoton` companion crate.
//!
//! Qubit ordering is fixed crate-wide: signal polarization, idler
//! polarization, signal momentum, idler momentum. `|0>` is `H`, `|1>` is `V`.
#![no_std]
// `!(x > 0.0)` is the NaN-rejecting form used throughout the validators.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bench;
pub mod config;
pub mod error;
pub mod numeric;
pub mod qmath;
pub mod slm;
pub mod spdc;
pub mod tomo;

pub use config::{PhysicalConfig, SpectralProfile};
pub use error::{Error, Result};
pub use num_complex::Complex64;
