//! Named target states. Ordering: signal polarization, idler polarization,
//! then momentum qubits (signal, idler).

use alloc::format;
use alloc::string::{String, ToString};
use core::f64::consts::{FRAC_1_SQRT_2, PI};
use core::fmt;
use core::str::FromStr;

use num_complex::Complex64;

use super::{Ket, Tensor};
use crate::error::{Error, Result};
use crate::numeric::cis;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn pair(a: Complex64, b: Complex64) -> Ket {
    // a|00> + b|11>
    let zz = Ket::qubits(&[0, 0]);
    let oo = Ket::qubits(&[1, 1]);
    zz.scale(a).add(&oo.scale(b)).expect("same dim")
}

pub fn bell_phi_plus() -> Ket {
    pair(c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2))
}

/// `(|00> - |11>)/sqrt 2`.
pub fn bell_phi_minus() -> Ket {
    pair(c(FRAC_1_SQRT_2), c(-FRAC_1_SQRT_2))
}

/// `(|00> + e^{-i phi_t}|11>)/sqrt 2`.
pub fn delta_plus(phi_t: f64) -> Ket {
    pair(c(FRAC_1_SQRT_2), cis(-phi_t) * FRAC_1_SQRT_2)
}

/// `(|00> - e^{+i phi_t}|11>)/sqrt 2`.
pub fn delta_minus(phi_t: f64) -> Ket {
    pair(c(FRAC_1_SQRT_2), -cis(phi_t) * FRAC_1_SQRT_2)
}

/// Three-qubit linear cluster `(|Phi+>|0> - |Phi->|1>)/sqrt 2`, third qubit
/// the signal momentum.
pub fn c3() -> Ket {
    let zero = Ket::qubits(&[0]);
    let one = Ket::qubits(&[1]);
    bell_phi_plus()
        .tensor(&zero)
        .add(&bell_phi_minus().tensor(&one).scale(c(-1.0)))
        .expect("same dim")
        .scale(c(FRAC_1_SQRT_2))
}

fn xi4_from(phi_t: f64, b01: Complex64, b10: Complex64, swap_labels: bool) -> Ket {
    let m = |s: u8, i: u8| if swap_labels { Ket::qubits(&[i, s]) } else { Ket::qubits(&[s, i]) };
    let terms = [
        bell_phi_plus().tensor(&m(0, 0)),
        bell_phi_minus().tensor(&m(1, 1)).scale(c(-1.0)),
        delta_plus(phi_t).tensor(&m(1, 0)).scale(b10),
        delta_minus(phi_t).tensor(&m(0, 1)).scale(-b01),
    ];
    let mut acc = terms[0].clone();
    for t in &terms[1..] {
        acc = acc.add(t).expect("same dim");
    }
    acc.scale(c(0.5))
}

/// Four-qubit state produced by the sector phase pattern
/// `phi_0s = -phi_0i`, `phi_1i = pi - phi_1s` with `phi_t = phi_0i + phi_1s`:
///
/// `1/2 [ |Phi+>|00> - |Phi->|11> + e^{i phi_t}|Delta+>|10> - e^{-i phi_t}|Delta->|01> ]`
///
/// with momentum kets written `|n_s m_i>`. The branch phases are the ones
/// the H-polarization gate imprints; [`xi4_printed`] drops them and labels
/// the momentum kets idler-first, which is the same state up to local
/// momentum phase gates.
pub fn xi4(phi0i: f64, phi1s: f64) -> Ket {
    let phi_t = phi0i + phi1s;
    xi4_from(phi_t, cis(-phi_t), cis(phi_t), false)
}

/// The four-qubit form without branch phases, momentum kets idler-first.
pub fn xi4_printed(phi_t: f64) -> Ket {
    xi4_from(phi_t, c(1.0), c(1.0), true)
}

/// A target family selectable by name, e.g. from the command line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetState {
    BellPhiPlus,
    BellPhiMinus,
    C3,
    Xi4 { phi0i: f64, phi1s: f64 },
    DeltaPlus(f64),
    DeltaMinus(f64),
}

impl TargetState {
    pub fn ket(&self) -> Ket {
        match *self {
            TargetState::BellPhiPlus => bell_phi_plus(),
            TargetState::BellPhiMinus => bell_phi_minus(),
            TargetState::C3 => c3(),
            TargetState::Xi4 { phi0i, phi1s } => xi4(phi0i, phi1s),
            TargetState::DeltaPlus(t) => delta_plus(t),
            TargetState::DeltaMinus(t) => delta_minus(t),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TargetState::C3 => 8,
            TargetState::Xi4 { .. } => 16,
            _ => 4,
        }
    }

    /// Build by family name and parameter list.
    pub fn from_name(name: &str, params: &[f64]) -> Result<Self> {
        let need = |n: usize| -> Result<()> {
            if params.len() == n {
                Ok(())
            } else {
                Err(Error::usage(format!("target '{name}' takes {n} parameter(s), got {}", params.len())))
            }
        };
        let t = match name {
            "bell_phi+" | "phi+" => {
                need(0)?;
                TargetState::BellPhiPlus
            }
            "bell_phi-" | "phi-" => {
                need(0)?;
                TargetState::BellPhiMinus
            }
            "c3" => {
                need(0)?;
                TargetState::C3
            }
            "xi4" => {
                need(2)?;
                TargetState::Xi4 { phi0i: params[0], phi1s: params[1] }
            }
            "delta+" => {
                need(1)?;
                TargetState::DeltaPlus(params[0])
            }
            "delta-" => {
                need(1)?;
                TargetState::DeltaMinus(params[0])
            }
            other => return Err(Error::usage(format!("unknown target state '{other}'"))),
        };
        Ok(t)
    }
}

impl FromStr for TargetState {
    type Err = Error;

    /// Accepts `name` or `name(p1,p2,...)`; `pi` is recognised as a value.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.find('(') {
            Some(open) => {
                let close = s
                    .rfind(')')
                    .filter(|&c| c > open)
                    .ok_or_else(|| Error::usage(format!("unbalanced parentheses in '{s}'")))?;
                (&s[..open], Some(&s[open + 1..close]))
            }
            None => (s, None),
        };
        let mut params = alloc::vec::Vec::new();
        if let Some(args) = args {
            for a in args.split(',').map(str::trim).filter(|a| !a.is_empty()) {
                let v = match a {
                    "pi" => PI,
                    "-pi" => -PI,
                    _ => a
                        .parse::<f64>()
                        .map_err(|_| Error::usage(format!("bad target parameter '{a}'")))?,
                };
                params.push(v);
            }
        }
        TargetState::from_name(name.trim(), &params)
    }
}

impl fmt::Display for TargetState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetState::BellPhiPlus => f.write_str("bell_phi+"),
            TargetState::BellPhiMinus => f.write_str("bell_phi-"),
            TargetState::C3 => f.write_str("c3"),
            TargetState::Xi4 { phi0i, phi1s } => write!(f, "xi4({phi0i},{phi1s})"),
            TargetState::DeltaPlus(t) => write!(f, "delta+({t})"),
            TargetState::DeltaMinus(t) => write!(f, "delta-({t})"),
        }
    }
}

impl TargetState {
    pub fn label(&self) -> String {
        self.to_string()
    }
}
