use super::*;
use alloc::vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

use crate::numeric::cis;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn random_density(rng: &mut impl Rng, dim: usize) -> DensityMatrix {
    let a = CMatrix::from_fn(dim, dim, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let m = &a * a.adjoint();
    let tr = m.trace().re;
    DensityMatrix::new(m.unscale(tr)).unwrap()
}

#[test]
fn basis_tensor_bookkeeping() {
    let k = Ket::basis(2, 0).unwrap().tensor(&Ket::basis(2, 1).unwrap());
    assert_eq!(k.dim(), 4);
    assert_eq!(k.amplitudes()[1], c(1.0));
    assert_eq!(k.norm_sqr(), 1.0);
}

#[test]
fn bell_times_zero_expands() {
    let k = bell_phi_plus().tensor(&Ket::qubits(&[0]));
    let expect = Ket::qubits(&[0, 0, 0]).add(&Ket::qubits(&[1, 1, 0])).unwrap().scale(c(FRAC_1_SQRT_2));
    assert!(max_abs_diff(
        &CMatrix::from_column_slice(8, 1, k.amplitudes().as_slice()),
        &CMatrix::from_column_slice(8, 1, expect.amplitudes().as_slice())
    ) < 1e-15);
}

#[test]
fn identity_tensor() {
    let i4 = Operator::identity(2).tensor(&Operator::identity(2));
    assert_eq!(i4, Operator::identity(4));
}

#[test]
fn bell_marginal_is_maximally_mixed() {
    let rho = bell_phi_plus().density().unwrap();
    let r = partial_trace(&rho, &[2, 2], &[0]).unwrap();
    assert!(max_abs_diff(r.matrix(), DensityMatrix::maximally_mixed(2).matrix()) < 1e-15);
}

#[test]
fn product_state_factorises() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for (da, db) in [(2, 2), (2, 4), (4, 2), (2, 8)] {
        let a = random_density(&mut rng, da);
        let b = random_density(&mut rng, db);
        let ab = a.tensor(&b);
        let ra = partial_trace(&ab, &[da, db], &[0]).unwrap();
        let rb = partial_trace(&ab, &[da, db], &[1]).unwrap();
        assert!(max_abs_diff(ra.matrix(), a.matrix()) < 1e-14);
        assert!(max_abs_diff(rb.matrix(), b.matrix()) < 1e-14);
    }
}

#[test]
fn c3_polarization_marginal_matches_direct_algebra() {
    // Oracle: explicit sum over the third-qubit index of the 8x8 projector,
    // rho_ab[i][j] = sum_k rho[2i+k][2j+k].
    let v = c3();
    let a = v.amplitudes();
    let mut oracle = [[c(0.0); 4]; 4];
    for (i, row) in oracle.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            for k in 0..2 {
                *entry += a[2 * i + k] * a[2 * j + k].conj();
            }
        }
    }
    // Frozen from the oracle: diag(1/2, 0, 0, 1/2).
    for (i, row) in oracle.iter().enumerate() {
        for (j, &entry) in row.iter().enumerate() {
            let expect = if i == j && (i == 0 || i == 3) { 0.5 } else { 0.0 };
            assert!((entry - c(expect)).norm() < 1e-15);
        }
    }
    let r = partial_trace(&v.density().unwrap(), &[2, 2, 2], &[0, 1]).unwrap();
    let mix = (bell_phi_plus().projector().matrix() + bell_phi_minus().projector().matrix()).scale(0.5);
    assert!(max_abs_diff(r.matrix(), &mix) < 1e-15);
    for i in 0..4 {
        for j in 0..4 {
            assert!((r.matrix()[(i, j)] - oracle[i][j]).norm() < 1e-15);
        }
    }
}

#[test]
fn partial_trace_rejects_bad_dims() {
    let rho = bell_phi_plus().density().unwrap();
    assert!(matches!(partial_trace(&rho, &[2, 3], &[0]), Err(Error::Usage(_))));
    assert!(matches!(partial_trace(&rho, &[2, 2], &[2]), Err(Error::Usage(_))));
}

#[test]
fn fidelity_basics() {
    let psi = bell_phi_plus();
    assert!((fidelity(&psi.density().unwrap(), &psi).unwrap() - 1.0).abs() < 1e-15);
    assert!((fidelity(&DensityMatrix::maximally_mixed(4), &psi).unwrap() - 0.25).abs() < 1e-15);
    let unnormalised = psi.scale(c(2.0));
    assert!(matches!(
        fidelity(&DensityMatrix::maximally_mixed(4), &unnormalised),
        Err(Error::Usage(_))
    ));
}

#[test]
fn c3_closed_form() {
    // (|000> + |110> - |001> + |111>)/2
    let expect = [0.5, -0.5, 0.0, 0.0, 0.0, 0.0, 0.5, 0.5];
    let k = c3();
    for (a, e) in k.amplitudes().iter().zip(expect) {
        assert!((a - c(e)).norm() < 1e-15);
    }
    assert!(k.is_normalized());
}

#[test]
fn delta_plus_zero_is_bell() {
    let d = delta_plus(0.0);
    assert!((d.inner(&bell_phi_plus()).unwrap() - c(1.0)).norm() < 1e-15);
}

/// Independent construction of `C_phi (|Phi+> (x) |Psi>)` with the SLM phase
/// imprinted on each photon's H component separately.
fn controlled_phase_oracle(phi_s: [f64; 2], phi_i: [f64; 2]) -> CVector {
    let mut v = CVector::zeros(16);
    for ps in 0..2usize {
        for pi in 0..2usize {
            if ps != pi {
                continue; // |Phi+> has no HV/VH amplitude
            }
            for n in 0..2usize {
                for m in 0..2usize {
                    let mut phase = 0.0;
                    if ps == 0 {
                        phase += phi_s[n];
                    }
                    if pi == 0 {
                        phase += phi_i[m];
                    }
                    let idx = ((ps * 2 + pi) * 2 + n) * 2 + m;
                    v[idx] = cis(phase) * (FRAC_1_SQRT_2 * 0.5);
                }
            }
        }
    }
    v
}

#[test]
fn xi4_matches_controlled_phase_construction() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
    for _ in 0..20 {
        let phi0i: f64 = rng.random_range(-PI..PI);
        let phi1s: f64 = rng.random_range(-PI..PI);
        let oracle = controlled_phase_oracle([-phi0i, phi1s], [phi0i, PI - phi1s]);
        let k = xi4(phi0i, phi1s);
        assert!(k.is_normalized());
        let diff = (k.amplitudes() - &oracle).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-12, "diff {diff}");
    }
}

#[test]
fn printed_xi4_is_local_unitary_equivalent() {
    let (phi0i, phi1s) = (0.3, 0.4);
    let t = phi0i + phi1s;
    let printed = xi4_printed(t);
    // swap the two momentum qubits, then diag(1, e^{i t}) on mom_s and
    // diag(1, e^{-i t}) on mom_i
    let mut mapped = CVector::zeros(16);
    for idx in 0..16usize {
        let (pol, a, b) = (idx >> 2, (idx >> 1) & 1, idx & 1);
        let (n, m) = (b, a);
        let mut z = printed.amplitudes()[idx];
        if n == 1 {
            z *= cis(t);
        }
        if m == 1 {
            z *= cis(-t);
        }
        mapped[(pol << 2) | (n << 1) | m] = z;
    }
    let ours = xi4(phi0i, phi1s);
    assert!((ours.amplitudes() - &mapped).iter().all(|z| z.norm() < 1e-12));
    // Without the local correction the overlap is not unity.
    let overlap = ours.inner(&printed).unwrap().norm_sqr();
    assert!(overlap < 0.99);
}

#[test]
fn target_names_parse() {
    assert_eq!("c3".parse::<TargetState>().unwrap(), TargetState::C3);
    assert_eq!(
        "xi4(0.3, 0.4)".parse::<TargetState>().unwrap(),
        TargetState::Xi4 { phi0i: 0.3, phi1s: 0.4 }
    );
    assert_eq!("delta-(pi)".parse::<TargetState>().unwrap(), TargetState::DeltaMinus(PI));
    assert!(matches!("ghz".parse::<TargetState>(), Err(Error::Usage(_))));
    assert!(matches!("xi4(1)".parse::<TargetState>(), Err(Error::Usage(_))));
    for t in ["bell_phi+", "bell_phi-", "c3", "xi4(0.1,0.2)", "delta+(0.5)"] {
        let s: TargetState = t.parse().unwrap();
        assert_eq!(s.ket().dim(), s.dim());
        assert!(s.ket().is_normalized());
    }
}

#[test]
fn density_invariants_rejected() {
    let mut m = CMatrix::identity(2, 2);
    assert!(DensityMatrix::new(m.clone()).is_err()); // trace 2
    m[(0, 0)] = c(1.5);
    m[(1, 1)] = c(-0.5);
    assert!(DensityMatrix::new(m.clone()).is_err()); // negative eigenvalue
    m[(0, 0)] = c(0.5);
    m[(1, 1)] = c(0.5);
    m[(0, 1)] = Complex64::new(0.0, 0.1);
    assert!(DensityMatrix::new(m).is_err()); // not Hermitian
}

#[test]
fn condition_on_c3_momentum() {
    let rho = c3().density().unwrap();
    let (p0, r0) = condition_on(&rho, &[2, 2, 2], 2, 0).unwrap();
    let (p1, r1) = condition_on(&rho, &[2, 2, 2], 2, 1).unwrap();
    assert!((p0 - 0.5).abs() < 1e-15 && (p1 - 0.5).abs() < 1e-15);
    assert!((fidelity(&r0, &bell_phi_plus()).unwrap() - 1.0).abs() < 1e-14);
    assert!((fidelity(&r1, &bell_phi_minus()).unwrap() - 1.0).abs() < 1e-14);
}

proptest! {
    #[test]
    fn tensor_is_associative(seed in 0u64..1000) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = random_density(&mut rng, 2);
        let b = random_density(&mut rng, 2);
        let cc = random_density(&mut rng, 4);
        let left = a.tensor(&b).tensor(&cc);
        let right = a.tensor(&b.tensor(&cc));
        prop_assert!(max_abs_diff(left.matrix(), right.matrix()) < 1e-14);
    }

    #[test]
    fn fidelity_is_affine_under_mixing(seed in 0u64..1000, lambda in 0.0f64..=1.0) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rho = random_density(&mut rng, 4);
        let sigma = random_density(&mut rng, 4);
        let psi = bell_phi_minus();
        let mixed = rho.mix(&sigma, lambda).unwrap();
        let lhs = fidelity(&mixed, &psi).unwrap();
        let rhs = lambda * fidelity(&rho, &psi).unwrap() + (1.0 - lambda) * fidelity(&sigma, &psi).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-13);
    }

    #[test]
    fn constructors_satisfy_invariants(seed in 0u64..500, dim in prop::sample::select(vec![2usize, 4, 8, 16])) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rho = random_density(&mut rng, dim);
        prop_assert!(rho.eigenvalues()[0] >= -EIGEN_TOL);
        prop_assert!((rho.matrix().trace().re - 1.0).abs() < TRACE_TOL);
        prop_assert!(rho.as_operator().is_hermitian(HERMITIAN_TOL));
        prop_assert!(DensityMatrix::new(rho.matrix().clone()).is_ok());
    }
}
