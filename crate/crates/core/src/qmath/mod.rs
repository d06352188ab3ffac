//! Dense complex Hilbert-space toolkit: kets, operators, density matrices,
//! Kronecker products, partial traces and fidelities.
//!
//! Dimensions in this crate never exceed 16, so everything is dense.

mod targets;

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub use targets::{bell_phi_minus, bell_phi_plus, c3, delta_minus, delta_plus, xi4, xi4_printed, TargetState};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-10;
pub const EIGEN_TOL: f64 = 1e-10;
pub const NORM_TOL: f64 = 1e-12;

/// State vector in the computational basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket(CVector);

impl Ket {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::usage("ket must have positive dimension"));
        }
        Ok(Ket(CVector::from_vec(amplitudes)))
    }

    pub fn from_vector(v: CVector) -> Self {
        Ket(v)
    }

    /// Computational basis vector `|index>` in `dim` dimensions.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::usage(format!("basis index {index} out of range for dim {dim}")));
        }
        let mut v = CVector::zeros(dim);
        v[index] = Complex64::new(1.0, 0.0);
        Ok(Ket(v))
    }

    /// Product basis ket from single-qubit labels, most significant first.
    pub fn qubits(bits: &[u8]) -> Self {
        let mut k = Ket(CVector::from_element(1, Complex64::new(1.0, 0.0)));
        for &b in bits {
            let q = if b == 0 { [1.0, 0.0] } else { [0.0, 1.0] };
            let q = CVector::from_iterator(2, q.iter().map(|&x| Complex64::new(x, 0.0)));
            k = k.tensor(&Ket(q));
        }
        k
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.0
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() < NORM_TOL
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = libm::sqrt(self.norm_sqr());
        if n == 0.0 {
            return Err(Error::usage("cannot normalise the zero vector"));
        }
        Ok(Ket(self.0.unscale(n)))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Ket(self.0.map(|a| a * c))
    }

    pub fn add(&self, other: &Ket) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::usage("ket dimension mismatch"));
        }
        Ok(Ket(&self.0 + &other.0))
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Ket) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::usage("ket dimension mismatch"));
        }
        Ok(self.0.dotc(&other.0))
    }

    pub fn projector(&self) -> Operator {
        Operator(&self.0 * self.0.adjoint())
    }

    pub fn density(&self) -> Result<DensityMatrix> {
        if !self.is_normalized() {
            return Err(Error::usage("density from non-normalised ket"));
        }
        DensityMatrix::new(&self.0 * self.0.adjoint())
    }
}

/// Arbitrary square operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator(CMatrix);

impl Operator {
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::usage("operator must be a non-empty square matrix"));
        }
        Ok(Operator(m))
    }

    pub fn identity(dim: usize) -> Self {
        Operator(CMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    pub fn adjoint(&self) -> Self {
        Operator(self.0.adjoint())
    }

    pub fn hermitized(&self) -> Self {
        Operator((&self.0 + self.0.adjoint()).scale(0.5))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        max_abs_diff(&self.0, &self.0.adjoint()) <= tol
    }

    pub fn is_projector(&self, tol: f64) -> bool {
        self.is_hermitian(tol) && max_abs_diff(&(&self.0 * &self.0), &self.0) <= tol
    }

    /// `Tr[self * other]`.
    pub fn trace_product(&self, other: &Operator) -> Complex64 {
        trace_product(&self.0, &other.0)
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.hermitized().0.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

/// Hermitian, positive semidefinite, unit-trace operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    /// Validates Hermiticity, trace and spectrum before accepting `m`.
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::usage("density matrix must be a non-empty square matrix"));
        }
        let herm = max_abs_diff(&m, &m.adjoint());
        if herm > HERMITIAN_TOL {
            return Err(Error::Numerical(format!("density matrix not Hermitian (deviation {herm:e})")));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::Numerical(format!("density matrix trace {tr} != 1")));
        }
        // Exact Hermitisation so downstream eigen-solvers see a Hermitian input.
        let m = (&m + m.adjoint()).scale(0.5);
        let min = m
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min < -EIGEN_TOL {
            return Err(Error::Numerical(format!("density matrix has eigenvalue {min:e}")));
        }
        Ok(DensityMatrix(m))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix(CMatrix::identity(dim, dim).unscale(dim as f64))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn as_operator(&self) -> Operator {
        Operator(self.0.clone())
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.0.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn purity(&self) -> f64 {
        trace_product(&self.0, &self.0).re
    }

    /// Convex combination `lambda * self + (1 - lambda) * other`.
    pub fn mix(&self, other: &DensityMatrix, lambda: f64) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::usage("density dimension mismatch"));
        }
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::usage("mixing weight outside [0,1]"));
        }
        DensityMatrix::new(self.0.scale(lambda) + other.0.scale(1.0 - lambda))
    }

    /// Expectation value `Tr[rho * op]`.
    pub fn expectation(&self, op: &Operator) -> Result<Complex64> {
        if op.dim() != self.dim() {
            return Err(Error::usage(format!(
                "operator dim {} does not match state dim {}",
                op.dim(),
                self.dim()
            )));
        }
        Ok(trace_product(&self.0, op.matrix()))
    }

    /// Trace distance `1/2 ||self - other||_1`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::usage("density dimension mismatch"));
        }
        Ok(trace_norm_hermitian(&(&self.0 - &other.0)) / 2.0)
    }
}

/// `1/2 ||a - b||_1` for Hermitian `a`, `b` given as raw matrices.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    trace_norm_hermitian(&(a - b)) / 2.0
}

fn trace_norm_hermitian(m: &CMatrix) -> f64 {
    let h = (m + m.adjoint()).scale(0.5);
    h.symmetric_eigen().eigenvalues.iter().map(|x| x.abs()).sum()
}

pub(crate) fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub(crate) fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Kronecker product with the first argument as the most significant index.
pub trait Tensor: Sized {
    fn tensor(&self, other: &Self) -> Self;
}

impl Tensor for Ket {
    fn tensor(&self, other: &Self) -> Self {
        Ket(self.0.kronecker(&other.0))
    }
}

impl Tensor for Operator {
    fn tensor(&self, other: &Self) -> Self {
        Operator(self.0.kronecker(&other.0))
    }
}

impl Tensor for DensityMatrix {
    fn tensor(&self, other: &Self) -> Self {
        DensityMatrix(self.0.kronecker(&other.0))
    }
}

/// Mixed-radix decomposition of a flat index, most significant subsystem first.
fn digits(mut index: usize, dims: &[usize], out: &mut [usize]) {
    for (slot, &d) in out.iter_mut().zip(dims).rev() {
        *slot = index % d;
        index /= d;
    }
}

fn check_dims(dim: usize, subsystem_dims: &[usize]) -> Result<()> {
    if subsystem_dims.contains(&0) {
        return Err(Error::usage("subsystem dimensions must be positive"));
    }
    let prod: usize = subsystem_dims.iter().product();
    if prod != dim {
        return Err(Error::usage(format!(
            "subsystem dims {subsystem_dims:?} multiply to {prod}, state has dim {dim}"
        )));
    }
    Ok(())
}

/// Partial trace of a raw matrix, keeping the listed subsystems in their
/// original order.
pub fn partial_trace_matrix(m: &CMatrix, subsystem_dims: &[usize], keep: &[usize]) -> Result<CMatrix> {
    check_dims(m.nrows(), subsystem_dims)?;
    let n = subsystem_dims.len();
    if let Some(&bad) = keep.iter().find(|&&k| k >= n) {
        return Err(Error::usage(format!("subsystem {bad} out of range for {n} subsystems")));
    }
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    let kept_dims: Vec<usize> = kept.iter().map(|&k| subsystem_dims[k]).collect();
    let out_dim: usize = kept_dims.iter().product();
    let traced: Vec<usize> = (0..n).filter(|k| !kept.contains(k)).collect();

    let mut out = CMatrix::zeros(out_dim, out_dim);
    let dim = m.nrows();
    let mut di = alloc::vec![0usize; n];
    let mut dj = alloc::vec![0usize; n];
    for i in 0..dim {
        digits(i, subsystem_dims, &mut di);
        for j in 0..dim {
            digits(j, subsystem_dims, &mut dj);
            if traced.iter().any(|&t| di[t] != dj[t]) {
                continue;
            }
            let (mut ri, mut rj) = (0usize, 0usize);
            for (&k, &d) in kept.iter().zip(&kept_dims) {
                ri = ri * d + di[k];
                rj = rj * d + dj[k];
            }
            out[(ri, rj)] += m[(i, j)];
        }
    }
    Ok(out)
}

pub fn partial_trace(rho: &DensityMatrix, subsystem_dims: &[usize], keep: &[usize]) -> Result<DensityMatrix> {
    let m = partial_trace_matrix(rho.matrix(), subsystem_dims, keep)?;
    DensityMatrix::new(m)
}

/// Project `subsystem` onto `|outcome>` and discard it. Returns the outcome
/// probability and the normalised post-measurement state on the remaining
/// subsystems.
pub fn condition_on(
    rho: &DensityMatrix,
    subsystem_dims: &[usize],
    subsystem: usize,
    outcome: usize,
) -> Result<(f64, DensityMatrix)> {
    check_dims(rho.dim(), subsystem_dims)?;
    if subsystem >= subsystem_dims.len() || outcome >= subsystem_dims[subsystem] {
        return Err(Error::usage("conditioning subsystem or outcome out of range"));
    }
    let mut proj = CMatrix::identity(1, 1);
    for (k, &d) in subsystem_dims.iter().enumerate() {
        let block = if k == subsystem {
            let mut p = CMatrix::zeros(d, d);
            p[(outcome, outcome)] = Complex64::new(1.0, 0.0);
            p
        } else {
            CMatrix::identity(d, d)
        };
        proj = proj.kronecker(&block);
    }
    let projected = &proj * rho.matrix() * &proj;
    let keep: Vec<usize> = (0..subsystem_dims.len()).filter(|&k| k != subsystem).collect();
    let reduced = partial_trace_matrix(&projected, subsystem_dims, &keep)?;
    let p = reduced.trace().re;
    if p <= 0.0 {
        return Err(Error::usage("conditioning outcome has zero probability"));
    }
    Ok((p, DensityMatrix::new(reduced.unscale(p))?))
}

/// `<target| rho |target>`.
pub fn fidelity(rho: &DensityMatrix, target: &Ket) -> Result<f64> {
    if rho.dim() != target.dim() {
        return Err(Error::usage(format!(
            "target dim {} does not match state dim {}",
            target.dim(),
            rho.dim()
        )));
    }
    if !target.is_normalized() {
        return Err(Error::usage("fidelity target is not normalised"));
    }
    let v = target.amplitudes();
    let f = v.dotc(&(rho.matrix() * v));
    if f.im.abs() > 1e-12 {
        return Err(Error::Numerical(format!("fidelity has imaginary residue {:e}", f.im)));
    }
    Ok(f.re.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests;
