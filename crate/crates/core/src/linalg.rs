//! Dense complex matrices sized for one- and two-qubit operators.
//!
//! Storage is row-major. Basis ordering follows the system-first convention:
//! index 0 is `|0⟩` (excited, `Z = +1`), index 1 is `|1⟩` (ground, `Z = -1`),
//! and two-qubit states are ordered `|00⟩, |01⟩, |10⟩, |11⟩` with the system
//! qubit as the most significant index.

use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("entry count {len} does not equal dim² for dim {dim}")]
    BadShape { dim: usize, len: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn from_vec(dim: usize, data: Vec<C64>) -> Result<Self, LinalgError> {
        if dim == 0 || data.len() != dim * dim {
            return Err(LinalgError::BadShape { dim, len: data.len() });
        }
        Ok(Self { dim, data })
    }

    /// Builds a matrix from real entries, row-major.
    pub fn from_real(dim: usize, data: &[f64]) -> Result<Self, LinalgError> {
        Self::from_vec(dim, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![ZERO; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    pub fn diag(entries: &[C64]) -> Self {
        let mut m = Self::zeros(entries.len());
        for (i, &e) in entries.iter().enumerate() {
            m.data[i * entries.len() + i] = e;
        }
        m
    }

    pub fn pauli_x() -> Self {
        Self { dim: 2, data: vec![ZERO, ONE, ONE, ZERO] }
    }

    pub fn pauli_y() -> Self {
        Self { dim: 2, data: vec![ZERO, -I, I, ZERO] }
    }

    pub fn pauli_z() -> Self {
        Self { dim: 2, data: vec![ONE, ZERO, ZERO, -ONE] }
    }

    /// `σ₋ = |1⟩⟨0|`, lowering the excited state `|0⟩` to the ground state `|1⟩`.
    pub fn sigma_minus() -> Self {
        Self { dim: 2, data: vec![ZERO, ZERO, ONE, ZERO] }
    }

    /// Outer product `|a⟩⟨b|`.
    pub fn outer(a: &[C64], b: &[C64]) -> Result<Self, LinalgError> {
        if a.len() != b.len() {
            return Err(LinalgError::DimensionMismatch { left: a.len(), right: b.len() });
        }
        let n = a.len();
        let mut data = Vec::with_capacity(n * n);
        for ai in a {
            for bj in b {
                data.push(ai * bj.conj());
            }
        }
        Self::from_vec(n, data)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.dim + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: C64) {
        self.data[row * self.dim + col] = value;
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    fn check(&self, other: &Self) -> Result<(), LinalgError> {
        if self.dim != other.dim {
            return Err(LinalgError::DimensionMismatch { left: self.dim, right: other.dim });
        }
        Ok(())
    }

    /// Kronecker product; `self` occupies the most significant index.
    pub fn kron(&self, other: &Self) -> Self {
        let (n, m) = (self.dim, other.dim);
        let dim = n * m;
        let mut out = Self::zeros(dim);
        for i in 0..n {
            for j in 0..n {
                let a = self.get(i, j);
                if a == ZERO {
                    continue;
                }
                for k in 0..m {
                    for l in 0..m {
                        out.data[(i * m + k) * dim + (j * m + l)] = a * other.get(k, l);
                    }
                }
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, LinalgError> {
        self.check(other)?;
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        Ok(out)
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self, LinalgError> {
        self.check(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self { dim: self.dim, data })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, LinalgError> {
        self.check(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self { dim: self.dim, data })
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|a| a * factor).collect() }
    }

    /// `self += factor · other`, in place.
    pub fn axpy(&mut self, factor: C64, other: &Self) -> Result<(), LinalgError> {
        self.check(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += factor * b;
        }
        Ok(())
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    /// `ab − ba`
    pub fn commutator(&self, other: &Self) -> Result<Self, LinalgError> {
        self.matmul(other)?.sub(&other.matmul(self)?)
    }

    /// `ab + ba`
    pub fn anticommutator(&self, other: &Self) -> Result<Self, LinalgError> {
        self.matmul(other)?.add(&other.matmul(self)?)
    }

    /// Largest entry magnitude of `self − self†`.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64, LinalgError> {
        self.check(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }
}

/// Value of `Tr(op·ρ)` together with the magnitude of its imaginary part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expectation {
    pub value: f64,
    pub imag: f64,
}

/// `Re Tr(op·ρ)`. The imaginary residue is kept for diagnostics; for
/// Hermitian `op` and `rho` it stays below `1e-9`.
pub fn expectation(op: &CMatrix, rho: &CMatrix) -> Result<Expectation, LinalgError> {
    op.check(rho)?;
    let n = op.dim;
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..n {
            acc += op.data[i * n + k] * rho.data[k * n + i];
        }
    }
    Ok(Expectation { value: acc.re, imag: acc.im.abs() })
}
