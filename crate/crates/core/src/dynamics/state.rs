// Negated comparisons below are deliberate: NaN must fail every check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use nalgebra::{Matrix4, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::DynamicsError;
use crate::linalg::{CMatrix, C64, ONE, ZERO};

pub const HERMITICITY_TOL: f64 = 1e-9;
pub const TRACE_TOL: f64 = 1e-9;
pub const POSITIVITY_TOL: f64 = 1e-6;

/// Two-qubit (system ⊗ ancilla) density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: CMatrix,
}

/// Summary of how far a matrix sits from a valid state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateCheck {
    pub hermiticity_error: f64,
    pub trace_error: f64,
    pub min_eigenvalue: f64,
}

impl StateCheck {
    pub fn violation(&self) -> Option<String> {
        if !(self.hermiticity_error <= HERMITICITY_TOL) {
            Some(format!("hermiticity error {:e}", self.hermiticity_error))
        } else if !(self.trace_error <= TRACE_TOL) {
            Some(format!("trace error {:e}", self.trace_error))
        } else if !(self.min_eigenvalue >= -POSITIVITY_TOL) {
            Some(format!("minimum eigenvalue {:e}", self.min_eigenvalue))
        } else {
            None
        }
    }
}

/// Smallest eigenvalue of the Hermitian part of a 4×4 matrix.
pub fn min_eigenvalue(mat: &CMatrix) -> f64 {
    assert_eq!(mat.dim(), 4, "positivity check is sized for two qubits");
    let m = Matrix4::from_fn(|i, j| (mat.get(i, j) + mat.get(j, i).conj()) * 0.5);
    SymmetricEigen::new(m).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn check_state(mat: &CMatrix) -> StateCheck {
    StateCheck {
        hermiticity_error: mat.hermiticity_error(),
        trace_error: (mat.trace() - ONE).norm(),
        min_eigenvalue: min_eigenvalue(mat),
    }
}

impl DensityMatrix {
    pub fn new(mat: CMatrix) -> Result<Self, DynamicsError> {
        if mat.dim() != 4 {
            return Err(DynamicsError::InvalidState(format!("expected dim 4, got {}", mat.dim())));
        }
        if let Some(why) = check_state(&mat).violation() {
            return Err(DynamicsError::InvalidState(why));
        }
        Ok(Self { mat })
    }

    pub(crate) fn new_unchecked(mat: CMatrix) -> Self {
        Self { mat }
    }

    /// Pure state `|ψ⟩⟨ψ|` from an amplitude vector (normalized here).
    pub fn from_pure(amplitudes: &[C64; 4]) -> Result<Self, DynamicsError> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(DynamicsError::InvalidState("zero state vector".into()));
        }
        let psi: Vec<C64> = amplitudes.iter().map(|a| a / norm).collect();
        Self::new(CMatrix::outer(&psi, &psi)?)
    }

    pub fn maximally_mixed() -> Self {
        Self { mat: CMatrix::identity(4).scale(C64::new(0.25, 0.0)) }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn purity(&self) -> f64 {
        self.mat.matmul(&self.mat).expect("same dimension").trace().re
    }

    pub fn check(&self) -> StateCheck {
        check_state(&self.mat)
    }
}

/// Named preparations. `Custom` tags states supplied directly by the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    /// `|0⟩_S ⊗ |0⟩_A`
    ExcitedExcited,
    /// `|+⟩_S ⊗ |0⟩_A`
    PlusExcited,
    /// `|0⟩_S ⊗ |1⟩_A`, the single-excitation state that Rabi-oscillates
    /// under the XY coupling.
    ExcitedGround,
    /// `I/4`
    MaximallyMixed,
    Custom,
}

pub fn initial_state(tag: InitialState) -> Result<DensityMatrix, DynamicsError> {
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    match tag {
        InitialState::ExcitedExcited => DensityMatrix::from_pure(&[ONE, ZERO, ZERO, ZERO]),
        InitialState::PlusExcited => DensityMatrix::from_pure(&[h, ZERO, h, ZERO]),
        InitialState::ExcitedGround => DensityMatrix::from_pure(&[ZERO, ONE, ZERO, ZERO]),
        InitialState::MaximallyMixed => Ok(DensityMatrix::maximally_mixed()),
        InitialState::Custom => {
            Err(DynamicsError::InvalidState("custom states must be supplied as a matrix".into()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::expectation;

    fn zs() -> CMatrix {
        CMatrix::pauli_z().kron(&CMatrix::identity(2))
    }

    fn za() -> CMatrix {
        CMatrix::identity(2).kron(&CMatrix::pauli_z())
    }

    #[test]
    fn named_states() {
        let ee = initial_state(InitialState::ExcitedExcited).unwrap();
        assert_eq!(expectation(&zs(), ee.matrix()).unwrap().value, 1.0);
        assert_eq!(expectation(&za(), ee.matrix()).unwrap().value, 1.0);

        let pe = initial_state(InitialState::PlusExcited).unwrap();
        assert!(expectation(&zs(), pe.matrix()).unwrap().value.abs() < 1e-15);
        assert!((expectation(&za(), pe.matrix()).unwrap().value - 1.0).abs() < 1e-15);

        for s in [ee, pe] {
            assert!((s.matrix().trace().re - 1.0).abs() < 1e-15);
            assert!((s.purity() - 1.0).abs() < 1e-15);
        }
        assert!(initial_state(InitialState::Custom).is_err());
    }

    #[test]
    fn min_eigenvalue_of_known_spectra() {
        let m = CMatrix::diag(&[C64::new(0.7, 0.0), C64::new(0.4, 0.0), C64::new(-0.1, 0.0), ZERO]);
        assert!((min_eigenvalue(&m) + 0.1).abs() < 1e-14);
        assert!((min_eigenvalue(DensityMatrix::maximally_mixed().matrix()) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn rejects_invalid_matrices() {
        let neg = CMatrix::diag(&[C64::new(1.2, 0.0), C64::new(-0.2, 0.0), ZERO, ZERO]);
        assert!(DensityMatrix::new(neg).is_err());
        assert!(DensityMatrix::new(CMatrix::identity(4)).is_err());
        assert!(DensityMatrix::new(CMatrix::identity(2)).is_err());
        let mut skew = DensityMatrix::maximally_mixed().into_matrix();
        skew.set(0, 1, C64::new(0.0, 0.1));
        assert!(DensityMatrix::new(skew).is_err());
    }
}
