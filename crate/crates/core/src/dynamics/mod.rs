//! System–ancilla dynamics under time-local ancilla noise.
//!
//! The two qubits interact through `H = g(X⊗X + Y⊗Y)`. Noise acts on the
//! ancilla only, through either amplitude damping (`I ⊗ σ₋`) or RTN
//! dephasing (`I ⊗ Z`), each carrying a scalar time-dependent rate.

mod evolve;
mod rates;
mod state;

pub use evolve::{
    build_xy_hamiltonian, evolve, evolve_observed, lindblad_rhs, Generator, PhysicalityStats, TimeGrid,
    Trajectory, TrajectoryMeta,
};
pub use rates::{
    amplitude_damping_g, amplitude_damping_g_dot, clamp_rate, damping_probability, gamma_ad, gamma_ad_raw,
    gamma_rtn, gamma_rtn_raw, rtn_lambda, rtn_lambda_dot, AdParams, RateSample, Regime, RtnParams,
};
pub use state::{
    check_state, initial_state, min_eigenvalue, DensityMatrix, InitialState, StateCheck, HERMITICITY_TOL,
    POSITIVITY_TOL, TRACE_TOL,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::LinalgError;

pub const DEFAULT_RATE_CLAMP: f64 = 1e3;
pub const DEFAULT_COUPLING: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("state left the physical set at t = {t}: {reason}")]
    Unphysical { t: f64, reason: String },
}

/// Which noise process acts on the ancilla.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum NoiseKind {
    AmplitudeDamping(AdParams),
    RtnDephasing(RtnParams),
    NoiseFree,
}

impl NoiseKind {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseKind::AmplitudeDamping(_) => "amplitude_damping",
            NoiseKind::RtnDephasing(_) => "rtn_dephasing",
            NoiseKind::NoiseFree => "noise_free",
        }
    }
}

/// How the signed channel rate multiplies the dissipator.
///
/// `Modulus` is the collapse operator `√rate · A` taken literally with a
/// complex square root: `LρL† − ½{L†L, ρ}` then carries `|rate|`. `Signed`
/// multiplies the dissipator by the rate itself, admitting negative
/// coefficients; with the XY coupling active this does not preserve
/// positivity once the rate turns negative, so it is opt-in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMode {
    #[default]
    Modulus,
    Signed,
}

fn default_clamp() -> f64 {
    DEFAULT_RATE_CLAMP
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub kind: NoiseKind,
    #[serde(default = "default_clamp")]
    pub rate_clamp: f64,
    #[serde(default)]
    pub rate_mode: RateMode,
}

impl ChannelSpec {
    pub fn new(kind: NoiseKind) -> Self {
        Self { kind, rate_clamp: DEFAULT_RATE_CLAMP, rate_mode: RateMode::default() }
    }

    pub fn amplitude_damping(b: f64, lambda: f64) -> Self {
        Self::new(NoiseKind::AmplitudeDamping(AdParams { b, lambda }))
    }

    pub fn rtn_dephasing(v: f64, kappa: f64) -> Self {
        Self::new(NoiseKind::RtnDephasing(RtnParams { v, kappa }))
    }

    pub fn noise_free() -> Self {
        Self::new(NoiseKind::NoiseFree)
    }

    pub fn with_rate_mode(mut self, mode: RateMode) -> Self {
        self.rate_mode = mode;
        self
    }

    pub fn with_rate_clamp(mut self, clamp: f64) -> Self {
        self.rate_clamp = clamp;
        self
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.rate_clamp.is_finite() && self.rate_clamp > 0.0) {
            return Err(DynamicsError::InvalidParameter(format!(
                "rate_clamp must be finite and > 0, got {}",
                self.rate_clamp
            )));
        }
        match &self.kind {
            NoiseKind::AmplitudeDamping(p) => p.validate(),
            NoiseKind::RtnDephasing(p) => p.validate(),
            NoiseKind::NoiseFree => Ok(()),
        }
    }

    pub fn regime(&self) -> Regime {
        match &self.kind {
            NoiseKind::AmplitudeDamping(p) => p.regime(),
            NoiseKind::RtnDephasing(p) => p.regime(),
            NoiseKind::NoiseFree => Regime::NoiseFree,
        }
    }

    /// Signed, clamped channel rate at time `t` (zero when noise-free).
    pub fn rate(&self, t: f64) -> RateSample {
        match &self.kind {
            NoiseKind::AmplitudeDamping(p) => gamma_ad(t, p, self.rate_clamp),
            NoiseKind::RtnDephasing(p) => gamma_rtn(t, p, self.rate_clamp),
            NoiseKind::NoiseFree => RateSample { value: 0.0, clamped: false },
        }
    }

    /// Coefficient placed in front of the dissipator at time `t`.
    pub fn dissipator_rate(&self, t: f64) -> RateSample {
        let r = self.rate(t);
        match self.rate_mode {
            RateMode::Signed => r,
            RateMode::Modulus => RateSample { value: r.value.abs(), clamped: r.clamped },
        }
    }
}
