//! Time-dependent rates of the two ancilla noise channels.
//!
//! Both rates are evaluated with complex intermediates so that the
//! overdamped and underdamped regimes share one expression: the square root
//! under each frequency is taken on the principal branch, turning
//! `cosh`/`sinh` into `cos`/`sin` (and back) without branching.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::DynamicsError;

type C64 = Complex64;

/// Memory regime implied by a parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Markovian,
    NonMarkovian,
    NoiseFree,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Markovian => "markovian",
            Regime::NonMarkovian => "non-markovian",
            Regime::NoiseFree => "noise-free",
        }
    }
}

/// Lorentzian-reservoir amplitude damping: spectral width `b`, coupling `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdParams {
    pub b: f64,
    pub lambda: f64,
}

/// Random telegraph noise: amplitude `v`, correlation decay rate `kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RtnParams {
    pub v: f64,
    pub kappa: f64,
}

fn positive(name: &str, x: f64) -> Result<(), DynamicsError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(DynamicsError::InvalidParameter(format!("{name} must be finite and > 0, got {x}")))
    }
}

impl AdParams {
    pub fn new(b: f64, lambda: f64) -> Result<Self, DynamicsError> {
        let p = Self { b, lambda };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        positive("b", self.b)?;
        positive("lambda", self.lambda)
    }

    /// `d = sqrt(b² − 2λ)`, imaginary when the coupling dominates.
    pub fn d(&self) -> C64 {
        C64::new(self.b * self.b - 2.0 * self.lambda, 0.0).sqrt()
    }

    pub fn regime(&self) -> Regime {
        if self.b * self.b < 2.0 * self.lambda {
            Regime::NonMarkovian
        } else {
            Regime::Markovian
        }
    }

    /// Reservoir correlation time `1/b`.
    pub fn correlation_time(&self) -> f64 {
        1.0 / self.b
    }
}

impl RtnParams {
    pub fn new(v: f64, kappa: f64) -> Result<Self, DynamicsError> {
        let p = Self { v, kappa };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        positive("v", self.v)?;
        positive("kappa", self.kappa)
    }

    pub fn ratio(&self) -> f64 {
        self.v / self.kappa
    }

    /// `χ = sqrt((2v/κ)² − 1)`, imaginary below the oscillation threshold.
    pub fn chi(&self) -> C64 {
        let r = 2.0 * self.v / self.kappa;
        C64::new(r * r - 1.0, 0.0).sqrt()
    }

    pub fn regime(&self) -> Regime {
        if self.ratio() > 0.5 {
            Regime::NonMarkovian
        } else {
            Regime::Markovian
        }
    }

    pub fn correlation_time(&self) -> f64 {
        1.0 / self.kappa
    }

    /// Oscillation frequency `χκ = sqrt(4v² − κ²)`.
    fn omega(&self) -> C64 {
        C64::new(4.0 * self.v * self.v - self.kappa * self.kappa, 0.0).sqrt()
    }
}

// Below this magnitude the entire functions sinh(z)/z and sin(z)/z switch to
// their Taylor series; the truncation error is below 1e-22.
const SERIES_RADIUS: f64 = 1e-3;

/// `sinh(z)/z`, entire.
fn sinhc(z: C64) -> C64 {
    if z.norm() < SERIES_RADIUS {
        let z2 = z * z;
        C64::new(1.0, 0.0) + z2 / 6.0 + z2 * z2 / 120.0 + z2 * z2 * z2 / 5040.0
    } else {
        z.sinh() / z
    }
}

/// `sin(z)/z`, entire.
fn sinc(z: C64) -> C64 {
    if z.norm() < SERIES_RADIUS {
        let z2 = z * z;
        C64::new(1.0, 0.0) - z2 / 6.0 + z2 * z2 / 120.0 - z2 * z2 * z2 / 5040.0
    } else {
        z.sin() / z
    }
}

/// `G(t) = e^{−bt/2}[cosh(dt/2) + (b/d) sinh(dt/2)]`, written as
/// `e^{−bt/2}[cosh(dt/2) + (bt/2)·sinhc(dt/2)]` so the `d → 0` limit
/// `e^{−bt/2}(1 + bt/2)` needs no special case.
pub fn amplitude_damping_g(t: f64, p: &AdParams) -> C64 {
    let half = p.d() * (t / 2.0);
    (-p.b * t / 2.0).exp() * (half.cosh() + sinhc(half) * (p.b * t / 2.0))
}

/// Closed-form `dG/dt = −(λ/d) e^{−bt/2} sinh(dt/2)`.
pub fn amplitude_damping_g_dot(t: f64, p: &AdParams) -> C64 {
    let half = p.d() * (t / 2.0);
    -(p.lambda * t / 2.0) * (-p.b * t / 2.0).exp() * sinhc(half)
}

/// Damping probability `1 − |G(t)|²`. Non-negative whenever `|G| ≤ 1`, so it
/// is reported next to the signed rate but never drives the evolution.
pub fn damping_probability(t: f64, p: &AdParams) -> f64 {
    1.0 - amplitude_damping_g(t, p).norm_sqr()
}

/// Unclamped time-local decay rate `−2 Re[Ġ/G]`. Diverges at zeros of `G`.
pub fn gamma_ad_raw(t: f64, p: &AdParams) -> f64 {
    let half = p.d() * (t / 2.0);
    let sh = sinhc(half);
    // The common e^{−bt/2} factor cancels in the ratio.
    let g = half.cosh() + sh * (p.b * t / 2.0);
    let g_dot = -sh * (p.lambda * t / 2.0);
    -2.0 * (g_dot / g).re
}

/// RTN decoherence function `Λ(t) = e^{−κt}[cos(χκt) + sin(χκt)/χ]`,
/// evaluated as `e^{−κt}[cos(ωt) + κt·sinc(ωt)]` with `ω = χκ`.
pub fn rtn_lambda(t: f64, p: &RtnParams) -> f64 {
    let wt = p.omega() * t;
    ((-p.kappa * t).exp() * (wt.cos() + sinc(wt) * (p.kappa * t))).re
}

/// Closed-form `dΛ/dt = −4v² t e^{−κt} sinc(ωt)`.
pub fn rtn_lambda_dot(t: f64, p: &RtnParams) -> f64 {
    let wt = p.omega() * t;
    (-4.0 * p.v * p.v * t * (-p.kappa * t).exp() * sinc(wt)).re
}

/// Unclamped dephasing rate `−Λ̇/(2Λ)`. Diverges at zeros of `Λ`.
pub fn gamma_rtn_raw(t: f64, p: &RtnParams) -> f64 {
    let wt = p.omega() * t;
    let s = sinc(wt);
    let bracket = wt.cos() + s * (p.kappa * t);
    (s * (2.0 * p.v * p.v * t) / bracket).re
}

/// A rate after clamping to `[−clamp, clamp]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSample {
    pub value: f64,
    pub clamped: bool,
}

pub fn clamp_rate(raw: f64, clamp: f64) -> RateSample {
    if raw.is_nan() {
        // 0/0 only occurs exactly on a zero of the envelope.
        return RateSample { value: clamp, clamped: true };
    }
    if raw.abs() > clamp {
        RateSample { value: clamp.copysign(raw), clamped: true }
    } else {
        RateSample { value: raw, clamped: false }
    }
}

pub fn gamma_ad(t: f64, p: &AdParams, clamp: f64) -> RateSample {
    clamp_rate(gamma_ad_raw(t, p), clamp)
}

pub fn gamma_rtn(t: f64, p: &RtnParams, clamp: f64) -> RateSample {
    clamp_rate(gamma_rtn_raw(t, p), clamp)
}
