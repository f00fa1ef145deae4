use serde::{Deserialize, Serialize};

use super::state::{check_state, DensityMatrix, InitialState};
use super::{ChannelSpec, DynamicsError, NoiseKind, Regime};
use crate::linalg::{expectation, CMatrix, C64, I};

pub const DEFAULT_MAX_DT: f64 = 1e-3;

/// `g(X⊗X + Y⊗Y)`, system first.
pub fn build_xy_hamiltonian(g: f64) -> CMatrix {
    let xx = CMatrix::pauli_x().kron(&CMatrix::pauli_x());
    let yy = CMatrix::pauli_y().kron(&CMatrix::pauli_y());
    xx.add(&yy).expect("4x4 operands").scale(C64::new(g, 0.0))
}

fn default_max_dt() -> f64 {
    DEFAULT_MAX_DT
}

/// Uniform record grid `t_k = k·t_end/n_steps`, `k = 0..=n_steps`.
///
/// Each record interval is integrated with the smallest number of equal RK4
/// substeps whose length does not exceed `max_dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t_end: f64,
    pub n_steps: usize,
    #[serde(default = "default_max_dt")]
    pub max_dt: f64,
}

impl TimeGrid {
    pub fn new(t_end: f64, n_steps: usize) -> Self {
        Self { t_end, n_steps, max_dt: DEFAULT_MAX_DT }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(DynamicsError::InvalidParameter(format!("t_end must be > 0, got {}", self.t_end)));
        }
        if self.n_steps == 0 {
            return Err(DynamicsError::InvalidParameter("n_steps must be >= 1".into()));
        }
        if !(self.max_dt.is_finite() && self.max_dt > 0.0) {
            return Err(DynamicsError::InvalidParameter(format!("max_dt must be > 0, got {}", self.max_dt)));
        }
        Ok(())
    }

    pub fn record_dt(&self) -> f64 {
        self.t_end / self.n_steps as f64
    }

    pub fn substeps(&self) -> usize {
        let ratio = self.record_dt() / self.max_dt;
        // Tolerate round-off when record_dt is an exact multiple of max_dt.
        ((ratio - 1e-9).ceil() as usize).max(1)
    }

    pub fn integration_dt(&self) -> f64 {
        self.record_dt() / self.substeps() as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.record_dt()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.time(k)).collect()
    }
}

/// Precomputed operators of the master equation.
#[derive(Debug, Clone)]
pub struct Generator {
    hamiltonian: CMatrix,
    jump: Option<CMatrix>,
    jump_dag: Option<CMatrix>,
    jump_dag_jump: Option<CMatrix>,
    channel: ChannelSpec,
}

impl Generator {
    pub fn new(hamiltonian: CMatrix, channel: ChannelSpec) -> Result<Self, DynamicsError> {
        if hamiltonian.dim() != 4 {
            return Err(DynamicsError::InvalidParameter("hamiltonian must be 4x4".into()));
        }
        let id = CMatrix::identity(2);
        let jump = match channel.kind {
            NoiseKind::AmplitudeDamping(_) => Some(id.kron(&CMatrix::sigma_minus())),
            NoiseKind::RtnDephasing(_) => Some(id.kron(&CMatrix::pauli_z())),
            NoiseKind::NoiseFree => None,
        };
        let jump_dag = jump.as_ref().map(CMatrix::dagger);
        let jump_dag_jump = match (&jump, &jump_dag) {
            (Some(a), Some(ad)) => Some(ad.matmul(a)?),
            _ => None,
        };
        Ok(Self { hamiltonian, jump, jump_dag, jump_dag_jump, channel })
    }

    pub fn channel(&self) -> &ChannelSpec {
        &self.channel
    }

    /// Rate-free dissipator `AρA† − ½{A†A, ρ}`; for `A = I⊗Z` this reduces
    /// to `AρA − ρ`.
    pub fn dissipator(&self, rho: &CMatrix) -> Result<CMatrix, DynamicsError> {
        match (&self.jump, &self.jump_dag, &self.jump_dag_jump) {
            (Some(a), Some(ad), Some(ada)) => {
                let mut out = a.matmul(rho)?.matmul(ad)?;
                out.axpy(C64::new(-0.5, 0.0), &ada.anticommutator(rho)?)?;
                Ok(out)
            }
            _ => Ok(CMatrix::zeros(rho.dim())),
        }
    }

    /// `−i[H, ρ] + rate · D[ρ]`
    pub fn rhs_with_rate(&self, rho: &CMatrix, rate: f64) -> Result<CMatrix, DynamicsError> {
        let mut out = self.hamiltonian.commutator(rho)?.scale(-I);
        if rate != 0.0 {
            out.axpy(C64::new(rate, 0.0), &self.dissipator(rho)?)?;
        }
        Ok(out)
    }

    pub fn rhs(&self, rho: &CMatrix, t: f64) -> Result<CMatrix, DynamicsError> {
        self.rhs_with_rate(rho, self.channel.dissipator_rate(t).value)
    }
}

/// `dρ/dt` of the time-local master equation at time `t`.
pub fn lindblad_rhs(
    rho: &DensityMatrix,
    t: f64,
    hamiltonian: &CMatrix,
    channel: &ChannelSpec,
) -> Result<CMatrix, DynamicsError> {
    Generator::new(hamiltonian.clone(), *channel)?.rhs(rho.matrix(), t)
}

/// Worst-case physicality figures seen during an evolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalityStats {
    /// Max `|Tr ρ − 1|` at recorded points.
    pub max_trace_error: f64,
    /// Max entry of `|ρ − ρ†|` at recorded points.
    pub max_hermiticity_error: f64,
    /// Min eigenvalue over recorded points.
    pub min_eigenvalue: f64,
    /// Max trace drift of a single RK4 step before renormalization.
    pub max_step_trace_drift: f64,
    /// Max anti-Hermitian residue of a single RK4 step before symmetrization.
    pub max_step_hermiticity_drift: f64,
}

impl Default for PhysicalityStats {
    fn default() -> Self {
        Self {
            max_trace_error: 0.0,
            max_hermiticity_error: 0.0,
            min_eigenvalue: f64::INFINITY,
            max_step_trace_drift: 0.0,
            max_step_hermiticity_drift: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryMeta {
    pub channel: ChannelSpec,
    pub regime: Regime,
    pub g: f64,
    /// RK4 step length.
    pub dt: f64,
    pub t_end: f64,
    pub n_steps: usize,
    pub clamp_events: u64,
    pub initial_state: InitialState,
    pub physicality: PhysicalityStats,
}

/// `⟨Z_S⟩` and `⟨Z_A⟩` on the record grid, including `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub z_s: Vec<f64>,
    pub z_a: Vec<f64>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

pub fn evolve(
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    g: f64,
    channel: &ChannelSpec,
    tag: InitialState,
) -> Result<Trajectory, DynamicsError> {
    evolve_observed(rho0, grid, g, channel, tag, |_, _, _| {})
}

/// Fixed-step RK4 integration, calling `observe(k, t_k, ρ(t_k))` at every
/// record point.
///
/// After each step ρ is re-Hermitized and, if its trace drifted by more
/// than `1e-12`, renormalized. Every recorded state is checked against the
/// density-matrix tolerances; the first violation aborts the run.
pub fn evolve_observed<F>(
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    g: f64,
    channel: &ChannelSpec,
    tag: InitialState,
    mut observe: F,
) -> Result<Trajectory, DynamicsError>
where
    F: FnMut(usize, f64, &DensityMatrix),
{
    grid.validate()?;
    channel.validate()?;
    if !g.is_finite() {
        return Err(DynamicsError::InvalidParameter(format!("g must be finite, got {g}")));
    }
    let gen = Generator::new(build_xy_hamiltonian(g), *channel)?;
    let z_sys = CMatrix::pauli_z().kron(&CMatrix::identity(2));
    let z_anc = CMatrix::identity(2).kron(&CMatrix::pauli_z());

    let substeps = grid.substeps();
    let dt = grid.integration_dt();
    let n = grid.n_steps;

    let mut times = Vec::with_capacity(n + 1);
    let mut z_s = Vec::with_capacity(n + 1);
    let mut z_a = Vec::with_capacity(n + 1);
    let mut stats = PhysicalityStats::default();
    let mut clamp_events = 0u64;

    let mut rho = rho0.matrix().clone();
    let mut record = |k: usize, rho: &CMatrix, stats: &mut PhysicalityStats| -> Result<(), DynamicsError> {
        let t = grid.time(k);
        let check = check_state(rho);
        stats.max_trace_error = stats.max_trace_error.max(check.trace_error);
        stats.max_hermiticity_error = stats.max_hermiticity_error.max(check.hermiticity_error);
        stats.min_eigenvalue = stats.min_eigenvalue.min(check.min_eigenvalue);
        if let Some(reason) = check.violation() {
            return Err(DynamicsError::Unphysical { t, reason });
        }
        let state = DensityMatrix::new_unchecked(rho.clone());
        observe(k, t, &state);
        times.push(t);
        z_s.push(expectation(&z_sys, rho)?.value);
        z_a.push(expectation(&z_anc, rho)?.value);
        Ok(())
    };
    record(0, &rho, &mut stats)?;

    let half = C64::new(dt / 2.0, 0.0);
    let full = C64::new(dt, 0.0);
    let sixth = C64::new(dt / 6.0, 0.0);
    let two = C64::new(2.0, 0.0);
    for k in 1..=n {
        for s in 0..substeps {
            let t0 = ((k - 1) * substeps + s) as f64 * dt;
            let rates = [
                channel.dissipator_rate(t0),
                channel.dissipator_rate(t0 + dt / 2.0),
                channel.dissipator_rate(t0 + dt),
            ];
            clamp_events += rates.iter().filter(|r| r.clamped).count() as u64;

            let k1 = gen.rhs_with_rate(&rho, rates[0].value)?;
            let mut y = rho.clone();
            y.axpy(half, &k1)?;
            let k2 = gen.rhs_with_rate(&y, rates[1].value)?;
            let mut y = rho.clone();
            y.axpy(half, &k2)?;
            let k3 = gen.rhs_with_rate(&y, rates[1].value)?;
            let mut y = rho.clone();
            y.axpy(full, &k3)?;
            let k4 = gen.rhs_with_rate(&y, rates[2].value)?;

            rho.axpy(sixth, &k1)?;
            rho.axpy(sixth * two, &k2)?;
            rho.axpy(sixth * two, &k3)?;
            rho.axpy(sixth, &k4)?;

            stats.max_step_hermiticity_drift = stats.max_step_hermiticity_drift.max(rho.hermiticity_error());
            rho = rho.add(&rho.dagger())?.scale(C64::new(0.5, 0.0));
            let tr = rho.trace().re;
            let drift = (tr - 1.0).abs();
            stats.max_step_trace_drift = stats.max_step_trace_drift.max(drift);
            if !tr.is_finite() {
                return Err(DynamicsError::Unphysical { t: t0 + dt, reason: "non-finite state".into() });
            }
            if drift > 1e-12 {
                rho = rho.scale(C64::new(1.0 / tr, 0.0));
            }
        }
        record(k, &rho, &mut stats)?;
    }

    Ok(Trajectory {
        times,
        z_s,
        z_a,
        meta: TrajectoryMeta {
            channel: *channel,
            regime: channel.regime(),
            g,
            dt,
            t_end: grid.t_end,
            n_steps: n,
            clamp_events,
            initial_state: tag,
            physicality: stats,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{initial_state, RateMode};
    use crate::linalg::ONE;

    #[test]
    fn hamiltonian_entries() {
        assert_eq!(build_xy_hamiltonian(0.0), CMatrix::zeros(4));
        let h = build_xy_hamiltonian(1.0);
        for i in 0..4 {
            for j in 0..4 {
                let expect = if (i, j) == (1, 2) || (i, j) == (2, 1) { 2.0 } else { 0.0 };
                assert_eq!(h.get(i, j), C64::new(expect, 0.0));
            }
        }
        assert_eq!(h.dagger(), h);
        let h3 = build_xy_hamiltonian(0.5);
        assert_eq!(h3.get(1, 2), ONE);
    }

    #[test]
    fn grid_bookkeeping() {
        let g = TimeGrid::new(5.0, 5000);
        assert_eq!(g.substeps(), 1);
        assert!((g.integration_dt() - 1e-3).abs() < 1e-15);
        assert_eq!(g.times().len(), 5001);
        let coarse = TimeGrid::new(10.0, 1004);
        assert_eq!(coarse.substeps(), 10);
        assert!(coarse.integration_dt() <= 1e-3);
        assert!(TimeGrid::new(0.0, 10).validate().is_err());
        assert!(TimeGrid::new(1.0, 0).validate().is_err());
    }

    #[test]
    fn dark_state_is_stationary_without_noise() {
        let rho = initial_state(InitialState::ExcitedExcited).unwrap();
        let d = lindblad_rhs(&rho, 0.3, &build_xy_hamiltonian(1.0), &ChannelSpec::noise_free()).unwrap();
        assert_eq!(d, CMatrix::zeros(4));
    }

    #[test]
    fn rtn_dissipator_fixes_maximally_mixed_state() {
        let gen = Generator::new(build_xy_hamiltonian(1.0), ChannelSpec::rtn_dephasing(1.0, 4.0)).unwrap();
        let mixed = DensityMatrix::maximally_mixed();
        assert_eq!(gen.dissipator(mixed.matrix()).unwrap(), CMatrix::zeros(4));
        assert!(gen.rhs(mixed.matrix(), 1.3).unwrap().max_abs_diff(&CMatrix::zeros(4)).unwrap() < 1e-15);
    }

    #[test]
    fn ad_dissipator_moves_ancilla_population_down() {
        let gen =
            Generator::new(build_xy_hamiltonian(0.0), ChannelSpec::amplitude_damping(5.0, 1.0)).unwrap();
        let rho = initial_state(InitialState::ExcitedExcited).unwrap();
        let d = gen.dissipator(rho.matrix()).unwrap();
        // Hand evaluation: AρA† = |01⟩⟨01|, {A†A, ρ} = 2|00⟩⟨00|.
        let mut expect = CMatrix::zeros(4);
        expect.set(0, 0, -ONE);
        expect.set(1, 1, ONE);
        assert_eq!(d, expect);
        assert_eq!(gen.rhs_with_rate(rho.matrix(), 1.0).unwrap(), expect);
    }

    #[test]
    fn rabi_oscillation_matches_closed_form() {
        let rho = initial_state(InitialState::ExcitedGround).unwrap();
        let grid = TimeGrid::new(5.0, 5000);
        let traj = evolve(&rho, &grid, 1.0, &ChannelSpec::noise_free(), InitialState::ExcitedGround).unwrap();
        let worst =
            traj.times.iter().zip(&traj.z_s).map(|(t, z)| (z - (4.0 * t).cos()).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-6, "max deviation {worst:e}");
        assert_eq!(traj.meta.clamp_events, 0);
    }

    #[test]
    fn dark_state_trajectory_is_flat() {
        let rho = initial_state(InitialState::ExcitedExcited).unwrap();
        let traj = evolve(
            &rho,
            &TimeGrid::new(2.0, 200),
            1.0,
            &ChannelSpec::noise_free(),
            InitialState::ExcitedExcited,
        )
        .unwrap();
        assert!(traj.z_s.iter().all(|&z| (z - 1.0).abs() < 1e-14));
    }

    #[test]
    fn markovian_damping_relaxes_monotonically() {
        let rho = initial_state(InitialState::ExcitedExcited).unwrap();
        let traj = evolve(
            &rho,
            &TimeGrid::new(10.0, 1004),
            1.0,
            &ChannelSpec::amplitude_damping(5.0, 1.0),
            InitialState::ExcitedExcited,
        )
        .unwrap();
        let max_up = traj.z_s.windows(2).map(|w| w[1] - w[0]).fold(f64::MIN, f64::max);
        assert!(max_up <= 0.015, "largest upward step {max_up}");
        assert!(*traj.z_s.last().unwrap() < traj.z_s[0]);
        assert!(*traj.z_s.last().unwrap() < 0.0);
    }

    #[test]
    fn signed_negative_rates_leave_the_physical_set() {
        let rho = initial_state(InitialState::PlusExcited).unwrap();
        let chan = ChannelSpec::rtn_dephasing(1.0, 1.0 / 7.0).with_rate_mode(RateMode::Signed);
        let err = evolve(&rho, &TimeGrid::new(5.0, 500), 1.0, &chan, InitialState::PlusExcited).unwrap_err();
        assert!(matches!(err, DynamicsError::Unphysical { .. }), "{err}");
    }

    #[test]
    fn observer_sees_every_record() {
        let rho = DensityMatrix::maximally_mixed();
        let mut seen = Vec::new();
        let traj = evolve_observed(
            &rho,
            &TimeGrid::new(1.0, 10),
            1.0,
            &ChannelSpec::rtn_dephasing(1.0, 1.0 / 7.0),
            InitialState::MaximallyMixed,
            |k, _, state| {
                seen.push(k);
                let dev = state.matrix().max_abs_diff(DensityMatrix::maximally_mixed().matrix()).unwrap();
                assert!(dev < 1e-12);
            },
        )
        .unwrap();
        assert_eq!(seen, (0..=10).collect::<Vec<_>>());
        assert_eq!(traj.len(), 11);
    }
}
