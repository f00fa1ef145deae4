use backflow::dataset::build_windows;
use backflow::dynamics::{evolve, initial_state, ChannelSpec, InitialState, TimeGrid, POSITIVITY_TOL};
use proptest::prelude::*;

fn state() -> impl Strategy<Value = InitialState> {
    prop_oneof![
        Just(InitialState::ExcitedExcited),
        Just(InitialState::PlusExcited),
        Just(InitialState::ExcitedGround),
        Just(InitialState::MaximallyMixed),
    ]
}

fn channel() -> impl Strategy<Value = ChannelSpec> {
    prop_oneof![
        (0.01f64..8.0, 0.1f64..12.0).prop_map(|(b, l)| ChannelSpec::amplitude_damping(b, l)),
        (0.1f64..3.0, 0.05f64..6.0).prop_map(|(v, k)| ChannelSpec::rtn_dephasing(v, k)),
        Just(ChannelSpec::noise_free()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn trajectories_stay_physical(chan in channel(), tag in state(), g in 0.2f64..2.0) {
        let rho = initial_state(tag).unwrap();
        let traj = evolve(&rho, &TimeGrid::new(4.0, 200), g, &chan, tag).unwrap();
        let stats = traj.meta.physicality;
        prop_assert!(stats.min_eigenvalue > -POSITIVITY_TOL);
        prop_assert!(stats.max_trace_error < 1e-9);
        for z in traj.z_s.iter().chain(&traj.z_a) {
            prop_assert!(z.abs() <= 1.0 + 1e-6);
        }
        let ds = build_windows(&traj, 5).unwrap();
        for s in ds.samples() {
            prop_assert!(s.t_index >= 5);
            prop_assert!(s.x.iter().all(|v| v.abs() <= 1.0 + 1e-6));
        }
    }
}

#[test]
fn noise_free_run_has_no_clamp_events() {
    let rho = initial_state(InitialState::PlusExcited).unwrap();
    let traj =
        evolve(&rho, &TimeGrid::new(5.0, 500), 1.0, &ChannelSpec::noise_free(), InitialState::PlusExcited)
            .unwrap();
    assert_eq!(traj.meta.clamp_events, 0);
}

/// Revivals in the preset runs occur only in the early exchange transient;
/// by the second half of the shared grid every trajectory has relaxed.
#[test]
fn preset_revivals_are_confined_to_the_first_half() {
    for (name, cfg) in backflow::pipeline::PairConfig::preset().runs() {
        let rho = initial_state(cfg.initial_state).unwrap();
        let traj = evolve(&rho, &cfg.grid, cfg.g, &cfg.channel, cfg.initial_state).unwrap();
        let half = traj.len() / 2;
        let late = backflow::memory_metric::revival_count(&traj.z_s[half..], 0.015).unwrap();
        assert_eq!(late, 0, "{name}");
    }
}
