use nalgebra::{Complex, DVector};
use proptest::prelude::*;

use circulator_core::qdynamics::{
    build_hamiltonian, evolve, occupations, rwa_transfer_time, transfer_report, Integrator, QuantumSystem, Qubit,
    SystemSpec,
};

fn pair() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=3, 1usize..=3).prop_filter("distinct", |(l, m)| l != m)
}

fn spec() -> impl Strategy<Value = SystemSpec> {
    (pair(), 0usize..=3, prop::collection::vec(0.5..1.5f64, 3), 0.5..1.5f64, 0.0..0.2f64, any::<bool>()).prop_map(
        |(pair, fock_cutoff, mode_frequencies, qubit_splitting, coupling, rwa)| SystemSpec {
            pair,
            n_modes: 3,
            fock_cutoff,
            mode_frequencies,
            qubit_splitting,
            coupling,
            rwa,
        },
    )
}

fn random_state(sys: &QuantumSystem, seed: &[(f64, f64)]) -> DVector<Complex<f64>> {
    DVector::from_iterator(sys.dimension(), (0..sys.dimension()).map(|i| {
        let (re, im) = seed[i % seed.len()];
        Complex::new(re + 0.1 * i as f64, im)
    }))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hamiltonian_is_hermitian(spec in spec()) {
        let sys = build_hamiltonian(spec).unwrap();
        let h = &sys.hamiltonian;
        prop_assert_eq!((h - h.adjoint()).camax(), 0.0);
    }

    #[test]
    fn norm_and_energy_are_conserved(
        spec in spec(),
        seed in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..8),
    ) {
        let sys = build_hamiltonian(spec).unwrap();
        let psi = random_state(&sys, &seed);
        let sys = sys.with_state(psi);
        let traj = evolve(&sys, 200.0, 1.0, Integrator::Spectral).unwrap();
        prop_assert!(traj.max_norm_drift() < 1e-10);
        prop_assert!(traj.max_relative_energy_drift() < 1e-10);
    }

    /// The mode outside the coupled pair never exchanges energy.
    #[test]
    fn spectator_mode_is_frozen(
        spec in spec(),
        seed in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..8),
    ) {
        let (l, m) = spec.pair;
        let spectator = 6 - l - m;
        let sys = build_hamiltonian(spec).unwrap();
        let psi = random_state(&sys, &seed);
        let sys = sys.with_state(psi);
        let traj = evolve(&sys, 300.0, 3.0, Integrator::Spectral).unwrap();
        let n0 = traj.points[0].observables.occupations[spectator - 1];
        for p in &traj.points {
            prop_assert!((p.observables.occupations[spectator - 1] - n0).abs() < 1e-12);
        }
    }

    #[test]
    fn rwa_conserves_excitations(
        spec in spec(),
        seed in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..8),
    ) {
        let sys = build_hamiltonian(SystemSpec { rwa: true, ..spec }).unwrap();
        let psi = random_state(&sys, &seed);
        let sys = sys.with_state(psi);
        let traj = evolve(&sys, 200.0, 2.0, Integrator::Spectral).unwrap();
        let e0 = occupations(&traj.states[0], &sys).excitations;
        for p in &traj.points {
            prop_assert!((p.observables.excitations - e0).abs() < 1e-10);
        }
    }
}

#[test]
fn full_and_rwa_transfer_times_agree_at_weak_coupling() {
    for ratio in [0.01, 0.005, 0.002] {
        let t_star = rwa_transfer_time(ratio);
        let mut peaks = Vec::new();
        for rwa in [true, false] {
            let sys = build_hamiltonian(SystemSpec { rwa, ..SystemSpec::resonant((1, 2), 2, 1.0, ratio) }).unwrap();
            let psi = sys.fock_state(Qubit::Ground, &[1, 0, 0]).unwrap();
            let sys = sys.with_state(psi);
            let traj = evolve(&sys, 1.2 * t_star, t_star / 4000.0, Integrator::Spectral).unwrap();
            let report = transfer_report(&traj).unwrap();
            assert!(report.peak_target_occupation > 0.95, "g/ω = {ratio}, rwa = {rwa}: {report:?}");
            peaks.push(report.time_of_peak);
        }
        let rel = (peaks[1] / peaks[0] - 1.0).abs();
        assert!(rel < 0.02, "g/ω = {ratio}: rwa {} full {} ({rel:e})", peaks[0], peaks[1]);
        assert!((peaks[0] / t_star - 1.0).abs() < 0.01);
    }
}
