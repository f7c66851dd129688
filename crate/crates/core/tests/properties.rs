use std::f64::consts::PI;

use metroforge::metrics::{cfi_phi, exact_distribution, qfi_phi, qfi_phi_staged};
use metroforge::noise::{amplitude_damping, depolarizing_channel, interrogation_channel, phase_damping};
use metroforge::optimizer::HyperSchedule;
use metroforge::simulator::{run_circuit, StageMask};
use metroforge::{propose, ConcreteCircuit, ConnectivityGraph, DensityMatrix, EvaluationBackend, NoiseModel, SampledBackend, SignalSetting};
use ndarray::Array2;
use num_complex::Complex64;
use proptest::prelude::*;

fn circuit(n: usize, choice: usize, seed: u64, angles: &[f64]) -> Option<ConcreteCircuit<f64>> {
    let graph = ConnectivityGraph::all_to_all(n);
    let choices = HyperSchedule::single_layer(&graph).choices;
    let s = propose(n, &graph, choices[choice % choices.len()], seed).ok()?;
    let theta: Vec<f64> = (0..s.n_params).map(|i| angles[i % angles.len()]).collect();
    s.bind(&theta).ok()
}

fn ginibre(entries: &[(f64, f64)]) -> Array2<Complex64> {
    let g = Array2::from_shape_fn((2, 2), |(i, j)| {
        let (re, im) = entries[2 * i + j];
        Complex64::new(re, im)
    });
    let rho = g.dot(&g.t().mapv(|z| z.conj()));
    let tr = rho[[0, 0]] + rho[[1, 1]];
    rho.mapv(|z| z / tr)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn channels_preserve_states(
        entries in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 4),
        p in 0.0f64..1.0,
        dt in 0.0f64..2e-4,
    ) {
        let rho = ginibre(&entries);
        prop_assume!((rho[[0, 0]] + rho[[1, 1]]).norm() > 1e-9);
        let channels = [
            depolarizing_channel::<f64>(p).unwrap(),
            amplitude_damping(p).unwrap(),
            phase_damping(p).unwrap(),
            interrogation_channel(dt, 52.2e-6, 62.8e-6).unwrap(),
        ];
        for ch in &channels {
            prop_assert!(ch.completeness_error() < 1e-10);
            let out = DensityMatrix::from_matrix(1, ch.apply_matrix(&rho)).unwrap();
            prop_assert!(out.check_invariants(1e-9).is_ok());
        }
    }

    #[test]
    fn interrogation_is_a_semigroup(
        entries in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 4),
        a in 0.0f64..1e-4,
        b in 0.0f64..1e-4,
    ) {
        let rho = ginibre(&entries);
        let step = |dt: f64, m: &Array2<Complex64>| interrogation_channel::<f64>(dt, 52.2e-6, 62.8e-6).unwrap().apply_matrix(m);
        let diff = &step(b, &step(a, &rho)) - &step(a + b, &rho);
        prop_assert!(diff.iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn cfi_bounded_by_qfi_bounded_by_heisenberg(
        n in 1usize..=3,
        choice in 0usize..64,
        seed in any::<u64>(),
        angles in prop::collection::vec(0.0f64..2.0 * PI, 6),
        phi in 0.0f64..2.0 * PI,
        t in 1e-6f64..80e-6,
        noisy in any::<bool>(),
    ) {
        let Some(c) = circuit(n, choice, seed, &angles) else { return Ok(()) };
        let noise = if noisy { NoiseModel::superconducting_average() } else { NoiseModel::noiseless() };
        let cfi = cfi_phi(&metroforge::ExactBackend, &c, phi, t, 0, &noise, 0).unwrap().value;
        let qfi = qfi_phi(&c, phi, t, 0, &noise).unwrap();
        prop_assert!(cfi <= qfi + 1e-6, "cfi {cfi} qfi {qfi}");
        prop_assert!(qfi <= (n * n) as f64 + 1e-6);
    }

    #[test]
    fn idealizing_late_stages_never_lowers_qfi(
        n in 1usize..=3,
        choice in 0usize..64,
        seed in any::<u64>(),
        angles in prop::collection::vec(0.0f64..2.0 * PI, 6),
        phi in 0.0f64..2.0 * PI,
        t in 1e-6f64..80e-6,
    ) {
        let Some(c) = circuit(n, choice, seed, &angles) else { return Ok(()) };
        let noise = NoiseModel::superconducting_average();
        let q = |mask| qfi_phi_staged(&c, phi, t, 0, &noise, mask).unwrap();
        let full = StageMask::from_noise(&noise);
        let no_decoder = StageMask { decoder_gates: false, ..full };
        let no_late = StageMask { interrogation: false, ..no_decoder };
        prop_assert!(q(full) <= q(no_decoder) + 1e-8, "{} > {} for {c:?}", q(full), q(no_decoder));
        prop_assert!(q(no_decoder) <= q(no_late) + 1e-8);
        prop_assert!(q(no_late) <= q(StageMask::IDEAL) + 1e-8);
    }

    #[test]
    fn simulated_states_are_physical(
        n in 1usize..=4,
        choice in 0usize..64,
        seed in any::<u64>(),
        angles in prop::collection::vec(0.0f64..2.0 * PI, 6),
        phi in 0.0f64..2.0 * PI,
        t in 0.0f64..100e-6,
    ) {
        let Some(c) = circuit(n, choice, seed, &angles) else { return Ok(()) };
        let rho = run_circuit(&c, &SignalSetting::uniform(n, phi, t, 0), &NoiseModel::superconducting_average()).unwrap();
        prop_assert!(rho.check_invariants(1e-9).is_ok());
    }
}

#[test]
fn sampled_frequencies_track_exact_probabilities() {
    let noise = NoiseModel::superconducting_average();
    let shots = 20_000u64;
    for seed in 0..8u64 {
        let c = circuit(3, seed as usize, seed, &[0.4, 1.3, 2.9]).unwrap();
        let (phi, t) = (0.7, 20e-6);
        let exact = exact_distribution(&c, phi, t, 0, &noise).unwrap();
        let sampled = SampledBackend::new(shots).evaluate(&c, &SignalSetting::uniform(3, phi, t, 0), &noise, seed).unwrap();
        for (p, q) in exact.iter().zip(&sampled.probs) {
            let sigma = (p * (1.0 - p) / shots as f64).sqrt();
            assert!((p - q).abs() <= 5.0 * sigma + 1.0 / shots as f64, "exact {p} sampled {q}");
        }
    }
}
