//! Fisher-information metrics, the SNR-per-time objective and the per-stage
//! QFI decomposition.

use serde::{Deserialize, Serialize};

use crate::circuit::{CircuitStructure, ConcreteCircuit, Gate, SignalSpec};
use crate::linalg::{hermitian_eigen, CMatrix};
use crate::noise::{GateDurations, NoiseModel};
use crate::optimizer::StructureEvaluator;
use crate::scalar::{Real, C};
use crate::simulator::{measure, EvaluationBackend, ExactBackend, PreparedSignal, SimError, StageMask};

/// Default SLD eigenvalue cutoff.
pub const EIGEN_CUTOFF: f64 = 1e-12;

/// Phase assignments for the shifted evaluations, base point first:
/// `[φ…φ], [φ+π/2 on qubit 0], [φ−π/2 on qubit 0], [φ+π/2 on qubit 1], …`.
pub fn shift_phase_sets<R: Real>(n_qubits: usize, phi: R) -> Vec<Vec<R>> {
    let s = R::FRAC_PI_2();
    let mut sets = vec![vec![phi; n_qubits]];
    for q in 0..n_qubits {
        for sign in [R::one(), -R::one()] {
            let mut p = vec![phi; n_qubits];
            p[q] = phi + sign * s;
            sets.push(p);
        }
    }
    sets
}

/// Outcome probabilities and their derivative with respect to the signal
/// phase.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftDerivative<R> {
    pub probabilities: Vec<R>,
    pub derivative: Vec<R>,
    /// Backend evaluations used (`2N + 1`).
    pub evaluations: usize,
}

fn combine_shifts<R: Real>(dists: &[Vec<R>], n_qubits: usize) -> (Vec<R>, Vec<R>) {
    let half = R::lit(0.5);
    let base = dists[0].clone();
    let mut deriv = vec![R::zero(); base.len()];
    for q in 0..n_qubits {
        let (plus, minus) = (&dists[1 + 2 * q], &dists[2 + 2 * q]);
        for (d, (p, m)) in deriv.iter_mut().zip(plus.iter().zip(minus)) {
            *d = *d + half * (*p - *m);
        }
    }
    (base, deriv)
}

/// `dP(x)/dφ` by shifting each qubit's signal rotation by `±π/2` in turn and
/// summing the halved differences.
pub fn signal_derivative_param_shift<R: Real, B: EvaluationBackend<R> + ?Sized>(
    backend: &B,
    circuit: &ConcreteCircuit<R>,
    phi: R,
    t: R,
    echo_pulses: u32,
    noise: &NoiseModel,
    seed: u64,
) -> Result<ShiftDerivative<R>, SimError> {
    let sets = shift_phase_sets(circuit.n_qubits, phi);
    let dists = backend.evaluate_many(circuit, &sets, t, echo_pulses, noise, seed)?;
    let probs: Vec<Vec<R>> = dists.into_iter().map(|d| d.probs).collect();
    let (probabilities, derivative) = combine_shifts(&probs, circuit.n_qubits);
    Ok(ShiftDerivative { probabilities, derivative, evaluations: sets.len() })
}

/// Classical Fisher information of a distribution, `Σ dP² / max(P, ε)`.
///
/// Returns the value and the outcomes whose probability fell under the
/// floor while still carrying derivative mass above `√ε`.
pub fn fisher_information<R: Real>(probs: &[R], derivative: &[R], epsilon_floor: R) -> (R, Vec<usize>) {
    let root = epsilon_floor.sqrt();
    let mut flagged = Vec::new();
    let mut total = R::zero();
    for (x, (&p, &d)) in probs.iter().zip(derivative).enumerate() {
        if p < epsilon_floor && d.abs() > root {
            flagged.push(x);
        }
        total = total + d * d / p.max(epsilon_floor);
    }
    (total, flagged)
}

/// CFI with respect to the accumulated phase, with diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct CfiEstimate<R> {
    pub value: R,
    pub probabilities: Vec<R>,
    pub derivative: Vec<R>,
    pub flagged_outcomes: Vec<usize>,
}

pub fn cfi_phi<R: Real, B: EvaluationBackend<R> + ?Sized>(
    backend: &B,
    circuit: &ConcreteCircuit<R>,
    phi: R,
    t: R,
    echo_pulses: u32,
    noise: &NoiseModel,
    seed: u64,
) -> Result<CfiEstimate<R>, SimError> {
    let sd = signal_derivative_param_shift(backend, circuit, phi, t, echo_pulses, noise, seed)?;
    let (value, flagged_outcomes) = fisher_information(&sd.probabilities, &sd.derivative, backend.epsilon_floor());
    Ok(CfiEstimate { value, probabilities: sd.probabilities, derivative: sd.derivative, flagged_outcomes })
}

/// `2 Σ_{λj+λk>τ} |⟨j|∂ρ|k⟩|² / (λj+λk)`.
pub fn qfi_from_state<R: Real>(rho: &CMatrix<R>, drho: &CMatrix<R>, cutoff: R) -> R {
    let eig = hermitian_eigen(rho);
    let v = &eig.vectors;
    let d = rho.nrows();
    // ∂ρ in the eigenbasis: V† ∂ρ V.
    let vd = v.t().mapv(|z| z.conj());
    let rotated = vd.dot(drho).dot(v);
    let mut total = R::zero();
    for j in 0..d {
        for k in 0..d {
            let s = eig.values[j] + eig.values[k];
            if s > cutoff {
                total = total + rotated[[j, k]].norm_sqr() / s;
            }
        }
    }
    R::lit(2.0) * total
}

/// Final state and its exact phase derivative (shift rule on density
/// matrices) with the given stage noise.
pub fn state_and_derivative<R: Real>(
    circuit: &ConcreteCircuit<R>,
    phi: R,
    t: R,
    echo_pulses: u32,
    noise: &NoiseModel,
    stages: StageMask,
) -> Result<(CMatrix<R>, CMatrix<R>), SimError> {
    let prepared = PreparedSignal::new(circuit, t, echo_pulses, noise, stages)?;
    let sets = shift_phase_sets(circuit.n_qubits, phi);
    let states = sets.iter().map(|p| prepared.finish(p).map(|s| s.into_matrix())).collect::<Result<Vec<_>, _>>()?;
    let half = C::new(R::lit(0.5), R::zero());
    let mut drho = CMatrix::from_elem(states[0].dim(), C::new(R::zero(), R::zero()));
    for q in 0..circuit.n_qubits {
        drho = drho + (&states[1 + 2 * q] - &states[2 + 2 * q]).mapv(|z| z * half);
    }
    Ok((states[0].clone(), drho))
}

/// QFI of the final (pre-readout) state.
pub fn qfi_phi<R: Real>(circuit: &ConcreteCircuit<R>, phi: R, t: R, echo_pulses: u32, noise: &NoiseModel) -> Result<R, SimError> {
    qfi_phi_staged(circuit, phi, t, echo_pulses, noise, StageMask::from_noise(noise))
}

pub fn qfi_phi_staged<R: Real>(
    circuit: &ConcreteCircuit<R>,
    phi: R,
    t: R,
    echo_pulses: u32,
    noise: &NoiseModel,
    stages: StageMask,
) -> Result<R, SimError> {
    let (rho, drho) = state_and_derivative(circuit, phi, t, echo_pulses, noise, stages)?;
    Ok(qfi_from_state(&rho, &drho, R::lit(EIGEN_CUTOFF)))
}

/// Time normalization of the objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveConfig {
    /// Encode + decode + measure time in seconds.
    pub t_overhead: f64,
    /// Unit time in seconds.
    pub t_unit: f64,
    /// Probability floor override for CFI denominators.
    pub epsilon_floor: Option<f64>,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        ObjectiveConfig { t_overhead: 0.0, t_unit: 1.0, epsilon_floor: None }
    }
}

impl ObjectiveConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.t_overhead >= 0.0) {
            return Err(format!("t_overhead must be >= 0, got {}", self.t_overhead));
        }
        if !(self.t_unit > 0.0) {
            return Err(format!("t_unit must be > 0, got {}", self.t_unit));
        }
        if let Some(e) = self.epsilon_floor {
            if !(e > 0.0 && e <= 1e-6) {
                return Err(format!("epsilon_floor must lie in (0, 1e-6], got {e}"));
            }
        }
        Ok(())
    }
}

/// ASAP-scheduled duration of a gate list.
pub fn critical_path<P>(gates: &[Gate<P>], n_qubits: usize, durations: &GateDurations) -> f64 {
    let mut ready = vec![0.0f64; n_qubits];
    for g in gates {
        let qs = g.qubits();
        let start = qs.iter().map(|&q| ready.get(q).copied().unwrap_or(0.0)).fold(0.0, f64::max);
        let end = start + durations.of(g.kind());
        for q in qs {
            if let Some(r) = ready.get_mut(q) {
                *r = end;
            }
        }
    }
    ready.into_iter().fold(0.0, f64::max)
}

/// Encoder and decoder critical paths plus the measurement duration.
pub fn circuit_overhead<P>(encoder: &[Gate<P>], decoder: &[Gate<P>], n_qubits: usize, durations: &GateDurations) -> f64 {
    critical_path(encoder, n_qubits, durations) + critical_path(decoder, n_qubits, durations) + durations.measure
}

/// Evaluation summary for one circuit at one interrogation time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveReport<R> {
    pub cfi_phi: R,
    /// `t² · cfi_phi`.
    pub cfi_omega: R,
    pub qfi_phi: Option<R>,
    pub t: R,
    pub t_overhead: R,
    pub objective_value: R,
}

/// `t²·CFI(φ) / (t + t_overhead) · T_unit`.
pub fn objective_value<R: Real>(cfi_phi: R, t: R, config: &ObjectiveConfig) -> R {
    t * t * cfi_phi / (t + R::lit(config.t_overhead)) * R::lit(config.t_unit)
}

pub fn objective<R: Real>(cfi_phi: R, t: R, config: &ObjectiveConfig) -> ObjectiveReport<R> {
    ObjectiveReport {
        cfi_phi,
        cfi_omega: t * t * cfi_phi,
        qfi_phi: None,
        t,
        t_overhead: R::lit(config.t_overhead),
        objective_value: objective_value(cfi_phi, t, config),
    }
}

/// `√(M · CFI(ω))`: inverse standard-deviation bound for `M` repetitions.
pub fn snr_bound<R: Real>(cfi_omega: R, repetitions: u64) -> R {
    (R::lit(repetitions as f64) * cfi_omega).max(R::zero()).sqrt()
}

/// How the signal phase is obtained for an objective evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalModel {
    /// Fixed frequency: `φ = ω t`.
    Frequency(SignalSpec),
    /// Weighted phase nodes (a quadrature of a phase distribution),
    /// independent of `t`.
    Angles { nodes: Vec<(f64, f64)>, echo_pulses: u32 },
}

impl SignalModel {
    pub fn echo_pulses(&self) -> u32 {
        match self {
            SignalModel::Frequency(s) => s.echo_pulses,
            SignalModel::Angles { echo_pulses, .. } => *echo_pulses,
        }
    }

    /// `(phase, weight)` pairs at interrogation time `t`.
    pub fn nodes(&self, t: f64) -> Vec<(f64, f64)> {
        match self {
            SignalModel::Frequency(s) => vec![(s.phase(t), 1.0)],
            SignalModel::Angles { nodes, .. } => nodes.clone(),
        }
    }
}

/// Weighted CFI(φ) over the signal model's phase nodes.
pub fn expected_cfi<R: Real, B: EvaluationBackend<R> + ?Sized>(
    backend: &B,
    circuit: &ConcreteCircuit<R>,
    signal: &SignalModel,
    t: R,
    noise: &NoiseModel,
    epsilon_floor: Option<f64>,
    seed: u64,
) -> Result<R, SimError> {
    let n = circuit.n_qubits;
    let nodes = signal.nodes(t.as_f64());
    let per_node = 2 * n + 1;
    let sets: Vec<Vec<R>> = nodes.iter().flat_map(|&(phi, _)| shift_phase_sets(n, R::lit(phi))).collect();
    let dists = backend.evaluate_many(circuit, &sets, t, signal.echo_pulses(), noise, seed)?;
    let probs: Vec<Vec<R>> = dists.into_iter().map(|d| d.probs).collect();
    let eps = epsilon_floor.map(R::lit).unwrap_or_else(|| backend.epsilon_floor());
    let mut total = R::zero();
    for (chunk, &(_, w)) in probs.chunks(per_node).zip(&nodes) {
        let (p, d) = combine_shifts(chunk, n);
        total = total + R::lit(w) * fisher_information(&p, &d, eps).0;
    }
    Ok(total)
}

/// Full objective evaluation for one circuit.
pub fn evaluate_objective<R: Real, B: EvaluationBackend<R> + ?Sized>(
    backend: &B,
    circuit: &ConcreteCircuit<R>,
    signal: &SignalModel,
    t: R,
    noise: &NoiseModel,
    config: &ObjectiveConfig,
    seed: u64,
) -> Result<ObjectiveReport<R>, SimError> {
    let cfi = expected_cfi(backend, circuit, signal, t, noise, config.epsilon_floor, seed)?;
    Ok(objective(cfi, t, config))
}

/// Objective used by the structure search.
#[derive(Clone, Debug)]
pub struct MetrologyObjective<B> {
    pub backend: B,
    pub noise: NoiseModel,
    pub signal: SignalModel,
    pub t_unit: f64,
    /// Fixed overhead; derived from gate durations when `None`.
    pub t_overhead: Option<f64>,
    pub epsilon_floor: Option<f64>,
    pub seed: u64,
}

impl<B: EvaluationBackend<f64>> MetrologyObjective<B> {
    pub fn new(backend: B, noise: NoiseModel, signal: SignalModel) -> Self {
        MetrologyObjective { backend, noise, signal, t_unit: 1.0, t_overhead: None, epsilon_floor: None, seed: 0 }
    }

    pub fn config_for(&self, circuit: &ConcreteCircuit<f64>) -> ObjectiveConfig {
        let t_overhead = self
            .t_overhead
            .unwrap_or_else(|| circuit_overhead(&circuit.encoder, &circuit.decoder, circuit.n_qubits, &self.noise.durations));
        ObjectiveConfig { t_overhead, t_unit: self.t_unit, epsilon_floor: self.epsilon_floor }
    }

    pub fn report(&self, circuit: &ConcreteCircuit<f64>, t: f64) -> Result<ObjectiveReport<f64>, SimError> {
        evaluate_objective(&self.backend, circuit, &self.signal, t, &self.noise, &self.config_for(circuit), self.seed)
    }

    /// Report including QFI of the final state (exact simulation).
    pub fn report_with_qfi(&self, circuit: &ConcreteCircuit<f64>, t: f64) -> Result<ObjectiveReport<f64>, SimError> {
        let mut r = self.report(circuit, t)?;
        let nodes = self.signal.nodes(t);
        let mut q = 0.0;
        for (phi, w) in nodes {
            q += w * qfi_phi(circuit, phi, t, self.signal.echo_pulses(), &self.noise)?;
        }
        r.qfi_phi = Some(q);
        Ok(r)
    }
}

impl<B: EvaluationBackend<f64>> StructureEvaluator for MetrologyObjective<B> {
    fn evaluate(&self, structure: &CircuitStructure, theta: &[f64], t: f64) -> f64 {
        match structure.bind(theta).map_err(SimError::from).and_then(|c| self.report(&c, t)) {
            Ok(r) if r.objective_value.is_finite() => r.objective_value,
            _ => f64::NEG_INFINITY,
        }
    }
}

/// Stages of the noise decomposition, from fully noisy to fully ideal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    /// CFI with every noise source, readout included.
    AllNoise,
    /// QFI of the final state (perfect readout).
    ReadoutIdeal,
    /// ... and a perfect decoder.
    DecoderIdeal,
    /// ... and no interrogation decoherence.
    InterrogationIdeal,
    /// ... and a perfect encoder.
    AllIdeal,
}

impl Stage {
    pub const ORDER: [Stage; 5] = [Stage::AllNoise, Stage::ReadoutIdeal, Stage::DecoderIdeal, Stage::InterrogationIdeal, Stage::AllIdeal];

    pub fn label(self) -> &'static str {
        match self {
            Stage::AllNoise => "all-noise",
            Stage::ReadoutIdeal => "readout-ideal",
            Stage::DecoderIdeal => "decoder-ideal",
            Stage::InterrogationIdeal => "interrogation-ideal",
            Stage::AllIdeal => "all-ideal",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageValue<R> {
    pub stage: Stage,
    /// Cumulative value with this and all earlier stages idealized.
    pub value: R,
    /// Increase over the previous stage (the first region is the value
    /// itself).
    pub region: R,
}

/// Cumulative information with readout, decoder, interrogation and encoder
/// noise idealized in turn.
pub fn stage_qfi_decomposition<R: Real>(
    circuit: &ConcreteCircuit<R>,
    phi: R,
    t: R,
    echo_pulses: u32,
    noise: &NoiseModel,
) -> Result<Vec<StageValue<R>>, SimError> {
    let full = StageMask::from_noise(noise);
    let cfi = cfi_phi(&ExactBackend, circuit, phi, t, echo_pulses, noise, 0)?.value;
    let q = |mask: StageMask| qfi_phi_staged(circuit, phi, t, echo_pulses, noise, mask);
    let readout_ideal = q(full)?;
    let decoder_ideal = q(StageMask { decoder_gates: false, ..full })?;
    let interrogation_ideal = q(StageMask { decoder_gates: false, interrogation: false, ..full })?;
    let all_ideal = q(StageMask::IDEAL)?;
    let values = [cfi, readout_ideal, decoder_ideal, interrogation_ideal, all_ideal];
    Ok(Stage::ORDER
        .iter()
        .enumerate()
        .map(|(i, &stage)| StageValue { stage, value: values[i], region: if i == 0 { values[0] } else { values[i] - values[i - 1] } })
        .collect())
}

/// Exact outcome distribution helper used by reports and tests.
pub fn exact_distribution<R: Real>(circuit: &ConcreteCircuit<R>, phi: R, t: R, echo_pulses: u32, noise: &NoiseModel) -> Result<Vec<R>, SimError> {
    let prepared = PreparedSignal::new(circuit, t, echo_pulses, noise, StageMask::from_noise(noise))?;
    Ok(measure(&prepared.finish(&vec![phi; circuit.n_qubits])?, noise, None)?.probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::SampledBackend;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn ramsey() -> ConcreteCircuit<f64> {
        ConcreteCircuit { n_qubits: 1, encoder: vec![Gate::H { qubit: 0 }], decoder: vec![Gate::H { qubit: 0 }] }
    }

    fn ghz_h(n: usize) -> ConcreteCircuit<f64> {
        let mut enc = vec![Gate::H { qubit: 0 }];
        enc.extend((1..n).map(|q| Gate::Cnot { control: q - 1, target: q }));
        ConcreteCircuit { n_qubits: n, encoder: enc, decoder: (0..n).map(|q| Gate::H { qubit: q }).collect() }
    }

    fn off() -> NoiseModel {
        NoiseModel::noiseless()
    }

    #[test]
    fn ramsey_shift_derivative_is_half_sine() {
        for phi in [0.3, PI / 2.0, 2.0] {
            let sd = signal_derivative_param_shift(&ExactBackend, &ramsey(), phi, 1e-5, 0, &off(), 0).unwrap();
            assert_abs_diff_eq!(sd.derivative[1], 0.5 * phi.sin(), epsilon = 1e-9);
            assert_eq!(sd.evaluations, 3);
        }
    }

    #[test]
    fn phase_blind_circuit_has_zero_derivative_and_cfi() {
        let c = ConcreteCircuit { n_qubits: 2, encoder: vec![Gate::X { qubit: 0 }], decoder: vec![Gate::H { qubit: 1 }] };
        let est = cfi_phi(&ExactBackend, &c, 0.4, 1e-5, 0, &off(), 0).unwrap();
        assert!(est.derivative.iter().all(|d: &f64| d.abs() < 1e-15));
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn ghz2_even_parity_derivative() {
        // P(even) = cos²(φ) for two qubits, derivative −sin(2φ).
        for phi in [0.2, 0.9, 1.7] {
            let sd = signal_derivative_param_shift(&ExactBackend, &ghz_h(2), phi, 1e-5, 0, &off(), 0).unwrap();
            let even = sd.derivative[0] + sd.derivative[3];
            assert_abs_diff_eq!(even, -(2.0 * phi).sin(), epsilon = 1e-9);
            assert_abs_diff_eq!(sd.probabilities[0] + sd.probabilities[3], phi.cos().powi(2), epsilon = 1e-12);
        }
    }

    #[test]
    fn noiseless_ramsey_cfi_is_one() {
        for phi in [0.1, 1.0, 2.5] {
            let v = cfi_phi(&ExactBackend, &ramsey(), phi, 1e-5, 0, &off(), 0).unwrap().value;
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn noiseless_ghz3_cfi_is_nine() {
        let v = cfi_phi(&ExactBackend, &ghz_h(3), PI / 6.0, 1e-5, 0, &off(), 0).unwrap().value;
        assert_abs_diff_eq!(v, 9.0, epsilon = 1e-8);
    }

    #[test]
    fn qfi_of_ghz_and_product_states() {
        let ghz = ConcreteCircuit { decoder: vec![], ..ghz_h(3) };
        assert_abs_diff_eq!(qfi_phi(&ghz, 0.4, 1e-5, 0, &off()).unwrap(), 9.0, epsilon = 1e-9);
        let plus = ConcreteCircuit { n_qubits: 3, encoder: (0..3).map(|q| Gate::H { qubit: q }).collect(), decoder: vec![] };
        assert_abs_diff_eq!(qfi_phi(&plus, 0.4, 1e-5, 0, &off()).unwrap(), 3.0, epsilon = 1e-9);
    }

    #[test]
    fn maximally_mixed_state_has_zero_qfi() {
        let rho = crate::DensityMatrix::<f64>::maximally_mixed(2).into_matrix();
        let zero = CMatrix::from_elem((4, 4), C::new(0.0, 0.0));
        assert_eq!(qfi_from_state(&rho, &zero, 1e-12), 0.0);
        // Fully depolarized signal qubits carry nothing either.
        let mut noise = NoiseModel::noiseless();
        noise.enabled.gate = true;
        noise.p1 = 1.0;
        let c = ConcreteCircuit { n_qubits: 1, encoder: vec![Gate::H { qubit: 0 }], decoder: vec![] };
        assert_abs_diff_eq!(qfi_phi(&c, 0.3, 1e-5, 0, &noise).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn objective_arithmetic() {
        let cfg = ObjectiveConfig { t_overhead: 1e-6, t_unit: 1.0, epsilon_floor: None };
        assert_eq!(objective(0.0, 20e-6, &cfg).objective_value, 0.0);
        let r = objective(9.0, 20e-6, &cfg);
        assert_abs_diff_eq!(r.objective_value, 9.0 * (20e-6f64).powi(2) / 21e-6, epsilon = 1e-18);
        assert_abs_diff_eq!(r.objective_value, 1.714e-4, epsilon = 1e-7);
        assert_eq!(r.cfi_omega, 20e-6 * 20e-6 * 9.0);
        let free = ObjectiveConfig { t_overhead: 0.0, ..cfg };
        assert_abs_diff_eq!(objective(2.0, 3e-6, &free).objective_value, 3e-6 * 2.0, epsilon = 1e-20);
    }

    #[test]
    fn snr_bound_square_root_law() {
        assert_eq!(snr_bound(0.0, 5), 0.0);
        assert_abs_diff_eq!(snr_bound(1e-4, 1), 1e-2, epsilon = 1e-15);
        assert_abs_diff_eq!(snr_bound(3.7e-3, 4) / snr_bound(3.7e-3, 1), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn decomposition_noiseless_regions_vanish() {
        let d = stage_qfi_decomposition(&ghz_h(3), 0.4, 20e-6, 0, &off()).unwrap();
        for s in &d[1..] {
            assert_abs_diff_eq!(s.region, 0.0, epsilon = 1e-8);
        }
        assert_abs_diff_eq!(d[0].value, 9.0, epsilon = 1e-8);
    }

    #[test]
    fn critical_path_overlaps_disjoint_gates() {
        let durations = GateDurations { u3: 1.0, cnot: 10.0, h: 1.0, x: 1.0, rz: 0.0, measure: 100.0 };
        let gates: Vec<Gate<f64>> = vec![Gate::H { qubit: 0 }, Gate::H { qubit: 1 }, Gate::Cnot { control: 0, target: 1 }, Gate::H { qubit: 2 }];
        assert_eq!(critical_path(&gates, 3, &durations), 11.0);
        assert_eq!(circuit_overhead(&gates, &gates, 3, &durations), 122.0);
    }

    #[test]
    fn sampled_cfi_uses_shot_floor() {
        let b = SampledBackend::new(1000);
        assert_eq!(EvaluationBackend::<f64>::epsilon_floor(&b), 5e-4);
        let est = cfi_phi(&b, &ramsey(), 1.0, 1e-5, 0, &off(), 3).unwrap();
        assert!((est.value - 1.0).abs() < 0.3);
    }

    #[test]
    fn single_precision_ghz_cfi() {
        let c: ConcreteCircuit<f32> = ConcreteCircuit {
            n_qubits: 3,
            encoder: vec![Gate::H { qubit: 0 }, Gate::Cnot { control: 0, target: 1 }, Gate::Cnot { control: 1, target: 2 }],
            decoder: (0..3).map(|q| Gate::H { qubit: q }).collect(),
        };
        let v = cfi_phi(&ExactBackend, &c, 0.5f32, 1e-5, 0, &off(), 0).unwrap().value;
        assert!((v - 9.0).abs() < 1e-3);
    }
}
