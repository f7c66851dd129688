//! Dense density-matrix engine and the exact / shot-sampled evaluation
//! backends.
//!
//! Qubit 0 is the most significant bit of every basis index, both for the
//! density matrix and for outcome distributions.

use ndarray::Array2;
use num_traits::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{single_qubit_matrix, CircuitError, ConcreteCircuit, Gate};
use crate::linalg::{hermitian_eigen, CMatrix};
use crate::noise::{depolarizing_channel, interrogation_channel, readout_confusion, NoiseError, NoiseModel, Superop};
use crate::scalar::{cis, cr, Real, C};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error("expected {expected} signal phases, got {found}")]
    PhaseCount { expected: usize, found: usize },
}

/// `2^N × 2^N` density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix<R: Real> {
    n_qubits: usize,
    data: CMatrix<R>,
}

impl<R: Real> DensityMatrix<R> {
    /// `|0…0⟩⟨0…0|`.
    pub fn zero_state(n_qubits: usize) -> Self {
        let d = 1usize << n_qubits;
        let mut data = Array2::from_elem((d, d), C::zero());
        data[[0, 0]] = C::one();
        DensityMatrix { n_qubits, data }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let d = 1usize << n_qubits;
        let w = cr(R::one() / R::lit(d as f64));
        let data = Array2::from_shape_fn((d, d), |(i, j)| if i == j { w } else { C::zero() });
        DensityMatrix { n_qubits, data }
    }

    /// `|ψ⟩⟨ψ|` for a (normalized) state vector.
    pub fn from_pure(n_qubits: usize, psi: &[C<R>]) -> Result<Self, SimError> {
        let d = 1usize << n_qubits;
        if psi.len() != d {
            return Err(SimError::InvalidState(format!("state vector length {} != {d}", psi.len())));
        }
        let data = Array2::from_shape_fn((d, d), |(i, j)| psi[i] * psi[j].conj());
        Ok(DensityMatrix { n_qubits, data })
    }

    pub fn from_matrix(n_qubits: usize, m: CMatrix<R>) -> Result<Self, SimError> {
        let d = 1usize << n_qubits;
        if m.dim() != (d, d) {
            return Err(SimError::InvalidState(format!("matrix shape {:?} != ({d}, {d})", m.dim())));
        }
        Ok(DensityMatrix { n_qubits, data: m.as_standard_layout().into_owned() })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn matrix(&self) -> &CMatrix<R> {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix<R> {
        self.data
    }

    pub fn trace(&self) -> C<R> {
        (0..self.dim()).map(|i| self.data[[i, i]]).fold(C::zero(), |a, b| a + b)
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> R {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Z-basis populations.
    pub fn probabilities(&self) -> Vec<R> {
        (0..self.dim()).map(|i| self.data[[i, i]].re.max(R::zero())).collect()
    }

    pub fn min_eigenvalue(&self) -> R {
        hermitian_eigen(&self.data).values[0]
    }

    /// Hermiticity, unit trace and positivity checks.
    pub fn check_invariants(&self, tol: R) -> Result<(), SimError> {
        let d = self.dim();
        for i in 0..d {
            for j in i..d {
                if (self.data[[i, j]] - self.data[[j, i]].conj()).norm() > tol {
                    return Err(SimError::InvalidState(format!("not Hermitian at ({i},{j})")));
                }
            }
        }
        let tr = self.trace();
        if (tr - C::one()).norm() > tol {
            return Err(SimError::InvalidState(format!("trace = {tr}")));
        }
        let min = self.min_eigenvalue();
        if min < -tol * R::lit(10.0) {
            return Err(SimError::InvalidState(format!("negative eigenvalue {min}")));
        }
        Ok(())
    }

    fn mask(&self, qubit: usize) -> usize {
        1usize << (self.n_qubits - 1 - qubit)
    }

    fn check_qubit(&self, qubit: usize) -> Result<(), SimError> {
        if qubit >= self.n_qubits {
            return Err(CircuitError::IndexOutOfRange { qubit, n_qubits: self.n_qubits }.into());
        }
        Ok(())
    }

    /// Applies a single-qubit superoperator to `qubit`.
    pub fn apply_superop(&mut self, qubit: usize, s: &Superop<R>) {
        let d = self.dim();
        let m = self.mask(qubit);
        let data = self.data.as_slice_mut().expect("standard layout");
        for i in (0..d).filter(|i| i & m == 0) {
            let (r0, r1) = (i * d, (i | m) * d);
            for j in (0..d).filter(|j| j & m == 0) {
                let v = [data[r0 + j], data[r0 + (j | m)], data[r1 + j], data[r1 + (j | m)]];
                let out: [C<R>; 4] = std::array::from_fn(|row| {
                    s[row][0] * v[0] + s[row][1] * v[1] + s[row][2] * v[2] + s[row][3] * v[3]
                });
                data[r0 + j] = out[0];
                data[r0 + (j | m)] = out[1];
                data[r1 + j] = out[2];
                data[r1 + (j | m)] = out[3];
            }
        }
    }

    /// `ρ → U ρ U†` for a 2×2 unitary on `qubit`.
    pub fn apply_unitary(&mut self, qubit: usize, u: &[[C<R>; 2]; 2]) {
        self.apply_superop(qubit, &unitary_superop(u));
    }

    /// CNOT as an index permutation.
    pub fn apply_cnot(&mut self, control: usize, target: usize) {
        let d = self.dim();
        let (cm, tm) = (self.mask(control), self.mask(target));
        let perm = |i: usize| if i & cm != 0 { i ^ tm } else { i };
        let old = self.data.clone();
        let src = old.as_slice().expect("standard layout");
        let dst = self.data.as_slice_mut().expect("standard layout");
        for i in 0..d {
            let pi = perm(i) * d;
            for j in 0..d {
                dst[i * d + j] = src[pi + perm(j)];
            }
        }
    }

    /// Independent `Rz(phases[q])` on every qubit.
    pub fn apply_phases(&mut self, phases: &[R]) {
        let d = self.dim();
        let n = self.n_qubits;
        // Rz(φ) on one qubit multiplies ρ_ab by e^{iφ(bit_a − bit_b)}.
        let u: Vec<C<R>> = (0..d)
            .map(|a| {
                let angle = (0..n).filter(|&q| a & (1 << (n - 1 - q)) != 0).map(|q| phases[q]).fold(R::zero(), |x, y| x + y);
                cis(angle)
            })
            .collect();
        let data = self.data.as_slice_mut().expect("standard layout");
        for a in 0..d {
            for b in 0..d {
                data[a * d + b] = data[a * d + b] * u[a] * u[b].conj();
            }
        }
    }

    fn apply_x_all(&mut self) {
        let x = crate::circuit::pauli_x_matrix::<R>();
        for q in 0..self.n_qubits {
            self.apply_unitary(q, &x);
        }
    }

    fn apply_superop_all(&mut self, s: &Superop<R>) {
        for q in 0..self.n_qubits {
            self.apply_superop(q, s);
        }
    }
}

/// Liouville form of `ρ → UρU†`.
pub fn unitary_superop<R: Real>(u: &[[C<R>; 2]; 2]) -> Superop<R> {
    std::array::from_fn(|row| {
        let (a, b) = (row >> 1, row & 1);
        std::array::from_fn(|col| {
            let (c, d) = (col >> 1, col & 1);
            u[a][c] * u[b][d].conj()
        })
    })
}

/// `second ∘ first` in Liouville form.
pub fn compose_superops<R: Real>(first: &Superop<R>, second: &Superop<R>) -> Superop<R> {
    std::array::from_fn(|i| std::array::from_fn(|j| (0..4).map(|k| second[i][k] * first[k][j]).fold(C::zero(), |a, b| a + b)))
}

/// Probability mass over the `2^N` Z-basis outcomes.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeDistribution<R> {
    pub n_qubits: usize,
    pub probs: Vec<R>,
}

impl<R: Real + Serialize> Serialize for OutcomeDistribution<R> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.probs.serialize(s)
    }
}

impl<'de, R: Real + Deserialize<'de>> Deserialize<'de> for OutcomeDistribution<R> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let probs = Vec::<R>::deserialize(d)?;
        if !probs.len().is_power_of_two() {
            return Err(serde::de::Error::custom("distribution length must be a power of two"));
        }
        Ok(OutcomeDistribution { n_qubits: probs.len().trailing_zeros() as usize, probs })
    }
}

impl<R: Real> OutcomeDistribution<R> {
    pub fn total(&self) -> R {
        self.probs.iter().copied().sum()
    }

    /// Bitstring label of an outcome index, qubit 0 first.
    pub fn bitstring(&self, index: usize) -> String {
        (0..self.n_qubits).map(|q| if index & (1 << (self.n_qubits - 1 - q)) != 0 { '1' } else { '0' }).collect()
    }

    /// Multinomial sample of `shots` outcomes, returned as frequencies.
    pub fn sample(&self, shots: u64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut remaining = shots;
        let mut mass = 1.0f64;
        let mut probs = vec![R::zero(); self.probs.len()];
        for (i, p) in self.probs.iter().enumerate() {
            if remaining == 0 {
                break;
            }
            let p = p.as_f64().max(0.0);
            let count = if i + 1 == self.probs.len() || mass <= p {
                remaining
            } else {
                let q = (p / mass).clamp(0.0, 1.0);
                Binomial::new(remaining, q).expect("valid binomial").sample(&mut rng)
            };
            probs[i] = R::lit(count as f64 / shots as f64);
            remaining -= count;
            mass -= p;
        }
        OutcomeDistribution { n_qubits: self.n_qubits, probs }
    }
}

/// Which parts of the circuit see noise; derived from a [`NoiseModel`] and
/// selectively idealized by the stage decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StageMask {
    pub encoder_gates: bool,
    pub interrogation: bool,
    pub decoder_gates: bool,
}

impl StageMask {
    pub fn from_noise(noise: &NoiseModel) -> Self {
        StageMask { encoder_gates: noise.enabled.gate, interrogation: noise.enabled.interrogation, decoder_gates: noise.enabled.gate }
    }

    pub const IDEAL: StageMask = StageMask { encoder_gates: false, interrogation: false, decoder_gates: false };
}

/// Per-qubit signal phases, interrogation time and echo pulse count.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalSetting<R> {
    pub phases: Vec<R>,
    pub t: R,
    pub echo_pulses: u32,
}

impl<R: Real> SignalSetting<R> {
    /// Same phase `phi` on all `n` qubits.
    pub fn uniform(n: usize, phi: R, t: R, echo_pulses: u32) -> Self {
        SignalSetting { phases: vec![phi; n], t, echo_pulses }
    }
}

struct GateNoise<R: Real> {
    single: Option<Superop<R>>,
    double: Option<Superop<R>>,
}

impl<R: Real> GateNoise<R> {
    fn new(noise: &NoiseModel) -> Result<Self, NoiseError> {
        let make = |p: f64| -> Result<Option<Superop<R>>, NoiseError> {
            Ok(if p > 0.0 { Some(depolarizing_channel::<R>(p)?.superoperator()) } else { None })
        };
        Ok(GateNoise { single: make(noise.p1)?, double: make(noise.p2)? })
    }

    fn apply(&self, rho: &mut DensityMatrix<R>, gate: &Gate<R>, noisy: bool) -> Result<(), SimError> {
        for q in gate.qubits() {
            rho.check_qubit(q)?;
        }
        match *gate {
            Gate::Cnot { control, target } => {
                rho.apply_cnot(control, target);
                if noisy {
                    if let Some(s) = &self.double {
                        rho.apply_superop(control, s);
                        rho.apply_superop(target, s);
                    }
                }
            }
            _ => {
                let q = gate.qubits()[0];
                let u = single_qubit_matrix(gate)?.expect("single-qubit gate");
                let su = unitary_superop(&u);
                match (&self.single, noisy) {
                    (Some(dep), true) => rho.apply_superop(q, &compose_superops(&su, dep)),
                    _ => rho.apply_superop(q, &su),
                }
            }
        }
        Ok(())
    }
}

/// `ρ → UρU†` followed by the gate's depolarizing channel(s) when gate noise
/// is enabled.
pub fn apply_gate<R: Real>(rho: &mut DensityMatrix<R>, gate: &Gate<R>, noise: &NoiseModel) -> Result<(), SimError> {
    GateNoise::new(noise)?.apply(rho, gate, noise.enabled.gate)
}

fn interrogation_superop<R: Real>(dt: R, noise: &NoiseModel) -> Result<Superop<R>, NoiseError> {
    Ok(interrogation_channel::<R>(dt.as_f64(), noise.t1, noise.t2)?.superoperator())
}

/// Signal accumulation: `Rz(phases[q])` on every qubit with interrogation
/// decoherence over `t`. With `echo_pulses = n > 0` the time is split into
/// `n + 1` equal segments separated by perfect X pulses on all qubits, with
/// the signal sign alternating so the net phase in the toggled frame is
/// unchanged.
pub fn apply_signal<R: Real>(
    rho: &mut DensityMatrix<R>,
    signal: &SignalSetting<R>,
    noise: &NoiseModel,
    interrogation_noise: bool,
) -> Result<(), SimError> {
    if signal.phases.len() != rho.n_qubits {
        return Err(SimError::PhaseCount { expected: rho.n_qubits, found: signal.phases.len() });
    }
    let segments = signal.echo_pulses as usize + 1;
    let seg = R::lit(segments as f64);
    let channel = if interrogation_noise && signal.t > R::zero() { Some(interrogation_superop(signal.t / seg, noise)?) } else { None };
    for s in 0..segments {
        let sign = if s % 2 == 0 { R::one() } else { -R::one() };
        let phases: Vec<R> = signal.phases.iter().map(|&p| sign * p / seg).collect();
        rho.apply_phases(&phases);
        if let Some(ch) = &channel {
            rho.apply_superop_all(ch);
        }
        if s + 1 < segments {
            rho.apply_x_all();
        }
    }
    Ok(())
}

/// Uniform-phase signal block.
pub fn apply_signal_block<R: Real>(rho: &mut DensityMatrix<R>, phi: R, t: R, noise: &NoiseModel, echo: bool) -> Result<(), SimError> {
    let signal = SignalSetting::uniform(rho.n_qubits, phi, t, u32::from(echo));
    apply_signal(rho, &signal, noise, noise.enabled.interrogation)
}

/// Runs encoder → signal → decoder from `|0…0⟩` with every stage's noise as
/// configured in `noise`.
pub fn run_circuit<R: Real>(circuit: &ConcreteCircuit<R>, signal: &SignalSetting<R>, noise: &NoiseModel) -> Result<DensityMatrix<R>, SimError> {
    run_circuit_staged(circuit, signal, noise, StageMask::from_noise(noise))
}

/// [`run_circuit`] with explicit per-stage noise switches.
pub fn run_circuit_staged<R: Real>(
    circuit: &ConcreteCircuit<R>,
    signal: &SignalSetting<R>,
    noise: &NoiseModel,
    stages: StageMask,
) -> Result<DensityMatrix<R>, SimError> {
    circuit.check_indices()?;
    let gn = GateNoise::new(noise)?;
    let mut rho = DensityMatrix::zero_state(circuit.n_qubits);
    for g in &circuit.encoder {
        gn.apply(&mut rho, g, stages.encoder_gates)?;
    }
    apply_signal(&mut rho, signal, noise, stages.interrogation)?;
    for g in &circuit.decoder {
        gn.apply(&mut rho, g, stages.decoder_gates)?;
    }
    Ok(rho)
}

/// Encoder output pushed through the φ-independent part of the signal block.
///
/// Interrogation decoherence is phase covariant, so every `Rz` in the signal
/// block can be moved past the channels and X pulses; the block then equals
/// "noise and pulses, followed by `Rz(±φ)`" with the sign flipped once per
/// pulse. One prepared state therefore serves every phase assignment.
pub struct PreparedSignal<'c, R: Real> {
    circuit: &'c ConcreteCircuit<R>,
    state: DensityMatrix<R>,
    sign: R,
    gate_noise: GateNoise<R>,
    decoder_noisy: bool,
}

impl<'c, R: Real> PreparedSignal<'c, R> {
    pub fn new(circuit: &'c ConcreteCircuit<R>, t: R, echo_pulses: u32, noise: &NoiseModel, stages: StageMask) -> Result<Self, SimError> {
        circuit.check_indices()?;
        let gate_noise = GateNoise::new(noise)?;
        let mut rho = DensityMatrix::zero_state(circuit.n_qubits);
        for g in &circuit.encoder {
            gate_noise.apply(&mut rho, g, stages.encoder_gates)?;
        }
        let zero = SignalSetting { phases: vec![R::zero(); circuit.n_qubits], t, echo_pulses };
        apply_signal(&mut rho, &zero, noise, stages.interrogation)?;
        let sign = if echo_pulses % 2 == 0 { R::one() } else { -R::one() };
        Ok(PreparedSignal { circuit, state: rho, sign, gate_noise, decoder_noisy: stages.decoder_gates })
    }

    /// State right after the signal block for the given per-qubit phases.
    pub fn after_signal(&self, phases: &[R]) -> Result<DensityMatrix<R>, SimError> {
        if phases.len() != self.circuit.n_qubits {
            return Err(SimError::PhaseCount { expected: self.circuit.n_qubits, found: phases.len() });
        }
        let mut rho = self.state.clone();
        let signed: Vec<R> = phases.iter().map(|&p| self.sign * p).collect();
        rho.apply_phases(&signed);
        Ok(rho)
    }

    /// Final state for the given per-qubit phases.
    pub fn finish(&self, phases: &[R]) -> Result<DensityMatrix<R>, SimError> {
        let mut rho = self.after_signal(phases)?;
        for g in &self.circuit.decoder {
            self.gate_noise.apply(&mut rho, g, self.decoder_noisy)?;
        }
        Ok(rho)
    }
}

/// Shot count and seed for sampled measurement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Sampling {
    pub shots: u64,
    pub seed: u64,
}

/// Z-basis populations, then readout confusion (if enabled), then optional
/// multinomial sampling.
pub fn measure<R: Real>(rho: &DensityMatrix<R>, noise: &NoiseModel, sampling: Option<Sampling>) -> Result<OutcomeDistribution<R>, SimError> {
    let mut dist = OutcomeDistribution { n_qubits: rho.n_qubits, probs: rho.probabilities() };
    let total = dist.total();
    if total > R::zero() {
        for p in &mut dist.probs {
            *p = *p / total;
        }
    }
    if noise.enabled.readout {
        dist = readout_confusion(&dist, noise.p_readout)?;
    }
    Ok(match sampling {
        Some(s) => dist.sample(s.shots, s.seed),
        None => dist,
    })
}

/// Something that turns a concrete circuit and a signal into an outcome
/// distribution (the simulator's stand-in for hardware).
pub trait EvaluationBackend<R: Real>: Sync {
    fn evaluate(&self, circuit: &ConcreteCircuit<R>, signal: &SignalSetting<R>, noise: &NoiseModel, seed: u64) -> Result<OutcomeDistribution<R>, SimError>;

    /// Evaluates the same circuit under several per-qubit phase assignments.
    /// Evaluation `i` uses seed `derive_seed(seed, i)`.
    fn evaluate_many(
        &self,
        circuit: &ConcreteCircuit<R>,
        phase_sets: &[Vec<R>],
        t: R,
        echo_pulses: u32,
        noise: &NoiseModel,
        seed: u64,
    ) -> Result<Vec<OutcomeDistribution<R>>, SimError> {
        phase_sets
            .iter()
            .enumerate()
            .map(|(i, phases)| {
                let signal = SignalSetting { phases: phases.clone(), t, echo_pulses };
                self.evaluate(circuit, &signal, noise, crate::derive_seed(seed, i as u64))
            })
            .collect()
    }

    /// Probability floor used in CFI denominators.
    fn epsilon_floor(&self) -> R;

    fn is_exact(&self) -> bool;
}

/// Deterministic exact probabilities.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExactBackend;

impl<R: Real> EvaluationBackend<R> for ExactBackend {
    fn evaluate(&self, circuit: &ConcreteCircuit<R>, signal: &SignalSetting<R>, noise: &NoiseModel, _seed: u64) -> Result<OutcomeDistribution<R>, SimError> {
        measure(&run_circuit(circuit, signal, noise)?, noise, None)
    }

    fn evaluate_many(
        &self,
        circuit: &ConcreteCircuit<R>,
        phase_sets: &[Vec<R>],
        t: R,
        echo_pulses: u32,
        noise: &NoiseModel,
        _seed: u64,
    ) -> Result<Vec<OutcomeDistribution<R>>, SimError> {
        let prepared = PreparedSignal::new(circuit, t, echo_pulses, noise, StageMask::from_noise(noise))?;
        phase_sets.iter().map(|p| measure(&prepared.finish(p)?, noise, None)).collect()
    }

    fn epsilon_floor(&self) -> R {
        R::lit(1e-12)
    }

    fn is_exact(&self) -> bool {
        true
    }
}

/// Exact probabilities resampled with a fixed number of shots.
#[derive(Clone, Copy, Debug)]
pub struct SampledBackend {
    pub shots: u64,
}

impl SampledBackend {
    pub fn new(shots: u64) -> Self {
        assert!(shots > 0, "shot count must be positive");
        SampledBackend { shots }
    }
}

impl<R: Real> EvaluationBackend<R> for SampledBackend {
    fn evaluate(&self, circuit: &ConcreteCircuit<R>, signal: &SignalSetting<R>, noise: &NoiseModel, seed: u64) -> Result<OutcomeDistribution<R>, SimError> {
        measure(&run_circuit(circuit, signal, noise)?, noise, Some(Sampling { shots: self.shots, seed }))
    }

    fn evaluate_many(
        &self,
        circuit: &ConcreteCircuit<R>,
        phase_sets: &[Vec<R>],
        t: R,
        echo_pulses: u32,
        noise: &NoiseModel,
        seed: u64,
    ) -> Result<Vec<OutcomeDistribution<R>>, SimError> {
        let exact = ExactBackend.evaluate_many(circuit, phase_sets, t, echo_pulses, noise, seed)?;
        Ok(exact
            .into_iter()
            .enumerate()
            .map(|(i, d)| d.sample(self.shots, crate::derive_seed(seed, i as u64)))
            .collect())
    }

    fn epsilon_floor(&self) -> R {
        R::lit(0.5 / self.shots as f64)
    }

    fn is_exact(&self) -> bool {
        false
    }
}
