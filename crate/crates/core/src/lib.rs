//! Noise-aware learning of quantum sensing circuits.
//!
//! The crate simulates encoder → signal → decoder sensing circuits as dense
//! density matrices under gate, interrogation and readout noise, scores them
//! with classical/quantum Fisher information, and searches encoder/decoder
//! structures and angles that maximize the signal-to-noise ratio per unit
//! time.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the `*64` aliases
//! below are what the command-line harness uses.

pub mod ansatz;
pub mod baselines;
pub mod circuit;
pub mod linalg;
pub mod metrics;
pub mod noise;
pub mod optimizer;
pub mod quadrature;
pub mod scalar;
pub mod simulator;

pub use circuit::{
    bind_parameters, gate_unitary, validate_structure, CircuitError, CircuitStructure, ConcreteCircuit, ConnectivityGraph, Gate, GateKind,
    Hyperparams, Param, ParameterAssignment, SignalSpec, Violation,
};
pub use noise::{GateDurations, KrausChannel, NoiseError, NoiseFlags, NoiseModel};
pub use ansatz::{is_degenerate, propose, AnsatzError};
pub use baselines::{baseline_t_sweep, build_baseline, build_baseline_structure, BaselineKind};
pub use metrics::{cfi_phi, evaluate_objective, objective, qfi_phi, snr_bound, stage_qfi_decomposition, MetrologyObjective, ObjectiveConfig, ObjectiveReport, SignalModel, Stage};
pub use optimizer::{optimize_continuous, outer_loop, HyperSchedule, OptimizerKind, OptimizerSettings, SearchResult, StructureEvaluator};
pub use scalar::Real;
pub use simulator::{DensityMatrix, EvaluationBackend, ExactBackend, OutcomeDistribution, SampledBackend, SignalSetting, SimError};

pub type DensityMatrix64 = DensityMatrix<f64>;
pub type DensityMatrix32 = DensityMatrix<f32>;
pub type ConcreteCircuit64 = ConcreteCircuit<f64>;
pub type OutcomeDistribution64 = OutcomeDistribution<f64>;
pub type SignalSetting64 = SignalSetting<f64>;
pub type ObjectiveReport64 = ObjectiveReport<f64>;

/// SplitMix64-style derivation of independent child seeds.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
