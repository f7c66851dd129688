//! Experiment drivers: scaling, ablations, noise decomposition and the
//! signal-distribution study.

use std::fmt;
use std::str::FromStr;

use metroforge::baselines::{baseline_t_sweep, build_baseline, build_baseline_structure, BaselineKind};
use metroforge::circuit::ConcreteCircuit;
use metroforge::metrics::{snr_bound, stage_qfi_decomposition, MetrologyObjective, SignalModel};
use metroforge::noise::{NoiseFlags, NoiseModel};
use metroforge::optimizer::{outer_loop, StructureEvaluator};
use metroforge::quadrature::{normal_rule, uniform_rule};
use metroforge::simulator::{EvaluationBackend, ExactBackend, OutcomeDistribution, SampledBackend, SignalSetting, SimError};
use metroforge::{derive_seed, CircuitStructure};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::record::{DecompositionRow, FailureRow, ResultRecord, ResultRow, SearchEntry};
use crate::HarnessError;

/// Protocol label of searched circuits.
pub const OPTIMIZED: &str = "optimized";
/// Signal study: searched on the actual distribution.
pub const OPTIMIZED_ACTUAL: &str = "optimized-actual";
/// Signal study: searched on the uniform distribution, scored on the actual one.
pub const OPTIMIZED_UNIFORM: &str = "optimized-uniform";

/// Exact or shot-sampled evaluation, picked by the config.
#[derive(Clone, Copy, Debug)]
pub enum Backend {
    Exact(ExactBackend),
    Sampled(SampledBackend),
}

impl Backend {
    pub fn for_config(config: &ExperimentConfig) -> Self {
        match config.shots {
            Some(s) => Backend::Sampled(SampledBackend::new(s)),
            None => Backend::Exact(ExactBackend),
        }
    }
}

impl EvaluationBackend<f64> for Backend {
    fn evaluate(&self, circuit: &ConcreteCircuit<f64>, signal: &SignalSetting<f64>, noise: &NoiseModel, seed: u64) -> Result<OutcomeDistribution<f64>, SimError> {
        match self {
            Backend::Exact(b) => b.evaluate(circuit, signal, noise, seed),
            Backend::Sampled(b) => b.evaluate(circuit, signal, noise, seed),
        }
    }

    fn evaluate_many(
        &self,
        circuit: &ConcreteCircuit<f64>,
        phase_sets: &[Vec<f64>],
        t: f64,
        echo_pulses: u32,
        noise: &NoiseModel,
        seed: u64,
    ) -> Result<Vec<OutcomeDistribution<f64>>, SimError> {
        match self {
            Backend::Exact(b) => b.evaluate_many(circuit, phase_sets, t, echo_pulses, noise, seed),
            Backend::Sampled(b) => b.evaluate_many(circuit, phase_sets, t, echo_pulses, noise, seed),
        }
    }

    fn epsilon_floor(&self) -> f64 {
        match self {
            Backend::Exact(b) => EvaluationBackend::<f64>::epsilon_floor(b),
            Backend::Sampled(b) => EvaluationBackend::<f64>::epsilon_floor(b),
        }
    }

    fn is_exact(&self) -> bool {
        matches!(self, Backend::Exact(_))
    }
}

/// Noise-model modifications studied one at a time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    RemoveGateNoise,
    RemoveReadoutNoise,
    /// T1 and T2 both ten times longer.
    #[serde(rename = "suppress-t1t2-x10")]
    SuppressT1T2x10,
}

impl Ablation {
    pub const ALL: [Ablation; 3] = [Ablation::RemoveGateNoise, Ablation::RemoveReadoutNoise, Ablation::SuppressT1T2x10];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::RemoveGateNoise => "remove-gate-noise",
            Ablation::RemoveReadoutNoise => "remove-readout-noise",
            Ablation::SuppressT1T2x10 => "suppress-t1t2-x10",
        }
    }

    pub fn apply(self, noise: &NoiseModel) -> NoiseModel {
        match self {
            Ablation::RemoveGateNoise => noise.with_flags(NoiseFlags { gate: false, ..noise.enabled }),
            Ablation::RemoveReadoutNoise => noise.with_flags(NoiseFlags { readout: false, ..noise.enabled }),
            Ablation::SuppressT1T2x10 => noise.with_lifetimes_scaled(10.0),
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown ablation '{s}' (expected remove-gate-noise, remove-readout-noise or suppress-t1t2-x10)"))
    }
}

fn runtime(e: impl fmt::Display) -> HarnessError {
    HarnessError::Runtime(e.to_string())
}

/// Shared context for one noise model and signal model.
struct Context<'a> {
    config: &'a ExperimentConfig,
    noise: NoiseModel,
    objective: MetrologyObjective<Backend>,
}

impl<'a> Context<'a> {
    fn new(config: &'a ExperimentConfig, noise: NoiseModel, signal: SignalModel) -> Self {
        let objective = MetrologyObjective {
            backend: Backend::for_config(config),
            noise: noise.clone(),
            signal,
            t_unit: config.objective.t_unit,
            t_overhead: config.objective.t_overhead,
            epsilon_floor: config.objective.epsilon_floor,
            seed: derive_seed(config.seed, u64::MAX),
        };
        Context { config, noise, objective }
    }

    fn row(&self, experiment: &str, n: usize, protocol: &str, circuit: &ConcreteCircuit<f64>, t: f64) -> Result<ResultRow, SimError> {
        let r = self.objective.report_with_qfi(circuit, t)?;
        Ok(ResultRow {
            experiment: experiment.to_string(),
            n,
            protocol: protocol.to_string(),
            cfi_phi: r.cfi_phi,
            cfi_omega: r.cfi_omega,
            qfi: r.qfi_phi,
            t_star_s: t,
            objective: r.objective_value,
            snr_bound: snr_bound(r.cfi_omega, self.config.repetitions),
            seed: self.config.seed,
        })
    }

    fn baseline_row(&self, experiment: &str, n: usize, kind: BaselineKind) -> Result<ResultRow, HarnessError> {
        check_baseline(self.config, kind, n)?;
        let sweep = baseline_t_sweep(kind, n, &self.objective, &self.config.t_grid()).map_err(runtime)?;
        self.row(experiment, n, kind.name(), &build_baseline(kind, n), sweep.t).map_err(runtime)
    }

    /// Structure search; with `fixed_t` the interrogation time is pinned.
    fn search(&self, experiment: &str, n: usize, protocol: &str, seed: u64, fixed_t: Option<f64>) -> Result<(ResultRow, SearchEntry, ConcreteCircuit<f64>), HarnessError> {
        let graph = self.config.graph.graph(n)?;
        let schedule = self.config.schedule(&graph);
        let settings = self.config.optimizer_settings(self.noise.t2);
        let result = match fixed_t {
            None => outer_loop(n, &graph, &schedule, self.config.search.iter_max, &self.objective, &settings, seed),
            Some(t) => {
                let pinned = |s: &CircuitStructure, theta: &[f64], _t: f64| self.objective.evaluate(s, theta, t);
                outer_loop(n, &graph, &schedule, self.config.search.iter_max, &pinned, &settings, seed)
            }
        }
        .map_err(runtime)?;
        let structure = result.best_structure.as_ref().ok_or_else(|| runtime(format!("no structure could be proposed for {n} qubits")))?;
        let circuit = structure.bind(&result.best_theta).map_err(runtime)?;
        let t = fixed_t.unwrap_or(result.best_t);
        let row = self.row(experiment, n, protocol, &circuit, t).map_err(runtime)?;
        let entry = SearchEntry { experiment: experiment.to_string(), n, protocol: protocol.to_string(), result };
        Ok((row, entry, circuit))
    }
}

/// Baselines use an ascending CNOT chain; a graph without one makes them
/// inapplicable rather than rerouted.
fn check_baseline(config: &ExperimentConfig, kind: BaselineKind, n: usize) -> Result<(), HarnessError> {
    let violations = build_baseline_structure(kind, n).connectivity_violations(&config.graph.graph(n)?);
    match violations.first() {
        None => Ok(()),
        Some(v) => Err(HarnessError::Runtime(format!("{kind} is inapplicable on this graph for {n} qubits: {v}"))),
    }
}

fn search_seed(config: &ExperimentConfig, n: usize, stream: u64) -> u64 {
    derive_seed(derive_seed(config.seed, n as u64), stream)
}

/// Tuned baselines plus a searched circuit for every configured register
/// size, under `noise`.
fn scaling(config: &ExperimentConfig, noise: NoiseModel, experiment: &str, with_search: bool) -> ResultRecord {
    let ctx = Context::new(config, noise, config.signal.model());
    let mut record = ResultRecord::new(config);
    for &n in &config.qubits {
        let outcome = (|| -> Result<(), HarnessError> {
            for kind in BaselineKind::ALL {
                record.rows.push(ctx.baseline_row(experiment, n, kind)?);
            }
            if with_search {
                let (row, entry, _) = ctx.search(experiment, n, OPTIMIZED, search_seed(config, n, 0), None)?;
                record.rows.push(row);
                record.searches.push(entry);
            }
            Ok(())
        })();
        if let Err(e) = outcome {
            record.failures.push(FailureRow { experiment: experiment.to_string(), n, error: e.to_string() });
        }
    }
    record
}

pub fn run_scaling_study(config: &ExperimentConfig) -> ResultRecord {
    scaling(config, config.noise.clone(), &config.experiment, true)
}

/// Baseline rows only (no search).
pub fn run_baselines(config: &ExperimentConfig) -> ResultRecord {
    scaling(config, config.noise.clone(), &config.experiment, false)
}

pub fn run_ablation_study(config: &ExperimentConfig, ablation: Ablation) -> ResultRecord {
    let experiment = format!("{}/{}", config.experiment, ablation.name());
    scaling(config, ablation.apply(&config.noise), &experiment, true)
}

/// Searched circuits only.
pub fn run_optimize(config: &ExperimentConfig) -> ResultRecord {
    let ctx = Context::new(config, config.noise.clone(), config.signal.model());
    let mut record = ResultRecord::new(config);
    for &n in &config.qubits {
        match ctx.search(&config.experiment, n, OPTIMIZED, search_seed(config, n, 0), None) {
            Ok((row, entry, _)) => {
                record.rows.push(row);
                record.searches.push(entry);
            }
            Err(e) => record.failures.push(FailureRow { experiment: config.experiment.clone(), n, error: e.to_string() }),
        }
    }
    record
}

/// One baseline at a fixed time, or tuned over the time grid.
pub fn run_baseline(config: &ExperimentConfig, kind: BaselineKind, n: usize, t: Option<f64>) -> Result<ResultRecord, HarnessError> {
    let ctx = Context::new(config, config.noise.clone(), config.signal.model());
    let mut record = ResultRecord::new(config);
    let row = match t {
        Some(t) => {
            check_baseline(config, kind, n)?;
            ctx.row(&config.experiment, n, kind.name(), &build_baseline(kind, n), t).map_err(runtime)?
        }
        None => ctx.baseline_row(&config.experiment, n, kind)?,
    };
    record.rows.push(row);
    Ok(record)
}

/// Per-stage information of each configured circuit at the fixed
/// decomposition time.
pub fn run_decomposition(config: &ExperimentConfig) -> Result<ResultRecord, HarnessError> {
    let section = config.decomposition.as_ref().ok_or_else(|| HarnessError::Config("decompose needs a [decomposition] section".into()))?;
    if config.signal.distribution.is_some() {
        return Err(HarnessError::Config("decompose needs a fixed-rate signal, not a distribution".into()));
    }
    let t = section.t;
    let phi = config.signal.omega * t;
    let ctx = Context::new(config, config.noise.clone(), config.signal.model());
    let mut record = ResultRecord::new(config);
    for &n in &config.qubits {
        let mut circuits: Vec<(String, ConcreteCircuit<f64>)> = Vec::new();
        for p in &section.protocols {
            let kind: BaselineKind = p.parse().map_err(HarnessError::Config)?;
            check_baseline(config, kind, n)?;
            circuits.push((kind.name().to_string(), build_baseline(kind, n)));
        }
        if section.include_optimized {
            match ctx.search(&config.experiment, n, OPTIMIZED, search_seed(config, n, 1), Some(t)) {
                Ok((_, entry, circuit)) => {
                    record.searches.push(entry);
                    circuits.push((OPTIMIZED.to_string(), circuit));
                }
                Err(e) => record.failures.push(FailureRow { experiment: config.experiment.clone(), n, error: e.to_string() }),
            }
        }
        for (protocol, circuit) in circuits {
            let stages = stage_qfi_decomposition(&circuit, phi, t, config.signal.echo_pulses, &config.noise).map_err(runtime)?;
            record.rows.push(ctx.row(&config.experiment, n, &protocol, &circuit, t).map_err(runtime)?);
            record.decomposition.extend(stages.into_iter().map(|s| DecompositionRow {
                experiment: config.experiment.clone(),
                n,
                protocol: protocol.clone(),
                stage: s.stage,
                value: s.value,
                region: s.region,
            }));
        }
    }
    Ok(record)
}

/// Experiment label of one standard deviation in the signal study.
pub fn stddev_label(experiment: &str, stddev: f64) -> String {
    format!("{experiment}/stddev={stddev}")
}

/// Searches once on the uniform angle distribution and once per Gaussian
/// width, scoring every circuit (and the tuned baselines) on the Gaussian.
pub fn run_signal_distribution_study(config: &ExperimentConfig) -> Result<ResultRecord, HarnessError> {
    let study = config.signal_study.as_ref().ok_or_else(|| HarnessError::Config("signal-study needs a [signal_study] section".into()))?;
    let echo = config.signal.echo_pulses;
    let uniform = SignalModel::Angles { nodes: uniform_rule(study.uniform.0, study.uniform.1, study.nodes).pairs(), echo_pulses: echo };
    let mut record = ResultRecord::new(config);
    for &n in &config.qubits {
        let uniform_ctx = Context::new(config, config.noise.clone(), uniform.clone());
        let label = format!("{}/uniform", config.experiment);
        let (_, uniform_entry, uniform_circuit) = match uniform_ctx.search(&label, n, OPTIMIZED_UNIFORM, search_seed(config, n, 2), None) {
            Ok(v) => v,
            Err(e) => {
                record.failures.push(FailureRow { experiment: label, n, error: e.to_string() });
                continue;
            }
        };
        let uniform_t = uniform_entry.result.best_t;
        record.searches.push(uniform_entry);
        for (i, &stddev) in study.stddevs.iter().enumerate() {
            let experiment = stddev_label(&config.experiment, stddev);
            let actual = SignalModel::Angles { nodes: normal_rule(study.mean, stddev, study.nodes).pairs(), echo_pulses: echo };
            let ctx = Context::new(config, config.noise.clone(), actual);
            let outcome = (|| -> Result<(), HarnessError> {
                for kind in BaselineKind::ALL {
                    record.rows.push(ctx.baseline_row(&experiment, n, kind)?);
                }
                let (row, entry, _) = ctx.search(&experiment, n, OPTIMIZED_ACTUAL, search_seed(config, n, 3 + i as u64), None)?;
                record.rows.push(row);
                record.searches.push(entry);
                record.rows.push(ctx.row(&experiment, n, OPTIMIZED_UNIFORM, &uniform_circuit, uniform_t).map_err(runtime)?);
                Ok(())
            })();
            if let Err(e) = outcome {
                record.failures.push(FailureRow { experiment, n, error: e.to_string() });
            }
        }
    }
    Ok(record)
}
