//! Experiment configuration (TOML) and its validation and hashing.

use std::path::{Path, PathBuf};

use metroforge::baselines::log_time_grid;
use metroforge::circuit::{ConnectivityGraph, Hyperparams, SignalSpec};
use metroforge::metrics::{ObjectiveConfig, SignalModel};
use metroforge::noise::NoiseModel;
use metroforge::optimizer::{HyperSchedule, OptimizerSettings};
use metroforge::quadrature::{normal_rule, uniform_rule};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::experiments::Ablation;
use crate::HarnessError;

/// Largest register the dense simulator is run at.
pub const MAX_QUBITS: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(default)]
    pub seed: u64,
    /// Register sizes to study.
    #[serde(default)]
    pub qubits: Vec<usize>,
    /// Shot count; exact probabilities when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    /// Repetitions `M` used for the SNR bound.
    #[serde(default = "one")]
    pub repetitions: u64,
    /// Noise modification used by the `ablation` subcommand.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ablation: Option<Ablation>,
    pub noise: NoiseModel,
    #[serde(default)]
    pub graph: Topology,
    pub signal: SignalConfig,
    #[serde(default)]
    pub objective: ObjectiveSection,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
    #[serde(default)]
    pub search: SearchSection,
    #[serde(default)]
    pub baseline: BaselineSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decomposition: Option<DecompositionSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal_study: Option<SignalStudySection>,
    #[serde(default)]
    pub output: OutputSection,
}

fn one() -> u64 {
    1
}

/// Connectivity used for every register size.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    #[default]
    Chain,
    AllToAll,
    /// Explicit undirected edges (only for a single register size).
    Edges(Vec<(usize, usize)>),
}

impl Topology {
    pub fn graph(&self, n: usize) -> Result<ConnectivityGraph, HarnessError> {
        match self {
            Topology::Chain => Ok(ConnectivityGraph::chain(n)),
            Topology::AllToAll => Ok(ConnectivityGraph::all_to_all(n)),
            Topology::Edges(e) => ConnectivityGraph::new(n, e.iter().copied()).map_err(|e| HarnessError::Config(format!("graph: {e}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalConfig {
    /// Phase accumulation rate in s⁻¹ (`φ = omega · t`).
    pub omega: f64,
    #[serde(default)]
    pub echo_pulses: u32,
    /// Distribution over the accumulated angle; replaces `omega · t`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<SignalDistribution>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalDistribution {
    #[serde(flatten)]
    pub kind: DistributionKind,
    /// Quadrature node count.
    #[serde(default = "default_nodes")]
    pub nodes: usize,
}

fn default_nodes() -> usize {
    9
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DistributionKind {
    Uniform { lo: f64, hi: f64 },
    Gaussian { mean: f64, stddev: f64 },
    PointMass { phi: f64 },
}

impl SignalDistribution {
    pub fn validate(&self) -> Result<(), String> {
        if self.nodes == 0 {
            return Err("distribution needs at least one quadrature node".into());
        }
        match self.kind {
            DistributionKind::Uniform { lo, hi } if !(lo.is_finite() && hi.is_finite() && lo < hi) => {
                Err(format!("uniform range must satisfy lo < hi, got [{lo}, {hi}]"))
            }
            DistributionKind::Gaussian { stddev, mean } if !(stddev > 0.0 && mean.is_finite() && stddev.is_finite()) => {
                Err(format!("gaussian stddev must be positive, got {stddev}"))
            }
            DistributionKind::PointMass { phi } if !phi.is_finite() => Err("point mass must be finite".into()),
            _ => Ok(()),
        }
    }

    /// Weighted phase nodes.
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        match self.kind {
            DistributionKind::Uniform { lo, hi } => uniform_rule(lo, hi, self.nodes).pairs(),
            DistributionKind::Gaussian { mean, stddev } => normal_rule(mean, stddev, self.nodes).pairs(),
            DistributionKind::PointMass { phi } => vec![(phi, 1.0)],
        }
    }
}

impl SignalConfig {
    pub fn model(&self) -> SignalModel {
        match &self.distribution {
            None => SignalModel::Frequency(SignalSpec { omega: self.omega, echo_pulses: self.echo_pulses }),
            Some(d) => SignalModel::Angles { nodes: d.nodes(), echo_pulses: self.echo_pulses },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSection {
    #[serde(default = "unit_time")]
    pub t_unit: f64,
    /// Fixed overhead in seconds; derived from gate durations when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_overhead: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_floor: Option<f64>,
}

fn unit_time() -> f64 {
    1.0
}

impl Default for ObjectiveSection {
    fn default() -> Self {
        ObjectiveSection { t_unit: 1.0, t_overhead: None, epsilon_floor: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    #[serde(default = "default_iter_max")]
    pub iter_max: usize,
    /// Hyperparameter choices; every single-layer `(k, m)` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hyper: Option<Vec<Hyperparams>>,
}

fn default_iter_max() -> usize {
    30
}

impl Default for SearchSection {
    fn default() -> Self {
        SearchSection { iter_max: default_iter_max(), hyper: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSection {
    /// Log-spaced points across the optimizer's `t_bounds`.
    #[serde(default = "default_grid")]
    pub t_grid_points: usize,
}

fn default_grid() -> usize {
    200
}

impl Default for BaselineSection {
    fn default() -> Self {
        BaselineSection { t_grid_points: default_grid() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompositionSection {
    /// Fixed interrogation time in seconds.
    pub t: f64,
    /// Baseline protocols to decompose.
    #[serde(default = "all_baselines")]
    pub protocols: Vec<String>,
    /// Also search a circuit (at the fixed time) and decompose it.
    #[serde(default)]
    pub include_optimized: bool,
}

fn all_baselines() -> Vec<String> {
    ["parallel-ramsey", "ghz-h", "ghz-inv"].map(String::from).to_vec()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalStudySection {
    /// Mean of the actual (Gaussian) angle distribution.
    pub mean: f64,
    pub stddevs: Vec<f64>,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    /// Range of the reference uniform distribution.
    #[serde(default = "full_turn")]
    pub uniform: (f64, f64),
}

fn full_turn() -> (f64, f64) {
    (0.0, std::f64::consts::TAU)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

fn cfg(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let c: ExperimentConfig = toml::from_str(text).map_err(|e| cfg(format!("parse error: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| cfg(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.experiment.trim().is_empty() {
            return Err(cfg("experiment name is empty"));
        }
        self.noise.validate().map_err(|e| cfg(format!("noise: {e}")))?;
        self.optimizer.validate().map_err(|e| cfg(format!("optimizer: {e}")))?;
        self.objective_config(0.0).validate().map_err(|e| cfg(format!("objective: {e}")))?;
        if let Some(t) = self.objective.t_overhead {
            if !(t >= 0.0) {
                return Err(cfg(format!("objective: t_overhead must be >= 0, got {t}")));
            }
        }
        if !self.signal.omega.is_finite() {
            return Err(cfg("signal: omega must be finite"));
        }
        if let Some(d) = &self.signal.distribution {
            d.validate().map_err(|e| cfg(format!("signal.distribution: {e}")))?;
        }
        if self.repetitions == 0 {
            return Err(cfg("repetitions must be at least 1"));
        }
        if self.shots == Some(0) {
            return Err(cfg("shots must be positive"));
        }
        if self.search.iter_max == 0 {
            return Err(cfg("search: iter_max must be at least 1"));
        }
        if self.baseline.t_grid_points == 0 {
            return Err(cfg("baseline: t_grid_points must be at least 1"));
        }
        for &n in &self.qubits {
            if n == 0 || n > MAX_QUBITS {
                return Err(cfg(format!("qubits: {n} outside 1..={MAX_QUBITS}")));
            }
            let graph = self.graph.graph(n)?;
            if let Some(hyper) = &self.search.hyper {
                if hyper.is_empty() {
                    return Err(cfg("search: hyper list is empty"));
                }
                if let Some(h) = hyper.iter().find(|h| !h.is_valid_for(&graph)) {
                    return Err(cfg(format!("search: {h:?} is invalid for {n} qubits")));
                }
            }
        }
        if let Some(d) = &self.decomposition {
            if !(d.t > 0.0) {
                return Err(cfg(format!("decomposition: t must be positive, got {}", d.t)));
            }
            for p in &d.protocols {
                p.parse::<metroforge::BaselineKind>().map_err(|e| cfg(format!("decomposition: {e}")))?;
            }
        }
        if let Some(s) = &self.signal_study {
            if s.stddevs.is_empty() || s.stddevs.iter().any(|&v| !(v > 0.0)) {
                return Err(cfg("signal_study: stddevs must be a non-empty list of positive values"));
            }
            if s.nodes == 0 || !(s.uniform.0 < s.uniform.1) {
                return Err(cfg("signal_study: needs nodes >= 1 and a non-empty uniform range"));
            }
        }
        Ok(())
    }

    /// Canonical TOML text; this is what gets echoed and hashed.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }

    pub fn hash(&self) -> String {
        hash_text(&self.canonical())
    }

    pub fn objective_config(&self, t_overhead: f64) -> ObjectiveConfig {
        ObjectiveConfig { t_overhead, t_unit: self.objective.t_unit, epsilon_floor: self.objective.epsilon_floor }
    }

    pub fn schedule(&self, graph: &ConnectivityGraph) -> HyperSchedule {
        match &self.search.hyper {
            Some(choices) => HyperSchedule { choices: choices.clone() },
            None => HyperSchedule::single_layer(graph),
        }
    }

    /// Optimizer settings whose starting time follows `t2` (10 µs clipped
    /// to `[T2/10, T2]`, then to `t_bounds`).
    pub fn optimizer_settings(&self, t2: f64) -> OptimizerSettings {
        let base = self.optimizer;
        OptimizerSettings { t_init: base.with_t2(t2).t_init.clamp(base.t_bounds.0, base.t_bounds.1), ..base }
    }

    pub fn t_grid(&self) -> Vec<f64> {
        let (lo, hi) = self.optimizer.t_bounds;
        log_time_grid(lo, hi, self.baseline.t_grid_points)
    }
}

/// Hex SHA-256 of a text document.
pub fn hash_text(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
experiment = "t"
qubits = [2]
[noise]
p1 = 0.01
p2 = 0.03
p_readout = 0.05
t1 = 52.2e-6
t2 = 62.8e-6
[signal]
omega = 1e4
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.search.iter_max, 30);
        assert_eq!(c.graph, Topology::Chain);
        assert_eq!(c.repetitions, 1);
        assert_eq!(c.optimizer_settings(c.noise.t2).t_init, 10e-6);
    }

    #[test]
    fn canonical_text_round_trips() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        let again = ExperimentConfig::from_toml(&c.canonical()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.hash(), hash_text(&again.canonical()));
    }

    #[test]
    fn unphysical_lifetimes_rejected() {
        let bad = MINIMAL.replace("t2 = 62.8e-6", "t2 = 200e-6");
        match ExperimentConfig::from_toml(&bad) {
            Err(HarnessError::Config(m)) => assert!(m.contains("T2"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn distribution_sections() {
        let text = format!("{MINIMAL}[signal.distribution]\nkind = \"gaussian\"\nmean = 1.0\nstddev = 0.1\n");
        let c = ExperimentConfig::from_toml(&text).unwrap();
        match c.signal.model() {
            SignalModel::Angles { nodes, .. } => assert_eq!(nodes.len(), 9),
            other => panic!("{other:?}"),
        }
        let zero = text.replace("stddev = 0.1", "stddev = 0.0");
        assert!(matches!(ExperimentConfig::from_toml(&zero), Err(HarnessError::Config(_))));
        let point = format!("{MINIMAL}[signal.distribution]\nkind = \"point-mass\"\nphi = 0.7\n");
        let c = ExperimentConfig::from_toml(&point).unwrap();
        assert_eq!(c.signal.model(), SignalModel::Angles { nodes: vec![(0.7, 1.0)], echo_pulses: 0 });
    }

    #[test]
    fn unknown_fields_and_bad_ranges_rejected() {
        assert!(ExperimentConfig::from_toml(&format!("{MINIMAL}bogus = 1\n")).is_err());
        assert!(ExperimentConfig::from_toml(&MINIMAL.replace("qubits = [2]", "qubits = [9]")).is_err());
    }
}
