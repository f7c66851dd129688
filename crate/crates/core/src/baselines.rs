//! Reference sensing protocols: parallel Ramsey and GHZ with either a
//! uniform-H or an inverse-symmetric decoder.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::circuit::{CircuitStructure, ConcreteCircuit, Gate, Param};
use crate::metrics::{MetrologyObjective, ObjectiveReport};
use crate::scalar::Real;
use crate::simulator::{EvaluationBackend, SimError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    ParallelRamsey,
    GhzH,
    GhzInv,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] = [BaselineKind::ParallelRamsey, BaselineKind::GhzH, BaselineKind::GhzInv];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::ParallelRamsey => "parallel-ramsey",
            BaselineKind::GhzH => "ghz-h",
            BaselineKind::GhzInv => "ghz-inv",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BaselineKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown baseline '{s}' (expected parallel-ramsey, ghz-h or ghz-inv)"))
    }
}

fn h<P>(qubit: usize) -> Gate<P> {
    Gate::H { qubit }
}

/// Ascending CNOT chain `0→1, 1→2, …`.
fn chain<P>(n: usize) -> Vec<Gate<P>> {
    (1..n).map(|q| Gate::Cnot { control: q - 1, target: q }).collect()
}

fn gates<P>(kind: BaselineKind, n: usize) -> (Vec<Gate<P>>, Vec<Gate<P>>) {
    match kind {
        BaselineKind::ParallelRamsey => ((0..n).map(h).collect(), (0..n).map(h).collect()),
        BaselineKind::GhzH => {
            let mut enc = vec![h(0)];
            enc.extend(chain(n));
            (enc, (0..n).map(h).collect())
        }
        BaselineKind::GhzInv => {
            let mut enc = vec![h(0)];
            enc.extend(chain(n));
            let mut dec: Vec<Gate<P>> = chain(n).into_iter().rev().collect();
            dec.push(h(0));
            (enc, dec)
        }
    }
}

/// Parameter-free structure of a baseline.
pub fn build_baseline_structure(kind: BaselineKind, n_qubits: usize) -> CircuitStructure {
    assert!(n_qubits >= 1, "baselines need at least one qubit");
    let (enc, dec) = gates::<Param>(kind, n_qubits);
    CircuitStructure::fixed(n_qubits, enc, dec)
}

pub fn build_baseline<R: Real>(kind: BaselineKind, n_qubits: usize) -> ConcreteCircuit<R> {
    assert!(n_qubits >= 1, "baselines need at least one qubit");
    let (encoder, decoder) = gates(kind, n_qubits);
    ConcreteCircuit { n_qubits, encoder, decoder }
}

/// `points` log-spaced times from `t_min` to `t_max` inclusive.
pub fn log_time_grid(t_min: f64, t_max: f64, points: usize) -> Vec<f64> {
    assert!(t_min > 0.0 && t_max >= t_min && points >= 1);
    if points == 1 {
        return vec![t_min];
    }
    let (a, b) = (t_min.ln(), t_max.ln());
    let mut grid: Vec<f64> = (0..points).map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp()).collect();
    grid[0] = t_min;
    grid[points - 1] = t_max;
    grid
}

/// Best point of a baseline time sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineSweep {
    pub kind: BaselineKind,
    pub n_qubits: usize,
    pub t: f64,
    pub report: ObjectiveReport<f64>,
}

/// Evaluates the objective at every grid time and keeps the argmax (ties go
/// to the smaller `t`).
pub fn baseline_t_sweep<B: EvaluationBackend<f64>>(
    kind: BaselineKind,
    n_qubits: usize,
    objective: &MetrologyObjective<B>,
    t_grid: &[f64],
) -> Result<BaselineSweep, SimError> {
    assert!(!t_grid.is_empty(), "empty t grid");
    let circuit = build_baseline::<f64>(kind, n_qubits);
    let mut ts = t_grid.to_vec();
    ts.sort_by(f64::total_cmp);
    let mut best: Option<ObjectiveReport<f64>> = None;
    for &t in &ts {
        let r = objective.report(&circuit, t)?;
        if best.as_ref().map_or(true, |b| r.objective_value > b.objective_value) {
            best = Some(r);
        }
    }
    let report = best.expect("non-empty grid");
    Ok(BaselineSweep { kind, n_qubits, t: report.t, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{validate_structure, ConnectivityGraph, SignalSpec};
    use crate::metrics::{cfi_phi, SignalModel};
    use crate::noise::NoiseModel;
    use crate::simulator::ExactBackend;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn ghz_h_gate_list() {
        let c = build_baseline::<f64>(BaselineKind::GhzH, 3);
        assert_eq!(
            c.encoder,
            vec![Gate::H { qubit: 0 }, Gate::Cnot { control: 0, target: 1 }, Gate::Cnot { control: 1, target: 2 }]
        );
        assert_eq!(c.decoder, (0..3).map(|q| Gate::H { qubit: q }).collect::<Vec<_>>());
    }

    #[test]
    fn ghz_inv_decoder_is_reversed_encoder() {
        let c = build_baseline::<f64>(BaselineKind::GhzInv, 3);
        assert_eq!(
            c.decoder,
            vec![Gate::Cnot { control: 1, target: 2 }, Gate::Cnot { control: 0, target: 1 }, Gate::H { qubit: 0 }]
        );
        let s = build_baseline_structure(BaselineKind::GhzInv, 4);
        assert!(validate_structure(&s, &ConnectivityGraph::chain(4)).is_ok());
    }

    #[test]
    fn noiseless_cfi_identities() {
        let off = NoiseModel::noiseless();
        for n in 1..=4 {
            let ramsey = cfi_phi(&ExactBackend, &build_baseline(BaselineKind::ParallelRamsey, n), PI / 6.0, 1e-5, 0, &off, 0).unwrap();
            assert_abs_diff_eq!(ramsey.value, n as f64, epsilon = 1e-8);
            for kind in [BaselineKind::GhzH, BaselineKind::GhzInv] {
                let v = cfi_phi(&ExactBackend, &build_baseline(kind, n), PI / 6.0, 1e-5, 0, &off, 0).unwrap().value;
                assert_abs_diff_eq!(v, (n * n) as f64, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn noiseless_ghz_variants_share_the_fringe() {
        let off = NoiseModel::noiseless();
        for n in 1..=5 {
            let dim = 1usize << n;
            for i in 0..17 {
                let phi = 2.0 * PI * i as f64 / 16.0;
                let h = crate::metrics::exact_distribution(&build_baseline(BaselineKind::GhzH, n), phi, 1e-5, 0, &off).unwrap();
                let inv = crate::metrics::exact_distribution(&build_baseline(BaselineKind::GhzInv, n), phi, 1e-5, 0, &off).unwrap();
                let even: f64 = (0..dim).filter(|x| x.count_ones() % 2 == 0).map(|x| h[x]).sum();
                let first_zero: f64 = (0..dim / 2).map(|x| inv[x]).sum();
                assert_abs_diff_eq!(even, first_zero, epsilon = 1e-9);
                assert_abs_diff_eq!(even, (n as f64 * phi / 2.0).cos().powi(2), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn names_round_trip() {
        for k in BaselineKind::ALL {
            assert_eq!(k.name().parse::<BaselineKind>().unwrap(), k);
        }
        assert!("ghz".parse::<BaselineKind>().is_err());
    }

    #[test]
    fn noiseless_sweep_picks_longest_time() {
        let mut obj = MetrologyObjective::new(ExactBackend, NoiseModel::noiseless(), SignalModel::Frequency(SignalSpec::new(1e3)));
        obj.t_overhead = Some(0.0);
        let grid = log_time_grid(1e-6, 5e-5, 12);
        let best = baseline_t_sweep(BaselineKind::ParallelRamsey, 2, &obj, &grid).unwrap();
        assert_eq!(best.t, *grid.last().unwrap());
        let single = baseline_t_sweep(BaselineKind::GhzH, 2, &obj, &[3e-6]).unwrap();
        assert_eq!(single.t, 3e-6);
    }

    #[test]
    fn full_noise_ramsey_probes_longer_than_ghz() {
        let obj = MetrologyObjective::new(ExactBackend, NoiseModel::superconducting_average(), SignalModel::Frequency(SignalSpec::new(1e4)));
        let grid = log_time_grid(1e-6, 1e-4, 60);
        let r = baseline_t_sweep(BaselineKind::ParallelRamsey, 3, &obj, &grid).unwrap();
        let g = baseline_t_sweep(BaselineKind::GhzH, 3, &obj, &grid).unwrap();
        assert!(r.t > g.t, "ramsey t* {} vs ghz-h t* {}", r.t, g.t);
    }
}
