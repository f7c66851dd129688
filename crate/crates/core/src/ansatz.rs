//! Random encoder/decoder structure proposals under gate-set and
//! connectivity constraints.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::circuit::{validate_structure, CircuitStructure, ConnectivityGraph, Gate, Hyperparams, Param};

/// Structures drawn per `propose` call before giving up.
pub const RETRY_BUDGET: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnsatzError {
    #[error("hyperparameters {0:?} are invalid for the connectivity graph")]
    InvalidHyperparams(Hyperparams),
    #[error("no non-degenerate structure for {hyper:?} after {attempts} draws")]
    ProposalExhausted { hyper: Hyperparams, attempts: usize },
}

fn u3(qubit: usize, first_slot: usize) -> Gate<Param> {
    Gate::U3 { qubit, theta: Param::slot(first_slot), phi: Param::slot(first_slot + 1), lambda: Param::slot(first_slot + 2) }
}

/// Draws one layer's CNOT pairs in order, or `None` when the draw dead-ends.
fn draw_pairs(rng: &mut ChaCha8Rng, candidates: &[(usize, usize)], m: usize, n: usize, controllable: Option<&mut BTreeSet<usize>>) -> Option<Vec<(usize, usize)>> {
    let mut controllable = controllable;
    let mut used = BTreeSet::new();
    let mut load = vec![0usize; n];
    let mut pairs = Vec::with_capacity(m);
    for _ in 0..m {
        let options: Vec<(usize, usize)> = candidates
            .iter()
            .copied()
            .filter(|&(c, t)| !used.contains(&(c, t)) && load[c] < 2 && load[t] < 2)
            .filter(|(c, _)| controllable.as_ref().map_or(true, |s| s.contains(c)))
            .collect();
        if options.is_empty() {
            return None;
        }
        let (c, t) = options[rng.gen_range(0..options.len())];
        used.insert((c, t));
        load[c] += 1;
        load[t] += 1;
        if let Some(s) = controllable.as_mut() {
            s.insert(t);
        }
        pairs.push((c, t));
    }
    Some(pairs)
}

fn draw(rng: &mut ChaCha8Rng, n: usize, graph: &ConnectivityGraph, hyper: Hyperparams) -> Option<CircuitStructure> {
    let candidates: Vec<(usize, usize)> = graph.edges().flat_map(|(a, b)| [(a, b), (b, a)]).collect();
    let mut encoder = Vec::with_capacity(hyper.l);
    let mut slot = 0;
    for layer in 0..hyper.l {
        let mut qubits = sample(rng, n, hyper.k).into_vec();
        qubits.sort_unstable();
        let mut gates: Vec<Gate<Param>> = Vec::with_capacity(hyper.k + hyper.m);
        for &q in &qubits {
            gates.push(u3(q, slot));
            slot += 3;
        }
        let mut controllable: BTreeSet<usize> = qubits.iter().copied().collect();
        let restrict = if layer == 0 { Some(&mut controllable) } else { None };
        let pairs = draw_pairs(rng, &candidates, hyper.m, n, restrict)?;
        gates.extend(pairs.into_iter().map(|(control, target)| Gate::Cnot { control, target }));
        encoder.push(gates);
    }
    let decoder = encoder
        .iter()
        .rev()
        .map(|layer| {
            layer
                .iter()
                .rev()
                .map(|g| match g {
                    Gate::U3 { qubit, .. } => {
                        let gate = u3(*qubit, slot);
                        slot += 3;
                        gate
                    }
                    other => other.clone(),
                })
                .collect()
        })
        .collect();
    Some(CircuitStructure { n_qubits: n, hyperparams: Some(hyper), encoder, decoder, n_params: hyper.n_params() })
}

/// Draws a random valid, non-degenerate structure: each encoder layer puts
/// U3 gates on `k` distinct qubits and then draws `m` CNOT pairs from the
/// graph; in the first layer every control must already carry a U3 or be the
/// target of an earlier pair. The decoder mirrors the encoder with fresh
/// angles.
pub fn propose(n_qubits: usize, graph: &ConnectivityGraph, hyper: Hyperparams, seed: u64) -> Result<CircuitStructure, AnsatzError> {
    if graph.n_qubits() != n_qubits || !hyper.is_valid_for(graph) {
        return Err(AnsatzError::InvalidHyperparams(hyper));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RETRY_BUDGET {
        if let Some(s) = draw(&mut rng, n_qubits, graph, hyper) {
            if !is_degenerate(&s) && validate_structure(&s, graph).is_ok() {
                return Ok(s);
            }
        }
    }
    Err(AnsatzError::ProposalExhausted { hyper, attempts: RETRY_BUDGET })
}

/// Adjacent identical CNOTs with nothing in between on either qubit.
fn has_canceling_cnots(gates: &[&Gate<Param>]) -> bool {
    for (i, g) in gates.iter().enumerate() {
        if let Gate::Cnot { control, target } = **g {
            for h in &gates[i + 1..] {
                let qs = h.qubits();
                if !qs.contains(&control) && !qs.contains(&target) {
                    continue;
                }
                if matches!(h, Gate::Cnot { control: c, target: t } if *c == control && *t == target) {
                    return true;
                }
                break;
            }
        }
    }
    false
}

/// A CNOT whose control is still in its initial computational state.
fn has_idle_control(gates: &[&Gate<Param>], n: usize) -> bool {
    let mut touched = vec![false; n];
    for g in gates {
        match **g {
            Gate::Cnot { control, target } => {
                if control < n && !touched[control] {
                    return true;
                }
                if target < n {
                    touched[target] = true;
                }
            }
            ref other => {
                for q in other.qubits() {
                    if q < n {
                        touched[q] = true;
                    }
                }
            }
        }
    }
    false
}

/// Two U3 gates on one qubit within a layer with no CNOT on it in between.
fn has_mergeable_u3(layer: &[Gate<Param>]) -> bool {
    let mut open = BTreeSet::new();
    for g in layer {
        match *g {
            Gate::U3 { qubit, .. } => {
                if !open.insert(qubit) {
                    return true;
                }
            }
            Gate::Cnot { control, target } => {
                open.remove(&control);
                open.remove(&target);
            }
            _ => {}
        }
    }
    false
}

/// True when the structure contains canceling, spurious or redundant gates.
pub fn is_degenerate(structure: &CircuitStructure) -> bool {
    let enc: Vec<&Gate<Param>> = structure.encoder_gates().collect();
    let dec: Vec<&Gate<Param>> = structure.decoder_gates().collect();
    has_canceling_cnots(&enc)
        || has_canceling_cnots(&dec)
        || has_idle_control(&enc, structure.n_qubits)
        || structure.encoder.iter().chain(&structure.decoder).any(|l| has_mergeable_u3(l))
}
