//! Gates, connectivity graphs, parameterized encoder/decoder structures and
//! parameter binding.

use std::collections::BTreeSet;
use std::fmt;

use ndarray::Array2;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::CMatrix;
use crate::scalar::{cis, cr, Real, C};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("parameter array has length {found}, structure expects {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("parameter slot {0} has no bound value")]
    UnboundSlot(usize),
    #[error("qubit index {qubit} out of range for {n_qubits} qubits")]
    IndexOutOfRange { qubit: usize, n_qubits: usize },
    #[error("invalid gate: {0}")]
    InvalidGate(String),
    #[error("invalid connectivity graph: {0}")]
    InvalidGraph(String),
    #[error("interrogation time must be positive, got {0}")]
    NonPositiveTime(f64),
}

/// A gate parameter inside a [`CircuitStructure`]: either a free slot into
/// the parameter vector or a fixed angle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Param {
    Slot { slot: usize },
    Value(f64),
}

impl Param {
    pub fn slot(i: usize) -> Self {
        Param::Slot { slot: i }
    }

    pub fn slot_index(&self) -> Option<usize> {
        match *self {
            Param::Slot { slot } => Some(slot),
            Param::Value(_) => None,
        }
    }
}

/// Anything that may or may not carry a concrete angle.
pub trait Angle<R> {
    fn resolve(&self) -> Option<R>;
}

impl<R: Real> Angle<R> for R {
    fn resolve(&self) -> Option<R> {
        Some(*self)
    }
}

impl<R: Real> Angle<R> for Param {
    fn resolve(&self) -> Option<R> {
        match *self {
            Param::Value(v) => Some(R::lit(v)),
            Param::Slot { .. } => None,
        }
    }
}

/// Native gate set: general `U3`, `CNOT`, plus `H`, `X` and `Rz` used by the
/// reference protocols. `P` is the angle type (a [`Param`] in structures, a
/// bound scalar in [`ConcreteCircuit`]s).
#[derive(Clone, Debug, PartialEq)]
pub enum Gate<P> {
    U3 { qubit: usize, theta: P, phi: P, lambda: P },
    Cnot { control: usize, target: usize },
    H { qubit: usize },
    X { qubit: usize },
    Rz { qubit: usize, angle: P },
}

/// Gate kind without operands, used for mirror checks and durations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    U3,
    Cnot,
    H,
    X,
    Rz,
}

impl GateKind {
    pub fn name(self) -> &'static str {
        match self {
            GateKind::U3 => "u3",
            GateKind::Cnot => "cnot",
            GateKind::H => "h",
            GateKind::X => "x",
            GateKind::Rz => "rz",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "u3" => GateKind::U3,
            "cnot" | "cx" => GateKind::Cnot,
            "h" => GateKind::H,
            "x" => GateKind::X,
            "rz" => GateKind::Rz,
            _ => return None,
        })
    }

    fn arity(self) -> (usize, usize) {
        match self {
            GateKind::U3 => (1, 3),
            GateKind::Cnot => (2, 0),
            GateKind::H | GateKind::X => (1, 0),
            GateKind::Rz => (1, 1),
        }
    }
}

impl<P> Gate<P> {
    pub fn kind(&self) -> GateKind {
        match self {
            Gate::U3 { .. } => GateKind::U3,
            Gate::Cnot { .. } => GateKind::Cnot,
            Gate::H { .. } => GateKind::H,
            Gate::X { .. } => GateKind::X,
            Gate::Rz { .. } => GateKind::Rz,
        }
    }

    /// Qubits the gate acts on; for CNOT the control comes first.
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::U3 { qubit, .. } | Gate::H { qubit } | Gate::X { qubit } | Gate::Rz { qubit, .. } => vec![qubit],
            Gate::Cnot { control, target } => vec![control, target],
        }
    }

    pub fn params(&self) -> Vec<&P> {
        match self {
            Gate::U3 { theta, phi, lambda, .. } => vec![theta, phi, lambda],
            Gate::Rz { angle, .. } => vec![angle],
            _ => Vec::new(),
        }
    }

    pub fn is_two_qubit(&self) -> bool {
        matches!(self, Gate::Cnot { .. })
    }

    /// Maps angle values, keeping kind and operands.
    pub fn try_map<Q, E>(&self, mut f: impl FnMut(&P) -> Result<Q, E>) -> Result<Gate<Q>, E> {
        Ok(match self {
            Gate::U3 { qubit, theta, phi, lambda } => Gate::U3 { qubit: *qubit, theta: f(theta)?, phi: f(phi)?, lambda: f(lambda)? },
            Gate::Cnot { control, target } => Gate::Cnot { control: *control, target: *target },
            Gate::H { qubit } => Gate::H { qubit: *qubit },
            Gate::X { qubit } => Gate::X { qubit: *qubit },
            Gate::Rz { qubit, angle } => Gate::Rz { qubit: *qubit, angle: f(angle)? },
        })
    }

    /// Same kind on the same qubits, ignoring angles.
    pub fn same_shape<Q>(&self, other: &Gate<Q>) -> bool {
        self.kind() == other.kind() && self.qubits() == other.qubits()
    }
}

impl<P: fmt::Debug> fmt::Display for Gate<P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let qs: Vec<String> = self.qubits().iter().map(|q| q.to_string()).collect();
        write!(f, "{}({})", self.kind().name(), qs.join(","))
    }
}

/// Standard `U3(θ, φ, λ)` matrix.
pub fn u3_matrix<R: Real>(theta: R, phi: R, lambda: R) -> [[C<R>; 2]; 2] {
    let half = theta / R::lit(2.0);
    let (s, co) = (half.sin(), half.cos());
    [
        [cr(co), -cis(lambda) * s],
        [cis(phi) * s, cis(phi + lambda) * co],
    ]
}

/// `Rz(φ) = diag(e^{−iφ/2}, e^{iφ/2})`.
pub fn rz_matrix<R: Real>(angle: R) -> [[C<R>; 2]; 2] {
    let h = angle / R::lit(2.0);
    [[cis(-h), C::zero()], [C::zero(), cis(h)]]
}

pub fn hadamard_matrix<R: Real>() -> [[C<R>; 2]; 2] {
    let s = R::one() / R::lit(2.0).sqrt();
    [[cr(s), cr(s)], [cr(s), cr(-s)]]
}

pub fn pauli_x_matrix<R: Real>() -> [[C<R>; 2]; 2] {
    [[C::zero(), C::one()], [C::one(), C::zero()]]
}

/// 2×2 unitary of a bound single-qubit gate; `None` for CNOT.
pub fn single_qubit_matrix<R: Real, P: Angle<R>>(gate: &Gate<P>) -> Result<Option<[[C<R>; 2]; 2]>, CircuitError> {
    let get = |p: &P, idx: usize| p.resolve().ok_or(CircuitError::UnboundSlot(idx));
    Ok(Some(match gate {
        Gate::U3 { theta, phi, lambda, .. } => u3_matrix(get(theta, 0)?, get(phi, 1)?, get(lambda, 2)?),
        Gate::Rz { angle, .. } => rz_matrix(get(angle, 0)?),
        Gate::H { .. } => hadamard_matrix(),
        Gate::X { .. } => pauli_x_matrix(),
        Gate::Cnot { .. } => return Ok(None),
    }))
}

/// Unitary of a gate whose angles are all bound: 2×2 for single-qubit gates,
/// 4×4 for CNOT in the `|control, target⟩` basis.
pub fn gate_unitary<R: Real, P: Angle<R>>(gate: &Gate<P>) -> Result<CMatrix<R>, CircuitError> {
    for p in gate.params() {
        if p.resolve().is_none() {
            let slot = unbound_slot_hint(gate);
            return Err(CircuitError::UnboundSlot(slot));
        }
    }
    match single_qubit_matrix(gate)? {
        Some(m) => Ok(to_matrix(m)),
        None => {
            let mut u = Array2::from_elem((4, 4), C::zero());
            u[[0, 0]] = C::one();
            u[[1, 1]] = C::one();
            u[[2, 3]] = C::one();
            u[[3, 2]] = C::one();
            Ok(u)
        }
    }
}

fn unbound_slot_hint<R: Real, P: Angle<R>>(gate: &Gate<P>) -> usize {
    gate.params().iter().position(|p| p.resolve().is_none()).unwrap_or(0)
}

#[derive(Serialize, Deserialize)]
struct GateRecord<P> {
    kind: String,
    qubits: Vec<usize>,
    #[serde(default = "Vec::new")]
    params: Vec<P>,
}

impl<P: Serialize + Clone> Serialize for Gate<P> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        GateRecord {
            kind: self.kind().name().to_string(),
            qubits: self.qubits(),
            params: self.params().into_iter().cloned().collect(),
        }
        .serialize(s)
    }
}

impl<'de, P: Deserialize<'de> + Clone> Deserialize<'de> for Gate<P> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let rec = GateRecord::<P>::deserialize(d)?;
        let kind = GateKind::parse(&rec.kind).ok_or_else(|| D::Error::custom(format!("unknown gate kind `{}`", rec.kind)))?;
        let (nq, np) = kind.arity();
        if rec.qubits.len() != nq || rec.params.len() != np {
            return Err(D::Error::custom(format!(
                "gate `{}` needs {nq} qubits and {np} params, got {} and {}",
                rec.kind,
                rec.qubits.len(),
                rec.params.len()
            )));
        }
        let q = &rec.qubits;
        let p = rec.params;
        Ok(match kind {
            GateKind::U3 => Gate::U3 { qubit: q[0], theta: p[0].clone(), phi: p[1].clone(), lambda: p[2].clone() },
            GateKind::Cnot => {
                if q[0] == q[1] {
                    return Err(D::Error::custom("cnot control equals target"));
                }
                Gate::Cnot { control: q[0], target: q[1] }
            }
            GateKind::H => Gate::H { qubit: q[0] },
            GateKind::X => Gate::X { qubit: q[0] },
            GateKind::Rz => Gate::Rz { qubit: q[0], angle: p[0].clone() },
        })
    }
}

/// Undirected coupling map. Edges are stored with the smaller index first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphRecord", into = "GraphRecord")]
pub struct ConnectivityGraph {
    n_qubits: usize,
    edges: BTreeSet<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct GraphRecord {
    n_qubits: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<GraphRecord> for ConnectivityGraph {
    type Error = CircuitError;
    fn try_from(r: GraphRecord) -> Result<Self, Self::Error> {
        ConnectivityGraph::new(r.n_qubits, r.edges.iter().map(|e| (e[0], e[1])))
    }
}

impl From<ConnectivityGraph> for GraphRecord {
    fn from(g: ConnectivityGraph) -> Self {
        GraphRecord { n_qubits: g.n_qubits, edges: g.edges.iter().map(|&(a, b)| [a, b]).collect() }
    }
}

impl ConnectivityGraph {
    pub fn new(n_qubits: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, CircuitError> {
        if n_qubits == 0 {
            return Err(CircuitError::InvalidGraph("graph needs at least one qubit".into()));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= n_qubits || b >= n_qubits {
                return Err(CircuitError::InvalidGraph(format!("edge ({a},{b}) out of range for {n_qubits} qubits")));
            }
            if a == b {
                return Err(CircuitError::InvalidGraph(format!("self-loop on qubit {a}")));
            }
            if !set.insert((a.min(b), a.max(b))) {
                return Err(CircuitError::InvalidGraph(format!("duplicate edge ({a},{b})")));
            }
        }
        Ok(ConnectivityGraph { n_qubits, edges: set })
    }

    /// Linear chain `0 - 1 - … - (n-1)`.
    pub fn chain(n_qubits: usize) -> Self {
        Self::new(n_qubits, (1..n_qubits).map(|i| (i - 1, i))).expect("chain graph is valid")
    }

    pub fn all_to_all(n_qubits: usize) -> Self {
        let edges = (0..n_qubits).flat_map(|a| ((a + 1)..n_qubits).map(move |b| (a, b)));
        Self::new(n_qubits, edges).expect("complete graph is valid")
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Either CNOT orientation is allowed on an edge.
    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    /// True when `0 - 1 - … - (n-1)` are all edges (needed by GHZ chains).
    pub fn contains_chain(&self) -> bool {
        (1..self.n_qubits).all(|i| self.has_edge(i - 1, i))
    }
}

/// Ansatz hyperparameters: `l` layers, `k` single-qubit gates and `m`
/// entangling gates per layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Hyperparams {
    pub l: usize,
    pub k: usize,
    pub m: usize,
}

impl Hyperparams {
    pub fn new(l: usize, k: usize, m: usize) -> Self {
        Hyperparams { l, k, m }
    }

    pub fn is_valid_for(&self, graph: &ConnectivityGraph) -> bool {
        self.l >= 1 && self.k >= 1 && self.k <= graph.n_qubits() && self.m <= graph.edge_count()
    }

    pub fn n_params(&self) -> usize {
        6 * self.k * self.l
    }
}

/// Parameterized encoder/decoder structure (the ansatz).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitStructure {
    pub n_qubits: usize,
    #[serde(default)]
    pub hyperparams: Option<Hyperparams>,
    pub encoder: Vec<Vec<Gate<Param>>>,
    pub decoder: Vec<Vec<Gate<Param>>>,
    pub n_params: usize,
}

/// Problems found by [`validate_structure`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    EdgeNotInGraph { control: usize, target: usize },
    IndexOutOfRange { qubit: usize },
    SelfControlledCnot { qubit: usize },
    SlotOutOfRange { slot: usize },
    SharedSlot { slot: usize },
    DecoderAsymmetry { detail: String },
    QubitCountMismatch { structure: usize, graph: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EdgeNotInGraph { control, target } => write!(f, "cnot({control},{target}) uses an edge missing from the graph"),
            Violation::IndexOutOfRange { qubit } => write!(f, "qubit {qubit} out of range"),
            Violation::SelfControlledCnot { qubit } => write!(f, "cnot with control == target == {qubit}"),
            Violation::SlotOutOfRange { slot } => write!(f, "parameter slot {slot} >= n_params"),
            Violation::SharedSlot { slot } => write!(f, "parameter slot {slot} shared between encoder and decoder"),
            Violation::DecoderAsymmetry { detail } => write!(f, "decoder is not a mirror of the encoder: {detail}"),
            Violation::QubitCountMismatch { structure, graph } => write!(f, "structure has {structure} qubits, graph has {graph}"),
        }
    }
}

impl CircuitStructure {
    /// Structure without free parameters, from flat encoder/decoder lists.
    pub fn fixed(n_qubits: usize, encoder: Vec<Gate<Param>>, decoder: Vec<Gate<Param>>) -> Self {
        CircuitStructure { n_qubits, hyperparams: None, encoder: vec![encoder], decoder: vec![decoder], n_params: 0 }
    }

    pub fn encoder_gates(&self) -> impl Iterator<Item = &Gate<Param>> {
        self.encoder.iter().flatten()
    }

    pub fn decoder_gates(&self) -> impl Iterator<Item = &Gate<Param>> {
        self.decoder.iter().flatten()
    }

    pub fn gates(&self) -> impl Iterator<Item = &Gate<Param>> {
        self.encoder_gates().chain(self.decoder_gates())
    }

    /// Binds `theta` into every slot.
    pub fn bind<R: Real>(&self, theta: &[R]) -> Result<ConcreteCircuit<R>, CircuitError> {
        if theta.len() != self.n_params {
            return Err(CircuitError::LengthMismatch { expected: self.n_params, found: theta.len() });
        }
        let resolve = |p: &Param| -> Result<R, CircuitError> {
            match *p {
                Param::Value(v) => Ok(R::lit(v)),
                Param::Slot { slot } => theta.get(slot).copied().ok_or(CircuitError::UnboundSlot(slot)),
            }
        };
        let bind_all = |gates: &mut dyn Iterator<Item = &Gate<Param>>| -> Result<Vec<Gate<R>>, CircuitError> {
            gates.map(|g| g.try_map(resolve)).collect()
        };
        Ok(ConcreteCircuit {
            n_qubits: self.n_qubits,
            encoder: bind_all(&mut self.encoder_gates())?,
            decoder: bind_all(&mut self.decoder_gates())?,
        })
    }

    /// Checks connectivity and index ranges only (no mirror requirement).
    pub fn connectivity_violations(&self, graph: &ConnectivityGraph) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.n_qubits != graph.n_qubits() {
            out.push(Violation::QubitCountMismatch { structure: self.n_qubits, graph: graph.n_qubits() });
        }
        for g in self.gates() {
            for q in g.qubits() {
                if q >= self.n_qubits {
                    out.push(Violation::IndexOutOfRange { qubit: q });
                }
            }
            if let Gate::Cnot { control, target } = *g {
                if control == target {
                    out.push(Violation::SelfControlledCnot { qubit: control });
                } else if control < graph.n_qubits() && target < graph.n_qubits() && !graph.has_edge(control, target) {
                    out.push(Violation::EdgeNotInGraph { control, target });
                }
            }
        }
        out
    }

    /// Mirror-symmetry and slot-disjointness violations.
    pub fn mirror_violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.encoder.len() != self.decoder.len() {
            out.push(Violation::DecoderAsymmetry {
                detail: format!("{} encoder layers vs {} decoder layers", self.encoder.len(), self.decoder.len()),
            });
        } else {
            for (i, enc) in self.encoder.iter().enumerate() {
                let dec = &self.decoder[self.decoder.len() - 1 - i];
                let mirrored = enc.len() == dec.len() && enc.iter().rev().zip(dec.iter()).all(|(a, b)| a.same_shape(b));
                if !mirrored {
                    out.push(Violation::DecoderAsymmetry { detail: format!("encoder layer {i} is not mirrored") });
                }
            }
        }
        let mut enc_slots = BTreeSet::new();
        for g in self.encoder_gates() {
            enc_slots.extend(g.params().iter().filter_map(|p| p.slot_index()));
        }
        for g in self.decoder_gates() {
            for s in g.params().iter().filter_map(|p| p.slot_index()) {
                if enc_slots.contains(&s) {
                    out.push(Violation::SharedSlot { slot: s });
                }
            }
        }
        out
    }

    pub fn slot_violations(&self) -> Vec<Violation> {
        self.gates()
            .flat_map(|g| g.params().into_iter().filter_map(|p| p.slot_index()).collect::<Vec<_>>())
            .filter(|&s| s >= self.n_params)
            .map(|slot| Violation::SlotOutOfRange { slot })
            .collect()
    }
}

/// Full validation: connectivity, index ranges, slots, and decoder mirror.
pub fn validate_structure(structure: &CircuitStructure, graph: &ConnectivityGraph) -> Result<(), Vec<Violation>> {
    let mut v = structure.connectivity_violations(graph);
    v.extend(structure.slot_violations());
    v.extend(structure.mirror_violations());
    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

/// Angles `theta` plus interrogation time `t` (seconds).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterAssignment<R> {
    pub theta: Vec<R>,
    pub t: R,
}

impl<R: Real> ParameterAssignment<R> {
    pub fn new(theta: Vec<R>, t: R) -> Result<Self, CircuitError> {
        if !(t > R::zero()) {
            return Err(CircuitError::NonPositiveTime(t.as_f64()));
        }
        Ok(ParameterAssignment { theta, t })
    }
}

pub fn bind_parameters<R: Real>(structure: &CircuitStructure, assignment: &ParameterAssignment<R>) -> Result<ConcreteCircuit<R>, CircuitError> {
    structure.bind(&assignment.theta)
}

/// Signal strength and echo configuration. The accumulated phase is
/// `omega * t` radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    /// Phase accumulation rate in s⁻¹.
    pub omega: f64,
    /// Number of refocusing X pulses; 0 disables echo.
    #[serde(default)]
    pub echo_pulses: u32,
}

impl SignalSpec {
    pub fn new(omega: f64) -> Self {
        SignalSpec { omega, echo_pulses: 0 }
    }

    pub fn with_echo(mut self, enabled: bool) -> Self {
        self.echo_pulses = u32::from(enabled);
        self
    }

    pub fn echo_enabled(&self) -> bool {
        self.echo_pulses > 0
    }

    pub fn phase(&self, t: f64) -> f64 {
        self.omega * t
    }
}

/// Fully bound circuit: encoder, then the signal block, then decoder.
#[derive(Clone, Debug, PartialEq)]
pub struct ConcreteCircuit<R> {
    pub n_qubits: usize,
    pub encoder: Vec<Gate<R>>,
    pub decoder: Vec<Gate<R>>,
}

/// One step of a concrete circuit in execution order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Step<'a, R> {
    Gate(&'a Gate<R>),
    Signal,
}

impl<R: Real> ConcreteCircuit<R> {
    pub fn steps(&self) -> impl Iterator<Item = Step<'_, R>> {
        self.encoder
            .iter()
            .map(Step::Gate)
            .chain(std::iter::once(Step::Signal))
            .chain(self.decoder.iter().map(Step::Gate))
    }

    pub fn check_indices(&self) -> Result<(), CircuitError> {
        for g in self.encoder.iter().chain(&self.decoder) {
            for q in g.qubits() {
                if q >= self.n_qubits {
                    return Err(CircuitError::IndexOutOfRange { qubit: q, n_qubits: self.n_qubits });
                }
            }
            if let Gate::Cnot { control, target } = g {
                if control == target {
                    return Err(CircuitError::InvalidGate(format!("cnot({control},{target})")));
                }
            }
        }
        Ok(())
    }
}

/// Converts a 2×2 array into an ndarray matrix.
pub(crate) fn to_matrix<R: Real>(m: [[C<R>; 2]; 2]) -> CMatrix<R> {
    Array2::from_shape_fn((2, 2), |(i, j)| m[i][j])
}
