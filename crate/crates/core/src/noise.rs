//! Noise calibration records, Kraus channels and the readout confusion model.
//!
//! Conventions:
//! * depolarizing: `ρ → (1−p)ρ + p·I/2` (uniform Pauli mixture),
//! * interrogation: amplitude damping `γ = 1 − e^{−dt/T1}` composed with
//!   pure dephasing `λ = 1 − e^{−dt/Tφ}`, `1/Tφ = 1/T2 − 1/(2T1)`, so that
//!   coherences decay exactly as `e^{−dt/T2}`,
//! * readout: independent symmetric bit flips on the outcome distribution.

use ndarray::Array2;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::GateKind;
use crate::linalg::{dagger, identity, max_abs_diff, CMatrix};
use crate::scalar::{c, cr, Real, C};
use crate::simulator::OutcomeDistribution;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("{name} = {value} is outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("T2 = {t2:e} s exceeds 2·T1 = {:e} s; no physical dephasing rate reproduces it", 2.0 * t1)]
    Unphysical { t1: f64, t2: f64 },
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
}

/// Gate and measurement durations in seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateDurations {
    pub u3: f64,
    pub cnot: f64,
    pub h: f64,
    pub x: f64,
    pub rz: f64,
    pub measure: f64,
}

impl Default for GateDurations {
    fn default() -> Self {
        GateDurations { u3: 50e-9, cnot: 400e-9, h: 50e-9, x: 50e-9, rz: 0.0, measure: 1e-6 }
    }
}

impl GateDurations {
    pub fn of(&self, kind: GateKind) -> f64 {
        match kind {
            GateKind::U3 => self.u3,
            GateKind::Cnot => self.cnot,
            GateKind::H => self.h,
            GateKind::X => self.x,
            GateKind::Rz => self.rz,
        }
    }
}

/// Which noise categories are active.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseFlags {
    pub gate: bool,
    pub interrogation: bool,
    pub readout: bool,
}

impl Default for NoiseFlags {
    fn default() -> Self {
        NoiseFlags { gate: true, interrogation: true, readout: true }
    }
}

impl NoiseFlags {
    pub const NONE: NoiseFlags = NoiseFlags { gate: false, interrogation: false, readout: false };
}

/// Hardware-style calibration record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    /// Single-qubit gate depolarizing probability.
    pub p1: f64,
    /// Depolarizing probability applied to each qubit of a CNOT.
    pub p2: f64,
    /// Symmetric per-qubit readout flip probability.
    pub p_readout: f64,
    pub t1: f64,
    pub t2: f64,
    #[serde(default)]
    pub durations: GateDurations,
    #[serde(default)]
    pub enabled: NoiseFlags,
}

impl NoiseModel {
    /// Averaged superconducting-device calibration: 1% single-qubit and 3%
    /// per-qubit CNOT depolarizing, 5% readout, T1 = 52.2 µs, T2 = 62.8 µs.
    pub fn superconducting_average() -> Self {
        NoiseModel {
            p1: 0.01,
            p2: 0.03,
            p_readout: 0.05,
            t1: 52.2e-6,
            t2: 62.8e-6,
            durations: GateDurations::default(),
            enabled: NoiseFlags::default(),
        }
    }

    /// Same calibration with every noise category disabled.
    pub fn noiseless() -> Self {
        NoiseModel { enabled: NoiseFlags::NONE, ..Self::superconducting_average() }
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        for (name, value) in [("p1", self.p1), ("p2", self.p2), ("p_readout", self.p_readout)] {
            check_probability(name, value)?;
        }
        for (name, value) in [("t1", self.t1), ("t2", self.t2)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(NoiseError::NonPositive { name, value });
            }
        }
        if self.t2 > 2.0 * self.t1 {
            return Err(NoiseError::Unphysical { t1: self.t1, t2: self.t2 });
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.enabled == NoiseFlags::NONE
    }

    pub fn with_flags(&self, enabled: NoiseFlags) -> Self {
        NoiseModel { enabled, ..self.clone() }
    }

    /// Scales both lifetimes by `factor`.
    pub fn with_lifetimes_scaled(&self, factor: f64) -> Self {
        NoiseModel { t1: self.t1 * factor, t2: self.t2 * factor, ..self.clone() }
    }
}

fn check_probability(name: &'static str, value: f64) -> Result<(), NoiseError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(NoiseError::OutOfRange { name, value })
    }
}

/// Single-qubit superoperator acting on the 2×2 block
/// `(ρ00, ρ01, ρ10, ρ11)` (row bit, column bit).
pub type Superop<R> = [[C<R>; 4]; 4];

/// Kraus representation of a channel on `targets`.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel<R: Real> {
    pub operators: Vec<CMatrix<R>>,
    pub targets: Vec<usize>,
}

impl<R: Real> KrausChannel<R> {
    pub fn new(operators: Vec<CMatrix<R>>) -> Self {
        KrausChannel { operators, targets: vec![0] }
    }

    pub fn on(mut self, qubit: usize) -> Self {
        self.targets = vec![qubit];
        self
    }

    pub fn dim(&self) -> usize {
        self.operators.first().map_or(0, |k| k.nrows())
    }

    /// `‖Σ K†K − I‖_max`.
    pub fn completeness_error(&self) -> R {
        let d = self.dim();
        let sum = self
            .operators
            .iter()
            .fold(Array2::from_elem((d, d), C::zero()), |acc, k| acc + dagger(k).dot(k));
        max_abs_diff(&sum, &identity(d))
    }

    /// Applies the channel to a full matrix of matching dimension.
    pub fn apply_matrix(&self, rho: &CMatrix<R>) -> CMatrix<R> {
        let d = rho.nrows();
        self.operators
            .iter()
            .fold(Array2::from_elem((d, d), C::zero()), |acc, k| acc + k.dot(rho).dot(&dagger(k)))
    }

    /// Liouville form of a single-qubit channel.
    pub fn superoperator(&self) -> Superop<R> {
        assert_eq!(self.dim(), 2, "superoperator() is for single-qubit channels");
        let mut s = [[C::zero(); 4]; 4];
        for k in &self.operators {
            for (row, srow) in s.iter_mut().enumerate() {
                let (a, b) = (row >> 1, row & 1);
                for (col, entry) in srow.iter_mut().enumerate() {
                    let (cc, d) = (col >> 1, col & 1);
                    *entry = *entry + k[[a, cc]] * k[[b, d]].conj();
                }
            }
        }
        s
    }

    /// Sequential composition: `self` first, then `after`.
    pub fn then(&self, after: &KrausChannel<R>) -> KrausChannel<R> {
        let ops = after
            .operators
            .iter()
            .flat_map(|b| self.operators.iter().map(move |a| b.dot(a)))
            .collect();
        KrausChannel { operators: ops, targets: self.targets.clone() }
    }
}

fn mat2<R: Real>(m: [[C<R>; 2]; 2]) -> CMatrix<R> {
    Array2::from_shape_fn((2, 2), |(i, j)| m[i][j])
}

fn scaled<R: Real>(m: [[C<R>; 2]; 2], s: R) -> CMatrix<R> {
    mat2(m).mapv(|z| z * cr(s))
}

/// Uniform Pauli-mixture depolarizing channel.
pub fn depolarizing_channel<R: Real>(p: f64) -> Result<KrausChannel<R>, NoiseError> {
    check_probability("p", p)?;
    let o = C::<R>::one();
    let z = C::<R>::zero();
    let i = [[o, z], [z, o]];
    if p == 0.0 {
        return Ok(KrausChannel::new(vec![mat2(i)]));
    }
    let x = [[z, o], [o, z]];
    let y = [[z, c(R::zero(), -R::one())], [c(R::zero(), R::one()), z]];
    let zz = [[o, z], [z, -o]];
    let a = R::lit((1.0 - 0.75 * p).sqrt());
    let b = R::lit((p / 4.0).sqrt());
    Ok(KrausChannel::new(vec![scaled(i, a), scaled(x, b), scaled(y, b), scaled(zz, b)]))
}

/// Amplitude damping with decay probability `gamma`.
pub fn amplitude_damping<R: Real>(gamma: f64) -> Result<KrausChannel<R>, NoiseError> {
    check_probability("gamma", gamma)?;
    let z = C::<R>::zero();
    let k0 = [[C::one(), z], [z, cr(R::lit((1.0 - gamma).sqrt()))]];
    let k1 = [[z, cr(R::lit(gamma.sqrt()))], [z, z]];
    Ok(KrausChannel::new(vec![mat2(k0), mat2(k1)]))
}

/// Pure dephasing that scales coherences by `1 − lambda`.
pub fn phase_damping<R: Real>(lambda: f64) -> Result<KrausChannel<R>, NoiseError> {
    check_probability("lambda", lambda)?;
    let o = C::<R>::one();
    let z = C::<R>::zero();
    let k0 = scaled([[o, z], [z, o]], R::lit((1.0 - lambda / 2.0).sqrt()));
    let k1 = scaled([[o, z], [z, -o]], R::lit((lambda / 2.0).sqrt()));
    Ok(KrausChannel::new(vec![k0, k1]))
}

/// Decoherence accumulated over `dt` seconds of free evolution.
pub fn interrogation_channel<R: Real>(dt: f64, t1: f64, t2: f64) -> Result<KrausChannel<R>, NoiseError> {
    if !(dt >= 0.0) {
        return Err(NoiseError::NonPositive { name: "dt", value: dt });
    }
    if !(t1 > 0.0) {
        return Err(NoiseError::NonPositive { name: "t1", value: t1 });
    }
    if !(t2 > 0.0) {
        return Err(NoiseError::NonPositive { name: "t2", value: t2 });
    }
    if t2 > 2.0 * t1 {
        return Err(NoiseError::Unphysical { t1, t2 });
    }
    let gamma = -(-dt / t1).exp_m1();
    let dephasing_rate = (1.0 / t2 - 0.5 / t1).max(0.0);
    let lambda = -(-dt * dephasing_rate).exp_m1();
    Ok(amplitude_damping(gamma)?.then(&phase_damping(lambda)?))
}

/// Applies independent symmetric bit flips with probability `p` to every
/// qubit of the distribution.
pub fn readout_confusion<R: Real>(dist: &OutcomeDistribution<R>, p: f64) -> Result<OutcomeDistribution<R>, NoiseError> {
    check_probability("p_readout", p)?;
    let mut probs = dist.probs.clone();
    if p > 0.0 {
        let keep = R::lit(1.0 - p);
        let flip = R::lit(p);
        let n = dist.n_qubits;
        for q in 0..n {
            let mask = 1usize << (n - 1 - q);
            for i in 0..probs.len() {
                if i & mask == 0 {
                    let (a, b) = (probs[i], probs[i | mask]);
                    probs[i] = keep * a + flip * b;
                    probs[i | mask] = flip * a + keep * b;
                }
            }
        }
    }
    Ok(OutcomeDistribution { n_qubits: dist.n_qubits, probs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn plus() -> CMatrix<f64> {
        Array2::from_elem((2, 2), cr(0.5))
    }

    #[test]
    fn depolarizing_zero_is_identity() {
        let ch = depolarizing_channel::<f64>(0.0).unwrap();
        assert_eq!(ch.operators.len(), 1);
        assert_eq!(ch.operators[0], identity(2));
    }

    #[test]
    fn full_depolarizing_gives_maximally_mixed() {
        let ch = depolarizing_channel::<f64>(1.0).unwrap();
        let mut zero = Array2::from_elem((2, 2), C::zero());
        zero[[0, 0]] = C::one();
        let out = ch.apply_matrix(&zero);
        assert!(max_abs_diff(&out, &identity::<f64>(2).mapv(|z| z * cr(0.5))) < 1e-15);
    }

    #[test]
    fn one_percent_depolarizing_scales_coherence() {
        let out = depolarizing_channel::<f64>(0.01).unwrap().apply_matrix(&plus());
        assert_abs_diff_eq!(out[[0, 1]].re, 0.99 * 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(out[[0, 0]].re, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn out_of_range_probability_is_rejected() {
        assert!(depolarizing_channel::<f64>(1.5).is_err());
        assert!(depolarizing_channel::<f64>(-0.1).is_err());
    }

    #[test]
    fn interrogation_zero_time_is_identity() {
        let ch = interrogation_channel::<f64>(0.0, 52.2e-6, 62.8e-6).unwrap();
        let out = ch.apply_matrix(&plus());
        assert!(max_abs_diff(&out, &plus()) < 1e-15);
    }

    #[test]
    fn interrogation_long_time_relaxes_to_ground() {
        let ch = interrogation_channel::<f64>(1.0, 52.2e-6, 62.8e-6).unwrap();
        let mut one = Array2::from_elem((2, 2), C::zero());
        one[[1, 1]] = C::one();
        let out = ch.apply_matrix(&one);
        assert_abs_diff_eq!(out[[0, 0]].re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn coherence_decays_by_one_over_e_at_t2() {
        let (t1, t2) = (52.2e-6, 62.8e-6);
        let out = interrogation_channel::<f64>(t2, t1, t2).unwrap().apply_matrix(&plus());
        assert_abs_diff_eq!(out[[0, 1]].norm() / 0.5, (-1.0f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn unphysical_lifetimes_are_rejected() {
        assert!(matches!(interrogation_channel::<f64>(1e-6, 10e-6, 25e-6), Err(NoiseError::Unphysical { .. })));
        let mut m = NoiseModel::superconducting_average();
        m.t2 = 3.0 * m.t1;
        assert!(matches!(m.validate(), Err(NoiseError::Unphysical { .. })));
        assert!(NoiseModel::superconducting_average().validate().is_ok());
    }

    #[test]
    fn readout_single_qubit() {
        let d = OutcomeDistribution { n_qubits: 1, probs: vec![1.0, 0.0] };
        let out = readout_confusion(&d, 0.05).unwrap();
        assert_abs_diff_eq!(out.probs[0], 0.95, epsilon = 1e-15);
        assert_abs_diff_eq!(out.probs[1], 0.05, epsilon = 1e-15);
        assert_eq!(readout_confusion(&d, 0.0).unwrap(), d);
    }

    #[test]
    fn readout_two_qubits_is_tensor_product() {
        let d = OutcomeDistribution { n_qubits: 2, probs: vec![1.0, 0.0, 0.0, 0.0] };
        let out = readout_confusion(&d, 0.05).unwrap();
        for (got, want) in out.probs.iter().zip([0.9025, 0.0475, 0.0475, 0.0025]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
    }

    #[test]
    fn superoperator_matches_kraus_action() {
        let ch = interrogation_channel::<f64>(7e-6, 52.2e-6, 62.8e-6).unwrap();
        let s = ch.superoperator();
        let rho = [cr(0.3), c(0.1, -0.2), c(0.1, 0.2), cr(0.7)];
        let direct = ch.apply_matrix(&Array2::from_shape_fn((2, 2), |(i, j)| rho[2 * i + j]));
        for row in 0..4 {
            let v: C<f64> = (0..4).map(|k| s[row][k] * rho[k]).sum();
            assert!((v - direct[[row >> 1, row & 1]]).norm() < 1e-15);
        }
    }
}
