//! Derivative-free local optimizers and the structure-search outer loop.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ansatz::{propose, AnsatzError};
use crate::circuit::{CircuitStructure, ConnectivityGraph, Hyperparams};
use crate::derive_seed;
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error("invalid optimizer settings: {0}")]
    InvalidSettings(String),
    #[error("iter_max must be at least 1")]
    NoIterations,
    #[error("hyperparameter schedule is empty")]
    EmptySchedule,
}

/// Stopping rules for a local minimization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalSettings<F> {
    pub max_evaluations: usize,
    /// Absolute tolerance on the simplex / step size.
    pub x_tolerance: F,
    /// Relative tolerance on function-value spread.
    pub f_tolerance: F,
    /// Initial simplex edge / line-search step.
    pub initial_step: F,
}

/// Outcome of a local minimization.
#[derive(Clone, Debug, PartialEq)]
pub struct Minimum<F> {
    pub x: Vec<F>,
    pub f: F,
    pub evaluations: usize,
    /// Stopped because the evaluation budget ran out.
    pub budget_exhausted: bool,
    /// Incumbent value after every evaluation.
    pub trace: Vec<F>,
}

/// Counts evaluations, tracks the incumbent and enforces the budget.
struct Counter<'f, F> {
    f: &'f mut dyn FnMut(&[F]) -> F,
    max: usize,
    count: usize,
    best_x: Vec<F>,
    best_f: F,
    trace: Vec<F>,
}

impl<'f, F: Real> Counter<'f, F> {
    fn new(f: &'f mut dyn FnMut(&[F]) -> F, max: usize, dim: usize) -> Self {
        Counter { f, max, count: 0, best_x: vec![F::zero(); dim], best_f: F::infinity(), trace: Vec::new() }
    }

    fn exhausted(&self) -> bool {
        self.count >= self.max
    }

    fn eval(&mut self, x: &[F]) -> F {
        if self.exhausted() {
            return F::infinity();
        }
        self.count += 1;
        let mut v = (self.f)(x);
        if v.is_nan() {
            v = F::infinity();
        }
        if v < self.best_f || self.count == 1 {
            self.best_f = v;
            self.best_x = x.to_vec();
        }
        self.trace.push(self.best_f);
        v
    }

    fn finish(self) -> Minimum<F> {
        let budget_exhausted = self.exhausted();
        Minimum { x: self.best_x, f: self.best_f, evaluations: self.count, budget_exhausted, trace: self.trace }
    }
}

fn converged<F: Real>(f_lo: F, f_hi: F, x_spread: F, s: &LocalSettings<F>) -> bool {
    let scale = f_lo.abs().max(F::lit(1e-30));
    x_spread <= s.x_tolerance && (f_hi - f_lo).abs() <= s.f_tolerance * scale
}

/// Nelder-Mead simplex minimization with reflection 1, expansion 2,
/// contraction 0.5 and shrink 0.5.
pub fn nelder_mead<F: Real>(mut f: impl FnMut(&[F]) -> F, x0: &[F], settings: &LocalSettings<F>) -> Minimum<F> {
    let n = x0.len();
    let mut fd = |x: &[F]| f(x);
    let mut c = Counter::new(&mut fd, settings.max_evaluations, n);
    if n == 0 {
        c.eval(x0);
        return c.finish();
    }
    let (alpha, gamma, rho, sigma) = (F::one(), F::lit(2.0), F::lit(0.5), F::lit(0.5));
    let mut simplex: Vec<Vec<F>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] = v[i] + settings.initial_step;
        simplex.push(v);
    }
    let mut values: Vec<F> = simplex.iter().map(|v| c.eval(v)).collect();
    let lerp = |a: &[F], b: &[F], t: F| -> Vec<F> { a.iter().zip(b).map(|(&a, &b)| a + t * (b - a)).collect() };
    while !c.exhausted() {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        let spread = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(&a, &b)| (a - b).abs()))
            .fold(F::zero(), F::max);
        if converged(values[0], values[n], spread, settings) {
            break;
        }
        let mut centroid = vec![F::zero(); n];
        for v in &simplex[..n] {
            for (c, &x) in centroid.iter_mut().zip(v) {
                *c = *c + x;
            }
        }
        let inv = F::one() / F::lit(n as f64);
        centroid.iter_mut().for_each(|x| *x = *x * inv);
        let worst = simplex[n].clone();
        let xr = lerp(&centroid, &worst, -alpha);
        let fr = c.eval(&xr);
        if fr < values[0] {
            let xe = lerp(&centroid, &worst, -gamma);
            let fe = c.eval(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
        } else {
            let (xc, fc) = if fr < values[n] {
                let xc = lerp(&centroid, &xr, rho);
                let fc = c.eval(&xc);
                (xc, fc)
            } else {
                let xc = lerp(&centroid, &worst, rho);
                let fc = c.eval(&xc);
                (xc, fc)
            };
            if fc < values[n].min(fr) {
                simplex[n] = xc;
                values[n] = fc;
            } else {
                for i in 1..=n {
                    simplex[i] = lerp(&simplex[0], &simplex[i], sigma);
                    values[i] = c.eval(&simplex[i]);
                }
            }
        }
    }
    c.finish()
}

/// Minimizes along `x + α d`, `|α| ≤ bound`: bracket by golden expansion,
/// then golden-section refinement. Returns `(α, f)`.
fn line_search<F: Real>(c: &mut Counter<'_, F>, x: &[F], d: &[F], f0: F, step: F, bound: F, tol: F) -> (F, F) {
    let point = |a: F| -> Vec<F> { x.iter().zip(d).map(|(&x, &d)| x + a * d).collect() };
    let g = F::lit(1.618_033_988_749_895);
    let (mut a, mut fa) = (F::zero(), f0);
    let (mut b, mut fb) = (step.min(bound), c.eval(&point(step.min(bound))));
    if fb > fa {
        // Try the other direction.
        let (b2, fb2) = (-step.min(bound), c.eval(&point(-step.min(bound))));
        if fb2 >= fa {
            // Minimum bracketed by [-step, step].
            return golden(c, &point, -step.min(bound), F::zero(), step.min(bound), fa, tol);
        }
        b = b2;
        fb = fb2;
    }
    loop {
        if c.exhausted() {
            return if fb < fa { (b, fb) } else { (a, fa) };
        }
        let next = (b + g * (b - a)).max(-bound).min(bound);
        if next == b {
            return (b, fb);
        }
        let fnext = c.eval(&point(next));
        if fnext >= fb {
            let (lo, hi) = if a < next { (a, next) } else { (next, a) };
            return golden(c, &point, lo, b, hi, fb, tol);
        }
        a = b;
        fa = fb;
        b = next;
        fb = fnext;
        let _ = fa;
    }
}

fn golden<F: Real>(c: &mut Counter<'_, F>, point: &dyn Fn(F) -> Vec<F>, lo: F, mid: F, hi: F, fmid: F, tol: F) -> (F, F) {
    let r = F::lit(0.381_966_011_250_105_1);
    let (mut lo, mut hi) = (lo, hi);
    let (mut best, mut fbest) = (mid, fmid);
    let mut x1 = lo + r * (hi - lo);
    let mut x2 = hi - r * (hi - lo);
    let mut f1 = c.eval(&point(x1));
    let mut f2 = c.eval(&point(x2));
    while (hi - lo).abs() > tol && !c.exhausted() {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = lo + r * (hi - lo);
            f1 = c.eval(&point(x1));
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = hi - r * (hi - lo);
            f2 = c.eval(&point(x2));
        }
    }
    for (x, f) in [(x1, f1), (x2, f2)] {
        if f < fbest {
            best = x;
            fbest = f;
        }
    }
    (best, fbest)
}

/// Powell's direction-set minimization with bounded golden-section line
/// searches.
pub fn powell<F: Real>(mut f: impl FnMut(&[F]) -> F, x0: &[F], settings: &LocalSettings<F>) -> Minimum<F> {
    let n = x0.len();
    let mut fd = |x: &[F]| f(x);
    let mut c = Counter::new(&mut fd, settings.max_evaluations, n);
    let mut x = x0.to_vec();
    let mut fx = c.eval(&x);
    if n == 0 {
        return c.finish();
    }
    let mut dirs: Vec<Vec<F>> = (0..n).map(|i| (0..n).map(|j| if i == j { F::one() } else { F::zero() }).collect()).collect();
    let bound = settings.initial_step * F::lit(16.0);
    let tol = settings.x_tolerance;
    while !c.exhausted() {
        let start = x.clone();
        let f_start = fx;
        let (mut biggest, mut biggest_drop) = (0, F::zero());
        for (i, d) in dirs.iter().enumerate() {
            let (a, fa) = line_search(&mut c, &x, d, fx, settings.initial_step, bound, tol);
            if fa < fx {
                if fx - fa > biggest_drop {
                    biggest = i;
                    biggest_drop = fx - fa;
                }
                x.iter_mut().zip(d).for_each(|(x, &d)| *x = *x + a * d);
                fx = fa;
            }
            if c.exhausted() {
                break;
            }
        }
        let moved = x.iter().zip(&start).map(|(&a, &b)| (a - b).abs()).fold(F::zero(), F::max);
        if converged(fx, f_start, moved, settings) || c.exhausted() {
            break;
        }
        let new_dir: Vec<F> = x.iter().zip(&start).map(|(&a, &b)| a - b).collect();
        let extrapolated: Vec<F> = x.iter().zip(&start).map(|(&a, &b)| a + a - b).collect();
        let fe = c.eval(&extrapolated);
        if fe < f_start {
            let two = F::lit(2.0);
            let t = two * (f_start - two * fx + fe) * (f_start - fx - biggest_drop).powi(2) - biggest_drop * (f_start - fe).powi(2);
            if t < F::zero() {
                let norm = new_dir.iter().map(|&v| v * v).sum::<F>().sqrt();
                if norm > F::zero() {
                    let unit: Vec<F> = new_dir.iter().map(|&v| v / norm).collect();
                    let (a, fa) = line_search(&mut c, &x, &unit, fx, norm, bound.max(norm * two), tol);
                    if fa < fx {
                        x.iter_mut().zip(&unit).for_each(|(x, &d)| *x = *x + a * d);
                        fx = fa;
                    }
                    dirs.remove(biggest);
                    dirs.push(unit);
                }
            }
        }
    }
    c.finish()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    NelderMead,
    Powell,
}

/// Settings for the continuous `(θ, t)` optimization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSettings {
    pub kind: OptimizerKind,
    pub max_evaluations: usize,
    pub x_tolerance: f64,
    /// Relative tolerance on the objective.
    pub f_tolerance: f64,
    /// Interrogation-time bounds in seconds.
    pub t_bounds: (f64, f64),
    pub restarts: usize,
    /// Starting interrogation time in seconds (clipped to `t_bounds`).
    pub t_init: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            kind: OptimizerKind::Powell,
            max_evaluations: 2000,
            x_tolerance: 1e-4,
            f_tolerance: 1e-6,
            t_bounds: (1e-7, 1e-3),
            restarts: 1,
            t_init: 10e-6,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        let (lo, hi) = self.t_bounds;
        let bad = |m: String| Err(OptimizerError::InvalidSettings(m));
        if !(lo > 0.0 && lo < hi) {
            return bad(format!("t_bounds must satisfy 0 < t_min < t_max, got ({lo}, {hi})"));
        }
        if !(self.x_tolerance > 0.0 && self.f_tolerance > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.max_evaluations == 0 || self.restarts == 0 {
            return bad("max_evaluations and restarts must be at least 1".into());
        }
        if !(self.t_init > 0.0) {
            return bad(format!("t_init must be positive, got {}", self.t_init));
        }
        Ok(())
    }

    /// Starting time of 10 µs clipped to `[T2/10, T2]`.
    pub fn with_t2(mut self, t2: f64) -> Self {
        self.t_init = 10e-6f64.clamp(t2 / 10.0, t2);
        self
    }

    fn local(&self) -> LocalSettings<f64> {
        LocalSettings { max_evaluations: self.max_evaluations, x_tolerance: self.x_tolerance, f_tolerance: self.f_tolerance, initial_step: 1.0 }
    }
}

/// Result of maximizing an objective over `(θ, t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuousResult {
    pub theta: Vec<f64>,
    pub t: f64,
    pub value: f64,
    pub evaluations: usize,
    pub budget_exhausted: bool,
    /// Best value so far after every evaluation (across restarts).
    pub trace: Vec<f64>,
}

pub fn wrap_angle(x: f64) -> f64 {
    x.rem_euclid(std::f64::consts::TAU)
}

/// Maximizes `objective(θ, t)` with `θ` wrapped mod 2π and `t` optimized in
/// log space inside `t_bounds`. With several restarts the best run wins
/// (ties go to the earliest).
pub fn optimize_continuous(objective: &(dyn Fn(&[f64], f64) -> f64 + Sync), n_params: usize, settings: &OptimizerSettings, seed: u64) -> ContinuousResult {
    let (lo, hi) = (settings.t_bounds.0.ln(), settings.t_bounds.1.ln());
    let decode = |x: &[f64]| -> (Vec<f64>, f64) {
        let theta = x[..n_params].iter().map(|&v| wrap_angle(v)).collect();
        (theta, x[n_params].clamp(lo, hi).exp().clamp(settings.t_bounds.0, settings.t_bounds.1))
    };
    let mut best: Option<ContinuousResult> = None;
    let mut trace = Vec::new();
    let mut evaluations = 0;
    for r in 0..settings.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, r as u64));
        let mut x0: Vec<f64> = (0..n_params).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
        x0.push(settings.t_init.clamp(settings.t_bounds.0, settings.t_bounds.1).ln());
        let f = |x: &[f64]| {
            let (theta, t) = decode(x);
            let v = objective(&theta, t);
            if v.is_finite() {
                -v
            } else {
                f64::INFINITY
            }
        };
        let m = match settings.kind {
            OptimizerKind::NelderMead => nelder_mead(f, &x0, &settings.local()),
            OptimizerKind::Powell => powell(f, &x0, &settings.local()),
        };
        let offset = best.as_ref().map_or(f64::NEG_INFINITY, |b| b.value);
        trace.extend(m.trace.iter().map(|&v| (-v).max(offset)));
        evaluations += m.evaluations;
        let (theta, t) = decode(&m.x);
        let run = ContinuousResult { theta, t, value: -m.f, evaluations: m.evaluations, budget_exhausted: m.budget_exhausted, trace: Vec::new() };
        if best.as_ref().map_or(true, |b| run.value > b.value) {
            best = Some(run);
        }
    }
    let mut out = best.expect("at least one restart");
    out.trace = trace;
    out.evaluations = evaluations;
    out
}

/// Scores a parameterized structure at `(θ, t)`; larger is better.
pub trait StructureEvaluator: Sync {
    fn evaluate(&self, structure: &CircuitStructure, theta: &[f64], t: f64) -> f64;
}

impl<F: Fn(&CircuitStructure, &[f64], f64) -> f64 + Sync> StructureEvaluator for F {
    fn evaluate(&self, structure: &CircuitStructure, theta: &[f64], t: f64) -> f64 {
        self(structure, theta, t)
    }
}

/// Hyperparameter choices drawn uniformly per outer-loop iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperSchedule {
    pub choices: Vec<Hyperparams>,
}

impl HyperSchedule {
    /// Single layer with every `k ∈ 1..=N` and `m ∈ 0..=min(edges, N−1)`.
    pub fn single_layer(graph: &ConnectivityGraph) -> Self {
        let n = graph.n_qubits();
        let m_max = graph.edge_count().min(n.saturating_sub(1));
        let choices = (1..=n).flat_map(|k| (0..=m_max).map(move |m| Hyperparams::new(1, k, m))).collect();
        HyperSchedule { choices }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum ProposalOutcome {
    Optimized { objective: f64, t: f64, evaluations: usize, budget_exhausted: bool },
    Skipped { reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProposalRecord {
    pub iteration: usize,
    pub seed: u64,
    pub hyperparams: Hyperparams,
    pub outcome: ProposalOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best_structure: Option<CircuitStructure>,
    pub best_theta: Vec<f64>,
    pub best_t: f64,
    pub best_objective: f64,
    /// `(iteration, objective)` of each optimized proposal.
    pub evaluation_trace: Vec<(usize, f64)>,
    /// Running maximum over `evaluation_trace`.
    pub incumbent_trace: Vec<f64>,
    pub records: Vec<ProposalRecord>,
}

struct Iteration {
    record: ProposalRecord,
    best: Option<(CircuitStructure, ContinuousResult)>,
}

fn run_iteration<E: StructureEvaluator + ?Sized>(
    n: usize,
    graph: &ConnectivityGraph,
    schedule: &HyperSchedule,
    evaluator: &E,
    settings: &OptimizerSettings,
    seed: u64,
    iteration: usize,
) -> Iteration {
    let it_seed = derive_seed(seed, iteration as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(it_seed);
    let hyper = schedule.choices[rng.gen_range(0..schedule.choices.len())];
    let record = |outcome| ProposalRecord { iteration, seed: it_seed, hyperparams: hyper, outcome };
    match propose(n, graph, hyper, derive_seed(it_seed, 0)) {
        Err(e @ (AnsatzError::ProposalExhausted { .. } | AnsatzError::InvalidHyperparams(_))) => {
            Iteration { record: record(ProposalOutcome::Skipped { reason: e.to_string() }), best: None }
        }
        Ok(structure) => {
            let f = |theta: &[f64], t: f64| evaluator.evaluate(&structure, theta, t);
            let r = optimize_continuous(&f, structure.n_params, settings, derive_seed(it_seed, 1));
            let outcome = ProposalOutcome::Optimized { objective: r.value, t: r.t, evaluations: r.evaluations, budget_exhausted: r.budget_exhausted };
            Iteration { record: record(outcome), best: Some((structure, r)) }
        }
    }
}

/// Propose-then-optimize search over `iter_max` iterations. Iterations run
/// in parallel; the reduction keeps the lowest iteration among equal bests.
pub fn outer_loop<E: StructureEvaluator + ?Sized>(
    n_qubits: usize,
    graph: &ConnectivityGraph,
    schedule: &HyperSchedule,
    iter_max: usize,
    evaluator: &E,
    settings: &OptimizerSettings,
    seed: u64,
) -> Result<SearchResult, OptimizerError> {
    if iter_max == 0 {
        return Err(OptimizerError::NoIterations);
    }
    if schedule.choices.is_empty() {
        return Err(OptimizerError::EmptySchedule);
    }
    settings.validate()?;
    let iterations: Vec<Iteration> = (0..iter_max)
        .into_par_iter()
        .map(|i| run_iteration(n_qubits, graph, schedule, evaluator, settings, seed, i))
        .collect();
    let mut result = SearchResult {
        best_structure: None,
        best_theta: Vec::new(),
        best_t: settings.t_init.clamp(settings.t_bounds.0, settings.t_bounds.1),
        best_objective: f64::NEG_INFINITY,
        evaluation_trace: Vec::new(),
        incumbent_trace: Vec::new(),
        records: Vec::with_capacity(iter_max),
    };
    for it in iterations {
        if let Some((structure, r)) = it.best {
            result.evaluation_trace.push((it.record.iteration, r.value));
            if r.value > result.best_objective {
                result.best_objective = r.value;
                result.best_theta = r.theta;
                result.best_t = r.t;
                result.best_structure = Some(structure);
            }
            result.incumbent_trace.push(result.best_objective);
        }
        result.records.push(it.record);
    }
    Ok(result)
}
