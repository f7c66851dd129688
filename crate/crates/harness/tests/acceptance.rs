//! Acceptance gate: ten criteria, one PASS/FAIL line each.

use std::f64::consts::PI;
use std::time::Instant;

use metroforge::baselines::{build_baseline, BaselineKind};
use metroforge::circuit::{ConcreteCircuit, ConnectivityGraph};
use metroforge::metrics::{cfi_phi, exact_distribution, qfi_phi, signal_derivative_param_shift, stage_qfi_decomposition};
use metroforge::noise::{amplitude_damping, depolarizing_channel, interrogation_channel, phase_damping, KrausChannel, NoiseModel};
use metroforge::optimizer::HyperSchedule;
use metroforge::simulator::ExactBackend;
use metroforge::{propose, DensityMatrix};
use metroforge_harness::experiments::{self, Ablation, OPTIMIZED, OPTIMIZED_ACTUAL, OPTIMIZED_UNIFORM};
use metroforge_harness::{preset, ExperimentConfig, ResultRecord};
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn full_noise() -> NoiseModel {
    NoiseModel::superconducting_average()
}

fn config(name: &str, qubits: &[usize]) -> ExperimentConfig {
    let mut c = ExperimentConfig::from_toml(preset(name).expect("preset")).expect("valid preset");
    c.qubits = qubits.to_vec();
    c
}

fn random_circuits(count: usize, seed: u64) -> Vec<(ConcreteCircuit<f64>, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let n = rng.gen_range(1..=4);
        let graph = if rng.gen_bool(0.5) { ConnectivityGraph::chain(n) } else { ConnectivityGraph::all_to_all(n) };
        let choices = HyperSchedule::single_layer(&graph).choices;
        let hyper = choices[rng.gen_range(0..choices.len())];
        let Ok(structure) = propose(n, &graph, hyper, rng.gen()) else { continue };
        let theta: Vec<f64> = (0..structure.n_params).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
        let t = rng.gen_range(1e-6..60e-6);
        let phi = rng.gen_range(0.0..2.0 * PI);
        out.push((structure.bind(&theta).expect("bind"), phi, t));
    }
    out
}

fn criterion_1() -> Outcome {
    let off = NoiseModel::noiseless();
    let mut worst: f64 = 0.0;
    for n in 1..=5 {
        for (kind, expect) in [(BaselineKind::ParallelRamsey, n as f64), (BaselineKind::GhzH, (n * n) as f64), (BaselineKind::GhzInv, (n * n) as f64)] {
            let v = cfi_phi(&ExactBackend, &build_baseline(kind, n), PI / 6.0, 1e-5, 0, &off, 0).expect("cfi").value;
            worst = worst.max((v - expect).abs());
        }
    }
    outcome(worst <= 1e-8, format!("max |CFI - expected| = {worst:.2e} (tol 1e-8)"))
}

fn criterion_2() -> Outcome {
    let noise = full_noise();
    let mut worst_gap = f64::NEG_INFINITY;
    let mut worst_bound = f64::NEG_INFINITY;
    for (c, phi, t) in random_circuits(50, 2) {
        let cfi = cfi_phi(&ExactBackend, &c, phi, t, 0, &noise, 0).expect("cfi").value;
        let qfi = qfi_phi(&c, phi, t, 0, &noise).expect("qfi");
        worst_gap = worst_gap.max(cfi - qfi);
        worst_bound = worst_bound.max(qfi - (c.n_qubits * c.n_qubits) as f64);
    }
    outcome(
        worst_gap <= 1e-6 && worst_bound <= 1e-6,
        format!("max(CFI - QFI) = {worst_gap:.2e}, max(QFI - N^2) = {worst_bound:.2e} (tol 1e-6)"),
    )
}

fn criterion_3() -> Outcome {
    let noise = full_noise();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for (c, phi, t) in random_circuits(50, 2) {
        let sd = signal_derivative_param_shift(&ExactBackend, &c, phi, t, 0, &noise, 0).expect("shift");
        let plus = exact_distribution(&c, phi + h, t, 0, &noise).expect("p+");
        let minus = exact_distribution(&c, phi - h, t, 0, &noise).expect("p-");
        for x in 0..plus.len() {
            worst = worst.max((sd.derivative[x] - (plus[x] - minus[x]) / (2.0 * h)).abs());
        }
    }
    outcome(worst <= 1e-5, format!("max |shift - central difference| = {worst:.2e} (tol 1e-5)"))
}

fn random_state(rng: &mut ChaCha8Rng) -> Array2<Complex64> {
    let g = Array2::from_shape_fn((2, 2), |_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let rho = g.dot(&g.t().mapv(|z| z.conj()));
    let tr = rho[[0, 0]] + rho[[1, 1]];
    rho.mapv(|z| z / tr)
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (t1, t2) = (52.2e-6, 62.8e-6);
    let mut completeness: f64 = 0.0;
    let mut trace: f64 = 0.0;
    let mut min_eig: f64 = f64::INFINITY;
    let mut semigroup: f64 = 0.0;
    for _ in 0..100 {
        let p = rng.gen_range(0.0..1.0);
        let dt1 = rng.gen_range(0.0..100e-6);
        let dt2 = rng.gen_range(0.0..100e-6);
        let channels: Vec<KrausChannel<f64>> = vec![
            depolarizing_channel(p).unwrap(),
            amplitude_damping(p).unwrap(),
            phase_damping(p).unwrap(),
            interrogation_channel(dt1, t1, t2).unwrap(),
        ];
        let rho = random_state(&mut rng);
        for ch in &channels {
            completeness = completeness.max(ch.completeness_error());
            let out = ch.apply_matrix(&rho);
            trace = trace.max(((out[[0, 0]] + out[[1, 1]]) - 1.0).norm());
            min_eig = min_eig.min(DensityMatrix::from_matrix(1, out).map(|d| d.min_eigenvalue()).unwrap_or(f64::NEG_INFINITY));
        }
        let split = interrogation_channel::<f64>(dt2, t1, t2).unwrap().apply_matrix(&interrogation_channel(dt1, t1, t2).unwrap().apply_matrix(&rho));
        let joint = interrogation_channel::<f64>(dt1 + dt2, t1, t2).unwrap().apply_matrix(&rho);
        semigroup = semigroup.max((&split - &joint).iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    outcome(
        completeness <= 1e-10 && trace <= 1e-10 && min_eig >= -1e-10 && semigroup <= 1e-9,
        format!("completeness {completeness:.1e}, trace {trace:.1e}, min eigenvalue {min_eig:.1e}, semigroup {semigroup:.1e}"),
    )
}

fn criterion_5() -> Outcome {
    let noise = full_noise();
    let t = 20e-6;
    let mut worst = f64::INFINITY;
    let mut summary = Vec::new();
    for kind in BaselineKind::ALL {
        let d = stage_qfi_decomposition(&build_baseline(kind, 3), 1e4 * t, t, 0, &noise).expect("decomposition");
        let step = d.windows(2).map(|w| w[1].value - w[0].value).fold(f64::INFINITY, f64::min);
        worst = worst.min(step);
        summary.push(format!("{kind}: {}", d.iter().map(|s| format!("{:.3}", s.value)).collect::<Vec<_>>().join("<=")));
    }
    outcome(worst >= -1e-8, format!("smallest step {worst:.2e}; {}", summary.join("; ")))
}

fn criterion_6() -> Outcome {
    let off = NoiseModel::noiseless();
    let mut full: f64 = 0.0;
    let mut fringe: f64 = 0.0;
    for n in 1..=5 {
        let dim = 1usize << n;
        for i in 0..17 {
            let phi = 2.0 * PI * i as f64 / 16.0;
            let h = exact_distribution(&build_baseline(BaselineKind::GhzH, n), phi, 1e-5, 0, &off).expect("ghz-h");
            let inv = exact_distribution(&build_baseline(BaselineKind::GhzInv, n), phi, 1e-5, 0, &off).expect("ghz-inv");
            full = full.max(h.iter().zip(&inv).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
            let even: f64 = (0..dim).filter(|x| x.count_ones() % 2 == 0).map(|x| h[x]).sum();
            let zero: f64 = (0..dim / 2).map(|x| inv[x]).sum();
            fringe = fringe.max((even - zero).abs());
        }
    }
    outcome(
        full <= 1e-9,
        format!("max outcome-probability difference {full:.2e} (tol 1e-9); parity fringe vs first-qubit fringe differ by {fringe:.2e}"),
    )
}

fn best_baseline(record: &ResultRecord, experiment: &str, n: usize) -> f64 {
    BaselineKind::ALL.iter().map(|k| record.row(experiment, n, k.name()).expect("baseline row").objective).fold(f64::NEG_INFINITY, f64::max)
}

fn optimized_ratio(record: &ResultRecord, experiment: &str, n: usize) -> Option<f64> {
    let opt = record.row(experiment, n, OPTIMIZED)?.objective;
    Some(opt / best_baseline(record, experiment, n))
}

fn criterion_7(full: &ResultRecord) -> Outcome {
    match optimized_ratio(full, "full-noise", 5) {
        Some(r) => outcome(r >= 1.2, format!("N=5 optimized / best baseline objective = {r:.3} (gate 1.2)")),
        None => outcome(false, format!("no optimized row: {:?}", full.failures)),
    }
}

fn criterion_8(full: &ResultRecord) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for n in 3..=5 {
        let r = full.row("full-noise", n, "parallel-ramsey").expect("ramsey").t_star_s;
        let g = full.row("full-noise", n, "ghz-h").expect("ghz-h").t_star_s;
        ok &= r > g;
        parts.push(format!("N={n}: {:.1} us vs {:.1} us", r * 1e6, g * 1e6));
    }
    outcome(ok, format!("t*(parallel-ramsey) > t*(ghz-h): {}", parts.join(", ")))
}

fn criterion_9(full_ratio: Option<f64>) -> Outcome {
    let mut c = config("full-noise", &[3]);
    c.noise = Ablation::RemoveGateNoise.apply(&c.noise);
    let no_gate = experiments::run_baselines(&c);
    let inv = no_gate.row("full-noise", 3, "ghz-inv").expect("ghz-inv").objective;
    let ramsey = no_gate.row("full-noise", 3, "parallel-ramsey").expect("ramsey").objective;
    let a = inv > ramsey;
    let suppressed = experiments::run_ablation_study(&config("full-noise", &[5]), Ablation::SuppressT1T2x10);
    let ratio = optimized_ratio(&suppressed, "full-noise/suppress-t1t2-x10", 5);
    let b = matches!((ratio, full_ratio), (Some(s), Some(f)) if s < f);
    outcome(
        a && b,
        format!(
            "(a) no gate noise, N=3: ghz-inv {inv:.3e} vs parallel-ramsey {ramsey:.3e} [{}]; (b) N=5 ratio with T1,T2 x10 = {} vs full noise {} [{}]",
            if a { "ok" } else { "violated" },
            ratio.map_or("n/a".into(), |r| format!("{r:.3}")),
            full_ratio.map_or("n/a".into(), |r| format!("{r:.3}")),
            if b { "ok" } else { "violated" }
        ),
    )
}

fn criterion_10() -> Outcome {
    let c = config("signal-distribution", &[3]);
    let record = experiments::run_signal_distribution_study(&c).expect("signal study");
    let study = c.signal_study.as_ref().expect("section");
    let mut ratios = Vec::new();
    for &s in &study.stddevs {
        let label = experiments::stddev_label(&c.experiment, s);
        let (Some(a), Some(u)) = (record.row(&label, 3, OPTIMIZED_ACTUAL), record.row(&label, 3, OPTIMIZED_UNIFORM)) else {
            return outcome(false, format!("missing rows for {label}: {:?}", record.failures));
        };
        ratios.push((s, a.objective / u.objective));
    }
    let first = ratios[0].1;
    let monotone = ratios.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12);
    let listing = ratios.iter().map(|(s, r)| format!("sigma={s}: {r:.3}")).collect::<Vec<_>>().join(", ");
    outcome(first >= 1.05 && monotone, format!("actual/uniform objective {listing} (gate 1.05 at the smallest sigma, non-increasing)"))
}

fn main() {
    let started = Instant::now();
    let mut results: Vec<(usize, Outcome)> = Vec::new();
    let mut report = |i: usize, o: Outcome| {
        println!("criterion {i:>2}: {} - {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((i, o));
    };
    report(1, criterion_1());
    report(2, criterion_2());
    report(3, criterion_3());
    report(4, criterion_4());
    report(5, criterion_5());
    report(6, criterion_6());
    let mut scaling = experiments::run_baselines(&config("full-noise", &[3, 4]));
    scaling.merge(experiments::run_scaling_study(&config("full-noise", &[5])));
    let full_ratio = optimized_ratio(&scaling, "full-noise", 5);
    report(7, criterion_7(&scaling));
    report(8, criterion_8(&scaling));
    report(9, criterion_9(full_ratio));
    report(10, criterion_10());
    let failed: Vec<usize> = results.iter().filter(|(_, o)| !o.pass).map(|(i, _)| *i).collect();
    println!("acceptance: {} of {} passed in {:.1} s", results.len() - failed.len(), results.len(), started.elapsed().as_secs_f64());
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
