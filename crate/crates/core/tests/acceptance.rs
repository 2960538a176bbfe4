//! End-to-end acceptance checks.
//!
//! Each test writes one `criterion N: PASS|FAIL` line straight to stderr, so
//! the lines show up in `cargo test` output without `--nocapture`. Training
//! criteria run the full presets and dominate the runtime; the test profile
//! is optimized for that reason.

use std::cell::Cell;
use std::io::Write;
use std::sync::OnceLock;

use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};

use qcpinn::baselines::{Protocol, PulseSequence};
use qcpinn::loss::{loss_and_gradient, ControlMask, LossBreakdown, LossWeights};
use qcpinn::neural::{forward, forward_with_time_derivative, init_params, wrap_point, ConstraintMode, NetworkParams};
use qcpinn::systems::lambda::{FourLevelParams, LambdaParams};
use qcpinn::systems::nqubit::NQubitParams;
use qcpinn::systems::tls::{tls_optimal_constant_control, tls_steady_state};
use qcpinn::systems::{DensityMatrix, SystemSpec, TlsParams};
use qcpinn::trainer::{train, train_with, CheckpointSink, GridConfig, TrainConfig, TrainOutcome, HISTORY_FILE};
use qcpinn::validator::{
    efficiency, evaluate, min_eigenvalue, norm_drift, rk4_integrate, work_heat, ControlFunction, MetricsRecord,
    SimTrajectory, WorkHeat, DEFAULT_DT, DEFAULT_DT_NQUBIT,
};

fn report(id: u32, title: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "criterion {id:>2}: {verdict}  {title}  [{detail}]");
    assert!(pass, "criterion {id} ({title}) failed: {detail}");
}

fn tls_system() -> SystemSpec {
    SystemSpec::tls(TlsParams::default(), &DensityMatrix::basis(2, 0)).unwrap()
}

fn lambda_system() -> SystemSpec {
    SystemSpec::lambda3(LambdaParams::default(), &DensityMatrix::basis(3, 0)).unwrap()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(1e-300)
}

// ---------------------------------------------------------------- criterion 1

type Component = fn(&LossBreakdown) -> f64;

fn weights(eta: f64, eta_c: f64, chi: f64) -> LossWeights {
    LossWeights {
        eta,
        eta_c,
        chi,
        control_mask: ControlMask::All,
    }
}

fn numeric_component(
    system: &SystemSpec,
    params: &NetworkParams,
    times: &[f64],
    w: &LossWeights,
    mode: ConstraintMode,
    pick: Component,
) -> Vec<f64> {
    let flat = params.to_flat();
    let h = 1e-5;
    let mut q = params.clone();
    (0..flat.len())
        .map(|k| {
            let mut f = flat.clone();
            f[k] = flat[k] + h;
            q.set_flat(&f);
            let up = pick(&loss_and_gradient(&q, system, times, w, mode).unwrap().0);
            f[k] = flat[k] - h;
            q.set_flat(&f);
            let down = pick(&loss_and_gradient(&q, system, times, w, mode).unwrap().0);
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// One loss term's analytic gradient, isolated by subtracting the gradient
/// with that term switched off, against central differences of the term.
fn component_gradient_error(
    system: &SystemSpec,
    params: &NetworkParams,
    times: &[f64],
    on: (&LossWeights, ConstraintMode),
    off: Option<(&LossWeights, ConstraintMode)>,
    pick: Component,
) -> f64 {
    let (_, g) = loss_and_gradient(params, system, times, on.0, on.1).unwrap();
    let mut analytic = g.to_flat();
    if let Some((w, mode)) = off {
        let (_, g0) = loss_and_gradient(params, system, times, w, mode).unwrap();
        for (a, b) in analytic.iter_mut().zip(g0.to_flat()) {
            *a -= b;
        }
    }
    rel_err(&analytic, &numeric_component(system, params, times, on.0, on.1, pick))
}

#[test]
fn criterion_01_gradient_oracle() {
    let clock = std::time::Instant::now();
    let tls = tls_system();
    let lambda = lambda_system();
    let worst_param = Cell::new(0.0f64);
    let worst_time = Cell::new(0.0f64);
    let mut runner = TestRunner::new(PropConfig::with_cases(6));
    let result = runner.run(&(0u64..1000, 0.0f64..2.0), |(seed, shift)| {
        let times: Vec<f64> = (0..10).map(|i| shift + 0.37 * i as f64).collect();
        let hard = ConstraintMode::Hard;
        let soft = |w| ConstraintMode::Soft { weight: w };
        let zero = weights(0.0, 0.0, 0.0);
        let (control, reg, constraint) = (weights(0.3, 0.0, 0.0), weights(0.0, 0.0, 1e-2), weights(0.0, 0.7, 0.0));
        let cases: [(&SystemSpec, (&LossWeights, ConstraintMode), Option<(&LossWeights, ConstraintMode)>, Component); 5] = [
            (&tls, (&zero, hard), None, |b| b.model),
            (&tls, (&control, hard), Some((&zero, hard)), |b| b.control),
            (&tls, (&reg, hard), Some((&zero, hard)), |b| b.regularization),
            (&tls, (&zero, soft(1.0)), Some((&zero, soft(0.0))), |b| b.ic),
            // The qubit has no algebraic constraints; the Λ system does.
            (&lambda, (&constraint, hard), Some((&zero, hard)), |b| b.constraint),
        ];
        for (sys, on, off, pick) in cases {
            // 1 → 12 → 12 → 5 is 245 parameters on the qubit.
            let p = init_params(&[1, 12, 12, sys.n() + sys.m()], seed).unwrap();
            prop_assert!(sys.n() != tls.n() || p.num_params() <= 500);
            worst_param.set(worst_param.get().max(component_gradient_error(sys, &p, &times, on, off, pick)));
        }
        // Exact time derivative against central differences.
        let p = init_params(&[1, 12, 12, tls.n() + tls.m()], seed).unwrap();
        let h = 1e-5;
        for &t in times.iter().filter(|t| **t >= h) {
            let (_, dy) = forward_with_time_derivative(&p, t).unwrap();
            let (up, down) = (forward(&p, t + h).unwrap(), forward(&p, t - h).unwrap());
            let fd: Vec<f64> = up.iter().zip(down.iter()).map(|(a, b)| (a - b) / (2.0 * h)).collect();
            worst_time.set(worst_time.get().max(rel_err(dy.as_slice().unwrap(), &fd)));
        }
        prop_assert!(worst_param.get() < 1e-5 && worst_time.get() < 1e-6);
        Ok(())
    });
    let secs = clock.elapsed().as_secs_f64();
    report(
        1,
        "gradient oracle",
        result.is_ok() && secs < 10.0,
        &format!(
            "param rel err {:.1e}, d/dt rel err {:.1e}, {secs:.1} s",
            worst_param.get(),
            worst_time.get()
        ),
    );
}

// ---------------------------------------------------------------- criterion 2

#[test]
fn criterion_02_uncontrolled_steady_state() {
    let sys = tls_system();
    let traj = rk4_integrate(&sys, &ControlFunction::Zero(1), &sys.x0.to_vec(), (0.0, 200.0), DEFAULT_DT).unwrap();
    let end = traj.final_state();
    let expected = [0.7225, 0.2775, -0.1106, 0.0083];
    let worst = end.iter().zip(expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    report(
        2,
        "uncontrolled qubit steady state",
        worst < 5e-3,
        &format!("x(200) = {end:.4?}, max deviation {worst:.1e}"),
    );
}

// ---------------------------------------------------------------- criterion 3

#[test]
fn criterion_03_constant_control_optimum() {
    let p = TlsParams::default();
    let opt = tls_optimal_constant_control(&p, &DensityMatrix::maximally_mixed(2)).unwrap();
    let x1 = tls_steady_state(&p, -4.0).unwrap()[0];
    let pass = (opt.xi_star + 4.0).abs() < 0.05 && (opt.fidelity_star - 0.9988).abs() < 2e-3 && (x1 - 0.5049).abs() < 1e-3;
    report(
        3,
        "constant-control optimum",
        pass,
        &format!("xi* = {:.4}, F* = {:.5}, x1(-4) = {x1:.4}", opt.xi_star, opt.fidelity_star),
    );
}

// ---------------------------------------------------------------- criterion 4

fn baseline_metrics(protocol: Protocol) -> MetricsRecord {
    let seq = PulseSequence::preset(protocol).unwrap();
    let horizon = seq.duration;
    evaluate(&lambda_system(), &ControlFunction::Baseline(seq), (0.0, horizon), DEFAULT_DT, None)
        .unwrap()
        .1
}

#[test]
fn criterion_04_inverse_engineering() {
    let m = baseline_metrics(Protocol::InverseEngineering);
    let (p2, area, t_f) = (m.p2.unwrap(), m.area.unwrap(), m.t_f.unwrap());
    let pass = (p2 - 0.97).abs() <= 0.02 && (area - 19.8).abs() <= 1.0 && (t_f - 3.0).abs() <= 0.1;
    report(
        4,
        "inverse engineering, polynomial ansatz",
        pass,
        &format!("p2 = {p2:.4}, area = {area:.2}, t_f = {t_f:.3}"),
    );
}

// ---------------------------------------------------------------- criterion 5

#[test]
fn criterion_05_modsatd_and_stirep() {
    let mod_satd = baseline_metrics(Protocol::ModSatd);
    let stirep = baseline_metrics(Protocol::Stirep);
    let (p_m, p_s, a_s) = (mod_satd.p2.unwrap(), stirep.p2.unwrap(), stirep.area.unwrap());
    let pass = (p_m - 0.98).abs() <= 0.03 && (p_s - 0.98).abs() <= 0.03;
    // The STIREP area is flagged, not enforced.
    let area_ok = (a_s - 53.3).abs() <= 0.1 * 53.3;
    let flag = if area_ok {
        String::new()
    } else {
        format!("; OPEN QUESTION: STIREP area {a_s:.2} vs 53.3 (clock-independent under a linear time map)")
    };
    report(
        5,
        "MOD-SATD and STIREP transfer",
        pass,
        &format!("MOD-SATD p2 = {p_m:.4}, STIREP p2 = {p_s:.4}{flag}"),
    );
}

// ---------------------------------------------------------------- criterion 6

#[test]
fn criterion_06_lambda_training() {
    let system = lambda_system();
    let mut lines = Vec::new();
    let mut pass = false;
    for seed in 0..3 {
        let mut config = TrainConfig::lambda_preset();
        config.seed = seed;
        let clock = std::time::Instant::now();
        let run = train(&system, &config).unwrap();
        let secs = clock.elapsed().as_secs_f64();
        let ctrl = ControlFunction::network(run.selected().clone(), &system, config.constraint).unwrap();
        let (_, m) = evaluate(&system, &ctrl, (0.0, config.grid.t_end), DEFAULT_DT, None).unwrap();
        let (p2, t_f, area) = (m.p2.unwrap(), m.t_f.unwrap(), m.area.unwrap());
        lines.push(format!("seed {seed}: p2 {p2:.4} t_f {t_f:.2} area {area:.2} ({secs:.0} s)"));
        if p2 >= 0.90 && t_f <= 5.0 && area <= 20.0 && secs < 1800.0 {
            pass = true;
            break;
        }
    }
    report(6, "network transfer on the Λ system", pass, &lines.join("; "));
}

// ------------------------------------------------------- criteria 7, 8 and 11

struct QubitRun {
    seed: u64,
    record: MetricsRecord,
    traj: SimTrajectory,
    energy: WorkHeat,
    xi_tail: (f64, f64),
    x0_error: f64,
}

impl QubitRun {
    fn in_band(&self) -> bool {
        self.record.min_fidelity_tail.unwrap() >= 0.98 && self.xi_tail.0 >= -4.5 && self.xi_tail.1 <= -3.5
    }

    fn summary(&self) -> String {
        format!(
            "seed {}: F(t>=20) >= {:.4}, xi tail in [{:.3}, {:.3}]",
            self.seed,
            self.record.min_fidelity_tail.unwrap(),
            self.xi_tail.0,
            self.xi_tail.1
        )
    }
}

fn qubit_run(mode: ConstraintMode, seed: u64) -> QubitRun {
    let system = tls_system();
    let params = TlsParams::default();
    let mut config = TrainConfig::tls_preset();
    config.seed = seed;
    config.constraint = mode;
    let out = train(&system, &config).unwrap();
    let net = out.selected().clone();
    let x0_error = {
        let x = wrap_point(mode, system.x0.view(), system.u0.view(), &net, 0.0).unwrap().x;
        x.iter().zip(system.x0.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    let ctrl = ControlFunction::network(net, &system, mode).unwrap();
    let horizon = config.grid.t_end;
    let (traj, record) = evaluate(&system, &ctrl, (0.0, horizon), DEFAULT_DT, Some(20.0)).unwrap();
    let xi_tail = traj
        .times
        .iter()
        .zip(&traj.controls)
        .filter(|(t, _)| **t >= 0.8 * horizon)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, u)| (lo.min(u[0]), hi.max(u[0])));
    let energy = work_heat(&traj, &ctrl, &params).unwrap();
    QubitRun {
        seed,
        record,
        traj,
        energy,
        xi_tail,
        x0_error,
    }
}

/// Trains seeds 0, 1, 2 in turn and stops at the first one inside the band.
fn qubit_runs(mode: ConstraintMode) -> Vec<QubitRun> {
    let mut runs = Vec::new();
    for seed in 0..3 {
        let run = qubit_run(mode, seed);
        let done = run.in_band();
        runs.push(run);
        if done {
            break;
        }
    }
    runs
}

fn hard_runs() -> &'static [QubitRun] {
    static RUNS: OnceLock<Vec<QubitRun>> = OnceLock::new();
    RUNS.get_or_init(|| qubit_runs(ConstraintMode::Hard))
}

#[test]
fn criterion_07_qubit_training() {
    let runs = hard_runs();
    let pass = runs.iter().any(QubitRun::in_band);
    let detail: Vec<String> = runs.iter().map(QubitRun::summary).collect();
    report(7, "network control of the qubit", pass, &detail.join("; "));
}

#[test]
fn criterion_08_energy() {
    // Eff stays in [0, 1] for arbitrary ratio histories.
    let mut runner = TestRunner::new(PropConfig::with_cases(256));
    let bounded = runner
        .run(&prop::collection::vec(prop::option::weighted(0.9, 0.0f64..50.0), 2..200), |eta| {
            let times: Vec<f64> = (0..eta.len()).map(|i| 0.1 * i as f64).collect();
            if let Ok(e) = efficiency(&eta, &times) {
                prop_assert!((0.0..=1.0).contains(&e));
            }
            Ok(())
        })
        .is_ok();

    let runs = hard_runs();
    let run = runs.iter().find(|r| r.in_band()).unwrap_or_else(|| runs.last().unwrap());
    let t_end = *run.traj.times.last().unwrap();
    let eta_dev = run
        .energy
        .times
        .iter()
        .zip(&run.energy.eta)
        .filter(|(t, _)| **t >= 0.9 * t_end)
        .map(|(_, e)| e.map_or(f64::INFINITY, |v| (v - 1.0).abs()))
        .fold(0.0, f64::max);
    let eff = efficiency(&run.energy.eta, &run.energy.times).unwrap_or(f64::NAN);
    // Eff depends on the window; the shorter one is printed for reference only.
    let k = run.energy.times.iter().take_while(|t| **t <= 10.0 + 1e-9).count();
    let eff_10 = efficiency(&run.energy.eta[..k], &run.energy.times[..k]).unwrap_or(f64::NAN);
    let pass = bounded && eta_dev <= 0.05 && (eff - 0.5249).abs() <= 0.05;
    report(
        8,
        "work, heat and efficiency",
        pass,
        &format!(
            "Eff bounded on random inputs: {bounded}; seed {}: max |eta - 1| over final 10% = {eta_dev:.3}, Eff = {eff:.4} (on [0, 10]: {eff_10:.4})",
            run.seed
        ),
    );
}

#[test]
fn criterion_11_soft_versus_hard() {
    let hard = hard_runs();
    let soft = qubit_runs(ConstraintMode::Soft { weight: 1.0 });
    let hard_ok = hard.iter().any(QubitRun::in_band);
    let soft_ok = soft.iter().any(QubitRun::in_band);
    let exact = hard.iter().all(|r| r.x0_error == 0.0);
    let soft_ic = soft.iter().map(|r| r.x0_error).fold(f64::INFINITY, f64::min);
    report(
        11,
        "soft and hard initial conditions",
        hard_ok && soft_ok && exact,
        &format!(
            "hard: {}; soft: {}; hard |x(0) - x0| = 0: {exact}; soft |x(0) - x0| = {soft_ic:.1e}",
            hard.iter().map(QubitRun::summary).collect::<Vec<_>>().join(", "),
            soft.iter().map(QubitRun::summary).collect::<Vec<_>>().join(", ")
        ),
    );
}

// ---------------------------------------------------------------- criterion 9

fn register_run(params: NQubitParams, tied: bool, seed: u64) -> (f64, f64) {
    let system = SystemSpec::nqubit(params, tied).unwrap();
    let mut config = TrainConfig::nqubit_preset();
    config.seed = seed;
    let out = train(&system, &config).unwrap();
    let ctrl = ControlFunction::network(out.selected().clone(), &system, config.constraint).unwrap();
    let (_, m) = evaluate(&system, &ctrl, (0.0, config.grid.t_end), DEFAULT_DT_NQUBIT, None).unwrap();
    (m.final_fidelity.unwrap(), m.final_expectation.unwrap())
}

#[test]
fn criterion_09_qubit_registers() {
    let mut detail = Vec::new();
    let mut free_ok = false;
    for seed in 0..3 {
        let (f, e) = register_run(NQubitParams::non_interacting(5), false, seed);
        detail.push(format!("N=5 seed {seed}: F {f:.4} <Hp> {e:.4}"));
        if f >= 0.99 && e <= 0.05 {
            free_ok = true;
            break;
        }
    }
    let mut ising_ok = false;
    for seed in 0..3 {
        let (f, e) = register_run(NQubitParams::ising(3), true, seed);
        detail.push(format!("Ising N=3 seed {seed}: F {f:.4} <Hp> {e:.4}"));
        if f >= 0.98 && e <= -0.44 {
            ising_ok = true;
            break;
        }
    }
    report(9, "qubit registers", free_ok && ising_ok, &detail.join("; "));
}

// --------------------------------------------------------------- criterion 10

#[test]
fn criterion_10_conservation() {
    let systems = [
        tls_system(),
        lambda_system(),
        SystemSpec::lambda4(FourLevelParams::default(), &DensityMatrix::basis(4, 0)).unwrap(),
        SystemSpec::nqubit(NQubitParams::non_interacting(3), false).unwrap(),
        SystemSpec::nqubit(NQubitParams::ising(3), true).unwrap(),
    ];
    let worst_drift = Cell::new(0.0f64);
    let worst_eig = Cell::new(f64::INFINITY);
    let mut runner = TestRunner::new(PropConfig::with_cases(12));
    let conserved = runner
        .run(&(0usize..systems.len(), 0u64..10_000, 0.5f64..3.0), |(k, seed, scale)| {
            let sys = &systems[k];
            // A random smooth control: an untrained network, scaled up.
            let mut p = init_params(&[1, 8, sys.n() + sys.m()], seed).unwrap();
            let last = p.weights.len() - 1;
            p.weights[last].mapv_inplace(|w| w * scale);
            let ctrl = ControlFunction::network(p, sys, ConstraintMode::Hard).unwrap();
            let dt = if sys.name.contains("qubit") || sys.name == "ising" { DEFAULT_DT_NQUBIT } else { DEFAULT_DT };
            let traj = rk4_integrate(sys, &ctrl, &sys.x0.to_vec(), (0.0, 4.0), dt).unwrap();
            let drift = norm_drift(&traj, sys);
            worst_drift.set(worst_drift.get().max(drift));
            prop_assert!(drift < 1e-8);
            if sys.kind.packing().is_some() {
                let e = min_eigenvalue(&traj, sys).unwrap();
                worst_eig.set(worst_eig.get().min(e));
                prop_assert!(e >= -1e-9);
            }
            Ok(())
        })
        .is_ok();

    // Fourth-order self-convergence on a smooth analytic drive.
    let sys = lambda_system();
    let seq = PulseSequence::preset(Protocol::InverseEngineering).unwrap();
    let ctrl = ControlFunction::Baseline(seq);
    let end = |dt: f64| -> Vec<f64> {
        rk4_integrate(&sys, &ctrl, &sys.x0.to_vec(), (0.0, 3.0), dt).unwrap().final_state().to_vec()
    };
    let (a, b, c) = (end(0.04), end(0.02), end(0.01));
    let e1 = rel_err(&a, &b);
    let e2 = rel_err(&b, &c);
    let order = (e1 / e2).log2();
    let pass = conserved && (3.7..=4.3).contains(&order);
    report(
        10,
        "conservation and RK4 order",
        pass,
        &format!(
            "max norm drift {:.1e}, min eigenvalue {:.1e}, observed order {order:.2}",
            worst_drift.get(),
            worst_eig.get()
        ),
    );
}

// --------------------------------------------------------------- criterion 12

fn tiny_run(dir: &std::path::Path, system: &SystemSpec, config: &TrainConfig) -> TrainOutcome {
    let sink = CheckpointSink::new(dir);
    let out = train_with(system, config, None, None, Some(&sink)).unwrap();
    out.history.write_csv(&dir.join(HISTORY_FILE)).unwrap();
    out
}

#[test]
fn criterion_12_determinism() {
    let mut identical = true;
    let mut files = 0;
    let cases = [
        (tls_system(), TrainConfig::tls_preset()),
        (lambda_system(), TrainConfig::lambda_preset()),
    ];
    for (system, preset) in cases {
        let config = TrainConfig {
            epochs: 60,
            seed: 7,
            hidden_layers: vec![16, 16],
            grid: GridConfig {
                points: 40,
                ..preset.grid.clone()
            },
            checkpoint_every: 20,
            ..preset
        };
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        tiny_run(a.path(), &system, &config);
        tiny_run(b.path(), &system, &config);
        for name in ["history.csv", "checkpoint.json", "best.json"] {
            let (pa, pb) = (a.path().join(name), b.path().join(name));
            if !pa.exists() && !pb.exists() {
                continue;
            }
            files += 1;
            identical &= std::fs::read(pa).ok() == std::fs::read(pb).ok();
        }
    }
    report(
        12,
        "determinism",
        identical && files == 5,
        &format!("{files} file pairs compared, byte-identical: {identical}"),
    );
}
