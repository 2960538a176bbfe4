//! Steer a dephasing qubit towards the maximally mixed state with a learned
//! phase-damping control, then report fidelity, work, heat and efficiency.
//!
//!     cargo run --release --example tls_control -- [seed] [epochs] [eta]

use qcpinn::systems::{DensityMatrix, SystemSpec, TlsParams};
use qcpinn::trainer::{train_with, CheckpointSink, TrainConfig, HISTORY_FILE};
use qcpinn::validator::{efficiency, evaluate, work_heat, write_energy_csv, write_trajectory_csv, ControlFunction};

fn main() -> qcpinn::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut config = TrainConfig::tls_preset();
    if let Some(seed) = args.next() {
        config.seed = seed.parse().expect("seed");
    }
    if let Some(epochs) = args.next() {
        config.epochs = epochs.parse().expect("epochs");
    }
    if let Some(eta) = args.next() {
        config.loss.eta = eta.parse().expect("eta");
    }
    let params = TlsParams::default();
    let system = SystemSpec::tls(params, &DensityMatrix::basis(2, 0))?;
    let out = std::path::PathBuf::from(format!("out/tls_seed{}_eta{}", config.seed, config.loss.eta));
    let run = train_with(&system, &config, None, None, Some(&CheckpointSink::new(&out)))?;
    run.history.write_csv(&out.join(HISTORY_FILE))?;

    let horizon = config.grid.t_end;
    let control = ControlFunction::network(run.selected().clone(), &system, config.constraint)?;
    let (traj, metrics) = evaluate(&system, &control, (0.0, horizon), 1e-3, Some(20.0))?;
    write_trajectory_csv(&out.join("trajectory.csv"), &traj, &system)?;
    metrics.write_json(&out.join("metrics.json"))?;

    // Mean control over the last fifth of the window.
    let tail: Vec<f64> = traj
        .times
        .iter()
        .zip(&traj.controls)
        .filter(|(t, _)| **t >= 0.8 * horizon)
        .map(|(_, u)| u[0])
        .collect();
    let xi_tail = tail.iter().sum::<f64>() / tail.len() as f64;

    let wh = work_heat(&traj, &control, &params)?;
    write_energy_csv(&out.join("energy.csv"), &wh)?;
    let eta_end = wh.eta.last().copied().flatten().unwrap_or(f64::NAN);
    println!(
        "fidelity(t>=20) >= {:.4}  final {:.4}  xi tail {:.3}  eta(T) {:.3}  Eff {:.4}",
        metrics.min_fidelity_tail.unwrap(),
        metrics.final_fidelity.unwrap(),
        xi_tail,
        eta_end,
        efficiency(&wh.eta, &wh.times)?
    );
    Ok(())
}
