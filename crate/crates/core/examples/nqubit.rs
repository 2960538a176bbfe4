//! Adiabatic-style ground-state search on a qubit register: the network
//! learns the schedules `g0(t)` and `gp(t)` that carry `|+…+⟩` into the
//! ground space of the problem Hamiltonian.
//!
//!     cargo run --release --example nqubit -- [free|ising] [n] [seed] [epochs]
//!
//! `ising` ties the schedules through `g0 = 1 − gp`.

use qcpinn::systems::nqubit::NQubitParams;
use qcpinn::systems::SystemSpec;
use qcpinn::trainer::{train, TrainConfig};
use qcpinn::validator::{evaluate, write_trajectory_csv, ControlFunction, DEFAULT_DT_NQUBIT};

fn main() -> qcpinn::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let ising = args.first().map_or(false, |a| a == "ising");
    let n = args.get(1).map_or(if ising { 3 } else { 5 }, |a| a.parse().expect("n"));
    let mut config = TrainConfig::nqubit_preset();
    if let Some(seed) = args.get(2) {
        config.seed = seed.parse().expect("seed");
    }
    if let Some(epochs) = args.get(3) {
        config.epochs = epochs.parse().expect("epochs");
    }
    let params = if ising {
        NQubitParams::ising(n)
    } else {
        NQubitParams::non_interacting(n)
    };
    let system = SystemSpec::nqubit(params, ising)?;
    let run = train(&system, &config)?;
    let control = ControlFunction::network(run.selected().clone(), &system, config.constraint)?;
    let (traj, metrics) = evaluate(&system, &control, (0.0, config.grid.t_end), DEFAULT_DT_NQUBIT, None)?;
    let out = std::path::PathBuf::from(format!("out/{}{n}_seed{}", system.name, config.seed));
    write_trajectory_csv(&out.join("trajectory.csv"), &traj, &system)?;
    metrics.write_json(&out.join("metrics.json"))?;
    println!(
        "ground-state fidelity {:.4}  <Hp> {:.4}",
        metrics.final_fidelity.unwrap(),
        metrics.final_expectation.unwrap()
    );
    Ok(())
}
