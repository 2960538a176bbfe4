//! Transfer `|1⟩ → |2⟩` in a four-level system where a second, detuned
//! excited level sits next to the lossy one.
//!
//!     cargo run --release --example four_level -- [seed] [epochs]

use qcpinn::systems::lambda::FourLevelParams;
use qcpinn::systems::{DensityMatrix, SystemSpec};
use qcpinn::trainer::{train, TrainConfig};
use qcpinn::validator::{evaluate, write_trajectory_csv, ControlFunction};

fn main() -> qcpinn::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut config = TrainConfig::lambda_preset();
    if let Some(seed) = args.next() {
        config.seed = seed.parse().expect("seed");
    }
    if let Some(epochs) = args.next() {
        config.epochs = epochs.parse().expect("epochs");
    }
    let system = SystemSpec::lambda4(FourLevelParams::default(), &DensityMatrix::basis(4, 0))?;
    let run = train(&system, &config)?;
    let control = ControlFunction::network(run.selected().clone(), &system, config.constraint)?;
    let (traj, metrics) = evaluate(&system, &control, (0.0, config.grid.t_end), 1e-3, None)?;
    let out = std::path::PathBuf::from(format!("out/four_level_seed{}", config.seed));
    write_trajectory_csv(&out.join("trajectory.csv"), &traj, &system)?;
    metrics.write_json(&out.join("metrics.json"))?;
    println!(
        "p2 = {:.4}  t_f = {:.2}  area = {:.2}",
        metrics.p2.unwrap(),
        metrics.t_f.unwrap(),
        metrics.area.unwrap()
    );
    Ok(())
}
