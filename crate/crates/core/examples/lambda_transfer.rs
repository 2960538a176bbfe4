//! Train a network to move population |1> -> |2> through the lossy level |3>,
//! then replay the learned pulses with RK4.
//!
//!     cargo run --release --example lambda_transfer -- [seed] [epochs]

use qcpinn::systems::lambda::LambdaParams;
use qcpinn::systems::{DensityMatrix, SystemSpec};
use qcpinn::trainer::{train_with, CheckpointSink, TrainConfig, HISTORY_FILE};
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
    let system = SystemSpec::lambda3(LambdaParams::default(), &DensityMatrix::basis(3, 0))?;
    let out = std::path::PathBuf::from(format!("out/lambda_seed{}", config.seed));
    let sink = CheckpointSink::new(&out);
    let run = train_with(&system, &config, None, None, Some(&sink))?;
    run.history.write_csv(&out.join(HISTORY_FILE))?;
    if let Some(best) = &run.best {
        println!("lowest loss {:.4} at epoch {}", best.loss, best.epoch);
    }

    let control = ControlFunction::network(run.selected().clone(), &system, config.constraint)?;
    let (traj, metrics) = evaluate(&system, &control, (0.0, config.grid.t_end), 1e-3, None)?;
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
