//! Checkpoint and resume: a run split in two halves ends in exactly the same
//! parameters as one uninterrupted run.
//!
//!     cargo run --release --example resume -- [epochs]

use qcpinn::systems::{DensityMatrix, SystemSpec, TlsParams};
use qcpinn::trainer::{train, train_with, CheckpointSink, TrainConfig};

fn main() -> qcpinn::Result<()> {
    let epochs: usize = std::env::args().nth(1).map_or(400, |a| a.parse().expect("epochs"));
    let system = SystemSpec::tls(TlsParams::default(), &DensityMatrix::basis(2, 0))?;
    let mut config = TrainConfig::tls_preset();
    config.hidden_layers = vec![32, 32];
    config.epochs = epochs;
    let whole = train(&system, &config)?;

    let dir = std::path::PathBuf::from("out/resume");
    let sink = CheckpointSink::new(&dir);
    let mut half = config.clone();
    half.epochs = epochs / 2;
    train_with(&system, &half, None, None, Some(&sink))?;

    let (params, adam, epoch) = sink.load()?;
    println!("resuming at epoch {}", epoch.unwrap_or(0));
    let rest = train_with(&system, &config, Some((params, adam)), epoch, Some(&sink))?;

    let same = rest.params == whole.params;
    println!("identical parameters after {epochs} epochs: {same}");
    Ok(())
}
