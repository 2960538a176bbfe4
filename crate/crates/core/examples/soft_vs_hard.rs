//! Same qubit task trained twice: once with the initial state built into the
//! output (hard) and once with it as a penalty of weight 1 (soft).
//!
//!     cargo run --release --example soft_vs_hard -- [seed] [epochs]

use qcpinn::neural::{wrap_point, ConstraintMode};
use qcpinn::systems::{DensityMatrix, SystemSpec, TlsParams};
use qcpinn::trainer::{train, TrainConfig};
use qcpinn::validator::{evaluate, ControlFunction};

fn main() -> qcpinn::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let system = SystemSpec::tls(TlsParams::default(), &DensityMatrix::basis(2, 0))?;
    for mode in [ConstraintMode::Hard, ConstraintMode::Soft { weight: 1.0 }] {
        let mut config = TrainConfig::tls_preset();
        config.constraint = mode;
        if let Some(seed) = args.first() {
            config.seed = seed.parse().expect("seed");
        }
        if let Some(epochs) = args.get(1) {
            config.epochs = epochs.parse().expect("epochs");
        }
        let run = train(&system, &config)?;
        let params = run.selected();

        // Network prediction of the state at t = 0.
        let x_at_zero = wrap_point(mode, system.x0.view(), system.u0.view(), params, 0.0)?.x;
        let ic_error = (0..system.n())
            .map(|i| (x_at_zero[i] - system.x0[i]).abs())
            .fold(0.0, f64::max);

        let control = ControlFunction::network(params.clone(), &system, mode)?;
        let (_, metrics) = evaluate(&system, &control, (0.0, config.grid.t_end), 1e-3, Some(20.0))?;
        println!(
            "{:<5} |x(0) - x0| = {:.2e}  fidelity(t>=20) >= {:.4}",
            match mode {
                ConstraintMode::Hard => "hard",
                ConstraintMode::Soft { .. } => "soft",
            },
            ic_error,
            metrics.min_fidelity_tail.unwrap()
        );
    }
    Ok(())
}
