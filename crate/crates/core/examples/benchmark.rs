//! Analytic protocols on the Λ system, with and without two-photon detuning.
//! Pass a checkpoint to add a trained network as the first row.
//!
//!     cargo run --release --example benchmark -- [checkpoint.json]

use qcpinn::baselines::Protocol;
use qcpinn::config::{run_benchmark, BenchmarkEntry};
use qcpinn::neural::Checkpoint;
use qcpinn::systems::lambda::LambdaParams;

fn main() -> qcpinn::Result<()> {
    let mut entries: Vec<BenchmarkEntry> = Protocol::BENCHMARK.iter().map(|p| BenchmarkEntry::Baseline(*p)).collect();
    if let Some(path) = std::env::args().nth(1) {
        let nominal = Checkpoint::load(path.as_ref())?.params()?;
        entries.insert(0, BenchmarkEntry::Network { nominal, detuned: None });
    }
    let report = run_benchmark(LambdaParams::default(), &entries, 4.0, 1e-3, true)?;
    report.write_csv("out/benchmark.csv".as_ref())?;
    for row in &report.rows {
        println!(
            "{:<10} p2 {:.4}  area {:>7.2}  t_f {:>5.2}  | detuned p2 {:.4}",
            row.protocol,
            row.p2,
            row.area,
            row.t_f,
            row.p2_detuned.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
