use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qcpinn::baselines::{Protocol, PulseSequence};
use qcpinn::config::{
    gibbs_efficiency_sweep, run_benchmark, write_sweep_csv, BenchmarkEntry, ExperimentConfig, SystemConfig,
};
use qcpinn::io::write_json;
use qcpinn::neural::Checkpoint;
use qcpinn::systems::tls::optimal_constant_control_in;
use qcpinn::systems::tls::XI_SEARCH_RANGE;
use qcpinn::systems::{tls_steady_state, SystemKind, TlsParams};
use qcpinn::trainer::{retrain_with_detuning, train_with, CheckpointSink, BEST_CHECKPOINT_FILE, CHECKPOINT_FILE, HISTORY_FILE};
use qcpinn::validator::{
    efficiency, evaluate, rk4_integrate, work_heat, write_energy_csv, write_trajectory_csv, ControlFunction,
};
use qcpinn::{Error, Result};

#[derive(Parser)]
#[command(name = "qcpinn", version, about = "Physics-informed control of open quantum systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the training seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `out_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Checkpoint file or directory.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Integration step.
    #[arg(long)]
    dt: Option<f64>,
    /// Use the detuned system (Λ presets) or add detuned columns (benchmark).
    #[arg(long)]
    detuned: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train a network; writes a checkpoint and the loss history.
    Train(Common),
    /// Replay a trained control through RK4; writes trajectory and metrics.
    Validate(Common),
    /// Compare the network with the analytic protocols on the Λ system.
    Benchmark(Common),
    /// Export an analytic pulse sequence.
    Baseline {
        #[command(flatten)]
        common: Common,
        /// stirap | inverse-engineering | stirep | mod-satd | sa-stirap
        #[arg(long, default_value = "stirap")]
        protocol: String,
    },
    /// Best constant control for the qubit and its steady state.
    SteadyState(Common),
    /// Work, heat and efficiency of a trained qubit control.
    Energy {
        #[command(flatten)]
        common: Common,
        /// Train and evaluate every initial population in `energy.p_values`.
        #[arg(long)]
        sweep: bool,
    },
}

fn load_config(common: &Common, fallback: SystemConfig) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::preset(fallback),
    };
    if let Some(seed) = common.seed {
        let mut train = cfg.training();
        train.seed = seed;
        cfg.train = Some(train);
    }
    if let Some(dt) = common.dt {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("--dt must be positive, got {dt}")));
        }
        cfg.validate.dt = Some(dt);
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    if common.detuned {
        if let SystemConfig::Lambda3 { detuned, .. } = &mut cfg.system {
            *detuned = true;
        }
    }
    Ok(cfg)
}

fn require_config(common: &Common) -> Result<ExperimentConfig> {
    if common.config.is_none() {
        return Err(Error::Config("--config is required".into()));
    }
    load_config(common, SystemConfig::Tls {
        params: TlsParams::default(),
        initial: Default::default(),
    })
}

/// A directory resolves to its best snapshot when one exists.
fn checkpoint_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        let best = p.join(BEST_CHECKPOINT_FILE);
        if best.is_file() {
            return best;
        }
        p.join(CHECKPOINT_FILE)
    } else {
        p.to_path_buf()
    }
}

fn load_network(common: &Common) -> Result<qcpinn::neural::NetworkParams> {
    let path = common
        .checkpoint
        .as_deref()
        .ok_or_else(|| Error::Config("--checkpoint is required".into()))?;
    Checkpoint::load(&checkpoint_path(path))?.params()
}

fn cmd_train(common: &Common) -> Result<()> {
    let cfg = require_config(common)?;
    let system = cfg.spec()?;
    let train = cfg.training();
    let sink = CheckpointSink::new(&cfg.out_dir);
    let (init, start) = match &common.checkpoint {
        Some(dir) => {
            let resume = CheckpointSink::new(if dir.is_dir() { dir.clone() } else { dir.parent().unwrap_or(Path::new(".")).to_path_buf() });
            let (params, adam, epoch) = resume.load()?;
            (Some((params, adam)), epoch)
        }
        None => (None, None),
    };
    let out = train_with(&system, &train, init, start, Some(&sink))?;
    out.history.write_csv(&cfg.out_dir.join(HISTORY_FILE))?;
    if let Some(last) = out.history.losses.last() {
        eprintln!("trained {} epochs, final loss {:.6e}", out.history.len(), last.total);
    }
    if let Some(b) = &out.best {
        eprintln!("lowest loss {:.6e} at epoch {}", b.loss, b.epoch);
    }
    Ok(())
}

fn cmd_validate(common: &Common) -> Result<()> {
    let cfg = require_config(common)?;
    let system = cfg.spec()?;
    let train = cfg.training();
    let params = load_network(common)?;
    let ctrl = ControlFunction::network(params, &system, train.constraint)?;
    let (traj, rec) = evaluate(&system, &ctrl, cfg.window(), cfg.dt()?, cfg.validate.tail_from)?;
    write_trajectory_csv(&cfg.out_dir.join("trajectory.csv"), &traj, &system)?;
    rec.write_json(&cfg.out_dir.join("metrics.json"))?;
    println!("{}", serde_json::to_string_pretty(&rec)?);
    Ok(())
}

fn cmd_benchmark(common: &Common) -> Result<()> {
    let mut cfg = load_config(common, SystemConfig::Lambda3 {
        overrides: Default::default(),
        detuned: false,
        initial: Default::default(),
    })?;
    // --detuned asks for the detuned columns here, not a detuned base system.
    let add_detuned = cfg.benchmark.detuned || common.detuned;
    if let SystemConfig::Lambda3 { detuned, .. } = &mut cfg.system {
        if common.detuned {
            *detuned = false;
        }
    }
    let params = cfg
        .system
        .lambda_params()
        .ok_or_else(|| Error::Config("benchmark needs the lambda3 preset".into()))?;
    let mut entries: Vec<BenchmarkEntry> = cfg.benchmark.protocols.iter().map(|p| BenchmarkEntry::Baseline(*p)).collect();
    if cfg.benchmark.include_network {
        let system = cfg.spec()?;
        let train = cfg.training();
        let network = if common.checkpoint.is_some() {
            Some((load_network(common)?, None))
        } else if cfg.benchmark.train_on_demand {
            let nominal = train_with(&system, &train, None, None, None)?.selected().clone();
            let detuned = if add_detuned {
                let shifted = system.with_kind(SystemKind::Lambda3(params.detuned()))?;
                Some(retrain_with_detuning(&nominal, &shifted, &train)?.selected().clone())
            } else {
                None
            };
            Some((nominal, detuned))
        } else {
            eprintln!("warning: no --checkpoint and train_on_demand = false; skipping the network row");
            None
        };
        if let Some((nominal, detuned)) = network {
            entries.insert(0, BenchmarkEntry::Network { nominal, detuned });
        }
    }
    let (_, horizon) = cfg.window();
    let report = run_benchmark(params, &entries, horizon, cfg.dt()?, add_detuned)?;
    report.write_csv(&cfg.out_dir.join("benchmark.csv"))?;
    for r in &report.rows {
        println!("{:<10} p2 {:.4}  area {:.2}  t_f {:.2}", r.protocol, r.p2, r.area, r.t_f);
    }
    Ok(())
}

fn cmd_baseline(common: &Common, protocol: &str) -> Result<()> {
    let protocol = Protocol::from_name(protocol)?;
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let seq = PulseSequence::preset(protocol)?;
    let dt = common.dt.unwrap_or(1e-3);
    let name = format!("pulses_{}.csv", format!("{protocol:?}").to_lowercase());
    seq.export_csv(&out.join(name), dt)?;
    Ok(())
}

fn cmd_steady_state(common: &Common) -> Result<()> {
    let cfg = load_config(common, SystemConfig::Tls {
        params: TlsParams::default(),
        initial: Default::default(),
    })?;
    let SystemConfig::Tls { params, .. } = cfg.system else {
        return Err(Error::Config("steady-state needs the tls preset".into()));
    };
    let target = qcpinn::systems::DensityMatrix::maximally_mixed(2);
    let opt = optimal_constant_control_in(&params, &target, XI_SEARCH_RANGE)?;
    let ss = tls_steady_state(&params, opt.xi_star)?;
    let value = serde_json::json!({
        "xi_star": opt.xi_star,
        "fidelity_star": opt.fidelity_star,
        "steady_state": ss.to_vec(),
        "uncontrolled": tls_steady_state(&params, 0.0)?.to_vec(),
    });
    write_json(&cfg.out_dir.join("steady_state.json"), &value)?;
    println!("{}", serde_json::to_string_pretty(&value)?);
    Ok(())
}

fn cmd_energy(common: &Common, sweep: bool) -> Result<()> {
    let cfg = require_config(common)?;
    let system = cfg.spec()?;
    let SystemKind::Tls(params) = system.kind else {
        return Err(Error::Config("energy needs the tls preset".into()));
    };
    let train = cfg.training();
    let dt = cfg.dt()?;
    if sweep {
        let points = gibbs_efficiency_sweep(params, &cfg.energy.p_values, &train, dt)?;
        write_sweep_csv(&cfg.out_dir.join("efficiency_sweep.csv"), &points)?;
        return Ok(());
    }
    let ctrl = ControlFunction::network(load_network(common)?, &system, train.constraint)?;
    let traj = rk4_integrate(&system, &ctrl, &system.x0.to_vec(), cfg.window(), dt)?;
    let wh = work_heat(&traj, &ctrl, &params)?;
    write_energy_csv(&cfg.out_dir.join("energy.csv"), &wh)?;
    let eff = efficiency(&wh.eta, &wh.times)?;
    write_json(&cfg.out_dir.join("efficiency.json"), &serde_json::json!({ "eff": eff }))?;
    println!("Eff = {eff:.4}");
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Domain(_) | Error::State(_) | Error::Json(_) | Error::Csv(_) => 2,
        Error::Numeric { .. }
        | Error::Integration { .. }
        | Error::Optimization(_)
        | Error::DegenerateSteadyState(_)
        | Error::DegenerateInput(_) => 3,
        Error::Io(_) => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(c) => cmd_train(c),
        Command::Validate(c) => cmd_validate(c),
        Command::Benchmark(c) => cmd_benchmark(c),
        Command::Baseline { common, protocol } => cmd_baseline(common, protocol),
        Command::SteadyState(c) => cmd_steady_state(c),
        Command::Energy { common, sweep } => cmd_energy(common, *sweep),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
