//! Experiment configuration, the benchmark harness and the energy sweep.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{Protocol, PulseSequence};
use crate::error::{Error, Result};
use crate::io::write_csv;
use crate::neural::NetworkParams;
use crate::systems::lambda::{LambdaParams, DETUNING};
use crate::systems::{
    lambda_epsilon_state, tls_gibbs_state, DensityMatrix, FourLevelParams, NQubitParams, SystemSpec,
    TlsParams,
};
use crate::trainer::{train, TrainConfig};
use crate::validator::{default_dt, efficiency, evaluate, rk4_integrate, work_heat, ControlFunction};

/// Initial density matrix of a density-matrix system.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    /// `|k⟩⟨k|`, level 0 by default.
    #[default]
    Ground,
    Basis { level: usize },
    /// `σ11/2 + σ22/2 + ε(σ12 + σ21)/2`, Λ system only.
    Epsilon { epsilon: f64 },
    /// `p|g⟩⟨g| + (1 − p)|e⟩⟨e|`, qubit only.
    Gibbs { p: f64 },
}

impl InitialState {
    pub fn density(&self, dim: usize) -> Result<DensityMatrix> {
        match *self {
            InitialState::Ground => Ok(DensityMatrix::basis(dim, 0)),
            InitialState::Basis { level } if level < dim => Ok(DensityMatrix::basis(dim, level)),
            InitialState::Basis { level } => Err(Error::config(format!("level {level} out of range for dimension {dim}"))),
            InitialState::Epsilon { epsilon } if dim == 3 => lambda_epsilon_state(epsilon),
            InitialState::Gibbs { p } if dim == 2 => tls_gibbs_state(p),
            _ => Err(Error::config(format!("{self:?} does not apply to a {dim}-level system"))),
        }
    }
}

/// Partial override of the Λ parameters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<[f64; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemConfig {
    Tls {
        #[serde(default)]
        params: TlsParams,
        #[serde(default)]
        initial: InitialState,
    },
    Lambda3 {
        #[serde(default)]
        overrides: LambdaOverrides,
        /// Use `δ/2π = Δ1/2π = 0.2` before applying overrides.
        #[serde(default)]
        detuned: bool,
        #[serde(default)]
        initial: InitialState,
    },
    Lambda4 {
        #[serde(default)]
        params: FourLevelParams,
        #[serde(default)]
        initial: InitialState,
    },
    Nqubit {
        n: usize,
        #[serde(default)]
        interacting: bool,
        /// Penalise `g0 + gp ≠ 1`.
        #[serde(default)]
        g0_tied: bool,
    },
}

impl SystemConfig {
    pub fn lambda_params(&self) -> Option<LambdaParams> {
        match self {
            SystemConfig::Lambda3 { overrides, detuned, .. } => {
                let mut p = LambdaParams::default();
                if *detuned {
                    p = p.detuned();
                }
                if let Some(d) = overrides.delta {
                    p.delta = d;
                }
                if let Some(d) = overrides.delta1 {
                    p.delta1 = d;
                }
                if let Some(g) = overrides.gamma {
                    p.gamma = g;
                }
                Some(p)
            }
            _ => None,
        }
    }

    pub fn build(&self) -> Result<SystemSpec> {
        match self {
            SystemConfig::Tls { params, initial } => SystemSpec::tls(*params, &initial.density(2)?),
            SystemConfig::Lambda3 { initial, .. } => {
                SystemSpec::lambda3(self.lambda_params().expect("Λ preset"), &initial.density(3)?)
            }
            SystemConfig::Lambda4 { params, initial } => SystemSpec::lambda4(*params, &initial.density(4)?),
            SystemConfig::Nqubit { n, interacting, g0_tied } => {
                let p = if *interacting {
                    NQubitParams::ising(*n)
                } else {
                    NQubitParams::non_interacting(*n)
                };
                SystemSpec::nqubit(p, *g0_tied)
            }
        }
    }

    pub fn default_training(&self) -> TrainConfig {
        match self {
            SystemConfig::Tls { .. } => TrainConfig::tls_preset(),
            SystemConfig::Lambda3 { .. } | SystemConfig::Lambda4 { .. } => TrainConfig::lambda_preset(),
            SystemConfig::Nqubit { .. } => TrainConfig::nqubit_preset(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// End of the integration window; defaults to the training grid end.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Start of the window over which tail fidelity is reported.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_from: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    #[serde(default = "default_protocols")]
    pub protocols: Vec<Protocol>,
    /// Also report every row on the detuned system.
    #[serde(default = "default_true")]
    pub detuned: bool,
    /// Include a trained-network row.
    #[serde(default = "default_true")]
    pub include_network: bool,
    /// Train the network when no checkpoint is available.
    #[serde(default)]
    pub train_on_demand: bool,
}

fn default_protocols() -> Vec<Protocol> {
    Protocol::BENCHMARK.to_vec()
}

fn default_true() -> bool {
    true
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            protocols: default_protocols(),
            detuned: true,
            include_network: true,
            train_on_demand: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyConfig {
    /// Initial-state populations `p` for the efficiency sweep.
    #[serde(default = "default_p_values")]
    pub p_values: Vec<f64>,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            p_values: default_p_values(),
        }
    }
}

pub fn default_p_values() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainConfig>,
    #[serde(default)]
    pub validate: ValidateConfig,
    #[serde(default)]
    pub benchmark: BenchmarkConfig,
    #[serde(default)]
    pub energy: EnergyConfig,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn preset(system: SystemConfig) -> Self {
        Self {
            system,
            train: None,
            validate: ValidateConfig::default(),
            benchmark: BenchmarkConfig::default(),
            energy: EnergyConfig::default(),
            out_dir: default_out(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.system.build()?;
        self.training().validate()?;
        if let Some(dt) = self.validate.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::config(format!("validate.dt must be positive, got {dt}")));
            }
        }
        if let Some(h) = self.validate.horizon {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::config(format!("validate.horizon must be positive, got {h}")));
            }
        }
        if let Some(p) = self.energy.p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::config(format!("energy.p_values must lie in [0, 1], got {p}")));
        }
        Ok(())
    }

    pub fn training(&self) -> TrainConfig {
        self.train.clone().unwrap_or_else(|| self.system.default_training())
    }

    pub fn spec(&self) -> Result<SystemSpec> {
        self.system.build()
    }

    pub fn dt(&self) -> Result<f64> {
        match self.validate.dt {
            Some(dt) => Ok(dt),
            None => Ok(default_dt(&self.spec()?.kind)),
        }
    }

    /// Integration window `[t_start, horizon]`.
    pub fn window(&self) -> (f64, f64) {
        let grid = self.training().grid;
        (grid.t_start, self.validate.horizon.unwrap_or(grid.t_end))
    }
}

/// Worker cap from `QCPINN_THREADS`; `None` when unset or invalid.
pub fn thread_cap() -> Option<usize> {
    std::env::var("QCPINN_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
}

/// Runs `f` on a pool sized by `QCPINN_THREADS` (or rayon's default).
pub fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap() {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// One benchmark line; detuned values sit in their own columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub protocol: String,
    pub p2: f64,
    pub area: f64,
    pub t_f: f64,
    pub p2_detuned: Option<f64>,
    pub area_detuned: Option<f64>,
    pub t_f_detuned: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchmarkRow>,
}

impl BenchmarkReport {
    pub const HEADER: [&'static str; 7] =
        ["protocol", "p2", "area", "t_f", "p2_detuned", "area_detuned", "t_f_detuned"];

    pub fn row(&self, label: &str) -> Option<&BenchmarkRow> {
        self.rows.iter().find(|r| r.protocol == label)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(Self::HEADER)?;
        let opt = |v: Option<f64>| v.map(crate::io::format_float).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.protocol.clone(),
                crate::io::format_float(r.p2),
                crate::io::format_float(r.area),
                crate::io::format_float(r.t_f),
                opt(r.p2_detuned),
                opt(r.area_detuned),
                opt(r.t_f_detuned),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        crate::io::write_atomic(path, &bytes)
    }
}

/// A control source for a benchmark row.
#[derive(Clone, Debug)]
pub enum BenchmarkEntry {
    Baseline(Protocol),
    /// Trained network for the nominal system and, optionally, one re-trained
    /// on the detuned system.
    Network {
        nominal: NetworkParams,
        detuned: Option<NetworkParams>,
    },
}

fn lambda_metrics(system: &SystemSpec, control: &ControlFunction, horizon: f64, dt: f64) -> Result<(f64, f64, f64)> {
    let (_, rec) = evaluate(system, control, (0.0, horizon), dt, None)?;
    let p2 = rec.p2.unwrap_or(f64::NAN);
    let area = rec.area.unwrap_or(f64::NAN);
    let t_f = rec.t_f.unwrap_or(f64::NAN);
    if !(p2.is_finite() && area.is_finite() && t_f.is_finite()) {
        return Err(Error::Numeric {
            epoch: 0,
            what: format!("non-finite benchmark metrics for {}", system.name),
        });
    }
    Ok((p2, area, t_f))
}

/// Benchmarks each entry on the Λ system (`params`) and, when `detuned`, on
/// its detuned copy. Rows run concurrently.
pub fn run_benchmark(
    params: LambdaParams,
    entries: &[BenchmarkEntry],
    network_horizon: f64,
    dt: f64,
    detuned: bool,
) -> Result<BenchmarkReport> {
    let rho0 = DensityMatrix::basis(3, 0);
    let nominal = SystemSpec::lambda3(params, &rho0)?;
    let shifted = SystemSpec::lambda3(
        LambdaParams {
            delta: params.delta + DETUNING,
            delta1: params.delta1 + DETUNING,
            ..params
        },
        &rho0,
    )?;
    let rows: Vec<Result<BenchmarkRow>> = with_pool(|| {
        entries
            .par_iter()
            .map(|entry| -> Result<BenchmarkRow> {
                let (label, ctrl, ctrl_detuned, horizon) = match entry {
                    BenchmarkEntry::Baseline(p) => {
                        let seq = PulseSequence::preset(*p)?;
                        let h = seq.duration;
                        let c = ControlFunction::Baseline(seq);
                        (p.label().to_string(), c.clone(), c, h)
                    }
                    BenchmarkEntry::Network { nominal: n, detuned: d } => {
                        let c = ControlFunction::network(n.clone(), &nominal, Default::default())?;
                        let cd = match d {
                            Some(d) => ControlFunction::network(d.clone(), &shifted, Default::default())?,
                            None => c.clone(),
                        };
                        ("PINN".to_string(), c, cd, network_horizon)
                    }
                };
                let (p2, area, t_f) = lambda_metrics(&nominal, &ctrl, horizon, dt)?;
                let det = if detuned {
                    Some(lambda_metrics(&shifted, &ctrl_detuned, horizon, dt)?)
                } else {
                    None
                };
                Ok(BenchmarkRow {
                    protocol: label,
                    p2,
                    area,
                    t_f,
                    p2_detuned: det.map(|d| d.0),
                    area_detuned: det.map(|d| d.1),
                    t_f_detuned: det.map(|d| d.2),
                })
            })
            .collect()
    })?;
    Ok(BenchmarkReport {
        rows: rows.into_iter().collect::<Result<_>>()?,
    })
}

/// One row of the Gibbs-state efficiency sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyPoint {
    pub p: f64,
    pub eff: f64,
    pub final_fidelity: f64,
}

/// Trains and validates the qubit from `ρ(0) = p|g⟩⟨g| + (1 − p)|e⟩⟨e|` for
/// every `p`, skipping `p = 0.5` where the start already equals the target.
pub fn gibbs_efficiency_sweep(
    params: TlsParams,
    p_values: &[f64],
    config: &TrainConfig,
    dt: f64,
) -> Result<Vec<EfficiencyPoint>> {
    let todo: Vec<f64> = p_values
        .iter()
        .copied()
        .filter(|p| {
            let skip = (p - 0.5).abs() < 1e-12;
            if skip {
                eprintln!("warning: skipping p = 0.5, the initial state already equals the target");
            }
            !skip
        })
        .collect();
    let points: Vec<Result<EfficiencyPoint>> = with_pool(|| {
        todo.par_iter()
            .map(|&p| {
                let system = SystemSpec::tls(params, &tls_gibbs_state(p)?)?;
                let out = train(&system, config)?;
                let ctrl = ControlFunction::network(out.selected().clone(), &system, config.constraint)?;
                let window = (config.grid.t_start, config.grid.t_end);
                let traj = rk4_integrate(&system, &ctrl, &system.x0.to_vec(), window, dt)?;
                let wh = work_heat(&traj, &ctrl, &params)?;
                let eff = efficiency(&wh.eta, &wh.times)?;
                let (_, rec) = evaluate(&system, &ctrl, window, dt, None)?;
                Ok(EfficiencyPoint {
                    p,
                    eff,
                    final_fidelity: rec.final_fidelity.unwrap_or(f64::NAN),
                })
            })
            .collect()
    })?;
    points.into_iter().collect()
}

pub fn write_sweep_csv(path: &Path, points: &[EfficiencyPoint]) -> Result<()> {
    write_csv(
        path,
        &["p", "eff", "final_fidelity"],
        points.iter().map(|e| vec![e.p, e.eff, e.final_fidelity]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const LAMBDA: &str = r#"
out_dir = "runs/lambda"

[system]
preset = "lambda3"
detuned = true
initial = { state = "epsilon", epsilon = 0.5 }

[system.overrides]
gamma = [0.0, 0.0, 0.14]

[validate]
dt = 0.002
"#;

    #[test]
    fn parses_and_resolves() {
        let cfg = ExperimentConfig::from_toml_str(LAMBDA).unwrap();
        let p = cfg.system.lambda_params().unwrap();
        assert_eq!(p.gamma, [0.0, 0.0, 0.14]);
        assert_eq!(p.delta, DETUNING);
        let spec = cfg.spec().unwrap();
        assert_eq!(spec.x0[3], 0.25);
        assert_eq!(cfg.training(), TrainConfig::lambda_preset());
        assert_eq!(cfg.dt().unwrap(), 0.002);
        assert_eq!(cfg.window(), (0.0, 4.0));
    }

    #[test]
    fn round_trip() {
        let mut cfg = ExperimentConfig::from_toml_str(LAMBDA).unwrap();
        cfg.train = Some(TrainConfig::lambda_preset());
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
        let q = ExperimentConfig::preset(SystemConfig::Nqubit {
            n: 3,
            interacting: true,
            g0_tied: true,
        });
        assert_eq!(ExperimentConfig::from_toml_str(&q.to_toml_string().unwrap()).unwrap(), q);
    }

    #[test]
    fn rejects_unknown_keys_with_location() {
        let bad = LAMBDA.replace("dt = 0.002", "dtt = 0.002");
        let err = ExperimentConfig::from_toml_str(&bad).unwrap_err().to_string();
        assert!(err.contains("dtt") && err.contains("line"), "{err}");
        let wrong = "[system]\npreset = \"tls\"\ninitial = { state = \"epsilon\", epsilon = 0.1 }\n";
        assert!(matches!(ExperimentConfig::from_toml_str(wrong), Err(Error::Config(_))));
    }

    #[test]
    fn benchmark_row_layout() {
        let report = run_benchmark(
            LambdaParams::default(),
            &[BenchmarkEntry::Baseline(Protocol::InverseEngineering)],
            4.0,
            1e-3,
            true,
        )
        .unwrap();
        let row = report.row("Inv. Eng.").unwrap();
        assert!((row.p2 - 0.97).abs() < 0.02);
        assert!(row.p2_detuned.unwrap() < row.p2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bench.csv");
        report.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert!(text.starts_with("protocol,p2,area,t_f,p2_detuned,area_detuned,t_f_detuned\n"));
    }

    #[test]
    fn sweep_skips_the_target_state() {
        let mut cfg = TrainConfig::tls_preset();
        cfg.epochs = 0;
        cfg.hidden_layers = vec![4];
        cfg.grid.t_end = 2.0;
        let pts = gibbs_efficiency_sweep(TlsParams::default(), &[0.0, 0.5, 1.0], &cfg, 1e-2).unwrap();
        assert_eq!(pts.iter().map(|e| e.p).collect::<Vec<_>>(), vec![0.0, 1.0]);
        assert!(pts.iter().all(|e| (0.0..=1.0).contains(&e.eff)));
        let again = gibbs_efficiency_sweep(TlsParams::default(), &[0.0, 1.0], &cfg, 1e-2).unwrap();
        assert_eq!(pts, again);
    }
}
