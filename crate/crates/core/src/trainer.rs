//! Training loop: jittered collocation grid, loss assembly, Adam updates,
//! history and checkpoints.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::{write_csv, write_json};
use crate::loss::{loss_and_gradient, ControlMask, LossBreakdown, LossWeights};
use crate::neural::{adam_step, init_params, AdamState, Checkpoint, ConstraintMode, NetworkParams};
use crate::systems::SystemSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub t_start: f64,
    pub t_end: f64,
    pub points: usize,
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_start >= 0.0 && self.t_end > self.t_start && self.t_end.is_finite()) {
            return Err(Error::config(format!(
                "grid needs 0 <= t_start < t_end, got [{}, {}]",
                self.t_start, self.t_end
            )));
        }
        if self.points < 2 {
            return Err(Error::config("grid needs at least 2 points"));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        (self.t_end - self.t_start) / (self.points - 1) as f64
    }

    pub fn base(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.points)
            .map(|i| {
                if i + 1 == self.points {
                    self.t_end
                } else {
                    self.t_start + h * i as f64
                }
            })
            .collect()
    }
}

fn default_jitter() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub grid: GridConfig,
    /// Jitter amplitude as a fraction of the grid spacing.
    #[serde(default = "default_jitter")]
    pub jitter: f64,
    pub seed: u64,
    #[serde(default)]
    pub constraint: ConstraintMode,
    pub loss: LossWeights,
    /// Write a checkpoint every this many epochs (0 disables).
    #[serde(default)]
    pub checkpoint_every: usize,
    pub hidden_layers: Vec<usize>,
    #[serde(default)]
    pub adam: AdamHyper,
    /// Also keep the parameters with the lowest training loss seen, and
    /// prefer them over the final ones when the run is used downstream.
    #[serde(default)]
    pub keep_best: bool,
}

/// Adam moment decay rates and denominator offset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamHyper {
    pub fn validate(&self) -> Result<()> {
        let ok = |b: f64| (0.0..1.0).contains(&b);
        if !(ok(self.beta1) && ok(self.beta2) && self.epsilon > 0.0) {
            return Err(Error::config(format!("invalid Adam settings {self:?}")));
        }
        Ok(())
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.jitter) {
            return Err(Error::config(format!("jitter must lie in [0, 1), got {}", self.jitter)));
        }
        if self.hidden_layers.is_empty() || self.hidden_layers.contains(&0) {
            return Err(Error::config("hidden layers must be non-empty and positive"));
        }
        self.grid.validate()?;
        self.adam.validate()?;
        self.constraint.validate()?;
        self.loss.validate()
    }

    pub fn layer_sizes(&self, system: &SystemSpec) -> Vec<usize> {
        let mut sizes = vec![1];
        sizes.extend(&self.hidden_layers);
        sizes.push(system.n() + system.m());
        sizes
    }

    /// Two-level Gibbs-state preparation: 4×200, lr 1e-4, χ = 1e-3, η = 0.1.
    pub fn tls_preset() -> Self {
        Self {
            epochs: 40_000,
            learning_rate: 1e-4,
            grid: GridConfig {
                t_start: 0.0,
                t_end: 30.0,
                points: 200,
            },
            jitter: default_jitter(),
            seed: 0,
            constraint: ConstraintMode::Hard,
            loss: LossWeights {
                eta: 0.1,
                eta_c: 0.0,
                chi: 1e-3,
                control_mask: ControlMask::All,
            },
            checkpoint_every: 0,
            hidden_layers: vec![200; 4],
            adam: AdamHyper::default(),
            keep_best: false,
        }
    }

    /// Λ-system transfer: 5×150, lr 8e-3, η = 0.2, η_c = 0.1, χ = 2.8e-3.
    /// At this step size Adam tends to lose a good solution after a few
    /// thousand epochs, so the lowest-loss snapshot is kept.
    pub fn lambda_preset() -> Self {
        Self {
            epochs: 20_000,
            learning_rate: 8e-3,
            grid: GridConfig {
                t_start: 0.0,
                t_end: 4.0,
                points: 200,
            },
            jitter: default_jitter(),
            seed: 0,
            constraint: ConstraintMode::Hard,
            loss: LossWeights {
                eta: 0.2,
                eta_c: 0.1,
                chi: 2.8e-3,
                control_mask: ControlMask::All,
            },
            checkpoint_every: 0,
            hidden_layers: vec![150; 5],
            adam: AdamHyper::default(),
            keep_best: true,
        }
    }

    /// Qubit-register ground-state search over `[0, 10]`: 3×100, lr 1e-3,
    /// η = 0.01, χ = 1e-4.
    pub fn nqubit_preset() -> Self {
        Self {
            epochs: 20_000,
            learning_rate: 1e-3,
            grid: GridConfig {
                t_start: 0.0,
                t_end: 10.0,
                points: 200,
            },
            jitter: default_jitter(),
            seed: 0,
            constraint: ConstraintMode::Hard,
            loss: LossWeights {
                eta: 0.01,
                eta_c: 1.0,
                chi: 1e-4,
                control_mask: ControlMask::All,
            },
            checkpoint_every: 0,
            hidden_layers: vec![100; 3],
            adam: AdamHyper::default(),
            keep_best: false,
        }
    }

    /// Stable digest of the configuration, for checkpoint sidecars.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let hash = Sha256::digest(&json);
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Jitters every grid point by up to `amplitude · Δt`, clamps to the grid
/// range and keeps the points sorted.
pub fn resample_grid(grid: &GridConfig, amplitude: f64, rng: &mut impl Rng) -> Vec<f64> {
    let base = grid.base();
    if amplitude == 0.0 {
        return base;
    }
    let a = amplitude * grid.spacing();
    let mut t: Vec<f64> = base
        .iter()
        .map(|&ti| (ti + rng.random_range(-a..=a)).clamp(grid.t_start, grid.t_end))
        .collect();
    t.sort_by(|x, y| x.total_cmp(y));
    t
}

/// The grid used at a given epoch; each epoch draws from its own stream so
/// resumed runs see the same grids as uninterrupted ones.
pub fn epoch_grid(config: &TrainConfig, epoch: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(epoch as u64);
    resample_grid(&config.grid, config.jitter, &mut rng)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    /// Index of the first recorded epoch.
    pub start_epoch: usize,
    pub losses: Vec<LossBreakdown>,
    /// Seconds per epoch.
    pub wall_times: Vec<f64>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }

    pub fn csv_rows(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        self.losses
            .iter()
            .enumerate()
            .map(|(i, b)| b.csv_row(self.start_epoch + i))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_csv(path, &LossBreakdown::CSV_HEADER, self.csv_rows())
    }

    pub fn extend(&mut self, other: TrainHistory) {
        if self.is_empty() {
            self.start_epoch = other.start_epoch;
        }
        self.losses.extend(other.losses);
        self.wall_times.extend(other.wall_times);
    }
}

/// Parameters at the epoch with the lowest total training loss.
#[derive(Clone, Debug, PartialEq)]
pub struct BestSnapshot {
    pub epoch: usize,
    pub loss: f64,
    pub params: NetworkParams,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Final parameters; together with `adam` they resume the run.
    pub params: NetworkParams,
    pub adam: AdamState,
    pub history: TrainHistory,
    /// Present when `keep_best` is set and at least one epoch ran.
    pub best: Option<BestSnapshot>,
}

impl TrainOutcome {
    /// The parameters to use for validation: the best snapshot if one was
    /// kept, otherwise the final parameters.
    pub fn selected(&self) -> &NetworkParams {
        self.best.as_ref().map_or(&self.params, |b| &b.params)
    }
}

/// Where periodic checkpoints go.
#[derive(Clone, Debug)]
pub struct CheckpointSink {
    pub dir: PathBuf,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub config_hash: String,
    pub epoch: usize,
    pub system: String,
    pub history_tail: Vec<LossBreakdown>,
    /// Wall-clock seconds since the Unix epoch when written.
    pub written_at: u64,
}

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
/// Lowest-loss parameters, written next to the checkpoint when `keep_best` is set.
pub const BEST_CHECKPOINT_FILE: &str = "best.json";
pub const CHECKPOINT_META_FILE: &str = "checkpoint.meta.json";
pub const HISTORY_FILE: &str = "history.csv";

impl CheckpointSink {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn save(
        &self,
        params: &NetworkParams,
        adam: &AdamState,
        config: &TrainConfig,
        system: &SystemSpec,
        epoch: usize,
        history: &TrainHistory,
    ) -> Result<()> {
        Checkpoint::new(params, Some(adam)).save(&self.dir.join(CHECKPOINT_FILE))?;
        let tail_from = history.len().saturating_sub(10);
        let meta = CheckpointMeta {
            config_hash: config.digest(),
            epoch,
            system: system.name.clone(),
            history_tail: history.losses[tail_from..].to_vec(),
            written_at: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        write_json(&self.dir.join(CHECKPOINT_META_FILE), &meta)
    }

    /// Parameters, optimizer state and the epoch to resume from.
    pub fn load(&self) -> Result<(NetworkParams, Option<AdamState>, Option<usize>)> {
        let ckpt = Checkpoint::load(&self.dir.join(CHECKPOINT_FILE))?;
        let params = ckpt.params()?;
        let adam = ckpt.adam_state(&params)?;
        let meta_path = self.dir.join(CHECKPOINT_META_FILE);
        let epoch = if meta_path.exists() {
            let meta: CheckpointMeta = serde_json::from_slice(&std::fs::read(meta_path)?)?;
            Some(meta.epoch)
        } else {
            None
        };
        Ok((params, adam, epoch))
    }
}

fn check_width(params: &NetworkParams, system: &SystemSpec) -> Result<()> {
    if params.output_width() != system.n() + system.m() {
        return Err(Error::config(format!(
            "network output width {} does not match system {} (n + m = {})",
            params.output_width(),
            system.name,
            system.n() + system.m()
        )));
    }
    Ok(())
}

/// Trains a freshly initialised network.
pub fn train(system: &SystemSpec, config: &TrainConfig) -> Result<TrainOutcome> {
    train_with(system, config, None, None, None)
}

/// Runs epochs `start..config.epochs` from the given state.
///
/// A non-finite loss or gradient aborts with the offending epoch; the last
/// periodic checkpoint (if any) is left untouched.
pub fn train_with(
    system: &SystemSpec,
    config: &TrainConfig,
    init: Option<(NetworkParams, Option<AdamState>)>,
    start_epoch: Option<usize>,
    sink: Option<&CheckpointSink>,
) -> Result<TrainOutcome> {
    config.validate()?;
    let (mut params, adam) = match init {
        Some((p, a)) => (p, a),
        None => (init_params(&config.layer_sizes(system), config.seed)?, None),
    };
    check_width(&params, system)?;
    let mut adam = adam.unwrap_or_else(|| {
        let h = config.adam;
        AdamState::with_hyper(&params, h.beta1, h.beta2, h.epsilon)
    });
    if adam.first_moment.len() != params.num_params() {
        return Err(Error::config("optimizer state does not match network"));
    }
    let start = start_epoch.unwrap_or(0);
    let mut history = TrainHistory {
        start_epoch: start,
        ..Default::default()
    };
    let mut best: Option<BestSnapshot> = None;
    for epoch in start..config.epochs {
        let clock = Instant::now();
        let times = epoch_grid(config, epoch);
        let tag = |e: Error| match e {
            Error::Numeric { what, .. } => Error::Numeric { epoch, what },
            other => other,
        };
        let (breakdown, grads) =
            loss_and_gradient(&params, system, &times, &config.loss, config.constraint).map_err(tag)?;
        // The loss belongs to the parameters before this step.
        if config.keep_best && best.as_ref().map_or(true, |b| breakdown.total < b.loss) {
            best = Some(BestSnapshot {
                epoch,
                loss: breakdown.total,
                params: params.clone(),
            });
        }
        adam_step(&mut params, &grads, &mut adam, config.learning_rate).map_err(tag)?;
        history.losses.push(breakdown);
        history.wall_times.push(clock.elapsed().as_secs_f64());
        if let Some(sink) = sink {
            if config.checkpoint_every > 0 && (epoch + 1) % config.checkpoint_every == 0 {
                sink.save(&params, &adam, config, system, epoch + 1, &history)?;
            }
        }
    }
    if let Some(sink) = sink {
        sink.save(&params, &adam, config, system, config.epochs.max(start), &history)?;
        if let Some(b) = &best {
            Checkpoint::new(&b.params, None).save(&sink.dir.join(BEST_CHECKPOINT_FILE))?;
        }
    }
    Ok(TrainOutcome {
        params,
        adam,
        history,
        best,
    })
}

/// Warm-starts from trained parameters on a system whose physical parameters
/// changed (for instance, detuned). Optimizer moments start fresh.
pub fn retrain_with_detuning(
    params: &NetworkParams,
    system: &SystemSpec,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    check_width(params, system)?;
    train_with(system, config, Some((params.clone(), None)), None, None)
}
