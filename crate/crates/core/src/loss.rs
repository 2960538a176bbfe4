//! Physics-informed loss: ODE residual, target, constraint, weight decay and
//! (in soft mode) initial-condition terms, each with adjoints so the total can
//! be back-propagated through the network.

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{
    backward_batch, forward_batch, wrap_batch, ConstraintMode, NetworkParams, ParamGrads,
};
use crate::systems::{ConstraintTerm, SystemSpec, TargetSpec};

/// Grid points on which the target and constraint terms are enforced.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMask {
    #[default]
    All,
    /// The last `k` grid points.
    Last(usize),
    Indices(Vec<usize>),
}

impl ControlMask {
    pub fn resolve(&self, points: usize) -> Result<Vec<usize>> {
        match self {
            ControlMask::All => Ok((0..points).collect()),
            ControlMask::Last(k) if *k <= points => Ok((points - k..points).collect()),
            ControlMask::Last(k) => Err(Error::config(format!(
                "mask of the last {k} points on a grid of {points}"
            ))),
            ControlMask::Indices(idx) => match idx.iter().find(|&&i| i >= points) {
                Some(i) => Err(Error::config(format!(
                    "mask index {i} out of range for {points} points"
                ))),
                None => Ok(idx.clone()),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    /// Weight of the target term, in `[0, 1]`.
    pub eta: f64,
    /// Weight of the constraint terms.
    pub eta_c: f64,
    /// Weight-decay strength.
    pub chi: f64,
    #[serde(default)]
    pub control_mask: ControlMask,
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::config(format!("eta must lie in [0, 1], got {}", self.eta)));
        }
        for (name, v) in [("eta_c", self.eta_c), ("chi", self.chi)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub model: f64,
    pub control: f64,
    pub constraint: f64,
    pub regularization: f64,
    pub ic: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub const CSV_HEADER: [&'static str; 7] =
        ["epoch", "model", "control", "const", "reg", "ic", "total"];

    fn finish(mut self) -> Self {
        self.total = self.model + self.control + self.constraint + self.regularization + self.ic;
        self
    }

    pub fn csv_row(&self, epoch: usize) -> Vec<f64> {
        vec![
            epoch as f64,
            self.model,
            self.control,
            self.constraint,
            self.regularization,
            self.ic,
            self.total,
        ]
    }
}

/// States, controls and state derivatives on a time grid; columns are points.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub x: Array2<f64>,
    pub u: Array2<f64>,
    pub x_dot: Array2<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn check(&self, system: &SystemSpec) -> Result<()> {
        let m = self.len();
        if self.x.dim() != (system.n(), m)
            || self.x_dot.dim() != (system.n(), m)
            || self.u.dim() != (system.m(), m)
        {
            return Err(Error::config("trajectory shape does not match system"));
        }
        Ok(())
    }
}

/// Adjoints of a scalar loss with respect to `x`, `u` and `ẋ`.
#[derive(Clone, Debug)]
pub struct Adjoints {
    pub g_x: Array2<f64>,
    pub g_u: Array2<f64>,
    pub g_xdot: Array2<f64>,
}

impl Adjoints {
    pub fn zeros(traj: &Trajectory) -> Self {
        Self {
            g_x: Array2::zeros(traj.x.raw_dim()),
            g_u: Array2::zeros(traj.u.raw_dim()),
            g_xdot: Array2::zeros(traj.x_dot.raw_dim()),
        }
    }
}

/// `Σ_i ‖ẋ_i − A(u_i) x_i‖²`, accumulating adjoints into `adj`.
pub fn model_term(traj: &Trajectory, system: &SystemSpec, adj: &mut Adjoints) -> f64 {
    let r = &traj.x_dot - &system.dynamics.apply_batch(&traj.x, &traj.u);
    let value = r.iter().map(|v| v * v).sum();
    let two_r = r * 2.0;
    let (gx, gu) = system.dynamics.vjp_batch(&traj.x, &traj.u, &two_r);
    adj.g_xdot += &two_r;
    adj.g_x -= &gx;
    adj.g_u -= &gu;
    value
}

/// Normalised expectation `xᵀ Q̃ x / xᵀx` with `Q̃ = diag(Q, Q)` on `(Re ψ, Im ψ)`,
/// plus its gradient `2 (Q̃x − e x) / xᵀx`.
fn expectation_and_grad(q: &Array2<f64>, x: ArrayView1<f64>) -> (f64, Vec<f64>) {
    let d = q.nrows();
    let (re, im) = x.split_at(Axis(0), d);
    let (qre, qim) = (q.dot(&re), q.dot(&im));
    let norm = x.dot(&x);
    let e = (re.dot(&qre) + im.dot(&qim)) / norm;
    let mut g = Vec::with_capacity(2 * d);
    g.extend((0..d).map(|k| 2.0 * (qre[k] - e * re[k]) / norm));
    g.extend((0..d).map(|k| 2.0 * (qim[k] - e * im[k]) / norm));
    (e, g)
}

/// `η Σ_{i ∈ mask}` of the per-point target residual.
pub fn control_term(
    traj: &Trajectory,
    target: &TargetSpec,
    eta: f64,
    mask: &[usize],
    adj: &mut Adjoints,
) -> Result<f64> {
    if let Some(i) = mask.iter().find(|&&i| i >= traj.len()) {
        return Err(Error::config(format!("mask index {i} out of range")));
    }
    let mut value = 0.0;
    for &i in mask {
        match target {
            TargetSpec::StateVector(xd) => {
                for k in 0..xd.len() {
                    let r = traj.x[[k, i]] - xd[k];
                    value += r * r;
                    adj.g_x[[k, i]] += 2.0 * eta * r;
                }
            }
            TargetSpec::PopulationIndex(k) => {
                let r = traj.x[[*k, i]] - 1.0;
                value += r * r;
                adj.g_x[[*k, i]] += 2.0 * eta * r;
            }
            TargetSpec::ExpectationMin(q) => {
                let (e, g) = expectation_and_grad(q, traj.x.column(i));
                value += e;
                for (k, gk) in g.into_iter().enumerate() {
                    adj.g_x[[k, i]] += eta * gk;
                }
            }
        }
    }
    Ok(eta * value)
}

/// `η_c Σ_{i ∈ mask}` of the declared squared constraints.
pub fn constraint_term(
    traj: &Trajectory,
    constraints: &[ConstraintTerm],
    eta_c: f64,
    mask: &[usize],
    adj: &mut Adjoints,
) -> f64 {
    let mut value = 0.0;
    for &i in mask {
        for c in constraints {
            match *c {
                ConstraintTerm::StateComponent { index } => {
                    let v = traj.x[[index, i]];
                    value += v * v;
                    adj.g_x[[index, i]] += 2.0 * eta_c * v;
                }
                ConstraintTerm::ControlSum { value: target } => {
                    let r = traj.u.column(i).sum() - target;
                    value += r * r;
                    adj.g_u.column_mut(i).mapv_inplace(|g| g + 2.0 * eta_c * r);
                }
            }
        }
    }
    eta_c * value
}

/// `λ_ic (‖x(t_1) − x0‖² + ‖u(t_1) − u0‖²)`, soft mode only.
pub fn ic_term(
    traj: &Trajectory,
    system: &SystemSpec,
    mode: ConstraintMode,
    adj: &mut Adjoints,
) -> Result<f64> {
    let ConstraintMode::Soft { weight } = mode else {
        return Err(Error::config("initial-condition loss requires soft mode"));
    };
    if traj.is_empty() {
        return Err(Error::config("empty trajectory"));
    }
    let mut value = 0.0;
    for (k, &x0) in system.x0.iter().enumerate() {
        let r = traj.x[[k, 0]] - x0;
        value += r * r;
        adj.g_x[[k, 0]] += 2.0 * weight * r;
    }
    for (k, &u0) in system.u0.iter().enumerate() {
        let r = traj.u[[k, 0]] - u0;
        value += r * r;
        adj.g_u[[k, 0]] += 2.0 * weight * r;
    }
    Ok(weight * value)
}

pub fn loss_model(traj: &Trajectory, system: &SystemSpec) -> Result<f64> {
    traj.check(system)?;
    Ok(model_term(traj, system, &mut Adjoints::zeros(traj)))
}

pub fn loss_control(traj: &Trajectory, target: &TargetSpec, eta: f64, mask: &[usize]) -> Result<f64> {
    control_term(traj, target, eta, mask, &mut Adjoints::zeros(traj))
}

pub fn loss_const(traj: &Trajectory, system: &SystemSpec, eta_c: f64) -> Result<f64> {
    traj.check(system)?;
    let all: Vec<usize> = (0..traj.len()).collect();
    Ok(constraint_term(traj, &system.constraints, eta_c, &all, &mut Adjoints::zeros(traj)))
}

/// `χ Σ w²` over weights only.
pub fn loss_reg(params: &NetworkParams, chi: f64) -> f64 {
    chi * params.weight_sq_norm()
}

pub fn loss_ic_soft(traj: &Trajectory, system: &SystemSpec, mode: ConstraintMode) -> Result<f64> {
    ic_term(traj, system, mode, &mut Adjoints::zeros(traj))
}

/// All trajectory-dependent terms with their combined adjoints.
pub fn assemble(
    traj: &Trajectory,
    system: &SystemSpec,
    weights: &LossWeights,
    mode: ConstraintMode,
) -> Result<(LossBreakdown, Adjoints)> {
    traj.check(system)?;
    let mask = weights.control_mask.resolve(traj.len())?;
    let mut adj = Adjoints::zeros(traj);
    let mut b = LossBreakdown {
        model: model_term(traj, system, &mut adj),
        ..Default::default()
    };
    b.control = control_term(traj, &system.target, weights.eta, &mask, &mut adj)?;
    b.constraint = constraint_term(traj, &system.constraints, weights.eta_c, &mask, &mut adj);
    if let ConstraintMode::Soft { .. } = mode {
        b.ic = ic_term(traj, system, mode, &mut adj)?;
    }
    Ok((b.finish(), adj))
}

/// Wrapped network trajectory on `times`.
pub fn network_trajectory(
    params: &NetworkParams,
    system: &SystemSpec,
    mode: ConstraintMode,
    times: &[f64],
) -> Result<Trajectory> {
    let (out, _) = forward_batch(params, times)?;
    let w = wrap_batch(mode, system.x0.view(), system.u0.view(), times, &out)?;
    Ok(Trajectory {
        times: times.to_vec(),
        x: w.x,
        u: w.u,
        x_dot: w.x_dot,
    })
}

/// Full loss and its parameter gradient.
pub fn loss_and_gradient(
    params: &NetworkParams,
    system: &SystemSpec,
    times: &[f64],
    weights: &LossWeights,
    mode: ConstraintMode,
) -> Result<(LossBreakdown, ParamGrads)> {
    if params.output_width() != system.n() + system.m() {
        return Err(Error::config(format!(
            "network output width {} != n + m = {}",
            params.output_width(),
            system.n() + system.m()
        )));
    }
    let (out, tape) = forward_batch(params, times)?;
    let w = wrap_batch(mode, system.x0.view(), system.u0.view(), times, &out)?;
    let traj = Trajectory {
        times: times.to_vec(),
        x: w.x.clone(),
        u: w.u.clone(),
        x_dot: w.x_dot.clone(),
    };
    let (mut breakdown, adj) = assemble(&traj, system, weights, mode)?;
    breakdown.regularization = loss_reg(params, weights.chi);
    let breakdown = breakdown.finish();
    if !breakdown.total.is_finite() {
        return Err(Error::Numeric {
            epoch: 0,
            what: format!("loss evaluated to {}", breakdown.total),
        });
    }
    let (g_val, g_tan) = w.pullback(mode, &adj.g_x, &adj.g_u, &adj.g_xdot);
    let mut grads = backward_batch(params, &tape, &g_val, &g_tan);
    grads.add_weight_decay(params, weights.chi);
    Ok((breakdown, grads))
}
