//! Mapping raw network outputs to state and control trajectories.
//!
//! Hard mode uses `x(t) = x0 + f(t)·N_x(t)` with `f(t) = 1 − e^{−t}`, so the
//! initial conditions hold exactly at `t = 0`. Soft mode uses the raw outputs
//! and leaves the initial conditions to a loss term.

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use super::network::{forward_with_time_derivative, BatchOutputs, NetworkParams};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum ConstraintMode {
    Hard,
    Soft { weight: f64 },
}

impl Default for ConstraintMode {
    fn default() -> Self {
        ConstraintMode::Hard
    }
}

impl ConstraintMode {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ConstraintMode::Soft { weight } if !(weight >= 0.0 && weight.is_finite()) => Err(
                Error::config(format!("soft-constraint weight must be >= 0, got {weight}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn soft_weight(&self) -> f64 {
        match *self {
            ConstraintMode::Hard => 0.0,
            ConstraintMode::Soft { weight } => weight,
        }
    }
}

/// `f(t) = 1 − e^{−t}` and `f'(t) = e^{−t}`.
pub fn envelope(t: f64) -> (f64, f64) {
    let e = (-t).exp();
    (1.0 - e, e)
}

/// State, control and their time derivatives at a single time.
#[derive(Clone, Debug, PartialEq)]
pub struct WrappedPoint {
    pub x: Array1<f64>,
    pub u: Array1<f64>,
    pub x_dot: Array1<f64>,
    pub u_dot: Array1<f64>,
}

fn check_dims(x0: ArrayView1<f64>, u0: ArrayView1<f64>, width: usize) -> Result<()> {
    if x0.len() + u0.len() != width {
        return Err(Error::config(format!(
            "network output width {width} != n + m = {} + {}",
            x0.len(),
            u0.len()
        )));
    }
    Ok(())
}

/// Hard-constraint wrap of the network at time `t`.
pub fn wrap_hard_constraint(
    x0: ArrayView1<f64>,
    u0: ArrayView1<f64>,
    params: &NetworkParams,
    t: f64,
) -> Result<WrappedPoint> {
    wrap_point(ConstraintMode::Hard, x0, u0, params, t)
}

pub fn wrap_point(
    mode: ConstraintMode,
    x0: ArrayView1<f64>,
    u0: ArrayView1<f64>,
    params: &NetworkParams,
    t: f64,
) -> Result<WrappedPoint> {
    check_dims(x0, u0, params.output_width())?;
    let n = x0.len();
    let (y, dy) = forward_with_time_derivative(params, t)?;
    let (nx, nu) = (y.slice(s![..n]), y.slice(s![n..]));
    let (dnx, dnu) = (dy.slice(s![..n]), dy.slice(s![n..]));
    Ok(match mode {
        ConstraintMode::Hard => {
            let (f, fp) = envelope(t);
            WrappedPoint {
                x: &x0 + &(&nx * f),
                u: &u0 + &(&nu * f),
                x_dot: &nx * fp + &dnx * f,
                u_dot: &nu * fp + &dnu * f,
            }
        }
        ConstraintMode::Soft { .. } => WrappedPoint {
            x: nx.to_owned(),
            u: nu.to_owned(),
            x_dot: dnx.to_owned(),
            u_dot: dnu.to_owned(),
        },
    })
}

/// Batched state/control trajectory built from network outputs.
#[derive(Clone, Debug)]
pub struct WrappedBatch {
    pub x: Array2<f64>,
    pub u: Array2<f64>,
    pub x_dot: Array2<f64>,
    pub u_dot: Array2<f64>,
    envelope: Vec<(f64, f64)>,
}

pub fn wrap_batch(
    mode: ConstraintMode,
    x0: ArrayView1<f64>,
    u0: ArrayView1<f64>,
    times: &[f64],
    out: &BatchOutputs,
) -> Result<WrappedBatch> {
    check_dims(x0, u0, out.values.nrows())?;
    let n = x0.len();
    let nx = out.values.slice(s![..n, ..]);
    let nu = out.values.slice(s![n.., ..]);
    let dnx = out.time_derivs.slice(s![..n, ..]);
    let dnu = out.time_derivs.slice(s![n.., ..]);
    match mode {
        ConstraintMode::Hard => {
            let env: Vec<(f64, f64)> = times.iter().map(|&t| envelope(t)).collect();
            let f = Array1::from_iter(env.iter().map(|e| e.0)).insert_axis(Axis(0));
            let fp = Array1::from_iter(env.iter().map(|e| e.1)).insert_axis(Axis(0));
            let x = &x0.insert_axis(Axis(1)) + &(&nx * &f);
            let u = &u0.insert_axis(Axis(1)) + &(&nu * &f);
            let x_dot = &nx * &fp + &dnx * &f;
            let u_dot = &nu * &fp + &dnu * &f;
            Ok(WrappedBatch {
                x,
                u,
                x_dot,
                u_dot,
                envelope: env,
            })
        }
        ConstraintMode::Soft { .. } => Ok(WrappedBatch {
            x: nx.to_owned(),
            u: nu.to_owned(),
            x_dot: dnx.to_owned(),
            u_dot: dnu.to_owned(),
            envelope: vec![(1.0, 0.0); times.len()],
        }),
    }
}

impl WrappedBatch {
    /// Pulls adjoints w.r.t. `(x, u, ẋ)` back to adjoints w.r.t. the raw
    /// network values and time derivatives. Rows: state block, then control.
    pub fn pullback(
        &self,
        mode: ConstraintMode,
        g_x: &Array2<f64>,
        g_u: &Array2<f64>,
        g_xdot: &Array2<f64>,
    ) -> (Array2<f64>, Array2<f64>) {
        let (n, m) = (self.x.nrows(), self.u.nrows());
        let cols = self.x.ncols();
        let mut g_val = Array2::zeros((n + m, cols));
        let mut g_tan = Array2::zeros((n + m, cols));
        match mode {
            ConstraintMode::Hard => {
                for (i, &(f, fp)) in self.envelope.iter().enumerate() {
                    for k in 0..n {
                        g_val[[k, i]] = f * g_x[[k, i]] + fp * g_xdot[[k, i]];
                        g_tan[[k, i]] = f * g_xdot[[k, i]];
                    }
                    for k in 0..m {
                        g_val[[n + k, i]] = f * g_u[[k, i]];
                    }
                }
            }
            ConstraintMode::Soft { .. } => {
                g_val.slice_mut(s![..n, ..]).assign(g_x);
                g_val.slice_mut(s![n.., ..]).assign(g_u);
                g_tan.slice_mut(s![..n, ..]).assign(g_xdot);
            }
        }
        (g_val, g_tan)
    }
}
