use serde::{Deserialize, Serialize};

use super::network::{NetworkParams, ParamGrads};
use crate::error::{Error, Result};

/// Adam moments, stored flat in [`NetworkParams::to_flat`] order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    #[serde(rename = "m")]
    pub first_moment: Vec<f64>,
    #[serde(rename = "v")]
    pub second_moment: Vec<f64>,
    #[serde(rename = "t")]
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(params: &NetworkParams) -> Self {
        Self::with_hyper(params, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyper(params: &NetworkParams, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        let n = params.num_params();
        Self {
            first_moment: vec![0.0; n],
            second_moment: vec![0.0; n],
            step_count: 0,
            beta1,
            beta2,
            epsilon,
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(
    params: &mut NetworkParams,
    grads: &ParamGrads,
    state: &mut AdamState,
    learning_rate: f64,
) -> Result<()> {
    if !(learning_rate > 0.0) {
        return Err(Error::config(format!(
            "learning rate must be positive, got {learning_rate}"
        )));
    }
    if state.first_moment.len() != params.num_params() {
        return Err(Error::config("optimizer state does not match network shape"));
    }
    if !grads.all_finite() {
        return Err(Error::Numeric {
            epoch: state.step_count as usize,
            what: "non-finite gradient".into(),
        });
    }
    state.step_count += 1;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let c1 = 1.0 - b1.powi(state.step_count as i32);
    let c2 = 1.0 - b2.powi(state.step_count as i32);

    let param_slices = params
        .weights
        .iter_mut()
        .map(|w| w.as_slice_mut().expect("standard layout"))
        .chain(
            params
                .biases
                .iter_mut()
                .map(|b| b.as_slice_mut().expect("standard layout")),
        );
    let grad_slices = grads
        .weights
        .iter()
        .map(|w| w.as_slice().expect("standard layout"))
        .chain(grads.biases.iter().map(|b| b.as_slice().expect("standard layout")));

    let mut offset = 0;
    for (p, g) in param_slices.zip(grad_slices) {
        let m = &mut state.first_moment[offset..offset + p.len()];
        let v = &mut state.second_moment[offset..offset + p.len()];
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= learning_rate * m_hat / (v_hat.sqrt() + eps);
        }
        offset += p.len();
    }
    Ok(())
}
