//! JSON checkpoints of network parameters and optimizer state.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::network::NetworkParams;
use crate::error::{Error, Result};
use crate::io::write_atomic;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointAdam {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub layer_sizes: Vec<usize>,
    pub activation: String,
    /// Row-major flattened weight matrix per layer.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adam: Option<CheckpointAdam>,
}

impl Checkpoint {
    pub fn new(params: &NetworkParams, adam: Option<&AdamState>) -> Self {
        Self {
            layer_sizes: params.layer_sizes.clone(),
            activation: "sin".into(),
            weights: params.weights.iter().map(|w| w.iter().copied().collect()).collect(),
            biases: params.biases.iter().map(|b| b.to_vec()).collect(),
            seed: params.seed,
            adam: adam.map(|s| CheckpointAdam {
                m: s.first_moment.clone(),
                v: s.second_moment.clone(),
                t: s.step_count,
            }),
        }
    }

    pub fn params(&self) -> Result<NetworkParams> {
        if self.activation != "sin" {
            return Err(Error::config(format!(
                "unsupported activation {:?}",
                self.activation
            )));
        }
        if self.weights.len() + 1 != self.layer_sizes.len() || self.biases.len() != self.weights.len() {
            return Err(Error::config("checkpoint layer count mismatch"));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for (l, pair) in self.layer_sizes.windows(2).enumerate() {
            let w = Array2::from_shape_vec((pair[1], pair[0]), self.weights[l].clone())
                .map_err(|e| Error::config(format!("layer {l} weights: {e}")))?;
            if self.biases[l].len() != pair[1] {
                return Err(Error::config(format!("layer {l} bias length mismatch")));
            }
            weights.push(w);
            biases.push(Array1::from(self.biases[l].clone()));
        }
        let p = NetworkParams {
            layer_sizes: self.layer_sizes.clone(),
            weights,
            biases,
            seed: self.seed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn adam_state(&self, params: &NetworkParams) -> Result<Option<AdamState>> {
        let Some(a) = &self.adam else { return Ok(None) };
        let n = params.num_params();
        if a.m.len() != n || a.v.len() != n {
            return Err(Error::config("optimizer moments do not match network shape"));
        }
        let mut s = AdamState::new(params);
        s.first_moment = a.m.clone();
        s.second_moment = a.v.clone();
        s.step_count = a.t;
        Ok(Some(s))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::adam::adam_step;
    use crate::neural::network::init_params;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut p = init_params(&[1, 5, 3], 17).unwrap();
        let mut s = AdamState::new(&p);
        let g = {
            let mut g = p.zero_grads();
            g.weights[0].fill(0.123456789);
            g
        };
        adam_step(&mut p, &g, &mut s, 1e-2).unwrap();
        let cp = Checkpoint::new(&p, Some(&s));
        let back = Checkpoint::from_json(&cp.to_json().unwrap()).unwrap();
        assert_eq!(back, cp);
        assert_eq!(back.params().unwrap(), p);
        assert_eq!(back.adam_state(&p).unwrap().unwrap(), s);
    }

    #[test]
    fn rejects_foreign_activation() {
        let p = init_params(&[1, 2, 1], 1).unwrap();
        let mut cp = Checkpoint::new(&p, None);
        cp.activation = "tanh".into();
        assert!(cp.params().is_err());
    }

    #[test]
    fn json_has_expected_keys() {
        let p = init_params(&[1, 2, 1], 1).unwrap();
        let s = AdamState::new(&p);
        let v: serde_json::Value = serde_json::from_str(&Checkpoint::new(&p, Some(&s)).to_json().unwrap()).unwrap();
        for k in ["layer_sizes", "activation", "weights", "biases", "seed", "adam"] {
            assert!(v.get(k).is_some(), "missing {k}");
        }
        for k in ["m", "v", "t"] {
            assert!(v["adam"].get(k).is_some());
        }
    }
}
