use ndarray::{Array1, Array2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dual::Dual;
use crate::error::{Error, Result};

/// Weights and biases of a sine-activated feed-forward network.
///
/// `weights[l]` has shape `(layer_sizes[l + 1], layer_sizes[l])`. Hidden layers
/// apply `sin`, the output layer is affine.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub seed: u64,
}

/// Gradient with the same shapes as [`NetworkParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrads {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

pub fn validate_layer_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(Error::config(format!(
            "need at least an input and an output layer, got {layer_sizes:?}"
        )));
    }
    if layer_sizes[0] != 1 {
        return Err(Error::config(format!(
            "input width must be 1 (time is the only input), got {}",
            layer_sizes[0]
        )));
    }
    if layer_sizes.iter().any(|&w| w == 0) {
        return Err(Error::config(format!("zero-width layer in {layer_sizes:?}")));
    }
    Ok(())
}

/// Glorot-uniform weights, zero biases, deterministic in `seed`.
pub fn init_params(layer_sizes: &[usize], seed: u64) -> Result<NetworkParams> {
    validate_layer_sizes(layer_sizes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
    let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
    for pair in layer_sizes.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let w = Array2::from_shape_simple_fn((fan_out, fan_in), || {
            rng.random_range(-limit..=limit)
        });
        weights.push(w);
        biases.push(Array1::zeros(fan_out));
    }
    Ok(NetworkParams {
        layer_sizes: layer_sizes.to_vec(),
        weights,
        biases,
        seed,
    })
}

impl NetworkParams {
    pub fn input_width(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_sizes.last().expect("validated non-empty")
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Checks shapes against `layer_sizes` and that every entry is finite.
    pub fn validate(&self) -> Result<()> {
        validate_layer_sizes(&self.layer_sizes)?;
        if self.weights.len() != self.layer_sizes.len() - 1
            || self.biases.len() != self.weights.len()
        {
            return Err(Error::config("layer count does not match layer_sizes"));
        }
        for (l, pair) in self.layer_sizes.windows(2).enumerate() {
            if self.weights[l].dim() != (pair[1], pair[0]) || self.biases[l].len() != pair[1] {
                return Err(Error::config(format!("layer {l} has the wrong shape")));
            }
        }
        let finite = self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(Error::Domain("non-finite network parameter".into()));
        }
        Ok(())
    }

    /// Flat view of all parameters, weights first (layer order), then biases.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for w in &self.weights {
            out.extend(w.iter());
        }
        for b in &self.biases {
            out.extend(b.iter());
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params());
        let mut it = flat.iter();
        for w in &mut self.weights {
            w.iter_mut().for_each(|v| *v = *it.next().unwrap());
        }
        for b in &mut self.biases {
            b.iter_mut().for_each(|v| *v = *it.next().unwrap());
        }
    }

    /// Sum of squared weights (biases excluded).
    pub fn weight_sq_norm(&self) -> f64 {
        self.weights
            .iter()
            .map(|w| w.iter().map(|v| v * v).sum::<f64>())
            .sum()
    }

    pub fn zero_grads(&self) -> ParamGrads {
        ParamGrads {
            weights: self.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: self.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }
}

impl ParamGrads {
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for w in &self.weights {
            out.extend(w.iter());
        }
        for b in &self.biases {
            out.extend(b.iter());
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// Adds `2·chi·W` to every weight gradient.
    pub fn add_weight_decay(&mut self, params: &NetworkParams, chi: f64) {
        for (g, w) in self.weights.iter_mut().zip(&params.weights) {
            g.scaled_add(2.0 * chi, w);
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("network input must be finite, got {t}")))
    }
}

/// Network output at a single time.
pub fn forward(params: &NetworkParams, t: f64) -> Result<Array1<f64>> {
    check_time(t)?;
    let mut a = Array1::from_elem(1, t);
    let last = params.num_layers() - 1;
    for (l, (w, b)) in params.weights.iter().zip(&params.biases).enumerate() {
        let mut h = w.dot(&a);
        h += b;
        if l < last {
            h.mapv_inplace(f64::sin);
        }
        a = h;
    }
    Ok(a)
}

/// Output and its exact time derivative, propagated as dual numbers.
pub fn forward_with_time_derivative(
    params: &NetworkParams,
    t: f64,
) -> Result<(Array1<f64>, Array1<f64>)> {
    check_time(t)?;
    let mut a = vec![Dual::variable(t)];
    let last = params.num_layers() - 1;
    for (l, (w, b)) in params.weights.iter().zip(&params.biases).enumerate() {
        let next: Vec<Dual> = w
            .outer_iter()
            .zip(b.iter())
            .map(|(row, &bias)| {
                let z = row
                    .iter()
                    .zip(&a)
                    .fold(Dual::constant(bias), |acc, (&wij, &aj)| acc + aj.scale(wij));
                if l < last {
                    z.sin()
                } else {
                    z
                }
            })
            .collect();
        a = next;
    }
    let values = a.iter().map(|d| d.value).collect();
    let tangents = a.iter().map(|d| d.tangent).collect();
    Ok((values, tangents))
}

/// Network outputs over a batch of times: column `i` belongs to `times[i]`.
#[derive(Clone, Debug)]
pub struct BatchOutputs {
    pub values: Array2<f64>,
    pub time_derivs: Array2<f64>,
}

/// Intermediates kept by [`forward_batch`] for the reverse pass.
pub struct ForwardTape {
    inputs: Vec<Array2<f64>>,
    input_tangents: Vec<Array2<f64>>,
    hidden: Vec<HiddenCache>,
}

struct HiddenCache {
    sin: Array2<f64>,
    cos: Array2<f64>,
    pre_tangent: Array2<f64>,
}

/// Batched value + tangent propagation. Each hidden layer is
/// `A = sin(W·A_prev + b)`, `T = cos(W·A_prev + b) ⊙ (W·T_prev)`.
pub fn forward_batch(params: &NetworkParams, times: &[f64]) -> Result<(BatchOutputs, ForwardTape)> {
    for &t in times {
        check_time(t)?;
    }
    let m = times.len();
    let mut a = Array2::from_shape_vec((1, m), times.to_vec()).expect("shape");
    let mut tan = Array2::<f64>::ones((1, m));
    let last = params.num_layers() - 1;
    let mut tape = ForwardTape {
        inputs: Vec::with_capacity(last + 1),
        input_tangents: Vec::with_capacity(last + 1),
        hidden: Vec::with_capacity(last),
    };
    for (l, (w, b)) in params.weights.iter().zip(&params.biases).enumerate() {
        let mut h = w.dot(&a);
        h += &b.view().insert_axis(Axis(1));
        let th = w.dot(&tan);
        tape.inputs.push(a);
        tape.input_tangents.push(tan);
        if l < last {
            let mut s = Array2::zeros(h.raw_dim());
            let mut c = Array2::zeros(h.raw_dim());
            Zip::from(&mut s).and(&mut c).and(&h).for_each(|s, c, &h| {
                let (sv, cv) = h.sin_cos();
                *s = sv;
                *c = cv;
            });
            let next_tan = &c * &th;
            a = s.clone();
            tan = next_tan;
            tape.hidden.push(HiddenCache {
                sin: s,
                cos: c,
                pre_tangent: th,
            });
        } else {
            return Ok((
                BatchOutputs {
                    values: h,
                    time_derivs: th,
                },
                tape,
            ));
        }
    }
    unreachable!("network has at least one layer")
}

/// Reverse pass through the value and tangent channels.
///
/// `grad_values` and `grad_time_derivs` are the adjoints of a scalar with
/// respect to [`BatchOutputs::values`] and [`BatchOutputs::time_derivs`].
pub fn backward_batch(
    params: &NetworkParams,
    tape: &ForwardTape,
    grad_values: &Array2<f64>,
    grad_time_derivs: &Array2<f64>,
) -> ParamGrads {
    let nl = params.num_layers();
    let mut grads = params.zero_grads();
    let mut g_val = grad_values.clone();
    let mut g_tan = grad_time_derivs.clone();
    for l in (0..nl).rev() {
        // Adjoint of the pre-activation and of its tangent.
        let (g_pre, g_pre_tan) = if l == nl - 1 {
            (g_val, g_tan)
        } else {
            let cache = &tape.hidden[l];
            let mut g_pre = &g_val * &cache.cos;
            Zip::from(&mut g_pre)
                .and(&g_tan)
                .and(&cache.sin)
                .and(&cache.pre_tangent)
                .for_each(|gp, &gt, &s, &th| *gp -= gt * s * th);
            let g_pre_tan = &g_tan * &cache.cos;
            (g_pre, g_pre_tan)
        };
        let w = &params.weights[l];
        grads.weights[l] =
            g_pre.dot(&tape.inputs[l].t()) + g_pre_tan.dot(&tape.input_tangents[l].t());
        grads.biases[l] = g_pre.sum_axis(Axis(1));
        if l > 0 {
            g_val = w.t().dot(&g_pre);
            g_tan = w.t().dot(&g_pre_tan);
        } else {
            break;
        }
    }
    grads
}

/// Value and parameter gradient of a scalar built from network outputs.
///
/// `evaluator` receives the batched outputs and returns the scalar together
/// with its adjoints with respect to values and time derivatives.
pub fn loss_gradient<F>(
    params: &NetworkParams,
    times: &[f64],
    evaluator: F,
) -> Result<(f64, ParamGrads)>
where
    F: FnOnce(&BatchOutputs) -> (f64, Array2<f64>, Array2<f64>),
{
    let (out, tape) = forward_batch(params, times)?;
    let (value, g_val, g_tan) = evaluator(&out);
    if !value.is_finite() {
        return Err(Error::Numeric {
            epoch: 0,
            what: format!("loss evaluated to {value}"),
        });
    }
    Ok((value, backward_batch(params, &tape, &g_val, &g_tan)))
}
