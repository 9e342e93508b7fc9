use rand::Rng;

use super::activations::sigmoid;
use crate::error::{Error, Result};
use crate::tensor::{matvec_add, matvec_t_add, outer_add, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gate {
    Input,
    Forget,
    Output,
    Candidate,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Output, Gate::Candidate];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Gate::Input => "input",
            Gate::Forget => "forget",
            Gate::Output => "output",
            Gate::Candidate => "candidate",
        }
    }
}

/// One LSTM layer. Arrays are indexed by [`Gate::index`].
#[derive(Clone, Debug, PartialEq)]
pub struct LstmLayerParams {
    /// `hidden × input` per gate.
    pub input_weights: [Tensor; 4],
    /// `hidden × hidden` per gate.
    pub recurrent_weights: [Tensor; 4],
    pub biases: [Tensor; 4],
}

impl LstmLayerParams {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        LstmLayerParams {
            input_weights: std::array::from_fn(|_| Tensor::zeros(&[hidden_size, input_size])),
            recurrent_weights: std::array::from_fn(|_| Tensor::zeros(&[hidden_size, hidden_size])),
            biases: std::array::from_fn(|_| Tensor::zeros(&[hidden_size])),
        }
    }

    /// Uniform `±1/sqrt(fan_in)` weights, zero biases except the forget
    /// gate, which starts at 1.
    pub fn init<R: Rng + ?Sized>(input_size: usize, hidden_size: usize, rng: &mut R) -> Self {
        let wb = 1.0 / (input_size as f64).sqrt();
        let ub = 1.0 / (hidden_size as f64).sqrt();
        let input_weights = std::array::from_fn(|_| Tensor::uniform(&[hidden_size, input_size], wb, rng));
        let recurrent_weights = std::array::from_fn(|_| Tensor::uniform(&[hidden_size, hidden_size], ub, rng));
        let mut biases: [Tensor; 4] = std::array::from_fn(|_| Tensor::zeros(&[hidden_size]));
        biases[Gate::Forget.index()].fill(1.0);
        LstmLayerParams {
            input_weights,
            recurrent_weights,
            biases,
        }
    }

    pub fn input_size(&self) -> usize {
        self.input_weights[0].cols()
    }

    pub fn hidden_size(&self) -> usize {
        self.input_weights[0].rows()
    }

    pub fn validate(&self) -> Result<()> {
        let (h, n) = (self.hidden_size(), self.input_size());
        for g in 0..4 {
            check_shape("LSTM input weights", &self.input_weights[g], &[h, n])?;
            check_shape("LSTM recurrent weights", &self.recurrent_weights[g], &[h, h])?;
            check_shape("LSTM bias", &self.biases[g], &[h])?;
        }
        Ok(())
    }

    pub(crate) fn named_tensors<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        for (kind, group) in [
            ("input_weights", &self.input_weights),
            ("recurrent_weights", &self.recurrent_weights),
            ("biases", &self.biases),
        ] {
            for gate in Gate::ALL {
                out.push((format!("{prefix}.{kind}.{}", gate.name()), &group[gate.index()]));
            }
        }
    }

    pub(crate) fn tensors_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>) {
        out.extend(self.input_weights.iter_mut());
        out.extend(self.recurrent_weights.iter_mut());
        out.extend(self.biases.iter_mut());
    }
}

pub(crate) fn check_shape(what: &'static str, t: &Tensor, shape: &[usize]) -> Result<()> {
    if t.shape() != shape {
        let expected = shape.iter().product();
        return Err(Error::DimensionMismatch {
            what,
            expected,
            actual: t.len(),
        });
    }
    Ok(())
}

/// Activations of one timestep, kept for backpropagation.
#[derive(Clone, Debug)]
pub struct LstmStepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Post-activation gate values indexed by [`Gate::index`].
    pub gates: [Vec<f64>; 4],
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

/// `i, f, o = σ(Wx + Uh + b)`, `g = tanh(Wx + Uh + b)`, `c = f⊙c' + i⊙g`,
/// `h = o⊙tanh(c)`.
pub fn lstm_step(
    layer: &LstmLayerParams,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    layer.validate()?;
    let h = layer.hidden_size();
    for (what, len, expected) in [
        ("LSTM input", x.len(), layer.input_size()),
        ("LSTM previous hidden state", h_prev.len(), h),
        ("LSTM previous cell state", c_prev.len(), h),
    ] {
        if len != expected {
            return Err(Error::DimensionMismatch {
                what,
                expected,
                actual: len,
            });
        }
    }
    let step = step_cached(layer, x.to_vec(), h_prev.to_vec(), c_prev.to_vec());
    Ok((step.h, step.c))
}

pub(crate) fn step_cached(layer: &LstmLayerParams, x: Vec<f64>, h_prev: Vec<f64>, c_prev: Vec<f64>) -> LstmStepCache {
    let hidden = layer.hidden_size();
    let gates: [Vec<f64>; 4] = std::array::from_fn(|g| {
        let mut pre = layer.biases[g].data().to_vec();
        matvec_add(&layer.input_weights[g], &x, &mut pre);
        matvec_add(&layer.recurrent_weights[g], &h_prev, &mut pre);
        if g == Gate::Candidate.index() {
            pre.iter_mut().for_each(|v| *v = v.tanh());
        } else {
            pre.iter_mut().for_each(|v| *v = sigmoid(*v));
        }
        pre
    });
    let [i, f, o, g] = [&gates[0], &gates[1], &gates[2], &gates[3]];
    let mut c = vec![0.0; hidden];
    let mut tanh_c = vec![0.0; hidden];
    let mut h = vec![0.0; hidden];
    for k in 0..hidden {
        c[k] = f[k] * c_prev[k] + i[k] * g[k];
        tanh_c[k] = c[k].tanh();
        h[k] = o[k] * tanh_c[k];
    }
    LstmStepCache {
        x,
        h_prev,
        c_prev,
        gates,
        c,
        tanh_c,
        h,
    }
}

/// Runs a layer over a sequence from zero initial state.
pub(crate) fn run_sequence(layer: &LstmLayerParams, inputs: Vec<Vec<f64>>) -> Vec<LstmStepCache> {
    let hidden = layer.hidden_size();
    let mut h = vec![0.0; hidden];
    let mut c = vec![0.0; hidden];
    let mut steps = Vec::with_capacity(inputs.len());
    for x in inputs {
        let step = step_cached(layer, x, h, c);
        h = step.h.clone();
        c = step.c.clone();
        steps.push(step);
    }
    steps
}

/// Backpropagation through time over one layer. `dh_out[t]` is the loss
/// gradient arriving at `h_t` from above. Accumulates parameter gradients
/// into `grads` and returns the gradient with respect to each input `x_t`
/// when `want_dx` is set.
pub(crate) fn backward_sequence(
    layer: &LstmLayerParams,
    steps: &[LstmStepCache],
    dh_out: &[Vec<f64>],
    grads: &mut LstmLayerParams,
    want_dx: bool,
) -> Vec<Vec<f64>> {
    let hidden = layer.hidden_size();
    let mut dh_next = vec![0.0; hidden];
    let mut dc_next = vec![0.0; hidden];
    let mut dx_all = vec![Vec::new(); steps.len()];
    let mut dpre: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; hidden]);

    for t in (0..steps.len()).rev() {
        let s = &steps[t];
        let [i, f, o, g] = [&s.gates[0], &s.gates[1], &s.gates[2], &s.gates[3]];
        for k in 0..hidden {
            let dh = dh_out[t][k] + dh_next[k];
            let dc = dh * o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]) + dc_next[k];
            dpre[Gate::Output.index()][k] = dh * s.tanh_c[k] * o[k] * (1.0 - o[k]);
            dpre[Gate::Input.index()][k] = dc * g[k] * i[k] * (1.0 - i[k]);
            dpre[Gate::Candidate.index()][k] = dc * i[k] * (1.0 - g[k] * g[k]);
            dpre[Gate::Forget.index()][k] = dc * s.c_prev[k] * f[k] * (1.0 - f[k]);
            dc_next[k] = dc * f[k];
        }
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        let mut dx = if want_dx { vec![0.0; s.x.len()] } else { Vec::new() };
        for gi in 0..4 {
            let d = &dpre[gi];
            outer_add(&mut grads.input_weights[gi], d, &s.x);
            outer_add(&mut grads.recurrent_weights[gi], d, &s.h_prev);
            for (b, v) in grads.biases[gi].data_mut().iter_mut().zip(d) {
                *b += v;
            }
            matvec_t_add(&layer.recurrent_weights[gi], d, &mut dh_next);
            if want_dx {
                matvec_t_add(&layer.input_weights[gi], d, &mut dx);
            }
        }
        dx_all[t] = dx;
    }
    dx_all
}
