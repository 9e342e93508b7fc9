use rand::{Rng, RngCore};

use super::activations::softmax;
use super::dropout::sample_mask;
use super::lstm::{backward_sequence, check_shape, run_sequence, LstmLayerParams, LstmStepCache};
use crate::corpus::WordId;
use crate::error::{Error, Result};
use crate::glove::EmbeddingMatrix;
use crate::tensor::{matvec_add, matvec_t_add, outer_add, Tensor};

/// Fully connected layer, `weights` is `out × in`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    pub weights: Tensor,
    pub bias: Tensor,
}

impl DenseLayer {
    pub fn zeros(input_size: usize, output_size: usize) -> Self {
        DenseLayer {
            weights: Tensor::zeros(&[output_size, input_size]),
            bias: Tensor::zeros(&[output_size]),
        }
    }

    pub fn init<R: Rng + ?Sized>(input_size: usize, output_size: usize, rng: &mut R) -> Self {
        DenseLayer {
            weights: Tensor::uniform(&[output_size, input_size], 1.0 / (input_size as f64).sqrt(), rng),
            bias: Tensor::zeros(&[output_size]),
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.bias.data().to_vec();
        matvec_add(&self.weights, x, &mut out);
        out
    }

    fn validate(&self, what: &'static str, input_size: usize, output_size: usize) -> Result<()> {
        check_shape(what, &self.weights, &[output_size, input_size])?;
        check_shape(what, &self.bias, &[output_size])
    }
}

/// Every trainable tensor of the predictor. Also used as the gradient and
/// optimizer-moment container, since those share its shapes.
#[derive(Clone, Debug, PartialEq)]
pub struct Weights {
    pub lstm1: LstmLayerParams,
    pub lstm2: LstmLayerParams,
    pub dense1: DenseLayer,
    pub dense2: DenseLayer,
    pub output: DenseLayer,
}

pub type Gradients = Weights;

impl Weights {
    pub fn zeros(embedding_dim: usize, hidden_size: usize, vocab_size: usize) -> Self {
        Weights {
            lstm1: LstmLayerParams::zeros(embedding_dim, hidden_size),
            lstm2: LstmLayerParams::zeros(hidden_size, hidden_size),
            dense1: DenseLayer::zeros(hidden_size, hidden_size),
            dense2: DenseLayer::zeros(hidden_size, hidden_size),
            output: DenseLayer::zeros(hidden_size, vocab_size),
        }
    }

    pub fn init<R: Rng + ?Sized>(embedding_dim: usize, hidden_size: usize, vocab_size: usize, rng: &mut R) -> Self {
        Weights {
            lstm1: LstmLayerParams::init(embedding_dim, hidden_size, rng),
            lstm2: LstmLayerParams::init(hidden_size, hidden_size, rng),
            dense1: DenseLayer::init(hidden_size, hidden_size, rng),
            dense2: DenseLayer::init(hidden_size, hidden_size, rng),
            output: DenseLayer::init(hidden_size, vocab_size, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Weights::zeros(self.lstm1.input_size(), self.lstm1.hidden_size(), self.output.weights.rows())
    }

    /// Tensors in storage order with stable dotted names.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::with_capacity(34);
        self.lstm1.named_tensors("lstm1", &mut out);
        self.lstm2.named_tensors("lstm2", &mut out);
        for (name, layer) in [("dense1", &self.dense1), ("dense2", &self.dense2), ("output", &self.output)] {
            out.push((format!("{name}.weights"), &layer.weights));
            out.push((format!("{name}.bias"), &layer.bias));
        }
        out
    }

    /// Same order as [`named_tensors`](Self::named_tensors).
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::with_capacity(34);
        self.lstm1.tensors_mut(&mut out);
        self.lstm2.tensors_mut(&mut out);
        for layer in [&mut self.dense1, &mut self.dense2, &mut self.output] {
            out.push(&mut layer.weights);
            out.push(&mut layer.bias);
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub(crate) fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.data_mut().iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub(crate) fn clear(&mut self) {
        for t in self.tensors_mut() {
            t.fill(0.0);
        }
    }
}

/// The six-layer predictor: frozen embedding, two LSTM layers, two tanh
/// dense layers and a softmax projection over the vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    pub embedding: EmbeddingMatrix,
    pub weights: Weights,
}

impl NetworkParams {
    pub fn init<R: Rng + ?Sized>(embedding: EmbeddingMatrix, hidden_size: usize, rng: &mut R) -> Self {
        let weights = Weights::init(embedding.dim(), hidden_size, embedding.vocab_size(), rng);
        NetworkParams { embedding, weights }
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.vocab_size()
    }

    pub fn embedding_dim(&self) -> usize {
        self.embedding.dim()
    }

    pub fn hidden_size(&self) -> usize {
        self.weights.lstm1.hidden_size()
    }

    /// Checks that layer sizes chain `dim → H → H → H → H → |V|`.
    pub fn validate(&self) -> Result<()> {
        let (d, h, v) = (self.embedding_dim(), self.hidden_size(), self.vocab_size());
        let w = &self.weights;
        w.lstm1.validate()?;
        w.lstm2.validate()?;
        if w.lstm1.input_size() != d {
            return Err(Error::DimensionMismatch {
                what: "lstm1 input",
                expected: d,
                actual: w.lstm1.input_size(),
            });
        }
        if w.lstm2.input_size() != h || w.lstm2.hidden_size() != h {
            return Err(Error::DimensionMismatch {
                what: "lstm2 size",
                expected: h,
                actual: w.lstm2.hidden_size(),
            });
        }
        w.dense1.validate("dense1", h, h)?;
        w.dense2.validate("dense2", h, h)?;
        w.output.validate("output projection", h, v)
    }

    /// Rounds every weight to the nearest single-precision value, the
    /// precision model files store.
    pub fn round_to_f32(&mut self) {
        let round = |t: &mut Tensor| t.data_mut().iter_mut().for_each(|v| *v = *v as f32 as f64);
        round(self.embedding.tensor_mut());
        for t in self.weights.tensors_mut() {
            round(t);
        }
    }

    fn check_context(&self, context: &[WordId]) -> Result<()> {
        if context.is_empty() {
            return Err(Error::InvalidArgument("empty context".into()));
        }
        let v = self.vocab_size();
        match context.iter().find(|&&id| id as usize >= v) {
            Some(&id) => Err(Error::IdOutOfRange { id, vocab_size: v }),
            None => Ok(()),
        }
    }
}

/// Scaled dropout masks for one example. Entries are `0` or `1/(1-rate)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutMasks {
    /// Per timestep, applied to the first LSTM layer's outputs.
    pub lstm1: Vec<Vec<f64>>,
    /// Applied to the second LSTM layer's final output.
    pub lstm2: Vec<f64>,
    pub dense1: Vec<f64>,
    pub dense2: Vec<f64>,
}

impl DropoutMasks {
    pub fn ones(context_length: usize, hidden_size: usize) -> Self {
        DropoutMasks {
            lstm1: vec![vec![1.0; hidden_size]; context_length],
            lstm2: vec![1.0; hidden_size],
            dense1: vec![1.0; hidden_size],
            dense2: vec![1.0; hidden_size],
        }
    }

    pub fn sample<R: Rng + ?Sized>(context_length: usize, hidden_size: usize, rate: f64, rng: &mut R) -> Self {
        DropoutMasks {
            lstm1: (0..context_length).map(|_| sample_mask(hidden_size, rate, rng)).collect(),
            lstm2: sample_mask(hidden_size, rate, rng),
            dense1: sample_mask(hidden_size, rate, rng),
            dense2: sample_mask(hidden_size, rate, rng),
        }
    }
}

pub enum Mode<'a> {
    Eval,
    Train { dropout: f64, rng: &'a mut dyn RngCore },
}

/// Everything the backward pass needs from one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    pub context: Vec<WordId>,
    pub lstm1: Vec<LstmStepCache>,
    pub lstm2: Vec<LstmStepCache>,
    pub masks: DropoutMasks,
    /// Masked final output of the second LSTM layer.
    pub z0: Vec<f64>,
    pub a1: Vec<f64>,
    pub z1: Vec<f64>,
    pub a2: Vec<f64>,
    pub z2: Vec<f64>,
    pub probs: Vec<f64>,
}

pub fn forward(params: &NetworkParams, context: &[WordId], mode: Mode<'_>) -> Result<(Vec<f64>, ForwardCache)> {
    let masks = match mode {
        Mode::Eval => DropoutMasks::ones(context.len(), params.hidden_size()),
        Mode::Train { dropout, rng } => {
            if !(0.0..1.0).contains(&dropout) {
                return Err(Error::InvalidArgument(format!("dropout rate {dropout} not in [0, 1)")));
            }
            DropoutMasks::sample(context.len(), params.hidden_size(), dropout, rng)
        }
    };
    forward_with_masks(params, context, masks)
}

/// Forward pass under explicit dropout masks.
pub fn forward_with_masks(
    params: &NetworkParams,
    context: &[WordId],
    masks: DropoutMasks,
) -> Result<(Vec<f64>, ForwardCache)> {
    params.check_context(context)?;
    let h = params.hidden_size();
    if masks.lstm1.len() != context.len() {
        return Err(Error::DimensionMismatch {
            what: "dropout masks",
            expected: context.len(),
            actual: masks.lstm1.len(),
        });
    }
    if masks.lstm1.iter().chain([&masks.lstm2, &masks.dense1, &masks.dense2]).any(|m| m.len() != h) {
        return Err(Error::InvalidArgument("dropout mask width differs from hidden size".into()));
    }
    let w = &params.weights;

    let inputs = context.iter().map(|&id| params.embedding.row(id).to_vec()).collect();
    let lstm1 = run_sequence(&w.lstm1, inputs);
    let lstm2_inputs = lstm1
        .iter()
        .zip(&masks.lstm1)
        .map(|(s, m)| mul(&s.h, m))
        .collect();
    let lstm2 = run_sequence(&w.lstm2, lstm2_inputs);
    let z0 = mul(&lstm2.last().expect("non-empty context").h, &masks.lstm2);

    let mut a1 = w.dense1.apply(&z0);
    a1.iter_mut().for_each(|v| *v = v.tanh());
    let z1 = mul(&a1, &masks.dense1);
    let mut a2 = w.dense2.apply(&z1);
    a2.iter_mut().for_each(|v| *v = v.tanh());
    let z2 = mul(&a2, &masks.dense2);
    let probs = softmax(&w.output.apply(&z2));

    let cache = ForwardCache {
        context: context.to_vec(),
        lstm1,
        lstm2,
        masks,
        z0,
        a1,
        z1,
        a2,
        z2,
        probs: probs.clone(),
    };
    Ok((probs, cache))
}

/// Eval-mode next-word distribution.
pub fn predict_probs(params: &NetworkParams, context: &[WordId]) -> Result<Vec<f64>> {
    forward(params, context, Mode::Eval).map(|(p, _)| p)
}

fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

/// Exact cross-entropy gradients for every trainable tensor. The embedding
/// is frozen and gets none.
pub fn backward(params: &NetworkParams, cache: &ForwardCache, target: WordId) -> Result<Gradients> {
    let mut grads = params.weights.zeros_like();
    accumulate_gradients(params, cache, target, &mut grads)?;
    Ok(grads)
}

pub(crate) fn accumulate_gradients(
    params: &NetworkParams,
    cache: &ForwardCache,
    target: WordId,
    grads: &mut Gradients,
) -> Result<()> {
    let (h, v) = (params.hidden_size(), params.vocab_size());
    if cache.probs.len() != v || cache.z0.len() != h || cache.lstm1.len() != cache.context.len() {
        return Err(Error::InvalidArgument("forward cache does not match these parameters".into()));
    }
    if target as usize >= v {
        return Err(Error::IdOutOfRange { id: target, vocab_size: v });
    }
    let w = &params.weights;

    let mut dlogits = cache.probs.clone();
    dlogits[target as usize] -= 1.0;
    outer_add(&mut grads.output.weights, &dlogits, &cache.z2);
    add_into(grads.output.bias.data_mut(), &dlogits);
    let mut dz2 = vec![0.0; h];
    matvec_t_add(&w.output.weights, &dlogits, &mut dz2);

    let dz1 = dense_tanh_backward(&w.dense2, &mut grads.dense2, &dz2, &cache.masks.dense2, &cache.a2, &cache.z1);
    let dz0 = dense_tanh_backward(&w.dense1, &mut grads.dense1, &dz1, &cache.masks.dense1, &cache.a1, &cache.z0);

    let steps = cache.lstm2.len();
    let mut dh2 = vec![vec![0.0; h]; steps];
    dh2[steps - 1] = mul(&dz0, &cache.masks.lstm2);
    let dx2 = backward_sequence(&w.lstm2, &cache.lstm2, &dh2, &mut grads.lstm2, true);
    let dh1: Vec<Vec<f64>> = dx2.iter().zip(&cache.masks.lstm1).map(|(d, m)| mul(d, m)).collect();
    backward_sequence(&w.lstm1, &cache.lstm1, &dh1, &mut grads.lstm1, false);
    Ok(())
}

/// Given `dL/dz` for `z = mask ⊙ tanh(W x + b)`, accumulates layer gradients
/// and returns `dL/dx`.
fn dense_tanh_backward(
    layer: &DenseLayer,
    grads: &mut DenseLayer,
    dz: &[f64],
    mask: &[f64],
    activation: &[f64],
    input: &[f64],
) -> Vec<f64> {
    let dpre: Vec<f64> = dz
        .iter()
        .zip(mask)
        .zip(activation)
        .map(|((d, m), a)| d * m * (1.0 - a * a))
        .collect();
    outer_add(&mut grads.weights, &dpre, input);
    add_into(grads.bias.data_mut(), &dpre);
    let mut dx = vec![0.0; input.len()];
    matvec_t_add(&layer.weights, &dpre, &mut dx);
    dx
}

fn add_into(acc: &mut [f64], x: &[f64]) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}
