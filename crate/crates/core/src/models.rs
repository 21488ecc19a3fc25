//! Trainable discriminative models: layered fully-connected networks with
//! manual backprop, SGD+momentum optimization, and a choice of softmax or
//! softRmax posterior head.

use crate::activations::{nll_grad_z, nll_loss, HeadActivation};
use crate::data::Dataset;
use crate::numeric::{Matrix, RngState};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Nonlinearity {
    Relu,
    None,
}

#[derive(Debug, Clone)]
pub struct Layer {
    /// `out x in` weight matrix.
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub nonlinearity: Nonlinearity,
}

impl Layer {
    pub fn output_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }
}

#[derive(Debug, Clone)]
pub struct NeuralModel {
    pub layers: Vec<Layer>,
    pub head: HeadActivation,
    /// Class count; equals the final layer's output width.
    pub k: usize,
}

/// Weight initialization schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitScheme {
    /// Hidden layers: uniform `±1/sqrt(fan_in)` with ReLU. Final layer: small
    /// uniform weights with bias `1/k` per coordinate, so the initial latent
    /// vector sits near the simplex barycenter where both heads produce
    /// uniform posteriors and live gradients. softRmax training stalls
    /// without this: a latent vector thrown deep into the conservative tail
    /// has vanishing gradients and no restoring force.
    FanInBarycenter,
}

impl NeuralModel {
    /// Builds a network with the given layer widths, e.g. `[784, 128, 2]`.
    pub fn init(
        dims: &[usize],
        head: HeadActivation,
        scheme: InitScheme,
        rng: &mut RngState,
    ) -> Result<Self> {
        let InitScheme::FanInBarycenter = scheme;
        if dims.len() < 2 {
            return Err(Error::InvalidParameter(
                "need at least input and output widths".into(),
            ));
        }
        let k = *dims.last().unwrap();
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let last = layers.len() == dims.len() - 2;
            let scale = if last {
                0.01
            } else {
                1.0 / (fan_in as f64).sqrt()
            };
            let data: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| rng.uniform(-1.0, 1.0) * scale)
                .collect();
            let bias = if last {
                vec![1.0 / k as f64; fan_out]
            } else {
                vec![0.0; fan_out]
            };
            layers.push(Layer {
                weights: Matrix::new(fan_out, fan_in, data)?,
                bias,
                nonlinearity: if last { Nonlinearity::None } else { Nonlinearity::Relu },
            });
        }
        Self::from_layers(layers, head)
    }

    /// Assembles a model from explicit layers, validating shape conformance.
    pub fn from_layers(layers: Vec<Layer>, head: HeadActivation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidParameter("model needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::ShapeMismatch {
                    context: "adjacent layers",
                    left: (pair[0].output_dim(), 1),
                    right: (pair[1].input_dim(), 1),
                });
            }
        }
        for layer in &layers {
            if layer.bias.len() != layer.output_dim() {
                return Err(Error::ShapeMismatch {
                    context: "layer bias",
                    left: (layer.output_dim(), 1),
                    right: (layer.bias.len(), 1),
                });
            }
        }
        let k = layers.last().unwrap().output_dim();
        Ok(Self { layers, head, k })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    fn trace(&self, x: &[f64]) -> Result<ForwardTrace> {
        if x.len() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                context: "model input",
                left: (self.input_dim(), 1),
                right: (x.len(), 1),
            });
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        activations.push(x.to_vec());
        for layer in &self.layers {
            let mut pre = layer.weights.matvec(activations.last().unwrap())?;
            for (p, b) in pre.iter_mut().zip(&layer.bias) {
                *p += b;
            }
            let act = match layer.nonlinearity {
                Nonlinearity::Relu => pre.iter().map(|&v| v.max(0.0)).collect(),
                Nonlinearity::None => pre.clone(),
            };
            pre_activations.push(pre);
            activations.push(act);
        }
        Ok(ForwardTrace {
            pre_activations,
            activations,
        })
    }

    /// Deterministic forward pass to the latent vector and posterior.
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let trace = self.trace(x)?;
        let z = trace.latent().to_vec();
        let p = self.head.apply(&z);
        Ok((z, p))
    }

    pub fn posterior(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.1)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let (_, p) = self.forward(x)?;
        Ok(argmax(&p))
    }

    /// Gradient of the negative-log-posterior loss with respect to the input,
    /// by full backprop through the layers and the head Jacobian. `y` is the
    /// true label for untargeted attacks or the target class for targeted
    /// ones.
    pub fn input_gradient(&self, x: &[f64], y: usize) -> Result<Vec<f64>> {
        let (_, _, input_grad) = self.loss_and_grads(x, y)?;
        Ok(input_grad)
    }

    /// Loss, parameter gradients, and input gradient for one sample.
    pub fn loss_and_grads(&self, x: &[f64], y: usize) -> Result<(f64, ParamGrads, Vec<f64>)> {
        let trace = self.trace(x)?;
        let z = trace.latent();
        let p = self.head.apply(z);
        let loss = nll_loss(&p, y);
        let gz = nll_grad_z(self.head, z, y)?;
        let (grads, input_grad) = self.backprop(&trace, gz)?;
        Ok((loss, grads, input_grad))
    }

    /// Gradient of `z_i - z_j` with respect to the input: backprop of the
    /// seed vector `e_i - e_j` through the layers, skipping the head.
    pub fn latent_diff_input_gradient(&self, x: &[f64], i: usize, j: usize) -> Result<Vec<f64>> {
        assert!(i < self.k && j < self.k);
        let trace = self.trace(x)?;
        let mut seed = vec![0.0; self.k];
        seed[i] = 1.0;
        seed[j] -= 1.0;
        let (_, input_grad) = self.backprop(&trace, seed)?;
        Ok(input_grad)
    }

    /// Backpropagates `d loss / d output` through all layers. Returns
    /// per-layer parameter gradients and the input gradient.
    fn backprop(&self, trace: &ForwardTrace, grad_out: Vec<f64>) -> Result<(ParamGrads, Vec<f64>)> {
        let mut grads: Vec<LayerGrads> = Vec::with_capacity(self.layers.len());
        let mut g = grad_out;
        for (l, layer) in self.layers.iter().enumerate().rev() {
            // through the nonlinearity of this layer
            if layer.nonlinearity == Nonlinearity::Relu {
                for (gv, pre) in g.iter_mut().zip(&trace.pre_activations[l]) {
                    if *pre <= 0.0 {
                        *gv = 0.0;
                    }
                }
            }
            let input = &trace.activations[l];
            let mut w_grad = Matrix::zeros(layer.output_dim(), layer.input_dim());
            for (r, gv) in g.iter().enumerate() {
                if *gv == 0.0 {
                    continue;
                }
                for (c, iv) in input.iter().enumerate() {
                    w_grad.set(r, c, gv * iv);
                }
            }
            let b_grad = g.clone();
            let next = layer.weights.transpose_matvec(&g)?;
            grads.push(LayerGrads {
                weights: w_grad,
                bias: b_grad,
            });
            g = next;
        }
        grads.reverse();
        Ok((ParamGrads { layers: grads }, g))
    }
}

struct ForwardTrace {
    pre_activations: Vec<Vec<f64>>,
    activations: Vec<Vec<f64>>,
}

impl ForwardTrace {
    fn latent(&self) -> &[f64] {
        self.activations.last().unwrap()
    }
}

pub fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap()
}

#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ParamGrads {
    pub layers: Vec<LayerGrads>,
}

impl ParamGrads {
    fn zeros_like(model: &NeuralModel) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| LayerGrads {
                    weights: Matrix::zeros(l.output_dim(), l.input_dim()),
                    bias: vec![0.0; l.output_dim()],
                })
                .collect(),
        }
    }

    fn accumulate(&mut self, other: &ParamGrads) -> Result<()> {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.axpy_in_place(1.0, &b.weights)?;
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += y;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Drives the per-epoch shuffle; identical (data, config, model) inputs
    /// reproduce bit-identical trained parameters.
    pub seed: u64,
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidParameter(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        Ok(())
    }
}

/// A completed training run: the trained model plus per-epoch traces.
#[derive(Debug, Clone)]
pub struct TrainRun {
    pub model: NeuralModel,
    /// Mean loss per epoch.
    pub epoch_losses: Vec<f64>,
    /// Frobenius norm of the final layer's weights, recorded after each epoch.
    pub final_layer_norms: Vec<f64>,
}

impl TrainRun {
    /// Per-epoch final-layer weight norm trace.
    pub fn weight_norm_trace(&self) -> &[f64] {
        &self.final_layer_norms
    }
}

/// Mini-batch SGD with momentum. Deterministic given the config seed; errors
/// with the offending epoch if the loss goes non-finite.
pub fn train(mut model: NeuralModel, data: &Dataset, cfg: &TrainConfig) -> Result<TrainRun> {
    cfg.validate()?;
    if let Some(&bad) = data.labels.iter().find(|&&l| l >= model.k) {
        return Err(Error::InvalidParameter(format!(
            "label {bad} out of range for {} classes",
            model.k
        )));
    }
    let mut rng = RngState::from_seed(cfg.seed);
    let mut velocity = ParamGrads::zeros_like(&model);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut final_layer_norms = Vec::with_capacity(cfg.epochs);
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut batch_grads = ParamGrads::zeros_like(&model);
            for &i in batch {
                let (x, y) = data.sample(i);
                match model.loss_and_grads(x, y) {
                    Ok((loss, grads, _)) => {
                        loss_sum += loss;
                        batch_grads.accumulate(&grads)?;
                    }
                    // A latent vector this close to a class anchor means the
                    // sample is fitted to machine precision; the softRmax
                    // Jacobian diverges there, so the sample contributes its
                    // (near-zero or saturated) loss but no gradient.
                    Err(Error::NearSingular { .. }) => {
                        let (_, p) = model.forward(x)?;
                        loss_sum += nll_loss(&p, y);
                    }
                    Err(e) => return Err(e),
                }
            }
            let scale = -cfg.learning_rate / batch.len() as f64;
            for ((layer, vel), grad) in model
                .layers
                .iter_mut()
                .zip(&mut velocity.layers)
                .zip(&batch_grads.layers)
            {
                vel.weights.scale_in_place(cfg.momentum);
                vel.weights.axpy_in_place(scale, &grad.weights)?;
                layer.weights.axpy_in_place(1.0, &vel.weights)?;
                for ((v, g), b) in vel.bias.iter_mut().zip(&grad.bias).zip(&mut layer.bias) {
                    *v = cfg.momentum * *v + scale * g;
                    *b += *v;
                }
            }
        }
        let mean_loss = loss_sum / n as f64;
        if !mean_loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        epoch_losses.push(mean_loss);
        final_layer_norms.push(model.layers.last().unwrap().weights.frobenius_norm());
    }

    Ok(TrainRun {
        model,
        epoch_losses,
        final_layer_norms,
    })
}

/// Fraction of correctly classified samples.
pub fn accuracy(model: &NeuralModel, data: &Dataset) -> Result<f64> {
    let mut correct = 0usize;
    for i in 0..data.len() {
        let (x, y) = data.sample(i);
        if model.predict(x)? == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Minimum geometric distance from any training point to the model's
/// decision boundary, measured by binary search along the segment to the
/// nearest point with a different predicted class. There is no closed form
/// for nonlinear nets, so the same along-segment protocol is applied to every
/// model under comparison.
pub fn minimum_geometric_margin(model: &NeuralModel, data: &Dataset) -> Result<f64> {
    let n = data.len();
    let preds: Vec<usize> = (0..n)
        .map(|i| model.predict(data.sample(i).0))
        .collect::<Result<_>>()?;
    let mut best = f64::INFINITY;
    for i in 0..n {
        let (xi, _) = data.sample(i);
        // nearest point predicted differently
        let mut nearest: Option<(usize, f64)> = None;
        for j in 0..n {
            if preds[j] == preds[i] {
                continue;
            }
            let (xj, _) = data.sample(j);
            let d2: f64 = xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum();
            if nearest.map_or(true, |(_, cur)| d2 < cur) {
                nearest = Some((j, d2));
            }
        }
        let Some((j, d2)) = nearest else { continue };
        let (xj, _) = data.sample(j);
        // bisection for the prediction change along the segment
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let probe: Vec<f64> = xi
                .iter()
                .zip(xj)
                .map(|(a, b)| a + mid * (b - a))
                .collect();
            if model.predict(&probe)? == preds[i] {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        best = best.min(hi * d2.sqrt());
    }
    Ok(best)
}
