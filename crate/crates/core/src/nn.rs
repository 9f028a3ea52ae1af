//! Dense multilayer perceptrons with analytic gradients.
//!
//! This is the substrate for the encoder, the generator, and the classifier
//! heads: plain fully-connected layers, three losses (cross-entropy on a
//! softmax output, L1, L2), classical SGD with momentum, and a
//! finite-difference gradient checker that instantiates the same code at
//! `f64`. Parameter containers are immutable during inference; training
//! mutates a single owner, and every reduction runs in a fixed order so
//! identical seeds give bit-identical trajectories.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

// needed for float math in no_std builds; tests compile with std
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::error::{CoreError, Result};
use crate::linalg::{add_row_broadcast, column_sums, gemm_accumulate, Matrix};
use crate::numeric::{real, Real};
use crate::rng;

/// Per-layer nonlinearity. `SoftmaxOutput` is only valid on the last layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
    SoftmaxOutput,
    Sigmoid,
}

impl Activation {
    pub fn tag_byte(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Identity => 1,
            Activation::SoftmaxOutput => 2,
            Activation::Sigmoid => 3,
        }
    }

    pub fn from_tag_byte(b: u8) -> Result<Self> {
        Ok(match b {
            0 => Activation::Relu,
            1 => Activation::Identity,
            2 => Activation::SoftmaxOutput,
            3 => Activation::Sigmoid,
            other => {
                return Err(CoreError::Format(format!("unknown activation tag {other}")));
            }
        })
    }
}

/// One dense layer: `rows x cols` weights, `rows` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<F> {
    pub weights: Matrix<F>,
    pub bias: Vec<F>,
    pub activation: Activation,
}

impl<F: Real> Layer<F> {
    pub fn output_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }
}

/// An ordered stack of dense layers with chained dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams<F> {
    layers: Vec<Layer<F>>,
}

impl<F: Real> DenseParams<F> {
    pub fn new(layers: Vec<Layer<F>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(CoreError::Config("network needs at least one layer".into()));
        }
        for w in layers.windows(2) {
            if w[1].input_dim() != w[0].output_dim() {
                return Err(CoreError::Shape(format!(
                    "layer dimensions do not chain: {} -> {}",
                    w[0].output_dim(),
                    w[1].input_dim()
                )));
            }
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.output_dim() {
                return Err(CoreError::Shape(format!(
                    "layer {i}: bias len {} vs {} rows",
                    l.bias.len(),
                    l.output_dim()
                )));
            }
            if l.activation == Activation::SoftmaxOutput && i + 1 != layers.len() {
                return Err(CoreError::Config(
                    "softmax-output is only valid on the last layer".into(),
                ));
            }
        }
        Ok(DenseParams { layers })
    }

    /// Seeded Glorot-uniform initialization: weights in
    /// `±sqrt(6 / (fan_in + fan_out))`, biases zero.
    pub fn seeded(dims: &[usize], activations: &[Activation], seed: u64) -> Result<Self> {
        if dims.len() < 2 || activations.len() != dims.len() - 1 {
            return Err(CoreError::Config(format!(
                "{} dims need {} activations, got {}",
                dims.len(),
                dims.len().saturating_sub(1),
                activations.len()
            )));
        }
        let mut layers = Vec::with_capacity(activations.len());
        for (i, &act) in activations.iter().enumerate() {
            let (fan_in, fan_out) = (dims[i], dims[i + 1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let mut r = rng::stream(seed, &[0x1417, i as u64]);
            let data: Vec<F> = (0..fan_in * fan_out)
                .map(|_| real::<F>(r.random_range(-bound..bound)))
                .collect();
            layers.push(Layer {
                weights: Matrix::from_vec(fan_out, fan_in, data)?,
                bias: vec![F::zero(); fan_out],
                activation: act,
            });
        }
        DenseParams::new(layers)
    }

    pub fn layers(&self) -> &[Layer<F>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<F>] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().output_dim()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.rows() * l.weights.cols() + l.bias.len())
            .sum()
    }

    pub fn to_f64_lossy(&self) -> DenseParams<f64> {
        DenseParams {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    weights: l.weights.to_f64_lossy(),
                    bias: l.bias.iter().map(|b| b.to_f64_lossy()).collect(),
                    activation: l.activation,
                })
                .collect(),
        }
    }

    /// Single-sample forward pass.
    pub fn forward(&self, input: &[F]) -> Result<Vec<F>> {
        if input.len() != self.input_dim() {
            return Err(CoreError::Shape(format!(
                "input len {} vs expected {}",
                input.len(),
                self.input_dim()
            )));
        }
        let mut cur = input.to_vec();
        for layer in &self.layers {
            let mut next = Vec::with_capacity(layer.output_dim());
            for row in 0..layer.output_dim() {
                next.push(layer.bias[row] + crate::linalg::dot(layer.weights.row(row), &cur));
            }
            apply_activation(layer.activation, &mut next);
            cur = next;
        }
        Ok(cur)
    }

    /// Batched forward pass; rows of `x` are samples.
    pub fn forward_batch(&self, x: &Matrix<F>) -> Result<Matrix<F>> {
        Ok(self.forward_batch_cached(x)?.output_owned())
    }

    /// Batched forward keeping post-activation values of every layer for
    /// a later backward pass.
    pub fn forward_batch_cached(&self, x: &Matrix<F>) -> Result<ForwardCache<F>> {
        if x.cols() != self.input_dim() {
            return Err(CoreError::Shape(format!(
                "batch width {} vs expected {}",
                x.cols(),
                self.input_dim()
            )));
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.clone());
        for layer in &self.layers {
            let wt = layer.weights.transposed();
            let mut y = activations.last().unwrap().matmul(&wt)?;
            add_row_broadcast(&mut y, &layer.bias)?;
            for row in 0..y.rows() {
                apply_activation(layer.activation, y.row_mut(row));
            }
            activations.push(y);
        }
        Ok(ForwardCache { activations })
    }

    /// Mean-batch loss and its exact analytic gradient.
    pub fn loss_and_grad(&self, batch: &[Sample<F>], kind: LossKind) -> Result<GradBundle<F>> {
        let (bundle, _dx) = self.loss_and_grad_with_input_grad(batch, kind, false)?;
        Ok(bundle)
    }

    /// Loss-only evaluation (used by the finite-difference oracle).
    pub fn loss_batch(&self, batch: &[Sample<F>], kind: LossKind) -> Result<F> {
        let x = batch_inputs(batch)?;
        let cache = self.forward_batch_cached(&x)?;
        let (loss, _) = self.loss_delta(cache.output(), batch, kind)?;
        Ok(loss)
    }

    pub(crate) fn loss_and_grad_with_input_grad(
        &self,
        batch: &[Sample<F>],
        kind: LossKind,
        want_input_grad: bool,
    ) -> Result<(GradBundle<F>, Option<Matrix<F>>)> {
        let x = batch_inputs(batch)?;
        let cache = self.forward_batch_cached(&x)?;
        let (loss, delta) = self.loss_delta(cache.output(), batch, kind)?;
        let mut grads = GradBundle::zeros_like(self, loss);
        let dx = self.backward_batch(&cache, delta, &mut grads, want_input_grad)?;
        Ok((grads, dx))
    }

    /// Backpropagates `delta` through the cached forward pass, accumulating
    /// parameter gradients into `grads` and optionally returning the
    /// gradient with respect to the input batch.
    ///
    /// `delta` must be the derivative of the scalar objective with respect
    /// to the last layer's pre-activation when that layer is
    /// `SoftmaxOutput`, and with respect to its post-activation otherwise
    /// (`loss_delta` produces exactly this convention).
    pub(crate) fn backward_batch(
        &self,
        cache: &ForwardCache<F>,
        delta: LossDelta<F>,
        grads: &mut GradBundle<F>,
        want_input_grad: bool,
    ) -> Result<Option<Matrix<F>>> {
        if grads.layers.len() != self.layers.len() {
            return Err(CoreError::Shape("gradient bundle shape mismatch".into()));
        }
        let mut d_post_or_pre = delta;
        let mut d_input = None;
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let post = &cache.activations[idx + 1];
            let d_pre = match d_post_or_pre {
                LossDelta::PreActivation(m) => m,
                LossDelta::PostActivation(m) => activation_backward(layer.activation, post, m)?,
            };
            // dW += dPre^T * X_prev, db += column sums of dPre
            let d_pre_t = d_pre.transposed();
            gemm_accumulate(
                &mut grads.layers[idx].weights,
                &d_pre_t,
                &cache.activations[idx],
            )?;
            for (b, s) in grads.layers[idx].bias.iter_mut().zip(column_sums(&d_pre)) {
                *b = *b + s;
            }
            if idx == 0 && !want_input_grad {
                break;
            }
            let dx = d_pre.matmul(&layer.weights)?;
            if idx == 0 {
                d_input = Some(dx);
                break;
            }
            d_post_or_pre = LossDelta::PostActivation(dx);
        }
        Ok(d_input)
    }

    /// Loss value plus the backward seed for the last layer.
    fn loss_delta(
        &self,
        output: &Matrix<F>,
        batch: &[Sample<F>],
        kind: LossKind,
    ) -> Result<(F, LossDelta<F>)> {
        let b = batch.len();
        if b == 0 {
            return Err(CoreError::Domain("empty batch".into()));
        }
        let inv_b = F::one() / real::<F>(b as f64);
        let c = output.cols();
        let mut loss = F::zero();
        match kind {
            LossKind::CrossEntropy => {
                if self.layers.last().unwrap().activation != Activation::SoftmaxOutput {
                    return Err(CoreError::Config(
                        "cross-entropy requires a softmax-output last layer".into(),
                    ));
                }
                let mut delta = Matrix::zeros(b, c);
                for (i, (_, target)) in batch.iter().enumerate() {
                    let class = match target {
                        Target::Class(k) => *k,
                        Target::Vector(_) => {
                            return Err(CoreError::Domain(
                                "cross-entropy needs class targets".into(),
                            ));
                        }
                    };
                    if class >= c {
                        return Err(CoreError::Domain(format!(
                            "class index {class} out of range for {c} outputs"
                        )));
                    }
                    let p = output.row(i);
                    let eps = real::<F>(1e-30);
                    loss = loss - (p[class].max(eps)).ln();
                    let drow = delta.row_mut(i);
                    for (j, &pj) in p.iter().enumerate() {
                        let y = if j == class { F::one() } else { F::zero() };
                        drow[j] = (pj - y) * inv_b;
                    }
                }
                Ok((loss * inv_b, LossDelta::PreActivation(delta)))
            }
            LossKind::L1 | LossKind::L2 => {
                let mut delta = Matrix::zeros(b, c);
                for (i, (_, target)) in batch.iter().enumerate() {
                    let t = match target {
                        Target::Vector(v) => v,
                        Target::Class(_) => {
                            return Err(CoreError::Domain(
                                "l1/l2 losses need vector targets".into(),
                            ));
                        }
                    };
                    if t.len() != c {
                        return Err(CoreError::Shape(format!(
                            "target len {} vs output {c}",
                            t.len()
                        )));
                    }
                    let o = output.row(i);
                    let drow = delta.row_mut(i);
                    for j in 0..c {
                        let r = o[j] - t[j];
                        match kind {
                            LossKind::L1 => {
                                loss = loss + r.abs();
                                let s = if r > F::zero() {
                                    F::one()
                                } else if r < F::zero() {
                                    -F::one()
                                } else {
                                    F::zero()
                                };
                                drow[j] = s * inv_b;
                            }
                            LossKind::L2 => {
                                loss = loss + r * r;
                                drow[j] = (r + r) * inv_b;
                            }
                            LossKind::CrossEntropy => unreachable!(),
                        }
                    }
                }
                Ok((loss * inv_b, LossDelta::PostActivation(delta)))
            }
        }
    }
}

/// Post-activation values of every layer; index 0 is the input batch.
pub struct ForwardCache<F> {
    pub(crate) activations: Vec<Matrix<F>>,
}

impl<F: Real> ForwardCache<F> {
    pub fn output(&self) -> &Matrix<F> {
        self.activations.last().unwrap()
    }

    pub fn output_owned(mut self) -> Matrix<F> {
        self.activations.pop().unwrap()
    }
}

pub(crate) enum LossDelta<F> {
    /// Derivative w.r.t. the last layer pre-activation (softmax fused).
    PreActivation(Matrix<F>),
    /// Derivative w.r.t. a layer's post-activation.
    PostActivation(Matrix<F>),
}

fn apply_activation<F: Real>(act: Activation, values: &mut [F]) {
    match act {
        Activation::Identity => {}
        Activation::Relu => {
            for v in values.iter_mut() {
                if *v < F::zero() {
                    *v = F::zero();
                }
            }
        }
        Activation::Sigmoid => {
            for v in values.iter_mut() {
                *v = F::one() / (F::one() + (-*v).exp());
            }
        }
        Activation::SoftmaxOutput => {
            let mut max = values[0];
            for &v in values.iter() {
                if v > max {
                    max = v;
                }
            }
            let mut sum = F::zero();
            for v in values.iter_mut() {
                *v = (*v - max).exp();
                sum = sum + *v;
            }
            for v in values.iter_mut() {
                *v = *v / sum;
            }
        }
    }
}

/// Converts a post-activation gradient to a pre-activation gradient using
/// only the cached post-activation values.
fn activation_backward<F: Real>(
    act: Activation,
    post: &Matrix<F>,
    mut d_post: Matrix<F>,
) -> Result<Matrix<F>> {
    match act {
        Activation::Identity => Ok(d_post),
        Activation::Relu => {
            for (d, &p) in d_post.as_mut_slice().iter_mut().zip(post.iter()) {
                if p <= F::zero() {
                    *d = F::zero();
                }
            }
            Ok(d_post)
        }
        Activation::Sigmoid => {
            for (d, &p) in d_post.as_mut_slice().iter_mut().zip(post.iter()) {
                *d = *d * p * (F::one() - p);
            }
            Ok(d_post)
        }
        Activation::SoftmaxOutput => {
            // Full softmax Jacobian: dPre = p .* (dPost - <dPost, p>).
            let mut out = Matrix::zeros(d_post.rows(), d_post.cols());
            for r in 0..d_post.rows() {
                let p = post.row(r);
                let g = d_post.row(r);
                let inner: F = p.iter().zip(g).map(|(&pi, &gi)| pi * gi).sum();
                let o = out.row_mut(r);
                for j in 0..p.len() {
                    o[j] = p[j] * (g[j] - inner);
                }
            }
            Ok(out)
        }
    }
}

/// Training targets: a class index for cross-entropy, a vector for L1/L2.
#[derive(Debug, Clone, PartialEq)]
pub enum Target<F> {
    Class(usize),
    Vector(Vec<F>),
}

pub type Sample<F> = (Vec<F>, Target<F>);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    CrossEntropy,
    L1,
    L2,
}

/// Per-parameter gradients shaped exactly like their `DenseParams`.
#[derive(Debug, Clone)]
pub struct GradBundle<F> {
    pub layers: Vec<LayerGrad<F>>,
    pub loss: F,
}

#[derive(Debug, Clone)]
pub struct LayerGrad<F> {
    pub weights: Matrix<F>,
    pub bias: Vec<F>,
}

impl<F: Real> GradBundle<F> {
    pub fn zeros_like(params: &DenseParams<F>, loss: F) -> Self {
        GradBundle {
            layers: params
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weights: Matrix::zeros(l.weights.rows(), l.weights.cols()),
                    bias: vec![F::zero(); l.bias.len()],
                })
                .collect(),
            loss,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.loss.is_finite()
            && self
                .layers
                .iter()
                .all(|l| l.weights.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }

    /// `self += other` (used when an objective has several terms).
    pub fn accumulate(&mut self, other: &GradBundle<F>) -> Result<()> {
        if self.layers.len() != other.layers.len() {
            return Err(CoreError::Shape("gradient bundles differ in depth".into()));
        }
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            if a.weights.rows() != b.weights.rows() || a.weights.cols() != b.weights.cols() {
                return Err(CoreError::Shape("gradient bundles differ in shape".into()));
            }
            for (x, &y) in a
                .weights
                .as_mut_slice()
                .iter_mut()
                .zip(b.weights.as_slice())
            {
                *x = *x + y;
            }
            for (x, &y) in a.bias.iter_mut().zip(&b.bias) {
                *x = *x + y;
            }
        }
        self.loss = self.loss + other.loss;
        Ok(())
    }
}

/// SGD-with-momentum state. Momentum 0 gives plain SGD.
#[derive(Debug, Clone)]
pub struct OptimState<F> {
    pub learning_rate: F,
    pub momentum: F,
    velocity: Vec<LayerGrad<F>>,
    step: u64,
}

impl<F: Real> OptimState<F> {
    pub fn new(learning_rate: F, momentum: F, params: &DenseParams<F>) -> Result<Self> {
        if learning_rate <= F::zero() {
            return Err(CoreError::Config("learning rate must be positive".into()));
        }
        Ok(OptimState {
            learning_rate,
            momentum,
            velocity: GradBundle::zeros_like(params, F::zero()).layers,
            step: 0,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One `v = m*v + g; w -= lr*v` update. Rejects non-finite gradients and
/// guarantees finite parameters afterwards.
pub fn optimizer_step<F: Real>(
    params: &mut DenseParams<F>,
    grads: &GradBundle<F>,
    state: &mut OptimState<F>,
) -> Result<()> {
    if grads.layers.len() != params.layers.len() || state.velocity.len() != params.layers.len() {
        return Err(CoreError::Shape("optimizer shape mismatch".into()));
    }
    if !grads.is_finite() {
        return Err(CoreError::Numeric(
            "non-finite gradient entries in optimizer step".into(),
        ));
    }
    let lr = state.learning_rate;
    let m = state.momentum;
    for ((layer, grad), vel) in params
        .layers
        .iter_mut()
        .zip(&grads.layers)
        .zip(&mut state.velocity)
    {
        for ((w, &g), v) in layer
            .weights
            .as_mut_slice()
            .iter_mut()
            .zip(grad.weights.as_slice())
            .zip(vel.weights.as_mut_slice())
        {
            *v = m * *v + g;
            *w = *w - lr * *v;
        }
        for ((w, &g), v) in layer.bias.iter_mut().zip(&grad.bias).zip(&mut vel.bias) {
            *v = m * *v + g;
            *w = *w - lr * *v;
        }
    }
    state.step += 1;
    if !params.is_finite() {
        return Err(CoreError::Numeric(
            "parameters became non-finite after optimizer step".into(),
        ));
    }
    Ok(())
}

/// Central-difference gradient verification.
///
/// Runs on `f64` parameters (convert trained `f32` nets with
/// [`DenseParams::to_f64_lossy`]). Samples up to 256 coordinates
/// deterministically, skips coordinates whose perturbation crosses a ReLU
/// kink, and returns `max |analytic - numeric| / max(1, |analytic|)`.
pub fn grad_check(
    params: &DenseParams<f64>,
    batch: &[Sample<f64>],
    kind: LossKind,
    epsilon: f64,
) -> Result<f64> {
    if !(1e-7..=1e-2).contains(&epsilon) {
        return Err(CoreError::Config(format!(
            "epsilon {epsilon} outside [1e-7, 1e-2]"
        )));
    }
    let analytic = params.loss_and_grad(batch, kind)?;
    let mut coords: Vec<(usize, bool, usize)> = Vec::new();
    for (li, l) in params.layers.iter().enumerate() {
        for wi in 0..l.weights.rows() * l.weights.cols() {
            coords.push((li, false, wi));
        }
        for bi in 0..l.bias.len() {
            coords.push((li, true, bi));
        }
    }
    const BUDGET: usize = 256;
    if coords.len() > BUDGET {
        let mut r = rng::stream(0x9dc4, &[params.parameter_count() as u64, batch.len() as u64]);
        for i in 0..BUDGET {
            let j = i + r.random_range(0..coords.len() - i);
            coords.swap(i, j);
        }
        coords.truncate(BUDGET);
    }

    let x = batch_inputs(batch)?;
    let mut max_err = 0.0f64;
    for (li, is_bias, idx) in coords {
        let mut perturbed = params.clone();
        set_coord(&mut perturbed, li, is_bias, idx, epsilon, true);
        let cache_plus = perturbed.forward_batch_cached(&x)?;
        let (loss_plus, _) = perturbed.loss_delta(cache_plus.output(), batch, kind)?;
        set_coord(&mut perturbed, li, is_bias, idx, epsilon, false);
        set_coord(&mut perturbed, li, is_bias, idx, epsilon, false);
        let cache_minus = perturbed.forward_batch_cached(&x)?;
        let (loss_minus, _) = perturbed.loss_delta(cache_minus.output(), batch, kind)?;
        if relu_mask_changed(params, &cache_plus, &cache_minus) {
            continue;
        }
        let numeric = (loss_plus - loss_minus) / (2.0 * epsilon);
        let a = if is_bias {
            analytic.layers[li].bias[idx]
        } else {
            analytic.layers[li].weights.as_slice()[idx]
        };
        let err = (a - numeric).abs() / a.abs().max(1.0);
        if err > max_err {
            max_err = err;
        }
    }
    Ok(max_err)
}

fn set_coord(
    params: &mut DenseParams<f64>,
    layer: usize,
    is_bias: bool,
    idx: usize,
    epsilon: f64,
    add: bool,
) {
    let delta = if add { epsilon } else { -epsilon };
    if is_bias {
        params.layers[layer].bias[idx] += delta;
    } else {
        params.layers[layer].weights.as_mut_slice()[idx] += delta;
    }
}

/// True when any ReLU unit switched on/off between the two perturbed
/// passes; such coordinates sit on a subgradient kink and are excluded.
fn relu_mask_changed(
    params: &DenseParams<f64>,
    plus: &ForwardCache<f64>,
    minus: &ForwardCache<f64>,
) -> bool {
    for (li, layer) in params.layers.iter().enumerate() {
        if layer.activation != Activation::Relu {
            continue;
        }
        let a = &plus.activations[li + 1];
        let b = &minus.activations[li + 1];
        for (&pa, &pb) in a.iter().zip(b.iter()) {
            if (pa > 0.0) != (pb > 0.0) {
                return true;
            }
        }
    }
    false
}

fn batch_inputs<F: Real>(batch: &[Sample<F>]) -> Result<Matrix<F>> {
    if batch.is_empty() {
        return Err(CoreError::Domain("empty batch".into()));
    }
    let rows: Vec<&[F]> = batch.iter().map(|(x, _)| x.as_slice()).collect();
    Matrix::from_rows(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_layer(n: usize, act: Activation) -> Layer<f32> {
        let mut w = Matrix::zeros(n, n);
        for i in 0..n {
            w.set(i, i, 1.0);
        }
        Layer {
            weights: w,
            bias: vec![0.0; n],
            activation: act,
        }
    }

    #[test]
    fn forward_identity_layer() {
        let p = DenseParams::new(vec![identity_layer(3, Activation::Identity)]).unwrap();
        assert_eq!(p.forward(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn forward_relu_clamps_negatives() {
        let p = DenseParams::new(vec![identity_layer(2, Activation::Relu)]).unwrap();
        assert_eq!(p.forward(&[-1.0, 2.0]).unwrap(), vec![0.0, 2.0]);
    }

    #[test]
    fn forward_dimension_mismatch() {
        let p = DenseParams::new(vec![identity_layer(2, Activation::Identity)]).unwrap();
        assert!(matches!(p.forward(&[1.0]), Err(CoreError::Shape(_))));
    }

    #[test]
    fn softmax_sums_to_one_and_positive() {
        let p = DenseParams::new(vec![identity_layer(4, Activation::SoftmaxOutput)]).unwrap();
        let out = p.forward(&[0.3, -2.0, 5.0, 0.0]).unwrap();
        let sum: f32 = out.iter().sum();
        assert!((sum - 1.0).abs() < 1e-6);
        assert!(out.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn cross_entropy_symmetric_two_class() {
        let p = DenseParams::new(vec![identity_layer(2, Activation::SoftmaxOutput)]).unwrap();
        let batch = vec![(vec![0.0f32, 0.0], Target::Class(0))];
        let g = p.loss_and_grad(&batch, LossKind::CrossEntropy).unwrap();
        assert!((g.loss - core::f32::consts::LN_2).abs() < 1e-6);
        // d loss / d logits via the identity weights: (-0.5, +0.5)
        assert!((g.layers[0].bias[0] + 0.5).abs() < 1e-6);
        assert!((g.layers[0].bias[1] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn l2_zero_residual_zero_grads() {
        let p = DenseParams::new(vec![identity_layer(2, Activation::Identity)]).unwrap();
        let batch = vec![(vec![1.0f32, -2.0], Target::Vector(vec![1.0, -2.0]))];
        let g = p.loss_and_grad(&batch, LossKind::L2).unwrap();
        assert_eq!(g.loss, 0.0);
        assert!(g.layers[0].weights.iter().all(|&w| w == 0.0));
        assert!(g.layers[0].bias.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn invalid_class_index_rejected() {
        let p = DenseParams::new(vec![identity_layer(2, Activation::SoftmaxOutput)]).unwrap();
        let batch = vec![(vec![0.0f32, 0.0], Target::Class(5))];
        assert!(matches!(
            p.loss_and_grad(&batch, LossKind::CrossEntropy),
            Err(CoreError::Domain(_))
        ));
    }

    #[test]
    fn sgd_single_step_matches_hand_arithmetic() {
        // plain SGD, lr=0.1, scalar param 1.0, grad 2.0 -> 0.8
        let mut p = DenseParams::new(vec![Layer {
            weights: Matrix::from_vec(1, 1, vec![1.0f32]).unwrap(),
            bias: vec![0.0],
            activation: Activation::Identity,
        }])
        .unwrap();
        let mut st = OptimState::new(0.1, 0.0, &p).unwrap();
        let mut g = GradBundle::zeros_like(&p, 0.0);
        g.layers[0].weights.set(0, 0, 2.0);
        optimizer_step(&mut p, &g, &mut st).unwrap();
        assert!((p.layers()[0].weights.get(0, 0) - 0.8).abs() < 1e-7);
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn zero_gradients_leave_params_unchanged() {
        let mut p = DenseParams::<f32>::seeded(
            &[3, 2],
            &[Activation::Identity],
            9,
        )
        .unwrap();
        let before = p.clone();
        let mut st = OptimState::new(0.5, 0.9, &p).unwrap();
        let g = GradBundle::zeros_like(&p, 0.0);
        optimizer_step(&mut p, &g, &mut st).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn non_finite_gradients_rejected() {
        let mut p = DenseParams::<f32>::seeded(&[2, 2], &[Activation::Identity], 1).unwrap();
        let mut st = OptimState::new(0.1, 0.0, &p).unwrap();
        let mut g = GradBundle::zeros_like(&p, 0.0);
        g.layers[0].weights.set(0, 0, f32::NAN);
        assert!(matches!(
            optimizer_step(&mut p, &g, &mut st),
            Err(CoreError::Numeric(_))
        ));
    }

    #[test]
    fn quadratic_contracts_to_minimum() {
        // 200 SGD steps on (w-3)^2 from w=0, lr=0.1 -> |w-3| < 1e-3.
        // Realized as a 1x1 identity net with input 1.0 and L2 target 3.0.
        let mut p = DenseParams::new(vec![Layer {
            weights: Matrix::from_vec(1, 1, vec![0.0f64]).unwrap(),
            bias: vec![0.0],
            activation: Activation::Identity,
        }])
        .unwrap();
        let mut st = OptimState::new(0.1, 0.0, &p).unwrap();
        let batch = vec![(vec![1.0f64], Target::Vector(vec![3.0]))];
        for _ in 0..200 {
            // freeze the bias so the problem stays one-dimensional
            let mut g = p.loss_and_grad(&batch, LossKind::L2).unwrap();
            g.layers[0].bias[0] = 0.0;
            optimizer_step(&mut p, &g, &mut st).unwrap();
        }
        assert!((p.layers()[0].weights.get(0, 0) - 3.0).abs() < 1e-3);
        assert_eq!(st.step_count(), 200);
    }

    #[test]
    fn convex_full_batch_loss_is_non_increasing() {
        let mut p = DenseParams::<f32>::seeded(&[4, 3], &[Activation::Identity], 3).unwrap();
        let mut st = OptimState::new(0.02, 0.0, &p).unwrap();
        let mut r = rng::stream(5, &[0]);
        let batch: Vec<Sample<f32>> = (0..16)
            .map(|_| {
                let x: Vec<f32> = (0..4).map(|_| r.random_range(-1.0..1.0)).collect();
                let t: Vec<f32> = (0..3).map(|_| r.random_range(-1.0..1.0)).collect();
                (x, Target::Vector(t))
            })
            .collect();
        let mut last = f32::INFINITY;
        for _ in 0..50 {
            let g = p.loss_and_grad(&batch, LossKind::L2).unwrap();
            assert!(g.loss <= last + 1e-6, "loss increased: {last} -> {}", g.loss);
            last = g.loss;
            optimizer_step(&mut p, &g, &mut st).unwrap();
        }
    }

    #[test]
    fn softmax_only_allowed_last() {
        let err = DenseParams::<f32>::seeded(
            &[2, 2, 2],
            &[Activation::SoftmaxOutput, Activation::Identity],
            1,
        );
        assert!(matches!(err, Err(CoreError::Config(_))));
    }
}
