//! ReLU fully-connected network engine.
//!
//! An `(H+2)`-layer FCN is `f(x) = W_H σ(W_{H-1} … σ(W_0 x + b_0) … + b_{H-1}) + b_H`
//! with `σ` the ReLU. The H activation layers sit after weights `0..H-1`;
//! setting `first_layer_relu = false` omits the activation after `W_0`
//! (exclusivity reduction), which forces every sample to share the full
//! first-layer activation pattern.
//!
//! All gradients are closed-form: the backprop vector entering weight `i` is
//! `D_{i+1} W_{i+1}ᵀ … D_H W_Hᵀ ḡ`, with `ḡ` the cross-entropy loss vector.

pub mod io;

use crate::linalg::DenseMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("batch is empty")]
    EmptyBatch,
    #[error("first activation layer already removed")]
    AlreadyLinear,
}

/// Weights and biases of an FCN, with the layer dimension chain
/// `d_0, d_1, …, d_{H+1} = K`.
#[derive(Debug, Clone)]
pub struct FcnParams {
    dims: Vec<usize>,
    weights: Vec<DenseMatrix>,
    biases: Vec<Vec<f64>>,
    first_layer_relu: bool,
}

impl FcnParams {
    pub fn new(
        weights: Vec<DenseMatrix>,
        biases: Vec<Vec<f64>>,
        first_layer_relu: bool,
    ) -> Result<Self, ModelError> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(ModelError::ShapeMismatch(format!(
                "{} weight matrices vs {} bias vectors",
                weights.len(),
                biases.len()
            )));
        }
        let mut dims = vec![weights[0].cols()];
        for (i, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.cols() != dims[i] {
                return Err(ModelError::ShapeMismatch(format!(
                    "weight {i} has {} columns, expected {}",
                    w.cols(),
                    dims[i]
                )));
            }
            if b.len() != w.rows() {
                return Err(ModelError::ShapeMismatch(format!(
                    "bias {i} has length {}, expected {}",
                    b.len(),
                    w.rows()
                )));
            }
            dims.push(w.rows());
        }
        for (i, w) in weights.iter().enumerate() {
            w.check_finite().map_err(|e| {
                ModelError::ShapeMismatch(format!("weight {i} not finite: {e}"))
            })?;
        }
        Ok(Self { dims, weights, biases, first_layer_relu })
    }

    /// Random parameters: weights i.i.d. Gaussian with std `1/sqrt(fan_in)`,
    /// biases i.i.d. Gaussian with mean −0.25 and std 0.15. The slight
    /// negative bias shift spreads per-neuron activation rates so that random
    /// batches exhibit per-sample exclusive activations across batch sizes up
    /// to the widths used here.
    pub fn random(dims: &[usize], first_layer_relu: bool, seed: u64) -> Self {
        assert!(dims.len() >= 2, "need at least input and output dims");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bias_dist = Normal::new(-0.25, 0.15).unwrap();
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for i in 0..dims.len() - 1 {
            let (fan_in, fan_out) = (dims[i], dims[i + 1]);
            let w_dist = Normal::new(0.0, 1.0 / (fan_in as f64).sqrt()).unwrap();
            weights.push(DenseMatrix::from_fn(fan_out, fan_in, |_, _| w_dist.sample(&mut rng)));
            biases.push((0..fan_out).map(|_| bias_dist.sample(&mut rng)).collect());
        }
        Self::new(weights, biases, first_layer_relu).expect("generated shapes chain")
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.dims.last().unwrap()
    }

    /// Number of activation layers (= weight layers − 1).
    pub fn h(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn first_layer_relu(&self) -> bool {
        self.first_layer_relu
    }

    pub fn weight(&self, i: usize) -> &DenseMatrix {
        &self.weights[i]
    }

    pub fn bias(&self, i: usize) -> &[f64] {
        &self.biases[i]
    }

    /// Whether activation layer `i` (1-based, `1..=H`) applies a ReLU.
    pub fn relu_at(&self, layer: usize) -> bool {
        debug_assert!((1..=self.h()).contains(&layer));
        layer != 1 || self.first_layer_relu
    }

    /// Exclusivity reduction: keeps all parameters, removes the activation
    /// after the first weight layer.
    pub fn remove_first_relu(&self) -> Result<Self, ModelError> {
        if !self.first_layer_relu {
            return Err(ModelError::AlreadyLinear);
        }
        let mut out = self.clone();
        out.first_layer_relu = false;
        Ok(out)
    }
}

/// A batch of inputs with class labels in `0..K`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl Batch {
    pub fn new(inputs: Vec<Vec<f64>>, labels: Vec<usize>, num_classes: usize) -> Self {
        assert_eq!(inputs.len(), labels.len(), "inputs/labels length mismatch");
        assert!(!inputs.is_empty(), "batch must be nonempty");
        let d0 = inputs[0].len();
        assert!(inputs.iter().all(|x| x.len() == d0), "ragged batch inputs");
        assert!(labels.iter().all(|&y| y < num_classes), "label out of range");
        Self { inputs, labels, num_classes }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs[0].len()
    }

    /// True when every coordinate lies in `[-1, 1]`.
    pub fn within_box(&self) -> bool {
        self.inputs.iter().flatten().all(|&v| (-1.0..=1.0).contains(&v))
    }

    /// Uniform inputs on `[-1, 1]^{d0}` with uniform labels.
    pub fn uniform_random(m: usize, d0: usize, num_classes: usize, rng: &mut ChaCha8Rng) -> Self {
        assert!(m >= 1);
        let coord = Uniform::new_inclusive(-1.0, 1.0).unwrap();
        let label = Uniform::new(0, num_classes).unwrap();
        let inputs = (0..m).map(|_| (0..d0).map(|_| coord.sample(rng)).collect()).collect();
        let labels = (0..m).map(|_| label.sample(rng)).collect();
        Self::new(inputs, labels, num_classes)
    }
}

/// Per-sample, per-activation-layer binary masks (the diagonals of the
/// activation matrices). `masks[m][i]` covers activation layer `i+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationPattern {
    pub masks: Vec<Vec<Vec<u8>>>,
}

impl ActivationPattern {
    pub fn new(masks: Vec<Vec<Vec<u8>>>) -> Self {
        if let Some(first) = masks.first() {
            let layer_dims: Vec<usize> = first.iter().map(Vec::len).collect();
            for sample in &masks {
                assert_eq!(sample.len(), layer_dims.len(), "inconsistent layer count");
                for (mask, &d) in sample.iter().zip(&layer_dims) {
                    assert_eq!(mask.len(), d, "inconsistent layer width");
                    assert!(mask.iter().all(|&v| v <= 1), "mask entries must be 0/1");
                }
            }
        }
        Self { masks }
    }

    /// Forward pass over the whole batch, keeping only the patterns.
    pub fn from_batch(params: &FcnParams, batch: &Batch) -> Result<Self, ModelError> {
        let masks = batch
            .inputs
            .iter()
            .map(|x| forward(params, x).map(|(_, pattern)| pattern))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::new(masks))
    }

    pub fn batch_size(&self) -> usize {
        self.masks.len()
    }

    pub fn num_layers(&self) -> usize {
        self.masks.first().map_or(0, Vec::len)
    }
}

/// Per-layer weight and bias gradients (per-sample or averaged).
///
/// When `mask` is present, masked-out weight entries are carried as
/// unavailable rather than zero; bias gradients are always available.
#[derive(Debug, Clone)]
pub struct GradientBundle {
    pub weight_grads: Vec<DenseMatrix>,
    pub bias_grads: Vec<Vec<f64>>,
    pub mask: Option<GradMask>,
    pub batch_size_hint: Option<usize>,
}

/// Availability mask over weight-gradient entries, row-major per layer.
#[derive(Debug, Clone)]
pub struct GradMask {
    pub weights: Vec<Vec<u8>>,
}

impl GradientBundle {
    pub fn num_layers(&self) -> usize {
        self.weight_grads.len()
    }

    /// Whether weight-gradient entry `(row, col)` of layer `i` is available.
    pub fn is_available(&self, layer: usize, row: usize, col: usize) -> bool {
        match &self.mask {
            None => true,
            Some(mask) => {
                let cols = self.weight_grads[layer].cols();
                mask.weights[layer][row * cols + col] == 1
            }
        }
    }

    pub fn matches_shapes(&self, params: &FcnParams) -> bool {
        self.weight_grads.len() == params.h() + 1
            && self
                .weight_grads
                .iter()
                .zip(0..)
                .all(|(g, i)| {
                    (g.rows(), g.cols()) == (params.weight(i).rows(), params.weight(i).cols())
                })
            && self.bias_grads.iter().zip(0..).all(|(b, i)| b.len() == params.bias(i).len())
    }

    fn zeros_like(params: &FcnParams) -> Self {
        Self {
            weight_grads: (0..=params.h())
                .map(|i| DenseMatrix::zeros(params.weight(i).rows(), params.weight(i).cols()))
                .collect(),
            bias_grads: (0..=params.h()).map(|i| vec![0.0; params.bias(i).len()]).collect(),
            mask: None,
            batch_size_hint: None,
        }
    }

    /// Squared global L2 norm over all weight and bias entries.
    pub fn global_norm_sq(&self) -> f64 {
        let w: f64 = self.weight_grads.iter().flat_map(|g| g.data()).map(|v| v * v).sum();
        let b: f64 = self.bias_grads.iter().flatten().map(|v| v * v).sum();
        w + b
    }
}

/// Cross-entropy loss vector `ḡ`: the derivative of the loss with respect to
/// the logits. For a produced vector, exactly one entry is negative (at the
/// true label) and the entries sum to zero.
#[derive(Debug, Clone)]
pub struct LossVector {
    pub g: Vec<f64>,
    pub predicted_probs: Option<Vec<f64>>,
}

/// Forward pass returning the logits and the activation pattern.
pub fn forward(params: &FcnParams, x: &[f64]) -> Result<(Vec<f64>, Vec<Vec<u8>>), ModelError> {
    let (logits, pattern, _) = forward_full(params, x)?;
    Ok((logits, pattern))
}

/// Forward pass that also returns the post-activation values `a_0 .. a_H`
/// (with `a_0 = x`), as needed by the gradient computation.
fn forward_full(
    params: &FcnParams,
    x: &[f64],
) -> Result<(Vec<f64>, Vec<Vec<u8>>, Vec<Vec<f64>>), ModelError> {
    if x.len() != params.input_dim() {
        return Err(ModelError::ShapeMismatch(format!(
            "input has dim {}, model expects {}",
            x.len(),
            params.input_dim()
        )));
    }
    let h = params.h();
    let mut activations = Vec::with_capacity(h + 1);
    activations.push(x.to_vec());
    let mut pattern = Vec::with_capacity(h);
    let mut a = x.to_vec();
    for i in 0..h {
        let z = {
            let mut z = params.weight(i).mul_vec(&a);
            for (zj, bj) in z.iter_mut().zip(params.bias(i)) {
                *zj += bj;
            }
            z
        };
        if params.relu_at(i + 1) {
            // Pre-activation exactly 0 counts as inactive.
            let mask: Vec<u8> = z.iter().map(|&v| u8::from(v > 0.0)).collect();
            a = z.iter().zip(&mask).map(|(&v, &m)| if m == 1 { v } else { 0.0 }).collect();
            pattern.push(mask);
        } else {
            pattern.push(vec![1u8; z.len()]);
            a = z;
        }
        activations.push(a.clone());
    }
    let mut logits = params.weight(h).mul_vec(&a);
    for (lj, bj) in logits.iter_mut().zip(params.bias(h)) {
        *lj += bj;
    }
    Ok((logits, pattern, activations))
}

/// Cross-entropy loss and its loss vector, with max-shifted softmax.
pub fn loss_and_vector(logits: &[f64], y: usize) -> (f64, LossVector) {
    assert!(y < logits.len(), "label out of range");
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let probs: Vec<f64> = exps.iter().map(|&e| e / sum).collect();
    let loss = -(logits[y] - max) + sum.ln();
    let g: Vec<f64> =
        probs.iter().enumerate().map(|(c, &p)| if c == y { p - 1.0 } else { p }).collect();
    (loss, LossVector { g, predicted_probs: Some(probs) })
}

/// Exact analytical gradient of the cross-entropy loss for one sample.
pub fn per_sample_gradient(
    params: &FcnParams,
    x: &[f64],
    y: usize,
) -> Result<GradientBundle, ModelError> {
    let (logits, pattern, activations) = forward_full(params, x)?;
    if y >= params.num_classes() {
        return Err(ModelError::ShapeMismatch(format!(
            "label {y} out of range for {} classes",
            params.num_classes()
        )));
    }
    let (_, lv) = loss_and_vector(&logits, y);
    let h = params.h();
    let mut bundle = GradientBundle::zeros_like(params);

    let mut v = lv.g;
    for i in (0..=h).rev() {
        // ∇_{W_i} = v aᵢᵀ, ∇_{b_i} = v
        let a = &activations[i];
        let grad = &mut bundle.weight_grads[i];
        for (r, &vr) in v.iter().enumerate() {
            if vr == 0.0 {
                continue;
            }
            for (c, &ac) in a.iter().enumerate() {
                grad.set(r, c, vr * ac);
            }
        }
        bundle.bias_grads[i].copy_from_slice(&v);
        if i > 0 {
            let mut u = params.weight(i).tr_mul_vec(&v);
            for (uj, &mj) in u.iter_mut().zip(&pattern[i - 1]) {
                if mj == 0 {
                    *uj = 0.0;
                }
            }
            v = u;
        }
    }
    bundle.batch_size_hint = Some(1);
    Ok(bundle)
}

/// Coordinate-wise arithmetic average of the per-sample gradients.
pub fn average_gradient(params: &FcnParams, batch: &Batch) -> Result<GradientBundle, ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let mut acc = GradientBundle::zeros_like(params);
    for (x, &y) in batch.inputs.iter().zip(&batch.labels) {
        let g = per_sample_gradient(params, x, y)?;
        for (layer, g_layer) in g.weight_grads.iter().enumerate() {
            let target = &mut acc.weight_grads[layer];
            for r in 0..target.rows() {
                for c in 0..target.cols() {
                    target.set(r, c, target.get(r, c) + g_layer.get(r, c));
                }
            }
        }
        for (a, b) in acc.bias_grads.iter_mut().zip(&g.bias_grads) {
            for (ai, bi) in a.iter_mut().zip(b) {
                *ai += bi;
            }
        }
    }
    let scale = 1.0 / batch.len() as f64;
    for g in acc.weight_grads.iter_mut() {
        *g = g.scale(scale);
    }
    for b in acc.bias_grads.iter_mut() {
        for v in b.iter_mut() {
            *v *= scale;
        }
    }
    acc.batch_size_hint = Some(batch.len());
    Ok(acc)
}

/// DPSGD-style obfuscation: rescale so the global L2 norm is at most
/// `clip_norm`, then add i.i.d. Gaussian noise with std `sigma × clip_norm`
/// to every weight and bias coordinate. Deterministic for a fixed seed.
pub fn dpsgd_obfuscate(
    grad: &GradientBundle,
    clip_norm: f64,
    sigma: f64,
    rng_seed: u64,
) -> GradientBundle {
    assert!(clip_norm > 0.0, "clip_norm must be positive");
    assert!(sigma >= 0.0, "sigma must be nonnegative");
    let norm = grad.global_norm_sq().sqrt();
    let scale = if norm > clip_norm { clip_norm / norm } else { 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let noise = Normal::new(0.0, sigma * clip_norm).unwrap();
    let mut draw = |v: f64| {
        let n = if sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
        v * scale + n
    };
    let weight_grads = grad
        .weight_grads
        .iter()
        .map(|g| DenseMatrix::new(g.rows(), g.cols(), g.data().iter().map(|&v| draw(v)).collect()))
        .collect();
    let bias_grads =
        grad.bias_grads.iter().map(|b| b.iter().map(|&v| draw(v)).collect()).collect();
    GradientBundle {
        weight_grads,
        bias_grads,
        mask: grad.mask.clone(),
        batch_size_hint: grad.batch_size_hint,
    }
}
