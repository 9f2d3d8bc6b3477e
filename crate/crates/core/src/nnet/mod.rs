//! Minimal dense-network engine: forward pass, exact backpropagation,
//! plain SGD and a numerically stable softmax.
//!
//! Weights are stored row-major with shape `(out_dim, in_dim)`. All arithmetic
//! is `f64`.

mod params;

pub use params::{NetworkParams, NetworkRecord};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// A dense layer computing `activation(W x + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl DenseLayer {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        weights: Vec<f64>,
        biases: Vec<f64>,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::config("layer dimensions must be positive"));
        }
        if weights.len() != in_dim * out_dim {
            return Err(Error::Dimension {
                context: "layer weights",
                expected: in_dim * out_dim,
                actual: weights.len(),
            });
        }
        if biases.len() != out_dim {
            return Err(Error::Dimension {
                context: "layer biases",
                expected: out_dim,
                actual: biases.len(),
            });
        }
        if !weights.iter().chain(&biases).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("layer parameters"));
        }
        Ok(Self {
            in_dim,
            out_dim,
            activation,
            weights,
            biases,
        })
    }

    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Result<Self> {
        Self::new(
            in_dim,
            out_dim,
            activation,
            vec![0.0; in_dim * out_dim],
            vec![0.0; out_dim],
        )
    }

    /// Weights and biases uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn init_uniform<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let mut layer = Self::zeros(in_dim, out_dim, activation)?;
        let limit = 1.0 / (in_dim as f64).sqrt();
        for w in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
            *w = rng.gen_range(-limit..=limit);
        }
        Ok(layer)
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    /// Mutable view for tests and hand-built networks. Dimensions stay fixed.
    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    fn pre_activation(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weights.chunks_exact(self.in_dim).zip(&self.biases).map(|(row, b)| {
            row.iter().zip(input).fold(*b, |acc, (w, x)| acc + w * x)
        }));
    }
}

/// Activations recorded for one layer during a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerCache {
    pub input: Vec<f64>,
    pub pre_activation: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ForwardCache {
    pub layers: Vec<LayerCache>,
}

fn check_input(layers: &[DenseLayer], input: &[f64]) -> Result<()> {
    let first = layers
        .first()
        .ok_or_else(|| Error::config("network has no layers"))?;
    if input.len() != first.in_dim {
        return Err(Error::Dimension {
            context: "network input",
            expected: first.in_dim,
            actual: input.len(),
        });
    }
    Ok(())
}

/// Runs `input` through `layers`, keeping what `backward` needs.
pub fn forward(layers: &[DenseLayer], input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
    check_input(layers, input)?;
    let mut cache = ForwardCache {
        layers: Vec::with_capacity(layers.len()),
    };
    let mut current = input.to_vec();
    for (i, layer) in layers.iter().enumerate() {
        if i > 0 && layer.in_dim != current.len() {
            return Err(Error::Dimension {
                context: "layer chain",
                expected: layer.in_dim,
                actual: current.len(),
            });
        }
        let mut z = Vec::with_capacity(layer.out_dim);
        layer.pre_activation(&current, &mut z);
        let out = z.iter().map(|&v| layer.activation.apply(v)).collect();
        cache.layers.push(LayerCache {
            input: std::mem::replace(&mut current, out),
            pre_activation: z,
        });
    }
    Ok((current, cache))
}

/// Forward pass without a cache.
pub fn predict(layers: &[DenseLayer], input: &[f64]) -> Result<Vec<f64>> {
    check_input(layers, input)?;
    let mut current = input.to_vec();
    let mut z = Vec::new();
    for layer in layers {
        if layer.in_dim != current.len() {
            return Err(Error::Dimension {
                context: "layer chain",
                expected: layer.in_dim,
                actual: current.len(),
            });
        }
        layer.pre_activation(&current, &mut z);
        current.clear();
        current.extend(z.iter().map(|&v| layer.activation.apply(v)));
    }
    Ok(current)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Per-layer gradients, shape-congruent with the layers they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub layers: Vec<LayerGrad>,
}

impl GradientBundle {
    pub fn zeros_like(layers: &[DenseLayer]) -> Self {
        Self {
            layers: layers
                .iter()
                .map(|l| LayerGrad {
                    weights: vec![0.0; l.weights.len()],
                    biases: vec![0.0; l.biases.len()],
                })
                .collect(),
        }
    }

    pub fn is_congruent(&self, layers: &[DenseLayer]) -> bool {
        self.layers.len() == layers.len()
            && self.layers.iter().zip(layers).all(|(g, l)| {
                g.weights.len() == l.weights.len() && g.biases.len() == l.biases.len()
            })
    }

    pub fn add_assign(&mut self, other: &GradientBundle) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += y;
            }
            for (x, y) in a.biases.iter_mut().zip(&b.biases) {
                *x += y;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|g| g.weights.iter().chain(&g.biases).all(|v| v.is_finite()))
    }

    /// Flattened view: for each layer, weights then biases.
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|g| g.weights.iter().chain(&g.biases).copied())
            .collect()
    }
}

/// Backpropagates `grad_output` (dL/d output) through `layers`.
///
/// Returns parameter gradients and dL/d input.
pub fn backward(
    layers: &[DenseLayer],
    cache: &ForwardCache,
    grad_output: &[f64],
) -> Result<(GradientBundle, Vec<f64>)> {
    let mut grads = GradientBundle::zeros_like(layers);
    let grad_input = backward_accumulate(layers, cache, grad_output, &mut grads)?;
    Ok((grads, grad_input))
}

/// Same as [`backward`] but adds into an existing bundle.
pub fn backward_accumulate(
    layers: &[DenseLayer],
    cache: &ForwardCache,
    grad_output: &[f64],
    grads: &mut GradientBundle,
) -> Result<Vec<f64>> {
    if cache.layers.len() != layers.len() {
        return Err(Error::Internal(format!(
            "forward cache has {} layers, network has {}",
            cache.layers.len(),
            layers.len()
        )));
    }
    if !grads.is_congruent(layers) {
        return Err(Error::Internal("gradient bundle shape mismatch".into()));
    }
    let mut upstream = grad_output.to_vec();
    for ((layer, lc), g) in layers
        .iter()
        .zip(&cache.layers)
        .zip(grads.layers.iter_mut())
        .rev()
    {
        if upstream.len() != layer.out_dim
            || lc.pre_activation.len() != layer.out_dim
            || lc.input.len() != layer.in_dim
        {
            return Err(Error::Internal("forward cache does not match layer".into()));
        }
        let delta: Vec<f64> = upstream
            .iter()
            .zip(&lc.pre_activation)
            .map(|(g, &z)| g * layer.activation.derivative(z))
            .collect();
        let mut grad_in = vec![0.0; layer.in_dim];
        for (o, &d) in delta.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            g.biases[o] += d;
            let row = o * layer.in_dim;
            let w_row = &layer.weights[row..row + layer.in_dim];
            let g_row = &mut g.weights[row..row + layer.in_dim];
            for i in 0..layer.in_dim {
                g_row[i] += d * lc.input[i];
                grad_in[i] += w_row[i] * d;
            }
        }
        upstream = grad_in;
    }
    Ok(upstream)
}

/// `p <- p - learning_rate * g` for every parameter.
///
/// A non-finite gradient rejects the whole update and leaves `layers` intact.
pub fn sgd_step(layers: &mut [DenseLayer], grads: &GradientBundle, learning_rate: f64) -> Result<()> {
    if !(learning_rate >= 0.0 && learning_rate.is_finite()) {
        return Err(Error::config(format!("learning rate {learning_rate} must be finite and >= 0")));
    }
    if !grads.is_congruent(layers) {
        return Err(Error::Internal("gradient bundle shape mismatch".into()));
    }
    if !grads.is_finite() {
        return Err(Error::NonFinite("gradient"));
    }
    for (layer, g) in layers.iter_mut().zip(&grads.layers) {
        for (p, d) in layer.weights.iter_mut().zip(&g.weights) {
            *p -= learning_rate * d;
        }
        for (p, d) in layer.biases.iter_mut().zip(&g.biases) {
            *p -= learning_rate * d;
        }
    }
    Ok(())
}

/// Max-subtracted softmax. Entries are floored at the smallest positive normal
/// float so every probability stays strictly positive.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::config("softmax over an empty vector"));
    }
    if !logits.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("softmax logits"));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps
        .into_iter()
        .map(|e| (e / total).max(f64::MIN_POSITIVE))
        .collect())
}

/// Serialized form of one layer: dims, activation name, row-major weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerRecord {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

impl From<&DenseLayer> for LayerRecord {
    fn from(layer: &DenseLayer) -> Self {
        Self {
            in_dim: layer.in_dim,
            out_dim: layer.out_dim,
            activation: layer.activation,
            weights: layer.weights.chunks_exact(layer.in_dim).map(<[f64]>::to_vec).collect(),
            biases: layer.biases.clone(),
        }
    }
}

impl TryFrom<LayerRecord> for DenseLayer {
    type Error = Error;

    fn try_from(rec: LayerRecord) -> Result<Self> {
        if rec.weights.len() != rec.out_dim {
            return Err(Error::Dimension {
                context: "serialized weight rows",
                expected: rec.out_dim,
                actual: rec.weights.len(),
            });
        }
        if let Some(row) = rec.weights.iter().find(|r| r.len() != rec.in_dim) {
            return Err(Error::Dimension {
                context: "serialized weight row",
                expected: rec.in_dim,
                actual: row.len(),
            });
        }
        let weights = rec.weights.into_iter().flatten().collect();
        DenseLayer::new(rec.in_dim, rec.out_dim, rec.activation, weights, rec.biases)
    }
}

pub fn layers_to_records(layers: &[DenseLayer]) -> Vec<LayerRecord> {
    layers.iter().map(LayerRecord::from).collect()
}

pub fn layers_from_records(records: Vec<LayerRecord>) -> Result<Vec<DenseLayer>> {
    let layers: Vec<DenseLayer> = records
        .into_iter()
        .map(DenseLayer::try_from)
        .collect::<Result<_>>()?;
    for pair in layers.windows(2) {
        if pair[0].out_dim != pair[1].in_dim {
            return Err(Error::Dimension {
                context: "serialized layer chain",
                expected: pair[1].in_dim,
                actual: pair[0].out_dim,
            });
        }
    }
    Ok(layers)
}

/// Builds an MLP: hidden relu layers then an identity output layer.
pub fn mlp<R: Rng + ?Sized>(
    input: usize,
    hidden: &[usize],
    output: usize,
    rng: &mut R,
) -> Result<Vec<DenseLayer>> {
    let mut layers = Vec::with_capacity(hidden.len() + 1);
    let mut width = input;
    for &h in hidden {
        layers.push(DenseLayer::init_uniform(width, h, Activation::Relu, rng)?);
        width = h;
    }
    layers.push(DenseLayer::init_uniform(width, output, Activation::Identity, rng)?);
    Ok(layers)
}
