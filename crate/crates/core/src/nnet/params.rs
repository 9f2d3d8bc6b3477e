use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{forward, layers_from_records, layers_to_records, mlp, predict, Activation, DenseLayer, ForwardCache, LayerRecord, FORMAT_VERSION};
use crate::error::{Error, Result};

/// Shared trunk feeding a Q head and an optional duration head.
///
/// An empty trunk passes the input straight to both heads. An empty
/// duration head means the network has no bandit path.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub trunk: Vec<DenseLayer>,
    pub q_head: Vec<DenseLayer>,
    pub duration_head: Vec<DenseLayer>,
}

fn chain_ok(layers: &[DenseLayer], input: usize, context: &'static str) -> Result<usize> {
    let mut width = input;
    for layer in layers {
        if layer.in_dim() != width {
            return Err(Error::Dimension {
                context,
                expected: width,
                actual: layer.in_dim(),
            });
        }
        width = layer.out_dim();
    }
    Ok(width)
}

impl NetworkParams {
    pub fn new(
        input_width: usize,
        trunk: Vec<DenseLayer>,
        q_head: Vec<DenseLayer>,
        duration_head: Vec<DenseLayer>,
    ) -> Result<Self> {
        if q_head.is_empty() {
            return Err(Error::config("q head needs at least one layer"));
        }
        let features = chain_ok(&trunk, input_width, "trunk")?;
        chain_ok(&q_head, features, "q head")?;
        chain_ok(&duration_head, features, "duration head")?;
        Ok(Self {
            trunk,
            q_head,
            duration_head,
        })
    }

    /// Relu hidden layers everywhere, identity outputs. Layers are drawn in
    /// the order trunk, Q head, duration head, so the Q path does not depend
    /// on whether a duration head exists.
    pub fn init<R: Rng + ?Sized>(
        input_width: usize,
        trunk_hidden: &[usize],
        q_hidden: &[usize],
        q_width: usize,
        duration: Option<(&[usize], usize)>,
        rng: &mut R,
    ) -> Result<Self> {
        let mut trunk = Vec::with_capacity(trunk_hidden.len());
        let mut width = input_width;
        for &h in trunk_hidden {
            trunk.push(DenseLayer::init_uniform(width, h, Activation::Relu, rng)?);
            width = h;
        }
        let q_head = mlp(width, q_hidden, q_width, rng)?;
        let duration_head = match duration {
            Some((hidden, d_max)) => mlp(width, hidden, d_max, rng)?,
            None => Vec::new(),
        };
        Self::new(input_width, trunk, q_head, duration_head)
    }

    pub fn input_width(&self) -> usize {
        self.trunk
            .first()
            .or_else(|| self.q_head.first())
            .map(DenseLayer::in_dim)
            .unwrap_or(0)
    }

    pub fn feature_width(&self) -> usize {
        self.trunk
            .last()
            .map(DenseLayer::out_dim)
            .unwrap_or_else(|| self.input_width())
    }

    pub fn q_width(&self) -> usize {
        self.q_head.last().map(DenseLayer::out_dim).unwrap_or(0)
    }

    pub fn duration_width(&self) -> Option<usize> {
        self.duration_head.last().map(DenseLayer::out_dim)
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_width() {
            return Err(Error::Dimension {
                context: "state features",
                expected: self.input_width(),
                actual: input.len(),
            });
        }
        Ok(())
    }

    /// Trunk output with its cache (empty when there is no trunk).
    pub fn features(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        self.check_input(input)?;
        if self.trunk.is_empty() {
            return Ok((input.to_vec(), ForwardCache::default()));
        }
        forward(&self.trunk, input)
    }

    fn feature_values(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        if self.trunk.is_empty() {
            return Ok(input.to_vec());
        }
        predict(&self.trunk, input)
    }

    pub fn q_values(&self, input: &[f64]) -> Result<Vec<f64>> {
        predict(&self.q_head, &self.feature_values(input)?)
    }

    pub fn duration_logits(&self, input: &[f64]) -> Result<Vec<f64>> {
        if self.duration_head.is_empty() {
            return Err(Error::Usage("network has no duration head".into()));
        }
        predict(&self.duration_head, &self.feature_values(input)?)
    }

    /// Copy of the trunk and Q head only.
    pub fn q_path(&self) -> Self {
        Self {
            trunk: self.trunk.clone(),
            q_head: self.q_head.clone(),
            duration_head: Vec::new(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.trunk
            .iter()
            .chain(&self.q_head)
            .chain(&self.duration_head)
            .all(|l| l.weights().iter().chain(l.biases()).all(|v| v.is_finite()))
    }

    pub fn to_record(&self) -> NetworkRecord {
        NetworkRecord {
            format_version: FORMAT_VERSION,
            input_width: self.input_width(),
            trunk: layers_to_records(&self.trunk),
            q_head: layers_to_records(&self.q_head),
            duration_head: layers_to_records(&self.duration_head),
        }
    }

    pub fn from_record(record: NetworkRecord) -> Result<Self> {
        if record.format_version != FORMAT_VERSION {
            return Err(Error::Incompatible(format!(
                "network format_version {} (expected {FORMAT_VERSION})",
                record.format_version
            )));
        }
        Self::new(
            record.input_width,
            layers_from_records(record.trunk)?,
            layers_from_records(record.q_head)?,
            layers_from_records(record.duration_head)?,
        )
    }
}

/// JSON form of [`NetworkParams`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkRecord {
    pub format_version: u32,
    pub input_width: usize,
    pub trunk: Vec<LayerRecord>,
    pub q_head: Vec<LayerRecord>,
    #[serde(default)]
    pub duration_head: Vec<LayerRecord>,
}
