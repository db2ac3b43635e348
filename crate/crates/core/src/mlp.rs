//! Small dense feed-forward networks with analytic input gradients.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::matvec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    // relu'(0) is taken to be 0.
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

/// `out = act(W in + b)` with `W` stored as `out_dim` rows of length `in_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(weights: Vec<Vec<f64>>, biases: Vec<f64>, activation: Activation) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidModel("layer has no output units".into()));
        }
        let in_dim = weights[0].len();
        if in_dim == 0 {
            return Err(Error::InvalidModel("layer has no inputs".into()));
        }
        if weights.iter().any(|r| r.len() != in_dim) {
            return Err(Error::InvalidModel("ragged layer weight matrix".into()));
        }
        if biases.len() != weights.len() {
            return Err(Error::InvalidModel(format!(
                "layer has {} rows but {} biases",
                weights.len(),
                biases.len()
            )));
        }
        if weights
            .iter()
            .flatten()
            .chain(&biases)
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidModel("non-finite layer parameter".into()));
        }
        Ok(Self {
            weights,
            biases,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weights[0].len()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpClassifier {
    layers: Vec<DenseLayer>,
}

impl MlpClassifier {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidModel("network has no layers".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::InvalidModel(format!(
                    "layer output {} does not feed next layer input {}",
                    pair[0].out_dim(),
                    pair[1].in_dim()
                )));
            }
        }
        let k = layers.last().map(DenseLayer::out_dim).unwrap_or(0);
        if k < 2 {
            return Err(Error::InvalidModel(format!(
                "network must emit at least 2 logits, got {k}"
            )));
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// Pre-activations of every layer for input `x`.
    fn forward(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = x.to_vec();
        for layer in &self.layers {
            let mut z = matvec(&layer.weights, &h);
            for (zi, bi) in z.iter_mut().zip(&layer.biases) {
                *zi += bi;
            }
            h = z.iter().map(|&v| layer.activation.apply(v)).collect();
            pre.push(z);
        }
        pre
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let pre = self.forward(x);
        let last = self.layers.last().expect("nonempty");
        Ok(pre
            .last()
            .expect("nonempty")
            .iter()
            .map(|&z| last.activation.apply(z))
            .collect())
    }

    /// Gradient of logit `j` with respect to the input, by reverse accumulation.
    pub fn logit_gradient(&self, x: &[f64], j: usize) -> Result<Vec<f64>> {
        if j >= self.num_classes() {
            return Err(Error::ClassOutOfRange {
                index: j,
                num_classes: self.num_classes(),
            });
        }
        let mut upstream = vec![0.0; self.num_classes()];
        upstream[j] = 1.0;
        self.input_gradient(x, &upstream)
    }

    /// `J(x)^T u` where `J` is the Jacobian of the logits at `x`.
    pub fn input_gradient(&self, x: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        check_dim(self.num_classes(), upstream.len())?;
        let pre = self.forward(x);
        let mut upstream = upstream.to_vec();
        for (layer, z) in self.layers.iter().zip(&pre).rev() {
            let delta: Vec<f64> = upstream
                .iter()
                .zip(z)
                .map(|(g, &zi)| g * layer.activation.derivative(zi))
                .collect();
            let mut down = vec![0.0; layer.in_dim()];
            for (row, &dl) in layer.weights.iter().zip(&delta) {
                if dl != 0.0 {
                    for (d, w) in down.iter_mut().zip(row) {
                        *d += dl * w;
                    }
                }
            }
            upstream = down;
        }
        Ok(upstream)
    }

    /// Single-layer identity network computing `W x + b`.
    pub fn affine(weights: Vec<Vec<f64>>, biases: Vec<f64>) -> Result<Self> {
        Self::new(vec![DenseLayer::new(
            weights,
            biases,
            Activation::Identity,
        )?])
    }
}
