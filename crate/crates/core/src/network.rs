use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Matrix, Result};

/// Lifts the raw network input before the first affine layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureMap {
    /// Raw input of the given length, passed through unchanged.
    Identity { dim: usize },
    /// State `x` of length `n` extended by all degree-2 monomials.
    Hv { n: usize },
    /// Joint `(x, u)` extended by all degree-2 monomials of its entries.
    HqPrime { n: usize, m: usize },
}

impl FeatureMap {
    /// Length of the raw input vector.
    pub fn raw_dim(&self) -> usize {
        match *self {
            FeatureMap::Identity { dim } => dim,
            FeatureMap::Hv { n } => n,
            FeatureMap::HqPrime { n, m } => n + m,
        }
    }

    /// Length of the lifted feature vector (the network's input width).
    pub fn output_dim(&self) -> usize {
        match *self {
            FeatureMap::Identity { dim } => dim,
            FeatureMap::Hv { n } => n * (n + 3) / 2,
            FeatureMap::HqPrime { n, m } => (n + m) * (n + m + 3) / 2,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            FeatureMap::Identity { .. } => "identity",
            FeatureMap::Hv { .. } => "hv",
            FeatureMap::HqPrime { .. } => "hq_prime",
        }
    }
}

impl fmt::Display for FeatureMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            FeatureMap::Identity { dim } => write!(f, "identity(dim={dim})"),
            FeatureMap::Hv { n } => write!(f, "hv(n={n})"),
            FeatureMap::HqPrime { n, m } => write!(f, "hq_prime(n={n}, m={m})"),
        }
    }
}

/// One affine map `y -> W y + a`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub w: Matrix,
    pub a: Vec<f64>,
}

impl Layer {
    pub fn new(w: Matrix, a: Vec<f64>) -> Result<Self> {
        if w.rows() != a.len() {
            return Err(Error::DimensionMismatch("bias length != weight rows"));
        }
        Ok(Layer { w, a })
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.w.cols()
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.w.rows()
    }
}

/// Feed-forward network with ReLU after every layer except the last.
#[derive(Debug, Clone, PartialEq)]
pub struct ReluNetwork {
    layers: Vec<Layer>,
    feature_map: FeatureMap,
}

impl ReluNetwork {
    pub fn new(feature_map: FeatureMap, layers: Vec<Layer>) -> Result<Self> {
        let first = layers
            .first()
            .ok_or(Error::DimensionMismatch("network has no layers"))?;
        if first.in_dim() != feature_map.output_dim() {
            return Err(Error::DimensionMismatch(
                "first layer width != feature map output width",
            ));
        }
        if layers.windows(2).any(|w| w[0].out_dim() != w[1].in_dim()) {
            return Err(Error::DimensionMismatch("consecutive layer widths differ"));
        }
        Ok(ReluNetwork {
            layers,
            feature_map,
        })
    }

    #[inline]
    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    #[inline]
    pub fn feature_map(&self) -> FeatureMap {
        self.feature_map
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// Widths of the hidden layers.
    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(Layer::out_dim)
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.w.rows() * l.w.cols() + l.a.len())
            .sum()
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn into_layers(self) -> Vec<Layer> {
        self.layers
    }
}
