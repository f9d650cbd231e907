//! Feature maps and forward evaluation.
//!
//! Monomial order for `h_v(x)`: `x_1..x_n`, then `x_i x_j` for `i <= j` in
//! row-major upper-triangle order (`x_1^2, x_1 x_2, .., x_1 x_n, x_2^2, ..`).
//! `h'_q(x, u)` appends `u_1..u_m`, the same upper triangle over `u`, and the
//! cross terms `x_i u_j` ordered x-major. For `n = m = 1` this is
//! `(x, x^2, u, u^2, x u)`.

use alloc::vec::Vec;

use crate::{Error, FeatureMap, ReluNetwork, Result};

/// Upper-triangle index pairs `(i, j)`, `i <= j`, row-major.
pub(crate) fn upper_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i..n).map(move |j| (i, j)))
}

/// `(x, x_1^2, x_1 x_2, .., x_n^2)`.
pub fn feature_hv(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut out = Vec::with_capacity(n * (n + 3) / 2);
    out.extend_from_slice(x);
    out.extend(upper_pairs(n).map(|(i, j)| x[i] * x[j]));
    out
}

/// `(h_v(x), u, u-quadratics, x_i u_j)`.
pub fn feature_hq_prime(x: &[f64], u: &[f64]) -> Vec<f64> {
    let (n, m) = (x.len(), u.len());
    let mut out = Vec::with_capacity((n + m) * (n + m + 3) / 2);
    out.extend(feature_hv(x));
    out.extend_from_slice(u);
    out.extend(upper_pairs(m).map(|(i, j)| u[i] * u[j]));
    for xi in x {
        out.extend(u.iter().map(|uj| xi * uj));
    }
    out
}

impl FeatureMap {
    /// Lifts a raw input; `(x, u)` inputs are passed concatenated.
    pub fn apply(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.raw_dim() {
            return Err(Error::ShapeMismatch {
                expected: self.raw_dim(),
                found: raw.len(),
            });
        }
        Ok(match *self {
            FeatureMap::Identity { .. } => raw.to_vec(),
            FeatureMap::Hv { .. } => feature_hv(raw),
            FeatureMap::HqPrime { n, .. } => feature_hq_prime(&raw[..n], &raw[n..]),
        })
    }
}

impl ReluNetwork {
    /// Applies the feature map, then the affine layers with ReLU in between.
    pub fn forward(&self, raw: &[f64]) -> Result<Vec<f64>> {
        let xi = self.feature_map().apply(raw)?;
        Ok(self.forward_features(&xi))
    }

    /// Scalar output; panics on multi-output networks.
    pub fn forward_scalar(&self, raw: &[f64]) -> Result<f64> {
        assert_eq!(self.output_dim(), 1, "forward_scalar on a vector-valued network");
        self.forward(raw).map(|y| y[0])
    }

    /// Forward pass from already lifted features. The caller guarantees the
    /// width matches the first layer.
    pub fn forward_features(&self, xi: &[f64]) -> Vec<f64> {
        let layers = self.layers();
        let mut y = xi.to_vec();
        for (idx, layer) in layers.iter().enumerate() {
            let mut z = layer.w.mul_vec(&y).expect("layer widths checked at construction");
            for (zi, ai) in z.iter_mut().zip(&layer.a) {
                *zi += ai;
            }
            if idx + 1 < layers.len() {
                for zi in z.iter_mut() {
                    *zi = zi.max(0.0);
                }
            }
            y = z;
        }
        y
    }

    /// Pre-activations of the first hidden layer.
    pub fn first_preactivations(&self, raw: &[f64]) -> Result<Vec<f64>> {
        let xi = self.feature_map().apply(raw)?;
        let layer = &self.layers()[0];
        let mut z = layer.w.mul_vec(&xi)?;
        for (zi, ai) in z.iter_mut().zip(&layer.a) {
            *zi += ai;
        }
        Ok(z)
    }
}
