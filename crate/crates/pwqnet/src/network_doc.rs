//! Network interchange document.
//!
//! ```json
//! {
//!   "feature_map": { "tag": "hv", "n": 1 },
//!   "layers": [ { "W": [[...], ...], "a": [...] }, ... ],
//!   "meta": { "target": "value" }
//! }
//! ```

use std::collections::BTreeMap;

use pwqnet_core::{FeatureMap, Layer, Matrix, ReluNetwork};
use serde::{Deserialize, Serialize};

use crate::{json, DocError, DocResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureMapDoc {
    pub tag: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
}

impl From<FeatureMap> for FeatureMapDoc {
    fn from(fm: FeatureMap) -> Self {
        let mut doc = FeatureMapDoc {
            tag: fm.tag().to_owned(),
            n: None,
            m: None,
            dim: None,
        };
        match fm {
            FeatureMap::Identity { dim } => doc.dim = Some(dim),
            FeatureMap::Hv { n } => doc.n = Some(n),
            FeatureMap::HqPrime { n, m } => {
                doc.n = Some(n);
                doc.m = Some(m);
            }
        }
        doc
    }
}

impl TryFrom<&FeatureMapDoc> for FeatureMap {
    type Error = DocError;

    fn try_from(doc: &FeatureMapDoc) -> DocResult<Self> {
        let need = |v: Option<usize>, field: &str| {
            v.filter(|&v| v > 0)
                .ok_or_else(|| DocError::Invalid(format!("feature map '{}' needs a positive '{field}'", doc.tag)))
        };
        match doc.tag.as_str() {
            "identity" => Ok(FeatureMap::Identity { dim: need(doc.dim, "dim")? }),
            "hv" => Ok(FeatureMap::Hv { n: need(doc.n, "n")? }),
            "hq_prime" => Ok(FeatureMap::HqPrime {
                n: need(doc.n, "n")?,
                m: need(doc.m, "m")?,
            }),
            other => Err(DocError::Invalid(format!("unknown feature map '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerDoc {
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    pub a: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDoc {
    pub feature_map: FeatureMapDoc,
    pub layers: Vec<LayerDoc>,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl NetworkDoc {
    pub fn new(net: &ReluNetwork, meta: BTreeMap<String, String>) -> Self {
        NetworkDoc {
            feature_map: net.feature_map().into(),
            layers: net
                .layers()
                .iter()
                .map(|l| LayerDoc {
                    w: l.w.row_iter().map(<[f64]>::to_vec).collect(),
                    a: l.a.clone(),
                })
                .collect(),
            meta,
        }
    }

    pub fn to_network(&self) -> DocResult<ReluNetwork> {
        let fm = FeatureMap::try_from(&self.feature_map)?;
        let layers = self
            .layers
            .iter()
            .map(|l| Ok(Layer::new(Matrix::from_rows(&l.w)?, l.a.clone())?))
            .collect::<DocResult<Vec<_>>>()?;
        Ok(ReluNetwork::new(fm, layers)?)
    }

    pub fn to_json(&self) -> String {
        json::to_string(self).expect("network documents always serialize")
    }

    pub fn from_json(text: &str) -> DocResult<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_feature_map_is_rejected() {
        let doc = FeatureMapDoc {
            tag: "cubic".into(),
            n: Some(1),
            m: None,
            dim: None,
        };
        assert!(FeatureMap::try_from(&doc).is_err());
    }

    #[test]
    fn two_layer_entries_for_one_hidden_layer() {
        let net = ReluNetwork::new(
            FeatureMap::Identity { dim: 1 },
            vec![
                Layer::new(Matrix::from_rows(&[[1.0], [-1.0], [2.0]]).unwrap(), vec![0.0; 3]).unwrap(),
                Layer::new(Matrix::from_rows(&[[1.0, 1.0, 1.0]]).unwrap(), vec![0.5]).unwrap(),
            ],
        )
        .unwrap();
        let doc = NetworkDoc::new(&net, BTreeMap::new());
        assert_eq!(doc.layers.len(), 2);
        assert_eq!(doc.feature_map.tag, "identity");
        let text = doc.to_json();
        assert!(text.contains("\"W\""));
        assert_eq!(NetworkDoc::from_json(&text).unwrap().to_network().unwrap(), net);
    }
}
