//! Training-experiment configuration (TOML) and result tables.
//!
//! ```toml
//! samples = 2000
//! data_seed = 42
//! base_seed = 0
//! trials = 20
//! epochs = 1000
//!
//! [[topology]]
//! input = "hq_prime"
//! widths = [7]
//!
//! [[topology]]
//! input = "xu"
//! widths = [5, 5]
//! ```
//!
//! Every field is optional. Without `[problem]` the worked example with
//! horizon 2 is used; without `[[topology]]` the seven reference topologies.

use pwqnet_core::train::{self, ExperimentRow, Topology, TrainConfig};
use pwqnet_core::{FeatureMap, MpcProblem};
use serde::{Deserialize, Serialize};

use crate::{DocError, DocResult, ProblemDoc};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyDoc {
    /// `"hq_prime"` for the lifted `(x, x^2, u, u^2, xu)` input or `"xu"`
    /// for the raw pair.
    pub input: String,
    pub widths: Vec<usize>,
}

impl TopologyDoc {
    pub fn to_topology(&self) -> DocResult<Topology> {
        let fm = match self.input.as_str() {
            "hq_prime" => FeatureMap::HqPrime { n: 1, m: 1 },
            "xu" => FeatureMap::Identity { dim: 2 },
            other => return Err(DocError::Invalid(format!("unknown input '{other}', expected hq_prime or xu"))),
        };
        if self.widths.is_empty() || self.widths.contains(&0) {
            return Err(DocError::Invalid("widths must be a nonempty list of positive integers".into()));
        }
        Ok(Topology::new(fm, self.widths.clone()))
    }
}

impl From<&Topology> for TopologyDoc {
    fn from(t: &Topology) -> Self {
        TopologyDoc {
            input: match t.feature_map {
                FeatureMap::HqPrime { .. } => "hq_prime".into(),
                _ => "xu".into(),
            },
            widths: t.widths.clone(),
        }
    }
}

fn default_samples() -> usize {
    2000
}
fn default_data_seed() -> u64 {
    42
}
fn default_trials() -> usize {
    20
}
fn default_epochs() -> usize {
    TrainConfig::default().epochs
}
fn default_learning_rate() -> f64 {
    TrainConfig::default().learning_rate
}
fn default_batch_size() -> usize {
    TrainConfig::default().batch_size
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfigDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemDoc>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_data_seed")]
    pub data_seed: u64,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default, rename = "topology")]
    pub topologies: Vec<TopologyDoc>,
}

impl Default for TrainConfigDoc {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

impl TrainConfigDoc {
    pub fn from_toml(text: &str) -> DocResult<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn problem(&self) -> DocResult<MpcProblem> {
        match &self.problem {
            Some(p) => p.to_problem(),
            None => Ok(MpcProblem::example(2)),
        }
    }

    pub fn topologies(&self) -> DocResult<Vec<Topology>> {
        if self.topologies.is_empty() {
            return Ok(train::reference_topologies());
        }
        self.topologies.iter().map(TopologyDoc::to_topology).collect()
    }

    pub fn train_config(&self) -> DocResult<TrainConfig> {
        if self.samples == 0 || self.trials == 0 || self.epochs == 0 || self.batch_size == 0 {
            return Err(DocError::Invalid("samples, trials, epochs and batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(DocError::Invalid("learning_rate must be positive".into()));
        }
        Ok(TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            ..TrainConfig::default()
        })
    }
}

const HEADER: [&str; 6] = ["input", "depth", "widths", "params", "rmse_mean", "rmse_std"];

fn row_fields(row: &ExperimentRow) -> [String; 6] {
    let t = &row.topology;
    [
        TopologyDoc::from(t).input,
        t.depth().to_string(),
        t.widths.iter().map(usize::to_string).collect::<Vec<_>>().join(";"),
        row.param_count.to_string(),
        format!("{:.6}", row.mean_rmse),
        format!("{:.6}", row.std_rmse),
    ]
}

/// Aligned plain-text table, one row per topology.
pub fn table_text(rows: &[ExperimentRow]) -> String {
    let body: Vec<[String; 6]> = rows.iter().map(row_fields).collect();
    let mut widths = HEADER.map(str::len);
    for r in &body {
        for (w, f) in widths.iter_mut().zip(r) {
            *w = (*w).max(f.len());
        }
    }
    let line = |fields: &[&str]| {
        fields
            .iter()
            .zip(widths)
            .map(|(f, w)| format!("{f:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_owned()
    };
    let mut out = line(&HEADER);
    out.push('\n');
    for r in &body {
        out.push_str(&line(&r.each_ref().map(String::as_str)));
        out.push('\n');
    }
    out
}

pub fn table_csv(rows: &[ExperimentRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER).expect("in-memory write");
    for r in rows {
        w.write_record(row_fields(r)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ASCII output")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_reference_experiment() {
        let cfg = TrainConfigDoc::default();
        assert_eq!(cfg.samples, 2000);
        assert_eq!(cfg.trials, 20);
        assert_eq!(cfg.topologies().unwrap().len(), 7);
        assert_eq!(cfg.problem().unwrap(), MpcProblem::example(2));
        assert_eq!(cfg.train_config().unwrap(), TrainConfig::default());
    }

    #[test]
    fn topology_tables() {
        let cfg = TrainConfigDoc::from_toml("[[topology]]\ninput = \"xu\"\nwidths = [5, 5]\n").unwrap();
        let t = cfg.topologies().unwrap();
        let rows = vec![train::summarize(t[0].clone(), vec![1.0, 3.0])];
        let csv = table_csv(&rows);
        assert_eq!(csv.lines().nth(1).unwrap(), "xu,2,5;5,51,2.000000,1.000000");
        assert!(table_text(&rows).starts_with("input  depth  widths  params"));
    }

    #[test]
    fn bad_topology_is_rejected() {
        let cfg = TrainConfigDoc::from_toml("[[topology]]\ninput = \"x\"\nwidths = [5]\n").unwrap();
        assert!(cfg.topologies().is_err());
        assert!(TrainConfigDoc::from_toml("epochz = 3").is_err());
    }
}
