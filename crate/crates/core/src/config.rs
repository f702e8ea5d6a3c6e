//! JSON run configuration shared by the command line and tests.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::DEFAULT_KS;
use crate::graph::{read_edge_list, read_features, EdgeSplit, Graph, NegativeMode, Negatives};
use crate::model::ModelConfig;
use crate::train::TrainConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Full edge list. Used as the training graph when no split is given.
    pub edges: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub num_nodes: Option<usize>,
    /// Directory with `train.txt`, `valid.txt`, `test.txt` and negatives.
    pub split_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub ks: Vec<usize>,
    /// Expected negative layout; checked against the split files when set.
    pub negative_mode: Option<NegativeMode>,
    pub batch_size: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            ks: DEFAULT_KS.to_vec(),
            negative_mode: None,
            batch_size: 1024,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        if self.eval.ks.is_empty() || self.eval.ks.contains(&0) {
            return Err(Error::Config("eval.ks must be a non-empty list of positive integers".into()));
        }
        if self.eval.batch_size == 0 {
            return Err(Error::Config("eval.batch_size must be >= 1".into()));
        }
        if self.data.edges.is_none() && self.data.split_dir.is_none() {
            return Err(Error::Config("data needs edges or split_dir".into()));
        }
        Ok(())
    }

    /// Loads the training graph and the split. Without a split directory the
    /// whole edge list trains and validation and test are empty.
    pub fn load_data(&self) -> Result<(Graph, EdgeSplit)> {
        let d = &self.data;
        let features = d.features.as_deref().map(read_features).transpose()?;
        let split = match (&d.split_dir, &d.edges) {
            (Some(dir), _) => EdgeSplit::load_dir(dir)?,
            (None, Some(edges)) => EdgeSplit {
                train: read_edge_list(edges)?,
                valid: vec![],
                test: vec![],
                valid_neg: Negatives::Shared(vec![]),
                test_neg: Negatives::Shared(vec![]),
            },
            (None, None) => return Err(Error::Config("data needs edges or split_dir".into())),
        };
        let max_id = [&split.train, &split.valid, &split.test]
            .into_iter()
            .flatten()
            .chain(split.valid_neg.all_pairs().iter())
            .chain(split.test_neg.all_pairs().iter())
            .map(|&(u, v)| u.max(v) + 1)
            .max()
            .unwrap_or(0);
        let n = match (d.num_nodes, &features) {
            (Some(n), _) => n,
            (None, Some(f)) => f.num_rows(),
            (None, None) => max_id,
        };
        split.validate(n)?;
        if let Some(mode) = self.eval.negative_mode {
            for neg in [&split.valid_neg, &split.test_neg] {
                let populated = !neg.all_pairs().is_empty();
                if populated && neg.mode() != mode {
                    return Err(Error::Config(format!(
                        "eval.negative_mode is {mode:?} but split files are {:?}",
                        neg.mode()
                    )));
                }
            }
        }
        let g = Graph::from_edges(n, &split.train, features)?;
        Ok((g, split))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        let err = RunConfig::from_json(r#"{"data":{"edges":"g.tsv"},"modle":{}}"#).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let err = RunConfig::from_json(r#"{"data":{"edges":"g.tsv"},"model":{"hiden_dim":3}}"#).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig {
            data: DataConfig {
                edges: Some("g.tsv".into()),
                ..DataConfig::default()
            },
            ..RunConfig::default()
        };
        let back = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(RunConfig::from_json(r#"{"data":{"edges":"g"},"model":{"dropout":1.5}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"data":{"edges":"g"},"eval":{"ks":[]}}"#).is_err());
        assert!(RunConfig::from_json(r#"{}"#).is_err());
    }
}
