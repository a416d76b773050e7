//! Resolved configuration shared by every subcommand.
//!
//! Precedence: built-in defaults, then the `--config` TOML file, then flags.
//! Relative paths written in a config file are taken relative to that file;
//! an `out_dir` left at its default stays relative to the working directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::{DEFAULT_BATCH_SIZE, DEFAULT_CLUSTERS, DEFAULT_MAX_ITERS, DEFAULT_TOP_M};
use crate::quantize::{DEFAULT_TRAIN_ITERS, DEFAULT_TRAIN_SAMPLE};
use crate::retrieval::{HnswParams, IndexKind};
use crate::store::{DEFAULT_DIM, DEFAULT_INIT_SCALE};
use crate::trainer::{CorruptSide, TrainConfig};
use crate::versioning::{NewNodeInit, RelationTerm, RetrainMode, RetrainPolicy, DEFAULT_ALPHA};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub workers: usize,
    pub paths: PathsConfig,
    pub train: TrainSection,
    pub cluster: ClusterSection,
    pub index: IndexSection,
    pub pq: PqSection,
    pub retrain: RetrainSection,
    pub eval: EvalSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub schema: Option<PathBuf>,
    pub edges: Vec<PathBuf>,
    /// edges added in the next graph version, used by the retrain stage
    pub new_edges: Vec<PathBuf>,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub dim: usize,
    pub init_scale: f32,
    pub epochs: usize,
    pub negatives: usize,
    pub negative_mix: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub partitions: usize,
    pub corrupt_side: CorruptSide,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSection {
    pub k: usize,
    pub max_iters: usize,
    /// mini-batch size; 0 runs full-batch Lloyd passes only
    pub batch_size: usize,
    pub top_m: usize,
    /// relations counted as engagements; empty means every relation
    pub relations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndexSection {
    pub exact: bool,
    pub m: usize,
    pub ef_construction: usize,
    pub ef_search: usize,
    pub k: usize,
    /// query ids for the pipeline's query stage; empty takes the first `num_queries` sources
    pub queries: Vec<String>,
    pub num_queries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PqSection {
    pub subquantizers: usize,
    pub sample_rows: usize,
    pub max_iters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrainSection {
    pub mode: RetrainMode,
    pub alpha: f64,
    pub new_node_init: NewNodeInit,
    pub relation_term: RelationTerm,
    pub epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// relation evaluated, clustered over and retrieved for
    pub relation: Option<String>,
    pub holdout_fraction: f64,
    pub ks: Vec<usize>,
    pub filter_train: bool,
    /// sampled negatives per held-out positive for the RCE stage
    pub rce_negatives: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            workers: 1,
            paths: PathsConfig::default(),
            train: TrainSection::default(),
            cluster: ClusterSection::default(),
            index: IndexSection::default(),
            pq: PqSection::default(),
            retrain: RetrainSection::default(),
            eval: EvalSection::default(),
        }
    }
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            schema: None,
            edges: Vec::new(),
            new_edges: Vec::new(),
            out_dir: PathBuf::from("out"),
        }
    }
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            dim: DEFAULT_DIM,
            init_scale: DEFAULT_INIT_SCALE,
            epochs: t.epochs,
            negatives: t.num_negatives,
            negative_mix: t.negative_mix,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            partitions: t.num_partitions,
            corrupt_side: t.corrupt_side,
        }
    }
}

impl Default for ClusterSection {
    fn default() -> Self {
        ClusterSection {
            k: DEFAULT_CLUSTERS,
            max_iters: DEFAULT_MAX_ITERS,
            batch_size: DEFAULT_BATCH_SIZE,
            top_m: DEFAULT_TOP_M,
            relations: Vec::new(),
        }
    }
}

impl Default for IndexSection {
    fn default() -> Self {
        let h = HnswParams::default();
        IndexSection {
            exact: false,
            m: h.m,
            ef_construction: h.ef_construction,
            ef_search: h.ef_search,
            k: 20,
            queries: Vec::new(),
            num_queries: 10,
        }
    }
}

impl Default for PqSection {
    fn default() -> Self {
        PqSection {
            subquantizers: 8,
            sample_rows: DEFAULT_TRAIN_SAMPLE,
            max_iters: DEFAULT_TRAIN_ITERS,
        }
    }
}

impl Default for RetrainSection {
    fn default() -> Self {
        let p = RetrainPolicy::default();
        RetrainSection {
            mode: p.mode,
            alpha: DEFAULT_ALPHA,
            new_node_init: p.new_node_init,
            relation_term: p.relation_term,
            epochs: 5,
        }
    }
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            relation: None,
            holdout_fraction: 0.1,
            ks: vec![10, 20, 50],
            filter_train: false,
            rce_negatives: 1,
        }
    }
}

impl PipelineConfig {
    /// Parse a TOML config; relative paths are resolved against `path`'s directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: PipelineConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), one_line(&e.to_string()))))?;
        let out_dir_set = toml::from_str::<toml::Table>(&text)
            .ok()
            .and_then(|t| t.get("paths").and_then(|p| p.get("out_dir")).map(|_| ()))
            .is_some();
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.paths.rebase(base, out_dir_set);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            num_negatives: self.train.negatives,
            negative_mix: self.train.negative_mix,
            learning_rate: self.train.learning_rate,
            batch_size: self.train.batch_size,
            seed: self.seed,
            num_partitions: self.train.partitions,
            corrupt_side: self.train.corrupt_side,
            workers: self.workers,
        }
    }

    /// Train config for the retrain stage: same optimizer, `retrain.epochs`.
    pub fn retrain_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.retrain.epochs,
            ..self.train_config()
        }
    }

    pub fn retrain_policy(&self) -> RetrainPolicy {
        RetrainPolicy {
            mode: self.retrain.mode,
            alpha: self.retrain.alpha,
            new_node_init: self.retrain.new_node_init,
            relation_term: self.retrain.relation_term,
            init_scale: self.train.init_scale,
        }
    }

    pub fn index_kind(&self) -> IndexKind {
        if self.index.exact {
            IndexKind::Exact
        } else {
            IndexKind::Hnsw(HnswParams {
                m: self.index.m,
                ef_construction: self.index.ef_construction,
                ef_search: self.index.ef_search,
                seed: self.seed,
            })
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train_config().validate()?;
        self.retrain_policy().validate()?;
        let bad = |m: String| Err(Error::Config(m));
        if self.train.dim == 0 {
            return bad("train.dim must be positive".into());
        }
        if !(self.train.init_scale > 0.0 && self.train.init_scale.is_finite()) {
            return bad("train.init_scale must be positive".into());
        }
        if self.cluster.k == 0 || self.cluster.top_m == 0 {
            return bad("cluster.k and cluster.top_m must be positive".into());
        }
        if self.index.k == 0 || self.index.m < 2 || self.index.ef_search == 0 {
            return bad("index.k and index.ef_search must be positive and index.m at least 2".into());
        }
        if self.pq.subquantizers == 0 {
            return bad("pq.subquantizers must be positive".into());
        }
        if !(self.eval.holdout_fraction > 0.0 && self.eval.holdout_fraction < 1.0) {
            return bad(format!("eval.holdout_fraction must be in (0, 1), got {}", self.eval.holdout_fraction));
        }
        if self.eval.ks.is_empty() || self.eval.ks.contains(&0) {
            return bad("eval.ks must list positive cutoffs".into());
        }
        Ok(())
    }
}

impl PathsConfig {
    fn rebase(&mut self, base: &Path, out_dir: bool) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(s) = self.schema.as_mut() {
            join(s);
        }
        self.edges.iter_mut().for_each(join);
        self.new_edges.iter_mut().for_each(join);
        if out_dir {
            join(&mut self.out_dir);
        }
    }
}

pub(crate) fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = PipelineConfig::default();
        let back: PipelineConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        cfg.validate().unwrap();
        assert_eq!(cfg.workers, 1);
    }

    #[test]
    fn partial_file_keeps_other_defaults() {
        let cfg: PipelineConfig = toml::from_str("seed = 9\n[train]\ndim = 8\n").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.train.dim, 8);
        assert_eq!(cfg.train.epochs, TrainConfig::default().epochs);
        assert_eq!(cfg.train_config().seed, 9);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<PipelineConfig>("[train]\ndims = 8\n").is_err());
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "[paths]\nschema = \"s.txt\"\nedges = [\"/abs/e.tsv\"]\n").unwrap();
        let cfg = PipelineConfig::load(&path).unwrap();
        assert_eq!(cfg.paths.schema.unwrap(), dir.path().join("s.txt"));
        assert_eq!(cfg.paths.edges[0], PathBuf::from("/abs/e.tsv"));
        assert_eq!(cfg.paths.out_dir, PathBuf::from("out"));
        std::fs::write(&path, "[paths]\nout_dir = \"run\"\n").unwrap();
        assert_eq!(PipelineConfig::load(&path).unwrap().paths.out_dir, dir.path().join("run"));
    }

    #[test]
    fn invalid_values_fail_validation() {
        let mut cfg = PipelineConfig::default();
        cfg.eval.holdout_fraction = 1.0;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = PipelineConfig::default();
        cfg.retrain.mode = RetrainMode::L2Anchored;
        cfg.retrain.alpha = 0.0;
        assert!(cfg.validate().is_err());
    }
}
