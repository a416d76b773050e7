//! The `hin` command line.
//!
//! Every subcommand resolves a [`PipelineConfig`] from defaults, an optional
//! `--config` TOML file and its own flags (flags win), logs it with the seed,
//! and then runs one stage. Failures print a single line
//! `error kind=<kind> message="<text>"` on stderr. Exit codes: 0 success,
//! 2 missing input file or bad usage, 3 stage-order violation, 1 otherwise.

mod config;
mod pipeline;
mod stages;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use config::{
    ClusterSection, EvalSection, IndexSection, PathsConfig, PipelineConfig, PqSection, RetrainSection, TrainSection,
};
pub use pipeline::{run_pipeline, ARTIFACTS};
pub use stages::{ids_path, schema_path, Model};

use crate::error::{Error, Result};
use crate::trainer::CorruptSide;
use crate::versioning::RetrainMode;
use config::one_line;

#[derive(Debug, Parser)]
#[command(name = "hin", version, about = "Heterogeneous information network embeddings")]
pub struct Cli {
    /// TOML config file; flags override its values
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Print the fully resolved config as TOML and exit
    #[arg(long, global = true)]
    pub show_config: bool,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Concurrent training workers; 1 is deterministic
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a network and write a normalized copy with its id map
    Ingest(IngestArgs),
    /// Split a network into one graph per high-coverage relation
    Coembed(IngestArgs),
    /// Train embeddings from scratch
    Train(TrainArgs),
    /// k-means over one entity table
    Cluster(ClusterArgs),
    /// Per-entity cluster-engagement mixtures
    Mixture(MixtureArgs),
    /// Build or query a nearest-neighbor index
    #[command(subcommand)]
    Index(IndexCommand),
    /// Query an index for several ids at once
    Query(QueryArgs),
    /// Product quantization of an embedding table
    #[command(subcommand)]
    Pq(PqCommand),
    /// Retrain a checkpoint on a newer graph version
    Retrain(RetrainArgs),
    /// Offline evaluation
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Run every stage end to end from a config file
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    #[arg(long, value_name = "FILE")]
    pub schema: Option<PathBuf>,
    /// edge files, repeatable
    #[arg(long, value_name = "FILE", num_args = 1..)]
    pub edges: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainFlags {
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub partitions: Option<usize>,
    #[arg(long)]
    pub negatives: Option<usize>,
    #[arg(long = "neg-mix")]
    pub neg_mix: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub init_scale: Option<f32>,
    /// both | source | target
    #[arg(long, value_parser = parse_from_str::<CorruptSide>)]
    pub corrupt_side: Option<CorruptSide>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub train: TrainFlags,
    #[arg(long, value_name = "CKPT")]
    pub out: PathBuf,
    /// loss report TSV; defaults to `<CKPT>.loss.tsv`
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long, value_name = "CKPT")]
    pub ckpt: PathBuf,
    /// entity type or raw table name
    #[arg(long)]
    pub table: String,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// mini-batch size, 0 for full-batch only
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MixtureArgs {
    #[arg(long, value_name = "CKPT")]
    pub ckpt: PathBuf,
    /// edges whose engagements are counted, repeatable
    #[arg(long, value_name = "FILE", num_args = 1..)]
    pub edges: Vec<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub centroids: PathBuf,
    #[arg(long)]
    pub source_type: String,
    #[arg(long)]
    pub target_type: String,
    #[arg(long)]
    pub m: Option<usize>,
    /// comma-separated relations counted as engagements
    #[arg(long, value_delimiter = ',')]
    pub relations: Vec<String>,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// edges mentioning targets absent from the checkpoint
    #[arg(long, value_name = "FILE", num_args = 1.., requires = "oov_out")]
    pub oov_edges: Vec<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub oov_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IndexFlags {
    /// brute-force index instead of HNSW
    #[arg(long)]
    pub exact: bool,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub ef_construction: Option<usize>,
    #[arg(long)]
    pub ef_search: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum IndexCommand {
    Build {
        #[arg(long, value_name = "CKPT")]
        vectors: PathBuf,
        #[arg(long)]
        table: String,
        #[command(flatten)]
        index: IndexFlags,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    Query {
        #[arg(long, value_name = "FILE")]
        idx: PathBuf,
        #[arg(long)]
        query_id: String,
        #[arg(long)]
        k: Option<usize>,
        #[command(flatten)]
        source: QuerySourceArgs,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct QuerySourceArgs {
    /// mixture dump; queries each component's centroid
    #[arg(long, value_name = "FILE", requires = "centroids")]
    pub mixture: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub centroids: Option<PathBuf>,
    /// checkpoint holding the query entity; defaults to the index's source
    #[arg(long, value_name = "CKPT")]
    pub ckpt: Option<PathBuf>,
    #[arg(long)]
    pub query_type: Option<String>,
    /// translate the query embedding by this relation's vector
    #[arg(long)]
    pub relation: Option<String>,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long, value_name = "FILE")]
    pub idx: PathBuf,
    /// query ids, repeatable
    #[arg(long, num_args = 1..)]
    pub query_id: Vec<String>,
    /// file with one query id per line
    #[arg(long, value_name = "FILE")]
    pub queries: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[command(flatten)]
    pub source: QuerySourceArgs,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum PqCommand {
    Train {
        #[arg(long, value_name = "CKPT")]
        ckpt: PathBuf,
        #[arg(long)]
        table: String,
        /// number of subquantizers M
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        sample_rows: Option<usize>,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    Encode {
        #[arg(long, value_name = "CKPT")]
        ckpt: PathBuf,
        #[arg(long)]
        table: String,
        #[arg(long, value_name = "FILE")]
        codebook: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    Decode {
        #[arg(long, value_name = "FILE")]
        codes: PathBuf,
        #[arg(long, value_name = "FILE")]
        codebook: PathBuf,
        /// table name in the output checkpoint
        #[arg(long, default_value = "decoded")]
        table: String,
        #[arg(long, value_name = "CKPT")]
        out: PathBuf,
    },
    Report {
        #[arg(long, value_name = "CKPT")]
        ckpt: PathBuf,
        #[arg(long)]
        table: String,
        #[arg(long, value_name = "FILE")]
        codebook: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct RetrainArgs {
    #[arg(long, value_name = "CKPT")]
    pub prev: PathBuf,
    /// schema of the new version; defaults to the previous checkpoint's
    #[arg(long, value_name = "FILE")]
    pub schema: Option<PathBuf>,
    /// edge files of the new graph version, repeatable
    #[arg(long, value_name = "FILE", num_args = 1..)]
    pub edges: Vec<PathBuf>,
    /// warm | anchor | cold
    #[arg(long, value_parser = parse_from_str::<RetrainMode>)]
    pub mode: Option<RetrainMode>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// `--epochs` sets the retrain epochs here
    #[command(flatten)]
    pub train: TrainFlags,
    #[arg(long, value_name = "CKPT")]
    pub out: PathBuf,
    /// drift TSV; defaults to `<CKPT>.drift.tsv`
    #[arg(long, value_name = "FILE")]
    pub drift: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Hold out part of one relation's edges
    Split {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        relation: Option<String>,
        #[arg(long)]
        fraction: Option<f64>,
        #[arg(long, value_name = "FILE")]
        train_out: PathBuf,
        #[arg(long, value_name = "FILE")]
        test_out: PathBuf,
    },
    /// Recall@k and MRR of held-out edges against every target
    Linkpred {
        #[arg(long, value_name = "CKPT")]
        ckpt: PathBuf,
        #[arg(long, value_name = "FILE")]
        schema: Option<PathBuf>,
        /// held-out edges
        #[arg(long, value_name = "FILE")]
        split: PathBuf,
        /// train edges, needed by --filter-train
        #[arg(long, value_name = "FILE", num_args = 1..)]
        train_edges: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,
        #[arg(long)]
        filter_train: bool,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Relative cross entropy of predictions
    Rce {
        #[arg(long, value_name = "FILE")]
        labels: PathBuf,
        #[arg(long, value_name = "FILE")]
        preds: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

fn parse_from_str<T: std::str::FromStr<Err = Error>>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn set<T: Clone>(slot: &mut T, v: &Option<T>) {
    if let Some(v) = v {
        *slot = v.clone();
    }
}

impl TrainFlags {
    fn apply(&self, cfg: &mut PipelineConfig) {
        let t = &mut cfg.train;
        set(&mut t.dim, &self.dim);
        set(&mut t.epochs, &self.epochs);
        set(&mut t.partitions, &self.partitions);
        set(&mut t.negatives, &self.negatives);
        set(&mut t.negative_mix, &self.neg_mix);
        set(&mut t.learning_rate, &self.lr);
        set(&mut t.batch_size, &self.batch_size);
        set(&mut t.init_scale, &self.init_scale);
        set(&mut t.corrupt_side, &self.corrupt_side);
    }
}

impl IndexFlags {
    fn apply(&self, cfg: &mut PipelineConfig) {
        cfg.index.exact |= self.exact;
        set(&mut cfg.index.m, &self.m);
        set(&mut cfg.index.ef_construction, &self.ef_construction);
        set(&mut cfg.index.ef_search, &self.ef_search);
    }
}

impl GraphArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        if self.schema.is_some() {
            cfg.paths.schema = self.schema.clone();
        }
        if !self.edges.is_empty() {
            cfg.paths.edges = self.edges.clone();
        }
    }
}

impl Cli {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        set(&mut cfg.seed, &self.seed);
        set(&mut cfg.workers, &self.workers);
        match &self.command {
            Some(Command::Ingest(a) | Command::Coembed(a)) => a.graph.apply(&mut cfg),
            Some(Command::Train(a)) => {
                a.graph.apply(&mut cfg);
                a.train.apply(&mut cfg);
            }
            Some(Command::Cluster(a)) => {
                set(&mut cfg.cluster.k, &a.k);
                set(&mut cfg.cluster.max_iters, &a.max_iters);
                set(&mut cfg.cluster.batch_size, &a.batch_size);
            }
            Some(Command::Mixture(a)) => {
                set(&mut cfg.cluster.top_m, &a.m);
                if !a.relations.is_empty() {
                    cfg.cluster.relations = a.relations.clone();
                }
            }
            Some(Command::Index(IndexCommand::Build { index, .. })) => index.apply(&mut cfg),
            Some(Command::Index(IndexCommand::Query { k, .. })) | Some(Command::Query(QueryArgs { k, .. })) => {
                set(&mut cfg.index.k, k)
            }
            Some(Command::Pq(PqCommand::Train { m, sample_rows, .. })) => {
                set(&mut cfg.pq.subquantizers, m);
                set(&mut cfg.pq.sample_rows, sample_rows);
            }
            Some(Command::Pq(_)) => {}
            Some(Command::Retrain(a)) => {
                let epochs = cfg.train.epochs;
                a.train.apply(&mut cfg);
                cfg.train.epochs = epochs;
                set(&mut cfg.retrain.epochs, &a.train.epochs);
                set(&mut cfg.retrain.mode, &a.mode);
                set(&mut cfg.retrain.alpha, &a.alpha);
                if !a.edges.is_empty() {
                    cfg.paths.new_edges = a.edges.clone();
                }
            }
            Some(Command::Eval(EvalCommand::Split {
                graph,
                relation,
                fraction,
                ..
            })) => {
                graph.apply(&mut cfg);
                if relation.is_some() {
                    cfg.eval.relation = relation.clone();
                }
                set(&mut cfg.eval.holdout_fraction, fraction);
            }
            Some(Command::Eval(EvalCommand::Linkpred { k, filter_train, .. })) => {
                if !k.is_empty() {
                    cfg.eval.ks = k.clone();
                }
                cfg.eval.filter_train |= *filter_train;
            }
            Some(Command::Eval(EvalCommand::Rce { .. })) => {}
            Some(Command::Pipeline(a)) => set(&mut cfg.paths.out_dir, &a.out_dir),
            None => {}
        }
        Ok(cfg)
    }
}

/// Parse `argv` (program name first), run, and return the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid usage");
            eprintln!("error kind=usage message=\"{}\"", escape(first.trim_start_matches("error: ")));
            return 2;
        }
    };
    init_logging();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            exit_code(&e)
        }
    }
}

fn init_logging() {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .format_target(false)
        .try_init();
}

fn escape(s: &str) -> String {
    one_line(s).replace('\\', "\\\\").replace('"', "\\\"")
}

/// The single-line machine-parseable form of an error.
pub fn error_line(e: &Error) -> String {
    let mut line = format!("error kind={}", e.kind());
    if let Error::Io { path, .. } | Error::Parse { path, .. } = e {
        line.push_str(&format!(" path=\"{}\"", escape(&path.display().to_string())));
    }
    line.push_str(&format!(" message=\"{}\"", escape(&e.to_string())));
    line
}

pub fn exit_code(e: &Error) -> i32 {
    match e.kind() {
        "missing_file" => 2,
        "stage_order" => 3,
        _ => 1,
    }
}

fn require<'a>(v: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    v.as_deref()
        .ok_or_else(|| Error::Config(format!("{what} is required (flag or config)")))
}

fn execute(cli: &Cli) -> Result<()> {
    let cfg = cli.resolve()?;
    if cli.show_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let Some(command) = &cli.command else {
        return Err(Error::InvalidArgument("no subcommand given; see --help".into()));
    };
    cfg.validate()?;
    log::info!("seed {} workers {}", cfg.seed, cfg.workers);
    log::info!("resolved config: {}", one_line(&cfg.to_toml().replace('\n', "; ")));
    match command {
        Command::Ingest(a) => {
            stages::ingest(require(&cfg.paths.schema, "--schema")?, &cfg.paths.edges, &a.out)?;
        }
        Command::Coembed(a) => {
            let graph = stages::load_graph(require(&cfg.paths.schema, "--schema")?, &cfg.paths.edges)?;
            stages::coembed(&graph, &a.out)?;
        }
        Command::Train(a) => {
            let graph = stages::load_graph(require(&cfg.paths.schema, "--schema")?, &cfg.paths.edges)?;
            let report = a.report.clone().unwrap_or_else(|| with_suffix(&a.out, "loss.tsv"));
            stages::train_model(&cfg, &graph, &a.out, &report)?;
        }
        Command::Cluster(a) => {
            stages::cluster(&cfg, &a.ckpt, &a.table, &a.out)?;
        }
        Command::Mixture(a) => {
            let model = Model::load(&a.ckpt, None)?;
            stages::mixtures(&cfg, &model, &a.edges, &a.centroids, &a.source_type, &a.target_type, &a.out)?;
            if let Some(oov_out) = &a.oov_out {
                let n = stages::embed_oov(&model, &a.oov_edges, &a.centroids, &a.target_type, oov_out)?;
                log::info!("placed {n} out-of-vocabulary {} entities", a.target_type);
            }
        }
        Command::Index(IndexCommand::Build { vectors, table, out, .. }) => {
            stages::index_build(&cfg, vectors, table, out)?;
        }
        Command::Index(IndexCommand::Query {
            idx,
            query_id,
            source,
            out,
            ..
        }) => {
            let q = stages::Querier::open(idx, &source.to_source())?;
            let list = q.query(query_id, cfg.index.k)?;
            let mut text = b"rank\tid\tscore\tcomponent\n".to_vec();
            stages::write_candidates(&mut text, q.index(), &list, None).expect("in-memory write");
            stages::emit(out.as_deref(), &String::from_utf8(text).expect("utf-8 output"))?;
        }
        Command::Query(a) => {
            let mut ids = a.query_id.clone();
            if let Some(p) = &a.queries {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                ids.extend(text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(String::from));
            }
            if ids.is_empty() {
                return Err(Error::InvalidArgument("no query ids; pass --query-id or --queries".into()));
            }
            let q = stages::Querier::open(&a.idx, &a.source.to_source())?;
            let mut text = b"query_id\trank\tid\tscore\tcomponent\n".to_vec();
            for id in &ids {
                let list = q.query(id, cfg.index.k)?;
                stages::write_candidates(&mut text, q.index(), &list, Some(id)).expect("in-memory write");
            }
            stages::emit(a.out.as_deref(), &String::from_utf8(text).expect("utf-8 output"))?;
        }
        Command::Pq(PqCommand::Train { ckpt, table, out, .. }) => {
            stages::pq_train(&cfg, ckpt, table, out)?;
        }
        Command::Pq(PqCommand::Encode {
            ckpt,
            table,
            codebook,
            out,
        }) => {
            stages::pq_encode(ckpt, table, codebook, out)?;
        }
        Command::Pq(PqCommand::Decode {
            codes,
            codebook,
            table,
            out,
        }) => {
            stages::pq_decode(codes, codebook, table, out)?;
        }
        Command::Pq(PqCommand::Report {
            ckpt,
            table,
            codebook,
            out,
        }) => {
            stages::pq_report(ckpt, table, codebook, out.as_deref())?;
        }
        Command::Retrain(a) => {
            let prev = Model::load(&a.prev, None)?;
            if cfg.paths.new_edges.is_empty() {
                return Err(Error::Config("--edges is required".into()));
            }
            let schema = match &a.schema {
                Some(p) => crate::hin::Schema::load(p)?,
                None => prev.schema.clone(),
            };
            let graph = crate::hin::load_edge_files(&cfg.paths.new_edges, &schema)?;
            let drift = a.drift.clone().unwrap_or_else(|| with_suffix(&a.out, "drift.tsv"));
            stages::retrain_model(&cfg, &prev, &graph, &a.out, &drift)?;
        }
        Command::Eval(EvalCommand::Split { train_out, test_out, .. }) => {
            let graph = stages::load_graph(require(&cfg.paths.schema, "--schema")?, &cfg.paths.edges)?;
            let relation = cfg
                .eval
                .relation
                .as_deref()
                .ok_or_else(|| Error::Config("--relation is required".into()))?;
            stages::eval_split(&graph, relation, cfg.eval.holdout_fraction, cfg.seed, train_out, test_out)?;
        }
        Command::Eval(EvalCommand::Linkpred {
            ckpt,
            schema,
            split,
            train_edges,
            out,
            ..
        }) => {
            let model = Model::load(ckpt, schema.as_deref())?;
            let r = stages::eval_linkpred(&model, split, train_edges, &cfg.eval.ks, cfg.eval.filter_train)?;
            stages::emit(out.as_deref(), &stages::format_linkpred(&r))?;
        }
        Command::Eval(EvalCommand::Rce { labels, preds, out }) => {
            let r = stages::eval_rce(labels, preds)?;
            let n = std::fs::read_to_string(labels)
                .map_err(|e| Error::io(labels, e))?
                .lines()
                .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
                .count();
            stages::emit(out.as_deref(), &stages::format_rce(&r, n))?;
        }
        Command::Pipeline(_) => {
            if cli.config.is_none() {
                return Err(Error::Config("pipeline needs --config".into()));
            }
            let out = run_pipeline(&cfg)?;
            log::info!("pipeline artifacts in {}", out.display());
        }
    }
    Ok(())
}

impl QuerySourceArgs {
    fn to_source(&self) -> stages::QuerySource {
        stages::QuerySource {
            mixture: self.mixture.clone().zip(self.centroids.clone()),
            ckpt: self.ckpt.clone(),
            query_type: self.query_type.clone(),
            relation: self.relation.clone(),
        }
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("hin").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "seed = 3\n[train]\ndim = 8\nepochs = 4\n").unwrap();
        let p = path.to_str().unwrap();
        let cli = parse(&["--config", p, "train", "--epochs", "7", "--out", "x.ckpt"]);
        let cfg = cli.resolve().unwrap();
        assert_eq!((cfg.seed, cfg.train.dim, cfg.train.epochs), (3, 8, 7));
        let cli = parse(&["--config", p, "--seed", "11", "train", "--out", "x.ckpt"]);
        assert_eq!(cli.resolve().unwrap().seed, 11);
    }

    #[test]
    fn unknown_flag_is_a_single_line_usage_error() {
        assert_eq!(run(["hin", "train", "--bogus"]), 2);
        assert!(Cli::try_parse_from(["hin", "train", "--bogus"]).is_err());
    }

    #[test]
    fn missing_file_error_names_the_path() {
        let e = Error::io("/nope/schema.txt", std::io::Error::from(std::io::ErrorKind::NotFound));
        let line = error_line(&e);
        assert!(line.starts_with("error kind=missing_file path=\"/nope/schema.txt\""), "{line}");
        assert!(!line.contains('\n'));
        assert_eq!(exit_code(&e), 2);
    }

    #[test]
    fn stage_order_has_its_own_exit_code() {
        let e = stages::require_artifact(Path::new("/nope/index.hidx"), "index build").unwrap_err();
        assert_eq!(e.kind(), "stage_order");
        assert_eq!(exit_code(&e), 3);
    }

    #[test]
    fn retrain_mode_parses_from_flag() {
        let cli = parse(&["retrain", "--prev", "a", "--edges", "e", "--mode", "anchor", "--alpha", "5", "--epochs", "2", "--out", "b"]);
        let cfg = cli.resolve().unwrap();
        assert_eq!(cfg.retrain.epochs, 2);
        assert_eq!(cfg.train.epochs, PipelineConfig::default().train.epochs);
        assert_eq!(cfg.retrain.mode, RetrainMode::L2Anchored);
        assert_eq!(cfg.retrain.alpha, 5.0);
    }
}
