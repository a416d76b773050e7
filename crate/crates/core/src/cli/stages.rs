//! One function per pipeline stage. Subcommands and `pipeline` both call
//! these; every artifact is written through them.

use std::collections::{BTreeSet, HashSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng as _;

use super::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::evalkit::{
    evaluate_linkpred, rce, split_edges, EvalSplit, LinkPredOptions, LinkPredResult, RceInput, RceResult,
};
use crate::hin::{
    load_edge_files, load_id_map, partition, read_edges_into, save_edges, save_id_map, write_edge_subset, Edge,
    EntityRef, EntityTypeId, GraphBuilder, HinGraph, IdMap, RelationId, Schema,
};
use crate::mixture::{
    build_mixtures, embed_oov_target, kmeans_with, load_centroids, load_mixtures, save_centroids, save_mixtures,
    ClusterModel, EngagementScope, KMeansConfig, MixtureRepresentation,
};
use crate::quantize::{
    compression_report, decode, encode, train_codebook_with, CompressionReport, PqCodebook, PqCodes, PqTrainConfig,
};
use crate::retrieval::{multi_query, translate_query, AnnIndex, CandidateList};
use crate::rng;
use crate::store::{Checkpoint, EmbeddingStore};
use crate::trainer::{build_coembedding_graphs, sigmoid, train, translated_dot, TrainReport};
use crate::vecmath::Matrix;
use crate::versioning::{retrain, RetrainOutcome};

/// Id-map sidecar written next to every model checkpoint.
pub fn ids_path(ckpt: &Path) -> PathBuf {
    sidecar(ckpt, "ids")
}

/// Schema sidecar written next to every model checkpoint.
pub fn schema_path(ckpt: &Path) -> PathBuf {
    sidecar(ckpt, "schema")
}

fn sidecar(path: &Path, ext: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// An input produced by an earlier stage; its absence is a stage-order error.
pub fn require_artifact(path: &Path, producer: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::StageOrder(format!(
            "{} does not exist; run `{producer}` first",
            path.display()
        )))
    }
}

fn check_outputs(outputs: &[&Path], inputs: &[&Path]) -> Result<()> {
    for o in outputs {
        if inputs.iter().any(|i| i == o) {
            return Err(Error::InvalidArgument(format!(
                "output {} would overwrite an input",
                o.display()
            )));
        }
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent().filter(|d| !d.as_os_str().is_empty()) {
        Some(dir) => fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)),
        None => Ok(()),
    }
}

/// A trained checkpoint with the schema and ids it was trained on.
#[derive(Debug, Clone)]
pub struct Model {
    pub path: PathBuf,
    pub schema: Schema,
    pub ids: IdMap,
    pub store: EmbeddingStore,
}

impl Model {
    /// Load `ckpt` with its sidecars; `schema` overrides the schema sidecar.
    pub fn load(ckpt: &Path, schema: Option<&Path>) -> Result<Self> {
        require_artifact(ckpt, "train")?;
        let schema = match schema {
            Some(p) => Schema::load(p)?,
            None => {
                let p = schema_path(ckpt);
                require_artifact(&p, "train")?;
                Schema::load(&p)?
            }
        };
        let ids_file = ids_path(ckpt);
        require_artifact(&ids_file, "train")?;
        let ids = load_id_map(&ids_file, &schema)?;
        let store = EmbeddingStore::load(ckpt)?;
        let model = Model {
            path: ckpt.to_path_buf(),
            schema,
            ids,
            store,
        };
        model.store.check_shape(&model.graph(&[])?)?;
        Ok(model)
    }

    /// Graph over exactly the checkpoint's entities plus the edges in `files`.
    /// An edge naming an entity the checkpoint lacks is an error.
    pub fn graph(&self, files: &[PathBuf]) -> Result<HinGraph> {
        let g = self.graph_allowing_new(files)?;
        for t in self.schema.entity_type_ids() {
            if g.entity_count(t) != self.ids.count(t) {
                let e = EntityRef::new(t, self.ids.count(t) as u32);
                return Err(Error::OutOfBounds {
                    entity: g.describe(e),
                    detail: format!("not present in checkpoint {}", self.path.display()),
                });
            }
        }
        Ok(g)
    }

    /// Like [`graph`](Self::graph) but unknown entities are appended after
    /// the checkpoint's own ids.
    pub fn graph_allowing_new(&self, files: &[PathBuf]) -> Result<HinGraph> {
        let mut b = self.builder()?;
        for p in files {
            let f = File::open(p).map_err(|e| Error::io(p, e))?;
            read_edges_into(BufReader::new(f), p, &mut b)?;
        }
        b.build()
    }

    fn builder(&self) -> Result<GraphBuilder> {
        let mut b = GraphBuilder::new(self.schema.clone());
        for t in self.schema.entity_type_ids() {
            let name = &self.schema.entity_type(t).name;
            for ext in self.ids.ids(t) {
                b.entity(name, ext)?;
            }
        }
        Ok(b)
    }

    pub fn entity_type(&self, name: &str) -> Result<EntityTypeId> {
        self.schema
            .entity_type_id(name)
            .ok_or_else(|| Error::InvalidArgument(format!("{}: unknown entity type {name:?}", self.path.display())))
    }

    pub fn relation(&self, name: &str) -> Result<RelationId> {
        self.schema
            .relation_id(name)
            .ok_or_else(|| Error::InvalidArgument(format!("{}: unknown relation {name:?}", self.path.display())))
    }
}

pub fn load_graph(schema: &Path, edges: &[PathBuf]) -> Result<HinGraph> {
    if edges.is_empty() {
        return Err(Error::InvalidArgument("no edge files given".into()));
    }
    let schema = Schema::load(schema)?;
    load_edge_files(edges, &schema)
}

/// Normalized copy of the network: schema, edges, id map and counts.
pub fn ingest(schema: &Path, edges: &[PathBuf], out_dir: &Path) -> Result<HinGraph> {
    let graph = load_graph(schema, edges)?;
    let s = graph.schema();
    let outputs = [out_dir.join("schema.txt"), out_dir.join("edges.tsv"), out_dir.join("ids.tsv")];
    let mut inputs: Vec<&Path> = edges.iter().map(PathBuf::as_path).collect();
    inputs.push(schema);
    check_outputs(&outputs.iter().map(PathBuf::as_path).collect::<Vec<_>>(), &inputs)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    s.save(&outputs[0])?;
    save_edges(&graph, &outputs[1])?;
    save_id_map(graph.ids(), s, &outputs[2])?;
    let mut per_relation = vec![0usize; s.num_relations()];
    for e in graph.edges() {
        per_relation[e.relation.index()] += 1;
    }
    write_file(&out_dir.join("stats.tsv"), |w| {
        writeln!(w, "kind\tname\tcount")?;
        for t in s.entity_type_ids() {
            writeln!(w, "entity\t{}\t{}", s.entity_type(t).name, graph.entity_count(t))?;
        }
        for r in s.relation_ids() {
            writeln!(w, "relation\t{}\t{}", s.relation(r).name, per_relation[r.index()])?;
        }
        writeln!(w, "total\tedges\t{}", graph.num_edges())
    })?;
    log::info!(
        "ingested {} entities and {} edges into {}",
        graph.num_entities(),
        graph.num_edges(),
        out_dir.display()
    );
    Ok(graph)
}

/// One `(anchor, schema, edges)` directory per high-coverage relation.
pub fn coembed(graph: &HinGraph, out_dir: &Path) -> Result<Vec<(String, HinGraph)>> {
    let plan = build_coembedding_graphs(graph)?;
    for w in &plan.warnings {
        log::warn!("{w}");
    }
    let mut out = Vec::new();
    let mut groups = String::from("anchor\trelations\tentities\tedges\n");
    for cg in plan.graphs {
        let dir = out_dir.join(&cg.anchor);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        cg.graph.schema().save(&dir.join("schema.txt"))?;
        save_edges(&cg.graph, &dir.join("edges.tsv"))?;
        let s = cg.graph.schema();
        let rels: Vec<&str> = s.relation_ids().map(|r| s.relation(r).name.as_str()).collect();
        groups.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            cg.anchor,
            rels.join(","),
            cg.graph.num_entities(),
            cg.graph.num_edges()
        ));
        out.push((cg.anchor, cg.graph));
    }
    let path = out_dir.join("groups.tsv");
    fs::write(&path, groups).map_err(|e| Error::io(&path, e))?;
    Ok(out)
}

/// Train from scratch and write the checkpoint, its sidecars and the loss report.
pub fn train_model(cfg: &PipelineConfig, graph: &HinGraph, out: &Path, report: &Path) -> Result<(EmbeddingStore, TrainReport)> {
    let tc = cfg.train_config();
    tc.validate()?;
    let parts = partition(graph, tc.num_partitions, cfg.seed)?;
    let init = EmbeddingStore::init(graph, cfg.train.dim, cfg.seed, cfg.train.init_scale)?;
    let (store, rep) = train(graph, &parts, init, &tc)?;
    save_model(&store, graph, out)?;
    write_file(report, |w| rep.write_tsv(w))?;
    if let Some(last) = rep.epochs().checked_sub(1).and_then(|e| rep.epoch_mean_loss(e)) {
        log::info!("trained {} epochs, final mean loss {last:.6}", rep.epochs());
    }
    Ok((store, rep))
}

pub fn save_model(store: &EmbeddingStore, graph: &HinGraph, out: &Path) -> Result<()> {
    ensure_parent(out)?;
    store.save(out)?;
    graph.schema().save(&schema_path(out))?;
    save_id_map(graph.ids(), graph.schema(), &ids_path(out))
}

/// Row ids for a checkpoint table: external ids for `entity/<type>` tables
/// with an id sidecar, row numbers otherwise.
fn table_with_ids(ckpt: &Path, table: &str) -> Result<(String, Vec<String>, Matrix)> {
    let mut ck = Checkpoint::load(ckpt)?;
    let name = if ck.get(table).is_some() {
        table.to_string()
    } else {
        format!("entity/{table}")
    };
    let matrix = ck.take(&name).ok_or_else(|| {
        Error::InvalidArgument(format!("{} has no table {table:?} (nor entity/{table})", ckpt.display()))
    })?;
    let entity_type = name.strip_prefix("entity/").unwrap_or(&name).to_string();
    let sidecar = ids_path(ckpt);
    let ids = match (name.strip_prefix("entity/"), schema_path(ckpt).exists() && sidecar.exists()) {
        (Some(t), true) => {
            let schema = Schema::load(&schema_path(ckpt))?;
            let ids = load_id_map(&sidecar, &schema)?;
            let tid = schema.entity_type_id(t).ok_or_else(|| Error::Schema(format!("unknown entity type {t:?}")))?;
            ids.ids(tid).to_vec()
        }
        _ => (0..matrix.rows()).map(|i| i.to_string()).collect(),
    };
    if ids.len() != matrix.rows() {
        return Err(Error::Shape(format!(
            "table {name} has {} rows but {} ids",
            matrix.rows(),
            ids.len()
        )));
    }
    Ok((entity_type, ids, matrix))
}

pub fn cluster(cfg: &PipelineConfig, ckpt: &Path, table: &str, out: &Path) -> Result<ClusterModel> {
    require_artifact(ckpt, "train")?;
    check_outputs(&[out], &[ckpt])?;
    let (_, _, points) = table_with_ids(ckpt, table)?;
    let k = cfg.cluster.k.min(points.rows());
    if k < cfg.cluster.k {
        log::warn!("cluster.k = {} exceeds the {} rows of {table}; using k = {k}", cfg.cluster.k, points.rows());
    }
    let mut kc = KMeansConfig::new(k, cfg.seed).max_iters(cfg.cluster.max_iters);
    kc.batch_size = Some(cfg.cluster.batch_size).filter(|&b| b > 0);
    let model = kmeans_with(&points, &kc)?;
    ensure_parent(out)?;
    save_centroids(&model, out)?;
    log::info!("clustered {} rows into {k} clusters, inertia {:.6}", points.rows(), model.inertia());
    Ok(model)
}

/// Mixtures for every `source_type` entity of `model`, engagements read from `edges`.
pub fn mixtures(
    cfg: &PipelineConfig,
    model: &Model,
    edges: &[PathBuf],
    centroids: &Path,
    source_type: &str,
    target_type: &str,
    out: &Path,
) -> Result<Vec<(EntityRef, MixtureRepresentation)>> {
    require_artifact(centroids, "cluster")?;
    let graph = model.graph(edges)?;
    let st = model.entity_type(source_type)?;
    let tt = model.entity_type(target_type)?;
    let clusters = ClusterModel::from_centroids(load_centroids(centroids)?, model.store.entity_table(tt))?;
    let mut scope = EngagementScope::new(tt);
    if !cfg.cluster.relations.is_empty() {
        scope = scope.relations(cfg.cluster.relations.iter().map(|r| model.relation(r)).collect::<Result<_>>()?);
    }
    let mixes = build_mixtures(&graph, &model.store, &clusters, st, &scope, cfg.cluster.top_m)?;
    let fallback = mixes.iter().filter(|m| m.is_fallback()).count();
    if fallback > 0 {
        log::info!("{fallback} of {} {source_type} entities use the unimodal fallback", mixes.len());
    }
    let pairs: Vec<(EntityRef, MixtureRepresentation)> = graph.entities_of_type(st).zip(mixes).collect();
    ensure_parent(out)?;
    save_mixtures(&graph, pairs.iter().cloned(), out)?;
    Ok(pairs)
}

/// Nearest-centroid placement for `target_type` entities that appear in
/// `edges` but not in the checkpoint. Edges of relations outside the
/// checkpoint's schema are skipped. Writes `entity_type, id, cluster`.
pub fn embed_oov(model: &Model, edges: &[PathBuf], centroids: &Path, target_type: &str, out: &Path) -> Result<usize> {
    require_artifact(centroids, "cluster")?;
    let mut b = model.builder()?;
    let mut skipped = 0;
    for p in edges {
        let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        let known: String = text
            .lines()
            .filter(|l| {
                let keep = l.split('\t').nth(2).is_none_or(|r| model.schema.relation_id(r).is_some());
                skipped += usize::from(!keep);
                keep
            })
            .flat_map(|l| [l, "\n"])
            .collect();
        read_edges_into(known.as_bytes(), p, &mut b)?;
    }
    if skipped > 0 {
        log::info!("skipped {skipped} edges of relations the checkpoint does not embed");
    }
    let graph = b.build()?;
    let tt = model.entity_type(target_type)?;
    let clusters = ClusterModel::from_centroids(load_centroids(centroids)?, model.store.entity_table(tt))?;
    let known = model.ids.count(tt);
    let mut rows = Vec::new();
    for e in graph.entities_of_type(tt).skip(known) {
        let neighbors: Vec<EntityRef> = graph
            .incident_edges(e)
            .iter()
            .filter_map(|&i| graph.edges()[i as usize].other(e))
            .collect();
        let cluster = match embed_oov_target(&neighbors, &model.store, &clusters) {
            Ok(a) => a.cluster.to_string(),
            Err(Error::NoKnownNeighbors) => "none".to_string(),
            Err(other) => return Err(other),
        };
        rows.push((graph.ids().external(e).to_string(), cluster));
    }
    write_file(out, |w| {
        writeln!(w, "entity_type\tid\tcluster")?;
        for (id, c) in &rows {
            writeln!(w, "{target_type}\t{id}\t{c}")?;
        }
        Ok(())
    })?;
    Ok(rows.len())
}

pub fn index_build(cfg: &PipelineConfig, ckpt: &Path, table: &str, out: &Path) -> Result<AnnIndex> {
    require_artifact(ckpt, "train")?;
    check_outputs(&[out], &[ckpt])?;
    let (entity_type, ids, vectors) = table_with_ids(ckpt, table)?;
    let index = AnnIndex::build(&entity_type, ids, vectors, cfg.index_kind())?.with_source(ckpt);
    ensure_parent(out)?;
    index.save(out)?;
    log::info!("indexed {} {entity_type} vectors of dim {}", index.len(), index.dim());
    Ok(index)
}

/// How a query entity becomes one or more query vectors.
#[derive(Debug, Clone, Default)]
pub struct QuerySource {
    /// mixture dump; its centroids file must be given too
    pub mixture: Option<(PathBuf, PathBuf)>,
    /// checkpoint holding the query entity; defaults to the index's source
    pub ckpt: Option<PathBuf>,
    /// entity type of the query ids; defaults to the index's type
    pub query_type: Option<String>,
    /// translate single-vector queries by this relation
    pub relation: Option<String>,
}

pub struct Querier {
    index: AnnIndex,
    model: Option<Model>,
    mixtures: Option<(Vec<crate::mixture::MixtureRecord>, ClusterModel)>,
    query_type: String,
    relation: Option<RelationId>,
}

impl Querier {
    pub fn open(idx: &Path, source: &QuerySource) -> Result<Self> {
        require_artifact(idx, "index build")?;
        let index = AnnIndex::load(idx)?;
        let query_type = source.query_type.clone().unwrap_or_else(|| index.entity_type().to_string());
        let ckpt = source.ckpt.clone().or_else(|| index.source().map(Path::to_path_buf));
        let model = match &ckpt {
            Some(c) => Some(Model::load(c, None)?),
            None => None,
        };
        let mixtures = match &source.mixture {
            Some((mix, centroids)) => {
                require_artifact(mix, "mixture")?;
                require_artifact(centroids, "cluster")?;
                let c = load_centroids(centroids)?;
                let k = c.rows();
                let clusters = ClusterModel {
                    centroids: c,
                    assignment: Vec::new(),
                    inertia_history: Vec::new(),
                };
                log::info!("loaded {k} centroids");
                Some((load_mixtures(mix)?, clusters))
            }
            None => None,
        };
        let relation = match (&source.relation, &model) {
            (Some(r), Some(m)) => Some(m.relation(r)?),
            (Some(_), None) => {
                return Err(Error::InvalidArgument("--relation needs a checkpoint".into()));
            }
            (None, _) => None,
        };
        Ok(Querier {
            index,
            model,
            mixtures,
            query_type,
            relation,
        })
    }

    pub fn index(&self) -> &AnnIndex {
        &self.index
    }

    pub fn query(&self, id: &str, k: usize) -> Result<CandidateList> {
        if let Some((records, clusters)) = &self.mixtures {
            let rec = records
                .iter()
                .find(|r| r.entity_type == self.query_type && r.external_id == id)
                .ok_or_else(|| Error::InvalidArgument(format!("no mixture for {}:{id}", self.query_type)))?;
            let graph = self.model.as_ref().map(|m| m.graph(&[])).transpose()?;
            let store = self.model.as_ref().map(|m| &m.store);
            let mix = rec.resolve(clusters, graph.as_ref().zip(store))?;
            return multi_query(&self.index, &mix, k.max(mix.len()));
        }
        let v = self.vector(id)?;
        self.index.query_topk(&v, k)
    }

    fn vector(&self, id: &str) -> Result<Vec<f32>> {
        let model = self
            .model
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("index records no source checkpoint; pass --ckpt".into()))?;
        let t = model.entity_type(&self.query_type)?;
        let local = model.ids.get(t, id).ok_or_else(|| Error::OutOfBounds {
            entity: format!("{}:{id}", self.query_type),
            detail: format!("not present in checkpoint {}", model.path.display()),
        })?;
        let row = model.store.entity_row(EntityRef::new(t, local));
        Ok(match self.relation {
            Some(r) => translate_query(row, model.store.relation_row(r)),
            None => row.to_vec(),
        })
    }
}

pub fn write_candidates<W: Write>(w: &mut W, index: &AnnIndex, list: &CandidateList, query: Option<&str>) -> std::io::Result<()> {
    for (rank, c) in list.items.iter().enumerate() {
        if let Some(q) = query {
            write!(w, "{q}\t")?;
        }
        writeln!(w, "{}\t{}\t{}\t{}", rank + 1, index.external_id(c.id), c.score, c.component)?;
    }
    Ok(())
}

pub fn pq_train(cfg: &PipelineConfig, ckpt: &Path, table: &str, out: &Path) -> Result<PqCodebook> {
    require_artifact(ckpt, "train")?;
    check_outputs(&[out], &[ckpt])?;
    let (_, _, m) = table_with_ids(ckpt, table)?;
    let pc = PqTrainConfig {
        sample_rows: cfg.pq.sample_rows,
        max_iters: cfg.pq.max_iters,
        ..PqTrainConfig::new(cfg.pq.subquantizers, cfg.seed)
    };
    let cb = train_codebook_with(&m, &pc)?;
    ensure_parent(out)?;
    cb.save(out)?;
    Ok(cb)
}

pub fn pq_encode(ckpt: &Path, table: &str, codebook: &Path, out: &Path) -> Result<PqCodes> {
    require_artifact(ckpt, "train")?;
    require_artifact(codebook, "pq train")?;
    check_outputs(&[out], &[ckpt, codebook])?;
    let (_, _, m) = table_with_ids(ckpt, table)?;
    let codes = encode(&m, &PqCodebook::load(codebook)?)?;
    ensure_parent(out)?;
    codes.save(out)?;
    Ok(codes)
}

/// Decode to a checkpoint with one table named `table`.
pub fn pq_decode(codes: &Path, codebook: &Path, table: &str, out: &Path) -> Result<Matrix> {
    require_artifact(codes, "pq encode")?;
    require_artifact(codebook, "pq train")?;
    check_outputs(&[out], &[codes, codebook])?;
    let cb = PqCodebook::load(codebook)?;
    let m = decode(&PqCodes::load(codes)?, &cb)?;
    let mut ck = Checkpoint::new(cb.dim());
    ck.push(table, m.clone())?;
    ensure_parent(out)?;
    ck.save(out)?;
    Ok(m)
}

pub fn pq_report(ckpt: &Path, table: &str, codebook: &Path, out: Option<&Path>) -> Result<CompressionReport> {
    require_artifact(ckpt, "train")?;
    require_artifact(codebook, "pq train")?;
    let (_, _, m) = table_with_ids(ckpt, table)?;
    let r = compression_report(&m, &PqCodebook::load(codebook)?)?;
    let text = format!(
        "metric\tvalue\ndim\t{}\nsubquantizers\t{}\nrows\t{}\nfactor\t{}\ncodebook_bytes\t{}\namortized_factor\t{}\nmse\t{}\nmax_row_error\t{}\n",
        r.dim, r.num_subquantizers, r.rows, r.factor, r.codebook_bytes, r.amortized_factor, r.mse, r.max_row_error
    );
    emit(out, &text)?;
    Ok(r)
}

/// Retrain `prev` on `graph` and write the checkpoint, sidecars, loss report and drift TSV.
pub fn retrain_model(cfg: &PipelineConfig, prev: &Model, graph: &HinGraph, out: &Path, drift: &Path) -> Result<RetrainOutcome> {
    check_outputs(&[out], &[&prev.path])?;
    let outcome = retrain(graph, &prev.store, &prev.ids, &cfg.retrain_policy(), &cfg.retrain_config())?;
    save_model(&outcome.store, graph, out)?;
    write_file(drift, |w| outcome.drift.write_tsv(w))?;
    write_file(&sidecar(out, "loss.tsv"), |w| outcome.report.write_tsv(w))?;
    log::info!(
        "retrained ({:?}): mean drift {:.6}, max drift {:.6}",
        cfg.retrain.mode,
        outcome.drift.mean_l2,
        outcome.drift.max_l2
    );
    Ok(outcome)
}

/// Hold out a fraction of `relation`'s targets; writes train and held-out edge files.
pub fn eval_split(graph: &HinGraph, relation: &str, fraction: f64, seed: u64, train_out: &Path, test_out: &Path) -> Result<EvalSplit> {
    let rid = graph
        .schema()
        .relation_id(relation)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown relation {relation:?}")))?;
    let split = split_edges(graph, rid, fraction, seed)?;
    ensure_parent(train_out)?;
    save_edges(&split.train, train_out)?;
    let held = split.held_out_edges();
    write_file(test_out, |w| write_edge_subset(&split.train, held.iter(), w))?;
    log::info!("held out {} {relation} edges of {} sources", held.len(), split.held_out.len());
    Ok(split)
}

/// Link prediction of `model` on the held-out edges in `split`; the train
/// graph is the checkpoint's entities plus `train_edges`.
pub fn eval_linkpred(model: &Model, split: &Path, train_edges: &[PathBuf], ks: &[usize], filter_train: bool) -> Result<LinkPredResult> {
    let held_graph = model.graph(&[split.to_path_buf()])?;
    let held: Vec<Edge> = held_graph.edges().to_vec();
    let relation = held
        .first()
        .map(|e| e.relation)
        .ok_or_else(|| Error::Eval(format!("{} holds no edges", split.display())))?;
    let train_graph = model.graph(train_edges)?;
    let es = EvalSplit::from_edges(train_graph, relation, &held)?;
    evaluate_linkpred(&model.store, &es, ks, LinkPredOptions { filter_train })
}

pub fn format_linkpred(r: &LinkPredResult) -> String {
    let mut s = format!("metric\tvalue\nqueries\t{}\n", r.queries);
    for (k, v) in &r.recall {
        s.push_str(&format!("recall@{k}\t{v}\n"));
    }
    s.push_str(&format!("mrr\t{}\n", r.mrr));
    s
}

fn read_column<T: std::str::FromStr>(path: &Path) -> Result<Vec<T>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let v = line.trim();
        if v.is_empty() || v.starts_with('#') {
            continue;
        }
        out.push(
            v.parse()
                .map_err(|_| Error::parse(path, i + 1, format!("not a number: {v:?}")))?,
        );
    }
    Ok(out)
}

/// RCE of predictions against labels, one value per line in each file.
pub fn eval_rce(labels: &Path, preds: &Path) -> Result<RceResult> {
    let l: Vec<u8> = read_column(labels)?;
    let p: Vec<f64> = read_column(preds)?;
    let r = rce(&RceInput::new(l, p))?;
    if r.clipped > 0 {
        log::warn!("{} predictions clipped into [1e-9, 1 - 1e-9]", r.clipped);
    }
    Ok(r)
}

pub fn format_rce(r: &RceResult, n: usize) -> String {
    format!(
        "metric\tvalue\nn\t{n}\nprior\t{}\ncross_entropy\t{}\nreference_cross_entropy\t{}\nrce\t{}\nclipped\t{}\n",
        r.prior, r.cross_entropy, r.reference_cross_entropy, r.rce, r.clipped
    )
}

/// Labels and sigmoid scores for held-out positives and `negatives` random
/// same-type targets per positive that are not linked to the source.
pub fn score_held_out(model: &Model, split: &Path, negatives: usize, seed: u64, labels_out: &Path, preds_out: &Path) -> Result<usize> {
    let graph = model.graph(&[split.to_path_buf()])?;
    let store = &model.store;
    let linked: HashSet<(EntityRef, EntityRef)> = graph.edges().iter().map(|e| (e.source, e.target)).collect();
    let mut rng = rng::rng_for(seed, &[0x726365]);
    let mut labels = String::new();
    let mut preds = String::new();
    let mut n = 0;
    let score = |s: EntityRef, r: RelationId, t: EntityRef| {
        sigmoid(translated_dot(store.entity_row(s), store.relation_row(r), store.entity_row(t)))
    };
    for e in graph.edges() {
        labels.push_str("1\n");
        preds.push_str(&format!("{}\n", score(e.source, e.relation, e.target)));
        n += 1;
        let count = graph.entity_count(e.target.entity_type);
        let mut drawn = BTreeSet::new();
        for _ in 0..negatives {
            for _ in 0..100 {
                let t = EntityRef::new(e.target.entity_type, rng.gen_range(0..count as u32));
                if t != e.target && !linked.contains(&(e.source, t)) && drawn.insert(t) {
                    labels.push_str("0\n");
                    preds.push_str(&format!("{}\n", score(e.source, e.relation, t)));
                    n += 1;
                    break;
                }
            }
        }
    }
    ensure_parent(labels_out)?;
    fs::write(labels_out, labels).map_err(|e| Error::io(labels_out, e))?;
    fs::write(preds_out, preds).map_err(|e| Error::io(preds_out, e))?;
    Ok(n)
}

/// Write `text` to `out`, or stdout when `out` is `None`.
pub fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            ensure_parent(p)?;
            fs::write(p, text).map_err(|e| Error::io(p, e))
        }
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes())
                .and_then(|_| so.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}
