//! The end-to-end run: ingest, split, co-embed, train, cluster, mixture,
//! index, query, compress, retrain, eval. Every artifact lands under
//! `paths.out_dir`.

use std::collections::HashSet;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use super::config::PipelineConfig;
use super::stages::{self, Model, QuerySource, Querier};
use crate::error::{Error, Result};
use crate::hin::{load_edge_files, save_edges, Coverage, HinGraph, Schema};
use crate::trainer::build_coembedding_graphs;

/// Relative paths of the artifacts a pipeline run writes.
pub const ARTIFACTS: &[&str] = &[
    "ingest/schema.txt",
    "ingest/edges.tsv",
    "ingest/ids.tsv",
    "ingest/stats.tsv",
    "split/train.tsv",
    "split/held_out.tsv",
    "coembed/groups.tsv",
    "model.ckpt",
    "model.ckpt.ids",
    "model.ckpt.schema",
    "model.loss.tsv",
    "centroids.ckpt",
    "mixtures.tsv",
    "index.hidx",
    "queries.tsv",
    "pq/codebook.ckpt",
    "pq/codes.pqc",
    "pq/decoded.ckpt",
    "pq/report.tsv",
    "retrain/edges.tsv",
    "retrain/model.ckpt",
    "retrain/model.ckpt.ids",
    "retrain/model.ckpt.schema",
    "retrain/model.ckpt.loss.tsv",
    "retrain/drift.tsv",
    "eval/held_out.tsv",
    "eval/held_out_retrained.tsv",
    "eval/linkpred.tsv",
    "eval/linkpred_retrained.tsv",
    "eval/labels.txt",
    "eval/preds.txt",
    "eval/rce.tsv",
];

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let schema_file = cfg
        .paths
        .schema
        .as_deref()
        .ok_or_else(|| Error::Config("paths.schema is required".into()))?;
    let relation = cfg
        .eval
        .relation
        .as_deref()
        .ok_or_else(|| Error::Config("eval.relation is required".into()))?;
    let out = cfg.paths.out_dir.as_path();
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    log::info!("stage ingest");
    let full = stages::ingest(schema_file, &cfg.paths.edges, &out.join("ingest"))?;
    let schema = full.schema().clone();
    let rid = schema
        .relation_id(relation)
        .ok_or_else(|| Error::Config(format!("eval.relation {relation:?} is not in the schema")))?;
    let source_type = schema.entity_type(schema.relation(rid).source_type).name.clone();
    let target_type = schema.entity_type(schema.relation(rid).target_type).name.clone();

    log::info!("stage split");
    let train_file = out.join("split/train.tsv");
    let held_file = out.join("split/held_out.tsv");
    let split = stages::eval_split(&full, relation, cfg.eval.holdout_fraction, cfg.seed, &train_file, &held_file)?;

    log::info!("stage coembed");
    let groups = stages::coembed(&split.train, &out.join("coembed"))?;
    let (anchor, graph) = primary_group(&schema, relation, groups)?;
    log::info!("primary model: co-embedded graph anchored by {anchor}");

    log::info!("stage train");
    let ckpt = out.join("model.ckpt");
    stages::train_model(cfg, &graph, &ckpt, &out.join("model.loss.tsv"))?;
    let model = Model::load(&ckpt, None)?;
    let model_edges = out.join("coembed").join(&anchor).join("edges.tsv");

    log::info!("stage cluster");
    let centroids = out.join("centroids.ckpt");
    stages::cluster(cfg, &ckpt, &target_type, &centroids)?;

    log::info!("stage mixture");
    let mix_file = out.join("mixtures.tsv");
    let mixes = stages::mixtures(cfg, &model, &[model_edges], &centroids, &source_type, &target_type, &mix_file)?;

    log::info!("stage index");
    let idx = out.join("index.hidx");
    stages::index_build(cfg, &ckpt, &target_type, &idx)?;

    log::info!("stage query");
    let queries: Vec<String> = if cfg.index.queries.is_empty() {
        mixes
            .iter()
            .take(cfg.index.num_queries)
            .map(|(e, _)| model.ids.external(*e).to_string())
            .collect()
    } else {
        cfg.index.queries.clone()
    };
    let querier = Querier::open(
        &idx,
        &QuerySource {
            mixture: Some((mix_file.clone(), centroids.clone())),
            ckpt: Some(ckpt.clone()),
            query_type: Some(source_type.clone()),
            relation: None,
        },
    )?;
    let mut text = Vec::new();
    writeln!(text, "query_id\trank\tid\tscore\tcomponent").expect("in-memory write");
    for q in &queries {
        let list = querier.query(q, cfg.index.k)?;
        stages::write_candidates(&mut text, querier.index(), &list, Some(q)).expect("in-memory write");
    }
    let qpath = out.join("queries.tsv");
    fs::write(&qpath, text).map_err(|e| Error::io(&qpath, e))?;

    log::info!("stage pq");
    let pq = out.join("pq");
    let cb = pq.join("codebook.ckpt");
    let codes = pq.join("codes.pqc");
    stages::pq_train(cfg, &ckpt, &target_type, &cb)?;
    stages::pq_encode(&ckpt, &target_type, &cb, &codes)?;
    stages::pq_decode(&codes, &cb, &format!("entity/{target_type}"), &pq.join("decoded.ckpt"))?;
    stages::pq_report(&ckpt, &target_type, &cb, Some(&pq.join("report.tsv")))?;

    log::info!("stage retrain");
    let held: HashSet<(String, String)> = split
        .held_out_edges()
        .iter()
        .map(|e| (split.train.ids().external(e.source).to_string(), split.train.ids().external(e.target).to_string()))
        .collect();
    let next = next_version(&schema, &train_file, &cfg.paths.new_edges, relation, &held, &anchor)?;
    let retrain_dir = out.join("retrain");
    fs::create_dir_all(&retrain_dir).map_err(|e| Error::io(&retrain_dir, e))?;
    let next_edges = retrain_dir.join("edges.tsv");
    save_edges(&next, &next_edges)?;
    let rckpt = retrain_dir.join("model.ckpt");
    stages::retrain_model(cfg, &model, &next, &rckpt, &retrain_dir.join("drift.tsv"))?;
    let retrained = Model::load(&rckpt, None)?;

    log::info!("stage eval");
    let eval = out.join("eval");
    let base_edges = out.join("coembed").join(&anchor).join("edges.tsv");
    let held_in_model = restrict_to_model(&model, &held_file, &eval.join("held_out.tsv"))?;
    let lp = stages::eval_linkpred(&model, &held_in_model, &[base_edges], &cfg.eval.ks, cfg.eval.filter_train)?;
    stages::emit(Some(&eval.join("linkpred.tsv")), &stages::format_linkpred(&lp))?;
    let held_in_next = restrict_to_model(&retrained, &held_file, &eval.join("held_out_retrained.tsv"))?;
    let lp2 = stages::eval_linkpred(&retrained, &held_in_next, &[next_edges], &cfg.eval.ks, cfg.eval.filter_train)?;
    stages::emit(Some(&eval.join("linkpred_retrained.tsv")), &stages::format_linkpred(&lp2))?;
    let labels = eval.join("labels.txt");
    let preds = eval.join("preds.txt");
    let n = stages::score_held_out(&model, &held_in_model, cfg.eval.rce_negatives, cfg.seed, &labels, &preds)?;
    let r = stages::eval_rce(&labels, &preds)?;
    stages::emit(Some(&eval.join("rce.tsv")), &stages::format_rce(&r, n))?;
    log::info!(
        "eval: recall@{} {:.4}, mrr {:.4}, rce {:.3}",
        lp.recall[0].0,
        lp.recall[0].1,
        lp.mrr,
        r.rce
    );
    Ok(out.to_path_buf())
}

/// The co-embedded graph whose relations include `relation`: its own
/// anchor if it is high-coverage, else the first group.
fn primary_group(schema: &Schema, relation: &str, groups: Vec<(String, HinGraph)>) -> Result<(String, HinGraph)> {
    let rid = schema.relation_id(relation).expect("checked by caller");
    let is_high = schema.relation(rid).coverage == Coverage::High;
    groups
        .into_iter()
        .find(|(anchor, g)| if is_high { anchor == relation } else { g.schema().relation_id(relation).is_some() })
        .ok_or_else(|| Error::Config(format!("no co-embedded graph holds relation {relation:?}")))
}

/// The anchor group's graph after adding `new_edges` to the train split,
/// with held-out pairs of the evaluated relation removed.
fn next_version(
    schema: &Schema,
    train_file: &Path,
    new_edges: &[PathBuf],
    relation: &str,
    held: &HashSet<(String, String)>,
    anchor: &str,
) -> Result<HinGraph> {
    let mut files = vec![train_file.to_path_buf()];
    files.extend(new_edges.iter().cloned());
    let merged = load_edge_files(&files, schema)?;
    let rid = schema.relation_id(relation).expect("checked by caller");
    let ids = merged.ids();
    let edges: Vec<_> = merged
        .edges()
        .iter()
        .filter(|e| {
            e.relation != rid || !held.contains(&(ids.external(e.source).to_string(), ids.external(e.target).to_string()))
        })
        .copied()
        .collect();
    if edges.len() < merged.num_edges() {
        log::info!("dropped {} new edges that coincide with held-out pairs", merged.num_edges() - edges.len());
    }
    let graph = merged.with_edges(edges)?;
    build_coembedding_graphs(&graph)?
        .graphs
        .into_iter()
        .find(|g| g.anchor == anchor)
        .map(|g| g.graph)
        .ok_or_else(|| Error::Config(format!("anchor {anchor} vanished from the next version")))
}

/// Copy of the held-out edge file keeping only edges whose endpoints the
/// model embeds.
fn restrict_to_model(model: &Model, held: &Path, out: &Path) -> Result<PathBuf> {
    let text = fs::read_to_string(held).map_err(|e| Error::io(held, e))?;
    let known = |ty: &str, id: &str| model.entity_type(ty).ok().and_then(|t| model.ids.get(t, id)).is_some();
    let mut kept = String::new();
    let mut dropped = 0;
    for line in text.lines() {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() == 5 && known(f[0], f[1]) && known(f[3], f[4]) {
            kept.push_str(line);
            kept.push('\n');
        } else if !line.is_empty() && !line.starts_with('#') {
            dropped += 1;
        }
    }
    if dropped > 0 {
        log::info!("{dropped} held-out edges touch entities outside {}", model.path.display());
    }
    if let Some(dir) = out.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(out, kept).map_err(|e| Error::io(out, e))?;
    Ok(out.to_path_buf())
}
