//! Mixture dumps and centroid files.
//!
//! A dump line is `entity_type<TAB>external_id<TAB>cluster:weight[,cluster:weight...]`
//! with components in descending weight. The unimodal fallback is written
//! as `self:1`. Centroids are a checkpoint with a single `centroids` table.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::engagement::{MixtureComponent, MixtureRepresentation};
use super::kmeans::ClusterModel;
use crate::error::{Error, Result};
use crate::hin::{EntityRef, HinGraph};
use crate::store::{Checkpoint, EmbeddingStore};
use crate::vecmath::Matrix;

pub const CENTROIDS_TABLE: &str = "centroids";

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureRecord {
    pub entity_type: String,
    pub external_id: String,
    /// `(None, 1.0)` stands for the unimodal fallback
    pub components: Vec<(Option<usize>, f64)>,
}

impl MixtureRecord {
    /// Rebuild the representation with centroids from `model`; fallback
    /// components take the entity's row in `store`. Counts are not part of
    /// the dump and come back as zero.
    pub fn resolve(&self, model: &ClusterModel, store: Option<(&HinGraph, &EmbeddingStore)>) -> Result<MixtureRepresentation> {
        let components = self
            .components
            .iter()
            .map(|&(cluster, weight)| {
                let centroid = match cluster {
                    Some(c) if c < model.k() => model.centroid(c).to_vec(),
                    Some(c) => {
                        return Err(Error::InvalidArgument(format!(
                            "{}: cluster {c} outside model of {}",
                            self.external_id,
                            model.k()
                        )))
                    }
                    None => {
                        let (graph, store) = store.ok_or_else(|| {
                            Error::InvalidArgument(format!("{}: fallback mixture needs a checkpoint", self.external_id))
                        })?;
                        let e = graph.lookup(&self.entity_type, &self.external_id).ok_or_else(|| {
                            Error::InvalidArgument(format!("unknown entity {}:{}", self.entity_type, self.external_id))
                        })?;
                        store.entity_row(e).to_vec()
                    }
                };
                Ok(MixtureComponent {
                    cluster,
                    count: 0,
                    weight,
                    centroid,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MixtureRepresentation {
            components,
            kept_total: 0,
        })
    }
}

pub fn format_components(mix: &MixtureRepresentation) -> String {
    mix.components
        .iter()
        .map(|c| match c.cluster {
            Some(k) => format!("{k}:{}", c.weight),
            None => format!("self:{}", c.weight),
        })
        .collect::<Vec<_>>()
        .join(",")
}

pub fn write_mixtures<W: Write>(
    graph: &HinGraph,
    entities: impl IntoIterator<Item = (EntityRef, MixtureRepresentation)>,
    mut w: W,
) -> std::io::Result<()> {
    for (e, mix) in entities {
        writeln!(
            w,
            "{}\t{}\t{}",
            graph.schema().entity_type(e.entity_type).name,
            graph.ids().external(e),
            format_components(&mix)
        )?;
    }
    Ok(())
}

pub fn save_mixtures(
    graph: &HinGraph,
    entities: impl IntoIterator<Item = (EntityRef, MixtureRepresentation)>,
    path: &Path,
) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_mixtures(graph, entities, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn parse_mixtures<R: BufRead>(reader: R, origin: &Path) -> Result<Vec<MixtureRecord>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        let lineno = n + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::parse(origin, lineno, format!("expected 3 fields, found {}", fields.len())));
        }
        let mut components = Vec::new();
        for part in fields[2].split(',') {
            let (c, w) = part
                .split_once(':')
                .ok_or_else(|| Error::parse(origin, lineno, format!("component {part:?} lacks ':'")))?;
            let cluster = if c == "self" {
                None
            } else {
                Some(
                    c.parse::<usize>()
                        .map_err(|_| Error::parse(origin, lineno, format!("bad cluster {c:?}")))?,
                )
            };
            let weight: f64 = w
                .parse()
                .map_err(|_| Error::parse(origin, lineno, format!("bad weight {w:?}")))?;
            if !(weight > 0.0 && weight <= 1.0) {
                return Err(Error::parse(origin, lineno, format!("weight {weight} outside (0, 1]")));
            }
            components.push((cluster, weight));
        }
        let total: f64 = components.iter().map(|c| c.1).sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::parse(origin, lineno, format!("weights sum to {total}")));
        }
        out.push(MixtureRecord {
            entity_type: fields[0].to_string(),
            external_id: fields[1].to_string(),
            components,
        });
    }
    Ok(out)
}

pub fn load_mixtures(path: &Path) -> Result<Vec<MixtureRecord>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_mixtures(BufReader::new(f), path)
}

pub fn save_centroids(model: &ClusterModel, path: &Path) -> Result<()> {
    let mut ck = Checkpoint::new(model.dim());
    ck.push(CENTROIDS_TABLE, model.centroids.clone())?;
    ck.save(path)
}

pub fn load_centroids(path: &Path) -> Result<Matrix> {
    let mut ck = Checkpoint::load(path)?;
    ck.take(CENTROIDS_TABLE)
        .ok_or_else(|| Error::Checkpoint(format!("{}: no {CENTROIDS_TABLE} table", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_round_trip() {
        let text = "user\tu1\t3:0.75,0:0.25\nuser\tu2\tself:1\n";
        let recs = parse_mixtures(text.as_bytes(), Path::new("m.tsv")).unwrap();
        assert_eq!(recs[0].components, vec![(Some(3), 0.75), (Some(0), 0.25)]);
        assert_eq!(recs[1].components, vec![(None, 1.0)]);
        let model = ClusterModel::from_centroids(Matrix::zeros(4, 2), &Matrix::zeros(1, 2)).unwrap();
        let mix = recs[0].resolve(&model, None).unwrap();
        assert_eq!(format_components(&mix), "3:0.75,0:0.25");
        assert!(recs[1].resolve(&model, None).is_err());
    }

    #[test]
    fn malformed_lines_are_located() {
        for bad in ["user\tu1\n", "user\tu1\t3=0.5\n", "user\tu1\t3:0.5\n", "user\tu1\tx:1\n"] {
            match parse_mixtures(bad.as_bytes(), Path::new("m.tsv")) {
                Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
                other => panic!("{bad:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn centroids_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.ckpt");
        let pts = Matrix::from_rows(2, &[[1.0f32, 2.0], [3.0, 4.0]]);
        let model = ClusterModel::from_centroids(pts.clone(), &pts).unwrap();
        save_centroids(&model, &p).unwrap();
        assert_eq!(load_centroids(&p).unwrap(), pts);
    }
}
