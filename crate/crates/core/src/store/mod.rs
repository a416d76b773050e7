//! Dense parameter tables: entity embeddings, relation translation vectors
//! and the matching Adagrad accumulators.

mod checkpoint;
mod lease;

use std::path::Path;

use rand::Rng as _;

pub use checkpoint::{Checkpoint, FORMAT_VERSION, MAGIC};
pub use lease::{BucketView, RelationBlock, ShardedStore};

use crate::error::{Error, Result};
use crate::hin::{EntityRef, EntityTypeId, HinGraph, RelationId};
use crate::rng;
use crate::vecmath::Matrix;

pub const DEFAULT_DIM: usize = 64;
pub const DEFAULT_INIT_SCALE: f32 = 0.1;

const ENTITY_PREFIX: &str = "entity/";
const RELATION_PREFIX: &str = "relation/";
const ACCUM_PREFIX: &str = "adagrad/";

/// Read access to entity and relation vectors.
pub trait Params {
    fn dim(&self) -> usize;
    fn entity(&self, e: EntityRef) -> Result<&[f32]>;
    fn relation(&self, r: RelationId) -> Result<&[f32]>;
}

/// Mutable access to a parameter row together with its accumulator row.
pub trait ParamsMut: Params {
    fn entity_slot(&mut self, e: EntityRef) -> Result<(&mut [f32], &mut [f32])>;
    fn relation_slot(&mut self, r: RelationId) -> Result<(&mut [f32], &mut [f32])>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    entity_types: Vec<String>,
    relation_names: Vec<String>,
    entities: Vec<Matrix>,
    entity_accum: Vec<Matrix>,
    relations: Matrix,
    relation_accum: Matrix,
}

impl EmbeddingStore {
    /// All-zero store shaped after `graph`.
    pub fn zeros(graph: &HinGraph, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("embedding dimension must be positive".into()));
        }
        let schema = graph.schema();
        let entities: Vec<Matrix> = schema
            .entity_type_ids()
            .map(|t| Matrix::zeros(graph.entity_count(t), dim))
            .collect();
        Ok(EmbeddingStore {
            dim,
            entity_types: schema.entity_types().iter().map(|t| t.name.clone()).collect(),
            relation_names: schema.relations().iter().map(|r| r.name.clone()).collect(),
            entity_accum: entities.clone(),
            entities,
            relations: Matrix::zeros(schema.num_relations(), dim),
            relation_accum: Matrix::zeros(schema.num_relations(), dim),
        })
    }

    /// Entity rows i.i.d. uniform in `[-scale, scale]`, relations and
    /// accumulators zero.
    pub fn init(graph: &HinGraph, dim: usize, seed: u64, scale: f32) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("init scale must be positive, got {scale}")));
        }
        let mut store = Self::zeros(graph, dim)?;
        for (t, table) in store.entities.iter_mut().enumerate() {
            let mut rng = rng::rng_for(seed, &[0x696e_6974, t as u64]);
            for v in table.as_mut_slice() {
                *v = rng.gen_range(-scale..=scale);
            }
        }
        Ok(store)
    }

    /// Fill one entity row with a fresh uniform draw.
    pub fn randomize_row(&mut self, e: EntityRef, rng: &mut impl rand::Rng, scale: f32) {
        for v in self.entities[e.entity_type.index()].row_mut(e.local()) {
            *v = rng.gen_range(-scale..=scale);
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entity_type_names(&self) -> &[String] {
        &self.entity_types
    }

    pub fn relation_names(&self) -> &[String] {
        &self.relation_names
    }

    pub fn entity_type_index(&self, name: &str) -> Option<usize> {
        self.entity_types.iter().position(|n| n == name)
    }

    pub fn relation_index(&self, name: &str) -> Option<usize> {
        self.relation_names.iter().position(|n| n == name)
    }

    pub fn entity_table(&self, t: EntityTypeId) -> &Matrix {
        &self.entities[t.index()]
    }

    pub fn entity_table_mut(&mut self, t: EntityTypeId) -> &mut Matrix {
        &mut self.entities[t.index()]
    }

    pub fn entity_accum_table(&self, t: EntityTypeId) -> &Matrix {
        &self.entity_accum[t.index()]
    }

    pub fn relation_table(&self) -> &Matrix {
        &self.relations
    }

    pub fn relation_accum_table(&self) -> &Matrix {
        &self.relation_accum
    }

    pub fn entity_row(&self, e: EntityRef) -> &[f32] {
        self.entities[e.entity_type.index()].row(e.local())
    }

    pub fn entity_row_mut(&mut self, e: EntityRef) -> &mut [f32] {
        self.entities[e.entity_type.index()].row_mut(e.local())
    }

    pub fn relation_row(&self, r: RelationId) -> &[f32] {
        self.relations.row(r.index())
    }

    pub fn relation_row_mut(&mut self, r: RelationId) -> &mut [f32] {
        self.relations.row_mut(r.index())
    }

    pub fn entity_accum_row_mut(&mut self, e: EntityRef) -> &mut [f32] {
        self.entity_accum[e.entity_type.index()].row_mut(e.local())
    }

    pub fn relation_accum_row_mut(&mut self, r: RelationId) -> &mut [f32] {
        self.relation_accum.row_mut(r.index())
    }

    pub fn entity_count(&self, t: EntityTypeId) -> usize {
        self.entities.get(t.index()).map_or(0, Matrix::rows)
    }

    /// Shapes agree with the graph's schema and entity counts.
    pub fn check_shape(&self, graph: &HinGraph) -> Result<()> {
        let schema = graph.schema();
        if self.entity_types.len() != schema.num_entity_types()
            || self.relation_names.len() != schema.num_relations()
        {
            return Err(Error::Shape("store and graph declare different type counts".into()));
        }
        for t in schema.entity_type_ids() {
            if self.entity_types[t.index()] != schema.entity_type(t).name {
                return Err(Error::Shape(format!(
                    "entity type {} does not match store table {}",
                    schema.entity_type(t).name,
                    self.entity_types[t.index()]
                )));
            }
            if self.entities[t.index()].rows() != graph.entity_count(t) {
                return Err(Error::Shape(format!(
                    "table {} has {} rows, graph has {} entities",
                    self.entity_types[t.index()],
                    self.entities[t.index()].rows(),
                    graph.entity_count(t)
                )));
            }
        }
        for r in schema.relation_ids() {
            if self.relation_names[r.index()] != schema.relation(r).name {
                return Err(Error::Shape(format!("relation {} not in store", schema.relation(r).name)));
            }
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.entities.iter().all(Matrix::all_finite) && self.relations.all_finite()
    }

    pub fn accumulators_nonnegative(&self) -> bool {
        self.entity_accum
            .iter()
            .chain(std::iter::once(&self.relation_accum))
            .all(|m| m.as_slice().iter().all(|&v| v >= 0.0))
    }

    /// Equality on the raw bit patterns of every parameter.
    pub fn bitwise_eq(&self, other: &EmbeddingStore) -> bool {
        fn same(a: &Matrix, b: &Matrix) -> bool {
            a.rows() == b.rows()
                && a.cols() == b.cols()
                && a.as_slice().iter().zip(b.as_slice()).all(|(x, y)| x.to_bits() == y.to_bits())
        }
        self.dim == other.dim
            && self.entity_types == other.entity_types
            && self.relation_names == other.relation_names
            && self.entities.len() == other.entities.len()
            && self.entities.iter().zip(&other.entities).all(|(a, b)| same(a, b))
            && self.entity_accum.iter().zip(&other.entity_accum).all(|(a, b)| same(a, b))
            && same(&self.relations, &other.relations)
            && same(&self.relation_accum, &other.relation_accum)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new(self.dim);
        for (name, m) in self.entity_types.iter().zip(&self.entities) {
            ck.push(format!("{ENTITY_PREFIX}{name}"), m.clone()).expect("unique names");
        }
        for (i, name) in self.relation_names.iter().enumerate() {
            ck.push(format!("{RELATION_PREFIX}{name}"), Matrix::from_vec(1, self.dim, self.relations.row(i).to_vec()))
                .expect("unique names");
        }
        for (name, m) in self.entity_types.iter().zip(&self.entity_accum) {
            ck.push(format!("{ACCUM_PREFIX}{ENTITY_PREFIX}{name}"), m.clone()).expect("unique names");
        }
        for (i, name) in self.relation_names.iter().enumerate() {
            ck.push(
                format!("{ACCUM_PREFIX}{RELATION_PREFIX}{name}"),
                Matrix::from_vec(1, self.dim, self.relation_accum.row(i).to_vec()),
            )
            .expect("unique names");
        }
        ck
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self> {
        let dim = ck.dim;
        if dim == 0 {
            return Err(Error::Shape("checkpoint dim is zero".into()));
        }
        let mut entity_types = Vec::new();
        let mut entities = Vec::new();
        let mut relation_names = Vec::new();
        let mut rel_rows = Vec::new();
        let mut accum: Vec<(String, Matrix)> = Vec::new();
        for (name, m) in ck.tables {
            if let Some(rest) = name.strip_prefix(ACCUM_PREFIX) {
                accum.push((rest.to_string(), m));
            } else if let Some(t) = name.strip_prefix(ENTITY_PREFIX) {
                entity_types.push(t.to_string());
                entities.push(m);
            } else if let Some(r) = name.strip_prefix(RELATION_PREFIX) {
                if m.rows() != 1 {
                    return Err(Error::Shape(format!("relation table {r} must have exactly one row")));
                }
                relation_names.push(r.to_string());
                rel_rows.extend_from_slice(m.as_slice());
            } else {
                return Err(Error::Checkpoint(format!("unexpected table {name} in embedding checkpoint")));
            }
        }
        let mut take_accum = |key: String, rows: usize| -> Result<Matrix> {
            let pos = accum
                .iter()
                .position(|(n, _)| *n == key)
                .ok_or_else(|| Error::Checkpoint(format!("missing accumulator table for {key}")))?;
            let m = accum.swap_remove(pos).1;
            if m.rows() != rows {
                return Err(Error::Shape(format!("accumulator {key} has {} rows, expected {rows}", m.rows())));
            }
            Ok(m)
        };
        let mut entity_accum = Vec::with_capacity(entities.len());
        for (name, m) in entity_types.iter().zip(&entities) {
            entity_accum.push(take_accum(format!("{ENTITY_PREFIX}{name}"), m.rows())?);
        }
        let mut rel_accum_rows = Vec::with_capacity(rel_rows.len());
        for name in &relation_names {
            rel_accum_rows.extend_from_slice(take_accum(format!("{RELATION_PREFIX}{name}"), 1)?.as_slice());
        }
        if let Some((extra, _)) = accum.first() {
            return Err(Error::Checkpoint(format!("accumulator {extra} has no parameter table")));
        }
        let nrel = relation_names.len();
        Ok(EmbeddingStore {
            dim,
            entity_types,
            relation_names,
            entities,
            entity_accum,
            relations: Matrix::from_vec(nrel, dim, rel_rows),
            relation_accum: Matrix::from_vec(nrel, dim, rel_accum_rows),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(Checkpoint::load(path)?)
    }

    pub fn shard(self, partitioning: &crate::hin::Partitioning) -> Result<ShardedStore> {
        ShardedStore::new(self, partitioning)
    }

    pub(crate) fn into_parts(self) -> StoreParts {
        StoreParts {
            dim: self.dim,
            entity_types: self.entity_types,
            relation_names: self.relation_names,
            entities: self.entities,
            entity_accum: self.entity_accum,
            relations: self.relations,
            relation_accum: self.relation_accum,
        }
    }

    pub(crate) fn from_parts(p: StoreParts) -> Self {
        EmbeddingStore {
            dim: p.dim,
            entity_types: p.entity_types,
            relation_names: p.relation_names,
            entities: p.entities,
            entity_accum: p.entity_accum,
            relations: p.relations,
            relation_accum: p.relation_accum,
        }
    }
}

pub(crate) struct StoreParts {
    pub dim: usize,
    pub entity_types: Vec<String>,
    pub relation_names: Vec<String>,
    pub entities: Vec<Matrix>,
    pub entity_accum: Vec<Matrix>,
    pub relations: Matrix,
    pub relation_accum: Matrix,
}

impl Params for EmbeddingStore {
    fn dim(&self) -> usize {
        self.dim
    }

    fn entity(&self, e: EntityRef) -> Result<&[f32]> {
        let t = self.entities.get(e.entity_type.index()).filter(|m| e.local() < m.rows());
        t.map(|m| m.row(e.local())).ok_or_else(|| Error::OutOfBounds {
            entity: format!("{}:{}", e.entity_type.0, e.local_id),
            detail: "not in store".into(),
        })
    }

    fn relation(&self, r: RelationId) -> Result<&[f32]> {
        if r.index() >= self.relations.rows() {
            return Err(Error::OutOfBounds {
                entity: format!("relation {}", r.0),
                detail: "not in store".into(),
            });
        }
        Ok(self.relations.row(r.index()))
    }
}

impl ParamsMut for EmbeddingStore {
    fn entity_slot(&mut self, e: EntityRef) -> Result<(&mut [f32], &mut [f32])> {
        self.entity(e)?;
        let t = e.entity_type.index();
        Ok((self.entities[t].row_mut(e.local()), self.entity_accum[t].row_mut(e.local())))
    }

    fn relation_slot(&mut self, r: RelationId) -> Result<(&mut [f32], &mut [f32])> {
        self.relation(r)?;
        Ok((self.relations.row_mut(r.index()), self.relation_accum.row_mut(r.index())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hin::{Coverage, GraphBuilder, Schema};

    pub(crate) fn tiny_graph() -> HinGraph {
        let mut s = Schema::new();
        s.add_entity_type("user").unwrap();
        s.add_entity_type("tweet").unwrap();
        s.add_relation("follows", "user", "user", Coverage::High).unwrap();
        s.add_relation("fav", "user", "tweet", Coverage::Low).unwrap();
        let mut b = GraphBuilder::new(s);
        b.add_edge("user", "a", "follows", "user", "b").unwrap();
        b.add_edge("user", "b", "fav", "tweet", "t1").unwrap();
        b.add_edge("user", "c", "fav", "tweet", "t2").unwrap();
        b.build().unwrap()
    }

    #[test]
    fn init_ranges_and_zero_relations() {
        let g = tiny_graph();
        let s = EmbeddingStore::init(&g, 4, 7, 0.1).unwrap();
        for t in g.schema().entity_type_ids() {
            assert!(s.entity_table(t).as_slice().iter().all(|v| (-0.1..=0.1).contains(v)));
        }
        assert!(s.relation_table().as_slice().iter().all(|&v| v == 0.0));
        assert!(s.entity_accum_table(EntityTypeId(0)).as_slice().iter().all(|&v| v == 0.0));
        assert!(s.bitwise_eq(&EmbeddingStore::init(&g, 4, 7, 0.1).unwrap()));
        assert!(!s.bitwise_eq(&EmbeddingStore::init(&g, 4, 8, 0.1).unwrap()));
        s.check_shape(&g).unwrap();
    }

    #[test]
    fn zero_dim_rejected() {
        assert!(EmbeddingStore::init(&tiny_graph(), 0, 1, 0.1).is_err());
    }

    #[test]
    fn checkpoint_round_trip_is_bitwise() {
        let g = tiny_graph();
        let mut s = EmbeddingStore::init(&g, 3, 1, 0.1).unwrap();
        s.relation_row_mut(RelationId(1)).copy_from_slice(&[1.5, -0.0, f32::MIN_POSITIVE]);
        s.relation_accum_row_mut(RelationId(0))[2] = 4.0;
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ck.bin");
        s.save(&p).unwrap();
        let back = EmbeddingStore::load(&p).unwrap();
        assert!(back.bitwise_eq(&s));
    }

    #[test]
    fn truncated_and_bad_magic_files_fail_cleanly() {
        let g = tiny_graph();
        let s = EmbeddingStore::init(&g, 2, 1, 0.1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ck.bin");
        s.save(&p).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes.pop();
        std::fs::write(&p, &bytes).unwrap();
        let err = EmbeddingStore::load(&p).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");

        bytes.push(0);
        bytes[1] = b'Z';
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(EmbeddingStore::load(&p), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn missing_accumulator_is_rejected() {
        let g = tiny_graph();
        let mut ck = EmbeddingStore::init(&g, 2, 1, 0.1).unwrap().to_checkpoint();
        ck.take("adagrad/entity/tweet").unwrap();
        assert!(EmbeddingStore::from_checkpoint(ck).is_err());
    }
}
