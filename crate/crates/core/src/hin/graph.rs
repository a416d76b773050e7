use std::collections::HashMap;

use super::schema::{EntityTypeId, RelationId, Schema};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityRef {
    pub entity_type: EntityTypeId,
    pub local_id: u32,
}

impl EntityRef {
    pub fn new(entity_type: EntityTypeId, local_id: u32) -> Self {
        EntityRef {
            entity_type,
            local_id,
        }
    }

    #[inline]
    pub fn local(self) -> usize {
        self.local_id as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub source: EntityRef,
    pub relation: RelationId,
    pub target: EntityRef,
}

impl Edge {
    pub fn new(source: EntityRef, relation: RelationId, target: EntityRef) -> Self {
        Edge {
            source,
            relation,
            target,
        }
    }

    /// The endpoint opposite `e`, if `e` is an endpoint.
    pub fn other(&self, e: EntityRef) -> Option<EntityRef> {
        if self.source == e {
            Some(self.target)
        } else if self.target == e {
            Some(self.source)
        } else {
            None
        }
    }
}

/// External string ids to dense per-type local ids, assigned in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    external: Vec<Vec<String>>,
    lookup: Vec<HashMap<String, u32>>,
}

impl IdMap {
    pub fn new(num_types: usize) -> Self {
        IdMap {
            external: vec![Vec::new(); num_types],
            lookup: vec![HashMap::new(); num_types],
        }
    }

    pub fn intern(&mut self, t: EntityTypeId, external_id: &str) -> u32 {
        if let Some(&id) = self.lookup[t.index()].get(external_id) {
            return id;
        }
        let id = self.external[t.index()].len() as u32;
        self.external[t.index()].push(external_id.to_string());
        self.lookup[t.index()].insert(external_id.to_string(), id);
        id
    }

    pub fn get(&self, t: EntityTypeId, external_id: &str) -> Option<u32> {
        self.lookup.get(t.index())?.get(external_id).copied()
    }

    pub fn external(&self, e: EntityRef) -> &str {
        &self.external[e.entity_type.index()][e.local()]
    }

    pub fn count(&self, t: EntityTypeId) -> usize {
        self.external[t.index()].len()
    }

    pub fn num_types(&self) -> usize {
        self.external.len()
    }

    pub fn ids(&self, t: EntityTypeId) -> &[String] {
        &self.external[t.index()]
    }
}

/// A typed multigraph: schema, id map, ordered edge list, degrees and an
/// incidence index. Immutable once built.
#[derive(Debug, Clone)]
pub struct HinGraph {
    schema: Schema,
    ids: IdMap,
    edges: Vec<Edge>,
    degrees: Vec<Vec<u32>>,
    type_offsets: Vec<usize>,
    incidence_offsets: Vec<usize>,
    incidence: Vec<u32>,
}

impl HinGraph {
    /// Assemble a graph from parts, validating every edge against the schema.
    pub fn from_parts(schema: Schema, ids: IdMap, edges: Vec<Edge>) -> Result<Self> {
        if ids.num_types() != schema.num_entity_types() {
            return Err(Error::Schema(format!(
                "id map has {} entity types, schema declares {}",
                ids.num_types(),
                schema.num_entity_types()
            )));
        }
        let counts: Vec<usize> = schema.entity_type_ids().map(|t| ids.count(t)).collect();
        for (i, e) in edges.iter().enumerate() {
            if e.relation.index() >= schema.num_relations() {
                return Err(Error::Schema(format!("edge {i}: unknown relation id {}", e.relation.0)));
            }
            let r = schema.relation(e.relation);
            if e.source.entity_type != r.source_type || e.target.entity_type != r.target_type {
                return Err(Error::Schema(format!(
                    "edge {i}: endpoint types do not match relation {}",
                    r.name
                )));
            }
            for end in [e.source, e.target] {
                if end.local() >= counts[end.entity_type.index()] {
                    return Err(Error::OutOfBounds {
                        entity: format!("{}:{}", schema.entity_type(end.entity_type).name, end.local_id),
                        detail: format!("edge {i}"),
                    });
                }
            }
        }

        let mut type_offsets = Vec::with_capacity(counts.len() + 1);
        let mut acc = 0;
        for &c in &counts {
            type_offsets.push(acc);
            acc += c;
        }
        type_offsets.push(acc);
        let total = acc;

        let mut degrees: Vec<Vec<u32>> = counts.iter().map(|&c| vec![0; c]).collect();
        let mut incidence_offsets = vec![0usize; total + 1];
        for e in &edges {
            for end in [e.source, e.target] {
                degrees[end.entity_type.index()][end.local()] += 1;
                incidence_offsets[type_offsets[end.entity_type.index()] + end.local() + 1] += 1;
            }
        }
        for i in 0..total {
            incidence_offsets[i + 1] += incidence_offsets[i];
        }
        let mut cursor = incidence_offsets.clone();
        let mut incidence = vec![0u32; incidence_offsets[total]];
        for (idx, e) in edges.iter().enumerate() {
            for end in [e.source, e.target] {
                let g = type_offsets[end.entity_type.index()] + end.local();
                incidence[cursor[g]] = idx as u32;
                cursor[g] += 1;
            }
        }

        Ok(HinGraph {
            schema,
            ids,
            edges,
            degrees,
            type_offsets,
            incidence_offsets,
            incidence,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn ids(&self) -> &IdMap {
        &self.ids
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn entity_count(&self, t: EntityTypeId) -> usize {
        self.degrees[t.index()].len()
    }

    pub fn entity_counts(&self) -> Vec<usize> {
        self.degrees.iter().map(Vec::len).collect()
    }

    pub fn num_entities(&self) -> usize {
        *self.type_offsets.last().unwrap_or(&0)
    }

    /// Dense index over all entities of all types, types in schema order.
    #[inline]
    pub fn global_index(&self, e: EntityRef) -> usize {
        self.type_offsets[e.entity_type.index()] + e.local()
    }

    pub fn entity_at(&self, global: usize) -> EntityRef {
        let t = self.type_offsets.partition_point(|&o| o <= global) - 1;
        EntityRef::new(EntityTypeId(t as u32), (global - self.type_offsets[t]) as u32)
    }

    pub fn contains(&self, e: EntityRef) -> bool {
        e.entity_type.index() < self.degrees.len() && e.local() < self.degrees[e.entity_type.index()].len()
    }

    /// Number of edge endpoints referencing `e`; a self-loop counts twice.
    #[inline]
    pub fn degree(&self, e: EntityRef) -> u32 {
        self.degrees[e.entity_type.index()][e.local()]
    }

    pub fn degrees_of_type(&self, t: EntityTypeId) -> &[u32] {
        &self.degrees[t.index()]
    }

    /// Indices of the edges incident to `e`, in edge order.
    pub fn incident_edges(&self, e: EntityRef) -> &[u32] {
        let g = self.global_index(e);
        &self.incidence[self.incidence_offsets[g]..self.incidence_offsets[g + 1]]
    }

    pub fn entities_of_type(&self, t: EntityTypeId) -> impl Iterator<Item = EntityRef> {
        (0..self.entity_count(t) as u32).map(move |i| EntityRef::new(t, i))
    }

    pub fn entities(&self) -> impl Iterator<Item = EntityRef> + '_ {
        self.schema.entity_type_ids().flat_map(move |t| self.entities_of_type(t))
    }

    pub fn lookup(&self, entity_type: &str, external_id: &str) -> Option<EntityRef> {
        let t = self.schema.entity_type_id(entity_type)?;
        self.ids.get(t, external_id).map(|l| EntityRef::new(t, l))
    }

    pub fn describe(&self, e: EntityRef) -> String {
        format!(
            "{}:{}",
            self.schema.entity_type(e.entity_type).name,
            self.ids.external(e)
        )
    }

    /// Same schema and id space, different edge list.
    pub fn with_edges(&self, edges: Vec<Edge>) -> Result<HinGraph> {
        HinGraph::from_parts(self.schema.clone(), self.ids.clone(), edges)
    }
}

/// Incremental construction by external ids.
#[derive(Debug, Clone)]
pub struct GraphBuilder {
    schema: Schema,
    ids: IdMap,
    edges: Vec<Edge>,
}

impl GraphBuilder {
    pub fn new(schema: Schema) -> Self {
        let ids = IdMap::new(schema.num_entity_types());
        GraphBuilder {
            schema,
            ids,
            edges: Vec::new(),
        }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn entity(&mut self, entity_type: &str, external_id: &str) -> Result<EntityRef> {
        let t = self
            .schema
            .entity_type_id(entity_type)
            .ok_or_else(|| Error::Schema(format!("unknown entity type {entity_type:?}")))?;
        Ok(EntityRef::new(t, self.ids.intern(t, external_id)))
    }

    pub fn add_edge(
        &mut self,
        source_type: &str,
        source_id: &str,
        relation: &str,
        target_type: &str,
        target_id: &str,
    ) -> Result<Edge> {
        let rid = self
            .schema
            .relation_id(relation)
            .ok_or_else(|| Error::Schema(format!("unknown relation {relation:?}")))?;
        let r = self.schema.relation(rid);
        let st = self
            .schema
            .entity_type_id(source_type)
            .ok_or_else(|| Error::Schema(format!("unknown entity type {source_type:?}")))?;
        let tt = self
            .schema
            .entity_type_id(target_type)
            .ok_or_else(|| Error::Schema(format!("unknown entity type {target_type:?}")))?;
        if st != r.source_type || tt != r.target_type {
            return Err(Error::Schema(format!(
                "relation {relation} expects {}->{}, got {source_type}->{target_type}",
                self.schema.entity_type(r.source_type).name,
                self.schema.entity_type(r.target_type).name
            )));
        }
        let s = EntityRef::new(st, self.ids.intern(st, source_id));
        let t = EntityRef::new(tt, self.ids.intern(tt, target_id));
        let e = Edge::new(s, rid, t);
        self.edges.push(e);
        Ok(e)
    }

    /// Push an edge over already-interned entities.
    pub fn push(&mut self, edge: Edge) {
        self.edges.push(edge);
    }

    pub fn build(self) -> Result<HinGraph> {
        HinGraph::from_parts(self.schema, self.ids, self.edges)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hin::schema::Coverage;

    fn follows_schema() -> Schema {
        let mut s = Schema::new();
        s.add_entity_type("user").unwrap();
        s.add_entity_type("tweet").unwrap();
        s.add_relation("follows", "user", "user", Coverage::High).unwrap();
        s.add_relation("fav", "user", "tweet", Coverage::High).unwrap();
        s
    }

    #[test]
    fn degrees_match_rescan_and_incidence() {
        let mut b = GraphBuilder::new(follows_schema());
        b.add_edge("user", "A", "follows", "user", "B").unwrap();
        b.add_edge("user", "A", "fav", "tweet", "T").unwrap();
        b.add_edge("user", "A", "follows", "user", "B").unwrap();
        b.add_edge("user", "C", "follows", "user", "C").unwrap();
        let g = b.build().unwrap();
        let a = g.lookup("user", "A").unwrap();
        let c = g.lookup("user", "C").unwrap();
        assert_eq!(g.degree(a), 3);
        assert_eq!(g.degree(c), 2);
        assert_eq!(g.incident_edges(a), &[0, 1, 2]);
        for e in g.entities() {
            let rescan = g
                .edges()
                .iter()
                .map(|x| (x.source == e) as u32 + (x.target == e) as u32)
                .sum::<u32>();
            assert_eq!(rescan, g.degree(e));
            assert_eq!(g.entity_at(g.global_index(e)), e);
        }
    }

    #[test]
    fn builder_rejects_type_mismatch() {
        let mut b = GraphBuilder::new(follows_schema());
        assert!(b.add_edge("tweet", "T", "follows", "user", "U").is_err());
        assert!(b.add_edge("user", "U", "nope", "user", "V").is_err());
    }
}
