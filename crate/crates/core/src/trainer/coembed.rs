//! Co-embedding policy: each high-coverage relation is embedded together with
//! every low-coverage relation, never with another high-coverage relation.

use crate::error::{Error, Result};
use crate::hin::{Coverage, GraphBuilder, HinGraph, RelationId, Schema};

/// Relation groups, one per high-coverage anchor: `[anchor, lows...]`.
pub fn coembedding_groups(schema: &Schema) -> Result<Vec<Vec<RelationId>>> {
    let (high, low): (Vec<RelationId>, Vec<RelationId>) =
        schema.relation_ids().partition(|&r| schema.relation(r).coverage == Coverage::High);
    if high.is_empty() {
        return Err(Error::Schema(
            "co-embedding needs at least one high-coverage relation to anchor low-coverage relations".into(),
        ));
    }
    Ok(high
        .into_iter()
        .map(|h| std::iter::once(h).chain(low.iter().copied()).collect())
        .collect())
}

#[derive(Debug, Clone)]
pub struct CoembeddedGraph {
    /// name of the high-coverage relation anchoring this graph
    pub anchor: String,
    pub graph: HinGraph,
}

#[derive(Debug, Clone)]
pub struct CoembeddingPlan {
    pub graphs: Vec<CoembeddedGraph>,
    /// relations declared in the schema but absent from the edges
    pub warnings: Vec<String>,
}

/// Split a full network into one graph per high-coverage relation.
///
/// Each output graph keeps every entity type of the schema, contains only
/// the entities its edges touch (ids re-assigned in first-seen order) and
/// preserves edge order.
pub fn build_coembedding_graphs(full: &HinGraph) -> Result<CoembeddingPlan> {
    let schema = full.schema();
    let groups = coembedding_groups(schema)?;
    let mut used = vec![false; schema.num_relations()];
    for e in full.edges() {
        used[e.relation.index()] = true;
    }
    let warnings = schema
        .relation_ids()
        .filter(|r| !used[r.index()])
        .map(|r| format!("relation {} is referenced by no edges", schema.relation(r).name))
        .collect();

    let mut graphs = Vec::with_capacity(groups.len());
    for group in groups {
        let sub = schema.restrict_relations(&group);
        let mut builder = GraphBuilder::new(sub);
        for e in full.edges().iter().filter(|e| group.contains(&e.relation)) {
            let r = schema.relation(e.relation);
            builder.add_edge(
                &schema.entity_type(e.source.entity_type).name,
                full.ids().external(e.source),
                &r.name,
                &schema.entity_type(e.target.entity_type).name,
                full.ids().external(e.target),
            )?;
        }
        graphs.push(CoembeddedGraph {
            anchor: schema.relation(group[0]).name.clone(),
            graph: builder.build()?,
        });
    }
    Ok(CoembeddingPlan { graphs, warnings })
}
