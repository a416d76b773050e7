//! Planted-community heterogeneous networks for desk-scale experiments.
//!
//! Entity `i` of every type belongs to community `i mod C`. A configurable
//! fraction of entities also holds a second interest community. An edge
//! `(s, r, t)` appears with probability `intra_density` when `t`'s community
//! is one of `s`'s interests and `inter_density` otherwise, scaled by
//! optional heavy-tailed activity weights.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::hin::{Coverage, EntityRef, EntityTypeId, GraphBuilder, HinGraph, Schema};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRelation {
    pub name: String,
    pub source_type: String,
    pub target_type: String,
    pub coverage: Coverage,
    pub intra_density: f64,
    pub inter_density: f64,
    /// fraction of source entities that emit edges of this relation
    pub participation: f64,
}

impl SyntheticRelation {
    pub fn new(name: &str, source_type: &str, target_type: &str, coverage: Coverage) -> Self {
        SyntheticRelation {
            name: name.into(),
            source_type: source_type.into(),
            target_type: target_type.into(),
            coverage,
            intra_density: 0.1,
            inter_density: 0.005,
            participation: 1.0,
        }
    }

    pub fn densities(mut self, intra: f64, inter: f64) -> Self {
        self.intra_density = intra;
        self.inter_density = inter;
        self
    }

    pub fn participation(mut self, p: f64) -> Self {
        self.participation = p;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub communities: usize,
    pub entity_types: Vec<(String, usize)>,
    pub relations: Vec<SyntheticRelation>,
    /// fraction of entities with more than one interest community
    pub multi_interest_fraction: f64,
    /// distinct communities a multi-interest entity holds, primary included
    pub interests_per_entity: usize,
    /// Pareto shape of per-entity activity weights; `None` means uniform
    pub degree_skew: Option<f64>,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(communities: usize, seed: u64) -> Self {
        SyntheticSpec {
            communities,
            entity_types: Vec::new(),
            relations: Vec::new(),
            multi_interest_fraction: 0.0,
            interests_per_entity: 2,
            degree_skew: None,
            seed,
        }
    }

    pub fn entity_type(mut self, name: &str, count: usize) -> Self {
        self.entity_types.push((name.into(), count));
        self
    }

    pub fn relation(mut self, r: SyntheticRelation) -> Self {
        self.relations.push(r);
        self
    }

    pub fn multi_interest(mut self, fraction: f64) -> Self {
        self.multi_interest_fraction = fraction;
        self
    }

    /// Communities held by each multi-interest entity; capped at the
    /// number of communities.
    pub fn interests(mut self, n: usize) -> Self {
        self.interests_per_entity = n;
        self
    }

    pub fn degree_skew(mut self, shape: f64) -> Self {
        self.degree_skew = Some(shape);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.communities == 0 {
            return Err(Error::InvalidArgument("need at least one community".into()));
        }
        for r in &self.relations {
            if !(r.intra_density > 0.0 && r.intra_density <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "relation {}: intra density {} outside (0, 1]",
                    r.name, r.intra_density
                )));
            }
            if !(0.0..=1.0).contains(&r.inter_density) || !(0.0..=1.0).contains(&r.participation) {
                return Err(Error::InvalidArgument(format!(
                    "relation {}: inter density and participation must lie in [0, 1]",
                    r.name
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.multi_interest_fraction) {
            return Err(Error::InvalidArgument("multi-interest fraction must lie in [0, 1]".into()));
        }
        if self.interests_per_entity < 2 {
            return Err(Error::InvalidArgument("multi-interest entities need at least two interests".into()));
        }
        if let Some(shape) = self.degree_skew {
            if shape <= 1.0 {
                return Err(Error::InvalidArgument("degree skew shape must exceed 1".into()));
            }
        }
        Ok(())
    }
}

/// Planted labels of every entity.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// per type, per local id
    pub community: Vec<Vec<u32>>,
    /// per type, per local id; first element is the primary community
    pub interests: Vec<Vec<Vec<u32>>>,
    /// per type, per local id
    pub activity: Vec<Vec<f64>>,
}

impl GroundTruth {
    pub fn community_of(&self, e: EntityRef) -> u32 {
        self.community[e.entity_type.index()][e.local()]
    }

    pub fn interests_of(&self, e: EntityRef) -> &[u32] {
        &self.interests[e.entity_type.index()][e.local()]
    }
}

/// Entity `i` of type `t` gets the external id `{t}{i}` and local id `i`.
pub fn generate_synthetic_hin(spec: &SyntheticSpec) -> Result<(HinGraph, GroundTruth)> {
    spec.validate()?;
    let mut schema = Schema::new();
    for (name, _) in &spec.entity_types {
        schema.add_entity_type(name)?;
    }
    for r in &spec.relations {
        schema.add_relation(&r.name, &r.source_type, &r.target_type, r.coverage)?;
    }
    let mut builder = GraphBuilder::new(schema.clone());
    let c = spec.communities as u32;
    let mut community = Vec::new();
    let mut interests = Vec::new();
    let mut activity = Vec::new();
    for (t, (name, count)) in spec.entity_types.iter().enumerate() {
        let mut rng = rng::rng_for(spec.seed, &[0x636f6d6d, t as u64]);
        let mut comm = Vec::with_capacity(*count);
        let mut ints = Vec::with_capacity(*count);
        let mut act = Vec::with_capacity(*count);
        for i in 0..*count {
            builder.entity(name, &format!("{name}{i}"))?;
            let primary = i as u32 % c;
            let mut mine = vec![primary];
            if c > 1 && rng.gen_bool(spec.multi_interest_fraction) {
                let extra = spec.interests_per_entity.min(c as usize) - 1;
                for _ in 0..extra {
                    // the k-th community not yet held
                    let mut k = rng.gen_range(0..c - mine.len() as u32);
                    let mut held: Vec<u32> = mine.clone();
                    held.sort_unstable();
                    for h in held {
                        if k >= h {
                            k += 1;
                        }
                    }
                    mine.push(k);
                }
            }
            comm.push(primary);
            ints.push(mine);
            act.push(match spec.degree_skew {
                Some(shape) => {
                    let u: f64 = rng.gen();
                    // Pareto(1, shape) scaled to mean one
                    (1.0 - u).powf(-1.0 / shape) * (shape - 1.0) / shape
                }
                None => 1.0,
            });
        }
        community.push(comm);
        interests.push(ints);
        activity.push(act);
    }
    let truth = GroundTruth {
        community,
        interests,
        activity,
    };

    for (ri, r) in spec.relations.iter().enumerate() {
        let rid = schema.relation_id(&r.name).expect("declared above");
        let st = schema.relation(rid).source_type;
        let tt = schema.relation(rid).target_type;
        let ns = truth.community[st.index()].len();
        let nt = truth.community[tt.index()].len();
        let mut rng = rng::rng_for(spec.seed, &[0x65646765, ri as u64]);
        for s in 0..ns {
            if !rng.gen_bool(r.participation) {
                continue;
            }
            let s_ref = EntityRef::new(st, s as u32);
            let s_int = truth.interests_of(s_ref);
            let s_act = truth.activity[st.index()][s];
            for t in 0..nt {
                if st == tt && s == t {
                    continue;
                }
                let t_comm = truth.community[tt.index()][t];
                let base = if s_int.contains(&t_comm) {
                    r.intra_density
                } else {
                    r.inter_density
                };
                let p = (base * s_act * truth.activity[tt.index()][t]).min(1.0);
                if p > 0.0 && rng.gen_bool(p) {
                    builder.push(crate::hin::Edge::new(s_ref, rid, EntityRef::new(tt, t as u32)));
                }
            }
        }
    }
    Ok((builder.build()?, truth))
}

/// Newman modularity of a labelling, edges treated as undirected.
pub fn modularity(graph: &HinGraph, label: impl Fn(EntityRef) -> u32) -> f64 {
    let m = graph.num_edges() as f64;
    if m == 0.0 {
        return 0.0;
    }
    let mut inside = std::collections::HashMap::<u32, f64>::new();
    let mut degree = std::collections::HashMap::<u32, f64>::new();
    for e in graph.edges() {
        let (a, b) = (label(e.source), label(e.target));
        if a == b {
            *inside.entry(a).or_default() += 1.0;
        }
        *degree.entry(a).or_default() += 1.0;
        *degree.entry(b).or_default() += 1.0;
    }
    degree
        .iter()
        .map(|(c, &d)| inside.get(c).copied().unwrap_or(0.0) / m - (d / (2.0 * m)).powi(2))
        .sum()
}

/// Users with one high-coverage `follows` relation over `users` nodes.
pub fn follow_graph_spec(users: usize, communities: usize, seed: u64) -> SyntheticSpec {
    SyntheticSpec::new(communities, seed)
        .entity_type("user", users)
        .relation(SyntheticRelation::new("follows", "user", "user", Coverage::High))
}

pub fn type_id(graph: &HinGraph, name: &str) -> EntityTypeId {
    graph.schema().entity_type_id(name).expect("entity type exists")
}
