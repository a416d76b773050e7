use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityTypeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelationId(pub u32);

impl EntityTypeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Whether a relation touches most entities of its source type (follows,
/// tweet engagement) or only a sparse minority (ad clicks).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Coverage {
    High,
    Low,
}

impl Coverage {
    pub fn as_str(self) -> &'static str {
        match self {
            Coverage::High => "high",
            Coverage::Low => "low",
        }
    }
}

impl std::str::FromStr for Coverage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "high" => Ok(Coverage::High),
            "low" => Ok(Coverage::Low),
            other => Err(Error::Schema(format!("unknown coverage class {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityType {
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationType {
    pub name: String,
    pub source_type: EntityTypeId,
    pub target_type: EntityTypeId,
    pub coverage: Coverage,
}

/// Declared entity and relation types of a network.
///
/// The text form is line oriented:
///
/// ```text
/// entity user
/// entity tweet
/// relation follows user user high
/// relation favorites user tweet high
/// ```
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Schema {
    entity_types: Vec<EntityType>,
    relations: Vec<RelationType>,
    entity_index: HashMap<String, EntityTypeId>,
    relation_index: HashMap<String, RelationId>,
}

impl Schema {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_entity_type(&mut self, name: &str) -> Result<EntityTypeId> {
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(Error::Schema(format!("invalid entity type name {name:?}")));
        }
        if self.entity_index.contains_key(name) {
            return Err(Error::Schema(format!("duplicate entity type {name:?}")));
        }
        let id = EntityTypeId(self.entity_types.len() as u32);
        self.entity_types.push(EntityType {
            name: name.to_string(),
        });
        self.entity_index.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn add_relation(
        &mut self,
        name: &str,
        source_type: &str,
        target_type: &str,
        coverage: Coverage,
    ) -> Result<RelationId> {
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(Error::Schema(format!("invalid relation name {name:?}")));
        }
        if self.relation_index.contains_key(name) {
            return Err(Error::Schema(format!("duplicate relation {name:?}")));
        }
        let source_type = self.require_entity_type(source_type)?;
        let target_type = self.require_entity_type(target_type)?;
        let id = RelationId(self.relations.len() as u32);
        self.relations.push(RelationType {
            name: name.to_string(),
            source_type,
            target_type,
            coverage,
        });
        self.relation_index.insert(name.to_string(), id);
        Ok(id)
    }

    fn require_entity_type(&self, name: &str) -> Result<EntityTypeId> {
        self.entity_type_id(name)
            .ok_or_else(|| Error::Schema(format!("unknown entity type {name:?}")))
    }

    pub fn entity_type_id(&self, name: &str) -> Option<EntityTypeId> {
        self.entity_index.get(name).copied()
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.relation_index.get(name).copied()
    }

    pub fn entity_type(&self, id: EntityTypeId) -> &EntityType {
        &self.entity_types[id.index()]
    }

    pub fn relation(&self, id: RelationId) -> &RelationType {
        &self.relations[id.index()]
    }

    pub fn entity_types(&self) -> &[EntityType] {
        &self.entity_types
    }

    pub fn relations(&self) -> &[RelationType] {
        &self.relations
    }

    pub fn num_entity_types(&self) -> usize {
        self.entity_types.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn relation_ids(&self) -> impl Iterator<Item = RelationId> {
        (0..self.relations.len() as u32).map(RelationId)
    }

    pub fn entity_type_ids(&self) -> impl Iterator<Item = EntityTypeId> {
        (0..self.entity_types.len() as u32).map(EntityTypeId)
    }

    /// Parse the line-oriented schema format. `origin` is used in error messages.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut schema = Schema::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let res = match fields.as_slice() {
                ["entity", name] => schema.add_entity_type(name).map(|_| ()),
                ["relation", name, src, dst, cov] => cov
                    .parse::<Coverage>()
                    .and_then(|c| schema.add_relation(name, src, dst, c))
                    .map(|_| ()),
                _ => Err(Error::Schema(format!("malformed schema line {line:?}"))),
            };
            res.map_err(|e| Error::parse(origin, line_no, e.to_string()))?;
        }
        if schema.entity_types.is_empty() {
            return Err(Error::Schema(format!("{}: no entity types declared", origin.display())));
        }
        Ok(schema)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_string()).map_err(|e| Error::io(path, e))
    }

    /// Sub-schema holding every entity type and only the given relations, in
    /// their original order.
    pub fn restrict_relations(&self, keep: &[RelationId]) -> Schema {
        let mut out = Schema::new();
        for t in &self.entity_types {
            out.add_entity_type(&t.name).expect("names already validated");
        }
        for rid in self.relation_ids() {
            if keep.contains(&rid) {
                let r = self.relation(rid);
                out.add_relation(
                    &r.name,
                    &self.entity_type(r.source_type).name,
                    &self.entity_type(r.target_type).name,
                    r.coverage,
                )
                .expect("names already validated");
            }
        }
        out
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.entity_types {
            writeln!(f, "entity {}", t.name)?;
        }
        for r in &self.relations {
            writeln!(
                f,
                "relation {} {} {} {}",
                r.name,
                self.entity_type(r.source_type).name,
                self.entity_type(r.target_type).name,
                r.coverage.as_str()
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_prints_round_trip() {
        let text = "# demo\nentity user\nentity tweet\n\nrelation follows user user high\nrelation fav user tweet low\n";
        let s = Schema::parse(text, Path::new("s.txt")).unwrap();
        assert_eq!(s.num_entity_types(), 2);
        assert_eq!(s.relation(RelationId(1)).coverage, Coverage::Low);
        let again = Schema::parse(&s.to_string(), Path::new("s2.txt")).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn rejects_unknown_types_and_duplicates() {
        let err = Schema::parse("entity user\nrelation f user ad high\n", Path::new("x")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(Schema::parse("entity user\nentity user\n", Path::new("x")).is_err());
        assert!(Schema::parse("entity user\nrelation f user user medium\n", Path::new("x")).is_err());
        assert!(Schema::parse("", Path::new("x")).is_err());
    }

    #[test]
    fn restrict_keeps_entity_types() {
        let mut s = Schema::new();
        s.add_entity_type("user").unwrap();
        s.add_entity_type("ad").unwrap();
        s.add_relation("follows", "user", "user", Coverage::High).unwrap();
        s.add_relation("clicks", "user", "ad", Coverage::Low).unwrap();
        let r = s.restrict_relations(&[RelationId(1)]);
        assert_eq!(r.num_entity_types(), 2);
        assert_eq!(r.num_relations(), 1);
        assert_eq!(r.relation(RelationId(0)).name, "clicks");
    }
}
