//! Edge-list and id-map files.
//!
//! Edge file: UTF-8 TSV `source_type  source_id  relation  target_type  target_id`,
//! one edge per line, `#` lines and blank lines skipped.
//! Id-map file: TSV `entity_type  external_id  local_id`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::graph::{GraphBuilder, HinGraph, IdMap};
use super::schema::{EntityTypeId, Schema};
use crate::error::{Error, Result};

pub fn load_edges(path: &Path, schema: &Schema) -> Result<HinGraph> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut builder = GraphBuilder::new(schema.clone());
    read_edges_into(BufReader::new(file), path, &mut builder)?;
    builder.build()
}

/// Load several edge files into one graph; ids are shared across files.
pub fn load_edge_files(paths: &[impl AsRef<Path>], schema: &Schema) -> Result<HinGraph> {
    let mut builder = GraphBuilder::new(schema.clone());
    for p in paths {
        let p = p.as_ref();
        let file = File::open(p).map_err(|e| Error::io(p, e))?;
        read_edges_into(BufReader::new(file), p, &mut builder)?;
    }
    builder.build()
}

pub fn read_edges_into<R: BufRead>(reader: R, origin: &Path, builder: &mut GraphBuilder) -> Result<()> {
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::parse(origin, line_no, e.to_string()))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 || fields.iter().any(|f| f.is_empty()) {
            return Err(Error::parse(
                origin,
                line_no,
                format!("expected 5 non-empty tab-separated fields, got {:?}", line),
            ));
        }
        builder
            .add_edge(fields[0], fields[1], fields[2], fields[3], fields[4])
            .map_err(|e| Error::parse(origin, line_no, e.to_string()))?;
    }
    Ok(())
}

pub fn write_edges<W: Write>(graph: &HinGraph, mut w: W) -> std::io::Result<()> {
    write_edge_subset(graph, graph.edges().iter(), &mut w)
}

pub fn write_edge_subset<'a, W: Write>(
    graph: &HinGraph,
    edges: impl Iterator<Item = &'a super::graph::Edge>,
    mut w: W,
) -> std::io::Result<()> {
    let schema = graph.schema();
    for e in edges {
        let r = schema.relation(e.relation);
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}",
            schema.entity_type(e.source.entity_type).name,
            graph.ids().external(e.source),
            r.name,
            schema.entity_type(e.target.entity_type).name,
            graph.ids().external(e.target)
        )?;
    }
    Ok(())
}

pub fn save_edges(graph: &HinGraph, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_edges(graph, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn save_id_map(ids: &IdMap, schema: &Schema, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    let mut write = || -> std::io::Result<()> {
        for t in schema.entity_type_ids() {
            let name = &schema.entity_type(t).name;
            for (local, ext) in ids.ids(t).iter().enumerate() {
                writeln!(w, "{name}\t{ext}\t{local}")?;
            }
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

/// Read an id map; local ids must be contiguous from 0 within each type.
pub fn load_id_map(path: &Path, schema: &Schema) -> Result<IdMap> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut ids = IdMap::new(schema.num_entity_types());
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            return Err(Error::parse(path, line_no, "expected 3 tab-separated fields"));
        }
        let t: EntityTypeId = schema
            .entity_type_id(f[0])
            .ok_or_else(|| Error::parse(path, line_no, format!("unknown entity type {:?}", f[0])))?;
        let local: u32 = f[2]
            .parse()
            .map_err(|_| Error::parse(path, line_no, format!("bad local id {:?}", f[2])))?;
        if local as usize != ids.count(t) || ids.get(t, f[1]).is_some() {
            return Err(Error::parse(path, line_no, "local ids must be unique and contiguous per type"));
        }
        ids.intern(t, f[1]);
    }
    Ok(ids)
}
