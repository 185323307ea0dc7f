//! The de Bruijn graph produced by the pipeline: one vertex per distinct
//! k-mer (identified by its first-occurrence ordinal) and weighted directed
//! edges between k-mers adjacent in some read.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Distinct-k-mer vertex ids plus a weighted directed edge list. Ordered
/// containers keep serialization and equality deterministic.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DeBruijnGraph {
    pub vertices: BTreeSet<u64>,
    pub edges: BTreeMap<(u64, u64), u64>,
}

impl DeBruijnGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_vertex(&mut self, id: u64) {
        self.vertices.insert(id);
    }

    pub fn add_edge(&mut self, from: u64, to: u64) {
        self.vertices.insert(from);
        self.vertices.insert(to);
        *self.edges.entry((from, to)).or_insert(0) += 1;
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Renumbers vertices to 1..=V in ascending id order. Off by default in
    /// the pipeline, which keeps first-occurrence ordinals as ids.
    pub fn densify(&self) -> DeBruijnGraph {
        let remap: BTreeMap<u64, u64> = self
            .vertices
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, i as u64 + 1))
            .collect();
        DeBruijnGraph {
            vertices: remap.values().copied().collect(),
            edges: self
                .edges
                .iter()
                .map(|(&(u, v), &w)| ((remap[&u], remap[&v]), w))
                .collect(),
        }
    }

    /// Writes the text edge list, one `u v weight` line per edge.
    pub fn write_edge_list(&self, mut out: impl Write) -> std::io::Result<()> {
        for (&(u, v), &w) in &self.edges {
            writeln!(out, "{u} {v} {w}")?;
        }
        Ok(())
    }

    pub fn read_edge_list(path: &Path, reader: impl BufRead) -> Result<DeBruijnGraph> {
        let mut graph = DeBruijnGraph::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let parse = |field: Option<&str>| -> Result<u64> {
                field
                    .and_then(|f| f.parse().ok())
                    .ok_or_else(|| Error::corrupt(path, format!("bad edge at line {}", lineno + 1)))
            };
            let u = parse(fields.next())?;
            let v = parse(fields.next())?;
            let w = parse(fields.next())?;
            graph.vertices.insert(u);
            graph.vertices.insert(v);
            graph.edges.insert((u, v), w);
        }
        Ok(graph)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn densify_renumbers_in_order() {
        let mut g = DeBruijnGraph::new();
        g.add_edge(7, 8);
        g.add_edge(8, 10);
        g.add_edge(7, 8);
        let d = g.densify();
        assert_eq!(d.vertices.iter().copied().collect::<Vec<_>>(), vec![1, 2, 3]);
        assert_eq!(d.edges[&(1, 2)], 2);
        assert_eq!(d.edges[&(2, 3)], 1);
    }

    #[test]
    fn edge_list_round_trip() {
        let mut g = DeBruijnGraph::new();
        g.add_edge(1, 2);
        g.add_edge(2, 3);
        g.add_edge(1, 2);
        g.add_vertex(9);
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let parsed =
            DeBruijnGraph::read_edge_list(Path::new("mem"), std::io::Cursor::new(buf)).unwrap();
        // The isolated vertex is not representable in an edge list.
        assert_eq!(parsed.edges, g.edges);
    }
}
