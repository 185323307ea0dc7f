//! Phase orchestration over a working directory: partition, map, merge and
//! edge emission, each restartable from the on-disk outputs of the previous
//! phase. The manifest records the configuration, the counters each phase
//! produced, wall time and best-effort peak memory, and the last completed
//! phase.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::DeBruijnGraph;
use crate::manifest::{Layout, Manifest};
use crate::map_merge::{
    emit_edges, map_partition, merge_replacements_with, IdStream, MapStats,
};
use crate::minimizer::Scanner;
use crate::partition::{msp_partition, PartitionConfig, PartitionSummary, WrapMode};
use crate::seq::PackedSequence;

pub const PHASE_PARTITION: &str = "partition";
pub const PHASE_MAP: &str = "map";
pub const PHASE_MERGE: &str = "merge";
pub const PHASE_EDGES: &str = "edges";

/// Aggregated mapping-phase counters.
#[derive(Debug, Clone, Copy, Default)]
pub struct MapTotals {
    pub distinct: u64,
    pub replaced: u64,
    pub ranges: u64,
    /// Largest per-partition distinct count: the peak mapper table size.
    pub max_partition_distinct: u64,
}

/// Best-effort resident-set high-water mark in kilobytes.
pub fn peak_rss_kb() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    status.lines().find_map(|line| {
        line.strip_prefix("VmHWM:")?
            .trim()
            .trim_end_matches(" kB")
            .trim()
            .parse()
            .ok()
    })
}

fn record_phase(manifest: &mut Manifest, phase: &str, started: Instant) {
    manifest.set(
        &format!("phase.{phase}.seconds"),
        format!("{:.3}", started.elapsed().as_secs_f64()),
    );
    if let Some(kb) = peak_rss_kb() {
        manifest.set(&format!("phase.{phase}.rss_kb"), kb);
    }
    manifest.set("last_phase", phase);
}

fn config_to_manifest(cfg: &PartitionConfig, manifest: &mut Manifest) {
    manifest.set("k", cfg.k);
    manifest.set("p", cfg.p);
    manifest.set("t", cfg.t);
    manifest.set("rc_mode", cfg.rc_mode);
    manifest.set("scanner", cfg.scanner);
    manifest.set("wrap", cfg.wrap);
    manifest.set("memory_budget", cfg.memory_budget);
}

/// Rebuilds the phase configuration from a manifest written by
/// [`partition_phase`].
pub fn config_from_manifest(manifest: &Manifest, work_dir: &Path) -> Result<PartitionConfig> {
    Ok(PartitionConfig {
        k: manifest.require_parsed("k")?,
        p: manifest.require_parsed("p")?,
        t: manifest.require_parsed("t")?,
        rc_mode: manifest.require_parsed("rc_mode")?,
        scanner: manifest.require_parsed::<Scanner>("scanner")?,
        wrap: manifest.require_parsed::<WrapMode>("wrap")?,
        work_dir: work_dir.to_path_buf(),
        memory_budget: manifest.require_parsed("memory_budget")?,
    })
}

/// Phase 1: scatter reads into partition files and write the sidecar plus a
/// fresh manifest.
pub fn partition_phase(
    reads: impl Iterator<Item = Result<PackedSequence>>,
    cfg: &PartitionConfig,
) -> Result<PartitionSummary> {
    let started = Instant::now();
    let summary = msp_partition(reads, cfg)?;
    let mut manifest = Manifest::new();
    config_to_manifest(cfg, &mut manifest);
    manifest.set("reads", summary.reads);
    manifest.set("input_bases", summary.input_bases);
    manifest.set("n_kmers", summary.n_kmers);
    manifest.set("breaks", summary.breaks);
    manifest.set("partition_bases", summary.partition_bases);
    manifest.set("partition_bytes", summary.partition_bytes);
    for (index, stats) in summary.per_partition.iter().enumerate() {
        manifest.set(&format!("partition.{index:06}.records"), stats.records);
        manifest.set(&format!("partition.{index:06}.kmers"), stats.kmers);
        manifest.set(&format!("partition.{index:06}.bytes"), stats.bytes);
    }
    record_phase(&mut manifest, PHASE_PARTITION, started);
    manifest.save(&cfg.layout().manifest())?;
    Ok(summary)
}

/// Phase 2: map every partition to its replacement file, in parallel.
pub fn map_phase(work_dir: &Path) -> Result<MapTotals> {
    let started = Instant::now();
    let layout = Layout::new(work_dir);
    let mut manifest = Manifest::load(&layout.manifest())?;
    let cfg = config_from_manifest(&manifest, work_dir)?;

    for index in 0..cfg.t {
        let path = layout.replacement_file(index);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let stats: Vec<MapStats> = (0..cfg.t)
        .into_par_iter()
        .map(|index| {
            map_partition(
                &layout.partition_file(index),
                &layout.replacement_file(index),
                cfg.k,
                cfg.rc_mode,
                cfg.memory_budget,
                index,
            )
        })
        .collect::<Result<_>>()?;

    let totals = MapTotals {
        distinct: stats.iter().map(|s| s.distinct).sum(),
        replaced: stats.iter().map(|s| s.replaced).sum(),
        ranges: stats.iter().map(|s| s.ranges).sum(),
        max_partition_distinct: stats.iter().map(|s| s.peak_entries).max().unwrap_or(0),
    };
    manifest.set("distinct_kmers", totals.distinct);
    manifest.set("replaced", totals.replaced);
    manifest.set("replacement_ranges", totals.ranges);
    manifest.set("max_partition_distinct", totals.max_partition_distinct);
    record_phase(&mut manifest, PHASE_MAP, started);
    manifest.save(&layout.manifest())?;
    Ok(totals)
}

/// Phase 3: merge replacement files into the binary id stream.
pub fn merge_phase(work_dir: &Path) -> Result<u64> {
    let started = Instant::now();
    let layout = Layout::new(work_dir);
    let mut manifest = Manifest::load(&layout.manifest())?;
    let cfg = config_from_manifest(&manifest, work_dir)?;
    let n_kmers: u64 = manifest.require_parsed("n_kmers")?;

    let paths: Vec<_> = (0..cfg.t).map(|i| layout.replacement_file(i)).collect();
    let ids_path = layout.id_stream();
    let file = File::create(&ids_path).map_err(|e| Error::io(&ids_path, e))?;
    let mut out = BufWriter::with_capacity(1 << 16, file);
    merge_replacements_with(&paths, n_kmers, |id| {
        out.write_all(&id.to_le_bytes())
            .map_err(|e| Error::io(&ids_path, e))
    })?;
    out.flush().map_err(|e| Error::io(&ids_path, e))?;

    record_phase(&mut manifest, PHASE_MERGE, started);
    manifest.save(&layout.manifest())?;
    Ok(n_kmers)
}

/// Phase 4: build the graph from the id stream and write the text edge list.
/// Returns (vertices, edges). With `densify` the vertex ids are renumbered
/// to 1..=V; by default first-occurrence ordinals are kept.
pub fn edges_phase(work_dir: &Path, densify: bool) -> Result<(u64, u64)> {
    let started = Instant::now();
    let layout = Layout::new(work_dir);
    let mut manifest = Manifest::load(&layout.manifest())?;
    let cfg = config_from_manifest(&manifest, work_dir)?;

    let stream = load_id_stream(work_dir)?;
    let mut graph = emit_edges(&stream, cfg.k)?;
    if densify {
        graph = graph.densify();
    }
    let edges_path = layout.edge_list();
    let file = File::create(&edges_path).map_err(|e| Error::io(&edges_path, e))?;
    let mut out = BufWriter::new(file);
    graph
        .write_edge_list(&mut out)
        .map_err(|e| Error::io(&edges_path, e))?;
    out.flush().map_err(|e| Error::io(&edges_path, e))?;

    manifest.set("vertices", graph.vertex_count());
    manifest.set("edges", graph.edge_count());
    record_phase(&mut manifest, PHASE_EDGES, started);
    manifest.save(&layout.manifest())?;
    Ok((graph.vertex_count() as u64, graph.edge_count() as u64))
}

/// Runs all four phases and returns the finished graph.
pub fn build(
    reads: impl Iterator<Item = Result<PackedSequence>>,
    cfg: &PartitionConfig,
    densify: bool,
) -> Result<DeBruijnGraph> {
    partition_phase(reads, cfg)?;
    map_phase(&cfg.work_dir)?;
    merge_phase(&cfg.work_dir)?;
    edges_phase(&cfg.work_dir, densify)?;
    load_graph(&cfg.work_dir)
}

/// Loads the id stream plus read-length sidecar from a working directory.
pub fn load_id_stream(work_dir: &Path) -> Result<IdStream> {
    let layout = Layout::new(work_dir);
    let ids = crate::partition::load_id_stream(&layout.id_stream())?;
    let lens_path = layout.read_lengths();
    let mut bytes = Vec::new();
    let file = File::open(&lens_path).map_err(|e| Error::io(&lens_path, e))?;
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(&lens_path, e))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::corrupt(&lens_path, "sidecar not a multiple of 4 bytes"));
    }
    let read_lengths = bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(IdStream { ids, read_lengths })
}

/// Reads back the edge list written by [`edges_phase`].
pub fn load_graph(work_dir: &Path) -> Result<DeBruijnGraph> {
    let layout = Layout::new(work_dir);
    let path = layout.edge_list();
    let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
    let mut graph = DeBruijnGraph::read_edge_list(&path, BufReader::new(file))?;
    // Isolated vertices are not representable in an edge list; recover them
    // from the id stream.
    let stream = load_id_stream(work_dir)?;
    for id in stream.ids {
        graph.add_vertex(id);
    }
    Ok(graph)
}
