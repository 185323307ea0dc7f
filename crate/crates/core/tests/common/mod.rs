//! Shared helpers for the integration and acceptance suites: corpus
//! generators, an independent duplicate-class oracle, and pipeline drivers.
#![allow(dead_code)] // each test target uses its own subset

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap;

use msp_core::map_merge::{map_partition, merge_replacements};
use msp_core::minimizer::Scanner;
use msp_core::partition::{msp_partition, PartitionConfig, ReadSource, WrapMode};
use msp_core::seq::PackedSequence;
use msp_core::Result;

pub fn uniform_read(rng: &mut impl Rng, m: usize) -> PackedSequence {
    PackedSequence::from_codes((0..m).map(|_| rng.gen_range(0..4u8)))
}

/// Independent uniform reads: the random-string model.
pub fn uniform_reads(count: usize, m: usize, seed: u64) -> Vec<PackedSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| uniform_read(&mut rng, m)).collect()
}

/// Reads sampled from one random genome, half of them reverse-complemented;
/// overlapping reads give the corpus a rich duplicate-k-mer structure.
pub fn genome_reads(count: usize, m: usize, genome_len: usize, seed: u64) -> Vec<PackedSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let genome = uniform_read(&mut rng, genome_len);
    (0..count)
        .map(|_| {
            let start = rng.gen_range(0..=genome_len - m);
            let read = genome.subsequence(start, m);
            if rng.gen_bool(0.5) {
                read.reverse_complement()
            } else {
                read
            }
        })
        .collect()
}

/// Streaming generator of uniform reads; re-iterable, nothing materialized.
pub struct RandomSource {
    pub count: u64,
    pub m: usize,
    pub seed: u64,
}

impl ReadSource for RandomSource {
    fn reads(&self) -> Result<Box<dyn Iterator<Item = Result<PackedSequence>> + '_>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let m = self.m;
        Ok(Box::new(
            (0..self.count).map(move |_| Ok(uniform_read(&mut rng, m))),
        ))
    }
}

/// Do two per-occurrence id streams induce the same partition of positions
/// into duplicate classes?
pub fn same_duplicate_classes(a: &[u64], b: &[u64]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut fwd: FxHashMap<u64, u64> = FxHashMap::default();
    let mut bwd: FxHashMap<u64, u64> = FxHashMap::default();
    for (&x, &y) in a.iter().zip(b) {
        if *fwd.entry(x).or_insert(y) != y || *bwd.entry(y).or_insert(x) != x {
            return false;
        }
    }
    true
}

/// Duplicate-class oracle: first-occurrence ids computed over ASCII k-mer
/// strings, canonicalized by string comparison. Shares nothing with the
/// pipeline's packed rolling tables.
pub fn reference_ids(reads: &[PackedSequence], k: usize, rc_mode: bool) -> Vec<u64> {
    let mut table: FxHashMap<Vec<u8>, u64> = FxHashMap::default();
    let mut ids = Vec::new();
    let mut ordinal = 0u64;
    for read in reads {
        let ascii = read.to_ascii();
        for window in ascii.windows(k) {
            ordinal += 1;
            let key = if rc_mode {
                let rc: Vec<u8> = window
                    .iter()
                    .rev()
                    .map(|&b| match b {
                        b'A' => b'T',
                        b'C' => b'G',
                        b'G' => b'C',
                        _ => b'A',
                    })
                    .collect();
                if rc.as_slice() < window {
                    rc
                } else {
                    window.to_vec()
                }
            } else {
                window.to_vec()
            };
            ids.push(*table.entry(key).or_insert(ordinal));
        }
    }
    ids
}

pub fn msp_config(dir: &Path, k: usize, p: usize, t: usize, rc_mode: bool) -> PartitionConfig {
    PartitionConfig {
        k,
        p,
        t,
        rc_mode,
        scanner: Scanner::Simple,
        wrap: WrapMode::Hash,
        work_dir: dir.to_path_buf(),
        memory_budget: 2 << 30,
    }
}

/// Partition + map + merge over an in-memory corpus, returning the final
/// per-occurrence ids.
pub fn msp_ids(reads: &[PackedSequence], cfg: &PartitionConfig) -> Vec<u64> {
    let summary = msp_partition(reads.iter().cloned().map(Ok), cfg).expect("partitioning");
    let layout = cfg.layout();
    let mut paths = Vec::new();
    for index in 0..cfg.t {
        let path = layout.replacement_file(index);
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        map_partition(
            &layout.partition_file(index),
            &path,
            cfg.k,
            cfg.rc_mode,
            cfg.memory_budget,
            index,
        )
        .expect("mapping");
        paths.push(path);
    }
    merge_replacements(&paths, summary.n_kmers).expect("merging")
}
