//! Per-partition k-mer id mapping with range-compressed replacement files,
//! the merge that turns replacement files into one id per k-mer occurrence,
//! edge emission, and the in-memory reference builder used as the
//! correctness oracle.
//!
//! Replacement file format: 20-byte little-endian triples of
//! `(from_start: u64, to_start: u64, count: u32)`, sorted by `from_start`,
//! meaning `count` consecutive ordinals starting at `from_start` map to the
//! `count` consecutive ordinals starting at `to_start`. Records are emitted
//! only for duplicates; the merge synthesizes the identity for every
//! uncovered ordinal, so first occurrences keep their pre-assigned ids.

use std::collections::BinaryHeap;
use std::cmp::Reverse;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::graph::DeBruijnGraph;
use crate::partition::{PartitionFileReader, TABLE_ENTRY_BYTES};
use crate::seq::{canonical_kmer, PackedSequence};

/// Identity of a (canonical) k-mer for table lookups. K-mers up to 64 bases
/// pack into a u128; longer ones fall back to the packed payload bytes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KmerKey {
    Small(u128),
    Big(Box<[u8]>),
}

/// Incrementally computes the key of each k-mer of a read: push every base
/// in order and a key is returned once a full window is available. Keeps
/// both strands' packed values rolling so canonical keys cost O(1) per base.
pub struct KmerRoller {
    k: usize,
    rc_mode: bool,
    fwd: u128,
    rc: u128,
    mask: u128,
    filled: usize,
}

impl KmerRoller {
    pub fn new(k: usize, rc_mode: bool) -> Self {
        let mask = if k >= 64 {
            u128::MAX
        } else {
            (1u128 << (2 * k)) - 1
        };
        KmerRoller {
            k,
            rc_mode,
            fwd: 0,
            rc: 0,
            mask,
            filled: 0,
        }
    }

    /// Feeds `seq[index]`; returns the key of the k-mer ending at `index`
    /// once at least k bases have been pushed.
    #[inline]
    pub fn push(&mut self, seq: &PackedSequence, index: usize) -> Option<KmerKey> {
        self.filled += 1;
        if self.k > 64 {
            if self.filled >= self.k {
                return Some(kmer_key(seq, index + 1 - self.k, self.k, self.rc_mode));
            }
            return None;
        }
        let code = u128::from(seq.code(index));
        self.fwd = ((self.fwd << 2) | code) & self.mask;
        self.rc = (self.rc >> 2) | ((3 - code) << (2 * (self.k - 1)));
        if self.filled >= self.k {
            let key = if self.rc_mode {
                self.fwd.min(self.rc)
            } else {
                self.fwd
            };
            Some(KmerKey::Small(key))
        } else {
            None
        }
    }
}

/// Key of the k-mer starting at `start`, built by direct extraction.
pub fn kmer_key(seq: &PackedSequence, start: usize, k: usize, rc_mode: bool) -> KmerKey {
    if k <= 64 {
        let fwd = seq.range_value_u128(start, k);
        if rc_mode {
            let mut rc = 0u128;
            let mut rest = fwd;
            for _ in 0..k {
                rc = (rc << 2) | (3 - (rest & 3));
                rest >>= 2;
            }
            KmerKey::Small(fwd.min(rc))
        } else {
            KmerKey::Small(fwd)
        }
    } else {
        let sub = seq.subsequence(start, k);
        let canon = if rc_mode { canonical_kmer(&sub) } else { sub };
        KmerKey::Big(canon.payload().into())
    }
}

/// Range-compressed id replacement: `count` consecutive ordinals starting at
/// `from_start` are replaced by the ones starting at `to_start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplacementRange {
    pub from_start: u64,
    pub to_start: u64,
    pub count: u32,
}

pub const REPLACEMENT_RECORD_BYTES: u64 = 20;

/// Streaming reader over one replacement file, validating that ranges are
/// sorted, non-overlapping and point strictly backwards.
pub struct ReplacementFileReader {
    path: PathBuf,
    reader: BufReader<File>,
    prev_end: u64,
}

impl ReplacementFileReader {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(ReplacementFileReader {
            path: path.to_path_buf(),
            reader: BufReader::with_capacity(1 << 16, file),
            prev_end: 0,
        })
    }

    fn read_range(&mut self) -> Result<Option<ReplacementRange>> {
        let mut bytes = [0u8; 20];
        match self.reader.read_exact(&mut bytes) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
            Err(e) => return Err(Error::io(&self.path, e)),
        }
        let range = ReplacementRange {
            from_start: u64::from_le_bytes(bytes[..8].try_into().unwrap()),
            to_start: u64::from_le_bytes(bytes[8..16].try_into().unwrap()),
            count: u32::from_le_bytes(bytes[16..].try_into().unwrap()),
        };
        if range.count == 0 {
            return Err(Error::corrupt(&self.path, "zero-length replacement range"));
        }
        if range.to_start >= range.from_start {
            return Err(Error::corrupt(
                &self.path,
                format!(
                    "range {} -> {} does not point backwards",
                    range.from_start, range.to_start
                ),
            ));
        }
        if range.from_start < self.prev_end {
            return Err(Error::corrupt(
                &self.path,
                format!("range at {} overlaps its predecessor", range.from_start),
            ));
        }
        self.prev_end = range.from_start + u64::from(range.count);
        Ok(Some(range))
    }
}

impl Iterator for ReplacementFileReader {
    type Item = Result<ReplacementRange>;

    fn next(&mut self) -> Option<Self::Item> {
        self.read_range().transpose()
    }
}

/// Counters from mapping one partition.
#[derive(Debug, Clone, Copy, Default)]
pub struct MapStats {
    pub distinct: u64,
    pub occurrences: u64,
    pub replaced: u64,
    pub ranges: u64,
    /// Peak k-mer table entries; the partition's distinct count, since
    /// entries are never evicted.
    pub peak_entries: u64,
}

/// Maps one partition file: keeps the first-seen ordinal of every (canonical)
/// k-mer and writes a range-compressed replacement record for each later
/// occurrence. Input records are sorted by ordinal, so emitted ranges come
/// out sorted by `from_start` without extra work.
pub fn map_partition(
    partition_path: &Path,
    replacement_path: &Path,
    k: usize,
    rc_mode: bool,
    memory_budget: u64,
    partition_index: usize,
) -> Result<MapStats> {
    let mut table: FxHashMap<KmerKey, u64> = FxHashMap::default();
    let mut stats = MapStats::default();
    let out_file =
        File::create(replacement_path).map_err(|e| Error::io(replacement_path, e))?;
    let mut out = BufWriter::with_capacity(1 << 16, out_file);
    let mut pending: Option<ReplacementRange> = None;

    for record in PartitionFileReader::open(partition_path)? {
        let record = record?;
        if record.sequence.len() < k {
            return Err(Error::corrupt(
                partition_path,
                format!("record shorter than k at ordinal {}", record.start_ordinal),
            ));
        }
        let mut roller = KmerRoller::new(k, rc_mode);
        for i in 0..record.sequence.len() {
            let Some(key) = roller.push(&record.sequence, i) else {
                continue;
            };
            let ordinal = record.start_ordinal + (i + 1 - k) as u64;
            stats.occurrences += 1;
            match table.entry(key) {
                std::collections::hash_map::Entry::Occupied(first) => {
                    let target = *first.get();
                    stats.replaced += 1;
                    pending = match pending {
                        Some(mut range)
                            if ordinal == range.from_start + u64::from(range.count)
                                && target == range.to_start + u64::from(range.count) =>
                        {
                            range.count += 1;
                            Some(range)
                        }
                        other => {
                            if let Some(range) = other {
                                write_range(&mut out, &range, replacement_path)?;
                                stats.ranges += 1;
                            }
                            Some(ReplacementRange {
                                from_start: ordinal,
                                to_start: target,
                                count: 1,
                            })
                        }
                    };
                }
                std::collections::hash_map::Entry::Vacant(slot) => {
                    slot.insert(ordinal);
                }
            }
        }
        let needed = table.len() as u64 * TABLE_ENTRY_BYTES;
        if needed > memory_budget {
            return Err(Error::MemoryBudget {
                partition: partition_index,
                needed,
                budget: memory_budget,
            });
        }
    }
    if let Some(range) = pending {
        write_range(&mut out, &range, replacement_path)?;
        stats.ranges += 1;
    }
    out.flush().map_err(|e| Error::io(replacement_path, e))?;
    stats.distinct = table.len() as u64;
    stats.peak_entries = table.len() as u64;
    Ok(stats)
}

fn write_range(out: &mut impl Write, range: &ReplacementRange, path: &Path) -> Result<()> {
    let mut bytes = [0u8; 20];
    bytes[..8].copy_from_slice(&range.from_start.to_le_bytes());
    bytes[8..16].copy_from_slice(&range.to_start.to_le_bytes());
    bytes[16..].copy_from_slice(&range.count.to_le_bytes());
    out.write_all(&bytes).map_err(|e| Error::io(path, e))
}

/// Merges all replacement files into the final id stream: ordinal `o` emits
/// its replacement target when some range covers it, and `o` itself
/// otherwise. Each id is passed to `sink` in ordinal order 1..=N.
pub fn merge_replacements_with(
    paths: &[PathBuf],
    n_kmers: u64,
    mut sink: impl FnMut(u64) -> Result<()>,
) -> Result<()> {
    let mut readers = Vec::with_capacity(paths.len());
    let mut heads: Vec<Option<ReplacementRange>> = Vec::with_capacity(paths.len());
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> = BinaryHeap::new();
    for (i, path) in paths.iter().enumerate() {
        let mut reader = ReplacementFileReader::open(path)?;
        match reader.next().transpose()? {
            Some(range) => {
                heap.push(Reverse((range.from_start, i)));
                heads.push(Some(range));
            }
            None => heads.push(None),
        }
        readers.push(reader);
    }

    let mut active: Option<ReplacementRange> = None;
    for ordinal in 1..=n_kmers {
        while let Some(&Reverse((from, i))) = heap.peek() {
            if from > ordinal {
                break;
            }
            if from < ordinal || active.is_some() {
                return Err(Error::corrupt(
                    &readers[i].path,
                    format!("replacement ranges overlap at ordinal {from}"),
                ));
            }
            heap.pop();
            active = heads[i].take();
            if let Some(next) = readers[i].next().transpose()? {
                heap.push(Reverse((next.from_start, i)));
                heads[i] = Some(next);
            }
        }
        match &active {
            Some(range) => {
                sink(range.to_start + (ordinal - range.from_start))?;
                if ordinal + 1 == range.from_start + u64::from(range.count) {
                    active = None;
                }
            }
            None => sink(ordinal)?,
        }
    }
    if active.is_some() || !heap.is_empty() {
        return Err(Error::corrupt(
            paths.first().map(PathBuf::as_path).unwrap_or(Path::new("")),
            "replacement range extends past the last ordinal",
        ));
    }
    Ok(())
}

/// In-memory variant of the merge.
pub fn merge_replacements(paths: &[PathBuf], n_kmers: u64) -> Result<Vec<u64>> {
    let mut ids = Vec::with_capacity(n_kmers as usize);
    merge_replacements_with(paths, n_kmers, |id| {
        ids.push(id);
        Ok(())
    })?;
    Ok(ids)
}

/// The final ids, one per k-mer occurrence in global ordinal order, plus the
/// read lengths needed to re-segment the stream into per-read id sequences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdStream {
    pub ids: Vec<u64>,
    pub read_lengths: Vec<u32>,
}

impl IdStream {
    /// Per-read id slices; `read_lengths` holds base lengths, so a read of
    /// length m contributes m - k + 1 ids.
    pub fn segments(&self, k: usize) -> Result<Vec<&[u64]>> {
        let mut segments = Vec::with_capacity(self.read_lengths.len());
        let mut offset = 0usize;
        for &len in &self.read_lengths {
            let kmers = (len as usize)
                .checked_sub(k - 1)
                .ok_or_else(|| Error::InvalidArgument("read shorter than k in sidecar".into()))?;
            if offset + kmers > self.ids.len() {
                return Err(Error::InvalidArgument(format!(
                    "id stream of {} ids is shorter than the {} the sidecar implies",
                    self.ids.len(),
                    offset + kmers
                )));
            }
            segments.push(&self.ids[offset..offset + kmers]);
            offset += kmers;
        }
        if offset != self.ids.len() {
            return Err(Error::InvalidArgument(format!(
                "id stream holds {} ids but the sidecar accounts for {}",
                self.ids.len(),
                offset
            )));
        }
        Ok(segments)
    }
}

/// Builds the graph from an id stream: one vertex per distinct id, and for
/// every pair of ordinals adjacent within a read, weight 1 on the directed
/// edge between their ids. No edge spans a read boundary.
pub fn emit_edges(stream: &IdStream, k: usize) -> Result<DeBruijnGraph> {
    let mut graph = DeBruijnGraph::new();
    for segment in stream.segments(k)? {
        for &id in segment {
            graph.add_vertex(id);
        }
        for pair in segment.windows(2) {
            graph.add_edge(pair[0], pair[1]);
        }
    }
    Ok(graph)
}

/// Single-pass in-memory oracle realizing the graph definition directly:
/// ids are first-occurrence ordinals, duplicate detection is a plain table
/// over windows of the raw reads, with no minimizer or partition machinery.
pub fn reference_build(
    reads: impl Iterator<Item = Result<PackedSequence>>,
    k: usize,
    rc_mode: bool,
) -> Result<DeBruijnGraph> {
    let mut table: FxHashMap<KmerKey, u64> = FxHashMap::default();
    let mut graph = DeBruijnGraph::new();
    let mut ordinal = 0u64;
    for read in reads {
        let read = read?;
        if read.len() < k {
            return Err(Error::InvalidArgument(
                "reference builder requires reads of length >= k".into(),
            ));
        }
        let mut prev: Option<u64> = None;
        for start in 0..=read.len() - k {
            ordinal += 1;
            // Key computed by direct per-window extraction, independently of
            // the rolling path the pipeline mapper uses.
            let key = kmer_key(&read, start, k, rc_mode);
            let id = *table.entry(key).or_insert(ordinal);
            graph.add_vertex(id);
            if let Some(prev) = prev {
                graph.add_edge(prev, id);
            }
            prev = Some(id);
        }
    }
    Ok(graph)
}
