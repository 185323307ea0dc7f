//! Scattering super k-mers into wrapped on-disk partitions, plus the two
//! classic scatter-gather baselines (horizontal and bucket partitioning)
//! used for cross-validation.
//!
//! Partition file format, per record: 8-byte little-endian start ordinal,
//! 4-byte little-endian sequence length in bases, then `ceil(len/4)` bytes
//! of packed sequence (4 bases per byte, first base in the high bits).
//! Records appear in strictly increasing start-ordinal order; this is the
//! contract the mapper depends on.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::manifest::Layout;
use crate::map_merge::{KmerKey, KmerRoller};
use crate::minimizer::Scanner;
use crate::seq::{PackedSequence, ShortRead};

/// Multiplier for the wrapped-partition hash. The packed 2p-bit minimizer is
/// interpreted as an unsigned integer, multiplied by this fixed odd 64-bit
/// constant, and the high 32 bits are reduced mod t. Part of the persistent
/// file-format contract: changing it invalidates existing partition files.
pub const WRAP_HASH_MULTIPLIER: u64 = 0x9E37_79B9_7F4A_7C15;

/// Approximate bytes per k-mer table entry, used to enforce the advisory
/// memory budget before a hash table is allowed to grow.
pub const TABLE_ENTRY_BYTES: u64 = 48;

/// How wrapped partition indices are derived from minimizer values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WrapMode {
    /// `H(minimizer) mod t` with the multiplicative hash above.
    Hash,
    /// The packed minimizer value itself; requires `t = 4^p`.
    Identity,
}

impl std::str::FromStr for WrapMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<WrapMode> {
        match s {
            "hash" => Ok(WrapMode::Hash),
            "identity" => Ok(WrapMode::Identity),
            other => Err(Error::InvalidArgument(format!(
                "unknown wrap mode {other:?}; expected hash or identity"
            ))),
        }
    }
}

impl std::fmt::Display for WrapMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            WrapMode::Hash => "hash",
            WrapMode::Identity => "identity",
        })
    }
}

/// Configuration shared by the partitioning, mapping and merging phases.
#[derive(Debug, Clone)]
pub struct PartitionConfig {
    pub k: usize,
    pub p: usize,
    pub t: usize,
    pub rc_mode: bool,
    pub scanner: Scanner,
    pub wrap: WrapMode,
    pub work_dir: PathBuf,
    /// Advisory: mappers refuse to grow a table past this many bytes.
    pub memory_budget: u64,
}

impl PartitionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.p > self.k {
            return Err(Error::InvalidArgument(format!(
                "require 1 <= p <= k, got p = {}, k = {}",
                self.p, self.k
            )));
        }
        if self.t == 0 {
            return Err(Error::InvalidArgument("t must be at least 1".into()));
        }
        if self.wrap == WrapMode::Identity {
            if self.p > 16 {
                return Err(Error::InvalidArgument(
                    "identity wrap is limited to p <= 16".into(),
                ));
            }
            if self.t != 1usize << (2 * self.p) {
                return Err(Error::InvalidArgument(format!(
                    "identity wrap requires t = 4^p = {}, got t = {}",
                    1usize << (2 * self.p),
                    self.t
                )));
            }
        }
        Ok(())
    }

    pub fn layout(&self) -> Layout {
        Layout::new(&self.work_dir)
    }

    pub fn partition_index(&self, minimizer: &PackedSequence) -> usize {
        match self.wrap {
            WrapMode::Hash => wrap_hash(minimizer, self.t),
            WrapMode::Identity => minimizer.prefix_value_u64(minimizer.len()) as usize,
        }
    }
}

/// Deterministic, seedless wrapped-partition index in `[0, t)`.
pub fn wrap_hash(minimizer: &PackedSequence, t: usize) -> usize {
    let value = if minimizer.len() <= 32 {
        minimizer.prefix_value_u64(minimizer.len())
    } else {
        // Long minimizers: FNV-1a fold of the packed payload.
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        for &byte in minimizer.payload() {
            h ^= u64::from(byte);
            h = h.wrapping_mul(0x100_0000_01b3);
        }
        h
    };
    ((value.wrapping_mul(WRAP_HASH_MULTIPLIER) >> 32) % t as u64) as usize
}

/// One partition-file record: a super k-mer and the global ordinal of its
/// first k-mer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionRecord {
    pub start_ordinal: u64,
    pub sequence: PackedSequence,
}

impl PartitionRecord {
    pub fn encoded_len(&self) -> u64 {
        12 + self.sequence.payload().len() as u64
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.start_ordinal.to_le_bytes());
        out.extend_from_slice(&(self.sequence.len() as u32).to_le_bytes());
        out.extend_from_slice(self.sequence.payload());
    }
}

/// Streaming reader over one partition file.
pub struct PartitionFileReader {
    path: PathBuf,
    reader: BufReader<File>,
    last_ordinal: Option<u64>,
}

impl PartitionFileReader {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(PartitionFileReader {
            path: path.to_path_buf(),
            reader: BufReader::with_capacity(1 << 16, file),
            last_ordinal: None,
        })
    }

    fn read_record(&mut self) -> Result<Option<PartitionRecord>> {
        let mut header = [0u8; 12];
        match self.reader.read_exact(&mut header[..8]) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
            Err(e) => return Err(Error::io(&self.path, e)),
        }
        self.reader
            .read_exact(&mut header[8..])
            .map_err(|e| Error::io(&self.path, e))?;
        let ordinal = u64::from_le_bytes(header[..8].try_into().unwrap());
        let len = u32::from_le_bytes(header[8..].try_into().unwrap()) as usize;
        let mut payload = vec![0u8; len.div_ceil(4)];
        self.reader
            .read_exact(&mut payload)
            .map_err(|e| Error::io(&self.path, e))?;
        if self.last_ordinal.is_some_and(|prev| ordinal <= prev) {
            return Err(Error::corrupt(
                &self.path,
                format!("record ordinals not strictly increasing at {ordinal}"),
            ));
        }
        self.last_ordinal = Some(ordinal);
        let sequence = PackedSequence::from_payload(len, payload)
            .map_err(|_| Error::corrupt(&self.path, "record payload length mismatch"))?;
        Ok(Some(PartitionRecord {
            start_ordinal: ordinal,
            sequence,
        }))
    }
}

impl Iterator for PartitionFileReader {
    type Item = Result<PartitionRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        self.read_record().transpose()
    }
}

/// Per-partition counters reported in the manifest.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PartitionStats {
    pub records: u64,
    pub kmers: u64,
    pub bases: u64,
    pub bytes: u64,
}

/// Outcome of the partitioning phase.
#[derive(Debug, Clone)]
pub struct PartitionSummary {
    /// Total k-mer occurrences N; ordinals are 1..=N.
    pub n_kmers: u64,
    pub reads: u64,
    pub input_bases: u64,
    pub breaks: u64,
    /// Total bases stored across partition files; equals
    /// `input_bases + (k - 1) * breaks`.
    pub partition_bases: u64,
    pub partition_bytes: u64,
    pub per_partition: Vec<PartitionStats>,
}

/// Reads per parallel scan chunk.
const CHUNK_READS: usize = 2048;
/// Chunks scanned per wave; bounds memory while keeping writes batched.
const WAVE_CHUNKS: usize = 32;

struct ChunkOutput {
    buffers: FxHashMap<u32, Vec<u8>>,
    stats: FxHashMap<u32, PartitionStats>,
    breaks: u64,
    super_bases: u64,
}

/// Scatters a read stream into `cfg.t` wrapped partition files under the
/// working directory, assigning each k-mer occurrence its global ordinal
/// (increasing from 1 in scan order). Also writes the read-length sidecar
/// used later for edge emission. Reads shorter than k must have been
/// filtered upstream and are rejected here.
pub fn msp_partition(
    reads: impl Iterator<Item = Result<PackedSequence>>,
    cfg: &PartitionConfig,
) -> Result<PartitionSummary> {
    cfg.validate()?;
    let layout = cfg.layout();
    create_partition_files(&layout, cfg.t)?;

    let lens_path = layout.read_lengths();
    let lens_file = File::create(&lens_path).map_err(|e| Error::io(&lens_path, e))?;
    let mut lens_out = BufWriter::new(lens_file);

    let mut summary = PartitionSummary {
        n_kmers: 0,
        reads: 0,
        input_bases: 0,
        breaks: 0,
        partition_bases: 0,
        partition_bytes: 0,
        per_partition: vec![PartitionStats::default(); cfg.t],
    };

    let mut reads = reads;
    let mut next_ordinal = 1u64;
    loop {
        // Assemble one wave of chunks, each read carrying its pre-assigned
        // ordinal base, so chunks can be scanned in parallel and written
        // back in order.
        let mut wave: Vec<Vec<ShortRead>> = Vec::new();
        'outer: for _ in 0..WAVE_CHUNKS {
            let mut chunk = Vec::with_capacity(CHUNK_READS);
            while chunk.len() < CHUNK_READS {
                match reads.next() {
                    Some(read) => {
                        let sequence = read?;
                        if sequence.len() < cfg.k {
                            return Err(Error::InvalidArgument(format!(
                                "read of length {} is shorter than k = {}; \
                                 filter short reads at ingestion",
                                sequence.len(),
                                cfg.k
                            )));
                        }
                        summary.reads += 1;
                        summary.input_bases += sequence.len() as u64;
                        lens_out
                            .write_all(&(sequence.len() as u32).to_le_bytes())
                            .map_err(|e| Error::io(&lens_path, e))?;
                        let ordinal_base = next_ordinal;
                        next_ordinal += (sequence.len() - cfg.k + 1) as u64;
                        chunk.push(ShortRead {
                            ordinal_base,
                            sequence,
                        });
                    }
                    None => {
                        if !chunk.is_empty() {
                            wave.push(chunk);
                        }
                        break 'outer;
                    }
                }
            }
            wave.push(chunk);
        }
        if wave.is_empty() {
            break;
        }
        let done =
            wave.len() < WAVE_CHUNKS || wave.last().map_or(true, |c| c.len() < CHUNK_READS);

        let outputs: Vec<Result<ChunkOutput>> = wave
            .par_iter()
            .map(|chunk| scan_chunk(chunk, cfg))
            .collect();

        // Single writer: append every chunk's buffers in chunk order so each
        // partition file stays sorted by ordinal.
        let mut wave_buffers: FxHashMap<u32, Vec<u8>> = FxHashMap::default();
        for output in outputs {
            let output = output?;
            summary.breaks += output.breaks;
            summary.partition_bases += output.super_bases;
            for (index, buf) in output.buffers {
                wave_buffers.entry(index).or_default().extend_from_slice(&buf);
            }
            for (index, stats) in output.stats {
                let slot = &mut summary.per_partition[index as usize];
                slot.records += stats.records;
                slot.kmers += stats.kmers;
                slot.bases += stats.bases;
                slot.bytes += stats.bytes;
            }
        }
        for (index, buf) in wave_buffers {
            let path = layout.partition_file(index as usize);
            let mut file = OpenOptions::new()
                .append(true)
                .open(&path)
                .map_err(|e| Error::io(&path, e))?;
            file.write_all(&buf).map_err(|e| Error::io(&path, e))?;
        }
        if done {
            break;
        }
    }
    lens_out.flush().map_err(|e| Error::io(&lens_path, e))?;

    summary.n_kmers = next_ordinal - 1;
    summary.partition_bytes = summary.per_partition.iter().map(|s| s.bytes).sum();
    debug_assert_eq!(
        summary.partition_bases,
        summary.input_bases + (cfg.k as u64 - 1) * summary.breaks
    );
    Ok(summary)
}

fn scan_chunk(chunk: &[ShortRead], cfg: &PartitionConfig) -> Result<ChunkOutput> {
    let mut output = ChunkOutput {
        buffers: FxHashMap::default(),
        stats: FxHashMap::default(),
        breaks: 0,
        super_bases: 0,
    };
    for read in chunk {
        let (skmers, stats) =
            cfg.scanner
                .scan(&read.sequence, cfg.k, cfg.p, cfg.rc_mode, read.ordinal_base)?;
        output.breaks += stats.breaks;
        for skmer in skmers {
            let index = cfg.partition_index(&skmer.minimizer) as u32;
            let record = PartitionRecord {
                start_ordinal: skmer.start_ordinal,
                sequence: skmer.sequence,
            };
            let slot = output.stats.entry(index).or_default();
            slot.records += 1;
            slot.kmers += record.sequence.len() as u64 - cfg.k as u64 + 1;
            slot.bases += record.sequence.len() as u64;
            slot.bytes += record.encoded_len();
            output.super_bases += record.sequence.len() as u64;
            record.encode_into(output.buffers.entry(index).or_default());
        }
    }
    Ok(output)
}

fn create_partition_files(layout: &Layout, t: usize) -> Result<()> {
    for index in 0..t {
        let path = layout.partition_file(index);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        File::create(&path).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// A re-iterable source of reads; the baselines scan their input twice.
pub trait ReadSource: Sync {
    fn reads(&self) -> Result<Box<dyn Iterator<Item = Result<PackedSequence>> + '_>>;
}

/// In-memory read set.
pub struct VecSource(pub Vec<PackedSequence>);

impl ReadSource for VecSource {
    fn reads(&self) -> Result<Box<dyn Iterator<Item = Result<PackedSequence>> + '_>> {
        Ok(Box::new(self.0.iter().cloned().map(Ok)))
    }
}

/// Outcome of a baseline run. The per-occurrence id stream is written to
/// `id_stream` (8-byte little-endian ids in ordinal order) rather than held
/// in memory.
#[derive(Debug, Clone)]
pub struct BaselineSummary {
    pub n_kmers: u64,
    pub distinct: u64,
    /// Bytes of k-mers spilled to disk before mapping.
    pub spill_bytes: u64,
    pub id_stream: PathBuf,
}

fn key_payload_bytes(k: usize) -> usize {
    if k <= 64 {
        16
    } else {
        k.div_ceil(4)
    }
}

fn write_key(out: &mut Vec<u8>, key: &KmerKey) {
    match key {
        KmerKey::Small(v) => out.extend_from_slice(&v.to_le_bytes()),
        KmerKey::Big(payload) => out.extend_from_slice(payload),
    }
}

fn read_key(bytes: &[u8], k: usize) -> KmerKey {
    if k <= 64 {
        KmerKey::Small(u128::from_le_bytes(bytes.try_into().unwrap()))
    } else {
        KmerKey::Big(bytes.into())
    }
}

fn check_budget(partition: usize, entries: u64, budget: u64) -> Result<()> {
    let needed = entries * TABLE_ENTRY_BYTES;
    if needed > budget {
        Err(Error::MemoryBudget {
            partition,
            needed,
            budget,
        })
    } else {
        Ok(())
    }
}

/// Horizontal partitioning: split the reads into `t` equal chunks, build a
/// local first-occurrence table per chunk, spill each table sorted by k-mer,
/// and k-way merge the spills into a global mapping. A k-mer appearing in
/// several chunks keeps the id from the smallest chunk index.
pub fn h_partition(
    source: &dyn ReadSource,
    k: usize,
    t: usize,
    rc_mode: bool,
    work_dir: &Path,
    memory_budget: u64,
) -> Result<BaselineSummary> {
    if t == 0 {
        return Err(Error::InvalidArgument("t must be at least 1".into()));
    }
    fs::create_dir_all(work_dir).map_err(|e| Error::io(work_dir, e))?;
    let total_reads = {
        let mut n = 0u64;
        for read in source.reads()? {
            read?;
            n += 1;
        }
        n
    };
    let chunk_size = (total_reads as usize).div_ceil(t).max(1);

    // Pass 1: per-chunk local tables, spilled sorted by k-mer string.
    let mut spill_paths = Vec::new();
    let mut spill_bytes = 0u64;
    let mut chunk_distinct = Vec::new();
    {
        let mut reads = source.reads()?;
        for chunk_idx in 0..t {
            let mut table: FxHashMap<KmerKey, u32> = FxHashMap::default();
            for _ in 0..chunk_size {
                let Some(read) = reads.next() else { break };
                let read = read?;
                let mut roller = KmerRoller::new(k, rc_mode);
                for i in 0..read.len() {
                    if let Some(key) = roller.push(&read, i) {
                        let next_id = table.len() as u32 + 1;
                        table.entry(key).or_insert(next_id);
                    }
                }
                check_budget(chunk_idx, table.len() as u64, memory_budget)?;
            }
            let mut entries: Vec<(KmerKey, u32)> = table.into_iter().collect();
            entries.sort_unstable();
            let path = work_dir.join(format!("hspill_{chunk_idx:06}.bin"));
            let mut out = BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?);
            let mut buf = Vec::new();
            for (key, local_id) in &entries {
                buf.clear();
                write_key(&mut buf, key);
                buf.extend_from_slice(&local_id.to_le_bytes());
                out.write_all(&buf).map_err(|e| Error::io(&path, e))?;
                spill_bytes += buf.len() as u64;
            }
            out.flush().map_err(|e| Error::io(&path, e))?;
            chunk_distinct.push(entries.len() as u64);
            spill_paths.push(path);
        }
    }

    // Global ids: chunk-local insertion ids offset by the distinct counts of
    // all earlier chunks, so the winner of a duplicate group (smallest chunk
    // index) determines the id.
    let mut offsets = vec![0u64; t];
    for i in 1..t {
        offsets[i] = offsets[i - 1] + chunk_distinct[i - 1];
    }

    // Pass 2: tournament merge of the sorted spills.
    let key_len = key_payload_bytes(k);
    let mut heads: Vec<Option<(KmerKey, u32)>> = Vec::new();
    let mut readers = Vec::new();
    for path in &spill_paths {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = BufReader::new(file);
        let head = read_spill_entry(&mut reader, key_len, k, path)?;
        heads.push(head);
        readers.push(reader);
    }
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;
    let mut heap: BinaryHeap<Reverse<(KmerKey, usize)>> = heads
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.as_ref().map(|(key, _)| Reverse((key.clone(), i))))
        .collect();
    let mut mapping: FxHashMap<KmerKey, u64> = FxHashMap::default();
    while let Some(Reverse((key, chunk_idx))) = heap.pop() {
        let (head_key, local_id) = heads[chunk_idx].take().expect("head in heap");
        debug_assert_eq!(head_key, key);
        // First pop of a key group has the smallest chunk index.
        mapping
            .entry(key)
            .or_insert(offsets[chunk_idx] + u64::from(local_id));
        let next = read_spill_entry(&mut readers[chunk_idx], key_len, k, &spill_paths[chunk_idx])?;
        if let Some((next_key, _)) = &next {
            heap.push(Reverse((next_key.clone(), chunk_idx)));
        }
        heads[chunk_idx] = next;
    }

    // Pass 3: rescan the reads and emit the per-occurrence id stream.
    let id_path = work_dir.join("ids.bin");
    let mut out = BufWriter::new(File::create(&id_path).map_err(|e| Error::io(&id_path, e))?);
    let mut n_kmers = 0u64;
    for read in source.reads()? {
        let read = read?;
        let mut roller = KmerRoller::new(k, rc_mode);
        for i in 0..read.len() {
            if let Some(key) = roller.push(&read, i) {
                let id = mapping[&key];
                out.write_all(&id.to_le_bytes())
                    .map_err(|e| Error::io(&id_path, e))?;
                n_kmers += 1;
            }
        }
    }
    out.flush().map_err(|e| Error::io(&id_path, e))?;

    Ok(BaselineSummary {
        n_kmers,
        distinct: mapping.len() as u64,
        spill_bytes,
        id_stream: id_path,
    })
}

fn read_spill_entry(
    reader: &mut BufReader<File>,
    key_len: usize,
    k: usize,
    path: &Path,
) -> Result<Option<(KmerKey, u32)>> {
    let mut key_bytes = vec![0u8; key_len];
    match reader.read_exact(&mut key_bytes) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(Error::io(path, e)),
    }
    let mut id_bytes = [0u8; 4];
    reader
        .read_exact(&mut id_bytes)
        .map_err(|e| Error::io(path, e))?;
    Ok(Some((
        read_key(&key_bytes, k),
        u32::from_le_bytes(id_bytes),
    )))
}

/// How bucket partitioning scatters k-mers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BucketKey {
    /// Hash of the whole (canonical) k-mer.
    FullKmer,
    /// Packed value of the last four symbols, the variant used by classic
    /// out-of-core layouts.
    LastFour,
}

/// Bucket partitioning: every k-mer occurrence is spilled to one of `t`
/// bucket files, each bucket is mapped in memory with ids offset by the
/// distinct counts of earlier buckets, and the per-bucket id streams are
/// merged back into occurrence order.
pub fn b_partition(
    source: &dyn ReadSource,
    k: usize,
    t: usize,
    rc_mode: bool,
    work_dir: &Path,
    memory_budget: u64,
    bucket_key: BucketKey,
) -> Result<BaselineSummary> {
    if t == 0 {
        return Err(Error::InvalidArgument("t must be at least 1".into()));
    }
    fs::create_dir_all(work_dir).map_err(|e| Error::io(work_dir, e))?;
    let key_len = key_payload_bytes(k);

    // Pass 1: scatter (ordinal, k-mer) pairs to bucket files.
    let bucket_paths: Vec<PathBuf> = (0..t)
        .map(|i| work_dir.join(format!("bucket_{i:06}.bin")))
        .collect();
    let mut spill_bytes = 0u64;
    let n_kmers;
    {
        let mut writers: Vec<BufWriter<File>> = bucket_paths
            .iter()
            .map(|path| {
                File::create(path)
                    .map(|f| BufWriter::with_capacity(1 << 16, f))
                    .map_err(|e| Error::io(path, e))
            })
            .collect::<Result<_>>()?;
        let mut ordinal = 0u64;
        let mut buf = Vec::new();
        for read in source.reads()? {
            let read = read?;
            let mut roller = KmerRoller::new(k, rc_mode);
            for i in 0..read.len() {
                if let Some(key) = roller.push(&read, i) {
                    ordinal += 1;
                    // Both variants bucket the canonical key, so every
                    // occurrence of a k-mer (either strand) shares a bucket.
                    let bucket = match bucket_key {
                        BucketKey::FullKmer => bucket_of(&key, t),
                        BucketKey::LastFour => last_four_of_key(&key, k) % t,
                    };
                    buf.clear();
                    buf.extend_from_slice(&ordinal.to_le_bytes());
                    write_key(&mut buf, &key);
                    writers[bucket]
                        .write_all(&buf)
                        .map_err(|e| Error::io(&bucket_paths[bucket], e))?;
                    spill_bytes += buf.len() as u64;
                }
            }
        }
        n_kmers = ordinal;
        for (writer, path) in writers.iter_mut().zip(&bucket_paths) {
            writer.flush().map_err(|e| Error::io(path, e))?;
        }
    }

    // Pass 2: map each bucket; ids start after all earlier buckets' ids.
    let mut id_paths = Vec::new();
    let mut next_id_base = 0u64;
    for (bucket, path) in bucket_paths.iter().enumerate() {
        let mut table: FxHashMap<KmerKey, u64> = FxHashMap::default();
        let id_path = work_dir.join(format!("bucket_ids_{bucket:06}.bin"));
        let mut out =
            BufWriter::new(File::create(&id_path).map_err(|e| Error::io(&id_path, e))?);
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = BufReader::with_capacity(1 << 16, file);
        let mut entry = vec![0u8; 8 + key_len];
        loop {
            match reader.read_exact(&mut entry) {
                Ok(()) => {}
                Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => break,
                Err(e) => return Err(Error::io(path, e)),
            }
            let ordinal = u64::from_le_bytes(entry[..8].try_into().unwrap());
            let key = read_key(&entry[8..], k);
            let next = next_id_base + table.len() as u64 + 1;
            let id = *table.entry(key).or_insert(next);
            check_budget(bucket, table.len() as u64, memory_budget)?;
            out.write_all(&ordinal.to_le_bytes())
                .map_err(|e| Error::io(&id_path, e))?;
            out.write_all(&id.to_le_bytes())
                .map_err(|e| Error::io(&id_path, e))?;
        }
        out.flush().map_err(|e| Error::io(&id_path, e))?;
        next_id_base += table.len() as u64;
        id_paths.push(id_path);
    }

    // Pass 3: merge per-bucket (ordinal, id) streams back to ordinal order.
    let id_path = work_dir.join("ids.bin");
    merge_ordered_id_streams(&id_paths, n_kmers, &id_path)?;

    Ok(BaselineSummary {
        n_kmers,
        distinct: next_id_base,
        spill_bytes,
        id_stream: id_path,
    })
}

/// Packed value of the last four (or fewer, for tiny k) symbols of the
/// canonical k-mer a key represents.
fn last_four_of_key(key: &KmerKey, k: usize) -> usize {
    let tail = 4.min(k);
    match key {
        KmerKey::Small(v) => (*v as usize) & ((1 << (2 * tail)) - 1),
        KmerKey::Big(payload) => {
            let code = |i: usize| (payload[i / 4] >> (6 - 2 * (i % 4))) & 3;
            (k - tail..k).fold(0usize, |acc, i| (acc << 2) | code(i) as usize)
        }
    }
}

fn bucket_of(key: &KmerKey, t: usize) -> usize {
    let folded = match key {
        KmerKey::Small(v) => (*v as u64) ^ ((*v >> 64) as u64),
        KmerKey::Big(payload) => {
            let mut h = 0xcbf2_9ce4_8422_2325u64;
            for &byte in payload.iter() {
                h ^= u64::from(byte);
                h = h.wrapping_mul(0x100_0000_01b3);
            }
            h
        }
    };
    ((folded.wrapping_mul(WRAP_HASH_MULTIPLIER) >> 32) % t as u64) as usize
}

fn merge_ordered_id_streams(paths: &[PathBuf], n_kmers: u64, out_path: &Path) -> Result<()> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    let mut readers = Vec::new();
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> = BinaryHeap::new();
    let mut heads: Vec<Option<u64>> = Vec::new();
    for (i, path) in paths.iter().enumerate() {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = BufReader::with_capacity(1 << 16, file);
        match read_id_pair(&mut reader, path)? {
            Some((ordinal, id)) => {
                heap.push(Reverse((ordinal, i)));
                heads.push(Some(id));
            }
            None => heads.push(None),
        }
        readers.push(reader);
    }
    let mut out = BufWriter::new(File::create(out_path).map_err(|e| Error::io(out_path, e))?);
    let mut expected = 1u64;
    while let Some(Reverse((ordinal, i))) = heap.pop() {
        if ordinal != expected {
            return Err(Error::corrupt(
                out_path,
                format!("id streams skip ordinal {expected}"),
            ));
        }
        expected += 1;
        let id = heads[i].take().expect("head present");
        out.write_all(&id.to_le_bytes())
            .map_err(|e| Error::io(out_path, e))?;
        if let Some((next_ord, next_id)) = read_id_pair(&mut readers[i], &paths[i])? {
            heap.push(Reverse((next_ord, i)));
            heads[i] = Some(next_id);
        }
    }
    if expected != n_kmers + 1 {
        return Err(Error::corrupt(
            out_path,
            format!("merged {} ids, expected {}", expected - 1, n_kmers),
        ));
    }
    out.flush().map_err(|e| Error::io(out_path, e))
}

fn read_id_pair(reader: &mut BufReader<File>, path: &Path) -> Result<Option<(u64, u64)>> {
    let mut bytes = [0u8; 16];
    match reader.read_exact(&mut bytes) {
        Ok(()) => Ok(Some((
            u64::from_le_bytes(bytes[..8].try_into().unwrap()),
            u64::from_le_bytes(bytes[8..].try_into().unwrap()),
        ))),
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => Ok(None),
        Err(e) => Err(Error::io(path, e)),
    }
}

/// Loads a little-endian u64 id stream written by the pipeline or baselines.
pub fn load_id_stream(path: &Path) -> Result<Vec<u64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::corrupt(path, "id stream not a multiple of 8 bytes"));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seq::pack;

    fn p(s: &str) -> PackedSequence {
        pack(s).unwrap()
    }

    fn config(dir: &Path, k: usize, p_len: usize, t: usize, wrap: WrapMode) -> PartitionConfig {
        PartitionConfig {
            k,
            p: p_len,
            t,
            rc_mode: false,
            scanner: Scanner::Simple,
            wrap,
            work_dir: dir.to_path_buf(),
            memory_budget: 1 << 30,
        }
    }

    #[test]
    fn wrap_hash_is_deterministic_and_in_range() {
        let m = p("ACGTACGTAC");
        for t in [1usize, 2, 7, 256, 1000] {
            let h = wrap_hash(&m, t);
            assert!(h < t);
            assert_eq!(h, wrap_hash(&m, t));
        }
        assert_eq!(wrap_hash(&m, 1), 0);
    }

    #[test]
    fn wrap_hash_distributes_ten_mers_evenly() {
        // Every 10-mer into 256 buckets: max/min bucket ratio below 1.5.
        let t = 256usize;
        let mut counts = vec![0u64; t];
        for value in 0u64..(1 << 20) {
            let codes = (0..10).rev().map(|i| ((value >> (2 * i)) & 3) as u8);
            let minimizer = PackedSequence::from_codes(codes);
            counts[wrap_hash(&minimizer, t)] += 1;
        }
        let max = *counts.iter().max().unwrap() as f64;
        let min = *counts.iter().min().unwrap() as f64;
        assert!(min > 0.0);
        assert!(
            max / min < 1.5,
            "bucket ratio {:.3} out of tolerance",
            max / min
        );
    }

    #[test]
    fn identity_wrap_requires_matching_t() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path(), 5, 3, 63, WrapMode::Identity);
        assert!(cfg.validate().is_err());
        let cfg = config(dir.path(), 5, 3, 64, WrapMode::Identity);
        assert!(cfg.validate().is_ok());
    }

    fn read_partition(layout: &Layout, index: usize) -> Vec<(u64, String)> {
        PartitionFileReader::open(&layout.partition_file(index))
            .unwrap()
            .map(|r| {
                let r = r.unwrap();
                (r.start_ordinal, r.sequence.to_string())
            })
            .collect()
    }

    #[test]
    fn msp_partition_two_copies_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path(), 5, 3, 64, WrapMode::Identity);
        let reads = vec![p("GTAATGAC"), p("GTAATGAC")];
        let summary = msp_partition(reads.into_iter().map(Ok), &cfg).unwrap();

        assert_eq!(summary.n_kmers, 8);
        assert_eq!(summary.reads, 2);
        assert_eq!(summary.breaks, 2);
        assert_eq!(summary.partition_bases, 16 + 4 * 2);

        let layout = cfg.layout();
        let aat = p("AAT").prefix_value_u64(3) as usize;
        let atg = p("ATG").prefix_value_u64(3) as usize;
        assert_eq!(
            read_partition(&layout, aat),
            vec![(1, "GTAATGA".into()), (5, "GTAATGA".into())]
        );
        assert_eq!(
            read_partition(&layout, atg),
            vec![(4, "ATGAC".into()), (8, "ATGAC".into())]
        );

        // Ordinal completeness: the records cover 1..=N exactly once.
        let mut covered = Vec::new();
        for index in 0..cfg.t {
            for (ordinal, seq) in read_partition(&layout, index) {
                let kmers = seq.len() as u64 - cfg.k as u64 + 1;
                covered.extend(ordinal..ordinal + kmers);
            }
        }
        covered.sort_unstable();
        assert_eq!(covered, (1..=8).collect::<Vec<_>>());
    }

    #[test]
    fn single_read_of_length_k() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path(), 5, 3, 16, WrapMode::Hash);
        let summary = msp_partition(vec![p("GTAAT")].into_iter().map(Ok), &cfg).unwrap();
        assert_eq!(summary.n_kmers, 1);
        assert_eq!(summary.breaks, 0);
        let records: u64 = summary.per_partition.iter().map(|s| s.records).sum();
        assert_eq!(records, 1);
    }

    #[test]
    fn rejects_short_read() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path(), 5, 3, 4, WrapMode::Hash);
        let err = msp_partition(vec![p("ACG")].into_iter().map(Ok), &cfg);
        assert!(err.is_err());
    }
}
