//! Disk-based de Bruijn graph construction via minimum substring
//! partitioning, with the matching random-string model.
//!
//! The pipeline has three on-disk phases: partition reads into super k-mers
//! keyed by their minimum p-substring, map every duplicate k-mer occurrence
//! to its first occurrence through range-compressed replacement files, and
//! merge the replacement files into one id per k-mer occurrence. Edge
//! emission over the id stream then yields the graph. Two classic
//! scatter-gather baselines (horizontal and bucket partitioning) and an
//! in-memory reference builder are included for cross-validation.

pub mod analysis;
pub mod error;
pub mod graph;
pub mod manifest;
pub mod map_merge;
pub mod minimizer;
pub mod partition;
pub mod pipeline;
pub mod seq;

pub use error::{Error, Result};
pub use graph::DeBruijnGraph;
pub use minimizer::{MinimizerResult, ScanStats, Scanner, SuperKMer};
pub use partition::{PartitionConfig, WrapMode};
pub use seq::{Base, PackedSequence, ShortRead, Strand};
