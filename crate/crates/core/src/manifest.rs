//! Run manifest (line-oriented `key=value` text) and the on-disk layout of a
//! working directory. The manifest echoes the configuration, records phase
//! progress and the counters each phase produces, and is rewritten after
//! every phase so a run can be resumed from its last completed output.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.txt";

/// Files per partition subdirectory; large partition counts are sharded so
/// no single directory grows unwieldy.
pub const FILES_PER_DIR: usize = 256;

/// Paths of everything a run writes under its working directory.
#[derive(Debug, Clone)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join(MANIFEST_FILE)
    }

    pub fn read_lengths(&self) -> PathBuf {
        self.root.join("reads.lens")
    }

    pub fn partition_file(&self, index: usize) -> PathBuf {
        self.root
            .join("partitions")
            .join(format!("d{:03}", index / FILES_PER_DIR))
            .join(format!("part_{index:06}.bin"))
    }

    pub fn replacement_file(&self, index: usize) -> PathBuf {
        self.root
            .join("replacements")
            .join(format!("d{:03}", index / FILES_PER_DIR))
            .join(format!("part_{index:06}.rpl"))
    }

    pub fn id_stream(&self) -> PathBuf {
        self.root.join("ids.bin")
    }

    pub fn edge_list(&self) -> PathBuf {
        self.root.join("edges.txt")
    }
}

/// Key=value manifest with sorted, deterministic serialization.
#[derive(Debug, Clone, Default)]
pub struct Manifest {
    entries: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn load(path: &Path) -> Result<Manifest> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut entries = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::corrupt(path, format!("line {} has no '='", lineno + 1))
            })?;
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Manifest { entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let mut out = Vec::new();
        for (key, value) in &self.entries {
            writeln!(out, "{key}={value}").expect("writing to Vec cannot fail");
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::InvalidArgument(format!("manifest is missing key {key:?}")))
    }

    pub fn require_parsed<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.require(key)?;
        raw.parse().map_err(|_| {
            Error::InvalidArgument(format!("manifest key {key:?} has unparsable value {raw:?}"))
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}
