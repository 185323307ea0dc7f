//! FASTA/FASTQ ingestion, plain or gzip-compressed, with N-run splitting.
//!
//! Records whose sequence contains non-ACGT characters are split into their
//! maximal ACGT runs (k-mers spanning an ambiguous base are meaningless);
//! runs shorter than k are dropped and counted. With splitting disabled any
//! non-ACGT character is a hard ingestion error naming its position.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use msp_core::seq::{Base, PackedSequence};
use msp_core::{Error, Result};

#[derive(Debug, Clone, Copy, Default)]
pub struct IngestStats {
    /// FASTA/FASTQ records parsed.
    pub records: u64,
    /// Reads emitted after splitting and length filtering.
    pub reads: u64,
    /// Runs dropped for being shorter than k.
    pub dropped_short: u64,
    /// Records that were split on non-ACGT characters.
    pub split_records: u64,
}

enum Format {
    Fasta,
    Fastq,
}

struct RecordReader {
    path: PathBuf,
    reader: Box<dyn BufRead>,
    format: Option<Format>,
    line: u64,
    pending_header: Option<String>,
}

impl RecordReader {
    fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let reader: Box<dyn BufRead> = if path.extension().is_some_and(|e| e == "gz") {
            Box::new(BufReader::with_capacity(1 << 16, MultiGzDecoder::new(file)))
        } else {
            Box::new(BufReader::with_capacity(1 << 16, file))
        };
        Ok(RecordReader {
            path: path.to_path_buf(),
            reader,
            format: None,
            line: 0,
            pending_header: None,
        })
    }

    fn malformed(&self, detail: impl Into<String>) -> Error {
        Error::MalformedRecord {
            path: self.path.clone(),
            line: self.line,
            detail: detail.into(),
        }
    }

    fn next_line(&mut self) -> Result<Option<String>> {
        let mut line = String::new();
        let n = self
            .reader
            .read_line(&mut line)
            .map_err(|e| Error::io(&self.path, e))?;
        if n == 0 {
            return Ok(None);
        }
        self.line += 1;
        while line.ends_with('\n') || line.ends_with('\r') {
            line.pop();
        }
        Ok(Some(line))
    }

    /// Next raw record sequence, or None at end of file.
    fn next_record(&mut self) -> Result<Option<String>> {
        loop {
            let header = match self.pending_header.take() {
                Some(h) => h,
                None => match self.next_line()? {
                    Some(l) if l.is_empty() => continue,
                    Some(l) => l,
                    None => return Ok(None),
                },
            };
            match self.format {
                None => {
                    self.format = Some(match header.bytes().next() {
                        Some(b'>') => Format::Fasta,
                        Some(b'@') => Format::Fastq,
                        _ => {
                            return Err(
                                self.malformed("expected a '>' or '@' header at start of file")
                            )
                        }
                    });
                }
                Some(Format::Fasta) if !header.starts_with('>') => {
                    return Err(self.malformed("expected a '>' header"));
                }
                Some(Format::Fastq) if !header.starts_with('@') => {
                    return Err(self.malformed("expected an '@' header"));
                }
                Some(_) => {}
            }
            return match self.format.as_ref().expect("format set above") {
                Format::Fasta => self.read_fasta_body(),
                Format::Fastq => self.read_fastq_body(),
            };
        }
    }

    fn read_fasta_body(&mut self) -> Result<Option<String>> {
        let mut sequence = String::new();
        loop {
            match self.next_line()? {
                None => break,
                Some(line) if line.starts_with('>') => {
                    self.pending_header = Some(line);
                    break;
                }
                Some(line) => sequence.push_str(line.trim()),
            }
        }
        Ok(Some(sequence))
    }

    fn read_fastq_body(&mut self) -> Result<Option<String>> {
        let sequence = self
            .next_line()?
            .ok_or_else(|| self.malformed("record truncated before sequence"))?;
        let plus = self
            .next_line()?
            .ok_or_else(|| self.malformed("record truncated before '+' separator"))?;
        if !plus.starts_with('+') {
            return Err(self.malformed("expected '+' separator"));
        }
        let quality = self
            .next_line()?
            .ok_or_else(|| self.malformed("record truncated before quality line"))?;
        if quality.len() != sequence.len() {
            return Err(self.malformed(format!(
                "quality length {} does not match sequence length {}",
                quality.len(),
                sequence.len()
            )));
        }
        Ok(Some(sequence))
    }
}

/// Streaming reader over one or more FASTA/FASTQ files, yielding packed
/// reads in file order.
pub struct Ingest {
    paths: Vec<PathBuf>,
    next_path: usize,
    current: Option<RecordReader>,
    queue: Vec<PackedSequence>,
    k: usize,
    split_on_n: bool,
    stats: IngestStats,
}

impl Ingest {
    pub fn new(paths: Vec<PathBuf>, k: usize, split_on_n: bool) -> Ingest {
        Ingest {
            paths,
            next_path: 0,
            current: None,
            queue: Vec::new(),
            k,
            split_on_n,
            stats: IngestStats::default(),
        }
    }

    pub fn stats(&self) -> IngestStats {
        self.stats
    }

    fn split_record(&mut self, raw: &str) -> Result<()> {
        self.stats.records += 1;
        if self.split_on_n {
            let bytes = raw.as_bytes();
            let mut runs = Vec::new();
            let mut start = None;
            for (i, &b) in bytes.iter().enumerate() {
                if Base::from_ascii(b).is_some() {
                    start.get_or_insert(i);
                } else if let Some(s) = start.take() {
                    runs.push(&raw[s..i]);
                }
            }
            if let Some(s) = start {
                runs.push(&raw[s..]);
            }
            if runs.len() != 1 || runs[0].len() != raw.len() {
                self.stats.split_records += 1;
            }
            // Queue in reverse so pop() restores file order.
            for run in runs.iter().rev() {
                if run.len() >= self.k {
                    self.queue.push(PackedSequence::from_ascii(run.as_bytes())?);
                } else {
                    self.stats.dropped_short += 1;
                }
            }
        } else if raw.len() >= self.k {
            self.queue.push(PackedSequence::from_ascii(raw.as_bytes())?);
        } else {
            self.stats.dropped_short += 1;
        }
        Ok(())
    }
}

impl Iterator for Ingest {
    type Item = Result<PackedSequence>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(read) = self.queue.pop() {
                self.stats.reads += 1;
                return Some(Ok(read));
            }
            if self.current.is_none() {
                if self.next_path >= self.paths.len() {
                    return None;
                }
                match RecordReader::open(&self.paths[self.next_path]) {
                    Ok(reader) => {
                        self.current = Some(reader);
                        self.next_path += 1;
                    }
                    Err(e) => return Some(Err(e)),
                }
            }
            let reader = self.current.as_mut().expect("reader opened above");
            match reader.next_record() {
                Ok(Some(raw)) => {
                    if let Err(e) = self.split_record(&raw) {
                        return Some(Err(e));
                    }
                }
                Ok(None) => self.current = None,
                Err(e) => return Some(Err(e)),
            }
        }
    }
}

/// Re-iterable file-backed read source for the baseline algorithms.
pub struct FileSource {
    pub paths: Vec<PathBuf>,
    pub k: usize,
    pub split_on_n: bool,
}

impl msp_core::partition::ReadSource for FileSource {
    fn reads(&self) -> Result<Box<dyn Iterator<Item = Result<PackedSequence>> + '_>> {
        Ok(Box::new(Ingest::new(
            self.paths.clone(),
            self.k,
            self.split_on_n,
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_file(dir: &Path, name: &str, content: &str) -> PathBuf {
        let path = dir.join(name);
        let mut f = File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    fn collect(paths: Vec<PathBuf>, k: usize) -> (Vec<String>, IngestStats) {
        let mut ingest = Ingest::new(paths, k, true);
        let reads: Vec<String> = ingest
            .by_ref()
            .map(|r| r.unwrap().to_string())
            .collect();
        (reads, ingest.stats())
    }

    #[test]
    fn three_record_fasta_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            dir.path(),
            "a.fa",
            ">r1\nGTAATGAC\n>r2\nACGT\nACGT\n>r3\nTTTTT\n",
        );
        let (reads, stats) = collect(vec![path], 3);
        assert_eq!(reads, vec!["GTAATGAC", "ACGTACGT", "TTTTT"]);
        assert_eq!(stats.records, 3);
        assert_eq!(stats.reads, 3);
    }

    #[test]
    fn fastq_record_with_n_splits_and_drops_short_rest() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(dir.path(), "a.fq", "@r1\nACGTN\n+\nIIIII\n");
        let (reads, stats) = collect(vec![path], 3);
        assert_eq!(reads, vec!["ACGT"]);
        assert_eq!(stats.split_records, 1);
        assert_eq!(stats.dropped_short, 0);

        let path2 = write_file(dir.path(), "b.fq", "@r1\nACNGT\n+\nIIIII\n");
        let (reads, stats) = collect(vec![path2], 3);
        assert!(reads.is_empty());
        assert_eq!(stats.dropped_short, 2);
    }

    #[test]
    fn empty_file_is_an_empty_stream() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(dir.path(), "a.fa", "");
        let (reads, stats) = collect(vec![path], 3);
        assert!(reads.is_empty());
        assert_eq!(stats.records, 0);
    }

    #[test]
    fn malformed_fastq_reports_file_and_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(dir.path(), "bad.fq", "@r1\nACGT\nIIII\n");
        let mut ingest = Ingest::new(vec![path.clone()], 3, true);
        let err = ingest.next().unwrap().unwrap_err();
        match err {
            Error::MalformedRecord { path: p, line, .. } => {
                assert_eq!(p, path);
                assert_eq!(line, 3);
            }
            other => panic!("expected MalformedRecord, got {other:?}"),
        }
    }

    #[test]
    fn gzip_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.fa.gz");
        let file = File::create(&path).unwrap();
        let mut enc = flate2::write::GzEncoder::new(file, flate2::Compression::fast());
        enc.write_all(b">r1\nGTAATGAC\n").unwrap();
        enc.finish().unwrap();
        let (reads, _) = collect(vec![path], 3);
        assert_eq!(reads, vec!["GTAATGAC"]);
    }

    #[test]
    fn unsplit_mode_rejects_ambiguous_bases() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(dir.path(), "a.fa", ">r1\nACGNT\n");
        let mut ingest = Ingest::new(vec![path], 3, false);
        assert!(ingest.next().unwrap().is_err());
    }
}
