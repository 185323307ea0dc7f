//! Minimum p-substrings of k-mer windows and the decomposition of a read
//! into super k-mers (maximal runs of adjacent k-mers sharing a minimizer).
//!
//! Three interchangeable scanners are provided: a brute-force per-window
//! grouping (the oracle), the rescan-based simple scan, and a monotone-queue
//! sliding-window minimum. All three emit byte-identical super k-mers.
//!
//! Tie-breaking convention: the tracked minimizer occurrence is the leftmost
//! one, and on the same base range the forward strand wins over the reverse
//! strand. A new super k-mer starts whenever the tracked occurrence changes,
//! either because it slid out of the window (rescan) or because a strictly
//! smaller p-substring entered on the right. Rescans that rediscover the
//! same value at a new position therefore still break; this keeps the
//! measured comparison count within the m + lk - pl - p + 1 budget for every
//! read. In reverse-complement mode each window contributes the p-substrings
//! of both strands and the emitted super k-mer stays in the read's forward
//! orientation; only the minimizer value keys the partition.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::seq::{PackedSequence, Strand};

/// A window's minimum p-substring: its value and where it was found.
/// `position` is the 0-based offset within the queried window on the strand
/// named by `strand` (for the reverse strand, within the window's reverse
/// complement).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinimizerResult {
    pub substring: PackedSequence,
    pub position: usize,
    pub strand: Strand,
}

/// A maximal read substring whose k-mers share one minimizer, with the
/// global ordinal of its first k-mer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperKMer {
    pub start_ordinal: u64,
    pub sequence: PackedSequence,
    pub minimizer: PackedSequence,
}

impl SuperKMer {
    pub fn kmer_count(&self, k: usize) -> u64 {
        (self.sequence.len() - k + 1) as u64
    }
}

/// Instrumentation for one read scan.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScanStats {
    /// p-substring lexicographic comparisons performed, one unit per
    /// compared candidate regardless of how many bases short-circuit.
    pub comparisons: u64,
    /// Minimizer changes; always one less than the super k-mers emitted.
    pub breaks: u64,
}

/// Scanner selection for the partitioning phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scanner {
    Simple,
    Queue,
    Brute,
}

impl Scanner {
    pub fn scan(
        self,
        read: &PackedSequence,
        k: usize,
        p: usize,
        rc_mode: bool,
        ordinal_base: u64,
    ) -> Result<(Vec<SuperKMer>, ScanStats)> {
        match self {
            Scanner::Simple => simple_scan(read, k, p, rc_mode, ordinal_base),
            Scanner::Queue => queue_scan(read, k, p, rc_mode, ordinal_base),
            Scanner::Brute => brute_scan(read, k, p, rc_mode, ordinal_base),
        }
    }
}

impl FromStr for Scanner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Scanner> {
        match s {
            "scan" | "simple" => Ok(Scanner::Simple),
            "queue" => Ok(Scanner::Queue),
            "brute" => Ok(Scanner::Brute),
            other => Err(Error::InvalidArgument(format!(
                "unknown scanner {other:?}; expected scan, queue or brute"
            ))),
        }
    }
}

impl fmt::Display for Scanner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scanner::Simple => "scan",
            Scanner::Queue => "queue",
            Scanner::Brute => "brute",
        })
    }
}

/// A candidate p-substring occurrence: the base range it covers in the read
/// (always in forward coordinates) plus the strand it is read on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Cand {
    start: usize,
    strand: Strand,
}

/// Exhaustive minimum p-substring of a window, leftmost occurrence.
/// Serves as the oracle for the scanners.
pub fn min_p_bruteforce(window: &PackedSequence, p: usize) -> Result<MinimizerResult> {
    check_window(window, p)?;
    let cand = scan_candidates(window, 0, window.len(), p, false, &mut 0);
    Ok(to_result(window, window.len(), cand, p))
}

/// Minimum p-substring over the window and its reverse complement
/// (strand-invariant minimizer). Ties prefer the leftmost covered base
/// range, then the forward strand.
pub fn min_p_rc(window: &PackedSequence, p: usize) -> Result<MinimizerResult> {
    check_window(window, p)?;
    let cand = scan_candidates(window, 0, window.len(), p, true, &mut 0);
    Ok(to_result(window, window.len(), cand, p))
}

fn check_window(window: &PackedSequence, p: usize) -> Result<()> {
    if p == 0 || p > window.len() {
        return Err(Error::InvalidArgument(format!(
            "p = {} must be in 1..={}",
            p,
            window.len()
        )));
    }
    Ok(())
}

fn to_result(read: &PackedSequence, window_len: usize, cand: Cand, p: usize) -> MinimizerResult {
    let position = match cand.strand {
        Strand::Forward => cand.start,
        Strand::Reverse => window_len - p - cand.start,
    };
    MinimizerResult {
        substring: read.oriented_subsequence(cand.start, p, cand.strand),
        position,
        strand: cand.strand,
    }
}

/// Scans every candidate of the window starting at `win_start`, counting one
/// comparison per candidate examined, and returns the canonical minimum.
fn scan_candidates(
    read: &PackedSequence,
    win_start: usize,
    k: usize,
    p: usize,
    rc_mode: bool,
    comparisons: &mut u64,
) -> Cand {
    let mut best = Cand {
        start: win_start,
        strand: Strand::Forward,
    };
    *comparisons += 1;
    if rc_mode {
        *comparisons += 1;
        let rev = Cand {
            start: win_start,
            strand: Strand::Reverse,
        };
        if cmp_cands(read, rev, best, p).is_lt() {
            best = rev;
        }
    }
    for start in win_start + 1..=win_start + k - p {
        for &strand in strands(rc_mode) {
            let cand = Cand { start, strand };
            *comparisons += 1;
            if cmp_cands(read, cand, best, p).is_lt() {
                best = cand;
            }
        }
    }
    best
}

fn strands(rc_mode: bool) -> &'static [Strand] {
    if rc_mode {
        &[Strand::Forward, Strand::Reverse]
    } else {
        &[Strand::Forward]
    }
}

#[inline]
fn cmp_cands(read: &PackedSequence, a: Cand, b: Cand, p: usize) -> std::cmp::Ordering {
    read.cmp_oriented(a.start, a.strand, b.start, b.strand, p)
}

fn check_scan_args(read: &PackedSequence, k: usize, p: usize) -> Result<()> {
    if p == 0 || p > k {
        return Err(Error::InvalidArgument(format!("p = {p} must be in 1..={k}")));
    }
    if k > read.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {} exceeds read length {}",
            k,
            read.len()
        )));
    }
    Ok(())
}

struct Emitter<'a> {
    read: &'a PackedSequence,
    k: usize,
    p: usize,
    ordinal_base: u64,
    group_start: usize,
    out: Vec<SuperKMer>,
}

impl<'a> Emitter<'a> {
    fn new(read: &'a PackedSequence, k: usize, p: usize, ordinal_base: u64) -> Self {
        Emitter {
            read,
            k,
            p,
            ordinal_base,
            group_start: 0,
            out: Vec::new(),
        }
    }

    /// Closes the group of windows `group_start..end_window` whose shared
    /// minimizer occurrence is `min`, and starts a new group at `end_window`.
    fn emit(&mut self, end_window: usize, min: Cand) {
        let len = end_window - self.group_start + self.k - 1;
        self.out.push(SuperKMer {
            start_ordinal: self.ordinal_base + self.group_start as u64,
            sequence: self.read.subsequence(self.group_start, len),
            minimizer: self.read.oriented_subsequence(min.start, self.p, min.strand),
        });
        self.group_start = end_window;
    }

    fn finish(mut self, windows: usize, min: Cand) -> Vec<SuperKMer> {
        self.emit(windows, min);
        self.out
    }
}

/// Rescan-based scan: keeps the current minimizer occurrence, rescans the
/// window only when that occurrence slides out, and otherwise compares just
/// the p-substrings entering on the right.
pub fn simple_scan(
    read: &PackedSequence,
    k: usize,
    p: usize,
    rc_mode: bool,
    ordinal_base: u64,
) -> Result<(Vec<SuperKMer>, ScanStats)> {
    check_scan_args(read, k, p)?;
    let windows = read.len() - k + 1;
    let mut stats = ScanStats::default();
    let mut emitter = Emitter::new(read, k, p, ordinal_base);
    let mut cur = scan_candidates(read, 0, k, p, rc_mode, &mut stats.comparisons);

    for i in 1..windows {
        if i > cur.start {
            emitter.emit(i, cur);
            cur = scan_candidates(read, i, k, p, rc_mode, &mut stats.comparisons);
            stats.breaks += 1;
        } else {
            let entering = i + k - p;
            let mut next = cur;
            for strand in strands(rc_mode) {
                let cand = Cand {
                    start: entering,
                    strand: *strand,
                };
                stats.comparisons += 1;
                if cmp_cands(read, cand, next, p).is_lt() {
                    next = cand;
                }
            }
            if next != cur {
                emitter.emit(i, cur);
                cur = next;
                stats.breaks += 1;
            }
        }
    }
    Ok((emitter.finish(windows, cur), stats))
}

/// Sliding-window minimum over p-substrings using a monotone queue. Output
/// is identical to [`simple_scan`]; only the comparison count differs.
pub fn queue_scan(
    read: &PackedSequence,
    k: usize,
    p: usize,
    rc_mode: bool,
    ordinal_base: u64,
) -> Result<(Vec<SuperKMer>, ScanStats)> {
    check_scan_args(read, k, p)?;
    let windows = read.len() - k + 1;
    let mut stats = ScanStats::default();
    let mut emitter = Emitter::new(read, k, p, ordinal_base);
    // Non-decreasing by value; equal values stay in arrival order so the
    // front is always the leftmost (forward-preferred) minimum.
    let mut queue: VecDeque<Cand> = VecDeque::new();

    let push = |queue: &mut VecDeque<Cand>, cand: Cand, stats: &mut ScanStats| {
        while let Some(&back) = queue.back() {
            stats.comparisons += 1;
            if cmp_cands(read, back, cand, p).is_gt() {
                queue.pop_back();
            } else {
                break;
            }
        }
        queue.push_back(cand);
    };

    for start in 0..=k - p {
        for strand in strands(rc_mode) {
            push(&mut queue, Cand { start, strand: *strand }, &mut stats);
        }
    }
    let mut cur = *queue.front().expect("window holds at least one candidate");

    for i in 1..windows {
        while queue.front().is_some_and(|front| front.start < i) {
            queue.pop_front();
        }
        let entering = i + k - p;
        for strand in strands(rc_mode) {
            push(
                &mut queue,
                Cand {
                    start: entering,
                    strand: *strand,
                },
                &mut stats,
            );
        }
        let front = *queue.front().expect("window holds at least one candidate");
        if front != cur {
            emitter.emit(i, cur);
            cur = front;
            stats.breaks += 1;
        }
    }
    Ok((emitter.finish(windows, cur), stats))
}

/// Oracle scanner: computes every window's minimizer exhaustively and groups
/// consecutive windows that share the same minimizer occurrence.
pub fn brute_scan(
    read: &PackedSequence,
    k: usize,
    p: usize,
    rc_mode: bool,
    ordinal_base: u64,
) -> Result<(Vec<SuperKMer>, ScanStats)> {
    check_scan_args(read, k, p)?;
    let windows = read.len() - k + 1;
    let mut stats = ScanStats::default();
    let mut emitter = Emitter::new(read, k, p, ordinal_base);
    let mut cur = scan_candidates(read, 0, k, p, rc_mode, &mut stats.comparisons);
    for i in 1..windows {
        let min = scan_candidates(read, i, k, p, rc_mode, &mut stats.comparisons);
        if min != cur {
            emitter.emit(i, cur);
            cur = min;
            stats.breaks += 1;
        }
    }
    Ok((emitter.finish(windows, cur), stats))
}
