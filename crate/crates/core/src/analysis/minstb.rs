//! Dynamic program over random strings: the probability that no m-substring
//! of an iid random string is lexicographically <= a target m-word, the
//! probability that a given word *is* the minimum m-substring, and the
//! per-word partition capacity distribution built from it.
//!
//! The table extends the string one symbol at a time. Appending a symbol
//! adds it at the *tail* of every suffix, so the recurrences compare
//! suffixes tail-first. Tail-first comparison against a word equals plain
//! lexicographic comparison against the reversed word, and reversing an iid
//! string leaves its law unchanged; the public entry points therefore run
//! the table on the reversed word and report lexicographic probabilities.

use crate::analysis::SymbolDistribution;
use crate::error::{Error, Result};
use crate::seq::PackedSequence;

/// The (n+1) x m probability table of the minimum-substring DP, kept around
/// for inspection: `q(i, 0)` is the probability that a random length-i
/// string is clean (has no m-substring <= the word).
#[derive(Debug, Clone)]
pub struct DPTable {
    word: Vec<u8>,
    n: usize,
    m: usize,
    q: Vec<f64>,
    writes: u64,
}

impl DPTable {
    /// Entry `Q[i, j]`; `0 <= i <= n`, `0 <= j < m`.
    pub fn q(&self, i: usize, j: usize) -> f64 {
        self.q[i * self.m + j]
    }

    /// `Q[n, 0]`: the probability that the whole string is clean.
    pub fn clean_probability(&self) -> f64 {
        self.q(self.n, 0)
    }

    /// Table cells written while filling; exactly `(n + 1) * m`.
    pub fn cell_writes(&self) -> u64 {
        self.writes
    }

    pub fn word(&self) -> &[u8] {
        &self.word
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.n + 1, self.m)
    }
}

/// Tail-first (last symbol decides first) comparison of two equal-length
/// symbol slices: `a > b`?
fn tail_first_gt(a: &[u8], b: &[u8]) -> bool {
    for (x, y) in a.iter().rev().zip(b.iter().rev()) {
        if x != y {
            return x > y;
        }
    }
    false
}

/// Fills the DP table for `word` (symbol codes 0..=3) over random strings of
/// length `n` drawn from `dist`. `clean_probability` is the probability that
/// no m-substring of the string is <= `word` lexicographically.
pub fn minstb(word: &[u8], n: usize, dist: &SymbolDistribution) -> Result<DPTable> {
    let m = word.len();
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= m <= n, got m = {m}, n = {n}"
        )));
    }
    if word.iter().any(|&w| w > 3) {
        return Err(Error::InvalidArgument("word symbols must be 0..=3".into()));
    }

    // Run on the reversed word; see the module docs.
    let v: Vec<u8> = word.iter().rev().copied().collect();
    let probs = dist.probs();
    // gt[c] = P(symbol > c).
    let mut gt = [0.0f64; 4];
    for c in 0..3usize {
        gt[c] = probs[c + 1..].iter().sum();
    }
    let p_of = |c: u8| probs[c as usize];
    let gt_of = |c: u8| gt[c as usize];

    // For columns with w_m = w_j: does the (j-1)-suffix of the word's
    // (m-1)-prefix beat the word's (j-1)-prefix, tail-first? Decides which
    // previous-row entry carries the s_{i+1} = w_j case.
    let wm = v[m - 1];
    let mid_beats_prefix: Vec<bool> = (0..m)
        .map(|j| j >= 2 && tail_first_gt(&v[m - j..m - 1], &v[..j - 1]))
        .collect();

    let mut q = vec![0.0f64; (n + 1) * m];
    let mut writes = 0u64;
    let mut write = |q: &mut Vec<f64>, i: usize, j: usize, value: f64| {
        q[i * m + j] = value;
        writes += 1;
    };

    for j in 0..m {
        write(&mut q, 0, j, 1.0);
    }
    for row in 1..=n {
        let prev = row - 1;
        let q0 = q[prev * m];
        if row < m {
            // No m-substring yet: the string is clean by construction and
            // only the suffix conditions are tracked.
            write(&mut q, row, 0, 1.0);
            if m > 1 {
                write(&mut q, row, 1, gt_of(v[0]));
            }
            for j in 2..m {
                let wj = v[j - 1];
                let value = gt_of(wj) + q[prev * m + (j - 1)] * p_of(wj);
                write(&mut q, row, j, value);
            }
        } else {
            // The (m-1)-suffix condition is simply "clean" when m = 1: an
            // empty suffix never beats an empty word.
            let qm1 = if m > 1 { q[prev * m + (m - 1)] } else { 0.0 };
            write(&mut q, row, 0, q0 * gt_of(wm) + qm1 * p_of(wm));
            for j in 1..m {
                let wj = v[j - 1];
                let value = if wm > wj {
                    q0 * gt_of(wm) + qm1 * p_of(wm)
                } else if j == 1 {
                    // Covers both wm < w1 and wm = w1: the new symbol alone
                    // must beat w1.
                    q0 * gt_of(wj)
                } else if wm < wj {
                    q0 * gt_of(wj) + q[prev * m + (j - 1)] * p_of(wj)
                } else if mid_beats_prefix[j] {
                    q0 * gt_of(wj) + qm1 * p_of(wj)
                } else {
                    q0 * gt_of(wj) + q[prev * m + (j - 1)] * p_of(wj)
                };
                write(&mut q, row, j, value);
            }
        }
    }

    Ok(DPTable {
        word: word.to_vec(),
        n,
        m,
        q,
        writes,
    })
}

/// Probability that no m-substring of a random length-n string is <= `word`.
pub fn clean_probability(word: &[u8], n: usize, dist: &SymbolDistribution) -> Result<f64> {
    Ok(minstb(word, n, dist)?.clean_probability())
}

/// Lexicographic predecessor of a word over the 4-symbol alphabet, or None
/// for the all-zero word.
fn predecessor(word: &[u8]) -> Option<Vec<u8>> {
    let last_nonzero = word.iter().rposition(|&w| w > 0)?;
    let mut pred = word.to_vec();
    pred[last_nonzero] -= 1;
    for w in pred[last_nonzero + 1..].iter_mut() {
        *w = 3;
    }
    Some(pred)
}

/// Probability that `word` is the minimum m-substring of a random length-n
/// string: the clean probability of the word's predecessor minus its own,
/// with `1 - clean` for the all-zero word, which has no predecessor.
pub fn prob_min_word(word: &[u8], n: usize, dist: &SymbolDistribution) -> Result<f64> {
    let clean = clean_probability(word, n, dist)?;
    match predecessor(word) {
        Some(pred) => Ok(clean_probability(&pred, n, dist)? - clean),
        None => Ok(1.0 - clean),
    }
}

/// Largest `p` for which the capacity distribution is enumerated exactly.
pub const MAX_EXHAUSTIVE_CAPACITY_P: usize = 8;

/// Expected fraction of k-mers whose minimum p-substring is each p-word, in
/// word order. Fractions sum to 1 for k >= p. Enumerating words in
/// lexicographic order lets each word reuse its predecessor's clean
/// probability, so the whole distribution costs one DP per word.
pub fn capacity_distribution(
    k: usize,
    p: usize,
    dist: &SymbolDistribution,
) -> Result<Vec<(PackedSequence, f64)>> {
    if p == 0 || p > k {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= p <= k, got p = {p}, k = {k}"
        )));
    }
    if p > MAX_EXHAUSTIVE_CAPACITY_P {
        return Err(Error::InvalidArgument(format!(
            "p = {p} is too large to enumerate 4^p words; use the Monte Carlo mode"
        )));
    }
    let words = 1u64 << (2 * p);
    let mut out = Vec::with_capacity(words as usize);
    let mut prev_clean = 1.0f64;
    for value in 0..words {
        let codes: Vec<u8> = (0..p)
            .rev()
            .map(|shift| ((value >> (2 * shift)) & 3) as u8)
            .collect();
        let clean = clean_probability(&codes, k, dist)?;
        out.push((PackedSequence::from_codes(codes), prev_clean - clean));
        prev_clean = clean;
    }
    Ok(out)
}

/// Monte Carlo estimate of the capacity distribution for large p: samples
/// random k-mers and histograms their minimum p-substrings. Only observed
/// words are returned, in word order.
pub fn capacity_distribution_monte_carlo(
    k: usize,
    p: usize,
    dist: &SymbolDistribution,
    samples: u64,
    seed: u64,
) -> Result<Vec<(PackedSequence, f64)>> {
    use rand::SeedableRng;

    if p == 0 || p > k {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= p <= k, got p = {p}, k = {k}"
        )));
    }
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be positive".into()));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut hist: std::collections::BTreeMap<PackedSequence, u64> = std::collections::BTreeMap::new();
    for _ in 0..samples {
        let kmer = PackedSequence::from_codes((0..k).map(|_| dist.sample(&mut rng)));
        let min = crate::minimizer::min_p_bruteforce(&kmer, p)?;
        *hist.entry(min.substring).or_insert(0) += 1;
    }
    Ok(hist
        .into_iter()
        .map(|(word, count)| (word, count as f64 / samples as f64))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    fn uniform() -> SymbolDistribution {
        SymbolDistribution::uniform()
    }

    fn skewed_a() -> SymbolDistribution {
        SymbolDistribution::new([0.7, 0.1, 0.1, 0.1]).unwrap()
    }

    fn skewed_b() -> SymbolDistribution {
        SymbolDistribution::new([0.1, 0.2, 0.3, 0.4]).unwrap()
    }

    /// Weighted exhaustive oracle: histogram of the minimum m-substring over
    /// all 4^n strings. `hist[w]` is the probability the minimum equals `w`;
    /// clean(W) is then the mass strictly above W.
    fn min_word_histogram(n: usize, m: usize, dist: &SymbolDistribution) -> Vec<f64> {
        let probs = dist.probs();
        let mut hist = vec![0.0f64; 1 << (2 * m)];
        let mut codes = vec![0u8; n];
        for value in 0u64..(1 << (2 * n)) {
            let mut weight = 1.0;
            for (i, code) in codes.iter_mut().enumerate() {
                *code = ((value >> (2 * (n - 1 - i))) & 3) as u8;
                weight *= probs[*code as usize];
            }
            let min = codes
                .windows(m)
                .map(|w| w.iter().fold(0u64, |acc, &c| (acc << 2) | u64::from(c)))
                .min()
                .unwrap();
            hist[min as usize] += weight;
        }
        hist
    }

    #[test]
    fn matches_exhaustive_enumeration_for_all_small_words() {
        for dist in [uniform(), skewed_a(), skewed_b()] {
            for m in 1..=3usize {
                for n in m..=8usize {
                    let hist = min_word_histogram(n, m, &dist);
                    // clean(W) = P(min > W) = suffix mass above W's value.
                    let mut suffix = vec![0.0f64; hist.len() + 1];
                    for v in (0..hist.len()).rev() {
                        suffix[v] = suffix[v + 1] + hist[v];
                    }
                    for value in 0..hist.len() {
                        let codes: Vec<u8> = (0..m)
                            .rev()
                            .map(|s| ((value >> (2 * s)) & 3) as u8)
                            .collect();
                        let dp = clean_probability(&codes, n, &dist).unwrap();
                        assert!(
                            (dp - suffix[value + 1]).abs() <= TOL,
                            "clean mismatch: m={m} n={n} word={codes:?} dp={dp} oracle={}",
                            suffix[value + 1]
                        );
                        let pm = prob_min_word(&codes, n, &dist).unwrap();
                        assert!(
                            (pm - hist[value]).abs() <= TOL,
                            "min-word mismatch: m={m} n={n} word={codes:?} dp={pm} oracle={}",
                            hist[value]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn single_window_clean_probability_is_rank_based() {
        // n = m: clean iff the one m-substring exceeds the word, so the
        // probability is 1 - rank(W)/4^m under the uniform model.
        let dist = uniform();
        for m in 1..=3usize {
            for value in 0..(1u64 << (2 * m)) {
                let codes: Vec<u8> = (0..m)
                    .rev()
                    .map(|s| ((value >> (2 * s)) & 3) as u8)
                    .collect();
                let expected = 1.0 - (value + 1) as f64 / (1u64 << (2 * m)) as f64;
                let got = clean_probability(&codes, m, &dist).unwrap();
                assert!((got - expected).abs() <= TOL, "m={m} value={value}");
            }
        }
        let table = minstb(&[0, 0], 2, &dist).unwrap();
        assert!((table.clean_probability() - 15.0 / 16.0).abs() <= TOL);
    }

    #[test]
    fn maximum_word_is_never_clean() {
        for n in 3..=7 {
            let got = clean_probability(&[3, 3, 3], n, &uniform()).unwrap();
            assert!(got.abs() <= TOL);
        }
    }

    #[test]
    fn example_n6_m2_word_10_matches_enumeration() {
        let dist = uniform();
        let hist = min_word_histogram(6, 2, &dist);
        let mut above = 0.0;
        for v in 5..16 {
            above += hist[v];
        }
        let dp = clean_probability(&[1, 0], 6, &dist).unwrap();
        assert!((dp - above).abs() <= TOL);
    }

    #[test]
    fn min_word_probabilities_sum_to_one() {
        for dist in [uniform(), skewed_a()] {
            for m in 1..=3usize {
                let n = 6;
                let mut total = 0.0;
                for value in 0..(1u64 << (2 * m)) {
                    let codes: Vec<u8> = (0..m)
                        .rev()
                        .map(|s| ((value >> (2 * s)) & 3) as u8)
                        .collect();
                    total += prob_min_word(&codes, n, &dist).unwrap();
                }
                assert!((total - 1.0).abs() <= 1e-9, "m={m} sum={total}");
            }
        }
    }

    #[test]
    fn table_is_monotone_and_filled_once() {
        let dist = skewed_b();
        let table = minstb(&[1, 0, 2], 8, &dist).unwrap();
        let (rows, cols) = table.dimensions();
        assert_eq!(table.cell_writes(), (rows * cols) as u64);
        for j in 0..cols {
            assert_eq!(table.q(0, j), 1.0);
        }
        for i in 1..rows {
            assert!(table.q(i, 0) <= table.q(i - 1, 0) + TOL);
        }
        for i in 0..rows {
            for j in 0..cols {
                let v = table.q(i, j);
                assert!((-TOL..=1.0 + TOL).contains(&v));
            }
        }
    }

    #[test]
    fn capacity_distribution_small_case_matches_enumeration() {
        let dist = uniform();
        let hist = min_word_histogram(6, 2, &dist);
        let capacity = capacity_distribution(6, 2, &dist).unwrap();
        assert_eq!(capacity.len(), 16);
        for (value, (word, fraction)) in capacity.iter().enumerate() {
            assert_eq!(word.prefix_value_u64(2) as usize, value);
            assert!((fraction - hist[value]).abs() <= TOL);
        }
        let total: f64 = capacity.iter().map(|(_, f)| f).sum();
        assert!((total - 1.0).abs() <= 1e-9);

        // The all-zero word is minimal whenever present, so it has the
        // largest capacity; sorted descending the curve starts there.
        let largest = capacity
            .iter()
            .map(|(_, f)| *f)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((largest - capacity[0].1).abs() <= TOL);
    }

    #[test]
    fn monte_carlo_capacity_tracks_exact_values() {
        let dist = uniform();
        let exact = capacity_distribution(8, 2, &dist).unwrap();
        let sampled = capacity_distribution_monte_carlo(8, 2, &dist, 40_000, 11).unwrap();
        for (word, fraction) in &sampled {
            let value = word.prefix_value_u64(2) as usize;
            let sigma = (fraction * (1.0 - fraction) / 40_000.0).sqrt().max(1e-4);
            assert!(
                (fraction - exact[value].1).abs() <= 5.0 * sigma,
                "word {word}: sampled {fraction}, exact {}",
                exact[value].1
            );
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(minstb(&[], 4, &uniform()).is_err());
        assert!(minstb(&[0, 1], 1, &uniform()).is_err());
        assert!(minstb(&[4], 4, &uniform()).is_err());
        assert!(capacity_distribution(20, 9, &uniform()).is_err());
    }
}
