//! The random-string model behind the partitioning scheme: break-count
//! simulation and bounds, the largest-partition capacity recurrence, and the
//! minimum-substring dynamic program with its validators.

mod minstb;

pub use minstb::{
    capacity_distribution, capacity_distribution_monte_carlo, clean_probability, minstb,
    prob_min_word, DPTable, MAX_EXHAUSTIVE_CAPACITY_P,
};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::minimizer::simple_scan;
use crate::seq::PackedSequence;

/// Symbol probabilities for the four codes 0..=3; must sum to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolDistribution {
    probs: [f64; 4],
}

impl SymbolDistribution {
    pub fn new(probs: [f64; 4]) -> Result<SymbolDistribution> {
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidArgument(
                "symbol probabilities must lie in [0, 1]".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "symbol probabilities sum to {total}, not 1"
            )));
        }
        Ok(SymbolDistribution { probs })
    }

    pub fn uniform() -> SymbolDistribution {
        SymbolDistribution {
            probs: [0.25; 4],
        }
    }

    pub fn probs(&self) -> [f64; 4] {
        self.probs
    }

    /// Draws one symbol code by inverse CDF.
    pub fn sample(&self, rng: &mut impl Rng) -> u8 {
        let x: f64 = rng.gen();
        let mut acc = 0.0;
        for (code, p) in self.probs.iter().enumerate() {
            acc += p;
            if x < acc {
                return code as u8;
            }
        }
        3
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: u64,
}

impl ModelEstimate {
    fn from_moments(sum: f64, sum_sq: f64, trials: u64) -> ModelEstimate {
        let n = trials as f64;
        let mean = sum / n;
        let variance = if trials > 1 {
            ((sum_sq - sum * sum / n) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        ModelEstimate {
            mean,
            stderr: (variance / n).sqrt(),
            trials,
        }
    }
}

/// Deterministic Monte Carlo driver: trials are split into fixed chunks,
/// each with its own seeded generator, so results are independent of the
/// worker count.
fn monte_carlo(trials: u64, seed: u64, per_trial: impl Fn(&mut ChaCha8Rng) -> f64 + Sync) -> ModelEstimate {
    const CHUNK: u64 = 4096;
    let chunks = trials.div_ceil(CHUNK);
    let moments: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (chunk.wrapping_mul(0x9E37_79B9)));
            let count = CHUNK.min(trials - chunk * CHUNK);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..count {
                let x = per_trial(&mut rng);
                sum += x;
                sum_sq += x * x;
            }
            (sum, sum_sq)
        })
        .collect();
    let (sum, sum_sq) = moments
        .into_iter()
        .fold((0.0, 0.0), |(s, q), (cs, cq)| (s + cs, q + cq));
    ModelEstimate::from_moments(sum, sum_sq, trials)
}

fn random_read(rng: &mut impl Rng, len: usize) -> PackedSequence {
    PackedSequence::from_codes((0..len).map(|_| rng.gen_range(0..4u8)))
}

/// Fraction of distinct k-mers expected to carry the all-zero p-substring,
/// the largest partition under the uniform model. Exact recurrence:
/// either the first k-1 symbols already contain the all-zero word, or the
/// final p symbols are its only occurrence, which additionally requires a
/// non-zero symbol just before them.
pub fn alpha(k: usize, p: usize) -> Result<f64> {
    if p == 0 || p > k {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= p <= k, got p = {p}, k = {k}"
        )));
    }
    let per_word = 0.25f64.powi(p as i32);
    let mut values = vec![0.0f64; k + 1];
    values[p] = per_word;
    for j in p + 1..=k {
        let shorter = if j >= p + 1 && j - p - 1 >= p {
            values[j - p - 1]
        } else {
            0.0
        };
        values[j] = values[j - 1] + (1.0 - shorter) * 0.75 * per_word;
    }
    Ok(values[k])
}

/// Simulated average number of breaks a read of length m incurs, i.e. super
/// k-mers minus one, under the uniform random-string model.
pub fn simulate_breaks(
    m: usize,
    k: usize,
    p: usize,
    trials: u64,
    seed: u64,
) -> Result<ModelEstimate> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    if p == 0 || p > k || k > m {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= p <= k <= m, got p = {p}, k = {k}, m = {m}"
        )));
    }
    Ok(monte_carlo(trials, seed, |rng| {
        let read = random_read(rng, m);
        let (_, stats) = simple_scan(&read, k, p, false, 1).expect("valid scan arguments");
        stats.breaks as f64
    }))
}

fn first_or_last_is_unique_min(read: &PackedSequence, p: usize) -> bool {
    let last = read.len() - p;
    let mut best = 0usize;
    let mut best_count = 1u32;
    for start in 1..=last {
        match read.cmp_oriented(
            start,
            crate::seq::Strand::Forward,
            best,
            crate::seq::Strand::Forward,
            p,
        ) {
            std::cmp::Ordering::Less => {
                best = start;
                best_count = 1;
            }
            std::cmp::Ordering::Equal => best_count += 1,
            std::cmp::Ordering::Greater => {}
        }
    }
    best_count == 1 && (best == 0 || best == last)
}

/// Monte Carlo estimate of P1(k, p): the probability that the first or last
/// p-substring of a random (k+1)-string is its unique minimum. This is the
/// per-slide break rate of the partitioning scan.
pub fn p1_estimate(k: usize, p: usize, trials: u64, seed: u64) -> Result<ModelEstimate> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    if p == 0 || p > k {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= p <= k, got p = {p}, k = {k}"
        )));
    }
    Ok(monte_carlo(trials, seed, |rng| {
        let read = random_read(rng, k + 1);
        f64::from(first_or_last_is_unique_min(&read, p))
    }))
}

/// Exact P1(k, p) by enumerating all 4^(k+1) strings; k is capped to keep
/// the enumeration at tens of millions of strings.
pub fn p1_exact(k: usize, p: usize) -> Result<f64> {
    if p == 0 || p > k {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= p <= k, got p = {p}, k = {k}"
        )));
    }
    if k + 1 > 12 {
        return Err(Error::InvalidArgument(
            "exact P1 enumeration is limited to k + 1 <= 12".into(),
        ));
    }
    let n = k + 1;
    let total = 1u64 << (2 * n);
    let mut hits = 0u64;
    for value in 0..total {
        let read =
            PackedSequence::from_codes((0..n).rev().map(|s| ((value >> (2 * s)) & 3) as u8));
        if first_or_last_is_unique_min(&read, p) {
            hits += 1;
        }
    }
    Ok(hits as f64 / total as f64)
}

/// Monte Carlo check of the shifted-parameter inequality
/// `P1(k+a, p+a) <= 2 P1(k, p) + (p+2)/4^p` and of the `(p+1)/(k+1)` bound.
#[derive(Debug, Clone, Copy)]
pub struct P1Report {
    pub base: ModelEstimate,
    pub shifted: ModelEstimate,
    /// Right-hand side `2 * base.mean + (p+2)/4^p`.
    pub shifted_bound: f64,
    /// `(p+1)/(k+1)` for the base parameters.
    pub ratio_bound: f64,
    pub shifted_holds_3_sigma: bool,
    pub ratio_holds_3_sigma: bool,
}

pub fn p1_inequalities(k: usize, p: usize, a: usize, trials: u64, seed: u64) -> Result<P1Report> {
    if a == 0 {
        return Err(Error::InvalidArgument("a must be positive".into()));
    }
    let base = p1_estimate(k, p, trials, seed)?;
    let shifted = p1_estimate(k + a, p + a, trials, seed.wrapping_add(1))?;
    let shifted_bound = 2.0 * base.mean + (p as f64 + 2.0) / 4.0f64.powi(p as i32);
    let combined_sigma = (shifted.stderr.powi(2) + (2.0 * base.stderr).powi(2)).sqrt();
    let ratio_bound = (p as f64 + 1.0) / (k as f64 + 1.0);
    Ok(P1Report {
        base,
        shifted,
        shifted_bound,
        ratio_bound,
        shifted_holds_3_sigma: shifted.mean <= shifted_bound + 3.0 * combined_sigma,
        ratio_holds_3_sigma: base.mean <= ratio_bound + 3.0 * base.stderr,
    })
}

/// Planning estimate of the total partition size in bases for a dataset of
/// `n_bases` made of length-m reads: `n + (l k / m) n` with the average
/// break count l taken from simulation.
pub fn total_size_estimate(
    n_bases: u64,
    m: usize,
    k: usize,
    p: usize,
    trials: u64,
    seed: u64,
) -> Result<f64> {
    let breaks = simulate_breaks(m, k, p, trials, seed)?;
    let n = n_bases as f64;
    Ok(n + breaks.mean * k as f64 / m as f64 * n)
}
