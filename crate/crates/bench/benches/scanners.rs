//! Window-scanner and pipeline micro-benchmarks: the rescan-based scan
//! against the monotone queue and brute force, partition scattering, and the
//! probability table fill.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use msp_core::analysis::{minstb, SymbolDistribution};
use msp_core::minimizer::{brute_scan, queue_scan, simple_scan};
use msp_core::seq::PackedSequence;

fn random_reads(count: usize, len: usize, seed: u64) -> Vec<PackedSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| PackedSequence::from_codes((0..len).map(|_| rng.gen_range(0..4u8))))
        .collect()
}

fn bench_scanners(c: &mut Criterion) {
    let reads = random_reads(256, 100, 7);
    let mut group = c.benchmark_group("scan_100bp");
    group.throughput(Throughput::Bytes(256 * 100));
    for (k, p) in [(59usize, 12usize), (31, 8)] {
        group.bench_with_input(BenchmarkId::new("simple", format!("k{k}_p{p}")), &reads, |b, reads| {
            b.iter(|| {
                for read in reads {
                    simple_scan(read, k, p, false, 1).unwrap();
                }
            })
        });
        group.bench_with_input(BenchmarkId::new("queue", format!("k{k}_p{p}")), &reads, |b, reads| {
            b.iter(|| {
                for read in reads {
                    queue_scan(read, k, p, false, 1).unwrap();
                }
            })
        });
        group.bench_with_input(BenchmarkId::new("brute", format!("k{k}_p{p}")), &reads, |b, reads| {
            b.iter(|| {
                for read in reads {
                    brute_scan(read, k, p, false, 1).unwrap();
                }
            })
        });
    }
    group.finish();
}

fn bench_rc_scan(c: &mut Criterion) {
    let reads = random_reads(256, 100, 9);
    c.bench_function("scan_100bp_rc/simple_k59_p12", |b| {
        b.iter(|| {
            for read in &reads {
                simple_scan(read, 59, 12, true, 1).unwrap();
            }
        })
    });
}

fn bench_minstb(c: &mut Criterion) {
    let dist = SymbolDistribution::uniform();
    let word: Vec<u8> = vec![0, 2, 1, 3, 0, 1, 2, 3, 1, 0, 2, 1];
    c.bench_function("minstb_n100_m12", |b| {
        b.iter(|| minstb(&word, 100, &dist).unwrap())
    });
}

criterion_group!(benches, bench_scanners, bench_rc_scan, bench_minstb);
criterion_main!(benches);
