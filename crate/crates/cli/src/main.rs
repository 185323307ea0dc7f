//! Command-line front end: ingestion, the three-phase pipeline, baselines,
//! the random-string analyses, and oracle verification.

mod ingest;

use std::fs::File;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use msp_core::analysis::{self, SymbolDistribution};
use msp_core::manifest::{Layout, Manifest};
use msp_core::map_merge::reference_build;
use msp_core::minimizer::Scanner;
use msp_core::partition::{
    b_partition, h_partition, BaselineSummary, BucketKey, PartitionConfig, ReadSource, WrapMode,
};
use msp_core::pipeline;
use msp_core::seq::PackedSequence;

use ingest::{FileSource, Ingest};

#[derive(Parser)]
#[command(
    name = "msp",
    version,
    about = "Disk-based de Bruijn graph construction via minimum substring partitioning"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run all phases: partition, map, merge, edges.
    Build(BuildArgs),
    /// Phase 1: scatter reads into wrapped partition files.
    Partition(BuildArgs),
    /// Phase 2: map every partition to its id replacement file.
    Map(WorkdirArgs),
    /// Phase 3: merge replacement files into the final id stream.
    Merge(WorkdirArgs),
    /// Phase 4: emit the weighted edge list from the id stream.
    Edges(EdgesArgs),
    /// Classic scatter-gather baselines for comparison.
    Baseline(BaselineArgs),
    /// Random-string model analyses; CSV on stdout or --out.
    Analyze(AnalyzeArgs),
    /// Build the graph and compare it against the in-memory reference.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct InputArgs {
    /// FASTA/FASTQ files, plain or .gz.
    #[arg(short = 'i', long = "input", required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,

    /// Keep reads whole instead of splitting on non-ACGT characters
    /// (ambiguous bases then fail ingestion).
    #[arg(long)]
    no_split: bool,
}

#[derive(Args)]
struct ConfigArgs {
    /// k-mer length.
    #[arg(short, default_value_t = 59)]
    k: usize,

    /// Minimum substring (minimizer) length.
    #[arg(short, default_value_t = 12)]
    p: usize,

    /// Number of wrapped partitions.
    #[arg(short, default_value_t = 1000)]
    t: usize,

    /// Consider reverse complements (default).
    #[arg(long, overrides_with = "no_rc")]
    rc: bool,

    /// Forward strand only; exact oracle comparisons use this mode too.
    #[arg(long)]
    no_rc: bool,

    /// Window scanner: scan (rescan-based), queue (monotone queue) or brute.
    #[arg(long, default_value = "scan")]
    scanner: Scanner,

    /// Partition wrapping: hash, or identity (requires t = 4^p).
    #[arg(long, default_value = "hash")]
    wrap: WrapModeArg,

    /// Advisory mapper memory budget, e.g. 4G, 512M or plain bytes.
    #[arg(long, default_value = "4G", value_parser = parse_size)]
    mem: u64,

    /// Seed echoed into the manifest for provenance.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy)]
struct WrapModeArg(WrapMode);

impl std::str::FromStr for WrapModeArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.parse::<WrapMode>()
            .map(WrapModeArg)
            .map_err(|e| e.to_string())
    }
}

impl ConfigArgs {
    fn rc_mode(&self) -> bool {
        !self.no_rc
    }

    fn to_config(&self, work_dir: &PathBuf) -> PartitionConfig {
        PartitionConfig {
            k: self.k,
            p: self.p,
            t: self.t,
            rc_mode: self.rc_mode(),
            scanner: self.scanner,
            wrap: self.wrap.0,
            work_dir: work_dir.clone(),
            memory_budget: self.mem,
        }
    }
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    input: InputArgs,

    #[command(flatten)]
    config: ConfigArgs,

    /// Working directory for partition files and outputs.
    #[arg(long)]
    workdir: PathBuf,

    /// Renumber vertex ids densely to 1..=V in the edge phase.
    #[arg(long)]
    densify: bool,
}

#[derive(Args)]
struct WorkdirArgs {
    #[arg(long)]
    workdir: PathBuf,
}

#[derive(Args)]
struct EdgesArgs {
    #[arg(long)]
    workdir: PathBuf,

    /// Renumber vertex ids densely to 1..=V.
    #[arg(long)]
    densify: bool,
}

#[derive(Args)]
struct BaselineArgs {
    /// h: horizontal read chunks; b: k-mer buckets.
    #[arg(value_parser = ["h", "b"])]
    mode: String,

    #[command(flatten)]
    input: InputArgs,

    /// k-mer length.
    #[arg(short, default_value_t = 59)]
    k: usize,

    /// Partition (chunk/bucket) count.
    #[arg(short, default_value_t = 16)]
    t: usize,

    /// Consider reverse complements (default).
    #[arg(long, overrides_with = "no_rc")]
    rc: bool,

    /// Forward strand only.
    #[arg(long)]
    no_rc: bool,

    /// Advisory table memory budget.
    #[arg(long, default_value = "4G", value_parser = parse_size)]
    mem: u64,

    /// Bucket by the last four symbols instead of hashing the whole k-mer
    /// (b mode only).
    #[arg(long)]
    last_four: bool,

    #[arg(long)]
    workdir: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(subcommand)]
    what: AnalyzeCommand,

    /// Write CSV here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Average break counts over a (m, k, p) grid.
    /// Columns: m,k,p,trials,mean_breaks,stderr.
    Breaks {
        #[arg(long, value_delimiter = ',', default_value = "100")]
        m_list: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "59")]
        k_list: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "4,8,12")]
        p_list: Vec<usize>,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Expected fraction of k-mers covered by each p-word.
    /// Columns: word,fraction.
    Capacity {
        #[arg(short, default_value_t = 59)]
        k: usize,
        #[arg(short, default_value_t = 4)]
        p: usize,
        /// Symbol probabilities for A,C,G,T.
        #[arg(long, value_delimiter = ',', num_args = 4)]
        probs: Option<Vec<f64>>,
        /// Sort descending by fraction (the capacity curve).
        #[arg(long)]
        sorted: bool,
        /// Monte Carlo sample count; required once p exceeds 8.
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Largest-partition fraction and its analytic bounds.
    /// Columns: k,p,alpha,lower_bound,upper_bound.
    Alpha {
        #[arg(long, default_value_t = 50)]
        k_min: usize,
        #[arg(long, default_value_t = 100)]
        k_max: usize,
        #[arg(short, default_value_t = 5)]
        p: usize,
    },
    /// Clean probability of a word over random strings.
    /// Columns: word,n,clean_probability,min_word_probability.
    Minstb {
        /// Target word as a DNA string (A=0 < C < G < T).
        #[arg(long)]
        word: String,
        #[arg(short, default_value_t = 59)]
        n: usize,
        #[arg(long, value_delimiter = ',', num_args = 4)]
        probs: Option<Vec<f64>>,
    },
    /// Monte Carlo check of the shifted-parameter break-rate inequality.
    /// Columns: k,p,a,trials,p1,p1_stderr,p1_shifted,p1_shifted_stderr,
    /// shifted_bound,ratio_bound,shifted_holds,ratio_holds.
    P1 {
        #[arg(short, default_value_t = 20)]
        k: usize,
        #[arg(short, default_value_t = 4)]
        p: usize,
        #[arg(short, default_value_t = 3)]
        a: usize,
        #[arg(long, default_value_t = 1_000_000)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    input: InputArgs,

    #[command(flatten)]
    config: ConfigArgs,

    #[arg(long)]
    workdir: PathBuf,
}

fn parse_size(raw: &str) -> Result<u64, String> {
    let raw = raw.trim();
    let (digits, multiplier) = match raw.chars().last() {
        Some('K' | 'k') => (&raw[..raw.len() - 1], 1u64 << 10),
        Some('M' | 'm') => (&raw[..raw.len() - 1], 1u64 << 20),
        Some('G' | 'g') => (&raw[..raw.len() - 1], 1u64 << 30),
        _ => (raw, 1),
    };
    digits
        .parse::<u64>()
        .map(|v| v * multiplier)
        .map_err(|e| format!("invalid size {raw:?}: {e}"))
}

fn parse_probs(probs: &Option<Vec<f64>>) -> anyhow::Result<SymbolDistribution> {
    match probs {
        None => Ok(SymbolDistribution::uniform()),
        Some(values) => {
            let array: [f64; 4] = values
                .as_slice()
                .try_into()
                .ok()
                .context("expected exactly four probabilities")?;
            Ok(SymbolDistribution::new(array)?)
        }
    }
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("initializing the worker pool")?;
    }
    match cli.command {
        Command::Build(args) => {
            run_partition(&args)?;
            pipeline::map_phase(&args.workdir)?;
            pipeline::merge_phase(&args.workdir)?;
            pipeline::edges_phase(&args.workdir, args.densify)?;
            print_manifest(&args.workdir)?;
        }
        Command::Partition(args) => {
            run_partition(&args)?;
            print_manifest(&args.workdir)?;
        }
        Command::Map(args) => {
            pipeline::map_phase(&args.workdir)?;
            print_manifest(&args.workdir)?;
        }
        Command::Merge(args) => {
            pipeline::merge_phase(&args.workdir)?;
            print_manifest(&args.workdir)?;
        }
        Command::Edges(args) => {
            pipeline::edges_phase(&args.workdir, args.densify)?;
            print_manifest(&args.workdir)?;
        }
        Command::Baseline(args) => run_baseline(&args)?,
        Command::Analyze(args) => run_analyze(&args)?,
        Command::Verify(args) => run_verify(&args)?,
    }
    Ok(())
}

fn run_partition(args: &BuildArgs) -> anyhow::Result<()> {
    let cfg = args.config.to_config(&args.workdir);
    let mut reads = Ingest::new(args.input.inputs.clone(), cfg.k, !args.input.no_split);
    let summary = pipeline::partition_phase(&mut reads, &cfg)?;
    let stats = reads.stats();

    let layout = Layout::new(&args.workdir);
    let mut manifest = Manifest::load(&layout.manifest())?;
    manifest.set("records", stats.records);
    manifest.set("reads_dropped_short", stats.dropped_short);
    manifest.set("records_split", stats.split_records);
    if let Some(seed) = args.config.seed {
        manifest.set("seed", seed);
    }
    manifest.save(&layout.manifest())?;

    if stats.dropped_short > 0 {
        eprintln!(
            "warning: dropped {} reads shorter than k = {}",
            stats.dropped_short, cfg.k
        );
    }
    if summary.reads > 0 {
        let m = (summary.input_bases / summary.reads).max(cfg.k as u64) as usize;
        if let Ok(estimate) =
            analysis::total_size_estimate(summary.input_bases, m, cfg.k, cfg.p, 2000, 1)
        {
            eprintln!(
                "partitioned {} reads: {} bases in, {} partition bases \
                 (model estimate {:.0})",
                summary.reads, summary.input_bases, summary.partition_bases, estimate
            );
        }
    }
    Ok(())
}

fn print_manifest(workdir: &PathBuf) -> anyhow::Result<()> {
    let manifest = Manifest::load(&Layout::new(workdir).manifest())?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for (key, value) in manifest.iter() {
        // Per-partition counters stay in the file; the summary lines are
        // enough on the console.
        if !key.starts_with("partition.") {
            writeln!(out, "{key}={value}")?;
        }
    }
    Ok(())
}

fn run_baseline(args: &BaselineArgs) -> anyhow::Result<()> {
    let rc_mode = !args.no_rc;
    let source = FileSource {
        paths: args.input.inputs.clone(),
        k: args.k,
        split_on_n: !args.input.no_split,
    };
    let started = std::time::Instant::now();
    let summary: BaselineSummary = match args.mode.as_str() {
        "h" => h_partition(&source, args.k, args.t, rc_mode, &args.workdir, args.mem)?,
        "b" => b_partition(
            &source,
            args.k,
            args.t,
            rc_mode,
            &args.workdir,
            args.mem,
            if args.last_four {
                BucketKey::LastFour
            } else {
                BucketKey::FullKmer
            },
        )?,
        other => bail!("unknown baseline mode {other:?}"),
    };

    let mut manifest = Manifest::new();
    manifest.set("method", format!("{}-partition", args.mode));
    manifest.set("k", args.k);
    manifest.set("t", args.t);
    manifest.set("rc_mode", rc_mode);
    manifest.set("n_kmers", summary.n_kmers);
    manifest.set("distinct_kmers", summary.distinct);
    manifest.set("spill_bytes", summary.spill_bytes);
    manifest.set("id_stream", summary.id_stream.display());
    manifest.set(
        "phase.baseline.seconds",
        format!("{:.3}", started.elapsed().as_secs_f64()),
    );
    if let Some(kb) = pipeline::peak_rss_kb() {
        manifest.set("phase.baseline.rss_kb", kb);
    }
    manifest.save(&args.workdir.join("manifest.txt"))?;
    for (key, value) in manifest.iter() {
        println!("{key}={value}");
    }
    Ok(())
}

fn csv_writer(out: &Option<PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(File::create(path).context("creating --out file")?),
        None => Box::new(std::io::stdout()),
    })
}

fn run_analyze(args: &AnalyzeArgs) -> anyhow::Result<()> {
    let mut out = csv_writer(&args.out)?;
    match &args.what {
        AnalyzeCommand::Breaks {
            m_list,
            k_list,
            p_list,
            trials,
            seed,
        } => {
            writeln!(out, "m,k,p,trials,mean_breaks,stderr")?;
            for &m in m_list {
                for &k in k_list {
                    for &p in p_list {
                        if p > k || k > m {
                            eprintln!("skipping m={m},k={k},p={p}: need p <= k <= m");
                            continue;
                        }
                        let est = analysis::simulate_breaks(m, k, p, *trials, *seed)?;
                        writeln!(out, "{m},{k},{p},{trials},{:.6},{:.6}", est.mean, est.stderr)?;
                    }
                }
            }
        }
        AnalyzeCommand::Capacity {
            k,
            p,
            probs,
            sorted,
            samples,
            seed,
        } => {
            let dist = parse_probs(probs)?;
            let mut rows = match samples {
                Some(samples) => {
                    analysis::capacity_distribution_monte_carlo(*k, *p, &dist, *samples, *seed)?
                }
                None => analysis::capacity_distribution(*k, *p, &dist)?,
            };
            if *sorted {
                rows.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            }
            writeln!(out, "word,fraction")?;
            for (word, fraction) in rows {
                writeln!(out, "{word},{fraction:.12}")?;
            }
        }
        AnalyzeCommand::Alpha { k_min, k_max, p } => {
            writeln!(out, "k,p,alpha,lower_bound,upper_bound")?;
            for k in *k_min..=*k_max {
                let a = analysis::alpha(k, *p)?;
                let scale = 4.0f64.powi(*p as i32 + 1);
                writeln!(
                    out,
                    "{k},{p},{a:.12},{:.12},{:.12}",
                    2.0 * k as f64 / scale,
                    3.0 * k as f64 / scale
                )?;
            }
        }
        AnalyzeCommand::Minstb { word, n, probs } => {
            let dist = parse_probs(probs)?;
            let packed = PackedSequence::from_ascii(word.as_bytes())?;
            let codes: Vec<u8> = (0..packed.len()).map(|i| packed.code(i)).collect();
            let clean = analysis::clean_probability(&codes, *n, &dist)?;
            let min_word = analysis::prob_min_word(&codes, *n, &dist)?;
            writeln!(out, "word,n,clean_probability,min_word_probability")?;
            writeln!(out, "{word},{n},{clean:.12},{min_word:.12}")?;
        }
        AnalyzeCommand::P1 {
            k,
            p,
            a,
            trials,
            seed,
        } => {
            let report = analysis::p1_inequalities(*k, *p, *a, *trials, *seed)?;
            writeln!(
                out,
                "k,p,a,trials,p1,p1_stderr,p1_shifted,p1_shifted_stderr,\
                 shifted_bound,ratio_bound,shifted_holds,ratio_holds"
            )?;
            writeln!(
                out,
                "{k},{p},{a},{trials},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{}",
                report.base.mean,
                report.base.stderr,
                report.shifted.mean,
                report.shifted.stderr,
                report.shifted_bound,
                report.ratio_bound,
                report.shifted_holds_3_sigma,
                report.ratio_holds_3_sigma
            )?;
        }
    }
    Ok(())
}

fn run_verify(args: &VerifyArgs) -> anyhow::Result<()> {
    let cfg = args.config.to_config(&args.workdir);
    let mut reads = Ingest::new(args.input.inputs.clone(), cfg.k, !args.input.no_split);
    let built = pipeline::build(&mut reads, &cfg, false)?;

    let source = FileSource {
        paths: args.input.inputs.clone(),
        k: cfg.k,
        split_on_n: !args.input.no_split,
    };
    let reference = reference_build(source.reads()?, cfg.k, cfg.rc_mode)?;

    println!(
        "check=vertices pipeline={} reference={} status={}",
        built.vertex_count(),
        reference.vertex_count(),
        ok(built.vertices == reference.vertices)
    );
    println!(
        "check=edges pipeline={} reference={} status={}",
        built.edge_count(),
        reference.edge_count(),
        ok(built.edges == reference.edges)
    );
    if built == reference {
        println!("verify=ok");
        Ok(())
    } else {
        println!("verify=mismatch");
        bail!("pipeline graph differs from the reference builder");
    }
}

fn ok(matched: bool) -> &'static str {
    if matched {
        "ok"
    } else {
        "mismatch"
    }
}
