//! End-to-end command-line tests over small fixtures.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn msp() -> Command {
    Command::new(env!("CARGO_BIN_EXE_msp"))
}

fn run(args: &[&str]) -> Output {
    msp().args(args).output().expect("spawning msp")
}

fn assert_ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_fixture(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("reads.fa");
    fs::write(&path, ">r1\nGTAATGAC\n>r2\nGTAATGAC\n").unwrap();
    path
}

fn manifest_value(stdout: &str, key: &str) -> String {
    stdout
        .lines()
        .find_map(|line| line.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("missing {key} in output:\n{stdout}"))
        .to_string()
}

#[test]
fn build_produces_graph_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_fixture(dir.path());
    let work = dir.path().join("work");
    let stdout = assert_ok(&run(&[
        "build",
        "-i",
        input.to_str().unwrap(),
        "-k",
        "5",
        "-p",
        "3",
        "-t",
        "16",
        "--no-rc",
        "--workdir",
        work.to_str().unwrap(),
    ]));
    assert_eq!(manifest_value(&stdout, "n_kmers"), "8");
    assert_eq!(manifest_value(&stdout, "distinct_kmers"), "4");
    assert_eq!(manifest_value(&stdout, "vertices"), "4");
    assert_eq!(manifest_value(&stdout, "edges"), "3");
    assert_eq!(manifest_value(&stdout, "last_phase"), "edges");

    let edges = fs::read_to_string(work.join("edges.txt")).unwrap();
    assert_eq!(edges, "1 2 2\n2 3 2\n3 4 2\n");
}

#[test]
fn phases_run_individually() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_fixture(dir.path());
    let work = dir.path().join("work");
    let common = [
        "-i",
        input.to_str().unwrap(),
        "-k",
        "5",
        "-p",
        "3",
        "-t",
        "8",
        "--no-rc",
        "--workdir",
        work.to_str().unwrap(),
    ];
    let stdout = assert_ok(&run(&[&["partition"], &common[..]].concat()));
    assert_eq!(manifest_value(&stdout, "last_phase"), "partition");
    let workdir_args = ["--workdir", work.to_str().unwrap()];
    let stdout = assert_ok(&run(&[&["map"], &workdir_args[..]].concat()));
    assert_eq!(manifest_value(&stdout, "last_phase"), "map");
    let stdout = assert_ok(&run(&[&["merge"], &workdir_args[..]].concat()));
    assert_eq!(manifest_value(&stdout, "last_phase"), "merge");
    let stdout = assert_ok(&run(&[&["edges"], &workdir_args[..]].concat()));
    assert_eq!(manifest_value(&stdout, "last_phase"), "edges");
    assert!(work.join("ids.bin").exists());
    assert!(work.join("edges.txt").exists());
}

#[test]
fn gzip_fastq_ingests() {
    use std::io::Write;

    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("reads.fq.gz");
    let file = fs::File::create(&input).unwrap();
    let mut enc = flate2::write::GzEncoder::new(file, flate2::Compression::default());
    enc.write_all(b"@r1\nGTAATGAC\n+\nIIIIIIII\n@r2\nGTAATGAC\n+\nIIIIIIII\n")
        .unwrap();
    enc.finish().unwrap();

    let work = dir.path().join("work");
    let stdout = assert_ok(&run(&[
        "build",
        "-i",
        input.to_str().unwrap(),
        "-k",
        "5",
        "-p",
        "3",
        "-t",
        "4",
        "--no-rc",
        "--workdir",
        work.to_str().unwrap(),
    ]));
    assert_eq!(manifest_value(&stdout, "n_kmers"), "8");
}

#[test]
fn verify_passes_on_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_fixture(dir.path());
    for mode in [&["--rc"][..], &["--no-rc"][..]] {
        let work = tempfile::tempdir().unwrap();
        let mut args = vec![
            "verify",
            "-i",
            input.to_str().unwrap(),
            "-k",
            "5",
            "-p",
            "3",
            "-t",
            "16",
            "--workdir",
            work.path().to_str().unwrap(),
        ];
        args.extend_from_slice(mode);
        let stdout = assert_ok(&run(&args));
        assert!(stdout.contains("verify=ok"), "{stdout}");
    }
}

#[test]
fn baseline_b_reports_spill_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_fixture(dir.path());
    let work = dir.path().join("bwork");
    let stdout = assert_ok(&run(&[
        "baseline",
        "b",
        "-i",
        input.to_str().unwrap(),
        "-k",
        "5",
        "-t",
        "4",
        "--no-rc",
        "--workdir",
        work.to_str().unwrap(),
    ]));
    assert_eq!(manifest_value(&stdout, "method"), "b-partition");
    assert_eq!(manifest_value(&stdout, "n_kmers"), "8");
    assert_eq!(manifest_value(&stdout, "distinct_kmers"), "4");
    let spill: u64 = manifest_value(&stdout, "spill_bytes").parse().unwrap();
    // 8 occurrences of 24 bytes each (8-byte ordinal + 16-byte key).
    assert_eq!(spill, 8 * 24);
    assert!(work.join("ids.bin").exists());
}

#[test]
fn baseline_h_matches_b_distinct_count() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_fixture(dir.path());
    let h_out = assert_ok(&run(&[
        "baseline",
        "h",
        "-i",
        input.to_str().unwrap(),
        "-k",
        "5",
        "-t",
        "2",
        "--workdir",
        dir.path().join("hwork").to_str().unwrap(),
    ]));
    assert_eq!(manifest_value(&h_out, "distinct_kmers"), "4");
}

#[test]
fn analyze_breaks_emits_csv_grid() {
    let stdout = assert_ok(&run(&[
        "analyze",
        "breaks",
        "--m-list",
        "40,60",
        "--k-list",
        "31",
        "--p-list",
        "8",
        "--trials",
        "500",
        "--seed",
        "3",
    ]));
    let lines: Vec<&str> = stdout.trim().lines().collect();
    assert_eq!(lines[0], "m,k,p,trials,mean_breaks,stderr");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("40,31,8,500,"));
}

#[test]
fn analyze_minstb_reports_probabilities() {
    let stdout = assert_ok(&run(&[
        "analyze", "minstb", "--word", "AA", "-n", "2",
    ]));
    let lines: Vec<&str> = stdout.trim().lines().collect();
    assert_eq!(lines[0], "word,n,clean_probability,min_word_probability");
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(fields[0], "AA");
    let clean: f64 = fields[2].parse().unwrap();
    assert!((clean - 15.0 / 16.0).abs() < 1e-9);
}

#[test]
fn analyze_capacity_sums_to_one() {
    let stdout = assert_ok(&run(&[
        "analyze", "capacity", "-k", "12", "-p", "2", "--sorted",
    ]));
    let mut total = 0.0f64;
    let mut last = f64::INFINITY;
    for line in stdout.trim().lines().skip(1) {
        let fraction: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(fraction <= last);
        last = fraction;
        total += fraction;
    }
    assert!((total - 1.0).abs() < 1e-9);
}

#[test]
fn analyze_alpha_brackets_value() {
    let stdout = assert_ok(&run(&[
        "analyze", "alpha", "--k-min", "50", "--k-max", "52", "-p", "5",
    ]));
    for line in stdout.trim().lines().skip(1) {
        let fields: Vec<f64> = line
            .split(',')
            .skip(2)
            .map(|f| f.parse().unwrap())
            .collect();
        let (alpha, lower, upper) = (fields[0], fields[1], fields[2]);
        assert!(lower < alpha && alpha < upper);
    }
}

#[test]
fn analyze_p1_inequalities_hold() {
    let stdout = assert_ok(&run(&[
        "analyze", "p1", "-k", "20", "-p", "4", "-a", "3", "--trials", "20000", "--seed", "5",
    ]));
    let data = stdout.trim().lines().nth(1).unwrap();
    assert!(data.ends_with("true,true"), "{data}");
}

#[test]
fn analyze_out_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("alpha.csv");
    assert_ok(&run(&[
        "analyze",
        "alpha",
        "--k-min",
        "50",
        "--k-max",
        "51",
        "-p",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]));
    let text = fs::read_to_string(out).unwrap();
    assert!(text.starts_with("k,p,alpha"));
}

#[test]
fn malformed_input_is_reported_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.fq");
    fs::write(&input, "@r1\nACGT\nIIII\n").unwrap();
    let out = run(&[
        "build",
        "-i",
        input.to_str().unwrap(),
        "-k",
        "3",
        "-p",
        "2",
        "-t",
        "4",
        "--workdir",
        dir.path().join("w").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("bad.fq") && stderr.contains("line 3"), "{stderr}");
}

#[test]
fn short_reads_are_dropped_with_warning() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("short.fa");
    fs::write(&input, ">r1\nGTAATGAC\n>r2\nAC\n").unwrap();
    let out = run(&[
        "build",
        "-i",
        input.to_str().unwrap(),
        "-k",
        "5",
        "-p",
        "3",
        "-t",
        "4",
        "--no-rc",
        "--workdir",
        dir.path().join("w").to_str().unwrap(),
    ]);
    let stdout = assert_ok(&out);
    assert_eq!(manifest_value(&stdout, "reads_dropped_short"), "1");
    assert!(String::from_utf8_lossy(&out.stderr).contains("dropped 1 reads"));
}
