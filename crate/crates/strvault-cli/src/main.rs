//! `strvault`: build, query, benchmark, and analyze STR-keyed vaults.
//!
//! Exit codes are a stable contract scripts may rely on:
//! 0 = success / match, 1 = negative answer (no match, attack exhausted),
//! 2 = input or usage error, 3 = I/O error, 4 = corrupt vault.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use strvault::population::{
    kinship_attack, locus_entropy, sample_individual, security_report, shared_bits_distribution,
    AlleleFrequencyTable, AttackOutcome, Relation,
};
use strvault::profile::{parse_profile, LocusName, StrProfile};
use strvault::record::{seal, seal_with_key, PlainRecord};
use strvault::search::{benchmark, search, SearchError};
use strvault::vault::{Vault, VaultError, VaultWriter};

const EXIT_NEGATIVE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_CORRUPT: u8 = 4;

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> CliError {
        CliError { code: EXIT_USAGE, message: message.into() }
    }
    fn io(message: impl Into<String>) -> CliError {
        CliError { code: EXIT_IO, message: message.into() }
    }
    fn corrupt(message: impl Into<String>) -> CliError {
        CliError { code: EXIT_CORRUPT, message: message.into() }
    }
}

impl From<VaultError> for CliError {
    fn from(e: VaultError) -> CliError {
        match &e {
            VaultError::InvalidHeader(_) | VaultError::CorruptRecord { .. } => {
                CliError::corrupt(e.to_string())
            }
            _ => CliError::io(e.to_string()),
        }
    }
}

impl From<SearchError> for CliError {
    fn from(e: SearchError) -> CliError {
        match &e {
            SearchError::Vault(inner) => match inner {
                VaultError::InvalidHeader(_) | VaultError::CorruptRecord { .. } => {
                    CliError::corrupt(e.to_string())
                }
                _ => CliError::io(e.to_string()),
            },
            SearchError::Malformed { .. } => CliError::corrupt(e.to_string()),
            SearchError::WorkerPanicked => CliError::io(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Kv,
}

#[derive(Parser)]
#[command(name = "strvault", version, about = "STR-keyed searchable encrypted vault")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Deterministic RNG seed; omit to draw from OS entropy
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output format
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Seal profile/metadata/blob triples into a new vault
    Build {
        #[arg(long)]
        vault: PathBuf,
        /// Profile file; repeat once per record
        #[arg(long, required = true)]
        profile: Vec<PathBuf>,
        /// Metadata text file; repeat once per record
        #[arg(long, required = true)]
        metadata: Vec<PathBuf>,
        /// Biometric blob file; repeat once per record
        #[arg(long, required = true)]
        blob: Vec<PathBuf>,
        /// Record id; defaults to the profile file stem
        #[arg(long)]
        id: Vec<String>,
        /// Replace an existing vault
        #[arg(long)]
        force: bool,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Search a vault by trial-decrypting every record with a profile's key
    Query {
        #[arg(long)]
        vault: PathBuf,
        #[arg(long)]
        profile: PathBuf,
        /// Parallel scan workers
        #[arg(long)]
        workers: Option<usize>,
        /// Where to write the decrypted biometric blob (never the terminal);
        /// additional matches get numeric suffixes
        #[arg(long)]
        blob_out: Option<PathBuf>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Build a synthetic vault and measure no-match scan throughput
    Bench {
        /// Scratch vault path; a temporary file by default
        #[arg(long)]
        vault: Option<PathBuf>,
        /// Synthetic record count
        #[arg(long, default_value_t = 64)]
        records: u64,
        /// Biometric blob size per record, bytes
        #[arg(long, default_value_t = 1024 * 1024)]
        record_size: usize,
        /// Comma-separated worker counts, e.g. 1,2,4
        #[arg(long, default_value = "1", value_parser = parse_worker_list)]
        workers: std::vec::Vec<usize>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Report per-locus and total genotype entropy of a frequency table
    Entropy {
        /// Frequency table CSV; defaults to the bundled table
        #[arg(long)]
        freq_table: Option<PathBuf>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Simulate relative pairs and report their shared-key-bit distribution
    Simulate {
        #[arg(long)]
        freq_table: Option<PathBuf>,
        /// twin, sibling, cousin, or unrelated; omit for the full report
        #[arg(long)]
        relation: Option<Relation>,
        /// Pairs per relation
        #[arg(short = 'n', long, default_value_t = 10_000)]
        pairs: u64,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Run the reduced-roster brute-force key recovery demonstrator
    Attack {
        #[arg(long)]
        freq_table: Option<PathBuf>,
        /// Reduced locus roster (at most 6), comma-separated
        #[arg(
            long,
            default_value = "CSF1PO,D10S1248,D12S391,D13S317,D16S539,D18S51",
            value_parser = parse_locus_list
        )]
        loci: std::vec::Vec<LocusName>,
        /// Loci whose allele codes the attacker already knows from a relative
        #[arg(long, default_value = "", value_parser = parse_locus_list)]
        known_loci: std::vec::Vec<LocusName>,
        #[arg(long)]
        workers: Option<usize>,
        #[command(flatten)]
        common: CommonOpts,
    },
}

fn parse_worker_list(s: &str) -> Result<Vec<usize>, String> {
    let list: Result<Vec<usize>, _> = s
        .split(',')
        .map(|w| w.trim().parse::<usize>())
        .collect();
    match list {
        Ok(v) if !v.is_empty() && v.iter().all(|&w| w >= 1) => Ok(v),
        _ => Err(format!("`{s}` is not a comma-separated list of worker counts >= 1")),
    }
}

fn parse_locus_list(s: &str) -> Result<Vec<LocusName>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| LocusName::parse(t).ok_or_else(|| format!("unknown locus `{t}`")))
        .collect()
}

fn rng_from(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(seed) => ChaCha20Rng::seed_from_u64(seed),
        None => ChaCha20Rng::from_entropy(),
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn read_profile(path: &Path) -> Result<StrProfile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    parse_profile(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn load_table(path: &Option<PathBuf>) -> Result<AlleleFrequencyTable, CliError> {
    match path {
        None => Ok(AlleleFrequencyTable::bundled().clone()),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
            AlleleFrequencyTable::parse(&text)
                .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn run(command: Command) -> Result<u8, CliError> {
    match command {
        Command::Build { vault, profile, metadata, blob, id, force, common } => {
            cmd_build(&vault, &profile, &metadata, &blob, &id, force, &common)
        }
        Command::Query { vault, profile, workers, blob_out, common } => {
            cmd_query(&vault, &profile, workers, blob_out, &common)
        }
        Command::Bench { vault, records, record_size, workers, common } => {
            cmd_bench(vault, records, record_size, &workers, &common)
        }
        Command::Entropy { freq_table, common } => cmd_entropy(&freq_table, &common),
        Command::Simulate { freq_table, relation, pairs, common } => {
            cmd_simulate(&freq_table, relation, pairs, &common)
        }
        Command::Attack { freq_table, loci, known_loci, workers, common } => {
            cmd_attack(&freq_table, &loci, &known_loci, workers, &common)
        }
    }
}

fn cmd_build(
    vault: &Path,
    profiles: &[PathBuf],
    metadata: &[PathBuf],
    blobs: &[PathBuf],
    ids: &[String],
    force: bool,
    common: &CommonOpts,
) -> Result<u8, CliError> {
    if profiles.len() != metadata.len() || profiles.len() != blobs.len() {
        return Err(CliError::usage(format!(
            "got {} --profile, {} --metadata, {} --blob; counts must match",
            profiles.len(),
            metadata.len(),
            blobs.len()
        )));
    }
    if !ids.is_empty() && ids.len() != profiles.len() {
        return Err(CliError::usage(format!(
            "got {} --id for {} records; pass one per record or none",
            ids.len(),
            profiles.len()
        )));
    }

    // parse and read everything before touching the vault
    let mut records = Vec::with_capacity(profiles.len());
    for (i, profile_path) in profiles.iter().enumerate() {
        let profile = read_profile(profile_path)?;
        let metadata = std::fs::read_to_string(&metadata[i])
            .map_err(|e| CliError::io(format!("{}: {e}", metadata[i].display())))?;
        let blob = std::fs::read(&blobs[i])
            .map_err(|e| CliError::io(format!("{}: {e}", blobs[i].display())))?;
        let id = if ids.is_empty() {
            profile_path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .ok_or_else(|| {
                    CliError::usage(format!("{}: cannot derive a record id", profile_path.display()))
                })?
        } else {
            ids[i].clone()
        };
        records.push((id, PlainRecord { profile, metadata, blob }));
    }

    let mut rng = rng_from(common.seed);
    let mut writer = VaultWriter::create(vault, force)?;
    for (id, record) in &records {
        let sealed = seal(record, id, &mut rng).map_err(|e| CliError::usage(e.to_string()))?;
        writer.append(&sealed)?;
    }
    writer.finish()?;
    match common.format {
        Format::Text => println!("sealed {} record(s) into {}", records.len(), vault.display()),
        Format::Kv => println!("vault={}\nrecords_sealed={}", vault.display(), records.len()),
    }
    Ok(0)
}

fn cmd_query(
    vault_path: &Path,
    profile_path: &Path,
    workers: Option<usize>,
    blob_out: Option<PathBuf>,
    common: &CommonOpts,
) -> Result<u8, CliError> {
    let query = read_profile(profile_path)?;
    let vault = Vault::open(vault_path)?;
    let report = search(&vault, &query, workers.unwrap_or_else(default_workers))?;

    if report.matches.is_empty() {
        println!("NO MATCH");
        return Ok(EXIT_NEGATIVE);
    }
    let blob_base = blob_out.unwrap_or_else(|| PathBuf::from("match.blob"));
    let mut blob_paths = Vec::new();
    for (i, m) in report.matches.iter().enumerate() {
        let path = if i == 0 {
            blob_base.clone()
        } else {
            let mut name = blob_base.as_os_str().to_owned();
            name.push(format!(".{i}"));
            PathBuf::from(name)
        };
        std::fs::write(&path, &m.plain.blob)
            .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        blob_paths.push(path);
    }
    match common.format {
        Format::Text => {
            print!("{}", report.to_table());
            for (m, path) in report.matches.iter().zip(&blob_paths) {
                println!("--- metadata for {} ---", m.record_id);
                println!("{}", m.plain.metadata);
                println!("--- blob written to {} ({} bytes) ---", path.display(), m.plain.blob.len());
            }
        }
        Format::Kv => {
            print!("{}", report.to_kv());
            for (i, (m, path)) in report.matches.iter().zip(&blob_paths).enumerate() {
                println!("metadata.{i}={}", m.plain.metadata.escape_default());
                println!("blob_path.{i}={}", path.display());
            }
        }
    }
    Ok(0)
}

fn cmd_bench(
    vault_path: Option<PathBuf>,
    records: u64,
    record_size: usize,
    workers: &[usize],
    common: &CommonOpts,
) -> Result<u8, CliError> {
    let tempdir = tempfile::tempdir().map_err(|e| CliError::io(e.to_string()))?;
    let path = vault_path.unwrap_or_else(|| tempdir.path().join("bench.vault"));

    let mut rng = rng_from(common.seed);
    let mut writer = VaultWriter::create(&path, true)?;
    let mut blob = vec![0u8; record_size];
    for i in 0..records {
        use rand::RngCore;
        let profile = StrProfile::random_uniform(&mut rng);
        rng.fill_bytes(&mut blob);
        let record = PlainRecord {
            profile,
            metadata: format!("synthetic-{i}"),
            blob: blob.clone(),
        };
        let sealed = seal(&record, &format!("bench-{i}"), &mut rng)
            .map_err(|e| CliError::usage(e.to_string()))?;
        writer.append(&sealed)?;
    }
    writer.finish()?;

    let vault = Vault::open(&path)?;
    let report = benchmark(&vault, workers)?;
    match common.format {
        Format::Text => print!("{}", report.to_table()),
        Format::Kv => print!("{}", report.to_kv()),
    }
    Ok(0)
}

fn cmd_entropy(freq_table: &Option<PathBuf>, common: &CommonOpts) -> Result<u8, CliError> {
    let table = load_table(freq_table)?;
    let total = strvault::population::total_entropy(&table);
    match common.format {
        Format::Text => {
            println!("locus       alleles  genotype_entropy_bits");
            for locus in LocusName::all() {
                println!(
                    "{:<10} {:>8}  {:>20.6}",
                    locus.as_str(),
                    table.alleles(locus).len(),
                    locus_entropy(&table, locus)
                );
            }
            println!("total genotype entropy: {total:.6} bits (claim threshold: 80)");
        }
        Format::Kv => {
            for locus in LocusName::all() {
                println!("locus.{}.entropy_bits={:.9}", locus.as_str(), locus_entropy(&table, locus));
            }
            println!("total_entropy_bits={total:.9}");
        }
    }
    Ok(0)
}

fn cmd_simulate(
    freq_table: &Option<PathBuf>,
    relation: Option<Relation>,
    pairs: u64,
    common: &CommonOpts,
) -> Result<u8, CliError> {
    if pairs == 0 {
        return Err(CliError::usage("--pairs must be at least 1"));
    }
    let table = load_table(freq_table)?;
    let seed = common.seed.unwrap_or_else(rand::random);
    match relation {
        Some(relation) => {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let stats = shared_bits_distribution(&table, relation, pairs, &mut rng);
            match common.format {
                Format::Text => {
                    println!("relation={} pairs={} seed={}", relation, pairs, seed);
                    println!(
                        "shared bits: mean={:.3} sd={:.3} min={} max={} ci99=({:.3},{:.3})",
                        stats.mean, stats.sd, stats.min, stats.max,
                        stats.mean_ci99.0, stats.mean_ci99.1
                    );
                    println!("effective bits (mean): {:.3}", stats.effective_bits_mean());
                    print!("histogram:");
                    for (bits, &count) in stats.histogram.iter().enumerate() {
                        if count > 0 {
                            print!(" {bits}:{count}");
                        }
                    }
                    println!();
                }
                Format::Kv => {
                    println!("relation={relation}\npairs={pairs}\nseed={seed}");
                    println!("mean_shared_bits={:.4}", stats.mean);
                    println!("sd={:.4}", stats.sd);
                    println!("min={}\nmax={}", stats.min, stats.max);
                    println!("ci99_low={:.4}\nci99_high={:.4}", stats.mean_ci99.0, stats.mean_ci99.1);
                    println!("effective_bits={:.4}", stats.effective_bits_mean());
                    for (bits, &count) in stats.histogram.iter().enumerate() {
                        if count > 0 {
                            println!("hist.{bits}={count}");
                        }
                    }
                }
            }
        }
        None => {
            let report = security_report(&table, pairs, seed);
            match common.format {
                Format::Text => print!("{}", report.to_text()),
                Format::Kv => print!("{}", report.to_kv()),
            }
        }
    }
    Ok(0)
}

fn cmd_attack(
    freq_table: &Option<PathBuf>,
    loci: &[LocusName],
    known_loci: &[LocusName],
    workers: Option<usize>,
    common: &CommonOpts,
) -> Result<u8, CliError> {
    let table = load_table(freq_table)?;
    let seed = common.seed.unwrap_or_else(rand::random);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);

    // scenario: a target record sealed under the reduced-roster key, and a
    // relative who shares (identically, by descent) the known loci
    let target_profile = sample_individual(&table, &mut rng);
    let target_record = PlainRecord {
        profile: target_profile.clone(),
        metadata: "demonstrator target".into(),
        blob: vec![0xD0; 48],
    };
    let material = strvault::keygen::derive_key_material(&target_profile, loci);
    let key = strvault::keygen::expand_key_material(&material);
    let sealed = seal_with_key(&target_record, "target", &key, &mut rng)
        .map_err(|e| CliError::usage(e.to_string()))?;

    let mut relative_entries: std::collections::BTreeMap<_, _> =
        sample_individual(&table, &mut rng).entries().collect();
    for locus in known_loci {
        relative_entries.insert(*locus, target_profile.genotype(*locus));
    }
    let relative = StrProfile::from_entries(&relative_entries)
        .expect("sampled profiles are complete");

    let total_bits = 4 * loci.len();
    let known_bits = 4 * known_loci.len();
    let workers = workers.unwrap_or_else(default_workers);
    let outcome = kinship_attack(&sealed, &relative, loci, known_loci, workers)
        .map_err(|e| CliError::usage(e.to_string()))?;

    let loci_names: Vec<&str> = loci.iter().map(|l| l.as_str()).collect();
    let known_names: Vec<&str> = known_loci.iter().map(|l| l.as_str()).collect();
    let hex = |bytes: &[u8]| bytes.iter().map(|b| format!("{b:02x}")).collect::<String>();
    match common.format {
        Format::Text => {
            println!("attack roster: {} ({total_bits} key bits)", loci_names.join(","));
            println!(
                "known from relative: {} ({known_bits} bits) -> residual space 2^{}",
                if known_names.is_empty() { "none".to_string() } else { known_names.join(",") },
                total_bits - known_bits
            );
            println!("seed={seed} workers={workers}");
            match &outcome {
                AttackOutcome::Recovered { material: found, trials, plain } => {
                    println!("recovered key material {} after {trials} trial decryptions", hex(found));
                    println!(
                        "target record decrypted: metadata `{}`, blob {} bytes",
                        plain.metadata,
                        plain.blob.len()
                    );
                    println!("recovered material matches target profile: {}", *found == material);
                }
                AttackOutcome::Exhausted { trials } => {
                    println!("EXHAUSTED after {trials} trial decryptions; nothing recovered");
                }
            }
        }
        Format::Kv => {
            println!("roster={}", loci_names.join(","));
            println!("known_loci={}", known_names.join(","));
            println!("total_bits={total_bits}\nknown_bits={known_bits}");
            println!("residual_bits={}", total_bits - known_bits);
            println!("seed={seed}\nworkers={workers}");
            match &outcome {
                AttackOutcome::Recovered { material: found, trials, plain } => {
                    println!("outcome=recovered\ntrials={trials}");
                    println!("material={}", hex(found));
                    println!("material_matches_target={}", *found == material);
                    println!("blob_bytes={}", plain.blob.len());
                }
                AttackOutcome::Exhausted { trials } => {
                    println!("outcome=exhausted\ntrials={trials}");
                }
            }
        }
    }
    Ok(match outcome {
        AttackOutcome::Recovered { .. } => 0,
        AttackOutcome::Exhausted { .. } => EXIT_NEGATIVE,
    })
}
