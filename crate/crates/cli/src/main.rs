//! `sednas` — topology-only NAS scoring from the command line.
//!
//! Subcommands: `score`, `rank`, `correlate`, `search`, `verify-entropy`,
//! `enumerate`. All reports are UTF-8 JSON on stdout unless `--out` is
//! given. Exit codes: 0 success, 1 validation or usage error, 2 I/O error.
//! `SED_THREADS` caps scoring parallelism; results are identical for any
//! thread count.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use sednas_core::arch::{
    Architecture, KernelSpec, PoolKind, PoolSpec, SearchSpaceDescriptor, StrideSpec,
};
use sednas_core::bench::{self, BenchError, ReportFormat, TableFormat};
use sednas_core::entropy::{self, CovModel, FieldDist};
use sednas_core::parse;
use sednas_core::search::{self, SearchConfig};
use sednas_core::sed;

#[derive(Parser)]
#[command(
    name = "sednas",
    version,
    about = "Topology-only zero-cost NAS scoring"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score architecture encodings with the SED proxy.
    Score(ScoreArgs),
    /// Rank benchmark records by proxy score against a dataset column.
    Rank(RankArgs),
    /// Correlation statistics only (Spearman / Kendall).
    Correlate(RankArgs),
    /// Random search: sample encodings, score, select the argmax.
    Search(SearchArgs),
    /// Numerically verify the entropy propositions.
    #[command(name = "verify-entropy")]
    VerifyEntropy(VerifyArgs),
    /// List every NATS-Bench-TSS cell encoding (5^6 = 15,625 lines).
    Enumerate(EnumerateArgs),
}

#[derive(Args)]
struct ScoreArgs {
    /// Space descriptor JSON.
    #[arg(long)]
    space: PathBuf,
    /// A single encoding in the space's native format.
    #[arg(long)]
    arch: Option<String>,
    /// File of encodings, one per line ("-" for stdin).
    #[arg(long)]
    input: Option<String>,
    /// Emit the full per-block breakdown as JSON.
    #[arg(long)]
    explain: bool,
    /// Report scoring wall time (parsing excluded) on stderr.
    #[arg(long)]
    time: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RankArgs {
    /// Space descriptor JSON.
    #[arg(long)]
    space: PathBuf,
    /// Benchmark accuracy table.
    #[arg(long)]
    bench: PathBuf,
    #[arg(long, value_enum, default_value_t = BenchFormat::Csv)]
    bench_format: BenchFormat,
    /// Dataset column to rank against.
    #[arg(long)]
    dataset: String,
    /// Top-k size for the mean-accuracy statistic.
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, value_enum, default_value_t = OutFormat::Json)]
    format: OutFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SearchArgs {
    /// Space descriptor JSON.
    #[arg(long)]
    space: PathBuf,
    /// Number of randomized architectures to draw.
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sample without replacement.
    #[arg(long)]
    dedup: bool,
    /// Write the selected encoding and its breakdown as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Proposition to check: 1, 2, 3, or 4.
    #[arg(long)]
    prop: u8,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    trials: Option<u64>,
    // Proposition 1: kernel geometry.
    #[arg(long, default_value_t = 3)]
    kw: u32,
    #[arg(long, default_value_t = 3)]
    kh: u32,
    // Proposition 2: field and pooling geometry.
    #[arg(long, default_value_t = 32)]
    w: usize,
    #[arg(long, default_value_t = 32)]
    h: usize,
    /// Pool window (square; override the second axis with --pool-h).
    #[arg(long, default_value_t = 3)]
    pool: u32,
    #[arg(long)]
    pool_h: Option<u32>,
    /// Pool stride (square; override with --stride-h).
    #[arg(long, default_value_t = 1)]
    stride: u32,
    #[arg(long)]
    stride_h: Option<u32>,
    /// Sampling distribution: "normal" or "uniform:<levels>".
    #[arg(long, default_value = "normal")]
    dist: String,
    // Proposition 3: covariance model and window volumes.
    #[arg(long, value_enum, default_value_t = Model::Iid)]
    model: Model,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    /// Comma-separated window volumes.
    #[arg(long, default_value = "1,4,9,16")]
    sizes: String,
    // Proposition 4: random PD pair dimension and spectrum floor.
    #[arg(long, default_value_t = 8)]
    dim: usize,
    #[arg(long, default_value_t = 1e-3)]
    min_eig: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EnumerateArgs {
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Iid,
    Toeplitz,
}

enum CliError {
    Validation(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Io(m) => m,
        }
    }
}

impl From<parse::ParseError> for CliError {
    fn from(e: parse::ParseError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<sed::InvalidArchitecture> for CliError {
    fn from(e: sed::InvalidArchitecture) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<entropy::EntropyError> for CliError {
    fn from(e: entropy::EntropyError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Io { .. } => CliError::Io(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<search::SearchError> for CliError {
    fn from(e: search::SearchError) -> Self {
        match e {
            search::SearchError::Io { .. } => CliError::Io(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Score(args) => cmd_score(args),
        Command::Rank(args) => cmd_rank(args, true),
        Command::Correlate(args) => cmd_rank(args, false),
        Command::Search(args) => cmd_search(args),
        Command::VerifyEntropy(args) => cmd_verify(args),
        Command::Enumerate(args) => cmd_enumerate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_output(out: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            match writeln!(lock, "{text}") {
                Ok(()) => Ok(()),
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                Err(e) => Err(CliError::Io(format!("stdout: {e}"))),
            }
        }
    }
}

fn load_space(path: &Path) -> Result<SearchSpaceDescriptor, CliError> {
    Ok(parse::parse_space(&read_file(path)?)?)
}

fn scoring_threads() -> usize {
    let available = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    match std::env::var("SED_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        Some(cap) if cap >= 1 => available.min(cap),
        _ => available,
    }
}

fn cmd_score(args: ScoreArgs) -> Result<(), CliError> {
    let space = load_space(&args.space)?;
    let encodings: Vec<String> = match (&args.arch, &args.input) {
        (Some(a), None) => vec![a.clone()],
        (None, Some(input)) => {
            let text = if input == "-" {
                let mut lines = Vec::new();
                for line in std::io::stdin().lock().lines() {
                    lines.push(line.map_err(|e| CliError::Io(format!("stdin: {e}")))?);
                }
                lines.join("\n")
            } else {
                read_file(Path::new(input))?
            };
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(str::to_string)
                .collect()
        }
        _ => {
            return Err(CliError::Validation(
                "provide exactly one of --arch or --input".into(),
            ))
        }
    };
    if encodings.is_empty() {
        return Err(CliError::Validation("no encodings to score".into()));
    }

    // Parse first so the timed section covers scoring only.
    let mut archs: Vec<Option<Architecture>> = Vec::with_capacity(encodings.len());
    let mut parse_errors: Vec<(usize, String)> = Vec::new();
    for (i, e) in encodings.iter().enumerate() {
        match parse::parse_in_space(e, &space) {
            Ok(a) => archs.push(Some(a)),
            Err(err) => {
                archs.push(None);
                parse_errors.push((i, err.to_string()));
            }
        }
    }
    let parsed: Vec<Architecture> = archs.iter().flatten().cloned().collect();

    let started = Instant::now();
    let scores = sed::batch_score_parallel(&parsed, &space, scoring_threads());
    let elapsed = started.elapsed();

    if args.time {
        eprintln!(
            "scored {} architectures in {:.6} s ({:.3e} s per architecture)",
            parsed.len(),
            elapsed.as_secs_f64(),
            elapsed.as_secs_f64() / parsed.len().max(1) as f64
        );
    }

    let mut failed = !parse_errors.is_empty();
    for (i, msg) in &parse_errors {
        eprintln!("error: line {}: {msg}", i + 1);
    }

    let single = encodings.len() == 1 && args.arch.is_some();
    let mut body = String::new();
    let mut score_iter = scores.into_iter();
    for arch in archs.iter().flatten() {
        let result = score_iter.next().expect("one score per parsed arch");
        match result {
            Ok(value) => {
                if single && !args.explain {
                    body.push_str(&format!("{value}\n"));
                } else if args.explain {
                    let breakdown = sed::sed(arch, &space).expect("scored architecture is valid");
                    let doc = json!({
                        "encoding": arch.encoding,
                        "sed": value,
                        "breakdown": breakdown,
                    });
                    body.push_str(&serde_json::to_string_pretty(&doc).expect("json"));
                    body.push('\n');
                } else {
                    body.push_str(&format!("{value}\t{}\n", arch.encoding));
                }
            }
            Err(e) => {
                failed = true;
                eprintln!("error: {e}");
            }
        }
    }
    write_output(&args.out, body.trim_end())?;
    if failed {
        return Err(CliError::Validation(
            "some encodings failed to score".into(),
        ));
    }
    Ok(())
}

fn scores_for_records(
    space: &SearchSpaceDescriptor,
    records: &[bench::BenchmarkRecord],
) -> Result<HashMap<String, f64>, CliError> {
    let mut archs = Vec::with_capacity(records.len());
    for r in records {
        let arch = parse::parse_in_space(&r.encoding, space)
            .map_err(|e| CliError::Validation(format!("record {}: {e}", r.arch_id)))?;
        archs.push(arch);
    }
    let scores = sed::batch_score_parallel(&archs, space, scoring_threads());
    let mut map = HashMap::with_capacity(records.len());
    for (r, s) in records.iter().zip(scores) {
        let value = s.map_err(|e| CliError::Validation(format!("record {}: {e}", r.arch_id)))?;
        map.insert(r.arch_id.clone(), value);
    }
    Ok(map)
}

fn cmd_rank(args: RankArgs, full: bool) -> Result<(), CliError> {
    let space = load_space(&args.space)?;
    let format = match args.bench_format {
        BenchFormat::Csv => TableFormat::Csv,
        BenchFormat::Json => TableFormat::Json,
    };
    let records = bench::load_records(&args.bench, format)?;
    let scores = scores_for_records(&space, &records)?;
    let report = bench::rank_report(&records, &scores, &args.dataset, args.k.min(records.len()))?;

    if full {
        let text = match args.format {
            OutFormat::Json => bench::render_report(&report, ReportFormat::Json),
            OutFormat::Csv => bench::render_report(&report, ReportFormat::Csv),
        };
        write_output(&args.out, text.trim_end())?;
    } else {
        let doc = json!({
            "dataset": report.dataset,
            "n": report.n,
            "spearman": report.spearman,
            "kendall": report.kendall,
        });
        write_output(
            &args.out,
            &serde_json::to_string_pretty(&doc).expect("json"),
        )?;
    }
    Ok(())
}

fn cmd_search(args: SearchArgs) -> Result<(), CliError> {
    let space = load_space(&args.space)?;
    let config = SearchConfig {
        n_samples: args.n,
        seed: args.seed,
        dedup: args.dedup,
        output: args.out.clone(),
    };
    let outcome = search::search(&space, &config)?;
    let doc = json!({
        "encoding": outcome.best_encoding,
        "sed": outcome.best_sed,
        "scored": outcome.scored,
        "scoring_seconds": outcome.scoring_time.as_secs_f64(),
    });
    write_output(&None, &serde_json::to_string_pretty(&doc).expect("json"))
}

fn parse_dist(text: &str) -> Result<FieldDist, CliError> {
    if text == "normal" {
        return Ok(FieldDist::StandardNormal);
    }
    if let Some(levels) = text.strip_prefix("uniform:") {
        let levels: u32 = levels
            .parse()
            .map_err(|_| CliError::Validation(format!("bad level count in --dist {text:?}")))?;
        return Ok(FieldDist::DiscreteUniform(levels));
    }
    Err(CliError::Validation(format!(
        "unknown distribution {text:?}; expected \"normal\" or \"uniform:<levels>\""
    )))
}

fn cmd_verify(args: VerifyArgs) -> Result<(), CliError> {
    let report = match args.prop {
        1 => {
            let kernel = KernelSpec::new(args.kw, args.kh, 1);
            entropy::verify_prop1(&kernel, args.trials.unwrap_or(1000), args.seed)?.to_json()
        }
        2 => {
            let pool = PoolSpec::new(args.pool, args.pool_h.unwrap_or(args.pool), PoolKind::Max);
            let stride = StrideSpec::new(args.stride, args.stride_h.unwrap_or(args.stride), 0);
            let dist = parse_dist(&args.dist)?;
            entropy::verify_prop2_dist(
                args.w,
                args.h,
                &pool,
                &stride,
                args.trials.unwrap_or(10_000),
                args.seed,
                dist,
            )?
            .to_json()
        }
        3 => {
            let sizes: Result<Vec<usize>, _> = args
                .sizes
                .split(',')
                .map(|s| s.trim().parse::<usize>())
                .collect();
            let sizes =
                sizes.map_err(|_| CliError::Validation(format!("bad --sizes {:?}", args.sizes)))?;
            let model = match args.model {
                Model::Iid => CovModel::Iid {
                    sigma2: args.sigma2,
                },
                Model::Toeplitz => CovModel::Toeplitz { rho: args.rho },
            };
            entropy::verify_prop3(model, &sizes, args.seed)?.to_json()
        }
        4 => entropy::verify_prop4_random(
            args.dim,
            args.trials.unwrap_or(1000),
            args.seed,
            args.min_eig,
        )?
        .to_json(),
        other => {
            return Err(CliError::Validation(format!(
                "--prop must be 1, 2, 3, or 4 (got {other})"
            )))
        }
    };
    write_output(
        &args.out,
        &serde_json::to_string_pretty(&report).expect("json"),
    )
}

fn cmd_enumerate(args: EnumerateArgs) -> Result<(), CliError> {
    let encodings = search::enumerate_tss_encodings();
    match &args.out {
        Some(path) => {
            let mut text = encodings.join("\n");
            text.push('\n');
            std::fs::write(path, text)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        }
        None => {
            // Locked writer: 15,625 lines go out in one buffered stream.
            // A closed pipe downstream is not an error.
            let stdout = std::io::stdout();
            let mut lock = std::io::BufWriter::new(stdout.lock());
            for e in &encodings {
                match writeln!(lock, "{e}") {
                    Ok(()) => {}
                    Err(err) if err.kind() == std::io::ErrorKind::BrokenPipe => return Ok(()),
                    Err(err) => return Err(CliError::Io(format!("stdout: {err}"))),
                }
            }
        }
    }
    Ok(())
}
