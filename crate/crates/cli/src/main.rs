use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pope_core::bench::{
    emit_reports, gen_workload, ingest_csv, parse_json_lines, run_experiment, ExperimentConfig,
    IngestOptions, Placement, Report, ReportFormat, Scheme, TransportKind, WorkloadSpec,
    DEFAULT_MEAN_RANGE,
};
use pope_core::{Error, Op};

const EXIT_CONFIG: u8 = 2;
const EXIT_SESSION: u8 = 3;

#[derive(Parser)]
#[command(
    name = "pope",
    version,
    about = "Encrypted range search benchmark driver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic workload as JSON lines.
    Gen {
        #[command(flatten)]
        workload: WorkloadArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Convert a CSV file into insert operations.
    Ingest {
        input: PathBuf,
        /// Column holding the numeric label, by header name or 0-based index.
        #[arg(long, default_value = "total_salary")]
        label_column: String,
        #[arg(long)]
        payload_column: Option<String>,
        /// Labels are round(value * scale).
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// Largest tolerated fraction of malformed rows.
        #[arg(long, default_value_t = 0.05)]
        max_malformed: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run one or both schemes and emit reports.
    Run(RunArgs),
    /// Re-emit a JSON-lines report file in another format.
    Report {
        input: PathBuf,
        #[arg(long, default_value = "pretty")]
        format: String,
    },
}

#[derive(Args)]
struct WorkloadArgs {
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    /// Number of searches; defaults to floor(sqrt(n)).
    #[arg(long)]
    m: Option<usize>,
    /// Client capacity L; defaults to max(floor(n^(1/4)), 2).
    #[arg(long = "cap")]
    cap: Option<usize>,
    #[arg(long, default_value = "uniform-interleaved")]
    placement: String,
    #[arg(long, default_value_t = DEFAULT_MEAN_RANGE)]
    mean_range: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    label_space: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Pope,
    Mope,
    Both,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    workload: WorkloadArgs,
    /// Run a JSON-lines op file instead of generating a workload.
    #[arg(long)]
    ops: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "pope")]
    scheme: SchemeArg,
    #[arg(long, default_value = "inproc")]
    transport: String,
    #[arg(long, env = "POPE_LATENCY_MS", default_value_t = 0)]
    latency_ms: u64,
    #[arg(long, env = "POPE_CHUNK_SIZE", default_value_t = pope_core::server::DEFAULT_CHUNK_SIZE)]
    chunk_size: usize,
    /// Comma-separated op counts at which leakage is measured.
    #[arg(long, value_delimiter = ',')]
    checkpoints: Vec<usize>,
    #[arg(long, default_value = "json-lines")]
    format: String,
    /// Skip the plaintext cross-check.
    #[arg(long)]
    no_verify: bool,
    /// Skip leakage measurement.
    #[arg(long)]
    no_leakage: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

impl WorkloadArgs {
    fn spec(&self) -> pope_core::Result<WorkloadSpec> {
        let mut spec = WorkloadSpec::new(self.n)
            .with_seed(self.seed)
            .with_placement(self.placement.parse::<Placement>()?);
        if let Some(m) = self.m {
            spec.m = m;
        }
        if let Some(cap) = self.cap {
            spec.capacity = cap;
        }
        if let Some(space) = self.label_space {
            spec.label_space = space;
        }
        spec.mean_range = self.mean_range;
        spec.validate()?;
        Ok(spec)
    }
}

fn writer(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_ops(ops: &[Op], path: Option<&Path>) -> anyhow::Result<()> {
    let mut w = writer(path)?;
    for op in ops {
        serde_json::to_writer(&mut w, op)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn read_ops(path: &Path) -> anyhow::Result<Vec<Op>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| Error::config(format!("{}:{}: {e}", path.display(), i + 1)).into())
        })
        .collect()
}

fn run(args: RunArgs) -> anyhow::Result<u8> {
    let format: ReportFormat = args.format.parse()?;
    let spec = args.workload.spec()?;
    let ops = match &args.ops {
        Some(p) => read_ops(p)?,
        None => gen_workload(&spec)?,
    };
    let schemes: &[Scheme] = match args.scheme {
        SchemeArg::Pope => &[Scheme::Pope],
        SchemeArg::Mope => &[Scheme::Mope],
        SchemeArg::Both => &[Scheme::Pope, Scheme::Mope],
    };
    let mut reports: Vec<Report> = Vec::new();
    for &scheme in schemes {
        let mut cfg = ExperimentConfig::new(scheme, spec.capacity).with_seed(spec.seed);
        cfg.transport = args.transport.parse::<TransportKind>()?;
        cfg.latency = Duration::from_millis(args.latency_ms);
        cfg.chunk_size = args.chunk_size;
        cfg.checkpoints = args.checkpoints.clone();
        cfg.verify = !args.no_verify;
        cfg.leakage = !args.no_leakage;
        reports.push(run_experiment(&ops, &cfg)?);
    }
    let mut w = writer(args.output.as_deref())?;
    w.write_all(&emit_reports(&reports, format))?;
    w.flush()?;
    let mut code = 0;
    for r in &reports {
        if !r.complete {
            eprintln!(
                "pope: {} session failed after {} ops: {}",
                r.scheme,
                r.ops_completed,
                r.error.as_deref().unwrap_or("unknown")
            );
            code = EXIT_SESSION;
        } else if r.mismatches.is_some_and(|m| m > 0) {
            eprintln!(
                "pope: {} returned {} wrong search results",
                r.scheme,
                r.mismatches.unwrap()
            );
            code = EXIT_SESSION;
        }
    }
    Ok(code)
}

fn dispatch(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Gen { workload, output } => {
            let ops = gen_workload(&workload.spec()?)?;
            write_ops(&ops, output.as_deref())?;
        }
        Command::Ingest {
            input,
            label_column,
            payload_column,
            scale,
            max_malformed,
            output,
        } => {
            let mut opts = IngestOptions::new(label_column);
            opts.payload_column = payload_column;
            opts.scale = scale;
            opts.max_malformed = max_malformed;
            let ingested = ingest_csv(&input, &opts)?;
            eprintln!(
                "pope: ingested {} of {} rows, skipped {}",
                ingested.ops.len(),
                ingested.rows,
                ingested.skipped
            );
            write_ops(&ingested.ops, output.as_deref())?;
        }
        Command::Run(args) => return run(args),
        Command::Report { input, format } => {
            let format: ReportFormat = format.parse()?;
            let mut bytes = Vec::new();
            File::open(&input)?.read_to_end(&mut bytes)?;
            let reports = parse_json_lines(&bytes).map_err(|e| Error::config(e.to_string()))?;
            let mut w = writer(None)?;
            w.write_all(&emit_reports(&reports, format))?;
            w.flush()?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("pope: {e}");
            let code = match e.downcast_ref::<Error>() {
                Some(Error::Config(_) | Error::Ingest(_) | Error::Argument(_)) => EXIT_CONFIG,
                Some(_) => EXIT_SESSION,
                None => 1,
            };
            ExitCode::from(code)
        }
    }
}
