//! Command-line driver: sampling, density evaluation and verification suites.
//!
//! Exit codes: 0 success, 1 suite failure, 2 usage error, 3 I/O or input error.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use haar_radial::density::{DensityConstant, MainDensity, Mutation, VandermondeIndex};
use haar_radial::matrix::{haar_unitary, BlockUnitary, ComplexMatrix};
use haar_radial::spectral::{extract_direct_with, SpectralData};
use haar_radial::tol::Tolerances;
use haar_radial::verify::export::{csv_header, csv_row};
use haar_radial::verify::report::Rejections;
use haar_radial::verify::{
    chunk_rng, chunks, forward_pushforward_test, normalization_check, roundtrip_suite, staged_pushforward_check,
    ForwardConfig, NormalizationConfig, Proposal, RoundtripConfig, Target, DEFAULT_CHUNK_SIZE,
};
use haar_radial::Error;
use rayon::prelude::*;
use serde_json::{json, Value};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(name = "haar-radial", version, about = "Radial part of Haar measure: sampling, densities and checks")]
struct Cli {
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true, env = "HAAR_RADIAL_THREADS", value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
    /// Output file (default: stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Unitarity and Hermiticity certificate tolerance.
    #[arg(long, global = true, default_value_t = haar_radial::tol::UNITARITY)]
    tol_unitarity: f64,
    /// General-position margin.
    #[arg(long, global = true, default_value_t = haar_radial::tol::DEGENERATE)]
    tol_degenerate: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    /// JSON (JSON lines for record streams).
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mutate {
    /// Omit the |det(1 + U)|^{2m} factor.
    #[value(name = "drop-detU")]
    DropDetU,
    /// Vandermonde product over k < l ≤ min(n, m).
    NVandermonde,
    /// The printed constant instead of the chart-normalized one.
    PrintedConstant,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ProposalArg {
    Cayley,
    Chart,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write Haar-random unitaries, or their spectral data with --extract.
    Sample(SampleArgs),
    /// Evaluate the log density of each spectral-data record in a JSON lines file.
    Density(DensityArgs),
    /// Run a verification suite and write its report.
    #[command(subcommand)]
    Verify(Suite),
}

#[derive(Args, Debug)]
struct SampleArgs {
    /// Size of the unitaries (without --extract).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..), conflicts_with_all = ["n", "m", "extract"])]
    k: Option<u64>,
    /// Upper block size.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..), requires = "m")]
    n: Option<u64>,
    /// Lower block size.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..), requires = "n")]
    m: Option<u64>,
    /// Write spectral data instead of matrices.
    #[arg(long, requires = "n")]
    extract: bool,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct DensityArgs {
    /// JSON lines file of spectral-data records; lines with a "kind" field are skipped.
    input: PathBuf,
    #[arg(long, value_enum)]
    mutate: Vec<Mutate>,
}

#[derive(Args, Debug)]
struct SizeArgs {
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    m: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand, Debug)]
enum Suite {
    /// Importance-sampling estimate of the total mass of the main density.
    Normalization {
        #[command(flatten)]
        size: SizeArgs,
        #[arg(long, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(2..))]
        samples: u64,
        /// Proposal scale (default: chosen by a pilot run).
        #[arg(long)]
        scale: Option<f64>,
        #[arg(long, value_enum, default_value_t = ProposalArg::Cayley)]
        proposal: ProposalArg,
        #[arg(long, value_enum)]
        mutate: Vec<Mutate>,
    },
    /// Haar-extraction vs MCMC two-sample test.
    Forward {
        #[command(flatten)]
        size: SizeArgs,
        #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(2..))]
        samples: u64,
        /// Total MCMC sweeps across all chains.
        #[arg(long, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(100..))]
        chain_length: u64,
        #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
        chains: u64,
        #[arg(long, value_enum)]
        mutate: Vec<Mutate>,
    },
    /// Cayley pushforward of Haar on U(k) against Hua's density.
    Staged {
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..=2))]
        k: u64,
        #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(2..))]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Extract, reconstruct and re-extract.
    Roundtrip {
        #[command(flatten)]
        size: SizeArgs,
        #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
        samples: u64,
    },
}

enum Failure {
    Suite,
    Usage(String),
    Io(String),
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn density_variant(mutations: &[Mutate]) -> MainDensity {
    let mut d = MainDensity::default();
    for m in mutations {
        match m {
            Mutate::DropDetU => d.mutation = Some(Mutation::DropDetU),
            Mutate::NVandermonde => d.vandermonde = VandermondeIndex::Literal,
            Mutate::PrintedConstant => d.constant = DensityConstant::Printed,
        }
    }
    d
}

fn tolerances(cli: &Cli) -> Tolerances {
    Tolerances { unitarity: cli.tol_unitarity, degenerate: cli.tol_degenerate, ..Tolerances::default() }
}

fn header(command: &str, config: Value, seed: Option<u64>) -> Value {
    json!({ "kind": "header", "version": VERSION, "command": command, "config": config, "seed": seed })
}

fn open_output(cli: &Cli) -> io::Result<Box<dyn Write>> {
    Ok(match &cli.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json_line(w: &mut dyn Write, v: &Value) -> io::Result<()> {
    serde_json::to_writer(&mut *w, v)?;
    writeln!(w)
}

fn row_major_csv(g: &ComplexMatrix) -> String {
    g.to_row_major().iter().map(|z| format!("{:e},{:e}", z.re, z.im)).collect::<Vec<_>>().join(",")
}

enum Record {
    Matrix(ComplexMatrix),
    Spectral(Box<SpectralData>),
}

fn cmd_sample(cli: &Cli, args: &SampleArgs) -> Outcome {
    let tols = tolerances(cli);
    let (n, m) = (args.n.map(|x| x as usize), args.m.map(|x| x as usize));
    let k = match (args.k, n, m) {
        (Some(k), _, _) => k as usize,
        (None, Some(n), Some(m)) => n + m,
        _ => return Err(Failure::Usage("sample needs --k, or --n and --m".into())),
    };
    let samples = args.samples as usize;
    let parts: Vec<(Vec<Record>, Rejections)> = chunks(samples, DEFAULT_CHUNK_SIZE)
        .into_par_iter()
        .enumerate()
        .map(|(i, (_, len))| {
            let mut rng = chunk_rng(args.seed, i as u64);
            let mut out = Vec::with_capacity(len);
            let mut rej = Rejections::default();
            for _ in 0..len {
                if args.extract {
                    let g = BlockUnitary::haar(n.unwrap(), m.unwrap(), &mut rng);
                    match extract_direct_with(&g, &tols) {
                        Ok(sd) => out.push(Record::Spectral(Box::new(sd))),
                        Err(e) => rej.record(&e),
                    }
                } else {
                    out.push(Record::Matrix(haar_unitary(k, &mut rng)));
                }
            }
            (out, rej)
        })
        .collect();
    let mut rejections = Rejections::default();
    for (_, r) in &parts {
        rejections.merge(r);
    }
    let written: usize = parts.iter().map(|(v, _)| v.len()).sum();
    let config = json!({
        "k": args.k, "n": n, "m": m, "extract": args.extract, "samples": samples,
        "format": format!("{:?}", cli.format).to_lowercase(), "tolerances": tols, "chunk_size": DEFAULT_CHUNK_SIZE,
    });
    let head = header("sample", config, Some(args.seed));
    let summary = json!({ "kind": "summary", "samples": samples, "written": written, "rejections": rejections });
    let mut w = open_output(cli)?;
    match cli.format {
        Format::Json => {
            write_json_line(&mut *w, &head)?;
            for (records, _) in &parts {
                for r in records {
                    let v = match r {
                        Record::Matrix(g) => serde_json::to_value(g),
                        Record::Spectral(sd) => serde_json::to_value(sd),
                    }
                    .map_err(|e| Failure::Io(e.to_string()))?;
                    write_json_line(&mut *w, &v)?;
                }
            }
            write_json_line(&mut *w, &summary)?;
        }
        Format::Csv => {
            writeln!(w, "# {head}")?;
            if args.extract {
                writeln!(w, "{}", csv_header(n.unwrap(), m.unwrap()))?;
            } else {
                let cols: Vec<String> =
                    (1..=k).flat_map(|i| (1..=k).flat_map(move |j| [format!("g{i}_{j}_re"), format!("g{i}_{j}_im")])).collect();
                writeln!(w, "{}", cols.join(","))?;
            }
            for (records, _) in &parts {
                for r in records {
                    match r {
                        Record::Matrix(g) => writeln!(w, "{}", row_major_csv(g))?,
                        Record::Spectral(sd) => writeln!(w, "{}", csv_row(sd))?,
                    }
                }
            }
            writeln!(w, "# {summary}")?;
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_density(cli: &Cli, args: &DensityArgs) -> Outcome {
    let density = density_variant(&args.mutate);
    let file = File::open(&args.input).map_err(|e| Failure::Io(format!("{}: {e}", args.input.display())))?;
    let mut results = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value =
            serde_json::from_str(&line).map_err(|e| Failure::Io(format!("line {lineno}: {e}")))?;
        if value.get("kind").is_some() {
            continue;
        }
        let sd: SpectralData =
            serde_json::from_value(value).map_err(|e| Failure::Io(format!("line {lineno}: {e}")))?;
        results.push(match density.log_density(&sd) {
            Ok(d) => json!({ "line": lineno, "log_density": d.log_value, "reference": d.reference }),
            Err(e @ Error::Domain(_)) => json!({ "line": lineno, "error": "DomainError", "message": e.to_string() }),
            Err(e) => return Err(Failure::Io(format!("line {lineno}: {e}"))),
        });
    }
    let config = json!({ "input": args.input, "density": density });
    let mut w = open_output(cli)?;
    if results.is_empty() {
        w.flush()?;
        return Ok(());
    }
    let head = header("density", config, None);
    match cli.format {
        Format::Json => {
            write_json_line(&mut *w, &head)?;
            for r in &results {
                write_json_line(&mut *w, r)?;
            }
        }
        Format::Csv => {
            writeln!(w, "# {head}")?;
            writeln!(w, "line,log_density,status")?;
            for r in &results {
                match r.get("log_density") {
                    Some(v) => writeln!(w, "{},{:e},ok", r["line"], v.as_f64().unwrap_or(f64::NAN))?,
                    None => writeln!(w, "{},,DomainError", r["line"])?,
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn emit_report(cli: &Cli, suite: &str, config: Value, seed: u64, report: Value, passed: bool) -> Outcome {
    if cli.format != Format::Json {
        return Err(Failure::Usage("verify reports are written as JSON only".into()));
    }
    let artifact = json!({
        "version": VERSION, "command": format!("verify {suite}"), "config": config, "seed": seed, "report": report,
    });
    let mut w = open_output(cli)?;
    serde_json::to_writer_pretty(&mut w, &artifact).map_err(|e| Failure::Io(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    if passed {
        Ok(())
    } else {
        Err(Failure::Suite)
    }
}

fn to_value<T: serde::Serialize>(x: &T) -> Result<Value, Failure> {
    serde_json::to_value(x).map_err(|e| Failure::Io(e.to_string()))
}

fn cmd_verify(cli: &Cli, suite: &Suite) -> Outcome {
    let tols = tolerances(cli);
    match suite {
        Suite::Normalization { size, samples, scale, proposal, mutate } => {
            let mut cfg = NormalizationConfig::new(size.n as usize, size.m as usize, *samples as usize, size.seed);
            cfg.scale = *scale;
            cfg.proposal = match proposal {
                ProposalArg::Cayley => Proposal::Cayley,
                ProposalArg::Chart => Proposal::Chart,
            };
            cfg.target = Target::Main(density_variant(mutate));
            cfg.tolerances = tols;
            let r = normalization_check(&cfg)?;
            emit_report(cli, "normalization", to_value(&cfg)?, cfg.seed, to_value(&r)?, r.passed)
        }
        Suite::Forward { size, samples, chain_length, chains, mutate } => {
            let mut cfg = ForwardConfig::new(
                size.n as usize,
                size.m as usize,
                *samples as usize,
                *chain_length as usize,
                size.seed,
            );
            cfg.chains = *chains as usize;
            cfg.density = density_variant(mutate);
            cfg.tolerances = tols;
            let r = forward_pushforward_test(&cfg)?;
            emit_report(cli, "forward", to_value(&cfg)?, cfg.seed, to_value(&r)?, r.passed)
        }
        Suite::Staged { k, samples, seed } => {
            let r = staged_pushforward_check(*k as usize, *samples as usize, *seed)?;
            let config = json!({ "k": k, "samples": samples, "chunk_size": DEFAULT_CHUNK_SIZE });
            emit_report(cli, "staged", config, *seed, to_value(&r)?, r.passed)
        }
        Suite::Roundtrip { size, samples } => {
            let mut cfg = RoundtripConfig::new(size.n as usize, size.m as usize, *samples as usize, size.seed);
            cfg.tolerances = tols;
            let r = roundtrip_suite(&cfg)?;
            emit_report(cli, "roundtrip", to_value(&cfg)?, cfg.seed, to_value(&r)?, r.passed)
        }
    }
}

fn run(cli: &Cli) -> Outcome {
    if !(cli.tol_unitarity > 0.0) || !(cli.tol_degenerate > 0.0) {
        return Err(Failure::Usage("tolerances must be positive".into()));
    }
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t as usize)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    match &cli.command {
        Command::Sample(a) => cmd_sample(cli, a),
        Command::Density(a) => cmd_density(cli, a),
        Command::Verify(s) => cmd_verify(cli, s),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Suite) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
