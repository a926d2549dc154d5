// SPDX-License-Identifier: MIT OR Apache-2.0

//! `mvtv`: generate signals, denoise them in batch or streaming mode, run
//! the exact solver and the benchmark grid.
//!
//! Exit codes: 0 success, 1 invalid flags or config, 2 invalid input data,
//! 3 I/O or solver failure.

mod qspec;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mvtv::bench::{run_bench, BenchConfig};
use mvtv::eval::{add_noise, generate_piecewise};
use mvtv::{
    run_stream, solve_exact, ExactOptions, SegmentInit, SigmaMode, Signal, StreamConfig,
    StreamSolver,
};

use qspec::QSpec;

#[derive(Debug)]
enum CliError {
    Usage(String),
    Input(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Input(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<mvtv::TvError> for CliError {
    fn from(e: mvtv::TvError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "mvtv",
    version,
    about = "On-the-fly multivariate total-variation denoising"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Batch,
    Stream,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SigmaArg {
    Offline,
    Running,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random piecewise-constant signal plus noise as CSV.
    Generate {
        #[arg(long, short = 'm', default_value_t = 2)]
        components: usize,
        #[arg(long, short = 'n')]
        samples: usize,
        /// Signal-to-noise ratio in dB; `inf` for no noise.
        #[arg(long, default_value_t = 4.0)]
        snr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also write the clean signal here.
        #[arg(long)]
        clean: Option<PathBuf>,
    },
    /// Approximate TV denoising with the streaming solver.
    Denoise {
        #[arg(long, allow_hyphen_values = true)]
        lambda: f64,
        /// single | dyadic:R=<r> | random:n=<n>[,seed=<s>] | gaussian:n=<n>[,mean=,std=,seed=] | file:<path>
        #[arg(long, default_value = "single")]
        q: QSpec,
        #[arg(long, value_enum, default_value_t = Mode::Batch)]
        mode: Mode,
        /// Emit a provisional estimate after every sample (stream mode).
        #[arg(long)]
        provisional: bool,
        /// Seed for random candidate sets that do not carry their own.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Component scales for candidate selection. `offline` needs the whole
        /// signal and is only available in batch mode.
        #[arg(long, value_enum)]
        sigma: Option<SigmaArg>,
        /// Carry the dual across change points instead of restarting it.
        #[arg(long)]
        chained_init: bool,
        /// CSV input (one sample per line); standard input when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
        /// JSON Lines segment output; standard output when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Reconstructed signal as CSV (batch mode).
        #[arg(long)]
        reconstruction: Option<PathBuf>,
    },
    /// Exact (iterative) solution as CSV.
    Exact {
        #[arg(long, allow_hyphen_values = true)]
        lambda: f64,
        #[arg(long, default_value_t = 1e-10)]
        rel_tol: f64,
        #[arg(long, default_value_t = 200_000)]
        max_iter: usize,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run a benchmark grid described by a JSON config.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Generate {
            components,
            samples,
            snr,
            seed,
            output,
            clean,
        } => {
            if components == 0 || samples == 0 {
                return Err(CliError::Usage(
                    "--components and --samples must be at least 1".into(),
                ));
            }
            let pc = generate_piecewise(components, samples, seed)?;
            let y = add_noise(&pc.x, snr, seed.wrapping_add(1))
                .map_err(|e| CliError::Usage(e.to_string()))?;
            if let Some(path) = clean {
                write_csv(&pc.x, &mut BufWriter::new(File::create(path)?))?;
            }
            let mut out = open_output(output.as_deref())?;
            write_csv(&y, &mut out)?;
            out.flush()?;
            Ok(())
        }
        Command::Denoise {
            lambda,
            q,
            mode,
            provisional,
            seed,
            sigma,
            chained_init,
            input,
            output,
            reconstruction,
        } => {
            check_lambda(lambda)?;
            let sigma = sigma.unwrap_or(SigmaArg::Running);
            let init = if chained_init {
                SegmentInit::Chained
            } else {
                SegmentInit::Auto
            };
            let opts = DenoiseOpts {
                lambda,
                q,
                seed,
                sigma,
                init,
                provisional,
            };
            match mode {
                Mode::Batch => {
                    if provisional {
                        return Err(CliError::Usage("--provisional needs --mode stream".into()));
                    }
                    denoise_batch(
                        &opts,
                        input.as_deref(),
                        output.as_deref(),
                        reconstruction.as_deref(),
                    )
                }
                Mode::Stream => {
                    if sigma == SigmaArg::Offline {
                        return Err(CliError::Usage(
                            "--sigma offline needs the whole signal; use --mode batch".into(),
                        ));
                    }
                    if reconstruction.is_some() {
                        return Err(CliError::Usage(
                            "--reconstruction needs --mode batch".into(),
                        ));
                    }
                    denoise_stream(&opts, input.as_deref(), output.as_deref())
                }
            }
        }
        Command::Exact {
            lambda,
            rel_tol,
            max_iter,
            input,
            output,
        } => {
            check_lambda(lambda)?;
            if !(rel_tol > 0.0) || max_iter == 0 {
                return Err(CliError::Usage(
                    "--rel-tol must be positive and --max-iter at least 1".into(),
                ));
            }
            let y = read_signal(input.as_deref())?;
            let sol = solve_exact(
                &y,
                lambda,
                ExactOptions {
                    rel_tol,
                    max_iter,
                    ..ExactOptions::default()
                },
            )?;
            let mut out = open_output(output.as_deref())?;
            write_csv(&sol.x, &mut out)?;
            out.flush()?;
            Ok(())
        }
        Command::Bench { config, output } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| CliError::Usage(format!("{}: {e}", config.display())))?;
            let de = &mut serde_json::Deserializer::from_str(&text);
            let cfg: BenchConfig = serde_path_to_error::deserialize(de).map_err(|e| {
                CliError::Usage(format!("invalid config at '{}': {}", e.path(), e.inner()))
            })?;
            cfg.validate()
                .map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
            let report = run_bench(&cfg)?;
            let mut out = open_output(output.as_deref())?;
            serde_json::to_writer_pretty(&mut out, &report)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            writeln!(out)?;
            out.flush()?;
            Ok(())
        }
    }
}

struct DenoiseOpts {
    lambda: f64,
    q: QSpec,
    seed: u64,
    sigma: SigmaArg,
    init: SegmentInit,
    provisional: bool,
}

fn check_lambda(lambda: f64) -> CliResult<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "--lambda must be positive, got {lambda}"
        )))
    }
}

fn denoise_batch(
    opts: &DenoiseOpts,
    input: Option<&Path>,
    output: Option<&Path>,
    recon: Option<&Path>,
) -> CliResult<()> {
    let y = read_signal(input)?;
    let q = opts
        .q
        .build(opts.lambda, y.components(), opts.seed)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let sigma = match opts.sigma {
        SigmaArg::Offline => SigmaMode::Offline(y.component_std()),
        SigmaArg::Running => SigmaMode::Running,
    };
    let result = run_stream(
        &y,
        &q,
        StreamConfig {
            sigma,
            init: opts.init,
        },
    )?;
    let mut out = open_output(output)?;
    for s in &result.segments {
        write_json_line(&mut out, s)?;
    }
    out.flush()?;
    if let Some(path) = recon {
        let mut w = BufWriter::new(File::create(path)?);
        write_csv(&result.reconstruct()?, &mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn denoise_stream(
    opts: &DenoiseOpts,
    input: Option<&Path>,
    output: Option<&Path>,
) -> CliResult<()> {
    let mut out = open_output(output)?;
    let mut solver: Option<StreamSolver> = None;
    for record in csv_reader(input)?.into_records() {
        let sample = parse_record(record)?;
        if solver.is_none() {
            let q = opts
                .q
                .build(opts.lambda, sample.len(), opts.seed)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            solver = Some(StreamSolver::new(
                q,
                StreamConfig {
                    sigma: SigmaMode::Running,
                    init: opts.init,
                },
            )?);
        }
        let s = solver.as_mut().expect("initialised above");
        for seg in s.push(&sample)? {
            write_json_line(&mut out, &seg)?;
        }
        if opts.provisional {
            if let Some(p) = s.provisional() {
                write_json_line(
                    &mut out,
                    &serde_json::json!({ "k": p.k, "provisional": p.level }),
                )?;
            }
        }
        out.flush()?;
    }
    let mut solver = solver.ok_or_else(|| CliError::Input("no samples".into()))?;
    for seg in solver.finish()? {
        write_json_line(&mut out, &seg)?;
    }
    out.flush()?;
    Ok(())
}

fn open_output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json_line<T: serde::Serialize>(out: &mut dyn Write, value: &T) -> CliResult<()> {
    let line = serde_json::to_string(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    writeln!(out, "{line}")?;
    Ok(())
}

fn open_input(input: Option<&Path>) -> CliResult<Box<dyn io::Read>> {
    Ok(match input {
        Some(p) => {
            Box::new(File::open(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?)
        }
        None => Box::new(io::stdin().lock()),
    })
}

/// CSV reader for headerless numeric rows; every row must have as many
/// columns as the first one.
fn csv_reader(input: Option<&Path>) -> CliResult<csv::Reader<Box<dyn io::Read>>> {
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(open_input(input)?))
}

fn parse_record(record: csv::Result<csv::StringRecord>) -> CliResult<Vec<f64>> {
    let record = record.map_err(|e| match e.kind() {
        csv::ErrorKind::UnequalLengths {
            pos: Some(pos),
            expected_len,
            len,
        } => CliError::Input(format!(
            "line {}: expected {expected_len} columns, found {len}",
            pos.line()
        )),
        csv::ErrorKind::Io(_) => CliError::Runtime(e.to_string()),
        _ => CliError::Input(e.to_string()),
    })?;
    let line = record.position().map_or(0, |p| p.line());
    record
        .iter()
        .map(|f| match f.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(CliError::Input(format!(
                "line {line}: invalid number '{f}'"
            ))),
        })
        .collect()
}

fn read_signal(input: Option<&Path>) -> CliResult<Signal> {
    let rows = csv_reader(input)?
        .into_records()
        .map(parse_record)
        .collect::<CliResult<Vec<_>>>()?;
    if rows.is_empty() {
        return Err(CliError::Input("no samples".into()));
    }
    Ok(Signal::from_samples(&rows)?)
}

fn write_csv(x: &Signal, out: &mut dyn Write) -> CliResult<()> {
    for sample in x.samples() {
        let row: Vec<String> = sample.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
