//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when a run fails at runtime, 2 for usage and
//! configuration errors.

pub mod config;
pub mod csv;
pub mod selftest;

use std::collections::BTreeSet;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bd::block_diagonalize;
use crate::channel::{complex_to_real, generate_channel, SystemDims};
use crate::linalg::RMatrix;
use crate::perturbation::{CandidateSet, Encoder, EncoderKind, Problem};
use crate::precoder::{search_factor, Criterion};
use crate::simulator::{run_point, SimConfig};
use crate::Error;

use self::config::{parse_config, RunConfig};
use self::csv::{render, row_checksum, CsvRow, RunManifest};

pub const EXIT_OK: u8 = 0;
pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "bdvp",
    version,
    about = "Block-diagonalized vector perturbation precoding simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a BER sweep described by a config file and write CSV.
    Simulate(RunArgs),
    /// Repeat a config for several candidate bounds `a` (T = 2a + 1).
    SweepT {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated candidate bounds, e.g. `1,2,3,4`.
        #[arg(long, allow_hyphen_values = true)]
        a_list: String,
    },
    /// Solve one perturbation search and print `t=[..] metric=<f64> evals=<u64>`.
    Encode(EncodeArgs),
    /// Run the built-in invariant checks.
    Selftest,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads, 0 for one per core.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    /// Lower-triangular factor, rows separated by `;`, entries by `,`.
    #[arg(long, conflicts_with = "channel_seed", allow_hyphen_values = true)]
    pub l: Option<String>,
    /// Derive the factor from a random channel instead of `--l`.
    #[arg(long)]
    pub channel_seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub n_u: usize,
    #[arg(long, default_value_t = 2)]
    pub n_r: usize,
    /// User whose effective channel is used (1-based).
    #[arg(long, default_value_t = 1)]
    pub user: usize,
    #[arg(long, default_value = "zf")]
    pub criterion: Criterion,
    /// MMSE regularization.
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    /// Real symbol vector, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub s: String,
    #[arg(long, default_value_t = 4.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 1)]
    pub a: u32,
    #[arg(long, default_value = "fse")]
    pub encoder: EncoderKind,
    /// QRDM-E breadth, defaults to T.
    #[arg(long)]
    pub m: Option<usize>,
    /// FSE full-expansion depth.
    #[arg(long, default_value_t = 1)]
    pub p: usize,
}

/// A failure carrying its exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_RUNTIME,
            message: message.into(),
        }
    }
}

fn classify(e: Error) -> Failure {
    match e {
        Error::Dimension(_) | Error::Parameter(_) | Error::UserIndex { .. } | Error::SearchSpaceTooLarge { .. } => {
            Failure::usage(e.to_string())
        }
        _ => Failure::runtime(e.to_string()),
    }
}

/// Parses `args` and runs the selected command.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Simulate(run) => cmd_simulate(&run),
        Command::SweepT { run, a_list } => cmd_sweep_t(&run, &a_list),
        Command::Encode(args) => cmd_encode(&args).map(|line| println!("{line}")),
        Command::Selftest => cmd_selftest(),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

/// Parses an `a` list, dropping duplicates with a warning.
pub fn parse_a_list(text: &str) -> Result<Vec<u32>, Failure> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let a: u32 = item
            .parse()
            .map_err(|_| Failure::usage(format!("invalid a value '{item}'")))?;
        if seen.insert(a) {
            out.push(a);
        } else {
            eprintln!("warning: duplicate a={a} ignored");
        }
    }
    if out.is_empty() {
        return Err(Failure::usage("a list is empty"));
    }
    Ok(out)
}

fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R, Failure> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::runtime(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Runs every `(snr, encoder)` pair of each config, SNR-major.
fn simulate_rows(configs: &[SimConfig]) -> Result<Vec<CsvRow>, Failure> {
    let mut rows = Vec::new();
    for sim in configs {
        sim.validate().map_err(|e| Failure::usage(e.to_string()))?;
    }
    let Some(first) = configs.first() else {
        return Ok(rows);
    };
    for (k, &snr) in first.snr_db.iter().enumerate() {
        for sim in configs {
            debug_assert_eq!(sim.snr_db[k], snr);
            let record = run_point(sim, snr).map_err(|e| Failure::runtime(e.to_string()))?;
            eprintln!(
                "snr={snr} encoder={} a={} ber={} ({} errors)",
                sim.encoder, sim.a, record.ber, record.bit_errors
            );
            rows.push(CsvRow::new(sim, &record));
        }
    }
    Ok(rows)
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::runtime(format!("{}: {e}", path.display()))),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::runtime(format!("stdout: {e}"))),
    }
}

fn execute(run: &RunArgs, mut config: RunConfig, a_values: &[u32], extra_echo: Option<String>) -> Result<(), Failure> {
    if let Some(seed) = run.seed {
        config.seed = seed;
    }
    let started = timestamp();
    let rows = with_threads(run.threads, || {
        let mut rows = Vec::new();
        for &a in a_values {
            rows.extend(simulate_rows(&config.sim_configs(a))?);
        }
        Ok(rows)
    })??;
    let mut config_echo = config.echo.clone();
    config_echo.extend(extra_echo);
    let manifest = RunManifest {
        config_echo,
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        started,
        finished: timestamp(),
        checksums: rows.iter().map(|r| row_checksum(&r.to_line())).collect(),
    };
    write_output(run.out.as_deref(), &render(&manifest, &rows))
}

pub fn cmd_simulate(run: &RunArgs) -> Result<(), Failure> {
    let config = load_config(&run.config)?;
    let a = config.a;
    execute(run, config, &[a], None)
}

pub fn cmd_sweep_t(run: &RunArgs, a_list: &str) -> Result<(), Failure> {
    let a_values = parse_a_list(a_list)?;
    let config = load_config(&run.config)?;
    let echo = a_values.iter().map(u32::to_string).collect::<Vec<_>>().join(",");
    execute(run, config, &a_values, Some(format!("a_list={echo}")))
}

fn parse_floats(text: &str, what: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|v| {
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Failure::usage(format!("invalid {what} entry '{v}'")))
        })
        .collect()
}

/// Parses `r;r;...` into a square matrix.
pub fn parse_matrix(text: &str) -> Result<RMatrix, Failure> {
    let rows: Vec<Vec<f64>> = text
        .split(';')
        .map(|r| parse_floats(r, "L"))
        .collect::<Result<_, _>>()?;
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Failure::usage(format!(
            "L must be square; row lengths are {:?}",
            rows.iter().map(Vec::len).collect::<Vec<_>>()
        )));
    }
    Ok(RMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn factor_from_channel(args: &EncodeArgs, seed: u64) -> Result<RMatrix, Failure> {
    let dims = SystemDims::new(args.n_u * args.n_r, args.n_u, args.n_r).map_err(classify)?;
    let h = generate_channel(dims, seed);
    let bd = block_diagonalize(&h).map_err(classify)?;
    let h_eff = bd
        .effective_channels
        .get(args.user.wrapping_sub(1))
        .ok_or(Error::UserIndex {
            index: args.user,
            users: args.n_u,
        })
        .map_err(classify)?;
    Ok(
        search_factor(&complex_to_real(h_eff), args.criterion, args.alpha, args.tau)
            .map_err(classify)?
            .lower,
    )
}

/// Solves one search and renders `t=[t1,...,tN] metric=<f64> evals=<u64>`.
pub fn cmd_encode(args: &EncodeArgs) -> Result<String, Failure> {
    let lower = match (&args.l, args.channel_seed) {
        (Some(l), None) => parse_matrix(l)?,
        (None, Some(seed)) => factor_from_channel(args, seed)?,
        _ => return Err(Failure::usage("exactly one of --l and --channel-seed is required")),
    };
    let s = parse_floats(&args.s, "s")?;
    let candidates = CandidateSet::new(args.a);
    let encoder = match args.encoder {
        EncoderKind::Thp => Encoder::Thp,
        EncoderKind::Fse => Encoder::Fse { depth: args.p },
        EncoderKind::Qrdme => Encoder::Qrdme {
            breadth: args.m.unwrap_or(candidates.size()),
        },
        EncoderKind::Exhaustive => Encoder::Exhaustive,
    };
    let problem = Problem::new(&lower, &s, args.tau, candidates).map_err(classify)?;
    let r = encoder.encode(&problem).map_err(classify)?;
    let t = r.t.iter().map(i32::to_string).collect::<Vec<_>>().join(",");
    Ok(format!("t=[{t}] metric={} evals={}", r.metric, r.evals))
}

pub fn cmd_selftest() -> Result<(), Failure> {
    let checks = selftest::run_all();
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    for c in &checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        println!("{status}  {:width$}  {}", c.name, c.detail);
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed == 0 {
        println!("{} checks passed", checks.len());
        Ok(())
    } else {
        Err(Failure::runtime(format!("{failed} of {} checks failed", checks.len())))
    }
}
