//! `groupoid`: command-line front end for the markov-groupoid library.
//!
//! CSV goes to stdout (or `--out`), the text report and the config echo to
//! stderr (or `--report`). Exit codes: 0 success, 1 domain error, 2 usage,
//! I/O or schema error.

mod commands;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use markov_groupoid::ProfileMode;

pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Parser)]
#[command(name = "groupoid", version, about = "Equivariant Markov operators on finite groupoids")]
pub struct Cli {
    /// Scalar arithmetic: exact rationals or f64.
    #[arg(long, value_enum, default_value_t = Arith::Exact, global = true)]
    pub arith: Arith,

    /// Absolute tolerance for float-mode comparisons (ignored in exact mode).
    #[arg(long, default_value_t = 1e-9, global = true)]
    pub tol: f64,

    /// Seed for every random choice.
    #[arg(long, default_value_t = DEFAULT_SEED, global = true)]
    pub seed: u64,

    /// Write the CSV here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Write the text report here instead of stderr.
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Arith {
    Exact,
    Float,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Verify the groupoid axioms.
    Check {
        #[arg(long)]
        groupoid: PathBuf,
    },
    /// Per-morphism discrepancy Delta(g, P) and the mean Delta(m, P).
    Discrepancy {
        #[command(flatten)]
        input: OperatorInput,
        /// Measure file for m; defaults to the normalized lambda*kappa.
        #[arg(long)]
        measure: Option<PathBuf>,
        /// Object weights kappa, e.g. `1,2,1/3` (default all ones).
        #[arg(long)]
        kappa: Option<String>,
    },
    /// System of a product of operators, printed as JSON.
    Convolve {
        #[command(flatten)]
        input: OperatorInput,
        /// Right factor.
        #[arg(long)]
        with: Option<PathBuf>,
        /// Raise the (product) operator to this power.
        #[arg(long, default_value_t = 1)]
        power: usize,
    },
    /// Build a Liouville operator from a sequence and certify it.
    ConstructLiouville(LiouvilleArgs),
    /// 0-2 law decay profiles per fibre.
    Boundary {
        #[command(flatten)]
        input: OperatorInput,
        #[arg(long, default_value = "lazy")]
        mode: ProfileMode,
        #[arg(long, default_value_t = 64)]
        horizon: usize,
        #[arg(long, default_value_t = markov_groupoid::boundary::DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long)]
        kappa: Option<String>,
    },
    /// ‖probe·mu^{*n} − mu^{*n}‖ for n = 1..=horizon on z, zn:<n> or f2.
    GroupSweep {
        #[command(flatten)]
        group: GroupArgs,
        #[arg(long)]
        probe: String,
        #[arg(long, default_value_t = 16)]
        horizon: usize,
        /// Stop before the first power whose support exceeds this size.
        #[arg(long, default_value_t = markov_groupoid::group_walk::DEFAULT_SUPPORT_CAP)]
        cap: usize,
    },
    /// Delta(m, chi_A) for a finite set A, computed two ways.
    Folner {
        #[command(flatten)]
        group: GroupArgs,
        /// Comma-separated elements of A.
        #[arg(long)]
        set: String,
    },
    /// Random walks in the random environment of a finite action.
    Rwre {
        #[command(subcommand)]
        command: RwreCommand,
    },
}

#[derive(Debug, Args)]
pub struct OperatorInput {
    #[arg(long)]
    pub groupoid: PathBuf,
    /// System file `{"system": [{"object": x, "masses": [...]}, ...]}`.
    #[arg(long)]
    pub system: PathBuf,
}

#[derive(Debug, Args)]
pub struct GroupArgs {
    /// `z`, `zn:<n>` or `f2`.
    #[arg(long)]
    pub group: String,
    /// Measure literal `elem:weight,...`, e.g. `0:1/2,-1:1/4,1:1/4`.
    /// Defaults to the lazy walk on z, uniform on zn, the simple walk on f2.
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Provider {
    /// P_n = P^n.
    Powers,
    /// P_n = (P + ... + P^n)/n.
    Cesaro,
    /// P_n uniform on the first n + 1 morphisms of each fibre (ignores --system).
    Prefix,
}

#[derive(Debug, Args)]
pub struct LiouvilleArgs {
    /// Built-in instance: `z4` is the group groupoid of Z_4 with the prefix sequence.
    #[arg(long, conflicts_with_all = ["groupoid", "system"])]
    pub fixture: Option<String>,
    #[arg(long, required_unless_present = "fixture")]
    pub groupoid: Option<PathBuf>,
    #[arg(long)]
    pub system: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Provider::Cesaro)]
    pub provider: Provider,
    #[arg(long, default_value_t = 3)]
    pub stages: usize,
    #[arg(long, default_value = "1/2")]
    pub epsilon_base: String,
    #[arg(long, default_value = "1/2")]
    pub t_base: String,
    #[arg(long, default_value_t = 100_000)]
    pub product_cap: usize,
    #[arg(long, default_value_t = 256)]
    pub horizon: usize,
    #[arg(long)]
    pub kappa: Option<String>,
    /// Also write the constructed system as JSON.
    #[arg(long)]
    pub operator_out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum RwreCommand {
    /// Sample paths in env_theta(x) and compare with the exact law.
    Simulate {
        #[command(flatten)]
        env: RwreInput,
        /// Environment point x.
        #[arg(long, default_value = "0")]
        object: String,
        /// Starting group element.
        #[arg(long, default_value_t = 0)]
        start: usize,
        #[arg(long, default_value_t = 10)]
        steps: usize,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        /// Write the first path (PathSample) here.
        #[arg(long)]
        paths_log: Option<PathBuf>,
    },
    /// Fibrewise 0-2 report of the action-groupoid operator.
    Report {
        #[command(flatten)]
        env: RwreInput,
        #[arg(long, default_value = "lazy")]
        mode: ProfileMode,
        #[arg(long, default_value_t = 64)]
        horizon: usize,
        #[arg(long, default_value_t = markov_groupoid::boundary::DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long)]
        kappa: Option<String>,
    },
}

#[derive(Debug, Args)]
pub struct RwreInput {
    /// Groupoid file of kind `action`.
    #[arg(long)]
    pub action: PathBuf,
    /// `{"theta": [{"object": x, "masses": [[element, num, den], ...]}, ...]}`.
    #[arg(long)]
    pub theta: PathBuf,
}

/// Usage, I/O and schema problems exit with 2; failures of the mathematics
/// on well-formed input exit with 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Domain(m) => f.write_str(m),
        }
    }
}

/// What a command produced.
#[derive(Debug, Default)]
pub struct Output {
    pub csv: String,
    pub report: String,
    /// Domain failure reported after the outputs are written.
    pub failure: Option<String>,
}

fn config_echo(cli: &Cli, threads: usize) -> String {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut s = String::new();
    let _ = writeln!(s, "# groupoid {}", args.join(" "));
    let _ = writeln!(
        s,
        "# arith={} tol={} seed={} threads={}",
        if cli.arith == Arith::Exact { "exact" } else { "float" },
        if cli.arith == Arith::Exact { 0.0 } else { cli.tol },
        cli.seed,
        threads
    );
    s
}

fn init_threads() -> Result<usize, CliError> {
    let requested = match std::env::var("GROUPOID_THREADS") {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| CliError::Usage(format!("GROUPOID_THREADS must be a positive integer, got {v:?}")))?,
        ),
        Err(_) => None,
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = requested {
        builder = builder.num_threads(n);
    }
    builder.build_global().map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    Ok(rayon::current_num_threads())
}

fn write_or_print(path: Option<&PathBuf>, text: &str, to_stdout: bool) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", p.display()))),
        None if to_stdout => {
            print!("{text}");
            Ok(())
        }
        None => {
            eprint!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if cli.arith == Arith::Float && !(cli.tol >= 0.0 && cli.tol.is_finite()) {
        eprintln!("error: --tol must be finite and non-negative");
        return ExitCode::from(2);
    }
    let threads = match init_threads() {
        Ok(n) => n,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.code());
        }
    };
    let result = commands::run(&cli).and_then(|mut out| {
        out.report = config_echo(&cli, threads) + &out.report;
        write_or_print(cli.out.as_ref(), &out.csv, true)?;
        write_or_print(cli.report.as_ref(), &out.report, false)?;
        out.failure.map_or(Ok(()), |m| Err(CliError::Domain(m)))
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
