mod commands;
mod report;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use freedens::{Budget, GcdClassSet, Norm};

use report::{Format, Report};

#[derive(Parser, Debug)]
#[command(name = "freedens", version)]
#[command(about = "Exact and Monte Carlo densities of subsets of free groups and integer lattices")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Csv, global = true)]
    format: Format,

    /// Write the report here instead of stdout
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Also write a gnuplot script for the plot data (needs --output)
    #[arg(long, global = true)]
    plot_script: Option<PathBuf>,

    /// Worker threads [default: available parallelism]
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,

    /// Memory budget for count tables, in MiB
    #[arg(long, global = true, env = "FREEDENS_MEMORY_MB", default_value_t = 4096)]
    memory_mb: u64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fraction of lattice points in a ball whose gcd class lies in a set
    LatticeDensity(LatticeArgs),
    /// Riemann zeta at integer arguments
    Zeta(ZetaArgs),
    /// Exact spherical, annular and ball density series of a pulled-back set
    GroupSeries(SeriesArgs),
    /// Test elements of F(a, b): density series, single-word verdicts, or density bounds
    TestElements(TestArgs),
    /// Local limit theorem check for the abelianization distribution
    LltCheck(LltArgs),
    /// Mean gcd of the abelianized image over spheres
    ExpectedGcd(GcdArgs),
    /// Monte Carlo density estimates
    Sample(SampleArgs),
    /// Compare the count table against brute-force enumeration
    OracleCheck(OracleArgs),
}

/// A set of gcd classes, or the rank-two test elements.
#[derive(Debug, Clone)]
pub enum Target {
    Classes(GcdClassSet),
    TestElements,
}

impl std::fmt::Display for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Target::Classes(set) => write!(f, "{set}"),
            Target::TestElements => write!(f, "test-elements"),
        }
    }
}

fn parse_target(s: &str) -> Result<Target, String> {
    match s.trim() {
        "test-elements" | "test" => Ok(Target::TestElements),
        other => other.parse().map(Target::Classes).map_err(|e: freedens::Error| e.to_string()),
    }
}

fn parse_set(s: &str) -> Result<GcdClassSet, String> {
    s.parse().map_err(|e: freedens::Error| e.to_string())
}

fn parse_norm(s: &str) -> Result<Norm, String> {
    s.parse().map_err(|e: freedens::Error| e.to_string())
}

fn rank() -> clap::builder::RangedU64ValueParser<usize> {
    clap::builder::RangedU64ValueParser::<usize>::new().range(2..=100)
}

#[derive(Args, Debug)]
pub struct LatticeArgs {
    #[arg(long, default_value_t = 2, value_parser = rank())]
    pub k: usize,
    /// Count the t-visible points
    #[arg(long, conflicts_with_all = ["set", "even_visible"])]
    pub t: Option<u64>,
    /// Gcd-class set, e.g. `visible`, `1,2`, `1..=50`, `2..,inf`
    #[arg(long, value_parser = parse_set, conflicts_with = "even_visible")]
    pub set: Option<GcdClassSet>,
    /// Visible points with even L1 norm (k = 2)
    #[arg(long)]
    pub even_visible: bool,
    /// Radii, comma separated
    #[arg(long, required = true, value_delimiter = ',')]
    pub r: Vec<f64>,
    /// `inf` or a p ≥ 1
    #[arg(long, default_value = "inf", value_parser = parse_norm)]
    pub norm: Norm,
    #[arg(long, value_enum, default_value_t = LatticeMethod::Scan)]
    pub method: LatticeMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LatticeMethod {
    Scan,
    /// Möbius inversion; L∞ balls only
    Mobius,
}

#[derive(Args, Debug)]
pub struct ZetaArgs {
    /// Arguments, comma separated
    #[arg(long, value_delimiter = ',', default_value = "2,3,4", value_parser = clap::value_parser!(u32).range(2..))]
    pub k: Vec<u32>,
    #[arg(long, default_value_t = 1e-12)]
    pub eps: f64,
}

#[derive(Args, Debug)]
pub struct SeriesArgs {
    #[arg(long, default_value_t = 2, value_parser = rank())]
    pub k: usize,
    /// Gcd-class set, or `test-elements` (k = 2)
    #[arg(long, default_value = "visible", value_parser = parse_target)]
    pub set: Target,
    #[arg(long)]
    pub n_max: usize,
    /// Print every n-th row (the last row is always printed)
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub every: u64,
}

#[derive(Args, Debug)]
#[group(id = "mode", required = true, args = ["n_max", "word", "bounds_delta"])]
pub struct TestArgs {
    /// Density series up to this length
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long, value_enum, default_value_t = TestMethod::Hybrid)]
    pub method: TestMethod,
    /// Classify words such as `aab` or `abAB` (capitals are inverses); repeatable
    #[arg(long)]
    pub word: Vec<String>,
    /// Lower and upper density bounds for a gcd set of annular density delta
    #[arg(long)]
    pub bounds_delta: Option<f64>,
    /// Rank for the bounds
    #[arg(long, default_value_t = 2, value_parser = rank())]
    pub k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TestMethod {
    /// Count table plus an exact count of proper powers
    Hybrid,
    /// Classify every word (n ≤ 14 or so)
    Exact,
}

#[derive(Args, Debug)]
pub struct LltArgs {
    #[arg(long, default_value_t = 2, value_parser = rank())]
    pub k: usize,
    /// Lengths, comma separated
    #[arg(long, value_delimiter = ',', default_value = "40,80,160")]
    pub n: Vec<usize>,
    /// Per-coordinate variance of the Gaussian [default: 1/(k-1)]
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Also report the mass outside the radius c√n
    #[arg(long)]
    pub tail_c: Option<f64>,
    /// Instead, dump the count table at this length
    #[arg(long)]
    pub dump_counts: Option<usize>,
}

#[derive(Args, Debug)]
pub struct GcdArgs {
    #[arg(long, default_value_t = 2, value_parser = rank())]
    pub k: usize,
    #[arg(long)]
    pub n_max: usize,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[arg(long, default_value_t = 2, value_parser = rank())]
    pub k: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Run with seeds seed, seed+1, ...
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub repeat: u64,
    /// Gcd-class set, or `test-elements` (k = 2)
    #[arg(long, default_value = "visible", value_parser = parse_target)]
    pub set: Target,
    #[arg(long, value_enum, default_value_t = SampleMode::Annular)]
    pub mode: SampleMode,
    /// Add the exact value from the count table
    #[arg(long)]
    pub exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SampleMode {
    /// Half the samples on sphere n-1, half on sphere n
    Annular,
    /// Length uniform in 0..=n, then a uniform word of that length
    BallExperiment,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 2, value_parser = rank())]
    pub k: usize,
    #[arg(long)]
    pub n_max: usize,
}

#[derive(Debug)]
pub enum Failure {
    Lib(freedens::Error),
    Usage(String),
    Io(io::Error),
    /// The computation ran but the check it performs failed.
    Check(Box<Report>),
}

impl From<freedens::Error> for Failure {
    fn from(e: freedens::Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

/// Settings shared by all subcommands.
pub struct Context {
    pub budget: Budget,
    pub config: Vec<(String, String)>,
}

impl Context {
    pub fn config(&self, extra: &[(&str, String)]) -> Vec<(String, String)> {
        let mut c = self.config.clone();
        c.extend(extra.iter().map(|(k, v)| (k.to_string(), v.clone())));
        c
    }
}

fn emit(cli: &Cli, report: &Report) -> Result<(), Failure> {
    match &cli.output {
        Some(path) => {
            let mut out = BufWriter::new(File::create(path)?);
            report.write(cli.format, &mut out)?;
            out.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut out = stdout.lock();
            report.write(cli.format, &mut out)?;
            out.flush()?;
        }
    }
    if let Some(script) = &cli.plot_script {
        let data = cli.output.as_ref().expect("checked before running");
        let text = report
            .gnuplot_script(data)
            .ok_or_else(|| Failure::Usage("this report has no plot layout".into()))?;
        std::fs::write(script, text)?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if cli.plot_script.is_some() && (cli.output.is_none() || cli.format != Format::PlotData) {
        return Err(Failure::Usage("--plot-script needs --format plot-data and --output".into()));
    }
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t as usize)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    let ctx = Context {
        budget: Budget::from_megabytes(cli.memory_mb),
        config: vec![
            ("tool".into(), format!("freedens {}", env!("CARGO_PKG_VERSION"))),
            ("threads".into(), rayon::current_num_threads().to_string()),
            ("memory_mb".into(), cli.memory_mb.to_string()),
        ],
    };
    let report = match &cli.command {
        Command::LatticeDensity(a) => commands::lattice_density(&ctx, a),
        Command::Zeta(a) => commands::zeta(&ctx, a),
        Command::GroupSeries(a) => commands::group_series(&ctx, a),
        Command::TestElements(a) => commands::test_elements(&ctx, a),
        Command::LltCheck(a) => commands::llt_check(&ctx, a),
        Command::ExpectedGcd(a) => commands::expected_gcd(&ctx, a),
        Command::Sample(a) => commands::sample(&ctx, a),
        Command::OracleCheck(a) => commands::oracle_check(&ctx, a),
    };
    match report {
        Ok(report) => emit(cli, &report),
        Err(Failure::Check(report)) => {
            emit(cli, &report)?;
            Err(Failure::Check(report))
        }
        Err(e) => Err(e),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(_)) => {
            eprintln!("freedens: check failed");
            ExitCode::from(1)
        }
        Err(Failure::Io(e)) => {
            eprintln!("freedens: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("freedens: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("freedens: {e}");
            match e {
                freedens::Error::Budget { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
