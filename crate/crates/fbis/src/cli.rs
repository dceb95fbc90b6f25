//! Command-line interface.
//!
//! Errors are printed to stderr as one line, `CODE: message`. Exit status is 2
//! for usage and configuration errors, 3 for data errors and 4 for numerical
//! failures.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::{Deserialize, Serialize};

use fbis_core::datagen::{gen_example, Example, SimSpec};
use fbis_core::ifbis::{ifbis_run, ConditionalRule, IfbisConfig, IfbisTrace};
use fbis_core::mekro::XiGrid;
use fbis_core::screening::{fbis_hard_select, fbis_screen, Quantile, Rate, ScreeningConfig};
use fbis_core::KernelSpec;

use crate::bench::{run_table1, run_table2, BenchError, BenchResult, Cell, Table1Config, Table2Config};
use crate::io::{read_dataset, write_dataset_file, IoError};
use crate::report::{write_json, Envelope, ScreenResult};

#[derive(Debug, Parser)]
#[command(name = "fbis", version, about = "Favored-bandwidth independence screening")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Screening kernel (default: gaussian for `screen` and table1,
    /// epanechnikov for the screening steps of `ifbis` and table2).
    #[arg(long, global = true, value_enum)]
    pub kernel: Option<KernelArg>,
    /// Worker threads (default: FBIS_THREADS, then all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Write a log next to the output file.
    #[arg(long, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Gaussian,
    Epanechnikov,
}

impl From<KernelArg> for KernelSpec {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Gaussian => KernelSpec::Gaussian,
            KernelArg::Epanechnikov => KernelSpec::Epanechnikov,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RateArg {
    P,
    Logn,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Marginal screening of a CSV dataset.
    Screen(ScreenArgs),
    /// Iterative screening with MEKRO refinement.
    Ifbis(IfbisArgs),
    /// Write a simulated dataset as CSV.
    Simulate(SimulateArgs),
    /// Reproduce the screening (table1) or iterative-selection (table2) study.
    Bench {
        #[arg(value_enum)]
        table: Table,
        #[command(flatten)]
        args: BenchArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Table {
    Table1,
    Table2,
}

#[derive(Debug, Args)]
pub struct ScreenArgs {
    pub data: PathBuf,
    /// Response column: header name or 0-based index.
    #[arg(long)]
    pub response: String,
    /// Permutation quantile in [0, 1), or `max`.
    #[arg(long, default_value = "max", value_parser = parse_quantile)]
    pub q: Quantile,
    #[arg(long, default_value_t = 1)]
    pub permutations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also report the `k` highest-IM variables.
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    /// Also report the hard-threshold set.
    #[arg(long)]
    pub hard: bool,
    #[arg(long, value_enum, default_value_t = RateArg::P)]
    pub rate: RateArg,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct IfbisArgs {
    pub data: PathBuf,
    #[arg(long)]
    pub response: String,
    /// Model size cap (default ⌊n / ln n⌋).
    #[arg(long)]
    pub s0: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub k_max: usize,
    #[arg(long, default_value_t = 10)]
    pub max_iterations: usize,
    /// Budget grid `lo:hi:count`, in multiples of the number of candidates.
    #[arg(long, value_parser = parse_xi_grid)]
    pub xi_grid: Option<XiGrid>,
    /// Add the top `k` conditional scores per iteration instead of thresholding.
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long, value_enum, default_value_t = RateArg::P)]
    pub rate: RateArg,
    /// Kernel of the MEKRO fits.
    #[arg(long, value_enum, default_value_t = KernelArg::Gaussian)]
    pub mekro_kernel: KernelArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub example: u8,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: usize,
    #[arg(long, default_value_t = 0.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    /// Replicate `r` uses seed `seed + r`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Cells `example:rho:sigma2,…` (default: all twelve).
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, default_value_t = 400)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub p: usize,
    /// table1: size of the ranked set checked for true variables.
    #[arg(long, default_value_t = 20)]
    pub top_k: usize,
    /// table2: size of each test set.
    #[arg(long, default_value_t = 10_000)]
    pub test_n: usize,
    /// Output format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

fn parse_quantile(s: &str) -> Result<Quantile, String> {
    if s.eq_ignore_ascii_case("max") {
        return Ok(Quantile::Max);
    }
    match s.parse::<f64>() {
        Ok(q) if (0.0..1.0).contains(&q) => Ok(Quantile::Level(q)),
        _ => Err(format!("expected a level in [0, 1) or `max`, got {s:?}")),
    }
}

fn parse_xi_grid(s: &str) -> Result<XiGrid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, count] = parts.as_slice() else {
        return Err(format!("expected lo:hi:count, got {s:?}"));
    };
    let lo: f64 = lo.parse().map_err(|_| format!("bad lower end {lo:?}"))?;
    let hi: f64 = hi.parse().map_err(|_| format!("bad upper end {hi:?}"))?;
    let count: usize = count.parse().map_err(|_| format!("bad count {count:?}"))?;
    if !(lo > 0.0 && hi >= lo && count >= 1) {
        return Err(format!("need 0 < lo ≤ hi and count ≥ 1, got {s:?}"));
    }
    Ok(XiGrid::Scaled { lo, hi, count })
}

fn rate(r: RateArg) -> Rate {
    match r {
        RateArg::P => Rate::UseP,
        RateArg::Logn => Rate::UseLogN,
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Core(#[from] fbis_core::Error),
    #[error(transparent)]
    Bench(#[from] BenchError),
}

fn core_exit(e: &fbis_core::Error) -> i32 {
    use fbis_core::Error as E;
    match e.root() {
        E::InvalidConfig(_) | E::InvalidRho(_) | E::Unsupported(_) => 2,
        _ if e.is_data_error() => 3,
        _ => 4,
    }
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "UsageError",
            CliError::Io(e) => e.code(),
            CliError::Core(e) => e.code(),
            CliError::Bench(e) => e.source.code(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(IoError::Core(e)) | CliError::Core(e) => core_exit(e),
            CliError::Io(_) => 3,
            CliError::Bench(e) => core_exit(&e.source),
        }
    }
}

fn check_input(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(IoError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found"),
        }
        .into())
    }
}

fn check_output(path: &Path) -> Result<(), CliError> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty());
    match parent {
        Some(dir) if !dir.is_dir() => Err(IoError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "output directory does not exist"),
        }
        .into()),
        _ => Ok(()),
    }
}

fn log_path(output: &Path) -> PathBuf {
    let candidate = output.with_extension("log");
    if candidate == output {
        let mut s = output.as_os_str().to_owned();
        s.push(".log");
        PathBuf::from(s)
    } else {
        candidate
    }
}

fn init_logging(output: &Path) -> Result<(), CliError> {
    let path = log_path(output);
    let file = std::fs::File::create(&path).map_err(|source| IoError::Io { path, source })?;
    env_logger::Builder::new()
        .filter_level(log::LevelFilter::Info)
        .target(env_logger::Target::Pipe(Box::new(file)))
        .try_init()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn init_threads(threads: Option<usize>) -> Result<(), CliError> {
    let threads = match threads {
        Some(t) => Some(t),
        None => match std::env::var("FBIS_THREADS") {
            Ok(v) => Some(v.parse().map_err(|_| CliError::Usage(format!("FBIS_THREADS={v:?} is not a count")))?),
            Err(_) => None,
        },
    };
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::Usage("thread count must be positive".into()));
        }
        // A pool may already exist when run in-process more than once.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    Ok(())
}

fn output_of(cmd: &Command) -> &Path {
    match cmd {
        Command::Screen(a) => &a.output,
        Command::Ifbis(a) => &a.output,
        Command::Simulate(a) => &a.output,
        Command::Bench { args, .. } => &args.output,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IfbisResult {
    pub trace: IfbisTrace,
    pub names: Option<Vec<String>>,
}

fn screen(args: &ScreenArgs, kernel: Option<KernelSpec>) -> Result<(), CliError> {
    check_input(&args.data)?;
    check_output(&args.output)?;
    let cfg = ScreeningConfig {
        tau: args.tau,
        q: args.q,
        n_permutations: args.permutations,
        seed: args.seed,
        rate: rate(args.rate),
        kernel: kernel.unwrap_or_default(),
        ..ScreeningConfig::default()
    };
    cfg.validate()?;
    let start = Instant::now();
    let data = read_dataset(&args.data, &args.response)?;
    info!("read {} rows and {} predictors from {}", data.n(), data.p(), args.data.display());
    let report = fbis_screen(&data, &cfg)?;
    info!("h* = {}, omega = {}, selected {} variables", report.h_star, report.omega_q, report.selected.len());
    let hard_set = if args.hard { Some(fbis_hard_select(&data, &cfg)?) } else { None };
    let top_k = args.top_k.map(|k| report.top_k(k));
    let result = ScreenResult {
        report,
        names: data.names().map(<[String]>::to_vec),
        top_k,
        hard_set,
    };
    write_json(&Envelope::new(cfg, result, start.elapsed().as_secs_f64()), &args.output)?;
    Ok(())
}

fn ifbis(args: &IfbisArgs, kernel: Option<KernelSpec>) -> Result<(), CliError> {
    check_input(&args.data)?;
    check_output(&args.output)?;
    let defaults = IfbisConfig::default();
    let mut cfg = IfbisConfig {
        screening: ScreeningConfig {
            seed: args.seed,
            rate: rate(args.rate),
            kernel: kernel.unwrap_or(defaults.screening.kernel),
            ..defaults.screening.clone()
        },
        mekro_kernel: args.mekro_kernel.into(),
        s0: args.s0,
        k_max: args.k_max,
        max_iterations: args.max_iterations,
        rule: args.top_k.map_or(ConditionalRule::PermutationMax, ConditionalRule::TopK),
        ..defaults
    };
    cfg.mekro.seed = args.seed;
    if let Some(grid) = &args.xi_grid {
        cfg.mekro.xi_grid = grid.clone();
    }
    cfg.validate()?;
    let start = Instant::now();
    let data = read_dataset(&args.data, &args.response)?;
    info!("read {} rows and {} predictors from {}", data.n(), data.p(), args.data.display());
    let trace = ifbis_run(&data, &cfg)?;
    for (l, it) in trace.iterations.iter().enumerate() {
        info!("iteration {}: candidates {:?}, selected {:?}", l + 1, it.candidates, it.selected);
    }
    info!("stopped ({:?}) with {:?}", trace.stop_reason, trace.final_set);
    let result = IfbisResult {
        trace,
        names: data.names().map(<[String]>::to_vec),
    };
    write_json(&Envelope::new(cfg, result, start.elapsed().as_secs_f64()), &args.output)?;
    Ok(())
}

fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    check_output(&args.output)?;
    let spec = SimSpec {
        example: Example::from_number(args.example).expect("range-checked by the parser"),
        n: args.n,
        p: args.p,
        rho: args.rho,
        sigma2: args.sigma2,
        seed: args.seed,
    };
    let data = gen_example(&spec)?;
    info!("simulated {spec:?}");
    write_dataset_file(&data, &args.output)?;
    Ok(())
}

fn bench(table: Table, args: &BenchArgs, kernel: Option<KernelSpec>) -> Result<(), CliError> {
    check_output(&args.output)?;
    let format = args.format.unwrap_or_else(|| {
        if args.output.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Format::Json
        } else {
            Format::Csv
        }
    });
    let grid = args.grid.as_deref().map(Cell::parse_grid).transpose().map_err(CliError::Usage)?;
    let start = Instant::now();
    let (config, result): (serde_json::Value, BenchResult) = match table {
        Table::Table1 => {
            let mut cfg = Table1Config {
                n: args.n,
                p: args.p,
                reps: args.reps,
                top_k: args.top_k,
                seed_base: args.seed,
                ..Table1Config::default()
            };
            if let Some(grid) = &grid {
                cfg.grid = grid.clone();
            }
            if let Some(k) = kernel {
                cfg.screening.kernel = k;
            }
            cfg.screening.validate()?;
            info!("table1 over {} cells x {} replicates", cfg.grid.len(), cfg.reps);
            let result = run_table1(&cfg)?;
            (serde_json::to_value(&cfg).expect("configs serialize"), result)
        }
        Table::Table2 => {
            let mut cfg = Table2Config {
                n: args.n,
                p: args.p,
                reps: args.reps,
                test_n: args.test_n,
                seed_base: args.seed,
                ..Table2Config::default()
            };
            if let Some(grid) = &grid {
                cfg.grid = grid.clone();
            }
            if let Some(k) = kernel {
                cfg.ifbis.screening.kernel = k;
            }
            cfg.ifbis.validate()?;
            info!("table2 over {} cells x {} replicates", cfg.grid.len(), cfg.reps);
            let result = run_table2(&cfg)?;
            (serde_json::to_value(&cfg).expect("configs serialize"), result)
        }
    };
    let seconds = start.elapsed().as_secs_f64();
    info!("finished in {seconds:.1} s\n{}", result.summary());
    print!("{}", result.summary());
    match format {
        Format::Json => write_json(&Envelope::new(config, result, seconds), &args.output)?,
        Format::Csv => {
            let path = &args.output;
            let file = std::fs::File::create(path).map_err(|source| IoError::Io {
                path: path.clone(),
                source,
            })?;
            result.write_csv(std::io::BufWriter::new(file)).map_err(|e| IoError::Io {
                path: path.clone(),
                source: std::io::Error::other(e.to_string()),
            })?;
        }
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    init_threads(cli.threads)?;
    if cli.verbose {
        check_output(output_of(&cli.command))?;
        init_logging(output_of(&cli.command))?;
    }
    let kernel = cli.kernel.map(KernelSpec::from);
    match &cli.command {
        Command::Screen(a) => screen(a, kernel),
        Command::Ifbis(a) => ifbis(a, kernel),
        Command::Simulate(a) => simulate(a),
        Command::Bench { table, args } => bench(*table, args, kernel),
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses `args` and runs the command, returning the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("UsageError: {}", one_line(first));
            return 2;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}: {}", e.code(), one_line(&e.to_string()));
            e.exit_code()
        }
    }
}
