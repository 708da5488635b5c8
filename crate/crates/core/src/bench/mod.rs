//! `traffic-fw` command line: solve, compare and validate on TNTP datasets.
//!
//! `--dataset NAME` without explicit paths resolves to
//! `$TA_DATA_DIR/NAME/NAME_{net,trips}.tntp`.

pub mod algspec;
pub mod svg;
pub mod trace;

use std::fs::{self, File};
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use thiserror::Error;

use crate::network::{parse_net, parse_trips, validate, DemandMatrix, Network};
use crate::solver::{solve, AlgorithmResult, SolveError, SolverConfig};
use algspec::{parse_spec, parse_spec_list, parse_step, Overrides};
use svg::Series;
use trace::TraceWriter;

/// Environment variable naming the dataset root directory.
pub const DATA_DIR_ENV: &str = "TA_DATA_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "traffic-fw",
    version,
    about = "Frank-Wolfe family traffic assignment benchmarks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one algorithm and write its convergence trace.
    Solve(SolveArgs),
    /// Run several algorithms under one budget and plot them together.
    Compare(CompareArgs),
    /// Check that every demand pair is routable.
    Validate(InputArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// TNTP network file.
    #[arg(long)]
    pub net: Option<PathBuf>,
    /// TNTP trips file.
    #[arg(long)]
    pub trips: Option<PathBuf>,
    /// Dataset name used in output and for lookup under $TA_DATA_DIR.
    #[arg(long)]
    pub dataset: Option<String>,
}

#[derive(Debug, Args)]
pub struct BudgetArgs {
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    pub time_budget: Option<f64>,
    #[arg(long, default_value_t = 1e-6)]
    pub rgap_tol: f64,
    /// Reserved; every solver is deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ParamArgs {
    /// NFW: number of conjugate directions.
    #[arg(long)]
    pub n: Option<usize>,
    /// NFW: step size above which the history is reset.
    #[arg(long)]
    pub gamma_max: Option<f64>,
    /// WFFW: smoothing weight.
    #[arg(long)]
    pub w: Option<f64>,
    /// FFW: number of averaged targets.
    #[arg(long)]
    pub l: Option<usize>,
    /// FW step rule: linesearch or harmonic.
    #[arg(long, value_parser = parse_step)]
    pub step: Option<crate::line_search::StepPolicy>,
}

impl ParamArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            n: self.n,
            gamma_max: self.gamma_max,
            w: self.w,
            l: self.l,
            step: self.step,
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// fw, cfw, ffw, wffw, nfw or bfw.
    #[arg(long)]
    pub alg: String,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub budget: BudgetArgs,
    /// Trace CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Comma-separated specs, e.g. `fw,cfw,nfw:n=3,wffw:w=0.15,ffw:l=3`.
    #[arg(long)]
    pub algs: String,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub budget: BudgetArgs,
    /// Output directory for the traces and compare.svg.
    #[arg(long)]
    pub out: PathBuf,
    /// Run algorithms concurrently. Timings then share the machine.
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Solve(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// A loaded dataset.
pub struct Dataset {
    pub name: String,
    pub net: Network,
    pub demand: DemandMatrix,
}

impl InputArgs {
    fn paths(&self) -> Result<(PathBuf, PathBuf), CliError> {
        match (&self.net, &self.trips, &self.dataset) {
            (Some(n), Some(t), _) => Ok((n.clone(), t.clone())),
            (None, None, Some(name)) => {
                let root = std::env::var_os(DATA_DIR_ENV).ok_or_else(|| {
                    CliError::Usage(format!(
                        "--dataset without --net/--trips needs {DATA_DIR_ENV} to be set"
                    ))
                })?;
                let dir = Path::new(&root).join(name);
                Ok((
                    dir.join(format!("{name}_net.tntp")),
                    dir.join(format!("{name}_trips.tntp")),
                ))
            }
            _ => Err(CliError::Usage(
                "give both --net and --trips, or --dataset with TA_DATA_DIR set".into(),
            )),
        }
    }

    /// Parses both files and fails on fatal validation findings.
    pub fn load(&self) -> Result<Dataset, CliError> {
        let (net_path, trips_path) = self.paths()?;
        let name = self
            .dataset
            .clone()
            .unwrap_or_else(|| dataset_name(&net_path));
        let net = read(&net_path, parse_net)?;
        let demand = read(&trips_path, parse_trips)?;
        let report = validate(&net, &demand);
        if report.is_fatal() {
            return Err(CliError::Input(report.to_string()));
        }
        Ok(Dataset { name, net, demand })
    }
}

fn read<T, E: std::fmt::Display>(
    path: &Path,
    parse: impl FnOnce(&str) -> Result<T, E>,
) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// `SiouxFalls_net.tntp` -> `SiouxFalls`.
pub fn dataset_name(net_path: &Path) -> String {
    let stem = net_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    stem.strip_suffix("_net").unwrap_or(&stem).to_string()
}

impl BudgetArgs {
    fn apply(&self, mut config: SolverConfig) -> Result<SolverConfig, CliError> {
        config = config
            .with_max_iter(self.max_iter)
            .with_rgap_tol(self.rgap_tol);
        if let Some(secs) = self.time_budget {
            let budget = Duration::try_from_secs_f64(secs)
                .map_err(|e| CliError::Usage(format!("--time-budget {secs}: {e}")))?;
            config = config.with_time_budget(budget);
        }
        Ok(config)
    }
}

/// Summary line printed after each run.
pub fn summary(label: &str, dataset: &str, result: &Result<AlgorithmResult, SolveError>) -> String {
    let trace = match result {
        Ok(r) => &r.trace,
        Err(e) => &e.trace,
    };
    let rgap = match result {
        Ok(r) => r.final_rgap,
        Err(_) => trace.last().and_then(|r| r.rgap),
    };
    let rgap = rgap.map_or("none".to_string(), |g| format!("{g:.6e}"));
    let time = trace.last().map_or(0.0, |r| r.elapsed);
    format!(
        "{label} {dataset} iters={} rgap={rgap} time={time:.3}",
        trace.len()
    )
}

fn run_to_csv(
    data: &Dataset,
    config: &SolverConfig,
    path: &Path,
) -> Result<Result<AlgorithmResult, SolveError>, CliError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut writer = TraceWriter::new(BufWriter::new(file)).map_err(io_err(path))?;
    let mut write_err = None;
    let result = solve(&data.net, &data.demand, config, &mut |r| {
        if write_err.is_none() {
            write_err = writer.write(r).err();
        }
    });
    if let Some(e) = write_err {
        return Err(io_err(path)(e));
    }
    Ok(result)
}

pub fn cmd_solve(args: &SolveArgs) -> Result<(), CliError> {
    let config = parse_spec(&args.alg, &args.params.overrides()).map_err(CliError::Usage)?;
    let config = args.budget.apply(config)?;
    let data = args.input.load()?;
    let label = config.label();
    let result = run_to_csv(&data, &config, &args.out)?;
    println!("{}", summary(&label, &data.name, &result));
    match result {
        Ok(r) => {
            log::info!("{label}: stopped on {}", r.termination.name());
            Ok(())
        }
        Err(e) => Err(CliError::Solve(format!(
            "{label}: {e}; partial trace kept in {}",
            args.out.display()
        ))),
    }
}

/// File stem for a run: label characters outside `[A-Za-z0-9._-]` dropped or mapped to `_`.
fn file_stem(label: &str, taken: &mut Vec<String>) -> String {
    let mut stem: String = label
        .chars()
        .filter_map(|c| match c {
            'a'..='z' | 'A'..='Z' | '0'..='9' | '.' | '-' => Some(c),
            '(' | '=' => Some('_'),
            ')' => None,
            _ => Some('_'),
        })
        .collect();
    stem = stem.replace("__", "_");
    let base = stem.clone();
    let mut i = 2;
    while taken.contains(&stem) {
        stem = format!("{base}-{i}");
        i += 1;
    }
    taken.push(stem.clone());
    stem
}

pub fn cmd_compare(args: &CompareArgs) -> Result<(), CliError> {
    let configs = parse_spec_list(&args.algs, &args.params.overrides()).map_err(CliError::Usage)?;
    let configs = configs
        .into_iter()
        .map(|c| args.budget.apply(c))
        .collect::<Result<Vec<_>, _>>()?;
    let data = args.input.load()?;
    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;

    let mut taken = Vec::new();
    let runs: Vec<(SolverConfig, PathBuf)> = configs
        .into_iter()
        .map(|c| {
            let stem = file_stem(&c.label(), &mut taken);
            let path = args.out.join(format!("{stem}.csv"));
            (c, path)
        })
        .collect();

    let one = |(config, path): &(SolverConfig, PathBuf)| {
        let r = run_to_csv(&data, config, path);
        if let Ok(res) = &r {
            println!("{}", summary(&config.label(), &data.name, res));
        }
        r
    };
    let results: Vec<_> = if args.parallel {
        eprintln!(
            "note: --parallel runs share the machine; elapsed times are not comparable to sequential runs"
        );
        runs.par_iter().map(one).collect()
    } else {
        runs.iter().map(one).collect()
    };

    let mut series = Vec::new();
    let mut failures = Vec::new();
    for ((config, _), r) in runs.iter().zip(results) {
        let (trace, failed) = match r? {
            Ok(res) => (res.trace, false),
            Err(e) => {
                failures.push(format!("{}: {}", config.label(), e.kind));
                (e.trace, true)
            }
        };
        series.push(Series {
            label: config.label(),
            points: trace
                .iter()
                .filter_map(|r| r.rgap.map(|g| (r.elapsed, g)))
                .collect(),
            failed,
        });
    }
    let svg_path = args.out.join("compare.svg");
    fs::write(&svg_path, svg::render(&data.name, &series)).map_err(io_err(&svg_path))?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Solve(failures.join("\n")))
    }
}

pub fn cmd_validate(args: &InputArgs) -> Result<(), CliError> {
    let (net_path, trips_path) = args.paths()?;
    let net = read(&net_path, parse_net)?;
    let demand = read(&trips_path, parse_trips)?;
    let report = validate(&net, &demand);
    if report.is_fatal() {
        return Err(CliError::Input(report.to_string()));
    }
    println!("{report}");
    Ok(())
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Validate(a) => cmd_validate(a),
    }
}

/// Entry point for the binary; returns the process exit status.
pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
