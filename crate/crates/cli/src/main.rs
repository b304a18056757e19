//! `hawkes-moments`: exact Hawkes moments and cumulants from the command line.
//!
//! Exit codes: 0 ok, 1 Monte Carlo validation failed, 2 usage error,
//! 3 order above the size cap, 4 I/O error.

mod grid;
mod numfmt;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hawkes_moments::borel::{borel_cumulant, borel_moment, borel_pmf, BorelParam};
use hawkes_moments::hawkes::{
    joint_cumulant, joint_moment, kappa_z_joint, kappa_z_univariate, univariate_cumulant, univariate_moment,
    CumulantCache, EvalMode, QueryTimes, DEFAULT_JOINT_CAP,
};
use hawkes_moments::simulator::{estimate_joint_moment, export_path, path_rng, write_path_csv, MCConfig, Method};
use hawkes_moments::{Error, KernelParams};

use crate::grid::{GridSpec, GridVar};
use crate::numfmt::sig12;

#[derive(Debug, Parser)]
#[command(name = "hawkes-moments", version, about = "Exact joint moments and cumulants of exponential Hawkes processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Kernel {
    /// Kernel amplitude a (offspring rate a·e^{-bx})
    #[arg(long, allow_hyphen_values = true)]
    a: f64,
    /// Kernel decay rate b
    #[arg(long, allow_hyphen_values = true)]
    b: f64,
    /// Immigrant intensity
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    nu: f64,
}

impl Kernel {
    fn params(&self) -> Result<KernelParams, CliError> {
        Ok(KernelParams::new(self.a, self.b, self.nu)?)
    }
}

#[derive(Debug, Args)]
struct Engine {
    /// Largest joint order accepted
    #[arg(long, default_value_t = DEFAULT_JOINT_CAP)]
    cap: usize,
    /// Evaluate partition sums on all cores
    #[arg(long)]
    parallel: bool,
}

impl Engine {
    fn cache(&self) -> CumulantCache {
        let mode = if self.parallel { EvalMode::Parallel } else { EvalMode::Sequential };
        CumulantCache::new().with_cap(self.cap).with_mode(mode)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Quantity {
    Moment,
    Cumulant,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BorelQuantity {
    Pmf,
    Cumulant,
    Moment,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Sampler {
    Cluster,
    Thinning,
}

impl From<Sampler> for Method {
    fn from(s: Sampler) -> Method {
        match s {
            Sampler::Cluster => Method::Cluster,
            Sampler::Thinning => Method::Thinning,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Joint moment E[X_{t1} ... X_{tn}]
    Moment {
        #[command(flatten)]
        kernel: Kernel,
        #[command(flatten)]
        engine: Engine,
        /// Observation times (any order; repeats give powers)
        #[arg(required = true)]
        times: Vec<f64>,
    },
    /// Joint cumulant of X_{t1}, ..., X_{tn}
    Cumulant {
        #[command(flatten)]
        kernel: Kernel,
        #[command(flatten)]
        engine: Engine,
        #[arg(required = true)]
        times: Vec<f64>,
    },
    /// Tabulate a moment or cumulant over a grid of times (CSV)
    Grid {
        #[command(flatten)]
        kernel: Kernel,
        #[command(flatten)]
        engine: Engine,
        /// One per time slot: a fixed value `t`, or a free range `start:stop:steps`
        #[arg(long = "var", required = true)]
        vars: Vec<GridVar>,
        #[arg(long, value_enum, default_value_t = Quantity::Moment)]
        kind: Quantity,
        /// Output CSV file
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Compare the exact moment with a Monte Carlo estimate
    Validate {
        #[command(flatten)]
        kernel: Kernel,
        #[command(flatten)]
        engine: Engine,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Sampler::Cluster)]
        method: Sampler,
        /// Simulation horizon (defaults to the largest time)
        #[arg(long)]
        horizon: Option<f64>,
        /// Print the report as JSON
        #[arg(long)]
        json: bool,
        /// Added to the exact value before comparing (harness self-test)
        #[arg(long, hide = true, default_value_t = 0.0, allow_hyphen_values = true)]
        corrupt_analytic: f64,
        #[arg(required = true)]
        times: Vec<f64>,
    },
    /// Borel distribution values
    Borel {
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        n: u64,
        #[arg(value_enum)]
        which: BorelQuantity,
    },
    /// Per-order timings and term counts of the univariate recursion
    Bench {
        #[command(flatten)]
        kernel: Kernel,
        #[arg(long, default_value_t = 6)]
        max_order: usize,
        #[arg(long, default_value_t = 2.0)]
        t: f64,
    },
    /// Print the cluster cumulant function κ_z as an exponential polynomial
    Kappa {
        #[command(flatten)]
        kernel: Kernel,
        #[arg(required = true)]
        times: Vec<f64>,
    },
    /// Simulate one path and export t, X_t, λ_t on a grid (CSV)
    Path {
        #[arg(long, default_value_t = 0.5)]
        a: f64,
        #[arg(long, default_value_t = 1.0)]
        b: f64,
        #[arg(long, default_value_t = 1.0)]
        nu: f64,
        #[arg(long, default_value_t = 20.0)]
        horizon: f64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV file (stdout when omitted)
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    SizeCap(String),
    Io(String),
    ValidationFailed,
    /// Downstream reader closed early (e.g. `| head`); not an error.
    BrokenPipe,
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::BrokenPipe => 0,
            CliError::ValidationFailed => 1,
            CliError::Usage(_) => 2,
            CliError::SizeCap(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::SizeLimit { .. } => CliError::SizeCap(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::BrokenPipe {
            CliError::BrokenPipe
        } else {
            CliError::Io(e.to_string())
        }
    }
}



fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Usage(m) => eprintln!("error: {m}"),
                CliError::SizeCap(m) => eprintln!("error: {m}"),
                CliError::Io(m) => eprintln!("I/O error: {m}"),
                CliError::ValidationFailed | CliError::BrokenPipe => {}
            }
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Moment { kernel, engine, times } => {
            let q = QueryTimes::new(times)?;
            println!("{}", sig12(joint_moment(&q, &kernel.params()?, &engine.cache())?));
        }
        Command::Cumulant { kernel, engine, times } => {
            let q = QueryTimes::new(times)?;
            println!("{}", sig12(joint_cumulant(&q, &kernel.params()?, &engine.cache())?));
        }
        Command::Grid { kernel, engine, vars, kind, output } => {
            let spec = GridSpec::new(vars).map_err(CliError::Usage)?;
            let params = kernel.params()?;
            let cache = engine.cache();
            let file = File::create(&output).map_err(|e| CliError::Io(format!("{}: {e}", output.display())))?;
            grid::write_grid(&spec, |t| evaluate(kind, t, &params, &cache), BufWriter::new(file))?;
        }
        Command::Validate { kernel, engine, paths, seed, method, horizon, json, corrupt_analytic, times } => {
            validate(kernel, engine, paths, seed, method, horizon, json, corrupt_analytic, times)?;
        }
        Command::Borel { mu, n, which } => {
            let mu = BorelParam::new(mu)?;
            let value = match which {
                BorelQuantity::Pmf => borel_pmf(n, mu)?,
                BorelQuantity::Cumulant => borel_cumulant(n as usize, mu)?,
                BorelQuantity::Moment => borel_moment(n as usize, mu)?,
            };
            println!("{}", sig12(value));
        }
        Command::Bench { kernel, max_order, t } => bench(&kernel.params()?, max_order, t)?,
        Command::Kappa { kernel, times } => {
            let params = kernel.params()?;
            let q = QueryTimes::new(times)?;
            print!("{}", kappa_z_joint(&q, &params, &CumulantCache::new())?);
        }
        Command::Path { a, b, nu, horizon, step, seed, output } => {
            let params = KernelParams::new(a, b, nu)?;
            let (_, points) = export_path(&params, horizon, step, &mut path_rng(seed, 0))?;
            match output {
                Some(path) => {
                    let file = File::create(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                    let mut w = BufWriter::new(file);
                    write_path_csv(&points, &mut w)?;
                    w.flush()?;
                }
                None => write_path_csv(&points, io::stdout().lock())?,
            }
        }
    }
    Ok(())
}

/// Moment or cumulant at the given times. `X_0 = 0` almost surely, so any
/// zero time gives zero.
fn evaluate(kind: Quantity, times: &[f64], params: &KernelParams, cache: &CumulantCache) -> Result<f64, CliError> {
    if times.contains(&0.0) {
        return Ok(0.0);
    }
    let q = QueryTimes::new(times.to_vec())?;
    Ok(match kind {
        Quantity::Moment => joint_moment(&q, params, cache)?,
        Quantity::Cumulant => joint_cumulant(&q, params, cache)?,
    })
}

#[allow(clippy::too_many_arguments)]
fn validate(
    kernel: Kernel,
    engine: Engine,
    paths: usize,
    seed: u64,
    method: Sampler,
    horizon: Option<f64>,
    json: bool,
    corrupt_analytic: f64,
    times: Vec<f64>,
) -> Result<(), CliError> {
    if paths < 1000 {
        return Err(CliError::Usage(format!("validation needs at least 1000 paths, got {paths}")));
    }
    let params = kernel.params()?;
    let q = QueryTimes::new(times)?;
    let analytic = joint_moment(&q, &params, &engine.cache())? + corrupt_analytic;
    let cfg = MCConfig::new(paths, horizon.unwrap_or(q.last()), seed)?.with_method(method.into());
    let est = estimate_joint_moment(&params, &q, &cfg)?;
    let z = est.z_score(analytic);
    let pass = z.abs() <= 4.0;
    if json {
        let report = serde_json::json!({
            "times": q.as_slice(),
            "analytic": analytic,
            "value": est.value,
            "std_error": est.std_error,
            "n_samples": est.n_samples,
            "seed": seed,
            "z": z,
            "pass": pass,
        });
        println!("{report}");
    } else {
        println!("analytic  {}", sig12(analytic));
        println!("estimate  {}", sig12(est.value));
        println!("std_error {}", sig12(est.std_error));
        println!("z         {}", sig12(z));
        println!("{}", if pass { "PASS (|z| <= 4)" } else { "FAIL (|z| > 4)" });
    }
    if pass {
        Ok(())
    } else {
        Err(CliError::ValidationFailed)
    }
}

fn bench(params: &KernelParams, max_order: usize, t: f64) -> Result<(), CliError> {
    let cache = CumulantCache::new();
    println!("# univariate recursion at a={}, b={}, nu={}, t={t}", params.a, params.b, params.nu);
    println!("# term counts are canonical exponential-polynomial terms of this implementation;");
    println!("# they are not comparable to summand counts of a symbolic expansion.");
    println!("{:>5} {:>12} {:>14} {:>14} {:>20}", "order", "kappa_terms", "cumulant_ms", "moment_ms", "moment");
    for n in 1..=max_order {
        let start = Instant::now();
        univariate_cumulant(n, t, params, &cache)?;
        let cumulant_ms = start.elapsed().as_secs_f64() * 1e3;
        let start = Instant::now();
        let m = univariate_moment(n, t, params, &cache)?;
        let moment_ms = start.elapsed().as_secs_f64() * 1e3;
        let terms = kappa_z_univariate(n, t, params, &cache)?.len();
        println!("{n:>5} {terms:>12} {cumulant_ms:>14.3} {moment_ms:>14.3} {:>20}", sig12(m));
    }
    Ok(())
}
