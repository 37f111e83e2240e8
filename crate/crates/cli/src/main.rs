use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use semionline::error::{Error, Result};
use semionline::fractional::{
    agnostic_frac_run, dual_certificate, frac_online_run, fractional_bound, qp_balanced,
};
use semionline::generators::{AdversaryMode, ArrivalMode, RandomInstanceSpec, SemiOnlineInstance};
use semionline::graph::{matching_number, BipartiteGraph, FractionalMatching};
use semionline::harness::{
    predictions_exact, run_experiment, ExperimentConfig, ExperimentReport, GeneratorConfig,
};
use semionline::integral::{
    agnostic_integral_run, iterative_preprocess, online_run, structured_preprocess,
};
use semionline::rng::seeded;
use semionline::set_systems::{solve_distribution_with, SetSystem, SolveMethod};
use semionline::skeleton::decompose;
use semionline::ski_rental::{buy_probability, competitive_ratio, expected_cost, monte_carlo_cost};

const EXIT_INVALID: u8 = 1;
const EXIT_BOUNDS: u8 = 2;

#[derive(Parser)]
#[command(
    name = "semionline",
    version,
    about = "Semi-online bipartite matching experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Skeleton decomposition of a graph (JSON file or stdin).
    Decompose { graph: Option<PathBuf> },
    /// Run an integral algorithm on an instance.
    RunIntegral {
        instance: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "structured")]
        algorithm: IntegralAlgorithm,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the fractional algorithm on an instance and check its certificate.
    RunFractional {
        instance: Option<PathBuf>,
        /// Use the agnostic reconstruction instead of water filling.
        #[arg(long)]
        agnostic: bool,
    },
    /// Max-min distribution over a set system.
    SetSystem {
        input: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "auto")]
        method: Method,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Semi-online ski rental strategy for a known minimum season length.
    SkiRental {
        #[arg(long)]
        x: f64,
        /// Season length for cost evaluation.
        #[arg(long)]
        u: Option<f64>,
        /// Monte Carlo draws (needs --u).
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a Monte Carlo experiment from a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Full JSON report destination.
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
        /// Exit with status 2 when a bound check fails.
        #[arg(long)]
        assert_bounds: bool,
    },
    /// Generate an instance as JSON on stdout.
    Gen(GenArgs),
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("family").required(true))]
struct GenArgs {
    /// Gadget instance that defeats agnostic algorithms.
    #[arg(long, group = "family")]
    hard_agnostic: bool,
    /// Random instance with a planted matching.
    #[arg(long, group = "family")]
    random: bool,
    /// Perfect predicted graph with d rewired nodes and eps noise.
    #[arg(long, group = "family")]
    d_eps: bool,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    #[arg(long, value_enum, default_value = "targeted")]
    adversary: Adversary,
    #[arg(long, value_enum, default_value = "random")]
    arrival: Arrival,
    #[arg(long)]
    edge_probability: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum IntegralAlgorithm {
    Iterative,
    Structured,
    Agnostic,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Auto,
    Exact,
    Mwu,
}

#[derive(Clone, Copy, ValueEnum)]
enum Adversary {
    Random,
    Targeted,
    AntiReserve,
}

#[derive(Clone, Copy, ValueEnum)]
enum Arrival {
    PredictedFirst,
    AdversarialFirst,
    Random,
    Alternating,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INVALID)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            let diag = json!({ "error": error_kind(&e), "message": e.to_string() });
            eprintln!("{diag}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidGraph(_) => "invalid-graph",
        Error::NodeOutOfRange { .. } => "node-out-of-range",
        Error::TooLarge { .. } => "too-large",
        Error::InvalidFractional(_) => "invalid-fractional",
        Error::Precondition(_) => "precondition",
        Error::InvalidInstance(_) => "invalid-instance",
        Error::InvalidParameter(_) => "invalid-parameter",
        Error::Internal(_) => "internal",
        Error::Json(_) => "json",
        Error::Io(_) => "io",
    }
}

fn read_input(path: Option<&Path>) -> Result<String> {
    let mut text = String::new();
    match path {
        Some(p) => File::open(p)?.read_to_string(&mut text)?,
        None => io::stdin().read_to_string(&mut text)?,
    };
    Ok(text)
}

fn print_json(value: &Value) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Decompose { graph } => {
            let h: BipartiteGraph = serde_json::from_str(&read_input(graph.as_deref())?)?;
            print_json(&serde_json::to_value(decompose(&h))?)?;
        }
        Command::RunIntegral {
            instance,
            algorithm,
            seed,
        } => {
            let inst = read_instance(instance.as_deref())?;
            let h = &inst.predicted;
            let mut rng = seeded(seed);
            let (run, reserved) = match algorithm {
                IntegralAlgorithm::Iterative => {
                    let d = h.offline_count() - matching_number(h);
                    let pre = iterative_preprocess(h, d, &mut rng)?;
                    (online_run(&pre, h, &inst.arrivals)?, Some(pre.reserved))
                }
                IntegralAlgorithm::Structured => {
                    let pre = structured_preprocess(h, &mut rng)?;
                    (online_run(&pre, h, &inst.arrivals)?, Some(pre.reserved))
                }
                IntegralAlgorithm::Agnostic => (agnostic_integral_run(h, &inst.arrivals), None),
            };
            print_json(&json!({
                "size": run.size(),
                "nu_G": inst.nu_g()?,
                "nu_H": inst.nu_h(),
                "delta": inst.delta()?,
                "matching": run.matching,
                "reserved": reserved,
            }))?;
        }
        Command::RunFractional { instance, agnostic } => {
            let inst = read_instance(instance.as_deref())?;
            let h = &inst.predicted;
            let delta = inst.delta()?;
            let (matching, certificate) = if agnostic {
                let qp = qp_balanced(h)?;
                (agnostic_frac_run(&qp.alpha, &inst.arrivals)?, Value::Null)
            } else {
                let run = frac_online_run(h, &inst.arrivals)?;
                let cert = if predictions_exact(&inst) {
                    serde_json::to_value(dual_certificate(h, &inst.arrivals, &run)?)?
                } else {
                    Value::Null
                };
                (run.matching, cert)
            };
            print_json(&json!({
                "weight": matching.total_weight(),
                "nu_G": inst.nu_g()?,
                "nu_H": inst.nu_h(),
                "delta": delta,
                "bound": fractional_bound(delta),
                "matching": weighted_entries(&matching),
                "certificate": certificate,
            }))?;
        }
        Command::SetSystem { input, method, tol } => {
            let sys: SetSystem = serde_json::from_str(&read_input(input.as_deref())?)?;
            let method = match method {
                Method::Auto => SolveMethod::Auto,
                Method::Exact => SolveMethod::Exact,
                Method::Mwu => SolveMethod::MultiplicativeWeights,
            };
            print_json(&serde_json::to_value(solve_distribution_with(
                &sys, tol, method,
            )?)?)?;
        }
        Command::SkiRental { x, u, trials, seed } => {
            let mut out = json!({
                "x": x,
                "buy_probability": buy_probability(x)?,
                "competitive_ratio": competitive_ratio(x)?,
            });
            if let Some(u) = u {
                out["u"] = json!(u);
                out["expected_cost"] = json!(expected_cost(x, u)?);
                if let Some(t) = trials {
                    out["monte_carlo"] =
                        serde_json::to_value(monte_carlo_cost(x, u, t, &mut seeded(seed))?)?;
                }
            } else if trials.is_some() {
                return Err(Error::InvalidParameter("--trials needs --u".into()));
            }
            print_json(&out)?;
        }
        Command::Experiment {
            config,
            csv,
            json,
            threads,
            assert_bounds,
        } => {
            let mut config: ExperimentConfig = serde_json::from_str(&read_input(Some(&config))?)?;
            if threads.is_some() {
                config.threads = threads;
            }
            let report = run_experiment(&config)?;
            match csv {
                Some(p) => report.write_csv(BufWriter::new(File::create(p)?))?,
                None => report.write_csv(io::stdout().lock())?,
            }
            if let Some(p) = json {
                let mut w = BufWriter::new(File::create(p)?);
                serde_json::to_writer_pretty(&mut w, &report)?;
                w.flush()?;
            }
            for c in &report.checks {
                eprintln!(
                    "{} {}: {} (observed {}, threshold {})",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.algorithm,
                    c.description,
                    c.observed,
                    c.threshold
                );
            }
            return Ok(ExitCode::from(experiment_status(&report, assert_bounds)));
        }
        Command::Gen(args) => {
            let generator = if args.hard_agnostic {
                GeneratorConfig::HardAgnostic {
                    n: args.n,
                    d: args.d,
                    eps: args.eps,
                }
            } else if args.d_eps {
                GeneratorConfig::DEps {
                    n: args.n,
                    d: args.d,
                    eps: args.eps,
                    edge_probability: args.edge_probability,
                }
            } else {
                let mut spec = RandomInstanceSpec::new(
                    args.n,
                    args.d,
                    args.adversary.into(),
                    args.arrival.into(),
                );
                spec.edge_probability = args.edge_probability;
                GeneratorConfig::Random(spec)
            };
            print_json(&serde_json::to_value(generator.generate(args.seed)?)?)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn experiment_status(report: &ExperimentReport, assert_bounds: bool) -> u8 {
    if assert_bounds && !report.bounds_hold() {
        EXIT_BOUNDS
    } else {
        0
    }
}

fn read_instance(path: Option<&Path>) -> Result<SemiOnlineInstance> {
    Ok(serde_json::from_str(&read_input(path)?)?)
}

fn weighted_entries(f: &FractionalMatching) -> Vec<(usize, usize, f64)> {
    let mut v: Vec<(usize, usize, f64)> = f.entries().map(|((u, t), w)| (u, t, w)).collect();
    v.sort_by_key(|&(u, t, _)| (u, t));
    v
}

impl From<Adversary> for AdversaryMode {
    fn from(a: Adversary) -> Self {
        match a {
            Adversary::Random => AdversaryMode::Random,
            Adversary::Targeted => AdversaryMode::Targeted,
            Adversary::AntiReserve => AdversaryMode::AntiReserve,
        }
    }
}

impl From<Arrival> for ArrivalMode {
    fn from(a: Arrival) -> Self {
        match a {
            Arrival::PredictedFirst => ArrivalMode::PredictedFirst,
            Arrival::AdversarialFirst => ArrivalMode::AdversarialFirst,
            Arrival::Random => ArrivalMode::Random,
            Arrival::Alternating => ArrivalMode::Alternating,
        }
    }
}
