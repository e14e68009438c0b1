//! Command-line front end: code and graph dumps, fault enumeration, Monte
//! Carlo runs, threshold fits and cyclic-scheduling solutions.
//!
//! Exit codes: 0 on success, 1 for configuration errors, 2 for runtime
//! errors.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use subsys::code::PauliType;
use subsys::decoder::{self, DetectorModel, MatchingGraph, VertexMode};
use subsys::harness::{self, CodeSpec, ExperimentConfig, Family, FitMode, HarnessError, Metric, NoiseKind, Schedule};
use subsys::noise_sim::{self, NoiseModel};
use subsys::symmetry;

#[derive(Parser)]
#[command(name = "subsys", version, about = "Subsystem surface-code construction, simulation and decoding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the code, circuit or matching graph of a configuration.
    Build(BuildArgs),
    /// List every single fault of the circuit with its detector effect.
    EnumerateFaults(BuildArgs),
    /// Run a Monte Carlo experiment and write CSV plus a JSON sidecar.
    Run(RunArgs),
    /// Fit a threshold to a result CSV.
    Fit(FitArgs),
    /// Solve for cyclic scheduling homomorphisms of {r,s} groups.
    SolveHomomorphisms(SolveArgs),
}

#[derive(Args, Clone)]
struct CodeArgs {
    #[arg(long, value_enum, default_value = "toric")]
    family: FamilyArg,
    /// Lattice size of toric and planar codes (comma-separated for sweeps).
    #[arg(long, value_delimiter = ',', default_value = "4")]
    size: Vec<usize>,
    /// Group file of hyperbolic and semi-hyperbolic codes.
    #[arg(long)]
    group: Option<PathBuf>,
    /// Refinement level of semi-hyperbolic codes.
    #[arg(long, default_value_t = 2)]
    l: usize,
    /// Schedule word such as ZX, Z3X3 or ZX^3, or `rows` for alternating rows.
    #[arg(long, default_value = "ZX")]
    schedule: String,
    /// Place every gauge measurement of a round in parallel.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    parallelised: bool,
    /// Split fixable detectors.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    gauge_fixing: bool,
    /// Word repetitions (circuits) or noisy rounds (phenomenological).
    #[arg(long)]
    rounds: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Toric,
    Planar,
    Hyperbolic,
    SemiHyperbolic,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Toric => Family::Toric,
            FamilyArg::Planar => Family::Planar,
            FamilyArg::Hyperbolic => Family::Hyperbolic,
            FamilyArg::SemiHyperbolic => Family::SemiHyperbolic,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    Depolarising,
    Independent,
    CodeCapacity,
    Phenomenological,
}

impl From<NoiseArg> for NoiseKind {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::Depolarising => NoiseKind::Depolarising,
            NoiseArg::Independent => NoiseKind::Independent,
            NoiseArg::CodeCapacity => NoiseKind::CodeCapacity,
            NoiseArg::Phenomenological => NoiseKind::Phenomenological,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum WhatArg {
    Code,
    Circuit,
    GraphX,
    GraphZ,
    Dem,
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    code: CodeArgs,
    #[arg(long, value_enum, default_value = "code")]
    what: WhatArg,
    #[arg(long, value_enum, default_value = "depolarising")]
    noise: NoiseArg,
    #[arg(long, default_value_t = 0.001)]
    p: f64,
    #[arg(long, default_value_t = 0.5)]
    eta: f64,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    code: CodeArgs,
    /// JSON configuration file; replaces every other experiment flag.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "depolarising")]
    noise: NoiseArg,
    /// Physical error rates (comma-separated).
    #[arg(long, value_delimiter = ',', default_value = "0.001")]
    p: Vec<f64>,
    /// Noise bias; `inf` for pure Z noise.
    #[arg(long, default_value_t = 0.5)]
    eta: f64,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 20)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV; the sidecar goes next to it. Stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FitModeArg {
    Crossing,
    CriticalExponent,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Z,
    X,
    Sum,
}

#[derive(Args)]
struct FitArgs {
    /// Result CSV written by `run`.
    input: PathBuf,
    #[arg(long, value_enum, default_value = "crossing")]
    mode: FitModeArg,
    #[arg(long, value_enum, default_value = "sum")]
    metric: MetricArg,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    r: u32,
    #[arg(long)]
    s: u32,
    /// Largest cyclic group order; defaults to 5·max(r, s).
    #[arg(long)]
    n_max: Option<u32>,
}

fn config_from(code: &CodeArgs, noise: NoiseArg, p: Vec<f64>, eta: f64) -> ExperimentConfig {
    let schedule = if code.schedule.eq_ignore_ascii_case("rows") {
        Schedule::AlternatingRows
    } else {
        Schedule::Homogeneous { word: code.schedule.clone() }
    };
    ExperimentConfig {
        family: code.family.into(),
        sizes: code.size.clone(),
        group: code.group.clone(),
        l: code.l,
        schedule,
        parallelised: code.parallelised,
        gauge_fixing: code.gauge_fixing,
        noise: noise.into(),
        p,
        eta,
        rounds: code.rounds,
        ..ExperimentConfig::default()
    }
}

fn build(args: &BuildArgs, faults: bool) -> Result<String, HarnessError> {
    let cfg = config_from(&args.code, args.noise, vec![args.p], args.eta);
    cfg.validate()?;
    let spec: CodeSpec = cfg.code_specs().remove(0);
    let (t, c) = spec.code()?;
    let rounds = cfg.rounds.or(spec.size).unwrap_or(1);
    let build_err = |e: decoder::DecoderError| HarnessError::Build(e.into());
    let needs_circuit = faults || !matches!(args.what, WhatArg::Code);
    if !needs_circuit {
        return Ok(c.to_text());
    }
    let circuit = harness::build_circuit(&cfg, &t, &c, rounds)?;
    if matches!(args.what, WhatArg::Circuit) && !faults {
        return Ok(circuit.to_text());
    }
    let mode = if cfg.gauge_fixing { VertexMode::GaugeFixing } else { VertexMode::Merged };
    let mx = DetectorModel::build(&c, &circuit, PauliType::X, mode).map_err(build_err)?;
    let mz = DetectorModel::build(&c, &circuit, PauliType::Z, mode).map_err(build_err)?;
    let noise = match cfg.noise {
        NoiseKind::Independent => NoiseModel::Independent { p0: args.p, eta: args.eta },
        _ => NoiseModel::Depolarising { p: args.p },
    };
    let dem = noise_sim::build_circuit_dem(&c, &circuit, &noise, [&mx, &mz]);
    if faults || matches!(args.what, WhatArg::Dem) {
        return Ok(dem.to_text());
    }
    let g = match args.what {
        WhatArg::GraphX => noise_sim::graph_index(PauliType::X),
        _ => noise_sim::graph_index(PauliType::Z),
    };
    Ok(MatchingGraph::from_dem(&dem, g).map_err(build_err)?.to_text())
}

fn run(args: &RunArgs) -> Result<(), HarnessError> {
    let cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| HarnessError::Config(e.to_string()))?
        }
        None => ExperimentConfig {
            trials: args.trials,
            m: args.m,
            seed: args.seed,
            output: args.output.clone(),
            ..config_from(&args.code, args.noise, args.p.clone(), args.eta)
        },
    };
    let workers = harness::workers_from_env()?;
    let rows = harness::run_experiment_with_workers(&cfg, workers)?;
    match &cfg.output {
        Some(path) => harness::write_outputs(path, &rows, &cfg, workers),
        None => harness::write_csv(&rows, std::io::stdout().lock()),
    }
}

fn fit(args: &FitArgs) -> Result<String, HarnessError> {
    let file = std::fs::File::open(&args.input).map_err(|e| HarnessError::Config(format!("{}: {e}", args.input.display())))?;
    let rows = harness::read_csv(file)?;
    let metric = match args.metric {
        MetricArg::Z => Metric::Z,
        MetricArg::X => Metric::X,
        MetricArg::Sum => Metric::Sum,
    };
    let mode = match args.mode {
        FitModeArg::Crossing => FitMode::Crossing,
        FitModeArg::CriticalExponent => FitMode::CriticalExponent,
    };
    let fit = harness::fit_threshold(&harness::fit_points(&rows, metric), mode)?;
    serde_json::to_string_pretty(&fit).map_err(|e| HarnessError::Build(e.into()))
}

fn solve(args: &SolveArgs) -> Result<String, HarnessError> {
    if args.r < 3 || args.s < 3 {
        return Err(HarnessError::Config("r and s must be at least 3".into()));
    }
    let n_max = args.n_max.unwrap_or(5 * args.r.max(args.s));
    let mut out = String::from("n x y\n");
    for sol in symmetry::solve_cyclic_scheduling(args.r, args.s, n_max) {
        out.push_str(&format!("{} {} {}\n", sol.n, sol.x, sol.y));
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Build(a) => build(a, false).map(Some),
        Command::EnumerateFaults(a) => build(a, true).map(Some),
        Command::Run(a) => run(a).map(|_| None),
        Command::Fit(a) => fit(a).map(Some),
        Command::SolveHomomorphisms(a) => solve(a).map(Some),
    };
    match result {
        Ok(text) => {
            if let Some(t) = text {
                let mut out = std::io::stdout().lock();
                let _ = out.write_all(t.as_bytes());
                if !t.ends_with('\n') {
                    let _ = out.write_all(b"\n");
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
