//! Experiment engine: configuration, seeded parallel Monte Carlo, binomial
//! statistics, threshold fits and CSV/JSON result emission.
//!
//! A run sweeps code sizes and physical error rates. Each grid point builds
//! one detector error model, samples trials from per-trial random streams,
//! decodes the X-type and Z-type detector graphs of the same sample and
//! counts logical failures. Counts are summed over batches, so results do
//! not depend on the number of worker threads.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};
use thiserror::Error;

use crate::circuits::{self, Circuit};
use crate::code::{self, PauliType, SpaceGraph, SubsystemCode};
use crate::decoder::{self, DetectorModel, MatchingGraph, Scratch, VertexMode};
use crate::noise_sim::{self, Dem, DemSampler, NoiseModel};
use crate::symmetry::TessellationGroup;
use crate::tessellation::{self, Tessellation};

/// Environment variable holding the worker-thread count.
pub const WORKERS_ENV: &str = "SUBSYS_WORKERS";

/// Version tag of the CSV column set.
pub const CSV_VERSION: u32 = 1;

/// Trials per parallel work item.
const BATCH: u64 = 64;

/// Harness errors.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("trial {trial} at grid point {point}: {source}")]
    Decode {
        point: usize,
        trial: u64,
        #[source]
        source: decoder::DecoderError,
    },
    #[error("no crossing of the failure curves inside the sampled range")]
    NoCrossingInRange,
    #[error("fit needs at least two sizes and three error rates")]
    InsufficientData,
    #[error(transparent)]
    Build(#[from] anyhow::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    /// Process exit code: 1 for configuration errors, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            _ => 2,
        }
    }
}

/// Code family of an experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Toric,
    Planar,
    Hyperbolic,
    SemiHyperbolic,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Toric => "toric",
            Family::Planar => "planar",
            Family::Hyperbolic => "hyperbolic",
            Family::SemiHyperbolic => "semi-hyperbolic",
        })
    }
}

/// Which code a grid point uses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodeSpec {
    pub family: Family,
    /// Lattice size for toric and planar codes.
    pub size: Option<usize>,
    /// Group file for hyperbolic and semi-hyperbolic codes.
    pub group: Option<PathBuf>,
    /// Refinement level for semi-hyperbolic codes.
    pub l: usize,
}

impl CodeSpec {
    /// Label written to the `L_or_code` column.
    pub fn label(&self) -> String {
        match (self.size, &self.group) {
            (Some(l), _) => l.to_string(),
            (None, Some(g)) => g.file_stem().map_or_else(|| g.display().to_string(), |s| s.to_string_lossy().into_owned()),
            (None, None) => "-".into(),
        }
    }

    /// Builds the tessellation.
    pub fn tessellation(&self) -> Result<Tessellation, HarnessError> {
        let group = || -> Result<TessellationGroup, HarnessError> {
            let path = self
                .group
                .as_ref()
                .ok_or_else(|| HarnessError::Config(format!("{} codes need a group file", self.family)))?;
            let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
            TessellationGroup::from_text(&text).map_err(|e| HarnessError::Config(e.to_string()))
        };
        let size = || self.size.ok_or_else(|| HarnessError::Config(format!("{} codes need a size", self.family)));
        let t = match self.family {
            Family::Toric => tessellation::build_toric(size()?),
            Family::Planar => tessellation::build_planar(size()?),
            Family::Hyperbolic => tessellation::from_group(&group()?),
            Family::SemiHyperbolic => {
                let base = tessellation::from_group(&group()?).map_err(|e| HarnessError::Config(e.to_string()))?;
                tessellation::refine_semi_hyperbolic(&base, self.l.max(1))
            }
        };
        t.map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Builds the subsystem code.
    pub fn code(&self) -> Result<(Tessellation, SubsystemCode), HarnessError> {
        let t = self.tessellation()?;
        let c = code::build_subsystem_code(&t).map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok((t, c))
    }
}

/// Measurement schedule of circuit-level runs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    /// Every face follows one schedule word such as `ZX` or `Z3X3`.
    Homogeneous { word: String },
    /// Faces alternate between the two lagged sub-schedules by row.
    AlternatingRows,
}

/// Noise model family and sweep parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    /// Circuit-level depolarising noise of strength `p`.
    Depolarising,
    /// Circuit-level independent X/Z noise of total strength `p` and bias `eta`.
    Independent,
    /// Independent errors of probability `p` on every data qubit, perfect
    /// measurements.
    CodeCapacity,
    /// Data and measurement errors with probability `p` over `rounds`
    /// rounds, then one perfect round.
    Phenomenological,
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::Depolarising => "depolarising",
            NoiseKind::Independent => "independent",
            NoiseKind::CodeCapacity => "code-capacity",
            NoiseKind::Phenomenological => "phenomenological",
        })
    }
}

/// Full description of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub family: Family,
    /// Sizes swept for toric and planar codes.
    pub sizes: Vec<usize>,
    pub group: Option<PathBuf>,
    pub l: usize,
    pub schedule: Schedule,
    pub parallelised: bool,
    /// Split fixable detectors (gauge fixing). For perfect-measurement
    /// models this fixes every X-type gauge operator.
    pub gauge_fixing: bool,
    pub noise: NoiseKind,
    pub p: Vec<f64>,
    /// Bias of the independent model; `f64::INFINITY` is pure Z noise and
    /// is written as `"inf"` in JSON.
    #[serde(with = "json_float")]
    pub eta: f64,
    /// Word repetitions for circuits, noisy rounds for the phenomenological
    /// model. `None` uses the lattice size.
    pub rounds: Option<usize>,
    pub trials: u64,
    /// Neighbour cap of the local matching decoder.
    pub m: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            family: Family::Toric,
            sizes: vec![4],
            group: None,
            l: 2,
            schedule: Schedule::Homogeneous { word: "ZX".into() },
            parallelised: true,
            gauge_fixing: true,
            noise: NoiseKind::Depolarising,
            p: vec![0.001],
            eta: 0.5,
            rounds: None,
            trials: 1000,
            m: 20,
            seed: 0,
            output: None,
        }
    }
}

impl ExperimentConfig {
    /// Checks the invariants of a configuration.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let err = |m: &str| Err(HarnessError::Config(m.into()));
        if self.p.is_empty() {
            return err("the error-rate grid is empty");
        }
        if self.p.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return err("error rates must lie in [0, 1]");
        }
        if self.eta.is_nan() || self.eta <= 0.0 {
            return err("eta must be positive");
        }
        if self.m == 0 {
            return err("m must be at least 1");
        }
        match self.family {
            Family::Toric | Family::Planar => {
                if self.sizes.is_empty() {
                    return err("the size grid is empty");
                }
                if self.sizes.iter().any(|&l| l < 2) {
                    return err("sizes must be at least 2");
                }
                if let Some(r) = self.rounds {
                    if self.sizes.len() > 1 && self.sizes.iter().any(|&l| r < l) && self.noise != NoiseKind::CodeCapacity {
                        return err("threshold sweeps need at least as many rounds as the largest size");
                    }
                }
            }
            Family::Hyperbolic | Family::SemiHyperbolic => {
                if self.group.is_none() {
                    return err("hyperbolic families need a group file");
                }
                if self.rounds.is_none() && self.noise != NoiseKind::CodeCapacity {
                    return err("hyperbolic families need an explicit round count");
                }
            }
        }
        if let Schedule::Homogeneous { word } = &self.schedule {
            circuits::parse_word(word).map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        if self.schedule == Schedule::AlternatingRows && !matches!(self.family, Family::Toric | Family::Planar) {
            return err("alternating rows need a toric or planar code");
        }
        Ok(())
    }

    /// Code of every size in the sweep.
    pub fn code_specs(&self) -> Vec<CodeSpec> {
        match self.family {
            Family::Toric | Family::Planar => self
                .sizes
                .iter()
                .map(|&s| CodeSpec {
                    family: self.family,
                    size: Some(s),
                    group: None,
                    l: self.l,
                })
                .collect(),
            _ => vec![CodeSpec {
                family: self.family,
                size: None,
                group: self.group.clone(),
                l: self.l,
            }],
        }
    }

    /// Value of the `schedule` column: the word (or `rows`) and the decoder
    /// mode.
    pub fn schedule_label(&self) -> String {
        let base = match (&self.noise, &self.schedule) {
            (NoiseKind::CodeCapacity | NoiseKind::Phenomenological, _) => "perfect".to_string(),
            (_, Schedule::Homogeneous { word }) => word.clone(),
            (_, Schedule::AlternatingRows) => "rows".to_string(),
        };
        format!("{base}/{}", if self.gauge_fixing { "gf" } else { "merged" })
    }

    fn noise_model(&self, p: f64) -> NoiseModel {
        match self.noise {
            NoiseKind::Independent => NoiseModel::Independent { p0: p, eta: self.eta },
            _ => NoiseModel::Depolarising { p },
        }
    }
}

/// JSON encoding of floats that may be infinite.
mod json_float {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            Repr::Number(*v).serialize(s)
        } else {
            Repr::Text(v.to_string()).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Failure counts of one grid point with their binomial statistics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialStats {
    /// Trials with a Z-type logical failure, seen by the X-type detectors.
    pub failures_z: u64,
    /// Trials with an X-type logical failure, seen by the Z-type detectors.
    pub failures_x: u64,
    /// Trials with any logical failure.
    pub failures_any: u64,
    pub trials: u64,
}

impl TrialStats {
    pub fn merge(self, o: Self) -> Self {
        Self {
            failures_z: self.failures_z + o.failures_z,
            failures_x: self.failures_x + o.failures_x,
            failures_any: self.failures_any + o.failures_any,
            trials: self.trials + o.trials,
        }
    }

    pub fn rate_z(&self) -> f64 {
        ratio(self.failures_z, self.trials)
    }

    pub fn rate_x(&self) -> f64 {
        ratio(self.failures_x, self.trials)
    }

    pub fn rate_any(&self) -> f64 {
        ratio(self.failures_any, self.trials)
    }

    /// 95% Clopper–Pearson interval of the rate of any logical failure.
    pub fn interval(&self) -> (f64, f64) {
        clopper_pearson(self.failures_any, self.trials, 0.95)
    }
}

fn ratio(k: u64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        k as f64 / n as f64
    }
}

/// Exact binomial (Clopper–Pearson) interval for `k` successes in `n`
/// trials at the given confidence level.
pub fn clopper_pearson(k: u64, n: u64, confidence: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let alpha = 1.0 - confidence;
    let (kf, nf) = (k as f64, n as f64);
    let low = if k == 0 {
        0.0
    } else {
        Beta::new(kf, nf - kf + 1.0).unwrap().inverse_cdf(alpha / 2.0)
    };
    let high = if k == n {
        1.0
    } else {
        Beta::new(kf + 1.0, nf - kf).unwrap().inverse_cdf(1.0 - alpha / 2.0)
    };
    (low, high)
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub family: String,
    #[serde(rename = "L_or_code")]
    pub l_or_code: String,
    pub l: usize,
    pub schedule: String,
    pub parallelised: bool,
    pub noise: String,
    pub p: f64,
    pub eta: f64,
    pub rounds: usize,
    pub trials: u64,
    pub fail_z: u64,
    pub fail_x: u64,
    pub rate_z: f64,
    pub rate_x: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
    pub wall_ms: u64,
}

/// Everything needed to sample and decode trials at one grid point.
pub struct PreparedPoint {
    pub dem: Dem,
    /// Matching graphs indexed by [`noise_sim::graph_index`]; `None` when the
    /// graph has no detectors.
    pub graphs: [Option<MatchingGraph>; 2],
    pub rounds: usize,
}

/// Builds the circuit of a circuit-level run.
pub fn build_circuit(config: &ExperimentConfig, t: &Tessellation, c: &SubsystemCode, reps: usize) -> Result<Circuit, HarnessError> {
    let circuit = match &config.schedule {
        Schedule::Homogeneous { word } => circuits::homogeneous_circuit(c, word, reps, config.parallelised),
        Schedule::AlternatingRows => {
            let coords = t
                .face_coords
                .as_ref()
                .ok_or_else(|| HarnessError::Config("tessellation has no face coordinates".into()))?;
            circuits::inhomogeneous_circuit(c, &circuits::alternating_rows(coords), reps)
        }
    };
    circuit.map_err(|e| HarnessError::Config(e.to_string()))
}

/// Builds the detector error model and matching graphs of one grid point.
pub fn prepare_point(config: &ExperimentConfig, spec: &CodeSpec, p: f64) -> Result<PreparedPoint, HarnessError> {
    let (t, c) = spec.code()?;
    let rounds = config.rounds.or(spec.size).unwrap_or(1);
    let decode_err = |e: decoder::DecoderError| HarnessError::Build(anyhow::anyhow!(e));
    let dem = match config.noise {
        NoiseKind::Depolarising | NoiseKind::Independent => {
            let circuit = build_circuit(config, &t, &c, rounds)?;
            let mode = if config.gauge_fixing { VertexMode::GaugeFixing } else { VertexMode::Merged };
            let mx = DetectorModel::build(&c, &circuit, PauliType::X, mode).map_err(decode_err)?;
            let mz = DetectorModel::build(&c, &circuit, PauliType::Z, mode).map_err(decode_err)?;
            noise_sim::build_circuit_dem(&c, &circuit, &config.noise_model(p), [&mx, &mz])
        }
        NoiseKind::CodeCapacity | NoiseKind::Phenomenological => {
            let fixed = if config.gauge_fixing {
                code::gauge_fix_subspace(&c, &c.gauge_ops_of(PauliType::X)).map_err(|e| HarnessError::Config(e.to_string()))?
            } else {
                c.clone()
            };
            let space = SpaceGraph::new(&fixed, PauliType::X);
            match config.noise {
                NoiseKind::CodeCapacity => decoder::code_capacity_dem(&fixed, &space, p),
                _ => decoder::phenomenological_dem(&fixed, &space, p, p, rounds),
            }
        }
    };
    let mut graphs = [None, None];
    for (g, slot) in graphs.iter_mut().enumerate() {
        if dem.num_detectors[g] > 0 {
            *slot = Some(MatchingGraph::from_dem(&dem, g).map_err(decode_err)?);
        }
    }
    Ok(PreparedPoint { dem, graphs, rounds })
}

/// Seed of the random streams of grid point `index`.
pub fn point_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `trials` trials of a prepared point on the current thread pool.
pub fn run_trials(point: &PreparedPoint, index: usize, seed: u64, trials: u64, m: usize) -> Result<TrialStats, HarnessError> {
    let sampler = DemSampler::new(&point.dem);
    let batches = trials.div_ceil(BATCH);
    (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut sample_scratch = sampler.scratch();
            let mut scratches: Vec<Option<Scratch>> = point.graphs.iter().map(|g| g.as_ref().map(Scratch::new)).collect();
            let mut stats = TrialStats::default();
            for trial in b * BATCH..((b + 1) * BATCH).min(trials) {
                let mut rng = noise_sim::trial_rng(seed, trial);
                let sample = sampler.sample(&mut rng, &mut sample_scratch);
                let mut failed = [false; 2];
                for g in 0..2 {
                    let predicted = match (&point.graphs[g], &mut scratches[g]) {
                        (Some(graph), Some(scratch)) => {
                            decoder::decode_with_retry(graph, &sample.defects[g], m, scratch)
                                .map_err(|source| HarnessError::Decode { point: index, trial, source })?
                                .observables
                        }
                        _ => Vec::new(),
                    };
                    failed[g] = predicted != sample.observables[g];
                }
                stats.trials += 1;
                stats.failures_z += u64::from(failed[0]);
                stats.failures_x += u64::from(failed[1]);
                stats.failures_any += u64::from(failed[0] || failed[1]);
            }
            Ok(stats)
        })
        .try_reduce(TrialStats::default, |a, b| Ok(a.merge(b)))
}

/// Worker count from [`WORKERS_ENV`], if set.
pub fn workers_from_env() -> Result<Option<usize>, HarnessError> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| HarnessError::Config(format!("{WORKERS_ENV} must be a positive integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

/// Runs every grid point with `workers` threads (all cores when `None`).
pub fn run_experiment_with_workers(config: &ExperimentConfig, workers: Option<usize>) -> Result<Vec<ResultRow>, HarnessError> {
    config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| HarnessError::Build(e.into()))?;
    let mut rows = Vec::new();
    let mut index = 0;
    for spec in config.code_specs() {
        for &p in &config.p {
            let start = Instant::now();
            let point = prepare_point(config, &spec, p)?;
            let seed = point_seed(config.seed, index);
            let stats = pool.install(|| run_trials(&point, index, seed, config.trials, config.m))?;
            let (ci_low, ci_high) = stats.interval();
            rows.push(ResultRow {
                family: config.family.to_string(),
                l_or_code: spec.label(),
                l: config.l,
                schedule: config.schedule_label(),
                parallelised: config.parallelised,
                noise: config.noise.to_string(),
                p,
                eta: config.eta,
                rounds: point.rounds,
                trials: stats.trials,
                fail_z: stats.failures_z,
                fail_x: stats.failures_x,
                rate_z: stats.rate_z(),
                rate_x: stats.rate_x(),
                ci_low,
                ci_high,
                seed: config.seed,
                wall_ms: start.elapsed().as_millis() as u64,
            });
            index += 1;
        }
    }
    Ok(rows)
}

/// Runs every grid point with the worker count from [`WORKERS_ENV`].
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRow>, HarnessError> {
    run_experiment_with_workers(config, workers_from_env()?)
}

/// Writes rows as CSV.
pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads rows written by [`write_csv`].
pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<ResultRow>, HarnessError> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(HarnessError::from)).collect()
}

/// JSON sidecar echoing the configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sidecar {
    pub csv_version: u32,
    pub config: ExperimentConfig,
    pub workers: Option<usize>,
}

/// Path of the JSON sidecar of a CSV file.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Writes the CSV and its JSON sidecar.
pub fn write_outputs(path: &Path, rows: &[ResultRow], config: &ExperimentConfig, workers: Option<usize>) -> Result<(), HarnessError> {
    write_csv(rows, std::fs::File::create(path)?)?;
    let sidecar = Sidecar {
        csv_version: CSV_VERSION,
        config: config.clone(),
        workers,
    };
    let json = serde_json::to_string_pretty(&sidecar).map_err(|e| HarnessError::Build(e.into()))?;
    std::fs::write(sidecar_path(path), json)?;
    Ok(())
}

/// One sampled failure rate used by the fits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitPoint {
    pub size: f64,
    pub p: f64,
    pub rate: f64,
    pub trials: u64,
}

/// Which failure rate of a row the fits use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Z,
    X,
    /// `rate_z + rate_x`.
    Sum,
}

/// Extracts fit points from rows whose `L_or_code` is numeric.
pub fn fit_points(rows: &[ResultRow], metric: Metric) -> Vec<FitPoint> {
    rows.iter()
        .filter_map(|r| {
            let size: f64 = r.l_or_code.parse().ok()?;
            let rate = match metric {
                Metric::Z => r.rate_z,
                Metric::X => r.rate_x,
                Metric::Sum => r.rate_z + r.rate_x,
            };
            Some(FitPoint {
                size,
                p: r.p,
                rate,
                trials: r.trials,
            })
        })
        .collect()
}

/// Threshold fitting method.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMode {
    /// Pairwise crossings of interpolated log-rate curves.
    Crossing,
    /// Least squares of `A + B x + C x²` with `x = (p − p_th) L^{1/ν}`.
    CriticalExponent,
}

/// Result of a threshold fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdFit {
    pub p_th: f64,
    pub std_err: f64,
    /// Fitted exponent (critical-exponent mode only).
    pub nu: Option<f64>,
    /// Number of pairwise crossings (crossing mode) or points (critical
    /// exponent mode) used.
    pub support: usize,
}

/// Estimates the threshold of rows grouped by size.
pub fn fit_threshold(points: &[FitPoint], mode: FitMode) -> Result<ThresholdFit, HarnessError> {
    let crossing = fit_crossing(points)?;
    match mode {
        FitMode::Crossing => Ok(crossing),
        FitMode::CriticalExponent => fit_critical_exponent(points, crossing.p_th),
    }
}

fn by_size(points: &[FitPoint]) -> Vec<(f64, Vec<FitPoint>)> {
    let mut sizes: Vec<f64> = points.iter().map(|q| q.size).collect();
    sizes.sort_by(f64::total_cmp);
    sizes.dedup();
    sizes
        .into_iter()
        .map(|s| {
            let mut v: Vec<FitPoint> = points.iter().copied().filter(|q| q.size == s).collect();
            v.sort_by(|a, b| a.p.total_cmp(&b.p));
            (s, v)
        })
        .collect()
}

/// Pairwise crossings: for each pair of sizes, the first sign change of the
/// log-rate difference over the common error rates, located by linear
/// interpolation in `p`. The estimate is the mean over pairs and the error
/// is the standard error of that mean (zero for a single pair).
fn fit_crossing(points: &[FitPoint]) -> Result<ThresholdFit, HarnessError> {
    let groups = by_size(points);
    if groups.len() < 2 || groups.iter().any(|g| g.1.len() < 3) {
        return Err(HarnessError::InsufficientData);
    }
    let log_rate = |q: &FitPoint| q.rate.max(0.5 / q.trials.max(1) as f64).ln();
    let mut crossings = Vec::new();
    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            let small = &groups[i].1;
            let large = &groups[j].1;
            let common: Vec<(f64, f64)> = small
                .iter()
                .filter_map(|a| large.iter().find(|b| b.p == a.p).map(|b| (a.p, log_rate(b) - log_rate(a))))
                .collect();
            for w in common.windows(2) {
                let ((p0, d0), (p1, d1)) = (w[0], w[1]);
                if d0 < 0.0 && d1 >= 0.0 {
                    crossings.push(p0 + (p1 - p0) * (-d0) / (d1 - d0));
                    break;
                }
            }
        }
    }
    if crossings.is_empty() {
        return Err(HarnessError::NoCrossingInRange);
    }
    let n = crossings.len() as f64;
    let mean = crossings.iter().sum::<f64>() / n;
    let var = if crossings.len() > 1 {
        crossings.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(ThresholdFit {
        p_th: mean,
        std_err: (var / n).sqrt(),
        nu: None,
        support: crossings.len(),
    })
}

/// Weighted residual sum of squares of the quadratic scaling form at
/// `(p_th, ν)`, with `A, B, C` solved by linear least squares.
fn scaling_ssr(points: &[FitPoint], p_th: f64, nu: f64) -> f64 {
    if nu.is_nan() || nu <= 0.05 {
        return f64::INFINITY;
    }
    let rows: Vec<(f64, f64, f64)> = points
        .iter()
        .map(|q| {
            let x = (q.p - p_th) * q.size.powf(1.0 / nu);
            let var = (q.rate.max(1e-3) * (1.0 - q.rate).max(1e-3) / q.trials.max(1) as f64).max(1e-12);
            (x, q.rate, 1.0 / var)
        })
        .collect();
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    for &(x, y, w) in &rows {
        let v = [1.0, x, x * x];
        for a in 0..3 {
            atb[a] += w * v[a] * y;
            for b in 0..3 {
                ata[a][b] += w * v[a] * v[b];
            }
        }
    }
    let Some(coef) = solve3(ata, atb) else { return f64::INFINITY };
    rows.iter().map(|&(x, y, w)| w * (y - coef[0] - coef[1] * x - coef[2] * x * x).powi(2)).sum()
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..3 {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..3 {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    Some([b[0] / a[0][0], b[1] / a[1][1], b[2] / a[2][2]])
}

/// Nelder–Mead minimisation of a function of two variables.
fn nelder_mead(f: impl Fn(f64, f64) -> f64, start: (f64, f64), step: (f64, f64), iters: usize) -> (f64, f64) {
    let eval = |p: (f64, f64)| (p, f(p.0, p.1));
    let mut s = [eval(start), eval((start.0 + step.0, start.1)), eval((start.0, start.1 + step.1))];
    for _ in 0..iters {
        s.sort_by(|a, b| a.1.total_cmp(&b.1));
        let c = ((s[0].0 .0 + s[1].0 .0) / 2.0, (s[0].0 .1 + s[1].0 .1) / 2.0);
        let at = |t: f64| (c.0 + t * (s[2].0 .0 - c.0), c.1 + t * (s[2].0 .1 - c.1));
        let r = eval(at(-1.0));
        if r.1 < s[0].1 {
            let e = eval(at(-2.0));
            s[2] = if e.1 < r.1 { e } else { r };
        } else if r.1 < s[1].1 {
            s[2] = r;
        } else {
            let k = eval(at(if r.1 < s[2].1 { -0.5 } else { 0.5 }));
            if k.1 < s[2].1.min(r.1) {
                s[2] = k;
            } else {
                let b = s[0].0;
                for v in s.iter_mut().skip(1) {
                    *v = eval(((v.0 .0 + b.0) / 2.0, (v.0 .1 + b.1) / 2.0));
                }
            }
        }
    }
    s.sort_by(|a, b| a.1.total_cmp(&b.1));
    s[0].0
}

/// Critical-exponent fit started from `p0`. The standard error of `p_th`
/// comes from the curvature of the weighted residual sum of squares, scaled
/// by the reduced chi-square.
fn fit_critical_exponent(points: &[FitPoint], p0: f64) -> Result<ThresholdFit, HarnessError> {
    if points.len() < 6 {
        return Err(HarnessError::InsufficientData);
    }
    let f = |pt: f64, nu: f64| scaling_ssr(points, pt, nu);
    let span = points.iter().map(|q| q.p).fold(0.0, f64::max) - points.iter().map(|q| q.p).fold(f64::INFINITY, f64::min);
    let mut best = ((p0, 1.0), f(p0, 1.0));
    for nu0 in [0.7, 1.0, 1.5, 2.0] {
        let cand = nelder_mead(f, (p0, nu0), (span * 0.1, 0.2), 400);
        let v = f(cand.0, cand.1);
        if v < best.1 {
            best = (cand, v);
        }
    }
    let ((pt, nu), ssr) = best;
    let (hp, hn) = (span * 1e-3, nu * 1e-3);
    let h11 = (f(pt + hp, nu) - 2.0 * ssr + f(pt - hp, nu)) / (hp * hp);
    let h22 = (f(pt, nu + hn) - 2.0 * ssr + f(pt, nu - hn)) / (hn * hn);
    let h12 = (f(pt + hp, nu + hn) - f(pt + hp, nu - hn) - f(pt - hp, nu + hn) + f(pt - hp, nu - hn)) / (4.0 * hp * hn);
    let det = h11 * h22 - h12 * h12;
    let dof = (points.len() as f64 - 5.0).max(1.0);
    let chi2 = (ssr / dof).max(1.0);
    let std_err = if det > 0.0 { (2.0 * h22 / det * chi2).sqrt() } else { f64::NAN };
    Ok(ThresholdFit {
        p_th: pt,
        std_err,
        nu: Some(nu),
        support: points.len(),
    })
}

/// Total threshold of a biased noise model from the Z and X thresholds:
/// the smaller of `p_Z + p_Z(1 − p_Z)/η` and `p_X + p_X(1 − p_X)η`. At
/// `η = ∞` this is the Z threshold.
pub fn bias_threshold_combine(p_z_th: f64, p_x_th: f64, eta: f64) -> f64 {
    let z_branch = if eta.is_infinite() { p_z_th } else { p_z_th + p_z_th * (1.0 - p_z_th) / eta };
    let x_branch = p_x_th + p_x_th * (1.0 - p_x_th) * eta;
    z_branch.min(x_branch)
}

/// Failure rate of `⌊k_target/k⌋` independent copies of a code with `k`
/// logical qubits and failure rate `p`.
pub fn k_adjusted_rate(p: f64, k: usize, k_target: usize) -> f64 {
    let copies = (k_target / k.max(1)) as i32;
    1.0 - (1.0 - p).powi(copies)
}

/// Toric size matching the encoding rate of a semi-hyperbolic code with
/// `k` logical qubits at refinement `l`: `2l·sqrt(1 − 2/k)`.
pub fn rate_matched_size(l: usize, k: usize) -> f64 {
    2.0 * l as f64 * (1.0 - 2.0 / k as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clopper_pearson_edges() {
        assert_eq!(clopper_pearson(0, 10, 0.95).0, 0.0);
        assert_eq!(clopper_pearson(10, 10, 0.95).1, 1.0);
        let (lo, hi) = clopper_pearson(5, 10, 0.95);
        assert!((lo - 0.187_086_5).abs() < 1e-6 && (hi - 0.812_913_5).abs() < 1e-6);
    }

    #[test]
    fn bias_symmetric() {
        let t = 0.01;
        assert!((bias_threshold_combine(t, t, 1.0) - (t + t * (1.0 - t))).abs() < 1e-15);
        assert_eq!(bias_threshold_combine(0.02, 0.001, f64::INFINITY), 0.02);
    }

    #[test]
    fn rate_matched_example() {
        assert!((rate_matched_size(2, 338) - 3.988).abs() < 1e-3);
    }

    #[test]
    fn identical_curves_have_no_crossing() {
        let pts: Vec<FitPoint> = [4.0, 6.0]
            .iter()
            .flat_map(|&s| {
                [0.01, 0.02, 0.03].map(|p| FitPoint {
                    size: s,
                    p,
                    rate: p * 3.0,
                    trials: 1000,
                })
            })
            .collect();
        assert!(matches!(fit_threshold(&pts, FitMode::Crossing), Err(HarnessError::NoCrossingInRange)));
    }
}
