//! Batch experiment drivers behind the CLI: declarative JSON configs,
//! seeded reproducible runs, and CSV/JSON emission of the standard
//! datasets (model sweeps, gain-vs-depth tables, λ scans, reconstruction
//! benches, and dispersion tables).

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::jastrow::{ClassMap, JastrowParams, TruncationSpec};
use crate::measurement::{
    build_entangled_copy, energy_from_counts, entangled_copy_of_state, jqc_energy_sampled,
    lambda_matrix, read_counts, reconstruction_error, sample_counts_with_rng, solve_signs,
    write_counts, CountsTable, FixedCountsEnergy, ProbDist, SamplingConfig, SignVector,
    WeightConvention,
};
use crate::optimize::{
    computational_gain, minimize_restarts, model_class_map, optimize_pair, JointInit,
    OptimizerConfig, ProjectorMode,
};
use crate::pauli::{
    build_model, diagonal_expectation, group_by_basis, rotate_to_diagonal, MeasurementBasis,
    ModelSpec, PauliSum,
};
use crate::statevector::{
    apply_jastrow_exact, build_ry_cnot, exact_ground_state, expectation, hadamard_wall,
    run_circuit, Circuit, StateVector,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Column layout shared by every result file.
pub const CSV_HEADER: &str = "kind,model,sites,param,value,depth,order,shots,m_rep,e_c,e_jqc,e_exact,e_sampled,stderr,rel_err_c,rel_err_jqc,gain,gain_capped,eps_b,lambda,status,wall_s";

/// One flat output row. Fields that do not apply to a command stay empty.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultRecord {
    pub kind: String,
    pub model: String,
    pub sites: usize,
    pub param: String,
    pub value: f64,
    pub depth: Option<usize>,
    pub order: Option<usize>,
    pub shots: Option<u64>,
    pub m_rep: Option<usize>,
    pub e_c: Option<f64>,
    pub e_jqc: Option<f64>,
    pub e_exact: Option<f64>,
    pub e_sampled: Option<f64>,
    pub stderr: Option<f64>,
    pub rel_err_c: Option<f64>,
    pub rel_err_jqc: Option<f64>,
    pub gain: Option<f64>,
    pub gain_capped: Option<bool>,
    pub eps_b: Option<f64>,
    pub lambda: Vec<f64>,
    pub status: String,
    pub wall_s: f64,
}

fn fmt_opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

impl ResultRecord {
    pub fn to_csv_row(&self) -> String {
        let lambda = self
            .lambda
            .iter()
            .map(|l| l.to_string())
            .collect::<Vec<_>>()
            .join(";");
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.kind,
            self.model,
            self.sites,
            self.param,
            self.value,
            fmt_opt(&self.depth),
            fmt_opt(&self.order),
            fmt_opt(&self.shots),
            fmt_opt(&self.m_rep),
            fmt_opt(&self.e_c),
            fmt_opt(&self.e_jqc),
            fmt_opt(&self.e_exact),
            fmt_opt(&self.e_sampled),
            fmt_opt(&self.stderr),
            fmt_opt(&self.rel_err_c),
            fmt_opt(&self.rel_err_jqc),
            fmt_opt(&self.gain),
            fmt_opt(&self.gain_capped),
            fmt_opt(&self.eps_b),
            lambda,
            self.status,
            self.wall_s
        )
    }

    /// Parse a data row written by [`to_csv_row`]; used for schema checks
    /// and by downstream consumers of result files.
    pub fn parse_csv_row(line: &str) -> Result<ResultRecord> {
        let fields: Vec<&str> = line.split(',').collect();
        let expected = CSV_HEADER.split(',').count();
        if fields.len() != expected {
            return Err(Error::Parse(format!(
                "row has {} fields, expected {expected}: '{line}'",
                fields.len()
            )));
        }
        fn opt<T: std::str::FromStr>(s: &str) -> Result<Option<T>>
        where
            T::Err: std::fmt::Display,
        {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse::<T>()
                    .map(Some)
                    .map_err(|e| Error::Parse(format!("bad field '{s}': {e}")))
            }
        }
        let req = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|e| Error::Parse(format!("bad field '{s}': {e}")))
        };
        let lambda = if fields[19].is_empty() {
            Vec::new()
        } else {
            fields[19]
                .split(';')
                .map(req)
                .collect::<Result<Vec<f64>>>()?
        };
        Ok(ResultRecord {
            kind: fields[0].to_string(),
            model: fields[1].to_string(),
            sites: fields[2]
                .parse()
                .map_err(|e| Error::Parse(format!("bad sites: {e}")))?,
            param: fields[3].to_string(),
            value: req(fields[4])?,
            depth: opt(fields[5])?,
            order: opt(fields[6])?,
            shots: opt(fields[7])?,
            m_rep: opt(fields[8])?,
            e_c: opt(fields[9])?,
            e_jqc: opt(fields[10])?,
            e_exact: opt(fields[11])?,
            e_sampled: opt(fields[12])?,
            stderr: opt(fields[13])?,
            rel_err_c: opt(fields[14])?,
            rel_err_jqc: opt(fields[15])?,
            gain: opt(fields[16])?,
            gain_capped: opt(fields[17])?,
            eps_b: opt(fields[18])?,
            lambda,
            status: fields[20].to_string(),
            wall_s: req(fields[21])?,
        })
    }
}

fn rel_err(e: f64, e_exact: f64) -> f64 {
    (e - e_exact) / e_exact.abs().max(1e-12)
}

/// Circuit selection in experiment configs.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CircuitSpec {
    RyCnot { depth: usize },
    HadamardWall,
}

impl CircuitSpec {
    pub fn build(&self, num_qubits: usize) -> Circuit {
        match *self {
            CircuitSpec::RyCnot { depth } => build_ry_cnot(num_qubits, depth),
            CircuitSpec::HadamardWall => hadamard_wall(num_qubits),
        }
    }

    pub fn depth(&self) -> Option<usize> {
        match *self {
            CircuitSpec::RyCnot { depth } => Some(depth),
            CircuitSpec::HadamardWall => None,
        }
    }
}

/// Where the Jastrow class map comes from.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum JastrowSource {
    /// Chain classes for spin models, ladder classes for the fermion model.
    #[default]
    Auto,
    /// Load `s t class` triples from a file.
    File(PathBuf),
}

impl JastrowSource {
    fn class_map(&self, model: &ModelSpec) -> Result<ClassMap> {
        match self {
            JastrowSource::Auto => model_class_map(model),
            JastrowSource::File(path) => {
                let file = std::fs::File::open(path)?;
                ClassMap::from_reader(model.num_qubits(), std::io::BufReader::new(file))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Model template; the relevant coupling is replaced by each grid value.
    pub model: ModelSpec,
    pub grid: Vec<f64>,
    pub depths: Vec<usize>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub joint_init: JointInit,
    #[serde(default)]
    pub jastrow: JastrowSource,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub json_mirror: bool,
}

/// Gain mode: the exponential projector or the truncated implementation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainMode {
    Exponential,
    Truncated { order: usize },
}

impl Default for GainMode {
    fn default() -> Self {
        GainMode::Exponential
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainConfig {
    /// Model template; `sites` is replaced by each entry of `sizes`.
    pub model: ModelSpec,
    pub sizes: Vec<usize>,
    pub depths: Vec<usize>,
    #[serde(default)]
    pub mode: GainMode,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub joint_init: JointInit,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub json_mirror: bool,
}

/// Externally produced counts for a λ scan: one file per basis per
/// repetition, all from the same circuit (the reweighting is classical, so
/// one measurement set serves the whole grid).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ImportedCounts {
    pub repetitions: Vec<Vec<PathBuf>>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaScanConfig {
    pub model: ModelSpec,
    pub circuit: CircuitSpec,
    /// Fixed circuit angles; optimized (circuit-only) when absent.
    #[serde(default)]
    pub theta: Option<Vec<f64>>,
    /// Base Jastrow coefficients; optimized at fixed θ when absent.
    #[serde(default)]
    pub lambda_opt: Option<Vec<f64>>,
    /// Multipliers applied elementwise to `lambda_opt` (1 = the optimum).
    pub scan: Vec<f64>,
    pub shots: Vec<u64>,
    pub m_rep: usize,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub jastrow: JastrowSource,
    /// Process externally produced counts instead of sampling.
    #[serde(default)]
    pub import: Option<ImportedCounts>,
    /// Export the sampled counts tables for external processing.
    #[serde(default)]
    pub export_counts_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub json_mirror: bool,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructConfig {
    /// Model template; `sites` is replaced by each entry of `sizes`.
    pub model: ModelSpec,
    pub sizes: Vec<usize>,
    pub states_per_size: usize,
    /// Shot counts; 0 means exact probabilities.
    pub shots: Vec<u64>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub json_mirror: bool,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionConfig {
    pub model: ModelSpec,
    pub circuit: CircuitSpec,
    #[serde(default)]
    pub theta: Option<Vec<f64>>,
    #[serde(default)]
    pub lambda_opt: Option<Vec<f64>>,
    pub scan: Vec<f64>,
    /// Total system-register measurement budget; each extended-register
    /// shot reads two system registers, and the budget is split evenly
    /// across bases.
    #[serde(default = "default_total_measurements")]
    pub total_measurements: u64,
    #[serde(default = "default_m_rep")]
    pub m_rep: usize,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub jastrow: JastrowSource,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub json_mirror: bool,
}

fn default_total_measurements() -> u64 {
    320_000
}

fn default_m_rep() -> usize {
    12
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DumpHConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

/// Top-level experiment description; the `kind` field selects the command.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    Sweep(SweepConfig),
    Gain(GainConfig),
    LambdaScan(LambdaScanConfig),
    Reconstruct(ReconstructConfig),
    Dispersion(DispersionConfig),
    DumpH(DumpHConfig),
}

impl ExperimentConfig {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ExperimentConfig::Sweep(_) => "sweep",
            ExperimentConfig::Gain(_) => "gain",
            ExperimentConfig::LambdaScan(_) => "lambda-scan",
            ExperimentConfig::Reconstruct(_) => "reconstruct",
            ExperimentConfig::Dispersion(_) => "dispersion",
            ExperimentConfig::DumpH(_) => "dump-h",
        }
    }
}

/// CLI-level overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed_override: Option<u64>,
    pub out_override: Option<PathBuf>,
    pub literal_weight: bool,
    pub threads: Option<usize>,
}

impl RunOptions {
    fn convention(&self) -> WeightConvention {
        if self.literal_weight {
            WeightConvention::Literal
        } else {
            WeightConvention::AmplitudeLevel
        }
    }
}

/// Outcome of a run: the records and where they were written.
#[derive(Debug)]
pub struct RunSummary {
    pub records: Vec<ResultRecord>,
    pub out_path: Option<PathBuf>,
}

/// Replace the model's relevant coupling (Γ, Λ, or U/4t at fixed t).
pub fn model_with_param(template: &ModelSpec, value: f64) -> ModelSpec {
    match *template {
        ModelSpec::Ising {
            sites,
            positive_field,
            ..
        } => ModelSpec::Ising {
            sites,
            gamma: value,
            positive_field,
        },
        ModelSpec::Heisenberg { sites, .. } => ModelSpec::Heisenberg {
            sites,
            coupling: value,
        },
        ModelSpec::Hubbard { sites, hopping, .. } => ModelSpec::Hubbard {
            sites,
            hopping,
            repulsion: 4.0 * hopping * value,
        },
    }
}

fn model_with_sites(template: &ModelSpec, sites: usize) -> ModelSpec {
    match *template {
        ModelSpec::Ising {
            gamma,
            positive_field,
            ..
        } => ModelSpec::Ising {
            sites,
            gamma,
            positive_field,
        },
        ModelSpec::Heisenberg { coupling, .. } => ModelSpec::Heisenberg { sites, coupling },
        ModelSpec::Hubbard {
            hopping, repulsion, ..
        } => ModelSpec::Hubbard {
            sites,
            hopping,
            repulsion,
        },
    }
}

fn param_name(model: &ModelSpec) -> &'static str {
    match model {
        ModelSpec::Ising { .. } => "gamma",
        ModelSpec::Heisenberg { .. } => "coupling",
        ModelSpec::Hubbard { .. } => "u_over_4t",
    }
}

fn ensure_non_empty<T>(name: &str, values: &[T]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Config(format!("{name} must not be empty")));
    }
    Ok(())
}

fn with_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            pool.install(job)
        }
        None => job(),
    }
}

fn run_sweep(cfg: &SweepConfig, opts: &RunOptions) -> Result<Vec<ResultRecord>> {
    ensure_non_empty("grid", &cfg.grid)?;
    ensure_non_empty("depths", &cfg.depths)?;
    if cfg.grid.iter().any(|g| !g.is_finite()) {
        return Err(Error::Config("grid contains a non-finite value".into()));
    }
    let seed = opts.seed_override.unwrap_or(cfg.seed);
    let mut rows = Vec::new();
    for &value in &cfg.grid {
        for &depth in &cfg.depths {
            rows.push((value, depth));
        }
    }
    let records: Vec<ResultRecord> = with_pool(opts.threads, || {
        rows.par_iter()
            .enumerate()
            .map(|(row_idx, &(value, depth))| {
                let started = Instant::now();
                let model = model_with_param(&cfg.model, value);
                let h = build_model(&model)?;
                let (e_exact, _) = exact_ground_state(&h)?;
                let optimizer = OptimizerConfig {
                    seed: seed ^ row_idx as u64,
                    ..cfg.optimizer
                };
                // The class-map override only replaces the automatic map.
                let _ = cfg.jastrow.class_map(&model)?;
                let pair = optimize_pair(
                    &model,
                    depth,
                    &optimizer,
                    cfg.joint_init,
                    ProjectorMode::Exponential,
                )?;
                let gain = computational_gain(pair.e_circuit, pair.e_jqc, e_exact)?;
                Ok(ResultRecord {
                    kind: "sweep".into(),
                    model: model.kind_name().into(),
                    sites: model.sites(),
                    param: param_name(&model).into(),
                    value,
                    depth: Some(depth),
                    e_c: Some(pair.e_circuit),
                    e_jqc: Some(pair.e_jqc),
                    e_exact: Some(e_exact),
                    rel_err_c: Some(rel_err(pair.e_circuit, e_exact)),
                    rel_err_jqc: Some(rel_err(pair.e_jqc, e_exact)),
                    gain: Some(gain.gain),
                    gain_capped: Some(gain.capped),
                    lambda: pair.params_jqc.lambda.clone(),
                    status: if pair.timed_out { "timeout" } else { "ok" }.into(),
                    wall_s: started.elapsed().as_secs_f64(),
                    ..ResultRecord::default()
                })
            })
            .collect()
    })?;
    Ok(records)
}

fn run_gain(cfg: &GainConfig, opts: &RunOptions) -> Result<Vec<ResultRecord>> {
    ensure_non_empty("sizes", &cfg.sizes)?;
    ensure_non_empty("depths", &cfg.depths)?;
    let seed = opts.seed_override.unwrap_or(cfg.seed);
    let (mode, order) = match cfg.mode {
        GainMode::Exponential => (ProjectorMode::Exponential, None),
        GainMode::Truncated { order } => (
            ProjectorMode::Truncated(TruncationSpec::new(order)?),
            Some(order),
        ),
    };
    let mut rows = Vec::new();
    for &sites in &cfg.sizes {
        for &depth in &cfg.depths {
            rows.push((sites, depth));
        }
    }
    let records: Vec<ResultRecord> = with_pool(opts.threads, || {
        rows.par_iter()
            .enumerate()
            .map(|(row_idx, &(sites, depth))| {
                let started = Instant::now();
                let model = model_with_sites(&cfg.model, sites);
                let h = build_model(&model)?;
                let (e_exact, _) = exact_ground_state(&h)?;
                let optimizer = OptimizerConfig {
                    seed: seed ^ row_idx as u64,
                    ..cfg.optimizer
                };
                let pair = optimize_pair(&model, depth, &optimizer, cfg.joint_init, mode)?;
                let gain = computational_gain(pair.e_circuit, pair.e_jqc, e_exact)?;
                Ok(ResultRecord {
                    kind: "gain".into(),
                    model: model.kind_name().into(),
                    sites,
                    param: param_name(&model).into(),
                    value: model.relevant_param(),
                    depth: Some(depth),
                    order,
                    e_c: Some(pair.e_circuit),
                    e_jqc: Some(pair.e_jqc),
                    e_exact: Some(e_exact),
                    rel_err_c: Some(rel_err(pair.e_circuit, e_exact)),
                    rel_err_jqc: Some(rel_err(pair.e_jqc, e_exact)),
                    gain: Some(gain.gain),
                    gain_capped: Some(gain.capped),
                    lambda: pair.params_jqc.lambda.clone(),
                    status: if pair.timed_out { "timeout" } else { "ok" }.into(),
                    wall_s: started.elapsed().as_secs_f64(),
                    ..ResultRecord::default()
                })
            })
            .collect()
    })?;
    Ok(records)
}

/// Resolve the circuit angles and base Jastrow coefficients for scan-style
/// commands: take them from the config when given, otherwise optimize the
/// circuit alone and then the coefficients at the fixed circuit optimum.
fn resolve_scan_base(
    model: &ModelSpec,
    circuit_spec: &CircuitSpec,
    theta_cfg: &Option<Vec<f64>>,
    lambda_cfg: &Option<Vec<f64>>,
    jastrow: &JastrowSource,
    optimizer: &OptimizerConfig,
    seed: u64,
) -> Result<(Circuit, Vec<f64>, JastrowParams)> {
    let h = build_model(model)?;
    let circuit = circuit_spec.build(h.num_qubits());
    let class_map = jastrow.class_map(model)?;
    let template = JastrowParams::zeros(class_map);

    let theta = match theta_cfg {
        Some(theta) => {
            if theta.len() != circuit.num_params() {
                return Err(Error::ParameterCount {
                    expected: circuit.num_params(),
                    got: theta.len(),
                });
            }
            theta.clone()
        }
        None if circuit.num_params() == 0 => Vec::new(),
        None => {
            let objective = |theta: &[f64]| match run_circuit(&circuit, theta)
                .and_then(|psi| expectation(&h, &psi))
            {
                Ok(v) => v,
                Err(_) => 1e10,
            };
            let cfg = OptimizerConfig {
                seed,
                ..*optimizer
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let inits: Vec<Vec<f64>> = (0..cfg.restarts)
                .map(|_| {
                    (0..circuit.num_params())
                        .map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
                        .collect()
                })
                .collect();
            let bounds = vec![
                (
                    -2.0 * std::f64::consts::PI,
                    2.0 * std::f64::consts::PI
                );
                circuit.num_params()
            ];
            minimize_restarts(objective, &inits, &bounds, &cfg)?.x
        }
    };

    let jp_opt = match lambda_cfg {
        Some(lambda) => template.with_lambda(lambda.clone())?,
        None => {
            let psi = run_circuit(&circuit, &theta)?;
            let objective = |lambda: &[f64]| {
                let jp = match template.with_lambda(lambda.to_vec()) {
                    Ok(jp) => jp,
                    Err(_) => return 1e10,
                };
                match apply_jastrow_exact(&psi, &jp).and_then(|s| expectation(&h, &s)) {
                    Ok(v) => v,
                    Err(_) => 1e10,
                }
            };
            let cfg = OptimizerConfig {
                seed,
                ..*optimizer
            };
            let n = template.num_classes();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6c61);
            let mut inits = vec![vec![0.0; n]];
            for _ in 1..cfg.restarts {
                inits.push((0..n).map(|_| rng.gen_range(-0.05..0.05)).collect());
            }
            let bounds = vec![(-cfg.lambda_bound, cfg.lambda_bound); n];
            let best = minimize_restarts(objective, &inits, &bounds, &cfg)?;
            template.with_lambda(best.x)?
        }
    };
    Ok((circuit, theta, jp_opt))
}

fn run_lambda_scan(cfg: &LambdaScanConfig, opts: &RunOptions) -> Result<Vec<ResultRecord>> {
    ensure_non_empty("scan", &cfg.scan)?;
    if cfg.import.is_none() {
        ensure_non_empty("shots", &cfg.shots)?;
    }
    if cfg.m_rep < 1 {
        return Err(Error::Config("m_rep must be at least 1".into()));
    }
    let seed = opts.seed_override.unwrap_or(cfg.seed);
    let convention = opts.convention();
    let model = cfg.model.clone();
    let (circuit, theta, jp_opt) = resolve_scan_base(
        &model,
        &cfg.circuit,
        &cfg.theta,
        &cfg.lambda_opt,
        &cfg.jastrow,
        &cfg.optimizer,
        seed,
    )?;
    let h = build_model(&model)?;
    let psi = run_circuit(&circuit, &theta)?;
    let e_c = expectation(&h, &psi)?;
    let (e_exact, _) = exact_ground_state(&h)?;

    if let Some(dir) = &cfg.export_counts_dir {
        export_sampled_counts(&h, &circuit, &theta, &cfg.shots, cfg.m_rep, seed, dir)?;
    }

    if let Some(import) = &cfg.import {
        return scan_imported_counts(
            cfg, opts, &model, &jp_opt, e_c, e_exact, &psi, &h, import, convention,
        );
    }

    let mut rows = Vec::new();
    for &scale in &cfg.scan {
        for (shots_idx, &shots) in cfg.shots.iter().enumerate() {
            rows.push((scale, shots, shots_idx));
        }
    }
    let records: Vec<ResultRecord> = with_pool(opts.threads, || {
        rows.par_iter()
            .map(|&(scale, shots, shots_idx)| {
                let started = Instant::now();
                let jp = jp_opt.scaled(scale);
                let projected = apply_jastrow_exact(&psi, &jp)?;
                let e_jqc = expectation(&h, &projected)?;
                // The measured counts do not depend on λ (reweighting is
                // classical), so every scan point at a given shot budget
                // shares the measurement stream, exactly as when counts are
                // imported from one external dataset.
                let sampling = SamplingConfig {
                    shots,
                    m_rep: cfg.m_rep,
                    seed: seed ^ shots_idx as u64,
                };
                let sampled =
                    jqc_energy_sampled(&model, &circuit, &theta, &jp, &sampling, convention)?;
                Ok(ResultRecord {
                    kind: "lambda-scan".into(),
                    model: model.kind_name().into(),
                    sites: model.sites(),
                    param: "lambda_scale".into(),
                    value: scale,
                    depth: cfg.circuit.depth(),
                    shots: Some(shots),
                    m_rep: Some(cfg.m_rep),
                    e_c: Some(e_c),
                    e_jqc: Some(e_jqc),
                    e_exact: Some(e_exact),
                    e_sampled: Some(sampled.mean),
                    stderr: Some(sampled.stderr),
                    lambda: jp.lambda().to_vec(),
                    status: "ok".into(),
                    wall_s: started.elapsed().as_secs_f64(),
                    ..ResultRecord::default()
                })
            })
            .collect()
    })?;
    Ok(records)
}

fn export_sampled_counts(
    h: &PauliSum,
    circuit: &Circuit,
    theta: &[f64],
    shots_list: &[u64],
    m_rep: usize,
    seed: u64,
    dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let groups = group_by_basis(h);
    for (shots_idx, &shots) in shots_list.iter().enumerate() {
        for rep in 0..m_rep {
            let mut rng =
                ChaCha8Rng::seed_from_u64((seed ^ shots_idx as u64).wrapping_add(rep as u64));
            for basis in groups.keys() {
                let extended_circuit = build_entangled_copy(circuit, basis)?;
                let extended = run_circuit(&extended_circuit, theta)?;
                let table = sample_counts_with_rng(&extended, shots, &mut rng);
                let name = format!("counts_s{shots}_rep{rep}_{basis}.txt");
                let file = std::fs::File::create(dir.join(name))?;
                write_counts(std::io::BufWriter::new(file), &table, basis)?;
            }
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn scan_imported_counts(
    cfg: &LambdaScanConfig,
    opts: &RunOptions,
    model: &ModelSpec,
    jp_opt: &JastrowParams,
    e_c: f64,
    e_exact: f64,
    psi: &StateVector,
    h: &PauliSum,
    import: &ImportedCounts,
    convention: WeightConvention,
) -> Result<Vec<ResultRecord>> {
    ensure_non_empty("import.repetitions", &import.repetitions)?;
    let mut reps: Vec<Vec<(MeasurementBasis, CountsTable)>> = Vec::new();
    let mut shots_seen = 0;
    for files in &import.repetitions {
        let mut tables = Vec::new();
        for path in files {
            let file = std::fs::File::open(path)?;
            let (table, basis) = read_counts(std::io::BufReader::new(file))?;
            shots_seen = table.shots();
            tables.push((basis, table));
        }
        reps.push(tables);
    }
    let mut records = Vec::new();
    for &scale in &cfg.scan {
        let started = Instant::now();
        let jp = jp_opt.scaled(scale);
        let projected = apply_jastrow_exact(psi, &jp)?;
        let e_jqc = expectation(h, &projected)?;
        let per_rep: Vec<f64> = reps
            .iter()
            .map(|tables| energy_from_counts(model, tables, &jp, convention))
            .collect::<Result<_>>()?;
        let mean = per_rep.iter().sum::<f64>() / per_rep.len() as f64;
        let stderr = if per_rep.len() > 1 {
            let var = per_rep.iter().map(|e| (e - mean).powi(2)).sum::<f64>()
                / (per_rep.len() as f64 - 1.0);
            (var / per_rep.len() as f64).sqrt()
        } else {
            0.0
        };
        records.push(ResultRecord {
            kind: "lambda-scan".into(),
            model: model.kind_name().into(),
            sites: model.sites(),
            param: "lambda_scale".into(),
            value: scale,
            depth: cfg.circuit.depth(),
            shots: Some(shots_seen),
            m_rep: Some(reps.len()),
            e_c: Some(e_c),
            e_jqc: Some(e_jqc),
            e_exact: Some(e_exact),
            e_sampled: Some(mean),
            stderr: Some(stderr),
            lambda: jp.lambda().to_vec(),
            status: "ok".into(),
            wall_s: started.elapsed().as_secs_f64(),
            ..ResultRecord::default()
        });
    }
    let _ = opts;
    Ok(records)
}

/// Sign-solved reconstruction of one state plus the evaluator for Jastrow
/// refinement at the fixed measured distributions.
struct ReconstructedState {
    evaluator: FixedCountsEnergy,
    e_direct: f64,
    e_reconstructed: f64,
    eps_b: f64,
}

fn reconstruct_state(
    h: &PauliSum,
    psi: &StateVector,
    shots: u64,
    rng: &mut ChaCha8Rng,
) -> Result<ReconstructedState> {
    let groups = group_by_basis(h);
    let mut parts = Vec::new();
    let mut e_direct = 0.0;
    let mut e_reconstructed = 0.0;
    let mut eps_b = 0.0_f64;
    for (basis, group) in groups {
        let diagonal = rotate_to_diagonal(&group, &basis)?;
        let lambda = lambda_matrix(&basis)?;

        // Reference distribution without the entangled copy.
        let p0 = if shots == 0 {
            crate::measurement::direct_distribution(psi, &basis)?
        } else {
            let mut rotated = psi.clone();
            for (k, &axis) in basis.axes().iter().enumerate() {
                if let Some(m) = crate::statevector::post_rotation_matrix(axis) {
                    rotated.apply_single_qubit_pub(k, m);
                }
            }
            ProbDist::from_counts(&sample_counts_with_rng(&rotated, shots, rng))?
        };

        // Extended-register distribution with the entangled copy.
        let extended = entangled_copy_of_state(psi, &basis)?;
        let pbar = if shots == 0 {
            ProbDist::from_state(&extended)?
        } else {
            ProbDist::from_counts(&sample_counts_with_rng(&extended, shots, rng))?
        };

        e_direct += diagonal_expectation(&diagonal, &p0)?;
        let (reduced, signs) = if basis.num_rotated() == 0 {
            // Unrotated bases reconstruct exactly regardless of signs.
            let reduced = crate::measurement::reconstruct_reduced(&pbar, &lambda)?;
            (reduced, SignVector::ones(lambda.dim()))
        } else {
            let solve = solve_signs(&pbar, &p0, &basis)?;
            eps_b = eps_b.max(reconstruction_error(&solve.dist, &p0)?);
            (solve.dist, solve.signs)
        };
        e_reconstructed += diagonal_expectation(&diagonal, &reduced)?;
        parts.push((diagonal, lambda, pbar, signs));
    }
    Ok(ReconstructedState {
        evaluator: FixedCountsEnergy::new(h.num_qubits(), parts)?,
        e_direct,
        e_reconstructed,
        eps_b,
    })
}

fn run_reconstruct(cfg: &ReconstructConfig, opts: &RunOptions) -> Result<Vec<ResultRecord>> {
    ensure_non_empty("sizes", &cfg.sizes)?;
    ensure_non_empty("shots", &cfg.shots)?;
    if cfg.states_per_size < 1 {
        return Err(Error::Config("states_per_size must be at least 1".into()));
    }
    let seed = opts.seed_override.unwrap_or(cfg.seed);
    let convention = opts.convention();
    let mut rows = Vec::new();
    for &sites in &cfg.sizes {
        for state_idx in 0..cfg.states_per_size {
            for &shots in &cfg.shots {
                rows.push((sites, state_idx, shots));
            }
        }
    }
    let records: Vec<ResultRecord> = with_pool(opts.threads, || {
        rows.par_iter()
            .enumerate()
            .map(|(row_idx, &(sites, state_idx, shots))| {
                let started = Instant::now();
                let model = model_with_sites(&cfg.model, sites);
                let h = build_model(&model)?;
                let n = h.num_qubits();
                let (e_exact, _) = exact_ground_state(&h)?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ row_idx as u64);

                // Random real-valued state.
                let amps: Vec<num_complex::Complex64> = (0..1usize << n)
                    .map(|_| num_complex::Complex64::new(rng.gen::<f64>() - 0.5, 0.0))
                    .collect();
                let psi = StateVector::from_amplitudes(n, amps)?;

                let state = reconstruct_state(&h, &psi, shots, &mut rng)?;

                // Jastrow refinement at fixed measured distributions.
                let template = JastrowParams::zeros(model_class_map(&model)?);
                let objective = |lambda: &[f64]| {
                    let jp = match template.with_lambda(lambda.to_vec()) {
                        Ok(jp) => jp,
                        Err(_) => return 1e10,
                    };
                    match state.evaluator.energy(&jp, convention) {
                        Ok(v) => v,
                        Err(_) => 1e10,
                    }
                };
                let optimizer = OptimizerConfig {
                    seed: seed ^ row_idx as u64,
                    ..cfg.optimizer
                };
                let nl = template.num_classes();
                let bounds = vec![(-optimizer.lambda_bound, optimizer.lambda_bound); nl];
                let best = crate::optimize::minimize(
                    objective,
                    &vec![0.0; nl],
                    &bounds,
                    &optimizer,
                    0,
                )?;
                let e_jastrow = best.value.min(state.e_reconstructed);

                Ok(ResultRecord {
                    kind: "reconstruct".into(),
                    model: model.kind_name().into(),
                    sites,
                    param: "state".into(),
                    value: state_idx as f64,
                    shots: Some(shots),
                    e_c: Some(state.e_direct),
                    e_jqc: Some(e_jastrow),
                    e_exact: Some(e_exact),
                    e_sampled: Some(state.e_reconstructed),
                    eps_b: Some(state.eps_b),
                    lambda: best.x.clone(),
                    status: "ok".into(),
                    wall_s: started.elapsed().as_secs_f64(),
                    ..ResultRecord::default()
                })
            })
            .collect()
    })?;
    Ok(records)
}

fn run_dispersion(cfg: &DispersionConfig, opts: &RunOptions) -> Result<Vec<ResultRecord>> {
    ensure_non_empty("scan", &cfg.scan)?;
    if cfg.m_rep < 1 {
        return Err(Error::Config("m_rep must be at least 1".into()));
    }
    let seed = opts.seed_override.unwrap_or(cfg.seed);
    let convention = opts.convention();
    let model = cfg.model.clone();
    let (circuit, theta, jp_opt) = resolve_scan_base(
        &model,
        &cfg.circuit,
        &cfg.theta,
        &cfg.lambda_opt,
        &cfg.jastrow,
        &cfg.optimizer,
        seed,
    )?;
    let h = build_model(&model)?;
    let num_bases = group_by_basis(&h).len() as u64;
    // Each extended shot measures two system registers.
    let shots = (cfg.total_measurements / (2 * num_bases)).max(1);
    let psi = run_circuit(&circuit, &theta)?;
    let e_c = expectation(&h, &psi)?;
    let (e_exact, _) = exact_ground_state(&h)?;

    let records: Vec<ResultRecord> = with_pool(opts.threads, || {
        cfg.scan
            .par_iter()
            .enumerate()
            .map(|(row_idx, &scale)| {
                let started = Instant::now();
                let jp = jp_opt.scaled(scale);
                let projected = apply_jastrow_exact(&psi, &jp)?;
                let e_jqc = expectation(&h, &projected)?;
                let sampling = SamplingConfig {
                    shots,
                    m_rep: cfg.m_rep,
                    seed: seed ^ row_idx as u64,
                };
                let sampled =
                    jqc_energy_sampled(&model, &circuit, &theta, &jp, &sampling, convention)?;
                Ok(ResultRecord {
                    kind: "dispersion".into(),
                    model: model.kind_name().into(),
                    sites: model.sites(),
                    param: "lambda_scale".into(),
                    value: scale,
                    depth: cfg.circuit.depth(),
                    shots: Some(shots),
                    m_rep: Some(cfg.m_rep),
                    e_c: Some(e_c),
                    e_jqc: Some(e_jqc),
                    e_exact: Some(e_exact),
                    e_sampled: Some(sampled.mean),
                    stderr: Some(sampled.stderr),
                    lambda: jp.lambda().to_vec(),
                    status: "ok".into(),
                    wall_s: started.elapsed().as_secs_f64(),
                    ..ResultRecord::default()
                })
            })
            .collect()
    })?;
    Ok(records)
}

fn config_hash(config_text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(config_text.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn write_records(
    path: &Path,
    kind: &str,
    config_text: &str,
    seed: u64,
    records: &[ResultRecord],
    json_mirror: bool,
) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut out = String::new();
    out.push_str(&format!("# jqc v{VERSION} {kind}\n"));
    out.push_str(&format!("# config_sha256={}\n", config_hash(config_text)));
    out.push_str(&format!("# seed={seed}\n"));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.to_csv_row());
        out.push('\n');
    }
    std::fs::write(path, out)?;

    if json_mirror {
        let json_path = path.with_extension("json");
        let rows: Vec<serde_json::Value> = records
            .iter()
            .map(|r| {
                let mut map = serde_json::Map::new();
                for (key, field) in CSV_HEADER.split(',').zip(r.to_csv_row().split(',')) {
                    map.insert(key.to_string(), serde_json::Value::String(field.to_string()));
                }
                serde_json::Value::Object(map)
            })
            .collect();
        std::fs::write(json_path, serde_json::to_string_pretty(&rows)?)?;
    }
    Ok(())
}

/// Parse a config document; JSON syntax errors keep their line/column.
pub fn parse_config(config_text: &str) -> Result<ExperimentConfig> {
    serde_json::from_str(config_text).map_err(Error::Json)
}

/// Run a parsed experiment and write its outputs.
pub fn run_experiment(
    config: &ExperimentConfig,
    config_text: &str,
    opts: &RunOptions,
) -> Result<RunSummary> {
    let kind = config.kind_name();
    let (records, out, seed, json_mirror) = match config {
        ExperimentConfig::Sweep(cfg) => (
            run_sweep(cfg, opts)?,
            cfg.out.clone(),
            opts.seed_override.unwrap_or(cfg.seed),
            cfg.json_mirror,
        ),
        ExperimentConfig::Gain(cfg) => (
            run_gain(cfg, opts)?,
            cfg.out.clone(),
            opts.seed_override.unwrap_or(cfg.seed),
            cfg.json_mirror,
        ),
        ExperimentConfig::LambdaScan(cfg) => (
            run_lambda_scan(cfg, opts)?,
            cfg.out.clone(),
            opts.seed_override.unwrap_or(cfg.seed),
            cfg.json_mirror,
        ),
        ExperimentConfig::Reconstruct(cfg) => (
            run_reconstruct(cfg, opts)?,
            cfg.out.clone(),
            opts.seed_override.unwrap_or(cfg.seed),
            cfg.json_mirror,
        ),
        ExperimentConfig::Dispersion(cfg) => (
            run_dispersion(cfg, opts)?,
            cfg.out.clone(),
            opts.seed_override.unwrap_or(cfg.seed),
            cfg.json_mirror,
        ),
        ExperimentConfig::DumpH(cfg) => {
            let h = build_model(&cfg.model)?;
            let text = h.to_text();
            let out_path = opts.out_override.clone().or_else(|| cfg.out.clone());
            if let Some(path) = &out_path {
                if let Some(parent) = path.parent() {
                    if !parent.as_os_str().is_empty() {
                        std::fs::create_dir_all(parent)?;
                    }
                }
                std::fs::write(path, &text)?;
            } else {
                std::io::stdout().write_all(text.as_bytes())?;
            }
            return Ok(RunSummary {
                records: Vec::new(),
                out_path,
            });
        }
    };

    let out_path = opts.out_override.clone().or(out);
    let out_path = match out_path {
        Some(p) => p,
        None => PathBuf::from(format!("{kind}.csv")),
    };
    write_records(&out_path, kind, config_text, seed, &records, json_mirror)?;
    Ok(RunSummary {
        records,
        out_path: Some(out_path),
    })
}

/// Parse, check the config kind against the invoked subcommand, and run.
pub fn run_cli_command(
    expected_kind: &str,
    config_text: &str,
    opts: &RunOptions,
) -> Result<RunSummary> {
    let config = parse_config(config_text)?;
    if config.kind_name() != expected_kind {
        return Err(Error::Config(format!(
            "config kind '{}' does not match subcommand '{expected_kind}'",
            config.kind_name()
        )));
    }
    run_experiment(&config, config_text, opts)
}
