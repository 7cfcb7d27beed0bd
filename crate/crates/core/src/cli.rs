//! Command-line front end. Every subcommand writes its tables atomically into
//! `--out` and records a run manifest beside them.

use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::circulator::{
    impossibility_check, robustness_scan, verify_circulation, Chirality, CirculationReport, CirculatorError,
    RobustnessScan, DEFAULT_INPUT_CURRENT,
};
use crate::lattice::{build_kagome, plan_route, validate_schedule, LatticeError};
use crate::minimizer::{extract_alpha, sweep_output_current, MinimizerError};
use crate::model::{normalize, BiasCurrents, ConfigError, CouplerConfig, DimensionlessScales, PhysicalParams};
use crate::potential::{
    derive_coupling_coefficients, minimum_bias_coefficients, reduced_bias_current_support, CouplingCoefficients,
    PotentialError, ReducedPhases, ReducedPotential,
};
use crate::qdynamics::{
    build_hamiltonian, coupling_strength, evolve, rwa_transfer_time, transfer_report, Integrator, QuantumError,
    Qubit, ResonatorParams, SystemSpec,
};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<PotentialError> for CliError {
    fn from(e: PotentialError) -> Self {
        match e {
            PotentialError::CoefficientMismatch { .. } | PotentialError::InconsistentKcl(_) => {
                CliError::Numerical(e.to_string())
            }
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<MinimizerError> for CliError {
    fn from(e: MinimizerError) -> Self {
        match e {
            MinimizerError::Config(c) => c.into(),
            MinimizerError::NotAtDegeneracy(_) | MinimizerError::TooFewPoints { .. } => CliError::Config(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<CirculatorError> for CliError {
    fn from(e: CirculatorError) -> Self {
        match e {
            CirculatorError::Minimizer(m) => m.into(),
            CirculatorError::Potential(p) => p.into(),
            CirculatorError::Config(c) => c.into(),
            CirculatorError::ViolatedCirculation { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<QuantumError> for CliError {
    fn from(e: QuantumError) -> Self {
        match e {
            QuantumError::NormDrift { .. } | QuantumError::EmptyTrajectory => CliError::Numerical(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<LatticeError> for CliError {
    fn from(e: LatticeError) -> Self {
        match e {
            LatticeError::Unreachable { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "circulator", version, about = "Flux-qubit circulator and Kagome gate-routing toolkit")]
pub struct Cli {
    /// JSON file of physical parameters; the built-in reference coupler when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Seed for the commands that draw random inputs.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reduced potential on a grid over [-π, π]².
    PotentialGrid(PotentialGridArgs),
    /// Minimum of the potential as the output current runs from -u1 to 0.
    Fig3Sweep(SweepArgs),
    /// Circulation check at the configured flux plus a flux-offset scan.
    CirculatorReport(ReportArgs),
    /// Coupling coefficients and the selectivity of an n-port loop.
    Coeffs(CoeffsArgs),
    /// Single-photon transfer between two resonators.
    Evolve(EvolveArgs),
    /// Gate schedule between two qubits of a Kagome patch.
    Route(RouteArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct PotentialGridArgs {
    /// Points per axis.
    #[arg(long, default_value_t = 201)]
    pub resolution: usize,
    /// Dimensionless port currents u1,u2,u3.
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [0.025, -0.025, 0.0])]
    pub bias: Vec<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    /// Input current u1 into the weakened junction's port.
    #[arg(long, default_value_t = 0.05)]
    pub u1: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    #[arg(long, default_value_t = DEFAULT_INPUT_CURRENT)]
    pub u_in: f64,
    /// +1 or -1.
    #[arg(long, default_value_t = 1, allow_negative_numbers = true)]
    pub chirality: i8,
    #[arg(long, default_value_t = 0.48)]
    pub f_lo: f64,
    #[arg(long, default_value_t = 0.52)]
    pub f_hi: f64,
    #[arg(long, default_value_t = 21)]
    pub steps: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct CoeffsArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum IntegratorArg {
    Spectral,
    Rk4,
}

#[derive(Debug, Args, Serialize)]
pub struct EvolveArgs {
    /// Coupled resonators l,m; the photon starts in l.
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [1, 2])]
    pub pair: Vec<usize>,
    /// Final time in seconds; 1.2 times the transfer time when omitted.
    #[arg(long)]
    pub t_final: Option<f64>,
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    /// Overrides the coupling with g = ratio · ω_r.
    #[arg(long)]
    pub g_ratio: Option<f64>,
    /// Drop the counter-rotating terms.
    #[arg(long)]
    pub rwa: bool,
    #[arg(long, value_enum, default_value_t = IntegratorArg::Spectral)]
    pub integrator: IntegratorArg,
}

#[derive(Debug, Args, Serialize)]
pub struct RouteArgs {
    #[arg(long, default_value_t = 4)]
    pub rows: usize,
    #[arg(long, default_value_t = 4)]
    pub cols: usize,
    /// Start qubit; drawn from the seed when omitted.
    #[arg(long)]
    pub from: Option<usize>,
    /// End qubit; drawn from the seed when omitted.
    #[arg(long)]
    pub to: Option<usize>,
}

/// Record written next to every run's outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<String>,
    pub seed: u64,
    pub arguments: Value,
    /// Fully resolved dimensionless configuration, when the command uses one.
    pub parameters: Option<Value>,
    pub outputs: Vec<String>,
    pub toolkit_version: String,
    /// Not covered by the determinism guarantee.
    pub wall_time_seconds: f64,
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| CliError::Io(e.to_string()))?;
    Ok(buf)
}

struct Resolved {
    params: PhysicalParams,
    cfg: CouplerConfig,
    scales: DimensionlessScales,
}

fn load(config: Option<&Path>) -> Result<Resolved, CliError> {
    let params = match config {
        Some(p) => PhysicalParams::from_json_file(p)?,
        None => PhysicalParams::reference(),
    };
    let (cfg, scales) = normalize(&params)?;
    Ok(Resolved { params, cfg, scales })
}

fn resolved_json(r: &Resolved) -> Value {
    json!({ "coupler": r.cfg, "scales": r.scales })
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

struct Run {
    outputs: Vec<(String, Vec<u8>)>,
    parameters: Option<Value>,
    arguments: Value,
}

/// Executes one command; returns the paths written, manifest last.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let started = Instant::now();
    let config = cli.config.as_deref();
    let (name, result) = match &cli.command {
        Command::PotentialGrid(a) => ("potential-grid", potential_grid(config, a)),
        Command::Fig3Sweep(a) => ("fig3-sweep", fig3_sweep(config, a)),
        Command::CirculatorReport(a) => ("circulator-report", circulator_report(config, a)),
        Command::Coeffs(a) => ("coeffs", coeffs(a)),
        Command::Evolve(a) => ("evolve", evolve_cmd(config, a)),
        Command::Route(a) => ("route", route(a, cli.seed)),
    };
    let run = result?;
    let mut written = Vec::new();
    for (file, bytes) in &run.outputs {
        let path = cli.out.join(file);
        write_atomic(&path, bytes)?;
        written.push(path);
    }
    let manifest = RunManifest {
        command: name.to_string(),
        config_path: config.map(|p| p.display().to_string()),
        seed: cli.seed,
        arguments: run.arguments,
        parameters: run.parameters,
        outputs: written.iter().map(|p| p.display().to_string()).collect(),
        toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };
    let path = cli.out.join(format!("{name}.manifest.json"));
    write_atomic(&path, &json_bytes(&manifest)?)?;
    written.push(path);
    Ok(written)
}

pub const POTENTIAL_CSV_HEADER: [&str; 3] = ["phi_plus", "phi_minus", "u_eff"];

fn potential_grid(config: Option<&Path>, a: &PotentialGridArgs) -> Result<Run, CliError> {
    if a.resolution < 2 {
        return Err(CliError::Config(format!("resolution must be at least 2, got {}", a.resolution)));
    }
    let r = load(config)?;
    let bias = BiasCurrents::dimensionless(a.bias.clone())?;
    let pot = ReducedPotential::new(&r.cfg, &bias)?;
    let axis: Vec<f64> = (0..a.resolution).map(|i| -PI + 2.0 * PI * i as f64 / (a.resolution - 1) as f64).collect();
    let bytes = csv_bytes(|buf| {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(buf);
        w.write_record(POTENTIAL_CSV_HEADER)?;
        for &p in &axis {
            for &m in &axis {
                let u = pot.value(ReducedPhases::new(p, m));
                w.write_record([p, m, u].map(crate::format_float))?;
            }
        }
        w.flush()?;
        Ok(())
    })?;
    Ok(Run {
        outputs: vec![("potential_grid.csv".into(), bytes)],
        parameters: Some(resolved_json(&r)),
        arguments: to_value(a),
    })
}

fn fig3_sweep(config: Option<&Path>, a: &SweepArgs) -> Result<Run, CliError> {
    let r = load(config)?;
    let table = sweep_output_current(&r.cfg, a.u1, a.points)?;
    let bytes = csv_bytes(|buf| table.write_csv(buf))?;
    Ok(Run {
        outputs: vec![("fig3_sweep.csv".into(), bytes)],
        parameters: Some(resolved_json(&r)),
        arguments: to_value(a),
    })
}

#[derive(Debug, Serialize)]
struct CirculatorOutput {
    circulation: CirculationReport,
    robustness: RobustnessScan,
}

fn circulator_report(config: Option<&Path>, a: &ReportArgs) -> Result<Run, CliError> {
    let r = load(config)?;
    let chirality = Chirality::try_from(a.chirality).map_err(CliError::Config)?;
    let circulation = verify_circulation(&r.cfg, a.u_in, chirality)?;
    let robustness = robustness_scan(&r.cfg, (a.f_lo, a.f_hi), a.steps, a.u_in, chirality)?;
    let out = CirculatorOutput { circulation, robustness };
    Ok(Run {
        outputs: vec![("circulator_report.json".into(), json_bytes(&out)?)],
        parameters: Some(resolved_json(&r)),
        arguments: to_value(a),
    })
}

fn coeffs(a: &CoeffsArgs) -> Result<Run, CliError> {
    let closed = derive_coupling_coefficients(a.n)?;
    let kcl = CouplingCoefficients::from_kcl_chain(a.n)?;
    let report = json!({
        "n": a.n,
        "k": a.k,
        "closed_form": closed.rows(),
        "kcl_chain": kcl.rows(),
        "gauge_mismatch_row": closed.gauge_mismatch(&kcl, 1e-9),
        "minimum_bias_coefficients": minimum_bias_coefficients(a.n, a.k)?,
        "current_support": reduced_bias_current_support(a.n, a.k)?,
        "selectivity": impossibility_check(a.n, a.k)?,
    });
    Ok(Run { outputs: vec![("coeffs.json".into(), json_bytes(&report)?)], parameters: None, arguments: to_value(a) })
}

fn evolve_cmd(config: Option<&Path>, a: &EvolveArgs) -> Result<Run, CliError> {
    let r = load(config)?;
    let resonator = ResonatorParams::from_physical(&r.params)?;
    let omega = resonator.frequency;
    let g = match a.g_ratio {
        Some(ratio) => ratio * omega,
        None => coupling_strength(extract_alpha(&r.cfg)?, &resonator),
    };
    let pair = (a.pair[0], a.pair[1]);
    let spec = SystemSpec {
        pair,
        n_modes: 3,
        fock_cutoff: r.params.fock_cutoff,
        mode_frequencies: vec![omega; 3],
        qubit_splitting: r.params.qubit_splitting,
        coupling: g,
        rwa: a.rwa,
    };
    let sys = build_hamiltonian(spec)?;
    let mut occ = vec![0; 3];
    occ[pair.0 - 1] = 1;
    let psi = sys.fock_state(Qubit::Ground, &occ)?;
    let sys = sys.with_state(psi);
    let t_star = rwa_transfer_time(g);
    let t_final = a.t_final.unwrap_or(1.2 * t_star);
    if a.samples == 0 {
        return Err(CliError::Config("samples must be positive".into()));
    }
    let integrator = match a.integrator {
        IntegratorArg::Spectral => Integrator::Spectral,
        IntegratorArg::Rk4 => Integrator::Rk4,
    };
    let traj = evolve(&sys, t_final, t_final / a.samples as f64, integrator)?;
    let report = transfer_report(&traj)?;
    let summary = json!({
        "coupling": g,
        "coupling_over_omega": g / omega,
        "rwa_transfer_time": t_star,
        "transfer": report,
        "max_norm_drift": traj.max_norm_drift(),
        "max_relative_energy_drift": traj.max_relative_energy_drift(),
    });
    let csv = csv_bytes(|buf| traj.write_csv(buf))?;
    Ok(Run {
        outputs: vec![("trajectory.csv".into(), csv), ("transfer.json".into(), json_bytes(&summary)?)],
        parameters: Some(resolved_json(&r)),
        arguments: to_value(a),
    })
}

fn route(a: &RouteArgs, seed: u64) -> Result<Run, CliError> {
    let lat = build_kagome(a.rows, a.cols)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = lat.n_qubits();
    if n < 2 {
        return Err(CliError::Config("lattice has fewer than two qubits".into()));
    }
    let from = a.from.unwrap_or_else(|| rng.random_range(0..n));
    let to = match a.to {
        Some(t) => t,
        None => loop {
            let t = rng.random_range(0..n);
            if t != from {
                break t;
            }
        },
    };
    let schedule = plan_route(&lat, from, to)?;
    if let Err(violations) = validate_schedule(&lat, &schedule) {
        let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(CliError::Numerical(format!("planned schedule is invalid: {}", list.join("; "))));
    }
    Ok(Run {
        outputs: vec![("route.json".into(), json_bytes(&schedule)?), ("lattice.json".into(), json_bytes(&lat.export())?)],
        parameters: None,
        arguments: json!({ "rows": a.rows, "cols": a.cols, "from": from, "to": to }),
    })
}
