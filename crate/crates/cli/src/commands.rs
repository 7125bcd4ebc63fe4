//! Subcommand definitions and handlers.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use cascade_node::design::{mode_volume_from_cubic_wavelengths, TableRow};
use cascade_node::dynamics::{evolve_driven_with, evolve_emission_with, evolve_full_with, EvolveOptions};
use cascade_node::io::{self, combined_csv, pulse_csv, pulse_from_table, read_table, sweep_csv, trajectory_csv};
use cascade_node::optimize::{best_point, parameter_names};
use cascade_node::spectral::{emission_components, reduced_modes};
use cascade_node::{
    build_full_hamiltonian, checks, coupling_g, eigendecompose, grid_sweep, plan_node, refine_with, run_transfer_with,
    symmetry_factor, Direction, EmitterModeSpec, Error, FullDrive, GapRateTable, Interpolation, ModelKind, NodeConfig,
    ParamRange, Pulse, RefineOptions, SweepSpec, TableKind, TimeGrid, Tolerances, Trajectory, TransferOptions,
};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::config::{load_config_file, NodeArgs};
use crate::plot;
use crate::{read_file, CliError, CliResult, Outputs, RunRecord};

#[derive(Debug, Parser)]
#[command(name = "cascade-node", version, about = "Single-photon emission and transfer through ring-resonator nodes")]
pub struct Cli {
    /// Output directory
    #[arg(long, short, global = true, default_value = "cascade-out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Reduced,
    Full,
}

impl From<Model> for ModelKind {
    fn from(m: Model) -> Self {
        match m {
            Model::Reduced => ModelKind::Reduced,
            Model::Full => ModelKind::Full,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Side {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Interp {
    LogLinear,
    Linear,
}

#[derive(Debug, Clone, clap::Args)]
pub struct GridArgs {
    /// Window length in units of 1/g
    #[arg(long, default_value_t = 20.0)]
    pub window: f64,
    #[arg(long, default_value_t = 4096)]
    pub samples: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Emission from an excited emitter: trajectory, pulse and its eigen components
    Emit {
        #[command(flatten)]
        node: NodeArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, value_enum, default_value = "reduced")]
        model: Model,
    },
    /// Absorption of an incoming pulse
    Receive {
        #[command(flatten)]
        node: NodeArgs,
        /// Pulse CSV with columns t, re_e, im_e
        #[arg(long, conflicts_with = "self_reversed")]
        incoming: Option<PathBuf>,
        /// Drive with the conjugate time reverse of the node's own emission
        #[arg(long)]
        self_reversed: bool,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, value_enum, default_value = "reduced")]
        model: Model,
        /// Input channel for the full model
        #[arg(long, value_enum, default_value = "plus")]
        direction: Side,
    },
    /// Sender emits, receiver absorbs
    Transfer {
        #[command(flatten)]
        node: NodeArgs,
        /// Receiver config JSON (defaults to a copy of the sender)
        #[arg(long)]
        receiver: Option<PathBuf>,
        /// Propagation delay in units of 1/g of the sender
        #[arg(long, default_value_t = cascade_node::transfer::DEFAULT_DELAY)]
        delay: f64,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, value_enum, default_value = "reduced")]
        model: Model,
    },
    /// Eigenvalues and modal amplitudes
    Eigen {
        #[command(flatten)]
        node: NodeArgs,
        #[arg(long, value_enum, default_value = "reduced")]
        model: Model,
    },
    /// Symmetry factor of a pulse
    Beta {
        /// `gaussian`, `exponential` or a pulse CSV (t, re_e, im_e)
        #[arg(long)]
        pulse: String,
        /// Intensity standard deviation of the Gaussian
        #[arg(long, default_value_t = 1.0)]
        width: f64,
        /// Gaussian center (defaults to the window midpoint)
        #[arg(long)]
        center: Option<f64>,
        /// Decay rate of the exponential
        #[arg(long, default_value_t = 1.0)]
        rate: f64,
        #[arg(long, default_value_t = 20.0)]
        window: f64,
        #[arg(long, default_value_t = 8193)]
        samples: usize,
    },
    /// Refine coupling ratios by Nelder-Mead
    Optimize {
        /// Number of rings
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// Starting (J12, ..., kappa)/g; defaults to J = 2, kappa = 8
        #[arg(long, value_delimiter = ',')]
        start: Option<Vec<f64>>,
        /// Seed for the restart perturbation
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2000)]
        max_evals: usize,
    },
    /// Grid sweep of the symmetry factor over (J12, ..., kappa)/g
    Sweep {
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// Points per axis, e.g. 40x40x40 or 40
        #[arg(long, default_value = "40")]
        grid: String,
        /// Ranges per axis, e.g. 0.5:5,0.5:5,2:14
        #[arg(long)]
        ranges: String,
        /// Worker threads (defaults to available parallelism)
        #[arg(long, env = "CASCADE_NODE_WORKERS")]
        workers: Option<usize>,
    },
    /// Emitter-ring coupling g from emitter and mode parameters
    DesignG {
        /// Vacuum wavelength in nm
        #[arg(long)]
        lambda_nm: f64,
        /// Natural linewidth in Hz (converted to rad/s)
        #[arg(long, required_unless_present = "gamma0", conflicts_with = "gamma0")]
        linewidth_hz: Option<f64>,
        /// Natural linewidth in rad/s
        #[arg(long)]
        gamma0: Option<f64>,
        #[arg(long)]
        n_index: f64,
        /// Effective mode volume in µm³
        #[arg(long, required_unless_present = "v_eff_cubic", conflicts_with = "v_eff_cubic")]
        v_eff_um3: Option<f64>,
        /// Effective mode volume in units of (λ/n)³
        #[arg(long)]
        v_eff_cubic: Option<f64>,
    },
    /// Gaps realizing coupling ratios, from gap/rate tables
    DesignGap {
        /// g in rad/s
        #[arg(long, required_unless_present = "g_ghz", conflicts_with = "g_ghz")]
        g: Option<f64>,
        /// g/2π in GHz
        #[arg(long)]
        g_ghz: Option<f64>,
        /// Target (J12, ..., kappa)/g
        #[arg(long, value_delimiter = ',', default_value = "1.88,2.94,7.92")]
        ratios: Vec<f64>,
        /// Ring-ring table, CSV with gap_nm, rate_ghz
        #[arg(long)]
        ring_ring: PathBuf,
        /// Ring-waveguide table, CSV with gap_nm, rate_ghz
        #[arg(long)]
        ring_waveguide: PathBuf,
        #[arg(long, value_enum, default_value = "log-linear")]
        interp: Interp,
    },
    /// Run the invariant suite on reference nodes (and an optional config)
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// SVG figures from CSV outputs
    Plot {
        #[command(subcommand)]
        figure: PlotKind,
    },
}

#[derive(Debug, Subcommand)]
pub enum PlotKind {
    /// Stacked sender, pulse and receiver panels from a combined transfer CSV
    Transfer {
        #[arg(long)]
        input: PathBuf,
    },
    /// Pulse and eigen components from an emission pulse CSV
    Pulse {
        #[arg(long)]
        input: PathBuf,
    },
    /// Contours of beta on one kappa slice of a three-ring sweep CSV
    Contour {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 7.92)]
        kappa: f64,
        #[arg(long, value_delimiter = ',', default_value = "0.9,0.97,0.99")]
        levels: Vec<f64>,
        /// Point to mark, J12,J23
        #[arg(long, value_delimiter = ',', default_value = "1.88,2.94")]
        mark: Vec<f64>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Emit { .. } => "emit",
            Command::Receive { .. } => "receive",
            Command::Transfer { .. } => "transfer",
            Command::Eigen { .. } => "eigen",
            Command::Beta { .. } => "beta",
            Command::Optimize { .. } => "optimize",
            Command::Sweep { .. } => "sweep",
            Command::DesignG { .. } => "design-g",
            Command::DesignGap { .. } => "design-gap",
            Command::Validate { .. } => "validate",
            Command::Plot { .. } => "plot",
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn record(config: serde_json::Value) -> RunRecord {
    RunRecord {
        config,
        tolerances: Tolerances::default(),
    }
}

fn emission_grid(grid: &GridArgs) -> CliResult<TimeGrid> {
    Ok(TimeGrid::new(0.0, grid.window, grid.samples)?)
}

fn print(text: &str) {
    print!("{text}");
}

pub fn dispatch(command: &Command, out: &mut Outputs) -> CliResult<RunRecord> {
    match command {
        Command::Emit { node, grid, model } => emit(node, grid, *model, out),
        Command::Receive {
            node,
            incoming,
            self_reversed,
            grid,
            model,
            direction,
        } => receive(node, incoming.as_deref(), *self_reversed, grid, *model, *direction, out),
        Command::Transfer {
            node,
            receiver,
            delay,
            grid,
            model,
        } => transfer(node, receiver.as_ref(), *delay, grid, *model, out),
        Command::Eigen { node, model } => eigen(node, *model, out),
        Command::Beta {
            pulse,
            width,
            center,
            rate,
            window,
            samples,
        } => beta(pulse, *width, *center, *rate, *window, *samples, out),
        Command::Optimize {
            n,
            start,
            seed,
            max_evals,
        } => optimize(*n, start.as_deref(), *seed, *max_evals, out),
        Command::Sweep {
            n,
            grid,
            ranges,
            workers,
        } => sweep(*n, grid, ranges, *workers, out),
        Command::DesignG {
            lambda_nm,
            linewidth_hz,
            gamma0,
            n_index,
            v_eff_um3,
            v_eff_cubic,
        } => design_g(*lambda_nm, *linewidth_hz, *gamma0, *n_index, *v_eff_um3, *v_eff_cubic, out),
        Command::DesignGap {
            g,
            g_ghz,
            ratios,
            ring_ring,
            ring_waveguide,
            interp,
        } => design_gap(*g, *g_ghz, ratios, ring_ring, ring_waveguide, *interp, out),
        Command::Validate { config } => validate(config.as_ref(), out),
        Command::Plot { figure } => plot_command(figure, out),
    }
}

fn config_json(config: &NodeConfig) -> serde_json::Value {
    serde_json::to_value(config).unwrap_or_default()
}

fn residual_population(traj: &Trajectory) -> f64 {
    traj.node_population(traj.grid.n_samples - 1)
}

#[derive(Serialize)]
struct EmitSummary {
    model: ModelKind,
    beta: f64,
    t0_star: f64,
    pulse_norm: f64,
    residual_population: f64,
    warnings: Vec<String>,
}

fn emit(node: &NodeArgs, grid_args: &GridArgs, model: Model, out: &mut Outputs) -> CliResult<RunRecord> {
    let config = node.resolve()?;
    let cfg = config.normalized();
    let grid = emission_grid(grid_args)?;
    let opts = EvolveOptions::default();
    let traj = match model {
        Model::Reduced => evolve_emission_with(&cfg, &grid, &opts)?,
        Model::Full => evolve_full_with(&cfg, &grid, FullDrive::Emission, &opts)?,
    };
    let mut warnings = traj.warnings.clone();
    // per-mode components need distinct eigenvalues; skip them otherwise
    let components = match emission_components(&cfg, &grid) {
        Ok(c) if model == Model::Reduced => c,
        Ok(_) => Vec::new(),
        Err(e @ (Error::Defective { .. } | Error::DegenerateSpectrum { .. })) => {
            warnings.push(format!("eigen components omitted: {e}"));
            Vec::new()
        }
        Err(e) => return Err(e.into()),
    };
    let pulse = traj.emitted();
    let shape = symmetry_factor(pulse)?;
    out.write("trajectory.csv", &trajectory_csv(&traj))?;
    out.write("pulse.csv", &pulse_csv(pulse, &components))?;
    let text = out.write_json(
        "emit.json",
        &EmitSummary {
            model: model.into(),
            beta: shape.beta,
            t0_star: shape.t0_star,
            pulse_norm: shape.pulse_norm,
            residual_population: residual_population(&traj),
            warnings,
        },
    )?;
    print(&text);
    Ok(record(json!({
        "node": config_json(&config),
        "model": ModelKind::from(model),
        "window": grid_args.window,
        "samples": grid_args.samples,
    })))
}

#[derive(Serialize)]
struct ReceiveSummary {
    model: ModelKind,
    #[serde(rename = "F")]
    success_rate: f64,
    t_peak: f64,
    incoming_norm: f64,
    warnings: Vec<String>,
}

fn receive(
    node: &NodeArgs,
    incoming: Option<&Path>,
    self_reversed: bool,
    grid_args: &GridArgs,
    model: Model,
    direction: Side,
    out: &mut Outputs,
) -> CliResult<RunRecord> {
    let config = node.resolve()?;
    let cfg = config.normalized();
    let opts = EvolveOptions::default();
    let drive = match (incoming, self_reversed) {
        (Some(path), _) => {
            let table = read_table(read_file(path)?.as_bytes())?;
            pulse_from_table(&table)?
        }
        (None, true) => {
            let grid = emission_grid(grid_args)?;
            evolve_emission_with(&cfg, &grid, &opts)?
                .emitted()
                .time_reversed_conjugate()
        }
        (None, false) => return Err(usage("give --incoming <csv> or --self-reversed")),
    };
    let traj = match model {
        Model::Reduced => evolve_driven_with(&cfg, &drive, &opts)?,
        Model::Full => {
            let dir = match direction {
                Side::Plus => Direction::Plus,
                Side::Minus => Direction::Minus,
            };
            evolve_full_with(&cfg, &drive.grid, FullDrive::Directional(dir, &drive), &opts)?
        }
    };
    let peak = cascade_node::success_rate(&traj);
    out.write("trajectory.csv", &trajectory_csv(&traj))?;
    let text = out.write_json(
        "receive.json",
        &ReceiveSummary {
            model: model.into(),
            success_rate: peak.population,
            t_peak: peak.time,
            incoming_norm: drive.norm,
            warnings: traj.warnings.clone(),
        },
    )?;
    print(&text);
    Ok(record(json!({
        "node": config_json(&config),
        "model": ModelKind::from(model),
        "incoming": incoming.map(|p| p.display().to_string()),
        "self_reversed": self_reversed,
    })))
}

fn transfer(
    node: &NodeArgs,
    receiver: Option<&PathBuf>,
    delay: f64,
    grid_args: &GridArgs,
    model: Model,
    out: &mut Outputs,
) -> CliResult<RunRecord> {
    let sender = node.resolve()?;
    let receiver = match receiver {
        Some(path) => load_config_file(path)?,
        None => sender.clone(),
    };
    let opts = TransferOptions {
        delay,
        window: grid_args.window,
        samples: grid_args.samples,
        model: model.into(),
        ..TransferOptions::default()
    };
    let report = run_transfer_with(&sender, &receiver, &opts)?;
    out.write("sender.csv", &trajectory_csv(&report.sender_trajectory))?;
    out.write("receiver.csv", &trajectory_csv(&report.receiver_trajectory))?;
    out.write("combined.csv", &combined_csv(&report))?;
    let text = out.write_json("transfer.json", &report.summary())?;
    print(&text);
    Ok(record(json!({
        "sender": config_json(&sender),
        "receiver": config_json(&receiver),
        "delay": delay,
        "window": grid_args.window,
        "samples": grid_args.samples,
        "model": ModelKind::from(model),
    })))
}

fn eigen(node: &NodeArgs, model: Model, out: &mut Outputs) -> CliResult<RunRecord> {
    let config = node.resolve()?;
    let cfg = config.normalized();
    let eig = match model {
        Model::Reduced => reduced_modes(&cfg)?,
        Model::Full => eigendecompose(&build_full_hamiltonian(&cfg)?)?,
    };
    let text = out.write_json("eigen.json", &eig.report())?;
    print(&text);
    Ok(record(json!({
        "node": config_json(&config),
        "model": ModelKind::from(model),
    })))
}

#[derive(Serialize)]
struct BetaSummary {
    beta: f64,
    t0_star: f64,
    pulse_norm: f64,
}

fn beta(
    source: &str,
    width: f64,
    center: Option<f64>,
    rate: f64,
    window: f64,
    samples: usize,
    out: &mut Outputs,
) -> CliResult<RunRecord> {
    let grid = || TimeGrid::new(0.0, window, samples);
    let pulse = match source {
        "gaussian" => Pulse::gaussian(grid()?, center.unwrap_or(0.5 * window), width)?,
        "exponential" => Pulse::one_sided_exponential(grid()?, rate)?,
        path => pulse_from_table(&read_table(read_file(Path::new(path))?.as_bytes())?)?,
    };
    let shape = symmetry_factor(&pulse)?;
    let text = out.write_json(
        "beta.json",
        &BetaSummary {
            beta: shape.beta,
            t0_star: shape.t0_star,
            pulse_norm: shape.pulse_norm,
        },
    )?;
    print(&text);
    Ok(record(json!({
        "pulse": source,
        "width": width,
        "center": center,
        "rate": rate,
        "window": window,
        "samples": samples,
    })))
}

fn optimize(n: usize, start: Option<&[f64]>, seed: u64, max_evals: usize, out: &mut Outputs) -> CliResult<RunRecord> {
    if n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    let start: Vec<f64> = match start {
        Some(s) => s.to_vec(),
        None => std::iter::repeat_n(2.0, n - 1).chain(std::iter::once(8.0)).collect(),
    };
    let opts = RefineOptions {
        seed,
        max_evaluations: max_evals,
        ..RefineOptions::default()
    };
    let report = refine_with(&start, n, &opts)?;
    let mut trace = String::from("evaluation,");
    trace.push_str(&parameter_names(n).join(","));
    trace.push_str(",beta,best_beta\n");
    for e in &report.trace {
        let mut row: Vec<String> = vec![e.evaluation.to_string()];
        row.extend(e.params.iter().map(|p| io::fmt_num(*p)));
        row.push(e.beta.map_or_else(|| "nan".to_string(), io::fmt_num));
        row.push(io::fmt_num(e.best_beta));
        trace.push_str(&row.join(","));
        trace.push('\n');
    }
    out.write("trace.csv", &trace)?;
    let text = out.write_json("optimum.json", &report)?;
    print(&text);
    Ok(record(json!({
        "n_rings": n,
        "start": start,
        "seed": seed,
        "max_evaluations": max_evals,
    })))
}

fn parse_sweep(n: usize, grid: &str, ranges: &str) -> CliResult<SweepSpec> {
    let steps: Vec<usize> = grid
        .split('x')
        .map(|s| s.trim().parse().map_err(|_| usage(format!("bad --grid `{grid}`"))))
        .collect::<CliResult<_>>()?;
    let steps = match steps.len() {
        1 => vec![steps[0]; n],
        k if k == n => steps,
        k => return Err(usage(format!("--grid has {k} axes, expected {n}"))),
    };
    let ranges: Vec<(f64, f64)> = ranges
        .split(',')
        .map(|r| {
            let (a, b) = r.split_once(':').ok_or_else(|| usage(format!("bad range `{r}`, use min:max")))?;
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| usage(format!("bad range `{r}`")));
            Ok((parse(a)?, parse(b)?))
        })
        .collect::<CliResult<_>>()?;
    if ranges.len() != n {
        return Err(usage(format!("--ranges has {} entries, expected {n}", ranges.len())));
    }
    let axes = ranges
        .iter()
        .zip(steps)
        .map(|(&(a, b), s)| ParamRange::new(a, b, s))
        .collect::<cascade_node::Result<Vec<_>>>()?;
    Ok(SweepSpec::new(n, axes)?)
}

#[derive(Serialize)]
struct SweepSummary {
    points: usize,
    parameter_names: Vec<String>,
    best_params: Vec<f64>,
    best_beta: f64,
}

fn sweep(n: usize, grid: &str, ranges: &str, workers: Option<usize>, out: &mut Outputs) -> CliResult<RunRecord> {
    let spec = parse_sweep(n, grid, ranges)?;
    if let Some(w) = workers {
        if w == 0 {
            return Err(usage("--workers must be at least 1"));
        }
        // only fails if a pool already exists, which keeps its size
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    let points = grid_sweep(&spec)?;
    let best = best_point(&points).ok_or_else(|| CliError::Failed("empty sweep".into()))?;
    out.write("sweep.csv", &sweep_csv(n, &points))?;
    let text = out.write_json(
        "sweep.json",
        &SweepSummary {
            points: points.len(),
            parameter_names: parameter_names(n),
            best_params: best.params.clone(),
            best_beta: best.beta,
        },
    )?;
    print(&text);
    Ok(record(json!({
        "n_rings": n,
        "ranges": spec.ranges,
        "workers": rayon::current_num_threads(),
    })))
}

#[derive(Serialize)]
struct CouplingSummary {
    /// rad/s
    g: f64,
    g_over_2pi_ghz: f64,
    lambda: f64,
    gamma0: f64,
    n_index: f64,
    v_eff: f64,
}

fn design_g(
    lambda_nm: f64,
    linewidth_hz: Option<f64>,
    gamma0: Option<f64>,
    n_index: f64,
    v_eff_um3: Option<f64>,
    v_eff_cubic: Option<f64>,
    out: &mut Outputs,
) -> CliResult<RunRecord> {
    let lambda = lambda_nm * 1e-9;
    let gamma0 = match (linewidth_hz, gamma0) {
        (Some(hz), None) => 2.0 * PI * hz,
        (None, Some(rad)) => rad,
        _ => return Err(usage("give exactly one of --linewidth-hz and --gamma0")),
    };
    let v_eff = match (v_eff_um3, v_eff_cubic) {
        (Some(v), None) => v * 1e-18,
        (None, Some(v)) => mode_volume_from_cubic_wavelengths(v, lambda, n_index),
        _ => return Err(usage("give exactly one of --v-eff-um3 and --v-eff-cubic")),
    };
    let spec = EmitterModeSpec {
        lambda,
        gamma0,
        n_index,
        v_eff,
    };
    let g = coupling_g(&spec)?;
    let text = out.write_json(
        "design_g.json",
        &CouplingSummary {
            g,
            g_over_2pi_ghz: g / (2.0 * PI * 1e9),
            lambda,
            gamma0,
            n_index,
            v_eff,
        },
    )?;
    print(&text);
    Ok(record(serde_json::to_value(spec).unwrap_or_default()))
}

fn read_rate_table(kind: TableKind, path: &Path) -> CliResult<GapRateTable> {
    Ok(GapRateTable::from_csv(kind, read_file(path)?.as_bytes())?)
}

fn design_gap(
    g: Option<f64>,
    g_ghz: Option<f64>,
    ratios: &[f64],
    ring_ring: &Path,
    ring_waveguide: &Path,
    interp: Interp,
    out: &mut Outputs,
) -> CliResult<RunRecord> {
    let g = match (g, g_ghz) {
        (Some(g), None) => g,
        (None, Some(ghz)) => 2.0 * PI * 1e9 * ghz,
        _ => return Err(usage("give exactly one of --g and --g-ghz")),
    };
    let interp = match interp {
        Interp::LogLinear => Interpolation::LogLinear,
        Interp::Linear => Interpolation::Linear,
    };
    let rr = read_rate_table(TableKind::RingRing, ring_ring)?;
    let rw = read_rate_table(TableKind::RingWaveguide, ring_waveguide)?;
    let plan = plan_node(g, ratios, &rr, &rw, interp)?;
    let text = out.write_json("plan.json", &plan)?;
    print(&text);
    let rows = |t: &GapRateTable| t.rows().iter().map(|&r| TableRow::from(r)).collect::<Vec<_>>();
    Ok(record(json!({
        "g": g,
        "ratios": ratios,
        "interpolation": interp,
        "ring_ring": rows(&rr),
        "ring_waveguide": rows(&rw),
    })))
}

#[derive(Serialize)]
struct ValidateSummary {
    passed: bool,
    failed: usize,
    results: Vec<checks::CheckResult>,
}

fn validate(config: Option<&PathBuf>, out: &mut Outputs) -> CliResult<RunRecord> {
    let mut configs = checks::reference_configs();
    if let Some(path) = config {
        configs.push(load_config_file(path)?);
    }
    let results = checks::run_suite(&configs);
    let failed = results.iter().filter(|r| !r.passed).count();
    let summary = ValidateSummary {
        passed: failed == 0,
        failed,
        results,
    };
    let text = out.write_json("validate.json", &summary)?;
    print(&text);
    if failed > 0 {
        return Err(CliError::Failed(format!("{failed} checks failed, see validate.json")));
    }
    Ok(record(json!({
        "configs": configs.iter().map(config_json).collect::<Vec<_>>(),
    })))
}

fn plot_command(figure: &PlotKind, out: &mut Outputs) -> CliResult<RunRecord> {
    let read = |path: &Path| -> CliResult<io::Table> {
        read_table(read_file(path)?.as_bytes()).map_err(|e| CliError::Malformed(format!("{}: {e}", path.display())))
    };
    match figure {
        PlotKind::Transfer { input } => {
            out.write("transfer.svg", &plot::transfer_svg(&read(input)?)?)?;
            Ok(record(json!({ "figure": "transfer", "input": input })))
        }
        PlotKind::Pulse { input } => {
            out.write("pulse.svg", &plot::pulse_svg(&read(input)?)?)?;
            Ok(record(json!({ "figure": "pulse", "input": input })))
        }
        PlotKind::Contour {
            input,
            kappa,
            levels,
            mark,
        } => {
            let mark = match mark.as_slice() {
                [x, y] => (*x, *y),
                _ => return Err(usage("--mark takes two values")),
            };
            let slice = plot::SweepSlice::from_table(&read(input)?, *kappa)?;
            out.write("contour.svg", &plot::contour_svg(&slice, levels, mark))?;
            Ok(record(json!({
                "figure": "contour",
                "input": input,
                "kappa": slice.kappa,
                "levels": levels,
            })))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_arguments() {
        let spec = parse_sweep(3, "4x5x6", "0.5:5, 0.5:5, 2:14").unwrap();
        assert_eq!(spec.point_count(), 120);
        assert_eq!(parse_sweep(2, "7", "1:2,3:4").unwrap().point_count(), 49);
        assert!(parse_sweep(3, "4x5", "1:2,1:2,1:2").is_err());
        assert!(parse_sweep(2, "4", "1-2,1:2").is_err());
        assert!(parse_sweep(2, "4", "1:2").is_err());
    }

    #[test]
    fn defaults_are_consistent() {
        let cli = Cli::try_parse_from(["cascade-node", "beta", "--pulse", "gaussian"]).unwrap();
        assert_eq!(cli.out, PathBuf::from("cascade-out"));
        assert_eq!(cli.command.name(), "beta");
    }
}
