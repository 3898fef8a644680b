//! `emtc` — fault location for overhead lines by electromagnetic transient
//! convolution. Subcommands: precalc, simulate, locate, sweep, analyze.

mod analyze;
mod envelope;
mod sweep;
mod units;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use emtc_core::locator::{
    self, locate_aerial_with, locate_naive, Excitation, GflDatabase, LocateError, ModeId,
    PrecalcOptions, StoredSignals,
};
use emtc_core::network::{parse_network, FaultSpec, FaultType, NetworkSpec};
use emtc_core::solver::{simulate_fault, SolveGrid};

use envelope::{MeasurementEnvelope, PredictedLocation, ResultDocument, TruthAnnotation};

/// Process failure with a stable exit-code contract:
/// 2 usage, 3 incompatible inputs, 4 runtime/numerical failure.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Compatibility(String),
    Runtime(String),
}

impl CliError {
    pub fn usage(e: impl std::fmt::Display) -> Self {
        CliError::Usage(e.to_string())
    }

    pub fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }

    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Compatibility(_) => ExitCode::from(3),
            CliError::Runtime(_) => ExitCode::from(4),
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Compatibility(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<LocateError> for CliError {
    fn from(e: LocateError) -> Self {
        match e {
            LocateError::Compatibility { .. } => CliError::Compatibility(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<emtc_core::solver::SolverError> for CliError {
    fn from(e: emtc_core::solver::SolverError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<emtc_core::network::NetworkError> for CliError {
    fn from(e: emtc_core::network::NetworkError) -> Self {
        CliError::Usage(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "emtc",
    version,
    about = "Fault location on overhead lines by electromagnetic transient convolution"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pre-calculate the GFL transient database for a network.
    Precalc(PrecalcArgs),
    /// Simulate a fault and write the measured transient envelope.
    Simulate(SimulateArgs),
    /// Locate a fault from a measurement envelope against a database.
    Locate(LocateArgs),
    /// Run a scenario matrix and emit the EMTC-vs-TDOA error report.
    Sweep(SweepArgs),
    /// Emit velocity curves, the error model, or spectral energy ratios.
    Analyze(analyze::AnalyzeArgs),
}

#[derive(Args)]
struct GridArgs {
    /// Sample interval, e.g. 0.1us.
    #[arg(long, default_value = "0.1us", value_parser = units::parse_time)]
    dt: f64,
    /// Signal duration, e.g. 5ms.
    #[arg(long, default_value = "5ms", value_parser = units::parse_time)]
    duration: f64,
}

impl GridArgs {
    fn grid(&self) -> Result<SolveGrid, CliError> {
        let n = (self.duration / self.dt).round() as usize;
        SolveGrid::new(self.dt, n.max(2)).map_err(CliError::usage)
    }
}

#[derive(Args)]
struct PrecalcArgs {
    /// Network config JSON.
    #[arg(long)]
    network: PathBuf,
    /// GFL spacing, e.g. 10m.
    #[arg(long, value_parser = units::parse_length)]
    spacing: f64,
    /// Excitation: "impulse", "impulse:amplitude=10kV,alpha=20us,beta=3us",
    /// or "rect:width=1us,amplitude=10kV".
    #[arg(long, default_value = "impulse")]
    excitation: String,
    /// Fault-branch classes to pre-calculate (comma separated).
    #[arg(long, default_value = "pg-a,pp-bc,3p", value_delimiter = ',')]
    types: Vec<String>,
    /// Stored signals per GFL and fault type.
    #[arg(long, value_enum, default_value_t = StoreChoice::All)]
    store: StoreChoice,
    /// Short-circuit branch resistance at the GFLs.
    #[arg(long, default_value = "1ohm", value_parser = units::parse_resistance)]
    branch: f64,
    #[command(flatten)]
    grid: GridArgs,
    /// Output database path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum StoreChoice {
    /// Ground, alpha, beta and raw phase records.
    All,
    /// Aerial (alpha + beta) records only.
    Aerial,
    /// Raw faulted-phase records only.
    Raw,
}

impl StoreChoice {
    fn signals(self) -> StoredSignals {
        match self {
            StoreChoice::All => StoredSignals::default(),
            StoreChoice::Aerial => StoredSignals::aerial_only(),
            StoreChoice::Raw => StoredSignals::raw_only(),
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    network: PathBuf,
    /// Faulted segment id.
    #[arg(long)]
    segment: String,
    /// Fault position from the segment's `from` node, e.g. 15km.
    #[arg(long, value_parser = units::parse_length)]
    position: f64,
    /// Fault type: pg-a, pg-b, pg-c, pp-ab, pp-bc, pp-ca, 3p.
    #[arg(long = "type")]
    fault_type: String,
    /// Inception angle, e.g. 90deg.
    #[arg(long, default_value = "90deg", value_parser = units::parse_angle_deg)]
    angle: f64,
    /// Fault impedance, e.g. 10ohm.
    #[arg(long, default_value = "10ohm", value_parser = units::parse_resistance)]
    impedance: f64,
    #[command(flatten)]
    grid: GridArgs,
    /// Measurement envelope output path.
    #[arg(long)]
    out: PathBuf,
    /// Also record the transient at this node (far terminal for TDOA).
    #[arg(long)]
    observe: Option<String>,
    /// Envelope path for the --observe node.
    #[arg(long)]
    out_far: Option<PathBuf>,
}

#[derive(Args)]
struct LocateArgs {
    /// GFL database path.
    #[arg(long)]
    db: PathBuf,
    /// Network config the database was generated from.
    #[arg(long)]
    network: PathBuf,
    /// Measurement envelope path.
    #[arg(long)]
    measurement: PathBuf,
    /// naive (phase-domain) or aerial (Clarke-mode) location.
    #[arg(long, value_enum, default_value_t = Method::Aerial)]
    method: Method,
    /// Fault-type override (otherwise classified from the waveform).
    #[arg(long = "type")]
    fault_type: Option<String>,
    /// Aerial-mode override: alpha or beta.
    #[arg(long)]
    mode: Option<String>,
    /// Result JSON path.
    #[arg(long)]
    out: PathBuf,
    /// Normalized CSE curve CSV path.
    #[arg(long)]
    curve: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Method {
    Naive,
    Aerial,
}

#[derive(Args)]
struct SweepArgs {
    /// Scenario matrix JSON.
    #[arg(long)]
    matrix: PathBuf,
    /// Override the matrix's output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    if let Ok(workers) = std::env::var("EMTC_WORKERS") {
        if let Ok(n) = workers.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Precalc(args) => cmd_precalc(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Locate(args) => cmd_locate(args),
        Command::Sweep(args) => sweep::cmd_sweep(&args.matrix, args.out.as_deref()),
        Command::Analyze(args) => analyze::cmd_analyze(args),
    }
}

fn load_network(path: &std::path::Path) -> Result<NetworkSpec, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    parse_network(&text).map_err(CliError::usage)
}

pub(crate) fn load_network_for_analysis(path: &std::path::Path) -> Result<NetworkSpec, CliError> {
    load_network(path)
}

pub fn parse_excitation(spec: &str) -> Result<Excitation, CliError> {
    let (name, params) = match spec.split_once(':') {
        Some((n, p)) => (n, Some(p)),
        None => (spec, None),
    };
    let mut amplitude = 10e3;
    let mut alpha = 20e-6;
    let mut beta = 3e-6;
    let mut width = 1e-6;
    if let Some(params) = params {
        for item in params.split(',') {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("bad excitation parameter `{item}`")))?;
            match key.trim() {
                "amplitude" => amplitude = units::parse_voltage(value).map_err(CliError::Usage)?,
                "alpha" => alpha = units::parse_time(value).map_err(CliError::Usage)?,
                "beta" => beta = units::parse_time(value).map_err(CliError::Usage)?,
                "width" => width = units::parse_time(value).map_err(CliError::Usage)?,
                other => {
                    return Err(CliError::Usage(format!("unknown excitation parameter `{other}`")))
                }
            }
        }
    }
    match name.trim() {
        "impulse" => Ok(Excitation::LightningImpulse {
            amplitude_v: amplitude,
            alpha_s: alpha,
            beta_s: beta,
        }),
        "rect" => Ok(Excitation::Rectangular { amplitude_v: amplitude, width_s: width }),
        other => Err(CliError::Usage(format!(
            "unknown excitation `{other}` (expected impulse or rect)"
        ))),
    }
}

fn parse_types(names: &[String]) -> Result<Vec<FaultType>, CliError> {
    names
        .iter()
        .map(|n| {
            FaultType::parse(n)
                .ok_or_else(|| CliError::Usage(format!("unknown fault type `{n}`")))
        })
        .collect()
}

fn cmd_precalc(args: PrecalcArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let net = load_network(&args.network)?;
    let excitation = parse_excitation(&args.excitation)?;
    let grid = args.grid.grid()?;
    let mut opts = PrecalcOptions::new(args.spacing, parse_types(&args.types)?);
    opts.store = args.store.signals();
    opts.branch_resistance_ohm = args.branch;
    let db = locator::precalculate(&net, grid, &excitation, &opts)?;
    db.save(&args.out).map_err(CliError::runtime)?;
    let gfl_count = db
        .records
        .iter()
        .map(|r| (r.segment, r.position_m.to_bits()))
        .collect::<std::collections::HashSet<_>>()
        .len();
    println!(
        "wrote {} records ({} GFLs at {} m spacing) to {} in {:.2} s",
        db.records.len(),
        gfl_count,
        args.spacing,
        args.out.display(),
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let net = load_network(&args.network)?;
    let segment = net
        .segment_by_id(&args.segment)
        .ok_or_else(|| CliError::Usage(format!("unknown segment `{}`", args.segment)))?;
    let fault_type = FaultType::parse(&args.fault_type)
        .ok_or_else(|| CliError::Usage(format!("unknown fault type `{}`", args.fault_type)))?;
    let length = net.segments[segment].length_m;
    if !(0.0..=length).contains(&args.position) {
        return Err(CliError::Usage(format!(
            "position {} m outside segment `{}` of length {} m",
            args.position, args.segment, length
        )));
    }
    let grid = args.grid.grid()?;
    let fault = FaultSpec {
        segment,
        position_m: args.position,
        fault_type,
        impedance_ohm: args.impedance,
        inception_angle_deg: args.angle,
    };
    let mut observers = vec![net.measurement];
    if let Some(far) = &args.observe {
        let node = net
            .nodes
            .iter()
            .position(|n| n == far)
            .ok_or_else(|| CliError::Usage(format!("unknown node `{far}`")))?;
        observers.push(node);
    }
    let sim = simulate_fault(&net, &fault, grid, &observers)?;
    let truth = TruthAnnotation {
        segment: args.segment.clone(),
        position_m: args.position,
        fault_type: fault_type.name().into(),
        angle_deg: args.angle,
        impedance_ohm: args.impedance,
    };
    MeasurementEnvelope::from_output(&sim.observers[0], Some(truth.clone())).save(&args.out)?;
    println!(
        "simulated {} at {} m on `{}`: {} samples per phase -> {}",
        fault_type,
        args.position,
        args.segment,
        sim.observers[0].phases.len(),
        args.out.display()
    );
    if let Some(far_out) = &args.out_far {
        if sim.observers.len() < 2 {
            return Err(CliError::Usage("--out-far requires --observe".into()));
        }
        MeasurementEnvelope::from_output(&sim.observers[1], Some(truth)).save(far_out)?;
        println!("far-terminal envelope -> {}", far_out.display());
    }
    Ok(())
}

fn cmd_locate(args: LocateArgs) -> Result<(), CliError> {
    let net = load_network(&args.network)?;
    let db = GflDatabase::load(&args.db)?;
    let env = MeasurementEnvelope::load(&args.measurement)?;
    let measured = env.to_phase_triple()?;
    let type_override = match &args.fault_type {
        Some(name) => Some(
            FaultType::parse(name)
                .ok_or_else(|| CliError::Usage(format!("unknown fault type `{name}`")))?,
        ),
        None => None,
    };
    let result = match args.method {
        Method::Aerial => {
            let mode_override = match args.mode.as_deref() {
                None => None,
                Some("alpha") => Some(ModeId::Alpha),
                Some("beta") => Some(ModeId::Beta),
                Some(other) => {
                    return Err(CliError::Usage(format!(
                        "unknown mode `{other}` (expected alpha or beta)"
                    )))
                }
            };
            locate_aerial_with(&db, &net, &measured, type_override, mode_override)?
        }
        Method::Naive => {
            let fault_type = type_override
                .or_else(|| env.truth_fault_type())
                .or_else(|| locator::classify_fault(&measured).fault_type)
                .ok_or_else(|| {
                    CliError::Usage(
                        "naive location needs --type (classification was ambiguous)".into(),
                    )
                })?;
            locate_naive(&db, &net, &measured, fault_type)?
        }
    };
    let segment_id = net.segments[result.segment as usize].id.clone();
    let error_m = env
        .truth
        .as_ref()
        .and_then(|t| (t.segment == segment_id).then_some(result.position_m - t.position_m));
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    match (&env.truth, error_m) {
        (Some(t), Some(e)) => println!(
            "predicted segment={segment_id} position={:.1} m (truth {:.1} m on {}, error {:+.1} m)",
            result.position_m, t.position_m, t.segment, e
        ),
        (Some(t), None) => println!(
            "predicted segment={segment_id} position={:.1} m (truth was on segment {})",
            result.position_m, t.segment
        ),
        _ => println!(
            "predicted segment={segment_id} position={:.1} m",
            result.position_m
        ),
    }
    if let Some(curve_path) = &args.curve {
        let mut csv = String::from("segment,position_m,normalized_cse\n");
        for p in result.cse_curve() {
            csv.push_str(&format!(
                "{},{},{}\n",
                net.segments[p.segment as usize].id, p.position_m, p.energy
            ));
        }
        std::fs::write(curve_path, csv).map_err(CliError::runtime)?;
    }
    let doc = ResultDocument {
        predicted: PredictedLocation { segment: segment_id, position_m: result.position_m },
        fault_type: result.fault_type.name().into(),
        mode: result.mode.name().into(),
        runtime_s: result.runtime_s,
        error_m,
        warnings: result.warnings.clone(),
        curve_csv: args.curve.as_ref().map(|p| p.display().to_string()),
    };
    let file = std::fs::File::create(&args.out).map_err(CliError::runtime)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), &doc)
        .map_err(CliError::runtime)?;
    Ok(())
}
