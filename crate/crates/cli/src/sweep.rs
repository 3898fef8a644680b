//! Scenario-matrix sweeps: batches of fault simulations located by aerial
//! EMTC and, where a far terminal is configured, by the two TDOA metrics,
//! with per-scenario rows and a per-method mean-error summary.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use emtc_core::line::C0;
use emtc_core::locator::{self, locate_aerial_with, GflDatabase, PrecalcOptions, StoredSignals};
use emtc_core::network::{FaultSpec, FaultType, NetworkSpec};
use emtc_core::signal::Waveform;
use emtc_core::solver::{simulate_fault, SimulationOutput, SolveGrid};
use emtc_core::tdoa::{self, ArrivalTimes};

use crate::{parse_excitation, CliError};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioMatrix {
    pub version: u32,
    /// Network config path, relative to the matrix file.
    pub network: String,
    /// Database path: loaded when present on disk, else pre-calculated and
    /// saved there.
    #[serde(default)]
    pub database: Option<String>,
    pub spacing_m: f64,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    pub fault_types: Vec<String>,
    /// Explicit fault points; alternative to `segment` + `positions_m`.
    #[serde(default)]
    pub scenarios: Option<Vec<ScenarioPoint>>,
    #[serde(default)]
    pub segment: Option<String>,
    #[serde(default)]
    pub positions_m: Option<Vec<f64>>,
    #[serde(default = "default_angles")]
    pub angles_deg: Vec<f64>,
    #[serde(default = "default_impedances")]
    pub impedances_ohm: Vec<f64>,
    /// Ground-resistivity axis; defaults to the config's value. One database
    /// serves every resistivity (pre-calculation is constant-parameter).
    #[serde(default)]
    pub ground_resistivities_ohm_m: Option<Vec<f64>>,
    #[serde(default = "default_excitation")]
    pub excitation: String,
    #[serde(default = "default_branch")]
    pub branch_resistance_ohm: f64,
    /// Stored record kinds for an on-the-fly pre-calculation:
    /// "all", "aerial" or "raw".
    #[serde(default = "default_store")]
    pub store: String,
    #[serde(default)]
    pub tdoa: Option<TdoaSettings>,
    pub output: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioPoint {
    pub segment: String,
    pub position_m: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TdoaSettings {
    pub far_node: String,
    #[serde(default = "default_window")]
    pub window_samples: usize,
}

fn default_dt() -> f64 {
    1e-7
}
fn default_duration() -> f64 {
    5e-3
}
fn default_angles() -> Vec<f64> {
    vec![90.0]
}
fn default_impedances() -> Vec<f64> {
    vec![10.0]
}
fn default_excitation() -> String {
    "impulse".into()
}
fn default_branch() -> f64 {
    1.0
}
fn default_store() -> String {
    "all".into()
}
fn default_window() -> usize {
    10
}

#[derive(Debug, Default, Clone)]
pub struct SweepSummary {
    pub rows: usize,
    pub failures: usize,
    pub emtc_errors_m: Vec<f64>,
    pub classic_errors_m: Vec<f64>,
    pub free_errors_m: Vec<f64>,
}

impl SweepSummary {
    pub fn mean_abs(errors: &[f64]) -> Option<f64> {
        if errors.is_empty() {
            None
        } else {
            Some(errors.iter().map(|e| e.abs()).sum::<f64>() / errors.len() as f64)
        }
    }
}

pub fn cmd_sweep(matrix_path: &Path, out_override: Option<&Path>) -> Result<(), CliError> {
    let (csv, summary, output) = run_matrix_file(matrix_path, out_override)?;
    std::fs::write(&output, csv).map_err(CliError::runtime)?;
    println!(
        "sweep: {} scenarios ({} failed) -> {}",
        summary.rows,
        summary.failures,
        output.display()
    );
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |m| format!("{m:.1} m"));
    println!(
        "mean |error|: emtc={} tdoa-classic={} tdoa-setting-free={}",
        fmt(SweepSummary::mean_abs(&summary.emtc_errors_m)),
        fmt(SweepSummary::mean_abs(&summary.classic_errors_m)),
        fmt(SweepSummary::mean_abs(&summary.free_errors_m)),
    );
    Ok(())
}

/// Runs a matrix file, returning the CSV text, the summary and the output
/// path (so tests and the acceptance suite can inspect results directly).
pub fn run_matrix_file(
    matrix_path: &Path,
    out_override: Option<&Path>,
) -> Result<(String, SweepSummary, PathBuf), CliError> {
    let text = std::fs::read_to_string(matrix_path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", matrix_path.display())))?;
    let matrix: ScenarioMatrix =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("matrix: {e}")))?;
    if matrix.version != 1 {
        return Err(CliError::Usage(format!("unsupported matrix version {}", matrix.version)));
    }
    let base = matrix_path.parent().unwrap_or(Path::new("."));
    let net_path = base.join(&matrix.network);
    let net_text = std::fs::read_to_string(&net_path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", net_path.display())))?;
    let net = emtc_core::network::parse_network(&net_text).map_err(CliError::usage)?;
    let output = out_override
        .map(Path::to_path_buf)
        .unwrap_or_else(|| base.join(&matrix.output));
    let (csv, summary) = run_matrix(&matrix, &net, base)?;
    Ok((csv, summary, output))
}

fn build_or_load_db(
    matrix: &ScenarioMatrix,
    net: &NetworkSpec,
    grid: SolveGrid,
    base: &Path,
) -> Result<GflDatabase, CliError> {
    if let Some(db_rel) = &matrix.database {
        let db_path = base.join(db_rel);
        if db_path.exists() {
            let db = GflDatabase::load(&db_path)?;
            if db.header.network_digest != net.digest() {
                return Err(CliError::Compatibility(format!(
                    "database {} digest {:016x} does not match network digest {:016x}",
                    db_path.display(),
                    db.header.network_digest,
                    net.digest()
                )));
            }
            return Ok(db);
        }
    }
    let excitation = parse_excitation(&matrix.excitation)?;
    let types = matrix
        .fault_types
        .iter()
        .map(|n| {
            FaultType::parse(n).ok_or_else(|| CliError::Usage(format!("unknown fault type `{n}`")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut opts = PrecalcOptions::new(matrix.spacing_m, types);
    opts.branch_resistance_ohm = matrix.branch_resistance_ohm;
    opts.store = match matrix.store.as_str() {
        "all" => StoredSignals::default(),
        "aerial" => StoredSignals::aerial_only(),
        "raw" => StoredSignals::raw_only(),
        other => return Err(CliError::Usage(format!("unknown store choice `{other}`"))),
    };
    let db = locator::precalculate(net, grid, &excitation, &opts)?;
    if let Some(db_rel) = &matrix.database {
        db.save(&base.join(db_rel)).map_err(CliError::runtime)?;
    }
    Ok(db)
}

struct TdoaOutcome {
    classic_m: Option<f64>,
    classic_err: Option<f64>,
    free_m: Option<f64>,
    free_err: Option<f64>,
}

fn run_tdoa(
    net: &NetworkSpec,
    settings: &TdoaSettings,
    near: &SimulationOutput,
    far: &SimulationOutput,
    fault: &FaultSpec,
    reference_phase: usize,
) -> Result<TdoaOutcome, String> {
    let seg = &net.segments[fault.segment];
    let length = seg.length_m;
    fn pick(out: &SimulationOutput, reference_phase: usize) -> &Waveform {
        match reference_phase {
            0 => &out.phases.a,
            1 => &out.phases.b,
            _ => &out.phases.c,
        }
    }
    let window = settings.window_samples;
    let detect = |out: &SimulationOutput| -> Result<tdoa::TerminalArrivals, String> {
        let filtered =
            tdoa::diff_smoother(pick(out, reference_phase), window).map_err(|e| e.to_string())?;
        let rms = out.prefault_rms[reference_phase];
        tdoa::detect_arrivals(&filtered, rms, window).map_err(|e| e.to_string())
    };
    let near_arr = detect(near)?;
    let far_arr = detect(far)?;
    let times = ArrivalTimes::new(near_arr, far_arr).map_err(|e| e.to_string())?;
    // Positions referred to the measurement terminal of the faulted segment.
    let from_measurement_end = seg.from == near.node;
    let truth_from_meas = if from_measurement_end {
        fault.position_m
    } else {
        length - fault.position_m
    };
    let classic = tdoa::tdoa_classic(&times, C0, length);
    let free = tdoa::tdoa_setting_free(&times, length).map_err(|e| e.to_string())?;
    Ok(TdoaOutcome {
        classic_m: Some(classic.position_m),
        classic_err: Some(classic.position_m - truth_from_meas),
        free_m: Some(free.position_m),
        free_err: Some(free.position_m - truth_from_meas),
    })
}

pub fn run_matrix(
    matrix: &ScenarioMatrix,
    net: &NetworkSpec,
    base: &Path,
) -> Result<(String, SweepSummary), CliError> {
    let n_samples = (matrix.duration_s / matrix.dt_s).round() as usize;
    let grid = SolveGrid::new(matrix.dt_s, n_samples).map_err(CliError::usage)?;
    let db = build_or_load_db(matrix, net, grid, base)?;

    let types = matrix
        .fault_types
        .iter()
        .map(|n| {
            FaultType::parse(n).ok_or_else(|| CliError::Usage(format!("unknown fault type `{n}`")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let points: Vec<(usize, f64)> = match (&matrix.scenarios, &matrix.segment, &matrix.positions_m)
    {
        (Some(list), _, _) => list
            .iter()
            .map(|p| {
                net.segment_by_id(&p.segment)
                    .map(|si| (si, p.position_m))
                    .ok_or_else(|| CliError::Usage(format!("unknown segment `{}`", p.segment)))
            })
            .collect::<Result<Vec<_>, _>>()?,
        (None, Some(seg), Some(positions)) => {
            let si = net
                .segment_by_id(seg)
                .ok_or_else(|| CliError::Usage(format!("unknown segment `{seg}`")))?;
            positions.iter().map(|&p| (si, p)).collect()
        }
        _ => {
            return Err(CliError::Usage(
                "matrix needs either `scenarios` or `segment` + `positions_m`".into(),
            ))
        }
    };
    let rhos = matrix
        .ground_resistivities_ohm_m
        .clone()
        .unwrap_or_else(|| vec![net.ground.resistivity_ohm_m]);

    let far_node = match &matrix.tdoa {
        Some(t) => Some(
            net.nodes
                .iter()
                .position(|n| n == &t.far_node)
                .ok_or_else(|| CliError::Usage(format!("unknown tdoa node `{}`", t.far_node)))?,
        ),
        None => None,
    };

    let mut csv = String::from(
        "rho_ohm_m,fault_type,segment,position_m,angle_deg,impedance_ohm,\
         emtc_segment,emtc_position_m,emtc_error_m,\
         tdoa_classic_m,tdoa_classic_error_m,tdoa_free_m,tdoa_free_error_m,status\n",
    );
    let mut summary = SweepSummary::default();

    for &rho in &rhos {
        // Faults are simulated with the swept resistivity; location runs
        // against the base network the database was generated from.
        let net_rho = net.with_ground_resistivity(rho);
        for &fault_type in &types {
            for &(segment, position_m) in &points {
                for &angle in &matrix.angles_deg {
                    for &impedance in &matrix.impedances_ohm {
                        summary.rows += 1;
                        let fault = FaultSpec {
                            segment,
                            position_m,
                            fault_type,
                            impedance_ohm: impedance,
                            inception_angle_deg: angle,
                        };
                        let seg_id = &net.segments[segment].id;
                        let prefix = format!(
                            "{rho},{fault_type},{seg_id},{position_m},{angle},{impedance}"
                        );
                        match run_scenario(net, &net_rho, &db, &fault, grid, far_node, matrix) {
                            Ok(row) => {
                                if let Some(e) = row.emtc_err {
                                    summary.emtc_errors_m.push(e);
                                }
                                if let Some(e) = row.tdoa.classic_err {
                                    summary.classic_errors_m.push(e);
                                }
                                if let Some(e) = row.tdoa.free_err {
                                    summary.free_errors_m.push(e);
                                }
                                let opt = |v: Option<f64>| {
                                    v.map_or(String::new(), |x| format!("{x:.3}"))
                                };
                                csv.push_str(&format!(
                                    "{prefix},{},{:.3},{},{},{},{},{},{}\n",
                                    row.emtc_segment,
                                    row.emtc_position,
                                    opt(row.emtc_err),
                                    opt(row.tdoa.classic_m),
                                    opt(row.tdoa.classic_err),
                                    opt(row.tdoa.free_m),
                                    opt(row.tdoa.free_err),
                                    row.status
                                ));
                            }
                            Err(msg) => {
                                summary.failures += 1;
                                csv.push_str(&format!("{prefix},,,,,,,,failed: {msg}\n"));
                            }
                        }
                    }
                }
            }
        }
    }
    csv.push_str(&format!(
        "# scenarios={} failed={}\n",
        summary.rows, summary.failures
    ));
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |m| format!("{m:.3}"));
    csv.push_str(&format!(
        "# mean_abs_error_m emtc={} tdoa_classic={} tdoa_free={}\n",
        fmt(SweepSummary::mean_abs(&summary.emtc_errors_m)),
        fmt(SweepSummary::mean_abs(&summary.classic_errors_m)),
        fmt(SweepSummary::mean_abs(&summary.free_errors_m)),
    ));
    Ok((csv, summary))
}

struct ScenarioRow {
    emtc_segment: String,
    emtc_position: f64,
    emtc_err: Option<f64>,
    tdoa: TdoaOutcome,
    status: String,
}

fn run_scenario(
    base_net: &NetworkSpec,
    sim_net: &NetworkSpec,
    db: &GflDatabase,
    fault: &FaultSpec,
    grid: SolveGrid,
    far_node: Option<usize>,
    matrix: &ScenarioMatrix,
) -> Result<ScenarioRow, String> {
    let mut observers = vec![sim_net.measurement];
    if let Some(far) = far_node {
        observers.push(far);
    }
    let sim = simulate_fault(sim_net, fault, grid, &observers).map_err(|e| e.to_string())?;
    let measured = &sim.observers[0].phases;
    let located = locate_aerial_with(db, base_net, measured, Some(fault.fault_type), None)
        .map_err(|e| e.to_string())?;
    let located_segment = base_net.segments[located.segment as usize].id.clone();
    let same_segment = located.segment as usize == fault.segment;
    let emtc_err = same_segment.then_some(located.position_m - fault.position_m);
    let mut status = if same_segment { "ok".to_string() } else { "wrong-segment".to_string() };

    let tdoa = match (far_node, &matrix.tdoa) {
        (Some(_), Some(settings)) => {
            match run_tdoa(
                base_net,
                settings,
                &sim.observers[0],
                &sim.observers[1],
                fault,
                fault.fault_type.reference_phase(),
            ) {
                Ok(outcome) => outcome,
                Err(msg) => {
                    status = format!("tdoa-failed: {msg}");
                    TdoaOutcome {
                        classic_m: None,
                        classic_err: None,
                        free_m: None,
                        free_err: None,
                    }
                }
            }
        }
        _ => TdoaOutcome { classic_m: None, classic_err: None, free_m: None, free_err: None },
    };
    Ok(ScenarioRow {
        emtc_segment: located_segment,
        emtc_position: located.position_m,
        emtc_err,
        tdoa,
        status,
    })
}
