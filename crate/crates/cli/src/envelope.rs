//! Measurement envelope: the JSON document a simulated (or field-recorded)
//! three-phase transient travels in, including optional truth annotations so
//! sweeps can self-score, and the result document the locator emits.

use std::path::Path;

use serde::{Deserialize, Serialize};

use emtc_core::network::FaultType;
use emtc_core::signal::{PhaseTriple, Waveform};
use emtc_core::solver::SimulationOutput;

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthAnnotation {
    pub segment: String,
    pub position_m: f64,
    pub fault_type: String,
    pub angle_deg: f64,
    pub impedance_ohm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementEnvelope {
    pub version: u32,
    pub dt: f64,
    pub t0: f64,
    pub unit: String,
    pub phases: Phases,
    /// Prefault RMS voltage per phase at the observation point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefault_rms_v: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<TruthAnnotation>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phases {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl MeasurementEnvelope {
    pub fn from_output(out: &SimulationOutput, truth: Option<TruthAnnotation>) -> Self {
        Self {
            version: 1,
            dt: out.phases.dt(),
            t0: out.phases.a.t0(),
            unit: "V".into(),
            phases: Phases {
                a: out.phases.a.samples().to_vec(),
                b: out.phases.b.samples().to_vec(),
                c: out.phases.c.samples().to_vec(),
            },
            prefault_rms_v: Some(out.prefault_rms),
            truth,
        }
    }

    pub fn to_phase_triple(&self) -> Result<PhaseTriple, CliError> {
        let wave = |v: &[f64]| Waveform::new(self.dt, self.t0, v.to_vec());
        PhaseTriple::new(
            wave(&self.phases.a).map_err(CliError::runtime)?,
            wave(&self.phases.b).map_err(CliError::runtime)?,
            wave(&self.phases.c).map_err(CliError::runtime)?,
        )
        .map_err(CliError::runtime)
    }

    pub fn truth_fault_type(&self) -> Option<FaultType> {
        self.truth.as_ref().and_then(|t| FaultType::parse(&t.fault_type))
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let file = std::fs::File::create(path).map_err(CliError::runtime)?;
        serde_json::to_writer(std::io::BufWriter::new(file), self).map_err(CliError::runtime)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let file = std::fs::File::open(path).map_err(CliError::runtime)?;
        serde_json::from_reader(std::io::BufReader::new(file)).map_err(CliError::runtime)
    }
}

/// Location result document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultDocument {
    pub predicted: PredictedLocation,
    pub fault_type: String,
    pub mode: String,
    pub runtime_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_m: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve_csv: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictedLocation {
    pub segment: String,
    pub position_m: f64,
}
