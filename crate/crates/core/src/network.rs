//! Topology description of branched power networks: segments, lumped
//! terminations, sources, the measurement node, plus GFL enumeration and
//! fault-branch insertion.
//!
//! Networks are parsed from a JSON config document (see `parse_network`) and
//! validated into an immutable index-based form. All phases share the same
//! termination and source impedances; transformers are represented by their
//! high-frequency input impedance (a lumped resistance).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::line::{GroundModel, WireGeometry};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("config parse error: {0}")]
    Json(String),
    #[error("unsupported config version {0}, expected 1")]
    Version(u32),
    #[error("reference to undeclared node `{0}`")]
    DanglingNode(String),
    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },
    #[error("graph is disconnected: node `{0}` is unreachable from the measurement node")]
    Disconnected(String),
    #[error("invalid network: {0}")]
    Invalid(String),
    #[error("position {position} m outside segment `{segment}` of length {length} m")]
    PositionRange {
        segment: String,
        position: f64,
        length: f64,
    },
    #[error("unknown segment index {0}")]
    UnknownSegment(usize),
    #[error(transparent)]
    Line(#[from] crate::line::LineError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Constant,
    FrequencyDependent,
}

/// One uniform line segment between two declared nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineSegment {
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub length_m: f64,
    pub model: ModelKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Termination {
    pub node: usize,
    pub impedance_ohm: f64,
}

/// A balanced three-phase source behind a per-phase internal impedance.
/// `amplitude_v` is the phase-a peak; phases b and c lag/lead by 120°.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceSpec {
    pub node: usize,
    pub amplitude_v: f64,
    pub frequency_hz: f64,
    pub phase_deg: f64,
    pub impedance_ohm: f64,
}

/// Validated, index-based network description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkSpec {
    pub nodes: Vec<String>,
    pub segments: Vec<LineSegment>,
    pub terminations: Vec<Termination>,
    pub sources: Vec<SourceSpec>,
    pub measurement: usize,
    pub ground: GroundModel,
    pub geometry: WireGeometry,
}

/// Short-circuit fault classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultType {
    PgA,
    PgB,
    PgC,
    PpAb,
    PpBc,
    PpCa,
    ThreePhase,
}

impl FaultType {
    pub const ALL: [FaultType; 7] = [
        FaultType::PgA,
        FaultType::PgB,
        FaultType::PgC,
        FaultType::PpAb,
        FaultType::PpBc,
        FaultType::PpCa,
        FaultType::ThreePhase,
    ];

    pub fn code(self) -> u8 {
        match self {
            FaultType::PgA => 0,
            FaultType::PgB => 1,
            FaultType::PgC => 2,
            FaultType::PpAb => 3,
            FaultType::PpBc => 4,
            FaultType::PpCa => 5,
            FaultType::ThreePhase => 6,
        }
    }

    pub fn from_code(code: u8) -> Option<FaultType> {
        FaultType::ALL.iter().copied().find(|t| t.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            FaultType::PgA => "pg-a",
            FaultType::PgB => "pg-b",
            FaultType::PgC => "pg-c",
            FaultType::PpAb => "pp-ab",
            FaultType::PpBc => "pp-bc",
            FaultType::PpCa => "pp-ca",
            FaultType::ThreePhase => "3p",
        }
    }

    pub fn parse(s: &str) -> Option<FaultType> {
        FaultType::ALL.iter().copied().find(|t| t.name() == s.to_ascii_lowercase())
    }

    /// The faulted-phase index used for raw (phase-domain) records:
    /// the grounded phase for PG, the first phase of the pair for PP,
    /// phase a for three-phase faults.
    pub fn reference_phase(self) -> usize {
        match self {
            FaultType::PgA | FaultType::PpAb | FaultType::ThreePhase | FaultType::PpCa => 0,
            FaultType::PgB | FaultType::PpBc => 1,
            FaultType::PgC => 2,
        }
    }
}

impl std::fmt::Display for FaultType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A concrete fault to simulate.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultSpec {
    pub segment: usize,
    pub position_m: f64,
    pub fault_type: FaultType,
    pub impedance_ohm: f64,
    pub inception_angle_deg: f64,
}

/// One guessed fault location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gfl {
    pub segment: usize,
    pub position_m: f64,
}

pub type GflList = Vec<Gfl>;

// Raw (serde) form of the config document.

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    version: u32,
    nodes: Vec<String>,
    segments: Vec<RawSegment>,
    terminations: Vec<RawTermination>,
    #[serde(default)]
    sources: Vec<RawSource>,
    measurement: String,
    ground: GroundModel,
    geometry: WireGeometry,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSegment {
    id: String,
    from: String,
    to: String,
    length_m: f64,
    #[serde(default = "default_model")]
    model: ModelKind,
}

fn default_model() -> ModelKind {
    ModelKind::Constant
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTermination {
    node: String,
    impedance_ohm: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSource {
    node: String,
    amplitude_v: f64,
    #[serde(default = "default_frequency")]
    frequency_hz: f64,
    #[serde(default)]
    phase_deg: f64,
    impedance_ohm: f64,
}

fn default_frequency() -> f64 {
    50.0
}

/// Parses and validates a network config document. Unknown keys are
/// rejected; dangling node references, duplicate ids and disconnected
/// graphs each produce a distinct diagnostic.
pub fn parse_network(config_text: &str) -> Result<NetworkSpec, NetworkError> {
    let raw: RawConfig =
        serde_json::from_str(config_text).map_err(|e| NetworkError::Json(e.to_string()))?;
    if raw.version != 1 {
        return Err(NetworkError::Version(raw.version));
    }

    let mut seen = std::collections::HashSet::new();
    for n in &raw.nodes {
        if !seen.insert(n.clone()) {
            return Err(NetworkError::DuplicateId { kind: "node", id: n.clone() });
        }
    }
    let node_index = |name: &str| -> Result<usize, NetworkError> {
        raw.nodes
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| NetworkError::DanglingNode(name.to_string()))
    };

    let mut seg_ids = std::collections::HashSet::new();
    let mut segments = Vec::with_capacity(raw.segments.len());
    for s in &raw.segments {
        if !seg_ids.insert(s.id.clone()) {
            return Err(NetworkError::DuplicateId { kind: "segment", id: s.id.clone() });
        }
        if !(s.length_m > 0.0) {
            return Err(NetworkError::Invalid(format!(
                "segment `{}` must have positive length, got {}",
                s.id, s.length_m
            )));
        }
        segments.push(LineSegment {
            id: s.id.clone(),
            from: node_index(&s.from)?,
            to: node_index(&s.to)?,
            length_m: s.length_m,
            model: s.model,
        });
    }

    let mut terminations = Vec::with_capacity(raw.terminations.len());
    for t in &raw.terminations {
        if !(t.impedance_ohm > 0.0) {
            return Err(NetworkError::Invalid(format!(
                "termination at `{}` must have positive impedance",
                t.node
            )));
        }
        terminations.push(Termination {
            node: node_index(&t.node)?,
            impedance_ohm: t.impedance_ohm,
        });
    }

    let mut sources = Vec::with_capacity(raw.sources.len());
    for s in &raw.sources {
        if !(s.impedance_ohm > 0.0) {
            return Err(NetworkError::Invalid(format!(
                "source at `{}` must have positive internal impedance",
                s.node
            )));
        }
        if !(s.frequency_hz > 0.0) {
            return Err(NetworkError::Invalid(format!(
                "source at `{}` must have positive frequency",
                s.node
            )));
        }
        sources.push(SourceSpec {
            node: node_index(&s.node)?,
            amplitude_v: s.amplitude_v,
            frequency_hz: s.frequency_hz,
            phase_deg: s.phase_deg,
            impedance_ohm: s.impedance_ohm,
        });
    }

    let measurement = node_index(&raw.measurement)?;
    let spec = NetworkSpec {
        nodes: raw.nodes,
        segments,
        terminations,
        sources,
        measurement,
        ground: raw.ground,
        geometry: raw.geometry,
    };
    spec.validate()?;
    Ok(spec)
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<(), NetworkError> {
        self.geometry.validate()?;
        self.ground.validate()?;
        if self.nodes.is_empty() {
            return Err(NetworkError::Invalid("network has no nodes".into()));
        }
        // Connectivity from the measurement node.
        let reach = self.reachable_from(self.measurement);
        if let Some(unreached) = (0..self.nodes.len()).find(|i| !reach[*i]) {
            return Err(NetworkError::Disconnected(self.nodes[unreached].clone()));
        }
        Ok(())
    }

    fn reachable_from(&self, start: usize) -> Vec<bool> {
        let mut reach = vec![false; self.nodes.len()];
        let mut stack = vec![start];
        reach[start] = true;
        while let Some(n) = stack.pop() {
            for seg in &self.segments {
                for (a, b) in [(seg.from, seg.to), (seg.to, seg.from)] {
                    if a == n && !reach[b] {
                        reach[b] = true;
                        stack.push(b);
                    }
                }
            }
        }
        reach
    }

    pub fn segment_by_id(&self, id: &str) -> Option<usize> {
        self.segments.iter().position(|s| s.id == id)
    }

    /// FNV-1a hash identifying the network a GFL database was generated
    /// from. Pre-calculation always runs on constant-parameter models, so
    /// the hash covers everything those depend on — topology, lengths,
    /// terminations, sources, measurement node, geometry and the ground
    /// model the constants were anchored against — and deliberately
    /// excludes the per-segment model kinds, which only affect the
    /// fault-simulation side.
    pub fn digest(&self) -> u64 {
        #[derive(Serialize)]
        struct SegmentKey<'a> {
            id: &'a str,
            from: usize,
            to: usize,
            length_m: f64,
        }
        #[derive(Serialize)]
        struct DigestKey<'a> {
            nodes: &'a [String],
            segments: Vec<SegmentKey<'a>>,
            terminations: &'a [Termination],
            sources: &'a [SourceSpec],
            measurement: usize,
            ground: &'a GroundModel,
            geometry: &'a WireGeometry,
        }
        let key = DigestKey {
            nodes: &self.nodes,
            segments: self
                .segments
                .iter()
                .map(|s| SegmentKey { id: &s.id, from: s.from, to: s.to, length_m: s.length_m })
                .collect(),
            terminations: &self.terminations,
            sources: &self.sources,
            measurement: self.measurement,
            ground: &self.ground,
            geometry: &self.geometry,
        };
        let json = serde_json::to_string(&key).expect("network serializes");
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for byte in json.as_bytes() {
            hash ^= u64::from(*byte);
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
        hash
    }

    /// The same network with a different ground resistivity (for sweeps
    /// against one pre-calculated database).
    pub fn with_ground_resistivity(&self, rho_ohm_m: f64) -> NetworkSpec {
        let mut out = self.clone();
        out.ground.resistivity_ohm_m = rho_ohm_m;
        out
    }

    /// Splits `segment` at `position` (meters from its `from` node) and
    /// returns the derived network together with the index of the node at
    /// the split point. Splitting at 0 or at the full length attaches to the
    /// existing end node without splitting. Path lengths between
    /// pre-existing nodes are preserved exactly.
    pub fn insert_branch(
        &self,
        segment: usize,
        position: f64,
    ) -> Result<(NetworkSpec, usize), NetworkError> {
        let seg = self
            .segments
            .get(segment)
            .ok_or(NetworkError::UnknownSegment(segment))?;
        if !(0.0..=seg.length_m).contains(&position) {
            return Err(NetworkError::PositionRange {
                segment: seg.id.clone(),
                position,
                length: seg.length_m,
            });
        }
        if position == 0.0 {
            return Ok((self.clone(), seg.from));
        }
        if position == seg.length_m {
            return Ok((self.clone(), seg.to));
        }
        let mut derived = self.clone();
        let new_node = derived.nodes.len();
        derived.nodes.push(format!("{}@{}", seg.id, position));
        let (first, second) = (
            LineSegment {
                id: format!("{}#1", seg.id),
                from: seg.from,
                to: new_node,
                length_m: position,
                model: seg.model,
            },
            LineSegment {
                id: format!("{}#2", seg.id),
                from: new_node,
                to: seg.to,
                length_m: seg.length_m - position,
                model: seg.model,
            },
        );
        derived.segments[segment] = first;
        derived.segments.push(second);
        Ok((derived, new_node))
    }

    /// Shortest along-line distance from the measurement node to every node.
    pub fn node_distances(&self) -> Vec<f64> {
        let n = self.nodes.len();
        let mut dist = vec![f64::INFINITY; n];
        dist[self.measurement] = 0.0;
        // Small graphs: Bellman-Ford style relaxation is plenty.
        for _ in 0..n {
            let mut changed = false;
            for seg in &self.segments {
                let (a, b, l) = (seg.from, seg.to, seg.length_m);
                if dist[a] + l < dist[b] {
                    dist[b] = dist[a] + l;
                    changed = true;
                }
                if dist[b] + l < dist[a] {
                    dist[a] = dist[b] + l;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        dist
    }

    /// Along-line distance from the measurement node to a point on a segment.
    pub fn distance_to(&self, gfl: Gfl) -> f64 {
        let dist = self.node_distances();
        let seg = &self.segments[gfl.segment];
        let via_from = dist[seg.from] + gfl.position_m;
        let via_to = dist[seg.to] + (seg.length_m - gfl.position_m);
        via_from.min(via_to)
    }
}

/// Enumerates GFLs at `spacing, 2·spacing, …` on every segment, excluding
/// the terminal nodes. A segment shorter than the spacing yields no GFLs.
pub fn enumerate_gfls(net: &NetworkSpec, spacing_m: f64) -> Result<GflList, NetworkError> {
    if !(spacing_m > 0.0) {
        return Err(NetworkError::Invalid(format!(
            "GFL spacing must be positive, got {spacing_m}"
        )));
    }
    let mut gfls = Vec::new();
    for (si, seg) in net.segments.iter().enumerate() {
        let mut k = 1usize;
        loop {
            let pos = spacing_m * k as f64;
            if pos >= seg.length_m {
                break;
            }
            gfls.push(Gfl { segment: si, position_m: pos });
            k += 1;
        }
    }
    Ok(gfls)
}
