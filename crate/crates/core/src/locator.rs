//! The EMTC location method: GFL database construction, fault-type
//! classification, and convolution-energy location in the naive phase-domain
//! and aerial-mode variants.
//!
//! Location ranks every stored record by the energy of its convolution with
//! the measured transient (CSE). The ranking runs in the frequency domain
//! through Parseval's identity — identical to convolving in time and summing
//! squares, but one forward FFT per record instead of a full round trip. The
//! time-domain path in [`crate::signal`] serves as the independent oracle.

use std::io::{self, Read, Write};
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::fft::RealDftScratch;
use crate::network::{FaultType, Gfl, NetworkSpec};
use crate::signal::{
    self, clarke_forward, PhaseTriple, SignalError, Waveform,
};
use crate::solver::{GflEngine, SolveGrid, SolverError};

#[derive(Debug, Error)]
pub enum LocateError {
    #[error("database format error: {0}")]
    Format(String),
    #[error("incompatible database: {what} mismatch (database {expected}, input {got})")]
    Compatibility {
        what: &'static str,
        expected: String,
        got: String,
    },
    #[error("database has no records for {0}")]
    Coverage(String),
    #[error("cannot classify: {0}")]
    Classification(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Network(#[from] crate::network::NetworkError),
}

/// Which signal a stored record holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeId {
    Ground,
    Alpha,
    Beta,
    /// Faulted-phase voltage in phase coordinates (naive variant).
    RawPhase,
}

impl ModeId {
    pub fn code(self) -> u8 {
        match self {
            ModeId::Ground => 0,
            ModeId::Alpha => 1,
            ModeId::Beta => 2,
            ModeId::RawPhase => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ModeId::Ground),
            1 => Some(ModeId::Alpha),
            2 => Some(ModeId::Beta),
            3 => Some(ModeId::RawPhase),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModeId::Ground => "ground",
            ModeId::Alpha => "alpha",
            ModeId::Beta => "beta",
            ModeId::RawPhase => "raw",
        }
    }
}

/// Pre-calculation excitation source.
#[derive(Debug, Clone, PartialEq)]
pub enum Excitation {
    LightningImpulse { amplitude_v: f64, alpha_s: f64, beta_s: f64 },
    Rectangular { amplitude_v: f64, width_s: f64 },
    /// Zero-net-area double-exponential doublet (the lightning impulse's
    /// derivative). Its spectrum vanishes at DC, so stored records carry no
    /// quasi-static plateau: the convolution energies are then governed by
    /// the traveling-wave band even when the measured transient is heavy
    /// with power-frequency content.
    Doublet { amplitude_v: f64, alpha_s: f64, beta_s: f64 },
}

impl Excitation {
    /// The 10-kV, α = 20 μs / β = 3 μs double exponential.
    pub fn standard_impulse() -> Self {
        Excitation::LightningImpulse { amplitude_v: 10e3, alpha_s: 20e-6, beta_s: 3e-6 }
    }

    /// Doublet with the standard impulse's time constants.
    pub fn standard_doublet() -> Self {
        Excitation::Doublet { amplitude_v: 10e3, alpha_s: 20e-6, beta_s: 3e-6 }
    }

    pub fn descriptor(&self) -> String {
        match self {
            Excitation::LightningImpulse { amplitude_v, alpha_s, beta_s } => {
                format!("impulse(amplitude_v={amplitude_v},alpha_s={alpha_s},beta_s={beta_s})")
            }
            Excitation::Rectangular { amplitude_v, width_s } => {
                format!("rect(amplitude_v={amplitude_v},width_s={width_s})")
            }
            Excitation::Doublet { amplitude_v, alpha_s, beta_s } => {
                format!("doublet(amplitude_v={amplitude_v},alpha_s={alpha_s},beta_s={beta_s})")
            }
        }
    }

    pub fn build(&self, grid: &SolveGrid) -> Result<Waveform, SignalError> {
        let duration = (grid.n_samples() - 1) as f64 * grid.dt();
        match *self {
            Excitation::LightningImpulse { amplitude_v, alpha_s, beta_s } => {
                signal::lightning_impulse(grid.dt(), duration, amplitude_v, alpha_s, beta_s)
            }
            Excitation::Rectangular { amplitude_v, width_s } => {
                signal::rectangular_pulse(grid.dt(), duration, amplitude_v, width_s)
            }
            Excitation::Doublet { amplitude_v, alpha_s, beta_s } => {
                signal::impulse_doublet(grid.dt(), duration, amplitude_v, alpha_s, beta_s)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct DbHeader {
    pub version: u32,
    pub network_digest: u64,
    pub dt: f64,
    pub sample_count: u64,
    pub spacing_m: f64,
    pub excitation: String,
}

#[derive(Debug, Clone)]
pub struct GflRecord {
    pub segment: u32,
    pub position_m: f64,
    pub fault_type: FaultType,
    pub mode: ModeId,
    pub samples: Vec<f64>,
}

/// Persisted pre-calculated terminal transients indexed by
/// (segment, position, fault type, mode).
#[derive(Debug, Clone)]
pub struct GflDatabase {
    pub header: DbHeader,
    pub records: Vec<GflRecord>,
}

const MAGIC: &[u8; 4] = b"EMTC";

impl GflDatabase {
    /// Little-endian binary serialization; byte-identical across reruns.
    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&self.header.version.to_le_bytes())?;
        w.write_all(&self.header.network_digest.to_le_bytes())?;
        w.write_all(&self.header.dt.to_le_bytes())?;
        w.write_all(&self.header.sample_count.to_le_bytes())?;
        w.write_all(&self.header.spacing_m.to_le_bytes())?;
        let desc = self.header.excitation.as_bytes();
        w.write_all(&(desc.len() as u32).to_le_bytes())?;
        w.write_all(desc)?;
        w.write_all(&(self.records.len() as u32).to_le_bytes())?;
        for r in &self.records {
            w.write_all(&r.segment.to_le_bytes())?;
            w.write_all(&r.position_m.to_le_bytes())?;
            w.write_all(&[r.fault_type.code(), r.mode.code()])?;
            for s in &r.samples {
                w.write_all(&s.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, LocateError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(LocateError::Format(format!(
                "bad magic {magic:?}, expected {MAGIC:?}"
            )));
        }
        let mut u32buf = [0u8; 4];
        let mut u64buf = [0u8; 8];
        let mut read_u32 = |r: &mut R| -> io::Result<u32> {
            r.read_exact(&mut u32buf)?;
            Ok(u32::from_le_bytes(u32buf))
        };
        let version = read_u32(&mut r)?;
        if version != 1 {
            return Err(LocateError::Format(format!("unsupported version {version}")));
        }
        let mut read_u64 = |r: &mut R| -> io::Result<u64> {
            r.read_exact(&mut u64buf)?;
            Ok(u64::from_le_bytes(u64buf))
        };
        let network_digest = read_u64(&mut r)?;
        let dt = f64::from_le_bytes({
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            b
        });
        let sample_count = read_u64(&mut r)?;
        let spacing_m = f64::from_le_bytes({
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            b
        });
        let desc_len = {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            u32::from_le_bytes(b) as usize
        };
        let mut desc = vec![0u8; desc_len];
        r.read_exact(&mut desc)?;
        let excitation = String::from_utf8(desc)
            .map_err(|e| LocateError::Format(format!("excitation descriptor: {e}")))?;
        let record_count = {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            u32::from_le_bytes(b) as usize
        };
        let mut records = Vec::with_capacity(record_count);
        let mut sample_bytes = vec![0u8; sample_count as usize * 8];
        for _ in 0..record_count {
            let mut b4 = [0u8; 4];
            r.read_exact(&mut b4)?;
            let segment = u32::from_le_bytes(b4);
            let mut b8 = [0u8; 8];
            r.read_exact(&mut b8)?;
            let position_m = f64::from_le_bytes(b8);
            let mut codes = [0u8; 2];
            r.read_exact(&mut codes)?;
            let fault_type = FaultType::from_code(codes[0])
                .ok_or_else(|| LocateError::Format(format!("bad fault type code {}", codes[0])))?;
            let mode = ModeId::from_code(codes[1])
                .ok_or_else(|| LocateError::Format(format!("bad mode code {}", codes[1])))?;
            r.read_exact(&mut sample_bytes)?;
            let samples = sample_bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            records.push(GflRecord { segment, position_m, fault_type, mode, samples });
        }
        Ok(GflDatabase {
            header: DbHeader { version, network_digest, dt, sample_count, spacing_m, excitation },
            records,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> io::Result<()> {
        let mut w = io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()
    }

    pub fn load(path: &std::path::Path) -> Result<Self, LocateError> {
        Self::read_from(io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Which stored signals a pre-calculation run keeps per (GFL, fault type).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StoredSignals {
    pub ground: bool,
    pub alpha: bool,
    pub beta: bool,
    pub raw: bool,
}

impl Default for StoredSignals {
    fn default() -> Self {
        Self { ground: true, alpha: true, beta: true, raw: true }
    }
}

impl StoredSignals {
    pub fn aerial_only() -> Self {
        Self { ground: false, alpha: true, beta: true, raw: false }
    }

    pub fn raw_only() -> Self {
        Self { ground: false, alpha: false, beta: false, raw: true }
    }

    fn modes(&self) -> Vec<ModeId> {
        let mut out = Vec::new();
        if self.ground {
            out.push(ModeId::Ground);
        }
        if self.alpha {
            out.push(ModeId::Alpha);
        }
        if self.beta {
            out.push(ModeId::Beta);
        }
        if self.raw {
            out.push(ModeId::RawPhase);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct PrecalcOptions {
    pub spacing_m: f64,
    pub fault_types: Vec<FaultType>,
    pub store: StoredSignals,
    /// Short-circuit branch resistance at the GFLs, Ω.
    pub branch_resistance_ohm: f64,
    pub parallel: bool,
}

impl PrecalcOptions {
    pub fn new(spacing_m: f64, fault_types: Vec<FaultType>) -> Self {
        Self {
            spacing_m,
            fault_types,
            store: StoredSignals::default(),
            branch_resistance_ohm: 1.0,
            parallel: true,
        }
    }
}

/// Runs the pre-calculation: for every GFL × fault type, simulates the
/// excitation injected through the short-circuit branch, Clarke-transforms
/// the terminal response and stores the selected signals. Pre-calculation
/// always uses constant-parameter line models. Record order is
/// deterministic: GFL-major, then fault type, then mode.
pub fn precalculate(
    net: &NetworkSpec,
    grid: SolveGrid,
    excitation: &Excitation,
    opts: &PrecalcOptions,
) -> Result<GflDatabase, LocateError> {
    if opts.fault_types.is_empty() {
        return Err(LocateError::Coverage("no fault types requested".into()));
    }
    let gfls = crate::network::enumerate_gfls(net, opts.spacing_m)?;
    if gfls.is_empty() {
        return Err(LocateError::Coverage(format!(
            "spacing {} m produced no GFLs",
            opts.spacing_m
        )));
    }
    let exc_wave = excitation.build(&grid)?;
    let engine = GflEngine::new(net, grid, &exc_wave, opts.branch_resistance_ohm, true)?;
    let modes = opts.store.modes();

    let per_gfl = |gfl: &Gfl| -> Result<Vec<GflRecord>, LocateError> {
        let outputs = engine.responses(*gfl, &opts.fault_types)?;
        let mut records = Vec::with_capacity(opts.fault_types.len() * modes.len());
        for (ft, out) in opts.fault_types.iter().zip(outputs) {
            for &mode in &modes {
                let wave = match mode {
                    ModeId::Ground => &out.modes.mode0,
                    ModeId::Alpha => &out.modes.alpha,
                    ModeId::Beta => &out.modes.beta,
                    ModeId::RawPhase => out.phases.phase(match ft.reference_phase() {
                        0 => signal::Phase::A,
                        1 => signal::Phase::B,
                        _ => signal::Phase::C,
                    }),
                };
                records.push(GflRecord {
                    segment: gfl.segment as u32,
                    position_m: gfl.position_m,
                    fault_type: *ft,
                    mode,
                    samples: wave.samples().to_vec(),
                });
            }
        }
        Ok(records)
    };

    let nested: Result<Vec<Vec<GflRecord>>, LocateError> = if opts.parallel {
        gfls.par_iter().map(per_gfl).collect()
    } else {
        gfls.iter().map(per_gfl).collect()
    };
    let records: Vec<GflRecord> = nested?.into_iter().flatten().collect();

    Ok(GflDatabase {
        header: DbHeader {
            version: 1,
            network_digest: net.digest(),
            dt: grid.dt(),
            sample_count: grid.n_samples() as u64,
            spacing_m: opts.spacing_m,
            excitation: excitation.descriptor(),
        },
        records,
    })
}

// ---------------------------------------------------------------------------
// Fault-type classification
// ---------------------------------------------------------------------------

/// Ground-involvement threshold on mode-0 energy / total aerial energy.
pub const GROUND_THRESHOLD: f64 = 0.1;
/// A phase with at least this share of the maximum phase energy counts as
/// involved in the fault.
pub const PHASE_THRESHOLD: f64 = 0.3;
/// Below this share a phase is silent: an ungrounded fault that leaves one
/// phase silent is a phase-to-phase event, one that energizes all three is
/// three-phase. (On a balanced line the unfaulted phase of a PP event
/// carries exactly zero superimposed voltage.)
pub const PHASE_SILENT: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct FaultTypeVerdict {
    /// `None` when no decision could be made (ambiguous or no signal).
    pub fault_type: Option<FaultType>,
    pub phase_scores: [f64; 3],
    pub ground_score: f64,
}

/// Decides the fault class from per-phase superimposed energies and the
/// Clarke ground-mode energy share.
pub fn classify_fault(measured: &PhaseTriple) -> FaultTypeVerdict {
    let e = [
        signal::signal_energy(&measured.a),
        signal::signal_energy(&measured.b),
        signal::signal_energy(&measured.c),
    ];
    let e_max = e.iter().fold(0.0f64, |m, &x| m.max(x));
    if e_max <= 0.0 {
        return FaultTypeVerdict { fault_type: None, phase_scores: [0.0; 3], ground_score: 0.0 };
    }
    let modal = clarke_forward(measured);
    let e0 = signal::signal_energy(&modal.mode0);
    let ea = signal::signal_energy(&modal.alpha);
    let eb = signal::signal_energy(&modal.beta);
    let ground_score = (e0 / (ea + eb)).clamp(0.0, 1.0);
    let phase_scores = [e[0] / e_max, e[1] / e_max, e[2] / e_max];

    let fault_type = if ground_score >= GROUND_THRESHOLD {
        let p = (0..3).max_by(|&i, &j| e[i].total_cmp(&e[j])).expect("three phases");
        Some(match p {
            0 => FaultType::PgA,
            1 => FaultType::PgB,
            _ => FaultType::PgC,
        })
    } else {
        let alive = phase_scores.iter().filter(|&&s| s >= PHASE_SILENT).count();
        if alive <= 1 {
            None
        } else if alive == 2 {
            let quiet = (0..3)
                .min_by(|&i, &j| phase_scores[i].total_cmp(&phase_scores[j]))
                .expect("three phases");
            Some(match quiet {
                2 => FaultType::PpAb,
                0 => FaultType::PpBc,
                _ => FaultType::PpCa,
            })
        } else {
            Some(FaultType::ThreePhase)
        }
    };
    FaultTypeVerdict { fault_type, phase_scores, ground_score }
}

// ---------------------------------------------------------------------------
// CSE ranking
// ---------------------------------------------------------------------------

/// Batch convolution-energy ranker: the measured-signal spectrum is computed
/// once, each record costs one forward FFT plus a reduction.
pub struct CseRanker {
    measured_fft: Vec<num_complex::Complex64>,
    fft_len: usize,
    dt: f64,
}

/// Reusable FFT buffers for one ranking worker.
pub struct CseScratch(RealDftScratch);

impl CseRanker {
    pub fn new(measured: &Waveform, record_len: usize) -> Self {
        let fft_len = (measured.len() + record_len - 1).next_power_of_two();
        Self {
            measured_fft: crate::fft::real_dft(measured.samples(), fft_len),
            fft_len,
            dt: measured.dt(),
        }
    }

    pub fn fft_len(&self) -> usize {
        self.fft_len
    }

    pub fn make_scratch(&self) -> CseScratch {
        CseScratch(RealDftScratch::new(self.fft_len))
    }

    /// CSE of one record, using caller-provided scratch buffers.
    pub fn energy_with(&self, scratch: &mut CseScratch, record: &[f64]) -> f64 {
        let fb = scratch.0.transform(record);
        signal::spectral_product_energy(&self.measured_fft, fb, self.dt, self.fft_len)
    }

    pub fn energy(&self, record: &[f64]) -> f64 {
        self.energy_with(&mut self.make_scratch(), record)
    }

    /// CSE of one record divided by the square root of the record's
    /// auto-convolution energy. By Cauchy-Schwarz the normalized energy is
    /// maximal exactly at a spectral-magnitude match, which keeps records
    /// with intrinsically rich resonance structure (short stubs, junction
    /// neighborhoods) from outscoring the correct location.
    pub fn normalized_energy_with(&self, scratch: &mut CseScratch, record: &[f64]) -> f64 {
        let fb = scratch.0.transform(record);
        let cross = signal::spectral_product_energy(&self.measured_fft, fb, self.dt, self.fft_len);
        let auto = signal::spectral_product_energy(fb, fb, self.dt, self.fft_len);
        if auto > 0.0 {
            cross / auto.sqrt()
        } else {
            0.0
        }
    }

    /// Normalized energies for a batch of records, optionally in parallel.
    /// The output order matches the input order regardless of scheduling.
    pub fn rank<S: AsRef<[f64]> + Sync>(&self, records: &[S], parallel: bool) -> Vec<f64> {
        if parallel {
            records
                .par_iter()
                .map_init(
                    || self.make_scratch(),
                    |scratch, r| self.normalized_energy_with(scratch, r.as_ref()),
                )
                .collect()
        } else {
            let mut scratch = self.make_scratch();
            records
                .iter()
                .map(|r| self.normalized_energy_with(&mut scratch, r.as_ref()))
                .collect()
        }
    }
}

// ---------------------------------------------------------------------------
// Location
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsePoint {
    pub segment: u32,
    pub position_m: f64,
    /// Normalized CSE, in (0, 1]; exactly one point is 1.
    pub energy: f64,
}

#[derive(Debug, Clone)]
pub struct LocationResult {
    pub segment: u32,
    pub position_m: f64,
    pub fault_type: FaultType,
    pub mode: ModeId,
    pub curve: Vec<CsePoint>,
    pub runtime_s: f64,
    pub warnings: Vec<String>,
}

impl LocationResult {
    /// The normalized CSE curve (max exactly 1), for plotting.
    pub fn cse_curve(&self) -> &[CsePoint] {
        &self.curve
    }
}

fn check_compat(
    db: &GflDatabase,
    net: &NetworkSpec,
    measured_dt: f64,
) -> Result<(), LocateError> {
    if db.header.dt != measured_dt {
        return Err(LocateError::Compatibility {
            what: "dt",
            expected: format!("{}", db.header.dt),
            got: format!("{measured_dt}"),
        });
    }
    let digest = net.digest();
    if db.header.network_digest != digest {
        return Err(LocateError::Compatibility {
            what: "network digest",
            expected: format!("{:016x}", db.header.network_digest),
            got: format!("{digest:016x}"),
        });
    }
    Ok(())
}

fn rank_records(
    net: &NetworkSpec,
    signal: &Waveform,
    records: Vec<&GflRecord>,
    fault_type: FaultType,
    mode: ModeId,
    warnings: Vec<String>,
    started: Instant,
    parallel: bool,
) -> Result<LocationResult, LocateError> {
    if records.is_empty() {
        return Err(LocateError::Coverage(format!(
            "fault type {fault_type}, mode {}",
            mode.name()
        )));
    }
    let sample_refs: Vec<&[f64]> = records.iter().map(|r| r.samples.as_slice()).collect();
    let ranker = CseRanker::new(signal, sample_refs[0].len());
    let energies = ranker.rank(&sample_refs, parallel);

    let max_energy = energies.iter().fold(0.0f64, |m, &e| m.max(e));
    if !(max_energy > 0.0) {
        return Err(LocateError::Coverage("all convolution energies are zero".into()));
    }
    // Argmax with ties broken toward the measurement node.
    let distances = net.node_distances();
    let gfl_distance = |r: &GflRecord| {
        let seg = &net.segments[r.segment as usize];
        let via_from = distances[seg.from] + r.position_m;
        let via_to = distances[seg.to] + (seg.length_m - r.position_m);
        via_from.min(via_to)
    };
    let mut best = 0usize;
    for i in 1..records.len() {
        if energies[i] > energies[best]
            || (energies[i] == energies[best]
                && gfl_distance(records[i]) < gfl_distance(records[best]))
        {
            best = i;
        }
    }
    let curve = records
        .iter()
        .zip(&energies)
        .map(|(r, &e)| CsePoint {
            segment: r.segment,
            position_m: r.position_m,
            energy: e / max_energy,
        })
        .collect();
    Ok(LocationResult {
        segment: records[best].segment,
        position_m: records[best].position_m,
        fault_type,
        mode,
        curve,
        runtime_s: started.elapsed().as_secs_f64(),
        warnings,
    })
}

/// Naive phase-domain EMTC: convolves the (differentiated) faulted-phase
/// measured signal against the stored raw-phase records of the given fault
/// type.
pub fn locate_naive(
    db: &GflDatabase,
    net: &NetworkSpec,
    measured: &PhaseTriple,
    fault_type: FaultType,
) -> Result<LocationResult, LocateError> {
    let started = Instant::now();
    check_compat(db, net, measured.dt())?;
    let phase = first_difference(match fault_type.reference_phase() {
        0 => &measured.a,
        1 => &measured.b,
        _ => &measured.c,
    });
    let records: Vec<&GflRecord> = db
        .records
        .iter()
        .filter(|r| r.fault_type == fault_type && r.mode == ModeId::RawPhase)
        .collect();
    rank_records(net, &phase, records, fault_type, ModeId::RawPhase, Vec::new(), started, true)
}

/// First difference, the discrete derivative. The measured transient of a
/// real fault rides on the power-frequency superimposed source whose 1/f
/// spectrum would otherwise let the location-blind quasi-static band
/// dominate the convolution energies; differentiating whitens it so the
/// traveling-wave harmonics decide the ranking.
fn first_difference(w: &Waveform) -> Waveform {
    let s = w.samples();
    let mut out = vec![0.0; s.len()];
    for i in 1..s.len() {
        out[i] = (s[i] - s[i - 1]) / w.dt();
    }
    Waveform::new(w.dt(), w.t0(), out).expect("same shape as input")
}

/// Aerial-mode EMTC: classify, Clarke-transform, pick the aerial mode with
/// the larger measured energy, differentiate it, then rank the matching
/// stored aerial-mode records. An ambiguous classification downgrades to
/// trying every fault type in the database and reporting the global argmax
/// with a warning.
pub fn locate_aerial(
    db: &GflDatabase,
    net: &NetworkSpec,
    measured: &PhaseTriple,
) -> Result<LocationResult, LocateError> {
    locate_aerial_with(db, net, measured, None, None)
}

/// [`locate_aerial`] with optional fault-type and mode overrides.
pub fn locate_aerial_with(
    db: &GflDatabase,
    net: &NetworkSpec,
    measured: &PhaseTriple,
    fault_type_override: Option<FaultType>,
    mode_override: Option<ModeId>,
) -> Result<LocationResult, LocateError> {
    let started = Instant::now();
    check_compat(db, net, measured.dt())?;
    let modal = clarke_forward(measured);
    let e_alpha = signal::signal_energy(&modal.alpha);
    let e_beta = signal::signal_energy(&modal.beta);
    let mode = match mode_override {
        Some(m @ (ModeId::Alpha | ModeId::Beta)) => m,
        Some(other) => {
            return Err(LocateError::Classification(format!(
                "aerial location requires an aerial mode, got {}",
                other.name()
            )))
        }
        None => {
            if e_alpha >= e_beta {
                ModeId::Alpha
            } else {
                ModeId::Beta
            }
        }
    };
    let signal = first_difference(match mode {
        ModeId::Alpha => &modal.alpha,
        _ => &modal.beta,
    });

    let mut warnings = Vec::new();
    let candidate_types: Vec<FaultType> = match fault_type_override {
        Some(t) => vec![t],
        None => {
            let verdict = classify_fault(measured);
            match verdict.fault_type {
                Some(t) => vec![t],
                None => {
                    let mut present: Vec<FaultType> = Vec::new();
                    for r in &db.records {
                        if !present.contains(&r.fault_type) {
                            present.push(r.fault_type);
                        }
                    }
                    if present.is_empty() {
                        return Err(LocateError::Coverage("empty database".into()));
                    }
                    warnings.push(
                        "ambiguous fault classification; trying all database fault types".into(),
                    );
                    present
                }
            }
        }
    };

    let records: Vec<&GflRecord> = db
        .records
        .iter()
        .filter(|r| r.mode == mode && candidate_types.contains(&r.fault_type))
        .collect();
    let report_type = candidate_types[0];
    let mut result =
        rank_records(net, &signal, records, report_type, mode, warnings, started, true)?;
    if candidate_types.len() > 1 {
        // Report the fault type of the winning record.
        let winner = db
            .records
            .iter()
            .filter(|r| r.mode == mode && candidate_types.contains(&r.fault_type))
            .zip(&result.curve)
            .max_by(|(_, a), (_, b)| a.energy.total_cmp(&b.energy))
            .map(|(r, _)| r.fault_type);
        if let Some(t) = winner {
            result.fault_type = t;
        }
    }
    Ok(result)
}
