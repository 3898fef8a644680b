//! Per-unit-length electrical parameters and per-frequency propagation
//! constant / surge impedance of scalar (modal) overhead lines.
//!
//! Two model kinds exist. The constant-parameter model is the lossless image
//! solution with a fixed velocity and surge impedance; it is what the
//! pre-calculation stage uses. The frequency-dependent model adds conductor
//! skin effect and a lossy-ground return impedance in Sunde's logarithmic
//! approximation
//!
//! `Z_g(s) = (s·μ0/2π)·ln((1 + γ_g·h)/(γ_g·h))`,  `γ_g = √(s·μ0·(σ_g + s·ε_g))`,
//!
//! with mutual terms in the equivalent complex-image form. Evaluation takes
//! the full Laplace variable `s = σ + jω` so the damped frequency grid of the
//! transient solver stays exact per bin.

use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

pub const MU0: f64 = 4.0e-7 * PI;
/// Speed of light in vacuum, m/s.
pub const C0: f64 = 299_792_458.0;
/// Vacuum permittivity chosen so that 1/√(μ0·ε0) = C0 to machine precision.
pub const EPS0: f64 = 1.0 / (MU0 * C0 * C0);

#[derive(Debug, Error)]
pub enum LineError {
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("invalid ground model: {0}")]
    Ground(String),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("invalid frequency: {0}")]
    Frequency(String),
    #[error("velocity fit failed: {0}")]
    Fit(String),
}

/// Equivalent single-conductor-per-phase geometry of an overhead line.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireGeometry {
    /// Conductor height above ground, m.
    pub height_m: f64,
    /// Conductor radius, m.
    pub radius_m: f64,
    /// Horizontal offset of each phase conductor, m.
    pub horizontal_offsets_m: Vec<f64>,
    /// Conductor material conductivity, S/m.
    pub conductor_conductivity_s_per_m: f64,
}

impl WireGeometry {
    pub fn validate(&self) -> Result<(), LineError> {
        if !(self.radius_m > 0.0 && self.height_m > self.radius_m) {
            return Err(LineError::Geometry(format!(
                "need height > radius > 0, got height {} and radius {}",
                self.height_m, self.radius_m
            )));
        }
        if !(self.conductor_conductivity_s_per_m > 0.0) {
            return Err(LineError::Geometry("conductor conductivity must be positive".into()));
        }
        Ok(())
    }

    fn log_ratio(&self) -> f64 {
        (2.0 * self.height_m / self.radius_m).ln()
    }
}

/// Lossy-ground description. `perfect` forces the lossless image solution.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundModel {
    /// Ground resistivity ρ_g, Ω·m.
    pub resistivity_ohm_m: f64,
    /// Relative permittivity of the ground.
    pub relative_permittivity: f64,
    #[serde(default)]
    pub perfect: bool,
}

impl GroundModel {
    pub fn validate(&self) -> Result<(), LineError> {
        if !(self.resistivity_ohm_m > 0.0) {
            return Err(LineError::Ground("resistivity must be positive".into()));
        }
        if !(self.relative_permittivity >= 1.0) {
            return Err(LineError::Ground("relative permittivity must be at least 1".into()));
        }
        Ok(())
    }

    pub fn conductivity(&self) -> f64 {
        1.0 / self.resistivity_ohm_m
    }

    /// Ground propagation constant γ_g(s) = √(s·μ0·(σ_g + s·ε_g)).
    fn gamma_g(&self, s: Complex64) -> Complex64 {
        let eps_g = EPS0 * self.relative_permittivity;
        let g = (s * MU0 * (self.conductivity() + s * eps_g)).sqrt();
        if g.re < 0.0 {
            -g
        } else {
            g
        }
    }
}

/// One ground-return impedance contribution of a mode combination.
#[derive(Debug, Clone, Copy, PartialEq)]
enum GroundPath {
    /// Self term of a conductor at the given height.
    Conductor { height: f64 },
    /// Mutual term between two conductors: mean height and horizontal
    /// separation, in the complex-image form.
    Pair { mean_height: f64, separation: f64 },
}

fn ground_impedance(path: GroundPath, ground: &GroundModel, s: Complex64) -> Complex64 {
    if ground.perfect {
        return Complex64::ZERO;
    }
    let gg = ground.gamma_g(s);
    match path {
        GroundPath::Conductor { height } => {
            let gh = gg * height;
            s * MU0 / (2.0 * PI) * ((gh + 1.0) / gh).ln()
        }
        GroundPath::Pair { mean_height, separation } => {
            let gh = gg * mean_height;
            let gd = gg * (separation / 2.0);
            let num = (gh + 1.0) * (gh + 1.0) + gd * gd;
            let den = gh * gh + gd * gd;
            s * MU0 / (4.0 * PI) * (num / den).ln()
        }
    }
}

/// Conductor internal impedance: high-frequency skin-effect surface
/// impedance √(s·μ0/σ_c)/(2πr) blended with the DC resistance floor as
/// √(R_dc² + Z_hf²).
#[derive(Debug, Clone, Copy, PartialEq)]
struct InternalImpedance {
    r_dc: f64,
    /// Z_hf(s) = surface_coeff·√s.
    surface_coeff: f64,
}

impl InternalImpedance {
    fn new(geom: &WireGeometry) -> Self {
        let r = geom.radius_m;
        let sigma = geom.conductor_conductivity_s_per_m;
        InternalImpedance {
            r_dc: 1.0 / (sigma * PI * r * r),
            surface_coeff: (MU0 / sigma).sqrt() / (2.0 * PI * r),
        }
    }

    const ZERO: InternalImpedance = InternalImpedance { r_dc: 0.0, surface_coeff: 0.0 };

    fn eval(&self, s: Complex64) -> Complex64 {
        let z_hf = s.sqrt() * self.surface_coeff;
        let z = (z_hf * z_hf + self.r_dc * self.r_dc).sqrt();
        if z.re < 0.0 {
            -z
        } else {
            z
        }
    }
}

/// Constant-parameter (frequency-independent) scalar line.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantLine {
    /// Propagation velocity v^FI, m/s.
    pub velocity: f64,
    /// Surge impedance, Ω.
    pub surge_impedance: f64,
    /// Optional series resistance, Ω/m; γ gains the low-loss term r/(2·Z_C).
    pub resistance_per_m: f64,
}

/// Frequency-dependent scalar line assembled from external inductance,
/// shunt capacitance, conductor internal impedance and a weighted sum of
/// ground-return terms. Shunt conductance is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FdLine {
    series_inductance: f64,
    shunt_capacitance: f64,
    internal: InternalImpedance,
    ground_terms: Vec<(f64, GroundPath)>,
    ground: GroundModel,
}

impl FdLine {
    /// Series impedance per meter at the Laplace point `s`.
    pub fn series_impedance(&self, s: Complex64) -> Complex64 {
        let mut z = s * self.series_inductance + self.internal.eval(s);
        for &(w, path) in &self.ground_terms {
            z += ground_impedance(path, &self.ground, s) * w;
        }
        z
    }

    pub fn shunt_admittance(&self, s: Complex64) -> Complex64 {
        s * self.shunt_capacitance
    }
}

/// A scalar line model: per-frequency propagation constant and surge
/// impedance, length-independent.
#[derive(Debug, Clone, PartialEq)]
pub enum LineModel {
    Constant(ConstantLine),
    FrequencyDependent(FdLine),
}

impl LineModel {
    /// Propagation constant γ(s) per meter, branch chosen with Re γ ≥ 0.
    pub fn gamma(&self, s: Complex64) -> Complex64 {
        match self {
            LineModel::Constant(p) => {
                s / p.velocity + p.resistance_per_m / (2.0 * p.surge_impedance)
            }
            LineModel::FrequencyDependent(p) => {
                let g = (p.series_impedance(s) * p.shunt_admittance(s)).sqrt();
                if g.re < 0.0 {
                    -g
                } else {
                    g
                }
            }
        }
    }

    /// Surge impedance Z_C(s), branch chosen with Re Z_C > 0.
    pub fn surge_impedance(&self, s: Complex64) -> Complex64 {
        match self {
            LineModel::Constant(p) => Complex64::new(p.surge_impedance, 0.0),
            LineModel::FrequencyDependent(p) => {
                let z = (p.series_impedance(s) / p.shunt_admittance(s)).sqrt();
                if z.re < 0.0 {
                    -z
                } else {
                    z
                }
            }
        }
    }

    /// Constant-model velocity v^FI; the high-frequency asymptote is used
    /// for frequency-dependent lines.
    pub fn v_fi(&self) -> f64 {
        match self {
            LineModel::Constant(p) => p.velocity,
            LineModel::FrequencyDependent(p) => {
                1.0 / (p.series_inductance * p.shunt_capacitance).sqrt()
            }
        }
    }

    /// Phase velocity ω / Im γ(jω).
    pub fn velocity(&self, omega: f64) -> f64 {
        omega / self.gamma(Complex64::new(0.0, omega)).im
    }
}

/// Decoupled Clarke-mode models of a balanced three-phase line.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalLineSet {
    pub ground_mode: LineModel,
    pub alpha_mode: LineModel,
    pub beta_mode: LineModel,
}

impl ModalLineSet {
    pub fn mode(&self, m: usize) -> &LineModel {
        match m {
            0 => &self.ground_mode,
            1 => &self.alpha_mode,
            _ => &self.beta_mode,
        }
    }
}

/// Lossless image-method constant-parameter model of a single wire:
/// L' = (μ0/2π)·ln(2h/r), C' = 2πε0/ln(2h/r), so v^FI = 1/√(L'C') = c.
pub fn pul_constant(geom: &WireGeometry) -> Result<LineModel, LineError> {
    geom.validate()?;
    let lr = geom.log_ratio();
    Ok(LineModel::Constant(ConstantLine {
        velocity: C0,
        surge_impedance: MU0 * C0 / (2.0 * PI) * lr,
        resistance_per_m: 0.0,
    }))
}

/// Frequency-dependent single-wire model over lossy ground (the model behind
/// the wave-velocity curves).
pub fn pul_frequency_dependent(
    geom: &WireGeometry,
    ground: &GroundModel,
) -> Result<LineModel, LineError> {
    geom.validate()?;
    ground.validate()?;
    let lr = geom.log_ratio();
    // The perfect-ground flag forces the lossless image solution.
    let internal = if ground.perfect {
        InternalImpedance::ZERO
    } else {
        InternalImpedance::new(geom)
    };
    Ok(LineModel::FrequencyDependent(FdLine {
        series_inductance: MU0 / (2.0 * PI) * lr,
        shunt_capacitance: 2.0 * PI * EPS0 / lr,
        internal,
        ground_terms: vec![(1.0, GroundPath::Conductor { height: geom.height_m })],
        ground: ground.clone(),
    }))
}

/// γ(ω) of the frequency-dependent single-wire model at a real frequency.
pub fn gamma_fd(
    omega: f64,
    geom: &WireGeometry,
    ground: &GroundModel,
) -> Result<Complex64, LineError> {
    if !(omega > 0.0) {
        return Err(LineError::Frequency(format!(
            "gamma_fd needs omega > 0, got {omega} (DC is handled by the solver's damping shift)"
        )));
    }
    Ok(pul_frequency_dependent(geom, ground)?.gamma(Complex64::new(0.0, omega)))
}

struct ModalGeometry {
    p_self: f64,
    p_mutual: f64,
    pairs: Vec<(f64, f64)>,
}

fn modal_geometry(geom: &WireGeometry) -> Result<ModalGeometry, LineError> {
    geom.validate()?;
    let offs = &geom.horizontal_offsets_m;
    if offs.len() != 3 {
        return Err(LineError::Unsupported(format!(
            "modal reduction needs exactly 3 phase conductors, got {}",
            offs.len()
        )));
    }
    let h = geom.height_m;
    let mut pairs = Vec::with_capacity(3);
    let mut p_mutual = 0.0;
    for (i, j) in [(0usize, 1usize), (1, 2), (2, 0)] {
        let d = (offs[i] - offs[j]).abs();
        if d <= 2.0 * geom.radius_m {
            return Err(LineError::Unsupported(format!(
                "phase conductors {i} and {j} overlap (separation {d} m)"
            )));
        }
        let image_distance = (d * d + 4.0 * h * h).sqrt();
        p_mutual += (image_distance / d).ln();
        pairs.push((h, d));
    }
    p_mutual /= 3.0;
    Ok(ModalGeometry {
        p_self: geom.log_ratio(),
        p_mutual,
        pairs,
    })
}

/// Frequency-dependent Clarke-mode models. Ideal transposition is modeled by
/// averaging self and mutual matrix entries before modal reduction; the
/// ground mode combines (Z_s + 2Z_m, Y_s + 2Y_m), the aerial modes
/// (Z_s − Z_m, Y_s − Y_m).
pub fn modal_lines(geom: &WireGeometry, ground: &GroundModel) -> Result<ModalLineSet, LineError> {
    ground.validate()?;
    let mg = modal_geometry(geom)?;
    let internal = if ground.perfect {
        InternalImpedance::ZERO
    } else {
        InternalImpedance::new(geom)
    };

    let make = |p_combined: f64, self_w: f64, mut_w: f64| -> LineModel {
        let mut terms = vec![(
            self_w,
            GroundPath::Conductor { height: geom.height_m },
        )];
        for &(h, d) in &mg.pairs {
            terms.push((
                mut_w / 3.0,
                GroundPath::Pair { mean_height: h, separation: d },
            ));
        }
        LineModel::FrequencyDependent(FdLine {
            series_inductance: MU0 / (2.0 * PI) * p_combined,
            shunt_capacitance: 2.0 * PI * EPS0 / p_combined,
            internal,
            ground_terms: terms,
            ground: ground.clone(),
        })
    };

    let ground_mode = make(mg.p_self + 2.0 * mg.p_mutual, 1.0, 2.0);
    let aerial = make(mg.p_self - mg.p_mutual, 1.0, -1.0);
    Ok(ModalLineSet {
        ground_mode,
        alpha_mode: aerial.clone(),
        beta_mode: aerial,
    })
}

/// Constant-parameter Clarke-mode models (the pre-calculation side): each
/// mode propagates losslessly at its own fixed velocity.
///
/// "Constant" means frequency-independent, not earth-free: line constants
/// are what one would measure at a single reference frequency, so each mode
/// keeps the velocity and surge impedance of the full lossy-ground model
/// evaluated at `f_ref`. The ground mode in particular stays substantially
/// slower than the aerial modes, which is what makes the pre-calculated
/// fault-branch boundary conditions commensurate with reality.
pub fn modal_lines_constant(
    geom: &WireGeometry,
    ground: &GroundModel,
    f_ref_ground: f64,
    f_ref_aerial: f64,
) -> Result<ModalLineSet, LineError> {
    if !(f_ref_ground > 0.0 && f_ref_aerial > 0.0) {
        return Err(LineError::Frequency(format!(
            "reference frequencies must be positive, got {f_ref_ground} / {f_ref_aerial}"
        )));
    }
    let fd = modal_lines(geom, ground)?;
    // Each mode is anchored where its transient content lives: earth-return
    // energy concentrates at a few kilohertz (it is strongly damped above),
    // aerial energy in the tens of kilohertz.
    let freeze = |model: &LineModel, f_ref: f64, keep_loss: bool| {
        let s = Complex64::new(0.0, 2.0 * PI * f_ref);
        let zc = model.surge_impedance(s).norm();
        // The aerial modes freeze lossless: equal resonance heights across
        // candidate locations keep convolution energies comparable between
        // guessed fault locations. The ground mode keeps its
        // reference-frequency attenuation — earth-return ringing dies out
        // in reality, and a pre-calculated database whose ground-mode
        // reflections persist forever would imprint sharp spurious
        // structure on every record.
        let resistance = if keep_loss { 2.0 * zc * model.gamma(s).re } else { 0.0 };
        LineModel::Constant(ConstantLine {
            velocity: model.velocity(2.0 * PI * f_ref),
            surge_impedance: zc,
            resistance_per_m: resistance,
        })
    };
    Ok(ModalLineSet {
        ground_mode: freeze(&fd.ground_mode, f_ref_ground, true),
        alpha_mode: freeze(&fd.alpha_mode, f_ref_aerial, false),
        beta_mode: freeze(&fd.beta_mode, f_ref_aerial, false),
    })
}

/// Log-spaced phase-velocity samples (f, v) over [f_min, f_max].
pub fn velocity_curve(
    model: &LineModel,
    f_min: f64,
    f_max: f64,
    n: usize,
) -> Result<Vec<(f64, f64)>, LineError> {
    if !(f_min > 0.0 && f_max > f_min) {
        return Err(LineError::Frequency(format!(
            "need 0 < f_min < f_max, got [{f_min}, {f_max}]"
        )));
    }
    if n < 2 {
        return Err(LineError::Frequency("velocity curve needs at least 2 points".into()));
    }
    let log_step = (f_max / f_min).ln() / (n - 1) as f64;
    Ok((0..n)
        .map(|i| {
            let f = f_min * (log_step * i as f64).exp();
            (f, model.velocity(2.0 * PI * f))
        })
        .collect())
}

/// Logarithmic velocity fit v(f) = v_c·ln(f/f0) + v(f0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityFit {
    /// Fitting coefficient, m/s per natural-log decade.
    pub v_c: f64,
    /// Reference frequency, Hz.
    pub f0: f64,
    /// Fitted velocity at f0, m/s.
    pub v_f0: f64,
    pub r_squared: f64,
}

impl VelocityFit {
    pub fn velocity(&self, f: f64) -> f64 {
        self.v_c * (f / self.f0).ln() + self.v_f0
    }
}

/// Least-squares fit of the logarithmic velocity law to a sampled curve.
pub fn fit_log_velocity(curve: &[(f64, f64)], f0: f64) -> Result<VelocityFit, LineError> {
    if curve.len() < 3 {
        return Err(LineError::Fit(format!("need at least 3 points, got {}", curve.len())));
    }
    if !(f0 > 0.0) {
        return Err(LineError::Fit("reference frequency must be positive".into()));
    }
    let n = curve.len() as f64;
    let xs: Vec<f64> = curve.iter().map(|&(f, _)| (f / f0).ln()).collect();
    let ys: Vec<f64> = curve.iter().map(|&(_, v)| v).collect();
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean) * (x - x_mean)).sum();
    if sxx <= 0.0 {
        return Err(LineError::Fit("degenerate single-frequency input".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - x_mean) * (y - y_mean)).sum();
    let v_c = sxy / sxx;
    let v_f0 = y_mean - v_c * x_mean;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (v_c * x + v_f0);
            e * e
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - y_mean) * (y - y_mean)).sum();
    let r_squared = if ss_tot <= f64::EPSILON * y_mean * y_mean * n {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(VelocityFit { v_c, f0, v_f0, r_squared })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_geometry() -> WireGeometry {
        WireGeometry {
            height_m: 10.0,
            radius_m: 0.005,
            horizontal_offsets_m: vec![-2.0, 0.0, 2.0],
            conductor_conductivity_s_per_m: 5.8e7,
        }
    }

    fn test_ground(rho: f64) -> GroundModel {
        GroundModel {
            resistivity_ohm_m: rho,
            relative_permittivity: 10.0,
            perfect: false,
        }
    }

    #[test]
    fn constant_model_matches_image_formulas() {
        let geom = test_geometry();
        assert!((geom.log_ratio() - 8.294).abs() < 1e-3);
        let model = pul_constant(&geom).unwrap();
        match &model {
            LineModel::Constant(p) => {
                assert!((p.surge_impedance - 497.0).abs() < 1.0, "Zc = {}", p.surge_impedance);
                assert_eq!(p.velocity, C0);
            }
            _ => panic!("expected constant model"),
        }
    }

    #[test]
    fn constant_surge_impedance_invariant_under_scaling() {
        let geom = test_geometry();
        let mut double = geom.clone();
        double.height_m *= 2.0;
        double.radius_m *= 2.0;
        let z1 = pul_constant(&geom).unwrap().surge_impedance(Complex64::new(0.0, 1.0));
        let z2 = pul_constant(&double).unwrap().surge_impedance(Complex64::new(0.0, 1.0));
        assert!((z1.re - z2.re).abs() < 1e-9);
    }

    #[test]
    fn constant_model_is_exactly_lossless() {
        let model = pul_constant(&test_geometry()).unwrap();
        for f in [1e3, 1e5, 1e6] {
            let omega = 2.0 * PI * f;
            let scaled = model.gamma(Complex64::new(0.0, omega)) * model.v_fi() / omega;
            assert!((scaled.im - 1.0).abs() < 1e-12);
            assert!(scaled.re.abs() < 1e-12);
        }
    }

    #[test]
    fn geometry_rejects_radius_above_height() {
        let mut geom = test_geometry();
        geom.radius_m = 20.0;
        assert!(pul_constant(&geom).is_err());
    }

    #[test]
    fn perfect_ground_gives_speed_of_light() {
        let mut ground = test_ground(10.0);
        ground.perfect = true;
        let model = pul_frequency_dependent(&test_geometry(), &ground).unwrap();
        let omega = 2.0 * PI * 1e5;
        let g = model.gamma(Complex64::new(0.0, omega));
        assert!(g.re.abs() < 1e-12);
        assert!((model.velocity(omega) - C0).abs() < 1e-3);
    }

    #[test]
    fn lossy_ground_slows_the_wave_monotonically() {
        let geom = test_geometry();
        let omega = 2.0 * PI * 1e5;
        let v10 = pul_frequency_dependent(&geom, &test_ground(10.0)).unwrap().velocity(omega);
        let v1000 = pul_frequency_dependent(&geom, &test_ground(1000.0)).unwrap().velocity(omega);
        assert!(v1000 < v10, "v(1000) = {v1000}, v(10) = {v10}");
        assert!(v10 < C0);
    }

    #[test]
    fn lossy_ground_always_attenuates() {
        let model = pul_frequency_dependent(&test_geometry(), &test_ground(100.0)).unwrap();
        for f in [1e3, 1e4, 1e5, 1e6] {
            let g = model.gamma(Complex64::new(0.0, 2.0 * PI * f));
            assert!(g.re > 0.0, "Re γ at {f} Hz = {}", g.re);
        }
    }

    #[test]
    fn gamma_fd_rejects_dc() {
        assert!(gamma_fd(0.0, &test_geometry(), &test_ground(10.0)).is_err());
    }

    #[test]
    fn modal_aerial_modes_identical_for_symmetric_geometry() {
        let mut ground = test_ground(100.0);
        ground.perfect = true;
        let set = modal_lines(&test_geometry(), &ground).unwrap();
        let s = Complex64::new(0.0, 2.0 * PI * 5e4);
        assert_eq!(set.alpha_mode.gamma(s), set.beta_mode.gamma(s));
    }

    #[test]
    fn ground_mode_is_slower_than_aerial() {
        let set = modal_lines(&test_geometry(), &test_ground(1000.0)).unwrap();
        let omega = 2.0 * PI * 1e5;
        let vg = set.ground_mode.velocity(omega);
        let va = set.alpha_mode.velocity(omega);
        assert!(vg < va, "ground {vg} vs aerial {va}");
    }

    fn relative_spread(model: &LineModel) -> f64 {
        let curve = velocity_curve(model, 1e4, 1e6, 41).unwrap();
        let vmin = curve.iter().map(|&(_, v)| v).fold(f64::INFINITY, f64::min);
        let vmax = curve.iter().map(|&(_, v)| v).fold(0.0f64, f64::max);
        (vmax - vmin) / vmax
    }

    #[test]
    fn aerial_velocity_spread_far_below_ground_spread() {
        let set = modal_lines(&test_geometry(), &test_ground(1000.0)).unwrap();
        let aerial = relative_spread(&set.alpha_mode);
        let ground = relative_spread(&set.ground_mode);
        assert!(
            ground > 5.0 * aerial,
            "ground spread {ground} vs aerial spread {aerial}"
        );
    }

    #[test]
    fn aerial_gamma_stays_within_one_percent_of_lossless() {
        let set = modal_lines(&test_geometry(), &test_ground(1000.0)).unwrap();
        let mut ground_violates = false;
        for &f in &[1e4, 3e4, 1e5, 3e5, 1e6] {
            let omega = 2.0 * PI * f;
            let s = Complex64::new(0.0, omega);
            let lossless = omega / C0;
            let aerial_dev = (set.alpha_mode.gamma(s).im - lossless).abs() / lossless;
            assert!(aerial_dev < 0.01, "aerial deviation {aerial_dev} at {f} Hz");
            if (set.ground_mode.gamma(s).im - lossless).abs() / lossless > 0.01 {
                ground_violates = true;
            }
        }
        assert!(ground_violates, "ground mode should exceed the 1% bound");
    }

    #[test]
    fn modal_reduction_rejects_wrong_phase_count() {
        let mut geom = test_geometry();
        geom.horizontal_offsets_m = vec![0.0, 1.0];
        assert!(modal_lines(&geom, &test_ground(10.0)).is_err());
    }

    #[test]
    fn velocity_curve_constant_model_is_flat() {
        let model = pul_constant(&test_geometry()).unwrap();
        for (_, v) in velocity_curve(&model, 1e3, 1e6, 11).unwrap() {
            assert!((v - C0).abs() < 1e-3);
        }
    }

    #[test]
    fn velocity_curve_monotone_for_lossy_ground() {
        let model = pul_frequency_dependent(&test_geometry(), &test_ground(1000.0)).unwrap();
        let curve = velocity_curve(&model, 1e3, 1e6, 31).unwrap();
        for pair in curve.windows(2) {
            assert!(pair[1].1 > pair[0].1, "not monotone near {} Hz", pair[0].0);
        }
    }

    #[test]
    fn velocity_approaches_c_for_vanishing_resistivity() {
        let model = pul_frequency_dependent(&test_geometry(), &test_ground(1e-6)).unwrap();
        let v = model.velocity(2.0 * PI * 1e5);
        assert!(v < C0);
        assert!(v > 0.995 * C0, "v = {v}");
    }

    #[test]
    fn fit_recovers_constant_curve() {
        let curve: Vec<(f64, f64)> = (0..10).map(|i| (1e3 * 2f64.powi(i), 2.5e8)).collect();
        let fit = fit_log_velocity(&curve, 1e4).unwrap();
        assert!(fit.v_c.abs() < 1e-6);
        assert_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn fit_recovers_synthetic_log_law() {
        let (v_c, f0, v_f0) = (2.3e6, 5e4, 2.87e8);
        let curve: Vec<(f64, f64)> = (0..25)
            .map(|i| {
                let f = 1e4 * 1.3f64.powi(i);
                (f, v_c * (f / f0).ln() + v_f0)
            })
            .collect();
        let fit = fit_log_velocity(&curve, f0).unwrap();
        assert!((fit.v_c - v_c).abs() < 1e-9 * v_c);
        assert!((fit.v_f0 - v_f0).abs() < 1e-9 * v_f0);
    }

    #[test]
    fn sunde_curve_is_approximately_logarithmic() {
        let model = pul_frequency_dependent(&test_geometry(), &test_ground(1000.0)).unwrap();
        let curve = velocity_curve(&model, 1e4, 1e6, 25).unwrap();
        let fit = fit_log_velocity(&curve, 1e5).unwrap();
        assert!(fit.r_squared > 0.95, "r² = {}", fit.r_squared);
    }

    #[test]
    fn fit_rejects_degenerate_input() {
        let curve = vec![(1e4, 2.9e8), (1e4, 2.9e8), (1e4, 2.9e8)];
        assert!(fit_log_velocity(&curve, 1e4).is_err());
        assert!(fit_log_velocity(&curve[..2], 1e4).is_err());
    }
}
