//! Closed-form references and the frequency-dependence error model:
//! analytic terminal transfer functions, harmonic maxima, spectral energy
//! ratios, and the per-harmonic location-error prediction.
//!
//! Everything here is direct evaluation of closed-form expressions — no
//! nodal assembly, no FFT — so these functions double as independent oracles
//! for the transient solver and the locator.

use num_complex::Complex64;
use thiserror::Error;

use crate::line::{LineModel, VelocityFit};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("degenerate velocity fit: |v(f_k) − v_c| = {denominator} m/s is below 1% of v_FI")]
    DegenerateFit { denominator: f64 },
}

/// Voltage reflection coefficient ρ = (Z_0 − Z_C)/(Z_0 + Z_C).
pub fn reflection_coefficient(z_termination: Complex64, z_surge: Complex64) -> Complex64 {
    (z_termination - z_surge) / (z_termination + z_surge)
}

/// Terminal transfer function of a fault-side source at distance `x` behind
/// a termination with reflection coefficient `rho0`:
/// H = (1 + ρ0)·e^{−γx} / (1 + ρ0·e^{−2γx}).
pub fn analytic_terminal(x_m: f64, rho0: Complex64, gamma: Complex64) -> Complex64 {
    let e = (-gamma * x_m).exp();
    (Complex64::ONE + rho0) * e / (Complex64::ONE + rho0 * e * e)
}

/// Per-bin γ and ρ0 of a line model against a resistive termination.
fn line_params_at(model: &LineModel, z0: f64, omega: f64) -> (Complex64, Complex64) {
    let s = Complex64::new(0.0, omega);
    let gamma = model.gamma(s);
    let rho = reflection_coefficient(Complex64::new(z0, 0.0), model.surge_impedance(s));
    (gamma, rho)
}

/// Reverse-process short-circuit current energy (the EMTR reference):
/// integrates |I_f^{RT}(x, ω)|² over the grid, with
/// I = (1+ρ0)²·e^{−γ(x−x_f)} / (Z_0·(1+ρ0·e^{−2γx})·(1+ρ0·e^{2γx_f}))·U_f*.
pub fn analytic_fcse(
    x_m: f64,
    x_fault_m: f64,
    omegas: &[f64],
    model: &LineModel,
    z0: f64,
    u_fault: &[Complex64],
) -> f64 {
    integrate_magnitude_sq(omegas, |i| {
        let omega = omegas[i];
        let (gamma, rho) = line_params_at(model, z0, omega);
        let num = (Complex64::ONE + rho) * (Complex64::ONE + rho) * (-gamma * (x_m - x_fault_m)).exp();
        let den = Complex64::new(z0, 0.0)
            * (Complex64::ONE + rho * (-2.0 * gamma * x_m).exp())
            * (Complex64::ONE + rho * (2.0 * gamma * x_fault_m).exp());
        num / den * u_fault[i].conj()
    })
}

/// Convolution spectrum energy: integrates |C(x, ω)|² with
/// C = (1+ρ0)²·e^{−γ(x_f+x)}·U_f·U / ((1+ρ0·e^{−2γx_f})·(1+ρ0·e^{−2γx})).
pub fn analytic_cse(
    x_m: f64,
    x_fault_m: f64,
    omegas: &[f64],
    model: &LineModel,
    z0: f64,
    u_fault: &[Complex64],
    u_injected: &[Complex64],
) -> f64 {
    integrate_magnitude_sq(omegas, |i| {
        let omega = omegas[i];
        let (gamma, rho) = line_params_at(model, z0, omega);
        let one = Complex64::ONE;
        let num = (one + rho) * (one + rho) * (-gamma * (x_fault_m + x_m)).exp();
        let den = (one + rho * (-2.0 * gamma * x_fault_m).exp())
            * (one + rho * (-2.0 * gamma * x_m).exp());
        num / den * u_fault[i] * u_injected[i]
    })
}

fn integrate_magnitude_sq(omegas: &[f64], f: impl Fn(usize) -> Complex64) -> f64 {
    // Trapezoidal quadrature of |f|² over the ω grid.
    let mut acc = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for (i, &omega) in omegas.iter().enumerate() {
        let m = f(i).norm_sqr();
        if let Some((w0, m0)) = prev {
            acc += 0.5 * (m + m0) * (omega - w0);
        }
        prev = Some((omega, m));
    }
    acc
}

/// Frequencies of the local maxima of |H|: f_k = (2k+1)·v/(4x).
pub fn transfer_maxima(x_m: f64, velocity: f64, k_max: usize) -> Vec<f64> {
    (0..=k_max).map(|k| (2 * k + 1) as f64 * velocity / (4.0 * x_m)).collect()
}

/// Numerically locates the first local maximum of |H^DT(f)| for a line
/// model against a resistive termination.
pub fn first_transfer_maximum(model: &LineModel, z0: f64, x_fault_m: f64) -> f64 {
    // The lossless estimate v/(4x) brackets the peak well; scan around it.
    let f_est = model.velocity(2.0 * std::f64::consts::PI * 1e5) / (4.0 * x_fault_m);
    let lo = 0.2 * f_est;
    let hi = 3.0 * f_est;
    let n = 3000;
    let step = (hi - lo) / n as f64;
    let magnitude = |f: f64| {
        let omega = 2.0 * std::f64::consts::PI * f;
        let (gamma, rho) = line_params_at(model, z0, omega);
        analytic_terminal(x_fault_m, rho, gamma).norm()
    };
    let mut prev = magnitude(lo);
    let mut curr = magnitude(lo + step);
    for i in 2..=n {
        let next = magnitude(lo + step * i as f64);
        if curr >= prev && curr > next {
            // Parabolic refinement around the discrete peak.
            let denom = prev - 2.0 * curr + next;
            let shift = if denom.abs() > 0.0 { 0.5 * (prev - next) / denom } else { 0.0 };
            return lo + step * ((i - 1) as f64 + shift);
        }
        prev = curr;
        curr = next;
    }
    f_est
}

/// Fraction of ∫|H^DT|²df captured below `multiple`·f0, where f0 is the
/// first transfer maximum. Trapezoidal quadrature with bin width `df` up to
/// `f_nyquist`.
pub fn energy_ratio(
    model: &LineModel,
    z0: f64,
    x_fault_m: f64,
    multiple: f64,
    df: f64,
    f_nyquist: f64,
) -> Result<f64, AnalysisError> {
    if !(multiple > 0.0) || !(df > 0.0) || !(f_nyquist > df) {
        return Err(AnalysisError::Parameter(format!(
            "need positive multiple/df and f_nyquist > df, got {multiple}/{df}/{f_nyquist}"
        )));
    }
    let f0 = first_transfer_maximum(model, z0, x_fault_m);
    let f_cut = (multiple * f0).min(f_nyquist);
    let magnitude_sq = |f: f64| {
        let omega = 2.0 * std::f64::consts::PI * f;
        let (gamma, rho) = line_params_at(model, z0, omega);
        analytic_terminal(x_fault_m, rho, gamma).norm_sqr()
    };
    let mut partial = 0.0;
    let mut total = 0.0;
    let mut f = df;
    let mut prev = magnitude_sq(f);
    while f < f_nyquist {
        let f_next = (f + df).min(f_nyquist);
        let next = magnitude_sq(f_next);
        let area = 0.5 * (prev + next) * (f_next - f);
        total += area;
        if f_next <= f_cut {
            partial += area;
        }
        prev = next;
        f = f_next;
    }
    Ok(partial / total)
}

/// Per-harmonic location-error prediction:
/// Δx_k = (v^FI − v(f_k^FI)) / (v(f_k^FI) − v_c) · x_f with
/// f_k^FI = (2k+1)·v^FI/(4·x_f).
///
/// The sign follows from matching the k-th harmonic maxima of the
/// frequency-dependent and constant-parameter transfer functions through
/// the logarithmic velocity law: a slower real line (v < v^FI) pushes the
/// k-th preliminary estimate to x_k = x_f·v^FI/v(f_k) beyond the true
/// position, so Δx_k = x_k − x_f is positive (away from the measurement
/// end) when the database velocity is the faster one.
pub fn predict_error(
    x_fault_m: f64,
    fit: &VelocityFit,
    v_fi: f64,
    k: usize,
) -> Result<f64, AnalysisError> {
    if !(x_fault_m > 0.0) || !(v_fi > 0.0) {
        return Err(AnalysisError::Parameter(
            "fault distance and v_FI must be positive".into(),
        ));
    }
    let f_k = (2 * k + 1) as f64 * v_fi / (4.0 * x_fault_m);
    let v_k = fit.velocity(f_k);
    let denominator = v_k - fit.v_c;
    if denominator.abs() < 0.01 * v_fi {
        return Err(AnalysisError::DegenerateFit { denominator });
    }
    Ok((v_fi - v_k) / denominator * x_fault_m)
}

/// Frequency-dependence error model: the fitted velocity law plus the
/// predicted per-harmonic errors at one fault distance.
#[derive(Debug, Clone)]
pub struct ErrorModel {
    pub fit: VelocityFit,
    pub v_fi: f64,
    /// Measured proportionality Δx = λ·x (from a location sweep), if known.
    pub lambda: Option<f64>,
    /// Δx_k/x_f for k = 0..=9.
    pub delta_ratio: Vec<f64>,
}

impl ErrorModel {
    pub fn build(
        fit: VelocityFit,
        v_fi: f64,
        x_fault_m: f64,
        lambda: Option<f64>,
    ) -> Result<Self, AnalysisError> {
        let delta_ratio = (0..10)
            .map(|k| predict_error(x_fault_m, &fit, v_fi, k).map(|d| d / x_fault_m))
            .collect::<Result<Vec<f64>, AnalysisError>>()?;
        Ok(Self { fit, v_fi, lambda, delta_ratio })
    }
}

/// Least-squares slope of location error against predicted position,
/// through the origin: error = λ·x. Returns (λ, r²).
pub fn fit_lambda(
    true_positions: &[f64],
    predicted_positions: &[f64],
) -> Result<(f64, f64), AnalysisError> {
    if true_positions.len() != predicted_positions.len() || true_positions.len() < 3 {
        return Err(AnalysisError::Parameter(format!(
            "need at least 3 matched scenarios, got {} and {}",
            true_positions.len(),
            predicted_positions.len()
        )));
    }
    let errors: Vec<f64> = predicted_positions
        .iter()
        .zip(true_positions)
        .map(|(p, t)| p - t)
        .collect();
    let sxx: f64 = predicted_positions.iter().map(|x| x * x).sum();
    if sxx == 0.0 {
        return Err(AnalysisError::Parameter("all predicted positions are zero".into()));
    }
    let sxy: f64 = predicted_positions.iter().zip(&errors).map(|(x, e)| x * e).sum();
    let lambda = sxy / sxx;
    let e_mean = errors.iter().sum::<f64>() / errors.len() as f64;
    let ss_tot: f64 = errors.iter().map(|e| (e - e_mean) * (e - e_mean)).sum();
    let ss_res: f64 = predicted_positions
        .iter()
        .zip(&errors)
        .map(|(x, e)| {
            let r = e - lambda * x;
            r * r
        })
        .sum();
    let r_squared = if ss_tot <= 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok((lambda, r_squared))
}
