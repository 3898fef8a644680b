//! Sampled-waveform arithmetic: generation, convolution, energy, spectra,
//! and the Clarke phase-mode transformation.
//!
//! All types are immutable values; every operation is a pure function and
//! safe to call from any number of worker threads.

use std::io::{self, BufRead, Write};

use num_complex::Complex64;
use thiserror::Error;

use crate::fft;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("invalid waveform parameter: {0}")]
    Parameter(String),
    #[error("waveform shape mismatch: {0}")]
    Shape(String),
    #[error("csv parse error at line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A uniformly sampled real time signal (volts or amperes).
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    dt: f64,
    t0: f64,
    samples: Vec<f64>,
}

impl Waveform {
    pub fn new(dt: f64, t0: f64, samples: Vec<f64>) -> Result<Self, SignalError> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(SignalError::Parameter(format!("dt must be positive, got {dt}")));
        }
        if samples.is_empty() {
            return Err(SignalError::Parameter("waveform needs at least one sample".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(SignalError::Parameter("waveform samples must be finite".into()));
        }
        Ok(Self { dt, t0, samples })
    }

    pub fn zeros(dt: f64, t0: f64, len: usize) -> Result<Self, SignalError> {
        Self::new(dt, t0, vec![0.0; len.max(1)])
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// Time of sample `i`.
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn scaled(&self, factor: f64) -> Waveform {
        Waveform {
            dt: self.dt,
            t0: self.t0,
            samples: self.samples.iter().map(|s| s * factor).collect(),
        }
    }

    pub fn peak_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// Two-column CSV: `time_s,value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), SignalError> {
        writeln!(w, "time_s,value")?;
        for (i, s) in self.samples.iter().enumerate() {
            writeln!(w, "{},{}", self.time(i), s)?;
        }
        Ok(())
    }

    /// Reads the CSV form written by [`Waveform::write_csv`]. The time grid
    /// must be uniform; `dt` is recovered from the first two rows.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, SignalError> {
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || (idx == 0 && trimmed.starts_with("time_s")) {
                continue;
            }
            let mut parts = trimmed.split(',');
            let parse = |s: Option<&str>| -> Result<f64, SignalError> {
                s.ok_or_else(|| SignalError::Csv {
                    line: idx + 1,
                    msg: "missing column".into(),
                })?
                .trim()
                .parse()
                .map_err(|e| SignalError::Csv {
                    line: idx + 1,
                    msg: format!("{e}"),
                })
            };
            times.push(parse(parts.next())?);
            values.push(parse(parts.next())?);
        }
        if values.len() < 2 {
            return Err(SignalError::Parameter("csv waveform needs at least two rows".into()));
        }
        let dt = times[1] - times[0];
        Waveform::new(dt, times[0], values)
    }
}

/// Complex frequency-domain counterpart of a waveform. `damping` is the real
/// Laplace shift σ of the grid the bins were evaluated on (0 for a pure
/// Fourier spectrum).
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub df: f64,
    pub damping: f64,
    pub bins: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(df: f64, damping: f64, bins: Vec<Complex64>) -> Result<Self, SignalError> {
        if !(df > 0.0) {
            return Err(SignalError::Parameter(format!("df must be positive, got {df}")));
        }
        if bins.is_empty() {
            return Err(SignalError::Parameter("spectrum needs at least one bin".into()));
        }
        Ok(Self { df, damping, bins })
    }
}

fn check_triple(x: &Waveform, y: &Waveform, z: &Waveform) -> Result<(), SignalError> {
    if x.dt != y.dt || x.dt != z.dt || x.t0 != y.t0 || x.t0 != z.t0 {
        return Err(SignalError::Shape("components must share dt and t0".into()));
    }
    if x.len() != y.len() || x.len() != z.len() {
        return Err(SignalError::Shape(format!(
            "components must share length, got {}/{}/{}",
            x.len(),
            y.len(),
            z.len()
        )));
    }
    Ok(())
}

/// Phase-domain three-phase signal.
#[derive(Debug, Clone)]
pub struct PhaseTriple {
    pub a: Waveform,
    pub b: Waveform,
    pub c: Waveform,
}

impl PhaseTriple {
    pub fn new(a: Waveform, b: Waveform, c: Waveform) -> Result<Self, SignalError> {
        check_triple(&a, &b, &c)?;
        Ok(Self { a, b, c })
    }

    pub fn phase(&self, p: Phase) -> &Waveform {
        match p {
            Phase::A => &self.a,
            Phase::B => &self.b,
            Phase::C => &self.c,
        }
    }

    pub fn dt(&self) -> f64 {
        self.a.dt()
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Modal-domain (Clarke) three-component signal.
#[derive(Debug, Clone)]
pub struct ModalSignal {
    pub mode0: Waveform,
    pub alpha: Waveform,
    pub beta: Waveform,
}

impl ModalSignal {
    pub fn new(mode0: Waveform, alpha: Waveform, beta: Waveform) -> Result<Self, SignalError> {
        check_triple(&mode0, &alpha, &beta)?;
        Ok(Self { mode0, alpha, beta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    A,
    B,
    C,
}

pub const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Clarke phase→mode transformation, power-variant form:
/// `[U0, Uα, Uβ]ᵀ = (1/3)·[[1,1,1],[2,−1,−1],[0,√3,−√3]]·[Ua, Ub, Uc]ᵀ`.
pub fn clarke_forward(p: &PhaseTriple) -> ModalSignal {
    let n = p.len();
    let mut m0 = Vec::with_capacity(n);
    let mut al = Vec::with_capacity(n);
    let mut be = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b, c) = (p.a.samples[i], p.b.samples[i], p.c.samples[i]);
        m0.push((a + b + c) / 3.0);
        al.push((2.0 * a - b - c) / 3.0);
        be.push(SQRT3 * (b - c) / 3.0);
    }
    let dt = p.dt();
    let t0 = p.a.t0();
    ModalSignal {
        mode0: Waveform::new(dt, t0, m0).expect("valid components"),
        alpha: Waveform::new(dt, t0, al).expect("valid components"),
        beta: Waveform::new(dt, t0, be).expect("valid components"),
    }
}

/// Exact inverse of [`clarke_forward`]:
/// `T = [[1,1,0],[1,−1/2,√3/2],[1,−1/2,−√3/2]]` applied sample-wise.
pub fn clarke_inverse(m: &ModalSignal) -> PhaseTriple {
    let n = m.mode0.len();
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    let mut c = Vec::with_capacity(n);
    for i in 0..n {
        let (m0, al, be) = (m.mode0.samples[i], m.alpha.samples[i], m.beta.samples[i]);
        a.push(m0 + al);
        b.push(m0 - 0.5 * al + SQRT3 / 2.0 * be);
        c.push(m0 - 0.5 * al - SQRT3 / 2.0 * be);
    }
    let dt = m.mode0.dt();
    let t0 = m.mode0.t0();
    PhaseTriple {
        a: Waveform::new(dt, t0, a).expect("valid components"),
        b: Waveform::new(dt, t0, b).expect("valid components"),
        c: Waveform::new(dt, t0, c).expect("valid components"),
    }
}

/// Double-exponential lightning impulse `u(t) = A(e^{−t/α} − e^{−t/β})`,
/// sampled from t = 0 for `duration` seconds.
pub fn lightning_impulse(
    dt: f64,
    duration: f64,
    amplitude: f64,
    alpha: f64,
    beta: f64,
) -> Result<Waveform, SignalError> {
    if !(beta > 0.0 && alpha > beta) {
        return Err(SignalError::Parameter(format!(
            "impulse time constants need 0 < beta < alpha, got alpha={alpha}, beta={beta}"
        )));
    }
    if duration < 10.0 * alpha {
        return Err(SignalError::Parameter(format!(
            "impulse duration {duration} shorter than 10·alpha = {}",
            10.0 * alpha
        )));
    }
    let n = (duration / dt).round() as usize + 1;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 * dt;
            amplitude * ((-t / alpha).exp() - (-t / beta).exp())
        })
        .collect();
    Waveform::new(dt, 0.0, samples)
}

/// Zero-net-area doublet: the normalized derivative of the lightning
/// impulse, `u(t) = A·(e^{−t/β}/β − e^{−t/α}/α)/(1/β − 1/α)`, peaking at
/// `u(0) = A` with ∫u dt = 0 exactly.
pub fn impulse_doublet(
    dt: f64,
    duration: f64,
    amplitude: f64,
    alpha: f64,
    beta: f64,
) -> Result<Waveform, SignalError> {
    if !(beta > 0.0 && alpha > beta) {
        return Err(SignalError::Parameter(format!(
            "doublet time constants need 0 < beta < alpha, got alpha={alpha}, beta={beta}"
        )));
    }
    if duration < 10.0 * alpha {
        return Err(SignalError::Parameter(format!(
            "doublet duration {duration} shorter than 10·alpha = {}",
            10.0 * alpha
        )));
    }
    let n = (duration / dt).round() as usize + 1;
    let scale = amplitude / (1.0 / beta - 1.0 / alpha);
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 * dt;
            scale * ((-t / beta).exp() / beta - (-t / alpha).exp() / alpha)
        })
        .collect();
    Waveform::new(dt, 0.0, samples)
}

/// Rectangular pulse of the given width starting at t = 0.
pub fn rectangular_pulse(
    dt: f64,
    duration: f64,
    amplitude: f64,
    width: f64,
) -> Result<Waveform, SignalError> {
    if !(width > 0.0) || width > duration {
        return Err(SignalError::Parameter(format!(
            "pulse width must lie in (0, duration], got {width}"
        )));
    }
    let n = (duration / dt).round() as usize + 1;
    let samples = (0..n)
        .map(|i| if (i as f64 * dt) < width { amplitude } else { 0.0 })
        .collect();
    Waveform::new(dt, 0.0, samples)
}

/// Full linear convolution scaled by dt, via a zero-padded fast transform.
/// Output length is `a.len() + b.len() − 1`; zero padding to the next power
/// of two keeps the result free of circular wrap-around.
pub fn convolve(a: &Waveform, b: &Waveform) -> Result<Waveform, SignalError> {
    if a.dt != b.dt {
        return Err(SignalError::Parameter(format!(
            "convolution requires equal dt, got {} and {}",
            a.dt, b.dt
        )));
    }
    let out_len = a.len() + b.len() - 1;
    let n = out_len.next_power_of_two();
    let fa = fft::real_dft(a.samples(), n);
    let fb = fft::real_dft(b.samples(), n);
    let product: Vec<Complex64> = fa.iter().zip(&fb).map(|(x, y)| x * y).collect();
    let mut full = fft::real_idft(&product, n);
    full.truncate(out_len);
    for v in &mut full {
        *v *= a.dt;
    }
    Waveform::new(a.dt, a.t0 + b.t0, full)
}

/// Signal energy `Σ w[i]²·dt`.
pub fn signal_energy(w: &Waveform) -> f64 {
    w.samples.iter().map(|s| s * s).sum::<f64>() * w.dt
}

/// Energy of `convolve(a, b)` evaluated entirely in the frequency domain
/// through Parseval's identity. Shares no code with the time-domain path.
pub fn conv_energy_spectral(a: &Waveform, b: &Waveform) -> Result<f64, SignalError> {
    if a.dt != b.dt {
        return Err(SignalError::Parameter(format!(
            "convolution requires equal dt, got {} and {}",
            a.dt, b.dt
        )));
    }
    let n = (a.len() + b.len() - 1).next_power_of_two();
    let fa = fft::real_dft(a.samples(), n);
    let fb = fft::real_dft(b.samples(), n);
    Ok(spectral_product_energy(&fa, &fb, a.dt, n))
}

/// `Σ_k |A_k·B_k|²·dt³/N` over the full DFT grid, given the non-negative
/// half of two real-signal spectra.
pub(crate) fn spectral_product_energy(
    fa: &[Complex64],
    fb: &[Complex64],
    dt: f64,
    n: usize,
) -> f64 {
    debug_assert_eq!(fa.len(), n / 2 + 1);
    debug_assert_eq!(fa.len(), fb.len());
    let mut sum = 0.0;
    for (k, (x, y)) in fa.iter().zip(fb).enumerate() {
        let m = (x * y).norm_sqr();
        // Interior bins appear twice in the full hermitian spectrum.
        if k == 0 || k == n / 2 {
            sum += m;
        } else {
            sum += 2.0 * m;
        }
    }
    sum * dt * dt * dt / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg_signal(seed: u64, dt: f64, len: usize) -> Waveform {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let samples = (0..len)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect();
        Waveform::new(dt, 0.0, samples).unwrap()
    }

    #[test]
    fn impulse_starts_at_zero_and_decays() {
        let w = lightning_impulse(1e-7, 2e-4, 10e3, 20e-6, 3e-6).unwrap();
        assert_eq!(w.samples()[0], 0.0);
        let at_10_alpha = w.samples()[(10.0 * 20e-6 / 1e-7) as usize];
        assert!(at_10_alpha.abs() < 0.0005 * 10e3);
    }

    #[test]
    fn impulse_peak_matches_analytic_maximum() {
        // t* = ln(α/β)/(1/β − 1/α), u(t*) ≈ 6.082 kV for A = 10 kV.
        let (alpha, beta) = (20e-6, 3e-6);
        let w = lightning_impulse(1e-8, 2e-4, 10e3, alpha, beta).unwrap();
        let (idx, peak) = w
            .samples()
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
        let t_star = (alpha / beta).ln() / (1.0 / beta - 1.0 / alpha);
        assert!((w.time(idx) - t_star).abs() < 2e-8, "peak at {} vs {}", w.time(idx), t_star);
        assert!((t_star - 6.696e-6).abs() < 2e-9);
        assert!((peak - 6.082e3).abs() < 1.0, "peak {peak}");
    }

    #[test]
    fn impulse_is_nonnegative_for_alpha_greater_beta() {
        let w = lightning_impulse(1e-7, 5e-4, 1.0, 50e-6, 1e-6).unwrap();
        assert!(w.samples().iter().all(|&s| s >= 0.0));
    }

    #[test]
    fn impulse_rejects_inverted_time_constants() {
        assert!(lightning_impulse(1e-7, 1e-3, 1.0, 3e-6, 20e-6).is_err());
        assert!(lightning_impulse(1e-7, 1e-3, 1.0, 20e-6, -1e-6).is_err());
        assert!(lightning_impulse(1e-7, 1e-5, 1.0, 20e-6, 3e-6).is_err(), "short duration");
    }

    fn triple(a: &[f64], b: &[f64], c: &[f64]) -> PhaseTriple {
        PhaseTriple::new(
            Waveform::new(1.0, 0.0, a.to_vec()).unwrap(),
            Waveform::new(1.0, 0.0, b.to_vec()).unwrap(),
            Waveform::new(1.0, 0.0, c.to_vec()).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn clarke_forward_known_vectors() {
        let m = clarke_forward(&triple(&[1.0], &[1.0], &[1.0]));
        assert!((m.mode0.samples()[0] - 1.0).abs() < 1e-15);
        assert!(m.alpha.samples()[0].abs() < 1e-15);
        assert!(m.beta.samples()[0].abs() < 1e-15);

        let m = clarke_forward(&triple(&[1.0], &[0.0], &[0.0]));
        assert!((m.mode0.samples()[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.alpha.samples()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!(m.beta.samples()[0].abs() < 1e-15);

        let m = clarke_forward(&triple(&[0.0], &[1.0], &[-1.0]));
        assert!(m.mode0.samples()[0].abs() < 1e-15);
        assert!(m.alpha.samples()[0].abs() < 1e-15);
        assert!((m.beta.samples()[0] - 2.0 * SQRT3 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn clarke_inverse_known_vectors() {
        let m = ModalSignal::new(
            Waveform::new(1.0, 0.0, vec![1.0]).unwrap(),
            Waveform::new(1.0, 0.0, vec![0.0]).unwrap(),
            Waveform::new(1.0, 0.0, vec![0.0]).unwrap(),
        )
        .unwrap();
        let p = clarke_inverse(&m);
        assert!((p.a.samples()[0] - 1.0).abs() < 1e-15);
        assert!((p.b.samples()[0] - 1.0).abs() < 1e-15);
        assert!((p.c.samples()[0] - 1.0).abs() < 1e-15);

        let m = ModalSignal::new(
            Waveform::new(1.0, 0.0, vec![0.0]).unwrap(),
            Waveform::new(1.0, 0.0, vec![0.0]).unwrap(),
            Waveform::new(1.0, 0.0, vec![1.0]).unwrap(),
        )
        .unwrap();
        let p = clarke_inverse(&m);
        assert!(p.a.samples()[0].abs() < 1e-15);
        assert!((p.b.samples()[0] - SQRT3 / 2.0).abs() < 1e-15);
        assert!((p.c.samples()[0] + SQRT3 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn clarke_round_trip_is_identity() {
        let p = PhaseTriple::new(
            lcg_signal(1, 1e-6, 257),
            lcg_signal(2, 1e-6, 257),
            lcg_signal(3, 1e-6, 257),
        )
        .unwrap();
        let back = clarke_inverse(&clarke_forward(&p));
        for (orig, rt) in [(&p.a, &back.a), (&p.b, &back.b), (&p.c, &back.c)] {
            for (x, y) in orig.samples().iter().zip(rt.samples()) {
                assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn convolve_with_unit_impulse_is_identity() {
        let dt = 1e-6;
        let a = lcg_signal(7, dt, 100);
        let delta = Waveform::new(dt, 0.0, vec![1.0 / dt]).unwrap();
        let c = convolve(&a, &delta).unwrap();
        assert_eq!(c.len(), 100);
        for (x, y) in a.samples().iter().zip(c.samples()) {
            assert!((x - y).abs() < 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn convolve_length_arithmetic() {
        let a = lcg_signal(1, 1.0, 100);
        let b = lcg_signal(2, 1.0, 50);
        assert_eq!(convolve(&a, &b).unwrap().len(), 149);
    }

    #[test]
    fn convolve_rejects_dt_mismatch() {
        let a = lcg_signal(1, 1.0, 10);
        let b = lcg_signal(2, 2.0, 10);
        assert!(convolve(&a, &b).is_err());
    }

    #[test]
    fn convolve_is_commutative_and_bilinear() {
        let a = lcg_signal(11, 1e-6, 64);
        let b = lcg_signal(12, 1e-6, 80);
        let c = lcg_signal(13, 1e-6, 64);

        let ab = convolve(&a, &b).unwrap();
        let ba = convolve(&b, &a).unwrap();
        for (x, y) in ab.samples().iter().zip(ba.samples()) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }

        // (a + 2c) ∗ b == a∗b + 2(c∗b)
        let sum = Waveform::new(
            1e-6,
            0.0,
            a.samples().iter().zip(c.samples()).map(|(x, y)| x + 2.0 * y).collect(),
        )
        .unwrap();
        let lhs = convolve(&sum, &b).unwrap();
        let cb = convolve(&c, &b).unwrap();
        for i in 0..lhs.len() {
            let rhs = ab.samples()[i] + 2.0 * cb.samples()[i];
            assert!((lhs.samples()[i] - rhs).abs() <= 1e-12 * rhs.abs().max(1e-9));
        }
    }

    #[test]
    fn parseval_time_vs_spectral_product() {
        let a = lcg_signal(21, 1e-7, 300);
        let b = lcg_signal(22, 1e-7, 211);
        let time = signal_energy(&convolve(&a, &b).unwrap());
        let spectral = conv_energy_spectral(&a, &b).unwrap();
        assert!(
            (time - spectral).abs() <= 1e-9 * time.abs(),
            "time {time} vs spectral {spectral}"
        );
    }

    #[test]
    fn energy_basics() {
        let z = Waveform::zeros(1.0, 0.0, 8).unwrap();
        assert_eq!(signal_energy(&z), 0.0);
        let one = Waveform::new(1.0, 0.0, vec![1.0]).unwrap();
        assert_eq!(signal_energy(&one), 1.0);
    }

    #[test]
    fn energy_of_unit_sine_full_period() {
        let period = 0.02;
        let n = 1000;
        let dt = period / n as f64;
        let samples: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * i as f64 / n as f64).sin())
            .collect();
        let w = Waveform::new(dt, 0.0, samples).unwrap();
        let expected = period / 2.0;
        assert!((signal_energy(&w) - expected).abs() < 1e-6 * expected);
    }

    #[test]
    fn csv_round_trip() {
        let w = lcg_signal(5, 2.5e-7, 40);
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        let back = Waveform::read_csv(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back.len(), w.len());
        assert!((back.dt() - w.dt()).abs() < 1e-20);
        for (x, y) in w.samples().iter().zip(back.samples()) {
            assert_eq!(x, y);
        }
    }
}
