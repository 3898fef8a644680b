//! Two-terminal traveling-wave baseline: differentiator-smoother arrival
//! detection and the classical / setting-free TDOA metrics.

use thiserror::Error;

use crate::signal::Waveform;

#[derive(Debug, Error)]
pub enum TdoaError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("no threshold crossing found ({0})")]
    DetectionFailure(String),
    #[error("degenerate geometry: both reflection intervals are zero")]
    DegenerateGeometry,
}

/// Differentiator-smoother: convolution with a Haar-like kernel of `+1/w`
/// over the leading `w` samples and `−1/w` over the next `w`, aligned so an
/// ideal unit step produces a triangular pulse peaking (value 1) at the step
/// index.
pub fn diff_smoother(w: &Waveform, window: usize) -> Result<Waveform, TdoaError> {
    if window < 1 {
        return Err(TdoaError::Parameter("window must be at least 1 sample".into()));
    }
    if 2 * window > w.len() {
        return Err(TdoaError::Parameter(format!(
            "window {window} too large for signal of {} samples",
            w.len()
        )));
    }
    let x = w.samples();
    let n = x.len();
    // prefix[i] = Σ x[0..i]
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + x[i];
    }
    let range_sum = |lo: isize, hi: isize| -> f64 {
        // Sum of x[lo..hi) with zero padding outside the signal.
        let lo = lo.clamp(0, n as isize) as usize;
        let hi = hi.clamp(0, n as isize) as usize;
        if hi > lo {
            prefix[hi] - prefix[lo]
        } else {
            0.0
        }
    };
    let wlen = window as isize;
    let out: Vec<f64> = (0..n as isize)
        .map(|i| (range_sum(i, i + wlen) - range_sum(i - wlen, i)) / window as f64)
        .collect();
    Ok(Waveform::new(w.dt(), w.t0(), out).expect("same shape as input"))
}

/// First and first-reflected arrival instants at one terminal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminalArrivals {
    pub first_s: f64,
    pub reflected_s: f64,
    /// Set when the filtered signal never dropped below the threshold
    /// between the two detections, so the reflected instant is uncertain.
    pub ambiguous: bool,
}

/// Threshold detector on a differentiator-smoother output. The threshold is
/// 1% of the RMS reference voltage, peak-referred (×√2); the reflected
/// arrival is the first exceedance after a refractory interval of 3·window
/// samples whose polarity is opposite to the first arrival.
///
/// The polarity test separates the fault-point reflection (inverted by the
/// fault's negative reflection coefficient) from waves launched toward the
/// other terminal and transmitted through the fault, which keep the original
/// polarity and can arrive earlier for off-center faults.
pub fn detect_arrivals(
    filtered: &Waveform,
    rms_reference_v: f64,
    window: usize,
) -> Result<TerminalArrivals, TdoaError> {
    if !(rms_reference_v > 0.0) {
        return Err(TdoaError::Parameter(format!(
            "rms reference must be positive, got {rms_reference_v}"
        )));
    }
    let threshold = 0.01 * rms_reference_v * 2f64.sqrt();
    let x = filtered.samples();
    let first = x
        .iter()
        .position(|s| s.abs() > threshold)
        .ok_or_else(|| TdoaError::DetectionFailure(format!("threshold {threshold} V")))?;
    let first_sign = x[first] > 0.0;
    let refractory = first + 3 * window;
    let mut dropped = false;
    let mut reflected = None;
    for (i, s) in x.iter().enumerate().skip(first + 1) {
        if s.abs() <= threshold {
            dropped = true;
        }
        if i >= refractory && s.abs() > threshold && (*s > 0.0) != first_sign {
            reflected = Some(i);
            break;
        }
    }
    let reflected = reflected.ok_or_else(|| {
        TdoaError::DetectionFailure(
            "no opposite-polarity reflection after the refractory interval".into(),
        )
    })?;
    Ok(TerminalArrivals {
        first_s: filtered.time(first),
        reflected_s: filtered.time(reflected),
        ambiguous: !dropped,
    })
}

/// Arrival instants at the two line terminals (lattice-diagram notation:
/// t0/t0r at the near end, tL/tLr at the far end).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrivalTimes {
    pub t0: f64,
    pub t0r: f64,
    pub tl: f64,
    pub tlr: f64,
}

impl ArrivalTimes {
    pub fn new(near: TerminalArrivals, far: TerminalArrivals) -> Result<Self, TdoaError> {
        if !(near.reflected_s > near.first_s && far.reflected_s > far.first_s) {
            return Err(TdoaError::Parameter(
                "reflected arrivals must come after the first arrivals".into(),
            ));
        }
        Ok(Self {
            t0: near.first_s,
            t0r: near.reflected_s,
            tl: far.first_s,
            tlr: far.reflected_s,
        })
    }
}

/// A TDOA position estimate; out-of-range results are reported, not clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdoaEstimate {
    pub position_m: f64,
    pub in_range: bool,
}

/// Classical two-end metric x = 0.5·(L − v·(t_L − t_0)).
pub fn tdoa_classic(times: &ArrivalTimes, velocity: f64, length_m: f64) -> TdoaEstimate {
    let x = 0.5 * (length_m - velocity * (times.tl - times.t0));
    TdoaEstimate { position_m: x, in_range: (0.0..=length_m).contains(&x) }
}

/// Setting-free metric x = (t0r−t0)/((t0r−t0)+(tLr−tL))·L; needs no velocity.
pub fn tdoa_setting_free(times: &ArrivalTimes, length_m: f64) -> Result<TdoaEstimate, TdoaError> {
    let near = times.t0r - times.t0;
    let far = times.tlr - times.tl;
    let denom = near + far;
    if denom == 0.0 {
        return Err(TdoaError::DegenerateGeometry);
    }
    let x = near / denom * length_m;
    Ok(TdoaEstimate { position_m: x, in_range: (0.0..=length_m).contains(&x) })
}
