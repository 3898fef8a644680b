//! Thin wrappers over `realfft` with per-thread plan caching.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

thread_local! {
    static PLANNER: RefCell<RealFftPlanner<f64>> = RefCell::new(RealFftPlanner::new());
}

pub(crate) fn forward_plan(len: usize) -> Arc<dyn RealToComplex<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len))
}

pub(crate) fn inverse_plan(len: usize) -> Arc<dyn ComplexToReal<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(len))
}

/// Unnormalized DFT of a real signal zero-padded to `len` (a power of two).
/// Returns `len / 2 + 1` bins.
pub(crate) fn real_dft(samples: &[f64], len: usize) -> Vec<Complex64> {
    debug_assert!(len.is_power_of_two() && samples.len() <= len);
    let plan = forward_plan(len);
    let mut input = vec![0.0; len];
    input[..samples.len()].copy_from_slice(samples);
    let mut output = plan.make_output_vec();
    plan.process(&mut input, &mut output)
        .expect("real FFT on matching buffer sizes");
    output
}

/// Inverse of [`real_dft`]: spectrum of `len / 2 + 1` bins to `len` real
/// samples, including the 1/len normalization.
pub(crate) fn real_idft(bins: &[Complex64], len: usize) -> Vec<f64> {
    debug_assert_eq!(bins.len(), len / 2 + 1);
    let plan = inverse_plan(len);
    let mut input = bins.to_vec();
    // realfft requires purely real DC and Nyquist bins.
    input[0].im = 0.0;
    if len % 2 == 0 {
        let last = input.len() - 1;
        input[last].im = 0.0;
    }
    let mut output = plan.make_output_vec();
    plan.process(&mut input, &mut output)
        .expect("inverse real FFT on matching buffer sizes");
    let scale = 1.0 / len as f64;
    for v in &mut output {
        *v *= scale;
    }
    output
}

/// Buffers for repeated forward transforms of one fixed size, so batch
/// ranking does not reallocate per record.
pub(crate) struct RealDftScratch {
    plan: Arc<dyn RealToComplex<f64>>,
    input: Vec<f64>,
    output: Vec<Complex64>,
    len: usize,
}

impl RealDftScratch {
    pub(crate) fn new(len: usize) -> Self {
        debug_assert!(len.is_power_of_two());
        let plan = forward_plan(len);
        let input = vec![0.0; len];
        let output = plan.make_output_vec();
        Self {
            plan,
            input,
            output,
            len,
        }
    }

    pub(crate) fn transform(&mut self, samples: &[f64]) -> &[Complex64] {
        debug_assert!(samples.len() <= self.len);
        self.input[..samples.len()].copy_from_slice(samples);
        self.input[samples.len()..].fill(0.0);
        self.plan
            .process(&mut self.input, &mut self.output)
            .expect("real FFT on matching buffer sizes");
        &self.output
    }
}
