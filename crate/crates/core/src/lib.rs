//! Fault location for multi-phase overhead power lines by electromagnetic
//! transient convolution (EMTC).
//!
//! The toolkit pre-computes a database of terminal transients for guessed
//! fault locations (GFLs), locates real faults by maximizing the energy of
//! the convolution between the measured transient and each stored record,
//! and corrects frequency-dependence / lossy-ground error by running the
//! convolution on the aerial Clarke modes. Analytic transfer-function
//! references and a two-terminal TDOA baseline are included for validation.
//!
//! Crate layout follows the processing chain:
//!
//! * [`signal`] — sampled waveforms, spectra, convolution, Clarke transform
//! * [`line`] — per-unit-length parameters, γ(ω) and Z_C(ω) models
//! * [`network`] — topology, configs, GFL enumeration
//! * [`solver`] — per-frequency nodal solution and transient synthesis
//! * [`locator`] — GFL database, fault classification, CSE location
//! * [`tdoa`] — differentiator-smoother arrival detection baseline
//! * [`analysis`] — closed-form references and the error model

pub mod analysis;
mod fft;
pub mod line;
pub mod locator;
pub mod network;
pub mod signal;
pub mod solver;
pub mod tdoa;

pub use num_complex::Complex64;
