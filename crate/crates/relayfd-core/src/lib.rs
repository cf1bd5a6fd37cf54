//! Fault / abrupt-change detection for power-system current signals.
//!
//! The crate provides four online fault detectors operating on sampled
//! current and the supporting machinery to benchmark them:
//!
//! - [`detectors`] — the three classical comparison detectors: sample
//!   comparison (difference against the sample one cycle earlier), phasor
//!   comparison (derivative-based peak estimate differencing), and the
//!   one-cycle moving sum, plus the shared threshold decision rule.
//! - [`ica`] — a self-contained FastICA pipeline: centering, whitening with
//!   dimension reduction, negentropy approximation, deflationary fixed-point
//!   iteration and source separation.
//! - [`ica_detector`] — the ICA-residual detector: time-delay embedding of
//!   the single current channel, per-window FastICA, and a residual index
//!   against a pre-fault reference.
//! - [`freq`] — a variable leaky LMS (VL-LMS) frequency tracker and the
//!   adaptive window resizing it feeds.
//! - [`signal`] — synthetic scenario generation (fault step, decaying DC
//!   offset, harmonics, calibrated white noise) and waveform CSV I/O.

pub mod detectors;
pub mod error;
pub mod freq;
pub mod ica;
pub mod ica_detector;
pub mod signal;

pub use error::{Error, Result};
