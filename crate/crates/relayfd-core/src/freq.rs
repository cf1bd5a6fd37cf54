//! Variable leaky LMS (VL-LMS) frequency estimation and adaptive window
//! sizing for cycle-based detectors.
//!
//! The single-phase current is lifted to a complex (analytic-like) sequence
//! by a quarter-cycle quadrature delay; a one-tap complex predictor then
//! tracks the per-sample phase rotation, whose angle encodes the system
//! frequency. The leakage factor adapts on the squared prediction error:
//! it grows while the error grows (pulling the weight toward a safe
//! magnitude) and decays to zero in steady state, so the clean fixed point
//! `w = exp(j*2*pi*f/fs)` is exact.

use crate::error::{Error, Result};
use crate::signal::Waveform;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Complex sequence built from a real waveform by quarter-cycle delay:
/// `v(k) = i(k) + j*i(k - delay)`. Entries cover samples
/// `start_k..start_k + values.len()` of the source waveform.
#[derive(Debug, Clone)]
pub struct AnalyticSignal {
    pub values: Vec<Complex64>,
    /// Waveform sample index of `values[0]` (= the quadrature delay).
    pub start_k: usize,
    /// Quadrature delay in samples, `round(fs / (4 * f_nominal))`.
    pub delay: usize,
    /// Phase error of the integer-rounded delay at the nominal frequency:
    /// `delay * omega_nominal - pi/2`. Zero when N/4 is an integer.
    pub phase_error_rad: f64,
}

/// Lifts a real waveform to a complex sequence using a quarter-cycle delay
/// at the nominal frequency. The first `delay` samples have no quadrature
/// partner and are omitted.
pub fn make_analytic(w: &Waveform, nominal_freq_hz: f64) -> Result<AnalyticSignal> {
    if !(nominal_freq_hz > 0.0) {
        return Err(Error::InvalidInput("nominal frequency must be positive".into()));
    }
    if w.fs_hz < 4.0 * nominal_freq_hz {
        return Err(Error::InvalidInput(format!(
            "need fs >= 4*f_nominal for quadrature delay, got fs {} and f {}",
            w.fs_hz, nominal_freq_hz
        )));
    }
    let omega = 2.0 * PI * nominal_freq_hz / w.fs_hz;
    let delay = (w.fs_hz / (4.0 * nominal_freq_hz)).round().max(1.0) as usize;
    if w.len() <= delay {
        return Err(Error::InsufficientData(format!(
            "waveform shorter than the quadrature delay ({} <= {delay})",
            w.len()
        )));
    }
    let values = (delay..w.len())
        .map(|k| Complex64::new(w.samples[k], w.samples[k - delay]))
        .collect();
    Ok(AnalyticSignal {
        values,
        start_k: delay,
        delay,
        phase_error_rad: delay as f64 * omega - PI / 2.0,
    })
}

/// Parameters of the VL-LMS tracker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VllmsParams {
    /// Normalized step size.
    pub mu: f64,
    /// Initial leakage factor.
    pub leak_initial: f64,
    /// Upper bound for the adaptive leakage.
    pub leak_max: f64,
    /// Increment of the sign-gradient leakage adaptation.
    pub leak_step: f64,
    /// Weight-magnitude guard; exceeding it resets the tracker.
    pub weight_guard: f64,
}

impl Default for VllmsParams {
    fn default() -> Self {
        Self { mu: 0.15, leak_initial: 0.01, leak_max: 0.1, leak_step: 1e-3, weight_guard: 1.5 }
    }
}

/// One-tap complex VL-LMS predictor state. The weight angle tracks the
/// per-sample phase rotation; the frequency readout averages the weight
/// over one nominal cycle and compensates the known quadrature-delay bias.
#[derive(Debug, Clone)]
pub struct VllmsState {
    /// Adaptive complex coefficient.
    pub weight: Complex64,
    /// Step size.
    pub mu: f64,
    /// Current leakage factor.
    pub leak: f64,
    /// Latest frequency estimate in Hz.
    pub freq_estimate_hz: f64,
    params: VllmsParams,
    fs_hz: f64,
    nominal_weight: Complex64,
    quadrature_delay: usize,
    prev_err_sq: f64,
    history: Vec<Complex64>,
    history_pos: usize,
    history_len: usize,
}

impl VllmsState {
    /// Initializes the tracker at the nominal frequency:
    /// `w = exp(j*2*pi*f_nominal/fs)`.
    pub fn new(
        fs_hz: f64,
        nominal_freq_hz: f64,
        quadrature_delay: usize,
        params: VllmsParams,
    ) -> Result<Self> {
        if !(fs_hz > 0.0) || !(nominal_freq_hz > 0.0) {
            return Err(Error::InvalidInput("fs and nominal frequency must be positive".into()));
        }
        if !(params.mu > 0.0) {
            return Err(Error::InvalidInput("mu must be positive".into()));
        }
        if !(params.leak_initial >= 0.0 && params.leak_initial < 1.0)
            || !(params.leak_max >= 0.0 && params.leak_max < 1.0)
        {
            return Err(Error::InvalidInput("leak factors must lie in [0, 1)".into()));
        }
        let omega = 2.0 * PI * nominal_freq_hz / fs_hz;
        let w0 = Complex64::from_polar(1.0, omega);
        let cycle = (fs_hz / nominal_freq_hz).round().max(1.0) as usize;
        Ok(Self {
            weight: w0,
            mu: params.mu,
            leak: params.leak_initial,
            freq_estimate_hz: nominal_freq_hz,
            params,
            fs_hz,
            nominal_weight: w0,
            quadrature_delay,
            prev_err_sq: 0.0,
            history: vec![w0; cycle],
            history_pos: 0,
            history_len: 0,
        })
    }

    pub fn with_defaults(fs_hz: f64, nominal_freq_hz: f64, quadrature_delay: usize) -> Result<Self> {
        Self::new(fs_hz, nominal_freq_hz, quadrature_delay, VllmsParams::default())
    }

    pub fn params(&self) -> &VllmsParams {
        &self.params
    }

    /// One predictor update: `e = v_now - w*v_prev`, normalized leaky LMS
    /// step, sign-gradient leakage adaptation on |e|^2, divergence guard,
    /// frequency readout. Zero excitation leaves the state unchanged.
    pub fn step(&mut self, v_prev: Complex64, v_now: Complex64) {
        let p2 = v_prev.norm_sqr();
        if p2 <= f64::MIN_POSITIVE {
            return;
        }
        let e = v_now - self.weight * v_prev;
        self.weight =
            self.weight * (1.0 - self.mu * self.leak) + self.mu * v_prev.conj() * e / p2;

        let err_sq = e.norm_sqr();
        if err_sq > self.prev_err_sq {
            self.leak = (self.leak + self.params.leak_step).min(self.params.leak_max);
        } else {
            self.leak = (self.leak - self.params.leak_step).max(0.0);
        }
        self.prev_err_sq = err_sq;

        if self.weight.norm() > self.params.weight_guard {
            self.reset();
            return;
        }

        self.history[self.history_pos] = self.weight;
        self.history_pos = (self.history_pos + 1) % self.history.len();
        self.history_len = (self.history_len + 1).min(self.history.len());
        self.freq_estimate_hz = self.readout();
    }

    /// Restores the nominal weight and leakage after a divergence.
    pub fn reset(&mut self) {
        self.weight = self.nominal_weight;
        self.leak = self.params.leak_initial;
        self.prev_err_sq = 0.0;
        self.history.fill(self.nominal_weight);
        self.history_pos = 0;
        self.history_len = 0;
        self.freq_estimate_hz = self.readout();
    }

    /// Drives the tracker over consecutive pairs of an analytic signal and
    /// returns the final estimate.
    pub fn run(&mut self, signal: &AnalyticSignal) -> f64 {
        for pair in signal.values.windows(2) {
            self.step(pair[0], pair[1]);
        }
        self.freq_estimate_hz
    }

    /// Frequency from the cycle-averaged weight angle. The integer
    /// quadrature delay leaves a counter-rotating component of relative
    /// amplitude ~delta/2 in the analytic signal, which biases the raw
    /// angle by -(delta^2/4)*sin(2*omega); the readout adds that term back.
    fn readout(&self) -> f64 {
        let sum: Complex64 = if self.history_len == 0 {
            self.nominal_weight
        } else {
            self.history.iter().take(self.history_len).sum::<Complex64>()
                / self.history_len as f64
        };
        let omega_raw = sum.arg();
        let delta = self.quadrature_delay as f64 * omega_raw - PI / 2.0;
        let omega = omega_raw + (delta * delta / 4.0) * (2.0 * omega_raw).sin();
        omega * self.fs_hz / (2.0 * PI)
    }
}

/// Cycle window for the current frequency estimate: `round(fs/f)`, at
/// least 4 samples.
pub fn adapt_window(fs_hz: f64, freq_estimate_hz: f64) -> Result<usize> {
    if !(freq_estimate_hz > 0.0) {
        return Err(Error::InvalidInput(format!(
            "frequency estimate must be positive, got {freq_estimate_hz}"
        )));
    }
    if !(fs_hz > 0.0) {
        return Err(Error::InvalidInput("sampling rate must be positive".into()));
    }
    Ok(((fs_hz / freq_estimate_hz).round() as usize).max(4))
}

/// Runs the full quadrature + VL-LMS pipeline over a waveform and returns
/// the final frequency estimate.
pub fn estimate_frequency(w: &Waveform, nominal_freq_hz: f64, params: VllmsParams) -> Result<f64> {
    let analytic = make_analytic(w, nominal_freq_hz)?;
    if analytic.values.len() < 2 {
        return Err(Error::InsufficientData("need at least two analytic samples".into()));
    }
    let mut state = VllmsState::new(w.fs_hz, nominal_freq_hz, analytic.delay, params)?;
    Ok(state.run(&analytic))
}
