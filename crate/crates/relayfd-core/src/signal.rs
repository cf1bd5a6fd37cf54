//! Synthetic test-signal generation and waveform file I/O.
//!
//! A scenario is described declaratively by [`ScenarioSpec`]: a base
//! sinusoid, a fault inception instant at which the amplitude steps and the
//! phase jumps, an optional decaying DC component, integer harmonics and
//! calibrated white Gaussian noise. [`synthesize`] renders the spec into a
//! [`Waveform`] deterministically for a given seed.

use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Uniformly sampled current signal with sampling-rate metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    /// Current samples (amperes or per-unit).
    pub samples: Vec<f64>,
    /// Sampling rate in Hz.
    pub fs_hz: f64,
    /// Absolute time of sample 0 in seconds.
    pub t0_s: f64,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, fs_hz: f64, t0_s: f64) -> Result<Self> {
        if !(fs_hz > 0.0) {
            return Err(Error::InvalidInput(format!(
                "sampling rate must be positive, got {fs_hz}"
            )));
        }
        if samples.is_empty() {
            return Err(Error::InvalidInput("waveform must hold at least one sample".into()));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("waveform samples must be finite".into()));
        }
        Ok(Self { samples, fs_hz, t0_s })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Time of sample `k` in seconds.
    pub fn time_at(&self, k: usize) -> f64 {
        self.t0_s + k as f64 / self.fs_hz
    }

    /// Sub-waveform over samples `[start, end)`, keeping the time origin consistent.
    pub fn slice(&self, start: usize, end: usize) -> Result<Waveform> {
        if start >= end || end > self.samples.len() {
            return Err(Error::InvalidInput(format!(
                "invalid slice [{start}, {end}) of waveform with {} samples",
                self.samples.len()
            )));
        }
        Waveform::new(self.samples[start..end].to_vec(), self.fs_hz, self.time_at(start))
    }

    /// Writes the waveform as CSV with header `k,t_s,i`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "k,t_s,i")?;
        for (k, x) in self.samples.iter().enumerate() {
            writeln!(out, "{k},{},{x}", self.time_at(k))?;
        }
        Ok(())
    }

    pub fn save_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Reads a waveform from `k,t_s,i` CSV. The sampling rate is inferred
    /// from the first two time stamps unless `fs_hz` is given.
    pub fn read_csv<R: std::io::Read>(reader: R, fs_hz: Option<f64>) -> Result<Waveform> {
        let reader = BufReader::new(reader);
        let mut times = Vec::new();
        let mut samples = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if lineno == 0 {
                let header: Vec<&str> = line.split(',').map(str::trim).collect();
                if header != ["k", "t_s", "i"] {
                    return Err(Error::Parse(format!(
                        "expected header 'k,t_s,i', got '{line}'"
                    )));
                }
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::Parse(format!(
                    "line {}: expected 3 fields, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let t: f64 = fields[1]
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: bad t_s: {e}", lineno + 1)))?;
            let x: f64 = fields[2]
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: bad i: {e}", lineno + 1)))?;
            times.push(t);
            samples.push(x);
        }
        if samples.is_empty() {
            return Err(Error::Parse("waveform CSV holds no samples".into()));
        }
        let fs = match fs_hz {
            Some(fs) => fs,
            None => {
                if times.len() < 2 {
                    return Err(Error::Parse(
                        "cannot infer sampling rate from a single sample; pass fs explicitly".into(),
                    ));
                }
                let dt = times[1] - times[0];
                if !(dt > 0.0) {
                    return Err(Error::Parse("non-increasing time stamps".into()));
                }
                1.0 / dt
            }
        };
        Waveform::new(samples, fs, times[0])
    }

    pub fn load_csv<P: AsRef<Path>>(path: P, fs_hz: Option<f64>) -> Result<Waveform> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(file, fs_hz)
    }
}

/// One integer harmonic of the fundamental: `amplitude` is relative to the
/// fundamental peak, `order >= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub order: u32,
    pub amplitude: f64,
    #[serde(default)]
    pub phase_rad: f64,
}

/// Declarative description of a test condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    /// Pre-fault peak amplitude (per unit).
    pub amplitude_pu: f64,
    /// System frequency in Hz.
    pub freq_hz: f64,
    /// Phase angle of the fundamental at sample 0, radians.
    pub phase_rad: f64,
    /// Sampling rate in Hz.
    pub fs_hz: f64,
    /// Record length in seconds.
    pub duration_s: f64,
    /// Fault inception instant in seconds from the record start.
    pub fault_time_s: f64,
    /// Post-fault peak divided by pre-fault peak.
    pub fault_amplitude_ratio: f64,
    /// Phase jump applied to the fundamental at inception, radians.
    pub fault_phase_jump_rad: f64,
    /// Initial magnitude of the decaying DC component added at inception.
    pub dc_offset_pu: f64,
    /// Time constant of the DC decay, seconds.
    pub dc_tau_s: f64,
    /// Integer harmonics present throughout the record.
    #[serde(default)]
    pub harmonic_spec: Vec<Harmonic>,
    /// White Gaussian noise level; `None` means noiseless.
    #[serde(default)]
    pub snr_db: Option<f64>,
    /// Seed for the noise generator.
    #[serde(default)]
    pub rng_seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        // Canonical R-L short-circuit shape: amplitude step x5, -pi/4 phase
        // jump, 0.8 pu DC decaying with tau = 30 ms.
        Self {
            amplitude_pu: 1.0,
            freq_hz: 50.0,
            phase_rad: 0.0,
            fs_hz: 1000.0,
            duration_s: 0.2,
            fault_time_s: 0.065,
            fault_amplitude_ratio: 5.0,
            fault_phase_jump_rad: -PI / 4.0,
            dc_offset_pu: 0.8,
            dc_tau_s: 0.03,
            harmonic_spec: Vec::new(),
            snr_db: None,
            rng_seed: 0,
        }
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.fs_hz > 0.0) {
            return Err(Error::InvalidInput("fs_hz must be positive".into()));
        }
        if self.fs_hz <= 2.0 * self.freq_hz {
            return Err(Error::Aliasing { fs_hz: self.fs_hz, freq_hz: self.freq_hz });
        }
        if !(self.duration_s > 0.0) {
            return Err(Error::InvalidInput("duration_s must be positive".into()));
        }
        if !(self.fault_time_s >= 0.0 && self.fault_time_s < self.duration_s) {
            return Err(Error::InvalidInput(format!(
                "fault_time_s must lie in [0, duration_s), got {}",
                self.fault_time_s
            )));
        }
        if !(self.fault_amplitude_ratio > 0.0) {
            return Err(Error::InvalidInput("fault_amplitude_ratio must be positive".into()));
        }
        if !(self.dc_tau_s > 0.0) && self.dc_offset_pu != 0.0 {
            return Err(Error::InvalidInput("dc_tau_s must be positive when dc_offset_pu != 0".into()));
        }
        for h in &self.harmonic_spec {
            if h.order < 2 {
                return Err(Error::InvalidInput(format!(
                    "harmonic orders must be >= 2, got {}",
                    h.order
                )));
            }
            let f_h = h.order as f64 * self.freq_hz;
            if self.fs_hz <= 2.0 * f_h {
                return Err(Error::Aliasing { fs_hz: self.fs_hz, freq_hz: f_h });
            }
        }
        Ok(())
    }

    /// Number of samples in the rendered record.
    pub fn n_samples(&self) -> usize {
        (self.duration_s * self.fs_hz).round() as usize
    }

    /// Sample index of fault inception: `round(fault_time_s * fs_hz)`.
    pub fn fault_k(&self) -> usize {
        (self.fault_time_s * self.fs_hz).round() as usize
    }

    /// Nominal samples per cycle, `fs / f` rounded.
    pub fn samples_per_cycle(&self) -> usize {
        (self.fs_hz / self.freq_hz).round() as usize
    }

    pub fn load_toml<P: AsRef<Path>>(path: P) -> Result<ScenarioSpec> {
        let text = std::fs::read_to_string(path)?;
        let spec: ScenarioSpec =
            toml::from_str(&text).map_err(|e| Error::Parse(format!("scenario file: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn save_toml<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| Error::Parse(format!("scenario serialization: {e}")))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    /// The same scenario with every stochastic and fault component removed:
    /// fundamental and harmonics only. Used to derive detector thresholds
    /// under nominal (no-fault, no-noise) conditions.
    pub fn steady_rendition(&self) -> ScenarioSpec {
        ScenarioSpec {
            fault_amplitude_ratio: 1.0,
            fault_phase_jump_rad: 0.0,
            dc_offset_pu: 0.0,
            snr_db: None,
            ..self.clone()
        }
    }
}

/// Samples `amplitude * sin(k*omega + phase)` with `omega = 2*pi*f/fs`.
pub fn generate_sinusoid(
    amplitude: f64,
    freq_hz: f64,
    phase_rad: f64,
    fs_hz: f64,
    n_samples: usize,
) -> Result<Waveform> {
    if fs_hz <= 2.0 * freq_hz {
        return Err(Error::Aliasing { fs_hz, freq_hz });
    }
    if n_samples == 0 {
        return Err(Error::InvalidInput("n_samples must be >= 1".into()));
    }
    let omega = 2.0 * PI * freq_hz / fs_hz;
    let samples = (0..n_samples)
        .map(|k| amplitude * (k as f64 * omega + phase_rad).sin())
        .collect();
    Waveform::new(samples, fs_hz, 0.0)
}

/// Adds integer harmonics of the given fundamental to a waveform:
/// `out(k) = in(k) + sum_h a_h * I_m * sin(h*(k*omega + phi) + phase_h)`.
pub fn add_harmonics(
    w: &Waveform,
    fundamental_amplitude: f64,
    freq_hz: f64,
    phase_rad: f64,
    harmonics: &[Harmonic],
) -> Result<Waveform> {
    for h in harmonics {
        if h.order < 2 {
            return Err(Error::InvalidInput(format!(
                "harmonic orders must be >= 2, got {}",
                h.order
            )));
        }
    }
    let omega = 2.0 * PI * freq_hz / w.fs_hz;
    let samples = w
        .samples
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let theta = k as f64 * omega + phase_rad;
            let extra: f64 = harmonics
                .iter()
                .map(|h| {
                    h.amplitude
                        * fundamental_amplitude
                        * (h.order as f64 * theta + h.phase_rad).sin()
                })
                .sum();
            x + extra
        })
        .collect();
    Waveform::new(samples, w.fs_hz, w.t0_s)
}

/// Renders a scenario into a waveform. Deterministic for a given
/// `spec.rng_seed`; the noise sequence does not depend on the fault
/// parameters, so samples before inception are identical across fault
/// variants of the same spec.
pub fn synthesize(spec: &ScenarioSpec) -> Result<Waveform> {
    spec.validate()?;
    let n = spec.n_samples();
    if n == 0 {
        return Err(Error::InvalidInput("duration too short for one sample".into()));
    }
    let omega = 2.0 * PI * spec.freq_hz / spec.fs_hz;
    let fault_k = spec.fault_k();

    let mut samples = Vec::with_capacity(n);
    for k in 0..n {
        let theta = k as f64 * omega + spec.phase_rad;
        let fundamental = if k < fault_k {
            spec.amplitude_pu * theta.sin()
        } else {
            spec.amplitude_pu * spec.fault_amplitude_ratio * (theta + spec.fault_phase_jump_rad).sin()
        };
        let harmonics: f64 = spec
            .harmonic_spec
            .iter()
            .map(|h| h.amplitude * spec.amplitude_pu * (h.order as f64 * theta + h.phase_rad).sin())
            .sum();
        let dc = if k >= fault_k && spec.dc_offset_pu != 0.0 {
            let dt = (k as f64 / spec.fs_hz) - spec.fault_time_s;
            spec.dc_offset_pu * (-dt / spec.dc_tau_s).exp()
        } else {
            0.0
        };
        samples.push(fundamental + harmonics + dc);
    }

    if let Some(snr_db) = spec.snr_db {
        // SNR is measured against the pre-fault fundamental power I_m^2/2.
        let signal_power = spec.amplitude_pu * spec.amplitude_pu / 2.0;
        let noise_power = signal_power * 10f64.powf(-snr_db / 10.0);
        let sigma = noise_power.sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
        for x in samples.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *x += sigma * z;
        }
    }

    Waveform::new(samples, spec.fs_hz, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn goertzel_peak(samples: &[f64], freq_hz: f64, fs_hz: f64) -> f64 {
        // Single-bin DFT magnitude, normalized to peak amplitude.
        let n = samples.len() as f64;
        let omega = 2.0 * PI * freq_hz / fs_hz;
        let (mut re, mut im) = (0.0, 0.0);
        for (k, &x) in samples.iter().enumerate() {
            let th = omega * k as f64;
            re += x * th.cos();
            im -= x * th.sin();
        }
        2.0 * (re * re + im * im).sqrt() / n
    }

    #[test]
    fn sinusoid_known_samples() {
        let w = generate_sinusoid(1.0, 50.0, 0.0, 1000.0, 40).unwrap();
        // k=5: sin(5*pi/10) = sin(pi/2) = 1
        assert!((w.samples[5] - 1.0).abs() < 1e-12);
        assert!(w.samples[0].abs() < 1e-12);
    }

    #[test]
    fn sinusoid_zero_amplitude() {
        let w = generate_sinusoid(0.0, 50.0, 1.2, 1000.0, 100).unwrap();
        assert!(w.samples.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn sinusoid_periodicity_n20() {
        let w = generate_sinusoid(2.5, 50.0, 0.7, 1000.0, 200).unwrap();
        for k in 0..180 {
            assert!(
                (w.samples[k] - w.samples[k + 20]).abs() <= 1e-12 * 2.5,
                "period mismatch at k={k}"
            );
        }
    }

    #[test]
    fn sinusoid_rejects_aliasing() {
        assert!(matches!(
            generate_sinusoid(1.0, 600.0, 0.0, 1000.0, 10),
            Err(Error::Aliasing { .. })
        ));
        assert!(matches!(
            generate_sinusoid(1.0, 500.0, 0.0, 1000.0, 10),
            Err(Error::Aliasing { .. })
        ));
    }

    #[test]
    fn synthesize_identity_without_modifiers() {
        let spec = ScenarioSpec {
            fault_amplitude_ratio: 1.0,
            fault_phase_jump_rad: 0.0,
            dc_offset_pu: 0.0,
            ..ScenarioSpec::default()
        };
        let w = synthesize(&spec).unwrap();
        let base = generate_sinusoid(
            spec.amplitude_pu,
            spec.freq_hz,
            spec.phase_rad,
            spec.fs_hz,
            spec.n_samples(),
        )
        .unwrap();
        assert_eq!(w.samples, base.samples);
    }

    #[test]
    fn synthesize_first_changed_sample_is_65() {
        let spec = ScenarioSpec::default();
        let faulted = synthesize(&spec).unwrap();
        let clean = synthesize(&spec.steady_rendition()).unwrap();
        let first_diff = faulted
            .samples
            .iter()
            .zip(&clean.samples)
            .position(|(a, b)| a != b)
            .unwrap();
        assert_eq!(first_diff, 65);
        assert_eq!(spec.fault_k(), 65);
    }

    #[test]
    fn synthesize_snr_contract() {
        // Empirical pre-fault SNR within +/-0.5 dB over >= 10 cycles.
        for seed in [1u64, 7, 42] {
            let spec = ScenarioSpec {
                duration_s: 1.0,
                fault_time_s: 0.8, // 40 pre-fault cycles
                snr_db: Some(20.0),
                rng_seed: seed,
                ..ScenarioSpec::default()
            };
            let noisy = synthesize(&spec).unwrap();
            let clean = synthesize(&ScenarioSpec { snr_db: None, ..spec.clone() }).unwrap();
            let pre = spec.fault_k();
            let noise_power: f64 = (0..pre)
                .map(|k| (noisy.samples[k] - clean.samples[k]).powi(2))
                .sum::<f64>()
                / pre as f64;
            let signal_power = spec.amplitude_pu * spec.amplitude_pu / 2.0;
            let snr = 10.0 * (signal_power / noise_power).log10();
            assert!((snr - 20.0).abs() < 0.5, "seed {seed}: measured SNR {snr}");
        }
    }

    #[test]
    fn synthesize_deterministic() {
        let spec = ScenarioSpec { snr_db: Some(20.0), rng_seed: 9, ..ScenarioSpec::default() };
        let a = synthesize(&spec).unwrap();
        let b = synthesize(&spec).unwrap();
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn synthesize_fault_locality() {
        // Samples strictly before inception are unaffected by fault parameters.
        let base = ScenarioSpec { snr_db: Some(25.0), rng_seed: 3, ..ScenarioSpec::default() };
        let variant = ScenarioSpec {
            fault_amplitude_ratio: 2.0,
            fault_phase_jump_rad: 1.0,
            dc_offset_pu: 0.3,
            ..base.clone()
        };
        let a = synthesize(&base).unwrap();
        let b = synthesize(&variant).unwrap();
        let fault_k = base.fault_k();
        assert_eq!(&a.samples[..fault_k], &b.samples[..fault_k]);
        assert_ne!(a.samples[fault_k], b.samples[fault_k]);
    }

    #[test]
    fn harmonics_empty_list_unchanged() {
        let w = generate_sinusoid(1.0, 50.0, 0.3, 1000.0, 100).unwrap();
        let out = add_harmonics(&w, 1.0, 50.0, 0.3, &[]).unwrap();
        assert_eq!(w.samples, out.samples);
    }

    #[test]
    fn harmonics_spectrum_ratio() {
        // 10% third harmonic shows up at 150 Hz with ratio 0.10 +/- 0.005.
        let w = generate_sinusoid(1.0, 50.0, 0.0, 1000.0, 1000).unwrap();
        let h = [Harmonic { order: 3, amplitude: 0.10, phase_rad: 0.0 }];
        let out = add_harmonics(&w, 1.0, 50.0, 0.0, &h).unwrap();
        let fund = goertzel_peak(&out.samples, 50.0, 1000.0);
        let third = goertzel_peak(&out.samples, 150.0, 1000.0);
        assert!((third / fund - 0.10).abs() < 0.005, "ratio {}", third / fund);
    }

    #[test]
    fn harmonics_full_cycle_sum_is_zero() {
        let w = generate_sinusoid(1.0, 50.0, 0.4, 1000.0, 20).unwrap();
        let h = [
            Harmonic { order: 3, amplitude: 0.1, phase_rad: 0.7 },
            Harmonic { order: 5, amplitude: 0.05, phase_rad: 0.0 },
        ];
        let out = add_harmonics(&w, 1.0, 50.0, 0.4, &h).unwrap();
        let s: f64 = out.samples.iter().sum();
        assert!(s.abs() < 1e-10, "full-cycle sum {s}");
    }

    #[test]
    fn harmonics_reject_low_order() {
        let w = generate_sinusoid(1.0, 50.0, 0.0, 1000.0, 10).unwrap();
        let h = [Harmonic { order: 1, amplitude: 0.1, phase_rad: 0.0 }];
        assert!(add_harmonics(&w, 1.0, 50.0, 0.0, &h).is_err());
    }

    #[test]
    fn scenario_validation() {
        let mut spec = ScenarioSpec::default();
        spec.fault_time_s = 0.3; // beyond duration
        assert!(spec.validate().is_err());
        let mut spec = ScenarioSpec::default();
        spec.harmonic_spec.push(Harmonic { order: 11, amplitude: 0.1, phase_rad: 0.0 });
        // 550 Hz > Nyquist at 1 kHz
        assert!(spec.validate().is_err());
    }

    #[test]
    fn waveform_csv_round_trip() {
        let spec = ScenarioSpec { snr_db: Some(30.0), rng_seed: 5, ..ScenarioSpec::default() };
        let w = synthesize(&spec).unwrap();
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        let back = Waveform::read_csv(buf.as_slice(), None).unwrap();
        assert_eq!(w.samples, back.samples);
        assert!((back.fs_hz - 1000.0).abs() < 1e-6);
    }

    #[test]
    fn scenario_toml_round_trip() {
        let dir = std::env::temp_dir().join("relayfd_spec_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("spec.toml");
        let spec = ScenarioSpec {
            snr_db: Some(20.0),
            harmonic_spec: vec![Harmonic { order: 3, amplitude: 0.1, phase_rad: 0.2 }],
            ..ScenarioSpec::default()
        };
        spec.save_toml(&path).unwrap();
        let back = ScenarioSpec::load_toml(&path).unwrap();
        assert_eq!(spec, back);
    }
}
