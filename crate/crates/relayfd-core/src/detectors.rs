//! The three comparison detectors: sample comparison (SC), phasor
//! comparison (PC) and the one-cycle moving sum (OCMS), plus the shared
//! consecutive-crossing decision rule and statistical threshold calibration.
//!
//! Every detector is a sequential state machine fed one sample at a time;
//! `update` returns `None` while the internal stencils or buffers are still
//! filling and the index value once defined. Feeding a record sample by
//! sample produces exactly the same series as batch processing.

use crate::error::{Error, Result};

/// Shared decision parameters for a detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    /// Samples per fundamental cycle (window size N).
    pub window_n: usize,
    /// Discrete angular frequency, radians per sample.
    pub omega: f64,
    /// Index threshold for the crossing rule.
    pub threshold: f64,
    /// Number of consecutive crossings required to declare a fault.
    pub consecutive_m: usize,
}

impl DetectorConfig {
    pub fn new(window_n: usize, omega: f64, threshold: f64, consecutive_m: usize) -> Result<Self> {
        if window_n < 2 {
            return Err(Error::InvalidInput(format!("window_n must be >= 2, got {window_n}")));
        }
        if !(omega > 0.0 && omega < std::f64::consts::PI) {
            return Err(Error::InvalidInput(format!(
                "omega must lie in (0, pi), got {omega}"
            )));
        }
        if !(threshold >= 0.0) {
            return Err(Error::InvalidInput("threshold must be >= 0".into()));
        }
        if consecutive_m < 1 {
            return Err(Error::InvalidInput("consecutive_m must be >= 1".into()));
        }
        Ok(Self { window_n, omega, threshold, consecutive_m })
    }

    /// Config for sampling rate `fs_hz` and fundamental `freq_hz` with the
    /// default 3-consecutive rule; threshold to be calibrated afterwards.
    pub fn for_frequency(fs_hz: f64, freq_hz: f64) -> Result<Self> {
        let n = (fs_hz / freq_hz).round() as usize;
        let omega = 2.0 * std::f64::consts::PI * freq_hz / fs_hz;
        Self::new(n, omega, 0.0, 3)
    }
}

/// Per-sample detector index values; `values[k]` is NaN for `k < first_valid_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexSeries {
    pub values: Vec<f64>,
    pub first_valid_k: usize,
}

impl IndexSeries {
    /// Collects the per-sample outputs of a streaming detector.
    pub fn from_stream<I: IntoIterator<Item = Option<f64>>>(stream: I) -> IndexSeries {
        let mut values = Vec::new();
        let mut first_valid_k = None;
        for (k, v) in stream.into_iter().enumerate() {
            match v {
                Some(x) => {
                    if first_valid_k.is_none() {
                        first_valid_k = Some(k);
                    }
                    values.push(x);
                }
                None => values.push(f64::NAN),
            }
        }
        IndexSeries { first_valid_k: first_valid_k.unwrap_or(values.len()), values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Valid (defined) index values from `first_valid_k` on.
    pub fn valid_values(&self) -> &[f64] {
        &self.values[self.first_valid_k.min(self.values.len())..]
    }
}

/// Outcome of the consecutive-crossing rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Verdict {
    pub detected: bool,
    /// Sample index at which the rule fired (the m-th consecutive crossing).
    pub detection_k: Option<usize>,
}

impl Verdict {
    pub fn none() -> Self {
        Verdict { detected: false, detection_k: None }
    }
}

/// A detector driven one sample at a time.
pub trait StreamingDetector {
    /// Feeds the next sample; returns the index value once defined.
    fn update(&mut self, sample: f64) -> Option<f64>;

    /// First sample index with a defined index value.
    fn first_valid_k(&self) -> usize;

    /// Runs the detector over a whole record.
    fn run(&mut self, samples: &[f64]) -> IndexSeries {
        IndexSeries::from_stream(samples.iter().map(|&x| self.update(x)))
    }
}

/// Sample comparison: `|i(k) - i(k-N)|`.
#[derive(Debug, Clone)]
pub struct SampleComparison {
    ring: Vec<f64>,
    n: usize,
    count: usize,
}

impl SampleComparison {
    pub fn new(window_n: usize) -> Self {
        Self { ring: vec![0.0; window_n], n: window_n, count: 0 }
    }
}

impl StreamingDetector for SampleComparison {
    fn update(&mut self, sample: f64) -> Option<f64> {
        let slot = self.count % self.n;
        let out = if self.count >= self.n {
            Some((sample - self.ring[slot]).abs())
        } else {
            None
        };
        self.ring[slot] = sample;
        self.count += 1;
        out
    }

    fn first_valid_k(&self) -> usize {
        self.n
    }
}

/// Peak estimator from central differences of a sampled sinusoid.
///
/// `I_m(k)^2 = (d2/(2 sin(omega/2))^2)^2 + (dc/sin(omega))^2` with
/// `dc = (i(k+1)-i(k-1))/2` and `d2 = i(k+1)-2 i(k)+i(k-1)`. The compensated
/// divisors make the estimate exact on a noiseless discrete sinusoid; the
/// centered stencil costs one sample of latency, so after feeding sample `k`
/// the freshest estimate refers to instant `k-1`.
#[derive(Debug, Clone)]
pub struct PeakEstimator {
    sin_omega: f64,
    four_sin2_half: f64,
    window: [f64; 3],
    count: usize,
}

impl PeakEstimator {
    pub fn new(omega: f64) -> Self {
        let s = (omega / 2.0).sin();
        Self {
            sin_omega: omega.sin(),
            four_sin2_half: 4.0 * s * s,
            window: [0.0; 3],
            count: 0,
        }
    }

    /// Feeds sample `k`; returns the estimate centered at `k-1` once three
    /// samples are available.
    pub fn update(&mut self, sample: f64) -> Option<f64> {
        self.window[0] = self.window[1];
        self.window[1] = self.window[2];
        self.window[2] = sample;
        self.count += 1;
        if self.count < 3 {
            return None;
        }
        let [prev, mid, next] = self.window;
        let dc = (next - prev) / 2.0;
        let d2 = next - 2.0 * mid + prev;
        let a = d2 / self.four_sin2_half;
        let b = dc / self.sin_omega;
        Some((a * a + b * b).sqrt())
    }
}

/// Phasor comparison: `|I_m(k) - I_m(k-3)|` on the derivative-based peak
/// estimates. Index at stream position `k` uses the freshest causal
/// estimates (centered at `k-1` and `k-4`); first defined at `k = 5`.
#[derive(Debug, Clone)]
pub struct PhasorComparison {
    estimator: PeakEstimator,
    estimates: [f64; 4],
    n_estimates: usize,
}

impl PhasorComparison {
    pub fn new(omega: f64) -> Self {
        Self { estimator: PeakEstimator::new(omega), estimates: [0.0; 4], n_estimates: 0 }
    }
}

impl StreamingDetector for PhasorComparison {
    fn update(&mut self, sample: f64) -> Option<f64> {
        let est = self.estimator.update(sample)?;
        self.estimates[0] = self.estimates[1];
        self.estimates[1] = self.estimates[2];
        self.estimates[2] = self.estimates[3];
        self.estimates[3] = est;
        self.n_estimates += 1;
        if self.n_estimates < 4 {
            return None;
        }
        Some((self.estimates[3] - self.estimates[0]).abs())
    }

    fn first_valid_k(&self) -> usize {
        5
    }
}

/// One-cycle moving sum: `|sum of the last N samples|`, maintained
/// recursively with one addition and one subtraction per step. The running
/// sum is compensated (Kahan) so the recursion tracks direct summation to
/// machine precision over long records.
#[derive(Debug, Clone)]
pub struct OneCycleMovingSum {
    ring: Vec<f64>,
    n: usize,
    count: usize,
    sum: f64,
    comp: f64,
}

impl OneCycleMovingSum {
    pub fn new(window_n: usize) -> Self {
        Self { ring: vec![0.0; window_n], n: window_n, count: 0, sum: 0.0, comp: 0.0 }
    }

    fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }
}

impl StreamingDetector for OneCycleMovingSum {
    fn update(&mut self, sample: f64) -> Option<f64> {
        let slot = self.count % self.n;
        self.add(sample);
        if self.count >= self.n {
            self.add(-self.ring[slot]);
        }
        self.ring[slot] = sample;
        self.count += 1;
        if self.count >= self.n {
            Some(self.sum.abs())
        } else {
            None
        }
    }

    fn first_valid_k(&self) -> usize {
        self.n - 1
    }
}

/// Applies the consecutive-crossing rule: detected at the first `k` whose
/// index exceeds the threshold at `k, k-1, ..., k-m+1`.
pub fn decide(indices: &IndexSeries, cfg: &DetectorConfig) -> Verdict {
    let mut streak = 0usize;
    for (k, &v) in indices.values.iter().enumerate().skip(indices.first_valid_k) {
        if v.is_nan() {
            streak = 0;
            continue;
        }
        if v > cfg.threshold {
            streak += 1;
            if streak >= cfg.consecutive_m {
                return Verdict { detected: true, detection_k: Some(k) };
            }
        } else {
            streak = 0;
        }
    }
    Verdict::none()
}

/// Mean and standard deviation of a calibration stretch (Welford).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationStats {
    pub mean: f64,
    pub stddev: f64,
    pub n: usize,
}

impl CalibrationStats {
    pub fn from_values(values: &[f64]) -> Result<CalibrationStats> {
        let mut n = 0usize;
        let mut mean = 0.0f64;
        let mut m2 = 0.0f64;
        for &v in values {
            if v.is_nan() {
                continue;
            }
            n += 1;
            let delta = v - mean;
            mean += delta / n as f64;
            m2 += delta * (v - mean);
        }
        if n == 0 {
            return Err(Error::InsufficientData("empty calibration window".into()));
        }
        // Population variance; single-value windows get stddev 0.
        let var = m2 / n as f64;
        Ok(CalibrationStats { mean, stddev: var.max(0.0).sqrt(), n })
    }

    pub fn threshold(&self, k_sigma: f64, floor: f64) -> f64 {
        (self.mean + k_sigma * self.stddev).max(floor)
    }
}

/// Statistical threshold: `mean + k_sigma * stddev` of pre-fault index
/// values, floored at an absolute minimum.
pub fn calibrate_threshold(prefault: &[f64], k_sigma: f64, floor: f64) -> Result<f64> {
    Ok(CalibrationStats::from_values(prefault)?.threshold(k_sigma, floor))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::generate_sinusoid;

    #[test]
    fn sc_zero_on_periodic_input() {
        let im = 2.5;
        let w = generate_sinusoid(im, 50.0, 0.9, 1000.0, 200).unwrap();
        let mut sc = SampleComparison::new(20);
        let series = sc.run(&w.samples);
        assert_eq!(series.first_valid_k, 20);
        for &v in series.valid_values() {
            assert!(v <= 1e-12 * im, "index {v}");
        }
    }

    #[test]
    fn sc_amplitude_step_closed_form() {
        // Doubling the amplitude at k0 makes the index I_m*|sin(k*omega+phi)|.
        let omega = 2.0 * std::f64::consts::PI * 50.0 / 1000.0;
        let (im, phi, k0) = (1.3, 0.4, 100usize);
        let samples: Vec<f64> = (0..160)
            .map(|k| {
                let a = if k >= k0 { 2.0 * im } else { im };
                a * (k as f64 * omega + phi).sin()
            })
            .collect();
        let mut sc = SampleComparison::new(20);
        let series = sc.run(&samples);
        // During the transition cycle one operand is pre-step, the other
        // post-step, so the difference is exactly the old sinusoid.
        for k in k0..k0 + 20 {
            let expect = im * (k as f64 * omega + phi).sin().abs();
            assert!((series.values[k] - expect).abs() < 1e-10, "k={k}");
        }
        // Once both operands are post-step the index collapses again.
        for k in k0 + 20..160 {
            assert!(series.values[k] < 1e-10, "k={k}");
        }
    }

    #[test]
    fn pc_exact_on_sinusoid() {
        for &amp in &[1.0, 2.5] {
            for phase_step in 0..8 {
                let phi = phase_step as f64 * std::f64::consts::PI / 4.0;
                let omega = 2.0 * std::f64::consts::PI * 50.0 / 1000.0;
                let w = generate_sinusoid(amp, 50.0, phi, 1000.0, 100).unwrap();
                let mut est = PeakEstimator::new(omega);
                for (k, &x) in w.samples.iter().enumerate() {
                    if let Some(e) = est.update(x) {
                        assert!(
                            (e - amp).abs() <= 1e-10 * amp,
                            "amp {amp} phi {phi} k {k}: estimate {e}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn pc_zero_signal() {
        let mut est = PeakEstimator::new(0.3);
        let mut last = None;
        for _ in 0..10 {
            last = est.update(0.0);
        }
        assert_eq!(last, Some(0.0));
    }

    #[test]
    fn pc_index_steady_zero_and_step_response() {
        let omega = 2.0 * std::f64::consts::PI * 50.0 / 1000.0;
        let im = 1.7;
        let r = 3.0;
        let k0 = 80usize;
        let samples: Vec<f64> = (0..140)
            .map(|k| {
                let a = if k >= k0 { r * im } else { im };
                a * (k as f64 * omega).sin()
            })
            .collect();
        let mut pc = PhasorComparison::new(omega);
        let series = pc.run(&samples);
        assert_eq!(series.first_valid_k, 5);
        for k in 5..k0 {
            assert!(series.values[k] < 1e-10, "steady region k={k}: {}", series.values[k]);
        }
        // Once both estimates straddle the step, the index reaches (r-1)*I_m.
        let target = (r - 1.0) * im;
        let reached = (k0..k0 + 5).any(|k| (series.values[k] - target).abs() < 1e-8);
        assert!(reached, "step response never reached {target}");
    }

    #[test]
    fn ocms_zero_on_full_cycle() {
        let w = generate_sinusoid(3.0, 50.0, 1.1, 1000.0, 200).unwrap();
        let mut ocms = OneCycleMovingSum::new(20);
        let series = ocms.run(&w.samples);
        assert_eq!(series.first_valid_k, 19);
        for &v in series.valid_values() {
            assert!(v <= 1e-10 * 3.0, "index {v}");
        }
    }

    #[test]
    fn ocms_constant_offset() {
        let c = 0.37;
        let w = generate_sinusoid(1.0, 50.0, 0.0, 1000.0, 120).unwrap();
        let samples: Vec<f64> = w.samples.iter().map(|x| x + c).collect();
        let mut ocms = OneCycleMovingSum::new(20);
        let series = ocms.run(&samples);
        for &v in series.valid_values() {
            assert!((v - 20.0 * c).abs() < 1e-9, "index {v} vs {}", 20.0 * c);
        }
    }

    #[test]
    fn ocms_recursive_matches_direct() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let samples: Vec<f64> = (0..5000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = 20;
        let mut ocms = OneCycleMovingSum::new(n);
        for (k, &x) in samples.iter().enumerate() {
            if let Some(v) = ocms.update(x) {
                let direct: f64 = samples[k + 1 - n..=k].iter().sum();
                assert!(
                    (v - direct.abs()).abs() <= 1e-9 * (1.0 + direct.abs()),
                    "k={k}: recursive {v} direct {}",
                    direct.abs()
                );
            }
        }
    }

    #[test]
    fn decide_rule_examples() {
        let t = 1.0;
        let cfg = DetectorConfig::new(2, 0.3, t, 3).unwrap();
        let series = IndexSeries {
            values: vec![0.0, 0.0, t + 0.1, t + 0.1, t + 0.1],
            first_valid_k: 0,
        };
        assert_eq!(decide(&series, &cfg), Verdict { detected: true, detection_k: Some(4) });

        // Two crossings then a dip, repeated: never detected.
        let series = IndexSeries {
            values: vec![t + 0.1, t + 0.1, 0.0, t + 0.1, t + 0.1, 0.0, t + 0.1, t + 0.1],
            first_valid_k: 0,
        };
        assert_eq!(decide(&series, &cfg), Verdict::none());

        // All below threshold.
        let series = IndexSeries { values: vec![0.2; 10], first_valid_k: 0 };
        assert_eq!(decide(&series, &cfg), Verdict::none());
    }

    #[test]
    fn decide_respects_warmup() {
        let cfg = DetectorConfig::new(2, 0.3, 0.5, 3).unwrap();
        // Crossings inside the warm-up region must not count.
        let series = IndexSeries {
            values: vec![9.0, 9.0, 9.0, 0.0, 0.0, 0.0],
            first_valid_k: 3,
        };
        assert_eq!(decide(&series, &cfg), Verdict::none());
    }

    #[test]
    fn calibrate_floor_and_constant() {
        // All-zero pre-fault indices: floor applies.
        assert_eq!(calibrate_threshold(&[0.0; 50], 6.0, 1e-6).unwrap(), 1e-6);
        // Constant index c with zero stddev: threshold = c.
        let c = 0.42;
        assert_eq!(calibrate_threshold(&vec![c; 50], 6.0, 1e-6).unwrap(), c);
        // Empty window rejected.
        assert!(calibrate_threshold(&[], 6.0, 1e-6).is_err());
        assert!(calibrate_threshold(&[f64::NAN; 4], 6.0, 1e-6).is_err());
    }

    #[test]
    fn calibrate_matches_two_pass_oracle() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let dist = Normal::new(3.0, 0.7).unwrap();
        let values: Vec<f64> = (0..2000).map(|_| dist.sample(&mut rng)).collect();
        let t = calibrate_threshold(&values, 6.0, 0.0).unwrap();
        // Independent two-pass computation.
        let mean: f64 = values.iter().sum::<f64>() / values.len() as f64;
        let var: f64 =
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
        let oracle = mean + 6.0 * var.sqrt();
        assert!((t - oracle).abs() <= 0.01 * oracle, "welford {t} vs two-pass {oracle}");
    }
}
