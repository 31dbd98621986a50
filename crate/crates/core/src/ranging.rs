//! Zadoff-Chu reference signals and time-of-flight estimation by upsampled
//! circular cross-correlation.
//!
//! The received sequence is correlated against the known one in the frequency
//! domain. Upsampling by `K` is done by zero-padding the cross spectrum before
//! the inverse transform, which is band-limited interpolation of the
//! correlation, so the peak can be located on a grid `K` times finer than the
//! sample clock.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::channel::SPEED_OF_LIGHT;
use crate::error::{param, shape, Error, Result};
use crate::par::{self, Exec};

/// A Zadoff-Chu sequence of odd length with cyclic shift 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ZcSequence {
    pub root_q: usize,
    pub n_zc: usize,
    pub samples: Vec<Complex64>,
}

impl ZcSequence {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// True when the root is coprime with the length, which is what the
    /// ideal periodic autocorrelation needs.
    pub fn is_cazac(&self) -> bool {
        gcd(self.root_q, self.n_zc) == 1
    }
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `x_q(n) = exp(-j 2 pi q (n(n+1)/2) / N)` for `n = 0..N`.
pub fn gen_zc(root_q: usize, n_zc: usize) -> Result<ZcSequence> {
    if n_zc == 0 || n_zc % 2 == 0 {
        return Err(param(format!("ZC length must be odd, got {n_zc}")));
    }
    if root_q == 0 || root_q >= n_zc {
        return Err(param(format!("ZC root must be in 1..{n_zc}, got {root_q}")));
    }
    let n_u = n_zc as u128;
    let samples = (0..n_zc as u128)
        .map(|n| {
            // exact phase index keeps long sequences accurate
            let k = (root_q as u128 * ((n * (n + 1) / 2) % n_u)) % n_u;
            Complex64::from_polar(1.0, -TAU * k as f64 / n_zc as f64)
        })
        .collect();
    Ok(ZcSequence { root_q, n_zc, samples })
}

/// Periodic autocorrelation `sum_n x(n) conj(x((n + lag) mod N))`.
pub fn circ_autocorr(seq: &ZcSequence, lag: usize) -> Complex64 {
    let n = seq.len();
    (0..n).map(|i| seq.samples[i] * seq.samples[(i + lag) % n].conj()).sum()
}

/// Direct O(N^2) circular cross-correlation
/// `c(m) = sum_n received((n + m) mod N) conj(known(n))`.
/// A copy of `known` delayed by `d` peaks at `m = d`.
pub fn circ_xcorr_direct(known: &[Complex64], received: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = known.len();
    if received.len() != n {
        return Err(shape(format!("known has {n} samples, received {}", received.len())));
    }
    Ok((0..n)
        .map(|m| (0..n).map(|i| received[(i + m) % n] * known[i].conj()).sum())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RangingConfig {
    /// Base-band sampling rate, Hz.
    pub sample_rate_hz: f64,
    pub upsample_k: usize,
    pub n_zc: usize,
    pub root_q: usize,
}

impl Default for RangingConfig {
    fn default() -> Self {
        Self { sample_rate_hz: 30.72e6, upsample_k: 4, n_zc: 839, root_q: 34 }
    }
}

impl RangingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.upsample_k < 1 {
            return Err(param("upsample_k must be >= 1"));
        }
        if !(self.sample_rate_hz > 0.0) {
            return Err(param("sample_rate_hz must be > 0"));
        }
        Ok(())
    }

    /// Length of one base-rate sample, meters.
    pub fn meters_per_sample(&self) -> f64 {
        SPEED_OF_LIGHT / self.sample_rate_hz
    }
}

/// Range quantum of the upsampled correlation, `c / (fs K)`.
pub fn range_resolution(cfg: &RangingConfig) -> f64 {
    SPEED_OF_LIGHT / (cfg.sample_rate_hz * cfg.upsample_k as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToFEstimate {
    /// Fractional delay in base-rate samples.
    pub delay_samples: f64,
    pub delay_seconds: f64,
    pub range_meters: f64,
    pub peak_magnitude: f64,
    /// Peak magnitude over the largest magnitude outside the main lobe.
    pub peak_to_sidelobe: f64,
}

/// Reusable FFT plans for one `(N, K)` pair.
pub struct Correlator {
    n: usize,
    k: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse_base: Arc<dyn Fft<f64>>,
    inverse_up: Arc<dyn Fft<f64>>,
}

impl Correlator {
    pub fn new(n: usize, k: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            k,
            forward: planner.plan_fft_forward(n),
            inverse_base: planner.plan_fft_inverse(n),
            inverse_up: planner.plan_fft_inverse(n * k),
        }
    }

    fn cross_spectrum(&self, known: &[Complex64], received: &[Complex64]) -> Result<Vec<Complex64>> {
        if known.len() != self.n || received.len() != self.n {
            return Err(shape(format!(
                "expected {} samples, got known={} received={}",
                self.n,
                known.len(),
                received.len()
            )));
        }
        let mut x = known.to_vec();
        let mut y = received.to_vec();
        self.forward.process(&mut x);
        self.forward.process(&mut y);
        Ok(y.iter().zip(&x).map(|(y, x)| y * x.conj()).collect())
    }

    /// Base-rate circular cross-correlation via the DFT, same convention as
    /// [`circ_xcorr_direct`].
    pub fn xcorr(&self, known: &[Complex64], received: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut c = self.cross_spectrum(known, received)?;
        self.inverse_base.process(&mut c);
        let scale = 1.0 / self.n as f64;
        c.iter_mut().for_each(|v| *v *= scale);
        Ok(c)
    }

    /// `K N`-point band-limited interpolation of the correlation. Entry `K m`
    /// equals the base-rate value at lag `m`.
    pub fn xcorr_upsampled(&self, known: &[Complex64], received: &[Complex64]) -> Result<Vec<Complex64>> {
        let spec = self.cross_spectrum(known, received)?;
        let total = self.n * self.k;
        let mut padded = vec![Complex64::new(0.0, 0.0); total];
        // non-negative frequencies 0..=half stay at the front, negative ones
        // move to the tail; N is odd so there is no Nyquist bin to split
        let half = self.n / 2;
        padded[..=half].copy_from_slice(&spec[..=half]);
        let neg = self.n - half - 1;
        padded[total - neg..].copy_from_slice(&spec[half + 1..]);
        if self.n % 2 == 0 {
            // even lengths: split the Nyquist bin evenly between both sides
            let nyq = spec[half] * 0.5;
            padded[half] = nyq;
            padded[total - half] = nyq;
        }
        self.inverse_up.process(&mut padded);
        let scale = 1.0 / self.n as f64;
        padded.iter_mut().for_each(|v| *v *= scale);
        Ok(padded)
    }

    /// Locates the correlation peak and converts it into a delay estimate.
    pub fn estimate(&self, known: &[Complex64], received: &[Complex64], cfg: &RangingConfig) -> Result<ToFEstimate> {
        if received.iter().all(|v| v.norm_sqr() == 0.0) {
            return Err(Error::NoPeak("received signal is all zeros".into()));
        }
        let corr = self.xcorr_upsampled(known, received)?;
        let mags: Vec<f64> = corr.iter().map(|c| c.norm()).collect();
        let (peak_idx, peak) = mags
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, m)| if m > best.1 { (i, m) } else { best });
        if !(peak > 0.0) || !peak.is_finite() {
            return Err(Error::NoPeak("correlation has no finite positive peak".into()));
        }
        let total = mags.len();
        let lobe = self.k;
        let sidelobe = mags
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let d = i.abs_diff(peak_idx);
                d.min(total - d) > lobe
            })
            .map(|(_, m)| *m)
            .fold(0.0, f64::max);
        let mut delay = peak_idx as f64 / self.k as f64;
        if delay > self.n as f64 / 2.0 {
            // a peak just before lag 0 is a slightly early arrival
            delay = (delay - self.n as f64).max(0.0);
        }
        let delay_seconds = delay / cfg.sample_rate_hz;
        Ok(ToFEstimate {
            delay_samples: delay,
            delay_seconds,
            range_meters: SPEED_OF_LIGHT * delay_seconds,
            peak_magnitude: peak,
            peak_to_sidelobe: if sidelobe > 0.0 { peak / sidelobe } else { f64::INFINITY },
        })
    }
}

/// Estimates the delay of `received` relative to `known`.
pub fn estimate_tof(known: &ZcSequence, received: &[Complex64], cfg: &RangingConfig) -> Result<ToFEstimate> {
    cfg.validate()?;
    Correlator::new(known.len(), cfg.upsample_k).estimate(&known.samples, received, cfg)
}

/// Batch estimation; one plan set per worker call, results in input order.
pub fn estimate_tof_batch(
    known: &ZcSequence,
    received: &[Vec<Complex64>],
    cfg: &RangingConfig,
    exec: Exec,
) -> Result<Vec<ToFEstimate>> {
    cfg.validate()?;
    let corr = Correlator::new(known.len(), cfg.upsample_k);
    par::try_map_indexed(exec, received.len(), |i| corr.estimate(&known.samples, &received[i], cfg))
}

/// Circularly delays `signal` by a possibly fractional number of samples with
/// a linear phase ramp in the frequency domain.
pub fn delay_signal(signal: &[Complex64], delay_samples: f64) -> Vec<Complex64> {
    let n = signal.len();
    let mut planner = FftPlanner::new();
    let mut spec = signal.to_vec();
    planner.plan_fft_forward(n).process(&mut spec);
    for (k, v) in spec.iter_mut().enumerate() {
        let signed = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        *v *= Complex64::from_polar(1.0, -TAU * signed * delay_samples / n as f64);
    }
    planner.plan_fft_inverse(n).process(&mut spec);
    let scale = 1.0 / n as f64;
    spec.iter_mut().for_each(|v| *v *= scale);
    spec
}

/// Adds circular complex Gaussian noise so that signal power over noise power
/// equals `snr_db`.
pub fn add_awgn<R: Rng + ?Sized>(signal: &[Complex64], snr_db: f64, rng: &mut R) -> Vec<Complex64> {
    let p_sig = signal.iter().map(|v| v.norm_sqr()).sum::<f64>() / signal.len() as f64;
    let p_noise = p_sig / 10f64.powf(snr_db / 10.0);
    let sd = (p_noise / 2.0).sqrt();
    if !(sd > 0.0) {
        return signal.to_vec();
    }
    let normal = Normal::new(0.0, sd).expect("finite noise level");
    signal
        .iter()
        .map(|v| v + Complex64::new(normal.sample(rng), normal.sample(rng)))
        .collect()
}

/// Simulates one uplink reference-signal capture at `true_range` meters and
/// the given SNR, then estimates its time of flight.
pub fn measure_range<R: Rng + ?Sized>(
    corr: &Correlator,
    known: &ZcSequence,
    true_range: f64,
    snr_db: f64,
    cfg: &RangingConfig,
    rng: &mut R,
) -> Result<ToFEstimate> {
    let delay = true_range / cfg.meters_per_sample();
    if delay >= known.len() as f64 / 2.0 {
        return Err(Error::Domain(format!(
            "range {true_range} m exceeds the unambiguous window of the length-{} sequence",
            known.len()
        )));
    }
    let rx = add_awgn(&delay_signal(&known.samples, delay), snr_db, rng);
    corr.estimate(&known.samples, &rx, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use approx::assert_relative_eq;

    fn cfg(k: usize) -> RangingConfig {
        RangingConfig { upsample_k: k, n_zc: 63, root_q: 25, ..RangingConfig::default() }
    }

    #[test]
    fn zc_basic_examples() {
        for (q, n) in [(1, 3), (25, 63), (34, 839), (5, 7)] {
            let s = gen_zc(q, n).unwrap();
            assert_eq!(s.samples[0], Complex64::new(1.0, 0.0));
            for v in &s.samples {
                assert_relative_eq!(v.norm(), 1.0, max_relative = 1e-14);
            }
        }
        // q=1, N=3: phase indices n(n+1)/2 mod 3 = 0, 1, 0
        let s = gen_zc(1, 3).unwrap();
        let w = Complex64::from_polar(1.0, -TAU / 3.0);
        assert!((s.samples[1] - w).norm() < 1e-15);
        assert!((s.samples[2] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn zc_rejects_bad_parameters() {
        assert!(gen_zc(1, 64).is_err());
        assert!(gen_zc(0, 63).is_err());
        assert!(gen_zc(63, 63).is_err());
        assert!(gen_zc(5, 0).is_err());
        assert!(!gen_zc(21, 63).unwrap().is_cazac());
        assert!(gen_zc(25, 63).unwrap().is_cazac());
    }

    #[test]
    fn autocorrelation_lag_zero_and_one() {
        let s = gen_zc(25, 63).unwrap();
        assert_relative_eq!(circ_autocorr(&s, 0).re, 63.0, max_relative = 1e-14);
        assert!(circ_autocorr(&s, 1).norm() < 1e-9 * 63.0);
    }

    #[test]
    fn fft_matches_direct_correlation() {
        let s = gen_zc(25, 63).unwrap();
        let mut r = rng::from_seed(1);
        let rx = add_awgn(&delay_signal(&s.samples, 5.4), 5.0, &mut r);
        let direct = circ_xcorr_direct(&s.samples, &rx).unwrap();
        let fast = Correlator::new(63, 1).xcorr(&s.samples, &rx).unwrap();
        let scale = direct.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for (a, b) in direct.iter().zip(&fast) {
            assert!((a - b).norm() <= 1e-9 * scale);
        }
    }

    #[test]
    fn upsampled_grid_contains_base_correlation() {
        let s = gen_zc(25, 63).unwrap();
        let rx = delay_signal(&s.samples, 2.7);
        let c = Correlator::new(63, 4);
        let base = c.xcorr(&s.samples, &rx).unwrap();
        let up = c.xcorr_upsampled(&s.samples, &rx).unwrap();
        for (m, b) in base.iter().enumerate() {
            assert!((up[4 * m] - b).norm() < 1e-9 * 63.0);
        }
    }

    #[test]
    fn zero_delay_and_integer_shift() {
        let s = gen_zc(25, 63).unwrap();
        for k in [1, 2, 4, 8] {
            let e = estimate_tof(&s, &s.samples, &cfg(k)).unwrap();
            assert_eq!(e.delay_samples, 0.0);
            let shifted: Vec<_> = (0..63).map(|n| s.samples[(n + 63 - 7) % 63]).collect();
            let e = estimate_tof(&s, &shifted, &cfg(k)).unwrap();
            assert!((e.delay_samples - 7.0).abs() <= 0.5 / k as f64);
            assert_relative_eq!(e.range_meters, SPEED_OF_LIGHT * e.delay_seconds, max_relative = 1e-15);
        }
    }

    #[test]
    fn phase_ramp_integer_delay_is_circular_shift() {
        let s = gen_zc(25, 63).unwrap();
        let d = delay_signal(&s.samples, 7.0);
        for n in 0..63 {
            assert!((d[n] - s.samples[(n + 63 - 7) % 63]).norm() < 1e-9);
        }
    }

    #[test]
    fn fractional_delay_within_quarter_sample() {
        let s = gen_zc(25, 63).unwrap();
        let mut r = rng::from_seed(2);
        let clean = delay_signal(&s.samples, 3.3);
        let c = cfg(4);
        for _ in 0..200 {
            let rx = add_awgn(&clean, 20.0, &mut r);
            let e = estimate_tof(&s, &rx, &c).unwrap();
            assert!((e.delay_samples - 3.3).abs() <= 0.25);
        }
    }

    #[test]
    fn all_zero_signal_has_no_peak() {
        let s = gen_zc(25, 63).unwrap();
        let zero = vec![Complex64::new(0.0, 0.0); 63];
        assert!(matches!(estimate_tof(&s, &zero, &cfg(4)), Err(Error::NoPeak(_))));
        assert!(matches!(estimate_tof(&s, &zero[..10], &cfg(4)), Err(Error::NoPeak(_)) | Err(Error::Shape(_))));
    }

    #[test]
    fn resolution_values() {
        let base = RangingConfig { upsample_k: 1, ..RangingConfig::default() };
        assert!((range_resolution(&base) - 9.76).abs() < 0.005);
        let k4 = RangingConfig { upsample_k: 4, ..base };
        assert!((range_resolution(&k4) - 2.44).abs() < 0.005);
        let k8 = RangingConfig { upsample_k: 8, ..base };
        assert_relative_eq!(range_resolution(&k8) * 2.0, range_resolution(&k4), max_relative = 1e-15);
    }

    #[test]
    fn noiseless_integer_delays_unbiased() {
        let s = gen_zc(25, 63).unwrap();
        let mut r = rng::from_seed(3);
        let mut bias = 0.0;
        for _ in 0..100 {
            let d = r.random_range(0..31) as f64;
            let e = estimate_tof(&s, &delay_signal(&s.samples, d), &cfg(4)).unwrap();
            bias += e.delay_samples - d;
        }
        assert!(bias.abs() < 1e-9);
    }

    #[test]
    fn sidelobe_ratio_drops_with_upsampling() {
        let s = gen_zc(25, 63).unwrap();
        let mut r = rng::from_seed(4);
        let mut mean = [0.0; 3];
        for _ in 0..200 {
            let rx = add_awgn(&delay_signal(&s.samples, 9.0), 0.0, &mut r);
            for (slot, k) in [1usize, 4, 8].iter().enumerate() {
                mean[slot] += estimate_tof(&s, &rx, &cfg(*k)).unwrap().peak_to_sidelobe / 200.0;
            }
        }
        assert!(mean[0] > mean[1] && mean[1] > mean[2], "{mean:?}");
    }

    #[test]
    fn batch_matches_single() {
        let s = gen_zc(25, 63).unwrap();
        let rx: Vec<_> = (0..20).map(|d| delay_signal(&s.samples, d as f64 * 0.7)).collect();
        let batch = estimate_tof_batch(&s, &rx, &cfg(4), Exec::Parallel).unwrap();
        for (sig, b) in rx.iter().zip(&batch) {
            assert_eq!(estimate_tof(&s, sig, &cfg(4)).unwrap(), *b);
        }
    }

    #[test]
    fn measured_range_close_to_truth() {
        let c = RangingConfig::default();
        let s = gen_zc(c.root_q, c.n_zc).unwrap();
        let corr = Correlator::new(c.n_zc, c.upsample_k);
        let mut r = rng::from_seed(5);
        let e = measure_range(&corr, &s, 141.4, 10.0, &c, &mut r).unwrap();
        assert!((e.range_meters - 141.4).abs() <= range_resolution(&c));
        assert!(measure_range(&corr, &s, 1e6, 10.0, &c, &mut r).is_err());
    }
}
