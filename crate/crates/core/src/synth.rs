//! Seeded synthetic measurement data with a known spectral exponent.
//!
//! The target is the reduced output spectrum with `I(ω) ∝ ω^k` around a
//! resonance at `center_hz`, plus a flat floor and optional extra modes.
//! Time series are drawn by frequency-domain factorisation on a 2^N grid;
//! averaged spectra are drawn bin by bin from the exact distribution of an
//! n-fold averaged periodogram of Gaussian data.
//!
//! Randomness: every record, spectrum, annealing run or bootstrap draws from
//! its own ChaCha20 stream, `seed_from_u64(seed)` with stream id
//! `(tag << 48) | index`. Results therefore do not depend on the order in
//! which work items run.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::spectrum::{Spectrum, Truth};

/// Stream tags.
pub const STREAM_TIMESERIES: u64 = 1;
pub const STREAM_SPECTRUM: u64 = 2;
pub const STREAM_ANNEALING: u64 = 3;
pub const STREAM_BOOTSTRAP: u64 = 4;

/// Independent generator for work item `index` under domain `tag`.
pub fn stream_rng(seed: u64, tag: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream((tag << 48) | (index & ((1 << 48) - 1)));
    rng
}

/// An additional mechanical mode, `peak · g₁(f/center) / q²` in shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContaminantMode {
    pub center_hz: f64,
    pub q: f64,
    /// Peak PSD relative to the main resonance peak.
    pub peak_rel: f64,
}

/// `x^{k-1} / ((1 − x²)² + (x/q)²)`.
pub fn lineshape(x: f64, k: f64, q: f64) -> f64 {
    x.powf(k - 1.0) / ((1.0 - x * x).powi(2) + (x / q).powi(2))
}

/// Response-shaped PSD of a single mode with its maximum-order value `peak`
/// at `center_hz`.
pub fn mode_psd(f_hz: f64, center_hz: f64, q: f64, peak: f64) -> f64 {
    peak * lineshape(f_hz / center_hz, 1.0, q) / (q * q)
}

/// What to synthesise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    /// Ω∞/2π.
    pub center_hz: f64,
    pub q: f64,
    pub k: f64,
    /// PSD at `center_hz` (units²/Hz).
    pub peak_psd: f64,
    /// The power law is confined to this band; outside only the floor and
    /// extra modes remain.
    pub band_hz: [f64; 2],
    /// Flat background PSD relative to `peak_psd`.
    pub floor_rel: f64,
    pub modes: Vec<ContaminantMode>,
    pub sample_rate: f64,
    /// Time-series records have `2^log2_len` samples.
    pub log2_len: u32,
    /// Samples per batch (sets the spectral bin width `sample_rate / batch_len`).
    pub batch_len: usize,
    /// Range of bins emitted for averaged spectra.
    pub spectrum_band_hz: [f64; 2],
    /// Set from the run seed, not from config files.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            center_hz: 914e3,
            q: 215.0,
            k: 1.0,
            peak_psd: 1.0,
            band_hz: [457e3, 1371e3],
            floor_rel: 0.0,
            modes: Vec::new(),
            sample_rate: 10e6,
            log2_len: 20,
            batch_len: 100_000,
            spectrum_band_hz: [850e3, 980e3],
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| -> Result<()> { Err(Error::Config(msg)) };
        if !(self.center_hz > 0.0 && self.q > 0.0 && self.peak_psd > 0.0) {
            return bad("synth needs center_hz, q, peak_psd > 0".into());
        }
        if !self.k.is_finite() {
            return bad(format!("synth exponent k must be finite, got {}", self.k));
        }
        if !(self.floor_rel >= 0.0) {
            return bad(format!("floor_rel must be >= 0, got {}", self.floor_rel));
        }
        if !(self.band_hz[0] > 0.0 && self.band_hz[1] > self.band_hz[0]) {
            return bad(format!("band_hz must satisfy 0 < lo < hi, got {:?}", self.band_hz));
        }
        if !(self.sample_rate > 0.0) || self.batch_len == 0 {
            return bad("sample_rate and batch_len must be positive".into());
        }
        if !(1..=30).contains(&self.log2_len) {
            return bad(format!("log2_len must lie in 1..=30, got {}", self.log2_len));
        }
        if !(self.spectrum_band_hz[1] > self.spectrum_band_hz[0] && self.spectrum_band_hz[0] >= 0.0) {
            return bad(format!("spectrum_band_hz is not an interval: {:?}", self.spectrum_band_hz));
        }
        if self.spectrum_band_hz[1] > 0.5 * self.sample_rate {
            return bad("spectrum band extends beyond the Nyquist frequency".into());
        }
        for m in &self.modes {
            if !(m.center_hz > 0.0 && m.q > 0.0 && m.peak_rel >= 0.0) {
                return bad(format!("invalid extra mode {m:?}"));
            }
        }
        Ok(())
    }

    pub fn truth(&self) -> Truth {
        Truth {
            k: self.k,
            center_hz: self.center_hz,
            q: self.q,
            peak_psd: self.peak_psd,
            floor_rel: self.floor_rel,
        }
    }

    /// Resonance contribution alone.
    pub fn signal_psd(&self, f_hz: f64) -> f64 {
        if f_hz < self.band_hz[0] || f_hz > self.band_hz[1] {
            return 0.0;
        }
        self.peak_psd * lineshape(f_hz / self.center_hz, self.k, self.q) / (self.q * self.q)
    }

    /// Full one-sided target PSD.
    pub fn target_psd(&self, f_hz: f64) -> f64 {
        let mut p = self.signal_psd(f_hz) + self.floor_rel * self.peak_psd;
        for m in &self.modes {
            if f_hz > 0.0 {
                p += mode_psd(f_hz, m.center_hz, m.q, m.peak_rel * self.peak_psd);
            }
        }
        p
    }

    pub fn bin_width(&self) -> f64 {
        self.sample_rate / self.batch_len as f64
    }

    /// Bin centres of a `batch_len` periodogram inside `spectrum_band_hz`.
    pub fn spectrum_grid(&self) -> Vec<f64> {
        let df = self.bin_width();
        let lo = (self.spectrum_band_hz[0] / df).ceil() as usize;
        let hi = (self.spectrum_band_hz[1] / df).floor() as usize;
        (lo..=hi.min(self.batch_len / 2)).map(|j| j as f64 * df).collect()
    }
}

/// A uniformly sampled real record.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub sample_rate: f64,
    pub samples: Vec<f64>,
    pub seed: u64,
    pub truth: Option<Truth>,
}

impl TimeSeries {
    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::Data("time series is empty".into()));
        }
        if !(self.sample_rate > 0.0) {
            return Err(Error::Data(format!("sample rate must be positive, got {}", self.sample_rate)));
        }
        if let Some(i) = self.samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("sample {i} is not finite")));
        }
        Ok(())
    }
}

/// Draws record `index` of length `2^log2_len`.
pub fn synth_timeseries(cfg: &SynthConfig, index: u64) -> Result<TimeSeries> {
    cfg.validate()?;
    let n = 1usize << cfg.log2_len;
    let fs = cfg.sample_rate;
    let df = fs / n as f64;
    let mut rng = stream_rng(cfg.seed, STREAM_TIMESERIES, index);
    let mut spec = vec![Complex64::new(0.0, 0.0); n];
    let half = n / 2;
    for j in 0..=half {
        let p = cfg.target_psd(j as f64 * df);
        if p < 0.0 || !p.is_finite() {
            return Err(Error::Config(format!("target PSD at {} Hz is {p}", j as f64 * df)));
        }
        if j == 0 || j == half {
            let g: f64 = StandardNormal.sample(&mut rng);
            spec[j] = Complex64::new((p * fs * n as f64).sqrt() * g, 0.0);
        } else {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            let s = (p * fs * n as f64 / 4.0).sqrt();
            spec[j] = Complex64::new(s * a, s * b);
            spec[n - j] = spec[j].conj();
        }
    }
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_inverse(n).process(&mut spec);
    let samples = spec.iter().map(|z| z.re / n as f64).collect();
    Ok(TimeSeries {
        sample_rate: fs,
        samples,
        seed: cfg.seed,
        truth: Some(cfg.truth()),
    })
}

/// Records `first..first+count`, in index order.
pub fn synth_records(cfg: &SynthConfig, first: u64, count: u64) -> Result<Vec<TimeSeries>> {
    (first..first + count)
        .into_par_iter()
        .map(|i| synth_timeseries(cfg, i))
        .collect()
}

/// Batches `first..first+count` of length `batch_len`, cut from consecutive
/// records. Each record contributes `⌊2^log2_len / batch_len⌋` batches and
/// its tail is discarded.
pub fn synth_batches(cfg: &SynthConfig, first: u64, count: u64) -> Result<Vec<Vec<f64>>> {
    let per_record = (1u64 << cfg.log2_len) / cfg.batch_len as u64;
    if per_record == 0 {
        return Err(Error::Config(format!(
            "synth.batch_len = {} exceeds the record length 2^{}",
            cfg.batch_len, cfg.log2_len
        )));
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    let r0 = first / per_record;
    let r1 = (first + count - 1) / per_record;
    let records = synth_records(cfg, r0, r1 - r0 + 1)?;
    let n = cfg.batch_len;
    Ok((first..first + count)
        .map(|b| {
            let rec = &records[(b / per_record - r0) as usize];
            let j = (b % per_record) as usize;
            rec.samples[j * n..(j + 1) * n].to_vec()
        })
        .collect())
}

/// Averaged spectrum `index`: each bin is `target · Gamma(n, 1)/n`, the
/// law of an n-fold average of exponential periodogram ordinates.
pub fn synth_averaged_spectrum(cfg: &SynthConfig, n_averages: u64, index: u64) -> Result<Spectrum> {
    cfg.validate()?;
    if n_averages == 0 {
        return domain("n_averages must be at least 1");
    }
    let grid = cfg.spectrum_grid();
    let mut rng = stream_rng(cfg.seed, STREAM_SPECTRUM, index);
    let gamma = Gamma::new(n_averages as f64, 1.0 / n_averages as f64)
        .map_err(|e| Error::Domain(format!("gamma distribution: {e}")))?;
    let psd: Vec<f64> = grid
        .iter()
        .map(|&f| cfg.target_psd(f) * gamma.sample(&mut rng))
        .collect();
    let mut s = Spectrum::new(
        grid,
        psd,
        n_averages,
        format!("synthetic seed={} index={index}", cfg.seed),
    )?;
    s.truth = Some(cfg.truth());
    Ok(s)
}

/// Spectra `0..count`, in index order.
pub fn synth_spectra(cfg: &SynthConfig, n_averages: u64, count: u64) -> Result<Vec<Spectrum>> {
    (0..count)
        .into_par_iter()
        .map(|i| synth_averaged_spectrum(cfg, n_averages, i))
        .collect()
}

/// Adds extra modes (absolute peak PSD per mode) and a flat floor.
pub fn add_contaminants(spectrum: &Spectrum, modes: &[(f64, f64, f64)], floor: f64) -> Spectrum {
    let mut out = spectrum.clone();
    for (f, p) in out.freqs_hz.iter().zip(out.psd.iter_mut()) {
        *p += floor;
        for &(center, q, peak) in modes {
            if *f > 0.0 {
                *p += mode_psd(*f, center, q, peak);
            }
        }
    }
    out
}

/// Uniform draw in `[0, 1)` from a stream (shared helper for annealing and
/// bootstrap).
pub(crate) fn uniform(rng: &mut ChaCha20Rng) -> f64 {
    rng.random::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_bits() {
        let cfg = SynthConfig {
            log2_len: 12,
            seed: 11,
            ..SynthConfig::default()
        };
        let a = synth_timeseries(&cfg, 3).unwrap();
        let b = synth_timeseries(&cfg, 3).unwrap();
        assert_eq!(a.samples, b.samples);
        let c = synth_timeseries(&cfg, 4).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn streams_are_independent_of_draw_order() {
        let cfg = SynthConfig {
            seed: 5,
            ..SynthConfig::default()
        };
        let all = synth_spectra(&cfg, 10, 6).unwrap();
        let single = synth_averaged_spectrum(&cfg, 10, 4).unwrap();
        assert_eq!(all[4].psd, single.psd);
    }

    #[test]
    fn grid_has_bin_width_from_batch_length() {
        let cfg = SynthConfig::default();
        let g = cfg.spectrum_grid();
        assert_eq!(cfg.bin_width(), 100.0);
        assert_eq!(g[0], 850e3);
        assert_eq!(*g.last().unwrap(), 980e3);
        assert_eq!(g.len(), 1301);
    }

    #[test]
    fn peak_value_is_as_configured() {
        let cfg = SynthConfig {
            k: -2.3,
            peak_psd: 3.0,
            ..SynthConfig::default()
        };
        assert!((cfg.target_psd(914e3) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn contaminants_identity_when_empty() {
        let cfg = SynthConfig::default();
        let s = synth_averaged_spectrum(&cfg, 100, 0).unwrap();
        assert_eq!(add_contaminants(&s, &[], 0.0), s);
    }
}
