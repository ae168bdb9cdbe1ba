use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::spectrum::Spectrum;
use crate::synth::TimeSeries;

/// Consecutive non-overlapping slices of a record.
#[derive(Debug, Clone)]
pub struct Batches<'a> {
    pub batches: Vec<&'a [f64]>,
    /// Trailing samples that did not fill a batch.
    pub dropped: usize,
}

pub fn batch_series(ts: &TimeSeries, n: usize) -> Result<Batches<'_>> {
    if n == 0 {
        return domain("batch length must be positive");
    }
    if ts.samples.len() < n {
        return domain(format!(
            "record of {} samples is shorter than one batch of {n}",
            ts.samples.len()
        ));
    }
    let chunks = ts.samples.chunks_exact(n);
    let dropped = chunks.remainder().len();
    Ok(Batches {
        batches: chunks.collect(),
        dropped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    #[default]
    Rectangular,
    Hann,
}

/// Reusable one-sided periodogram of fixed length.
pub struct Periodogram {
    n: usize,
    sample_rate: f64,
    fft: Arc<dyn Fft<f64>>,
    taper: Option<Vec<f64>>,
    /// `2 / (fs · n · mean(w²))`.
    scale: f64,
}

impl Periodogram {
    pub fn new(n: usize, sample_rate: f64, window: Window) -> Result<Self> {
        if n < 2 || !(sample_rate > 0.0) {
            return domain(format!("periodogram needs n >= 2 and fs > 0 (n = {n}, fs = {sample_rate})"));
        }
        let taper = match window {
            Window::Rectangular => None,
            Window::Hann => Some(
                (0..n)
                    .map(|j| {
                        let s = (std::f64::consts::PI * j as f64 / n as f64).sin();
                        s * s
                    })
                    .collect::<Vec<_>>(),
            ),
        };
        let power = taper
            .as_ref()
            .map_or(1.0, |w| w.iter().map(|v| v * v).sum::<f64>() / n as f64);
        Ok(Self {
            n,
            sample_rate,
            fft: FftPlanner::new().plan_fft_forward(n),
            taper,
            scale: 2.0 / (sample_rate * n as f64 * power),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn bin_width(&self) -> f64 {
        self.sample_rate / self.n as f64
    }

    /// Bins `0..=n/2`; DC and (for even n) Nyquist carry half weight.
    pub fn compute(&self, batch: &[f64]) -> Result<Vec<f64>> {
        if batch.len() != self.n {
            return domain(format!("batch has {} samples, plan expects {}", batch.len(), self.n));
        }
        let mut buf: Vec<Complex64> = match &self.taper {
            None => batch.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            Some(w) => batch.iter().zip(w).map(|(&x, &w)| Complex64::new(x * w, 0.0)).collect(),
        };
        self.fft.process(&mut buf);
        let half = self.n / 2;
        Ok((0..=half)
            .map(|j| {
                let edge = j == 0 || (self.n % 2 == 0 && j == half);
                let p = buf[j].norm_sqr() * self.scale;
                if edge {
                    0.5 * p
                } else {
                    p
                }
            })
            .collect())
    }

    pub fn freqs(&self) -> Vec<f64> {
        let df = self.bin_width();
        (0..=self.n / 2).map(|j| j as f64 * df).collect()
    }
}

/// Rectangular-window periodogram over all bins `0..=n/2`.
pub fn periodogram(batch: &[f64], sample_rate: f64) -> Result<Spectrum> {
    let plan = Periodogram::new(batch.len(), sample_rate, Window::Rectangular)?;
    Spectrum::new(plan.freqs(), plan.compute(batch)?, 1, "periodogram")
}

/// Means of consecutive groups of `group_size` spectra; a trailing partial
/// group is dropped and its size returned.
pub fn average_spectra(spectra: &[Spectrum], group_size: usize) -> Result<(Vec<Spectrum>, usize)> {
    if group_size == 0 {
        return domain("group size must be positive");
    }
    let groups = spectra.chunks_exact(group_size);
    let dropped = groups.remainder().len();
    let mut out = Vec::new();
    for (g, group) in groups.enumerate() {
        let first = &group[0];
        let mut psd = vec![0.0; first.len()];
        let mut n_avg = 0;
        for s in group {
            if !s.same_grid(first) {
                return Err(Error::Data(format!("spectra in group {g} have different frequency grids")));
            }
            for (a, b) in psd.iter_mut().zip(&s.psd) {
                *a += b;
            }
            n_avg += s.n_averages;
        }
        for a in &mut psd {
            *a /= group_size as f64;
        }
        let mut s = Spectrum::new(first.freqs_hz.clone(), psd, n_avg, format!("average group={g}"))?;
        s.truth = first.truth;
        out.push(s);
    }
    Ok((out, dropped))
}

/// Indices of periodogram bins inside `band` (Hz).
pub fn band_bins(plan: &Periodogram, band: [f64; 2]) -> Result<Vec<usize>> {
    let df = plan.bin_width();
    let keep: Vec<usize> = (0..=plan.len() / 2)
        .filter(|&j| {
            let f = j as f64 * df;
            f >= band[0] && f <= band[1]
        })
        .collect();
    if keep.is_empty() {
        return domain(format!("no periodogram bins inside band {band:?}"));
    }
    Ok(keep)
}

/// Mean periodogram of `batches`, restricted to bins `keep`. Periodograms
/// are computed in parallel and summed in batch order.
pub fn average_batches<B: AsRef<[f64]> + Sync>(plan: &Periodogram, batches: &[B], keep: &[usize]) -> Result<Vec<f64>> {
    if batches.is_empty() {
        return domain("no batches to average");
    }
    let parts: Vec<Vec<f64>> = batches
        .par_iter()
        .map(|b| {
            let p = plan.compute(b.as_ref())?;
            Ok(keep.iter().map(|&j| p[j]).collect())
        })
        .collect::<Result<_>>()?;
    let mut acc = vec![0.0; keep.len()];
    for p in &parts {
        for (a, v) in acc.iter_mut().zip(p) {
            *a += v;
        }
    }
    let n = batches.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

/// Batches `ts`, averages periodograms in groups of `group_size`, and keeps
/// bins in `band` (Hz). A trailing partial group is dropped.
pub fn average_series(
    ts: &TimeSeries,
    batch_len: usize,
    group_size: usize,
    window: Window,
    band: [f64; 2],
) -> Result<Vec<Spectrum>> {
    ts.validate()?;
    if group_size == 0 {
        return domain("group size must be positive");
    }
    let b = batch_series(ts, batch_len)?;
    let plan = Periodogram::new(batch_len, ts.sample_rate, window)?;
    let keep = band_bins(&plan, band)?;
    let freqs: Vec<f64> = keep.iter().map(|&j| j as f64 * plan.bin_width()).collect();
    b.batches
        .chunks_exact(group_size)
        .enumerate()
        .map(|(g, group)| {
            let acc = average_batches(&plan, group, &keep)?;
            let mut s = Spectrum::new(
                freqs.clone(),
                acc,
                group_size as u64,
                format!("timeseries seed={} group={g}", ts.seed),
            )?;
            s.truth = ts.truth;
            Ok(s)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(samples: Vec<f64>, fs: f64) -> TimeSeries {
        TimeSeries {
            sample_rate: fs,
            samples,
            seed: 0,
            truth: None,
        }
    }

    #[test]
    fn batching_drops_the_remainder() {
        let t = ts(vec![0.0; 10 * 7 + 5], 1.0);
        let b = batch_series(&t, 7).unwrap();
        assert_eq!(b.batches.len(), 10);
        assert_eq!(b.dropped, 5);
        assert!(batch_series(&t, 0).is_err());
    }

    #[test]
    fn sinusoid_power_at_bin_centre() {
        let (n, fs, a) = (1000usize, 1e4, 1.7);
        let j0 = 37;
        let x: Vec<f64> = (0..n)
            .map(|i| a * (2.0 * std::f64::consts::PI * (j0 * i) as f64 / n as f64 + 0.3).cos())
            .collect();
        let s = periodogram(&x, fs).unwrap();
        let df = fs / n as f64;
        let peak: f64 = s.psd.iter().map(|p| p * df).sum();
        assert!((peak - a * a / 2.0).abs() < 1e-10 * a * a);
        assert!((s.psd[j0] * df - a * a / 2.0).abs() < 1e-10);
    }

    #[test]
    fn parseval_with_odd_length() {
        let n = 999;
        let x: Vec<f64> = (0..n).map(|i| ((i * i) % 17) as f64 - 8.0).collect();
        let s = periodogram(&x, 3.0).unwrap();
        let total: f64 = s.psd.iter().sum::<f64>() * 3.0 / n as f64;
        let ms = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
        assert!((total - ms).abs() < 1e-10 * ms);
    }
}
