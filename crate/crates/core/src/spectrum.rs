//! One-sided power spectra on a frequency grid in Hz.

use crate::error::{domain, Result};

/// Ground truth attached to synthetic data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truth {
    pub k: f64,
    pub center_hz: f64,
    pub q: f64,
    /// PSD at the resonance.
    pub peak_psd: f64,
    /// Flat background relative to the peak.
    pub floor_rel: f64,
}

/// One-sided PSD (units²/Hz) on strictly increasing ordinary frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub freqs_hz: Vec<f64>,
    pub psd: Vec<f64>,
    /// Number of periodograms averaged into each bin.
    pub n_averages: u64,
    /// Free-form origin tag, e.g. `synthetic seed=7 index=3`.
    pub provenance: String,
    pub truth: Option<Truth>,
}

impl Spectrum {
    pub fn new(freqs_hz: Vec<f64>, psd: Vec<f64>, n_averages: u64, provenance: impl Into<String>) -> Result<Self> {
        let s = Self {
            freqs_hz,
            psd,
            n_averages,
            provenance: provenance.into(),
            truth: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.freqs_hz.len() != self.psd.len() {
            return domain(format!(
                "spectrum has {} frequencies but {} values",
                self.freqs_hz.len(),
                self.psd.len()
            ));
        }
        if self.freqs_hz.windows(2).any(|w| !(w[1] > w[0])) {
            return domain("spectrum frequencies must be strictly increasing");
        }
        if let Some(i) = self.psd.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return domain(format!(
                "spectrum bin {i} at {} Hz holds {} (need finite, nonnegative)",
                self.freqs_hz[i], self.psd[i]
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.psd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psd.is_empty()
    }

    /// Bins with `lo ≤ f ≤ hi`.
    pub fn band(&self, lo: f64, hi: f64) -> Spectrum {
        let (freqs_hz, psd): (Vec<f64>, Vec<f64>) = self
            .freqs_hz
            .iter()
            .zip(&self.psd)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .map(|(f, p)| (*f, *p))
            .unzip();
        Spectrum {
            freqs_hz,
            psd,
            n_averages: self.n_averages,
            provenance: self.provenance.clone(),
            truth: self.truth,
        }
    }

    pub fn same_grid(&self, other: &Spectrum) -> bool {
        self.freqs_hz.len() == other.freqs_hz.len()
            && self
                .freqs_hz
                .iter()
                .zip(&other.freqs_hz)
                .all(|(a, b)| (a - b).abs() <= 1e-9 * a.abs().max(1.0))
    }
}
