use rayon::prelude::*;

use crate::error::{domain, Result};
use crate::qbm::{mu_lower_bound, BoundConstant};
use crate::spectrum::Spectrum;
use crate::synth::{stream_rng, STREAM_BOOTSTRAP};

use super::fit::{fit_exponent, FitOptions, FitResult, FitWindow};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramSpec {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        Self {
            lo: -6.0,
            hi: 4.0,
            bins: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Values outside `[lo, hi]` are counted in the end bins.
    pub fn build(values: &[f64], spec: HistogramSpec) -> Result<Self> {
        if spec.bins == 0 || !(spec.hi > spec.lo) {
            return domain(format!("invalid histogram spec {spec:?}"));
        }
        let width = (spec.hi - spec.lo) / spec.bins as f64;
        let edges = (0..=spec.bins).map(|i| spec.lo + i as f64 * width).collect();
        let mut counts = vec![0; spec.bins];
        for &v in values {
            let b = ((v - spec.lo) / width).floor();
            let b = if b.is_nan() { 0 } else { b.clamp(0.0, (spec.bins - 1) as f64) as usize };
            counts[b] += 1;
        }
        Ok(Self { edges, counts })
    }
}

/// Outcome for one spectrum; failed fits keep their error message.
#[derive(Debug, Clone, PartialEq)]
pub struct FitRecord {
    pub index: usize,
    pub fit: std::result::Result<FitResult, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentEnsemble {
    pub records: Vec<FitRecord>,
    pub mean_k: f64,
    /// Sample standard deviation of the fitted exponents.
    pub std_k: f64,
    pub n_ok: usize,
    pub histogram: Histogram,
}

impl ExponentEnsemble {
    pub fn ks(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.fit.as_ref().ok().map(|f| f.k)).collect()
    }

    /// Standard error of `mean_k`.
    pub fn std_err(&self) -> f64 {
        self.std_k / (self.n_ok as f64).sqrt()
    }
}

fn moments(ks: &[f64]) -> (f64, f64) {
    let n = ks.len() as f64;
    let mean = ks.iter().sum::<f64>() / n;
    let var = if ks.len() > 1 {
        ks.iter().map(|k| (k - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Fits every spectrum (concurrently) and aggregates in index order.
/// `weights_from` feeds [`super::Weighting::InverseVariance`].
pub fn ensemble_estimate(
    spectra: &[Spectrum],
    window: &FitWindow,
    options: &FitOptions,
    weights_from: Option<&Spectrum>,
    histogram: HistogramSpec,
) -> Result<ExponentEnsemble> {
    if spectra.len() < 2 {
        return domain(format!("an ensemble needs at least 2 spectra, got {}", spectra.len()));
    }
    window.validate()?;
    options.anneal.validate()?;
    let records: Vec<FitRecord> = spectra
        .par_iter()
        .enumerate()
        .map(|(index, s)| FitRecord {
            index,
            fit: fit_exponent(s, window, options, weights_from, index as u64).map_err(|e| e.to_string()),
        })
        .collect();
    let ks: Vec<f64> = records.iter().filter_map(|r| r.fit.as_ref().ok().map(|f| f.k)).collect();
    if ks.is_empty() {
        return Err(crate::Error::DegenerateFit(format!(
            "all {} fits failed; first error: {}",
            records.len(),
            records[0].fit.as_ref().err().cloned().unwrap_or_default()
        )));
    }
    let (mean_k, std_k) = moments(&ks);
    Ok(ExponentEnsemble {
        histogram: Histogram::build(&ks, histogram)?,
        n_ok: ks.len(),
        records,
        mean_k,
        std_k,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapSummary {
    pub n_resamples: usize,
    pub mean: f64,
    pub std: f64,
    pub p2_5: f64,
    pub p50: f64,
    pub p97_5: f64,
}

/// Resamples the per-spectrum exponents with replacement and summarises the
/// distribution of the resampled mean. Each fit is a deterministic function
/// of its spectrum and index, so resampling fitted exponents is the same as
/// refitting resampled spectra.
pub fn bootstrap(ks: &[f64], n_resamples: usize, seed: u64) -> Result<BootstrapSummary> {
    if ks.is_empty() || n_resamples < 2 {
        return domain("bootstrap needs a nonempty ensemble and at least 2 resamples");
    }
    let n = ks.len();
    let mut means: Vec<f64> = (0..n_resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, STREAM_BOOTSTRAP, r as u64);
            (0..n).map(|_| ks[rng.random_range(0..n)]).sum::<f64>() / n as f64
        })
        .collect();
    let (mean, std) = moments(&means);
    means.sort_by(f64::total_cmp);
    let pct = |p: f64| {
        let x = p * (n_resamples - 1) as f64;
        let i = x.floor() as usize;
        let j = (i + 1).min(n_resamples - 1);
        means[i] + (x - i as f64) * (means[j] - means[i])
    };
    Ok(BootstrapSummary {
        n_resamples,
        mean,
        std,
        p2_5: pct(0.025),
        p50: pct(0.5),
        p97_5: pct(0.975),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonMarkovReport {
    pub k: f64,
    /// Half-width of the resonant window relative to Ω.
    pub delta_rel: f64,
    pub constant: BoundConstant,
    pub mu: f64,
    pub xi: f64,
    /// First-order propagation of `k_std`.
    pub xi_std: f64,
}

/// ξ lower bound at exponent `k` with `δ = delta_rel · Ω`.
pub fn k_to_nonmarkovianity(k: f64, k_std: f64, delta_rel: f64, constant: BoundConstant) -> Result<NonMarkovReport> {
    let b = mu_lower_bound(k, 1.0, delta_rel, constant)?;
    let l = 2.0 * delta_rel.atanh();
    let dmu_dk = -2.0 * constant.value() * (1.0 - k) * l * l;
    let s = (1.0 + b.mu).sqrt();
    let dxi_dmu = 1.0 / (s * (s + 1.0) * (s + 1.0));
    Ok(NonMarkovReport {
        k,
        delta_rel,
        constant,
        mu: b.mu,
        xi: b.xi,
        xi_std: (dxi_dmu * dmu_dk).abs() * k_std.abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_counts_everything() {
        let h = Histogram::build(&[-10.0, -6.0, 0.1, 3.99, 4.0, 12.0], HistogramSpec::default()).unwrap();
        assert_eq!(h.counts.iter().sum::<u64>(), 6);
        assert_eq!(h.counts[0], 2);
        assert_eq!(h.counts[39], 3);
        assert_eq!(h.edges.len(), 41);
    }

    #[test]
    fn ohmic_exponent_has_no_bound() {
        let r = k_to_nonmarkovianity(1.0, 0.5, 0.03, BoundConstant::Asymptotic).unwrap();
        assert_eq!(r.xi, 0.0);
        assert_eq!(r.xi_std, 0.0);
    }

    #[test]
    fn delta_method_matches_finite_difference() {
        let (k, d) = (-2.3, 1e-3);
        let r = k_to_nonmarkovianity(k, 1.0, d, BoundConstant::Asymptotic).unwrap();
        let h = 1e-5;
        let xp = k_to_nonmarkovianity(k + h, 0.0, d, BoundConstant::Asymptotic).unwrap().xi;
        let xm = k_to_nonmarkovianity(k - h, 0.0, d, BoundConstant::Asymptotic).unwrap().xi;
        let fd = ((xp - xm) / (2.0 * h)).abs();
        assert!((r.xi_std / fd - 1.0).abs() < 1e-6);
        assert!(r.xi > 1.1e-6);
    }

    #[test]
    fn bootstrap_is_seeded() {
        let ks: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let a = bootstrap(&ks, 500, 9).unwrap();
        let b = bootstrap(&ks, 500, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.p2_5 <= a.p50 && a.p50 <= a.p97_5);
    }
}
