//! The measurement pipeline: batching, periodograms, averaging, the
//! windowed exponent fit, ensemble statistics and the map to ξ.

mod ensemble;
mod fit;
mod shape;
mod spectral;

pub use ensemble::{
    bootstrap, ensemble_estimate, k_to_nonmarkovianity, BootstrapSummary, ExponentEnsemble, FitRecord, Histogram,
    HistogramSpec, NonMarkovReport,
};
pub use fit::{fit_exponent, AnnealOptions, FitOptions, FitResult, FitWindow, Objective, Weighting};
pub use shape::{estimate_shape_params, pooled_spectrum, ShapeEstimate};
pub use spectral::{
    average_batches, average_series, average_spectra, band_bins, batch_series, periodogram, Batches, Periodogram, Window,
};
