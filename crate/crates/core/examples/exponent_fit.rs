//! Recover the spectral exponent from synthetic averaged spectra.
//!
//! Draws 90 spectra of 100 averages each for several true exponents, fits
//! the resonance shape on the pooled spectrum, then fits k per spectrum.
//!
//! ```text
//! cargo run --release --example exponent_fit
//! ```

use bathscope::estimate::{
    bootstrap, ensemble_estimate, estimate_shape_params, pooled_spectrum, FitOptions, FitWindow, HistogramSpec,
};
use bathscope::synth::{synth_spectra, SynthConfig};

fn main() -> bathscope::Result<()> {
    println!("{:>6} {:>9} {:>8} {:>8} {:>10} {:>7}", "k_true", "mean_k", "std_k", "se", "center_hz", "Q");
    for k in [-2.3, 0.0, 1.0, 2.0] {
        let cfg = SynthConfig {
            k,
            seed: 2024,
            ..SynthConfig::default()
        };
        let spectra = synth_spectra(&cfg, 100, 90)?;
        let pooled = pooled_spectrum(&spectra)?;
        let shape = estimate_shape_params(&pooled, 885e3, 945e3)?;
        let window = FitWindow::new(885e3, 945e3, shape.center_hz, shape.gamma_hz)?;
        let e = ensemble_estimate(&spectra, &window, &FitOptions::default(), None, HistogramSpec::default())?;
        let b = bootstrap(&e.ks(), 1000, 2024)?;
        println!(
            "{k:>6.2} {:>9.4} {:>8.4} {:>8.4} {:>10.1} {:>7.2}   bootstrap 95% [{:.3}, {:.3}]",
            e.mean_k,
            e.std_k,
            e.std_err(),
            shape.center_hz,
            shape.q,
            b.p2_5,
            b.p97_5
        );
    }
    Ok(())
}
