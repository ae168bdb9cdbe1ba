//! Synthetic time series, periodograms and the binary record format.
//!
//! Draws one 2^20-sample record, slices it into 100 000-sample batches,
//! averages their periodograms and compares with the target spectrum.
//!
//! ```text
//! cargo run --release --example synth_timeseries
//! ```

use bathscope::estimate::average_series;
use bathscope::estimate::Window;
use bathscope::io::{read_timeseries, write_timeseries};
use bathscope::synth::{synth_timeseries, SynthConfig};

fn main() -> bathscope::Result<()> {
    let cfg = SynthConfig {
        k: -2.3,
        floor_rel: 1e-3,
        seed: 7,
        ..SynthConfig::default()
    };
    let ts = synth_timeseries(&cfg, 0)?;
    let var = ts.samples.iter().map(|x| x * x).sum::<f64>() / ts.samples.len() as f64;
    println!("{} samples at {} Hz, mean square {:.4e}", ts.samples.len(), ts.sample_rate, var);

    let path = std::env::temp_dir().join("bathscope_example.bsts");
    write_timeseries(&path, &ts)?;
    let back = read_timeseries(&path)?;
    println!("binary round trip identical: {}", back == ts);
    std::fs::remove_file(&path).ok();

    let spectra = average_series(&ts, cfg.batch_len, 10, Window::Rectangular, [900e3, 930e3])?;
    let s = &spectra[0];
    println!("{} batches averaged into {} bins", s.n_averages, s.len());
    for i in (0..s.len()).step_by(50) {
        let f = s.freqs_hz[i];
        println!("  {f:>8} Hz  measured/target {:.3}", s.psd[i] / cfg.target_psd(f));
    }
    Ok(())
}
