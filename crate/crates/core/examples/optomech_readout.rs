//! The optomechanical readout of the measured device.
//!
//! Solves the cavity steady state, compares thermal and radiation-pressure
//! noise in the fit window, and checks that the full readout chain is a
//! constant multiple of the reduced output spectrum.
//!
//! ```text
//! cargo run --release --example optomech_readout
//! ```

use bathscope::bath::SpectralDensityModel;
use bathscope::optomech::{CavityParams, PsdMode, Readout};
use bathscope::synth::mode_psd;
use bathscope::units::OscillatorParams;

fn main() -> bathscope::Result<()> {
    let device = OscillatorParams::paper_device();
    let cavity = CavityParams::paper();
    let r = Readout::from_si(&device, &cavity)?;
    let ss = r.steady_state()?;
    println!(
        "photons {:.4e}, G0 {:.3} rad/s, detuning {:.3e}, multistable {}",
        ss.photon_number(),
        cavity.g0() * device.zero_point_length(),
        ss.delta,
        ss.multistable
    );
    let model = SpectralDensityModel::paper(device.natural_density_at_resonance(), -2.3, 0.033, 1e7);
    let f0 = device.omega / (2.0 * std::f64::consts::PI);
    println!("{:>10} {:>12} {:>14}", "f (Hz)", "S_rp/S_th", "chain/reduced");
    for f in [885e3, 900e3, 914e3, 930e3, 945e3] {
        let w = f / f0;
        let (th, rp) = r.noise_spectra(&model, w, &ss)?;
        let ratio = r.chain_output_psd(&model, w, &ss)? / r.output_psd(&model, w, &ss, PsdMode::Reduced { c: 1.0 })?;
        println!("{f:>10} {:>12.3e} {:>14.9e}", rp / th, ratio);
    }
    let worst = (885..=945)
        .map(|k| mode_psd(k as f64 * 1e3, 1.2e6, 215.0, 1.0))
        .fold(0.0f64, f64::max);
    println!("1.2 MHz mode in the window, relative to an equal peak: at most {worst:.3e}");
    Ok(())
}
