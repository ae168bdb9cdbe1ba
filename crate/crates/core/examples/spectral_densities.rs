//! Spectral-density models, their memory kernels and the oscillator
//! response.
//!
//! ```text
//! cargo run --release --example spectral_densities
//! ```

use bathscope::bath::{greens_fourier, k_squared, SpectralDensityModel};
use bathscope::quad::QuadOptions;
use bathscope::units::Oscillator;

fn main() -> bathscope::Result<()> {
    let c = 1.0 / (std::f64::consts::PI * 215.0);
    let models = [
        ("ohmic, cutoff 20", SpectralDensityModel::OhmicCutoff { c, cutoff: 20.0 }),
        (
            "power law k=0.5 on [0.2, 5]",
            SpectralDensityModel::LocalPowerLaw {
                c,
                k: 0.5,
                omega_lo: 0.2,
                omega_hi: 5.0,
            },
        ),
        ("window model k=-2.3, delta=0.03", SpectralDensityModel::paper(c, -2.3, 0.03, 20.0)),
        (
            "tabulated",
            SpectralDensityModel::Tabulated {
                points: vec![[0.1, 0.0], [0.8, 0.8 * c], [1.2, 1.3 * c], [3.0, 0.0]],
            },
        ),
    ];
    let opts = QuadOptions::default();
    let osc = Oscillator::unit(1.0);
    for (name, m) in &models {
        println!("{name}");
        println!("  nu(0) = {:.6e}, K^2 = {:.9}", m.nu_zero()?, k_squared(m, &osc)?);
        for w in [0.5, 0.99, 1.0, 1.5] {
            let nh = m.nu_hat(w, &opts)?;
            let g = greens_fourier(m, &osc, w, &opts)?;
            println!(
                "  omega {w:<5} I {:.4e}  nu_hat {:+.6e}{:+.6e}i  |G| {:.4e}",
                m.density_unchecked(w),
                nh.re,
                nh.im,
                g.norm()
            );
        }
        for s in [0.0, 1.0, 10.0] {
            println!("  s {s:<5} nu {:+.6e}  eta {:+.6e}", m.nu(s, &opts)?, m.eta(s, &opts)?);
        }
    }
    Ok(())
}
