//! The non-Markovianity measure ξ for Ohmic and sub-Ohmic baths.
//!
//! Compares the eigenvalue route, the μ closed form and the analytic lower
//! bound, and shows how the bound depends on the window half-width δ.
//!
//! ```text
//! cargo run --release --example nonmarkovianity
//! ```

use bathscope::bath::SpectralDensityModel;
use bathscope::qbm::{delta_for_xi, mu_lower_bound, xi_measure, BoundConstant, Environment};
use bathscope::units::OscillatorParams;

fn main() -> bathscope::Result<()> {
    let device = OscillatorParams::paper_device();
    let osc = device.natural();
    let c = device.natural_density_at_resonance();
    let cases = [
        ("ohmic, cutoff 1e7", SpectralDensityModel::OhmicCutoff { c, cutoff: 1e7 }, 0.03),
        ("k=-2.3, delta=1e-3", SpectralDensityModel::paper(c, -2.3, 1e-3, 1e7), 1e-3),
        ("k=-2.3, delta=0.03", SpectralDensityModel::paper(c, -2.3, 0.03, 1e7), 0.03),
    ];
    for (name, model, delta) in cases {
        let env = Environment::new(model, osc)?;
        let a = env.asymptotic_coefficients(delta)?;
        let r = xi_measure(&a.coefficients, osc.mass)?;
        println!(
            "{name:<20} xi {:.4e} (mu route {:.4e}), D_xp {:.4e}, gamma {:.4e}",
            r.xi, r.xi_from_mu, a.coefficients.d_xp, a.coefficients.gamma
        );
    }
    println!("\nlower bound for k = -2.3:");
    for delta in [1e-4, 1e-3, 1e-2, 0.03] {
        let b = mu_lower_bound(-2.3, 1.0, delta, BoundConstant::Asymptotic)?;
        let p = mu_lower_bound(-2.3, 1.0, delta, BoundConstant::Printed)?;
        println!("  delta {delta:<7} xi >= {:.4e}  (with 4/pi^2: {:.4e})", b.xi, p.xi);
    }
    let d = delta_for_xi(-2.3, 1.1e-6, BoundConstant::Asymptotic)?;
    println!("\nwindow half-width giving xi = 1.1e-6: {d:.6} Omega");
    Ok(())
}
