//! Time-dependent master-equation coefficients and their long-time limits.
//!
//! For the sub-Ohmic window model at the measured device's temperature,
//! prints γ(t), D_pp(t) and the resonant part of D_xp(t) against their
//! asymptotic values, and the closed-form resonant limit.
//!
//! ```text
//! cargo run --release --example hpz_coefficients
//! ```

use bathscope::bath::SpectralDensityModel;
use bathscope::qbm::{d_xp_resonant_limit, Environment};
use bathscope::units::{Oscillator, OscillatorParams, ThermalMode};

fn main() -> bathscope::Result<()> {
    let device = OscillatorParams::paper_device();
    let i_omega = device.natural_density_at_resonance();
    let theta = device.natural().theta;
    let (k, delta) = (-2.3, 0.03);
    let model = SpectralDensityModel::paper(i_omega, k, delta, 1e7);
    let env = Environment::new(model, Oscillator::unit(theta))?.with_thermal(ThermalMode::HighTemperature);
    let asym = env.asymptotic_coefficients(delta)?;
    let a = asym.coefficients;
    println!("theta = {theta:.4e}, I(Omega) = {i_omega:.6e}, k = {k}, delta = {delta}");
    println!(
        "asymptotic: gamma {:.9e}  D_pp {:.9e}  D_xp {:.6e} (window {:.6e})",
        a.gamma, a.d_pp, a.d_xp, asym.d_xp_res
    );
    println!("{:>8} {:>12} {:>12} {:>14}", "t Omega", "gamma gap", "D_pp gap", "D_xp,res gap");
    for t in [10.0, 100.0, 1000.0, 10000.0, 100000.0] {
        let c = env.coefficients_at(t)?;
        let res = env.resonant_d_xp_at(t, delta)?;
        println!(
            "{t:>8} {:>12.3e} {:>12.3e} {:>14.3e}",
            c.gamma / a.gamma - 1.0,
            c.d_pp / a.d_pp - 1.0,
            res / asym.d_xp_res - 1.0
        );
    }
    let limit = d_xp_resonant_limit(i_omega, 1.0, k, delta, theta)?;
    println!(
        "closed-form window limit: slope {:.6e} + level {:.6e} + remainder {:.6e} = {:.6e}",
        limit.slope,
        limit.level,
        limit.remainder,
        limit.total()
    );
    println!("  (the window quadrature uses the power law itself, the closed form its tangent)");
    Ok(())
}
