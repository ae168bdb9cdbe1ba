//! Relaxation of the position-momentum covariance to the thermal state.
//!
//! Propagates the covariance of an Ohmic oscillator from the ground state
//! with the time-dependent coefficients and compares the end point with
//! the stationary solution and with equipartition.
//!
//! ```text
//! cargo run --release --example covariance_relaxation
//! ```

use bathscope::bath::SpectralDensityModel;
use bathscope::qbm::{lyapunov_fixed_point, propagate_covariance, CoefficientSchedule, Environment, OdeOptions};
use bathscope::units::{Oscillator, ThermalMode};

fn main() -> bathscope::Result<()> {
    let theta = 50.0;
    let model = SpectralDensityModel::OhmicCutoff {
        c: 0.01,
        cutoff: 10.0,
    };
    let osc = Oscillator::unit(theta);
    let env = Environment::new(model, osc)?.with_thermal(ThermalMode::HighTemperature);
    let a = env.asymptotic_coefficients(0.03)?.coefficients;
    let t_end = 20.0 / a.gamma;
    let grid: Vec<f64> = (0..=100).map(|i| t_end * i as f64 / 100.0).collect();
    let samples = env.coefficients_on(&grid)?;
    let schedule = CoefficientSchedule::Sampled { samples, tail: a };
    let ground = [[1.0, 0.0], [0.0, 1.0]];
    let states = propagate_covariance(&schedule, 1.0, 1.0, ground, &grid, &OdeOptions::default())?;
    let fp = lyapunov_fixed_point(&a, 1.0, 1.0)?;
    println!("{:>10} {:>14} {:>14} {:>14}", "t", "Gamma_xx", "Gamma_xp", "Gamma_pp");
    for s in states.iter().step_by(10) {
        let g = s.gamma_matrix;
        println!("{:>10.2} {:>14.6e} {:>14.6e} {:>14.6e}", s.t, g[0][0], g[0][1], g[1][1]);
    }
    let g = states.last().unwrap().gamma_matrix;
    println!("fixed point  Gamma_xx {:.9e}, Gamma_pp {:.9e}", fp[0][0], fp[1][1]);
    println!(
        "relative gap {:.2e}, {:.2e}",
        g[0][0] / fp[0][0] - 1.0,
        g[1][1] / fp[1][1] - 1.0
    );
    println!(
        "equipartition <p^2> / theta = {:.5}, Omega_r^2 <x^2> / theta = {:.5}",
        0.5 * g[1][1] / theta,
        0.5 * (1.0 + a.delta_omega_sq) * g[0][0] / theta
    );
    Ok(())
}
