//! Physical constants and the SI boundary layer.
//!
//! Everything below this module works in natural units with `ħ = k_B = 1`.
//! Temperatures therefore enter as a *thermal frequency* `θ = k_B T / ħ`,
//! and `coth(ħω / 2k_B T)` becomes `coth(ω / 2θ)`.
//!
//! [`OscillatorParams`] carries laboratory (SI) values. [`OscillatorParams::natural`]
//! rescales them so that the reference mass and the reference angular
//! frequency are both one; spectral densities, kernels and master-equation
//! coefficients are then plain dimensionless numbers.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant (J/K).
pub const K_B: f64 = 1.380_649e-23;
/// Speed of light (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Mechanical oscillator in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillatorParams {
    /// Mass (kg).
    pub mass: f64,
    /// Angular frequency (rad/s).
    pub omega: f64,
    /// Mechanical quality factor.
    pub q: f64,
    /// Bath temperature (K).
    pub temperature: f64,
}

impl OscillatorParams {
    pub fn new(mass: f64, omega: f64, q: f64, temperature: f64) -> Result<Self> {
        let p = Self {
            mass,
            omega,
            q,
            temperature,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mass", self.mass),
            ("omega", self.omega),
            ("q", self.q),
            ("temperature", self.temperature),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return domain(format!("oscillator {name} must be positive and finite, got {v}"));
            }
        }
        Ok(())
    }

    /// Device used in the room-temperature measurement: Ω = 2π·914 kHz,
    /// Q = 215, T = 300 K. The mass is the slab estimate
    /// (150 µm × 50 µm × 1 µm of Si₃N₄ at 3100 kg/m³).
    pub fn paper_device() -> Self {
        Self {
            mass: 2.325e-11,
            omega: 2.0 * std::f64::consts::PI * 914.0e3,
            q: 215.0,
            temperature: 300.0,
        }
    }

    /// Thermal frequency k_B T / ħ (rad/s).
    pub fn thermal_frequency(&self) -> f64 {
        K_B * self.temperature / HBAR
    }

    /// Amplitude damping rate Ω/Q that appears as `(γω)²` in the
    /// Lorentzian denominator of the output spectrum.
    pub fn gamma(&self) -> f64 {
        self.omega / self.q
    }

    /// Zero-point length sqrt(ħ / (mΩ)) (m).
    pub fn zero_point_length(&self) -> f64 {
        (HBAR / (self.mass * self.omega)).sqrt()
    }

    /// The same oscillator in units where m = Ω = ħ = k_B = 1.
    pub fn natural(&self) -> Oscillator {
        Oscillator {
            mass: 1.0,
            omega: 1.0,
            theta: self.thermal_frequency() / self.omega,
        }
    }

    /// Spectral density scale (in natural units) whose Ohmic damping
    /// reproduces this oscillator's Q, i.e. `π I(Ω) / (m Ω) = Ω / Q`.
    pub fn natural_density_at_resonance(&self) -> f64 {
        1.0 / (std::f64::consts::PI * self.q)
    }
}

/// Oscillator in natural units (`ħ = k_B = 1`).
///
/// Fields are free; [`OscillatorParams::natural`] produces the canonical
/// choice `mass = omega = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Oscillator {
    pub mass: f64,
    /// Bare angular frequency.
    pub omega: f64,
    /// Thermal frequency k_B T / ħ.
    pub theta: f64,
}

impl Oscillator {
    pub fn new(mass: f64, omega: f64, theta: f64) -> Result<Self> {
        if !(mass > 0.0 && omega > 0.0 && theta > 0.0) {
            return domain(format!(
                "oscillator requires mass, omega, theta > 0 (got {mass}, {omega}, {theta})"
            ));
        }
        Ok(Self { mass, omega, theta })
    }

    /// Unit mass and frequency at thermal frequency `theta`.
    pub fn unit(theta: f64) -> Self {
        Self {
            mass: 1.0,
            omega: 1.0,
            theta,
        }
    }
}

/// Hyperbolic cotangent of `ω / 2θ` together with its high-temperature limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ThermalMode {
    /// Exact `coth(ω/2θ)`.
    #[default]
    Quantum,
    /// `coth(x) ≈ 1/x`, i.e. `2θ/ω`.
    HighTemperature,
}

impl ThermalMode {
    /// `ω · coth(ω / 2θ)`, finite at ω = 0 (→ 2θ).
    pub fn omega_coth(self, omega: f64, theta: f64) -> f64 {
        match self {
            ThermalMode::HighTemperature => 2.0 * theta,
            ThermalMode::Quantum => 2.0 * theta * x_coth_x(omega / (2.0 * theta)),
        }
    }

    pub fn coth(self, omega: f64, theta: f64) -> f64 {
        match self {
            ThermalMode::HighTemperature => 2.0 * theta / omega,
            ThermalMode::Quantum => 1.0 / (omega / (2.0 * theta)).tanh(),
        }
    }
}

/// `x coth x`, accurate near zero.
pub fn x_coth_x(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 1e-4 {
        1.0 + x * x / 3.0
    } else {
        x / x.tanh()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_device_is_deep_in_the_classical_regime() {
        let osc = OscillatorParams::paper_device().natural();
        // ħΩ/k_B ≈ 44 µK against 300 K
        assert!(osc.theta > 6.0e6 && osc.theta < 7.5e6, "{}", osc.theta);
    }

    #[test]
    fn x_coth_x_is_continuous_across_the_series_switch() {
        let a = x_coth_x(0.999_999e-4);
        let b = x_coth_x(1.000_001e-4);
        assert!((a - b).abs() < 1e-12);
        assert_eq!(x_coth_x(0.0), 1.0);
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        assert!(OscillatorParams::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(OscillatorParams::new(1.0, 1.0, 1.0, -3.0).is_err());
        assert!(Oscillator::new(1.0, 0.0, 1.0).is_err());
    }
}
