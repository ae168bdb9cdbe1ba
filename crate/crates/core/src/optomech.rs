//! Optomechanical readout: cavity steady state, effective susceptibility,
//! noise spectra and the homodyne output spectrum.
//!
//! Laboratory inputs live in [`CavityParams`] (SI). [`Readout`] holds the
//! same setup in the mechanical natural units of [`crate::units`]: rates in
//! units of the mechanical frequency, `m = ħ = k_B = 1`, and position measured
//! in units of the zero-point length `l = sqrt(ħ/(mΩ))`.
//!
//! Spectra are two-sided in angular frequency unless a function says
//! otherwise; `one_sided_*` helpers fold `S(ω) + S(−ω)` onto `ω > 0`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bath::SpectralDensityModel;
use crate::error::{domain, Error, Result};
use crate::units::{OscillatorParams, ThermalMode, HBAR, SPEED_OF_LIGHT};

/// Optical cavity and drive in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityParams {
    /// Amplitude decay rate κ (rad/s).
    pub kappa: f64,
    /// Detuning ω_c − ω_laser (rad/s): bare Δ₀, or the effective Δ when
    /// `locked` is set.
    #[serde(default)]
    pub detuning: f64,
    /// The laser is locked to the shifted cavity, so `detuning` fixes the
    /// effective Δ and Δ₀ follows from the steady state.
    #[serde(default)]
    pub locked: bool,
    /// Cavity length (m).
    pub length: f64,
    /// Cavity resonance ω_c (rad/s).
    pub omega_c: f64,
    /// Input power W (W).
    pub power: f64,
    /// Detection efficiency ζ ∈ (0, 1].
    #[serde(default = "unit_efficiency")]
    pub efficiency: f64,
}

fn unit_efficiency() -> f64 {
    1.0
}

impl CavityParams {
    /// 1064 nm light, 25 mm cavity, κ = 1.3 MHz, 100 µW signal beam,
    /// locked on the shifted resonance, unit detection efficiency.
    pub fn paper() -> Self {
        Self {
            kappa: 1.3e6,
            detuning: 0.0,
            locked: true,
            length: 25e-3,
            omega_c: 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / 1064e-9,
            power: 100e-6,
            efficiency: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.length > 0.0 && self.omega_c > 0.0) {
            return domain("cavity needs kappa, length, omega_c > 0");
        }
        if !(self.power >= 0.0) || !self.detuning.is_finite() {
            return domain(format!(
                "cavity needs power >= 0 and finite detuning (got {}, {})",
                self.power, self.detuning
            ));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return domain(format!("detection efficiency must lie in (0, 1], got {}", self.efficiency));
        }
        Ok(())
    }

    /// Optomechanical coupling g₀ = ω_c / L (rad/s per m).
    pub fn g0(&self) -> f64 {
        self.omega_c / self.length
    }
}

/// `|E| = sqrt(2Wκ/(ħ ω))` for drive power `power`, decay `kappa` and
/// photon angular frequency `omega`.
pub fn drive_amplitude(power: f64, kappa: f64, omega: f64) -> Result<f64> {
    if !(power >= 0.0 && kappa > 0.0 && omega > 0.0) {
        return domain(format!(
            "drive amplitude needs power >= 0, kappa > 0, omega > 0 (got {power}, {kappa}, {omega})"
        ));
    }
    Ok((2.0 * power * kappa / (HBAR * omega)).sqrt())
}

/// Intracavity steady state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavitySteadyState {
    pub alpha_s: Complex64,
    /// Effective detuning Δ.
    pub delta: f64,
    /// Coupling to the dimensionless position, G₀ = g₀ l.
    pub coupling: f64,
    /// All real nonnegative roots of the cubic in `|α_s|²`, ascending.
    pub roots: [Option<f64>; 3],
    pub multistable: bool,
}

impl CavitySteadyState {
    pub fn photon_number(&self) -> f64 {
        self.alpha_s.norm_sqr()
    }
}

/// Selects the exact or the reduced output spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PsdMode {
    /// Prefactor `8θπζG₀²|α_s|²Ω∞/(mκ)`.
    Full,
    /// Free prefactor `c`.
    Reduced { c: f64 },
}

/// Readout chain in mechanical natural units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Readout {
    pub mass: f64,
    /// Renormalised mechanical frequency Ω∞.
    pub omega_inf: f64,
    /// Amplitude damping γ∞ = Ω∞/Q.
    pub gamma_inf: f64,
    pub theta: f64,
    pub kappa: f64,
    pub delta0: f64,
    /// Drive amplitude |E|.
    pub drive: f64,
    /// G₀.
    pub coupling: f64,
    pub efficiency: f64,
    pub thermal: ThermalMode,
}

impl Readout {
    /// Converts laboratory parameters; Ω∞ is taken equal to the bare
    /// frequency and the drive frequency to ω_c.
    pub fn from_si(osc: &OscillatorParams, cav: &CavityParams) -> Result<Self> {
        osc.validate()?;
        cav.validate()?;
        let om = osc.omega;
        let coupling = cav.g0() * osc.zero_point_length() / om;
        let kappa = cav.kappa / om;
        let drive = drive_amplitude(cav.power, cav.kappa, cav.omega_c)? / om;
        let mut delta0 = cav.detuning / om;
        if cav.locked {
            // Δ₀ = Δ + G₀²|α_s|²/Ω∞ with |α_s|² = E²/(κ² + Δ²)
            delta0 += coupling * coupling * drive * drive / (kappa * kappa + delta0 * delta0);
        }
        Ok(Self {
            mass: 1.0,
            omega_inf: 1.0,
            gamma_inf: 1.0 / osc.q,
            theta: osc.thermal_frequency() / om,
            kappa,
            delta0,
            drive,
            coupling,
            efficiency: cav.efficiency,
            thermal: ThermalMode::Quantum,
        })
    }

    /// Same setup with the optical drive switched off.
    pub fn dark(mut self) -> Self {
        self.drive = 0.0;
        self
    }

    /// Solves `α_s = E/(κ + iΔ)`, `Δ = Δ₀ − G₀²|α_s|²/Ω∞`.
    ///
    /// `n = |α_s|²` obeys `n(κ² + (Δ₀ − a n)²) = E²` with `a = G₀²/Ω∞`. The
    /// returned branch is followed continuously from zero drive.
    pub fn steady_state(&self) -> Result<CavitySteadyState> {
        let a = self.coupling * self.coupling / self.omega_inf;
        let e2 = self.drive * self.drive;
        let (k2, d0) = (self.kappa * self.kappa, self.delta0);
        let f = |n: f64, e2: f64| n * (k2 + (d0 - a * n).powi(2)) - e2;
        let df = |n: f64| k2 + (d0 - a * n).powi(2) - 2.0 * a * n * (d0 - a * n);
        let roots = cubic_roots(a * a, -2.0 * a * d0, k2 + d0 * d0, -e2);
        let mut real: Vec<f64> = roots.iter().flatten().copied().filter(|&r| r >= 0.0).collect();
        real.sort_by(f64::total_cmp);
        // follow the branch from zero drive
        let mut n = 0.0;
        let steps = 64;
        for i in 1..=steps {
            let target = e2 * (i as f64 / steps as f64).powi(2);
            for _ in 0..100 {
                let d = df(n);
                if d == 0.0 {
                    break;
                }
                let next = (n - f(n, target) / d).max(0.0);
                let done = (next - n).abs() <= 1e-15 * next.abs().max(1e-300);
                n = next;
                if done {
                    break;
                }
            }
        }
        if let Some(&closest) = real.iter().min_by(|x, y| (*x - n).abs().total_cmp(&(*y - n).abs())) {
            n = closest;
        }
        // polish
        for _ in 0..5 {
            let d = df(n);
            if d != 0.0 {
                n = (n - f(n, e2) / d).max(0.0);
            }
        }
        if !n.is_finite() {
            return Err(Error::Numerical {
                context: "cavity steady state".into(),
                value: n,
                achieved: f64::INFINITY,
            });
        }
        let delta = d0 - a * n;
        let alpha_s = Complex64::new(self.drive, 0.0) / Complex64::new(self.kappa, delta);
        let mut out = [None; 3];
        for (slot, r) in out.iter_mut().zip(real.iter()) {
            *slot = Some(*r);
        }
        Ok(CavitySteadyState {
            alpha_s,
            delta,
            coupling: self.coupling,
            roots: out,
            multistable: real.len() == 3,
        })
    }

    /// Relative residuals of the two defining equations.
    pub fn steady_state_residuals(&self, ss: &CavitySteadyState) -> (f64, f64) {
        let expected = Complex64::new(self.drive, 0.0) / Complex64::new(self.kappa, ss.delta);
        let r_alpha = (ss.alpha_s - expected).norm() / expected.norm().max(1e-300);
        let d = self.delta0 - self.coupling * self.coupling * ss.photon_number() / self.omega_inf;
        let r_delta = (ss.delta - d).abs() / d.abs().max(self.kappa);
        (r_alpha, r_delta)
    }

    /// `χ_eff(ω) = Ω∞ / (Ω∞² + iγ∞ω − ω² − 2G₀²|α_s|²ΔΩ∞/(Δ² + (κ+iω)²))`.
    pub fn susceptibility(&self, w: f64, ss: &CavitySteadyState) -> Result<Complex64> {
        let om = self.omega_inf;
        let kiw = Complex64::new(self.kappa, w);
        let spring = 2.0 * ss.coupling * ss.coupling * ss.photon_number() * ss.delta * om
            / (ss.delta * ss.delta + kiw * kiw);
        let den = Complex64::new(om * om - w * w, self.gamma_inf * w) - spring;
        if den.norm() < 1e-30 * om * om {
            return Err(Error::Singular {
                omega: w,
                magnitude: den.norm(),
            });
        }
        Ok(om / den)
    }

    /// `(S_th, S_rp)` at angular frequency `w` (either sign).
    pub fn noise_spectra(&self, model: &SpectralDensityModel, w: f64, ss: &CavitySteadyState) -> Result<(f64, f64)> {
        if w == 0.0 {
            return domain("noise spectra are evaluated at omega != 0");
        }
        let i = model.density_two_sided(w);
        let s_th = std::f64::consts::PI * i / (self.mass * self.omega_inf) * (self.thermal.coth(w, self.theta) - 1.0);
        let d = ss.delta;
        let s_rp = 2.0 * self.kappa * ss.coupling * ss.coupling * ss.photon_number()
            / (d * d + self.kappa * self.kappa + w * w + 2.0 * d * w);
        Ok((s_th, s_rp))
    }

    /// Two-sided position spectrum `|χ_eff|² (S_th + S_rp)`.
    pub fn position_psd(&self, model: &SpectralDensityModel, w: f64, ss: &CavitySteadyState) -> Result<f64> {
        let chi = self.susceptibility(w, ss)?;
        let (s_th, s_rp) = self.noise_spectra(model, w, ss)?;
        Ok(chi.norm_sqr() * (s_th + s_rp))
    }

    /// `S(ω) + S(−ω)` of the position spectrum, `ω > 0`.
    pub fn one_sided_position_psd(&self, model: &SpectralDensityModel, w: f64, ss: &CavitySteadyState) -> Result<f64> {
        if !(w > 0.0) {
            return domain(format!("one-sided spectrum needs omega > 0, got {w}"));
        }
        Ok(self.position_psd(model, w, ss)? + self.position_psd(model, -w, ss)?)
    }

    /// Conversion from the two-sided position spectrum at `ω > 0` to the
    /// homodyne phase-quadrature spectrum, `4ζG₀²|α_s|²/κ`.
    pub fn homodyne_gain(&self, ss: &CavitySteadyState) -> f64 {
        4.0 * self.efficiency * ss.coupling * ss.coupling * ss.photon_number() / self.kappa
    }

    /// Output spectrum `c · I(ω) / (ω((Ω∞² − ω²)² + (γ∞ω)²))`.
    pub fn output_psd(&self, model: &SpectralDensityModel, w: f64, ss: &CavitySteadyState, mode: PsdMode) -> Result<f64> {
        if !(w > 0.0) {
            return domain(format!("output spectrum needs omega > 0, got {w}"));
        }
        let c = match mode {
            PsdMode::Full => {
                8.0 * self.theta * std::f64::consts::PI * self.efficiency * ss.coupling * ss.coupling * ss.photon_number()
                    * self.omega_inf
                    / (self.mass * self.kappa)
            }
            PsdMode::Reduced { c } => c,
        };
        let om = self.omega_inf;
        let den = (om * om - w * w).powi(2) + (self.gamma_inf * w).powi(2);
        Ok(c * model.density_unchecked(w) / (w * den))
    }

    /// Homodyne spectrum built from the chain `gain · |χ_eff|² (S_th + S_rp)`.
    pub fn chain_output_psd(&self, model: &SpectralDensityModel, w: f64, ss: &CavitySteadyState) -> Result<f64> {
        Ok(self.homodyne_gain(ss) * self.position_psd(model, w, ss)?)
    }
}

/// Real roots of `a x³ + b x² + c x + d` (degenerate leading terms allowed).
pub fn cubic_roots(a: f64, b: f64, c: f64, d: f64) -> [Option<f64>; 3] {
    let scale = a.abs().max(b.abs()).max(c.abs()).max(d.abs());
    if scale == 0.0 {
        return [None; 3];
    }
    if a.abs() <= 1e-300 || a.abs() < 1e-14 * scale && b.abs() < 1e-14 * scale {
        if b.abs() > 1e-300 {
            let disc = c * c - 4.0 * b * d;
            if disc < 0.0 {
                return [None; 3];
            }
            let q = -0.5 * (c + c.signum() * disc.sqrt());
            let r1 = q / b;
            let r2 = if q != 0.0 { d / q } else { r1 };
            return [Some(r1.min(r2)), Some(r1.max(r2)), None];
        }
        return if c != 0.0 { [Some(-d / c), None, None] } else { [None; 3] };
    }
    let (p2, p1, p0) = (b / a, c / a, d / a);
    let q = (3.0 * p1 - p2 * p2) / 9.0;
    let r = (9.0 * p2 * p1 - 27.0 * p0 - 2.0 * p2.powi(3)) / 54.0;
    let disc = q.powi(3) + r * r;
    let shift = -p2 / 3.0;
    let polish = |mut x: f64| {
        for _ in 0..3 {
            let f = ((a * x + b) * x + c) * x + d;
            let df = (3.0 * a * x + 2.0 * b) * x + c;
            if df == 0.0 {
                break;
            }
            x -= f / df;
        }
        x
    };
    if disc > 0.0 {
        let s = disc.sqrt();
        let x = (r + s).cbrt() + (r - s).cbrt() + shift;
        [Some(polish(x)), None, None]
    } else {
        let theta = if q == 0.0 { 0.0 } else { (r / (-q).powf(1.5)).clamp(-1.0, 1.0).acos() };
        let m = 2.0 * (-q).sqrt();
        let mut xs = [0.0; 3];
        for (i, x) in xs.iter_mut().enumerate() {
            *x = polish(m * ((theta + 2.0 * std::f64::consts::PI * i as f64) / 3.0).cos() + shift);
        }
        xs.sort_by(f64::total_cmp);
        [Some(xs[0]), Some(xs[1]), Some(xs[2])]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_readout() -> Readout {
        Readout::from_si(&OscillatorParams::paper_device(), &CavityParams::paper()).unwrap()
    }

    #[test]
    fn drive_amplitude_scaling() {
        assert_eq!(drive_amplitude(0.0, 1.0, 1.0).unwrap(), 0.0);
        let a = drive_amplitude(1e-4, 1.3e6, 5.7e6).unwrap();
        let b = drive_amplitude(4e-4, 1.3e6, 5.7e6).unwrap();
        assert!((b / a - 2.0).abs() < 1e-15);
    }

    #[test]
    fn dark_cavity_is_empty() {
        let r = paper_readout().dark();
        let ss = r.steady_state().unwrap();
        assert_eq!(ss.alpha_s, Complex64::new(0.0, 0.0));
        assert_eq!(ss.delta, r.delta0);
    }

    #[test]
    fn uncoupled_cavity_is_real_and_linear() {
        let mut r = paper_readout();
        r.coupling = 0.0;
        r.delta0 = 0.0;
        let ss = r.steady_state().unwrap();
        assert!((ss.alpha_s.re - r.drive / r.kappa).abs() < 1e-12 * ss.alpha_s.re);
        assert_eq!(ss.alpha_s.im, 0.0);
    }

    #[test]
    fn locked_cavity_sits_on_shifted_resonance() {
        let r = paper_readout();
        let ss = r.steady_state().unwrap();
        assert!(ss.delta.abs() < 1e-12 * r.delta0, "{} {}", ss.delta, r.delta0);
        let unlocked = Readout::from_si(
            &OscillatorParams::paper_device(),
            &CavityParams {
                locked: false,
                ..CavityParams::paper()
            },
        )
        .unwrap();
        assert_eq!(unlocked.delta0, 0.0);
    }

    #[test]
    fn bistable_cubic_reports_three_roots() {
        // strongly red-shifted drive with large coupling
        let r = Readout {
            mass: 1.0,
            omega_inf: 1.0,
            gamma_inf: 1e-3,
            theta: 1.0,
            kappa: 0.1,
            delta0: 2.0,
            drive: 1.2,
            coupling: 0.3,
            efficiency: 1.0,
            thermal: ThermalMode::Quantum,
        };
        let ss = r.steady_state().unwrap();
        assert!(ss.multistable, "{:?}", ss.roots);
        // continuation from zero drive stays on the lowest branch here
        assert_eq!(Some(ss.photon_number()).map(|n| (n - ss.roots[0].unwrap()).abs() < 1e-9), Some(true));
        let (ra, rd) = r.steady_state_residuals(&ss);
        assert!(ra < 1e-10 && rd < 1e-10);
    }

    #[test]
    fn cubic_roots_known_values() {
        // (x-1)(x-2)(x-3)
        let r = cubic_roots(1.0, -6.0, 11.0, -6.0);
        for (got, want) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got.unwrap() - want).abs() < 1e-12);
        }
        let r = cubic_roots(0.0, 0.0, 2.0, -4.0);
        assert_eq!(r[0], Some(2.0));
    }

    #[test]
    fn static_response_without_coupling() {
        let mut r = paper_readout();
        r.coupling = 0.0;
        let ss = r.steady_state().unwrap();
        let chi = r.susceptibility(0.0, &ss).unwrap();
        assert!((chi.re - 1.0 / r.omega_inf).abs() < 1e-15);
    }
}
