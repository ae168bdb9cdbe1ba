//! Bath spectral densities and the kernels derived from them.
//!
//! All quantities are in natural units (`ħ = k_B = 1`); frequencies are
//! usually measured in units of the oscillator's bare frequency. Every model
//! is a finite union of *pieces* that are either affine (`a₀ + a₁ω`) or pure
//! power laws (`cω^k`). Affine pieces get closed-form kernels; power-law
//! pieces go through [`crate::quad`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quad::{self, QuadOptions};
use crate::units::{Oscillator, ThermalMode};

/// Parametric spectral density `I(ω)` for `ω ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpectralDensityModel {
    /// `I(ω) = cω` on `[0, cutoff)`, zero beyond.
    OhmicCutoff { c: f64, cutoff: f64 },
    /// `I(ω) = cω^k` on `[omega_lo, omega_hi]`, zero elsewhere.
    LocalPowerLaw {
        c: f64,
        k: f64,
        omega_lo: f64,
        omega_hi: f64,
    },
    /// Linear outside a window `[Ω-δ, Ω+δ)` around `Ω`, a power law `ω^k`
    /// inside, both pinned to `I(Ω) = i_omega` at `Ω`, hard cutoff at
    /// `cutoff`. The branches do not meet at `Ω ± δ` unless `k = 1`.
    PiecewisePaper {
        i_omega: f64,
        omega: f64,
        k: f64,
        delta: f64,
        cutoff: f64,
    },
    /// Linear interpolation of sorted `[ω, I]` pairs; zero outside the table
    /// in integrals, a domain error for point queries.
    Tabulated { points: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Shape {
    /// `a0 + a1·ω`
    Affine { a0: f64, a1: f64 },
    /// `c·ω^k`
    Power { c: f64, k: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub shape: Shape,
}

impl Piece {
    pub fn density(&self, w: f64) -> f64 {
        match self.shape {
            Shape::Affine { a0, a1 } => a0 + a1 * w,
            Shape::Power { c, k } => c * w.powf(k),
        }
    }

    /// `∫ I(ω)/ω dω` over the piece.
    fn reduced_mass(&self) -> f64 {
        let (lo, hi) = (self.lo, self.hi);
        match self.shape {
            Shape::Affine { a0, a1 } => {
                let log_part = if a0 == 0.0 { 0.0 } else { a0 * (hi / lo).ln() };
                log_part + a1 * (hi - lo)
            }
            Shape::Power { c, k } => {
                if k == 0.0 {
                    c * (hi / lo).ln()
                } else {
                    c * (hi.powf(k) - lo.powf(k)) / k
                }
            }
        }
    }

    /// `∫ |I(ω)| dω` over the piece (a scale for absolute tolerances).
    fn abs_mass(&self) -> f64 {
        let (lo, hi) = (self.lo, self.hi);
        match self.shape {
            Shape::Affine { a0, a1 } => (a0.abs() + 0.5 * a1.abs() * (hi + lo)) * (hi - lo),
            Shape::Power { c, k } => {
                if k == -1.0 {
                    c.abs() * (hi / lo).ln()
                } else {
                    c.abs() * (hi.powf(k + 1.0) - lo.powf(k + 1.0)) / (k + 1.0)
                }
            }
        }
    }
}

/// `sin x − x cos x`, with a series near zero.
fn sin_minus_x_cos(x: f64) -> f64 {
    if x.abs() < 0.05 {
        let x2 = x * x;
        x * x2 * (1.0 / 3.0 - x2 * (1.0 / 30.0 - x2 * (1.0 / 840.0 - x2 / 45_360.0)))
    } else {
        x.sin() - x * x.cos()
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

impl SpectralDensityModel {
    /// Coupling that vanishes identically.
    pub fn zero() -> Self {
        SpectralDensityModel::OhmicCutoff {
            c: 0.0,
            cutoff: 1.0,
        }
    }

    /// The piecewise window model with `Ω = 1`.
    pub fn paper(i_omega: f64, k: f64, delta: f64, cutoff: f64) -> Self {
        SpectralDensityModel::PiecewisePaper {
            i_omega,
            omega: 1.0,
            k,
            delta,
            cutoff,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                domain(format!("{name} must be finite, got {v}"))
            }
        };
        match *self {
            SpectralDensityModel::OhmicCutoff { c, cutoff } => {
                finite("c", c)?;
                if c < 0.0 || !(cutoff > 0.0) || !cutoff.is_finite() {
                    return domain(format!("ohmic model needs c >= 0, cutoff > 0 (got {c}, {cutoff})"));
                }
            }
            SpectralDensityModel::LocalPowerLaw {
                c,
                k,
                omega_lo,
                omega_hi,
            } => {
                finite("c", c)?;
                finite("k", k)?;
                finite("omega_hi", omega_hi)?;
                if c < 0.0 || !(omega_lo > 0.0) || !(omega_hi > omega_lo) {
                    return domain(format!(
                        "power law needs c >= 0 and 0 < omega_lo < omega_hi (got {c}, {omega_lo}, {omega_hi})"
                    ));
                }
            }
            SpectralDensityModel::PiecewisePaper {
                i_omega,
                omega,
                k,
                delta,
                cutoff,
            } => {
                finite("i_omega", i_omega)?;
                finite("k", k)?;
                finite("cutoff", cutoff)?;
                if i_omega < 0.0 || !(omega > 0.0) || !(delta > 0.0 && delta < omega) {
                    return domain(format!(
                        "piecewise model needs i_omega >= 0, omega > 0, 0 < delta < omega (got {i_omega}, {omega}, {delta})"
                    ));
                }
                if !(cutoff > omega + delta) {
                    return domain(format!("cutoff {cutoff} must exceed omega + delta"));
                }
            }
            SpectralDensityModel::Tabulated { ref points } => {
                if points.len() < 2 {
                    return domain("tabulated model needs at least two points");
                }
                for p in points {
                    finite("table entry", p[0])?;
                    finite("table entry", p[1])?;
                    if p[0] < 0.0 || p[1] < 0.0 {
                        return domain(format!("table entry {p:?} must be nonnegative"));
                    }
                }
                if points.windows(2).any(|w| !(w[1][0] > w[0][0])) {
                    return domain("table frequencies must be strictly increasing");
                }
                if points[0][0] == 0.0 && points[0][1] > 0.0 {
                    return domain("I(0) > 0 makes the kernel integrals diverge");
                }
            }
        }
        Ok(())
    }

    pub(crate) fn pieces(&self) -> Vec<Piece> {
        match *self {
            SpectralDensityModel::OhmicCutoff { c, cutoff } => vec![Piece {
                lo: 0.0,
                hi: cutoff,
                shape: Shape::Affine { a0: 0.0, a1: c },
            }],
            SpectralDensityModel::LocalPowerLaw {
                c,
                k,
                omega_lo,
                omega_hi,
            } => vec![Piece {
                lo: omega_lo,
                hi: omega_hi,
                shape: Shape::Power { c, k },
            }],
            SpectralDensityModel::PiecewisePaper {
                i_omega,
                omega,
                k,
                delta,
                cutoff,
            } => {
                let slope = Shape::Affine {
                    a0: 0.0,
                    a1: i_omega / omega,
                };
                vec![
                    Piece {
                        lo: 0.0,
                        hi: omega - delta,
                        shape: slope,
                    },
                    Piece {
                        lo: omega - delta,
                        hi: omega + delta,
                        shape: Shape::Power {
                            c: i_omega / omega.powf(k),
                            k,
                        },
                    },
                    Piece {
                        lo: omega + delta,
                        hi: cutoff,
                        shape: slope,
                    },
                ]
            }
            SpectralDensityModel::Tabulated { ref points } => points
                .windows(2)
                .map(|w| {
                    let a1 = (w[1][1] - w[0][1]) / (w[1][0] - w[0][0]);
                    Piece {
                        lo: w[0][0],
                        hi: w[1][0],
                        shape: Shape::Affine {
                            a0: w[0][1] - a1 * w[0][0],
                            a1,
                        },
                    }
                })
                .collect(),
        }
    }

    /// Piece boundaries, ascending.
    pub fn breakpoints(&self) -> Vec<f64> {
        let pieces = self.pieces();
        let mut out: Vec<f64> = pieces.iter().map(|p| p.lo).collect();
        out.push(pieces.last().map(|p| p.hi).unwrap_or(0.0));
        out
    }

    /// Upper end of the support.
    pub fn support_end(&self) -> f64 {
        self.pieces().last().map(|p| p.hi).unwrap_or(0.0)
    }

    /// `I(ω)` for `ω ≥ 0`. Tabulated models refuse queries outside the table.
    pub fn density(&self, w: f64) -> Result<f64> {
        if !(w >= 0.0) {
            return domain(format!("density needs omega >= 0, got {w}"));
        }
        if let SpectralDensityModel::Tabulated { points } = self {
            let (first, last) = (points[0][0], points[points.len() - 1][0]);
            if w < first || w > last {
                return domain(format!("omega = {w} outside table range [{first}, {last}]"));
            }
        }
        Ok(self.density_unchecked(w))
    }

    /// `I(ω)` with zero outside the support; pieces are closed on the left.
    pub fn density_unchecked(&self, w: f64) -> f64 {
        let pieces = self.pieces();
        for (i, p) in pieces.iter().enumerate() {
            let last = i + 1 == pieces.len();
            let tabulated_end = last && matches!(self, SpectralDensityModel::Tabulated { .. });
            let in_upper = w < p.hi || (tabulated_end && w == p.hi);
            let closed_hi = matches!(self, SpectralDensityModel::LocalPowerLaw { .. });
            if w >= p.lo && (in_upper || (closed_hi && w == p.hi)) {
                return p.density(w);
            }
        }
        0.0
    }

    /// Odd extension `I(-ω) = -I(ω)`.
    pub fn density_two_sided(&self, w: f64) -> f64 {
        if w < 0.0 {
            -self.density_unchecked(-w)
        } else {
            self.density_unchecked(w)
        }
    }

    /// `ν(0) = ∫₀^∞ I(ω)/ω dω`.
    pub fn nu_zero(&self) -> Result<f64> {
        self.validate()?;
        Ok(self.pieces().iter().map(Piece::reduced_mass).sum())
    }

    /// `ν(s) = ∫₀^∞ (I(ω)/ω) cos(ωs) dω`.
    pub fn nu(&self, s: f64, opts: &QuadOptions) -> Result<f64> {
        self.validate()?;
        let mut total = 0.0;
        for p in self.pieces() {
            let (lo, hi) = (p.lo, p.hi);
            total += match p.shape {
                Shape::Affine { a0, a1 } => {
                    let width = hi - lo;
                    let linear = a1 * width * (0.5 * (hi + lo) * s).cos() * sinc(0.5 * width * s);
                    let log_part = if a0 == 0.0 {
                        0.0
                    } else {
                        piece_fourier(&|w: f64| a0 / w, &p, s, opts)?.re
                    };
                    linear + log_part
                }
                Shape::Power { c, k } => {
                    piece_fourier(&|w: f64| c * w.powf(k - 1.0), &p, s, opts)?.re
                }
            };
        }
        Ok(total)
    }

    /// `η(s) = dν/ds = -∫₀^∞ I(ω) sin(ωs) dω`.
    pub fn eta(&self, s: f64, opts: &QuadOptions) -> Result<f64> {
        self.validate()?;
        if s == 0.0 {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for p in self.pieces() {
            let (lo, hi) = (p.lo, p.hi);
            total += match p.shape {
                Shape::Affine { a0, a1 } => {
                    let linear = -a1 * (sin_minus_x_cos(hi * s) - sin_minus_x_cos(lo * s)) / (s * s);
                    let constant = -a0 * (hi - lo) * (0.5 * (hi + lo) * s).sin() * sinc(0.5 * (hi - lo) * s);
                    linear + constant
                }
                Shape::Power { c, k } => -piece_fourier(&|w: f64| c * w.powf(k), &p, s, opts)?.im,
            };
        }
        Ok(total)
    }

    /// One-sided transform `ν̂(ω) = ∫₀^∞ ν(s) e^{-iωs} ds`, evaluated in the
    /// frequency domain: `πI(ω)/(2ω) + iω·PV∫ I(ω')/(ω'(ω'² - ω²)) dω'`.
    pub fn nu_hat(&self, w: f64, opts: &QuadOptions) -> Result<Complex64> {
        self.validate()?;
        if !(w > 0.0) {
            return domain(format!("nu_hat needs omega > 0, got {w}"));
        }
        let re = std::f64::consts::PI * self.density_unchecked(w) / (2.0 * w);
        let im = w * self.pv_reduced(w, opts)?;
        Ok(Complex64::new(re, im))
    }

    /// `η̂(ω) = iω ν̂(ω) − ν(0)`; `η̂(0) = −ν(0)`.
    pub fn eta_hat(&self, w: f64, opts: &QuadOptions) -> Result<Complex64> {
        let nu0 = self.nu_zero()?;
        if w == 0.0 {
            return Ok(Complex64::new(-nu0, 0.0));
        }
        let nh = self.nu_hat(w.abs(), opts)?;
        // ν(s) is real, so ν̂(-ω) = conj ν̂(ω)
        let nh = if w < 0.0 { nh.conj() } else { nh };
        Ok(Complex64::new(0.0, w) * nh - nu0)
    }

    /// `PV ∫₀^∞ I(ω')/(ω'(ω'² − ω²)) dω'`.
    fn pv_reduced(&self, w: f64, opts: &QuadOptions) -> Result<f64> {
        let pieces = self.pieces();
        let scale = w * w;
        let at_break = pieces
            .iter()
            .flat_map(|p| [p.lo, p.hi])
            .any(|b| (b - w).abs() <= 1e-12 * w);
        if at_break {
            return self.pv_near_breakpoint(w, &pieces, opts);
        }
        let mut total = 0.0;
        for p in &pieces {
            let contains = p.lo < w && w < p.hi;
            total += match p.shape {
                Shape::Affine { a0, a1 } => {
                    let lin = |x: f64| -> f64 {
                        // (1/2ω) ln|(x-ω)/(x+ω)|
                        if x == 0.0 {
                            0.0
                        } else if x > w {
                            -(w / x).atanh() / w
                        } else {
                            -(x / w).atanh() / w
                        }
                    };
                    let inv = |x: f64| -> f64 {
                        // (1/ω²)(½ln|x² − ω²| − ln x) = ½ln|1 − (ω/x)²| / ω²
                        let r = w / x;
                        let v = if r < 1.0 {
                            (-r * r).ln_1p()
                        } else {
                            (r * r - 1.0).ln()
                        };
                        0.5 * v / scale
                    };
                    let mut v = a1 * (lin(p.hi) - lin(p.lo));
                    if a0 != 0.0 {
                        v += a0 * (inv(p.hi) - inv(p.lo));
                    }
                    v
                }
                Shape::Power { c, k } => {
                    let f = |x: f64| c * x.powf(k - 1.0) / (x + w);
                    let o = piece_opts(opts, p.reduced_mass().abs() / w.max(p.lo));
                    if contains {
                        quad::principal_value(f, p.lo, p.hi, w, &o)?.value
                    } else {
                        quad::integrate(|x| f(x) / (x - w), p.lo, p.hi, &o)?.value
                    }
                }
            };
        }
        Ok(total)
    }

    fn pv_near_breakpoint(&self, w: f64, pieces: &[Piece], opts: &QuadOptions) -> Result<f64> {
        let jump = (self.density_unchecked(w * (1.0 + 1e-9)) - self.density_unchecked(w * (1.0 - 1e-9))).abs();
        if jump > 1e-6 * self.density_unchecked(w).abs().max(1e-300) {
            return Err(Error::Singular {
                omega: w,
                magnitude: f64::INFINITY,
            });
        }
        let mut edges: Vec<f64> = pieces.iter().flat_map(|p| [p.lo, p.hi]).collect();
        edges.sort_by(f64::total_cmp);
        edges.dedup();
        let left = edges.iter().copied().filter(|&b| b < w * (1.0 - 1e-12)).fold(0.0, f64::max);
        let right = edges
            .iter()
            .copied()
            .filter(|&b| b > w * (1.0 + 1e-12))
            .fold(f64::INFINITY, f64::min);
        let right = if right.is_finite() { right } else { 2.0 * w - left };
        let f = |x: f64| {
            if x <= 0.0 {
                0.0
            } else {
                self.density_unchecked(x) / (x * (x + w))
            }
        };
        let o = piece_opts(opts, self.nu_zero()?.abs() / w);
        let mut total = quad::principal_value(f, left, right, w, &o)?.value;
        let mut rest: Vec<f64> = edges.iter().copied().filter(|&b| b < left).collect();
        rest.push(left);
        total += quad::integrate_with_breaks(|x| f(x) / (x - w), &rest, &o)?.value;
        let mut upper = vec![right];
        upper.extend(edges.iter().copied().filter(|&b| b > right));
        total += quad::integrate_with_breaks(|x| f(x) / (x - w), &upper, &o)?.value;
        Ok(total)
    }
}

fn piece_opts(opts: &QuadOptions, scale: f64) -> QuadOptions {
    QuadOptions {
        abs_tol: opts.abs_tol.max(opts.rel_tol * scale * 1e-3),
        ..*opts
    }
}

/// `∫_piece f(ω) e^{iωs} dω`.
fn piece_fourier<F: Fn(f64) -> f64>(f: &F, p: &Piece, s: f64, opts: &QuadOptions) -> Result<Complex64> {
    let scale = match p.shape {
        Shape::Affine { a0, .. } => a0.abs() * (p.hi / p.lo).ln(),
        Shape::Power { .. } => p.reduced_mass().abs().max(p.abs_mass() / p.hi),
    };
    quad::fourier(f, p.lo, p.hi, s, 0.0, 0.0, &piece_opts(opts, scale))
}

/// `G̃(ω) = 1 / (Ω² − ω² + 2η̂(ω)/m)`.
pub fn greens_fourier(
    model: &SpectralDensityModel,
    osc: &Oscillator,
    w: f64,
    opts: &QuadOptions,
) -> Result<Complex64> {
    let eh = model.eta_hat(w, opts)?;
    let den = Complex64::new(osc.omega * osc.omega - w * w, 0.0) + 2.0 * eh / osc.mass;
    let natural = osc.omega * osc.omega;
    if den.norm() < 1e-30 * natural {
        return Err(Error::Singular {
            omega: w,
            magnitude: den.norm(),
        });
    }
    Ok(1.0 / den)
}

/// Renormalised frequency squared `K² = Ω² − 2ν(0)/m`.
pub fn k_squared(model: &SpectralDensityModel, osc: &Oscillator) -> Result<f64> {
    let k2 = osc.omega * osc.omega - 2.0 * model.nu_zero()? / osc.mass;
    if k2 <= 0.0 {
        return Err(Error::Unphysical { k_squared: k2 });
    }
    Ok(k2)
}

/// Dimensionless weak-coupling diagnostics at the renormalised frequency K.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakCouplingReport {
    pub k: f64,
    /// `|(2/m) ∂ω ν̂(ω)|` at `ω = K`.
    pub slope_ratio: f64,
    /// `|ν̂(K)/m| / K`.
    pub shift_ratio: f64,
    pub threshold: f64,
    pub slope_ok: bool,
    pub shift_ok: bool,
}

impl WeakCouplingReport {
    pub fn passes(&self) -> bool {
        self.slope_ok && self.shift_ok
    }
}

pub fn weak_coupling_report(
    model: &SpectralDensityModel,
    osc: &Oscillator,
    threshold: f64,
    opts: &QuadOptions,
) -> Result<WeakCouplingReport> {
    let k = k_squared(model, osc)?.sqrt();
    let h = 1e-4 * k;
    let dnu = (model.nu_hat(k + h, opts)? - model.nu_hat(k - h, opts)?) / (2.0 * h);
    let slope_ratio = (2.0 / osc.mass * dnu).norm();
    let shift_ratio = (model.nu_hat(k, opts)? / osc.mass).norm() / k;
    Ok(WeakCouplingReport {
        k,
        slope_ratio,
        shift_ratio,
        threshold,
        slope_ok: slope_ratio < threshold,
        shift_ok: shift_ratio < threshold,
    })
}

/// Spectral weight of the thermal force correlator at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalForcePsd {
    /// `½ I(ω)(coth(ω/2θ) − 1)`, or its high-temperature form.
    pub value: f64,
    /// Leading high-temperature term `θ I(ω)/ω`.
    pub leading: f64,
}

/// Thermal force spectrum at frequency `w` (either sign, odd extension of `I`).
pub fn thermal_force_psd(
    model: &SpectralDensityModel,
    theta: f64,
    w: f64,
    mode: ThermalMode,
) -> Result<ThermalForcePsd> {
    if !(theta > 0.0) {
        return domain(format!("thermal frequency must be positive, got {theta}"));
    }
    if w == 0.0 {
        return domain("thermal force spectrum is evaluated at omega != 0");
    }
    let i = model.density_two_sided(w);
    let value = 0.5 * i * (mode.coth(w, theta) - 1.0);
    Ok(ThermalForcePsd {
        value,
        leading: theta * i / w,
    })
}
