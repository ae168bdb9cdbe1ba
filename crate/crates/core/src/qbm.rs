//! Weak-coupling quantum Brownian motion.
//!
//! Master-equation coefficients are computed in the frequency domain: the
//! time integrals over the kernels are done analytically first, leaving
//!
//! ```text
//! γ(t)   = (1/2Ω) ∫ I   [S_t(ω-Ω) − S_t(ω+Ω)] dω
//! D_pp(t) = ½      ∫ I·c [S_t(ω-Ω) + S_t(ω+Ω)] dω
//! δΩ²(t) = −       ∫ I   [C_t(ω+Ω) + C_t(ω-Ω)] dω
//! D_xp(t) = (1/2Ω) ∫ I·c [C_t(ω+Ω) − C_t(ω-Ω)] dω
//! ```
//!
//! with `S_t(u) = sin(ut)/u`, `C_t(u) = (1 − cos ut)/u` and `c = coth(ω/2θ)`.
//! Near `ω = Ω` the integrands are evaluated in their bounded sinc form;
//! elsewhere the oscillatory part goes through [`quad::fourier`].

use num_complex::Complex64;
use rayon::prelude::*;

use crate::bath::SpectralDensityModel;
use crate::error::{domain, Error, Result};
use crate::quad::{self, QuadOptions};
use crate::units::{Oscillator, ThermalMode};

/// Master-equation coefficients at one time (natural units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QbmCoefficients {
    pub t: f64,
    pub gamma: f64,
    pub delta_omega_sq: f64,
    pub d_pp: f64,
    pub d_xp: f64,
}

impl QbmCoefficients {
    pub fn zero(t: f64) -> Self {
        Self {
            t,
            gamma: 0.0,
            delta_omega_sq: 0.0,
            d_pp: 0.0,
            d_xp: 0.0,
        }
    }
}

/// Long-time coefficients with the window split of `D_xp`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Asymptotics {
    pub coefficients: QbmCoefficients,
    /// Principal value over `(Ω−δ, Ω+δ)`.
    pub d_xp_res: f64,
    /// Remainder of the support.
    pub d_xp_off: f64,
    pub delta: f64,
}

/// Oscillator plus bath: everything the coefficients depend on.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub model: SpectralDensityModel,
    pub osc: Oscillator,
    pub thermal: ThermalMode,
    pub quad: QuadOptions,
}

impl Environment {
    pub fn new(model: SpectralDensityModel, osc: Oscillator) -> Result<Self> {
        model.validate()?;
        Oscillator::new(osc.mass, osc.omega, osc.theta)?;
        Ok(Self {
            model,
            osc,
            thermal: ThermalMode::Quantum,
            quad: QuadOptions::default().with_rel_tol(1e-10),
        })
    }

    pub fn with_thermal(mut self, thermal: ThermalMode) -> Self {
        self.thermal = thermal;
        self
    }

    fn dissipation_weight(&self, w: f64) -> f64 {
        self.model.density_unchecked(w)
    }

    /// `I(ω) coth(ω/2θ)`, finite at ω = 0.
    fn noise_weight(&self, w: f64) -> f64 {
        let w = w.max(1e-300);
        self.model.density_unchecked(w) / w * self.thermal.omega_coth(w, self.osc.theta)
    }

    fn breaks(&self) -> Vec<f64> {
        self.model.breakpoints()
    }

    /// Coefficients at time `t ≥ 0`.
    pub fn coefficients_at(&self, t: f64) -> Result<QbmCoefficients> {
        if !(t >= 0.0 && t.is_finite()) {
            return domain(format!("coefficients need finite t >= 0, got {t}"));
        }
        if t == 0.0 {
            return Ok(QbmCoefficients::zero(0.0));
        }
        let om = self.osc.omega;
        let breaks = self.breaks();
        let gd = |w: f64| self.dissipation_weight(w);
        let gn = |w: f64| self.noise_weight(w);
        let q = &self.quad;
        let (sd_minus, cd_minus) = oscillatory_pair(&gd, &breaks, om, t, q)?;
        let (sd_plus, cd_plus) = oscillatory_pair(&gd, &breaks, -om, t, q)?;
        let (sn_minus, cn_minus) = oscillatory_pair(&gn, &breaks, om, t, q)?;
        let (sn_plus, cn_plus) = oscillatory_pair(&gn, &breaks, -om, t, q)?;
        Ok(QbmCoefficients {
            t,
            gamma: (sd_minus - sd_plus) / (2.0 * om),
            delta_omega_sq: -(cd_plus + cd_minus),
            d_pp: 0.5 * (sn_minus + sn_plus),
            d_xp: (cn_plus - cn_minus) / (2.0 * om),
        })
    }

    /// Coefficients on a grid of times, evaluated in parallel.
    pub fn coefficients_on(&self, times: &[f64]) -> Result<Vec<QbmCoefficients>> {
        times.par_iter().map(|&t| self.coefficients_at(t)).collect()
    }

    /// `t → ∞` limits; `D_xp` is split at `Ω ± delta`.
    pub fn asymptotic_coefficients(&self, delta: f64) -> Result<Asymptotics> {
        let om = self.osc.omega;
        if !(delta > 0.0 && delta < om) {
            return domain(format!("window half-width must lie in (0, Ω), got {delta}"));
        }
        let gamma = std::f64::consts::PI * self.dissipation_weight(om) / (2.0 * om);
        let d_pp = 0.5 * std::f64::consts::PI * self.noise_weight(om);
        let breaks = self.breaks();
        let q = &self.quad;
        let delta_omega_sq = -pv_over(&|w| self.dissipation_weight(w) * 2.0 * w / (w + om), &breaks, om, q)?;

        // D_xp = PV ∫ I c / (Ω² − ω²) = −PV ∫ [I c / (ω + Ω)] / (ω − Ω)
        let h = |w: f64| -self.noise_weight(w) / (w + om);
        let (lo, hi) = (om - delta, om + delta);
        let d_xp_res = quad::principal_value(h, lo, hi, om, &window_opts(q, h(om).abs()))?.value;
        let end = self.model.support_end();
        let mut below: Vec<f64> = breaks.iter().copied().filter(|&b| b < lo).collect();
        below.push(lo.min(end));
        let mut above = vec![hi];
        above.extend(breaks.iter().copied().filter(|&b| b > hi));
        let off_scale = self.noise_weight(om).abs() + 1e-300;
        let o = window_opts(q, off_scale);
        let f = |w: f64| h(w) / (w - om);
        let d_xp_off = geometric_integral(&f, &below, om, &o)? + geometric_integral(&f, &above, om, &o)?;
        Ok(Asymptotics {
            coefficients: QbmCoefficients {
                t: f64::INFINITY,
                gamma,
                delta_omega_sq,
                d_pp,
                d_xp: d_xp_res + d_xp_off,
            },
            d_xp_res,
            d_xp_off,
            delta,
        })
    }

    /// Contribution of `(Ω−δ, Ω+δ)` to `D_xp(t)`; tends to
    /// [`Asymptotics::d_xp_res`] as `t → ∞`. The density must be smooth
    /// inside the window.
    pub fn resonant_d_xp_at(&self, t: f64, delta: f64) -> Result<f64> {
        let om = self.osc.omega;
        if !(delta > 0.0 && delta < om) {
            return domain(format!("window half-width must lie in (0, Ω), got {delta}"));
        }
        if !(t > 0.0 && t.is_finite()) {
            return domain(format!("need finite t > 0, got {t}"));
        }
        let (lo, hi) = (om - delta, om + delta);
        let gn = |w: f64| {
            if w < lo || w > hi {
                0.0
            } else {
                self.noise_weight(w)
            }
        };
        let breaks = [lo, hi];
        let (_, cn_minus) = oscillatory_pair(&gn, &breaks, om, t, &self.quad)?;
        let (_, cn_plus) = oscillatory_pair(&gn, &breaks, -om, t, &self.quad)?;
        Ok((cn_plus - cn_minus) / (2.0 * om))
    }
}

fn window_opts(q: &QuadOptions, scale: f64) -> QuadOptions {
    QuadOptions {
        abs_tol: q.abs_tol.max(q.rel_tol * scale * 1e-2),
        ..*q
    }
}

/// `∫ f` over consecutive `points`, each segment refined geometrically
/// toward `anchor`.
fn geometric_integral<F: Fn(f64) -> f64>(f: &F, points: &[f64], anchor: f64, opts: &QuadOptions) -> Result<f64> {
    let mut total = 0.0;
    for w in points.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let pts = quad::geometric_panels(w[0], w[1], anchor);
        total += quad::integrate_with_breaks(f, &pts, opts)?.value;
    }
    Ok(total)
}

/// `PV ∫ h(ω)/(ω − pole) dω` over the span of `breaks`, with `h` smooth on
/// each segment.
pub(crate) fn pv_over<F: Fn(f64) -> f64>(h: &F, breaks: &[f64], pole: f64, opts: &QuadOptions) -> Result<f64> {
    let f = |w: f64| h(w) / (w - pole);
    let scale = h(pole).abs().max(1e-300);
    let o = window_opts(opts, scale);
    let tol = 1e-12 * pole.abs().max(1.0);
    let mut total = 0.0;
    let mut segs: Vec<(f64, f64)> = breaks.windows(2).map(|w| (w[0], w[1])).filter(|s| s.1 > s.0).collect();
    // merge segments that meet at the pole
    if let Some(i) = segs.iter().position(|s| (s.1 - pole).abs() <= tol) {
        if i + 1 < segs.len() {
            let jump = (h(pole * (1.0 + 1e-10)) - h(pole * (1.0 - 1e-10))).abs();
            if jump > 1e-6 * scale {
                return Err(Error::Singular {
                    omega: pole,
                    magnitude: f64::INFINITY,
                });
            }
            let merged = (segs[i].0, segs[i + 1].1);
            segs.splice(i..=i + 1, [merged]);
        }
    }
    for (a, b) in segs {
        if a < pole - tol && pole + tol < b {
            let r = (pole - a).min(b - pole);
            total += quad::integrate(|u: f64| (h(pole + u) - h(pole - u)) / u, 0.0, r, &o)?.value;
            if pole - r > a {
                total += geometric_integral(&f, &[a, pole - r], pole, &o)?;
            }
            if pole + r < b {
                total += geometric_integral(&f, &[pole + r, b], pole, &o)?;
            }
        } else if (a - pole).abs() <= tol || (b - pole).abs() <= tol {
            return Err(Error::Singular {
                omega: pole,
                magnitude: f64::INFINITY,
            });
        } else {
            total += geometric_integral(&f, &[a, b], pole, &o)?;
        }
    }
    Ok(total)
}

/// `(∫ g sin(t(ω−p))/(ω−p), ∫ g (1 − cos(t(ω−p)))/(ω−p))` over the span of
/// `breaks`, for `g` smooth on each segment.
fn oscillatory_pair<F: Fn(f64) -> f64>(
    g: &F,
    breaks: &[f64],
    p: f64,
    t: f64,
    opts: &QuadOptions,
) -> Result<(f64, f64)> {
    let near_r = if p > 0.0 { (0.5 * p).min(20.0 / t) } else { 0.0 };
    let scale = integrand_scale(g, breaks, p, near_r.max(1.0 / t));
    let o = QuadOptions {
        abs_tol: opts.abs_tol.max(opts.rel_tol * scale),
        ..*opts
    };
    let mut s_total = 0.0;
    let mut c_total = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let mut far: Vec<(f64, f64)> = Vec::new();
        if near_r > 0.0 {
            let (na, nb) = (a.max(p - near_r), b.min(p + near_r));
            if nb > na {
                let pieces = ((t * (nb - na) / std::f64::consts::PI).ceil() as usize).max(1);
                let pts: Vec<f64> = (0..=pieces).map(|i| na + (nb - na) * i as f64 / pieces as f64).collect();
                s_total += quad::integrate_with_breaks(
                    |x| {
                        let u = x - p;
                        g(x) * t * sinc(t * u)
                    },
                    &pts,
                    &o,
                )?
                .value;
                c_total += quad::integrate_with_breaks(
                    |x| {
                        let u = x - p;
                        g(x) * t * (0.5 * t * u).sin() * sinc(0.5 * t * u)
                    },
                    &pts,
                    &o,
                )?
                .value;
                if a < na {
                    far.push((a, na));
                }
                if nb < b {
                    far.push((nb, b));
                }
            } else {
                far.push((a, b));
            }
        } else {
            far.push((a, b));
        }
        for (fa, fb) in far {
            let h = |x: f64| g(x) / (x - p);
            let osc = quad::fourier(h, fa, fb, t, p, p, &o)?;
            let plain = geometric_integral(&h, &[fa, fb], p, &o)?;
            s_total += osc.im;
            c_total += plain - osc.re;
        }
    }
    Ok((s_total, c_total))
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Rough `∫ |g(ω)| / (|ω − p| + r) dω`, used to set absolute tolerances.
fn integrand_scale<F: Fn(f64) -> f64>(g: &F, breaks: &[f64], p: f64, r: f64) -> f64 {
    let mut total = 0.0;
    for w in breaks.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let anchor = if p > w[0] && p < w[1] { p } else { p.clamp(w[0], w[1]) };
        let pts = quad::geometric_panels(w[0], w[1], anchor);
        for s in pts.windows(2) {
            let m = 0.5 * (s[0] + s[1]);
            total += g(m).abs() * (s[1] - s[0]) / ((m - p).abs() + r);
        }
    }
    total.max(1e-300)
}

/// Closed-form high-temperature `D_xp` over the window `(Ω−δ, Ω+δ)` for the
/// tangent (affine) approximation of `I_Ω(ω/Ω)^k` at `Ω`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonantLimit {
    /// `I_Ω θ/Ω² · (1−k) ln((Ω+δ)/(Ω−δ))`
    pub slope: f64,
    /// `I_Ω θ/Ω² · ln((Ω−δ/2)(Ω+δ)/((Ω+δ/2)(Ω−δ)))`
    pub level: f64,
    /// `I_Ω θ/Ω² · k ln((Ω+δ/2)²(Ω−δ)/((Ω−δ/2)²(Ω+δ)))`, third order in δ.
    pub remainder: f64,
}

impl ResonantLimit {
    /// Slope plus level term.
    pub fn leading(&self) -> f64 {
        self.slope + self.level
    }

    /// All three terms; exact for the affine integrand.
    pub fn total(&self) -> f64 {
        self.slope + self.level + self.remainder
    }
}

pub fn d_xp_resonant_limit(i_omega: f64, omega: f64, k: f64, delta: f64, theta: f64) -> Result<ResonantLimit> {
    if !(delta > 0.0 && delta < omega) {
        return domain(format!("need 0 < delta < omega, got delta = {delta}, omega = {omega}"));
    }
    let pref = i_omega * theta / (omega * omega);
    let a = 2.0 * (delta / omega).atanh();
    let b = 2.0 * (0.5 * delta / omega).atanh();
    Ok(ResonantLimit {
        slope: pref * (1.0 - k) * a,
        level: pref * (a - b),
        remainder: pref * k * (2.0 * b - a),
    })
}

/// Ξ(∞), its spectrum and the measure ξ by both routes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiReport {
    pub xi_matrix: [[Complex64; 2]; 2],
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub op_norm: f64,
    /// `max(0, −λ_min/‖Ξ‖)`.
    pub xi: f64,
    /// `((1+μ)^½ − 1)/((1+μ)^½ + 1)`.
    pub xi_from_mu: f64,
    pub mu: f64,
}

/// `Ξ = [[2M D_pp, D_xp + iγ], [D_xp − iγ, 0]]`.
pub fn xi_matrix(c: &QbmCoefficients, mass: f64) -> [[Complex64; 2]; 2] {
    let z = Complex64::new(c.d_xp, c.gamma);
    [
        [Complex64::new(2.0 * mass * c.d_pp, 0.0), z],
        [z.conj(), Complex64::new(0.0, 0.0)],
    ]
}

pub fn xi_from_mu(mu: f64) -> f64 {
    let s = (1.0 + mu).sqrt();
    mu / ((s + 1.0) * (s + 1.0))
}

pub fn xi_measure(c: &QbmCoefficients, mass: f64) -> Result<XiReport> {
    if !(c.d_pp > 0.0) {
        return domain(format!("xi needs D_pp > 0, got {}", c.d_pp));
    }
    let m = xi_matrix(c, mass);
    let a = m[0][0].re;
    let z2 = m[0][1].norm_sqr();
    let lambda_max = 0.5 * a + (0.5 * a).hypot(z2.sqrt());
    let lambda_min = -z2 / lambda_max;
    let op_norm = lambda_max.abs().max(lambda_min.abs());
    let xi = if lambda_min >= 0.0 { 0.0 } else { -lambda_min / op_norm };
    let mu = z2 / (mass * mass * c.d_pp * c.d_pp);
    Ok(XiReport {
        xi_matrix: m,
        lambda_min,
        lambda_max,
        op_norm,
        xi,
        xi_from_mu: xi_from_mu(mu),
        mu,
    })
}

/// Constant in front of `(1−k)² ln²((Ω+δ)/(Ω−δ))` in the μ bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundConstant {
    /// `1/π²`, the value implied by `D_xp ≥ I θ (1−k) L/Ω²` and
    /// `D_pp = π I θ/Ω` at high temperature.
    #[default]
    Asymptotic,
    /// `4/π²`.
    Printed,
}

impl BoundConstant {
    pub fn value(self) -> f64 {
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        match self {
            BoundConstant::Asymptotic => 1.0 / pi2,
            BoundConstant::Printed => 4.0 / pi2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuBound {
    pub mu: f64,
    pub xi: f64,
}

pub fn mu_lower_bound(k: f64, omega: f64, delta: f64, constant: BoundConstant) -> Result<MuBound> {
    if !(delta > 0.0 && delta < omega) {
        return domain(format!("need 0 < delta < omega, got delta = {delta}, omega = {omega}"));
    }
    let l = 2.0 * (delta / omega).atanh();
    let mu = constant.value() * (1.0 - k) * (1.0 - k) * l * l;
    Ok(MuBound { mu, xi: xi_from_mu(mu) })
}

/// Window half-width (in units of Ω) at which the μ bound for exponent `k`
/// gives exactly `xi`.
pub fn delta_for_xi(k: f64, xi: f64, constant: BoundConstant) -> Result<f64> {
    if !(xi > 0.0 && xi < 1.0) || k == 1.0 {
        return domain(format!("need 0 < xi < 1 and k != 1 (got xi = {xi}, k = {k})"));
    }
    let s = (1.0 + xi) / (1.0 - xi);
    let mu = s * s - 1.0;
    let l = (mu / constant.value()).sqrt() / (1.0 - k).abs();
    Ok((0.5 * l).tanh())
}

/// Matrix `h_R` of the renormalised Hamiltonian `(x p) h_R (x p)ᵀ`,
/// including the symmetrised `γ(xp+px)/2` piece of the damping term.
pub fn hamiltonian_matrix(c: &QbmCoefficients, mass: f64, omega: f64) -> [[f64; 2]; 2] {
    let wr2 = omega * omega + c.delta_omega_sq;
    [[0.5 * mass * wr2, 0.5 * c.gamma], [0.5 * c.gamma, 0.5 / mass]]
}

/// Drift `h` and diffusion `D` of the covariance equation.
pub fn drift_and_diffusion(c: &QbmCoefficients, mass: f64, omega: f64) -> ([[f64; 2]; 2], [[f64; 2]; 2]) {
    let wr2 = omega * omega + c.delta_omega_sq;
    (
        [[0.0, -1.0 / mass], [mass * wr2, 2.0 * c.gamma]],
        [[0.0, -c.d_xp], [-c.d_xp, 2.0 * mass * c.d_pp]],
    )
}

/// Largest absolute deviation between `(hᵀ, D)` and `((2h_R − im Ξ)σ, σᵀ re Ξ σ)`.
pub fn xi_matrix_consistency(c: &QbmCoefficients, mass: f64, omega: f64, h_r: &[[f64; 2]; 2]) -> f64 {
    let xi = xi_matrix(c, mass);
    let sigma = [[0.0, 1.0], [-1.0, 0.0]];
    let mul = |a: [[f64; 2]; 2], b: [[f64; 2]; 2]| {
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        out
    };
    let mut lhs = [[0.0; 2]; 2];
    let mut re = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            lhs[i][j] = 2.0 * h_r[i][j] - xi[i][j].im;
            re[i][j] = xi[i][j].re;
        }
    }
    let h_t = mul(lhs, sigma);
    let sigma_t = [[0.0, -1.0], [1.0, 0.0]];
    let d = mul(mul(sigma_t, re), sigma);
    let (h, d_direct) = drift_and_diffusion(c, mass, omega);
    let mut worst: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            worst = worst.max((h_t[i][j] - h[j][i]).abs());
            worst = worst.max((d[i][j] - d_direct[i][j]).abs());
        }
    }
    worst
}

/// `Γ = [[2⟨x²⟩, ⟨xp+px⟩], [⟨xp+px⟩, 2⟨p²⟩]]` at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceState {
    pub t: f64,
    pub gamma_matrix: [[f64; 2]; 2],
}

/// Where the propagator takes its coefficients from.
#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientSchedule {
    Constant(QbmCoefficients),
    /// Linear interpolation between samples (sorted by `t`), `tail` after
    /// the last one.
    Sampled {
        samples: Vec<QbmCoefficients>,
        tail: QbmCoefficients,
    },
}

impl CoefficientSchedule {
    pub fn at(&self, t: f64) -> QbmCoefficients {
        match self {
            CoefficientSchedule::Constant(c) => QbmCoefficients { t, ..*c },
            CoefficientSchedule::Sampled { samples, tail } => {
                let Some(last) = samples.last() else {
                    return QbmCoefficients { t, ..*tail };
                };
                if t >= last.t {
                    return QbmCoefficients { t, ..*tail };
                }
                let i = samples.partition_point(|s| s.t <= t);
                if i == 0 {
                    return QbmCoefficients { t, ..samples[0] };
                }
                let (a, b) = (&samples[i - 1], &samples[i]);
                let w = (t - a.t) / (b.t - a.t);
                let lerp = |x: f64, y: f64| x + w * (y - x);
                QbmCoefficients {
                    t,
                    gamma: lerp(a.gamma, b.gamma),
                    delta_omega_sq: lerp(a.delta_omega_sq, b.delta_omega_sq),
                    d_pp: lerp(a.d_pp, b.d_pp),
                    d_xp: lerp(a.d_xp, b.d_xp),
                }
            }
        }
    }
}

/// Tolerances for the Dormand–Prince integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rel_tol: f64,
    /// Absolute tolerance relative to the largest entry of Γ.
    pub abs_tol_scale: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol_scale: 1e-12,
            max_steps: 50_000_000,
        }
    }
}

/// Right-hand side of `dΓ/dt = −hΓ − Γhᵀ + 2D` on `(Γ₁₁, Γ₁₂, Γ₂₂)`.
///
/// The diffusion enters with a factor two so that the stationary state of
/// an Ohmic bath is the thermal state `2⟨p²⟩ = MΩ coth(Ω/2θ)`.
fn covariance_rhs(c: &QbmCoefficients, mass: f64, omega: f64, y: &[f64; 3]) -> [f64; 3] {
    let wr2 = omega * omega + c.delta_omega_sq;
    let [g11, g12, g22] = *y;
    [
        2.0 * g12 / mass,
        g22 / mass - mass * wr2 * g11 - 2.0 * c.gamma * g12 - 2.0 * c.d_xp,
        -2.0 * mass * wr2 * g12 - 4.0 * c.gamma * g22 + 4.0 * mass * c.d_pp,
    ]
}

/// Stationary solution of the covariance equation for constant coefficients.
pub fn lyapunov_fixed_point(c: &QbmCoefficients, mass: f64, omega: f64) -> Result<[[f64; 2]; 2]> {
    let wr2 = omega * omega + c.delta_omega_sq;
    if !(c.gamma > 0.0) || !(wr2 > 0.0) {
        return domain(format!(
            "no stationary state for gamma = {}, Omega_r^2 = {wr2}",
            c.gamma
        ));
    }
    let g22 = mass * c.d_pp / c.gamma;
    let g11 = (g22 / mass - 2.0 * c.d_xp) / (mass * wr2);
    Ok([[g11, 0.0], [0.0, g22]])
}

const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates the covariance equation and reports Γ at each time in `t_grid`.
pub fn propagate_covariance(
    schedule: &CoefficientSchedule,
    mass: f64,
    omega: f64,
    gamma0: [[f64; 2]; 2],
    t_grid: &[f64],
    opts: &OdeOptions,
) -> Result<Vec<CovarianceState>> {
    if t_grid.is_empty() {
        return Ok(Vec::new());
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) || !(t_grid[0] >= 0.0) {
        return domain("time grid must be nonnegative and strictly increasing");
    }
    let asym = (gamma0[0][1] - gamma0[1][0]).abs();
    let scale0 = gamma0.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if asym > 1e-12 * scale0.max(1e-300) {
        return domain(format!("initial covariance is not symmetric (|Γ12 − Γ21| = {asym:e})"));
    }
    let mut y = [gamma0[0][0], 0.5 * (gamma0[0][1] + gamma0[1][0]), gamma0[1][1]];
    let mut t = t_grid[0];
    let mut h = 1e-2 / omega;
    let mut out = Vec::with_capacity(t_grid.len());
    let mut steps = 0usize;
    let rhs = |t: f64, y: &[f64; 3]| covariance_rhs(&schedule.at(t), mass, omega, y);
    let mut k1 = rhs(t, &y);
    for &target in t_grid {
        while t < target {
            if steps >= opts.max_steps {
                return Err(Error::Numerical {
                    context: "covariance propagation exceeded the step budget".into(),
                    value: t,
                    achieved: f64::NAN,
                });
            }
            let last = target - t <= h;
            let step = if last { target - t } else { h };
            if step < 1e-14 * t.abs().max(1.0) && !last {
                return Err(Error::Numerical {
                    context: "covariance step size underflow".into(),
                    value: t,
                    achieved: step,
                });
            }
            let mut k = [[0.0; 3]; 7];
            k[0] = k1;
            for s in 1..7 {
                let mut ys = y;
                for (j, kj) in k.iter().enumerate().take(s) {
                    for i in 0..3 {
                        ys[i] += step * DP_A[s][j] * kj[i];
                    }
                }
                k[s] = rhs(t + DP_C[s] * step, &ys);
            }
            let mut y_new = y;
            let mut err = [0.0; 3];
            for i in 0..3 {
                for s in 0..7 {
                    y_new[i] += step * DP_B[s] * k[s][i];
                    err[i] += step * DP_E[s] * k[s][i];
                }
            }
            let scale = y.iter().chain(y_new.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
            let atol = opts.abs_tol_scale * scale.max(1e-300);
            let mut e: f64 = 0.0;
            for i in 0..3 {
                let sc = atol + opts.rel_tol * y[i].abs().max(y_new[i].abs());
                e = e.max((err[i] / sc).abs());
            }
            steps += 1;
            if e <= 1.0 {
                t = if last { target } else { t + step };
                y = y_new;
                k1 = k[6];
                let factor = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
                if !last {
                    h = step * factor;
                } else {
                    h = h.max(step * factor.min(1.0));
                }
            } else {
                h = step * (0.9 * e.powf(-0.2)).clamp(0.1, 1.0);
            }
        }
        out.push(CovarianceState {
            t,
            gamma_matrix: [[y[0], y[1]], [y[1], y[2]]],
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resonant_limit_example() {
        let r = d_xp_resonant_limit(1.0, 1.0, -2.3, 0.03, 1.0).unwrap();
        assert!((r.slope - 3.3 * (1.03f64 / 0.97).ln()).abs() < 1e-14);
        assert!((r.slope - 0.19806).abs() < 5e-6);
        let ohmic = d_xp_resonant_limit(1.0, 1.0, 1.0, 0.03, 1.0).unwrap();
        assert_eq!(ohmic.slope, 0.0);
        let tiny = d_xp_resonant_limit(1.0, 1.0, -2.3, 1e-12, 1.0).unwrap();
        assert!(tiny.total().abs() < 1e-10);
    }

    #[test]
    fn xi_closed_form_examples() {
        assert!((xi_from_mu(3.0) - 1.0 / 3.0).abs() < 1e-15);
        let c = QbmCoefficients {
            t: f64::INFINITY,
            gamma: 0.0,
            delta_omega_sq: 0.0,
            d_pp: 1.0,
            d_xp: 0.0,
        };
        assert_eq!(xi_measure(&c, 1.0).unwrap().xi, 0.0);
        assert!(xi_measure(&QbmCoefficients { d_pp: 0.0, ..c }, 1.0).is_err());
    }

    #[test]
    fn delta_inversion_round_trips() {
        for constant in [BoundConstant::Asymptotic, BoundConstant::Printed] {
            let d = delta_for_xi(-2.3, 1.1e-6, constant).unwrap();
            let b = mu_lower_bound(-2.3, 1.0, d, constant).unwrap();
            assert!((b.xi / 1.1e-6 - 1.0).abs() < 1e-9);
        }
        assert_eq!(mu_lower_bound(1.0, 1.0, 0.03, BoundConstant::Printed).unwrap().mu, 0.0);
    }

    #[test]
    fn zero_coupling_coefficients_vanish() {
        let env = Environment::new(SpectralDensityModel::zero(), Oscillator::unit(10.0)).unwrap();
        let c = env.coefficients_at(3.0).unwrap();
        assert_eq!((c.gamma, c.d_pp, c.d_xp, c.delta_omega_sq), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(env.coefficients_at(0.0).unwrap(), QbmCoefficients::zero(0.0));
    }

    #[test]
    fn free_evolution_is_a_symplectic_rotation() {
        let sched = CoefficientSchedule::Constant(QbmCoefficients::zero(0.0));
        let g0 = [[3.0, 0.5], [0.5, 1.0]];
        let ts: Vec<f64> = (0..=20).map(|i| i as f64 * 0.7).collect();
        let traj = propagate_covariance(&sched, 1.0, 1.3, g0, &ts, &OdeOptions::default()).unwrap();
        let w = 1.3f64;
        for s in &traj {
            // Γ(t) = R Γ₀ Rᵀ with the free symplectic flow R
            let (c, sn) = ((w * s.t).cos(), (w * s.t).sin());
            let r = [[c, sn / w], [-w * sn, c]];
            let mut exact = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        for l in 0..2 {
                            exact[i][j] += r[i][k] * g0[k][l] * r[j][l];
                        }
                    }
                }
            }
            for i in 0..2 {
                for j in 0..2 {
                    assert!((s.gamma_matrix[i][j] - exact[i][j]).abs() < 1e-7, "{:?} vs {:?}", s.gamma_matrix, exact);
                }
            }
            let energy = s.gamma_matrix[1][1] + w * w * s.gamma_matrix[0][0];
            assert!((energy / (g0[1][1] + w * w * g0[0][0]) - 1.0).abs() < 1e-8);
        }
    }
}
