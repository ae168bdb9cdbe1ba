use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::spectrum::Spectrum;
use crate::synth::{stream_rng, uniform, STREAM_ANNEALING};

/// Fit band and the frozen resonance shape, all in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitWindow {
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    /// Ω∞/2π.
    pub center_hz: f64,
    /// γ∞/2π.
    pub gamma_hz: f64,
}

impl FitWindow {
    pub fn new(f_min_hz: f64, f_max_hz: f64, center_hz: f64, gamma_hz: f64) -> Result<Self> {
        let w = Self {
            f_min_hz,
            f_max_hz,
            center_hz,
            gamma_hz,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_min_hz > 0.0 && self.f_min_hz < self.center_hz && self.center_hz < self.f_max_hz) {
            return domain(format!(
                "fit window needs 0 < f_min < centre < f_max, got {} < {} < {}",
                self.f_min_hz, self.center_hz, self.f_max_hz
            ));
        }
        if !(self.gamma_hz > 0.0 && self.gamma_hz.is_finite()) {
            return domain(format!("fit window linewidth must be positive, got {}", self.gamma_hz));
        }
        Ok(())
    }

    pub fn q(&self) -> f64 {
        self.center_hz / self.gamma_hz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Linear,
    /// Residuals of `ln S`.
    #[default]
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    Uniform,
    /// Bin weights `1/σ²` with `σ` taken from a reference spectrum (the
    /// pooled mean in an ensemble); in log space the weights are uniform
    /// up to `1/n`, so this only changes the linear objective.
    InverseVariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnealOptions {
    pub k_min: f64,
    pub k_max: f64,
    /// Grid used to set the initial temperature.
    pub coarse_points: usize,
    pub cooling: f64,
    pub steps: usize,
    pub restarts: usize,
    /// Golden-section stopping width in k.
    pub polish_tol: f64,
    /// Set from the run seed, not from config files.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for AnnealOptions {
    fn default() -> Self {
        Self {
            k_min: -6.0,
            k_max: 4.0,
            coarse_points: 41,
            cooling: 0.95,
            steps: 200,
            restarts: 5,
            polish_tol: 1e-10,
            seed: 0,
        }
    }
}

impl AnnealOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_min < self.k_max) || !self.k_min.is_finite() || !self.k_max.is_finite() {
            return Err(Error::Config(format!(
                "k search domain [{}, {}] is empty",
                self.k_min, self.k_max
            )));
        }
        if self.coarse_points < 3 || self.restarts == 0 {
            return Err(Error::Config("need coarse_points >= 3 and restarts >= 1".into()));
        }
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return Err(Error::Config(format!("cooling factor must lie in (0, 1), got {}", self.cooling)));
        }
        if !(self.polish_tol > 0.0) {
            return Err(Error::Config("polish_tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    pub objective: Objective,
    pub weighting: Weighting,
    pub anneal: AnnealOptions,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub k: f64,
    /// Scale of `S = C · x^{k−1}/((1−x²)² + (x/Q)²)`, `x = f/center`.
    pub c: f64,
    /// Weighted mean squared deviation in the objective space.
    pub residual: f64,
    pub objective: Objective,
    /// Objective evaluations.
    pub iterations: usize,
    pub final_temperature: f64,
    pub restarts: usize,
    /// The optimum sits on the edge of the k search domain.
    pub at_boundary: bool,
    pub n_bins: usize,
}

/// Precomputed per-bin quantities; `g_k = exp((k−1)·ln x − ln den)`.
pub(crate) struct Problem {
    pub ln_x: Vec<f64>,
    pub ln_den: Vec<f64>,
    pub s: Vec<f64>,
    pub ln_s: Vec<f64>,
    pub w: Vec<f64>,
    pub objective: Objective,
}

impl Problem {
    pub fn new(
        spectrum: &Spectrum,
        window: &FitWindow,
        objective: Objective,
        weights_from: Option<&Spectrum>,
    ) -> Result<Self> {
        window.validate()?;
        spectrum.validate()?;
        let q = window.q();
        let mut p = Problem {
            ln_x: Vec::new(),
            ln_den: Vec::new(),
            s: Vec::new(),
            ln_s: Vec::new(),
            w: Vec::new(),
            objective,
        };
        if let Some(r) = weights_from {
            if !r.same_grid(spectrum) {
                return Err(Error::Data("weight reference spectrum is on a different grid".into()));
            }
        }
        for (i, (&f, &s)) in spectrum.freqs_hz.iter().zip(&spectrum.psd).enumerate() {
            if f < window.f_min_hz || f > window.f_max_hz {
                continue;
            }
            let x = f / window.center_hz;
            p.ln_x.push(x.ln());
            p.ln_den.push(((1.0 - x * x).powi(2) + (x / q).powi(2)).ln());
            p.s.push(s);
            p.ln_s.push(s.ln());
            p.w.push(match weights_from {
                Some(r) if objective == Objective::Linear => {
                    let v = r.psd[i];
                    if v > 0.0 {
                        1.0 / (v * v)
                    } else {
                        0.0
                    }
                }
                _ => 1.0,
            });
        }
        if p.s.len() < 3 {
            return Err(Error::DegenerateFit(format!(
                "only {} bins inside the window [{}, {}] Hz",
                p.s.len(),
                window.f_min_hz,
                window.f_max_hz
            )));
        }
        if !(p.s.iter().sum::<f64>() > 0.0) {
            return Err(Error::DegenerateFit("window holds zero total power".into()));
        }
        if objective == Objective::Log && p.s.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::DegenerateFit("log objective needs strictly positive bins".into()));
        }
        if !(p.w.iter().sum::<f64>() > 0.0) {
            return Err(Error::DegenerateFit("all fit weights vanish".into()));
        }
        Ok(p)
    }

    /// `(residual, C)` at exponent `k` with `C` profiled out.
    pub fn eval(&self, k: f64) -> (f64, f64) {
        let km1 = k - 1.0;
        let sw: f64 = self.w.iter().sum();
        match self.objective {
            Objective::Linear => {
                let (mut sg, mut gg) = (0.0, 0.0);
                for i in 0..self.s.len() {
                    let g = (km1 * self.ln_x[i] - self.ln_den[i]).exp();
                    sg += self.w[i] * self.s[i] * g;
                    gg += self.w[i] * g * g;
                }
                let c = sg / gg;
                let mut r = 0.0;
                for i in 0..self.s.len() {
                    let g = (km1 * self.ln_x[i] - self.ln_den[i]).exp();
                    let d = self.s[i] - c * g;
                    r += self.w[i] * d * d;
                }
                (r / sw, c)
            }
            Objective::Log => {
                let mut mean = 0.0;
                for i in 0..self.s.len() {
                    mean += self.w[i] * (self.ln_s[i] + self.ln_den[i] - km1 * self.ln_x[i]);
                }
                mean /= sw;
                let mut r = 0.0;
                for i in 0..self.s.len() {
                    let d = self.ln_s[i] + self.ln_den[i] - km1 * self.ln_x[i] - mean;
                    r += self.w[i] * d * d;
                }
                (r / sw, mean.exp())
            }
        }
    }
}

/// Least-squares fit of the exponent with the shape frozen at `window`.
///
/// The residual is minimised over C in closed form; k is found by simulated
/// annealing on `[k_min, k_max]` followed by a golden-section polish.
/// `stream` selects the annealing RNG stream (the spectrum index in an
/// ensemble).
pub fn fit_exponent(
    spectrum: &Spectrum,
    window: &FitWindow,
    options: &FitOptions,
    weights_from: Option<&Spectrum>,
    stream: u64,
) -> Result<FitResult> {
    let a = &options.anneal;
    a.validate()?;
    let weights_from = match options.weighting {
        Weighting::Uniform => None,
        Weighting::InverseVariance => Some(weights_from.unwrap_or(spectrum)),
    };
    let problem = Problem::new(spectrum, window, options.objective, weights_from)?;
    let mut evals = 0usize;
    let mut f = |k: f64| {
        evals += 1;
        problem.eval(k).0
    };

    let span = a.k_max - a.k_min;
    let step = span / (a.coarse_points - 1) as f64;
    let coarse: Vec<(f64, f64)> = (0..a.coarse_points)
        .map(|i| {
            let k = a.k_min + i as f64 * step;
            (k, f(k))
        })
        .collect();
    let (lo, hi) = coarse
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, r)| (lo.min(r), hi.max(r)));
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::DegenerateFit("objective is not finite on the search grid".into()));
    }
    let t0 = if hi > lo { hi - lo } else { hi.abs().max(f64::MIN_POSITIVE) };
    let grid_best = coarse
        .iter()
        .copied()
        .fold((f64::NAN, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });

    let mut rng = stream_rng(a.seed, STREAM_ANNEALING, stream);
    let mut candidates = Vec::with_capacity(a.restarts);
    let mut temperature = t0;
    for r in 0..a.restarts {
        let mut k = if r == 0 {
            grid_best.0
        } else {
            a.k_min + span * uniform(&mut rng)
        };
        let mut fk = f(k);
        let mut best = (k, fk);
        temperature = t0;
        for _ in 0..a.steps {
            let width = 0.1 * span * (temperature / t0).sqrt().max(1e-3);
            let z: f64 = StandardNormal.sample(&mut rng);
            let kp = reflect(k + width * z, a.k_min, a.k_max);
            let fp = f(kp);
            let accept = fp <= fk || uniform(&mut rng) < (-(fp - fk) / temperature).exp();
            if accept {
                k = kp;
                fk = fp;
                if fk < best.1 {
                    best = (k, fk);
                }
            }
            temperature *= a.cooling;
        }
        let lo = (best.0 - step).max(a.k_min);
        let hi = (best.0 + step).min(a.k_max);
        let polished = golden_section(&mut f, lo, hi, a.polish_tol);
        candidates.push(if polished.1 <= best.1 { polished } else { best });
    }

    let best = candidates
        .iter()
        .copied()
        .fold(candidates[0], |b, c| {
            let tie = (c.1 - b.1).abs() <= 1e-12 * b.1.abs().max(c.1.abs());
            if tie {
                if (c.0 - 1.0).abs() < (b.0 - 1.0).abs() {
                    c
                } else {
                    b
                }
            } else if c.1 < b.1 {
                c
            } else {
                b
            }
        });
    let (residual, c) = problem.eval(best.0);
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::DegenerateFit(format!("profiled scale C = {c} at k = {}", best.0)));
    }
    let edge = 1e-6 * span;
    Ok(FitResult {
        k: best.0,
        c,
        residual,
        objective: options.objective,
        iterations: evals,
        final_temperature: temperature,
        restarts: a.restarts,
        at_boundary: best.0 - a.k_min < edge || a.k_max - best.0 < edge,
        n_bins: problem.s.len(),
    })
}

fn reflect(k: f64, lo: f64, hi: f64) -> f64 {
    let span = hi - lo;
    let mut y = (k - lo).rem_euclid(2.0 * span);
    if y > span {
        y = 2.0 * span - y;
    }
    lo + y
}

/// Minimum of a unimodal `f` on `[a, b]`, as `(x, f(x))`.
pub(crate) fn golden_section<F: FnMut(f64) -> f64>(f: &mut F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    [(c, fc), (d, fd), (x, fx)]
        .into_iter()
        .fold((x, fx), |b, p| if p.1 < b.1 { p } else { b })
}
