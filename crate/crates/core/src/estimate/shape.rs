use crate::error::{domain, Error, Result};
use crate::spectrum::Spectrum;

/// Resonance shape fitted to the pooled spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeEstimate {
    pub center_hz: f64,
    pub gamma_hz: f64,
    pub q: f64,
    /// Exponent fitted jointly with the shape; not used downstream.
    pub k: f64,
    pub iterations: usize,
}

/// Bin-wise mean of spectra on a common grid.
pub fn pooled_spectrum(spectra: &[Spectrum]) -> Result<Spectrum> {
    let first = spectra.first().ok_or_else(|| Error::Domain("no spectra to pool".into()))?;
    let mut psd = vec![0.0; first.len()];
    let mut n_avg = 0;
    for (i, s) in spectra.iter().enumerate() {
        if !s.same_grid(first) {
            return Err(Error::Data(format!("spectrum {i} is on a different frequency grid")));
        }
        for (a, b) in psd.iter_mut().zip(&s.psd) {
            *a += b;
        }
        n_avg += s.n_averages;
    }
    let n = spectra.len() as f64;
    psd.iter_mut().for_each(|a| *a /= n);
    let mut out = Spectrum::new(first.freqs_hz.clone(), psd, n_avg, format!("pooled n={}", spectra.len()))?;
    out.truth = first.truth;
    Ok(out)
}

struct Data {
    f: Vec<f64>,
    ln_s: Vec<f64>,
}

impl Data {
    /// Residuals of `ln S` against the best `(k, ln C)` at `(ln F, ln Q)`.
    fn residuals(&self, p: [f64; 2]) -> (Vec<f64>, f64) {
        let (fc, q) = (p[0].exp(), p[1].exp());
        let n = self.f.len() as f64;
        let mut u = Vec::with_capacity(self.f.len());
        let mut y = Vec::with_capacity(self.f.len());
        for (&f, &ls) in self.f.iter().zip(&self.ln_s) {
            let x = f / fc;
            u.push(x.ln());
            y.push(ls + ((1.0 - x * x).powi(2) + (x / q).powi(2)).ln());
        }
        let mu = u.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let suu: f64 = u.iter().map(|v| (v - mu).powi(2)).sum();
        let suy: f64 = u.iter().zip(&y).map(|(a, b)| (a - mu) * (b - my)).sum();
        let slope = suy / suu;
        let r = u.iter().zip(&y).map(|(a, b)| b - my - slope * (a - mu)).collect();
        (r, slope + 1.0)
    }
}

fn cost(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Fits centre, linewidth and exponent of the reduced output spectrum to
/// `ln S` of the pooled spectrum within `[f_min, f_max]` Hz.
///
/// `(k, ln C)` enter linearly and are profiled out; Levenberg–Marquardt
/// runs over `(ln F, ln Q)`.
pub fn estimate_shape_params(pooled: &Spectrum, f_min_hz: f64, f_max_hz: f64) -> Result<ShapeEstimate> {
    pooled.validate()?;
    let (f, s): (Vec<f64>, Vec<f64>) = pooled
        .freqs_hz
        .iter()
        .zip(&pooled.psd)
        .filter(|(f, _)| **f >= f_min_hz && **f <= f_max_hz)
        .map(|(f, s)| (*f, *s))
        .unzip();
    if f.len() < 8 {
        return Err(Error::DegenerateFit(format!("only {} bins in the shape window", f.len())));
    }
    if s.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::DegenerateFit("shape fit needs strictly positive bins".into()));
    }
    let imax = (0..s.len()).fold(0, |b, i| if s[i] > s[b] { i } else { b });
    if imax < 2 || imax + 3 > s.len() {
        return Err(Error::DegenerateFit(format!(
            "pooled peak at {} Hz is not resolved inside the window",
            f[imax]
        )));
    }
    let half = 0.5 * s[imax];
    let left = (0..imax).rev().find(|&i| s[i] < half);
    let right = (imax + 1..s.len()).find(|&i| s[i] < half);
    let fwhm = match (left, right) {
        (Some(l), Some(r)) => f[r] - f[l],
        _ => 0.25 * (f_max_hz - f_min_hz),
    };
    let mut p = [f[imax].ln(), (f[imax] / fwhm.max(f[1] - f[0])).ln()];

    let data = Data {
        f,
        ln_s: s.iter().map(|v| v.ln()).collect(),
    };
    let (mut r, _) = data.residuals(p);
    let mut c = cost(&r);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let h = 1e-7;
    for _ in 0..500 {
        iterations += 1;
        let mut jac = [vec![0.0; r.len()], vec![0.0; r.len()]];
        for j in 0..2 {
            let mut pp = p;
            let mut pm = p;
            pp[j] += h;
            pm[j] -= h;
            let (rp, _) = data.residuals(pp);
            let (rm, _) = data.residuals(pm);
            for i in 0..r.len() {
                jac[j][i] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let a = [
            [dot(&jac[0], &jac[0]), dot(&jac[0], &jac[1])],
            [dot(&jac[1], &jac[0]), dot(&jac[1], &jac[1])],
        ];
        let g = [dot(&jac[0], &r), dot(&jac[1], &r)];
        let mut improved = false;
        for _ in 0..40 {
            let m = [
                [a[0][0] * (1.0 + lambda), a[0][1]],
                [a[1][0], a[1][1] * (1.0 + lambda)],
            ];
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            if det == 0.0 || !det.is_finite() {
                lambda *= 10.0;
                continue;
            }
            let d = [
                -(m[1][1] * g[0] - m[0][1] * g[1]) / det,
                -(m[0][0] * g[1] - m[1][0] * g[0]) / det,
            ];
            let trial = [p[0] + d[0], p[1] + d[1]];
            let (rt, _) = data.residuals(trial);
            let ct = cost(&rt);
            if ct.is_finite() && ct <= c {
                let step = d[0].abs().max(d[1].abs());
                p = trial;
                r = rt;
                let done = step < 1e-14 || c - ct <= 1e-15 * c;
                c = ct;
                lambda = (lambda / 3.0).max(1e-12);
                improved = !done;
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    let (_, k) = data.residuals(p);
    let center_hz = p[0].exp();
    let q = p[1].exp();
    if !(center_hz > f_min_hz && center_hz < f_max_hz) {
        return domain(format!("fitted centre {center_hz} Hz left the window"));
    }
    Ok(ShapeEstimate {
        center_hz,
        gamma_hz: center_hz / q,
        q,
        k,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::lineshape;

    #[test]
    fn noiseless_shape_recovery() {
        for k in [-2.3, 1.0, 2.0] {
            let freqs: Vec<f64> = (8500..=9800).map(|j| j as f64 * 100.0).collect();
            let psd = freqs.iter().map(|f| 3.0 * lineshape(f / 914.1e3, k, 212.0)).collect();
            let s = Spectrum::new(freqs, psd, 1, "model").unwrap();
            let e = estimate_shape_params(&s, 885e3, 945e3).unwrap();
            assert!((e.center_hz / 914.1e3 - 1.0).abs() < 1e-8, "{e:?}");
            assert!((e.q / 212.0 - 1.0).abs() < 1e-8, "{e:?}");
            assert!((e.k - k).abs() < 1e-6);
        }
    }
}
