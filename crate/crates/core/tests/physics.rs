//! Independent oracles for the master-equation coefficients and the
//! readout chain.

use bathscope::bath::SpectralDensityModel;
use bathscope::optomech::{CavityParams, Readout};
use bathscope::qbm::{hamiltonian_matrix, xi_matrix_consistency, Environment, QbmCoefficients};
use bathscope::units::{Oscillator, OscillatorParams, ThermalMode};
use proptest::prelude::*;

/// Composite 16-point Gauss-Legendre on `n` equal panels of `[a, b]`.
fn gl(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    const X: [f64; 8] = [
        0.095_012_509_837_637_44,
        0.281_603_550_779_258_9,
        0.458_016_777_657_227_4,
        0.617_876_244_402_643_7,
        0.755_404_408_355_003,
        0.865_631_202_387_831_8,
        0.944_575_023_073_232_6,
        0.989_400_934_991_649_9,
    ];
    const W: [f64; 8] = [
        0.189_450_610_455_068_5,
        0.182_603_415_044_923_6,
        0.169_156_519_395_002_5,
        0.149_595_988_816_576_7,
        0.124_628_971_255_533_9,
        0.095_158_511_682_492_78,
        0.062_253_523_938_647_89,
        0.027_152_459_411_754_09,
    ];
    let h = (b - a) / n as f64;
    (0..n)
        .map(|i| {
            let mid = a + (i as f64 + 0.5) * h;
            0.5 * h * X.iter().zip(W).map(|(x, w)| w * (f(mid + 0.5 * h * x) + f(mid - 0.5 * h * x))).sum::<f64>()
        })
        .sum()
}

/// `∫₀^Λ cω sin(ωs) dω` and `∫₀^Λ c cos(ωs) dω` for the Ohmic cutoff.
fn ohmic_kernels(c: f64, cutoff: f64, s: f64) -> (f64, f64) {
    let x = cutoff * s;
    if x < 1e-3 {
        let sin_part = c * cutoff.powi(3) * s * (1.0 / 3.0 - x * x / 30.0);
        let cos_part = c * cutoff * (1.0 - x * x / 6.0);
        (sin_part, cos_part)
    } else {
        (c * (x.sin() - x * x.cos()) / (s * s), c * x.sin() / s)
    }
}

#[test]
fn coefficients_match_time_domain_integrals() {
    let (c, cutoff, theta) = (0.01, 10.0, 50.0);
    let env = Environment::new(SpectralDensityModel::OhmicCutoff { c, cutoff }, Oscillator::unit(theta))
        .unwrap()
        .with_thermal(ThermalMode::HighTemperature);
    for t in [0.5, 3.0, 20.0, 60.0] {
        let got = env.coefficients_at(t).unwrap();
        let n = (t * 40.0).ceil() as usize;
        let gamma = gl(|s| s.sin() * ohmic_kernels(c, cutoff, s).0, 0.0, t, n);
        let dw2 = -2.0 * gl(|s| s.cos() * ohmic_kernels(c, cutoff, s).0, 0.0, t, n);
        let d_pp = 2.0 * theta * gl(|s| s.cos() * ohmic_kernels(c, cutoff, s).1, 0.0, t, n);
        let d_xp = 2.0 * theta * gl(|s| s.sin() * ohmic_kernels(c, cutoff, s).1, 0.0, t, n);
        for (name, a, b) in [
            ("gamma", got.gamma, gamma),
            ("delta_omega_sq", got.delta_omega_sq, dw2),
            ("d_pp", got.d_pp, d_pp),
            ("d_xp", got.d_xp, d_xp),
        ] {
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1e-3 * c * theta), "{name} at t = {t}: {a} vs {b}");
        }
    }
}

#[test]
fn resonant_anomalous_diffusion_converges_slowly() {
    let d = OscillatorParams::paper_device();
    let (i_omega, theta) = (d.natural_density_at_resonance(), d.natural().theta);
    let delta = 0.03;
    let env = Environment::new(SpectralDensityModel::paper(i_omega, -2.3, delta, 1e7), Oscillator::unit(theta))
        .unwrap()
        .with_thermal(ThermalMode::HighTemperature);
    let limit = env.asymptotic_coefficients(delta).unwrap().d_xp_res;
    let gap = |t: f64| (env.resonant_d_xp_at(t, delta).unwrap() / limit - 1.0).abs();
    let (early, late) = (gap(1e2), gap(1e5));
    assert!(early > 1e-2, "{early}");
    assert!(late < 1e-3, "{late}");
}

fn dark_readout() -> (Readout, bathscope::optomech::CavitySteadyState) {
    let d = OscillatorParams::paper_device();
    let r = Readout::from_si(&d, &CavityParams::paper()).unwrap().dark();
    let ss = r.steady_state().unwrap();
    (r, ss)
}

#[test]
fn thermal_position_variance_is_equipartition() {
    let (r, ss) = dark_readout();
    let model = SpectralDensityModel::OhmicCutoff {
        c: r.gamma_inf / std::f64::consts::PI,
        cutoff: 20.0,
    };
    let psd = |w: f64| r.one_sided_position_psd(&model, w, &ss).unwrap();
    // resolve the 1/Q line with panels graded around the resonance
    let mut edges = vec![1e-9, 0.5];
    let mut d = 0.5;
    while d > 1e-6 {
        d *= 0.5;
        edges.push(1.0 - d);
    }
    edges.push(1.0);
    let upper: Vec<f64> = edges.iter().rev().map(|e| 2.0 - e).collect();
    edges.extend(upper.into_iter().skip(1));
    edges.extend([4.0, 20.0]);
    let var: f64 = edges.windows(2).map(|e| gl(psd, e[0], e[1], 8)).sum::<f64>() / (2.0 * std::f64::consts::PI);
    let want = r.theta / (r.mass * r.omega_inf * r.omega_inf);
    assert!((var / want - 1.0).abs() <= 0.03, "{var} vs {want}");
}

#[test]
fn position_spectrum_peaks_at_the_resonance() {
    let d = OscillatorParams::paper_device();
    let r = Readout::from_si(&d, &CavityParams::paper()).unwrap();
    let ss = r.steady_state().unwrap();
    let model = SpectralDensityModel::paper(d.natural_density_at_resonance(), -2.3, 0.03, 1e7);
    let step = 1e-4;
    let grid: Vec<f64> = (0..=1000).map(|i| 0.95 + step * i as f64).collect();
    let best = grid
        .iter()
        .copied()
        .max_by(|a, b| {
            let pa = r.one_sided_position_psd(&model, *a, &ss).unwrap();
            let pb = r.one_sided_position_psd(&model, *b, &ss).unwrap();
            pa.total_cmp(&pb)
        })
        .unwrap();
    assert!((best - r.omega_inf).abs() <= step, "{best}");
}

#[test]
fn output_scales_with_input_power_at_weak_drive() {
    let d = OscillatorParams::paper_device();
    let model = SpectralDensityModel::paper(d.natural_density_at_resonance(), -2.3, 0.03, 1e7);
    let at = |power: f64| {
        let cav = CavityParams {
            power,
            locked: false,
            ..CavityParams::paper()
        };
        let r = Readout::from_si(&d, &cav).unwrap();
        let ss = r.steady_state().unwrap();
        (0..=60)
            .map(|i| r.chain_output_psd(&model, (885e3 + 1e3 * i as f64) / 914e3, &ss).unwrap())
            .collect::<Vec<f64>>()
    };
    let (low, high) = (at(1e-8), at(4e-8));
    for (a, b) in low.iter().zip(&high) {
        assert!((b / (4.0 * a) - 1.0).abs() <= 1e-2, "{}", b / a);
    }
}

proptest! {
    #[test]
    fn steady_state_solves_both_equations(
        log_power in -9.0f64..-3.0,
        detuning in -3e6f64..3e6,
        locked in any::<bool>(),
    ) {
        let d = OscillatorParams::paper_device();
        let cav = CavityParams { power: 10f64.powf(log_power), detuning, locked, ..CavityParams::paper() };
        let r = Readout::from_si(&d, &cav).unwrap();
        let ss = r.steady_state().unwrap();
        let (ra, rd) = r.steady_state_residuals(&ss);
        prop_assert!(ra <= 1e-10 && rd <= 1e-10, "{ra} {rd}");
        let model = SpectralDensityModel::paper(d.natural_density_at_resonance(), -2.3, 0.03, 1e7);
        for w in [0.9, 0.97, 1.0, 1.03, 1.1] {
            let (th, rp) = r.noise_spectra(&model, w, &ss).unwrap();
            prop_assert!(th >= 0.0 && rp >= 0.0);
        }
    }

    #[test]
    fn generator_rebuilds_from_xi_and_hamiltonian(
        gamma in 0.0f64..10.0,
        dw2 in -0.5f64..5.0,
        d_pp in 1e-3f64..1e3,
        d_xp in -1e3f64..1e3,
        mass in 0.1f64..10.0,
        omega in 0.1f64..10.0,
    ) {
        let c = QbmCoefficients { t: 1.0, gamma, delta_omega_sq: dw2, d_pp, d_xp };
        let h_r = hamiltonian_matrix(&c, mass, omega);
        let scale = 1.0 + gamma.abs() + d_pp.abs() * mass + d_xp.abs() + mass * (omega * omega + dw2).abs();
        prop_assert!(xi_matrix_consistency(&c, mass, omega, &h_r) <= 1e-12 * scale);
    }
}
