//! The `bathscope` command-line driver.
//!
//! Every subcommand resolves a [`RunConfig`] (preset, then config file, then
//! flags), writes it to `<out>/effective_config.toml`, and writes its
//! results under `<out>`. Exit codes: 0 success, 2 configuration error,
//! 3 I/O or malformed data, 4 numerical failure.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bath::{weak_coupling_report, SpectralDensityModel};
use crate::config::{preset, DataMode, RunConfig};
use crate::error::{Error, Result};
use crate::estimate::{
    average_batches, band_bins, bootstrap, ensemble_estimate, estimate_shape_params, k_to_nonmarkovianity,
    pooled_spectrum, ExponentEnsemble, FitWindow, Objective, Periodogram, Weighting, Window,
};
use crate::io;
use crate::qbm::{
    lyapunov_fixed_point, mu_lower_bound, propagate_covariance, xi_measure, BoundConstant, CoefficientSchedule,
    Environment, OdeOptions,
};
use crate::quad::QuadOptions;
use crate::spectrum::Spectrum;
use crate::synth::{synth_batches, synth_spectra, SynthConfig};

#[derive(Debug, Parser)]
#[command(name = "bathscope", version, about = "Bath spectral-density identification and non-Markovianity estimates")]
pub struct Cli {
    /// Worker threads (0 = one per core). Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic averaged spectra or a binary time series.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Ground-truth exponent of the synthetic spectrum.
        #[arg(long, allow_hyphen_values = true)]
        truth_k: Option<f64>,
        /// Averaged spectra or a binary time series (overrides `data.mode`).
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Batch, Fourier transform and average a time series into spectra.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Time series (`.bsts` binary or CSV).
        #[arg(long)]
        input: PathBuf,
        /// Taper applied to each batch before the transform.
        #[arg(long, value_enum, default_value_t = TaperArg::Rectangular)]
        taper: TaperArg,
    },
    /// Fit the exponent on each spectrum and summarise the ensemble.
    Fit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        fit: FitFlags,
        /// Spectrum CSV files or directories of them.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Asymptotic coefficients and ξ for the configured bath.
    Nonmarkov {
        #[command(flatten)]
        common: Common,
        /// Also propagate and write the covariance trajectory.
        #[arg(long)]
        trajectory: bool,
    },
    /// synth, fit and nonmarkov in one run.
    Pipeline {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        fit: FitFlags,
        /// Ground-truth exponent of the synthetic data.
        #[arg(long, allow_hyphen_values = true)]
        truth_k: Option<f64>,
        /// Synthesize averaged spectra or a time series (overrides `data.mode`).
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration, applied on top of the preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Starting configuration: paper, paper-synth, ohmic, subohmic.
    #[arg(long)]
    pub preset: Option<String>,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Top-level seed (overrides `seed`).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct FitFlags {
    /// Fit band `LO:HI` in Hz.
    #[arg(long, value_parser = parse_window)]
    pub window: Option<(f64, f64)>,
    /// Residuals on the PSD or on its logarithm (overrides `optimizer.objective`).
    #[arg(long, value_enum)]
    pub objective: Option<ObjectiveArg>,
    /// Per-bin weights (overrides `optimizer.weighting`).
    #[arg(long, value_enum)]
    pub weighting: Option<WeightingArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Spectra,
    Timeseries,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TaperArg {
    Rectangular,
    Hann,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ObjectiveArg {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum WeightingArg {
    Uniform,
    InverseVariance,
}

fn parse_window(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected LO:HI, got `{s}`"))?;
    let lo: f64 = a.trim().parse().map_err(|_| format!("bad lower edge `{a}`"))?;
    let hi: f64 = b.trim().parse().map_err(|_| format!("bad upper edge `{b}`"))?;
    if !(lo > 0.0 && hi > lo) {
        return Err(format!("need 0 < LO < HI, got {lo}:{hi}"));
    }
    Ok((lo, hi))
}

/// Stable exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 2,
        Error::Io(_) | Error::Data(_) => 3,
        Error::Domain(_)
        | Error::Numerical { .. }
        | Error::Singular { .. }
        | Error::Unphysical { .. }
        | Error::DegenerateFit(_) => 4,
    }
}

/// Parses `args` and runs; returns the process exit code. Output text goes
/// to `stdout`, diagnostics to stderr.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(text) => {
            let _ = stdout.write_all(text.as_bytes());
            0
        }
        Err(e) => {
            eprintln!("bathscope: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: Cli) -> Result<String> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| Error::Config(format!("--threads: {e}")))?;
    pool.install(|| dispatch(cli.command))
}

fn resolve(common: &Common) -> Result<RunConfig> {
    let base = match &common.preset {
        Some(p) => preset(p)?,
        None => RunConfig::default(),
    };
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
            RunConfig::from_toml_over(&base, &text).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
                other => other,
            })?
        }
        None => base,
    };
    if let Some(out) = &common.out {
        cfg.output.dir = out.display().to_string();
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn apply_fit_flags(cfg: &mut RunConfig, f: &FitFlags) {
    if let Some((lo, hi)) = f.window {
        cfg.window.f_min_hz = lo;
        cfg.window.f_max_hz = hi;
    }
    if let Some(o) = f.objective {
        cfg.optimizer.objective = match o {
            ObjectiveArg::Linear => Objective::Linear,
            ObjectiveArg::Log => Objective::Log,
        };
    }
    if let Some(w) = f.weighting {
        cfg.optimizer.weighting = match w {
            WeightingArg::Uniform => Weighting::Uniform,
            WeightingArg::InverseVariance => Weighting::InverseVariance,
        };
    }
}

fn apply_synth_flags(cfg: &mut RunConfig, truth_k: Option<f64>, mode: Option<ModeArg>) {
    if let Some(k) = truth_k {
        cfg.synth.k = k;
    }
    if let Some(m) = mode {
        cfg.data.mode = match m {
            ModeArg::Spectra => DataMode::Spectra,
            ModeArg::Timeseries => DataMode::Timeseries,
        };
    }
}

/// Validates, creates the output directory and echoes the configuration.
fn prepare(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let out = PathBuf::from(&cfg.output.dir);
    std::fs::create_dir_all(&out).map_err(|e| Error::Config(format!("output.dir {}: {e}", out.display())))?;
    io::write_text(&out.join("effective_config.toml"), &cfg.to_toml())?;
    Ok(out)
}

fn dispatch(cmd: Command) -> Result<String> {
    match cmd {
        Command::Synth { common, truth_k, mode } => {
            let mut cfg = resolve(&common)?;
            apply_synth_flags(&mut cfg, truth_k, mode);
            let out = prepare(&cfg)?;
            cmd_synth(&cfg, &out)
        }
        Command::Spectrum { common, input, taper } => {
            let cfg = resolve(&common)?;
            let out = prepare(&cfg)?;
            let taper = match taper {
                TaperArg::Rectangular => Window::Rectangular,
                TaperArg::Hann => Window::Hann,
            };
            cmd_spectrum(&cfg, &input, taper, &out)
        }
        Command::Fit { common, fit, inputs } => {
            let mut cfg = resolve(&common)?;
            apply_fit_flags(&mut cfg, &fit);
            let out = prepare(&cfg)?;
            let spectra = load_spectra(&inputs)?;
            let (text, _) = cmd_fit(&cfg, &spectra, &out)?;
            Ok(text)
        }
        Command::Nonmarkov { common, trajectory } => {
            let cfg = resolve(&common)?;
            let out = prepare(&cfg)?;
            cmd_nonmarkov(&cfg, &cfg.bath, trajectory, &out)
        }
        Command::Pipeline {
            common,
            fit,
            truth_k,
            mode,
        } => {
            let mut cfg = resolve(&common)?;
            apply_synth_flags(&mut cfg, truth_k, mode);
            apply_fit_flags(&mut cfg, &fit);
            let out = prepare(&cfg)?;
            cmd_pipeline(&cfg, &out)
        }
    }
}

fn snapshot(cfg: &SynthConfig) -> Vec<(String, String)> {
    vec![
        ("param.center_hz".into(), cfg.center_hz.to_string()),
        ("param.q".into(), cfg.q.to_string()),
        ("param.k".into(), cfg.k.to_string()),
        ("param.peak_psd".into(), cfg.peak_psd.to_string()),
        ("param.floor_rel".into(), cfg.floor_rel.to_string()),
        ("param.sample_rate".into(), cfg.sample_rate.to_string()),
        ("param.batch_len".into(), cfg.batch_len.to_string()),
        ("param.seed".into(), cfg.seed.to_string()),
    ]
}

fn spectrum_path(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("spectrum_{i:05}.csv"))
}

/// Averaged spectra from synthetic time series, `n_averages` batches each.
fn synth_series_spectra(cfg: &RunConfig) -> Result<Vec<Spectrum>> {
    let sc = cfg.seeded_synth();
    let plan = Periodogram::new(sc.batch_len, sc.sample_rate, Window::Rectangular)?;
    let keep = band_bins(&plan, sc.spectrum_band_hz)?;
    let freqs: Vec<f64> = keep.iter().map(|&j| j as f64 * plan.bin_width()).collect();
    let group = cfg.data.n_averages;
    let groups = cfg.data.n_batches / group;
    if groups == 0 {
        return Err(Error::Config(format!(
            "data.n_batches = {} is smaller than one group of {group}",
            cfg.data.n_batches
        )));
    }
    (0..groups)
        .map(|g| {
            let batches = synth_batches(&sc, g * group, group)?;
            let psd = average_batches(&plan, &batches, &keep)?;
            let mut s = Spectrum::new(freqs.clone(), psd, group, format!("timeseries seed={} group={g}", sc.seed))?;
            s.truth = Some(sc.truth());
            Ok(s)
        })
        .collect()
}

fn cmd_synth(cfg: &RunConfig, out: &Path) -> Result<String> {
    let sc = cfg.seeded_synth();
    let mut text = String::new();
    match cfg.data.mode {
        DataMode::Spectra => {
            let spectra = synth_spectra(&sc, cfg.data.n_averages, cfg.data.n_spectra)?;
            let dir = out.join("spectra");
            let params = snapshot(&sc);
            for (i, s) in spectra.iter().enumerate() {
                io::write_spectrum(&spectrum_path(&dir, i), s, &params)?;
            }
            let _ = writeln!(
                text,
                "wrote {} spectra of {} averages ({} bins, {} Hz each) to {}",
                spectra.len(),
                cfg.data.n_averages,
                spectra[0].len(),
                sc.bin_width(),
                dir.display()
            );
        }
        DataMode::Timeseries => {
            let n = sc.batch_len as u64;
            let total = cfg.data.n_batches * n;
            let path = out.join("timeseries.bsts");
            let mut w = io::TimeSeriesWriter::create(&path, sc.sample_rate, total, sc.seed, Some(sc.truth()))?;
            let mut csv = cfg.data.timeseries_csv.then(|| {
                let mut s = format!("# sample_rate = {}\n# seed = {}\nt_s,x\n", sc.sample_rate, sc.seed);
                s.reserve(32 * total as usize);
                s
            });
            let chunk = 100;
            let mut written = 0u64;
            let mut b = 0;
            while b < cfg.data.n_batches {
                let count = chunk.min(cfg.data.n_batches - b);
                for batch in synth_batches(&sc, b, count)? {
                    w.write_samples(&batch)?;
                    if let Some(c) = csv.as_mut() {
                        for x in &batch {
                            let _ = writeln!(c, "{},{x:e}", written as f64 / sc.sample_rate);
                            written += 1;
                        }
                    }
                }
                b += count;
            }
            w.finish()?;
            if let Some(c) = csv {
                io::write_text(&out.join("timeseries.csv"), &c)?;
            }
            let _ = writeln!(
                text,
                "wrote {} batches x {} samples ({} samples at {} Hz) to {}",
                cfg.data.n_batches,
                n,
                total,
                sc.sample_rate,
                path.display()
            );
        }
    }
    Ok(text)
}

fn cmd_spectrum(cfg: &RunConfig, input: &Path, taper: Window, out: &Path) -> Result<String> {
    let sc = &cfg.synth;
    let n = sc.batch_len;
    let group = cfg.data.n_averages as usize;
    let is_binary = std::fs::File::open(input)
        .and_then(|mut f| {
            let mut m = [0u8; 4];
            std::io::Read::read_exact(&mut f, &mut m).map(|_| &m == io::TS_MAGIC)
        })
        .unwrap_or(false);
    let dir = out.join("spectra");
    let mut written = 0usize;
    let mut dropped = 0u64;
    let mut emit = |psd: Vec<f64>, freqs: &[f64], truth, g: usize| -> Result<()> {
        let mut s = Spectrum::new(freqs.to_vec(), psd, group as u64, format!("{} group={g}", input.display()))?;
        s.truth = truth;
        io::write_spectrum(&spectrum_path(&dir, g), &s, &[])?;
        written += 1;
        Ok(())
    };
    if is_binary {
        let mut r = io::TimeSeriesReader::open(input)?;
        let h = r.header;
        let plan = Periodogram::new(n, h.sample_rate, taper)?;
        let keep = band_bins(&plan, sc.spectrum_band_hz)?;
        let freqs: Vec<f64> = keep.iter().map(|&j| j as f64 * plan.bin_width()).collect();
        let mut g = 0;
        loop {
            let chunk = r.read_chunk(n * group)?;
            if chunk.len() < n * group {
                dropped += chunk.len() as u64;
                break;
            }
            let batches: Vec<&[f64]> = chunk.chunks_exact(n).collect();
            emit(average_batches(&plan, &batches, &keep)?, &freqs, h.truth, g)?;
            g += 1;
        }
    } else {
        let text = std::fs::read_to_string(input).map_err(|e| Error::Io(format!("{}: {e}", input.display())))?;
        let ts = io::parse_timeseries_csv(&text, &input.display().to_string())?;
        let plan = Periodogram::new(n, ts.sample_rate, taper)?;
        let keep = band_bins(&plan, sc.spectrum_band_hz)?;
        let freqs: Vec<f64> = keep.iter().map(|&j| j as f64 * plan.bin_width()).collect();
        let batches: Vec<&[f64]> = ts.samples.chunks_exact(n).collect();
        dropped = (ts.samples.len() - batches.len() * n) as u64;
        let groups = batches.chunks_exact(group);
        dropped += (groups.remainder().len() * n) as u64;
        for (g, grp) in groups.enumerate() {
            emit(average_batches(&plan, grp, &keep)?, &freqs, ts.truth, g)?;
        }
    }
    if written == 0 {
        return Err(Error::Data(format!(
            "{}: fewer than {} samples, no complete group of {group} batches",
            input.display(),
            n * group
        )));
    }
    Ok(format!(
        "wrote {written} spectra of {group} averages to {} ({dropped} trailing samples dropped)\n",
        dir.display()
    ))
}

/// Spectrum CSVs from files and directories (sorted by name).
pub fn load_spectra(inputs: &[PathBuf]) -> Result<Vec<Spectrum>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut v: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| Error::Io(format!("{}: {e}", p.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "csv"))
                .collect();
            v.sort();
            files.extend(v);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(Error::Data("no spectrum files found".into()));
    }
    files.iter().map(|f| io::read_spectrum(f)).collect()
}

fn fit_window(cfg: &RunConfig, spectra: &[Spectrum], text: &mut String) -> Result<FitWindow> {
    let w = &cfg.window;
    let (center, gamma) = match (w.center_hz, w.gamma_hz) {
        (Some(c), Some(g)) => {
            let _ = writeln!(text, "shape            fixed: centre {c} Hz, linewidth {g} Hz");
            (c, g)
        }
        _ => {
            let pooled = pooled_spectrum(spectra)?;
            let s = estimate_shape_params(&pooled, w.f_min_hz, w.f_max_hz)?;
            let _ = writeln!(
                text,
                "shape            pooled fit: centre {:.2} Hz, Q {:.3}, linewidth {:.3} Hz",
                s.center_hz, s.q, s.gamma_hz
            );
            (w.center_hz.unwrap_or(s.center_hz), w.gamma_hz.unwrap_or(s.gamma_hz))
        }
    };
    FitWindow::new(w.f_min_hz, w.f_max_hz, center, gamma)
}

fn cmd_fit(cfg: &RunConfig, spectra: &[Spectrum], out: &Path) -> Result<(String, ExponentEnsemble)> {
    let mut text = String::new();
    let _ = writeln!(
        text,
        "window           {} to {} Hz, objective {:?}, weighting {:?}",
        cfg.window.f_min_hz, cfg.window.f_max_hz, cfg.optimizer.objective, cfg.optimizer.weighting
    );
    let window = fit_window(cfg, spectra, &mut text)?;
    let pooled = match cfg.optimizer.weighting {
        Weighting::InverseVariance => Some(pooled_spectrum(spectra)?),
        Weighting::Uniform => None,
    };
    let e = ensemble_estimate(
        spectra,
        &window,
        &cfg.seeded_fit(),
        pooled.as_ref(),
        cfg.histogram.into(),
    )?;
    let boot = bootstrap(&e.ks(), cfg.bootstrap.n_resamples, cfg.seed)?;
    let nm = k_to_nonmarkovianity(e.mean_k, e.std_k, cfg.nonmarkov.delta_rel, cfg.nonmarkov.constant)?;
    if let Some(t) = spectra[0].truth {
        let _ = writeln!(text, "truth k          {}", t.k);
    }
    text.push_str(&io::ensemble_summary(&e, Some(&boot), Some(&nm)));
    io::write_text(&out.join("fits.csv"), &io::ensemble_to_csv(&e))?;
    io::write_text(&out.join("histogram.csv"), &io::histogram_to_csv(&e))?;
    io::write_text(&out.join("summary.txt"), &text)?;
    Ok((text, e))
}

fn model_label(m: &SpectralDensityModel) -> String {
    match m {
        SpectralDensityModel::OhmicCutoff { c, cutoff } => format!("ohmic_cutoff c={c} cutoff={cutoff}"),
        SpectralDensityModel::LocalPowerLaw { c, k, omega_lo, omega_hi } => {
            format!("local_power_law c={c} k={k} on [{omega_lo}, {omega_hi}]")
        }
        SpectralDensityModel::PiecewisePaper {
            i_omega,
            omega,
            k,
            delta,
            cutoff,
        } => format!("piecewise_paper I(Omega)={i_omega} Omega={omega} k={k} delta={delta} cutoff={cutoff}"),
        SpectralDensityModel::Tabulated { points } => format!("tabulated ({} points)", points.len()),
    }
}

fn cmd_nonmarkov(cfg: &RunConfig, model: &SpectralDensityModel, trajectory: bool, out: &Path) -> Result<String> {
    let osc = cfg.oscillator.natural();
    let env = Environment::new(model.clone(), osc)?.with_thermal(cfg.nonmarkov.thermal);
    let delta = cfg.nonmarkov.delta_rel * osc.omega;
    let asym = env.asymptotic_coefficients(delta)?;
    let c = asym.coefficients;
    let report = xi_measure(&c, osc.mass)?;
    let mut text = String::new();
    let _ = writeln!(text, "model            {}", model_label(model));
    let _ = writeln!(text, "theta            {:.6e} (k_B T / hbar Omega)", osc.theta);
    match weak_coupling_report(model, &osc, 1e-2, &QuadOptions::default()) {
        Ok(weak) => {
            let _ = writeln!(
                text,
                "weak coupling    K = {:.9}, slope ratio {:.3e}, shift ratio {:.3e} ({})",
                weak.k,
                weak.slope_ratio,
                weak.shift_ratio,
                if weak.passes() { "ok" } else { "violated" }
            );
        }
        Err(Error::Unphysical { k_squared }) => {
            let _ = writeln!(
                text,
                "weak coupling    not evaluated: K^2 = {k_squared:.6e} <= 0 without a frequency counterterm"
            );
        }
        Err(e) => return Err(e),
    }
    let _ = writeln!(text, "gamma(inf)       {:.9e}", c.gamma);
    let _ = writeln!(text, "dOmega^2(inf)    {:.9e}", c.delta_omega_sq);
    let _ = writeln!(text, "D_pp(inf)        {:.9e}", c.d_pp);
    let _ = writeln!(
        text,
        "D_xp(inf)        {:.9e} (window {:.9e} + rest {:.9e}, delta = {} Omega)",
        c.d_xp, asym.d_xp_res, asym.d_xp_off, cfg.nonmarkov.delta_rel
    );
    let _ = writeln!(text, "xi (eigenvalues) {:.6e}", report.xi);
    let _ = writeln!(text, "xi (from mu)     {:.6e} (mu = {:.6e})", report.xi_from_mu, report.mu);
    let mut extra = vec![
        ("theta".to_string(), format!("{:e}", osc.theta)),
        ("delta_rel".to_string(), cfg.nonmarkov.delta_rel.to_string()),
    ];
    if let SpectralDensityModel::PiecewisePaper { k, delta, omega, .. } = model {
        let b = mu_lower_bound(*k, *omega, *delta, cfg.nonmarkov.constant)?;
        let other = match cfg.nonmarkov.constant {
            BoundConstant::Asymptotic => BoundConstant::Printed,
            BoundConstant::Printed => BoundConstant::Asymptotic,
        };
        let alt = mu_lower_bound(*k, *omega, *delta, other)?;
        let _ = writeln!(
            text,
            "xi bound         {:.6e} (k = {k}, delta = {delta}, constant {:?} = {:.6}; {:?} would give {:.6e})",
            b.xi,
            cfg.nonmarkov.constant,
            cfg.nonmarkov.constant.value(),
            other,
            alt.xi
        );
        extra.push(("xi_bound".into(), format!("{:e}", b.xi)));
        extra.push(("mu_bound".into(), format!("{:e}", b.mu)));
    }
    io::write_text(&out.join("xi.csv"), &io::xi_report_to_csv(&c, &report, &extra))?;
    if trajectory {
        let t_end = cfg.nonmarkov.t_end_gamma / c.gamma;
        let n = cfg.nonmarkov.n_points;
        let grid: Vec<f64> = (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect();
        let mut samples = env.coefficients_on(&grid)?;
        let mut tail = c;
        if cfg.nonmarkov.frequency_counterterm {
            for s in samples.iter_mut().chain(std::iter::once(&mut tail)) {
                s.delta_omega_sq -= c.delta_omega_sq;
            }
        }
        let schedule = CoefficientSchedule::Sampled { samples, tail };
        let ground = [[1.0 / (osc.mass * osc.omega), 0.0], [0.0, osc.mass * osc.omega]];
        let states = propagate_covariance(&schedule, osc.mass, osc.omega, ground, &grid, &OdeOptions::default())?;
        let coeffs: Vec<_> = grid.iter().map(|&t| schedule.at(t)).collect();
        io::write_text(&out.join("trajectory.csv"), &io::trajectory_to_csv(&states, &coeffs))?;
        let fp = lyapunov_fixed_point(&tail, osc.mass, osc.omega)?;
        let last = states.last().map(|s| s.gamma_matrix).unwrap_or(ground);
        let _ = writeln!(
            text,
            "trajectory       {n} points to t = {t_end:.6e}; final Gamma_xx {:.6e}, Gamma_pp {:.6e} (fixed point {:.6e}, {:.6e})",
            last[0][0], last[1][1], fp[0][0], fp[1][1]
        );
    }
    io::write_text(&out.join("nonmarkov.txt"), &text)?;
    Ok(text)
}

fn cmd_pipeline(cfg: &RunConfig, out: &Path) -> Result<String> {
    let spectra = match cfg.data.mode {
        DataMode::Spectra => synth_spectra(&cfg.seeded_synth(), cfg.data.n_averages, cfg.data.n_spectra)?,
        DataMode::Timeseries => synth_series_spectra(cfg)?,
    };
    let (mut text, e) = cmd_fit(cfg, &spectra, out)?;
    let i_omega = cfg.oscillator.natural_density_at_resonance();
    let cutoff = match cfg.bath {
        SpectralDensityModel::PiecewisePaper { cutoff, .. } | SpectralDensityModel::OhmicCutoff { cutoff, .. } => cutoff,
        _ => 1e7,
    };
    let fitted = SpectralDensityModel::paper(i_omega, e.mean_k, cfg.nonmarkov.delta_rel, cutoff);
    text.push_str("--- bath with the fitted exponent ---\n");
    text.push_str(&cmd_nonmarkov(cfg, &fitted, false, out)?);
    io::write_text(&out.join("summary.txt"), &text)?;
    Ok(text)
}
