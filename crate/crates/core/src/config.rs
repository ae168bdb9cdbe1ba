//! Run configuration: a TOML document with one table per module.
//!
//! Bath models are given in natural units (frequencies in units of the bare
//! mechanical frequency, `I(Ω) = 1/(πQ)` for Ohmic damping at quality
//! factor Q); oscillator and cavity use SI; synthetic data and fit windows
//! use Hz. The top-level `seed` drives every random stream. Unknown keys are
//! rejected. See `docs/config.md` for the full schema.

use serde::{Deserialize, Serialize};

use crate::bath::SpectralDensityModel;
use crate::error::{Error, Result};
use crate::estimate::{FitOptions, HistogramSpec};
use crate::optomech::CavityParams;
use crate::qbm::BoundConstant;
use crate::synth::{ContaminantMode, SynthConfig};
use crate::units::{OscillatorParams, ThermalMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataMode {
    /// Averaged spectra drawn directly from their exact distribution.
    #[default]
    Spectra,
    /// Time series, batched and Fourier transformed.
    Timeseries,
}

/// How much synthetic data to produce.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub mode: DataMode,
    /// Averaged spectra in the ensemble.
    pub n_spectra: u64,
    /// Periodograms per averaged spectrum.
    pub n_averages: u64,
    /// Total batches in time-series mode; should equal
    /// `n_spectra · n_averages` when feeding a fit.
    pub n_batches: u64,
    /// Also write the time series as CSV (small runs only).
    pub timeseries_csv: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            mode: DataMode::Spectra,
            n_spectra: 90,
            n_averages: 100,
            n_batches: 9000,
            timeseries_csv: false,
        }
    }
}

/// Fit band; the shape is estimated from the pooled spectrum unless both
/// `center_hz` and `gamma_hz` are given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowConfig {
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_hz: Option<f64>,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            f_min_hz: 885e3,
            f_max_hz: 945e3,
            center_hz: None,
            gamma_hz: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BootstrapConfig {
    pub n_resamples: usize,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { n_resamples: 1000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HistogramConfig {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl Default for HistogramConfig {
    fn default() -> Self {
        let d = HistogramSpec::default();
        Self {
            lo: d.lo,
            hi: d.hi,
            bins: d.bins,
        }
    }
}

impl From<HistogramConfig> for HistogramSpec {
    fn from(h: HistogramConfig) -> Self {
        HistogramSpec {
            lo: h.lo,
            hi: h.hi,
            bins: h.bins,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NonMarkovConfig {
    /// Half-width of the resonant window, in units of Ω.
    pub delta_rel: f64,
    pub constant: BoundConstant,
    pub thermal: ThermalMode,
    /// Trajectory length in units of `1/γ(∞)`.
    pub t_end_gamma: f64,
    pub n_points: usize,
    /// Subtract `δΩ²(∞)` from the trajectory's frequency shift so that the
    /// renormalised frequency tends to the bare one. Without it a large
    /// cutoff drives `Ω² + δΩ²` negative.
    pub frequency_counterterm: bool,
}

impl Default for NonMarkovConfig {
    fn default() -> Self {
        Self {
            delta_rel: 0.03,
            constant: BoundConstant::Asymptotic,
            thermal: ThermalMode::Quantum,
            t_end_gamma: 20.0,
            n_points: 201,
            frequency_counterterm: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "bathscope-out".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub oscillator: OscillatorParams,
    pub bath: SpectralDensityModel,
    pub cavity: CavityParams,
    pub synth: SynthConfig,
    pub data: DataConfig,
    pub window: WindowConfig,
    pub optimizer: FitOptions,
    pub bootstrap: BootstrapConfig,
    pub histogram: HistogramConfig,
    pub nonmarkov: NonMarkovConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let osc = OscillatorParams::paper_device();
        Self {
            seed: 0,
            oscillator: osc,
            bath: SpectralDensityModel::OhmicCutoff {
                c: osc.natural_density_at_resonance(),
                cutoff: 1e7,
            },
            cavity: CavityParams::paper(),
            synth: SynthConfig::default(),
            data: DataConfig::default(),
            window: WindowConfig::default(),
            optimizer: FitOptions::default(),
            bootstrap: BootstrapConfig::default(),
            histogram: HistogramConfig::default(),
            nonmarkov: NonMarkovConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

pub const PRESETS: [&str; 4] = ["paper", "paper-synth", "ohmic", "subohmic"];

/// Named starting points.
///
/// * `paper`: the measured device with the sub-Ohmic exponent −2.3 in a
///   window of half-width `10⁻³Ω`, 9000 time-series batches of 100 000
///   samples.
/// * `paper-synth`: the same shape as 90 averaged spectra of 100.
/// * `ohmic`: Ohmic bath with cutoff `10⁷Ω`, k = 1 synthetic truth.
/// * `subohmic`: k = 0 inside a `0.03Ω` window.
pub fn preset(name: &str) -> Result<RunConfig> {
    let base = RunConfig::default();
    let i_omega = base.oscillator.natural_density_at_resonance();
    let paper_bath = |k: f64, delta: f64| SpectralDensityModel::paper(i_omega, k, delta, 1e7);
    let mut cfg = match name {
        "paper" => RunConfig {
            bath: paper_bath(-2.3, 1e-3),
            data: DataConfig {
                mode: DataMode::Timeseries,
                ..DataConfig::default()
            },
            ..base
        },
        "paper-synth" => RunConfig {
            bath: paper_bath(-2.3, 1e-3),
            ..base
        },
        "ohmic" => base,
        "subohmic" => RunConfig {
            bath: paper_bath(0.0, 0.03),
            ..base
        },
        _ => {
            return Err(Error::Config(format!(
                "unknown preset `{name}` (known: {})",
                PRESETS.join(", ")
            )))
        }
    };
    cfg.synth.k = match &cfg.bath {
        SpectralDensityModel::PiecewisePaper { k, .. } => *k,
        _ => 1.0,
    };
    if name == "paper" || name == "paper-synth" {
        cfg.nonmarkov.delta_rel = 1e-3;
    }
    Ok(cfg)
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            // A bath of another kind replaces the table instead of mixing keys.
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) if k != "bath" => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl RunConfig {
    /// Parses `text` on top of `base` (tables merge key by key).
    pub fn from_toml_over(base: &RunConfig, text: &str) -> Result<Self> {
        let over: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut table =
            toml::Table::try_from(base).map_err(|e| Error::Config(format!("cannot serialise base config: {e}")))?;
        merge(&mut table, over);
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_over(&RunConfig::default(), text)
    }

    pub fn to_toml(&self) -> String {
        let mut s = String::from("# effective configuration, all defaults resolved\n");
        s.push_str(&toml::to_string(self).expect("config serialises"));
        s
    }

    /// Copies of the module configs with the run seed applied.
    pub fn seeded_synth(&self) -> SynthConfig {
        SynthConfig {
            seed: self.seed,
            ..self.synth.clone()
        }
    }

    pub fn seeded_fit(&self) -> FitOptions {
        let mut f = self.optimizer;
        f.anneal.seed = self.seed;
        f
    }

    /// Schema checks beyond types; messages name the offending field.
    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, e: Error| -> Error {
            Error::Config(format!(
                "{name}: {}",
                match e {
                    Error::Config(m) | Error::Domain(m) => m,
                    other => other.to_string(),
                }
            ))
        };
        self.oscillator.validate().map_err(|e| field("oscillator", e))?;
        self.bath.validate().map_err(|e| field("bath", e))?;
        self.cavity.validate().map_err(|e| field("cavity", e))?;
        self.synth.validate().map_err(|e| field("synth", e))?;
        self.optimizer.anneal.validate().map_err(|e| field("optimizer.anneal", e))?;
        let a = &self.optimizer.anneal;
        if !(self.synth.k >= a.k_min && self.synth.k <= a.k_max) {
            return Err(Error::Config(format!(
                "synth.k: {} lies outside the search domain [{}, {}]",
                self.synth.k, a.k_min, a.k_max
            )));
        }
        if self.data.n_averages == 0 || self.data.n_spectra == 0 {
            return Err(Error::Config("data: n_spectra and n_averages must be >= 1".into()));
        }
        if self.data.mode == DataMode::Timeseries && self.data.n_batches == 0 {
            return Err(Error::Config("data.n_batches must be >= 1".into()));
        }
        let w = &self.window;
        if !(w.f_min_hz > 0.0 && w.f_max_hz > w.f_min_hz) {
            return Err(Error::Config(format!(
                "window: need 0 < f_min_hz < f_max_hz, got {} and {}",
                w.f_min_hz, w.f_max_hz
            )));
        }
        if let Some(c) = w.center_hz {
            if !(c > w.f_min_hz && c < w.f_max_hz) {
                return Err(Error::Config(format!("window.center_hz: {c} lies outside the window")));
            }
        }
        if let Some(g) = w.gamma_hz {
            if !(g > 0.0) {
                return Err(Error::Config(format!("window.gamma_hz: must be positive, got {g}")));
            }
        }
        if self.bootstrap.n_resamples < 2 {
            return Err(Error::Config("bootstrap.n_resamples must be >= 2".into()));
        }
        let h = &self.histogram;
        if h.bins == 0 || !(h.hi > h.lo) {
            return Err(Error::Config("histogram: need bins >= 1 and hi > lo".into()));
        }
        let n = &self.nonmarkov;
        if !(n.delta_rel > 0.0 && n.delta_rel < 1.0) {
            return Err(Error::Config(format!("nonmarkov.delta_rel: must lie in (0, 1), got {}", n.delta_rel)));
        }
        if !(n.t_end_gamma > 0.0) || n.n_points < 2 {
            return Err(Error::Config("nonmarkov: need t_end_gamma > 0 and n_points >= 2".into()));
        }
        if self.output.dir.is_empty() {
            return Err(Error::Config("output.dir must not be empty".into()));
        }
        Ok(())
    }

    /// Next mechanical mode of the measured device at 1.2 MHz, given the
    /// same Q and (conservatively) the same peak PSD as the fundamental.
    pub fn paper_higher_mode() -> ContaminantMode {
        ContaminantMode {
            center_hz: 1.2e6,
            q: 215.0,
            peak_rel: 1.0,
        }
    }
}
