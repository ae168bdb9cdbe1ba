//! File formats.
//!
//! **Spectrum CSV.** Comment lines start with `#` and hold `key = value`
//! pairs, then a `omega_hz,psd` header and one row per bin. The first column
//! is ordinary frequency in Hz (the name is historical); `psd` is one-sided,
//! in units²/Hz. Recognised keys: `format` (`bathscope-spectrum-v1`),
//! `convention`, `n_averages`, `provenance`, `truth_k`, `truth_center_hz`,
//! `truth_q`, `truth_peak_psd`, `truth_floor_rel`. Other keys are kept as a
//! free-form parameter snapshot and ignored on read.
//!
//! **Time-series binary (`.bsts`).** Little-endian. An 80-byte header
//!
//! | offset | type   | field                                   |
//! |--------|--------|-----------------------------------------|
//! | 0      | [u8;4] | magic `BSTS`                            |
//! | 4      | u32    | version (1)                             |
//! | 8      | f64    | sample rate (Hz)                        |
//! | 16     | u64    | sample count                            |
//! | 24     | u64    | seed                                    |
//! | 32     | u64    | 1 if a truth block follows, else 0      |
//! | 40     | 5×f64  | truth k, centre Hz, Q, peak PSD, floor  |
//!
//! followed by `count` f64 samples. The truth block is always present and
//! holds NaN when absent.
//!
//! **Time-series CSV.** `# sample_rate = …`, `# seed = …`, then `t_s,x`.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimate::{BootstrapSummary, ExponentEnsemble, NonMarkovReport};
use crate::qbm::{CovarianceState, QbmCoefficients, XiReport};
use crate::spectrum::{Spectrum, Truth};
use crate::synth::TimeSeries;

pub const SPECTRUM_FORMAT: &str = "bathscope-spectrum-v1";
pub const TS_MAGIC: &[u8; 4] = b"BSTS";
pub const TS_VERSION: u32 = 1;
pub const TS_HEADER_LEN: usize = 80;

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?))
}

fn write_all(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}

/// Renders a spectrum; `params` are extra `# key = value` lines.
pub fn spectrum_to_csv(s: &Spectrum, params: &[(String, String)]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# format = {SPECTRUM_FORMAT}");
    let _ = writeln!(out, "# convention = one-sided PSD per Hz over ordinary frequency in Hz");
    let _ = writeln!(out, "# n_averages = {}", s.n_averages);
    let _ = writeln!(out, "# provenance = {}", s.provenance);
    if let Some(t) = &s.truth {
        let _ = writeln!(out, "# truth_k = {}", t.k);
        let _ = writeln!(out, "# truth_center_hz = {}", t.center_hz);
        let _ = writeln!(out, "# truth_q = {}", t.q);
        let _ = writeln!(out, "# truth_peak_psd = {}", t.peak_psd);
        let _ = writeln!(out, "# truth_floor_rel = {}", t.floor_rel);
    }
    for (k, v) in params {
        let _ = writeln!(out, "# {k} = {v}");
    }
    out.push_str("omega_hz,psd\n");
    for (f, p) in s.freqs_hz.iter().zip(&s.psd) {
        let _ = writeln!(out, "{f},{p:e}");
    }
    out
}

pub fn write_spectrum(path: &Path, s: &Spectrum, params: &[(String, String)]) -> Result<()> {
    write_all(path, &spectrum_to_csv(s, params))
}

/// Parses the spectrum CSV. Every malformed or non-finite row is listed in
/// the error.
pub fn parse_spectrum(text: &str, source: &str) -> Result<Spectrum> {
    let mut meta = std::collections::BTreeMap::new();
    let mut freqs = Vec::new();
    let mut psd = Vec::new();
    let mut bad = Vec::new();
    let mut seen_header = false;
    for (i, line) in text.lines().enumerate() {
        let row = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            if let Some((k, v)) = c.split_once('=') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        if !seen_header {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols != ["omega_hz", "psd"] {
                return Err(Error::Data(format!(
                    "{source}: line {row}: expected header `omega_hz,psd`, found `{line}`"
                )));
            }
            seen_header = true;
            continue;
        }
        let mut it = line.split(',');
        let parsed = match (it.next(), it.next(), it.next()) {
            (Some(a), Some(b), None) => a.trim().parse::<f64>().ok().zip(b.trim().parse::<f64>().ok()),
            _ => None,
        };
        match parsed {
            Some((f, p)) if f.is_finite() && p.is_finite() && p >= 0.0 => {
                freqs.push(f);
                psd.push(p);
            }
            Some(_) => bad.push(format!("line {row}: non-finite or negative value `{line}`")),
            None => bad.push(format!("line {row}: cannot parse `{line}`")),
        }
    }
    if !seen_header {
        return Err(Error::Data(format!("{source}: missing `omega_hz,psd` header")));
    }
    if !bad.is_empty() {
        return Err(Error::Data(format!("{source}: {} bad rows; {}", bad.len(), bad.join("; "))));
    }
    if let Some(f) = meta.get("format") {
        if f != SPECTRUM_FORMAT {
            return Err(Error::Data(format!("{source}: unsupported format `{f}`")));
        }
    }
    let num = |key: &str| -> Result<Option<f64>> {
        meta.get(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::Data(format!("{source}: header `{key}` is not a number: `{v}`")))
            })
            .transpose()
    };
    let n_averages = match meta.get("n_averages") {
        Some(v) => v
            .parse::<u64>()
            .map_err(|_| Error::Data(format!("{source}: header `n_averages` is not an integer: `{v}`")))?,
        None => 1,
    };
    let provenance = meta
        .get("provenance")
        .cloned()
        .unwrap_or_else(|| format!("ingested {source}"));
    let mut s = Spectrum::new(freqs, psd, n_averages, provenance)
        .map_err(|e| Error::Data(format!("{source}: {e}")))?;
    if let Some(k) = num("truth_k")? {
        s.truth = Some(Truth {
            k,
            center_hz: num("truth_center_hz")?.unwrap_or(f64::NAN),
            q: num("truth_q")?.unwrap_or(f64::NAN),
            peak_psd: num("truth_peak_psd")?.unwrap_or(f64::NAN),
            floor_rel: num("truth_floor_rel")?.unwrap_or(f64::NAN),
        });
    }
    Ok(s)
}

pub fn read_spectrum(path: &Path) -> Result<Spectrum> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_spectrum(&text, &path.display().to_string())
}

fn truth_block(t: Option<Truth>) -> [f64; 5] {
    match t {
        Some(t) => [t.k, t.center_hz, t.q, t.peak_psd, t.floor_rel],
        None => [f64::NAN; 5],
    }
}

/// Streaming writer for the binary time-series format.
pub struct TimeSeriesWriter {
    out: BufWriter<File>,
    expected: u64,
    written: u64,
    path: std::path::PathBuf,
}

impl TimeSeriesWriter {
    pub fn create(path: &Path, sample_rate: f64, count: u64, seed: u64, truth: Option<Truth>) -> Result<Self> {
        let mut out = create(path)?;
        let mut h = Vec::with_capacity(TS_HEADER_LEN);
        h.extend_from_slice(TS_MAGIC);
        h.extend_from_slice(&TS_VERSION.to_le_bytes());
        h.extend_from_slice(&sample_rate.to_le_bytes());
        h.extend_from_slice(&count.to_le_bytes());
        h.extend_from_slice(&seed.to_le_bytes());
        h.extend_from_slice(&u64::from(truth.is_some()).to_le_bytes());
        for v in truth_block(truth) {
            h.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&h).map_err(|e| io_err(path, e))?;
        Ok(Self {
            out,
            expected: count,
            written: 0,
            path: path.to_path_buf(),
        })
    }

    pub fn write_samples(&mut self, samples: &[f64]) -> Result<()> {
        if self.written + samples.len() as u64 > self.expected {
            return Err(Error::Io(format!(
                "{}: more samples than the declared {}",
                self.path.display(),
                self.expected
            )));
        }
        let mut buf = Vec::with_capacity(8 * samples.len());
        for v in samples {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.out.write_all(&buf).map_err(|e| io_err(&self.path, e))?;
        self.written += samples.len() as u64;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        if self.written != self.expected {
            return Err(Error::Io(format!(
                "{}: wrote {} samples, header declares {}",
                self.path.display(),
                self.written,
                self.expected
            )));
        }
        self.out.flush().map_err(|e| io_err(&self.path, e))
    }
}

pub fn write_timeseries(path: &Path, ts: &TimeSeries) -> Result<()> {
    let mut w = TimeSeriesWriter::create(path, ts.sample_rate, ts.samples.len() as u64, ts.seed, ts.truth)?;
    w.write_samples(&ts.samples)?;
    w.finish()
}

/// Header of a binary time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSeriesHeader {
    pub sample_rate: f64,
    pub count: u64,
    pub seed: u64,
    pub truth: Option<Truth>,
}

/// Streaming reader for the binary time-series format.
pub struct TimeSeriesReader {
    input: BufReader<File>,
    pub header: TimeSeriesHeader,
    remaining: u64,
    path: std::path::PathBuf,
}

impl TimeSeriesReader {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| io_err(path, e))?;
        let len = file.metadata().map_err(|e| io_err(path, e))?.len();
        let mut input = BufReader::with_capacity(1 << 20, file);
        let mut h = [0u8; TS_HEADER_LEN];
        input
            .read_exact(&mut h)
            .map_err(|_| Error::Data(format!("{}: truncated header", path.display())))?;
        if &h[0..4] != TS_MAGIC {
            return Err(Error::Data(format!("{}: bad magic, not a BSTS file", path.display())));
        }
        let u32_at = |o: usize| u32::from_le_bytes(h[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(h[o..o + 8].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(h[o..o + 8].try_into().unwrap());
        let version = u32_at(4);
        if version != TS_VERSION {
            return Err(Error::Data(format!("{}: unsupported version {version}", path.display())));
        }
        let header = TimeSeriesHeader {
            sample_rate: f64_at(8),
            count: u64_at(16),
            seed: u64_at(24),
            truth: (u64_at(32) == 1).then(|| Truth {
                k: f64_at(40),
                center_hz: f64_at(48),
                q: f64_at(56),
                peak_psd: f64_at(64),
                floor_rel: f64_at(72),
            }),
        };
        if !(header.sample_rate > 0.0 && header.sample_rate.is_finite()) {
            return Err(Error::Data(format!(
                "{}: sample rate {} is not positive",
                path.display(),
                header.sample_rate
            )));
        }
        let expected = TS_HEADER_LEN as u64 + 8 * header.count;
        if len != expected {
            return Err(Error::Data(format!(
                "{}: file has {len} bytes, header implies {expected}",
                path.display()
            )));
        }
        Ok(Self {
            input,
            remaining: header.count,
            header,
            path: path.to_path_buf(),
        })
    }

    /// Up to `n` further samples; empty at the end. Non-finite samples are
    /// a data error.
    pub fn read_chunk(&mut self, n: usize) -> Result<Vec<f64>> {
        let take = (n as u64).min(self.remaining) as usize;
        let mut buf = vec![0u8; 8 * take];
        self.input.read_exact(&mut buf).map_err(|e| io_err(&self.path, e))?;
        self.remaining -= take as u64;
        let start = self.header.count - self.remaining - take as u64;
        buf.chunks_exact(8)
            .enumerate()
            .map(|(i, b)| {
                let v = f64::from_le_bytes(b.try_into().unwrap());
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Data(format!(
                        "{}: sample {} is not finite",
                        self.path.display(),
                        start + i as u64
                    )))
                }
            })
            .collect()
    }
}

pub fn read_timeseries(path: &Path) -> Result<TimeSeries> {
    let mut r = TimeSeriesReader::open(path)?;
    let samples = r.read_chunk(r.header.count as usize)?;
    let ts = TimeSeries {
        sample_rate: r.header.sample_rate,
        samples,
        seed: r.header.seed,
        truth: r.header.truth,
    };
    ts.validate()?;
    Ok(ts)
}

pub fn timeseries_to_csv(ts: &TimeSeries) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# sample_rate = {}", ts.sample_rate);
    let _ = writeln!(out, "# seed = {}", ts.seed);
    out.push_str("t_s,x\n");
    for (i, x) in ts.samples.iter().enumerate() {
        let _ = writeln!(out, "{},{x:e}", i as f64 / ts.sample_rate);
    }
    out
}

pub fn parse_timeseries_csv(text: &str, source: &str) -> Result<TimeSeries> {
    let mut sample_rate = None;
    let mut seed = 0;
    let mut samples = Vec::new();
    let mut header = false;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            if let Some((k, v)) = c.split_once('=') {
                match k.trim() {
                    "sample_rate" => sample_rate = v.trim().parse::<f64>().ok(),
                    "seed" => seed = v.trim().parse::<u64>().unwrap_or(0),
                    _ => {}
                }
            }
            continue;
        }
        if !header {
            header = true;
            continue;
        }
        let x = line
            .split(',')
            .nth(1)
            .and_then(|v| v.trim().parse::<f64>().ok())
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::Data(format!("{source}: line {}: bad sample `{line}`", i + 1)))?;
        samples.push(x);
    }
    let ts = TimeSeries {
        sample_rate: sample_rate.ok_or_else(|| Error::Data(format!("{source}: missing `# sample_rate`")))?,
        samples,
        seed,
        truth: None,
    };
    ts.validate()?;
    Ok(ts)
}

/// Per-fit rows of an ensemble.
pub fn ensemble_to_csv(e: &ExponentEnsemble) -> String {
    let mut out =
        String::from("index,k,c,residual,objective,iterations,final_temperature,restarts,at_boundary,n_bins,error\n");
    for r in &e.records {
        match &r.fit {
            Ok(f) => {
                let _ = writeln!(
                    out,
                    "{},{},{:e},{:e},{},{},{:e},{},{},{},",
                    r.index,
                    f.k,
                    f.c,
                    f.residual,
                    match f.objective {
                        crate::estimate::Objective::Linear => "linear",
                        crate::estimate::Objective::Log => "log",
                    },
                    f.iterations,
                    f.final_temperature,
                    f.restarts,
                    f.at_boundary,
                    f.n_bins
                );
            }
            Err(msg) => {
                let _ = writeln!(out, "{},,,,,,,,,,\"{}\"", r.index, msg.replace('"', "'"));
            }
        }
    }
    out
}

pub fn histogram_to_csv(e: &ExponentEnsemble) -> String {
    let mut out = String::from("k_lo,k_hi,count\n");
    let h = &e.histogram;
    for (i, c) in h.counts.iter().enumerate() {
        let _ = writeln!(out, "{},{},{c}", h.edges[i], h.edges[i + 1]);
    }
    out
}

/// Human-readable summary block.
pub fn ensemble_summary(
    e: &ExponentEnsemble,
    boot: Option<&BootstrapSummary>,
    xi: Option<&NonMarkovReport>,
) -> String {
    let mut out = String::new();
    let failed = e.records.len() - e.n_ok;
    let _ = writeln!(out, "spectra          {} ({} fitted, {} failed)", e.records.len(), e.n_ok, failed);
    let _ = writeln!(out, "k                {:.4} ± {:.4} (std)", e.mean_k, e.std_k);
    let _ = writeln!(out, "standard error   {:.4}", e.std_err());
    if let Some(b) = boot {
        let _ = writeln!(
            out,
            "bootstrap        mean {:.4}, std {:.4}, 95% [{:.4}, {:.4}] ({} resamples)",
            b.mean, b.std, b.p2_5, b.p97_5, b.n_resamples
        );
    }
    if let Some(x) = xi {
        let _ = writeln!(
            out,
            "xi lower bound   {:.4e} ± {:.4e} (delta = {} Omega, constant {:?}, mu = {:.4e})",
            x.xi, x.xi_std, x.delta_rel, x.constant, x.mu
        );
    }
    let _ = writeln!(out, "histogram");
    let peak = e.histogram.counts.iter().copied().max().unwrap_or(0).max(1);
    for (i, c) in e.histogram.counts.iter().enumerate() {
        if *c == 0 {
            continue;
        }
        let bar = "#".repeat(((40 * c) as f64 / peak as f64).ceil() as usize);
        let _ = writeln!(
            out,
            "  [{:>6.2}, {:>6.2})  {:>5}  {bar}",
            e.histogram.edges[i],
            e.histogram.edges[i + 1],
            c
        );
    }
    out
}

/// Covariance trajectory with the coefficients used at each time.
pub fn trajectory_to_csv(states: &[CovarianceState], coeffs: &[QbmCoefficients]) -> String {
    let mut out = String::from("t,gamma_xx,gamma_xp,gamma_pp,gamma,delta_omega_sq,d_pp,d_xp\n");
    for (s, c) in states.iter().zip(coeffs) {
        let g = s.gamma_matrix;
        let _ = writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            s.t, g[0][0], g[0][1], g[1][1], c.gamma, c.delta_omega_sq, c.d_pp, c.d_xp
        );
    }
    out
}

/// `key,value` rows for a ξ evaluation.
pub fn xi_report_to_csv(c: &QbmCoefficients, r: &XiReport, extra: &[(String, String)]) -> String {
    let mut out = String::from("key,value\n");
    for (k, v) in [
        ("gamma", c.gamma),
        ("delta_omega_sq", c.delta_omega_sq),
        ("d_pp", c.d_pp),
        ("d_xp", c.d_xp),
        ("lambda_min", r.lambda_min),
        ("lambda_max", r.lambda_max),
        ("mu", r.mu),
        ("xi", r.xi),
        ("xi_from_mu", r.xi_from_mu),
    ] {
        let _ = writeln!(out, "{k},{v:e}");
    }
    for (k, v) in extra {
        let _ = writeln!(out, "{k},{v}");
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_all(path, text)
}

/// Lines of a text file, for small inputs.
pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    BufReader::new(f)
        .lines()
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| io_err(path, e))
}
