//! Command-line behaviour: exit codes, output files and their formats.

use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bathscope"))
        .args(args)
        .output()
        .expect("spawn bathscope")
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().unwrap_or(-1)
}

fn out_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_lists_every_subcommand() {
    let o = run(&["--help"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for sub in ["synth", "spectrum", "fit", "nonmarkov", "pipeline"] {
        assert!(text.contains(sub), "missing {sub} in\n{text}");
    }
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(code(&["synth", "--preset", "nope", "--out", out_arg(&out)]), 2);
    assert_eq!(code(&["synth", "--truth-k", "9", "--out", out_arg(&out)]), 2);
    let missing = dir.path().join("missing.toml");
    assert_eq!(code(&["synth", "--config", out_arg(&missing), "--out", out_arg(&out)]), 2);
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[synth]\nwobble = 1\n").unwrap();
    let o = run(&["synth", "--config", out_arg(&bad), "--out", out_arg(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("wobble"));
    assert_eq!(code(&["fit", "--window", "9:1", out_arg(&out)]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
}

#[test]
fn data_errors_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let missing = dir.path().join("none.csv");
    assert_eq!(code(&["fit", "--out", out_arg(&out), out_arg(&missing)]), 3);
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "omega_hz,psd\n900000,1e-3\n900100,oops\n").unwrap();
    let o = run(&["fit", "--out", out_arg(&out), out_arg(&bad)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("oops"));
    assert_eq!(code(&["spectrum", "--input", out_arg(&missing), "--out", out_arg(&out)]), 3);
}

#[test]
fn synth_spectrum_fit_chain_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(
        &cfg,
        "seed = 5\n[data]\nmode = \"timeseries\"\nn_batches = 40\nn_averages = 10\n",
    )
    .unwrap();
    let series = dir.path().join("series");
    let o = run(&["synth", "--preset", "paper-synth", "--config", out_arg(&cfg), "--out", out_arg(&series)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let spectra = dir.path().join("spectra");
    let bsts = series.join("timeseries.bsts");
    let o = run(&[
        "spectrum",
        "--preset",
        "paper-synth",
        "--config",
        out_arg(&cfg),
        "--input",
        out_arg(&bsts),
        "--out",
        out_arg(&spectra),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let files: Vec<_> = std::fs::read_dir(spectra.join("spectra")).unwrap().collect();
    assert_eq!(files.len(), 4);
    let first = std::fs::read_to_string(spectra.join("spectra").join("spectrum_00000.csv")).unwrap();
    assert!(first.starts_with("# format = bathscope-spectrum-v1"));
    assert!(first.contains("omega_hz,psd"));

    let fit = dir.path().join("fit");
    let o = run(&["fit", "--preset", "paper-synth", "--out", out_arg(&fit), out_arg(&spectra.join("spectra"))]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fits = std::fs::read_to_string(fit.join("fits.csv")).unwrap();
    assert_eq!(fits.lines().count(), 5);
    assert!(fits.starts_with("index,k,c,residual"));
    let hist = std::fs::read_to_string(fit.join("histogram.csv")).unwrap();
    let total: u64 = hist.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(total, 4);
    assert!(fit.join("summary.txt").exists());
    assert!(fit.join("effective_config.toml").exists());
}

#[test]
fn nonmarkov_writes_trajectory_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nm");
    let o = run(&["nonmarkov", "--preset", "subohmic", "--trajectory", "--out", out_arg(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,gamma_xx,gamma_xp,gamma_pp,gamma,delta_omega_sq,d_pp,d_xp"
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 201);
    assert!(rows.iter().all(|r| r.len() == 8 && r.iter().all(|v| v.is_finite())));
    assert!(rows.windows(2).all(|w| w[1][0] > w[0][0]));
    let xi = std::fs::read_to_string(out.join("xi.csv")).unwrap();
    assert!(xi.starts_with("key,value"));
    assert!(xi.contains("xi,"));
}

#[test]
fn pipeline_reports_truth_and_bound() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p");
    let o = run(&["pipeline", "--preset", "paper-synth", "--truth-k", "0", "--out", out_arg(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("truth k"), "{text}");
    assert!(text.contains("xi bound"), "{text}");
    for f in ["fits.csv", "histogram.csv", "summary.txt", "xi.csv", "nonmarkov.txt"] {
        assert!(out.join(f).exists(), "{f}");
    }
}
