//! The full pipeline through the command-line entry point: synthetic
//! spectra at the measured device's shape, the exponent fit, the ensemble
//! summary and the ξ bound.
//!
//! ```text
//! cargo run --release --example paper_pipeline [-- <truth k>]
//! ```

fn main() {
    let k = std::env::args().nth(1).unwrap_or_else(|| "-2.3".into());
    let out = std::env::temp_dir().join("bathscope_paper_pipeline");
    let args = [
        "bathscope",
        "pipeline",
        "--preset",
        "paper-synth",
        "--truth-k",
        &k,
        "--out",
        out.to_str().expect("utf-8 temp dir"),
    ];
    let code = bathscope::cli::main_with_args(args, &mut std::io::stdout());
    println!("outputs in {}", out.display());
    std::process::exit(code);
}
