//! Full criterion report for a config file, as printed by `orthofield check`.
//!
//! ```text
//! cargo run --example criteria_report -- crates/core/examples/configs/moving_average.toml
//! ```

use std::path::PathBuf;

use orthofield::cli::{check_report, render_check, OutputFormat, RunConfig};

fn main() -> orthofield::Result<()> {
    let path = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/configs/moving_average.toml")
    });
    let config = RunConfig::load(&path)?;
    let report = check_report(&config)?;
    print!("{}", render_check(&report, OutputFormat::Csv)?);
    println!();
    println!("threshold {:.4e}", report.threshold);
    println!("candidate {}", report.candidate);
    let v = &report.verdicts;
    println!("defdlim2 {}, regularity {}, variance {}", v.defdlim2.as_str(), v.regularity.as_str(), v.variance.as_str());
    println!("conclusion: {}", v.conclusion);
    if !report.flags.is_empty() {
        println!("flags: {}", report.flags.join(", "));
    }
    Ok(())
}
