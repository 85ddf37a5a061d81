//! Experiments described in TOML.
//!
//! Every table the command-line tool prints comes from a spec like the one
//! below. Axes left out are filled with defaults; the resolved spec is
//! written into the output so a table can be regenerated from itself.
//!
//!     cargo run --release --example experiment_spec

use crystal::harness::{run_spec, ExperimentSpec, Format};

const SPEC: &str = r#"
kind = "table3"
seed = 11
trials = 20000

[grid]
alpha = [0.1, 0.3]
k = [2, 6]
delta = [0.0]
"#;

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let spec = ExperimentSpec::from_toml(SPEC)?;
    let table = run_spec(&spec)?;
    print!("{}", table.to_string(Format::Csv));

    // Mistakes are reported with their path.
    let bad = "kind = \"fig6\"\n[grid]\ngamma_off = [0.1, 1.5]\n";
    match ExperimentSpec::from_toml(bad).and_then(|s| s.resolved()) {
        Ok(_) => println!("\nunexpectedly accepted"),
        Err(e) => println!("\nrejected: {e}"),
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
