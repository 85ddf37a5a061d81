//! The cheap acceptance criteria, with reduced Monte Carlo sizes.
//!
//! `crystal verify` runs all ten at full size; this shows the library side
//! of it. Some criteria fail against the reference numbers they compare
//! with, and say so.
//!
//!     cargo run --release --example quick_verify

use crystal::harness::acceptance::{self, Options};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let opts = Options { seed: 1, trials: Some(100_000) };
    for id in [1, 2, 8, 9] {
        let c = acceptance::run(id, &opts);
        println!("{c}");
        for check in &c.checks {
            println!("    {check}");
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
