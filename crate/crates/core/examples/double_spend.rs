//! Double-spend probability after `k` confirmations.
//!
//! The attacker pre-mines a block, mines privately while the merchant waits
//! for `k` confirmations, then races the honest chain. Under certificates
//! its private chain cannot grow past the pre-mined block. Closed forms are
//! checked against importance-sampled races, and a nonzero delay shows the
//! cost of wasted honest blocks.
//!
//!     cargo run --release --example double_spend

use crystal::analytics::{double_spend_prob_crystal, double_spend_prob_nc, DoubleSpendConvention};
use crystal::chain::Protocol;
use crystal::sim::races::{double_spend_experiment, DoubleSpendSpec, Sampling};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let trials = 50_000;
    println!("{:>9} {:>5} {:>2} {:>11} {:>11} {:>9}", "protocol", "alpha", "k", "closed form", "estimate", "std err");
    for protocol in [Protocol::Nakamoto, Protocol::Crystal] {
        for (alpha, k) in [(0.1, 6), (0.3, 6), (0.3, 2)] {
            let exact = match protocol {
                Protocol::Nakamoto => double_spend_prob_nc(alpha, k),
                Protocol::Crystal => double_spend_prob_crystal(alpha, k, DoubleSpendConvention::Table),
            };
            let o = double_spend_experiment(&DoubleSpendSpec {
                protocol,
                alpha,
                k,
                delta: 0.0,
                lambda: 1.0 / 600.0,
                trials,
                sampling: Sampling::Importance,
                seed: k as u64,
            });
            println!("{:>9} {alpha:>5} {k:>2} {exact:>11.4e} {:>11.4e} {:>9.1e}", format!("{protocol:?}"), o.estimate, o.std_err);
        }
    }

    println!("\nalpha = 0.3, k = 6, one block per 600 s");
    for delta in [0.0, 30.0, 120.0] {
        let row: Vec<String> = [Protocol::Nakamoto, Protocol::Crystal]
            .into_iter()
            .map(|protocol| {
                let o = double_spend_experiment(&DoubleSpendSpec {
                    protocol,
                    alpha: 0.3,
                    k: 6,
                    delta,
                    lambda: 1.0 / 600.0,
                    trials,
                    sampling: Sampling::Importance,
                    seed: 9,
                });
                format!("{protocol:?} {:.4e}", o.estimate)
            })
            .collect();
        println!("delta {delta:>5} s: {}", row.join(", "));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
