//! Selfish mining revenue: longest chain against certificates.
//!
//! Under the longest-chain rule a selfish miner earns more than its share
//! of the hash power. With per-block certificates it can withhold at most
//! one block, and its revenue stays below its share.
//!
//!     cargo run --release --example selfish_mining

use crystal::analytics::{selfish_revenue_crystal, selfish_revenue_nc};
use crystal::chain::Protocol;
use crystal::sim::races::{selfish_mining_experiment, SelfishSpec};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let gamma = 0.5;
    let blocks = 200_000;
    println!("gamma = {gamma}, {blocks} blocks per point");
    println!("{:>5} {:>10} {:>10} {:>10} {:>10}", "alpha", "nc sim", "nc exact", "cr sim", "cr exact");
    for (i, alpha) in [0.1, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45].into_iter().enumerate() {
        let sim = |protocol| selfish_mining_experiment(&SelfishSpec { protocol, alpha, gamma, blocks, seed: i as u64 }).revenue;
        println!(
            "{alpha:>5} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            sim(Protocol::Nakamoto),
            selfish_revenue_nc(alpha, gamma),
            sim(Protocol::Crystal),
            selfish_revenue_crystal(alpha, gamma)
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
