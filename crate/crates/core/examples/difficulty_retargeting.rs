//! Difficulty retargeting.
//!
//! The network starts with four times the hash power its initial target
//! assumes. Every `interval` blocks the target is rescaled by how long the
//! last interval took, and block spacing settles back to the goal.
//!
//!     cargo run --release --example difficulty_retargeting

use crystal::sim::{self, AdversaryKind, Retarget, SimConfig};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let retarget = Retarget { interval: 100, spacing: 600 };
    let cfg = SimConfig {
        alpha: 0.2,
        adversary: AdversaryKind::Honest,
        hashrate_multiplier: 4.0,
        retarget: Some(retarget),
        horizon_blocks: 800,
        seed: 5,
        ..SimConfig::default()
    };
    let trace = sim::run(&cfg)?;
    let main: Vec<f64> = trace.final_chain.iter().map(|&id| trace.blocks[id as usize].mined_at).collect();
    println!("goal {} s per block, retarget every {} blocks", retarget.spacing, retarget.interval);
    for (i, w) in main.chunks(retarget.interval as usize).enumerate() {
        if w.len() > 1 {
            let mean = (w[w.len() - 1] - w[0]) / (w.len() - 1) as f64;
            println!("heights {:>3}..{:<3} mean spacing {mean:>6.1} s", i as u64 * retarget.interval, i as u64 * retarget.interval + w.len() as u64 - 1);
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
