//! A full network run: honest nodes, one adversary, broadcast with delay.
//!
//! Runs the same seeded configuration under both protocols and prints the
//! run summaries. The event log can be written as JSON lines; pass a path
//! to keep it.
//!
//!     cargo run --release --example network_simulation -- /tmp/trace.jsonl

use std::fs::File;
use std::io::BufWriter;

use crystal::chain::Protocol;
use crystal::sim::{self, AdversaryKind, SimConfig};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let base = SimConfig {
        alpha: 0.25,
        delta: 10.0,
        honest_nodes: 6,
        adversary: AdversaryKind::Honest,
        horizon_blocks: 1500,
        seed: 42,
        ..SimConfig::default()
    };
    for protocol in [Protocol::Nakamoto, Protocol::Crystal] {
        let cfg = SimConfig { protocol, record_events: true, ..base.clone() };
        let trace = sim::run(&cfg)?;
        let s = trace.summary();
        println!("{protocol:?}");
        println!("  blocks mined {}, main chain height {}, fork rate {:.4}", s.blocks_mined, s.main_chain_height, s.fork_rate);
        println!("  mean block interval {:.1} s", s.mining_period / s.blocks_mined as f64);
        println!("  conflicting commits {}, progress violations {}", s.conflicts.heights.len(), s.progress.violations.len());
        println!("  trace hash {}", s.trace_hash.short());
        if let Some(path) = std::env::args().nth(1) {
            let path = format!("{path}.{protocol:?}").to_lowercase();
            trace.write_jsonl(&mut BufWriter::new(File::create(&path)?))?;
            println!("  events written to {path}");
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
