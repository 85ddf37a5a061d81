//! Block withholding under certificates.
//!
//! A private block can only be extended once it is certified, so an
//! adversary can hold back `l` blocks in a row only if `l - 1` committees
//! in a row fail in its favour. This prints how rare that is, checks it by
//! sampling, and runs a full network where committees never fail: the
//! adversary's private lead never exceeds one block.
//!
//!     cargo run --release --example withholding

use crystal::analytics::{expected_failure_time, withhold_prob, WithholdConvention};
use crystal::chain::Protocol;
use crystal::sim::races::withholding_experiment;
use crystal::sim::{self, AdversaryKind, FailureModel, SimConfig};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    for eps in [1e-2, 1e-3] {
        let o = withholding_experiment(eps, 2_000_000, 1);
        for l in [2, 3] {
            let p = withhold_prob(eps, l, WithholdConvention::AtLeast);
            let days = expected_failure_time(p, 600.0) / 86_400.0;
            let hit = o.at_least(l);
            println!(
                "eps {eps:e}, l = {l}: P = {p:.1e}, sampled {}/{}, one success every {days:.1} days",
                hit.hits, hit.trials
            );
        }
    }

    let cfg = SimConfig {
        protocol: Protocol::Crystal,
        alpha: 0.35,
        delta: 10.0,
        adversary: AdversaryKind::Withhold,
        failures: FailureModel::Injected { epsilon: 0.0 },
        horizon_blocks: 2000,
        seed: 3,
        ..SimConfig::default()
    };
    let s = sim::run(&cfg)?.summary();
    println!(
        "\nwithholding adversary, {} of {} blocks its own: longest private run {}",
        s.adversary_blocks, s.blocks_mined, s.max_private_lead
    );
    let nc = sim::run(&SimConfig { protocol: Protocol::Nakamoto, ..cfg })?.summary();
    println!("same run under the longest-chain rule: longest private run {}", nc.max_private_lead);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
