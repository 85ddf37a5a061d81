//! Committee failure when some honest participants never vote.
//!
//! Offline voters still count toward the committee size but contribute no
//! shares, so the honest side needs a quorum from fewer voters.
//!
//!     cargo run --release --example offline_voters

use crystal::analytics::{offline_failure_prob, offline_failure_prob_thinned, CommitteeModel};
use crystal::sim::races::offline_experiment;

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let model = CommitteeModel::new(3024, 500, 0.35);
    println!("W = 3024, m = 500, alpha = 0.35");
    println!("{:>8} {:>11} {:>11} {:>11}", "offline", "exact", "thinned", "sampled");
    for (i, gamma) in [0.0, 0.05, 0.1, 0.15].into_iter().enumerate() {
        let mc = offline_experiment(&model, gamma, 200_000, i as u64);
        println!(
            "{gamma:>8} {:>11.3e} {:>11.3e} {:>11.3e}",
            offline_failure_prob(&model, gamma),
            offline_failure_prob_thinned(&model, gamma),
            mc.rate()
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
