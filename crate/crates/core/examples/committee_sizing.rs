//! How big must a committee be?
//!
//! The committee of a block is sampled from the miners of the last `W`
//! blocks. It fails when the adversary alone reaches a quorum or when the
//! honest shares fall short of one. This computes that probability exactly
//! and finds the smallest committee that keeps it under a target.
//!
//!     cargo run --release --example committee_sizing

use crystal::analytics::{committee_failure_prob, committee_failure_prob_approx, min_committee_size, CommitteeModel};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let (window, alpha) = (3024, 0.35);

    println!("failure probability, W = {window}, alpha = {alpha}");
    println!("{:>5} {:>12} {:>12}", "m", "exact", "log-space");
    for m in [200, 300, 340, 347, 400, 500] {
        let model = CommitteeModel::new(window, m, alpha);
        println!("{m:>5} {:>12.4e} {:>12.4e}", committee_failure_prob(&model), committee_failure_prob_approx(&model));
    }

    println!();
    for eps in [1e-3, 1e-4, 1e-6] {
        let s = min_committee_size(alpha, window, eps)?;
        println!("smallest m with eps <= {eps:e}: {} (eps = {:.3e})", s.committee, s.epsilon);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
