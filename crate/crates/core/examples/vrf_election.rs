//! Committee election and quorum certificates, by hand.
//!
//! Four participants take turns mining. Each block's committee is drawn
//! from the miners of the previous `W` blocks: a participant gets a share
//! for every slot it owns whose VRF output lands under the target. Votes
//! are broadcast, collected into a certificate, and the next block must
//! carry it. A tampered certificate is rejected.
//!
//!     cargo run --release --example vrf_election

use std::sync::Arc;

use crystal::chain::{Block, ChainRules, Payload, PowRule, Protocol};
use crystal::committee::ElectionParams;
use crystal::crypto::{SimCrypto, Target};
use crystal::node::{NodeConfig, NodeState};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let crypto = SimCrypto::new(7);
    let election = ElectionParams::new(20, 12)?;
    let rules = ChainRules {
        protocol: Protocol::Crystal,
        election,
        qc_distance: 1,
        pow: PowRule::Fixed(Target::pow2(254).bound().unwrap()),
    };
    let cfg = NodeConfig { rules, confirmations: 6, online: true, payload: Payload::default(), early_vote_cap: 256, orphan_cap: 64 };
    let genesis = Block::genesis(rules.pow.initial());
    let mut nodes: Vec<NodeState> =
        (0..4).map(|i| NodeState::new(i, crypto.participant(i), cfg, genesis.clone(), i as u64)).collect();

    println!("W = {}, m = {}, quorum = {} shares", election.window, election.committee, election.quorum());
    for round in 0..40u32 {
        let miner = (round % 4) as usize;
        let (block, fx) = nodes[miner].on_mining_success(round as f64 * 600.0, &crypto)?;
        let mut votes = fx.votes;
        for (i, n) in nodes.iter_mut().enumerate() {
            if i != miner {
                votes.extend(n.on_receive_block(block.clone(), &crypto).votes);
            }
        }
        for n in nodes.iter_mut() {
            n.on_receive_votes(&votes, &crypto);
        }
        let h = block.hash();
        let height = nodes[0].tree().height(&h).unwrap();
        if round % 5 == 4 {
            println!(
                "height {height:>2}: mined by {miner}, carries {:>2} votes, {:>2} shares cast, certified: {}",
                block.qc.votes.len(),
                nodes[0].vote_shares(&h),
                nodes[0].tree().is_certified(&h)
            );
        }
    }

    // Drop a vote from the certificate the next block carries.
    let tip = nodes[0].mining_tip();
    let mut forged = nodes[0].build_block(&tip, 40.0 * 600.0)?;
    let before = forged.qc.votes.len();
    forged.qc.votes.pop();
    forged.solve();
    let fx = nodes[1].on_receive_block(Arc::new(forged), &crypto);
    println!("certificate cut from {before} to {} votes: {:?}", before - 1, fx.rejected);
    println!("committed prefix of node 0: {} blocks", nodes[0].committed().len());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
