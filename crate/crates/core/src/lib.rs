//! Nakamoto consensus with per-block quorum certificates.
//!
//! Every block must carry a certificate of votes from a committee elected out
//! of the miners of the preceding `W` blocks. A miner that withholds a block
//! cannot collect honest votes for it, so it cannot privately extend it.
//!
//! The crate is organised bottom-up:
//!
//! - [`crypto`]: hashes, a simulation VRF and signatures.
//! - [`chain`]: headers, votes, certificates, validation and the block tree.
//! - [`committee`]: the two-round election and vote handling.
//! - [`node`]: the honest participant, rewards and retargeting.
//! - [`sim`]: the discrete-event simulator, adversaries and race experiments.
//! - [`analytics`]: closed-form probabilities used as oracles.
//! - [`harness`]: table/figure generators and the acceptance checks.

pub mod crypto;
pub mod chain;
pub mod committee;
pub mod node;
pub mod analytics;
pub mod sim;
pub mod harness;
