//! Two-round committee election.
//!
//! Round one: the miners of the `W` blocks preceding a block `B` own one
//! window slot each (a miner of several blocks owns several). Round two:
//! the owner of slot `j` evaluates its VRF on `B.hash || j` and holds a
//! membership share when the output falls below `d = m/W · 2^256`. Each share
//! is one vote; `B` is certified once strictly more than `m/2` distinct
//! shares have been collected.

use std::collections::{BTreeMap, HashMap, VecDeque};

use thiserror::Error;

use crate::chain::{BlockHash, BlockTree, QuorumCertificate, Vote};
use crate::crypto::{vrf_output, vrf_prove, KeyPair, PublicKey, SecretKey, Target, Verifier};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ElectionParams {
    /// `W`, in blocks.
    pub window: u32,
    /// `m`, the expected number of shares per committee.
    pub committee: u32,
    /// `d`, the VRF threshold.
    pub target: Target,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParamError {
    #[error("committee size {m} must lie in 1..={w}")]
    CommitteeSize { m: u32, w: u32 },
}

impl ElectionParams {
    /// `d = floor(m/W · 2^256)`.
    pub fn new(window: u32, committee: u32) -> Result<Self, ParamError> {
        if committee == 0 || committee > window {
            return Err(ParamError::CommitteeSize { m: committee, w: window });
        }
        Ok(ElectionParams { window, committee, target: Target::from_ratio(committee as u64, window as u64) })
    }

    /// Overrides `d`, e.g. to force empty or full committees in tests.
    pub fn with_target(mut self, target: Target) -> Self {
        self.target = target;
        self
    }

    /// `shares > m/2`, against the fixed `m` rather than the realized size.
    pub fn is_quorum(&self, shares: usize) -> bool {
        2 * shares > self.committee as usize
    }

    /// Smallest share count forming a quorum.
    pub fn quorum(&self) -> usize {
        self.committee as usize / 2 + 1
    }

    /// Per-slot election probability `d / 2^256`.
    pub fn election_probability(&self) -> f64 {
        self.target.ratio()
    }
}

/// VRF input for slot `index` of block `hash`.
pub fn vote_input(hash: &BlockHash, index: u32) -> [u8; 36] {
    let mut x = [0u8; 36];
    x[..32].copy_from_slice(&hash.0);
    x[32..].copy_from_slice(&index.to_be_bytes());
    x
}

/// Slot owners of a block's window; `slots[j - 1]` owns index `j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlidingWindow {
    pub slots: Vec<PublicKey>,
}

impl SlidingWindow {
    /// The window of `hash`, or `None` during bootstrap.
    pub fn of(tree: &BlockTree, hash: &BlockHash, window: u32) -> Option<Self> {
        tree.window(hash, window).map(|slots| SlidingWindow { slots })
    }

    /// `(index, owner)` pairs, index from 1.
    pub fn iter(&self) -> impl Iterator<Item = (u32, &PublicKey)> {
        self.slots.iter().enumerate().map(|(i, pk)| (i as u32 + 1, pk))
    }
}

/// Votes of `keys` on `block`: one per owned slot that wins the lottery.
///
/// The proof is only computed for winning slots.
pub fn vote_for_block(block: &BlockHash, window: &SlidingWindow, keys: &KeyPair, params: &ElectionParams) -> Vec<Vote> {
    window
        .iter()
        .filter(|(_, pk)| **pk == keys.pk)
        .filter_map(|(j, _)| {
            let x = vote_input(block, j);
            if !params.target.admits(&vrf_output(&keys.sk, &x)) {
                return None;
            }
            Some(Vote { voter_pk: keys.pk, block_hash: *block, window_index: j, vrf: vrf_prove(&keys.sk, &x) })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Error, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VoteRejection {
    #[error("vote for an unknown block")]
    UnknownBlock,
    #[error("window index outside the block's window")]
    BadIndex,
    #[error("VRF output not below the election target")]
    TargetMiss,
    #[error("voter does not own the window slot")]
    WrongOwner,
    #[error("VRF proof does not verify")]
    BadProof,
}

/// Checks a vote against the voter's own view of the chain.
pub fn verify_vote<V: Verifier + ?Sized>(
    vote: &Vote,
    tree: &BlockTree,
    params: &ElectionParams,
    verifier: &V,
) -> Result<(), VoteRejection> {
    if !tree.contains(&vote.block_hash) {
        return Err(VoteRejection::UnknownBlock);
    }
    if vote.window_index == 0 || vote.window_index > params.window {
        return Err(VoteRejection::BadIndex);
    }
    if !params.target.admits(&vote.vrf.y) {
        return Err(VoteRejection::TargetMiss);
    }
    match tree.window_owner(&vote.block_hash, vote.window_index, params.window) {
        None => return Err(VoteRejection::BadIndex),
        Some(owner) if owner != vote.voter_pk => return Err(VoteRejection::WrongOwner),
        Some(_) => {}
    }
    if !verifier.vrf_verify(&vote.voter_pk, &vote_input(&vote.block_hash, vote.window_index), &vote.vrf) {
        return Err(VoteRejection::BadProof);
    }
    Ok(())
}

/// Outcome of an accepted or deferred vote.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Receipt {
    /// New share counted. `quorum_reached` is set on exactly the vote that
    /// first makes the pool a quorum.
    Accepted { shares: usize, quorum_reached: bool },
    Duplicate,
    /// Block not known yet; the vote waits in the early-vote buffer.
    Buffered,
}

/// Per-block vote pools plus a bounded buffer for votes that outran their block.
#[derive(Debug)]
pub struct VoteCollector {
    pools: HashMap<BlockHash, BTreeMap<(u32, PublicKey), Vote>>,
    early: VecDeque<Vote>,
    early_cap: usize,
}

impl VoteCollector {
    pub fn new(early_cap: usize) -> Self {
        VoteCollector { pools: HashMap::new(), early: VecDeque::new(), early_cap }
    }

    pub fn on_receipt_vote<V: Verifier + ?Sized>(
        &mut self,
        vote: Vote,
        tree: &BlockTree,
        params: &ElectionParams,
        verifier: &V,
    ) -> Result<Receipt, VoteRejection> {
        if let Some(pool) = self.pools.get(&vote.block_hash) {
            if pool.contains_key(&vote.key()) {
                return Ok(Receipt::Duplicate);
            }
        }
        match verify_vote(&vote, tree, params, verifier) {
            Err(VoteRejection::UnknownBlock) if self.early_cap > 0 => {
                if self.early.len() == self.early_cap {
                    self.early.pop_front();
                }
                self.early.push_back(vote);
                return Ok(Receipt::Buffered);
            }
            Err(e) => return Err(e),
            Ok(()) => {}
        }
        let pool = self.pools.entry(vote.block_hash).or_default();
        pool.insert(vote.key(), vote);
        let shares = pool.len();
        Ok(Receipt::Accepted { shares, quorum_reached: shares == params.quorum() })
    }

    /// Removes and returns buffered votes for `hash`.
    pub fn take_early(&mut self, hash: &BlockHash) -> Vec<Vote> {
        let (hit, keep): (Vec<_>, Vec<_>) = self.early.drain(..).partition(|v| v.block_hash == *hash);
        self.early = keep.into();
        hit
    }

    pub fn shares(&self, hash: &BlockHash) -> usize {
        self.pools.get(hash).map_or(0, BTreeMap::len)
    }

    /// Every collected vote on `hash`, in canonical order, if they form a quorum.
    pub fn certificate(&self, hash: &BlockHash, params: &ElectionParams) -> Option<QuorumCertificate> {
        let pool = self.pools.get(hash)?;
        params
            .is_quorum(pool.len())
            .then(|| QuorumCertificate { block_hash: *hash, votes: pool.values().copied().collect() })
    }

    pub fn buffered(&self) -> usize {
        self.early.len()
    }

    /// Drops the pools of blocks for which `keep` is false.
    pub fn retain(&mut self, mut keep: impl FnMut(&BlockHash) -> bool) {
        self.pools.retain(|h, _| keep(h));
    }
}

/// The realized committee of `hash`, enumerated with every secret key.
///
/// A test oracle only: real participants learn just their own result.
pub fn committee_of(
    tree: &BlockTree,
    hash: &BlockHash,
    params: &ElectionParams,
    all_keys: &HashMap<PublicKey, SecretKey>,
) -> Vec<(PublicKey, u32)> {
    let Some(window) = SlidingWindow::of(tree, hash, params.window) else {
        return Vec::new();
    };
    committee_of_window(hash, &window, params, all_keys)
}

/// [`committee_of`] for an explicit window.
pub fn committee_of_window(
    hash: &BlockHash,
    window: &SlidingWindow,
    params: &ElectionParams,
    all_keys: &HashMap<PublicKey, SecretKey>,
) -> Vec<(PublicKey, u32)> {
    window
        .iter()
        .filter_map(|(j, pk)| {
            let sk = all_keys.get(pk)?;
            params.target.admits(&vrf_output(sk, &vote_input(hash, j))).then_some((*pk, j))
        })
        .collect()
}
