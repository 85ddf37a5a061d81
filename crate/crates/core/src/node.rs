//! The honest participant: block handling, voting, mining, commits, rewards
//! and difficulty retargeting.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{
    validate_block, Block, BlockHash, BlockHeader, BlockRef, BlockTree, ChainRules, Payload, Protocol,
    QuorumCertificate, Rejection, Vote,
};
use crate::committee::{vote_for_block, vote_input, Receipt, SlidingWindow, VoteCollector, VoteRejection};
use crate::crypto::{Digest256, ParticipantKeys, PublicKey, Verifier};

/// `old · elapsed / (interval · spacing)`, saturating at `2^256 - 1`.
///
/// A zero result is bumped to 1 so the chain can never become unmineable.
pub fn adjust_difficulty(old: Digest256, elapsed_secs: u64, interval: u64, spacing: u64) -> Digest256 {
    let v = old.to_biguint() * BigUint::from(elapsed_secs) / (BigUint::from(interval) * BigUint::from(spacing));
    match Digest256::from_biguint(&v) {
        Some(d) if d == Digest256::ZERO => Digest256::from_biguint(&BigUint::from(1u8)).unwrap(),
        Some(d) => d,
        None => Digest256::MAX,
    }
}

/// Hashes from genesis up to `head` minus its last `k - 1` blocks.
pub fn commit_rule(tree: &BlockTree, head: &BlockHash, k: u32) -> Vec<BlockHash> {
    let h = tree.height(head).unwrap_or(0);
    let depth = k.saturating_sub(1) as u64;
    match h.checked_sub(depth).and_then(|t| tree.ancestor_at(head, t)) {
        Some(t) => tree.chain(&t),
        None => vec![tree.genesis()],
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub block_reward: u64,
    /// Constant fee income per block.
    pub tx_fees: u64,
    /// Paid to a voter per vote included in a certificate.
    pub vote_reward: u64,
    /// Paid to the block's miner per vote it included.
    pub inclusion_reward: u64,
}

/// Election key to reward key, as announced in block headers.
#[derive(Clone, Debug, Default)]
pub struct RewardDirectory(HashMap<PublicKey, PublicKey>);

impl RewardDirectory {
    pub fn from_headers<'a>(headers: impl IntoIterator<Item = &'a BlockHeader>) -> Self {
        RewardDirectory(headers.into_iter().map(|h| (h.election_pk, h.reward_pk)).collect())
    }

    pub fn insert(&mut self, election: PublicKey, reward: PublicKey) {
        self.0.insert(election, reward);
    }

    pub fn reward_key(&self, election: &PublicKey) -> Option<PublicKey> {
        self.0.get(election).copied()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Ledger {
    pub balances: BTreeMap<PublicKey, u64>,
    /// Vote rewards whose voter had no known reward key.
    pub escrow: u64,
    pub unknown_voters: u64,
    pub minted: u64,
}

impl Ledger {
    fn pay(&mut self, to: PublicKey, amount: u64) {
        *self.balances.entry(to).or_default() += amount;
        self.minted += amount;
    }

    pub fn balance(&self, pk: &PublicKey) -> u64 {
        self.balances.get(pk).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.balances.values().sum::<u64>() + self.escrow
    }
}

/// Pays every non-genesis block in `chain`: block reward and fees to its
/// miner, `R_v` per included vote to the voter, `R_i` per included vote to
/// the miner. All included votes are paid, not just the first quorum.
pub fn apply_rewards<'a>(
    chain: impl IntoIterator<Item = &'a Block>,
    cfg: &RewardConfig,
    directory: &RewardDirectory,
) -> Ledger {
    let mut ledger = Ledger::default();
    for b in chain {
        if b.header.parent_hash == Digest256::ZERO {
            continue;
        }
        let miner = b.header.reward_pk;
        ledger.pay(miner, cfg.block_reward + cfg.tx_fees);
        for v in &b.qc.votes {
            ledger.pay(miner, cfg.inclusion_reward);
            match directory.reward_key(&v.voter_pk) {
                Some(r) => ledger.pay(r, cfg.vote_reward),
                None => {
                    ledger.unknown_voters += 1;
                    ledger.escrow += cfg.vote_reward;
                    ledger.minted += cfg.vote_reward;
                }
            }
        }
    }
    ledger
}

/// Static node parameters.
#[derive(Clone, Copy, Debug)]
pub struct NodeConfig {
    pub rules: ChainRules,
    /// Confirmation depth `k`.
    pub confirmations: u32,
    /// Whether the node votes. Offline participants still mine and follow the chain.
    pub online: bool,
    pub payload: Payload,
    pub early_vote_cap: usize,
    pub orphan_cap: usize,
}

/// Changes to the committed prefix caused by one handler call.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CommitUpdate {
    /// `(height, hash)` dropped from the prefix; nonempty means this node
    /// reverted something it had committed.
    pub reverted: Vec<(u64, BlockHash)>,
    pub added: Vec<(u64, BlockHash)>,
}

/// What a handler call produced.
#[derive(Clone, Debug, Default)]
pub struct Effects {
    /// Blocks inserted into the tree, including released orphans.
    pub accepted: Vec<BlockHash>,
    /// Votes this node cast and wants broadcast.
    pub votes: Vec<Vote>,
    /// Blocks that became certified in this node's view.
    pub certified: Vec<BlockHash>,
    pub rejected: Option<Rejection>,
    pub mining_tip_changed: bool,
    pub commits: CommitUpdate,
}

#[derive(Clone, Copy, Debug, thiserror::Error, PartialEq, Eq)]
pub enum MiningError {
    #[error("parent lacks the certificate its children must carry")]
    NoQcYet,
    #[error("parent unknown")]
    UnknownParent,
}

#[derive(Debug)]
pub struct NodeState {
    pub id: u32,
    keys: ParticipantKeys,
    cfg: NodeConfig,
    tree: BlockTree,
    votes: VoteCollector,
    certs: HashMap<BlockHash, QuorumCertificate>,
    orphans: BTreeMap<BlockHash, Vec<BlockRef>>,
    orphan_count: usize,
    rng: ChaCha8Rng,
    mining_tip: BlockHash,
    mining_sig: (u64, usize),
    head: BlockHash,
    head_sig: (u64, usize),
    committed: Vec<BlockHash>,
    rejections: BTreeMap<Rejection, u64>,
    vote_rejections: BTreeMap<VoteRejection, u64>,
}

impl NodeState {
    pub fn new(id: u32, keys: ParticipantKeys, cfg: NodeConfig, genesis: Block, seed: u64) -> Self {
        let tree = BlockTree::new(genesis);
        let g = tree.genesis();
        NodeState {
            id,
            keys,
            cfg,
            tree,
            votes: VoteCollector::new(cfg.early_vote_cap),
            certs: HashMap::new(),
            orphans: BTreeMap::new(),
            orphan_count: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            mining_tip: g,
            mining_sig: (0, 1),
            head: g,
            head_sig: (0, 1),
            committed: vec![g],
            rejections: BTreeMap::new(),
            vote_rejections: BTreeMap::new(),
        }
    }

    pub fn keys(&self) -> &ParticipantKeys {
        &self.keys
    }

    pub fn tree(&self) -> &BlockTree {
        &self.tree
    }

    pub fn rules(&self) -> &ChainRules {
        &self.cfg.rules
    }

    /// Block the node currently mines on.
    pub fn mining_tip(&self) -> BlockHash {
        self.mining_tip
    }

    /// Height the node's next block would get.
    pub fn mining_height(&self) -> u64 {
        self.tree.height(&self.mining_tip).unwrap() + 1
    }

    /// Tip of the longest chain over all valid blocks.
    pub fn head(&self) -> BlockHash {
        self.head
    }

    /// Committed prefix, indexed by height.
    pub fn committed(&self) -> &[BlockHash] {
        &self.committed
    }

    pub fn rejections(&self) -> &BTreeMap<Rejection, u64> {
        &self.rejections
    }

    pub fn vote_rejections(&self) -> &BTreeMap<VoteRejection, u64> {
        &self.vote_rejections
    }

    /// Forgets vote pools and certificates of blocks more than `depth` below
    /// the highest block. They are only needed to extend those blocks, which
    /// no honest miner does once the chain has moved on.
    pub fn prune(&mut self, depth: u64) {
        let Some(cutoff) = self.tree.max_height().checked_sub(depth) else {
            return;
        };
        let tree = &self.tree;
        self.votes.retain(|h| tree.height(h).is_some_and(|x| x >= cutoff));
        self.certs.retain(|h, _| tree.height(h).is_some_and(|x| x >= cutoff));
    }

    pub fn vote_shares(&self, hash: &BlockHash) -> usize {
        self.votes.shares(hash)
    }

    /// Best certificate known for `hash`: the local pool if it is a quorum,
    /// otherwise one seen embedded in a block.
    pub fn certificate(&self, hash: &BlockHash) -> Option<QuorumCertificate> {
        self.votes.certificate(hash, &self.cfg.rules.election).or_else(|| self.certs.get(hash).cloned())
    }

    /// Builds and solves a block on `parent` without processing it.
    pub fn build_block(&mut self, parent: &BlockHash, now: f64) -> Result<Block, MiningError> {
        let rules = self.cfg.rules;
        let anc = rules.certified_ancestor(&self.tree, parent).ok_or(MiningError::UnknownParent)?;
        let qc = if rules.has_committee(&self.tree, &anc) {
            self.certificate(&anc).ok_or(MiningError::NoQcYet)?
        } else {
            QuorumCertificate::empty(anc)
        };
        let target = rules.pow.expected_target(&self.tree, parent).ok_or(MiningError::UnknownParent)?;
        let mut block = Block {
            header: BlockHeader {
                tx_root: self.cfg.payload.root(),
                parent_hash: *parent,
                qc_root: qc.root(),
                reward_pk: self.keys.reward.pk,
                election_pk: self.keys.election.pk,
                difficulty_target: target,
                timestamp: now.max(0.0) as u64,
                nonce: self.rng.random(),
            },
            payload: self.cfg.payload,
            qc,
        };
        block.solve();
        Ok(block)
    }

    /// Mines on the current mining tip and processes the block locally.
    ///
    /// The mining tip is always extendable, so this only fails if state was
    /// corrupted; the error is kept for callers that pick their own parent.
    pub fn on_mining_success<V: Verifier + ?Sized>(
        &mut self,
        now: f64,
        verifier: &V,
    ) -> Result<(BlockRef, Effects), MiningError> {
        let tip = self.mining_tip;
        let block = Arc::new(self.build_block(&tip, now)?);
        verifier.vouch_root(&block.qc, block.header.qc_root);
        let fx = self.on_receive_block(block.clone(), verifier);
        debug_assert_eq!(fx.rejected, None);
        Ok((block, fx))
    }

    pub fn on_receive_block<V: Verifier + ?Sized>(&mut self, block: BlockRef, verifier: &V) -> Effects {
        let mut fx = Effects::default();
        let mut queue = vec![block];
        while let Some(b) = queue.pop() {
            let hash = b.hash();
            if self.tree.contains(&hash) {
                continue;
            }
            match validate_block(&b, &self.tree, &self.cfg.rules, verifier) {
                Ok(()) => {}
                Err(Rejection::MissingParent) => {
                    if self.orphan_count < self.cfg.orphan_cap {
                        self.orphan_count += 1;
                        self.orphans.entry(b.header.parent_hash).or_default().push(b);
                    }
                    continue;
                }
                Err(e) => {
                    *self.rejections.entry(e).or_default() += 1;
                    fx.rejected = Some(e);
                    continue;
                }
            }
            self.tree.insert(b.clone()).expect("validated block has its parent");
            fx.accepted.push(hash);
            if !b.qc.votes.is_empty() && self.tree.mark_certified(&b.qc.block_hash) {
                self.certs.insert(b.qc.block_hash, b.qc.clone());
                fx.certified.push(b.qc.block_hash);
            }
            if self.cfg.online && self.cfg.rules.has_committee(&self.tree, &hash) {
                let params = self.cfg.rules.election;
                let window = SlidingWindow::of(&self.tree, &hash, params.window).unwrap();
                let mine = vote_for_block(&hash, &window, &self.keys.election, &params);
                for v in &mine {
                    verifier.vouch(&v.voter_pk, &vote_input(&hash, v.window_index), &v.vrf);
                }
                self.take_votes(&mine, verifier, &mut fx);
                fx.votes.extend(mine);
            }
            let early = self.votes.take_early(&hash);
            self.take_votes(&early, verifier, &mut fx);
            if let Some(children) = self.orphans.remove(&hash) {
                self.orphan_count -= children.len();
                queue.extend(children);
            }
        }
        if !fx.accepted.is_empty() || !fx.certified.is_empty() {
            self.refresh(&mut fx);
        }
        fx
    }

    pub fn on_receive_votes<V: Verifier + ?Sized>(&mut self, votes: &[Vote], verifier: &V) -> Effects {
        let mut fx = Effects::default();
        self.take_votes(votes, verifier, &mut fx);
        if !fx.certified.is_empty() {
            self.refresh(&mut fx);
        }
        fx
    }

    fn take_votes<V: Verifier + ?Sized>(&mut self, votes: &[Vote], verifier: &V, fx: &mut Effects) {
        for v in votes {
            match self.votes.on_receipt_vote(*v, &self.tree, &self.cfg.rules.election, verifier) {
                Ok(Receipt::Accepted { quorum_reached: true, .. }) => {
                    if self.tree.mark_certified(&v.block_hash) {
                        fx.certified.push(v.block_hash);
                    }
                }
                Ok(_) => {}
                Err(e) => *self.vote_rejections.entry(e).or_default() += 1,
            }
        }
    }

    fn refresh(&mut self, fx: &mut Effects) {
        fx.mining_tip_changed = self.refresh_mining_tip();
        self.refresh_head();
        fx.commits = self.refresh_commits();
    }

    /// Deepest extendable blocks; re-drawn uniformly whenever the candidate
    /// set grows or moves up, kept otherwise.
    fn refresh_mining_tip(&mut self) -> bool {
        let rules = self.cfg.rules;
        let mut h = self.tree.max_height();
        let candidates = loop {
            let c: Vec<_> = self.tree.at_height(h).filter(|b| rules.is_extendable(&self.tree, b)).collect();
            if !c.is_empty() || h == 0 {
                break c;
            }
            h -= 1;
        };
        let sig = (h, candidates.len());
        if sig == self.mining_sig && candidates.contains(&self.mining_tip) {
            return false;
        }
        self.mining_sig = sig;
        let pick = candidates[self.rng.random_range(0..candidates.len())];
        let changed = pick != self.mining_tip;
        self.mining_tip = pick;
        changed
    }

    fn refresh_head(&mut self) {
        if self.cfg.rules.protocol == Protocol::Nakamoto {
            self.head = self.mining_tip;
            return;
        }
        let h = self.tree.max_height();
        let sig = (h, self.tree.at_height(h).count());
        if sig != self.head_sig {
            self.head_sig = sig;
            self.head = self.tree.tip_of_longest_chain(&mut self.rng);
        }
    }

    fn refresh_commits(&mut self) -> CommitUpdate {
        let mut up = CommitUpdate::default();
        let depth = self.cfg.confirmations.saturating_sub(1) as u64;
        let hh = self.tree.height(&self.head).unwrap();
        let Some(th) = hh.checked_sub(depth) else {
            return up;
        };
        let mut cur = self.tree.ancestor_at(&self.head, th).unwrap();
        let mut h = th;
        let mut fresh = Vec::new();
        while (h as usize) >= self.committed.len() || self.committed[h as usize] != cur {
            fresh.push((h, cur));
            cur = self.tree.parent(&cur).unwrap();
            h -= 1;
        }
        for (i, old) in self.committed.iter().enumerate().skip(h as usize + 1) {
            up.reverted.push((i as u64, *old));
        }
        self.committed.truncate(h as usize + 1);
        fresh.reverse();
        self.committed.extend(fresh.iter().map(|&(_, b)| b));
        up.added = fresh;
        up
    }
}
