//! Strategic adversary: one identity holding all adversarial power.
//!
//! It keeps a full node view that also contains its unpublished blocks, never
//! votes for honest blocks, and decides when to release its own.

use std::collections::{HashMap, HashSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::chain::{BlockHash, BlockRef, Vote};
use crate::committee::{vote_for_block, vote_input, SlidingWindow};
use crate::crypto::Verifier;
use crate::node::NodeState;

use super::{AdversaryKind, FailureModel};

/// A block made public, with the adversary's own votes on it.
pub(super) struct Release {
    pub block: BlockRef,
    pub votes: Vec<Vote>,
}

pub(super) struct Adversary {
    pub node: NodeState,
    kind: AdversaryKind,
    failures: FailureModel,
    rng: ChaCha8Rng,
    public: HashSet<BlockHash>,
    /// Own votes not yet released, by block.
    held_votes: HashMap<BlockHash, Vec<Vote>>,
    /// Public block the attack branch forks from.
    base: Option<BlockHash>,
    /// Attack branch above `base`; the first `published` entries are public.
    branch: Vec<BlockRef>,
    published: usize,
    /// Height of the public competing chain above `base`.
    public_len: u64,
}

impl Adversary {
    pub fn new(node: NodeState, kind: AdversaryKind, failures: FailureModel, rng: ChaCha8Rng) -> Self {
        let g = node.tree().genesis();
        Adversary {
            node,
            kind,
            failures,
            rng,
            public: HashSet::from([g]),
            held_votes: HashMap::new(),
            base: None,
            branch: Vec::new(),
            published: 0,
            public_len: 0,
        }
    }

    /// Parent for the next block, or `None` if mining now would be wasted.
    pub fn choose_parent(&mut self) -> Option<BlockHash> {
        let rules = *self.node.rules();
        match self.kind {
            AdversaryKind::Withhold => Some(self.node.mining_tip()),
            AdversaryKind::Selfish | AdversaryKind::Honest => match self.branch.last() {
                None => {
                    let tip = self.public_tip();
                    self.base = Some(tip);
                    self.public_len = 0;
                    Some(tip)
                }
                Some(b) => {
                    let h = b.hash();
                    rules.is_extendable(self.node.tree(), &h).then_some(h)
                }
            },
        }
    }

    /// Deepest extendable public block.
    fn public_tip(&self) -> BlockHash {
        let tree = self.node.tree();
        let rules = self.node.rules();
        let mut h = tree.max_height();
        loop {
            if let Some(b) = tree.at_height(h).find(|b| self.public.contains(b) && rules.is_extendable(tree, b)) {
                return b;
            }
            if h == 0 {
                return tree.genesis();
            }
            h -= 1;
        }
    }

    /// Books a freshly mined own block, which is already in the view.
    /// `realized` is its full committee, used only by injected failures.
    /// Returns whether an injected failure fired.
    pub fn on_own_block<V: Verifier + ?Sized>(&mut self, block: BlockRef, realized: Vec<Vote>, verifier: &V) -> bool {
        let hash = block.hash();
        let rules = *self.node.rules();
        let own = if rules.has_committee(self.node.tree(), &hash) {
            let params = rules.election;
            let window = SlidingWindow::of(self.node.tree(), &hash, params.window).unwrap();
            vote_for_block(&hash, &window, &self.node.keys().election, &params)
        } else {
            Vec::new()
        };
        for v in own.iter().chain(&realized) {
            verifier.vouch(&v.voter_pk, &vote_input(&hash, v.window_index), &v.vrf);
        }
        let mut injected = false;
        match self.failures {
            FailureModel::Natural => {
                self.node.on_receive_votes(&own, verifier);
            }
            FailureModel::Injected { epsilon } => {
                if !realized.is_empty() && self.rng.random::<f64>() < epsilon {
                    self.node.on_receive_votes(&realized, verifier);
                    injected = true;
                }
            }
        }
        self.held_votes.insert(hash, own);
        if self.kind != AdversaryKind::Withhold {
            self.branch.push(block);
        }
        injected
    }

    /// Called right after an own block was booked.
    pub fn after_mining<V: Verifier + ?Sized>(&mut self, verifier: &V) -> Vec<Release> {
        if self.kind == AdversaryKind::Withhold {
            return Vec::new();
        }
        let was_tie = self.published > 0 && self.published + 1 == self.branch.len() && self.published as u64 == self.public_len;
        if was_tie {
            let out = self.publish(self.branch.len(), verifier);
            self.reset();
            return out;
        }
        Vec::new()
    }

    pub fn on_public_block<V: Verifier + ?Sized>(&mut self, block: BlockRef, verifier: &V) -> Vec<Release> {
        let hash = block.hash();
        let fx = self.node.on_receive_block(block, verifier);
        self.public.extend(fx.accepted.iter().copied());
        if self.kind == AdversaryKind::Withhold || self.branch.is_empty() || !self.node.tree().contains(&hash) {
            return Vec::new();
        }
        let tree = self.node.tree();
        if self.published > 0 && tree.is_ancestor(&self.branch[0].hash(), &hash) {
            // Honest miners built on our branch: it is in.
            self.reset();
            return Vec::new();
        }
        let base_h = tree.height(&self.base.unwrap()).unwrap();
        let len = tree.height(&hash).unwrap().saturating_sub(base_h);
        if len <= self.public_len {
            return Vec::new();
        }
        self.public_len = len;
        let lead = self.branch.len() as i64 - len as i64;
        match lead {
            l if l < 0 => {
                self.reset();
                Vec::new()
            }
            0 => self.publish(self.branch.len(), verifier),
            1 => {
                let out = self.publish(self.branch.len(), verifier);
                self.reset();
                out
            }
            _ => self.publish(len as usize, verifier),
        }
    }

    pub fn on_public_votes<V: Verifier + ?Sized>(&mut self, votes: &[Vote], verifier: &V) -> Vec<Release> {
        self.node.on_receive_votes(votes, verifier);
        Vec::new()
    }

    fn publish<V: Verifier + ?Sized>(&mut self, upto: usize, verifier: &V) -> Vec<Release> {
        let mut out = Vec::new();
        for b in &self.branch[self.published.min(upto)..upto] {
            let h = b.hash();
            let votes = self.held_votes.remove(&h).unwrap_or_default();
            if matches!(self.failures, FailureModel::Injected { .. }) {
                self.node.on_receive_votes(&votes, verifier);
            }
            self.public.insert(h);
            out.push(Release { block: b.clone(), votes });
        }
        self.published = self.published.max(upto);
        out
    }

    fn reset(&mut self) {
        self.base = None;
        self.branch.clear();
        self.published = 0;
        self.public_len = 0;
    }
}
