//! Discrete-event simulation of a Crystal (or plain Nakamoto) network.
//!
//! Mining is a set of independent exponential clocks, one per participant,
//! with rate proportional to its power share and to its current target.
//! Honest broadcasts reach every other participant after a delay bounded by
//! `Δ`; the adversary hears everything at once and releases its own messages
//! with zero delay. One run is single-threaded and a pure function of its
//! configuration.

mod adversary;
pub mod races;
pub mod trace;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{Block, BlockHash, BlockRef, ChainRules, Payload, PowRule, Protocol, Vote};
use crate::committee::{committee_of, vote_input, ElectionParams};
use crate::crypto::{hash_parts, vrf_prove, CachingVerifier, PublicKey, SecretKey, SimCrypto, Target};
use crate::node::{apply_rewards, NodeConfig, NodeState, RewardConfig, RewardDirectory};

use adversary::{Adversary, Release};
pub use trace::{BlockMeta, CommitRecord, MinerClass, SimSummary, SimTrace, TraceEvent, TRACE_SCHEMA};

/// Per-recipient delay of an honest broadcast.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayModel {
    /// Exactly `Δ`: the worst case the analysis allows.
    #[default]
    Fixed,
    /// Uniform on `[0, Δ]`.
    Uniform,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryKind {
    /// Mines and votes like everyone else.
    Honest,
    /// Withholds one block at a time and releases it to tie an honest
    /// block; unbounded private chains where the rules allow them.
    #[default]
    Selfish,
    /// Mines privately and never publishes.
    Withhold,
}

/// How the adversary's blocks end up with a committee it controls.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FailureModel {
    /// Whatever the election produces: a private block is certified when the
    /// adversary's own shares form a quorum.
    #[default]
    Natural,
    /// Own shares never certify a private block; instead each one is
    /// handed its full realized committee with probability `epsilon`.
    Injected { epsilon: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Retarget {
    pub interval: u64,
    /// Target seconds per block.
    pub spacing: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub protocol: Protocol,
    /// Honest participants; they split `1 - alpha` evenly.
    pub honest_nodes: u32,
    pub alpha: f64,
    /// Total blocks per second at the initial target.
    pub lambda: f64,
    /// Delay bound in seconds.
    pub delta: f64,
    pub delay: DelayModel,
    pub window: u32,
    pub committee: u32,
    pub confirmations: u32,
    pub qc_distance: u32,
    /// Fraction of honest participants that never vote.
    pub offline_fraction: f64,
    pub rewards: RewardConfig,
    /// Stop after this many blocks have been mined.
    pub horizon_blocks: u64,
    /// Also stop mining at this simulated time, if set.
    pub horizon_secs: Option<f64>,
    pub seed: u64,
    pub adversary: AdversaryKind,
    pub failures: FailureModel,
    pub retarget: Option<Retarget>,
    /// Real hash power relative to what the initial target assumes.
    pub hashrate_multiplier: f64,
    /// Keep the full event log in the trace.
    pub record_events: bool,
    /// Vote pools of blocks this far below the highest block are dropped.
    pub prune_depth: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            protocol: Protocol::Crystal,
            honest_nodes: 4,
            alpha: 0.0,
            lambda: 1.0 / 600.0,
            delta: 0.0,
            delay: DelayModel::Fixed,
            window: 100,
            committee: 90,
            confirmations: 6,
            qc_distance: 1,
            offline_fraction: 0.0,
            rewards: RewardConfig { block_reward: 50, tx_fees: 0, vote_reward: 1, inclusion_reward: 1 },
            horizon_blocks: 1000,
            horizon_secs: None,
            seed: 0,
            adversary: AdversaryKind::Selfish,
            failures: FailureModel::Natural,
            retarget: None,
            hashrate_multiplier: 1.0,
            record_events: false,
            prune_depth: 64,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("alpha = {0} outside [0, 0.5)")]
    Alpha(f64),
    #[error("at least one honest node is required")]
    NoHonestNodes,
    #[error("lambda must be positive and finite, got {0}")]
    Lambda(f64),
    #[error("delta must be nonnegative and finite, got {0}")]
    Delta(f64),
    #[error(transparent)]
    Election(#[from] crate::committee::ParamError),
    #[error("confirmations and qc_distance must be at least 1")]
    Depth,
    #[error("offline_fraction = {0} outside [0, 1]")]
    Offline(f64),
    #[error("epsilon = {0} outside [0, 1]")]
    Epsilon(f64),
    #[error("horizon_blocks must be at least 1")]
    Horizon,
    #[error("hashrate_multiplier must be positive, got {0}")]
    Hashrate(f64),
    #[error("retarget interval and spacing must be positive")]
    Retarget,
}

/// Target every run starts from: four hashes per block on average.
pub const INITIAL_TARGET_BITS: u32 = 254;

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..0.5).contains(&self.alpha) {
            return Err(ConfigError::Alpha(self.alpha));
        }
        if self.honest_nodes == 0 {
            return Err(ConfigError::NoHonestNodes);
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(ConfigError::Lambda(self.lambda));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(ConfigError::Delta(self.delta));
        }
        ElectionParams::new(self.window, self.committee)?;
        if self.confirmations == 0 || self.qc_distance == 0 {
            return Err(ConfigError::Depth);
        }
        if !(0.0..=1.0).contains(&self.offline_fraction) {
            return Err(ConfigError::Offline(self.offline_fraction));
        }
        if let FailureModel::Injected { epsilon } = self.failures {
            if !(0.0..=1.0).contains(&epsilon) {
                return Err(ConfigError::Epsilon(epsilon));
            }
        }
        if self.horizon_blocks == 0 {
            return Err(ConfigError::Horizon);
        }
        if !(self.hashrate_multiplier > 0.0 && self.hashrate_multiplier.is_finite()) {
            return Err(ConfigError::Hashrate(self.hashrate_multiplier));
        }
        if let Some(r) = self.retarget {
            if r.interval == 0 || r.spacing == 0 {
                return Err(ConfigError::Retarget);
            }
        }
        Ok(())
    }

    pub fn beta(&self) -> f64 {
        1.0 - self.alpha
    }

    pub fn election(&self) -> ElectionParams {
        ElectionParams::new(self.window, self.committee).expect("validated")
    }

    pub fn rules(&self) -> ChainRules {
        let initial = Target::pow2(INITIAL_TARGET_BITS).bound().unwrap();
        ChainRules {
            protocol: self.protocol,
            election: self.election(),
            qc_distance: self.qc_distance,
            pow: match self.retarget {
                None => PowRule::Fixed(initial),
                Some(r) => PowRule::Retarget { initial, interval: r.interval, spacing: r.spacing },
            },
        }
    }

    /// Number of honest nodes that do not vote.
    pub fn offline_nodes(&self) -> u32 {
        (self.offline_fraction * self.honest_nodes as f64).round() as u32
    }

    fn has_adversary(&self) -> bool {
        self.alpha > 0.0
    }
}

/// Seed for a sub-stream, so that adding consumers never shifts others.
pub fn derive_seed(seed: u64, label: &[u8], index: u64) -> u64 {
    let d = hash_parts(&[b"crystal/seed", &seed.to_be_bytes(), label, &index.to_be_bytes()]);
    u64::from_be_bytes(d.0[..8].try_into().unwrap())
}

#[derive(Clone, Debug)]
enum Event {
    Mine { miner: usize, generation: u64 },
    Block { to: usize, block: BlockRef },
    Votes { to: usize, votes: Arc<[Vote]> },
}

struct Scheduled {
    time: f64,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // Reversed: BinaryHeap is a max-heap and we want the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then(other.seq.cmp(&self.seq))
    }
}

struct Clock {
    /// Blocks per second at the initial target.
    base_rate: f64,
    /// Current target relative to the initial one.
    scale: f64,
    generation: u64,
}

/// Who a participant slot is.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Role {
    Honest,
    /// Adversary identity running the honest protocol.
    Cooperative,
    /// Adversary identity driven by a strategy.
    Strategic,
}

struct Sim<'a> {
    cfg: &'a SimConfig,
    params: ElectionParams,
    verifier: CachingVerifier<SimCrypto>,
    secrets: HashMap<PublicKey, SecretKey>,
    /// Election key to participant index.
    owners: HashMap<PublicKey, usize>,
    roles: Vec<Role>,
    online: Vec<bool>,
    /// One entry per participant; the strategic adversary's is a placeholder.
    nodes: Vec<NodeState>,
    adversary: Option<Adversary>,
    queue: BinaryHeap<Scheduled>,
    seq: u64,
    now: f64,
    rng: ChaCha8Rng,
    clocks: Vec<Clock>,
    mining_open: bool,
    mined: u64,
    last_mined: f64,
    ids: HashMap<BlockHash, u32>,
    trace: SimTrace,
}

/// Runs one simulation to completion.
pub fn run(cfg: &SimConfig) -> Result<SimTrace, ConfigError> {
    cfg.validate()?;
    let mut sim = Sim::new(cfg);
    sim.start();
    while let Some(s) = sim.queue.pop() {
        sim.now = s.time;
        match s.event {
            Event::Mine { miner, generation } => sim.on_mine(miner, generation),
            Event::Block { to, block } => sim.on_block(to, block),
            Event::Votes { to, votes } => sim.on_votes(to, &votes),
        }
    }
    Ok(sim.finish())
}

impl<'a> Sim<'a> {
    fn new(cfg: &'a SimConfig) -> Self {
        let rules = cfg.rules();
        let crypto = SimCrypto::new(cfg.seed);
        let genesis = Block::genesis(rules.pow.initial());
        let n = cfg.honest_nodes as usize;
        let total = n + cfg.has_adversary() as usize;
        let offline = cfg.offline_nodes() as usize;
        let mut roles = vec![Role::Honest; n];
        if cfg.has_adversary() {
            roles.push(match cfg.adversary {
                AdversaryKind::Honest => Role::Cooperative,
                _ => Role::Strategic,
            });
        }
        let online: Vec<bool> = (0..total).map(|i| i >= offline && roles[i] != Role::Strategic).collect();

        let mut secrets = HashMap::new();
        let mut owners = HashMap::new();
        let mut nodes = Vec::with_capacity(total);
        let mut adversary = None;
        for i in 0..total {
            let keys = crypto.participant(i as u32);
            secrets.insert(keys.election.pk, keys.election.sk);
            owners.insert(keys.election.pk, i);
            let node_cfg = NodeConfig {
                rules,
                confirmations: cfg.confirmations,
                online: online[i],
                payload: Payload::default(),
                early_vote_cap: 1 << 14,
                orphan_cap: 1 << 14,
            };
            let node = NodeState::new(i as u32, keys, node_cfg, genesis.clone(), derive_seed(cfg.seed, b"node", i as u64));
            if roles[i] == Role::Strategic {
                let rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, b"adversary", 0));
                adversary = Some(Adversary::new(node, cfg.adversary, cfg.failures, rng));
                let placeholder = NodeState::new(i as u32, keys, node_cfg, genesis.clone(), 0);
                nodes.push(placeholder);
            } else {
                nodes.push(node);
            }
        }

        let clocks = (0..total)
            .map(|i| {
                let share = if i < n { cfg.beta() / n as f64 } else { cfg.alpha };
                Clock { base_rate: share * cfg.lambda * cfg.hashrate_multiplier, scale: 1.0, generation: 0 }
            })
            .collect();

        let g = genesis.hash();
        let mut trace = SimTrace::new(cfg.clone(), n);
        trace.blocks.push(BlockMeta::genesis(g));
        for series in &mut trace.heights {
            series.push((0.0, 1));
        }
        Sim {
            cfg,
            params: rules.election,
            verifier: CachingVerifier::new(crypto, 1 << 17),
            secrets,
            owners,
            roles,
            online,
            nodes,
            adversary,
            queue: BinaryHeap::new(),
            seq: 0,
            now: 0.0,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, b"sim", 0)),
            clocks,
            mining_open: true,
            mined: 0,
            last_mined: 0.0,
            ids: HashMap::from([(g, 0)]),
            trace,
        }
    }

    fn honest_count(&self) -> usize {
        self.cfg.honest_nodes as usize
    }

    fn schedule(&mut self, time: f64, event: Event) {
        self.seq += 1;
        self.queue.push(Scheduled { time, seq: self.seq, event });
    }

    fn start(&mut self) {
        for i in 0..self.clocks.len() {
            self.arm(i);
        }
    }

    /// Draws the next mining time of `miner` under its current rate.
    fn arm(&mut self, miner: usize) {
        let c = &self.clocks[miner];
        let rate = c.base_rate * c.scale;
        if rate <= 0.0 {
            return;
        }
        let generation = c.generation;
        let dt = Exp::new(rate).unwrap().sample(&mut self.rng);
        self.schedule(self.now + dt, Event::Mine { miner, generation });
    }

    /// Re-reads the target `miner` faces; a change invalidates the pending draw.
    fn retune(&mut self, miner: usize) {
        if self.cfg.retarget.is_none() {
            return;
        }
        let node = self.view(miner);
        let tip = node.mining_tip();
        let target = node.rules().pow.expected_target(node.tree(), &tip).unwrap();
        let scale = target.to_unit_f64() / node.rules().pow.initial().to_unit_f64();
        if scale != self.clocks[miner].scale {
            self.clocks[miner].scale = scale;
            self.clocks[miner].generation += 1;
            if self.mining_open {
                self.arm(miner);
            }
        }
    }

    fn view(&self, i: usize) -> &NodeState {
        match (&self.adversary, self.roles[i]) {
            (Some(a), Role::Strategic) => &a.node,
            _ => &self.nodes[i],
        }
    }

    fn delay(&mut self) -> f64 {
        match self.cfg.delay {
            DelayModel::Fixed => self.cfg.delta,
            DelayModel::Uniform => self.cfg.delta * self.rng.random::<f64>(),
        }
    }

    fn class_of(&self, i: usize) -> MinerClass {
        if i < self.honest_count() {
            MinerClass::Honest
        } else {
            MinerClass::Adversary
        }
    }

    fn on_mine(&mut self, miner: usize, generation: u64) {
        if !self.mining_open || generation != self.clocks[miner].generation {
            return;
        }
        if self.cfg.horizon_secs.is_some_and(|h| self.now > h) {
            self.mining_open = false;
            return;
        }
        self.mined += 1;
        self.last_mined = self.now;
        if self.mined >= self.cfg.horizon_blocks {
            self.mining_open = false;
        } else {
            self.arm(miner);
        }
        if self.mined % 64 == 0 {
            self.prune();
        }

        if self.roles[miner] == Role::Strategic {
            self.adversary_mines();
            return;
        }
        let (block, fx) = self.nodes[miner].on_mining_success(self.now, &self.verifier).expect("mining tip is extendable");
        let id = self.record_block(miner, &block);
        self.trace.blocks[id as usize].published_at = Some(self.now);
        self.log(TraceEvent::Mine { t: self.now, node: miner as u32, block: id });
        self.broadcast_block(miner, &block);
        self.after(miner, fx);
    }

    fn adversary_mines(&mut self) {
        let miner = self.nodes.len() - 1;
        let adv = self.adversary.as_mut().unwrap();
        let Some(parent) = adv.choose_parent() else {
            self.trace.wasted_adversary_attempts += 1;
            return;
        };
        let block = Arc::new(adv.node.build_block(&parent, self.now).expect("chosen parent is extendable"));
        adv.node.on_receive_block(block.clone(), &self.verifier);
        let id = self.record_block(miner, &block);
        let hash = block.hash();
        let realized = self.realized_votes(&hash);
        let adv = self.adversary.as_mut().unwrap();
        let injected = adv.on_own_block(block.clone(), realized, &self.verifier);
        self.trace.blocks[id as usize].injected_failure = injected;
        self.log(TraceEvent::Mine { t: self.now, node: miner as u32, block: id });
        let releases = self.adversary.as_mut().unwrap().after_mining(&self.verifier);
        self.release(releases);
        self.retune(miner);
    }

    /// Votes of every member of `hash`'s realized committee, as seen by the
    /// strategic adversary (who knows the block).
    fn realized_votes(&self, hash: &BlockHash) -> Vec<Vote> {
        let adv = self.adversary.as_ref().unwrap();
        committee_of(adv.node.tree(), hash, &self.params, &self.secrets)
            .into_iter()
            .map(|(pk, j)| Vote {
                voter_pk: pk,
                block_hash: *hash,
                window_index: j,
                vrf: vrf_prove(&self.secrets[&pk], &vote_input(hash, j)),
            })
            .collect()
    }

    fn release(&mut self, releases: Vec<Release>) {
        for r in releases {
            let id = self.ids[&r.block.hash()];
            let meta = &mut self.trace.blocks[id as usize];
            if meta.published_at.is_none() {
                meta.published_at = Some(self.now);
            }
            self.log(TraceEvent::Publish { t: self.now, block: id });
            for to in 0..self.honest_count() {
                self.schedule(self.now, Event::Block { to, block: r.block.clone() });
            }
            if !r.votes.is_empty() {
                let votes: Arc<[Vote]> = r.votes.into();
                for to in 0..self.honest_count() {
                    self.schedule(self.now, Event::Votes { to, votes: votes.clone() });
                }
            }
        }
    }

    fn record_block(&mut self, miner: usize, block: &BlockRef) -> u32 {
        let hash = block.hash();
        let id = self.trace.blocks.len() as u32;
        let parent = self.ids.get(&block.header.parent_hash).copied();
        let view = self.view(miner);
        let height = view.tree().height(&hash).unwrap();
        let committee = if view.rules().has_committee(view.tree(), &hash) {
            let mut c = trace::CommitteeCount::default();
            for (pk, _) in committee_of(view.tree(), &hash, &self.params, &self.secrets) {
                let owner = self.owners[&pk];
                if owner < self.honest_count() {
                    c.honest += 1;
                    c.online += self.online[owner] as u32;
                } else {
                    c.adversary += 1;
                }
            }
            Some(c)
        } else {
            None
        };
        let class = self.class_of(miner);
        let private_depth = match (class, parent) {
            (MinerClass::Adversary, Some(p)) => {
                let pm = &self.trace.blocks[p as usize];
                if pm.class == MinerClass::Adversary && pm.published_at.is_none() {
                    pm.private_depth + 1
                } else {
                    1
                }
            }
            _ => 0,
        };
        self.trace.blocks.push(BlockMeta {
            id,
            hash,
            parent,
            height,
            class,
            miner: miner as u32,
            mined_at: self.now,
            published_at: None,
            certified_at: None,
            committee,
            good: committee.map(|c| c.is_good(self.params.committee)),
            certifiable: committee.map(|c| c.is_certifiable(self.params.committee)),
            injected_failure: false,
            private_depth,
        });
        self.ids.insert(hash, id);
        id
    }

    fn broadcast_block(&mut self, from: usize, block: &BlockRef) {
        for to in 0..self.nodes.len() {
            if to == from {
                continue;
            }
            let d = if self.roles[to] == Role::Strategic { 0.0 } else { self.delay() };
            self.schedule(self.now + d, Event::Block { to, block: block.clone() });
        }
    }

    fn broadcast_votes(&mut self, from: usize, votes: Vec<Vote>) {
        let votes: Arc<[Vote]> = votes.into();
        for to in 0..self.nodes.len() {
            if to == from {
                continue;
            }
            let d = if self.roles[to] == Role::Strategic { 0.0 } else { self.delay() };
            self.schedule(self.now + d, Event::Votes { to, votes: votes.clone() });
        }
    }

    fn on_block(&mut self, to: usize, block: BlockRef) {
        if self.roles[to] == Role::Strategic {
            let adv = self.adversary.as_mut().unwrap();
            let releases = adv.on_public_block(block, &self.verifier);
            self.release(releases);
            self.retune(to);
            return;
        }
        let fx = self.nodes[to].on_receive_block(block, &self.verifier);
        if to < self.honest_count() {
            for h in &fx.accepted {
                let id = self.ids[h];
                self.log(TraceEvent::Deliver { t: self.now, node: to as u32, block: id });
            }
        }
        self.after(to, fx);
    }

    fn on_votes(&mut self, to: usize, votes: &[Vote]) {
        if self.roles[to] == Role::Strategic {
            let adv = self.adversary.as_mut().unwrap();
            let releases = adv.on_public_votes(votes, &self.verifier);
            self.release(releases);
            self.retune(to);
            return;
        }
        let fx = self.nodes[to].on_receive_votes(votes, &self.verifier);
        self.after(to, fx);
    }

    fn after(&mut self, i: usize, fx: crate::node::Effects) {
        let honest = i < self.honest_count();
        if !fx.votes.is_empty() {
            if honest && self.cfg.record_events {
                let mut per_block: BTreeMap<u32, u32> = BTreeMap::new();
                for v in &fx.votes {
                    *per_block.entry(self.ids[&v.block_hash]).or_default() += 1;
                }
                for (block, count) in per_block {
                    self.log(TraceEvent::VotesIssued { t: self.now, node: i as u32, block, count });
                }
            }
            self.broadcast_votes(i, fx.votes);
        }
        if !honest {
            if fx.mining_tip_changed {
                self.retune(i);
            }
            return;
        }
        for h in &fx.certified {
            let id = self.ids[h];
            let meta = &mut self.trace.blocks[id as usize];
            if meta.certified_at.is_none() {
                meta.certified_at = Some(self.now);
            }
            self.log(TraceEvent::QcFormed { t: self.now, node: i as u32, block: id });
        }
        if fx.mining_tip_changed {
            let h = self.nodes[i].mining_height();
            let series = &mut self.trace.heights[i];
            if series.last().map(|&(_, x)| x) != Some(h) {
                series.push((self.now, h));
            }
            self.retune(i);
        }
        for &(height, hash) in &fx.commits.reverted {
            let block = self.ids[&hash];
            self.trace.commits.push(CommitRecord { t: self.now, node: i as u32, height, block, reverted: true });
        }
        for &(height, hash) in &fx.commits.added {
            let block = self.ids[&hash];
            self.trace.commits.push(CommitRecord { t: self.now, node: i as u32, height, block, reverted: false });
        }
    }

    fn log(&mut self, e: TraceEvent) {
        if self.cfg.record_events {
            self.trace.events.push(e);
        }
    }

    fn prune(&mut self) {
        let depth = self.cfg.prune_depth;
        for n in &mut self.nodes {
            n.prune(depth);
        }
        if let Some(a) = &mut self.adversary {
            a.node.prune(depth);
        }
    }

    fn finish(mut self) -> SimTrace {
        let n = self.honest_count();
        self.trace.end_time = self.now;
        self.trace.last_mined = self.last_mined;
        let node = &self.nodes[0];
        let chain = node.tree().chain(&node.head());
        self.trace.final_chain = chain.iter().map(|h| self.ids[h]).collect();

        let blocks: Vec<&Block> = chain.iter().map(|h| node.tree().get(h).unwrap().as_ref()).collect();
        let dir = RewardDirectory::from_headers(blocks.iter().map(|b| &b.header));
        let ledger = apply_rewards(blocks.iter().copied(), &self.cfg.rewards, &dir);
        let mut by_reward_key: HashMap<PublicKey, usize> = HashMap::new();
        for i in 0..self.nodes.len() {
            by_reward_key.insert(self.view(i).keys().reward.pk, i);
        }
        let mut balances = vec![0u64; self.nodes.len()];
        for (pk, amount) in &ledger.balances {
            balances[by_reward_key[pk]] += amount;
        }
        self.trace.balances = balances;
        self.trace.escrow = ledger.escrow;

        for node in &self.nodes[..n] {
            for (r, c) in node.rejections() {
                *self.trace.rejections.entry(format!("{r:?}")).or_default() += c;
            }
            for (r, c) in node.vote_rejections() {
                *self.trace.vote_rejections.entry(format!("{r:?}")).or_default() += c;
            }
        }
        self.trace
    }
}

#[cfg(test)]
mod tests;
