//! What a run leaves behind, and the checks computed from it.
//!
//! Export format: one JSON object per line. The first line is a `header`
//! record with the schema version and full configuration, then one `block`
//! record per mined block (genesis first), the optional `event` records, the
//! `commit` records, and a closing `summary` record. The trace hash covers
//! every line before the summary.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::analytics::{safety_condition, SafetyParams};
use crate::chain::BlockHash;
use crate::crypto::{hash, Digest256};

use super::SimConfig;

pub const TRACE_SCHEMA: &str = "crystal-trace/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinerClass {
    Genesis,
    Honest,
    Adversary,
}

/// Realized committee of a block, split by who holds the shares.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitteeCount {
    pub honest: u32,
    /// Honest shares held by voting participants.
    pub online: u32,
    pub adversary: u32,
}

impl CommitteeCount {
    /// Honest majority of shares and no adversarial quorum.
    pub fn is_good(&self, m: u32) -> bool {
        2 * self.honest > m && 2 * self.adversary <= m
    }

    /// Like [`is_good`](Self::is_good) but counting only shares that will
    /// actually be cast for an honest block.
    pub fn is_certifiable(&self, m: u32) -> bool {
        2 * self.online > m && 2 * self.adversary <= m
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockMeta {
    pub id: u32,
    pub hash: BlockHash,
    pub parent: Option<u32>,
    pub height: u64,
    pub class: MinerClass,
    /// Participant index; honest nodes come first.
    pub miner: u32,
    pub mined_at: f64,
    /// First time an honest node could see it.
    pub published_at: Option<f64>,
    /// First time an honest node held a quorum for it.
    pub certified_at: Option<f64>,
    /// `None` for blocks without a committee.
    pub committee: Option<CommitteeCount>,
    pub good: Option<bool>,
    pub certifiable: Option<bool>,
    pub injected_failure: bool,
    /// Unpublished adversary blocks ending here at mining time, this one included.
    pub private_depth: u32,
}

impl BlockMeta {
    pub(super) fn genesis(hash: BlockHash) -> Self {
        BlockMeta {
            id: 0,
            hash,
            parent: None,
            height: 0,
            class: MinerClass::Genesis,
            miner: u32::MAX,
            mined_at: 0.0,
            published_at: Some(0.0),
            certified_at: Some(0.0),
            committee: None,
            good: None,
            certifiable: None,
            injected_failure: false,
            private_depth: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub t: f64,
    pub node: u32,
    pub height: u64,
    pub block: u32,
    /// The node dropped this block from its committed prefix.
    pub reverted: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Mine { t: f64, node: u32, block: u32 },
    Publish { t: f64, block: u32 },
    Deliver { t: f64, node: u32, block: u32 },
    VotesIssued { t: f64, node: u32, block: u32, count: u32 },
    QcFormed { t: f64, node: u32, block: u32 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimTrace {
    pub config: SimConfig,
    /// Indexed by block id; genesis is 0.
    pub blocks: Vec<BlockMeta>,
    /// Per honest node, `(time, height of the next block it would mine)` at
    /// every change.
    pub heights: Vec<Vec<(f64, u64)>>,
    pub commits: Vec<CommitRecord>,
    pub events: Vec<TraceEvent>,
    /// Node 0's chain at the end, genesis first.
    pub final_chain: Vec<u32>,
    /// Balance of every participant over `final_chain`.
    pub balances: Vec<u64>,
    pub escrow: u64,
    pub rejections: BTreeMap<String, u64>,
    pub vote_rejections: BTreeMap<String, u64>,
    /// Adversary mining events with nothing worth mining on.
    pub wasted_adversary_attempts: u64,
    pub last_mined: f64,
    pub end_time: f64,
}

/// Conflicting k-deep commits found across honest nodes.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictReport {
    /// Heights at which two honest nodes ever committed different blocks.
    pub heights: Vec<u64>,
    /// Commit records flagged as reverted.
    pub reverts: u64,
}

/// Honest-progress check: every honest node mines above an honest block
/// within `2Δ` of it.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProgressReport {
    pub checked: u64,
    /// Honest blocks whose committee could not certify them.
    pub excluded: u64,
    /// `(block id, node)` pairs that were late.
    pub violations: Vec<(u32, u32)>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergedStats {
    pub honest_blocks: u64,
    pub converged: u64,
    /// Converged blocks sharing their height with another honest block.
    pub non_unique: u64,
    /// Those of them where every honest block at that height was certifiable.
    pub violations: u64,
    /// `η = e^(-2βλΔ)`.
    pub eta: f64,
    /// `(1-δ) η² β λ t` with `t` the mining period.
    pub lower_bound: f64,
    pub meets_bound: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ForkStats {
    pub blocks: u64,
    /// Blocks mined at a height some earlier block already had.
    pub forked: u64,
}

impl ForkStats {
    pub fn rate(&self) -> f64 {
        if self.blocks == 0 {
            0.0
        } else {
            self.forked as f64 / self.blocks as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub schema: String,
    pub seed: u64,
    pub blocks_mined: u64,
    pub honest_blocks: u64,
    pub adversary_blocks: u64,
    pub wasted_adversary_attempts: u64,
    /// Simulated time of the last mined block, in seconds.
    pub mining_period: f64,
    pub main_chain_height: u64,
    /// Adversary share of the main chain's non-genesis blocks.
    pub adversary_revenue: f64,
    pub fork_rate: f64,
    pub honest_committee_failures: u64,
    pub max_private_lead: u32,
    pub withholding_violations: u64,
    pub conflicts: ConflictReport,
    pub progress: ProgressReport,
    pub converged: ConvergedStats,
    pub balances: Vec<u64>,
    pub escrow: u64,
    pub rejections: BTreeMap<String, u64>,
    pub vote_rejections: BTreeMap<String, u64>,
    pub trace_hash: Digest256,
}

/// Slack `δ` used for the converged-block bound in summaries.
pub const CONVERGED_SLACK: f64 = 0.2;

impl SimTrace {
    pub(super) fn new(config: SimConfig, honest: usize) -> Self {
        SimTrace {
            config,
            blocks: Vec::new(),
            heights: vec![Vec::new(); honest],
            commits: Vec::new(),
            events: Vec::new(),
            final_chain: Vec::new(),
            balances: Vec::new(),
            escrow: 0,
            rejections: BTreeMap::new(),
            vote_rejections: BTreeMap::new(),
            wasted_adversary_attempts: 0,
            last_mined: 0.0,
            end_time: 0.0,
        }
    }

    pub fn honest(&self) -> impl Iterator<Item = &BlockMeta> {
        self.blocks.iter().filter(|b| b.class == MinerClass::Honest)
    }

    pub fn adversary(&self) -> impl Iterator<Item = &BlockMeta> {
        self.blocks.iter().filter(|b| b.class == MinerClass::Adversary)
    }

    pub fn conflicts(&self) -> ConflictReport {
        let mut seen: BTreeMap<u64, BTreeSet<u32>> = BTreeMap::new();
        let mut reverts = 0;
        for c in &self.commits {
            reverts += c.reverted as u64;
            seen.entry(c.height).or_default().insert(c.block);
        }
        let heights = seen.into_iter().filter(|(_, s)| s.len() > 1).map(|(h, _)| h).collect();
        ConflictReport { heights, reverts }
    }

    /// Height node `i` mines at, as of time `t`.
    pub fn mining_height_at(&self, i: usize, t: f64) -> u64 {
        let s = &self.heights[i];
        let k = s.partition_point(|&(x, _)| x <= t);
        s[k.saturating_sub(1)].1
    }

    pub fn progress(&self) -> ProgressReport {
        let horizon = 2.0 * self.config.delta;
        let mut r = ProgressReport::default();
        for b in self.honest() {
            if b.certifiable == Some(false) {
                r.excluded += 1;
                continue;
            }
            r.checked += 1;
            let t = b.mined_at + horizon + 1e-9 * horizon.max(1.0);
            for i in 0..self.heights.len() {
                if self.mining_height_at(i, t) < b.height + 1 {
                    r.violations.push((b.id, i as u32));
                }
            }
        }
        r
    }

    /// Converged honest blocks: no other honest block mined within `±2Δ`.
    pub fn converged(&self, slack: f64) -> ConvergedStats {
        let cfg = &self.config;
        let mut honest: Vec<&BlockMeta> = self.honest().collect();
        honest.sort_by(|a, b| a.mined_at.total_cmp(&b.mined_at).then(a.id.cmp(&b.id)));
        let w = 2.0 * cfg.delta;
        let mut by_height: BTreeMap<u64, Vec<&BlockMeta>> = BTreeMap::new();
        for b in &honest {
            by_height.entry(b.height).or_default().push(b);
        }
        let mut s = ConvergedStats { honest_blocks: honest.len() as u64, ..Default::default() };
        for (i, b) in honest.iter().enumerate() {
            let before = i == 0 || b.mined_at - honest[i - 1].mined_at > w;
            let after = i + 1 == honest.len() || honest[i + 1].mined_at - b.mined_at > w;
            if !(before && after) {
                continue;
            }
            s.converged += 1;
            let peers = &by_height[&b.height];
            if peers.len() > 1 {
                s.non_unique += 1;
                if peers.iter().all(|p| p.certifiable != Some(false)) {
                    s.violations += 1;
                }
            }
        }
        let lambda = cfg.lambda * cfg.hashrate_multiplier;
        let report = safety_condition(&SafetyParams { alpha: cfg.alpha, lambda, delta: cfg.delta, slack });
        s.eta = report.eta;
        s.lower_bound = (1.0 - slack) * report.converged_rate * self.last_mined;
        s.meets_bound = s.converged as f64 >= s.lower_bound;
        s
    }

    /// Fork statistics over heights above `skip`.
    pub fn forks(&self, skip: u64) -> ForkStats {
        let mut seen = BTreeSet::new();
        let mut s = ForkStats::default();
        let mut order: Vec<&BlockMeta> = self.blocks.iter().filter(|b| b.height > skip).collect();
        order.sort_by(|a, b| a.mined_at.total_cmp(&b.mined_at).then(a.id.cmp(&b.id)));
        for b in order {
            s.blocks += 1;
            if !seen.insert(b.height) {
                s.forked += 1;
            }
        }
        s
    }

    /// Whether `b` was mined past the bootstrap. Under certificates that
    /// means its parent had a committee; bootstrap blocks protect nothing.
    pub fn is_guarded(&self, b: &BlockMeta) -> bool {
        self.config.protocol == crate::chain::Protocol::Nakamoto
            || b.parent.is_some_and(|p| self.blocks[p as usize].committee.is_some())
    }

    /// Longest run of unpublished adversary blocks mined past the bootstrap.
    pub fn max_private_lead(&self) -> u32 {
        self.adversary().filter(|b| self.is_guarded(b)).map(|b| b.private_depth).max().unwrap_or(0)
    }

    /// Adversary blocks extending an unpublished block whose committee did not fail.
    pub fn withholding_violations(&self) -> u64 {
        self.adversary()
            .filter(|b| b.private_depth >= 2 && self.is_guarded(b))
            .filter(|b| {
                let p = &self.blocks[b.parent.unwrap() as usize];
                !(p.injected_failure || p.good == Some(false))
            })
            .count() as u64
    }

    /// Adversary share of the main chain.
    pub fn adversary_revenue(&self) -> f64 {
        let chain = &self.final_chain[1..];
        if chain.is_empty() {
            return 0.0;
        }
        let adv = chain.iter().filter(|&&id| self.blocks[id as usize].class == MinerClass::Adversary).count();
        adv as f64 / chain.len() as f64
    }

    /// Writes every record except the summary.
    fn write_body(&self, out: &mut impl Write) -> io::Result<()> {
        #[derive(Serialize)]
        struct Header<'a> {
            record: &'static str,
            schema: &'static str,
            config: &'a SimConfig,
        }
        #[derive(Serialize)]
        struct Tagged<'a, T: Serialize> {
            record: &'static str,
            #[serde(flatten)]
            body: &'a T,
        }
        let line = |out: &mut dyn Write, v: &dyn erased::Json| -> io::Result<()> {
            out.write_all(v.json().as_bytes())?;
            out.write_all(b"\n")
        };
        line(out, &Header { record: "header", schema: TRACE_SCHEMA, config: &self.config })?;
        for b in &self.blocks {
            line(out, &Tagged { record: "block", body: b })?;
        }
        for e in &self.events {
            line(out, &Tagged { record: "event", body: e })?;
        }
        for c in &self.commits {
            line(out, &Tagged { record: "commit", body: c })?;
        }
        line(out, &Tagged { record: "final_chain", body: &FinalChain { blocks: &self.final_chain } })
    }

    pub fn trace_hash(&self) -> Digest256 {
        let mut buf = Vec::new();
        self.write_body(&mut buf).expect("writing to memory");
        hash(&buf)
    }

    pub fn summary(&self) -> SimSummary {
        let cfg = &self.config;
        let honest_blocks = self.honest().count() as u64;
        let adversary_blocks = self.adversary().count() as u64;
        SimSummary {
            schema: TRACE_SCHEMA.to_string(),
            seed: cfg.seed,
            blocks_mined: honest_blocks + adversary_blocks,
            honest_blocks,
            adversary_blocks,
            wasted_adversary_attempts: self.wasted_adversary_attempts,
            mining_period: self.last_mined,
            main_chain_height: self.final_chain.len() as u64 - 1,
            adversary_revenue: self.adversary_revenue(),
            fork_rate: self.forks(cfg.window as u64 + 1).rate(),
            honest_committee_failures: self.honest().filter(|b| b.good == Some(false)).count() as u64,
            max_private_lead: self.max_private_lead(),
            withholding_violations: self.withholding_violations(),
            conflicts: self.conflicts(),
            progress: self.progress(),
            converged: self.converged(CONVERGED_SLACK),
            balances: self.balances.clone(),
            escrow: self.escrow,
            rejections: self.rejections.clone(),
            vote_rejections: self.vote_rejections.clone(),
            trace_hash: self.trace_hash(),
        }
    }

    /// Full line-delimited export, summary last.
    pub fn write_jsonl(&self, out: &mut impl Write) -> io::Result<()> {
        self.write_body(out)?;
        #[derive(Serialize)]
        struct Closing<'a> {
            record: &'static str,
            #[serde(flatten)]
            summary: &'a SimSummary,
        }
        let s = self.summary();
        serde_json::to_writer(&mut *out, &Closing { record: "summary", summary: &s })?;
        out.write_all(b"\n")
    }
}

#[derive(Serialize)]
struct FinalChain<'a> {
    blocks: &'a [u32],
}

mod erased {
    /// Object-safe JSON serialization for the line writer.
    pub trait Json {
        fn json(&self) -> String;
    }

    impl<T: serde::Serialize> Json for T {
        fn json(&self) -> String {
            serde_json::to_string(self).expect("trace records serialize")
        }
    }
}
