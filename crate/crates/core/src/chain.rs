//! Blocks, votes, quorum certificates and the per-node block tree.
//!
//! # Canonical encoding
//!
//! All integers are big-endian; fields appear in the order listed.
//!
//! | item    | layout                                                                   | bytes |
//! |---------|--------------------------------------------------------------------------|-------|
//! | header  | tx_root, parent_hash, qc_root, reward_pk, election_pk, target (32 each), timestamp u64, nonce u64 | 208 |
//! | vote    | voter_pk 32, block_hash 32, window_index u32, vrf_y 32, vrf_proof 64      | 164   |
//! | qc      | block_hash 32, vote count u32, votes                                     | 36 + 164·n |
//! | block   | header, tx_count u32, tx_bytes u32, qc                                   |       |
//!
//! The block hash is SHA-256 of the encoded header. Certificate votes are
//! kept sorted by `(window_index, voter_pk)`, which also makes duplicates
//! adjacent and therefore detectable.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use crate::committee::{self, ElectionParams};
use crate::crypto::{hash, hash_parts, Digest256, PublicKey, Target, Verifier, VrfOutput, VrfProof};

pub type BlockHash = Digest256;

pub const HEADER_LEN: usize = 208;
pub const VOTE_LEN: usize = 164;

/// Upper bound on a block's transaction bytes.
pub const MAX_BLOCK_BYTES: u32 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockHeader {
    pub tx_root: Digest256,
    pub parent_hash: BlockHash,
    /// Merkle root over the votes of the embedded certificate.
    pub qc_root: Digest256,
    pub reward_pk: PublicKey,
    pub election_pk: PublicKey,
    /// Proof-of-work target `D`: a header is mined when its hash is below it.
    pub difficulty_target: Digest256,
    /// Seconds.
    pub timestamp: u64,
    pub nonce: u64,
}

impl BlockHeader {
    pub fn encode(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        let mut w = &mut out[..];
        for field in [
            &self.tx_root,
            &self.parent_hash,
            &self.qc_root,
            &self.reward_pk.0,
            &self.election_pk.0,
            &self.difficulty_target,
        ] {
            w[..32].copy_from_slice(&field.0);
            w = &mut w[32..];
        }
        w[..8].copy_from_slice(&self.timestamp.to_be_bytes());
        w[8..16].copy_from_slice(&self.nonce.to_be_bytes());
        out
    }

    pub fn hash(&self) -> BlockHash {
        hash(&self.encode())
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(BlockHeader {
            tx_root: r.digest()?,
            parent_hash: r.digest()?,
            qc_root: r.digest()?,
            reward_pk: PublicKey(r.digest()?),
            election_pk: PublicKey(r.digest()?),
            difficulty_target: r.digest()?,
            timestamp: r.u64()?,
            nonce: r.u64()?,
        })
    }
}

/// Opaque transaction payload: only its size matters to the protocol.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Payload {
    pub tx_count: u32,
    pub tx_bytes: u32,
}

impl Payload {
    pub fn root(&self) -> Digest256 {
        hash_parts(&[b"crystal/txs", &self.tx_count.to_be_bytes(), &self.tx_bytes.to_be_bytes()])
    }

    /// Every transaction takes at least one byte and the block fits the size cap.
    pub fn is_well_formed(&self) -> bool {
        self.tx_bytes <= MAX_BLOCK_BYTES && self.tx_count <= self.tx_bytes
    }
}

/// A committee membership proof for one window slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Vote {
    pub voter_pk: PublicKey,
    pub block_hash: BlockHash,
    /// 1-based slot in the block's sliding window; 1 is the parent.
    pub window_index: u32,
    pub vrf: VrfOutput,
}

impl Vote {
    /// Deduplication key.
    pub fn key(&self) -> (u32, PublicKey) {
        (self.window_index, self.voter_pk)
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.voter_pk.0 .0);
        out.extend_from_slice(&self.block_hash.0);
        out.extend_from_slice(&self.window_index.to_be_bytes());
        out.extend_from_slice(&self.vrf.y.0);
        out.extend_from_slice(&self.vrf.proof.0);
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(VOTE_LEN);
        self.encode_into(&mut out);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let v = Self::read(&mut r)?;
        r.finish()?;
        Ok(v)
    }

    fn read(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(Vote {
            voter_pk: PublicKey(r.digest()?),
            block_hash: r.digest()?,
            window_index: r.u32()?,
            vrf: VrfOutput { y: r.digest()?, proof: VrfProof(r.array()?) },
        })
    }
}

/// Votes on one block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuorumCertificate {
    pub block_hash: BlockHash,
    pub votes: Vec<Vote>,
}

impl QuorumCertificate {
    /// The certificate carried when the certified block has no committee.
    pub fn empty(block_hash: BlockHash) -> Self {
        QuorumCertificate { block_hash, votes: Vec::new() }
    }

    /// Builds a certificate in canonical order, dropping duplicate keys.
    pub fn from_votes(block_hash: BlockHash, mut votes: Vec<Vote>) -> Self {
        votes.sort_by_key(Vote::key);
        votes.dedup_by_key(|v| v.key());
        QuorumCertificate { block_hash, votes }
    }

    /// Distinct `(voter_pk, window_index)` pairs.
    pub fn share_count(&self) -> usize {
        let mut keys: Vec<_> = self.votes.iter().map(Vote::key).collect();
        keys.sort_unstable();
        keys.dedup();
        keys.len()
    }

    /// Votes strictly increasing by key, hence no duplicates.
    pub fn is_canonical(&self) -> bool {
        self.votes.windows(2).all(|w| w[0].key() < w[1].key())
    }

    pub fn root(&self) -> Digest256 {
        merkle_root(self.votes.iter().map(|v| hash_parts(&[&[0u8], &v.encode()])).collect())
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.block_hash.0);
        out.extend_from_slice(&(self.votes.len() as u32).to_be_bytes());
        for v in &self.votes {
            v.encode_into(out);
        }
    }

    fn read(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let block_hash = r.digest()?;
        let n = r.u32()? as usize;
        if r.remaining() < n.saturating_mul(VOTE_LEN) {
            return Err(DecodeError::Truncated);
        }
        let votes = (0..n).map(|_| Vote::read(r)).collect::<Result<_, _>>()?;
        Ok(QuorumCertificate { block_hash, votes })
    }
}

/// Binary Merkle root; an odd node is paired with itself. Empty is zero.
pub fn merkle_root(mut level: Vec<Digest256>) -> Digest256 {
    if level.is_empty() {
        return Digest256::ZERO;
    }
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|pair| {
                let r = pair.get(1).unwrap_or(&pair[0]);
                hash_parts(&[&[1u8], &pair[0].0, &r.0])
            })
            .collect();
    }
    level[0]
}

/// Size of a compressed certificate: VRF output and proof per vote plus a
/// bitmap over the `window` slots saying which ones voted.
pub fn qc_byte_size(votes: usize, window: u32) -> usize {
    votes * (crate::crypto::VRF_OUTPUT_LEN + crate::crypto::VRF_PROOF_LEN) + window.div_ceil(8) as usize
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub header: BlockHeader,
    pub payload: Payload,
    /// Certificate for the ancestor `qc_distance` blocks up.
    pub qc: QuorumCertificate,
}

pub type BlockRef = Arc<Block>;

impl Block {
    pub fn genesis(difficulty_target: Digest256) -> Self {
        Block {
            header: BlockHeader {
                tx_root: Payload::default().root(),
                parent_hash: Digest256::ZERO,
                qc_root: Digest256::ZERO,
                reward_pk: PublicKey(Digest256::ZERO),
                election_pk: PublicKey(Digest256::ZERO),
                difficulty_target,
                timestamp: 0,
                nonce: 0,
            },
            payload: Payload::default(),
            qc: QuorumCertificate::empty(Digest256::ZERO),
        }
    }

    pub fn hash(&self) -> BlockHash {
        self.header.hash()
    }

    /// Increments the nonce until the header hash is below its target.
    pub fn solve(&mut self) {
        let target = Target::below(self.header.difficulty_target);
        while !target.admits(&self.header.hash()) {
            self.header.nonce = self.header.nonce.wrapping_add(1);
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 + 36 + VOTE_LEN * self.qc.votes.len());
        out.extend_from_slice(&self.header.encode());
        out.extend_from_slice(&self.payload.tx_count.to_be_bytes());
        out.extend_from_slice(&self.payload.tx_bytes.to_be_bytes());
        self.qc.encode_into(&mut out);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let header = BlockHeader::decode(&mut r)?;
        let payload = Payload { tx_count: r.u32()?, tx_bytes: r.u32()? };
        let qc = QuorumCertificate::read(&mut r)?;
        r.finish()?;
        Ok(Block { header, payload, qc })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("input ended early")]
    Truncated,
    #[error("{0} trailing bytes")]
    Trailing(usize),
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.buf.len() < n {
            return Err(DecodeError::Truncated);
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], DecodeError> {
        Ok(self.take(N)?.try_into().unwrap())
    }

    fn digest(&mut self) -> Result<Digest256, DecodeError> {
        Ok(Digest256(self.array()?))
    }

    fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_be_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_be_bytes(self.array()?))
    }

    fn remaining(&self) -> usize {
        self.buf.len()
    }

    fn finish(self) -> Result<(), DecodeError> {
        match self.buf.len() {
            0 => Ok(()),
            n => Err(DecodeError::Trailing(n)),
        }
    }
}

/// Which fork-choice prerequisites apply.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    /// Plain longest chain; certificates are always empty.
    Nakamoto,
    /// Longest chain over certified blocks.
    Crystal,
}

/// How the proof-of-work target of a block is determined.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PowRule {
    Fixed(Digest256),
    /// Target rescaled every `interval` blocks towards `spacing` seconds per block.
    Retarget { initial: Digest256, interval: u64, spacing: u64 },
}

impl PowRule {
    pub fn initial(&self) -> Digest256 {
        match *self {
            PowRule::Fixed(d) | PowRule::Retarget { initial: d, .. } => d,
        }
    }

    /// Target required of a child of `parent`.
    ///
    /// With retargeting, a block at height `h` with `(h - 1) % interval == 0`
    /// and `h > interval` gets a new target computed from the `interval`
    /// block intervals ending at its parent.
    pub fn expected_target(&self, tree: &BlockTree, parent: &BlockHash) -> Option<Digest256> {
        let p = tree.get(parent)?;
        match *self {
            PowRule::Fixed(d) => Some(d),
            PowRule::Retarget { interval, spacing, .. } => {
                let h = tree.height(parent)? + 1;
                if h <= interval || (h - 1) % interval != 0 {
                    return Some(p.header.difficulty_target);
                }
                let start = tree.ancestor_at(parent, h - 1 - interval)?;
                let elapsed = p.header.timestamp.saturating_sub(tree.get(&start)?.header.timestamp);
                Some(crate::node::adjust_difficulty(p.header.difficulty_target, elapsed, interval, spacing))
            }
        }
    }
}

/// Everything a node needs to judge a block.
#[derive(Clone, Copy, Debug)]
pub struct ChainRules {
    pub protocol: Protocol,
    pub election: ElectionParams,
    /// Height gap between a block and the ancestor its certificate covers.
    pub qc_distance: u32,
    pub pow: PowRule,
}

impl ChainRules {
    /// Hash of the block a child of `parent` must certify.
    pub fn certified_ancestor(&self, tree: &BlockTree, parent: &BlockHash) -> Option<BlockHash> {
        let h = tree.height(parent)? + 1;
        tree.ancestor_at(parent, h.saturating_sub(self.qc_distance as u64))
    }

    /// Whether `hash` is a block whose votes form a certificate at all.
    pub fn has_committee(&self, tree: &BlockTree, hash: &BlockHash) -> bool {
        self.protocol == Protocol::Crystal
            && tree.height(hash).is_some_and(|h| h > self.election.window as u64)
    }

    /// Whether an honest miner may build on `hash` given the certificates it knows.
    pub fn is_extendable(&self, tree: &BlockTree, hash: &BlockHash) -> bool {
        match self.certified_ancestor(tree, hash) {
            Some(a) => !self.has_committee(tree, &a) || tree.is_certified(&a),
            None => false,
        }
    }
}

#[derive(Clone, Copy, Debug, Error, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rejection {
    #[error("header hash not below the required target")]
    BadPow,
    #[error("parent block unknown")]
    MissingParent,
    #[error("payload malformed")]
    BadPayload,
    #[error("certificate invalid")]
    BadQc,
}

/// Checks proof of work, parent presence, payload and certificate, in that order.
pub fn validate_block<V: Verifier + ?Sized>(
    block: &Block,
    tree: &BlockTree,
    rules: &ChainRules,
    verifier: &V,
) -> Result<(), Rejection> {
    let h = &block.header;
    if !Target::below(h.difficulty_target).admits(&h.hash()) {
        return Err(Rejection::BadPow);
    }
    if !tree.contains(&h.parent_hash) {
        return Err(Rejection::MissingParent);
    }
    if rules.pow.expected_target(tree, &h.parent_hash) != Some(h.difficulty_target) {
        return Err(Rejection::BadPow);
    }
    if !block.payload.is_well_formed() || block.payload.root() != h.tx_root {
        return Err(Rejection::BadPayload);
    }
    check_qc(block, tree, rules, verifier).then_some(()).ok_or(Rejection::BadQc)
}

fn check_qc<V: Verifier + ?Sized>(block: &Block, tree: &BlockTree, rules: &ChainRules, verifier: &V) -> bool {
    let qc = &block.qc;
    let Some(target) = rules.certified_ancestor(tree, &block.header.parent_hash) else {
        return false;
    };
    if qc.block_hash != target || verifier.qc_root(qc) != block.header.qc_root {
        return false;
    }
    if !rules.has_committee(tree, &target) {
        return qc.votes.is_empty();
    }
    qc.is_canonical()
        && rules.election.is_quorum(qc.votes.len())
        && qc.votes.iter().all(|v| committee::verify_vote(v, tree, &rules.election, verifier).is_ok())
}

type EntryId = u32;

#[derive(Debug)]
struct Entry {
    block: BlockRef,
    hash: BlockHash,
    height: u64,
    parent: Option<EntryId>,
    /// Ancestor at `skip_height(height)`, for logarithmic ancestor lookup.
    skip: Option<EntryId>,
    certified: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InsertError {
    #[error("block already present")]
    Duplicate,
    #[error("parent block unknown")]
    MissingParent,
}

/// All blocks a node has accepted, rooted at genesis.
#[derive(Debug)]
pub struct BlockTree {
    entries: Vec<Entry>,
    index: HashMap<BlockHash, EntryId>,
    by_height: Vec<Vec<EntryId>>,
}

fn invert_lowest_one(n: u64) -> u64 {
    n & n.wrapping_sub(1)
}

/// Skip-list target height used by Bitcoin Core's block index.
fn skip_height(h: u64) -> u64 {
    if h < 2 {
        0
    } else if h & 1 == 1 {
        invert_lowest_one(invert_lowest_one(h - 1)) + 1
    } else {
        invert_lowest_one(h)
    }
}

impl BlockTree {
    pub fn new(genesis: Block) -> Self {
        let hash = genesis.hash();
        let mut t = BlockTree { entries: Vec::new(), index: HashMap::new(), by_height: vec![vec![0]] };
        t.entries.push(Entry { block: Arc::new(genesis), hash, height: 0, parent: None, skip: None, certified: true });
        t.index.insert(hash, 0);
        t
    }

    pub fn genesis(&self) -> BlockHash {
        self.entries[0].hash
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Adds a block whose parent is present. Does not validate it.
    pub fn insert(&mut self, block: BlockRef) -> Result<BlockHash, InsertError> {
        let hash = block.hash();
        if self.index.contains_key(&hash) {
            return Err(InsertError::Duplicate);
        }
        let &parent = self.index.get(&block.header.parent_hash).ok_or(InsertError::MissingParent)?;
        let height = self.entries[parent as usize].height + 1;
        let skip = self.ancestor_id(parent, skip_height(height));
        let id = self.entries.len() as EntryId;
        self.entries.push(Entry { block, hash, height, parent: Some(parent), skip, certified: false });
        self.index.insert(hash, id);
        if self.by_height.len() <= height as usize {
            self.by_height.push(Vec::new());
        }
        self.by_height[height as usize].push(id);
        Ok(hash)
    }

    pub fn contains(&self, hash: &BlockHash) -> bool {
        self.index.contains_key(hash)
    }

    fn entry(&self, hash: &BlockHash) -> Option<&Entry> {
        self.index.get(hash).map(|&i| &self.entries[i as usize])
    }

    pub fn get(&self, hash: &BlockHash) -> Option<&BlockRef> {
        self.entry(hash).map(|e| &e.block)
    }

    pub fn height(&self, hash: &BlockHash) -> Option<u64> {
        self.entry(hash).map(|e| e.height)
    }

    pub fn parent(&self, hash: &BlockHash) -> Option<BlockHash> {
        let p = self.entry(hash)?.parent?;
        Some(self.entries[p as usize].hash)
    }

    pub fn max_height(&self) -> u64 {
        self.by_height.len() as u64 - 1
    }

    /// Blocks at `height`, in insertion order.
    pub fn at_height(&self, height: u64) -> impl Iterator<Item = BlockHash> + '_ {
        self.by_height
            .get(height as usize)
            .into_iter()
            .flatten()
            .map(|&i| self.entries[i as usize].hash)
    }

    fn ancestor_id(&self, from: EntryId, height: u64) -> Option<EntryId> {
        let mut walk = from;
        let mut h = self.entries[walk as usize].height;
        if height > h {
            return None;
        }
        while h > height {
            let e = &self.entries[walk as usize];
            let hs = skip_height(h);
            let hs_prev = skip_height(h - 1);
            let take_skip = e.skip.is_some()
                && (hs == height || (hs > height && !(hs_prev + 2 < hs && hs_prev >= height)));
            walk = if take_skip { e.skip.unwrap() } else { e.parent.unwrap() };
            h = self.entries[walk as usize].height;
        }
        Some(walk)
    }

    /// The ancestor of `hash` (or `hash` itself) at `height`.
    pub fn ancestor_at(&self, hash: &BlockHash, height: u64) -> Option<BlockHash> {
        let &id = self.index.get(hash)?;
        self.ancestor_id(id, height).map(|a| self.entries[a as usize].hash)
    }

    /// Whether `a` is `b` or one of its ancestors.
    pub fn is_ancestor(&self, a: &BlockHash, b: &BlockHash) -> bool {
        match self.height(a) {
            Some(h) => self.ancestor_at(b, h) == Some(*a),
            None => false,
        }
    }

    /// Hashes from genesis to `hash`, inclusive.
    pub fn chain(&self, hash: &BlockHash) -> Vec<BlockHash> {
        let mut out = Vec::new();
        let mut cur = self.index.get(hash).copied();
        while let Some(i) = cur {
            let e = &self.entries[i as usize];
            out.push(e.hash);
            cur = e.parent;
        }
        out.reverse();
        out
    }

    /// A block at the maximum height, uniformly at random among ties.
    pub fn tip_of_longest_chain<R: Rng + ?Sized>(&self, rng: &mut R) -> BlockHash {
        let top = self.by_height.last().unwrap();
        self.entries[top[rng.random_range(0..top.len())] as usize].hash
    }

    /// Owner of slot `index` in the sliding window of block `hash`.
    ///
    /// Slot `j` belongs to the miner of the ancestor `j` blocks up. Genesis
    /// owns no slot, so a block has a window only once `h > window`.
    pub fn window_owner(&self, hash: &BlockHash, index: u32, window: u32) -> Option<PublicKey> {
        let h = self.height(hash)?;
        if index == 0 || index > window || h <= window as u64 {
            return None;
        }
        let a = self.ancestor_at(hash, h - index as u64)?;
        Some(self.get(&a)?.header.election_pk)
    }

    /// Slot owners `1..=window` of the window of `hash`, or `None` while the
    /// chain is too short to fill it.
    pub fn window(&self, hash: &BlockHash, window: u32) -> Option<Vec<PublicKey>> {
        let &id = self.index.get(hash)?;
        if self.entries[id as usize].height <= window as u64 {
            return None;
        }
        let mut out = Vec::with_capacity(window as usize);
        let mut cur = self.entries[id as usize].parent;
        while out.len() < window as usize {
            let e = &self.entries[cur.unwrap() as usize];
            out.push(e.block.header.election_pk);
            cur = e.parent;
        }
        Some(out)
    }

    /// Marks `hash` certified. Returns whether that changed anything.
    pub fn mark_certified(&mut self, hash: &BlockHash) -> bool {
        match self.index.get(hash) {
            Some(&i) => !std::mem::replace(&mut self.entries[i as usize].certified, true),
            None => false,
        }
    }

    /// Genesis counts as certified.
    pub fn is_certified(&self, hash: &BlockHash) -> bool {
        self.entry(hash).is_some_and(|e| e.certified)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{vrf_prove, SimCrypto};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn child(parent: &Block, miner: u8, ts: u64) -> Block {
        let mut b = Block {
            header: BlockHeader {
                tx_root: Payload::default().root(),
                parent_hash: parent.hash(),
                qc_root: Digest256::ZERO,
                reward_pk: PublicKey(Digest256([miner; 32])),
                election_pk: PublicKey(Digest256([miner; 32])),
                difficulty_target: parent.header.difficulty_target,
                timestamp: ts,
                nonce: 0,
            },
            payload: Payload::default(),
            qc: QuorumCertificate::empty(parent.hash()),
        };
        b.solve();
        b
    }

    fn line(n: usize) -> (BlockTree, Vec<Block>) {
        let g = Block::genesis(Target::pow2(254).bound().unwrap());
        let mut tree = BlockTree::new(g.clone());
        let mut blocks = vec![g];
        for i in 0..n {
            let b = child(blocks.last().unwrap(), i as u8, i as u64);
            tree.insert(Arc::new(b.clone())).unwrap();
            blocks.push(b);
        }
        (tree, blocks)
    }

    #[test]
    fn heights_and_tip() {
        let (tree, blocks) = line(3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(tree.height(&blocks[3].hash()), Some(3));
        assert_eq!(tree.tip_of_longest_chain(&mut rng), blocks[3].hash());
    }

    #[test]
    fn ancestor_lookup_matches_linear_walk() {
        let (tree, blocks) = line(300);
        for (i, b) in blocks.iter().enumerate().step_by(7) {
            for h in 0..=i as u64 {
                assert_eq!(tree.ancestor_at(&b.hash(), h), Some(blocks[h as usize].hash()));
            }
            assert_eq!(tree.ancestor_at(&b.hash(), i as u64 + 1), None);
        }
    }

    #[test]
    fn tie_break_is_uniform() {
        let (mut tree, blocks) = line(2);
        let a = child(&blocks[1], 100, 9);
        let b = child(&blocks[1], 101, 9);
        let (_, _) = (tree.insert(Arc::new(a.clone())), tree.insert(Arc::new(b)));
        assert_eq!(tree.at_height(2).count(), 3);
        let c = child(&blocks[2], 7, 10);
        let d = child(&a, 8, 10);
        tree.insert(Arc::new(c.clone())).unwrap();
        tree.insert(Arc::new(d)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let hits = (0..n).filter(|_| tree.tip_of_longest_chain(&mut rng) == c.hash()).count();
        let f = hits as f64 / n as f64;
        assert!((f - 0.5).abs() < 0.01, "{f}");
    }

    #[test]
    fn longer_fork_takes_over() {
        let (mut tree, blocks) = line(3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut tip = blocks[1].clone();
        for i in 0..3 {
            tip = child(&tip, 50 + i, 100 + i as u64);
            tree.insert(Arc::new(tip.clone())).unwrap();
        }
        assert_eq!(tree.tip_of_longest_chain(&mut rng), tip.hash());
    }

    #[test]
    fn insert_needs_parent_and_rejects_duplicates() {
        let (mut tree, blocks) = line(1);
        let orphan = child(&child(&blocks[1], 9, 5), 9, 6);
        assert_eq!(tree.insert(Arc::new(orphan)), Err(InsertError::MissingParent));
        assert_eq!(tree.insert(Arc::new(blocks[1].clone())), Err(InsertError::Duplicate));
    }

    #[test]
    fn window_indexes_from_parent() {
        let (tree, blocks) = line(6);
        let b = blocks[6].hash();
        assert_eq!(tree.window(&b, 6), None);
        let w = tree.window(&b, 5).unwrap();
        assert_eq!(w[0], blocks[5].header.election_pk);
        assert_eq!(w[4], blocks[1].header.election_pk);
        for j in 1..=5 {
            assert_eq!(tree.window_owner(&b, j, 5), Some(w[j as usize - 1]));
        }
        assert_eq!(tree.window_owner(&b, 6, 5), None);
        assert_eq!(tree.window_owner(&b, 1, 6), None);
        assert_eq!(tree.window_owner(&b, 0, 5), None);
    }

    #[test]
    fn codec_roundtrip() {
        let c = SimCrypto::new(1);
        let kp = c.keypair(b"v");
        let (_, blocks) = line(2);
        let mut b = blocks[2].clone();
        let votes = (1..4)
            .map(|i| Vote {
                voter_pk: kp.pk,
                block_hash: blocks[1].hash(),
                window_index: i,
                vrf: vrf_prove(&kp.sk, &[i as u8]),
            })
            .collect();
        b.qc = QuorumCertificate::from_votes(blocks[1].hash(), votes);
        b.header.qc_root = b.qc.root();
        let bytes = b.encode();
        assert_eq!(bytes.len(), HEADER_LEN + 8 + 36 + 3 * VOTE_LEN);
        assert_eq!(Block::decode(&bytes), Ok(b.clone()));
        assert_eq!(Block::decode(&bytes[..bytes.len() - 1]), Err(DecodeError::Truncated));
        let mut long = bytes.clone();
        long.push(0);
        assert_eq!(Block::decode(&long), Err(DecodeError::Trailing(1)));
        assert_eq!(b.qc.votes[0].encode().len(), VOTE_LEN);
    }

    #[test]
    fn merkle_root_shape() {
        assert_eq!(merkle_root(vec![]), Digest256::ZERO);
        let a = hash(b"a");
        let b = hash(b"b");
        let c = hash(b"c");
        assert_eq!(merkle_root(vec![a]), a);
        let ab = hash_parts(&[&[1], &a.0, &b.0]);
        let cc = hash_parts(&[&[1], &c.0, &c.0]);
        assert_eq!(merkle_root(vec![a, b, c]), hash_parts(&[&[1], &ab.0, &cc.0]));
        assert_ne!(merkle_root(vec![a, b]), merkle_root(vec![b, a]));
    }

    #[test]
    fn qc_sizes() {
        assert_eq!(qc_byte_size(0, 3024), 378);
        assert_eq!(qc_byte_size(500, 3024), 48_000 + 378);
        assert_eq!(qc_byte_size(700, 3024) - 378, 67_200);
    }

    #[test]
    fn skip_heights_point_down() {
        for h in 1..5000u64 {
            assert!(skip_height(h) < h);
        }
    }
}
