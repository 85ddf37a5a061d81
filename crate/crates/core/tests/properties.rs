//! Property tests for the stated invariants of each module.

use std::collections::HashMap;
use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crystal::analytics::{
    committee_failure_prob, double_spend_prob_crystal, double_spend_prob_nc, selfish_revenue_crystal, withhold_prob,
    z_value, CommitteeModel, DoubleSpendConvention, WithholdConvention,
};
use crystal::chain::{
    validate_block, Block, BlockHeader, BlockRef, BlockTree, ChainRules, Payload, PowRule, Protocol, QuorumCertificate,
    Rejection,
};
use crystal::committee::{committee_of, vote_input, ElectionParams};
use crystal::crypto::{hash, vrf_output, vrf_prove, Digest256, PublicKey, SecretKey, SimCrypto, Target, Verifier};
use crystal::harness::{run_spec, ExperimentKind, ExperimentSpec, Format};
use crystal::node::{apply_rewards, NodeConfig, NodeState, RewardConfig, RewardDirectory};
use crystal::sim::races::committee_failure_experiment;
use crystal::sim::{self, AdversaryKind, FailureModel, SimConfig};

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig { cases: n, ..ProptestConfig::default() }
}

// ------------------------------------------------------------ fixtures

fn rules(w: u32, m: u32) -> ChainRules {
    ChainRules {
        protocol: Protocol::Crystal,
        election: ElectionParams::new(w, m).unwrap(),
        qc_distance: 1,
        pow: PowRule::Fixed(Target::pow2(254).bound().unwrap()),
    }
}

fn nodes(crypto: &SimCrypto, r: ChainRules, n: u32) -> Vec<NodeState> {
    let cfg = NodeConfig { rules: r, confirmations: 3, online: true, payload: Payload::default(), early_vote_cap: 256, orphan_cap: 64 };
    let g = Block::genesis(r.pow.initial());
    (0..n).map(|i| NodeState::new(i, crypto.participant(i), cfg, g.clone(), i as u64)).collect()
}

/// Round-robin mining with full, immediate delivery of blocks and votes.
fn certified_chain(seed: u64, w: u32, m: u32, len: u32) -> (SimCrypto, ChainRules, Vec<NodeState>, Vec<BlockRef>) {
    let crypto = SimCrypto::new(seed);
    let r = rules(w, m);
    let mut ns = nodes(&crypto, r, 4);
    let mut blocks = Vec::new();
    for i in 0..len {
        let miner = (i % 4) as usize;
        let (b, fx) = ns[miner].on_mining_success(i as f64, &crypto).unwrap();
        let mut votes = fx.votes;
        for (j, n) in ns.iter_mut().enumerate() {
            if j != miner {
                votes.extend(n.on_receive_block(b.clone(), &crypto).votes);
            }
        }
        for n in ns.iter_mut() {
            n.on_receive_votes(&votes, &crypto);
        }
        blocks.push(b);
    }
    (crypto, r, ns, blocks)
}

fn plain_block(parent: Digest256, stamp: u64, owner: PublicKey) -> Block {
    Block {
        header: BlockHeader {
            tx_root: Payload::default().root(),
            parent_hash: parent,
            qc_root: Digest256::ZERO,
            reward_pk: owner,
            election_pk: owner,
            difficulty_target: Digest256::MAX,
            timestamp: stamp,
            nonce: 0,
        },
        payload: Payload::default(),
        qc: QuorumCertificate::empty(Digest256::ZERO),
    }
}

// ------------------------------------------------------------- crypto

proptest! {
    #![proptest_config(cases(64))]

    #[test]
    fn vrf_is_deterministic_and_verifies_only_its_own_output(seed: u64, x: Vec<u8>, other: Vec<u8>, flip in 0usize..96) {
        let c = SimCrypto::new(seed);
        let kp = c.keypair(b"voter");
        let out = vrf_prove(&kp.sk, &x);
        prop_assert_eq!(out, vrf_prove(&kp.sk, &x));
        prop_assert_eq!(out.y, vrf_output(&kp.sk, &x));
        prop_assert!(c.vrf_verify(&kp.pk, &x, &out));
        let mut bad = out;
        if flip < 32 { bad.y.0[flip] ^= 1 } else { bad.proof.0[flip - 32] ^= 1 }
        prop_assert!(!c.vrf_verify(&kp.pk, &x, &bad));
        prop_assert!(!c.vrf_verify(&c.keypair(b"someone else").pk, &x, &out));
        if other != x {
            prop_assert!(!c.vrf_verify(&kp.pk, &other, &out));
        }
    }
}

#[test]
fn election_rate_is_bernoulli() {
    let c = SimCrypto::new(99);
    let params = ElectionParams::new(10, 3).unwrap();
    let x = vote_input(&hash(b"block"), 1);
    let n = 100_000u32;
    let hits = (0..n).filter(|i| params.target.admits(&vrf_output(&c.keypair(&i.to_be_bytes()).sk, &x))).count() as f64;
    let p = params.election_probability();
    let sigma = (n as f64 * p * (1.0 - p)).sqrt();
    assert!((hits - n as f64 * p).abs() <= 3.0 * sigma, "{hits} hits, expected {}", n as f64 * p);
}

// --------------------------------------------------------------- chain

proptest! {
    #![proptest_config(cases(64))]

    #[test]
    fn heights_follow_parents(parents in prop::collection::vec(any::<prop::sample::Index>(), 1..80)) {
        let g = Block::genesis(Digest256::MAX);
        let mut tree = BlockTree::new(g.clone());
        let mut hashes = vec![g.hash()];
        let mut best = 0;
        for (i, pick) in parents.iter().enumerate() {
            let parent = *pick.get(&hashes);
            let h = tree.insert(Arc::new(plain_block(parent, i as u64, PublicKey(Digest256::ZERO)))).unwrap();
            prop_assert_eq!(tree.height(&h), tree.height(&parent).map(|x| x + 1));
            prop_assert!(tree.max_height() >= best);
            best = tree.max_height();
            hashes.push(h);
        }
        prop_assert_eq!(tree.height(&tree.genesis()), Some(0));
    }

    #[test]
    fn tie_break_is_uniform_over_tips_whatever_their_hashes(tips in 2usize..6, salt: u64, seed: u64) {
        // The same tree shape under two labelings: tip choice frequencies
        // depend on neither.
        for label in [0, salt | 1] {
            let g = Block::genesis(Digest256::MAX);
            let mut tree = BlockTree::new(g.clone());
            let hs: Vec<_> = (0..tips)
                .map(|i| tree.insert(Arc::new(plain_block(g.hash(), label.wrapping_add(i as u64), PublicKey(Digest256::ZERO)))).unwrap())
                .collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let draws = 6000;
            let mut count = vec![0u32; tips];
            for _ in 0..draws {
                let t = tree.tip_of_longest_chain(&mut rng);
                count[hs.iter().position(|h| *h == t).unwrap()] += 1;
            }
            let p = 1.0 / tips as f64;
            let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
            for c in count {
                prop_assert!((c as f64 - draws as f64 * p).abs() <= 4.5 * sigma, "{c} of {draws}");
            }
        }
    }
}

proptest! {
    #![proptest_config(cases(48))]

    /// A certificate validates only when every vote does and the shares
    /// reach a quorum: any single mutation is caught by the certificate
    /// check itself, not by the commitment in the header.
    #[test]
    fn qc_mutations_are_rejected(seed in 0u64..1000, pick: prop::sample::Index, vote: prop::sample::Index, field in 0u8..7, byte in 0usize..32) {
        let (crypto, r, ns, blocks) = certified_chain(seed, 8, 8, 24);
        let tree = ns[0].tree();
        let carrying: Vec<&BlockRef> = blocks.iter().filter(|b| !b.qc.votes.is_empty()).collect();
        prop_assume!(!carrying.is_empty());
        let original = pick.get(&carrying);
        prop_assert_eq!(validate_block(original, tree, &r, &crypto), Ok(()));

        let mut b = Block::clone(original);
        let i = vote.index(b.qc.votes.len());
        let v = &mut b.qc.votes[i];
        match field {
            0 => v.voter_pk = crypto.participant(99).election.pk,
            1 => v.block_hash.0[byte] ^= 1,
            2 => v.window_index = v.window_index % 8 + 1,
            3 => v.vrf.y.0[byte] ^= 1,
            4 => v.vrf.proof.0[byte] ^= 1,
            5 => {
                let keep = r.election.quorum() - 1;
                b.qc.votes.truncate(keep);
            }
            _ => {
                let j = (i + 1) % b.qc.votes.len();
                prop_assume!(j != i);
                b.qc.votes[i] = b.qc.votes[j];
            }
        }
        b.header.qc_root = b.qc.root();
        b.solve();
        prop_assert_eq!(validate_block(&b, tree, &r, &crypto), Err(Rejection::BadQc));
    }
}

// ------------------------------------------------------------ committee

#[test]
fn sibling_committees_are_independent() {
    // Two children of one parent share a window; their committees overlap
    // in about W (m/W)^2 slots.
    let (w, m) = (100u32, 30u32);
    let crypto = SimCrypto::new(5);
    let keys: Vec<_> = (0..w).map(|i| crypto.keypair(&i.to_be_bytes())).collect();
    let all: HashMap<PublicKey, SecretKey> = keys.iter().map(|k| (k.pk, k.sk.clone())).collect();
    let g = Block::genesis(Digest256::MAX);
    let mut tree = BlockTree::new(g.clone());
    let mut tip = g.hash();
    for (i, k) in keys.iter().enumerate() {
        tip = tree.insert(Arc::new(plain_block(tip, i as u64, k.pk))).unwrap();
    }
    let params = ElectionParams::new(w, m).unwrap();
    let pairs = 200u64;
    let mut overlap = 0u64;
    for p in 0..pairs {
        let a = tree.insert(Arc::new(plain_block(tip, 1_000 + 2 * p, keys[0].pk))).unwrap();
        let b = tree.insert(Arc::new(plain_block(tip, 1_001 + 2 * p, keys[0].pk))).unwrap();
        let ca = committee_of(&tree, &a, &params, &all);
        let cb = committee_of(&tree, &b, &params, &all);
        overlap += ca.iter().filter(|s| cb.contains(s)).count() as u64;
    }
    let q = (m as f64 / w as f64).powi(2);
    let n = (pairs * w as u64) as f64;
    let sigma = (n * q * (1.0 - q)).sqrt();
    assert!((overlap as f64 - n * q).abs() <= 3.0 * sigma, "overlap {overlap}, expected {}", n * q);
}

#[test]
fn good_committee_rate_matches_the_bound() {
    let model = CommitteeModel::new(3024, 340, 0.35);
    let eps = committee_failure_prob(&model);
    let mc = committee_failure_experiment(&model, 2_000_000, 17);
    let (lo, hi) = mc.interval(z_value(0.95));
    assert!(lo <= eps && eps <= hi, "eps {eps:.4e}, sampled {:.4e} in [{lo:.4e}, {hi:.4e}]", mc.rate());
}

#[test]
fn failure_prob_is_an_upper_bound_for_small_committees() {
    // Both failure events at once are no longer negligible here; the sum
    // over-counts them.
    let model = CommitteeModel::new(200, 40, 0.3);
    let eps = committee_failure_prob(&model);
    let mc = committee_failure_experiment(&model, 200_000, 17);
    let (lo, _) = mc.interval(z_value(0.95));
    assert!(lo <= eps, "eps {eps:.4e}, sampled {:.4e}", mc.rate());
}

// ----------------------------------------------------------------- node

proptest! {
    #![proptest_config(cases(24))]

    /// With votes lost at random, the observer's mining tip is always a
    /// block it may extend.
    #[test]
    fn honest_nodes_only_extend_certified_blocks(seed in 0u64..1000, deliver in prop::collection::vec(any::<bool>(), 40)) {
        let crypto = SimCrypto::new(seed);
        let r = rules(6, 6);
        let mut ns = nodes(&crypto, r, 4);
        for (i, &ok) in deliver.iter().enumerate() {
            let miner = i % 4;
            let Ok((b, fx)) = ns[miner].on_mining_success(i as f64, &crypto) else { continue };
            let mut votes = fx.votes;
            for (j, n) in ns.iter_mut().enumerate() {
                if j != miner {
                    votes.extend(n.on_receive_block(b.clone(), &crypto).votes);
                }
            }
            for (j, n) in ns.iter_mut().enumerate() {
                if j != 3 || ok {
                    n.on_receive_votes(&votes, &crypto);
                }
            }
            for n in &ns {
                prop_assert!(n.rules().is_extendable(n.tree(), &n.mining_tip()));
            }
        }
    }

    #[test]
    fn rewards_are_conserved(seed in 0u64..1000, rb in 0u64..100, fee in 0u64..10, rv in 0u64..5, ri in 0u64..5) {
        let (_, _, ns, _) = certified_chain(seed, 6, 5, 30);
        let tree = ns[0].tree();
        let chain: Vec<&Block> = tree.chain(&ns[0].head()).iter().map(|h| &**tree.get(h).unwrap()).collect();
        let cfg = RewardConfig { block_reward: rb, tx_fees: fee, vote_reward: rv, inclusion_reward: ri };
        let dir = RewardDirectory::from_headers(chain.iter().map(|b| &b.header));
        let ledger = apply_rewards(chain.iter().copied(), &cfg, &dir);
        let expected: u64 = chain[1..].iter().map(|b| rb + fee + b.qc.votes.len() as u64 * (rv + ri)).sum();
        prop_assert_eq!(ledger.total(), expected);
        prop_assert_eq!(ledger.minted, expected);
    }
}

// ------------------------------------------------------------------ sim

fn small(seed: u64) -> SimConfig {
    SimConfig { alpha: 0.3, delta: 10.0, horizon_blocks: 800, seed, ..SimConfig::default() }
}

proptest! {
    #![proptest_config(cases(8))]

    #[test]
    fn same_seed_same_trace(seed: u64) {
        let cfg = SimConfig { record_events: true, ..small(seed) };
        let (a, b) = (sim::run(&cfg).unwrap(), sim::run(&cfg).unwrap());
        prop_assert_eq!(a.trace_hash(), b.trace_hash());
        let (mut ja, mut jb) = (Vec::new(), Vec::new());
        a.write_jsonl(&mut ja).unwrap();
        b.write_jsonl(&mut jb).unwrap();
        prop_assert!(ja == jb);
    }

    #[test]
    fn committed_prefixes_never_conflict(seed: u64, alpha in 0.0f64..0.35, protocol in prop::sample::select(vec![Protocol::Nakamoto, Protocol::Crystal])) {
        let s = sim::run(&SimConfig { alpha, protocol, ..small(seed) }).unwrap().summary();
        prop_assert!(s.conflicts.heights.is_empty(), "{:?}", s.conflicts);
        prop_assert_eq!(s.conflicts.reverts, 0);
    }

    #[test]
    fn no_withholding_without_committee_failure(seed: u64, alpha in 0.1f64..0.45) {
        let cfg = SimConfig {
            alpha,
            adversary: AdversaryKind::Withhold,
            failures: FailureModel::Injected { epsilon: 0.0 },
            ..small(seed)
        };
        let s = sim::run(&cfg).unwrap().summary();
        prop_assert!(s.max_private_lead <= 1);
        prop_assert_eq!(s.withholding_violations, 0);
    }

    #[test]
    fn honest_blocks_reach_everyone_within_two_delays(seed: u64, alpha in 0.0f64..0.35) {
        let s = sim::run(&SimConfig { alpha, ..small(seed) }).unwrap().summary();
        prop_assert!(s.progress.violations.is_empty(), "{:?}", s.progress.violations);
    }
}

// ------------------------------------------------------------ analytics

proptest! {
    #![proptest_config(cases(64))]

    /// As stated: one more expected share never raises the failure
    /// probability. The exact bound is a sawtooth in `m` (the adversary's
    /// threshold only moves every other step), so this does not hold.
    #[test]
    fn failure_prob_nonincreasing_in_m(w in 50u32..3025, frac in 0.05f64..0.9, alpha in 0.05f64..0.45) {
        let m = ((w as f64 * frac) as u32).clamp(1, w - 1);
        let a = committee_failure_prob(&CommitteeModel::new(w, m, alpha));
        let b = committee_failure_prob(&CommitteeModel::new(w, m + 1, alpha));
        prop_assert!(b <= a, "W={w} alpha={alpha}: eps({m}) = {a:e} < eps({}) = {b:e}", m + 1);
    }

    #[test]
    fn failure_prob_nonincreasing_in_m_same_parity(w in 50u32..3025, frac in 0.05f64..0.9, alpha in 0.05f64..0.45) {
        let m = ((w as f64 * frac) as u32).clamp(1, w - 2);
        let a = committee_failure_prob(&CommitteeModel::new(w, m, alpha));
        let b = committee_failure_prob(&CommitteeModel::new(w, m + 2, alpha));
        prop_assert!(b <= a, "W={w} alpha={alpha}: eps({m}) = {a:e} < eps({}) = {b:e}", m + 2);
    }

    #[test]
    fn failure_prob_nondecreasing_in_alpha(w in 50u32..3025, frac in 0.05f64..1.0, a1 in 0.0f64..0.49, a2 in 0.0f64..0.49) {
        let m = ((w as f64 * frac) as u32).clamp(1, w);
        let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
        let e_lo = committee_failure_prob(&CommitteeModel::new(w, m, lo));
        let e_hi = committee_failure_prob(&CommitteeModel::new(w, m, hi));
        prop_assert!(e_lo <= e_hi * (1.0 + 1e-12), "{e_lo:e} > {e_hi:e}");
    }

    #[test]
    fn withhold_prob_is_a_distribution(eps in 0.0f64..0.9) {
        let sum = |from: u32, conv| (from..2000).map(|l| withhold_prob(eps, l, conv)).sum::<f64>();
        prop_assert!((sum(0, WithholdConvention::Text) - 1.0).abs() < 1e-9);
        prop_assert!((sum(1, WithholdConvention::Table) - 1.0).abs() < 1e-9);
        // At least l: consecutive differences are the point masses.
        let at_least = |l| withhold_prob(eps, l, WithholdConvention::AtLeast);
        prop_assert_eq!(at_least(1), 1.0);
        let masses: f64 = (1..2000).map(|l| at_least(l) - at_least(l + 1)).sum();
        prop_assert!((masses - 1.0).abs() < 1e-9);
    }

    #[test]
    fn crystal_selfish_revenue_below_alpha(alpha in 0.0f64..0.5) {
        prop_assert!(selfish_revenue_crystal(alpha, 0.5) <= alpha + 1e-15);
    }

    #[test]
    fn double_spend_bounded_and_monotone(alpha in 0.01f64..0.49, step in 0.001f64..0.1, k in 1u32..30) {
        let a2 = (alpha + step).min(0.4999);
        prop_assume!(a2 > alpha);
        let fs: [&dyn Fn(f64, u32) -> f64; 3] = [
            &double_spend_prob_nc,
            &|a, k| double_spend_prob_crystal(a, k, DoubleSpendConvention::Table),
            &|a, k| double_spend_prob_crystal(a, k, DoubleSpendConvention::Theorem),
        ];
        for (n, f) in fs.into_iter().enumerate() {
            // (alpha/beta)^(k-1) is identically 1 at k = 1.
            if n == 2 && k == 1 {
                continue;
            }
            let p = f(alpha, k);
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert!(f(alpha, k + 1) < p, "not decreasing in k at alpha={alpha} k={k}");
            prop_assert!(f(a2, k) > p, "not increasing in alpha at alpha={alpha} k={k}");
        }
    }
}

// -------------------------------------------------------------- harness

proptest! {
    #![proptest_config(cases(6))]

    #[test]
    fn artifacts_embed_their_spec_and_repeat_exactly(seed: u64, kind in prop::sample::select(vec![ExperimentKind::Table2, ExperimentKind::Fig6, ExperimentKind::Params])) {
        let mut spec = ExperimentSpec { seed, trials: 2000, ..ExperimentSpec::new(kind) };
        if kind == ExperimentKind::Params {
            spec.grid.window = vec![1008];
            spec.grid.alpha = vec![0.2, 0.3];
        }
        let a = run_spec(&spec).unwrap();
        let b = run_spec(&spec).unwrap();
        let compact = format!("\"seed\":{}", seed);
        let pretty = format!("\"seed\": {}", seed);
        for f in [Format::Csv, Format::Json] {
            let text = a.to_string(f);
            prop_assert_eq!(&text, &b.to_string(f));
            prop_assert!(text.contains(&compact) || text.contains(&pretty));
        }
        let resolved = spec.resolved().unwrap();
        prop_assert_eq!(&a.spec, &resolved);
    }
}
