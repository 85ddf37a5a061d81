use super::*;
use crate::analytics::selfish_revenue_crystal;

fn base(seed: u64) -> SimConfig {
    SimConfig { seed, horizon_blocks: 2000, ..SimConfig::default() }
}

#[test]
fn rejects_bad_configs() {
    let bad = [
        (SimConfig { alpha: 0.5, ..base(0) }, ConfigError::Alpha(0.5)),
        (SimConfig { honest_nodes: 0, ..base(0) }, ConfigError::NoHonestNodes),
        (SimConfig { lambda: 0.0, ..base(0) }, ConfigError::Lambda(0.0)),
        (SimConfig { delta: -1.0, ..base(0) }, ConfigError::Delta(-1.0)),
        (SimConfig { confirmations: 0, ..base(0) }, ConfigError::Depth),
        (SimConfig { offline_fraction: 1.5, ..base(0) }, ConfigError::Offline(1.5)),
        (SimConfig { horizon_blocks: 0, ..base(0) }, ConfigError::Horizon),
        (SimConfig { failures: FailureModel::Injected { epsilon: 2.0 }, ..base(0) }, ConfigError::Epsilon(2.0)),
    ];
    for (cfg, err) in bad {
        assert_eq!(run(&cfg).unwrap_err(), err);
    }
    assert!(matches!(run(&SimConfig { committee: 101, ..base(0) }), Err(ConfigError::Election(_))));
}

#[test]
fn no_delay_no_adversary_single_chain() {
    let t = run(&SimConfig { horizon_blocks: 10_000, ..base(1) }).unwrap();
    assert_eq!(t.blocks.len(), 10_001);
    assert_eq!(t.forks(0).forked, 0);
    assert_eq!(t.final_chain.len(), 10_001);
    let s = t.summary();
    assert!(s.conflicts.heights.is_empty() && s.conflicts.reverts == 0);
    assert!(s.progress.violations.is_empty());
    assert_eq!(s.converged.converged, 10_000);
    assert!(s.rejections.is_empty(), "{:?}", s.rejections);
}

#[test]
fn natural_fork_rate_matches_two_hop_window() {
    // Enough nodes that no two of them hold a quorum between them, so every
    // certificate needs a second hop.
    let cfg = SimConfig { delta: 10.0, horizon_blocks: 20_000, honest_nodes: 12, ..base(2) };
    let t = run(&cfg).unwrap();
    let f = t.forks(cfg.window as u64 + 1);
    let p = 1.0 - (-2.0 * cfg.lambda * cfg.delta).exp();
    let sigma = (p * (1.0 - p) / f.blocks as f64).sqrt();
    assert!((f.rate() - p).abs() < 3.0 * sigma, "{} vs {p} ± {sigma}", f.rate());
}

#[test]
fn nakamoto_forks_within_one_hop() {
    let cfg = SimConfig { protocol: Protocol::Nakamoto, delta: 10.0, horizon_blocks: 20_000, ..base(3) };
    let t = run(&cfg).unwrap();
    let f = t.forks(0);
    // A miner never forks its own block.
    let n = cfg.honest_nodes as f64;
    let p = (1.0 - (-cfg.lambda * cfg.delta).exp()) * (n - 1.0) / n;
    let sigma = (p * (1.0 - p) / f.blocks as f64).sqrt();
    assert!((f.rate() - p).abs() < 3.0 * sigma, "{} vs {p} ± {sigma}", f.rate());
}

#[test]
fn same_seed_same_trace() {
    let cfg = SimConfig { alpha: 0.3, delta: 10.0, delay: DelayModel::Uniform, ..base(4) };
    let a = run(&cfg).unwrap();
    let b = run(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.trace_hash(), b.trace_hash());
    let c = run(&SimConfig { seed: 5, ..cfg }).unwrap();
    assert_ne!(a.trace_hash(), c.trace_hash());
}

#[test]
fn converged_fraction_is_eta_squared() {
    // beta = 1, lambda * delta = 0.05
    let cfg = SimConfig { delta: 30.0, horizon_blocks: 20_000, ..base(6) };
    let t = run(&cfg).unwrap();
    let s = t.converged(0.2);
    let p = (-4.0 * cfg.lambda * cfg.delta).exp();
    let n = s.honest_blocks as f64;
    let frac = s.converged as f64 / n;
    // Neighbouring indicators share a gap; their covariance at most doubles the variance.
    let sigma = (3.0 * p * (1.0 - p) / n).sqrt();
    assert!((frac - p).abs() < 3.0 * sigma, "{frac} vs {p}");
    assert_eq!(s.violations, 0);
    assert!(s.meets_bound);
}

#[test]
fn converged_blocks_are_unique_at_their_height() {
    for seed in 0..3 {
        let cfg = SimConfig { alpha: 0.3, delta: 10.0, delay: DelayModel::Uniform, ..base(10 + seed) };
        let t = run(&cfg).unwrap();
        let s = t.converged(0.2);
        assert_eq!(s.violations, 0, "seed {seed}: {s:?}");
        assert!(s.converged > 0);
    }
}

#[test]
fn honest_progress_within_two_delays() {
    for (delay, adv) in [(DelayModel::Fixed, AdversaryKind::Selfish), (DelayModel::Uniform, AdversaryKind::Honest)] {
        let cfg = SimConfig { alpha: 0.3, delta: 10.0, delay, adversary: adv, ..base(20) };
        let t = run(&cfg).unwrap();
        let p = t.progress();
        assert!(p.violations.is_empty(), "{delay:?}: {:?}", &p.violations[..p.violations.len().min(5)]);
        assert!(p.checked > 1000);
        assert!(t.conflicts().heights.is_empty());
    }
}

#[test]
fn injected_zero_failures_cap_the_private_lead() {
    let cfg = SimConfig {
        alpha: 0.3,
        adversary: AdversaryKind::Withhold,
        failures: FailureModel::Injected { epsilon: 0.0 },
        ..base(30)
    };
    let t = run(&cfg).unwrap();
    assert_eq!(t.max_private_lead(), 1);
    assert_eq!(t.withholding_violations(), 0);
    assert!(t.adversary().all(|b| b.published_at.is_none()));
}

#[test]
fn injected_failures_allow_longer_runs() {
    let cfg = SimConfig {
        alpha: 0.3,
        adversary: AdversaryKind::Withhold,
        failures: FailureModel::Injected { epsilon: 0.5 },
        ..base(31)
    };
    let t = run(&cfg).unwrap();
    assert!(t.max_private_lead() >= 3);
    assert_eq!(t.withholding_violations(), 0);
    // Each adversary block extends its predecessor exactly when that one failed.
    let injected = t.adversary().filter(|b| b.injected_failure).count() as f64;
    let n = t.adversary().filter(|b| b.committee.is_some()).count() as f64;
    assert!((injected / n - 0.5).abs() < 4.0 * (0.25 / n).sqrt());
}

#[test]
fn nakamoto_withholding_is_unbounded() {
    let cfg = SimConfig { protocol: Protocol::Nakamoto, alpha: 0.3, adversary: AdversaryKind::Withhold, ..base(32) };
    let t = run(&cfg).unwrap();
    assert!(t.max_private_lead() > 10);
}

#[test]
fn full_selfish_crystal_tracks_three_state_model() {
    let cfg = SimConfig { alpha: 0.35, horizon_blocks: 20_000, ..base(40) };
    let t = run(&cfg).unwrap();
    let r = t.adversary_revenue();
    let want = selfish_revenue_crystal(0.35, 0.5);
    assert!((r - want).abs() < 0.02, "{r} vs {want}");
    assert!(r < 0.35);
    assert_eq!(t.max_private_lead(), 1);
}

#[test]
fn rewards_follow_power() {
    let cfg = SimConfig { horizon_blocks: 20_000, rewards: RewardConfig { block_reward: 1, ..Default::default() }, ..base(50) };
    let t = run(&cfg).unwrap();
    let n = (t.final_chain.len() - 1) as f64;
    for &b in &t.balances {
        let share = b as f64 / n;
        let sigma = (0.25 * 0.75 / n).sqrt();
        assert!((share - 0.25).abs() < 3.0 * sigma, "{share}");
    }
}

#[test]
fn reward_total_is_conserved() {
    let cfg = SimConfig { horizon_blocks: 1000, ..base(51) };
    let t = run(&cfg).unwrap();
    let r = cfg.rewards;
    let blocks = (t.final_chain.len() - 1) as u64;
    let votes: u64 = t.final_chain[1..]
        .iter()
        .filter_map(|&id| {
            let child = &t.blocks[id as usize];
            let parent = &t.blocks[child.parent? as usize];
            parent.committee.map(|_| ())
        })
        .count() as u64;
    let paid: u64 = t.balances.iter().sum::<u64>() + t.escrow;
    assert!(paid >= blocks * (r.block_reward + r.tx_fees));
    assert!(votes > 0);
}

#[test]
fn offline_minority_still_progresses() {
    let cfg = SimConfig { offline_fraction: 0.25, ..base(60) };
    let t = run(&cfg).unwrap();
    assert!(t.final_chain.len() > 1900);
    assert!(t.progress().violations.is_empty());
}

#[test]
fn everyone_offline_stalls_after_bootstrap() {
    let cfg = SimConfig { offline_fraction: 1.0, horizon_blocks: 500, ..base(61) };
    let t = run(&cfg).unwrap();
    assert_eq!(t.final_chain.len() as u64, cfg.window as u64 + 2);
    assert!(t.honest().filter(|b| b.height > cfg.window as u64).all(|b| b.certified_at.is_none()));
}

#[test]
fn retargeting_restores_spacing() {
    let cfg = SimConfig {
        retarget: Some(Retarget { interval: 50, spacing: 600 }),
        hashrate_multiplier: 4.0,
        horizon_blocks: 1500,
        ..base(70)
    };
    let t = run(&cfg).unwrap();
    let chain = &t.final_chain;
    let span = |from: usize, to: usize| {
        (t.blocks[chain[to] as usize].mined_at - t.blocks[chain[from] as usize].mined_at) / (to - from) as f64
    };
    assert!(span(1, 50) < 300.0, "{}", span(1, 50));
    let late = span(chain.len() - 500, chain.len() - 1);
    assert!((late - 600.0).abs() < 120.0, "{late}");
}

#[test]
fn jsonl_export_round_trip() {
    let cfg = SimConfig { alpha: 0.2, delta: 5.0, record_events: true, horizon_blocks: 300, ..base(80) };
    let t = run(&cfg).unwrap();
    let mut buf = Vec::new();
    t.write_jsonl(&mut buf).unwrap();
    let lines: Vec<serde_json::Value> =
        String::from_utf8(buf).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines[0]["record"], "header");
    assert_eq!(lines[0]["schema"], TRACE_SCHEMA);
    let cfg_back: SimConfig = serde_json::from_value(lines[0]["config"].clone()).unwrap();
    assert_eq!(cfg_back, cfg);
    let last = lines.last().unwrap();
    assert_eq!(last["record"], "summary");
    assert_eq!(last["trace_hash"], serde_json::to_value(t.trace_hash()).unwrap());
    assert_eq!(lines.iter().filter(|l| l["record"] == "block").count(), t.blocks.len());
    assert!(lines.iter().any(|l| l["event"] == "qc_formed"));
}

#[test]
fn miner_votes_can_certify_after_one_hop() {
    // Four nodes: the miner's shares plus the receiver's often reach a
    // quorum at `Δ`, so fewer blocks fork than the two-hop bound.
    let cfg = SimConfig { delta: 10.0, horizon_blocks: 5000, ..base(2) };
    let t = run(&cfg).unwrap();
    let early = t
        .honest()
        .filter(|b| b.committee.is_some())
        .filter(|b| b.certified_at.is_some_and(|c| c - b.mined_at < 1.5 * cfg.delta))
        .count();
    assert!(early > 0);
    let two_hop = 1.0 - (-2.0 * cfg.lambda * cfg.delta).exp();
    let one_hop = 1.0 - (-cfg.lambda * cfg.delta).exp();
    let r = t.forks(cfg.window as u64 + 1).rate();
    assert!(one_hop * 0.5 < r && r < two_hop, "{r}");
}
