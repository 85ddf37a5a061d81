//! Fast Monte Carlo models of the attacks, one random variate per block.
//!
//! These abstract the network away and track only who mines next, which is
//! all the attack analyses depend on. They are what the large-sample
//! experiments run; the full simulator cross-checks them at smaller scale.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Exp, Geometric};
use serde::{Deserialize, Serialize};

use crate::analytics::{wilson_interval, CommitteeModel, MeanAccumulator};
use crate::chain::Protocol;

/// Hits out of trials.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BernoulliOutcome {
    pub hits: u64,
    pub trials: u64,
}

impl BernoulliOutcome {
    pub fn rate(&self) -> f64 {
        self.hits as f64 / self.trials.max(1) as f64
    }

    pub fn interval(&self, z: f64) -> (f64, f64) {
        wilson_interval(self.hits, self.trials, z)
    }
}

// ---------------------------------------------------------------- selfish

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfishSpec {
    pub protocol: Protocol,
    pub alpha: f64,
    /// Share of honest power mining on the adversary's block during a tie.
    pub gamma: f64,
    /// Mining events to simulate.
    pub blocks: u64,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfishOutcome {
    pub adversary_blocks: u64,
    pub honest_blocks: u64,
    /// Adversary share of main-chain blocks.
    pub revenue: f64,
    /// Batch-means standard error of `revenue`.
    pub std_err: f64,
}

const BATCHES: u64 = 100;

/// Selfish mining against a tie-splitting honest majority, `Δ = 0`.
///
/// Certificates: the adversary withholds one block, cannot extend it
/// (its mining is wasted meanwhile) and publishes it as soon as an honest
/// block appears, creating a tie. Longest chain: the classic strategy with
/// unbounded private lead.
pub fn selfish_mining_experiment(spec: &SelfishSpec) -> SelfishOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let per_batch = (spec.blocks / BATCHES).max(1);
    let mut batch = MeanAccumulator::default();
    let (mut adv, mut hon) = (0u64, 0u64);
    let mut lead = 0u64;
    let mut tie = false;
    let mut step = 0;
    while step < spec.blocks {
        let (a0, h0) = (adv, hon);
        for _ in 0..per_batch.min(spec.blocks - step) {
            step += 1;
            let attacker = rng.random::<f64>() < spec.alpha;
            match spec.protocol {
                Protocol::Crystal => crystal_step(attacker, &mut lead, &mut tie, &mut adv, &mut hon, spec.gamma, &mut rng),
                Protocol::Nakamoto => nc_step(attacker, &mut lead, &mut tie, &mut adv, &mut hon, spec.gamma, &mut rng),
            }
        }
        let (da, dh) = (adv - a0, hon - h0);
        if da + dh > 0 {
            batch.push(da as f64 / (da + dh) as f64);
        }
    }
    let revenue = if adv + hon == 0 { 0.0 } else { adv as f64 / (adv + hon) as f64 };
    SelfishOutcome { adversary_blocks: adv, honest_blocks: hon, revenue, std_err: batch.std_err() }
}

/// States: `lead = 0, !tie` (S0), `lead = 1` (S1), `tie` (S0').
fn crystal_step(a: bool, lead: &mut u64, tie: &mut bool, adv: &mut u64, hon: &mut u64, gamma: f64, rng: &mut ChaCha8Rng) {
    if *tie {
        if a {
            *adv += 2;
        } else if rng.random::<f64>() < gamma {
            *adv += 1;
            *hon += 1;
        } else {
            *hon += 2;
        }
        *tie = false;
    } else if *lead == 1 {
        // The withheld block has no certificate; mining on it is impossible.
        if !a {
            *lead = 0;
            *tie = true;
        }
    } else if a {
        *lead = 1;
    } else {
        *hon += 1;
    }
}

fn nc_step(a: bool, lead: &mut u64, tie: &mut bool, adv: &mut u64, hon: &mut u64, gamma: f64, rng: &mut ChaCha8Rng) {
    if *tie {
        if a {
            *adv += 2;
        } else if rng.random::<f64>() < gamma {
            *adv += 1;
            *hon += 1;
        } else {
            *hon += 2;
        }
        *tie = false;
        return;
    }
    if a {
        *lead += 1;
        return;
    }
    match *lead {
        0 => *hon += 1,
        1 => {
            *lead = 0;
            *tie = true;
        }
        2 => {
            *adv += 2;
            *lead = 0;
        }
        _ => {
            *adv += 1;
            *lead -= 1;
        }
    }
}

// ----------------------------------------------------------- double spend

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Plain success frequency.
    Naive,
    /// Race phase run with the two rates swapped, reweighted by the
    /// likelihood ratio `(α/β)^(N_a - N_h)`.
    Importance,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoubleSpendSpec {
    pub protocol: Protocol,
    pub alpha: f64,
    /// Confirmations the merchant waits for.
    pub k: u32,
    /// Network delay in seconds; zero runs the discrete walk.
    pub delta: f64,
    /// Total mining rate, only used when `delta > 0`.
    pub lambda: f64,
    pub trials: u64,
    pub sampling: Sampling,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoubleSpendOutcome {
    pub estimate: f64,
    pub std_err: f64,
    pub trials: u64,
    /// Trials with nonzero weight.
    pub successes: u64,
    /// Trials given up at the deficit cap.
    pub abandoned: u64,
    pub max_deficit: u64,
    pub sampling: Sampling,
}

/// Deficit at which the attacker gives up: `100 k`.
pub fn max_deficit(k: u32) -> u64 {
    100 * k as u64
}

/// Pre-mine one block, wait for `k` honest confirmations while mining
/// privately, then race until strictly ahead or `100 k` behind.
///
/// Certificates cap the private chain at the pre-mined block, so the
/// attacker's phase-one blocks are lost. With `Δ > 0`, an honest block mined
/// within `Δ` (longest chain) or `2Δ` (certificates, votes need another hop)
/// of the first honest block at its height forks off and is wasted.
pub fn double_spend_experiment(spec: &DoubleSpendSpec) -> DoubleSpendOutcome {
    assert!(spec.k >= 1 && (0.0..0.5).contains(&spec.alpha));
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let cap = max_deficit(spec.k);
    let mut acc = MeanAccumulator::default();
    let (mut successes, mut abandoned) = (0, 0);
    for _ in 0..spec.trials {
        let w = if spec.alpha == 0.0 {
            Some(0.0)
        } else if spec.delta == 0.0 {
            trial_discrete(spec, cap, &mut rng)
        } else {
            trial_timed(spec, cap, &mut rng)
        };
        match w {
            Some(x) => {
                successes += (x > 0.0) as u64;
                acc.push(x);
            }
            None => {
                abandoned += 1;
                acc.push(0.0);
            }
        }
    }
    DoubleSpendOutcome {
        estimate: acc.mean(),
        std_err: acc.std_err(),
        trials: spec.trials,
        successes,
        abandoned,
        max_deficit: cap,
        sampling: spec.sampling,
    }
}

/// Attacker blocks in phase one, already capped by the protocol, and the
/// likelihood ratio of the draw.
///
/// Importance sampling draws longest-chain phase one at even odds: the
/// success probability is dominated by paths on which the attacker keeps
/// pace with the honest chain, which plain rates almost never produce.
fn phase_one_discrete(spec: &DoubleSpendSpec, rng: &mut ChaCha8Rng) -> (u64, f64) {
    match spec.protocol {
        Protocol::Crystal => (0, 1.0),
        Protocol::Nakamoto => {
            let (a, b) = (spec.alpha, 1.0 - spec.alpha);
            let q = match spec.sampling {
                Sampling::Naive => a,
                Sampling::Importance => PHASE_ONE_TILT,
            };
            let g = Geometric::new(1.0 - q).unwrap();
            let j: u64 = (0..spec.k).map(|_| g.sample(rng)).sum();
            let w = match spec.sampling {
                Sampling::Naive => 1.0,
                Sampling::Importance => ((a / q).ln() * j as f64 + (b / (1.0 - q)).ln() * spec.k as f64).exp(),
            };
            (j, w)
        }
    }
}

/// Attacker share under which importance sampling draws phase one.
const PHASE_ONE_TILT: f64 = 0.5;

/// Weight of one trial; `None` when abandoned.
fn trial_discrete(spec: &DoubleSpendSpec, cap: u64, rng: &mut ChaCha8Rng) -> Option<f64> {
    let (j, w1) = phase_one_discrete(spec, rng);
    // Net blocks still to gain to get strictly ahead, counting the pre-mine.
    let need = spec.k as i64 - j as i64;
    if need <= 0 {
        return Some(w1);
    }
    let mut d = need as u64;
    let (a, b) = (spec.alpha, 1.0 - spec.alpha);
    match spec.sampling {
        Sampling::Naive => {
            while d > 0 {
                if d > cap {
                    return None;
                }
                if d == 1 {
                    if rng.random::<f64>() < a {
                        d -= 1;
                    } else {
                        d += 1;
                    }
                } else {
                    // d - 1 steps cannot reach zero; take them at once.
                    let n = d - 1;
                    let ups = Binomial::new(n, a).unwrap().sample(rng);
                    d = d + n - 2 * ups;
                }
            }
            Some(1.0)
        }
        Sampling::Importance => {
            let mut net = 0i64;
            while d > 0 {
                if d > cap {
                    return None;
                }
                if rng.random::<f64>() < b {
                    d -= 1;
                    net += 1;
                } else {
                    d += 1;
                    net -= 1;
                }
            }
            Some(w1 * (a / b).powi(net as i32))
        }
    }
}

/// Continuous-time race with forking honest blocks.
fn trial_timed(spec: &DoubleSpendSpec, cap: u64, rng: &mut ChaCha8Rng) -> Option<f64> {
    let (a, b) = (spec.alpha, 1.0 - spec.alpha);
    let gap = Exp::new(spec.lambda).unwrap();
    let window = match spec.protocol {
        Protocol::Nakamoto => spec.delta,
        Protocol::Crystal => 2.0 * spec.delta,
    };
    let mut t = 0.0;
    let mut last_honest = f64::NEG_INFINITY;
    let mut honest = 0u64;
    let mut attacker = 1u64;
    let mut weight = 1.0;
    let ratio = a / b;
    // Phase one: plain rates.
    while honest < spec.k as u64 {
        t += gap.sample(rng);
        if rng.random::<f64>() < a {
            if spec.protocol == Protocol::Nakamoto {
                attacker += 1;
            }
        } else if t - last_honest >= window {
            honest += 1;
            last_honest = t;
        }
    }
    let swap = spec.sampling == Sampling::Importance;
    let p_att = if swap { b } else { a };
    loop {
        if attacker > honest {
            return Some(weight);
        }
        if honest - attacker > cap {
            return None;
        }
        t += gap.sample(rng);
        if rng.random::<f64>() < p_att {
            attacker += 1;
            if swap {
                weight *= ratio;
            }
        } else {
            if swap {
                weight /= ratio;
            }
            if t - last_honest >= window {
                honest += 1;
                last_honest = t;
            }
        }
    }
}

// ------------------------------------------------------------- withholding

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WithholdOutcome {
    /// Number of attacks that withheld exactly `l` blocks in a row.
    pub runs: BTreeMap<u32, u64>,
    pub attacks: u64,
}

impl WithholdOutcome {
    pub fn exactly(&self, l: u32) -> BernoulliOutcome {
        BernoulliOutcome { hits: self.runs.get(&l).copied().unwrap_or(0), trials: self.attacks }
    }

    pub fn at_least(&self, l: u32) -> BernoulliOutcome {
        BernoulliOutcome { hits: self.runs.range(l..).map(|(_, c)| c).sum(), trials: self.attacks }
    }

    pub fn mean(&self) -> f64 {
        let s: f64 = self.runs.iter().map(|(&l, &c)| l as f64 * c as f64).sum();
        s / self.attacks.max(1) as f64
    }
}

/// Each attack withholds a first block and keeps extending while the block
/// just mined had a failed committee (probability `eps` each, independent).
pub fn withholding_experiment(eps: f64, attacks: u64, seed: u64) -> WithholdOutcome {
    assert!((0.0..1.0).contains(&eps));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = WithholdOutcome { attacks, ..Default::default() };
    for _ in 0..attacks {
        let mut l = 1;
        while rng.random::<f64>() < eps {
            l += 1;
        }
        *out.runs.entry(l).or_default() += 1;
    }
    out
}

// ------------------------------------------------------------- committees

/// Honest blocks whose online honest shares fall to `⌊m/2⌋` or below.
/// Adversarial members abstain; each elected honest member is offline with
/// probability `gamma_off`.
pub fn offline_experiment(model: &CommitteeModel, gamma_off: f64, trials: u64, seed: u64) -> BernoulliOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = (1.0 - model.alpha) * model.committee as f64 / model.window as f64;
    let elected = Binomial::new(model.window as u64, q).unwrap();
    let mut hits = 0;
    for _ in 0..trials {
        let y = elected.sample(&mut rng);
        let online = Binomial::new(y, 1.0 - gamma_off).unwrap().sample(&mut rng);
        hits += (2 * online <= model.committee as u64) as u64;
    }
    BernoulliOutcome { hits, trials }
}

/// Committees sampled slot by slot as the failure probability counts them:
/// adversary shares at least `⌈m/2⌉` or honest shares at most `⌊m/2⌋`.
pub fn committee_failure_experiment(model: &CommitteeModel, trials: u64, seed: u64) -> BernoulliOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = model.committee as f64 / model.window as f64;
    let (pa, ph) = (model.alpha * p, (1.0 - model.alpha) * p);
    let adv = Binomial::new(model.window as u64, pa).unwrap();
    let m = model.committee as u64;
    let mut hits = 0;
    for _ in 0..trials {
        let a = adv.sample(&mut rng);
        let h = Binomial::new(model.window as u64 - a, (ph / (1.0 - pa)).min(1.0)).unwrap().sample(&mut rng);
        hits += (a >= m.div_ceil(2) || h <= m / 2) as u64;
    }
    BernoulliOutcome { hits, trials }
}
