//! The acceptance suite: ten criteria, each at its stated sample size and
//! tolerance, shared by `crystal verify` and the integration tests.
//!
//! The simulator suites behind criteria 5–7 and 10 are expensive, so they
//! are computed once per seed and cached for the life of the process.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{
    committee_failure_prob, committee_size_tail, min_committee_size, offline_failure_prob, ratio, z_value,
    CommitteeModel,
};
use crate::chain::{qc_byte_size, Protocol};
use crate::sim::races::offline_experiment;
use crate::sim::{self, derive_seed, AdversaryKind, FailureModel, SimConfig, SimSummary};

use super::published::published;
use super::tables::CONFIDENCE;
use super::{cmd_fig5, cmd_table2, cmd_table3, Check, ExperimentKind, ExperimentSpec, Format, Table, CODE_VERSION};

pub const CRITERIA: [u8; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Options {
    pub seed: u64,
    /// Overrides the Monte Carlo trial counts of criteria 2, 3, 4 and 8.
    /// `None` runs the stated sizes.
    pub trials: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub id: u8,
    pub title: String,
    pub pass: bool,
    pub checks: Vec<Check>,
    /// Wall-clock seconds; the only field that varies between reruns.
    pub elapsed_secs: f64,
}

impl Criterion {
    fn new(id: u8, title: &str, checks: Vec<Check>, started: Instant) -> Self {
        Criterion {
            id,
            title: title.to_string(),
            pass: checks.iter().all(|c| c.pass),
            checks,
            elapsed_secs: started.elapsed().as_secs_f64(),
        }
    }

    /// The failing checks, or all of them when none failed.
    pub fn summary(&self) -> String {
        let shown: Vec<&Check> = if self.pass { self.checks.iter().collect() } else { self.checks.iter().filter(|c| !c.pass).collect() };
        shown.iter().map(|c| format!("{}: {}", c.name, c.detail)).collect::<Vec<_>>().join("; ")
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} [{:>2}] {} ({:.1} s): {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.elapsed_secs,
            self.summary()
        )
    }
}

/// Every criterion, in order.
pub fn run_all(opts: &Options) -> Vec<Criterion> {
    CRITERIA.iter().map(|&id| run(id, opts)).collect()
}

pub fn run(id: u8, opts: &Options) -> Criterion {
    match id {
        1 => committee_sizing(),
        2 => withholding_table(opts),
        3 => double_spend_table(opts),
        4 => selfish_mining(opts),
        5 => withholding_impossible(opts),
        6 => safety(opts),
        7 => honest_progress(opts),
        8 => offline_voters(opts),
        9 => overhead(),
        10 => determinism(opts),
        _ => panic!("no criterion {id}"),
    }
}

fn elapsed_check(name: &str, started: Instant, limit_secs: f64) -> Check {
    let s = started.elapsed().as_secs_f64();
    Check::new(name, s < limit_secs, format!("{s:.1} s (limit {limit_secs} s)"))
}

fn table_checks(t: &Table, keep: &[&str]) -> Vec<Check> {
    t.checks.iter().filter(|c| keep.is_empty() || keep.contains(&c.name.as_str())).cloned().collect()
}

// ---------------------------------------------------------------- 1

pub fn committee_sizing() -> Criterion {
    let t0 = Instant::now();
    let p = &published().committee;
    let model = CommitteeModel::new(p.window, p.sufficient, p.alpha);
    let eps = committee_failure_prob(&model);
    let sizing = min_committee_size(p.alpha, p.window, p.epsilon);
    let mut checks = vec![Check::new(
        format!("eps(W={}, m={}, alpha={}) <= {:e}", p.window, p.sufficient, p.alpha, p.epsilon),
        eps <= p.epsilon,
        format!("{eps:.4e}"),
    )];
    checks.push(match sizing {
        Ok(s) => Check::new(
            format!("min committee size <= {}", p.deployed),
            s.committee <= p.deployed,
            format!("m_min = {} with eps = {:.4e}", s.committee, s.epsilon),
        ),
        Err(e) => Check::new(format!("min committee size <= {}", p.deployed), false, e.to_string()),
    });
    checks.push(elapsed_check("runtime", t0, 10.0));
    Criterion::new(1, "committee sizing", checks, t0)
}

// ---------------------------------------------------------------- 2

pub fn withholding_table(opts: &Options) -> Criterion {
    let t0 = Instant::now();
    let spec = ExperimentSpec { seed: opts.seed, trials: opts.trials.unwrap_or(0), ..ExperimentSpec::new(ExperimentKind::Table2) };
    let t = cmd_table2(&spec).expect("default spec is valid");
    Criterion::new(2, "withholding probabilities", table_checks(&t, &[]), t0)
}

// ---------------------------------------------------------------- 3

pub fn double_spend_table(opts: &Options) -> Criterion {
    let t0 = Instant::now();
    let mut spec = ExperimentSpec { seed: opts.seed, trials: opts.trials.unwrap_or(0), ..ExperimentSpec::new(ExperimentKind::Table3) };
    spec.grid.delta = vec![0.0];
    let t = cmd_table3(&spec).expect("default spec is valid");
    let mut checks = table_checks(&t, &[]);
    checks.push(elapsed_check("runtime", t0, 30.0 * 60.0));
    Criterion::new(3, "double-spend table", checks, t0)
}

// ---------------------------------------------------------------- 4

pub fn selfish_mining(opts: &Options) -> Criterion {
    let t0 = Instant::now();
    let mut spec = ExperimentSpec { seed: opts.seed, trials: opts.trials.unwrap_or(0), ..ExperimentSpec::new(ExperimentKind::Fig5) };
    spec.grid.alpha = vec![0.1, 0.2, 0.3, 0.4, 0.45];
    spec.grid.gamma_tie = vec![0.5];
    spec.grid.delta = vec![0.0];
    let t = cmd_fig5(&spec).expect("default spec is valid");
    let mut checks = table_checks(
        &t,
        &[
            "crystal revenue within 0.005 of closed form",
            "crystal revenue never exceeds alpha",
            "nakamoto selfish revenue at published point",
        ],
    );
    checks.push(elapsed_check("runtime", t0, 10.0 * 60.0));
    Criterion::new(4, "selfish mining revenue", checks, t0)
}

// ------------------------------------------------------------ sim suites

/// One full-simulator run of an acceptance suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: SimConfig,
    pub summary: SimSummary,
}

pub const WITHHOLD_RUNS: u64 = 100;
pub const WITHHOLD_BLOCKS: u64 = 10_000;
pub const SAFETY_ALPHAS: [f64; 4] = [0.1, 0.2, 0.3, 0.35];
pub const SAFETY_DELTAS: [f64; 2] = [0.0, 10.0];
pub const SAFETY_RUNS: u64 = 200;
pub const SAFETY_BLOCKS: u64 = 5_000;

/// Configuration of run `i` of the withholding suite.
pub fn withhold_config(seed: u64, i: u64) -> SimConfig {
    SimConfig {
        protocol: Protocol::Crystal,
        alpha: 0.35,
        delta: 10.0,
        adversary: AdversaryKind::Withhold,
        failures: FailureModel::Injected { epsilon: 0.0 },
        horizon_blocks: WITHHOLD_BLOCKS,
        seed: derive_seed(seed, b"acceptance/withhold", i),
        ..SimConfig::default()
    }
}

/// Configuration of run `i` of the safety suite: the `α × Δ` grid cycles
/// fastest, so every prefix of the suite spans the grid.
pub fn safety_config(seed: u64, i: u64) -> SimConfig {
    let cells = SAFETY_ALPHAS.len() * SAFETY_DELTAS.len();
    let c = i as usize % cells;
    SimConfig {
        protocol: Protocol::Crystal,
        alpha: SAFETY_ALPHAS[c / SAFETY_DELTAS.len()],
        delta: SAFETY_DELTAS[c % SAFETY_DELTAS.len()],
        lambda: 1.0 / 600.0,
        confirmations: 6,
        adversary: AdversaryKind::Selfish,
        horizon_blocks: SAFETY_BLOCKS,
        seed: derive_seed(seed, b"acceptance/safety", i),
        ..SimConfig::default()
    }
}

fn run_suite(configs: Vec<SimConfig>) -> Vec<RunRecord> {
    configs
        .into_par_iter()
        .map(|config| {
            let summary = sim::run(&config).expect("suite configs are valid").summary();
            RunRecord { config, summary }
        })
        .collect()
}

type Cache = Mutex<BTreeMap<(&'static str, u64), Arc<Vec<RunRecord>>>>;

fn cached(name: &'static str, seed: u64, build: impl FnOnce() -> Vec<RunRecord>) -> Arc<Vec<RunRecord>> {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    // Holding the lock while building keeps concurrent callers from
    // duplicating a ten-minute suite.
    let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
    map.entry((name, seed)).or_insert_with(|| Arc::new(build())).clone()
}

pub fn withhold_suite(seed: u64) -> Arc<Vec<RunRecord>> {
    cached("withhold", seed, || run_suite((0..WITHHOLD_RUNS).map(|i| withhold_config(seed, i)).collect()))
}

pub fn safety_suite(seed: u64) -> Arc<Vec<RunRecord>> {
    cached("safety", seed, || run_suite((0..SAFETY_RUNS).map(|i| safety_config(seed, i)).collect()))
}

// ---------------------------------------------------------------- 5

pub fn withholding_impossible(opts: &Options) -> Criterion {
    let t0 = Instant::now();
    let runs = withhold_suite(opts.seed);
    let leads: BTreeMap<u32, usize> = runs.iter().fold(BTreeMap::new(), |mut m, r| {
        *m.entry(r.summary.max_private_lead).or_default() += 1;
        m
    });
    let bad: Vec<String> = runs
        .iter()
        .enumerate()
        .filter(|(_, r)| r.summary.max_private_lead != 1)
        .map(|(i, r)| format!("run {i} lead {}", r.summary.max_private_lead))
        .collect();
    let checks = vec![
        Check::new(
            format!("max private lead is 1 in all {} runs of {} blocks", runs.len(), WITHHOLD_BLOCKS),
            bad.is_empty(),
            if bad.is_empty() { format!("leads {leads:?}") } else { bad.join(", ") },
        ),
        Check::new(
            "withheld runs need a committee failure",
            runs.iter().all(|r| r.summary.withholding_violations == 0),
            format!("{} violations", runs.iter().map(|r| r.summary.withholding_violations).sum::<u64>()),
        ),
    ];
    Criterion::new(5, "withholding impossibility", checks, t0)
}

// ---------------------------------------------------------------- 6

pub fn safety(opts: &Options) -> Criterion {
    let t0 = Instant::now();
    let runs = safety_suite(opts.seed);
    let conflicting: Vec<String> = runs
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.summary.conflicts.heights.is_empty() || r.summary.conflicts.reverts > 0)
        .map(|(i, r)| {
            // Below the first full window blocks carry no committee and the
            // chain is plain longest-chain.
            let w = r.config.window as u64;
            let hs: Vec<String> = r
                .summary
                .conflicts
                .heights
                .iter()
                .map(|&h| if h <= w { format!("{h} (bootstrap, W={w})") } else { h.to_string() })
                .collect();
            format!(
                "run {i} (alpha={}, delta={}): heights [{}], {} reverted commits",
                r.config.alpha,
                r.config.delta,
                hs.join(", "),
                r.summary.conflicts.reverts
            )
        })
        .collect();
    let meets = runs.iter().filter(|r| r.summary.converged.meets_bound).count();
    let share = meets as f64 / runs.len() as f64;
    let unique = runs.iter().map(|r| r.summary.converged.violations).sum::<u64>();
    let checks = vec![
        Check::new(
            format!("no conflicting 6-deep commits over {} runs", runs.len()),
            conflicting.is_empty(),
            if conflicting.is_empty() { "0 conflicts".to_string() } else { conflicting.join(", ") },
        ),
        Check::new(
            "converged count >= 0.8 eta^2 beta lambda t in >= 95% of runs",
            share >= 0.95,
            format!("{meets}/{} runs", runs.len()),
        ),
        Check::new("converged blocks unique at their height", unique == 0, format!("{unique} collisions")),
    ];
    Criterion::new(6, "safety", checks, t0)
}

// ---------------------------------------------------------------- 7

pub fn honest_progress(opts: &Options) -> Criterion {
    let t0 = Instant::now();
    let w = withhold_suite(opts.seed);
    let s = safety_suite(opts.seed);
    let all: Vec<&RunRecord> = w.iter().chain(s.iter()).collect();
    let checked: u64 = all.iter().map(|r| r.summary.progress.checked).sum();
    let excluded: u64 = all.iter().map(|r| r.summary.progress.excluded).sum();
    let violations: usize = all.iter().map(|r| r.summary.progress.violations.len()).sum();
    let checks = vec![Check::new(
        format!("every honest node above each honest block within 2 delta, {} traces", all.len()),
        violations == 0,
        format!("{violations} violations over {checked} blocks ({excluded} with uncertifiable committees excluded)"),
    )];
    Criterion::new(7, "honest progress", checks, t0)
}

// ---------------------------------------------------------------- 8

pub fn offline_voters(opts: &Options) -> Criterion {
    let t0 = Instant::now();
    let p = published();
    let model = CommitteeModel::new(p.committee.window, p.committee.deployed, p.committee.alpha);
    let gamma = p.offline.gamma_off;
    let exact = offline_failure_prob(&model, gamma);
    let trials = opts.trials.unwrap_or(1_000_000);
    let mc = offline_experiment(&model, gamma, trials, derive_seed(opts.seed, b"acceptance/offline", 0));
    let (lo, hi) = mc.interval(z_value(CONFIDENCE));
    let checks = vec![
        Check::new(
            format!("failure probability at gamma_off = {gamma} below {:e}", p.offline.bound),
            exact < p.offline.bound,
            format!("{exact:.4e}"),
        ),
        Check::new(
            "Monte Carlo interval covers it",
            lo <= exact && exact <= hi,
            format!("{}/{} = {:.4e}, CI [{lo:.4e}, {hi:.4e}]", mc.hits, mc.trials, mc.rate()),
        ),
    ];
    Criterion::new(8, "offline voters", checks, t0)
}

// ---------------------------------------------------------------- 9

pub fn overhead() -> Criterion {
    let t0 = Instant::now();
    let o = &published().overhead;
    let w = published().committee.window;
    let m = published().committee.deployed;
    let bitmap = w.div_ceil(8) as usize;
    let size = qc_byte_size(o.votes, w);
    let tail_size = qc_byte_size(o.tail_threshold as usize, w);
    let tail = committee_size_tail(w, &ratio(m as u64, w as u64), o.tail_threshold);
    let rel = (tail - o.tail_prob).abs() / o.tail_prob;
    let checks = vec![
        Check::new(
            format!("certificate of {} votes", o.votes),
            size == o.qc_bytes + bitmap,
            format!("{size} bytes = {} + {bitmap} bitmap", size - bitmap),
        ),
        Check::new(
            format!("certificate of {} votes", o.tail_threshold),
            tail_size == o.tail_qc_bytes + bitmap,
            format!("{tail_size} bytes"),
        ),
        Check::new(
            format!("Pr[committee >= {}] within 5% of {:e}", o.tail_threshold, o.tail_prob),
            rel <= 0.05,
            format!("{tail:.4e}"),
        ),
    ];
    Criterion::new(9, "certificate overhead", checks, t0)
}

// ---------------------------------------------------------------- 10

pub fn determinism(opts: &Options) -> Criterion {
    let t0 = Instant::now();
    let mut checks = Vec::new();
    // Simulator suites: rerun a spread of runs and compare summary bytes.
    for (name, suite, config) in [
        ("withhold", withhold_suite(opts.seed), withhold_config as fn(u64, u64) -> SimConfig),
        ("safety", safety_suite(opts.seed), safety_config),
    ] {
        let picks = [0, suite.len() / 2, suite.len() - 1];
        let same = picks.iter().all(|&i| {
            let cfg = config(opts.seed, i as u64);
            let again = sim::run(&cfg).unwrap().summary();
            serde_json::to_vec(&again).unwrap() == serde_json::to_vec(&suite[i].summary).unwrap()
        });
        checks.push(Check::new(format!("{name} suite summaries"), same, format!("runs {picks:?} rerun")));
    }
    // Table artifacts: generate twice, compare bytes.
    let trials = opts.trials.unwrap_or(100_000).min(100_000);
    let mut t3 = ExperimentSpec { seed: opts.seed, trials, ..ExperimentSpec::new(ExperimentKind::Table3) };
    t3.grid.delta = vec![0.0, 10.0];
    let t2 = ExperimentSpec { seed: opts.seed, trials, ..ExperimentSpec::new(ExperimentKind::Table2) };
    let mut f5 = ExperimentSpec { seed: opts.seed, trials, ..ExperimentSpec::new(ExperimentKind::Fig5) };
    f5.grid.delta = vec![0.0];
    for spec in [t2, t3, f5] {
        let a = super::run_spec(&spec).unwrap();
        let b = super::run_spec(&spec).unwrap();
        let same = [Format::Csv, Format::Json].iter().all(|&f| a.to_string(f) == b.to_string(f));
        checks.push(Check::new(format!("{} artifacts", spec.kind), same, format!("{} rows", a.rows.len())));
    }
    Criterion::new(10, "determinism", checks, t0)
}

// ---------------------------------------------------------------- report

/// Machine-readable verify output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: String,
    pub options: Options,
    pub criteria: Vec<Criterion>,
}

impl Report {
    pub fn new(options: Options, criteria: Vec<Criterion>) -> Self {
        Report { version: CODE_VERSION.to_string(), options, criteria }
    }

    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.pass)
    }

    pub fn write<W: Write>(&self, format: Format, mut w: W) -> io::Result<()> {
        match format {
            Format::Json => {
                serde_json::to_writer_pretty(&mut w, self)?;
                writeln!(w)
            }
            Format::Csv => {
                writeln!(w, "# version: {}", self.version)?;
                writeln!(w, "# options: {}", serde_json::to_string(&self.options)?)?;
                let mut csv = csv::Writer::from_writer(w);
                csv.write_record(["criterion", "title", "check", "pass", "detail"])?;
                for c in &self.criteria {
                    for k in &c.checks {
                        let id = c.id.to_string();
                        csv.write_record([id.as_str(), &c.title, &k.name, if k.pass { "true" } else { "false" }, &k.detail])?;
                    }
                }
                csv.flush()
            }
        }
    }
}
