//! Table and figure generators.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::analytics::{
    bonferroni_z, committee_failure_prob, decimal, double_spend_prob_crystal, double_spend_prob_nc,
    double_spend_prob_nc_exact, expected_failure_time, min_committee_size, offline_failure_prob,
    offline_failure_prob_thinned, round_sig, selfish_revenue_crystal, selfish_revenue_nc, withhold_prob,
    CommitteeModel, DoubleSpendConvention, WithholdConvention,
};
use crate::chain::Protocol;
use crate::sim::races::{
    double_spend_experiment, max_deficit, offline_experiment, selfish_mining_experiment, withholding_experiment,
    DoubleSpendSpec, Sampling, SelfishSpec,
};
use crate::sim::{self, derive_seed, AdversaryKind, SimConfig};

use super::published::{published, unit_secs};
use super::{num, Check, ExperimentKind, ExperimentSpec, SpecError, Table};

/// Confidence level of every Monte Carlo interval; families of cells are
/// Bonferroni-corrected to hold simultaneously at this level.
pub const CONFIDENCE: f64 = 0.95;

/// Cells whose analytic value falls below this are estimated by importance
/// sampling with a tenth of the trials.
pub const NAIVE_FLOOR: f64 = 1e-3;

/// Runs any spec, dispatching on its kind.
pub fn run_spec(spec: &ExperimentSpec) -> Result<Table, SpecError> {
    match spec.kind {
        ExperimentKind::Params => cmd_params(spec),
        ExperimentKind::Table2 => cmd_table2(spec),
        ExperimentKind::Table3 => cmd_table3(spec),
        ExperimentKind::Fig5 => cmd_fig5(spec),
        ExperimentKind::Fig6 => cmd_fig6(spec),
        ExperimentKind::Simulate => cmd_simulate(spec),
    }
}

fn resolve(spec: &ExperimentSpec, kind: ExperimentKind) -> Result<ExperimentSpec, SpecError> {
    assert_eq!(spec.kind, kind, "spec kind does not match the generator");
    spec.resolved()
}

/// Summarises a family of per-cell outcomes as one check.
fn family(name: &str, outcomes: &[(String, bool)]) -> Check {
    let failed: Vec<&str> = outcomes.iter().filter(|(_, ok)| !ok).map(|(c, _)| c.as_str()).collect();
    let detail = if failed.is_empty() {
        format!("{}/{} cells", outcomes.len(), outcomes.len())
    } else {
        format!("{}/{} cells; failing: {}", outcomes.len() - failed.len(), outcomes.len(), failed.join(", "))
    };
    Check::new(name, failed.is_empty(), detail)
}

/// Whether `[lo, hi]` contains `x`, allowing for rounding in degenerate intervals.
fn covers(lo: f64, hi: f64, x: f64) -> bool {
    let slack = 1e-9 * x.abs();
    lo - slack <= x && x <= hi + slack
}

// ------------------------------------------------------------------ params

/// Smallest committee meeting each failure target, over `α × W × ε`.
pub fn cmd_params(spec: &ExperimentSpec) -> Result<Table, SpecError> {
    let spec = resolve(spec, ExperimentKind::Params)?;
    let g = &spec.grid;
    let cells: Vec<(u32, f64, f64)> = g
        .window
        .iter()
        .flat_map(|&w| g.epsilon.iter().flat_map(move |&e| g.alpha.iter().map(move |&a| (w, e, a))))
        .collect();
    let results: Vec<_> = cells.par_iter().map(|&(w, e, a)| min_committee_size(a, w, e)).collect();

    let mut t = Table::new(
        "params",
        &spec,
        &["alpha", "window", "epsilon_max", "m_min", "epsilon_achieved", "feasible"],
    );
    t.notes.push("epsilon is the union bound over adversary and honest share counts, computed exactly".into());
    t.notes.push("the bound is not monotone in m (odd m gain an honest share threshold); m_min is a full scan".into());
    let mut monotone = Vec::new();
    let mut definition = Vec::new();
    let mut last: Option<(u32, f64, u32)> = None;
    for (&(w, e, a), r) in cells.iter().zip(&results) {
        match r {
            Ok(s) => {
                t.push(vec![num(a), json!(w), num(e), json!(s.committee), num(s.epsilon), json!(true)]);
                let cell = format!("W={w} eps={e:e} alpha={a}");
                if let Some((lw, le, lm)) = last {
                    if lw == w && le == e {
                        monotone.push((cell.clone(), s.committee >= lm));
                    }
                }
                last = Some((w, e, s.committee));
                let below = s.committee == 1 || committee_failure_prob(&CommitteeModel::new(w, s.committee - 1, a)) > e;
                definition.push((cell, s.epsilon <= e && below));
            }
            Err(err) => {
                t.push(vec![num(a), json!(w), num(e), Value::Null, Value::Null, json!(false)]);
                t.notes.push(format!("infeasible: {err}"));
                last = None;
            }
        }
    }
    let p = published();
    if let Some(i) = cells.iter().position(|&(w, e, a)| w == p.committee.window && e == p.committee.epsilon && a == p.committee.alpha) {
        let model = CommitteeModel::new(p.committee.window, p.committee.sufficient, p.committee.alpha);
        let eps = committee_failure_prob(&model);
        let m_min = results[i].as_ref().map(|s| s.committee).ok();
        t.notes.push(format!(
            "W={} alpha={}: m={} gives epsilon={eps:.4e}; smallest size meeting {:e} is {}",
            p.committee.window,
            p.committee.alpha,
            p.committee.sufficient,
            p.committee.epsilon,
            m_min.map_or("none".to_string(), |m| m.to_string()),
        ));
    }
    t.checks.push(family("m_min nondecreasing in alpha", &monotone));
    t.checks.push(family("eps(m_min - 1) > target >= eps(m_min)", &definition));
    Ok(t)
}

// ------------------------------------------------------------------ table 2

/// Withholding run probabilities and mean times between successes.
pub fn cmd_table2(spec: &ExperimentSpec) -> Result<Table, SpecError> {
    let spec = resolve(spec, ExperimentKind::Table2)?;
    let g = &spec.grid;
    let p = published();
    let interval = p.block_interval_secs;
    let cells: Vec<(f64, u32)> = g.epsilon.iter().flat_map(|&e| g.l.iter().map(move |&l| (e, l))).collect();
    // One experiment per epsilon serves every run length.
    let eps_list: Vec<f64> = g.epsilon.clone();
    let runs: Vec<_> = eps_list
        .par_iter()
        .enumerate()
        .map(|(i, &e)| withholding_experiment(e, spec.trials, derive_seed(spec.seed, b"table2", i as u64)))
        .collect();
    let z = bonferroni_z(CONFIDENCE, cells.len());

    let mut t = Table::new(
        "table2",
        &spec,
        &[
            "epsilon",
            "l",
            "p_at_least",
            "p_exactly",
            "p_text",
            "tf_secs",
            "tf",
            "unit",
            "published_p",
            "published_tf",
            "p_exact",
            "tf_rel_err",
            "mc_hits",
            "mc_trials",
            "mc_rate",
            "ci_lo",
            "ci_hi",
            "covers",
        ],
    );
    t.notes.push("p_at_least = eps^(l-1): an attack reaches l withheld blocks when l-1 committees in a row fail".into());
    t.notes.push("p_exactly = eps^(l-1)(1-eps); p_text = eps^l(1-eps)".into());
    t.notes.push(format!("tf = block interval / p_at_least at {interval} s per block; y = 365 days"));
    t.notes.push(format!("intervals: Wilson, Bonferroni over {} cells at {CONFIDENCE}", cells.len()));

    let mut exact = Vec::new();
    let mut tf_ok = Vec::new();
    let mut cover = Vec::new();
    for &(e, l) in &cells {
        let pa = withhold_prob(e, l, WithholdConvention::AtLeast);
        let tf_secs = expected_failure_time(pa, interval);
        let pubc = p.table2_cell(e, l);
        let unit = pubc.map_or_else(|| auto_unit(tf_secs), |c| c.unit.clone());
        let tf = tf_secs / unit_secs(&unit).unwrap();
        let mc = runs[g.epsilon.iter().position(|&x| x == e).unwrap()].at_least(l);
        let (lo, hi) = mc.interval(z);
        let cell = format!("eps={e:e} l={l}");
        let ok = covers(lo, hi, pa);
        cover.push((cell.clone(), ok));
        let (p_exact, tf_rel) = match pubc {
            Some(c) => {
                let exact_p = num_traits::pow(decimal(e), l as usize - 1);
                let hit = exact_p == decimal(c.p);
                let rel = (tf - c.tf).abs() / c.tf;
                exact.push((cell.clone(), hit));
                tf_ok.push((format!("{cell} ({tf:.2}{unit} vs {}{unit})", c.tf), rel <= 0.01));
                (json!(hit), num(rel))
            }
            None => (Value::Null, Value::Null),
        };
        t.push(vec![
            num(e),
            json!(l),
            num(pa),
            num(withhold_prob(e, l, WithholdConvention::Table)),
            num(withhold_prob(e, l, WithholdConvention::Text)),
            num(tf_secs),
            num(tf),
            json!(unit),
            pubc.map_or(Value::Null, |c| num(c.p)),
            pubc.map_or(Value::Null, |c| num(c.tf)),
            p_exact,
            tf_rel,
            json!(mc.hits),
            json!(mc.trials),
            num(mc.rate()),
            num(lo),
            num(hi),
            json!(ok),
        ]);
    }
    if !exact.is_empty() {
        t.checks.push(family("P matches published exactly", &exact));
        t.checks.push(family("T_f within 1% of published", &tf_ok));
    }
    t.checks.push(family("Monte Carlo interval covers P", &cover));
    Ok(t)
}

fn auto_unit(secs: f64) -> String {
    ["y", "w", "d", "h"]
        .into_iter()
        .find(|u| secs >= unit_secs(u).unwrap())
        .unwrap_or("s")
        .to_string()
}

// ------------------------------------------------------------------ table 3

struct DsCell {
    protocol: Protocol,
    delta: f64,
    alpha: f64,
    k: u32,
}

/// Double-spend success probabilities, closed form against Monte Carlo.
pub fn cmd_table3(spec: &ExperimentSpec) -> Result<Table, SpecError> {
    let spec = resolve(spec, ExperimentKind::Table3)?;
    let g = &spec.grid;
    let p = published();
    let mut cells = Vec::new();
    for &delta in &g.delta {
        for protocol in [Protocol::Nakamoto, Protocol::Crystal] {
            for &alpha in &g.alpha {
                for &k in &g.k {
                    cells.push(DsCell { protocol, delta, alpha, k });
                }
            }
        }
    }
    let analytic = |c: &DsCell| match c.protocol {
        Protocol::Nakamoto => double_spend_prob_nc(c.alpha, c.k),
        Protocol::Crystal => double_spend_prob_crystal(c.alpha, c.k, DoubleSpendConvention::Table),
    };
    let reduced = (spec.trials / 10).max(1);
    let outcomes: Vec<_> = cells
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let naive = analytic(c) >= NAIVE_FLOOR;
            double_spend_experiment(&DoubleSpendSpec {
                protocol: c.protocol,
                alpha: c.alpha,
                k: c.k,
                delta: c.delta,
                lambda: 1.0 / p.block_interval_secs,
                trials: if naive { spec.trials } else { reduced },
                sampling: if naive { Sampling::Naive } else { Sampling::Importance },
                seed: derive_seed(spec.seed, b"table3", i as u64),
            })
        })
        .collect();
    let oracle_cells = cells.iter().filter(|c| c.delta == 0.0).count();
    let z = bonferroni_z(CONFIDENCE, oracle_cells);

    let mut t = Table::new(
        "table3",
        &spec,
        &[
            "protocol",
            "delta",
            "alpha",
            "k",
            "analytic",
            "published",
            "published_match",
            "rel_diff",
            "sampling",
            "trials",
            "mc_estimate",
            "mc_std_err",
            "ci_lo",
            "ci_hi",
            "covers",
            "abandoned",
        ],
    );
    t.notes.push("nakamoto analytic: catch-up probability of a pre-mining attacker; match = equal to 3 significant figures".into());
    t.notes.push("crystal analytic: (alpha/beta)^k, the attacker keeps only its pre-mined block; match = within 2% relative".into());
    t.notes.push(format!(
        "Monte Carlo: naive sampling with {} trials where analytic >= {NAIVE_FLOOR:e}, otherwise importance sampling \
         (waiting phase drawn at even odds, race rates swapped, trials weighted by their likelihood ratio) with {reduced} trials",
        spec.trials
    ));
    t.notes.push("rel_diff: closed form vs published at delta = 0, Monte Carlo vs published otherwise".into());
    t.notes.push("races are abandoned at a deficit of 100k blocks; abandoned trials count as failures".into());
    t.notes.push(format!(
        "delta > 0: honest blocks mined within delta (nakamoto) or 2 delta (crystal) of the previous effective honest \
         block are wasted; no closed form, analytic column is the delta = 0 value for reference; intervals: \
         Bonferroni over {oracle_cells} delta = 0 cells at {CONFIDENCE}"
    ));
    let mut nc_match = Vec::new();
    let mut cr_match = Vec::new();
    let mut cover = Vec::new();
    for (c, o) in cells.iter().zip(&outcomes) {
        let a = analytic(c);
        let pubv = p.table3_cell(c.protocol, c.delta, c.alpha, c.k);
        let (lo, hi) = match o.sampling {
            Sampling::Naive => crate::analytics::wilson_interval(o.successes, o.trials, z),
            Sampling::Importance => ((o.estimate - z * o.std_err).max(0.0), (o.estimate + z * o.std_err).min(1.0)),
        };
        let name = format!("{} a={} k={}", proto_name(c.protocol), c.alpha, c.k);
        let oracle = c.delta == 0.0;
        let ok = covers(lo, hi, a);
        if oracle {
            cover.push((name.clone(), ok));
        }
        let (matched, rel) = match pubv {
            Some(pv) => {
                let rel = (a - pv).abs() / pv;
                let hit = match c.protocol {
                    Protocol::Nakamoto => {
                        round_sig(&double_spend_prob_nc_exact(&decimal(c.alpha), c.k), 3) == round_sig(&decimal(pv), 3)
                    }
                    Protocol::Crystal => rel <= 0.02,
                };
                if oracle {
                    let label = format!("{name} ({a:.3e} vs {pv:.2e})");
                    match c.protocol {
                        Protocol::Nakamoto => nc_match.push((label, hit)),
                        Protocol::Crystal => cr_match.push((label, hit)),
                    }
                }
                // Off the oracle rows the simulated value is what gets compared.
                let diff = if oracle { rel } else { (o.estimate - pv).abs() / pv };
                (if oracle { json!(hit) } else { Value::Null }, num(diff))
            }
            None => (Value::Null, Value::Null),
        };
        debug_assert_eq!(o.max_deficit, max_deficit(c.k));
        t.push(vec![
            json!(proto_name(c.protocol)),
            num(c.delta),
            num(c.alpha),
            json!(c.k),
            num(a),
            pubv.map_or(Value::Null, num),
            matched,
            rel,
            json!(match o.sampling {
                Sampling::Naive => "naive",
                Sampling::Importance => "importance",
            }),
            json!(o.trials),
            num(o.estimate),
            num(o.std_err),
            num(lo),
            num(hi),
            if oracle { json!(ok) } else { Value::Null },
            json!(o.abandoned),
        ]);
    }
    if !nc_match.is_empty() {
        t.checks.push(family("nakamoto closed form matches published to 3 significant figures", &nc_match));
    }
    if !cr_match.is_empty() {
        t.checks.push(family("crystal closed form within 2% of published", &cr_match));
    }
    if !cover.is_empty() {
        t.checks.push(family("Monte Carlo interval covers closed form", &cover));
    }
    Ok(t)
}

fn proto_name(p: Protocol) -> &'static str {
    match p {
        Protocol::Nakamoto => "nakamoto",
        Protocol::Crystal => "crystal",
    }
}

// ------------------------------------------------------------------- fig 5

/// Selfish-mining revenue against the closed forms.
///
/// `Δ = 0` cells run the block-race model for `trials` blocks. Cells with
/// `Δ > 0` run the full simulator (honest ties split uniformly, so only
/// `γ = 1/2` applies) for the `[sim]` horizon, 20 000 blocks by default.
pub fn cmd_fig5(spec: &ExperimentSpec) -> Result<Table, SpecError> {
    let spec = resolve(spec, ExperimentKind::Fig5)?;
    let g = &spec.grid;
    let mut cells = Vec::new();
    for &delta in &g.delta {
        for &gamma in &g.gamma_tie {
            if delta > 0.0 && gamma != 0.5 {
                continue;
            }
            for &alpha in &g.alpha {
                cells.push((delta, gamma, alpha));
            }
        }
    }
    let sim_base = spec.sim.clone().unwrap_or(SimConfig { horizon_blocks: 20_000, ..SimConfig::default() });
    let results: Vec<[(f64, f64); 2]> = cells
        .par_iter()
        .enumerate()
        .map(|(i, &(delta, gamma, alpha))| {
            [Protocol::Crystal, Protocol::Nakamoto].map(|protocol| {
                let seed = derive_seed(spec.seed, if protocol == Protocol::Crystal { b"fig5/c" } else { b"fig5/n" }, i as u64);
                if delta == 0.0 {
                    let o = selfish_mining_experiment(&SelfishSpec { protocol, alpha, gamma, blocks: spec.trials, seed });
                    (o.revenue, o.std_err)
                } else {
                    let cfg = SimConfig {
                        protocol,
                        alpha,
                        delta,
                        seed,
                        adversary: AdversaryKind::Selfish,
                        ..sim_base.clone()
                    };
                    let tr = sim::run(&cfg).expect("validated");
                    (tr.adversary_revenue(), f64::NAN)
                }
            })
        })
        .collect();

    let mut t = Table::new(
        "fig5",
        &spec,
        &[
            "alpha",
            "gamma_tie",
            "delta",
            "source",
            "crystal_model",
            "crystal_mc",
            "crystal_std_err",
            "nakamoto_model",
            "nakamoto_mc",
            "nakamoto_std_err",
        ],
    );
    t.notes.push("crystal model: alpha(2 alpha + gamma beta)/(beta + 2 alpha); nakamoto model: classic selfish-mining revenue".into());
    t.notes.push(format!("delta = 0: block-race model over {} blocks, std errors from 100 batch means", spec.trials));
    t.notes.push(format!("delta > 0: full simulator over {} blocks per point", sim_base.horizon_blocks));
    let mut crystal_fit = Vec::new();
    let mut nc_fit = Vec::new();
    let mut below_alpha = Vec::new();
    let mut claim = None;
    for (&(delta, gamma, alpha), [(cr, cr_se), (nc, nc_se)]) in cells.iter().zip(&results) {
        let cm = selfish_revenue_crystal(alpha, gamma);
        let nm = selfish_revenue_nc(alpha, gamma).max(0.0);
        let cell = format!("alpha={alpha} gamma={gamma} delta={delta}");
        if delta == 0.0 {
            crystal_fit.push((format!("{cell} ({cr:.4} vs {cm:.4})"), (cr - cm).abs() <= 0.005));
            nc_fit.push((format!("{cell} ({nc:.4} vs {nm:.4})"), (nc - nm).abs() <= 0.005));
            let p = published();
            if alpha == p.selfish.alpha && gamma == p.selfish.gamma {
                claim = Some(Check::new(
                    "nakamoto selfish revenue at published point",
                    (nc - p.selfish.nc_revenue).abs() <= 0.01,
                    format!("{nc:.4} vs {} ± 0.01", p.selfish.nc_revenue),
                ));
            }
        }
        if gamma <= 0.5 {
            below_alpha.push((format!("{cell} ({cr:.4})"), *cr <= alpha));
        }
        t.push(vec![
            num(alpha),
            num(gamma),
            num(delta),
            json!(if delta == 0.0 { "race-model" } else { "simulator" }),
            num(cm),
            num(*cr),
            num(*cr_se),
            num(nm),
            num(*nc),
            num(*nc_se),
        ]);
    }
    if !crystal_fit.is_empty() {
        t.checks.push(family("crystal revenue within 0.005 of closed form", &crystal_fit));
        t.checks.push(family("nakamoto revenue within 0.005 of closed form", &nc_fit));
    }
    t.checks.push(family("crystal revenue never exceeds alpha", &below_alpha));
    t.checks.extend(claim);
    Ok(t)
}

// ------------------------------------------------------------------- fig 6

/// Certification failures of honest blocks with offline voters.
pub fn cmd_fig6(spec: &ExperimentSpec) -> Result<Table, SpecError> {
    let spec = resolve(spec, ExperimentKind::Fig6)?;
    let g = &spec.grid;
    let mut cells = Vec::new();
    for &w in &g.window {
        for &m in &g.committee {
            for &alpha in &g.alpha {
                for &gamma in &g.gamma_off {
                    cells.push((CommitteeModel::new(w, m, alpha), gamma));
                }
            }
        }
    }
    let rows: Vec<_> = cells
        .par_iter()
        .enumerate()
        .map(|(i, (model, gamma))| {
            let exact = offline_failure_prob(model, *gamma);
            let thinned = offline_failure_prob_thinned(model, *gamma);
            let mc = offline_experiment(model, *gamma, spec.trials, derive_seed(spec.seed, b"fig6", i as u64));
            (exact, thinned, mc)
        })
        .collect();
    let z = bonferroni_z(CONFIDENCE, cells.len());
    let mut t = Table::new(
        "fig6",
        &spec,
        &[
            "gamma_off",
            "alpha",
            "window",
            "committee",
            "failure_prob",
            "failure_prob_thinned",
            "mc_hits",
            "mc_trials",
            "mc_rate",
            "ci_lo",
            "ci_hi",
            "covers",
        ],
    );
    t.notes.push("failure: online honest shares <= floor(m/2); adversary members abstain".into());
    t.notes.push(format!("intervals: Wilson, Bonferroni over {} cells at {CONFIDENCE}", cells.len()));
    let mut cover = Vec::new();
    let mut agree = Vec::new();
    for ((model, gamma), (exact, thinned, mc)) in cells.iter().zip(&rows) {
        let (lo, hi) = mc.interval(z);
        let ok = covers(lo, hi, *exact);
        let cell = format!("W={} m={} alpha={} gamma={gamma}", model.window, model.committee, model.alpha);
        cover.push((cell.clone(), ok));
        agree.push((cell, (exact - thinned).abs() <= 1e-9 + 1e-6 * thinned));
        t.push(vec![
            num(*gamma),
            num(model.alpha),
            json!(model.window),
            json!(model.committee),
            num(*exact),
            num(*thinned),
            json!(mc.hits),
            json!(mc.trials),
            num(mc.rate()),
            num(lo),
            num(hi),
            json!(ok),
        ]);
    }
    t.checks.push(family("convolution agrees with thinned binomial", &agree));
    t.checks.push(family("Monte Carlo interval covers failure probability", &cover));
    Ok(t)
}

// ---------------------------------------------------------------- simulate

/// Full-simulator runs over `α × Δ`, `runs` seeds each.
///
/// With `output.traces` set, each run's JSONL trace is written there as
/// `run-NNNN.jsonl`.
pub fn cmd_simulate(spec: &ExperimentSpec) -> Result<Table, SpecError> {
    let spec = resolve(spec, ExperimentKind::Simulate)?;
    let g = &spec.grid;
    let base = spec.sim.clone().expect("resolved spec has a sim table");
    let mut cfgs = Vec::new();
    for &alpha in &g.alpha {
        for &delta in &g.delta {
            for r in 0..spec.runs {
                let seed = derive_seed(spec.seed, b"simulate", cfgs.len() as u64);
                cfgs.push((r, SimConfig { alpha, delta, seed, ..base.clone() }));
            }
        }
    }
    let traces = spec.output.traces.clone();
    if let Some(dir) = &traces {
        fs::create_dir_all(dir).map_err(|e| SpecError::Syntax(format!("{}: {e}", dir.display())))?;
    }
    let summaries: Vec<Result<_, String>> = cfgs
        .par_iter()
        .enumerate()
        .map(|(i, (_, cfg))| {
            let tr = sim::run(cfg).map_err(|e| e.to_string())?;
            if let Some(dir) = &traces {
                write_trace(&tr, &dir.join(format!("run-{i:04}.jsonl"))).map_err(|e| e.to_string())?;
            }
            Ok(tr.summary())
        })
        .collect();

    let mut t = Table::new(
        "simulate",
        &spec,
        &[
            "run",
            "alpha",
            "delta",
            "seed",
            "blocks_mined",
            "main_chain_height",
            "adversary_revenue",
            "fork_rate",
            "max_private_lead",
            "withholding_violations",
            "conflicting_heights",
            "reverted_commits",
            "progress_checked",
            "progress_violations",
            "converged",
            "converged_bound",
            "meets_bound",
            "trace_hash",
        ],
    );
    t.notes.push(format!("trace schema {}", sim::TRACE_SCHEMA));
    let mut safe = Vec::new();
    let mut progress = Vec::new();
    let mut withheld = Vec::new();
    for ((r, cfg), s) in cfgs.iter().zip(summaries) {
        let s = s.map_err(SpecError::Syntax)?;
        let cell = format!("alpha={} delta={} run={r}", cfg.alpha, cfg.delta);
        safe.push((cell.clone(), s.conflicts.heights.is_empty() && s.conflicts.reverts == 0));
        progress.push((cell.clone(), s.progress.violations.is_empty()));
        if cfg.protocol == Protocol::Crystal {
            withheld.push((cell, s.withholding_violations == 0));
        }
        t.push(vec![
            json!(r),
            num(cfg.alpha),
            num(cfg.delta),
            json!(cfg.seed),
            json!(s.blocks_mined),
            json!(s.main_chain_height),
            num(s.adversary_revenue),
            num(s.fork_rate),
            json!(s.max_private_lead),
            json!(s.withholding_violations),
            json!(s.conflicts.heights.len()),
            json!(s.conflicts.reverts),
            json!(s.progress.checked),
            json!(s.progress.violations.len()),
            json!(s.converged.converged),
            num(s.converged.lower_bound),
            json!(s.converged.meets_bound),
            json!(s.trace_hash.to_string()),
        ]);
    }
    t.checks.push(family("no conflicting k-deep commits", &safe));
    t.checks.push(family("honest progress within 2 delta", &progress));
    if !withheld.is_empty() {
        t.checks.push(family("no withheld run without a committee failure", &withheld));
    }
    Ok(t)
}

fn write_trace(tr: &sim::SimTrace, path: &Path) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    tr.write_jsonl(&mut f)?;
    std::io::Write::flush(&mut f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: ExperimentKind, trials: u64) -> ExperimentSpec {
        ExperimentSpec { trials, seed: 11, ..ExperimentSpec::new(kind) }
    }

    #[test]
    fn table3_cells_from_the_examples() {
        let mut s = small(ExperimentKind::Table3, 20_000);
        s.grid.alpha = vec![0.2, 0.45];
        s.grid.k = vec![4, 8];
        let t = cmd_table3(&s).unwrap();
        let find = |proto: &str, a: f64, k: u32| {
            t.rows
                .iter()
                .find(|r| r[0] == json!(proto) && r[2] == num(a) && r[3] == json!(k))
                .unwrap()
                .clone()
        };
        let nc = find("nakamoto", 0.2, 4);
        assert_eq!(nc[5], num(6.67e-2));
        assert_eq!(nc[6], json!(true));
        let cr = find("crystal", 0.45, 8);
        assert_eq!(cr[5], num(2.01e-1));
        assert!((cr[4].as_f64().unwrap() - 0.201).abs() < 0.001);
    }

    #[test]
    fn fig5_alpha_zero_row_is_zero() {
        let mut s = small(ExperimentKind::Fig5, 10_000);
        s.grid.alpha = vec![0.0, 0.3];
        let t = cmd_fig5(&s).unwrap();
        let r = &t.rows[0];
        for col in ["crystal_model", "crystal_mc", "nakamoto_model", "nakamoto_mc"] {
            assert_eq!(r[t.column(col).unwrap()], num(0.0), "{col}");
        }
    }

    #[test]
    fn params_column_is_monotone_and_rerun_identical() {
        let mut s = small(ExperimentKind::Params, 1);
        s.grid.window = vec![3024];
        s.grid.alpha = vec![0.1, 0.2, 0.3, 0.35];
        let t = cmd_params(&s).unwrap();
        let m: Vec<u64> = t.values("m_min").iter().map(|v| v.as_u64().unwrap()).collect();
        assert!(m.windows(2).all(|w| w[0] <= w[1]), "{m:?}");
        assert!(*m.last().unwrap() > 340);
        assert!(t.passed(), "{:?}", t.checks);
        let again = cmd_params(&s).unwrap();
        assert_eq!(t.to_string(super::super::Format::Csv), again.to_string(super::super::Format::Csv));
    }

    #[test]
    fn fig6_small_run_covers() {
        let mut s = small(ExperimentKind::Fig6, 50_000);
        s.grid.gamma_off = vec![0.0, 0.1, 1.0];
        let t = cmd_fig6(&s).unwrap();
        assert!(t.passed(), "{:?}", t.checks);
        assert_eq!(t.rows[2][t.column("failure_prob").unwrap()], num(1.0));
    }

    #[test]
    fn simulate_writes_traces() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = small(ExperimentKind::Simulate, 1);
        s.runs = 2;
        s.sim = Some(SimConfig { alpha: 0.2, delta: 5.0, horizon_blocks: 300, ..SimConfig::default() });
        s.output.traces = Some(dir.path().to_path_buf());
        let t = cmd_simulate(&s).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert!(t.passed(), "{:?}", t.checks);
        assert!(dir.path().join("run-0001.jsonl").exists());
        assert_ne!(t.rows[0][3], t.rows[1][3]);
    }
}
