//! Command-line front end: table and figure generators, free-form
//! simulations and the acceptance suite. Exit status is 0 only when every
//! check that ran passed, 1 when one failed and 2 on bad input.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crystal::harness::acceptance::{self, Options, Report};
use crystal::harness::{run_spec, ExperimentKind, ExperimentSpec, Format, Table};

#[derive(Parser)]
#[command(name = "crystal", version, about = "Crystal consensus: analytics, simulator and acceptance checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimum committee sizes over alpha and window.
    Params(Common),
    /// Withholding probabilities and expected time to failure.
    Table2(Common),
    /// Double-spend probabilities, both protocols.
    Table3(Common),
    /// Selfish-mining revenue against alpha.
    Fig5(Common),
    /// Committee failure with offline voters.
    Fig6(Common),
    /// Full network simulations described by a spec file.
    Simulate(Common),
    /// Run the acceptance suite.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct Common {
    /// TOML experiment spec; its kind must match the subcommand.
    spec: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo trials (blocks, for simulations) per cell.
    #[arg(long)]
    trials: Option<u64>,
    /// Network delay bounds in seconds, comma separated.
    #[arg(long, value_delimiter = ',')]
    delta: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<Format>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the Monte Carlo trial counts (quick, not the stated sizes).
    #[arg(long)]
    trials: Option<u64>,
    /// Only these criteria, comma separated.
    #[arg(long, value_delimiter = ',')]
    only: Vec<u8>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: Format,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Params(c) => table(ExperimentKind::Params, c),
        Command::Table2(c) => table(ExperimentKind::Table2, c),
        Command::Table3(c) => table(ExperimentKind::Table3, c),
        Command::Fig5(c) => table(ExperimentKind::Fig5, c),
        Command::Fig6(c) => table(ExperimentKind::Fig6, c),
        Command::Simulate(c) => table(ExperimentKind::Simulate, c),
        Command::Verify(v) => verify(v),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

type Res<T> = Result<T, Box<dyn std::error::Error>>;

fn table(kind: ExperimentKind, c: Common) -> Res<bool> {
    let mut spec = match &c.spec {
        Some(path) => {
            let spec = ExperimentSpec::from_toml(&fs::read_to_string(path)?)?;
            if spec.kind != kind {
                return Err(format!("{} describes a {} experiment, not {kind}", path.display(), spec.kind).into());
            }
            spec
        }
        None => ExperimentSpec::new(kind),
    };
    if let Some(s) = c.seed {
        spec.seed = s;
    }
    if let Some(t) = c.trials {
        spec.trials = t;
    }
    if !c.delta.is_empty() {
        spec.grid.delta = c.delta;
    }
    if let Some(f) = c.format {
        spec.output.format = f;
    }
    if let Some(p) = c.out {
        spec.output.path = Some(p);
    }
    let t = run_spec(&spec)?;
    emit(&t, &spec)?;
    for check in &t.checks {
        eprintln!("{check}");
    }
    Ok(t.passed())
}

fn sink(path: Option<&PathBuf>) -> Res<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit(t: &Table, spec: &ExperimentSpec) -> Res<()> {
    let mut w = sink(spec.output.path.as_ref())?;
    t.write(spec.output.format, &mut w)?;
    w.flush()?;
    Ok(())
}

fn verify(v: VerifyArgs) -> Res<bool> {
    let opts = Options { seed: v.seed, trials: v.trials };
    let ids: Vec<u8> = if v.only.is_empty() { acceptance::CRITERIA.to_vec() } else { v.only };
    if let Some(bad) = ids.iter().find(|id| !acceptance::CRITERIA.contains(id)) {
        return Err(format!("no criterion {bad}").into());
    }
    let mut results = Vec::new();
    for id in ids {
        let c = acceptance::run(id, &opts);
        eprintln!("{c}");
        results.push(c);
    }
    let report = Report::new(opts, results);
    if let Some(p) = &v.out {
        let mut w = sink(Some(p))?;
        report.write(v.format, &mut w)?;
        w.flush()?;
    }
    let failed = report.criteria.iter().filter(|c| !c.pass).count();
    eprintln!("{} of {} criteria passed", report.criteria.len() - failed, report.criteria.len());
    Ok(report.passed())
}
