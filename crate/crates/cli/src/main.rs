use std::fs;
use std::io::{self, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dosefind_core::decision::{decision_card, decision_table, diff_summary, table_diff};
use dosefind_core::document::{parse_designs, study_document, table_document};
use dosefind_core::export::{
    bayes_factors_csv, decisions_csv, diff_csv, reports_csv, reports_with_deltas_csv,
    side_by_side_csv,
};
use dosefind_core::sim::{parse_scenarios, reference_suite, SimConfig};
use dosefind_core::{DesignParams, DoseData, LeftoverPolicy, Variant};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "dosefind",
    version,
    about = "mTPI and mTPI-2 dose-finding designs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Precalculated decision table for one design or both side by side.
    Table(TableArgs),
    /// Cells where two designs disagree.
    Diff(DiffArgs),
    /// Simulated operating characteristics.
    Simulate(SimulateArgs),
    /// The decision for one dose given its cumulative data.
    Next(NextArgs),
    /// Runs the HTTP service.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct DesignArgs {
    /// Target toxicity probability.
    #[arg(long = "pt")]
    p_t: f64,
    /// Width of the equivalence interval below the target.
    #[arg(long, default_value_t = 0.05)]
    eps1: f64,
    /// Width of the equivalence interval above the target.
    #[arg(long, default_value_t = 0.05)]
    eps2: f64,
    /// Posterior threshold for the safety rules.
    #[arg(long, default_value_t = 0.95)]
    xi: f64,
    /// Short boundary intervals of the mTPI-2 grid: exclude or include.
    #[arg(long, default_value = "exclude")]
    leftover: LeftoverPolicy,
}

impl DesignArgs {
    fn params(&self, max_n: u32) -> DesignParams {
        DesignParams::new(self.p_t, max_n)
            .with_eps(self.eps1, self.eps2)
            .with_xi(self.xi)
            .with_leftover_policy(self.leftover)
    }
}

#[derive(Args)]
struct Output {
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Output {
    fn format(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }

    fn write(&self, body: &str) -> Result<()> {
        match &self.out {
            Some(path) => {
                fs::write(path, body).with_context(|| format!("writing {}", path.display()))
            }
            None => {
                let mut out = io::stdout().lock();
                out.write_all(body.as_bytes())?;
                out.flush()?;
                Ok(())
            }
        }
    }
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

#[derive(Args)]
struct TableArgs {
    /// mtpi, mtpi2 or both.
    #[arg(long, default_value = "mtpi2")]
    design: String,
    #[command(flatten)]
    design_args: DesignArgs,
    #[arg(long = "max-n", default_value_t = 30)]
    max_n: u32,
    /// Emit the Bayes factor grid instead of decisions (single design, CSV).
    #[arg(long)]
    bf: bool,
    #[command(flatten)]
    output: Output,
}

fn cmd_table(a: &TableArgs) -> Result<()> {
    let designs = parse_designs(&a.design)?;
    let doc = table_document(&a.design_args.params(a.max_n), &designs)?;
    let body = match (a.output.format(Format::Csv), doc.tables.as_slice()) {
        (Format::Json, _) => json(&doc)?,
        (Format::Csv, [_, _]) if a.bf => bail!("--bf needs a single design"),
        (Format::Csv, [x, y]) => side_by_side_csv(x, y)?,
        (Format::Csv, [t]) if a.bf => bayes_factors_csv(t)?,
        (Format::Csv, [t]) => decisions_csv(t)?,
        _ => unreachable!("one or two designs"),
    };
    a.output.write(&body)
}

#[derive(Args)]
struct DiffArgs {
    #[arg(long, default_value = "mtpi")]
    from: Variant,
    #[arg(long, default_value = "mtpi2")]
    to: Variant,
    #[command(flatten)]
    design_args: DesignArgs,
    #[arg(long = "max-n", default_value_t = 30)]
    max_n: u32,
    #[command(flatten)]
    output: Output,
}

fn cmd_diff(a: &DiffArgs) -> Result<()> {
    let params = a.design_args.params(a.max_n);
    params.validate()?;
    let from = decision_table(&params.clone().with_variant(a.from))?;
    let to = decision_table(&params.with_variant(a.to))?;
    let diff = table_diff(&from, &to)?;
    let summary = diff_summary(&diff);
    let body = match a.output.format(Format::Csv) {
        Format::Json => json(&serde_json::json!({ "diff": diff, "summary": summary }))?,
        Format::Csv => diff_csv(&diff)?,
    };
    for (class, count) in &summary {
        eprintln!("{class}: {count}");
    }
    a.output.write(&body)
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON array of scenarios; the built-in reference suite when omitted.
    #[arg(long)]
    scenarios: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    trials: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Comma-separated designs, or both.
    #[arg(long, default_value = "both")]
    designs: String,
    /// Add paired mTPI-2 minus mTPI deltas.
    #[arg(long)]
    compare: bool,
    #[arg(long = "cohort-size", default_value_t = 3)]
    cohort_size: u32,
    #[arg(long = "max-n", default_value_t = 30)]
    max_n: u32,
    #[command(flatten)]
    output: Output,
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let scenarios = match &a.scenarios {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_scenarios(&text).with_context(|| format!("in {}", path.display()))?
        }
        None => reference_suite(),
    };
    let mut designs: Vec<Variant> = Vec::new();
    for part in a.designs.split(',') {
        for v in parse_designs(part.trim())? {
            if !designs.contains(&v) {
                designs.push(v);
            }
        }
    }
    if a.compare && designs.len() < 2 {
        bail!("--compare needs both designs");
    }
    let config = SimConfig {
        cohort_size: a.cohort_size,
        max_n: a.max_n,
        designs,
        ..SimConfig::new(a.trials, a.seed)
    };
    let mut doc = study_document(&scenarios, &config)?;
    if !a.compare {
        doc.comparison = None;
    }
    let body = match (a.output.format(Format::Csv), &doc.comparison) {
        (Format::Json, _) => json(&doc)?,
        (Format::Csv, Some(cmp)) => reports_with_deltas_csv(&doc.reports, cmp)?,
        (Format::Csv, None) => reports_csv(&doc.reports)?,
    };
    a.output.write(&body)
}

#[derive(Args)]
struct NextArgs {
    #[arg(long, default_value = "mtpi2")]
    design: Variant,
    #[command(flatten)]
    design_args: DesignArgs,
    /// Patients with a DLT at the dose.
    #[arg(long)]
    x: u32,
    /// Patients treated at the dose.
    #[arg(long)]
    n: u32,
    #[command(flatten)]
    output: Output,
}

fn cmd_next(a: &NextArgs) -> Result<()> {
    let params = a.design_args.params(a.n.max(1)).with_variant(a.design);
    params.validate()?;
    let card = decision_card(DoseData::new(a.x, a.n)?, &params)?;
    let body = match a.output.format(Format::Json) {
        Format::Json => json(&card)?,
        Format::Csv => {
            let mut s = String::from("x,n,variant,decision,bayes_factor,prob_over_target\n");
            s += &format!(
                "{},{},{},{},{},{:.6}\n",
                card.x,
                card.n,
                card.variant,
                card.decision,
                card.bayes_factor
                    .map(|b| format!("{b:.2}"))
                    .unwrap_or_default(),
                card.prob_over_target
            );
            s
        }
    };
    a.output.write(&body)
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    /// Directory holding trial event logs.
    #[arg(long = "data-dir", default_value = "dosefind-data")]
    data_dir: PathBuf,
    /// Simulation jobs run at once.
    #[arg(long, default_value_t = 2)]
    workers: usize,
}

fn cmd_serve(a: &ServeArgs) -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(io::stderr)
        .init();
    let options = dosefind_service::Options {
        workers: a.workers,
        ..Default::default()
    };
    let addr = SocketAddr::new(a.host, a.port);
    tokio::runtime::Runtime::new()?
        .block_on(dosefind_service::serve(addr, &a.data_dir, options))
        .with_context(|| format!("serving on {addr}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Table(a) => cmd_table(a),
        Command::Diff(a) => cmd_diff(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Next(a) => cmd_next(a),
        Command::Serve(a) => cmd_serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
