//! `resilex`: command-line front end for the exploration engine.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use resilex_core::Error;

#[derive(Parser)]
#[command(name = "resilex", version, about = "Cross-layer soft-error resilience exploration")]
struct Cli {
    /// Technique catalog JSON; defaults to $RESILEX_CATALOG, then the built-in catalog.
    #[arg(long, global = true)]
    catalog: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic design, optionally with a controlled-overlap profile.
    GenDesign(GenDesign),
    /// Fault-inject the toy pipeline and write a vulnerability profile.
    Inject(Inject),
    /// Build a protection plan for a target improvement.
    Plan(Plan),
    /// Evaluate a plan's improvements and costs.
    Evaluate(Evaluate),
    /// Sweep strategies and targets, writing one report row per plan.
    Explore(Explore),
    /// Enumerate cross-layer technique combinations.
    Enumerate(Enumerate),
    /// Train/validate benchmark-dependence study.
    Depend(Depend),
    /// Merge report CSVs into a Pareto front and bound region.
    Report(Report),
    /// Catalog utilities.
    #[command(subcommand)]
    Catalog(CatalogCmd),
}

#[derive(Args)]
pub struct GenDesign {
    /// ino-like, ooo-like or toy-pipeline.
    #[arg(long, default_value = "ino-like")]
    pub preset: String,
    #[arg(long, default_value_t = 1250)]
    pub ff_count: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Five nearest-neighbour bucket fractions: <1,1-2,2-3,3-4,>=4.
    #[arg(long, value_delimiter = ',')]
    pub adjacency: Option<Vec<f64>>,
    /// Six stage weights: fetch,decode,execute,memory,exception,writeback.
    #[arg(long, value_delimiter = ',')]
    pub stage_weights: Option<Vec<f64>>,
    /// Fraction of flip-flops with slack for an unpipelined parity tree.
    #[arg(long)]
    pub fast_fraction: Option<f64>,
    #[arg(long)]
    pub benchmarks: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a controlled-overlap profile.
    #[arg(long)]
    pub profile_out: Option<PathBuf>,
    /// Flip-flops planted as always-vanish in the profile.
    #[arg(long, default_value_t = 0)]
    pub dead: usize,
    #[arg(long)]
    pub injections: Option<u32>,
}

#[derive(Args)]
pub struct Inject {
    /// Built-in program names or assembly files; all built-ins when absent.
    #[arg(long, value_delimiter = ',')]
    pub programs: Vec<String>,
    #[arg(long)]
    pub seed: u64,
    /// Injections per program; defaults to the size for a 1% margin at 95%.
    #[arg(long, conflicts_with = "exhaustive")]
    pub samples: Option<u64>,
    #[arg(long)]
    pub exhaustive: bool,
    #[arg(long, default_value = "stratified")]
    pub mode: String,
    /// `95%`, `0.95` or `z=1.96`.
    #[arg(long, default_value = "95%")]
    pub confidence: String,
    #[arg(long, default_value_t = 0.01)]
    pub margin: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Write the matching toy-pipeline design.
    #[arg(long)]
    pub design_out: Option<PathBuf>,
    /// Per-program sample counts and confidence intervals.
    #[arg(long)]
    pub campaign_out: Option<PathBuf>,
}

#[derive(Args)]
pub struct Plan {
    #[arg(long)]
    pub design: PathBuf,
    #[arg(long)]
    pub profile: PathBuf,
    /// `sdc:50`, `due:max`, `joint:20`; give one SDC and one DUE target for joint protection.
    #[arg(long, required = true)]
    pub target: Vec<String>,
    /// `leap-dice`, `lhl`, `eds+ir`, `parity+ir`, `h1+flush`, `h1+rob`, ...
    #[arg(long, default_value = "leap-dice")]
    pub strategy: String,
    /// greedy, optimal or top-down.
    #[arg(long, default_value = "greedy")]
    pub mode: String,
    /// High-level techniques applied first in top-down mode.
    #[arg(long, value_delimiter = ',')]
    pub high_level: Vec<String>,
    /// Recovery paired with the high-level techniques in top-down mode.
    #[arg(long)]
    pub recovery: Option<String>,
    /// Metric protected first in joint mode.
    #[arg(long, default_value = "sdc")]
    pub first: String,
    /// Let always-vanish flip-flops be protected too.
    #[arg(long)]
    pub max_improvement: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct Evaluate {
    #[arg(long)]
    pub design: PathBuf,
    #[arg(long)]
    pub profile: PathBuf,
    /// Plan JSON, or `empty`.
    #[arg(long)]
    pub plan: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args)]
pub struct Explore {
    #[arg(long)]
    pub design: PathBuf,
    #[arg(long)]
    pub profile: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "sdc:2,sdc:5,sdc:50,sdc:500,sdc:max")]
    pub targets: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "leap-dice,lhl,eds+ir,parity+ir,h1+flush")]
    pub strategies: Vec<String>,
    /// Extra top-down stacks, `;`-separated technique lists, e.g. `DFC;ABFT-correction`.
    #[arg(long)]
    pub high_level: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    /// Pareto front of the explored plans.
    #[arg(long)]
    pub front: Option<PathBuf>,
}

#[derive(Args)]
pub struct Enumerate {
    /// `default` or a rule-file path.
    #[arg(long, default_value = "default")]
    pub rules: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct Depend {
    #[arg(long)]
    pub design: PathBuf,
    #[arg(long)]
    pub profile: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub train: usize,
    #[arg(long, default_value_t = 4)]
    pub validate: usize,
    #[arg(long, default_value_t = resilex_core::dependence::DEFAULT_PAIRS)]
    pub pairs: usize,
    #[arg(long, default_value = "sdc:50")]
    pub target: String,
    #[arg(long, default_value = "leap-dice")]
    pub strategy: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args)]
pub struct Report {
    /// Report CSVs written by `evaluate` or `explore`.
    #[arg(long, required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, default_value = "sdc")]
    pub metric: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub bound: Option<PathBuf>,
}

#[derive(Subcommand)]
pub enum CatalogCmd {
    /// Print or write the catalog in effect.
    Dump {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Exit status by failure class.
fn exit_code(err: &anyhow::Error) -> (u8, &'static str) {
    if let Some(e) = err.chain().find_map(|c| c.downcast_ref::<Error>()) {
        return match e {
            Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => (3, "missing-file"),
            Error::Io(_) => (3, "io"),
            Error::SchemaMismatch { .. } | Error::Json(_) | Error::Csv(_) | Error::Rules(_) => (4, "schema"),
            Error::TargetUnreachable(_) | Error::NotApplicable(_) | Error::SpacingInfeasible { .. } => {
                (5, "infeasible")
            }
            _ => (6, "invalid-input"),
        };
    }
    if let Some(io) = err.chain().find_map(|c| c.downcast_ref::<std::io::Error>()) {
        return if io.kind() == std::io::ErrorKind::NotFound { (3, "missing-file") } else { (3, "io") };
    }
    (1, "error")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cat = cli.catalog.as_ref();
    let r = match &cli.command {
        Command::GenDesign(a) => commands::gen_design(a),
        Command::Inject(a) => commands::inject(a),
        Command::Plan(a) => commands::plan(a, cat),
        Command::Evaluate(a) => commands::evaluate(a, cat),
        Command::Explore(a) => commands::explore(a, cat),
        Command::Enumerate(a) => commands::enumerate(a, cat),
        Command::Depend(a) => commands::depend(a, cat),
        Command::Report(a) => commands::report(a),
        Command::Catalog(CatalogCmd::Dump { out }) => commands::catalog_dump(out.as_ref(), cat),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, kind) = exit_code(&e);
            let record = serde_json::json!({ "error": kind, "exit_code": code, "message": format!("{e:#}") });
            eprintln!("{record}");
            ExitCode::from(code)
        }
    }
}
