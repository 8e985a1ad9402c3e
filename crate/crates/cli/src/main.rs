//! `hsa`: build patient-flow networks, detect communities, score them as
//! health service areas and export the result.

mod commands;
mod compare;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};
use hsa_core::detect::Algorithm;
use hsa_core::graph::Clustering;
use hsa_core::ingest::{DischargeType, UnmappedPolicy};

#[derive(Debug, Parser)]
#[command(name = "hsa", version, about = "Health service area delineation from discharge networks")]
pub struct Cli {
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log more; repeat for debug output
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Discharge CSV + crosswalk -> flows.csv, edges.tsv, stats.json
    Build(BuildArgs),
    /// Network statistics of an edge TSV as JSON
    Stats(StatsArgs),
    /// Community detection on an edge TSV
    Detect(DetectArgs),
    /// Localization index, conductance and discharge summaries of a partition
    Evaluate(EvaluateArgs),
    /// Table of two or more evaluation reports
    Compare(CompareArgs),
    /// Dissolve ZCTA boundaries into one feature per community
    ExportGeojson(ExportArgs),
    /// Planted-partition discharge data
    Synth(SynthArgs),
    /// Plurality town assignment with enclave correction
    Baseline(BaselineArgs),
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Discharge records CSV
    #[arg(long)]
    discharges: PathBuf,
    /// Two-column `zip,zcta` CSV
    #[arg(long)]
    crosswalk: PathBuf,
    /// Discharge type, e.g. "ED Only" or ed-only
    #[arg(long = "type")]
    discharge_type: DischargeType,
    #[arg(long)]
    year: i32,
    /// drop or identity
    #[arg(long, default_value = "identity")]
    unmapped_policy: UnmappedPolicy,
    /// Header override as key=Header (keys: type, year, facility, facility_zip, patient_zip, count)
    #[arg(long = "column", value_name = "KEY=HEADER")]
    columns: Vec<String>,
    #[arg(long, value_enum, default_value = "unweighted")]
    clustering: ClusteringArg,
    /// Output directory
    #[arg(short, long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    edges: PathBuf,
    #[arg(long, value_enum, default_value = "unweighted")]
    clustering: ClusteringArg,
    /// Write here instead of stdout
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum ClusteringArg {
    Unweighted,
    Weighted,
}

impl From<ClusteringArg> for Clustering {
    fn from(c: ClusteringArg) -> Self {
        match c {
            ClusteringArg::Unweighted => Clustering::Unweighted,
            ClusteringArg::Weighted => Clustering::Weighted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgoChoice {
    One(Algorithm),
    All,
}

impl AlgoChoice {
    fn algorithms(self) -> Vec<Algorithm> {
        match self {
            AlgoChoice::One(a) => vec![a],
            AlgoChoice::All => Algorithm::ALL.to_vec(),
        }
    }
}

fn parse_algo(s: &str) -> Result<AlgoChoice, String> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(AlgoChoice::All);
    }
    s.parse::<Algorithm>()
        .map(AlgoChoice::One)
        .map_err(|_| format!("expected one of louvain, infomap, sbm, slpa, all; got `{s}`"))
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    edges: PathBuf,
    /// louvain, infomap, sbm, slpa or all
    #[arg(long, value_parser = parse_algo)]
    algo: AlgoChoice,
    #[arg(long, env = "HSA_SEED", default_value_t = 0)]
    seed: u64,
    /// SLPA frequency threshold r
    #[arg(long, default_value_t = 0.5)]
    slpa_r: f64,
    /// SLPA iterations T
    #[arg(long, default_value_t = 100)]
    slpa_iters: usize,
    /// Louvain resolution
    #[arg(long, default_value_t = 1.0)]
    resolution: f64,
    /// Block model MCMC sweeps
    #[arg(long, default_value_t = 100)]
    sweeps: usize,
    #[arg(short, long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    flows: PathBuf,
    #[arg(long)]
    edges: PathBuf,
    #[arg(long)]
    partition: PathBuf,
    /// Bootstrap replicates
    #[arg(long = "B", default_value_t = hsa_core::evaluate::DEFAULT_BOOTSTRAP)]
    bootstrap: usize,
    #[arg(long, env = "HSA_SEED", default_value_t = 0)]
    seed: u64,
    /// Algorithm label; read from the partition's sidecar JSON when absent
    #[arg(long)]
    algorithm: Option<String>,
    /// Discharge type label; read from the build manifest when absent
    #[arg(long = "type")]
    discharge_type: Option<DischargeType>,
    #[arg(long)]
    year: Option<i32>,
    /// Report path (default: report-<algorithm>.json next to the partition)
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    /// Output directory for comparison.csv and comparison.txt
    #[arg(short, long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    partition: PathBuf,
    /// GeoJSON FeatureCollection with one feature per ZCTA
    #[arg(long)]
    boundaries: PathBuf,
    /// Feature property holding the ZCTA code (default: common Census names)
    #[arg(long)]
    zcta_property: Option<String>,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 4)]
    communities: usize,
    /// ZCTAs per community
    #[arg(long, default_value_t = 16)]
    size: usize,
    /// Mean flow from a ZCTA to each hub of its own community
    #[arg(long, default_value_t = 50.0)]
    internal: f64,
    /// Mean flow from a ZCTA to each hub of another community
    #[arg(long, default_value_t = 1.0)]
    external: f64,
    #[arg(long, default_value_t = 1.0)]
    hub_fraction: f64,
    #[arg(long, env = "HSA_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long = "type", default_value = "ED Only")]
    discharge_type: DischargeType,
    #[arg(long, default_value_t = 2018)]
    year: i32,
    #[arg(short, long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long)]
    flows: PathBuf,
    /// `facility_zcta,town` CSV; without it every facility ZCTA is its own town
    #[arg(long)]
    towns: Option<PathBuf>,
    /// `zcta_a,zcta_b` CSV; enables the enclave correction
    #[arg(long)]
    adjacency: Option<PathBuf>,
    #[arg(short, long, default_value = ".")]
    out: PathBuf,
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).format_timestamp(None).init();
}

/// Usage line of the subcommand named on the command line, or of `hsa`.
fn usage() -> clap::builder::StyledStr {
    let mut cmd = Cli::command();
    cmd.build();
    let name = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    match name.and_then(|n| cmd.find_subcommand_mut(&n).cloned()) {
        Some(mut sub) => sub.render_usage(),
        None => cmd.render_usage(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => {
                    eprintln!("\n{}", usage());
                    ExitCode::from(1)
                }
            };
        }
    };
    init_logging(cli.verbose);
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<hsa_core::Error>() {
                Some(hsa_core::Error::EmptySelection { .. }) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
