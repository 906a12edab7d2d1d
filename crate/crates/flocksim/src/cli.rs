//! Command-line front end: single runs, policy comparisons, Feast sweeps and
//! post-hoc analysis of stored summaries.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{
    emit_snapshot_svg, emit_summary_json, emit_timeseries_csv, fit_growth_exponent, read_summary_json, summarize,
    RunSummary, ScalingFit,
};
use crate::error::{Error, Result};
use crate::model::{PolicyKind, SimConfig};
use crate::sim::{run, RunResult};

pub const OUT_DIR_ENV: &str = "FLOCKSIM_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "flocksim", version, about = "Simulate self-preserving digital objects")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulation and write its CSV, JSON, edge list and snapshots.
    Run(RunArgs),
    /// Run several policies over a seed set and report medians.
    Compare(CompareArgs),
    /// Feast-condition sweep over system sizes with a growth-message fit.
    Sweep(SweepArgs),
    /// Summarize stored JSON run summaries.
    Analyze(AnalyzeArgs),
}

/// Flags shared by every simulating subcommand. Unset flags fall back to the
/// config file, then to the built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// JSON file with any SimConfig fields; flags override it
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Preservation policy: least, moderate or most [default: least]
    #[arg(long, value_parser = parse_policy)]
    pub policy: Option<PolicyKind>,
    /// Number of DOs introduced [default: 500]
    #[arg(long)]
    pub n_max: Option<u32>,
    /// Number of hosts [default: 1000]
    #[arg(long)]
    pub h_max: Option<u32>,
    /// Minimum preservation copies per DO [default: 3]
    #[arg(long)]
    pub r_min: Option<u32>,
    /// Maximum preservation copies per DO [default: 5]
    #[arg(long)]
    pub r_max: Option<u32>,
    /// Foreign-copy slots per host [default: 5]
    #[arg(long)]
    pub capacity: Option<u32>,
    /// Random seed [default: 1]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Events per message bin [default: 100]
    #[arg(long)]
    pub bin_size: Option<u64>,
    /// Events between DO introductions [default: 7]
    #[arg(long)]
    pub intro_interval: Option<u64>,
    /// Probability of linking at each contact [default: 0.5]
    #[arg(long)]
    pub link_prob: Option<f64>,
    /// Fraction of gleaned candidates befriended after the first link [default: 0.33]
    #[arg(long)]
    pub extra_link_frac: Option<f64>,
    /// Hard stop on processed events [default: 5000000]
    #[arg(long)]
    pub max_events: Option<u64>,
    /// Output directory [default: out, or $FLOCKSIM_OUT_DIR]
    #[arg(long, env = OUT_DIR_ENV, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    /// Parallel runs for compare and sweep [default: number of CPUs]
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Comma-separated event times to render as SVG snapshots [default: none]
    #[arg(long, value_delimiter = ',')]
    pub snapshots: Vec<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Comma-separated policies to compare [default: least,moderate,most]
    #[arg(long, value_delimiter = ',', value_parser = parse_policy)]
    pub policies: Vec<PolicyKind>,
    /// Run seeds 1..=N [default: 20]
    #[arg(long)]
    pub seeds: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Comma-separated ascending system sizes [default: 10,50,100,250,500]
    #[arg(long, value_delimiter = ',')]
    pub sizes: Vec<u32>,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    /// JSON summaries written by run, compare or sweep
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
}

fn parse_policy(s: &str) -> std::result::Result<PolicyKind, String> {
    s.parse::<PolicyKind>().map_err(|e| e.to_string())
}

/// Output and execution options that are not part of a run's configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Options {
    pub out_dir: PathBuf,
    pub jobs: Option<usize>,
}

/// A fully resolved invocation.
#[derive(Debug, Clone, PartialEq)]
pub enum CliCommand {
    Run { config: SimConfig, snapshots: Vec<u64>, options: Options },
    Compare { policies: Vec<PolicyKind>, seeds: Vec<u64>, config: SimConfig, options: Options },
    Sweep { sizes: Vec<u32>, config: SimConfig, options: Options },
    Analyze { inputs: Vec<PathBuf> },
}

/// Failure of argument parsing or resolution.
#[derive(Debug)]
pub enum ParseFailure {
    /// `--help` or `--version`: print and exit successfully.
    Info(String),
    Usage(String),
}

impl ConfigArgs {
    /// Defaults, then the config file, then explicit flags.
    pub fn resolve(&self) -> Result<(SimConfig, Options)> {
        let mut c = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                serde_json::from_str::<SimConfig>(&text)
                    .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?
            }
            None => SimConfig::default(),
        };
        macro_rules! take {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = self.$flag { c.$field = v; })*
            };
        }
        take!(policy => policy, n_max => n_max, h_max => h_max, r_min => r_min, r_max => r_max,
              capacity => host_capacity, seed => seed, bin_size => bin_size,
              intro_interval => intro_interval, link_prob => link_probability,
              extra_link_frac => extra_link_fraction, max_events => max_events);
        c.validate()?;
        let options =
            Options { out_dir: self.out_dir.clone().unwrap_or_else(|| PathBuf::from("out")), jobs: self.jobs };
        Ok((c, options))
    }
}

pub const DEFAULT_SIZES: [u32; 5] = [10, 50, 100, 250, 500];

/// Parses an argument vector (program name first) into a resolved command.
pub fn parse_args<I, T>(argv: I) -> std::result::Result<CliCommand, ParseFailure>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            ParseFailure::Info(e.to_string())
        }
        _ => ParseFailure::Usage(e.to_string()),
    })?;
    let usage = |e: Error| ParseFailure::Usage(e.to_string());
    match cli.command {
        Command::Run(a) => {
            let (config, options) = a.config.resolve().map_err(usage)?;
            Ok(CliCommand::Run { config, snapshots: a.snapshots, options })
        }
        Command::Compare(a) => {
            let (config, options) = a.config.resolve().map_err(usage)?;
            let policies = if a.policies.is_empty() { PolicyKind::ALL.to_vec() } else { a.policies };
            let mut distinct = policies.clone();
            distinct.sort();
            distinct.dedup();
            if distinct.len() < 2 {
                return Err(ParseFailure::Usage("compare needs at least 2 distinct policies".into()));
            }
            let n = a.seeds.unwrap_or(20);
            if n == 0 {
                return Err(ParseFailure::Usage("--seeds must be at least 1".into()));
            }
            Ok(CliCommand::Compare { policies, seeds: (1..=n).collect(), config, options })
        }
        Command::Sweep(a) => {
            let (config, options) = a.config.resolve().map_err(usage)?;
            let sizes = if a.sizes.is_empty() { DEFAULT_SIZES.to_vec() } else { a.sizes };
            if sizes.len() < 3 {
                return Err(ParseFailure::Usage("sweep needs at least 3 sizes for a fit".into()));
            }
            if sizes.iter().any(|n| *n < 2) || sizes.windows(2).any(|w| w[0] >= w[1]) {
                return Err(ParseFailure::Usage("sweep sizes must be ascending and each at least 2".into()));
            }
            Ok(CliCommand::Sweep { sizes, config, options })
        }
        Command::Analyze(a) => Ok(CliCommand::Analyze { inputs: a.inputs }),
    }
}

/// File stem shared by every artifact of one run.
pub fn artifact_stem(config: &SimConfig) -> String {
    format!("{}_n{}_s{}", config.policy, config.n_max, config.seed)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        b = b.num_threads(j.max(1));
    }
    b.build().map_err(|e| Error::Precondition(format!("thread pool: {e}")))
}

/// Writes CSV, JSON and edge list for a finished run.
pub fn write_run_artifacts(result: &RunResult, dir: &Path) -> Result<()> {
    ensure_dir(dir)?;
    let stem = artifact_stem(&result.config);
    emit_timeseries_csv(result, &dir.join(format!("{stem}.csv")))?;
    emit_summary_json(result, &dir.join(format!("{stem}.json")))?;
    result.world.graph.write_edge_list(&dir.join(format!("{stem}_edges.txt")))
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyRow {
    pub policy: PolicyKind,
    pub runs: usize,
    pub median_steady_state_t: f64,
    pub median_total_messages: f64,
    pub median_final_effectiveness: f64,
    pub median_hosts_with_unused_capacity: f64,
    pub median_zero_copy_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub config: SimConfig,
    pub seeds: Vec<u64>,
    pub rows: Vec<PolicyRow>,
    /// Median total messages of Most over Moderate, when both ran.
    pub message_ratio_most_over_moderate: Option<f64>,
}

fn row_for(policy: PolicyKind, summaries: &[RunSummary]) -> PolicyRow {
    let pick = |f: &dyn Fn(&RunSummary) -> f64| median(&mut summaries.iter().map(f).collect::<Vec<_>>());
    PolicyRow {
        policy,
        runs: summaries.len(),
        median_steady_state_t: pick(&|s| s.steady_state_t.unwrap_or(s.final_t) as f64),
        median_total_messages: pick(&|s| s.messages.total.sent as f64),
        median_final_effectiveness: pick(&|s| s.final_effectiveness),
        median_hosts_with_unused_capacity: pick(&|s| s.hosts_with_unused_capacity as f64),
        median_zero_copy_fraction: pick(&|s| s.zero_copy_fraction),
    }
}

/// Runs every policy over the seed set; member runs execute in parallel.
pub fn compare(
    policies: &[PolicyKind],
    seeds: &[u64],
    config: &SimConfig,
    jobs: Option<usize>,
) -> Result<CompareReport> {
    let jobs_list: Vec<SimConfig> = policies
        .iter()
        .flat_map(|p| seeds.iter().map(move |s| SimConfig { policy: *p, seed: *s, ..config.clone() }))
        .collect();
    let summaries: Vec<RunSummary> = pool(jobs)?
        .install(|| jobs_list.into_par_iter().map(|c| run(c).map(|r| summarize(&r))).collect::<Result<Vec<_>>>())?;
    let rows: Vec<PolicyRow> = policies
        .iter()
        .map(|p| {
            let mine: Vec<RunSummary> = summaries.iter().filter(|s| s.config.policy == *p).cloned().collect();
            row_for(*p, &mine)
        })
        .collect();
    let find = |p: PolicyKind| rows.iter().find(|r| r.policy == p).map(|r| r.median_total_messages);
    let ratio = match (find(PolicyKind::MostAggressive), find(PolicyKind::ModeratelyAggressive)) {
        (Some(most), Some(moderate)) if moderate > 0.0 => Some(most / moderate),
        _ => None,
    };
    Ok(CompareReport { config: config.clone(), seeds: seeds.to_vec(), rows, message_ratio_most_over_moderate: ratio })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub n: u32,
    pub policy: PolicyKind,
    pub growth_messages: u64,
    pub total_messages: u64,
    pub final_effectiveness: f64,
    pub steady_state_t: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub config: SimConfig,
    pub points: Vec<SweepPoint>,
    /// Fit of growth messages summed over the three policies.
    pub fit: ScalingFit,
    pub per_policy: Vec<(PolicyKind, ScalingFit)>,
}

/// Feast sweep: for each size n, host capacity 2n, all three policies.
pub fn sweep(sizes: &[u32], config: &SimConfig, jobs: Option<usize>) -> Result<(SweepReport, Vec<RunResult>)> {
    let configs: Vec<SimConfig> = sizes
        .iter()
        .flat_map(|n| {
            PolicyKind::ALL.iter().map(move |p| SimConfig {
                n_max: *n,
                host_capacity: 2 * *n,
                policy: *p,
                ..config.clone()
            })
        })
        .collect();
    let results: Vec<RunResult> =
        pool(jobs)?.install(|| configs.into_par_iter().map(run).collect::<Result<Vec<_>>>())?;
    let points: Vec<SweepPoint> = results
        .iter()
        .map(|r| SweepPoint {
            n: r.config.n_max,
            policy: r.config.policy,
            growth_messages: r.ledger.growth.sent,
            total_messages: r.total_messages(),
            final_effectiveness: r.final_effectiveness(),
            steady_state_t: r.steady_state_t,
        })
        .collect();
    let aggregate: Vec<(u64, f64)> = sizes
        .iter()
        .map(|n| {
            let sum: u64 = points.iter().filter(|p| p.n == *n).map(|p| p.growth_messages).sum();
            (*n as u64, sum as f64)
        })
        .collect();
    let fit = fit_growth_exponent(&aggregate)?;
    let per_policy = PolicyKind::ALL
        .iter()
        .map(|pol| {
            let pts: Vec<(u64, f64)> =
                points.iter().filter(|p| p.policy == *pol).map(|p| (p.n as u64, p.growth_messages as f64)).collect();
            fit_growth_exponent(&pts).map(|f| (*pol, f))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((SweepReport { config: config.clone(), points, fit, per_policy }, results))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyzeReport {
    pub runs: Vec<RunSummary>,
    pub growth_fit: Option<ScalingFit>,
}

/// Loads summaries; fits growth messages against n when at least three
/// distinct sizes are present (totals at equal n are averaged).
pub fn analyze(inputs: &[PathBuf]) -> Result<AnalyzeReport> {
    let runs = inputs.iter().map(|p| read_summary_json(p)).collect::<Result<Vec<_>>>()?;
    let mut sizes: Vec<u32> = runs.iter().map(|r| r.config.n_max).collect();
    sizes.sort();
    sizes.dedup();
    let growth_fit = if sizes.len() >= 3 {
        let pts: Vec<(u64, f64)> = sizes
            .iter()
            .map(|n| {
                let v: Vec<f64> =
                    runs.iter().filter(|r| r.config.n_max == *n).map(|r| r.messages.growth.sent as f64).collect();
                (*n as u64, v.iter().sum::<f64>() / v.len() as f64)
            })
            .collect();
        fit_growth_exponent(&pts).ok()
    } else {
        None
    };
    Ok(AnalyzeReport { runs, growth_fit })
}

fn print_summary(s: &RunSummary) {
    println!(
        "{:<9} n={:<5} seed={:<4} condition={:<12} t={:<7} steady={:<7} growth_end={:<7} messages={:<8} effectiveness={:.4} zero_copy={:.4} unused_hosts={}",
        s.config.policy.to_string(),
        s.config.n_max,
        s.seed,
        s.condition.to_string(),
        s.final_t,
        s.steady_state_t.map(|t| t.to_string()).unwrap_or_else(|| "-".into()),
        s.growth_end_t.map(|t| t.to_string()).unwrap_or_else(|| "-".into()),
        s.messages.total.sent,
        s.final_effectiveness,
        s.zero_copy_fraction,
        s.hosts_with_unused_capacity,
    );
}

fn print_fit(label: &str, fit: &ScalingFit) {
    let marginal = fit.marginal_slope.map(|m| format!("{m:.4}")).unwrap_or_else(|| "-".into());
    println!(
        "{label}: slope={:.4} intercept={:.4} residual={:.4} marginal_slope={marginal}",
        fit.slope, fit.intercept, fit.residual
    );
}

/// Executes a resolved command, writing artifacts and printing a report.
pub fn execute(cmd: CliCommand) -> Result<()> {
    match cmd {
        CliCommand::Run { config, snapshots, options } => {
            let result = run(config)?;
            if let Some(t) = snapshots.iter().find(|t| **t > result.final_t) {
                return Err(Error::Precondition(format!("snapshot t = {t} beyond run length {}", result.final_t)));
            }
            write_run_artifacts(&result, &options.out_dir)?;
            let stem = artifact_stem(&result.config);
            for t in snapshots {
                emit_snapshot_svg(&result, t, &options.out_dir.join(format!("{stem}_t{t}.svg")))?;
            }
            print_summary(&summarize(&result));
        }
        CliCommand::Compare { policies, seeds, config, options } => {
            let report = compare(&policies, &seeds, &config, options.jobs)?;
            ensure_dir(&options.out_dir)?;
            write_json(&options.out_dir.join(format!("compare_n{}_seeds{}.json", config.n_max, seeds.len())), &report)?;
            println!(
                "{:<9} {:>6} {:>12} {:>12} {:>14} {:>13} {:>10}",
                "policy", "runs", "steady_t", "messages", "effectiveness", "unused_hosts", "zero_copy"
            );
            for r in &report.rows {
                println!(
                    "{:<9} {:>6} {:>12.1} {:>12.1} {:>14.4} {:>13.1} {:>10.4}",
                    r.policy.to_string(),
                    r.runs,
                    r.median_steady_state_t,
                    r.median_total_messages,
                    r.median_final_effectiveness,
                    r.median_hosts_with_unused_capacity,
                    r.median_zero_copy_fraction
                );
            }
            if let Some(ratio) = report.message_ratio_most_over_moderate {
                println!("message ratio most/moderate: {ratio:.4}");
            }
        }
        CliCommand::Sweep { sizes, config, options } => {
            let (report, results) = sweep(&sizes, &config, options.jobs)?;
            for r in &results {
                write_run_artifacts(r, &options.out_dir)?;
            }
            write_json(&options.out_dir.join(format!("sweep_s{}.json", config.seed)), &report)?;
            for p in &report.points {
                println!(
                    "n={:<6} {:<9} growth_messages={:<10} total_messages={}",
                    p.n,
                    p.policy.to_string(),
                    p.growth_messages,
                    p.total_messages
                );
            }
            print_fit("all policies", &report.fit);
            for (p, f) in &report.per_policy {
                print_fit(&p.to_string(), f);
            }
        }
        CliCommand::Analyze { inputs } => {
            let report = analyze(&inputs)?;
            for s in &report.runs {
                print_summary(s);
            }
            if let Some(fit) = &report.growth_fit {
                print_fit("growth messages vs n", fit);
            }
        }
    }
    Ok(())
}

/// Entry point returning the process exit status.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match parse_args(argv) {
        Err(ParseFailure::Info(text)) => {
            print!("{text}");
            EXIT_OK
        }
        Err(ParseFailure::Usage(text)) => {
            eprintln!("{}", text.trim_end());
            EXIT_USAGE
        }
        Ok(cmd) => match execute(cmd) {
            Ok(()) => EXIT_OK,
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_RUNTIME
            }
        },
    }
}
