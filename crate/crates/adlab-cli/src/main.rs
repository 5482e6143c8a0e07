//! `adlab` — run simulated adaptive-design campaigns from declarative
//! configs and emit per-trial CSV metrics with run manifests.
//!
//! Exit codes: 0 success, 1 usage, 2 configuration, 3 runtime/resource.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use adlab::{
    all_presets, comparison_csv, compare_strategies, curves_csv, emit_config, metrics_csv,
    oracle_battery, parse_config, write_text, Campaign, Error, ExperimentConfig, MetricsTable,
    RunManifest, Strategy,
};

const EXIT_USAGE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "adlab",
    version,
    about = "Simulation laboratory for Bayesian adaptive experimental design",
    long_about = "Estimates two-parameter response models with adaptively chosen designs, \
                  comparing greedy (single-trial) selection against exact multi-trial \
                  lookahead, and reports MSE, information gain, and utility-decomposition \
                  diagnostics as CSV."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one campaign and write its per-trial metrics CSV plus a manifest.
    Run {
        /// Experiment config (TOML).
        config: PathBuf,
        /// Output directory, created if missing.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the config's RNG seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's replication count.
        #[arg(long)]
        replications: Option<usize>,
        /// Override the config's trial count.
        #[arg(long)]
        trials: Option<usize>,
        /// Run replications on a single thread.
        #[arg(long)]
        serial: bool,
    },
    /// Run the myopic, T-step-ahead, and global-T-step strategies on one
    /// config and write an aligned comparison CSV.
    Compare {
        /// Experiment config (TOML); its `strategy`/`lookahead` are ignored.
        config: PathBuf,
        /// Output directory, created if missing.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Lookahead depth for the two lookahead strategies.
        #[arg(long, default_value_t = 2)]
        lookahead: usize,
        /// Override the config's RNG seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's replication count.
        #[arg(long)]
        replications: Option<usize>,
        /// Override the config's trial count.
        #[arg(long)]
        trials: Option<usize>,
        /// Also compute the utility-difference diagnostics (slower).
        #[arg(long)]
        with_diagnostics: bool,
        /// Run replications on a single thread.
        #[arg(long)]
        serial: bool,
    },
    /// Emit per-design utility curves at chosen trials plus the per-trial
    /// utility-difference series.
    Decompose {
        /// Experiment config (TOML); diagnostics are forced on.
        config: PathBuf,
        /// Output directory, created if missing.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Trials (1-based, comma-separated) at which to snapshot the mean
        /// per-design curves; numbers past the campaign length are ignored.
        #[arg(long, value_delimiter = ',', default_value = "5,25,55,85,115,145")]
        at: Vec<usize>,
        /// Override the config's RNG seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's replication count.
        #[arg(long)]
        replications: Option<usize>,
        /// Override the config's trial count.
        #[arg(long)]
        trials: Option<usize>,
        /// Run replications on a single thread.
        #[arg(long)]
        serial: bool,
    },
    /// Cross-check the lookahead solver against exhaustive policy
    /// enumeration on random small instances and print the worst deviation.
    Oracle {
        /// Number of random instances.
        #[arg(long, default_value_t = 100)]
        instances: usize,
        /// Check every lookahead depth from 1 to this.
        #[arg(long, default_value_t = 3)]
        max_lookahead: usize,
        /// RNG seed for instance generation.
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Largest acceptable |solver − enumeration|.
        #[arg(long, default_value_t = 1e-10)]
        tolerance: f64,
    },
    /// Write the three bundled preset configs.
    Presets {
        /// Directory to write the presets into, created if missing.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_class(&err))
        }
    }
}

/// Configuration mistakes are the user's to fix (exit 2); everything else
/// that can fail mid-run is a runtime/resource condition (exit 3).
fn exit_class(err: &Error) -> u8 {
    match err {
        Error::InvalidAxis { .. }
        | Error::InvalidConfig { .. }
        | Error::ConfigSyntax { .. }
        | Error::LengthMismatch { .. }
        | Error::NotNormalized { .. }
        | Error::InvalidWeight { .. }
        | Error::EmptyInput { .. }
        | Error::Domain { .. } => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn dispatch(command: Command) -> Result<(), Error> {
    match command {
        Command::Run {
            config,
            out,
            seed,
            replications,
            trials,
            serial,
        } => cmd_run(&config, &out, seed, replications, trials, serial),
        Command::Compare {
            config,
            out,
            lookahead,
            seed,
            replications,
            trials,
            with_diagnostics,
            serial,
        } => cmd_compare(
            &config,
            &out,
            lookahead,
            seed,
            replications,
            trials,
            with_diagnostics,
            serial,
        ),
        Command::Decompose {
            config,
            out,
            at,
            seed,
            replications,
            trials,
            serial,
        } => cmd_decompose(&config, &out, at, seed, replications, trials, serial),
        Command::Oracle {
            instances,
            max_lookahead,
            seed,
            tolerance,
        } => cmd_oracle(instances, max_lookahead, seed, tolerance),
        Command::Presets { out } => cmd_presets(&out),
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::ConfigSyntax {
        detail: format!("{}: {e}", path.display()),
    })?;
    parse_config(&text)
}

fn apply_overrides(
    config: &mut ExperimentConfig,
    seed: Option<u64>,
    replications: Option<usize>,
    trials: Option<usize>,
) {
    if let Some(s) = seed {
        config.run.seed = s;
    }
    if let Some(r) = replications {
        config.run.replications = r;
        if let Some(cap) = config.run.diagnostics_replications {
            config.run.diagnostics_replications = Some(cap.min(r));
        }
    }
    if let Some(t) = trials {
        config.run.trials = t;
    }
}

fn run_campaign(campaign: &Campaign, serial: bool) -> Result<MetricsTable, Error> {
    if serial {
        campaign.run_serial()
    } else {
        campaign.run()
    }
}

fn command_line() -> String {
    let mut parts = vec!["adlab".to_string()];
    parts.extend(std::env::args().skip(1));
    parts.join(" ")
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn write_outputs(
    out_dir: &Path,
    config: ExperimentConfig,
    files: Vec<(String, String)>,
) -> Result<(), Error> {
    fs::create_dir_all(out_dir)?;
    let mut names: Vec<String> = files.iter().map(|(name, _)| name.clone()).collect();
    let manifest_name = format!(
        "{}_{}_manifest.json",
        config.model.kind.slug(),
        config.run.strategy.slug()
    );
    names.push(manifest_name.clone());
    for (name, text) in &files {
        write_text(&out_dir.join(name), text)?;
    }
    let manifest = RunManifest::new(command_line(), config, names.clone(), unix_now());
    write_text(&out_dir.join(&manifest_name), &manifest.to_json())?;
    for name in &names {
        println!("wrote {}", out_dir.join(name).display());
    }
    Ok(())
}

fn cmd_run(
    config_path: &Path,
    out_dir: &Path,
    seed: Option<u64>,
    replications: Option<usize>,
    trials: Option<usize>,
    serial: bool,
) -> Result<(), Error> {
    let mut config = load_config(config_path)?;
    apply_overrides(&mut config, seed, replications, trials);
    let campaign = config.campaign()?;
    let table = run_campaign(&campaign, serial)?;
    let last = table.rows.last().expect("at least one trial");
    println!(
        "{} / {}: {} trials x {} replications, final info gain {:.4} nats",
        config.model.kind.slug(),
        config.run.strategy.slug(),
        config.run.trials,
        config.run.replications,
        last.info_gain
    );
    let stem = format!(
        "{}_{}",
        config.model.kind.slug(),
        config.run.strategy.slug()
    );
    write_outputs(
        out_dir,
        config,
        vec![(format!("{stem}_metrics.csv"), metrics_csv(&table))],
    )
}

#[allow(clippy::too_many_arguments)]
fn cmd_compare(
    config_path: &Path,
    out_dir: &Path,
    lookahead: usize,
    seed: Option<u64>,
    replications: Option<usize>,
    trials: Option<usize>,
    with_diagnostics: bool,
    serial: bool,
) -> Result<(), Error> {
    let mut base = load_config(config_path)?;
    apply_overrides(&mut base, seed, replications, trials);
    base.run.diagnostics = with_diagnostics;

    let mut campaigns = Vec::new();
    for (strategy, depth) in [
        (Strategy::Myopic, 1),
        (Strategy::TStepAhead, lookahead),
        (Strategy::GlobalTStep, lookahead),
    ] {
        let mut config = base.clone();
        config.run.strategy = strategy;
        config.run.lookahead = depth;
        campaigns.push(config.campaign()?);
    }
    let runs = if serial {
        // Strategy runs stay aligned regardless of execution mode; this only
        // switches each campaign to single-threaded replication execution.
        campaigns
            .iter()
            .map(|c| {
                Ok(adlab::StrategyRun {
                    strategy: c.plan().strategy,
                    lookahead: c.plan().horizon.lookahead(),
                    table: c.run_serial()?,
                })
            })
            .collect::<Result<Vec<_>, Error>>()?
    } else {
        compare_strategies(&campaigns)?
    };
    for run in &runs {
        let last = run.table.rows.last().expect("at least one trial");
        println!(
            "{} (lookahead {}): final info gain {:.4} nats",
            run.strategy.slug(),
            run.lookahead,
            last.info_gain
        );
    }
    let name = format!(
        "{}_comparison_{}step.csv",
        base.model.kind.slug(),
        lookahead
    );
    write_outputs(out_dir, base, vec![(name, comparison_csv(&runs))])
}

fn cmd_decompose(
    config_path: &Path,
    out_dir: &Path,
    at: Vec<usize>,
    seed: Option<u64>,
    replications: Option<usize>,
    trials: Option<usize>,
    serial: bool,
) -> Result<(), Error> {
    let mut config = load_config(config_path)?;
    apply_overrides(&mut config, seed, replications, trials);
    config.run.diagnostics = true;
    let campaign = config.campaign_with_curve_trials(at)?;
    let table = run_campaign(&campaign, serial)?;
    let peak = table
        .rows
        .iter()
        .filter_map(|r| r.diagnostics.as_ref().map(|d| (r.trial, d.ud_mean)))
        .fold((0usize, f64::NEG_INFINITY), |best, cur| {
            if cur.1 > best.1 {
                cur
            } else {
                best
            }
        });
    println!(
        "{}: peak mean utility difference {:.4e} nats at trial {}",
        config.model.kind.slug(),
        peak.1,
        peak.0
    );
    let stem = format!(
        "{}_{}",
        config.model.kind.slug(),
        config.run.strategy.slug()
    );
    write_outputs(
        out_dir,
        config,
        vec![
            (format!("{stem}_decomposition.csv"), metrics_csv(&table)),
            (format!("{stem}_curves.csv"), curves_csv(&table)),
        ],
    )
}

fn cmd_oracle(
    instances: usize,
    max_lookahead: usize,
    seed: u64,
    tolerance: f64,
) -> Result<(), Error> {
    let worst = oracle_battery(instances, max_lookahead, seed)?;
    println!(
        "max |solver - enumeration| = {worst:.3e} over {instances} instances, lookahead 1..={max_lookahead}"
    );
    if worst > tolerance {
        return Err(Error::CheckFailed {
            what: "solver-vs-enumeration",
            worst,
            tolerance,
        });
    }
    Ok(())
}

fn cmd_presets(out_dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(out_dir)?;
    for config in all_presets() {
        let path = out_dir.join(format!("{}.toml", config.model.kind.slug()));
        write_text(&path, &emit_config(&config))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
