//! `linksim` — scenario runner for the link-adaptation simulator.
//!
//! Subcommands:
//! * `run`     one episode for one agent; writes the per-TTI log and a summary.
//! * `compare` every agent over a seed list on paired streams; gains vs OLLA.
//! * `sweep`   the full speed x rank x seed grid; writes the gain matrix.
//!
//! Exit codes: 0 success, 2 config error, 3 divergence budget exceeded.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use linksim_core::agent::AgentKind;
use linksim_core::config::{parse_config, render_config, SimConfig};
use linksim_core::engine::{self, SweepCell};
use linksim_core::report;

/// Environment variable that overrides the output directory.
const OUTDIR_ENV: &str = "LINKSIM_OUTDIR";

#[derive(Parser)]
#[command(name = "linksim", about = "link adaptation simulator", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overridden by LINKSIM_OUTDIR).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for episode execution (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Override the seed list, comma-separated.
    #[arg(long)]
    seeds: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single episode and write its per-TTI log.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Agent: odl, qlearning, or olla.
        #[arg(long, default_value = "odl")]
        agent: String,
        /// Episode seed (defaults to [run] seed from the config).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare agents under paired seeds in the configured scenario.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        /// Agents to compare, comma-separated (defaults to [sweep] agents).
        #[arg(long)]
        agents: Option<String>,
    },
    /// Run the full speed x rank x seed grid from the [sweep] section.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code())
        }
    }
}

#[derive(Debug)]
struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            code: 2,
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            code: 1,
        }
    }

    fn divergence(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            code: 3,
        }
    }

    fn exit_code(&self) -> u8 {
        self.code
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

fn dispatch(cli: &Cli) -> Result<ExitCode, CliError> {
    match &cli.command {
        Command::Run {
            common,
            agent,
            seed,
        } => cmd_run(common, agent, *seed),
        Command::Compare { common, agents } => cmd_compare(common, agents.as_deref()),
        Command::Sweep { common } => cmd_sweep(common),
    }
}

fn setup(common: &CommonArgs) -> Result<(SimConfig, PathBuf), CliError> {
    let text = fs::read_to_string(&common.config).map_err(|e| {
        CliError::config(format!(
            "config error: cannot read {}: {e}",
            common.config.display()
        ))
    })?;
    let cfg = parse_config(&text).map_err(|e| CliError::config(e.to_string()))?;
    let out = std::env::var_os(OUTDIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| common.out.clone());
    fs::create_dir_all(&out).map_err(|e| {
        CliError::config(format!("config error: cannot create {}: {e}", out.display()))
    })?;
    if common.threads > 0 {
        // best effort; fails harmlessly if a pool already exists (tests)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(common.threads)
            .build_global();
    }
    fs::write(out.join("effective_config.cfg"), render_config(&cfg))
        .map_err(|e| CliError::runtime(format!("cannot write config echo: {e}")))?;
    Ok((cfg, out))
}

fn parse_seed_list(text: &str) -> Result<Vec<u64>, CliError> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<u64>()
                .map_err(|_| CliError::config(format!("config error: bad seed '{}'", t.trim())))
        })
        .collect()
}

fn parse_agent_list(text: &str) -> Result<Vec<AgentKind>, CliError> {
    text.split(',')
        .map(|t| {
            AgentKind::parse(t)
                .ok_or_else(|| CliError::config(format!("config error: unknown agent '{}'", t.trim())))
        })
        .collect()
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

fn check_divergences(max: u64, limit: u64) -> Result<(), CliError> {
    if max > limit {
        return Err(CliError::divergence(format!(
            "divergence resets ({max}) exceeded the configured limit ({limit})"
        )));
    }
    Ok(())
}

fn cmd_run(common: &CommonArgs, agent: &str, seed: Option<u64>) -> Result<ExitCode, CliError> {
    let (cfg, out) = setup(common)?;
    let kind = AgentKind::parse(agent)
        .ok_or_else(|| CliError::config(format!("config error: unknown agent '{agent}'")))?;
    let seed = seed.unwrap_or(cfg.scenario.seed);
    let metrics = engine::run_episode(&cfg.scenario, kind, seed, true)
        .map_err(|e| CliError::config(format!("config error: {e}")))?;
    check_divergences(metrics.divergences, cfg.scenario.divergence_limit)?;

    let log_name = format!("tti_log_{}_seed{}.csv", kind.label(), seed);
    write_file(&out.join(log_name), &report::tti_log_csv(&metrics))?;
    let summary = engine::EpisodeSummary {
        scenario: cfg.scenario.scenario_label(),
        agent: kind,
        seed,
        mean_tput: metrics.mean_tput,
        realized_bler: metrics.realized_bler,
        divergences: metrics.divergences,
        channel_trace_hash: metrics.channel_trace_hash,
        gain_vs_olla: 0.0,
    };
    write_file(&out.join("summary.csv"), &report::summary_csv([&summary]))?;
    println!(
        "{} seed {}: mean_tput {:.4} bit/s/Hz, bler {:.4}, {} TTIs",
        kind.label(),
        seed,
        metrics.mean_tput,
        metrics.realized_bler,
        metrics.ttis
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_compare(common: &CommonArgs, agents: Option<&str>) -> Result<ExitCode, CliError> {
    let (cfg, out) = setup(common)?;
    let kinds = match agents {
        Some(a) => parse_agent_list(a)?,
        None => cfg.sweep.agents.clone(),
    };
    let seeds = match &common.seeds {
        Some(s) => parse_seed_list(s)?,
        None => cfg.sweep.seeds.clone(),
    };
    let report_data = engine::compare(&cfg.scenario, &kinds, &seeds)
        .map_err(|e| CliError::config(format!("config error: {e}")))?;
    check_divergences(report_data.max_divergences, cfg.scenario.divergence_limit)?;

    write_file(
        &out.join("summary.csv"),
        &report::summary_csv(report_data.summaries.iter()),
    )?;
    let cell = SweepCell {
        speed_kmh: cfg.scenario.channel.speed_kmh,
        rank: cfg.scenario.channel.rank,
        report: report_data.clone(),
    };
    write_file(&out.join("gains.csv"), &report::gain_matrix_csv(&[cell]))?;
    for gain in &report_data.gains {
        println!(
            "{}: mean gain vs olla {:+.2}% ({}/{} seeds >= olla)",
            gain.agent.label(),
            100.0 * gain.mean_gain,
            gain.wins,
            seeds.len()
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(common: &CommonArgs) -> Result<ExitCode, CliError> {
    let (mut cfg, out) = setup(common)?;
    if let Some(s) = &common.seeds {
        cfg.sweep.seeds = parse_seed_list(s)?;
    }
    let sweep_report = engine::sweep(&cfg.scenario, &cfg.sweep)
        .map_err(|e| CliError::config(format!("config error: {e}")))?;
    let max_div = sweep_report
        .cells
        .iter()
        .map(|c| c.report.max_divergences)
        .max()
        .unwrap_or(0);
    check_divergences(max_div, cfg.scenario.divergence_limit)?;

    let all_rows: Vec<_> = sweep_report
        .cells
        .iter()
        .flat_map(|c| c.report.summaries.iter())
        .collect();
    write_file(
        &out.join("summary.csv"),
        &report::summary_csv(all_rows.into_iter()),
    )?;
    write_file(
        &out.join("gain_matrix.csv"),
        &report::gain_matrix_csv(&sweep_report.cells),
    )?;
    for cell in &sweep_report.cells {
        let line: Vec<String> = cell
            .report
            .gains
            .iter()
            .map(|g| format!("{} {:+.2}%", g.agent.label(), 100.0 * g.mean_gain))
            .collect();
        println!(
            "{} km/h rank {}: {}",
            cell.speed_kmh,
            cell.rank,
            line.join(", ")
        );
    }
    Ok(ExitCode::SUCCESS)
}
