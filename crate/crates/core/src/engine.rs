//! TTI-stepped episode loop, transmission outcome sampling, metrics, and
//! paired agent comparison.
//!
//! Every episode derives three random streams from its seed: channel
//! evolution, ACK draws, and the agent's private stream. The first two
//! depend only on the seed, so different agents run over bit-identical
//! channel realizations and outcome draws — gains versus OLLA are paired
//! per seed rather than averaged across independent runs. One uniform draw
//! is consumed per TTI for the ACK regardless of the chosen MCS, which
//! keeps the outcome stream aligned across agents.

use rayon::prelude::*;
use thiserror::Error;

use crate::agent::{Agent, AgentConfig, AgentKind};
use crate::buffer::Sample;
use crate::channel::{ChannelConfig, ChannelError, ChannelState};
use crate::mcs::{CqiTable, McsTable};
use crate::neural::FeatureVector;
use crate::olla::OllaConfig;
use crate::rng::{self, TraceHasher};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("channel config: {0}")]
    Channel(#[from] ChannelError),
    #[error("agent config: {0}")]
    Agent(String),
    #[error("olla config: {0}")]
    Olla(String),
    #[error("episode length {episode} TTIs must exceed the warm-up length {warmup} TTIs")]
    EpisodeTooShort { episode: u64, warmup: u64 },
    #[error("compare needs at least one seed")]
    NoSeeds,
}

/// Full scenario description for one episode or comparison.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub channel: ChannelConfig,
    pub mcs: McsTable,
    pub cqi: CqiTable,
    pub olla: OllaConfig,
    pub agent: AgentConfig,
    pub episode_ttis: u64,
    pub seed: u64,
    /// Divergence-reset budget before a run is reported as failed.
    pub divergence_limit: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            channel: ChannelConfig::default(),
            mcs: McsTable::default_nr(),
            cqi: CqiTable::default_nr(),
            olla: OllaConfig::default(),
            agent: AgentConfig::default(),
            episode_ttis: 200_000,
            seed: 1,
            divergence_limit: 100,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.channel.validate()?;
        self.agent.validate().map_err(ScenarioError::Agent)?;
        self.olla.validate().map_err(ScenarioError::Olla)?;
        let warmup = self.agent.buffer_capacity as u64;
        if self.episode_ttis <= warmup {
            return Err(ScenarioError::EpisodeTooShort {
                episode: self.episode_ttis,
                warmup,
            });
        }
        Ok(())
    }

    /// Label like `30kmh_rank2` used in CSV rows.
    pub fn scenario_label(&self) -> String {
        format!("{}kmh_rank{}", self.channel.speed_kmh, self.channel.rank)
    }
}

/// One per-TTI log row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TtiRecord {
    pub tti: u64,
    pub mcs: usize,
    pub sinr_eff_db: f64,
    pub ack: bool,
    pub tput: f64,
}

/// Outcome of one episode.
#[derive(Debug, Clone)]
pub struct EpisodeMetrics {
    pub agent: AgentKind,
    pub seed: u64,
    /// Per-TTI trace; empty unless requested.
    pub records: Vec<TtiRecord>,
    /// Mean throughput in bit/s/Hz summed over layers.
    pub mean_tput: f64,
    pub realized_bler: f64,
    pub mcs_histogram: Vec<u64>,
    pub ttis: u64,
    pub acks: u64,
    pub divergences: u64,
    pub channel_trace_hash: u64,
    pub final_olla_offset: f64,
    pub rank_deficient_soundings: u64,
}

impl EpisodeMetrics {
    pub fn exceeds_divergence_limit(&self, limit: u64) -> bool {
        self.divergences > limit
    }
}

/// Runs one episode of `cfg.episode_ttis` TTIs for one agent.
///
/// Per TTI: sound if scheduled, measure, select, draw the ACK against the
/// BLER of the chosen MCS at the true effective SINR, book the throughput,
/// feed the outcome back to the agent, retrain if due, advance the channel.
pub fn run_episode(
    cfg: &ScenarioConfig,
    kind: AgentKind,
    seed: u64,
    record_trace: bool,
) -> Result<EpisodeMetrics, ScenarioError> {
    cfg.validate()?;
    let mut channel = ChannelState::new(&cfg.channel, rng::stream(seed, "channel"));
    let mut tx_rng = rng::stream(seed, "tx");
    let agent_rng = rng::stream(seed, &format!("agent/{}", kind.label()));
    let feature_dim = FeatureVector::dim(cfg.channel.rx_antennas);
    let default_rate = 1.0 / cfg.channel.sounding_period_ttis() as f64;
    let mut agent = Agent::new(
        kind,
        &cfg.agent,
        &cfg.olla,
        cfg.mcs.count(),
        cfg.cqi.count(),
        feature_dim,
        default_rate,
        agent_rng,
    );

    let sounding_ttis = cfg.channel.sounding_period_ttis();
    let layers = cfg.channel.rank as f64;
    let mut hash = TraceHasher::new();
    let mut records = Vec::with_capacity(if record_trace {
        cfg.episode_ttis as usize
    } else {
        0
    });
    let mut total_tput = 0.0;
    let mut acks = 0u64;
    let mut hist = vec![0u64; cfg.mcs.count()];

    for t in 0..cfg.episode_ttis {
        if t % sounding_ttis == 0 {
            channel.sound();
        }
        let meas = channel.measure(&cfg.cqi);
        let mcs = agent.select_mcs(&meas, &cfg.mcs);
        let sinr_eff_db = channel.true_effective_sinr_db();
        hash.update_f64(sinr_eff_db);
        let bler = cfg.mcs.bler(mcs, sinr_eff_db);
        let draw: f64 = rand::Rng::gen(&mut tx_rng);
        let ack = draw >= bler;
        let tput = if ack { layers * cfg.mcs.se_of(mcs) } else { 0.0 };
        total_tput += tput;
        if ack {
            acks += 1;
        }
        hist[mcs - 1] += 1;
        if record_trace {
            records.push(TtiRecord {
                tti: t,
                mcs,
                sinr_eff_db,
                ack,
                tput,
            });
        }
        agent.observe(Sample::new(Agent::feature_vector(&meas, mcs), ack, t));
        agent.maybe_retrain(&cfg.mcs);
        channel.advance();
    }

    let ttis = cfg.episode_ttis;
    Ok(EpisodeMetrics {
        agent: kind,
        seed,
        records,
        mean_tput: total_tput / ttis as f64,
        realized_bler: (ttis - acks) as f64 / ttis as f64,
        mcs_histogram: hist,
        ttis,
        acks,
        divergences: agent.divergence_events(),
        channel_trace_hash: hash.finish(),
        final_olla_offset: agent.olla_state().offset,
        rank_deficient_soundings: channel.rank_deficient_soundings(),
    })
}

/// One row of a comparison or sweep summary.
#[derive(Debug, Clone)]
pub struct EpisodeSummary {
    pub scenario: String,
    pub agent: AgentKind,
    pub seed: u64,
    pub mean_tput: f64,
    pub realized_bler: f64,
    pub divergences: u64,
    pub channel_trace_hash: u64,
    pub gain_vs_olla: f64,
}

/// Per-agent gains over the OLLA baseline across the seed list.
#[derive(Debug, Clone)]
pub struct AgentGain {
    pub agent: AgentKind,
    pub per_seed_gain: Vec<f64>,
    pub mean_gain: f64,
    /// Seeds where this agent's throughput was >= the OLLA baseline.
    pub wins: usize,
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub scenario: String,
    /// Agents in output order (OLLA baseline always included).
    pub agents: Vec<AgentKind>,
    pub seeds: Vec<u64>,
    pub summaries: Vec<EpisodeSummary>,
    pub gains: Vec<AgentGain>,
    pub max_divergences: u64,
}

/// Runs every agent over every seed on shared channel/outcome streams and
/// reports throughput gains relative to the OLLA baseline.
pub fn compare(
    cfg: &ScenarioConfig,
    kinds: &[AgentKind],
    seeds: &[u64],
) -> Result<CompareReport, ScenarioError> {
    cfg.validate()?;
    if seeds.is_empty() {
        return Err(ScenarioError::NoSeeds);
    }
    let mut agents: Vec<AgentKind> = Vec::new();
    for k in kinds {
        if !agents.contains(k) {
            agents.push(*k);
        }
    }
    if !agents.contains(&AgentKind::Olla) {
        agents.push(AgentKind::Olla);
    }
    let jobs: Vec<(AgentKind, u64)> = seeds
        .iter()
        .flat_map(|&s| agents.iter().map(move |&k| (k, s)))
        .collect();
    let results: Result<Vec<EpisodeMetrics>, ScenarioError> = jobs
        .par_iter()
        .map(|&(k, s)| run_episode(cfg, k, s, false))
        .collect();
    let results = results?;

    // paired-stream discipline: identical channel realization per seed
    for (i, m) in results.iter().enumerate() {
        let seed = jobs[i].1;
        let reference = results
            .iter()
            .zip(&jobs)
            .find(|(_, j)| j.1 == seed)
            .map(|(r, _)| r.channel_trace_hash)
            .expect("at least one result per seed");
        assert_eq!(
            m.channel_trace_hash, reference,
            "channel stream diverged across agents for seed {seed}"
        );
    }

    let scenario = cfg.scenario_label();
    let olla_tput = |seed: u64| -> f64 {
        results
            .iter()
            .find(|m| m.seed == seed && m.agent == AgentKind::Olla)
            .expect("olla baseline always runs")
            .mean_tput
    };
    let mut summaries = Vec::with_capacity(results.len());
    for m in &results {
        let base = olla_tput(m.seed);
        summaries.push(EpisodeSummary {
            scenario: scenario.clone(),
            agent: m.agent,
            seed: m.seed,
            mean_tput: m.mean_tput,
            realized_bler: m.realized_bler,
            divergences: m.divergences,
            channel_trace_hash: m.channel_trace_hash,
            gain_vs_olla: if m.agent == AgentKind::Olla {
                0.0
            } else {
                (m.mean_tput - base) / base
            },
        });
    }
    let gains = agents
        .iter()
        .map(|&agent| {
            let per_seed_gain: Vec<f64> = seeds
                .iter()
                .map(|&s| {
                    summaries
                        .iter()
                        .find(|r| r.seed == s && r.agent == agent)
                        .expect("every job produced a summary")
                        .gain_vs_olla
                })
                .collect();
            let wins = per_seed_gain.iter().filter(|&&g| g >= 0.0).count();
            let mean_gain = per_seed_gain.iter().sum::<f64>() / per_seed_gain.len() as f64;
            AgentGain {
                agent,
                per_seed_gain,
                mean_gain,
                wins,
            }
        })
        .collect();
    let max_divergences = results.iter().map(|m| m.divergences).max().unwrap_or(0);
    Ok(CompareReport {
        scenario,
        agents,
        seeds: seeds.to_vec(),
        summaries,
        gains,
        max_divergences,
    })
}

/// Grid of scenarios for a sweep: every (speed, rank) cell runs a full
/// paired comparison over the seed list.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub speeds_kmh: Vec<f64>,
    pub ranks: Vec<usize>,
    pub seeds: Vec<u64>,
    pub agents: Vec<AgentKind>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            speeds_kmh: vec![3.0, 60.0],
            ranks: vec![1, 2, 3],
            seeds: (1..=10).collect(),
            agents: vec![AgentKind::Odl, AgentKind::QLearning, AgentKind::Olla],
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub speed_kmh: f64,
    pub rank: usize,
    pub report: CompareReport,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub cells: Vec<SweepCell>,
}

/// Runs the full speed x rank grid.
pub fn sweep(base: &ScenarioConfig, sw: &SweepConfig) -> Result<SweepReport, ScenarioError> {
    let mut cells = Vec::new();
    for &speed in &sw.speeds_kmh {
        for &rank in &sw.ranks {
            let mut cfg = base.clone();
            cfg.channel.speed_kmh = speed;
            cfg.channel.rank = rank;
            let report = compare(&cfg, &sw.agents, &sw.seeds)?;
            cells.push(SweepCell {
                speed_kmh: speed,
                rank,
                report,
            });
        }
    }
    Ok(SweepReport { cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcs::McsTable;

    /// Small, fast scenario for unit tests.
    fn tiny_config() -> ScenarioConfig {
        ScenarioConfig {
            channel: ChannelConfig {
                tx_antennas: 8,
                rx_antennas: 4,
                rank: 1,
                speed_kmh: 30.0,
                ..ChannelConfig::default()
            },
            agent: AgentConfig {
                buffer_capacity: 50,
                retraining_period: 25,
                steps: 4,
                batch: 16,
                hidden1: 8,
                hidden2: 4,
                ..AgentConfig::default()
            },
            episode_ttis: 800,
            ..ScenarioConfig::default()
        }
    }

    fn forced_table(floor_db: f64) -> McsTable {
        McsTable::new(
            crate::mcs::DEFAULT_SE.to_vec(),
            (0..28).map(|i| floor_db + 0.75 * i as f64).collect(),
            2.0,
        )
        .unwrap()
    }

    #[test]
    fn zero_bler_channel_converges_to_top_mcs() {
        let mut cfg = tiny_config();
        cfg.mcs = forced_table(-1e9); // bler is exactly 0 at any realistic sinr
        cfg.channel.speed_kmh = 0.0; // frozen features; only the mcs slot varies
        cfg.channel.sinr_std_db = 0.0;
        cfg.agent.steps = 10;
        cfg.agent.batch = 32;
        cfg.episode_ttis = 4000;
        let m = run_episode(&cfg, AgentKind::Odl, 3, true).unwrap();
        assert_eq!(m.realized_bler, 0.0);
        assert_eq!(m.acks, m.ttis);
        let k = cfg.mcs.count();
        for rec in &m.records[m.records.len() - 100..] {
            assert_eq!(rec.mcs, k, "odl should saturate at the top mcs");
            assert_eq!(cfg.mcs.oracle_mcs(rec.sinr_eff_db), k);
            assert_eq!(rec.tput, cfg.mcs.se_of(k) * cfg.channel.rank as f64);
        }
    }

    #[test]
    fn unit_bler_channel_starves_olla() {
        let mut cfg = tiny_config();
        cfg.mcs = forced_table(1e9); // bler is exactly 1 everywhere
        cfg.episode_ttis = 400;
        let m = run_episode(&cfg, AgentKind::Olla, 3, false).unwrap();
        assert_eq!(m.mean_tput, 0.0);
        assert_eq!(m.realized_bler, 1.0);
        assert!(
            m.final_olla_offset < -300.0,
            "offset should sink without bound, got {}",
            m.final_olla_offset
        );
    }

    #[test]
    fn episode_is_deterministic() {
        let cfg = tiny_config();
        let a = run_episode(&cfg, AgentKind::Odl, 11, true).unwrap();
        let b = run_episode(&cfg, AgentKind::Odl, 11, true).unwrap();
        assert_eq!(a.mean_tput.to_bits(), b.mean_tput.to_bits());
        assert_eq!(a.channel_trace_hash, b.channel_trace_hash);
        assert_eq!(a.records, b.records);
        let c = run_episode(&cfg, AgentKind::Odl, 12, false).unwrap();
        assert_ne!(a.channel_trace_hash, c.channel_trace_hash);
    }

    #[test]
    fn trace_totals_match_aggregates() {
        let cfg = tiny_config();
        let m = run_episode(&cfg, AgentKind::QLearning, 5, true).unwrap();
        let total: f64 = m.records.iter().map(|r| r.tput).sum();
        assert_eq!(total / m.ttis as f64, m.mean_tput);
        let hist_total: u64 = m.mcs_histogram.iter().sum();
        assert_eq!(hist_total, m.ttis);
        let acked = m.records.iter().filter(|r| r.ack).count() as u64;
        assert_eq!(acked, m.acks);
    }

    #[test]
    fn compare_pairs_streams_and_zeroes_olla_gain() {
        let cfg = tiny_config();
        let report = compare(&cfg, &[AgentKind::Odl, AgentKind::Olla], &[1, 2, 3]).unwrap();
        assert_eq!(report.agents.len(), 2);
        // olla gain identically zero
        let olla = report
            .gains
            .iter()
            .find(|g| g.agent == AgentKind::Olla)
            .unwrap();
        assert!(olla.per_seed_gain.iter().all(|&g| g == 0.0));
        assert_eq!(olla.wins, 3);
        // per-seed channel hashes agree across agents
        for &s in &report.seeds {
            let hashes: Vec<u64> = report
                .summaries
                .iter()
                .filter(|r| r.seed == s)
                .map(|r| r.channel_trace_hash)
                .collect();
            assert!(hashes.windows(2).all(|w| w[0] == w[1]));
        }
    }

    #[test]
    fn sweep_covers_the_grid() {
        let mut cfg = tiny_config();
        cfg.episode_ttis = 200;
        cfg.agent.buffer_capacity = 40;
        let sw = SweepConfig {
            speeds_kmh: vec![3.0, 60.0],
            ranks: vec![1, 2],
            seeds: vec![1, 2],
            agents: vec![AgentKind::Olla],
        };
        let report = sweep(&cfg, &sw).unwrap();
        assert_eq!(report.cells.len(), 4);
        assert_eq!(report.cells[0].report.summaries.len(), 2);
    }

    #[test]
    fn validate_rejects_short_episodes() {
        let mut cfg = tiny_config();
        cfg.episode_ttis = 10;
        assert!(matches!(
            cfg.validate(),
            Err(ScenarioError::EpisodeTooShort { .. })
        ));
    }
}
