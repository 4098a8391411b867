// temporary diagnostic
use linksim_core::agent::{AgentConfig, AgentKind};
use linksim_core::channel::ChannelConfig;
use linksim_core::engine::{run_episode, ScenarioConfig};
use linksim_core::mcs::McsTable;

fn main() {
    let mut cfg = ScenarioConfig {
        channel: ChannelConfig { tx_antennas: 8, rx_antennas: 4, rank: 1, speed_kmh: 0.0, sinr_std_db: 0.0, ..ChannelConfig::default() },
        agent: AgentConfig { buffer_capacity: 50, retraining_period: 25, steps: 10, batch: 32, hidden1: 8, hidden2: 4, ..AgentConfig::default() },
        episode_ttis: 4000,
        ..ScenarioConfig::default()
    };
    cfg.mcs = McsTable::new(
        linksim_core::mcs::DEFAULT_SE.to_vec(),
        (0..28).map(|i| -1e9 + 0.75 * i as f64).collect(),
        2.0,
    ).unwrap();
    let m = run_episode(&cfg, AgentKind::Odl, 3, true).unwrap();
    println!("bler={} acks={}/{}", m.realized_bler, m.acks, m.ttis);
    let tail: Vec<usize> = m.records[m.records.len()-100..].iter().map(|r| r.mcs).collect();
    println!("last 100 mcs: {:?}", tail);
}
