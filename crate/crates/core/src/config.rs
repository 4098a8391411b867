//! Scenario config file parsing and echoing.
//!
//! The format is flat, line-oriented text:
//!
//! ```text
//! # comment ('#' or ';' starts a comment, inline allowed)
//! [section]
//! key = value          # scalars: numbers, booleans, names
//! list = 1, 2, 3       # lists: comma-separated
//! ```
//!
//! Sections and keys are listed in the crate README. Unknown or duplicate
//! keys are rejected with their line number. [`render_config`] writes the
//! fully resolved configuration back out in the same format; parsing that
//! echo reproduces the configuration exactly (floats are printed with
//! round-trip precision).

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::agent::AgentKind;
use crate::channel::ChannelMode;
use crate::engine::{ScenarioConfig, SweepConfig};
use crate::mcs::{CqiTable, McsTable, DEFAULT_THRESHOLD_FLOOR_DB, DEFAULT_THRESHOLD_STEP_DB};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config error at line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("config error at line {line}: unknown key '{key}' in section [{section}]")]
    UnknownKey {
        line: usize,
        section: String,
        key: String,
    },
    #[error("config error at line {line}: key '{key}' already set at line {previous}")]
    DuplicateKey {
        line: usize,
        previous: usize,
        key: String,
    },
    #[error("config error at line {line}: key '{key}': {message}")]
    BadValue {
        line: usize,
        key: String,
        message: String,
    },
    #[error("config error: {0}")]
    Invalid(String),
}

/// Everything a CLI invocation needs: the scenario plus the sweep grid.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub scenario: ScenarioConfig,
    pub sweep: SweepConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            scenario: ScenarioConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

struct RawConfig {
    // (section, key) -> (value, line)
    entries: HashMap<(String, String), (String, usize)>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = HashMap::new();
        let mut section = String::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw_line.find(['#', ';']) {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                    line: line_no,
                    message: format!("unterminated section header '{line}'"),
                })?;
                section = name.trim().to_string();
                if section.is_empty() {
                    return Err(ConfigError::Syntax {
                        line: line_no,
                        message: "empty section name".into(),
                    });
                }
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: line_no,
                message: format!("expected 'key = value', got '{line}'"),
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line: line_no,
                    message: "empty key".into(),
                });
            }
            if section.is_empty() {
                return Err(ConfigError::Syntax {
                    line: line_no,
                    message: format!("key '{key}' appears before any [section] header"),
                });
            }
            let slot = (section.clone(), key.clone());
            if let Some((_, previous)) = entries.get(&slot) {
                return Err(ConfigError::DuplicateKey {
                    line: line_no,
                    previous: *previous,
                    key: format!("{section}.{key}"),
                });
            }
            entries.insert(slot, (value.trim().to_string(), line_no));
        }
        Ok(RawConfig { entries })
    }

    fn take(&mut self, section: &str, key: &str) -> Option<(String, usize)> {
        self.entries.remove(&(section.to_string(), key.to_string()))
    }

    fn finish(self) -> Result<(), ConfigError> {
        if let Some(((section, key), (_, line))) = self
            .entries
            .into_iter()
            .min_by_key(|(_, (_, line))| *line)
        {
            return Err(ConfigError::UnknownKey { line, section, key });
        }
        Ok(())
    }
}

fn bad(line: usize, key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::BadValue {
        line,
        key: key.to_string(),
        message: message.into(),
    }
}

macro_rules! scalar_getter {
    ($name:ident, $ty:ty, $what:literal) => {
        fn $name(
            raw: &mut RawConfig,
            section: &str,
            key: &str,
            default: $ty,
        ) -> Result<$ty, ConfigError> {
            match raw.take(section, key) {
                None => Ok(default),
                Some((v, line)) => v
                    .parse::<$ty>()
                    .map_err(|_| bad(line, key, format!("expected {}, got '{v}'", $what))),
            }
        }
    };
}

scalar_getter!(get_f64, f64, "a number");
scalar_getter!(get_u64, u64, "a non-negative integer");
scalar_getter!(get_usize, usize, "a non-negative integer");
scalar_getter!(get_bool, bool, "true or false");

fn get_list<T, F>(
    raw: &mut RawConfig,
    section: &str,
    key: &str,
    default: Vec<T>,
    parse: F,
) -> Result<Vec<T>, ConfigError>
where
    F: Fn(&str) -> Option<T>,
{
    match raw.take(section, key) {
        None => Ok(default),
        Some((v, line)) => {
            let items: Vec<T> = v
                .split(',')
                .map(|t| {
                    parse(t.trim()).ok_or_else(|| bad(line, key, format!("bad list item '{}'", t.trim())))
                })
                .collect::<Result<_, _>>()?;
            if items.is_empty() {
                return Err(bad(line, key, "list must not be empty"));
            }
            Ok(items)
        }
    }
}

/// Parses a scenario file into a fully resolved [`SimConfig`], applying
/// defaults for absent keys and validating the result.
pub fn parse_config(text: &str) -> Result<SimConfig, ConfigError> {
    let mut raw = RawConfig::parse(text)?;
    let defaults = SimConfig::default();
    let mut cfg = defaults.clone();

    // [channel]
    let ch = &mut cfg.scenario.channel;
    if let Some((v, line)) = raw.take("channel", "mode") {
        ch.mode = match v.as_str() {
            "gauss_markov" => ChannelMode::GaussMarkov,
            "mimo" => ChannelMode::Mimo,
            other => return Err(bad(line, "mode", format!("expected gauss_markov or mimo, got '{other}'"))),
        };
    }
    ch.tx_antennas = get_usize(&mut raw, "channel", "tx_antennas", ch.tx_antennas)?;
    ch.rx_antennas = get_usize(&mut raw, "channel", "rx_antennas", ch.rx_antennas)?;
    ch.rank = get_usize(&mut raw, "channel", "rank", ch.rank)?;
    ch.carrier_hz = get_f64(&mut raw, "channel", "carrier_hz", ch.carrier_hz)?;
    ch.speed_kmh = get_f64(&mut raw, "channel", "speed_kmh", ch.speed_kmh)?;
    ch.tti_s = get_f64(&mut raw, "channel", "tti_s", ch.tti_s)?;
    ch.sounding_period_s = get_f64(&mut raw, "channel", "sounding_period_s", ch.sounding_period_s)?;
    ch.mean_sinr_db = get_f64(&mut raw, "channel", "mean_sinr_db", ch.mean_sinr_db)?;
    ch.sinr_std_db = get_f64(&mut raw, "channel", "sinr_std_db", ch.sinr_std_db)?;
    ch.noise_linear = get_f64(&mut raw, "channel", "noise_linear", ch.noise_linear)?;
    ch.tx_power_dbm = get_f64(&mut raw, "channel", "tx_power_dbm", ch.tx_power_dbm)?;
    ch.pathloss_db = get_f64(&mut raw, "channel", "pathloss_db", ch.pathloss_db)?;

    // [mcs] — explicit lists win over the evenly spaced threshold ramp
    let se_line = raw.take("mcs", "se");
    let thr_line = raw.take("mcs", "bler_thresholds_db");
    let slope = get_f64(&mut raw, "mcs", "bler_slope", cfg.scenario.mcs.slope())?;
    let floor = get_f64(&mut raw, "mcs", "threshold_floor_db", DEFAULT_THRESHOLD_FLOOR_DB)?;
    let step = get_f64(&mut raw, "mcs", "threshold_step_db", DEFAULT_THRESHOLD_STEP_DB)?;
    let parse_floats = |entry: Option<(String, usize)>, key: &str| -> Result<Option<Vec<f64>>, ConfigError> {
        match entry {
            None => Ok(None),
            Some((v, line)) => {
                let items: Vec<f64> = v
                    .split(',')
                    .map(|t| {
                        t.trim()
                            .parse::<f64>()
                            .map_err(|_| bad(line, key, format!("bad list item '{}'", t.trim())))
                    })
                    .collect::<Result<_, _>>()?;
                Ok(Some(items))
            }
        }
    };
    let se = parse_floats(se_line, "se")?.unwrap_or_else(|| crate::mcs::DEFAULT_SE.to_vec());
    let thresholds = parse_floats(thr_line, "bler_thresholds_db")?
        .unwrap_or_else(|| (0..se.len()).map(|i| floor + step * i as f64).collect());
    cfg.scenario.mcs = McsTable::new(se, thresholds, slope)
        .map_err(|e| ConfigError::Invalid(format!("[mcs] {e}")))?;

    // [cqi]
    let cqi_count = get_usize(&mut raw, "cqi", "count", cfg.scenario.cqi.count())?;
    let cqi_floor = get_f64(&mut raw, "cqi", "floor_db", -8.0)?;
    let cqi_step = get_f64(&mut raw, "cqi", "step_db", 2.0)?;
    cfg.scenario.cqi = CqiTable::new(cqi_count, cqi_floor, cqi_step)
        .map_err(|e| ConfigError::Invalid(format!("[cqi] {e}")))?;

    // [olla]
    let ol = &mut cfg.scenario.olla;
    ol.initial_offset = get_f64(&mut raw, "olla", "initial_offset", ol.initial_offset)?;
    ol.step = get_f64(&mut raw, "olla", "step", ol.step)?;
    ol.target_bler = get_f64(&mut raw, "olla", "target_bler", ol.target_bler)?;

    // [agent]
    let ag = &mut cfg.scenario.agent;
    ag.retraining_period = get_u64(&mut raw, "agent", "retraining_period", ag.retraining_period)?;
    ag.steps = get_usize(&mut raw, "agent", "steps", ag.steps)?;
    ag.batch = get_usize(&mut raw, "agent", "batch", ag.batch)?;
    ag.learning_rate = get_f64(&mut raw, "agent", "learning_rate", ag.learning_rate)?;
    ag.epsilon = get_f64(&mut raw, "agent", "epsilon", ag.epsilon)?;
    ag.buffer_capacity = get_usize(&mut raw, "agent", "buffer_capacity", ag.buffer_capacity)?;
    ag.hidden1 = get_usize(&mut raw, "agent", "hidden1", ag.hidden1)?;
    ag.hidden2 = get_usize(&mut raw, "agent", "hidden2", ag.hidden2)?;
    ag.warmup_train_every_tti = get_bool(
        &mut raw,
        "agent",
        "warmup_train_every_tti",
        ag.warmup_train_every_tti,
    )?;
    if let Some((v, line)) = raw.take("agent", "subsample_rate") {
        ag.subsample_rate = if v == "auto" {
            None
        } else {
            Some(v.parse::<f64>().map_err(|_| {
                bad(line, "subsample_rate", format!("expected a number or 'auto', got '{v}'"))
            })?)
        };
    }

    // [run]
    cfg.scenario.episode_ttis = get_u64(&mut raw, "run", "episode_ttis", cfg.scenario.episode_ttis)?;
    cfg.scenario.seed = get_u64(&mut raw, "run", "seed", cfg.scenario.seed)?;
    cfg.scenario.divergence_limit =
        get_u64(&mut raw, "run", "divergence_limit", cfg.scenario.divergence_limit)?;

    // [sweep]
    cfg.sweep.speeds_kmh = get_list(&mut raw, "sweep", "speeds_kmh", cfg.sweep.speeds_kmh, |t| {
        t.parse().ok()
    })?;
    cfg.sweep.ranks = get_list(&mut raw, "sweep", "ranks", cfg.sweep.ranks, |t| t.parse().ok())?;
    cfg.sweep.seeds = get_list(&mut raw, "sweep", "seeds", cfg.sweep.seeds, |t| t.parse().ok())?;
    cfg.sweep.agents = get_list(&mut raw, "sweep", "agents", cfg.sweep.agents, AgentKind::parse)?;

    raw.finish()?;
    cfg.scenario
        .validate()
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    Ok(cfg)
}

fn write_list<T: std::fmt::Display>(out: &mut String, key: &str, items: &[T]) {
    let _ = write!(out, "{key} = ");
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "{item}");
    }
    out.push('\n');
}

/// Renders the fully resolved configuration in the input format. Parsing
/// the output reproduces `cfg` exactly.
pub fn render_config(cfg: &SimConfig) -> String {
    let mut out = String::from("# effective scenario configuration\n");
    let ch = &cfg.scenario.channel;
    out.push_str("\n[channel]\n");
    let _ = writeln!(
        out,
        "mode = {}",
        match ch.mode {
            ChannelMode::GaussMarkov => "gauss_markov",
            ChannelMode::Mimo => "mimo",
        }
    );
    let _ = writeln!(out, "tx_antennas = {}", ch.tx_antennas);
    let _ = writeln!(out, "rx_antennas = {}", ch.rx_antennas);
    let _ = writeln!(out, "rank = {}", ch.rank);
    let _ = writeln!(out, "carrier_hz = {}", ch.carrier_hz);
    let _ = writeln!(out, "speed_kmh = {}", ch.speed_kmh);
    let _ = writeln!(out, "tti_s = {}", ch.tti_s);
    let _ = writeln!(out, "sounding_period_s = {}", ch.sounding_period_s);
    let _ = writeln!(out, "mean_sinr_db = {}", ch.mean_sinr_db);
    let _ = writeln!(out, "sinr_std_db = {}", ch.sinr_std_db);
    let _ = writeln!(out, "noise_linear = {}", ch.noise_linear);
    let _ = writeln!(out, "tx_power_dbm = {}", ch.tx_power_dbm);
    let _ = writeln!(out, "pathloss_db = {}", ch.pathloss_db);

    out.push_str("\n[mcs]\n");
    write_list(&mut out, "se", cfg.scenario.mcs.se_values());
    write_list(
        &mut out,
        "bler_thresholds_db",
        cfg.scenario.mcs.threshold_values(),
    );
    let _ = writeln!(out, "bler_slope = {}", cfg.scenario.mcs.slope());

    out.push_str("\n[cqi]\n");
    let _ = writeln!(out, "count = {}", cfg.scenario.cqi.count());
    let (floor, step) = cfg.scenario.cqi.quantizer_params();
    let _ = writeln!(out, "floor_db = {floor}");
    let _ = writeln!(out, "step_db = {step}");

    let ol = &cfg.scenario.olla;
    out.push_str("\n[olla]\n");
    let _ = writeln!(out, "initial_offset = {}", ol.initial_offset);
    let _ = writeln!(out, "step = {}", ol.step);
    let _ = writeln!(out, "target_bler = {}", ol.target_bler);

    let ag = &cfg.scenario.agent;
    out.push_str("\n[agent]\n");
    let _ = writeln!(out, "retraining_period = {}", ag.retraining_period);
    let _ = writeln!(out, "steps = {}", ag.steps);
    let _ = writeln!(out, "batch = {}", ag.batch);
    let _ = writeln!(out, "learning_rate = {}", ag.learning_rate);
    let _ = writeln!(out, "epsilon = {}", ag.epsilon);
    let _ = writeln!(out, "buffer_capacity = {}", ag.buffer_capacity);
    match ag.subsample_rate {
        Some(r) => {
            let _ = writeln!(out, "subsample_rate = {r}");
        }
        None => {
            let _ = writeln!(out, "subsample_rate = auto");
        }
    }
    let _ = writeln!(out, "hidden1 = {}", ag.hidden1);
    let _ = writeln!(out, "hidden2 = {}", ag.hidden2);
    let _ = writeln!(out, "warmup_train_every_tti = {}", ag.warmup_train_every_tti);

    out.push_str("\n[run]\n");
    let _ = writeln!(out, "episode_ttis = {}", cfg.scenario.episode_ttis);
    let _ = writeln!(out, "seed = {}", cfg.scenario.seed);
    let _ = writeln!(out, "divergence_limit = {}", cfg.scenario.divergence_limit);

    out.push_str("\n[sweep]\n");
    write_list(&mut out, "speeds_kmh", &cfg.sweep.speeds_kmh);
    write_list(&mut out, "ranks", &cfg.sweep.ranks);
    write_list(&mut out, "seeds", &cfg.sweep.seeds);
    let agent_names: Vec<&str> = cfg.sweep.agents.iter().map(|a| a.label()).collect();
    write_list(&mut out, "agents", &agent_names);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg.scenario.episode_ttis, 200_000);
        assert_eq!(cfg.scenario.agent.buffer_capacity, 500);
        assert_eq!(cfg.sweep.ranks, vec![1, 2, 3]);
    }

    #[test]
    fn parses_overrides_and_comments() {
        let text = "\
# scenario
[channel]
speed_kmh = 60   ; brisk
rank = 3

[run]
episode_ttis = 5000
seed = 9
";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.scenario.channel.speed_kmh, 60.0);
        assert_eq!(cfg.scenario.channel.rank, 3);
        assert_eq!(cfg.scenario.seed, 9);
    }

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let text = "[channel]\nspede_kmh = 3\n";
        let err = parse_config(text).unwrap_err();
        match err {
            ConfigError::UnknownKey { line, key, section } => {
                assert_eq!(line, 2);
                assert_eq!(key, "spede_kmh");
                assert_eq!(section, "channel");
            }
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn duplicate_key_is_rejected() {
        let text = "[run]\nseed = 1\nseed = 2\n";
        assert!(matches!(
            parse_config(text).unwrap_err(),
            ConfigError::DuplicateKey { line: 3, .. }
        ));
    }

    #[test]
    fn bad_value_names_key_and_line() {
        let text = "[run]\nepisode_ttis = soon\n";
        match parse_config(text).unwrap_err() {
            ConfigError::BadValue { line, key, .. } => {
                assert_eq!(line, 2);
                assert_eq!(key, "episode_ttis");
            }
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn key_before_section_is_rejected() {
        assert!(matches!(
            parse_config("seed = 1\n").unwrap_err(),
            ConfigError::Syntax { line: 1, .. }
        ));
    }

    #[test]
    fn semantic_validation_runs() {
        let text = "[run]\nepisode_ttis = 100\n"; // below warm-up length
        assert!(matches!(
            parse_config(text).unwrap_err(),
            ConfigError::Invalid(_)
        ));
    }

    #[test]
    fn render_parse_round_trip() {
        let text = "\
[channel]
mode = gauss_markov
speed_kmh = 3
rank = 2
sinr_std_db = 7.25

[agent]
subsample_rate = 0.125
epsilon = 0.05

[sweep]
seeds = 4, 5, 6
agents = odl, olla
";
        let cfg = parse_config(text).unwrap();
        let echo = render_config(&cfg);
        let reparsed = parse_config(&echo).unwrap();
        assert_eq!(render_config(&reparsed), echo);
        assert_eq!(reparsed.scenario.channel.speed_kmh, 3.0);
        assert_eq!(reparsed.scenario.agent.subsample_rate, Some(0.125));
        assert_eq!(reparsed.sweep.seeds, vec![4, 5, 6]);
        assert_eq!(
            reparsed.sweep.agents,
            vec![AgentKind::Odl, AgentKind::Olla]
        );
    }

    #[test]
    fn custom_mcs_lists_round_trip() {
        let text = "\
[mcs]
se = 1, 2, 4
bler_thresholds_db = -3, 0, 3
bler_slope = 1.5
";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.scenario.mcs.count(), 3);
        assert_eq!(cfg.scenario.mcs.se_of(3), 4.0);
        let echo = render_config(&cfg);
        let reparsed = parse_config(&echo).unwrap();
        assert_eq!(reparsed.scenario.mcs, cfg.scenario.mcs);
    }

    #[test]
    fn non_monotone_se_override_is_invalid() {
        let text = "[mcs]\nse = 2, 1\nbler_thresholds_db = 0, 1\n";
        assert!(matches!(
            parse_config(text).unwrap_err(),
            ConfigError::Invalid(_)
        ));
    }
}
