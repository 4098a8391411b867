//! MCS-selection agents and their shared lifecycle.
//!
//! All agents start in a warm-up phase driven by OLLA: every TTI the OLLA
//! choice is transmitted, the outcome is pushed into the sample buffer, and
//! the offset is updated. Once the buffer has filled to capacity the
//! learning agents switch to their own selection rule:
//!
//! * `Odl` picks `argmax_m p(ack | m, features) * SE(m)` from the sigmoid
//!   network — the expected-throughput maximizer.
//! * `QLearning` picks `argmax_m q(m, features)` from the identity-head
//!   network trained on `SE * ack` rewards.
//! * `Olla` keeps running the classical outer loop forever.
//!
//! Online samples are admitted to the buffer at the subsampling rate, and
//! the network is refit every `retraining_period` TTIs from its current
//! weights (warm start).

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::buffer::{Sample, SampleBuffer};
use crate::channel::Measurement;
use crate::mcs::McsTable;
use crate::neural::{ActivationSpec, FeatureVector, LossKind, MlpModel};
use crate::olla::{OllaConfig, OllaState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AgentKind {
    Odl,
    QLearning,
    Olla,
}

impl AgentKind {
    pub fn label(&self) -> &'static str {
        match self {
            AgentKind::Odl => "odl",
            AgentKind::QLearning => "qlearning",
            AgentKind::Olla => "olla",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "odl" => Some(AgentKind::Odl),
            "qlearning" | "q-learning" | "ql" => Some(AgentKind::QLearning),
            "olla" => Some(AgentKind::Olla),
            _ => None,
        }
    }
}

/// Hyperparameters shared by the learning agents.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    /// Retraining period N, in TTIs.
    pub retraining_period: u64,
    /// Adam steps per retraining.
    pub steps: usize,
    /// Mini-batch size.
    pub batch: usize,
    pub learning_rate: f64,
    /// Exploration probability; 0 disables exploration.
    pub epsilon: f64,
    /// Sample buffer capacity U. Warm-up lasts until the buffer fills.
    pub buffer_capacity: usize,
    /// Online buffer admission probability. `None` uses the inverse
    /// sounding period in TTIs.
    pub subsample_rate: Option<f64>,
    pub hidden1: usize,
    pub hidden2: usize,
    /// Train every TTI during warm-up instead of on the retraining grid.
    pub warmup_train_every_tti: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            retraining_period: 50,
            steps: 10,
            batch: 64,
            learning_rate: 1e-3,
            epsilon: 0.0,
            buffer_capacity: 500,
            subsample_rate: None,
            hidden1: 32,
            hidden2: 16,
            warmup_train_every_tti: false,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.retraining_period < 1 {
            return Err("retraining_period must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(format!("epsilon must be in [0,1], got {}", self.epsilon));
        }
        if self.buffer_capacity < 2 {
            return Err("buffer_capacity must be >= 2".into());
        }
        if self.hidden1 < 1 || self.hidden2 < 1 {
            return Err("hidden layer widths must be >= 1".into());
        }
        if let Some(r) = self.subsample_rate {
            if !(r > 0.0 && r <= 1.0) {
                return Err(format!("subsample_rate must be in (0,1], got {r}"));
            }
        }
        if !(self.learning_rate > 0.0) {
            return Err("learning_rate must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Warmup,
    Online,
}

/// 1-based argmax with ties broken toward the smaller index.
pub fn argmax_scores(scores: &[f64]) -> usize {
    let mut best = 1;
    let mut best_score = f64::NEG_INFINITY;
    for (i, &s) in scores.iter().enumerate() {
        if s > best_score {
            best_score = s;
            best = i + 1;
        }
    }
    best
}

/// One agent instance bound to one episode.
#[derive(Debug)]
pub struct Agent {
    kind: AgentKind,
    cfg: AgentConfig,
    model: Option<MlpModel>,
    olla: OllaState,
    buffer: SampleBuffer,
    phase: Phase,
    observed_ttis: u64,
    retrain_count: u64,
    divergence_fallbacks: u64,
    subsample_rate: f64,
    mcs_count: usize,
    cqi_count: usize,
    rng: ChaCha8Rng,
    feature_scratch: Vec<f64>,
    score_scratch: Vec<f64>,
}

impl Agent {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kind: AgentKind,
        cfg: &AgentConfig,
        olla_cfg: &OllaConfig,
        mcs_count: usize,
        cqi_count: usize,
        feature_dim: usize,
        default_subsample_rate: f64,
        mut rng: ChaCha8Rng,
    ) -> Self {
        cfg.validate().expect("agent config must be validated");
        let model = match kind {
            AgentKind::Odl => Some(MlpModel::new(
                feature_dim,
                cfg.hidden1,
                cfg.hidden2,
                ActivationSpec::odl(),
                &mut rng,
            )),
            AgentKind::QLearning => Some(MlpModel::new(
                feature_dim,
                cfg.hidden1,
                cfg.hidden2,
                ActivationSpec::qlearning(),
                &mut rng,
            )),
            AgentKind::Olla => None,
        };
        let subsample_rate = cfg.subsample_rate.unwrap_or(default_subsample_rate);
        assert!(subsample_rate > 0.0 && subsample_rate <= 1.0);
        Agent {
            kind,
            cfg: cfg.clone(),
            model,
            olla: OllaState::new(olla_cfg),
            buffer: SampleBuffer::new(cfg.buffer_capacity),
            phase: Phase::Warmup,
            observed_ttis: 0,
            retrain_count: 0,
            divergence_fallbacks: 0,
            subsample_rate,
            mcs_count,
            cqi_count,
            rng,
            feature_scratch: Vec::with_capacity(feature_dim),
            score_scratch: Vec::with_capacity(mcs_count),
        }
    }

    pub fn kind(&self) -> AgentKind {
        self.kind
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn olla_state(&self) -> &OllaState {
        &self.olla
    }

    pub fn buffer(&self) -> &SampleBuffer {
        &self.buffer
    }

    pub fn model(&self) -> Option<&MlpModel> {
        self.model.as_ref()
    }

    pub fn retrain_count(&self) -> u64 {
        self.retrain_count
    }

    /// Selection-rule fallbacks plus training divergence resets.
    pub fn divergence_events(&self) -> u64 {
        self.divergence_fallbacks
            + self.model.as_ref().map_or(0, |m| m.divergence_resets())
    }

    /// Raw features for a measurement and a candidate MCS:
    /// `[sinr_1..sinr_R, cqi, age_ms, rsrp_dbm, mcs]`.
    pub fn feature_vector(meas: &Measurement, mcs: usize) -> FeatureVector {
        let mut v = Vec::with_capacity(meas.sounded_sinr_db.len() + 4);
        v.extend_from_slice(&meas.sounded_sinr_db);
        v.push(meas.cqi as f64);
        v.push(meas.age_ms);
        v.push(meas.rsrp_dbm);
        v.push(mcs as f64);
        FeatureVector::new(v)
    }

    /// Chooses the MCS for this TTI.
    pub fn select_mcs(&mut self, meas: &Measurement, table: &McsTable) -> usize {
        let k = self.mcs_count;
        if self.phase == Phase::Warmup || self.kind == AgentKind::Olla {
            return self.olla.select(meas.cqi, k, self.cqi_count);
        }
        if self.cfg.epsilon > 0.0 && self.rng.gen::<f64>() < self.cfg.epsilon {
            return self.rng.gen_range(1..=k);
        }
        let model = self.model.as_mut().expect("learning agents carry a model");
        self.feature_scratch.clear();
        self.feature_scratch.extend_from_slice(&meas.sounded_sinr_db);
        self.feature_scratch.push(meas.cqi as f64);
        self.feature_scratch.push(meas.age_ms);
        self.feature_scratch.push(meas.rsrp_dbm);
        self.feature_scratch.push(0.0);
        let mcs_slot = self.feature_scratch.len() - 1;
        self.score_scratch.clear();
        for m in 1..=k {
            self.feature_scratch[mcs_slot] = m as f64;
            let out = model.predict(&self.feature_scratch);
            if !out.is_finite() {
                self.divergence_fallbacks += 1;
                return self.olla.select(meas.cqi, k, self.cqi_count);
            }
            self.score_scratch.push(match self.kind {
                AgentKind::Odl => out * table.se_of(m),
                AgentKind::QLearning => out,
                AgentKind::Olla => unreachable!(),
            });
        }
        argmax_scores(&self.score_scratch)
    }

    /// Books the transmission outcome. Warm-up always pushes and steps
    /// OLLA; going online happens exactly when the buffer first fills.
    /// Online, samples are admitted at the subsampling rate and only the
    /// OLLA agent keeps stepping its offset.
    pub fn observe(&mut self, sample: Sample) {
        self.observed_ttis += 1;
        let ack = sample.ack;
        match self.phase {
            Phase::Warmup => {
                self.buffer.push(sample);
                self.olla.update(ack);
                if self.buffer.is_full() {
                    self.phase = Phase::Online;
                }
            }
            Phase::Online => {
                self.buffer
                    .maybe_push(sample, self.subsample_rate, &mut self.rng);
                if self.kind == AgentKind::Olla {
                    self.olla.update(ack);
                }
            }
        }
    }

    /// Retrains on the configured grid (and, if enabled, every warm-up
    /// TTI). No-op for the OLLA agent.
    pub fn maybe_retrain(&mut self, table: &McsTable) {
        if self.model.is_none() || self.buffer.is_empty() {
            return;
        }
        let on_grid = self.observed_ttis % self.cfg.retraining_period == 0;
        let warmup_extra = self.phase == Phase::Warmup && self.cfg.warmup_train_every_tti;
        if !(on_grid || warmup_extra) {
            return;
        }
        let kind = match self.kind {
            AgentKind::Odl => LossKind::LogLoss,
            AgentKind::QLearning => LossKind::Mse,
            AgentKind::Olla => unreachable!("olla agents return early"),
        };
        let model = self.model.as_mut().expect("checked above");
        model.fit(
            &self.buffer,
            kind,
            table,
            self.cfg.steps,
            self.cfg.batch,
            self.cfg.learning_rate,
            &mut self.rng,
        );
        self.retrain_count += 1;
    }
}
