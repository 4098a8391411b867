//! Outer-loop link adaptation: an additive offset on the CQI-implied MCS,
//! stepped up on ACK and down on NACK so the long-run block error rate
//! settles at the configured target.

use crate::mcs::base_mcs_of_cqi;

/// OLLA parameters: initial offset, step size, target BLER.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OllaConfig {
    pub initial_offset: f64,
    pub step: f64,
    pub target_bler: f64,
}

impl Default for OllaConfig {
    fn default() -> Self {
        OllaConfig {
            initial_offset: 0.0,
            step: 0.1,
            target_bler: 0.1,
        }
    }
}

impl OllaConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.step > 0.0) {
            return Err(format!("olla step must be positive, got {}", self.step));
        }
        if !(self.target_bler > 0.0 && self.target_bler < 1.0) {
            return Err(format!(
                "olla target_bler must be in (0,1), got {}",
                self.target_bler
            ));
        }
        Ok(())
    }
}

/// Mutable OLLA state: the offset in MCS-index units plus its fixed
/// step size and BLER target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OllaState {
    pub offset: f64,
    step: f64,
    target_bler: f64,
}

impl OllaState {
    pub fn new(cfg: &OllaConfig) -> Self {
        OllaState {
            offset: cfg.initial_offset,
            step: cfg.step,
            target_bler: cfg.target_bler,
        }
    }

    /// MCS choice: `clamp(round(base_mcs(cqi) + offset), 1, k)`.
    pub fn select(&self, cqi: usize, k: usize, n: usize) -> usize {
        let raw = (base_mcs_of_cqi(cqi, k, n) + self.offset).round();
        if raw < 1.0 {
            1
        } else if raw > k as f64 {
            k
        } else {
            raw as usize
        }
    }

    /// ACK moves the offset up by one step; NACK moves it down by
    /// `step * (1 - b) / b`, so drift is zero exactly when the NACK rate
    /// equals the target `b`.
    pub fn update(&mut self, ack: bool) {
        if ack {
            self.offset += self.step;
        } else {
            self.offset -= self.step * (1.0 - self.target_bler) / self.target_bler;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(offset: f64) -> OllaState {
        OllaState {
            offset,
            step: 0.1,
            target_bler: 0.1,
        }
    }

    #[test]
    fn select_round_and_clamp() {
        assert_eq!(state(0.4).select(10, 28, 15), 19); // round(18.357 + 0.4)
        assert_eq!(state(100.0).select(15, 28, 15), 28);
        assert_eq!(state(-100.0).select(1, 28, 15), 1);
    }

    #[test]
    fn update_steps() {
        let mut s = state(0.0);
        s.update(true);
        assert!((s.offset - 0.1).abs() < 1e-15);
        let mut s = state(0.0);
        s.update(false);
        assert!((s.offset + 0.9).abs() < 1e-12);
    }

    #[test]
    fn zero_drift_at_target_nack_rate() {
        // Expected drift per step at NACK probability beta:
        // (1-beta)*d - beta*d*(1-b)/b; zero iff beta == b.
        let d = 0.1;
        let b = 0.1;
        let drift = |beta: f64| (1.0 - beta) * d - beta * d * (1.0 - b) / b;
        assert!(drift(b).abs() < 1e-15);
        assert!(drift(b + 0.05) < 0.0);
        assert!(drift(b - 0.05) > 0.0);
    }

    #[test]
    fn update_ignores_everything_but_ack() {
        let mut a = state(0.3);
        let mut b = state(0.3);
        a.update(true);
        b.update(true);
        assert_eq!(a, b);
    }
}
