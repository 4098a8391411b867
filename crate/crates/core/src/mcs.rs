//! MCS and CQI tables: spectral efficiencies, the synthetic logistic BLER
//! model, and the brute-force expected-throughput MCS oracle.
//!
//! MCS and CQI indices are 1-based throughout (`1..=k`, `1..=n`), matching
//! how link-adaptation loops usually count them.

use thiserror::Error;

/// Spectral efficiencies (bit/s/Hz) of the NR 64-QAM MCS ladder. The
/// standard 29-entry ladder has one non-monotone step at the 16QAM/64QAM
/// boundary; the lower of the two entries is dropped so the table is
/// strictly increasing, leaving 28 values.
pub const DEFAULT_SE: [f64; 28] = [
    0.2344, 0.3066, 0.3770, 0.4902, 0.6016, 0.7402, 0.8770, 1.0273, 1.1758,
    1.3262, 1.3281, 1.4766, 1.6953, 1.9141, 2.1602, 2.4063, 2.5703, 2.7305,
    3.0293, 3.3223, 3.6094, 3.9023, 4.2129, 4.5234, 4.8164, 5.1152, 5.3320,
    5.5547,
];

/// Default BLER mid-point of MCS 1, in dB.
pub const DEFAULT_THRESHOLD_FLOOR_DB: f64 = -6.5;
/// Default spacing between adjacent BLER mid-points, in dB.
pub const DEFAULT_THRESHOLD_STEP_DB: f64 = 0.75;
/// Default logistic slope, per dB.
pub const DEFAULT_BLER_SLOPE: f64 = 2.0;

#[derive(Debug, Error, PartialEq)]
pub enum TableError {
    #[error("mcs table needs at least 2 entries, got {0}")]
    TooFewMcs(usize),
    #[error("spectral efficiencies must be positive and strictly increasing (violated at index {0})")]
    SeNotIncreasing(usize),
    #[error("bler thresholds must be strictly increasing (violated at index {0})")]
    ThresholdNotIncreasing(usize),
    #[error("se and threshold sequences must have equal length ({se} vs {thr})")]
    LengthMismatch { se: usize, thr: usize },
    #[error("bler slope must be positive, got {0}")]
    NonPositiveSlope(f64),
    #[error("cqi table needs at least 2 levels, got {0}")]
    TooFewCqi(usize),
    #[error("cqi step must be positive, got {0}")]
    NonPositiveCqiStep(f64),
}

/// MCS ladder with per-entry spectral efficiency and a logistic BLER curve.
#[derive(Debug, Clone, PartialEq)]
pub struct McsTable {
    se: Vec<f64>,
    threshold_db: Vec<f64>,
    slope: f64,
}

impl McsTable {
    pub fn new(se: Vec<f64>, threshold_db: Vec<f64>, slope: f64) -> Result<Self, TableError> {
        if se.len() < 2 {
            return Err(TableError::TooFewMcs(se.len()));
        }
        if se.len() != threshold_db.len() {
            return Err(TableError::LengthMismatch {
                se: se.len(),
                thr: threshold_db.len(),
            });
        }
        if se[0] <= 0.0 {
            return Err(TableError::SeNotIncreasing(0));
        }
        for i in 1..se.len() {
            if se[i] <= se[i - 1] {
                return Err(TableError::SeNotIncreasing(i));
            }
        }
        for i in 1..threshold_db.len() {
            if threshold_db[i] <= threshold_db[i - 1] {
                return Err(TableError::ThresholdNotIncreasing(i));
            }
        }
        if !(slope > 0.0) {
            return Err(TableError::NonPositiveSlope(slope));
        }
        Ok(McsTable {
            se,
            threshold_db,
            slope,
        })
    }

    /// Default 28-entry table: NR spectral efficiencies, thresholds
    /// `-6.5 + 0.75*(m-1)` dB, slope 2 per dB.
    pub fn default_nr() -> Self {
        Self::with_thresholds(
            DEFAULT_THRESHOLD_FLOOR_DB,
            DEFAULT_THRESHOLD_STEP_DB,
            DEFAULT_BLER_SLOPE,
        )
    }

    /// Default spectral efficiencies with a custom evenly spaced threshold ramp.
    pub fn with_thresholds(floor_db: f64, step_db: f64, slope: f64) -> Self {
        let thresholds = (0..DEFAULT_SE.len())
            .map(|i| floor_db + step_db * i as f64)
            .collect();
        Self::new(DEFAULT_SE.to_vec(), thresholds, slope)
            .expect("default table constants are valid")
    }

    /// Number of MCS entries `k`.
    pub fn count(&self) -> usize {
        self.se.len()
    }

    /// Spectral efficiency of `mcs` (1-based).
    pub fn se_of(&self, mcs: usize) -> f64 {
        assert!(
            mcs >= 1 && mcs <= self.se.len(),
            "mcs index {mcs} out of range 1..={}",
            self.se.len()
        );
        self.se[mcs - 1]
    }

    /// BLER mid-point of `mcs` in dB.
    pub fn threshold_of(&self, mcs: usize) -> f64 {
        assert!(mcs >= 1 && mcs <= self.threshold_db.len());
        self.threshold_db[mcs - 1]
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn se_values(&self) -> &[f64] {
        &self.se
    }

    pub fn threshold_values(&self) -> &[f64] {
        &self.threshold_db
    }

    /// Block error probability of `mcs` at the given effective SINR:
    /// `1 / (1 + exp(slope * (sinr - threshold)))`. Decreasing in SINR,
    /// increasing in MCS at fixed SINR.
    pub fn bler(&self, mcs: usize, sinr_eff_db: f64) -> f64 {
        let x = self.slope * (sinr_eff_db - self.threshold_of(mcs));
        1.0 / (1.0 + x.exp())
    }

    /// Expected spectral efficiency `se * (1 - bler)` of `mcs` at the given SINR.
    pub fn expected_se(&self, mcs: usize, sinr_eff_db: f64) -> f64 {
        self.se_of(mcs) * (1.0 - self.bler(mcs, sinr_eff_db))
    }

    /// Brute-force expected-throughput maximizer: evaluates every MCS and
    /// returns the argmax of `se * (1 - bler)`. Ties go to the smaller index.
    pub fn oracle_mcs(&self, sinr_eff_db: f64) -> usize {
        let mut best = 1;
        let mut best_score = self.expected_se(1, sinr_eff_db);
        for m in 2..=self.count() {
            let score = self.expected_se(m, sinr_eff_db);
            if score > best_score {
                best = m;
                best_score = score;
            }
        }
        best
    }
}

/// Uniform SINR-interval quantizer for CQI reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CqiTable {
    count: usize,
    floor_db: f64,
    step_db: f64,
}

impl CqiTable {
    pub fn new(count: usize, floor_db: f64, step_db: f64) -> Result<Self, TableError> {
        if count < 2 {
            return Err(TableError::TooFewCqi(count));
        }
        if !(step_db > 0.0) {
            return Err(TableError::NonPositiveCqiStep(step_db));
        }
        Ok(CqiTable {
            count,
            floor_db,
            step_db,
        })
    }

    /// 15 levels, 2 dB wide, starting at -8 dB.
    pub fn default_nr() -> Self {
        Self::new(15, -8.0, 2.0).expect("default cqi constants are valid")
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// (floor_db, step_db) of the quantizer.
    pub fn quantizer_params(&self) -> (f64, f64) {
        (self.floor_db, self.step_db)
    }

    /// Quantizes a measured SINR into a CQI index:
    /// `clamp(floor((sinr - floor_db) / step_db) + 1, 1, n)`.
    pub fn cqi_from_sinr(&self, sinr_meas_db: f64) -> usize {
        let raw = ((sinr_meas_db - self.floor_db) / self.step_db).floor() + 1.0;
        if raw < 1.0 {
            1
        } else if raw >= self.count as f64 {
            self.count
        } else {
            raw as usize
        }
    }
}

/// Linear map from a CQI index onto the MCS axis, as a real number:
/// `1 + (cqi - 1) * (k - 1) / (n - 1)`. CQI 1 maps to MCS 1.0 and CQI n to
/// MCS k exactly; the OLLA offset is added to this before rounding.
pub fn base_mcs_of_cqi(cqi: usize, k: usize, n: usize) -> f64 {
    debug_assert!(cqi >= 1 && cqi <= n, "cqi {cqi} out of range 1..={n}");
    1.0 + (cqi as f64 - 1.0) * (k as f64 - 1.0) / (n as f64 - 1.0)
}
