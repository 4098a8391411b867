//! Time-evolving channel with sounding-based stale measurements.
//!
//! Two modes share one interface:
//!
//! * `GaussMarkov` — each receive antenna carries an AR(1) SINR process in
//!   dB. Fast; drives the large seed sweeps.
//! * `Mimo` — a full R x T complex channel matrix with AR(1) entry
//!   evolution, SVD precoding computed at sounding instants, and MMSE
//!   post-detection SINR. The transmitter applies the precoder computed
//!   from the *sounded* matrix to the *current* matrix, which is where the
//!   channel-aging penalty comes from.
//!
//! The AR(1) coefficient per TTI is `rho = exp(-tti / tau_c)` with the
//! classic coherence time `tau_c = 0.423 * c / (v * f_c)`; a stationary
//! user has `rho = 1` and the channel freezes.

use nalgebra::{Complex, DMatrix};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::mcs::CqiTable;

/// Propagation speed used for Doppler/coherence conversions, m/s.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Singular values below `max_sv * RANK_TOL` count as rank deficiencies.
const RANK_TOL: f64 = 1e-12;

/// Effective SINR floor (linear) so dB conversion stays finite.
const MIN_SINR_LINEAR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelMode {
    GaussMarkov,
    Mimo,
}

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("antenna/rank constraint violated: need rank <= rx <= tx, got rank={rank}, rx={rx}, tx={tx}")]
    BadDimensions { rank: usize, rx: usize, tx: usize },
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("sounding period {sounding_s} s is not an integer multiple of the tti {tti_s} s")]
    SoundingNotMultiple { sounding_s: f64, tti_s: f64 },
    #[error("speed must be non-negative, got {0} km/h")]
    NegativeSpeed(f64),
}

/// Channel and radio parameters for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub mode: ChannelMode,
    pub tx_antennas: usize,
    pub rx_antennas: usize,
    pub rank: usize,
    pub carrier_hz: f64,
    /// User speed in km/h (converted internally).
    pub speed_kmh: f64,
    pub tti_s: f64,
    pub sounding_period_s: f64,
    /// Mean per-antenna SINR, dB (gauss_markov mode).
    pub mean_sinr_db: f64,
    /// Stationary per-antenna SINR std, dB (gauss_markov mode).
    pub sinr_std_db: f64,
    /// Receiver noise power, linear (mimo mode).
    pub noise_linear: f64,
    pub tx_power_dbm: f64,
    pub pathloss_db: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            mode: ChannelMode::GaussMarkov,
            tx_antennas: 64,
            rx_antennas: 4,
            rank: 2,
            carrier_hz: 3.5e9,
            speed_kmh: 30.0,
            tti_s: 1e-3,
            sounding_period_s: 5e-3,
            mean_sinr_db: 5.0,
            sinr_std_db: 6.0,
            noise_linear: 1.0,
            tx_power_dbm: 40.0,
            pathloss_db: 100.0,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.rank >= 1 && self.rank <= self.rx_antennas && self.rx_antennas <= self.tx_antennas)
        {
            return Err(ChannelError::BadDimensions {
                rank: self.rank,
                rx: self.rx_antennas,
                tx: self.tx_antennas,
            });
        }
        for (name, v) in [
            ("tti_s", self.tti_s),
            ("sounding_period_s", self.sounding_period_s),
            ("carrier_hz", self.carrier_hz),
            ("noise_linear", self.noise_linear),
        ] {
            if !(v > 0.0) {
                return Err(ChannelError::NonPositive(name));
            }
        }
        if self.speed_kmh < 0.0 {
            return Err(ChannelError::NegativeSpeed(self.speed_kmh));
        }
        if self.sinr_std_db < 0.0 {
            return Err(ChannelError::NonPositive("sinr_std_db"));
        }
        let ratio = self.sounding_period_s / self.tti_s;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
            return Err(ChannelError::SoundingNotMultiple {
                sounding_s: self.sounding_period_s,
                tti_s: self.tti_s,
            });
        }
        Ok(())
    }

    pub fn speed_mps(&self) -> f64 {
        self.speed_kmh / 3.6
    }

    /// Maximum Doppler shift, Hz.
    pub fn doppler_hz(&self) -> f64 {
        self.speed_mps() * self.carrier_hz / SPEED_OF_LIGHT
    }

    /// Coherence time `0.423 / f_d`, seconds. Infinite when stationary.
    pub fn coherence_time_s(&self) -> f64 {
        let fd = self.doppler_hz();
        if fd > 0.0 {
            0.423 / fd
        } else {
            f64::INFINITY
        }
    }

    /// Per-TTI AR(1) correlation.
    pub fn ar1_rho(&self) -> f64 {
        if self.speed_kmh > 0.0 {
            (-self.tti_s / self.coherence_time_s()).exp()
        } else {
            1.0
        }
    }

    pub fn sounding_period_ttis(&self) -> u64 {
        (self.sounding_period_s / self.tti_s).round() as u64
    }

    pub fn rsrp_dbm(&self) -> f64 {
        self.tx_power_dbm - self.pathloss_db
    }
}

/// What the base station sees: the frozen sounded per-antenna SINRs, the
/// CQI quantization of their mean, the measurement age, and RSRP.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub sounded_sinr_db: Vec<f64>,
    pub cqi: usize,
    pub age_ms: f64,
    pub rsrp_dbm: f64,
}

#[derive(Debug, Clone)]
enum ModeState {
    GaussMarkov {
        true_sinr_db: Vec<f64>,
        snapshot_db: Vec<f64>,
    },
    Mimo {
        h: DMatrix<Complex<f64>>,
        h_sounded: DMatrix<Complex<f64>>,
        precoder: DMatrix<Complex<f64>>,
    },
}

/// Owned per-episode channel process.
#[derive(Debug, Clone)]
pub struct ChannelState {
    cfg: ChannelConfig,
    rho: f64,
    state: ModeState,
    tti: u64,
    last_sounding_tti: Option<u64>,
    rng: ChaCha8Rng,
    rank_deficient_soundings: u64,
}

impl ChannelState {
    /// Draws the initial channel from its stationary distribution.
    pub fn new(cfg: &ChannelConfig, mut rng: ChaCha8Rng) -> Self {
        cfg.validate().expect("channel config must be validated");
        let state = match cfg.mode {
            ChannelMode::GaussMarkov => {
                let true_sinr_db = (0..cfg.rx_antennas)
                    .map(|_| cfg.mean_sinr_db + cfg.sinr_std_db * normal(&mut rng))
                    .collect();
                ModeState::GaussMarkov {
                    true_sinr_db,
                    snapshot_db: vec![0.0; cfg.rx_antennas],
                }
            }
            ChannelMode::Mimo => {
                let h = random_gaussian_matrix(cfg.rx_antennas, cfg.tx_antennas, &mut rng);
                ModeState::Mimo {
                    h_sounded: h.clone(),
                    precoder: DMatrix::zeros(cfg.tx_antennas, cfg.rank),
                    h,
                }
            }
        };
        ChannelState {
            cfg: cfg.clone(),
            rho: cfg.ar1_rho(),
            state,
            tti: 0,
            last_sounding_tti: None,
            rng,
            rank_deficient_soundings: 0,
        }
    }

    pub fn tti(&self) -> u64 {
        self.tti
    }

    pub fn rank_deficient_soundings(&self) -> u64 {
        self.rank_deficient_soundings
    }

    /// One-TTI AR(1) step on every antenna (or matrix entry); increments
    /// the TTI index. With `rho = 1` the state is carried over unchanged.
    pub fn advance(&mut self) {
        let rho = self.rho;
        let noise_gain = (1.0 - rho * rho).max(0.0).sqrt();
        match &mut self.state {
            ModeState::GaussMarkov { true_sinr_db, .. } => {
                let mu = self.cfg.mean_sinr_db;
                let sigma = self.cfg.sinr_std_db;
                for g in true_sinr_db.iter_mut() {
                    let eps: f64 = normal(&mut self.rng);
                    *g = mu + rho * (*g - mu) + noise_gain * sigma * eps;
                }
            }
            ModeState::Mimo { h, .. } => {
                // unit-variance complex entries: re/im each N(0, 1/2)
                let comp_std = noise_gain * std::f64::consts::FRAC_1_SQRT_2;
                for e in h.iter_mut() {
                    let re: f64 = normal(&mut self.rng);
                    let im: f64 = normal(&mut self.rng);
                    *e = Complex::new(rho * e.re + comp_std * re, rho * e.im + comp_std * im);
                }
            }
        }
        self.tti += 1;
    }

    /// Copies the live channel into the sounded snapshot; in mimo mode also
    /// recomputes the precoder from the snapshot. Must be called on the
    /// sounding schedule.
    pub fn sound(&mut self) {
        assert!(
            self.tti % self.cfg.sounding_period_ttis() == 0,
            "sound() called off-schedule at tti {}",
            self.tti
        );
        match &mut self.state {
            ModeState::GaussMarkov {
                true_sinr_db,
                snapshot_db,
            } => {
                snapshot_db.copy_from_slice(true_sinr_db);
            }
            ModeState::Mimo {
                h,
                h_sounded,
                precoder,
            } => {
                h_sounded.copy_from(h);
                let (w, deficient) = svd_precoder(h_sounded, self.cfg.rank);
                *precoder = w;
                if deficient > 0 {
                    self.rank_deficient_soundings += 1;
                }
            }
        }
        self.last_sounding_tti = Some(self.tti);
    }

    /// Age of the sounded snapshot in TTIs.
    pub fn age_ttis(&self) -> u64 {
        let last = self
            .last_sounding_tti
            .expect("measure/age requires at least one sounding");
        self.tti - last
    }

    /// The scalar SINR that drives block errors this TTI.
    ///
    /// gauss_markov: mean of the current per-antenna dB values minus a
    /// `10*log10(rank)` power-splitting penalty. mimo: mean over layers of
    /// the MMSE post-detection SINR of the *current* matrix under the
    /// *sounded* precoder.
    pub fn true_effective_sinr_db(&self) -> f64 {
        match &self.state {
            ModeState::GaussMarkov { true_sinr_db, .. } => {
                let mean = true_sinr_db.iter().sum::<f64>() / true_sinr_db.len() as f64;
                mean - 10.0 * (self.cfg.rank as f64).log10()
            }
            ModeState::Mimo { h, precoder, .. } => {
                let per_layer = post_detection_sinr_db(h, precoder, self.cfg.noise_linear);
                per_layer.iter().sum::<f64>() / per_layer.len() as f64
            }
        }
    }

    /// The stale measurement the agent sees: frozen sounded per-antenna
    /// SINRs, their CQI, the snapshot age in ms, and RSRP.
    pub fn measure(&self, cqi: &CqiTable) -> Measurement {
        let sounded_sinr_db = match &self.state {
            ModeState::GaussMarkov { snapshot_db, .. } => snapshot_db.clone(),
            ModeState::Mimo { h_sounded, .. } => {
                // per receive antenna: row energy over the noise floor
                (0..h_sounded.nrows())
                    .map(|r| {
                        let p: f64 = h_sounded.row(r).iter().map(|e| e.norm_sqr()).sum();
                        10.0 * (p / self.cfg.noise_linear).max(MIN_SINR_LINEAR).log10()
                    })
                    .collect()
            }
        };
        let age_ms = self.age_ttis() as f64 * self.cfg.tti_s * 1e3;
        let mean_db = sounded_sinr_db.iter().sum::<f64>() / sounded_sinr_db.len() as f64;
        Measurement {
            cqi: cqi.cqi_from_sinr(mean_db),
            sounded_sinr_db,
            age_ms,
            rsrp_dbm: self.cfg.rsrp_dbm(),
        }
    }

    /// Test hook: the live per-antenna SINRs (gauss_markov mode).
    pub fn true_sinr_db(&self) -> Option<&[f64]> {
        match &self.state {
            ModeState::GaussMarkov { true_sinr_db, .. } => Some(true_sinr_db),
            ModeState::Mimo { .. } => None,
        }
    }

    /// Test hook: live matrix and sounded precoder (mimo mode).
    pub fn mimo_parts(&self) -> Option<(&DMatrix<Complex<f64>>, &DMatrix<Complex<f64>>)> {
        match &self.state {
            ModeState::Mimo { h, precoder, .. } => Some((h, precoder)),
            ModeState::GaussMarkov { .. } => None,
        }
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn random_gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex<f64>> {
    DMatrix::from_fn(rows, cols, |_, _| {
        Complex::new(
            std::f64::consts::FRAC_1_SQRT_2 * normal(rng),
            std::f64::consts::FRAC_1_SQRT_2 * normal(rng),
        )
    })
}

/// First `rank` right singular vectors of `h` (descending singular value),
/// as the columns of a T x rank precoder. Returns the precoder and the
/// number of requested directions whose singular value was numerically
/// zero; those columns are completed to an orthonormal basis.
pub fn svd_precoder(h: &DMatrix<Complex<f64>>, rank: usize) -> (DMatrix<Complex<f64>>, usize) {
    let t = h.ncols();
    assert!(rank >= 1 && rank <= h.nrows().min(t), "rank out of range");
    let svd = h.clone().svd(false, true);
    let v_t = svd.v_t.expect("svd computed with right singular vectors");
    // order by descending singular value (defensive; also fixes ties)
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .expect("singular values are finite")
    });
    let max_sv = svd.singular_values[order[0]].max(f64::MIN_POSITIVE);
    let mut w = DMatrix::zeros(t, rank);
    let mut deficient = 0;
    for (col, &idx) in order.iter().take(rank).enumerate() {
        if svd.singular_values[idx] <= max_sv * RANK_TOL {
            deficient += 1;
        }
        for r in 0..t {
            w[(r, col)] = v_t[(idx, r)].conj();
        }
    }
    if deficient > 0 || !is_orthonormal(&w, 1e-9) {
        w = orthonormal_completion(&w);
    }
    (w, deficient)
}

fn is_orthonormal(w: &DMatrix<Complex<f64>>, tol: f64) -> bool {
    let gram = w.adjoint() * w;
    let eye = DMatrix::<Complex<f64>>::identity(w.ncols(), w.ncols());
    (gram - eye).norm() <= tol
}

/// Modified Gram-Schmidt over the columns of `w`, substituting canonical
/// basis vectors for directions that collapse.
fn orthonormal_completion(w: &DMatrix<Complex<f64>>) -> DMatrix<Complex<f64>> {
    let t = w.nrows();
    let rank = w.ncols();
    let mut out = DMatrix::<Complex<f64>>::zeros(t, rank);
    let mut kept = 0;
    let mut candidates: Vec<DMatrix<Complex<f64>>> = (0..rank)
        .map(|c| DMatrix::from_column_slice(t, 1, w.column(c).as_slice()))
        .collect();
    for e in 0..t {
        let mut unit = DMatrix::zeros(t, 1);
        unit[(e, 0)] = Complex::new(1.0, 0.0);
        candidates.push(unit);
    }
    for cand in candidates {
        if kept == rank {
            break;
        }
        let mut v = cand;
        for c in 0..kept {
            let col = out.column(c);
            let proj: Complex<f64> = col.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
            for r in 0..t {
                let sub = proj * out[(r, c)];
                v[(r, 0)] -= sub;
            }
        }
        let norm = v.norm();
        if norm > 1e-9 {
            for r in 0..t {
                out[(r, kept)] = v[(r, 0)] / Complex::new(norm, 0.0);
            }
            kept += 1;
        }
    }
    assert_eq!(kept, rank, "orthonormal completion failed");
    out
}

/// Per-layer post-detection SINR of an MMSE receiver, in dB, from the
/// diagonal of `(I + A^H A / noise)^-1` with `A = H W`.
pub fn post_detection_sinr_db(
    h: &DMatrix<Complex<f64>>,
    w: &DMatrix<Complex<f64>>,
    noise_linear: f64,
) -> Vec<f64> {
    assert!(noise_linear > 0.0, "noise power must be positive");
    assert_eq!(h.ncols(), w.nrows(), "precoder shape mismatch");
    let a = h * w;
    let layers = a.ncols();
    let gram = a.adjoint() * &a * Complex::new(1.0 / noise_linear, 0.0);
    let b = DMatrix::<Complex<f64>>::identity(layers, layers) + gram;
    let inv = b
        .try_inverse()
        .expect("I + A^H A / noise is positive definite");
    (0..layers)
        .map(|l| {
            let sinr = 1.0 / inv[(l, l)].re - 1.0;
            10.0 * sinr.max(MIN_SINR_LINEAR).log10()
        })
        .collect()
}
