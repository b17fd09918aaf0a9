//! Cluster channel model.
//!
//! One `ClusterScenario` is one coherence block: a rank-1 LOS BS-RIS link
//! `a b^H` between uniform linear arrays, Rayleigh RIS-UE fading `h_k`
//! with uniformly spread pathloss, and the derived post-MRC quantities.
//! With MRC applied at the base station the received model collapses to
//! the effective channels `hhat_k = conj(b) ∘ h_k`, amplitude gains
//! `beta_k = sqrt(N_r^2 l_BS l_hk P L)`, and noise power `N_r σ_n²`;
//! nothing of size `N_r L` is ever materialized.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::risopt::PhaseShifts;
use crate::{Error, Result};

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Static parameters of a cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    /// Base-station antennas N_r.
    pub n_bs_antennas: usize,
    /// RIS elements N_s.
    pub n_ris_elements: usize,
    /// Active UEs K.
    pub n_ues: usize,
    /// Spreading length L.
    pub spreading_length: usize,
    /// BS-RIS pathloss, dB.
    pub bs_ris_pathloss_db: f64,
    /// Mean RIS-UE pathloss, dB.
    pub ue_pathloss_mean_db: f64,
    /// Half-width s of the uniform pathloss spread, dB.
    pub ue_pathloss_spread_db: f64,
    /// Per-UE transmit power, dBm (equal for all UEs).
    pub tx_power_dbm: f64,
    /// Noise power at the BS, dBm.
    pub noise_power_dbm: f64,
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_bs_antennas < 1
            || self.n_ris_elements < 1
            || self.n_ues < 1
            || self.spreading_length < 1
        {
            return Err(Error::InvalidConfig(
                "antenna, element, UE, and spreading counts must all be >= 1".into(),
            ));
        }
        if self.ue_pathloss_spread_db < 0.0 {
            return Err(Error::InvalidConfig("pathloss spread must be >= 0 dB".into()));
        }
        Ok(())
    }
}

/// One channel realization with all derived post-MRC quantities.
#[derive(Debug, Clone)]
pub struct ClusterScenario {
    /// BS array response a, unit-modulus entries of length N_r.
    pub bs_steering: DVector<Complex64>,
    /// RIS array response b, unit-modulus entries of length N_s.
    pub ris_steering: DVector<Complex64>,
    /// RIS-UE small-scale fading h_k.
    pub fading: Vec<DVector<Complex64>>,
    /// RIS-UE pathlosses, dB.
    pub pathlosses_db: Vec<f64>,
    /// Effective channels hhat_k = conj(b) ∘ h_k.
    pub effective_channels: Vec<DVector<Complex64>>,
    /// Amplitude gains beta_k, linear.
    pub amplitude_gains: Vec<f64>,
    /// Post-MRC noise power N_r σ_n², watts.
    pub post_mrc_noise_power: f64,
}

impl ClusterScenario {
    pub fn n_ues(&self) -> usize {
        self.fading.len()
    }

    pub fn n_ris_elements(&self) -> usize {
        self.ris_steering.len()
    }
}

/// ULA array response with half-wavelength spacing:
/// entry i is `exp(j π i sin(angle))`.
pub fn make_steering(n: usize, angle: f64) -> DVector<Complex64> {
    let step = std::f64::consts::PI * angle.sin();
    DVector::from_iterator(n, (0..n).map(|i| Complex64::from_polar(1.0, step * i as f64)))
}

fn standard_complex_gaussian<R: Rng>(rng: &mut R) -> Complex64 {
    // Unit variance per complex entry: each part is N(0, 1/2).
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draws one scenario. Deterministic given `(cfg, rng state)`.
pub fn draw_scenario<R: Rng>(cfg: &ChannelConfig, rng: &mut R) -> Result<ClusterScenario> {
    cfg.validate()?;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let bs_angle = rng.gen_range(-half_pi..half_pi);
    let ris_angle = rng.gen_range(-half_pi..half_pi);
    let bs_steering = make_steering(cfg.n_bs_antennas, bs_angle);
    let ris_steering = make_steering(cfg.n_ris_elements, ris_angle);

    let n_r = cfg.n_bs_antennas as f64;
    let l_bs = db_to_linear(cfg.bs_ris_pathloss_db);
    let power_w = dbm_to_watts(cfg.tx_power_dbm);
    let spreading = cfg.spreading_length as f64;

    let mut fading = Vec::with_capacity(cfg.n_ues);
    let mut pathlosses_db = Vec::with_capacity(cfg.n_ues);
    let mut effective_channels = Vec::with_capacity(cfg.n_ues);
    let mut amplitude_gains = Vec::with_capacity(cfg.n_ues);
    for _ in 0..cfg.n_ues {
        let pl_db = if cfg.ue_pathloss_spread_db == 0.0 {
            cfg.ue_pathloss_mean_db
        } else {
            rng.gen_range(
                cfg.ue_pathloss_mean_db - cfg.ue_pathloss_spread_db
                    ..cfg.ue_pathloss_mean_db + cfg.ue_pathloss_spread_db,
            )
        };
        let h = DVector::from_iterator(
            cfg.n_ris_elements,
            (0..cfg.n_ris_elements).map(|_| standard_complex_gaussian(rng)),
        );
        let hhat = DVector::from_iterator(
            cfg.n_ris_elements,
            ris_steering.iter().zip(h.iter()).map(|(b, h)| b.conj() * h),
        );
        let beta = (n_r * n_r * l_bs * db_to_linear(pl_db) * power_w * spreading).sqrt();
        pathlosses_db.push(pl_db);
        fading.push(h);
        effective_channels.push(hhat);
        amplitude_gains.push(beta);
    }

    Ok(ClusterScenario {
        bs_steering,
        ris_steering,
        fading,
        pathlosses_db,
        effective_channels,
        amplitude_gains,
        post_mrc_noise_power: n_r * dbm_to_watts(cfg.noise_power_dbm),
    })
}

/// Post-MRC complex gain `beta_k (w^H hhat_k)` of UE `k` (0-based).
pub fn effective_gain(w: &PhaseShifts, scenario: &ClusterScenario, k: usize) -> Result<Complex64> {
    if k >= scenario.n_ues() {
        return Err(Error::DimensionMismatch(format!(
            "UE index {k} out of range for {} UEs",
            scenario.n_ues()
        )));
    }
    let hhat = &scenario.effective_channels[k];
    if w.len() != hhat.len() {
        return Err(Error::DimensionMismatch(format!(
            "phase vector has length {} but the scenario has {} RIS elements",
            w.len(),
            hhat.len()
        )));
    }
    Ok(scenario.amplitude_gains[k] * w.vector().dotc(hhat))
}
