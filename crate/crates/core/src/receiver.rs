//! Post-MRC MMSE-IC detection.
//!
//! After spatial filtering the cluster collapses to length-L composite
//! gain vectors `g_k = beta_k (w^H hhat_k) s_k`. Detection proceeds in
//! stages ordered by received strength: each stage applies an MMSE
//! filter against the residual interference, computes the stage SINR,
//! and declares the UE detected iff the SINR meets its threshold. Genie
//! mode removes every processed UE regardless of the outcome; realistic
//! mode keeps failed UEs as interference.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{effective_gain, ClusterScenario};
use crate::codebook::Codebook;
use crate::numerics::{solve_hermitian_pd, HermitianMatrix};
use crate::risopt::PhaseShifts;
use crate::{Error, Result};

/// Composite per-UE gain vectors plus the post-MRC noise power.
#[derive(Debug, Clone)]
pub struct CompositeGains {
    gains: Vec<DVector<Complex64>>,
    noise_power: f64,
}

impl CompositeGains {
    pub fn n_ues(&self) -> usize {
        self.gains.len()
    }

    pub fn spreading_length(&self) -> usize {
        self.gains.first().map_or(0, |g| g.len())
    }

    pub fn gain(&self, k: usize) -> &DVector<Complex64> {
        &self.gains[k]
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }
}

/// Whether interference cancellation is genie-aided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IcMode {
    /// Every processed UE is removed, detected or not.
    Genie,
    /// Only detected UEs are removed; failures stay as interference.
    Realistic,
}

/// Result of one IC pass over the cluster.
#[derive(Debug, Clone)]
pub struct DetectionOutcome {
    /// UE indices in detection order (strongest first).
    pub order: Vec<usize>,
    /// Stage SINR of each UE (indexed by UE, linear scale).
    pub stage_sinrs: Vec<f64>,
    /// Detection flag of each UE (indexed by UE).
    pub detected: Vec<bool>,
    pub n_detected: usize,
    pub mode: IcMode,
}

/// Builds `g_k = beta_k (w^H hhat_k) s_{assignment[k]}` for every UE.
pub fn composite_gains(
    w: &PhaseShifts,
    scenario: &ClusterScenario,
    codebook: &Codebook,
    assignment: &[usize],
) -> Result<CompositeGains> {
    if assignment.len() != scenario.n_ues() {
        return Err(Error::DimensionMismatch(format!(
            "assignment covers {} UEs but the scenario has {}",
            assignment.len(),
            scenario.n_ues()
        )));
    }
    let mut gains = Vec::with_capacity(assignment.len());
    for (k, &sig) in assignment.iter().enumerate() {
        if sig >= codebook.size() {
            return Err(Error::DimensionMismatch(format!(
                "signature index {sig} out of range for codebook of size {}",
                codebook.size()
            )));
        }
        let gain = effective_gain(w, scenario, k)?;
        gains.push(codebook.signature(sig) * gain);
    }
    Ok(CompositeGains {
        gains,
        noise_power: scenario.post_mrc_noise_power,
    })
}

/// MMSE filter for `target` against the UEs in `residual_set`:
/// `v = (sum_{l in residual} g_l g_l^H + sigma^2 I)^{-1} g_target`.
pub fn mmse_filter(
    gains: &CompositeGains,
    target: usize,
    residual_set: &[usize],
) -> Result<DVector<Complex64>> {
    if !residual_set.contains(&target) {
        return Err(Error::InvalidState(format!(
            "target UE {target} is not in the residual set"
        )));
    }
    let l = gains.spreading_length();
    let mut cov = DMatrix::<Complex64>::identity(l, l).scale(gains.noise_power);
    for &idx in residual_set {
        let g = gains.gain(idx);
        cov += g * g.adjoint();
    }
    solve_hermitian_pd(&HermitianMatrix::symmetrize(cov), gains.gain(target))
}

/// Post-filtering SINR of `target` with filter `v` against `interferer_set`.
pub fn stage_sinr(
    gains: &CompositeGains,
    v: &DVector<Complex64>,
    target: usize,
    interferer_set: &[usize],
) -> f64 {
    let signal = v.dotc(gains.gain(target)).norm_sqr();
    let interference: f64 = interferer_set
        .iter()
        .map(|&idx| v.dotc(gains.gain(idx)).norm_sqr())
        .sum();
    signal / (interference + gains.noise_power * v.norm_squared())
}

/// UE indices sorted by received strength `|beta_k w^H hhat_k|`
/// descending, ties broken by ascending UE index.
pub fn detection_order(w: &PhaseShifts, scenario: &ClusterScenario) -> Result<Vec<usize>> {
    let mut strengths = Vec::with_capacity(scenario.n_ues());
    for k in 0..scenario.n_ues() {
        strengths.push(effective_gain(w, scenario, k)?.norm());
    }
    let mut order: Vec<usize> = (0..scenario.n_ues()).collect();
    order.sort_by(|&i, &j| strengths[j].total_cmp(&strengths[i]).then(i.cmp(&j)));
    Ok(order)
}

/// Runs the full IC chain with per-UE thresholds (linear scale).
pub fn run_ic_detection(
    w: &PhaseShifts,
    scenario: &ClusterScenario,
    codebook: &Codebook,
    assignment: &[usize],
    thresholds: &[f64],
    mode: IcMode,
) -> Result<DetectionOutcome> {
    let k_total = scenario.n_ues();
    if thresholds.len() != k_total {
        return Err(Error::DimensionMismatch(format!(
            "{} thresholds for {} UEs",
            thresholds.len(),
            k_total
        )));
    }
    let gains = composite_gains(w, scenario, codebook, assignment)?;
    let order = detection_order(w, scenario)?;

    let mut stage_sinrs = vec![0.0; k_total];
    let mut detected = vec![false; k_total];
    let mut removed = vec![false; k_total];

    for (stage, &current) in order.iter().enumerate() {
        let mut residual: Vec<usize> = vec![current];
        residual.extend(order[stage + 1..].iter().copied());
        if mode == IcMode::Realistic {
            residual.extend(
                order[..stage]
                    .iter()
                    .copied()
                    .filter(|&ue| !removed[ue]),
            );
        }
        let v = mmse_filter(&gains, current, &residual)?;
        let interferers: Vec<usize> = residual[1..].to_vec();
        let sinr = stage_sinr(&gains, &v, current, &interferers);
        stage_sinrs[current] = sinr;
        let ok = sinr >= thresholds[current];
        detected[current] = ok;
        removed[current] = mode == IcMode::Genie || ok;
    }

    Ok(DetectionOutcome {
        order,
        stage_sinrs,
        n_detected: detected.iter().filter(|&&d| d).count(),
        detected,
        mode,
    })
}

/// Cluster sum-rate `(1/L) log2 det(I_L + (1/sigma^2) sum_k g_k g_k^H)`.
pub fn sum_rate(gains: &CompositeGains, l: usize) -> f64 {
    let mut m = DMatrix::<Complex64>::identity(l, l);
    for k in 0..gains.n_ues() {
        let g = gains.gain(k);
        m += (g * g.adjoint()).unscale(gains.noise_power);
    }
    // Hermitian PD by construction; log-det from the Cholesky factor.
    let chol = nalgebra::Cholesky::new(m).expect("I + PSD is positive definite");
    let log2_det: f64 = chol
        .l()
        .diagonal()
        .iter()
        .map(|z| 2.0 * z.re.log2())
        .sum();
    log2_det / l as f64
}
