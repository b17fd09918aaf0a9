//! RIS phase-shift strategies.
//!
//! Three strategies are provided: random phases, sum-rate optimized
//! phases (phases of the dominant eigenvector of the weighted channel
//! covariance), and the proposed pipeline: order the UEs and freeze the
//! MMSE filters using the sum-rate solution, build per-stage SINR
//! constraint matrices, solve the SDP relaxation of the resulting
//! feasibility program, and extract unit-modulus phases from the
//! dominant eigenvector of the solution matrix. When the relaxation
//! cannot be solved within budget the sum-rate solution is returned.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::ClusterScenario;
use crate::codebook::Codebook;
use crate::numerics::{
    dominant_eigenpair, frobenius_inner, psd_project, HermitianMatrix,
};
use crate::receiver::{composite_gains, detection_order, mmse_filter};
use crate::{Error, Result};

/// Unit-modulus phase-shift vector (the diagonal of `Phi^H`).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseShifts {
    w: DVector<Complex64>,
}

impl PhaseShifts {
    pub fn from_phases(phases: &[f64]) -> Self {
        Self {
            w: DVector::from_iterator(
                phases.len(),
                phases.iter().map(|&p| Complex64::from_polar(1.0, p)),
            ),
        }
    }

    /// Takes the entrywise phases of `v`; exactly-zero entries map to
    /// phase 0.
    pub fn from_vector_phases(v: &DVector<Complex64>) -> Self {
        Self {
            w: DVector::from_iterator(
                v.len(),
                v.iter().map(|z| {
                    if z.norm_sqr() == 0.0 {
                        Complex64::new(1.0, 0.0)
                    } else {
                        Complex64::from_polar(1.0, z.arg())
                    }
                }),
            ),
        }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.len() == 0
    }

    pub fn vector(&self) -> &DVector<Complex64> {
        &self.w
    }
}

/// i.i.d. uniform phases on `[0, 2π)`.
pub fn random_shifts<R: Rng>(n_s: usize, rng: &mut R) -> PhaseShifts {
    let phases: Vec<f64> = (0..n_s)
        .map(|_| rng.gen_range(0.0..2.0 * std::f64::consts::PI))
        .collect();
    PhaseShifts::from_phases(&phases)
}

/// Sum-rate optimized shifts: phases of the dominant eigenvector of
/// `H = sum_k beta_k^2 hhat_k hhat_k^H`.
pub fn sum_rate_shifts(scenario: &ClusterScenario) -> Result<PhaseShifts> {
    let n_s = scenario.n_ris_elements();
    let mut h = DMatrix::<Complex64>::zeros(n_s, n_s);
    for k in 0..scenario.n_ues() {
        let hhat = &scenario.effective_channels[k];
        let beta = scenario.amplitude_gains[k];
        h += (hhat * hhat.adjoint()).scale(beta * beta);
    }
    let (_, u) = dominant_eigenpair(&HermitianMatrix::symmetrize(h), 1e-10, 100_000)?;
    Ok(PhaseShifts::from_vector_phases(&u))
}

/// Per-stage SINR constraint matrices `C_k = A_k - eps_k B_k`, built
/// from a reference phase vector (the sum-rate solution in the proposed
/// pipeline). Indexed in detection order.
#[derive(Debug, Clone)]
pub struct SinrConstraintSet {
    /// C matrices, one per IC stage.
    pub constraints: Vec<HermitianMatrix>,
    /// Thresholds in stage order (linear scale).
    pub epsilons: Vec<f64>,
    /// The frozen reference-based MMSE filters, in stage order.
    pub filters_used: Vec<DVector<Complex64>>,
    /// Detection order used (UE indices, strongest first).
    pub order_used: Vec<usize>,
}

/// Builds the constraint set of the phase-shift feasibility program.
///
/// The detection order and MMSE filters are computed once from `w_ref`
/// with genie IC semantics (stage k sees stages k..K) and frozen; the
/// noise term uses `w^H w = N_s`.
pub fn build_constraints(
    scenario: &ClusterScenario,
    codebook: &Codebook,
    assignment: &[usize],
    thresholds: &[f64],
    w_ref: &PhaseShifts,
) -> Result<SinrConstraintSet> {
    let n_s = scenario.n_ris_elements();
    let order = detection_order(w_ref, scenario)?;
    let gains = composite_gains(w_ref, scenario, codebook, assignment)?;
    let sigma2 = scenario.post_mrc_noise_power;

    let mut constraints = Vec::with_capacity(order.len());
    let mut epsilons = Vec::with_capacity(order.len());
    let mut filters = Vec::with_capacity(order.len());
    for (stage, &ue) in order.iter().enumerate() {
        let residual: Vec<usize> = order[stage..].to_vec();
        let v = mmse_filter(&gains, ue, &residual)?;
        let eps = thresholds[ue];

        let beta = scenario.amplitude_gains[ue];
        let s_gain = v.dotc(&codebook.signature(assignment[ue])).norm_sqr();
        let a = HermitianMatrix::scaled_outer(
            &scenario.effective_channels[ue],
            beta * beta * s_gain,
        );

        let mut b = DMatrix::<Complex64>::identity(n_s, n_s)
            .scale(sigma2 * v.norm_squared() / n_s as f64);
        for &later in &residual[1..] {
            let beta_l = scenario.amplitude_gains[later];
            let cross = v.dotc(&codebook.signature(assignment[later])).norm_sqr();
            let hhat_l = &scenario.effective_channels[later];
            b += (hhat_l * hhat_l.adjoint()).scale(beta_l * beta_l * cross);
        }

        let c = HermitianMatrix::symmetrize(a.into_matrix() - b.scale(eps));
        constraints.push(c);
        epsilons.push(eps);
        filters.push(v);
    }

    Ok(SinrConstraintSet {
        constraints,
        epsilons,
        filters_used: filters,
        order_used: order,
    })
}

/// First-order SDP solver parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdpParams {
    pub max_iter: usize,
    /// Residual tolerance on the diagonal, PSD, and slack constraints.
    pub tol: f64,
    /// Relaxation factor for the halfspace corrections, in (0, 2).
    pub step: f64,
}

impl Default for SdpParams {
    fn default() -> Self {
        Self {
            max_iter: 5_000,
            tol: 1e-6,
            step: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdpStatus {
    Solved,
    BudgetExhausted,
}

/// Result of one SDP solve. Slacks are reported for constraint matrices
/// normalized to unit Frobenius norm, so they are comparable across
/// stages regardless of the raw channel scale.
#[derive(Debug, Clone)]
pub struct SdpOutcome {
    pub status: SdpStatus,
    /// Solution matrix, present only when solved.
    pub w_matrix: Option<HermitianMatrix>,
    /// Normalized slacks `tr(C_k W)` of the final iterate, in stage order.
    pub slacks: Vec<f64>,
    pub iterations: usize,
    /// Smallest eigenvalue of the final iterate.
    pub min_eig: f64,
}

impl SdpOutcome {
    pub fn min_slack(&self) -> f64 {
        self.slacks.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Slack margins targeted in turn, largest first. Solving at a modest
/// positive margin yields a slightly interior point; each level
/// warm-starts the next. Much larger targets are deliberately not
/// tried: maximizing the slack spreads W across many constraint
/// directions, raising its rank and wrecking the rank-1 rounding.
const SLACK_LEVELS: [f64; 8] = [3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 1e-5, 2e-6];

/// Iterations without progress before a level is abandoned.
const STALL_WINDOW: usize = 60;

/// Solves the max-min-slack variant of the relaxed feasibility program
///
/// ```text
/// maximize t  s.t.  tr(C_k W) >= t,  diag(W) = 1,  W >= 0
/// ```
///
/// by alternating projections between the slack halfspaces, the
/// unit-diagonal affine set, and the PSD cone, sweeping the target
/// margin t from large to small until one level converges. Returns
/// `Solved` iff the final iterate satisfies every constraint within
/// `params.tol` with a nonnegative minimum slack; `BudgetExhausted`
/// otherwise (a first-order method cannot certify infeasibility).
pub fn sdp_feasibility(
    constraints: &SinrConstraintSet,
    n_s: usize,
    params: &SdpParams,
) -> Result<SdpOutcome> {
    let normalized: Vec<Option<HermitianMatrix>> = constraints
        .constraints
        .iter()
        .map(|c| {
            let norm = c.frobenius_norm();
            if norm == 0.0 {
                None
            } else {
                Some(HermitianMatrix::symmetrize(c.matrix().unscale(norm)))
            }
        })
        .collect();

    let slacks_of = |w: &HermitianMatrix| -> Vec<f64> {
        normalized
            .iter()
            .map(|c| c.as_ref().map_or(0.0, |c| frobenius_inner(c, w)))
            .collect()
    };

    let mut w = HermitianMatrix::identity(n_s);
    let mut diag_dev = 0.0f64;
    let mut iterations = 0usize;
    let mut converged = false;
    let level_cap = (params.max_iter / SLACK_LEVELS.len()).max(1);

    'levels: for &target in SLACK_LEVELS.iter() {
        let mut best_violation = f64::INFINITY;
        let mut stall = 0usize;
        for _ in 0..level_cap {
            if iterations >= params.max_iter {
                break 'levels;
            }
            let slacks = slacks_of(&w);
            let worst = slacks.iter().copied().fold(f64::INFINITY, f64::min);
            let violation = (target - worst).max(0.0).max(diag_dev);
            if violation <= params.tol {
                converged = true;
                break 'levels;
            }
            if violation < best_violation - 1e-12 {
                best_violation = violation;
                stall = 0;
            } else {
                stall += 1;
                if stall >= STALL_WINDOW {
                    continue 'levels;
                }
            }

            // Halfspace corrections for every violated stage.
            let mut m = w.into_matrix();
            for (c, &slack) in normalized.iter().zip(slacks.iter()) {
                if let Some(c) = c {
                    if slack < target {
                        m += c.matrix().scale(params.step * (target - slack));
                    }
                }
            }
            // PSD cone, then the unit-diagonal affine set.
            let projected = psd_project(&HermitianMatrix::symmetrize(m))?;
            let mut m = projected.into_matrix();
            diag_dev = 0.0;
            for n in 0..n_s {
                diag_dev = diag_dev.max((m[(n, n)].re - 1.0).abs());
                m[(n, n)] = Complex64::new(1.0, 0.0);
            }
            w = HermitianMatrix::symmetrize(m);
            iterations += 1;
        }
    }

    // Polish: alternate PSD projection and diagonal restoration until the
    // diagonal deviation (which bounds how far the iterate is from the
    // cone) is within tolerance.
    let mut polish = 0;
    while diag_dev > params.tol && polish < 100 {
        let projected = psd_project(&w)?;
        let mut m = projected.into_matrix();
        diag_dev = 0.0;
        for n in 0..n_s {
            diag_dev = diag_dev.max((m[(n, n)].re - 1.0).abs());
            m[(n, n)] = Complex64::new(1.0, 0.0);
        }
        w = HermitianMatrix::symmetrize(m);
        polish += 1;
    }

    let slacks = slacks_of(&w);
    let min_slack = slacks.iter().copied().fold(f64::INFINITY, f64::min);
    let min_eig = w.min_eigenvalue()?;
    let solved = converged
        && min_slack >= 0.0
        && min_eig >= -params.tol
        && diag_dev <= params.tol;

    Ok(SdpOutcome {
        status: if solved {
            SdpStatus::Solved
        } else {
            SdpStatus::BudgetExhausted
        },
        w_matrix: solved.then_some(w),
        slacks,
        iterations,
        min_eig,
    })
}

/// Rank-1 extraction: phases of the dominant eigenvector of `W`.
pub fn extract_phases(outcome: &SdpOutcome) -> Result<PhaseShifts> {
    let w = outcome
        .w_matrix
        .as_ref()
        .ok_or_else(|| Error::InvalidState("extract_phases on an unsolved SDP".into()))?;
    // W may have eigenvalues as low as -tol; shift into the PSD cone so
    // power iteration converges to the algebraically largest eigenpair.
    let shifted = HermitianMatrix::symmetrize(
        w.matrix() + DMatrix::<Complex64>::identity(w.dim(), w.dim()).scale(1e-5),
    );
    let (_, u) = dominant_eigenpair(&shifted, 1e-10, 100_000)?;
    Ok(PhaseShifts::from_vector_phases(&u))
}

/// Gaussian randomization: draws `n_samples` vectors from CN(0, W),
/// projects each to unit modulus, and returns the candidate (always
/// including the rank-1 extraction) with the largest minimum normalized
/// slack.
pub fn gaussian_randomization<R: Rng>(
    outcome: &SdpOutcome,
    constraints: &SinrConstraintSet,
    n_samples: usize,
    rng: &mut R,
) -> Result<PhaseShifts> {
    if n_samples < 1 {
        return Err(Error::InvalidConfig(
            "gaussian randomization needs n_samples >= 1".into(),
        ));
    }
    let w = outcome
        .w_matrix
        .as_ref()
        .ok_or_else(|| Error::InvalidState("gaussian_randomization on an unsolved SDP".into()))?;
    let normalized: Vec<Option<HermitianMatrix>> = constraints
        .constraints
        .iter()
        .map(|c| {
            let norm = c.frobenius_norm();
            (norm > 0.0).then(|| HermitianMatrix::symmetrize(c.matrix().unscale(norm)))
        })
        .collect();
    let score = |shifts: &PhaseShifts| -> f64 {
        let lifted = HermitianMatrix::scaled_outer(shifts.vector(), 1.0);
        normalized
            .iter()
            .map(|c| c.as_ref().map_or(0.0, |c| frobenius_inner(c, &lifted)))
            .fold(f64::INFINITY, f64::min)
    };

    let mut best = extract_phases(outcome)?;
    let mut best_score = score(&best);

    let (vals, vecs) = w.eigh()?;
    let factor = &vecs
        * DMatrix::from_diagonal(&DVector::from_iterator(
            w.dim(),
            vals.iter().map(|&l| Complex64::new(l.max(0.0).sqrt(), 0.0)),
        ));
    for _ in 0..n_samples {
        let z = DVector::from_iterator(
            w.dim(),
            (0..w.dim()).map(|_| {
                Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
                    * std::f64::consts::FRAC_1_SQRT_2
            }),
        );
        let candidate = PhaseShifts::from_vector_phases(&(&factor * z));
        let s = score(&candidate);
        if s > best_score {
            best_score = s;
            best = candidate;
        }
    }
    Ok(best)
}

/// Which strategy produced the returned phase-shifts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Sdp,
    FallbackSumRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProposeParams {
    pub sdp: SdpParams,
    /// Gaussian randomization samples; 0 disables (rank-1 extraction only).
    pub randomization_samples: usize,
}

impl Default for ProposeParams {
    fn default() -> Self {
        Self {
            sdp: SdpParams::default(),
            randomization_samples: 0,
        }
    }
}

/// Proposed shifts plus solver diagnostics.
#[derive(Debug, Clone)]
pub struct ProposedShifts {
    pub shifts: PhaseShifts,
    pub provenance: Provenance,
    pub sdp: SdpOutcome,
}

/// The full proposed pipeline: sum-rate shifts, frozen ordering and
/// filters, SDP relaxation, extraction (optionally randomized), and the
/// sum-rate fallback when the relaxation is not solved within budget.
pub fn propose_shifts<R: Rng>(
    scenario: &ClusterScenario,
    codebook: &Codebook,
    assignment: &[usize],
    thresholds: &[f64],
    params: &ProposeParams,
    rng: &mut R,
) -> Result<ProposedShifts> {
    let w_sum = sum_rate_shifts(scenario)?;
    let constraints = build_constraints(scenario, codebook, assignment, thresholds, &w_sum)?;
    let outcome = sdp_feasibility(&constraints, scenario.n_ris_elements(), &params.sdp)?;
    if outcome.status == SdpStatus::Solved {
        let shifts = if params.randomization_samples > 0 {
            gaussian_randomization(&outcome, &constraints, params.randomization_samples, rng)?
        } else {
            extract_phases(&outcome)?
        };
        Ok(ProposedShifts {
            shifts,
            provenance: Provenance::Sdp,
            sdp: outcome,
        })
    } else {
        Ok(ProposedShifts {
            shifts: w_sum,
            provenance: Provenance::FallbackSumRate,
            sdp: outcome,
        })
    }
}
