//! Monte Carlo experiment engine.
//!
//! Sweeps one variable (active UEs, pathloss spread, or RIS elements),
//! runs independent channel drops at every sweep point, and reports the
//! per-strategy mean number of correctly detected UEs with normal 95%
//! confidence intervals. Within one drop every strategy sees the same
//! channel draw (paired comparison), and each drop owns its own random
//! stream derived from (master seed, sweep index, drop index), so runs
//! are deterministic and order-independent under parallel execution.

use std::io::Write as _;
use std::path::Path;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{db_to_linear, draw_scenario, ChannelConfig};
use crate::codebook::{assign_signatures, grassmannian_design, oma_codebook, Codebook};
use crate::receiver::{composite_gains, run_ic_detection, sum_rate, IcMode};
use crate::risopt::{
    propose_shifts, random_shifts, sum_rate_shifts, PhaseShifts, ProposeParams, Provenance,
    SdpParams,
};
use crate::{Error, Result};

/// Iteration budget for the one-off Grassmannian design of an experiment.
const CODEBOOK_DESIGN_ITERS: usize = 10_000;

/// A run fails (exit code 3 from the CLI) if more than this fraction of
/// drops hit a numerics error.
pub const MAX_DROP_FAILURE_RATE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodebookKind {
    Grassmannian,
    Oma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Proposed,
    SumRate,
    Random,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Proposed => "proposed",
            Strategy::SumRate => "sum_rate",
            Strategy::Random => "random",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// Number of active UEs K.
    K,
    /// Pathloss spread s, dB.
    SpreadDb,
    /// RIS elements N_s.
    NRisElements,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::K => "K",
            SweepVariable::SpreadDb => "spread_db",
            SweepVariable::NRisElements => "n_ris_elements",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomizationConfig {
    pub enabled: bool,
    pub n_samples: usize,
}

impl Default for RandomizationConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            n_samples: 100,
        }
    }
}

/// Full description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub channel: ChannelConfig,
    pub codebook_kind: CodebookKind,
    /// Spreading length L of the codebook.
    pub codebook_length: usize,
    /// Number of signatures M (ignored for OMA, where M == L).
    pub codebook_size: usize,
    /// Common detection threshold epsilon, dB.
    pub threshold_db: f64,
    pub strategies: Vec<Strategy>,
    pub sweep: SweepSpec,
    pub n_drops: usize,
    pub master_seed: u64,
    pub ic_mode: IcMode,
    #[serde(default)]
    pub randomization: RandomizationConfig,
    #[serde(default)]
    pub sdp: SdpParams,
    /// Keep per-drop solver diagnostics (the CLI's --verbose).
    #[serde(default)]
    pub collect_drop_diagnostics: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        if self.n_drops < 1 {
            return Err(Error::InvalidConfig("n_drops must be >= 1".into()));
        }
        if self.sweep.values.is_empty() {
            return Err(Error::InvalidConfig("sweep.values must be non-empty".into()));
        }
        if self.strategies.is_empty() {
            return Err(Error::InvalidConfig("strategies must be non-empty".into()));
        }
        if self.codebook_kind == CodebookKind::Grassmannian
            && self.codebook_size < self.codebook_length
        {
            return Err(Error::InvalidConfig(format!(
                "grassmannian codebook needs M >= L, got L={} M={}",
                self.codebook_length, self.codebook_size
            )));
        }
        for &v in &self.sweep.values {
            let ok = match self.sweep.variable {
                SweepVariable::K | SweepVariable::NRisElements => {
                    v >= 1.0 && v.fract() == 0.0
                }
                SweepVariable::SpreadDb => v >= 0.0,
            };
            if !ok {
                return Err(Error::InvalidConfig(format!(
                    "bad sweep value {v} for {}",
                    self.sweep.variable.name()
                )));
            }
        }
        Ok(())
    }

    /// Channel config at one sweep point.
    fn channel_at(&self, sweep_value: f64) -> ChannelConfig {
        let mut cfg = self.channel.clone();
        match self.sweep.variable {
            SweepVariable::K => cfg.n_ues = sweep_value as usize,
            SweepVariable::SpreadDb => cfg.ue_pathloss_spread_db = sweep_value,
            SweepVariable::NRisElements => cfg.n_ris_elements = sweep_value as usize,
        }
        cfg
    }

    /// The frozen codebook shared by every drop of the experiment.
    pub fn build_codebook(&self) -> Result<Codebook> {
        match self.codebook_kind {
            CodebookKind::Oma => Ok(oma_codebook(self.codebook_length)),
            CodebookKind::Grassmannian => {
                let mut rng = lane_rng(self.master_seed, 0, 0, Lane::CodebookDesign);
                grassmannian_design(
                    self.codebook_length,
                    self.codebook_size,
                    &mut rng,
                    CODEBOOK_DESIGN_ITERS,
                )
            }
        }
    }
}

/// Independent random lanes inside one (seed, sweep, drop) cell.
#[derive(Clone, Copy)]
enum Lane {
    CodebookDesign,
    Scenario,
    RandomStrategy,
    Randomization,
}

fn lane_rng(master_seed: u64, sweep_idx: usize, drop_idx: usize, lane: Lane) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&(sweep_idx as u64).to_le_bytes());
    seed[16..24].copy_from_slice(&(drop_idx as u64).to_le_bytes());
    seed[24] = lane as u8;
    ChaCha8Rng::from_seed(seed)
}

/// Outcome of one strategy within one drop.
#[derive(Debug, Clone)]
pub struct StrategyDrop {
    pub strategy: Strategy,
    pub n_detected: usize,
    pub sum_rate_bps_hz: f64,
    /// Proposed strategy only: whether the SDP was solved.
    pub sdp_solved: Option<bool>,
    pub sdp_iterations: usize,
    pub sdp_min_slack: f64,
    pub sdp_min_eig: f64,
}

#[derive(Debug, Clone)]
pub struct DropResult {
    pub sweep_value: f64,
    pub drop_index: usize,
    pub strategies: Vec<StrategyDrop>,
}

/// Runs one Monte Carlo drop: one scenario, all requested strategies.
pub fn run_drop(
    config: &ExperimentConfig,
    codebook: &Codebook,
    sweep_idx: usize,
    drop_idx: usize,
) -> Result<DropResult> {
    let sweep_value = config.sweep.values[sweep_idx];
    let channel = config.channel_at(sweep_value);
    let mut scenario_rng = lane_rng(config.master_seed, sweep_idx, drop_idx, Lane::Scenario);
    let scenario = draw_scenario(&channel, &mut scenario_rng)?;
    let assignment = assign_signatures(channel.n_ues, codebook);
    let thresholds = vec![db_to_linear(config.threshold_db); channel.n_ues];

    let mut strategies = Vec::with_capacity(config.strategies.len());
    for &strategy in &config.strategies {
        let (shifts, sdp): (PhaseShifts, Option<crate::risopt::SdpOutcome>) = match strategy {
            Strategy::Random => {
                let mut rng =
                    lane_rng(config.master_seed, sweep_idx, drop_idx, Lane::RandomStrategy);
                (random_shifts(channel.n_ris_elements, &mut rng), None)
            }
            Strategy::SumRate => (sum_rate_shifts(&scenario)?, None),
            Strategy::Proposed => {
                let params = ProposeParams {
                    sdp: config.sdp,
                    randomization_samples: if config.randomization.enabled {
                        config.randomization.n_samples
                    } else {
                        0
                    },
                };
                let mut rng =
                    lane_rng(config.master_seed, sweep_idx, drop_idx, Lane::Randomization);
                let proposed = propose_shifts(
                    &scenario,
                    codebook,
                    &assignment,
                    &thresholds,
                    &params,
                    &mut rng,
                )?;
                debug_assert!(
                    (proposed.provenance == Provenance::Sdp)
                        == (proposed.sdp.status == crate::risopt::SdpStatus::Solved)
                );
                (proposed.shifts, Some(proposed.sdp))
            }
        };
        let outcome = run_ic_detection(
            &shifts,
            &scenario,
            codebook,
            &assignment,
            &thresholds,
            config.ic_mode,
        )?;
        let gains = composite_gains(&shifts, &scenario, codebook, &assignment)?;
        let rate = sum_rate(&gains, channel.spreading_length);
        strategies.push(StrategyDrop {
            strategy,
            n_detected: outcome.n_detected,
            sum_rate_bps_hz: rate,
            sdp_solved: sdp
                .as_ref()
                .map(|o| o.status == crate::risopt::SdpStatus::Solved),
            sdp_iterations: sdp.as_ref().map_or(0, |o| o.iterations),
            sdp_min_slack: sdp.as_ref().map_or(f64::NAN, |o| o.min_slack()),
            sdp_min_eig: sdp.as_ref().map_or(f64::NAN, |o| o.min_eig),
        });
    }

    Ok(DropResult {
        sweep_value,
        drop_index: drop_idx,
        strategies,
    })
}

/// Aggregated statistics for one (sweep value, strategy) point.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryPoint {
    pub sweep_value: f64,
    pub strategy: Strategy,
    pub mean_detected: f64,
    pub ci_halfwidth_95: f64,
    pub n_drops: usize,
    /// Fraction of drops where the SDP was solved (0 for non-proposed).
    pub sdp_solved_rate: f64,
    pub mean_sum_rate_bps_hz: f64,
}

#[derive(Debug, Clone)]
pub struct MonteCarloSummary {
    pub sweep_variable: SweepVariable,
    pub points: Vec<SummaryPoint>,
    pub failed_drops: usize,
    pub total_drops: usize,
    /// Per-drop records, kept only when requested by the config.
    pub drops: Vec<DropResult>,
}

fn mean_and_ci(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        // Sample std of one sample is defined as 0.
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * var.sqrt() / (n as f64).sqrt())
}

/// Runs the full sweep. Drops execute in parallel; aggregation is keyed
/// by (sweep index, drop index) so results do not depend on scheduling.
pub fn run_experiment(config: &ExperimentConfig) -> Result<MonteCarloSummary> {
    config.validate()?;
    let codebook = config.build_codebook()?;

    let mut points = Vec::new();
    let mut failed = 0usize;
    let mut kept_drops = Vec::new();
    let total = config.sweep.values.len() * config.n_drops;

    for sweep_idx in 0..config.sweep.values.len() {
        let results: Vec<Result<DropResult>> = (0..config.n_drops)
            .into_par_iter()
            .map(|drop_idx| run_drop(config, &codebook, sweep_idx, drop_idx))
            .collect();

        let mut ok = Vec::with_capacity(config.n_drops);
        for r in results {
            match r {
                Ok(d) => ok.push(d),
                Err(_) => failed += 1,
            }
        }

        for &strategy in &config.strategies {
            let detected: Vec<f64> = ok
                .iter()
                .map(|d| {
                    d.strategies
                        .iter()
                        .find(|s| s.strategy == strategy)
                        .map_or(0.0, |s| s.n_detected as f64)
                })
                .collect();
            let rates: Vec<f64> = ok
                .iter()
                .map(|d| {
                    d.strategies
                        .iter()
                        .find(|s| s.strategy == strategy)
                        .map_or(0.0, |s| s.sum_rate_bps_hz)
                })
                .collect();
            let solved = ok
                .iter()
                .filter(|d| {
                    d.strategies
                        .iter()
                        .find(|s| s.strategy == strategy)
                        .and_then(|s| s.sdp_solved)
                        .unwrap_or(false)
                })
                .count();
            let (mean_detected, ci) = mean_and_ci(&detected);
            let (mean_rate, _) = mean_and_ci(&rates);
            points.push(SummaryPoint {
                sweep_value: config.sweep.values[sweep_idx],
                strategy,
                mean_detected,
                ci_halfwidth_95: ci,
                n_drops: detected.len(),
                sdp_solved_rate: if detected.is_empty() {
                    0.0
                } else {
                    solved as f64 / detected.len() as f64
                },
                mean_sum_rate_bps_hz: mean_rate,
            });
        }

        if config.collect_drop_diagnostics {
            kept_drops.extend(ok);
        }
    }

    if failed as f64 > MAX_DROP_FAILURE_RATE * total as f64 {
        return Err(Error::InvalidState(format!(
            "{failed} of {total} drops failed with numerics errors"
        )));
    }

    Ok(MonteCarloSummary {
        sweep_variable: config.sweep.variable,
        points,
        failed_drops: failed,
        total_drops: total,
        drops: kept_drops,
    })
}

/// Writes the summary as CSV: a header row then one row per
/// (sweep value, strategy). UTF-8, LF line endings, '.' decimal point.
pub fn emit_csv<P: AsRef<Path>>(summary: &MonteCarloSummary, path: P) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(
        b"sweep_variable,sweep_value,strategy,mean_detected,ci_lo,ci_hi,n_drops,sdp_solved_rate,mean_sum_rate_bps_hz\n",
    )?;
    for p in &summary.points {
        writeln!(
            file,
            "{},{},{},{},{},{},{},{},{}",
            summary.sweep_variable.name(),
            p.sweep_value,
            p.strategy.name(),
            p.mean_detected,
            p.mean_detected - p.ci_halfwidth_95,
            p.mean_detected + p.ci_halfwidth_95,
            p.n_drops,
            p.sdp_solved_rate,
            p.mean_sum_rate_bps_hz,
        )?;
    }
    Ok(())
}

/// Writes per-drop solver diagnostics (populated under --verbose).
pub fn emit_drops_csv<P: AsRef<Path>>(summary: &MonteCarloSummary, path: P) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(
        b"sweep_variable,sweep_value,drop,strategy,n_detected,sum_rate_bps_hz,sdp_solved,sdp_iterations,sdp_min_slack,sdp_min_eig\n",
    )?;
    for d in &summary.drops {
        for s in &d.strategies {
            writeln!(
                file,
                "{},{},{},{},{},{},{},{},{},{}",
                summary.sweep_variable.name(),
                d.sweep_value,
                d.drop_index,
                s.strategy.name(),
                s.n_detected,
                s.sum_rate_bps_hz,
                s.sdp_solved.map_or(String::new(), |b| b.to_string()),
                s.sdp_iterations,
                s.sdp_min_slack,
                s.sdp_min_eig,
            )?;
        }
    }
    Ok(())
}

/// Parses a summary CSV written by [`emit_csv`] back into rows of
/// (sweep_value, strategy, mean, ci_lo, ci_hi, n_drops, solved_rate, rate).
pub fn parse_csv<P: AsRef<Path>>(
    path: P,
) -> Result<Vec<(f64, String, f64, f64, f64, usize, f64, f64)>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 9 {
            return Err(Error::Parse(format!("expected 9 columns, got {}", cells.len())));
        }
        let f = |s: &str| -> Result<f64> {
            s.parse().map_err(|e| Error::Parse(format!("bad float {s:?}: {e}")))
        };
        rows.push((
            f(cells[1])?,
            cells[2].to_string(),
            f(cells[3])?,
            f(cells[4])?,
            f(cells[5])?,
            cells[6]
                .parse()
                .map_err(|e| Error::Parse(format!("bad count {:?}: {e}", cells[6])))?,
            f(cells[7])?,
            f(cells[8])?,
        ));
    }
    Ok(rows)
}

/// Baseline channel shared by all figure presets: 32 BS antennas, 32 RIS
/// elements, L = 4 spreading, -65 dB pathlosses, 30 dBm UEs, -110 dBm noise.
pub fn base_channel() -> ChannelConfig {
    ChannelConfig {
        n_bs_antennas: 32,
        n_ris_elements: 32,
        n_ues: 12,
        spreading_length: 4,
        bs_ris_pathloss_db: -65.0,
        ue_pathloss_mean_db: -65.0,
        ue_pathloss_spread_db: 3.0,
        tx_power_dbm: 30.0,
        noise_power_dbm: -110.0,
    }
}

const PRESET_SEED: u64 = 42;
const PRESET_DROPS: usize = 500;

fn all_strategies() -> Vec<Strategy> {
    vec![Strategy::Proposed, Strategy::SumRate, Strategy::Random]
}

/// Detectability vs. number of active UEs, K = 2..=16, spread +-3 dB,
/// at one outage threshold (the figure uses 1, 4, and 9 dB).
pub fn fig1_config(threshold_db: f64) -> ExperimentConfig {
    ExperimentConfig {
        channel: base_channel(),
        codebook_kind: CodebookKind::Grassmannian,
        codebook_length: 4,
        codebook_size: 16,
        threshold_db,
        strategies: all_strategies(),
        sweep: SweepSpec {
            variable: SweepVariable::K,
            values: (2..=16).map(|k| k as f64).collect(),
        },
        n_drops: PRESET_DROPS,
        master_seed: PRESET_SEED,
        ic_mode: IcMode::Genie,
        randomization: RandomizationConfig {
            enabled: true,
            n_samples: 100,
        },
        sdp: SdpParams::default(),
        collect_drop_diagnostics: false,
    }
}

/// Detectability vs. pathloss spread s = 0..=6 dB at K = 12, eps = 4 dB,
/// for a NOMA (Grassmannian 4x16) or OMA (identity 4x4) codebook.
pub fn fig2_config(kind: CodebookKind) -> ExperimentConfig {
    let mut channel = base_channel();
    channel.n_ues = 12;
    ExperimentConfig {
        channel,
        codebook_kind: kind,
        codebook_length: 4,
        codebook_size: match kind {
            CodebookKind::Grassmannian => 16,
            CodebookKind::Oma => 4,
        },
        threshold_db: 4.0,
        strategies: all_strategies(),
        sweep: SweepSpec {
            variable: SweepVariable::SpreadDb,
            values: (0..=6).map(|s| s as f64).collect(),
        },
        n_drops: PRESET_DROPS,
        master_seed: PRESET_SEED,
        ic_mode: IcMode::Genie,
        randomization: RandomizationConfig {
            enabled: true,
            n_samples: 100,
        },
        sdp: SdpParams::default(),
        collect_drop_diagnostics: false,
    }
}

/// Detectability vs. RIS elements N_s in {4,...,128} (log-spaced) at
/// K = 12, eps = 3 dB, zero spread, for one transmit power.
pub fn fig3_config(tx_power_dbm: f64) -> ExperimentConfig {
    let mut channel = base_channel();
    channel.n_ues = 12;
    channel.ue_pathloss_spread_db = 0.0;
    channel.tx_power_dbm = tx_power_dbm;
    ExperimentConfig {
        channel,
        codebook_kind: CodebookKind::Grassmannian,
        codebook_length: 4,
        codebook_size: 16,
        threshold_db: 3.0,
        strategies: all_strategies(),
        sweep: SweepSpec {
            variable: SweepVariable::NRisElements,
            values: vec![4.0, 8.0, 16.0, 32.0, 64.0, 128.0],
        },
        n_drops: PRESET_DROPS,
        master_seed: PRESET_SEED,
        // Realistic IC: at low transmit power most UEs genuinely fail,
        // and counting a failed UE's interference is what separates the
        // balanced feasibility solution from the greedy sum-rate one.
        ic_mode: IcMode::Realistic,
        randomization: RandomizationConfig {
            enabled: true,
            n_samples: 100,
        },
        sdp: SdpParams::default(),
        collect_drop_diagnostics: false,
    }
}
