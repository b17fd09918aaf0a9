//! Acceptance gate: one test per criterion, each printing a PASS line
//! on success (run with `--nocapture` to see them). The Monte Carlo
//! criteria use 300 drops per sweep point and the preset master seed,
//! so reruns are deterministic.

use std::collections::HashMap;

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ris_noma::channel::{db_to_linear, draw_scenario, ChannelConfig};
use ris_noma::codebook::{assign_signatures, grassmannian_design, welch_bound};
use ris_noma::harness::{
    base_channel, emit_csv, fig1_config, fig2_config, fig3_config, run_experiment, CodebookKind,
    MonteCarloSummary, Strategy,
};
use ris_noma::numerics::{psd_project, HermitianMatrix};
use ris_noma::receiver::{
    composite_gains, run_ic_detection, stage_sinr, sum_rate, IcMode,
};
use ris_noma::risopt::{
    build_constraints, random_shifts, sdp_feasibility, sum_rate_shifts, PhaseShifts, SdpParams,
    SdpStatus, SinrConstraintSet,
};

type C64 = Complex<f64>;

const ACCEPTANCE_DROPS: usize = 300;

fn pass(name: &str, detail: String) {
    println!("[PASS] {name}: {detail}");
}

fn random_channel(rng: &mut ChaCha8Rng) -> ChannelConfig {
    ChannelConfig {
        n_bs_antennas: rng.gen_range(1..=32),
        n_ris_elements: rng.gen_range(2..=32),
        n_ues: rng.gen_range(1..=16),
        spreading_length: 4,
        bs_ris_pathloss_db: rng.gen_range(-80.0..-50.0),
        ue_pathloss_mean_db: rng.gen_range(-80.0..-50.0),
        ue_pathloss_spread_db: rng.gen_range(0.0..6.0),
        tx_power_dbm: rng.gen_range(-5.0..30.0),
        noise_power_dbm: -110.0,
    }
}

/// Genie-IC per-stage rates must sum to the covariance log-det rate.
#[test]
fn sum_rate_identity_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0001);
    let codebook = grassmannian_design(4, 16, &mut rng, 2_000).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..1_000 {
        let cfg = random_channel(&mut rng);
        let scenario = draw_scenario(&cfg, &mut rng).unwrap();
        let w = random_shifts(cfg.n_ris_elements, &mut rng);
        let assignment = assign_signatures(cfg.n_ues, &codebook);
        let thresholds = vec![1.0; cfg.n_ues];
        let outcome = run_ic_detection(
            &w,
            &scenario,
            &codebook,
            &assignment,
            &thresholds,
            IcMode::Genie,
        )
        .unwrap();
        let staged: f64 = outcome
            .stage_sinrs
            .iter()
            .map(|s| (1.0 + s).log2())
            .sum::<f64>()
            / cfg.spreading_length as f64;
        let gains = composite_gains(&w, &scenario, &codebook, &assignment).unwrap();
        let direct = sum_rate(&gains, cfg.spreading_length);
        let rel = (staged - direct).abs() / direct.abs().max(1e-300);
        worst = worst.max(rel);
        assert!(
            rel <= 1e-9,
            "identity violated: staged {staged} vs direct {direct} (rel {rel:.3e})"
        );
    }
    pass(
        "sum-rate identity",
        format!("1000 random instances, worst relative error {worst:.3e}"),
    );
}

/// The 4x16 codebook design must land within 1.25x of the Welch bound.
#[test]
fn codebook_design_meets_correlation_gate() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0002);
    let cb = grassmannian_design(4, 16, &mut rng, 10_000).unwrap();
    let bound = welch_bound(4, 16).unwrap();
    assert!((bound - 0.44721).abs() < 1e-4, "unexpected bound {bound}");
    assert!(
        cb.max_xcorr() >= bound - 1e-9 && cb.max_xcorr() <= 0.559,
        "max_xcorr {} outside [{bound}, 0.559]",
        cb.max_xcorr()
    );
    pass(
        "codebook correlation gate",
        format!("max_xcorr {:.5} in [{:.5}, 0.559]", cb.max_xcorr(), bound),
    );
}

/// Best normalized min-slack of rank-1 candidates w = (1, e^{j theta})
/// over a 720-point phase grid.
fn grid_best_slack(constraints: &SinrConstraintSet) -> f64 {
    let normalized: Vec<Option<DMatrix<C64>>> = constraints
        .constraints
        .iter()
        .map(|c| {
            let n = c.frobenius_norm();
            (n > 0.0).then(|| c.matrix().clone().unscale(n))
        })
        .collect();
    let mut best = f64::NEG_INFINITY;
    for i in 0..720 {
        let theta = 2.0 * std::f64::consts::PI * i as f64 / 720.0;
        let w = DVector::from_vec(vec![C64::new(1.0, 0.0), C64::from_polar(1.0, theta)]);
        let min_slack = normalized
            .iter()
            .map(|c| match c {
                Some(m) => (w.adjoint() * m * &w)[(0, 0)].re,
                None => 0.0,
            })
            .fold(f64::INFINITY, f64::min);
        best = best.max(min_slack);
    }
    best
}

/// Solver status must agree with an exhaustive phase-grid oracle on
/// 2-element, 2-UE instances, and must report budget exhaustion on
/// provably infeasible (negative definite) constraint sets.
#[test]
fn sdp_status_matches_phase_grid_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0003);
    let codebook = grassmannian_design(4, 16, &mut rng, 2_000).unwrap();
    let params = SdpParams::default();
    let mut n_feasible = 0;
    for trial in 0..50 {
        let cfg = ChannelConfig {
            n_ris_elements: 2,
            n_ues: 2,
            ..base_channel()
        };
        let scenario = draw_scenario(&cfg, &mut rng).unwrap();
        let assignment = assign_signatures(2, &codebook);
        let thresholds: Vec<f64> = (0..2)
            .map(|_| db_to_linear(rng.gen_range(-10.0..20.0)))
            .collect();
        let w_ref = sum_rate_shifts(&scenario).unwrap();
        let set =
            build_constraints(&scenario, &codebook, &assignment, &thresholds, &w_ref).unwrap();
        let outcome = sdp_feasibility(&set, 2, &params).unwrap();
        let grid = grid_best_slack(&set);
        // A strictly feasible rank-1 grid point forces a solved status.
        if grid >= 1e-3 {
            n_feasible += 1;
            assert_eq!(
                outcome.status,
                SdpStatus::Solved,
                "trial {trial}: grid margin {grid:.3e} but solver did not solve"
            );
        }
    }
    assert!(
        n_feasible >= 10,
        "only {n_feasible} of 50 trials were grid-feasible; oracle coverage too thin"
    );

    // Negative definite constraints are infeasible for any PSD W != 0.
    let mut n_exhausted = 0;
    for _ in 0..10 {
        let dim = 2;
        let mut m = DMatrix::<C64>::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        let nd = HermitianMatrix::symmetrize(
            -(&m * m.adjoint()) - DMatrix::<C64>::identity(dim, dim).scale(0.1),
        );
        let set = SinrConstraintSet {
            constraints: vec![nd],
            epsilons: vec![1.0],
            filters_used: vec![DVector::zeros(4)],
            order_used: vec![0],
        };
        let outcome = sdp_feasibility(&set, dim, &params).unwrap();
        assert_eq!(outcome.status, SdpStatus::BudgetExhausted);
        n_exhausted += 1;
    }
    pass(
        "SDP vs phase-grid oracle",
        format!(
            "{n_feasible} grid-feasible trials all solved; {n_exhausted} negative definite sets all exhausted"
        ),
    );
}

fn point_map(
    summary: &MonteCarloSummary,
) -> HashMap<(u64, Strategy), (f64, f64)> {
    summary
        .points
        .iter()
        .map(|p| {
            (
                ((p.sweep_value * 1000.0).round() as u64, p.strategy),
                (p.mean_detected, p.ci_halfwidth_95),
            )
        })
        .collect()
}

/// Mean detected UEs vs. K must order proposed >= sum-rate >= random at
/// every K, and the proposed curve must track the 1:1 line for small K.
#[test]
fn detected_vs_active_ues_ordering() {
    let mut cfg = fig1_config(1.0);
    cfg.n_drops = ACCEPTANCE_DROPS;
    let summary = run_experiment(&cfg).unwrap();
    let map = point_map(&summary);
    for k in 2..=16u64 {
        let key = k * 1000;
        let proposed = map[&(key, Strategy::Proposed)].0;
        let sum_rate = map[&(key, Strategy::SumRate)].0;
        let random = map[&(key, Strategy::Random)].0;
        assert!(
            proposed >= sum_rate && sum_rate >= random,
            "ordering broken at K={k}: proposed {proposed:.3}, sum_rate {sum_rate:.3}, random {random:.3}"
        );
        if k <= 8 {
            assert!(
                proposed >= 0.95 * k as f64,
                "proposed {proposed:.3} below 0.95*K at K={k}"
            );
        }
    }
    pass(
        "detected vs active UEs",
        format!(
            "proposed >= sum_rate >= random at K=2..16 over {ACCEPTANCE_DROPS} drops; proposed >= 0.95K for K <= 8"
        ),
    );
}

/// The non-orthogonal codebook must beat identity-codebook reuse for
/// every strategy at every pathloss spread, with CI-separated gaps, and
/// the sum-rate strategy must not degrade as the spread grows.
#[test]
fn noma_beats_oma_across_pathloss_spread() {
    let mut noma_cfg = fig2_config(CodebookKind::Grassmannian);
    let mut oma_cfg = fig2_config(CodebookKind::Oma);
    noma_cfg.n_drops = ACCEPTANCE_DROPS;
    oma_cfg.n_drops = ACCEPTANCE_DROPS;
    let noma = point_map(&run_experiment(&noma_cfg).unwrap());
    let oma = point_map(&run_experiment(&oma_cfg).unwrap());

    let strategies = [Strategy::Proposed, Strategy::SumRate, Strategy::Random];
    let mut min_gap = f64::INFINITY;
    for s in 0..=6u64 {
        let key = s * 1000;
        for strategy in strategies {
            let (mn, cn) = noma[&(key, strategy)];
            let (mo, co) = oma[&(key, strategy)];
            let gap = mn - mo;
            min_gap = min_gap.min(gap - (cn + co));
            assert!(
                gap > cn + co,
                "{} at spread {s} dB: NOMA {mn:.3} +- {cn:.3} vs OMA {mo:.3} +- {co:.3}",
                strategy.name()
            );
        }
    }
    for s in 0..6u64 {
        let lo = noma[&(s * 1000, Strategy::SumRate)].0;
        let hi = noma[&((s + 1) * 1000, Strategy::SumRate)].0;
        assert!(
            hi >= lo - 1e-12,
            "sum-rate strategy degraded from spread {s} to {} dB: {lo:.3} -> {hi:.3}",
            s + 1
        );
    }
    pass(
        "codebook comparison across spread",
        format!("NOMA > OMA with CI separation everywhere (worst margin {min_gap:.3}); sum-rate curve non-decreasing"),
    );
}

/// At low transmit power the optimized shifts must beat random shifts
/// for every RIS size, with CI separation from 16 elements up.
#[test]
fn detected_vs_ris_elements_ordering() {
    let mut cfg = fig3_config(-5.0);
    cfg.sweep.values = vec![8.0, 16.0, 32.0, 64.0];
    cfg.n_drops = ACCEPTANCE_DROPS;
    let map = point_map(&run_experiment(&cfg).unwrap());
    for &n_s in &[8u64, 16, 32, 64] {
        let key = n_s * 1000;
        let (ms, cs) = map[&(key, Strategy::SumRate)];
        let (mr, cr) = map[&(key, Strategy::Random)];
        let (mp, _) = map[&(key, Strategy::Proposed)];
        assert!(
            ms > mr,
            "sum_rate {ms:.3} not above random {mr:.3} at N_s={n_s}"
        );
        if n_s >= 16 {
            assert!(
                ms - mr > cs + cr,
                "no CI separation at N_s={n_s}: {ms:.3} +- {cs:.3} vs {mr:.3} +- {cr:.3}"
            );
        }
        assert!(
            mp >= ms,
            "proposed {mp:.3} below sum_rate {ms:.3} at N_s={n_s}"
        );
    }
    pass(
        "detected vs RIS elements",
        format!("sum_rate > random at N_s in 8..64 (CI-separated from 16), proposed >= sum_rate, {ACCEPTANCE_DROPS} drops"),
    );
}

/// Cheap structural invariants: global-phase invariance of detection,
/// SINR monotonicity in interference, detection monotonicity in the
/// threshold, PSD-projection idempotence, and byte-identical CSV output.
#[test]
fn invariant_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0007);
    let codebook = grassmannian_design(4, 16, &mut rng, 2_000).unwrap();

    // Global phase on w leaves every stage SINR unchanged.
    for _ in 0..50 {
        let cfg = random_channel(&mut rng);
        let scenario = draw_scenario(&cfg, &mut rng).unwrap();
        let assignment = assign_signatures(cfg.n_ues, &codebook);
        let thresholds = vec![db_to_linear(4.0); cfg.n_ues];
        let phases: Vec<f64> = (0..cfg.n_ris_elements)
            .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
            .collect();
        let shift = rng.gen_range(0.0..std::f64::consts::TAU);
        let w = PhaseShifts::from_phases(&phases);
        let w2 =
            PhaseShifts::from_phases(&phases.iter().map(|p| p + shift).collect::<Vec<_>>());
        for mode in [IcMode::Genie, IcMode::Realistic] {
            let a = run_ic_detection(&w, &scenario, &codebook, &assignment, &thresholds, mode)
                .unwrap();
            let b = run_ic_detection(&w2, &scenario, &codebook, &assignment, &thresholds, mode)
                .unwrap();
            assert_eq!(a.order, b.order);
            for (x, y) in a.stage_sinrs.iter().zip(b.stage_sinrs.iter()) {
                assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
            }
        }
    }

    // Adding interferers can only lower a stage SINR.
    for _ in 0..50 {
        let cfg = random_channel(&mut rng);
        if cfg.n_ues < 3 {
            continue;
        }
        let scenario = draw_scenario(&cfg, &mut rng).unwrap();
        let assignment = assign_signatures(cfg.n_ues, &codebook);
        let w = random_shifts(cfg.n_ris_elements, &mut rng);
        let gains = composite_gains(&w, &scenario, &codebook, &assignment).unwrap();
        let v = ris_noma::receiver::mmse_filter(&gains, 0, &(0..cfg.n_ues).collect::<Vec<_>>())
            .unwrap();
        let small = stage_sinr(&gains, &v, 0, &[1]);
        let large = stage_sinr(&gains, &v, 0, &(1..cfg.n_ues).collect::<Vec<_>>());
        assert!(large <= small + 1e-12);
    }

    // Raising the threshold never detects more UEs.
    for _ in 0..30 {
        let cfg = random_channel(&mut rng);
        let scenario = draw_scenario(&cfg, &mut rng).unwrap();
        let assignment = assign_signatures(cfg.n_ues, &codebook);
        let w = random_shifts(cfg.n_ris_elements, &mut rng);
        let mut prev = usize::MAX;
        for eps_db in [-3.0, 0.0, 3.0, 6.0, 9.0] {
            let thresholds = vec![db_to_linear(eps_db); cfg.n_ues];
            for mode in [IcMode::Genie, IcMode::Realistic] {
                let out =
                    run_ic_detection(&w, &scenario, &codebook, &assignment, &thresholds, mode)
                        .unwrap();
                if mode == IcMode::Realistic {
                    assert!(out.n_detected <= prev);
                    prev = out.n_detected;
                }
            }
        }
    }

    // Projecting onto the PSD cone is idempotent.
    for _ in 0..50 {
        let dim = rng.gen_range(2..=8);
        let mut m = DMatrix::<C64>::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        let h = HermitianMatrix::symmetrize(m);
        let once = psd_project(&h).unwrap();
        let twice = psd_project(&once).unwrap();
        let diff = (once.matrix() - twice.matrix()).norm();
        assert!(diff <= 1e-10 * once.frobenius_norm().max(1.0));
    }

    // Two runs of the same experiment emit byte-identical CSV.
    let mut cfg = fig1_config(4.0);
    cfg.channel.n_ris_elements = 8;
    cfg.sweep.values = vec![2.0, 6.0];
    cfg.n_drops = 10;
    let dir = tempfile::tempdir().unwrap();
    let (p1, p2) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    emit_csv(&run_experiment(&cfg).unwrap(), &p1).unwrap();
    emit_csv(&run_experiment(&cfg).unwrap(), &p2).unwrap();
    assert_eq!(
        std::fs::read(&p1).unwrap(),
        std::fs::read(&p2).unwrap(),
        "CSV output is not deterministic"
    );

    pass(
        "invariant suite",
        "global phase, interference and threshold monotonicity, PSD idempotence, CSV determinism".into(),
    );
}
