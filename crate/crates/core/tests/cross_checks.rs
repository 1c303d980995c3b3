//! End-to-end agreement between the iterative solver and the independent
//! reference solutions, plus reproducibility guarantees the harness relies on.

use cran_mm_core::combining::{build_combiner, Scheme};
use cran_mm_core::config::SystemConfig;
use cran_mm_core::oracle::{grid_search_small, scalar_closed_form, scalar_instance_family};
use cran_mm_core::rates::{check_feasibility, weighted_sum_rate};
use cran_mm_core::scenario::ChannelRealization;
use cran_mm_core::solver::{assemble_surrogate, mm_solve, solve_surrogate};

fn tighten(cfg: &mut SystemConfig) {
    cfg.solver.rel_tol = 1e-8;
    cfg.solver.max_iters = 300;
}

#[test]
fn mm_matches_the_scalar_closed_form() {
    for inst in scalar_instance_family(5, 31) {
        let (mut cfg, channels) = inst.to_system().unwrap();
        tighten(&mut cfg);
        let combiner = build_combiner(&channels.b, &channels.g, Scheme::Mr).unwrap();
        let result = mm_solve(&channels, &combiner, &cfg).unwrap();
        let truth = scalar_closed_form(&inst);

        assert!(
            result.sum_rate <= truth.rate * (1.0 + 1e-6),
            "solver beat the optimum: {} vs {}",
            result.sum_rate,
            truth.rate
        );
        assert!(
            result.sum_rate >= truth.rate * 0.99,
            "solver fell short of the optimum: {} vs {}",
            result.sum_rate,
            truth.rate
        );
    }
}

#[test]
fn mm_matches_the_grid_on_a_scalar_instance() {
    let inst = &scalar_instance_family(1, 77)[0];
    let (mut cfg, channels) = inst.to_system().unwrap();
    tighten(&mut cfg);
    let combiner = build_combiner(&channels.b, &channels.g, Scheme::Mr).unwrap();
    let result = mm_solve(&channels, &combiner, &cfg).unwrap();
    let grid = grid_search_small(&channels, &combiner, &cfg, 200).unwrap();

    let gap = (result.sum_rate - grid.objective).abs() / grid.objective.max(1e-12);
    assert!(
        gap <= 0.01,
        "solver {} vs grid {} (gap {gap})",
        result.sum_rate,
        grid.objective
    );
}

#[test]
fn mm_stays_inside_a_coarse_grid_band_with_two_rrhs() {
    let mut cfg = SystemConfig::desk_default();
    cfg.K = 1;
    cfg.L = 2;
    cfg.N_U = vec![1];
    cfg.N_H = vec![1, 1];
    cfg.N_C = 8;
    cfg.weights = vec![1.0];
    tighten(&mut cfg);
    cfg.validate().unwrap();

    let channels = ChannelRealization::sample(&cfg, 5, 0).unwrap();
    let combiner = build_combiner(&channels.b, &channels.g, Scheme::Zf).unwrap();
    let result = mm_solve(&channels, &combiner, &cfg).unwrap();
    let grid = grid_search_small(&channels, &combiner, &cfg, 11).unwrap();

    // The grid is feasible-by-construction, so the solver must not lose to
    // it; the grid in turn can only trail the optimum by its resolution.
    assert!(
        result.sum_rate >= grid.objective * (1.0 - 1e-3),
        "solver lost to a coarse grid: {} vs {}",
        result.sum_rate,
        grid.objective
    );
    assert!(
        result.sum_rate <= grid.objective * 1.10,
        "solver overshot the grid band: {} vs {}",
        result.sum_rate,
        grid.objective
    );
}

#[test]
fn surrogates_stay_tangent_and_below_along_the_solve_path() {
    let mut cfg = SystemConfig::desk_default();
    cfg.K = 2;
    cfg.L = 2;
    cfg.N_U = vec![1, 1];
    cfg.N_H = vec![2, 2];
    cfg.N_C = 12;
    cfg.weights = vec![1.0, 1.0];
    cfg.validate().unwrap();

    let channels = ChannelRealization::sample(&cfg, 9, 2).unwrap();
    let combiner = build_combiner(&channels.b, &channels.g, Scheme::Zf).unwrap();
    let weights = cfg.effective_weights();

    let mut vars = cran_mm_core::initialize(&channels, &combiner, &cfg).unwrap();
    let mut prev_obj =
        weighted_sum_rate(&vars, &channels, &weights, &cfg.solver).unwrap();

    for _ in 0..4 {
        let sp = assemble_surrogate(&vars, &channels, &combiner, &cfg).unwrap();

        let anchor_gap = (sp.objective_at(&vars).unwrap() - prev_obj).abs();
        assert!(
            anchor_gap <= 1e-8 * prev_obj.abs().max(1.0),
            "surrogate missed the anchor by {anchor_gap}"
        );

        let (next, _) = solve_surrogate(&sp).unwrap();
        let surrogate_at_next = sp.objective_at(&next).unwrap();
        let truth_at_next =
            weighted_sum_rate(&next, &channels, &weights, &cfg.solver).unwrap();
        assert!(
            surrogate_at_next <= truth_at_next + 1e-7 * truth_at_next.abs().max(1.0),
            "surrogate exceeded the true objective: {surrogate_at_next} vs {truth_at_next}"
        );
        assert!(
            truth_at_next >= prev_obj - 1e-9,
            "objective regressed: {truth_at_next} vs {prev_obj}"
        );

        let report = check_feasibility(&next, &channels, &combiner, &cfg);
        assert!(
            report.worst_violation >= -cfg.solver.feas_tol,
            "iterate left the feasible set: {}",
            report.worst_violation
        );

        vars = next;
        prev_obj = truth_at_next;
    }
}

#[test]
fn identical_seeds_reproduce_channels_and_solves() {
    let mut cfg = SystemConfig::desk_default();
    cfg.K = 2;
    cfg.L = 2;
    cfg.N_U = vec![2, 2];
    cfg.N_H = vec![2, 2];
    cfg.N_C = 16;
    cfg.weights = vec![1.0, 1.0];
    cfg.validate().unwrap();

    let a = ChannelRealization::sample(&cfg, 42, 7).unwrap();
    let b = ChannelRealization::sample(&cfg, 42, 7).unwrap();
    for (ha, hb) in a.h.iter().flatten().zip(b.h.iter().flatten()) {
        assert_eq!(ha, hb);
    }
    assert_eq!(a.topology.ue_xy, b.topology.ue_xy);
    assert_eq!(a.b, b.b);

    let combiner_a = build_combiner(&a.b, &a.g, Scheme::Zf).unwrap();
    let combiner_b = build_combiner(&b.b, &b.g, Scheme::Zf).unwrap();
    let ra = mm_solve(&a, &combiner_a, &cfg).unwrap();
    let rb = mm_solve(&b, &combiner_b, &cfg).unwrap();
    assert_eq!(ra.trace.objective_per_iter, rb.trace.objective_per_iter);
    assert_eq!(ra.sum_rate.to_bits(), rb.sum_rate.to_bits());

    let other_trial = ChannelRealization::sample(&cfg, 42, 8).unwrap();
    assert_ne!(a.h[0][0], other_trial.h[0][0]);
    let other_seed = ChannelRealization::sample(&cfg, 43, 7).unwrap();
    assert_ne!(a.h[0][0], other_seed.h[0][0]);
}

#[test]
fn rebuilding_with_a_different_array_size_keeps_the_topology() {
    let mut cfg = SystemConfig::desk_default();
    cfg.K = 2;
    cfg.L = 2;
    cfg.N_U = vec![1, 1];
    cfg.N_H = vec![2, 2];
    cfg.N_C = 50;
    cfg.weights = vec![1.0, 1.0];
    cfg.validate().unwrap();

    let base = ChannelRealization::sample(&cfg, 3, 0).unwrap();
    let mut smaller = cfg.clone();
    smaller.N_C = 25;
    let rebuilt =
        ChannelRealization::from_parts(base.topology.clone(), base.h.clone(), &smaller);

    assert_eq!(rebuilt.b.nrows(), 25);
    assert_eq!(rebuilt.topology.theta, base.topology.theta);
    for (ha, hb) in base.h.iter().flatten().zip(rebuilt.h.iter().flatten()) {
        assert_eq!(ha, hb);
    }
    for l in 0..cfg.L {
        let gain = rebuilt.g.column(l).norm_squared();
        let expected = rebuilt.topology.beta_fronthaul[l] * 25.0;
        assert!(
            (gain - expected).abs() <= 1e-9 * expected,
            "{gain} vs {expected}"
        );
    }
}
