mod common;

use perspqp::{
    generate, init_tmax_from_lp, solve_bisection, solve_cd, BisectOptions, CdOptions, GenSpec,
    InitialT, SolveStatus, StopReason, StopRule,
};

use common::{golden_section, rel_err};

fn sample() -> Vec<perspqp::ConicInstance> {
    [
        GenSpec::cardinality(30, 5, 0.1, 1.0, 1),
        GenSpec::cardinality(60, 10, 0.5, 3.0, 2),
        GenSpec::grid(4, 4, 5, 0.5, 2.0, 3),
        GenSpec::grid(5, 3, 10, 0.1, 1.0, 4),
    ]
    .iter()
    .map(|s| generate(s).unwrap())
    .collect()
}

#[test]
fn cd_and_bisection_match_golden_section() {
    for inst in sample() {
        let (_, z) = golden_section(&inst);
        let cd = solve_cd(&inst, &CdOptions::default(), None).unwrap();
        let bi = solve_bisection(&inst, &BisectOptions::default()).unwrap();
        assert!(
            rel_err(cd.objective, z) < 1e-5,
            "cd {} vs {z}",
            cd.objective
        );
        assert!(
            rel_err(bi.objective, z) < 1e-5,
            "bisect {} vs {z}",
            bi.objective
        );
        for r in [&cd, &bi] {
            assert_eq!(r.status, SolveStatus::Optimal);
            assert!(r.kkt_residual() <= 1e-5);
            assert!((r.t - inst.q.quad(&r.x).sqrt()).abs() <= 1e-7 * (1.0 + r.t));
        }
    }
}

#[test]
fn t_sequence_is_monotone_from_either_side() {
    for inst in sample() {
        let tstar = solve_cd(&inst, &CdOptions::default(), None).unwrap().t;
        let up = solve_cd(
            &inst,
            &CdOptions {
                t0: InitialT::Value(0.01 * tstar),
                ..CdOptions::default()
            },
            None,
        )
        .unwrap();
        assert!(up.trace.windows(2).all(|w| w[1].t >= w[0].t - 1e-10));
        let down = solve_cd(
            &inst,
            &CdOptions {
                t0: InitialT::Value(100.0 * tstar),
                ..CdOptions::default()
            },
            None,
        )
        .unwrap();
        assert!(down.trace.windows(2).all(|w| w[1].t <= w[0].t + 1e-10));
    }
}

#[test]
fn lp_sentinel_gives_an_upper_starting_point() {
    for inst in sample() {
        let (tmax, _) = init_tmax_from_lp(&inst).unwrap();
        let r = solve_cd(&inst, &CdOptions::default(), None).unwrap();
        assert!(r.trace[0].t.is_infinite());
        assert!(r.t <= tmax + 1e-9);
    }
}

#[test]
fn brackets_halve_and_contain_optimum() {
    for inst in sample() {
        let r = solve_bisection(&inst, &BisectOptions::default()).unwrap();
        assert!(!r.brackets.is_empty());
        for w in r.brackets.windows(2) {
            assert!(w[1].1 - w[1].0 <= 0.5 * (w[0].1 - w[0].0) + 1e-12);
        }
        let (lo, hi) = *r.brackets.last().unwrap();
        assert!(lo - 1e-7 <= r.t && r.t <= hi + 1e-7);
    }
}

#[test]
fn warm_restart_from_previous_basis() {
    let inst = &sample()[1];
    let first = solve_cd(inst, &CdOptions::default(), None).unwrap();
    let again = solve_cd(inst, &CdOptions::default(), Some((&first.basis, first.t))).unwrap();
    assert!(rel_err(again.objective, first.objective) < 1e-9);
    assert!(again.pivot_count <= first.pivot_count);
}

#[test]
fn relative_step_rule_is_reported() {
    let inst = &sample()[0];
    let opt = CdOptions {
        stop: StopRule::RelativeStep,
        ..CdOptions::default()
    };
    let r = solve_cd(inst, &opt, None).unwrap();
    assert_eq!(r.stop, StopReason::RelativeStep);
}

#[test]
fn tighter_tolerance_never_hurts() {
    let inst = generate(&GenSpec::cardinality(100, 10, 0.1, 2.0, 9)).unwrap();
    let reference = solve_cd(
        &inst,
        &CdOptions {
            delta: 1e-10,
            qp_eps: 1e-12,
            ..CdOptions::default()
        },
        None,
    )
    .unwrap()
    .objective;
    let mut last = f64::INFINITY;
    for k in 2..=8 {
        let r = solve_cd(
            &inst,
            &CdOptions::default().with_delta(10f64.powi(-k)),
            None,
        )
        .unwrap();
        let gap = ((reference - r.objective) / reference).abs();
        assert!(gap <= last, "delta 1e-{k}: {gap} > {last}");
        last = gap;
    }
}
