mod common;

use feederopt::sams::{assign_at_waits, calculated_waits, fixed_point};
use feederopt::{build_graph, Scenario, Solution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn no_feeder_access_converges_at_once() {
    let mut sc = common::fixture("t1");
    for z in &mut sc.zones {
        if z.walk_access.is_empty() {
            z.walk_access = z.feeder_access.clone();
        }
        z.feeder_access.clear();
    }
    let g = build_graph(&sc).unwrap();
    let fp = fixed_point(&sc, &g, sc.baseline.as_ref().unwrap());
    assert!(fp.converged);
    assert_eq!(fp.iterations, 1);
    assert!(fp.wait_min.iter().all(|&w| w == sc.sams.min_wait_min));
}

#[test]
fn huge_fleet_is_uncongested() {
    let mut sc = common::fixture("t2");
    sc.sams.max_fleet = 1e9;
    let g = build_graph(&sc).unwrap();
    let mut sol = sc.baseline.clone().unwrap();
    sol.fleet.iter_mut().for_each(|s| *s = 1e9);
    let fp = fixed_point(&sc, &g, &sol);
    assert!(fp.converged);
    assert!(fp.utilization.iter().all(|&r| r < sc.sams.cutoff_lo));
    assert!(fp.wait_min.iter().all(|&w| w == sc.sams.min_wait_min));
}

/// Re-running the assignment and wait curve at a converged wait moves it by
/// at most the tolerance.
fn check_self_consistent(sc: &Scenario, sol: &Solution) -> bool {
    let g = build_graph(sc).unwrap();
    let fp = fixed_point(sc, &g, sol);
    assert!(fp.wait_min.iter().all(|&w| w >= sc.sams.min_wait_min));
    assert!(fp.utilization.iter().all(|&r| r >= 0.0));
    if !fp.converged {
        return false;
    }
    assert!(fp.iterations <= sc.sams.fp_max_outer);
    let asg = assign_at_waits(sc, &g, sol, &fp.wait_min);
    let (_, again) = calculated_waits(sc, sol, &asg);
    for (w, w2) in fp.wait_min.iter().zip(&again) {
        assert!((w - w2).abs() <= sc.sams.fp_tol_min, "{w} -> {w2}");
    }
    true
}

#[test]
fn warm_start_fixed_points_converge_and_are_self_consistent() {
    let converged = (0..20)
        .filter(|&seed| {
            let sc = common::random_scenario(seed);
            check_self_consistent(&sc, &feederopt::repair(&Solution::mid_box(&sc), &sc))
        })
        .count();
    assert!(converged >= 18, "{converged}/20 converged");
}

#[test]
fn random_solutions_are_self_consistent_when_converged() {
    // Near-empty fleets can make the all-or-nothing routes flip between
    // iterations, so only consistency is required here.
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let converged = (0..40)
        .filter(|&seed| {
            let sc = common::random_scenario(seed);
            let sol = feederopt::repair(&common::random_solution(&sc, &mut rng), &sc);
            check_self_consistent(&sc, &sol)
        })
        .count();
    assert!(converged >= 30, "{converged}/40 converged");
}

#[test]
fn middle_branch_fixture_is_consistent() {
    // Pick the fleet so the uncongested assignment lands between the cutoffs.
    let sc = common::fixture("t1");
    let g = build_graph(&sc).unwrap();
    let mut sol = sc.baseline.clone().unwrap();
    let probe = assign_at_waits(&sc, &g, &sol, &[sc.sams.min_wait_min; 2]);
    for (k, fl) in probe.flows.iter().enumerate() {
        sol.fleet[k] = fl.feeder_time_pax_h / (sc.sams.avg_occupancy * 0.6);
    }
    let fp = fixed_point(&sc, &g, &sol);
    assert!(fp.converged);
    for k in 0..2 {
        let rho = fp.utilization[k];
        assert!(rho > sc.sams.cutoff_lo && rho <= sc.sams.cutoff_hi, "rho {rho}");
        let w = feederopt::sams::wait_time(rho, &sc.sams);
        assert!((fp.wait_min[k] - w).abs() <= sc.sams.fp_tol_min);
    }
}
