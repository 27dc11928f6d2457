//! SAV feeder performance: the piecewise-linear wait curve, fleet
//! utilization, and the fixed point coupling feeder wait with route and mode
//! choice.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::choice::{mode_split, transit_utility, ModeSplit};
use crate::evaluator::Solution;
use crate::graph::{assign_flows, update_costs, LinkFlows, MultimodalGraph, PathResult, ShortestPathTree};
use crate::scenario::{SamsParams, Scenario};

const INNER_MAX_ITERS: usize = 50;
const INNER_TOL_MIN: f64 = 0.01;

/// Average feeder wait (minutes) at utilization `rho`.
pub fn wait_time(rho: f64, sp: &SamsParams) -> f64 {
    let (w, a1, a2) = (sp.min_wait_min, sp.cutoff_lo, sp.cutoff_hi);
    if rho <= a1 {
        w
    } else if rho <= a2 {
        w + sp.slope_lo_min * (rho - a1)
    } else {
        w + sp.slope_lo_min * (a2 - a1) + sp.slope_hi_min * (rho - a2)
    }
}

/// Fleet utilization: feeder passenger-hours per unit of seat capacity.
///
/// Returns `f64::INFINITY` when there is feeder demand but no fleet.
pub fn utilization(feeder_time_pax_h: f64, fleet: f64, occupancy: f64) -> f64 {
    if feeder_time_pax_h <= 0.0 {
        0.0
    } else if fleet <= 0.0 {
        f64::INFINITY
    } else {
        feeder_time_pax_h / (occupancy * fleet)
    }
}

/// Wait used for routing: the curve value capped at the maximum wait.
pub fn routing_wait(rho: f64, sp: &SamsParams) -> f64 {
    if rho.is_finite() {
        wait_time(rho, sp).min(sp.max_wait_min)
    } else {
        sp.max_wait_min
    }
}

/// Solves `w = routing_wait(rho · exp(elasticity · (w − w_ref)))` for `w`.
///
/// The right side is nonincreasing in `w`, so the root is unique and
/// bracketed by `[min_wait, max_wait]`; bisection finds it.
pub fn anticipated_wait(rho: f64, w_ref: f64, elasticity: f64, sp: &SamsParams) -> f64 {
    if rho <= 0.0 {
        return sp.min_wait_min;
    }
    if !rho.is_finite() {
        return sp.max_wait_min;
    }
    let residual = |w: f64| routing_wait(rho * (elasticity * (w - w_ref)).exp(), sp) - w;
    let (mut lo, mut hi) = (sp.min_wait_min, sp.max_wait_min);
    if residual(lo) <= 0.0 {
        return lo;
    }
    if residual(hi) >= 0.0 {
        return hi;
    }
    for _ in 0..INNER_MAX_ITERS {
        if hi - lo <= INNER_TOL_MIN {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if residual(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Routes, splits and link loads for one set of feeder waits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assignment {
    /// One per scenario demand entry.
    pub paths: Vec<PathResult>,
    /// One per scenario demand entry.
    pub splits: Vec<ModeSplit>,
    /// One per period.
    pub flows: Vec<LinkFlows>,
}

/// Runs shortest paths, mode choice and loading at the given waits.
pub fn assign_at_waits(sc: &Scenario, g: &MultimodalGraph, sol: &Solution, waits: &[f64]) -> Assignment {
    let mut by_origin: Vec<BTreeMap<usize, Vec<usize>>> = vec![BTreeMap::new(); sc.num_periods()];
    for (i, d) in sc.demand.iter().enumerate() {
        by_origin[d.period].entry(d.origin).or_default().push(i);
    }

    let mut paths = vec![PathResult::unreachable(); sc.demand.len()];
    let mut splits = vec![ModeSplit::default(); sc.demand.len()];
    let mut flows = Vec::with_capacity(sc.num_periods());
    for (k, origins) in by_origin.iter().enumerate() {
        let freqs = sol.period_frequencies(k);
        let overlay = update_costs(g, &freqs, waits[k], &sc.choice);
        for (&origin, entries) in origins {
            let tree = g.is_zone_connected(origin).then(|| ShortestPathTree::new(g, &overlay, origin));
            for &i in entries {
                let d = &sc.demand[i];
                let path = match &tree {
                    Some(t) if g.is_zone_connected(d.destination) => t.path_to(g, &overlay, d.destination),
                    _ => PathResult::unreachable(),
                };
                let u = if path.reachable {
                    transit_utility(path.generalized_cost_min, d.transit_fare, &sc.choice)
                } else {
                    f64::NEG_INFINITY
                };
                splits[i] = mode_split(d.trips_per_h, u, d.p2p_sams_utility, d.drive_utility);
                paths[i] = path;
            }
        }
        let loads = origins.values().flatten().map(|&i| (splits[i].transit_trips_per_h, &paths[i]));
        flows.push(assign_flows(g, loads));
    }
    Assignment { paths, splits, flows }
}

/// Utilizations and calculated waits implied by an assignment.
pub fn calculated_waits(sc: &Scenario, sol: &Solution, asg: &Assignment) -> (Vec<f64>, Vec<f64>) {
    let rho: Vec<f64> = asg
        .flows
        .iter()
        .zip(&sol.fleet)
        .map(|(fl, &s)| utilization(fl.feeder_time_pax_h, s, sc.sams.avg_occupancy))
        .collect();
    let waits = rho.iter().map(|&r| routing_wait(r, &sc.sams)).collect();
    (rho, waits)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointResult {
    /// Wait per period used for the final assignment.
    pub wait_min: Vec<f64>,
    pub utilization: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub assignment: Assignment,
}

/// Fixed point between feeder wait and the assignment it induces.
///
/// Starts every period at the minimum wait. Each outer iteration assigns
/// demand at the current waits, computes the calculated wait from the
/// resulting utilization, anticipates the demand response with the scalar
/// elasticity fixed point, and blends the two. Stops once both the blended
/// and the calculated wait are within tolerance of the current wait, or when
/// the outer cap is reached (flagged as not converged).
pub fn fixed_point(sc: &Scenario, g: &MultimodalGraph, sol: &Solution) -> FixedPointResult {
    let sp = &sc.sams;
    let elasticity = sc.choice.beta_time * sc.choice.wait_factor;
    let mut waits = vec![sp.min_wait_min; sc.num_periods()];
    let mut iterations = 0;
    loop {
        iterations += 1;
        let assignment = assign_at_waits(sc, g, sol, &waits);
        let (rho, calc) = calculated_waits(sc, sol, &assignment);
        let mut next = Vec::with_capacity(waits.len());
        let mut gap: f64 = 0.0;
        for k in 0..waits.len() {
            let approx = anticipated_wait(rho[k], waits[k], elasticity, sp);
            let blended = sp.fp_step_approx * approx + sp.fp_step_calc * calc[k];
            gap = gap.max((blended - waits[k]).abs()).max((calc[k] - waits[k]).abs());
            next.push(blended);
        }
        let converged = gap <= sp.fp_tol_min;
        if converged || iterations >= sp.fp_max_outer {
            return FixedPointResult { wait_min: waits, utilization: rho, iterations, converged, assignment };
        }
        waits = next;
    }
}
