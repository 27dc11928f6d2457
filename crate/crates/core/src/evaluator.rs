//! Fitness evaluation of a frequency/fleet decision: runs the feeder fixed
//! point, computes boarding rejections, served demand and operating cost,
//! and repairs candidates onto the daily budget.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indices, Execution};
use crate::graph::{LinkFlows, MultimodalGraph, PathResult};
use crate::sams::fixed_point;
use crate::scenario::Scenario;

/// Relative slack used when deciding whether a budget is exceeded.
const BUDGET_SLACK: f64 = 1e-12;

/// Largest grid the exhaustive oracle accepts.
pub const BRUTE_FORCE_LIMIT: f64 = 1e7;

/// Decision vector: one frequency per (pattern, period), one fleet size per period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Solution {
    /// `freq_per_h[p][k]`, vehicles per hour.
    pub freq_per_h: Vec<Vec<f64>>,
    /// `fleet[k]`, vehicles.
    pub fleet: Vec<f64>,
}

impl Solution {
    pub fn zeros(sc: &Scenario) -> Self {
        Solution {
            freq_per_h: vec![vec![0.0; sc.num_periods()]; sc.num_patterns()],
            fleet: vec![0.0; sc.num_periods()],
        }
    }

    /// Centre of the decision box.
    pub fn mid_box(sc: &Scenario) -> Self {
        Solution {
            freq_per_h: sc.patterns.iter().map(|p| vec![0.5 * p.max_frequency; sc.num_periods()]).collect(),
            fleet: vec![0.5 * sc.sams.max_fleet; sc.num_periods()],
        }
    }

    pub fn period_frequencies(&self, k: usize) -> Vec<f64> {
        self.freq_per_h.iter().map(|row| row[k]).collect()
    }

    pub fn check_dimensions(&self, sc: &Scenario) -> Result<()> {
        let (np, nk) = (sc.num_patterns(), sc.num_periods());
        if self.freq_per_h.len() != np {
            return Err(Error::DimensionMismatch(format!(
                "{} frequency rows for {np} patterns",
                self.freq_per_h.len()
            )));
        }
        if let Some(row) = self.freq_per_h.iter().find(|r| r.len() != nk) {
            return Err(Error::DimensionMismatch(format!("frequency row of length {} for {nk} periods", row.len())));
        }
        if self.fleet.len() != nk {
            return Err(Error::DimensionMismatch(format!("{} fleet sizes for {nk} periods", self.fleet.len())));
        }
        Ok(())
    }

    /// Frequency and fleet boxes hold.
    pub fn within_bounds(&self, sc: &Scenario) -> bool {
        let freq_ok = self
            .freq_per_h
            .iter()
            .zip(&sc.patterns)
            .all(|(row, pat)| row.iter().all(|&f| (0.0..=pat.max_frequency).contains(&f)));
        freq_ok && self.fleet.iter().all(|&s| (0.0..=sc.sams.max_fleet).contains(&s))
    }

    /// Flat layout: frequencies pattern-major, then fleet per period.
    pub fn to_flat(&self) -> Vec<f64> {
        self.freq_per_h.iter().flatten().chain(&self.fleet).copied().collect()
    }

    pub fn from_flat(sc: &Scenario, x: &[f64]) -> Self {
        let nk = sc.num_periods();
        let np = sc.num_patterns();
        assert_eq!(x.len(), np * nk + nk, "flat vector length");
        Solution { freq_per_h: x[..np * nk].chunks(nk).map(<[f64]>::to_vec).collect(), fleet: x[np * nk..].to_vec() }
    }

    /// Lower and upper bounds matching [`Solution::to_flat`].
    pub fn flat_bounds(sc: &Scenario) -> (Vec<f64>, Vec<f64>) {
        let nk = sc.num_periods();
        let mut hi = Vec::with_capacity(sc.num_patterns() * nk + nk);
        for p in &sc.patterns {
            hi.extend(std::iter::repeat_n(p.max_frequency, nk));
        }
        hi.extend(std::iter::repeat_n(sc.sams.max_fleet, nk));
        (vec![0.0; hi.len()], hi)
    }

    fn lex_cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (self.to_flat(), other.to_flat());
        for (x, y) in a.iter().zip(&b) {
            match x.total_cmp(y) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        a.len().cmp(&b.len())
    }
}

/// Line-capacity rejection: peak load above the hourly capacity.
pub fn transit_rejection(peak_flow: f64, capacity_per_veh: f64, freq: f64) -> f64 {
    (peak_flow - capacity_per_veh * freq).max(0.0)
}

/// Feeder rejection: the unserved share `1 − 1/ρ` of the feeder flow.
pub fn sams_rejection(rho: f64, feeder_flow: f64) -> f64 {
    if feeder_flow <= 0.0 {
        return 0.0;
    }
    if !rho.is_finite() {
        return feeder_flow;
    }
    if rho <= 0.0 {
        return 0.0;
    }
    ((1.0 - 1.0 / rho) * feeder_flow).max(0.0)
}

/// Daily operating cost of transit service plus feeder fleet.
pub fn operating_cost(sol: &Solution, sc: &Scenario) -> f64 {
    transit_cost(sol, sc) + fleet_cost(sol, sc)
}

fn transit_cost(sol: &Solution, sc: &Scenario) -> f64 {
    sc.periods
        .iter()
        .enumerate()
        .map(|(k, per)| {
            let hourly: f64 = sol.freq_per_h.iter().enumerate().map(|(p, row)| sc.pattern_unit_cost(p) * row[k]).sum();
            per.duration_h * hourly
        })
        .sum()
}

fn fleet_cost(sol: &Solution, sc: &Scenario) -> f64 {
    sc.periods.iter().zip(&sol.fleet).map(|(per, &s)| per.duration_h * sc.sams.unit_op_cost * s).sum()
}

fn clamp_box(x: f64, hi: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(0.0, hi)
    }
}

/// Projects a candidate into its boxes and onto the budget.
///
/// Fleet sizes are kept if they fit the budget on their own (otherwise they
/// are scaled down to exhaust it and all frequencies are zeroed); the
/// remaining budget then bounds transit cost, scaling every frequency by one
/// common factor when exceeded. Frequencies are never scaled up.
pub fn repair(sol: &Solution, sc: &Scenario) -> Solution {
    let budget = sc.budget.daily_budget;
    let mut out = Solution {
        freq_per_h: sol
            .freq_per_h
            .iter()
            .zip(&sc.patterns)
            .map(|(row, pat)| row.iter().map(|&f| clamp_box(f, pat.max_frequency)).collect())
            .collect(),
        fleet: sol.fleet.iter().map(|&s| clamp_box(s, sc.sams.max_fleet)).collect(),
    };
    let sav = fleet_cost(&out, sc);
    if sav > budget * (1.0 + BUDGET_SLACK) {
        let scale = budget / sav;
        out.fleet.iter_mut().for_each(|s| *s *= scale);
        out.freq_per_h.iter_mut().flatten().for_each(|f| *f = 0.0);
        return out;
    }
    let remaining = (budget - sav).max(0.0);
    let transit = transit_cost(&out, sc);
    if transit > remaining + budget * BUDGET_SLACK {
        let scale = if transit > 0.0 { remaining / transit } else { 0.0 };
        out.freq_per_h.iter_mut().flatten().for_each(|f| *f *= scale);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalResult {
    pub solution: Solution,
    /// Day-weighted served demand, `Σ_k D_k · served_per_period[k]`.
    pub objective: f64,
    /// Served trips per hour in each period.
    pub served_per_period: Vec<f64>,
    /// Logit transit trips per hour in each period.
    pub transit_demand_per_period: Vec<f64>,
    /// Transit trips per hour, one per scenario demand entry.
    pub transit_demand: Vec<f64>,
    /// `[p][k]`
    pub r_transit: Vec<Vec<f64>>,
    /// `[p][k]`
    pub r_sams: Vec<Vec<f64>>,
    pub wait_min: Vec<f64>,
    pub utilization: Vec<f64>,
    pub flows: Vec<LinkFlows>,
    pub cost: f64,
    pub feasible: bool,
    /// One per scenario demand entry.
    pub path_meta: Vec<PathResult>,
    pub converged: bool,
    pub fp_iterations: usize,
}

impl EvalResult {
    pub fn rejected_per_period(&self) -> Vec<f64> {
        self.transit_demand_per_period.iter().zip(&self.served_per_period).map(|(d, s)| d - s).collect()
    }
}

/// Served-demand objective from per-period flows, utilizations and demands.
pub(crate) fn rejections_and_served(
    sc: &Scenario,
    sol: &Solution,
    flows: &[LinkFlows],
    rho: &[f64],
    demand_per_period: &[f64],
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>) {
    let (np, nk) = (sc.num_patterns(), sc.num_periods());
    let mut r_transit = vec![vec![0.0; nk]; np];
    let mut r_sams = vec![vec![0.0; nk]; np];
    let mut served = demand_per_period.to_vec();
    for k in 0..nk {
        for p in 0..np {
            let rt = transit_rejection(flows[k].peak_per_h[p], sc.pattern_capacity(p), sol.freq_per_h[p][k]);
            let rc = sams_rejection(rho[k], flows[k].feeder_flow_per_h[p]);
            r_transit[p][k] = rt;
            r_sams[p][k] = rc;
            served[k] -= rt.max(rc);
        }
    }
    (r_transit, r_sams, served)
}

/// Full fitness evaluation of one solution.
pub fn evaluate(sol: &Solution, sc: &Scenario, g: &MultimodalGraph) -> EvalResult {
    let fp = fixed_point(sc, g, sol);
    let asg = fp.assignment;
    let transit_demand: Vec<f64> = asg.splits.iter().map(|s| s.transit_trips_per_h).collect();
    let mut demand_per_period = vec![0.0; sc.num_periods()];
    for (d, q) in sc.demand.iter().zip(&transit_demand) {
        demand_per_period[d.period] += q;
    }
    let (r_transit, r_sams, served) = rejections_and_served(sc, sol, &asg.flows, &fp.utilization, &demand_per_period);
    let objective = sc.periods.iter().zip(&served).map(|(per, s)| per.duration_h * s).sum();
    let cost = operating_cost(sol, sc);
    EvalResult {
        solution: sol.clone(),
        objective,
        served_per_period: served,
        transit_demand_per_period: demand_per_period,
        transit_demand,
        r_transit,
        r_sams,
        wait_min: fp.wait_min,
        utilization: fp.utilization,
        flows: asg.flows,
        cost,
        feasible: cost <= sc.budget.daily_budget * (1.0 + 1e-9),
        path_meta: asg.paths,
        converged: fp.converged,
        fp_iterations: fp.iterations,
    }
}

/// One row of the exhaustive grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPoint {
    pub solution: Solution,
    pub objective: f64,
    pub cost: f64,
}

#[derive(Debug, Clone)]
pub struct BruteForce {
    pub best: Solution,
    pub best_eval: EvalResult,
    /// Every grid combination after repair, in enumeration order.
    pub grid: Vec<GridPoint>,
}

/// Number of combinations the exhaustive grid would evaluate.
pub fn grid_size(sc: &Scenario, freq_grid: &[f64], fleet_grid: &[f64]) -> f64 {
    let nk = sc.num_periods() as i32;
    let np = sc.num_patterns() as i32;
    (freq_grid.len() as f64).powi(np * nk) * (fleet_grid.len() as f64).powi(nk)
}

/// Exhaustive search over a frequency grid and a fleet grid.
///
/// Every pattern-period frequency ranges over `freq_grid` and every period's
/// fleet over `fleet_grid`; each combination is repaired and evaluated. The
/// best objective wins, ties going to lower cost and then to the
/// lexicographically smaller solution.
pub fn brute_force(
    sc: &Scenario,
    g: &MultimodalGraph,
    freq_grid: &[f64],
    fleet_grid: &[f64],
    exec: Execution,
) -> Result<BruteForce> {
    let total = grid_size(sc, freq_grid, fleet_grid);
    if total > BRUTE_FORCE_LIMIT || freq_grid.is_empty() || fleet_grid.is_empty() {
        return Err(Error::GridTooLarge { combinations: total, limit: BRUTE_FORCE_LIMIT });
    }
    let (np, nk) = (sc.num_patterns(), sc.num_periods());
    let n = total as usize;
    let decode = |mut idx: usize| {
        let mut sol = Solution::zeros(sc);
        for row in sol.freq_per_h.iter_mut() {
            for f in row.iter_mut() {
                *f = freq_grid[idx % freq_grid.len()];
                idx /= freq_grid.len();
            }
        }
        for s in sol.fleet.iter_mut() {
            *s = fleet_grid[idx % fleet_grid.len()];
            idx /= fleet_grid.len();
        }
        debug_assert_eq!(sol.freq_per_h.len(), np);
        debug_assert_eq!(sol.fleet.len(), nk);
        repair(&sol, sc)
    };
    let grid = map_indices(n, exec, |i| {
        let sol = decode(i);
        let res = evaluate(&sol, sc, g);
        GridPoint { solution: sol, objective: res.objective, cost: res.cost }
    });
    let best = grid
        .iter()
        .min_by(|a, b| {
            b.objective
                .total_cmp(&a.objective)
                .then(a.cost.total_cmp(&b.cost))
                .then_with(|| a.solution.lex_cmp(&b.solution))
        })
        .expect("non-empty grid")
        .solution
        .clone();
    let best_eval = evaluate(&best, sc, g);
    Ok(BruteForce { best, best_eval, grid })
}
