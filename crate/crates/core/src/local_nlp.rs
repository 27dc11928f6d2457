//! Local improvement around a reference evaluation.
//!
//! Routes are frozen at the reference assignment and OD demand is aggregated
//! per pattern by the number of feeder legs each OD uses. Demand then reacts
//! to frequency and feeder-wait changes through clipped exponential
//! elasticities, and the served-demand objective is maximized over
//! frequencies, fleet sizes and a free feeder wait inside local trust boxes.
//!
//! The kinks (`max(0, ·)`, `max(·, ·)`, elasticity clipping) are smoothed so
//! the objective is differentiable; its gradient is exact for the smoothed
//! function. The solver is projected gradient ascent with Armijo
//! backtracking. The budget is part of the projection, so every iterate is
//! affordable; the coupling between the free wait and fleet utilization is an
//! exterior quadratic penalty whose weight escalates until it holds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::evaluator::{repair, EvalResult, Solution};
use crate::graph::{EdgeKind, MultimodalGraph, MIN_ACTIVE_FREQ};
use crate::scenario::{ChoiceParams, NlpParams, SamsParams, Scenario};

/// Fleet below which utilization is computed at this floor.
const FLEET_FLOOR: f64 = 1e-6;
/// Feeder passenger-hours below which a period is treated as feeder-free.
const FEEDER_TINY: f64 = 1e-12;
/// Softplus sharpness applied to utilization in the smoothed wait curve.
const RHO_SHARPNESS: f64 = 100.0;
/// Minutes that normalize wait residuals in the consistency penalty.
const WAIT_SCALE_MIN: f64 = 10.0;
/// Relative budget violation tolerated at a finished start.
pub const BUDGET_TOL: f64 = 1e-6;
const PENALTY_ROUNDS: usize = 8;
const PENALTY_GROWTH: f64 = 10.0;
const ARMIJO: f64 = 1e-4;

/// Demand aggregated from the reference assignment for one (pattern, period).
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PatternDemand {
    /// Σ Q^τ over ODs riding the pattern, split by feeder-leg count 0, 1, 2.
    pub demand: [f64; 3],
    /// Feeder-edge flow attached to the pattern, by the OD's feeder-leg count.
    pub feeder_flow: [f64; 3],
    /// Feeder passenger-hours per hour on the pattern's feeder edges, by the
    /// OD's feeder-leg count.
    pub feeder_time_h: [f64; 3],
}

/// Frozen snapshot of one evaluation that parameterizes the local problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceState {
    /// `[p][k]`, floored at the minimum active frequency.
    pub ref_freq: Vec<Vec<f64>>,
    pub ref_wait_min: Vec<f64>,
    pub ref_fleet: Vec<f64>,
    /// Per demand entry.
    pub od_transit_demand: Vec<f64>,
    /// Per demand entry.
    pub feeder_count: Vec<u8>,
    /// Per demand entry, minutes.
    pub feeder_time_min: Vec<f64>,
    /// `[p][k]`
    pub peak_demand: Vec<Vec<f64>>,
    /// `[p][k]`: demand entries whose route rides pattern `p`.
    pub od_to_pattern: Vec<Vec<Vec<usize>>>,
    /// `[p][k]`
    pub aggregates: Vec<Vec<PatternDemand>>,
}

pub fn extract_reference(res: &EvalResult, sc: &Scenario, g: &MultimodalGraph) -> ReferenceState {
    let (np, nk) = (sc.num_patterns(), sc.num_periods());
    let mut od_to_pattern = vec![vec![Vec::new(); nk]; np];
    let mut aggregates = vec![vec![PatternDemand::default(); nk]; np];
    let mut feeder_count = Vec::with_capacity(sc.demand.len());
    let mut feeder_time_min = Vec::with_capacity(sc.demand.len());
    for (i, (d, path)) in sc.demand.iter().zip(&res.path_meta).enumerate() {
        let n = path.feeder_link_count.min(2) as usize;
        feeder_count.push(n as u8);
        feeder_time_min.push(path.feeder_time_min);
        let q = res.transit_demand[i];
        if !path.reachable {
            continue;
        }
        for &p in &path.patterns_used {
            od_to_pattern[p][d.period].push(i);
            aggregates[p][d.period].demand[n] += q;
        }
        for &ei in &path.links_used {
            let e = &g.edges()[ei];
            if e.kind == EdgeKind::AccessFeeder {
                let agg = &mut aggregates[e.pattern][d.period];
                agg.feeder_flow[n] += q;
                agg.feeder_time_h[n] += q * e.ride_min / 60.0;
            }
        }
    }
    ReferenceState {
        ref_freq: res
            .solution
            .freq_per_h
            .iter()
            .map(|row| row.iter().map(|&f| f.max(MIN_ACTIVE_FREQ)).collect())
            .collect(),
        ref_wait_min: res.wait_min.clone(),
        ref_fleet: res.solution.fleet.clone(),
        od_transit_demand: res.transit_demand.clone(),
        feeder_count,
        feeder_time_min,
        peak_demand: (0..np).map(|p| (0..nk).map(|k| res.flows[k].peak_per_h[p]).collect()).collect(),
        od_to_pattern,
        aggregates,
    }
}

impl ReferenceState {
    /// The reference point itself: reference frequencies, fleet and wait.
    pub fn start_point(&self) -> SubSolution {
        SubSolution { freq: self.ref_freq.clone(), fleet: self.ref_fleet.clone(), wait: self.ref_wait_min.clone() }
    }
}

/// Decision of the local problem; `wait` is the free feeder wait per period.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubSolution {
    /// `[p][k]`
    pub freq: Vec<Vec<f64>>,
    pub fleet: Vec<f64>,
    pub wait: Vec<f64>,
}

/// Clipped transit elasticity for a frequency change, headways in minutes.
pub fn elasticity_transit(f: f64, f_ref: f64, cp: &ChoiceParams, nlp: &NlpParams) -> f64 {
    let a = 0.5 * cp.beta_time * cp.wait_factor;
    (a * (60.0 / f - 60.0 / f_ref)).exp().clamp(nlp.elasticity_lo, nlp.elasticity_hi)
}

/// Clipped feeder elasticity for `legs` feeder legs and a wait change.
pub fn elasticity_feeder(u: f64, u_ref: f64, legs: u8, cp: &ChoiceParams, nlp: &NlpParams) -> f64 {
    if legs == 0 {
        return 1.0;
    }
    let c = cp.beta_time * cp.wait_factor;
    (f64::from(legs) * c * (u - u_ref)).exp().clamp(nlp.elasticity_lo, nlp.elasticity_hi)
}

/// Kink handling: smooth (softplus / log-sum-exp / C¹ clamp) or exact.
#[derive(Debug, Clone, Copy)]
struct Kinks {
    sharpness: f64,
    smooth: bool,
}

impl Kinks {
    /// `max(0, x)` and its derivative.
    fn pos(self, x: f64) -> (f64, f64) {
        if !self.smooth {
            return if x > 0.0 { (x, 1.0) } else { (0.0, 0.0) };
        }
        softplus(x, self.sharpness)
    }

    /// `max(a, b)` and its partials.
    fn max2(self, a: f64, b: f64) -> (f64, f64, f64) {
        if !self.smooth {
            return if a >= b { (a, 1.0, 0.0) } else { (b, 0.0, 1.0) };
        }
        let k = self.sharpness;
        let m = a.max(b);
        let e = (-k * (a - b).abs()).exp();
        let v = m + e.ln_1p() / k;
        let da = sigmoid(k * (a - b));
        (v, da, 1.0 - da)
    }

    /// Clamp to `[lo, hi]` and its derivative; quadratic blends of half-width
    /// 5% of the range around each bound when smooth.
    fn clamp(self, y: f64, lo: f64, hi: f64) -> (f64, f64) {
        if !self.smooth {
            return if y < lo {
                (lo, 0.0)
            } else if y > hi {
                (hi, 0.0)
            } else {
                (y, 1.0)
            };
        }
        let m = 0.05 * (hi - lo);
        if y <= lo - m {
            (lo, 0.0)
        } else if y < lo + m {
            let t = y - lo + m;
            (lo + t * t / (4.0 * m), t / (2.0 * m))
        } else if y <= hi - m {
            (y, 1.0)
        } else if y < hi + m {
            let t = hi + m - y;
            (hi - t * t / (4.0 * m), t / (2.0 * m))
        } else {
            (hi, 0.0)
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64, k: f64) -> (f64, f64) {
    let z = k * x;
    let v = if z > 30.0 {
        x
    } else if z < -30.0 {
        z.exp() / k
    } else {
        z.exp().ln_1p() / k
    };
    (v, sigmoid(z))
}

/// Flat index layout: frequencies pattern-major, then fleet, then wait.
#[derive(Debug, Clone, Copy)]
struct Layout {
    np: usize,
    nk: usize,
}

impl Layout {
    fn f(self, p: usize, k: usize) -> usize {
        p * self.nk + k
    }
    fn s(self, k: usize) -> usize {
        self.np * self.nk + k
    }
    fn u(self, k: usize) -> usize {
        self.np * self.nk + self.nk + k
    }
    fn len(self) -> usize {
        self.np * self.nk + 2 * self.nk
    }
}

/// Constants of one local problem.
struct LocalModel<'a> {
    reference: &'a ReferenceState,
    sams: &'a SamsParams,
    nlp: &'a NlpParams,
    layout: Layout,
    /// β_1 γ^ω, per minute of wait.
    wait_elasticity: f64,
    capacity: Vec<f64>,
    unit_cost: Vec<f64>,
    durations: Vec<f64>,
    budget: f64,
    fleet_cost: f64,
    /// Objective magnitude used to weight penalties.
    scale: f64,
    /// Smoothed calculated wait at the reference point, per period.
    ref_curve_wait: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// Per-coordinate preconditioning widths.
    width: Vec<f64>,
    /// Daily cost per unit of each coordinate.
    cost_coef: Vec<f64>,
}

/// Value and gradient of the local objective, plus constraint diagnostics.
#[derive(Debug, Clone)]
struct Eval {
    value: f64,
    grad: Vec<f64>,
    budget_violation: f64,
    max_wait_residual: f64,
}

impl<'a> LocalModel<'a> {
    fn new(reference: &'a ReferenceState, sc: &'a Scenario) -> Self {
        let layout = Layout { np: sc.num_patterns(), nk: sc.num_periods() };
        let nlp = &sc.solver.nlp;
        let sams = &sc.sams;
        let mut model = LocalModel {
            reference,
            sams,
            nlp,
            layout,
            wait_elasticity: sc.choice.beta_time * sc.choice.wait_factor,
            capacity: (0..layout.np).map(|p| sc.pattern_capacity(p)).collect(),
            unit_cost: (0..layout.np).map(|p| sc.pattern_unit_cost(p)).collect(),
            durations: sc.periods.iter().map(|k| k.duration_h).collect(),
            budget: sc.budget.daily_budget,
            fleet_cost: sams.unit_op_cost,
            scale: 1.0,
            ref_curve_wait: vec![0.0; layout.nk],
            lo: vec![0.0; layout.len()],
            hi: vec![0.0; layout.len()],
            width: vec![1.0; layout.len()],
            cost_coef: vec![0.0; layout.len()],
        };
        for k in 0..layout.nk {
            for p in 0..layout.np {
                let i = layout.f(p, k);
                let f_ref = reference.ref_freq[p][k];
                model.lo[i] = MIN_ACTIVE_FREQ;
                model.hi[i] = (nlp.freq_expand * f_ref).min(sc.patterns[p].max_frequency).max(MIN_ACTIVE_FREQ);
                model.width[i] = (model.hi[i] - model.lo[i]).max(1e-3);
            }
            for p in 0..layout.np {
                model.cost_coef[layout.f(p, k)] = model.durations[k] * model.unit_cost[p];
            }
            let is = layout.s(k);
            model.cost_coef[is] = model.durations[k] * model.fleet_cost;
            model.lo[is] = 0.0;
            model.hi[is] = sams.max_fleet;
            let x_ref: f64 = (0..layout.np)
                .map(|p| {
                    let a = &reference.aggregates[p][k];
                    a.feeder_time_h[1] + a.feeder_time_h[2]
                })
                .sum();
            let fleet_scale = reference.ref_fleet[k].max(2.0 * x_ref / sams.avg_occupancy).max(1.0);
            model.width[is] = fleet_scale.min(sams.max_fleet.max(1e-3));
            let iu = layout.u(k);
            model.lo[iu] = (nlp.wait_shrink * reference.ref_wait_min[k]).max(sams.min_wait_min);
            model.hi[iu] = sams.max_wait_min.max(model.lo[iu]);
            model.width[iu] = (model.hi[iu] - model.lo[iu]).max(1e-3);
        }
        let start = model.flatten(&reference.start_point());
        let probe = model.forward(&start, Kinks { sharpness: nlp.softmax_sharpness, smooth: false }, 0.0);
        model.scale = probe.value.abs().max(1.0);
        model.ref_curve_wait = (0..layout.nk).map(|k| model.curve_wait_at(&start, k).0).collect();
        model
    }

    fn flatten(&self, x: &SubSolution) -> Vec<f64> {
        let l = self.layout;
        let mut v = vec![0.0; l.len()];
        for p in 0..l.np {
            for k in 0..l.nk {
                v[l.f(p, k)] = x.freq[p][k];
            }
        }
        for k in 0..l.nk {
            v[l.s(k)] = x.fleet[k];
            v[l.u(k)] = x.wait[k];
        }
        v
    }

    fn unflatten(&self, v: &[f64]) -> SubSolution {
        let l = self.layout;
        SubSolution {
            freq: (0..l.np).map(|p| (0..l.nk).map(|k| v[l.f(p, k)]).collect()).collect(),
            fleet: (0..l.nk).map(|k| v[l.s(k)]).collect(),
            wait: (0..l.nk).map(|k| v[l.u(k)]).collect(),
        }
    }

    /// Projection onto the boxes intersected with the budget half-space, in
    /// the metric scaled by `width`. The budget multiplier is found by
    /// bisection; the result is on the feasible side.
    fn project(&self, v: &mut [f64]) {
        for ((x, &lo), &hi) in v.iter_mut().zip(&self.lo).zip(&self.hi) {
            *x = if x.is_nan() { lo } else { x.clamp(lo, hi) };
        }
        if self.cost(v) <= self.budget {
            return;
        }
        let y = v.to_vec();
        let shifted = |theta: f64, out: &mut [f64]| {
            for j in 0..out.len() {
                let step = theta * self.width[j] * self.width[j] * self.cost_coef[j];
                out[j] = (y[j] - step).clamp(self.lo[j], self.hi[j]);
            }
        };
        let mut hi = 1.0 / self.budget;
        loop {
            shifted(hi, v);
            if self.cost(v) <= self.budget || hi > 1e300 {
                break;
            }
            hi *= 4.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            shifted(mid, v);
            if self.cost(v) <= self.budget {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        shifted(hi, v);
    }

    fn transit_elasticity(&self, v: &[f64], p: usize, k: usize, kinks: Kinks) -> (f64, f64) {
        let f = v[self.layout.f(p, k)];
        let f_ref = self.reference.ref_freq[p][k];
        let a = 0.5 * self.wait_elasticity;
        let raw = (a * (60.0 / f - 60.0 / f_ref)).exp();
        let (y, dy) = kinks.clamp(raw, self.nlp.elasticity_lo, self.nlp.elasticity_hi);
        (y, dy * raw * a * (-60.0 / (f * f)))
    }

    fn feeder_elasticities(&self, v: &[f64], k: usize, kinks: Kinks) -> ([f64; 3], [f64; 3]) {
        let du = v[self.layout.u(k)] - self.reference.ref_wait_min[k];
        let mut y = [1.0; 3];
        let mut dy = [0.0; 3];
        for legs in 1..3 {
            let c = legs as f64 * self.wait_elasticity;
            let raw = (c * du).exp();
            let (val, d) = kinks.clamp(raw, self.nlp.elasticity_lo, self.nlp.elasticity_hi);
            y[legs] = val;
            dy[legs] = d * raw * c;
        }
        (y, dy)
    }

    /// Elasticity-weighted feeder passenger-hours of period `k`.
    fn feeder_load(&self, yt: &[f64], yc: &[f64; 3], k: usize) -> f64 {
        (0..self.layout.np)
            .map(|p| {
                let a = &self.reference.aggregates[p][k];
                yt[p] * (yc[1] * a.feeder_time_h[1] + yc[2] * a.feeder_time_h[2])
            })
            .sum()
    }

    fn fleet_effective(&self, v: &[f64], k: usize) -> (f64, bool) {
        let s = v[self.layout.s(k)];
        if s > FLEET_FLOOR {
            (s, true)
        } else {
            (FLEET_FLOOR, false)
        }
    }

    /// Smoothed, capped wait curve at utilization `rho`; returns the value
    /// and its derivative.
    fn smooth_curve(&self, rho: f64) -> (f64, f64) {
        let sp = self.sams;
        let rho_cap = sp.cutoff_hi
            + (sp.max_wait_min - sp.min_wait_min - sp.slope_lo_min * (sp.cutoff_hi - sp.cutoff_lo)) / sp.slope_hi_min
            + 1.0;
        let (r, dr) = if rho > rho_cap { (rho_cap, 0.0) } else { (rho, 1.0) };
        let (p1, d1) = softplus(r - sp.cutoff_lo, RHO_SHARPNESS);
        let (p2, d2) = softplus(r - sp.cutoff_hi, RHO_SHARPNESS);
        let w = sp.min_wait_min + sp.slope_lo_min * p1 + (sp.slope_hi_min - sp.slope_lo_min) * p2;
        let dw = sp.slope_lo_min * d1 + (sp.slope_hi_min - sp.slope_lo_min) * d2;
        let (over, dover) = softplus(w - sp.max_wait_min, self.nlp.softmax_sharpness);
        (w - over, (1.0 - dover) * dw * dr)
    }

    fn curve_wait_at(&self, v: &[f64], k: usize) -> (f64, f64) {
        let kinks = Kinks { sharpness: self.nlp.softmax_sharpness, smooth: true };
        let yt: Vec<f64> = (0..self.layout.np).map(|p| self.transit_elasticity(v, p, k, kinks).0).collect();
        let (yc, _) = self.feeder_elasticities(v, k, kinks);
        let load = self.feeder_load(&yt, &yc, k);
        let (s, _) = self.fleet_effective(v, k);
        let rho = load / (self.sams.avg_occupancy * s);
        (self.smooth_curve(rho).0, rho)
    }

    fn cost(&self, v: &[f64]) -> f64 {
        let l = self.layout;
        (0..l.nk)
            .map(|k| {
                let hourly: f64 =
                    (0..l.np).map(|p| self.unit_cost[p] * v[l.f(p, k)]).sum::<f64>() + self.fleet_cost * v[l.s(k)];
                self.durations[k] * hourly
            })
            .sum()
    }

    /// Objective (minus the consistency penalty weighted by `penalty`) and
    /// its gradient.
    fn forward(&self, v: &[f64], kinks: Kinks, penalty: f64) -> Eval {
        let l = self.layout;
        let lam = self.nlp.reg;
        let occ = self.sams.avg_occupancy;
        let mut grad = vec![0.0; l.len()];
        let mut value = 0.0;
        let mut max_excess: f64 = 0.0;

        for k in 0..l.nk {
            let dk = self.durations[k];
            let (yc, dyc) = self.feeder_elasticities(v, k, kinks);
            let mut yt = vec![0.0; l.np];
            let mut dyt = vec![0.0; l.np];
            for p in 0..l.np {
                (yt[p], dyt[p]) = self.transit_elasticity(v, p, k, kinks);
            }
            let load = self.feeder_load(&yt, &yc, k);
            let (s_eff, s_free) = self.fleet_effective(v, k);
            let feeder_live = load > FEEDER_TINY;
            let ratio = if feeder_live { occ * s_eff / load } else { 0.0 };

            // Per-pattern forward pass; keep what the backward pass needs.
            let mut g_rc = vec![0.0; l.np];
            let mut feeder_demand = vec![0.0; l.np];
            let mut g_rt = vec![0.0; l.np];
            let mut period_value = 0.0;
            for p in 0..l.np {
                let a = &self.reference.aggregates[p][k];
                let f = v[l.f(p, k)];
                let f_ref = self.reference.ref_freq[p][k];
                let mixed = a.demand[0] + yc[1] * a.demand[1] + yc[2] * a.demand[2];
                let q = yt[p] * mixed;
                let (rt, drt) = kinks.pos(yt[p] * self.reference.peak_demand[p][k] - self.capacity[p] * f);
                let dp = yt[p] * (yc[1] * a.feeder_flow[1] + yc[2] * a.feeder_flow[2]);
                feeder_demand[p] = dp;
                let (rc, drc) = if feeder_live { kinks.pos(dp * (1.0 - ratio)) } else { (0.0, 0.0) };
                let (m, dm_rt, dm_rc) = kinks.max2(rt, rc);
                period_value += q - m - lam * (f - f_ref).powi(2);
                g_rt[p] = -dm_rt * drt;
                g_rc[p] = -dm_rc * drc;
            }
            let u = v[l.u(k)];
            let u_ref = self.reference.ref_wait_min[k];
            period_value -= lam * (u - u_ref).powi(2);
            value += dk * period_value;

            // Adjoint of the feeder load, from the feeder rejections.
            let mut adj_load = 0.0;
            let mut g_s = 0.0;
            if feeder_live {
                for p in 0..l.np {
                    adj_load += g_rc[p] * feeder_demand[p] * occ * s_eff / (load * load);
                    if s_free {
                        g_s += g_rc[p] * (-feeder_demand[p] * occ / load);
                    }
                }
            }
            adj_load *= dk;
            g_s *= dk;
            let mut g_u = -2.0 * lam * (u - u_ref) * dk;

            // Wait consistency: the free wait may drift from the smoothed
            // curve (both measured from the reference) by up to the fixed
            // point tolerance; the excess is penalized.
            let rho = load / (occ * s_eff);
            let (w_curve, dw_drho) = self.smooth_curve(rho);
            let res = (u - u_ref) - (w_curve - self.ref_curve_wait[k]);
            let excess = res.abs() - self.sams.fp_tol_min;
            max_excess = max_excess.max(excess.max(0.0));
            if penalty > 0.0 && excess > 0.0 {
                let weight = penalty * self.scale / (WAIT_SCALE_MIN * WAIT_SCALE_MIN);
                value -= weight * excess * excess;
                let d_res = -2.0 * weight * excess * res.signum();
                g_u += d_res;
                adj_load += d_res * (-dw_drho) / (occ * s_eff);
                if s_free {
                    g_s += d_res * dw_drho * load / (occ * s_eff * s_eff);
                }
            }
            grad[l.s(k)] += g_s;

            // Back through the elasticities.
            let mut g_yc = [0.0; 3];
            for p in 0..l.np {
                let a = &self.reference.aggregates[p][k];
                let weight_rc = if feeder_live { g_rc[p] * (1.0 - ratio) } else { 0.0 };
                let mixed = a.demand[0] + yc[1] * a.demand[1] + yc[2] * a.demand[2];
                let feeder_mix = yc[1] * a.feeder_flow[1] + yc[2] * a.feeder_flow[2];
                let feeder_time = yc[1] * a.feeder_time_h[1] + yc[2] * a.feeder_time_h[2];
                let g_yt = dk * (mixed + g_rt[p] * self.reference.peak_demand[p][k] + weight_rc * feeder_mix)
                    + adj_load * feeder_time;
                for (legs, g) in g_yc.iter_mut().enumerate().skip(1) {
                    *g += dk * (yt[p] * a.demand[legs] + weight_rc * yt[p] * a.feeder_flow[legs])
                        + adj_load * yt[p] * a.feeder_time_h[legs];
                }
                let f = v[l.f(p, k)];
                let f_ref = self.reference.ref_freq[p][k];
                grad[l.f(p, k)] += g_yt * dyt[p] + dk * (g_rt[p] * (-self.capacity[p]) - 2.0 * lam * (f - f_ref));
            }
            g_u += g_yc[1] * dyc[1] + g_yc[2] * dyc[2];
            grad[l.u(k)] += g_u;
        }

        let violation = (self.cost(v) / self.budget - 1.0).max(0.0);
        Eval { value, grad, budget_violation: violation, max_wait_residual: max_excess }
    }

    fn smooth(&self) -> Kinks {
        Kinks { sharpness: self.nlp.softmax_sharpness, smooth: true }
    }

    fn exact(&self) -> Kinks {
        Kinks { sharpness: self.nlp.softmax_sharpness, smooth: false }
    }

    /// Projected gradient ascent on the penalized objective.
    fn ascend(&self, mut x: Vec<f64>, penalty: f64, trace: &mut Vec<TraceRow>) -> Vec<f64> {
        let kinks = self.smooth();
        let mut cur = self.forward(&x, kinks, penalty);
        let mut step = 1.0;
        for _ in 0..self.nlp.max_inner_iters {
            let mut accepted = None;
            while step > 1e-14 {
                let mut trial: Vec<f64> =
                    x.iter().zip(&cur.grad).zip(&self.width).map(|((xi, gi), wi)| xi + step * wi * wi * gi).collect();
                self.project(&mut trial);
                let predicted: f64 = trial.iter().zip(&x).zip(&cur.grad).map(|((t, xi), g)| g * (t - xi)).sum();
                if predicted <= 0.0 {
                    break;
                }
                let next = self.forward(&trial, kinks, penalty);
                if next.value.is_finite() && next.value >= cur.value + ARMIJO * predicted {
                    accepted = Some((trial, next));
                    break;
                }
                step *= 0.5;
            }
            let Some((trial, next)) = accepted else { break };
            let gain = next.value - cur.value;
            // Barzilai-Borwein step for the next iteration, in width-scaled
            // coordinates.
            let (mut ss, mut sy) = (0.0, 0.0);
            for j in 0..x.len() {
                let sz = (trial[j] - x[j]) / self.width[j];
                let yz = -(next.grad[j] - cur.grad[j]) * self.width[j];
                ss += sz * sz;
                sy += sz * yz;
            }
            x = trial;
            cur = next;
            trace.push(TraceRow { iter: trace.len(), value: cur.value, step, budget_violation: cur.budget_violation });
            if gain <= 1e-8 * (1.0 + cur.value.abs()) {
                break;
            }
            step = if sy > 0.0 { (ss / sy).clamp(1e-12, 1e12) } else { step * 2.0 };
        }
        x
    }

    /// Penalty escalation loop for one start.
    fn solve_from(&self, start: Vec<f64>, trace: &mut Vec<TraceRow>) -> Vec<f64> {
        let mut x = start;
        self.project(&mut x);
        let mut penalty = 1.0;
        for _ in 0..PENALTY_ROUNDS {
            x = self.ascend(x, penalty, trace);
            let e = self.forward(&x, self.smooth(), penalty);
            if e.budget_violation <= BUDGET_TOL && e.max_wait_residual <= self.nlp.wait_consistency_tol {
                break;
            }
            penalty *= PENALTY_GROWTH;
        }
        x
    }

    fn is_feasible(&self, v: &[f64]) -> bool {
        let e = self.forward(v, self.smooth(), 0.0);
        e.budget_violation <= BUDGET_TOL && e.max_wait_residual <= self.nlp.wait_consistency_tol
    }
}

/// Smoothed local objective and its exact gradient.
///
/// Per period, weighted by its duration: pattern demand minus the smoothed
/// larger of transit and feeder rejection, minus the proximal terms on
/// frequency and wait.
pub fn sub_objective(x: &SubSolution, reference: &ReferenceState, sc: &Scenario) -> (f64, SubSolution) {
    let model = LocalModel::new(reference, sc);
    let v = model.flatten(x);
    let e = model.forward(&v, model.smooth(), 0.0);
    (e.value, model.unflatten(&e.grad))
}

/// Local objective with the kinks left in (hard max and clipping).
pub fn true_sub_objective(x: &SubSolution, reference: &ReferenceState, sc: &Scenario) -> f64 {
    let model = LocalModel::new(reference, sc);
    model.forward(&model.flatten(x), model.exact(), 0.0).value
}

/// Penalized objective actually ascended by the solver, with its gradient.
pub fn penalized_objective(
    x: &SubSolution,
    reference: &ReferenceState,
    sc: &Scenario,
    penalty: f64,
) -> (f64, SubSolution) {
    let model = LocalModel::new(reference, sc);
    let e = model.forward(&model.flatten(x), model.smooth(), penalty);
    (e.value, model.unflatten(&e.grad))
}

/// Lower and upper bounds of the local boxes.
pub fn local_bounds(reference: &ReferenceState, sc: &Scenario) -> (SubSolution, SubSolution) {
    let model = LocalModel::new(reference, sc);
    (model.unflatten(&model.lo), model.unflatten(&model.hi))
}

/// One accepted ascent step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub value: f64,
    pub step: f64,
    pub budget_violation: f64,
}

#[derive(Debug, Clone)]
pub struct LocalOutcome {
    pub solution: Solution,
    /// Best local point before conversion to a full solution.
    pub best: SubSolution,
    pub best_value: f64,
    pub start_value: f64,
    pub trace: Vec<TraceRow>,
}

/// Improves `start` on the local problem.
///
/// Runs the start plus `multistart_count − 1` perturbed copies (Gaussian
/// relative noise), keeps the feasible finisher with the best unsmoothed
/// objective, and falls back to the projected start when none beats it. The
/// result drops the free wait and is repaired onto the budget.
pub fn solve_local(reference: &ReferenceState, sc: &Scenario, start: &SubSolution, seed: u64) -> LocalOutcome {
    let model = LocalModel::new(reference, sc);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sc.solver.nlp.perturb_sigma_frac.max(0.0)).expect("finite sigma");

    let mut base = model.flatten(start);
    model.project(&mut base);
    let exact = model.exact();
    let start_value = model.forward(&base, exact, 0.0).value;
    let mut best = base.clone();
    let mut best_value = if model.is_feasible(&base) { start_value } else { f64::NEG_INFINITY };
    let mut trace = Vec::new();

    for run in 0..sc.solver.nlp.multistart_count {
        let init: Vec<f64> =
            if run == 0 { base.clone() } else { base.iter().map(|&x| x * (1.0 + noise.sample(&mut rng))).collect() };
        let x = model.solve_from(init, &mut trace);
        if !model.is_feasible(&x) {
            continue;
        }
        let val = model.forward(&x, exact, 0.0).value;
        if val > best_value {
            best_value = val;
            best = x;
        }
    }
    if !best_value.is_finite() {
        best_value = start_value;
    }

    let sub = model.unflatten(&best);
    let freq_per_h = sub
        .freq
        .iter()
        .map(|row| row.iter().map(|&f| if f <= MIN_ACTIVE_FREQ * (1.0 + 1e-9) { 0.0 } else { f }).collect())
        .collect();
    let solution = repair(&Solution { freq_per_h, fleet: sub.fleet.clone() }, sc);
    LocalOutcome { solution, best: sub, best_value, start_value, trace }
}
