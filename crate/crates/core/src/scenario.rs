//! Problem-instance data: periods, modes, patterns, zones, demand and every
//! model parameter, plus the JSON scenario document and its validation.
//!
//! All times in the document are minutes except `duration_h` and
//! `cycle_time_h`. Frequencies are vehicles per hour and demand is persons per
//! hour. Omitted parameter blocks take their documented defaults.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::evaluator::Solution;

/// Identifier of a physical stop location shared between patterns.
pub type StopId = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimePeriod {
    pub id: usize,
    pub duration_h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitMode {
    pub id: usize,
    /// Passengers per vehicle.
    pub vehicle_capacity: f64,
    /// Currency per vehicle-hour.
    pub unit_op_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pattern {
    pub id: usize,
    pub mode: usize,
    pub cycle_time_h: f64,
    /// Policy frequency cap, vehicles per hour.
    pub max_frequency: f64,
    pub stop_sequence: Vec<StopId>,
    /// Minutes between consecutive stops.
    pub segment_times_min: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccessLink {
    pub stop: StopId,
    pub time_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Zone {
    pub id: usize,
    #[serde(default)]
    pub walk_access: Vec<AccessLink>,
    /// Feeder access; `time_min` is the SAV ride time.
    #[serde(default)]
    pub feeder_access: Vec<AccessLink>,
}

impl Zone {
    /// Zones without any access option cannot use transit at all.
    pub fn is_connected(&self) -> bool {
        !self.walk_access.is_empty() || !self.feeder_access.is_empty()
    }
}

fn default_fare() -> f64 {
    2.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandEntry {
    pub origin: usize,
    pub destination: usize,
    pub period: usize,
    pub trips_per_h: f64,
    #[serde(default = "default_fare")]
    pub transit_fare: f64,
    pub p2p_sams_utility: f64,
    pub drive_utility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChoiceParams {
    pub asc_transit: f64,
    /// Utility per minute.
    pub beta_time: f64,
    /// Utility per currency unit.
    pub beta_fare: f64,
    pub wait_factor: f64,
    pub walk_factor: f64,
    pub transfer_penalty_min: f64,
}

impl Default for ChoiceParams {
    fn default() -> Self {
        ChoiceParams {
            asc_transit: -1.5,
            beta_time: -0.12,
            beta_fare: -0.5,
            wait_factor: 1.5,
            walk_factor: 2.0,
            transfer_penalty_min: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamsParams {
    pub min_wait_min: f64,
    pub cutoff_lo: f64,
    pub cutoff_hi: f64,
    pub slope_lo_min: f64,
    pub slope_hi_min: f64,
    /// Average persons per feeder vehicle.
    pub avg_occupancy: f64,
    /// Currency per vehicle-hour.
    pub unit_op_cost: f64,
    /// Fleet cap applied to every period.
    pub max_fleet: f64,
    pub fp_step_approx: f64,
    pub fp_step_calc: f64,
    pub fp_tol_min: f64,
    pub fp_max_outer: usize,
    pub max_wait_min: f64,
}

impl Default for SamsParams {
    fn default() -> Self {
        SamsParams {
            min_wait_min: 3.0,
            cutoff_lo: 0.5,
            cutoff_hi: 0.8,
            slope_lo_min: 20.0,
            slope_hi_min: 50.0,
            avg_occupancy: 1.5,
            unit_op_cost: 30.0,
            max_fleet: 10_000.0,
            fp_step_approx: 0.8,
            fp_step_calc: 0.2,
            fp_tol_min: 3.0,
            fp_max_outer: 25,
            max_wait_min: 60.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetParams {
    pub daily_budget: f64,
}

impl Default for BudgetParams {
    fn default() -> Self {
        BudgetParams { daily_budget: 10_000_000.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsoParams {
    pub epochs: usize,
    pub particles: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Per-coordinate velocity cap as a fraction of the box width.
    pub velocity_clamp_frac: f64,
    pub seed: u64,
    /// Cap on local-improvement rounds per particle per epoch.
    pub nlp_rounds: usize,
    /// Skip local improvement entirely.
    pub pso_only: bool,
}

impl Default for PsoParams {
    fn default() -> Self {
        PsoParams {
            epochs: 30,
            particles: 40,
            inertia: 0.9,
            cognitive: 2.0,
            social: 2.0,
            velocity_clamp_frac: 0.25,
            seed: 0,
            nlp_rounds: 5,
            pso_only: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NlpParams {
    pub reg: f64,
    pub freq_expand: f64,
    pub wait_shrink: f64,
    pub elasticity_lo: f64,
    pub elasticity_hi: f64,
    pub obj_tol: f64,
    pub max_inner_iters: usize,
    pub multistart_count: usize,
    pub perturb_sigma_frac: f64,
    pub softmax_sharpness: f64,
    /// Allowed mismatch (minutes) between the free wait and the wait implied
    /// by the approximated utilization.
    pub wait_consistency_tol: f64,
}

impl Default for NlpParams {
    fn default() -> Self {
        NlpParams {
            reg: 0.001,
            freq_expand: 2.0,
            wait_shrink: 0.5,
            elasticity_lo: 0.0,
            elasticity_hi: 3.0,
            obj_tol: 0.1,
            max_inner_iters: 200,
            multistart_count: 4,
            perturb_sigma_frac: 0.2,
            softmax_sharpness: 10.0,
            wait_consistency_tol: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    pub pso: PsoParams,
    pub nlp: NlpParams,
}

/// Immutable problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub periods: Vec<TimePeriod>,
    pub modes: Vec<TransitMode>,
    pub patterns: Vec<Pattern>,
    pub zones: Vec<Zone>,
    #[serde(default)]
    pub demand: Vec<DemandEntry>,
    #[serde(default)]
    pub choice: ChoiceParams,
    #[serde(default)]
    pub sams: SamsParams,
    #[serde(default)]
    pub budget: BudgetParams,
    #[serde(default)]
    pub solver: SolverParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<Solution>,
}

// Validation writes `!(x > 0.0)` on purpose: it also rejects NaN.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
impl Scenario {
    pub fn num_periods(&self) -> usize {
        self.periods.len()
    }

    pub fn num_patterns(&self) -> usize {
        self.patterns.len()
    }

    /// Vehicle capacity of the mode a pattern runs.
    pub fn pattern_capacity(&self, p: usize) -> f64 {
        self.modes[self.patterns[p].mode].vehicle_capacity
    }

    /// Operating cost per unit frequency per hour of service.
    pub fn pattern_unit_cost(&self, p: usize) -> f64 {
        let pat = &self.patterns[p];
        self.modes[pat.mode].unit_op_cost * pat.cycle_time_h
    }

    /// Parses and validates a scenario document.
    pub fn from_json_str(text: &str) -> Result<Scenario> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Scenario::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Scenario> {
        let sc: Scenario = serde_json::from_value(value).map_err(|e| Error::Parse(e.to_string()))?;
        let violations = sc.validate();
        if violations.is_empty() {
            Ok(sc)
        } else {
            Err(Error::Invalid(violations))
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// The full document, with defaults filled in, as a JSON value.
    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("scenario serializes")
    }

    /// Applies dotted-key overrides (`solver.pso.epochs=2`) and re-validates.
    ///
    /// Only keys under `choice`, `sams`, `budget` and `solver` that already
    /// exist in the document may be overridden.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[(S, S)]) -> Result<Scenario> {
        let mut doc = self.to_value();
        for (key, raw) in overrides {
            apply_override(&mut doc, key.as_ref(), raw.as_ref())?;
        }
        Scenario::from_value(doc)
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        self.validate_periods(&mut out);
        self.validate_modes(&mut out);
        let served_stops = self.validate_patterns(&mut out);
        self.validate_zones(&served_stops, &mut out);
        self.validate_demand(&mut out);
        self.validate_params(&mut out);
        self.validate_baseline(&mut out);
        out
    }

    fn validate_periods(&self, out: &mut Vec<Violation>) {
        if self.periods.is_empty() {
            out.push(Violation::NoPeriods);
        }
        for (i, k) in self.periods.iter().enumerate() {
            if k.id != i {
                out.push(Violation::IdNotContiguous { table: "periods", index: i });
            }
            if !(k.duration_h > 0.0) || !k.duration_h.is_finite() {
                out.push(Violation::DurationNonpositive { period: i });
            }
        }
    }

    fn validate_modes(&self, out: &mut Vec<Violation>) {
        for (i, m) in self.modes.iter().enumerate() {
            if m.id != i {
                out.push(Violation::IdNotContiguous { table: "modes", index: i });
            }
            if !(m.vehicle_capacity > 0.0) {
                out.push(Violation::CapacityNonpositive { mode: i });
            }
            if !(m.unit_op_cost >= 0.0) {
                out.push(Violation::ModeCostNegative { mode: i });
            }
        }
    }

    fn validate_patterns(&self, out: &mut Vec<Violation>) -> HashSet<StopId> {
        let mut served = HashSet::new();
        for (i, p) in self.patterns.iter().enumerate() {
            if p.id != i {
                out.push(Violation::IdNotContiguous { table: "patterns", index: i });
            }
            if p.mode >= self.modes.len() {
                out.push(Violation::UnknownMode { pattern: i, mode: p.mode });
            }
            if !(p.cycle_time_h > 0.0) {
                out.push(Violation::CycleTimeNonpositive { pattern: i });
            }
            if !(p.max_frequency > 0.0) || !p.max_frequency.is_finite() {
                out.push(Violation::FreqBoundNonpositive { pattern: i });
            }
            if p.stop_sequence.len() < 2 {
                out.push(Violation::TooFewStops { pattern: i });
            }
            if p.segment_times_min.len() + 1 != p.stop_sequence.len() {
                out.push(Violation::SegmentCountMismatch { pattern: i });
            }
            if p.segment_times_min.iter().any(|t| !(*t > 0.0)) {
                out.push(Violation::SegmentTimeNonpositive { pattern: i });
            }
            served.extend(p.stop_sequence.iter().copied());
        }
        served
    }

    fn validate_zones(&self, served: &HashSet<StopId>, out: &mut Vec<Violation>) {
        for (i, z) in self.zones.iter().enumerate() {
            if z.id != i {
                out.push(Violation::IdNotContiguous { table: "zones", index: i });
            }
            for a in z.walk_access.iter().chain(&z.feeder_access) {
                if !(a.time_min > 0.0) || !a.time_min.is_finite() {
                    out.push(Violation::AccessTimeNonpositive { zone: i, stop: a.stop });
                }
                if !served.contains(&a.stop) {
                    out.push(Violation::UnservedStop { zone: i, stop: a.stop });
                }
            }
        }
    }

    fn validate_demand(&self, out: &mut Vec<Violation>) {
        let mut seen = BTreeSet::new();
        for (i, d) in self.demand.iter().enumerate() {
            if d.origin >= self.zones.len() || d.destination >= self.zones.len() {
                out.push(Violation::DemandUnknownZone { entry: i });
            }
            if d.period >= self.periods.len() {
                out.push(Violation::DemandUnknownPeriod { entry: i });
            }
            if d.origin == d.destination {
                out.push(Violation::DemandSelfLoop { entry: i });
            }
            if !(d.trips_per_h >= 0.0) || !d.trips_per_h.is_finite() {
                out.push(Violation::DemandNegative { entry: i });
            }
            if !(d.transit_fare >= 0.0) || !d.p2p_sams_utility.is_finite() || !d.drive_utility.is_finite() {
                out.push(Violation::DemandAttributeInvalid { entry: i });
            }
            if !seen.insert((d.origin, d.destination, d.period)) {
                out.push(Violation::DuplicateDemand { entry: i });
            }
        }
    }

    fn validate_params(&self, out: &mut Vec<Violation>) {
        let c = &self.choice;
        if !(c.beta_time < 0.0) {
            out.push(Violation::BetaTimeNonnegative);
        }
        if !(c.beta_fare < 0.0) {
            out.push(Violation::BetaFareNonnegative);
        }
        if !c.asc_transit.is_finite() {
            out.push(Violation::AscNotFinite);
        }
        if !(c.wait_factor >= 1.0) {
            out.push(Violation::WaitFactorBelowOne);
        }
        if !(c.walk_factor >= 1.0) {
            out.push(Violation::WalkFactorBelowOne);
        }
        if !(c.transfer_penalty_min >= 0.0) {
            out.push(Violation::TransferPenaltyNegative);
        }

        let s = &self.sams;
        if !(s.min_wait_min > 0.0) {
            out.push(Violation::MinWaitNonpositive);
        }
        if !(s.cutoff_lo > 0.0 && s.cutoff_lo < s.cutoff_hi) {
            out.push(Violation::CutoffOrder);
        }
        if !(s.slope_lo_min > 0.0 && s.slope_hi_min > 0.0) {
            out.push(Violation::SlopeNonpositive);
        }
        let steps_ok = s.fp_step_approx > 0.0
            && s.fp_step_approx < 1.0
            && s.fp_step_calc > 0.0
            && s.fp_step_calc < 1.0
            && (s.fp_step_approx + s.fp_step_calc - 1.0).abs() <= 1e-9;
        if !steps_ok {
            out.push(Violation::StepSizesNotConvex);
        }
        if !(s.fp_tol_min > 0.0) {
            out.push(Violation::FpTolNonpositive);
        }
        if s.fp_max_outer == 0 {
            out.push(Violation::FpMaxOuterZero);
        }
        if !(s.avg_occupancy > 0.0) {
            out.push(Violation::OccupancyNonpositive);
        }
        if !(s.unit_op_cost >= 0.0) {
            out.push(Violation::SamsCostNegative);
        }
        if !(s.max_fleet >= 0.0) || !s.max_fleet.is_finite() {
            out.push(Violation::MaxFleetNegative);
        }
        if !(s.max_wait_min > s.min_wait_min) {
            out.push(Violation::MaxWaitBelowMin);
        }

        if !(self.budget.daily_budget > 0.0) {
            out.push(Violation::BudgetNonpositive);
        }

        let pso = &self.solver.pso;
        if pso.particles == 0 {
            out.push(Violation::ParticlesZero);
        }
        if !(pso.velocity_clamp_frac > 0.0) {
            out.push(Violation::VelocityClampNonpositive);
        }
        if !(pso.inertia >= 0.0 && pso.cognitive >= 0.0 && pso.social >= 0.0) {
            out.push(Violation::PsoCoefficientNegative);
        }

        let nlp = &self.solver.nlp;
        if !(nlp.reg >= 0.0) {
            out.push(Violation::RegNegative);
        }
        if !(nlp.freq_expand > 1.0) {
            out.push(Violation::FreqExpandNotAboveOne);
        }
        if !(nlp.wait_shrink > 0.0 && nlp.wait_shrink < 1.0) {
            out.push(Violation::WaitShrinkOutOfRange);
        }
        if !(nlp.elasticity_lo >= 0.0 && nlp.elasticity_lo < nlp.elasticity_hi) {
            out.push(Violation::ElasticityBounds);
        }
        if !(nlp.obj_tol > 0.0) {
            out.push(Violation::ObjTolNonpositive);
        }
        if nlp.multistart_count == 0 {
            out.push(Violation::MultistartZero);
        }
        if !(nlp.perturb_sigma_frac >= 0.0) {
            out.push(Violation::PerturbNegative);
        }
        if !(nlp.softmax_sharpness > 0.0) {
            out.push(Violation::SharpnessNonpositive);
        }
        if !(nlp.wait_consistency_tol > 0.0) {
            out.push(Violation::WaitToleranceNonpositive);
        }
    }

    fn validate_baseline(&self, out: &mut Vec<Violation>) {
        let Some(b) = &self.baseline else { return };
        if b.check_dimensions(self).is_err() {
            out.push(Violation::BaselineDimension);
            return;
        }
        if !b.within_bounds(self) {
            out.push(Violation::BaselineOutOfBounds);
        }
    }
}

/// Reads, parses and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Scenario::from_json_str(&text)
}

pub fn save_scenario(sc: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, sc.to_json_string()).map_err(|e| Error::io(path, e))
}

const OVERRIDABLE: [&str; 4] = ["choice", "sams", "budget", "solver"];

fn apply_override(doc: &mut Value, key: &str, raw: &str) -> Result<()> {
    let mut parts = key.split('.');
    let head = parts.next().unwrap_or_default();
    if !OVERRIDABLE.contains(&head) {
        return Err(Error::UnknownOverride(key.to_string()));
    }
    let mut slot = doc.get_mut(head).ok_or_else(|| Error::UnknownOverride(key.to_string()))?;
    for part in parts {
        slot = slot
            .as_object_mut()
            .and_then(|obj| obj.get_mut(part))
            .ok_or_else(|| Error::UnknownOverride(key.to_string()))?;
    }
    if slot.is_object() {
        return Err(Error::UnknownOverride(key.to_string()));
    }
    *slot = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok(())
}

/// One failed invariant. Violations are data, not errors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NoPeriods,
    IdNotContiguous { table: &'static str, index: usize },
    DurationNonpositive { period: usize },
    CapacityNonpositive { mode: usize },
    ModeCostNegative { mode: usize },
    UnknownMode { pattern: usize, mode: usize },
    CycleTimeNonpositive { pattern: usize },
    FreqBoundNonpositive { pattern: usize },
    TooFewStops { pattern: usize },
    SegmentCountMismatch { pattern: usize },
    SegmentTimeNonpositive { pattern: usize },
    AccessTimeNonpositive { zone: usize, stop: StopId },
    UnservedStop { zone: usize, stop: StopId },
    DemandUnknownZone { entry: usize },
    DemandUnknownPeriod { entry: usize },
    DemandSelfLoop { entry: usize },
    DemandNegative { entry: usize },
    DemandAttributeInvalid { entry: usize },
    DuplicateDemand { entry: usize },
    BetaTimeNonnegative,
    BetaFareNonnegative,
    AscNotFinite,
    WaitFactorBelowOne,
    WalkFactorBelowOne,
    TransferPenaltyNegative,
    MinWaitNonpositive,
    CutoffOrder,
    SlopeNonpositive,
    StepSizesNotConvex,
    FpTolNonpositive,
    FpMaxOuterZero,
    OccupancyNonpositive,
    SamsCostNegative,
    MaxFleetNegative,
    MaxWaitBelowMin,
    BudgetNonpositive,
    ParticlesZero,
    VelocityClampNonpositive,
    PsoCoefficientNegative,
    RegNegative,
    FreqExpandNotAboveOne,
    WaitShrinkOutOfRange,
    ElasticityBounds,
    ObjTolNonpositive,
    MultistartZero,
    PerturbNegative,
    SharpnessNonpositive,
    WaitToleranceNonpositive,
    BaselineDimension,
    BaselineOutOfBounds,
}

impl Violation {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        use Violation::*;
        match self {
            NoPeriods => "no_periods",
            IdNotContiguous { .. } => "id_not_contiguous",
            DurationNonpositive { .. } => "duration_nonpositive",
            CapacityNonpositive { .. } => "capacity_nonpositive",
            ModeCostNegative { .. } => "mode_cost_negative",
            UnknownMode { .. } => "unknown_mode",
            CycleTimeNonpositive { .. } => "cycle_time_nonpositive",
            FreqBoundNonpositive { .. } => "freq_bound_nonpositive",
            TooFewStops { .. } => "too_few_stops",
            SegmentCountMismatch { .. } => "segment_count_mismatch",
            SegmentTimeNonpositive { .. } => "segment_time_nonpositive",
            AccessTimeNonpositive { .. } => "access_time_nonpositive",
            UnservedStop { .. } => "unserved_stop",
            DemandUnknownZone { .. } => "demand_unknown_zone",
            DemandUnknownPeriod { .. } => "demand_unknown_period",
            DemandSelfLoop { .. } => "demand_self_loop",
            DemandNegative { .. } => "demand_negative",
            DemandAttributeInvalid { .. } => "demand_attribute_invalid",
            DuplicateDemand { .. } => "duplicate_demand",
            BetaTimeNonnegative => "beta_time_nonnegative",
            BetaFareNonnegative => "beta_fare_nonnegative",
            AscNotFinite => "asc_not_finite",
            WaitFactorBelowOne => "wait_factor_below_one",
            WalkFactorBelowOne => "walk_factor_below_one",
            TransferPenaltyNegative => "transfer_penalty_negative",
            MinWaitNonpositive => "min_wait_nonpositive",
            CutoffOrder => "cutoff_order",
            SlopeNonpositive => "slope_nonpositive",
            StepSizesNotConvex => "step_sizes_not_convex",
            FpTolNonpositive => "fp_tol_nonpositive",
            FpMaxOuterZero => "fp_max_outer_zero",
            OccupancyNonpositive => "occupancy_nonpositive",
            SamsCostNegative => "sams_cost_negative",
            MaxFleetNegative => "max_fleet_negative",
            MaxWaitBelowMin => "max_wait_below_min",
            BudgetNonpositive => "budget_nonpositive",
            ParticlesZero => "particles_zero",
            VelocityClampNonpositive => "velocity_clamp_nonpositive",
            PsoCoefficientNegative => "pso_coefficient_negative",
            RegNegative => "reg_negative",
            FreqExpandNotAboveOne => "freq_expand_not_above_one",
            WaitShrinkOutOfRange => "wait_shrink_out_of_range",
            ElasticityBounds => "elasticity_bounds",
            ObjTolNonpositive => "obj_tol_nonpositive",
            MultistartZero => "multistart_zero",
            PerturbNegative => "perturb_negative",
            SharpnessNonpositive => "sharpness_nonpositive",
            WaitToleranceNonpositive => "wait_tolerance_nonpositive",
            BaselineDimension => "baseline_dimension",
            BaselineOutOfBounds => "baseline_out_of_bounds",
        }
    }

    /// Document path of the offending field.
    pub fn path(&self) -> String {
        use Violation::*;
        match self {
            NoPeriods => "periods".into(),
            IdNotContiguous { table, index } => format!("{table}[{index}].id"),
            DurationNonpositive { period } => format!("periods[{period}].duration_h"),
            CapacityNonpositive { mode } => format!("modes[{mode}].vehicle_capacity"),
            ModeCostNegative { mode } => format!("modes[{mode}].unit_op_cost"),
            UnknownMode { pattern, .. } => format!("patterns[{pattern}].mode"),
            CycleTimeNonpositive { pattern } => format!("patterns[{pattern}].cycle_time_h"),
            FreqBoundNonpositive { pattern } => format!("patterns[{pattern}].max_frequency"),
            TooFewStops { pattern } => format!("patterns[{pattern}].stop_sequence"),
            SegmentCountMismatch { pattern } | SegmentTimeNonpositive { pattern } => {
                format!("patterns[{pattern}].segment_times_min")
            }
            AccessTimeNonpositive { zone, .. } | UnservedStop { zone, .. } => {
                format!("zones[{zone}]")
            }
            DemandUnknownZone { entry }
            | DemandUnknownPeriod { entry }
            | DemandSelfLoop { entry }
            | DemandNegative { entry }
            | DemandAttributeInvalid { entry }
            | DuplicateDemand { entry } => format!("demand[{entry}]"),
            BetaTimeNonnegative => "choice.beta_time".into(),
            BetaFareNonnegative => "choice.beta_fare".into(),
            AscNotFinite => "choice.asc_transit".into(),
            WaitFactorBelowOne => "choice.wait_factor".into(),
            WalkFactorBelowOne => "choice.walk_factor".into(),
            TransferPenaltyNegative => "choice.transfer_penalty_min".into(),
            MinWaitNonpositive => "sams.min_wait_min".into(),
            CutoffOrder => "sams.cutoff_lo".into(),
            SlopeNonpositive => "sams.slope_lo_min".into(),
            StepSizesNotConvex => "sams.fp_step_approx".into(),
            FpTolNonpositive => "sams.fp_tol_min".into(),
            FpMaxOuterZero => "sams.fp_max_outer".into(),
            OccupancyNonpositive => "sams.avg_occupancy".into(),
            SamsCostNegative => "sams.unit_op_cost".into(),
            MaxFleetNegative => "sams.max_fleet".into(),
            MaxWaitBelowMin => "sams.max_wait_min".into(),
            BudgetNonpositive => "budget.daily_budget".into(),
            ParticlesZero => "solver.pso.particles".into(),
            VelocityClampNonpositive => "solver.pso.velocity_clamp_frac".into(),
            PsoCoefficientNegative => "solver.pso".into(),
            RegNegative => "solver.nlp.reg".into(),
            FreqExpandNotAboveOne => "solver.nlp.freq_expand".into(),
            WaitShrinkOutOfRange => "solver.nlp.wait_shrink".into(),
            ElasticityBounds => "solver.nlp.elasticity_lo".into(),
            ObjTolNonpositive => "solver.nlp.obj_tol".into(),
            MultistartZero => "solver.nlp.multistart_count".into(),
            PerturbNegative => "solver.nlp.perturb_sigma_frac".into(),
            SharpnessNonpositive => "solver.nlp.softmax_sharpness".into(),
            WaitToleranceNonpositive => "solver.nlp.wait_consistency_tol".into(),
            BaselineDimension | BaselineOutOfBounds => "baseline".into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        let reason = match self {
            CutoffOrder => "utilization cutoffs must satisfy 0 < cutoff_lo < cutoff_hi".to_string(),
            StepSizesNotConvex => "fixed-point step sizes must lie in (0,1) and sum to 1".to_string(),
            UnservedStop { stop, .. } => format!("stop {stop} is not served by any pattern"),
            UnknownMode { mode, .. } => format!("mode {mode} does not exist"),
            _ => "invariant violated".to_string(),
        };
        write!(f, "{} [{}]: {}", self.path(), self.code(), reason)
    }
}
