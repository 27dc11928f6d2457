//! Multinomial logit split of OD demand across transit, point-to-point SAV
//! and driving.

use serde::Serialize;

use crate::scenario::ChoiceParams;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ModeSplit {
    pub transit_trips_per_h: f64,
    pub p2p_trips_per_h: f64,
    pub drive_trips_per_h: f64,
}

impl ModeSplit {
    pub fn total(&self) -> f64 {
        self.transit_trips_per_h + self.p2p_trips_per_h + self.drive_trips_per_h
    }
}

/// Linear transit utility from generalized journey minutes and fare.
pub fn transit_utility(t_min: f64, fare: f64, cp: &ChoiceParams) -> f64 {
    cp.asc_transit + cp.beta_time * t_min + cp.beta_fare * fare
}

/// Logit shares of `demand`, shifted by the largest utility for stability.
///
/// `u_transit = -inf` encodes unreachable transit; its share is exactly zero.
/// The drive share is the remainder so the three shares sum to `demand`.
pub fn mode_split(demand: f64, u_transit: f64, u_p2p: f64, u_drive: f64) -> ModeSplit {
    if demand <= 0.0 {
        return ModeSplit::default();
    }
    let top = u_transit.max(u_p2p).max(u_drive);
    let et = if u_transit == f64::NEG_INFINITY { 0.0 } else { (u_transit - top).exp() };
    let ep = (u_p2p - top).exp();
    let ed = (u_drive - top).exp();
    let denom = et + ep + ed;
    let transit = demand * et / denom;
    let p2p = demand * ep / denom;
    let drive = (demand - transit - p2p).max(0.0);
    ModeSplit { transit_trips_per_h: transit, p2p_trips_per_h: p2p, drive_trips_per_h: drive }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn utility_at_zero_is_the_constant() {
        let cp = ChoiceParams::default();
        assert_eq!(transit_utility(0.0, 0.0, &cp), -1.5);
    }

    #[test]
    fn utility_with_table_coefficients() {
        let cp = ChoiceParams::default();
        assert!((transit_utility(10.0, 2.5, &cp) - (-3.95)).abs() < 1e-12);
    }

    #[test]
    fn zero_coefficients_leave_the_constant() {
        let cp = ChoiceParams { beta_time: 0.0, beta_fare: 0.0, ..Default::default() };
        assert_eq!(transit_utility(123.0, 9.0, &cp), -1.5);
    }

    #[test]
    fn equal_utilities_split_evenly() {
        let s = mode_split(90.0, -1.0, -1.0, -1.0);
        assert!((s.transit_trips_per_h - 30.0).abs() < 1e-12);
        assert!((s.p2p_trips_per_h - 30.0).abs() < 1e-12);
        assert!((s.drive_trips_per_h - 30.0).abs() < 1e-12);
    }

    #[test]
    fn reference_split() {
        // e^-1.5, e^-1.7, 1 normalized by their sum.
        let s = mode_split(100.0, -1.5, -1.7, 0.0);
        assert!((s.transit_trips_per_h - 15.8719).abs() < 1e-3);
        assert!((s.p2p_trips_per_h - 12.9948).abs() < 1e-3);
        assert!((s.drive_trips_per_h - 71.1333).abs() < 1e-3);
        assert!((s.total() - 100.0).abs() < 1e-12);
    }

    #[test]
    fn unreachable_transit_gets_nothing() {
        let s = mode_split(100.0, f64::NEG_INFINITY, 0.0, 0.0);
        assert_eq!(s.transit_trips_per_h, 0.0);
        assert!((s.p2p_trips_per_h - 50.0).abs() < 1e-12);
        assert!((s.drive_trips_per_h - 50.0).abs() < 1e-12);
    }

    #[test]
    fn extreme_utilities_stay_finite() {
        let s = mode_split(10.0, 800.0, -800.0, 0.0);
        assert!((s.transit_trips_per_h - 10.0).abs() < 1e-12);
        assert!(s.total().is_finite());
    }

    proptest! {
        #[test]
        fn shares_sum_and_bounded(q in 0.0f64..1e5, a in -30.0f64..30.0, b in -30.0f64..30.0, c in -30.0f64..30.0) {
            let s = mode_split(q, a, b, c);
            prop_assert!((s.total() - q).abs() <= 1e-9 * q.max(1.0));
            for x in [s.transit_trips_per_h, s.p2p_trips_per_h, s.drive_trips_per_h] {
                prop_assert!(x >= 0.0 && x <= q * (1.0 + 1e-12));
            }
        }

        #[test]
        fn translation_invariant(q in 1.0f64..1e4, a in -10.0f64..10.0, b in -10.0f64..10.0, c in -10.0f64..10.0, shift in -50.0f64..50.0) {
            let s = mode_split(q, a, b, c);
            let t = mode_split(q, a + shift, b + shift, c + shift);
            prop_assert!((s.transit_trips_per_h - t.transit_trips_per_h).abs() <= 1e-12 * q);
            prop_assert!((s.p2p_trips_per_h - t.p2p_trips_per_h).abs() <= 1e-12 * q);
        }

        #[test]
        fn transit_share_increases_with_utility(q in 1.0f64..1e4, a in -10.0f64..10.0, d in 0.01f64..5.0, b in -10.0f64..10.0, c in -10.0f64..10.0) {
            let lo = mode_split(q, a, b, c).transit_trips_per_h;
            let hi = mode_split(q, a + d, b, c).transit_trips_per_h;
            prop_assert!(hi > lo);
        }
    }
}
