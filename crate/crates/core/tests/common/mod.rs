#![allow(dead_code)]

use std::path::PathBuf;

use feederopt::scenario::{AccessLink, DemandEntry, Pattern, TimePeriod, TransitMode, Zone};
use feederopt::{load_scenario, Scenario, Solution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fixture(name: &str) -> Scenario {
    load_scenario(fixture_path(&format!("{name}.json"))).expect("fixture loads")
}

/// Small feeder-dependent scenario: at most 6 zones and 3 patterns, two
/// periods. Zone 0 reaches transit only by feeder.
pub fn random_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_patterns = rng.random_range(2..=3);
    let n_zones = rng.random_range(3..=6);
    let stop_sets: [&[usize]; 3] = [&[0, 1, 2], &[2, 3, 4], &[1, 5]];

    let modes = vec![TransitMode {
        id: 0,
        vehicle_capacity: rng.random_range(30.0..80.0),
        unit_op_cost: rng.random_range(80.0..200.0),
    }];
    let patterns: Vec<Pattern> = (0..n_patterns)
        .map(|p| {
            let stops = stop_sets[p].to_vec();
            Pattern {
                id: p,
                mode: 0,
                cycle_time_h: rng.random_range(0.5..1.5),
                max_frequency: rng.random_range(10.0..25.0),
                segment_times_min: (1..stops.len()).map(|_| rng.random_range(5.0..15.0)).collect(),
                stop_sequence: stops,
            }
        })
        .collect();
    let served: Vec<usize> = {
        let mut s: Vec<usize> = patterns.iter().flat_map(|p| p.stop_sequence.clone()).collect();
        s.sort_unstable();
        s.dedup();
        s
    };

    let zones: Vec<Zone> = (0..n_zones)
        .map(|z| {
            let mut walk = Vec::new();
            let mut feeder = Vec::new();
            let stop = served[rng.random_range(0..served.len())];
            if z == 0 || rng.random_bool(0.5) {
                feeder.push(AccessLink { stop, time_min: rng.random_range(5.0..15.0) });
            }
            if z != 0 && (feeder.is_empty() || rng.random_bool(0.4)) {
                let stop = served[rng.random_range(0..served.len())];
                walk.push(AccessLink { stop, time_min: rng.random_range(2.0..12.0) });
            }
            Zone { id: z, walk_access: walk, feeder_access: feeder }
        })
        .collect();

    let mut demand = Vec::new();
    for k in 0..2 {
        let scale = if k == 0 { 1.0 } else { 0.5 };
        for o in 0..n_zones {
            for d in 0..n_zones {
                let forced = o == 0 && d == 1;
                if o == d || !(forced || rng.random_bool(0.5)) {
                    continue;
                }
                let base = rng.random_range(-11.0..-7.0);
                demand.push(DemandEntry {
                    origin: o,
                    destination: d,
                    period: k,
                    trips_per_h: scale * rng.random_range(20.0..200.0),
                    transit_fare: 2.5,
                    p2p_sams_utility: base - 1.0,
                    drive_utility: base,
                });
            }
        }
    }

    let mut sc = Scenario {
        periods: vec![TimePeriod { id: 0, duration_h: 3.0 }, TimePeriod { id: 1, duration_h: 5.0 }],
        modes,
        patterns,
        zones,
        demand,
        choice: Default::default(),
        sams: Default::default(),
        budget: Default::default(),
        solver: Default::default(),
        baseline: None,
    };
    sc.sams.max_fleet = rng.random_range(50.0..200.0);
    sc.budget.daily_budget = rng.random_range(10_000.0..40_000.0);
    assert!(sc.validate().is_empty(), "{:?}", sc.validate());
    sc
}

/// Uniform draw inside the decision boxes.
pub fn random_solution(sc: &Scenario, rng: &mut impl Rng) -> Solution {
    Solution {
        freq_per_h: sc
            .patterns
            .iter()
            .map(|p| (0..sc.num_periods()).map(|_| rng.random_range(0.0..=p.max_frequency)).collect())
            .collect(),
        fleet: (0..sc.num_periods()).map(|_| rng.random_range(0.0..=sc.sams.max_fleet)).collect(),
    }
}

use feederopt::local_nlp::{local_bounds, sub_objective, ReferenceState, SubSolution};

fn flatten(x: &SubSolution) -> Vec<f64> {
    let mut v: Vec<f64> = x.freq.iter().flatten().copied().collect();
    v.extend(&x.fleet);
    v.extend(&x.wait);
    v
}

fn unflatten(shape: &SubSolution, v: &[f64]) -> SubSolution {
    let mut out = shape.clone();
    let mut i = 0;
    for row in &mut out.freq {
        for f in row {
            *f = v[i];
            i += 1;
        }
    }
    for s in &mut out.fleet {
        *s = v[i];
        i += 1;
    }
    for u in &mut out.wait {
        *u = v[i];
        i += 1;
    }
    out
}

/// Uniform point in the local boxes.
pub fn random_local_point(reference: &ReferenceState, sc: &Scenario, rng: &mut impl Rng) -> SubSolution {
    let (lo, hi) = local_bounds(reference, sc);
    let (l, h) = (flatten(&lo), flatten(&hi));
    let v: Vec<f64> = l.iter().zip(&h).map(|(&a, &b)| if b > a { rng.random_range(a..b) } else { a }).collect();
    unflatten(&lo, &v)
}

/// Largest relative error between the analytic gradient and central
/// differences with relative step `rel_h`, skipping coordinates within
/// `face_gap` of a box face. The denominator is floored at `floor`.
pub fn gradient_error(
    x: &SubSolution,
    reference: &ReferenceState,
    sc: &Scenario,
    rel_h: f64,
    face_gap: f64,
    floor: f64,
) -> (f64, usize) {
    let (lo, hi) = local_bounds(reference, sc);
    let (l, h) = (flatten(&lo), flatten(&hi));
    let v = flatten(x);
    let (_, grad) = sub_objective(x, reference, sc);
    let g = flatten(&grad);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for j in 0..v.len() {
        if v[j] - l[j] < face_gap || h[j] - v[j] < face_gap {
            continue;
        }
        let step = rel_h * v[j].abs().max(1e-3);
        let mut up = v.clone();
        let mut down = v.clone();
        up[j] += step;
        down[j] -= step;
        let fu = sub_objective(&unflatten(x, &up), reference, sc).0;
        let fd = sub_objective(&unflatten(x, &down), reference, sc).0;
        let numeric = (fu - fd) / (2.0 * step);
        let err = (numeric - g[j]).abs() / numeric.abs().max(g[j].abs()).max(floor);
        if std::env::var("GRAD_DEBUG").is_ok() && err > 1e-5 {
            eprintln!("coord {j} x {} analytic {} numeric {} f {}", v[j], g[j], numeric, fu);
        }
        worst = worst.max(err);
        checked += 1;
    }
    (worst, checked)
}
