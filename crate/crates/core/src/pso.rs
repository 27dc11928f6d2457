//! Particle swarm over full solution vectors, optionally interleaved with the
//! local improvement step.
//!
//! Positions are flat solution vectors (frequencies pattern-major, then fleet
//! per period). Every position is clipped to its box and repaired onto the
//! budget before it is evaluated. Particles are evaluated and improved
//! independently within an epoch; each draws from its own seeded stream, so
//! results do not depend on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::evaluator::{evaluate, repair, EvalResult, Solution};
use crate::exec::{derive_seed, map_indices, Execution};
use crate::graph::{build_graph, MultimodalGraph};
use crate::local_nlp::{extract_reference, solve_local};
use crate::scenario::{PsoParams, Scenario};

const STREAM_INIT: u64 = 0;
const STREAM_STEP: u64 = 1;
const STREAM_LOCAL: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub best_position: Vec<f64>,
    pub best_objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Swarm {
    pub particles: Vec<Particle>,
    pub global_best: Vec<f64>,
    pub global_best_objective: f64,
    pub epoch: usize,
    pub seed: u64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

fn clip_and_repair(x: &[f64], sc: &Scenario) -> Vec<f64> {
    repair(&Solution::from_flat(sc, x), sc).to_flat()
}

/// Particle 0 is the baseline (or the box midpoint); the rest are uniform in
/// the boxes. All positions are repaired and all velocities start at zero.
pub fn init_swarm(sc: &Scenario) -> Swarm {
    let seed = sc.solver.pso.seed;
    let (lower, upper) = Solution::flat_bounds(sc);
    let n = sc.solver.pso.particles.max(1);
    let first = sc.baseline.clone().unwrap_or_else(|| Solution::mid_box(sc));
    let particles = (0..n)
        .map(|i| {
            let raw = if i == 0 {
                first.to_flat()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[STREAM_INIT, i as u64]));
                lower.iter().zip(&upper).map(|(&lo, &hi)| lo + (hi - lo) * rng.random::<f64>()).collect()
            };
            let position = clip_and_repair(&raw, sc);
            Particle {
                velocity: vec![0.0; position.len()],
                best_position: position.clone(),
                best_objective: f64::NEG_INFINITY,
                position,
            }
        })
        .collect::<Vec<_>>();
    Swarm {
        global_best: particles[0].position.clone(),
        global_best_objective: f64::NEG_INFINITY,
        particles,
        epoch: 0,
        seed,
        lower,
        upper,
    }
}

/// Velocity and position update for one particle with given random scalars.
///
/// The new velocity is clamped per coordinate to `velocity_clamp_frac` of the
/// box width; the new position is clipped to the box. Budget repair is left
/// to the caller.
pub fn move_particle(
    particle: &mut Particle,
    global_best: &[f64],
    h1: f64,
    h2: f64,
    params: &PsoParams,
    lower: &[f64],
    upper: &[f64],
) {
    for j in 0..particle.position.len() {
        let x = particle.position[j];
        let vmax = params.velocity_clamp_frac * (upper[j] - lower[j]);
        let v = params.inertia * particle.velocity[j]
            + params.cognitive * h1 * (particle.best_position[j] - x)
            + params.social * h2 * (global_best[j] - x);
        let v = v.clamp(-vmax, vmax);
        particle.velocity[j] = v;
        particle.position[j] = (x + v).clamp(lower[j], upper[j]);
    }
}

impl Swarm {
    /// Records the fitness of every current position in the personal and
    /// global bests. Ties keep the earlier best.
    pub fn update_bests(&mut self, fitness: &[f64]) {
        for (p, &fit) in self.particles.iter_mut().zip(fitness) {
            if fit > p.best_objective {
                p.best_objective = fit;
                p.best_position = p.position.clone();
            }
        }
        for p in &self.particles {
            if p.best_objective > self.global_best_objective {
                self.global_best_objective = p.best_objective;
                self.global_best = p.best_position.clone();
            }
        }
    }
}

/// One swarm update: bests from `fitness`, then move every particle with
/// scalar `h1, h2` drawn from its own stream for this epoch, then repair.
pub fn step(mut sw: Swarm, fitness: &[f64], sc: &Scenario) -> Swarm {
    sw.update_bests(fitness);
    let params = &sc.solver.pso;
    for (i, p) in sw.particles.iter_mut().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(sw.seed, &[STREAM_STEP, sw.epoch as u64, i as u64]));
        let h1: f64 = rng.random();
        let h2: f64 = rng.random();
        move_particle(p, &sw.global_best, h1, h2, params, &sw.lower, &sw.upper);
        p.position = clip_and_repair(&p.position, sc);
    }
    sw.epoch += 1;
    sw
}

/// One particle's evaluation within an epoch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistoryRow {
    pub epoch: usize,
    pub particle: usize,
    /// Objective of the position the swarm proposed.
    pub objective: f64,
    /// Objective after local improvement (equal to `objective` without it).
    pub post_nlp_objective: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochSummary {
    pub epoch: usize,
    /// Global best after this epoch.
    pub best: f64,
    /// Mean post-improvement objective of the swarm in this epoch.
    pub mean: f64,
}

#[derive(Debug, Clone)]
pub struct HybridResult {
    pub best: Solution,
    pub best_eval: EvalResult,
    pub history: Vec<HistoryRow>,
    pub epochs: Vec<EpochSummary>,
}

/// Evaluates a position and, unless disabled, improves it locally.
///
/// Each round freezes the current evaluation, solves the local problem and
/// re-evaluates. Only strict improvements are kept; the loop stops once the
/// gain falls below the objective tolerance or after `nlp_rounds` rounds.
pub fn improve(sc: &Scenario, g: &MultimodalGraph, position: &Solution, seed: u64) -> (EvalResult, EvalResult) {
    let first = evaluate(position, sc, g);
    let mut current = first.clone();
    if sc.solver.pso.pso_only {
        return (first, current);
    }
    for round in 0..sc.solver.pso.nlp_rounds {
        let reference = extract_reference(&current, sc, g);
        let local = solve_local(&reference, sc, &reference.start_point(), derive_seed(seed, &[round as u64]));
        let next = evaluate(&local.solution, sc, g);
        if next.objective <= current.objective {
            break;
        }
        let gain = next.objective - current.objective;
        current = next;
        if gain < sc.solver.nlp.obj_tol {
            break;
        }
    }
    (first, current)
}

/// Hybrid search: warm-started swarm, per-particle local improvement, and the
/// swarm update, for the configured number of epochs.
///
/// With zero epochs the initial swarm is still evaluated (and improved) and
/// its best is returned, but no history is recorded.
pub fn run_hybrid(sc: &Scenario, exec: Execution) -> Result<HybridResult> {
    let g = build_graph(sc)?;
    Ok(run_hybrid_on(sc, &g, exec))
}

pub fn run_hybrid_on(sc: &Scenario, g: &MultimodalGraph, exec: Execution) -> HybridResult {
    let mut swarm = init_swarm(sc);
    let epochs = sc.solver.pso.epochs;
    let mut history = Vec::new();
    let mut summaries = Vec::new();
    let mut best_eval: Option<EvalResult> = None;

    for epoch in 0..epochs.max(1) {
        swarm.epoch = epoch;
        let outcomes = map_indices(swarm.particles.len(), exec, |i| {
            let pos = Solution::from_flat(sc, &swarm.particles[i].position);
            improve(sc, g, &pos, derive_seed(swarm.seed, &[STREAM_LOCAL, epoch as u64, i as u64]))
        });

        let mut fitness = Vec::with_capacity(outcomes.len());
        for (i, (first, improved)) in outcomes.into_iter().enumerate() {
            swarm.particles[i].position = improved.solution.to_flat();
            fitness.push(improved.objective);
            if epochs > 0 {
                history.push(HistoryRow {
                    epoch,
                    particle: i,
                    objective: first.objective,
                    post_nlp_objective: improved.objective,
                    cost: improved.cost,
                });
            }
            if best_eval.as_ref().is_none_or(|b| improved.objective > b.objective) {
                best_eval = Some(improved);
            }
        }
        swarm.update_bests(&fitness);
        if epochs > 0 {
            summaries.push(EpochSummary {
                epoch,
                best: swarm.global_best_objective,
                mean: fitness.iter().sum::<f64>() / fitness.len() as f64,
            });
        }
        if epoch + 1 < epochs {
            swarm = step(swarm, &fitness, sc);
        }
    }

    let best_eval = best_eval.expect("at least one particle");
    HybridResult { best: best_eval.solution.clone(), best_eval, history, epochs: summaries }
}
