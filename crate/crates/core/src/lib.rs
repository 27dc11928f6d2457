//! Joint transit frequency setting and SAV feeder fleet sizing.
//!
//! A scenario describes zones, transit patterns, OD demand and model
//! parameters. [`evaluate`] scores a decision (frequencies per pattern and
//! period, fleet per period) by routing, mode choice and the feeder wait
//! fixed point. [`run_hybrid`] searches decisions with a particle swarm whose
//! particles are refined by a local smooth sub-problem ([`solve_local`]).

pub mod choice;
pub mod error;
pub mod evaluator;
pub mod exec;
pub mod export;
pub mod graph;
pub mod local_nlp;
pub mod pso;
pub mod sams;
pub mod scenario;

pub use error::{Error, Result};
pub use evaluator::{brute_force, evaluate, operating_cost, repair, BruteForce, EvalResult, Solution};
pub use exec::Execution;
pub use graph::{build_graph, MultimodalGraph};
pub use local_nlp::{extract_reference, solve_local, ReferenceState, SubSolution};
pub use pso::{run_hybrid, HybridResult};
pub use scenario::{load_scenario, save_scenario, Scenario};
