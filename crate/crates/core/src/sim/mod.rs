//! Finite-population engine: science tables, randomization draws, Monte Carlo
//! power and exhaustive enumeration.

mod clt;
mod enumerate;
mod montecarlo;
mod population;

pub use clt::{clt_condition_report, CltReport};
pub use enumerate::{assignment_count, enumerate_randomizations, EnumerationOptions, ExactDistribution, DEFAULT_CAP};
pub use montecarlo::{
    draw_assignment, run_protocol, simulate, Assignment, EffectSimulation, PopulationResult, ProtocolReport,
    SimulationOptions, SimulationReport,
};
pub use population::{construct_population, permute_population, PotentialOutcomesTable};
