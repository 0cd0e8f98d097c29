//! Randomization-based (Neymanian) design and analysis of 2^K factorial
//! experiments with binary outcomes.
//!
//! * [`design`] builds treatment indices and the ±1 contrast matrix.
//! * [`estimation`] summarises observed data and produces effect estimates,
//!   conservative standard errors, intervals and adjusted p-values.
//! * [`nonlinear`] handles log and logit factorial effects.
//! * [`power`] covers analytic power, sample size and optimal allocation.
//! * [`sim`] is the finite-population engine: science tables, complete
//!   randomization, Monte Carlo power, and exact enumeration.
//! * [`io`] and [`cli`] implement file formats and the command-line surface.

pub mod cli;
pub mod design;
pub mod error;
pub mod estimation;
pub mod exact;
pub mod exec;
pub mod io;
pub mod nonlinear;
pub mod normal;
pub mod power;
pub mod rng;
pub mod sim;

pub use design::{ContrastMatrix, Effect, FactorialDesign};
pub use error::{Error, Result};
pub use estimation::{
    estimate_effects, infer, neyman_se, summarize, Alternative, Correction, GroupSummary,
    InferenceOptions, InferenceTable, ObservedDataset, Record,
};
pub use exec::Execution;
pub use normal::{normal_cdf, normal_quantile};
