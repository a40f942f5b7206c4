//! Optimal linear wage contracts for teams whose members are linked by a
//! peer-effects network.
//!
//! Worker `i` chooses effort `e_i` at cost `e_i^2 / 2 - lambda e_i sum_j g_ij e_j`,
//! output is `sum_i e_i` plus noise, and the firm pays `beta_i + alpha_i X`.
//! The crate solves for first-best, granular, coarse (group-level), modular
//! (min-of-modules) and heterogeneous-worker contracts, relates profits to
//! the network spectrum, and ships a numeric oracle for cross-checking.

pub mod analysis;
pub mod cli;
pub mod coarse;
pub mod contracts;
pub mod equilibrium;
pub mod error;
pub mod heterogeneous;
mod linalg;
pub mod modular;
pub mod network;
pub mod oracle;

pub use nalgebra;
pub use coarse::{optimal_coarse, CoarseSolution, Partition};
pub use contracts::{first_best, optimal_granular, GranularSolution};
pub use equilibrium::{Assumption2Report, Contract, EquilibriumOutcome, ModelParams};
pub use error::{Error, Result};
pub use heterogeneous::{optimal_heterogeneous, HeterogeneousParams};
pub use modular::{optimal_modular, ModuleAssignment, ModularSolution};
pub use network::{Direction, Network, PlantedVariant, Spectrum};
