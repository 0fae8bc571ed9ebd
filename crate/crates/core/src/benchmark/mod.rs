//! Aircraft simulation study: a linearized Boeing 747 with Dryden gusts,
//! seeded data generation, and a Monte Carlo comparison of the data-driven
//! predictors against a model-based oracle in closed-loop tracking.

pub mod closed_loop;
pub mod config;
pub mod monte_carlo;
pub mod oracle;
pub mod plant;
pub mod simulate;

pub use closed_loop::{performance_indices, PerformanceIndices};
pub use config::{BenchmarkConfig, Method, TrackingConfig};
pub use monte_carlo::{run_monte_carlo, summarize, BoxplotSummary, MonteCarloResult, RunRecord, Study};
pub use oracle::{oracle_kf, OracleFilter};
pub use plant::{b747_continuous, benchmark_plant, dryden_augment, zoh_discretize, ContinuousPlant, DiscretePlant, GustParams};
pub use simulate::{simulate, simulate_with, SimulationRecord};
