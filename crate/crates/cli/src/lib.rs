//! Seeded experiments over random coefficients and the `weyl-lab` command line.

pub mod app;
pub mod config;
pub mod error;
pub mod fit;
pub mod scan;
pub mod sweep;
pub mod table;

pub use app::{cli_main, run};
pub use config::ExperimentConfig;
pub use error::AppError;
pub use sweep::RunRecord;
