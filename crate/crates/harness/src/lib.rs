//! Experiment harness: configuration, sweeps over task size and element
//! count, the brute-force oracle, CSV output and SVG figures.

pub mod config;
pub mod error;
pub mod oracle;
pub mod plot;
pub mod results;
pub mod schemes;
pub mod sweep;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use results::{ResultRow, SummaryRow};
pub use schemes::Scheme;
pub use sweep::{Axis, PolicyStore};
