//! Monte Carlo orchestration, reports, CSV and plots.

pub mod plot;
pub mod report;
pub mod sim;
pub mod sweep;

pub use report::{Class, Metric, RateReport, Record};
pub use sim::{effective_sic, run_scheme, Depth, Simulation};
pub use sweep::{run_sweep, write_outputs};
