//! Link-level simulation of multicarrier-division duplex (MDD), TDD and
//! in-band full duplex (IBFD) in multiuser massive-MIMO OFDM over aging
//! channels.
//!
//! The crate is organised bottom-up:
//!
//! - [`channel`]: Jakes/AR(1) tap evolution, OFDM mapping, subcarrier plans
//! - [`frames`]: per-symbol schedules for every duplexing scheme
//! - [`pilot`]: frequency-domain pilot sequences and MMSE estimation
//! - [`prediction`]: Wiener and decision-directed Wiener predictors
//! - [`phylink`]: ZF/MRC rates, self-interference powers, frame averages
//! - [`harness`]: configuration, Monte Carlo orchestration, CSV and plots

pub mod channel;
pub mod config;
pub mod error;
pub mod frames;
pub mod harness;
pub mod math;
pub mod phylink;
pub mod pilot;
pub mod prediction;

pub use config::{load_config, RunSpec, SystemConfig};
pub use error::{Error, Result};
pub use math::C64;
