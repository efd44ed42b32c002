//! Scheme × velocity sweeps and their output files.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

use log::info;

use crate::config::{RunSpec, SystemConfig};
use crate::error::Result;
use crate::frames::Scheme;
use crate::harness::plot::emit_plots;
use crate::harness::report::{write_rates_csv, write_summary_csv, RateReport};
use crate::harness::sim::{run_scheme, Depth};

pub const RATES_FILE: &str = "rates.csv";
pub const SUMMARY_FILE: &str = "frame_average.csv";

/// Every (scheme, velocity) pair of `spec`, in the order given.
pub fn run_sweep(cfg: &SystemConfig, spec: &RunSpec, depth: Depth) -> Result<Vec<RateReport>> {
    spec.validate()?;
    cfg.validate()?;
    let schemes = spec
        .schemes
        .iter()
        .map(|s| s.parse::<Scheme>())
        .collect::<Result<Vec<_>>>()?;
    let mut reports = Vec::with_capacity(schemes.len() * spec.velocities_kmh.len());
    for &scheme in &schemes {
        for &v in &spec.velocities_kmh {
            info!("{scheme} at {v} km/h, {} trials", spec.trials);
            reports.push(run_scheme(cfg, scheme, v, spec.trials, spec.seed, depth)?);
        }
    }
    Ok(reports)
}

/// Write CSVs (and figures if requested) into `spec.out`.
pub fn write_outputs(reports: &[RateReport], spec: &RunSpec) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&spec.out)?;
    let rates = spec.out.join(RATES_FILE);
    write_rates_csv(reports, BufWriter::new(File::create(&rates)?))?;
    let summary = spec.out.join(SUMMARY_FILE);
    write_summary_csv(reports, BufWriter::new(File::create(&summary)?))?;
    let mut files = vec![rates, summary];
    if spec.emit_plots {
        files.extend(emit_plots(reports, &spec.out)?);
    }
    Ok(files)
}
