//! System and run configuration.
//!
//! A config file is TOML with two optional tables, `[system]` and `[run]`.
//! Missing keys fall back to the reference parameter set (32 antennas,
//! 8 users, 96 subcarriers split 64/32, 4 taps, 5 GHz, 28-symbol frames).

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{path_loss, ChannelStats, FadingParams, OfdmOperator, SubcarrierPlan};
use crate::error::{invalid, Result};
use crate::math::{db_to_linear, dbm_to_watts};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub antennas: usize,
    pub users: usize,
    pub subcarriers: usize,
    pub dl_subcarriers: usize,
    pub ul_subcarriers: usize,
    pub taps: usize,
    pub dl_power_dbm: f64,
    pub ul_power_dbm: f64,
    /// Noise power per subcarrier.
    pub noise_dbm: f64,
    pub carrier_frequency_hz: f64,
    pub subcarrier_spacing_hz: f64,
    pub symbol_duration_s: f64,
    pub frame_length: usize,
    /// Fraction of a symbol lost at every TDD direction switch.
    pub switching_symbols: f64,
    pub modulation: String,
    pub sic_bs_db: f64,
    pub sic_mt_db: f64,
    /// How much weaker SIC is for in-band full duplex than for MDD.
    pub ibfd_sic_penalty_db: f64,
    pub min_distance_m: f64,
    pub max_distance_m: f64,
    pub path_loss_exponent: f64,
    /// Fixed user distances; drawn uniformly from the distance range if absent.
    pub distances_m: Option<Vec<f64>>,
    pub pilot_symbols: usize,
    pub ul_data_symbols: usize,
    pub dl_start: usize,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            antennas: 32,
            users: 8,
            subcarriers: 96,
            dl_subcarriers: 64,
            ul_subcarriers: 32,
            taps: 4,
            dl_power_dbm: 30.0,
            ul_power_dbm: 20.0,
            noise_dbm: -94.0,
            carrier_frequency_hz: 5e9,
            subcarrier_spacing_hz: 15e3,
            symbol_duration_s: 66.67e-6,
            frame_length: 28,
            switching_symbols: 0.5,
            modulation: "16qam".to_string(),
            sic_bs_db: 130.0,
            sic_mt_db: 120.0,
            ibfd_sic_penalty_db: 30.0,
            min_distance_m: 50.0,
            max_distance_m: 100.0,
            path_loss_exponent: 3.8,
            distances_m: None,
            pilot_symbols: 7,
            ul_data_symbols: 7,
            dl_start: 1,
        }
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive and finite, got {v}")))
    }
}

fn at_least_one(field: &str, v: usize) -> Result<()> {
    if v >= 1 {
        Ok(())
    } else {
        Err(invalid(field, "must be at least 1"))
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        at_least_one("antennas", self.antennas)?;
        at_least_one("users", self.users)?;
        at_least_one("subcarriers", self.subcarriers)?;
        at_least_one("taps", self.taps)?;
        at_least_one("frame_length", self.frame_length)?;
        at_least_one("pilot_symbols", self.pilot_symbols)?;
        if self.dl_subcarriers + self.ul_subcarriers != self.subcarriers {
            return Err(invalid(
                "dl_subcarriers",
                format!(
                    "dl_subcarriers ({}) + ul_subcarriers ({}) must equal subcarriers ({})",
                    self.dl_subcarriers, self.ul_subcarriers, self.subcarriers
                ),
            ));
        }
        if self.dl_subcarriers == 0 || self.ul_subcarriers == 0 {
            return Err(invalid(
                "dl_subcarriers",
                "both directions need at least one subcarrier",
            ));
        }
        if self.taps > self.subcarriers {
            return Err(invalid("taps", "cannot exceed the number of subcarriers"));
        }
        if self.users > self.antennas {
            return Err(invalid(
                "users",
                "zero-forcing needs at least as many antennas as users",
            ));
        }
        positive("carrier_frequency_hz", self.carrier_frequency_hz)?;
        positive("subcarrier_spacing_hz", self.subcarrier_spacing_hz)?;
        positive("symbol_duration_s", self.symbol_duration_s)?;
        for (f, v) in [
            ("dl_power_dbm", self.dl_power_dbm),
            ("ul_power_dbm", self.ul_power_dbm),
            ("noise_dbm", self.noise_dbm),
        ] {
            if !v.is_finite() {
                return Err(invalid(f, "must be finite"));
            }
        }
        if !(0.0..=1.0).contains(&self.switching_symbols) {
            return Err(invalid("switching_symbols", "must lie in [0, 1]"));
        }
        if !self.modulation.eq_ignore_ascii_case("16qam") {
            return Err(invalid(
                "modulation",
                format!("only 16qam is supported, got {}", self.modulation),
            ));
        }
        for (f, v) in [
            ("sic_bs_db", self.sic_bs_db),
            ("sic_mt_db", self.sic_mt_db),
            ("ibfd_sic_penalty_db", self.ibfd_sic_penalty_db),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invalid(f, "must be a finite, non-negative dB value"));
            }
        }
        if self.ibfd_sic_penalty_db > self.sic_bs_db.min(self.sic_mt_db) {
            return Err(invalid("ibfd_sic_penalty_db", "cannot exceed the SIC it degrades"));
        }
        positive("min_distance_m", self.min_distance_m)?;
        if !(self.max_distance_m >= self.min_distance_m) || !self.max_distance_m.is_finite() {
            return Err(invalid("max_distance_m", "must be finite and at least min_distance_m"));
        }
        positive("path_loss_exponent", self.path_loss_exponent)?;
        if let Some(d) = &self.distances_m {
            if d.len() != self.users {
                return Err(invalid(
                    "distances_m",
                    format!("expected {} entries, got {}", self.users, d.len()),
                ));
            }
            for &x in d {
                positive("distances_m", x)?;
            }
        }
        if self.dl_start < 1 || self.dl_start > self.pilot_symbols {
            return Err(invalid("dl_start", "must lie in 1..=pilot_symbols"));
        }
        Ok(())
    }

    pub fn dl_power_w(&self) -> f64 {
        dbm_to_watts(self.dl_power_dbm)
    }

    pub fn ul_power_w(&self) -> f64 {
        dbm_to_watts(self.ul_power_dbm)
    }

    pub fn noise_w(&self) -> f64 {
        dbm_to_watts(self.noise_dbm)
    }

    /// Residual SI ratio at the base station.
    pub fn xi_bs(&self) -> f64 {
        db_to_linear(-self.sic_bs_db)
    }

    /// Residual SI ratio at the terminals.
    pub fn xi_mt(&self) -> f64 {
        db_to_linear(-self.sic_mt_db)
    }

    pub fn plan(&self) -> Result<SubcarrierPlan> {
        SubcarrierPlan::interleaved(self.subcarriers, self.ul_subcarriers)
    }

    pub fn ofdm(&self) -> Result<OfdmOperator> {
        OfdmOperator::new(self.subcarriers, self.taps)
    }

    pub fn fading(&self, velocity_kmh: f64) -> Result<FadingParams> {
        FadingParams::from_kmh(self.carrier_frequency_hz, self.symbol_duration_s, velocity_kmh)
    }

    /// User distances: the fixed list if configured, otherwise a uniform draw
    /// from a stream of `seed` reserved for the user drop.
    pub fn distances(&self, seed: u64) -> Vec<f64> {
        if let Some(d) = &self.distances_m {
            return d.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(DROP_STREAM);
        (0..self.users)
            .map(|_| {
                if self.max_distance_m > self.min_distance_m {
                    rng.gen_range(self.min_distance_m..self.max_distance_m)
                } else {
                    self.min_distance_m
                }
            })
            .collect()
    }

    pub fn stats(&self, seed: u64) -> Result<ChannelStats> {
        let betas = path_loss(&self.distances(seed), self.path_loss_exponent);
        ChannelStats::new(betas, self.taps, self.subcarriers)
    }
}

/// RNG stream reserved for the user drop; trial streams use the low range.
pub const DROP_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSpec {
    pub seed: u64,
    pub trials: usize,
    pub schemes: Vec<String>,
    pub velocities_kmh: Vec<f64>,
    pub out: PathBuf,
    pub emit_plots: bool,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            seed: 1,
            trials: 200,
            schemes: vec!["MDD-1(7)".to_string(), "TDD-1".to_string()],
            velocities_kmh: (1..=15).map(|k| 20.0 * k as f64).collect(),
            out: PathBuf::from("out"),
            emit_plots: false,
        }
    }
}

impl RunSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(invalid("trials", "must be at least 1"));
        }
        if self.schemes.is_empty() {
            return Err(invalid("schemes", "need at least one scheme"));
        }
        if self.velocities_kmh.is_empty() {
            return Err(invalid("velocities_kmh", "need at least one velocity"));
        }
        for &v in &self.velocities_kmh {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(
                    "velocities_kmh",
                    format!("velocities must be positive, got {v}"),
                ));
            }
        }
        for s in &self.schemes {
            s.parse::<crate::frames::Scheme>()?;
        }
        Ok(())
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    system: SystemConfig,
    run: RunSpec,
}

/// Parse a config from TOML text. Both tables are optional.
pub fn parse_config(text: &str) -> Result<(SystemConfig, RunSpec)> {
    let file: ConfigFile = toml::from_str(text)?;
    file.system.validate()?;
    file.run.validate()?;
    Ok((file.system, file.run))
}

pub fn load_config(path: impl AsRef<Path>) -> Result<(SystemConfig, RunSpec)> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_reference_defaults() {
        let (sys, run) = parse_config("").unwrap();
        assert_eq!(sys, SystemConfig::default());
        assert_eq!(run, RunSpec::default());
        assert_eq!((sys.antennas, sys.users, sys.subcarriers), (32, 8, 96));
        assert_eq!((sys.dl_subcarriers, sys.ul_subcarriers, sys.taps), (64, 32, 4));
        assert_eq!(sys.frame_length, 28);
        assert!((sys.xi_bs() - 1e-13).abs() < 1e-25);
        assert!((sys.xi_mt() - 1e-12).abs() < 1e-24);
    }

    #[test]
    fn frame_override() {
        let (sys, _) = parse_config("[system]\nframe_length = 56\n").unwrap();
        assert_eq!(sys.frame_length, 56);
    }

    #[test]
    fn partition_mismatch_names_field() {
        let err = parse_config("[system]\ndl_subcarriers = 60\n").unwrap_err();
        assert!(err.to_string().contains("dl_subcarriers"), "{err}");
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(parse_config("[system]\nantenas = 3\n").is_err());
    }

    #[test]
    fn bad_run_values() {
        assert!(parse_config("[run]\ntrials = 0\n").is_err());
        assert!(parse_config("[run]\nvelocities_kmh = [-3.0]\n").is_err());
        assert!(parse_config("[run]\nschemes = [\"FDD\"]\n").is_err());
    }

    #[test]
    fn distances_are_seeded_and_in_range() {
        let sys = SystemConfig::default();
        let a = sys.distances(9);
        assert_eq!(a, sys.distances(9));
        assert_ne!(a, sys.distances(10));
        assert!(a.iter().all(|d| (50.0..100.0).contains(d)));
    }
}
