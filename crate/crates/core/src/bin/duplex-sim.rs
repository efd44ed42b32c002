//! Command-line front end: runs a scheme × velocity sweep and writes CSV/SVG.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use duplex_sim::frames::{build_schedule, FrameParams, Scheme};
use duplex_sim::harness::{run_sweep, write_outputs, Depth};
use duplex_sim::{load_config, Error, Result, RunSpec, SystemConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    /// Closed-form rates only.
    ClosedForm,
    /// Closed form plus simulated prediction NMSE.
    Predictors,
    /// Everything, including Monte Carlo rate bounds.
    Full,
}

#[derive(Debug, Parser)]
#[command(
    name = "duplex-sim",
    version,
    about = "Link-level duplexing simulator for multiuser massive MIMO OFDM"
)]
struct Cli {
    /// TOML file with optional [system] and [run] tables.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated schemes, e.g. "MDD-1(7),TDD-1,IBFD-1".
    #[arg(long, value_delimiter = ',')]
    scheme: Option<Vec<String>>,
    /// Comma-separated velocities in km/h, or a range "start:stop:step".
    #[arg(long)]
    velocities: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write SVG figures.
    #[arg(long)]
    emit_plots: bool,
    #[arg(long, value_enum, default_value = "full")]
    mode: Mode,
    /// Print each scheme's frame layout and exit.
    #[arg(long)]
    print_schedule: bool,
}

fn bad_velocities(reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field: "velocities".into(),
        reason: reason.into(),
    }
}

fn parse_velocities(s: &str) -> Result<Vec<f64>> {
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| bad_velocities(format!("`{t}` is not a number")))
    };
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad_velocities("a range is start:stop:step"));
        }
        let (a, b, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0) || b < a {
            return Err(bad_velocities("a range needs step > 0 and stop >= start"));
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        Ok((0..=n).map(|k| a + k as f64 * step).collect())
    } else {
        s.split(',').filter(|t| !t.trim().is_empty()).map(num).collect()
    }
}

fn resolve(cli: &Cli) -> Result<(SystemConfig, RunSpec)> {
    let (cfg, mut spec) = match &cli.config {
        Some(p) => load_config(p)?,
        None => (SystemConfig::default(), RunSpec::default()),
    };
    if let Some(s) = &cli.scheme {
        spec.schemes = s.iter().map(|x| x.trim().to_string()).collect();
    }
    if let Some(v) = &cli.velocities {
        spec.velocities_kmh = parse_velocities(v)?;
    }
    if let Some(t) = cli.trials {
        spec.trials = t;
    }
    if let Some(s) = cli.seed {
        spec.seed = s;
    }
    if let Some(o) = &cli.out {
        spec.out = o.clone();
    }
    spec.emit_plots |= cli.emit_plots;
    cfg.validate()?;
    spec.validate()?;
    Ok((cfg, spec))
}

fn run(cli: &Cli) -> Result<()> {
    let (cfg, spec) = resolve(cli)?;
    if cli.print_schedule {
        for s in &spec.schemes {
            let scheme: Scheme = s.parse()?;
            let sched = build_schedule(scheme, cfg.frame_length, &FrameParams::from(&cfg))?;
            println!("{sched}");
        }
        return Ok(());
    }
    let depth = match cli.mode {
        Mode::ClosedForm => Depth::ClosedForm,
        Mode::Predictors => Depth::Predictors,
        Mode::Full => Depth::Full,
    };
    let reports = run_sweep(&cfg, &spec, depth)?;
    for r in &reports {
        match r.frame_average_mc {
            Some(mc) => println!(
                "{:<12} {:>6} km/h  closed {:.4}  mc {:.4} bit/s/Hz",
                r.scheme, r.velocity_kmh, r.frame_average_closed, mc
            ),
            None => println!(
                "{:<12} {:>6} km/h  closed {:.4} bit/s/Hz",
                r.scheme, r.velocity_kmh, r.frame_average_closed
            ),
        }
    }
    for f in write_outputs(&reports, &spec)? {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("duplex-sim: {e}");
            ExitCode::from(1)
        }
    }
}
