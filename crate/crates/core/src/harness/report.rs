//! Result records and CSV output.

use std::fmt;
use std::io::Write;

use serde::Serialize;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Class {
    Dl,
    Ul,
    All,
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Dl => "DL",
            Self::Ul => "UL",
            Self::All => "all",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    /// Monte Carlo lower bound.
    RateMc,
    RateClosed,
    Nmse,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::RateMc => "rate_mc_lb",
            Self::RateClosed => "rate_closed",
            Self::Nmse => "nmse",
        })
    }
}

/// One value: per-user rates are summed over the class's subcarriers and
/// divided by the total subcarrier count. `user = None` is the pooled NMSE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    /// 0-based user index.
    pub user: Option<usize>,
    /// 1-based symbol index.
    pub symbol: usize,
    pub class: Class,
    pub metric: Metric,
    pub value: f64,
}

impl Record {
    pub fn new(user: Option<usize>, symbol: usize, class: Class, metric: Metric, value: f64) -> Self {
        Self {
            user,
            symbol,
            class,
            metric,
            value,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub scheme: String,
    pub velocity_kmh: f64,
    pub frame_length: usize,
    pub trials: usize,
    pub seed: u64,
    pub users: usize,
    pub records: Vec<Record>,
    /// Weighted frame-average rate from the closed forms, bit/s/Hz per subcarrier.
    pub frame_average_closed: f64,
    /// Same from the Monte Carlo bounds, when they were computed.
    pub frame_average_mc: Option<f64>,
    pub discarded_zf: u64,
}

impl RateReport {
    fn find(&self, user: Option<usize>, symbol: usize, class: Class, metric: Metric) -> Option<f64> {
        self.records
            .iter()
            .find(|r| r.user == user && r.symbol == symbol && r.class == class && r.metric == metric)
            .map(|r| r.value)
    }

    pub fn user_value(&self, user: usize, symbol: usize, class: Class, metric: Metric) -> Option<f64> {
        self.find(Some(user), symbol, class, metric)
    }

    /// Sum over users of one direction's rate at a symbol.
    pub fn class_rate(&self, symbol: usize, class: Class, metric: Metric) -> Option<f64> {
        let vals: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.user.is_some() && r.symbol == symbol && r.class == class && r.metric == metric)
            .map(|r| r.value)
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum())
    }

    /// Sum-rate over users and both directions at a symbol.
    pub fn symbol_rate(&self, symbol: usize, metric: Metric) -> Option<f64> {
        match (
            self.class_rate(symbol, Class::Dl, metric),
            self.class_rate(symbol, Class::Ul, metric),
        ) {
            (None, None) => None,
            (a, b) => Some(a.unwrap_or(0.0) + b.unwrap_or(0.0)),
        }
    }

    /// Pooled NMSE of the predicted taps at a symbol.
    pub fn nmse(&self, symbol: usize) -> Option<f64> {
        self.find(None, symbol, Class::All, Metric::Nmse)
    }

    pub fn frame_average(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::RateClosed => Some(self.frame_average_closed),
            Metric::RateMc => self.frame_average_mc,
            Metric::Nmse => None,
        }
    }
}

#[derive(Serialize)]
struct Row<'a> {
    scheme: &'a str,
    velocity_kmh: f64,
    user: String,
    symbol_index: usize,
    subcarrier_class: String,
    metric: String,
    value: f64,
    trials: usize,
    seed: u64,
}

/// Per-symbol records of every report, one row each.
pub fn write_rates_csv<W: Write>(reports: &[RateReport], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for rep in reports {
        for r in &rep.records {
            out.serialize(Row {
                scheme: &rep.scheme,
                velocity_kmh: rep.velocity_kmh,
                user: r.user.map_or_else(|| "all".to_string(), |u| (u + 1).to_string()),
                symbol_index: r.symbol,
                subcarrier_class: r.class.to_string(),
                metric: r.metric.to_string(),
                value: r.value,
                trials: rep.trials,
                seed: rep.seed,
            })?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    scheme: &'a str,
    velocity_kmh: f64,
    frame_length: usize,
    metric: String,
    value: f64,
    trials: usize,
    seed: u64,
    discarded_zf: u64,
}

/// Frame-average rate per (scheme, velocity).
pub fn write_summary_csv<W: Write>(reports: &[RateReport], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for rep in reports {
        for metric in [Metric::RateMc, Metric::RateClosed] {
            if let Some(value) = rep.frame_average(metric) {
                out.serialize(SummaryRow {
                    scheme: &rep.scheme,
                    velocity_kmh: rep.velocity_kmh,
                    frame_length: rep.frame_length,
                    metric: metric.to_string(),
                    value,
                    trials: rep.trials,
                    seed: rep.seed,
                    discarded_zf: rep.discarded_zf,
                })?;
            }
        }
    }
    out.flush()?;
    Ok(())
}
