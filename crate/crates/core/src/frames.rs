//! Per-symbol frame schedules.
//!
//! A schedule lists, for every OFDM symbol of a frame, what each link
//! direction does, which subcarriers it occupies, how much of the symbol is
//! usable after TDD switching, and which predictor supplies the CSI. The
//! simulator and the rate bookkeeping consume nothing else, so every frame
//! variant is just a different `build_schedule` branch.
//!
//! Symbol indices are 1-based throughout, matching the usual frame diagrams.

use std::fmt;
use std::str::FromStr;

use crate::channel::Band;
use crate::error::{invalid, Error, Result};

/// Duplexing family of a scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Duplex {
    Tdd,
    Mdd,
    Ibfd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Contiguous pilots then downlink, Wiener prediction over the pilots.
    Tdd1,
    /// TDD-1 layout using the last pilot's estimate without prediction.
    Tdd1Hold,
    /// TDD-1 with the pilots spread evenly over the frame.
    Tdd1Es,
    /// TDD-1 with the pilots split into two groups.
    Tdd1Tg,
    /// Pilots on the uplink subcarriers every symbol; `order` defaults to the
    /// pilot count.
    Mdd1 { order: Option<usize> },
    /// MDD-1 with sparse pilots; pilot-free symbols carry downlink everywhere.
    Mdd1Pa,
    /// Pilots, uplink data, downlink; decision-directed prediction.
    Tdd2,
    /// TDD-2 with two pilot/uplink groups.
    Tdd2Tg,
    /// Pilot phase then simultaneous uplink and downlink data.
    Mdd2,
    /// MDD-1 with the downlink on every subcarrier.
    Ibfd1 { order: Option<usize> },
}

impl Scheme {
    pub fn duplex(&self) -> Duplex {
        match self {
            Self::Tdd1 | Self::Tdd1Hold | Self::Tdd1Es | Self::Tdd1Tg | Self::Tdd2 | Self::Tdd2Tg => Duplex::Tdd,
            Self::Mdd1 { .. } | Self::Mdd1Pa | Self::Mdd2 => Duplex::Mdd,
            Self::Ibfd1 { .. } => Duplex::Ibfd,
        }
    }

    /// Schemes that carry uplink data and therefore use decision-directed prediction.
    pub fn has_uplink_data(&self) -> bool {
        matches!(self, Self::Tdd2 | Self::Tdd2Tg | Self::Mdd2)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Tdd1 => f.write_str("TDD-1"),
            Self::Tdd1Hold => f.write_str("TDD-1-NOP"),
            Self::Tdd1Es => f.write_str("TDD-1-ES"),
            Self::Tdd1Tg => f.write_str("TDD-1-TG"),
            Self::Mdd1 { order: None } => f.write_str("MDD-1"),
            Self::Mdd1 { order: Some(z) } => write!(f, "MDD-1({z})"),
            Self::Mdd1Pa => f.write_str("MDD-1-PA"),
            Self::Tdd2 => f.write_str("TDD-2"),
            Self::Tdd2Tg => f.write_str("TDD-2-TG"),
            Self::Mdd2 => f.write_str("MDD-2"),
            Self::Ibfd1 { order: None } => f.write_str("IBFD-1"),
            Self::Ibfd1 { order: Some(z) } => write!(f, "IBFD-1({z})"),
        }
    }
}

fn parse_order(rest: &str, original: &str) -> Result<Option<usize>> {
    if rest.is_empty() {
        return Ok(None);
    }
    let inner = rest
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| Error::UnknownScheme(original.to_string()))?;
    let z: usize = inner
        .trim()
        .parse()
        .map_err(|_| Error::UnknownScheme(original.to_string()))?;
    if z == 0 {
        return Err(invalid(
            "scheme",
            format!("{original}: prediction order must be at least 1"),
        ));
    }
    Ok(Some(z))
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase().replace('_', "-");
        let fixed = match up.as_str() {
            "TDD-1" => Some(Self::Tdd1),
            "TDD-1-NOP" => Some(Self::Tdd1Hold),
            "TDD-1-ES" => Some(Self::Tdd1Es),
            "TDD-1-TG" => Some(Self::Tdd1Tg),
            "MDD-1-PA" => Some(Self::Mdd1Pa),
            "TDD-2" => Some(Self::Tdd2),
            "TDD-2-TG" => Some(Self::Tdd2Tg),
            "MDD-2" => Some(Self::Mdd2),
            _ => None,
        };
        if let Some(x) = fixed {
            return Ok(x);
        }
        if let Some(rest) = up.strip_prefix("MDD-1") {
            return Ok(Self::Mdd1 {
                order: parse_order(rest, s)?,
            });
        }
        if let Some(rest) = up.strip_prefix("IBFD-1") {
            return Ok(Self::Ibfd1 {
                order: parse_order(rest, s)?,
            });
        }
        Err(Error::UnknownScheme(s.to_string()))
    }
}

/// Frame parameters shared by the builders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameParams {
    /// Pilot symbols per frame (also the maximum prediction order).
    pub pilot_symbols: usize,
    /// Uplink data symbols of TDD Type II.
    pub ul_data_symbols: usize,
    /// Number of leading MDD-2 pilot symbols without downlink data.
    pub dl_start: usize,
    /// Fraction of a symbol lost per TDD direction switch.
    pub switching: f64,
}

impl Default for FrameParams {
    fn default() -> Self {
        Self {
            pilot_symbols: 7,
            ul_data_symbols: 7,
            dl_start: 1,
            switching: 0.5,
        }
    }
}

impl From<&crate::config::SystemConfig> for FrameParams {
    fn from(c: &crate::config::SystemConfig) -> Self {
        Self {
            pilot_symbols: c.pilot_symbols,
            ul_data_symbols: c.ul_data_symbols,
            dl_start: c.dl_start,
            switching: c.switching_symbols,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UlActivity {
    Off,
    Pilot(Band),
    Data(Band),
}

impl UlActivity {
    pub fn band(&self) -> Option<Band> {
        match self {
            Self::Off => None,
            Self::Pilot(b) | Self::Data(b) => Some(*b),
        }
    }

    pub fn is_active(&self) -> bool {
        !matches!(self, Self::Off)
    }
}

/// Where the CSI for a symbol's data comes from. Observation lists are
/// symbol indices, most recent first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Predictor {
    None,
    /// Reuse the MMSE estimate from one pilot symbol unchanged.
    Hold {
        pilot: usize,
    },
    /// Pilot-driven Wiener prediction of the time-domain taps.
    Wp {
        observations: Vec<usize>,
    },
    /// Decision-directed Wiener prediction per uplink subcarrier.
    DdWp {
        observations: Vec<usize>,
    },
}

impl Predictor {
    pub fn order(&self) -> usize {
        match self {
            Self::None => 0,
            Self::Hold { .. } => 1,
            Self::Wp { observations } | Self::DdWp { observations } => observations.len(),
        }
    }

    pub fn observations(&self) -> Vec<usize> {
        match self {
            Self::None => vec![],
            Self::Hold { pilot } => vec![*pilot],
            Self::Wp { observations } | Self::DdWp { observations } => observations.clone(),
        }
    }
}

impl fmt::Display for Predictor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |o: &[usize]| o.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        match self {
            Self::None => f.write_str("-"),
            Self::Hold { pilot } => write!(f, "hold({pilot})"),
            Self::Wp { observations } => write!(f, "WP{}[{}]", observations.len(), list(observations)),
            Self::DdWp { observations } => write!(f, "DDWP{}[{}]", observations.len(), list(observations)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolActivity {
    pub index: usize,
    pub dl: Option<Band>,
    pub ul: UlActivity,
    pub weight: f64,
    pub predictor: Predictor,
}

impl SymbolActivity {
    pub fn carries_data(&self) -> bool {
        self.dl.is_some() || matches!(self.ul, UlActivity::Data(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSchedule {
    pub scheme: Scheme,
    pub frame_length: usize,
    pub params: FrameParams,
    pub symbols: Vec<SymbolActivity>,
}

impl FrameSchedule {
    /// Activity at 1-based symbol `i`.
    pub fn symbol(&self, i: usize) -> &SymbolActivity {
        &self.symbols[i - 1]
    }

    pub fn duplex(&self) -> Duplex {
        self.scheme.duplex()
    }

    pub fn pilot_positions(&self) -> Vec<usize> {
        self.symbols
            .iter()
            .filter(|s| matches!(s.ul, UlActivity::Pilot(_)))
            .map(|s| s.index)
            .collect()
    }

    pub fn dl_weight(&self) -> f64 {
        self.symbols.iter().filter(|s| s.dl.is_some()).map(|s| s.weight).sum()
    }

    pub fn ul_data_weight(&self) -> f64 {
        self.symbols
            .iter()
            .filter(|s| matches!(s.ul, UlActivity::Data(_)))
            .map(|s| s.weight)
            .sum()
    }

    /// Total symbol time lost to switching.
    pub fn switching_loss(&self) -> f64 {
        self.symbols
            .iter()
            .filter(|s| s.carries_data())
            .map(|s| 1.0 - s.weight)
            .sum()
    }

    /// Human-readable table, one row per symbol.
    pub fn table(&self) -> String {
        let mut out = format!("{} (T = {})\n", self.scheme, self.frame_length);
        out.push_str("  i  DL    UL           weight  predictor\n");
        for s in &self.symbols {
            let dl = s.dl.map(|b| b.to_string()).unwrap_or_else(|| "-".into());
            let ul = match s.ul {
                UlActivity::Off => "-".to_string(),
                UlActivity::Pilot(b) => format!("pilot/{b}"),
                UlActivity::Data(b) => format!("data/{b}"),
            };
            out.push_str(&format!(
                "{:3}  {:<4}  {:<11}  {:>6}  {}\n",
                s.index, dl, ul, s.weight, s.predictor
            ));
        }
        out
    }
}

impl fmt::Display for FrameSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.table())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Pilot,
    UlData,
    Dl,
}

impl Slot {
    fn uplink(self) -> bool {
        !matches!(self, Slot::Dl)
    }
}

/// Switching weights for a TDD slot pattern. Each direction change costs
/// `switching` of a symbol, charged to the data symbol before the switch, or
/// to the one after it when the earlier symbol is a pilot. The pattern is
/// cyclic: the last symbol precedes the next frame's first.
fn tdd_weights(slots: &[Slot], switching: f64) -> Vec<f64> {
    let t = slots.len();
    let mut charges = vec![0usize; t];
    for i in 0..t {
        let j = (i + 1) % t;
        if slots[i].uplink() != slots[j].uplink() {
            if slots[i] == Slot::Pilot {
                charges[j] += 1;
            } else {
                charges[i] += 1;
            }
        }
    }
    charges.iter().map(|&c| (1.0 - switching * c as f64).max(0.0)).collect()
}

/// `count` pilot positions spread over `1..=t`: `1` then `⌈k(t−1)/(count−1)⌉`.
pub fn even_positions(count: usize, t: usize) -> Vec<usize> {
    if count <= 1 {
        return vec![1; count];
    }
    (0..count)
        .map(|k| if k == 0 { 1 } else { (k * (t - 1)).div_ceil(count - 1) })
        .collect()
}

fn recent(candidates: &[usize], before: usize, cap: usize) -> Vec<usize> {
    candidates
        .iter()
        .rev()
        .filter(|&&p| p < before)
        .take(cap)
        .cloned()
        .collect()
}

fn range_err(scheme: Scheme, reason: String) -> Error {
    Error::Incompatible {
        scheme: scheme.to_string(),
        reason,
    }
}

/// Build the schedule of `scheme` for a frame of `t` symbols.
pub fn build_schedule(scheme: Scheme, t: usize, params: &FrameParams) -> Result<FrameSchedule> {
    let tp = params.pilot_symbols;
    if t == 0 {
        return Err(invalid("frame_length", "must be at least 1"));
    }
    if tp == 0 {
        return Err(invalid("pilot_symbols", "must be at least 1"));
    }
    if !(0.0..=1.0).contains(&params.switching) {
        return Err(invalid("switching_symbols", "must lie in [0, 1]"));
    }
    let symbols = match scheme {
        Scheme::Tdd1 | Scheme::Tdd1Hold | Scheme::Tdd1Es | Scheme::Tdd1Tg => {
            let pilots = match scheme {
                Scheme::Tdd1Es => {
                    if tp >= t {
                        return Err(range_err(scheme, format!("{tp} pilots leave no data in {t} symbols")));
                    }
                    even_positions(tp, t)
                }
                Scheme::Tdd1Tg => two_groups(scheme, tp, t, 0)?.0,
                _ => {
                    if tp + 1 > t {
                        return Err(range_err(
                            scheme,
                            format!("needs pilot_symbols + 1 <= T, got {tp} and {t}"),
                        ));
                    }
                    (1..=tp).collect()
                }
            };
            let slots: Vec<Slot> = (1..=t)
                .map(|i| if pilots.contains(&i) { Slot::Pilot } else { Slot::Dl })
                .collect();
            let w = tdd_weights(&slots, params.switching);
            (1..=t)
                .map(|i| {
                    if slots[i - 1] == Slot::Pilot {
                        return pilot_symbol(i, Band::Full, None);
                    }
                    let predictor = if scheme == Scheme::Tdd1Hold {
                        Predictor::Hold {
                            pilot: *pilots.iter().rev().find(|&&p| p < i).unwrap_or(&pilots[0]),
                        }
                    } else {
                        Predictor::Wp {
                            observations: recent(&pilots, i, tp),
                        }
                    };
                    SymbolActivity {
                        index: i,
                        dl: Some(Band::Full),
                        ul: UlActivity::Off,
                        weight: w[i - 1],
                        predictor,
                    }
                })
                .collect()
        }
        Scheme::Mdd1 { order } | Scheme::Ibfd1 { order } => {
            let z = order.unwrap_or(tp);
            if z == 0 || z >= t {
                return Err(range_err(scheme, format!("order {z} needs 1 <= z < T = {t}")));
            }
            let band = if matches!(scheme, Scheme::Ibfd1 { .. }) {
                Band::Full
            } else {
                Band::Dl
            };
            let all: Vec<usize> = (1..=t).collect();
            (1..=t)
                .map(|i| {
                    if i <= z {
                        pilot_symbol(i, Band::Ul, None)
                    } else {
                        SymbolActivity {
                            index: i,
                            dl: Some(band),
                            ul: UlActivity::Pilot(Band::Ul),
                            weight: 1.0,
                            predictor: Predictor::Wp {
                                observations: recent(&all, i, z),
                            },
                        }
                    }
                })
                .collect()
        }
        Scheme::Mdd1Pa => {
            if tp >= t {
                return Err(range_err(scheme, format!("{tp} pilots leave no data in {t} symbols")));
            }
            let pilots = even_positions(tp, t);
            (1..=t)
                .map(|i| {
                    let is_pilot = pilots.contains(&i);
                    if i == 1 {
                        return pilot_symbol(1, Band::Ul, None);
                    }
                    SymbolActivity {
                        index: i,
                        dl: Some(if is_pilot { Band::Dl } else { Band::Full }),
                        ul: if is_pilot {
                            UlActivity::Pilot(Band::Ul)
                        } else {
                            UlActivity::Off
                        },
                        weight: 1.0,
                        predictor: Predictor::Wp {
                            observations: recent(&pilots, i, 1),
                        },
                    }
                })
                .collect()
        }
        Scheme::Tdd2 | Scheme::Tdd2Tg => {
            let tu = params.ul_data_symbols;
            let (pilots, ul_data) = if scheme == Scheme::Tdd2 {
                if tp + tu + 2 > t {
                    return Err(range_err(
                        scheme,
                        format!("needs pilot_symbols + ul_data_symbols + 2 <= T, got {tp} + {tu} and {t}"),
                    ));
                }
                ((1..=tp).collect::<Vec<_>>(), (tp + 1..=tp + tu + 1).collect::<Vec<_>>())
            } else {
                two_groups(scheme, tp, t, tu + 1)?
            };
            let slots: Vec<Slot> = (1..=t)
                .map(|i| {
                    if pilots.contains(&i) {
                        Slot::Pilot
                    } else if ul_data.contains(&i) {
                        Slot::UlData
                    } else {
                        Slot::Dl
                    }
                })
                .collect();
            let w = tdd_weights(&slots, params.switching);
            let ul_active: Vec<usize> = (1..=t).filter(|&i| slots[i - 1].uplink()).collect();
            (1..=t)
                .map(|i| match slots[i - 1] {
                    Slot::Pilot => pilot_symbol(i, Band::Full, None),
                    slot => SymbolActivity {
                        index: i,
                        dl: (slot == Slot::Dl).then_some(Band::Full),
                        ul: if slot == Slot::UlData {
                            UlActivity::Data(Band::Full)
                        } else {
                            UlActivity::Off
                        },
                        weight: w[i - 1],
                        predictor: Predictor::DdWp {
                            observations: recent(&ul_active, i, tp),
                        },
                    },
                })
                .collect()
        }
        Scheme::Mdd2 => {
            let kappa = params.dl_start;
            if tp >= t {
                return Err(range_err(
                    scheme,
                    format!("{tp} pilot symbols leave no data phase in {t}"),
                ));
            }
            if kappa < 1 || kappa > tp {
                return Err(range_err(scheme, format!("dl_start {kappa} must lie in 1..={tp}")));
            }
            let all: Vec<usize> = (1..=t).collect();
            (1..=t)
                .map(|i| {
                    if i <= kappa {
                        pilot_symbol(i, Band::Ul, None)
                    } else if i <= tp {
                        pilot_symbol(
                            i,
                            Band::Ul,
                            Some(Predictor::Wp {
                                observations: recent(&all, i, tp),
                            }),
                        )
                    } else {
                        SymbolActivity {
                            index: i,
                            dl: Some(Band::Dl),
                            ul: UlActivity::Data(Band::Ul),
                            weight: 1.0,
                            predictor: Predictor::DdWp {
                                observations: recent(&all, i, tp),
                            },
                        }
                    }
                })
                .collect()
        }
    };
    Ok(FrameSchedule {
        scheme,
        frame_length: t,
        params: *params,
        symbols,
    })
}

/// Uplink pilot symbol, optionally with concurrent downlink data (MDD).
fn pilot_symbol(i: usize, band: Band, dl_predictor: Option<Predictor>) -> SymbolActivity {
    let dl = dl_predictor.as_ref().map(|_| Band::Dl);
    SymbolActivity {
        index: i,
        dl,
        ul: UlActivity::Pilot(band),
        weight: 1.0,
        predictor: dl_predictor.unwrap_or(Predictor::None),
    }
}

/// Two-group layouts. The first group holds `⌈tp/2⌉` pilots at the frame
/// start, the second the rest from symbol `⌈T/2⌉`. `ul_total` uplink data
/// symbols follow the groups, split `⌈ul_total/2⌉` then the remainder.
fn two_groups(scheme: Scheme, tp: usize, t: usize, ul_total: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    if tp < 2 {
        return Err(range_err(scheme, "two pilot groups need at least 2 pilots".into()));
    }
    let g1 = tp.div_ceil(2);
    let g2 = tp - g1;
    let u1 = ul_total.div_ceil(2);
    let u2 = ul_total - u1;
    let s2 = t.div_ceil(2);
    if g1 + u1 + 1 > s2 - 1 || s2 + g2 + u2 > t {
        return Err(range_err(
            scheme,
            format!("{tp} pilots and {ul_total} uplink symbols do not fit two groups in {t}"),
        ));
    }
    let pilots: Vec<usize> = (1..=g1).chain(s2..s2 + g2).collect();
    let ul: Vec<usize> = (g1 + 1..=g1 + u1).chain(s2 + g2..s2 + g2 + u2).collect();
    Ok((pilots, ul))
}

/// A broken schedule invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    IndexMismatch { position: usize, index: usize },
    LengthMismatch { expected: usize, found: usize },
    DuplexConflict { symbol: usize },
    SwitchingLossInSwitchFreeScheme { symbol: usize },
    WeightOutOfRange { symbol: usize, weight: f64 },
    WeightAwayFromSwitch { symbol: usize },
    SwitchingTotal { expected: f64, found: f64 },
    MissingPredictor { symbol: usize },
    ObservationNotInPast { symbol: usize, observation: usize },
    ObservationNotPilot { symbol: usize, observation: usize },
    ObservationWithoutUplink { symbol: usize, observation: usize },
    BandOverlap { symbol: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::IndexMismatch { position, index } => write!(f, "symbol at position {position} has index {index}"),
            Self::LengthMismatch { expected, found } => write!(f, "{found} symbols for a frame of {expected}"),
            Self::DuplexConflict { symbol } => write!(f, "duplex conflict at symbol {symbol}"),
            Self::SwitchingLossInSwitchFreeScheme { symbol } => {
                write!(f, "switching loss in switch-free scheme at symbol {symbol}")
            }
            Self::WeightOutOfRange { symbol, weight } => write!(f, "weight {weight} out of range at symbol {symbol}"),
            Self::WeightAwayFromSwitch { symbol } => {
                write!(f, "partial weight at symbol {symbol} not adjacent to a switch")
            }
            Self::SwitchingTotal { expected, found } => {
                write!(
                    f,
                    "switching loss {found} does not match {expected} for the direction changes"
                )
            }
            Self::MissingPredictor { symbol } => write!(f, "data at symbol {symbol} has no CSI source"),
            Self::ObservationNotInPast { symbol, observation } => {
                write!(f, "symbol {symbol} observes symbol {observation}, which is not earlier")
            }
            Self::ObservationNotPilot { symbol, observation } => {
                write!(
                    f,
                    "symbol {symbol} uses symbol {observation} as a pilot, but it carries none"
                )
            }
            Self::ObservationWithoutUplink { symbol, observation } => {
                write!(f, "symbol {symbol} observes symbol {observation}, which has no uplink")
            }
            Self::BandOverlap { symbol } => write!(f, "downlink and uplink share subcarriers at symbol {symbol}"),
        }
    }
}

/// Check every schedule invariant, returning all violations found.
pub fn validate_schedule(s: &FrameSchedule) -> Vec<Violation> {
    let mut v = Vec::new();
    let t = s.frame_length;
    if s.symbols.len() != t {
        v.push(Violation::LengthMismatch {
            expected: t,
            found: s.symbols.len(),
        });
        return v;
    }
    for (k, sym) in s.symbols.iter().enumerate() {
        if sym.index != k + 1 {
            v.push(Violation::IndexMismatch {
                position: k + 1,
                index: sym.index,
            });
        }
    }
    if !v.is_empty() {
        return v;
    }
    let duplex = s.duplex();
    let ul_dir = |sym: &SymbolActivity| sym.ul.is_active();
    let mut transitions = 0usize;
    for (k, sym) in s.symbols.iter().enumerate() {
        let i = sym.index;
        if !(0.0..=1.0).contains(&sym.weight) {
            v.push(Violation::WeightOutOfRange {
                symbol: i,
                weight: sym.weight,
            });
        }
        match duplex {
            Duplex::Tdd => {
                if sym.dl.is_some() && sym.ul.is_active() {
                    v.push(Violation::DuplexConflict { symbol: i });
                }
                let prev = &s.symbols[(k + t - 1) % t];
                let next = &s.symbols[(k + 1) % t];
                if ul_dir(sym) != ul_dir(next) {
                    transitions += 1;
                }
                if sym.weight < 1.0 && ul_dir(prev) == ul_dir(sym) && ul_dir(next) == ul_dir(sym) {
                    v.push(Violation::WeightAwayFromSwitch { symbol: i });
                }
            }
            Duplex::Mdd | Duplex::Ibfd => {
                if sym.weight != 1.0 {
                    v.push(Violation::SwitchingLossInSwitchFreeScheme { symbol: i });
                }
                if duplex == Duplex::Mdd {
                    if let (Some(d), Some(u)) = (sym.dl, sym.ul.band()) {
                        if d == u || d == Band::Full || u == Band::Full {
                            v.push(Violation::BandOverlap { symbol: i });
                        }
                    }
                }
            }
        }
        if sym.carries_data() && sym.predictor == Predictor::None {
            v.push(Violation::MissingPredictor { symbol: i });
        }
        for o in sym.predictor.observations() {
            if o == 0 || o >= i {
                v.push(Violation::ObservationNotInPast {
                    symbol: i,
                    observation: o,
                });
                continue;
            }
            let obs = &s.symbols[o - 1];
            match sym.predictor {
                Predictor::DdWp { .. } => {
                    if !obs.ul.is_active() {
                        v.push(Violation::ObservationWithoutUplink {
                            symbol: i,
                            observation: o,
                        });
                    }
                }
                _ => {
                    if !matches!(obs.ul, UlActivity::Pilot(_)) {
                        v.push(Violation::ObservationNotPilot {
                            symbol: i,
                            observation: o,
                        });
                    }
                }
            }
        }
    }
    if duplex == Duplex::Tdd {
        let expected = transitions as f64 * s.params.switching;
        let found = s.switching_loss();
        if (expected - found).abs() > 1e-12 {
            v.push(Violation::SwitchingTotal { expected, found });
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build(s: &str, t: usize) -> FrameSchedule {
        build_schedule(s.parse().unwrap(), t, &FrameParams::default()).unwrap()
    }

    #[test]
    fn tdd1_layout() {
        let s = build("TDD-1", 28);
        assert_eq!(s.pilot_positions(), (1..=7).collect::<Vec<_>>());
        assert_eq!(s.symbol(8).weight, 0.5);
        assert_eq!(s.symbol(28).weight, 0.5);
        assert!((9..=27).all(|i| s.symbol(i).weight == 1.0));
        assert_eq!(s.dl_weight(), 20.0);
        assert_eq!(
            s.symbol(9).predictor,
            Predictor::Wp {
                observations: vec![7, 6, 5, 4, 3, 2, 1]
            }
        );
        assert!(validate_schedule(&s).is_empty());
    }

    #[test]
    fn mdd1_layout() {
        let s = build("MDD-1(7)", 28);
        assert!(s.symbols.iter().all(|x| x.ul == UlActivity::Pilot(Band::Ul)));
        assert!((8..=28).all(|i| s.symbol(i).dl == Some(Band::Dl) && s.symbol(i).weight == 1.0));
        assert!((1..=7).all(|i| s.symbol(i).dl.is_none()));
        assert_eq!(
            s.symbol(20).predictor,
            Predictor::Wp {
                observations: (13..=19).rev().collect()
            }
        );
        let s1 = build("MDD-1(1)", 28);
        assert_eq!(s1.dl_weight(), 27.0);
        assert_eq!(s1.symbol(2).predictor, Predictor::Wp { observations: vec![1] });
        assert!(validate_schedule(&s1).is_empty());
    }

    #[test]
    fn mdd2_layout() {
        let s = build("MDD-2", 28);
        assert!(s.symbol(1).dl.is_none());
        assert!((2..=28).all(|i| s.symbol(i).dl.is_some()));
        assert!((8..=28).all(|i| s.symbol(i).ul == UlActivity::Data(Band::Ul)));
        assert_eq!(
            s.symbol(4).predictor,
            Predictor::Wp {
                observations: vec![3, 2, 1]
            }
        );
        assert!(matches!(s.symbol(8).predictor, Predictor::DdWp { .. }));
        assert_eq!(s.symbol(8).predictor.order(), 7);
        assert!(validate_schedule(&s).is_empty());
    }

    #[test]
    fn tdd2_layout() {
        let s = build("TDD-2", 28);
        assert!((8..=15).all(|i| matches!(s.symbol(i).ul, UlActivity::Data(_))));
        assert_eq!(s.symbol(15).weight, 0.5);
        assert_eq!(s.symbol(16).weight, 1.0);
        assert_eq!(s.symbol(28).weight, 0.5);
        assert_eq!(s.ul_data_weight(), 7.5);
        assert_eq!(s.dl_weight(), 12.5);
        assert_eq!(s.switching_loss(), 1.0);
        assert!(validate_schedule(&s).is_empty());
    }

    #[test]
    fn pa_positions() {
        assert_eq!(even_positions(7, 28), vec![1, 5, 9, 14, 18, 23, 27]);
        let s = build("MDD-1-PA", 28);
        assert_eq!(s.pilot_positions(), vec![1, 5, 9, 14, 18, 23, 27]);
        assert_eq!(s.symbol(6).dl, Some(Band::Full));
        assert_eq!(s.symbol(5).dl, Some(Band::Dl));
        assert_eq!(s.symbol(6).predictor, Predictor::Wp { observations: vec![5] });
        assert!(validate_schedule(&s).is_empty());
    }

    #[test]
    fn variants_validate() {
        for name in ["TDD-1-ES", "TDD-1-TG", "TDD-1-NOP", "TDD-2-TG", "IBFD-1", "MDD-1"] {
            for t in [28, 56] {
                let s = build(name, t);
                let v = validate_schedule(&s);
                assert!(v.is_empty(), "{name} T={t}: {v:?}");
            }
        }
        let tg = build("TDD-1-TG", 28);
        assert_eq!(tg.pilot_positions(), vec![1, 2, 3, 4, 14, 15, 16]);
        let tg2 = build("TDD-2-TG", 28);
        assert_eq!(tg2.switching_loss(), 2.0);
    }

    #[test]
    fn violations_are_reported() {
        let mut s = build("TDD-1", 28);
        s.symbols[10].ul = UlActivity::Pilot(Band::Full);
        assert!(validate_schedule(&s).contains(&Violation::DuplexConflict { symbol: 11 }));

        let mut m = build("MDD-1(7)", 28);
        m.symbols[12].weight = 0.5;
        let v = validate_schedule(&m);
        assert!(v.contains(&Violation::SwitchingLossInSwitchFreeScheme { symbol: 13 }));
        assert!(v
            .iter()
            .any(|x| x.to_string().contains("switching loss in switch-free scheme")));
    }

    #[test]
    fn scheme_names_round_trip() {
        for name in [
            "TDD-1",
            "TDD-1-NOP",
            "TDD-1-ES",
            "TDD-1-TG",
            "MDD-1",
            "MDD-1(3)",
            "MDD-1-PA",
            "TDD-2",
            "TDD-2-TG",
            "MDD-2",
            "IBFD-1",
            "IBFD-1(7)",
        ] {
            let s: Scheme = name.parse().unwrap();
            assert_eq!(s.to_string(), name);
        }
        assert!("mdd-1(0)".parse::<Scheme>().is_err());
        assert!("FDD".parse::<Scheme>().is_err());
        assert!("MDD-1(x)".parse::<Scheme>().is_err());
    }

    #[test]
    fn range_errors() {
        let p = FrameParams::default();
        assert!(build_schedule(Scheme::Tdd1, 7, &p).is_err());
        assert!(build_schedule(Scheme::Tdd2, 15, &p).is_err());
        assert!(build_schedule(Scheme::Tdd2, 16, &p).is_ok());
        assert!(build_schedule(Scheme::Mdd1 { order: Some(28) }, 28, &p).is_err());
    }

    #[test]
    fn table_has_a_row_per_symbol() {
        let s = build("TDD-2", 28);
        assert_eq!(s.table().lines().count(), 28 + 2);
    }
}
