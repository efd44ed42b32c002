//! Time-varying multi-tap channels.
//!
//! Each antenna/user pair has an `L`-tap impulse response with uniform power
//! profile `(β_d / L) I_L`. Taps age from symbol to symbol as a first-order
//! autoregressive process whose coefficient is the Jakes autocorrelation at
//! one symbol lag. Frequency responses are obtained with the unitary DFT
//! restricted to the first `L` columns.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::math::{cn, twiddle, CMat, C64};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Zeroth-order Bessel function of the first kind.
///
/// Power series below `|x| = 8`, Miller's backward recurrence above it
/// (normalised with `J0 + 2 Σ J_2k = 1`). Both branches are good to ~1e-14.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x < 8.0 {
        j0_series(x)
    } else {
        j0_miller(x)
    }
}

fn j0_series(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let k = k as f64;
        term *= q / (k * k);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) && term.abs() < 1e-18 {
            break;
        }
    }
    sum
}

fn j0_miller(x: f64) -> f64 {
    let start = (x + 30.0 + (60.0 * x).sqrt()) as usize;
    let start = start + (start & 1);
    let mut j_next = 0.0;
    let mut j = 1e-300;
    let mut even_sum = 0.0;
    for k in (1..=start).rev() {
        let j_prev = 2.0 * k as f64 / x * j - j_next;
        j_next = j;
        j = j_prev;
        let order = k - 1;
        if order > 0 && order % 2 == 0 {
            even_sum += j;
        }
        if j.abs() > 1e250 {
            j *= 1e-250;
            j_next *= 1e-250;
            even_sum *= 1e-250;
        }
    }
    j / (j + 2.0 * even_sum)
}

/// Mobility parameters. The AR(1) coefficient is always derived from these.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingParams {
    pub carrier_frequency_hz: f64,
    pub symbol_duration_s: f64,
    pub velocity_mps: f64,
}

impl FadingParams {
    pub fn new(carrier_frequency_hz: f64, symbol_duration_s: f64, velocity_mps: f64) -> Result<Self> {
        if !(symbol_duration_s > 0.0) || !symbol_duration_s.is_finite() {
            return Err(invalid("symbol_duration_s", "must be positive"));
        }
        if !(carrier_frequency_hz > 0.0) || !carrier_frequency_hz.is_finite() {
            return Err(invalid("carrier_frequency_hz", "must be positive"));
        }
        if !(velocity_mps >= 0.0) || !velocity_mps.is_finite() {
            return Err(invalid("velocity", "must be non-negative"));
        }
        Ok(Self {
            carrier_frequency_hz,
            symbol_duration_s,
            velocity_mps,
        })
    }

    pub fn from_kmh(carrier_frequency_hz: f64, symbol_duration_s: f64, velocity_kmh: f64) -> Result<Self> {
        Self::new(carrier_frequency_hz, symbol_duration_s, velocity_kmh / 3.6)
    }

    pub fn doppler_hz(&self) -> f64 {
        self.velocity_mps * self.carrier_frequency_hz / SPEED_OF_LIGHT
    }

    /// One-symbol AR(1) coefficient, `J0(2π fD Ts)`.
    pub fn alpha(&self) -> f64 {
        jakes_autocorrelation(1, self)
    }
}

/// Jakes autocorrelation at a lag of `k` symbols.
pub fn jakes_autocorrelation(k: i64, params: &FadingParams) -> f64 {
    let x = 2.0 * std::f64::consts::PI * params.doppler_hz() * params.symbol_duration_s * k.unsigned_abs() as f64;
    bessel_j0(x)
}

/// Second-order statistics of the user channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStats {
    betas: Vec<f64>,
    taps: usize,
    subcarriers: usize,
}

impl ChannelStats {
    pub fn new(betas: Vec<f64>, taps: usize, subcarriers: usize) -> Result<Self> {
        if taps == 0 {
            return Err(invalid("taps", "need at least one tap"));
        }
        if taps > subcarriers {
            return Err(invalid("taps", format!("{taps} taps exceed {subcarriers} subcarriers")));
        }
        if betas.is_empty() {
            return Err(invalid("users", "need at least one user"));
        }
        if let Some(b) = betas.iter().find(|b| !(**b >= 0.0) || !b.is_finite()) {
            return Err(invalid(
                "beta",
                format!("large-scale gain {b} must be finite and non-negative"),
            ));
        }
        Ok(Self {
            betas,
            taps,
            subcarriers,
        })
    }

    pub fn users(&self) -> usize {
        self.betas.len()
    }

    pub fn taps(&self) -> usize {
        self.taps
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn beta(&self, d: usize) -> f64 {
        self.betas[d]
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// Per-tap variance `β_d / L`.
    pub fn tap_variance(&self, d: usize) -> f64 {
        self.betas[d] / self.taps as f64
    }

    /// Per-subcarrier variance `β_d / M_sum`.
    pub fn rh(&self, d: usize) -> f64 {
        self.betas[d] / self.subcarriers as f64
    }

    /// Tap covariance `(β_d / L) I_L`.
    pub fn rg(&self, d: usize) -> CMat {
        CMat::identity(self.taps, self.taps) * C64::new(self.tap_variance(d), 0.0)
    }
}

/// Path-loss gains `D^{-exponent}` for the given distances in metres.
pub fn path_loss(distances_m: &[f64], exponent: f64) -> Vec<f64> {
    distances_m.iter().map(|d| d.powf(-exponent)).collect()
}

/// Time-domain taps of every antenna/user pair at one symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct TapState {
    pub symbol: usize,
    antennas: usize,
    users: usize,
    taps: usize,
    data: Vec<C64>,
}

impl TapState {
    pub fn zeros(symbol: usize, antennas: usize, users: usize, taps: usize) -> Self {
        Self {
            symbol,
            antennas,
            users,
            taps,
            data: vec![C64::new(0.0, 0.0); antennas * users * taps],
        }
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn taps_per_link(&self) -> usize {
        self.taps
    }

    fn offset(&self, n: usize, d: usize) -> usize {
        (n * self.users + d) * self.taps
    }

    pub fn taps(&self, n: usize, d: usize) -> &[C64] {
        let o = self.offset(n, d);
        &self.data[o..o + self.taps]
    }

    pub fn taps_mut(&mut self, n: usize, d: usize) -> &mut [C64] {
        let o = self.offset(n, d);
        &mut self.data[o..o + self.taps]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    /// Taps arranged as an `L × (N·D)` matrix, column `n·D + d`.
    pub fn as_matrix(&self) -> CMat {
        CMat::from_column_slice(self.taps, self.antennas * self.users, &self.data)
    }

    /// One AR(1) step in place: `g ← α g + v`, `v ~ CN(0, (1-α²) β_d/L I)`.
    pub fn evolve_in_place<R: Rng + ?Sized>(&mut self, alpha: f64, stats: &ChannelStats, rng: &mut R) {
        let innovation = 1.0 - alpha * alpha;
        for n in 0..self.antennas {
            for d in 0..self.users {
                let var = innovation * stats.tap_variance(d);
                for g in self.taps_mut(n, d) {
                    *g = *g * alpha + if var > 0.0 { cn(rng, var) } else { C64::new(0.0, 0.0) };
                }
            }
        }
        self.symbol += 1;
    }
}

/// Stationary draw of every tap: `g_{n,d} ~ CN(0, (β_d/L) I_L)`.
pub fn init_taps<R: Rng + ?Sized>(stats: &ChannelStats, antennas: usize, rng: &mut R) -> Result<TapState> {
    if antennas == 0 {
        return Err(invalid("antennas", "need at least one antenna"));
    }
    let mut state = TapState::zeros(1, antennas, stats.users(), stats.taps());
    for n in 0..antennas {
        for d in 0..stats.users() {
            let var = stats.tap_variance(d);
            for g in state.taps_mut(n, d) {
                *g = if var > 0.0 { cn(rng, var) } else { C64::new(0.0, 0.0) };
            }
        }
    }
    Ok(state)
}

/// Advance a tap state by one symbol.
pub fn evolve_ar1<R: Rng + ?Sized>(
    state: &TapState,
    params: &FadingParams,
    stats: &ChannelStats,
    rng: &mut R,
) -> Result<TapState> {
    if state.users() != stats.users() {
        return Err(Error::DimensionMismatch {
            what: "tap state users",
            expected: stats.users(),
            found: state.users(),
        });
    }
    if state.taps_per_link() != stats.taps() {
        return Err(Error::DimensionMismatch {
            what: "tap state taps",
            expected: stats.taps(),
            found: state.taps_per_link(),
        });
    }
    let alpha = params.alpha();
    let mut next = state.clone();
    next.evolve_in_place(alpha, stats, rng);
    Ok(next)
}

/// Unitary DFT of size `M_sum` restricted to `L` taps.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmOperator {
    m_sum: usize,
    taps: usize,
    f_psi: CMat,
}

impl OfdmOperator {
    pub fn new(m_sum: usize, taps: usize) -> Result<Self> {
        if m_sum == 0 {
            return Err(invalid("subcarriers", "need at least one subcarrier"));
        }
        if taps == 0 || taps > m_sum {
            return Err(invalid("taps", format!("need 1..={m_sum} taps, got {taps}")));
        }
        let s = 1.0 / (m_sum as f64).sqrt();
        let f_psi = CMat::from_fn(m_sum, taps, |p, q| twiddle(-((p * q) as i64), m_sum) * s);
        Ok(Self { m_sum, taps, f_psi })
    }

    pub fn subcarriers(&self) -> usize {
        self.m_sum
    }

    pub fn taps(&self) -> usize {
        self.taps
    }

    /// Full `M_sum × M_sum` unitary DFT matrix.
    pub fn fft_matrix(&self) -> CMat {
        let m = self.m_sum;
        let s = 1.0 / (m as f64).sqrt();
        CMat::from_fn(m, m, |p, q| twiddle(-((p * q) as i64), m) * s)
    }

    /// Tap selector `Ψ`: the first `L` columns of the identity.
    pub fn tap_selector(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.m_sum, self.taps, |p, q| if p == q { 1.0 } else { 0.0 })
    }

    /// `F Ψ`, an `M_sum × L` matrix.
    pub fn f_psi(&self) -> &CMat {
        &self.f_psi
    }

    /// Row functional `ψ_m` as a `1 × L` matrix.
    pub fn psi(&self, m: usize) -> CMat {
        self.f_psi.rows(m, 1).into_owned()
    }

    /// `ψ_m g` for one subcarrier.
    pub fn response_at(&self, m: usize, taps: &[C64]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (l, g) in taps.iter().enumerate() {
            acc += self.f_psi[(m, l)] * g;
        }
        acc
    }

    /// `h = F Ψ g`.
    pub fn to_frequency(&self, taps: &[C64]) -> Result<Vec<C64>> {
        if taps.len() != self.taps {
            return Err(Error::DimensionMismatch {
                what: "tap vector",
                expected: self.taps,
                found: taps.len(),
            });
        }
        Ok((0..self.m_sum).map(|m| self.response_at(m, taps)).collect())
    }

    /// Frequency responses of every link: `M_sum × (N·D)`, column `n·D + d`.
    pub fn frequency_response(&self, state: &TapState) -> CMat {
        &self.f_psi * state.as_matrix()
    }
}

/// Link direction of a subcarrier view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Downlink,
    Uplink,
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "DL" | "DOWNLINK" => Ok(Self::Downlink),
            "UL" | "UPLINK" => Ok(Self::Uplink),
            _ => Err(Error::UnknownDirection(s.to_string())),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Downlink => "DL",
            Self::Uplink => "UL",
        })
    }
}

/// Which subcarriers a transmission occupies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Band {
    /// The downlink set of the MDD partition.
    Dl,
    /// The uplink set of the MDD partition.
    Ul,
    /// Every subcarrier (TDD, IBFD, borrowed subcarriers).
    Full,
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Dl => "M",
            Self::Ul => "M'",
            Self::Full => "all",
        })
    }
}

/// Partition of the subcarriers into downlink and uplink sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubcarrierPlan {
    m_sum: usize,
    dl: Vec<usize>,
    ul: Vec<usize>,
    all: Vec<usize>,
}

impl SubcarrierPlan {
    /// Uplink subcarriers spread as evenly as possible, downlink gets the rest.
    /// When `m_ul` divides `m_sum` the uplink set is `0, s, 2s, …`.
    pub fn interleaved(m_sum: usize, m_ul: usize) -> Result<Self> {
        if m_ul > m_sum {
            return Err(invalid("ul_subcarriers", format!("{m_ul} exceeds {m_sum} subcarriers")));
        }
        let ul: Vec<usize> = (0..m_ul).map(|k| k * m_sum / m_ul).collect();
        let dl = (0..m_sum).filter(|m| ul.binary_search(m).is_err()).collect();
        Self::from_sets(m_sum, dl, ul)
    }

    pub fn from_sets(m_sum: usize, mut dl: Vec<usize>, mut ul: Vec<usize>) -> Result<Self> {
        dl.sort_unstable();
        ul.sort_unstable();
        let mut seen = vec![false; m_sum];
        for &m in dl.iter().chain(ul.iter()) {
            if m >= m_sum {
                return Err(invalid("subcarrier plan", format!("index {m} outside 0..{m_sum}")));
            }
            if seen[m] {
                return Err(invalid("subcarrier plan", format!("subcarrier {m} assigned twice")));
            }
            seen[m] = true;
        }
        if dl.len() + ul.len() != m_sum {
            return Err(invalid(
                "subcarrier plan",
                format!("{} + {} subcarriers do not cover {m_sum}", dl.len(), ul.len()),
            ));
        }
        Ok(Self {
            m_sum,
            dl,
            ul,
            all: (0..m_sum).collect(),
        })
    }

    pub fn subcarriers(&self) -> usize {
        self.m_sum
    }

    pub fn dl(&self) -> &[usize] {
        &self.dl
    }

    pub fn ul(&self) -> &[usize] {
        &self.ul
    }

    pub fn band(&self, band: Band) -> &[usize] {
        match band {
            Band::Dl => &self.dl,
            Band::Ul => &self.ul,
            Band::Full => &self.all,
        }
    }

    pub fn indices(&self, direction: Direction) -> &[usize] {
        match direction {
            Direction::Downlink => &self.dl,
            Direction::Uplink => &self.ul,
        }
    }

    /// Whether the uplink set is a uniform comb.
    pub fn ul_evenly_spaced(&self) -> bool {
        is_uniform_comb(&self.ul, self.m_sum)
    }

    /// Row-selection matrix `Φ` of the given direction.
    pub fn mapping_matrix(&self, direction: Direction) -> DMatrix<f64> {
        let idx = self.indices(direction);
        DMatrix::from_fn(idx.len(), self.m_sum, |r, c| if idx[r] == c { 1.0 } else { 0.0 })
    }
}

/// True when `idx` is `{o, o+s, o+2s, …}` with `s · len = m_sum`.
pub fn is_uniform_comb(idx: &[usize], m_sum: usize) -> bool {
    if idx.is_empty() || m_sum % idx.len() != 0 {
        return false;
    }
    let s = m_sum / idx.len();
    idx.windows(2).all(|w| w[1] - w[0] == s)
}

/// `Φ h` for the requested direction.
pub fn subcarrier_view(h: &[C64], plan: &SubcarrierPlan, direction: Direction) -> Result<Vec<C64>> {
    if h.len() != plan.subcarriers() {
        return Err(Error::DimensionMismatch {
            what: "frequency response",
            expected: plan.subcarriers(),
            found: h.len(),
        });
    }
    Ok(plan.indices(direction).iter().map(|&m| h[m]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn j0_known_values() {
        assert_eq!(bessel_j0(0.0), 1.0);
        assert!(bessel_j0(2.404_825_557_695_773).abs() < 1e-14);
        assert!(bessel_j0(5.520_078_110_286_311).abs() < 1e-14);
        // Reference values from standard tables.
        assert_relative_eq!(bessel_j0(1.0), 0.765_197_686_557_966_6, epsilon = 1e-14);
        assert_relative_eq!(bessel_j0(10.0), -0.245_935_764_451_348_3, epsilon = 1e-13);
        assert_relative_eq!(bessel_j0(30.0), -0.086_367_983_581_040_23, epsilon = 1e-13);
        assert_relative_eq!(bessel_j0(-1.0), bessel_j0(1.0));
    }

    #[test]
    fn j0_branches_meet() {
        let below = j0_series(8.0);
        let above = j0_miller(8.0);
        assert!((below - above).abs() < 1e-13, "{below} {above}");
    }

    #[test]
    fn doppler_at_100_kmh() {
        let p = FadingParams::from_kmh(5e9, 66.67e-6, 100.0).unwrap();
        assert!((p.doppler_hz() - 463.0).abs() < 0.5);
        assert!((p.alpha() - 0.99062).abs() < 1e-4);
    }

    #[test]
    fn fading_rejects_bad_input() {
        assert!(FadingParams::new(5e9, 0.0, 1.0).is_err());
        assert!(FadingParams::new(5e9, 1e-3, -1.0).is_err());
    }

    #[test]
    fn impulse_is_flat() {
        let op = OfdmOperator::new(96, 4).unwrap();
        let c = C64::new(0.3, -1.2);
        let h = op.to_frequency(&[c, 0.0.into(), 0.0.into(), 0.0.into()]).unwrap();
        for x in h {
            assert_relative_eq!(x.norm(), c.norm() / 96f64.sqrt(), epsilon = 1e-15);
        }
    }

    #[test]
    fn to_frequency_checks_length() {
        let op = OfdmOperator::new(16, 4).unwrap();
        assert!(matches!(
            op.to_frequency(&[C64::new(1.0, 0.0); 3]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn table_plan_partitions() {
        let plan = SubcarrierPlan::interleaved(96, 32).unwrap();
        assert_eq!(plan.dl().len(), 64);
        assert_eq!(plan.ul().len(), 32);
        assert!(plan.ul_evenly_spaced());
        assert_eq!(&plan.ul()[..3], &[0, 3, 6]);
        let h: Vec<C64> = (0..96).map(|m| C64::new(m as f64, 0.0)).collect();
        let dl = subcarrier_view(&h, &plan, Direction::Downlink).unwrap();
        let ul = subcarrier_view(&h, &plan, Direction::Uplink).unwrap();
        let mut all: Vec<f64> = dl.iter().chain(ul.iter()).map(|x| x.re).collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..96).map(|m| m as f64).collect::<Vec<_>>());
    }

    #[test]
    fn dl_only_plan() {
        let plan = SubcarrierPlan::from_sets(8, (0..8).collect(), vec![]).unwrap();
        let h: Vec<C64> = (0..8).map(|m| C64::new(1.0, m as f64)).collect();
        assert_eq!(subcarrier_view(&h, &plan, Direction::Downlink).unwrap(), h);
        assert!(subcarrier_view(&h, &plan, Direction::Uplink).unwrap().is_empty());
    }

    #[test]
    fn indicator_on_dl_is_invisible_upstream() {
        let plan = SubcarrierPlan::interleaved(96, 32).unwrap();
        let mut h = vec![C64::new(0.0, 0.0); 96];
        h[plan.dl()[5]] = C64::new(1.0, 0.0);
        assert!(subcarrier_view(&h, &plan, Direction::Uplink)
            .unwrap()
            .iter()
            .all(|x| x.norm() == 0.0));
    }

    #[test]
    fn plan_rejects_overlap() {
        assert!(SubcarrierPlan::from_sets(4, vec![0, 1], vec![1, 2]).is_err());
        assert!(SubcarrierPlan::from_sets(4, vec![0, 1], vec![2]).is_err());
        assert!(SubcarrierPlan::interleaved(4, 5).is_err());
    }

    #[test]
    fn direction_parse() {
        assert_eq!("dl".parse::<Direction>().unwrap(), Direction::Downlink);
        assert_eq!("UL".parse::<Direction>().unwrap(), Direction::Uplink);
        assert!("sideways".parse::<Direction>().is_err());
    }

    #[test]
    fn frozen_channel() {
        let stats = ChannelStats::new(vec![1.0, 0.5], 4, 96).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g0 = init_taps(&stats, 3, &mut rng).unwrap();
        let p = FadingParams::new(5e9, 66.67e-6, 0.0).unwrap();
        let g1 = evolve_ar1(&g0, &p, &stats, &mut rng).unwrap();
        assert_eq!(g0.as_slice(), g1.as_slice());
        assert_eq!(g1.symbol, 2);
    }

    #[test]
    fn zero_gain_gives_zero_taps() {
        let stats = ChannelStats::new(vec![0.0], 4, 96).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = init_taps(&stats, 2, &mut rng).unwrap();
        assert!(g.as_slice().iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn stats_relations() {
        let stats = ChannelStats::new(vec![2.0], 4, 96).unwrap();
        assert_relative_eq!(stats.rh(0), stats.rg(0).trace().re / 96.0, epsilon = 0.0);
        assert!(ChannelStats::new(vec![-1.0], 4, 96).is_err());
        assert!(ChannelStats::new(vec![1.0], 0, 96).is_err());
    }
}
