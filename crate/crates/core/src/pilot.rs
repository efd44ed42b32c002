//! Frequency-domain pilot sequences and tap-domain MMSE estimation.
//!
//! User `d` sends `x_d[k] = exp(j2π k d s / M̄)` on the `k`-th pilot
//! subcarrier, `s = ⌊M̄/D⌋`. On a uniform comb the projections
//! `P_d = diag(x_d) Φ F Ψ` are mutually orthogonal whenever `M̄ ≥ D·L`, so
//! `P_dᴴ y` isolates user `d`'s taps scaled by `√p M̄/M_sum`.

use rand::Rng;

use crate::channel::{ChannelStats, OfdmOperator, SubcarrierPlan};
use crate::error::{Error, Result};
use crate::math::{cn, twiddle, CMat, C64};

/// Tolerance on `P_dᴴP_k` used when a book is built.
const ORTHOGONALITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct PilotBook {
    users: usize,
    m_sum: usize,
    spacing: usize,
    subcarriers: Vec<usize>,
    sequences: Vec<Vec<C64>>,
    projections: Vec<CMat>,
}

/// Pilot book on the uplink set of `plan`.
pub fn build_pilot_book(users: usize, plan: &SubcarrierPlan, op: &OfdmOperator) -> Result<PilotBook> {
    PilotBook::on_subcarriers(users, plan.ul(), op)
}

impl PilotBook {
    /// Pilot book on an arbitrary subcarrier set (the full band for TDD).
    pub fn on_subcarriers(users: usize, subcarriers: &[usize], op: &OfdmOperator) -> Result<Self> {
        let mbar = subcarriers.len();
        let l = op.taps();
        if users == 0 || mbar < users * l {
            return Err(Error::InsufficientPilotSubcarriers {
                available: mbar,
                required: users.max(1) * l,
                users,
                taps: l,
            });
        }
        let spacing = mbar / users;
        let sequences: Vec<Vec<C64>> = (0..users)
            .map(|d| (0..mbar).map(|k| twiddle((k * d * spacing) as i64, mbar)).collect())
            .collect();
        let f_psi = op.f_psi();
        let projections: Vec<CMat> = sequences
            .iter()
            .map(|x| CMat::from_fn(mbar, l, |k, t| x[k] * f_psi[(subcarriers[k], t)]))
            .collect();
        let book = Self {
            users,
            m_sum: op.subcarriers(),
            spacing,
            subcarriers: subcarriers.to_vec(),
            sequences,
            projections,
        };
        let dev = book.orthogonality_error();
        if dev > ORTHOGONALITY_TOL {
            return Err(Error::PilotsNotOrthogonal(dev));
        }
        Ok(book)
    }

    pub fn users(&self) -> usize {
        self.users
    }

    /// Number of pilot subcarriers `M̄`.
    pub fn len(&self) -> usize {
        self.subcarriers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subcarriers.is_empty()
    }

    pub fn spacing(&self) -> usize {
        self.spacing
    }

    pub fn subcarriers(&self) -> &[usize] {
        &self.subcarriers
    }

    pub fn sequence(&self, d: usize) -> &[C64] {
        &self.sequences[d]
    }

    pub fn projection(&self, d: usize) -> &CMat {
        &self.projections[d]
    }

    /// `M̄ / M_sum`.
    pub fn ratio(&self) -> f64 {
        self.len() as f64 / self.m_sum as f64
    }

    /// Largest entry of `P_dᴴP_k − δ_dk (M̄/M_sum) I` over all user pairs.
    pub fn orthogonality_error(&self) -> f64 {
        let mut worst = 0.0f64;
        let r = self.ratio();
        for d in 0..self.users {
            for k in 0..self.users {
                let g = self.projections[d].adjoint() * &self.projections[k];
                for a in 0..g.nrows() {
                    for b in 0..g.ncols() {
                        let target = if d == k && a == b { r } else { 0.0 };
                        worst = worst.max((g[(a, b)] - target).norm());
                    }
                }
            }
        }
        worst
    }

    /// Noiseless received pilot vector at one antenna:
    /// `y[k] = √p Σ_d x_d[k] h_{n,d}[m_k]`.
    ///
    /// `freq` is the `M_sum × (N·D)` response matrix, column `n·D + d`.
    pub fn received(&self, freq: &CMat, n: usize, power: f64) -> Vec<C64> {
        let amp = power.sqrt();
        self.subcarriers
            .iter()
            .enumerate()
            .map(|(k, &m)| {
                let mut acc = C64::new(0.0, 0.0);
                for d in 0..self.users {
                    acc += self.sequences[d][k] * freq[(m, n * self.users + d)];
                }
                acc * amp
            })
            .collect()
    }

    /// Add `CN(0, variance)` noise to every entry.
    pub fn add_noise<R: Rng + ?Sized>(y: &mut [C64], variance: f64, rng: &mut R) {
        for v in y {
            *v += cn(rng, variance);
        }
    }

    /// `ỹ = P_dᴴ y`.
    pub fn project(&self, d: usize, y: &[C64]) -> Result<Vec<C64>> {
        project_observation(y, &self.projections[d])
    }

    pub fn observation_model(&self, pilot_power: f64, noise: f64) -> ObservationModel {
        ObservationModel {
            pilot_power,
            ratio: self.ratio(),
            noise,
        }
    }
}

/// `ỹ = Pᴴ y` for a single projection operator.
pub fn project_observation(y: &[C64], p: &CMat) -> Result<Vec<C64>> {
    if y.len() != p.nrows() {
        return Err(Error::DimensionMismatch {
            what: "pilot observation",
            expected: p.nrows(),
            found: y.len(),
        });
    }
    Ok((0..p.ncols())
        .map(|l| (0..p.nrows()).map(|k| p[(k, l)].conj() * y[k]).sum())
        .collect())
}

/// Statistics of a projected pilot observation `ỹ = a g + e`, with
/// `a = √p M̄/M_sum` and `e ~ CN(0, (M̄/M_sum)(σ² + SI) I)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationModel {
    pub pilot_power: f64,
    /// `M̄ / M_sum`.
    pub ratio: f64,
    pub noise: f64,
}

impl ObservationModel {
    pub fn amplitude(&self) -> f64 {
        self.pilot_power.sqrt() * self.ratio
    }

    pub fn noise_variance(&self, si: f64) -> f64 {
        self.ratio * (self.noise + si)
    }

    /// Scalar MMSE gain for a tap of variance `tap_var`.
    pub fn mmse_gain(&self, tap_var: f64, si: f64) -> f64 {
        let a = self.amplitude();
        let den = a * a * tap_var + self.noise_variance(si);
        if den == 0.0 {
            0.0
        } else {
            a * tap_var / den
        }
    }

    /// Per-tap MMSE error variance `tap_var (1 − c a)`.
    pub fn mmse_error(&self, tap_var: f64, si: f64) -> f64 {
        tap_var * (1.0 - self.mmse_gain(tap_var, si) * self.amplitude())
    }
}

/// `ĝ = c ỹ` with the MMSE gain of user `d`.
pub fn mmse_estimate(y_tilde: &[C64], stats: &ChannelStats, d: usize, model: &ObservationModel, si: f64) -> Vec<C64> {
    let c = model.mmse_gain(stats.tap_variance(d), si);
    y_tilde.iter().map(|y| y * c).collect()
}
