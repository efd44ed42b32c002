//! Wiener channel predictors.
//!
//! The pilot-driven predictor (WP) works on the projected tap-domain pilot
//! observations of one antenna/user pair and outputs predicted taps. The
//! decision-directed predictor (DD-WP) works per uplink subcarrier on the raw
//! received samples of earlier pilot and data symbols, using the known (or
//! correctly detected) symbols of every user, and outputs predicted uplink
//! subcarrier channels for all users at once. Those are mapped back to taps
//! by least squares and then to the downlink subcarriers.
//!
//! Observation ages are measured in symbols between an observation and the
//! predicted symbol and are listed most recent first.

use nalgebra::DMatrix;

use crate::channel::{ChannelStats, OfdmOperator};
use crate::error::{invalid, Error, Result};
use crate::math::{hermitian_condition, hermitian_part, hermitian_solve, CMat, C64, MAX_CONDITION};
use crate::pilot::ObservationModel;

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Residual SI power at the base station for each observation.
#[derive(Debug, Clone, PartialEq)]
pub struct SiProfile(pub Vec<f64>);

impl SiProfile {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn check(&self, order: usize) -> Result<()> {
        if self.0.len() != order {
            return Err(Error::DimensionMismatch {
                what: "SI profile",
                expected: order,
                found: self.0.len(),
            });
        }
        if self.0.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(invalid("si_profile", "entries must be finite and non-negative"));
        }
        Ok(())
    }
}

fn check_ages(ages: &[usize]) -> Result<()> {
    if ages.is_empty() {
        return Err(invalid("order", "prediction needs at least one observation"));
    }
    if ages[0] == 0 || ages.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("ages", "ages must be positive and strictly increasing"));
    }
    Ok(())
}

/// Pilot-driven Wiener predictor of one user's taps.
#[derive(Debug, Clone, PartialEq)]
pub struct WpWeights {
    pub ages: Vec<usize>,
    /// `L × Lτ`, block `q` applies to the observation with age `ages[q]`.
    pub v: CMat,
    /// Second moment of the prediction, `Υ = R_gȳ R_ȳ⁻¹ R_gȳᴴ`.
    pub upsilon: CMat,
    /// Tap covariance `R_g` the weights were built for.
    pub rg: CMat,
    /// Condition number of `R_ȳ`.
    pub condition: f64,
}

impl WpWeights {
    pub fn order(&self) -> usize {
        self.ages.len()
    }

    pub fn taps(&self) -> usize {
        self.v.nrows()
    }

    /// `ψ_m Υ ψ_mᴴ`, the variance of the predicted channel on subcarrier `m`.
    pub fn predicted_variance(&self, op: &OfdmOperator, m: usize) -> f64 {
        quad_form(&self.upsilon, &op.psi(m))
    }

    /// `ψ_m (R_g − Υ) ψ_mᴴ`.
    pub fn error_variance(&self, op: &OfdmOperator, m: usize) -> f64 {
        quad_form(&(&self.rg - &self.upsilon), &op.psi(m))
    }

    /// Trace of the prediction error covariance, `tr(R_g − Υ)`.
    pub fn error_trace(&self) -> f64 {
        (self.rg.trace() - self.upsilon.trace()).re
    }
}

/// `x A xᴴ` for a row vector `x`.
pub fn quad_form(a: &CMat, x: &CMat) -> f64 {
    (x * a * x.adjoint())[(0, 0)].re
}

/// Wiener weights `V = R_gȳ R_ȳ⁻¹` for user `d`.
///
/// The projected observation at age `a_q` is `ỹ_q = a g[i − a_q] + e_q` with
/// `a = √p M̄/M_sum` and noise `(M̄/M_sum)(σ² + si_q) I`.
pub fn wp_weights(
    stats: &ChannelStats,
    d: usize,
    alpha: f64,
    ages: &[usize],
    si: &SiProfile,
    model: &ObservationModel,
) -> Result<WpWeights> {
    check_ages(ages)?;
    si.check(ages.len())?;
    if !(alpha.abs() <= 1.0) {
        return Err(invalid("alpha", format!("|alpha| must not exceed 1, got {alpha}")));
    }
    let l = stats.taps();
    let tau = ages.len();
    let rg = stats.rg(d);
    let a = model.amplitude();

    let mut r_gy = CMat::zeros(l, l * tau);
    let mut r_y = CMat::zeros(l * tau, l * tau);
    for p in 0..tau {
        r_gy.view_mut((0, p * l), (l, l))
            .copy_from(&(&rg * re(a * alpha.powi(ages[p] as i32))));
        for q in 0..tau {
            let lag = ages[p].abs_diff(ages[q]) as i32;
            let mut block = &rg * re(a * a * alpha.powi(lag));
            if p == q {
                block += CMat::identity(l, l) * re(model.noise_variance(si.0[p]));
            }
            r_y.view_mut((p * l, q * l), (l, l)).copy_from(&block);
        }
    }
    let condition = hermitian_condition(&r_y);
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::IllConditioned {
            what: "pilot observation covariance",
            condition,
        });
    }
    let v_h = hermitian_solve(&r_y, &r_gy.adjoint(), "pilot observation covariance", false)?;
    let v = v_h.adjoint();
    let upsilon = hermitian_part(&(&v * r_gy.adjoint()));
    Ok(WpWeights {
        ages: ages.to_vec(),
        v,
        upsilon,
        rg,
        condition,
    })
}

/// Apply Wiener weights to a stack of projected observations, most recent first.
pub fn wp_predict(observations: &[&[C64]], weights: &WpWeights) -> Result<Vec<C64>> {
    let l = weights.taps();
    if observations.len() != weights.order() {
        return Err(Error::DimensionMismatch {
            what: "observation stack",
            expected: weights.order(),
            found: observations.len(),
        });
    }
    let mut out = vec![C64::new(0.0, 0.0); l];
    for (q, obs) in observations.iter().enumerate() {
        if obs.len() != l {
            return Err(Error::DimensionMismatch {
                what: "projected observation",
                expected: l,
                found: obs.len(),
            });
        }
        for (r, o) in out.iter_mut().enumerate() {
            for (c, y) in obs.iter().enumerate() {
                *o += weights.v[(r, q * l + c)] * y;
            }
        }
    }
    Ok(out)
}

/// Decision-directed Wiener predictor on one uplink subcarrier.
#[derive(Debug, Clone, PartialEq)]
pub struct DdWpWeights {
    pub ages: Vec<usize>,
    /// `D × τ`.
    pub v: CMat,
    /// `Θ = R_hs R_s⁻¹ R_hsᴴ`, `D × D`.
    pub theta: CMat,
}

impl DdWpWeights {
    pub fn order(&self) -> usize {
        self.ages.len()
    }

    /// Predicted channels of all users from the received samples, most recent first.
    pub fn predict(&self, samples: &[C64]) -> Result<Vec<C64>> {
        if samples.len() != self.order() {
            return Err(Error::DimensionMismatch {
                what: "received samples",
                expected: self.order(),
                found: samples.len(),
            });
        }
        Ok((0..self.v.nrows())
            .map(|d| (0..self.order()).map(|q| self.v[(d, q)] * samples[q]).sum())
            .collect())
    }
}

/// DD-WP weights for one uplink subcarrier.
///
/// `symbols` is `τ × D`: row `q` holds the unit-energy symbols every user sent
/// at the observation with age `ages[q]`. The received sample is
/// `s_q = √p Σ_d x_d[q] h_d + z`, `z ~ CN(0, σ² + si_q)`.
pub fn ddwp_weights(
    stats: &ChannelStats,
    alpha: f64,
    ages: &[usize],
    symbols: &CMat,
    si: &SiProfile,
    power: f64,
    noise: f64,
) -> Result<DdWpWeights> {
    check_ages(ages)?;
    si.check(ages.len())?;
    let tau = ages.len();
    let users = stats.users();
    if symbols.nrows() != tau || symbols.ncols() != users {
        return Err(Error::DimensionMismatch {
            what: "detected symbol matrix",
            expected: tau * users,
            found: symbols.nrows() * symbols.ncols(),
        });
    }
    let amp = power.sqrt();
    let pw: Vec<f64> = ages.iter().map(|&a| alpha.powi(a as i32)).collect();
    let r_hs = CMat::from_fn(users, tau, |d, q| symbols[(q, d)].conj() * (amp * stats.rh(d) * pw[q]));
    let mut r_s = CMat::zeros(tau, tau);
    for p in 0..tau {
        for q in p..tau {
            let lag = alpha.powi(ages[p].abs_diff(ages[q]) as i32);
            let mut acc = C64::new(0.0, 0.0);
            for d in 0..users {
                acc += symbols[(p, d)] * symbols[(q, d)].conj() * stats.rh(d);
            }
            acc *= power * lag;
            if p == q {
                acc = C64::new(acc.re + noise + si.0[p], 0.0);
                r_s[(p, p)] = acc;
            } else {
                r_s[(p, q)] = acc;
                r_s[(q, p)] = acc.conj();
            }
        }
    }
    let v_h = hermitian_solve(&r_s, &r_hs.adjoint(), "received sample covariance", false)?;
    let v = v_h.adjoint();
    let theta = hermitian_part(&(&v * r_hs.adjoint()));
    Ok(DdWpWeights {
        ages: ages.to_vec(),
        v,
        theta,
    })
}

/// Kronecker building blocks of the DD-WP covariances:
/// `A = I_D ⊗ δ`, `B = [diag(x_1) … diag(x_D)]`, `C = I_D ⊗ Ξ`, `Q = R_h ⊗ I_τ`
/// with `δ_q = α^{a_q}` and `Ξ_pq = α^{|a_p − a_q|}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DdBlocks {
    pub a: CMat,
    pub b: CMat,
    pub c: CMat,
    pub q: CMat,
}

pub fn dd_blocks(stats: &ChannelStats, alpha: f64, ages: &[usize], symbols: &CMat) -> Result<DdBlocks> {
    check_ages(ages)?;
    let tau = ages.len();
    let users = stats.users();
    if symbols.nrows() != tau || symbols.ncols() != users {
        return Err(Error::DimensionMismatch {
            what: "detected symbol matrix",
            expected: tau * users,
            found: symbols.nrows() * symbols.ncols(),
        });
    }
    let delta = CMat::from_fn(1, tau, |_, q| re(alpha.powi(ages[q] as i32)));
    let xi = CMat::from_fn(tau, tau, |p, q| re(alpha.powi(ages[p].abs_diff(ages[q]) as i32)));
    let eye_d = CMat::identity(users, users);
    let rh = CMat::from_fn(users, users, |r, c| if r == c { re(stats.rh(r)) } else { re(0.0) });
    let mut b = CMat::zeros(tau, users * tau);
    for d in 0..users {
        for q in 0..tau {
            b[(q, d * tau + q)] = symbols[(q, d)];
        }
    }
    Ok(DdBlocks {
        a: eye_d.kronecker(&delta),
        b,
        c: eye_d.kronecker(&xi),
        q: rh.kronecker(&CMat::identity(tau, tau)),
    })
}

impl DdBlocks {
    /// `R_hs = √p A Q Bᴴ`.
    pub fn cross_covariance(&self, power: f64) -> CMat {
        &self.a * &self.q * self.b.adjoint() * re(power.sqrt())
    }

    /// `R_s = p B C Q Bᴴ + σ² I + diag(si)`.
    pub fn sample_covariance(&self, power: f64, noise: f64, si: &SiProfile) -> CMat {
        let tau = self.b.nrows();
        let mut r = &self.b * &self.c * &self.q * self.b.adjoint() * re(power);
        for p in 0..tau {
            r[(p, p)] += re(noise + si.0[p]);
        }
        r
    }
}

/// Covariance of the predicted uplink channels of user `d` as modelled by
/// the prediction error analysis: diagonal `Θ_dd[k]`, off-diagonal
/// `(β_d/L) ψ_{m_k1} ψ_{m_k2}ᴴ`.
pub fn gamma_cov(theta_dd: &[f64], tap_variance: f64, op: &OfdmOperator, subcarriers: &[usize]) -> Result<CMat> {
    if theta_dd.len() != subcarriers.len() {
        return Err(Error::DimensionMismatch {
            what: "per-subcarrier prediction variances",
            expected: subcarriers.len(),
            found: theta_dd.len(),
        });
    }
    let n = subcarriers.len();
    let f = op.f_psi();
    let l = op.taps();
    Ok(CMat::from_fn(n, n, |r, c| {
        if r == c {
            re(theta_dd[r])
        } else {
            let mut acc = C64::new(0.0, 0.0);
            for t in 0..l {
                acc += f[(subcarriers[r], t)] * f[(subcarriers[c], t)].conj();
            }
            acc * tap_variance
        }
    }))
}

/// Least-squares tap recovery `J = (AᴴA)⁻¹Aᴴ`, `A = Φ F Ψ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LsRecovery {
    subcarriers: Vec<usize>,
    j: CMat,
}

impl LsRecovery {
    pub fn new(op: &OfdmOperator, subcarriers: &[usize]) -> Result<Self> {
        let l = op.taps();
        if subcarriers.len() < l {
            return Err(Error::Underdetermined {
                taps: l,
                available: subcarriers.len(),
            });
        }
        let a = CMat::from_fn(subcarriers.len(), l, |k, t| op.f_psi()[(subcarriers[k], t)]);
        let gram = a.adjoint() * &a;
        let j = hermitian_solve(&gram, &a.adjoint(), "partial DFT Gram matrix", true)?;
        Ok(Self {
            subcarriers: subcarriers.to_vec(),
            j,
        })
    }

    pub fn matrix(&self) -> &CMat {
        &self.j
    }

    pub fn subcarriers(&self) -> &[usize] {
        &self.subcarriers
    }

    /// Spectral norm of `J`.
    pub fn norm(&self) -> f64 {
        self.j.clone().singular_values().max()
    }
}

/// `ǧ = J ȟ_UL`.
pub fn dd_time_domain(h_ul: &[C64], recovery: &LsRecovery) -> Result<Vec<C64>> {
    let j = &recovery.j;
    if h_ul.len() != j.ncols() {
        return Err(Error::DimensionMismatch {
            what: "uplink channel vector",
            expected: j.ncols(),
            found: h_ul.len(),
        });
    }
    Ok((0..j.nrows())
        .map(|t| (0..j.ncols()).map(|k| j[(t, k)] * h_ul[k]).sum())
        .collect())
}

/// Predicted downlink channels `ψ_m ǧ` on the given subcarriers.
pub fn dd_dl_prediction(g: &[C64], op: &OfdmOperator, subcarriers: &[usize]) -> Vec<C64> {
    subcarriers.iter().map(|&m| op.response_at(m, g)).collect()
}

/// Predicted and error variances `(ψ_m J Γ Jᴴ ψ_mᴴ, R_h − ·)` per downlink subcarrier.
pub fn dd_dl_variances(
    gamma: &CMat,
    recovery: &LsRecovery,
    op: &OfdmOperator,
    subcarriers: &[usize],
    rh: f64,
) -> Vec<(f64, f64)> {
    let jgj = &recovery.j * gamma * recovery.j.adjoint();
    subcarriers
        .iter()
        .map(|&m| {
            let s = quad_form(&jgj, &op.psi(m));
            (s, rh - s)
        })
        .collect()
}

/// `|ψ_m J|²` for every (downlink subcarrier, uplink subcarrier) pair.
///
/// With the structured `Γ` the downlink variance collapses to
/// `R_h − Σ_k |u_mk|² (R_h − Θ_dd[k])`, which is what the simulator uses.
#[derive(Debug, Clone, PartialEq)]
pub struct DlVarianceMap {
    weights: DMatrix<f64>,
}

impl DlVarianceMap {
    pub fn new(recovery: &LsRecovery, op: &OfdmOperator, dl: &[usize]) -> Self {
        let j = &recovery.j;
        let weights = DMatrix::from_fn(dl.len(), j.ncols(), |r, k| {
            let mut acc = C64::new(0.0, 0.0);
            for t in 0..j.nrows() {
                acc += op.f_psi()[(dl[r], t)] * j[(t, k)];
            }
            acc.norm_sqr()
        });
        Self { weights }
    }

    pub fn dl_len(&self) -> usize {
        self.weights.nrows()
    }

    /// Predicted-channel variance on the `r`-th downlink subcarrier.
    pub fn predicted_variance(&self, r: usize, theta_dd: &[f64], rh: f64) -> f64 {
        let mut s = rh;
        for (k, t) in theta_dd.iter().enumerate() {
            s -= self.weights[(r, k)] * (rh - t);
        }
        s
    }
}
