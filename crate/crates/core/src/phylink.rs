//! Precoding, combining, self-interference and rate expressions.
//!
//! Downlink uses ZF precoding on the predicted channels with each column
//! scaled to norm `1/√D`; terminals detect with the mean effective gain
//! only, which gives the usual use-and-forget lower bound. Uplink uses MRC
//! with the predicted channels as combiners. Rates are per subcarrier and
//! per symbol in bits/s/Hz.

use nalgebra::Cholesky;

use crate::error::{invalid, Error, Result};
use crate::frames::{FrameSchedule, UlActivity};
use crate::math::{hermitian_condition, CMat, C64};

/// ZF instances with a Gram condition number above this are discarded.
pub const ZF_MAX_CONDITION: f64 = 1e10;

/// Minimum number of samples behind a Monte Carlo rate.
pub const MIN_MC_TRIALS: usize = 100;

/// Per-subcarrier powers and residual SI ratios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerConfig {
    pub p_dl: f64,
    pub p_ul: f64,
    pub noise: f64,
    pub xi_bs: f64,
    pub xi_mt: f64,
}

impl PowerConfig {
    /// Split the total powers equally over `m_dl` and `m_ul` subcarriers.
    pub fn split(
        total_dl: f64,
        total_ul: f64,
        m_dl: usize,
        m_ul: usize,
        noise: f64,
        xi_bs: f64,
        xi_mt: f64,
    ) -> Result<Self> {
        if m_dl == 0 || m_ul == 0 {
            return Err(invalid("subcarriers", "both directions need subcarriers"));
        }
        let p = Self {
            p_dl: total_dl / m_dl as f64,
            p_ul: total_ul / m_ul as f64,
            noise,
            xi_bs,
            xi_mt,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (f, v) in [("p_dl", self.p_dl), ("p_ul", self.p_ul), ("noise", self.noise)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(f, "must be positive"));
            }
        }
        for (f, v) in [("xi_bs", self.xi_bs), ("xi_mt", self.xi_mt)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(f, "residual SI ratio must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Residual SI power at a terminal: `ξ_MT p_UL M̄`.
pub fn mt_si_power(xi_mt: f64, p_ul: f64, m_ul: usize) -> f64 {
    xi_mt * p_ul * m_ul as f64
}

/// Residual SI power per BS antenna: `ξ_BS p_DL Σ_m ‖F_m‖_F²`, which is
/// `ξ_BS p_DL M` for unit-Frobenius-norm precoders.
pub fn bs_si_power(xi_bs: f64, p_dl: f64, precoders: &[CMat]) -> f64 {
    xi_bs * p_dl * precoders.iter().map(|f| f.norm_squared()).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZfPrecoder {
    /// `N × D`, columns of norm `1/√D`.
    pub f: CMat,
    /// Column norms before normalisation.
    pub raw_norms: Vec<f64>,
    pub condition: f64,
}

/// ZF precoder for a `D × N` matrix whose rows are `ĥ_dᴴ`.
pub fn zf_precoder(h_hat: &CMat) -> Result<ZfPrecoder> {
    let d = h_hat.nrows();
    if d == 0 || d > h_hat.ncols() {
        return Err(invalid(
            "precoder",
            format!("need 1 <= D <= N, got {}x{}", d, h_hat.ncols()),
        ));
    }
    let gram = h_hat * h_hat.adjoint();
    let condition = hermitian_condition(&gram);
    if !condition.is_finite() || condition > ZF_MAX_CONDITION {
        return Err(Error::IllConditioned {
            what: "ZF Gram matrix",
            condition,
        });
    }
    let chol = Cholesky::new(gram).ok_or(Error::Singular { what: "ZF Gram matrix" })?;
    let raw = h_hat.adjoint() * chol.inverse();
    let scale = 1.0 / (d as f64).sqrt();
    let mut f = raw.clone();
    let mut raw_norms = Vec::with_capacity(d);
    for k in 0..d {
        let n = raw.column(k).norm();
        raw_norms.push(n);
        f.column_mut(k).scale_mut(scale / n);
    }
    Ok(ZfPrecoder {
        f,
        raw_norms,
        condition,
    })
}

/// Effective ZF gains `ω_dk = h_dᴴ f_k` for the true channel rows `h_dᴴ`
/// (`D × N`) and predicted rows (`D × N`). Returns `None` for a degenerate
/// prediction. The precoder is never formed: `‖f_k‖² = (G⁻¹)_kk` with `G = ĤĤᴴ`.
pub fn zf_effective_gains(h_true: &CMat, h_hat: &CMat) -> Option<CMat> {
    let (d, n) = h_hat.shape();
    let rows = |m: &CMat| -> Vec<C64> { (0..d * n).map(|j| m[(j / n, j % n)]).collect() };
    let mut out = vec![C64::new(0.0, 0.0); d * d];
    zf_gains_rows(&rows(h_true), &rows(h_hat), d, n, &mut out).then(|| CMat::from_row_slice(d, d, &out))
}

/// Slice form of [`zf_effective_gains`] for the simulator's inner loop.
/// Inputs and `out` (`D × D`) are row-major; returns false when degenerate.
pub fn zf_gains_rows(h_true: &[C64], h_hat: &[C64], users: usize, antennas: usize, out: &mut [C64]) -> bool {
    let (d, n) = (users, antennas);
    let dot = |a: &[C64], b: &[C64]| -> C64 {
        let mut s = C64::new(0.0, 0.0);
        for (x, y) in a.iter().zip(b) {
            s += x * y.conj();
        }
        s
    };
    let mut gram = CMat::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let v = dot(&h_hat[i * n..(i + 1) * n], &h_hat[j * n..(j + 1) * n]);
            gram[(i, j)] = v;
            gram[(j, i)] = v.conj();
        }
    }
    let Some(chol) = Cholesky::new(gram) else {
        return false;
    };
    let l = chol.l_dirty();
    let (mut lo, mut hi) = (f64::MAX, 0.0f64);
    for i in 0..d {
        lo = lo.min(l[(i, i)].re);
        hi = hi.max(l[(i, i)].re);
    }
    if !(lo > 0.0) || (hi / lo).powi(2) > ZF_MAX_CONDITION {
        return false;
    }
    let ginv = chol.inverse();
    let scale = 1.0 / (d as f64).sqrt();
    let col_scale: Vec<f64> = (0..d).map(|k| scale / ginv[(k, k)].re.sqrt()).collect();
    let mut t = vec![C64::new(0.0, 0.0); d];
    for i in 0..d {
        let hi_row = &h_true[i * n..(i + 1) * n];
        for (j, tj) in t.iter_mut().enumerate() {
            *tj = dot(hi_row, &h_hat[j * n..(j + 1) * n]);
        }
        for k in 0..d {
            let mut s = C64::new(0.0, 0.0);
            for (j, tj) in t.iter().enumerate() {
                s += tj * ginv[(j, k)];
            }
            out[i * d + k] = s * col_scale[k];
        }
    }
    true
}

/// Approximate moments of the ZF effective gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveGainMoments {
    pub mean: f64,
    pub variance: f64,
    pub leakage: f64,
}

/// `E[ω_dd] ≈ √((N−D+1)/D) σ_ȟ`, `var ≈ (σ²_ȟ/4 + σ²_v̌)/D`, `E|ω_dk|² = σ²_v̌/D`.
pub fn effective_gain_moments(sigma_h2: f64, sigma_v2: f64, antennas: usize, users: usize) -> EffectiveGainMoments {
    let n = antennas as f64;
    let d = users as f64;
    EffectiveGainMoments {
        mean: ((n - d + 1.0) / d).sqrt() * sigma_h2.max(0.0).sqrt(),
        variance: (0.25 * sigma_h2 + sigma_v2) / d,
        leakage: sigma_v2 / d,
    }
}

/// Downlink rate from effective-gain moments.
pub fn dl_rate_from_moments(m: &EffectiveGainMoments, users: usize, p_dl: f64, si_mt: f64, noise: f64) -> f64 {
    let signal = p_dl * m.mean * m.mean;
    let interference = p_dl * m.variance + p_dl * (users as f64 - 1.0) * m.leakage;
    (1.0 + signal / (interference + si_mt + noise)).log2()
}

/// Closed-form downlink lower bound with predicted-channel variance `sigma_h2`:
/// `log2(1 + p(N−D+1)σ²_ȟ / (p σ²_ȟ/4 + p D (R_h−σ²_ȟ) + D SI + D σ²))`.
/// Pass `si_mt = 0` when no uplink runs concurrently.
pub fn dl_rate_closed(sigma_h2: f64, rh: f64, antennas: usize, users: usize, p_dl: f64, si_mt: f64, noise: f64) -> f64 {
    let n = antennas as f64;
    let d = users as f64;
    let sv = rh - sigma_h2;
    let num = p_dl * (n - d + 1.0) * sigma_h2;
    let den = 0.25 * p_dl * sigma_h2 + p_dl * d * sv + d * si_mt + d * noise;
    (1.0 + num / den).log2()
}

/// Closed-form uplink MRC lower bound:
/// `log2(1 + p N Θ_dd / (p Σ_{k≠d} R_h^k + SI + σ²))`.
pub fn ul_rate_closed(theta_dd: f64, other_rh: f64, antennas: usize, p_ul: f64, si_bs: f64, noise: f64) -> f64 {
    let num = p_ul * antennas as f64 * theta_dd;
    (1.0 + num / (p_ul * other_rh + si_bs + noise)).log2()
}

/// Running sums for one downlink (user, symbol, subcarrier) cell.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DlMoments {
    pub gain: C64,
    pub gain_sq: f64,
    pub leakage: f64,
    pub count: u64,
}

impl DlMoments {
    /// Add one realisation: own gain `ω_dd` and `Σ_{k≠d} |ω_dk|²`.
    pub fn push(&mut self, omega_dd: C64, leakage: f64) {
        self.gain += omega_dd;
        self.gain_sq += omega_dd.norm_sqr();
        self.leakage += leakage;
        self.count += 1;
    }

    pub fn merge(&mut self, other: &Self) {
        self.gain += other.gain;
        self.gain_sq += other.gain_sq;
        self.leakage += other.leakage;
        self.count += other.count;
    }

    /// `log2(1 + p|E ω|² / (p var ω + p Σ E|ω_dk|² + SI + σ²))`.
    pub fn rate(&self, p_dl: f64, si_mt: f64, noise: f64) -> Result<f64> {
        if (self.count as usize) < MIN_MC_TRIALS {
            return Err(Error::TooFewTrials {
                trials: self.count as usize,
                min: MIN_MC_TRIALS,
            });
        }
        let n = self.count as f64;
        let mean = self.gain / n;
        let var = (self.gain_sq / n - mean.norm_sqr()).max(0.0);
        let leak = self.leakage / n;
        Ok((1.0 + p_dl * mean.norm_sqr() / (p_dl * var + p_dl * leak + si_mt + noise)).log2())
    }
}

/// Running sums for one uplink (user, symbol, subcarrier) cell.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UlMoments {
    pub norm2: f64,
    pub norm4: f64,
    pub count: u64,
}

impl UlMoments {
    /// Add one realisation of `‖ȟ_d‖²`.
    pub fn push(&mut self, norm2: f64) {
        self.norm2 += norm2;
        self.norm4 += norm2 * norm2;
        self.count += 1;
    }

    pub fn merge(&mut self, other: &Self) {
        self.norm2 += other.norm2;
        self.norm4 += other.norm4;
        self.count += other.count;
    }

    /// `log2(1 + p E‖ȟ‖⁴ / (p Σ_{k≠d} R_h^k E‖ȟ‖² + (SI + σ²) E‖ȟ‖²))`.
    pub fn rate(&self, p_ul: f64, other_rh: f64, si_bs: f64, noise: f64) -> Result<f64> {
        if (self.count as usize) < MIN_MC_TRIALS {
            return Err(Error::TooFewTrials {
                trials: self.count as usize,
                min: MIN_MC_TRIALS,
            });
        }
        let n = self.count as f64;
        let e2 = self.norm2 / n;
        let e4 = self.norm4 / n;
        if e2 == 0.0 {
            return Ok(0.0);
        }
        Ok((1.0 + p_ul * e4 / ((p_ul * other_rh + si_bs + noise) * e2)).log2())
    }
}

/// Monte Carlo downlink lower bound per user from paired realisations of
/// true and predicted channel matrices (`D × N`, rows `h_dᴴ`). Degenerate
/// ZF instances are skipped.
pub fn dl_rate_mc(true_channels: &[CMat], predicted: &[CMat], p_dl: f64, si_mt: f64, noise: f64) -> Result<Vec<f64>> {
    if true_channels.len() != predicted.len() {
        return Err(Error::DimensionMismatch {
            what: "channel realisations",
            expected: true_channels.len(),
            found: predicted.len(),
        });
    }
    if true_channels.len() < MIN_MC_TRIALS {
        return Err(Error::TooFewTrials {
            trials: true_channels.len(),
            min: MIN_MC_TRIALS,
        });
    }
    let users = true_channels[0].nrows();
    let mut acc = vec![DlMoments::default(); users];
    for (h, hh) in true_channels.iter().zip(predicted) {
        if let Some(omega) = zf_effective_gains(h, hh) {
            for (d, a) in acc.iter_mut().enumerate() {
                let leak: f64 = (0..users).filter(|&k| k != d).map(|k| omega[(d, k)].norm_sqr()).sum();
                a.push(omega[(d, d)], leak);
            }
        }
    }
    acc.iter().map(|a| a.rate(p_dl, si_mt, noise)).collect()
}

/// Monte Carlo uplink MRC bound per user. Channels are `N × D`, column `d`
/// is user `d`'s channel; `rh[k]` is user `k`'s per-subcarrier variance.
pub fn ul_rate_mc(predicted: &[CMat], rh: &[f64], p_ul: f64, si_bs: f64, noise: f64) -> Result<Vec<f64>> {
    if predicted.len() < MIN_MC_TRIALS {
        return Err(Error::TooFewTrials {
            trials: predicted.len(),
            min: MIN_MC_TRIALS,
        });
    }
    let users = rh.len();
    let total: f64 = rh.iter().sum();
    let mut acc = vec![UlMoments::default(); users];
    for hh in predicted {
        for (d, a) in acc.iter_mut().enumerate() {
            a.push(hh.column(d).norm_squared());
        }
    }
    acc.iter()
        .enumerate()
        .map(|(d, a)| a.rate(p_ul, total - rh[d], si_bs, noise))
        .collect()
}

/// Rates of one symbol, each summed over users and the direction's
/// subcarriers. `None` for an inactive direction.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SymbolRates {
    pub dl: Option<f64>,
    pub ul: Option<f64>,
}

/// Weighted frame average `Σ_i w_i (R_DL,i + R_UL,i) / (T M_sum)`.
pub fn frame_average(schedule: &FrameSchedule, rates: &[SymbolRates], m_sum: usize) -> Result<f64> {
    if schedule.symbols.is_empty() {
        return Ok(0.0);
    }
    if rates.len() != schedule.frame_length {
        return Err(Error::DimensionMismatch {
            what: "per-symbol rates",
            expected: schedule.frame_length,
            found: rates.len(),
        });
    }
    let mut total = 0.0;
    for (s, r) in schedule.symbols.iter().zip(rates) {
        if s.dl.is_some() {
            total += s.weight
                * r.dl.ok_or(Error::MissingRate {
                    symbol: s.index,
                    direction: "DL",
                })?;
        }
        if matches!(s.ul, UlActivity::Data(_)) {
            total += s.weight
                * r.ul.ok_or(Error::MissingRate {
                    symbol: s.index,
                    direction: "UL",
                })?;
        }
    }
    Ok(total / (schedule.frame_length * m_sum) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{build_schedule, FrameParams, Scheme};

    #[test]
    fn orthogonal_rows() {
        let r = 2.0;
        let h = CMat::from_fn(2, 4, |i, j| if i == j { C64::new(r, 0.0) } else { C64::new(0.0, 0.0) });
        let zf = zf_precoder(&h).unwrap();
        let prod = &h * &zf.f;
        // Raw columns are ĥ_k / r², of norm 1/r; rescaled to 1/√D they give Ĥ f_k = (r/√D) e_k.
        for i in 0..2 {
            for j in 0..2 {
                let e = if i == j { r / 2f64.sqrt() } else { 0.0 };
                assert!((prod[(i, j)] - C64::new(e, 0.0)).norm() < 1e-12, "{prod}");
            }
        }
        assert!((zf.f.norm_squared() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_is_reported() {
        let h = CMat::from_element(2, 4, C64::new(1.0, 0.0));
        assert!(zf_precoder(&h).is_err());
        assert!(zf_effective_gains(&h, &h).is_none());
    }

    #[test]
    fn closed_forms_at_zero() {
        assert_eq!(dl_rate_closed(0.0, 1e-9, 32, 8, 1.0 / 64.0, 1e-13, 4e-13), 0.0);
        assert_eq!(ul_rate_closed(0.0, 1e-9, 32, 0.1 / 32.0, 1e-13, 4e-13), 0.0);
    }

    #[test]
    fn moments_form_equals_closed_form() {
        let (sh, rh) = (0.7e-9, 1e-9);
        let m = effective_gain_moments(sh, rh - sh, 32, 8);
        let a = dl_rate_from_moments(&m, 8, 1.0 / 64.0, 1e-13, 4e-13);
        let b = dl_rate_closed(sh, rh, 32, 8, 1.0 / 64.0, 1e-13, 4e-13);
        assert!((a - b).abs() < 1e-12);
        let perfect = effective_gain_moments(rh, 0.0, 32, 8);
        assert_eq!(perfect.leakage, 0.0);
        assert!((perfect.mean - (25.0f64 / 8.0).sqrt() * rh.sqrt()).abs() < 1e-18);
    }

    #[test]
    fn si_powers() {
        assert_eq!(mt_si_power(0.0, 0.1 / 32.0, 32), 0.0);
        assert!((mt_si_power(1e-12, 0.1 / 32.0, 32) - 1e-13).abs() < 1e-25);
        let unit = CMat::from_element(32, 8, C64::new(1.0 / 16.0, 0.0));
        let pre = vec![unit; 64];
        assert!((bs_si_power(1e-13, 1.0 / 64.0, &pre) - 1e-13).abs() < 1e-25);
        assert_eq!(bs_si_power(0.0, 1.0 / 64.0, &pre), 0.0);
    }

    #[test]
    fn few_trials_rejected() {
        let h = vec![CMat::identity(1, 2); 10];
        assert!(matches!(
            dl_rate_mc(&h, &h, 1.0, 0.0, 1.0),
            Err(Error::TooFewTrials { .. })
        ));
        assert!(matches!(
            ul_rate_mc(&h, &[1.0], 1.0, 0.0, 1.0),
            Err(Error::TooFewTrials { .. })
        ));
    }

    #[test]
    fn frame_average_uniform_rates() {
        let p = FrameParams::default();
        let s = build_schedule(Scheme::Mdd1 { order: Some(7) }, 28, &p).unwrap();
        let r = 2.5;
        let rates: Vec<SymbolRates> = (1..=28)
            .map(|i| SymbolRates {
                dl: (i > 7).then_some(r * 8.0 * 64.0),
                ul: None,
            })
            .collect();
        let avg = frame_average(&s, &rates, 96).unwrap();
        assert!((avg - r * 8.0 * 21.0 * 64.0 / (28.0 * 96.0)).abs() < 1e-12);

        let t = build_schedule(Scheme::Tdd1, 28, &p).unwrap();
        let rates: Vec<SymbolRates> = (1..=28)
            .map(|i| SymbolRates {
                dl: (i > 7).then_some(96.0),
                ul: None,
            })
            .collect();
        assert!((frame_average(&t, &rates, 96).unwrap() - 20.0 / 28.0).abs() < 1e-12);

        let mut missing = rates.clone();
        missing[10].dl = None;
        assert!(matches!(
            frame_average(&t, &missing, 96),
            Err(Error::MissingRate { symbol: 11, .. })
        ));
    }
}
