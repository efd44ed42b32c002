//! Small numeric helpers shared by the link-level modules.

use nalgebra::{Cholesky, DMatrix, Dyn};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

/// Condition numbers above this are reported as errors by the predictors.
pub const MAX_CONDITION: f64 = 1e12;

/// Circularly-symmetric complex Gaussian sample with the given variance.
pub fn cn<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * s, im * s)
}

/// Unit-energy square 16-QAM symbol.
pub fn qam16<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    const LEVELS: [f64; 4] = [-3.0, -1.0, 1.0, 3.0];
    let k: u8 = rng.gen_range(0..16);
    let scale = 1.0 / 10f64.sqrt();
    C64::new(LEVELS[(k & 3) as usize] * scale, LEVELS[(k >> 2) as usize] * scale)
}

/// `e^{j 2π num / den}` with the phase reduced modulo `den` first so large
/// index products keep full precision.
pub fn twiddle(num: i64, den: usize) -> C64 {
    let r = num.rem_euclid(den as i64) as f64;
    C64::from_polar(1.0, 2.0 * std::f64::consts::PI * r / den as f64)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * db_to_linear(dbm)
}

/// Ratio of extreme eigenvalues of a Hermitian positive-definite matrix.
pub fn hermitian_condition(a: &CMat) -> f64 {
    let ev = a.clone().symmetric_eigenvalues();
    let max = ev.iter().cloned().fold(f64::MIN, f64::max);
    let min = ev.iter().cloned().fold(f64::MAX, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Cheap condition estimate from Cholesky pivots: `(max L_ii / min L_ii)^2`.
/// This is a lower bound on the true 2-norm condition number.
pub fn cholesky_condition(chol: &Cholesky<C64, Dyn>) -> f64 {
    let l = chol.l_dirty();
    let n = l.nrows();
    let mut lo = f64::MAX;
    let mut hi = 0.0f64;
    for i in 0..n {
        let d = l[(i, i)].re;
        lo = lo.min(d);
        hi = hi.max(d);
    }
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        (hi / lo).powi(2)
    }
}

/// Solve `A X = B` for Hermitian positive-definite `A`.
///
/// With `exact_condition` the eigenvalue ratio is checked, otherwise the
/// pivot estimate. Either way a condition above [`MAX_CONDITION`] is an error.
pub fn hermitian_solve(a: &CMat, b: &CMat, what: &'static str, exact_condition: bool) -> Result<CMat> {
    let chol = Cholesky::new(a.clone()).ok_or(Error::Singular { what })?;
    let condition = if exact_condition {
        hermitian_condition(a)
    } else {
        cholesky_condition(&chol)
    };
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::IllConditioned { what, condition });
    }
    Ok(chol.solve(b))
}

/// Hermitian part, used to scrub rounding asymmetry from covariance products.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()) * C64::new(0.5, 0.0)
}
