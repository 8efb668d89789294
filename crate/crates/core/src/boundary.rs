//! Time-uniform Gaussian-mixture boundary.
//!
//! The half-width at time `t` with running variance estimate `x` is
//!
//! ```text
//!     l(t, x) = sqrt( 2(t*x*rho^2 + 1) / (t^2 rho^2)
//!                     * log(1 + sqrt(t*x*rho^2 + 1) / (2*alpha)) )
//! ```
//!
//! and the lower bound on the average drift is `psi_bar - l(t, x)`. The
//! parameter `rho` picks the time where the bound is tightest;
//! [`rho_for_target_time`] inverts that relationship,
//!
//! ```text
//!     rho(t*, alpha) = sqrt( (-2 log(2a) + log(-2 log(2a) + 1)) / t* ).
//! ```
//!
//! The log term is evaluated with `ln_1p` so that the boundary stays
//! accurate for alpha down to 1e-8. A zero variance estimate is legitimate
//! (it occurs before any nonzero residual) and returns the finite `x = 0`
//! limit of the formula.

use serde::{Deserialize, Serialize};

use crate::types::{Error, Real};

/// Boundary tunables: error tolerance and the tightening parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryParams<S> {
    pub alpha: S,
    pub rho: S,
}

impl<S: Real> BoundaryParams<S> {
    pub fn new(alpha: S, rho: S) -> Result<Self, Error> {
        check_alpha_rho(alpha, rho)?;
        Ok(Self { alpha, rho })
    }

    pub fn half_width(&self, t: u64, vhat: S) -> Result<S, Error> {
        mixture_half_width(t, vhat, self.alpha, self.rho)
    }

    pub fn lower_bound(&self, psi_bar: S, t: u64, vhat: S) -> Result<S, Error> {
        lower_bound(psi_bar, t, vhat, self.alpha, self.rho)
    }
}

fn check_alpha_rho<S: Real>(alpha: S, rho: S) -> Result<(), Error> {
    let alpha_ok = alpha.is_finite() && alpha > S::zero() && alpha < S::one();
    if !alpha_ok {
        return Err(Error::OutOfRange {
            field: "alpha",
            got: alpha.as_f64(),
            expected: "open interval (0, 1)",
        });
    }
    let rho_ok = rho.is_finite() && rho > S::zero();
    if !rho_ok {
        return Err(Error::OutOfRange { field: "rho", got: rho.as_f64(), expected: "> 0" });
    }
    Ok(())
}

/// Mixture boundary half-width at time `t >= 1` for variance estimate
/// `vhat >= 0`. Strictly positive, increasing in `vhat`, decreasing in
/// `alpha`, and shrinking to zero as `t` grows for bounded `vhat`.
pub fn mixture_half_width<S: Real>(t: u64, vhat: S, alpha: S, rho: S) -> Result<S, Error> {
    if t == 0 {
        return Err(Error::InvalidInput("boundary time t must be >= 1".into()));
    }
    let vhat_ok = vhat.is_finite() && vhat >= S::zero();
    if !vhat_ok {
        return Err(Error::InvalidInput(format!("variance estimate must be >= 0, got {vhat}")));
    }
    check_alpha_rho(alpha, rho)?;

    let tf = S::from_count(t);
    let u = tf * vhat * rho * rho + S::one();
    let scale = S::two() * u / (tf * tf * rho * rho);
    let log_term = (u.sqrt() / (S::two() * alpha)).ln_1p();
    Ok((scale * log_term).sqrt())
}

/// The `rho` that makes the boundary tightest near time `t_star`.
///
/// Only defined for `alpha < 0.5`; at 0.5 and above the numerator is no
/// longer positive.
pub fn rho_for_target_time<S: Real>(t_star: u64, alpha: S) -> Result<S, Error> {
    if t_star == 0 {
        return Err(Error::InvalidInput("target time t_star must be >= 1".into()));
    }
    let alpha_ok = alpha.is_finite() && alpha > S::zero() && alpha < S::half();
    if !alpha_ok {
        return Err(Error::InvalidInput(format!(
            "rho tuning requires alpha in (0, 0.5), got {alpha}"
        )));
    }
    let neg_two_log = -S::two() * (S::two() * alpha).ln();
    let numerator = neg_two_log + (neg_two_log + S::one()).ln();
    Ok((numerator / S::from_count(t_star)).sqrt())
}

/// Lower bound on the average conditional drift: `psi_bar - l(t, vhat)`.
/// Always strictly below `psi_bar`.
pub fn lower_bound<S: Real>(psi_bar: S, t: u64, vhat: S, alpha: S, rho: S) -> Result<S, Error> {
    Ok(psi_bar - mixture_half_width(t, vhat, alpha, rho)?)
}
