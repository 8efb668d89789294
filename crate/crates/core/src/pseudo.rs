//! Conditionally unbiased pseudo-outcomes.
//!
//! For CMF streams the pseudo-outcome is the outcome itself. For CATE
//! streams it is the augmented inverse-propensity construction
//!
//! ```text
//!     phi = [g1 + 1[a=1](y - g1)/pi1] - [g0 + 1[a=0](y - g0)/(1 - pi1)],
//! ```
//!
//! which has conditional mean `tau(x)` for any plug-in values `g1`, `g0` as
//! long as those were computed before the observation arrived. That
//! predictability contract is enforced by the engine, which is why this
//! module takes `g1` and `g0` as already-evaluated numbers rather than as
//! regressor handles.

use crate::types::{Error, ObservationCate, ObservationCmf, Real};

/// CMF pseudo-outcome: the identity on the outcome.
pub fn phi_cmf<S: Real>(obs: &ObservationCmf<S>) -> S {
    obs.y
}

/// CATE pseudo-outcome from predictable arm-mean estimates `g1`, `g0`.
pub fn phi_cate<S: Real>(obs: &ObservationCate<S>, g1: S, g0: S) -> Result<S, Error> {
    let propensity_ok = obs.pi1 > S::zero() && obs.pi1 < S::one();
    if !propensity_ok {
        return Err(Error::InvalidInput(format!(
            "propensity must lie in (0, 1), got {}",
            obs.pi1
        )));
    }
    let (arm1, arm0) = if obs.a {
        (g1 + (obs.y - g1) / obs.pi1, g0)
    } else {
        (g1, g0 + (obs.y - g0) / (S::one() - obs.pi1))
    };
    Ok(arm1 - arm0)
}
