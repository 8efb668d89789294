//! Predictable weights: the raw variance-scaled ratio, magnitude
//! thresholding, and the decaying floor schedule.
//!
//! The raw weight `(tau_hat(x) - f(x)) / v_hat(x)` points the martingale in
//! the direction of the suspected alternative; thresholding forces
//! `|w| >= eps_t` so that cumulative variances diverge. The sign convention
//! at zero is `sgn(0) := +1`, which keeps the floor intact where
//! `sgn(0) = 0` would break it; under the null the drift is zero either
//! way.

use serde::{Deserialize, Serialize};

use crate::types::{Error, Real};

/// Weight-floor schedule `eps_t = c0 * t^-gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule<S> {
    pub c0: S,
    pub gamma: S,
}

impl<S: Real> EpsilonSchedule<S> {
    pub fn new(c0: S, gamma: S) -> Result<Self, Error> {
        let c0_ok = c0.is_finite() && c0 > S::zero();
        if !c0_ok {
            return Err(Error::OutOfRange { field: "c0", got: c0.as_f64(), expected: "> 0" });
        }
        let gamma_ok = gamma.is_finite() && gamma >= S::zero();
        if !gamma_ok {
            return Err(Error::OutOfRange { field: "gamma", got: gamma.as_f64(), expected: ">= 0" });
        }
        Ok(Self { c0, gamma })
    }

    /// Floor at step `t >= 1`; positive and nonincreasing in `t`.
    pub fn at(&self, t: u64) -> S {
        debug_assert!(t >= 1);
        self.c0 * S::from_count(t).powf(-self.gamma)
    }
}

/// Schedule value at step `t`.
pub fn epsilon_at<S: Real>(sched: &EpsilonSchedule<S>, t: u64) -> S {
    sched.at(t)
}

/// Raw ratio weight `(tau_hat_x - f_x) / v_hat_x`.
pub fn raw_weight<S: Real>(tau_hat_x: S, f_x: S, v_hat_x: S) -> Result<S, Error> {
    let variance_ok = v_hat_x > S::zero();
    if !variance_ok {
        return Err(Error::InvalidInput(format!(
            "variance estimate must be positive, got {v_hat_x}"
        )));
    }
    Ok((tau_hat_x - f_x) / v_hat_x)
}

/// Clamps the weight magnitude up to `eps`, keeping the sign (with
/// `sgn(0) := +1`).
pub fn threshold_weight<S: Real>(w_tilde: S, eps: S) -> S {
    debug_assert!(eps > S::zero());
    let magnitude = w_tilde.abs().max(eps);
    if w_tilde < S::zero() {
        -magnitude
    } else {
        magnitude
    }
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn schedule_matches_direct_evaluation() {
        let sched = EpsilonSchedule::new(0.1_f64, 0.24).unwrap();
        assert_eq!(sched.at(1), 0.1);
        // 0.1 * 10000^-0.24, high-precision reference value.
        assert!((sched.at(10_000) - 0.010_964_781_961_431_85).abs() < 1e-15);
        let flat = EpsilonSchedule::new(0.1_f64, 0.0).unwrap();
        assert_eq!(flat.at(1), 0.1);
        assert_eq!(flat.at(123_456), 0.1);
    }

    #[test]
    fn schedule_validates_ranges() {
        assert!(EpsilonSchedule::new(0.0_f64, 0.24).is_err());
        assert!(EpsilonSchedule::new(0.1_f64, -0.1).is_err());
    }

    #[test]
    fn raw_weight_forced_arithmetic() {
        assert!((raw_weight(0.6_f64, 0.5, 0.04).unwrap() - 2.5).abs() < 1e-14);
        assert_eq!(raw_weight(0.5_f64, 0.5, 0.04).unwrap(), 0.0);
        assert!((raw_weight(0.3_f64, 0.5, 0.01).unwrap() + 20.0).abs() < 1e-13);
        assert!(raw_weight(0.3_f64, 0.5, 0.0).is_err());
        assert!(raw_weight(0.3_f64, 0.5, -0.01).is_err());
    }

    #[test]
    fn thresholding_keeps_sign_and_floors_magnitude() {
        assert_eq!(threshold_weight(0.3_f64, 0.1), 0.3);
        assert_eq!(threshold_weight(-0.05_f64, 0.1), -0.1);
        // sgn(0) := +1 keeps the floor positive at an exact tie.
        assert_eq!(threshold_weight(0.0_f64, 0.1), 0.1);
    }

    proptest! {
        #[test]
        fn thresholded_magnitude_never_drops_below_eps(
            w in -100.0f64..100.0,
            eps in 1e-6f64..10.0,
        ) {
            let out = threshold_weight(w, eps);
            prop_assert!(out.abs() >= eps);
            if w != 0.0 {
                prop_assert_eq!(out.signum(), w.signum());
            } else {
                prop_assert!(out > 0.0);
            }
        }

        #[test]
        fn thresholding_is_identity_above_the_floor(
            w in -100.0f64..100.0,
            eps in 1e-6f64..10.0,
        ) {
            prop_assume!(w.abs() >= eps);
            prop_assert_eq!(threshold_weight(w, eps), w);
        }

        #[test]
        fn raw_weight_scales_inversely_in_the_variance(
            tau in -5.0f64..5.0,
            f in -5.0f64..5.0,
            v in 1e-4f64..10.0,
            lambda in 0.1f64..10.0,
        ) {
            let base = raw_weight(tau, f, v).unwrap();
            let scaled = raw_weight(tau, f, lambda * v).unwrap();
            prop_assert!((scaled - base / lambda).abs() <= 1e-9 * base.abs().max(1.0));
        }

        #[test]
        fn schedule_is_positive_and_nonincreasing(
            c0 in 1e-4f64..10.0,
            gamma in 0.0f64..0.9,
            t in 1u64..100_000,
        ) {
            let sched = EpsilonSchedule::new(c0, gamma).unwrap();
            let now = sched.at(t);
            let next = sched.at(t + 1);
            prop_assert!(now > 0.0);
            prop_assert!(next <= now);
        }
    }
}
