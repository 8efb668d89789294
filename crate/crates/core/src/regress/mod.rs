//! Sequential (predictable) regressors.
//!
//! Every learner here follows the same contract: `predict` is a pure read,
//! `update` folds in one `(x, target)` pair, and a prediction made before
//! the k-th update depends only on the first k-1 pairs. The engine reads
//! predictions for an observation strictly before updating with it, which
//! is what makes the resulting weights predictable.
//!
//! Predictions are clamped to a declared output range so that estimates of
//! bounded quantities stay bounded no matter what the learner does
//! internally.

mod knn;
mod mlp;
mod ridge;

pub use knn::{knn_predict, KnnRegressor};
pub use mlp::MlpRegressor;
pub use ridge::RidgeSgd;

use crate::types::{Error, Real, SharedFn};

/// Boxed regressor trait object.
pub type BoxedRegressor<S> = Box<dyn SequentialRegressor<S>>;

/// Treated/control arm estimators for CATE streams.
pub type ArmPair<S> = (BoxedRegressor<S>, BoxedRegressor<S>);

pub const DEFAULT_KNN_K: usize = 50;
pub const DEFAULT_RIDGE_LR: f64 = 0.01;
pub const DEFAULT_RIDGE_L2: f64 = 1e-6;
pub const DEFAULT_MLP_HIDDEN: [usize; 3] = [64, 64, 64];
pub const DEFAULT_MLP_ADAM_LR: f64 = 1e-3;

/// Online regressor with predict/update split and a declared output range.
pub trait SequentialRegressor<S: Real>: Send {
    /// Pure read; must not change state.
    fn predict(&self, x: &[S]) -> S;

    /// Folds one observation into the state.
    fn update(&mut self, x: &[S], target: S);

    /// Declared clamp range `[lo, hi]`; every prediction lies inside it.
    fn clamp_range(&self) -> (S, S);
}

pub(crate) fn clamp_to<S: Real>(value: S, range: (S, S)) -> S {
    value.min(range.1).max(range.0)
}

/// Fixed known function; `update` is a no-op.
pub struct OracleRegressor<S> {
    f: SharedFn<S>,
}

impl<S: Real> OracleRegressor<S> {
    pub fn new(f: SharedFn<S>) -> Self {
        Self { f }
    }
}

/// Builds an oracle regressor around a fixed function.
pub fn oracle_regressor<S: Real>(f: SharedFn<S>) -> OracleRegressor<S> {
    OracleRegressor::new(f)
}

impl<S: Real> SequentialRegressor<S> for OracleRegressor<S> {
    fn predict(&self, x: &[S]) -> S {
        (self.f)(x)
    }

    fn update(&mut self, _x: &[S], _target: S) {}

    fn clamp_range(&self) -> (S, S) {
        (S::neg_infinity(), S::infinity())
    }
}

/// Predicts a fixed value; `update` is a no-op.
pub struct ConstantRegressor<S> {
    value: S,
}

impl<S: Real> ConstantRegressor<S> {
    pub fn new(value: S) -> Self {
        Self { value }
    }
}

impl<S: Real> SequentialRegressor<S> for ConstantRegressor<S> {
    fn predict(&self, _x: &[S]) -> S {
        self.value
    }

    fn update(&mut self, _x: &[S], _target: S) {}

    fn clamp_range(&self) -> (S, S) {
        (self.value, self.value)
    }
}

/// Variance estimator: an inner regressor trained on squared residuals,
/// with predictions clipped into `[floor, ceiling]`.
pub struct ClippedVarianceRegressor<S: Real> {
    inner: BoxedRegressor<S>,
    floor: S,
    ceiling: S,
}

impl<S: Real> ClippedVarianceRegressor<S> {
    pub fn new(inner: BoxedRegressor<S>, floor: S, ceiling: S) -> Result<Self, Error> {
        let floor_ok = floor > S::zero();
        if !floor_ok {
            return Err(Error::OutOfRange {
                field: "var_floor",
                got: floor.as_f64(),
                expected: "> 0",
            });
        }
        let ceiling_ok = ceiling > floor;
        if !ceiling_ok {
            return Err(Error::OutOfRange {
                field: "var_ceiling",
                got: ceiling.as_f64(),
                expected: "> var_floor",
            });
        }
        Ok(Self { inner, floor, ceiling })
    }

    /// `max(min(inner(x), ceiling), floor)`.
    pub fn predict(&self, x: &[S]) -> S {
        self.inner.predict(x).min(self.ceiling).max(self.floor)
    }

    /// Targets are squared residuals.
    pub fn update(&mut self, x: &[S], r_squared: S) {
        self.inner.update(x, r_squared);
    }

    pub fn floor(&self) -> S {
        self.floor
    }

    pub fn ceiling(&self) -> S {
        self.ceiling
    }
}

/// Clipped variance prediction as a free function.
pub fn clipped_variance_predict<S: Real>(cvr: &ClippedVarianceRegressor<S>, x: &[S]) -> S {
    cvr.predict(x)
}

/// Runtime regressor selection, mirroring the config keys
/// `regressor = {knn|ridge|mlp|oracle|constant}`.
#[derive(Clone)]
pub enum RegressorKind<S> {
    Knn { k: usize },
    Ridge { lr: S, l2: S },
    Mlp { hidden: Vec<usize>, adam_lr: S },
    Oracle(SharedFn<S>),
    Constant(Option<S>),
}

impl<S: Real> RegressorKind<S> {
    pub fn knn_default() -> Self {
        RegressorKind::Knn { k: DEFAULT_KNN_K }
    }

    pub fn ridge_default() -> Self {
        RegressorKind::Ridge { lr: S::of(DEFAULT_RIDGE_LR), l2: S::of(DEFAULT_RIDGE_L2) }
    }

    pub fn mlp_default() -> Self {
        RegressorKind::Mlp {
            hidden: DEFAULT_MLP_HIDDEN.to_vec(),
            adam_lr: S::of(DEFAULT_MLP_ADAM_LR),
        }
    }

    /// Builds a learner for `dim`-dimensional contexts. `cold_start` is the
    /// prediction before any data; `clamp` is the declared output range
    /// (the MLP is already bounded in (0,1) by its sigmoid output). A
    /// `Constant(None)` kind predicts the cold-start value forever.
    pub fn build(
        &self,
        dim: usize,
        clamp: (S, S),
        cold_start: S,
        seed: u64,
    ) -> Result<BoxedRegressor<S>, Error> {
        Ok(match self {
            RegressorKind::Knn { k } => {
                Box::new(KnnRegressor::new(dim, *k, cold_start, clamp)?)
            }
            RegressorKind::Ridge { lr, l2 } => {
                Box::new(RidgeSgd::new(dim, *lr, *l2, clamp)?)
            }
            RegressorKind::Mlp { hidden, adam_lr } => {
                Box::new(MlpRegressor::new(dim, hidden, *adam_lr, seed)?)
            }
            RegressorKind::Oracle(f) => Box::new(OracleRegressor::new(f.clone())),
            RegressorKind::Constant(v) => Box::new(ConstantRegressor::new(v.unwrap_or(cold_start))),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn oracle_predicts_the_wrapped_function_and_ignores_updates() {
        let truth = |x: &[f64]| 0.5 + 0.1 * x[0];
        let mut reg = oracle_regressor::<f64>(Arc::new(truth));
        assert_eq!(reg.predict(&[2.0]), 0.7);
        reg.update(&[2.0], -100.0);
        reg.update(&[0.0], 55.0);
        assert_eq!(reg.predict(&[2.0]), 0.7);
    }

    #[test]
    fn clipping_floors_ceils_and_passes_through() {
        let floor = 0.01_f64;
        let ceiling = 1.0;
        for (inner_value, expected) in [(0.004, 0.01), (0.2, 0.2), (5.0, 1.0)] {
            let inner = Box::new(ConstantRegressor::new(inner_value));
            let cvr = ClippedVarianceRegressor::new(inner, floor, ceiling).unwrap();
            assert_eq!(clipped_variance_predict(&cvr, &[0.0]), expected);
        }
    }

    #[test]
    fn clipping_composes_with_an_oracle() {
        let inner: Box<dyn SequentialRegressor<f64>> =
            Box::new(OracleRegressor::new(Arc::new(|x: &[f64]| x[0])));
        let cvr = ClippedVarianceRegressor::new(inner, 0.01, 1.0).unwrap();
        assert_eq!(cvr.predict(&[0.0001]), 0.01);
        assert_eq!(cvr.predict(&[0.5]), 0.5);
    }

    #[test]
    fn clipping_rejects_degenerate_ranges() {
        let mk = || Box::new(ConstantRegressor::new(0.0_f64)) as Box<dyn SequentialRegressor<f64>>;
        assert!(ClippedVarianceRegressor::new(mk(), 0.0, 1.0).is_err());
        assert!(ClippedVarianceRegressor::new(mk(), 0.5, 0.5).is_err());
    }

    #[test]
    fn factory_builds_every_kind() {
        let kinds: Vec<RegressorKind<f64>> = vec![
            RegressorKind::knn_default(),
            RegressorKind::ridge_default(),
            RegressorKind::mlp_default(),
            RegressorKind::Oracle(Arc::new(|_: &[f64]| 0.25)),
            RegressorKind::Constant(None),
        ];
        for kind in kinds {
            let reg = kind.build(3, (0.0, 1.0), 0.5, 42).unwrap();
            let p = reg.predict(&[0.1, 0.2, 0.3]);
            assert!(p.is_finite());
        }
    }
}
