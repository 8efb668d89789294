//! Sequential anytime-valid testing for conditional mean functions.
//!
//! This crate tests the global null `H(f): tau(x) = f(x)`, where `tau` is
//! either a conditional mean function (CMF, streams of `(x, y)`) or a
//! conditional average treatment effect (CATE, streams of `(x, a, y)` with
//! known propensities). The test accumulates a weighted martingale
//!
//! ```text
//!     psi_t(f) = sum_{i<=t} w_i(x_i, f) * (phi_i - f(x_i))
//! ```
//!
//! with predictable weights driven by online regression estimates of `tau`
//! and its conditional variance, and rejects as soon as a time-uniform
//! Gaussian-mixture lower bound on the average drift crosses zero after a
//! burn-in time. Inverting the test over a grid of constants yields
//! confidence sequences for constant nulls.
//!
//! All numeric kernels are generic over the scalar type through [`Real`]
//! (`f32` or `f64`); the aliases at the crate root fix `f64`, which is the
//! precision used by the command-line harness.

pub mod baseline;
pub mod boundary;
pub mod confseq;
pub mod dgp;
pub mod engine;
pub mod pseudo;
pub mod regress;
pub mod types;
pub mod weights;

pub use types::{Error, Real};

/// Double-precision aliases for the main surface types.
pub type ObservationCmf = types::ObservationCmf<f64>;
pub type ObservationCate = types::ObservationCate<f64>;
pub type Observation = types::Observation<f64>;
pub type NullSpec = types::NullSpec<f64>;
pub type TestConfig = types::TestConfig<f64>;
pub type StepRecord = types::StepRecord<f64>;
pub type EpsilonSchedule = weights::EpsilonSchedule<f64>;
pub type BoundaryParams = boundary::BoundaryParams<f64>;
pub type TestState = engine::TestState<f64>;
pub type TestBundle = engine::TestBundle<f64>;
pub type GridCs = confseq::GridCs<f64>;
pub type ShapeSpec = dgp::ShapeSpec<f64>;
pub type Dgp2Spec = dgp::Dgp2Spec<f64>;
pub type BinnedTest = baseline::BinnedTest<f64>;
