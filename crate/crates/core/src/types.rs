//! Domain types, configuration, and validation shared by all modules.
//!
//! Two stream flavors exist: CMF streams carry `(x, y)` pairs and test the
//! conditional mean `E[Y|X=x]`; CATE streams carry `(x, a, y)` with a known
//! treatment propensity and test the contrast `E[Y|X=x,A=1] - E[Y|X=x,A=0]`.
//! The null hypothesis is a bounded function `f` with `|f(x)| <= B`.

use std::fmt;
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};
use std::sync::Arc;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Scalar type for all numeric kernels: `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + fmt::Debug
    + fmt::Display
    + fmt::LowerExp
    + Send
    + Sync
    + 'static
{
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 converts to Real")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }

    /// Lossless for counts below 2^53; times and sample sizes stay well under.
    fn from_count(n: u64) -> Self {
        Self::of(n as f64)
    }

    fn half() -> Self {
        Self::of(0.5)
    }

    fn two() -> Self {
        Self::of(2.0)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Shared function handle over context vectors: callable nulls, oracle
/// regressors, and generator components.
pub type SharedFn<S> = Arc<dyn Fn(&[S]) -> S + Send + Sync>;

/// Errors shared by the statistical modules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{field} out of range: got {got}, expected {expected}")]
    OutOfRange {
        field: &'static str,
        got: f64,
        expected: &'static str,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("null evaluation {value} exceeds declared sup-norm bound {bound}")]
    BoundViolated { value: f64, bound: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("stream kind mismatch: this test consumes {expected} observations")]
    StreamKindMismatch { expected: &'static str },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

fn require_finite<S: Real>(value: S, field: &'static str) -> Result<(), Error> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(field))
    }
}

/// One CMF stream element: context vector and outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationCmf<S> {
    pub x: Vec<S>,
    pub y: S,
}

impl<S: Real> ObservationCmf<S> {
    pub fn new(x: Vec<S>, y: S) -> Result<Self, Error> {
        for &xi in &x {
            require_finite(xi, "x")?;
        }
        require_finite(y, "y")?;
        Ok(Self { x, y })
    }
}

/// One CATE stream element: context, binary treatment, outcome, and the
/// known propensity `pi1 = P(A=1 | X=x)`. The untreated propensity is
/// `1 - pi1`; both are strictly positive because `pi1` lies in (0,1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationCate<S> {
    pub x: Vec<S>,
    pub a: bool,
    pub y: S,
    pub pi1: S,
}

impl<S: Real> ObservationCate<S> {
    pub fn new(x: Vec<S>, a: bool, y: S, pi1: S) -> Result<Self, Error> {
        for &xi in &x {
            require_finite(xi, "x")?;
        }
        require_finite(y, "y")?;
        require_finite(pi1, "pi1")?;
        if pi1 <= S::zero() || pi1 >= S::one() {
            return Err(Error::OutOfRange {
                field: "pi1",
                got: pi1.as_f64(),
                expected: "open interval (0, 1)",
            });
        }
        Ok(Self { x, a, y, pi1 })
    }
}

/// A stream element of either flavor.
#[derive(Debug, Clone, PartialEq)]
pub enum Observation<S> {
    Cmf(ObservationCmf<S>),
    Cate(ObservationCate<S>),
}

impl<S> Observation<S> {
    pub fn x(&self) -> &[S] {
        match self {
            Observation::Cmf(o) => &o.x,
            Observation::Cate(o) => &o.x,
        }
    }
}

/// The function under test, with its declared sup-norm bound.
#[derive(Clone)]
pub struct NullSpec<S> {
    kind: NullKind<S>,
    bound: S,
}

#[derive(Clone)]
enum NullKind<S> {
    Constant(S),
    /// Rows of `(x, f(x))`; evaluation returns the value of the nearest row
    /// (first row on distance ties), covering finite context spaces.
    Tabulated(Arc<Vec<(Vec<S>, S)>>),
    Callable(SharedFn<S>),
}

impl<S: fmt::Debug> fmt::Debug for NullSpec<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            NullKind::Constant(c) => write!(f, "NullSpec::constant({c:?}, bound {:?})", self.bound),
            NullKind::Tabulated(rows) => {
                write!(f, "NullSpec::tabulated({} rows, bound {:?})", rows.len(), self.bound)
            }
            NullKind::Callable(_) => write!(f, "NullSpec::callable(bound {:?})", self.bound),
        }
    }
}

impl<S: Real> NullSpec<S> {
    /// Constant null `f(x) = c`. The bound defaults to `max(1, |c|)`, which
    /// covers outcomes in `[0, 1]`; call [`NullSpec::with_bound`] for wider
    /// outcome ranges.
    pub fn constant(c: S) -> Self {
        Self {
            kind: NullKind::Constant(c),
            bound: S::one().max(c.abs()),
        }
    }

    /// Tabulated null over a finite set of contexts.
    pub fn tabulated(rows: Vec<(Vec<S>, S)>, bound: S) -> Result<Self, Error> {
        if rows.is_empty() {
            return Err(Error::InvalidInput("tabulated null needs at least one row".into()));
        }
        let dim = rows[0].0.len();
        for (x, _) in &rows {
            if x.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: x.len() });
            }
        }
        Ok(Self { kind: NullKind::Tabulated(Arc::new(rows)), bound })
    }

    pub fn callable(f: SharedFn<S>, bound: S) -> Self {
        Self { kind: NullKind::Callable(f), bound }
    }

    pub fn with_bound(mut self, bound: S) -> Self {
        self.bound = bound;
        self
    }

    pub fn bound(&self) -> S {
        self.bound
    }

    /// Evaluates `f(x)`, checking the declared dimension (tabulated nulls)
    /// and the sup-norm bound.
    pub fn eval(&self, x: &[S]) -> Result<S, Error> {
        let value = match &self.kind {
            NullKind::Constant(c) => *c,
            NullKind::Tabulated(rows) => {
                let dim = rows[0].0.len();
                if x.len() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, got: x.len() });
                }
                let mut best = S::infinity();
                let mut value = rows[0].1;
                for (row_x, row_v) in rows.iter() {
                    let d2: S = row_x.iter().zip(x).map(|(&a, &b)| (a - b) * (a - b)).sum();
                    if d2 < best {
                        best = d2;
                        value = *row_v;
                    }
                }
                value
            }
            NullKind::Callable(f) => f(x),
        };
        if value.abs() > self.bound {
            return Err(Error::BoundViolated {
                value: value.as_f64(),
                bound: self.bound.as_f64(),
            });
        }
        Ok(value)
    }
}

/// Evaluates the null function at a context point.
pub fn eval_null<S: Real>(spec: &NullSpec<S>, x: &[S]) -> Result<S, Error> {
    spec.eval(x)
}

/// All tunables of one sequential test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestConfig<S> {
    /// Error tolerance, in (0, 1).
    pub alpha: S,
    /// Boundary tightening parameter; larger values tighten the bound earlier.
    pub rho: S,
    /// Burn-in time: the decision rule may not reject before this step.
    pub t0: u64,
    /// Scale of the weight-magnitude floor `eps_t = eps_scale * t^-gamma`.
    pub eps_scale: S,
    /// Decay exponent of the weight floor; values at or above 0.25 warn.
    pub gamma: S,
    /// Lower clip for estimated conditional variances.
    pub var_floor: S,
    /// Upper clip for estimated conditional variances.
    pub var_ceiling: S,
    /// Base seed for every random choice made by the test (regressor init).
    pub seed: u64,
}

impl<S: Real> Default for TestConfig<S> {
    fn default() -> Self {
        Self {
            alpha: S::of(0.1),
            rho: S::of(0.06),
            t0: 250,
            eps_scale: S::of(0.1),
            gamma: S::of(0.24),
            var_floor: S::of(0.01),
            var_ceiling: S::one(),
            seed: 0,
        }
    }
}

/// Non-fatal findings from config validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ConfigWarning {
    /// `gamma >= 0.25` is outside the range with proven error control, but
    /// empirically does not inflate the error rate.
    GammaAboveQuarter { gamma: f64 },
}

impl fmt::Display for ConfigWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigWarning::GammaAboveQuarter { gamma } => write!(
                f,
                "gamma = {gamma} is at or above 0.25; error control is only proven for gamma in [0, 0.25)"
            ),
        }
    }
}

impl<S: Real> TestConfig<S> {
    /// Checks every range invariant, returning warnings for accepted but
    /// out-of-theory settings.
    pub fn validate(&self) -> Result<Vec<ConfigWarning>, Error> {
        fn check<S: Real>(
            ok: bool,
            field: &'static str,
            got: S,
            expected: &'static str,
        ) -> Result<(), Error> {
            if ok {
                Ok(())
            } else {
                Err(Error::OutOfRange { field, got: got.as_f64(), expected })
            }
        }

        check(
            self.alpha.is_finite() && self.alpha > S::zero() && self.alpha < S::one(),
            "alpha",
            self.alpha,
            "open interval (0, 1)",
        )?;
        check(self.rho.is_finite() && self.rho > S::zero(), "rho", self.rho, "> 0")?;
        check(self.t0 >= 1, "t0", S::from_count(self.t0), ">= 1")?;
        check(
            self.eps_scale.is_finite() && self.eps_scale > S::zero(),
            "eps_scale",
            self.eps_scale,
            "> 0",
        )?;
        check(self.gamma.is_finite() && self.gamma >= S::zero(), "gamma", self.gamma, ">= 0")?;
        check(
            self.var_floor.is_finite() && self.var_floor > S::zero(),
            "var_floor",
            self.var_floor,
            "> 0",
        )?;
        check(
            self.var_ceiling.is_finite() && self.var_ceiling > self.var_floor,
            "var_ceiling",
            self.var_ceiling,
            "> var_floor",
        )?;

        let mut warnings = Vec::new();
        if self.gamma >= S::of(0.25) {
            warnings.push(ConfigWarning::GammaAboveQuarter { gamma: self.gamma.as_f64() });
        }
        Ok(warnings)
    }
}

/// Validates a config, returning it unchanged together with any warnings.
pub fn validate_config<S: Real>(
    cfg: TestConfig<S>,
) -> Result<(TestConfig<S>, Vec<ConfigWarning>), Error> {
    let warnings = cfg.validate()?;
    Ok((cfg, warnings))
}

/// Per-step diagnostic row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord<S> {
    pub t: u64,
    pub phi: S,
    pub weight: S,
    pub psi_bar: S,
    pub v_hat: S,
    pub lower_bound: S,
    pub rejected: bool,
}
