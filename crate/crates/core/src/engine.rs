//! The per-observation test pipeline.
//!
//! Each step executes a fixed order: read every regressor prediction for
//! the incoming context, form the pseudo-outcome, compute the predictable
//! weight, fold the increment into the running sums, and only then update
//! the regressors with the new observation. Updating first would leak the
//! current observation into its own weight and silently void the
//! error-control guarantees, so the ordering here is load-bearing.
//!
//! After the sums are updated the engine recomputes the normalized process
//! `psi_bar_t`, the variance estimate `V_t = (1/t) sum w_i^2 r_i^2`, and the
//! mixture lower bound; the test rejects at the first `t >= t0` with a
//! strictly positive lower bound. Rejection is absorbing.

use serde::{Deserialize, Serialize};

use crate::boundary::BoundaryParams;
use crate::dgp::mix_seed;
use crate::pseudo::{phi_cate, phi_cmf};
use crate::regress::{ArmPair, BoxedRegressor, ClippedVarianceRegressor, RegressorKind};
use crate::types::{Error, NullSpec, Observation, Real, StepRecord, TestConfig};
use crate::weights::{raw_weight, threshold_weight, EpsilonSchedule};

/// Which observation flavor a test consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StreamKind {
    Cmf,
    Cate,
}

/// Evolving sufficient statistics of one test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestState<S> {
    /// Observations consumed.
    pub t: u64,
    /// Running sum `sum_i w_i (phi_i - f(x_i))`.
    pub psi_sum: S,
    /// Running sum `sum_i w_i^2 r_i^2`, i.e. `t * V_t`.
    pub wsq_rsq_sum: S,
    /// First `t >= t0` with a positive lower bound; absorbing once set.
    pub rejected_at: Option<u64>,
}

impl<S: Real> Default for TestState<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Real> TestState<S> {
    pub fn new() -> Self {
        Self { t: 0, psi_sum: S::zero(), wsq_rsq_sum: S::zero(), rejected_at: None }
    }

    pub(crate) fn absorb(&mut self, weight: S, phi_minus_f: S, residual: S) {
        self.psi_sum += weight * phi_minus_f;
        self.wsq_rsq_sum += weight * weight * residual * residual;
    }

    pub(crate) fn tick(&mut self) {
        self.t += 1;
    }

    /// Recomputes `(psi_bar, V_t, L_t)` and applies the decision rule.
    pub(crate) fn assess(
        &mut self,
        boundary: &BoundaryParams<S>,
        t0: u64,
    ) -> Result<(S, S, S), Error> {
        let tf = S::from_count(self.t);
        let psi_bar = self.psi_sum / tf;
        let v_hat = self.wsq_rsq_sum / tf;
        let lower = boundary.lower_bound(psi_bar, self.t, v_hat)?;
        if self.t >= t0 && self.rejected_at.is_none() && lower > S::zero() {
            self.rejected_at = Some(self.t);
        }
        Ok((psi_bar, v_hat, lower))
    }

    pub fn decision(&self) -> Decision {
        match self.rejected_at {
            Some(at) => Decision::Rejected { at },
            None => Decision::Continue,
        }
    }
}

/// Test outcome so far.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Continue,
    Rejected { at: u64 },
}

/// Current decision for a state; rejection is reported exactly once set and
/// never reverts.
pub fn decision<S: Real>(state: &TestState<S>) -> Decision {
    state.decision()
}

/// Everything one running test owns: regressors, null, config, and state.
pub struct TestBundle<S: Real> {
    kind: StreamKind,
    dim: usize,
    null: NullSpec<S>,
    cfg: TestConfig<S>,
    boundary: BoundaryParams<S>,
    eps: EpsilonSchedule<S>,
    tau_hat: BoxedRegressor<S>,
    v_hat: ClippedVarianceRegressor<S>,
    g1: Option<BoxedRegressor<S>>,
    g0: Option<BoxedRegressor<S>>,
    state: TestState<S>,
    early_stop: bool,
}

impl<S: Real> TestBundle<S> {
    /// Wires explicitly constructed regressors. The variance learner is
    /// wrapped in the clipping window `[var_floor, var_ceiling]`; CATE
    /// bundles must supply both arm regressors.
    pub fn new(
        kind: StreamKind,
        dim: usize,
        null: NullSpec<S>,
        cfg: TestConfig<S>,
        tau_hat: BoxedRegressor<S>,
        var_inner: BoxedRegressor<S>,
        arms: Option<ArmPair<S>>,
    ) -> Result<Self, Error> {
        cfg.validate()?;
        if (kind == StreamKind::Cate) != arms.is_some() {
            return Err(Error::InvalidInput(
                "arm regressors are required exactly when the stream is CATE".into(),
            ));
        }
        let boundary = BoundaryParams::new(cfg.alpha, cfg.rho)?;
        let eps = EpsilonSchedule::new(cfg.eps_scale, cfg.gamma)?;
        let v_hat = ClippedVarianceRegressor::new(var_inner, cfg.var_floor, cfg.var_ceiling)?;
        let (g1, g0) = match arms {
            Some((g1, g0)) => (Some(g1), Some(g0)),
            None => (None, None),
        };
        Ok(Self {
            kind,
            dim,
            null,
            boundary,
            eps,
            tau_hat,
            v_hat,
            g1,
            g0,
            cfg,
            state: TestState::new(),
            early_stop: false,
        })
    }

    /// Builds a bundle with one regressor family for every nuisance, using
    /// the cold-start conventions: `tau_hat` starts at 0.5 for unit-interval
    /// CMF streams and at 0 for CATE pseudo-outcomes, arm means start at
    /// 0.5, and the variance learner starts at the ceiling (maximally
    /// conservative before data).
    pub fn from_kind(
        kind: StreamKind,
        dim: usize,
        null: NullSpec<S>,
        cfg: TestConfig<S>,
        family: &RegressorKind<S>,
    ) -> Result<Self, Error> {
        let bound = null.bound().max(S::one());
        let (tau_clamp, tau_cold) = match kind {
            StreamKind::Cmf => ((S::zero(), S::one()), S::half()),
            StreamKind::Cate => ((-S::two() * bound, S::two() * bound), S::zero()),
        };
        let tau_hat = family.build(dim, tau_clamp, tau_cold, mix_seed(cfg.seed, 1))?;
        let var_inner = family.build(
            dim,
            (S::zero(), S::infinity()),
            cfg.var_ceiling,
            mix_seed(cfg.seed, 2),
        )?;
        let arms = match kind {
            StreamKind::Cmf => None,
            StreamKind::Cate => Some((
                family.build(dim, (S::zero(), S::one()), S::half(), mix_seed(cfg.seed, 3))?,
                family.build(dim, (S::zero(), S::one()), S::half(), mix_seed(cfg.seed, 4))?,
            )),
        };
        Self::new(kind, dim, null, cfg, tau_hat, var_inner, arms)
    }

    /// Stop consuming observations once the test rejects.
    pub fn with_early_stop(mut self, flag: bool) -> Self {
        self.early_stop = flag;
        self
    }

    pub fn state(&self) -> &TestState<S> {
        &self.state
    }

    pub fn config(&self) -> &TestConfig<S> {
        &self.cfg
    }

    pub fn decision(&self) -> Decision {
        self.state.decision()
    }

    /// Consumes one observation and returns its diagnostic record.
    pub fn step(&mut self, obs: &Observation<S>) -> Result<StepRecord<S>, Error> {
        let x = obs.x();
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }

        // 1. read every prediction before any state changes
        let tau_pred = self.tau_hat.predict(x);
        let v_pred = self.v_hat.predict(x);
        let phi = match (self.kind, obs) {
            (StreamKind::Cmf, Observation::Cmf(o)) => phi_cmf(o),
            (StreamKind::Cate, Observation::Cate(o)) => {
                let g1 = self.g1.as_ref().expect("CATE bundle has arm regressors").predict(x);
                let g0 = self.g0.as_ref().expect("CATE bundle has arm regressors").predict(x);
                phi_cate(o, g1, g0)?
            }
            (StreamKind::Cmf, _) => {
                return Err(Error::StreamKindMismatch { expected: "CMF" });
            }
            (StreamKind::Cate, _) => {
                return Err(Error::StreamKindMismatch { expected: "CATE" });
            }
        };

        // 2. predictable weight for this arrival index
        let eps = self.eps.at(self.state.t + 1);
        let f_x = self.null.eval(x)?;
        let w = threshold_weight(raw_weight(tau_pred, f_x, v_pred)?, eps);

        // 3. fold into the running sums
        let residual = phi - tau_pred;
        self.state.absorb(w, phi - f_x, residual);

        // 4. only now show the observation to the regressors
        self.tau_hat.update(x, phi);
        self.v_hat.update(x, residual * residual);
        if let Observation::Cate(o) = obs {
            let arm = if o.a { self.g1.as_mut() } else { self.g0.as_mut() };
            arm.expect("CATE bundle has arm regressors").update(x, o.y);
        }

        // 5. advance time, re-evaluate the bound, apply the decision rule
        self.state.tick();
        let (psi_bar, v_hat, lower_bound) = self.state.assess(&self.boundary, self.cfg.t0)?;

        Ok(StepRecord {
            t: self.state.t,
            phi,
            weight: w,
            psi_bar,
            v_hat,
            lower_bound,
            rejected: self.state.rejected_at.is_some(),
        })
    }

    /// Consumes up to `horizon` observations. Returns all step records and
    /// the rejection time, if any. By default the engine keeps accumulating
    /// diagnostics after rejection; with the early-stop flag it returns at
    /// the rejection step.
    pub fn run_to_horizon<I>(
        &mut self,
        stream: I,
        horizon: u64,
    ) -> Result<(Vec<StepRecord<S>>, Option<u64>), Error>
    where
        I: IntoIterator<Item = Observation<S>>,
    {
        let mut records = Vec::new();
        for obs in stream.into_iter().take(horizon as usize) {
            records.push(self.step(&obs)?);
            if self.early_stop && self.state.rejected_at.is_some() {
                break;
            }
        }
        Ok((records, self.state.rejected_at))
    }
}

impl<S: Real> StepRecord<S> {
    pub const CSV_HEADER: &'static str = "t,phi,weight,psi_bar,v_hat,lower_bound,rejected";

    /// CSV row with 17 significant digits per float (round-trip exact).
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            self.t, self.phi, self.weight, self.psi_bar, self.v_hat, self.lower_bound,
            self.rejected
        )
    }
}
