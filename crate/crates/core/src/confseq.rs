//! Confidence sequences for constant nulls by test inversion over a grid.
//!
//! A grid of candidate constants `c_1 < ... < c_m` runs one test each, all
//! sharing a single set of regressors: the nuisance estimates do not depend
//! on the null, so only the per-candidate sums `psi` and `V` differ. That
//! sharing is what makes a 101-point grid barely more expensive than a
//! single test. The surviving set at time `t` is the set of candidates
//! whose test has not rejected; it can be non-contiguous in principle, so
//! the raw mask is reported alongside its hull.

use crate::boundary::BoundaryParams;
use crate::dgp::mix_seed;
use crate::engine::{StreamKind, TestState};
use crate::pseudo::{phi_cate, phi_cmf};
use crate::regress::{ArmPair, BoxedRegressor, ClippedVarianceRegressor, RegressorKind};
use crate::types::{Error, Observation, Real, TestConfig};
use crate::weights::{raw_weight, threshold_weight, EpsilonSchedule};

/// Grid confidence sequence: one test state per candidate constant, shared
/// regressors.
pub struct GridCs<S: Real> {
    grid: Vec<S>,
    states: Vec<TestState<S>>,
    kind: StreamKind,
    dim: usize,
    cfg: TestConfig<S>,
    boundary: BoundaryParams<S>,
    eps: EpsilonSchedule<S>,
    tau_hat: BoxedRegressor<S>,
    v_hat: ClippedVarianceRegressor<S>,
    g1: Option<BoxedRegressor<S>>,
    g0: Option<BoxedRegressor<S>>,
}

impl<S: Real> GridCs<S> {
    /// Wires explicitly constructed regressors around a sorted candidate
    /// grid.
    pub fn new(
        grid: Vec<S>,
        kind: StreamKind,
        dim: usize,
        cfg: TestConfig<S>,
        tau_hat: BoxedRegressor<S>,
        var_inner: BoxedRegressor<S>,
        arms: Option<ArmPair<S>>,
    ) -> Result<Self, Error> {
        cfg.validate()?;
        if grid.is_empty() {
            return Err(Error::InvalidInput("candidate grid must be nonempty".into()));
        }
        let sorted = grid.windows(2).all(|w| w[0] <= w[1]);
        if !sorted || grid.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("candidate grid must be finite and sorted".into()));
        }
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
        let states = vec![TestState::new(); grid.len()];
        Ok(Self { grid, states, kind, dim, cfg, boundary, eps, tau_hat, v_hat, g1, g0 })
    }

    /// Builds the grid CS with one regressor family, using the same
    /// cold-start conventions as the single-test bundle.
    pub fn from_kind(
        grid: Vec<S>,
        kind: StreamKind,
        dim: usize,
        cfg: TestConfig<S>,
        family: &RegressorKind<S>,
    ) -> Result<Self, Error> {
        let (tau_clamp, tau_cold) = match kind {
            StreamKind::Cmf => ((S::zero(), S::one()), S::half()),
            StreamKind::Cate => ((-S::two(), S::two()), S::zero()),
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
        Self::new(grid, kind, dim, cfg, tau_hat, var_inner, arms)
    }

    /// Evenly spaced grid of `points` candidates over `[lo, hi]`.
    pub fn uniform_grid(lo: S, hi: S, points: usize) -> Result<Vec<S>, Error> {
        let range_ok = lo.is_finite() && hi.is_finite() && lo <= hi;
        if points < 1 || !range_ok {
            return Err(Error::InvalidInput("grid needs lo <= hi and at least one point".into()));
        }
        if points == 1 {
            return Ok(vec![(lo + hi) * S::half()]);
        }
        let step = (hi - lo) / S::of((points - 1) as f64);
        Ok((0..points).map(|i| lo + step * S::of(i as f64)).collect())
    }

    pub fn grid(&self) -> &[S] {
        &self.grid
    }

    pub fn states(&self) -> &[TestState<S>] {
        &self.states
    }

    pub fn t(&self) -> u64 {
        self.states[0].t
    }

    /// One observation: shared predictions are read once, every candidate
    /// accumulates its own sums, and the regressors update once. The step
    /// ordering contract matches the single-test engine exactly.
    pub fn cs_step(&mut self, obs: &Observation<S>) -> Result<(), Error> {
        let x = obs.x();
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        let tau_pred = self.tau_hat.predict(x);
        let v_pred = self.v_hat.predict(x);
        let phi = match (self.kind, obs) {
            (StreamKind::Cmf, Observation::Cmf(o)) => phi_cmf(o),
            (StreamKind::Cate, Observation::Cate(o)) => {
                let g1 = self.g1.as_ref().expect("CATE grid has arm regressors").predict(x);
                let g0 = self.g0.as_ref().expect("CATE grid has arm regressors").predict(x);
                phi_cate(o, g1, g0)?
            }
            (StreamKind::Cmf, _) => return Err(Error::StreamKindMismatch { expected: "CMF" }),
            (StreamKind::Cate, _) => return Err(Error::StreamKindMismatch { expected: "CATE" }),
        };

        let eps = self.eps.at(self.states[0].t + 1);
        let residual = phi - tau_pred;
        for (state, &candidate) in self.states.iter_mut().zip(&self.grid) {
            let w = threshold_weight(raw_weight(tau_pred, candidate, v_pred)?, eps);
            state.absorb(w, phi - candidate, residual);
        }

        self.tau_hat.update(x, phi);
        self.v_hat.update(x, residual * residual);
        if let Observation::Cate(o) = obs {
            let arm = if o.a { self.g1.as_mut() } else { self.g0.as_mut() };
            arm.expect("CATE grid has arm regressors").update(x, o.y);
        }

        for state in &mut self.states {
            state.tick();
            state.assess(&self.boundary, self.cfg.t0)?;
        }
        Ok(())
    }

    /// Survivor mask (true = candidate not rejected) and hull.
    pub fn cs_survivors(&self) -> (Vec<bool>, Option<(S, S)>) {
        let mask: Vec<bool> = self.states.iter().map(|s| s.rejected_at.is_none()).collect();
        let hull = survivor_hull(&self.grid, &mask);
        (mask, hull)
    }

    pub fn survivor_count(&self) -> usize {
        self.states.iter().filter(|s| s.rejected_at.is_none()).count()
    }
}

/// `(min, max)` of the surviving candidates; `None` when all are rejected.
/// The mask is the source of truth because the surviving set may have gaps.
pub fn survivor_hull<S: Real>(grid: &[S], mask: &[bool]) -> Option<(S, S)> {
    let mut survivors = grid.iter().zip(mask).filter(|(_, &m)| m).map(|(&c, _)| c);
    let first = survivors.next()?;
    let last = survivors.last().unwrap_or(first);
    Some((first, last))
}
