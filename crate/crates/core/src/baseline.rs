//! Binned Bonferroni baseline.
//!
//! The covariate space is discretized into `b` bins; each bin runs a
//! two-sided anytime-valid confidence sequence for the mean of its
//! pseudo-outcomes at level `alpha / b` (half per side, via the same
//! mixture half-width as the main test), and the procedure rejects as soon
//! as any bin's interval excludes that bin's null value. The per-bin level
//! split keeps the union bound at exactly `alpha`.
//!
//! For synthetic unit-cube streams the binning is by quantiles of the
//! centered context norm `||x - 0.5||`, with edges estimated on a warmup
//! prefix and frozen afterwards so later assignments stay predictable.

use std::sync::Arc;

use crate::boundary::mixture_half_width;
use crate::engine::Decision;
use crate::types::{Error, Real};

/// Total bin-assignment function over the context space.
pub type BinAssign<S> = Arc<dyn Fn(&[S]) -> usize + Send + Sync>;

/// Bin assignment rule.
#[derive(Clone)]
pub enum Binning<S> {
    /// User-supplied total assignment `x -> {0..bins-1}`.
    Fixed { assign: BinAssign<S>, bins: usize },
    /// Quantile bins of the centered L2 norm, with edges learned on the
    /// first `warmup` observations and then frozen. Warmup observations are
    /// buffered and attributed to their bins at the freeze step.
    NormQuantile { bins: usize, warmup: usize },
}

impl<S> Binning<S> {
    pub fn bins(&self) -> usize {
        match self {
            Binning::Fixed { bins, .. } => *bins,
            Binning::NormQuantile { bins, .. } => *bins,
        }
    }
}

/// Running moments and rejection flag of one bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinState<S> {
    pub n: u64,
    pub phi_sum: S,
    pub phi_sq_sum: S,
    pub rejected: bool,
}

impl<S: Real> BinState<S> {
    fn new() -> Self {
        Self { n: 0, phi_sum: S::zero(), phi_sq_sum: S::zero(), rejected: false }
    }

    pub fn mean(&self) -> S {
        if self.n == 0 {
            S::zero()
        } else {
            self.phi_sum / S::from_count(self.n)
        }
    }

    /// Unbiased sample variance, floored at zero against rounding.
    pub fn sample_variance(&self) -> S {
        if self.n < 2 {
            return S::zero();
        }
        let n = S::from_count(self.n);
        let mean = self.phi_sum / n;
        ((self.phi_sq_sum - n * mean * mean) / (n - S::one())).max(S::zero())
    }
}

/// Per-bin diagnostic row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinRecord<S> {
    pub t: u64,
    pub bin: usize,
    pub n: u64,
    pub mean: S,
    pub half_width: S,
    pub rejected: bool,
}

enum NormEdges<S> {
    Learning { warmup: usize, buffer: Vec<(S, S)> },
    Frozen(Vec<S>),
}

/// The binned Bonferroni test.
pub struct BinnedTest<S: Real> {
    binning: Binning<S>,
    norm_edges: Option<NormEdges<S>>,
    bins: Vec<BinState<S>>,
    null_by_bin: Vec<S>,
    per_side_alpha: S,
    rho: S,
    burn_in: u64,
    t: u64,
    rejected_at: Option<u64>,
}

impl<S: Real> BinnedTest<S> {
    /// `null_by_bin` holds each bin's null value (the average of the null
    /// function over the bin; a constant for constant nulls). The per-bin
    /// burn-in is `max(2, t0 / b)` so sparse bins cannot reject off a
    /// degenerate variance estimate.
    pub fn new(
        binning: Binning<S>,
        null_by_bin: Vec<S>,
        alpha: S,
        rho: S,
        t0: u64,
    ) -> Result<Self, Error> {
        let b = binning.bins();
        if b == 0 {
            return Err(Error::InvalidInput("at least one bin is required".into()));
        }
        if null_by_bin.len() != b {
            return Err(Error::DimensionMismatch { expected: b, got: null_by_bin.len() });
        }
        let alpha_ok = alpha > S::zero() && alpha < S::one();
        if !alpha_ok {
            return Err(Error::OutOfRange {
                field: "alpha",
                got: alpha.as_f64(),
                expected: "open interval (0, 1)",
            });
        }
        let rho_ok = rho > S::zero();
        if !rho_ok {
            return Err(Error::OutOfRange { field: "rho", got: rho.as_f64(), expected: "> 0" });
        }
        let norm_edges = match &binning {
            Binning::NormQuantile { warmup, .. } => {
                Some(NormEdges::Learning { warmup: (*warmup).max(b), buffer: Vec::new() })
            }
            Binning::Fixed { .. } => None,
        };
        Ok(Self {
            norm_edges,
            bins: vec![BinState::new(); b],
            null_by_bin,
            per_side_alpha: alpha / S::from_count(b as u64) * S::half(),
            rho,
            burn_in: (t0 / b as u64).max(2),
            t: 0,
            rejected_at: None,
            binning,
        })
    }

    /// Same-alpha convenience for a constant null value across bins.
    pub fn with_constant_null(
        binning: Binning<S>,
        null_value: S,
        alpha: S,
        rho: S,
        t0: u64,
    ) -> Result<Self, Error> {
        let b = binning.bins();
        Self::new(binning, vec![null_value; b], alpha, rho, t0)
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn bins(&self) -> &[BinState<S>] {
        &self.bins
    }

    pub fn decision(&self) -> Decision {
        match self.rejected_at {
            Some(at) => Decision::Rejected { at },
            None => Decision::Continue,
        }
    }

    /// Level used for each side of each bin's interval.
    pub fn per_side_alpha(&self) -> S {
        self.per_side_alpha
    }

    fn centered_norm(x: &[S]) -> S {
        x.iter().map(|&v| (v - S::half()) * (v - S::half())).sum::<S>().sqrt()
    }

    fn assign_frozen(edges: &[S], norm: S) -> usize {
        edges.partition_point(|&e| e <= norm)
    }

    /// Feeds one observation with its already-computed pseudo-outcome.
    pub fn step(&mut self, x: &[S], phi: S) -> Result<(), Error> {
        self.t += 1;
        match &mut self.norm_edges {
            None => {
                let bin = match &self.binning {
                    Binning::Fixed { assign, bins } => {
                        let b = assign(x);
                        if b >= *bins {
                            return Err(Error::InvalidInput(format!(
                                "bin assignment {b} out of range for {bins} bins"
                            )));
                        }
                        b
                    }
                    Binning::NormQuantile { .. } => unreachable!("edges resolve the assignment"),
                };
                self.update_bin(bin, phi)?;
            }
            Some(NormEdges::Frozen(edges)) => {
                let bin = Self::assign_frozen(edges, Self::centered_norm(x));
                self.update_bin(bin, phi)?;
            }
            Some(NormEdges::Learning { warmup, buffer }) => {
                buffer.push((Self::centered_norm(x), phi));
                if buffer.len() >= *warmup {
                    let b = self.binning.bins();
                    let mut norms: Vec<S> = buffer.iter().map(|&(n, _)| n).collect();
                    norms.sort_by(|a, b| a.partial_cmp(b).expect("finite norms"));
                    let edges: Vec<S> =
                        (1..b).map(|i| norms[i * norms.len() / b]).collect();
                    let flushed = std::mem::take(buffer);
                    self.norm_edges = Some(NormEdges::Frozen(edges.clone()));
                    for (norm, phi) in flushed {
                        let bin = Self::assign_frozen(&edges, norm);
                        self.update_bin(bin, phi)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn update_bin(&mut self, bin: usize, phi: S) -> Result<(), Error> {
        let state = &mut self.bins[bin];
        state.n += 1;
        state.phi_sum += phi;
        state.phi_sq_sum += phi * phi;
        if state.rejected || state.n < self.burn_in || state.n < 2 {
            return Ok(());
        }
        let hw =
            mixture_half_width(state.n, state.sample_variance(), self.per_side_alpha, self.rho)?;
        if (state.mean() - self.null_by_bin[bin]).abs() > hw {
            state.rejected = true;
            if self.rejected_at.is_none() {
                self.rejected_at = Some(self.t);
            }
        }
        Ok(())
    }

    /// Per-bin diagnostics at the current time.
    pub fn records(&self) -> Vec<BinRecord<S>> {
        self.bins
            .iter()
            .enumerate()
            .map(|(bin, s)| {
                let half_width = if s.n >= 2 {
                    mixture_half_width(s.n, s.sample_variance(), self.per_side_alpha, self.rho)
                        .unwrap_or(S::infinity())
                } else {
                    S::infinity()
                };
                BinRecord { t: self.t, bin, n: s.n, mean: s.mean(), half_width, rejected: s.rejected }
            })
            .collect()
    }
}

/// Global decision for a binned test.
pub fn binned_decision<S: Real>(test: &BinnedTest<S>) -> Decision {
    test.decision()
}
