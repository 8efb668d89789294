//! Linear model trained by per-observation SGD on squared loss with an L2
//! penalty. One gradient step per observation:
//!
//! ```text
//!     beta' = beta - lr * ( (beta . x~ - target) * x~ + l2 * beta )
//! ```
//!
//! where `x~` is the context with an appended intercept term of 1. Gradient
//! components are clipped at magnitude 1e6 so adversarial streams cannot
//! overflow the coefficients.

use super::{clamp_to, SequentialRegressor};
use crate::types::{Error, Real};

const GRAD_CLIP: f64 = 1e6;

pub struct RidgeSgd<S> {
    /// Coefficients; the intercept is the last entry.
    beta: Vec<S>,
    lr: S,
    l2: S,
    clamp: (S, S),
}

impl<S: Real> RidgeSgd<S> {
    pub fn new(dim: usize, lr: S, l2: S, clamp: (S, S)) -> Result<Self, Error> {
        let lr_ok = lr > S::zero();
        if !lr_ok {
            return Err(Error::OutOfRange { field: "ridge.lr", got: lr.as_f64(), expected: "> 0" });
        }
        let l2_ok = l2 >= S::zero();
        if !l2_ok {
            return Err(Error::OutOfRange {
                field: "ridge.l2",
                got: l2.as_f64(),
                expected: ">= 0",
            });
        }
        Ok(Self { beta: vec![S::zero(); dim + 1], lr, l2, clamp })
    }

    pub fn coefficients(&self) -> &[S] {
        &self.beta
    }

    fn raw_prediction(&self, x: &[S]) -> S {
        let mut acc = self.beta[x.len()]; // intercept
        for (&b, &xi) in self.beta.iter().zip(x) {
            acc += b * xi;
        }
        acc
    }
}

/// One SGD step as a free function; returns the updated coefficients.
pub fn ridge_sgd_update<S: Real>(beta: &[S], x: &[S], target: S, lr: S, l2: S) -> Vec<S> {
    assert_eq!(beta.len(), x.len() + 1, "beta holds one intercept past the context");
    let clip = S::of(GRAD_CLIP);
    let mut pred = beta[x.len()];
    for (&b, &xi) in beta.iter().zip(x) {
        pred += b * xi;
    }
    let resid = pred - target;
    beta.iter()
        .enumerate()
        .map(|(i, &b)| {
            let xi = if i == x.len() { S::one() } else { x[i] };
            let grad = (resid * xi + l2 * b).max(-clip).min(clip);
            b - lr * grad
        })
        .collect()
}

impl<S: Real> SequentialRegressor<S> for RidgeSgd<S> {
    fn predict(&self, x: &[S]) -> S {
        assert_eq!(x.len() + 1, self.beta.len(), "query dimension");
        clamp_to(self.raw_prediction(x), self.clamp)
    }

    fn update(&mut self, x: &[S], target: S) {
        self.beta = ridge_sgd_update(&self.beta, x, target, self.lr, self.l2);
    }

    fn clamp_range(&self) -> (S, S) {
        self.clamp
    }
}
