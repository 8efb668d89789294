//! Synthetic data generators.
//!
//! The CMF generators draw contexts uniformly on the unit cube, map them
//! through a single-index latent
//!
//! ```text
//!     zeta = Phi( (2 / sqrt(d)) * sum_j (x_j - 0.5) ),
//! ```
//!
//! and emit Beta outcomes with conditional mean `m(zeta)` and concentration
//! `c`: `y ~ Beta(c * m, c * (1 - m))`. Four mean shapes are built in: a flat
//! null at 0.5, a symmetric step, a centered bump, and a sine curve.
//!
//! A configurable CATE generator produces `(x, a, y)` triples with Bernoulli
//! outcomes and a known treatment propensity for testing the treated-vs-
//! control contrast machinery; it is synthetic plumbing, not a shipped
//! dataset.
//!
//! Every generator owns its RNG; parallel replicates use independently
//! seeded generators derived with [`mix_seed`].

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::types::{Error, Observation, ObservationCate, ObservationCmf, Real, SharedFn};

/// Conditional-mean shape of the latent index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shape {
    Null,
    Step,
    Bump,
    Sine,
}

/// One synthetic CMF distribution: shape, effect size, Beta concentration,
/// and context dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec<S> {
    pub shape: Shape,
    pub delta: S,
    pub concentration: S,
    pub dim: usize,
}

impl<S: Real> ShapeSpec<S> {
    /// `delta < 0.5` keeps every conditional mean strictly inside (0,1).
    pub fn new(shape: Shape, delta: S, concentration: S, dim: usize) -> Result<Self, Error> {
        let delta_ok = delta >= S::zero() && delta < S::half();
        if !delta_ok {
            return Err(Error::OutOfRange {
                field: "delta",
                got: delta.as_f64(),
                expected: "[0, 0.5)",
            });
        }
        let conc_ok = concentration.is_finite() && concentration > S::zero();
        if !conc_ok {
            return Err(Error::OutOfRange {
                field: "concentration",
                got: concentration.as_f64(),
                expected: "> 0",
            });
        }
        if dim == 0 {
            return Err(Error::InvalidInput("context dimension must be >= 1".into()));
        }
        Ok(Self { shape, delta, concentration, dim })
    }

    pub fn null() -> Self {
        Self { shape: Shape::Null, delta: S::zero(), concentration: S::of(5.0), dim: 10 }
    }

    pub fn step() -> Self {
        Self { shape: Shape::Step, delta: S::of(0.02), concentration: S::of(50.0), dim: 10 }
    }

    pub fn bump() -> Self {
        Self { shape: Shape::Bump, delta: S::of(0.15), concentration: S::of(5.0), dim: 10 }
    }

    pub fn sine() -> Self {
        Self { shape: Shape::Sine, delta: S::of(0.15), concentration: S::of(5.0), dim: 10 }
    }

    /// True conditional mean at a context point.
    pub fn conditional_mean(&self, x: &[S]) -> Result<S, Error> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(mean_shape(self, latent(x)?))
    }
}

/// Single-index latent `Phi((2/sqrt(d)) * sum(x_j - 0.5))`, strictly inside
/// (0,1). The scaling generalizes the ten-dimensional construction to any
/// `d >= 1` while preserving the index variance.
pub fn latent<S: Real>(x: &[S]) -> Result<S, Error> {
    if x.is_empty() {
        return Err(Error::InvalidInput("latent index needs at least one coordinate".into()));
    }
    let mut sum = S::zero();
    for &xi in x {
        sum += xi - S::half();
    }
    let scale = S::two() / S::of(x.len() as f64).sqrt();
    Ok(std_normal_cdf(scale * sum))
}

/// Conditional mean `m(zeta)` for a shape spec.
pub fn mean_shape<S: Real>(spec: &ShapeSpec<S>, zeta: S) -> S {
    let half = S::half();
    match spec.shape {
        Shape::Null => half,
        Shape::Step => {
            if zeta >= half {
                half + spec.delta
            } else {
                half - spec.delta
            }
        }
        // closed interval on both edges; the boundary event has measure zero
        Shape::Bump => {
            if zeta >= S::of(0.4) && zeta <= S::of(0.6) {
                half + spec.delta
            } else {
                half
            }
        }
        Shape::Sine => half + spec.delta * (S::of(4.0 * std::f64::consts::PI) * zeta).sin(),
    }
}

/// Draws one CMF observation: `x ~ Unif[0,1]^d`, `y ~ Beta(c m, c (1-m))`.
pub fn sample_dgp1<S: Real, R: Rng + ?Sized>(
    spec: &ShapeSpec<S>,
    rng: &mut R,
) -> Result<ObservationCmf<S>, Error> {
    let x: Vec<S> = (0..spec.dim).map(|_| S::of(rng.random::<f64>())).collect();
    let m = mean_shape(spec, latent(&x)?);
    let y = sample_beta(spec.concentration * m, spec.concentration * (S::one() - m), rng)?;
    Ok(ObservationCmf { x, y })
}

/// Configurable CATE stream: baseline mean, effect, and propensity as
/// functions of the context. Both arm means `mu0(x)` and `mu0(x) + tau(x)`
/// must stay inside (0,1); sampling panics otherwise.
#[derive(Clone)]
pub struct Dgp2Spec<S> {
    pub mu0: SharedFn<S>,
    pub tau: SharedFn<S>,
    pub pi1: SharedFn<S>,
    pub dim: usize,
}

impl<S> fmt::Debug for Dgp2Spec<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dgp2Spec(dim {})", self.dim)
    }
}

impl<S: Real> Dgp2Spec<S> {
    /// Constant baseline, effect, and propensity.
    pub fn constant(mu0: S, tau: S, pi1: S, dim: usize) -> Self {
        Self {
            mu0: Arc::new(move |_| mu0),
            tau: Arc::new(move |_| tau),
            pi1: Arc::new(move |_| pi1),
            dim,
        }
    }
}

/// Draws one CATE observation: `x ~ Unif[0,1]^d`, `a ~ Bernoulli(pi1(x))`,
/// `y ~ Bernoulli(mu(x, a))`, with the propensity recorded on the
/// observation.
pub fn sample_dgp2<S: Real, R: Rng + ?Sized>(
    spec: &Dgp2Spec<S>,
    rng: &mut R,
) -> Result<ObservationCate<S>, Error> {
    let x: Vec<S> = (0..spec.dim).map(|_| S::of(rng.random::<f64>())).collect();
    let pi1 = (spec.pi1)(&x);
    assert!(
        pi1 > S::zero() && pi1 < S::one(),
        "propensity must lie in (0,1), got {pi1}"
    );
    let a = S::of(rng.random::<f64>()) < pi1;
    let mu0 = (spec.mu0)(&x);
    let mu = if a { mu0 + (spec.tau)(&x) } else { mu0 };
    assert!(
        mu > S::zero() && mu < S::one(),
        "arm mean must lie in (0,1), got {mu}"
    );
    let y = if S::of(rng.random::<f64>()) < mu { S::one() } else { S::zero() };
    Ok(ObservationCate { x, a, y, pi1 })
}

/// Beta(a, b) draw as a ratio of two Gamma variates, clamped into the open
/// unit interval.
pub fn sample_beta<S: Real, R: Rng + ?Sized>(a: S, b: S, rng: &mut R) -> Result<S, Error> {
    let shapes_ok = a > S::zero() && b > S::zero();
    if !shapes_ok {
        return Err(Error::InvalidInput(format!("Beta shapes must be positive, got ({a}, {b})")));
    }
    let ga = Gamma::new(a.as_f64(), 1.0)
        .map_err(|e| Error::InvalidInput(format!("gamma shape: {e}")))?;
    let gb = Gamma::new(b.as_f64(), 1.0)
        .map_err(|e| Error::InvalidInput(format!("gamma shape: {e}")))?;
    let x: f64 = ga.sample(rng);
    let y: f64 = gb.sample(rng);
    let ratio = if x + y > 0.0 { x / (x + y) } else { 0.5 };
    Ok(S::of(ratio.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)))
}

/// Standard normal CDF, `Phi(z) = erfc(-z / sqrt(2)) / 2`, with relative
/// error below 1e-12 for |z| <= 8.
pub fn std_normal_cdf<S: Real>(z: S) -> S {
    S::of(0.5 * erfc(-z.as_f64() / std::f64::consts::SQRT_2))
}

/// Complementary error function: Maclaurin series for small arguments, a
/// Lentz-evaluated continued fraction for the tail.
fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 2.0 {
        1.0 - erf_series(x)
    } else {
        erfc_continued_fraction(x)
    }
}

fn erf_series(x: f64) -> f64 {
    // erf(x) = 2/sqrt(pi) * sum (-1)^n x^(2n+1) / (n! (2n+1))
    let xx = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 1.0_f64;
    loop {
        term *= -xx / n;
        let contribution = term / (2.0 * n + 1.0);
        sum += contribution;
        if contribution.abs() < 1e-18 * sum.abs() || n > 200.0 {
            break;
        }
        n += 1.0;
    }
    sum * 2.0 / std::f64::consts::PI.sqrt()
}

fn erfc_continued_fraction(x: f64) -> f64 {
    // erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0_f64;
    for n in 1..400 {
        let a = n as f64 / 2.0;
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-17 {
            break;
        }
    }
    (-x * x).exp() / std::f64::consts::PI.sqrt() / f
}

/// Derives the RNG seed of replicate `index` from a base seed: a splitmix64
/// finalizer applied to `base + index * golden_ratio_64`.
pub fn mix_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Infinite CMF observation stream owning its RNG.
pub struct Dgp1Stream<S> {
    spec: ShapeSpec<S>,
    rng: ChaCha8Rng,
}

impl<S: Real> Dgp1Stream<S> {
    pub fn new(spec: ShapeSpec<S>, seed: u64) -> Self {
        Self { spec, rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl<S: Real> Iterator for Dgp1Stream<S> {
    type Item = Observation<S>;

    fn next(&mut self) -> Option<Self::Item> {
        Some(Observation::Cmf(sample_dgp1(&self.spec, &mut self.rng).expect("valid shape spec")))
    }
}

/// Infinite CATE observation stream owning its RNG.
pub struct Dgp2Stream<S> {
    spec: Dgp2Spec<S>,
    rng: ChaCha8Rng,
}

impl<S: Real> Dgp2Stream<S> {
    pub fn new(spec: Dgp2Spec<S>, seed: u64) -> Self {
        Self { spec, rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl<S: Real> Iterator for Dgp2Stream<S> {
    type Item = Observation<S>;

    fn next(&mut self) -> Option<Self::Item> {
        Some(Observation::Cate(sample_dgp2(&self.spec, &mut self.rng).expect("valid DGP2 spec")))
    }
}
