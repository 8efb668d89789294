//! Small feed-forward network trained online with Adam.
//!
//! ReLU hidden layers, sigmoid output (so predictions stay in (0,1)), one
//! backpropagated Adam step on squared loss per observation. Weights start
//! from He-scaled normal draws seeded from the test config; biases start at
//! zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::SequentialRegressor;
use crate::types::{Error, Real};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

pub struct MlpRegressor<S> {
    /// Layer widths, input first, single output last.
    sizes: Vec<usize>,
    /// Per layer: row-major `out x in` weights.
    weights: Vec<Vec<S>>,
    biases: Vec<Vec<S>>,
    m_w: Vec<Vec<S>>,
    v_w: Vec<Vec<S>>,
    m_b: Vec<Vec<S>>,
    v_b: Vec<Vec<S>>,
    lr: S,
    step: u64,
}

fn sigmoid<S: Real>(z: S) -> S {
    let one = S::one();
    let raw = if z >= S::zero() {
        one / (one + (-z).exp())
    } else {
        let e = z.exp();
        e / (one + e)
    };
    // keep the output strictly inside (0,1) even after rounding
    raw.max(S::epsilon()).min(one - S::epsilon())
}

impl<S: Real> MlpRegressor<S> {
    pub fn new(dim: usize, hidden: &[usize], adam_lr: S, seed: u64) -> Result<Self, Error> {
        let mut mlp = Self::zeroed(dim, hidden, adam_lr)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (l, w) in mlp.weights.iter_mut().enumerate() {
            let fan_in = mlp.sizes[l].max(1);
            let scale = (2.0 / fan_in as f64).sqrt();
            for v in w.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *v = S::of(z * scale);
            }
        }
        Ok(mlp)
    }

    /// All parameters zero; the forward pass is sigmoid(0) = 0.5 everywhere.
    pub fn zeroed(dim: usize, hidden: &[usize], adam_lr: S) -> Result<Self, Error> {
        let lr_ok = adam_lr > S::zero();
        if !lr_ok {
            return Err(Error::OutOfRange {
                field: "mlp.adam_lr",
                got: adam_lr.as_f64(),
                expected: "> 0",
            });
        }
        if hidden.contains(&0) {
            return Err(Error::InvalidInput("hidden layer widths must be >= 1".into()));
        }
        let mut sizes = vec![dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let shape = |f: fn(usize, usize) -> usize| -> Vec<Vec<S>> {
            (0..sizes.len() - 1).map(|l| vec![S::zero(); f(sizes[l], sizes[l + 1])]).collect()
        };
        Ok(Self {
            weights: shape(|i, o| i.max(1) * o),
            biases: shape(|_, o| o),
            m_w: shape(|i, o| i.max(1) * o),
            v_w: shape(|i, o| i.max(1) * o),
            m_b: shape(|_, o| o),
            v_b: shape(|_, o| o),
            sizes,
            lr: adam_lr,
            step: 0,
        })
    }

    fn layer_count(&self) -> usize {
        self.sizes.len() - 1
    }

    /// Forward pass keeping pre-activations and activations for backprop.
    fn forward_cache(&self, x: &[S]) -> (Vec<Vec<S>>, Vec<Vec<S>>) {
        let mut activations: Vec<Vec<S>> = vec![x.to_vec()];
        let mut pre: Vec<Vec<S>> = Vec::with_capacity(self.layer_count());
        for l in 0..self.layer_count() {
            let fan_in = self.sizes[l];
            let out = self.sizes[l + 1];
            let input = &activations[l];
            let mut z = vec![S::zero(); out];
            for (i, zi) in z.iter_mut().enumerate() {
                let row = &self.weights[l][i * fan_in..(i + 1) * fan_in];
                let mut acc = self.biases[l][i];
                for (&w, &a) in row.iter().zip(input) {
                    acc += w * a;
                }
                *zi = acc;
            }
            let act: Vec<S> = if l + 1 == self.layer_count() {
                z.iter().map(|&v| sigmoid(v)).collect()
            } else {
                z.iter().map(|&v| v.max(S::zero())).collect()
            };
            pre.push(z);
            activations.push(act);
        }
        (pre, activations)
    }

    pub fn forward(&self, x: &[S]) -> S {
        assert_eq!(x.len(), self.sizes[0], "query dimension");
        let (_, activations) = self.forward_cache(x);
        activations.last().unwrap()[0]
    }

    /// Squared loss at the current parameters.
    pub fn loss(&self, x: &[S], target: S) -> S {
        let diff = self.forward(x) - target;
        diff * diff
    }

    /// Gradient of the squared loss with respect to every parameter, in the
    /// flat order used by [`MlpRegressor::param`] / [`MlpRegressor::set_param`].
    pub fn loss_gradient(&self, x: &[S], target: S) -> Vec<S> {
        let (grad_w, grad_b) = self.backprop(x, target);
        let mut flat = Vec::with_capacity(self.param_count());
        for l in 0..self.layer_count() {
            flat.extend_from_slice(&grad_w[l]);
            flat.extend_from_slice(&grad_b[l]);
        }
        flat
    }

    fn backprop(&self, x: &[S], target: S) -> (Vec<Vec<S>>, Vec<Vec<S>>) {
        let layers = self.layer_count();
        let (pre, activations) = self.forward_cache(x);
        let output = activations[layers][0];
        // d/dz of squared loss through the sigmoid output
        let mut delta = vec![S::two() * (output - target) * output * (S::one() - output)];

        let mut grad_w: Vec<Vec<S>> = self.weights.iter().map(|w| vec![S::zero(); w.len()]).collect();
        let mut grad_b: Vec<Vec<S>> = self.biases.iter().map(|b| vec![S::zero(); b.len()]).collect();

        for l in (0..layers).rev() {
            let fan_in = self.sizes[l];
            let input = &activations[l];
            for (i, &d) in delta.iter().enumerate() {
                grad_b[l][i] = d;
                for j in 0..fan_in {
                    grad_w[l][i * fan_in + j] = d * input[j];
                }
            }
            if l == 0 {
                break;
            }
            let mut below = vec![S::zero(); fan_in];
            for (j, b) in below.iter_mut().enumerate() {
                let mut acc = S::zero();
                for (i, &d) in delta.iter().enumerate() {
                    acc += self.weights[l][i * fan_in + j] * d;
                }
                // ReLU gate of the layer below
                *b = if pre[l - 1][j] > S::zero() { acc } else { S::zero() };
            }
            delta = below;
        }
        (grad_w, grad_b)
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    pub fn param(&self, mut idx: usize) -> S {
        for l in 0..self.layer_count() {
            if idx < self.weights[l].len() {
                return self.weights[l][idx];
            }
            idx -= self.weights[l].len();
            if idx < self.biases[l].len() {
                return self.biases[l][idx];
            }
            idx -= self.biases[l].len();
        }
        panic!("parameter index out of range");
    }

    pub fn set_param(&mut self, mut idx: usize, value: S) {
        for l in 0..self.layer_count() {
            if idx < self.weights[l].len() {
                self.weights[l][idx] = value;
                return;
            }
            idx -= self.weights[l].len();
            if idx < self.biases[l].len() {
                self.biases[l][idx] = value;
                return;
            }
            idx -= self.biases[l].len();
        }
        panic!("parameter index out of range");
    }

    fn adam_step(&mut self, grad_w: &[Vec<S>], grad_b: &[Vec<S>]) {
        self.step += 1;
        let b1 = S::of(BETA1);
        let b2 = S::of(BETA2);
        let eps = S::of(ADAM_EPS);
        let bc1 = S::one() - S::of(BETA1.powi(self.step as i32));
        let bc2 = S::one() - S::of(BETA2.powi(self.step as i32));
        let lr = self.lr;
        for l in 0..self.weights.len() {
            for (((w, g), m), v) in self.weights[l]
                .iter_mut()
                .zip(&grad_w[l])
                .zip(self.m_w[l].iter_mut())
                .zip(self.v_w[l].iter_mut())
            {
                *m = b1 * *m + (S::one() - b1) * *g;
                *v = b2 * *v + (S::one() - b2) * *g * *g;
                *w -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
            }
            for (((b, g), m), v) in self.biases[l]
                .iter_mut()
                .zip(&grad_b[l])
                .zip(self.m_b[l].iter_mut())
                .zip(self.v_b[l].iter_mut())
            {
                *m = b1 * *m + (S::one() - b1) * *g;
                *v = b2 * *v + (S::one() - b2) * *g * *g;
                *b -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
            }
        }
    }
}

impl<S: Real> SequentialRegressor<S> for MlpRegressor<S> {
    fn predict(&self, x: &[S]) -> S {
        self.forward(x)
    }

    fn update(&mut self, x: &[S], target: S) {
        assert_eq!(x.len(), self.sizes[0], "update dimension");
        let (grad_w, grad_b) = self.backprop(x, target);
        self.adam_step(&grad_w, &grad_b);
    }

    fn clamp_range(&self) -> (S, S) {
        (S::zero(), S::one())
    }
}
