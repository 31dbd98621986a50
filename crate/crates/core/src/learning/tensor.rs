use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{shape, Result};

/// Dense row-major array of `f64` with an optional gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    /// Same length as `data` once tracked, empty otherwise.
    pub grad: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self { shape: shape.to_vec(), data: vec![0.0; n], grad: Vec::new() }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(crate::error::shape(format!("shape {shape:?} needs {n} values, got {}", data.len())));
        }
        Ok(Self { shape: shape.to_vec(), data, grad: Vec::new() })
    }

    /// Parameter tensor with a zeroed gradient buffer.
    pub fn param(shape: &[usize]) -> Self {
        let mut t = Self::zeros(shape);
        t.grad = vec![0.0; t.data.len()];
        t
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_tracked(&self) -> bool {
        self.grad.len() == self.data.len()
    }

    pub fn zero_grad(&mut self) {
        self.grad.clear();
        self.grad.resize(self.data.len(), 0.0);
    }

    pub fn fill_normal<R: Rng + ?Sized>(&mut self, std: f64, rng: &mut R) {
        let d = Normal::new(0.0, std).expect("finite std");
        self.data.iter_mut().for_each(|v| *v = d.sample(rng));
    }

    pub fn fill_uniform<R: Rng + ?Sized>(&mut self, bound: f64, rng: &mut R) {
        let d = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        self.data.iter_mut().for_each(|v| *v = d.sample(rng));
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn check_shape(&self, expected: &[usize], name: &str) -> Result<()> {
        if self.shape != expected {
            return Err(shape(format!("{name}: expected shape {expected:?}, got {:?}", self.shape)));
        }
        Ok(())
    }
}

/// Per-parameter gradient buffers laid out like a model's parameter list.
pub type Grads = Vec<Vec<f64>>;

pub fn zero_grads(params: &[&Tensor]) -> Grads {
    params.iter().map(|p| vec![0.0; p.len()]).collect()
}

pub fn add_grads(acc: &mut Grads, other: &Grads) {
    for (a, b) in acc.iter_mut().zip(other) {
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
    }
}

/// Mutable views of buffers `i` and `i + 1`, typically a weight and its bias.
pub fn pair_mut(g: &mut [Vec<f64>], i: usize) -> (&mut [f64], &mut [f64]) {
    let (a, b) = g[i..].split_at_mut(1);
    (&mut a[0], &mut b[0])
}

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    debug_assert_eq!(pred.len(), target.len());
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let d = p - t;
            loss += d * d;
            2.0 * d / n
        })
        .collect();
    (loss / n, grad)
}
