//! Dense real tensors in row-major layout.
//!
//! This is the storage type shared by the reference diagram evaluator and the
//! tensor-network backend. It deliberately stays small: permutation, pairwise
//! contraction over named axis pairs, and elementwise helpers.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TensorError {
    #[error("shape {shape:?} holds {expected} entries but {actual} were given")]
    LengthMismatch {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn strides_for(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * shape[i + 1];
    }
    strides
}

impl DenseTensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self, TensorError> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(TensorError::LengthMismatch {
                shape: shape.to_vec(),
                expected,
                actual: data.len(),
            });
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Builds a tensor by evaluating `f` at every multi-index.
    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let mut out = Self::zeros(shape);
        let mut idx = vec![0; shape.len()];
        for slot in out.data.iter_mut() {
            *slot = f(&idx);
            increment(&mut idx, shape);
        }
        out
    }

    /// The `d × d` identity, i.e. the cup/cap delta.
    pub fn identity(dim: usize) -> Self {
        Self::from_fn(&[dim, dim], |i| if i[0] == i[1] { 1.0 } else { 0.0 })
    }

    /// Generalised Kronecker delta: 1 iff all `arity` indices agree.
    pub fn copy_spider(arity: usize, dim: usize) -> Self {
        let shape = vec![dim; arity];
        Self::from_fn(&shape, |i| {
            if i.windows(2).all(|w| w[0] == w[1]) {
                1.0
            } else {
                0.0
            }
        })
    }

    pub fn random_normal<R: Rng + ?Sized>(shape: &[usize], std_dev: f64, rng: &mut R) -> Self {
        let len: usize = shape.iter().product();
        let data = (0..len)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                z * std_dev
            })
            .collect();
        Self {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        index
            .iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &d)| acc * d + i)
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let o = self.offset(index);
        self.data[o] = value;
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        assert_eq!(self.shape, other.shape, "add_assign shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape, other.shape, "max_abs_diff shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Reorders axes: axis `k` of the result is axis `order[k]` of `self`.
    pub fn permute(&self, order: &[usize]) -> Self {
        assert_eq!(order.len(), self.rank(), "permutation rank mismatch");
        if order.iter().enumerate().all(|(k, &o)| k == o) {
            return self.clone();
        }
        let new_shape: Vec<usize> = order.iter().map(|&o| self.shape[o]).collect();
        let old_strides = strides_for(&self.shape);
        let mapped: Vec<usize> = order.iter().map(|&o| old_strides[o]).collect();
        let mut out = Vec::with_capacity(self.data.len());
        let mut idx = vec![0; new_shape.len()];
        for _ in 0..self.data.len() {
            let src: usize = idx.iter().zip(&mapped).map(|(i, s)| i * s).sum();
            out.push(self.data[src]);
            increment(&mut idx, &new_shape);
        }
        Self {
            shape: new_shape,
            data: out,
        }
    }

    /// Sums over pairs of axes `(i, j)` of `self` and `other` that must have
    /// equal dimension. Result axes are the free axes of `self` in order,
    /// followed by the free axes of `other` in order.
    pub fn contract(&self, other: &Self, pairs: &[(usize, usize)]) -> Self {
        let left_summed: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let right_summed: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        for &(i, j) in pairs {
            assert_eq!(
                self.shape[i], other.shape[j],
                "contracted axes must have equal dimension"
            );
        }
        let left_free: Vec<usize> = (0..self.rank()).filter(|a| !left_summed.contains(a)).collect();
        let right_free: Vec<usize> = (0..other.rank())
            .filter(|a| !right_summed.contains(a))
            .collect();

        let a = self.permute(&[left_free.clone(), left_summed].concat());
        let b = other.permute(&[right_summed, right_free.clone()].concat());
        let m: usize = left_free.iter().map(|&i| self.shape[i]).product();
        let k: usize = pairs.iter().map(|&(i, _)| self.shape[i]).product();
        let n: usize = right_free.iter().map(|&j| other.shape[j]).product();

        let mut data = vec![0.0; m * n];
        for row in 0..m {
            let a_row = &a.data[row * k..(row + 1) * k];
            let out_row = &mut data[row * n..(row + 1) * n];
            for (kk, &av) in a_row.iter().enumerate() {
                if av == 0.0 {
                    continue;
                }
                let b_row = &b.data[kk * n..(kk + 1) * n];
                for (o, &bv) in out_row.iter_mut().zip(b_row) {
                    *o += av * bv;
                }
            }
        }
        let shape: Vec<usize> = left_free
            .iter()
            .map(|&i| self.shape[i])
            .chain(right_free.iter().map(|&j| other.shape[j]))
            .collect();
        Self { shape, data }
    }

    /// Sums the diagonal of two axes of equal dimension, removing both.
    pub fn trace(&self, a: usize, b: usize) -> Self {
        assert!(a != b && self.shape[a] == self.shape[b]);
        let keep: Vec<usize> = (0..self.rank()).filter(|&x| x != a && x != b).collect();
        let shape: Vec<usize> = keep.iter().map(|&x| self.shape[x]).collect();
        let mut out = Self::zeros(&shape);
        let mut full = vec![0; self.rank()];
        let mut idx = vec![0; shape.len()];
        for slot in out.data.iter_mut() {
            for (k, &axis) in keep.iter().enumerate() {
                full[axis] = idx[k];
            }
            let mut acc = 0.0;
            for d in 0..self.shape[a] {
                full[a] = d;
                full[b] = d;
                acc += self.get(&full);
            }
            *slot = acc;
            increment(&mut idx, &shape);
        }
        out
    }
}

/// Row-major odometer step. Wraps to all zeros after the last index.
pub(crate) fn increment(idx: &mut [usize], shape: &[usize]) {
    for k in (0..idx.len()).rev() {
        idx[k] += 1;
        if idx[k] < shape[k] {
            return;
        }
        idx[k] = 0;
    }
}
