//! Dense row-major tensors. 4-D tensors use the batch×channel×height×width layout.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::real::Real;

/// Dense N-dimensional array. Storage is shared copy-on-write, so cloning is cheap and
/// values handed to a graph are never mutated behind its back.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Arc<Vec<T>>,
}

impl<T: Real> Tensor<T> {
    pub fn new(shape: impl Into<Vec<usize>>, data: Vec<T>) -> Result<Self> {
        let shape = shape.into();
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::ShapeMismatch {
                op: "tensor",
                expected: shape,
                actual: vec![data.len()],
            });
        }
        Ok(Self {
            shape,
            data: Arc::new(data),
        })
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: impl Into<Vec<usize>>, value: T) -> Self {
        let shape = shape.into();
        let numel = shape.iter().product();
        Self {
            shape,
            data: Arc::new(vec![value; numel]),
        }
    }

    pub fn scalar(value: T) -> Self {
        Self {
            shape: vec![1],
            data: Arc::new(vec![value]),
        }
    }

    pub fn from_fn(shape: impl Into<Vec<usize>>, mut f: impl FnMut(usize) -> T) -> Self {
        let shape = shape.into();
        let numel: usize = shape.iter().product();
        Self {
            shape,
            data: Arc::new((0..numel).map(&mut f).collect()),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    /// Mutable access; copies the buffer first if it is shared.
    pub fn data_mut(&mut self) -> &mut [T] {
        Arc::make_mut(&mut self.data).as_mut_slice()
    }

    pub fn into_vec(self) -> Vec<T> {
        Arc::try_unwrap(self.data).unwrap_or_else(|shared| (*shared).clone())
    }

    pub fn reshape(&self, shape: impl Into<Vec<usize>>) -> Result<Self> {
        let shape = shape.into();
        if shape.iter().product::<usize>() != self.numel() {
            return Err(Error::ShapeMismatch {
                op: "reshape",
                expected: shape,
                actual: self.shape.clone(),
            });
        }
        Ok(Self {
            shape,
            data: self.data.clone(),
        })
    }

    /// Interprets the tensor as N×C×H×W.
    pub fn dims4(&self) -> Result<[usize; 4]> {
        match self.shape[..] {
            [n, c, h, w] => Ok([n, c, h, w]),
            _ => Err(Error::ShapeMismatch {
                op: "dims4",
                expected: vec![0, 0, 0, 0],
                actual: self.shape.clone(),
            }),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape.clone(),
            data: Arc::new(self.data.iter().map(|&v| f(v)).collect()),
        }
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: Arc::new(self.data.iter().map(|v| U::of(v.as_f64())).collect()),
        }
    }

    /// Slice of one batch entry `n` along the leading dimension.
    pub fn batch_item(&self, n: usize) -> Result<Self> {
        let lead = *self.shape.first().unwrap_or(&0);
        if n >= lead {
            return Err(crate::error::invalid("batch_item", "index out of range"));
        }
        let stride = self.numel() / lead;
        Ok(Self {
            shape: self.shape[1..].to_vec(),
            data: Arc::new(self.data[n * stride..(n + 1) * stride].to_vec()),
        })
    }

    /// Concatenates equally shaped tensors along a new leading batch dimension.
    pub fn stack(items: &[Self]) -> Result<Self> {
        let first = items
            .first()
            .ok_or_else(|| crate::error::invalid("stack", "no tensors to stack"))?;
        let mut data = Vec::with_capacity(first.numel() * items.len());
        for t in items {
            if t.shape != first.shape {
                return Err(Error::ShapeMismatch {
                    op: "stack",
                    expected: first.shape.clone(),
                    actual: t.shape.clone(),
                });
            }
            data.extend_from_slice(t.data());
        }
        let mut shape = vec![items.len()];
        shape.extend_from_slice(&first.shape);
        Ok(Self {
            shape,
            data: Arc::new(data),
        })
    }

    /// Mirrors the last (width) axis.
    pub fn flip_horizontal(&self) -> Self {
        let w = *self.shape.last().unwrap_or(&1);
        let mut data = Vec::with_capacity(self.numel());
        for row in self.data.chunks(w.max(1)) {
            data.extend(row.iter().rev().copied());
        }
        Self {
            shape: self.shape.clone(),
            data: Arc::new(data),
        }
    }

    /// Reorders channels (axis 1 of an N×C×H×W tensor) so output channel `c` is input
    /// channel `perm[c]`.
    pub fn permute_channels(&self, perm: &[usize]) -> Result<Self> {
        let [n, c, h, w] = self.dims4()?;
        if perm.len() != c || perm.iter().any(|&p| p >= c) {
            return Err(crate::error::invalid(
                "permute_channels",
                "permutation does not match channel count",
            ));
        }
        let plane = h * w;
        let mut data = vec![T::zero(); self.numel()];
        for b in 0..n {
            for (dst, &src) in perm.iter().enumerate() {
                let s = (b * c + src) * plane;
                let d = (b * c + dst) * plane;
                data[d..d + plane].copy_from_slice(&self.data[s..s + plane]);
            }
        }
        Ok(Self {
            shape: self.shape.clone(),
            data: Arc::new(data),
        })
    }
}
