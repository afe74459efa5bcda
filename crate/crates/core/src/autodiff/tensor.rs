use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

/// Dense row-major array of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    pub requires_grad: bool,
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::invalid_shape(
                "tensor",
                format!("zero-sized dimension in {shape:?}"),
            ));
        }
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::invalid_shape(
                "tensor",
                format!("shape {shape:?} holds {numel} values, got {}", data.len()),
            ));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
            requires_grad: false,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, 1.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let numel = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; numel],
            requires_grad: false,
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self::full(&[1], value)
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> f64) -> Self {
        let numel: usize = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: (0..numel).map(&mut f).collect(),
            requires_grad: false,
        }
    }

    /// Entries i.i.d. uniform in `(-bound, bound)`.
    pub fn uniform(shape: &[usize], bound: f64, rng: &mut impl Rng) -> Self {
        Self::from_fn(shape, |_| rng.random_range(-bound..bound))
    }

    pub fn eye(n: usize) -> Self {
        Self::from_fn(&[n, n], |i| if i / n == i % n { 1.0 } else { 0.0 })
    }

    pub fn with_grad(mut self) -> Self {
        self.requires_grad = true;
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
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

    /// Size of the trailing (channel) axis.
    pub fn channels(&self) -> usize {
        *self.shape.last().expect("tensor has at least one axis")
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != self.data.len() {
            return Err(Error::shape("reshape", &self.shape, shape));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
            requires_grad: false,
        }
    }

    /// Sample `index` along the leading axis.
    pub fn sample(&self, index: usize) -> Tensor {
        let per = self.data.len() / self.shape[0];
        let shape = if self.shape.len() == 1 {
            vec![1]
        } else {
            self.shape[1..].to_vec()
        };
        Tensor {
            shape,
            data: self.data[index * per..(index + 1) * per].to_vec(),
            requires_grad: false,
        }
    }

    /// Gather samples along the leading axis.
    pub fn select(&self, indices: &[usize]) -> Tensor {
        let per = self.data.len() / self.shape[0];
        let mut data = Vec::with_capacity(indices.len() * per);
        for &i in indices {
            data.extend_from_slice(&self.data[i * per..(i + 1) * per]);
        }
        let mut shape = self.shape.clone();
        shape[0] = indices.len();
        Tensor {
            shape,
            data,
            requires_grad: false,
        }
    }

    /// Swap axis 1 with the last axis: `[n, c, s...] -> [n, s..., c]`.
    pub fn channels_last(&self) -> Tensor {
        let n = self.shape[0];
        let c = self.shape[1];
        let spatial: usize = self.shape[2..].iter().product();
        let mut out = vec![0.0; self.data.len()];
        for b in 0..n {
            for ch in 0..c {
                let src = &self.data[(b * c + ch) * spatial..(b * c + ch + 1) * spatial];
                for (s, &v) in src.iter().enumerate() {
                    out[(b * spatial + s) * c + ch] = v;
                }
            }
        }
        let mut shape = vec![n];
        shape.extend_from_slice(&self.shape[2..]);
        shape.push(c);
        Tensor {
            shape,
            data: out,
            requires_grad: false,
        }
    }

    /// Inverse of [`Tensor::channels_last`].
    pub fn channels_first(&self) -> Tensor {
        let n = self.shape[0];
        let c = self.channels();
        let spatial_shape = &self.shape[1..self.shape.len() - 1];
        let spatial: usize = spatial_shape.iter().product();
        let mut out = vec![0.0; self.data.len()];
        for b in 0..n {
            for s in 0..spatial {
                for ch in 0..c {
                    out[(b * c + ch) * spatial + s] = self.data[(b * spatial + s) * c + ch];
                }
            }
        }
        let mut shape = vec![n, c];
        shape.extend_from_slice(spatial_shape);
        Tensor {
            shape,
            data: out,
            requires_grad: false,
        }
    }
}

/// Dense row-major array of complex values.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexTensor {
    shape: Vec<usize>,
    data: Vec<Complex64>,
}

impl ComplexTensor {
    pub fn new(shape: &[usize], data: Vec<Complex64>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::invalid_shape(
                "complex tensor",
                format!("shape {shape:?} holds {numel} values, got {}", data.len()),
            ));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![Complex64::new(0.0, 0.0); shape.iter().product()],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Real inner product `Σ Re(conj(a)·b)`.
    pub fn real_dot(&self, other: &ComplexTensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum()
    }

    /// Interleaved `(re, im)` view as a real tensor with a trailing axis of 2.
    pub fn to_interleaved(&self) -> Tensor {
        let mut shape = self.shape.clone();
        shape.push(2);
        let data = self.data.iter().flat_map(|z| [z.re, z.im]).collect();
        Tensor {
            shape,
            data,
            requires_grad: false,
        }
    }

    pub fn from_interleaved(t: &Tensor) -> Result<Self> {
        if t.channels() != 2 {
            return Err(Error::invalid_shape(
                "complex tensor",
                format!("trailing axis must be 2, got {:?}", t.shape()),
            ));
        }
        let shape = t.shape()[..t.ndim() - 1].to_vec();
        let data = t
            .data()
            .chunks_exact(2)
            .map(|p| Complex64::new(p[0], p[1]))
            .collect();
        Ok(Self { shape, data })
    }
}
