use jpegclass::FeatureTensor;

use crate::error::{NnError, Result};
use crate::scalar::Real;

/// Dense row-major tensor with up to four dimensions. Feature maps are
/// `[H, W, C]`, channel-fastest; token sequences are `[N, D]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<F> {
    dims: Vec<usize>,
    data: Vec<F>,
}

impl<F: Real> Tensor<F> {
    pub fn new(dims: &[usize], data: Vec<F>) -> Result<Self> {
        if dims.len() > 4 || dims.iter().product::<usize>() != data.len() {
            return Err(NnError::shape("Tensor::new", dims, data.len()));
        }
        Ok(Tensor { dims: dims.to_vec(), data })
    }

    pub fn zeros(dims: &[usize]) -> Self {
        Tensor { dims: dims.to_vec(), data: vec![F::zero(); dims.iter().product()] }
    }

    pub fn from_fn(dims: &[usize], f: impl FnMut(usize) -> F) -> Self {
        Tensor { dims: dims.to_vec(), data: (0..dims.iter().product()).map(f).collect() }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<F> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn reshape(mut self, dims: &[usize]) -> Result<Self> {
        if dims.iter().product::<usize>() != self.data.len() || dims.len() > 4 {
            return Err(NnError::shape("reshape", dims, &self.dims));
        }
        self.dims = dims.to_vec();
        Ok(self)
    }

    pub fn fill(&mut self, v: F) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    /// `self += other`, elementwise.
    pub fn add_assign(&mut self, other: &Tensor<F>) {
        debug_assert_eq!(self.dims, other.dims);
        self.data.iter_mut().zip(&other.data).for_each(|(a, &b)| *a = *a + b);
    }

    pub fn scale(&mut self, s: F) {
        self.data.iter_mut().for_each(|x| *x = *x * s);
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Converts storage type.
    pub fn cast<G: Real>(&self) -> Tensor<G> {
        Tensor { dims: self.dims.clone(), data: self.data.iter().map(|v| G::from_f64(v.as_f64())).collect() }
    }

    /// `[grid_h, grid_w, channels]` view of an extracted feature tensor.
    pub fn from_feature(t: &FeatureTensor<f32>) -> Self {
        Tensor { dims: t.shape().to_vec(), data: t.data.iter().map(|&v| F::from_f64(v as f64)).collect() }
    }

    /// Sum of elementwise products, accumulated in f64.
    pub fn dot(&self, other: &Tensor<F>) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a.as_f64() * b.as_f64()).sum()
    }
}
