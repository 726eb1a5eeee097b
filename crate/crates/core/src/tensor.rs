//! Dense `f64` tensors with the vector primitives the rest of the crate
//! builds on.
//!
//! Tensors are immutable value objects: every operation returns a new
//! tensor, so shared references are always safe to read concurrently.
//! Multi-dimensional data is stored flattened in row-major order; the
//! attack and solver code treats everything as a vector over the input
//! dimension.

use crate::error::{Error, Result};

/// Shape of a tensor: a non-empty list of dimensions, each at least 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Shape(Vec<usize>);

impl Shape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidShape("shape must be non-empty".into()));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidShape(format!("zero dimension in {dims:?}")));
        }
        Ok(Shape(dims))
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    /// Total number of elements.
    pub fn len(&self) -> usize {
        self.0.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false // dims are all >= 1
    }
}

impl From<usize> for Shape {
    fn from(n: usize) -> Self {
        Shape(vec![n.max(1)])
    }
}

/// Dense tensor of 64-bit floats. All elements are finite; constructors
/// reject NaN/Inf and arithmetic keeps the invariant (debug-checked).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    data: Vec<f64>,
    shape: Shape,
}

impl Tensor {
    /// Build a tensor, validating shape/data agreement and finiteness.
    pub fn from_shape_vec(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if shape.len() != data.len() {
            return Err(Error::InvalidShape(format!(
                "shape {:?} holds {} elements, data has {}",
                shape.dims(),
                shape.len(),
                data.len()
            )));
        }
        for (index, &value) in data.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite { index, value });
            }
        }
        Ok(Tensor { data, shape })
    }

    /// One-dimensional tensor from a vector.
    pub fn from_vec(data: Vec<f64>) -> Result<Self> {
        let shape = Shape::new(vec![data.len().max(1)])?;
        Self::from_shape_vec(shape, data)
    }

    /// All-zero tensor of the given shape.
    pub fn zeros(shape: Shape) -> Self {
        let n = shape.len();
        Tensor {
            data: vec![0.0; n],
            shape,
        }
    }

    /// Zero tensor with the same shape as `self`.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.shape.clone())
    }

    /// Internal constructor for data produced by our own arithmetic.
    /// Finiteness is an invariant of the inputs; re-checked in debug builds.
    pub(crate) fn from_computed(shape: Shape, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.len(), data.len());
        debug_assert!(
            data.iter().all(|v| v.is_finite()),
            "non-finite element produced by tensor arithmetic"
        );
        Tensor { data, shape }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    fn check_same_len(&self, other: &Tensor, context: &'static str) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::ShapeMismatch {
                context,
                left: self.shape.dims().to_vec(),
                right: other.shape.dims().to_vec(),
            });
        }
        Ok(())
    }

    /// Inner product Σ aᵢbᵢ. Operands must have the same total length.
    pub fn dot(&self, other: &Tensor) -> Result<f64> {
        self.check_same_len(other, "dot")?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum())
    }

    /// Euclidean norm; zero exactly when the tensor is all-zero.
    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest absolute element.
    pub fn linf_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `alpha * x + self`, elementwise.
    pub fn axpy(&self, alpha: f64, x: &Tensor) -> Result<Tensor> {
        self.check_same_len(x, "axpy")?;
        let data = self
            .data
            .iter()
            .zip(&x.data)
            .map(|(y, xi)| alpha * xi + y)
            .collect();
        Ok(Tensor::from_computed(self.shape.clone(), data))
    }

    /// `alpha * self`, elementwise.
    pub fn scale(&self, alpha: f64) -> Tensor {
        let data = self.data.iter().map(|v| alpha * v).collect();
        Tensor::from_computed(self.shape.clone(), data)
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        other.axpy(1.0, self)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.check_same_len(other, "sub")?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Tensor::from_computed(self.shape.clone(), data))
    }

    /// Componentwise sign with the convention `sign(0) = 0`.
    pub fn sign(&self) -> Tensor {
        let data = self
            .data
            .iter()
            .map(|&v| {
                if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            })
            .collect();
        Tensor::from_computed(self.shape.clone(), data)
    }

    /// L∞ distance between two tensors of equal length.
    pub fn linf_distance(&self, other: &Tensor) -> Result<f64> {
        self.check_same_len(other, "linf_distance")?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }
}
