//! Dense row-major real tensor used for signals, images, feature maps,
//! parameters and gradients alike.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if shape.contains(&0) {
            return Err(Error::ShapeMismatch(format!("zero-sized axis in {shape:?}")));
        }
        if expected != data.len() {
            return Err(Error::ShapeMismatch(format!("shape {shape:?} needs {expected} values, got {}", data.len())));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        Self { shape: shape.to_vec(), data: vec![value; shape.iter().product()] }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> f64) -> Self {
        let n = shape.iter().product();
        Self { shape: shape.to_vec(), data: (0..n).map(&mut f).collect() }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Self { shape: vec![data.len()], data }
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

    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        Self::new(shape.to_vec(), self.data)
    }

    pub fn ensure_finite(&self) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFiniteInput)
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.expect_same_shape(other)?;
        Ok(Self {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        self.expect_same_shape(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn sum_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |a - b|`; panics on shape mismatch, meant for checks and tests.
    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        assert_eq!(self.shape, other.shape, "max_abs_diff on different shapes");
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn dot(&self, other: &Tensor) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn expect_same_shape(&self, other: &Tensor) -> Result<()> {
        if self.shape == other.shape {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!("{:?} vs {:?}", self.shape, other.shape)))
        }
    }

    /// Outer product of 1-D tensors, `out[i, j, ...] = a[i] * b[j] * ...`.
    pub fn outer(factors: &[&Tensor]) -> Self {
        let shape: Vec<usize> = factors.iter().map(|f| f.len()).collect();
        let mut out = Tensor::filled(&shape, 1.0);
        let n = out.len();
        for flat in 0..n {
            let mut rem = flat;
            let mut v = 1.0;
            for (axis, f) in factors.iter().enumerate().rev() {
                let extent = shape[axis];
                v *= f.data[rem % extent];
                rem /= extent;
            }
            out.data[flat] = v;
        }
        out
    }

    /// Concatenate along axis 1 (channels) of 4-D `[B, C, H, W]` tensors.
    pub fn concat_channels(parts: &[&Tensor]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::ShapeMismatch("nothing to concatenate".into()))?;
        if first.rank() != 4 {
            return Err(Error::ShapeMismatch(format!("channel concat needs rank 4, got {:?}", first.shape)));
        }
        let (b, h, w) = (first.shape[0], first.shape[2], first.shape[3]);
        let mut channels = 0;
        for p in parts {
            if p.rank() != 4 || p.shape[0] != b || p.shape[2] != h || p.shape[3] != w {
                return Err(Error::ShapeMismatch(format!("cannot concat {:?} with {:?}", first.shape, p.shape)));
            }
            channels += p.shape[1];
        }
        let plane = h * w;
        let mut data = Vec::with_capacity(b * channels * plane);
        for bi in 0..b {
            for p in parts {
                let c = p.shape[1];
                data.extend_from_slice(&p.data[bi * c * plane..(bi + 1) * c * plane]);
            }
        }
        Tensor::new(vec![b, channels, h, w], data)
    }

    /// Channels `[start, start + len)` of a 4-D tensor.
    pub fn slice_channels(&self, start: usize, len: usize) -> Result<Self> {
        if self.rank() != 4 || start + len > self.shape[1] || len == 0 {
            return Err(Error::ShapeMismatch(format!("channel slice {start}..{} of {:?}", start + len, self.shape)));
        }
        let (b, c, h, w) = (self.shape[0], self.shape[1], self.shape[2], self.shape[3]);
        let plane = h * w;
        let mut data = Vec::with_capacity(b * len * plane);
        for bi in 0..b {
            let base = (bi * c + start) * plane;
            data.extend_from_slice(&self.data[base..base + len * plane]);
        }
        Tensor::new(vec![b, len, h, w], data)
    }

    /// Rows `[start, start + len)` of the leading axis.
    pub fn slice_leading(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.shape[0] || len == 0 {
            return Err(Error::ShapeMismatch(format!("leading slice {start}..{} of {:?}", start + len, self.shape)));
        }
        let stride: usize = self.shape[1..].iter().product();
        let mut shape = self.shape.clone();
        shape[0] = len;
        Tensor::new(shape, self.data[start * stride..(start + len) * stride].to_vec())
    }

    /// Stack equally shaped tensors along a new leading axis.
    pub fn stack(items: &[&Tensor]) -> Result<Self> {
        let first = items.first().ok_or_else(|| Error::ShapeMismatch("nothing to stack".into()))?;
        let mut data = Vec::with_capacity(items.len() * first.len());
        for t in items {
            first.expect_same_shape(t)?;
            data.extend_from_slice(&t.data);
        }
        let mut shape = vec![items.len()];
        shape.extend_from_slice(&first.shape);
        Tensor::new(shape, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_length() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::new(vec![2, 0], vec![]).is_err());
    }

    #[test]
    fn outer_matches_manual() {
        let a = Tensor::from_vec(vec![1.0, 2.0]);
        let b = Tensor::from_vec(vec![3.0, 4.0, 5.0]);
        let o = Tensor::outer(&[&a, &b]);
        assert_eq!(o.shape(), &[2, 3]);
        assert_eq!(o.data(), &[3.0, 4.0, 5.0, 6.0, 8.0, 10.0]);
    }

    #[test]
    fn concat_then_slice_recovers_parts() {
        let a = Tensor::from_fn(&[2, 1, 2, 2], |i| i as f64);
        let b = Tensor::from_fn(&[2, 2, 2, 2], |i| 100.0 + i as f64);
        let c = Tensor::concat_channels(&[&a, &b]).unwrap();
        assert_eq!(c.shape(), &[2, 3, 2, 2]);
        assert_eq!(c.slice_channels(0, 1).unwrap(), a);
        assert_eq!(c.slice_channels(1, 2).unwrap(), b);
    }

    #[test]
    fn non_finite_detected() {
        let t = Tensor::from_vec(vec![1.0, f64::NAN]);
        assert!(matches!(t.ensure_finite(), Err(Error::NonFiniteInput)));
    }
}
