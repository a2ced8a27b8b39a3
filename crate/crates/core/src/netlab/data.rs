//! Synthetic four-class shape images.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CLASS_NAMES: [&str; 4] = ["circle", "square", "cross", "triangle"];
pub const IMAGE_SIZE: usize = 32;
const NOISE_STD: f64 = 0.02;
const JITTER: f64 = 6.0;

/// Images `[n, 1, 32, 32]` with integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub images: Tensor,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn new(images: Tensor, labels: Vec<usize>) -> Result<Self> {
        if images.rank() != 4 || images.shape()[0] != labels.len() {
            return Err(Error::ShapeMismatch(format!("{} labels for images {:?}", labels.len(), images.shape())));
        }
        Ok(Self { images, labels })
    }

    /// A dataset with no samples of the given per-sample shape.
    pub fn empty(channels: usize, height: usize, width: usize) -> Self {
        Self { images: Tensor::zeros(&[0, channels, height, width]), labels: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Gathers the samples at `indices` into a batch.
    pub fn batch(&self, indices: &[usize]) -> (Tensor, Vec<usize>) {
        let s = self.images.shape();
        let per: usize = s[1..].iter().product();
        let src = self.images.data();
        let mut data = Vec::with_capacity(indices.len() * per);
        for &i in indices {
            data.extend_from_slice(&src[i * per..(i + 1) * per]);
        }
        let mut shape = s.to_vec();
        shape[0] = indices.len();
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        (Tensor::new(shape, data).expect("batch shape"), labels)
    }

    pub fn class_histogram(&self, classes: usize) -> Vec<usize> {
        let mut h = vec![0; classes];
        for &l in &self.labels {
            h[l] += 1;
        }
        h
    }
}

fn inside(class: usize, dx: f64, dy: f64, size: f64) -> bool {
    match class {
        0 => dx * dx + dy * dy <= size * size,
        1 => dx.abs() <= size * 0.8 && dy.abs() <= size * 0.8,
        2 => {
            let arm = size * 0.3;
            (dx.abs() <= arm && dy.abs() <= size) || (dy.abs() <= arm && dx.abs() <= size)
        }
        _ => {
            // apex up, base at dy = size; height 2 * size
            let t = (dy + size) / (2.0 * size);
            (0.0..=1.0).contains(&t) && dx.abs() <= t * size
        }
    }
}

/// Draws `n` labelled shape images deterministically from `seed`.
///
/// Each class is drawn uniformly; the centre is jittered by up to 6 px and
/// the size scale (radius or half-extent) is drawn from 3 to 8 px.
/// Foreground is 1, background 0, plus Gaussian pixel noise (std 0.02)
/// clamped to `[0, 1]`.
pub fn synth_shapes(n: usize, seed: u64) -> Dataset {
    if n == 0 {
        return Dataset::empty(1, IMAGE_SIZE, IMAGE_SIZE);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, NOISE_STD).expect("positive std");
    let plane = IMAGE_SIZE * IMAGE_SIZE;
    let mut data = vec![0.0; n * plane];
    let mut labels = Vec::with_capacity(n);
    let mid = (IMAGE_SIZE as f64 - 1.0) / 2.0;
    for img in data.chunks_mut(plane) {
        let class = rng.random_range(0..CLASS_NAMES.len());
        let cx = mid + rng.random_range(-JITTER..=JITTER);
        let cy = mid + rng.random_range(-JITTER..=JITTER);
        let size = rng.random_range(3.0..8.0);
        for (i, px) in img.iter_mut().enumerate() {
            let (y, x) = ((i / IMAGE_SIZE) as f64, (i % IMAGE_SIZE) as f64);
            let fg = if inside(class, x - cx, y - cy, size) { 1.0 } else { 0.0 };
            *px = (fg + noise.sample(&mut rng)).clamp(0.0, 1.0);
        }
        labels.push(class);
    }
    let images = Tensor::new(vec![n, 1, IMAGE_SIZE, IMAGE_SIZE], data).expect("dataset shape");
    Dataset { images, labels }
}
