//! Tensor kernels behind the tape nodes: convolution, pooling, dense layer
//! and softmax cross-entropy, each with its backward rule.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn dims4(t: &Tensor, what: &str) -> Result<(usize, usize, usize, usize)> {
    match *t.shape() {
        [b, c, h, w] => Ok((b, c, h, w)),
        _ => Err(Error::ShapeMismatch(format!("{what} must be [B, C, H, W], got {:?}", t.shape()))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub in_ch: usize,
    pub out_ch: usize,
    pub k: usize,
    pub stride: usize,
    pub padding: usize,
    pub h: usize,
    pub w: usize,
    pub ho: usize,
    pub wo: usize,
}

impl ConvGeometry {
    pub fn new(x: &Tensor, weights: &Tensor, bias: &Tensor, stride: usize, padding: usize) -> Result<Self> {
        let (_, c, h, w) = dims4(x, "conv input")?;
        let (oc, ic, kh, kw) = dims4(weights, "conv weights")?;
        if ic != c || kh != kw {
            return Err(Error::ShapeMismatch(format!(
                "weights {:?} do not fit input {:?}",
                weights.shape(),
                x.shape()
            )));
        }
        if bias.shape() != [oc] {
            return Err(Error::ShapeMismatch(format!("bias {:?} for {oc} filters", bias.shape())));
        }
        if !(stride == 1 || stride == 2) {
            return Err(Error::ShapeMismatch(format!("stride {stride} not in {{1, 2}}")));
        }
        if h + 2 * padding < kh || w + 2 * padding < kw {
            return Err(Error::ShapeMismatch("kernel larger than padded input".into()));
        }
        let ho = (h + 2 * padding - kh) / stride + 1;
        let wo = (w + 2 * padding - kw) / stride + 1;
        Ok(Self { in_ch: c, out_ch: oc, k: kh, stride, padding, h, w, ho, wo })
    }

    fn patch_len(&self) -> usize {
        self.in_ch * self.k * self.k
    }

    fn out_plane(&self) -> usize {
        self.ho * self.wo
    }
}

/// Lays out one sample as a `[C*k*k, Ho*Wo]` patch matrix.
fn im2col(g: &ConvGeometry, x: &[f64], cols: &mut [f64]) {
    let plane = g.out_plane();
    for c in 0..g.in_ch {
        for ki in 0..g.k {
            for kj in 0..g.k {
                let row = (c * g.k + ki) * g.k + kj;
                let dst = &mut cols[row * plane..(row + 1) * plane];
                for oi in 0..g.ho {
                    let i = (oi * g.stride + ki) as isize - g.padding as isize;
                    let out_row = &mut dst[oi * g.wo..(oi + 1) * g.wo];
                    if i < 0 || i as usize >= g.h {
                        out_row.fill(0.0);
                        continue;
                    }
                    let src = &x[(c * g.h + i as usize) * g.w..(c * g.h + i as usize + 1) * g.w];
                    for (oj, o) in out_row.iter_mut().enumerate() {
                        let j = (oj * g.stride + kj) as isize - g.padding as isize;
                        *o = if j < 0 || j as usize >= g.w { 0.0 } else { src[j as usize] };
                    }
                }
            }
        }
    }
}

fn col2im(g: &ConvGeometry, cols: &[f64], dx: &mut [f64]) {
    let plane = g.out_plane();
    for c in 0..g.in_ch {
        for ki in 0..g.k {
            for kj in 0..g.k {
                let row = (c * g.k + ki) * g.k + kj;
                let src = &cols[row * plane..(row + 1) * plane];
                for oi in 0..g.ho {
                    let i = (oi * g.stride + ki) as isize - g.padding as isize;
                    if i < 0 || i as usize >= g.h {
                        continue;
                    }
                    let base = (c * g.h + i as usize) * g.w;
                    for oj in 0..g.wo {
                        let j = (oj * g.stride + kj) as isize - g.padding as isize;
                        if j >= 0 && (j as usize) < g.w {
                            dx[base + j as usize] += src[oi * g.wo + oj];
                        }
                    }
                }
            }
        }
    }
}

/// `C = alpha * op(A) * op(B) + beta * C` on row-major buffers.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], a_t: bool, b: &[f64], b_t: bool, beta: f64, c: &mut [f64]) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserts above bound every index the strides can reach.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub fn conv2d_forward(x: &Tensor, weights: &Tensor, bias: &Tensor, stride: usize, padding: usize) -> Result<Tensor> {
    let g = ConvGeometry::new(x, weights, bias, stride, padding)?;
    let batch = x.shape()[0];
    let in_len = g.in_ch * g.h * g.w;
    let out_len = g.out_ch * g.out_plane();
    let mut out = Tensor::zeros(&[batch, g.out_ch, g.ho, g.wo]);
    out.data_mut().par_chunks_mut(out_len).zip(x.data().par_chunks(in_len)).for_each(|(y, xs)| {
        let mut cols = vec![0.0; g.patch_len() * g.out_plane()];
        im2col(&g, xs, &mut cols);
        for (o, plane) in y.chunks_mut(g.out_plane()).enumerate() {
            plane.fill(bias.data()[o]);
        }
        gemm(g.out_ch, g.patch_len(), g.out_plane(), weights.data(), false, &cols, false, 1.0, y);
    });
    Ok(out)
}

pub struct ConvGrads {
    pub dx: Tensor,
    pub dw: Tensor,
    pub db: Tensor,
}

/// Per-sample gradients are computed independently and summed in sample
/// order, so the result does not depend on the thread schedule.
pub fn conv2d_backward(
    x: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
    stride: usize,
    padding: usize,
    grad: &Tensor,
) -> Result<ConvGrads> {
    let g = ConvGeometry::new(x, weights, bias, stride, padding)?;
    let batch = x.shape()[0];
    if grad.shape() != [batch, g.out_ch, g.ho, g.wo] {
        return Err(Error::ShapeMismatch(format!("conv gradient {:?}", grad.shape())));
    }
    let in_len = g.in_ch * g.h * g.w;
    let out_len = g.out_ch * g.out_plane();
    let wlen = weights.len();
    let mut dx = Tensor::zeros(x.shape());
    let per_sample: Vec<Vec<f64>> = dx
        .data_mut()
        .par_chunks_mut(in_len)
        .zip(x.data().par_chunks(in_len))
        .zip(grad.data().par_chunks(out_len))
        .map(|((dxs, xs), gs)| {
            let mut cols = vec![0.0; g.patch_len() * g.out_plane()];
            im2col(&g, xs, &mut cols);
            let mut dw = vec![0.0; wlen];
            gemm(g.out_ch, g.out_plane(), g.patch_len(), gs, false, &cols, true, 0.0, &mut dw);
            gemm(g.patch_len(), g.out_ch, g.out_plane(), weights.data(), true, gs, false, 0.0, &mut cols);
            col2im(&g, &cols, dxs);
            dw
        })
        .collect();
    let mut dw = Tensor::zeros(weights.shape());
    for s in &per_sample {
        for (a, b) in dw.data_mut().iter_mut().zip(s) {
            *a += b;
        }
    }
    let mut db = Tensor::zeros(&[g.out_ch]);
    for b in 0..batch {
        for o in 0..g.out_ch {
            let base = b * out_len + o * g.out_plane();
            db.data_mut()[o] += grad.data()[base..base + g.out_plane()].iter().sum::<f64>();
        }
    }
    Ok(ConvGrads { dx, dw, db })
}

/// 2x2 max pooling with stride 2. Returns the output and, per output, the
/// flat input index of the maximum (first index wins on ties).
pub fn maxpool2_forward(x: &Tensor) -> Result<(Tensor, Vec<usize>)> {
    let (b, c, h, w) = dims4(x, "max-pool input")?;
    even_spatial(h, w)?;
    let (ho, wo) = (h / 2, w / 2);
    let mut out = Tensor::zeros(&[b, c, ho, wo]);
    let mut argmax = vec![0; b * c * ho * wo];
    let src = x.data();
    for p in 0..b * c {
        for i in 0..ho {
            for j in 0..wo {
                let mut best = (2 * i) * w + 2 * j + p * h * w;
                for (di, dj) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = (2 * i + di) * w + 2 * j + dj + p * h * w;
                    if src[idx] > src[best] {
                        best = idx;
                    }
                }
                let o = (p * ho + i) * wo + j;
                out.data_mut()[o] = src[best];
                argmax[o] = best;
            }
        }
    }
    Ok((out, argmax))
}

/// Smallest gap between the winner and the runner-up over all windows.
/// Smallest winner-to-runner-up gap over all windows. With
/// `skip_zero_ties`, windows whose two largest values are both exactly zero
/// are ignored: behind a ReLU these stay zero under small perturbations.
pub fn maxpool2_margin(x: &Tensor, skip_zero_ties: bool) -> f64 {
    let (b, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let src = x.data();
    let mut margin = f64::INFINITY;
    for p in 0..b * c {
        for i in 0..h / 2 {
            for j in 0..w / 2 {
                let mut v = [0.0; 4];
                for (n, (di, dj)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
                    v[n] = src[p * h * w + (2 * i + di) * w + 2 * j + dj];
                }
                v.sort_by(|a, b| b.partial_cmp(a).unwrap());
                if skip_zero_ties && v[0] == 0.0 && v[1] == 0.0 {
                    continue;
                }
                margin = margin.min(v[0] - v[1]);
            }
        }
    }
    margin
}

pub fn maxpool2_backward(input_shape: &[usize], argmax: &[usize], grad: &Tensor) -> Tensor {
    let mut dx = Tensor::zeros(input_shape);
    for (o, &src) in argmax.iter().enumerate() {
        dx.data_mut()[src] += grad.data()[o];
    }
    dx
}

fn even_spatial(h: usize, w: usize) -> Result<()> {
    for n in [h, w] {
        if n < 2 || n % 2 == 1 {
            return Err(Error::InvalidExtent { extent: n, reason: "pooling needs even spatial extents" });
        }
    }
    Ok(())
}

pub fn avgpool2_forward(x: &Tensor) -> Result<Tensor> {
    let (b, c, h, w) = dims4(x, "avg-pool input")?;
    even_spatial(h, w)?;
    let (ho, wo) = (h / 2, w / 2);
    let src = x.data();
    Ok(Tensor::from_fn(&[b, c, ho, wo], |o| {
        let p = o / (ho * wo);
        let (i, j) = ((o / wo) % ho, o % wo);
        let base = p * h * w + 2 * i * w + 2 * j;
        0.25 * (src[base] + src[base + 1] + src[base + w] + src[base + w + 1])
    }))
}

pub fn avgpool2_backward(input_shape: &[usize], grad: &Tensor) -> Tensor {
    let (h, w) = (input_shape[2], input_shape[3]);
    let (ho, wo) = (h / 2, w / 2);
    Tensor::from_fn(input_shape, |idx| {
        let p = idx / (h * w);
        let (i, j) = ((idx / w) % h, idx % w);
        0.25 * grad.data()[(p * ho + i / 2) * wo + j / 2]
    })
}

pub fn global_avg_pool_forward(x: &Tensor) -> Result<Tensor> {
    let (b, c, h, w) = dims4(x, "global pool input")?;
    let plane = h * w;
    Ok(Tensor::from_fn(&[b, c], |o| x.data()[o * plane..(o + 1) * plane].iter().sum::<f64>() / plane as f64))
}

pub fn global_avg_pool_backward(input_shape: &[usize], grad: &Tensor) -> Tensor {
    let plane = input_shape[2] * input_shape[3];
    Tensor::from_fn(input_shape, |idx| grad.data()[idx / plane] / plane as f64)
}

/// `y = x W^T + b` with `x: [B, F]`, `W: [O, F]`.
pub fn linear_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (batch, f, o) = linear_dims(x, w, b)?;
    let mut y = Tensor::zeros(&[batch, o]);
    for r in 0..batch {
        y.data_mut()[r * o..(r + 1) * o].copy_from_slice(b.data());
    }
    gemm(batch, f, o, x.data(), false, w.data(), true, 1.0, y.data_mut());
    Ok(y)
}

fn linear_dims(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<(usize, usize, usize)> {
    match (x.shape(), w.shape(), b.shape()) {
        ([batch, f], [o, f2], [o2]) if f == f2 && o == o2 => Ok((*batch, *f, *o)),
        _ => Err(Error::ShapeMismatch(format!("linear x {:?}, w {:?}, b {:?}", x.shape(), w.shape(), b.shape()))),
    }
}

pub fn linear_backward(x: &Tensor, w: &Tensor, grad: &Tensor) -> (Tensor, Tensor, Tensor) {
    let (batch, f) = (x.shape()[0], x.shape()[1]);
    let o = w.shape()[0];
    let mut dx = Tensor::zeros(x.shape());
    gemm(batch, o, f, grad.data(), false, w.data(), false, 0.0, dx.data_mut());
    let mut dw = Tensor::zeros(w.shape());
    gemm(o, batch, f, grad.data(), true, x.data(), false, 0.0, dw.data_mut());
    let db = Tensor::from_fn(&[o], |j| (0..batch).map(|r| grad.data()[r * o + j]).sum());
    (dx, dw, db)
}

/// Row-wise softmax of `[B, K]` logits.
pub fn softmax(logits: &Tensor) -> Tensor {
    let k = logits.shape()[1];
    let mut p = logits.clone();
    for row in p.data_mut().chunks_mut(k) {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            s += *v;
        }
        for v in row.iter_mut() {
            *v /= s;
        }
    }
    p
}

/// Mean cross-entropy of `[B, K]` logits; returns `(loss, probabilities)`.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let (b, k) = match *logits.shape() {
        [b, k] => (b, k),
        _ => return Err(Error::ShapeMismatch(format!("logits {:?}", logits.shape()))),
    };
    if labels.len() != b || labels.iter().any(|&l| l >= k) {
        return Err(Error::ShapeMismatch(format!("{} labels for {b} rows of {k} classes", labels.len())));
    }
    let p = softmax(logits);
    let loss = labels.iter().enumerate().map(|(r, &l)| -p.data()[r * k + l].max(f64::MIN_POSITIVE).ln()).sum::<f64>()
        / b as f64;
    Ok((loss, p))
}
