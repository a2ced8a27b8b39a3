//! Separable filter-and-decimate kernels along one tensor axis.

use crate::tensor::Tensor;

use super::BoundaryMode;

/// A filter placed at column offset `2k + offset` for output row `k`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Placed<'a> {
    pub taps: &'a [f64],
    pub offset: isize,
}

#[inline]
fn resolve(pos: isize, n: usize, mode: BoundaryMode) -> Option<usize> {
    match mode {
        BoundaryMode::Periodic => Some(pos.rem_euclid(n as isize) as usize),
        BoundaryMode::Truncate => (pos >= 0 && (pos as usize) < n).then_some(pos as usize),
    }
}

fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

/// `out[k] = sum_t taps[t] * x[2k + t + offset]` along `axis`, for each
/// filter, producing `floor(n / 2)` samples.
pub(crate) fn analyze(x: &Tensor, axis: usize, filters: &[Placed], mode: BoundaryMode) -> Vec<Tensor> {
    let (outer, n, inner) = split_axis(x.shape(), axis);
    let half = n / 2;
    let mut shape = x.shape().to_vec();
    shape[axis] = half;
    let src = x.data();
    filters
        .iter()
        .map(|f| {
            let mut out = Tensor::zeros(&shape);
            let dst = out.data_mut();
            for o in 0..outer {
                let src_base = o * n * inner;
                let dst_base = o * half * inner;
                for k in 0..half {
                    let row = &mut dst[dst_base + k * inner..dst_base + (k + 1) * inner];
                    for (t, &c) in f.taps.iter().enumerate() {
                        if c == 0.0 {
                            continue;
                        }
                        let pos = (2 * k + t) as isize + f.offset;
                        if let Some(j) = resolve(pos, n, mode) {
                            let col = &src[src_base + j * inner..src_base + (j + 1) * inner];
                            for (r, s) in row.iter_mut().zip(col) {
                                *r += c * s;
                            }
                        }
                    }
                }
            }
            out
        })
        .collect()
}

/// Transpose of [`analyze`]: `out[2k + t + offset] += taps[t] * band[k]`,
/// summed over the given (band, filter) pairs.
pub(crate) fn synthesize(bands: &[(&Tensor, Placed)], axis: usize, n_out: usize, mode: BoundaryMode) -> Tensor {
    let first = bands[0].0;
    let (outer, half, inner) = split_axis(first.shape(), axis);
    let mut shape = first.shape().to_vec();
    shape[axis] = n_out;
    let mut out = Tensor::zeros(&shape);
    let dst = out.data_mut();
    for (band, f) in bands {
        let src = band.data();
        for o in 0..outer {
            let src_base = o * half * inner;
            let dst_base = o * n_out * inner;
            for k in 0..half {
                let col = &src[src_base + k * inner..src_base + (k + 1) * inner];
                for (t, &c) in f.taps.iter().enumerate() {
                    if c == 0.0 {
                        continue;
                    }
                    let pos = (2 * k + t) as isize + f.offset;
                    if let Some(j) = resolve(pos, n_out, mode) {
                        let row = &mut dst[dst_base + j * inner..dst_base + (j + 1) * inner];
                        for (r, s) in row.iter_mut().zip(col) {
                            *r += c * s;
                        }
                    }
                }
            }
        }
    }
    out
}
