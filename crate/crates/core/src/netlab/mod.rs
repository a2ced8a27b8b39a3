//! Minimal reverse-mode autodiff with the layers needed for toy wavelet
//! CNNs: convolution, pooling, wavelet downsampling, a dense softmax head
//! and soft-threshold denoising, plus data, training and gradient checks.

pub mod data;
pub mod denoise;
pub mod gradcheck;
pub mod model;
pub mod ops;
pub mod tape;
pub mod train;

pub use data::{synth_shapes, Dataset};
pub use denoise::{wavelet_denoise, DenoiseConfig};
pub use gradcheck::{grad_check, grad_check_model, GradCheckConfig, GradReport};
pub use model::{Architecture, DownsampleKind, Model, ModelConfig};
pub use tape::{soft_shrink, Gradients, Tape, Var};
pub use train::{evaluate, train, EvalReport, Precision, TrainConfig, TrainReport};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::filterbank::WaveletSpec;
use crate::tensor::Tensor;
use crate::transforms::BoundaryMode;

/// Applies one parameter-free downsampling stage to `[B, C, 2m, 2n]`.
///
/// `StridedConv2` uses a per-channel identity 3x3 kernel at stride 2, which
/// reduces to plain subsampling; learned strided convolutions live inside
/// [`Model`].
pub fn downsample(x: &Tensor, kind: DownsampleKind, spec: &WaveletSpec, mode: BoundaryMode) -> Result<Tensor> {
    let s = x.shape();
    if s.len() != 4 {
        return Err(Error::ShapeMismatch(format!("downsample needs [B, C, H, W], got {s:?}")));
    }
    for &e in &s[2..] {
        if e % 2 != 0 {
            return Err(Error::InvalidExtent { extent: e, reason: "downsampling needs even spatial extents" });
        }
    }
    let mut tape = Tape::new();
    let v = tape.leaf(x.clone());
    let spec = Arc::new(spec.clone());
    let out = match kind {
        DownsampleKind::MaxPool2 => tape.max_pool2(v)?,
        DownsampleKind::AvgPool2 => tape.avg_pool2(v)?,
        DownsampleKind::StridedConv2 => {
            let c = s[1];
            let w = tape.leaf(Tensor::from_fn(&[c, c, 3, 3], |i| {
                let (o, rest) = (i / (c * 9), i % (c * 9));
                if rest / 9 == o && rest % 9 == 4 {
                    1.0
                } else {
                    0.0
                }
            }));
            let b = tape.leaf(Tensor::zeros(&[c]));
            tape.conv2d(v, w, b, 2, 1)?
        }
        DownsampleKind::DwtLl => tape.dwt_ll(v, spec, mode)?,
        DownsampleKind::DwtAvg => {
            let bands = tape.dwt2d(v, spec, mode)?;
            tape.group_mean(bands, 4)?
        }
        DownsampleKind::DwtConcat => tape.dwt2d(v, spec, mode)?,
    };
    Ok(tape.value(out).clone())
}
