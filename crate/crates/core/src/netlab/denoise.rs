//! Wavelet soft-threshold denoising, built on the tape so it stays
//! differentiable.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filterbank::{get_wavelet, WaveletSpec};
use crate::tensor::Tensor;
use crate::transforms::BoundaryMode;

use super::tape::{Tape, Var};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiseConfig {
    pub wavelet: String,
    pub lambda: f64,
    pub levels: usize,
    #[serde(default)]
    pub boundary: BoundaryMode,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        Self { wavelet: "haar".into(), lambda: 0.1, levels: 1, boundary: BoundaryMode::Periodic }
    }
}

impl DenoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(Error::NegativeLambda(self.lambda));
        }
        if self.levels == 0 {
            return Err(Error::InvalidConfig("levels must be at least 1".into()));
        }
        Ok(())
    }
}

/// Appends `levels` of DWT -> shrink(lh, hl, hh) -> IDWT to the tape; the
/// low band is recursed rather than shrunk.
pub fn denoise_node(
    tape: &mut Tape,
    x: Var,
    spec: &Arc<WaveletSpec>,
    lambda: f64,
    levels: usize,
    mode: BoundaryMode,
) -> Result<Var> {
    let s = tape.value(x).shape().to_vec();
    let (m, n) = (s[2], s[3]);
    let bands = tape.dwt2d(x, spec.clone(), mode)?;
    let c = s[1];
    let mut parts = Vec::with_capacity(4);
    let ll = tape.slice_channels(bands, 0, c)?;
    parts.push(if levels > 1 { denoise_node(tape, ll, spec, lambda, levels - 1, mode)? } else { ll });
    for k in 1..4 {
        let band = tape.slice_channels(bands, k * c, c)?;
        parts.push(tape.soft_shrink(band, lambda)?);
    }
    let joined = tape.concat_channels(&parts)?;
    tape.idwt2d(joined, spec.clone(), mode, (m, n))
}

/// Denoises an image given as `[H, W]`, `[C, H, W]` or `[B, C, H, W]`.
pub fn wavelet_denoise(x: &Tensor, cfg: &DenoiseConfig) -> Result<Tensor> {
    wavelet_denoise_with(x, &get_wavelet(&cfg.wavelet)?, cfg)
}

/// [`wavelet_denoise`] with an explicit filter bank.
pub fn wavelet_denoise_with(x: &Tensor, spec: &WaveletSpec, cfg: &DenoiseConfig) -> Result<Tensor> {
    cfg.validate()?;
    x.ensure_finite()?;
    let shape = x.shape().to_vec();
    let as4 = match *shape.as_slice() {
        [h, w] => vec![1, 1, h, w],
        [c, h, w] => vec![1, c, h, w],
        [_, _, _, _] => shape.clone(),
        _ => return Err(Error::ShapeMismatch(format!("cannot denoise a tensor of shape {shape:?}"))),
    };
    let block = 1usize << cfg.levels.min(usize::BITS as usize - 1);
    for &e in &as4[2..] {
        if e % block != 0 {
            return Err(Error::InvalidExtent { extent: e, reason: "spatial extent must be divisible by 2^levels" });
        }
    }
    let mut tape = Tape::new();
    let input = tape.leaf(x.clone().reshape(&as4)?);
    let out = denoise_node(&mut tape, input, &Arc::new(spec.clone()), cfg.lambda, cfg.levels, cfg.boundary)?;
    tape.value(out).clone().reshape(&shape)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_lambda_round_trips() {
        let x = Tensor::from_fn(&[16, 16], |i| ((i * 31) % 17) as f64 / 17.0);
        for levels in 1..=3 {
            let cfg = DenoiseConfig { wavelet: "db2".into(), lambda: 0.0, levels, ..Default::default() };
            assert!(wavelet_denoise(&x, &cfg).unwrap().max_abs_diff(&x) <= 1e-8);
        }
    }

    #[test]
    fn constant_image_unchanged() {
        let x = Tensor::filled(&[1, 8, 8], 0.6);
        let cfg = DenoiseConfig { lambda: 0.3, levels: 2, ..Default::default() };
        assert!(wavelet_denoise(&x, &cfg).unwrap().max_abs_diff(&x) <= 1e-12);
    }

    #[test]
    fn extent_and_lambda_errors() {
        let x = Tensor::zeros(&[12, 12]);
        let cfg = DenoiseConfig { levels: 3, ..Default::default() };
        assert!(matches!(wavelet_denoise(&x, &cfg), Err(Error::InvalidExtent { .. })));
        let cfg = DenoiseConfig { lambda: -1.0, ..Default::default() };
        assert!(matches!(wavelet_denoise(&x, &cfg), Err(Error::NegativeLambda(_))));
    }
}
