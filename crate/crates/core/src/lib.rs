//! Wavelet transform layers and wavelet-integrated toy CNNs.
//!
//! * [`filterbank`]: Daubechies and Cohen filter banks, QMF derivation,
//!   perfect-reconstruction validation.
//! * [`transforms`]: 1D/2D/3D DWT/IDWT with exact backward passes, `DWT_ll`
//!   and multiply-add accounting.
//! * [`netlab`]: a small autodiff tape, toy CNNs with pooling, strided or
//!   wavelet downsampling, training and gradient checks.
//! * [`robustness`]: noise corruptions, CE/mCE and FGSM/PGD.
//! * [`io`]: PGM/PPM images and the `WTNS` tensor container.
//! * [`cli`]: the `wavecnet` command-line tool.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod filterbank;
pub mod io;
pub mod netlab;
pub mod robustness;
pub mod tensor;
pub mod transforms;

pub use error::{Error, Result};
pub use filterbank::{get_wavelet, Family, WaveletSpec};
pub use tensor::Tensor;
pub use transforms::BoundaryMode;
