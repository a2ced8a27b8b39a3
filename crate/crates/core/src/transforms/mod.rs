//! 1D/2D/3D discrete wavelet transforms, their inverses and the backward
//! passes used by the autodiff tape.
//!
//! The transform axes are always the trailing ones; leading axes (batch,
//! channel) are carried through untouched. Band naming follows
//! `X_lh = H X L^T`: the first letter is the filter applied along the last
//! axis, the second the filter along the axis before it, and so on.

mod kernel;
pub mod madd;
pub mod matrices;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filterbank::WaveletSpec;
use crate::tensor::Tensor;

use kernel::{analyze, synthesize, Placed};

pub use madd::{madd_dwt2d, madd_idwt2d};
pub use matrices::{build_matrices, BandMatrices, Matrix, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryMode {
    /// Zero extension; filter taps past the signal end are dropped.
    Truncate,
    /// Circular wrap. Requires even extents.
    #[default]
    Periodic,
}

impl std::str::FromStr for BoundaryMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "periodic" => Ok(Self::Periodic),
            "truncate" | "zero" => Ok(Self::Truncate),
            other => Err(format!("unknown boundary mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bands1d {
    pub low: Tensor,
    pub high: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bands2d {
    pub ll: Tensor,
    pub lh: Tensor,
    pub hl: Tensor,
    pub hh: Tensor,
}

impl Bands2d {
    pub fn as_array(&self) -> [&Tensor; 4] {
        [&self.ll, &self.lh, &self.hl, &self.hh]
    }

    fn from_vec(mut v: Vec<Tensor>) -> Self {
        let hh = v.pop().unwrap();
        let hl = v.pop().unwrap();
        let lh = v.pop().unwrap();
        let ll = v.pop().unwrap();
        Self { ll, lh, hl, hh }
    }
}

/// The eight octant components of a 3D transform. Index bit 2 selects the
/// high-pass along the last axis, bit 1 along the middle axis and bit 0
/// along the first spatial axis; [`Bands3d::NAMES`] spells them out.
#[derive(Debug, Clone, PartialEq)]
pub struct Bands3d {
    pub components: [Tensor; 8],
}

impl Bands3d {
    pub const NAMES: [&'static str; 8] = ["lll", "llh", "lhl", "lhh", "hll", "hlh", "hhl", "hhh"];

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        Self::NAMES.iter().position(|n| *n == name).map(|i| &self.components[i])
    }
}

/// Filter placements of one side (analysis or synthesis) of a bank.
#[derive(Clone, Copy)]
struct Side<'a> {
    lo: Placed<'a>,
    hi: Placed<'a>,
}

fn decomposition(spec: &WaveletSpec) -> Side<'_> {
    Side { lo: Placed { taps: &spec.lo_dec, offset: 0 }, hi: Placed { taps: &spec.hi_dec, offset: 0 } }
}

fn reconstruction(spec: &WaveletSpec) -> Side<'_> {
    Side {
        lo: Placed { taps: &spec.lo_rec, offset: -(spec.dual_shift as isize) },
        hi: Placed { taps: &spec.hi_rec, offset: 0 },
    }
}

pub(crate) fn check_extent(n: usize, mode: BoundaryMode) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidExtent { extent: n, reason: "transform axes need at least 2 samples" });
    }
    if mode == BoundaryMode::Periodic && n % 2 == 1 {
        return Err(Error::InvalidExtent { extent: n, reason: "periodic boundary needs an even extent" });
    }
    Ok(())
}

fn check_input(x: &Tensor, dims: usize, mode: BoundaryMode) -> Result<()> {
    if x.rank() < dims {
        return Err(Error::ShapeMismatch(format!("{dims}D transform needs rank >= {dims}, got {:?}", x.shape())));
    }
    for &n in &x.shape()[x.rank() - dims..] {
        check_extent(n, mode)?;
    }
    x.ensure_finite()
}

fn check_output_extent(half: usize, n_out: usize, mode: BoundaryMode) -> Result<()> {
    let ok = match mode {
        BoundaryMode::Periodic => n_out == 2 * half,
        BoundaryMode::Truncate => n_out / 2 == half,
    };
    if ok {
        check_extent(n_out, mode)
    } else {
        Err(Error::BandShapeMismatch(format!("band extent {half} cannot reconstruct {n_out} samples")))
    }
}

fn check_bands(parts: &[&Tensor], dims: usize) -> Result<()> {
    let first = parts[0];
    for p in parts {
        if p.shape() != first.shape() {
            return Err(Error::BandShapeMismatch(format!("{:?} vs {:?}", first.shape(), p.shape())));
        }
        p.ensure_finite()?;
    }
    if first.rank() < dims {
        return Err(Error::BandShapeMismatch(format!("bands of rank {} for a {dims}D transform", first.rank())));
    }
    Ok(())
}

/// Analysis over the trailing `dims` axes. Component index bits, most
/// significant first, follow the last axis down to the first transformed.
fn analysis_nd(x: &Tensor, dims: usize, side: Side, mode: BoundaryMode) -> Vec<Tensor> {
    let rank = x.rank();
    let mut comps = vec![x.clone()];
    for step in 0..dims {
        let axis = rank - 1 - step;
        comps = comps.iter().flat_map(|c| analyze(c, axis, &[side.lo, side.hi], mode)).collect();
    }
    comps
}

/// Inverse bookkeeping of [`analysis_nd`]; `out_extents` lists the trailing
/// extents in axis order.
fn synthesis_nd(comps: Vec<Tensor>, dims: usize, side: Side, mode: BoundaryMode, out_extents: &[usize]) -> Tensor {
    let rank = comps[0].rank();
    let mut comps = comps;
    for step in (0..dims).rev() {
        let axis = rank - 1 - step;
        let n_out = out_extents[out_extents.len() - 1 - step];
        comps = comps
            .chunks(2)
            .map(|pair| synthesize(&[(&pair[0], side.lo), (&pair[1], side.hi)], axis, n_out, mode))
            .collect();
    }
    comps.pop().unwrap()
}

fn trailing(shape: &[usize], dims: usize) -> &[usize] {
    &shape[shape.len() - dims..]
}

fn check_outputs(band_shape: &[usize], out: &[usize], mode: BoundaryMode) -> Result<()> {
    let dims = out.len();
    for (h, n) in trailing(band_shape, dims).iter().zip(out) {
        check_output_extent(*h, *n, mode)?;
    }
    Ok(())
}

pub fn dwt1d(x: &Tensor, spec: &WaveletSpec, mode: BoundaryMode) -> Result<Bands1d> {
    check_input(x, 1, mode)?;
    let mut v = analysis_nd(x, 1, decomposition(spec), mode);
    let high = v.pop().unwrap();
    let low = v.pop().unwrap();
    Ok(Bands1d { low, high })
}

pub fn idwt1d(bands: &Bands1d, spec: &WaveletSpec, mode: BoundaryMode, n_out: usize) -> Result<Tensor> {
    check_bands(&[&bands.low, &bands.high], 1)?;
    check_outputs(bands.low.shape(), &[n_out], mode)?;
    Ok(synthesis_nd(vec![bands.low.clone(), bands.high.clone()], 1, reconstruction(spec), mode, &[n_out]))
}

/// `L^T g_low + H^T g_high` with the decomposition matrices.
pub fn dwt1d_backward(
    g_low: &Tensor,
    g_high: &Tensor,
    spec: &WaveletSpec,
    mode: BoundaryMode,
    n: usize,
) -> Result<Tensor> {
    check_bands(&[g_low, g_high], 1)?;
    check_outputs(g_low.shape(), &[n], mode)?;
    Ok(synthesis_nd(vec![g_low.clone(), g_high.clone()], 1, decomposition(spec), mode, &[n]))
}

/// `(L_rec g, H_rec g)` with the reconstruction matrices.
pub fn idwt1d_backward(g_x: &Tensor, spec: &WaveletSpec, mode: BoundaryMode) -> Result<Bands1d> {
    check_input(g_x, 1, mode)?;
    let mut v = analysis_nd(g_x, 1, reconstruction(spec), mode);
    let high = v.pop().unwrap();
    let low = v.pop().unwrap();
    Ok(Bands1d { low, high })
}

pub fn dwt2d(x: &Tensor, spec: &WaveletSpec, mode: BoundaryMode) -> Result<Bands2d> {
    check_input(x, 2, mode)?;
    Ok(Bands2d::from_vec(analysis_nd(x, 2, decomposition(spec), mode)))
}

pub fn idwt2d(bands: &Bands2d, spec: &WaveletSpec, mode: BoundaryMode, out: (usize, usize)) -> Result<Tensor> {
    let parts = bands.as_array();
    check_bands(&parts, 2)?;
    check_outputs(bands.ll.shape(), &[out.0, out.1], mode)?;
    Ok(synthesis_nd(parts.iter().map(|t| (*t).clone()).collect(), 2, reconstruction(spec), mode, &[out.0, out.1]))
}

/// Sum of `L^T G_ll L + H^T G_lh L + L^T G_hl H + H^T G_hh H`.
pub fn dwt2d_backward(
    g_bands: &Bands2d,
    spec: &WaveletSpec,
    mode: BoundaryMode,
    out: (usize, usize),
) -> Result<Tensor> {
    let parts = g_bands.as_array();
    check_bands(&parts, 2)?;
    check_outputs(g_bands.ll.shape(), &[out.0, out.1], mode)?;
    Ok(synthesis_nd(parts.iter().map(|t| (*t).clone()).collect(), 2, decomposition(spec), mode, &[out.0, out.1]))
}

/// `(L G L^T, H G L^T, L G H^T, H G H^T)` with the reconstruction matrices.
pub fn idwt2d_backward(g: &Tensor, spec: &WaveletSpec, mode: BoundaryMode) -> Result<Bands2d> {
    check_input(g, 2, mode)?;
    Ok(Bands2d::from_vec(analysis_nd(g, 2, reconstruction(spec), mode)))
}

pub fn dwt3d(x: &Tensor, spec: &WaveletSpec, mode: BoundaryMode) -> Result<Bands3d> {
    check_input(x, 3, mode)?;
    let v = analysis_nd(x, 3, decomposition(spec), mode);
    Ok(Bands3d { components: v.try_into().expect("8 components") })
}

pub fn idwt3d(bands: &Bands3d, spec: &WaveletSpec, mode: BoundaryMode, out: (usize, usize, usize)) -> Result<Tensor> {
    let parts: Vec<&Tensor> = bands.components.iter().collect();
    check_bands(&parts, 3)?;
    let ext = [out.0, out.1, out.2];
    check_outputs(bands.components[0].shape(), &ext, mode)?;
    Ok(synthesis_nd(bands.components.to_vec(), 3, reconstruction(spec), mode, &ext))
}

pub fn dwt3d_backward(
    g_bands: &Bands3d,
    spec: &WaveletSpec,
    mode: BoundaryMode,
    out: (usize, usize, usize),
) -> Result<Tensor> {
    let parts: Vec<&Tensor> = g_bands.components.iter().collect();
    check_bands(&parts, 3)?;
    let ext = [out.0, out.1, out.2];
    check_outputs(g_bands.components[0].shape(), &ext, mode)?;
    Ok(synthesis_nd(g_bands.components.to_vec(), 3, decomposition(spec), mode, &ext))
}

pub fn idwt3d_backward(g: &Tensor, spec: &WaveletSpec, mode: BoundaryMode) -> Result<Bands3d> {
    check_input(g, 3, mode)?;
    let v = analysis_nd(g, 3, reconstruction(spec), mode);
    Ok(Bands3d { components: v.try_into().expect("8 components") })
}

fn check_feature_map(x: &Tensor, mode: BoundaryMode) -> Result<()> {
    if x.rank() != 4 {
        return Err(Error::ShapeMismatch(format!("expected [batch, channel, M, N], got {:?}", x.shape())));
    }
    check_input(x, 2, mode)
}

/// Low-frequency component of a channel-wise 2D DWT over `[B, C, M, N]`.
/// The three detail bands are never computed.
pub fn dwt_ll(x: &Tensor, spec: &WaveletSpec, mode: BoundaryMode) -> Result<Tensor> {
    check_feature_map(x, mode)?;
    let lo = decomposition(spec).lo;
    let rows = analyze(x, 3, &[lo], mode).pop().unwrap();
    Ok(analyze(&rows, 2, &[lo], mode).pop().unwrap())
}

/// `L^T G L` with the decomposition low-pass matrix.
pub fn dwt_ll_backward(g: &Tensor, spec: &WaveletSpec, mode: BoundaryMode, out: (usize, usize)) -> Result<Tensor> {
    if g.rank() != 4 {
        return Err(Error::ShapeMismatch(format!("expected [batch, channel, m, n] gradient, got {:?}", g.shape())));
    }
    check_outputs(g.shape(), &[out.0, out.1], mode)?;
    g.ensure_finite()?;
    let lo = decomposition(spec).lo;
    let cols = synthesize(&[(g, lo)], 2, out.0, mode);
    Ok(synthesize(&[(&cols, lo)], 3, out.1, mode))
}
