//! Reverse-mode autodiff tape.
//!
//! Nodes are appended in evaluation order, so the node vector is already a
//! topological order; [`Tape::backward`] walks it once in reverse. Wavelet
//! nodes delegate their backward rule to the transform backward passes.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::filterbank::WaveletSpec;
use crate::tensor::Tensor;
use crate::transforms::{self, Bands2d, BoundaryMode};

use super::ops;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Op {
    Leaf,
    Conv2d {
        x: Var,
        w: Var,
        b: Var,
        stride: usize,
        padding: usize,
    },
    Relu(Var),
    MaxPool2 {
        x: Var,
        argmax: Vec<usize>,
    },
    AvgPool2(Var),
    DwtLl {
        x: Var,
        spec: Arc<WaveletSpec>,
        mode: BoundaryMode,
    },
    /// Output `[B, 4C, m, n]` holding ll, lh, hl, hh channel groups.
    Dwt2d {
        x: Var,
        spec: Arc<WaveletSpec>,
        mode: BoundaryMode,
    },
    Idwt2d {
        x: Var,
        spec: Arc<WaveletSpec>,
        mode: BoundaryMode,
    },
    GroupMean {
        x: Var,
        groups: usize,
    },
    SliceChannels {
        x: Var,
        start: usize,
    },
    ConcatChannels(Vec<Var>),
    SoftShrink {
        x: Var,
        lambda: f64,
    },
    GlobalAvgPool(Var),
    Linear {
        x: Var,
        w: Var,
        b: Var,
    },
    SoftmaxCrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Tensor,
    },
    WeightedSum {
        x: Var,
        weights: Tensor,
    },
    HalfSquaredSum(Var),
    Add(Var, Var),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every node reached.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient of `v`, or zeros of `like`'s shape when `v` was not reached.
    pub fn get_or_zeros(&self, v: Var, like: &Tensor) -> Tensor {
        self.get(v).cloned().unwrap_or_else(|| Tensor::zeros(like.shape()))
    }
}

fn accumulate(slot: &mut Option<Tensor>, g: Tensor) {
    match slot {
        Some(acc) => acc.add_assign(&g).expect("gradient shape matches node"),
        None => *slot = Some(g),
    }
}

fn soft_shrink_value(v: f64, lambda: f64) -> f64 {
    if v > lambda {
        v - lambda
    } else if v < -lambda {
        v + lambda
    } else {
        0.0
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn conv2d(&mut self, x: Var, w: Var, b: Var, stride: usize, padding: usize) -> Result<Var> {
        let y = ops::conv2d_forward(self.value(x), self.value(w), self.value(b), stride, padding)?;
        Ok(self.push(y, Op::Conv2d { x, w, b, stride, padding }))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let y = self.value(x).map(|v| v.max(0.0));
        self.push(y, Op::Relu(x))
    }

    pub fn max_pool2(&mut self, x: Var) -> Result<Var> {
        let (y, argmax) = ops::maxpool2_forward(self.value(x))?;
        Ok(self.push(y, Op::MaxPool2 { x, argmax }))
    }

    pub fn avg_pool2(&mut self, x: Var) -> Result<Var> {
        let y = ops::avgpool2_forward(self.value(x))?;
        Ok(self.push(y, Op::AvgPool2(x)))
    }

    pub fn dwt_ll(&mut self, x: Var, spec: Arc<WaveletSpec>, mode: BoundaryMode) -> Result<Var> {
        let y = transforms::dwt_ll(self.value(x), &spec, mode)?;
        Ok(self.push(y, Op::DwtLl { x, spec, mode }))
    }

    /// Full channel-wise 2D DWT; the output stacks `[ll, lh, hl, hh]` along
    /// the channel axis.
    pub fn dwt2d(&mut self, x: Var, spec: Arc<WaveletSpec>, mode: BoundaryMode) -> Result<Var> {
        let input = self.value(x);
        if input.rank() != 4 {
            return Err(Error::ShapeMismatch(format!("dwt2d node needs [B, C, M, N], got {:?}", input.shape())));
        }
        let bands = transforms::dwt2d(input, &spec, mode)?;
        let y = Tensor::concat_channels(&bands.as_array())?;
        Ok(self.push(y, Op::Dwt2d { x, spec, mode }))
    }

    /// Inverse of [`Tape::dwt2d`]: consumes `[B, 4C, m, n]`.
    pub fn idwt2d(&mut self, x: Var, spec: Arc<WaveletSpec>, mode: BoundaryMode, out: (usize, usize)) -> Result<Var> {
        let bands = split_bands(self.value(x))?;
        let y = transforms::idwt2d(&bands, &spec, mode, out)?;
        Ok(self.push(y, Op::Idwt2d { x, spec, mode }))
    }

    /// Mean over `groups` equal channel groups: `[B, gC, ...] -> [B, C, ...]`.
    pub fn group_mean(&mut self, x: Var, groups: usize) -> Result<Var> {
        let input = self.value(x);
        if input.rank() != 4 || groups == 0 || !input.shape()[1].is_multiple_of(groups) {
            return Err(Error::ShapeMismatch(format!("{groups} groups over {:?}", input.shape())));
        }
        let c = input.shape()[1] / groups;
        let mut acc = input.slice_channels(0, c)?;
        for g in 1..groups {
            acc.add_assign(&input.slice_channels(g * c, c)?)?;
        }
        let y = acc.scale(1.0 / groups as f64);
        Ok(self.push(y, Op::GroupMean { x, groups }))
    }

    pub fn slice_channels(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let y = self.value(x).slice_channels(start, len)?;
        Ok(self.push(y, Op::SliceChannels { x, start }))
    }

    pub fn concat_channels(&mut self, parts: &[Var]) -> Result<Var> {
        let values: Vec<&Tensor> = parts.iter().map(|p| self.value(*p)).collect();
        let y = Tensor::concat_channels(&values)?;
        Ok(self.push(y, Op::ConcatChannels(parts.to_vec())))
    }

    pub fn soft_shrink(&mut self, x: Var, lambda: f64) -> Result<Var> {
        if lambda < 0.0 || lambda.is_nan() {
            return Err(Error::NegativeLambda(lambda));
        }
        let y = self.value(x).map(|v| soft_shrink_value(v, lambda));
        Ok(self.push(y, Op::SoftShrink { x, lambda }))
    }

    pub fn global_avg_pool(&mut self, x: Var) -> Result<Var> {
        let y = ops::global_avg_pool_forward(self.value(x))?;
        Ok(self.push(y, Op::GlobalAvgPool(x)))
    }

    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let y = ops::linear_forward(self.value(x), self.value(w), self.value(b))?;
        Ok(self.push(y, Op::Linear { x, w, b }))
    }

    /// Mean softmax cross-entropy; a scalar node of shape `[1]`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let (loss, probs) = ops::softmax_cross_entropy(self.value(logits), labels)?;
        Ok(self.push(Tensor::from_vec(vec![loss]), Op::SoftmaxCrossEntropy { logits, labels: labels.to_vec(), probs }))
    }

    /// `sum(x * weights)`, a fixed random projection used to reduce an
    /// arbitrary output to a scalar in gradient checks.
    pub fn weighted_sum(&mut self, x: Var, weights: Tensor) -> Result<Var> {
        self.value(x).expect_same_shape(&weights)?;
        let s = self.value(x).dot(&weights);
        Ok(self.push(Tensor::from_vec(vec![s]), Op::WeightedSum { x, weights }))
    }

    pub fn half_squared_sum(&mut self, x: Var) -> Var {
        let s = 0.5 * self.value(x).sum_sq();
        self.push(Tensor::from_vec(vec![s]), Op::HalfSquaredSum(x))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = self.value(a).zip_map(self.value(b), |p, q| p + q)?;
        Ok(self.push(y, Op::Add(a, b)))
    }

    /// Smallest distance of any piecewise-linear node input to a kink:
    /// ReLU inputs to 0, soft-shrink inputs to `+-lambda`, and 2x2 max-pool
    /// winners to their runner-up (all-zero ties behind a ReLU excepted).
    /// Returns `(node index, margin)`.
    pub fn min_kink_margin(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, node) in self.nodes.iter().enumerate() {
            let margin = match &node.op {
                Op::Relu(x) => self.value(*x).data().iter().fold(f64::INFINITY, |m, v| m.min(v.abs())),
                Op::SoftShrink { x, lambda } => {
                    self.value(*x).data().iter().fold(f64::INFINITY, |m, v| m.min((v.abs() - lambda).abs()))
                }
                Op::MaxPool2 { x, .. } => {
                    let after_relu = matches!(self.nodes[x.0].op, Op::Relu(_));
                    ops::maxpool2_margin(self.value(*x), after_relu)
                }
                _ => continue,
            };
            if best.is_none_or(|(_, m)| margin < m) {
                best = Some((i, margin));
            }
        }
        best
    }

    /// Reverse sweep from a scalar node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::ShapeMismatch(format!("backward needs a scalar, got {:?}", self.value(loss).shape())));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::filled(self.value(loss).shape(), 1.0));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            for (input, gi) in self.input_grads(node, &g)? {
                accumulate(&mut grads[input.0], gi);
            }
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn input_grads(&self, node: &Node, g: &Tensor) -> Result<Vec<(Var, Tensor)>> {
        Ok(match &node.op {
            Op::Leaf => Vec::new(),
            Op::Conv2d { x, w, b, stride, padding } => {
                let cg = ops::conv2d_backward(self.value(*x), self.value(*w), self.value(*b), *stride, *padding, g)?;
                vec![(*x, cg.dx), (*w, cg.dw), (*b, cg.db)]
            }
            Op::Relu(x) => {
                let gx = self.value(*x).zip_map(g, |v, gv| if v > 0.0 { gv } else { 0.0 })?;
                vec![(*x, gx)]
            }
            Op::MaxPool2 { x, argmax } => vec![(*x, ops::maxpool2_backward(self.value(*x).shape(), argmax, g))],
            Op::AvgPool2(x) => vec![(*x, ops::avgpool2_backward(self.value(*x).shape(), g))],
            Op::DwtLl { x, spec, mode } => {
                let s = self.value(*x).shape();
                vec![(*x, transforms::dwt_ll_backward(g, spec, *mode, (s[2], s[3]))?)]
            }
            Op::Dwt2d { x, spec, mode } => {
                let s = self.value(*x).shape();
                let bands = split_bands(g)?;
                vec![(*x, transforms::dwt2d_backward(&bands, spec, *mode, (s[2], s[3]))?)]
            }
            Op::Idwt2d { x, spec, mode } => {
                let bands = transforms::idwt2d_backward(g, spec, *mode)?;
                vec![(*x, Tensor::concat_channels(&bands.as_array())?)]
            }
            Op::GroupMean { x, groups } => {
                let part = g.scale(1.0 / *groups as f64);
                let parts: Vec<&Tensor> = (0..*groups).map(|_| &part).collect();
                vec![(*x, Tensor::concat_channels(&parts)?)]
            }
            Op::SliceChannels { x, start } => {
                let full = self.value(*x).shape();
                let len = g.shape()[1];
                let mut pieces = Vec::new();
                if *start > 0 {
                    pieces.push(Tensor::zeros(&[full[0], *start, full[2], full[3]]));
                }
                pieces.push(g.clone());
                if start + len < full[1] {
                    pieces.push(Tensor::zeros(&[full[0], full[1] - start - len, full[2], full[3]]));
                }
                let refs: Vec<&Tensor> = pieces.iter().collect();
                vec![(*x, Tensor::concat_channels(&refs)?)]
            }
            Op::ConcatChannels(parts) => {
                let mut start = 0;
                let mut out = Vec::with_capacity(parts.len());
                for p in parts {
                    let c = self.value(*p).shape()[1];
                    out.push((*p, g.slice_channels(start, c)?));
                    start += c;
                }
                out
            }
            Op::SoftShrink { x, lambda } => {
                let gx = self.value(*x).zip_map(g, |v, gv| if v.abs() > *lambda { gv } else { 0.0 })?;
                vec![(*x, gx)]
            }
            Op::GlobalAvgPool(x) => vec![(*x, ops::global_avg_pool_backward(self.value(*x).shape(), g))],
            Op::Linear { x, w, b } => {
                let (dx, dw, db) = ops::linear_backward(self.value(*x), self.value(*w), g);
                vec![(*x, dx), (*w, dw), (*b, db)]
            }
            Op::SoftmaxCrossEntropy { logits, labels, probs } => {
                let k = probs.shape()[1];
                let scale = g.data()[0] / labels.len() as f64;
                let mut d = probs.clone();
                for (r, &l) in labels.iter().enumerate() {
                    d.data_mut()[r * k + l] -= 1.0;
                }
                vec![(*logits, d.scale(scale))]
            }
            Op::WeightedSum { x, weights } => vec![(*x, weights.scale(g.data()[0]))],
            Op::HalfSquaredSum(x) => vec![(*x, self.value(*x).scale(g.data()[0]))],
            Op::Add(a, b) => vec![(*a, g.clone()), (*b, g.clone())],
        })
    }
}

/// Splits `[B, 4C, m, n]` into the four channel groups.
pub(crate) fn split_bands(t: &Tensor) -> Result<Bands2d> {
    if t.rank() != 4 || !t.shape()[1].is_multiple_of(4) {
        return Err(Error::BandShapeMismatch(format!("expected [B, 4C, m, n], got {:?}", t.shape())));
    }
    let c = t.shape()[1] / 4;
    Ok(Bands2d {
        ll: t.slice_channels(0, c)?,
        lh: t.slice_channels(c, c)?,
        hl: t.slice_channels(2 * c, c)?,
        hh: t.slice_channels(3 * c, c)?,
    })
}

/// Elementwise soft shrinkage outside the tape.
pub fn soft_shrink(x: &Tensor, lambda: f64) -> Result<Tensor> {
    if lambda < 0.0 || lambda.is_nan() {
        return Err(Error::NegativeLambda(lambda));
    }
    Ok(x.map(|v| soft_shrink_value(v, lambda)))
}
