//! Central finite-difference checks of tape gradients.

use std::sync::Arc;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::filterbank::WaveletSpec;
use crate::tensor::Tensor;
use crate::transforms::BoundaryMode;

use super::denoise::denoise_node;
use super::model::{DownsampleKind, Model, ModelConfig};
use super::tape::{Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub step: f64,
    /// Entries probed per block; `None` checks every entry.
    pub max_per_block: Option<usize>,
    /// Seed for choosing which entries to probe.
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self { step: 1e-5, max_per_block: Some(24), seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockError {
    pub name: String,
    pub checked: usize,
    pub max_abs_error: f64,
    /// `max |analytic - numeric| / max(max |analytic|, max |numeric|)` over
    /// the probed entries.
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradReport {
    pub step: f64,
    pub blocks: Vec<BlockError>,
    pub max_rel_error: f64,
    /// Smallest distance of a kinked node's input to its kink, if any.
    pub kink_margin: Option<f64>,
}

impl GradReport {
    pub fn block(&self, name: &str) -> Option<&BlockError> {
        self.blocks.iter().find(|b| b.name == name)
    }
}

fn eval_scalar<F>(inputs: &[(String, Tensor)], f: &F) -> Result<(Tape, Vec<Var>, Var)>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|(_, t)| tape.leaf(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    if tape.value(out).len() != 1 {
        return Err(Error::ShapeMismatch("gradient check needs a scalar output".into()));
    }
    Ok((tape, vars, out))
}

/// Compares tape gradients of the scalar built by `f` against central
/// differences in every named input block.
///
/// Fails with [`Error::KinkProximity`] when a ReLU, soft-shrink or max-pool
/// node has an input within `10 * step` of its kink, where finite
/// differences are meaningless.
pub fn grad_check<F>(inputs: &[(String, Tensor)], f: F, cfg: &GradCheckConfig) -> Result<GradReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let (tape, vars, out) = eval_scalar(inputs, &f)?;
    let required = 10.0 * cfg.step;
    let kink = tape.min_kink_margin();
    if let Some((node, margin)) = kink {
        if margin <= required {
            return Err(Error::KinkProximity { node, margin, required });
        }
    }
    let grads = tape.backward(out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut probe = inputs.to_vec();
    let mut blocks = Vec::with_capacity(inputs.len());

    for (b, ((name, value), var)) in inputs.iter().zip(&vars).enumerate() {
        let analytic = grads.get_or_zeros(*var, value);
        let n = value.len();
        let indices: Vec<usize> = match cfg.max_per_block {
            Some(k) if k < n => {
                let mut v = sample(&mut rng, n, k).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..n).collect(),
        };
        let (mut max_diff, mut scale) = (0.0f64, 0.0f64);
        for &i in &indices {
            let orig = value.data()[i];
            probe[b].1.data_mut()[i] = orig + cfg.step;
            let plus = eval_scalar(&probe, &f)?;
            let fp = plus.0.value(plus.2).data()[0];
            probe[b].1.data_mut()[i] = orig - cfg.step;
            let minus = eval_scalar(&probe, &f)?;
            let fm = minus.0.value(minus.2).data()[0];
            probe[b].1.data_mut()[i] = orig;
            let numeric = (fp - fm) / (2.0 * cfg.step);
            let a = analytic.data()[i];
            max_diff = max_diff.max((a - numeric).abs());
            scale = scale.max(a.abs()).max(numeric.abs());
        }
        let rel = if scale > 0.0 { max_diff / scale } else { 0.0 };
        blocks.push(BlockError {
            name: name.clone(),
            checked: indices.len(),
            max_abs_error: max_diff,
            max_rel_error: rel,
        });
    }
    let max_rel_error = blocks.iter().map(|b| b.max_rel_error).fold(0.0, f64::max);
    Ok(GradReport { step: cfg.step, blocks, max_rel_error, kink_margin: kink.map(|k| k.1) })
}

/// Checks the cross-entropy gradient of a model with respect to every
/// parameter block and the input batch (block `"input"`).
pub fn grad_check_model(model: &Model, x: &Tensor, labels: &[usize], cfg: &GradCheckConfig) -> Result<GradReport> {
    let mut inputs = vec![("input".to_string(), x.clone())];
    inputs.extend(model.params().iter().cloned());
    grad_check(
        &inputs,
        |tape, vars| {
            let logits = model.build(tape, vars[0], &vars[1..])?;
            tape.softmax_cross_entropy(logits, labels)
        },
        cfg,
    )
}

/// Draws uniform `[0, 1)` input batches from successive seeds until one
/// keeps every kinked node at least `10 * step` from its kink. Returns the
/// batch, its labels and the seed that produced it.
pub fn kink_free_batch(
    model: &Model,
    batch: usize,
    seed: u64,
    step: f64,
    tries: usize,
) -> Result<(Tensor, Vec<usize>, u64)> {
    let (c, h, w) = model.config().input;
    let classes = model.config().classes;
    let mut last = None;
    for s in seed..seed + tries as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let x = Tensor::from_fn(&[batch, c, h, w], |_| rng.random::<f64>());
        let labels: Vec<usize> = (0..batch).map(|_| rng.random_range(0..classes)).collect();
        let g = model.graph(&x)?;
        match g.tape.min_kink_margin() {
            Some((node, margin)) if margin <= 10.0 * step => {
                last = Some(Error::KinkProximity { node, margin, required: 10.0 * step });
            }
            _ => return Ok((x, labels, s)),
        }
    }
    Err(last.unwrap_or(Error::InvalidConfig("no tries requested".into())))
}

/// Names accepted by [`check_target`].
pub const TARGETS: &[&str] = &[
    "conv2d",
    "conv2d_stride2",
    "relu",
    "maxpool2",
    "avgpool2",
    "global_avg_pool",
    "linear",
    "softmax_ce",
    "soft_shrink",
    "dwt_ll",
    "dwt2d",
    "idwt2d",
    "dwt_avg",
    "dwt_concat",
    "denoise",
    "model-maxpool",
    "model-avgpool",
    "model-stride",
    "model-dwt_ll",
    "model-dwt_avg",
    "model-dwt_concat",
];

fn uniform(shape: &[usize], lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(lo..hi))
}

/// Values with magnitude in `[gap, 1)` and random sign, away from a kink at 0.
fn away_from_zero(shape: &[usize], gap: f64, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(shape, |_| {
        let m = rng.random_range(gap..1.0);
        if rng.random_bool(0.5) {
            m
        } else {
            -m
        }
    })
}

fn named(items: Vec<(&str, Tensor)>) -> Vec<(String, Tensor)> {
    items.into_iter().map(|(n, t)| (n.to_string(), t)).collect()
}

/// Gradient check of a single layer or a small model, on seeded inputs.
///
/// Layer targets reduce their output to a scalar with a fixed random
/// projection. `model-<kind>` targets build a 16x16-input toy model with the
/// given downsampling in every stage, random biases, and check the
/// cross-entropy gradient on a kink-free batch of two.
pub fn check_target(
    target: &str,
    spec: &WaveletSpec,
    mode: BoundaryMode,
    seed: u64,
    cfg: &GradCheckConfig,
) -> Result<GradReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = Arc::new(spec.clone());
    let shape = [1, 2, 8, 8];
    let gap = 0.05;
    if let Some(kind) = target.strip_prefix("model-") {
        let kind: DownsampleKind = kind.parse()?;
        let mut config = if kind.is_wavelet() {
            ModelConfig::wave(kind, &spec.name, seed)
        } else {
            ModelConfig::baseline(kind, seed)
        };
        config.input = (1, 16, 16);
        config.boundary = mode;
        let mut model = Model::with_wavelet(config, (*spec).clone())?;
        // Zero biases leave units with an all-dead receptive field exactly on
        // the ReLU kink; small random biases move them off it.
        for (name, p) in model.params_mut() {
            if name.ends_with(".bias") {
                *p = uniform(p.shape(), -0.1, 0.1, &mut rng);
            }
        }
        let (x, labels, _) = kink_free_batch(&model, 2, seed, cfg.step, 200)?;
        return grad_check_model(&model, &x, &labels, cfg);
    }
    // same projection on every evaluation
    let project = |t: &mut Tape, v: Var| -> Result<Var> {
        let mut prng = ChaCha8Rng::seed_from_u64(seed ^ 0x5a5a);
        let p = uniform(t.value(v).shape(), -1.0, 1.0, &mut prng);
        t.weighted_sum(v, p)
    };
    let inputs = match target {
        "conv2d" | "conv2d_stride2" => named(vec![
            ("x", uniform(&[1, 2, 6, 6], -1.0, 1.0, &mut rng)),
            ("weight", uniform(&[3, 2, 3, 3], -1.0, 1.0, &mut rng)),
            ("bias", uniform(&[3], -1.0, 1.0, &mut rng)),
        ]),
        "relu" => named(vec![("x", away_from_zero(&shape, gap, &mut rng))]),
        "soft_shrink" => {
            // kinks at +-0.1: half the entries inside the dead zone, half outside
            let x = away_from_zero(&shape, gap, &mut rng);
            named(vec![("x", x.map(|v| if v.abs() < 0.5 { v * 0.1 } else { v }))])
        }
        "linear" | "softmax_ce" => named(vec![
            ("x", uniform(&[3, 5], -1.0, 1.0, &mut rng)),
            ("weight", uniform(&[4, 5], -1.0, 1.0, &mut rng)),
            ("bias", uniform(&[4], -1.0, 1.0, &mut rng)),
        ]),
        "maxpool2" => {
            // distinct values on a coarse grid keep window ties far apart
            let n: usize = shape.iter().product();
            let mut vals: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
            for i in (1..n).rev() {
                vals.swap(i, rng.random_range(0..=i));
            }
            named(vec![("x", Tensor::new(shape.to_vec(), vals)?)])
        }
        "idwt2d" => named(vec![("bands", uniform(&[1, 8, 4, 4], -1.0, 1.0, &mut rng))]),
        "avgpool2" | "global_avg_pool" | "dwt_ll" | "dwt2d" | "dwt_avg" | "dwt_concat" | "denoise" => {
            named(vec![("x", uniform(&shape, -1.0, 1.0, &mut rng))])
        }
        other => return Err(Error::InvalidConfig(format!("unknown gradcheck target `{other}`"))),
    };
    let labels = [0usize, 3, 1];
    let target = target.to_string();
    grad_check(
        &inputs,
        |t, v| {
            let out = match target.as_str() {
                "conv2d" => t.conv2d(v[0], v[1], v[2], 1, 1)?,
                "conv2d_stride2" => t.conv2d(v[0], v[1], v[2], 2, 1)?,
                "relu" => t.relu(v[0]),
                "soft_shrink" => t.soft_shrink(v[0], 0.1)?,
                "linear" => t.linear(v[0], v[1], v[2])?,
                "softmax_ce" => {
                    let logits = t.linear(v[0], v[1], v[2])?;
                    return t.softmax_cross_entropy(logits, &labels);
                }
                "maxpool2" => t.max_pool2(v[0])?,
                "avgpool2" => t.avg_pool2(v[0])?,
                "global_avg_pool" => t.global_avg_pool(v[0])?,
                "dwt_ll" => t.dwt_ll(v[0], spec.clone(), mode)?,
                "dwt2d" | "dwt_concat" => t.dwt2d(v[0], spec.clone(), mode)?,
                "dwt_avg" => {
                    let b = t.dwt2d(v[0], spec.clone(), mode)?;
                    t.group_mean(b, 4)?
                }
                "idwt2d" => t.idwt2d(v[0], spec.clone(), mode, (8, 8))?,
                "denoise" => denoise_node(t, v[0], &spec, 0.1, 2, mode)?,
                _ => unreachable!("target validated above"),
            };
            project(t, out)
        },
        cfg,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_map_is_exact() {
        let w = Tensor::from_fn(&[3, 4], |i| (i as f64 * 0.37).sin());
        let x = Tensor::from_fn(&[2, 4], |i| (i as f64 * 0.91).cos());
        let b = Tensor::from_vec(vec![0.1, -0.2, 0.3]);
        let inputs = vec![("x".into(), x), ("w".into(), w), ("b".into(), b)];
        let proj = Tensor::from_fn(&[2, 3], |i| 1.0 + i as f64);
        let rep = grad_check(
            &inputs,
            |t, v| {
                let y = t.linear(v[0], v[1], v[2])?;
                t.weighted_sum(y, proj.clone())
            },
            &GradCheckConfig::default(),
        )
        .unwrap();
        assert!(rep.max_rel_error <= 1e-8, "{rep:?}");
        assert_eq!(rep.kink_margin, None);
    }

    #[test]
    fn relu_at_kink_is_rejected() {
        let inputs = vec![("x".into(), Tensor::from_vec(vec![0.5, 1e-7]))];
        let err = grad_check(
            &inputs,
            |t, v| {
                let y = t.relu(v[0]);
                Ok(t.half_squared_sum(y))
            },
            &GradCheckConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::KinkProximity { .. }));
    }
}
