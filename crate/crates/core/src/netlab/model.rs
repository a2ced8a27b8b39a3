//! Toy three-block CNNs with pluggable downsampling.

use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filterbank::{get_wavelet, WaveletSpec};
use crate::io::{read_tensors, write_tensors, Dtype};
use crate::tensor::Tensor;
use crate::transforms::BoundaryMode;

use super::ops;
use super::tape::{Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Architecture {
    ToyBaseline,
    ToyWave,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DownsampleKind {
    MaxPool2,
    AvgPool2,
    StridedConv2,
    #[serde(rename = "DwtLL")]
    DwtLl,
    DwtAvg,
    DwtConcat,
}

impl DownsampleKind {
    pub fn is_wavelet(self) -> bool {
        matches!(self, Self::DwtLl | Self::DwtAvg | Self::DwtConcat)
    }

    /// Channel multiplier of the downsampling stage.
    pub fn channel_factor(self) -> usize {
        if self == Self::DwtConcat {
            4
        } else {
            1
        }
    }
}

impl std::str::FromStr for DownsampleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "maxpool" | "maxpool2" => Self::MaxPool2,
            "avgpool" | "avgpool2" => Self::AvgPool2,
            "stride" | "stridedconv2" | "strided_conv2" => Self::StridedConv2,
            "dwt_ll" | "dwtll" => Self::DwtLl,
            "dwt_avg" | "dwtavg" => Self::DwtAvg,
            "dwt_concat" | "dwtconcat" => Self::DwtConcat,
            _ => return Err(Error::InvalidConfig(format!("unknown downsample kind `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub wavelet: String,
    pub downsample: [DownsampleKind; 3],
    pub widths: [usize; 3],
    /// Input `(channels, height, width)`.
    pub input: (usize, usize, usize),
    pub classes: usize,
    pub seed: u64,
    #[serde(default)]
    pub boundary: BoundaryMode,
}

impl ModelConfig {
    pub fn baseline(kind: DownsampleKind, seed: u64) -> Self {
        Self {
            architecture: Architecture::ToyBaseline,
            wavelet: "haar".into(),
            downsample: [kind; 3],
            widths: [16, 32, 64],
            input: (1, 32, 32),
            classes: 4,
            seed,
            boundary: BoundaryMode::Periodic,
        }
    }

    pub fn wave(kind: DownsampleKind, wavelet: &str, seed: u64) -> Self {
        Self { architecture: Architecture::ToyWave, wavelet: wavelet.into(), ..Self::baseline(kind, seed) }
    }

    pub fn validate(&self) -> Result<()> {
        for kind in self.downsample {
            let ok = match self.architecture {
                Architecture::ToyWave => kind.is_wavelet(),
                Architecture::ToyBaseline => !kind.is_wavelet(),
            };
            if !ok {
                return Err(Error::InvalidConfig(format!("{kind:?} is not allowed in {:?}", self.architecture)));
            }
        }
        if self.widths.contains(&0) || self.classes < 2 || self.input.0 == 0 {
            return Err(Error::InvalidConfig("widths, classes and input channels must be positive".into()));
        }
        let (_, h, w) = self.input;
        if h % 8 != 0 || w % 8 != 0 || h == 0 || w == 0 {
            return Err(Error::InvalidConfig(format!("input {h}x{w} must be divisible by 8")));
        }
        Ok(())
    }
}

/// Named parameter blocks plus the architecture that consumes them.
#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    spec: Arc<WaveletSpec>,
    params: Vec<(String, Tensor)>,
}

fn he_normal(shape: &[usize], fan_in: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let dist = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
    Tensor::from_fn(shape, |_| dist.sample(rng))
}

/// Result of a forward pass recorded on a tape.
pub struct Graph {
    pub tape: Tape,
    pub input: Var,
    pub params: Vec<Var>,
    pub logits: Var,
}

impl Model {
    pub fn new(config: ModelConfig) -> Result<Self> {
        let spec = get_wavelet(&config.wavelet)?;
        Self::with_wavelet(config, spec)
    }

    /// Builds a model around an explicit filter bank (e.g. one loaded from a
    /// custom wavelet file); `config.wavelet` is overwritten with its name.
    pub fn with_wavelet(mut config: ModelConfig, spec: WaveletSpec) -> Result<Self> {
        config.validate()?;
        config.wavelet = spec.name.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = Vec::new();
        let mut in_ch = config.input.0;
        for (i, (&width, &kind)) in config.widths.iter().zip(&config.downsample).enumerate() {
            let fan_in = in_ch * 9;
            params.push((format!("block{i}.conv.weight"), he_normal(&[width, in_ch, 3, 3], fan_in, &mut rng)));
            params.push((format!("block{i}.conv.bias"), Tensor::zeros(&[width])));
            if kind == DownsampleKind::StridedConv2 {
                params.push((format!("block{i}.down.weight"), he_normal(&[width, width, 3, 3], width * 9, &mut rng)));
                params.push((format!("block{i}.down.bias"), Tensor::zeros(&[width])));
            }
            in_ch = width * kind.channel_factor();
        }
        params.push(("head.weight".into(), he_normal(&[config.classes, in_ch], in_ch, &mut rng)));
        params.push(("head.bias".into(), Tensor::zeros(&[config.classes])));
        Ok(Self { config, spec: Arc::new(spec), params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn wavelet(&self) -> &WaveletSpec {
        &self.spec
    }

    pub fn params(&self) -> &[(String, Tensor)] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [(String, Tensor)] {
        &mut self.params
    }

    pub fn param(&self, name: &str) -> Option<&Tensor> {
        self.params.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|(_, t)| t.len()).sum()
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        let (c, h, w) = self.config.input;
        match *x.shape() {
            [_, xc, xh, xw] if (xc, xh, xw) == (c, h, w) => Ok(()),
            _ => Err(Error::ShapeMismatch(format!("model expects [B, {c}, {h}, {w}], got {:?}", x.shape()))),
        }
    }

    /// Records the forward pass of `x` (`[B, C, H, W]`) up to the logits.
    pub fn graph(&self, x: &Tensor) -> Result<Graph> {
        self.check_input(x)?;
        let mut tape = Tape::new();
        let input = tape.leaf(x.clone());
        let params: Vec<Var> = self.params.iter().map(|(_, t)| tape.leaf(t.clone())).collect();
        let logits = self.build(&mut tape, input, &params)?;
        Ok(Graph { tape, input, params, logits })
    }

    /// Appends the network to `tape`, reading the input and the parameter
    /// blocks (in [`Model::params`] order) from existing nodes.
    pub fn build(&self, tape: &mut Tape, input: Var, params: &[Var]) -> Result<Var> {
        if params.len() != self.params.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} parameter nodes for {} blocks",
                params.len(),
                self.params.len()
            )));
        }
        let mut p = params.iter().copied();
        let mut next = || p.next().expect("parameter layout matches architecture");
        let mode = self.config.boundary;
        let mut h = input;
        for &kind in &self.config.downsample {
            let (w, b) = (next(), next());
            let conv = tape.conv2d(h, w, b, 1, 1)?;
            let act = tape.relu(conv);
            h = match kind {
                DownsampleKind::MaxPool2 => tape.max_pool2(act)?,
                DownsampleKind::AvgPool2 => tape.avg_pool2(act)?,
                DownsampleKind::StridedConv2 => {
                    let (dw, db) = (next(), next());
                    tape.conv2d(act, dw, db, 2, 1)?
                }
                DownsampleKind::DwtLl => tape.dwt_ll(act, self.spec.clone(), mode)?,
                DownsampleKind::DwtAvg => {
                    let bands = tape.dwt2d(act, self.spec.clone(), mode)?;
                    tape.group_mean(bands, 4)?
                }
                DownsampleKind::DwtConcat => tape.dwt2d(act, self.spec.clone(), mode)?,
            };
        }
        let pooled = tape.global_avg_pool(h)?;
        let (w, b) = (next(), next());
        tape.linear(pooled, w, b)
    }

    pub fn logits(&self, x: &Tensor) -> Result<Tensor> {
        let g = self.graph(x)?;
        Ok(g.tape.value(g.logits).clone())
    }

    /// Class probabilities `[B, classes]`, evaluated in chunks.
    pub fn predict_proba(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let b = x.shape()[0];
        let chunk = 128;
        let mut parts = Vec::new();
        for start in (0..b).step_by(chunk) {
            let xs = x.slice_leading(start, chunk.min(b - start))?;
            parts.push(ops::softmax(&self.logits(&xs)?));
        }
        let data: Vec<f64> = parts.iter().flat_map(|t| t.data().iter().copied()).collect();
        Tensor::new(vec![b, self.config.classes], data)
    }

    pub fn predict(&self, x: &Tensor) -> Result<Vec<usize>> {
        let p = self.predict_proba(x)?;
        Ok(argmax_rows(&p))
    }

    /// Mean cross-entropy loss.
    pub fn loss(&self, x: &Tensor, labels: &[usize]) -> Result<f64> {
        let logits = self.logits(x)?;
        Ok(ops::softmax_cross_entropy(&logits, labels)?.0)
    }

    /// Loss, logits and gradients for every parameter block (in layout order).
    pub fn loss_and_grads(&self, x: &Tensor, labels: &[usize]) -> Result<(f64, Tensor, Vec<Tensor>)> {
        let mut g = self.graph(x)?;
        let loss = g.tape.softmax_cross_entropy(g.logits, labels)?;
        let grads = g.tape.backward(loss)?;
        let pg = g.params.iter().map(|v| grads.get_or_zeros(*v, g.tape.value(*v))).collect();
        Ok((g.tape.value(loss).data()[0], g.tape.value(g.logits).clone(), pg))
    }

    /// Gradient of the mean cross-entropy with respect to the input batch.
    pub fn input_gradient(&self, x: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
        let mut g = self.graph(x)?;
        let loss = g.tape.softmax_cross_entropy(g.logits, labels)?;
        let grads = g.tape.backward(loss)?;
        Ok((g.tape.value(loss).data()[0], grads.get_or_zeros(g.input, x)))
    }

    /// Writes the weights as a tensor container and the config as a JSON
    /// sidecar next to it (`<path>.json`).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        write_tensors(path, &self.params, Dtype::F64)?;
        let sidecar = sidecar_path(path);
        let json = serde_json::to_string_pretty(&ModelFile { schema_version: 1, config: self.config.clone() })?;
        std::fs::write(sidecar, json + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file: ModelFile = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
        let spec = get_wavelet(&file.config.wavelet)?;
        Self::load_with_wavelet(path, file.config, spec)
    }

    /// Loads weights for an explicit config and filter bank.
    pub fn load_with_wavelet(path: impl AsRef<Path>, config: ModelConfig, spec: WaveletSpec) -> Result<Self> {
        let mut model = Self::with_wavelet(config, spec)?;
        let stored = read_tensors(path)?;
        for (name, t) in model.params.iter_mut() {
            let (_, v) = stored
                .iter()
                .find(|(n, _)| n == name)
                .ok_or_else(|| Error::InvalidConfig(format!("weights file lacks `{name}`")))?;
            t.expect_same_shape(v)?;
            *t = v.clone();
        }
        Ok(model)
    }

    /// Reads only the JSON sidecar of a saved model.
    pub fn read_config(path: impl AsRef<Path>) -> Result<ModelConfig> {
        let file: ModelFile = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path.as_ref()))?)?;
        Ok(file.config)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema_version: u32,
    config: ModelConfig,
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

/// Row-wise argmax, first index winning ties.
pub fn argmax_rows(p: &Tensor) -> Vec<usize> {
    let k = p.shape()[1];
    p.data()
        .chunks(k)
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
                .0
        })
        .collect()
}
