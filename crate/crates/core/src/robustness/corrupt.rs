//! Gaussian, shot and impulse noise at five severities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorruptionKind {
    Gaussian,
    Shot,
    Impulse,
}

impl CorruptionKind {
    pub const ALL: [CorruptionKind; 3] = [Self::Gaussian, Self::Shot, Self::Impulse];

    pub fn name(self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::Shot => "shot",
            Self::Impulse => "impulse",
        }
    }
}

impl std::str::FromStr for CorruptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Self::Gaussian),
            "shot" => Ok(Self::Shot),
            "impulse" => Ok(Self::Impulse),
            _ => Err(Error::InvalidConfig(format!("unknown corruption `{s}`"))),
        }
    }
}

/// Per-severity noise parameters: Gaussian std, shot-noise photon scale
/// (larger is milder; infinity disables it) and impulse fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeverityTable {
    pub version: String,
    pub gaussian: [f64; 5],
    pub shot: [f64; 5],
    pub impulse: [f64; 5],
}

impl Default for SeverityTable {
    fn default() -> Self {
        Self {
            version: "v1".into(),
            gaussian: [0.04, 0.08, 0.12, 0.18, 0.26],
            shot: [60.0, 25.0, 12.0, 5.0, 3.0],
            impulse: [0.03, 0.06, 0.09, 0.17, 0.27],
        }
    }
}

impl SeverityTable {
    pub fn param(&self, kind: CorruptionKind, severity: u8) -> Result<f64> {
        if !(1..=5).contains(&severity) {
            return Err(Error::InvalidConfig(format!("severity {severity} not in 1..=5")));
        }
        let row = match kind {
            CorruptionKind::Gaussian => &self.gaussian,
            CorruptionKind::Shot => &self.shot,
            CorruptionKind::Impulse => &self.impulse,
        };
        Ok(row[severity as usize - 1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    pub severity: u8,
    pub seed: u64,
}

/// Poisson draw: inverse CDF below mean 30, rounded normal approximation
/// above.
pub fn sample_poisson(mean: f64, rng: &mut impl Rng) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    if mean < 30.0 {
        let u: f64 = rng.random();
        let mut p = (-mean).exp();
        let mut cdf = p;
        let mut k = 0u32;
        while u > cdf && k < 1000 {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
        }
        k as f64
    } else {
        let z: f64 = StandardNormal.sample(rng);
        (mean + mean.sqrt() * z).round().max(0.0)
    }
}

/// Corrupts an image with values in `[0, 1]` using the default `v1` table.
pub fn corrupt(image: &Tensor, spec: &CorruptionSpec) -> Result<Tensor> {
    corrupt_with(image, spec, &SeverityTable::default())
}

pub fn corrupt_with(image: &Tensor, spec: &CorruptionSpec, table: &SeverityTable) -> Result<Tensor> {
    if image.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::OutOfRangeInput);
    }
    let param = table.param(spec.kind, spec.severity)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = image.clone();
    match spec.kind {
        CorruptionKind::Gaussian => {
            if param > 0.0 {
                for v in out.data_mut() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *v = (*v + param * z).clamp(0.0, 1.0);
                }
            }
        }
        CorruptionKind::Shot => {
            if param.is_finite() {
                for v in out.data_mut() {
                    *v = (sample_poisson(*v * param, &mut rng) / param).clamp(0.0, 1.0);
                }
            }
        }
        CorruptionKind::Impulse => {
            if param > 0.0 {
                for v in out.data_mut() {
                    let hit = rng.random_bool(param.min(1.0));
                    let salt = rng.random_bool(0.5);
                    if hit {
                        *v = if salt { 1.0 } else { 0.0 };
                    }
                }
            }
        }
    }
    Ok(out)
}
