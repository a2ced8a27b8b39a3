//! L-infinity FGSM and PGD against a model's cross-entropy loss.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netlab::Model;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackKind {
    Fgsm,
    Pgd,
}

impl std::str::FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fgsm" => Ok(Self::Fgsm),
            "pgd" => Ok(Self::Pgd),
            _ => Err(Error::InvalidConfig(format!("unknown attack `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub kind: AttackKind,
    /// L-infinity budget in pixel units.
    pub eps: f64,
    /// PGD step size.
    pub alpha: f64,
    pub steps: usize,
    /// PGD uniform random start inside the ball.
    pub random_start: bool,
    pub seed: u64,
}

impl AttackConfig {
    pub fn fgsm(eps: f64) -> Self {
        Self { kind: AttackKind::Fgsm, eps, alpha: eps, steps: 1, random_start: false, seed: 0 }
    }

    pub fn pgd(eps: f64, alpha: f64, steps: usize, seed: u64) -> Self {
        Self { kind: AttackKind::Pgd, eps, alpha, steps, random_start: true, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps >= 0.0) {
            return Err(Error::InvalidConfig("eps must be non-negative".into()));
        }
        if self.kind == AttackKind::Pgd && (!(self.alpha > 0.0) || self.steps == 0) {
            return Err(Error::InvalidConfig("PGD needs alpha > 0 and steps >= 1".into()));
        }
        Ok(())
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Bounds of `[x0 - eps, x0 + eps] ∩ [0, 1]`, tightened by an ulp where
/// rounding would otherwise let `|x - x0|` exceed `eps`.
fn ball(x0: f64, eps: f64) -> (f64, f64) {
    let mut lo = (x0 - eps).max(0.0);
    while x0 - lo > eps {
        lo = lo.next_up();
    }
    let mut hi = (x0 + eps).min(1.0);
    while hi - x0 > eps {
        hi = hi.next_down();
    }
    (lo, hi)
}

fn project(x: &mut Tensor, x0: &Tensor, eps: f64) {
    for (v, &o) in x.data_mut().iter_mut().zip(x0.data()) {
        let (lo, hi) = ball(o, eps);
        *v = v.clamp(lo, hi);
    }
}

fn check_range(x: &Tensor) -> Result<()> {
    if x.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::OutOfRangeInput);
    }
    Ok(())
}

fn signed_step(model: &Model, x: &Tensor, labels: &[usize], step: f64) -> Result<Tensor> {
    let (_, g) = model.input_gradient(x, labels)?;
    x.zip_map(&g, |v, gv| (v + step * sign(gv)).clamp(0.0, 1.0))
}

/// `clamp(x + eps * sign(grad_x loss), 0, 1)`.
pub fn fgsm(model: &Model, x: &Tensor, labels: &[usize], eps: f64) -> Result<Tensor> {
    AttackConfig::fgsm(eps).validate()?;
    check_range(x)?;
    let mut adv = signed_step(model, x, labels, eps)?;
    project(&mut adv, x, eps);
    Ok(adv)
}

/// Iterated signed-gradient steps, each projected back onto the ball
/// around `x` and onto `[0, 1]`.
pub fn pgd(model: &Model, x: &Tensor, labels: &[usize], cfg: &AttackConfig) -> Result<Tensor> {
    cfg.validate()?;
    check_range(x)?;
    let mut adv = x.clone();
    if cfg.random_start && cfg.eps > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for v in adv.data_mut() {
            *v += rng.random_range(-cfg.eps..=cfg.eps);
        }
        project(&mut adv, x, cfg.eps);
    }
    for _ in 0..cfg.steps {
        adv = signed_step(model, &adv, labels, cfg.alpha)?;
        project(&mut adv, x, cfg.eps);
    }
    Ok(adv)
}

pub fn attack(model: &Model, x: &Tensor, labels: &[usize], cfg: &AttackConfig) -> Result<Tensor> {
    match cfg.kind {
        AttackKind::Fgsm => fgsm(model, x, labels, cfg.eps),
        AttackKind::Pgd => pgd(model, x, labels, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_bounds_hold_exactly() {
        for &x0 in &[0.0, 0.1, 0.3, 0.7, 0.97, 1.0, 0.123456789] {
            for &eps in &[0.0, 0.03, 0.1, 1e-9] {
                let (lo, hi) = ball(x0, eps);
                assert!(x0 - lo <= eps && hi - x0 <= eps);
                assert!((0.0..=1.0).contains(&lo) && hi <= 1.0 && lo <= hi);
            }
        }
    }

    #[test]
    fn config_rules() {
        assert!(AttackConfig::pgd(0.03, 0.0, 10, 0).validate().is_err());
        assert!(AttackConfig::pgd(0.03, 0.01, 0, 0).validate().is_err());
        assert!(AttackConfig::fgsm(-0.1).validate().is_err());
    }
}
