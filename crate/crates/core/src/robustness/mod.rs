//! Corruption robustness (CE, mCE over the noise corruptions) and
//! adversarial attacks.

pub mod attack;
pub mod corrupt;

pub use attack::{attack, fgsm, pgd, AttackConfig, AttackKind};
pub use corrupt::{corrupt, corrupt_with, CorruptionKind, CorruptionSpec, SeverityTable};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netlab::{train, Dataset, Model};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// `100 * sum(errors_f) / sum(errors_baseline)` over the five severities.
pub fn corruption_error(errors_f: &[f64], errors_baseline: &[f64]) -> Result<f64> {
    if errors_f.len() != 5 || errors_baseline.len() != 5 {
        return Err(Error::ShapeMismatch("corruption error needs five severities each".into()));
    }
    let base: f64 = errors_baseline.iter().sum();
    if !(base > 0.0) {
        return Err(Error::ZeroBaseline);
    }
    Ok(100.0 * errors_f.iter().sum::<f64>() / base)
}

/// Mean of the three noise CE values.
pub fn mce_noise(ce_gaussian: f64, ce_shot: f64, ce_impulse: f64) -> f64 {
    (ce_gaussian + ce_shot + ce_impulse) / 3.0
}

/// Top-1 error (%) per corruption kind and severity.
pub type ErrorTable = BTreeMap<String, BTreeMap<String, f64>>;

/// Seed of the corruption drawn for `(kind, severity)` in a sweep seeded
/// with `seed`; model and baseline see identical corrupted images.
pub fn cell_seed(seed: u64, kind: CorruptionKind, severity: u8) -> u64 {
    let k = CorruptionKind::ALL.iter().position(|&c| c == kind).expect("known kind") as u64;
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(k * 16 + severity as u64)
}

/// Errors of `model` on every corrupted copy of `data`.
pub fn corruption_errors(model: &Model, data: &Dataset, table: &SeverityTable, seed: u64) -> Result<ErrorTable> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut out = ErrorTable::new();
    for kind in CorruptionKind::ALL {
        let mut row = BTreeMap::new();
        for severity in 1..=5u8 {
            let spec = CorruptionSpec { kind, severity, seed: cell_seed(seed, kind, severity) };
            let images = corrupt_with(&data.images, &spec, table)?;
            let noisy = Dataset::new(images, data.labels.clone())?;
            row.insert(severity.to_string(), train::evaluate(model, &noisy)?.error);
        }
        out.insert(kind.name().to_string(), row);
    }
    Ok(out)
}

fn severities(table: &ErrorTable, kind: CorruptionKind) -> Result<Vec<f64>> {
    let row =
        table.get(kind.name()).ok_or_else(|| Error::InvalidConfig(format!("error table lacks `{}`", kind.name())))?;
    (1..=5)
        .map(|s| {
            row.get(&s.to_string())
                .copied()
                .ok_or_else(|| Error::InvalidConfig(format!("error table lacks severity {s}")))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub schema_version: u32,
    pub model_id: String,
    pub baseline_id: String,
    pub severity_table_version: String,
    pub seeds: Vec<u64>,
    pub errors: ErrorTable,
    pub baseline_errors: ErrorTable,
    pub ce: BTreeMap<String, f64>,
    pub mce_noise: f64,
}

impl RobustnessReport {
    /// Assembles CE and mCE from precomputed error tables.
    pub fn from_tables(
        model_id: &str,
        errors: ErrorTable,
        baseline_id: &str,
        baseline_errors: ErrorTable,
        table: &SeverityTable,
        seeds: Vec<u64>,
    ) -> Result<Self> {
        let mut ce = BTreeMap::new();
        for kind in CorruptionKind::ALL {
            let v = corruption_error(&severities(&errors, kind)?, &severities(&baseline_errors, kind)?)?;
            ce.insert(kind.name().to_string(), v);
        }
        let mce = mce_noise(ce["gaussian"], ce["shot"], ce["impulse"]);
        Ok(Self {
            schema_version: REPORT_SCHEMA_VERSION,
            model_id: model_id.into(),
            baseline_id: baseline_id.into(),
            severity_table_version: table.version.clone(),
            seeds,
            errors,
            baseline_errors,
            ce,
            mce_noise: mce,
        })
    }
}

/// Evaluates `model` and the normalizing `baseline` over the same
/// corrupted copies of `data`.
pub fn robustness_report(
    model: (&str, &Model),
    baseline: (&str, &Model),
    data: &Dataset,
    table: &SeverityTable,
    seed: u64,
) -> Result<RobustnessReport> {
    let errors = corruption_errors(model.1, data, table, seed)?;
    let base = corruption_errors(baseline.1, data, table, seed)?;
    RobustnessReport::from_tables(model.0, errors, baseline.0, base, table, vec![seed])
}
