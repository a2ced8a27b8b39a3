//! Wavelet filter banks: the built-in Daubechies and Cohen registry, QMF
//! high-pass derivation and an operational perfect-reconstruction check.

pub mod design;

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;
use std::path::Path;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::transforms::{dwt1d, idwt1d, BoundaryMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Family {
    Orthogonal,
    Biorthogonal,
}

/// A named two-channel filter bank.
///
/// Decomposition uses `lo_dec`/`hi_dec` at column offset `2k`. Reconstruction
/// places `hi_rec` at `2k` and `lo_rec` at `2k - dual_shift`; the shift
/// aligns the stored dual low-pass with the primal one when their zero
/// padding puts their centres an odd distance apart.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletSpec {
    pub name: String,
    pub family: Family,
    pub lo_dec: Vec<f64>,
    pub hi_dec: Vec<f64>,
    pub lo_rec: Vec<f64>,
    pub hi_rec: Vec<f64>,
    pub support_len: usize,
    pub dual_shift: usize,
}

impl WaveletSpec {
    /// Builds an orthogonal bank from its low-pass filter.
    pub fn orthogonal(name: &str, lo: Vec<f64>) -> Result<Self> {
        let hi = qmf_orthogonal(&lo)?;
        Ok(Self {
            name: name.to_string(),
            family: Family::Orthogonal,
            support_len: lo.len(),
            lo_rec: lo.clone(),
            hi_rec: hi.clone(),
            lo_dec: lo,
            hi_dec: hi,
            dual_shift: 0,
        })
    }

    /// Builds a biorthogonal bank from padded primal and dual low-pass
    /// filters. High-pass filters come from the dual rotated left by
    /// `dual_shift`, so the derivation sees two aligned low-pass filters.
    pub fn biorthogonal(name: &str, lo: Vec<f64>, lo_dual: Vec<f64>, dual_shift: usize) -> Result<Self> {
        if lo.len() != lo_dual.len() {
            return Err(Error::LengthMismatch(lo.len(), lo_dual.len()));
        }
        let mut aligned = lo_dual.clone();
        aligned.rotate_left(dual_shift % lo_dual.len().max(1));
        let (hi, hi_dual) = qmf_biorthogonal(&lo, &aligned)?;
        Ok(Self {
            name: name.to_string(),
            family: Family::Biorthogonal,
            support_len: lo.len(),
            lo_dec: lo,
            hi_dec: hi,
            lo_rec: lo_dual,
            hi_rec: hi_dual,
            dual_shift,
        })
    }
}

/// `h[k] = (-1)^k lo[L-1-k]`.
pub fn qmf_orthogonal(lo: &[f64]) -> Result<Vec<f64>> {
    let n = lo.len();
    if n % 2 == 1 || n == 0 {
        return Err(Error::OddFilterLength(n));
    }
    Ok(alternating_flip(lo))
}

/// Returns `(hi, hi_dual)` with `hi[k] = (-1)^k lo_dual[L-1-k]` and
/// `hi_dual[k] = (-1)^k lo[L-1-k]`.
pub fn qmf_biorthogonal(lo: &[f64], lo_dual: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if lo.len() != lo_dual.len() {
        return Err(Error::LengthMismatch(lo.len(), lo_dual.len()));
    }
    if lo.len() % 2 == 1 || lo.is_empty() {
        return Err(Error::OddFilterLength(lo.len()));
    }
    Ok((alternating_flip(lo_dual), alternating_flip(lo)))
}

fn alternating_flip(f: &[f64]) -> Vec<f64> {
    let last = f.len() - 1;
    (0..f.len()).map(|k| if k % 2 == 0 { f[last - k] } else { -f[last - k] }).collect()
}

fn pad(filter: &[f64], offset: usize, len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    out[offset..offset + filter.len()].copy_from_slice(filter);
    out
}

/// Names of the compiled-in wavelets, in registry order.
pub const BUILTIN_NAMES: [&str; 11] =
    ["haar", "db1", "db2", "db3", "db4", "db5", "db6", "ch2.2", "ch3.3", "ch4.4", "ch5.5"];

fn build_builtin(name: &str) -> Result<WaveletSpec> {
    // (order, primal zeros at pi, primal roots, support, primal offset, dual offset, dual shift)
    // Offsets reproduce the zero padding of the published Cohen table.
    let cohen = |p, zeros, roots, len, lo_off, dual_off, shift| {
        let (lo, dual) = design::cohen_pair(p, zeros, roots);
        WaveletSpec::biorthogonal(name, pad(&lo, lo_off, len), pad(&dual, dual_off, len), shift)
    };
    match name {
        "haar" | "db1" => WaveletSpec::orthogonal(name, design::daubechies(1)),
        "db2" | "db3" | "db4" | "db5" | "db6" => {
            let p = name[2..].parse::<usize>().expect("registry name");
            WaveletSpec::orthogonal(name, design::daubechies(p))
        }
        "ch2.2" => cohen(2, 2, 0, 6, 1, 1, 1),
        "ch3.3" => cohen(3, 3, 0, 8, 2, 0, 0),
        "ch4.4" => cohen(4, 4, 1, 10, 1, 1, 1),
        "ch5.5" => cohen(5, 6, 2, 12, 0, 2, 1),
        _ => Err(Error::UnknownWavelet(name.to_string())),
    }
}

fn builtins() -> &'static BTreeMap<String, WaveletSpec> {
    static REGISTRY: OnceLock<BTreeMap<String, WaveletSpec>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        BUILTIN_NAMES.iter().map(|n| (n.to_string(), build_builtin(n).expect("builtin wavelet"))).collect()
    })
}

/// Looks up a compiled-in wavelet.
pub fn get_wavelet(name: &str) -> Result<WaveletSpec> {
    builtins().get(name).cloned().ok_or_else(|| Error::UnknownWavelet(name.to_string()))
}

/// Built-in wavelets plus user-registered ones. Custom entries shadow
/// built-ins of the same name.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    custom: BTreeMap<String, WaveletSpec>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, spec: WaveletSpec) {
        self.custom.insert(spec.name.clone(), spec);
    }

    pub fn get(&self, name: &str) -> Result<WaveletSpec> {
        match self.custom.get(name) {
            Some(s) => Ok(s.clone()),
            None => get_wavelet(name),
        }
    }

    pub fn names(&self) -> Vec<String> {
        let mut names: Vec<String> = BUILTIN_NAMES.iter().map(|s| s.to_string()).collect();
        for n in self.custom.keys() {
            if !names.contains(n) {
                names.push(n.clone());
            }
        }
        names
    }

    pub fn load_file(&mut self, path: impl AsRef<Path>) -> Result<Vec<String>> {
        let text = std::fs::read_to_string(path)?;
        let specs = parse_wavelet_text(&text)?;
        let names = specs.iter().map(|s| s.name.clone()).collect();
        for s in specs {
            self.register(s);
        }
        Ok(names)
    }
}

/// Parses the custom wavelet text format: one filter per line,
/// `name role c0 c1 ...` with role one of `lo_dec`, `hi_dec`, `lo_rec`,
/// `hi_rec`. `#` starts a comment. Missing reconstruction filters default to
/// the decomposition ones and missing high-pass filters are derived by QMF.
pub fn parse_wavelet_text(text: &str) -> Result<Vec<WaveletSpec>> {
    #[derive(Default)]
    struct Partial {
        lo_dec: Option<Vec<f64>>,
        hi_dec: Option<Vec<f64>>,
        lo_rec: Option<Vec<f64>>,
        hi_rec: Option<Vec<f64>>,
    }
    let mut order = Vec::new();
    let mut parts: BTreeMap<String, Partial> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: String| Error::WaveletFile { line: line_no, msg };
        let mut tokens = line.split_whitespace();
        let name = tokens.next().ok_or_else(|| bad("missing name".into()))?;
        let role = tokens.next().ok_or_else(|| bad("missing role".into()))?;
        let coeffs =
            tokens.map(|t| t.parse::<f64>().map_err(|e| bad(format!("`{t}`: {e}")))).collect::<Result<Vec<_>>>()?;
        if coeffs.is_empty() {
            return Err(bad("no coefficients".into()));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(bad("non-finite coefficient".into()));
        }
        if !parts.contains_key(name) {
            order.push(name.to_string());
        }
        let entry = parts.entry(name.to_string()).or_default();
        let slot = match role {
            "lo_dec" => &mut entry.lo_dec,
            "hi_dec" => &mut entry.hi_dec,
            "lo_rec" => &mut entry.lo_rec,
            "hi_rec" => &mut entry.hi_rec,
            other => return Err(bad(format!("unknown role `{other}`"))),
        };
        if slot.is_some() {
            return Err(bad(format!("duplicate {role} for `{name}`")));
        }
        *slot = Some(coeffs);
    }

    let mut out = Vec::new();
    for name in order {
        let p = parts.remove(&name).expect("recorded name");
        let lo_dec = p.lo_dec.ok_or_else(|| Error::WaveletFile { line: 0, msg: format!("`{name}` has no lo_dec") })?;
        let lo_rec = p.lo_rec.unwrap_or_else(|| lo_dec.clone());
        let (hi_dec, hi_rec) = match (p.hi_dec, p.hi_rec) {
            (Some(h), Some(ht)) => (h, ht),
            (h, ht) => {
                let (dh, dht) = qmf_biorthogonal(&lo_dec, &lo_rec)?;
                (h.unwrap_or(dh), ht.unwrap_or(dht))
            }
        };
        let len = lo_dec.len();
        for f in [&hi_dec, &lo_rec, &hi_rec] {
            if f.len() != len {
                return Err(Error::LengthMismatch(len, f.len()));
            }
        }
        if len % 2 == 1 {
            return Err(Error::OddFilterLength(len));
        }
        let family = if lo_rec == lo_dec && hi_rec == hi_dec { Family::Orthogonal } else { Family::Biorthogonal };
        out.push(WaveletSpec { name, family, lo_dec, hi_dec, lo_rec, hi_rec, support_len: len, dual_shift: 0 });
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub wavelet: String,
    pub pass: bool,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn residual(&self, check: &str) -> Option<f64> {
        self.checks.iter().find(|c| c.name == check).map(|c| c.residual)
    }
}

pub const PR_SIGNALS: usize = 32;
pub const PR_LENGTH: usize = 64;
pub const PR_TOLERANCE: f64 = 1e-8;
const IDENTITY_TOLERANCE: f64 = 1e-12;

/// Runs the filter identities and a seeded periodic round trip. Failures are
/// reported in the returned checks, never raised.
pub fn validate_spec(spec: &WaveletSpec) -> ValidationReport {
    let mut checks = Vec::new();
    let mut push =
        |name, residual: f64, tolerance| checks.push(Check { name, residual, tolerance, pass: residual <= tolerance });

    let lens = [&spec.lo_dec, &spec.hi_dec, &spec.lo_rec, &spec.hi_rec].map(|f| f.len());
    let shape_ok = lens.iter().all(|&l| l == spec.support_len) && spec.support_len.is_multiple_of(2);
    push("support_len", if shape_ok { 0.0 } else { 1.0 }, 0.0);

    let sum = |f: &[f64]| f.iter().sum::<f64>();
    push("hi_dec_dc", sum(&spec.hi_dec).abs(), IDENTITY_TOLERANCE);
    push("hi_rec_dc", sum(&spec.hi_rec).abs(), IDENTITY_TOLERANCE);
    push("lo_dec_sum", (sum(&spec.lo_dec) - SQRT_2).abs(), IDENTITY_TOLERANCE);
    push("lo_rec_sum", (sum(&spec.lo_rec) - SQRT_2).abs(), IDENTITY_TOLERANCE);

    if spec.family == Family::Orthogonal && shape_ok {
        let lo = &spec.lo_dec;
        let norm: f64 = lo.iter().map(|v| v * v).sum();
        push("lo_dec_norm", (norm - 1.0).abs(), IDENTITY_TOLERANCE);
        let cross: f64 = lo.iter().zip(&spec.hi_dec).map(|(a, b)| a * b).sum();
        push("lo_hi_orthogonal", cross.abs(), IDENTITY_TOLERANCE);
        let mut shift_max = 0.0f64;
        for m in (2..lo.len()).step_by(2) {
            let s: f64 = (0..lo.len() - m).map(|k| lo[k] * lo[k + m]).sum();
            shift_max = shift_max.max(s.abs());
        }
        push("even_shift_orthogonal", shift_max, IDENTITY_TOLERANCE);
        let mirror = spec
            .lo_dec
            .iter()
            .zip(&spec.lo_rec)
            .chain(spec.hi_dec.iter().zip(&spec.hi_rec))
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        push("rec_equals_dec", mirror, 0.0);
    }

    let pr = if shape_ok { pr_residual(spec).unwrap_or(f64::INFINITY) } else { f64::INFINITY };
    push("perfect_reconstruction", pr, PR_TOLERANCE);

    let pass = checks.iter().all(|c| c.pass);
    ValidationReport { wavelet: spec.name.clone(), pass, checks }
}

/// Max periodic round-trip residual over the seeded validation signals.
pub fn pr_residual(spec: &WaveletSpec) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let mut worst = 0.0f64;
    for _ in 0..PR_SIGNALS {
        let x = Tensor::from_fn(&[PR_LENGTH], |_| rng.random_range(-1.0..1.0));
        let bands = dwt1d(&x, spec, BoundaryMode::Periodic)?;
        let back = idwt1d(&bands, spec, BoundaryMode::Periodic, PR_LENGTH)?;
        worst = worst.max(back.max_abs_diff(&x));
    }
    Ok(worst)
}

#[cfg(test)]
#[allow(clippy::approx_constant)] // printed table values
mod tests {
    use super::*;

    fn assert_close(got: &[f64], want: &[f64], tol: f64) {
        assert_eq!(got.len(), want.len(), "{got:?} vs {want:?}");
        for (a, b) in got.iter().zip(want) {
            assert!((a - b).abs() <= tol, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn haar_coefficients() {
        let h = get_wavelet("haar").unwrap();
        assert_close(&h.lo_dec, &[0.70710678, 0.70710678], 5e-9);
        assert_close(&h.hi_dec, &[0.70710678, -0.70710678], 5e-9);
        assert_eq!(h.family, Family::Orthogonal);
    }

    #[test]
    fn db_table_values() {
        let db2 = get_wavelet("db2").unwrap();
        assert_close(&db2.lo_dec, &[0.48296291, 0.83651630, 0.22414387, -0.12940952], 5e-9);
        // Printed with 12 decimals.
        let db3 = [0.332670552950, 0.806891509311, 0.459877502118, -0.135011020010, -0.085441273882, 0.035226291886];
        assert_close(&get_wavelet("db3").unwrap().lo_dec, &db3, 1e-11);
        let db4 = [
            0.230377813309,
            0.714846570553,
            0.630880767930,
            -0.027983769417,
            -0.187034811719,
            0.030841381836,
            0.032883011667,
            -0.010597401785,
        ];
        assert_close(&get_wavelet("db4").unwrap().lo_dec, &db4, 1e-11);
        let db5 = [
            0.160102397974,
            0.603829269797,
            0.724308528438,
            0.138428145901,
            -0.242294887066,
            -0.032244869585,
            0.077571493840,
            -0.006241490213,
            -0.012580751999,
            0.003335725285,
        ];
        assert_close(&get_wavelet("db5").unwrap().lo_dec, &db5, 1e-11);
        let db6 = [
            0.111540743350,
            0.494623890398,
            0.751133908021,
            0.315250351709,
            -0.226264693965,
            -0.129766867567,
            0.097501605587,
            0.027522865530,
            -0.031582039317,
            0.000553842201,
            0.004777257511,
            -0.001077301085,
        ];
        assert_close(&get_wavelet("db6").unwrap().lo_dec, &db6, 1e-11);
    }

    #[test]
    fn cohen_table_values() {
        let ch22 = get_wavelet("ch2.2").unwrap();
        assert_close(&ch22.lo_dec, &[0.0, 0.35355339, 0.70710678, 0.35355339, 0.0, 0.0], 5e-9);
        assert_close(&ch22.lo_rec, &[0.0, -0.17677670, 0.35355339, 1.06066017, 0.35355339, -0.17677670], 5e-9);
        let ch33 = get_wavelet("ch3.3").unwrap();
        assert_close(&ch33.lo_dec, &[0.0, 0.0, 0.17677670, 0.53033009, 0.53033009, 0.17677670, 0.0, 0.0], 5e-9);
        assert_close(
            &ch33.lo_rec,
            &[0.06629126, -0.19887378, -0.15467961, 0.99436891, 0.99436891, -0.15467961, -0.19887378, 0.06629126],
            5e-9,
        );
        let ch44 = get_wavelet("ch4.4").unwrap();
        assert_close(
            &ch44.lo_dec,
            &[0.0, -0.06453888, -0.04068942, 0.41809227, 0.78848562, 0.41809227, -0.04068942, -0.06453888, 0.0, 0.0],
            5e-9,
        );
        assert_close(
            &ch44.lo_rec,
            &[
                0.0,
                0.03782846,
                -0.02384947,
                -0.11062440,
                0.37740286,
                0.85269868,
                0.37740286,
                -0.11062440,
                -0.02384947,
                0.03782846,
            ],
            5e-9,
        );
        let ch55 = get_wavelet("ch5.5").unwrap();
        assert_close(
            &ch55.lo_dec,
            &[
                0.01345671,
                -0.00269497,
                -0.13670658,
                -0.09350470,
                0.47680327,
                0.89950611,
                0.47680327,
                -0.09350470,
                -0.13670658,
                -0.00269497,
                0.01345671,
                0.0,
            ],
            5e-9,
        );
        assert_close(
            &ch55.lo_rec,
            &[
                0.0,
                0.0,
                0.03968709,
                0.00794811,
                -0.05446379,
                0.34560528,
                0.73666018,
                0.34560528,
                -0.05446379,
                0.00794811,
                0.03968709,
                0.0,
            ],
            5e-9,
        );
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(get_wavelet("db9"), Err(Error::UnknownWavelet(n)) if n == "db9"));
    }

    #[test]
    fn qmf_orthogonal_examples() {
        let h = qmf_orthogonal(&[0.70710678, 0.70710678]).unwrap();
        assert_eq!(h, vec![0.70710678, -0.70710678]);
        let db2 = get_wavelet("db2").unwrap();
        let h = qmf_orthogonal(&db2.lo_dec).unwrap();
        assert_close(&h, &[-0.12940952, -0.22414387, 0.83651630, -0.48296291], 5e-9);
        assert!(matches!(qmf_orthogonal(&[1.0, 2.0, 3.0]), Err(Error::OddFilterLength(3))));
    }

    #[test]
    fn qmf_biorthogonal_examples() {
        let ch = get_wavelet("ch2.2").unwrap();
        let (hi, hi_dual) = qmf_biorthogonal(&ch.lo_dec, &ch.lo_rec).unwrap();
        for k in 0..6 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            assert_eq!(hi[k], sign * ch.lo_rec[5 - k]);
            assert_eq!(hi_dual[k], sign * ch.lo_dec[5 - k]);
        }
        assert!(hi.iter().sum::<f64>().abs() < 1e-12);
        assert!(hi_dual.iter().sum::<f64>().abs() < 1e-12);

        let haar = get_wavelet("haar").unwrap().lo_dec;
        let (a, b) = qmf_biorthogonal(&haar, &haar).unwrap();
        let o = qmf_orthogonal(&haar).unwrap();
        assert_eq!(a, o);
        assert_eq!(b, o);

        assert!(matches!(qmf_biorthogonal(&[1.0, 1.0], &[1.0, 1.0, 1.0, 1.0]), Err(Error::LengthMismatch(2, 4))));
        assert!(matches!(qmf_biorthogonal(&[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0]), Err(Error::OddFilterLength(3))));
    }

    #[test]
    fn qmf_twice_negates() {
        for name in BUILTIN_NAMES {
            let lo = get_wavelet(name).unwrap().lo_dec;
            // Twice gives (-1)^(L-1) lo = -lo since L-1 is odd.
            let twice = qmf_orthogonal(&qmf_orthogonal(&lo).unwrap()).unwrap();
            for (a, b) in lo.iter().zip(&twice) {
                assert!((a + b).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn validate_examples() {
        let haar = validate_spec(&get_wavelet("haar").unwrap());
        assert!(haar.pass, "{haar:?}");
        assert!(haar.residual("perfect_reconstruction").unwrap() <= 1e-12);

        let ch55 = validate_spec(&get_wavelet("ch5.5").unwrap());
        assert!(ch55.pass, "{ch55:?}");
        assert!(ch55.residual("perfect_reconstruction").unwrap() <= 1e-8);

        let mut broken = get_wavelet("haar").unwrap();
        broken.hi_dec = vec![0.0; broken.support_len];
        let r = validate_spec(&broken);
        assert!(!r.pass);
        assert!(r.residual("perfect_reconstruction").unwrap() >= 0.1);
    }

    #[test]
    fn every_builtin_validates() {
        for name in BUILTIN_NAMES {
            let r = validate_spec(&get_wavelet(name).unwrap());
            assert!(r.pass, "{r:#?}");
        }
    }

    #[test]
    fn dual_rotation_only_moves_padding() {
        for name in BUILTIN_NAMES {
            let s = get_wavelet(name).unwrap();
            for k in 0..s.dual_shift {
                assert_eq!(s.lo_rec[k], 0.0, "{name}");
            }
        }
    }

    #[test]
    fn custom_wavelet_file() {
        let text = "# haar re-declared\nmyhaar lo_dec 0.7071067811865476 0.7071067811865476\n\
                    bior lo_dec 0 0.5 0.5 0\nbior lo_rec 0.5 0.5 0 0\n";
        let specs = parse_wavelet_text(text).unwrap();
        assert_eq!(specs.len(), 2);
        assert_eq!(specs[0].family, Family::Orthogonal);
        assert_eq!(specs[0].hi_dec, qmf_orthogonal(&specs[0].lo_dec).unwrap());
        assert_eq!(specs[1].family, Family::Biorthogonal);

        assert!(parse_wavelet_text("w lo_dec 1 2 3\n").is_err());
        assert!(parse_wavelet_text("w lo_dec 1 2\nw lo_dec 1 2\n").is_err());
        assert!(parse_wavelet_text("w middle 1 2\n").is_err());
        assert!(parse_wavelet_text("w hi_dec 1 -1\n").is_err());

        let mut reg = Registry::new();
        reg.register(specs[0].clone());
        assert!(reg.get("myhaar").is_ok());
        assert!(reg.get("db3").is_ok());
        assert!(reg.names().contains(&"myhaar".to_string()));
    }
}
