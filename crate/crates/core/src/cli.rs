//! Command-line front end. [`run_cli`] returns the process exit code:
//! 0 on success, 1 on a domain error, 2 on a usage error.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::filterbank::{validate_spec, Registry, WaveletSpec};
use crate::io::{read_image, read_tensors, write_image, write_tensors, Dtype};
use crate::netlab::gradcheck::{check_target, GradCheckConfig, TARGETS};
use crate::netlab::{
    downsample, evaluate, synth_shapes, train, DenoiseConfig, DownsampleKind, Model, ModelConfig, TrainConfig,
};
use crate::robustness::{self, attack, AttackConfig, AttackKind, CorruptionKind, CorruptionSpec, SeverityTable};
use crate::tensor::Tensor;
use crate::transforms::{dwt2d, idwt2d, madd_dwt2d, madd_idwt2d, Bands2d, BoundaryMode};

const SCHEMA_VERSION: u32 = 1;
const TEST_SEED_OFFSET: u64 = 1000;

#[derive(Parser, Debug)]
#[command(name = "wavecnet", version, about = "Wavelet transforms, toy wavelet CNNs and a noise-robustness harness")]
struct Cli {
    /// Extra wavelet definitions (`name role c0 c1 ...` per line).
    #[arg(long, global = true)]
    wavelet_file: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct WaveletArgs {
    #[arg(long, default_value = "haar")]
    wavelet: String,
    #[arg(long, default_value = "periodic")]
    boundary: BoundaryMode,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One-level 2D DWT of an image into ll/lh/hl/hh images plus raw bands.
    Decompose {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        wavelet: WaveletArgs,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Inverse of `decompose`, from the raw bands it saved.
    Reconstruct {
        #[arg(long)]
        in_dir: PathBuf,
        #[command(flatten)]
        wavelet: WaveletArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Soft-threshold the high-frequency bands and reconstruct.
    Denoise {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        wavelet: WaveletArgs,
        #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
        lambda: f64,
        #[arg(long, default_value_t = 1)]
        levels: usize,
    },
    /// Apply one downsampling stage to an image.
    Downsample {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        mode: DownsampleMode,
        #[command(flatten)]
        wavelet: WaveletArgs,
        /// `.wtns` for the raw tensor, otherwise a PGM/PPM image.
        #[arg(long)]
        out: PathBuf,
    },
    /// Add seeded Gaussian, shot or impulse noise to an image.
    Corrupt {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "type")]
        kind: NoiseType,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
        severity: u8,
        #[arg(long)]
        seed: u64,
    },
    /// Train a toy model on synthetic shapes.
    Train {
        #[arg(long, default_value = "baseline")]
        arch: Arch,
        #[arg(long, default_value = "haar")]
        wavelet: String,
        #[arg(long)]
        downsample: Option<DownsampleMode>,
        #[arg(long, default_value = "periodic")]
        boundary: BoundaryMode,
        #[arg(long, default_value_t = 20)]
        epochs: usize,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        #[arg(long, default_value_t = 0.05)]
        lr: f64,
        #[arg(long, default_value_t = 2000)]
        train_size: usize,
        #[arg(long)]
        seed: u64,
        /// Weights path; the config goes to `<out>.json`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Clean accuracy and, with a baseline, noise CE / mCE.
    Eval {
        #[arg(long)]
        model: PathBuf,
        /// Normalizing model for CE; enables the corruption sweep.
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long, default_value_t = 500)]
        test_size: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// FGSM or PGD against a saved model on synthetic test shapes.
    Attack {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "fgsm")]
        kind: AttackChoice,
        #[arg(long, default_value_t = 0.03)]
        eps: f64,
        #[arg(long, default_value_t = 0.0075)]
        alpha: f64,
        #[arg(long, default_value_t = 10)]
        steps: usize,
        #[arg(long, default_value_t = 500)]
        test_size: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Finite-difference gradient check of a layer or toy model.
    Gradcheck {
        #[arg(long)]
        target: String,
        #[command(flatten)]
        wavelet: WaveletArgs,
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
        #[arg(long)]
        seed: u64,
    },
    /// Closed-form multiply-add counts of one 2D DWT/IDWT.
    Madd {
        #[arg(long = "M")]
        m: u64,
        #[arg(long = "N")]
        n: u64,
        #[arg(long = "C", default_value_t = 1)]
        c: u64,
    },
    /// Check every registered wavelet for perfect reconstruction.
    ValidateWavelets {
        #[arg(long)]
        json: bool,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum DownsampleMode {
    Maxpool,
    Avgpool,
    Stride,
    #[value(name = "dwt_ll")]
    DwtLl,
    #[value(name = "dwt_avg")]
    DwtAvg,
    #[value(name = "dwt_concat")]
    DwtConcat,
}

impl From<DownsampleMode> for DownsampleKind {
    fn from(m: DownsampleMode) -> Self {
        match m {
            DownsampleMode::Maxpool => Self::MaxPool2,
            DownsampleMode::Avgpool => Self::AvgPool2,
            DownsampleMode::Stride => Self::StridedConv2,
            DownsampleMode::DwtLl => Self::DwtLl,
            DownsampleMode::DwtAvg => Self::DwtAvg,
            DownsampleMode::DwtConcat => Self::DwtConcat,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum NoiseType {
    Gaussian,
    Shot,
    Impulse,
}

impl From<NoiseType> for CorruptionKind {
    fn from(t: NoiseType) -> Self {
        match t {
            NoiseType::Gaussian => Self::Gaussian,
            NoiseType::Shot => Self::Shot,
            NoiseType::Impulse => Self::Impulse,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Arch {
    Baseline,
    Wave,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum AttackChoice {
    Fgsm,
    Pgd,
}

/// Parses `argv` (including the program name) and runs the subcommand,
/// writing normal output to stdout and diagnostics to stderr.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_cli_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// [`run_cli`] with explicit output streams.
pub fn run_cli_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 { write!(out, "{rendered}") } else { write!(err, "{rendered}") };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn registry(path: &Option<PathBuf>) -> Result<Registry> {
    let mut reg = Registry::new();
    if let Some(p) = path {
        reg.load_file(p)?;
    }
    Ok(reg)
}

fn to_batch(img: &Tensor) -> Result<Tensor> {
    let s = img.shape();
    img.clone().reshape(&[1, s[0], s[1], s[2]])
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

/// Affine map of `t` onto `[0, 1]`; returns the image and `(min, max)`.
fn display_rescale(t: &Tensor) -> (Tensor, f64, f64) {
    let (lo, hi) = t.data().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = hi - lo;
    let img = if span > 0.0 { t.map(|v| (v - lo) / span) } else { Tensor::filled(t.shape(), 0.5) };
    (img, lo, hi)
}

fn image_ext(channels: usize) -> &'static str {
    if channels == 3 {
        "ppm"
    } else {
        "pgm"
    }
}

fn strip_batch(t: &Tensor) -> Result<Tensor> {
    t.clone().reshape(&t.shape()[1..])
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let reg = registry(&cli.wavelet_file)?;
    match cli.command {
        Command::Decompose { input, wavelet, out_dir } => {
            let spec = reg.get(&wavelet.wavelet)?;
            let img = read_image(&input)?;
            let bands = dwt2d(&to_batch(&img)?, &spec, wavelet.boundary)?;
            fs::create_dir_all(&out_dir)?;
            let mut records = Vec::new();
            let mut display = BTreeMap::new();
            for (name, band) in ["ll", "lh", "hl", "hh"].iter().zip(bands.as_array()) {
                let raw = strip_batch(band)?;
                let (shown, lo, hi) = display_rescale(&raw);
                write_image(out_dir.join(format!("{name}.{}", image_ext(img.shape()[0]))), &shown)?;
                display.insert(*name, json!({ "min": lo, "max": hi }));
                records.push((name.to_string(), raw));
            }
            write_tensors(out_dir.join("bands.wtns"), &records, Dtype::F64)?;
            write_json(
                &out_dir.join("bands.json"),
                &json!({
                    "schema_version": SCHEMA_VERSION,
                    "wavelet": spec.name,
                    "boundary": wavelet.boundary,
                    "input_shape": img.shape(),
                    "display": display,
                }),
            )?;
            writeln!(out, "wrote {} bands to {}", records.len(), out_dir.display())?;
        }
        Command::Reconstruct { in_dir, wavelet, out: path } => {
            let spec = reg.get(&wavelet.wavelet)?;
            let records = read_tensors(in_dir.join("bands.wtns"))?;
            let get = |name: &str| -> Result<Tensor> {
                let t = records
                    .iter()
                    .find(|(n, _)| n == name)
                    .map(|(_, t)| t)
                    .ok_or_else(|| Error::BandShapeMismatch(format!("bands.wtns lacks `{name}`")))?;
                to_batch(t)
            };
            let bands = Bands2d { ll: get("ll")?, lh: get("lh")?, hl: get("hl")?, hh: get("hh")? };
            let s = bands.ll.shape().to_vec();
            let size = match fs::read_to_string(in_dir.join("bands.json")) {
                Ok(text) => {
                    let meta: serde_json::Value = serde_json::from_str(&text)?;
                    let dim = |i: usize| meta["input_shape"][i].as_u64().map(|v| v as usize);
                    match (dim(1), dim(2)) {
                        (Some(h), Some(w)) => (h, w),
                        _ => (2 * s[2], 2 * s[3]),
                    }
                }
                Err(_) => (2 * s[2], 2 * s[3]),
            };
            let x = idwt2d(&bands, &spec, wavelet.boundary, size)?;
            write_image(&path, &strip_batch(&x)?)?;
            writeln!(out, "reconstructed {}x{} -> {}", size.0, size.1, path.display())?;
        }
        Command::Denoise { input, out: path, wavelet, lambda, levels } => {
            let spec = reg.get(&wavelet.wavelet)?;
            let img = read_image(&input)?;
            let cfg = DenoiseConfig { wavelet: spec.name.clone(), lambda, levels, boundary: wavelet.boundary };
            let y = crate::netlab::denoise::wavelet_denoise_with(&img, &spec, &cfg)?;
            write_image(&path, &y)?;
            writeln!(out, "denoised {} -> {}", input.display(), path.display())?;
        }
        Command::Downsample { input, mode, wavelet, out: path } => {
            let spec = reg.get(&wavelet.wavelet)?;
            let img = read_image(&input)?;
            let y = strip_batch(&downsample(&to_batch(&img)?, mode.into(), &spec, wavelet.boundary)?)?;
            if path.extension().is_some_and(|e| e == "wtns") {
                write_tensors(&path, &[("output".to_string(), y.clone())], Dtype::F64)?;
            } else {
                let (shown, _, _) = display_rescale(&y);
                write_image(&path, &shown)?;
            }
            writeln!(out, "{:?}: {:?} -> {:?}, max |value| {:.6}", mode, img.shape(), y.shape(), y.max_abs())?;
        }
        Command::Corrupt { input, out: path, kind, severity, seed } => {
            let img = read_image(&input)?;
            let y = robustness::corrupt(&img, &CorruptionSpec { kind: kind.into(), severity, seed })?;
            write_image(&path, &y)?;
            writeln!(out, "{:?} severity {severity} -> {}", kind, path.display())?;
        }
        Command::Train {
            arch,
            wavelet,
            downsample,
            boundary,
            epochs,
            batch_size,
            lr,
            train_size,
            seed,
            out: path,
            report,
        } => {
            let mut config = match arch {
                Arch::Baseline => ModelConfig::baseline(downsample.map_or(DownsampleKind::MaxPool2, Into::into), seed),
                Arch::Wave => ModelConfig::wave(downsample.map_or(DownsampleKind::DwtLl, Into::into), &wavelet, seed),
            };
            config.boundary = boundary;
            let spec = reg.get(&config.wavelet)?;
            let mut model = Model::with_wavelet(config, spec)?;
            let data = synth_shapes(train_size, seed);
            let cfg = TrainConfig { epochs, batch_size, lr, seed, ..Default::default() };
            let rep = train(&mut model, &data, &cfg)?;
            model.save(&path)?;
            for e in &rep.epochs {
                writeln!(out, "epoch {:>2}  lr {:.4}  loss {:.6}  acc {:.2}%", e.epoch, e.lr, e.loss, e.accuracy)?;
            }
            if let Some(r) = report {
                write_json(&r, &json!({ "schema_version": SCHEMA_VERSION, "train": cfg, "report": rep }))?;
            }
        }
        Command::Eval { model, baseline, test_size, seed, report } => {
            let m = load_model(&reg, &model)?;
            let data = synth_shapes(test_size, seed + TEST_SEED_OFFSET);
            let clean = evaluate(&m, &data)?;
            writeln!(out, "accuracy {:.2}% on {} samples", clean.accuracy, clean.samples)?;
            let robust = match baseline {
                Some(b) => {
                    let base = load_model(&reg, &b)?;
                    let r = robustness::robustness_report(
                        (&model.display().to_string(), &m),
                        (&b.display().to_string(), &base),
                        &data,
                        &SeverityTable::default(),
                        seed,
                    )?;
                    for (k, v) in &r.ce {
                        writeln!(out, "CE {k}: {v:.2}")?;
                    }
                    writeln!(out, "mCE_noise: {:.2}", r.mce_noise)?;
                    Some(r)
                }
                None => None,
            };
            if let Some(p) = report {
                write_json(
                    &p,
                    &json!({ "schema_version": SCHEMA_VERSION, "data_seed": seed + TEST_SEED_OFFSET, "clean": clean, "robustness": robust }),
                )?;
            }
        }
        Command::Attack { model, kind, eps, alpha, steps, test_size, seed, report } => {
            let m = load_model(&reg, &model)?;
            let data = synth_shapes(test_size, seed + TEST_SEED_OFFSET);
            let cfg = match kind {
                AttackChoice::Fgsm => AttackConfig::fgsm(eps),
                AttackChoice::Pgd => AttackConfig::pgd(eps, alpha, steps, seed),
            };
            let (x, y) = (&data.images, &data.labels);
            let adv = attack(&m, x, y, &cfg)?;
            let classes = m.config().classes;
            let clean = crate::netlab::train::score(&m.predict(x)?, y, classes);
            let attacked = crate::netlab::train::score(&m.predict(&adv)?, y, classes);
            let linf = adv.max_abs_diff(x);
            writeln!(
                out,
                "{}: accuracy {:.2}% -> {:.2}%, max |delta| {linf:.6}",
                if cfg.kind == AttackKind::Fgsm { "fgsm" } else { "pgd" },
                clean.accuracy,
                attacked.accuracy
            )?;
            if let Some(p) = report {
                write_json(
                    &p,
                    &json!({
                        "schema_version": SCHEMA_VERSION,
                        "attack": cfg,
                        "clean_accuracy": clean.accuracy,
                        "adversarial_accuracy": attacked.accuracy,
                        "clean_loss": m.loss(x, y)?,
                        "adversarial_loss": m.loss(&adv, y)?,
                        "max_linf": linf,
                    }),
                )?;
            }
        }
        Command::Gradcheck { target, wavelet, step, seed } => {
            if !TARGETS.contains(&target.as_str()) {
                return Err(Error::InvalidConfig(format!("unknown target `{target}`; one of {}", TARGETS.join(", "))));
            }
            let spec = reg.get(&wavelet.wavelet)?;
            let cfg = GradCheckConfig { step, seed, ..Default::default() };
            let rep = check_target(&target, &spec, wavelet.boundary, seed, &cfg)?;
            writeln!(out, "{}", serde_json::to_string_pretty(&rep)?)?;
        }
        Command::Madd { m, n, c } => {
            writeln!(out, "dwt2d: {}\nidwt2d: {}", madd_dwt2d(m, n, c)?, madd_idwt2d(m, n, c)?)?;
        }
        Command::ValidateWavelets { json } => {
            let reports: Vec<_> =
                reg.names().iter().map(|n| reg.get(n).map(|s| validate_spec(&s))).collect::<Result<_>>()?;
            if json {
                writeln!(out, "{}", serde_json::to_string_pretty(&reports)?)?;
            } else {
                for r in &reports {
                    let worst = r.checks.iter().map(|c| c.residual).fold(0.0, f64::max);
                    writeln!(
                        out,
                        "{:<8} {}  max residual {worst:.3e}",
                        r.wavelet,
                        if r.pass { "PASS" } else { "FAIL" }
                    )?;
                }
            }
            if let Some(bad) = reports.iter().find(|r| !r.pass) {
                return Err(Error::InvalidConfig(format!("wavelet `{}` failed validation", bad.wavelet)));
            }
        }
    }
    Ok(())
}

fn load_model(reg: &Registry, path: &Path) -> Result<Model> {
    let config = Model::read_config(path)?;
    let spec: WaveletSpec = reg.get(&config.wavelet)?;
    Model::load_with_wavelet(path, config, spec)
}
