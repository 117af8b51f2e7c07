//! Command-line front end. `run` returns the process exit code so the binary
//! stays a one-liner and tests can drive commands in-process.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::RunConfig;
use crate::dataset::Dataset;
use crate::labelbank::NoisyLabel;
use crate::losses::{self, LossVariant};
use crate::noise::{self, NoiseKind, NoiseSpec};
use crate::numerics::{finite_diff_grad, softmax, FD_STEP};
use crate::rng::{self, Stream};
use crate::trainer::{self, GradProbe, Phase, PhaseTiming, RunReport, Session};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;
pub const EXIT_VERIFICATION: i32 = 4;

pub const SEED_ENV: &str = "PENCIL_SEED";

pub const REPORT_FILE: &str = "report.json";
pub const CURVE_FILE: &str = "correct_labels.csv";
pub const MODEL_FILE: &str = "model.pmlp";
pub const LABELS_FILE: &str = "labels.pncl";
pub const TIMINGS_FILE: &str = "timings.json";

#[derive(Debug, Parser)]
#[command(name = "pencil", version, about = "Noisy-label learning with trainable label distributions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a Gaussian-blob dataset with clean labels.
    Synth {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        classes: usize,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 5.0)]
        separation: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replace the noisy-label column with synthetic noise applied to the truth.
    Inject {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        kind: String,
        #[arg(long)]
        rate: f64,
        /// `from:to` pairs such as `3:5,5:3`, or `cifar10`.
        #[arg(long)]
        map: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the three-phase pipeline (or a cross-entropy baseline).
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        baseline_ce: bool,
    },
    /// Compare closed-form gradients with finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Fixed class count; cycles through 2..=20 when omitted.
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Record per-epoch label gradients of chosen examples during label learning.
    Gradprobe {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated dataset row indices.
        #[arg(long, value_delimiter = ',', required = true)]
        indices: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize a finished run directory.
    Report {
        #[arg(long)]
        run_dir: PathBuf,
    },
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Divergence(_) => EXIT_DIVERGENCE,
        Error::OracleFailure(_) => EXIT_VERIFICATION,
        _ => EXIT_USAGE,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, env_seed: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.command, env_seed, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Entry point for the binary.
pub fn main_exit_code() -> i32 {
    let env = std::env::var(SEED_ENV).ok();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), env.as_deref(), &mut stdout.lock(), &mut stderr.lock())
}

fn env_seed_value(env: Option<&str>) -> Result<Option<u64>> {
    env.map(|s| {
        s.trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("{SEED_ENV}={s:?} is not an unsigned integer")))
    })
    .transpose()
}

/// Flag beats environment beats `fallback`.
pub fn resolve_seed(flag: Option<u64>, env: Option<&str>, fallback: u64) -> Result<u64> {
    Ok(flag.or(env_seed_value(env)?).unwrap_or(fallback))
}

fn dispatch(cmd: Command, env: Option<&str>, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Synth {
            n,
            classes,
            dim,
            separation,
            seed,
            out: path,
        } => {
            let seed = resolve_seed(seed, env, 0)?;
            let d = noise::make_blobs(n, classes, dim, separation, seed)?;
            d.save(&path)?;
            writeln!(out, "wrote {n} rows, {classes} classes, dim {dim} to {}", path.display())?;
        }
        Command::Inject {
            input,
            kind,
            rate,
            map,
            seed,
            out: path,
        } => {
            let kind = NoiseKind::from_name(&kind).ok_or_else(|| {
                Error::InvalidInput(format!("unknown noise kind {kind:?} (symmetric, asym-circular, asym-map)"))
            })?;
            let pair_map = map.as_deref().map(noise::parse_pair_map).transpose()?;
            let spec = NoiseSpec {
                kind,
                rate,
                pair_map,
                seed: resolve_seed(seed, env, 0)?,
            };
            let d = Dataset::load(&input)?;
            let truth = d
                .true_labels()
                .ok_or_else(|| Error::InvalidInput("input dataset has no true labels".into()))?
                .to_vec();
            let noisy = noise::inject(&truth, d.num_classes(), &spec)?;
            let frac = noise::corruption_fraction(&truth, &noisy);
            d.with_noisy_labels(noisy)?.save(&path)?;
            writeln!(out, "corruption fraction {frac:.4}")?;
        }
        Command::Train {
            data,
            config,
            out_dir,
            baseline_ce,
        } => {
            let cfg = load_config(config.as_deref(), env)?;
            let r = train_to_dir(cfg, &data, &out_dir, baseline_ce)?;
            writeln!(
                out,
                "{} run: last test accuracy {}, best {}",
                r.mode,
                fmt_opt(r.last_test_accuracy),
                fmt_opt(r.best.as_ref().map(|b| b.test_accuracy)),
            )?;
        }
        Command::Gradcheck { trials, classes, seed } => {
            let seed = resolve_seed(seed, env, 0)?;
            return Ok(gradcheck_command(trials, classes, seed, &GradFns::default(), out));
        }
        Command::Gradprobe {
            data,
            config,
            indices,
            out: path,
        } => {
            let cfg = load_config(config.as_deref(), env)?;
            let d = Dataset::load(&data)?;
            let rows = gradprobe(cfg, &d, &indices)?;
            let mut w = csv::Writer::from_path(&path).map_err(csv_io)?;
            for r in &rows {
                w.serialize(r).map_err(csv_io)?;
            }
            w.flush()?;
            writeln!(out, "wrote {} probe rows to {}", rows.len(), path.display())?;
        }
        Command::Report { run_dir } => {
            let table = report_table(&run_dir)?;
            out.write_all(table.as_bytes())?;
        }
    }
    Ok(EXIT_OK)
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidInput(format!("{other:?}")),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

/// Reads the config file (defaults when absent) and applies the seed override.
pub fn load_config(path: Option<&Path>, env: Option<&str>) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::parse(&fs::read_to_string(p)?)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = env_seed_value(env)? {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Trains on the dataset at `data` and writes the run directory.
pub fn train_to_dir(cfg: RunConfig, data: &Path, out_dir: &Path, baseline: bool) -> Result<RunReport> {
    let d = Dataset::load(data)?;
    let outcome = trainer::run(cfg, &d, baseline)?;
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join(REPORT_FILE), outcome.report.to_json())?;
    outcome.net.save(&out_dir.join(MODEL_FILE))?;
    if let Some(bank) = &outcome.bank {
        bank.save(&out_dir.join(LABELS_FILE))?;
        fs::write(out_dir.join(CURVE_FILE), outcome.report.curve_csv())?;
    }
    let timings = serde_json::to_string_pretty(&outcome.timings).expect("timings serialize");
    fs::write(out_dir.join(TIMINGS_FILE), timings + "\n")?;
    Ok(outcome.report)
}

/// Phase 1 then one round of label learning on every row of `data`, recording
/// the label gradient of each example in `indices` once per epoch.
pub fn gradprobe(mut cfg: RunConfig, data: &Dataset, indices: &[usize]) -> Result<Vec<trainer::ProbeRow>> {
    let truth = data
        .true_labels()
        .ok_or_else(|| Error::InvalidInput("gradprobe needs a dataset with true labels".into()))?;
    if indices.is_empty() {
        return Err(Error::InvalidInput("no indices given".into()));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= data.len()) {
        return Err(Error::InvalidInput(format!("index {bad} out of range for {} rows", data.len())));
    }
    cfg.val_fraction = 0.0;
    cfg.test_fraction = 0.0;
    let (mut session, splits) = Session::from_dataset(cfg, data)?;
    let mut probe = GradProbe::new();
    for (pos, &row) in splits.train_indices.iter().enumerate() {
        if indices.contains(&row) {
            probe.watch(pos, row, data.noisy_labels()[row], truth[row]);
        }
    }
    session.set_probe(probe);
    let mut net = session.new_backbone()?;
    session.phase1_backbone(&mut net)?;
    let mut bank = session.new_bank()?;
    session.phase2_pencil(&mut net, &mut bank, 0)?;
    let mut rows = session.take_probe().expect("probe installed").rows;
    // one row per (epoch, example), ordered as the user listed the examples
    rows.sort_by_key(|r| (r.epoch, indices.iter().position(|&i| i == r.example)));
    Ok(rows)
}

pub type LabelGradFn = fn(&[f64], &[f64], NoisyLabel, LossVariant, f64, usize) -> Vec<f64>;
pub type NetGradFn = fn(&[f64], &[f64], LossVariant, f64, usize) -> Vec<f64>;

/// Closed-form gradients under test; swappable so a deliberately broken
/// implementation can be checked to fail.
#[derive(Clone, Copy)]
pub struct GradFns {
    pub label: LabelGradFn,
    pub net: NetGradFn,
}

impl Default for GradFns {
    fn default() -> Self {
        GradFns {
            label: losses::grad_label_logits,
            net: losses::grad_net_logits,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VariantErrors {
    pub label: f64,
    pub net: f64,
    pub zero_sum: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckSummary {
    pub forward: VariantErrors,
    pub inverse: VariantErrors,
    pub failures: Vec<String>,
}

pub const GRAD_TOLERANCE: f64 = 1e-4;
pub const ZERO_SUM_TOLERANCE: f64 = 1e-8;
/// Below this magnitude errors are measured absolutely, so the relative bound
/// becomes an absolute bound of `GRAD_TOLERANCE * NEAR_ZERO`.
const NEAR_ZERO: f64 = 1e-2;

/// Per-example objective `(1/c) L_c + alpha L_o + (beta/c) L_e` written out
/// directly from the logits.
fn objective(z: &[f64], yl: &[f64], label: usize, variant: LossVariant, alpha: f64, beta: f64) -> f64 {
    let c = z.len() as f64;
    let f = softmax(z).expect("finite logits");
    let y = softmax(yl).expect("finite logits");
    let mut lc = 0.0;
    let mut ent = 0.0;
    for j in 0..z.len() {
        lc += match variant {
            LossVariant::KlForward => y[j] * (y[j].ln() - f[j].ln()),
            _ => f[j] * (f[j].ln() - y[j].ln()),
        };
        ent -= f[j] * f[j].ln();
    }
    lc / c - alpha * y[label].ln() + beta / c * ent
}

fn scaled_error(closed: &[f64], numeric: &[f64]) -> f64 {
    closed
        .iter()
        .zip(numeric)
        .map(|(a, b)| (a - b).abs() / b.abs().max(NEAR_ZERO))
        .fold(0.0, f64::max)
}

/// Random-instance gradient verification for both softmax loss variants.
pub fn gradcheck(trials: usize, classes: Option<usize>, seed: u64, fns: &GradFns) -> Result<GradcheckSummary> {
    if trials == 0 {
        return Err(Error::InvalidInput("trials must be at least 1".into()));
    }
    if classes.is_some_and(|c| c < 2) {
        return Err(Error::InvalidInput("classes must be at least 2".into()));
    }
    let mut rng = rng::stream(seed, Stream::Gradcheck);
    let mut summary = GradcheckSummary {
        forward: VariantErrors::default(),
        inverse: VariantErrors::default(),
        failures: Vec::new(),
    };
    for trial in 0..trials {
        let c = classes.unwrap_or(2 + trial % 19);
        let z: Vec<f64> = (0..c).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let yl: Vec<f64> = (0..c).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let label = rng.random_range(0..c);
        let alpha: f64 = rng.random();
        let beta: f64 = rng.random();
        let f = softmax(&z)?;
        let y = softmax(&yl)?;
        for variant in [LossVariant::KlForward, LossVariant::KlInverse] {
            let num_label = finite_diff_grad(|v| objective(&z, v, label, variant, alpha, beta), &yl, FD_STEP)?;
            let num_net = finite_diff_grad(|v| objective(v, &yl, label, variant, alpha, beta), &z, FD_STEP)?;
            let label_err = scaled_error(&(fns.label)(&f, &y, NoisyLabel(label as u32), variant, alpha, c), &num_label);
            let net_err = scaled_error(&(fns.net)(&f, &y, variant, beta, c), &num_net);
            // alpha = 0 and c = 1 leave the bare classification gradient
            let zero_sum = (fns.label)(&f, &y, NoisyLabel(0), variant, 0.0, 1).iter().sum::<f64>().abs();
            let slot = match variant {
                LossVariant::KlForward => &mut summary.forward,
                _ => &mut summary.inverse,
            };
            slot.label = slot.label.max(label_err);
            slot.net = slot.net.max(net_err);
            slot.zero_sum = slot.zero_sum.max(zero_sum);
            let what = [
                ("label gradient", label_err, GRAD_TOLERANCE),
                ("network gradient", net_err, GRAD_TOLERANCE),
                ("zero-sum", zero_sum, ZERO_SUM_TOLERANCE),
            ];
            for (name, e, tol) in what {
                if e.is_nan() || e > tol {
                    summary.failures.push(format!(
                        "trial {trial} ({}, c={c}, label={label}, alpha={alpha:.4}, beta={beta:.4}): {name} error {e:.3e} > {tol:e}",
                        variant.name()
                    ));
                }
            }
        }
    }
    Ok(summary)
}

/// Runs [`gradcheck`], prints the summary and returns the exit code.
pub fn gradcheck_command(trials: usize, classes: Option<usize>, seed: u64, fns: &GradFns, out: &mut dyn Write) -> i32 {
    let s = match gradcheck(trials, classes, seed, fns) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(out, "error: {e}");
            return exit_code(&e);
        }
    };
    let _ = writeln!(out, "{:<12} {:>14} {:>14} {:>14}", "variant", "label_grad", "net_grad", "zero_sum");
    for (name, v) in [("kl_forward", &s.forward), ("kl_inverse", &s.inverse)] {
        let _ = writeln!(out, "{name:<12} {:>14.6e} {:>14.6e} {:>14.6e}", v.label, v.net, v.zero_sum);
    }
    if s.failures.is_empty() {
        let _ = writeln!(out, "ok: {trials} trials");
        EXIT_OK
    } else {
        for f in &s.failures {
            let _ = writeln!(out, "FAIL {f}");
        }
        EXIT_VERIFICATION
    }
}

/// Loads `report.json` from a run directory.
pub fn load_report(run_dir: &Path) -> Result<RunReport> {
    let path = run_dir.join(REPORT_FILE);
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        Error::format(
            "report",
            format!("{} line {} column {}: {e}", path.display(), e.line(), e.column()),
        )
    })
}

/// Fixed-format summary of a run directory.
pub fn report_table(run_dir: &Path) -> Result<String> {
    let report = load_report(run_dir)?;
    let timings: Vec<PhaseTiming> = fs::read_to_string(run_dir.join(TIMINGS_FILE))
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok())
        .unwrap_or_default();
    let absent = "absent".to_string();
    let labels = |v: Option<usize>| {
        if report.is_baseline() {
            absent.clone()
        } else {
            v.map_or_else(|| "n/a".to_string(), |n| n.to_string())
        }
    };
    let mut s = String::new();
    let row = |s: &mut String, k: &str, v: String| s.push_str(&format!("{k:<24} {v}\n"));
    row(&mut s, "mode", report.mode.clone());
    row(
        &mut s,
        "best test accuracy",
        match &report.best {
            Some(b) => format!("{:.4} (epoch {}, by {})", b.test_accuracy, b.epoch, b.selected_by),
            None => "n/a".into(),
        },
    );
    row(&mut s, "last test accuracy", fmt_opt(report.last_test_accuracy));
    row(&mut s, "initial correct labels", labels(report.initial_correct_labels));
    row(&mut s, "final correct labels", labels(report.final_correct_labels));
    s.push('\n');
    s.push_str(&format!("{:<10} {:>6} {:>6} {:>10}\n", "phase", "repeat", "epochs", "seconds"));
    let mut groups: Vec<(Phase, usize, usize)> = Vec::new();
    for r in &report.epochs {
        match groups.last_mut() {
            Some((p, rep, n)) if *p == r.phase && *rep == r.repeat => *n += 1,
            _ => groups.push((r.phase, r.repeat, 1)),
        }
    }
    for (i, (phase, repeat, epochs)) in groups.iter().enumerate() {
        let secs = timings
            .get(i)
            .filter(|t| t.phase == *phase && t.repeat == *repeat)
            .map_or_else(|| "-".to_string(), |t| format!("{:.3}", t.seconds));
        s.push_str(&format!("{:<10} {:>6} {:>6} {:>10}\n", phase.name(), repeat, epochs, secs));
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_precedence() {
        assert_eq!(resolve_seed(Some(1), Some("2"), 3).unwrap(), 1);
        assert_eq!(resolve_seed(None, Some("2"), 3).unwrap(), 2);
        assert_eq!(resolve_seed(None, None, 3).unwrap(), 3);
        assert!(resolve_seed(None, Some("x"), 3).is_err());
    }

    #[test]
    fn gradcheck_passes_and_is_reproducible() {
        let a = gradcheck(40, None, 9, &GradFns::default()).unwrap();
        assert!(a.failures.is_empty(), "{:?}", a.failures);
        assert_eq!(a, gradcheck(40, None, 9, &GradFns::default()).unwrap());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Divergence("x".into())), 3);
        assert_eq!(exit_code(&Error::OracleFailure("x".into())), 4);
        assert_eq!(exit_code(&Error::InvalidInput("x".into())), 2);
    }
}
