//! Command-line front end: argument parsing, subcommands, CSV and SVG output.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{RunConfig, SEED_ENV};
use crate::data::{make_dataset, DatasetKind, Standardizer};
use crate::error::{Error, Result};
use crate::estimator::{Activation, Mlp};
use crate::metrics::{energy_distance, wasserstein1_1d};
use crate::oracle::{bimodal_drift, integration_start, pf_ode_drift, pf_ode_endpoints, schedule_quantile_transport, OracleSchedule};
use crate::sampler::{sample_with, RhoPolicy, SamplerConfig, ScheduleSpec};
use crate::timedist::{fit_kuma_to_target, timeshift};
use crate::trainer::{train_with, StepRecord};
use crate::transport::Transport;

#[derive(Debug, Parser)]
#[command(name = "ucgm", version, about = "Unified trainer and sampler for continuous generative models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleMode {
    Integrate,
    Quantile,
    Drift,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    W1,
    Energy,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the coefficient constraints of a transport family on a grid.
    ValidateTransport {
        #[arg(long, default_value = "linear")]
        transport: String,
        #[arg(long, default_value_t = 1024)]
        grid: usize,
    },
    /// Train an estimator from a config file.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Draw samples from trained weights.
    Sample {
        #[arg(long)]
        weights: PathBuf,
        /// Weights for the second-order correction (defaults to `--weights`).
        #[arg(long)]
        live_weights: Option<PathBuf>,
        #[arg(long, default_value = "linear")]
        transport: String,
        #[arg(long, default_value_t = 64)]
        steps: usize,
        #[arg(long, default_value_t = 1)]
        order: u8,
        #[arg(long, default_value_t = 0.4)]
        kappa: f64,
        /// `lambda`, `sde`, `sde-squared` or a number in [0, 1].
        #[arg(long, default_value = "lambda")]
        rho: String,
        /// Consistency ratio used by `--rho lambda`.
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        /// `uniform`, `kuma:a,b,c` or `points:t0,t1,..`.
        #[arg(long, default_value = "uniform")]
        schedule: String,
        #[arg(long, default_value_t = 10_000)]
        n_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Per-step clean estimates of every chain.
        #[arg(long)]
        history: Option<PathBuf>,
        #[arg(long, default_value = "silu")]
        activation: String,
        /// Condition label; unconditional when absent.
        #[arg(long)]
        cond: Option<usize>,
        /// Standardizer CSV written by `train`; samples are mapped back to raw coordinates.
        #[arg(long)]
        standardizer: Option<PathBuf>,
    },
    /// Closed-form ground truth for 1D Gaussian mixtures.
    Oracle {
        #[arg(long, default_value = "bimodal:2,0.3")]
        mixture: String,
        #[arg(long, default_value = "ou:1")]
        schedule: String,
        #[arg(long, value_enum, default_value_t = OracleMode::Quantile)]
        mode: OracleMode,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        /// RK4 steps of `integrate` mode.
        #[arg(long, default_value_t = 2000)]
        steps: usize,
        /// Time of `drift` mode.
        #[arg(long, default_value_t = 0.5)]
        t: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Distance between generated samples and fresh reference draws.
    Eval {
        #[arg(long)]
        generated: PathBuf,
        /// Dataset descriptor, e.g. `bimodal:2,0.3` or `two_moons:0.05`.
        #[arg(long)]
        reference: String,
        #[arg(long, value_enum, default_value_t = Metric::W1)]
        metric: Metric,
        #[arg(long, default_value_t = 100_000)]
        n_reference: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fit a Kumaraswamy warp to a target time warp.
    FitSchedule {
        /// `shift:<s>`.
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 512)]
        grid: usize,
    },
    /// Render samples or trajectories as SVG.
    Plot {
        /// Samples CSV (`sample_index,dim_0,..`) or, with `--trajectory`, a history CSV.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        trajectory: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

/// A failed run: exit code plus a one-line diagnostic.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::InvalidParameter(_) => 1,
            _ => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

fn config_error(msg: impl Into<String>) -> Failure {
    Failure { code: 1, message: msg.into() }
}

fn parse_arg<T: std::str::FromStr<Err = Error>>(flag: &str, value: &str) -> std::result::Result<T, Failure> {
    value.parse::<T>().map_err(|e| config_error(format!("--{flag}: {e}")))
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message.lines().next().unwrap_or(""));
            f.code
        }
    }
}

pub fn run(cli: Cli) -> std::result::Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    match cli.command {
        Command::ValidateTransport { transport, grid } => {
            let families: Vec<Transport> = if transport == "all" {
                Transport::ALL.to_vec()
            } else {
                vec![parse_arg("transport", &transport)?]
            };
            for tr in families {
                let report = tr.validate(grid)?;
                let verdict = if report.all_passed() { "all-pass" } else { "violations" };
                writeln!(out, "# {tr}: {verdict}").map_err(Error::from)?;
                write!(out, "{report}").map_err(Error::from)?;
            }
            Ok(())
        }
        Command::Train { config, output_dir } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(dir) = output_dir {
                cfg.set("output_dir", &dir.display().to_string())?;
            }
            run_train(&cfg, &mut out)
        }
        Command::Sample {
            weights,
            live_weights,
            transport,
            steps,
            order,
            kappa,
            rho,
            lambda,
            schedule,
            n_samples,
            seed,
            out: path,
            history,
            activation,
            cond,
            standardizer,
        } => {
            let transport: Transport = parse_arg("transport", &transport)?;
            let activation: Activation = parse_arg("activation", &activation)?;
            let config = SamplerConfig {
                steps,
                order,
                kappa,
                rho: RhoPolicy::parse(&rho, lambda).map_err(|e| config_error(format!("--rho: {e}")))?,
                schedule: parse_arg::<ScheduleSpec>("schedule", &schedule)?,
            };
            config.validate().map_err(|e| config_error(e.to_string()))?;
            let seed = env_seed().unwrap_or(Ok(seed))?;
            let shadow = Mlp::load(&weights, activation)?;
            let live = match &live_weights {
                Some(p) => Mlp::load(p, activation)?,
                None => shadow.clone(),
            };
            let std = standardizer.as_ref().map(read_standardizer).transpose()?;
            let traces = sample_chains(&shadow, &live, &config, transport, n_samples, cond, seed)?;
            let samples: Vec<Vec<f64>> = traces
                .iter()
                .map(|t| std.as_ref().map_or_else(|| t.sample.clone(), |s| s.inverse(&t.sample)))
                .collect();
            write_samples(&path, &samples)?;
            if let Some(h) = &history {
                write_history(h, &traces, std.as_ref())?;
            }
            let mut meta = RunConfig::new();
            meta.set("version", env!("CARGO_PKG_VERSION"))?;
            meta.set("seed", &seed.to_string())?;
            meta.set("transport", transport.name())?;
            meta.set("trainer.lambda", &lambda.to_string())?;
            meta.set("trainer.activation", &activation.to_string())?;
            meta.set("sampler.steps", &steps.to_string())?;
            meta.set("sampler.order", &order.to_string())?;
            meta.set("sampler.kappa", &kappa.to_string())?;
            meta.set("sampler.rho", &config.rho.to_string())?;
            meta.set("sampler.schedule", &config.schedule.to_string())?;
            meta.set("sampler.n_samples", &n_samples.to_string())?;
            meta.set("sampler.cond", &cond.map_or("none".to_string(), |c| c.to_string()))?;
            write_meta(&path, &meta)?;
            writeln!(out, "samples,{}", samples.len()).map_err(Error::from)?;
            Ok(())
        }
        Command::Oracle { mixture, schedule, mode, n, steps, t, out: path } => {
            let kind: DatasetKind = parse_arg("mixture", &mixture)?;
            let mix = kind.mixture().filter(|m| m.dim() == 1).ok_or_else(|| config_error("--mixture must be a 1D Gaussian mixture"))?;
            let sched: OracleSchedule = parse_arg("schedule", &schedule)?;
            if n == 0 {
                return Err(config_error("--n must be positive"));
            }
            let quantiles: Vec<f64> = (0..n).map(|i| normal_quantile((i as f64 + 0.5) / n as f64)).collect();
            let mut csv = String::new();
            match mode {
                OracleMode::Quantile => {
                    csv.push_str("sample_index,dim_0,x1\n");
                    for (i, &x1) in quantiles.iter().enumerate() {
                        let x0 = schedule_quantile_transport(x1, &mix, sched)?;
                        let _ = writeln!(csv, "{i},{x0},{x1}");
                    }
                }
                OracleMode::Integrate => {
                    let ends = pf_ode_endpoints(&quantiles, &mix, sched, steps)?;
                    csv.push_str("sample_index,dim_0,x1\n");
                    for (i, (x0, x1)) in ends.iter().zip(&quantiles).enumerate() {
                        let _ = writeln!(csv, "{i},{x0},{x1}");
                    }
                }
                OracleMode::Drift => {
                    if !(0.0..=integration_start(sched)).contains(&t) {
                        return Err(config_error(format!("--t must lie in [0, {}]", integration_start(sched))));
                    }
                    csv.push_str("index,t,x,drift\n");
                    for i in 0..n {
                        let x = -4.0 + 8.0 * (i as f64 + 0.5) / n as f64;
                        let d = match (&kind, mix.components()) {
                            (DatasetKind::Bimodal { m, sigma }, 2) => bimodal_drift(x, t, *m, sigma * sigma, sched)?,
                            _ => pf_ode_drift(&[x], t, &mix, sched)?[0],
                        };
                        let _ = writeln!(csv, "{i},{t},{x},{d}");
                    }
                }
            }
            write_file(&path, csv.as_bytes())?;
            let mut meta = RunConfig::new();
            meta.set("version", env!("CARGO_PKG_VERSION"))?;
            meta.set("dataset", &kind.to_string())?;
            meta.set("sampler.n_samples", &n.to_string())?;
            write_meta(&path, &meta)?;
            writeln!(out, "points,{n}").map_err(Error::from)?;
            Ok(())
        }
        Command::Eval { generated, reference, metric, n_reference, seed } => {
            let kind: DatasetKind = parse_arg("reference", &reference)?;
            let gen = read_samples(&generated)?;
            if gen.is_empty() {
                return Err(Failure::from(Error::Format(format!("{} holds no samples", generated.display()))));
            }
            if gen[0].len() != kind.dim() {
                return Err(Failure::from(Error::DimensionMismatch { expected: kind.dim(), got: gen[0].len() }));
            }
            let dim = kind.dim();
            let reference = make_dataset(kind, n_reference, seed)?.raw();
            let value = match metric {
                Metric::W1 => {
                    if dim != 1 {
                        return Err(config_error("w1 needs 1D samples; use --metric energy"));
                    }
                    let a: Vec<f64> = gen.iter().map(|v| v[0]).collect();
                    let b: Vec<f64> = reference.iter().map(|v| v[0]).collect();
                    wasserstein1_1d(&a, &b, seed)?
                }
                Metric::Energy => energy_distance(&gen, &reference, seed)?,
            };
            let name = match metric {
                Metric::W1 => "w1",
                Metric::Energy => "energy",
            };
            writeln!(out, "metric,value,n_generated,n_reference").map_err(Error::from)?;
            writeln!(out, "{name},{value},{},{}", gen.len(), reference.len()).map_err(Error::from)?;
            Ok(())
        }
        Command::FitSchedule { target, grid } => {
            let s: f64 = target
                .strip_prefix("shift:")
                .and_then(|v| v.trim().parse().ok())
                .filter(|s: &f64| *s > 0.0 && s.is_finite())
                .ok_or_else(|| config_error(format!("--target must be shift:<s> with s > 0, got '{target}'")))?;
            let fit = fit_kuma_to_target(|t| timeshift(t, s), grid)?;
            writeln!(out, "a,b,c,error,identity_error").map_err(Error::from)?;
            writeln!(out, "{},{},{},{},{}", fit.params.a, fit.params.b, fit.params.c, fit.error, fit.identity_error)
                .map_err(Error::from)?;
            Ok(())
        }
        Command::Plot { input, trajectory, out: path } => {
            let svg = if trajectory {
                let (dim, chains) = read_history(&input)?;
                trajectory_svg(dim, &chains)?
            } else {
                let samples = read_samples(&input)?;
                samples_svg(&samples)?
            };
            write_file(&path, svg.as_bytes())?;
            Ok(())
        }
    }
}

fn env_seed() -> Option<std::result::Result<u64, Failure>> {
    std::env::var(SEED_ENV)
        .ok()
        .map(|v| v.trim().parse().map_err(|_| config_error(format!("{SEED_ENV} must be an unsigned integer, got '{v}'"))))
}

fn run_train(cfg: &RunConfig, out: &mut impl std::io::Write) -> std::result::Result<(), Failure> {
    let seed = cfg.seed()?;
    let trainer = cfg.trainer(seed)?;
    let sampler = cfg.sampler()?;
    let (kind, size) = cfg.dataset()?;
    let mut dataset = make_dataset(kind, size, seed)?;
    if !cfg.conditional()? {
        dataset = dataset.without_labels();
    }
    let teacher = match cfg.teacher() {
        Some(p) => Some(Mlp::load(&p, trainer.activation)?),
        None => None,
    };
    let dir = cfg.output_dir();
    for sub in ["weights", "samples", "plots", "logs"] {
        fs::create_dir_all(dir.join(sub)).map_err(Error::from)?;
    }
    let mut log = String::from("step,loss,grad_norm,clip_rate\n");
    let outcome = train_with(&trainer, &dataset, teacher.as_ref(), |r: &StepRecord| {
        let _ = writeln!(log, "{},{},{},{}", r.step, r.loss, r.grad_norm, r.clip_rate);
    })?;
    write_file(&dir.join("logs/loss.csv"), log.as_bytes())?;
    outcome.live.save(dir.join("weights/live.ucgm"))?;
    outcome.ema.save(dir.join("weights/ema.ucgm"))?;
    write_standardizer(&dir.join("weights/standardizer.csv"), &dataset.standardizer)?;
    let meta = cfg.resolved_training(&trainer, &sampler)?;
    write_file(&dir.join("run.meta"), meta.to_text().as_bytes())?;
    let last = outcome.log.last().map_or(f64::NAN, |r| r.loss);
    writeln!(out, "steps,{},final_loss,{last}", outcome.log.len()).map_err(Error::from)?;
    Ok(())
}

fn sample_chains(
    shadow: &Mlp,
    live: &Mlp,
    config: &SamplerConfig,
    transport: Transport,
    count: usize,
    cond: Option<usize>,
    seed: u64,
) -> Result<Vec<crate::sampler::SamplingTrace>> {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use rayon::prelude::*;
    let d = shadow.dim();
    (0..count)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let init: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            sample_with(shadow, live, config, &init, cond, transport, &mut rng)
        })
        .collect()
}

/// Inverse standard normal CDF.
fn normal_quantile(p: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::standard().inverse_cdf(p)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn write_meta(primary: &Path, meta: &RunConfig) -> Result<()> {
    let dir = primary.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    write_file(&dir.join("run.meta"), meta.to_text().as_bytes())
}

fn sample_header(d: usize) -> String {
    let cols: Vec<String> = (0..d).map(|k| format!("dim_{k}")).collect();
    format!("sample_index,{}\n", cols.join(","))
}

pub fn write_samples(path: &Path, samples: &[Vec<f64>]) -> Result<()> {
    let d = samples.first().map_or(1, Vec::len);
    let mut csv = sample_header(d);
    for (i, s) in samples.iter().enumerate() {
        let vals: Vec<String> = s.iter().map(f64::to_string).collect();
        let _ = writeln!(csv, "{i},{}", vals.join(","));
    }
    write_file(path, csv.as_bytes())
}

fn parse_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Format(format!("{} is empty", path.display())))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let row: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Format(format!("{} line {}: not numeric", path.display(), n + 2)))?;
        if row.len() != header.len() {
            return Err(Error::Format(format!("{} line {}: expected {} fields", path.display(), n + 2, header.len())));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

/// Reads the `dim_*` columns of a samples CSV.
pub fn read_samples(path: &Path) -> Result<Vec<Vec<f64>>> {
    let (header, rows) = parse_rows(path)?;
    let cols: Vec<usize> = header.iter().enumerate().filter(|(_, h)| h.starts_with("dim_")).map(|(i, _)| i).collect();
    if cols.is_empty() {
        return Err(Error::Format(format!("{} has no dim_ columns", path.display())));
    }
    Ok(rows.into_iter().map(|r| cols.iter().map(|&c| r[c]).collect()).collect())
}

fn write_history(path: &Path, traces: &[crate::sampler::SamplingTrace], std: Option<&Standardizer>) -> Result<()> {
    let d = traces.first().map_or(1, |t| t.sample.len());
    let cols: Vec<String> = (0..d).map(|k| format!("dim_{k}")).collect();
    let mut csv = format!("chain,step,t,{}\n", cols.join(","));
    for (c, tr) in traces.iter().enumerate() {
        for (i, (x, t)) in tr.history.iter().zip(&tr.times).enumerate() {
            let x = std.map_or_else(|| x.clone(), |s| s.inverse(x));
            let vals: Vec<String> = x.iter().map(f64::to_string).collect();
            let _ = writeln!(csv, "{c},{i},{t},{}", vals.join(","));
        }
    }
    write_file(path, csv.as_bytes())
}

type Chain = Vec<(f64, Vec<f64>)>;

/// Reads a history CSV into per-chain `(t, x_hat)` polylines.
fn read_history(path: &Path) -> Result<(usize, Vec<Chain>)> {
    let (header, rows) = parse_rows(path)?;
    if header.len() < 4 || header[0] != "chain" || header[2] != "t" {
        return Err(Error::Format(format!("{} is not a history file", path.display())));
    }
    let d = header.len() - 3;
    let mut chains: Vec<Chain> = Vec::new();
    for r in rows {
        let c = r[0] as usize;
        if chains.len() <= c {
            chains.resize(c + 1, Vec::new());
        }
        chains[c].push((r[2], r[3..].to_vec()));
    }
    Ok((d, chains))
}

fn write_standardizer(path: &Path, s: &Standardizer) -> Result<()> {
    let mut csv = String::from("axis,shift,scale\n");
    for (k, (m, sc)) in s.shift.iter().zip(&s.scale).enumerate() {
        let _ = writeln!(csv, "{k},{m},{sc}");
    }
    write_file(path, csv.as_bytes())
}

fn read_standardizer(path: &PathBuf) -> Result<Standardizer> {
    let (header, rows) = parse_rows(path)?;
    if header != ["axis", "shift", "scale"] || rows.is_empty() {
        return Err(Error::Format(format!("{} is not a standardizer file", path.display())));
    }
    Ok(Standardizer { shift: rows.iter().map(|r| r[1]).collect(), scale: rows.iter().map(|r| r[2]).collect() })
}

const W: f64 = 480.0;
const H: f64 = 360.0;
const PAD: f64 = 40.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn fit(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let span = |v: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
            if lo.is_finite() && hi > lo {
                (lo, hi)
            } else if lo.is_finite() {
                (lo - 1.0, lo + 1.0)
            } else {
                (-1.0, 1.0)
            }
        };
        let (x0, x1) = span(&mut xs.clone());
        let (y0, y1) = span(&mut ys.clone());
        Frame { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        PAD + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * PAD)
    }

    fn py(&self, y: f64) -> f64 {
        H - PAD - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * PAD)
    }
}

fn svg_open(frame: &Frame) -> String {
    let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n");
    let _ = writeln!(s, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<g stroke=\"black\" fill=\"none\"><line x1=\"{PAD}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"/><line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{}\"/></g>",
        H - PAD,
        W - PAD,
        H - PAD,
        H - PAD
    );
    let _ = writeln!(
        s,
        "<g font-size=\"10\" font-family=\"sans-serif\"><text x=\"{PAD}\" y=\"{}\">{:.3}</text><text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.3}</text><text x=\"4\" y=\"{}\">{:.3}</text><text x=\"4\" y=\"{}\">{:.3}</text></g>",
        H - PAD + 14.0,
        frame.x0,
        W - PAD,
        H - PAD + 14.0,
        frame.x1,
        H - PAD,
        frame.y0,
        PAD + 4.0,
        frame.y1
    );
    s
}

/// Histogram for 1D samples, scatter for 2D; axes only when empty.
pub fn samples_svg(samples: &[Vec<f64>]) -> Result<String> {
    let d = samples.first().map_or(1, Vec::len);
    if d == 0 || d > 2 || samples.iter().any(|s| s.len() != d) {
        return Err(Error::Format(format!("plot needs 1D or 2D samples, got dimension {d}")));
    }
    if d == 1 {
        const BINS: usize = 60;
        let xs = samples.iter().map(|s| s[0]);
        let probe = Frame::fit(xs.clone(), std::iter::once(0.0));
        let mut counts = [0usize; BINS];
        for x in xs {
            let b = ((x - probe.x0) / (probe.x1 - probe.x0) * BINS as f64) as usize;
            counts[b.min(BINS - 1)] += 1;
        }
        let top = *counts.iter().max().unwrap_or(&0) as f64;
        let frame = Frame { y0: 0.0, y1: top.max(1.0), ..probe };
        let mut s = svg_open(&frame);
        s.push_str("<g fill=\"steelblue\">\n");
        if !samples.is_empty() {
            let bw = (frame.x1 - frame.x0) / BINS as f64;
            for (b, &c) in counts.iter().enumerate() {
                let (xl, xr) = (frame.px(frame.x0 + b as f64 * bw), frame.px(frame.x0 + (b + 1) as f64 * bw));
                let y = frame.py(c as f64);
                let _ = writeln!(s, "<rect x=\"{xl:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{:.2}\"/>", xr - xl, H - PAD - y);
            }
        }
        s.push_str("</g>\n</svg>\n");
        return Ok(s);
    }
    let frame = Frame::fit(samples.iter().map(|p| p[0]), samples.iter().map(|p| p[1]));
    let mut s = svg_open(&frame);
    s.push_str("<g fill=\"steelblue\" fill-opacity=\"0.5\">\n");
    for p in samples {
        let _ = writeln!(s, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"1.5\"/>", frame.px(p[0]), frame.py(p[1]));
    }
    s.push_str("</g>\n</svg>\n");
    Ok(s)
}

/// One polyline per chain: clean estimate against time in 1D, in the plane in 2D.
pub fn trajectory_svg(dim: usize, chains: &[Chain]) -> Result<String> {
    if dim == 0 || dim > 2 {
        return Err(Error::Format(format!("plot needs 1D or 2D trajectories, got dimension {dim}")));
    }
    let point = |(t, x): &(f64, Vec<f64>)| if dim == 1 { (*t, x[0]) } else { (x[0], x[1]) };
    let pts = chains.iter().flatten().map(point);
    let frame = Frame::fit(pts.clone().map(|p| p.0), pts.map(|p| p.1));
    let mut s = svg_open(&frame);
    s.push_str("<g stroke=\"steelblue\" stroke-opacity=\"0.6\" fill=\"none\">\n");
    for chain in chains {
        let coords: Vec<String> = chain
            .iter()
            .map(point)
            .map(|(a, b)| format!("{:.2},{:.2}", frame.px(a), frame.py(b)))
            .collect();
        let _ = writeln!(s, "<polyline points=\"{}\"/>", coords.join(" "));
    }
    s.push_str("</g>\n</svg>\n");
    Ok(s)
}
