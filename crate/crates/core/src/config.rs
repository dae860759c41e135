//! Flat `key = value` run configuration with dotted section prefixes.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::DatasetKind;
use crate::error::{Error, Result};
use crate::estimator::Activation;
use crate::sampler::{RhoPolicy, SamplerConfig, ScheduleSpec};
use crate::timedist::BetaParams;
use crate::trainer::{LrSchedule, TargetNetwork, TrainerConfig};
use crate::transport::Transport;

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "UCGM_SEED";

/// Every accepted key.
pub const KNOWN_KEYS: &[&str] = &[
    "version",
    "seed",
    "output_dir",
    "transport",
    "dataset",
    "dataset.size",
    "dataset.conditional",
    "trainer.lambda",
    "trainer.zeta",
    "trainer.s_threshold",
    "trainer.epsilon",
    "trainer.beta",
    "trainer.learning_rate",
    "trainer.lr_schedule",
    "trainer.adam_beta1",
    "trainer.adam_beta2",
    "trainer.weight_decay",
    "trainer.batch_size",
    "trainer.steps",
    "trainer.ema_decay",
    "trainer.ema_warmup",
    "trainer.clip_bound",
    "trainer.cond_dropout",
    "trainer.warmup_steps",
    "trainer.target_network",
    "trainer.time_floor",
    "trainer.hidden",
    "trainer.activation",
    "trainer.teacher",
    "sampler.steps",
    "sampler.order",
    "sampler.kappa",
    "sampler.rho",
    "sampler.schedule",
    "sampler.n_samples",
    "sampler.cond",
];

pub const DEFAULT_DATASET_SIZE: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RunConfig {
    entries: BTreeMap<String, String>,
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value.trim().parse::<T>().map_err(|e| Error::Config(format!("bad value '{value}' for '{key}': {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: Display,
{
    value.split(',').map(|v| parse_value(key, v)).collect()
}

impl RunConfig {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses config text: one `key = value` per line, `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value', got '{raw}'", n + 1)))?;
            let key = key.trim();
            if cfg.entries.contains_key(key) {
                return Err(Error::Config(format!("line {}: duplicate key '{key}'", n + 1)));
            }
            cfg.set(key, value.trim()).map_err(|e| Error::Config(format!("line {}: {}", n + 1, strip(e))))?;
        }
        Ok(cfg)
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config '{}': {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Sets a key, rejecting unknown names and empty values.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown key '{key}'")));
        }
        if value.is_empty() {
            return Err(Error::Config(format!("empty value for '{key}'")));
        }
        self.entries.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Renders the config in the same text format [`RunConfig::parse`] reads.
    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    fn typed<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        self.get(key).map(|v| parse_value(key, v)).transpose()
    }

    pub fn require(&self, keys: &[&str]) -> Result<()> {
        match keys.iter().find(|k| self.get(k).is_none()) {
            Some(k) => Err(Error::Config(format!("missing required key '{k}'"))),
            None => Ok(()),
        }
    }

    /// The configured seed, overridden by a parseable environment value.
    pub fn seed_with(&self, env: Option<&str>) -> Result<u64> {
        if let Some(v) = env {
            return parse_value(SEED_ENV, v);
        }
        Ok(self.typed("seed")?.unwrap_or(0))
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed_with(std::env::var(SEED_ENV).ok().as_deref())
    }

    pub fn output_dir(&self) -> PathBuf {
        PathBuf::from(self.get("output_dir").unwrap_or("run"))
    }

    pub fn transport(&self) -> Result<Transport> {
        Ok(self.typed("transport")?.unwrap_or(Transport::Linear))
    }

    pub fn dataset(&self) -> Result<(DatasetKind, usize)> {
        self.require(&["dataset"])?;
        let kind = self.typed("dataset")?.expect("checked above");
        let size = self.typed("dataset.size")?.unwrap_or(DEFAULT_DATASET_SIZE);
        Ok((kind, size))
    }

    /// Whether labels are fed to the estimator (default false).
    pub fn conditional(&self) -> Result<bool> {
        Ok(self.typed("dataset.conditional")?.unwrap_or(false))
    }

    pub fn teacher(&self) -> Option<PathBuf> {
        self.get("trainer.teacher").map(PathBuf::from)
    }

    /// Trainer settings; the few-step defaults apply when `lambda = 1`.
    pub fn trainer(&self, seed: u64) -> Result<TrainerConfig> {
        let lambda: f64 = self.typed("trainer.lambda")?.unwrap_or(0.0);
        let mut c = if lambda == 1.0 { TrainerConfig::few_step() } else { TrainerConfig::default() };
        c.lambda = lambda;
        c.seed = seed;
        c.transport = self.transport()?;
        macro_rules! field {
            ($key:literal, $field:ident) => {
                if let Some(v) = self.typed($key)? {
                    c.$field = v;
                }
            };
        }
        field!("trainer.zeta", zeta);
        field!("trainer.s_threshold", s_threshold);
        field!("trainer.epsilon", epsilon);
        field!("trainer.learning_rate", learning_rate);
        field!("trainer.adam_beta1", adam_beta1);
        field!("trainer.adam_beta2", adam_beta2);
        field!("trainer.weight_decay", weight_decay);
        field!("trainer.batch_size", batch_size);
        field!("trainer.steps", steps);
        field!("trainer.ema_decay", ema_decay);
        field!("trainer.ema_warmup", ema_warmup);
        field!("trainer.clip_bound", clip_bound);
        field!("trainer.cond_dropout", cond_dropout);
        field!("trainer.time_floor", time_floor);
        if let Some(v) = self.typed::<LrSchedule>("trainer.lr_schedule")? {
            c.lr_schedule = v;
        }
        if let Some(v) = self.typed::<TargetNetwork>("trainer.target_network")? {
            c.target_network = v;
        }
        if let Some(v) = self.typed::<Activation>("trainer.activation")? {
            c.activation = v;
        }
        if let Some(v) = self.get("trainer.beta") {
            let ab: Vec<f64> = parse_list("trainer.beta", v)?;
            if ab.len() != 2 {
                return Err(Error::Config("'trainer.beta' needs two shapes a,b".into()));
            }
            c.beta = BetaParams::new(ab[0], ab[1]).map_err(|e| Error::Config(strip(e)))?;
        }
        if let Some(v) = self.get("trainer.hidden") {
            c.hidden = parse_list("trainer.hidden", v)?;
        }
        if let Some(v) = self.get("trainer.warmup_steps") {
            c.warmup_steps = if v == "auto" { None } else { Some(parse_value("trainer.warmup_steps", v)?) };
        }
        c.validate().map_err(|e| Error::Config(strip(e)))?;
        Ok(c)
    }

    /// Sampler settings; `rho = lambda` resolves against `trainer.lambda`.
    pub fn sampler(&self) -> Result<SamplerConfig> {
        let mut c = SamplerConfig::default();
        if let Some(v) = self.typed("sampler.steps")? {
            c.steps = v;
        }
        if let Some(v) = self.typed("sampler.order")? {
            c.order = v;
        }
        if let Some(v) = self.typed("sampler.kappa")? {
            c.kappa = v;
        }
        let lambda: f64 = self.typed("trainer.lambda")?.unwrap_or(0.0);
        c.rho = RhoPolicy::parse(self.get("sampler.rho").unwrap_or("lambda"), lambda).map_err(|e| Error::Config(strip(e)))?;
        if let Some(v) = self.typed::<ScheduleSpec>("sampler.schedule")? {
            c.schedule = v;
        }
        c.validate().map_err(|e| Error::Config(strip(e)))?;
        Ok(c)
    }

    pub fn n_samples(&self) -> Result<usize> {
        Ok(self.typed("sampler.n_samples")?.unwrap_or(10_000))
    }

    pub fn sample_cond(&self) -> Result<Option<usize>> {
        match self.get("sampler.cond") {
            None | Some("none") => Ok(None),
            Some(v) => parse_value("sampler.cond", v).map(Some),
        }
    }

    /// Fully resolved config of a training run, suitable for `run.meta`.
    pub fn resolved_training(&self, trainer: &TrainerConfig, sampler: &SamplerConfig) -> Result<Self> {
        let mut out = self.clone();
        let (kind, size) = self.dataset()?;
        let hidden: Vec<String> = trainer.hidden.iter().map(|h| h.to_string()).collect();
        let pairs: Vec<(&str, String)> = vec![
            ("version", env!("CARGO_PKG_VERSION").to_string()),
            ("seed", trainer.seed.to_string()),
            ("output_dir", self.output_dir().display().to_string()),
            ("transport", trainer.transport.to_string()),
            ("dataset", kind.to_string()),
            ("dataset.size", size.to_string()),
            ("dataset.conditional", self.conditional()?.to_string()),
            ("trainer.lambda", trainer.lambda.to_string()),
            ("trainer.zeta", trainer.zeta.to_string()),
            ("trainer.s_threshold", trainer.s_threshold.to_string()),
            ("trainer.epsilon", trainer.epsilon.to_string()),
            ("trainer.beta", format!("{},{}", trainer.beta.theta1(), trainer.beta.theta2())),
            ("trainer.learning_rate", trainer.learning_rate.to_string()),
            ("trainer.lr_schedule", trainer.lr_schedule.to_string()),
            ("trainer.adam_beta1", trainer.adam_beta1.to_string()),
            ("trainer.adam_beta2", trainer.adam_beta2.to_string()),
            ("trainer.weight_decay", trainer.weight_decay.to_string()),
            ("trainer.batch_size", trainer.batch_size.to_string()),
            ("trainer.steps", trainer.steps.to_string()),
            ("trainer.ema_decay", trainer.ema_decay.to_string()),
            ("trainer.ema_warmup", trainer.ema_warmup.to_string()),
            ("trainer.clip_bound", trainer.clip_bound.to_string()),
            ("trainer.cond_dropout", trainer.cond_dropout.to_string()),
            ("trainer.warmup_steps", trainer.warmup().to_string()),
            ("trainer.target_network", trainer.target_network.to_string()),
            ("trainer.time_floor", trainer.time_floor.to_string()),
            ("trainer.hidden", hidden.join(",")),
            ("trainer.activation", trainer.activation.to_string()),
            ("sampler.steps", sampler.steps.to_string()),
            ("sampler.order", sampler.order.to_string()),
            ("sampler.kappa", sampler.kappa.to_string()),
            ("sampler.rho", sampler.rho.to_string()),
            ("sampler.schedule", sampler.schedule.to_string()),
        ];
        for (k, v) in pairs {
            out.set(k, &v)?;
        }
        Ok(out)
    }
}

// Drops the error-kind prefix so messages nest cleanly.
fn strip(e: Error) -> String {
    match e {
        Error::Config(m) | Error::InvalidParameter(m) => m,
        other => other.to_string(),
    }
}
