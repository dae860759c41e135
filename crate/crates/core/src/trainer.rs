//! Unified trainer: enhancement, difference targets for any consistency
//! ratio `lambda`, weighted regression loss, AdamW and EMA.

use std::fmt;
use std::str::FromStr;

use num_traits::Float;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::estimator::{Activation, EmaState, ForwardCache, Mlp, MlpConfig};
use crate::prediction::{predict_x, predict_x_scaled, predict_z};
use crate::timedist::BetaParams;
use crate::transport::{Coefficients, Transport};

/// Which weights evaluate the stop-gradient terms of the difference target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TargetNetwork {
    #[default]
    Live,
    Ema,
}

impl FromStr for TargetNetwork {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "live" => Ok(TargetNetwork::Live),
            "ema" => Ok(TargetNetwork::Ema),
            other => Err(invalid(format!("unknown target network '{other}'"))),
        }
    }
}

impl fmt::Display for TargetNetwork {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TargetNetwork::Live => "live",
            TargetNetwork::Ema => "ema",
        })
    }
}

/// Learning-rate shape after warmup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Cosine decay to zero at the final step.
    Cosine,
}

impl FromStr for LrSchedule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "constant" => Ok(LrSchedule::Constant),
            "cosine" => Ok(LrSchedule::Cosine),
            other => Err(invalid(format!("unknown learning-rate schedule '{other}'"))),
        }
    }
}

impl fmt::Display for LrSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LrSchedule::Constant => "constant",
            LrSchedule::Cosine => "cosine",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainerConfig {
    pub lambda: f64,
    pub zeta: f64,
    pub s_threshold: f64,
    pub epsilon: f64,
    pub beta: BetaParams,
    pub transport: Transport,
    pub learning_rate: f64,
    pub lr_schedule: LrSchedule,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub ema_decay: f64,
    /// Ramp the EMA decay up from zero over the first updates.
    pub ema_warmup: bool,
    pub clip_bound: f64,
    pub cond_dropout: f64,
    /// Linear learning-rate warmup; `None` means 500 steps for `lambda = 1` and none otherwise.
    pub warmup_steps: Option<usize>,
    pub target_network: TargetNetwork,
    /// Sampled times are clamped to `[time_floor, 1 - time_floor]`.
    pub time_floor: f64,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            zeta: 0.0,
            s_threshold: 0.75,
            epsilon: 0.005,
            beta: BetaParams::new(1.0, 1.0).expect("valid shapes"),
            transport: Transport::Linear,
            learning_rate: 1e-3,
            lr_schedule: LrSchedule::Constant,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            weight_decay: 0.0,
            batch_size: 256,
            steps: 20_000,
            ema_decay: 0.9999,
            ema_warmup: true,
            clip_bound: 1.0,
            cond_dropout: 0.1,
            warmup_steps: None,
            target_network: TargetNetwork::Live,
            time_floor: 0.004,
            hidden: vec![64; 3],
            activation: Activation::Silu,
            seed: 0,
        }
    }
}

impl TrainerConfig {
    /// Defaults for few-step training: `lambda = 1`, `Beta(0.8, 1.0)` times.
    pub fn few_step() -> Self {
        Self { lambda: 1.0, beta: BetaParams::new(0.8, 1.0).expect("valid shapes"), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: String| if ok { Ok(()) } else { Err(invalid(msg)) };
        check((0.0..=1.0).contains(&self.lambda), format!("lambda must lie in [0, 1], got {}", self.lambda))?;
        check(self.zeta >= 0.0 && self.zeta.is_finite(), format!("zeta must be nonnegative, got {}", self.zeta))?;
        check(self.epsilon > 0.0 && self.epsilon < 0.25, format!("epsilon must lie in (0, 0.25), got {}", self.epsilon))?;
        check(self.clip_bound > 0.0, format!("clip bound must be positive, got {}", self.clip_bound))?;
        check(self.learning_rate > 0.0 && self.learning_rate.is_finite(), format!("bad learning rate {}", self.learning_rate))?;
        check((0.0..1.0).contains(&self.adam_beta1) && (0.0..1.0).contains(&self.adam_beta2), "adam betas must lie in [0, 1)".into())?;
        check(self.weight_decay >= 0.0, "weight decay must be nonnegative".into())?;
        check(self.batch_size > 0, "batch size must be positive".into())?;
        check((0.0..=1.0).contains(&self.ema_decay), format!("EMA decay must lie in [0, 1], got {}", self.ema_decay))?;
        check((0.0..=1.0).contains(&self.cond_dropout), "condition dropout must lie in [0, 1]".into())?;
        check(self.time_floor > 0.0 && self.time_floor < 0.5, format!("time floor must lie in (0, 0.5), got {}", self.time_floor))?;
        check((0.0..=1.0).contains(&self.s_threshold), "s threshold must lie in [0, 1]".into())?;
        check(!self.hidden.is_empty() && self.hidden.iter().all(|&h| h > 0), "hidden widths must be positive".into())
    }

    pub fn warmup(&self) -> usize {
        self.warmup_steps.unwrap_or(if self.lambda == 1.0 { 500 } else { 0 })
    }

    /// Learning rate of the update numbered `step` (0-based).
    pub fn learning_rate_at(&self, step: usize) -> f64 {
        let warmup = self.warmup();
        let ramp = if warmup > 0 { ((step + 1) as f64 / warmup as f64).min(1.0) } else { 1.0 };
        let decay = match self.lr_schedule {
            LrSchedule::Constant => 1.0,
            LrSchedule::Cosine => {
                let span = self.steps.saturating_sub(warmup).max(1) as f64;
                let p = (step.saturating_sub(warmup) as f64 / span).min(1.0);
                0.5 * (1.0 + (std::f64::consts::PI * p).cos())
            }
        };
        self.learning_rate * ramp * decay
    }

    /// Clamps a sampled time into the range where every evaluated time is valid.
    pub fn clamp_time(&self, t: f64) -> f64 {
        let (mut lo, mut hi) = (self.time_floor, 1.0 - self.time_floor);
        if self.lambda == 1.0 {
            lo = lo.max(self.epsilon);
            hi = hi.min(1.0 - self.epsilon);
        }
        t.clamp(lo, hi)
    }
}

/// One minibatch of Algorithm inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingBatch {
    pub x: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    pub t: Vec<f64>,
    pub cond: Vec<Option<usize>>,
}

impl TrainingBatch {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    fn validate(&self) -> Result<()> {
        let n = self.t.len();
        if n == 0 || self.x.len() != n || self.z.len() != n || self.cond.len() != n {
            return Err(invalid("batch fields must be nonempty and of equal length"));
        }
        if self.t.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(invalid("batch times must lie in [0, 1]"));
        }
        Ok(())
    }
}

fn axpby(a: f64, x: &[f64], b: f64, y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(p, q)| a * p + b * q).collect()
}

/// Guided pair from a conditional and an unconditional prediction.
///
/// For `t <= s`: `x* = x + zeta (f^x(F_cond) - f^x(F_uncond))`; for `t > s`:
/// `x* = x + (f^x(F_cond) - x) / 2`. `z*` follows with `f^z`.
#[allow(clippy::too_many_arguments)]
pub fn enhance_pair(
    x: &[f64],
    z: &[f64],
    x_t: &[f64],
    c: &Coefficients,
    f_cond: &[f64],
    f_uncond: &[f64],
    zeta: f64,
    s_threshold: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let xc = predict_x(f_cond, x_t, c)?;
    let zc = predict_z(f_cond, x_t, c)?;
    if c.t > s_threshold {
        return Ok((
            x.iter().zip(&xc).map(|(a, b)| a + 0.5 * (b - a)).collect(),
            z.iter().zip(&zc).map(|(a, b)| a + 0.5 * (b - a)).collect(),
        ));
    }
    let xu = predict_x(f_uncond, x_t, c)?;
    let zu = predict_z(f_uncond, x_t, c)?;
    Ok((
        (0..x.len()).map(|k| x[k] + zeta * (xc[k] - xu[k])).collect(),
        (0..z.len()).map(|k| z[k] + zeta * (zc[k] - zu[k])).collect(),
    ))
}

/// Guided pair from a single teacher prediction (`zeta` in `[0, inf)`).
pub fn enhance_pair_teacher(
    x: &[f64],
    z: &[f64],
    x_t: &[f64],
    c: &Coefficients,
    f_teacher: &[f64],
    zeta: f64,
    s_threshold: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let w = if c.t > s_threshold { 0.5 } else { zeta };
    let xt = predict_x(f_teacher, x_t, c)?;
    let zt = predict_z(f_teacher, x_t, c)?;
    Ok((
        x.iter().zip(&xt).map(|(a, b)| a + w * (b - a)).collect(),
        z.iter().zip(&zt).map(|(a, b)| a + w * (b - a)).collect(),
    ))
}

/// `f^x(F_t, x*_t, t) / (t - lambda t) - f^x(F_lam, x*_{lambda t}, lambda t) / (t - lambda t)`.
///
/// For `lambda = 0` the second clean estimate is replaced by `x_lam_star`,
/// which must then be the guided clean sample `x*`; `f_lam` is ignored.
pub fn delta_fx_multistep(
    f_t: &[f64],
    x_t_star: &[f64],
    c_t: &Coefficients,
    f_lam: &[f64],
    x_lam_star: &[f64],
    c_lam: &Coefficients,
    lambda: f64,
) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(invalid(format!("multistep difference needs lambda in [0, 1), got {lambda}")));
    }
    let span = c_t.t - lambda * c_t.t;
    if !(span > 0.0) {
        return Err(Error::TimeOutOfRange(c_t.t));
    }
    let now = predict_x(f_t, x_t_star, c_t)?;
    let before = if lambda == 0.0 {
        if x_lam_star.len() != now.len() {
            return Err(Error::DimensionMismatch { expected: now.len(), got: x_lam_star.len() });
        }
        x_lam_star.to_vec()
    } else {
        predict_x(f_lam, x_lam_star, c_lam)?
    };
    Ok(now.iter().zip(&before).map(|(a, b)| a / span - b / span).collect())
}

/// `f^x(F_+, x*_{t+eps}, t+eps) / 2eps - f^x(F_-, x*_{t-eps}, t-eps) / 2eps`.
///
/// Each term is scaled before the subtraction, which keeps tiny differences
/// out of the subnormal range in low precision.
pub fn delta_fx_consistency<T: Float>(
    f_plus: &[T],
    x_plus_star: &[T],
    c_plus: &Coefficients,
    f_minus: &[T],
    x_minus_star: &[T],
    c_minus: &Coefficients,
    epsilon: f64,
) -> Result<Vec<T>> {
    let h = 0.5 / epsilon;
    let up = predict_x_scaled(f_plus, x_plus_star, c_plus, h)?;
    let down = predict_x_scaled(f_minus, x_minus_star, c_minus, h)?;
    Ok(up.iter().zip(&down).map(|(&a, &b)| a - b).collect())
}

/// Subtract-then-scale counterpart of [`delta_fx_consistency`], kept for comparison.
pub fn delta_fx_consistency_naive<T: Float>(
    f_plus: &[T],
    x_plus_star: &[T],
    c_plus: &Coefficients,
    f_minus: &[T],
    x_minus_star: &[T],
    c_minus: &Coefficients,
    epsilon: f64,
) -> Result<Vec<T>> {
    let h = T::from(2.0 * epsilon).expect("representable");
    let up = predict_x(f_plus, x_plus_star, c_plus)?;
    let down = predict_x(f_minus, x_minus_star, c_minus)?;
    Ok(up.iter().zip(&down).map(|(&a, &b)| (a - b) / h).collect())
}

pub fn clip(v: &[f64], bound: f64) -> Vec<f64> {
    v.iter().map(|x| x.clamp(-bound, bound)).collect()
}

/// `F_t - 4 alpha / denom * clip(delta, -b, b) / sin(t)`.
pub fn compute_target(f_t: &[f64], delta: &[f64], c: &Coefficients, clip_bound: f64) -> Result<Vec<f64>> {
    if f_t.len() != delta.len() {
        return Err(Error::DimensionMismatch { expected: f_t.len(), got: delta.len() });
    }
    if c.t <= 0.0 {
        return Err(Error::TimeOutOfRange(c.t));
    }
    if c.denom.abs() < crate::prediction::SINGULAR_DENOM {
        return Err(Error::SingularCoefficients { t: c.t, denom: c.denom });
    }
    let k = 4.0 * c.alpha / c.denom / c.t.sin();
    Ok(f_t.iter().zip(clip(delta, clip_bound)).map(|(f, d)| f - k * d).collect())
}

/// `cos(t) ||F - target||^2 / batch` and its adjoint `2 cos(t) (F - target) / batch`.
pub fn loss_and_grad(f_t: &[f64], target: &[f64], t: f64, batch: usize) -> (f64, Vec<f64>) {
    let w = t.cos() / batch as f64;
    let mut loss = 0.0;
    let adj = f_t
        .iter()
        .zip(target)
        .map(|(f, y)| {
            let r = f - y;
            loss += r * r;
            2.0 * w * r
        })
        .collect();
    (w * loss, adj)
}

/// Adaptive-moment optimizer with decoupled weight decay.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamW {
    pub fn new(n: usize, beta1: f64, beta2: f64, weight_decay: f64) -> Self {
        Self { beta1, beta2, eps: 1e-8, weight_decay, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / bc1;
            let vh = self.v[i] / bc2;
            params[i] -= lr * (mh / (vh.sqrt() + self.eps) + self.weight_decay * params[i]);
        }
    }
}

/// Diagnostics of one optimizer step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub loss: f64,
    pub grad_norm: f64,
    /// Fraction of difference entries that hit the clip bound.
    pub clip_rate: f64,
}

/// Live weights, EMA shadow, optimizer and batch RNG of one run.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub live: Mlp,
    pub ema: EmaState,
    pub opt: AdamW,
    pub step: usize,
    rng: ChaCha8Rng,
}

impl TrainState {
    pub fn new(config: &TrainerConfig, dim: usize, classes: usize) -> Result<Self> {
        config.validate()?;
        let mut mc = MlpConfig::new(dim, config.hidden.clone(), classes);
        mc.activation = config.activation;
        let live = Mlp::init(&mc, config.seed)?;
        let ema = EmaState::new(&live, config.ema_decay)?.with_warmup(config.ema_warmup);
        let opt = AdamW::new(live.num_params(), config.adam_beta1, config.adam_beta2, config.weight_decay);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(1);
        Ok(Self { live, ema, opt, step: 0, rng })
    }

    /// Draws a batch: data with condition dropout, fresh noise, Beta times.
    pub fn make_batch(&mut self, dataset: &Dataset, config: &TrainerConfig) -> TrainingBatch {
        let n = config.batch_size;
        let d = dataset.dim();
        let mut batch = TrainingBatch { x: Vec::with_capacity(n), z: Vec::with_capacity(n), t: Vec::with_capacity(n), cond: Vec::with_capacity(n) };
        for _ in 0..n {
            let i = self.rng.random_range(0..dataset.len());
            batch.x.push(dataset.samples[i].clone());
            let label = dataset.labels.as_ref().map(|l| l[i]);
            let keep = label.is_some() && !self.rng.random_bool(config.cond_dropout);
            batch.cond.push(if keep { label } else { None });
            batch.z.push((0..d).map(|_| self.rng.sample(StandardNormal)).collect());
            batch.t.push(config.clamp_time(config.beta.sample(&mut self.rng)));
        }
        batch
    }
}

// Per-example work; returns the loss contribution and clip statistics.
struct Example<'a> {
    config: &'a TrainerConfig,
    live: &'a Mlp,
    target_net: &'a Mlp,
    ema: &'a Mlp,
    teacher: Option<&'a Mlp>,
    batch_len: usize,
}

impl Example<'_> {
    fn run(&self, x: &[f64], z: &[f64], t: f64, cond: Option<usize>, grad: &mut [f64]) -> Result<(f64, usize, usize)> {
        let cfg = self.config;
        let tr = cfg.transport;
        let c = tr.coefficients(t)?;
        let x_t = axpby(c.alpha, z, c.gamma, x);
        let (f_t, cache): (Vec<f64>, ForwardCache) = self.live.forward_cached(&x_t, t, cond)?;

        let (x_star, z_star) = if let Some(teacher) = self.teacher {
            let ft = teacher.forward(&x_t, t, cond)?;
            enhance_pair_teacher(x, z, &x_t, &c, &ft, cfg.zeta, cfg.s_threshold)?
        } else if cfg.zeta > 0.0 && cfg.zeta < 1.0 {
            let fu = self.ema.forward(&x_t, t, None)?;
            enhance_pair(x, z, &x_t, &c, &f_t, &fu, cfg.zeta, cfg.s_threshold)?
        } else {
            (x.to_vec(), z.to_vec())
        };

        let delta = if cfg.lambda < 1.0 {
            let x_t_star = axpby(c.alpha, &z_star, c.gamma, &x_star);
            if cfg.lambda == 0.0 {
                delta_fx_multistep(&f_t, &x_t_star, &c, &[], &x_star, &c, 0.0)?
            } else {
                let lt = cfg.lambda * t;
                let cl = tr.coefficients(lt)?;
                let x_l = axpby(cl.alpha, z, cl.gamma, x);
                let x_l_star = axpby(cl.alpha, &z_star, cl.gamma, &x_star);
                let f_l = self.target_net.forward(&x_l, lt, cond)?;
                delta_fx_multistep(&f_t, &x_t_star, &c, &f_l, &x_l_star, &cl, cfg.lambda)?
            }
        } else {
            let (tp, tm) = (t + cfg.epsilon, t - cfg.epsilon);
            let (cp, cm) = (tr.coefficients(tp)?, tr.coefficients(tm)?);
            let f_p = self.target_net.forward(&axpby(cp.alpha, z, cp.gamma, x), tp, cond)?;
            let f_m = self.target_net.forward(&axpby(cm.alpha, z, cm.gamma, x), tm, cond)?;
            let xp_star = axpby(cp.alpha, &z_star, cp.gamma, &x_star);
            let xm_star = axpby(cm.alpha, &z_star, cm.gamma, &x_star);
            delta_fx_consistency(&f_p, &xp_star, &cp, &f_m, &xm_star, &cm, cfg.epsilon)?
        };
        let clipped = delta.iter().filter(|d| d.abs() > cfg.clip_bound).count();
        let target = compute_target(&f_t, &delta, &c, cfg.clip_bound)?;
        let (loss, adj) = loss_and_grad(&f_t, &target, t, self.batch_len);
        self.live.backward(&cache, &adj, grad)?;
        Ok((loss, clipped, delta.len()))
    }
}

const CHUNK: usize = 32;

/// Loss and parameter gradient of a batch; reduction order is fixed.
pub fn batch_gradient(
    state: &TrainState,
    batch: &TrainingBatch,
    config: &TrainerConfig,
    teacher: Option<&Mlp>,
) -> Result<(f64, Vec<f64>, f64)> {
    batch.validate()?;
    let target_net = match config.target_network {
        TargetNetwork::Live => &state.live,
        TargetNetwork::Ema => state.ema.shadow(),
    };
    let ex = Example { config, live: &state.live, target_net, ema: state.ema.shadow(), teacher, batch_len: batch.len() };
    let np = state.live.num_params();
    let starts: Vec<usize> = (0..batch.len()).step_by(CHUNK).collect();
    let parts: Vec<Result<(f64, Vec<f64>, usize, usize)>> = starts
        .par_iter()
        .map(|&s| {
            let mut g = vec![0.0; np];
            let (mut loss, mut clipped, mut total) = (0.0, 0, 0);
            for i in s..(s + CHUNK).min(batch.len()) {
                let (l, c, n) = ex.run(&batch.x[i], &batch.z[i], batch.t[i], batch.cond[i], &mut g)?;
                loss += l;
                clipped += c;
                total += n;
            }
            Ok((loss, g, clipped, total))
        })
        .collect();
    let mut grad = vec![0.0; np];
    let (mut loss, mut clipped, mut total) = (0.0, 0, 0);
    for p in parts {
        let (l, g, c, n) = p?;
        loss += l;
        clipped += c;
        total += n;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    Ok((loss, grad, clipped as f64 / total.max(1) as f64))
}

/// One full update: gradient, AdamW step with warmup, EMA.
pub fn train_step(state: &mut TrainState, batch: &TrainingBatch, config: &TrainerConfig, teacher: Option<&Mlp>) -> Result<StepRecord> {
    let (loss, grad, clip_rate) = batch_gradient(state, batch, config, teacher)?;
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("loss {loss} at step {}", state.step)));
    }
    let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    let lr = config.learning_rate_at(state.step);
    state.opt.step(state.live.params_mut(), &grad, lr);
    state.ema.update(&state.live)?;
    state.step += 1;
    Ok(StepRecord { step: state.step, loss, grad_norm, clip_rate })
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub live: Mlp,
    pub ema: Mlp,
    pub log: Vec<StepRecord>,
}

/// Runs `config.steps` updates on `dataset`.
pub fn train(config: &TrainerConfig, dataset: &Dataset, teacher: Option<&Mlp>) -> Result<TrainOutcome> {
    train_with(config, dataset, teacher, |_| {})
}

/// As [`train`], calling `observe` after every step.
pub fn train_with<F: FnMut(&StepRecord)>(
    config: &TrainerConfig,
    dataset: &Dataset,
    teacher: Option<&Mlp>,
    mut observe: F,
) -> Result<TrainOutcome> {
    if dataset.is_empty() {
        return Err(invalid("dataset is empty"));
    }
    if let Some(t) = teacher {
        if t.dim() != dataset.dim() {
            return Err(Error::DimensionMismatch { expected: dataset.dim(), got: t.dim() });
        }
    }
    let mut state = TrainState::new(config, dataset.dim(), dataset.classes())?;
    let mut log = Vec::with_capacity(config.steps);
    for _ in 0..config.steps {
        let batch = state.make_batch(dataset, config);
        let rec = train_step(&mut state, &batch, config, teacher)?;
        observe(&rec);
        log.push(rec);
    }
    Ok(TrainOutcome { ema: state.ema.into_shadow(), live: state.live, log })
}
