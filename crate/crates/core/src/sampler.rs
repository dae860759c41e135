//! Decomposition/reconstruction sampler with extrapolation, stochasticity
//! and an optional second-order corrector.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::estimator::Mlp;
use crate::prediction::{decompose, predict_x};
use crate::timedist::{build_schedule, KumaParams, TimeWarp};
use crate::transport::Transport;

/// Anything that maps `(x_t, t, c)` to a network output `F`.
pub trait Estimator: Sync {
    fn dim(&self) -> usize;
    fn evaluate(&self, x_t: &[f64], t: f64, cond: Option<usize>) -> Result<Vec<f64>>;
}

impl Estimator for Mlp {
    fn dim(&self) -> usize {
        Mlp::dim(self)
    }

    fn evaluate(&self, x_t: &[f64], t: f64, cond: Option<usize>) -> Result<Vec<f64>> {
        self.forward(x_t, t, cond)
    }
}

impl<E: Estimator + ?Sized> Estimator for &E {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn evaluate(&self, x_t: &[f64], t: f64, cond: Option<usize>) -> Result<Vec<f64>> {
        (**self).evaluate(x_t, t, cond)
    }
}

/// How much fresh noise is injected at each reconstruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhoPolicy {
    Constant(f64),
    /// `clip(|t_i - t_{i+1}| 2 alpha(t_i) / alpha(t_{i+1}), 0, 1)`.
    Sde,
    /// `clip(2 |t_i - t_{i+1}| alpha(t_i) / alpha(t_{i+1})^2, 0, 1)`.
    SdeSquared,
    /// `rho = lambda`, the consistency ratio used in training.
    EqualLambda(f64),
}

impl RhoPolicy {
    pub fn rho(&self, transport: Transport, t_i: f64, t_next: f64) -> Result<f64> {
        match *self {
            RhoPolicy::Constant(r) | RhoPolicy::EqualLambda(r) => Ok(r),
            RhoPolicy::Sde => rho_sde(t_i, t_next, transport),
            RhoPolicy::SdeSquared => rho_sde_squared(t_i, t_next, transport),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            RhoPolicy::Constant(r) | RhoPolicy::EqualLambda(r) if !(0.0..=1.0).contains(&r) => {
                Err(invalid(format!("rho must lie in [0, 1], got {r}")))
            }
            _ => Ok(()),
        }
    }
}

impl RhoPolicy {
    /// Parses `lambda`, `lambda(<v>)`, `sde`, `sde-squared` or a number;
    /// bare `lambda` takes the given consistency ratio.
    pub fn parse(s: &str, lambda: f64) -> Result<Self> {
        let s = s.trim();
        match s.to_ascii_lowercase().as_str() {
            "lambda" => return Ok(RhoPolicy::EqualLambda(lambda)),
            "sde" => return Ok(RhoPolicy::Sde),
            "sde-squared" => return Ok(RhoPolicy::SdeSquared),
            _ => {}
        }
        let rho = if let Some(inner) = s.strip_prefix("lambda(").and_then(|r| r.strip_suffix(')')) {
            inner.trim().parse::<f64>().map(RhoPolicy::EqualLambda)
        } else {
            s.parse::<f64>().map(RhoPolicy::Constant)
        }
        .map_err(|_| invalid(format!("unknown rho policy '{s}'")))?;
        rho.validate()?;
        Ok(rho)
    }
}

impl fmt::Display for RhoPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RhoPolicy::Constant(r) => write!(f, "{r}"),
            RhoPolicy::Sde => f.write_str("sde"),
            RhoPolicy::SdeSquared => f.write_str("sde-squared"),
            RhoPolicy::EqualLambda(l) => write!(f, "lambda({l})"),
        }
    }
}

/// `clip(|t_i - t_{i+1}| 2 alpha(t_i) / alpha(t_{i+1}), 0, 1)`; 0 when `alpha(t_{i+1}) = 0`.
pub fn rho_sde(t_i: f64, t_next: f64, transport: Transport) -> Result<f64> {
    let a = transport.coefficients(t_i)?.alpha;
    let a_next = transport.coefficients(t_next)?.alpha;
    if a_next == 0.0 {
        return Ok(0.0);
    }
    Ok(((t_i - t_next).abs() * 2.0 * a / a_next).clamp(0.0, 1.0))
}

/// `clip(2 |t_i - t_{i+1}| alpha(t_i) / alpha(t_{i+1})^2, 0, 1)`; 0 when `alpha(t_{i+1}) = 0`.
pub fn rho_sde_squared(t_i: f64, t_next: f64, transport: Transport) -> Result<f64> {
    let a = transport.coefficients(t_i)?.alpha;
    let a_next = transport.coefficients(t_next)?.alpha;
    if a_next == 0.0 {
        return Ok(0.0);
    }
    Ok((2.0 * (t_i - t_next).abs() * a / (a_next * a_next)).clamp(0.0, 1.0))
}

/// Time schedule of the sampler.
#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleSpec {
    Uniform,
    Kumaraswamy(KumaParams),
    /// Evaluation times starting at 1; the first `N` are used and 0 is appended.
    Explicit(Vec<f64>),
}

impl ScheduleSpec {
    /// `steps + 1` decreasing times from 1 to 0.
    pub fn times(&self, steps: usize) -> Result<Vec<f64>> {
        match self {
            ScheduleSpec::Uniform => build_schedule(steps, TimeWarp::Identity),
            ScheduleSpec::Kumaraswamy(p) => build_schedule(steps, TimeWarp::Kumaraswamy(*p)),
            ScheduleSpec::Explicit(points) => {
                if steps == 0 {
                    return Err(invalid("schedule needs at least one step"));
                }
                let mut pts: Vec<f64> = points.clone();
                if pts.last() == Some(&0.0) {
                    pts.pop();
                }
                if pts.len() < steps {
                    return Err(invalid(format!(
                        "explicit schedule has {} evaluation times, {steps} needed",
                        pts.len()
                    )));
                }
                pts.truncate(steps);
                pts.push(0.0);
                if pts[0] != 1.0 {
                    return Err(invalid("explicit schedule must start at 1"));
                }
                if pts.windows(2).any(|w| w[1] >= w[0]) || pts.iter().any(|t| !(0.0..=1.0).contains(t)) {
                    return Err(invalid(format!("explicit schedule {points:?} is not strictly decreasing in [0, 1]")));
                }
                Ok(pts)
            }
        }
    }
}

impl FromStr for ScheduleSpec {
    type Err = Error;

    /// `uniform`, `kuma:a,b,c` or `points:1,0.5`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("uniform") {
            return Ok(ScheduleSpec::Uniform);
        }
        let parse_list = |body: &str| -> Result<Vec<f64>> {
            body.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| invalid(format!("bad number '{v}' in schedule"))))
                .collect()
        };
        if let Some(body) = s.strip_prefix("kuma:") {
            let v = parse_list(body)?;
            if v.len() != 3 {
                return Err(invalid("kuma schedule needs three parameters a,b,c"));
            }
            return Ok(ScheduleSpec::Kumaraswamy(KumaParams::new(v[0], v[1], v[2])?));
        }
        if let Some(body) = s.strip_prefix("points:") {
            return Ok(ScheduleSpec::Explicit(parse_list(body)?));
        }
        Err(invalid(format!("unknown schedule '{s}'")))
    }
}

impl fmt::Display for ScheduleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleSpec::Uniform => f.write_str("uniform"),
            ScheduleSpec::Kumaraswamy(p) => write!(f, "kuma:{},{},{}", p.a, p.b, p.c),
            ScheduleSpec::Explicit(v) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "points:{}", parts.join(","))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    /// Requested evaluation budget `N`.
    pub steps: usize,
    /// 1 or 2.
    pub order: u8,
    pub kappa: f64,
    pub rho: RhoPolicy,
    pub schedule: ScheduleSpec,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { steps: 64, order: 1, kappa: 0.4, rho: RhoPolicy::EqualLambda(0.0), schedule: ScheduleSpec::Uniform }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(invalid("sampler needs at least one step"));
        }
        if self.order != 1 && self.order != 2 {
            return Err(invalid(format!("order must be 1 or 2, got {}", self.order)));
        }
        if !(0.0..=1.0).contains(&self.kappa) {
            return Err(invalid(format!("kappa must lie in [0, 1], got {}", self.kappa)));
        }
        self.rho.validate()
    }

    /// Steps actually executed: `floor((N + 1) / 2)` for the second-order sampler.
    pub fn effective_steps(&self) -> usize {
        if self.order == 2 {
            (self.steps + 1) / 2
        } else {
            self.steps
        }
    }

    pub fn times(&self) -> Result<Vec<f64>> {
        self.schedule.times(self.effective_steps())
    }
}

/// Output of one sampling chain.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingTrace {
    pub sample: Vec<f64>,
    /// Clean estimate `x_hat_i` of every executed step.
    pub history: Vec<Vec<f64>>,
    /// `t_i` of every executed step.
    pub times: Vec<f64>,
    pub evaluations: usize,
}

/// Runs one chain. The same estimator serves the predictor and the corrector.
pub fn sample<E: Estimator, R: Rng + ?Sized>(
    estimator: &E,
    config: &SamplerConfig,
    init: &[f64],
    cond: Option<usize>,
    transport: Transport,
    rng: &mut R,
) -> Result<SamplingTrace> {
    sample_with(estimator, estimator, config, init, cond, transport, rng)
}

/// Runs one chain with `shadow` (EMA) weights for the main evaluations and
/// `live` weights for the second-order correction.
pub fn sample_with<E: Estimator, L: Estimator, R: Rng + ?Sized>(
    shadow: &E,
    live: &L,
    config: &SamplerConfig,
    init: &[f64],
    cond: Option<usize>,
    transport: Transport,
    rng: &mut R,
) -> Result<SamplingTrace> {
    config.validate()?;
    let d = shadow.dim();
    if init.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: init.len() });
    }
    if live.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: live.dim() });
    }
    let times = config.times()?;
    let n = times.len() - 1;
    let kappa = config.kappa;

    let mut x = init.to_vec();
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut history = Vec::with_capacity(n);
    let mut evaluations = 0;
    for i in 0..n {
        let (t, t_next) = (times[i], times[i + 1]);
        let c = transport.coefficients(t)?;
        let c_next = transport.coefficients(t_next)?;
        let f = shadow.evaluate(&x, t, cond)?;
        evaluations += 1;
        let (x_hat_i, z_hat_i) = decompose(&f, &x, &c)?;
        let (x_hat, z_hat) = match &prev {
            Some((px, pz)) => (extrapolate(&x_hat_i, px, kappa), extrapolate(&z_hat_i, pz, kappa)),
            None => (x_hat_i.clone(), z_hat_i.clone()),
        };
        let rho = if t_next == 0.0 { 0.0 } else { config.rho.rho(transport, t, t_next)? };
        let (keep, fresh) = ((1.0 - rho).sqrt(), rho.sqrt());
        let mut x_next: Vec<f64> = (0..d)
            .map(|k| {
                let noise = if rho > 0.0 { rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
                c_next.alpha * (keep * z_hat[k] + fresh * noise) + c_next.gamma * x_hat[k]
            })
            .collect();
        if config.order == 2 && i + 1 < n {
            let f2 = live.evaluate(&x_next, t_next, cond)?;
            evaluations += 1;
            let x_hat2 = predict_x(&f2, &x_next, &c_next)?;
            if c.alpha == 0.0 {
                return Err(Error::SingularCoefficients { t, denom: c.alpha });
            }
            let ratio = c_next.alpha / c.alpha;
            let mix = c_next.gamma - ratio * c.gamma;
            for k in 0..d {
                x_next[k] = x[k] * ratio + mix * 0.5 * (x_hat[k] + x_hat2[k]);
            }
        }
        if x_next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("sampler state at t = {t_next}")));
        }
        history.push(x_hat_i.clone());
        prev = Some((x_hat_i, z_hat_i));
        x = x_next;
    }
    Ok(SamplingTrace { sample: x, history, times: times[..n].to_vec(), evaluations })
}

fn extrapolate(cur: &[f64], prev: &[f64], kappa: f64) -> Vec<f64> {
    cur.iter().zip(prev).map(|(c, p)| c + kappa * (c - p)).collect()
}

/// Draws `count` samples, chain `k` using its own ChaCha stream of `seed`.
pub fn sample_many<E: Estimator, L: Estimator>(
    shadow: &E,
    live: &L,
    config: &SamplerConfig,
    transport: Transport,
    count: usize,
    cond: Option<usize>,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let d = shadow.dim();
    (0..count)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let init: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            sample_with(shadow, live, config, &init, cond, transport, &mut rng).map(|tr| tr.sample)
        })
        .collect()
}

/// Explicit Euler along a decreasing schedule.
pub fn euler_reference<F: Fn(&[f64], f64) -> Vec<f64>>(drift: F, init: &[f64], schedule: &[f64]) -> Vec<f64> {
    let mut x = init.to_vec();
    for w in schedule.windows(2) {
        let v = drift(&x, w[0]);
        let h = w[1] - w[0];
        for (xi, vi) in x.iter_mut().zip(&v) {
            *xi += h * vi;
        }
    }
    x
}
