//! Closed-form ground truth: probability-flow drifts of Gaussian mixtures,
//! analytic trajectories, monotone quantile transport, optimal predictors
//! and a reference RK4 integrator.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use statrs::function::erf::erfc;

use crate::error::{invalid, Error, Result};
use crate::prediction::SINGULAR_DENOM;
use crate::sampler::Estimator;
use crate::transport::Transport;

/// Weighted sum of Gaussians in `R^d`.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    weights: Vec<f64>,
    means: Vec<DVector<f64>>,
    covs: Vec<DMatrix<f64>>,
    chols: Vec<DMatrix<f64>>,
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, covs: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let k = weights.len();
        if k == 0 || means.len() != k || covs.len() != k {
            return Err(invalid("mixture needs matching non-empty weights, means and covariances"));
        }
        if weights.iter().any(|w| !(*w > 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("mixture weights must be positive and sum to 1, got {weights:?}")));
        }
        let d = means[0].len();
        if d == 0 {
            return Err(invalid("mixture dimension must be positive"));
        }
        let mut ms = Vec::with_capacity(k);
        let mut cs = Vec::with_capacity(k);
        let mut ls = Vec::with_capacity(k);
        for (m, c) in means.into_iter().zip(covs) {
            if m.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: m.len() });
            }
            if c.len() != d || c.iter().any(|row| row.len() != d) {
                return Err(invalid("covariance shape does not match the mean"));
            }
            let cov = DMatrix::from_fn(d, d, |i, j| c[i][j]);
            if (&cov - cov.transpose()).amax() > 1e-12 {
                return Err(invalid("covariance is not symmetric"));
            }
            let chol = Cholesky::new(cov.clone()).ok_or_else(|| invalid("covariance is not positive definite"))?;
            ls.push(chol.l());
            ms.push(DVector::from_vec(m));
            cs.push(cov);
        }
        Ok(Self { weights, means: ms, covs: cs, chols: ls })
    }

    /// Equal-weight pair `N(-m, sigma^2)`, `N(m, sigma^2)` on the line.
    pub fn bimodal(m: f64, sigma: f64) -> Result<Self> {
        positive_sigma(sigma)?;
        Self::new(vec![0.5, 0.5], vec![vec![-m], vec![m]], vec![vec![vec![sigma * sigma]]; 2])
    }

    pub fn gaussian_1d(mu: f64, sigma: f64) -> Result<Self> {
        positive_sigma(sigma)?;
        Self::new(vec![1.0], vec![vec![mu]], vec![vec![vec![sigma * sigma]]])
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self, j: usize) -> &[f64] {
        self.means[j].as_slice()
    }

    pub fn cov(&self, j: usize) -> &DMatrix<f64> {
        &self.covs[j]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut j = self.components() - 1;
        for (k, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                j = k;
                break;
            }
        }
        let eps = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        (&self.means[j] + &self.chols[j] * eps).as_slice().to_vec()
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| self.sample(rng)).collect()
    }

    // Per-component statistics of `x_t = alpha z + gamma x`.
    fn noisy(&self, x_t: &[f64], alpha: f64, gamma: f64) -> Result<Vec<NoisyComponent>> {
        let d = self.dim();
        if x_t.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x_t.len() });
        }
        let x = DVector::from_column_slice(x_t);
        let mut out = Vec::with_capacity(self.components());
        for j in 0..self.components() {
            let cov = &self.covs[j] * (gamma * gamma) + DMatrix::identity(d, d) * (alpha * alpha);
            let chol = Cholesky::<f64, Dyn>::new(cov).ok_or_else(|| {
                Error::SingularCoefficients { t: f64::NAN, denom: alpha * alpha }
            })?;
            let resid = &x - &self.means[j] * gamma;
            let solved = chol.solve(&resid);
            let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
            let log_pdf = -0.5 * (resid.dot(&solved) + log_det + d as f64 * (2.0 * PI).ln());
            out.push(NoisyComponent { log_weighted: self.weights[j].ln() + log_pdf, solved });
        }
        Ok(out)
    }

    fn responsibilities(parts: &[NoisyComponent]) -> (Vec<f64>, f64) {
        let max = parts.iter().map(|p| p.log_weighted).fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = parts.iter().map(|p| (p.log_weighted - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        (exps.iter().map(|e| e / total).collect(), max + total.ln())
    }

    /// `log p_t(x_t)` for the noisy marginal.
    pub fn log_density_at(&self, x_t: &[f64], alpha: f64, gamma: f64) -> Result<f64> {
        let parts = self.noisy(x_t, alpha, gamma)?;
        Ok(Self::responsibilities(&parts).1)
    }

    /// `grad log p_t(x_t)` for the noisy marginal.
    pub fn score_at(&self, x_t: &[f64], alpha: f64, gamma: f64) -> Result<Vec<f64>> {
        let parts = self.noisy(x_t, alpha, gamma)?;
        let (r, _) = Self::responsibilities(&parts);
        let mut s = DVector::zeros(self.dim());
        for (rj, p) in r.iter().zip(&parts) {
            s -= &p.solved * *rj;
        }
        Ok(s.as_slice().to_vec())
    }

    /// `(E[x | x_t], E[z | x_t])`, finite at every `(alpha, gamma)` with `alpha > 0`.
    pub fn posterior_means(&self, x_t: &[f64], alpha: f64, gamma: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let parts = self.noisy(x_t, alpha, gamma)?;
        let (r, _) = Self::responsibilities(&parts);
        let d = self.dim();
        let mut ex = DVector::zeros(d);
        let mut ez = DVector::zeros(d);
        for (j, (rj, p)) in r.iter().zip(&parts).enumerate() {
            ex += (&self.means[j] + &self.covs[j] * &p.solved * gamma) * *rj;
            ez += &p.solved * (alpha * rj);
        }
        Ok((ex.as_slice().to_vec(), ez.as_slice().to_vec()))
    }

    /// CDF of a one-dimensional mixture.
    pub fn cdf_1d(&self, x: f64) -> Result<f64> {
        self.require_1d()?;
        Ok(self
            .weights
            .iter()
            .zip(&self.means)
            .zip(&self.covs)
            .map(|((w, m), c)| w * normal_cdf((x - m[0]) / c[(0, 0)].sqrt()))
            .sum())
    }

    fn require_1d(&self) -> Result<()> {
        if self.dim() != 1 {
            return Err(invalid("operation needs a one-dimensional mixture"));
        }
        Ok(())
    }

    /// Same mixture pushed through `x -> gamma x + alpha z`.
    pub fn noised(&self, alpha: f64, gamma: f64) -> Result<Self> {
        let d = self.dim();
        let means = self.means.iter().map(|m| (m * gamma).as_slice().to_vec()).collect();
        let covs = self
            .covs
            .iter()
            .map(|c| {
                let s = c * (gamma * gamma) + DMatrix::identity(d, d) * (alpha * alpha);
                (0..d).map(|i| (0..d).map(|j| s[(i, j)]).collect()).collect()
            })
            .collect();
        Self::new(self.weights.clone(), means, covs)
    }
}

struct NoisyComponent {
    log_weighted: f64,
    /// `(gamma^2 Sigma + alpha^2 I)^{-1} (x_t - gamma m)`.
    solved: DVector<f64>,
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Forward noising schedules with analytic derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleSchedule {
    /// `gamma = exp(-s t)`, `alpha = sqrt(1 - exp(-2 s t))`.
    Ou(f64),
    /// `gamma = cos(pi t / 2)`, `alpha = sin(pi t / 2)`.
    Triangular,
    /// `gamma = 1 - t`, `alpha = t`.
    Linear,
}

impl OracleSchedule {
    pub fn gamma(&self, t: f64) -> f64 {
        match *self {
            OracleSchedule::Ou(s) => (-s * t).exp(),
            OracleSchedule::Triangular => (FRAC_PI_2 * t).cos(),
            OracleSchedule::Linear => 1.0 - t,
        }
    }

    pub fn alpha(&self, t: f64) -> f64 {
        match *self {
            OracleSchedule::Ou(s) => (-(-2.0 * s * t).exp_m1()).sqrt(),
            OracleSchedule::Triangular => (FRAC_PI_2 * t).sin(),
            OracleSchedule::Linear => t,
        }
    }

    pub fn dgamma(&self, t: f64) -> f64 {
        match *self {
            OracleSchedule::Ou(s) => -s * (-s * t).exp(),
            OracleSchedule::Triangular => -FRAC_PI_2 * (FRAC_PI_2 * t).sin(),
            OracleSchedule::Linear => -1.0,
        }
    }

    pub fn dalpha(&self, t: f64) -> f64 {
        match *self {
            OracleSchedule::Ou(s) => s * (-2.0 * s * t).exp() / self.alpha(t),
            OracleSchedule::Triangular => FRAC_PI_2 * (FRAC_PI_2 * t).cos(),
            OracleSchedule::Linear => 1.0,
        }
    }

    /// `alpha alpha' - (gamma' / gamma) alpha^2`, the score coefficient of the drift.
    pub fn bracket(&self, t: f64) -> Result<f64> {
        let g = self.gamma(t);
        if g == 0.0 {
            return Err(Error::SingularCoefficients { t, denom: g });
        }
        match *self {
            // The general expression divides 0 by 0 at t = 0 for OU.
            OracleSchedule::Ou(s) => {
                let a2 = -(-2.0 * s * t).exp_m1();
                Ok(s * (-2.0 * s * t).exp() + s * a2)
            }
            _ => {
                let a = self.alpha(t);
                Ok(a * self.dalpha(t) - self.dgamma(t) / g * a * a)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            OracleSchedule::Ou(s) if !(s > 0.0 && s.is_finite()) => Err(invalid(format!("OU rate must be positive, got {s}"))),
            _ => Ok(()),
        }
    }
}

impl std::str::FromStr for OracleSchedule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let out = match s.as_str() {
            "triangular" => OracleSchedule::Triangular,
            "linear" => OracleSchedule::Linear,
            other => match other.strip_prefix("ou:") {
                Some(rate) => OracleSchedule::Ou(rate.parse().map_err(|_| invalid(format!("bad OU rate '{rate}'")))?),
                None => return Err(invalid(format!("unknown schedule '{other}'"))),
            },
        };
        out.validate()?;
        Ok(out)
    }
}

fn positive_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("standard deviation must be positive, got {sigma}")))
    }
}

/// Score of the noisy mixture marginal at time `t`.
pub fn gmm_marginal_score(x_t: &[f64], t: f64, mixture: &GaussianMixture, schedule: OracleSchedule) -> Result<Vec<f64>> {
    schedule.validate()?;
    mixture.score_at(x_t, schedule.alpha(t), schedule.gamma(t))
}

/// `(gamma'/gamma) x_t - [alpha alpha' - (gamma'/gamma) alpha^2] score`.
pub fn pf_ode_drift(x_t: &[f64], t: f64, mixture: &GaussianMixture, schedule: OracleSchedule) -> Result<Vec<f64>> {
    let b = schedule.bracket(t)?;
    let ratio = schedule.dgamma(t) / schedule.gamma(t);
    let score = gmm_marginal_score(x_t, t, mixture, schedule)?;
    Ok(x_t.iter().zip(&score).map(|(x, s)| ratio * x - b * s).collect())
}

/// Drift of the symmetric two-peak mixture `N(+-m, sigma2)`.
pub fn bimodal_drift(x_t: f64, t: f64, m: f64, sigma2: f64, schedule: OracleSchedule) -> Result<f64> {
    let g = schedule.gamma(t);
    let a = schedule.alpha(t);
    let b = schedule.bracket(t)?;
    let var = g * g * sigma2 + a * a;
    Ok(schedule.dgamma(t) / g * x_t + b / var * (x_t - g * m * (g * m * x_t / var).tanh()))
}

/// `sqrt(x1^2 + 2 s (1 - t))`, the trajectory of `dx/dt = -s / x`.
pub fn hermite_trajectory(x1: f64, s: f64, t: f64) -> Result<f64> {
    if !(x1 > 0.0) || !(s > 0.0) {
        return Err(invalid(format!("hermite trajectory needs x1 > 0 and s > 0, got ({x1}, {s})")));
    }
    Ok((x1 * x1 + 2.0 * s * (1.0 - t)).sqrt())
}

/// Classical RK4 from `t_start` to `t_end` (either direction).
pub fn rk4_integrate<F>(drift: F, init: &[f64], t_start: f64, t_end: f64, steps: usize) -> Result<Vec<f64>>
where
    F: Fn(&[f64], f64) -> Vec<f64>,
{
    if steps == 0 {
        return Err(invalid("rk4 needs at least one step"));
    }
    let h = (t_end - t_start) / steps as f64;
    let mut x = init.to_vec();
    let axpy = |x: &[f64], k: &[f64], c: f64| -> Vec<f64> { x.iter().zip(k).map(|(a, b)| a + c * b).collect() };
    for i in 0..steps {
        // Step ends are computed directly so the last one lands exactly on `t_end`.
        let t = t_start + i as f64 * h;
        let t_next = if i + 1 == steps { t_end } else { t_start + (i + 1) as f64 * h };
        let t_mid = 0.5 * (t + t_next);
        let k1 = drift(&x, t);
        let k2 = drift(&axpy(&x, &k1, 0.5 * h), t_mid);
        let k3 = drift(&axpy(&x, &k2, 0.5 * h), t_mid);
        let k4 = drift(&axpy(&x, &k3, h), t_next);
        for j in 0..x.len() {
            x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("rk4 state at t = {t_next}")));
        }
    }
    Ok(x)
}

/// Start-time offset for schedules whose `gamma(1)` vanishes, where the drift is singular.
pub const TERMINAL_OFFSET: f64 = 1e-4;

/// First time of a backward PF-ODE integration: 1, or `1 - TERMINAL_OFFSET`
/// when `gamma(1)` is (numerically) zero.
pub fn integration_start(schedule: OracleSchedule) -> f64 {
    if schedule.gamma(1.0).abs() < 1e-12 {
        1.0 - TERMINAL_OFFSET
    } else {
        1.0
    }
}

/// Backward RK4 of the mixture PF-ODE from [`integration_start`] to 0, per point.
pub fn pf_ode_endpoints(x1: &[f64], mixture: &GaussianMixture, schedule: OracleSchedule, steps: usize) -> Result<Vec<f64>> {
    mixture.require_1d()?;
    schedule.validate()?;
    if steps == 0 {
        return Err(invalid("rk4 needs at least one step"));
    }
    let start = integration_start(schedule);
    let h = -start / steps as f64;
    // Drift coefficients depend only on time: tabulate them once per RK4 stage.
    let stage = |t: f64| -> Result<StageDrift> {
        let (a, g) = (schedule.alpha(t), schedule.gamma(t));
        let comps = (0..mixture.components())
            .map(|j| {
                let var = g * g * mixture.covs[j][(0, 0)] + a * a;
                (mixture.weights[j].ln() - 0.5 * var.ln(), g * mixture.means[j][0], 1.0 / var)
            })
            .collect();
        Ok(StageDrift { ratio: schedule.dgamma(t) / g, bracket: schedule.bracket(t)?, comps })
    };
    let table = (0..steps)
        .map(|i| {
            let t = start + i as f64 * h;
            let t_next = if i + 1 == steps { 0.0 } else { start + (i + 1) as f64 * h };
            Ok([stage(t)?, stage(0.5 * (t + t_next))?, stage(t_next)?])
        })
        .collect::<Result<Vec<_>>>()?;
    x1.par_iter()
        .map(|&x0| {
            let mut x = x0;
            for [s0, s_mid, s1] in &table {
                let k1 = s0.eval(x);
                let k2 = s_mid.eval(x + 0.5 * h * k1);
                let k3 = s_mid.eval(x + 0.5 * h * k2);
                let k4 = s1.eval(x + h * k3);
                x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            if x.is_finite() { Ok(x) } else { Err(Error::NonFinite(format!("PF-ODE endpoint from {x0}"))) }
        })
        .collect()
}

struct StageDrift {
    ratio: f64,
    bracket: f64,
    /// Per component: log weight minus half log variance, shifted mean, inverse variance.
    comps: Vec<(f64, f64, f64)>,
}

impl StageDrift {
    fn eval(&self, x: f64) -> f64 {
        let term = |&(c, m, iv): &(f64, f64, f64)| (c - 0.5 * (x - m) * (x - m) * iv, (x - m) * iv);
        let max = self.comps.iter().map(|p| term(p).0).fold(f64::NEG_INFINITY, f64::max);
        let (mut num, mut den) = (0.0, 0.0);
        for p in &self.comps {
            let (log_w, r) = term(p);
            let e = (log_w - max).exp();
            num -= e * r;
            den += e;
        }
        self.ratio * x - self.bracket * num / den
    }
}

// `Phi(u) - 1/2` split as `sign(u)/2` plus a small erfc tail, so that
// differences of CDF values keep relative precision in flat regions.
fn centered_normal_cdf(u: f64) -> (f64, f64) {
    if u == 0.0 {
        (0.0, 0.0)
    } else {
        let s = u.signum();
        (0.5 * s, -0.5 * s * erfc(u.abs() / std::f64::consts::SQRT_2))
    }
}

impl GaussianMixture {
    fn centered_cdf_1d(&self, x: f64) -> (f64, f64) {
        let mut head = 0.0;
        let mut tail = 0.0;
        for ((w, m), c) in self.weights.iter().zip(&self.means).zip(&self.covs) {
            let (h, t) = centered_normal_cdf((x - m[0]) / c[(0, 0)].sqrt());
            head += w * h;
            tail += w * t;
        }
        (head, tail)
    }

    // Solves `F(x) - 1/2 = head + tail` by bracketed bisection.
    fn solve_centered(&self, head: f64, tail: f64) -> Result<f64> {
        self.require_1d()?;
        let excess = |x: f64| {
            let (h, t) = self.centered_cdf_1d(x);
            (h - head) + (t - tail)
        };
        let sig_max = self.covs.iter().map(|c| c[(0, 0)].sqrt()).fold(0.0, f64::max);
        let mu_min = self.means.iter().map(|m| m[0]).fold(f64::INFINITY, f64::min);
        let mu_max = self.means.iter().map(|m| m[0]).fold(f64::NEG_INFINITY, f64::max);
        let (mut lo, mut hi) = (mu_min - 10.0 * sig_max, mu_max + 10.0 * sig_max);
        let mut widen = 0;
        while excess(lo) > 0.0 || excess(hi) < 0.0 {
            let span = hi - lo;
            lo -= span;
            hi += span;
            widen += 1;
            if widen > 60 {
                return Err(invalid("could not bracket the quantile"));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if excess(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Inverse CDF of a 1D mixture by bracketed bisection.
pub fn mixture_quantile(p: f64, mixture: &GaussianMixture) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(format!("quantile level must lie in (0, 1), got {p}")));
    }
    mixture.solve_centered(0.0, p - 0.5)
}

/// `F0^{-1}(Phi(x1))`: the increasing map pushing `N(0, 1)` onto the mixture.
pub fn quantile_transport(x1: f64, mixture: &GaussianMixture) -> Result<f64> {
    let (h, t) = centered_normal_cdf(x1);
    mixture.solve_centered(h, t)
}

/// `F0^{-1}(F1(x1))` where `F1` is the schedule's marginal at `t = 1`.
///
/// Equals [`quantile_transport`] whenever `gamma(1) = 0` and `alpha(1) = 1`.
pub fn schedule_quantile_transport(x1: f64, mixture: &GaussianMixture, schedule: OracleSchedule) -> Result<f64> {
    mixture.require_1d()?;
    let terminal = mixture.noised(schedule.alpha(1.0), schedule.gamma(1.0))?;
    let (h, t) = terminal.centered_cdf_1d(x1);
    mixture.solve_centered(h, t)
}

/// `cos(angle / T)^T`, the coefficient after `T` even denoising-consistency stages.
pub fn c_interp_angle(angle: f64, stages: f64) -> f64 {
    (angle / stages).cos().powf(stages)
}

/// `c(t)` for the triangular schedule, whose angle is `pi t / 2`. `T = 1` gives `gamma(t)`.
pub fn c_interp(t: f64, stages: f64) -> f64 {
    c_interp_angle(FRAC_PI_2 * t, stages)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PredictorMode {
    Diffusion,
    Consistency,
    Interpolated(f64),
}

/// `mu + c(t) (x_t - gamma(t) mu)` for unit-variance Gaussian data and the triangular schedule.
pub fn gaussian_optimal_predictor(x_t: f64, t: f64, mu: f64, mode: PredictorMode) -> f64 {
    let g = OracleSchedule::Triangular.gamma(t);
    let c = match mode {
        PredictorMode::Diffusion => g,
        PredictorMode::Consistency => 1.0,
        PredictorMode::Interpolated(stages) => c_interp(t, stages),
    };
    mu + c * (x_t - g * mu)
}

/// Fitted log-log slopes of forward and central difference errors.
pub fn difference_order_probe<F: Fn(f64) -> f64>(f: F, df: f64, t: f64, eps: &[f64]) -> (f64, f64) {
    let mut fwd = Vec::with_capacity(eps.len());
    let mut cen = Vec::with_capacity(eps.len());
    for &e in eps {
        fwd.push(((f(t + e) - f(t)) / e - df).abs());
        cen.push(((f(t + e) - f(t - e)) / (2.0 * e) - df).abs());
    }
    (loglog_slope(eps, &fwd), loglog_slope(eps, &cen))
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

/// Bayes-optimal network output `alpha_hat E[z | x_t] + gamma_hat E[x | x_t]`
/// for a transport family and mixture data.
#[derive(Debug, Clone)]
pub struct OptimalEstimator {
    pub mixture: GaussianMixture,
    pub transport: Transport,
}

impl OptimalEstimator {
    pub fn new(mixture: GaussianMixture, transport: Transport) -> Self {
        Self { mixture, transport }
    }
}

impl Estimator for OptimalEstimator {
    fn dim(&self) -> usize {
        self.mixture.dim()
    }

    fn evaluate(&self, x_t: &[f64], t: f64, _cond: Option<usize>) -> Result<Vec<f64>> {
        let c = self.transport.coefficients(t)?;
        if c.alpha.abs() < SINGULAR_DENOM && c.gamma.abs() < SINGULAR_DENOM {
            return Err(Error::SingularCoefficients { t, denom: 0.0 });
        }
        let (ex, ez) = self.mixture.posterior_means(x_t, c.alpha, c.gamma)?;
        Ok(ex.iter().zip(&ez).map(|(x, z)| c.alpha_hat * z + c.gamma_hat * x).collect())
    }
}
