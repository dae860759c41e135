//! Time sampling and time warping.
//!
//! Training times are drawn from a Beta law; sampling schedules are uniform
//! grids optionally warped by the generalized Kumaraswamy transform
//! `(1 - (1 - t^a)^b)^c`.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Result};

/// Shape parameters of a Beta(theta1, theta2) law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaParams {
    theta1: f64,
    theta2: f64,
}

impl BetaParams {
    pub fn new(theta1: f64, theta2: f64) -> Result<Self> {
        if !(theta1 > 0.0 && theta2 > 0.0 && theta1.is_finite() && theta2.is_finite()) {
            return Err(invalid(format!("beta shapes must be positive, got ({theta1}, {theta2})")));
        }
        Ok(Self { theta1, theta2 })
    }

    pub fn theta1(&self) -> f64 {
        self.theta1
    }

    pub fn theta2(&self) -> f64 {
        self.theta2
    }

    pub fn mean(&self) -> f64 {
        self.theta1 / (self.theta1 + self.theta2)
    }

    /// Draws `X / (X + Y)` with `X ~ Gamma(theta1)`, `Y ~ Gamma(theta2)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // Both shapes were validated, so construction cannot fail.
        let gx = Gamma::new(self.theta1, 1.0).expect("validated shape");
        let gy = Gamma::new(self.theta2, 1.0).expect("validated shape");
        loop {
            let x: f64 = gx.sample(rng);
            let y: f64 = gy.sample(rng);
            let s = x + y;
            if s > 0.0 && s.is_finite() {
                return (x / s).clamp(0.0, 1.0);
            }
        }
    }

    pub fn density(&self, t: f64) -> f64 {
        if !(0.0..=1.0).contains(&t) {
            return 0.0;
        }
        let (a, b) = (self.theta1, self.theta2);
        let log_norm = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b);
        let term = |shape: f64, v: f64| if shape == 1.0 { 0.0 } else { (shape - 1.0) * v.ln() };
        (log_norm + term(a, t) + term(b, 1.0 - t)).exp()
    }
}

/// Regularized incomplete beta function `I_t(a, b)`.
pub fn beta_cdf(t: f64, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(invalid(format!("beta_cdf shapes must be positive, got ({a}, {b})")));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(crate::Error::TimeOutOfRange(t));
    }
    if t == 0.0 || t == 1.0 {
        return Ok(t);
    }
    let front = (ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * t.ln() + b * (1.0 - t).ln()).exp();
    // The continued fraction converges fast on the side of the mean.
    if t < (a + 1.0) / (a + b + 2.0) {
        Ok(front * beta_continued_fraction(t, a, b) / a)
    } else {
        Ok(1.0 - front * beta_continued_fraction(1.0 - t, b, a) / b)
    }
}

// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..1000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Parameters of the generalized Kumaraswamy warp. `(1, 1, 1)` is the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KumaParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl KumaParams {
    pub const IDENTITY: KumaParams = KumaParams { a: 1.0, b: 1.0, c: 1.0 };

    /// The setting reported to work well across scenarios.
    pub const DEFAULT_SAMPLING: KumaParams = KumaParams { a: 1.17, b: 0.8, c: 1.1 };

    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if [a, b, c].iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(Self { a, b, c })
        } else {
            Err(invalid(format!("kumaraswamy parameters must be positive, got ({a}, {b}, {c})")))
        }
    }

    pub fn apply(&self, t: f64) -> f64 {
        kumaraswamy(t, self)
    }
}

/// `(1 - (1 - t^a)^b)^c`.
pub fn kumaraswamy(t: f64, p: &KumaParams) -> f64 {
    let t = t.clamp(0.0, 1.0);
    (1.0 - (1.0 - t.powf(p.a)).powf(p.b)).powf(p.c)
}

/// `s t / (1 + (s - 1) t)`.
pub fn timeshift(t: f64, s: f64) -> f64 {
    s * t / (1.0 + (s - 1.0) * t)
}

/// Warp applied to a uniform grid when building a sampling schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeWarp {
    Identity,
    Kumaraswamy(KumaParams),
}

impl TimeWarp {
    pub fn apply(&self, t: f64) -> f64 {
        match self {
            TimeWarp::Identity => t,
            TimeWarp::Kumaraswamy(p) => kumaraswamy(t, p),
        }
    }
}

/// `N + 1` strictly decreasing times from 1 to 0, `t_i = warp(1 - i / N)`.
pub fn build_schedule(steps: usize, warp: TimeWarp) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(invalid("schedule needs at least one step"));
    }
    let mut times: Vec<f64> = (0..=steps)
        .map(|i| warp.apply(1.0 - i as f64 / steps as f64))
        .collect();
    times[0] = 1.0;
    times[steps] = 0.0;
    if times.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid(format!("warp {warp:?} collapses the {steps}-step schedule")));
    }
    Ok(times)
}

/// Result of fitting a Kumaraswamy warp to a target warp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KumaFit {
    pub params: KumaParams,
    /// Discrete squared-L2 error of the fitted warp.
    pub error: f64,
    /// Discrete squared-L2 error of the identity warp.
    pub identity_error: f64,
}

/// Mean of `(f(t) - target(t))^2` over `grid` uniform points of `[0, 1]`.
pub fn squared_l2<F: Fn(f64) -> f64, G: Fn(f64) -> f64>(f: F, target: G, grid: usize) -> f64 {
    let n = grid.max(2);
    (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            let d = f(t) - target(t);
            d * d
        })
        .sum::<f64>()
        / n as f64
}

/// Fits `(a, b, c)` to a monotone warp with fixed endpoints by minimizing
/// the discrete squared-L2 error with Nelder-Mead in log-parameter space.
pub fn fit_kuma_to_target<F: Fn(f64) -> f64>(target: F, grid: usize) -> Result<KumaFit> {
    if grid < 2 {
        return Err(invalid("fit grid needs at least 2 points"));
    }
    let values: Vec<f64> = (0..grid).map(|i| target(i as f64 / (grid - 1) as f64)).collect();
    if (values[0]).abs() > 1e-9 || (values[grid - 1] - 1.0).abs() > 1e-9 {
        return Err(invalid("target warp must fix 0 and 1"));
    }
    if values.windows(2).any(|w| w[1] < w[0] - 1e-12) || values.iter().any(|v| !v.is_finite()) {
        return Err(invalid("target warp is not monotone"));
    }
    let objective = |p: &[f64; 3]| {
        let k = KumaParams { a: p[0].exp(), b: p[1].exp(), c: p[2].exp() };
        let e = values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let d = kumaraswamy(i as f64 / (grid - 1) as f64, &k) - v;
                d * d
            })
            .sum::<f64>()
            / grid as f64;
        if e.is_finite() { e } else { f64::INFINITY }
    };
    let identity_error = objective(&[0.0; 3]);

    // Restarts break the a/c redundancy near the identity.
    let seeds = [[0.0, 0.0, 0.0], [0.3, -0.3, 0.0], [-0.3, 0.0, 0.3]];
    let mut best = ([0.0; 3], identity_error);
    for seed in seeds {
        let (p, e) = nelder_mead(&objective, seed, 0.25, 4000, 1e-16);
        if e < best.1 {
            best = (p, e);
        }
    }
    let (p, error) = best;
    Ok(KumaFit {
        params: KumaParams { a: p[0].exp(), b: p[1].exp(), c: p[2].exp() },
        error,
        identity_error,
    })
}

fn nelder_mead<F: Fn(&[f64; 3]) -> f64>(
    f: &F,
    start: [f64; 3],
    step: f64,
    max_iter: usize,
    tol: f64,
) -> ([f64; 3], f64) {
    let mut simplex: Vec<([f64; 3], f64)> = (0..4)
        .map(|i| {
            let mut p = start;
            if i > 0 {
                p[i - 1] += step;
            }
            (p, f(&p))
        })
        .collect();
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if (simplex[3].1 - simplex[0].1).abs() <= tol * (1.0 + simplex[0].1.abs()) {
            break;
        }
        let mut centroid = [0.0; 3];
        for (p, _) in &simplex[..3] {
            for k in 0..3 {
                centroid[k] += p[k] / 3.0;
            }
        }
        let along = |coef: f64| {
            let mut p = [0.0; 3];
            for k in 0..3 {
                p[k] = centroid[k] + coef * (simplex[3].0[k] - centroid[k]);
            }
            p
        };
        let reflected = along(-1.0);
        let fr = f(&reflected);
        if fr < simplex[0].1 {
            let expanded = along(-2.0);
            let fe = f(&expanded);
            simplex[3] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[2].1 {
            simplex[3] = (reflected, fr);
        } else {
            let contracted = if fr < simplex[3].1 { along(-0.5) } else { along(0.5) };
            let fc = f(&contracted);
            if fc < simplex[3].1.min(fr) {
                simplex[3] = (contracted, fc);
            } else {
                let best = simplex[0].0;
                for entry in simplex.iter_mut().skip(1) {
                    for k in 0..3 {
                        entry.0[k] = best[k] + 0.5 * (entry.0[k] - best[k]);
                    }
                    entry.1 = f(&entry.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    // Trapezoid quadrature of the Beta density after t = u^2, which smooths the
    // sqrt-type behaviour at 0; independent of the continued fraction.
    fn beta_cdf_quadrature(t: f64, a: f64, b: f64, n: usize) -> f64 {
        let p = BetaParams::new(a, b).unwrap();
        let g = |u: f64| 2.0 * u * p.density(u * u);
        let top = t.sqrt();
        let h = top / n as f64;
        let mut s = 0.5 * (g(0.0) + g(top));
        for i in 1..n {
            s += g(i as f64 * h);
        }
        s * h
    }

    #[test]
    fn beta_rejects_bad_shapes() {
        assert!(BetaParams::new(0.0, 1.0).is_err());
        assert!(BetaParams::new(1.0, -2.0).is_err());
        assert!(beta_cdf(0.5, 0.0, 1.0).is_err());
        assert!(beta_cdf(1.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn uniform_beta_mean() {
        let p = BetaParams::new(1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let mean = (0..n).map(|_| p.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "{mean}");
    }

    #[test]
    fn few_step_beta_mean() {
        let p = BetaParams::new(0.8, 1.0).unwrap();
        // Mean by integrating t * density numerically.
        let n = 200_000;
        let h = 1.0 / n as f64;
        let numeric: f64 = (0..n).map(|i| {
            let t = (i as f64 + 0.5) * h;
            t * p.density(t) * h
        }).sum();
        assert!((numeric - 4.0 / 9.0).abs() < 1e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let draws = 100_000;
        let mean = (0..draws).map(|_| p.sample(&mut rng)).sum::<f64>() / draws as f64;
        assert!((mean - 4.0 / 9.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn symmetric_beta_mode() {
        let p = BetaParams::new(2.0, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut hist = [0usize; 10];
        for _ in 0..100_000 {
            let t = p.sample(&mut rng);
            hist[((t * 10.0) as usize).min(9)] += 1;
        }
        let argmax = (0..10).max_by_key(|&i| hist[i]).unwrap();
        assert!(argmax == 4 || argmax == 5, "{hist:?}");
        assert!(p.density(0.5) > p.density(0.4) && p.density(0.5) > p.density(0.6));
    }

    #[test]
    fn beta_cdf_known_values() {
        for t in [0.0, 0.1, 0.37, 0.9, 1.0] {
            assert_relative_eq!(beta_cdf(t, 1.0, 1.0).unwrap(), t, epsilon = 1e-14);
        }
        assert_relative_eq!(beta_cdf(0.5, 2.0, 2.0).unwrap(), 0.5, epsilon = 1e-14);
        let quad = beta_cdf_quadrature(0.25, 2.0, 2.0, 1_000_000);
        assert_relative_eq!(quad, 0.15625, epsilon = 1e-10);
        assert_relative_eq!(beta_cdf(0.25, 2.0, 2.0).unwrap(), 0.15625, epsilon = 1e-12);
    }

    #[test]
    fn beta_cdf_matches_quadrature() {
        // Shapes >= 1 keep the density bounded so the trapezoid rule converges.
        for &(a, b) in &[(1.0, 1.0), (2.4, 2.4), (1.5, 3.0), (3.0, 1.2)] {
            for k in 0..64 {
                let t = (k as f64 + 0.5) / 64.0;
                let quad = beta_cdf_quadrature(t, a, b, 200_000);
                let cf = beta_cdf(t, a, b).unwrap();
                assert!((quad - cf).abs() < 1e-8, "a={a} b={b} t={t}: {quad} vs {cf}");
            }
        }
    }

    #[test]
    fn kumaraswamy_identity_and_boundaries() {
        for t in [0.0, 0.2, 0.5, 0.99, 1.0] {
            assert_relative_eq!(kumaraswamy(t, &KumaParams::IDENTITY), t, epsilon = 1e-15);
        }
        let p = KumaParams::new(2.5, 0.3, 4.0).unwrap();
        assert_eq!(kumaraswamy(0.0, &p), 0.0);
        assert_eq!(kumaraswamy(1.0, &p), 1.0);
        assert!(KumaParams::new(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn kumaraswamy_default_at_half() {
        // Direct evaluation of the formula, step by step.
        let p = KumaParams::DEFAULT_SAMPLING;
        let inner: f64 = 1.0 - 0.5f64.powf(1.17);
        let direct = (1.0 - inner.powf(0.8)).powf(1.1);
        assert_relative_eq!(kumaraswamy(0.5, &p), direct, epsilon = 1e-15);
        // Same value through logarithms.
        let via_logs = (1.1 * (1.0 - (0.8 * (1.0 - (1.17 * 0.5f64.ln()).exp()).ln()).exp()).ln()).exp();
        assert_relative_eq!(direct, via_logs, epsilon = 1e-14);
    }

    #[test]
    fn timeshift_values() {
        assert_relative_eq!(timeshift(0.37, 1.0), 0.37);
        assert_relative_eq!(timeshift(0.5, 2.0), 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(timeshift(0.5, 0.5), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn schedules() {
        assert_eq!(build_schedule(1, TimeWarp::Identity).unwrap(), vec![1.0, 0.0]);
        assert_eq!(build_schedule(2, TimeWarp::Identity).unwrap(), vec![1.0, 0.5, 0.0]);
        let p = KumaParams::DEFAULT_SAMPLING;
        let s = build_schedule(2, TimeWarp::Kumaraswamy(p)).unwrap();
        assert_eq!(s[0], 1.0);
        assert_relative_eq!(s[1], kumaraswamy(0.5, &p));
        assert_eq!(s[2], 0.0);
        assert!(build_schedule(0, TimeWarp::Identity).is_err());
    }

    #[test]
    fn fit_identity_target() {
        let fit = fit_kuma_to_target(|t| t, 512).unwrap();
        assert!(fit.error < 1e-12);
        assert!(fit.identity_error < 1e-30);
    }

    #[test]
    fn fit_improves_on_shift() {
        let bound = 1.0 - 49.0 / 1536.0;
        for s in [0.5, 0.75, 1.5, 2.0] {
            let fit = fit_kuma_to_target(|t| timeshift(t, s), 512).unwrap();
            assert!(fit.error <= bound * fit.identity_error, "s={s}: {fit:?}");
            assert!(fit.error <= (1.0 - 0.0319) * fit.identity_error);
        }
    }

    #[test]
    fn fit_rejects_non_monotone() {
        assert!(fit_kuma_to_target(|t| (t * 6.0).sin().abs() * t, 64).is_err());
        assert!(fit_kuma_to_target(|t| 0.5 * t, 64).is_err());
    }

    proptest! {
        #[test]
        fn kumaraswamy_monotone(a in 0.05f64..8.0, b in 0.05f64..8.0, c in 0.05f64..8.0) {
            let p = KumaParams::new(a, b, c).unwrap();
            let mut prev = 0.0;
            for i in 0..=200 {
                let v = kumaraswamy(i as f64 / 200.0, &p);
                prop_assert!(v >= prev);
                prev = v;
            }
        }

        #[test]
        fn schedules_strictly_decreasing(n in 1usize..300, a in 0.5f64..2.0, b in 0.5f64..2.0, c in 0.5f64..2.0) {
            let s = build_schedule(n, TimeWarp::Kumaraswamy(KumaParams::new(a, b, c).unwrap())).unwrap();
            prop_assert_eq!(s.len(), n + 1);
            prop_assert_eq!(s[0], 1.0);
            prop_assert_eq!(s[n], 0.0);
            prop_assert!(s.windows(2).all(|w| w[1] < w[0]));
        }
    }
}
