//! Transport-coefficient families.
//!
//! A family fixes four time functions: `alpha` and `gamma` build the noisy
//! input `x_t = alpha(t) z + gamma(t) x`, while `alpha_hat` and `gamma_hat`
//! build the regression target `alpha_hat(t) z + gamma_hat(t) x`.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

/// The six supported coefficient families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Transport {
    Linear,
    ReLinear,
    TrigFlow,
    Edm,
    TrigLinear,
    Random,
}

/// Coefficients of a family evaluated at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub t: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub alpha_hat: f64,
    pub gamma_hat: f64,
    /// `alpha * gamma_hat - alpha_hat * gamma`.
    pub denom: f64,
}

/// Noise level of the EDM family, `exp(4 (2.68 t - 1.59))`.
pub fn edm_sigma(t: f64) -> f64 {
    (4.0 * (2.68 * t - 1.59)).exp()
}

impl Transport {
    pub const ALL: [Transport; 6] = [
        Transport::Linear,
        Transport::ReLinear,
        Transport::TrigFlow,
        Transport::Edm,
        Transport::TrigLinear,
        Transport::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Transport::Linear => "linear",
            Transport::ReLinear => "relinear",
            Transport::TrigFlow => "trigflow",
            Transport::Edm => "edm",
            Transport::TrigLinear => "triglinear",
            Transport::Random => "random",
        }
    }

    /// Evaluates all four coefficients at `t` in `[0, 1]`.
    pub fn coefficients(self, t: f64) -> Result<Coefficients> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::TimeOutOfRange(t));
        }
        Ok(self.coefficients_unchecked(t))
    }

    pub(crate) fn coefficients_unchecked(self, t: f64) -> Coefficients {
        let (alpha, gamma, alpha_hat, gamma_hat) = match self {
            Transport::Linear => (t, 1.0 - t, 1.0, -1.0),
            Transport::ReLinear => (1.0 - t, t, -1.0, 1.0),
            Transport::TrigFlow => {
                let (s, c) = (t * FRAC_PI_2).sin_cos();
                (s, c, c, -s)
            }
            Transport::Edm => {
                let sigma = edm_sigma(t);
                let norm = (sigma * sigma + 0.25).sqrt();
                (sigma / norm, 1.0 / norm, -0.5 / norm, 2.0 * sigma / norm)
            }
            Transport::TrigLinear => {
                let (s, c) = (t * FRAC_PI_2).sin_cos();
                (s, c, 1.0, -1.0)
            }
            Transport::Random => ((t * FRAC_PI_2).sin(), 1.0 - t, 1.0, -1.0 - (-5.0 * t).exp()),
        };
        Coefficients {
            t,
            alpha,
            gamma,
            alpha_hat,
            gamma_hat,
            denom: alpha * gamma_hat - alpha_hat * gamma,
        }
    }

    /// Checks the boundary, monotonicity and non-degeneracy constraints on a
    /// uniform grid. Violations are reported, never raised.
    pub fn validate(self, grid_points: usize) -> Result<ValidationReport> {
        if grid_points < 2 {
            return Err(invalid("validation grid needs at least 2 points"));
        }
        let grid: Vec<Coefficients> = (0..grid_points)
            .map(|i| self.coefficients_unchecked(i as f64 / (grid_points - 1) as f64))
            .collect();
        let first = grid[0];
        let last = grid[grid_points - 1];

        let alpha = check_coefficient(&grid, |c| c.alpha, 0.0, 1.0, Monotone::NonDecreasing);
        let gamma = check_coefficient(&grid, |c| c.gamma, 1.0, 0.0, Monotone::NonIncreasing);

        // Constraint (c) concerns the open interval, so the endpoints are skipped.
        let mut worst_t = f64::NAN;
        let mut min_abs = f64::INFINITY;
        for c in &grid[1..grid_points - 1] {
            if c.denom.abs() < min_abs {
                min_abs = c.denom.abs();
                worst_t = c.t;
            }
        }
        if grid_points == 2 {
            min_abs = first.denom.abs().min(last.denom.abs());
            worst_t = if first.denom.abs() <= last.denom.abs() { first.t } else { last.t };
        }
        let denom = ConstraintCheck {
            boundary_ok: true,
            monotone_ok: true,
            passed: min_abs > DENOM_EPS,
            worst_t,
            worst_value: min_abs,
        };

        Ok(ValidationReport {
            transport: self,
            grid_points,
            alpha,
            gamma,
            denom,
        })
    }
}

const BOUNDARY_TOL: f64 = 1e-9;
const MONOTONE_TOL: f64 = 1e-12;
const DENOM_EPS: f64 = 1e-12;

enum Monotone {
    NonDecreasing,
    NonIncreasing,
}

fn check_coefficient(
    grid: &[Coefficients],
    get: impl Fn(&Coefficients) -> f64,
    at_zero: f64,
    at_one: f64,
    direction: Monotone,
) -> ConstraintCheck {
    let n = grid.len();
    let start_err = (get(&grid[0]) - at_zero).abs();
    let end_err = (get(&grid[n - 1]) - at_one).abs();
    let boundary_ok = start_err <= BOUNDARY_TOL && end_err <= BOUNDARY_TOL;
    let finite = grid.iter().all(|c| get(c).is_finite());

    // One-sided differences; the worst step is the one most against the
    // required direction.
    let mut worst_step = f64::NEG_INFINITY;
    let mut worst_t = grid[0].t;
    for pair in grid.windows(2) {
        let step = get(&pair[1]) - get(&pair[0]);
        let against = match direction {
            Monotone::NonDecreasing => -step,
            Monotone::NonIncreasing => step,
        };
        if against > worst_step {
            worst_step = against;
            worst_t = pair[0].t;
        }
    }
    let monotone_ok = worst_step <= MONOTONE_TOL;

    let (worst_t, worst_value) = if !boundary_ok {
        if start_err >= end_err {
            (grid[0].t, get(&grid[0]))
        } else {
            (grid[n - 1].t, get(&grid[n - 1]))
        }
    } else {
        (worst_t, worst_step)
    };
    ConstraintCheck {
        boundary_ok,
        monotone_ok,
        passed: boundary_ok && monotone_ok && finite,
        worst_t,
        worst_value,
    }
}

/// Outcome of one constraint on the validation grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintCheck {
    pub passed: bool,
    pub boundary_ok: bool,
    pub monotone_ok: bool,
    /// Grid time of the worst offender (boundary point when the boundary
    /// condition fails, otherwise the worst monotonicity step or the smallest
    /// denominator).
    pub worst_t: f64,
    pub worst_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub transport: Transport,
    pub grid_points: usize,
    /// Constraint (a): `alpha(0) = 0`, `alpha(1) = 1`, non-decreasing.
    pub alpha: ConstraintCheck,
    /// Constraint (b): `gamma(0) = 1`, `gamma(1) = 0`, non-increasing.
    pub gamma: ConstraintCheck,
    /// Constraint (c): `|alpha gamma_hat - alpha_hat gamma| > 0` inside (0, 1).
    pub denom: ConstraintCheck,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.alpha.passed && self.gamma.passed && self.denom.passed
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "constraint,passed,boundary_ok,monotone_ok,worst_t,worst_value")?;
        for (name, c) in [("a_alpha", &self.alpha), ("b_gamma", &self.gamma), ("c_denominator", &self.denom)] {
            writeln!(
                f,
                "{name},{},{},{},{},{}",
                c.passed, c.boundary_ok, c.monotone_ok, c.worst_t, c.worst_value
            )?;
        }
        Ok(())
    }
}

impl fmt::Display for Transport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Transport {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Transport::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| invalid(format!("unknown transport '{s}'")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn linear_row() {
        let c = Transport::Linear.coefficients(0.3).unwrap();
        assert_relative_eq!(c.alpha, 0.3);
        assert_relative_eq!(c.gamma, 0.7);
        assert_eq!((c.alpha_hat, c.gamma_hat), (1.0, -1.0));
        assert_relative_eq!(c.denom, -1.0);
    }

    #[test]
    fn trigflow_midpoint() {
        let c = Transport::TrigFlow.coefficients(0.5).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(c.alpha, r, epsilon = 1e-15);
        assert_relative_eq!(c.gamma, r, epsilon = 1e-15);
        assert_relative_eq!(c.alpha_hat, r, epsilon = 1e-15);
        assert_relative_eq!(c.gamma_hat, -r, epsilon = 1e-15);
        assert_relative_eq!(c.denom, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn edm_denominator_is_two() {
        for i in 0..=1000 {
            let c = Transport::Edm.coefficients(i as f64 / 1000.0).unwrap();
            assert_relative_eq!(c.denom, 2.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn edm_sigma_values() {
        assert_relative_eq!(edm_sigma(1.59 / 2.68), 1.0, epsilon = 1e-15);
        assert_relative_eq!(edm_sigma(0.0), (-6.36f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(edm_sigma(1.0), 4.36f64.exp(), max_relative = 1e-14);
    }

    #[test]
    fn out_of_range_time() {
        assert!(matches!(Transport::Linear.coefficients(1.5), Err(Error::TimeOutOfRange(_))));
        assert!(Transport::Linear.coefficients(-1e-9).is_err());
    }

    #[test]
    fn validate_linear_passes() {
        let r = Transport::Linear.validate(1024).unwrap();
        assert!(r.all_passed(), "{r}");
    }

    #[test]
    fn validate_relinear_flags_boundaries() {
        let r = Transport::ReLinear.validate(1024).unwrap();
        assert!(!r.alpha.boundary_ok);
        assert!(!r.gamma.boundary_ok);
        assert_eq!(r.alpha.worst_t, 0.0);
        assert!(r.denom.passed);
        assert_relative_eq!(r.denom.worst_value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn validate_random_denominator() {
        let r = Transport::Random.validate(1024).unwrap();
        assert!(r.denom.passed);
        assert!(r.alpha.passed && r.gamma.passed);
    }

    #[test]
    fn validate_rejects_tiny_grid() {
        assert!(Transport::Linear.validate(1).is_err());
    }

    #[test]
    fn constant_denominators() {
        for i in 0..1000 {
            let t = i as f64 / 999.0;
            assert_eq!(Transport::Linear.coefficients(t).unwrap().denom, -1.0);
            assert_relative_eq!(Transport::TrigFlow.coefficients(t).unwrap().denom, -1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn triglinear_denominator_is_not_constant() {
        // alpha gamma_hat - alpha_hat gamma = -(sin + cos) for this family.
        for i in 0..=100 {
            let t = i as f64 / 100.0;
            let c = Transport::TrigLinear.coefficients(t).unwrap();
            let (s, co) = (t * FRAC_PI_2).sin_cos();
            assert_relative_eq!(c.denom, -(s + co), epsilon = 1e-15);
        }
    }

    #[test]
    fn linear_targets_are_time_derivatives() {
        // Flow-matching compatibility: alpha_hat = d alpha/dt, gamma_hat = d gamma/dt.
        let h = 1e-6;
        for i in 1..100 {
            let t = i as f64 / 100.0;
            let c = Transport::Linear.coefficients(t).unwrap();
            let lo = Transport::Linear.coefficients(t - h).unwrap();
            let hi = Transport::Linear.coefficients(t + h).unwrap();
            assert!(((hi.alpha - lo.alpha) / (2.0 * h) - c.alpha_hat).abs() < 1e-6);
            assert!(((hi.gamma - lo.gamma) / (2.0 * h) - c.gamma_hat).abs() < 1e-6);
        }
    }

    #[test]
    fn parse_names() {
        for t in Transport::ALL {
            assert_eq!(t.name().parse::<Transport>().unwrap(), t);
        }
        assert!("cosine".parse::<Transport>().is_err());
    }
}
