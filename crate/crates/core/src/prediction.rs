//! Interpolant, regression target and the two prediction maps shared by the
//! trainer, the sampler and the oracles.
//!
//! Everything here is generic over the float type so the same code runs in
//! 64-bit (default) and 32-bit (cancellation experiments).

use num_traits::Float;

use crate::error::{Error, Result};
use crate::transport::Coefficients;

/// Denominators smaller than this in magnitude are treated as singular.
pub const SINGULAR_DENOM: f64 = 1e-12;

/// A data vector paired with its noise vector.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePair<T = f64> {
    pub x: Vec<T>,
    pub z: Vec<T>,
}

impl<T: Float> StatePair<T> {
    pub fn new(x: Vec<T>, z: Vec<T>) -> Result<Self> {
        check_dims(&x, &z)?;
        if x.is_empty() {
            return Err(Error::DimensionMismatch { expected: 1, got: 0 });
        }
        Ok(Self { x, z })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// `alpha z + gamma x`.
    pub fn interpolate(&self, c: &Coefficients) -> Vec<T> {
        combine(c.alpha, &self.z, c.gamma, &self.x)
    }

    /// `alpha_hat z + gamma_hat x`.
    pub fn target_field(&self, c: &Coefficients) -> Vec<T> {
        combine(c.alpha_hat, &self.z, c.gamma_hat, &self.x)
    }
}

fn check_dims<T>(a: &[T], b: &[T]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    Ok(())
}

fn cast<T: Float>(v: f64) -> T {
    T::from(v).expect("f64 is representable in every Float type")
}

fn combine<T: Float>(a: f64, u: &[T], b: f64, v: &[T]) -> Vec<T> {
    let (a, b) = (cast::<T>(a), cast::<T>(b));
    u.iter().zip(v).map(|(&u, &v)| a * u + b * v).collect()
}

fn check_denom(c: &Coefficients) -> Result<()> {
    if c.denom.abs() < SINGULAR_DENOM || !c.denom.is_finite() {
        return Err(Error::SingularCoefficients { t: c.t, denom: c.denom });
    }
    Ok(())
}

/// `x_t = alpha z + gamma x`.
pub fn interpolate<T: Float>(x: &[T], z: &[T], c: &Coefficients) -> Result<Vec<T>> {
    check_dims(x, z)?;
    Ok(combine(c.alpha, z, c.gamma, x))
}

/// `alpha_hat z + gamma_hat x`.
pub fn target_field<T: Float>(x: &[T], z: &[T], c: &Coefficients) -> Result<Vec<T>> {
    check_dims(x, z)?;
    Ok(combine(c.alpha_hat, z, c.gamma_hat, x))
}

/// Clean-data estimate `(alpha F - alpha_hat x_t) / denom`.
pub fn predict_x<T: Float>(f: &[T], x_t: &[T], c: &Coefficients) -> Result<Vec<T>> {
    check_dims(f, x_t)?;
    check_denom(c)?;
    let denom = cast::<T>(c.denom);
    let (a, ah) = (cast::<T>(c.alpha), cast::<T>(c.alpha_hat));
    Ok(f.iter().zip(x_t).map(|(&f, &x)| (a * f - ah * x) / denom).collect())
}

/// `scale * f^x`, with the scale folded into the coefficients so the scaled
/// estimate is rounded once.
pub fn predict_x_scaled<T: Float>(f: &[T], x_t: &[T], c: &Coefficients, scale: f64) -> Result<Vec<T>> {
    check_dims(f, x_t)?;
    check_denom(c)?;
    let (a, ah) = (cast::<T>(c.alpha * scale / c.denom), cast::<T>(c.alpha_hat * scale / c.denom));
    Ok(f.iter().zip(x_t).map(|(&f, &x)| a * f - ah * x).collect())
}

/// Noise estimate `(gamma_hat x_t - gamma F) / denom`.
pub fn predict_z<T: Float>(f: &[T], x_t: &[T], c: &Coefficients) -> Result<Vec<T>> {
    check_dims(f, x_t)?;
    check_denom(c)?;
    let denom = cast::<T>(c.denom);
    let (g, gh) = (cast::<T>(c.gamma), cast::<T>(c.gamma_hat));
    Ok(f.iter().zip(x_t).map(|(&f, &x)| (gh * x - g * f) / denom).collect())
}

/// Both estimates at once; the sampler's decomposition stage.
pub fn decompose<T: Float>(f: &[T], x_t: &[T], c: &Coefficients) -> Result<(Vec<T>, Vec<T>)> {
    Ok((predict_x(f, x_t, c)?, predict_z(f, x_t, c)?))
}
