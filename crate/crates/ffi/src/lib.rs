//! C ABI over the `ucgm` library.
//!
//! Every entry point returns a [`UcgmStatus`]; on failure the message is kept
//! per thread and can be read with [`ucgm_last_error`]. Models are opaque
//! handles released with [`ucgm_model_free`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ucgm::config::RunConfig;
use ucgm::data::make_dataset;
use ucgm::estimator::{Activation, Mlp, MlpConfig};
use ucgm::metrics::{energy_distance, wasserstein1_1d};
use ucgm::oracle::{quantile_transport, GaussianMixture};
use ucgm::sampler::{sample_many, RhoPolicy, SamplerConfig, ScheduleSpec};
use ucgm::trainer::train;
use ucgm::{Error, Transport};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UcgmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    Format = 5,
    DimensionMismatch = 6,
    NonFinite = 7,
    Singular = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// How fresh noise is injected during sampling.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UcgmRhoPolicy {
    /// Uses `UcgmSamplerConfig::rho` at every step.
    Constant = 0,
    Sde = 1,
    SdeSquared = 2,
}

/// Transport coefficients at one time.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct UcgmCoefficients {
    pub alpha: f64,
    pub gamma: f64,
    pub alpha_hat: f64,
    pub gamma_hat: f64,
    pub denom: f64,
}

/// Sampler settings on a uniform time grid.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct UcgmSamplerConfig {
    pub steps: u32,
    /// 1 or 2.
    pub order: u8,
    pub kappa: f64,
    pub rho_policy: UcgmRhoPolicy,
    pub rho: f64,
}

/// Opaque trained estimator.
pub struct UcgmModel {
    inner: Mlp,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(UcgmStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::TimeOutOfRange(_) | Error::InvalidParameter(_) => UcgmStatus::InvalidArgument,
            Error::DimensionMismatch { .. } => UcgmStatus::DimensionMismatch,
            Error::SingularCoefficients { .. } => UcgmStatus::Singular,
            Error::NonFinite(_) => UcgmStatus::NonFinite,
            Error::Format(_) => UcgmStatus::Format,
            Error::Config(_) => UcgmStatus::Config,
            Error::Io(_) => UcgmStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn fail<T>(status: UcgmStatus, msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, msg.into()))
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> UcgmStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error("");
            UcgmStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            UcgmStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return fail(UcgmStatus::NullPointer, format!("{what} is null"));
    }
    CStr::from_ptr(p).to_str().or_else(|_| fail(UcgmStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return fail(UcgmStatus::NullPointer, format!("{what} is null"));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, need: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return fail(UcgmStatus::NullPointer, format!("{what} is null"));
    }
    if len < need {
        return fail(UcgmStatus::BufferTooSmall, format!("{what} holds {len} values, {need} needed"));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

unsafe fn model<'a>(m: *const UcgmModel) -> Result<&'a Mlp, Failure> {
    if m.is_null() {
        return fail(UcgmStatus::NullPointer, "model is null");
    }
    Ok(&(*m).inner)
}

unsafe fn store_model(out: *mut *mut UcgmModel, inner: Mlp) {
    *out = Box::into_raw(Box::new(UcgmModel { inner }));
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<T, Failure> {
    s.parse::<T>().map_err(Failure::from)
}

fn cond_of(cond: i64) -> Option<usize> {
    usize::try_from(cond).ok()
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ucgm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the buffer size the full message needs.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ucgm_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n - 1) = 0;
        }
        bytes.len()
    })
}

/// Coefficients of a transport family (`linear`, `relinear`, `trigflow`,
/// `edm`, `triglinear`, `random`) at time `t`.
///
/// # Safety
/// `family` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ucgm_transport_coefficients(family: *const c_char, t: f64, out: *mut UcgmCoefficients) -> UcgmStatus {
    guard(|| {
        let tr: Transport = parse(text(family, "family")?)?;
        if out.is_null() {
            return fail(UcgmStatus::NullPointer, "out is null");
        }
        let c = tr.coefficients(t)?;
        *out = UcgmCoefficients { alpha: c.alpha, gamma: c.gamma, alpha_hat: c.alpha_hat, gamma_hat: c.gamma_hat, denom: c.denom };
        Ok(())
    })
}

/// Randomly initialized estimator with `n_hidden` hidden layers of the given
/// widths. `classes` is 0 for an unconditional model.
///
/// # Safety
/// `hidden` must point to `n_hidden` values and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ucgm_model_init(
    dim: usize,
    hidden: *const usize,
    n_hidden: usize,
    classes: usize,
    seed: u64,
    out: *mut *mut UcgmModel,
) -> UcgmStatus {
    guard(|| {
        if out.is_null() || (hidden.is_null() && n_hidden > 0) {
            return fail(UcgmStatus::NullPointer, "hidden or out is null");
        }
        let widths = if n_hidden == 0 { Vec::new() } else { std::slice::from_raw_parts(hidden, n_hidden).to_vec() };
        let net = Mlp::init(&MlpConfig::new(dim, widths, classes), seed)?;
        store_model(out, net);
        Ok(())
    })
}

/// Loads a weight file. `activation` is `silu`, `tanh` or null for silu.
///
/// # Safety
/// `path` must be a NUL-terminated string, `activation` null or one, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ucgm_model_load(path: *const c_char, activation: *const c_char, out: *mut *mut UcgmModel) -> UcgmStatus {
    guard(|| {
        let path = text(path, "path")?;
        let act: Activation = if activation.is_null() { Activation::Silu } else { parse(text(activation, "activation")?)? };
        if out.is_null() {
            return fail(UcgmStatus::NullPointer, "out is null");
        }
        store_model(out, Mlp::load(path, act)?);
        Ok(())
    })
}

/// Writes the model's weights to `path`.
///
/// # Safety
/// `model` must come from this library and `path` be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ucgm_model_save(model_ptr: *const UcgmModel, path: *const c_char) -> UcgmStatus {
    guard(|| {
        let net = model(model_ptr)?;
        net.save(text(path, "path")?)?;
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must be null or a handle from this library that was not freed yet.
#[no_mangle]
pub unsafe extern "C" fn ucgm_model_free(model_ptr: *mut UcgmModel) {
    if !model_ptr.is_null() {
        drop(Box::from_raw(model_ptr));
    }
}

/// Data dimension of a model, or 0 for null.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ucgm_model_dim(model_ptr: *const UcgmModel) -> usize {
    model(model_ptr).map_or(0, |m| m.dim())
}

/// Network output `F(x_t, t, c)`. A negative `cond` means unconditional.
///
/// # Safety
/// `x` must hold `dim` values and `out` `out_len` writable values.
#[no_mangle]
pub unsafe extern "C" fn ucgm_model_forward(
    model_ptr: *const UcgmModel,
    x: *const f64,
    dim: usize,
    t: f64,
    cond: i64,
    out: *mut f64,
    out_len: usize,
) -> UcgmStatus {
    guard(|| {
        let net = model(model_ptr)?;
        let x = slice(x, dim, "x")?;
        let f = net.forward(x, t, cond_of(cond))?;
        slice_mut(out, out_len, f.len(), "out")?.copy_from_slice(&f);
        Ok(())
    })
}

/// Default sampler settings: 64 steps, first order, kappa 0.4, no fresh noise.
#[no_mangle]
pub extern "C" fn ucgm_sampler_config_default() -> UcgmSamplerConfig {
    UcgmSamplerConfig { steps: 64, order: 1, kappa: 0.4, rho_policy: UcgmRhoPolicy::Constant, rho: 0.0 }
}

/// Draws `n` samples (row-major, `n * dim` values) with `model` as both the
/// evaluation and correction network.
///
/// # Safety
/// `model` must be live, `family` and `config` valid, `out` must hold `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn ucgm_sample(
    model_ptr: *const UcgmModel,
    family: *const c_char,
    config: *const UcgmSamplerConfig,
    n: usize,
    seed: u64,
    cond: i64,
    out: *mut f64,
    out_len: usize,
) -> UcgmStatus {
    guard(|| {
        let net = model(model_ptr)?;
        let tr: Transport = parse(text(family, "family")?)?;
        if config.is_null() {
            return fail(UcgmStatus::NullPointer, "config is null");
        }
        let c = *config;
        let rho = match c.rho_policy {
            UcgmRhoPolicy::Constant => RhoPolicy::Constant(c.rho),
            UcgmRhoPolicy::Sde => RhoPolicy::Sde,
            UcgmRhoPolicy::SdeSquared => RhoPolicy::SdeSquared,
        };
        let sampler = SamplerConfig { steps: c.steps as usize, order: c.order, kappa: c.kappa, rho, schedule: ScheduleSpec::Uniform };
        let d = net.dim();
        let dst = slice_mut(out, out_len, n * d, "out")?;
        let samples = sample_many(net, net, &sampler, tr, n, cond_of(cond), seed)?;
        for (row, s) in dst.chunks_mut(d).zip(&samples) {
            row.copy_from_slice(s);
        }
        Ok(())
    })
}

/// Trains from configuration text (the `key = value` run format) and returns
/// the EMA model. When `shift`/`scale` are non-null they receive the per-axis
/// standardizer, so raw samples are `x * scale + shift`.
///
/// # Safety
/// `config_text` must be a NUL-terminated string, `out` valid, and `shift`/`scale`
/// null or holding `axes` writable values.
#[no_mangle]
pub unsafe extern "C" fn ucgm_train(
    config_text: *const c_char,
    out: *mut *mut UcgmModel,
    shift: *mut f64,
    scale: *mut f64,
    axes: usize,
) -> UcgmStatus {
    guard(|| {
        let cfg = RunConfig::parse(text(config_text, "config_text")?)?;
        if out.is_null() {
            return fail(UcgmStatus::NullPointer, "out is null");
        }
        let seed = cfg.seed()?;
        let trainer = cfg.trainer(seed)?;
        let (kind, size) = cfg.dataset()?;
        let mut data = make_dataset(kind, size, seed)?;
        if !cfg.conditional()? {
            data = data.without_labels();
        }
        let d = data.dim();
        let shift = if shift.is_null() { None } else { Some(slice_mut(shift, axes, d, "shift")?) };
        let scale = if scale.is_null() { None } else { Some(slice_mut(scale, axes, d, "scale")?) };
        let outcome = train(&trainer, &data, None)?;
        if let Some(s) = shift {
            s.copy_from_slice(&data.standardizer.shift);
        }
        if let Some(s) = scale {
            s.copy_from_slice(&data.standardizer.scale);
        }
        store_model(out, outcome.ema);
        Ok(())
    })
}

/// Wasserstein-1 distance between two 1D sample sets.
///
/// # Safety
/// `a` and `b` must hold `na` and `nb` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ucgm_wasserstein1(a: *const f64, na: usize, b: *const f64, nb: usize, seed: u64, out: *mut f64) -> UcgmStatus {
    guard(|| {
        let (a, b) = (slice(a, na, "a")?, slice(b, nb, "b")?);
        let v = wasserstein1_1d(a, b, seed)?;
        *slice_mut(out, 1, 1, "out")?.first_mut().unwrap() = v;
        Ok(())
    })
}

/// Energy distance between two row-major sample sets of dimension `dim`.
///
/// # Safety
/// `a` and `b` must hold `na * dim` and `nb * dim` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ucgm_energy_distance(
    a: *const f64,
    na: usize,
    b: *const f64,
    nb: usize,
    dim: usize,
    seed: u64,
    out: *mut f64,
) -> UcgmStatus {
    guard(|| {
        if dim == 0 {
            return fail(UcgmStatus::InvalidArgument, "dim must be positive");
        }
        let rows = |p: &[f64]| -> Vec<Vec<f64>> { p.chunks(dim).map(<[f64]>::to_vec).collect() };
        let (a, b) = (slice(a, na * dim, "a")?, slice(b, nb * dim, "b")?);
        let v = energy_distance(&rows(a), &rows(b), seed)?;
        *slice_mut(out, 1, 1, "out")?.first_mut().unwrap() = v;
        Ok(())
    })
}

/// `F0^{-1}(Phi(x1))` for the equal-weight mixture `N(-m, sigma^2)`, `N(m, sigma^2)`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ucgm_bimodal_quantile_transport(m: f64, sigma: f64, x1: f64, out: *mut f64) -> UcgmStatus {
    guard(|| {
        let mix = GaussianMixture::bimodal(m, sigma)?;
        let v = quantile_transport(x1, &mix)?;
        *slice_mut(out, 1, 1, "out")?.first_mut().unwrap() = v;
        Ok(())
    })
}
