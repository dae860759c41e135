//! Small MLP estimator `F(x_t, t, c)` with analytic gradients, EMA shadow
//! weights and a portable binary weight format.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};

/// Number of sinusoidal time features (`sin`/`cos` of `2^k pi t`, `k = 0..7`).
pub const TIME_FEATURES: usize = 16;

const MAGIC: &[u8; 7] = b"UCGMW1\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Silu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Silu => z / (1.0 + (-z).exp()),
            Activation::Tanh => z.tanh(),
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Silu => {
                let s = 1.0 / (1.0 + (-z).exp());
                s * (1.0 + z * (1.0 - s))
            }
            Activation::Tanh => {
                let h = z.tanh();
                1.0 - h * h
            }
        }
    }
}

impl FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "silu" | "swish" => Ok(Activation::Silu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(invalid(format!("unknown activation '{other}'"))),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Silu => "silu",
            Activation::Tanh => "tanh",
        })
    }
}

/// Shape of an estimator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpConfig {
    pub dim: usize,
    pub hidden: Vec<usize>,
    /// Number of classes `C`; the condition table always has a null row on top.
    pub classes: usize,
    pub activation: Activation,
}

impl MlpConfig {
    pub fn new(dim: usize, hidden: Vec<usize>, classes: usize) -> Self {
        Self { dim, hidden, classes, activation: Activation::Silu }
    }

    /// Three hidden layers of 64 units.
    pub fn default_for(dim: usize, classes: usize) -> Self {
        Self::new(dim, vec![64; 3], classes)
    }

    fn layer_sizes(&self) -> Result<Vec<usize>> {
        if self.dim == 0 {
            return Err(invalid("estimator dimension must be positive"));
        }
        if self.hidden.is_empty() || self.hidden.iter().any(|&h| h == 0) {
            return Err(invalid(format!("invalid hidden widths {:?}", self.hidden)));
        }
        let mut sizes = vec![self.dim + TIME_FEATURES + self.classes + 1];
        sizes.extend(&self.hidden);
        sizes.push(self.dim);
        Ok(sizes)
    }
}

/// Multilayer perceptron with parameters stored in one flat buffer.
///
/// Each layer stores its weight matrix row-major (`rows = fan_out`) followed by
/// its bias. The condition table is the block of first-layer columns after the
/// state and time features; column `C` is the null condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    params: Vec<f64>,
    activation: Activation,
    dim: usize,
    classes: usize,
}

/// Activations recorded by a forward pass, consumed by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer (post-activation of the previous one).
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Vec<f64>>,
    cond_index: usize,
}

impl Mlp {
    pub fn init(config: &MlpConfig, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in 0..net.layers() {
            let (rows, cols) = (net.sizes[l + 1], net.sizes[l]);
            let bound = (1.0 / cols as f64).sqrt();
            let off = net.offsets[l];
            for w in &mut net.params[off..off + rows * cols] {
                *w = rng.random_range(-bound..bound);
            }
            // Biases start at zero.
        }
        Ok(net)
    }

    pub fn zeros(config: &MlpConfig) -> Result<Self> {
        let sizes = config.layer_sizes()?;
        Ok(Self::from_sizes(sizes, config.activation, config.dim, config.classes))
    }

    fn from_sizes(sizes: Vec<usize>, activation: Activation, dim: usize, classes: usize) -> Self {
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut total = 0;
        for w in sizes.windows(2) {
            offsets.push(total);
            total += w[1] * w[0] + w[1];
        }
        offsets.push(total);
        Self { sizes, offsets, params: vec![0.0; total], activation, dim, classes }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// `(rows, cols)` of each weight matrix.
    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.sizes.windows(2).map(|w| (w[1], w[0])).collect()
    }

    pub fn same_shape(&self, other: &Mlp) -> bool {
        self.sizes == other.sizes
    }

    fn cond_index(&self, cond: Option<usize>) -> Result<usize> {
        match cond {
            None => Ok(self.classes),
            Some(c) if c < self.classes => Ok(c),
            Some(c) => Err(invalid(format!("condition {c} out of range for {} classes", self.classes))),
        }
    }

    fn check_input(&self, x: &[f64], t: f64) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        if !t.is_finite() {
            return Err(Error::NonFinite(format!("time {t}")));
        }
        Ok(())
    }

    // Input vector without the one-hot block, which is handled as a column lookup.
    fn dense_input(&self, x: &[f64], t: f64) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim + TIME_FEATURES);
        v.extend_from_slice(x);
        for k in 0..TIME_FEATURES / 2 {
            let w = (k + 1) as f64 * std::f64::consts::FRAC_PI_2 * t;
            v.push(w.sin());
            v.push(w.cos());
        }
        v
    }

    fn affine(&self, l: usize, input: &[f64], cond_col: Option<usize>, out: &mut Vec<f64>) {
        let (rows, cols) = (self.sizes[l + 1], self.sizes[l]);
        let w = &self.params[self.offsets[l]..self.offsets[l] + rows * cols];
        let b = &self.params[self.offsets[l] + rows * cols..self.offsets[l + 1]];
        out.clear();
        for r in 0..rows {
            let row = &w[r * cols..(r + 1) * cols];
            let mut acc = b[r];
            for (wi, xi) in row.iter().zip(input) {
                acc += wi * xi;
            }
            if let Some(c) = cond_col {
                acc += row[c];
            }
            out.push(acc);
        }
    }

    pub fn forward(&self, x: &[f64], t: f64, cond: Option<usize>) -> Result<Vec<f64>> {
        self.forward_cached(x, t, cond).map(|(y, _)| y)
    }

    pub fn forward_cached(&self, x: &[f64], t: f64, cond: Option<usize>) -> Result<(Vec<f64>, ForwardCache)> {
        self.check_input(x, t)?;
        let cond_index = self.cond_index(cond)?;
        let mut inputs = Vec::with_capacity(self.layers());
        let mut pre = Vec::with_capacity(self.layers() - 1);
        let mut h = self.dense_input(x, t);
        let cond_col = self.dim + TIME_FEATURES + cond_index;
        for l in 0..self.layers() {
            let mut z = Vec::new();
            self.affine(l, &h, (l == 0).then_some(cond_col), &mut z);
            inputs.push(std::mem::take(&mut h));
            if l + 1 == self.layers() {
                h = z;
            } else {
                h = z.iter().map(|&v| self.activation.apply(v)).collect();
                pre.push(z);
            }
        }
        Ok((h, ForwardCache { inputs, pre, cond_index }))
    }

    /// Accumulates `d loss / d params` into `grad` given `adjoint = d loss / d output`.
    pub fn backward(&self, cache: &ForwardCache, adjoint: &[f64], grad: &mut [f64]) -> Result<()> {
        if grad.len() != self.params.len() {
            return Err(Error::DimensionMismatch { expected: self.params.len(), got: grad.len() });
        }
        if adjoint.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: adjoint.len() });
        }
        if cache.inputs.len() != self.layers()
            || cache.pre.len() + 1 != self.layers()
            || cache.inputs[0].len() != self.dim + TIME_FEATURES
        {
            return Err(invalid("forward cache does not belong to this network"));
        }
        let mut delta = adjoint.to_vec();
        for l in (0..self.layers()).rev() {
            let (rows, cols) = (self.sizes[l + 1], self.sizes[l]);
            let off = self.offsets[l];
            let input = &cache.inputs[l];
            {
                let (gw, gb) = grad[off..self.offsets[l + 1]].split_at_mut(rows * cols);
                for r in 0..rows {
                    let d = delta[r];
                    gb[r] += d;
                    let grow = &mut gw[r * cols..(r + 1) * cols];
                    for (g, xi) in grow.iter_mut().zip(input) {
                        *g += d * xi;
                    }
                    if l == 0 {
                        grow[self.dim + TIME_FEATURES + cache.cond_index] += d;
                    }
                }
            }
            if l == 0 {
                break;
            }
            let w = &self.params[off..off + rows * cols];
            let mut next = vec![0.0; cols];
            for r in 0..rows {
                let d = delta[r];
                for (n, wi) in next.iter_mut().zip(&w[r * cols..(r + 1) * cols]) {
                    *n += d * wi;
                }
            }
            for (n, z) in next.iter_mut().zip(&cache.pre[l - 1]) {
                *n *= self.activation.derivative(*z);
            }
            delta = next;
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|v| v.is_finite())
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.layers() as u64).to_le_bytes())?;
        for (rows, cols) in self.shapes() {
            w.write_all(&(rows as u64).to_le_bytes())?;
            w.write_all(&(cols as u64).to_le_bytes())?;
        }
        for v in &self.params {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Loads a weight file. The activation is not part of the format.
    pub fn load<P: AsRef<Path>>(path: P, activation: Activation) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(&mut std::io::BufReader::new(file), activation)
    }

    pub fn read_from<R: Read>(r: &mut R, activation: Activation) -> Result<Self> {
        let mut magic = [0u8; 7];
        read_exact(r, &mut magic, "magic")?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic bytes".into()));
        }
        let layers = read_u64(r, "layer count")?;
        if layers < 2 || layers > 1024 {
            return Err(Error::Format(format!("implausible layer count {layers}")));
        }
        let mut shapes = Vec::with_capacity(layers as usize);
        for _ in 0..layers {
            let rows = read_u64(r, "rows")? as usize;
            let cols = read_u64(r, "cols")? as usize;
            if rows == 0 || cols == 0 || rows > 1 << 20 || cols > 1 << 20 {
                return Err(Error::Format(format!("implausible layer shape {rows}x{cols}")));
            }
            shapes.push((rows, cols));
        }
        for pair in shapes.windows(2) {
            if pair[1].1 != pair[0].0 {
                return Err(Error::Format(format!("layer shapes do not chain: {:?}", shapes)));
            }
        }
        let dim = shapes[shapes.len() - 1].0;
        let first_cols = shapes[0].1;
        if first_cols < dim + TIME_FEATURES + 1 {
            return Err(Error::Format(format!("first layer too narrow for dimension {dim}")));
        }
        let classes = first_cols - dim - TIME_FEATURES - 1;
        let mut sizes = vec![first_cols];
        sizes.extend(shapes.iter().map(|s| s.0));
        let mut net = Self::from_sizes(sizes, activation, dim, classes);
        let mut buf = [0u8; 8];
        for v in net.params.iter_mut() {
            read_exact(r, &mut buf, "parameters")?;
            *v = f64::from_le_bytes(buf);
        }
        let mut extra = [0u8; 1];
        if r.read(&mut extra)? != 0 {
            return Err(Error::Format("trailing bytes after parameters".into()));
        }
        if !net.all_finite() {
            return Err(Error::Format("non-finite parameters".into()));
        }
        Ok(net)
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format(format!("truncated weight file while reading {what}")),
        _ => Error::Io(e),
    })
}

fn read_u64<R: Read>(r: &mut R, what: &str) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}

/// Exponential moving average of estimator weights.
#[derive(Debug, Clone, PartialEq)]
pub struct EmaState {
    shadow: Mlp,
    decay: f64,
    warmup: bool,
    updates: u64,
}

impl EmaState {
    pub fn new(live: &Mlp, decay: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&decay) {
            return Err(invalid(format!("EMA decay must lie in [0, 1], got {decay}")));
        }
        Ok(Self { shadow: live.clone(), decay, warmup: false, updates: 0 })
    }

    /// Ramps the decay as `min(decay, (1 + n) / (10 + n))` over the first updates.
    pub fn with_warmup(mut self, warmup: bool) -> Self {
        self.warmup = warmup;
        self
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Decay used by the next update.
    pub fn current_decay(&self) -> f64 {
        if self.warmup {
            let n = self.updates as f64;
            self.decay.min((1.0 + n) / (10.0 + n))
        } else {
            self.decay
        }
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn shadow(&self) -> &Mlp {
        &self.shadow
    }

    pub fn shadow_mut(&mut self) -> &mut Mlp {
        &mut self.shadow
    }

    pub fn into_shadow(self) -> Mlp {
        self.shadow
    }

    /// `shadow <- decay * shadow + (1 - decay) * live`.
    pub fn update(&mut self, live: &Mlp) -> Result<()> {
        if !self.shadow.same_shape(live) {
            return Err(invalid("EMA shadow and live weights differ in shape"));
        }
        let d = self.current_decay();
        for (s, l) in self.shadow.params.iter_mut().zip(&live.params) {
            *s = d * *s + (1.0 - d) * l;
        }
        self.updates += 1;
        Ok(())
    }
}
