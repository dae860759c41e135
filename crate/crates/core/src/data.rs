//! Synthetic datasets, standardized per axis.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::oracle::GaussianMixture;

/// Generator of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetKind {
    TwoMoons { noise: f64 },
    SCurve { noise: f64 },
    SwissRoll { noise: f64 },
    /// `N(-m, sigma^2)` and `N(m, sigma^2)` with equal weights.
    Bimodal { m: f64, sigma: f64 },
    /// One-dimensional mixture given as `(weight, mean, sigma)` triples.
    Gmm(Vec<(f64, f64, f64)>),
}

impl DatasetKind {
    pub fn dim(&self) -> usize {
        match self {
            DatasetKind::TwoMoons { .. } | DatasetKind::SCurve { .. } | DatasetKind::SwissRoll { .. } => 2,
            DatasetKind::Bimodal { .. } | DatasetKind::Gmm(_) => 1,
        }
    }

    /// Number of labels carried by the samples (0 when unlabeled).
    pub fn classes(&self) -> usize {
        match self {
            DatasetKind::TwoMoons { .. } | DatasetKind::Bimodal { .. } => 2,
            DatasetKind::Gmm(c) => c.len(),
            _ => 0,
        }
    }

    /// The generating law in raw coordinates, when it is a Gaussian mixture.
    pub fn mixture(&self) -> Option<GaussianMixture> {
        match self {
            DatasetKind::Bimodal { m, sigma } => GaussianMixture::bimodal(*m, *sigma).ok(),
            DatasetKind::Gmm(c) => GaussianMixture::new(
                c.iter().map(|p| p.0).collect(),
                c.iter().map(|p| vec![p.1]).collect(),
                c.iter().map(|p| vec![vec![p.2 * p.2]]).collect(),
            )
            .ok(),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            DatasetKind::TwoMoons { noise } | DatasetKind::SCurve { noise } | DatasetKind::SwissRoll { noise } => {
                *noise >= 0.0 && noise.is_finite()
            }
            DatasetKind::Bimodal { m, sigma } => m.is_finite() && *sigma > 0.0,
            DatasetKind::Gmm(c) => {
                !c.is_empty()
                    && c.iter().all(|(w, m, s)| *w > 0.0 && m.is_finite() && *s > 0.0)
                    && (c.iter().map(|p| p.0).sum::<f64>() - 1.0).abs() < 1e-9
            }
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("invalid dataset parameters {self}")))
        }
    }

    // One raw draw and its label.
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, Option<usize>) {
        match self {
            DatasetKind::TwoMoons { noise } => {
                let upper = rng.random_bool(0.5);
                let theta = rng.random_range(0.0..PI);
                let (x, y) = if upper { (theta.cos(), theta.sin()) } else { (1.0 - theta.cos(), 0.5 - theta.sin()) };
                let (nx, ny) = (rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal));
                (vec![x + noise * nx, y + noise * ny], Some(usize::from(!upper)))
            }
            DatasetKind::SCurve { noise } => {
                let t = 3.0 * PI * (rng.random::<f64>() - 0.5);
                let (nx, ny) = (rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal));
                (vec![t.sin() + noise * nx, t.signum() * (t.cos() - 1.0) + noise * ny], None)
            }
            DatasetKind::SwissRoll { noise } => {
                let t = 1.5 * PI * (1.0 + 2.0 * rng.random::<f64>());
                let (nx, ny) = (rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal));
                (vec![t * t.cos() + noise * nx, t * t.sin() + noise * ny], None)
            }
            DatasetKind::Bimodal { m, sigma } => {
                let right = rng.random_bool(0.5);
                let center = if right { *m } else { -m };
                (vec![center + sigma * rng.sample::<f64, _>(StandardNormal)], Some(usize::from(right)))
            }
            DatasetKind::Gmm(c) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut j = c.len() - 1;
                for (k, p) in c.iter().enumerate() {
                    acc += p.0;
                    if u < acc {
                        j = k;
                        break;
                    }
                }
                (vec![c[j].1 + c[j].2 * rng.sample::<f64, _>(StandardNormal)], Some(j))
            }
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetKind::TwoMoons { noise } => write!(f, "two_moons:{noise}"),
            DatasetKind::SCurve { noise } => write!(f, "s_curve:{noise}"),
            DatasetKind::SwissRoll { noise } => write!(f, "swiss_roll:{noise}"),
            DatasetKind::Bimodal { m, sigma } => write!(f, "bimodal:{m},{sigma}"),
            DatasetKind::Gmm(c) => {
                let parts: Vec<String> = c.iter().map(|(w, m, s)| format!("{w}/{m}/{s}")).collect();
                write!(f, "gmm:{}", parts.join(","))
            }
        }
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    /// `two_moons:0.05`, `s_curve:0.05`, `swiss_roll:0.5`, `bimodal:2,0.3`,
    /// `gaussian:0,1` or `gmm:w/m/s,w/m/s`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, body) = s.split_once(':').unwrap_or((s, ""));
        let nums = |body: &str| -> Result<Vec<f64>> {
            body.split(',')
                .filter(|p| !p.trim().is_empty())
                .map(|p| p.trim().parse::<f64>().map_err(|_| invalid(format!("bad number '{p}' in dataset '{s}'"))))
                .collect()
        };
        let one = |default: f64| -> Result<f64> {
            let v = nums(body)?;
            match v.len() {
                0 => Ok(default),
                1 => Ok(v[0]),
                _ => Err(invalid(format!("dataset '{s}' takes one parameter"))),
            }
        };
        let kind = match name.to_ascii_lowercase().replace('-', "_").as_str() {
            "two_moons" | "moons" => DatasetKind::TwoMoons { noise: one(0.05)? },
            "s_curve" => DatasetKind::SCurve { noise: one(0.05)? },
            "swiss_roll" => DatasetKind::SwissRoll { noise: one(0.5)? },
            "bimodal" => {
                let v = nums(body)?;
                match v.as_slice() {
                    [] => DatasetKind::Bimodal { m: 2.0, sigma: 0.3 },
                    [m, sigma] => DatasetKind::Bimodal { m: *m, sigma: *sigma },
                    _ => return Err(invalid("bimodal takes m,sigma")),
                }
            }
            "gaussian" => {
                let v = nums(body)?;
                match v.as_slice() {
                    [] => DatasetKind::Gmm(vec![(1.0, 0.0, 1.0)]),
                    [mu, sigma] => DatasetKind::Gmm(vec![(1.0, *mu, *sigma)]),
                    _ => return Err(invalid("gaussian takes mu,sigma")),
                }
            }
            "gmm" => {
                let comps = body
                    .split(',')
                    .map(|c| {
                        let p: Vec<&str> = c.split('/').collect();
                        if p.len() != 3 {
                            return Err(invalid(format!("gmm component '{c}' must be w/m/s")));
                        }
                        let f = |v: &str| v.trim().parse::<f64>().map_err(|_| invalid(format!("bad number '{v}'")));
                        Ok((f(p[0])?, f(p[1])?, f(p[2])?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                DatasetKind::Gmm(comps)
            }
            other => return Err(invalid(format!("unknown dataset '{other}'"))),
        };
        kind.validate()?;
        Ok(kind)
    }
}

/// Per-axis affine map `standardized = (raw - shift) / scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self { shift: vec![0.0; dim], scale: vec![1.0; dim] }
    }

    pub fn fit(samples: &[Vec<f64>]) -> Result<Self> {
        let n = samples.len();
        if n == 0 {
            return Err(invalid("cannot standardize an empty sample"));
        }
        let d = samples[0].len();
        let mut shift = vec![0.0; d];
        for s in samples {
            for k in 0..d {
                shift[k] += s[k];
            }
        }
        shift.iter_mut().for_each(|m| *m /= n as f64);
        let mut scale = vec![0.0; d];
        for s in samples {
            for k in 0..d {
                scale[k] += (s[k] - shift[k]).powi(2);
            }
        }
        for v in scale.iter_mut() {
            *v = (*v / n as f64).sqrt();
            if !(*v > 0.0) {
                *v = 1.0;
            }
        }
        Ok(Self { shift, scale })
    }

    pub fn forward(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter().zip(&self.shift).zip(&self.scale).map(|((x, m), s)| (x - m) / s).collect()
    }

    pub fn inverse(&self, standardized: &[f64]) -> Vec<f64> {
        standardized.iter().zip(&self.shift).zip(&self.scale).map(|((x, m), s)| x * s + m).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub kind: DatasetKind,
    pub seed: u64,
    /// Standardized samples.
    pub samples: Vec<Vec<f64>>,
    pub labels: Option<Vec<usize>>,
    pub standardizer: Standardizer,
}

impl Dataset {
    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    /// Label count seen by the estimator; 0 once labels are dropped.
    pub fn classes(&self) -> usize {
        if self.labels.is_some() {
            self.kind.classes()
        } else {
            0
        }
    }

    /// The same samples with labels removed, for unconditional training.
    pub fn without_labels(mut self) -> Self {
        self.labels = None;
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn raw(&self) -> Vec<Vec<f64>> {
        self.samples.iter().map(|s| self.standardizer.inverse(s)).collect()
    }

    /// Fresh draws from the same law mapped through this dataset's standardizer.
    pub fn reference(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.standardizer.forward(&self.kind.draw(&mut rng).0)).collect()
    }
}

/// Draws `n` samples and standardizes them to zero mean and unit variance per axis.
pub fn make_dataset(kind: DatasetKind, n: usize, seed: u64) -> Result<Dataset> {
    kind.validate()?;
    if n == 0 {
        return Err(invalid("dataset needs at least one sample"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (raw, labels): (Vec<Vec<f64>>, Vec<Option<usize>>) = (0..n).map(|_| kind.draw(&mut rng)).unzip();
    let standardizer = Standardizer::fit(&raw)?;
    let samples = raw.iter().map(|s| standardizer.forward(s)).collect();
    let labels = labels.into_iter().collect::<Option<Vec<usize>>>();
    Ok(Dataset { kind, seed, samples, labels, standardizer })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardized_moments() {
        let d = make_dataset(DatasetKind::Bimodal { m: 2.0, sigma: 0.3 }, 100_000, 1).unwrap();
        let mean = d.samples.iter().map(|s| s[0]).sum::<f64>() / d.len() as f64;
        let var = d.samples.iter().map(|s| s[0] * s[0]).sum::<f64>() / d.len() as f64;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_given_seed() {
        let a = make_dataset(DatasetKind::TwoMoons { noise: 0.05 }, 500, 3).unwrap();
        let b = make_dataset(DatasetKind::TwoMoons { noise: 0.05 }, 500, 3).unwrap();
        assert_eq!(a.samples, b.samples);
        let c = make_dataset(DatasetKind::TwoMoons { noise: 0.05 }, 500, 4).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn standardization_inverts() {
        for kind in ["two_moons:0.05", "s_curve:0.1", "swiss_roll:0.5", "bimodal:2,0.3", "gmm:0.3/-1/0.5,0.7/2/0.2"] {
            let kind: DatasetKind = kind.parse().unwrap();
            let d = make_dataset(kind.clone(), 1000, 9).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            for (s, _) in d.samples.iter().zip(0..) {
                let raw = kind.draw(&mut rng).0;
                for (a, b) in d.standardizer.inverse(s).iter().zip(&raw) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn two_moons_has_two_components() {
        let d = make_dataset(DatasetKind::TwoMoons { noise: 0.05 }, 2000, 5).unwrap();
        let raw = d.raw();
        // Single-linkage components at a radius far below the gap between the arcs.
        let n = raw.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        let radius = 0.15;
        for i in 0..n {
            for j in i + 1..n {
                let d2 = (raw[i][0] - raw[j][0]).powi(2) + (raw[i][1] - raw[j][1]).powi(2);
                if d2 < radius * radius {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a] = b;
                }
            }
        }
        let mut roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
        roots.sort_unstable();
        roots.dedup();
        assert_eq!(roots.len(), 2);
        // Components coincide with the generator labels.
        let labels = d.labels.as_ref().unwrap();
        let r0 = find(&mut parent, labels.iter().position(|&l| l == 0).unwrap());
        for i in 0..n {
            assert_eq!(find(&mut parent, i) == r0, labels[i] == 0);
        }
    }

    #[test]
    fn parsing() {
        assert_eq!("bimodal:2,0.3".parse::<DatasetKind>().unwrap(), DatasetKind::Bimodal { m: 2.0, sigma: 0.3 });
        assert_eq!("gaussian:0,1".parse::<DatasetKind>().unwrap(), DatasetKind::Gmm(vec![(1.0, 0.0, 1.0)]));
        assert!("bimodal:2,-1".parse::<DatasetKind>().is_err());
        assert!("spiral".parse::<DatasetKind>().is_err());
        assert!(make_dataset(DatasetKind::TwoMoons { noise: 0.05 }, 0, 1).is_err());
        for s in ["two_moons:0.05", "gmm:0.5/-1/0.2,0.5/1/0.2", "bimodal:2,0.3"] {
            let k: DatasetKind = s.parse().unwrap();
            assert_eq!(k.to_string().parse::<DatasetKind>().unwrap(), k);
        }
    }
}
