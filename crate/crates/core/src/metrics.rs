//! Sample-based distances between distributions.

use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};

/// Largest number of points per side used by [`energy_distance`].
pub const ENERGY_CAP: usize = 4096;

fn subsample<'a>(v: &'a [Vec<f64>], n: usize, seed: u64) -> Vec<&'a [f64]> {
    if v.len() <= n {
        return v.iter().map(|x| x.as_slice()).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample_indices(&mut rng, v.len(), n).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| v[i].as_slice()).collect()
}

/// Empirical W1 of two 1D samples: mean absolute difference of sorted values.
/// The longer sample is subsampled without replacement (seeded).
pub fn wasserstein1_1d(a: &[f64], b: &[f64], seed: u64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("W1 needs two nonempty samples"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("W1 input".into()));
    }
    let n = a.len().min(b.len());
    let pick = |v: &[f64]| -> Vec<f64> {
        if v.len() == n {
            return v.to_vec();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sample_indices(&mut rng, v.len(), n).into_iter().map(|i| v[i]).collect()
    };
    let mut x = pick(a);
    let mut y = pick(b);
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    Ok(x.iter().zip(&y).map(|(p, q)| (p - q).abs()).sum::<f64>() / n as f64)
}

fn mean_pair_distance(a: &[&[f64]], b: &[&[f64]]) -> f64 {
    // Row sums in parallel, then a fixed-order total.
    let rows: Vec<f64> = a
        .par_iter()
        .map(|p| {
            b.iter()
                .map(|q| p.iter().zip(q.iter()).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt())
                .sum::<f64>()
        })
        .collect();
    rows.iter().sum::<f64>() / (a.len() * b.len()) as f64
}

/// Energy distance `2 E|A - B| - E|A - A'| - E|B - B'|` (V-statistic form,
/// at most [`ENERGY_CAP`] points per side).
pub fn energy_distance(a: &[Vec<f64>], b: &[Vec<f64>], seed: u64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("energy distance needs two nonempty samples"));
    }
    let d = a[0].len();
    if a.iter().chain(b).any(|v| v.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: b.iter().chain(a).map(|v| v.len()).find(|&l| l != d).unwrap_or(d) });
    }
    let sa = subsample(a, ENERGY_CAP, seed);
    let sb = subsample(b, ENERGY_CAP, seed.wrapping_add(1));
    let ab = mean_pair_distance(&sa, &sb);
    let aa = mean_pair_distance(&sa, &sa);
    let bb = mean_pair_distance(&sb, &sb);
    Ok((2.0 * ab - aa - bb).max(0.0))
}

/// Number of connected components of the graph joining points closer than `radius`.
pub fn connected_components(points: &[Vec<f64>], radius: f64) -> usize {
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let r2 = radius * radius;
    let mut parent: Vec<usize> = (0..points.len()).collect();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d2: f64 = points[i].iter().zip(&points[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2 < r2 {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    (0..points.len()).filter(|&i| find(&mut parent, i) == i).count()
}
