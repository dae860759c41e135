use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use ucgm::data::{make_dataset, DatasetKind};
use ucgm::metrics::{connected_components, energy_distance, wasserstein1_1d};

fn normals(n: usize, mean: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = Normal::new(mean, 1.0).unwrap();
    (0..n).map(|_| d.sample(&mut rng)).collect()
}

#[test]
fn standardized_bimodal_is_centered() {
    let data = make_dataset(DatasetKind::Bimodal { m: 2.0, sigma: 0.3 }, 100_000, 1).unwrap();
    let mean = data.samples.iter().map(|v| v[0]).sum::<f64>() / data.len() as f64;
    let var = data.samples.iter().map(|v| (v[0] - mean).powi(2)).sum::<f64>() / data.len() as f64;
    assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-9);
    // Raw-space scale of the mixture: sqrt(m^2 + sigma^2).
    assert!((data.standardizer.scale[0] - (4.0f64 + 0.09).sqrt()).abs() < 0.02);
}

#[test]
fn datasets_are_reproducible() {
    for kind in ["two_moons:0.05", "s_curve:0.05", "swiss_roll:0.05", "bimodal:2,0.3"] {
        let k: DatasetKind = kind.parse().unwrap();
        let a = make_dataset(k.clone(), 500, 9).unwrap();
        let b = make_dataset(k.clone(), 500, 9).unwrap();
        assert_eq!(a.samples, b.samples, "{kind}");
        assert_ne!(a.samples, make_dataset(k, 500, 10).unwrap().samples, "{kind}");
    }
}

#[test]
fn w1_of_shifted_gaussians_is_the_shift() {
    let w = wasserstein1_1d(&normals(100_000, 0.0, 1), &normals(100_000, 1.0, 2), 0).unwrap();
    assert!((w - 1.0).abs() < 0.02, "{w}");
}

#[test]
fn energy_distance_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = Normal::new(0.0, 1.0).unwrap();
    let cloud: Vec<Vec<f64>> = (0..4096).map(|_| vec![n.sample(&mut rng), n.sample(&mut rng)]).collect();
    assert!(energy_distance(&cloud, &cloud, 0).unwrap().abs() < 1e-3);
    for sep in [20.0, 50.0] {
        let far: Vec<Vec<f64>> = cloud.iter().map(|p| vec![p[0] + sep, p[1]]).collect();
        let e = energy_distance(&cloud, &far, 0).unwrap();
        assert!((e / (2.0 * sep) - 1.0).abs() < 0.1, "sep {sep}: {e}");
    }
}

#[test]
fn two_moons_form_two_components() {
    let data = make_dataset(DatasetKind::TwoMoons { noise: 0.05 }, 2000, 3).unwrap();
    assert_eq!(connected_components(&data.raw(), 0.15), 2);
}
