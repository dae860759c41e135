use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use ucgm::data::{make_dataset, DatasetKind};
use ucgm::estimator::Mlp;
use ucgm::prediction::{interpolate, predict_x, target_field};
use ucgm::trainer::{
    batch_gradient, compute_target, delta_fx_consistency, delta_fx_consistency_naive, delta_fx_multistep, loss_and_grad,
    train, TrainState, TrainerConfig, TrainingBatch,
};
use ucgm::transport::Transport;

fn tiny_config(lambda: f64, transport: Transport) -> TrainerConfig {
    TrainerConfig { lambda, transport, hidden: vec![8, 8], batch_size: 4, seed: 17, ..TrainerConfig::default() }
}

fn batch(n: usize, dim: usize, times: &[f64], seed: u64) -> TrainingBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> Vec<f64> { (0..dim).map(|_| rng.sample(StandardNormal)).collect() };
    let x = (0..n).map(|_| normal()).collect();
    let z = (0..n).map(|_| normal()).collect();
    TrainingBatch { x, z, t: (0..n).map(|i| times[i % times.len()]).collect(), cond: vec![None; n] }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn fd_gradient(net: &Mlp, loss: impl Fn(&Mlp) -> f64) -> Vec<f64> {
    let h = 1e-6;
    let mut probe = net.clone();
    (0..net.num_params())
        .map(|i| {
            let base = probe.params()[i];
            probe.params_mut()[i] = base + h;
            let up = loss(&probe);
            probe.params_mut()[i] = base - h;
            let down = loss(&probe);
            probe.params_mut()[i] = base;
            (up - down) / (2.0 * h)
        })
        .collect()
}

#[test]
fn adjoint_matches_finite_differences_end_to_end() {
    for tr in [Transport::Linear, Transport::TrigFlow, Transport::Edm] {
        let cfg = tiny_config(0.0, tr);
        let state = TrainState::new(&cfg, 2, 0).unwrap();
        let b = batch(4, 2, &[0.2, 0.45, 0.7, 0.9], 3);
        let (_, grad, _) = batch_gradient(&state, &b, &cfg, None).unwrap();

        // Targets are stop-gradient quantities: freeze them at the current weights.
        let targets: Vec<Vec<f64>> = (0..4)
            .map(|i| {
                let c = tr.coefficients(b.t[i]).unwrap();
                let x_t = interpolate(&b.x[i], &b.z[i], &c).unwrap();
                let f = state.live.forward(&x_t, b.t[i], None).unwrap();
                let d = delta_fx_multistep(&f, &x_t, &c, &[], &b.x[i], &c, 0.0).unwrap();
                compute_target(&f, &d, &c, cfg.clip_bound).unwrap()
            })
            .collect();
        let loss = |net: &Mlp| -> f64 {
            (0..4)
                .map(|i| {
                    let c = tr.coefficients(b.t[i]).unwrap();
                    let x_t = interpolate(&b.x[i], &b.z[i], &c).unwrap();
                    let f = net.forward(&x_t, b.t[i], None).unwrap();
                    loss_and_grad(&f, &targets[i], b.t[i], 4).0
                })
                .sum()
        };
        let fd = fd_gradient(&state.live, loss);
        let scale = grad.iter().map(|g| g.abs()).fold(0.0, f64::max).max(1e-3);
        for (k, (g, n)) in grad.iter().zip(&fd).enumerate() {
            assert!((g - n).abs() / scale < 1e-6, "{tr} param {k}: analytic {g}, numeric {n}");
        }
    }
}

#[test]
fn gradient_is_parallel_to_difference_form() {
    // Single-time batches, no clipping, frozen second network: the implemented
    // gradient must point along the gradient of
    // (4 / tan t) || f^x(F(x_t), x_t, t) - f^x(F-(x_lt), x_lt, lt) ||^2.
    for (tr, lambda, t) in [(Transport::Linear, 0.5, 0.6), (Transport::TrigFlow, 0.25, 0.4), (Transport::Linear, 0.0, 0.3)] {
        let cfg = TrainerConfig { clip_bound: 1e12, ..tiny_config(lambda, tr) };
        let state = TrainState::new(&cfg, 2, 0).unwrap();
        let b = batch(6, 2, &[t], 9);
        let (_, grad, clip_rate) = batch_gradient(&state, &b, &cfg, None).unwrap();
        assert_eq!(clip_rate, 0.0);
        let frozen = state.live.clone();
        let c = tr.coefficients(t).unwrap();
        let cl = tr.coefficients(lambda * t).unwrap();
        let loss = |net: &Mlp| -> f64 {
            (0..6)
                .map(|i| {
                    let x_t = interpolate(&b.x[i], &b.z[i], &c).unwrap();
                    let now = predict_x(&net.forward(&x_t, t, None).unwrap(), &x_t, &c).unwrap();
                    let before = if lambda == 0.0 {
                        b.x[i].clone()
                    } else {
                        let x_l = interpolate(&b.x[i], &b.z[i], &cl).unwrap();
                        predict_x(&frozen.forward(&x_l, lambda * t, None).unwrap(), &x_l, &cl).unwrap()
                    };
                    let d2: f64 = now.iter().zip(&before).map(|(a, b)| (a - b) * (a - b)).sum();
                    4.0 / t.tan() * d2 / 6.0
                })
                .sum()
        };
        let fd = fd_gradient(&state.live, loss);
        let cos = cosine(&grad, &fd);
        assert!(cos > 0.999, "{tr} lambda {lambda}: cosine {cos}");
        // The implemented gradient is the difference-form gradient divided by (t - lambda t).
        let ratio = fd.iter().map(|v| v * v).sum::<f64>().sqrt() / grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((ratio - (t - lambda * t)).abs() < 1e-4, "ratio {ratio}");
    }
}

#[test]
fn lambda_zero_matches_direct_field_regression() {
    for tr in [Transport::Linear, Transport::TrigFlow, Transport::Edm, Transport::Random] {
        let t = 0.55;
        let cfg = TrainerConfig { clip_bound: 1e12, ..tiny_config(0.0, tr) };
        let state = TrainState::new(&cfg, 2, 0).unwrap();
        let b = batch(8, 2, &[t], 21);
        let (_, grad, _) = batch_gradient(&state, &b, &cfg, None).unwrap();
        let c = tr.coefficients(t).unwrap();
        let direct = |net: &Mlp| -> f64 {
            (0..8)
                .map(|i| {
                    let x_t = interpolate(&b.x[i], &b.z[i], &c).unwrap();
                    let f = net.forward(&x_t, t, None).unwrap();
                    let y = target_field(&b.x[i], &b.z[i], &c).unwrap();
                    f.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
                })
                .sum()
        };
        let cos = cosine(&grad, &fd_gradient(&state.live, direct));
        assert!(cos > 0.99, "{tr}: cosine {cos}");
    }
}

#[test]
fn lambda_one_uses_shifted_interpolants() {
    let tr = Transport::Linear;
    let cfg = TrainerConfig { clip_bound: 1e12, ..tiny_config(1.0, tr) };
    let state = TrainState::new(&cfg, 2, 0).unwrap();
    let t = 0.4;
    let b = batch(1, 2, &[t], 5);
    let (_, grad, _) = batch_gradient(&state, &b, &cfg, None).unwrap();

    let net = &state.live;
    let eps = cfg.epsilon;
    let (c, cp, cm) = (tr.coefficients(t).unwrap(), tr.coefficients(t + eps).unwrap(), tr.coefficients(t - eps).unwrap());
    let (x, z) = (&b.x[0], &b.z[0]);
    let x_t = interpolate(x, z, &c).unwrap();
    let (xp, xm) = (interpolate(x, z, &cp).unwrap(), interpolate(x, z, &cm).unwrap());
    let f = net.forward(&x_t, t, None).unwrap();
    let d = delta_fx_consistency(
        &net.forward(&xp, t + eps, None).unwrap(),
        &xp,
        &cp,
        &net.forward(&xm, t - eps, None).unwrap(),
        &xm,
        &cm,
        eps,
    )
    .unwrap();
    let target = compute_target(&f, &d, &c, cfg.clip_bound).unwrap();
    let (_, adj) = loss_and_grad(&f, &target, t, 1);
    let (_, cache) = net.forward_cached(&x_t, t, None).unwrap();
    let mut expected = vec![0.0; net.num_params()];
    net.backward(&cache, &adj, &mut expected).unwrap();
    for (a, e) in grad.iter().zip(&expected) {
        assert!((a - e).abs() <= 1e-12 * e.abs().max(1.0), "{a} vs {e}");
    }
    // A different half-step changes the update.
    let other = TrainerConfig { epsilon: 0.02, ..cfg.clone() };
    let (_, grad2, _) = batch_gradient(&state, &b, &other, None).unwrap();
    assert_ne!(grad, grad2);
}

#[test]
fn scale_then_subtract_survives_low_precision() {
    // Linear transport, x_t = 0: f^x = -t F. Outputs near 1e-37 keep F normal in
    // 32-bit while the unscaled estimates t F fall into the subnormal range.
    let tr = Transport::Linear;
    let (t, eps) = (0.006, 0.005);
    let (cp, cm) = (tr.coefficients(t + eps).unwrap(), tr.coefficients(t - eps).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut err_naive, mut err_dist, mut gap) = (0.0, 0.0, 0.0);
    let trials = 2000;
    for _ in 0..trials {
        let fp = rng.random_range(1.0f32..2.0) * 1e-37;
        let wobble = 1.0 + rng.random_range(-1e-2f32..1e-2);
        let fm = fp * (cp.t / cm.t) as f32 * wobble;
        let reference = delta_fx_consistency(&[fp as f64], &[0.0], &cp, &[fm as f64], &[0.0], &cm, eps).unwrap()[0];
        let naive = delta_fx_consistency_naive(&[fp], &[0.0f32], &cp, &[fm], &[0.0f32], &cm, eps).unwrap()[0] as f64;
        let dist = delta_fx_consistency(&[fp], &[0.0f32], &cp, &[fm], &[0.0f32], &cm, eps).unwrap()[0] as f64;
        err_naive += ((naive - reference) / reference).abs();
        err_dist += ((dist - reference) / reference).abs();
        gap += ((naive - dist) / reference).abs();
    }
    let (err_naive, err_dist, gap) = (err_naive / trials as f64, err_dist / trials as f64, gap / trials as f64);
    assert!(gap > 1e-4, "forms agree too closely: {gap}");
    assert!(err_dist * 4.0 < err_naive, "distributive {err_dist} vs naive {err_naive}");
    // Both forms agree with the 64-bit reference in ordinary ranges.
    let naive = delta_fx_consistency_naive(&[0.7f32], &[0.2f32], &cp, &[0.69f32], &[0.21f32], &cm, eps).unwrap()[0];
    let dist = delta_fx_consistency(&[0.7f32], &[0.2f32], &cp, &[0.69f32], &[0.21f32], &cm, eps).unwrap()[0];
    assert!((naive - dist).abs() < 1e-3 * dist.abs().max(1.0));
}

#[test]
fn lambda_half_trains_without_divergence() {
    let data = make_dataset(DatasetKind::Bimodal { m: 2.0, sigma: 0.3 }, 5000, 2).unwrap().without_labels();
    let cfg = TrainerConfig { lambda: 0.5, steps: 300, batch_size: 64, hidden: vec![32, 32], seed: 8, ..TrainerConfig::default() };
    let out = train(&cfg, &data, None).unwrap();
    assert_eq!(out.log.len(), 300);
    assert!(out.log.iter().all(|r| r.loss.is_finite() && r.grad_norm.is_finite()));
    assert!(out.live.all_finite() && out.ema.all_finite());
}

#[test]
fn identical_seeds_give_identical_runs() {
    let data = make_dataset(DatasetKind::TwoMoons { noise: 0.05 }, 2000, 2).unwrap();
    let cfg = TrainerConfig { steps: 20, batch_size: 64, hidden: vec![16, 16], zeta: 0.3, seed: 1, ..TrainerConfig::default() };
    let a = train(&cfg, &data, None).unwrap();
    let b = train(&cfg, &data, None).unwrap();
    assert_eq!(a.live.params(), b.live.params());
    assert_eq!(a.ema.params(), b.ema.params());
    let c = train(&TrainerConfig { seed: 2, ..cfg }, &data, None).unwrap();
    assert_ne!(a.live.params(), c.live.params());
}

#[test]
fn teacher_guidance_runs() {
    let data = make_dataset(DatasetKind::TwoMoons { noise: 0.05 }, 2000, 2).unwrap();
    let cfg = TrainerConfig { steps: 10, batch_size: 32, hidden: vec![16, 16], zeta: 1.5, seed: 1, ..TrainerConfig::default() };
    let teacher = train(&cfg, &data, None).unwrap().ema;
    let out = train(&cfg, &data, Some(&teacher)).unwrap();
    assert!(out.log.iter().all(|r| r.loss.is_finite()));
    let wrong = Mlp::init(&ucgm::estimator::MlpConfig::new(1, vec![4], 0), 0).unwrap();
    assert!(train(&cfg, &data, Some(&wrong)).is_err());
}
