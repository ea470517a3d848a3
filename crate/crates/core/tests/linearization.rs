use kdntk::kernel::empirical_ntk_gram;
use kdntk::linalg::KernelMatrix;
use kdntk::network::{
    forward_batch, forward_trace, init_params, linear_logits, stack_inputs, train_linearized, vjp, Batch, DeltaRole,
    LinearData, LinearLoss, NetConfig, Optimizer, TrainConfig, WeightDelta,
};
use kdntk::rng;
use kdntk::tasks::{sample_inputs, INPUT_STD};
use rand::Rng;
use rand_distr::StandardNormal;

fn largest_eigenvalue(k: &KernelMatrix) -> f64 {
    let n = k.size();
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut lambda = 0.0;
    for _ in 0..200 {
        let w = k.matvec(&v).unwrap();
        lambda = kdntk::linalg::norm(&w);
        v = w.into_iter().map(|x| x / lambda).collect();
    }
    lambda
}

/// GD on the linearized model against the kernel-regression closed form.
fn closed_form_case(n: usize, width: usize, seed: u64) {
    let cfg = NetConfig::new(8, 2, width);
    let p0 = init_params(&cfg, seed).unwrap();
    let mut r = rng::stream(seed, &[rng::label("closed-form")]);
    let xs = sample_inputs(8, INPUT_STD, n, &mut r);
    let probes = sample_inputs(8, INPUT_STD, 32, &mut r);
    let x = stack_inputs(&xs, 8).unwrap();
    let targets: Vec<f64> = (0..n).map(|_| 2.0 * r.sample::<f64, _>(StandardNormal)).collect();
    let batch = Batch {
        inputs: x.clone(),
        targets: targets.clone(),
        hard: vec![0.0; n],
    };

    let k = empirical_ntk_gram(&p0, &xs).unwrap();
    let f0 = forward_batch(&p0, &x).unwrap();
    let dz: Vec<f64> = targets.iter().zip(&f0).map(|(t, f)| t - f).collect();
    let coef = k.cholesky().unwrap().solve(&dz).unwrap();
    let trace = forward_trace(&p0, &x).unwrap();
    let closed = WeightDelta::new(DeltaRole::Student, vjp(&p0, &trace, &coef).unwrap());

    let mut tc = TrainConfig::new(1.9 * n as f64 / largest_eigenvalue(&k), n, 2500);
    tc.optimizer = Optimizer::Gd;
    tc.grad_tol = 1e-9;
    let fit = train_linearized(&p0, LinearData::Fixed(&batch), LinearLoss::L2, DeltaRole::Student, &tc, seed).unwrap();

    let on_train = linear_logits(&p0, &fit.delta, &x).unwrap();
    for (f, t) in on_train.iter().zip(&targets) {
        assert!((f - t).abs() < 1e-3, "training logit {f} vs target {t}");
    }
    let closed_train = linear_logits(&p0, &closed, &x).unwrap();
    for (a, b) in on_train.iter().zip(&closed_train) {
        assert!((a - b).abs() < 1e-3);
    }
    let px = stack_inputs(&probes, 8).unwrap();
    let gd = linear_logits(&p0, &fit.delta, &px).unwrap();
    let cf = linear_logits(&p0, &closed, &px).unwrap();
    for (a, b) in gd.iter().zip(&cf) {
        assert!((a - b).abs() < 1e-2, "held-out {a} vs {b}");
    }
}

#[test]
fn gradient_descent_reaches_closed_form_small() {
    closed_form_case(16, 256, 1);
}

#[test]
fn gradient_descent_reaches_closed_form_wide() {
    closed_form_case(32, 512, 2);
}

#[test]
fn wide_network_stays_linear() {
    let cfg = NetConfig::new(2, 2, 4096);
    let p0 = init_params(&cfg, 5).unwrap();
    let mut r = rng::stream(6, &[]);
    let xs = sample_inputs(2, INPUT_STD, 8, &mut r);
    let probes = stack_inputs(&sample_inputs(2, INPUT_STD, 64, &mut r), 2).unwrap();
    let x = stack_inputs(&xs, 2).unwrap();
    // A weight change of the kind kernel training produces: Φᵀa fitting O(1) targets.
    let k = empirical_ntk_gram(&p0, &xs).unwrap();
    let f0 = forward_batch(&p0, &x).unwrap();
    let dz: Vec<f64> = f0.iter().map(|f| r.sample::<f64, _>(StandardNormal) - f).collect();
    let coef = k.cholesky().unwrap().solve(&dz).unwrap();
    let delta = WeightDelta::new(DeltaRole::Student, vjp(&p0, &forward_trace(&p0, &x).unwrap(), &coef).unwrap());
    let shifted = p0.shifted(&delta).unwrap();
    let exact = forward_batch(&shifted, &probes).unwrap();
    let lin = linear_logits(&p0, &delta, &probes).unwrap();
    for (e, l) in exact.iter().zip(&lin) {
        assert!((e - l).abs() / (l.abs() + 1.0) <= 0.05, "network {e} vs linear {l}");
    }
}
