use kdntk::kernel::{analytic_ntk_gram, empirical_ntk_gram, frobenius_relative_error};
use kdntk::network::{init_params, NetConfig};
use kdntk::rng;
use kdntk::tasks::{sample_inputs, INPUT_STD};

const PAIRS: u64 = 10;

/// Mean error over `PAIRS` independent (input set, network) draws.
fn mean_error(width: usize) -> f64 {
    let cfg = NetConfig::new(2, 3, width);
    (0..PAIRS)
        .map(|s| {
            let xs = sample_inputs(2, INPUT_STD, 16, &mut rng::stream(17, &[1, s]));
            let analytic = analytic_ntk_gram(&cfg, &xs).unwrap();
            let p = init_params(&cfg, rng::derive_seed(17, &[2, width as u64, s])).unwrap();
            frobenius_relative_error(&empirical_ntk_gram(&p, &xs).unwrap(), &analytic).unwrap()
        })
        .sum::<f64>()
        / PAIRS as f64
}

#[test]
fn empirical_kernel_error_shrinks_with_width() {
    let errors: Vec<f64> = [64, 256, 1024, 4096].into_iter().map(mean_error).collect();
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    assert!(errors[3] <= 0.05, "{errors:?}");
}
