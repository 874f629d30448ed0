//! Analytic network gradients against central finite differences.

use playbalance_core::nn::{Mlp, MlpSizes};
use playbalance_core::rng::Rng;

const H: f64 = 1e-5;

/// Scalar probe `sum_j c_j * logit_j + d * value`, evaluated by a plain
/// forward pass only.
fn probe(mlp: &Mlp, input: &[f64], c: &[f64], d: f64) -> f64 {
    let out = mlp.forward(input).unwrap();
    out.logits.iter().zip(c).map(|(z, c)| z * c).sum::<f64>() + d * out.value
}

fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Returns the worst relative error over every parameter.
fn check_triple(rng: &mut Rng, sizes: MlpSizes) -> f64 {
    let mut mlp = Mlp::init(sizes.clone(), rng.next_u64()).unwrap();
    // Non-zero biases so their gradients are exercised at a generic point.
    for p in mlp.params_mut() {
        *p += rng.range_f64(-0.1, 0.1);
    }
    let input: Vec<f64> = (0..sizes.input).map(|_| rng.range_f64(-1.0, 1.0)).collect();
    let c: Vec<f64> = (0..sizes.actions).map(|_| rng.range_f64(-1.0, 1.0)).collect();
    let d = rng.range_f64(-1.0, 1.0);

    let cache = mlp.forward(&input).unwrap();
    let analytic = mlp.backward(&cache, &c, d).unwrap();

    let mut worst: f64 = 0.0;
    for i in 0..mlp.params().len() {
        let original = mlp.params()[i];
        mlp.params_mut()[i] = original + H;
        let up = probe(&mlp, &input, &c, d);
        mlp.params_mut()[i] = original - H;
        let down = probe(&mlp, &input, &c, d);
        mlp.params_mut()[i] = original;
        let numeric = (up - down) / (2.0 * H);
        worst = worst.max(relative_error(analytic.0[i], numeric));
    }
    worst
}

#[test]
fn analytic_gradients_match_finite_differences_on_100_random_triples() {
    let mut rng = Rng::new(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let sizes = MlpSizes {
            input: 1 + rng.below(8) as usize,
            hidden: vec![1 + rng.below(10) as usize, 1 + rng.below(10) as usize],
            actions: 1 + rng.below(5) as usize,
        };
        worst = worst.max(check_triple(&mut rng, sizes));
    }
    assert!(worst < 1e-4, "max relative error {worst:e}");
}

#[test]
fn full_size_network_gradient_matches_finite_differences() {
    let mut rng = Rng::new(5);
    let worst = check_triple(&mut rng, MlpSizes::new(17, 5));
    assert!(worst < 1e-4, "max relative error {worst:e}");
}
