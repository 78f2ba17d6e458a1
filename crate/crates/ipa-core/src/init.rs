use autodiff_core::Tensor;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Uniform in (-1/sqrt(fan_in), 1/sqrt(fan_in)).
pub(crate) fn uniform_fan_in(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize) -> Tensor {
    let scale = 1.0 / (fan_in as f64).sqrt();
    Tensor::from_fn(shape, |_| rng.random_range(-scale..scale))
}

/// Standard normal via Box-Muller.
pub(crate) fn standard_normal(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    Tensor::from_fn(shape, |_| {
        let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.random_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    })
}
