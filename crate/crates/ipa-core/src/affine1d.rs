use crate::{Error, Result};

/// A first-order expansion center for a scalar function: the point, the
/// function value there, and the derivative there.
#[derive(Debug, Clone, Copy)]
pub struct Center {
    pub point: f64,
    pub value: f64,
    pub slope: f64,
}

impl Center {
    pub fn new(point: f64, value: f64, slope: f64) -> Self {
        Center { point, value, slope }
    }

    /// The local affine estimate at `x`.
    pub fn line(&self, x: f64) -> f64 {
        self.value + self.slope * (x - self.point)
    }
}

/// One-dimensional piecewise affine estimate: local first-order expansions
/// around each center, combined with Gaussian kernels normalized to sum to
/// one over the centers.
pub fn piecewise_affine_1d(x: f64, centers: &[Center], bandwidths: &[f64]) -> Result<f64> {
    if centers.is_empty() {
        return Err(Error::Contract("at least one expansion center is required".into()));
    }
    if bandwidths.len() != centers.len() {
        return Err(Error::Contract(format!(
            "{} centers but {} bandwidths",
            centers.len(),
            bandwidths.len()
        )));
    }
    if bandwidths.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::Contract("bandwidths must be positive".into()));
    }

    // Max-shifted kernel logits, as everywhere a normalized exponential
    // follows.
    let logits: Vec<f64> = centers
        .iter()
        .zip(bandwidths)
        .map(|(c, &s)| {
            let d = x - c.point;
            -d * d / (2.0 * s * s)
        })
        .collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let norm: f64 = weights.iter().sum();

    Ok(centers
        .iter()
        .zip(&weights)
        .map(|(c, &w)| w / norm * c.line(x))
        .sum())
}
