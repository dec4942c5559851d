//! Regularised logistic loss and its gradient.

use super::features::FeatureVector;

/// One training row: features, target in {0, 1}, and a per-sample weight.
#[derive(Debug, Clone)]
pub struct Sample {
    pub x: FeatureVector,
    pub y: f64,
    pub weight: f64,
}

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Weighted mean logistic loss plus `l2/2 * |w|^2` (bias unregularised).
pub fn loss(weights: &[f64], bias: f64, samples: &[Sample], l2: f64) -> f64 {
    let data: f64 = samples
        .iter()
        .map(|s| {
            let z = s.x.dot(weights) + bias;
            // -[y log σ(z) + (1-y) log(1-σ(z))] = softplus(z) - y z
            s.weight * (softplus(z) - s.y * z)
        })
        .sum::<f64>()
        / samples.len().max(1) as f64;
    data + 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>()
}

/// Loss and dense gradient `(d/dw, d/db)` of [`loss`].
pub fn loss_and_gradient(weights: &[f64], bias: f64, samples: &[Sample], l2: f64) -> (f64, Vec<f64>, f64) {
    let n = samples.len().max(1) as f64;
    let mut grad: Vec<f64> = weights.iter().map(|w| l2 * w).collect();
    let mut grad_bias = 0.0;
    for s in samples {
        let z = s.x.dot(weights) + bias;
        let residual = s.weight * (sigmoid(z) - s.y) / n;
        for (&i, &v) in s.x.indices.iter().zip(&s.x.values) {
            grad[i as usize] += residual * v;
        }
        grad_bias += residual;
    }
    (loss(weights, bias, samples, l2), grad, grad_bias)
}
