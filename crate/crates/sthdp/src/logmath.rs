//! Log-space numerics shared by the samplers.
//!
//! Every density in this crate is carried as a natural log. Normalization
//! and categorical draws therefore go through the two helpers here, both of
//! which subtract the running maximum before exponentiating so that weights
//! spanning hundreds of nats stay finite.

use rand::{Rng, RngExt};

/// `log(sum(exp(xs)))` with max subtraction.
///
/// Returns negative infinity for an empty slice or one containing only
/// negative infinities, mirroring the sum of zero probabilities.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        // All -inf (or empty): the sum is zero. A +inf or NaN max is a bug
        // in the caller's weights and is surfaced as-is.
        return max;
    }
    let sum: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Draws an index from the categorical distribution whose unnormalized log
/// weights are `log_weights`.
///
/// Panics if no weight is finite: a draw from an all-zero measure has no
/// meaning and always indicates a bug upstream.
pub fn sample_log_categorical<R: Rng + ?Sized>(rng: &mut R, log_weights: &[f64]) -> usize {
    let max = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(
        max.is_finite(),
        "categorical draw over weights with no finite entry: {log_weights:?}"
    );
    let mut total = 0.0;
    // Shift by the max so the largest weight exponentiates to exactly 1.
    let weights: Vec<f64> = log_weights
        .iter()
        .map(|&lw| {
            let w = (lw - max).exp();
            total += w;
            w
        })
        .collect();
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // Rounding can leave u marginally above the final accumulator; the last
    // non-zero weight is the only consistent answer.
    weights
        .iter()
        .rposition(|&w| w > 0.0)
        .expect("at least one finite weight")
}
