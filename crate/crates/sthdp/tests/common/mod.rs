//! Shared oracle helpers for the acceptance suite.

use sthdp::priors::NigParams;

/// Marginal density p(t) = ∫∫ Normal(t | μ, σ²)·NIG(μ, σ² | prior) dμ dσ²
/// by brute-force nested quadrature — an oracle for the closed-form
/// Student-t predictive that shares no code with it.
///
/// The inner μ-integral runs over ±12 standard deviations of the
/// product-Gaussian factor; the outer σ²-integral runs in log space, where
/// the inverse-gamma factor decays double-exponentially on the left and
/// exponentially on the right.
pub fn nig_marginal_quadrature(prior: &NigParams, t: f64) -> f64 {
    let (mu0, lambda, a, b) = (prior.mu, prior.lambda, prior.shape, prior.scale);
    let ln_inv_gamma_norm = a * b.ln() - statrs::function::gamma::ln_gamma(a);

    let inner = |s2: f64| -> f64 {
        // Product of the two Gaussian factors is proportional to a Gaussian
        // in μ centered at c with variance s2/(1+λ).
        let c = (t + lambda * mu0) / (1.0 + lambda);
        let sd_c = (s2 / (1.0 + lambda)).sqrt();
        let lo = c - 12.0 * sd_c;
        let hi = c + 12.0 * sd_c;
        let n = 1200usize;
        let h = (hi - lo) / n as f64;
        let f = |mu: f64| -> f64 {
            let d1 = t - mu;
            let d2 = mu - mu0;
            let e = -0.5 * d1 * d1 / s2 - 0.5 * lambda * d2 * d2 / s2;
            e.exp() / (2.0 * std::f64::consts::PI * s2 / lambda.sqrt())
        };
        let mut acc = f(lo) + f(hi);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(lo + h * i as f64);
        }
        acc * h / 3.0
    };

    let y_lo = b.ln() - 12.0;
    let y_hi = b.ln() + 60.0;
    let n = 4000usize;
    let h = (y_hi - y_lo) / n as f64;
    let g = |y: f64| -> f64 {
        let s2 = y.exp();
        let ln_ig = ln_inv_gamma_norm - (a + 1.0) * y - b / s2;
        // The e^y factor is the Jacobian of s2 = e^y.
        inner(s2) * (ln_ig + y).exp()
    };
    let mut acc = g(y_lo) + g(y_hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * g(y_lo + h * i as f64);
    }
    acc * h / 3.0
}
