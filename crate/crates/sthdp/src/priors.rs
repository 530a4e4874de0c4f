//! Conjugate machinery shared by both restaurant franchises.
//!
//! Motion words are multinomial draws under a symmetric Dirichlet, so a
//! dish's word distribution collapses to count statistics with closed-form
//! predictive and marginal likelihoods. Time stamps are Gaussian draws
//! under a normal-inverse-gamma prior, which collapses to a Student-t
//! predictive. Concentration parameters carry vague Gamma(0.1, 0.1) priors
//! and are resampled with the usual beta/Bernoulli auxiliary-variable
//! construction.

use rand::distr::Distribution;
use rand::{Rng, RngExt};
use statrs::distribution::{Beta, Gamma};
use statrs::function::gamma::ln_gamma;

/// Symmetric Dirichlet concentration placed on each dish's word
/// distribution.
pub const DEFAULT_ETA: f64 = 0.5;

/// Gamma hyperprior shape and rate shared by all concentration parameters.
pub const CONCENTRATION_PRIOR_SHAPE: f64 = 0.1;
pub const CONCENTRATION_PRIOR_RATE: f64 = 0.1;

/// Word counts for one dish under a symmetric Dirichlet(eta) prior.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletMultinomialStats {
    pub eta: f64,
    /// Dense per-word counts; index is the vocabulary word id.
    pub counts: Vec<u32>,
    /// Sum of `counts`, maintained incrementally.
    pub total: u32,
}

impl DirichletMultinomialStats {
    pub fn new(vocab_size: usize, eta: f64) -> Self {
        assert!(eta > 0.0);
        Self {
            eta,
            counts: vec![0; vocab_size],
            total: 0,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.counts.len()
    }

    pub fn add(&mut self, word: usize) {
        self.counts[word] += 1;
        self.total += 1;
    }

    pub fn remove(&mut self, word: usize) {
        debug_assert!(self.counts[word] > 0, "removing absent word {word}");
        self.counts[word] -= 1;
        self.total -= 1;
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn log_predictive(&self, word: usize) -> f64 {
        dm_predictive(self, word).ln()
    }
}

/// Posterior predictive probability of `word` given the counts seen so far:
/// (count + eta) / (total + V eta). Strictly positive and sums to one over
/// the vocabulary.
pub fn dm_predictive(stats: &DirichletMultinomialStats, word: usize) -> f64 {
    let v = stats.vocab_size() as f64;
    (stats.counts[word] as f64 + stats.eta) / (stats.total as f64 + v * stats.eta)
}

/// Log marginal probability of the whole count vector under the symmetric
/// Dirichlet: Gamma(V eta) / Gamma(total + V eta) * prod_w Gamma(count_w +
/// eta) / Gamma(eta). Zero for empty stats.
pub fn dm_marginal_loglik(stats: &DirichletMultinomialStats) -> f64 {
    if stats.total == 0 {
        return 0.0;
    }
    let v = stats.vocab_size() as f64;
    let prior_total = v * stats.eta;
    let mut ll = ln_gamma(prior_total) - ln_gamma(stats.total as f64 + prior_total);
    for &c in &stats.counts {
        // Words never seen contribute lgamma(eta) - lgamma(eta) = 0.
        if c > 0 {
            ll += ln_gamma(c as f64 + stats.eta) - ln_gamma(stats.eta);
        }
    }
    ll
}

/// Normal-inverse-gamma hyperparameters: mean `mu`, pseudo-count `lambda`
/// scaling the variance of the mean, and inverse-gamma `shape`/`scale` on
/// the variance (density proportional to sigma^{-2(shape+1)}
/// exp(-scale/sigma^2)).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NigParams {
    pub mu: f64,
    pub lambda: f64,
    pub shape: f64,
    pub scale: f64,
}

impl NigParams {
    pub fn new(mu: f64, lambda: f64, shape: f64, scale: f64) -> Self {
        assert!(lambda > 0.0 && shape > 0.0 && scale > 0.0);
        Self {
            mu,
            lambda,
            shape,
            scale,
        }
    }

    /// The vague default used for time words: the mean is anchored at the
    /// corpus sample mean and everything else is left loose.
    pub fn default_for_mean(mean: f64) -> Self {
        Self::new(mean, 0.01, 0.3, 1.0)
    }
}

/// Count, sum, and sum of squares of the time stamps currently assigned to
/// one time dish.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GaussianSuffStats {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl GaussianSuffStats {
    pub fn add(&mut self, t: f64) {
        self.n += 1;
        self.sum += t;
        self.sum_sq += t * t;
    }

    /// Inverse of `add` up to floating-point rounding. Callers that need a
    /// bit-identical rollback must snapshot and restore the struct instead.
    pub fn remove(&mut self, t: f64) {
        debug_assert!(self.n > 0, "removing from empty suff stats");
        self.n -= 1;
        if self.n == 0 {
            *self = Self::default();
        } else {
            self.sum -= t;
            self.sum_sq -= t * t;
        }
    }

    pub fn mean(&self) -> f64 {
        debug_assert!(self.n > 0);
        self.sum / self.n as f64
    }

    /// Pools another batch of observations into these statistics.
    pub fn merge(&mut self, other: &GaussianSuffStats) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    /// Inverse of `merge` up to floating-point rounding, with the same
    /// reset-at-empty behaviour as `remove`.
    pub fn unmerge(&mut self, other: &GaussianSuffStats) {
        debug_assert!(self.n >= other.n, "unmerging more than is present");
        self.n -= other.n;
        if self.n == 0 {
            *self = Self::default();
        } else {
            self.sum -= other.sum;
            self.sum_sq -= other.sum_sq;
        }
    }

    /// Statistics of the union of two batches.
    pub fn merged(&self, other: &GaussianSuffStats) -> GaussianSuffStats {
        let mut out = *self;
        out.merge(other);
        out
    }
}

/// Conjugate posterior of a normal-inverse-gamma prior after observing the
/// data summarized in `stats`. With n = 0 the prior is returned unchanged.
pub fn nig_update(prior: &NigParams, stats: &GaussianSuffStats) -> NigParams {
    if stats.n == 0 {
        return *prior;
    }
    let n = stats.n as f64;
    let mean = stats.sum / n;
    // Centered sum of squares; clamped because cancellation can push it a
    // hair negative for near-constant data.
    let ss = (stats.sum_sq - n * mean * mean).max(0.0);
    let lambda_n = prior.lambda + n;
    let mu_n = (prior.lambda * prior.mu + stats.sum) / lambda_n;
    let shape_n = prior.shape + 0.5 * n;
    let dev = mean - prior.mu;
    let scale_n = prior.scale + 0.5 * ss + prior.lambda * n * dev * dev / (2.0 * lambda_n);
    NigParams {
        mu: mu_n,
        lambda: lambda_n,
        shape: shape_n,
        scale: scale_n,
    }
}

/// Student-t density of a new time stamp under `params`, typically a
/// posterior produced by `nig_update`. Exponential of `log_t_predictive`.
pub fn t_predictive(params: &NigParams, t: f64) -> f64 {
    log_t_predictive(params, t).exp()
}

/// Log Student-t predictive density: degrees of freedom 2*shape, location
/// mu, squared scale scale*(lambda+1)/(shape*lambda).
pub fn log_t_predictive(params: &NigParams, t: f64) -> f64 {
    let df = 2.0 * params.shape;
    let scale_sq = params.scale * (params.lambda + 1.0) / (params.shape * params.lambda);
    let z_sq = (t - params.mu) * (t - params.mu) / scale_sq;
    ln_gamma(0.5 * (df + 1.0))
        - ln_gamma(0.5 * df)
        - 0.5 * (df * std::f64::consts::PI).ln()
        - 0.5 * scale_sq.ln()
        - 0.5 * (df + 1.0) * (z_sq / df).ln_1p()
}

/// Log marginal likelihood of the data summarized in `stats` under the
/// normal-inverse-gamma prior, i.e. the Gaussian likelihood integrated over
/// mean and variance. Zero for empty stats.
pub fn nig_marginal_loglik(prior: &NigParams, stats: &GaussianSuffStats) -> f64 {
    if stats.n == 0 {
        return 0.0;
    }
    let post = nig_update(prior, stats);
    let n = stats.n as f64;
    -0.5 * n * (2.0 * std::f64::consts::PI).ln() + 0.5 * (prior.lambda.ln() - post.lambda.ln())
        + ln_gamma(post.shape)
        - ln_gamma(prior.shape)
        + prior.shape * prior.scale.ln()
        - post.shape * post.scale.ln()
}

/// A Dirichlet-process concentration parameter together with its Gamma
/// hyperprior (shape/rate convention).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationParam {
    pub value: f64,
    pub prior_shape: f64,
    pub prior_rate: f64,
}

impl ConcentrationParam {
    pub fn new(initial: f64) -> Self {
        Self {
            value: initial,
            prior_shape: CONCENTRATION_PRIOR_SHAPE,
            prior_rate: CONCENTRATION_PRIOR_RATE,
        }
    }

    pub fn resample<R: Rng + ?Sized>(&mut self, rng: &mut R, group_sizes: &[u64], n_tables: u64) {
        self.value = resample_concentration(self, group_sizes, n_tables, rng);
    }
}

/// Draws a new concentration value from its conditional posterior given the
/// number of customers per restaurant and the total number of tables they
/// seated, using one Beta and one Bernoulli auxiliary variable per
/// non-empty restaurant followed by a Gamma draw.
pub fn resample_concentration<R: Rng + ?Sized>(
    param: &ConcentrationParam,
    group_sizes: &[u64],
    n_tables: u64,
    rng: &mut R,
) -> f64 {
    let alpha = param.value;
    let mut shape = param.prior_shape + n_tables as f64;
    let mut rate = param.prior_rate;
    for &n in group_sizes {
        if n == 0 {
            continue;
        }
        let n = n as f64;
        let w: f64 = Beta::new(alpha + 1.0, n)
            .expect("valid Beta parameters")
            .sample(rng);
        // Beta draws can round to exactly 0 or 1; keep log(w) finite.
        rate -= w.clamp(f64::MIN_POSITIVE, 1.0).ln();
        if rng.random::<f64>() < n / (n + alpha) {
            shape -= 1.0;
        }
    }
    // Every non-empty restaurant contributes at least one table, so shape
    // stays >= prior_shape > 0.
    let value: f64 = Gamma::new(shape, rate)
        .expect("valid Gamma parameters")
        .sample(rng);
    // A vague prior occasionally produces values indistinguishable from
    // zero; keep them positive so downstream logs stay finite.
    value.max(1e-300)
}

/// Stick-breaking weights from a sequence of stick proportions: weight_k =
/// stick_k * prod_{j<k} (1 - stick_j). Returns the weights and the unbroken
/// remainder; together they sum to one.
pub fn gem_weights(sticks: &[f64]) -> (Vec<f64>, f64) {
    let mut remaining = 1.0;
    let mut weights = Vec::with_capacity(sticks.len());
    for &v in sticks {
        assert!((0.0..=1.0).contains(&v), "stick proportion out of range");
        weights.push(v * remaining);
        remaining *= 1.0 - v;
    }
    (weights, remaining)
}
