//! Spike-and-slab Bayesian feature selection by stochastic variational EM,
//! plus ensemble concatenation, mask application, and a ridge classifier as
//! the desk-scale stand-in for a fine-tuned linear probe.
//!
//! Each weight w_i carries a Bernoulli(pi_i) indicator routing it to a slab
//! Gaussian N(0, 1/alpha_i1) or a spike N(0, 1/alpha_i2); the noise and both
//! precisions carry Gamma hyper-priors. Inference is mean-field coordinate
//! ascent over Q(beta) Q(z_i) Q(w_i) Q(alpha_i1) Q(alpha_i2), with an
//! empirical-Bayes M-step setting the priors to the fitted posteriors.

use crate::evidence::DesignPair;
use crate::io::FeatureBundle;
use crate::{Matrix, Vector, LN_2PI};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use statrs::function::gamma::{digamma, ln_gamma};
use thiserror::Error;

const LAMBDA_INIT_MIN: f64 = 1e-6;
const LAMBDA_INIT_MAX: f64 = 1e6;

#[derive(Debug, Error)]
pub enum SelectError {
    #[error("logistic contrast for feature {feature} produced NaN")]
    NumericalUnderflow { feature: usize },
    #[error("state or data contains a non-finite value")]
    NonFinite,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("bundles disagree on rows, labels, or domains near '{0}'")]
    InconsistentBundles(String),
    #[error("training data must contain at least two classes")]
    TooFewClasses,
    #[error("linear system is singular")]
    SingularSystem,
    #[error("invalid priors: {0}")]
    InvalidPriors(&'static str),
    #[error("no bundles to concatenate")]
    EmptyEnsemble,
    #[error("step failed at iteration {iteration}: {source}")]
    Step {
        iteration: usize,
        #[source]
        source: Box<SelectError>,
    },
}

/// Which coordinate update formulas to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpdateRule {
    /// Conjugate Gamma accumulation (half factors on shape and rate) and the
    /// residual-sign mean update. The default; all acceptance targets use it.
    #[default]
    Conjugate,
    /// Reciprocal-form rate accumulation without the half factors and a
    /// negated-residual mean update. Exposed for A/B comparison only.
    Reciprocal,
}

/// Hyper-parameters and run controls for the selector.
#[derive(Debug, Clone)]
pub struct SelectPriors {
    /// Prior inclusion probability for every feature.
    pub pi0: f64,
    /// Gamma hyper-priors as (noise shape, noise scale, slab shape,
    /// slab scale, spike shape, spike scale).
    pub nu: [f64; 6],
    /// Screening threshold on the converged inclusion probabilities.
    pub tau: f64,
    /// Iteration budget T.
    pub max_iter: usize,
    /// Stochastic batch size; a value >= n runs full-batch sweeps.
    pub batch_size: usize,
    /// Early-stop threshold on the L1 drift of pi over a 3-iteration window.
    pub epsilon: f64,
    pub seed: u64,
    pub rule: UpdateRule,
}

impl Default for SelectPriors {
    fn default() -> Self {
        SelectPriors {
            pi0: 0.5,
            nu: [1.0, 1.0, 1.0, 1.0, 5.0, 1.0],
            tau: 0.5,
            max_iter: 1000,
            batch_size: 256,
            epsilon: 0.5,
            seed: 0,
            rule: UpdateRule::Conjugate,
        }
    }
}

impl SelectPriors {
    fn validate(&self) -> Result<(), SelectError> {
        if !(self.pi0 > 0.0 && self.pi0 < 1.0) {
            return Err(SelectError::InvalidPriors("pi0 must lie in (0, 1)"));
        }
        if self.nu.iter().any(|v| !(*v > 0.0)) {
            return Err(SelectError::InvalidPriors("nu entries must be positive"));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(SelectError::InvalidPriors("tau must lie in (0, 1)"));
        }
        if self.max_iter == 0 || self.batch_size == 0 {
            return Err(SelectError::InvalidPriors(
                "max_iter and batch_size must be at least 1",
            ));
        }
        if !(self.epsilon >= 0.0) {
            return Err(SelectError::InvalidPriors("epsilon must be nonnegative"));
        }
        Ok(())
    }
}

/// Gamma (shape, scale) parameters for the noise precision and for both
/// per-feature precision families.
#[derive(Debug, Clone)]
pub struct GammaParams {
    pub noise_shape: f64,
    pub noise_scale: f64,
    pub slab_shape: Vector,
    pub slab_scale: Vector,
    pub spike_shape: Vector,
    pub spike_scale: Vector,
}

impl GammaParams {
    fn broadcast(nu: &[f64; 6], d: usize) -> Self {
        GammaParams {
            noise_shape: nu[0],
            noise_scale: nu[1],
            slab_shape: Vector::from_element(d, nu[2]),
            slab_scale: Vector::from_element(d, nu[3]),
            spike_shape: Vector::from_element(d, nu[4]),
            spike_scale: Vector::from_element(d, nu[5]),
        }
    }
}

/// Variational parameters after some number of sweeps.
#[derive(Debug, Clone)]
pub struct SelectionState {
    /// Means of Q(w_i).
    pub m: Vector,
    /// Precisions of Q(w_i).
    pub lambda_prec: Vector,
    /// Inclusion probabilities of Q(z_i).
    pub pi_tilde: Vector,
    /// Gamma parameters of Q(beta), Q(alpha_i1), Q(alpha_i2).
    pub nu_tilde: GammaParams,
}

/// Evolving prior hyper-parameters (pi, nu); the M-step overwrites these
/// with the fitted variational parameters each iteration.
#[derive(Debug, Clone)]
pub struct FeaturePriors {
    pub pi: Vector,
    pub nu: GammaParams,
}

impl FeaturePriors {
    pub fn broadcast(priors: &SelectPriors, d: usize) -> Self {
        FeaturePriors {
            pi: Vector::from_element(d, priors.pi0),
            nu: GammaParams::broadcast(&priors.nu, d),
        }
    }
}

/// Outcome of a selection run.
#[derive(Debug, Clone)]
pub struct SelectionResult {
    /// Converged prior inclusion probabilities.
    pub inclusion_prob: Vector,
    /// inclusion_prob >= tau.
    pub mask: Vec<bool>,
    /// ELBO after each iteration; populated in full-batch mode only.
    pub elbo_trace: Vec<f64>,
    pub iterations: usize,
    pub early_stopped: bool,
}

/// Initialize the variational state: means from ridge-regularized least
/// squares, precisions 1/m^2 clamped into [1e-6, 1e6], Gamma parameters at
/// their priors, inclusion probabilities at pi0.
pub fn init_state(data: &DesignPair, priors: &SelectPriors) -> Result<SelectionState, SelectError> {
    priors.validate()?;
    let d = data.feature_count();
    let gram = data.features.tr_mul(&data.features);
    let ridge = (1e-6 * gram.trace() / d as f64).max(1e-12);
    let mut reg = gram;
    for i in 0..d {
        reg[(i, i)] += ridge;
    }
    let chol = reg.cholesky().ok_or(SelectError::SingularSystem)?;
    let m = chol.solve(&data.features.tr_mul(&data.targets));
    let lambda_prec =
        m.map(|mi| (1.0 / (mi * mi)).clamp(LAMBDA_INIT_MIN, LAMBDA_INIT_MAX));
    Ok(SelectionState {
        m,
        lambda_prec,
        pi_tilde: Vector::from_element(d, priors.pi0),
        nu_tilde: GammaParams::broadcast(&priors.nu, d),
    })
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

// E[ln g] for g ~ Gamma(shape, scale)
fn expect_ln_gamma_var(shape: f64, scale: f64) -> f64 {
    digamma(shape) + scale.ln()
}

/// One full coordinate sweep on a batch: the noise Gamma first, then per
/// feature in ascending index the inclusion probability, both precision
/// Gammas, and the weight mean/precision, each reading the freshest values.
pub fn vem_step(
    state: &SelectionState,
    batch: &DesignPair,
    priors: &FeaturePriors,
    rule: UpdateRule,
) -> Result<SelectionState, SelectError> {
    let n = batch.sample_count();
    let d = batch.feature_count();
    if priors.pi.len() != d || state.m.len() != d {
        return Err(SelectError::DimensionMismatch {
            expected: d,
            got: state.m.len().min(priors.pi.len()),
        });
    }
    let x = &batch.features;
    let y = &batch.targets;
    let col_sq: Vec<f64> = (0..d).map(|i| x.column(i).norm_squared()).collect();

    let mut next = state.clone();
    // residual y - X m, maintained through the per-feature mean updates
    let mut residual = y - x * &next.m;

    // Q(beta): conjugate shape/rate accumulation from the expected
    // squared residual E||y - Xw||^2 = ||y - Xm||^2 + sum_i S_i / lambda_i
    let expected_rss = residual.norm_squared()
        + col_sq
            .iter()
            .zip(next.lambda_prec.iter())
            .map(|(s, l)| s / l)
            .sum::<f64>();
    let (noise_shape, noise_rate) = match rule {
        UpdateRule::Conjugate => (
            priors.nu.noise_shape + n as f64 / 2.0,
            1.0 / priors.nu.noise_scale + 0.5 * expected_rss,
        ),
        UpdateRule::Reciprocal => (
            priors.nu.noise_shape + n as f64,
            1.0 / priors.nu.noise_scale + expected_rss,
        ),
    };
    next.nu_tilde.noise_shape = noise_shape;
    next.nu_tilde.noise_scale = 1.0 / noise_rate;
    let e_beta = next.nu_tilde.noise_shape * next.nu_tilde.noise_scale;

    for i in 0..d {
        let e_w_sq = next.m[i] * next.m[i] + 1.0 / next.lambda_prec[i];

        // Q(z_i): logistic contrast of the slab and spike expected
        // log-densities plus the prior log odds
        let e_ln_slab =
            expect_ln_gamma_var(next.nu_tilde.slab_shape[i], next.nu_tilde.slab_scale[i]);
        let e_slab = next.nu_tilde.slab_shape[i] * next.nu_tilde.slab_scale[i];
        let e_ln_spike =
            expect_ln_gamma_var(next.nu_tilde.spike_shape[i], next.nu_tilde.spike_scale[i]);
        let e_spike = next.nu_tilde.spike_shape[i] * next.nu_tilde.spike_scale[i];
        let slab_term = 0.5 * e_ln_slab - 0.5 * e_slab * e_w_sq + priors.pi[i].ln();
        let spike_term = 0.5 * e_ln_spike - 0.5 * e_spike * e_w_sq + (1.0 - priors.pi[i]).ln();
        let pi = sigmoid(slab_term - spike_term);
        if pi.is_nan() {
            return Err(SelectError::NumericalUnderflow { feature: i });
        }
        next.pi_tilde[i] = pi;

        // Q(alpha_i1), Q(alpha_i2): responsibility-weighted accumulation
        let (slab_shape, slab_rate, spike_shape, spike_rate) = match rule {
            UpdateRule::Conjugate => (
                priors.nu.slab_shape[i] + 0.5 * pi,
                1.0 / priors.nu.slab_scale[i] + 0.5 * pi * e_w_sq,
                priors.nu.spike_shape[i] + 0.5 * (1.0 - pi),
                1.0 / priors.nu.spike_scale[i] + 0.5 * (1.0 - pi) * e_w_sq,
            ),
            UpdateRule::Reciprocal => (
                priors.nu.slab_shape[i] + pi,
                1.0 / priors.nu.slab_scale[i] + pi * e_w_sq,
                priors.nu.spike_shape[i] + 1.0 - pi,
                1.0 / priors.nu.spike_scale[i] + (1.0 - pi) * e_w_sq,
            ),
        };
        next.nu_tilde.slab_shape[i] = slab_shape;
        next.nu_tilde.slab_scale[i] = 1.0 / slab_rate;
        next.nu_tilde.spike_shape[i] = spike_shape;
        next.nu_tilde.spike_scale[i] = 1.0 / spike_rate;
        let e_slab = slab_shape / slab_rate;
        let e_spike = spike_shape / spike_rate;

        // Q(w_i): precision from the mixed precisions, mean from the
        // residual with feature i withheld
        let lambda = col_sq[i] * e_beta + pi * e_slab + (1.0 - pi) * e_spike;
        let col = x.column(i);
        let partial = col.dot(&residual) + col_sq[i] * next.m[i];
        let mean = match rule {
            UpdateRule::Conjugate => e_beta * partial / lambda,
            UpdateRule::Reciprocal => -e_beta * partial / lambda,
        };
        if !mean.is_finite() || !(lambda > 0.0) {
            return Err(SelectError::NonFinite);
        }
        // restore feature i's contribution with the new mean
        residual.axpy(next.m[i] - mean, &col.into_owned(), 1.0);
        next.m[i] = mean;
        next.lambda_prec[i] = lambda;
    }
    Ok(next)
}

fn xlny(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

// KL(Gamma(aq, sq) || Gamma(ap, sp)); exactly zero when the parameters match
fn kl_gamma(aq: f64, sq: f64, ap: f64, sp: f64) -> f64 {
    (aq - ap) * digamma(aq) + ap * (sp / sq).ln() + aq * (sq - sp) / sp - ln_gamma(aq)
        + ln_gamma(ap)
}

fn kl_bernoulli(q: f64, p: f64) -> f64 {
    xlny(q, q) - xlny(q, p) + xlny(1.0 - q, 1.0 - q) - xlny(1.0 - q, 1.0 - p)
}

/// Variational lower bound on the full data: expected log-likelihood under Q
/// minus the KL of every factor to its prior.
pub fn elbo(
    state: &SelectionState,
    data: &DesignPair,
    priors: &FeaturePriors,
) -> Result<f64, SelectError> {
    let n = data.sample_count() as f64;
    let d = data.feature_count();
    let x = &data.features;
    let residual = &data.targets - x * &state.m;
    let col_sq: Vec<f64> = (0..d).map(|i| x.column(i).norm_squared()).collect();
    let expected_rss = residual.norm_squared()
        + col_sq
            .iter()
            .zip(state.lambda_prec.iter())
            .map(|(s, l)| s / l)
            .sum::<f64>();

    let nt = &state.nu_tilde;
    let e_beta = nt.noise_shape * nt.noise_scale;
    let e_ln_beta = expect_ln_gamma_var(nt.noise_shape, nt.noise_scale);
    // E[ln p(y | X, w, beta)]
    let expect_log_lik = 0.5 * n * (e_ln_beta - LN_2PI) - 0.5 * e_beta * expected_rss;

    let mut kl = kl_gamma(
        nt.noise_shape,
        nt.noise_scale,
        priors.nu.noise_shape,
        priors.nu.noise_scale,
    );
    for i in 0..d {
        let pi = state.pi_tilde[i];
        kl += kl_bernoulli(pi, priors.pi[i]);
        kl += kl_gamma(
            nt.slab_shape[i],
            nt.slab_scale[i],
            priors.nu.slab_shape[i],
            priors.nu.slab_scale[i],
        );
        kl += kl_gamma(
            nt.spike_shape[i],
            nt.spike_scale[i],
            priors.nu.spike_shape[i],
            priors.nu.spike_scale[i],
        );
        // KL of Q(w_i) against its expected conditional prior:
        // E[ln Q(w_i)] - E[ln p(w_i | z_i, alpha_i)]
        let e_w_sq = state.m[i] * state.m[i] + 1.0 / state.lambda_prec[i];
        let entropy = 0.5 * (1.0 + LN_2PI - state.lambda_prec[i].ln());
        let cross = pi
            * (0.5 * expect_ln_gamma_var(nt.slab_shape[i], nt.slab_scale[i])
                - 0.5 * nt.slab_shape[i] * nt.slab_scale[i] * e_w_sq)
            + (1.0 - pi)
                * (0.5 * expect_ln_gamma_var(nt.spike_shape[i], nt.spike_scale[i])
                    - 0.5 * nt.spike_shape[i] * nt.spike_scale[i] * e_w_sq)
            - 0.5 * LN_2PI;
        kl += -entropy - cross;
    }
    let value = expect_log_lik - kl;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(SelectError::NonFinite)
    }
}

fn gather_rows(data: &DesignPair, rows: &[usize]) -> DesignPair {
    let d = data.feature_count();
    let mut features = Matrix::zeros(rows.len(), d);
    let mut targets = Vector::zeros(rows.len());
    for (out, &r) in rows.iter().enumerate() {
        features.row_mut(out).copy_from(&data.features.row(r));
        targets[out] = data.targets[r];
    }
    DesignPair { features, targets }
}

/// Run the stochastic variational EM loop: sample a batch, sweep, set the
/// priors to the fitted posteriors, and early-stop once the prior inclusion
/// probabilities drift less than epsilon (L1) from their 3-iteration mean.
pub fn select_features(
    data: &DesignPair,
    priors: &SelectPriors,
) -> Result<SelectionResult, SelectError> {
    priors.validate()?;
    let n = data.sample_count();
    let d = data.feature_count();
    let full_batch = priors.batch_size >= n;
    let mut rng = ChaCha12Rng::seed_from_u64(priors.seed);
    let mut state = init_state(data, priors)?;
    let mut fp = FeaturePriors::broadcast(priors, d);
    let mut elbo_trace = Vec::new();
    let mut history: Vec<Vector> = Vec::with_capacity(3);
    let mut iterations = 0;
    let mut early_stopped = false;

    for t in 1..=priors.max_iter {
        let step = |e: SelectError| SelectError::Step {
            iteration: t,
            source: Box::new(e),
        };
        let next = if full_batch {
            vem_step(&state, data, &fp, priors.rule).map_err(step)?
        } else {
            let picks = rand::seq::index::sample(&mut rng, n, priors.batch_size).into_vec();
            let batch = gather_rows(data, &picks);
            vem_step(&state, &batch, &fp, priors.rule).map_err(step)?
        };
        state = next;
        // ARD M-step: priors become the fitted posteriors
        fp.pi.copy_from(&state.pi_tilde);
        fp.nu = state.nu_tilde.clone();
        iterations = t;
        if full_batch {
            elbo_trace.push(elbo(&state, data, &fp).map_err(step)?);
        }
        if history.len() == 3 {
            history.rotate_left(1);
            history[2] = fp.pi.clone();
        } else {
            history.push(fp.pi.clone());
        }
        if history.len() == 3 {
            let drift: f64 = (0..d)
                .map(|i| {
                    let mean = (history[0][i] + history[1][i] + history[2][i]) / 3.0;
                    (fp.pi[i] - mean).abs()
                })
                .sum();
            if drift < priors.epsilon {
                early_stopped = true;
                break;
            }
        }
    }

    let mask: Vec<bool> = fp.pi.iter().map(|&p| p >= priors.tau).collect();
    Ok(SelectionResult {
        inclusion_prob: fp.pi,
        mask,
        elbo_trace,
        iterations,
        early_stopped,
    })
}

/// Per-target selection with union masking: one run per target column, the
/// final mask is the elementwise OR, inclusion_prob the elementwise max.
pub fn select_features_multi(
    features: &Matrix,
    targets: &Matrix,
    priors: &SelectPriors,
) -> Result<SelectionResult, SelectError> {
    if targets.nrows() != features.nrows() {
        return Err(SelectError::DimensionMismatch {
            expected: features.nrows(),
            got: targets.nrows(),
        });
    }
    if targets.ncols() == 0 {
        return Err(SelectError::TooFewClasses);
    }
    let d = features.ncols();
    let mut inclusion = Vector::zeros(d);
    let mut mask = vec![false; d];
    let mut iterations = 0;
    let mut early_stopped = true;
    for c in 0..targets.ncols() {
        let pair = DesignPair {
            features: features.clone(),
            targets: targets.column(c).into_owned(),
        };
        let result = select_features(&pair, priors)?;
        for i in 0..d {
            inclusion[i] = inclusion[i].max(result.inclusion_prob[i]);
            mask[i] |= result.mask[i];
        }
        iterations = iterations.max(result.iterations);
        early_stopped &= result.early_stopped;
    }
    Ok(SelectionResult {
        inclusion_prob: inclusion,
        mask,
        elbo_trace: Vec::new(),
        iterations,
        early_stopped,
    })
}

/// Column-wise concatenation of bundles sharing rows, labels, and domains.
/// Column provenance records (model_id, source column) per output column.
pub fn concat_features(bundles: &[FeatureBundle]) -> Result<FeatureBundle, SelectError> {
    let first = bundles.first().ok_or(SelectError::EmptyEnsemble)?;
    let n = first.features.nrows();
    for b in bundles {
        if b.features.nrows() != n || b.labels != first.labels || b.domains != first.domains {
            return Err(SelectError::InconsistentBundles(b.model_id.clone()));
        }
    }
    let total: usize = bundles.iter().map(|b| b.features.ncols()).sum();
    let mut features = Matrix::zeros(n, total);
    let mut provenance = Vec::with_capacity(total);
    let mut offset = 0;
    for b in bundles {
        let w = b.features.ncols();
        features.columns_mut(offset, w).copy_from(&b.features);
        for c in 0..w {
            provenance.push((b.model_id.clone(), c));
        }
        offset += w;
    }
    Ok(FeatureBundle {
        model_id: bundles
            .iter()
            .map(|b| b.model_id.as_str())
            .collect::<Vec<_>>()
            .join("+"),
        features,
        labels: first.labels.clone(),
        domains: first.domains.clone(),
        column_provenance: Some(provenance),
    })
}

/// Keep the columns where the mask is true, preserving order and provenance.
pub fn apply_mask(bundle: &FeatureBundle, mask: &[bool]) -> Result<FeatureBundle, SelectError> {
    let d = bundle.features.ncols();
    if mask.len() != d {
        return Err(SelectError::DimensionMismatch {
            expected: d,
            got: mask.len(),
        });
    }
    let keep: Vec<usize> = (0..d).filter(|&i| mask[i]).collect();
    let n = bundle.features.nrows();
    let mut features = Matrix::zeros(n, keep.len());
    for (out, &i) in keep.iter().enumerate() {
        features.column_mut(out).copy_from(&bundle.features.column(i));
    }
    let provenance = bundle
        .column_provenance
        .as_ref()
        .map(|p| keep.iter().map(|&i| p[i].clone()).collect());
    Ok(FeatureBundle {
        model_id: bundle.model_id.clone(),
        features,
        labels: bundle.labels.clone(),
        domains: bundle.domains.clone(),
        column_provenance: provenance,
    })
}

/// One-vs-rest ridge regression on one-hot targets with a bias column.
#[derive(Debug, Clone)]
pub struct RidgeClassifier {
    /// (d+1) x C weight matrix; the last row is the bias.
    pub weights: Matrix,
}

pub fn ridge_classifier(
    train: &FeatureBundle,
    ridge: f64,
) -> Result<RidgeClassifier, SelectError> {
    let n = train.features.nrows();
    let d = train.features.ncols();
    let classes = train.labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut present = vec![false; classes];
    for &l in &train.labels {
        present[l] = true;
    }
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(SelectError::TooFewClasses);
    }
    let mut design = Matrix::zeros(n, d + 1);
    design.columns_mut(0, d).copy_from(&train.features);
    design.column_mut(d).fill(1.0);
    let mut onehot = Matrix::zeros(n, classes);
    for (r, &l) in train.labels.iter().enumerate() {
        onehot[(r, l)] = 1.0;
    }
    let mut gram = design.tr_mul(&design);
    for i in 0..=d {
        gram[(i, i)] += ridge;
    }
    let chol = gram.cholesky().ok_or(SelectError::SingularSystem)?;
    let weights = chol.solve(&design.tr_mul(&onehot));
    Ok(RidgeClassifier { weights })
}

/// Argmax of the per-class regression scores; ties go to the lowest label.
pub fn classify(classifier: &RidgeClassifier, features: &Matrix) -> Vec<usize> {
    let d = classifier.weights.nrows() - 1;
    let n = features.nrows();
    let mut design = Matrix::zeros(n, d + 1);
    design.columns_mut(0, d).copy_from(features);
    design.column_mut(d).fill(1.0);
    let scores = design * &classifier.weights;
    (0..n)
        .map(|r| {
            let row = scores.row(r);
            let mut best = 0;
            for c in 1..row.ncols() {
                if row[c] > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bundle(features: Matrix, labels: Vec<usize>, domains: Vec<usize>) -> FeatureBundle {
        FeatureBundle {
            model_id: "m".into(),
            features,
            labels,
            domains,
            column_provenance: None,
        }
    }

    #[test]
    fn init_identity_design_recovers_targets() {
        let data = DesignPair::new(
            Matrix::identity(2, 2),
            Vector::from_vec(vec![2.0, 3.0]),
        )
        .unwrap();
        let state = init_state(&data, &SelectPriors::default()).unwrap();
        assert_abs_diff_eq!(state.m[0], 2.0, epsilon = 1e-4);
        assert_abs_diff_eq!(state.m[1], 3.0, epsilon = 1e-4);
        assert_abs_diff_eq!(state.lambda_prec[0], 0.25, epsilon = 1e-3);
    }

    #[test]
    fn init_zero_mean_clamps_precision() {
        let data = DesignPair::new(Matrix::identity(2, 2), Vector::zeros(2)).unwrap();
        let state = init_state(&data, &SelectPriors::default()).unwrap();
        assert_eq!(state.lambda_prec[0], 1e6);
    }

    #[test]
    fn init_underdetermined_takes_ridge_path() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        use rand_distr::{Distribution, StandardNormal};
        let features = Matrix::from_fn(10, 20, |_, _| StandardNormal.sample(&mut rng));
        let targets = Vector::from_fn(10, |_, _| StandardNormal.sample(&mut rng));
        let data = DesignPair::new(features, targets).unwrap();
        let state = init_state(&data, &SelectPriors::default()).unwrap();
        assert!(state.m.iter().all(|v| v.is_finite()));
        assert!(state.lambda_prec.iter().all(|v| v.is_finite() && *v > 0.0));
    }

    #[test]
    fn concat_and_mask_round_trip() {
        let a = bundle(Matrix::from_element(2, 3, 1.0), vec![0, 1], vec![0, 1]);
        let b = bundle(Matrix::from_element(2, 5, 2.0), vec![0, 1], vec![0, 1]);
        let joined = concat_features(&[a.clone(), b]).unwrap();
        assert_eq!(joined.features.ncols(), 8);
        assert_eq!(joined.column_provenance.as_ref().unwrap().len(), 8);
        let same = apply_mask(&joined, &[true; 8]).unwrap();
        assert_eq!(same.features, joined.features);
        let single = concat_features(&[a.clone()]).unwrap();
        assert_eq!(single.features, a.features);
    }

    #[test]
    fn mask_keeps_provenance_of_survivors() {
        let mut b = bundle(Matrix::from_element(2, 3, 1.0), vec![0, 1], vec![0, 1]);
        b.column_provenance = Some(vec![("m".into(), 0), ("m".into(), 1), ("m".into(), 2)]);
        let kept = apply_mask(&b, &[true, false, true]).unwrap();
        assert_eq!(kept.features.ncols(), 2);
        assert_eq!(
            kept.column_provenance.unwrap(),
            vec![("m".to_string(), 0), ("m".to_string(), 2)]
        );
        let none = apply_mask(&b, &[false, false, false]).unwrap();
        assert_eq!(none.features.ncols(), 0);
    }

    #[test]
    fn inconsistent_bundles_are_rejected() {
        let a = bundle(Matrix::zeros(2, 3), vec![0, 1], vec![0, 1]);
        let b = bundle(Matrix::zeros(2, 3), vec![1, 0], vec![0, 1]);
        assert!(matches!(
            concat_features(&[a, b]),
            Err(SelectError::InconsistentBundles(_))
        ));
    }

    #[test]
    fn separable_classes_reach_full_training_accuracy() {
        let mut features = Matrix::zeros(8, 2);
        let mut labels = Vec::new();
        for i in 0..8 {
            let c = i % 2;
            features[(i, 0)] = if c == 0 { -1.0 } else { 1.0 } + 0.01 * i as f64;
            features[(i, 1)] = 0.5;
            labels.push(c);
        }
        let train = bundle(features.clone(), labels.clone(), vec![0; 8]);
        let clf = ridge_classifier(&train, 1e-6).unwrap();
        assert_eq!(classify(&clf, &features), labels);
    }

    #[test]
    fn single_class_training_is_rejected() {
        let train = bundle(Matrix::zeros(4, 2), vec![1, 1, 1, 1], vec![0; 4]);
        assert!(matches!(
            ridge_classifier(&train, 1.0),
            Err(SelectError::TooFewClasses)
        ));
    }
}
