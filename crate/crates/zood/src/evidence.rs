//! Bayesian linear regression with an isotropic Gaussian weight prior:
//! log evidence, fixed-point maximization over the precisions (alpha, beta),
//! and the per-sample posterior predictive.

use crate::{Matrix, Vector, LN_2PI};
use thiserror::Error;

/// Guard for the beta update denominator when n approaches gamma.
const EPS_GAMMA: f64 = 1e-8;
/// Hard bounds keeping the precisions finite on degenerate inputs.
const PRECISION_MIN: f64 = 1e-12;
const PRECISION_MAX: f64 = 1e12;

#[derive(Debug, Error)]
pub enum EvidenceError {
    #[error("input contains a non-finite value")]
    NonFinite,
    #[error("matrix factorization failed on valid-looking input")]
    SingularSystem,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("design must have at least one row and one column")]
    EmptyDesign,
    #[error("fixed point did not converge within the iteration budget")]
    DidNotConverge(Box<EvidenceFit>),
}

/// A design matrix with one target column: rows are samples.
#[derive(Debug, Clone)]
pub struct DesignPair {
    pub features: Matrix,
    pub targets: Vector,
}

impl DesignPair {
    pub fn new(features: Matrix, targets: Vector) -> Result<Self, EvidenceError> {
        if features.nrows() == 0 || features.ncols() == 0 {
            return Err(EvidenceError::EmptyDesign);
        }
        if targets.len() != features.nrows() {
            return Err(EvidenceError::DimensionMismatch {
                expected: features.nrows(),
                got: targets.len(),
            });
        }
        if features.iter().any(|v| !v.is_finite()) || targets.iter().any(|v| !v.is_finite()) {
            return Err(EvidenceError::NonFinite);
        }
        Ok(DesignPair { features, targets })
    }

    pub fn sample_count(&self) -> usize {
        self.features.nrows()
    }

    pub fn feature_count(&self) -> usize {
        self.features.ncols()
    }
}

/// A converged (or last-iterate) evidence maximization.
#[derive(Debug, Clone)]
pub struct EvidenceFit {
    /// Prior precision of the weights.
    pub alpha: f64,
    /// Noise precision.
    pub beta: f64,
    /// Posterior mean m of the weights.
    pub post_mean: Vector,
    /// Posterior precision A = alpha I + beta Phi^T Phi.
    pub post_precision: Matrix,
    /// Log evidence at (alpha, beta).
    pub log_evidence: f64,
    /// Effective signal dimension gamma = sum lambda_i / (alpha + lambda_i).
    pub gamma: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the beta update denominator n - gamma hit its guard.
    pub degenerate_residual: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub init_alpha: f64,
    pub init_beta: f64,
    pub max_iter: usize,
    /// Relative change in alpha and beta below which the fit stops.
    pub tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            init_alpha: 1.0,
            init_beta: 1.0,
            max_iter: 200,
            tol: 1e-6,
        }
    }
}

/// Log evidence of the pair at fixed precisions:
/// (n/2) log beta + (d/2) log alpha - (n/2) log 2pi
/// - (beta/2) ||y - Phi m||^2 - (alpha/2) ||m||^2 - (1/2) log |A|
/// with m = beta A^-1 Phi^T y and A = alpha I + beta Phi^T Phi.
pub fn log_evidence(pair: &DesignPair, alpha: f64, beta: f64) -> Result<f64, EvidenceError> {
    if !(alpha > 0.0 && beta > 0.0) || !alpha.is_finite() || !beta.is_finite() {
        return Err(EvidenceError::NonFinite);
    }
    let n = pair.sample_count() as f64;
    let d = pair.feature_count();
    let mut a = pair.features.tr_mul(&pair.features) * beta;
    for i in 0..d {
        a[(i, i)] += alpha;
    }
    let chol = a.cholesky().ok_or(EvidenceError::SingularSystem)?;
    let b = pair.features.tr_mul(&pair.targets);
    let m = chol.solve(&b) * beta;
    let rss = (&pair.targets - &pair.features * &m).norm_squared();
    let log_det_a = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let value = 0.5
        * (n * beta.ln() + d as f64 * alpha.ln()
            - n * LN_2PI
            - beta * rss
            - alpha * m.norm_squared()
            - log_det_a);
    if value.is_finite() {
        Ok(value)
    } else {
        Err(EvidenceError::NonFinite)
    }
}

// Spectral cache of one Gram matrix Phi^T Phi; every fixed-point iteration
// and evidence evaluation against a target projection costs O(d). Shared
// with the ranking engine, which reuses one spectrum across target columns.
pub(crate) struct Spectrum {
    pub(crate) mu: Vec<f64>,
    pub(crate) eigvecs: Matrix,
}

// posterior summary at (alpha, beta): spectral mean coordinates, ||m||^2,
// effective dimension, and the residual sum of squares
pub(crate) struct SpectralSummary {
    pub(crate) m_spec: Vec<f64>,
    pub(crate) m_sq: f64,
    pub(crate) gamma: f64,
    pub(crate) rss: f64,
}

pub(crate) struct SpectralFit {
    pub(crate) alpha: f64,
    pub(crate) beta: f64,
    pub(crate) summary: SpectralSummary,
    pub(crate) log_evidence: f64,
    pub(crate) iterations: usize,
    pub(crate) converged: bool,
    pub(crate) degenerate_residual: bool,
}

impl Spectrum {
    pub(crate) fn from_gram(gram: Matrix) -> Result<Self, EvidenceError> {
        let d = gram.nrows();
        let sym = faer::MatRef::from_column_major_slice(gram.as_slice(), d, d);
        let eig = sym
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|_| EvidenceError::SingularSystem)?;
        // round-off can leave tiny negative eigenvalues on rank-deficient designs
        let mu: Vec<f64> = (0..d).map(|k| eig.S()[k].max(0.0)).collect();
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(EvidenceError::NonFinite);
        }
        let u = eig.U();
        Ok(Spectrum {
            mu,
            eigvecs: Matrix::from_fn(d, d, |i, j| u[(i, j)]),
        })
    }

    // p = V^T Phi^T y for a target's moment vector Phi^T y
    pub(crate) fn project(&self, xty: &Vector) -> Vec<f64> {
        self.eigvecs.tr_mul(xty).iter().copied().collect()
    }

    pub(crate) fn summary(&self, p: &[f64], yty: f64, alpha: f64, beta: f64) -> SpectralSummary {
        let mut m_sq = 0.0;
        let mut gamma = 0.0;
        let mut fit_dot = 0.0;
        let mut fit_sq = 0.0;
        let d = self.mu.len();
        let mut m_spec = vec![0.0; d];
        for k in 0..d {
            let lam = beta * self.mu[k];
            let denom = alpha + lam;
            let mk = beta * p[k] / denom;
            m_spec[k] = mk;
            m_sq += mk * mk;
            gamma += lam / denom;
            fit_dot += mk * p[k];
            fit_sq += self.mu[k] * mk * mk;
        }
        // ||y - Phi m||^2 = y'y - 2 m'Phi'y + m'Phi'Phi m, clamped against round-off
        let rss = (yty - 2.0 * fit_dot + fit_sq).max(0.0);
        SpectralSummary {
            m_spec,
            m_sq,
            gamma,
            rss,
        }
    }

    pub(crate) fn log_evidence_at(
        &self,
        p: &[f64],
        yty: f64,
        n: f64,
        alpha: f64,
        beta: f64,
    ) -> f64 {
        let s = self.summary(p, yty, alpha, beta);
        self.log_evidence_of(&s, n, alpha, beta)
    }

    fn log_evidence_of(&self, s: &SpectralSummary, n: f64, alpha: f64, beta: f64) -> f64 {
        let d = self.mu.len() as f64;
        let log_det_a: f64 = self.mu.iter().map(|&mu| (alpha + beta * mu).ln()).sum();
        0.5 * (n * beta.ln() + d * alpha.ln()
            - n * LN_2PI
            - beta * s.rss
            - alpha * s.m_sq
            - log_det_a)
    }

    // fixed-point maximization; a non-converged run comes back Ok with the
    // flag cleared so callers choose between warning and hard error
    pub(crate) fn fit(
        &self,
        p: &[f64],
        yty: f64,
        n: f64,
        opts: FitOptions,
    ) -> Result<SpectralFit, EvidenceError> {
        if !(opts.init_alpha > 0.0 && opts.init_beta > 0.0 && opts.tol > 0.0) {
            return Err(EvidenceError::NonFinite);
        }
        if p.iter().any(|v| !v.is_finite()) || !yty.is_finite() {
            return Err(EvidenceError::NonFinite);
        }
        let mut alpha = opts.init_alpha;
        let mut beta = opts.init_beta;
        let mut iterations = 0;
        let mut converged = false;
        let mut degenerate = false;
        for iter in 1..=opts.max_iter {
            let s = self.summary(p, yty, alpha, beta);
            let alpha_new = if s.m_sq > 0.0 {
                (s.gamma / s.m_sq).clamp(PRECISION_MIN, PRECISION_MAX)
            } else {
                PRECISION_MAX
            };
            let mut denom = n - s.gamma;
            if denom <= EPS_GAMMA {
                degenerate = true;
                denom = EPS_GAMMA;
            }
            let beta_new = if s.rss > 0.0 {
                (denom / s.rss).clamp(PRECISION_MIN, PRECISION_MAX)
            } else {
                PRECISION_MAX
            };
            let rel = ((alpha_new - alpha).abs() / alpha).max((beta_new - beta).abs() / beta);
            alpha = alpha_new;
            beta = beta_new;
            iterations = iter;
            if rel < opts.tol {
                converged = true;
                break;
            }
        }
        let summary = self.summary(p, yty, alpha, beta);
        let log_evidence = self.log_evidence_of(&summary, n, alpha, beta);
        if !log_evidence.is_finite() {
            return Err(EvidenceError::NonFinite);
        }
        Ok(SpectralFit {
            alpha,
            beta,
            summary,
            log_evidence,
            iterations,
            converged,
            degenerate_residual: degenerate,
        })
    }
}

/// Maximize the evidence over (alpha, beta) by the fixed point
/// alpha <- gamma / ||m||^2, 1/beta <- ||y - Phi m||^2 / (n - gamma),
/// with the spectrum of Phi^T Phi precomputed once.
pub fn fit_evidence(pair: &DesignPair, opts: FitOptions) -> Result<EvidenceFit, EvidenceError> {
    let n = pair.sample_count() as f64;
    let gram = pair.features.tr_mul(&pair.features);
    let spectrum = Spectrum::from_gram(gram.clone())?;
    let p = spectrum.project(&pair.features.tr_mul(&pair.targets));
    let spectral = spectrum.fit(&p, pair.targets.norm_squared(), n, opts)?;

    let d = pair.feature_count();
    let post_mean = &spectrum.eigvecs * Vector::from_vec(spectral.summary.m_spec.clone());
    let mut post_precision = gram * spectral.beta;
    for i in 0..d {
        post_precision[(i, i)] += spectral.alpha;
    }
    let fit = EvidenceFit {
        alpha: spectral.alpha,
        beta: spectral.beta,
        post_mean,
        post_precision,
        log_evidence: spectral.log_evidence,
        gamma: spectral.summary.gamma,
        iterations: spectral.iterations,
        converged: spectral.converged,
        degenerate_residual: spectral.degenerate_residual,
    };
    if fit.converged {
        Ok(fit)
    } else {
        Err(EvidenceError::DidNotConverge(Box::new(fit)))
    }
}

/// Per-sample predictive mean phi^T m and variance beta^-1 + phi^T A^-1 phi
/// for each row of `new_features`.
pub fn posterior_predictive(
    fit: &EvidenceFit,
    new_features: &Matrix,
) -> Result<(Vector, Vector), EvidenceError> {
    let d = fit.post_mean.len();
    if new_features.ncols() != d {
        return Err(EvidenceError::DimensionMismatch {
            expected: d,
            got: new_features.ncols(),
        });
    }
    let chol = fit
        .post_precision
        .clone()
        .cholesky()
        .ok_or(EvidenceError::SingularSystem)?;
    let mean = new_features * &fit.post_mean;
    let solved = chol.solve(&new_features.transpose());
    let rows = new_features.nrows();
    let mut var = Vector::zeros(rows);
    for j in 0..rows {
        var[j] = 1.0 / fit.beta + new_features.row(j).tr_dot(&solved.column(j));
    }
    Ok((mean, var))
}
