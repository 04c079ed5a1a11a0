//! Leave-one-domain-out transferability scoring. Each domain rotates out as
//! validation: the correlation-shift term is the log-density of its labels
//! under the evidence-maximized linear model fit on the remaining domains,
//! and the covariate-shift term is the log-density of its features under a
//! Gaussian fit to the training features. A per-model scale factor lambda
//! puts the two on a common footing before averaging across splits.
//!
//! All of the evidence work per split flows through one spectral
//! decomposition of the training Gram matrix, shared across target classes,
//! so scoring stays tractable at feature widths in the hundreds.

use crate::evidence::{EvidenceError, FitOptions, Spectrum};
use crate::io::FeatureBundle;
use crate::{Matrix, Vector, LN_2PI};
use nalgebra::{Cholesky, Dyn};
use rayon::prelude::*;
use thiserror::Error;

/// Jitter multiplier applied to trace(cov)/d before factorization.
pub const DEFAULT_JITTER_SCALE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum RankingError {
    #[error("leave-one-domain-out needs at least two domains")]
    TooFewDomains,
    #[error("invalid dataset: {0}")]
    InvalidDataset(&'static str),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("covariance is not positive definite even after jitter retries")]
    CovarianceDegenerate,
    #[error("bundles disagree on labels or domains near '{0}'")]
    InconsistentBundles(String),
    #[error("evidence computation failed")]
    Evidence(#[from] EvidenceError),
    #[error("evidence fit for class {class} failed")]
    ClassEvidence {
        class: usize,
        #[source]
        source: EvidenceError,
    },
    #[error("scoring failed for held-out domain {domain}")]
    Split {
        domain: usize,
        #[source]
        source: Box<RankingError>,
    },
}

/// How per-split log-densities enter the final score: averaged per held-out
/// sample (the default, size-consistent across domains) or as raw totals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreNormalization {
    #[default]
    PerSample,
    Total,
}

/// Labeled features partitioned into domains.
#[derive(Debug, Clone)]
pub struct MultiDomainDataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub domains: Vec<usize>,
    pub class_count: usize,
    pub domain_count: usize,
}

impl MultiDomainDataset {
    pub fn new(
        features: Matrix,
        labels: Vec<usize>,
        domains: Vec<usize>,
        class_count: usize,
        domain_count: usize,
    ) -> Result<Self, RankingError> {
        let dataset = MultiDomainDataset {
            features,
            labels,
            domains,
            class_count,
            domain_count,
        };
        dataset.validate()?;
        Ok(dataset)
    }

    pub fn validate(&self) -> Result<(), RankingError> {
        let n = self.features.nrows();
        if n == 0 || self.features.ncols() == 0 {
            return Err(RankingError::InvalidDataset(
                "features must be a nonempty matrix",
            ));
        }
        if self.labels.len() != n || self.domains.len() != n {
            return Err(RankingError::DimensionMismatch {
                expected: n,
                got: self.labels.len().min(self.domains.len()),
            });
        }
        if self.domain_count < 2 {
            return Err(RankingError::TooFewDomains);
        }
        if self.class_count == 0 || self.labels.iter().any(|&l| l >= self.class_count) {
            return Err(RankingError::InvalidDataset("label out of class range"));
        }
        let mut seen = vec![false; self.domain_count];
        for &dom in &self.domains {
            if dom >= self.domain_count {
                return Err(RankingError::InvalidDataset("domain id out of range"));
            }
            seen[dom] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(RankingError::InvalidDataset(
                "every domain id must occur at least once",
            ));
        }
        if self.features.iter().any(|v| !v.is_finite()) {
            return Err(RankingError::InvalidDataset(
                "features contain a non-finite value",
            ));
        }
        Ok(())
    }
}

/// Both log-densities for one held-out domain.
#[derive(Debug, Clone)]
pub struct DomainSplitScore {
    pub held_out_domain: usize,
    pub corr_total: f64,
    pub cov_total: f64,
    pub corr_per_sample: Vec<f64>,
    pub cov_per_sample: Vec<f64>,
    /// Set when any per-class evidence fit stopped at its iteration budget.
    pub evidence_warning: bool,
}

/// Final per-model result.
#[derive(Debug, Clone)]
pub struct ZoodScore {
    pub model_id: String,
    pub score: f64,
    pub lambda: f64,
    pub splits: Vec<DomainSplitScore>,
    /// Constant feature columns removed before scoring.
    pub dropped_columns: usize,
}

fn jittered_cholesky(
    cov: &Matrix,
    jitter_scale: f64,
) -> Result<Cholesky<f64, Dyn>, RankingError> {
    let d = cov.nrows();
    let base = cov.trace() / d as f64;
    let mut scale = jitter_scale;
    for _ in 0..=8 {
        let mut candidate = cov.clone();
        for i in 0..d {
            candidate[(i, i)] += scale * base;
        }
        if let Some(chol) = candidate.cholesky() {
            return Ok(chol);
        }
        if scale == 0.0 {
            break;
        }
        scale *= 2.0;
    }
    Err(RankingError::CovarianceDegenerate)
}

// per-row log N(x; mean, cov) given the covariance factorization
fn gaussian_log_density_rows(
    chol: &Cholesky<f64, Dyn>,
    mean: &Vector,
    rows: &Matrix,
) -> (f64, Vec<f64>) {
    let d = mean.len() as f64;
    let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let n = rows.nrows();
    let mut diffs = rows.transpose();
    for j in 0..n {
        let mut col = diffs.column_mut(j);
        col -= mean;
    }
    let solved = chol.solve(&diffs);
    let per_sample: Vec<f64> = (0..n)
        .map(|j| -0.5 * (d * LN_2PI + log_det + diffs.column(j).dot(&solved.column(j))))
        .collect();
    (per_sample.iter().sum(), per_sample)
}

/// Log-density of each held-out feature row under a Gaussian with the
/// training column means and the biased (1/n) training covariance, jittered
/// by jitter_scale * trace/d on the diagonal (doubled up to 8 times until
/// the factorization succeeds).
pub fn covariate_shift(
    train_features: &Matrix,
    heldout_features: &Matrix,
    jitter_scale: f64,
) -> Result<(f64, Vec<f64>), RankingError> {
    let d = train_features.ncols();
    if heldout_features.ncols() != d {
        return Err(RankingError::DimensionMismatch {
            expected: d,
            got: heldout_features.ncols(),
        });
    }
    if d == 0 {
        return Err(RankingError::InvalidDataset(
            "features must have at least one column",
        ));
    }
    let n = train_features.nrows();
    if n < 2 {
        return Err(RankingError::InvalidDataset(
            "covariate fit needs at least two training rows",
        ));
    }
    if !(jitter_scale >= 0.0) {
        return Err(RankingError::InvalidDataset(
            "jitter scale must be nonnegative",
        ));
    }
    let mut mean = Vector::zeros(d);
    for r in 0..n {
        mean += train_features.row(r).transpose();
    }
    mean /= n as f64;
    let mut centered = train_features.clone();
    for r in 0..n {
        let mut row = centered.row_mut(r);
        row -= mean.transpose();
    }
    let cov = centered.tr_mul(&centered) / n as f64;
    if heldout_features.nrows() == 0 {
        return Ok((0.0, Vec::new()));
    }
    let chol = jittered_cholesky(&cov, jitter_scale)?;
    Ok(gaussian_log_density_rows(&chol, &mean, heldout_features))
}

// one side of an evidence ratio: the Gram spectrum plus per-class target
// projections p = V^T Phi^T y_c and squared norms
struct EvidenceSide {
    spectrum: Spectrum,
    n: f64,
    p: Vec<Vec<f64>>,
    yty: Vec<f64>,
}

impl EvidenceSide {
    fn new(gram: Matrix, xty: &Matrix, yty: Vec<f64>, n: usize) -> Result<Self, RankingError> {
        let spectrum = Spectrum::from_gram(gram)?;
        let p = (0..xty.ncols())
            .map(|c| spectrum.project(&xty.column(c).into_owned()))
            .collect();
        Ok(EvidenceSide {
            spectrum,
            n: n as f64,
            p,
            yty,
        })
    }
}

/// Correlation-shift log-density of held-out targets and its per-sample
/// predictive decomposition.
#[derive(Debug, Clone)]
pub struct CorrelationShift {
    /// Sum over classes of log_evidence(all) - log_evidence(train) at the
    /// precisions fit on the training split.
    pub total: f64,
    /// Sum over classes of the predictive log N(y_c; mean, var) per row;
    /// used for scale estimation, not for the total.
    pub per_sample: Vec<f64>,
    pub evidence_warning: bool,
}

fn corr_between(
    train: &EvidenceSide,
    all: &EvidenceSide,
    heldout_features: &Matrix,
    heldout_targets: &Matrix,
) -> Result<CorrelationShift, RankingError> {
    let classes = train.p.len();
    let n_held = heldout_features.nrows();
    let mut total = 0.0;
    let mut per_sample = vec![0.0; n_held];
    let mut warning = false;
    // held-out rows in the training eigenbasis, shared across classes
    let projected = heldout_features * &train.spectrum.eigvecs;
    for c in 0..classes {
        let fit = train
            .spectrum
            .fit(&train.p[c], train.yty[c], train.n, FitOptions::default())
            .map_err(|e| RankingError::ClassEvidence { class: c, source: e })?;
        warning |= !fit.converged;
        let ev_all =
            all.spectrum
                .log_evidence_at(&all.p[c], all.yty[c], all.n, fit.alpha, fit.beta);
        total += ev_all - fit.log_evidence;
        for j in 0..n_held {
            let row = projected.row(j);
            let mut mean = 0.0;
            let mut quad = 0.0;
            for k in 0..row.ncols() {
                mean += row[k] * fit.summary.m_spec[k];
                quad += row[k] * row[k] / (fit.alpha + fit.beta * train.spectrum.mu[k]);
            }
            let var = 1.0 / fit.beta + quad;
            let resid = heldout_targets[(j, c)] - mean;
            per_sample[j] += -0.5 * (resid * resid / var + var.ln() + LN_2PI);
        }
    }
    if !total.is_finite() {
        return Err(RankingError::Evidence(EvidenceError::NonFinite));
    }
    Ok(CorrelationShift {
        total,
        per_sample,
        evidence_warning: warning,
    })
}

/// Evidence-ratio log-density of held-out targets given training data, one
/// independent fit per one-hot class column at shared features.
pub fn correlation_shift(
    train_features: &Matrix,
    train_targets: &Matrix,
    heldout_features: &Matrix,
    heldout_targets: &Matrix,
) -> Result<CorrelationShift, RankingError> {
    let d = train_features.ncols();
    if heldout_features.ncols() != d {
        return Err(RankingError::DimensionMismatch {
            expected: d,
            got: heldout_features.ncols(),
        });
    }
    if train_targets.nrows() != train_features.nrows()
        || heldout_targets.nrows() != heldout_features.nrows()
        || train_targets.ncols() != heldout_targets.ncols()
    {
        return Err(RankingError::DimensionMismatch {
            expected: train_targets.ncols(),
            got: heldout_targets.ncols(),
        });
    }
    if d == 0 || train_targets.ncols() == 0 {
        return Err(RankingError::InvalidDataset(
            "need at least one feature column and one target column",
        ));
    }
    let gram_train = train_features.tr_mul(train_features);
    let gram_all = &gram_train + heldout_features.tr_mul(heldout_features);
    let xty_train = train_features.tr_mul(train_targets);
    let xty_all = &xty_train + heldout_features.tr_mul(heldout_targets);
    let yty_train: Vec<f64> = (0..train_targets.ncols())
        .map(|c| train_targets.column(c).norm_squared())
        .collect();
    let yty_all: Vec<f64> = yty_train
        .iter()
        .enumerate()
        .map(|(c, v)| v + heldout_targets.column(c).norm_squared())
        .collect();
    let side_train = EvidenceSide::new(
        gram_train,
        &xty_train,
        yty_train,
        train_features.nrows(),
    )?;
    let side_all = EvidenceSide::new(
        gram_all,
        &xty_all,
        yty_all,
        train_features.nrows() + heldout_features.nrows(),
    )?;
    corr_between(&side_train, &side_all, heldout_features, heldout_targets)
}

fn drop_constant_columns(features: &Matrix) -> (Matrix, usize) {
    let d = features.ncols();
    let keep: Vec<usize> = (0..d)
        .filter(|&c| {
            let col = features.column(c);
            let first = col[0];
            col.iter().any(|&v| v != first)
        })
        .collect();
    if keep.len() == d {
        return (features.clone(), 0);
    }
    let mut kept = Matrix::zeros(features.nrows(), keep.len());
    for (out, &c) in keep.iter().enumerate() {
        kept.column_mut(out).copy_from(&features.column(c));
    }
    (kept, d - keep.len())
}

// per-domain sufficient statistics plus the materialized rows, which double
// as the held-out side of their own split
struct DomainBlock {
    features: Matrix,
    onehot: Matrix,
    gram: Matrix,
    col_sum: Vector,
    xty: Matrix,
    yty: Vec<f64>,
    rows: usize,
}

fn population_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if n == 0.0 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// Score one model's features with the default per-sample normalization.
pub fn zood_score(dataset: &MultiDomainDataset, model_id: &str) -> Result<ZoodScore, RankingError> {
    zood_score_with(dataset, model_id, ScoreNormalization::PerSample)
}

/// Score one model's features: rotate every domain out, fit evidence per
/// class and a feature Gaussian on the rest, set lambda to the ratio of the
/// pooled per-sample standard deviations, and average the combined
/// log-densities across splits.
pub fn zood_score_with(
    dataset: &MultiDomainDataset,
    model_id: &str,
    normalization: ScoreNormalization,
) -> Result<ZoodScore, RankingError> {
    dataset.validate()?;
    let (features, dropped_columns) = drop_constant_columns(&dataset.features);
    if features.ncols() == 0 {
        return Err(RankingError::InvalidDataset(
            "every feature column is constant",
        ));
    }
    let n = features.nrows();
    let d = features.ncols();
    let classes = dataset.class_count;
    let m = dataset.domain_count;

    let blocks: Vec<DomainBlock> = (0..m)
        .map(|dom| {
            let idx: Vec<usize> = (0..n).filter(|&r| dataset.domains[r] == dom).collect();
            let mut feat = Matrix::zeros(idx.len(), d);
            let mut onehot = Matrix::zeros(idx.len(), classes);
            for (out, &r) in idx.iter().enumerate() {
                feat.row_mut(out).copy_from(&features.row(r));
                onehot[(out, dataset.labels[r])] = 1.0;
            }
            // materialized transpose keeps these products on the packed
            // multiply kernel; tr_mul falls back to a scalar loop
            let feat_t = feat.transpose();
            let gram = &feat_t * &feat;
            let mut col_sum = Vector::zeros(d);
            for r in 0..idx.len() {
                col_sum += feat.row(r).transpose();
            }
            let xty = &feat_t * &onehot;
            let yty: Vec<f64> = (0..classes).map(|c| onehot.column(c).sum()).collect();
            DomainBlock {
                features: feat,
                onehot,
                gram,
                col_sum,
                xty,
                yty,
                rows: idx.len(),
            }
        })
        .collect();

    let mut gram_all = Matrix::zeros(d, d);
    let mut sum_all = Vector::zeros(d);
    let mut xty_all = Matrix::zeros(d, classes);
    let mut yty_all = vec![0.0; classes];
    for b in &blocks {
        gram_all += &b.gram;
        sum_all += &b.col_sum;
        xty_all += &b.xty;
        for c in 0..classes {
            yty_all[c] += b.yty[c];
        }
    }
    let side_all = EvidenceSide::new(gram_all.clone(), &xty_all, yty_all.clone(), n)?;

    let mut splits = Vec::with_capacity(m);
    for (dom, block) in blocks.iter().enumerate() {
        let split = (|| -> Result<DomainSplitScore, RankingError> {
            let n_train = n - block.rows;
            if n_train < 2 {
                return Err(RankingError::InvalidDataset(
                    "the training side of a split needs at least two rows",
                ));
            }
            let gram_train = &gram_all - &block.gram;
            let xty_train = &xty_all - &block.xty;
            let yty_train: Vec<f64> = (0..classes)
                .map(|c| yty_all[c] - block.yty[c])
                .collect();
            let side_train = EvidenceSide::new(gram_train.clone(), &xty_train, yty_train, n_train)?;
            let corr = corr_between(&side_train, &side_all, &block.features, &block.onehot)?;

            let mean_train = (&sum_all - &block.col_sum) / n_train as f64;
            let mut cov = gram_train / n_train as f64;
            cov.ger(-1.0, &mean_train, &mean_train, 1.0);
            let chol = jittered_cholesky(&cov, DEFAULT_JITTER_SCALE)?;
            let (cov_total, cov_per_sample) =
                gaussian_log_density_rows(&chol, &mean_train, &block.features);
            Ok(DomainSplitScore {
                held_out_domain: dom,
                corr_total: corr.total,
                cov_total,
                corr_per_sample: corr.per_sample,
                cov_per_sample,
                evidence_warning: corr.evidence_warning,
            })
        })()
        .map_err(|e| RankingError::Split {
            domain: dom,
            source: Box::new(e),
        })?;
        splits.push(split);
    }

    let pooled_corr: Vec<f64> = splits
        .iter()
        .flat_map(|s| s.corr_per_sample.iter().copied())
        .collect();
    let pooled_cov: Vec<f64> = splits
        .iter()
        .flat_map(|s| s.cov_per_sample.iter().copied())
        .collect();
    let cov_std = population_std(&pooled_cov);
    let lambda = if cov_std > 0.0 {
        population_std(&pooled_corr) / cov_std
    } else {
        0.0
    };
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let score = match normalization {
        ScoreNormalization::PerSample => {
            splits
                .iter()
                .map(|s| mean(&s.corr_per_sample) + lambda * mean(&s.cov_per_sample))
                .sum::<f64>()
                / m as f64
        }
        ScoreNormalization::Total => {
            splits
                .iter()
                .map(|s| s.corr_total + lambda * s.cov_total)
                .sum::<f64>()
                / m as f64
        }
    };
    Ok(ZoodScore {
        model_id: model_id.to_string(),
        score,
        lambda,
        splits,
        dropped_columns,
    })
}

/// Score every bundle and sort descending; ties break on model_id. Bundles
/// must share labels and domains. Models are scored in parallel on the
/// current rayon pool.
pub fn rank_zoo(
    zoo: &[FeatureBundle],
    normalization: ScoreNormalization,
) -> Result<Vec<ZoodScore>, RankingError> {
    let first = zoo
        .first()
        .ok_or(RankingError::InvalidDataset("the zoo is empty"))?;
    for bundle in zoo {
        if bundle.labels != first.labels || bundle.domains != first.domains {
            return Err(RankingError::InconsistentBundles(bundle.model_id.clone()));
        }
    }
    let class_count = first.labels.iter().max().map_or(0, |m| m + 1);
    let domain_count = first.domains.iter().max().map_or(0, |m| m + 1);
    let mut scores = zoo
        .par_iter()
        .map(|bundle| {
            let dataset = MultiDomainDataset::new(
                bundle.features.clone(),
                bundle.labels.clone(),
                bundle.domains.clone(),
                class_count,
                domain_count,
            )?;
            zood_score_with(&dataset, &bundle.model_id, normalization)
        })
        .collect::<Result<Vec<_>, _>>()?;
    scores.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.model_id.cmp(&b.model_id))
    });
    Ok(scores)
}
