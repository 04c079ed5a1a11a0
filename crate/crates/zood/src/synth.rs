//! Seeded synthetic data: a sparse linear-regression generator for
//! recovery studies and a multi-domain generator whose targets depend on an
//! invariant block while the remaining coordinates mix it with per-domain
//! noise, so leave-one-domain-out loss identifies the invariant block.
//!
//! Every draw comes from a ChaCha12 stream keyed by (seed, domain, purpose),
//! so regenerating any domain or component is reproducible in isolation.

use crate::evidence::DesignPair;
use crate::ranking::MultiDomainDataset;
use crate::{Matrix, Vector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use thiserror::Error;

const PURPOSE_MIX: u64 = 0;
const PURPOSE_INVARIANT: u64 = 1;
const PURPOSE_DOMAIN_NOISE: u64 = 2;
const PURPOSE_TARGET_NOISE: u64 = 3;
const PURPOSE_COEFF: u64 = 4;
const PURPOSE_DESIGN: u64 = 5;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(&'static str),
    #[error("subset is empty, out of range, or repeats an index")]
    BadSubset,
    #[error("subset size {size} must be below the smallest domain size {smallest}")]
    SubsetTooLarge { size: usize, smallest: usize },
    #[error("least squares fit is singular even with ridge fallback")]
    SingularFit,
    #[error("exhaustive search over {d} features exceeds the cap of {max_d}")]
    TooLarge { d: usize, max_d: usize },
}

fn stream(seed: u64, domain: u64, purpose: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(domain * 16 + purpose);
    rng
}

fn normal_matrix(rng: &mut ChaCha12Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn normal_vector(rng: &mut ChaCha12Rng, len: usize) -> Vector {
    Vector::from_fn(len, |_, _| StandardNormal.sample(rng))
}

/// Sparse regression: which of `d` standard-normal features carry signal.
#[derive(Debug, Clone)]
pub struct RegressionSpec {
    pub d: usize,
    /// Number of active features; these are the first k columns.
    pub k: usize,
    pub n: usize,
    pub seed: u64,
}

/// Draw x ~ N(0, I), coefficients U(1, 3) on the first k features and zero
/// elsewhere, y = x beta + N(0, 1). Returns the data and the active mask.
pub fn gen_regression(spec: &RegressionSpec) -> Result<(DesignPair, Vec<bool>), SynthError> {
    if spec.k == 0 || spec.k > spec.d {
        return Err(SynthError::InvalidSpec("k must satisfy 1 <= k <= d"));
    }
    if spec.n == 0 {
        return Err(SynthError::InvalidSpec("n must be positive"));
    }
    let features = normal_matrix(&mut stream(spec.seed, 0, PURPOSE_DESIGN), spec.n, spec.d);
    let coeff_dist = Uniform::new(1.0, 3.0).expect("static bounds");
    let mut coeff_rng = stream(spec.seed, 0, PURPOSE_COEFF);
    let mut beta = Vector::zeros(spec.d);
    for i in 0..spec.k {
        beta[i] = coeff_dist.sample(&mut coeff_rng);
    }
    let noise = normal_vector(&mut stream(spec.seed, 0, PURPOSE_TARGET_NOISE), spec.n);
    let targets = &features * &beta + noise;
    let truth = (0..spec.d).map(|i| i < spec.k).collect();
    Ok((
        DesignPair { features, targets },
        truth,
    ))
}

/// Multi-domain layout: `d_star` invariant coordinates, `d - d_star`
/// domain-dependent mixtures of them.
#[derive(Debug, Clone)]
pub struct InvariantDomainSpec {
    /// Size of the invariant block (the first d_star columns).
    pub d_star: usize,
    /// Total feature count.
    pub d: usize,
    pub domain_count: usize,
    /// Samples per domain.
    pub n_per: usize,
    /// Variance of the additive noise on the mixed coordinates.
    pub s2: f64,
    /// Variance of the target noise.
    pub sigma2: f64,
    /// Coefficients on the invariant block; drawn U(1, 3) when absent.
    pub beta_iv: Option<Vec<f64>>,
    pub seed: u64,
}

impl InvariantDomainSpec {
    fn validate(&self) -> Result<(), SynthError> {
        if self.d_star == 0 || self.d_star >= self.d {
            return Err(SynthError::InvalidSpec("need 1 <= d_star < d"));
        }
        if self.domain_count < 2 {
            return Err(SynthError::InvalidSpec("need at least two domains"));
        }
        if self.n_per == 0 {
            return Err(SynthError::InvalidSpec("n_per must be positive"));
        }
        if !(self.s2 >= 0.0) || !(self.sigma2 > 0.0) {
            return Err(SynthError::InvalidSpec(
                "s2 must be nonnegative and sigma2 positive",
            ));
        }
        if let Some(b) = &self.beta_iv {
            if b.len() != self.d_star {
                return Err(SynthError::InvalidSpec("beta_iv must have length d_star"));
            }
        }
        Ok(())
    }
}

/// Generated multi-domain regression data with continuous targets.
#[derive(Debug, Clone)]
pub struct MultiDomainRegression {
    /// (domain_count * n_per) x d, domains stacked in order.
    pub features: Matrix,
    pub targets: Vector,
    pub domains: Vec<usize>,
    pub domain_count: usize,
    /// True for the invariant columns.
    pub truth: Vec<bool>,
}

impl MultiDomainRegression {
    /// Binarize the targets at zero to obtain a two-class labeled dataset.
    pub fn to_classification(&self) -> MultiDomainDataset {
        let labels = self
            .targets
            .iter()
            .map(|&y| usize::from(y > 0.0))
            .collect();
        MultiDomainDataset {
            features: self.features.clone(),
            labels,
            domains: self.domains.clone(),
            class_count: 2,
            domain_count: self.domain_count,
        }
    }
}

/// Per domain D: invariant block x_iv ~ N(0, I), mixed block
/// x_iv A_D + sqrt(s2) e with A_D and e standard normal, and targets
/// y = x_iv beta_iv + sqrt(sigma2) eps. A_D is redrawn per domain; beta_iv
/// is shared.
pub fn gen_multidomain(spec: &InvariantDomainSpec) -> Result<MultiDomainRegression, SynthError> {
    spec.validate()?;
    let d_mix = spec.d - spec.d_star;
    let beta_iv = match &spec.beta_iv {
        Some(b) => Vector::from_vec(b.clone()),
        None => {
            let dist = Uniform::new(1.0, 3.0).expect("static bounds");
            let mut rng = stream(spec.seed, 0, PURPOSE_COEFF);
            Vector::from_fn(spec.d_star, |_, _| dist.sample(&mut rng))
        }
    };
    let n_total = spec.domain_count * spec.n_per;
    let mut features = Matrix::zeros(n_total, spec.d);
    let mut targets = Vector::zeros(n_total);
    let mut domains = Vec::with_capacity(n_total);
    let s = spec.s2.sqrt();
    let sigma = spec.sigma2.sqrt();
    for dom in 0..spec.domain_count {
        let key = dom as u64;
        let mix = normal_matrix(&mut stream(spec.seed, key, PURPOSE_MIX), spec.d_star, d_mix);
        let x_iv = normal_matrix(
            &mut stream(spec.seed, key, PURPOSE_INVARIANT),
            spec.n_per,
            spec.d_star,
        );
        let noise = normal_matrix(
            &mut stream(spec.seed, key, PURPOSE_DOMAIN_NOISE),
            spec.n_per,
            d_mix,
        );
        let eps = normal_vector(&mut stream(spec.seed, key, PURPOSE_TARGET_NOISE), spec.n_per);
        let x_mix = &x_iv * &mix + noise * s;
        let y = &x_iv * &beta_iv + eps * sigma;
        let row0 = dom * spec.n_per;
        features
            .view_mut((row0, 0), (spec.n_per, spec.d_star))
            .copy_from(&x_iv);
        features
            .view_mut((row0, spec.d_star), (spec.n_per, d_mix))
            .copy_from(&x_mix);
        targets.rows_mut(row0, spec.n_per).copy_from(&y);
        domains.extend(std::iter::repeat_n(dom, spec.n_per));
    }
    let truth = (0..spec.d).map(|i| i < spec.d_star).collect();
    Ok(MultiDomainRegression {
        features,
        targets,
        domains,
        domain_count: spec.domain_count,
        truth,
    })
}

// Sufficient statistics per domain for least squares on column subsets.
struct DomainStats {
    gram: Matrix,
    xty: Vector,
    yty: f64,
    rows: usize,
}

fn domain_stats(data: &MultiDomainRegression) -> Vec<DomainStats> {
    let d = data.features.ncols();
    let mut stats: Vec<DomainStats> = (0..data.domain_count)
        .map(|_| DomainStats {
            gram: Matrix::zeros(d, d),
            xty: Vector::zeros(d),
            yty: 0.0,
            rows: 0,
        })
        .collect();
    for (r, &dom) in data.domains.iter().enumerate() {
        let row = data.features.row(r);
        let y = data.targets[r];
        let s = &mut stats[dom];
        s.gram.ger(1.0, &row.transpose(), &row.transpose(), 1.0);
        s.xty.axpy(y, &row.transpose(), 1.0);
        s.yty += y * y;
        s.rows += 1;
    }
    stats
}

fn check_layout(data: &MultiDomainRegression) -> Result<(), SynthError> {
    if data.domain_count < 2 {
        return Err(SynthError::InvalidSpec("need at least two domains"));
    }
    if data.domains.len() != data.features.nrows()
        || data.domains.iter().any(|&d| d >= data.domain_count)
    {
        return Err(SynthError::InvalidSpec("domain ids are out of range"));
    }
    Ok(())
}

fn check_subset(subset: &[usize], d: usize) -> Result<(), SynthError> {
    if subset.is_empty() {
        return Err(SynthError::BadSubset);
    }
    let mut seen = vec![false; d];
    for &i in subset {
        if i >= d || seen[i] {
            return Err(SynthError::BadSubset);
        }
        seen[i] = true;
    }
    Ok(())
}

fn subset_loss_from_stats(stats: &[DomainStats], subset: &[usize]) -> Result<f64, SynthError> {
    let k = subset.len();
    let pair_count = stats.len() * (stats.len() - 1);
    let mut total = 0.0;
    for (ti, train) in stats.iter().enumerate() {
        let mut gram = Matrix::zeros(k, k);
        let mut xty = Vector::zeros(k);
        for (a, &i) in subset.iter().enumerate() {
            xty[a] = train.xty[i];
            for (b, &j) in subset.iter().enumerate() {
                gram[(a, b)] = train.gram[(i, j)];
            }
        }
        let coeff = match gram.clone().cholesky() {
            Some(chol) => chol.solve(&xty),
            None => {
                let ridge = 1e-8 * (gram.trace() / k as f64).max(1.0);
                for i in 0..k {
                    gram[(i, i)] += ridge;
                }
                gram.cholesky()
                    .ok_or(SynthError::SingularFit)?
                    .solve(&xty)
            }
        };
        for (vi, val) in stats.iter().enumerate() {
            if vi == ti {
                continue;
            }
            let mut gram_v = Matrix::zeros(k, k);
            let mut xty_v = Vector::zeros(k);
            for (a, &i) in subset.iter().enumerate() {
                xty_v[a] = val.xty[i];
                for (b, &j) in subset.iter().enumerate() {
                    gram_v[(a, b)] = val.gram[(i, j)];
                }
            }
            let sse = val.yty - 2.0 * coeff.dot(&xty_v) + (&gram_v * &coeff).dot(&coeff);
            total += sse.max(0.0) / val.rows as f64;
        }
    }
    Ok(total / pair_count as f64)
}

/// Mean per-sample squared validation error of ordinary least squares on the
/// given feature subset, averaged over all ordered (train, validate) domain
/// pairs. A singular normal system falls back once to a small ridge.
pub fn subset_cv_loss(data: &MultiDomainRegression, subset: &[usize]) -> Result<f64, SynthError> {
    check_layout(data)?;
    check_subset(subset, data.features.ncols())?;
    let stats = domain_stats(data);
    let smallest = stats.iter().map(|s| s.rows).min().unwrap_or(0);
    if subset.len() >= smallest {
        return Err(SynthError::SubsetTooLarge {
            size: subset.len(),
            smallest,
        });
    }
    subset_loss_from_stats(&stats, subset)
}

/// Losses for every nonempty feature subset, with the per-domain statistics
/// computed once. Rows come out in bitmask order.
pub fn subset_cv_table(
    data: &MultiDomainRegression,
    max_d: usize,
) -> Result<Vec<(Vec<usize>, f64)>, SynthError> {
    check_layout(data)?;
    let d = data.features.ncols();
    if d > max_d {
        return Err(SynthError::TooLarge { d, max_d });
    }
    let stats = domain_stats(data);
    let smallest = stats.iter().map(|s| s.rows).min().unwrap_or(0);
    if d >= smallest {
        return Err(SynthError::SubsetTooLarge {
            size: d,
            smallest,
        });
    }
    let mut table = Vec::with_capacity((1usize << d) - 1);
    for bits in 1u64..(1u64 << d) {
        let subset: Vec<usize> = (0..d).filter(|i| bits >> i & 1 == 1).collect();
        let loss = subset_loss_from_stats(&stats, &subset)?;
        table.push((subset, loss));
    }
    Ok(table)
}

/// Enumerate every nonempty feature subset and return the loss minimizer.
/// Ties resolve to the smaller subset, then lexicographic index order.
pub fn exhaustive_subset_argmin(
    data: &MultiDomainRegression,
    max_d: usize,
) -> Result<(Vec<usize>, f64), SynthError> {
    let table = subset_cv_table(data, max_d)?;
    let mut best: Option<(Vec<usize>, f64)> = None;
    for (subset, loss) in table {
        let better = match &best {
            None => true,
            Some((cur, cur_loss)) => {
                loss < *cur_loss
                    || (loss == *cur_loss
                        && (subset.len() < cur.len()
                            || (subset.len() == cur.len() && subset < *cur)))
            }
        };
        if better {
            best = Some((subset, loss));
        }
    }
    Ok(best.expect("at least one subset"))
}
