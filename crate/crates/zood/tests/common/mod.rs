//! Independent numerical oracles shared by the integration tests.
//!
//! Every routine recomputes its quantity through a route the library does
//! not take: dense n-by-n factorizations, grid quadrature, or exhaustive
//! enumeration. Nothing here may call into the crate under test.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

pub const LN_2PI: f64 = 1.837_877_066_409_345_3;

pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha12Rng, n: usize, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(rng))
}

pub fn gaussian_vector(rng: &mut ChaCha12Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// Log density of x under N(mean, cov) with a dense Cholesky factorization.
pub fn dense_gaussian_log_pdf(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let chol = cov.clone().cholesky().expect("oracle covariance not SPD");
    let diff = x - mean;
    let solved = chol.solve(&diff);
    let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    -0.5 * (x.len() as f64 * LN_2PI + log_det + diff.dot(&solved))
}

/// Marginal of the Gaussian linear model, integrated in observation space:
/// log N(y; 0, alpha^-1 Phi Phi^T + beta^-1 I_n).
pub fn dense_marginal_log_density(
    phi: &DMatrix<f64>,
    y: &DVector<f64>,
    alpha: f64,
    beta: f64,
) -> f64 {
    let n = phi.nrows();
    let mut cov = phi * phi.transpose() / alpha;
    for i in 0..n {
        cov[(i, i)] += 1.0 / beta;
    }
    dense_gaussian_log_pdf(y, &DVector::zeros(n), &cov)
}

/// Predictive mean and variance per new row, derived by conditioning the
/// joint Gaussian of (y, y_new) rather than through the posterior of w.
pub fn dense_predictive(
    phi: &DMatrix<f64>,
    y: &DVector<f64>,
    phi_new: &DMatrix<f64>,
    alpha: f64,
    beta: f64,
) -> (DVector<f64>, DVector<f64>) {
    let n = phi.nrows();
    let mut cov_yy = phi * phi.transpose() / alpha;
    for i in 0..n {
        cov_yy[(i, i)] += 1.0 / beta;
    }
    let chol = cov_yy.cholesky().expect("oracle covariance not SPD");
    let solved_y = chol.solve(y);
    let m = phi_new.nrows();
    let mut mean = DVector::zeros(m);
    let mut var = DVector::zeros(m);
    for j in 0..m {
        let row = phi_new.row(j).transpose();
        // cross covariance k = alpha^-1 Phi row
        let k = phi * &row / alpha;
        mean[j] = k.dot(&solved_y);
        var[j] = row.dot(&row) / alpha + 1.0 / beta - k.dot(&chol.solve(&k));
    }
    (mean, var)
}

/// Simpson weights over an odd-sized uniform grid with spacing h.
fn simpson_weights(points: usize, h: f64) -> Vec<f64> {
    assert!(points >= 3 && points % 2 == 1);
    let mut w = vec![0.0; points];
    for (i, wi) in w.iter_mut().enumerate() {
        *wi = if i == 0 || i == points - 1 {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        } * h
            / 3.0;
    }
    w
}

/// Streaming log-sum-exp accumulator.
pub struct LogSumExp {
    max: f64,
    sum: f64,
}

impl LogSumExp {
    pub fn new() -> Self {
        LogSumExp {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    pub fn add(&mut self, v: f64) {
        if v == f64::NEG_INFINITY {
            return;
        }
        if v <= self.max {
            self.sum += (v - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - v).exp() + 1.0;
            self.max = v;
        }
    }

    pub fn value(&self) -> f64 {
        self.max + self.sum.ln()
    }
}

/// Grid quadrature of the weight-space integral
/// ∫ N(y; Phi w, beta^-1 I) N(w; 0, alpha^-1 I) dw for d ≤ 2,
/// Simpson rule on a grid centered at the posterior mean.
pub fn quadrature_log_marginal(
    phi: &DMatrix<f64>,
    y: &DVector<f64>,
    alpha: f64,
    beta: f64,
    points: usize,
) -> f64 {
    let n = phi.nrows();
    let d = phi.ncols();
    assert!(d >= 1 && d <= 2, "quadrature oracle supports d <= 2 only");
    // Center and radius from a dense posterior solve; this only places the
    // grid, the integrand below is evaluated from scratch.
    let mut a = phi.transpose() * phi * beta;
    for i in 0..d {
        a[(i, i)] += alpha;
    }
    let chol = a.cholesky().expect("posterior precision not SPD");
    let center = chol.solve(&(phi.transpose() * y)) * beta;
    let a_inv = chol.inverse();
    let radius: Vec<f64> = (0..d)
        .map(|i| 10.0 * a_inv[(i, i)].sqrt().max(alpha.powf(-0.5)))
        .collect();

    let log_lik_const = 0.5 * n as f64 * (beta.ln() - LN_2PI);
    let log_prior_const = 0.5 * d as f64 * (alpha.ln() - LN_2PI);
    let log_integrand = |w: &[f64]| -> f64 {
        let mut rss = 0.0;
        for i in 0..n {
            let mut fit = 0.0;
            for (j, wj) in w.iter().enumerate() {
                fit += phi[(i, j)] * wj;
            }
            let r = y[i] - fit;
            rss += r * r;
        }
        let wsq: f64 = w.iter().map(|v| v * v).sum();
        log_lik_const - 0.5 * beta * rss + log_prior_const - 0.5 * alpha * wsq
    };

    let axis = |dim: usize| -> (Vec<f64>, Vec<f64>) {
        let h = 2.0 * radius[dim] / (points - 1) as f64;
        let grid: Vec<f64> = (0..points)
            .map(|i| center[dim] - radius[dim] + i as f64 * h)
            .collect();
        (grid, simpson_weights(points, h))
    };

    let mut acc = LogSumExp::new();
    if d == 1 {
        let (grid, w) = axis(0);
        for (g, wt) in grid.iter().zip(&w) {
            acc.add(log_integrand(&[*g]) + wt.ln());
        }
    } else {
        let (grid0, w0) = axis(0);
        let (grid1, w1) = axis(1);
        for (g0, wt0) in grid0.iter().zip(&w0) {
            for (g1, wt1) in grid1.iter().zip(&w1) {
                acc.add(log_integrand(&[*g0, *g1]) + (wt0 * wt1).ln());
            }
        }
    }
    acc.value()
}

/// O(k^2) pair-count tau-b, straight from the definition.
pub fn brute_kendall_tau(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let k = xs.len();
    let (mut conc, mut disc, mut tie_x, mut tie_y) = (0f64, 0f64, 0f64, 0f64);
    for i in 0..k {
        for j in (i + 1)..k {
            let dx = (xs[i] - xs[j]).signum();
            let dy = (ys[i] - ys[j]).signum();
            let tx = xs[i] == xs[j];
            let ty = ys[i] == ys[j];
            if tx && ty {
                // joint ties drop out of both denominator factors
            } else if tx {
                tie_x += 1.0;
            } else if ty {
                tie_y += 1.0;
            } else if dx == dy {
                conc += 1.0;
            } else {
                disc += 1.0;
            }
        }
    }
    let denom = ((conc + disc + tie_y) * (conc + disc + tie_x)).sqrt();
    (conc - disc) / denom
}

/// Hyperbolic rank weights 1/(rank+1) from a descending ordering of v;
/// tied entries receive the mean of the weights of the positions they occupy.
pub fn hyperbolic_weights(v: &[f64]) -> Vec<f64> {
    let k = v.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| v[b].partial_cmp(&v[a]).unwrap());
    let mut w = vec![0.0; k];
    let mut start = 0;
    while start < k {
        let mut end = start + 1;
        while end < k && v[order[end]] == v[order[start]] {
            end += 1;
        }
        let mean: f64 = (start..end).map(|r| 1.0 / (r as f64 + 1.0)).sum::<f64>()
            / (end - start) as f64;
        for &i in &order[start..end] {
            w[i] = mean;
        }
        start = end;
    }
    w
}

fn weighted_pair_pass(scores: &[f64], targets: &[f64], w: &[f64]) -> f64 {
    let k = scores.len();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..k {
        for j in (i + 1)..k {
            let pw = w[i] + w[j];
            den += pw;
            num += pw * (scores[i] - scores[j]).signum() * (targets[i] - targets[j]).signum();
        }
    }
    num / den
}

/// Additive hyperbolic weighted tau: one pass with weights from the score
/// ranks, one with weights from the target ranks, averaged; each pass
/// normalized by its own weighting over all pairs.
pub fn brute_weighted_kendall_tau(scores: &[f64], targets: &[f64]) -> f64 {
    assert_eq!(scores.len(), targets.len());
    let wa = hyperbolic_weights(scores);
    let wb = hyperbolic_weights(targets);
    0.5 * (weighted_pair_pass(scores, targets, &wa) + weighted_pair_pass(scores, targets, &wb))
}

/// log p(y, mask) for the two-Gaussian mixture prior at fixed
/// hyper-parameters: dense marginal over w plus the Bernoulli mask prior.
pub fn mask_log_posterior(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    mask: &[bool],
    alpha_slab: f64,
    alpha_spike: f64,
    beta: f64,
    prior_pi: f64,
) -> f64 {
    let n = x.nrows();
    let mut cov = DMatrix::<f64>::identity(n, n) / beta;
    let mut log_prior = 0.0;
    for (i, &on) in mask.iter().enumerate() {
        let a = if on { alpha_slab } else { alpha_spike };
        let col = x.column(i).into_owned();
        cov.ger(1.0 / a, &col, &col, 1.0);
        log_prior += if on { prior_pi.ln() } else { (1.0 - prior_pi).ln() };
    }
    dense_gaussian_log_pdf(y, &DVector::zeros(n), &cov) + log_prior
}

/// Exact model selection: the mask maximizing log p(y, mask) over all 2^d
/// masks at fixed hyper-parameters. Ties resolve to the first maximizer in
/// ascending bit order.
pub fn exhaustive_mask_argmax(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    alpha_slab: f64,
    alpha_spike: f64,
    beta: f64,
    prior_pi: f64,
) -> Vec<bool> {
    let d = x.ncols();
    assert!(d <= 16, "exhaustive oracle is for small d");
    let mut best = (f64::NEG_INFINITY, 0usize);
    for bits in 0..(1usize << d) {
        let mask: Vec<bool> = (0..d).map(|i| bits >> i & 1 == 1).collect();
        let lp = mask_log_posterior(x, y, &mask, alpha_slab, alpha_spike, beta, prior_pi);
        if lp > best.0 {
            best = (lp, bits);
        }
    }
    (0..d).map(|i| best.1 >> i & 1 == 1).collect()
}

fn log_gamma_pdf(x: f64, shape: f64, scale: f64) -> f64 {
    (shape - 1.0) * x.ln() - x / scale
        - statrs::function::gamma::ln_gamma(shape)
        - shape * scale.ln()
}

/// log p(y) for the d=2 spike-and-slab model with Gamma hyper-priors:
/// enumeration over the 4 masks, Simpson quadrature over
/// (alpha_1, alpha_2, beta) in log space, Woodbury identities keeping each
/// node O(1) after the Gram precomputation.
///
/// nu = (noise shape, noise scale, slab shape, slab scale, spike shape,
/// spike scale), matching the library's prior layout.
pub fn quadrature_mask_marginal(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    prior_pi: f64,
    nu: &[f64; 6],
    points: usize,
) -> f64 {
    let n = x.nrows() as f64;
    let d = x.ncols();
    assert_eq!(d, 2, "mask-marginal quadrature oracle is d = 2 only");
    let g = x.transpose() * x;
    let b = x.transpose() * y;
    let yty = y.dot(y);

    // log N(y; 0, beta^-1 I + X diag(1/a1, 1/a2) X^T) via the determinant
    // lemma and Woodbury, all in 2x2 arithmetic
    let log_lik = |a1: f64, a2: f64, beta: f64| -> f64 {
        let m00 = a1 + beta * g[(0, 0)];
        let m01 = beta * g[(0, 1)];
        let m11 = a2 + beta * g[(1, 1)];
        let det_m = m00 * m11 - m01 * m01;
        let log_det_cov = -n * beta.ln() + det_m.ln() - a1.ln() - a2.ln();
        // quadratic form y^T C^-1 y = beta y'y - beta^2 b^T M^-1 b
        let (b0, b1) = (b[0], b[1]);
        let quad_m = (m11 * b0 * b0 - 2.0 * m01 * b0 * b1 + m00 * b1 * b1) / det_m;
        let quad = beta * yty - beta * beta * quad_m;
        -0.5 * (n * LN_2PI + log_det_cov + quad)
    };

    // log-space Simpson axis over a Gamma(shape, scale) hyper-prior,
    // integrand already includes the prior density and the e^u Jacobian
    let axis = |shape: f64, scale: f64| -> Vec<(f64, f64)> {
        let lo = -16.0;
        let hi = scale.ln() + 5.0 + shape.ln().max(0.0);
        let h = (hi - lo) / (points - 1) as f64;
        let w = simpson_weights(points, h);
        (0..points)
            .map(|i| {
                let u = lo + i as f64 * h;
                let a = u.exp();
                (a, log_gamma_pdf(a, shape, scale) + u + w[i].ln())
            })
            .collect()
    };

    let beta_axis = axis(nu[0], nu[1]);
    let slab_axis = axis(nu[2], nu[3]);
    let spike_axis = axis(nu[4], nu[5]);

    let mut total = LogSumExp::new();
    for bits in 0..4usize {
        let on = [bits & 1 == 1, bits >> 1 & 1 == 1];
        let log_pz: f64 = on
            .iter()
            .map(|&z| if z { prior_pi.ln() } else { (1.0 - prior_pi).ln() })
            .sum();
        let axis1 = if on[0] { &slab_axis } else { &spike_axis };
        let axis2 = if on[1] { &slab_axis } else { &spike_axis };
        let mut mass = LogSumExp::new();
        for &(a1, lw1) in axis1 {
            for &(a2, lw2) in axis2 {
                for &(beta, lwb) in &beta_axis {
                    mass.add(log_lik(a1, a2, beta) + lw1 + lw2 + lwb);
                }
            }
        }
        total.add(log_pz + mass.value());
    }
    total.value()
}
