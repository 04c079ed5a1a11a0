//! Rank-correlation statistics for scoring transferability metrics against
//! ground-truth accuracies: Kendall tau-b, additive-hyperbolic weighted tau,
//! and TPR/FPR for selection studies.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("series is constant; rank correlation denominator is undefined")]
    DegenerateSeries,
    #[error("truth vector needs at least one positive and one negative")]
    DegenerateTruth,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("series needs at least two entries")]
    TooShort,
    #[error("series contains a non-finite value")]
    NonFinite,
}

/// Two series over the same items, e.g. ranking scores and accuracies.
#[derive(Debug, Clone)]
pub struct PairedSeries {
    pub scores: Vec<f64>,
    pub targets: Vec<f64>,
}

impl PairedSeries {
    pub fn new(scores: Vec<f64>, targets: Vec<f64>) -> Result<Self, MetricsError> {
        if scores.len() != targets.len() {
            return Err(MetricsError::LengthMismatch {
                left: scores.len(),
                right: targets.len(),
            });
        }
        if scores.len() < 2 {
            return Err(MetricsError::TooShort);
        }
        if scores.iter().chain(&targets).any(|v| !v.is_finite()) {
            return Err(MetricsError::NonFinite);
        }
        Ok(PairedSeries { scores, targets })
    }

    fn len(&self) -> usize {
        self.scores.len()
    }
}

// pairs within tied groups of a sorted slice: sum t(t-1)/2
fn tied_pairs<F: Fn(usize, usize) -> bool>(len: usize, same: F) -> f64 {
    let mut total = 0.0;
    let mut start = 0;
    while start < len {
        let mut end = start + 1;
        while end < len && same(start, end) {
            end += 1;
        }
        let t = (end - start) as f64;
        total += t * (t - 1.0) / 2.0;
        start = end;
    }
    total
}

// merge sort counting inversions of a f64 sequence
fn count_inversions(values: &mut [f64], scratch: &mut [f64]) -> f64 {
    let len = values.len();
    if len <= 1 {
        return 0.0;
    }
    let mid = len / 2;
    let mut swaps = {
        let (left, right) = values.split_at_mut(mid);
        count_inversions(left, scratch) + count_inversions(right, scratch)
    };
    scratch[..len].copy_from_slice(values);
    let (left, right) = scratch[..len].split_at(mid);
    let (mut i, mut j) = (0, 0);
    for out in values.iter_mut() {
        if i < left.len() && (j >= right.len() || left[i] <= right[j]) {
            *out = left[i];
            i += 1;
        } else {
            *out = right[j];
            j += 1;
            swaps += (left.len() - i) as f64;
        }
    }
    swaps
}

/// Tie-corrected Kendall tau-b via sorting and merge-sort exchange counting.
pub fn kendall_tau(series: &PairedSeries) -> Result<f64, MetricsError> {
    let k = series.len();
    let mut pairs: Vec<(f64, f64)> = series
        .scores
        .iter()
        .copied()
        .zip(series.targets.iter().copied())
        .collect();
    pairs.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let n0 = k as f64 * (k as f64 - 1.0) / 2.0;
    let n1 = tied_pairs(k, |s, e| pairs[s].0 == pairs[e].0);
    let n3 = tied_pairs(k, |s, e| pairs[s] == pairs[e]);
    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut scratch = vec![0.0; k];
    let swaps = count_inversions(&mut ys, &mut scratch);
    // ys is sorted now, so y-tie groups are contiguous
    let n2 = tied_pairs(k, |s, e| ys[s] == ys[e]);

    let denom_x = n0 - n1;
    let denom_y = n0 - n2;
    if denom_x <= 0.0 || denom_y <= 0.0 {
        return Err(MetricsError::DegenerateSeries);
    }
    let concordant_minus_discordant = n0 - n1 - n2 + n3 - 2.0 * swaps;
    Ok((concordant_minus_discordant / (denom_x * denom_y).sqrt()).clamp(-1.0, 1.0))
}

// hyperbolic weights 1/(rank+1) over a descending ordering; a tied group
// gets the mean of the weights of the positions it occupies
fn hyperbolic_weights(values: &[f64]) -> Vec<f64> {
    let k = values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap());
    let mut weights = vec![0.0; k];
    let mut start = 0;
    while start < k {
        let mut end = start + 1;
        while end < k && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let mean = (start..end).map(|r| 1.0 / (r as f64 + 1.0)).sum::<f64>()
            / (end - start) as f64;
        for &i in &order[start..end] {
            weights[i] = mean;
        }
        start = end;
    }
    weights
}

/// Weighted Kendall tau with additive hyperbolic rank weights: exchanges
/// between items i and j count w_i + w_j, normalized by the same weighting
/// over all pairs; averaged over ranks taken from the scores and from the
/// targets, so the statistic is symmetric under swapping the series.
pub fn weighted_kendall_tau(series: &PairedSeries) -> Result<f64, MetricsError> {
    let k = series.len();
    let constant = |v: &[f64]| v.iter().all(|x| *x == v[0]);
    if constant(&series.scores) || constant(&series.targets) {
        return Err(MetricsError::DegenerateSeries);
    }
    let w_scores = hyperbolic_weights(&series.scores);
    let w_targets = hyperbolic_weights(&series.targets);
    let (mut num_s, mut den_s, mut num_t, mut den_t) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..k {
        for j in (i + 1)..k {
            let sign = (series.scores[i] - series.scores[j]).signum()
                * (series.targets[i] - series.targets[j]).signum();
            let pw_s = w_scores[i] + w_scores[j];
            let pw_t = w_targets[i] + w_targets[j];
            num_s += pw_s * sign;
            den_s += pw_s;
            num_t += pw_t * sign;
            den_t += pw_t;
        }
    }
    Ok((0.5 * (num_s / den_s + num_t / den_t)).clamp(-1.0, 1.0))
}

/// True and false positive rates of a mask against a ground-truth support.
pub fn tpr_fpr(mask: &[bool], truth: &[bool]) -> Result<(f64, f64), MetricsError> {
    if mask.len() != truth.len() {
        return Err(MetricsError::LengthMismatch {
            left: mask.len(),
            right: truth.len(),
        });
    }
    let positives = truth.iter().filter(|&&t| t).count();
    let negatives = truth.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(MetricsError::DegenerateTruth);
    }
    let tp = mask.iter().zip(truth).filter(|(&m, &t)| m && t).count();
    let fp = mask.iter().zip(truth).filter(|(&m, &t)| m && !t).count();
    Ok((tp as f64 / positives as f64, fp as f64 / negatives as f64))
}
