//! Small statistics helpers: sample summaries, batch means and the
//! two-sample Kolmogorov-Smirnov test.

use serde::Serialize;

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub stderr: f64,
}

/// Mean, unbiased variance and standard error of i.i.d. samples.
pub fn summarize(xs: &[f64]) -> Summary {
    let n = xs.len();
    if n == 0 {
        return Summary { n, mean: f64::NAN, variance: f64::NAN, stderr: f64::NAN };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let variance = if n > 1 { xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
    Summary { n, mean, variance, stderr: (variance / n as f64).sqrt() }
}

/// Batch-means summary: the stderr is computed from the spread of
/// `batches` contiguous batch averages. Trailing samples that do not fill a
/// batch are dropped from the stderr but kept in the mean.
pub fn batch_means(xs: &[f64], batches: usize) -> Summary {
    let n = xs.len();
    let batches = batches.clamp(1, n.max(1));
    let size = n / batches;
    let mean = xs.iter().sum::<f64>() / n as f64;
    if size == 0 || batches < 2 {
        return summarize(xs);
    }
    let avgs: Vec<f64> = xs.chunks_exact(size).take(batches).map(|c| c.iter().sum::<f64>() / size as f64).collect();
    let s = summarize(&avgs);
    Summary { n, mean, variance: s.variance * size as f64, stderr: s.stderr }
}

/// Ratio of means `sum(num) / sum(den)` with a batch-means stderr from the
/// delta method.
pub fn batch_ratio(num: &[f64], den: &[f64], batches: usize) -> (f64, f64) {
    assert_eq!(num.len(), den.len());
    let n = num.len();
    let batches = batches.clamp(2, n.max(2));
    let size = (n / batches).max(1);
    let total_num: f64 = num.iter().sum();
    let total_den: f64 = den.iter().sum();
    let ratio = total_num / total_den;
    let resid: Vec<f64> = num
        .chunks_exact(size)
        .zip(den.chunks_exact(size))
        .map(|(a, b)| (a.iter().sum::<f64>() - ratio * b.iter().sum::<f64>()) / size as f64)
        .collect();
    let s = summarize(&resid);
    (ratio, s.stderr / (total_den / n as f64))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    /// Asymptotic p-value from the Kolmogorov distribution.
    pub p_value: f64,
    pub n: usize,
    pub m: usize,
}

impl KsResult {
    /// Large-sample critical value of the statistic at level `alpha`.
    pub fn critical_value(&self, alpha: f64) -> f64 {
        let (n, m) = (self.n as f64, self.m as f64);
        (-(alpha / 2.0).ln() / 2.0).sqrt() * ((n + m) / (n * m)).sqrt()
    }

    pub fn rejects(&self, alpha: f64) -> bool {
        self.statistic > self.critical_value(alpha)
    }
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`, with ties
/// handled by advancing both samples past equal values.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    KsResult { statistic: d, p_value: kolmogorov_q(lambda), n, m }
}

/// `Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2)`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
