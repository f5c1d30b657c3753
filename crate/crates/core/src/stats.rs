//! Small statistics toolkit for the Monte Carlo checks.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};

/// Sample mean.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n as f64 - 1.0)
}

pub fn std_err(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Linear-interpolated quantile of an unsorted sample.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Two-sided standard normal quantile for confidence `level`.
pub fn z_quantile(level: f64) -> f64 {
    let n = Normal::standard();
    n.inverse_cdf(0.5 + level / 2.0)
}

/// Mean and normal-approximation halfwidth at 95%.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct MeanCi {
    pub mean: f64,
    pub halfwidth: f64,
    pub n: usize,
}

impl MeanCi {
    pub fn of(xs: &[f64]) -> Self {
        let halfwidth = if xs.len() < 2 { 0.0 } else { z_quantile(0.95) * std_err(xs) };
        MeanCi { mean: mean(xs), halfwidth, n: xs.len() }
    }

    pub fn contains(&self, x: f64) -> bool {
        (x - self.mean).abs() <= self.halfwidth
    }

    pub fn excludes_zero(&self) -> bool {
        !self.contains(0.0)
    }
}

/// Binomial proportion with its standard error.
pub fn proportion(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let p = successes as f64 / n as f64;
    (p, (p * (1.0 - p) / n as f64).sqrt())
}

/// Asymptotic Kolmogorov survival `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for j in 1..=100 {
        let j = j as f64;
        let term = (-2.0 * j * j * lambda * lambda).exp();
        s += if (j as i64) % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> KsResult {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in v.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let sn = n.sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    KsResult { statistic: d, p_value: kolmogorov_sf(lambda) }
}

/// Two-sample Kolmogorov–Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(|p, q| p.total_cmp(q));
    y.sort_by(|p, q| p.total_cmp(q));
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let t = x[i].min(y[j]);
        while i < n && x[i] <= t {
            i += 1;
        }
        while j < m && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let sn = ne.sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    KsResult { statistic: d, p_value: kolmogorov_sf(lambda) }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Chi-square test of homogeneity between count vectors over the same
/// categories. Categories whose expected count falls below 5 in either
/// row are pooled into one bin.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> ChiSquareResult {
    assert_eq!(a.len(), b.len());
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    let total = (na + nb) as f64;
    let mut rows: Vec<(f64, f64)> = Vec::new();
    let mut pooled = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let col = (*x + *y) as f64;
        if col == 0.0 {
            continue;
        }
        let ea = col * na as f64 / total;
        let eb = col * nb as f64 / total;
        if ea < 5.0 || eb < 5.0 {
            pooled.0 += *x as f64;
            pooled.1 += *y as f64;
        } else {
            rows.push((*x as f64, *y as f64));
        }
    }
    if pooled.0 + pooled.1 > 0.0 {
        rows.push(pooled);
    }
    let mut stat = 0.0;
    for (x, y) in &rows {
        let col = x + y;
        let ea = col * na as f64 / total;
        let eb = col * nb as f64 / total;
        stat += (x - ea).powi(2) / ea + (y - eb).powi(2) / eb;
    }
    let dof = rows.len().saturating_sub(1);
    let p_value = if dof == 0 { 1.0 } else { ChiSquared::new(dof as f64).map(|d| d.sf(stat)).unwrap_or(f64::NAN) };
    ChiSquareResult { statistic: stat, dof, p_value }
}

/// Ranks with ties sharing their mean rank (1-based).
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct SpearmanResult {
    pub rho: f64,
    /// One-sided p-value for a negative correlation.
    pub p_negative: f64,
    pub n: usize,
}

/// Spearman rank correlation with a Student-t approximation for the p-value.
pub fn spearman(x: &[f64], y: &[f64]) -> SpearmanResult {
    let n = x.len();
    let rho = pearson(&ranks(x), &ranks(y));
    let p_negative = if n < 3 {
        1.0
    } else if rho <= -1.0 {
        0.0
    } else {
        let df = (n - 2) as f64;
        let t = rho * (df / (1.0 - rho * rho).max(1e-300)).sqrt();
        StudentsT::new(0.0, 1.0, df).map(|d| d.cdf(t)).unwrap_or(f64::NAN)
    };
    SpearmanResult { rho, p_negative, n }
}

/// Least-squares slope and intercept with the slope's standard error.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len() as f64;
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_se = if n > 2.0 { (rss / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    LinearFit { slope, intercept, slope_se }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kolmogorov_reference_values() {
        // Standard table values of the limiting distribution.
        assert_relative_eq!(kolmogorov_sf(1.3581), 0.05, epsilon = 2e-4);
        assert_relative_eq!(kolmogorov_sf(1.6276), 0.01, epsilon = 1e-4);
    }

    #[test]
    fn ks_accepts_uniform_grid() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let r = ks_one_sample(&xs, |x| x.clamp(0.0, 1.0));
        assert!(r.statistic < 1e-3 + 1e-12);
        assert!(r.p_value > 0.99);
        let shifted: Vec<f64> = xs.iter().map(|x| x * x).collect();
        assert!(ks_two_sample(&xs, &shifted).p_value < 1e-6);
    }

    #[test]
    fn chi_square_of_identical_rows_is_zero() {
        let r = chi_square_homogeneity(&[50, 30, 20], &[100, 60, 40]);
        assert!(r.statistic.abs() < 1e-12);
        assert_eq!(r.dof, 2);
        assert_relative_eq!(r.p_value, 1.0);
    }

    #[test]
    fn chi_square_matches_hand_value() {
        // 2x2 table [[10, 20], [20, 10]]: statistic = 20/3.
        let r = chi_square_homogeneity(&[10, 20], &[20, 10]);
        assert_relative_eq!(r.statistic, 20.0 / 3.0, epsilon = 1e-12);
        assert_eq!(r.dof, 1);
    }

    #[test]
    fn ranks_with_ties() {
        assert_eq!(ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn spearman_detects_monotone_decrease() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| (-v).exp()).collect();
        let s = spearman(&x, &y);
        assert_relative_eq!(s.rho, -1.0, epsilon = 1e-12);
        assert!(s.p_negative < 1e-6);
    }

    #[test]
    fn fit_recovers_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let f = linear_fit(&x, &y);
        assert_relative_eq!(f.slope, 2.0, epsilon = 1e-12);
        assert_relative_eq!(f.intercept, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn quantiles() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
