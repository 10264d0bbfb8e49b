//! Goodness-of-fit statistics used by the sampler checks.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Bins whose expected count falls below this are pooled.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub dof: f64,
    pub p_value: f64,
}

pub fn chi2_sf(x: f64, dof: f64) -> f64 {
    if dof <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(dof).map(|d| d.sf(x)).unwrap_or(f64::NAN)
}

/// Pearson goodness of fit against probabilities `probs` (need not sum to
/// one: the remainder is an implicit extra bin with zero observations if
/// `observed` covers it). Sparse bins are pooled.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> TestResult {
    assert_eq!(observed.len(), probs.len());
    let n: u64 = observed.iter().sum();
    let n = n as f64;
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut pool_o, mut pool_e) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probs) {
        let e = n * p;
        if e < MIN_EXPECTED {
            pool_o += o as f64;
            pool_e += e;
        } else {
            bins.push((o as f64, e));
        }
    }
    let rest = n - probs.iter().sum::<f64>() * n;
    if rest > 1e-9 * n {
        pool_e += rest;
    }
    if pool_e > 0.0 {
        bins.push((pool_o, pool_e));
    }
    let statistic: f64 = bins.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = bins.len().saturating_sub(1) as f64;
    TestResult { statistic, dof, p_value: chi2_sf(statistic, dof) }
}

/// Two-sample chi-square homogeneity test on matched category counts.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> TestResult {
    assert_eq!(a.len(), b.len());
    let na: f64 = a.iter().sum::<u64>() as f64;
    let nb: f64 = b.iter().sum::<u64>() as f64;
    let total = na + nb;
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut pool = (0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        let smaller = (x + y) * na.min(nb) / total;
        if smaller < MIN_EXPECTED {
            pool.0 += x;
            pool.1 += y;
        } else {
            bins.push((x, y));
        }
    }
    if pool.0 + pool.1 > 0.0 {
        bins.push(pool);
    }
    let mut statistic = 0.0;
    for (x, y) in &bins {
        let col = x + y;
        let ea = col * na / total;
        let eb = col * nb / total;
        statistic += (x - ea).powi(2) / ea + (y - eb).powi(2) / eb;
    }
    let dof = bins.len().saturating_sub(1) as f64;
    TestResult { statistic, dof, p_value: chi2_sf(statistic, dof) }
}

/// Chi-square test of independence for a contingency table.
pub fn chi_square_independence(table: &[Vec<u64>]) -> TestResult {
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let ncols = table.first().map_or(0, Vec::len);
    let cols: Vec<f64> = (0..ncols).map(|j| table.iter().map(|r| r[j] as f64).sum()).collect();
    let n: f64 = rows.iter().sum();
    let keep_r: Vec<usize> = (0..rows.len()).filter(|&i| rows[i] > 0.0).collect();
    let keep_c: Vec<usize> = (0..ncols).filter(|&j| cols[j] > 0.0).collect();
    let mut statistic = 0.0;
    for &i in &keep_r {
        for &j in &keep_c {
            let e = rows[i] * cols[j] / n;
            statistic += (table[i][j] as f64 - e).powi(2) / e;
        }
    }
    let dof = (keep_r.len().saturating_sub(1) * keep_c.len().saturating_sub(1)) as f64;
    TestResult { statistic, dof, p_value: chi2_sf(statistic, dof) }
}

/// Kolmogorov limiting tail `P(K > λ) = 2 Σ (-1)^{k-1} e^{-2k²λ²}`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        s += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov–Smirnov test with the Stephens small-sample
/// correction of the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> TestResult {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = (na * nb / (na + nb)).sqrt();
    let lambda = (ne + 0.12 + 0.11 / ne) * d;
    TestResult { statistic: d, dof: f64::NAN, p_value: kolmogorov_sf(lambda) }
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> TestResult {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in s.iter().enumerate() {
        let f = cdf(*x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let sn = n.sqrt();
    TestResult { statistic: d, dof: f64::NAN, p_value: kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d) }
}

/// Total variation distance `½ Σ |p - q|` over matched supports.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    let n = p.len().max(q.len());
    (0..n).map(|i| (p.get(i).copied().unwrap_or(0.0) - q.get(i).copied().unwrap_or(0.0)).abs()).sum::<f64>() / 2.0
}

/// Standardized deviation of a binomial count from `n p`.
pub fn binomial_z(count: u64, n: u64, p: f64) -> f64 {
    let n = n as f64;
    let sd = (n * p * (1.0 - p)).sqrt();
    if sd == 0.0 {
        return if (count as f64 - n * p).abs() < 0.5 { 0.0 } else { f64::INFINITY };
    }
    (count as f64 - n * p) / sd
}

/// Ordinary least-squares line `y = slope·x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len(), "fit needs paired data");
    assert!(xs.len() >= 2, "fit needs at least two points");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Running mean and second central moment; merged with Chan's update.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.m2 += other.m2 + d * d * (self.n as f64) * (other.n as f64) / n as f64;
        self.mean += d * other.n as f64 / n as f64;
        self.n = n;
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        self.m2 / (self.n - 1) as f64
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }

    /// `|mean - target|` in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        let se = self.std_error();
        if se == 0.0 {
            return if self.mean == target { 0.0 } else { f64::INFINITY };
        }
        (self.mean - target).abs() / se
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::default();
        for x in iter {
            m.push(x);
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_square_of_perfect_fit_is_zero() {
        let r = chi_square_gof(&[25, 25, 50], &[0.25, 0.25, 0.5]);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.dof, 2.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chi_square_known_value() {
        // statistic 4 on 1 dof has upper tail 0.0455
        let r = chi_square_gof(&[60, 40], &[0.5, 0.5]);
        assert!((r.statistic - 4.0).abs() < 1e-12);
        assert!((r.p_value - 0.04550026).abs() < 1e-6);
    }

    #[test]
    fn kolmogorov_tail_reference_points() {
        assert!((kolmogorov_sf(1.36) - 0.0494).abs() < 1e-3);
        assert!((kolmogorov_sf(1.63) - 0.0098).abs() < 1e-3);
    }

    #[test]
    fn ks_identical_samples() {
        let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let r = ks_two_sample(&a, &a);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn moments_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let all: Moments = xs.iter().copied().collect();
        let mut a: Moments = xs[..20].iter().copied().collect();
        let b: Moments = xs[20..].iter().copied().collect();
        a.merge(&b);
        assert!((a.mean - all.mean).abs() < 1e-14);
        assert!((a.variance() - all.variance()).abs() < 1e-14);
    }

    #[test]
    fn tv_distance() {
        assert_eq!(total_variation(&[0.5, 0.5], &[1.0]), 0.5);
    }
}
