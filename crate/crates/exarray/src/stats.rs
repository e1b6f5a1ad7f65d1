//! Small numeric toolbox shared by the experiments: compensated summation,
//! moment estimates with standard errors, least squares on log–log grids,
//! and Kolmogorov–Smirnov distances.

/// Kahan–Babuška compensated accumulator; order-insensitive to ~1e-16
/// relative, which keeps large reductions schedule-independent.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        KahanSum::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn merge(&mut self, other: KahanSum) {
        self.add(other.sum);
        self.comp += other.comp;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    let mut acc = KahanSum::new();
    for &x in xs {
        acc.add(x);
    }
    acc.value() / xs.len() as f64
}

/// Sample variance (denominator n−1).
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let mut acc = KahanSum::new();
    for &x in xs {
        acc.add((x - m) * (x - m));
    }
    acc.value() / (xs.len() as f64 - 1.0)
}

/// Standard error of the sample mean.
pub fn std_error_of_mean(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Sample variance together with the standard error of the variance
/// estimate itself, from the central fourth moment.
pub fn variance_with_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = mean(xs);
    let mut m2 = KahanSum::new();
    let mut m4 = KahanSum::new();
    for &x in xs {
        let d = x - m;
        m2.add(d * d);
        m4.add(d * d * d * d);
    }
    let v = m2.value() / (n - 1.0);
    let fourth = m4.value() / n;
    let se = ((fourth - v * v).max(0.0) / n).sqrt();
    (v, se)
}

/// Sample covariance with the standard error of the covariance estimate.
pub fn covariance_with_se(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = mean(xs);
    let my = mean(ys);
    let mut c = KahanSum::new();
    let mut c2 = KahanSum::new();
    for (&x, &y) in xs.iter().zip(ys) {
        let p = (x - mx) * (y - my);
        c.add(p);
        c2.add(p * p);
    }
    let cov = c.value() / (n - 1.0);
    let second = c2.value() / n;
    let se = ((second - cov * cov).max(0.0) / n).sqrt();
    (cov, se)
}

/// Ordinary least squares y = a + b·x. Returns (slope, intercept,
/// half-width of a ~95% interval on the slope).
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = mean(xs);
    let my = mean(ys);
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss_res = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let r = y - intercept - slope * x;
        ss_res += r * r;
    }
    let se = (ss_res / (n - 2.0) / sxx).sqrt();
    Some((slope, intercept, 1.96 * se))
}

/// Kolmogorov–Smirnov distance of a sample against Uniform[0,1).
pub fn ks_uniform(sample: &[f64]) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (idx, &x) in xs.iter().enumerate() {
        let f = x.clamp(0.0, 1.0);
        d = d.max(f - idx as f64 / n).max((idx as f64 + 1.0) / n - f);
    }
    d
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len(), ys.len());
    let mut i = 0;
    let mut j = 0;
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let t = xs[i].min(ys[j]);
        while i < n && xs[i] <= t {
            i += 1;
        }
        while j < m && ys[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    d
}

/// Asymptotic coefficient of the Kolmogorov distribution at the 1% level.
pub const KS_COEF_1PCT: f64 = 1.62762;

/// One-sample KS critical value at the 1% level.
pub fn ks_critical_one_sample_1pct(n: usize) -> f64 {
    KS_COEF_1PCT / (n as f64).sqrt()
}

/// Two-sample KS critical value at the 1% level.
pub fn ks_critical_two_sample_1pct(n: usize, m: usize) -> f64 {
    KS_COEF_1PCT * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// Median via sorting; averages the two middle order statistics.
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_handles_adversarial_order() {
        let mut acc = KahanSum::new();
        acc.add(1e16);
        for _ in 0..10_000 {
            acc.add(1.0);
        }
        acc.add(-1e16);
        assert_eq!(acc.value(), 10_000.0);
    }

    #[test]
    fn ols_recovers_exact_line() {
        let xs: Vec<f64> = (1..=10).map(|v| v as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 + 2.0 * x).collect();
        let (slope, intercept, half) = ols_slope(&xs, &ys).unwrap();
        assert!((slope - 2.0).abs() < 1e-12);
        assert!((intercept - 3.0).abs() < 1e-12);
        assert!(half < 1e-10);
    }

    #[test]
    fn ols_rejects_degenerate_input() {
        assert!(ols_slope(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_none());
        assert!(ols_slope(&[1.0, 2.0], &[1.0, 2.0]).is_none());
    }

    #[test]
    fn ks_uniform_detects_shift() {
        let good: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_uniform(&good) < 0.002);
        let bad: Vec<f64> = good.iter().map(|x| x * 0.5).collect();
        assert!(ks_uniform(&bad) > 0.4);
    }

    #[test]
    fn ks_two_sample_identical_is_zero() {
        let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        let b: Vec<f64> = a.iter().map(|x| x + 1000.0).collect();
        assert_eq!(ks_two_sample(&a, &b), 1.0);
    }

    #[test]
    fn covariance_matches_hand_value() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [2.0, 4.0, 6.0, 8.0];
        let (cov, _) = covariance_with_se(&xs, &ys);
        let (var, _) = variance_with_se(&xs);
        assert!((cov - 2.0 * var).abs() < 1e-12);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
    }
}
