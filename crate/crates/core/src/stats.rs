//! Descriptive statistics and the estimators behind the moment battery.

use statrs::function::gamma::ln_gamma;

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (divisor `n - 1`).
pub fn std_dev(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    (variance(x) * n / (n - 1.0)).sqrt()
}

pub fn skewness(x: &[f64]) -> f64 {
    let m = mean(x);
    let v = variance(x);
    x.iter().map(|a| (a - m).powi(3)).sum::<f64>() / x.len() as f64 / v.powf(1.5)
}

/// Moment estimator `m4 / m2^2 - 3`.
pub fn excess_kurtosis(x: &[f64]) -> f64 {
    let m = mean(x);
    let v = variance(x);
    x.iter().map(|a| (a - m).powi(4)).sum::<f64>() / x.len() as f64 / (v * v) - 3.0
}

/// Autocorrelations at lags `0..=max_lag` by the direct definition.
pub fn acf(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let m = mean(x);
    let c0: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
    (0..=max_lag)
        .map(|k| {
            if k >= n || c0 == 0.0 {
                return 0.0;
            }
            let ck: f64 = (0..n - k).map(|i| (x[i] - m) * (x[i + k] - m)).sum();
            ck / c0
        })
        .collect()
}

/// Ordinary least squares `(intercept, slope)` of `y` on `x`.
pub fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let mx = mean(x);
    let my = mean(y);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

/// Average ranks (ties share the mean rank), starting at 1.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let mx = mean(x);
    let my = mean(y);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&ranks(x), &ranks(y))
}

/// Kendall's tau-b.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let (mut conc, mut disc, mut tx, mut ty) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..n {
        for j in i + 1..n {
            let a = (x[i] - x[j]).signum() * if x[i] == x[j] { 0.0 } else { 1.0 };
            let b = (y[i] - y[j]).signum() * if y[i] == y[j] { 0.0 } else { 1.0 };
            if a == 0.0 && b == 0.0 {
                continue;
            } else if a == 0.0 {
                tx += 1.0;
            } else if b == 0.0 {
                ty += 1.0;
            } else if a == b {
                conc += 1.0;
            } else {
                disc += 1.0;
            }
        }
    }
    (conc - disc) / ((conc + disc + tx) * (conc + disc + ty)).sqrt()
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (na, nb) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Anis-Lloyd-Peters expected R/S of white noise over windows of length `n`.
fn expected_rs(n: usize) -> f64 {
    let nf = n as f64;
    let lead = if n <= 340 {
        (ln_gamma((nf - 1.0) / 2.0) - ln_gamma(nf / 2.0)).exp() / std::f64::consts::PI.sqrt()
    } else {
        1.0 / (nf * std::f64::consts::FRAC_PI_2).sqrt()
    };
    let tail: f64 = (1..n).map(|i| ((nf - i as f64) / i as f64).sqrt()).sum();
    (nf - 0.5) / nf * lead * tail
}

fn rescaled_range(block: &[f64]) -> Option<f64> {
    let m = mean(block);
    let sd = variance(block).sqrt();
    if sd == 0.0 {
        return None;
    }
    let (mut acc, mut lo, mut hi) = (0.0f64, 0.0f64, 0.0f64);
    for v in block {
        acc += v - m;
        lo = lo.min(acc);
        hi = hi.max(acc);
    }
    Some((hi - lo) / sd)
}

/// Hurst exponent by corrected rescaled-range analysis: `0.5` plus the slope
/// of `ln(R/S)_n - ln E[R/S]_n` on `ln n` over windows from 16 to `len / 4`
/// in powers of two.
pub fn hurst_rs(x: &[f64]) -> f64 {
    let mut logs_n = Vec::new();
    let mut excess = Vec::new();
    let mut n = 16;
    while n <= x.len() / 4 {
        let rs: Vec<f64> = x.chunks_exact(n).filter_map(rescaled_range).collect();
        if !rs.is_empty() {
            logs_n.push((n as f64).ln());
            excess.push(mean(&rs).ln() - expected_rs(n).ln());
        }
        n *= 2;
    }
    if logs_n.len() < 2 {
        return f64::NAN;
    }
    0.5 + ols(&logs_n, &excess).1
}

/// Periodogram `|sum x_t e^{-i w_j t}|^2 / (2 pi n)` at `w_j = 2 pi j / n`,
/// `j = 1..=m`.
pub fn periodogram(x: &[f64], m: usize) -> Vec<f64> {
    use rustfft::{num_complex::Complex64, FftPlanner};
    let n = x.len();
    let mu = mean(x);
    let mut buf: Vec<Complex64> = x.iter().map(|v| Complex64::new(v - mu, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    (1..=m).map(|j| buf[j].norm_sqr() / (2.0 * std::f64::consts::PI * n as f64)).collect()
}

/// Geweke-Porter-Hudak estimate of the memory parameter `d` with
/// bandwidth `m = floor(sqrt(n))`: minus the slope of `ln I(w_j)` on
/// `ln(4 sin^2(w_j / 2))`. Asymptotic standard error `pi / sqrt(24 m)`.
pub fn gph(x: &[f64]) -> (f64, f64) {
    let n = x.len();
    let m = (n as f64).sqrt().floor() as usize;
    let per = periodogram(x, m);
    let reg: Vec<f64> = (1..=m)
        .map(|j| {
            let w = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
            (4.0 * (w / 2.0).sin().powi(2)).ln()
        })
        .collect();
    let ly: Vec<f64> = per.iter().map(|p| p.ln()).collect();
    (-ols(&reg, &ly).1, std::f64::consts::PI / (24.0 * m as f64).sqrt())
}

/// Augmented Dickey-Fuller t-statistic with intercept and
/// `p = floor((n - 1)^(1/3))` lagged differences.
pub fn adf_statistic(y: &[f64]) -> f64 {
    use nalgebra::{DMatrix, DVector};
    let n = y.len();
    let p = ((n - 1) as f64).cbrt().floor() as usize;
    let dy: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    // Rows t = p..dy.len(): dy[t] on 1, y[t], dy[t-1..t-p].
    let rows = dy.len() - p;
    let cols = 2 + p;
    if rows <= cols {
        return f64::NAN;
    }
    let x = DMatrix::from_fn(rows, cols, |r, c| {
        let t = r + p;
        match c {
            0 => 1.0,
            1 => y[t],
            k => dy[t - (k - 1)],
        }
    });
    let target = DVector::from_iterator(rows, (p..dy.len()).map(|t| dy[t]));
    let xtx = x.transpose() * &x;
    let Some(inv) = xtx.try_inverse() else {
        return f64::NAN;
    };
    let beta = &inv * x.transpose() * &target;
    let resid = &target - &x * &beta;
    let s2 = resid.norm_squared() / (rows - cols) as f64;
    beta[1] / (s2 * inv[(1, 1)]).sqrt()
}

/// GARCH(1,1) fit by Gaussian quasi-likelihood on standardised,
/// demeaned returns with variance targeting (`omega = 1 - alpha - beta`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Garch11 {
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Garch11 {
    pub fn persistence(&self) -> f64 {
        self.alpha + self.beta
    }
}

fn logistic(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

fn garch_nll(e: &[f64], alpha: f64, beta: f64) -> f64 {
    let omega = 1.0 - alpha - beta;
    let mut s2 = 1.0f64;
    let mut nll = 0.0;
    for &v in e {
        nll += s2.ln() + v * v / s2;
        s2 = omega + alpha * v * v + beta * s2;
    }
    0.5 * nll
}

pub fn garch11(x: &[f64]) -> Garch11 {
    let m = mean(x);
    let sd = variance(x).sqrt();
    let e: Vec<f64> = x.iter().map(|v| (v - m) / sd).collect();
    // persistence = logistic(u), alpha share = logistic(v)
    let unpack = |z: &[f64]| {
        let s = logistic(z[0]);
        let a = s * logistic(z[1]);
        (a, s - a)
    };
    let mut best = (vec![0.0, 0.0], f64::INFINITY);
    for start in [[1.4, -1.4], [3.0, -2.0], [-1.0, 0.0]] {
        let r = crate::optim::nelder_mead(
            |z| {
                let (a, b) = unpack(z);
                garch_nll(&e, a, b)
            },
            &start,
            &[0.5, 0.5],
            1e-9,
            800,
        );
        if r.1 < best.1 {
            best = r;
        }
    }
    let (alpha, beta) = unpack(&best.0);
    Garch11 {
        omega: (1.0 - alpha - beta) * sd * sd,
        alpha,
        beta,
    }
}

/// Hill estimate of the tail index of `|x|` using the top
/// `k = max(10, floor(0.05 n))` order statistics.
pub fn hill(x: &[f64]) -> f64 {
    let mut a: Vec<f64> = x.iter().map(|v| v.abs()).filter(|v| *v > 0.0).collect();
    a.sort_by(|p, q| q.total_cmp(p));
    let k = ((0.05 * a.len() as f64).floor() as usize).max(10);
    if a.len() <= k {
        return f64::NAN;
    }
    let base = a[k].ln();
    let s: f64 = a[..k].iter().map(|v| v.ln() - base).sum::<f64>() / k as f64;
    1.0 / s
}

/// Normal QQ pairs `(theoretical, empirical)` at `points` evenly spaced
/// plotting positions of the standardised sample.
pub fn normal_qq(x: &[f64], points: usize) -> Vec<(f64, f64)> {
    use statrs::distribution::{ContinuousCDF, Normal};
    let normal = Normal::standard();
    let m = mean(x);
    let sd = std_dev(x);
    let mut z: Vec<f64> = x.iter().map(|v| (v - m) / sd).collect();
    z.sort_by(f64::total_cmp);
    let n = z.len();
    let points = points.min(n);
    (0..points)
        .map(|i| {
            let idx = if points == 1 { 0 } else { i * (n - 1) / (points - 1) };
            let prob = (idx as f64 + 0.5) / n as f64;
            (normal.inverse_cdf(prob), z[idx])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_by_hand() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&x), 2.5);
        assert_eq!(variance(&x), 1.25);
        assert!((std_dev(&x) - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(skewness(&x).abs() < 1e-15);
        let m4 = (2.0 * 1.5f64.powi(4) + 2.0 * 0.5f64.powi(4)) / 4.0;
        assert!((excess_kurtosis(&x) - (m4 / 1.5625 - 3.0)).abs() < 1e-14);
    }

    #[test]
    fn acf_of_alternating_series() {
        let x: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let a = acf(&x, 2);
        assert_eq!(a[0], 1.0);
        assert!((a[1] + 0.99).abs() < 1e-12);
        assert!((a[2] - 0.98).abs() < 1e-12);
    }

    #[test]
    fn rank_statistics() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [2.0, 4.0, 9.0, 16.0, 30.0];
        assert!((spearman(&x, &y) - 1.0).abs() < 1e-12);
        assert!((kendall_tau(&x, &y) - 1.0).abs() < 1e-12);
        let z = [5.0, 4.0, 3.0, 2.0, 1.0];
        assert!((kendall_tau(&x, &z) + 1.0).abs() < 1e-12);
        assert_eq!(ranks(&[3.0, 1.0, 3.0]), vec![2.5, 1.0, 2.5]);
        // One discordant swap among ten pairs.
        let w = [1.0, 2.0, 4.0, 3.0, 5.0];
        assert!((kendall_tau(&x, &w) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn ols_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let (a, b) = ols(&x, &y);
        assert!((a - 2.0).abs() < 1e-14 && (b + 0.5).abs() < 1e-14);
    }
}
