//! Fourier estimation of covariances between asynchronous price paths.
//!
//! Returns are first differences of the price, stamped at the later event.
//! On a common window of length `T` rescaled to `[0, 2 pi)`,
//!
//! ```text
//! cov_N(a, b) = 1/(2N+1) sum_{|k|<=N} Re c_k(a) conj(c_k(b))
//! ```
//!
//! with `c_k = sum_j dp_j exp(-i k 2 pi t_j / T)`. The averaging scale `dt`
//! maps to the cutoff `N = floor(T / (2 dt))`.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain_err, Error, Result};
use crate::nufft::{fgg_nufft, FourierCoefficients, NufftParams};
use crate::sim::{replication_seed, simulate, stream_rng, PricePath, SimConfig};
use crate::stats;

/// Window shared by two paths.
pub fn common_window(a: &PricePath, b: &PricePath) -> Result<(f64, f64)> {
    for p in [a, b] {
        if p.len() < 2 {
            return Err(domain_err(format!("path {} has fewer than two events", p.book_id)));
        }
    }
    let start = a.t[0].max(b.t[0]);
    let end = a.t[a.len() - 1].min(b.t[b.len() - 1]);
    if end <= start {
        return Err(domain_err("paths do not overlap in time"));
    }
    Ok((start, end))
}

/// Increments inside `[start, end]`, with times measured from `start`.
fn increments(path: &PricePath, start: f64, end: f64) -> (Vec<f64>, Vec<f64>) {
    let mut t = Vec::new();
    let mut dp = Vec::new();
    for j in 1..path.len() {
        let tj = path.t[j];
        if tj > start && tj <= end {
            t.push(tj - start);
            dp.push(path.p[j] - path.p[j - 1]);
        }
    }
    (t, dp)
}

fn coefficients(path: &PricePath, start: f64, span: f64, n: usize, params: &NufftParams) -> Result<FourierCoefficients> {
    let (t, dp) = increments(path, start, start + span);
    if t.is_empty() {
        return Err(domain_err(format!("path {} has no returns in the common window", path.book_id)));
    }
    fgg_nufft(&t, &dp, n, span, params)
}

/// Integrated covariance and variances at one cutoff.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Covariance {
    pub cov: f64,
    pub var_a: f64,
    pub var_b: f64,
}

impl Covariance {
    pub fn rho(&self) -> f64 {
        self.cov / (self.var_a * self.var_b).sqrt()
    }
}

fn covariance_from(ca: &FourierCoefficients, cb: &FourierCoefficients, n: usize) -> Covariance {
    let n_i = n as i64;
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for k in -n_i..=n_i {
        let a = ca.get(k);
        let b = cb.get(k);
        ab += (a * b.conj()).re;
        aa += a.norm_sqr();
        bb += b.norm_sqr();
    }
    let w = 1.0 / (2 * n + 1) as f64;
    Covariance {
        cov: ab * w,
        var_a: aa * w,
        var_b: bb * w,
    }
}

/// Covariance of two paths at cutoff `n`.
pub fn fourier_covariance(a: &PricePath, b: &PricePath, n: usize, params: &NufftParams) -> Result<Covariance> {
    let est = PairEstimator::new(a, b, n, params)?;
    est.at(n)
}

/// Coefficients of a pair computed once up to a maximum cutoff.
pub struct PairEstimator {
    ca: FourierCoefficients,
    cb: FourierCoefficients,
    span: f64,
}

impl PairEstimator {
    pub fn new(a: &PricePath, b: &PricePath, n_max: usize, params: &NufftParams) -> Result<Self> {
        let (start, end) = common_window(a, b)?;
        let span = end - start;
        Ok(Self {
            ca: coefficients(a, start, span, n_max, params)?,
            cb: coefficients(b, start, span, n_max, params)?,
            span,
        })
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    pub fn at(&self, n: usize) -> Result<Covariance> {
        if n > self.ca.cutoff() {
            return Err(domain_err(format!("cutoff {n} beyond precomputed {}", self.ca.cutoff())));
        }
        Ok(covariance_from(&self.ca, &self.cb, n))
    }

    /// Correlation at averaging scale `dt`.
    pub fn rho_at_scale(&self, dt: f64) -> Result<f64> {
        self.at(cutoff_for_scale(self.span, dt)?).map(|c| c.rho())
    }
}

/// `N = floor(T / (2 dt))`; scales above `T/2` admit no frequency.
pub fn cutoff_for_scale(span: f64, dt: f64) -> Result<usize> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(domain_err(format!("scale must be positive, got {dt}")));
    }
    let n = (span / (2.0 * dt)).floor();
    if n < 1.0 {
        return Err(domain_err(format!(
            "scale {dt} exceeds half the sample span {span}; no admissible frequency"
        )));
    }
    Ok(n as usize)
}

/// Mean correlation per scale with its standard error across replications.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EppsCurve {
    pub scales: Vec<f64>,
    pub rho: Vec<f64>,
    pub stderr: Vec<f64>,
    pub reps: usize,
}

impl EppsCurve {
    /// Writes `scale,rho,stderr` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["scale", "rho", "stderr"])?;
        for i in 0..self.scales.len() {
            w.write_record(&[
                self.scales[i].to_string(),
                self.rho[i].to_string(),
                self.stderr[i].to_string(),
            ])?;
        }
        flush(w, "<epps csv>")
    }
}

fn flush<W: Write>(mut w: csv::Writer<W>, name: &str) -> Result<()> {
    w.flush().map_err(|source| Error::Io {
        path: name.into(),
        source,
    })
}

fn check_scales(scales: &[f64]) -> Result<()> {
    if scales.is_empty() {
        return Err(domain_err("at least one scale is required"));
    }
    if scales.windows(2).any(|w| w[1] <= w[0]) {
        return Err(domain_err("scales must be strictly increasing"));
    }
    Ok(())
}

/// Correlation of one pair at every scale.
pub fn rho_curve(a: &PricePath, b: &PricePath, scales: &[f64], params: &NufftParams) -> Result<Vec<f64>> {
    check_scales(scales)?;
    let (start, end) = common_window(a, b)?;
    let n_max = cutoff_for_scale(end - start, scales[0])?;
    let est = PairEstimator::new(a, b, n_max, params)?;
    scales.iter().map(|&s| est.rho_at_scale(s)).collect()
}

/// Averages the per-pair curves.
pub fn epps_curve(pairs: &[(PricePath, PricePath)], scales: &[f64], params: &NufftParams) -> Result<EppsCurve> {
    if pairs.is_empty() {
        return Err(domain_err("epps curve needs at least one pair of paths"));
    }
    let curves: Vec<Vec<f64>> = pairs
        .par_iter()
        .map(|(a, b)| rho_curve(a, b, scales, params))
        .collect::<Result<_>>()?;
    Ok(summarise(scales, &curves))
}

fn summarise(scales: &[f64], curves: &[Vec<f64>]) -> EppsCurve {
    let reps = curves.len();
    let mut rho = Vec::with_capacity(scales.len());
    let mut stderr = Vec::with_capacity(scales.len());
    for i in 0..scales.len() {
        let col: Vec<f64> = curves.iter().map(|c| c[i]).collect();
        rho.push(stats::mean(&col));
        stderr.push(if reps > 1 {
            stats::std_dev(&col) / (reps as f64).sqrt()
        } else {
            0.0
        });
    }
    EppsCurve {
        scales: scales.to_vec(),
        rho,
        stderr,
        reps,
    }
}

/// Simulates `reps` independent replications of the first two books and
/// averages their Epps curves. Replication `k` uses seed
/// [`replication_seed`]`(seed, k)`.
pub fn simulated_epps(
    config: &SimConfig,
    scales: &[f64],
    reps: usize,
    seed: u64,
    params: &NufftParams,
) -> Result<EppsCurve> {
    if reps == 0 {
        return Err(domain_err("reps must be at least 1"));
    }
    if config.books.len() < 2 {
        return Err(domain_err("an epps curve needs two books"));
    }
    check_scales(scales)?;
    let curves: Vec<Vec<f64>> = (0..reps as u64)
        .into_par_iter()
        .map(|k| {
            let paths = simulate(config, replication_seed(seed, k))?;
            rho_curve(&paths[0], &paths[1], scales, params)
        })
        .collect::<Result<_>>()?;
    Ok(summarise(scales, &curves))
}

/// Periodogram of a path's returns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub k: Vec<usize>,
    pub power: Vec<f64>,
    /// Least-squares slope of `ln power` against `ln k`.
    pub slope: f64,
}

impl Spectrum {
    /// Writes `k,power` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "power"])?;
        for (k, p) in self.k.iter().zip(&self.power) {
            w.write_record(&[k.to_string(), p.to_string()])?;
        }
        flush(w, "<spectrum csv>")
    }
}

/// `|c_k|^2 / (2N+1)` for `k = 1..=N` over the path's own span.
pub fn power_spectrum(path: &PricePath, n: usize, params: &NufftParams) -> Result<Spectrum> {
    if path.len() < 2 {
        return Err(domain_err(format!("path {} has fewer than two events", path.book_id)));
    }
    if n == 0 {
        return Err(domain_err("spectrum needs a positive cutoff"));
    }
    let start = path.t[0];
    let span = path.t[path.len() - 1] - start;
    if span <= 0.0 {
        return Err(domain_err("path spans no time"));
    }
    let c = coefficients(path, start, span, n, params)?;
    let w = 1.0 / (2 * n + 1) as f64;
    let k: Vec<usize> = (1..=n).collect();
    let power: Vec<f64> = k.iter().map(|&k| c.get(k as i64).norm_sqr() * w).collect();
    let (lk, lp): (Vec<f64>, Vec<f64>) = k
        .iter()
        .zip(&power)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&k, &p)| ((k as f64).ln(), p.ln()))
        .unzip();
    let slope = if lk.len() >= 2 { stats::ols(&lk, &lp).1 } else { f64::NAN };
    Ok(Spectrum { k, power, slope })
}

/// Two Brownian motions with instantaneous correlation `corr`, each observed
/// on its own exponential clock of intensity `rate`.
pub fn brownian_pair(corr: f64, horizon: f64, rate: f64, sigma: f64, seed: u64) -> Result<(PricePath, PricePath)> {
    if !(corr.is_finite() && (-1.0..=1.0).contains(&corr)) {
        return Err(domain_err(format!("correlation must lie in [-1, 1], got {corr}")));
    }
    if !(horizon > 0.0 && rate > 0.0 && sigma >= 0.0) {
        return Err(domain_err("horizon and rate must be positive and sigma non-negative"));
    }
    let exp = rand_distr::Exp::new(rate).map_err(|e| domain_err(e.to_string()))?;
    let clock = |stream: u64| {
        let mut rng = stream_rng(seed, stream);
        let mut t = vec![0.0];
        let mut now = 0.0;
        while now < horizon {
            now += rng.sample(exp);
            t.push(now);
        }
        t
    };
    let ta = clock(1);
    let tb = clock(2);
    let mut merged: Vec<f64> = ta.iter().chain(&tb).copied().collect();
    merged.sort_by(f64::total_cmp);
    merged.dedup();

    let mut noise = stream_rng(seed, 3);
    let (mut wa, mut wb) = (0.0, 0.0);
    let mut level = std::collections::HashMap::with_capacity(merged.len());
    let mut prev = 0.0;
    let rest = (1.0 - corr * corr).sqrt();
    for &t in &merged {
        let h = (t - prev).max(0.0).sqrt() * sigma;
        let z1: f64 = noise.sample(StandardNormal);
        let z2: f64 = noise.sample(StandardNormal);
        wa += h * z1;
        wb += h * (corr * z1 + rest * z2);
        level.insert(t.to_bits(), (wa, wb));
        prev = t;
    }
    let path = |id: usize, t: &[f64]| PricePath {
        book_id: id,
        t: t.to_vec(),
        p: t
            .iter()
            .map(|x| {
                let (a, b) = level[&x.to_bits()];
                if id == 0 {
                    a
                } else {
                    b
                }
            })
            .collect(),
    };
    Ok((path(0, &ta), path(1, &tb)))
}

/// Null-case pairs for the estimator checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NullCase {
    /// Independent Brownian motions.
    Brownian,
    /// One path compared with itself.
    Identical,
}

/// Averaged curve for a null case; each replication draws a fresh pair.
pub fn null_epps(
    case: NullCase,
    horizon: f64,
    rate: f64,
    scales: &[f64],
    reps: usize,
    seed: u64,
    params: &NufftParams,
) -> Result<EppsCurve> {
    if reps == 0 {
        return Err(domain_err("reps must be at least 1"));
    }
    let pairs: Vec<(PricePath, PricePath)> = (0..reps as u64)
        .map(|k| {
            let (a, b) = brownian_pair(0.0, horizon, rate, 1.0, replication_seed(seed, k))?;
            Ok(match case {
                NullCase::Brownian => (a, b),
                NullCase::Identical => {
                    let mut twin = a.clone();
                    twin.book_id = 1;
                    (a, twin)
                }
            })
        })
        .collect::<Result<_>>()?;
    epps_curve(&pairs, scales, params)
}
