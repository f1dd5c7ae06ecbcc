//! Stylised facts of a return series: moments, normal QQ departure and the
//! autocorrelations of returns, absolute returns and order-flow signs.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{domain_err, Error, Result};
use crate::stats;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnMoments {
    pub mean: f64,
    pub std: f64,
    pub skew: f64,
    pub excess_kurtosis: f64,
    /// `sqrt(24 / n)`, the normal-theory standard error of the kurtosis.
    pub kurtosis_se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactsReport {
    pub n: usize,
    pub return_moments: ReturnMoments,
    /// `1.96 / sqrt(n)`.
    pub white_noise_band: f64,
    pub acf_returns: Vec<f64>,
    pub acf_abs_returns: Vec<f64>,
    pub acf_orderflow: Vec<f64>,
    /// `(theoretical, empirical)` standard normal quantiles.
    pub qq_points: Vec<(f64, f64)>,
}

/// Successive differences of the natural log.
pub fn log_returns(prices: &[f64]) -> Result<Vec<f64>> {
    if prices.iter().any(|p| !(*p > 0.0)) {
        return Err(domain_err("log returns need strictly positive prices"));
    }
    Ok(prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
}

const QQ_POINTS: usize = 200;

impl FactsReport {
    /// Builds the report from returns and order-flow signs. Both series need
    /// at least `2 * max_lag` observations.
    pub fn from_returns(returns: &[f64], orderflow: &[f64], max_lag: usize) -> Result<Self> {
        let need = (2 * max_lag).max(3);
        if returns.len() < need || orderflow.len() < need {
            return Err(domain_err(format!(
                "facts need at least {need} observations, got {} returns and {} signs",
                returns.len(),
                orderflow.len()
            )));
        }
        let var = stats::variance(returns);
        if !(var > 0.0) || !var.is_finite() {
            return Err(domain_err("returns have zero or non-finite variance"));
        }
        let n = returns.len();
        let abs: Vec<f64> = returns.iter().map(|r| r.abs()).collect();
        Ok(Self {
            n,
            return_moments: ReturnMoments {
                mean: stats::mean(returns),
                std: stats::std_dev(returns),
                skew: stats::skewness(returns),
                excess_kurtosis: stats::excess_kurtosis(returns),
                kurtosis_se: (24.0 / n as f64).sqrt(),
            },
            white_noise_band: 1.96 / (n as f64).sqrt(),
            acf_returns: stats::acf(returns, max_lag),
            acf_abs_returns: stats::acf(&abs, max_lag),
            acf_orderflow: stats::acf(orderflow, max_lag),
            qq_points: stats::normal_qq(returns, QQ_POINTS),
        })
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    /// `lag,acf_returns,acf_abs_returns,acf_orderflow`.
    pub fn write_acf_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["lag", "acf_returns", "acf_abs_returns", "acf_orderflow"])?;
        for k in 0..self.acf_returns.len() {
            w.write_record(&[
                k.to_string(),
                self.acf_returns[k].to_string(),
                self.acf_abs_returns[k].to_string(),
                self.acf_orderflow[k].to_string(),
            ])?;
        }
        flush(w)
    }

    /// `theoretical,empirical`.
    pub fn write_qq_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["theoretical", "empirical"])?;
        for (a, b) in &self.qq_points {
            w.write_record(&[a.to_string(), b.to_string()])?;
        }
        flush(w)
    }
}

fn flush<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|source| Error::Io {
        path: "<facts csv>".into(),
        source,
    })
}
