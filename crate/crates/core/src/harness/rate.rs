//! Power-law fits on log-log data.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest `|log y - (slope log x + intercept)|`.
    pub max_residual: f64,
    pub points: usize,
}

/// Least squares of `log y` against `log x`.
pub fn fit_rate(xs: &[f64], ys: &[f64]) -> Result<RateFit> {
    let n = xs.len().min(ys.len());
    if n < 3 {
        return Err(Error::TooFewPoints(n));
    }
    if let Some(&v) = xs[..n].iter().chain(&ys[..n]).find(|&&v| !(v > 0.0)) {
        return Err(Error::NonPositive(v));
    }
    let lx: Vec<f64> = xs[..n].iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys[..n].iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n as f64;
    let my = ly.iter().sum::<f64>() / n as f64;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidConfig("rate fit needs distinct abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - slope * x - intercept).abs())
        .fold(0.0, f64::max);
    Ok(RateFit {
        slope,
        intercept,
        max_residual,
        points: n,
    })
}

/// Observed orders `log(e_i / e_{i+1}) / log(h_i / h_{i+1})` between
/// consecutive ladder levels.
pub fn pairwise_orders(hs: &[f64], errs: &[f64]) -> Vec<f64> {
    hs.windows(2)
        .zip(errs.windows(2))
        .map(|(h, e)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect()
}
