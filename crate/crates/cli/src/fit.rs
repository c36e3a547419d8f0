//! Least-squares growth exponents.

use serde::Serialize;
use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum FitError {
    #[error("need at least 3 points, have {0}")]
    TooFewPoints(usize),
    #[error("value {0} is not positive")]
    NonPositive(f64),
    #[error("all N are equal")]
    Degenerate,
    #[error("length mismatch: {0} N values, {1} statistics")]
    LengthMismatch(usize, usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

/// Ordinary least squares of `ys` on `xs`.
pub fn ols(xs: &[f64], ys: &[f64]) -> Result<Fit, FitError> {
    if xs.len() != ys.len() {
        return Err(FitError::LengthMismatch(xs.len(), ys.len()));
    }
    let n = xs.len();
    if n < 3 {
        return Err(FitError::TooFewPoints(n));
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(FitError::Degenerate);
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(Fit { slope, intercept, r2, points: n })
}

/// Slope of `log2 value` against `log2 N`.
pub fn exponent_fit(ns: &[u64], values: &[f64]) -> Result<Fit, FitError> {
    if let Some(&v) = values.iter().find(|v| v.is_nan() || **v <= 0.0) {
        return Err(FitError::NonPositive(v));
    }
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).log2()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.log2()).collect();
    ols(&xs, &ys)
}
