//! Log-log power-law regression and fit-window selection.

use serde::Serialize;

use crate::error::{Error, Result};

/// Ordinary least-squares line `y = slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n != y.len() || n < 2 {
        return Err(Error::InsufficientData(format!("{n} points")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 {
        return Err(Error::InsufficientData("abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| (b - slope * a - intercept).powi(2))
        .sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(LineFit {
        slope,
        intercept,
        r2,
    })
}

/// Power law `y ≈ constant · x^exponent` fitted on a contiguous window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerFit {
    pub exponent: f64,
    pub constant: f64,
    pub r2: f64,
    /// Abscissa range `[lo, hi]` of the points used.
    pub window: (f64, f64),
    pub points: usize,
}

pub const MIN_WINDOW_POINTS: usize = 4;
pub const WINDOW_R2: f64 = 0.999;
pub const ACCEPT_R2: f64 = 0.99;

/// Fits `y = c x^e` to points sorted by `x > 0`, `y > 0`.
///
/// Picks the largest contiguous window spanning at least `min_decades` with
/// `r2 ≥ 0.999`, preferring smaller abscissae on ties. Falls back to the full
/// range, which is rejected when `r2 < 0.99`.
pub fn fit_power_law(x: &[f64], y: &[f64], min_decades: f64) -> Result<PowerFit> {
    let n = x.len();
    if n < MIN_WINDOW_POINTS {
        return Err(Error::InsufficientData(format!(
            "{n} points, need {MIN_WINDOW_POINTS}"
        )));
    }
    if x.iter().chain(y).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidInput(
            "power-law data must be positive".into(),
        ));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.log10()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.log10()).collect();
    let span = |i: usize, j: usize| (lx[j] - lx[i]).abs();
    if span(0, n - 1) < min_decades - 1e-9 {
        return Err(Error::InsufficientData(format!(
            "abscissae span {:.3} decades, need {min_decades}",
            span(0, n - 1)
        )));
    }
    let make = |i: usize, j: usize, f: LineFit| PowerFit {
        exponent: f.slope,
        constant: 10f64.powf(f.intercept),
        r2: f.r2,
        window: (x[i].min(x[j]), x[i].max(x[j])),
        points: j - i + 1,
    };
    for len in (MIN_WINDOW_POINTS..=n).rev() {
        for i in 0..=(n - len) {
            let j = i + len - 1;
            if span(i, j) < min_decades - 1e-9 {
                continue;
            }
            let f = linear_fit(&lx[i..=j], &ly[i..=j])?;
            if f.r2 >= WINDOW_R2 {
                return Ok(make(i, j, f));
            }
        }
    }
    let f = linear_fit(&lx, &ly)?;
    if f.r2 < ACCEPT_R2 {
        return Err(Error::FitRejected {
            r2: f.r2,
            min_r2: ACCEPT_R2,
        });
    }
    Ok(make(0, n - 1, f))
}
