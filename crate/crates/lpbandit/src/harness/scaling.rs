//! Log-log least squares for growth exponents: fits log(mean regret) against
//! log(n) (or log(d)) and reports the slope with a 95% confidence interval.

use serde::Serialize;

use crate::error::{Error, Result};

/// Result of a log-log least-squares fit.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    /// Half-width of the 95% confidence interval on the slope (two-sided
    /// Student t with n-2 degrees of freedom); zero when only two points.
    pub ci_half_width: f64,
    pub points: usize,
}

/// Two-sided 97.5th-percentile Student t quantiles for df = 1..=30; larger
/// df uses the normal limit.
const T_975: [f64; 30] = [
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160,
    2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056,
    2.052, 2.048, 2.045, 2.042,
];

fn t_quantile(df: usize) -> f64 {
    if df == 0 {
        f64::INFINITY
    } else if df <= 30 {
        T_975[df - 1]
    } else {
        1.96
    }
}

/// Least squares of ln(y) on ln(x). Nonpositive inputs have no logarithm, so
/// they yield `FitUndefined`; so do degenerate designs (fewer than two
/// distinct x values).
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<ScalingFit> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidInput(format!(
            "fit needs paired samples: {} x vs {} y",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::FitUndefined("need at least two points".into()));
    }
    for (&x, &y) in xs.iter().zip(ys) {
        if !(x > 0.0) || !(y > 0.0) || !x.is_finite() || !y.is_finite() {
            return Err(Error::FitUndefined(format!(
                "log-log fit needs positive finite inputs, got ({x}, {y})"
            )));
        }
    }
    let lx: Vec<f64> = xs.iter().map(|&x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|&y| y.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|&x| (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::FitUndefined("all x values coincide".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(&x, &y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(&x, &y)| (y - (intercept + slope * x)).powi(2))
        .sum();
    let df = lx.len().saturating_sub(2);
    let ci_half_width = if df == 0 {
        0.0
    } else {
        let sigma2 = rss / df as f64;
        t_quantile(df) * (sigma2 / sxx).sqrt()
    };
    Ok(ScalingFit {
        slope,
        intercept,
        ci_half_width,
        points: lx.len(),
    })
}
