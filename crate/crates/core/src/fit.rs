//! Least-squares line fits for measured decay/growth rates.

use crate::error::{Error, Result};

/// Result of an ordinary least-squares fit of `y = slope * x + intercept`.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit.
    pub rms_residual: f64,
}

/// Fit a straight line through the points `(xs[i], ys[i])`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch { left: xs.len(), right: ys.len() });
    }
    if xs.len() < 2 {
        return Err(Error::FitWindowTooShort { need: 2, got: xs.len() });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return Err(Error::FitWindowTooShort { need: 2, got: 1 });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let r = y - slope * x - intercept;
        ss += r * r;
    }
    Ok(LineFit { slope, intercept, rms_residual: (ss / n).sqrt() })
}

/// Fit `y = slope * log2(x) + intercept`, i.e. a power law in x measured on
/// a log scale. All xs must be positive.
pub fn fit_log2(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.iter().any(|&x| x <= 0.0 || !x.is_finite()) {
        return Err(Error::InvalidExponent(f64::NAN));
    }
    let lx: Vec<f64> = xs.iter().map(|&x| x.log2()).collect();
    fit_line(&lx, ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn recovers_exact_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [0.5, 2.5, 4.5, 6.5];
        let f = fit_line(&xs, &ys).unwrap();
        assert_relative_eq!(f.slope, 2.0, max_relative = 1e-14);
        assert_relative_eq!(f.intercept, -1.5, max_relative = 1e-13);
        assert!(f.rms_residual < 1e-14);
    }

    #[test]
    fn rejects_degenerate_windows() {
        assert!(fit_line(&[1.0], &[1.0]).is_err());
        assert!(fit_line(&[2.0, 2.0], &[0.0, 1.0]).is_err());
        assert!(fit_line(&[1.0, 2.0], &[0.0]).is_err());
    }

    #[test]
    fn log_fit_recovers_power_law() {
        let xs: Vec<f64> = (1..=6).map(|j| (1 << j) as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| -1.5 * x.log2() + 0.25).collect();
        let f = fit_log2(&xs, &ys).unwrap();
        assert_relative_eq!(f.slope, -1.5, max_relative = 1e-13);
    }
}
