//! Least-squares line fits for log-log decay and rate measurements.

/// An ordinary least-squares line y ≈ slope·x + intercept.
#[derive(Clone, Debug)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square of the residuals y_i − (slope·x_i + intercept).
    pub rms: f64,
    /// Signed residuals, in input order.
    pub residuals: Vec<f64>,
}

/// Fits a line through (x_i, y_i). Returns `None` when fewer than two
/// points are given or all abscissae coincide, so callers can report an
/// undefined slope instead of inventing one.
pub fn line_fit(x: &[f64], y: &[f64]) -> Option<LineFit> {
    assert_eq!(x.len(), y.len(), "coordinate counts");
    let n = x.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..n {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = (0..n).map(|i| y[i] - (slope * x[i] + intercept)).collect();
    let rms = (residuals.iter().map(|r| r * r).sum::<f64>() / nf).sqrt();
    Some(LineFit {
        slope,
        intercept,
        rms,
        residuals,
    })
}

/// Fits log(y) vs log(x); every y must be positive for the fit to exist.
pub fn log_log_fit(x: &[f64], y: &[f64]) -> Option<LineFit> {
    if x.iter().any(|&v| v <= 0.0) || y.iter().any(|&v| v <= 0.0) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    line_fit(&lx, &ly)
}
