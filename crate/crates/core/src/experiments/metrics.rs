//! Monte Carlo transport errors and log-log regression.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::hockey::uniform_sample;
use crate::error::{Error, Result};

/// Default number of Monte Carlo points for [`l2_error`].
pub const DEFAULT_MC_SIZE: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    /// Mean of `‖T̂(U) − T_0(U)‖²`.
    pub mean: f64,
    /// Standard error of the mean.
    pub se: f64,
}

/// Squared distance over the first `dims` coordinates (all when `None`).
fn sq_err(a: &[f64], b: &[f64], dims: Option<usize>) -> f64 {
    let k = dims.unwrap_or(a.len()).min(a.len()).min(b.len());
    a[..k].iter().zip(&b[..k]).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Mean and standard error of squared errors over the rows of `probe`.
pub fn l2_error_on(
    t_hat: impl Fn(&[f64]) -> Vec<f64> + Sync,
    t_0: impl Fn(&[f64]) -> Vec<f64> + Sync,
    probe: &Array2<f64>,
    dims: Option<usize>,
) -> Result<ErrorEstimate> {
    let m = probe.nrows();
    if m == 0 {
        return Err(Error::Empty("Monte Carlo probe"));
    }
    let errs: Vec<f64> = probe
        .rows()
        .into_iter()
        .map(|r| {
            let x = r.to_vec();
            sq_err(&t_hat(&x), &t_0(&x), dims)
        })
        .collect();
    let mean = errs.iter().sum::<f64>() / m as f64;
    let var = if m > 1 {
        errs.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (m - 1) as f64
    } else {
        0.0
    };
    Ok(ErrorEstimate {
        mean,
        se: (var / m as f64).sqrt(),
    })
}

/// `∫‖T̂ − T_0‖² dP` for `P = Unif[0,1]^d`, estimated from `m` fresh uniforms.
pub fn l2_error(
    t_hat: impl Fn(&[f64]) -> Vec<f64> + Sync,
    t_0: impl Fn(&[f64]) -> Vec<f64> + Sync,
    d: usize,
    m: usize,
    seed: u64,
) -> Result<ErrorEstimate> {
    let probe = uniform_sample(m, d, seed, 0x7e57);
    l2_error_on(t_hat, t_0, &probe, None)
}

/// Least-squares line through `(ln n, ln error)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Fits `ln e = intercept + slope · ln n`; `None` with fewer than two distinct `n`.
pub fn loglog_regression(points: &[(f64, f64)]) -> Option<LogLogFit> {
    if points.len() < 2 || points.iter().any(|&(n, e)| !(n > 0.0) || !(e > 0.0)) {
        return None;
    }
    let k = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some(LogLogFit {
        slope,
        intercept: my - slope * mx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::hockey::HockeyStickMap;

    #[test]
    fn exact_map_has_zero_error() {
        let m = HockeyStickMap::new(3, 1.0).unwrap();
        let e = l2_error(|x| m.eval(x), |x| m.eval(x), 3, 500, 1).unwrap();
        assert_eq!(e.mean, 0.0);
        assert_eq!(e.se, 0.0);
    }

    #[test]
    fn identity_error_matches_quadrature() {
        // ∫_0^1 (|x − 1/2|^κ / κ)² dx = 2 · 0.5^{2κ+1} / ((2κ+1) κ²).
        let m = HockeyStickMap::new(1, 1.0).unwrap();
        let k = 2.6f64;
        let exact = 2.0 * 0.5f64.powf(2.0 * k + 1.0) / ((2.0 * k + 1.0) * k * k);
        // Midpoint quadrature as an independent check of the closed form.
        let quad: f64 = (0..100_000)
            .map(|j| {
                let t = (j as f64 + 0.5) / 100_000.0;
                ((t - 0.5f64).abs().powf(k) / k).powi(2)
            })
            .sum::<f64>()
            / 100_000.0;
        assert!((quad - exact).abs() < 1e-10);
        let e = l2_error(|x| x.to_vec(), |x| m.eval(x), 1, DEFAULT_MC_SIZE, 4).unwrap();
        assert!((e.mean - exact).abs() < 3.0 * e.se, "{} ± {} vs {exact}", e.mean, e.se);
    }

    #[test]
    fn error_is_additive_over_axes() {
        let m = HockeyStickMap::new(3, 1.0).unwrap();
        let full = l2_error(|x| x.to_vec(), |x| m.eval(x), 3, 400, 9).unwrap();
        let probe = uniform_sample(400, 3, 9, 0x7e57);
        let per_axis: f64 = (0..3)
            .map(|i| {
                probe
                    .column(i)
                    .iter()
                    .map(|&t| (t - m.eval_axis(i + 1, t)).powi(2))
                    .sum::<f64>()
                    / 400.0
            })
            .sum();
        assert!((full.mean - per_axis).abs() < 1e-15);
        let window = l2_error_on(|x| x.to_vec(), |x| m.eval(x), &probe, Some(1)).unwrap();
        let first: f64 = probe
            .column(0)
            .iter()
            .map(|&t| (t - m.eval_axis(1, t)).powi(2))
            .sum::<f64>()
            / 400.0;
        assert!((window.mean - first).abs() < 1e-15);
    }

    #[test]
    fn regression_recovers_power_law() {
        let pts: Vec<(f64, f64)> = [50.0, 100.0, 200.0, 500.0, 1000.0]
            .iter()
            .map(|&n: &f64| (n, 3.0 * n.powf(-0.8)))
            .collect();
        let fit = loglog_regression(&pts).unwrap();
        assert!((fit.slope + 0.8).abs() < 1e-9);
        assert!((fit.intercept - 3.0f64.ln()).abs() < 1e-9);
        assert!(loglog_regression(&pts[..1]).is_none());
    }
}
