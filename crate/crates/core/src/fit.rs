//! Log-log regression for scaling sweeps.

use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitModel {
    /// `v = C delta^a`
    PurePower,
    /// `v = C delta^a log(1/delta)`
    PowerTimesLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Sum of squared residuals in `log v`.
    pub ssr: f64,
    pub model: FitModel,
}

/// Ordinary least squares `y = a x + b`; returns `(a, b, r2, ssr)`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let a = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let b = my - a * mx;
    let ssr: f64 = xs.iter().zip(ys).map(|(x, y)| (y - a * x - b).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 };
    (a, b, r2, ssr)
}

/// Fits `points = (scale, value)` in log-log coordinates.
pub fn fit_scaling(points: &[(f64, f64)], model: FitModel) -> Result<ScalingFit> {
    if points.len() < 4 {
        return arg(format!("need at least 4 points, got {}", points.len()));
    }
    if points.iter().any(|&(d, v)| !(d > 0.0) || !(v > 0.0)) {
        return arg("scales and values must be positive");
    }
    if model == FitModel::PowerTimesLog && points.iter().any(|&(d, _)| d >= 1.0) {
        return arg("log model needs scales below 1");
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points
        .iter()
        .map(|&(d, v)| match model {
            FitModel::PurePower => v.ln(),
            FitModel::PowerTimesLog => (v / (1.0 / d).ln()).ln(),
        })
        .collect();
    let (slope, intercept, r2, ssr) = least_squares(&xs, &ys);
    Ok(ScalingFit { slope, intercept, r2, ssr, model })
}

/// Both fits, and the one with the smaller residual.
pub fn compare_models(points: &[(f64, f64)]) -> Result<(ScalingFit, ScalingFit, FitModel)> {
    let p = fit_scaling(points, FitModel::PurePower)?;
    let l = fit_scaling(points, FitModel::PowerTimesLog)?;
    let best = if l.ssr < p.ssr { FitModel::PowerTimesLog } else { FitModel::PurePower };
    Ok((p, l, best))
}

/// Kendall rank correlation (tau-b, ties handled).
pub fn kendall_tau(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    let (mut conc, mut disc, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = xs[i] - xs[j];
            let dy = ys[i] - ys[j];
            if dx == 0.0 && dy == 0.0 {
                continue;
            } else if dx == 0.0 {
                tx += 1;
            } else if dy == 0.0 {
                ty += 1;
            } else if dx * dy > 0.0 {
                conc += 1;
            } else {
                disc += 1;
            }
        }
    }
    let denom = (((conc + disc + tx) * (conc + disc + ty)) as f64).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        (conc - disc) as f64 / denom
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn deltas() -> Vec<f64> {
        (3..=9).map(|k| (-(k as f64)).exp2()).collect()
    }

    #[test]
    fn exact_power() {
        let pts: Vec<_> = deltas().into_iter().map(|d| (d, d * d)).collect();
        let f = fit_scaling(&pts, FitModel::PurePower).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_model_preferred_on_log_data() {
        let pts: Vec<_> = deltas().into_iter().map(|d| (d, d * (1.0 / d).ln())).collect();
        let (p, l, best) = compare_models(&pts).unwrap();
        assert!(l.ssr < p.ssr);
        assert_eq!(best, FitModel::PowerTimesLog);
        assert!((l.slope - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_values() {
        let pts: Vec<_> = deltas().into_iter().map(|d| (d, 3.0)).collect();
        assert!(fit_scaling(&pts, FitModel::PurePower).unwrap().slope.abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_scaling(&[(0.1, 1.0), (0.2, 1.0), (0.3, 1.0)], FitModel::PurePower).is_err());
        assert!(fit_scaling(&[(0.1, 1.0), (0.2, 0.0), (0.3, 1.0), (0.4, 1.0)], FitModel::PurePower).is_err());
    }

    #[test]
    fn kendall() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((kendall_tau(&x, &[1.0, 2.0, 3.0, 4.0]) - 1.0).abs() < 1e-15);
        assert!((kendall_tau(&x, &[4.0, 3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        assert!(kendall_tau(&x, &[1.0, 1.0, 1.0, 1.0]).abs() < 1e-15);
    }
}
