//! Log-linear fits of success rate against model size,
//! `success = alpha * log10(size) + intercept`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Parameter count assumed for a closed model whose size is unpublished.
/// This is an estimate, not a disclosed figure.
pub const GPT4O_ESTIMATED_BILLIONS: f64 = 200.0;

#[derive(Debug, Error)]
pub enum ScalingError {
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("degenerate design: all {n} points share model size {size}B")]
    Degenerate { n: usize, size: f64 },
    #[error("model size must be positive, got {0}")]
    NonPositiveSize(f64),
    #[error("success rate {0} is outside [0, 100]")]
    SuccessOutOfRange(f64),
    #[error("{path}:{line}: {message}")]
    Csv { path: String, line: usize, message: String },
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalePoint {
    #[serde(default)]
    pub component_label: String,
    pub params_billions: f64,
    pub success_pct: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    #[default]
    Ten,
    E,
}

impl LogBase {
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Ten => x.log10(),
            LogBase::E => x.ln(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    #[serde(default)]
    pub component_label: String,
    pub alpha: f64,
    pub intercept: f64,
    pub r2: f64,
    pub n_points: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub success_pct: f64,
    /// The raw line value fell outside [0, 100].
    pub clamped: bool,
}

pub fn fit_loglinear(points: &[ScalePoint]) -> Result<ScalingFit, ScalingError> {
    fit_loglinear_with(points, LogBase::Ten)
}

/// Ordinary least squares of success on `log(size)`. R² is 1 for data with
/// no spread in success (the fit is then exact).
pub fn fit_loglinear_with(points: &[ScalePoint], base: LogBase) -> Result<ScalingFit, ScalingError> {
    let n = points.len();
    if n < 2 {
        return Err(ScalingError::TooFewPoints(n));
    }
    for p in points {
        if p.params_billions <= 0.0 || !p.params_billions.is_finite() {
            return Err(ScalingError::NonPositiveSize(p.params_billions));
        }
        if !(0.0..=100.0).contains(&p.success_pct) {
            return Err(ScalingError::SuccessOutOfRange(p.success_pct));
        }
    }
    if points.iter().all(|p| p.params_billions == points[0].params_billions) {
        return Err(ScalingError::Degenerate {
            n,
            size: points[0].params_billions,
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| base.log(p.params_billions)).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.success_pct).collect();
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let alpha = sxy / sxx;
    let intercept = my - alpha * mx;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (alpha * x + intercept);
            e * e
        })
        .sum();
    let sst: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let r2 = if sst == 0.0 { 1.0 } else { 1.0 - ssr / sst };
    let label = points[0].component_label.clone();
    Ok(ScalingFit {
        component_label: if points.iter().all(|p| p.component_label == label) {
            label
        } else {
            String::new()
        },
        alpha,
        intercept,
        r2,
        n_points: n,
    })
}

pub fn predict_success(fit: &ScalingFit, params_billions: f64) -> Result<Prediction, ScalingError> {
    predict_success_with(fit, params_billions, LogBase::Ten)
}

pub fn predict_success_with(fit: &ScalingFit, params_billions: f64, base: LogBase) -> Result<Prediction, ScalingError> {
    if params_billions.is_nan() || params_billions <= 0.0 {
        return Err(ScalingError::NonPositiveSize(params_billions));
    }
    let raw = fit.alpha * base.log(params_billions) + fit.intercept;
    let v = raw.clamp(0.0, 100.0);
    Ok(Prediction {
        success_pct: v,
        clamped: v != raw,
    })
}

/// One fit per component label, in label order.
pub fn fit_by_component(points: &[ScalePoint], base: LogBase) -> Result<Vec<ScalingFit>, ScalingError> {
    let mut by: BTreeMap<&str, Vec<ScalePoint>> = BTreeMap::new();
    for p in points {
        by.entry(p.component_label.as_str()).or_default().push(p.clone());
    }
    by.into_iter()
        .map(|(label, pts)| {
            let mut fit = fit_loglinear_with(&pts, base)?;
            fit.component_label = label.to_string();
            Ok(fit)
        })
        .collect()
}

/// Plain-text coefficient table, one row per component.
pub fn render_report(fits: &[ScalingFit]) -> String {
    let width = fits
        .iter()
        .map(|f| f.component_label.len())
        .chain(std::iter::once("Component".len()))
        .max()
        .unwrap_or(9);
    let mut out = format!("{:<width$}  {:>8}  {:>9}  {:>6}  {:>3}\n", "Component", "alpha", "intercept", "R2", "n");
    for f in fits {
        out.push_str(&format!(
            "{:<width$}  {:>8.2}  {:>9.2}  {:>6.3}  {:>3}\n",
            f.component_label, f.alpha, f.intercept, f.r2, f.n_points
        ));
    }
    out
}

fn csv_err(path: &Path, line: usize, e: impl std::fmt::Display) -> ScalingError {
    ScalingError::Csv {
        path: path.display().to_string(),
        line,
        message: e.to_string(),
    }
}

/// Reads `component_label,params_billions,success_pct` rows (header
/// required; the label column is optional).
pub fn read_points(path: impl AsRef<Path>) -> Result<Vec<ScalePoint>, ScalingError> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| ScalingError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<ScalePoint>().enumerate() {
        out.push(rec.map_err(|e| csv_err(path, i + 2, e))?);
    }
    Ok(out)
}

pub fn write_fits(path: impl AsRef<Path>, fits: &[ScalingFit]) -> Result<(), ScalingError> {
    let path = path.as_ref();
    let io = |e: &dyn std::fmt::Display| ScalingError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| io(&e))?;
    for f in fits {
        w.serialize(f).map_err(|e| io(&e))?;
    }
    w.flush().map_err(|e| io(&e))
}

pub fn read_fits(path: impl AsRef<Path>) -> Result<Vec<ScalingFit>, ScalingError> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| ScalingError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    rdr.deserialize::<ScalingFit>()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| csv_err(path, i + 2, e)))
        .collect()
}
