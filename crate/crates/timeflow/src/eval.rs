//! Metrics and result aggregation: masked MAE, mean ± population spread
//! over repeated windows, and the imputation/forecast error split for
//! sparse look-back runs.
//!
//! Metrics are computed in the normalized (z-score) space the model was
//! trained in; a denormalized view can be requested for interpretation.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Mean absolute error over the masked points.
pub fn mae(pred: &[f64], truth: &[f64], mask: &[bool]) -> Result<f64> {
    if pred.len() != truth.len() || pred.len() != mask.len() {
        return Err(Error::contract("mae inputs must align"));
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for ((p, t), m) in pred.iter().zip(truth).zip(mask) {
        if *m {
            sum += (p - t).abs();
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::contract("mae over an empty mask"));
    }
    Ok(sum / n as f64)
}

/// The context a report row carries into tables and CSV output.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportMeta {
    pub dataset: String,
    pub method: String,
    pub tau: Option<f64>,
    pub horizon: Option<usize>,
    pub lookback: Option<usize>,
    pub seed: Option<u64>,
}

/// Per-window MAE values with their mean ± population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_window: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub meta: ReportMeta,
}

/// Collapse per-window MAE values into mean ± population std.
pub fn aggregate(per_window: &[f64], meta: ReportMeta) -> Result<EvalReport> {
    if per_window.is_empty() {
        return Err(Error::contract("aggregate needs at least one window"));
    }
    let n = per_window.len() as f64;
    let mean = per_window.iter().sum::<f64>() / n;
    let var = per_window.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok(EvalReport { per_window: per_window.to_vec(), mean, std: var.sqrt(), meta })
}

/// Error split for a sparse-look-back forecast: MAE over the look-back
/// points hidden from adaptation, and MAE over the horizon. With a fully
/// observed look-back the imputation side is 0 over an empty set by
/// convention.
pub fn split_errors(
    lookback_pred: &[f64],
    lookback_truth: &[f64],
    lookback_observed: &[bool],
    horizon_pred: &[f64],
    horizon_truth: &[f64],
) -> Result<(f64, f64)> {
    let hidden: Vec<bool> = lookback_observed.iter().map(|o| !o).collect();
    let imputation = if hidden.iter().any(|h| *h) {
        mae(lookback_pred, lookback_truth, &hidden)?
    } else {
        0.0
    };
    let all = vec![true; horizon_pred.len()];
    let forecast = mae(horizon_pred, horizon_truth, &all)?;
    Ok((imputation, forecast))
}

/// One CSV row of results.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub dataset: String,
    pub method: String,
    pub tau: Option<f64>,
    pub horizon: Option<usize>,
    pub window_id: usize,
    pub mae: f64,
    /// Present when a denormalized report was requested.
    pub mae_denorm: Option<f64>,
}

/// Write rows as `dataset,method,tau,horizon,window_id,mae[,mae_denorm]`.
pub fn write_report_csv(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let denorm = rows.iter().any(|r| r.mae_denorm.is_some());
    let mut out = String::new();
    out.push_str("dataset,method,tau,horizon,window_id,mae");
    if denorm {
        out.push_str(",mae_denorm");
    }
    out.push('\n');
    for r in rows {
        let tau = r.tau.map(|t| format!("{t}")).unwrap_or_default();
        let horizon = r.horizon.map(|h| h.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{}",
            r.dataset, r.method, tau, horizon, r.window_id, r.mae
        ));
        if denorm {
            out.push(',');
            if let Some(d) = r.mae_denorm {
                out.push_str(&format!("{d}"));
            }
        }
        out.push('\n');
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Fixed-width summary table for stdout.
pub fn format_table(reports: &[EvalReport]) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "{:<12} {:<10} {:>6} {:>8} {:>8} {:>10} {:>10}\n",
        "dataset", "method", "tau", "L", "H", "mae", "±"
    ));
    for r in reports {
        let tau = r.meta.tau.map(|t| format!("{t:.2}")).unwrap_or_else(|| "-".into());
        let l = r.meta.lookback.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
        let h = r.meta.horizon.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
        s.push_str(&format!(
            "{:<12} {:<10} {:>6} {:>8} {:>8} {:>10.4} {:>10.4}\n",
            r.meta.dataset, r.meta.method, tau, l, h, r.mean, r.std
        ));
    }
    s
}
