//! Classical comparators: linear interpolation, cross-sample KNN
//! imputation, and the Repeat forecaster.

use crate::data::TimeSeriesSample;
use crate::error::{Error, Result};

/// Piecewise-linear interpolation of (coords, values) at `query` points.
/// Queries before the first or after the last observation clamp to the
/// nearest observed value.
pub fn linear_interpolate(coords: &[f64], values: &[f64], query: &[f64]) -> Result<Vec<f64>> {
    if coords.is_empty() {
        return Err(Error::contract("linear interpolation needs at least one observation"));
    }
    if coords.len() != values.len() {
        return Err(Error::contract("coords and values must align"));
    }
    debug_assert!(coords.windows(2).all(|w| w[0] < w[1]));
    let out = query
        .iter()
        .map(|&q| {
            match coords.binary_search_by(|c| c.partial_cmp(&q).expect("finite coords")) {
                Ok(i) => values[i],
                Err(0) => values[0],
                Err(i) if i == coords.len() => values[coords.len() - 1],
                Err(i) => {
                    let (c0, c1) = (coords[i - 1], coords[i]);
                    let w = (q - c0) / (c1 - c0);
                    values[i - 1] * (1.0 - w) + values[i] * w
                }
            }
        })
        .collect();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KnnConfig {
    /// Neighbors to average; the paper's tables use k = 3.
    pub k: usize,
}

impl Default for KnnConfig {
    fn default() -> Self {
        KnnConfig { k: 3 }
    }
}

/// What the KNN imputer had to fall back on.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnnDiagnostics {
    /// Missing coordinates where no pool sample was observed, filled by
    /// linear interpolation of the target's own observations instead.
    pub interpolation_fallbacks: usize,
}

/// Impute the target's dense grid from the k pool samples nearest to it.
///
/// Distance is the mean squared difference over coordinates observed in
/// both series. At each missing coordinate the k nearest pool samples
/// observed there are averaged; coordinates no pool sample covers fall
/// back to linear interpolation and are counted in the diagnostics.
pub fn knn_impute(
    target: &TimeSeriesSample,
    pool: &[TimeSeriesSample],
    cfg: &KnnConfig,
) -> Result<(Vec<f64>, KnnDiagnostics)> {
    if cfg.k == 0 {
        return Err(Error::Config("knn needs k ≥ 1".into()));
    }
    if cfg.k > pool.len() {
        return Err(Error::Config(format!(
            "knn k = {} exceeds pool of {} samples",
            cfg.k,
            pool.len()
        )));
    }
    if pool.iter().any(|p| p.series_len != target.series_len) {
        return Err(Error::contract("knn pool must share the target's dense grid"));
    }
    let len = target.series_len;

    // target values on the dense grid, None where missing
    let mut target_dense: Vec<Option<f64>> = vec![None; len];
    for (t, v) in target.timestamps.iter().zip(&target.values) {
        target_dense[*t] = Some(*v);
    }

    // distance to every pool sample over commonly observed coordinates
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(pool.len());
    for (j, p) in pool.iter().enumerate() {
        let mut sum = 0.0;
        let mut n = 0usize;
        for (t, v) in p.timestamps.iter().zip(&p.values) {
            if let Some(tv) = target_dense[*t] {
                let d = tv - v;
                sum += d * d;
                n += 1;
            }
        }
        // no commonly observed coordinate: still usable, ranked last
        let dist = if n == 0 { f64::MAX } else { sum / n as f64 };
        order.push((dist, j));
    }
    order.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("no NaN distances").then(a.1.cmp(&b.1)));

    let mut out = Vec::with_capacity(len);
    let mut diags = KnnDiagnostics::default();
    let obs_coords: Vec<f64> = target.timestamps.iter().map(|t| *t as f64).collect();
    for i in 0..len {
        if let Some(v) = target_dense[i] {
            out.push(v);
            continue;
        }
        let mut acc = 0.0;
        let mut used = 0usize;
        for &(_, j) in &order {
            if used == cfg.k {
                break;
            }
            if let Some(v) = pool[j].value_at(i) {
                acc += v;
                used += 1;
            }
        }
        if used > 0 {
            out.push(acc / used as f64);
        } else {
            let fill = linear_interpolate(&obs_coords, &target.values, &[i as f64])?;
            out.push(fill[0]);
            diags.interpolation_fallbacks += 1;
        }
    }
    Ok((out, diags))
}

/// Repeat the trailing look-back window into the horizon. For H ≤ L the
/// output is the last H look-back values; for H > L the look-back tiles
/// cyclically, anchored so the final output aligns with the final
/// observation.
pub fn repeat_forecast(lookback: &[f64], horizon: usize) -> Result<Vec<f64>> {
    let l = lookback.len();
    if l == 0 {
        return Err(Error::contract("repeat forecast needs a nonempty look-back"));
    }
    let out = (0..horizon)
        .map(|i| {
            let pos = (l as i64 - horizon as i64 + i as i64).rem_euclid(l as i64) as usize;
            lookback[pos]
        })
        .collect();
    Ok(out)
}
