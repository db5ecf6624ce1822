//! Task construction and inference for imputation and forecasting.
//!
//! Time coordinates are always normalized affinely into [0, 1] over the
//! window being modeled. For forecasting, look-back and horizon share one
//! normalization over the L+H span, so the look-back occupies
//! [0, (L−1)/(L+H−1)] and the model never extrapolates outside its trained
//! coordinate range.
//!
//! Inference never touches the shared parameters: a fresh code is adapted
//! on whatever was observed, then the frozen model is queried wherever
//! values are wanted.

use crate::autodiff::{Tape, Tensor};
use crate::data::TimeSeriesSample;
use crate::error::{Error, Result};
use crate::meta::{inner_adapt, InnerLoopConfig};
use crate::model::{forward_grid, predict_dense, shift_nodes, LatentCode, ModelParams, ParamNodes};
use crate::rng;

/// Strictly increasing coordinates in [0, 1], with the integer grid
/// indices they came from so results can be mapped back.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    coords: Vec<f64>,
    source_indices: Vec<usize>,
}

impl TimeGrid {
    pub fn new(coords: Vec<f64>, source_indices: Vec<usize>) -> Result<Self> {
        if coords.len() != source_indices.len() {
            return Err(Error::contract("coords and source indices must align"));
        }
        if !coords.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::contract("grid coordinates must be strictly increasing"));
        }
        if coords.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::contract("grid coordinates must lie in [0, 1]"));
        }
        Ok(TimeGrid { coords, source_indices })
    }

    pub fn empty() -> Self {
        TimeGrid { coords: Vec::new(), source_indices: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn source_indices(&self) -> &[usize] {
        &self.source_indices
    }
}

/// Map dense-grid indices into [0, 1]: t = (index − start) / (len − 1).
/// The source indices are retained, so the map is invertible.
pub fn normalize_time(indices: &[usize], window_start: usize, window_len: usize) -> Result<TimeGrid> {
    if window_len < 2 {
        return Err(Error::contract("time normalization needs a window of at least 2"));
    }
    let denom = (window_len - 1) as f64;
    let mut coords = Vec::with_capacity(indices.len());
    for &idx in indices {
        if idx < window_start || idx >= window_start + window_len {
            return Err(Error::contract(format!(
                "index {idx} outside window [{window_start}, {})",
                window_start + window_len
            )));
        }
        coords.push((idx - window_start) as f64 / denom);
    }
    TimeGrid::new(coords, indices.to_vec())
}

/// One training/evaluation unit: observed grid, optional horizon grid,
/// and the target grid with its scoring mask.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskWindow {
    pub sample_id: String,
    pub t_in: TimeGrid,
    pub values_in: Vec<f64>,
    pub t_out: TimeGrid,
    pub values_out: Vec<f64>,
    pub t_target: TimeGrid,
    pub values_target: Vec<f64>,
    /// Aligned to `t_target`: true where the window is scored.
    pub eval_mask: Vec<bool>,
    pub lambda: u8,
}

impl TaskWindow {
    pub fn validate(&self) -> Result<()> {
        if self.t_in.is_empty() {
            return Err(Error::contract(format!(
                "sample {}: observed grid is empty",
                self.sample_id
            )));
        }
        if self.t_in.len() != self.values_in.len() {
            return Err(Error::contract("observed grid and values must align"));
        }
        if (self.lambda == 1) != !self.t_out.is_empty() {
            return Err(Error::contract(
                "horizon grid must be nonempty exactly when lambda = 1",
            ));
        }
        if self.t_out.len() != self.values_out.len() {
            return Err(Error::contract("horizon grid and values must align"));
        }
        if self.t_target.len() != self.values_target.len()
            || self.t_target.len() != self.eval_mask.len()
        {
            return Err(Error::contract("target grid, values and mask must align"));
        }
        Ok(())
    }
}

/// Look-back length, horizon length and the stride used when enumerating
/// evaluation windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    pub lookback: usize,
    pub horizon: usize,
    pub stride: usize,
}

impl WindowSpec {
    pub fn validate(&self) -> Result<()> {
        if self.lookback == 0 || self.horizon == 0 {
            return Err(Error::contract("look-back and horizon must be at least 1"));
        }
        if self.stride == 0 {
            return Err(Error::contract("stride must be at least 1"));
        }
        Ok(())
    }

    pub fn span(&self) -> usize {
        self.lookback + self.horizon
    }
}

/// Imputation task: draw |T_in| = round(τ·|T|) of the sample's observed
/// points uniformly without replacement. The target is the full observed
/// grid; scoring covers exactly the points left out of T_in.
pub fn build_imputation_task(sample: &TimeSeriesSample, tau: f64, seed: u64) -> Result<TaskWindow> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::contract(format!("tau must lie in (0, 1], got {tau}")));
    }
    let n = sample.len();
    if sample.series_len < 2 || n == 0 {
        return Err(Error::contract("imputation needs a grid of at least 2 points"));
    }
    let keep = (tau * n as f64).round() as usize;
    if keep < 1 {
        return Err(Error::contract(format!(
            "tau {tau} keeps no points of a {n}-point grid"
        )));
    }
    let keep = keep.min(n);
    let mut r = rng::substream(seed, "subsample", 0);
    let chosen = rng::sample_without_replacement(n, keep, &mut r);

    let t_target = normalize_time(&sample.timestamps, 0, sample.series_len)?;
    let in_indices: Vec<usize> = chosen.iter().map(|&i| sample.timestamps[i]).collect();
    let values_in: Vec<f64> = chosen.iter().map(|&i| sample.values[i]).collect();
    let t_in = normalize_time(&in_indices, 0, sample.series_len)?;

    let mut eval_mask = vec![true; n];
    for &i in &chosen {
        eval_mask[i] = false;
    }

    Ok(TaskWindow {
        sample_id: sample.id.clone(),
        t_in,
        values_in,
        t_out: TimeGrid::empty(),
        values_out: Vec::new(),
        t_target,
        values_target: sample.values.clone(),
        eval_mask,
        lambda: 0,
    })
}

fn forecast_window_at(sample: &TimeSeriesSample, spec: &WindowSpec, start: usize) -> Result<TaskWindow> {
    let span = spec.span();
    let denom = span; // joint normalization over L+H points
    let in_indices: Vec<usize> = (start..start + spec.lookback).collect();
    let out_indices: Vec<usize> = (start + spec.lookback..start + span).collect();
    let values_at = |indices: &[usize]| -> Result<Vec<f64>> {
        indices
            .iter()
            .map(|&i| {
                sample.value_at(i).ok_or_else(|| {
                    Error::contract(format!(
                        "sample {} is unobserved at index {i} inside a forecast window",
                        sample.id
                    ))
                })
            })
            .collect()
    };
    let values_in = values_at(&in_indices)?;
    let values_out = values_at(&out_indices)?;
    let t_in = normalize_time(&in_indices, start, denom)?;
    let t_out = normalize_time(&out_indices, start, denom)?;
    let eval_mask = vec![true; out_indices.len()];
    Ok(TaskWindow {
        sample_id: sample.id.clone(),
        t_in,
        values_in,
        t_out: t_out.clone(),
        values_out: values_out.clone(),
        t_target: t_out,
        values_target: values_out,
        eval_mask,
        lambda: 1,
    })
}

/// Draw `draws` forecast windows with uniformly random start offsets.
pub fn build_forecast_windows(
    sample: &TimeSeriesSample,
    spec: &WindowSpec,
    seed: u64,
    draws: usize,
) -> Result<Vec<TaskWindow>> {
    spec.validate()?;
    let span = spec.span();
    if sample.series_len < span {
        return Err(Error::contract(format!(
            "series of length {} is shorter than look-back {} + horizon {}",
            sample.series_len, spec.lookback, spec.horizon
        )));
    }
    let max_start = sample.series_len - span;
    let mut r = rng::substream(seed, "windows", 0);
    let mut out = Vec::with_capacity(draws);
    for _ in 0..draws {
        let start = if max_start == 0 { 0 } else { rand::Rng::gen_range(&mut r, 0..=max_start) };
        out.push(forecast_window_at(sample, spec, start)?);
    }
    Ok(out)
}

/// Every forecast window at stride offsets within [from, series_len).
pub fn enumerate_forecast_windows(
    sample: &TimeSeriesSample,
    spec: &WindowSpec,
    from: usize,
) -> Result<Vec<TaskWindow>> {
    spec.validate()?;
    let span = spec.span();
    if sample.series_len < from + span {
        return Err(Error::contract(format!(
            "series of length {} has no room for a window of {span} starting at {from}",
            sample.series_len
        )));
    }
    let mut out = Vec::new();
    let mut start = from;
    while start + span <= sample.series_len {
        out.push(forecast_window_at(sample, spec, start)?);
        start += spec.stride;
    }
    Ok(out)
}

/// Adapt a fresh code on (coords, values) against frozen parameters.
pub fn adapt_code(
    params: &ModelParams,
    inner: &InnerLoopConfig,
    coords: &[f64],
    values: &[f64],
) -> Result<LatentCode> {
    if coords.is_empty() {
        return Err(Error::contract("adaptation needs at least one observation"));
    }
    let mut tape = Tape::new();
    let nodes = ParamNodes::bind(&mut tape, params, false);
    let embedding = params.embedding();
    let emb = embedding.embed_grid(coords);
    let target = Tensor::vector(values.to_vec());
    let code = inner_adapt(&mut tape, params.config.latent_dim, inner, false, |tape, code| {
        let shifts = shift_nodes(tape, &nodes, code)?;
        let pred = forward_grid(tape, &nodes, &shifts, &emb)?;
        tape.mse(pred, &target)
    })?;
    Ok(LatentCode::new(tape.value(code).data().to_vec()))
}

/// Imputation inference: adapt on the observed grid, then query every
/// target coordinate. Works for samples and windows never seen in
/// training; the shared parameters stay frozen throughout.
pub fn infer_impute(
    params: &ModelParams,
    inner: &InnerLoopConfig,
    observed: &TimeGrid,
    observed_values: &[f64],
    target: &TimeGrid,
) -> Result<(Vec<f64>, LatentCode)> {
    if observed.is_empty() {
        return Err(Error::contract("imputation inference needs observations"));
    }
    let code = adapt_code(params, inner, observed.coords(), observed_values)?;
    let preds = predict_dense(params, &code, target.coords())?;
    Ok((preds, code))
}

/// Forecast inference output: predictions over the whole look-back grid
/// and the horizon grid, plus which look-back points were actually
/// observed during adaptation.
#[derive(Debug, Clone)]
pub struct ForecastInference {
    pub lookback_pred: Vec<f64>,
    pub horizon_pred: Vec<f64>,
    pub lookback_observed: Vec<bool>,
    pub code: LatentCode,
}

/// Forecast inference: adapt a code on the (possibly subsampled)
/// look-back, then query both the full look-back grid and the horizon.
/// τ = 1 observes every look-back point and reduces to dense forecasting.
pub fn infer_forecast(
    params: &ModelParams,
    inner: &InnerLoopConfig,
    window: &TaskWindow,
    tau_lookback: f64,
    subsample_seed: u64,
) -> Result<ForecastInference> {
    window.validate()?;
    if window.lambda != 1 {
        return Err(Error::contract("forecast inference needs a window with a horizon"));
    }
    if !(tau_lookback > 0.0 && tau_lookback <= 1.0) {
        return Err(Error::contract(format!(
            "tau_lookback must lie in (0, 1], got {tau_lookback}"
        )));
    }
    let l = window.t_in.len();
    let keep = ((tau_lookback * l as f64).round() as usize).clamp(1, l);
    let mut r = rng::substream(subsample_seed, "lookback-subsample", 0);
    let chosen = rng::sample_without_replacement(l, keep, &mut r);

    let coords: Vec<f64> = chosen.iter().map(|&i| window.t_in.coords()[i]).collect();
    let values: Vec<f64> = chosen.iter().map(|&i| window.values_in[i]).collect();
    let mut lookback_observed = vec![false; l];
    for &i in &chosen {
        lookback_observed[i] = true;
    }

    let code = adapt_code(params, inner, &coords, &values)?;
    let lookback_pred = predict_dense(params, &code, window.t_in.coords())?;
    let horizon_pred = predict_dense(params, &code, window.t_out.coords())?;
    Ok(ForecastInference { lookback_pred, horizon_pred, lookback_observed, code })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_generate;
    use crate::data::SynthConfig;
    use crate::model::ModelConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_params() -> ModelParams {
        let cfg = ModelConfig {
            n_frequencies: 3,
            depth: 2,
            hidden_dim: 8,
            latent_dim: 4,
            max_frequency_index: None,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut params = ModelParams::init(cfg, &mut rng).unwrap();
        // modulation matrices are zero at init; codes only matter once
        // they are nonzero, so randomize them for inference tests
        for m in &mut params.hyper.mats {
            for v in m.data_mut() {
                *v = rand::Rng::gen_range(&mut rng, -0.5..0.5);
            }
        }
        params
    }

    #[test]
    fn normalize_time_endpoints_and_round_trip() {
        let grid = normalize_time(&(0..10).collect::<Vec<_>>(), 0, 10).unwrap();
        assert_eq!(grid.coords()[0], 0.0);
        assert_eq!(*grid.coords().last().unwrap(), 1.0);
        assert!((grid.coords()[1] - 1.0 / 9.0).abs() < 1e-15);

        // round trip index → coord → index
        for (c, idx) in grid.coords().iter().zip(grid.source_indices()) {
            let back = (c * 9.0).round() as usize;
            assert_eq!(back, *idx);
        }
    }

    #[test]
    fn normalize_time_is_shift_invariant_on_gaps() {
        let a = normalize_time(&[3, 5, 9], 0, 12).unwrap();
        let b = normalize_time(&[7, 9, 13], 4, 12).unwrap();
        for (x, y) in a.coords().iter().zip(b.coords()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn normalize_time_contract_errors() {
        assert!(normalize_time(&[0], 0, 1).is_err());
        assert!(normalize_time(&[5], 0, 4).is_err());
    }

    #[test]
    fn imputation_task_counts_and_mask() {
        let sample = crate::data::TimeSeriesSample::dense(
            "s",
            (0..2000).map(|i| (i as f64 * 0.01).sin()).collect(),
        );
        let task = build_imputation_task(&sample, 0.05, 7).unwrap();
        assert_eq!(task.t_in.len(), 100); // round(0.05·2000)
        assert_eq!(task.lambda, 0);
        assert!(task.t_out.is_empty());
        assert_eq!(task.t_target.len(), 2000);
        // mask excludes exactly the observed points
        let masked = task.eval_mask.iter().filter(|m| **m).count();
        assert_eq!(masked, 1900);
        let observed: std::collections::HashSet<usize> =
            task.t_in.source_indices().iter().copied().collect();
        for (i, m) in task.eval_mask.iter().enumerate() {
            assert_eq!(*m, !observed.contains(&task.t_target.source_indices()[i]));
        }
    }

    #[test]
    fn imputation_tau_one_has_empty_mask() {
        let sample = crate::data::TimeSeriesSample::dense("s", (0..50).map(|i| i as f64).collect());
        let task = build_imputation_task(&sample, 1.0, 3).unwrap();
        assert_eq!(task.t_in.len(), 50);
        assert!(task.eval_mask.iter().all(|m| !m));
    }

    #[test]
    fn imputation_task_reproducible_for_seed() {
        let sample = crate::data::TimeSeriesSample::dense("s", (0..100).map(|i| i as f64).collect());
        let a = build_imputation_task(&sample, 0.3, 123).unwrap();
        let b = build_imputation_task(&sample, 0.3, 123).unwrap();
        assert_eq!(a, b);
        let c = build_imputation_task(&sample, 0.3, 124).unwrap();
        assert_ne!(a.t_in, c.t_in);
    }

    #[test]
    fn forecast_window_single_possible_start() {
        let sample = crate::data::TimeSeriesSample::dense("s", (0..608).map(|i| i as f64).collect());
        let spec = WindowSpec { lookback: 512, horizon: 96, stride: 1 };
        let ws = build_forecast_windows(&sample, &spec, 5, 1).unwrap();
        assert_eq!(ws.len(), 1);
        assert_eq!(ws[0].t_in.source_indices()[0], 0);
        assert_eq!(*ws[0].t_out.source_indices().last().unwrap(), 607);
    }

    #[test]
    fn forecast_window_values_and_coords() {
        let sample = crate::data::TimeSeriesSample::dense("s", vec![1.0, 2.0, 3.0]);
        let spec = WindowSpec { lookback: 2, horizon: 1, stride: 1 };
        let ws = build_forecast_windows(&sample, &spec, 1, 1).unwrap();
        assert_eq!(ws[0].values_in, vec![1.0, 2.0]);
        assert_eq!(ws[0].values_out, vec![3.0]);
        // joint normalization over L+H = 3 points
        assert_eq!(ws[0].t_in.coords(), &[0.0, 0.5]);
        assert_eq!(ws[0].t_out.coords(), &[1.0]);
        assert_eq!(ws[0].lambda, 1);
    }

    #[test]
    fn forecast_window_bounds_respected() {
        let sample =
            crate::data::TimeSeriesSample::dense("s", (0..100).map(|i| i as f64).collect());
        let spec = WindowSpec { lookback: 16, horizon: 8, stride: 1 };
        for w in build_forecast_windows(&sample, &spec, 99, 50).unwrap() {
            let last = *w.t_out.source_indices().last().unwrap();
            assert!(last < 100);
            assert_eq!(w.t_in.len(), 16);
            assert_eq!(w.t_out.len(), 8);
        }
        // too short errors
        let short = crate::data::TimeSeriesSample::dense("s", vec![0.0; 20]);
        assert!(build_forecast_windows(&short, &spec, 1, 1).is_err());
    }

    #[test]
    fn enumerate_windows_strided() {
        let sample =
            crate::data::TimeSeriesSample::dense("s", (0..40).map(|i| i as f64).collect());
        let spec = WindowSpec { lookback: 8, horizon: 4, stride: 5 };
        let ws = enumerate_forecast_windows(&sample, &spec, 10).unwrap();
        let starts: Vec<usize> = ws.iter().map(|w| w.t_in.source_indices()[0]).collect();
        assert_eq!(starts, vec![10, 15, 20, 25]);
    }

    #[test]
    fn infer_impute_frozen_params_and_distinct_codes() {
        let params = tiny_params();
        let before = params.clone();
        let inner = InnerLoopConfig { alpha: 0.05, steps: 3 };

        let cfg = SynthConfig {
            frequencies: vec![2.0],
            amp_range: (0.5, 1.5),
            phase_range: (0.0, std::f64::consts::TAU),
            trend_range: (0.0, 0.0),
            noise_std: 0.0,
        };
        let samples = synth_generate(2, 32, &cfg, 77).unwrap();
        let mut codes = Vec::new();
        for s in &samples {
            let task = build_imputation_task(s, 0.5, 5).unwrap();
            let (preds, code) =
                infer_impute(&params, &inner, &task.t_in, &task.values_in, &task.t_target)
                    .unwrap();
            assert_eq!(preds.len(), task.t_target.len());
            codes.push(code);
        }
        assert_eq!(params, before); // bit-identical shared parameters
        assert_ne!(codes[0], codes[1]); // different observations, different codes
    }

    #[test]
    fn sparse_lookback_tau_one_is_dense_bit_for_bit() {
        let params = tiny_params();
        let inner = InnerLoopConfig { alpha: 0.05, steps: 2 };
        let sample =
            crate::data::TimeSeriesSample::dense("s", (0..48).map(|i| (0.3 * i as f64).sin()).collect());
        let spec = WindowSpec { lookback: 32, horizon: 16, stride: 1 };
        let w = &enumerate_forecast_windows(&sample, &spec, 0).unwrap()[0];

        let sparse = infer_forecast(&params, &inner, w, 1.0, 42).unwrap();
        // dense path: adapt directly on the full look-back
        let code = adapt_code(&params, &inner, w.t_in.coords(), &w.values_in).unwrap();
        let dense_h = predict_dense(&params, &code, w.t_out.coords()).unwrap();
        assert_eq!(sparse.horizon_pred, dense_h); // bit-for-bit
        assert!(sparse.lookback_observed.iter().all(|o| *o));
    }

    #[test]
    fn horizon_coords_extend_beyond_lookback_span() {
        let sample =
            crate::data::TimeSeriesSample::dense("s", (0..30).map(|i| i as f64).collect());
        let spec = WindowSpec { lookback: 20, horizon: 10, stride: 1 };
        let w = &enumerate_forecast_windows(&sample, &spec, 0).unwrap()[0];
        let max_in = *w.t_in.coords().last().unwrap();
        assert!(w.t_out.coords().iter().all(|c| *c > max_in));
        assert_eq!(*w.t_out.coords().last().unwrap(), 1.0);
    }
}
