//! Command-line driver: `train`, `impute`, `forecast`, `evaluate`,
//! `synth`.
//!
//! Every command is deterministic given (config, seed); output files are
//! byte-identical across reruns. Exit codes: 0 success, 2 config/usage
//! error, 3 runtime divergence, 4 I/O failure. `TIMEFLOW_LOG` controls the
//! log level.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::baselines::{knn_impute, linear_interpolate, repeat_forecast, KnnConfig};
use crate::config::{RunConfig, TaskMode};
use crate::data::{self, load_csv, normalize_dataset, synth_generate, TimeSeriesSample};
use crate::error::{Error, Result};
use crate::eval::{aggregate, mae, split_errors, write_report_csv, EvalReport, ReportMeta, ReportRow};
use crate::meta::{fit, InnerLoopConfig, TrainingTasks};
use crate::model::ModelParams;
use crate::persist::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::rng;
use crate::tasks::{
    build_imputation_task, enumerate_forecast_windows, infer_forecast, infer_impute, TaskWindow,
};

#[derive(Parser)]
#[command(name = "timeflow", version, about = "Continuous-time series modeling with a meta-learned implicit representation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write a checkpoint, loss history and config echo.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Checkpoint output path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Impute dense series from partial observations with a trained model.
    Impute {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Observation rate; overridden by --mask.
        #[arg(long)]
        tau: Option<f64>,
        /// Explicit observation mask CSV (same layout as the data, 1 = observed).
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Inner steps at inference (default: as trained).
        #[arg(long = "inner-steps-eval")]
        inner_steps_eval: Option<usize>,
        /// Add a denormalized MAE column to reports.
        #[arg(long)]
        denorm: bool,
    },
    /// Forecast a horizon from a (possibly sparse) look-back window.
    Forecast {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        lookback: Option<usize>,
        #[arg(long)]
        horizon: Option<usize>,
        /// Look-back observation rate (1 = dense).
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "inner-steps-eval")]
        inner_steps_eval: Option<usize>,
        #[arg(long)]
        denorm: bool,
    },
    /// Score a method on an imputation or forecasting task.
    Evaluate {
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Needed when method = timeflow.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        lookback: Option<usize>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "inner-steps-eval")]
        inner_steps_eval: Option<usize>,
        #[arg(long)]
        denorm: bool,
    },
    /// Generate a synthetic dataset CSV from the config's [synth] block.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Timeflow,
    Linear,
    Knn,
    Repeat,
}

impl Method {
    fn name(&self) -> &'static str {
        match self {
            Method::Timeflow => "timeflow",
            Method::Linear => "linear",
            Method::Knn => "knn",
            Method::Repeat => "repeat",
        }
    }
}

/// Parse argv and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter("TIMEFLOW_LOG"))
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { ref config, ref out } => {
            let mut cfg = RunConfig::load(config)?;
            apply_overrides(&mut cfg, cli.seed, cli.threads);
            setup_threads(cfg.threads)?;
            cmd_train(&cfg, out)
        }
        Command::Impute {
            ref checkpoint,
            ref config,
            ref data,
            tau,
            ref mask,
            ref out,
            inner_steps_eval,
            denorm,
        } => {
            let mut cfg = load_optional_config(config)?;
            apply_overrides(&mut cfg, cli.seed, cli.threads);
            if let Some(t) = tau {
                cfg.task.tau = t;
            }
            cfg.validate()?;
            setup_threads(cfg.threads)?;
            cmd_impute(&cfg, checkpoint, data.as_deref(), mask.as_deref(), out, inner_steps_eval, denorm)
        }
        Command::Forecast {
            ref checkpoint,
            ref config,
            ref data,
            lookback,
            horizon,
            tau,
            ref out,
            inner_steps_eval,
            denorm,
        } => {
            let mut cfg = load_optional_config(config)?;
            apply_overrides(&mut cfg, cli.seed, cli.threads);
            cfg.task.mode = TaskMode::Forecast;
            if let Some(l) = lookback {
                cfg.task.lookback = l;
            }
            if let Some(h) = horizon {
                cfg.task.horizon = h;
            }
            if let Some(t) = tau {
                cfg.task.tau = t;
            }
            cfg.validate()?;
            setup_threads(cfg.threads)?;
            cmd_forecast(&cfg, checkpoint, data.as_deref(), out, inner_steps_eval, denorm)
        }
        Command::Evaluate {
            method,
            ref config,
            ref data,
            ref checkpoint,
            tau,
            lookback,
            horizon,
            ref out,
            inner_steps_eval,
            denorm,
        } => {
            let mut cfg = load_optional_config(config)?;
            apply_overrides(&mut cfg, cli.seed, cli.threads);
            if let Some(t) = tau {
                cfg.task.tau = t;
            }
            if let Some(l) = lookback {
                cfg.task.lookback = l;
            }
            if let Some(h) = horizon {
                cfg.task.horizon = h;
            }
            cfg.validate()?;
            setup_threads(cfg.threads)?;
            cmd_evaluate(&cfg, method, data.as_deref(), checkpoint.as_deref(), out, inner_steps_eval, denorm)
        }
        Command::Synth { ref config, ref out } => {
            let mut cfg = RunConfig::load(config)?;
            apply_overrides(&mut cfg, cli.seed, cli.threads);
            cmd_synth(&cfg, out)
        }
    }
}

fn apply_overrides(cfg: &mut RunConfig, seed: Option<u64>, threads: Option<usize>) {
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = threads {
        cfg.threads = t;
    }
}

fn load_optional_config(path: &Option<PathBuf>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn setup_threads(threads: usize) -> Result<()> {
    if threads == 0 {
        return Ok(()); // rayon default: all cores
    }
    // a pool may already exist (tests call run() repeatedly); that is fine
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

/// Load the configured data source: an explicit CSV path, the config's
/// CSV, or the synthetic block. Returns raw (unnormalized) samples and a
/// dataset label for reports.
fn load_dataset(cfg: &RunConfig, data_flag: Option<&Path>) -> Result<(Vec<TimeSeriesSample>, String)> {
    let path = data_flag.map(Path::to_path_buf).or_else(|| cfg.data.csv.clone());
    let (mut samples, name) = if let Some(p) = path {
        let samples = load_csv(&p, &cfg.csv_layout())?;
        let name = p.file_stem().and_then(|s| s.to_str()).unwrap_or("data").to_string();
        (samples, name)
    } else if let Some((n, len, synth_cfg)) = cfg.synth_config() {
        let samples = synth_generate(n, len, &synth_cfg, rng::substream_seed(cfg.seed, "synth-data", 0))?;
        (samples, "synth".to_string())
    } else {
        return Err(Error::Config(
            "no data source: pass --data, or set [data] csv or a [synth] block".into(),
        ));
    };
    if let Some(stride) = cfg.data.downsample {
        samples = samples
            .iter()
            .map(|s| data::downsample_stride(s, stride))
            .collect::<Result<_>>()?;
    }
    Ok((samples, name))
}

fn maybe_normalize(cfg: &RunConfig, samples: Vec<TimeSeriesSample>) -> Vec<TimeSeriesSample> {
    if cfg.data.normalize.unwrap_or(true) {
        normalize_dataset(&samples)
    } else {
        samples
    }
}

/// Normalize against checkpoint statistics for known sample ids; unseen
/// ids fall back to their own observed statistics.
fn normalize_with_checkpoint(
    samples: Vec<TimeSeriesSample>,
    stats: &BTreeMap<String, (f64, f64)>,
) -> Vec<TimeSeriesSample> {
    samples
        .into_iter()
        .map(|s| match stats.get(&s.id) {
            Some(&(mean, std)) => {
                let mut out = s;
                for v in &mut out.values {
                    *v = (*v - mean) / std;
                }
                out.norm_stats = Some((mean, std));
                out
            }
            None => normalize_dataset(&[s]).remove(0),
        })
        .collect()
}

/// Samples restricted to the training range when one is configured.
fn training_view(cfg: &RunConfig, samples: &[TimeSeriesSample]) -> Result<Vec<TimeSeriesSample>> {
    if cfg.task.window_len == 0 {
        return Ok(samples.to_vec());
    }
    samples.iter().map(|s| s.window(0, cfg.task.window_len)).collect()
}

fn cmd_train(cfg: &RunConfig, out: &Path) -> Result<()> {
    let (raw, _) = load_dataset(cfg, None)?;
    let samples = maybe_normalize(cfg, raw);
    let train_samples = training_view(cfg, &samples)?;

    let mut init_rng = ChaCha8Rng::seed_from_u64(rng::substream_seed(cfg.seed, "init", 0));
    let mut params = ModelParams::init(cfg.model_config(), &mut init_rng)?;
    let inner = cfg.inner_config();

    let (tasks, lambda) = match cfg.task.mode {
        TaskMode::Impute => {
            let windows: Vec<TaskWindow> = train_samples
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    build_imputation_task(s, cfg.task.tau, rng::substream_seed(cfg.seed, "subsample", i as u64))
                })
                .collect::<Result<_>>()?;
            (TrainingTasks::Fixed(windows), 0)
        }
        TaskMode::Forecast => (
            TrainingTasks::ForecastDraws {
                samples: train_samples.clone(),
                spec: cfg.window_spec(),
                draws_per_sample: cfg.task.draws_per_epoch,
            },
            1,
        ),
    };

    let outer = cfg.outer_config(lambda);
    let report = fit(&mut params, &tasks, &inner, &outer, cfg.seed)?;

    let mut checkpoint = Checkpoint::new(params, cfg.seed);
    checkpoint.inner_alpha = inner.alpha;
    checkpoint.inner_steps = inner.steps;
    for s in &samples {
        if let Some(stats) = s.norm_stats {
            checkpoint.norm_stats.insert(s.id.clone(), stats);
        }
    }
    save_checkpoint(&checkpoint, out)?;

    let loss_path = crate::persist::loss_history_path(out);
    let mut loss_csv = String::from("epoch,loss\n");
    for (e, l) in report.epoch_losses.iter().enumerate() {
        loss_csv.push_str(&format!("{e},{l}\n"));
    }
    std::fs::write(&loss_path, loss_csv).map_err(|e| Error::io(&loss_path, e))?;

    let echo_path = out.with_extension("config.toml");
    std::fs::write(&echo_path, cfg.to_toml()).map_err(|e| Error::io(&echo_path, e))?;

    println!(
        "trained {} epochs; final outer loss {:.6e}; checkpoint {}",
        report.epoch_losses.len(),
        report.epoch_losses.last().copied().unwrap_or(f64::NAN),
        out.display()
    );
    Ok(())
}

/// Observation masks per sample id, parsed from a CSV with the data
/// layout: nonzero = observed.
fn load_mask(path: &Path, cfg: &RunConfig) -> Result<BTreeMap<String, Vec<bool>>> {
    let samples = load_csv(path, &cfg.csv_layout())?;
    let mut out = BTreeMap::new();
    for s in samples {
        let mut mask = vec![false; s.series_len];
        for (t, v) in s.timestamps.iter().zip(&s.values) {
            mask[*t] = *v != 0.0;
        }
        out.insert(s.id, mask);
    }
    Ok(out)
}

/// Evaluation windows over the dense grid: the configured count/length,
/// or the whole series as window 0.
fn eval_windows(cfg: &RunConfig, series_len: usize) -> Vec<(usize, usize)> {
    if cfg.task.window_len == 0 {
        vec![(0, series_len)]
    } else {
        let count = cfg.task.window_count.max(1);
        (0..count)
            .map(|i| (i * cfg.task.window_len, cfg.task.window_len))
            .filter(|(s, l)| s + l <= series_len)
            .collect()
    }
}

/// Build the imputation task for (window, sample), honoring an explicit
/// mask when given, else drawing at rate τ from the shared substream so
/// every method sees identical masks.
fn imputation_task_for(
    cfg: &RunConfig,
    sample: &TimeSeriesSample,
    mask: Option<&BTreeMap<String, Vec<bool>>>,
    window_idx: usize,
    sample_idx: usize,
) -> Result<TaskWindow> {
    if let Some(masks) = mask {
        let m = masks.get(&sample.id).ok_or_else(|| {
            Error::Config(format!("mask file has no column for sample {}", sample.id))
        })?;
        if m.len() != sample.series_len {
            return Err(Error::Config(format!(
                "mask for {} has {} rows, data has {}",
                sample.id,
                m.len(),
                sample.series_len
            )));
        }
        let keep: Vec<usize> = (0..sample.len())
            .filter(|&i| m[sample.timestamps[i]])
            .collect();
        if keep.is_empty() {
            return Err(Error::contract(format!("mask leaves sample {} unobserved", sample.id)));
        }
        let t_target = crate::tasks::normalize_time(&sample.timestamps, 0, sample.series_len)?;
        let in_indices: Vec<usize> = keep.iter().map(|&i| sample.timestamps[i]).collect();
        let values_in: Vec<f64> = keep.iter().map(|&i| sample.values[i]).collect();
        let t_in = crate::tasks::normalize_time(&in_indices, 0, sample.series_len)?;
        let mut eval_mask = vec![true; sample.len()];
        for &i in &keep {
            eval_mask[i] = false;
        }
        Ok(TaskWindow {
            sample_id: sample.id.clone(),
            t_in,
            values_in,
            t_out: crate::tasks::TimeGrid::empty(),
            values_out: Vec::new(),
            t_target,
            values_target: sample.values.clone(),
            eval_mask,
            lambda: 0,
        })
    } else {
        build_imputation_task(
            sample,
            cfg.task.tau,
            rng::substream_seed(cfg.seed, "subsample", ((window_idx as u64) << 32) | sample_idx as u64),
        )
    }
}

struct ImputeOutcome {
    rows: Vec<ReportRow>,
    reports: Vec<EvalReport>,
    predictions_csv: String,
}

/// Shared imputation evaluation: one row per window (MAE averaged over
/// samples), dense denormalized predictions for every sample.
fn impute_core(
    cfg: &RunConfig,
    dataset: &str,
    method: Method,
    checkpoint: Option<&Checkpoint>,
    samples: &[TimeSeriesSample],
    mask: Option<&BTreeMap<String, Vec<bool>>>,
    inner_steps_eval: Option<usize>,
    denorm: bool,
) -> Result<ImputeOutcome> {
    let series_len = samples.iter().map(|s| s.series_len).max().unwrap_or(0);
    let windows = eval_windows(cfg, series_len);
    let mut rows = Vec::new();
    let mut preds_csv = String::from("window_id,t,sample_id,prediction\n");
    let mut per_window = Vec::new();
    let mut per_window_denorm = Vec::new();

    for (w, &(start, len)) in windows.iter().enumerate() {
        let mut maes = Vec::new();
        let mut maes_dn = Vec::new();
        for (i, full) in samples.iter().enumerate() {
            let sample = full.window(start, len)?;
            if sample.is_empty() {
                continue;
            }
            let task = imputation_task_for(cfg, &sample, mask, w, i)?;
            let stats = sample.norm_stats.unwrap_or((0.0, 1.0));

            let preds = match method {
                Method::Timeflow => {
                    let ckpt = checkpoint.expect("checked by caller");
                    let inner = InnerLoopConfig {
                        alpha: ckpt.inner_alpha,
                        steps: inner_steps_eval.unwrap_or(ckpt.inner_steps),
                    };
                    let (preds, _) =
                        infer_impute(&ckpt.params, &inner, &task.t_in, &task.values_in, &task.t_target)?;
                    preds
                }
                Method::Linear => linear_interpolate(
                    task.t_in.coords(),
                    &task.values_in,
                    task.t_target.coords(),
                )?,
                Method::Knn => {
                    // pool: the other samples in this window, with the same
                    // per-sample masks applied
                    let mut pool = Vec::new();
                    for (j, other) in samples.iter().enumerate() {
                        if j == i {
                            continue;
                        }
                        let ow = other.window(start, len)?;
                        if ow.is_empty() {
                            continue;
                        }
                        let otask = imputation_task_for(cfg, &ow, mask, w, j)?;
                        pool.push(TimeSeriesSample::new(
                            ow.id.clone(),
                            otask.t_in.source_indices().to_vec(),
                            otask.values_in.clone(),
                            ow.series_len,
                        )?);
                    }
                    let observed = TimeSeriesSample::new(
                        sample.id.clone(),
                        task.t_in.source_indices().to_vec(),
                        task.values_in.clone(),
                        sample.series_len,
                    )?;
                    let (dense, diags) =
                        knn_impute(&observed, &pool, &KnnConfig { k: cfg.task.knn_k })?;
                    if diags.interpolation_fallbacks > 0 {
                        log::warn!(
                            "knn fell back to interpolation at {} coordinates of sample {}",
                            diags.interpolation_fallbacks,
                            sample.id
                        );
                    }
                    // restrict the dense grid to the target coordinates
                    task.t_target.source_indices().iter().map(|&t| dense[t]).collect()
                }
                Method::Repeat => {
                    return Err(Error::Config(
                        "method repeat only applies to forecasting tasks".into(),
                    ))
                }
            };

            for (t, p) in task.t_target.source_indices().iter().zip(&preds) {
                let dn = p * stats.1 + stats.0;
                preds_csv.push_str(&format!("{w},{},{},{dn}\n", start + t, sample.id));
            }
            if task.eval_mask.iter().any(|m| *m) {
                let m = mae(&preds, &task.values_target, &task.eval_mask)?;
                maes.push(m);
                if denorm {
                    maes_dn.push(m * stats.1);
                }
            }
        }
        if !maes.is_empty() {
            let mean = maes.iter().sum::<f64>() / maes.len() as f64;
            per_window.push(mean);
            let mean_dn = if denorm {
                Some(maes_dn.iter().sum::<f64>() / maes_dn.len() as f64)
            } else {
                None
            };
            per_window_denorm.push(mean_dn);
            rows.push(ReportRow {
                dataset: dataset.to_string(),
                method: method.name().to_string(),
                tau: Some(cfg.task.tau),
                horizon: None,
                window_id: w,
                mae: mean,
                mae_denorm: mean_dn,
            });
        }
    }

    let reports = if per_window.is_empty() {
        Vec::new()
    } else {
        vec![aggregate(
            &per_window,
            ReportMeta {
                dataset: dataset.to_string(),
                method: method.name().to_string(),
                tau: Some(cfg.task.tau),
                horizon: None,
                lookback: None,
                seed: Some(cfg.seed),
            },
        )?]
    };
    Ok(ImputeOutcome { rows, reports, predictions_csv: preds_csv })
}

fn cmd_impute(
    cfg: &RunConfig,
    checkpoint_path: &Path,
    data: Option<&Path>,
    mask_path: Option<&Path>,
    out: &Path,
    inner_steps_eval: Option<usize>,
    denorm: bool,
) -> Result<()> {
    let checkpoint = load_checkpoint(checkpoint_path)?;
    let (raw, dataset) = load_dataset(cfg, data)?;
    let samples = normalize_with_checkpoint(raw, &checkpoint.norm_stats);
    let mask = match mask_path {
        Some(p) => Some(load_mask(p, cfg)?),
        None => None,
    };

    let outcome = impute_core(
        cfg,
        &dataset,
        Method::Timeflow,
        Some(&checkpoint),
        &samples,
        mask.as_ref(),
        inner_steps_eval,
        denorm,
    )?;
    finish_outcome(out, outcome, "imputation")
}

struct ForecastOutcome {
    rows: Vec<ReportRow>,
    reports: Vec<EvalReport>,
    predictions_csv: String,
}

/// Shared forecast evaluation over enumerated windows. With a sparse
/// look-back (τ < 1) a second set of rows carries the look-back
/// reconstruction error; methods reconstruct the look-back their own way
/// (adaptation for the model, linear interpolation for repeat).
fn forecast_core(
    cfg: &RunConfig,
    dataset: &str,
    method: Method,
    checkpoint: Option<&Checkpoint>,
    samples: &[TimeSeriesSample],
    inner_steps_eval: Option<usize>,
    denorm: bool,
) -> Result<ForecastOutcome> {
    let spec = cfg.window_spec();
    let tau = cfg.task.tau;
    let from = cfg.task.window_len; // evaluation starts after the training range
    let mut rows = Vec::new();
    let mut preds_csv = String::from("sample_id,window_id,segment,t,prediction,truth\n");
    let mut fc_per_window: Vec<f64> = Vec::new();
    let mut fc_dn_per_window: Vec<f64> = Vec::new();
    let mut imp_per_window: Vec<f64> = Vec::new();

    // window index w enumerates positions; samples are averaged per w
    let mut w = 0usize;
    loop {
        let mut fc_maes = Vec::new();
        let mut fc_dn = Vec::new();
        let mut imp_maes = Vec::new();
        let mut any = false;
        for (i, sample) in samples.iter().enumerate() {
            let all = match enumerate_forecast_windows(sample, &spec, from) {
                Ok(ws) => ws,
                Err(_) => continue,
            };
            let Some(window) = all.get(w) else { continue };
            any = true;
            let stats = sample.norm_stats.unwrap_or((0.0, 1.0));
            let subsample_seed =
                rng::substream_seed(cfg.seed, "lookback", ((w as u64) << 32) | i as u64);

            let (lb_pred, h_pred, lb_observed) = match method {
                Method::Timeflow => {
                    let ckpt = checkpoint.expect("checked by caller");
                    let inner = InnerLoopConfig {
                        alpha: ckpt.inner_alpha,
                        steps: inner_steps_eval.unwrap_or(ckpt.inner_steps),
                    };
                    let inf = infer_forecast(&ckpt.params, &inner, window, tau, subsample_seed)?;
                    (inf.lookback_pred, inf.horizon_pred, inf.lookback_observed)
                }
                Method::Repeat => {
                    // refit-free: linear interpolation fills the sparse
                    // look-back, then the trailing window repeats
                    let l = window.t_in.len();
                    let keep = ((tau * l as f64).round() as usize).clamp(1, l);
                    let mut r = rng::substream(subsample_seed, "lookback-subsample", 0);
                    let chosen = rng::sample_without_replacement(l, keep, &mut r);
                    let coords: Vec<f64> =
                        chosen.iter().map(|&j| window.t_in.coords()[j]).collect();
                    let values: Vec<f64> = chosen.iter().map(|&j| window.values_in[j]).collect();
                    let lb = linear_interpolate(&coords, &values, window.t_in.coords())?;
                    let h = repeat_forecast(&lb, spec.horizon)?;
                    let mut observed = vec![false; l];
                    for &j in &chosen {
                        observed[j] = true;
                    }
                    (lb, h, observed)
                }
                Method::Linear | Method::Knn => {
                    return Err(Error::Config(format!(
                        "method {} only applies to imputation tasks",
                        method.name()
                    )))
                }
            };

            for ((t, p), truth) in window
                .t_in
                .source_indices()
                .iter()
                .zip(&lb_pred)
                .zip(&window.values_in)
            {
                let (pd, td) = (p * stats.1 + stats.0, truth * stats.1 + stats.0);
                preds_csv.push_str(&format!("{},{w},lookback,{t},{pd},{td}\n", sample.id));
            }
            for ((t, p), truth) in window
                .t_out
                .source_indices()
                .iter()
                .zip(&h_pred)
                .zip(&window.values_out)
            {
                let (pd, td) = (p * stats.1 + stats.0, truth * stats.1 + stats.0);
                preds_csv.push_str(&format!("{},{w},horizon,{t},{pd},{td}\n", sample.id));
            }

            let (imp, fc) = split_errors(
                &lb_pred,
                &window.values_in,
                &lb_observed,
                &h_pred,
                &window.values_out,
            )?;
            fc_maes.push(fc);
            if denorm {
                fc_dn.push(fc * stats.1);
            }
            if tau < 1.0 {
                imp_maes.push(imp);
            }
        }
        if !any {
            break;
        }
        if !fc_maes.is_empty() {
            let mean = fc_maes.iter().sum::<f64>() / fc_maes.len() as f64;
            fc_per_window.push(mean);
            let mean_dn = if denorm {
                Some(fc_dn.iter().sum::<f64>() / fc_dn.len() as f64)
            } else {
                None
            };
            if let Some(d) = mean_dn {
                fc_dn_per_window.push(d);
            }
            rows.push(ReportRow {
                dataset: dataset.to_string(),
                method: method.name().to_string(),
                tau: Some(tau),
                horizon: Some(spec.horizon),
                window_id: w,
                mae: mean,
                mae_denorm: mean_dn,
            });
            if tau < 1.0 {
                let imp_mean = imp_maes.iter().sum::<f64>() / imp_maes.len() as f64;
                imp_per_window.push(imp_mean);
                rows.push(ReportRow {
                    dataset: dataset.to_string(),
                    method: format!("{}-lookback", method.name()),
                    tau: Some(tau),
                    horizon: Some(spec.horizon),
                    window_id: w,
                    mae: imp_mean,
                    mae_denorm: None,
                });
            }
        }
        w += 1;
    }

    if fc_per_window.is_empty() {
        return Err(Error::contract(format!(
            "series too short for look-back {} + horizon {} after offset {from}",
            spec.lookback, spec.horizon
        )));
    }

    let mut reports = vec![aggregate(
        &fc_per_window,
        ReportMeta {
            dataset: dataset.to_string(),
            method: method.name().to_string(),
            tau: Some(tau),
            horizon: Some(spec.horizon),
            lookback: Some(spec.lookback),
            seed: Some(cfg.seed),
        },
    )?];
    if !imp_per_window.is_empty() {
        reports.push(aggregate(
            &imp_per_window,
            ReportMeta {
                dataset: dataset.to_string(),
                method: format!("{}-lookback", method.name()),
                tau: Some(tau),
                horizon: Some(spec.horizon),
                lookback: Some(spec.lookback),
                seed: Some(cfg.seed),
            },
        )?);
    }
    Ok(ForecastOutcome { rows, reports, predictions_csv: preds_csv })
}

fn cmd_forecast(
    cfg: &RunConfig,
    checkpoint_path: &Path,
    data: Option<&Path>,
    out: &Path,
    inner_steps_eval: Option<usize>,
    denorm: bool,
) -> Result<()> {
    let checkpoint = load_checkpoint(checkpoint_path)?;
    let (raw, dataset) = load_dataset(cfg, data)?;
    let samples = normalize_with_checkpoint(raw, &checkpoint.norm_stats);
    let outcome = forecast_core(
        cfg,
        &dataset,
        Method::Timeflow,
        Some(&checkpoint),
        &samples,
        inner_steps_eval,
        denorm,
    )?;
    finish_outcome(
        out,
        ImputeOutcome {
            rows: outcome.rows,
            reports: outcome.reports,
            predictions_csv: outcome.predictions_csv,
        },
        "forecast",
    )
}

fn cmd_evaluate(
    cfg: &RunConfig,
    method: Method,
    data: Option<&Path>,
    checkpoint_path: Option<&Path>,
    out: &Path,
    inner_steps_eval: Option<usize>,
    denorm: bool,
) -> Result<()> {
    // method/task compatibility up front
    match (cfg.task.mode, method) {
        (TaskMode::Impute, Method::Repeat) => {
            return Err(Error::Config("method repeat cannot run an imputation task".into()))
        }
        (TaskMode::Forecast, Method::Linear) | (TaskMode::Forecast, Method::Knn) => {
            return Err(Error::Config(format!(
                "method {} cannot run a forecasting task",
                method.name()
            )))
        }
        _ => {}
    }
    let checkpoint = match (method, checkpoint_path) {
        (Method::Timeflow, Some(p)) => Some(load_checkpoint(p)?),
        (Method::Timeflow, None) => {
            return Err(Error::Config("method timeflow requires --checkpoint".into()))
        }
        _ => None,
    };

    let (raw, dataset) = load_dataset(cfg, data)?;
    let samples = match &checkpoint {
        Some(c) => normalize_with_checkpoint(raw, &c.norm_stats),
        None => maybe_normalize(cfg, raw),
    };
    if method == Method::Knn && cfg.task.knn_k + 1 > samples.len() {
        return Err(Error::Config(format!(
            "knn_k = {} needs at least {} samples, got {}",
            cfg.task.knn_k,
            cfg.task.knn_k + 1,
            samples.len()
        )));
    }

    match cfg.task.mode {
        TaskMode::Impute => {
            let outcome = impute_core(
                cfg,
                &dataset,
                method,
                checkpoint.as_ref(),
                &samples,
                None,
                inner_steps_eval,
                denorm,
            )?;
            finish_outcome(out, outcome, "evaluation")
        }
        TaskMode::Forecast => {
            let outcome = forecast_core(
                cfg,
                &dataset,
                method,
                checkpoint.as_ref(),
                &samples,
                inner_steps_eval,
                denorm,
            )?;
            finish_outcome(
                out,
                ImputeOutcome {
                    rows: outcome.rows,
                    reports: outcome.reports,
                    predictions_csv: outcome.predictions_csv,
                },
                "evaluation",
            )
        }
    }
}

/// Write the report CSV and predictions CSV, print the summary table.
fn finish_outcome(out: &Path, outcome: ImputeOutcome, label: &str) -> Result<()> {
    let preds_path = out.with_extension("predictions.csv");
    std::fs::write(&preds_path, outcome.predictions_csv)
        .map_err(|e| Error::io(&preds_path, e))?;
    if outcome.rows.is_empty() {
        println!("{label}: predictions written to {} (no ground truth to score)", preds_path.display());
        return Ok(());
    }
    write_report_csv(out, &outcome.rows)?;
    print!("{}", crate::eval::format_table(&outcome.reports));
    println!("{label}: report {} / predictions {}", out.display(), preds_path.display());
    Ok(())
}

fn cmd_synth(cfg: &RunConfig, out: &Path) -> Result<()> {
    let (n, len, synth_cfg) = cfg
        .synth_config()
        .ok_or_else(|| Error::Config("synth needs a [synth] block in the config".into()))?;
    let samples = synth_generate(n, len, &synth_cfg, rng::substream_seed(cfg.seed, "synth-data", 0))?;
    data::write_csv(out, &samples)?;
    println!("wrote {n} samples × {len} steps to {}", out.display());
    Ok(())
}

// denormalize is used by impute_core through explicit stats math; keep the
// helper exported for library users who post-process predictions
pub use crate::data::denormalize as denormalize_predictions;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_are_stable() {
        assert_eq!(Method::Timeflow.name(), "timeflow");
        assert_eq!(Method::Repeat.name(), "repeat");
    }

    #[test]
    fn eval_windows_whole_series_default() {
        let cfg = RunConfig::default();
        assert_eq!(eval_windows(&cfg, 100), vec![(0, 100)]);
        let mut cfg = RunConfig::default();
        cfg.task.window_len = 40;
        cfg.task.window_count = 3;
        assert_eq!(eval_windows(&cfg, 100), vec![(0, 40), (40, 40)]);
    }
}
