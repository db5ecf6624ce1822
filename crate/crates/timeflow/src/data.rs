//! Dataset ingestion, per-sample z-normalization, window splitting, and a
//! synthetic multi-frequency generator for desk-scale experiments.
//!
//! CSV layout: UTF-8, header row with sample ids, first column a time
//! stamp (integer or ISO-8601-style datetime, converted to consecutive
//! integer indices by row order), one column per sample, empty cell =
//! missing. That matches the public Electricity/Traffic/Solar exports;
//! column roles are configurable for mirrors that differ.

use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

/// One sample: the observed subset of a dense integer grid. `timestamps`
/// holds the observed indices (strictly increasing); `values` aligns with
/// them. Missing cells are simply absent — never zero-filled.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesSample {
    pub id: String,
    pub timestamps: Vec<usize>,
    pub values: Vec<f64>,
    /// Length of the dense grid the timestamps index into.
    pub series_len: usize,
    /// (mean, std) of the z-normalization applied to `values`, if any.
    pub norm_stats: Option<(f64, f64)>,
}

impl TimeSeriesSample {
    pub fn new(id: impl Into<String>, timestamps: Vec<usize>, values: Vec<f64>, series_len: usize) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::contract(format!(
                "{} timestamps vs {} values",
                timestamps.len(),
                values.len()
            )));
        }
        if !timestamps.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::contract("timestamps must be strictly increasing"));
        }
        if let Some(&last) = timestamps.last() {
            if last >= series_len {
                return Err(Error::contract(format!(
                    "timestamp {last} outside dense grid of length {series_len}"
                )));
            }
        }
        Ok(TimeSeriesSample { id: id.into(), timestamps, values, series_len, norm_stats: None })
    }

    /// Fully observed sample over 0..len.
    pub fn dense(id: impl Into<String>, values: Vec<f64>) -> Self {
        let n = values.len();
        TimeSeriesSample {
            id: id.into(),
            timestamps: (0..n).collect(),
            values,
            series_len: n,
            norm_stats: None,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_dense(&self) -> bool {
        self.len() == self.series_len
    }

    /// Observed value at a dense-grid index.
    pub fn value_at(&self, index: usize) -> Option<f64> {
        self.timestamps.binary_search(&index).ok().map(|i| self.values[i])
    }

    /// Restrict to dense-grid indices [start, start + len), rebasing
    /// timestamps to the window.
    pub fn window(&self, start: usize, len: usize) -> Result<TimeSeriesSample> {
        if start + len > self.series_len {
            return Err(Error::contract(format!(
                "window [{start}, {}) exceeds series length {}",
                start + len,
                self.series_len
            )));
        }
        let mut timestamps = Vec::new();
        let mut values = Vec::new();
        for (t, v) in self.timestamps.iter().zip(&self.values) {
            if *t >= start && *t < start + len {
                timestamps.push(*t - start);
                values.push(*v);
            }
        }
        Ok(TimeSeriesSample {
            id: self.id.clone(),
            timestamps,
            values,
            series_len: len,
            norm_stats: self.norm_stats,
        })
    }
}

/// z-normalize one sample over its observed values with the population
/// standard deviation. Errors on constant series so the caller can decide
/// to skip (recording stats (mean, 1)) rather than divide by zero.
pub fn z_normalize(sample: &TimeSeriesSample) -> Result<TimeSeriesSample> {
    if sample.len() < 2 {
        return Err(Error::contract("z-normalization needs at least 2 observations"));
    }
    let n = sample.values.len() as f64;
    let mean = sample.values.iter().sum::<f64>() / n;
    let var = sample.values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std == 0.0 {
        return Err(Error::contract(format!("sample {} is constant", sample.id)));
    }
    let mut out = sample.clone();
    for v in &mut out.values {
        *v = (*v - mean) / std;
    }
    out.norm_stats = Some((mean, std));
    Ok(out)
}

/// Normalize every sample; constant series are passed through with stats
/// (mean, 1) instead of failing the whole dataset.
pub fn normalize_dataset(samples: &[TimeSeriesSample]) -> Vec<TimeSeriesSample> {
    samples
        .iter()
        .map(|s| {
            z_normalize(s).unwrap_or_else(|_| {
                let mean = if s.values.is_empty() {
                    0.0
                } else {
                    s.values.iter().sum::<f64>() / s.values.len() as f64
                };
                let mut out = s.clone();
                for v in &mut out.values {
                    *v -= mean;
                }
                out.norm_stats = Some((mean, 1.0));
                out
            })
        })
        .collect()
}

/// Invert a sample's normalization on arbitrary values.
pub fn denormalize(values: &[f64], stats: (f64, f64)) -> Vec<f64> {
    values.iter().map(|v| v * stats.1 + stats.0).collect()
}

/// Evaluation split: one training window plus subsequent test windows over
/// the same dense grid, and a partition of sample ids for the
/// known/new-sample comparisons.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train_range: (usize, usize),
    pub test_ranges: Vec<(usize, usize)>,
    pub samples_train: Vec<String>,
    pub samples_new: Vec<String>,
}

/// Tile `count` consecutive non-overlapping windows of `window_len` from
/// the start of the series. The first window is the training range.
pub fn split_windows(series_len: usize, window_len: usize, count: usize) -> Result<DatasetSplit> {
    if count == 0 || window_len == 0 {
        return Err(Error::contract("window count and length must be positive"));
    }
    if count * window_len > series_len {
        return Err(Error::contract(format!(
            "{count} windows of {window_len} exceed series length {series_len}"
        )));
    }
    let windows: Vec<(usize, usize)> = (0..count).map(|i| (i * window_len, window_len)).collect();
    Ok(DatasetSplit {
        train_range: windows[0],
        test_ranges: windows[1..].to_vec(),
        samples_train: Vec::new(),
        samples_new: Vec::new(),
    })
}

/// Synthetic dataset: a shared frequency set with per-sample amplitudes,
/// phases and trend, plus Gaussian noise. Mimics a fleet of sensors
/// observing one seasonal phenomenon with individual variation.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Cycles of each shared component over the full window.
    pub frequencies: Vec<f64>,
    pub amp_range: (f64, f64),
    /// Phase offsets in radians.
    pub phase_range: (f64, f64),
    /// Linear trend slope over t ∈ [0, 1].
    pub trend_range: (f64, f64),
    pub noise_std: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            frequencies: vec![3.0, 7.0, 13.0],
            amp_range: (0.5, 1.5),
            phase_range: (0.0, std::f64::consts::TAU),
            trend_range: (0.0, 0.0),
            noise_std: 0.0,
        }
    }
}

/// Standard normal via Box–Muller; keeps the dependency surface to plain
/// uniforms so draws are reproducible byte-for-byte.
fn gaussian(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

pub fn synth_generate(
    n_samples: usize,
    length: usize,
    cfg: &SynthConfig,
    seed: u64,
) -> Result<Vec<TimeSeriesSample>> {
    if n_samples == 0 || length < 2 {
        return Err(Error::contract("need n_samples ≥ 1 and length ≥ 2"));
    }
    let mut samples = Vec::with_capacity(n_samples);
    for s in 0..n_samples {
        let mut r = rng::substream(seed, "synth", s as u64);
        let comps: Vec<(f64, f64, f64)> = cfg
            .frequencies
            .iter()
            .map(|&f| {
                let a = sample_range(&mut r, cfg.amp_range);
                let p = sample_range(&mut r, cfg.phase_range);
                (a, f, p)
            })
            .collect();
        let trend = sample_range(&mut r, cfg.trend_range);
        let mut values = Vec::with_capacity(length);
        for i in 0..length {
            let t = i as f64 / (length - 1) as f64;
            let mut v = trend * t;
            for (a, f, p) in &comps {
                v += a * (std::f64::consts::TAU * f * t + p).sin();
            }
            if cfg.noise_std > 0.0 {
                v += cfg.noise_std * gaussian(&mut r);
            }
            values.push(v);
        }
        samples.push(TimeSeriesSample::dense(format!("s{s:03}"), values));
    }
    Ok(samples)
}

fn sample_range(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

/// Keep every `stride`-th dense index (e.g. an hourly view of a 10-minute
/// series uses stride 6), rebasing timestamps to the coarse grid.
pub fn downsample_stride(sample: &TimeSeriesSample, stride: usize) -> Result<TimeSeriesSample> {
    if stride == 0 {
        return Err(Error::contract("downsample stride must be at least 1"));
    }
    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    for (t, v) in sample.timestamps.iter().zip(&sample.values) {
        if t % stride == 0 {
            timestamps.push(t / stride);
            values.push(*v);
        }
    }
    Ok(TimeSeriesSample {
        id: sample.id.clone(),
        timestamps,
        values,
        series_len: sample.series_len.div_ceil(stride),
        norm_stats: sample.norm_stats,
    })
}

/// Which columns play which role in an input CSV.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvLayout {
    /// Header name of the time column; default: the first column.
    pub time_column: Option<String>,
    /// Sample columns to load; default: every non-time column.
    pub sample_columns: Option<Vec<String>>,
}

/// Load one sample per selected column. Cells must be numeric or empty;
/// empty means unobserved. Timestamps are converted to consecutive
/// indices in row order after validating their format.
pub fn load_csv(path: &Path, layout: &CsvLayout) -> Result<Vec<TimeSeriesSample>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::io(path, std::io::Error::other(e.to_string())),
            _ => Error::Parse { line: 1, detail: e.to_string() },
        })?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse { line: 1, detail: e.to_string() })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() {
        return Err(Error::Parse { line: 1, detail: "empty header row".into() });
    }

    let time_idx = match &layout.time_column {
        Some(name) => headers.iter().position(|h| h == name).ok_or_else(|| Error::Config(
            format!("time column {name:?} not found in header"),
        ))?,
        None => 0,
    };
    let sample_idx: Vec<usize> = match &layout.sample_columns {
        Some(names) => names
            .iter()
            .map(|n| {
                headers
                    .iter()
                    .position(|h| h == n)
                    .ok_or_else(|| Error::Config(format!("sample column {n:?} not found")))
            })
            .collect::<Result<_>>()?,
        None => (0..headers.len()).filter(|i| *i != time_idx).collect(),
    };
    if sample_idx.is_empty() {
        return Err(Error::Config("no sample columns to load".into()));
    }

    let mut columns: Vec<(Vec<usize>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); sample_idx.len()];
    let mut row_count = 0usize;
    for (row, record) in reader.records().enumerate() {
        let line = row + 2; // header is line 1
        let record = record.map_err(|e| Error::Parse {
            line: match &e.position() {
                Some(p) => p.line() as usize,
                None => line,
            },
            detail: e.to_string(),
        })?;
        let stamp = record.get(time_idx).unwrap_or("").trim();
        validate_timestamp(stamp, line)?;
        for (col, &idx) in sample_idx.iter().enumerate() {
            let cell = record.get(idx).unwrap_or("").trim();
            if cell.is_empty() {
                continue; // missing: masked out, never fabricated
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line,
                detail: format!("non-numeric cell {cell:?} in column {:?}", headers[idx]),
            })?;
            columns[col].0.push(row);
            columns[col].1.push(v);
        }
        row_count += 1;
    }
    if row_count == 0 {
        return Err(Error::Parse { line: 2, detail: "no data rows".into() });
    }

    sample_idx
        .iter()
        .zip(columns)
        .map(|(&idx, (timestamps, values))| {
            TimeSeriesSample::new(headers[idx].clone(), timestamps, values, row_count)
        })
        .collect()
}

/// Accept integer stamps or common ISO-8601-style datetimes. Indices are
/// assigned by row order either way.
fn validate_timestamp(stamp: &str, line: usize) -> Result<()> {
    if stamp.is_empty() {
        return Err(Error::Parse { line, detail: "empty timestamp".into() });
    }
    if stamp.parse::<i64>().is_ok() {
        return Ok(());
    }
    let ok = chrono::DateTime::parse_from_rfc3339(stamp).is_ok()
        || chrono::NaiveDateTime::parse_from_str(stamp, "%Y-%m-%d %H:%M:%S").is_ok()
        || chrono::NaiveDateTime::parse_from_str(stamp, "%Y-%m-%dT%H:%M:%S").is_ok()
        || chrono::NaiveDate::parse_from_str(stamp, "%Y-%m-%d").is_ok();
    if ok {
        Ok(())
    } else {
        Err(Error::Parse {
            line,
            detail: format!("timestamp {stamp:?} is neither an integer nor ISO-8601"),
        })
    }
}

/// Write samples in the ingestion layout (shared dense grid assumed).
pub fn write_csv(path: &Path, samples: &[TimeSeriesSample]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    let len = samples.iter().map(|s| s.series_len).max().unwrap_or(0);
    let mut header = vec!["t".to_string()];
    header.extend(samples.iter().map(|s| s.id.clone()));
    w.write_record(&header).map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    for i in 0..len {
        let mut row = vec![i.to_string()];
        for s in samples {
            row.push(match s.value_at(i) {
                Some(v) => format!("{v}"),
                None => String::new(),
            });
        }
        w.write_record(&row).map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn z_normalize_analytic_values() {
        let s = TimeSeriesSample::dense("a", vec![1.0, 2.0, 3.0]);
        let n = z_normalize(&s).unwrap();
        let (mean, std) = n.norm_stats.unwrap();
        assert!((mean - 2.0).abs() < 1e-15);
        assert!((std - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let want = (1.5f64).sqrt(); // |(1−2)|/√(2/3) = √(3/2) = 1.2247...
        assert!((n.values[0] + want).abs() < 1e-12);
        assert!(n.values[1].abs() < 1e-15);
        assert!((n.values[2] - want).abs() < 1e-12);
        assert!((n.values[2] - 1.2247).abs() < 1e-4);
    }

    #[test]
    fn z_normalize_round_trip() {
        let s = TimeSeriesSample::dense("a", vec![3.1, -2.4, 7.7, 0.0, 1.1]);
        let n = z_normalize(&s).unwrap();
        let back = denormalize(&n.values, n.norm_stats.unwrap());
        for (a, b) in back.iter().zip(&s.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn z_normalize_identity_on_standardized_input() {
        // mean 0, population std 1 already
        let s = TimeSeriesSample::dense("a", vec![-1.0, 0.0, 1.0, 0.0]);
        let var: f64 = s.values.iter().map(|v| v * v).sum::<f64>() / 4.0;
        let scale = var.sqrt();
        let standardized: Vec<f64> = s.values.iter().map(|v| v / scale).collect();
        let s2 = TimeSeriesSample::dense("a", standardized.clone());
        let n = z_normalize(&s2).unwrap();
        for (a, b) in n.values.iter().zip(&standardized) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn z_normalize_constant_series_errors() {
        let s = TimeSeriesSample::dense("c", vec![5.0; 4]);
        assert!(z_normalize(&s).is_err());
        // dataset-level fallback records std 1
        let out = normalize_dataset(&[s]);
        assert_eq!(out[0].norm_stats, Some((5.0, 1.0)));
        assert!(out[0].values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn split_windows_tile_without_gaps() {
        let split = split_windows(10_000, 2000, 5).unwrap();
        assert_eq!(split.train_range, (0, 2000));
        assert_eq!(split.test_ranges.len(), 4);
        let mut expected_start = 2000;
        for (start, len) in &split.test_ranges {
            assert_eq!(*start, expected_start);
            assert_eq!(*len, 2000);
            expected_start += len;
        }
        // single prefix window
        let one = split_windows(100, 30, 1).unwrap();
        assert_eq!(one.train_range, (0, 30));
        assert!(one.test_ranges.is_empty());
        // insufficient length
        assert!(split_windows(100, 30, 4).is_err());
    }

    #[test]
    fn synth_is_deterministic_and_bounded() {
        let cfg = SynthConfig {
            frequencies: vec![2.0],
            amp_range: (1.0, 1.0),
            phase_range: (0.0, std::f64::consts::TAU),
            trend_range: (0.3, 0.3),
            noise_std: 0.0,
        };
        let a = synth_generate(2, 64, &cfg, 9).unwrap();
        let b = synth_generate(2, 64, &cfg, 9).unwrap();
        assert_eq!(a, b);
        for s in &a {
            for v in &s.values {
                assert!(v.abs() <= 1.0 + 0.3 + 1e-12);
            }
        }
        let c = synth_generate(2, 64, &cfg, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn synth_samples_share_frequency_peaks() {
        let cfg = SynthConfig {
            frequencies: vec![4.0, 11.0],
            amp_range: (0.8, 1.2),
            phase_range: (0.0, std::f64::consts::TAU),
            trend_range: (0.0, 0.0),
            noise_std: 0.01,
        };
        let n = 256;
        let samples = synth_generate(2, n, &cfg, 3).unwrap();
        // discrete Fourier magnitude oracle at integer cycle counts
        let dft_mag = |x: &[f64], k: usize| -> f64 {
            let mut re = 0.0;
            let mut im = 0.0;
            for (i, v) in x.iter().enumerate() {
                let ang = std::f64::consts::TAU * k as f64 * i as f64 / x.len() as f64;
                re += v * ang.cos();
                im -= v * ang.sin();
            }
            (re * re + im * im).sqrt()
        };
        for s in &samples {
            let peak4 = dft_mag(&s.values, 4);
            let peak11 = dft_mag(&s.values, 11);
            let off = dft_mag(&s.values, 7).max(dft_mag(&s.values, 20));
            assert!(peak4 > 4.0 * off, "shared 4-cycle peak missing");
            assert!(peak11 > 4.0 * off, "shared 11-cycle peak missing");
        }
    }

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn csv_two_columns_three_rows() {
        let f = write_tmp("t,a\n0,1.5\n1,2.5\n2,3.5\n");
        let samples = load_csv(f.path(), &CsvLayout::default()).unwrap();
        assert_eq!(samples.len(), 1);
        assert_eq!(samples[0].id, "a");
        assert_eq!(samples[0].len(), 3);
        assert_eq!(samples[0].series_len, 3);
        assert_eq!(samples[0].values, vec![1.5, 2.5, 3.5]);
    }

    #[test]
    fn csv_empty_cells_are_masked_not_zero() {
        let f = write_tmp("t,a,b\n0,1.0,\n1,,2.0\n2,3.0,4.0\n");
        let samples = load_csv(f.path(), &CsvLayout::default()).unwrap();
        let a = &samples[0];
        let b = &samples[1];
        assert_eq!(a.timestamps, vec![0, 2]);
        assert_eq!(a.values, vec![1.0, 3.0]);
        assert_eq!(b.timestamps, vec![1, 2]);
        // unmasked count equals numeric cell count
        assert_eq!(a.len() + b.len(), 4);
        assert_eq!(a.series_len, 3);
    }

    #[test]
    fn csv_iso_timestamps_accepted() {
        let f = write_tmp("time,x\n2012-01-01 00:00:00,1\n2012-01-01 01:00:00,2\n");
        let samples = load_csv(f.path(), &CsvLayout::default()).unwrap();
        assert_eq!(samples[0].timestamps, vec![0, 1]);
    }

    #[test]
    fn csv_bad_timestamp_and_cell_report_line() {
        let f = write_tmp("t,a\n0,1.0\nnot-a-time,2.0\n");
        match load_csv(f.path(), &CsvLayout::default()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        let g = write_tmp("t,a\n0,1.0\n1,abc\n");
        match load_csv(g.path(), &CsvLayout::default()) {
            Err(Error::Parse { line, detail }) => {
                assert_eq!(line, 3);
                assert!(detail.contains("abc"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn csv_ragged_row_reports_line() {
        let f = write_tmp("t,a,b\n0,1.0,2.0\n1,3.0\n");
        match load_csv(f.path(), &CsvLayout::default()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn csv_electricity_scale_layout() {
        // 321 sample columns, as in the public Electricity export
        let mut header = vec!["t".to_string()];
        header.extend((0..321).map(|i| format!("MT_{i:03}")));
        let mut content = header.join(",") + "\n";
        for row in 0..3 {
            let mut cells = vec![row.to_string()];
            cells.extend((0..321).map(|c| format!("{}", (row * 321 + c) as f64 * 0.5)));
            content.push_str(&(cells.join(",") + "\n"));
        }
        let f = write_tmp(&content);
        let samples = load_csv(f.path(), &CsvLayout::default()).unwrap();
        assert_eq!(samples.len(), 321);
        assert!(samples.iter().all(|s| s.len() == 3));
    }

    #[test]
    fn csv_write_read_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let cfg = SynthConfig::default();
        let samples = synth_generate(3, 17, &cfg, 5).unwrap();
        write_csv(&path, &samples).unwrap();
        let back = load_csv(&path, &CsvLayout::default()).unwrap();
        assert_eq!(back.len(), 3);
        for (a, b) in samples.iter().zip(&back) {
            assert_eq!(a.id, b.id);
            // shortest round-trip float formatting reloads bit-identically
            assert_eq!(a.values, b.values);
        }
    }

    #[test]
    fn window_rebases_timestamps() {
        let s = TimeSeriesSample::new("a", vec![1, 3, 5, 8], vec![1.0, 3.0, 5.0, 8.0], 10).unwrap();
        let w = s.window(2, 5).unwrap();
        assert_eq!(w.timestamps, vec![1, 3]);
        assert_eq!(w.values, vec![3.0, 5.0]);
        assert_eq!(w.series_len, 5);
        assert!(s.window(8, 5).is_err());
    }

    #[test]
    fn solarh_style_downsampling_via_stride() {
        // hourly view of a 10-minute series: stride-6 selection
        let s = TimeSeriesSample::dense("sol", (0..60).map(|i| i as f64).collect());
        let hourly = downsample_stride(&s, 6).unwrap();
        assert_eq!(hourly.len(), 10);
        assert_eq!(hourly.values[1], 6.0);
        assert_eq!(hourly.timestamps, (0..10).collect::<Vec<_>>());
        assert_eq!(hourly.series_len, 10);
    }
}
