//! Checkpoint files: a human-readable text header followed by named
//! binary tensors, so training, inference and evaluation are separable
//! invocations.
//!
//! Layout (documented here and in the README, stable across platforms):
//!
//! ```text
//! timeflow-checkpoint v1\n
//! key=value lines: n_frequencies, max_frequency_index, depth,
//!                  hidden_dim, latent_dim, seed\n
//! norm <sample_id> <mean> <std>\n      (one per stored sample)
//! tensors <count>\n
//! ```
//!
//! then `<count>` records of
//!
//! ```text
//! u32 LE name length | name bytes (UTF-8)
//! u32 LE rank | rank × u64 LE dims
//! product(dims) × f64 LE values
//! ```
//!
//! Model tensors are named `inr.w<l>`, `inr.b<l>`, `hyper.w<l>`. Optimizer
//! state, when saved, adds `opt.m.<name>`, `opt.v.<name>` and
//! `opt.t.<name>`; loading a checkpoint without them simply yields no
//! optimizer state. Floats in the header use shortest-round-trip
//! formatting, so a reload is bit-exact.

use std::collections::BTreeMap;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::meta::{AdamOptimizer, AdamState};
use crate::model::{HypernetParams, InrParams, ModelConfig, ModelParams};

const MAGIC: &str = "timeflow-checkpoint";
const VERSION: &str = "v1";

/// Everything a separable run needs: parameters, per-sample normalization
/// stats, the inner-loop settings used in training (inference adaptation
/// reuses them by default), the training seed, and optionally the
/// optimizer state.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub params: ModelParams,
    /// (sample id, (mean, std)) — sorted by id for stable files.
    pub norm_stats: BTreeMap<String, (f64, f64)>,
    pub inner_alpha: f64,
    pub inner_steps: usize,
    pub seed: u64,
    pub optimizer: Option<AdamOptimizer>,
}

impl Checkpoint {
    pub fn new(params: ModelParams, seed: u64) -> Self {
        Checkpoint {
            params,
            norm_stats: BTreeMap::new(),
            inner_alpha: 1e-2,
            inner_steps: 3,
            seed,
            optimizer: None,
        }
    }
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e: std::io::Error, p: &Path| Error::io(p, e);

    let c = &checkpoint.params.config;
    let mut header = format!("{MAGIC} {VERSION}\n");
    header.push_str(&format!("n_frequencies={}\n", c.n_frequencies));
    if let Some(cap) = c.max_frequency_index {
        header.push_str(&format!("max_frequency_index={cap}\n"));
    }
    header.push_str(&format!("depth={}\n", c.depth));
    header.push_str(&format!("hidden_dim={}\n", c.hidden_dim));
    header.push_str(&format!("latent_dim={}\n", c.latent_dim));
    header.push_str(&format!("inner_alpha={:?}\n", checkpoint.inner_alpha));
    header.push_str(&format!("inner_steps={}\n", checkpoint.inner_steps));
    header.push_str(&format!("seed={}\n", checkpoint.seed));
    for (id, (mean, std)) in &checkpoint.norm_stats {
        if id.contains(char::is_whitespace) {
            return Err(Error::Checkpoint {
                path: path.to_path_buf(),
                detail: format!("sample id {id:?} contains whitespace"),
            });
        }
        header.push_str(&format!("norm {id} {mean:?} {std:?}\n"));
    }

    let mut tensors: Vec<(String, &Tensor)> = checkpoint.params.named_tensors();
    let opt_step_tensors: Vec<(String, Tensor)>;
    if let Some(opt) = &checkpoint.optimizer {
        let names: Vec<String> =
            checkpoint.params.named_tensors().iter().map(|(n, _)| n.clone()).collect();
        if names.len() != opt.states.len() {
            return Err(Error::Checkpoint {
                path: path.to_path_buf(),
                detail: "optimizer state count does not match parameter count".into(),
            });
        }
        opt_step_tensors = names
            .iter()
            .zip(&opt.states)
            .map(|(n, s)| (format!("opt.t.{n}"), Tensor::scalar(s.step_count as f64)))
            .collect();
        for ((name, state), step) in names.iter().zip(&opt.states).zip(&opt_step_tensors) {
            tensors.push((format!("opt.m.{name}"), &state.first_moment));
            tensors.push((format!("opt.v.{name}"), &state.second_moment));
            tensors.push((step.0.clone(), &step.1));
        }
    }

    header.push_str(&format!("tensors {}\n", tensors.len()));
    w.write_all(header.as_bytes()).map_err(|e| io_err(e, path))?;

    for (name, tensor) in tensors {
        let bytes = name.as_bytes();
        w.write_all(&(bytes.len() as u32).to_le_bytes()).map_err(|e| io_err(e, path))?;
        w.write_all(bytes).map_err(|e| io_err(e, path))?;
        w.write_all(&(tensor.shape().len() as u32).to_le_bytes())
            .map_err(|e| io_err(e, path))?;
        for d in tensor.shape() {
            w.write_all(&(*d as u64).to_le_bytes()).map_err(|e| io_err(e, path))?;
        }
        for v in tensor.data() {
            w.write_all(&v.to_le_bytes()).map_err(|e| io_err(e, path))?;
        }
    }
    w.flush().map_err(|e| io_err(e, path))?;
    Ok(())
}

struct HeaderInfo {
    config_fields: BTreeMap<String, String>,
    norm_stats: BTreeMap<String, (f64, f64)>,
    tensor_count: usize,
}

fn checkpoint_err(path: &Path, detail: impl Into<String>) -> Error {
    Error::Checkpoint { path: path.to_path_buf(), detail: detail.into() }
}

fn read_header(reader: &mut impl Read, path: &Path) -> Result<HeaderInfo> {
    // read byte-wise up to the end of the "tensors N" line so the binary
    // section stays untouched
    let mut lines: Vec<String> = Vec::new();
    let mut current = Vec::new();
    loop {
        let mut byte = [0u8; 1];
        let n = reader.read(&mut byte).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            return Err(checkpoint_err(path, "truncated header: missing tensors line"));
        }
        if byte[0] == b'\n' {
            let line = String::from_utf8(std::mem::take(&mut current))
                .map_err(|_| checkpoint_err(path, "header is not UTF-8"))?;
            let done = line.starts_with("tensors ");
            lines.push(line);
            if done {
                break;
            }
        } else {
            current.push(byte[0]);
        }
    }

    let first = &lines[0];
    match first.strip_prefix(&format!("{MAGIC} ")) {
        Some(v) if v == VERSION => {}
        Some(v) => {
            return Err(Error::UnsupportedVersion { found: v.to_string(), expected: VERSION.into() })
        }
        None => return Err(checkpoint_err(path, format!("bad magic line {first:?}"))),
    }

    let mut config_fields = BTreeMap::new();
    let mut norm_stats = BTreeMap::new();
    let mut tensor_count = None;
    for line in &lines[1..] {
        if let Some(rest) = line.strip_prefix("norm ") {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(checkpoint_err(path, format!("malformed norm line {line:?}")));
            }
            let mean: f64 = parts[1]
                .parse()
                .map_err(|_| checkpoint_err(path, format!("bad mean in {line:?}")))?;
            let std: f64 = parts[2]
                .parse()
                .map_err(|_| checkpoint_err(path, format!("bad std in {line:?}")))?;
            norm_stats.insert(parts[0].to_string(), (mean, std));
        } else if let Some(rest) = line.strip_prefix("tensors ") {
            tensor_count = Some(
                rest.trim()
                    .parse::<usize>()
                    .map_err(|_| checkpoint_err(path, format!("bad tensor count {rest:?}")))?,
            );
        } else if let Some((k, v)) = line.split_once('=') {
            config_fields.insert(k.to_string(), v.to_string());
        } else if !line.trim().is_empty() {
            return Err(checkpoint_err(path, format!("unrecognized header line {line:?}")));
        }
    }
    Ok(HeaderInfo {
        config_fields,
        norm_stats,
        tensor_count: tensor_count.ok_or_else(|| checkpoint_err(path, "missing tensors line"))?,
    })
}

fn read_exact_or(
    reader: &mut impl Read,
    buf: &mut [u8],
    path: &Path,
    what: &str,
) -> Result<()> {
    reader
        .read_exact(buf)
        .map_err(|_| checkpoint_err(path, format!("truncated file while reading {what}")))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let header = read_header(&mut r, path)?;

    let field = |name: &str| -> Result<usize> {
        header
            .config_fields
            .get(name)
            .ok_or_else(|| checkpoint_err(path, format!("missing header field {name}")))?
            .parse::<usize>()
            .map_err(|_| checkpoint_err(path, format!("bad header field {name}")))
    };
    let config = ModelConfig {
        n_frequencies: field("n_frequencies")?,
        depth: field("depth")?,
        hidden_dim: field("hidden_dim")?,
        latent_dim: field("latent_dim")?,
        max_frequency_index: match header.config_fields.get("max_frequency_index") {
            Some(v) => Some(v.parse::<u32>().map_err(|_| {
                checkpoint_err(path, "bad header field max_frequency_index")
            })?),
            None => None,
        },
    };
    let seed = header
        .config_fields
        .get("seed")
        .ok_or_else(|| checkpoint_err(path, "missing header field seed"))?
        .parse::<u64>()
        .map_err(|_| checkpoint_err(path, "bad header field seed"))?;
    let inner_alpha = header
        .config_fields
        .get("inner_alpha")
        .ok_or_else(|| checkpoint_err(path, "missing header field inner_alpha"))?
        .parse::<f64>()
        .map_err(|_| checkpoint_err(path, "bad header field inner_alpha"))?;
    let inner_steps = field("inner_steps")?;

    let mut tensors: BTreeMap<String, Tensor> = BTreeMap::new();
    for i in 0..header.tensor_count {
        let what = format!("tensor {i} of {}", header.tensor_count);
        let mut u32buf = [0u8; 4];
        read_exact_or(&mut r, &mut u32buf, path, &format!("{what}: name length"))?;
        let name_len = u32::from_le_bytes(u32buf) as usize;
        if name_len > 4096 {
            return Err(checkpoint_err(path, format!("{what}: implausible name length")));
        }
        let mut name_buf = vec![0u8; name_len];
        read_exact_or(&mut r, &mut name_buf, path, &format!("{what}: name"))?;
        let name = String::from_utf8(name_buf)
            .map_err(|_| checkpoint_err(path, format!("{what}: name is not UTF-8")))?;
        read_exact_or(&mut r, &mut u32buf, path, &format!("tensor {name}: rank"))?;
        let rank = u32::from_le_bytes(u32buf) as usize;
        if rank > 8 {
            return Err(checkpoint_err(path, format!("tensor {name}: implausible rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for d in 0..rank {
            let mut u64buf = [0u8; 8];
            read_exact_or(&mut r, &mut u64buf, path, &format!("tensor {name}: dim {d}"))?;
            shape.push(u64::from_le_bytes(u64buf) as usize);
        }
        let count: usize = shape.iter().product();
        let mut data = Vec::with_capacity(count);
        let mut f64buf = [0u8; 8];
        for v in 0..count {
            read_exact_or(&mut r, &mut f64buf, path, &format!("tensor {name}: value {v}"))?;
            data.push(f64::from_le_bytes(f64buf));
        }
        let tensor = Tensor::new(shape, data)
            .map_err(|e| checkpoint_err(path, format!("tensor {name}: {e}")))?;
        tensors.insert(name, tensor);
    }

    let have_opt = tensors.keys().any(|k| k.starts_with("opt."));
    let mut take = |name: &str| -> Result<Tensor> {
        tensors
            .remove(name)
            .ok_or_else(|| checkpoint_err(path, format!("missing tensor {name}")))
    };
    let mut weights = Vec::with_capacity(config.depth + 1);
    let mut biases = Vec::with_capacity(config.depth + 1);
    for l in 0..=config.depth {
        weights.push(take(&format!("inr.w{l}"))?);
        biases.push(take(&format!("inr.b{l}"))?);
    }
    let mut mats = Vec::with_capacity(config.depth);
    for l in 0..config.depth {
        mats.push(take(&format!("hyper.w{l}"))?);
    }
    let params = ModelParams {
        config,
        inr: InrParams { weights, biases },
        hyper: HypernetParams { mats },
    };
    params
        .validate()
        .map_err(|e| checkpoint_err(path, format!("header/tensor mismatch: {e}")))?;

    // optimizer state is optional; all-or-nothing when present
    let names: Vec<String> = params.named_tensors().iter().map(|(n, _)| n.clone()).collect();
    let optimizer = if have_opt {
        let mut states = Vec::with_capacity(names.len());
        for name in &names {
            let m = take(&format!("opt.m.{name}"))?;
            let v = take(&format!("opt.v.{name}"))?;
            let t = take(&format!("opt.t.{name}"))?;
            let mut state = AdamState::new(m.shape());
            if m.shape() != v.shape() {
                return Err(checkpoint_err(path, format!("optimizer moments for {name} disagree")));
            }
            state.first_moment = m;
            state.second_moment = v;
            state.step_count = t.item() as u64;
            states.push(state);
        }
        Some(AdamOptimizer { states })
    } else {
        None
    };

    Ok(Checkpoint {
        params,
        norm_stats: header.norm_stats,
        inner_alpha,
        inner_steps,
        seed,
        optimizer,
    })
}

/// The path next to a checkpoint where training writes its loss history.
pub fn loss_history_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("loss.csv")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LatentCode;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_checkpoint() -> Checkpoint {
        let cfg = ModelConfig {
            n_frequencies: 3,
            depth: 2,
            hidden_dim: 6,
            latent_dim: 4,
            max_frequency_index: Some(10),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = ModelParams::init(cfg, &mut rng).unwrap();
        let mut ckpt = Checkpoint::new(params, 1234);
        ckpt.inner_alpha = 0.015;
        ckpt.inner_steps = 4;
        ckpt.norm_stats.insert("s000".into(), (1.5, 0.25));
        ckpt.norm_stats.insert("s001".into(), (-0.75, 2.0));
        ckpt
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let ckpt = sample_checkpoint();
        save_checkpoint(&ckpt, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.params, ckpt.params); // bit-exact tensors
        assert_eq!(loaded.norm_stats, ckpt.norm_stats);
        assert_eq!(loaded.seed, 1234);
        assert_eq!(loaded.inner_alpha, 0.015);
        assert_eq!(loaded.inner_steps, 4);
        assert!(loaded.optimizer.is_none());
    }

    #[test]
    fn round_trip_preserves_forward_output() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let mut ckpt = sample_checkpoint();
        for m in &mut ckpt.params.hyper.mats {
            for v in m.data_mut() {
                *v = 0.1;
            }
        }
        // golden output generated at save time
        let code = LatentCode::new(vec![0.3, -0.2, 0.9, 0.0]);
        let coords: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
        let golden = crate::model::predict_dense(&ckpt.params, &code, &coords).unwrap();

        save_checkpoint(&ckpt, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        let replay = crate::model::predict_dense(&loaded.params, &code, &coords).unwrap();
        for (a, b) in golden.iter().zip(&replay) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn optimizer_state_round_trips_when_present() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let mut ckpt = sample_checkpoint();
        let mut opt = AdamOptimizer::for_model(&ckpt.params);
        for s in &mut opt.states {
            s.step_count = 17;
            for v in s.first_moment.data_mut() {
                *v = 0.5;
            }
        }
        ckpt.optimizer = Some(opt);
        save_checkpoint(&ckpt, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        let lopt = loaded.optimizer.unwrap();
        assert_eq!(lopt.states[0].step_count, 17);
        assert!(lopt.states[0].first_moment.data().iter().all(|v| *v == 0.5));
    }

    #[test]
    fn truncated_file_names_missing_entry() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&sample_checkpoint(), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let cut = dir.path().join("cut.ckpt");
        std::fs::write(&cut, &bytes[..bytes.len() - 16]).unwrap();
        match load_checkpoint(&cut) {
            Err(Error::Checkpoint { detail, .. }) => {
                assert!(detail.contains("truncated"), "detail: {detail}");
            }
            other => panic!("expected checkpoint error, got {other:?}"),
        }
    }

    #[test]
    fn version_mismatch_is_explicit() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&sample_checkpoint(), &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        // rewrite "v1" to "v9" in the magic line
        let pos = bytes.windows(2).position(|w| w == b"v1").unwrap();
        bytes[pos + 1] = b'9';
        let bad = dir.path().join("bad.ckpt");
        std::fs::write(&bad, &bytes).unwrap();
        match load_checkpoint(&bad) {
            Err(Error::UnsupportedVersion { found, expected }) => {
                assert_eq!(found, "v9");
                assert_eq!(expected, "v1");
            }
            other => panic!("expected version error, got {other:?}"),
        }
    }

    #[test]
    fn header_tensor_shape_mismatch_is_validation_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let mut ckpt = sample_checkpoint();
        // corrupt: claim hidden_dim 7 in the header while tensors say 6
        ckpt.params.config.hidden_dim = 7;
        save_checkpoint(&ckpt, &path).unwrap();
        match load_checkpoint(&path) {
            Err(Error::Checkpoint { detail, .. }) => {
                assert!(detail.contains("mismatch"), "detail: {detail}");
            }
            other => panic!("expected checkpoint error, got {other:?}"),
        }
    }
}
