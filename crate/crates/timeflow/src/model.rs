//! The Fourier-features network, the linear hypernetwork producing
//! per-layer shift modulations, and the modulated forward pass.
//!
//! The network maps a time coordinate t ∈ [0, 1] to one value. Hidden layer
//! l computes relu(x·W_l + b_l + s_l) where the shift s_l is the
//! hypernetwork output for that layer; the final affine layer carries no
//! shift and no activation. With a zero code every shift vanishes and the
//! network reduces to the plain MLP over the frequency embedding.
//!
//! Two execution paths exist on purpose: a tape path used wherever
//! gradients are needed, and a plain one ([`predict_dense`],
//! [`modulated_forward`]) for bulk queries of a frozen model. They compute
//! the same function.

use rand::Rng;

use crate::autodiff::{NodeId, Tape, Tensor};
use crate::error::{Error, Result};

/// Sinusoidal embedding of the time coordinate at dyadic frequencies
/// π·2^i, i = 0..N−1, as interleaved (sin, cos) pairs.
///
/// With large N the top frequencies oscillate far faster than any
/// realistic sampling grid and alias; `max_frequency_index` clamps the
/// dyadic exponent for configurations that want to avoid that.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierEmbedding {
    num_frequencies: usize,
    max_frequency_index: Option<u32>,
}

impl FourierEmbedding {
    pub fn new(num_frequencies: usize, max_frequency_index: Option<u32>) -> Result<Self> {
        if num_frequencies == 0 {
            return Err(Error::contract("embedding needs at least one frequency"));
        }
        Ok(FourierEmbedding { num_frequencies, max_frequency_index })
    }

    pub fn num_frequencies(&self) -> usize {
        self.num_frequencies
    }

    pub fn output_dim(&self) -> usize {
        2 * self.num_frequencies
    }

    fn frequency(&self, i: usize) -> f64 {
        let exp = match self.max_frequency_index {
            Some(cap) => (i as u32).min(cap),
            None => i as u32,
        };
        std::f64::consts::PI * (exp as f64).exp2()
    }

    /// γ(t); t outside [0, 1] is permitted and means extrapolation.
    pub fn embed(&self, t: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.output_dim());
        for i in 0..self.num_frequencies {
            let arg = self.frequency(i) * t;
            out.push(arg.sin());
            out.push(arg.cos());
        }
        out
    }

    /// Embedding of a whole grid as an [n, 2N] matrix.
    pub fn embed_grid(&self, coords: &[f64]) -> Tensor {
        let mut data = Vec::with_capacity(coords.len() * self.output_dim());
        for &t in coords {
            data.extend_from_slice(&self.embed(t));
        }
        Tensor::matrix(coords.len(), self.output_dim(), data).expect("consistent dims")
    }
}

/// Per-sample adaptation vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentCode {
    values: Vec<f64>,
}

impl LatentCode {
    pub fn zeros(dim: usize) -> Self {
        LatentCode { values: vec![0.0; dim] }
    }

    pub fn new(values: Vec<f64>) -> Self {
        LatentCode { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Weights and biases of the coordinate MLP. `weights[l]` is stored
/// [in, out] so the batched forward is a plain matmul; the last entry is
/// the unmodulated output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct InrParams {
    pub weights: Vec<Tensor>,
    pub biases: Vec<Tensor>,
}

impl InrParams {
    /// Number of hidden layers.
    pub fn depth(&self) -> usize {
        self.weights.len() - 1
    }
}

/// The linear hypernetwork: one [hidden, d_z] matrix per hidden layer,
/// mapping a code to that layer's shift. No bias term, so a zero code
/// yields zero shifts.
#[derive(Debug, Clone, PartialEq)]
pub struct HypernetParams {
    pub mats: Vec<Tensor>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub n_frequencies: usize,
    pub depth: usize,
    pub hidden_dim: usize,
    pub latent_dim: usize,
    pub max_frequency_index: Option<u32>,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_frequencies == 0 || self.depth == 0 || self.hidden_dim == 0 || self.latent_dim == 0
        {
            return Err(Error::Config(
                "n_frequencies, depth, hidden_dim and latent_dim must all be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Shared parameters: the INR and its hypernetwork, plus the architecture
/// they were built for.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub inr: InrParams,
    pub hyper: HypernetParams,
}

impl ModelParams {
    /// Fresh parameters: weights, biases and modulation matrices uniform
    /// in [−1/√fan_in, 1/√fan_in].
    ///
    /// The modulation matrices must not start at zero: the outer gradient
    /// w.r.t. them vanishes identically there (both the direct path
    /// W·z_K and the path through ∂L/∂z_K = Wᵀδ carry a factor of W or
    /// z_K, and z_K = 0 when W = 0), so W = 0 is a stationary point the
    /// optimizer would never leave. Small random values keep the early
    /// inner loops well-conditioned while breaking the degeneracy.
    pub fn init(config: ModelConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let embed_dim = 2 * config.n_frequencies;
        let mut dims = Vec::with_capacity(config.depth + 1);
        let mut fan_in = embed_dim;
        for _ in 0..config.depth {
            dims.push((fan_in, config.hidden_dim));
            fan_in = config.hidden_dim;
        }
        dims.push((fan_in, 1));

        let mut weights = Vec::with_capacity(dims.len());
        let mut biases = Vec::with_capacity(dims.len());
        for (fin, fout) in dims {
            let bound = 1.0 / (fin as f64).sqrt();
            let w: Vec<f64> = (0..fin * fout).map(|_| rng.gen_range(-bound..bound)).collect();
            let b: Vec<f64> = (0..fout).map(|_| rng.gen_range(-bound..bound)).collect();
            weights.push(Tensor::matrix(fin, fout, w)?);
            biases.push(Tensor::vector(b));
        }
        let mod_bound = 1.0 / (config.latent_dim as f64).sqrt();
        let mats = (0..config.depth)
            .map(|_| {
                let data: Vec<f64> = (0..config.hidden_dim * config.latent_dim)
                    .map(|_| rng.gen_range(-mod_bound..mod_bound))
                    .collect();
                Tensor::matrix(config.hidden_dim, config.latent_dim, data)
            })
            .collect::<Result<_>>()?;
        Ok(ModelParams {
            config,
            inr: InrParams { weights, biases },
            hyper: HypernetParams { mats },
        })
    }

    pub fn embedding(&self) -> FourierEmbedding {
        FourierEmbedding::new(self.config.n_frequencies, self.config.max_frequency_index)
            .expect("validated config")
    }

    /// Structural consistency between config and tensor shapes; used after
    /// deserialization.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let c = &self.config;
        if self.inr.weights.len() != c.depth + 1 || self.inr.biases.len() != c.depth + 1 {
            return Err(Error::contract(format!(
                "expected {} layers, found {} weights / {} biases",
                c.depth + 1,
                self.inr.weights.len(),
                self.inr.biases.len()
            )));
        }
        let mut fan_in = 2 * c.n_frequencies;
        for (l, (w, b)) in self.inr.weights.iter().zip(&self.inr.biases).enumerate() {
            let fan_out = if l == c.depth { 1 } else { c.hidden_dim };
            if w.shape() != [fan_in, fan_out] || b.shape() != [fan_out] {
                return Err(Error::contract(format!(
                    "layer {l} has shape {:?}/{:?}, expected [{fan_in}, {fan_out}]",
                    w.shape(),
                    b.shape()
                )));
            }
            fan_in = fan_out;
        }
        if self.hyper.mats.len() != c.depth {
            return Err(Error::contract(format!(
                "expected {} modulation matrices, found {}",
                c.depth,
                self.hyper.mats.len()
            )));
        }
        for (l, m) in self.hyper.mats.iter().enumerate() {
            if m.shape() != [c.hidden_dim, c.latent_dim] {
                return Err(Error::contract(format!(
                    "modulation matrix {l} has shape {:?}, expected [{}, {}]",
                    m.shape(),
                    c.hidden_dim,
                    c.latent_dim
                )));
            }
        }
        Ok(())
    }

    /// Flat parameter listing in a stable order: INR weights, INR biases,
    /// modulation matrices. The optimizer and the checkpoint writer both
    /// rely on this order.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (l, w) in self.inr.weights.iter().enumerate() {
            out.push((format!("inr.w{l}"), w));
        }
        for (l, b) in self.inr.biases.iter().enumerate() {
            out.push((format!("inr.b{l}"), b));
        }
        for (l, m) in self.hyper.mats.iter().enumerate() {
            out.push((format!("hyper.w{l}"), m));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.inr
            .weights
            .iter_mut()
            .chain(self.inr.biases.iter_mut())
            .chain(self.hyper.mats.iter_mut())
            .collect()
    }
}

// ── plain (gradient-free) execution ──────────────────────────────────

/// shift_l = W_l · z for every hidden layer.
pub fn hypernet_shifts(hyper: &HypernetParams, code: &LatentCode) -> Result<Vec<Vec<f64>>> {
    let mut shifts = Vec::with_capacity(hyper.mats.len());
    for m in &hyper.mats {
        if m.cols() != code.dim() {
            return Err(Error::contract(format!(
                "code dimension {} does not match hypernetwork columns {}",
                code.dim(),
                m.cols()
            )));
        }
        let (rows, cols) = (m.rows(), m.cols());
        let mut s = vec![0.0; rows];
        for (i, si) in s.iter_mut().enumerate() {
            *si = m.data()[i * cols..(i + 1) * cols]
                .iter()
                .zip(code.values())
                .map(|(a, b)| a * b)
                .sum();
        }
        shifts.push(s);
    }
    Ok(shifts)
}

/// Single-point modulated forward pass.
pub fn modulated_forward(
    t: f64,
    inr: &InrParams,
    embedding: &FourierEmbedding,
    shifts: &[Vec<f64>],
) -> Result<f64> {
    let depth = inr.depth();
    if shifts.len() != depth {
        return Err(Error::contract(format!(
            "got {} shifts for {} hidden layers",
            shifts.len(),
            depth
        )));
    }
    let mut phi = embedding.embed(t);
    for l in 0..depth {
        phi = affine(&inr.weights[l], &inr.biases[l], Some(&shifts[l]), &phi);
        for v in &mut phi {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    }
    let out = affine(&inr.weights[depth], &inr.biases[depth], None, &phi);
    Ok(out[0])
}

fn affine(w: &Tensor, b: &Tensor, shift: Option<&[f64]>, x: &[f64]) -> Vec<f64> {
    let (fin, fout) = (w.rows(), w.cols());
    debug_assert_eq!(fin, x.len());
    let mut out = b.data().to_vec();
    if let Some(s) = shift {
        for (o, sv) in out.iter_mut().zip(s) {
            *o += sv;
        }
    }
    for (i, &xi) in x.iter().enumerate() {
        let row = &w.data()[i * fout..(i + 1) * fout];
        for (o, wij) in out.iter_mut().zip(row) {
            *o += xi * wij;
        }
    }
    out
}

/// Query a frozen model at every coordinate: shifts are computed once per
/// code and reused across the grid.
pub fn predict_dense(params: &ModelParams, code: &LatentCode, coords: &[f64]) -> Result<Vec<f64>> {
    let embedding = params.embedding();
    let shifts = hypernet_shifts(&params.hyper, code)?;
    coords
        .iter()
        .map(|&t| modulated_forward(t, &params.inr, &embedding, &shifts))
        .collect()
}

// ── tape execution ───────────────────────────────────────────────────

/// Handles to the model parameters recorded as leaves on a tape.
#[derive(Debug, Clone)]
pub struct ParamNodes {
    pub weights: Vec<NodeId>,
    pub biases: Vec<NodeId>,
    pub mods: Vec<NodeId>,
}

impl ParamNodes {
    /// Record every parameter tensor on the tape. `trainable` controls
    /// whether gradients flow to the shared parameters (outer loop yes,
    /// frozen inference no).
    pub fn bind(tape: &mut Tape, params: &ModelParams, trainable: bool) -> Self {
        let weights = params.inr.weights.iter().map(|t| tape.leaf(t.clone(), trainable)).collect();
        let biases = params.inr.biases.iter().map(|t| tape.leaf(t.clone(), trainable)).collect();
        let mods = params.hyper.mats.iter().map(|t| tape.leaf(t.clone(), trainable)).collect();
        ParamNodes { weights, biases, mods }
    }

    /// All shared-parameter node ids in [`ModelParams::named_tensors`] order.
    pub fn all(&self) -> Vec<NodeId> {
        self.weights
            .iter()
            .chain(self.biases.iter())
            .chain(self.mods.iter())
            .copied()
            .collect()
    }
}

/// shift_l nodes for a code node.
pub fn shift_nodes(tape: &mut Tape, nodes: &ParamNodes, code: NodeId) -> Result<Vec<NodeId>> {
    nodes.mods.iter().map(|&m| tape.matvec(m, code)).collect()
}

/// Modulated forward over a pre-embedded grid; returns an [n] vector node.
pub fn forward_grid(
    tape: &mut Tape,
    nodes: &ParamNodes,
    shifts: &[NodeId],
    grid_embedding: &Tensor,
) -> Result<NodeId> {
    let depth = nodes.weights.len() - 1;
    if shifts.len() != depth {
        return Err(Error::contract(format!(
            "got {} shifts for {} hidden layers",
            shifts.len(),
            depth
        )));
    }
    let n = grid_embedding.rows();
    let mut phi = tape.constant(grid_embedding.clone());
    for l in 0..depth {
        let lin = tape.matmul(phi, nodes.weights[l])?;
        let biased = tape.add(lin, nodes.biases[l])?;
        let shifted = tape.add(biased, shifts[l])?;
        phi = tape.relu(shifted);
    }
    let out = tape.matmul(phi, nodes.weights[depth])?;
    let out = tape.add(out, nodes.biases[depth])?;
    tape.reshape(out, &[n])
}

/// Convenience wrapper: bind a code, derive shifts, run the grid forward.
pub fn batch_forward(
    tape: &mut Tape,
    nodes: &ParamNodes,
    code: NodeId,
    embedding: &FourierEmbedding,
    coords: &[f64],
) -> Result<NodeId> {
    if coords.is_empty() {
        return Err(Error::contract("batch forward over an empty grid"));
    }
    let shifts = shift_nodes(tape, nodes, code)?;
    let grid = embedding.embed_grid(coords);
    forward_grid(tape, nodes, &shifts, &grid)
}
