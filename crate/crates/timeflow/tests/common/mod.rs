//! Shared oracles for the integration suites.
//!
//! Everything here is written against plain slices, independent of the
//! tape: the pure forward pass, a hand-derived backprop for the code
//! gradient, the composed inner/outer objective built from those, and a
//! central finite-difference runner. Gradient tests compare the tape
//! against these.

#![allow(dead_code)]

use timeflow::model::{FourierEmbedding, ModelParams};

/// Central finite differences of `f` at `x`.
pub fn finite_diff(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut g = Vec::with_capacity(x.len());
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        xp[i] = x[i] + h;
        let fp = f(&xp);
        xp[i] = x[i] - h;
        let fm = f(&xp);
        xp[i] = x[i];
        g.push((fp - fm) / (2.0 * h));
    }
    g
}

/// Relative error with a small absolute floor so near-zero gradients
/// compare sanely.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Forward pass over one grid recording pre-activations, written directly
/// from the layer equations (no tape).
struct ForwardTrace {
    /// pre[l][point][unit]
    pre: Vec<Vec<Vec<f64>>>,
    act: Vec<Vec<Vec<f64>>>,
    out: Vec<f64>,
}

fn pure_forward(params: &ModelParams, code: &[f64], coords: &[f64]) -> ForwardTrace {
    let depth = params.config.depth;
    let embedding =
        FourierEmbedding::new(params.config.n_frequencies, params.config.max_frequency_index)
            .unwrap();
    // shifts s_l = M_l z
    let shifts: Vec<Vec<f64>> = params
        .hyper
        .mats
        .iter()
        .map(|m| {
            (0..m.rows())
                .map(|r| {
                    (0..m.cols()).map(|c| m.data()[r * m.cols() + c] * code[c]).sum::<f64>()
                })
                .collect()
        })
        .collect();

    let mut pre = vec![Vec::with_capacity(coords.len()); depth];
    let mut act = vec![Vec::with_capacity(coords.len()); depth];
    let mut out = Vec::with_capacity(coords.len());
    for &t in coords {
        let mut x = embedding.embed(t);
        for l in 0..depth {
            let w = &params.inr.weights[l];
            let (fin, fout) = (w.rows(), w.cols());
            let mut p = params.inr.biases[l].data().to_vec();
            for (pj, s) in p.iter_mut().zip(&shifts[l]) {
                *pj += s;
            }
            for (i, xi) in x.iter().enumerate() {
                debug_assert!(i < fin);
                for (pj, wij) in p.iter_mut().zip(&w.data()[i * fout..(i + 1) * fout]) {
                    *pj += xi * wij;
                }
            }
            let a: Vec<f64> = p.iter().map(|v| v.max(0.0)).collect();
            pre[l].push(p);
            act[l].push(a.clone());
            x = a;
        }
        let wout = params.inr.weights.last().unwrap();
        let mut y = params.inr.biases.last().unwrap().data()[0];
        for (i, xi) in x.iter().enumerate() {
            y += xi * wout.data()[i];
        }
        out.push(y);
    }
    ForwardTrace { pre, act, out }
}

/// Mean squared error of the pure forward pass.
pub fn pure_mse(params: &ModelParams, code: &[f64], coords: &[f64], targets: &[f64]) -> f64 {
    let trace = pure_forward(params, code, coords);
    trace
        .out
        .iter()
        .zip(targets)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / coords.len() as f64
}

/// Hand-derived gradient of the MSE w.r.t. the code:
/// δ_out → δ through the output layer → masked by relu steps → the shift
/// path contributes M_lᵀ δ_l per layer.
pub fn pure_code_grad(
    params: &ModelParams,
    code: &[f64],
    coords: &[f64],
    targets: &[f64],
) -> Vec<f64> {
    let depth = params.config.depth;
    let trace = pure_forward(params, code, coords);
    let n = coords.len() as f64;
    let mut grad = vec![0.0; code.len()];
    for (p, (y, target)) in trace.out.iter().zip(targets).enumerate() {
        let delta_out = 2.0 * (y - target) / n;
        // through the output layer
        let wout = params.inr.weights.last().unwrap();
        let mut delta: Vec<f64> = (0..wout.rows()).map(|i| wout.data()[i] * delta_out).collect();
        for l in (0..depth).rev() {
            // relu mask
            let masked: Vec<f64> = delta
                .iter()
                .zip(&trace.pre[l][p])
                .map(|(d, pre)| if *pre > 0.0 { *d } else { 0.0 })
                .collect();
            // shift path: grad_z += M_lᵀ δ
            let m = &params.hyper.mats[l];
            for r in 0..m.rows() {
                for c in 0..m.cols() {
                    grad[c] += m.data()[r * m.cols() + c] * masked[r];
                }
            }
            if l > 0 {
                let w = &params.inr.weights[l];
                let (fin, fout) = (w.rows(), w.cols());
                let mut prev = vec![0.0; fin];
                for (i, pv) in prev.iter_mut().enumerate() {
                    for j in 0..fout {
                        *pv += w.data()[i * fout + j] * masked[j];
                    }
                }
                delta = prev;
            }
        }
    }
    grad
}

/// The composed adapt-then-evaluate objective, entirely tape-free:
/// K plain gradient steps on the observed grid from a zero code, then
/// L(observed) + λ·L(horizon) at the adapted code.
pub fn pure_adapted_objective(
    params: &ModelParams,
    coords_in: &[f64],
    values_in: &[f64],
    coords_out: &[f64],
    values_out: &[f64],
    lambda: u8,
    alpha: f64,
    steps: usize,
) -> f64 {
    let mut code = vec![0.0; params.config.latent_dim];
    for _ in 0..steps {
        let g = pure_code_grad(params, &code, coords_in, values_in);
        for (z, gi) in code.iter_mut().zip(&g) {
            *z -= alpha * gi;
        }
    }
    let mut loss = pure_mse(params, &code, coords_in, values_in);
    if lambda == 1 {
        loss += pure_mse(params, &code, coords_out, values_out);
    }
    loss
}

/// Smallest |pre-activation| seen across the composed objective's forward
/// passes; finite-difference comparisons reject fixtures that graze a
/// relu kink.
pub fn pure_min_kink_margin(
    params: &ModelParams,
    coords_in: &[f64],
    coords_out: &[f64],
    alpha: f64,
    steps: usize,
    values_in: &[f64],
) -> f64 {
    let mut code = vec![0.0; params.config.latent_dim];
    let mut margin = f64::INFINITY;
    let mut scan = |params: &ModelParams, code: &[f64], coords: &[f64]| -> f64 {
        let trace = pure_forward(params, code, coords);
        trace
            .pre
            .iter()
            .flatten()
            .flatten()
            .fold(f64::INFINITY, |m, v| m.min(v.abs()))
    };
    for _ in 0..steps {
        margin = margin.min(scan(params, &code, coords_in));
        let g = pure_code_grad(params, &code, coords_in, values_in);
        for (z, gi) in code.iter_mut().zip(&g) {
            *z -= alpha * gi;
        }
    }
    margin = margin.min(scan(params, &code, coords_in));
    if !coords_out.is_empty() {
        margin = margin.min(scan(params, &code, coords_out));
    }
    margin
}
