//! Shared oracles for the integration tests. Nothing here calls into the
//! library's forward pass or dynamics; the point is to check those against
//! code written separately.

#![allow(dead_code)]

use std::path::PathBuf;

use bandit_dqn::harness::{load_config, ExperimentConfig};
use bandit_dqn::nnet::{Activation, DenseLayer};

pub fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Loads a shipped config, replacing its seeds.
pub fn shipped_config(name: &str, seeds: &[u64]) -> ExperimentConfig {
    let mut config = load_config(&configs_dir().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    config.seeds = seeds.to_vec();
    config
}

/// Plain dense forward pass over the public weights (row-major, out x in).
pub fn mlp_eval(layers: &[DenseLayer], input: &[f64]) -> Vec<f64> {
    let mut x = input.to_vec();
    for layer in layers {
        let (n_in, n_out) = (layer.in_dim(), layer.out_dim());
        assert_eq!(x.len(), n_in);
        let w = layer.weights();
        let b = layer.biases();
        let mut y = vec![0.0; n_out];
        for o in 0..n_out {
            let mut z = b[o];
            for i in 0..n_in {
                z += w[o * n_in + i] * x[i];
            }
            y[o] = match layer.activation() {
                Activation::Relu => z.max(0.0),
                Activation::Identity => z,
            };
        }
        x = y;
    }
    x
}

/// Smallest |pre-activation| over the relu units of `layers` for `input`.
pub fn min_relu_margin(layers: &[DenseLayer], input: &[f64]) -> f64 {
    let mut x = input.to_vec();
    let mut margin = f64::INFINITY;
    for layer in layers {
        let (n_in, n_out) = (layer.in_dim(), layer.out_dim());
        let w = layer.weights();
        let mut y = vec![0.0; n_out];
        for o in 0..n_out {
            let mut z = layer.biases()[o];
            for i in 0..n_in {
                z += w[o * n_in + i] * x[i];
            }
            y[o] = match layer.activation() {
                Activation::Relu => {
                    margin = margin.min(z.abs());
                    z.max(0.0)
                }
                Activation::Identity => z,
            };
        }
        x = y;
    }
    margin
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

/// `||a - b|| / max(||a||, ||b||)`, 0 when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// Central differences of `f` over every weight and bias of `layers`, in the
/// same order as `GradientBundle::flatten` (per layer: weights, then biases).
pub fn numeric_gradient(
    layers: &mut Vec<DenseLayer>,
    step: f64,
    mut f: impl FnMut(&[DenseLayer]) -> f64,
) -> Vec<f64> {
    let mut out = Vec::new();
    for l in 0..layers.len() {
        for which in 0..2 {
            let n = if which == 0 { layers[l].weights().len() } else { layers[l].biases().len() };
            for i in 0..n {
                let nudge = |layers: &mut Vec<DenseLayer>, delta: f64| {
                    let p = if which == 0 { &mut layers[l].weights_mut()[i] } else { &mut layers[l].biases_mut()[i] };
                    *p += delta;
                };
                nudge(layers, step);
                let plus = f(layers);
                nudge(layers, -2.0 * step);
                let minus = f(layers);
                nudge(layers, step);
                out.push((plus - minus) / (2.0 * step));
            }
        }
    }
    out
}

/// Chain dynamics written out by hand: cells 0..=5, LEFT = 0 clamps at 0,
/// RIGHT = 1, entering cell 5 pays +1 and ends the episode.
pub fn chain_hold(cell: usize, action: usize, d: usize, gamma: f64) -> (f64, usize, usize, bool) {
    let mut c = cell;
    let mut weight = 1.0;
    let mut ret = 0.0;
    for f in 1..=d {
        c = if action == 0 { c.saturating_sub(1) } else { c + 1 };
        if c == 5 {
            ret += weight;
            return (ret, c, f, true);
        }
        weight *= gamma;
    }
    (ret, c, d, false)
}

/// Exact Q of the chain SMDP where each decision holds the chosen action for
/// `d ~ duration_probs[cell]` frames, by value iteration to a fixed point.
pub fn chain_smdp_q(duration_probs: &[Vec<f64>], gamma: f64) -> Vec<[f64; 2]> {
    assert!(gamma < 1.0);
    let mut q = vec![[0.0f64; 2]; 5];
    loop {
        let v = |c: usize, q: &[[f64; 2]]| if c == 5 { 0.0 } else { q[c][0].max(q[c][1]) };
        let mut next = vec![[0.0f64; 2]; 5];
        for c in 0..5 {
            for a in 0..2 {
                next[c][a] = duration_probs[c]
                    .iter()
                    .enumerate()
                    .map(|(i, p)| {
                        let (r, c2, frames, terminal) = chain_hold(c, a, i + 1, gamma);
                        let boot = if terminal { 0.0 } else { gamma.powi(frames as i32) * v(c2, &q) };
                        p * (r + boot)
                    })
                    .sum();
            }
        }
        let delta = next
            .iter()
            .zip(&q)
            .flat_map(|(x, y)| [(x[0] - y[0]).abs(), (x[1] - y[1]).abs()])
            .fold(0.0, f64::max);
        q = next;
        if delta < 1e-14 {
            return q;
        }
    }
}

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}
