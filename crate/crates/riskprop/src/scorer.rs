//! Differentiable per-snippet risk scorers with hand-derived gradients.
//!
//! Two architectures are supported: a linear readout over the flattened
//! snippet and a one-hidden-layer tanh MLP. Both expose an analytic
//! forward/backward pair; there is no general autodiff here.

use std::fs;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::Snippet;
use crate::error::{Error, Result};

/// Scorer architecture. `Mlp(h)` is one tanh hidden layer of width `h`
/// followed by a linear readout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    Linear,
    Mlp(usize),
}

/// Activation record produced by `forward` and consumed by `backward`.
#[derive(Debug, Clone)]
pub struct Tape {
    input: Vec<f64>,
    hidden: Vec<f64>,
}

/// Parameters and gradient accumulators of a scorer.
///
/// Parameter layout (flat):
/// - Linear: `[w_0..w_{n-1}, b]`
/// - Mlp(h): `[W1 (h x n, row-major), b1 (h), w2 (h), b2]`
#[derive(Debug, Clone, PartialEq)]
pub struct ScorerState {
    pub kind: ScorerKind,
    pub params: Vec<f64>,
    pub grads: Vec<f64>,
    input_dim: usize,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    kind: String,
    hidden: usize,
    params: Vec<f64>,
}

fn param_count(kind: ScorerKind, input_dim: usize) -> usize {
    match kind {
        ScorerKind::Linear => input_dim + 1,
        ScorerKind::Mlp(h) => h * input_dim + 2 * h + 1,
    }
}

impl ScorerState {
    /// Fresh scorer with parameters drawn uniformly from [-0.1, 0.1], so the
    /// initial risk scores sit near 0.5.
    pub fn init(kind: ScorerKind, input_dim: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::Config("scorer input_dim must be >= 1".into()));
        }
        if let ScorerKind::Mlp(0) = kind {
            return Err(Error::Config("mlp hidden width must be >= 1".into()));
        }
        let n = param_count(kind, input_dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = (0..n).map(|_| rng.random_range(-0.1..=0.1)).collect();
        Ok(ScorerState { kind, params, grads: vec![0.0; n], input_dim })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Compute the raw risk logit for one snippet, returning the activation
    /// tape needed by `backward`.
    pub fn forward(&self, snippet: &Snippet) -> Result<(f64, Tape)> {
        if snippet.flat_len() != self.input_dim {
            return Err(Error::Config(format!(
                "snippet of {} values fed to scorer expecting {}",
                snippet.flat_len(),
                self.input_dim
            )));
        }
        let input = snippet.flatten();
        self.forward_flat(input)
    }

    fn forward_flat(&self, input: Vec<f64>) -> Result<(f64, Tape)> {
        let n = self.input_dim;
        match self.kind {
            ScorerKind::Linear => {
                let mut logit = self.params[n]; // bias
                for j in 0..n {
                    logit += self.params[j] * input[j];
                }
                Ok((logit, Tape { input, hidden: Vec::new() }))
            }
            ScorerKind::Mlp(h) => {
                let (w1, b1, w2, b2) = self.mlp_offsets(h, n);
                let mut hidden = Vec::with_capacity(h);
                for i in 0..h {
                    let mut pre = self.params[b1 + i];
                    let row = w1 + i * n;
                    for j in 0..n {
                        pre += self.params[row + j] * input[j];
                    }
                    hidden.push(pre.tanh());
                }
                let mut logit = self.params[b2];
                for i in 0..h {
                    logit += self.params[w2 + i] * hidden[i];
                }
                Ok((logit, Tape { input, hidden }))
            }
        }
    }

    fn mlp_offsets(&self, h: usize, n: usize) -> (usize, usize, usize, usize) {
        (0, h * n, h * n + h, h * n + 2 * h)
    }

    /// Accumulate `d logit / d theta * grad_logit` into `grads`. Additive, so
    /// a batch of frames can share one gradient buffer.
    pub fn backward(&mut self, tape: &Tape, grad_logit: f64) -> Result<()> {
        let n = self.input_dim;
        if tape.input.len() != n {
            return Err(Error::TapeMismatch(format!(
                "tape input length {} vs scorer input {}",
                tape.input.len(),
                n
            )));
        }
        match self.kind {
            ScorerKind::Linear => {
                for j in 0..n {
                    self.grads[j] += tape.input[j] * grad_logit;
                }
                self.grads[n] += grad_logit;
            }
            ScorerKind::Mlp(h) => {
                if tape.hidden.len() != h {
                    return Err(Error::TapeMismatch(format!(
                        "tape hidden length {} vs width {}",
                        tape.hidden.len(),
                        h
                    )));
                }
                let (w1, b1, w2, b2) = self.mlp_offsets(h, n);
                self.grads[b2] += grad_logit;
                for i in 0..h {
                    let hid = tape.hidden[i];
                    self.grads[w2 + i] += grad_logit * hid;
                    // d logit / d pre_i through tanh
                    let gh = grad_logit * self.params[w2 + i] * (1.0 - hid * hid);
                    self.grads[b1 + i] += gh;
                    let row = w1 + i * n;
                    for j in 0..n {
                        self.grads[row + j] += gh * tape.input[j];
                    }
                }
            }
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = 0.0);
    }

    /// Plain SGD update. Gradients are left untouched; the caller decides
    /// when to zero them.
    pub fn sgd_step(&mut self, lr: f64) {
        for (p, g) in self.params.iter_mut().zip(&self.grads) {
            *p -= lr * g;
        }
    }

    pub fn to_json(&self) -> String {
        let (kind, hidden) = match self.kind {
            ScorerKind::Linear => ("linear", 0),
            ScorerKind::Mlp(h) => ("mlp", h),
        };
        serde_json::to_string(&CheckpointFile {
            kind: kind.into(),
            hidden,
            params: self.params.clone(),
        })
        .expect("checkpoint serialization cannot fail")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let file: CheckpointFile =
            serde_json::from_str(json).map_err(|e| Error::Config(format!("checkpoint: {e}")))?;
        let (kind, input_dim) = match file.kind.as_str() {
            "linear" => {
                if file.params.len() < 2 {
                    return Err(Error::Config("linear checkpoint too small".into()));
                }
                (ScorerKind::Linear, file.params.len() - 1)
            }
            "mlp" => {
                let h = file.hidden;
                if h == 0 || file.params.len() <= 2 * h + 1 {
                    return Err(Error::Config("mlp checkpoint shape invalid".into()));
                }
                let rest = file.params.len() - 2 * h - 1;
                if rest % h != 0 {
                    return Err(Error::Config("mlp checkpoint shape invalid".into()));
                }
                (ScorerKind::Mlp(h), rest / h)
            }
            other => return Err(Error::Config(format!("unknown scorer kind {other:?}"))),
        };
        let n = file.params.len();
        Ok(ScorerState { kind, params: file.params, grads: vec![0.0; n], input_dim })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let json = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&json)
    }
}
