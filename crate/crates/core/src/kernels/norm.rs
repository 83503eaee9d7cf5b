//! Per-channel batch normalization.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

pub const DEFAULT_EPSILON: f64 = 1e-5;
pub const DEFAULT_MOMENTUM: f64 = 0.99;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormMode {
    /// Normalize with batch statistics and update the moving averages.
    Train,
    /// Normalize with the moving averages.
    Inference,
}

/// Non-trainable running statistics of one batch-norm layer.
#[derive(Clone, Debug, PartialEq)]
pub struct MovingStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
    /// False until the first training-mode pass has seeded the statistics.
    pub populated: bool,
}

impl<T: Scalar> MovingStats<T> {
    pub fn new(channels: usize) -> Self {
        MovingStats {
            mean: vec![T::zero(); channels],
            var: vec![T::one(); channels],
            populated: false,
        }
    }
}

/// Values saved by the forward pass for the backward pass.
#[derive(Clone, Debug)]
pub struct NormCache<T> {
    pub mode: NormMode,
    pub normalized: Tensor<T>,
    pub inv_std: Vec<T>,
}

#[derive(Clone, Copy, Debug)]
pub struct NormConfig {
    pub momentum: f64,
    pub epsilon: f64,
}

impl Default for NormConfig {
    fn default() -> Self {
        NormConfig {
            momentum: DEFAULT_MOMENTUM,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

fn check_params<T: Scalar>(c: usize, gamma: Option<&Tensor<T>>, beta: Option<&Tensor<T>>, stats: &MovingStats<T>) -> Result<()> {
    for (name, len) in [
        ("gamma", gamma.map(|g| g.len())),
        ("beta", beta.map(|b| b.len())),
        ("moving mean", Some(stats.mean.len())),
        ("moving variance", Some(stats.var.len())),
    ] {
        if let Some(len) = len {
            if len != c {
                return Err(Error::shape("batchnorm", format!("{name} of {len}"), format!("{c} channels")));
            }
        }
    }
    Ok(())
}

/// Forward batch normalization. Missing `gamma` means a fixed scale of 1,
/// missing `beta` a fixed shift of 0.
pub fn batchnorm_forward<T: Scalar>(
    input: &Tensor<T>,
    gamma: Option<&Tensor<T>>,
    beta: Option<&Tensor<T>>,
    stats: &mut MovingStats<T>,
    mode: NormMode,
    config: NormConfig,
) -> Result<(Tensor<T>, NormCache<T>)> {
    let s = input.shape();
    check_params(s.c, gamma, beta, stats)?;
    if mode == NormMode::Inference && !stats.populated {
        return Err(Error::invalid(
            "batchnorm: inference mode requested before any training step populated the moving statistics",
        ));
    }
    let plane = s.plane();
    let count = s.n * plane;
    if count == 0 {
        return Err(Error::invalid("batchnorm: empty input"));
    }
    let eps = T::from_f64(config.epsilon);
    let momentum = T::from_f64(config.momentum);
    let x = input.data();
    let mut inv_std = vec![T::zero(); s.c];
    let mut mean = vec![T::zero(); s.c];
    match mode {
        NormMode::Train => {
            let m = T::from_f64(count as f64);
            for c in 0..s.c {
                let mut sum = T::zero();
                for n in 0..s.n {
                    let base = (n * s.c + c) * plane;
                    sum = x[base..base + plane].iter().fold(sum, |a, &v| a + v);
                }
                let mu = sum / m;
                let mut sq = T::zero();
                for n in 0..s.n {
                    let base = (n * s.c + c) * plane;
                    sq = x[base..base + plane].iter().fold(sq, |a, &v| a + (v - mu) * (v - mu));
                }
                let var = sq / m;
                mean[c] = mu;
                inv_std[c] = T::one() / (var + eps).sqrt();
                if stats.populated {
                    stats.mean[c] = momentum * stats.mean[c] + (T::one() - momentum) * mu;
                    stats.var[c] = momentum * stats.var[c] + (T::one() - momentum) * var;
                } else {
                    stats.mean[c] = mu;
                    stats.var[c] = var;
                }
            }
            stats.populated = true;
        }
        NormMode::Inference => {
            for c in 0..s.c {
                mean[c] = stats.mean[c];
                inv_std[c] = T::one() / (stats.var[c] + eps).sqrt();
            }
        }
    }
    let mut normalized = Tensor::zeros(s);
    let mut out = Tensor::zeros(s);
    {
        let xn = normalized.data_mut();
        let y = out.data_mut();
        for n in 0..s.n {
            for c in 0..s.c {
                let g = gamma.map_or(T::one(), |g| g.data()[c]);
                let b = beta.map_or(T::zero(), |b| b.data()[c]);
                let base = (n * s.c + c) * plane;
                for i in base..base + plane {
                    let v = (x[i] - mean[c]) * inv_std[c];
                    xn[i] = v;
                    y[i] = g * v + b;
                }
            }
        }
    }
    Ok((out, NormCache { mode, normalized, inv_std }))
}

/// Returns `(d_input, d_gamma, d_beta)`; the parameter gradients are per
/// channel and always computed.
pub fn batchnorm_backward<T: Scalar>(
    gamma: Option<&Tensor<T>>,
    cache: &NormCache<T>,
    grad_out: &Tensor<T>,
) -> (Tensor<T>, Vec<T>, Vec<T>) {
    let s = grad_out.shape();
    let plane = s.plane();
    let dy = grad_out.data();
    let xn = cache.normalized.data();
    let mut d_gamma = vec![T::zero(); s.c];
    let mut d_beta = vec![T::zero(); s.c];
    for n in 0..s.n {
        for c in 0..s.c {
            let base = (n * s.c + c) * plane;
            for i in base..base + plane {
                d_beta[c] = d_beta[c] + dy[i];
                d_gamma[c] = d_gamma[c] + dy[i] * xn[i];
            }
        }
    }
    let mut d_input = Tensor::zeros(s);
    let dx = d_input.data_mut();
    let m = T::from_f64((s.n * plane) as f64);
    for c in 0..s.c {
        let g = gamma.map_or(T::one(), |g| g.data()[c]);
        let scale = g * cache.inv_std[c];
        match cache.mode {
            NormMode::Inference => {
                for n in 0..s.n {
                    let base = (n * s.c + c) * plane;
                    for i in base..base + plane {
                        dx[i] = dy[i] * scale;
                    }
                }
            }
            NormMode::Train => {
                // dx = γ·inv_std/M · (M·dy − Σdy − x̂·Σ(dy·x̂))
                let (sum_dy, sum_dy_xn) = (d_beta[c], d_gamma[c]);
                for n in 0..s.n {
                    let base = (n * s.c + c) * plane;
                    for i in base..base + plane {
                        dx[i] = scale / m * (m * dy[i] - sum_dy - xn[i] * sum_dy_xn);
                    }
                }
            }
        }
    }
    (d_input, d_gamma, d_beta)
}
