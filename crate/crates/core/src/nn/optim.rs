use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Gradients, Network, NnError, Result};

/// Mean squared error.
pub fn mse_loss(pred: &Array1<f64>, target: &Array1<f64>) -> Result<f64> {
    check_lengths(pred, target)?;
    let n = pred.len() as f64;
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n)
}

/// Gradient of [`mse_loss`] with respect to `pred`: `2 (pred - target) / n`.
pub fn mse_grad(pred: &Array1<f64>, target: &Array1<f64>) -> Result<Array1<f64>> {
    check_lengths(pred, target)?;
    let n = pred.len() as f64;
    Ok((pred - target) * (2.0 / n))
}

fn check_lengths(pred: &Array1<f64>, target: &Array1<f64>) -> Result<()> {
    if pred.len() != target.len() {
        return Err(NnError::LengthMismatch {
            left: pred.len(),
            right: target.len(),
        });
    }
    if pred.is_empty() {
        return Err(NnError::EmptyInput);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update of `params` in place; `t` counts from 1.
pub fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    t: u64,
    cfg: &AdamConfig,
) -> Result<()> {
    let n = params.len();
    for len in [grads.len(), m.len(), v.len()] {
        if len != n {
            return Err(NnError::LengthMismatch { left: n, right: len });
        }
    }
    if t == 0 {
        return Err(NnError::Config("adam step counter starts at 1".into()));
    }
    let c1 = 1.0 - cfg.beta1.powi(t as i32);
    let c2 = 1.0 - cfg.beta2.powi(t as i32);
    for i in 0..n {
        let g = grads[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
    Ok(())
}

struct Moments {
    m_w: Array2<f64>,
    v_w: Array2<f64>,
    m_b: Array1<f64>,
    v_b: Array1<f64>,
}

/// Adam optimizer state for one network.
pub struct Adam {
    cfg: AdamConfig,
    t: u64,
    moments: Vec<Moments>,
}

impl Adam {
    pub fn new(net: &Network, cfg: AdamConfig) -> Self {
        let moments = net
            .layers()
            .map(|l| Moments {
                m_w: Array2::zeros(l.weights.raw_dim()),
                v_w: Array2::zeros(l.weights.raw_dim()),
                m_b: Array1::zeros(l.biases.len()),
                v_b: Array1::zeros(l.biases.len()),
            })
            .collect();
        Self { cfg, t: 0, moments }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<()> {
        if grads.layers.len() != self.moments.len() {
            return Err(NnError::LengthMismatch {
                left: grads.layers.len(),
                right: self.moments.len(),
            });
        }
        self.t += 1;
        for ((layer, g), mo) in net.layers_mut().zip(&grads.layers).zip(&mut self.moments) {
            if g.weights.dim() != layer.weights.dim() || g.biases.len() != layer.biases.len() {
                return Err(NnError::LengthMismatch {
                    left: g.weights.len() + g.biases.len(),
                    right: layer.param_count(),
                });
            }
            let gw = g.weights.as_standard_layout();
            adam_update(
                layer.weights.as_slice_mut().expect("standard layout"),
                gw.as_slice().expect("standard layout"),
                mo.m_w.as_slice_mut().expect("standard layout"),
                mo.v_w.as_slice_mut().expect("standard layout"),
                self.t,
                &self.cfg,
            )?;
            adam_update(
                layer.biases.as_slice_mut().expect("standard layout"),
                g.biases.as_slice().expect("standard layout"),
                mo.m_b.as_slice_mut().expect("standard layout"),
                mo.v_b.as_slice_mut().expect("standard layout"),
                self.t,
                &self.cfg,
            )?;
        }
        Ok(())
    }
}
