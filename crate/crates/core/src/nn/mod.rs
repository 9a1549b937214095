//! A small dense-network engine in double precision.
//!
//! A [`Network`] is a set of branches, each a dense [`Stack`] over a slice of
//! the input columns, whose outputs are concatenated and fed to a head stack.
//! A plain feed-forward net is the special case of one branch with no layers.

mod network;
mod optim;
mod persist;
mod train;

pub use network::{Branch, Cache, Dense, DenseGrad, Gradients, Network, Stack};
pub use optim::{adam_update, mse_grad, mse_loss, Adam, AdamConfig};
pub use persist::{NetworkDoc, FORMAT_VERSION};
pub use train::{train, Dataset, History, TrainConfig};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch at layer {layer}: expected {expected} {what}, got {got}")]
    Shape {
        layer: usize,
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("stale cache: produced at parameter generation {cache}, network is at {network}")]
    StaleCache { cache: u64, network: u64 },
    #[error("unknown activation `{0}`")]
    UnknownActivation(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("training diverged: non-finite loss in epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid model document: {0}")]
    Format(String),
    #[error("model json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, NnError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Elu,
    Tanh,
    Swish,
    Linear,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    pub const ALL: [Activation; 5] = [
        Activation::Relu,
        Activation::Elu,
        Activation::Tanh,
        Activation::Swish,
        Activation::Linear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Elu => "elu",
            Activation::Tanh => "tanh",
            Activation::Swish => "swish",
            Activation::Linear => "linear",
        }
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Elu => {
                if x > 0.0 {
                    x
                } else {
                    x.exp_m1()
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Swish => x * sigmoid(x),
            Activation::Linear => x,
        }
    }

    /// Exact derivative at `x`. ReLU takes derivative 0 at the kink.
    pub fn grad(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Elu => {
                if x > 0.0 {
                    1.0
                } else {
                    x.exp()
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Swish => {
                let s = sigmoid(x);
                s + x * s * (1.0 - s)
            }
            Activation::Linear => 1.0,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = NnError;

    fn from_str(s: &str) -> Result<Self> {
        Activation::ALL
            .iter()
            .copied()
            .find(|a| a.name() == s.to_ascii_lowercase())
            .ok_or_else(|| NnError::UnknownActivation(s.to_string()))
    }
}

/// Width and activation of one dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LayerSpec {
    pub units: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub const fn new(units: usize, activation: Activation) -> Self {
        Self { units, activation }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_points() {
        assert_eq!(Activation::Swish.apply(0.0), 0.0);
        assert_eq!(Activation::Tanh.apply(0.0), 0.0);
        assert_eq!(Activation::Elu.apply(0.0), 0.0);
        assert_eq!(Activation::Relu.apply(-3.0), 0.0);
        assert_eq!(Activation::Linear.apply(-3.5), -3.5);
    }

    #[test]
    fn swish_at_ten() {
        // 10 / (1 + e^-10) evaluated in extended precision
        assert!((Activation::Swish.apply(10.0) - 9.999546021312976).abs() < 1e-14);
        assert!((Activation::Swish.apply(10.0) - 9.99955).abs() < 1e-5);
    }

    #[test]
    fn swish_is_stable_far_out() {
        assert_eq!(Activation::Swish.apply(-800.0), -0.0);
        assert_eq!(Activation::Swish.apply(800.0), 800.0);
        assert!(Activation::Swish.grad(-800.0).abs() < 1e-300);
    }

    #[test]
    fn grads_match_central_differences() {
        let h = 1e-6;
        for a in Activation::ALL {
            for &x in &[-2.0, -0.5, 0.1, 3.0] {
                let fd = (a.apply(x + h) - a.apply(x - h)) / (2.0 * h);
                let g = a.grad(x);
                let rel = (fd - g).abs() / g.abs().max(1e-12);
                assert!(rel < 1e-6 || (fd - g).abs() < 1e-9, "{a} at {x}: {g} vs {fd}");
            }
        }
    }

    #[test]
    fn parses_names() {
        assert_eq!("swish".parse::<Activation>().unwrap(), Activation::Swish);
        assert_eq!("ReLU".parse::<Activation>().unwrap(), Activation::Relu);
        assert!(matches!("gelu".parse::<Activation>(), Err(NnError::UnknownActivation(_))));
        let j = serde_json::to_string(&LayerSpec::new(32, Activation::Elu)).unwrap();
        assert_eq!(j, r#"{"units":32,"activation":"elu"}"#);
    }
}
