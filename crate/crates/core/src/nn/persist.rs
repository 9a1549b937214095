use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Activation, Branch, Dense, Network, NnError, Result, Stack};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerDoc {
    pub units: usize,
    pub activation: Activation,
    pub fan_in: usize,
    /// Row-major `fan_in × units`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchDoc {
    pub name: String,
    /// Column names of this branch's slice, for readability and checking.
    pub input_columns: Vec<String>,
    pub input_index: Vec<usize>,
    pub layers: Vec<LayerDoc>,
}

/// Serialized topology and parameters of a [`Network`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDoc {
    pub format_version: u32,
    pub input_columns: Vec<String>,
    pub branches: Vec<BranchDoc>,
    pub head: Vec<LayerDoc>,
}

fn layer_doc(l: &Dense) -> LayerDoc {
    LayerDoc {
        units: l.units(),
        activation: l.activation,
        fan_in: l.fan_in(),
        weights: l.weights.iter().copied().collect(),
        biases: l.biases.to_vec(),
    }
}

fn layer_from_doc(d: &LayerDoc) -> Result<Dense> {
    let weights = Array2::from_shape_vec((d.fan_in, d.units), d.weights.clone()).map_err(|_| {
        NnError::Format(format!(
            "weights hold {} values, expected {}×{}",
            d.weights.len(),
            d.fan_in,
            d.units
        ))
    })?;
    if d.weights.iter().chain(&d.biases).any(|v| !v.is_finite()) {
        return Err(NnError::Format("non-finite parameter".into()));
    }
    Ok(Dense {
        weights,
        biases: Array1::from(d.biases.clone()),
        activation: d.activation,
    })
}

impl Network {
    pub fn to_doc(&self) -> NetworkDoc {
        NetworkDoc {
            format_version: FORMAT_VERSION,
            input_columns: self.input_columns().to_vec(),
            branches: self
                .branches()
                .iter()
                .map(|b| BranchDoc {
                    name: b.name.clone(),
                    input_columns: b
                        .input_index
                        .iter()
                        .map(|&i| self.input_columns()[i].clone())
                        .collect(),
                    input_index: b.input_index.clone(),
                    layers: b.stack.layers.iter().map(layer_doc).collect(),
                })
                .collect(),
            head: self.head().layers.iter().map(layer_doc).collect(),
        }
    }

    pub fn from_doc(doc: &NetworkDoc) -> Result<Self> {
        if doc.format_version != FORMAT_VERSION {
            return Err(NnError::Format(format!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                doc.format_version
            )));
        }
        let mut branches = Vec::with_capacity(doc.branches.len());
        for b in &doc.branches {
            let names: Option<Vec<&String>> =
                b.input_index.iter().map(|&i| doc.input_columns.get(i)).collect();
            match names {
                Some(names) if names.iter().copied().eq(b.input_columns.iter()) => {}
                _ => {
                    return Err(NnError::Format(format!(
                        "branch {} input_columns disagree with input_index",
                        b.name
                    )))
                }
            }
            branches.push(Branch {
                name: b.name.clone(),
                input_index: b.input_index.clone(),
                stack: Stack {
                    layers: b.layers.iter().map(layer_from_doc).collect::<Result<_>>()?,
                },
            });
        }
        let head = Stack {
            layers: doc.head.iter().map(layer_from_doc).collect::<Result<_>>()?,
        };
        Network::from_parts(doc.input_columns.clone(), branches, head)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_doc())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_doc(&serde_json::from_str(s)?)
    }
}
