//! Builders for the six-branch modular network and the benchmark
//! feed-forward network, plus the persisted model file.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{mnn_input_columns, Feature, FeatureError, FeatureRow, Module, ScalerParams, FNN_COLUMNS};
use crate::features::Split;
use crate::nn::{train, Activation, Dataset, History, LayerSpec, Network, NetworkDoc, NnError, TrainConfig};

use Activation::{Elu, Relu, Swish, Tanh};

#[derive(Debug, Error)]
pub enum ZooError {
    #[error("invalid model spec: {0}")]
    Spec(String),
    #[error("column {column} fed to branch {branch} belongs to {owners}")]
    WrongBranch {
        column: Feature,
        branch: Module,
        owners: String,
    },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("model json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, ZooError>;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchSpec {
    pub name: Module,
    pub layers: Vec<LayerSpec>,
}

impl BranchSpec {
    pub fn new(name: Module, layers: &[LayerSpec]) -> Self {
        Self {
            name,
            layers: layers.to_vec(),
        }
    }

    /// The module's column list; branches always consume their full slice.
    pub fn input_columns(&self) -> Vec<Feature> {
        self.name.columns().to_vec()
    }
}

/// Six branches in module order and a fusion stack; the linear output unit
/// is implicit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MnnSpec {
    pub branches: Vec<BranchSpec>,
    pub fusion: Vec<LayerSpec>,
}

/// Hidden layers over the nine benchmark columns; the linear output unit is
/// implicit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FnnSpec {
    pub input_columns: Vec<Feature>,
    pub layers: Vec<LayerSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Mnn,
    Fnn,
}

impl Arch {
    pub fn name(self) -> &'static str {
        match self {
            Arch::Mnn => "mnn",
            Arch::Fnn => "fnn",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "arch", rename_all = "lowercase")]
pub enum ModelSpec {
    Mnn(MnnSpec),
    Fnn(FnnSpec),
}

const fn l(units: usize, activation: Activation) -> LayerSpec {
    LayerSpec::new(units, activation)
}

const OUTPUT: LayerSpec = LayerSpec::new(1, Activation::Linear);

/// The best published modular configuration.
pub fn paper_best_mnn() -> MnnSpec {
    MnnSpec {
        branches: vec![
            BranchSpec::new(Module::Intrinsic, &[l(128, Swish), l(128, Swish)]),
            BranchSpec::new(Module::Timevol, &[l(32, Relu), l(64, Relu)]),
            BranchSpec::new(Module::Dividend, &[l(64, Relu)]),
            BranchSpec::new(Module::Liquidity, &[l(128, Relu), l(64, Relu)]),
            BranchSpec::new(Module::Macro, &[l(64, Swish)]),
            BranchSpec::new(Module::Greeks, &[l(128, Elu), l(32, Tanh)]),
        ],
        fusion: vec![l(128, Relu), l(32, Tanh)],
    }
}

/// The best benchmark feed-forward configuration.
pub fn paper_best_fnn() -> FnnSpec {
    FnnSpec {
        input_columns: FNN_COLUMNS.to_vec(),
        layers: vec![l(64, Relu), l(128, Relu), l(128, Tanh)],
    }
}

fn check_layers(what: &str, layers: &[LayerSpec]) -> Result<()> {
    if layers.is_empty() {
        return Err(ZooError::Spec(format!("{what} needs at least one hidden layer")));
    }
    if layers.iter().any(|l| l.units == 0) {
        return Err(ZooError::Spec(format!("{what} has a zero-width layer")));
    }
    Ok(())
}

impl MnnSpec {
    pub fn validate(&self) -> Result<()> {
        let names: Vec<Module> = self.branches.iter().map(|b| b.name).collect();
        if names != Module::ALL {
            return Err(ZooError::Spec(format!(
                "branches must be exactly {:?} in order, got {names:?}",
                Module::ALL.map(Module::name)
            )));
        }
        for b in &self.branches {
            check_layers(b.name.name(), &b.layers)?;
        }
        check_layers("fusion", &self.fusion)
    }

    pub fn fusion_fan_in(&self) -> usize {
        self.branches
            .iter()
            .map(|b| b.layers.last().map_or(b.name.columns().len(), |l| l.units))
            .sum()
    }
}

/// Checks that every column fed to `branch` belongs to its module and that
/// the module's slice is complete.
pub fn check_branch_columns(branch: Module, columns: &[Feature]) -> Result<()> {
    for &c in columns {
        if !branch.columns().contains(&c) {
            let owners: Vec<&str> = Module::ALL
                .iter()
                .filter(|m| m.columns().contains(&c))
                .map(|m| m.name())
                .collect();
            return Err(ZooError::WrongBranch {
                column: c,
                branch,
                owners: if owners.is_empty() { "no module".into() } else { owners.join(", ") },
            });
        }
    }
    let mut sorted = columns.to_vec();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != columns.len() || columns.len() != branch.columns().len() {
        return Err(ZooError::Spec(format!(
            "branch {branch} needs its {} columns exactly once, got {}",
            branch.columns().len(),
            columns.len()
        )));
    }
    Ok(())
}

/// Builds the modular network over the 46-slot input layout of
/// [`mnn_input_columns`]; branch `i` reads its module's contiguous slice.
pub fn build_mnn(spec: &MnnSpec, seed: u64) -> Result<Network> {
    spec.validate()?;
    let mut branches = Vec::with_capacity(6);
    let mut offset = 0;
    for b in &spec.branches {
        let cols = b.input_columns();
        check_branch_columns(b.name, &cols)?;
        branches.push((b.name.name().to_string(), (offset..offset + cols.len()).collect(), b.layers.clone()));
        offset += cols.len();
    }
    let input_columns: Vec<String> = mnn_input_columns().iter().map(|f| f.name().to_string()).collect();
    let mut head = spec.fusion.clone();
    head.push(OUTPUT);
    let net = Network::new(input_columns, branches, &head, seed)?;
    if net.fusion_fan_in() != spec.fusion_fan_in() {
        return Err(ZooError::Spec("fusion fan-in mismatch".into()));
    }
    Ok(net)
}

impl FnnSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_columns != FNN_COLUMNS {
            return Err(ZooError::Spec(format!(
                "FNN input columns must be {:?}",
                FNN_COLUMNS.map(Feature::name)
            )));
        }
        check_layers("fnn", &self.layers)
    }
}

pub fn build_fnn(spec: &FnnSpec, seed: u64) -> Result<Network> {
    spec.validate()?;
    let n = spec.input_columns.len();
    let mut head = spec.layers.clone();
    head.push(OUTPUT);
    Ok(Network::new(
        spec.input_columns.iter().map(|f| f.name().to_string()).collect(),
        vec![("inputs".into(), (0..n).collect(), vec![])],
        &head,
        seed,
    )?)
}

impl ModelSpec {
    pub fn arch(&self) -> Arch {
        match self {
            ModelSpec::Mnn(_) => Arch::Mnn,
            ModelSpec::Fnn(_) => Arch::Fnn,
        }
    }

    pub fn paper_best(arch: Arch) -> Self {
        match arch {
            Arch::Mnn => ModelSpec::Mnn(paper_best_mnn()),
            Arch::Fnn => ModelSpec::Fnn(paper_best_fnn()),
        }
    }

    pub fn build(&self, seed: u64) -> Result<Network> {
        match self {
            ModelSpec::Mnn(s) => build_mnn(s, seed),
            ModelSpec::Fnn(s) => build_fnn(s, seed),
        }
    }

    /// Input layout the built network expects.
    pub fn input_columns(&self) -> Vec<Feature> {
        match self {
            ModelSpec::Mnn(_) => mnn_input_columns(),
            ModelSpec::Fnn(s) => s.input_columns.clone(),
        }
    }

    /// Trainable parameter count, computed from the spec alone.
    pub fn param_count(&self) -> usize {
        fn stack(mut fan_in: usize, layers: &[LayerSpec]) -> (usize, usize) {
            let mut n = 0;
            for l in layers {
                n += fan_in * l.units + l.units;
                fan_in = l.units;
            }
            (n, fan_in)
        }
        let (body, fan_in) = match self {
            ModelSpec::Mnn(s) => {
                let mut total = 0;
                let mut fan_in = 0;
                for b in &s.branches {
                    let (n, w) = stack(b.name.columns().len(), &b.layers);
                    total += n;
                    fan_in += w;
                }
                (total, fan_in)
            }
            ModelSpec::Fnn(s) => (0, s.input_columns.len()),
        };
        let head: Vec<LayerSpec> = match self {
            ModelSpec::Mnn(s) => s.fusion.iter().copied().chain([OUTPUT]).collect(),
            ModelSpec::Fnn(s) => s.layers.iter().copied().chain([OUTPUT]).collect(),
        };
        body + stack(fan_in, &head).0
    }
}

/// A trained network with the spec it was built from and the scaler fitted
/// on its training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub scaler: ScalerParams,
    pub network: Network,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    spec: ModelSpec,
    scaler: ScalerParams,
    network: NetworkDoc,
}

impl TrainedModel {
    /// Predictions in price units.
    pub fn predict_prices(&self, rows: &[FeatureRow]) -> Result<Vec<f64>> {
        let x = self.scaler.transform_matrix(rows, &self.spec.input_columns())?;
        let scaled = self.network.predict(x.view())?;
        scaled
            .iter()
            .map(|&s| Ok(self.scaler.inverse_transform_target(s)?))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            spec: self.spec.clone(),
            scaler: self.scaler.clone(),
            network: self.network.to_doc(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(s)?;
        let network = Network::from_doc(&file.network)?;
        let expected: Vec<String> = file.spec.input_columns().iter().map(|f| f.name().to_string()).collect();
        if network.input_columns() != expected.as_slice() {
            return Err(ZooError::Spec("network inputs disagree with the model spec".into()));
        }
        Ok(Self {
            spec: file.spec,
            scaler: file.scaler,
            network,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|source| ZooError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|source| ZooError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&s)
    }
}

/// Train and validation matrices scaled with a scaler fitted on the
/// training rows only.
#[derive(Debug, Clone)]
pub struct ScaledSplit {
    pub scaler: ScalerParams,
    pub train: Dataset,
    pub val: Dataset,
}

impl ScaledSplit {
    pub fn new(split: &Split, columns: &[Feature]) -> Result<Self> {
        let scaler = ScalerParams::fit(&split.train)?;
        let data = |rows: &[FeatureRow]| -> Result<Dataset> {
            Ok(Dataset::new(
                scaler.transform_matrix(rows, columns)?,
                scaler.transform_targets(rows)?,
            )?)
        };
        let train = data(&split.train)?;
        let val = data(&split.val)?;
        Ok(Self { scaler, train, val })
    }
}

/// Builds `spec` with `cfg.seed` and trains it on `data`.
pub fn train_model(spec: &ModelSpec, data: &ScaledSplit, cfg: &TrainConfig) -> Result<(TrainedModel, History)> {
    let net = spec.build(cfg.seed)?;
    let (network, history) = train(net, &data.train, &data.val, cfg)?;
    Ok((
        TrainedModel {
            spec: spec.clone(),
            scaler: data.scaler.clone(),
            network,
        },
        history,
    ))
}
