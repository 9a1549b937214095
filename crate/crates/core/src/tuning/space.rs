use serde::{Deserialize, Serialize};

use super::{Result, TuningError};
use crate::features::{Module, FNN_COLUMNS};
use crate::nn::{Activation, LayerSpec};
use crate::zoo::{paper_best_fnn, paper_best_mnn, Arch, BranchSpec, FnnSpec, MnnSpec, ModelSpec};

/// Layer choices for one stack. Configurations are ordered by depth, then
/// lexicographically by layer with the first layer most significant; within
/// a layer, units vary slower than activation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StackSpace {
    pub units: Vec<usize>,
    pub activations: Vec<Activation>,
    pub min_depth: usize,
    pub max_depth: usize,
}

impl StackSpace {
    fn per_layer(&self) -> u64 {
        (self.units.len() * self.activations.len()) as u64
    }

    fn checked_size(&self) -> Option<u64> {
        let c = self.per_layer();
        (self.min_depth..=self.max_depth).try_fold(0u64, |acc, d| {
            c.checked_pow(d as u32).and_then(|b| acc.checked_add(b))
        })
    }

    pub fn size(&self) -> u64 {
        self.checked_size().expect("validated space")
    }

    /// Decodes a configuration index; panics if `code >= size()`.
    pub fn decode(&self, mut code: u64) -> Vec<LayerSpec> {
        let c = self.per_layer();
        for d in self.min_depth..=self.max_depth {
            let block = c.pow(d as u32);
            if code < block {
                let mut digits = vec![0u64; d];
                for slot in digits.iter_mut().rev() {
                    *slot = code % c;
                    code /= c;
                }
                let na = self.activations.len() as u64;
                return digits
                    .into_iter()
                    .map(|g| {
                        LayerSpec::new(self.units[(g / na) as usize], self.activations[(g % na) as usize])
                    })
                    .collect();
            }
            code -= block;
        }
        panic!("configuration index out of range")
    }

    pub fn encode(&self, layers: &[LayerSpec]) -> Option<u64> {
        let d = layers.len();
        if d < self.min_depth || d > self.max_depth {
            return None;
        }
        let c = self.per_layer();
        let offset: u64 = (self.min_depth..d).map(|k| c.pow(k as u32)).sum();
        let na = self.activations.len() as u64;
        let mut code = 0u64;
        for layer in layers {
            let u = self.units.iter().position(|&u| u == layer.units)? as u64;
            let a = self.activations.iter().position(|&a| a == layer.activation)? as u64;
            code = code * c + u * na + a;
        }
        Some(offset + code)
    }
}

fn default_units() -> Vec<usize> {
    vec![32, 64, 128]
}

fn default_activations() -> Vec<Activation> {
    vec![Activation::Relu, Activation::Elu, Activation::Tanh, Activation::Swish]
}

fn default_branch_depth() -> [usize; 2] {
    [1, 2]
}

fn default_head_depth() -> [usize; 2] {
    [1, 3]
}

/// Hyper-parameter space. The default is the published one; every field can
/// be overridden from a run configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpace {
    #[serde(default = "default_units")]
    pub units: Vec<usize>,
    #[serde(default = "default_activations")]
    pub activations: Vec<Activation>,
    /// Inclusive depth range of each MNN branch.
    #[serde(default = "default_branch_depth")]
    pub branch_depth: [usize; 2],
    /// Inclusive depth range of the fusion stack and of the FNN.
    #[serde(default = "default_head_depth")]
    pub head_depth: [usize; 2],
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            units: default_units(),
            activations: default_activations(),
            branch_depth: default_branch_depth(),
            head_depth: default_head_depth(),
        }
    }
}

impl SearchSpace {
    fn stack(&self, depth: [usize; 2]) -> StackSpace {
        StackSpace {
            units: self.units.clone(),
            activations: self.activations.clone(),
            min_depth: depth[0],
            max_depth: depth[1],
        }
    }

    pub fn branch_space(&self) -> StackSpace {
        self.stack(self.branch_depth)
    }

    pub fn head_space(&self) -> StackSpace {
        self.stack(self.head_depth)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(TuningError::Space(m.to_string()));
        if self.units.is_empty() || self.units.contains(&0) {
            return bad("units must be a non-empty list of positive widths");
        }
        if self.activations.is_empty() {
            return bad("activations must not be empty");
        }
        let mut u = self.units.clone();
        u.sort_unstable();
        u.dedup();
        let mut a = self.activations.clone();
        a.sort_unstable();
        a.dedup();
        if u.len() != self.units.len() || a.len() != self.activations.len() {
            return bad("units and activations must not repeat");
        }
        for (what, [lo, hi]) in [("branch_depth", self.branch_depth), ("head_depth", self.head_depth)] {
            if lo == 0 || lo > hi {
                return Err(TuningError::Space(format!("{what} must satisfy 1 <= min <= max")));
            }
        }
        let branch = self.branch_space().checked_size();
        let head = self.head_space().checked_size();
        let joint = match (branch, head) {
            (Some(b), Some(h)) => b.checked_pow(Module::ALL.len() as u32).and_then(|x| x.checked_mul(h)),
            _ => None,
        };
        if joint.is_none() {
            return bad("search space is too large to index");
        }
        Ok(())
    }

    /// Number of configurations for `arch`.
    pub fn size(&self, arch: Arch) -> u64 {
        match arch {
            Arch::Fnn => self.head_space().size(),
            Arch::Mnn => self.branch_space().size().pow(Module::ALL.len() as u32) * self.head_space().size(),
        }
    }

    /// Decodes a joint index; for the MNN the first branch is the most
    /// significant digit and the fusion stack the least.
    pub fn decode(&self, arch: Arch, code: u64) -> Result<ModelSpec> {
        let size = self.size(arch);
        if code >= size {
            return Err(TuningError::Space(format!("index {code} outside 0..{size}")));
        }
        let head = self.head_space();
        Ok(match arch {
            Arch::Fnn => ModelSpec::Fnn(FnnSpec {
                input_columns: FNN_COLUMNS.to_vec(),
                layers: head.decode(code),
            }),
            Arch::Mnn => {
                let branch = self.branch_space();
                let (bs, hs) = (branch.size(), head.size());
                let fusion = head.decode(code % hs);
                let mut rest = code / hs;
                let mut branches = Vec::with_capacity(Module::ALL.len());
                for m in Module::ALL.iter().rev() {
                    branches.push(BranchSpec {
                        name: *m,
                        layers: branch.decode(rest % bs),
                    });
                    rest /= bs;
                }
                branches.reverse();
                ModelSpec::Mnn(MnnSpec { branches, fusion })
            }
        })
    }

    pub fn encode(&self, spec: &ModelSpec) -> Option<u64> {
        let head = self.head_space();
        match spec {
            ModelSpec::Fnn(f) => {
                if f.input_columns != FNN_COLUMNS {
                    return None;
                }
                head.encode(&f.layers)
            }
            ModelSpec::Mnn(m) => {
                if m.branches.len() != Module::ALL.len() {
                    return None;
                }
                let branch = self.branch_space();
                let mut code = 0u64;
                for (b, module) in m.branches.iter().zip(Module::ALL) {
                    if b.name != module {
                        return None;
                    }
                    code = code * branch.size() + branch.encode(&b.layers)?;
                }
                Some(code * head.size() + head.encode(&m.fusion)?)
            }
        }
    }

    pub fn contains(&self, spec: &ModelSpec) -> bool {
        self.encode(spec).is_some()
    }

    /// Stages tuned one at a time by the greedy strategy.
    pub fn stages(&self, arch: Arch) -> Vec<StackSpace> {
        match arch {
            Arch::Fnn => vec![self.head_space()],
            Arch::Mnn => {
                let mut s = vec![self.branch_space(); Module::ALL.len()];
                s.push(self.head_space());
                s
            }
        }
    }

    /// Starting point of the greedy strategy: the published configuration
    /// when it lies in this space, otherwise the first configuration.
    pub fn default_spec(&self, arch: Arch) -> ModelSpec {
        let best = match arch {
            Arch::Mnn => ModelSpec::Mnn(paper_best_mnn()),
            Arch::Fnn => ModelSpec::Fnn(paper_best_fnn()),
        };
        if self.contains(&best) {
            best
        } else {
            self.decode(arch, 0).expect("non-empty space")
        }
    }

    /// Replaces one stage of `spec` (a branch index, or the head as the last
    /// stage) with `layers`.
    pub fn with_stage(&self, spec: &ModelSpec, stage: usize, layers: Vec<LayerSpec>) -> ModelSpec {
        let mut out = spec.clone();
        match &mut out {
            ModelSpec::Fnn(f) => f.layers = layers,
            ModelSpec::Mnn(m) => {
                if stage < m.branches.len() {
                    m.branches[stage].layers = layers;
                } else {
                    m.fusion = layers;
                }
            }
        }
        out
    }
}
